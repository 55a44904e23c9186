use super::*;
use crate::cells::project_input;
use rand::{Rng, SeedableRng};

fn random_signal(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn params_for(cond_dim: usize) -> Vec<f64> {
    (0..cond_dim).map(|i| 0.3 + 0.2 * i as f64).collect()
}

#[test]
fn zero_weights_output_bias() {
    for arch in Architecture::ALL {
        let mut w = ModelWeights::zeros(&ModelConfig::new(arch, 2));
        w.out.bias.set(0, 0, 0.37);
        let m = Model::new(ModelConfig::new(arch, 2), w).unwrap();
        let mut st = m.initial_state();
        let y = m
            .forward_segment(&mut st, &random_signal(200, 1), &[0.1, 0.9])
            .unwrap();
        assert!(y.iter().all(|&v| v == 0.37), "{arch}");
    }
}

#[test]
fn zero_input_zero_biases_give_zero() {
    for arch in Architecture::ALL {
        let mut m = Model::init(ModelConfig::new(arch, 2), 5).unwrap();
        let mut w = m.weights().clone();
        for (name, t) in w.tensors_mut() {
            if name.ends_with("bias") || name.contains(".bh_") || name.ends_with("bias_o") {
                t.fill(0.0);
            }
        }
        m.set_weights(w).unwrap();
        let mut st = m.initial_state();
        let y = m
            .forward_segment(&mut st, &[0.0; 100], &[0.0, 0.0])
            .unwrap();
        assert!(y.iter().all(|&v| v == 0.0), "{arch}");
    }
}

/// Recomputes one sample from the public per-module operations.
fn composed_oracle(
    m: &Model,
    rec: &RecurrentState,
    window: &InputWindow,
    p: &[f64],
) -> (f64, RecurrentState) {
    let w = m.weights();
    let arch = m.architecture();
    let x: Vec<f64> = if arch == Architecture::Ed {
        window.decoder_half().to_vec()
    } else {
        window.as_slice().to_vec()
    };
    let u = w.proj.forward(&x).unwrap();
    let (o, next): (Vec<f64>, RecurrentState) = match (&w.core, rec) {
        (CoreWeights::Lstm(c), RecurrentState::Lstm(s)) => {
            let (n, h) = c.step(s, &u).unwrap();
            (h.to_vec(), RecurrentState::Lstm(n))
        }
        (CoreWeights::Ed(c), RecurrentState::Ed(s)) => {
            let (n, h) = c.step(s, &u, window.encoder_half()).unwrap();
            (h.to_vec(), RecurrentState::Ed(n))
        }
        (CoreWeights::Lru(c), RecurrentState::Lru(h)) => {
            let (n, o) = c.step(h, &u).unwrap();
            (o.to_vec(), RecurrentState::Lru(n))
        }
        (CoreWeights::S4d(c), RecurrentState::S4d(h)) => {
            let (n, o) = c.step(h, &u).unwrap();
            (o.to_vec(), RecurrentState::S4d(n))
        }
        (CoreWeights::S6(c), RecurrentState::S6(h)) => {
            let (n, o) = c.step(h, &u).unwrap();
            (o.to_vec(), RecurrentState::S6(n))
        }
        _ => unreachable!(),
    };
    let mut post = w.post.forward(&o).unwrap();
    if arch.is_ssm() {
        post.iter_mut().for_each(|v| *v = v.tanh());
    }
    let oc = conditioning_apply(&w.cond, &post, p).unwrap();
    (w.out.forward(&oc).unwrap()[0], next)
}

#[test]
fn forward_sample_matches_composed_oracle() {
    for arch in Architecture::ALL {
        let m = Model::init(ModelConfig::new(arch, 2), 11).unwrap();
        let p = params_for(2);
        let sig = random_signal(300, 3);
        let mut st = m.initial_state();
        let mut rec = arch.zero_state();
        for n in 0..sig.len() {
            let win = InputWindow::ending_at(&sig, n);
            let y = m.forward_sample(&mut st, &win, &p).unwrap();
            let (yo, next) = composed_oracle(&m, &rec, &win, &p);
            rec = next;
            assert!((y - yo).abs() <= 1e-10 * yo.abs().max(1.0), "{arch} n={n}");
        }
        let _ = project_input(&m.weights().proj, &InputWindow::zeros());
    }
}

#[test]
fn single_sample_segment_equals_forward_sample() {
    for arch in Architecture::ALL {
        let m = Model::init(ModelConfig::new(arch, 1), 2).unwrap();
        let sig = random_signal(64, 8);
        let mut a = m.initial_state();
        let mut b = m.initial_state();
        m.forward_segment(&mut a, &sig[..63], &[0.5]).unwrap();
        m.forward_segment(&mut b, &sig[..63], &[0.5]).unwrap();
        let y1 = m.forward_segment(&mut a, &sig[63..], &[0.5]).unwrap();
        let y2 = m
            .forward_sample(&mut b, &InputWindow::ending_at(&sig, 63), &[0.5])
            .unwrap();
        assert_eq!(y1[0], y2);
        assert_eq!(a, b);
    }
}

#[test]
fn split_segments_match_unsplit() {
    for arch in Architecture::ALL {
        let m = Model::init(ModelConfig::new(arch, 2), 4).unwrap();
        let p = params_for(2);
        let sig = random_signal(1000, 6);
        let mut st = m.initial_state();
        let whole = m.forward_segment(&mut st, &sig, &p).unwrap();
        for split in [1, 37, 63, 64, 500, 999] {
            let mut st = m.initial_state();
            let mut y = m.forward_segment(&mut st, &sig[..split], &p).unwrap();
            y.extend(m.forward_segment(&mut st, &sig[split..], &p).unwrap());
            for (a, b) in y.iter().zip(&whole) {
                assert!((a - b).abs() <= 1e-12, "{arch} split={split}");
            }
        }
    }
}

#[test]
fn uninitialized_state_rejected() {
    let m = Model::init(ModelConfig::new(Architecture::Lstm, 0), 1).unwrap();
    let mut st = ModelState::default();
    assert!(matches!(
        m.process_sample(&mut st, 0.1, &[]),
        Err(Error::State(_))
    ));
    let other = Model::init(ModelConfig::new(Architecture::S6, 0), 1).unwrap();
    let mut wrong = other.initial_state();
    assert!(matches!(
        m.process_sample(&mut wrong, 0.1, &[]),
        Err(Error::State(_))
    ));
}

#[test]
fn out_of_range_params_rejected() {
    let m = Model::init(ModelConfig::new(Architecture::Lru, 2), 1).unwrap();
    let mut st = m.initial_state();
    assert!(matches!(
        m.process_sample(&mut st, 0.0, &[0.5, 1.5]),
        Err(Error::Input(_))
    ));
    assert!(matches!(
        m.process_sample(&mut st, 0.0, &[0.5]),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn output_layer_is_linear() {
    let m = Model::init(ModelConfig::new(Architecture::S4d, 1), 9).unwrap();
    let sig = random_signal(200, 1);
    let y = m
        .forward_segment(&mut m.initial_state(), &sig, &[0.2])
        .unwrap();
    let mut w = m.weights().clone();
    w.out.weight.scale(-2.5);
    w.out.bias.scale(-2.5);
    let m2 = Model::new(m.config().clone(), w).unwrap();
    let y2 = m2
        .forward_segment(&mut m2.initial_state(), &sig, &[0.2])
        .unwrap();
    for (a, b) in y.iter().zip(&y2) {
        assert!((b - (-2.5) * a).abs() < 1e-12);
    }
}

#[test]
fn conditioning_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cb = ModelWeights::init(&ModelConfig::new(Architecture::Lstm, 3), &mut rng).cond;
    let o = [0.4, -0.3, 0.8, 0.1];
    let p = [0.2, 0.5, 1.0];

    let mut zero_film = cb.clone();
    let film = zero_film.film.as_mut().unwrap();
    film.weight.fill(0.0);
    film.bias.fill(0.0);
    zero_film.glu.bias.fill(0.0);
    assert_eq!(
        conditioning_apply(&zero_film, &o, &p).unwrap(),
        vec![0.0; 4]
    );

    let mut gate_off = cb.clone();
    for r in POST_WIDTH..FILM_WIDTH {
        for c in 0..POST_WIDTH {
            gate_off.glu.weight.set(r, c, 0.0);
        }
        gate_off.glu.bias.set(r, 0, 0.0);
    }
    assert_eq!(conditioning_apply(&gate_off, &o, &p).unwrap(), vec![0.0; 4]);

    assert!(matches!(
        conditioning_apply(&cb, &o, &[0.2, 0.5, -0.1]),
        Err(Error::Input(_))
    ));

    for b in cb.glu.bias.as_mut_slice() {
        *b = rng.random_range(-1.0..1.0);
    }
    let got = conditioning_apply(&cb, &o, &p).unwrap();
    let film = cb.film.as_ref().unwrap();
    for k in 0..POST_WIDTH {
        let lin = |r: usize, x: &[f64], w: &crate::cells::Dense| {
            w.bias.get(r, 0) + (0..x.len()).map(|j| w.weight.get(r, j) * x[j]).sum::<f64>()
        };
        let q: Vec<f64> = (0..POST_WIDTH)
            .map(|i| lin(i, &p, film) * o[i] + lin(POST_WIDTH + i, &p, film))
            .collect();
        let q1 = lin(k, &q, &cb.glu);
        let q2 = lin(POST_WIDTH + k, &q, &cb.glu);
        let expect = q1 * q2 / (1.0 + q2.abs());
        assert!((got[k] - expect).abs() < 1e-12);
    }
}

#[test]
fn lstm_parameter_breakdown() {
    let m = Model::init(ModelConfig::new(Architecture::Lstm, 2), 0).unwrap();
    let sizes: std::collections::BTreeMap<&str, usize> = m
        .weights()
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.len()))
        .collect();
    assert_eq!(sizes["proj.weight"] + sizes["proj.bias"], 64 * 4 + 4);
    assert_eq!(
        sizes["lstm.w_h"] + sizes["lstm.w_u"] + sizes["lstm.bias"],
        4 * (8 * (8 + 4) + 8)
    );
    assert_eq!(sizes["post.weight"] + sizes["post.bias"], 8 * 4 + 4);
    assert_eq!(sizes["film.weight"] + sizes["film.bias"], 2 * 8 + 8);
    assert_eq!(sizes["glu.weight"] + sizes["glu.bias"], 4 * 8 + 8);
    assert_eq!(sizes["out.weight"] + sizes["out.bias"], 4 + 1);
    assert_eq!(m.count_params(), 781);
}

#[test]
fn no_conditioning_drops_film() {
    for arch in Architecture::ALL {
        let with = Model::init(ModelConfig::new(arch, 2), 0).unwrap();
        let without = Model::init(ModelConfig::new(arch, 0), 0).unwrap();
        assert_eq!(with.count_params() - without.count_params(), 2 * 8 + 8);
        assert!(without
            .weights()
            .tensors()
            .iter()
            .all(|(n, _)| !n.starts_with("film")));
    }
}

#[test]
fn budgets() {
    for arch in Architecture::ALL {
        let m = Model::init(ModelConfig::new(arch, 2), 0).unwrap();
        let n = m.count_params();
        assert!((600..=1000).contains(&n), "{arch}: {n} params");
        let f = m.count_flops();
        assert_eq!(
            f.total,
            f.projection + f.recurrent_layer + f.post_layer + f.conditioning_block + f.output_layer
        );
        assert!(f.total <= 1500, "{arch}: {} flops", f.total);
        assert!(
            f.deviation().abs() <= 0.2,
            "{arch}: {} vs {}",
            f.total,
            f.reference_total
        );
        assert_eq!(f.reference_conditioning, 120);
    }
    let lstm = REFERENCE_FLOPS
        .iter()
        .find(|(a, _)| *a == Architecture::Lstm)
        .unwrap();
    assert_eq!(lstm.1, 1160);
}

#[test]
fn checkpoint_roundtrip_is_byte_exact() {
    for arch in Architecture::ALL {
        let m = Model::init(ModelConfig::new(arch, 2), 7).unwrap();
        let mut ck = Checkpoint::from_model(&m);
        ck.train_loss = vec![0.5, 0.25];
        ck.val_loss = vec![0.6, 0.3];
        ck.lr = vec![3e-4, 3e-4];
        ck.best_epoch = Some(1);
        ck.meta.insert("dataset".into(), "waveshaper".into());
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        let m2 = back.to_model().unwrap();
        let sig = random_signal(128, 2);
        let p = params_for(2);
        assert_eq!(
            m.forward_segment(&mut m.initial_state(), &sig, &p).unwrap(),
            m2.forward_segment(&mut m2.initial_state(), &sig, &p)
                .unwrap()
        );
        for cut in [0, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(
                Checkpoint::from_bytes(&bytes[..cut]),
                Err(Error::Format(_))
            ));
        }
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(matches!(
            Checkpoint::from_bytes(&flipped),
            Err(Error::Format(_))
        ));
    }
}

#[test]
fn checkpoint_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let m = Model::init(ModelConfig::new(Architecture::Ed, 1), 1).unwrap();
    save_checkpoint(&Checkpoint::from_model(&m), &path).unwrap();
    let first = std::fs::read(&path).unwrap();
    let ck = load_checkpoint(&path).unwrap();
    save_checkpoint(&ck, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn unstable_weights_rejected() {
    let mut m = Model::init(ModelConfig::new(Architecture::Lru, 0), 1).unwrap();
    let mut w = m.weights().clone();
    if let CoreWeights::Lru(c) = &mut w.core {
        c.nu.set(0, 0, -1e3);
    }
    assert!(matches!(m.set_weights(w), Err(Error::Stability(_))));
    assert!(m.process_sample(&mut m.initial_state(), 0.1, &[]).is_ok());
}
