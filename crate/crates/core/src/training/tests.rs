use super::*;
use crate::model::{Architecture, ModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(n: usize, seed: u64, amp: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| amp * rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn mse_examples() {
    assert_eq!(loss_mse(&[0.3, -0.2], &[0.3, -0.2]).unwrap(), 0.0);
    assert_eq!(loss_mse(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
    let y = noise(50, 1, 1.0);
    let z = noise(50, 2, 1.0);
    let a = 3.0;
    let ys: Vec<f64> = y.iter().map(|v| a * v).collect();
    let zs: Vec<f64> = z.iter().map(|v| a * v).collect();
    let l = loss_mse(&y, &z).unwrap();
    assert!((loss_mse(&ys, &zs).unwrap() - a * a * l).abs() < 1e-12);
    assert!(matches!(loss_mse(&[], &[]), Err(Error::Input(_))));
}

#[test]
fn learning_rate_schedules() {
    let mut cfg = TrainConfig {
        lr_schedule: LrSchedule::Literal,
        ..TrainConfig::default()
    };
    assert_eq!(lr_at_epoch(&cfg, 0), 3e-4);
    assert!((lr_at_epoch(&cfg, 1) - 7.5e-5).abs() < 1e-18);
    assert!((lr_at_epoch(&cfg, 2) - 1.875e-5).abs() < 1e-18);
    cfg.lr_schedule = LrSchedule::Staged;
    assert_eq!(lr_at_epoch(&cfg, 49), 3e-4);
    assert!((lr_at_epoch(&cfg, 50) - 7.5e-5).abs() < 1e-18);
    assert!((lr_at_epoch(&cfg, 199) - 3e-4 * 0.25f64.powi(3)).abs() < 1e-18);
}

#[test]
fn config_text_roundtrip() {
    let cfg = TrainConfig {
        max_epochs: 7,
        target_val_esr: Some(0.01),
        lr_schedule: LrSchedule::Literal,
        ..TrainConfig::default()
    };
    assert_eq!(TrainConfig::parse(&cfg.to_text()).unwrap(), cfg);
    let parsed = TrainConfig::parse("# comment\n batch_size = 4 # trailing\n\n").unwrap();
    assert_eq!(parsed.batch_size, 4);
    assert!(TrainConfig::parse("bogus = 1").is_err());
    assert!(TrainConfig::parse("batch_size = 0").is_err());
    assert!(TrainConfig::parse("no equals sign").is_err());
}

fn grad_with_norm(model: &Model, norm: f64) -> GradientSet {
    let mut g = GradientSet::zeros_for(model);
    g.0.out.bias.set(0, 0, norm * 0.6);
    g.0.proj.weight.set(0, 0, norm * 0.8);
    g
}

#[test]
fn clipping() {
    let m = Model::init(ModelConfig::new(Architecture::Lstm, 1), 0).unwrap();
    let mut g = grad_with_norm(&m, 0.5);
    let before = g.clone();
    clip_grad_norm(&mut g, 1.0);
    assert_eq!(g, before);
    let mut g = grad_with_norm(&m, 2.0);
    clip_grad_norm(&mut g, 1.0);
    assert!((g.global_norm() - 1.0).abs() < 1e-12);
    assert!((g.0.out.bias.get(0, 0) - 0.6).abs() < 1e-12);
    let mut z = GradientSet::zeros_for(&m);
    clip_grad_norm(&mut z, 1.0);
    assert_eq!(z, GradientSet::zeros_for(&m));
}

#[test]
fn adam_steps() {
    let m = Model::init(ModelConfig::new(Architecture::S6, 0), 0).unwrap();
    let mut w = m.weights().clone();
    let mut mom = AdamMoments::new(w.num_scalars());
    adam_update(
        &mut w,
        &GradientSet::zeros_for(&m),
        &mut mom,
        1e-3,
        &AdamConfig::default(),
    )
    .unwrap();
    assert_eq!(&w, m.weights());

    let mut w = m.weights().clone();
    let mut mom = AdamMoments::new(w.num_scalars());
    let mut g = GradientSet::zeros_for(&m);
    g.0.out.bias.set(0, 0, 1.0);
    let lr = 3e-4;
    let b0 = w.out.bias.get(0, 0);
    adam_update(&mut w, &g, &mut mom, lr, &AdamConfig::default()).unwrap();
    assert!((w.out.bias.get(0, 0) - (b0 - lr)).abs() < 1e-6 * lr);
}

#[test]
fn zero_model_gradient_only_on_output_bias() {
    for arch in Architecture::ALL {
        let cfg = ModelConfig::new(arch, 1);
        let mut w = crate::model::ModelWeights::zeros(&cfg);
        w.out.bias.set(0, 0, 0.25);
        let m = Model::new(cfg, w).unwrap();
        let x = noise(64, 3, 0.5);
        let (loss, g) =
            backward_segment(&m, &mut m.initial_state(), &x, &[0.0; 64], &[0.4]).unwrap();
        assert!((loss - 0.0625).abs() < 1e-15);
        for (name, t) in g.tensors() {
            if name == "out.bias" {
                assert!((t.get(0, 0) - 0.5).abs() < 1e-15);
            } else {
                assert!(t.as_slice().iter().all(|&v| v == 0.0), "{arch} {name}");
            }
        }
    }
}

fn randomized(arch: Architecture, seed: u64) -> Model {
    let mut m = Model::init(ModelConfig::new(arch, 2), seed).unwrap();
    let mut w = m.weights().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    for (name, t) in w.tensors_mut() {
        if name.ends_with("bias") || name.contains("bh_") || name.ends_with(".d") {
            for v in t.as_mut_slice() {
                *v += rng.random_range(-0.3..0.3);
            }
        }
    }
    m.set_weights(w).unwrap();
    m
}

#[test]
fn gradients_match_finite_differences() {
    for arch in Architecture::ALL {
        let m = randomized(arch, 21);
        let mut st = m.initial_state();
        let warm = noise(100, 4, 0.8);
        m.forward_segment(&mut st, &warm, &[0.3, 0.7]).unwrap();
        let x = noise(64, 5, 0.8);
        let t = noise(64, 6, 0.5);
        let r = finite_difference_audit(&m, &st, &x, &t, &[0.3, 0.7], 1e-6).unwrap();
        assert_eq!(r.checked, m.count_params());
        assert!(r.max_rel_error < 1e-4, "{arch}: {r:?}");
    }
}

#[test]
fn audit_error_does_not_grow_when_step_halves() {
    let m = randomized(Architecture::Lru, 3);
    let st = m.initial_state();
    let x = noise(64, 7, 0.8);
    let t = noise(64, 8, 0.5);
    let coarse = finite_difference_audit(&m, &st, &x, &t, &[0.1, 0.2], 1e-4).unwrap();
    let fine = finite_difference_audit(&m, &st, &x, &t, &[0.1, 0.2], 5e-5).unwrap();
    assert!(fine.max_rel_error <= coarse.max_rel_error.max(1e-7));
}

#[test]
fn zero_model_audit_is_exact_on_structural_zeros() {
    let cfg = ModelConfig::new(Architecture::Lstm, 1);
    let m = Model::zeros(cfg).unwrap();
    let x = noise(64, 1, 0.5);
    let r = finite_difference_audit(&m, &m.initial_state(), &x, &[0.0; 64], &[0.5], 1e-6).unwrap();
    assert!(r.max_rel_error < 1e-8, "{r:?}");
}

#[test]
fn truncation_is_exact() {
    for arch in Architecture::ALL {
        let m = randomized(arch, 9);
        let x = noise(200, 1, 0.7);
        let t = noise(200, 2, 0.5);
        let p = [0.5, 0.5];
        let mut st = m.initial_state();
        let (_, g1) = backward_segment(&m, &mut st, &x[..100], &t[..100], &p).unwrap();
        let carried = st.clone();
        let (_, g2) = backward_segment(&m, &mut st, &x[100..], &t[100..], &p).unwrap();

        let mut fresh = m.initial_state();
        let (_, h1) = backward_segment(&m, &mut fresh, &x[..100], &t[..100], &p).unwrap();
        let (_, h2) = backward_segment(&m, &mut carried.clone(), &x[100..], &t[100..], &p).unwrap();
        assert_eq!(g1, h1);
        assert_eq!(g2, h2);
    }
}

fn tiny_identity_streams(seed: u64) -> (Vec<Stream>, Vec<Stream>) {
    let a = noise(4000, seed, 0.5);
    let b = noise(2000, seed + 1, 0.5);
    (
        vec![Stream::new(a.clone(), a, vec![], "train").unwrap()],
        vec![Stream::new(b.clone(), b, vec![], "val").unwrap()],
    )
}

#[test]
fn training_is_deterministic() {
    let (tr, va) = tiny_identity_streams(1);
    let cfg = TrainConfig {
        max_epochs: 2,
        segment_len: 500,
        initial_lr: 1e-3,
        ..TrainConfig::default()
    };
    let m = Model::init(ModelConfig::new(Architecture::Lstm, 0), 1).unwrap();
    let a = train(m.clone(), &tr, &va, &cfg).unwrap();
    let b = train(m, &tr, &va, &cfg).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model.weights(), b.model.weights());
    assert_eq!(a.history.epochs.len(), 2);
}

#[test]
fn zero_patience_stops_on_first_regression() {
    let (tr, va) = tiny_identity_streams(2);
    let cfg = TrainConfig {
        max_epochs: 30,
        patience: 0,
        segment_len: 500,
        initial_lr: 0.05,
        ..TrainConfig::default()
    };
    let m = Model::init(ModelConfig::new(Architecture::S4d, 0), 1).unwrap();
    let out = train(m, &tr, &va, &cfg).unwrap();
    let h = &out.history;
    if h.epochs.len() < 30 {
        let last = h.epochs.last().unwrap();
        let prev_best = h.epochs[..h.epochs.len() - 1]
            .iter()
            .map(|e| e.val_loss)
            .fold(f64::INFINITY, f64::min);
        assert!(last.val_loss >= prev_best);
    }
    let best = h.best().unwrap();
    assert!(h.epochs.iter().all(|e| e.val_loss >= best.val_loss));
}
