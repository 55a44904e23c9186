use super::GradientSet;
use crate::cells::{LstmState, ED_HALF, LSTM_UNITS, POST_WIDTH, SSM_WIDTH};
use crate::error::{Error, Result};
use crate::model::{CoreTrace, CoreWeights, Derived, Model, ModelState, SegmentTrace, FILM_WIDTH};
use crate::numerics::{softsign, softsign_grad};

/// Loss and exact gradients of the segment MSE.
///
/// `state` enters as the state carried from the previous segment and leaves
/// advanced past this one. Gradients do not flow into the incoming state.
pub fn backward_segment(
    model: &Model,
    state: &mut ModelState,
    segment: &[f64],
    target: &[f64],
    p: &[f64],
) -> Result<(f64, GradientSet)> {
    if segment.len() != target.len() {
        return Err(Error::Dimension(format!(
            "segment has {} samples, target {}",
            segment.len(),
            target.len()
        )));
    }
    if segment.is_empty() {
        return Err(Error::Input("empty training segment".into()));
    }
    let trace = model.forward_traced(state, segment, p)?;
    let n = segment.len();
    let scale = 2.0 / n as f64;
    let mut loss = 0.0;
    let mut dy = Vec::with_capacity(n);
    for (y, t) in trace.outputs.iter().zip(target) {
        let e = y - t;
        loss += e * e;
        dy.push(scale * e);
    }
    loss /= n as f64;
    let mut grad = GradientSet::zeros_for(model);
    backprop(model, &trace, &dy, p, &mut grad);
    if !loss.is_finite() || !grad.all_finite() {
        return Err(Error::Numeric(format!(
            "non-finite loss ({loss}) or gradient"
        )));
    }
    Ok((loss, grad))
}

fn backprop(model: &Model, trace: &SegmentTrace, dy: &[f64], p: &[f64], grad: &mut GradientSet) {
    let arch = model.architecture();
    let w = model.weights();
    let g = &mut grad.0;
    let n = dy.len();
    let ud = arch.proj_width();
    let cd = arch.core_width();
    let mut d_core = vec![0.0; n * cd];
    let mut d_film = [0.0; FILM_WIDTH];

    for (t, s) in trace.samples.iter().enumerate() {
        let mut doc = [0.0; POST_WIDTH];
        w.out
            .backward(&s.oc, &dy[t..t + 1], &mut g.out, Some(&mut doc));
        let mut dg = [0.0; FILM_WIDTH];
        for k in 0..POST_WIDTH {
            let (g1, g2) = (s.g[k], s.g[POST_WIDTH + k]);
            dg[k] = doc[k] * softsign(g2);
            dg[POST_WIDTH + k] = doc[k] * g1 * softsign_grad(g2);
        }
        let mut dq = [0.0; POST_WIDTH];
        w.cond
            .glu
            .backward(&s.q, &dg, &mut g.cond.glu, Some(&mut dq));
        let mut dpost = dq;
        if let Some(f) = &trace.film {
            for k in 0..POST_WIDTH {
                d_film[k] += dq[k] * s.post[k];
                d_film[POST_WIDTH + k] += dq[k];
                dpost[k] = dq[k] * f[k];
            }
        }
        if arch.is_ssm() {
            for k in 0..POST_WIDTH {
                dpost[k] *= 1.0 - s.post[k] * s.post[k];
            }
        }
        w.post.backward(
            &s.core_out[..cd],
            &dpost,
            &mut g.post,
            Some(&mut d_core[t * cd..(t + 1) * cd]),
        );
    }
    if let (Some(film), Some(gf)) = (&w.cond.film, &mut g.cond.film) {
        film.backward(p, &d_film, gf, None);
    }

    let mut d_u = vec![0.0; n * ud];
    match (&w.core, &mut g.core, &trace.core, &model.derived) {
        (CoreWeights::Lstm(c), CoreWeights::Lstm(gc), CoreTrace::Lstm(tr), _) => {
            let mut carry = LstmState::default();
            for t in (0..n).rev() {
                let mut dh = [0.0; LSTM_UNITS];
                for k in 0..LSTM_UNITS {
                    dh[k] = d_core[t * cd + k] + carry.h[k];
                }
                let u = &trace.samples[t].u[..ud];
                let (dh_prev, dc_prev) =
                    c.backward_step(&tr[t], u, &dh, &carry.c, gc, &mut d_u[t * ud..(t + 1) * ud]);
                carry = LstmState {
                    h: dh_prev,
                    c: dc_prev,
                };
            }
        }
        (CoreWeights::Ed(c), CoreWeights::Ed(gc), CoreTrace::Ed(tr), _) => {
            let mut carry = LstmState::default();
            for t in (0..n).rev() {
                let mut dh = [0.0; LSTM_UNITS];
                for k in 0..LSTM_UNITS {
                    dh[k] = d_core[t * cd + k] + carry.h[k];
                }
                let s = &trace.samples[t];
                let (dh_prev, dc_prev) = c.backward_step(
                    &tr[t],
                    &s.u[..ud],
                    &s.window[ED_HALF..],
                    &dh,
                    &carry.c,
                    gc,
                    &mut d_u[t * ud..(t + 1) * ud],
                );
                carry = LstmState {
                    h: dh_prev,
                    c: dc_prev,
                };
            }
        }
        (CoreWeights::Lru(c), CoreWeights::Lru(gc), CoreTrace::Lru(tr), Derived::Lru(k)) => {
            let inputs = flat_inputs(trace, ud);
            c.backward_seq(k, tr, &inputs, &d_core, gc, &mut d_u);
        }
        (CoreWeights::S4d(c), CoreWeights::S4d(gc), CoreTrace::S4d(tr), Derived::S4d(k)) => {
            let inputs = flat_inputs(trace, ud);
            c.backward_seq(k, tr, &inputs, &d_core, gc, &mut d_u);
        }
        (CoreWeights::S6(c), CoreWeights::S6(gc), CoreTrace::S6(tr), Derived::S6(a)) => {
            let inputs = flat_inputs(trace, ud);
            c.backward_seq(a, tr, &inputs, &d_core, gc, &mut d_u);
        }
        _ => unreachable!("trace, weights and gradients share one architecture"),
    }

    let pin = arch.proj_inputs();
    for (t, s) in trace.samples.iter().enumerate() {
        w.proj.backward(
            &s.window[..pin],
            &d_u[t * ud..(t + 1) * ud],
            &mut g.proj,
            None,
        );
    }
}

fn flat_inputs(trace: &SegmentTrace, ud: usize) -> Vec<f64> {
    debug_assert_eq!(ud, SSM_WIDTH);
    let mut v = Vec::with_capacity(trace.samples.len() * ud);
    for s in &trace.samples {
        v.extend_from_slice(&s.u[..ud]);
    }
    v
}
