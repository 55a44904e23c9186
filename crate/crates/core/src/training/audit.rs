use super::backward_segment;
use crate::error::{Error, Result};
use crate::model::{Model, ModelState};

/// Magnitude below which gradients are compared in absolute terms.
pub const AUDIT_REL_FLOOR: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, AUDIT_REL_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        return 0.0;
    }
    d / a.abs().max(b.abs()).max(AUDIT_REL_FLOOR)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub max_rel_error: f64,
    pub worst_weight: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compares every analytic weight gradient of the segment MSE against
/// central differences with step `eps`.
pub fn finite_difference_audit(
    model: &Model,
    state: &ModelState,
    segment: &[f64],
    target: &[f64],
    p: &[f64],
    eps: f64,
) -> Result<AuditReport> {
    let (_, grad) = backward_segment(model, &mut state.clone(), segment, target, p)?;
    let analytic: Vec<f64> = grad.0.to_flat();
    let names: Vec<(&'static str, usize)> = model
        .weights()
        .tensors()
        .iter()
        .map(|(n, m)| (*n, m.len()))
        .collect();
    let mut probe = model.clone();
    let mut base = model.weights().to_flat();
    if target.len() != segment.len() || segment.is_empty() {
        return Err(Error::Dimension(format!(
            "audit segment has {} samples and target {}",
            segment.len(),
            target.len()
        )));
    }
    let run = |m: &Model| m.forward_segment(&mut state.clone(), segment, p);
    let mut report = AuditReport {
        max_rel_error: 0.0,
        worst_weight: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let mut flat_idx = 0;
    for (name, len) in names {
        for j in 0..len {
            let orig = base[flat_idx];
            base[flat_idx] = orig + eps;
            probe.weights_mut().set_flat(&base)?;
            probe.refresh()?;
            let yp = run(&probe)?;
            base[flat_idx] = orig - eps;
            probe.weights_mut().set_flat(&base)?;
            probe.refresh()?;
            let ym = run(&probe)?;
            base[flat_idx] = orig;
            // L(+) - L(-) summed as (a - b)(a + b - 2t) to avoid cancelling two losses
            let diff: f64 = yp
                .iter()
                .zip(&ym)
                .zip(target)
                .map(|((a, b), t)| (a - b) * (a + b - 2.0 * t))
                .sum();
            let numeric = diff / segment.len() as f64 / (2.0 * eps);
            let a = analytic[flat_idx];
            let rel = relative_error(a, numeric);
            if rel > report.max_rel_error || report.checked == 0 {
                report.max_rel_error = rel;
                report.worst_weight = name.to_string();
                report.worst_index = j;
                report.analytic = a;
                report.numeric = numeric;
            }
            report.checked += 1;
            flat_idx += 1;
        }
    }
    Ok(report)
}
