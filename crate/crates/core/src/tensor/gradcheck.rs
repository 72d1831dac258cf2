//! Central finite-difference gradient checks.

use super::store::{Gradients, ParamId, ParamStore};
use super::TensorError;

pub const FD_STEP: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst: Option<(String, usize)>,
}

/// Compares analytic gradients against central differences of `loss` for
/// every coordinate of the listed parameters (all parameters when `ids` is
/// empty). `loss` must rebuild its tape from the store it is handed.
pub fn check_gradients<F>(
    store: &ParamStore,
    ids: &[ParamId],
    mut loss: F,
) -> Result<GradCheckReport, TensorError>
where
    F: FnMut(&ParamStore) -> Result<(f64, Gradients), TensorError>,
{
    let (_, grads) = loss(store)?;
    let ids: Vec<ParamId> = if ids.is_empty() {
        (0..store.len()).collect()
    } else {
        ids.to_vec()
    };
    let mut probe = store.clone();
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    for id in ids {
        let n = store.value(id).len();
        for k in 0..n {
            let orig = store.value(id)[k];
            probe.value_mut(id)[k] = orig + FD_STEP;
            let (plus, _) = loss(&probe)?;
            probe.value_mut(id)[k] = orig - FD_STEP;
            let (minus, _) = loss(&probe)?;
            probe.value_mut(id)[k] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let analytic = grads.get(id).map_or(0.0, |g| g[k]);
            let err = relative_error(analytic, numeric);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((store.param(id).name.clone(), k));
            }
        }
    }
    Ok(report)
}
