use super::MetricError;
use crate::model::Label;
use crate::Real;

/// Probabilities are clamped to `[eps, 1 - eps]` before taking logs.
///
/// For types where `1 - 1e-12` rounds to `1` (such as `f32`) the type's own
/// machine epsilon is used instead.
pub const NLL_EPSILON: f64 = 1e-12;

/// Mean binary negative log-likelihood of judge scores against labels.
pub fn discriminator_nll<T: Real>(scored: &[(T, Label)]) -> Result<T, MetricError> {
    if scored.is_empty() {
        return Err(MetricError::Empty("discriminator_nll"));
    }
    let eps = T::from_f64(NLL_EPSILON)
        .expect("epsilon representable")
        .max(T::epsilon());
    let one = T::one();
    let mut total = T::zero();
    for &(f, label) in scored {
        if !f.is_finite() {
            return Err(MetricError::NonFinite("discriminator score"));
        }
        let f = f.max(eps).min(one - eps);
        total = total - if label.is_pass() { f.ln() } else { (one - f).ln() };
    }
    Ok(total / T::from_count(scored.len()))
}
