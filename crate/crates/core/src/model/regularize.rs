use super::DySModel;
use crate::Scalar;

/// `lambda * (sum_j s(mu_j) + alpha * sum_{j,l} s(mu_jl))`.
pub fn sparsity_loss<T: Scalar>(model: &DySModel<T>, lambda: T, alpha: T) -> T {
    let mains: T = model.main_effects.iter().map(|e| e.gate.value()).sum();
    let pairs: T = model.interactions.iter().map(|e| e.gate.value()).sum();
    lambda * (mains + alpha * pairs)
}

/// `-(x ln x + (1 - x) ln(1 - x))`, taken as 0 at `x` in {0, 1}.
pub fn binary_entropy<T: Scalar>(x: T) -> T {
    if x <= T::zero() || x >= T::one() {
        T::zero()
    } else {
        -(x * x.ln() + (T::one() - x) * (T::one() - x).ln())
    }
}

/// Derivative of [`binary_entropy`], `ln((1 - x) / x)`, set to 0 at the endpoints.
pub(crate) fn binary_entropy_grad<T: Scalar>(x: T) -> T {
    if x <= T::zero() || x >= T::one() {
        T::zero()
    } else {
        ((T::one() - x) / x).ln()
    }
}

/// `tau * sum over all gates of binary_entropy(s(mu))`.
pub fn entropy_loss<T: Scalar>(model: &DySModel<T>, tau: T) -> T {
    tau * model.effects().map(|e| binary_entropy(e.gate.value())).sum::<T>()
}
