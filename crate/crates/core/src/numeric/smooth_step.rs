use crate::error::{DysError, Result};
use crate::Scalar;

/// Cubic smooth-step of width `gamma`.
///
/// Exactly 0 for `x <= -gamma/2`, exactly 1 for `x >= gamma/2`, and
/// `-2/gamma^3 x^3 + 3/(2 gamma) x + 1/2` in between. The function is C1,
/// so gates built on it can reach exact zeros while staying trainable
/// inside the band.
pub fn smooth_step<T: Scalar>(x: T, gamma: T) -> Result<T> {
    check_gamma(gamma)?;
    Ok(smooth_step_unchecked(x, gamma))
}

/// Derivative of [`smooth_step`] with respect to `x`; exactly 0 outside the band.
pub fn smooth_step_grad<T: Scalar>(x: T, gamma: T) -> Result<T> {
    check_gamma(gamma)?;
    Ok(smooth_step_grad_unchecked(x, gamma))
}

fn check_gamma<T: Scalar>(gamma: T) -> Result<()> {
    if gamma > T::zero() && gamma.is_finite() {
        Ok(())
    } else {
        Err(DysError::param("gamma", format!("must be finite and > 0, got {gamma}")))
    }
}

#[inline]
pub(crate) fn smooth_step_unchecked<T: Scalar>(x: T, gamma: T) -> T {
    let half = gamma / T::of(2.0);
    if x <= -half {
        T::zero()
    } else if x >= half {
        T::one()
    } else {
        let g3 = gamma * gamma * gamma;
        let v = -T::of(2.0) / g3 * x * x * x + T::of(1.5) / gamma * x + T::of(0.5);
        // rounding near the band edges must not leave [0, 1]
        v.max(T::zero()).min(T::one())
    }
}

#[inline]
pub(crate) fn smooth_step_grad_unchecked<T: Scalar>(x: T, gamma: T) -> T {
    let half = gamma / T::of(2.0);
    if x <= -half || x >= half {
        T::zero()
    } else {
        let g3 = gamma * gamma * gamma;
        -T::of(6.0) / g3 * x * x + T::of(1.5) / gamma
    }
}
