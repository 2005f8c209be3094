use crate::Scalar;

/// Central-difference gradient of `loss` at `params`.
pub fn finite_diff_grad<T, F>(mut loss: F, params: &[T], h: T) -> Vec<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    let mut theta = params.to_vec();
    let two_h = h + h;
    (0..params.len())
        .map(|i| {
            let orig = theta[i];
            theta[i] = orig + h;
            let up = loss(&theta);
            theta[i] = orig - h;
            let down = loss(&theta);
            theta[i] = orig;
            (up - down) / two_h
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_parameter_index: usize,
}

impl GradCheckReport {
    /// Relative error per coordinate is `|a - n| / max(|a|, |n|, floor)`; the
    /// floor keeps coordinates with vanishing gradients from dominating.
    pub fn compare<T: Scalar>(analytic: &[T], numeric: &[T], floor: f64) -> Self {
        Self::compare_masked(analytic, numeric, floor, |_| true)
    }

    /// Like [`GradCheckReport::compare`] but only over coordinates where `keep` holds.
    pub fn compare_masked<T: Scalar>(
        analytic: &[T],
        numeric: &[T],
        floor: f64,
        mut keep: impl FnMut(usize) -> bool,
    ) -> Self {
        assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
        let mut report = GradCheckReport {
            max_relative_error: 0.0,
            worst_parameter_index: 0,
        };
        for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
            if !keep(i) {
                continue;
            }
            let (a, n) = (a.as_f64(), n.as_f64());
            let err = (a - n).abs() / a.abs().max(n.abs()).max(floor);
            if err > report.max_relative_error || err.is_nan() {
                report.max_relative_error = err;
                report.worst_parameter_index = i;
            }
        }
        report
    }
}
