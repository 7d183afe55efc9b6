//! Central finite-difference gradient checking.

/// Gradients smaller than this in magnitude are compared on an absolute
/// scale. With `f32` forward passes and a 1e-3 step the central difference
/// carries roughly 1e-4 of rounding noise, which swamps a purely relative
/// comparison on small entries.
pub const RELATIVE_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub worst_index: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Relative error between an analytic and a numeric derivative.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares `analytic` against `(f(x + h) - f(x - h)) / 2h` for every input
/// coordinate. `f` evaluates the scalar objective in `f64` so only the
/// forward pass itself runs in `f32`.
pub fn grad_check<F>(inputs: &[f32], analytic: &[f32], step: f32, tolerance: f64, mut f: F) -> GradCheckReport
where
    F: FnMut(&[f32]) -> f64,
{
    assert_eq!(inputs.len(), analytic.len(), "one analytic derivative per input");
    let mut x = inputs.to_vec();
    let mut report = GradCheckReport {
        checked: inputs.len(),
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_index: 0,
        tolerance,
        passed: true,
    };
    for i in 0..x.len() {
        let orig = x[i];
        let hi = orig + step;
        let lo = orig - step;
        x[i] = hi;
        let f_hi = f(&x);
        x[i] = lo;
        let f_lo = f(&x);
        x[i] = orig;
        // Use the step actually representable in f32.
        let numeric = (f_hi - f_lo) / (hi as f64 - lo as f64);
        let a = analytic[i] as f64;
        let rel = relative_error(a, numeric);
        report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
    }
    report.passed = report.max_rel_error < tolerance;
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_gradient_of_quadratic_passes() {
        let x = [0.3f32, -1.2, 2.0];
        let analytic: Vec<f32> = x.iter().map(|v| 2.0 * v).collect();
        let r = grad_check(&x, &analytic, 1e-3, 1e-3, |x| x.iter().map(|&v| (v as f64).powi(2)).sum());
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn wrong_gradient_fails() {
        let x = [0.3f32, -1.2];
        let r = grad_check(&x, &[0.6, 0.0], 1e-3, 1e-3, |x| x.iter().map(|&v| (v as f64).powi(2)).sum());
        assert!(!r.passed);
        assert_eq!(r.worst_index, 1);
    }
}
