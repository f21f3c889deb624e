/// Central-difference step; chosen for double precision.
pub const FD_STEP: f64 = 1e-4;

/// Outcome of comparing an analytic gradient against central differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub tolerance: f64,
    pub pass: bool,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: max rel error {:.3e} (tol {:.1e}) at index {}",
            if self.pass { "pass" } else { "FAIL" },
            self.max_rel_error,
            self.tolerance,
            self.worst_index
        )
    }
}

/// Compares `analytic` against the central-difference gradient of `loss`
/// around `params`. Report-only: never fails, records the worst coordinate.
pub fn grad_check<F>(
    mut loss: F,
    params: &[f64],
    analytic: &[f64],
    tolerance: f64,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let mut work = params.to_vec();
    let mut max_rel = 0.0;
    let mut worst = 0;
    for i in 0..params.len() {
        let saved = work[i];
        work[i] = saved + FD_STEP;
        let up = loss(&work);
        work[i] = saved - FD_STEP;
        let down = loss(&work);
        work[i] = saved;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let a = analytic[i];
        // both effectively zero: agreement, not a division by noise
        let rel = if a.abs() < 1e-7 && numeric.abs() < 1e-7 {
            0.0
        } else {
            (a - numeric).abs() / a.abs().max(numeric.abs())
        };
        if rel > max_rel {
            max_rel = rel;
            worst = i;
        }
    }
    GradCheckReport {
        max_rel_error: max_rel,
        worst_index: worst,
        tolerance,
        pass: max_rel < tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_loss_matches_exactly() {
        let w = [0.3, -1.2, 2.5];
        let loss = |x: &[f64]| x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let params = [1.0, 2.0, -0.5];
        let report = grad_check(loss, &params, &w, 1e-4);
        assert!(report.pass);
        assert!(report.max_rel_error < 1e-8, "{}", report.max_rel_error);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let loss = |x: &[f64]| x[0] * x[0];
        let report = grad_check(loss, &[1.0], &[3.0], 1e-4);
        assert!(!report.pass);
    }
}
