//! Central finite-difference gradient checker.

/// Relative error between an analytic and a numeric partial derivative:
/// `|a − n| / max(|a|, |n|, floor)`. The floor keeps near-zero derivatives from
/// turning round-off into huge relative errors.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub step: f64,
    pub floor: f64,
    /// Check only these coordinates; all when `None`.
    pub coordinates: Option<Vec<usize>>,
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            step: 1e-5,
            floor: 1e-6,
            coordinates: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub worst_relative: f64,
    pub worst_index: Option<usize>,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compares `analytic` against central differences of `loss` around `params`.
pub fn grad_check<F>(mut loss: F, params: &[f64], analytic: &[f64], cfg: &GradCheck) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let coords: Vec<usize> = cfg
        .coordinates
        .clone()
        .unwrap_or_else(|| (0..params.len()).collect());
    let mut report = GradCheckReport {
        worst_relative: 0.0,
        worst_index: None,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let mut probe = params.to_vec();
    for &i in &coords {
        let orig = probe[i];
        probe[i] = orig + cfg.step;
        let up = loss(&probe);
        probe[i] = orig - cfg.step;
        let down = loss(&probe);
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * cfg.step);
        let err = relative_error(analytic[i], numeric, cfg.floor);
        report.checked += 1;
        if err > report.worst_relative || report.worst_index.is_none() {
            report.worst_relative = err;
            report.worst_index = Some(i);
            report.analytic = analytic[i];
            report.numeric = numeric;
        }
    }
    report
}
