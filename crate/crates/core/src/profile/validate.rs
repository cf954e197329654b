use serde::Serialize;

use super::ProfileFunction;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub tolerance: f64,
    pub checks: Vec<Check>,
    /// Pole conditions (values, slopes, interior bound, even derivatives).
    pub profile_conditions_hold: bool,
    pub normalized: bool,
    pub violations: Vec<&'static str>,
}

impl ValidationReport {
    pub fn passed(&self, name: &str) -> bool {
        self.checks.iter().any(|c| c.name == name && c.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub(super) fn validate(p: &ProfileFunction, tol: f64) -> ValidationReport {
    let ell = p.ell();
    let a = p.at(0.0);
    let b = p.at(ell);
    let grid = p.scan_grid(1024);
    let interior = &grid[1..grid.len() - 1];
    let pts: Vec<_> = interior.iter().map(|&t| p.at(t)).collect();
    let min_gamma = pts.iter().map(|q| q.gamma).fold(f64::INFINITY, f64::min);
    let max_slope = pts.iter().map(|q| q.dgamma.abs()).fold(0.0, f64::max);
    let nonfinite = pts.iter().any(|q| !(q.gamma.is_finite() && q.dgamma.is_finite() && q.ddgamma.is_finite()));

    let mut checks = vec![];
    let mut push = |name, residual: f64, passed: bool| checks.push(Check { name, passed: passed && residual.is_finite(), residual });
    let r = a.gamma.abs().max(b.gamma.abs());
    push("boundary_values", r, r <= tol);
    push("interior_positive", (-min_gamma).max(0.0), min_gamma > 0.0 && !nonfinite);
    let r = (a.dgamma - 1.0).abs().max((b.dgamma + 1.0).abs());
    push("boundary_slopes", r, r <= tol);
    push("interior_slope_bound", (max_slope - 1.0).max(0.0), max_slope < 1.0 + tol);
    let r = a.ddgamma.abs().max(b.ddgamma.abs());
    push("even_derivatives", r, r <= tol);
    let r = (p.area() / (2.0 * std::f64::consts::PI) - 2.0).abs();
    push("normalization", r, r <= tol);

    let violations: Vec<&'static str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    let profile_conditions_hold = checks.iter().filter(|c| c.name != "normalization").all(|c| c.passed);
    let normalized = checks.iter().any(|c| c.name == "normalization" && c.passed);
    ValidationReport { tolerance: tol, checks, profile_conditions_hold, normalized, violations }
}
