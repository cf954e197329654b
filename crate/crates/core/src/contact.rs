//! The rotation-invariant primitive `beta_theta = Gamma + gamma'`, the
//! contact bound `m_gamma = sup |beta_theta / gamma|` and magnetic curvature.

use rayon::prelude::*;
use serde::Serialize;

use crate::numerics::refine_grid_maxima;
use crate::profile::ProfileFunction;

pub const SCAN_POINTS: usize = 4096;
const REFINE_TOP: usize = 5;
const REFINE_TOL: f64 = 1e-9;

pub fn beta_theta(p: &ProfileFunction, t: f64) -> f64 {
    let q = p.at(t);
    q.big_gamma + q.dgamma
}

/// `|beta_theta / gamma|` with the pole limits set to zero.
pub fn beta_ratio(p: &ProfileFunction, t: f64) -> f64 {
    if t <= 0.0 || t >= p.ell() {
        return 0.0;
    }
    let q = p.at(t);
    ((q.big_gamma + q.dgamma) / q.gamma).abs()
}

/// Sup-norm of the primitive, with its location.
pub fn m_gamma_with_location(p: &ProfileFunction) -> (f64, f64) {
    let grid = p.scan_grid(SCAN_POINTS);
    let vals: Vec<f64> = grid.par_iter().map(|&t| beta_ratio(p, t)).collect();
    let (t, v) = refine_grid_maxima(|t| beta_ratio(p, t), &grid, &vals, REFINE_TOP, REFINE_TOL);
    (v, t)
}

pub fn m_gamma(p: &ProfileFunction) -> f64 {
    m_gamma_with_location(p).0
}

/// Roots `m_-`, `m_+` of `m^2 - m_gamma m + inf_f = 0`, present iff real.
pub fn m_plus_minus(m_gamma: f64, inf_f: f64) -> Option<(f64, f64)> {
    let disc = m_gamma * m_gamma - 4.0 * inf_f;
    if disc < 0.0 {
        return None;
    }
    let r = disc.sqrt();
    let plus = 0.5 * (m_gamma + r);
    // product of roots is inf_f; avoids cancellation in the small root
    Some((inf_f / plus, plus))
}

/// Open interval `(lo, hi)`; `hi = None` stands for +infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: Option<f64>,
}

impl Interval {
    pub fn contains(&self, m: f64) -> bool {
        m > self.lo && self.hi.is_none_or(|h| m < h)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContactBoundsReport {
    pub m_gamma: f64,
    pub m_gamma_at: f64,
    pub m_minus: Option<f64>,
    pub m_plus: Option<f64>,
    pub certified_intervals: Vec<Interval>,
    pub min_curvature: f64,
    /// `None` when K >= 0 (threshold is +infinity).
    pub km_positive_threshold: Option<f64>,
}

impl ContactBoundsReport {
    pub fn from_values(m_gamma: f64, m_gamma_at: f64, min_curvature: f64) -> Self {
        let pm = if m_gamma >= 2.0 { m_plus_minus(m_gamma, 1.0) } else { None };
        let certified_intervals = match pm {
            None => vec![Interval { lo: 0.0, hi: None }],
            Some((lo, hi)) => vec![Interval { lo: 0.0, hi: Some(lo) }, Interval { lo: hi, hi: None }],
        };
        let km_positive_threshold = if min_curvature >= 0.0 { None } else { Some(1.0 / (-min_curvature).sqrt()) };
        Self {
            m_gamma,
            m_gamma_at,
            m_minus: pm.map(|x| x.0),
            m_plus: pm.map(|x| x.1),
            certified_intervals,
            min_curvature,
            km_positive_threshold,
        }
    }

    pub fn certifies(&self, m: f64) -> bool {
        self.certified_intervals.iter().any(|i| i.contains(m))
    }

    pub fn summary(&self) -> String {
        let mut s = format!("m_gamma = {:.10} (at t = {:.6})\n", self.m_gamma, self.m_gamma_at);
        match (self.m_minus, self.m_plus) {
            (Some(a), Some(b)) => s += &format!("certified contact for m in (0, {a:.10}) and ({b:.10}, inf)\n"),
            _ => s += "certified contact for all m > 0\n",
        }
        match self.km_positive_threshold {
            Some(t) => s += &format!("K_m > 0 for m < {t:.10} (min K = {:.6})\n", self.min_curvature),
            None => s += &format!("K >= 0 (min K = {:.6}): K_m > 0 for all m\n", self.min_curvature),
        }
        s
    }
}

pub fn contact_interval(p: &ProfileFunction) -> ContactBoundsReport {
    let (mg, at) = m_gamma_with_location(p);
    ContactBoundsReport::from_values(mg, at, min_curvature(p))
}

pub fn magnetic_curvature(p: &ProfileFunction, m: f64, t: f64) -> f64 {
    m * m * p.at(t).k + 1.0
}

/// Minimum of K over the profile (grid scan plus golden-section refinement).
pub fn min_curvature(p: &ProfileFunction) -> f64 {
    min_curvature_with_location(p).0
}

pub fn min_curvature_with_location(p: &ProfileFunction) -> (f64, f64) {
    let grid = p.scan_grid(SCAN_POINTS);
    let vals: Vec<f64> = grid.par_iter().map(|&t| -p.at(t).k).collect();
    let (t, v) = refine_grid_maxima(|t| -p.at(t).k, &grid, &vals, REFINE_TOP, REFINE_TOL);
    (-v, t)
}

pub fn km_positive(p: &ProfileFunction, m: f64) -> bool {
    m * m * min_curvature(p) + 1.0 > 0.0
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryCheck {
    pub symmetric: bool,
    pub curvature_increasing: bool,
    pub hypothesis_holds: bool,
    pub m_gamma: f64,
    pub conclusion_holds: bool,
}

/// Tests reflection symmetry and monotonicity of K on the first half, and
/// whether `m_gamma <= 1`.
pub fn symmetric_increasing_check(p: &ProfileFunction) -> SymmetryCheck {
    let ell = p.ell();
    let tol = 1e-8;
    let grid = crate::numerics::linspace(0.0, ell, 1024);
    let symmetric = grid.iter().all(|&t| {
        let (a, b) = (p.at(t), p.at(ell - t));
        (a.gamma - b.gamma).abs() <= tol && (a.dgamma + b.dgamma).abs() <= tol
    });
    let half = crate::numerics::linspace(0.0, ell / 2.0, 512);
    let ks: Vec<f64> = half.iter().map(|&t| p.at(t).k).collect();
    let scale = ks.iter().fold(1.0f64, |a, k| a.max(k.abs()));
    let curvature_increasing = ks.windows(2).all(|w| w[1] >= w[0] - tol * scale);
    let hypothesis_holds = symmetric && curvature_increasing;
    let mg = m_gamma(p);
    SymmetryCheck { symmetric, curvature_increasing, hypothesis_holds, m_gamma: mg, conclusion_holds: mg <= 1.0 + 1e-6 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{make_ellipsoid, make_sphere, make_spindle};

    #[test]
    fn sphere_primitive_vanishes() {
        let p = make_sphere();
        for k in 0..=50 {
            assert!(beta_theta(&p, std::f64::consts::PI * k as f64 / 50.0).abs() < 1e-10);
        }
        assert!(m_gamma(&p) < 1e-8);
    }

    #[test]
    fn primitive_vanishes_at_poles() {
        for p in [make_ellipsoid(3.0).unwrap(), make_spindle(0.2, 0.3).unwrap()] {
            assert!(beta_theta(&p, 0.0).abs() < 1e-15);
            assert!(beta_theta(&p, p.ell()).abs() < 1e-8);
        }
    }

    #[test]
    fn interval_examples() {
        let r = ContactBoundsReport::from_values(0.0, 0.0, 1.0);
        assert_eq!(r.certified_intervals, vec![Interval { lo: 0.0, hi: None }]);
        let r = ContactBoundsReport::from_values(2.0, 0.0, 1.0);
        assert_eq!((r.m_minus, r.m_plus), (Some(1.0), Some(1.0)));
        assert!(r.certifies(0.5) && !r.certifies(1.0) && r.certifies(1.5));
        let r = ContactBoundsReport::from_values(2.5, 0.0, 1.0);
        assert!((r.m_minus.unwrap() - 0.5).abs() < 1e-15 && (r.m_plus.unwrap() - 2.0).abs() < 1e-15);
        assert!(!r.certifies(1.0) && r.certifies(2.1));
    }

    #[test]
    fn curvature_threshold() {
        let r = ContactBoundsReport::from_values(0.0, 0.0, -4.0);
        assert!((r.km_positive_threshold.unwrap() - 0.5).abs() < 1e-15);
        assert!((magnetic_curvature(&make_sphere(), 2.0, std::f64::consts::FRAC_PI_2) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn oblate_ellipsoid_satisfies_hypothesis() {
        let c = symmetric_increasing_check(&make_ellipsoid(0.5).unwrap());
        assert!(c.hypothesis_holds && c.conclusion_holds, "{c:?}");
        let c = symmetric_increasing_check(&make_spindle(0.1, 0.1).unwrap());
        assert!(!c.hypothesis_holds && !c.curvature_increasing, "{c:?}");
    }

    #[test]
    fn spindle_has_large_bound() {
        let p = make_spindle(0.05, 0.1).unwrap();
        let mg = m_gamma(&p);
        // (1 - eps)/delta - delta with the cap contributing gamma(delta) <= delta
        assert!(mg > (1.0 - 0.1) / 0.05 - 0.05, "{mg}");
    }
}
