//! Reproduction runs: action signs on ellipsoids, a latitude of negative
//! action, and convex spheres with large contact bound.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::contact;
use crate::error::{Error, Result};
use crate::profile::{self, ProfileFunction};
use crate::reduced::{self, LatitudeOrbit, ReducedLevel, VERDICT_LEVELS};

#[derive(Debug, Clone, Serialize)]
pub struct EllipsoidCase {
    pub ratio: f64,
    pub m: f64,
    pub km_positive: bool,
    /// `None` when the case was skipped (`K_m` not positive).
    pub min_action: Option<f64>,
    pub levels: usize,
    #[serde(skip)]
    pub rows: Vec<ReducedLevel>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EllipsoidsReport {
    pub cases: Vec<EllipsoidCase>,
    pub all_positive: bool,
    pub verdict: &'static str,
}

pub fn ellipsoids(ratios: &[f64], ms: &[f64], levels: usize) -> Result<EllipsoidsReport> {
    let profiles: Vec<(f64, ProfileFunction)> =
        ratios.iter().map(|&r| Ok((r, profile::make_ellipsoid(r)?))).collect::<Result<_>>()?;
    let jobs: Vec<(usize, f64)> = (0..profiles.len()).flat_map(|i| ms.iter().map(move |&m| (i, m))).collect();
    let cases: Vec<EllipsoidCase> = jobs
        .par_iter()
        .map(|&(i, m)| {
            let (ratio, p) = &profiles[i];
            if !contact::km_positive(p, m) {
                return Ok(EllipsoidCase { ratio: *ratio, m, km_positive: false, min_action: None, levels: 0, rows: vec![] });
            }
            let rows = reduced::action_scan(p, m, levels)?;
            let min_action = rows.iter().map(|r| r.action).fold(f64::INFINITY, f64::min);
            Ok(EllipsoidCase { ratio: *ratio, m, km_positive: true, min_action: Some(min_action), levels: rows.len(), rows })
        })
        .collect::<Result<_>>()?;
    let all_positive = cases.iter().filter_map(|c| c.min_action).all(|a| a > 0.0);
    let verdict = if all_positive { "all actions positive" } else { "non-positive action found" };
    Ok(EllipsoidsReport { cases, all_positive, verdict })
}

pub fn write_ellipsoid_csv<W: std::io::Write>(report: &EllipsoidsReport, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["ratio", "m", "I", "t_minus", "t_plus", "s_half", "action"])?;
    for c in &report.cases {
        for r in &c.rows {
            wr.serialize((c.ratio, c.m, r.i, r.t_minus, r.t_plus, r.s_half, r.action))?;
        }
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct NonContactReport {
    pub delta: f64,
    pub eps: f64,
    pub cap_radius: f64,
    pub slope_at_delta: f64,
    pub area: f64,
    pub normalized: bool,
    /// The latitude `t = delta` and the strength `m_t0` it is an orbit for.
    pub latitude: LatitudeOrbit,
    pub verdict: &'static str,
    #[serde(skip)]
    pub profile: ProfileFunction,
}

pub fn noncon(delta: f64, eps: f64) -> Result<NonContactReport> {
    let na = profile::make_negative_action(delta, eps)?;
    let p = na.profile;
    let latitude = reduced::latitude_action(&p, na.latitude)?;
    let verdict = if latitude.action < 0.0 { "not_contact_witness" } else { "inconclusive" };
    Ok(NonContactReport {
        delta,
        eps,
        cap_radius: na.cap_radius,
        slope_at_delta: p.at(delta).dgamma,
        area: p.area(),
        normalized: p.is_normalized(1e-8),
        latitude,
        verdict,
        profile: p,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BigMReport {
    pub target: f64,
    pub delta: f64,
    pub eps: f64,
    pub m_gamma: f64,
    pub min_curvature: f64,
    pub area: f64,
    pub convex: bool,
    pub normalized: bool,
    pub verdict: &'static str,
    #[serde(skip)]
    pub profile: ProfileFunction,
}

const BIGM_EPS: f64 = 0.1;
const BIGM_TRIES: usize = 12;

/// Spindles `make_spindle(delta, 0.1)` with `delta` shrinking until the
/// contact bound exceeds `target`.
pub fn bigm(target: f64) -> Result<BigMReport> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::InvalidParameter(format!("target must be positive, got {target}")));
    }
    let eps = BIGM_EPS;
    let mut delta = ((1.0 - eps) / target).min(1.0);
    for _ in 0..BIGM_TRIES {
        let p = profile::make_spindle(delta, eps)?;
        let m_gamma = contact::m_gamma(&p);
        if m_gamma > target {
            let min_curvature = contact::min_curvature(&p);
            let area = p.area();
            let convex = min_curvature >= -1e-10;
            let normalized = (area - 4.0 * PI).abs() < 1e-6;
            let verdict = if convex && normalized { "convex_large_bound" } else { "construction_failed" };
            return Ok(BigMReport { target, delta, eps, m_gamma, min_curvature, area, convex, normalized, verdict, profile: p });
        }
        delta *= 0.7;
    }
    Err(Error::NonConvergence { what: format!("spindle with m_gamma > {target}"), residual: delta })
}

pub fn default_levels() -> usize {
    VERDICT_LEVELS
}
