//! Reduction by the rotational symmetry: the first integral
//! `I = m gamma sin(phi) - Gamma`, latitude orbits and the averaged action
//! `A(I)` of the ergodic measures on the invariant tori.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::Serialize;

use crate::contact::{self, ContactBoundsReport, SCAN_POINTS};
use crate::error::{Error, Result};
use crate::numerics::{self, bisect, golden_min, QuadOptions};
use crate::profile::ProfileFunction;

const ROOT_TOL: f64 = 1e-15;
const ROOT_ITERS: usize = 200;
/// Interior scan levels keep this distance from the latitude values.
pub const LATITUDE_BAND: f64 = 1e-6;

pub fn i_hat(p: &ProfileFunction, m: f64, t: f64, phi: f64) -> f64 {
    let q = p.at(t);
    m * q.gamma * phi.sin() - q.big_gamma
}

/// `(I^+, I^-)(t) = (m gamma - Gamma, -m gamma - Gamma)`.
pub fn i_hat_pm(p: &ProfileFunction, m: f64, t: f64) -> (f64, f64) {
    let q = p.at(t);
    (m * q.gamma - q.big_gamma, -m * q.gamma - q.big_gamma)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LatitudeOrbit {
    pub t0: f64,
    /// sign of gamma'(t0); +1 for `sin(phi) = 1`, -1 for `sin(phi) = -1`
    pub sign: i8,
    pub m_t0: f64,
    pub action: f64,
    pub i_value: f64,
    pub degenerate: bool,
}

impl LatitudeOrbit {
    pub fn phi(&self) -> f64 {
        f64::from(self.sign) * FRAC_PI_2
    }
}

/// The latitude `t0` as a periodic orbit for `m = |gamma/gamma'|`, with its
/// action `(gamma^2 - gamma' Gamma)/gamma'^2`.
pub fn latitude_action(p: &ProfileFunction, t0: f64) -> Result<LatitudeOrbit> {
    let q = p.eval(t0)?;
    if q.dgamma.abs() < 1e-8 {
        return Err(Error::Equator { t: t0 });
    }
    let d2 = q.dgamma * q.dgamma;
    let action = (q.gamma * q.gamma - q.dgamma * q.big_gamma) / d2;
    Ok(LatitudeOrbit {
        t0,
        sign: if q.dgamma > 0.0 { 1 } else { -1 },
        m_t0: (q.gamma / q.dgamma).abs(),
        action,
        i_value: q.dgamma * action,
        degenerate: false,
    })
}

/// All latitudes supporting closed orbits for the strength `m`: roots of
/// `m gamma' -+ gamma`.
pub fn latitudes(p: &ProfileFunction, m: f64) -> Result<Vec<LatitudeOrbit>> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("latitudes need m > 0, got {m}")));
    }
    let grid = p.scan_grid(SCAN_POINTS);
    let ell = p.ell();
    let mut out = vec![];
    for sign in [1.0, -1.0] {
        let g = |t: f64| {
            let q = p.at(t);
            m * q.dgamma - sign * q.gamma
        };
        let vals: Vec<f64> = grid.par_iter().map(|&t| g(t)).collect();
        let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        for i in 1..grid.len() - 2 {
            let (a, b) = (vals[i], vals[i + 1]);
            if a == 0.0 || a.signum() != b.signum() {
                let t0 = bisect(g, grid[i], grid[i + 1], ROOT_TOL * ell, ROOT_ITERS)?;
                out.push(with_sign(latitude_action(p, t0)?, sign, false));
            } else if i + 2 < grid.len() && vals[i + 1].abs() < a.abs() && vals[i + 1].abs() < vals[i + 2].abs() {
                // local minimum of |g| without sign change: possible tangency
                let (t0, v) = golden_min(|t| g(t).abs(), grid[i], grid[i + 2], 1e-13 * ell);
                if v < 1e-10 * scale && vals[i + 1].signum() == vals[i + 2].signum() {
                    out.push(with_sign(latitude_action(p, t0)?, sign, true));
                }
            }
        }
    }
    out.sort_by(|a, b| a.t0.total_cmp(&b.t0));
    Ok(out)
}

fn with_sign(mut l: LatitudeOrbit, sign: f64, degenerate: bool) -> LatitudeOrbit {
    l.sign = if sign > 0.0 { 1 } else { -1 };
    l.degenerate = degenerate;
    l
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IRange {
    pub i_min: f64,
    pub i_max: f64,
    /// argmin of I^-
    pub t_min: f64,
    /// argmax of I^+
    pub t_max: f64,
}

fn polish_critical(p: &ProfileFunction, m: f64, sign: f64, t: f64) -> f64 {
    let g = |t: f64| {
        let q = p.at(t);
        m * q.dgamma - sign * q.gamma
    };
    let w = 1e-6 * p.ell();
    let (a, b) = ((t - w).max(0.0), (t + w).min(p.ell()));
    if g(a).signum() == g(b).signum() {
        return t;
    }
    bisect(g, a, b, ROOT_TOL * p.ell(), ROOT_ITERS).unwrap_or(t)
}

pub fn i_range(p: &ProfileFunction, m: f64) -> Result<IRange> {
    let grid = p.scan_grid(SCAN_POINTS);
    let plus: Vec<f64> = grid.par_iter().map(|&t| i_hat_pm(p, m, t).0).collect();
    let minus: Vec<f64> = grid.par_iter().map(|&t| -i_hat_pm(p, m, t).1).collect();
    let (t_max, i_max) = numerics::refine_grid_maxima(|t| i_hat_pm(p, m, t).0, &grid, &plus, 5, 1e-13 * p.ell());
    let (t_min, neg) = numerics::refine_grid_maxima(|t| -i_hat_pm(p, m, t).1, &grid, &minus, 5, 1e-13 * p.ell());
    // polish on the derivative `m gamma' -+ gamma`, which has a simple root
    let t_max = polish_critical(p, m, 1.0, t_max);
    let t_min = polish_critical(p, m, -1.0, t_min);
    let (i_max, neg) = (i_hat_pm(p, m, t_max).0.max(i_max), (-i_hat_pm(p, m, t_min).1).max(neg));
    let r = IRange { i_min: -neg, i_max, t_min, t_max };
    if !(r.i_max > 1.0 && r.i_min < -1.0) {
        return Err(Error::NonConvergence { what: "range of the first integral".into(), residual: r.i_max - 1.0 });
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReducedLevel {
    #[serde(rename = "I")]
    pub i: f64,
    pub t_minus: f64,
    pub t_plus: f64,
    pub s_half: f64,
    pub action: f64,
    /// theta advance over a half oscillation
    #[serde(skip)]
    pub theta_half: f64,
}

impl ReducedLevel {
    /// Rotation number: theta turns per full reduced period.
    pub fn rotation(&self) -> f64 {
        self.theta_half / PI
    }

    /// Whether phi advances by 2pi over one reduced period (`|I| < 1`).
    pub fn phi_winds(&self) -> bool {
        self.i.abs() < 1.0
    }
}

/// Reduced system at fixed `m` with `K_m > 0`; caches the range of `I`.
#[derive(Debug, Clone)]
pub struct Reduced {
    pub profile: ProfileFunction,
    pub m: f64,
    pub range: IRange,
}

impl Reduced {
    pub fn new(p: &ProfileFunction, m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidParameter(format!("m must be positive, got {m}")));
        }
        let kmin = contact::min_curvature(p);
        if m * m * kmin + 1.0 <= 0.0 {
            return Err(Error::KmNotPositive { m, min_km: m * m * kmin + 1.0 });
        }
        Ok(Self { profile: p.clone(), m, range: i_range(p, m)? })
    }

    fn plus(&self, t: f64) -> f64 {
        i_hat_pm(&self.profile, self.m, t).0
    }

    fn minus(&self, t: f64) -> f64 {
        i_hat_pm(&self.profile, self.m, t).1
    }

    pub fn turning_points(&self, level: f64) -> Result<(f64, f64)> {
        let r = self.range;
        if !(level > r.i_min && level < r.i_max) {
            return Err(Error::LevelOutOfRange { level, lo: r.i_min, hi: r.i_max });
        }
        let ell = self.profile.ell();
        let tol = ROOT_TOL * ell;
        let root = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| bisect(|t| f(t) - level, a, b, tol, ROOT_ITERS);
        let plus = |t: f64| self.plus(t);
        let minus = |t: f64| self.minus(t);
        if level >= 1.0 {
            Ok((root(&plus, 0.0, r.t_max)?, root(&plus, r.t_max, ell)?))
        } else if level <= -1.0 {
            Ok((root(&minus, 0.0, r.t_min)?, root(&minus, r.t_min, ell)?))
        } else {
            Ok((root(&minus, 0.0, r.t_min)?, root(&plus, r.t_max, ell)?))
        }
    }

    /// `ds/du` for `t = t_minus + L sin^2 u`, i.e. `gamma L sin(2u) / sqrt(Q)`
    /// with `Q = (I^+ - I)(I - I^-)`. Each factor that vanishes at a turning
    /// point is divided by its distance to that point before taking the
    /// root, so the weight stays accurate when `Q` is tiny.
    fn time_weight(&self, level: f64, t_minus: f64, t_plus: f64, u: f64) -> f64 {
        let m = self.m;
        let len = t_plus - t_minus;
        let (su, cu) = u.sin_cos();
        let t = t_minus + len * su * su;
        let p = &self.profile;
        let gamma = p.at(t).gamma;
        let scale = 1.0 + level.abs();
        // P = I^+ - I with P' = m gamma' - gamma; M = I - I^- with M' = m gamma' + gamma
        let dp = |x: f64| {
            let q = p.at(x);
            m * q.dgamma - q.gamma
        };
        let dm = |x: f64| {
            let q = p.at(x);
            m * q.dgamma + q.gamma
        };
        // F(t) / (t - e) for a factor with F(e) = 0
        let divided = |f: f64, df: &dyn Fn(f64) -> f64, e: f64| {
            let d = t - e;
            if d == 0.0 {
                df(e)
            } else if f.abs() > 1e-3 * scale {
                f / d
            } else {
                let mut g = |x: f64| df(x);
                numerics::gk15(&mut g, e.min(t), e.max(t)).0 / d.abs()
            }
        };
        let pv = self.plus(t) - level;
        let mv = level - self.minus(t);
        // in every case Q = L^2 sin^2 u cos^2 u pr mr
        let (pr, mr) = if level >= 1.0 {
            let pr = if su <= cu {
                divided(pv, &dp, t_minus) / (len * cu * cu)
            } else {
                -divided(pv, &dp, t_plus) / (len * su * su)
            };
            (pr, mv)
        } else if level <= -1.0 {
            let mr = if su <= cu {
                divided(mv, &dm, t_minus) / (len * cu * cu)
            } else {
                -divided(mv, &dm, t_plus) / (len * su * su)
            };
            (pv, mr)
        } else {
            (-divided(pv, &dp, t_plus), divided(mv, &dm, t_minus))
        };
        2.0 * gamma / (pr * mr).max(1e-300).sqrt()
    }

    /// Half period, theta advance and time integral of `h` over the
    /// half oscillation with `cos(phi) > 0`.
    fn half_integrals(&self, level: f64, t_minus: f64, t_plus: f64) -> Result<(f64, f64, f64)> {
        let m = self.m;
        let len = t_plus - t_minus;
        let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 4000 };
        let weight = |u: f64| {
            let t = t_minus + len * u.sin().powi(2);
            let q = self.profile.at(t);
            (q, level + q.big_gamma, self.time_weight(level, t_minus, t_plus, u))
        };
        let s = numerics::integrate_with(|u| weight(u).2, 0.0, FRAC_PI_2, opts)?;
        let hs = numerics::integrate_with(
            |u| {
                let (q, j, w) = weight(u);
                let beta = q.big_gamma + q.dgamma;
                (m * m + 1.0 - beta * j / (q.gamma * q.gamma)) * w
            },
            0.0,
            FRAC_PI_2,
            opts,
        )?;
        // the theta advance can vanish, so measure its error against s
        let theta_opts = QuadOptions { abs_tol: opts.rel_tol * s.abs().max(1.0), ..opts };
        let theta = numerics::integrate_with(
            |u| {
                let (q, j, w) = weight(u);
                j / (q.gamma * q.gamma) * w
            },
            0.0,
            FRAC_PI_2,
            theta_opts,
        )?;
        Ok((s, hs, theta))
    }

    pub fn level(&self, level: f64) -> Result<ReducedLevel> {
        let (t_minus, t_plus) = self.turning_points(level)?;
        let (s_half, hs, theta_half) = self.half_integrals(level, t_minus, t_plus)?;
        if !(s_half > 0.0 && s_half.is_finite()) {
            return Err(Error::NonConvergence { what: "half period".into(), residual: s_half });
        }
        Ok(ReducedLevel { i: level, t_minus, t_plus, s_half, action: hs / s_half, theta_half })
    }

    /// Average of `h` over both halves of the oscillation, evaluating `h`
    /// on each branch with its own `phi` (`phi` and `pi - phi`).
    pub fn full_period_action(&self, level: f64) -> Result<f64> {
        let (t_minus, t_plus) = self.turning_points(level)?;
        let m = self.m;
        let len = t_plus - t_minus;
        let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 4000 };
        let mut total_h = 0.0;
        let mut total_s = 0.0;
        for branch in [false, true] {
            let integrand = |u: f64, with_h: bool| {
                let t = t_minus + len * u.sin().powi(2);
                let q = self.profile.at(t);
                let sin_phi = ((level + q.big_gamma) / (m * q.gamma)).clamp(-1.0, 1.0);
                let phi = if branch { PI - sin_phi.asin() } else { sin_phi.asin() };
                let speed = (m * phi.cos()).abs().max(1e-300);
                let w = len * (2.0 * u).sin() / speed;
                if with_h {
                    crate::flow::h_value_unchecked(&self.profile, m, t, phi) * w
                } else {
                    w
                }
            };
            total_h += numerics::integrate_with(|u| integrand(u, true), 0.0, FRAC_PI_2, opts)?;
            total_s += numerics::integrate_with(|u| integrand(u, false), 0.0, FRAC_PI_2, opts)?;
        }
        Ok(total_h / total_s)
    }

    /// Latitude endpoint rows: the extremal levels of `I`, with the limiting
    /// half period `pi / sqrt(K_m)` of the linearized oscillation.
    pub fn latitude_rows(&self) -> Result<(ReducedLevel, ReducedLevel)> {
        let row = |t: f64, i: f64| -> Result<ReducedLevel> {
            let lat = latitude_action(&self.profile, t)?;
            let km = contact::magnetic_curvature(&self.profile, self.m, t);
            Ok(ReducedLevel { i, t_minus: t, t_plus: t, s_half: PI / km.sqrt(), action: lat.action, theta_half: 0.0 })
        };
        Ok((row(self.range.t_min, self.range.i_min)?, row(self.range.t_max, self.range.i_max)?))
    }

    /// `n` uniform interior levels with the latitude rows at both ends.
    pub fn scan(&self, n: usize) -> Result<Vec<ReducedLevel>> {
        let (lo_row, hi_row) = self.latitude_rows()?;
        let (a, b) = (self.range.i_min, self.range.i_max);
        let levels: Vec<f64> = (1..=n)
            .map(|k| a + (b - a) * k as f64 / (n + 1) as f64)
            .filter(|&i| i - a > LATITUDE_BAND && b - i > LATITUDE_BAND)
            .collect();
        let rows: Result<Vec<ReducedLevel>> = levels.par_iter().map(|&i| self.level(i)).collect();
        let mut out = vec![lo_row];
        out.extend(rows?);
        out.push(hi_row);
        Ok(out)
    }
}

pub fn turning_points(p: &ProfileFunction, m: f64, level: f64) -> Result<(f64, f64)> {
    Reduced::new(p, m)?.turning_points(level)
}

pub fn birkhoff_action(p: &ProfileFunction, m: f64, level: f64) -> Result<ReducedLevel> {
    Reduced::new(p, m)?.level(level)
}

pub fn action_scan(p: &ProfileFunction, m: f64, n_levels: usize) -> Result<Vec<ReducedLevel>> {
    Reduced::new(p, m)?.scan(n_levels)
}

pub fn write_scan_csv<W: std::io::Write>(rows: &[ReducedLevel], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Latitude(LatitudeOrbit),
    Level(ReducedLevel),
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    CertifiedContact { m_gamma: f64 },
    NumericallyContact { min_action: f64, levels: usize },
    NotContactWitness { witness: Witness },
    Inconclusive { reason: String },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::CertifiedContact { .. } => "certified_contact",
            Verdict::NumericallyContact { .. } => "numerically_contact",
            Verdict::NotContactWitness { .. } => "not_contact_witness",
            Verdict::Inconclusive { .. } => "inconclusive",
        }
    }
}

pub const VERDICT_LEVELS: usize = 100;

pub fn contact_verdict(p: &ProfileFunction, m: f64) -> Verdict {
    contact_verdict_with(p, m, &contact::contact_interval(p))
}

pub fn contact_verdict_with(p: &ProfileFunction, m: f64, report: &ContactBoundsReport) -> Verdict {
    if report.certifies(m) && m * m - report.m_gamma * m + 1.0 > 0.0 {
        return Verdict::CertifiedContact { m_gamma: report.m_gamma };
    }
    let lats = match latitudes(p, m) {
        Ok(l) => l,
        Err(e) => return Verdict::Inconclusive { reason: e.to_string() },
    };
    if let Some(l) = lats.iter().find(|l| l.action <= 0.0) {
        return Verdict::NotContactWitness { witness: Witness::Latitude(*l) };
    }
    let rows = match action_scan(p, m, VERDICT_LEVELS) {
        Ok(r) => r,
        Err(e) => return Verdict::Inconclusive { reason: e.to_string() },
    };
    if let Some(r) = rows.iter().find(|r| r.action <= 0.0) {
        return Verdict::NotContactWitness { witness: Witness::Level(*r) };
    }
    let min_action = rows.iter().map(|r| r.action).fold(f64::INFINITY, f64::min);
    Verdict::NumericallyContact { min_action, levels: rows.len() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{make_ellipsoid, make_sphere};

    #[test]
    fn first_integral_examples() {
        let p = make_sphere();
        assert!((i_hat(&p, 1.0, PI / 4.0, FRAC_PI_2) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(i_hat_pm(&p, 0.7, 0.0), (1.0, 1.0));
        assert_eq!(i_hat(&p, 0.0, 1.0, 0.3), i_hat(&p, 0.0, 1.0, 2.0));
    }

    #[test]
    fn sphere_latitudes() {
        let l = latitudes(&make_sphere(), 1.0).unwrap();
        assert_eq!(l.len(), 2);
        assert!((l[0].t0 - PI / 4.0).abs() < 1e-12 && l[0].sign == 1);
        assert!((l[1].t0 - 3.0 * PI / 4.0).abs() < 1e-12 && l[1].sign == -1);
        for x in &l {
            assert!((x.action - 2.0).abs() < 1e-12);
            assert!(!x.degenerate);
        }
    }

    #[test]
    fn equator_is_rejected() {
        assert!(matches!(latitude_action(&make_sphere(), FRAC_PI_2), Err(Error::Equator { .. })));
    }

    #[test]
    fn sphere_turning_points() {
        let (a, b) = turning_points(&make_sphere(), 1.0, 1.2).unwrap();
        let s = (1.2 / 2f64.sqrt()).asin();
        assert!((a - (s - PI / 4.0)).abs() < 1e-12);
        assert!((b - (PI - s - PI / 4.0)).abs() < 1e-12);
        let (a, b) = turning_points(&make_sphere(), 1.0, 0.0).unwrap();
        assert!((a + b - PI).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_level() {
        assert!(matches!(turning_points(&make_sphere(), 1.0, 1.5), Err(Error::LevelOutOfRange { .. })));
    }

    #[test]
    fn sphere_action_is_constant() {
        for &m in &[0.3, 1.0, 2.5] {
            let r = Reduced::new(&make_sphere(), m).unwrap();
            for k in 1..10 {
                let i = r.range.i_min + (r.range.i_max - r.range.i_min) * k as f64 / 10.0;
                let lvl = r.level(i).unwrap();
                assert!((lvl.action - (1.0 + m * m)).abs() < 1e-9, "{m} {i} {}", lvl.action);
                // half of the X^m period 2pi/sqrt(1+m^2)
                assert!((lvl.s_half - PI / (1.0 + m * m).sqrt()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn full_period_matches_half_period() {
        let r = Reduced::new(&make_ellipsoid(2.0).unwrap(), 1.0).unwrap();
        for &i in &[-1.3, -0.4, 0.5, 1.2] {
            let half = r.level(i).unwrap().action;
            let full = r.full_period_action(i).unwrap();
            assert!((half - full).abs() < 1e-9 * half.abs());
        }
    }

    #[test]
    fn action_tends_to_latitude_value() {
        let p = make_ellipsoid(3.0).unwrap();
        let r = Reduced::new(&p, 0.8).unwrap();
        let (lo, hi) = r.latitude_rows().unwrap();
        let eps = 1e-6 * (r.range.i_max - r.range.i_min);
        let a = r.level(r.range.i_max - eps).unwrap();
        assert!((a.action - hi.action).abs() < 1e-4);
        let b = r.level(r.range.i_min + eps).unwrap();
        assert!((b.action - lo.action).abs() < 1e-4);
        assert!((a.s_half - hi.s_half).abs() < 1e-3);
    }

    #[test]
    fn scan_with_no_levels_has_two_rows() {
        let rows = action_scan(&make_sphere(), 1.0, 0).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| (r.action - 2.0).abs() < 1e-12));
    }

    #[test]
    fn sphere_is_certified() {
        assert_eq!(contact_verdict(&make_sphere(), 3.0).name(), "certified_contact");
    }
}
