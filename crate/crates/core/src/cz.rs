//! Linearized Reeb flow in the global frame of the contact structure,
//! winding intervals and Conley-Zehnder indices.
//!
//! The contact form is `tau = m alpha + psi - beta_theta dtheta`, its Reeb
//! field `R = X^m / h` with `h = tau(X^m)`. The contact planes are framed by
//! `chi(Z) = sqrt(h) (eta(Z), alpha(Z))`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix3x2, SVector, Vector2, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{check_interior, pole_guard, PhasePoint};
use crate::numerics::ode::{self, OdeOptions};
use crate::numerics::{golden_max, golden_min, linspace};
use crate::profile::{ProfileFunction, ProfilePoint};
use crate::reduced::{self, LatitudeOrbit, Reduced};

/// Reeb-time spacing of path samples.
pub const PATH_STEP: f64 = 0.02;
pub const WINDING_DIRECTIONS: usize = 256;
pub const CZ_TOL: f64 = 1e-6;
pub const DET_TOL: f64 = 1e-5;

fn j_matrix() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

fn point(p: &ProfileFunction, state: &PhasePoint) -> Result<ProfilePoint> {
    check_interior(p, state.t)?;
    p.eval(state.t)
}

/// `(alpha, psi, eta)` of a tangent vector given by its coordinate
/// components `(w_t, w_phi, w_theta)`.
pub fn coframe_eval(p: &ProfileFunction, state: PhasePoint, w: [f64; 3]) -> Result<[f64; 3]> {
    let q = point(p, &state)?;
    Ok(coframe_at(&q, state.phi, w))
}

fn coframe_at(q: &ProfilePoint, phi: f64, w: [f64; 3]) -> [f64; 3] {
    let (s, c) = phi.sin_cos();
    [
        w[0] * c + w[2] * q.gamma * s,
        w[1] + w[2] * q.dgamma,
        -w[0] * s + w[2] * q.gamma * c,
    ]
}

/// Coordinate components of the frame `(X, V, H)`.
pub fn frame(p: &ProfileFunction, state: PhasePoint) -> Result<[[f64; 3]; 3]> {
    let q = point(p, &state)?;
    Ok(frame_at(&q, state.phi))
}

fn frame_at(q: &ProfilePoint, phi: f64) -> [[f64; 3]; 3] {
    let (s, c) = phi.sin_cos();
    let (g, g1) = (q.gamma, q.dgamma);
    [[c, -g1 * s / g, s / g], [0.0, 1.0, 0.0], [-s, -g1 * c / g, c / g]]
}

fn h_at(q: &ProfilePoint, m: f64, phi: f64) -> f64 {
    m * m + 1.0 - m * (q.big_gamma + q.dgamma) * phi.sin() / q.gamma
}

/// `h = tau(X^m)`; must be positive for the frame to exist.
pub fn h_value(p: &ProfileFunction, m: f64, state: PhasePoint) -> Result<f64> {
    let h = h_at(&point(p, &state)?, m, state.phi);
    if !(h > 0.0) {
        return Err(Error::NotContactPrimitive { h });
    }
    Ok(h)
}

/// `chi` as a 2x3 matrix acting on coordinate components.
fn chi_matrix(q: &ProfilePoint, m: f64, phi: f64) -> Matrix2x3<f64> {
    let (s, c) = phi.sin_cos();
    let r = h_at(q, m, phi).sqrt();
    Matrix2x3::new(-s * r, 0.0, q.gamma * c * r, c * r, 0.0, q.gamma * s * r)
}

/// Inverse of `chi` onto the contact plane, as a 3x2 matrix.
fn chi_inverse(q: &ProfilePoint, m: f64, phi: f64) -> Matrix3x2<f64> {
    let (s, c) = phi.sin_cos();
    let beta = q.big_gamma + q.dgamma;
    let r = h_at(q, m, phi).sqrt();
    let tau_x = m - beta * s / q.gamma;
    let tau_h = -beta * c / q.gamma;
    let [x, v, hh] = frame_at(q, phi);
    let col = |a: f64, b: f64| {
        let cv = -(b * tau_x + a * tau_h) / r;
        Vector3::from_fn(|i, _| (b * x[i] + a * hh[i]) / r + cv * v[i])
    };
    Matrix3x2::from_columns(&[col(1.0, 0.0), col(0.0, 1.0)])
}

/// Reeb field `X^m / h` and its Jacobian in `(t, phi, theta)`.
fn reeb_and_jacobian(q: &ProfilePoint, m: f64, phi: f64) -> (Vector3<f64>, Matrix3<f64>) {
    let (s, c) = phi.sin_cos();
    let (g, g1, g2) = (q.gamma, q.dgamma, q.ddgamma);
    let beta = q.big_gamma + g1;
    let dbeta = g + g2;
    let x = Vector3::new(m * c, 1.0 - m * g1 * s / g, m * s / g);
    let dx = Matrix3::new(
        0.0,
        -m * s,
        0.0,
        -m * s * (g2 * g - g1 * g1) / (g * g),
        -m * g1 * c / g,
        0.0,
        -m * s * g1 / (g * g),
        m * c / g,
        0.0,
    );
    let h = m * m + 1.0 - m * beta * s / g;
    let dh = Vector3::new(-m * s * (dbeta * g - beta * g1) / (g * g), -m * beta * c / g, 0.0);
    (x / h, dx / h - x * dh.transpose() / (h * h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrbitKind {
    Fiber,
    Latitude { t0: f64, sign: i8 },
    Torus { level: f64, p: i64, q: i64 },
}

/// A closed Reeb orbit: start point and prime period in Reeb time.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PeriodicOrbit {
    pub kind: OrbitKind,
    pub start: PhasePoint,
    pub reeb_period: f64,
    /// prime period of the `X^m` parametrization
    pub flow_period: f64,
    /// whether the prime orbit is contractible in the unit tangent bundle
    pub prime_contractible: bool,
}

impl PeriodicOrbit {
    pub fn fiber(t0: f64) -> Self {
        Self { kind: OrbitKind::Fiber, start: PhasePoint::new(t0, 0.0, 0.0), reeb_period: 2.0 * PI, flow_period: 2.0 * PI, prime_contractible: false }
    }

    pub fn latitude(p: &ProfileFunction, m: f64, lat: &LatitudeOrbit) -> Result<Self> {
        let start = PhasePoint::new(lat.t0, lat.phi(), 0.0);
        let h = h_value(p, m, start)?;
        let gamma = p.eval(lat.t0)?.gamma;
        Ok(Self {
            kind: OrbitKind::Latitude { t0: lat.t0, sign: lat.sign },
            start,
            reeb_period: h * 2.0 * PI * gamma / m,
            flow_period: 2.0 * PI * gamma / m,
            prime_contractible: false,
        })
    }

    pub fn contractible(&self, covers: u32) -> bool {
        self.prime_contractible || covers.is_multiple_of(2)
    }

    /// Smallest number of covers giving a contractible orbit.
    pub fn contractible_covers(&self) -> u32 {
        if self.prime_contractible {
            1
        } else {
            2
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SymplecticPath {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub matrices: Vec<Matrix2<f64>>,
    pub m: f64,
    pub h_values: Vec<f64>,
    pub orbit: Option<OrbitKind>,
}

impl SymplecticPath {
    pub fn from_matrices(times: Vec<f64>, matrices: Vec<Matrix2<f64>>) -> Self {
        let n = times.len();
        Self { times, matrices, m: 0.0, h_values: vec![1.0; n], orbit: None }
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn det_defect(&self) -> f64 {
        self.matrices.iter().map(|a| (a.determinant() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `B = dPsi/dt Psi^-1` by fourth-order central differences on the
    /// uniform sample grid.
    pub fn generators(&self) -> Vec<(f64, Matrix2<f64>)> {
        let n = self.times.len();
        if n < 5 {
            return vec![];
        }
        let dt = self.times[1] - self.times[0];
        let a = &self.matrices;
        (2..n - 2)
            .map(|k| {
                let d = (a[k - 2] - a[k + 2] + (a[k + 1] - a[k - 1]) * 8.0) / (12.0 * dt);
                let inv = a[k].try_inverse().unwrap_or_else(Matrix2::identity);
                (self.times[k], d * inv)
            })
            .collect()
    }

    /// `sup |B - J|` in the operator norm.
    pub fn rho_sup(&self) -> f64 {
        let j = j_matrix();
        self.generators().iter().map(|(_, b)| operator_norm(&(b - j))).fold(0.0, f64::max)
    }

    /// Largest rotation between consecutive samples over all directions.
    fn max_step_rotation(&self) -> f64 {
        let dirs = directions(WINDING_DIRECTIONS);
        self.matrices
            .windows(2)
            .map(|w| dirs.iter().map(|u| angle_between(&(w[0] * u), &(w[1] * u)).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }
}

fn operator_norm(a: &Matrix2<f64>) -> f64 {
    a.singular_values().max()
}

fn directions(n: usize) -> Vec<Vector2<f64>> {
    (0..n).map(|k| unit(PI * k as f64 / n as f64)).collect()
}

fn unit(a: f64) -> Vector2<f64> {
    Vector2::new(a.cos(), a.sin())
}

fn angle_between(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x * b.y - a.y * b.x).atan2(a.dot(b))
}

/// Transports the contact plane along the Reeb orbit of `start` for Reeb
/// time `duration`, sampled at `n + 1` uniform times.
pub fn transport(p: &ProfileFunction, m: f64, start: PhasePoint, duration: f64, n: usize) -> Result<SymplecticPath> {
    if !(duration > 0.0) || n == 0 {
        return Err(Error::InvalidParameter(format!("path needs positive duration and samples, got {duration}, {n}")));
    }
    let q0 = point(p, &start)?;
    let h0 = h_value(p, m, start)?;
    let d0 = chi_inverse(&q0, m, start.phi);
    let g = 0.5 * pole_guard(p);
    let ell = p.ell();
    let rhs = |_s: f64, y: &SVector<f64, 12>| {
        let q = p.at(y[0].clamp(g, ell - g));
        let (r, dr) = reeb_and_jacobian(&q, m, y[1]);
        let mm = Matrix3::from_column_slice(&y.as_slice()[3..]);
        let dm = dr * mm;
        let mut out = SVector::<f64, 12>::zeros();
        out.fixed_rows_mut::<3>(0).copy_from(&r);
        out.as_mut_slice()[3..].copy_from_slice(dm.as_slice());
        out
    };
    let guard = pole_guard(p);
    let stop = move |y: &SVector<f64, 12>| !(y[0] >= guard && y[0] <= ell - guard);
    let mut y0 = SVector::<f64, 12>::zeros();
    y0[0] = start.t;
    y0[1] = start.phi;
    y0[2] = start.theta;
    y0.as_mut_slice()[3..].copy_from_slice(Matrix3::<f64>::identity().as_slice());
    let grid = linspace(0.0, duration, n);
    let opts = OdeOptions { rtol: 1e-12, atol: 1e-13, angle_mask: 0b110, ..Default::default() };
    let run = ode::solve_grid(&rhs, &stop, y0, &grid, opts)?;
    if let Some((_, y)) = run.stopped {
        return Err(Error::PoleProximity { t: y[0] });
    }
    let mut matrices = Vec::with_capacity(grid.len());
    let mut h_values = Vec::with_capacity(grid.len());
    for y in &run.states {
        let q = p.at(y[0]);
        let h = h_at(&q, m, y[1]);
        if !(h > 0.0) {
            return Err(Error::NotContactPrimitive { h });
        }
        let mm = Matrix3::from_column_slice(&y.as_slice()[3..]);
        matrices.push(chi_matrix(&q, m, y[1]) * mm * d0);
        h_values.push(h);
    }
    debug_assert!((h_values[0] - h0).abs() < 1e-12);
    let path = SymplecticPath { times: grid, matrices, m, h_values, orbit: None };
    let defect = path.det_defect();
    if defect > DET_TOL {
        return Err(Error::SymplecticDefect { defect });
    }
    Ok(path)
}

/// Linearized Reeb flow along `covers` traversals of a periodic orbit.
pub fn linearized_flow(p: &ProfileFunction, m: f64, orbit: &PeriodicOrbit, covers: u32) -> Result<SymplecticPath> {
    if covers == 0 {
        return Err(Error::InvalidParameter("covers must be at least 1".into()));
    }
    let per_cover = ((orbit.reeb_period / PATH_STEP).ceil() as usize).max(64);
    let mut n = per_cover * covers as usize;
    for _ in 0..6 {
        let mut path = transport(p, m, orbit.start, orbit.reeb_period * f64::from(covers), n)?;
        path.orbit = Some(orbit.kind);
        if path.max_step_rotation() < FRAC_PI_2 {
            return Ok(path);
        }
        n *= 2;
    }
    Err(Error::Resolution("linearized flow rotates too fast between samples".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindingInterval {
    pub lo: f64,
    pub hi: f64,
}

impl WindingInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Total winding `Delta theta / 2 pi` of the direction `(cos a, sin a)`.
pub fn winding_of(path: &SymplecticPath, a: f64) -> Result<f64> {
    let u = unit(a);
    let mut prev = u;
    let mut total = 0.0;
    for m in &path.matrices[1..] {
        let v = m * u;
        let step = angle_between(&prev, &v);
        if step.abs() >= FRAC_PI_2 {
            return Err(Error::Resolution(format!("direction turns by {step} between samples")));
        }
        total += step;
        prev = v;
    }
    Ok(total / (2.0 * PI))
}

/// `[min, max]` of the winding over all directions.
pub fn winding_interval(path: &SymplecticPath) -> Result<WindingInterval> {
    let n = WINDING_DIRECTIONS;
    let angles: Vec<f64> = (0..n).map(|k| PI * k as f64 / n as f64).collect();
    let values: Vec<f64> = angles.par_iter().map(|&a| winding_of(path, a)).collect::<Result<_>>()?;
    let da = PI / n as f64;
    let imin = (0..n).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
    let imax = (0..n).max_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
    // the winding is pi-periodic in the direction, so the brackets may wrap
    let w = |a: f64| winding_of(path, a).unwrap_or(f64::NAN);
    let (_, lo) = golden_min(w, angles[imin] - da, angles[imin] + da, 1e-12);
    let (_, hi) = golden_max(w, angles[imax] - da, angles[imax] + da, 1e-12);
    let iv = WindingInterval { lo: lo.min(values[imin]), hi: hi.max(values[imax]) };
    if !(iv.width() < 0.5) {
        return Err(Error::Winding(format!("interval [{}, {}] is not shorter than 1/2", iv.lo, iv.hi)));
    }
    Ok(iv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CzIndex {
    pub index: i64,
    pub degenerate: bool,
}

/// `2k` if the integer `k` lies in the interval, `2k + 1` if the interval
/// sits in `(k, k + 1)`. An endpoint within `CZ_TOL` of an integer marks
/// the path degenerate and the interval is shifted slightly to the left.
pub fn cz_index(iv: &WindingInterval) -> CzIndex {
    let near = |x: f64| (x - x.round()).abs() < CZ_TOL;
    let degenerate = near(iv.lo) || near(iv.hi);
    let shift = if degenerate { 2.0 * CZ_TOL } else { 0.0 };
    let (lo, hi) = (iv.lo - shift, iv.hi - shift);
    let k = lo.ceil();
    let index = if k <= hi { 2 * k as i64 } else { 2 * lo.floor() as i64 + 1 };
    CzIndex { index, degenerate }
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitCz {
    pub orbit: PeriodicOrbit,
    pub covers: u32,
    pub period: f64,
    pub interval: WindingInterval,
    pub index: i64,
    pub degenerate: bool,
    pub contractible: bool,
    pub det_defect: f64,
    pub rho_sup: f64,
}

pub fn orbit_cz(p: &ProfileFunction, m: f64, orbit: &PeriodicOrbit, covers: u32) -> Result<OrbitCz> {
    let path = linearized_flow(p, m, orbit, covers)?;
    let interval = winding_interval(&path)?;
    let cz = cz_index(&interval);
    Ok(OrbitCz {
        orbit: *orbit,
        covers,
        period: path.duration(),
        interval,
        index: cz.index,
        degenerate: cz.degenerate,
        contractible: orbit.contractible(covers),
        det_defect: path.det_defect(),
        rho_sup: path.rho_sup(),
    })
}

/// Index of a latitude orbit over `covers` traversals.
pub fn latitude_cz(p: &ProfileFunction, m: f64, lat: &LatitudeOrbit, covers: u32) -> Result<OrbitCz> {
    orbit_cz(p, m, &PeriodicOrbit::latitude(p, m, lat)?, covers)
}

/// Index of the fiber orbit at `t0` for `m = 0`.
pub fn fiber_cz(p: &ProfileFunction, t0: f64, covers: u32) -> Result<OrbitCz> {
    orbit_cz(p, 0.0, &PeriodicOrbit::fiber(t0), covers)
}

/// Indices of all latitude orbits (fiber at mid-height when `m = 0`).
pub fn latitude_indices(p: &ProfileFunction, m: f64, covers: u32) -> Result<Vec<OrbitCz>> {
    if m == 0.0 {
        return Ok(vec![fiber_cz(p, 0.5 * p.ell(), covers)?]);
    }
    reduced::latitudes(p, m)?.par_iter().map(|l| latitude_cz(p, m, l, covers)).collect()
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

pub const TORUS_LEVELS: usize = 200;
pub const TORUS_MAX_Q: i64 = 4;

/// Periodic orbits on invariant tori: levels where the rotation number
/// `theta turns per reduced period` equals `p/q` with `q <= max_q`.
pub fn torus_orbits(r: &Reduced, n_levels: usize, max_q: i64) -> Result<Vec<PeriodicOrbit>> {
    let (a, b) = (r.range.i_min, r.range.i_max);
    let band = 1e-3 * (b - a);
    let levels: Vec<f64> = linspace(a + band, b - band, n_levels.max(2))
        .into_iter()
        .filter(|i| (i.abs() - 1.0).abs() > 1e-6)
        .collect();
    let rows: Vec<reduced::ReducedLevel> = levels.par_iter().map(|&i| r.level(i)).collect::<Result<_>>()?;
    let nu = |i: f64| r.level(i).map(|l| l.rotation());
    let mut hits: Vec<(f64, i64, i64)> = vec![];
    for w in rows.windows(2) {
        let (x0, x1) = (w[0].i, w[1].i);
        // the orbit through a pole separates |I| < 1 from |I| > 1
        if (x0.abs() < 1.0) != (x1.abs() < 1.0) {
            continue;
        }
        let (v0, v1) = (w[0].rotation(), w[1].rotation());
        for q in 1..=max_q {
            let (lo, hi) = (v0.min(v1) * q as f64, v0.max(v1) * q as f64);
            for pp in (lo.ceil() as i64)..=(hi.floor() as i64) {
                if gcd(pp, q) != 1 {
                    continue;
                }
                let target = pp as f64 / q as f64;
                let level = if (v0 - target).abs() < 1e-9 {
                    // constant rotation number: keep one orbit per run of levels
                    if hits.last().is_some_and(|h| h.1 == pp && h.2 == q) {
                        continue;
                    }
                    x0
                } else if (v1 - target).abs() < 1e-9 {
                    continue;
                } else {
                    let mut f = |i: f64| nu(i).map(|v| v - target).unwrap_or(f64::NAN);
                    crate::numerics::bisect(&mut f, x0, x1, 1e-12, 200)?
                };
                hits.push((level, pp, q));
            }
        }
    }
    hits.dedup_by(|x, y| x.1 == y.1 && x.2 == y.2 && (x.0 - y.0).abs() < 1e-9);
    hits.iter()
        .map(|&(level, pp, q)| {
            let l = r.level(level)?;
            let t = 0.5 * (l.t_minus + l.t_plus);
            let pq = r.profile.at(t);
            let sin_phi = ((level + pq.big_gamma) / (r.m * pq.gamma)).clamp(-1.0, 1.0);
            let winds = i64::from(l.phi_winds());
            Ok(PeriodicOrbit {
                kind: OrbitKind::Torus { level, p: pp, q },
                start: PhasePoint::new(t, sin_phi.asin(), 0.0),
                reeb_period: q as f64 * 2.0 * l.s_half * l.action,
                flow_period: q as f64 * 2.0 * l.s_half,
                prime_contractible: (q * winds + pp).rem_euclid(2) == 0,
            })
        })
        .collect()
}

/// Minimal `h` over a grid of the unit tangent bundle.
pub fn sampled_min_h(p: &ProfileFunction, m: f64) -> f64 {
    let g = pole_guard(p);
    let ts = linspace(g, p.ell() - g, 256);
    ts.par_iter()
        .map(|&t| {
            let q = p.at(t);
            (0..64).map(|k| h_at(&q, m, 2.0 * PI * k as f64 / 64.0)).fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub m: f64,
    #[serde(rename = "T0_estimate")]
    pub t0_estimate: f64,
    pub rho_sup_empirical: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// evidence only: `lhs < rhs`
    pub verdict: bool,
    pub min_h: f64,
    pub orbits: Vec<OrbitSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitSummary {
    pub orbit: PeriodicOrbit,
    pub covers: u32,
    pub period: f64,
    pub rho_sup: f64,
}

/// `rho` sup over the latitude double covers.
pub fn latitude_rho_sup(p: &ProfileFunction, m: f64) -> Result<f64> {
    let paths = latitude_paths(p, m)?;
    Ok(paths.iter().map(|(_, path)| path.rho_sup()).fold(0.0, f64::max))
}

fn latitude_paths(p: &ProfileFunction, m: f64) -> Result<Vec<(PeriodicOrbit, SymplecticPath)>> {
    let orbits: Vec<PeriodicOrbit> = if m == 0.0 {
        vec![PeriodicOrbit::fiber(0.5 * p.ell())]
    } else {
        reduced::latitudes(p, m)?.iter().map(|l| PeriodicOrbit::latitude(p, m, l)).collect::<Result<_>>()?
    };
    orbits
        .par_iter()
        .map(|o| Ok((*o, linearized_flow(p, m, o, o.contractible_covers())?)))
        .collect()
}

/// Compares `2 pi / T0` with `1 - sup |rho|` over the detected contractible
/// orbits. Both sides are estimates, so the verdict is evidence only.
pub fn dynamical_convexity_report(p: &ProfileFunction, m: f64) -> Result<ConvexityReport> {
    let min_h = sampled_min_h(p, m);
    if !(min_h > 0.0) {
        return Err(Error::NotContactPrimitive { h: min_h });
    }
    let mut summaries: Vec<OrbitSummary> = latitude_paths(p, m)?
        .into_iter()
        .map(|(o, path)| OrbitSummary { orbit: o, covers: o.contractible_covers(), period: path.duration(), rho_sup: path.rho_sup() })
        .collect();
    if m > 0.0 {
        if let Ok(r) = Reduced::new(p, m) {
            let tori = torus_orbits(&r, TORUS_LEVELS, TORUS_MAX_Q)?;
            summaries.extend(tori.iter().map(|o| {
                let covers = o.contractible_covers();
                OrbitSummary { orbit: *o, covers, period: o.reeb_period * f64::from(covers), rho_sup: f64::NAN }
            }));
            // rho along a few generic orbits, one reduced period each
            let (a, b) = (r.range.i_min, r.range.i_max);
            let samples: Vec<f64> = (1..4).map(|k| a + (b - a) * k as f64 / 4.0).collect();
            let extra: Vec<f64> = samples
                .par_iter()
                .map(|&i| -> Result<f64> {
                    let l = r.level(i)?;
                    let t = 0.5 * (l.t_minus + l.t_plus);
                    let q = p.at(t);
                    let phi = ((i + q.big_gamma) / (m * q.gamma)).clamp(-1.0, 1.0).asin();
                    let dur = 2.0 * l.s_half * l.action;
                    let n = ((dur / PATH_STEP).ceil() as usize).max(64);
                    Ok(transport(p, m, PhasePoint::new(t, phi, 0.0), dur, n)?.rho_sup())
                })
                .collect::<Result<_>>()?;
            let rho_generic = extra.iter().copied().fold(0.0, f64::max);
            summaries.iter_mut().filter(|s| s.rho_sup.is_nan()).for_each(|s| s.rho_sup = rho_generic);
        }
    }
    let t0 = summaries.iter().map(|s| s.period).fold(f64::INFINITY, f64::min);
    let rho = summaries.iter().map(|s| s.rho_sup).fold(0.0, f64::max);
    let lhs = 2.0 * PI / t0;
    let rhs = 1.0 - rho;
    Ok(ConvexityReport { m, t0_estimate: t0, rho_sup_empirical: rho, lhs, rhs, verdict: lhs < rhs, min_h, orbits: summaries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{make_ellipsoid, make_sphere};

    fn rotation_path(total: f64, n: usize) -> SymplecticPath {
        let times = linspace(0.0, total, n);
        let mats = times.iter().map(|&t| Matrix2::new(t.cos(), -t.sin(), t.sin(), t.cos())).collect();
        SymplecticPath::from_matrices(times, mats)
    }

    #[test]
    fn coframe_examples() {
        let p = make_ellipsoid(2.0).unwrap();
        let s = PhasePoint::new(0.7, 0.4, 0.0);
        assert_eq!(coframe_eval(&p, s, [0.0, 1.0, 0.0]).unwrap(), [0.0, 1.0, 0.0]);
        let c = coframe_eval(&p, PhasePoint::new(0.7, 0.0, 0.0), [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(c, [1.0, 0.0, -0.0]);
        let f = frame(&p, s).unwrap();
        for (i, v) in f.iter().enumerate() {
            let c = coframe_eval(&p, s, *v).unwrap();
            // frame order (X, V, H) against coframe order (alpha, psi, eta)
            for (j, x) in c.iter().enumerate() {
                assert!((x - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn h_examples() {
        let p = make_sphere();
        assert!((h_value(&p, 0.6, PhasePoint::new(1.0, 0.8, 0.0)).unwrap() - 1.36).abs() < 1e-14);
        let e = make_ellipsoid(3.0).unwrap();
        assert_eq!(h_value(&e, 0.0, PhasePoint::new(1.0, 0.8, 0.0)).unwrap(), 1.0);
    }

    #[test]
    fn chi_inverse_lands_in_contact_plane() {
        let p = make_ellipsoid(2.0).unwrap();
        let (m, t, phi) = (0.7, 0.9, 1.1);
        let q = p.at(t);
        let d = chi_inverse(&q, m, phi);
        let c = chi_matrix(&q, m, phi);
        assert!((c * d - Matrix2::identity()).norm() < 1e-13);
        for k in 0..2 {
            let w = [d[(0, k)], d[(1, k)], d[(2, k)]];
            let [a, ps, _] = coframe_at(&q, phi, w);
            let tau = m * a + ps - (q.big_gamma + q.dgamma) * w[2];
            assert!(tau.abs() < 1e-13);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = make_ellipsoid(2.0).unwrap();
        let (m, t, phi) = (0.8, 1.1, 0.6);
        let (_, dr) = reeb_and_jacobian(&p.at(t), m, phi);
        let e = 1e-6;
        let r = |t: f64, phi: f64| reeb_and_jacobian(&p.at(t), m, phi).0;
        let dt = (r(t + e, phi) - r(t - e, phi)) / (2.0 * e);
        let dp = (r(t, phi + e) - r(t, phi - e)) / (2.0 * e);
        for i in 0..3 {
            assert!((dr[(i, 0)] - dt[i]).abs() < 1e-7 && (dr[(i, 1)] - dp[i]).abs() < 1e-7);
            assert_eq!(dr[(i, 2)], 0.0);
        }
    }

    #[test]
    fn double_fiber_is_a_rotation() {
        let r = fiber_cz(&make_sphere(), 1.0, 2).unwrap();
        assert!((r.interval.lo - 2.0).abs() < 1e-6 && (r.interval.hi - 2.0).abs() < 1e-6);
        assert_eq!((r.index, r.degenerate), (3, true));
        let path = linearized_flow(&make_sphere(), 0.0, &PeriodicOrbit::fiber(1.0), 2).unwrap();
        for (t, a) in path.times.iter().zip(&path.matrices) {
            assert!((a - Matrix2::new(t.cos(), -t.sin(), t.sin(), t.cos())).norm() < 1e-6);
        }
    }

    #[test]
    fn synthetic_winding_intervals() {
        let iv = winding_interval(&rotation_path(4.0 * PI, 400)).unwrap();
        assert!((iv.lo - 2.0).abs() < 1e-12 && (iv.hi - 2.0).abs() < 1e-12);
        let times = linspace(0.0, 3.0, 300);
        let mats = times.iter().map(|&t| Matrix2::new((0.7 * t).exp(), 0.0, 0.0, (-0.7 * t).exp())).collect();
        let iv = winding_interval(&SymplecticPath::from_matrices(times, mats)).unwrap();
        assert!(iv.lo > -0.25 && iv.hi < 0.25 && iv.width() < 0.5);
    }

    #[test]
    fn index_rules() {
        assert_eq!(cz_index(&WindingInterval { lo: 2.0, hi: 2.0 }), CzIndex { index: 3, degenerate: true });
        assert_eq!(cz_index(&WindingInterval { lo: 0.6, hi: 0.9 }), CzIndex { index: 1, degenerate: false });
        assert_eq!(cz_index(&WindingInterval { lo: 1.8, hi: 2.2 }), CzIndex { index: 4, degenerate: false });
        assert_eq!(cz_index(&WindingInterval { lo: -0.3, hi: -0.1 }), CzIndex { index: -1, degenerate: false });
    }

    #[test]
    fn sphere_latitude_double_cover() {
        let p = make_sphere();
        let lats = reduced::latitudes(&p, 0.1).unwrap();
        for l in &lats {
            let r = latitude_cz(&p, 0.1, l, 2).unwrap();
            assert_eq!(r.index, 3, "{r:?}");
            assert!(r.contractible && r.det_defect < 1e-6);
            let one = latitude_cz(&p, 0.1, l, 1).unwrap();
            assert!(!one.contractible);
            assert!((one.interval.hi - 0.5 * r.interval.hi).abs() < 1e-6);
        }
    }

    #[test]
    fn single_cover_is_a_prefix_of_the_double_cover() {
        let p = make_ellipsoid(2.0).unwrap();
        let lat = reduced::latitudes(&p, 0.3).unwrap()[0];
        let o = PeriodicOrbit::latitude(&p, 0.3, &lat).unwrap();
        let one = linearized_flow(&p, 0.3, &o, 1).unwrap();
        let two = linearized_flow(&p, 0.3, &o, 2).unwrap();
        for (k, a) in one.matrices.iter().enumerate() {
            assert!((a - two.matrices[k]).norm() < 1e-8);
        }
    }

    #[test]
    fn start_point_does_not_change_the_index() {
        let p = make_ellipsoid(2.0).unwrap();
        let lat = reduced::latitudes(&p, 0.4).unwrap()[0];
        let base = PeriodicOrbit::latitude(&p, 0.4, &lat).unwrap();
        let idx: Vec<i64> = [0.0, 1.3, 4.0]
            .iter()
            .map(|&th| {
                let o = PeriodicOrbit { start: PhasePoint { theta: th, ..base.start }, ..base };
                orbit_cz(&p, 0.4, &o, 2).unwrap().index
            })
            .collect();
        assert!(idx.iter().all(|&i| i == idx[0]));
    }

    #[test]
    fn report_at_zero_strength() {
        let r = dynamical_convexity_report(&make_sphere(), 0.0).unwrap();
        assert!((r.lhs - 0.5).abs() < 1e-9 && (r.rhs - 1.0).abs() < 1e-6 && r.verdict, "{r:?}");
    }

    #[test]
    fn small_strength_sphere_report() {
        for m in [0.01, 0.05] {
            let r = dynamical_convexity_report(&make_sphere(), m).unwrap();
            // T0 = 4 pi sqrt(1 + m^2), |B - J| = m^2 / (1 + m^2)
            assert!((r.t0_estimate - 4.0 * PI * (1.0 + m * m).sqrt()).abs() < 1e-6, "{r:?}");
            assert!((r.rho_sup_empirical - m * m / (1.0 + m * m)).abs() < 1e-6);
            assert!(r.lhs < 0.6 && r.rhs > 0.9 && r.verdict);
        }
    }
}
