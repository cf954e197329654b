//! The magnetic vector field `X^m = m X + V` on the unit tangent bundle in
//! coordinates `(t, phi, theta)`.
//!
//! There is no energy variable: the phase space is the unit tangent bundle
//! itself, so only the first integral can drift.

use std::f64::consts::PI;

use nalgebra::SVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ode::{self, OdeOptions, OdeStats};
use crate::numerics::{self, linspace};
use crate::profile::ProfileFunction;
use crate::reduced::i_hat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub t: f64,
    pub phi: f64,
    pub theta: f64,
}

impl PhasePoint {
    pub fn new(t: f64, phi: f64, theta: f64) -> Self {
        Self { t, phi, theta }
    }

    fn vec(&self) -> SVector<f64, 3> {
        SVector::<f64, 3>::new(self.t, self.phi, self.theta)
    }

    fn from_slice(v: &[f64]) -> Self {
        Self { t: v[0], phi: v[1], theta: v[2] }
    }
}

pub fn pole_guard(p: &ProfileFunction) -> f64 {
    1e-6 * p.ell()
}

pub(crate) fn check_interior(p: &ProfileFunction, t: f64) -> Result<()> {
    let g = pole_guard(p);
    if !(t >= g && t <= p.ell() - g) {
        return Err(Error::PoleProximity { t });
    }
    Ok(())
}

pub(crate) fn field_unchecked(p: &ProfileFunction, m: f64, t: f64, phi: f64) -> [f64; 3] {
    let q = p.at(t);
    let (s, c) = phi.sin_cos();
    [m * c, 1.0 - m * q.dgamma * s / q.gamma, m * s / q.gamma]
}

/// `(dt/ds, dphi/ds, dtheta/ds) = (m cos phi, 1 - m gamma' sin phi / gamma, m sin phi / gamma)`.
pub fn vector_field(p: &ProfileFunction, m: f64, state: PhasePoint) -> Result<[f64; 3]> {
    check_interior(p, state.t)?;
    Ok(field_unchecked(p, m, state.t, state.phi))
}

/// `h = m^2 + 1 - m beta_theta sin(phi) / gamma`, the contact primitive
/// evaluated on `X^m`.
pub(crate) fn h_value_unchecked(p: &ProfileFunction, m: f64, t: f64, phi: f64) -> f64 {
    let q = p.at(t);
    if q.gamma <= 0.0 {
        return m * m + 1.0;
    }
    m * m + 1.0 - m * (q.big_gamma + q.dgamma) * phi.sin() / q.gamma
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Uniform output spacing; `None` records every accepted step.
    pub sample_dt: Option<f64>,
    pub max_steps: u32,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, sample_dt: None, max_steps: 5_000_000 }
    }
}

impl FlowOptions {
    fn ode(&self) -> OdeOptions {
        // phi and theta
        OdeOptions { rtol: self.rtol, atol: self.atol, max_steps: self.max_steps, angle_mask: 0b110 }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Sample {
    pub s: f64,
    pub t: f64,
    pub phi: f64,
    pub theta: f64,
    #[serde(rename = "I_hat")]
    pub i_hat: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub m: f64,
    pub samples: Vec<Sample>,
    pub i_drift: f64,
    pub stats: OdeStats,
}

impl Trajectory {
    pub fn end(&self) -> PhasePoint {
        let s = self.samples.last().unwrap();
        PhasePoint::new(s.t, s.phi, s.theta)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for s in &self.samples {
            wr.serialize(s)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn guarded_t(p: &ProfileFunction, t: f64) -> f64 {
    let g = 0.5 * pole_guard(p);
    t.clamp(g, p.ell() - g)
}

/// Integrates in coordinates where `t` is measured from `ell / 2`, so the
/// relative tolerance treats both poles alike (reflection `t -> ell - t`);
/// states come back in the original coordinates.
fn run<const N: usize>(
    p: &ProfileFunction,
    rhs: &(dyn Fn(f64, &SVector<f64, N>) -> SVector<f64, N> + Sync),
    y0: SVector<f64, N>,
    times: Times<'_>,
    opts: OdeOptions,
) -> Result<ode::OdeRun<N>> {
    let g = pole_guard(p);
    let ell = p.ell();
    let mid = 0.5 * ell;
    let centered = |s: f64, y: &SVector<f64, N>| {
        let mut z = *y;
        z[0] += mid;
        rhs(s, &z)
    };
    let stop = move |y: &SVector<f64, N>| !(y[0] + mid >= g && y[0] + mid <= ell - g);
    let mut z0 = y0;
    z0[0] -= mid;
    let mut out = match times {
        Times::Span(s0, s1) => ode::solve(&centered, &stop, z0, s0, s1, opts)?,
        Times::Grid(grid) => ode::solve_grid(&centered, &stop, z0, grid, opts)?,
    };
    out.states.iter_mut().for_each(|y| y[0] += mid);
    if let Some((_, y)) = out.stopped {
        return Err(Error::PoleProximity { t: y[0] + mid });
    }
    Ok(out)
}

enum Times<'a> {
    Span(f64, f64),
    Grid(&'a [f64]),
}

/// Integral curve of `X^m` on `[0, T]`.
pub fn integrate(p: &ProfileFunction, m: f64, state0: PhasePoint, duration: f64, opts: FlowOptions) -> Result<Trajectory> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidParameter(format!("integration time must be positive, got {duration}")));
    }
    check_interior(p, state0.t)?;
    let rhs = |_s: f64, y: &SVector<f64, 3>| {
        let f = field_unchecked(p, m, guarded_t(p, y[0]), y[1]);
        SVector::<f64, 3>::new(f[0], f[1], f[2])
    };
    let grid;
    let times = match opts.sample_dt {
        Some(dt) if dt > 0.0 => {
            let n = (duration / dt).ceil().max(1.0) as usize;
            grid = linspace(0.0, duration, n);
            Times::Grid(&grid)
        }
        _ => Times::Span(0.0, duration),
    };
    let out = run(p, &rhs, state0.vec(), times, opts.ode())?;
    let i0 = i_hat(p, m, state0.t, state0.phi);
    let samples: Vec<Sample> = out
        .times
        .iter()
        .zip(&out.states)
        .map(|(s, y)| Sample { s: *s, t: y[0], phi: y[1], theta: y[2], i_hat: i_hat(p, m, y[0], y[1]) })
        .collect();
    let i_drift = samples.iter().map(|x| (x.i_hat - i0).abs()).fold(0.0, f64::max);
    Ok(Trajectory { m, samples, i_drift, stats: out.stats })
}

/// Time-`s` flow map (either sign of `s`).
pub fn flow_map(p: &ProfileFunction, m: f64, state0: PhasePoint, s: f64, opts: FlowOptions) -> Result<PhasePoint> {
    check_interior(p, state0.t)?;
    let rhs = |_s: f64, y: &SVector<f64, 3>| {
        let f = field_unchecked(p, m, guarded_t(p, y[0]), y[1]);
        SVector::<f64, 3>::new(f[0], f[1], f[2])
    };
    let out = run(p, &rhs, state0.vec(), Times::Span(0.0, s), opts.ode())?;
    Ok(PhasePoint::from_slice(out.states.last().unwrap().as_slice()))
}

/// Max deviation of the first integral along the samples.
pub fn invariant_drift(p: &ProfileFunction, m: f64, traj: &Trajectory) -> f64 {
    let Some(first) = traj.samples.first() else { return 0.0 };
    let i0 = i_hat(p, m, first.t, first.phi);
    traj.samples.iter().map(|x| (i_hat(p, m, x.t, x.phi) - i0).abs()).fold(0.0, f64::max)
}

/// `sin^8(pi x)`, vanishing to seventh order at both ends of [0, 1]; the
/// weighted average of a quasi-periodic signal then converges like `T^-8`.
fn window(x: f64) -> f64 {
    (PI * x).sin().powi(8)
}

const WINDOW_MASS: f64 = 35.0 / 128.0;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimeAverage {
    /// plain running average over [0, T]
    pub average: f64,
    /// running average over [0, T/2]
    pub half_average: f64,
    /// `2 avg(T) - avg(T/2)`, removing the 1/T tail term
    pub richardson: f64,
    /// `sin^8` window weighted average
    pub weighted: f64,
    /// |avg(T) - avg(T/2)|
    pub tail_estimate: f64,
}

impl TimeAverage {
    pub fn value(&self) -> f64 {
        self.weighted
    }
}

/// Time average of `h` along the orbit of `state0` over `[0, T]`.
pub fn birkhoff_action_ode(p: &ProfileFunction, m: f64, state0: PhasePoint, duration: f64) -> Result<TimeAverage> {
    birkhoff_action_ode_with(p, m, state0, duration, FlowOptions::default())
}

pub fn birkhoff_action_ode_with(
    p: &ProfileFunction,
    m: f64,
    state0: PhasePoint,
    duration: f64,
    opts: FlowOptions,
) -> Result<TimeAverage> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidParameter(format!("averaging time must be positive, got {duration}")));
    }
    check_interior(p, state0.t)?;
    // time rides along as the last component: the integrator mishandles
    // explicit time dependence in its stages
    let rhs = |_s: f64, y: &SVector<f64, 6>| {
        let t = guarded_t(p, y[0]);
        let f = field_unchecked(p, m, t, y[1]);
        let h = h_value_unchecked(p, m, t, y[1]);
        SVector::<f64, 6>::from([f[0], f[1], f[2], h, window(y[5] / duration) * h, 1.0])
    };
    let y0 = SVector::<f64, 6>::from([state0.t, state0.phi, state0.theta, 0.0, 0.0, 0.0]);
    let grid = [0.0, 0.5 * duration, duration];
    let out = run(p, &rhs, y0, Times::Grid(&grid), opts.ode())?;
    let half = out.states[1][3] / (0.5 * duration);
    let full = out.states[2][3] / duration;
    Ok(TimeAverage {
        average: full,
        half_average: half,
        richardson: 2.0 * full - half,
        weighted: out.states[2][4] / (duration * WINDOW_MASS),
        tail_estimate: (full - half).abs(),
    })
}

/// Average of `h` against the Liouville measure `gamma dt dphi dtheta`.
pub fn liouville_action(p: &ProfileFunction, m: f64) -> Result<f64> {
    const NPHI: usize = 64;
    let phis: Vec<f64> = (0..NPHI).map(|k| 2.0 * PI * k as f64 / NPHI as f64).collect();
    let bp = p.breakpoints();
    let mut num = 0.0;
    let mut den = 0.0;
    for w in bp.windows(2) {
        num += numerics::integrate(
            |t| {
                let g = p.at(t).gamma;
                let avg = phis.iter().map(|&phi| h_value_unchecked(p, m, t, phi)).sum::<f64>() / NPHI as f64;
                g * avg
            },
            w[0],
            w[1],
        )?;
        den += numerics::integrate(|t| p.at(t).gamma, w[0], w[1])?;
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{make_ellipsoid, make_sphere};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn field_examples() {
        let p = make_sphere();
        let v = vector_field(&p, 1.0, PhasePoint::new(PI / 4.0, FRAC_PI_2, 0.0)).unwrap();
        assert!(v[0].abs() < 1e-15 && v[1].abs() < 1e-15 && (v[2] - 2f64.sqrt()).abs() < 1e-14);
        let v = vector_field(&p, 0.0, PhasePoint::new(1.0, 0.3, 2.0)).unwrap();
        assert_eq!(v, [0.0, 1.0, 0.0]);
        let v = vector_field(&p, 0.7, PhasePoint::new(1.0, 0.0, 0.0)).unwrap();
        assert!((v[0] - 0.7).abs() < 1e-15 && v[2] == 0.0);
        assert!(matches!(vector_field(&p, 1.0, PhasePoint::new(0.0, 0.0, 0.0)), Err(Error::PoleProximity { .. })));
    }

    #[test]
    fn fiber_rotation_closes() {
        let p = make_sphere();
        let s0 = PhasePoint::new(1.0, 0.2, 0.5);
        let tr = integrate(&p, 0.0, s0, 4.0 * PI, FlowOptions::default()).unwrap();
        let e = tr.end();
        assert!((e.phi - 0.2 - 4.0 * PI).abs() < 1e-9 && (e.t - 1.0).abs() < 1e-15);
        assert_eq!(tr.i_drift, 0.0);
    }

    #[test]
    fn sphere_orbit_stays_between_turning_points() {
        let p = make_sphere();
        let (a, b) = crate::reduced::turning_points(&p, 1.0, 1.2).unwrap();
        let mid = 0.5 * (a + b);
        let q = p.at(mid);
        let phi = ((1.2 + q.big_gamma) / q.gamma).asin();
        let opts = FlowOptions { sample_dt: Some(0.01), ..Default::default() };
        let tr = integrate(&p, 1.0, PhasePoint::new(mid, phi, 0.0), 100.0, opts).unwrap();
        let lo = tr.samples.iter().map(|s| s.t).fold(f64::INFINITY, f64::min);
        let hi = tr.samples.iter().map(|s| s.t).fold(0.0, f64::max);
        assert!(lo >= a - 1e-6 && hi <= b + 1e-6);
        assert!(lo - a < 1e-3 && b - hi < 1e-3);
    }

    #[test]
    fn latitude_is_an_equilibrium() {
        let p = make_sphere();
        let s0 = PhasePoint::new(PI / 4.0, FRAC_PI_2, 0.0);
        let tr = integrate(&p, 1.0, s0, 100.0, FlowOptions::default()).unwrap();
        for s in &tr.samples {
            assert!((s.t - s0.t).abs() < 1e-9 && (s.phi - s0.phi).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_then_backward_returns() {
        let p = make_ellipsoid(2.0).unwrap();
        let s0 = PhasePoint::new(1.0, 0.4, 0.0);
        let e = flow_map(&p, 0.8, s0, 50.0, FlowOptions::default()).unwrap();
        let b = flow_map(&p, 0.8, e, -50.0, FlowOptions::default()).unwrap();
        assert!((b.t - s0.t).abs() < 1e-7 && (b.phi - s0.phi).abs() < 1e-7 && (b.theta - s0.theta).abs() < 1e-7);
    }

    #[test]
    fn looser_tolerance_drifts_more() {
        let p = make_ellipsoid(2.0).unwrap();
        let s0 = PhasePoint::new(1.0, 0.4, 0.0);
        let d = |tol: f64| {
            let o = FlowOptions { rtol: tol, atol: tol * 1e-2, ..Default::default() };
            integrate(&p, 1.0, s0, 300.0, o).unwrap().i_drift
        };
        let (a, b, c) = (d(1e-4), d(1e-7), d(1e-10));
        assert!(a > b && b > c, "{a} {b} {c}");
    }

    #[test]
    fn sphere_time_average_is_constant() {
        let p = make_sphere();
        let avg = birkhoff_action_ode(&p, 0.6, PhasePoint::new(0.9, 0.3, 0.0), 200.0).unwrap();
        assert!((avg.average - 1.36).abs() < 1e-8 && (avg.weighted - 1.36).abs() < 1e-8, "{avg:?}");
    }

    #[test]
    fn liouville_examples() {
        assert!((liouville_action(&make_sphere(), 1.0).unwrap() - 2.0).abs() < 1e-8);
        let e = make_ellipsoid(3.0).unwrap();
        assert!((liouville_action(&e, 0.0).unwrap() - 1.0).abs() < 1e-8);
        assert!((liouville_action(&e, 3.0).unwrap() - 10.0).abs() < 1e-6);
    }

    #[test]
    fn time_average_matches_reduced_action() {
        let p = make_ellipsoid(2.0).unwrap();
        let r = crate::reduced::Reduced::new(&p, 1.0).unwrap();
        for &i in &[-1.2, 0.3, 1.1] {
            let lvl = r.level(i).unwrap();
            let t = 0.5 * (lvl.t_minus + lvl.t_plus);
            let q = p.at(t);
            let phi = ((i + q.big_gamma) / q.gamma).asin();
            let avg = birkhoff_action_ode(&p, 1.0, PhasePoint::new(t, phi, 0.0), 40.0 * lvl.s_half).unwrap();
            assert!((avg.weighted - lvl.action).abs() < 1e-6 * lvl.action, "{i} {avg:?} {}", lvl.action);
        }
    }
}
