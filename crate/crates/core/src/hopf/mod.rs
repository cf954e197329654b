//! The quaternionic double cover `p0: S^3 -> SS^2_0` of the unit tangent
//! bundle of the round sphere, star-shaped embeddings, lifts and linking.

mod knot;
mod quaternion;

pub use knot::{antipodal_link_parity, gauss_linking, gauss_linking_with, AntipodalLink, KnotPolyline, Linking};
pub use quaternion::Quaternion;

use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cz::PeriodicOrbit;
use crate::error::{Error, Result};
use crate::flow::{self, FlowOptions};
use crate::profile::ProfileFunction;

pub const UNIT_TOL: f64 = 1e-10;

/// A point of the unit tangent bundle of the unit sphere in `R^3`: a base
/// point `u1` and a unit tangent vector `u2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FramePoint {
    pub u1: Vector3<f64>,
    pub u2: Vector3<f64>,
}

impl FramePoint {
    pub fn distance(&self, o: &FramePoint) -> f64 {
        ((self.u1 - o.u1).norm_squared() + (self.u2 - o.u2).norm_squared()).sqrt()
    }
}

fn require_unit(u: Quaternion) -> Result<()> {
    if !u.is_unit(UNIT_TOL) {
        return Err(Error::NonUnit { norm: u.norm() });
    }
    Ok(())
}

/// `U^-1 V U`.
pub fn conj_rot(u: Quaternion, v: Quaternion) -> Result<Quaternion> {
    require_unit(u)?;
    Ok(u.conj() * v * u)
}

/// `(U^-1 i U, U^-1 j U)`.
pub fn p0(u: Quaternion) -> Result<FramePoint> {
    require_unit(u)?;
    let c = u.conj();
    Ok(FramePoint { u1: (c * Quaternion::I * u).vector(), u2: (c * Quaternion::J * u).vector() })
}

/// Differential of `p0` at `U` applied to a tangent vector `W`.
pub fn dp0(u: Quaternion, w: Quaternion) -> Result<FramePoint> {
    require_unit(u)?;
    let dot = u.dot(w);
    if dot.abs() > UNIT_TOL * w.norm().max(1.0) {
        return Err(Error::NotTangent { dot });
    }
    let c = u.conj();
    // d(U^-1 V U) = -U^-1 W U^-1 V U + U^-1 V W
    let d = |v: Quaternion| (-(c * w * c * v * u) + c * v * w).vector();
    Ok(FramePoint { u1: d(Quaternion::I), u2: d(Quaternion::J) })
}

/// `psi0_z(Z) = <v2, u1 x u2>`.
pub fn psi0(z: &FramePoint, tangent: &FramePoint) -> f64 {
    tangent.u2.dot(&z.u1.cross(&z.u2))
}

/// `lambda_st(W) = <i U, W>`.
pub fn lambda_st(u: Quaternion, w: Quaternion) -> f64 {
    (Quaternion::I * u).dot(w)
}

/// `|psi0(dp0(W)) + 2 lambda_st(W)|` at one point.
pub fn pullback_defect(u: Quaternion, w: Quaternion) -> Result<f64> {
    let z = p0(u)?;
    Ok((psi0(&z, &dp0(u, w)?) + 2.0 * lambda_st(u, w)).abs())
}

fn random_tangent(rng: &mut ChaCha8Rng, u: Quaternion) -> Quaternion {
    let w = Quaternion::random_unit(rng);
    w - u.scale(u.dot(w))
}

/// Max of the pullback defect over `n` random points and tangent vectors.
pub fn pullback_residual(n: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n.max(1) {
        let u = Quaternion::random_unit(&mut rng);
        let w = random_tangent(&mut rng, u);
        worst = worst.max(pullback_defect(u, w)?);
    }
    Ok(worst)
}

/// `sqrt(rho(z)) z` for `z` on the unit sphere.
pub fn star_embed(rho: &dyn Fn(Quaternion) -> f64, z: Quaternion) -> Result<Quaternion> {
    require_unit(z)?;
    let r = rho(z);
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {r}")));
    }
    Ok(z.scale(r.sqrt()))
}

/// `Q_rho(z) = |z|^2 / rho(z / |z|)`.
pub fn q_rho(rho: &dyn Fn(Quaternion) -> f64, z: Quaternion) -> Result<f64> {
    let n = z.norm();
    if !(n > 0.0) {
        return Err(Error::InvalidParameter("Q_rho is undefined at the origin".into()));
    }
    let r = rho(z.scale(1.0 / n));
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {r}")));
    }
    Ok(n * n / r)
}

/// Finite-difference Hessian of `Q_rho` in `R^4`.
pub fn q_rho_hessian(rho: &dyn Fn(Quaternion) -> f64, z: Quaternion) -> Result<Matrix4<f64>> {
    let e = 1e-4 * z.norm();
    let basis = [Quaternion::ONE, Quaternion::I, Quaternion::J, Quaternion::K];
    let mut h = Matrix4::zeros();
    for i in 0..4 {
        for j in i..4 {
            let (a, b) = (basis[i].scale(e), basis[j].scale(e));
            let v = (q_rho(rho, z + a + b)? - q_rho(rho, z + a - b)? - q_rho(rho, z - a + b)? + q_rho(rho, z - a - b)?)
                / (4.0 * e * e);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HessianReport {
    pub min_eigenvalue: f64,
    pub samples: usize,
    pub convex: bool,
}

/// Smallest Hessian eigenvalue of `Q_rho` over random points of `{Q_rho = 1}`.
pub fn hessian_convexity(rho: &dyn Fn(Quaternion) -> f64, n: usize, seed: u64) -> Result<HessianReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_eig = f64::INFINITY;
    for _ in 0..n.max(1) {
        let u = Quaternion::random_unit(&mut rng);
        let z = star_embed(rho, u)?;
        let h = q_rho_hessian(rho, z)?;
        min_eig = min_eig.min(SymmetricEigen::new(h).eigenvalues.min());
    }
    Ok(HessianReport { min_eigenvalue: min_eig, samples: n.max(1), convex: min_eig > 0.0 })
}

/// One lift of a frame point; the other is its negative.
pub fn lift_point(z: &FramePoint) -> Quaternion {
    let r = Matrix3::from_columns(&[z.u1, z.u2, z.u1.cross(&z.u2)]);
    Quaternion::from_rotation_matrix(&r).conj()
}

#[derive(Debug, Clone, Serialize)]
pub struct Lift {
    pub points: Vec<Quaternion>,
    pub closed_path: bool,
    pub closes_once: bool,
    pub closes_twice: bool,
}

pub const LIFT_MAX_STEP: f64 = 0.1;

/// Continuous lift through `p0` of a sampled path.
pub fn lift_path(path: &[FramePoint]) -> Result<Lift> {
    let Some(first) = path.first() else {
        return Err(Error::InvalidParameter("empty path".into()));
    };
    for w in path.windows(2) {
        let d = w[0].distance(&w[1]);
        if d >= LIFT_MAX_STEP {
            return Err(Error::Resolution(format!("path step {d} is not below {LIFT_MAX_STEP}")));
        }
    }
    let mut points = Vec::with_capacity(path.len());
    let mut prev = lift_point(first);
    points.push(prev);
    for z in &path[1..] {
        let u = lift_point(z);
        // stay on the sheet of the previous sample
        prev = if u.dot(prev) >= 0.0 { u } else { -u };
        points.push(prev);
    }
    let last = path.last().unwrap();
    let closed_path = last.distance(first) < 1e-6;
    let end = *points.last().unwrap();
    let closes_once = closed_path && end.distance(points[0]) < 1e-6;
    let closes_twice = closed_path && (closes_once || end.distance(-points[0]) < 1e-6);
    Ok(Lift { points, closed_path, closes_once, closes_twice })
}

/// The frame of `(t, phi, theta)` after rescaling the profile to the round
/// sphere by colatitude `pi t / ell`.
pub fn round_frame(p: &ProfileFunction, t: f64, phi: f64, theta: f64) -> FramePoint {
    let tau = std::f64::consts::PI * t / p.ell();
    let (st, ct) = tau.sin_cos();
    let (sth, cth) = theta.sin_cos();
    let base = Vector3::new(st * cth, st * sth, ct);
    let e_t = Vector3::new(ct * cth, ct * sth, -st);
    let e_theta = Vector3::new(-sth, cth, 0.0);
    FramePoint { u1: base, u2: e_t * phi.cos() + e_theta * phi.sin() }
}

/// Samples one prime period of a periodic orbit, moved to the round unit
/// tangent bundle, with consecutive points closer than `max_step`.
pub fn orbit_frames(p: &ProfileFunction, m: f64, orbit: &PeriodicOrbit, max_step: f64) -> Result<Vec<FramePoint>> {
    let mut dt = 0.05;
    for _ in 0..8 {
        let opts = FlowOptions { sample_dt: Some(dt), ..Default::default() };
        let tr = flow::integrate(p, m, orbit.start, orbit.flow_period, opts)?;
        let frames: Vec<FramePoint> = tr.samples.iter().map(|s| round_frame(p, s.t, s.phi, s.theta)).collect();
        if frames.windows(2).all(|w| w[0].distance(&w[1]) < max_step) {
            let gap = frames.last().unwrap().distance(&frames[0]);
            if gap > 1e-5 {
                return Err(Error::NonConvergence { what: "orbit closure".into(), residual: gap });
            }
            let mut frames = frames;
            *frames.last_mut().unwrap() = frames[0];
            return Ok(frames);
        }
        dt *= 0.5;
    }
    Err(Error::Resolution("orbit sampling too coarse".into()))
}

/// Lift of a periodic orbit to `S^3`, as a closed knot when the lift closes.
pub fn orbit_lift(p: &ProfileFunction, m: f64, orbit: &PeriodicOrbit) -> Result<(Lift, Option<KnotPolyline>)> {
    let frames = orbit_frames(p, m, orbit, 0.5 * LIFT_MAX_STEP)?;
    let lift = lift_path(&frames)?;
    let knot = if lift.closes_once {
        let mut pts = lift.points.clone();
        pts.pop();
        Some(KnotPolyline::new(pts)?)
    } else {
        None
    };
    Ok((lift, knot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn conjugation_examples() {
        let v = Quaternion::new(0.0, 0.3, -0.2, 0.9);
        assert_eq!(conj_rot(Quaternion::ONE, v).unwrap(), v);
        let u = Quaternion::exp_i(PI / 4.0);
        let r = conj_rot(u, Quaternion::J).unwrap();
        // U^-1 v U rotates by -pi/2 about i
        let m = u.conj().rotation_matrix();
        assert!((r.vector() - m * Vector3::y()).norm() < 1e-15);
        assert!((r - Quaternion::K.scale(-1.0)).norm() < 1e-15);
        assert!(conj_rot(Quaternion::new(2.0, 0.0, 0.0, 0.0), v).is_err());
        let mut g = rng();
        for _ in 0..10_000 {
            let u = Quaternion::random_unit(&mut g);
            let v = Quaternion::random_unit(&mut g).scale(g.gen_range(0.1..3.0));
            let r = conj_rot(u, v).unwrap();
            assert!((r.norm() - v.norm()).abs() < 1e-12);
            if v.w == 0.0 {
                assert!(r.w.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn p0_examples() {
        let z = p0(Quaternion::ONE).unwrap();
        assert_eq!((z.u1, z.u2), (Vector3::x(), Vector3::y()));
        let mut g = rng();
        for _ in 0..1000 {
            let u = Quaternion::random_unit(&mut g);
            let (a, b) = (p0(u).unwrap(), p0(-u).unwrap());
            assert_eq!(a, b);
            assert!((a.u1.norm() - 1.0).abs() < 1e-12 && (a.u2.norm() - 1.0).abs() < 1e-12 && a.u1.dot(&a.u2).abs() < 1e-12);
        }
    }

    #[test]
    fn dp0_is_the_derivative() {
        let mut g = rng();
        for _ in 0..100 {
            let u = Quaternion::random_unit(&mut g);
            let w = random_tangent(&mut g, u);
            let d = dp0(u, w).unwrap();
            let e = 1e-6;
            let a = p0((u + w.scale(e)).normalize()).unwrap();
            let b = p0((u - w.scale(e)).normalize()).unwrap();
            assert!(((a.u1 - b.u1) / (2.0 * e) - d.u1).norm() < 1e-7);
            assert!(((a.u2 - b.u2) / (2.0 * e) - d.u2).norm() < 1e-7);
        }
        assert!(matches!(dp0(Quaternion::ONE, Quaternion::ONE), Err(Error::NotTangent { .. })));
    }

    #[test]
    fn pullback_identity() {
        for (s, w) in [(1.0, 0.0), (0.3, -2.0), (-1.5, 0.7)] {
            let tangent = Quaternion::I.scale(s) + Quaternion::J.scale(w);
            let z = p0(Quaternion::ONE).unwrap();
            assert!((lambda_st(Quaternion::ONE, tangent) - s).abs() < 1e-15);
            assert!((psi0(&z, &dp0(Quaternion::ONE, tangent).unwrap()) + 2.0 * s).abs() < 1e-15);
        }
        assert!(pullback_residual(1000, 7).unwrap() < 1e-10);
        let mut g = rng();
        for _ in 0..100 {
            let (u, u0) = (Quaternion::random_unit(&mut g), Quaternion::random_unit(&mut g));
            let w = random_tangent(&mut g, u);
            let a = psi0(&p0(u).unwrap(), &dp0(u, w).unwrap());
            let b = psi0(&p0(u * u0).unwrap(), &dp0(u * u0, w * u0).unwrap());
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn round_and_perturbed_hessians() {
        let r = hessian_convexity(&|_| 2.0, 50, 1).unwrap();
        assert!((r.min_eigenvalue - 1.0).abs() < 1e-6);
        let small = |z: Quaternion| 2.0 * (0.01 * z.x * z.y).exp();
        assert!(hessian_convexity(&small, 200, 2).unwrap().min_eigenvalue > 0.0);
        let c = Quaternion::new(0.5, 0.5, 0.5, 0.5);
        let steep = move |z: Quaternion| 2.0 * (1.0 + 5.0 * (-(z - c).dot(z - c) / 0.05).exp());
        assert!(hessian_convexity(&steep, 2000, 3).unwrap().min_eigenvalue < 0.0);
        assert!(hessian_convexity(&|_| -1.0, 5, 1).is_err());
    }

    #[test]
    fn fiber_lift_closes_after_two_turns() {
        let p = crate::profile::make_sphere();
        let loop_frames = |turns: f64| -> Vec<FramePoint> {
            (0..=400).map(|k| round_frame(&p, 1.0, turns * 2.0 * PI * k as f64 / 400.0, 0.0)).collect()
        };
        let one = lift_path(&loop_frames(1.0)).unwrap();
        assert!(one.closed_path && !one.closes_once && one.closes_twice);
        let two = lift_path(&loop_frames(2.0)).unwrap();
        assert!(two.closes_once);
        let fixed = vec![round_frame(&p, 1.0, 0.2, 0.3); 5];
        let c = lift_path(&fixed).unwrap();
        assert!(c.points.iter().all(|q| *q == c.points[0]));
    }

    #[test]
    fn lift_projects_back() {
        let mut g = rng();
        for _ in 0..100 {
            let u = Quaternion::random_unit(&mut g);
            let z = p0(u).unwrap();
            let l = lift_point(&z);
            assert!(l.distance(u) < 1e-12 || l.distance(-u) < 1e-12);
        }
    }

    #[test]
    fn latitude_lift_closes_after_two_traversals() {
        let p = crate::profile::make_sphere();
        let lat = crate::reduced::latitudes(&p, 0.2).unwrap()[0];
        let o = PeriodicOrbit::latitude(&p, 0.2, &lat).unwrap();
        let (lift, knot) = orbit_lift(&p, 0.2, &o).unwrap();
        assert!(!lift.closes_once && lift.closes_twice && knot.is_none());
    }
}
