use nalgebra::{Matrix4, Vector3, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::Quaternion;
use crate::error::{Error, Result};

pub const MAX_CHORD: f64 = 0.1;
pub const MIN_SEPARATION: f64 = 1e-3;
pub const ROUNDING_RESIDUAL: f64 = 0.05;
const POLE_CANDIDATES: usize = 4000;
const MAX_DOUBLINGS: usize = 6;

/// Closed polygon on the unit sphere of `R^4`; the last point repeats the first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnotPolyline {
    points: Vec<Quaternion>,
}

impl KnotPolyline {
    /// Closes the sequence if needed and resamples to chords below `MAX_CHORD`.
    pub fn new(mut points: Vec<Quaternion>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidParameter("a knot needs at least three points".into()));
        }
        for q in &points {
            if !q.is_unit(1e-9) {
                return Err(Error::NonUnit { norm: q.norm() });
            }
        }
        if points.first() != points.last() {
            points.push(points[0]);
        }
        let k = Self { points };
        if k.max_chord() < MAX_CHORD {
            Ok(k)
        } else {
            Ok(k.resample(MAX_CHORD))
        }
    }

    /// `n` samples of a closed curve `f` on `[0, 2 pi)`.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> Quaternion) -> Result<Self> {
        let pts = (0..n).map(|k| f(2.0 * std::f64::consts::PI * k as f64 / n as f64).normalize()).collect();
        Self::new(pts)
    }

    pub fn points(&self) -> &[Quaternion] {
        &self.points
    }

    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn max_chord(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].distance(w[1])).fold(0.0, f64::max)
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    /// Uniform resampling in arc length with chords at most `max_chord`.
    pub fn resample(&self, max_chord: f64) -> Self {
        let total = self.length();
        let n = ((total / (0.9 * max_chord)).ceil() as usize).max(8);
        let mut cum = vec![0.0];
        for w in self.points.windows(2) {
            cum.push(cum.last().unwrap() + w[0].distance(w[1]));
        }
        let mut pts = Vec::with_capacity(n + 1);
        let mut seg = 0;
        for k in 0..n {
            let s = total * k as f64 / n as f64;
            while seg + 1 < cum.len() - 1 && cum[seg + 1] <= s {
                seg += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let a = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
            let q = self.points[seg].scale(1.0 - a) + self.points[seg + 1].scale(a);
            pts.push(q.normalize());
        }
        pts.push(pts[0]);
        Self { points: pts }
    }

    pub fn antipode(&self) -> Self {
        Self { points: self.points.iter().map(|q| -*q).collect() }
    }

    /// Minimal distance in `R^4` between the two polygons.
    pub fn min_distance(&self, other: &Self) -> f64 {
        self.points
            .par_windows(2)
            .map(|a| {
                other
                    .points
                    .windows(2)
                    .map(|b| segment_distance(a[0].as_vector4(), a[1].as_vector4(), b[0].as_vector4(), b[1].as_vector4()))
                    .fold(f64::INFINITY, f64::min)
            })
            .reduce(|| f64::INFINITY, f64::min)
    }
}

/// Distance between segments `[p0, p1]` and `[q0, q1]`.
fn segment_distance(p0: Vector4<f64>, p1: Vector4<f64>, q0: Vector4<f64>, q1: Vector4<f64>) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let (a, e, f) = (d1.dot(&d1), d2.dot(&d2), d2.dot(&r));
    let (s, t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return r.norm();
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    (p0 + d1 * s - q0 - d2 * t).norm()
}

/// Oriented orthonormal basis of the complement of `pole`: `(-pole, e1,
/// e2, e3)` is positive, so stereographic projection from `pole`
/// preserves orientation.
fn complement_basis(pole: Vector4<f64>) -> [Vector4<f64>; 3] {
    let mut basis: Vec<Vector4<f64>> = vec![];
    let mut axes: Vec<usize> = (0..4).collect();
    axes.sort_by(|&i, &j| pole[i].abs().total_cmp(&pole[j].abs()));
    for &ax in &axes {
        let mut v = Vector4::zeros();
        v[ax] = 1.0;
        v -= pole * pole.dot(&v);
        for b in &basis {
            v -= *b * b.dot(&v);
        }
        if v.norm() > 1e-8 {
            basis.push(v.normalize());
        }
        if basis.len() == 3 {
            break;
        }
    }
    let det = Matrix4::from_columns(&[-pole, basis[0], basis[1], basis[2]]).determinant();
    if det < 0.0 {
        basis[2] = -basis[2];
    }
    [basis[0], basis[1], basis[2]]
}

fn project(pole: Vector4<f64>, basis: &[Vector4<f64>; 3], q: Quaternion) -> Vector3<f64> {
    let x = q.as_vector4();
    let d = 1.0 - x.dot(&pole);
    Vector3::new(basis[0].dot(&x) / d, basis[1].dot(&x) / d, basis[2].dot(&x) / d)
}

/// A point of the sphere far from both polygons.
fn choose_pole(k1: &KnotPolyline, k2: &KnotPolyline) -> Vector4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut cands: Vec<Quaternion> = (0..POLE_CANDIDATES).map(|_| Quaternion::random_unit(&mut rng)).collect();
    for a in [Quaternion::ONE, Quaternion::I, Quaternion::J, Quaternion::K] {
        cands.push(a);
        cands.push(-a);
    }
    let pts: Vec<Quaternion> = k1.points.iter().chain(k2.points.iter()).copied().collect();
    let score = |c: &Quaternion| pts.iter().map(|p| p.distance(*c)).fold(f64::INFINITY, f64::min);
    let scores: Vec<f64> = cands.par_iter().map(score).collect();
    let best = (0..cands.len()).max_by(|&i, &j| scores[i].total_cmp(&scores[j]).then(j.cmp(&i))).unwrap();
    cands[best].as_vector4()
}

/// Midpoint rule for the Gauss double integral of two closed space polygons.
fn gauss_integral(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    let segs = |c: &[Vector3<f64>]| -> Vec<(Vector3<f64>, Vector3<f64>)> {
        c.windows(2).map(|w| (0.5 * (w[0] + w[1]), w[1] - w[0])).collect()
    };
    let (sa, sb) = (segs(a), segs(b));
    let rows: Vec<f64> = sa
        .par_iter()
        .map(|(m1, d1)| {
            sb.iter()
                .map(|(m2, d2)| {
                    let r = m1 - m2;
                    r.dot(&d1.cross(d2)) / r.norm().powi(3)
                })
                .sum()
        })
        .collect();
    rows.iter().sum::<f64>() / (4.0 * std::f64::consts::PI)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Linking {
    pub lk: i64,
    pub raw: f64,
    pub residual: f64,
    pub segments: usize,
    pub min_distance: f64,
}

pub fn gauss_linking(k1: &KnotPolyline, k2: &KnotPolyline) -> Result<i64> {
    Ok(gauss_linking_with(k1, k2)?.lk)
}

/// Linking number by the Gauss integral after stereographic projection,
/// halving the chord length until the value is within `ROUNDING_RESIDUAL`
/// of an integer.
pub fn gauss_linking_with(k1: &KnotPolyline, k2: &KnotPolyline) -> Result<Linking> {
    let dist = k1.min_distance(k2);
    if !(dist > MIN_SEPARATION) {
        return Err(Error::KnotsTooClose { distance: dist });
    }
    let pole = choose_pole(k1, k2);
    let basis = complement_basis(pole);
    // chords well below the separation keep the midpoint rule accurate
    let mut chord = MAX_CHORD.min(0.5 * dist);
    let mut last = None;
    for _ in 0..=MAX_DOUBLINGS {
        let (a, b) = (k1.resample(chord), k2.resample(chord));
        let pa: Vec<Vector3<f64>> = a.points.iter().map(|q| project(pole, &basis, *q)).collect();
        let pb: Vec<Vector3<f64>> = b.points.iter().map(|q| project(pole, &basis, *q)).collect();
        let raw = gauss_integral(&pa, &pb);
        let residual = (raw - raw.round()).abs();
        let out = Linking { lk: raw.round() as i64, raw, residual, segments: a.segments() + b.segments(), min_distance: dist };
        if residual < ROUNDING_RESIDUAL {
            return Ok(out);
        }
        last = Some(out);
        chord *= 0.5;
    }
    Err(Error::Resolution(format!("Gauss integral residual {} after refinement", last.map_or(f64::NAN, |l| l.residual))))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AntipodalLink {
    pub lk: Option<i64>,
    pub even: Option<bool>,
    pub disjoint: bool,
    pub min_distance: f64,
}

/// `lk(K, -K)`, which is even for every knot disjoint from its antipode.
pub fn antipodal_link_parity(k: &KnotPolyline) -> Result<AntipodalLink> {
    let a = k.antipode();
    let dist = k.min_distance(&a);
    if !(dist > MIN_SEPARATION) {
        return Ok(AntipodalLink { lk: None, even: None, disjoint: false, min_distance: dist });
    }
    let lk = gauss_linking(k, &a)?;
    Ok(AntipodalLink { lk: Some(lk), even: Some(lk % 2 == 0), disjoint: true, min_distance: dist })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn twist(a: f64, k: f64) -> KnotPolyline {
        KnotPolyline::from_fn(400, |t| Quaternion::from_c2((a.cos() * t.cos(), a.cos() * t.sin()), (a.sin() * (k * t).cos(), a.sin() * (k * t).sin())))
            .unwrap()
    }

    fn fiber(u: Quaternion) -> KnotPolyline {
        KnotPolyline::from_fn(300, |t| Quaternion::exp_i(t) * u).unwrap()
    }

    /// Signed crossings of the projections to the `xy`-plane, halved.
    fn crossing_count(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
        let mut total = 0.0;
        for s in a.windows(2) {
            for t in b.windows(2) {
                let (p, r) = (s[0], s[1] - s[0]);
                let (q, u) = (t[0], t[1] - t[0]);
                let den = r.x * u.y - r.y * u.x;
                if den.abs() < 1e-14 {
                    continue;
                }
                let w = q - p;
                let sa = (w.x * u.y - w.y * u.x) / den;
                let sb = (w.x * r.y - w.y * r.x) / den;
                if (0.0..1.0).contains(&sa) && (0.0..1.0).contains(&sb) {
                    let dz = (p.z + sa * r.z) - (q.z + sb * u.z);
                    total += (den * dz).signum();
                }
            }
        }
        0.5 * total
    }

    fn projected(k: &KnotPolyline, pole: Vector4<f64>) -> Vec<Vector3<f64>> {
        let basis = complement_basis(pole);
        k.points.iter().map(|q| project(pole, &basis, *q)).collect()
    }

    #[test]
    fn hopf_fibers_link_once() {
        let u0 = Quaternion::new(0.9, 0.1, 0.3, -0.2).normalize();
        let u1 = Quaternion::new(-0.1, 0.4, 0.8, 0.5).normalize();
        let (a, b) = (fiber(u0), fiber(u1));
        let lk = gauss_linking(&a, &b).unwrap();
        assert_eq!(lk.abs(), 1);
        assert_eq!(gauss_linking(&b, &a).unwrap(), lk);
        let pole = choose_pole(&a, &b);
        assert_eq!(crossing_count(&projected(&a, pole), &projected(&b, pole)), lk as f64);
    }

    #[test]
    fn separated_circles_do_not_link() {
        let circle = |c: f64| {
            KnotPolyline::from_fn(200, move |t| Quaternion::new(c, 0.3 * t.cos(), 0.3 * t.sin(), 0.0).normalize()).unwrap()
        };
        assert_eq!(gauss_linking(&circle(1.0), &circle(-1.0)).unwrap(), 0);
    }

    #[test]
    fn two_twist_antipodal_pair() {
        let k = twist(PI / 4.0, 2.0);
        let r = antipodal_link_parity(&k).unwrap();
        assert_eq!((r.lk, r.even, r.disjoint), (Some(2), Some(true), true));
        let a = k.antipode();
        let pole = choose_pole(&k, &a);
        assert_eq!(crossing_count(&projected(&k, pole), &projected(&a, pole)), 2.0);
    }

    #[test]
    fn fiber_meets_its_antipode() {
        let r = antipodal_link_parity(&fiber(Quaternion::ONE)).unwrap();
        assert!(!r.disjoint && r.lk.is_none());
    }

    #[test]
    fn resampling_keeps_the_linking_number() {
        let k = twist(0.6, 2.0);
        let a = k.antipode();
        let coarse = gauss_linking(&k, &a).unwrap();
        let fine = gauss_linking(&k.resample(0.03), &a.resample(0.03)).unwrap();
        assert_eq!(coarse, fine);
    }

    #[test]
    fn too_close_is_an_error() {
        let k = twist(0.6, 2.0);
        assert!(matches!(gauss_linking(&k, &k), Err(Error::KnotsTooClose { .. })));
    }

    #[test]
    fn basis_orientation() {
        for pole in [Vector4::new(1.0, 0.0, 0.0, 0.0), Vector4::new(0.5, -0.5, 0.5, 0.5)] {
            let b = complement_basis(pole);
            assert!(Matrix4::from_columns(&[-pole, b[0], b[1], b[2]]).determinant() > 0.0);
        }
    }
}
