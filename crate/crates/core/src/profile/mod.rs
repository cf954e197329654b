//! Generating curves of surfaces of revolution.
//!
//! A profile `gamma: [0, ell] -> R` vanishes at the poles, has unit slope
//! there and integrates to 2 when normalized (total area 4pi). `Gamma` is
//! the primitive with `Gamma(0) = -1`.

mod bump;
mod construct;
mod validate;

pub use bump::{Bump, BUMP_PROFILE};
pub use construct::{
    make_ellipsoid, make_negative_action, make_sphere, make_spindle, normalize_stretch, stretch, NegativeAction,
};
pub use validate::{Check, ValidationReport};

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::numerics::{self, CumulativeIntegral, NaturalSpline};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub gamma: f64,
    pub dgamma: f64,
    pub ddgamma: f64,
    #[serde(rename = "Gamma")]
    pub big_gamma: f64,
    #[serde(rename = "K")]
    pub k: f64,
}

#[derive(Debug, Clone)]
pub struct ProfileFunction {
    repr: Arc<Repr>,
    ell: f64,
}

#[derive(Debug)]
enum Repr {
    Sphere { radius: f64 },
    Ellipsoid(Ellipsoid),
    Samples(NaturalSpline),
    Stretched(Stretched),
    Reflected { base: ProfileFunction, big_gamma_end: f64 },
}

#[derive(Debug)]
struct Ellipsoid {
    ratio: f64,
    lambda: f64,
    arc: CumulativeIntegral,
    area: CumulativeIntegral,
}

#[derive(Debug)]
struct Stretched {
    base: ProfileFunction,
    c: f64,
    bump: Bump,
    /// primitive of gamma_base(t) R'((t - center)/w)/w over the core
    extra: CumulativeIntegral,
}

const ELLIPSOID_PANELS: usize = 256;
const CORE_PANELS: usize = 128;

impl Ellipsoid {
    fn speed(c: f64, u: f64) -> f64 {
        (u.cos().powi(2) + c * c * u.sin().powi(2)).sqrt()
    }

    fn new(ratio: f64) -> Self {
        let mut sp = |u: f64| Self::speed(ratio, u);
        let arc = CumulativeIntegral::new(&mut sp, 0.0, PI, ELLIPSOID_PANELS);
        let mut ar = |u: f64| u.sin() * Self::speed(ratio, u);
        let area = CumulativeIntegral::new(&mut ar, 0.0, PI, ELLIPSOID_PANELS);
        let lambda = (2.0 / area.total()).sqrt();
        Self { ratio, lambda, arc, area }
    }

    fn ell(&self) -> f64 {
        self.lambda * self.arc.total()
    }

    /// Meridian parameter u with arc length s0 (unscaled), Newton to 1e-12.
    fn u_of(&self, s0: f64) -> f64 {
        let c = self.ratio;
        let s0 = s0.clamp(0.0, self.arc.total());
        let k = self.arc.locate(s0);
        let (mut a, mut b) = (self.arc.node(k), self.arc.node(k + 1));
        let (sa, sb) = (self.arc.cum_at_node(k), self.arc.cum_at_node(k + 1));
        let mut u = a + (s0 - sa) / (sb - sa) * (b - a);
        let mut sp = |v: f64| Self::speed(c, v);
        for _ in 0..60 {
            let r = sa + numerics::gk15(&mut sp, self.arc.node(k), u).0 - s0;
            if r > 0.0 {
                b = u;
            } else {
                a = u;
            }
            let step = r / Self::speed(c, u);
            let mut next = u - step;
            if !(next >= a && next <= b) {
                next = 0.5 * (a + b);
            }
            if (next - u).abs() < 1e-13 {
                return next;
            }
            u = next;
        }
        u
    }

    fn point(&self, s: f64) -> ProfilePoint {
        let c = self.ratio;
        let l = self.lambda;
        let u = self.u_of(s / l);
        let (su, cu) = u.sin_cos();
        let sp = Self::speed(c, u);
        let sp_u = (c * c - 1.0) * su * cu / sp;
        let g1 = cu / sp;
        let g2 = (-su * sp - cu * sp_u) / sp.powi(3);
        let mut ar = |v: f64| v.sin() * Self::speed(c, v);
        ProfilePoint {
            gamma: l * su,
            dgamma: g1,
            ddgamma: g2 / l,
            big_gamma: -1.0 + l * l * self.area.eval(&mut ar, u),
            k: c * c / sp.powi(4) / (l * l),
        }
    }
}

impl Stretched {
    fn point(&self, s: f64) -> ProfilePoint {
        let t = self.bump.inverse(self.c, s);
        let bp = self.base.at(t);
        let (_, f1, f2) = self.bump.map(self.c, t);
        let g1 = 1.0 / f1;
        let g2 = -f2 / f1.powi(3);
        let extra = if t <= self.bump.lo() {
            0.0
        } else {
            let base = &self.base;
            let bump = self.bump;
            let mut f = |x: f64| base.at(x).gamma * Bump::dramp(bump.x(x)) / bump.half_width;
            self.extra.eval(&mut f, t)
        };
        let k = if g2 == 0.0 { bp.k * g1 * g1 } else { bp.k * g1 * g1 - bp.dgamma * g2 / bp.gamma };
        ProfilePoint {
            gamma: bp.gamma,
            dgamma: bp.dgamma * g1,
            ddgamma: bp.ddgamma * g1 * g1 + bp.dgamma * g2,
            big_gamma: bp.big_gamma + self.c * extra,
            k,
        }
    }
}

impl ProfileFunction {
    fn from_repr(repr: Repr) -> Self {
        let ell = match &repr {
            Repr::Sphere { radius } => PI * radius,
            Repr::Ellipsoid(e) => e.ell(),
            Repr::Samples(s) => s.upper(),
            Repr::Stretched(s) => s.base.ell + 2.0 * s.c,
            Repr::Reflected { base, .. } => base.ell,
        };
        Self { repr: Arc::new(repr), ell }
    }

    /// Round sphere of the given radius (`gamma = a sin(t/a)`); normalized
    /// only for radius 1.
    pub fn round(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
        }
        Ok(Self::from_repr(Repr::Sphere { radius }))
    }

    pub(crate) fn ellipsoid_unchecked(ratio: f64) -> Self {
        Self::from_repr(Repr::Ellipsoid(Ellipsoid::new(ratio)))
    }

    /// Profile interpolating samples `gamma(t_i)` by a cubic spline whose odd
    /// continuation through both poles is C^2, so even derivatives vanish at
    /// the endpoints.
    pub fn from_samples(ell: f64, t: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        if t.len() != gamma.len() || t.len() < 4 {
            return Err(Error::InvalidProfile("need at least 4 samples with matching lengths".into()));
        }
        if t[0].abs() > 1e-14 || (t[t.len() - 1] - ell).abs() > 1e-12 * ell.max(1.0) {
            return Err(Error::InvalidProfile("samples must start at 0 and end at ell".into()));
        }
        let g0 = gamma[0];
        let g1 = gamma[gamma.len() - 1];
        if g0.abs() > 1e-12 || g1.abs() > 1e-12 {
            return Err(Error::InvalidProfile(format!("endpoint values must vanish, got {g0}, {g1}")));
        }
        let mut t = t;
        let mut gamma = gamma;
        let n = t.len();
        t[0] = 0.0;
        t[n - 1] = ell;
        gamma[0] = 0.0;
        gamma[n - 1] = 0.0;
        Ok(Self::from_repr(Repr::Samples(NaturalSpline::new(t, gamma)?)))
    }

    /// Samples `f` at `n + 1` equispaced points of `[0, ell]`.
    pub fn from_fn(ell: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let t = numerics::linspace(0.0, ell, n);
        let mut g: Vec<f64> = t.iter().map(|&x| f(x)).collect();
        g[0] = 0.0;
        g[n] = 0.0;
        Self::from_samples(ell, t, g)
    }

    pub(crate) fn stretched_unchecked(&self, c: f64, bump: Bump) -> Self {
        let base = self.clone();
        let mut f = |x: f64| base.at(x).gamma * Bump::dramp(bump.x(x)) / bump.half_width;
        let extra = CumulativeIntegral::new(&mut f, bump.lo(), bump.hi(), CORE_PANELS);
        Self::from_repr(Repr::Stretched(Stretched { base, c, bump, extra }))
    }

    /// The profile `t -> gamma(ell - t)`.
    pub fn reflect(&self) -> Self {
        let big_gamma_end = self.at(self.ell).big_gamma;
        Self::from_repr(Repr::Reflected { base: self.clone(), big_gamma_end })
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn eval(&self, t: f64) -> Result<ProfilePoint> {
        let slack = 1e-12 * self.ell;
        if !(t >= -slack && t <= self.ell + slack) {
            return Err(Error::Domain { value: t, lo: 0.0, hi: self.ell });
        }
        Ok(self.at(t))
    }

    /// Evaluation with `t` clamped to the domain.
    pub fn at(&self, t: f64) -> ProfilePoint {
        let t = t.clamp(0.0, self.ell);
        match &*self.repr {
            Repr::Sphere { radius: a } => {
                let (s, c) = (t / a).sin_cos();
                ProfilePoint {
                    gamma: a * s,
                    dgamma: c,
                    ddgamma: -s / a,
                    big_gamma: -1.0 + a * a * (1.0 - c),
                    k: 1.0 / (a * a),
                }
            }
            Repr::Ellipsoid(e) => e.point(t),
            Repr::Samples(sp) => {
                let v = sp.eval(t);
                let k = if t == 0.0 || t == self.ell || v.value == 0.0 { -v.d3 / v.d1 } else { -v.d2 / v.value };
                ProfilePoint { gamma: v.value, dgamma: v.d1, ddgamma: v.d2, big_gamma: -1.0 + v.integral, k }
            }
            Repr::Stretched(s) => s.point(t),
            Repr::Reflected { base, big_gamma_end } => {
                let b = base.at(self.ell - t);
                ProfilePoint {
                    gamma: b.gamma,
                    dgamma: -b.dgamma,
                    ddgamma: b.ddgamma,
                    big_gamma: big_gamma_end - b.big_gamma - 1.0,
                    k: b.k,
                }
            }
        }
    }

    /// Points where the representation changes character; quadratures split
    /// here.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &*self.repr {
            Repr::Stretched(s) => {
                let mut v: Vec<f64> = s
                    .base
                    .breakpoints()
                    .into_iter()
                    .chain([s.bump.lo(), s.bump.hi()])
                    .map(|t| s.bump.map(s.c, t).0)
                    .collect();
                sorted_unique(&mut v, self.ell);
                v
            }
            Repr::Reflected { base, .. } => {
                let mut v: Vec<f64> = base.breakpoints().into_iter().map(|t| self.ell - t).collect();
                sorted_unique(&mut v, self.ell);
                v
            }
            _ => vec![0.0, self.ell],
        }
    }

    /// Sorted grid with at least `n + 1` points covering `[0, ell]`; for
    /// stretched profiles it also contains the image of the base grid so
    /// that short features are resolved.
    pub fn scan_grid(&self, n: usize) -> Vec<f64> {
        match &*self.repr {
            Repr::Stretched(s) => {
                let mut v = numerics::linspace(0.0, self.ell, n);
                v.extend(s.base.scan_grid(n).into_iter().map(|t| s.bump.map(s.c, t).0));
                sorted_unique(&mut v, self.ell);
                v
            }
            Repr::Reflected { base, .. } => {
                let mut v: Vec<f64> = base.scan_grid(n).into_iter().map(|t| self.ell - t).collect();
                sorted_unique(&mut v, self.ell);
                v
            }
            _ => numerics::linspace(0.0, self.ell, n),
        }
    }

    /// `Gamma(ell) - Gamma(0)`, i.e. the integral of gamma from the
    /// tabulated primitive.
    pub fn integral(&self) -> f64 {
        self.at(self.ell).big_gamma + 1.0
    }

    /// Total area `2 pi int gamma` by adaptive quadrature.
    pub fn area(&self) -> f64 {
        let bp = self.breakpoints();
        let mut total = 0.0;
        for w in bp.windows(2) {
            total += numerics::integrate(|t| self.at(t).gamma, w[0], w[1]).unwrap_or(f64::NAN);
        }
        2.0 * PI * total
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.integral() - 2.0).abs() <= tol
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        validate::validate(self, tol)
    }

    pub fn is_round(&self) -> bool {
        matches!(&*self.repr, Repr::Sphere { .. })
    }

    /// Machine-readable description, including the bump used by stretches.
    pub fn describe(&self) -> serde_json::Value {
        match &*self.repr {
            Repr::Sphere { radius } => json!({"kind": "sphere", "radius": radius, "ell": self.ell}),
            Repr::Ellipsoid(e) => json!({"kind": "ellipsoid", "ratio": e.ratio, "scale": e.lambda, "ell": self.ell}),
            Repr::Samples(s) => json!({"kind": "samples", "knots": s.knots().len(), "ell": self.ell}),
            Repr::Stretched(s) => json!({
                "kind": "stretched",
                "C": s.c,
                "bump": {"center": s.bump.center, "half_width": s.bump.half_width, "profile": BUMP_PROFILE},
                "base": s.base.describe(),
                "ell": self.ell,
            }),
            Repr::Reflected { base, .. } => json!({"kind": "reflected", "base": base.describe(), "ell": self.ell}),
        }
    }
}

fn sorted_unique(v: &mut Vec<f64>, ell: f64) {
    for x in v.iter_mut() {
        *x = x.clamp(0.0, ell);
    }
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * ell.max(1.0));
}
