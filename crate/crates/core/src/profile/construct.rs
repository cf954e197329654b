use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use super::{Bump, ProfileFunction};
use crate::error::{Error, Result};

pub fn make_sphere() -> ProfileFunction {
    ProfileFunction::round(1.0).expect("unit radius")
}

/// Ellipsoid of revolution with polar/equatorial axis ratio `ratio`,
/// parametrized by arc length and rescaled to area 4pi.
pub fn make_ellipsoid(ratio: f64) -> Result<ProfileFunction> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidParameter(format!("axis ratio must be positive, got {ratio}")));
    }
    if ratio == 1.0 {
        return Ok(make_sphere());
    }
    Ok(ProfileFunction::ellipsoid_unchecked(ratio))
}

fn check_bump(p: &ProfileFunction, bump: &Bump) -> Result<()> {
    let ok = bump.half_width > 0.0 && bump.lo() > 0.0 && bump.hi() < p.ell() && bump.center.is_finite();
    if !ok {
        return Err(Error::InvalidParameter(format!(
            "bump core [{}, {}] must lie inside (0, {})",
            bump.lo(),
            bump.hi(),
            p.ell()
        )));
    }
    Ok(())
}

/// `s -> gamma(F_C^{-1}(s))` where `F_C` adds `2C` of length across the
/// bump core.
pub fn stretch(p: &ProfileFunction, c: f64, bump: Bump) -> Result<ProfileFunction> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("stretch amount must be >= 0, got {c}")));
    }
    check_bump(p, &bump)?;
    if c == 0.0 {
        return Ok(p.clone());
    }
    Ok(p.stretched_unchecked(c, bump))
}

/// Stretch amount `C` solving `int gamma = 2`, by bracketing and bisection.
pub fn normalize_stretch(p: &ProfileFunction, bump: Bump) -> Result<ProfileFunction> {
    check_bump(p, &bump)?;
    let base = p.integral();
    if base >= 2.0 - 1e-10 {
        return Err(Error::AlreadyNormalized { integral: base });
    }
    let deficit = |c: f64| p.stretched_unchecked(c, bump).integral() - 2.0;
    let mut hi = 1.0;
    let mut iters = 0;
    while deficit(hi) < 0.0 {
        hi *= 2.0;
        iters += 1;
        if iters > 200 || !hi.is_finite() {
            return Err(Error::NonConvergence { what: "normalization bracket".into(), residual: deficit(hi) });
        }
    }
    let mut lo = 0.0;
    let mut best = hi;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = deficit(mid);
        best = mid;
        if r.abs() < 1e-13 || hi - lo < 1e-15 * hi {
            break;
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let out = p.stretched_unchecked(best, bump);
    let residual = (out.integral() - 2.0).abs();
    if residual > 1e-10 {
        return Err(Error::NonConvergence { what: "normalization".into(), residual });
    }
    Ok(out)
}

/// Convex normalized profile whose slope at `t = delta` is below `eps`:
/// a small round cap whose latitude `delta` sits close to its equator,
/// with length inserted past the cap.
pub fn make_spindle(delta: f64, eps: f64) -> Result<ProfileFunction> {
    if !(delta > 0.0 && delta < FRAC_PI_2) || !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Infeasible(format!("need delta in (0, pi/2) and eps > 0, got ({delta}, {eps})")));
    }
    let lo = delta.max(eps.min(1.0).acos());
    let angle = lo + 0.5 * (FRAC_PI_2 - lo);
    let a = delta / angle;
    if !(a > 2.0 * delta / PI && a < 1.0) {
        return Err(Error::Infeasible(format!("no cap radius for ({delta}, {eps})")));
    }
    let base = ProfileFunction::round(a)?;
    let bump = Bump::new(PI * a / 2.0, PI * a / 2.0 - delta);
    let p = normalize_stretch(&base, bump)?;
    let slope = p.at(delta).dgamma;
    if !(slope < eps) {
        return Err(Error::Infeasible(format!("slope at delta is {slope}, not below {eps}")));
    }
    Ok(p)
}

#[derive(Debug, Clone, Serialize)]
pub struct NegativeAction {
    #[serde(skip)]
    pub profile: ProfileFunction,
    pub latitude: f64,
    pub cap_radius: f64,
}

/// Normalized profile with `gamma'(delta) < -eps`: a cap of radius
/// `a in (delta/pi, 2 delta/pi)`, so `delta` lies past the cap's equator,
/// stretched on the far side of `delta`.
pub fn make_negative_action(delta: f64, eps: f64) -> Result<NegativeAction> {
    if !(delta > 0.0 && delta < 1.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Infeasible(format!("need delta in (0, 1) and eps in (0, 1), got ({delta}, {eps})")));
    }
    let angle = (-(eps + 0.1 * (1.0 - eps))).acos();
    let a = delta / angle;
    if !(a > delta / PI && a < 2.0 * delta / PI) {
        return Err(Error::Infeasible(format!("no cap radius for ({delta}, {eps})")));
    }
    let base = ProfileFunction::round(a)?;
    let span = PI * a - delta;
    let bump = Bump::new(delta + 0.35 * span, 0.25 * span);
    let profile = normalize_stretch(&base, bump)?;
    let slope = profile.at(delta).dgamma;
    if !(slope < -eps) {
        return Err(Error::Infeasible(format!("slope at delta is {slope}, not below {}", -eps)));
    }
    Ok(NegativeAction { profile, latitude: delta, cap_radius: a })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_stretch_is_identity() {
        let p = ProfileFunction::round(0.8).unwrap();
        let q = stretch(&p, 0.0, Bump::new(1.2, 0.5)).unwrap();
        for k in 0..=10 {
            let t = p.ell() * k as f64 / 10.0;
            assert_eq!(p.at(t), q.at(t));
        }
    }

    #[test]
    fn stretch_rejects_bad_input() {
        let p = ProfileFunction::round(0.8).unwrap();
        assert!(stretch(&p, -1.0, Bump::new(1.2, 0.5)).is_err());
        assert!(stretch(&p, 1.0, Bump::new(0.2, 0.5)).is_err());
    }

    #[test]
    fn stretch_area_increases_in_c() {
        let a = 0.8;
        let p = ProfileFunction::round(a).unwrap();
        let delta = 0.3;
        let bump = Bump::new(PI * a / 2.0, PI * a / 2.0 - delta);
        let mut prev = p.area();
        for &c in &[0.1, 0.5, 1.0, 3.0] {
            let q = stretch(&p, c, bump).unwrap();
            let area = q.area();
            assert!(area > prev);
            // inserted length 2C at height at least gamma(delta)
            let b = a * (delta / a).sin();
            assert!(area - p.area() >= 2.0 * PI * 2.0 * c * b * 0.999);
            prev = area;
        }
    }

    #[test]
    fn normalize_stretch_agrees_with_linear_solution() {
        // the stretched integral is linear in C: base + C * J
        let p = ProfileFunction::round(0.8).unwrap();
        let bump = Bump::new(PI * 0.4, PI * 0.4 - 0.2);
        let j = crate::numerics::integrate(
            |t| p.at(t).gamma * Bump::dramp(bump.x(t)) / bump.half_width,
            bump.lo(),
            bump.hi(),
        )
        .unwrap();
        let c_exact = (2.0 - p.integral()) / j;
        let q = normalize_stretch(&p, bump).unwrap();
        assert!((q.ell() - p.ell() - 2.0 * c_exact).abs() < 1e-8);
        assert!((q.area() - 4.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn unit_sphere_is_already_normalized() {
        let p = make_sphere();
        assert!(matches!(normalize_stretch(&p, Bump::new(1.5, 1.0)), Err(Error::AlreadyNormalized { .. })));
    }

    #[test]
    fn smaller_radius_needs_more_stretch() {
        let c = |a: f64| {
            let p = ProfileFunction::round(a).unwrap();
            normalize_stretch(&p, Bump::new(PI * a / 2.0, PI * a / 2.0 - 0.1)).unwrap().ell() - PI * a
        };
        assert!(c(0.6) > c(0.9));
    }

    #[test]
    fn spindle_has_small_slope_and_is_convex() {
        let p = make_spindle(0.1, 0.05).unwrap();
        assert!(p.at(0.1).dgamma < 0.05);
        let kmin = p.scan_grid(4096).iter().map(|&t| p.at(t).k).fold(f64::INFINITY, f64::min);
        assert!(kmin >= -1e-10, "{kmin}");
        assert!((p.area() - 4.0 * PI).abs() < 1e-8);
        assert!(p.validate(1e-8).all_passed());
    }

    #[test]
    fn negative_action_profile_slope() {
        let n = make_negative_action(0.1, 0.9).unwrap();
        assert!(n.profile.at(0.1).dgamma < -0.9);
        assert!(n.profile.validate(1e-8).all_passed());
    }
}
