//! Scalar numerics shared by the analysis modules.

pub mod ode;
mod quad;
mod roots;
mod spline;

pub use quad::{gk15, integrate, integrate_with, CumulativeIntegral, QuadOptions};
pub use roots::{bisect, golden_max, golden_min, refine_grid_maxima};
pub use spline::NaturalSpline;

/// `n + 1` equispaced points on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![a];
    }
    let h = (b - a) / n as f64;
    let mut v: Vec<f64> = (0..=n).map(|k| a + h * k as f64).collect();
    v[n] = b;
    v
}
