use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Bisection on a bracket with `f(a)` and `f(b)` of opposite sign (or zero).
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> Result<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::NonConvergence { what: "bisection bracket".into(), residual: fa.abs().min(fb.abs()) });
    }
    for _ in 0..max_iter {
        let c = 0.5 * (a + b);
        if (b - a).abs() <= tol || c == a || c == b {
            return Ok(c);
        }
        let fc = f(c);
        if fc == 0.0 {
            return Ok(c);
        }
        if fc.signum() == fa.signum() {
            a = c;
            fa = fc;
        } else {
            b = c;
        }
    }
    Err(Error::NonConvergence { what: "bisection".into(), residual: (b - a).abs() })
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

pub fn golden_min(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_max(|x| -f(x), a, b, tol);
    (x, -v)
}

/// Maximum of `f` given its values on a sorted grid: the `top` largest
/// discrete local maxima are refined by golden section on their neighbouring
/// cells. Ties are broken toward smaller abscissa.
pub fn refine_grid_maxima(
    mut f: impl FnMut(f64) -> f64,
    grid: &[f64],
    values: &[f64],
    top: usize,
    tol: f64,
) -> (f64, f64) {
    let n = grid.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = i == 0 || values[i] >= values[i - 1];
            let right = i + 1 == n || values[i] >= values[i + 1];
            left && right
        })
        .collect();
    peaks.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    peaks.truncate(top.max(1));
    let mut best = (grid[0], values[0]);
    for (i, v) in values.iter().enumerate() {
        if *v > best.1 {
            best = (grid[i], *v);
        }
    }
    for &i in &peaks {
        let a = grid[i.saturating_sub(1)];
        let b = grid[(i + 1).min(n - 1)];
        if b > a {
            let (x, v) = golden_max(&mut f, a, b, tol);
            if v > best.1 || (v == best.1 && x < best.0) {
                best = (x, v);
            }
        }
    }
    best
}
