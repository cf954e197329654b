use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod rule on `[a, b]` with the embedded 7-point Gauss estimate.
/// Returns `(kronrod, |kronrod - gauss|)`.
pub fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = r * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * r, ((k - g) * r).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-13, rel_tol: 1e-12, max_intervals: 2000 }
    }
}

/// Globally adaptive Gauss-Kronrod integration.
pub fn integrate(f: impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    integrate_with(f, a, b, QuadOptions::default())
}

pub fn integrate_with(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, opts: QuadOptions) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    while err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if parts.len() >= opts.max_intervals {
            return Err(Error::NonConvergence { what: "adaptive quadrature".into(), residual: err });
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval can no longer be split in floating point
            break;
        }
        let left = gk15(&mut f, lo, mid);
        let right = gk15(&mut f, mid, hi);
        parts.push((lo, mid, left.0, left.1));
        parts.push((mid, hi, right.0, right.1));
        total = parts.iter().map(|p| p.2).sum();
        err = parts.iter().map(|p| p.3).sum();
    }
    if !total.is_finite() {
        return Err(Error::NonConvergence { what: "adaptive quadrature".into(), residual: f64::NAN });
    }
    Ok(total)
}

/// Primitive of a smooth function tabulated on panels; evaluation is one
/// Kronrod rule on a partial panel.
#[derive(Debug, Clone)]
pub struct CumulativeIntegral {
    nodes: Vec<f64>,
    cum: Vec<f64>,
}

impl CumulativeIntegral {
    pub fn new(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, panels: usize) -> Self {
        let nodes = super::linspace(a, b, panels.max(1));
        let mut cum = Vec::with_capacity(nodes.len());
        cum.push(0.0);
        for w in nodes.windows(2) {
            let last = *cum.last().unwrap();
            cum.push(last + gk15(f, w[0], w[1]).0);
        }
        Self { nodes, cum }
    }

    pub fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn lower(&self) -> f64 {
        self.nodes[0]
    }

    pub fn upper(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Panel index containing `x` (clamped).
    pub fn panel(&self, x: f64) -> usize {
        let n = self.nodes.len() - 1;
        let h = (self.upper() - self.lower()) / n as f64;
        (((x - self.lower()) / h).floor().max(0.0) as usize).min(n - 1)
    }

    /// Largest panel index whose left cumulative value is <= `v`, assuming
    /// a nonnegative integrand.
    pub fn locate(&self, v: f64) -> usize {
        let n = self.nodes.len() - 1;
        self.cum.partition_point(|&c| c <= v).saturating_sub(1).min(n - 1)
    }

    pub fn node(&self, k: usize) -> f64 {
        self.nodes[k]
    }

    pub fn cum_at_node(&self, k: usize) -> f64 {
        self.cum[k]
    }

    /// Integral from the lower limit to `x`, clamped to the table range.
    pub fn eval(&self, f: &mut impl FnMut(f64) -> f64, x: f64) -> f64 {
        let x = x.clamp(self.lower(), self.upper());
        let k = self.panel(x);
        let x0 = self.nodes[k];
        if x == x0 {
            return self.cum[k];
        }
        self.cum[k] + gk15(f, x0, x).0
    }
}
