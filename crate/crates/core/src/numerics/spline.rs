use crate::error::{Error, Result};

/// Natural cubic spline (zero second derivative at both ends) with exact
/// piecewise primitive.
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    cum: Vec<f64>,
}

pub struct SplineValue {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub integral: f64,
}

impl NaturalSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(Error::InvalidProfile("spline needs at least 3 matching samples".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("spline abscissae must be finite and strictly increasing".into()));
        }
        let mut m = vec![0.0; n];
        // Thomas algorithm for interior second derivatives
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        let mut sup = vec![0.0; k];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            diag[i - 1] = 2.0 * (h0 + h1);
            sup[i - 1] = h1;
            rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        }
        for i in 1..k {
            let sub = x[i + 1] - x[i];
            let w = sub / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for i in (0..k).rev() {
            let next = if i + 1 < k { m[i + 2] } else { 0.0 };
            m[i + 1] = (rhs[i] - sup[i] * next) / diag[i];
        }
        let mut s = Self { x, y, m, cum: vec![0.0; n] };
        for i in 0..n - 1 {
            s.cum[i + 1] = s.cum[i] + s.piece_integral(i, s.x[i + 1]);
        }
        Ok(s)
    }

    pub fn lower(&self) -> f64 {
        self.x[0]
    }

    pub fn upper(&self) -> f64 {
        *self.x.last().unwrap()
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    fn piece_integral(&self, i: usize, t: f64) -> f64 {
        let h = self.x[i + 1] - self.x[i];
        let a = self.x[i + 1] - t;
        let b = t - self.x[i];
        let c1 = self.y[i] / h - self.m[i] * h / 6.0;
        let c2 = self.y[i + 1] / h - self.m[i + 1] * h / 6.0;
        self.m[i] * (h.powi(4) - a.powi(4)) / (24.0 * h)
            + self.m[i + 1] * b.powi(4) / (24.0 * h)
            + c1 * (h * h - a * a) / 2.0
            + c2 * b * b / 2.0
    }

    pub fn eval(&self, t: f64) -> SplineValue {
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let a = self.x[i + 1] - t;
        let b = t - self.x[i];
        let (mi, mj) = (self.m[i], self.m[i + 1]);
        let c1 = self.y[i] / h - mi * h / 6.0;
        let c2 = self.y[i + 1] / h - mj * h / 6.0;
        SplineValue {
            value: mi * a.powi(3) / (6.0 * h) + mj * b.powi(3) / (6.0 * h) + c1 * a + c2 * b,
            d1: -mi * a * a / (2.0 * h) + mj * b * b / (2.0 * h) - c1 + c2,
            d2: mi * a / h + mj * b / h,
            d3: (mj - mi) / h,
            integral: self.cum[i] + self.piece_integral(i, t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_sine_and_its_primitive() {
        let x = crate::numerics::linspace(0.0, std::f64::consts::PI, 400);
        let y = x.iter().map(|v| v.sin()).collect();
        let s = NaturalSpline::new(x, y).unwrap();
        for &t in &[0.0, 0.1, 1.0, 2.5, std::f64::consts::PI] {
            let v = s.eval(t);
            assert!((v.value - t.sin()).abs() < 1e-9);
            assert!((v.d1 - t.cos()).abs() < 1e-6);
            assert!((v.integral - (1.0 - t.cos())).abs() < 1e-9);
        }
        assert_eq!(s.eval(0.0).d2, 0.0);
    }
}
