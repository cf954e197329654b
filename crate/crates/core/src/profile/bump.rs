use serde::{Deserialize, Serialize};

/// Odd monotone ramp R on [-1, 1] with R = -1 to the left and R = 1 to the
/// right; R' = (315/128)(1 - x^2)^4, so the stretch map
/// `F(t) = t + C (1 + R((t - center)/half_width))` is the identity before the
/// core and a translation by 2C after it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
}

pub const BUMP_PROFILE: &str = "R'(x) = (315/128)(1-x^2)^4 on [-1,1]";

const NORM: f64 = 315.0 / 128.0;

impl Bump {
    pub fn new(center: f64, half_width: f64) -> Self {
        Self { center, half_width }
    }

    pub fn lo(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn x(&self, t: f64) -> f64 {
        (t - self.center) / self.half_width
    }

    pub fn ramp(x: f64) -> f64 {
        if x <= -1.0 {
            return -1.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let x2 = x * x;
        NORM * x * (1.0 + x2 * (-4.0 / 3.0 + x2 * (6.0 / 5.0 + x2 * (-4.0 / 7.0 + x2 / 9.0))))
    }

    pub fn dramp(x: f64) -> f64 {
        if x.abs() >= 1.0 {
            return 0.0;
        }
        NORM * (1.0 - x * x).powi(4)
    }

    pub fn ddramp(x: f64) -> f64 {
        if x.abs() >= 1.0 {
            return 0.0;
        }
        -8.0 * NORM * x * (1.0 - x * x).powi(3)
    }

    /// (F, F', F'') at t for stretch amount `c`.
    pub fn map(&self, c: f64, t: f64) -> (f64, f64, f64) {
        let x = self.x(t);
        let w = self.half_width;
        (t + c * (1.0 + Self::ramp(x)), 1.0 + c / w * Self::dramp(x), c / (w * w) * Self::ddramp(x))
    }

    /// Inverse of the stretch map.
    pub fn inverse(&self, c: f64, s: f64) -> f64 {
        if s <= self.lo() {
            return s;
        }
        if s >= self.hi() + 2.0 * c {
            return s - 2.0 * c;
        }
        let (mut a, mut b) = (self.lo(), self.hi());
        // F(t) - s is increasing with slope >= 1; start from the linear guess
        let mut t = a + (s - a) / (b + 2.0 * c - a) * (b - a);
        for _ in 0..100 {
            let (f, df, _) = self.map(c, t);
            let r = f - s;
            if r > 0.0 {
                b = t;
            } else {
                a = t;
            }
            let mut next = t - r / df;
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - t).abs() <= 1e-15 * (1.0 + t.abs()) {
                return next;
            }
            t = next;
        }
        t
    }
}
