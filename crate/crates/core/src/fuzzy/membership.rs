use serde::{Deserialize, Serialize};

use super::FuzzyError;

/// Trapezoidal membership function over `a <= b <= c <= d`.
///
/// Zero outside `[a, d]`, one on `[b, c]`, linear on the flanks. `b == c`
/// gives a triangle; `a == b` or `c == d` gives a shoulder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct MembershipFunction {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl MembershipFunction {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, FuzzyError> {
        if ![a, b, c, d].iter().all(|v| v.is_finite()) || !(a <= b && b <= c && c <= d) {
            return Err(FuzzyError::InvalidMembership { points: [a, b, c, d] });
        }
        Ok(Self { a, b, c, d })
    }

    pub fn triangle(a: f64, peak: f64, c: f64) -> Result<Self, FuzzyError> {
        Self::new(a, peak, peak, c)
    }

    pub fn points(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Support interval `[a, d]`.
    pub fn support(&self) -> (f64, f64) {
        (self.a, self.d)
    }

    pub fn degree(&self, x: f64) -> f64 {
        let Self { a, b, c, d } = *self;
        if x.is_nan() {
            0.0
        } else if b <= x && x <= c {
            1.0
        } else if x <= a || x >= d {
            0.0
        } else if x < b {
            ((x - a) / (b - a)).clamp(0.0, 1.0)
        } else {
            ((d - x) / (d - c)).clamp(0.0, 1.0)
        }
    }
}

impl TryFrom<[f64; 4]> for MembershipFunction {
    type Error = FuzzyError;

    fn try_from(p: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(p[0], p[1], p[2], p[3])
    }
}

impl From<MembershipFunction> for [f64; 4] {
    fn from(mf: MembershipFunction) -> Self {
        mf.points()
    }
}

pub fn membership(mf: &MembershipFunction, x: f64) -> f64 {
    mf.degree(x)
}
