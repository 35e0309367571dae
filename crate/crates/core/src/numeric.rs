//! Small numerical building blocks: compensated summation, double-double
//! arithmetic, series acceleration and overflow-safe hyperbolic ratios.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Neumaier-compensated running sum.
///
/// Summation order is whatever order values are pushed in, so callers that
/// need reproducible results must feed a fixed traversal.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator in iteration order.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<KahanSum>().value()
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Unevaluated sum `hi + lo` carrying roughly 106 bits of mantissa.
///
/// Matsubara series whose sum is exponentially smaller than their leading
/// terms lose every significant digit in plain `f64`; evaluating the terms
/// and partial sums in this type keeps ~30 digits.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const PI: Dd = Dd {
        hi: std::f64::consts::PI,
        lo: 1.224_646_799_147_353_2e-16,
    };

    pub const fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// Exact product of two doubles.
    pub fn prod(a: f64, b: f64) -> Dd {
        let (hi, lo) = two_prod(a, b);
        Dd { hi, lo }
    }

    pub fn scale(self, k: f64) -> Dd {
        let (p, e) = two_prod(self.hi, k);
        let e = e + self.lo * k;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::from_f64(x)
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, rhs: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl AddAssign for Dd {
    fn add_assign(&mut self, rhs: Dd) {
        *self = *self + rhs;
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, rhs: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, rhs: Dd) -> Dd {
        // Two rounds of long division.
        let q1 = self.hi / rhs.hi;
        let r = self - rhs.scale(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs.scale(q2);
        let q3 = r.hi / rhs.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }
}

/// Repeated pairwise averaging of a window of partial sums (Euler's
/// transformation in its van Wijngaarden form).
///
/// Returns the final fully averaged value and the value one level earlier
/// (the mean of the two second-to-last estimates), which serves as an
/// error estimate.
pub fn euler_average(partials: &[Dd]) -> (Dd, Dd) {
    assert!(partials.len() >= 2, "need at least two partial sums");
    let mut row = partials.to_vec();
    while row.len() > 2 {
        row = row
            .windows(2)
            .map(|w| (w[0] + w[1]).scale(0.5))
            .collect();
    }
    let last = (row[0] + row[1]).scale(0.5);
    let previous = row[1];
    (last, previous)
}

/// Richardson extrapolation of `s(M) = s∞ + c₁/M + c₂/M² + …` from values
/// at geometrically doubling `M` (coarsest first).
pub fn richardson_doubling(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut table = values.to_vec();
    let mut factor = 2.0;
    while table.len() > 1 {
        table = table
            .windows(2)
            .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
            .collect();
        factor *= 2.0;
    }
    table[0]
}

/// `1/sinh(x)` for `x > 0` without overflow.
pub fn csch(x: f64) -> f64 {
    let e = (-x).exp();
    2.0 * e / (1.0 - e * e)
}

/// `cosh(a)/sinh(b)` for `b > 0` and `|a| ≤ b`, stable for large arguments.
pub fn cosh_over_sinh(a: f64, b: f64) -> f64 {
    let num = (a.abs() - b).exp() + (-a.abs() - b).exp();
    num / (-(-2.0 * b).exp_m1())
}

/// `1/tanh(x)` for `x > 0`.
pub fn coth(x: f64) -> f64 {
    let e = (-2.0 * x).exp();
    (1.0 + e) / (1.0 - e)
}

/// Bisection for an increasing function with a sign change on `[lo, hi]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    debug_assert!(f(lo) <= 0.0 && f(hi) >= 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < tol {
            break;
        }
    }
    0.5 * (lo + hi)
}
