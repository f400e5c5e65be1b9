//! Double-double real and complex arithmetic, plus a small scalar trait so
//! numerical kernels can run in either precision.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
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

/// Unevaluated sum hi + lo with |lo| ≤ ulp(hi)/2.
#[derive(Clone, Copy, Default, PartialEq, PartialOrd)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl fmt::Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dd({:e} + {:e})", self.hi, self.lo)
    }
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let x = self.hi.sqrt();
        // one Newton step in double-double
        let xx = Dd::new(x) * Dd::new(x);
        let corr = (self - xx).hi / (2.0 * x);
        let (h, l) = quick_two_sum(x, corr);
        Dd { hi: h, lo: l }
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::new(x)
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::new(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

/// Complex number with double-double parts.
#[derive(Clone, Copy, Default, PartialEq, Debug)]
pub struct CDd {
    pub re: Dd,
    pub im: Dd,
}

impl CDd {
    pub fn new(re: Dd, im: Dd) -> Self {
        CDd { re, im }
    }

    pub fn norm_sqr(self) -> Dd {
        self.re * self.re + self.im * self.im
    }

    pub fn conj(self) -> CDd {
        CDd { re: self.re, im: -self.im }
    }
}

impl From<Complex64> for CDd {
    fn from(z: Complex64) -> Self {
        CDd { re: Dd::new(z.re), im: Dd::new(z.im) }
    }
}

impl From<CDd> for Complex64 {
    fn from(z: CDd) -> Self {
        Complex64::new(z.re.to_f64(), z.im.to_f64())
    }
}

impl Add for CDd {
    type Output = CDd;
    fn add(self, o: CDd) -> CDd {
        CDd { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for CDd {
    type Output = CDd;
    fn sub(self, o: CDd) -> CDd {
        CDd { re: self.re - o.re, im: self.im - o.im }
    }
}

impl Neg for CDd {
    type Output = CDd;
    fn neg(self) -> CDd {
        CDd { re: -self.re, im: -self.im }
    }
}

impl Mul for CDd {
    type Output = CDd;
    fn mul(self, o: CDd) -> CDd {
        CDd { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }
}

impl Div for CDd {
    type Output = CDd;
    fn div(self, o: CDd) -> CDd {
        let d = o.norm_sqr();
        let n = self * o.conj();
        CDd { re: n.re / d, im: n.im / d }
    }
}

impl AddAssign for CDd {
    fn add_assign(&mut self, o: CDd) {
        *self = *self + o;
    }
}

impl SubAssign for CDd {
    fn sub_assign(&mut self, o: CDd) {
        *self = *self - o;
    }
}

impl MulAssign for CDd {
    fn mul_assign(&mut self, o: CDd) {
        *self = *self * o;
    }
}

/// Field operations shared by `Complex64` and `CDd`.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn from_c64(z: Complex64) -> Self;
    fn to_c64(self) -> Complex64;
    fn from_f64(x: f64) -> Self {
        Self::from_c64(Complex64::new(x, 0.0))
    }
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    /// |z|² rounded to double.
    fn abs2(self) -> f64;
}

impl Scalar for Complex64 {
    fn from_c64(z: Complex64) -> Self {
        z
    }
    fn to_c64(self) -> Complex64 {
        self
    }
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
}

impl Scalar for CDd {
    fn from_c64(z: Complex64) -> Self {
        z.into()
    }
    fn to_c64(self) -> Complex64 {
        self.into()
    }
    fn abs2(self) -> f64 {
        self.norm_sqr().to_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_lost_bits() {
        let a = Dd::new(1.0) + Dd::new(1e-20);
        let b = a - Dd::new(1.0);
        assert!((b.to_f64() - 1e-20).abs() < 1e-35);
    }

    #[test]
    fn division_round_trip() {
        let x = Dd::new(1.0) / Dd::new(3.0);
        let y = x * Dd::new(3.0) - Dd::ONE;
        assert!(y.to_f64().abs() < 1e-30);
    }

    #[test]
    fn sqrt_two() {
        let s = Dd::new(2.0).sqrt();
        assert!((s * s - Dd::new(2.0)).to_f64().abs() < 1e-30);
    }

    #[test]
    fn complex_ops() {
        let a = CDd::from(Complex64::new(1.0, 2.0));
        let b = CDd::from(Complex64::new(-0.5, 0.25));
        let q: Complex64 = (a / b * b - a).into();
        assert!(q.norm() < 1e-30);
    }
}
