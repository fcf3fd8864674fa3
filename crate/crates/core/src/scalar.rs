//! Scalar abstractions shared by every module.
//!
//! [`Real`] is a floating-point field (`f32` or `f64`). [`Scalar`] is any
//! coefficient field the power-series and Heisenberg code can run over,
//! including exact rationals.

use std::fmt::{Debug, Display};
use std::ops::Neg;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, NumAssign, One, ToPrimitive, Zero};

/// Floating-point real field used for analytic (non-exact) computations.
pub trait Real: Float + FromPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static {
    /// Lossy conversion from `f64`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal must be representable")
    }
    /// Lossy conversion to `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Coefficient field for truncated power series and Fock/Heisenberg amplitudes.
pub trait Scalar: Clone + Debug + PartialEq + Num + Neg<Output = Self> + Send + Sync + 'static {
    /// Absolute value as `f64`, used for tolerance decisions only.
    fn magnitude(&self) -> f64;
    /// Complex conjugate (identity for real fields).
    fn conj(&self) -> Self;
    /// Embedding of the rational number `n / d`.
    fn from_ratio(n: i64, d: i64) -> Self;
    /// Embedding of an `f64`; exact for rational fields.
    fn from_f64_value(x: f64) -> Self;

    fn from_int(n: i64) -> Self {
        Self::from_ratio(n, 1)
    }
}

impl<R: Real> Scalar for R {
    fn magnitude(&self) -> f64 {
        self.abs().as_f64()
    }
    fn conj(&self) -> Self {
        *self
    }
    fn from_ratio(n: i64, d: i64) -> Self {
        R::lit(n as f64) / R::lit(d as f64)
    }
    fn from_f64_value(x: f64) -> Self {
        R::lit(x)
    }
}

impl<R: Real> Scalar for Complex<R> {
    fn magnitude(&self) -> f64 {
        self.norm().as_f64()
    }
    fn conj(&self) -> Self {
        Complex::conj(self)
    }
    fn from_ratio(n: i64, d: i64) -> Self {
        Complex::new(R::from_ratio(n, d), R::zero())
    }
    fn from_f64_value(x: f64) -> Self {
        Complex::new(R::lit(x), R::zero())
    }
}

fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite f64 required for exact conversion")
}

impl Scalar for BigRational {
    fn magnitude(&self) -> f64 {
        rational_to_f64(self).abs()
    }
    fn conj(&self) -> Self {
        self.clone()
    }
    fn from_ratio(n: i64, d: i64) -> Self {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }
    fn from_f64_value(x: f64) -> Self {
        rational_from_f64(x)
    }
}

impl Scalar for Complex<BigRational> {
    fn magnitude(&self) -> f64 {
        let re = rational_to_f64(&self.re);
        let im = rational_to_f64(&self.im);
        re.hypot(im)
    }
    fn conj(&self) -> Self {
        Complex::new(self.re.clone(), -self.im.clone())
    }
    fn from_ratio(n: i64, d: i64) -> Self {
        Complex::new(BigRational::from_ratio(n, d), BigRational::zero())
    }
    fn from_f64_value(x: f64) -> Self {
        Complex::new(rational_from_f64(x), BigRational::zero())
    }
}

/// Exact rational complex scalar built from a pair of `f64` values.
pub fn exact_complex(re: f64, im: f64) -> Complex<BigRational> {
    Complex::new(rational_from_f64(re), rational_from_f64(im))
}

/// Converts a complex number between real fields.
pub fn cast_complex<A: Real, B: Real>(z: Complex<A>) -> Complex<B> {
    Complex::new(B::lit(z.re.as_f64()), B::lit(z.im.as_f64()))
}

/// Complex number from an `f64` pair.
pub fn cplx<R: Real>(re: f64, im: f64) -> Complex<R> {
    Complex::new(R::lit(re), R::lit(im))
}

/// Integer power of a scalar by repeated squaring.
pub fn powi<S: Scalar>(base: &S, exp: u32) -> S {
    let mut result = S::one();
    let mut b = base.clone();
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            result = result * b.clone();
        }
        b = b.clone() * b;
        e >>= 1;
    }
    result
}

/// `n!` as a real number.
pub fn factorial<R: Real>(n: usize) -> R {
    let mut acc = R::one();
    for k in 2..=n {
        acc *= R::lit(k as f64);
    }
    acc
}

/// `n!` as an exact integer.
pub fn factorial_big(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Binomial coefficient as a real number.
pub fn binomial<R: Real>(n: usize, k: usize) -> R {
    if k > n {
        return R::zero();
    }
    let k = k.min(n - k);
    let mut acc = R::one();
    for i in 0..k {
        acc = acc * R::lit((n - i) as f64) / R::lit((i + 1) as f64);
    }
    acc
}
