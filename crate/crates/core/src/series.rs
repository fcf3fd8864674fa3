//! Truncated power series in one and two variables.
//!
//! Univariate series keep the coefficients `c_0..c_{N-1}`. Bivariate series
//! keep an `N x N` grid together with the largest total degree whose
//! coefficients are trusted; entries beyond that degree are stored as zero
//! and are never handed out by [`TruncatedSeries2::get`].

use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::scalar::Scalar;

/// Relative tolerance factor used by [`divide_by_diag`].
pub const DIV_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: usize, right: usize },
    #[error("series has vanishing constant term and cannot be inverted")]
    Singular,
    #[error("cutoff must be at least 1")]
    EmptyCutoff,
    #[error("coefficient {index} is not finite")]
    NonFinite { index: usize },
    #[error("not divisible by (z - w): total degree {degree} has diagonal residual {residual:e} > {tolerance:e}")]
    NotDivisible { degree: usize, residual: f64, tolerance: f64 },
    #[error("requested total degree {requested} exceeds trusted degree {trusted}")]
    UntrustedDegree { requested: usize, trusted: usize },
}

/// Univariate series truncated at `cutoff` (exclusive degree bound).
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries1<S> {
    coeffs: Vec<S>,
}

impl<S: Scalar> TruncatedSeries1<S> {
    /// Builds a series from its coefficients; the cutoff is their count.
    pub fn new(coeffs: Vec<S>) -> Result<Self, SeriesError> {
        if coeffs.is_empty() {
            return Err(SeriesError::EmptyCutoff);
        }
        if let Some(index) = coeffs.iter().position(|c| !c.magnitude().is_finite()) {
            return Err(SeriesError::NonFinite { index });
        }
        Ok(Self { coeffs })
    }

    /// Builds a series from a prefix of coefficients, zero padded (or cut) to `cutoff`.
    pub fn from_prefix(prefix: &[S], cutoff: usize) -> Result<Self, SeriesError> {
        let mut coeffs: Vec<S> = prefix.iter().take(cutoff).cloned().collect();
        coeffs.resize(cutoff, S::zero());
        Self::new(coeffs)
    }

    pub fn zero(cutoff: usize) -> Self {
        Self { coeffs: vec![S::zero(); cutoff.max(1)] }
    }

    pub fn constant(c: S, cutoff: usize) -> Self {
        let mut s = Self::zero(cutoff);
        s.coeffs[0] = c;
        s
    }

    /// `c * z^k`, or zero if `k` is beyond the cutoff.
    pub fn monomial(c: S, k: usize, cutoff: usize) -> Self {
        let mut s = Self::zero(cutoff);
        if k < s.cutoff() {
            s.coeffs[k] = c;
        }
        s
    }

    pub fn cutoff(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> S {
        self.coeffs.get(k).cloned().unwrap_or_else(S::zero)
    }

    fn check(&self, other: &Self) -> Result<(), SeriesError> {
        if self.cutoff() != other.cutoff() {
            return Err(SeriesError::CutoffMismatch { left: self.cutoff(), right: other.cutoff() });
        }
        Ok(())
    }

    /// Same series with a different cutoff (padding with zeros when growing).
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        Self::from_prefix(&self.coeffs, cutoff.max(1)).expect("cutoff is positive")
    }

    pub fn scale(&self, c: &S) -> Self {
        Self { coeffs: self.coeffs.iter().map(|x| x.clone() * c.clone()).collect() }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check(other)?;
        Ok(Self { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.clone() + b.clone()).collect() })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check(other)?;
        Ok(Self { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.clone() - b.clone()).collect() })
    }

    /// Formal derivative. The top coefficient becomes zero, so the result is
    /// only trusted below `cutoff - 1`.
    pub fn derivative(&self) -> Self {
        let n = self.cutoff();
        let mut coeffs = vec![S::zero(); n];
        for k in 1..n {
            coeffs[k - 1] = self.coeffs[k].clone() * S::from_int(k as i64);
        }
        Self { coeffs }
    }

    /// Horner evaluation of the truncated polynomial.
    pub fn eval(&self, z: &S) -> S {
        self.coeffs.iter().rev().fold(S::zero(), |acc, c| acc * z.clone() + c.clone())
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(Scalar::magnitude).fold(0.0, f64::max)
    }
}

/// Truncated Cauchy product.
pub fn s_mul<S: Scalar>(a: &TruncatedSeries1<S>, b: &TruncatedSeries1<S>) -> Result<TruncatedSeries1<S>, SeriesError> {
    a.check(b)?;
    let n = a.cutoff();
    let mut coeffs = vec![S::zero(); n];
    for (i, ai) in a.coeffs.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.coeffs.iter().take(n - i).enumerate() {
            coeffs[i + j] = coeffs[i + j].clone() + ai.clone() * bj.clone();
        }
    }
    Ok(TruncatedSeries1 { coeffs })
}

/// Multiplicative inverse by the recursive convolution `b_k = -(Σ_{j≥1} a_j b_{k-j}) / a_0`.
pub fn s_reciprocal<S: Scalar>(a: &TruncatedSeries1<S>) -> Result<TruncatedSeries1<S>, SeriesError> {
    let c0 = a.coeffs[0].clone();
    if c0.is_zero() {
        return Err(SeriesError::Singular);
    }
    let n = a.cutoff();
    let inv0 = S::one() / c0;
    let mut b: Vec<S> = Vec::with_capacity(n);
    b.push(inv0.clone());
    for k in 1..n {
        let mut acc = S::zero();
        for j in 1..=k {
            acc = acc + a.coeffs[j].clone() * b[k - j].clone();
        }
        b.push(-(acc * inv0.clone()));
    }
    Ok(TruncatedSeries1 { coeffs: b })
}

/// Taylor coefficients of `g ∘ f` by Horner evaluation over series.
///
/// When `f(0) = 0` the result is exact at every retained degree. Otherwise it
/// is the truncation of `g_trunc ∘ f`, whose accuracy degrades as `|f(0)| → 1`.
pub fn s_compose<S: Scalar>(g: &TruncatedSeries1<S>, f: &TruncatedSeries1<S>) -> Result<TruncatedSeries1<S>, SeriesError> {
    g.check(f)?;
    let n = g.cutoff();
    let mut acc = TruncatedSeries1::constant(g.coeffs[n - 1].clone(), n);
    for k in (0..n - 1).rev() {
        acc = s_mul(&acc, f)?;
        acc.coeffs[0] = acc.coeffs[0].clone() + g.coeffs[k].clone();
    }
    Ok(acc)
}

/// Bivariate series on an `N x N` grid with a trusted total degree.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries2<S> {
    n: usize,
    valid: usize,
    data: Vec<S>,
}

impl<S: Scalar> TruncatedSeries2<S> {
    /// Zero series on an `n x n` grid, trusted everywhere.
    pub fn zero(n: usize) -> Self {
        let n = n.max(1);
        Self { n, valid: 2 * n - 2, data: vec![S::zero(); n * n] }
    }

    /// Builds a series from a generator, evaluated on trusted entries only.
    pub fn from_fn(n: usize, valid_total_degree: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut s = Self::zero(n);
        s.valid = valid_total_degree.min(2 * s.n - 2);
        for i in 0..s.n {
            for j in 0..s.n {
                if i + j <= s.valid {
                    s.data[i * s.n + j] = f(i, j);
                }
            }
        }
        s
    }

    /// `f(z)` regarded as a function of `(z, w)`.
    pub fn from_z(f: &TruncatedSeries1<S>) -> Self {
        let n = f.cutoff();
        Self::from_fn(n, 2 * n - 2, |i, j| if j == 0 { f.coeff(i) } else { S::zero() })
    }

    /// `f(w)` regarded as a function of `(z, w)`.
    pub fn from_w(f: &TruncatedSeries1<S>) -> Self {
        let n = f.cutoff();
        Self::from_fn(n, 2 * n - 2, |i, j| if i == 0 { f.coeff(j) } else { S::zero() })
    }

    pub fn cutoff(&self) -> usize {
        self.n
    }

    pub fn valid_total_degree(&self) -> usize {
        self.valid
    }

    pub fn is_trusted(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + j <= self.valid
    }

    /// Coefficient of `z^i w^j` if it is inside the grid and trusted.
    pub fn get(&self, i: usize, j: usize) -> Option<&S> {
        self.is_trusted(i, j).then(|| &self.data[i * self.n + j])
    }

    /// Coefficient of `z^i w^j`, panicking on untrusted reads.
    pub fn at(&self, i: usize, j: usize) -> S {
        match self.get(i, j) {
            Some(v) => v.clone(),
            None => panic!("read of untrusted coefficient ({i}, {j}) with trusted degree {}", self.valid),
        }
    }

    fn raw(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.n + j] = v;
    }

    /// Trusted `(i, j, value)` triples in row-major order.
    pub fn trusted_entries(&self) -> impl Iterator<Item = (usize, usize, &S)> {
        (0..self.n).flat_map(move |i| (0..self.n).filter_map(move |j| self.get(i, j).map(|v| (i, j, v))))
    }

    /// Lowers the trusted degree.
    pub fn restrict(&self, valid: usize) -> Self {
        let mut out = self.clone();
        out.valid = valid.min(self.valid);
        for i in 0..out.n {
            for j in 0..out.n {
                if i + j > out.valid {
                    out.set(i, j, S::zero());
                }
            }
        }
        out
    }

    /// Top-left `m x m` block.
    pub fn crop(&self, m: usize) -> Self {
        let m = m.clamp(1, self.n);
        Self::from_fn(m, self.valid, |i, j| self.raw(i, j).clone())
    }

    fn check(&self, other: &Self) -> Result<(), SeriesError> {
        if self.n != other.n {
            return Err(SeriesError::CutoffMismatch { left: self.n, right: other.n });
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, op: impl Fn(S, S) -> S) -> Result<Self, SeriesError> {
        self.check(other)?;
        let valid = self.valid.min(other.valid);
        Ok(Self::from_fn(self.n, valid, |i, j| op(self.raw(i, j).clone(), other.raw(i, j).clone())))
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: &S) -> Self {
        Self::from_fn(self.n, self.valid, |i, j| self.raw(i, j).clone() * c.clone())
    }

    /// Grid Cauchy product; trusted up to the smaller trusted degree.
    pub fn try_mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check(other)?;
        let n = self.n;
        let valid = self.valid.min(other.valid);
        let mut out = Self::zero(n);
        out.valid = valid;
        for i in 0..n {
            for j in 0..n {
                if i + j > valid {
                    continue;
                }
                let mut acc = S::zero();
                for a in 0..=i {
                    for b in 0..=j {
                        let x = self.raw(a, b);
                        if x.is_zero() {
                            continue;
                        }
                        acc = acc + x.clone() * other.raw(i - a, j - b).clone();
                    }
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    /// Multiplicative inverse; requires a nonzero constant term.
    pub fn reciprocal(&self) -> Result<Self, SeriesError> {
        let c0 = self.raw(0, 0).clone();
        if c0.is_zero() {
            return Err(SeriesError::Singular);
        }
        let n = self.n;
        let inv0 = S::one() / c0;
        let mut out = Self::zero(n);
        out.valid = self.valid;
        for i in 0..n {
            for j in 0..n {
                if i + j > self.valid {
                    continue;
                }
                if i == 0 && j == 0 {
                    out.set(0, 0, inv0.clone());
                    continue;
                }
                let mut acc = S::zero();
                for a in 0..=i {
                    for b in 0..=j {
                        if a == 0 && b == 0 {
                            continue;
                        }
                        let x = self.raw(a, b);
                        if x.is_zero() {
                            continue;
                        }
                        acc = acc + x.clone() * out.raw(i - a, j - b).clone();
                    }
                }
                out.set(i, j, -(acc * inv0.clone()));
            }
        }
        Ok(out)
    }

    /// Multiplies by `(z - w)`.
    pub fn mul_by_diag(&self) -> Self {
        let valid = (self.valid + 1).min(2 * self.n - 2);
        Self::from_fn(self.n, valid, |i, j| {
            let left = if i > 0 { self.raw(i - 1, j).clone() } else { S::zero() };
            let right = if j > 0 { self.raw(i, j - 1).clone() } else { S::zero() };
            left - right
        })
    }

    /// Sum of the trusted coefficients with `i + j = k` inside the grid.
    pub fn antidiagonal_sum(&self, k: usize) -> S {
        (0..=k).filter_map(|i| self.get(i, k - i).cloned()).fold(S::zero(), |a, b| a + b)
    }

    /// Largest trusted coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.trusted_entries().map(|(_, _, v)| v.magnitude()).fold(0.0, f64::max)
    }

    /// Largest trusted entrywise distance to another grid, over the common trusted window.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let n = self.n.min(other.n);
        let valid = self.valid.min(other.valid);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i + j <= valid {
                    worst = worst.max((self.raw(i, j).clone() - other.raw(i, j).clone()).magnitude());
                }
            }
        }
        worst
    }

    /// Transpose `p(w, z)`.
    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, self.valid, |i, j| self.raw(j, i).clone())
    }
}

/// `q(z, w) = (f(z) - f(w)) / (z - w)`, with `q_{n,m} = c_{n+m+1}`.
///
/// The grid has size `N - 1` and is trusted up to total degree `N - 2`.
pub fn divided_difference<S: Scalar>(f: &TruncatedSeries1<S>) -> TruncatedSeries2<S> {
    let n = f.cutoff();
    let size = n.saturating_sub(1).max(1);
    TruncatedSeries2::from_fn(size, n.saturating_sub(2), |i, j| f.coeff(i + j + 1))
}

/// Division by `(z - w)` with the default tolerance `1e-9 · max|p|`.
pub fn divide_by_diag<S: Scalar>(p: &TruncatedSeries2<S>) -> Result<TruncatedSeries2<S>, SeriesError> {
    divide_by_diag_scaled(p, p.max_abs())
}

/// Division by `(z - w)` with tolerance `1e-9 · scale`.
///
/// Callers that build `p` as a difference of large, nearly equal terms pass
/// the size of those terms as `scale`, so that rounding noise in a vanishing
/// `p` is not mistaken for a non-divisible input.
pub fn divide_by_diag_scaled<S: Scalar>(p: &TruncatedSeries2<S>, scale: f64) -> Result<TruncatedSeries2<S>, SeriesError> {
    let n = p.cutoff();
    let tolerance = DIV_REL_TOL * scale;
    for k in 0..=p.valid.min(n - 1) {
        let residual = p.antidiagonal_sum(k).magnitude();
        if residual > tolerance {
            return Err(SeriesError::NotDivisible { degree: k, residual, tolerance });
        }
    }
    if p.valid == 0 || n < 2 {
        return Ok(TruncatedSeries2 { n, valid: 0, data: vec![S::zero(); n * n] });
    }
    let valid = (p.valid - 1).min(n - 2);
    let mut q: TruncatedSeries2<S> = TruncatedSeries2::zero(n);
    q.valid = valid;
    for k in 0..=valid {
        for m in 0..=k {
            let i = k - m;
            if i >= n || m >= n {
                continue;
            }
            let prev = if m > 0 && i + 1 < n { q.raw(i + 1, m - 1).clone() } else { S::zero() };
            let v = p.raw(i + 1, m).clone() + prev;
            q.set(i, m, v);
        }
    }
    Ok(q)
}

/// Substitutes univariate series into a bivariate one: `p(u(z), v(w))`.
///
/// With `u(0) = v(0) = 0` the result is exact on the trusted window of `p`.
/// Otherwise every output coefficient receives contributions from all of
/// `p`, and the truncated sum is only an approximation.
pub fn substitute<S: Scalar>(
    p: &TruncatedSeries2<S>,
    u: &TruncatedSeries1<S>,
    v: &TruncatedSeries1<S>,
) -> Result<TruncatedSeries2<S>, SeriesError> {
    u.check(v)?;
    let out_n = u.cutoff();
    let powers = |s: &TruncatedSeries1<S>| -> Result<Vec<TruncatedSeries1<S>>, SeriesError> {
        let mut list = vec![TruncatedSeries1::constant(S::one(), out_n)];
        for k in 1..p.cutoff() {
            let next = s_mul(&list[k - 1], s)?;
            list.push(next);
        }
        Ok(list)
    };
    let up = powers(u)?;
    let vp = powers(v)?;
    let mut tmp = vec![S::zero(); p.cutoff() * out_n];
    for (i, _) in up.iter().enumerate() {
        for b in 0..out_n {
            let mut acc = S::zero();
            for (j, vj) in vp.iter().enumerate() {
                if let Some(c) = p.get(i, j) {
                    acc = acc + c.clone() * vj.coeff(b);
                }
            }
            tmp[i * out_n + b] = acc;
        }
    }
    let valid = p.valid_total_degree().min(2 * out_n - 2);
    Ok(TruncatedSeries2::from_fn(out_n, valid, |a, b| {
        let mut acc = S::zero();
        for (i, ui) in up.iter().enumerate() {
            acc = acc + ui.coeff(a) * tmp[i * out_n + b].clone();
        }
        acc
    }))
}

impl<S: Scalar> Add for &TruncatedSeries1<S> {
    type Output = TruncatedSeries1<S>;
    fn add(self, rhs: Self) -> Self::Output {
        self.try_add(rhs).expect("cutoff mismatch")
    }
}

impl<S: Scalar> Sub for &TruncatedSeries1<S> {
    type Output = TruncatedSeries1<S>;
    fn sub(self, rhs: Self) -> Self::Output {
        self.try_sub(rhs).expect("cutoff mismatch")
    }
}

impl<S: Scalar> Mul for &TruncatedSeries1<S> {
    type Output = TruncatedSeries1<S>;
    fn mul(self, rhs: Self) -> Self::Output {
        s_mul(self, rhs).expect("cutoff mismatch")
    }
}

impl<S: Scalar> Neg for &TruncatedSeries1<S> {
    type Output = TruncatedSeries1<S>;
    fn neg(self) -> Self::Output {
        TruncatedSeries1 { coeffs: self.coeffs.iter().map(|c| -c.clone()).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn real_series(v: &[f64]) -> TruncatedSeries1<Complex64> {
        TruncatedSeries1::new(v.iter().map(|&x| c(x, 0.0)).collect()).unwrap()
    }

    #[test]
    fn difference_of_squares() {
        let a = real_series(&[1.0, 1.0, 0.0]);
        let b = real_series(&[1.0, -1.0, 0.0]);
        assert_eq!(s_mul(&a, &b).unwrap(), real_series(&[1.0, 0.0, -1.0]));
    }

    #[test]
    fn geometric_series_times_one_minus_z() {
        let geo = real_series(&[1.0; 8]);
        let mut lin = vec![0.0; 8];
        lin[0] = 1.0;
        lin[1] = -1.0;
        let prod = s_mul(&geo, &real_series(&lin)).unwrap();
        let mut expect = vec![0.0; 8];
        expect[0] = 1.0;
        assert_eq!(prod, real_series(&expect));
    }

    #[test]
    fn mismatched_cutoffs_are_rejected() {
        let a = real_series(&[1.0, 2.0]);
        let b = real_series(&[1.0, 2.0, 3.0]);
        assert!(matches!(s_mul(&a, &b), Err(SeriesError::CutoffMismatch { .. })));
    }

    #[test]
    fn reciprocal_examples() {
        let r = s_reciprocal(&real_series(&[1.0, -1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(r, real_series(&[1.0; 5]));
        let r = s_reciprocal(&real_series(&[2.0])).unwrap();
        assert_eq!(r, real_series(&[0.5]));
        assert_eq!(s_reciprocal(&real_series(&[0.0, 1.0])), Err(SeriesError::Singular));
    }

    #[test]
    fn reciprocal_of_square_binomial_oracle() {
        let a = real_series(&[1.0, -0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let sq = s_mul(&a, &a).unwrap();
        let r = s_reciprocal(&sq).unwrap();
        for n in 0..10 {
            let expect = (n as f64 + 1.0) * 0.3f64.powi(n as i32);
            assert!((r.coeff(n) - c(expect, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn compose_examples() {
        let z2 = real_series(&[0.0, 0.0, 1.0, 0.0]);
        let f = real_series(&[0.0, 1.0, 0.5, 0.25]);
        let comp = s_compose(&z2, &f).unwrap();
        assert_eq!(comp, s_mul(&f, &f).unwrap());
        let id = real_series(&[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(s_compose(&id, &f).unwrap(), f);
    }

    #[test]
    fn compose_geometric_with_shifted_line() {
        let n = 12;
        let g = real_series(&vec![1.0; n]);
        let mut fv = vec![0.0; n];
        fv[0] = 0.2;
        fv[1] = 0.3;
        let comp = s_compose(&g, &real_series(&fv)).unwrap();
        for k in 0..n {
            // Exact composition of the degree-11 polynomial: Σ_{j<12} C(j,k) 0.2^{j-k} 0.3^k.
            let poly: f64 =
                (k..n).map(|j| crate::scalar::binomial::<f64>(j, k) * 0.2f64.powi((j - k) as i32) * 0.3f64.powi(k as i32)).sum();
            assert!((comp.coeff(k).re - poly).abs() < 1e-14 * poly.max(1.0));
            // Closed form of 1/(0.8 - 0.3 z), differing only by the discarded tail of g.
            if k <= 3 {
                let closed = 0.3f64.powi(k as i32) / 0.8f64.powi(k as i32 + 1);
                assert!((comp.coeff(k).re - closed).abs() < 1e-3 * closed);
            }
        }
    }

    #[test]
    fn divided_difference_examples() {
        let q = divided_difference(&real_series(&[0.0, 0.0, 1.0, 0.0]));
        assert_eq!(q.at(1, 0), c(1.0, 0.0));
        assert_eq!(q.at(0, 1), c(1.0, 0.0));
        assert_eq!(q.at(0, 0), c(0.0, 0.0));
        let q = divided_difference(&real_series(&[0.0, 1.0, 0.0]));
        assert_eq!(q.at(0, 0), c(1.0, 0.0));
        let q = divided_difference(&real_series(&[0.0, 0.0, 0.0, 1.0, 0.0]));
        for (i, j) in [(2, 0), (1, 1), (0, 2)] {
            assert_eq!(q.at(i, j), c(1.0, 0.0));
        }
        assert_eq!(q.at(1, 0), c(0.0, 0.0));
    }

    #[test]
    fn divide_examples() {
        let p = TruncatedSeries2::from_fn(5, 8, |i, j| match (i, j) {
            (2, 0) => c(1.0, 0.0),
            (0, 2) => c(-1.0, 0.0),
            _ => c(0.0, 0.0),
        });
        let q = divide_by_diag(&p).unwrap();
        assert_eq!(q.at(1, 0), c(1.0, 0.0));
        assert_eq!(q.at(0, 1), c(1.0, 0.0));
        assert_eq!(q.at(0, 0), c(0.0, 0.0));
        assert_eq!(q.valid_total_degree(), 3);

        let zero = TruncatedSeries2::<Complex64>::zero(4);
        let q = divide_by_diag(&zero).unwrap();
        assert!(q.trusted_entries().all(|(_, _, v)| *v == c(0.0, 0.0)));
    }

    #[test]
    fn divide_twice_round_trip() {
        let base = TruncatedSeries2::from_fn(8, 14, |i, j| match (i, j) {
            (0, 0) => c(1.0, 0.0),
            (1, 1) => c(1.0, 0.0),
            _ => c(0.0, 0.0),
        });
        let p = base.mul_by_diag().mul_by_diag();
        let q = divide_by_diag(&divide_by_diag(&p).unwrap()).unwrap();
        for (i, j, v) in q.trusted_entries() {
            assert_eq!(*v, base.at(i, j), "({i},{j})");
        }
    }

    #[test]
    fn non_divisible_input_is_rejected() {
        let p = TruncatedSeries2::from_fn(4, 6, |i, j| if i + j == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        assert!(matches!(divide_by_diag(&p), Err(SeriesError::NotDivisible { degree: 0, .. })));
    }

    #[test]
    fn exact_rational_reciprocal() {
        type Q = BigRational;
        let a = TruncatedSeries1::new(vec![Q::from_int(1), Q::from_ratio(-1, 3), Q::from_int(0), Q::from_int(0)]).unwrap();
        let r = s_reciprocal(&a).unwrap();
        assert_eq!(r.coeff(3), Q::from_ratio(1, 27));
    }

    #[test]
    fn substitution_with_dilation_scales_coefficients() {
        let p = TruncatedSeries2::from_fn(6, 10, |i, j| c((i + 2 * j) as f64, 0.0));
        let u = real_series(&[0.0, 0.5, 0.0, 0.0, 0.0, 0.0]);
        let v = real_series(&[0.0, 0.25, 0.0, 0.0, 0.0, 0.0]);
        let out = substitute(&p, &u, &v).unwrap();
        for (i, j, x) in out.trusted_entries() {
            let expect = (i + 2 * j) as f64 * 0.5f64.powi(i as i32) * 0.25f64.powi(j as i32);
            assert!((x.re - expect).abs() < 1e-14);
        }
    }

    fn arb_series(n: usize) -> impl Strategy<Value = TruncatedSeries1<Complex64>> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
            .prop_map(|v| TruncatedSeries1::new(v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap())
    }

    proptest! {
        #[test]
        fn divided_difference_diagonal_is_derivative(f in arb_series(10)) {
            let q = divided_difference(&f);
            for k in 0..=q.valid_total_degree().min(q.cutoff() - 1) {
                let expect = f.coeff(k + 1) * (k as f64 + 1.0);
                prop_assert!((q.antidiagonal_sum(k) - expect).norm() < 1e-12);
            }
        }

        #[test]
        fn mul_is_commutative_and_associative(a in arb_series(7), b in arb_series(7), d in arb_series(7)) {
            let ab = s_mul(&a, &b).unwrap();
            prop_assert!((&ab - &s_mul(&b, &a).unwrap()).max_abs() < 1e-12);
            let left = s_mul(&ab, &d).unwrap();
            let right = s_mul(&a, &s_mul(&b, &d).unwrap()).unwrap();
            prop_assert!((&left - &right).max_abs() < 1e-12);
        }

        #[test]
        fn reciprocal_inverts(mut a in arb_series(9)) {
            a.coeffs[0] = c(1.5, 0.2);
            let prod = s_mul(&a, &s_reciprocal(&a).unwrap()).unwrap();
            let one = TruncatedSeries1::constant(c(1.0, 0.0), 9);
            prop_assert!((&prod - &one).max_abs() < 1e-10);
        }

        #[test]
        fn divide_inverts_diag_multiplication(v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64)) {
            let p = TruncatedSeries2::from_fn(8, 6, |i, j| c(v[i * 8 + j].0, v[i * 8 + j].1));
            let q = divide_by_diag(&p.mul_by_diag()).unwrap();
            for (i, j, x) in q.trusted_entries() {
                prop_assert!((*x - p.at(i, j)).norm() < 1e-12);
            }
        }
    }
}
