//! The Bergman space `A²(D)` in the orthonormal basis `e_n = √(n+1) zⁿ`.
//!
//! Action matrices are truncations of infinite matrices. Every stored entry
//! is exact (it depends only on finitely many Taylor coefficients), so
//! "truncate then adjoint" and "adjoint then truncate" give the same block;
//! what truncation loses is the coupling to modes `≥ N` when matrices are
//! multiplied.

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::cocycle::{cocycle_f, cocycle_g, grunsky, CocycleError, GrunskyMatrix, GrunskySource};
use crate::diskmap::{dm_conjugate, dm_to_series, DiskMap};
use crate::scalar::{binomial, factorial, Real};
use crate::series::s_mul;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BergmanError {
    #[error("kernel point {0} lies outside the open unit disk")]
    Domain(f64),
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error(transparent)]
    Cocycle(#[from] CocycleError),
}

/// Coefficients in the orthonormal basis `e_0..e_{N-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BergmanVector<R: Real> {
    pub coeffs: Vec<Complex<R>>,
}

impl<R: Real> BergmanVector<R> {
    pub fn new(coeffs: Vec<Complex<R>>) -> Self {
        Self { coeffs }
    }

    pub fn zero(n: usize) -> Self {
        Self { coeffs: vec![Complex::zero(); n] }
    }

    /// Basis vector `e_k`.
    pub fn basis(k: usize, n: usize) -> Self {
        let mut v = Self::zero(n);
        if k < n {
            v.coeffs[k] = Complex::one();
        }
        v
    }

    /// `h_j = √(j+1) e_j = (j+1) z^j`.
    pub fn h(j: usize, n: usize) -> Self {
        let mut v = Self::zero(n);
        if j < n {
            v.coeffs[j] = Complex::new(R::lit((j + 1) as f64).sqrt(), R::zero());
        }
        v
    }

    /// ON coordinates of a polynomial given by monomial coefficients.
    pub fn from_monomials(monomials: &[Complex<R>], n: usize) -> Self {
        let mut v = Self::zero(n);
        for (k, c) in monomials.iter().enumerate().take(n) {
            v.coeffs[k] = *c / R::lit((k + 1) as f64).sqrt();
        }
        v
    }

    pub fn cutoff(&self) -> usize {
        self.coeffs.len()
    }

    /// `(self, other)`, antilinear in the first slot.
    pub fn inner(&self, other: &Self) -> Complex<R> {
        self.coeffs.iter().zip(&other.coeffs).fold(Complex::zero(), |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn norm_sq(&self) -> R {
        self.coeffs.iter().fold(R::zero(), |acc, a| acc + a.norm_sqr())
    }

    /// Pointwise value of the represented function.
    pub fn eval(&self, z: Complex<R>) -> Complex<R> {
        let mut acc = Complex::zero();
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * z + c * R::lit((k + 1) as f64).sqrt();
        }
        acc
    }

    pub fn scale(&self, s: Complex<R>) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.cutoff().max(other.cutoff());
        let get = |v: &Self, k: usize| v.coeffs.get(k).copied().unwrap_or_else(Complex::zero);
        Self { coeffs: (0..n).map(|k| get(self, k) + get(other, k)).collect() }
    }

    pub fn max_abs_diff(&self, other: &Self) -> R {
        let n = self.cutoff().max(other.cutoff());
        let get = |v: &Self, k: usize| v.coeffs.get(k).copied().unwrap_or_else(Complex::zero);
        (0..n).fold(R::zero(), |m, k| m.max((get(self, k) - get(other, k)).norm()))
    }
}

fn check_domain<R: Real>(a: Complex<R>) -> Result<(), BergmanError> {
    if a.norm() >= R::one() {
        return Err(BergmanError::Domain(a.norm().as_f64()));
    }
    Ok(())
}

/// `E_a(z) = 1/(1 - a z)²`, with ON coordinates `√(n+1) aⁿ`.
pub fn kernel_vector<R: Real>(a: Complex<R>, n: usize) -> Result<BergmanVector<R>, BergmanError> {
    kernel_derivative(a, 0, n)
}

/// `∂_aⁿ E_a`, with ON coordinates `n! C(k, n) a^{k-n} √(k+1)` at index `k ≥ n`.
pub fn kernel_derivative<R: Real>(a: Complex<R>, order: usize, n: usize) -> Result<BergmanVector<R>, BergmanError> {
    check_domain(a)?;
    let nf = factorial::<R>(order);
    let mut v = BergmanVector::zero(n);
    let mut power = Complex::<R>::one();
    for k in order..n {
        v.coeffs[k] = power * (nf * binomial::<R>(k, order) * R::lit((k + 1) as f64).sqrt());
        power *= a;
    }
    Ok(v)
}

/// Which operator a matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OperatorTag {
    /// `T_φ f = φ' · (f ∘ φ)`.
    T,
    /// `ρ_cl(φ) = T_{J(φ)}*`.
    RhoCl,
    /// Products or other derived operators.
    Derived,
}

/// Square matrix in the ON basis, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionMatrix<R: Real> {
    n: usize,
    data: Vec<Complex<R>>,
    pub tag: OperatorTag,
}

impl<R: Real> ActionMatrix<R> {
    pub fn from_fn(n: usize, tag: OperatorTag, mut f: impl FnMut(usize, usize) -> Complex<R>) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data, tag }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, OperatorTag::Derived, |i, j| if i == j { Complex::one() } else { Complex::zero() })
    }

    pub fn cutoff(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<R> {
        self.data[i * self.n + j]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, OperatorTag::Derived, |i, j| self.get(j, i).conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, OperatorTag::Derived, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, BergmanError> {
        if self.n != other.n {
            return Err(BergmanError::Dimension { left: self.n, right: other.n });
        }
        let n = self.n;
        Ok(Self::from_fn(n, OperatorTag::Derived, |i, j| (0..n).fold(Complex::zero(), |acc, k| acc + self.get(i, k) * other.get(k, j))))
    }

    pub fn apply(&self, v: &BergmanVector<R>) -> BergmanVector<R> {
        let n = self.n;
        BergmanVector::new(
            (0..n).map(|i| (0..n.min(v.cutoff())).fold(Complex::zero(), |acc, k| acc + self.get(i, k) * v.coeffs[k])).collect(),
        )
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> BergmanVector<R> {
        BergmanVector::new((0..self.n).map(|i| self.get(i, j)).collect())
    }

    pub fn max_abs_diff(&self, other: &Self) -> R {
        self.data.iter().zip(&other.data).fold(R::zero(), |m, (a, b)| m.max((a - b).norm()))
    }

    /// Largest singular value, by power iteration on `M* M`.
    pub fn operator_norm(&self) -> R {
        let n = self.n;
        let mut v: Vec<Complex<R>> = (0..n).map(|k| Complex::new(R::one(), R::lit(0.1 * k as f64))).collect();
        let mut estimate = R::zero();
        for _ in 0..500 {
            let mv: Vec<Complex<R>> = (0..n).map(|i| (0..n).fold(Complex::zero(), |a, k| a + self.get(i, k) * v[k])).collect();
            let w: Vec<Complex<R>> = (0..n).map(|j| (0..n).fold(Complex::zero(), |a, i| a + self.get(i, j).conj() * mv[i])).collect();
            let norm = w.iter().fold(R::zero(), |a, x| a + x.norm_sqr()).sqrt();
            if norm == R::zero() {
                return R::zero();
            }
            let vnorm = v.iter().fold(R::zero(), |a, x| a + x.norm_sqr()).sqrt();
            let next = (norm / vnorm).sqrt();
            v = w.into_iter().map(|x| x / norm).collect();
            if (next - estimate).abs() <= R::lit(1e-15) * next {
                return next;
            }
            estimate = next;
        }
        estimate
    }
}

/// Truncated matrix of `T_φ`: column `m` holds the ON coordinates of `√(m+1) φ' φ^m`.
pub fn t_matrix<R: Real>(phi: &DiskMap<R>, n: usize) -> ActionMatrix<R> {
    let series = dm_to_series(phi, n + 1);
    let deriv = series.derivative().with_cutoff(n);
    let base = series.with_cutoff(n);
    let mut columns = Vec::with_capacity(n);
    let mut power = deriv;
    for m in 0..n {
        let scale = R::lit((m + 1) as f64).sqrt();
        columns.push(BergmanVector::from_monomials(power.scale(&Complex::new(scale, R::zero())).coeffs(), n));
        power = s_mul(&power, &base).expect("equal cutoffs");
    }
    ActionMatrix::from_fn(n, OperatorTag::T, |i, j| columns[j].coeffs[i])
}

/// `ρ_cl(φ) = T_{J(φ)}*`, the conjugate transpose of the truncated `T_{J(φ)}`.
pub fn rho_cl_matrix<R: Real>(phi: &DiskMap<R>, n: usize) -> ActionMatrix<R> {
    let mut m = t_matrix(&dm_conjugate(phi), n).adjoint();
    m.tag = OperatorTag::RhoCl;
    m
}

/// `c_{n,m} = ∂_φ(e_n ⊗ e_m) = d_{n,m}/√((n+1)(m+1))`.
pub fn contraction_functional<R: Real>(phi: &DiskMap<R>, n: usize) -> Result<GrunskyMatrix<R>, BergmanError> {
    Ok(grunsky(&cocycle_f(phi, n)?, GrunskySource::F))
}

/// `c_{n,m} = C_{φ,ψ}(e_n ⊗ e_m) = g_{n,m}/√((n+1)(m+1))`.
pub fn pair_functional<R: Real>(phi: &DiskMap<R>, psi: &DiskMap<R>, n: usize) -> Result<GrunskyMatrix<R>, BergmanError> {
    Ok(grunsky(&cocycle_g(phi, psi, n)?, GrunskySource::G))
}

/// Evaluates a Grunsky-type bilinear functional on two Bergman vectors.
pub fn pair_value<R: Real>(c: &GrunskyMatrix<R>, u: &BergmanVector<R>, v: &BergmanVector<R>) -> Complex<R> {
    let n = c.cutoff().min(u.cutoff()).min(v.cutoff());
    let mut acc = Complex::zero();
    for i in 0..n {
        for j in 0..n {
            acc += c.at(i, j) * u.coeffs[i] * v.coeffs[j];
        }
    }
    acc
}
