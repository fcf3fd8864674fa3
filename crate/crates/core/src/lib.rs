//! Conformal-embedding cocycles on the unit disk, the Bergman-space Fock
//! representation they drive, and the free-boson vertex algebra it is
//! compared against.
//!
//! The numerical core is generic over the real field through
//! [`scalar::Real`] and over the coefficient field through
//! [`scalar::Scalar`]. The aliases below fix the common double-precision and
//! exact-rational instantiations.

pub mod bergman;
pub mod cocycle;
pub mod diskmap;
pub mod fock;
pub mod heisenberg;
pub mod scalar;
pub mod series;
pub mod verify;

use num_complex::Complex;
use num_rational::BigRational;

pub use num_complex::Complex64;

pub type ExactComplex = Complex<BigRational>;

pub type Series1 = series::TruncatedSeries1<Complex64>;
pub type Series2 = series::TruncatedSeries2<Complex64>;
pub type ExactSeries1 = series::TruncatedSeries1<ExactComplex>;
pub type ExactSeries2 = series::TruncatedSeries2<ExactComplex>;

pub type DiskMap64 = diskmap::DiskMap<f64>;
pub type Configuration64 = diskmap::Configuration<f64>;
pub type Grunsky64 = cocycle::GrunskyMatrix<f64>;

pub type BergmanVector64 = bergman::BergmanVector<f64>;
pub type ActionMatrix64 = bergman::ActionMatrix<f64>;
pub type FockVector64 = fock::FockVector<f64>;

pub type HeisenbergVector64 = heisenberg::HeisenbergVector<Complex64>;
pub type HeisenbergVectorExact = heisenberg::HeisenbergVector<BigRational>;
