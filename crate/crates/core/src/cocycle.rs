//! The central-charge cocycle `F_φ`, the pair kernel `G_{φ,ψ}`, Grunsky
//! matrices and Hilbert–Schmidt diagnostics.
//!
//! `F_φ(z,w) = φ'(z)φ'(w)/(φ(z)-φ(w))² - 1/(z-w)²` is assembled as
//! `(φ'(z)φ'(w)/q(z,w)² - 1)/(z-w)²` with `q` the divided difference of `φ`.
//! The two divisions by `(z - w)` shrink the trusted region, so the pipeline
//! runs on a padded `(2N+1) x (2N+1)` grid and returns a fully trusted
//! `N x N` block.

use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::diskmap::{dm_compose_with_cutoff, dm_disjoint, dm_to_exact_series, dm_to_series, DiskMap, DiskMapError, Verdict};
use crate::scalar::{Real, Scalar};
use crate::series::{divide_by_diag_scaled, divided_difference, substitute, SeriesError, TruncatedSeries1, TruncatedSeries2};

/// Side of the low-degree block compared by dual-cutoff convergence checks.
pub const CONVERGENCE_WINDOW: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CocycleError {
    #[error("cocycle is not holomorphic across the diagonal: {0}")]
    NotHolomorphicAcrossDiagonal(SeriesError),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("degree bound {bound} exceeds trusted degree {trusted}")]
    Usage { bound: usize, trusted: usize },
    #[error("cutoff must be at least 1")]
    EmptyCutoff,
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    DiskMap(#[from] DiskMapError),
}

fn bivariate_product<S: Scalar>(u: &TruncatedSeries1<S>, v: &TruncatedSeries1<S>, n: usize) -> TruncatedSeries2<S> {
    TruncatedSeries2::from_fn(n, 2 * n - 2, |i, j| u.coeff(i) * v.coeff(j))
}

fn symmetrize<S: Scalar>(p: &TruncatedSeries2<S>) -> TruncatedSeries2<S> {
    let half = S::from_ratio(1, 2);
    TruncatedSeries2::from_fn(p.cutoff(), p.valid_total_degree(), |i, j| (p.at(i, j) + p.at(j, i)) * half.clone())
}

/// Taylor coefficients `d_{n,m}` of `F_φ` on an `n x n` grid, from the
/// Taylor series of `φ`. The series must have at least `2n + 2` coefficients
/// (missing ones are treated as zero, which is exact for polynomial maps).
pub fn cocycle_f_series<S: Scalar>(phi: &TruncatedSeries1<S>, n: usize) -> Result<TruncatedSeries2<S>, CocycleError> {
    if n == 0 {
        return Err(CocycleError::EmptyCutoff);
    }
    let m = 2 * n + 1;
    let f = phi.with_cutoff(m + 1);
    let q = divided_difference(&f);
    let d = f.derivative().with_cutoff(m);
    let num = bivariate_product(&d, &d, m);
    let a = num.try_mul(&q.try_mul(&q)?.reciprocal()?)?;
    let scale = a.max_abs().max(1.0);
    let p = a.try_sub(&TruncatedSeries2::from_fn(m, 2 * m - 2, |i, j| if i + j == 0 { S::one() } else { S::zero() }))?;
    let once = divide_by_diag_scaled(&p, scale).map_err(CocycleError::NotHolomorphicAcrossDiagonal)?;
    let twice = divide_by_diag_scaled(&once, scale).map_err(CocycleError::NotHolomorphicAcrossDiagonal)?;
    Ok(symmetrize(&twice.crop(n)))
}

/// Coefficients `d_{n,m}` of `F_φ` on a fully trusted `n x n` grid.
pub fn cocycle_f<R: Real>(phi: &DiskMap<R>, n: usize) -> Result<TruncatedSeries2<Complex<R>>, CocycleError> {
    if matches!(phi, DiskMap::Affine { .. }) {
        return Ok(TruncatedSeries2::zero(n));
    }
    cocycle_f_series(&dm_to_series(phi, 2 * n + 2), n)
}

/// `F_φ` in exact rational arithmetic on the exact binary values of the
/// `f64` Taylor data of `φ`.
pub fn cocycle_f_exact(phi: &DiskMap<f64>, n: usize) -> Result<TruncatedSeries2<Complex<BigRational>>, CocycleError> {
    cocycle_f_series(&dm_to_exact_series(phi, 2 * n + 2), n)
}

/// Coefficients of `φ'(z)ψ'(w)/(φ(z)-ψ(w))²` from Taylor series with at least `2n` terms.
pub fn cocycle_g_series<S: Scalar>(
    phi: &TruncatedSeries1<S>,
    psi: &TruncatedSeries1<S>,
    n: usize,
) -> Result<TruncatedSeries2<S>, CocycleError> {
    if n == 0 {
        return Err(CocycleError::EmptyCutoff);
    }
    let f = phi.with_cutoff(2 * n);
    let g = psi.with_cutoff(2 * n);
    let diff = TruncatedSeries2::from_fn(n, 2 * n - 2, |i, j| match (i, j) {
        (0, 0) => f.coeff(0) - g.coeff(0),
        (i, 0) => f.coeff(i),
        (0, j) => -g.coeff(j),
        _ => S::zero(),
    });
    if diff.at(0, 0).is_zero() {
        return Err(CocycleError::Configuration("maps agree at the origin".into()));
    }
    let num = bivariate_product(&f.derivative(), &g.derivative(), n);
    Ok(num.try_mul(&diff.try_mul(&diff)?.reciprocal()?)?)
}

/// Closed form `g_{n,m} = (-1)^n r^{n+1} s^{m+1} (n+m+1)!/(n! m!) (a-b)^{-n-m-2}`.
pub fn affine_g<R: Real>(a: Complex<R>, r: R, b: Complex<R>, s: R, n: usize) -> TruncatedSeries2<Complex<R>> {
    let inv = Complex::<R>::one() / (a - b);
    // Entries are built from `(n+m+1)!/(n! m!) = (n+m+1) C(n+m, n)` and running powers.
    let mut rp = vec![R::one(); n + 1];
    let mut sp = vec![R::one(); n + 1];
    for k in 1..=n {
        rp[k] = rp[k - 1] * r;
        sp[k] = sp[k - 1] * s;
    }
    let mut ip = vec![Complex::<R>::one(); 2 * n + 1];
    for k in 1..=2 * n {
        ip[k] = ip[k - 1] * inv;
    }
    TruncatedSeries2::from_fn(n, 2 * n - 2, |i, j| {
        let k = i + j;
        let sign = if i % 2 == 0 { R::one() } else { -R::one() };
        let comb = R::lit((k + 1) as f64) * crate::scalar::binomial::<R>(k, i);
        ip[k + 2] * (sign * comb * rp[i + 1] * sp[j + 1])
    })
}

fn require_separated<R: Real>(phi: &DiskMap<R>, psi: &DiskMap<R>) -> Result<(), CocycleError> {
    let d = dm_disjoint(phi, psi, false);
    if d.verdict == Verdict::Overlapping {
        return Err(CocycleError::Configuration("images overlap".into()));
    }
    Ok(())
}

/// Coefficients `g_{n,m}` of `G_{φ,ψ}` on a fully trusted `n x n` grid.
pub fn cocycle_g<R: Real>(phi: &DiskMap<R>, psi: &DiskMap<R>, n: usize) -> Result<TruncatedSeries2<Complex<R>>, CocycleError> {
    require_separated(phi, psi)?;
    if let (DiskMap::Affine { a, r }, DiskMap::Affine { a: b, r: s }) = (phi, psi) {
        if n == 0 {
            return Err(CocycleError::EmptyCutoff);
        }
        return Ok(affine_g(*a, *r, *b, *s, n));
    }
    cocycle_g_series(&dm_to_series(phi, 2 * n), &dm_to_series(psi, 2 * n), n)
}

/// General-series path for `G`, bypassing the affine closed form.
pub fn cocycle_g_general<R: Real>(phi: &DiskMap<R>, psi: &DiskMap<R>, n: usize) -> Result<TruncatedSeries2<Complex<R>>, CocycleError> {
    require_separated(phi, psi)?;
    cocycle_g_series(&dm_to_series(phi, 2 * n), &dm_to_series(psi, 2 * n), n)
}

/// Which kernel a Grunsky matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GrunskySource {
    F,
    G,
}

/// `f_{n,m} = p_{n,m}/√((n+1)(m+1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrunskyMatrix<R: Real> {
    pub entries: TruncatedSeries2<Complex<R>>,
    pub source: GrunskySource,
}

impl<R: Real> GrunskyMatrix<R> {
    pub fn cutoff(&self) -> usize {
        self.entries.cutoff()
    }

    pub fn valid_total_degree(&self) -> usize {
        self.entries.valid_total_degree()
    }

    pub fn at(&self, i: usize, j: usize) -> Complex<R> {
        self.entries.at(i, j)
    }
}

pub fn grunsky<R: Real>(p: &TruncatedSeries2<Complex<R>>, source: GrunskySource) -> GrunskyMatrix<R> {
    let entries =
        TruncatedSeries2::from_fn(p.cutoff(), p.valid_total_degree(), |i, j| p.at(i, j) / R::lit(((i + 1) * (j + 1)) as f64).sqrt());
    GrunskyMatrix { entries, source }
}

/// `Σ_{n+m ≤ bound} |f_{n,m}|²` over the grid.
pub fn hs_norm_sq<R: Real>(g: &GrunskyMatrix<R>, degree_bound: usize) -> Result<R, CocycleError> {
    if degree_bound > g.valid_total_degree() {
        return Err(CocycleError::Usage { bound: degree_bound, trusted: g.valid_total_degree() });
    }
    Ok(g.entries.trusted_entries().filter(|(i, j, _)| i + j <= degree_bound).fold(R::zero(), |acc, (_, _, v)| acc + v.norm_sqr()))
}

/// Partial sums `S_k = Σ_{n+m ≤ k} |f_{n,m}|²`.
///
/// Only anti-diagonals lying completely inside the grid are reported
/// (`k ≤ min(valid, N-1)`); clipped anti-diagonals would make a divergent
/// profile look convergent.
pub fn hs_partial_profile<R: Real>(g: &GrunskyMatrix<R>) -> Vec<(usize, R)> {
    let last = g.valid_total_degree().min(g.cutoff() - 1);
    let mut sum = R::zero();
    (0..=last)
        .map(|k| {
            for i in 0..=k {
                sum += g.at(i, k - i).norm_sqr();
            }
            (k, sum)
        })
        .collect()
}

/// Labeled Hilbert–Schmidt evidence from a finite profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HsVerdict {
    Converged,
    Diverging,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HsAssessment {
    pub verdict: HsVerdict,
    /// Geometric-mean ratio of successive anti-diagonal contributions over the upper half of the profile.
    pub ratio_estimate: f64,
    /// `(S_K - S_{K/2}) / (S_{K/2} - S_{K/4})`.
    pub increment_ratio: f64,
    pub partial_sum: f64,
}

/// Ratio-test verdict for a profile of partial sums.
pub fn hs_assess(profile: &[(usize, f64)]) -> HsAssessment {
    let len = profile.len();
    let total = profile.last().map_or(0.0, |p| p.1);
    let terms: Vec<f64> = (0..len).map(|k| profile[k].1 - if k > 0 { profile[k - 1].1 } else { 0.0 }).collect();
    if total <= 1e-28 {
        return HsAssessment { verdict: HsVerdict::Converged, ratio_estimate: 0.0, increment_ratio: 0.0, partial_sum: total };
    }
    if len < 9 {
        return HsAssessment { verdict: HsVerdict::Inconclusive, ratio_estimate: f64::NAN, increment_ratio: f64::NAN, partial_sum: total };
    }
    let last = len - 1;
    let (k1, k2) = (last / 4, last / 2);
    let ratio_estimate = if terms[k2] > 0.0 { (terms[last].max(0.0) / terms[k2]).powf(1.0 / (last - k2) as f64) } else { 0.0 };
    let d1 = profile[k2].1 - profile[k1].1;
    let d2 = profile[last].1 - profile[k2].1;
    let increment_ratio = if d1 > 0.0 { d2 / d1 } else { 0.0 };
    let verdict = if ratio_estimate <= 0.95 || d2 <= 1e-15 * total {
        HsVerdict::Converged
    } else if ratio_estimate >= 0.97 && increment_ratio >= 0.9 {
        HsVerdict::Diverging
    } else {
        HsVerdict::Inconclusive
    };
    HsAssessment { verdict, ratio_estimate, increment_ratio, partial_sum: total }
}

/// Discrepancy between the two sides of a cocycle identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CocycleReport {
    pub cutoff: usize,
    /// Largest entrywise discrepancy over the trusted grid.
    pub max_discrepancy: f64,
    /// Largest entrywise discrepancy over the fixed low-degree window.
    pub window_discrepancy: f64,
    /// Whether the substitution was triangular, making the check exact at truncation.
    pub triangular: bool,
}

fn compare<R: Real>(lhs: &TruncatedSeries2<Complex<R>>, rhs: &TruncatedSeries2<Complex<R>>, triangular: bool) -> CocycleReport {
    let window = CONVERGENCE_WINDOW.min(lhs.cutoff());
    CocycleReport {
        cutoff: lhs.cutoff(),
        max_discrepancy: lhs.max_abs_diff(rhs),
        window_discrepancy: lhs.crop(window).max_abs_diff(&rhs.crop(window)),
        triangular,
    }
}

fn jacobian<R: Real>(u: &DiskMap<R>, v: &DiskMap<R>, n: usize) -> TruncatedSeries2<Complex<R>> {
    let du = dm_to_series(u, n + 1).derivative().with_cutoff(n);
    let dv = dm_to_series(v, n + 1).derivative().with_cutoff(n);
    bivariate_product(&du, &dv, n)
}

/// `K(u(z), v(w)) u'(z) v'(w)` for a kernel grid `K`.
fn pullback<R: Real>(
    k: &TruncatedSeries2<Complex<R>>,
    u: &DiskMap<R>,
    v: &DiskMap<R>,
    n: usize,
) -> Result<TruncatedSeries2<Complex<R>>, CocycleError> {
    let sub = substitute(k, &dm_to_series(u, n), &dm_to_series(v, n))?;
    Ok(sub.try_mul(&jacobian(u, v, n))?)
}

fn is_triangular<R: Real>(phi: &DiskMap<R>) -> bool {
    phi.at_origin() == Complex::zero()
}

/// Checks `F_{f1∘f2}(z,w) = F_{f1}(f2(z),f2(w)) f2'(z) f2'(w) + F_{f2}(z,w)`.
pub fn verify_f_cocycle<R: Real>(f1: &DiskMap<R>, f2: &DiskMap<R>, n: usize) -> Result<CocycleReport, CocycleError> {
    let comp = dm_compose_with_cutoff(f1, f2, 2 * n + 2)?;
    let lhs = cocycle_f(&comp, n)?;
    let rhs = pullback(&cocycle_f(f1, n)?, f2, f2, n)?.try_add(&cocycle_f(f2, n)?)?;
    Ok(compare(&lhs, &rhs, is_triangular(f2)))
}

/// Reports for both pair-kernel identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GCocycleReport {
    /// `G_{f∘g1, f∘g2} = F_f(g1(z), g2(w)) g1' g2' + G_{g1,g2}`.
    pub post: CocycleReport,
    /// `G_{g1∘f1, g2∘f2} = G_{g1,g2}(f1(z), f2(w)) f1' f2'`.
    pub pre: CocycleReport,
}

/// Checks both pair-kernel cocycle identities.
pub fn verify_g_cocycles<R: Real>(
    f: &DiskMap<R>,
    g1: &DiskMap<R>,
    g2: &DiskMap<R>,
    f1: &DiskMap<R>,
    f2: &DiskMap<R>,
    n: usize,
) -> Result<GCocycleReport, CocycleError> {
    let cut = 2 * n + 2;
    let fg1 = dm_compose_with_cutoff(f, g1, cut)?;
    let fg2 = dm_compose_with_cutoff(f, g2, cut)?;
    let lhs = cocycle_g(&fg1, &fg2, n)?;
    let g12 = cocycle_g(g1, g2, n)?;
    let rhs = pullback(&cocycle_f(f, n)?, g1, g2, n)?.try_add(&g12)?;
    let f_linear = matches!(f, DiskMap::Mobius { .. } | DiskMap::Affine { .. });
    let post = compare(&lhs, &rhs, f_linear);

    let g1f1 = dm_compose_with_cutoff(g1, f1, cut)?;
    let g2f2 = dm_compose_with_cutoff(g2, f2, cut)?;
    let lhs = cocycle_g(&g1f1, &g2f2, n)?;
    let rhs = pullback(&g12, f1, f2, n)?;
    let pre = compare(&lhs, &rhs, is_triangular(f1) && is_triangular(f2));
    Ok(GCocycleReport { post, pre })
}
