//! Holomorphic embeddings of the unit disk, their composition, the conjugation
//! automorphism `J(φ)(z) = conj(φ(conj z))`, and disjointness predicates.

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{Real, Scalar};
use crate::series::{s_compose, s_mul, s_reciprocal, SeriesError, TruncatedSeries1};

/// Cutoff used when a mixed composition has no series operand to size it.
pub const DEFAULT_MIXED_CUTOFF: usize = 64;
/// Number of boundary samples used by sampled checks.
pub const BOUNDARY_SAMPLES: usize = 512;
/// Radius of the sampled boundary circle.
pub const BOUNDARY_RADIUS: f64 = 1.0 - 1e-6;

const TOUCH_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiskMapError {
    #[error("point {0} lies outside the open unit disk")]
    Domain(f64),
    #[error("Möbius parameter must satisfy |alpha| < 1, got {0}")]
    MobiusParameter(f64),
    #[error("affine map needs 0 < r and |a| + r <= 1, got |a| = {a}, r = {r}")]
    AffineParameter { a: f64, r: f64 },
    #[error("separation needs two affine maps")]
    NotAffine,
    #[error("degenerate configuration: coincident centers")]
    Degenerate,
    #[error("maps {i} and {j} are not disjoint ({verdict:?})")]
    NotDisjoint { i: usize, j: usize, verdict: Verdict },
    #[error("map record has invalid data: {0}")]
    Record(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Results of constructor-time sampled checks for series maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleCheck {
    /// Largest sampled `|φ|` on the boundary circle.
    pub max_modulus: f64,
    /// Smallest sampled `|φ'|` on the boundary circle.
    pub min_derivative: f64,
}

impl SampleCheck {
    /// Whether the sampled image stays inside the disk with a nonvanishing derivative.
    pub fn plausible(&self) -> bool {
        self.max_modulus < 1.0 && self.min_derivative > 0.0
    }
}

/// A holomorphic embedding of the disk.
#[derive(Debug, Clone, PartialEq)]
pub enum DiskMap<R: Real> {
    /// `e^{iθ}(z - α)/(1 - conj(α) z)`.
    Mobius { theta: R, alpha: Complex<R> },
    /// `B_{a,r}(z) = r z + a`.
    Affine { a: Complex<R>, r: R },
    /// A map known through its Taylor coefficients at the origin.
    ///
    /// Membership in the embedding operad is asserted by the caller through
    /// `margin`; `check` only records sampled evidence.
    Series { series: TruncatedSeries1<Complex<R>>, margin: R, check: SampleCheck },
}

impl<R: Real> DiskMap<R> {
    pub fn mobius(theta: R, alpha: Complex<R>) -> Result<Self, DiskMapError> {
        if alpha.norm() >= R::one() || !alpha.norm().is_finite() || !theta.is_finite() {
            return Err(DiskMapError::MobiusParameter(alpha.norm().as_f64()));
        }
        Ok(Self::Mobius { theta, alpha })
    }

    pub fn affine(a: Complex<R>, r: R) -> Result<Self, DiskMapError> {
        let ok = r > R::zero() && a.norm() + r <= R::one() + R::lit(1e-15);
        if !ok || !a.norm().is_finite() {
            return Err(DiskMapError::AffineParameter { a: a.norm().as_f64(), r: r.as_f64() });
        }
        Ok(Self::Affine { a, r })
    }

    /// Series map with sampled boundary checks recorded (never enforced).
    pub fn series(series: TruncatedSeries1<Complex<R>>, margin: R) -> Self {
        let deriv = series.derivative();
        let mut max_modulus = 0.0f64;
        let mut min_derivative = f64::INFINITY;
        for z in boundary_points::<R>() {
            max_modulus = max_modulus.max(series.eval(&z).norm().as_f64());
            min_derivative = min_derivative.min(deriv.eval(&z).norm().as_f64());
        }
        Self::Series { series, margin, check: SampleCheck { max_modulus, min_derivative } }
    }

    pub fn identity() -> Self {
        Self::Mobius { theta: R::zero(), alpha: Complex::zero() }
    }

    pub fn is_parametric(&self) -> bool {
        !matches!(self, Self::Series { .. })
    }

    /// `φ(0)`.
    pub fn at_origin(&self) -> Complex<R> {
        match self {
            Self::Mobius { theta, alpha } => -Complex::from_polar(R::one(), *theta) * *alpha,
            Self::Affine { a, .. } => *a,
            Self::Series { series, .. } => series.coeff(0),
        }
    }

    /// Pointwise value without domain checks.
    pub fn value(&self, z: Complex<R>) -> Complex<R> {
        match self {
            Self::Mobius { theta, alpha } => {
                Complex::from_polar(R::one(), *theta) * (z - *alpha) / (Complex::<R>::one() - alpha.conj() * z)
            }
            Self::Affine { a, r } => z * *r + *a,
            Self::Series { series, .. } => series.eval(&z),
        }
    }

    /// Pointwise derivative without domain checks.
    pub fn derivative(&self, z: Complex<R>) -> Complex<R> {
        match self {
            Self::Mobius { theta, alpha } => {
                let d = Complex::<R>::one() - alpha.conj() * z;
                Complex::from_polar(R::one(), *theta) * (R::one() - alpha.norm_sqr()) / (d * d)
            }
            Self::Affine { r, .. } => Complex::new(*r, R::zero()),
            Self::Series { series, .. } => series.derivative().eval(&z),
        }
    }

    fn natural_cutoff(&self) -> Option<usize> {
        match self {
            Self::Series { series, .. } => Some(series.cutoff()),
            _ => None,
        }
    }

    /// Image disk `(center, radius)` for parametric maps.
    fn image_disk(&self) -> Option<(Complex<R>, R)> {
        match self {
            Self::Mobius { .. } => Some((Complex::zero(), R::one())),
            Self::Affine { a, r } => Some((*a, *r)),
            Self::Series { .. } => None,
        }
    }
}

fn boundary_points<R: Real>() -> impl Iterator<Item = Complex<R>> {
    (0..BOUNDARY_SAMPLES).map(|k| {
        let t = std::f64::consts::TAU * k as f64 / BOUNDARY_SAMPLES as f64;
        Complex::from_polar(R::lit(BOUNDARY_RADIUS), R::lit(t))
    })
}

/// `φ(z)`, rejecting points outside the open disk.
pub fn dm_eval<R: Real>(phi: &DiskMap<R>, z: Complex<R>) -> Result<Complex<R>, DiskMapError> {
    if z.norm() >= R::one() {
        return Err(DiskMapError::Domain(z.norm().as_f64()));
    }
    Ok(phi.value(z))
}

/// Taylor coefficients of `φ` at the origin up to degree `n - 1`.
pub fn dm_to_series<R: Real>(phi: &DiskMap<R>, n: usize) -> TruncatedSeries1<Complex<R>> {
    let n = n.max(1);
    match phi {
        DiskMap::Mobius { theta, alpha } => {
            let rot = Complex::from_polar(R::one(), *theta);
            let ab = alpha.conj();
            let scale = R::one() - alpha.norm_sqr();
            let mut coeffs = Vec::with_capacity(n);
            coeffs.push(-rot * alpha);
            let mut power = Complex::<R>::one();
            for _ in 1..n {
                coeffs.push(rot * power * scale);
                power *= ab;
            }
            TruncatedSeries1::new(coeffs).expect("finite Möbius coefficients")
        }
        DiskMap::Affine { a, r } => TruncatedSeries1::from_prefix(&[*a, Complex::new(*r, R::zero())], n).expect("positive cutoff"),
        DiskMap::Series { series, .. } => series.with_cutoff(n),
    }
}

/// Applies a parametric outer map to a series with exact series arithmetic.
fn apply_to_series<R: Real>(outer: &DiskMap<R>, inner: &TruncatedSeries1<Complex<R>>) -> Result<TruncatedSeries1<Complex<R>>, SeriesError> {
    let n = inner.cutoff();
    match outer {
        DiskMap::Mobius { theta, alpha } => {
            let rot = Complex::from_polar(R::one(), *theta);
            let shifted = inner - &TruncatedSeries1::constant(*alpha, n);
            let denom = &TruncatedSeries1::constant(Complex::<R>::one(), n) - &inner.scale(&alpha.conj());
            Ok(s_mul(&shifted, &s_reciprocal(&denom)?)?.scale(&rot))
        }
        DiskMap::Affine { a, r } => Ok(&inner.scale(&Complex::new(*r, R::zero())) + &TruncatedSeries1::constant(*a, n)),
        DiskMap::Series { series, .. } => s_compose(&series.with_cutoff(n), inner),
    }
}

/// `φ ∘ ψ`, with mixed pairs sized by the larger series cutoff (default 64).
pub fn dm_compose<R: Real>(phi: &DiskMap<R>, psi: &DiskMap<R>) -> Result<DiskMap<R>, DiskMapError> {
    let cutoff = match (phi.natural_cutoff(), psi.natural_cutoff()) {
        (Some(a), Some(b)) => a.max(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => DEFAULT_MIXED_CUTOFF,
    };
    dm_compose_with_cutoff(phi, psi, cutoff)
}

/// `φ ∘ ψ`; a series result uses the given cutoff.
pub fn dm_compose_with_cutoff<R: Real>(phi: &DiskMap<R>, psi: &DiskMap<R>, cutoff: usize) -> Result<DiskMap<R>, DiskMapError> {
    match (phi, psi) {
        (DiskMap::Affine { a, r }, DiskMap::Affine { a: b, r: s }) => Ok(DiskMap::Affine { a: b * *r + a, r: *r * *s }),
        (DiskMap::Mobius { .. }, DiskMap::Mobius { .. }) => {
            let m = mobius_matrix(phi);
            let n = mobius_matrix(psi);
            let p = [m[0] * n[0] + m[1] * n[2], m[0] * n[1] + m[1] * n[3], m[2] * n[0] + m[3] * n[2], m[2] * n[1] + m[3] * n[3]];
            let alpha = -p[1] / p[0];
            let theta = (p[0] / p[3]).arg();
            DiskMap::mobius(theta, alpha)
        }
        _ => {
            let inner = dm_to_series(psi, cutoff);
            let series = apply_to_series(phi, &inner)?;
            let margin = match (phi, psi) {
                (DiskMap::Series { margin, .. }, _) | (_, DiskMap::Series { margin, .. }) => *margin,
                _ => R::zero(),
            };
            Ok(DiskMap::series(series, margin))
        }
    }
}

/// Matrix `[[a, b], [c, d]]` with `φ(z) = (a z + b)/(c z + d)`.
fn mobius_matrix<R: Real>(phi: &DiskMap<R>) -> [Complex<R>; 4] {
    match phi {
        DiskMap::Mobius { theta, alpha } => {
            let half = Complex::from_polar(R::one(), *theta / R::lit(2.0));
            let inv = half.conj();
            [half, -half * alpha, -inv * alpha.conj(), inv]
        }
        _ => unreachable!("only Möbius maps have matrices here"),
    }
}

/// `J(φ)(z) = conj(φ(conj z))`.
pub fn dm_conjugate<R: Real>(phi: &DiskMap<R>) -> DiskMap<R> {
    match phi {
        DiskMap::Mobius { theta, alpha } => DiskMap::Mobius { theta: -*theta, alpha: alpha.conj() },
        DiskMap::Affine { a, r } => DiskMap::Affine { a: a.conj(), r: *r },
        DiskMap::Series { series, margin, check } => {
            let coeffs = series.coeffs().iter().map(|c| c.conj()).collect();
            DiskMap::Series { series: TruncatedSeries1::new(coeffs).expect("finite"), margin: *margin, check: *check }
        }
    }
}

/// Outcome of a disjointness test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Disjoint,
    Touching,
    Overlapping,
    Unknown,
}

/// How a verdict was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evidence {
    Analytic,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Disjointness {
    pub verdict: Verdict,
    pub evidence: Evidence,
}

/// Disjointness of the images of two maps.
///
/// With `closure = false` the open images are compared, so tangent round
/// images count as disjoint; with `closure = true` they are `Touching`.
pub fn dm_disjoint<R: Real>(phi: &DiskMap<R>, psi: &DiskMap<R>, closure: bool) -> Disjointness {
    if let (Some((c1, r1)), Some((c2, r2))) = (phi.image_disk(), psi.image_disk()) {
        let d = (c1 - c2).norm().as_f64();
        let sum = (r1 + r2).as_f64();
        let verdict = if (d - sum).abs() <= TOUCH_TOL * sum.max(1.0) {
            if closure {
                Verdict::Touching
            } else {
                Verdict::Disjoint
            }
        } else if d > sum {
            Verdict::Disjoint
        } else {
            Verdict::Overlapping
        };
        return Disjointness { verdict, evidence: Evidence::Analytic };
    }
    Disjointness { verdict: sampled_disjoint(phi, psi, closure), evidence: Evidence::Sampled }
}

type Pt = (f64, f64);

fn boundary_polygon<R: Real>(phi: &DiskMap<R>) -> Vec<Pt> {
    boundary_points::<R>()
        .map(|z| {
            let w = phi.value(z);
            (w.re.as_f64(), w.im.as_f64())
        })
        .collect()
}

fn point_in_polygon(p: Pt, poly: &[Pt]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > p.1) != (yj > p.1) && p.0 < (xj - xi) * (p.1 - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn convex_hull(mut pts: Vec<Pt>) -> Vec<Pt> {
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Pt, a: Pt, b: Pt| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut lower: Vec<Pt> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Pt> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Largest gap between the projections of two convex hulls along any hull edge normal.
fn hull_gap(a: &[Pt], b: &[Pt]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for poly in [a, b] {
        for i in 0..poly.len() {
            let p = poly[i];
            let q = poly[(i + 1) % poly.len()];
            let (nx, ny) = (q.1 - p.1, p.0 - q.0);
            let len = nx.hypot(ny);
            if len == 0.0 {
                continue;
            }
            let proj = |pts: &[Pt]| {
                pts.iter()
                    .map(|v| (v.0 * nx + v.1 * ny) / len)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
            };
            let (alo, ahi) = proj(a);
            let (blo, bhi) = proj(b);
            best = best.max((blo - ahi).max(alo - bhi));
        }
    }
    best
}

fn sampled_disjoint<R: Real>(phi: &DiskMap<R>, psi: &DiskMap<R>, closure: bool) -> Verdict {
    let pa = boundary_polygon(phi);
    let pb = boundary_polygon(psi);
    let ca = phi.at_origin();
    let cb = psi.at_origin();
    let ca = (ca.re.as_f64(), ca.im.as_f64());
    let cb = (cb.re.as_f64(), cb.im.as_f64());
    if point_in_polygon(ca, &pb) || point_in_polygon(cb, &pa) {
        return Verdict::Overlapping;
    }
    if pa.iter().any(|&p| point_in_polygon(p, &pb)) || pb.iter().any(|&p| point_in_polygon(p, &pa)) {
        return Verdict::Overlapping;
    }
    let gap = hull_gap(&convex_hull(pa), &convex_hull(pb));
    if gap > 1e-9 {
        Verdict::Disjoint
    } else if gap > -1e-9 {
        if closure {
            Verdict::Touching
        } else {
            Verdict::Disjoint
        }
    } else {
        Verdict::Unknown
    }
}

/// `σ = (r + s)/|a - b|` for two affine maps.
pub fn separation_sigma<R: Real>(phi: &DiskMap<R>, psi: &DiskMap<R>) -> Result<R, DiskMapError> {
    match (phi, psi) {
        (DiskMap::Affine { a, r }, DiskMap::Affine { a: b, r: s }) => {
            let d = (a - b).norm();
            if d == R::zero() {
                return Err(DiskMapError::Degenerate);
            }
            Ok((*r + *s) / d)
        }
        _ => Err(DiskMapError::NotAffine),
    }
}

/// Membership level demanded from a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    /// Open images pairwise disjoint; tangent images allowed.
    Embedded,
    /// Closed images pairwise disjoint; tangent images rejected.
    Separated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PairEvidence {
    pub i: usize,
    pub j: usize,
    pub verdict: Verdict,
    pub evidence: Evidence,
}

/// An ordered tuple of disk maps with pairwise disjoint images.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration<R: Real> {
    maps: Vec<DiskMap<R>>,
    evidence: Vec<PairEvidence>,
}

impl<R: Real> Configuration<R> {
    pub fn new(maps: Vec<DiskMap<R>>, membership: Membership) -> Result<Self, DiskMapError> {
        let closure = membership == Membership::Separated;
        let mut evidence = Vec::new();
        for i in 0..maps.len() {
            for j in i + 1..maps.len() {
                let d = dm_disjoint(&maps[i], &maps[j], closure);
                if d.verdict != Verdict::Disjoint {
                    return Err(DiskMapError::NotDisjoint { i, j, verdict: d.verdict });
                }
                evidence.push(PairEvidence { i, j, verdict: d.verdict, evidence: d.evidence });
            }
        }
        Ok(Self { maps, evidence })
    }

    pub fn maps(&self) -> &[DiskMap<R>] {
        &self.maps
    }

    pub fn evidence(&self) -> &[PairEvidence] {
        &self.evidence
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// Whether every pairwise claim is analytic rather than sampled.
    pub fn fully_analytic(&self) -> bool {
        self.evidence.iter().all(|e| e.evidence == Evidence::Analytic)
    }

    /// The configuration with `J` applied to every map.
    pub fn conjugate(&self) -> Self {
        Self { maps: self.maps.iter().map(dm_conjugate).collect(), evidence: self.evidence.clone() }
    }
}

/// JSON representation of a map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MapRecord {
    Mobius {
        theta: f64,
        alpha: [f64; 2],
    },
    Affine {
        a: [f64; 2],
        r: f64,
    },
    Series {
        coeffs: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        margin: Option<f64>,
    },
}

impl MapRecord {
    pub fn to_map(&self) -> Result<DiskMap<f64>, DiskMapError> {
        let c = |v: [f64; 2]| Complex::new(v[0], v[1]);
        match self {
            MapRecord::Mobius { theta, alpha } => DiskMap::mobius(*theta, c(*alpha)),
            MapRecord::Affine { a, r } => DiskMap::affine(c(*a), *r),
            MapRecord::Series { coeffs, margin } => {
                let series =
                    TruncatedSeries1::new(coeffs.iter().map(|&v| c(v)).collect()).map_err(|e| DiskMapError::Record(e.to_string()))?;
                Ok(DiskMap::series(series, margin.unwrap_or(0.0)))
            }
        }
    }

    pub fn from_map(phi: &DiskMap<f64>) -> Self {
        let p = |z: Complex<f64>| [z.re, z.im];
        match phi {
            DiskMap::Mobius { theta, alpha } => MapRecord::Mobius { theta: *theta, alpha: p(*alpha) },
            DiskMap::Affine { a, r } => MapRecord::Affine { a: p(*a), r: *r },
            DiskMap::Series { series, margin, .. } => {
                MapRecord::Series { coeffs: series.coeffs().iter().map(|&z| p(z)).collect(), margin: Some(*margin) }
            }
        }
    }
}

/// Exact rational Taylor coefficients of `φ`, converted from the `f64` series.
pub fn dm_to_exact_series(phi: &DiskMap<f64>, n: usize) -> TruncatedSeries1<Complex<num_rational::BigRational>> {
    let s = dm_to_series(phi, n);
    let coeffs = s.coeffs().iter().map(|z| crate::scalar::exact_complex(z.re, z.im)).collect();
    TruncatedSeries1::new(coeffs).expect("finite")
}

/// Converts the Taylor data of a map between real fields.
pub fn dm_series_as<S: Scalar, R: Real>(phi: &DiskMap<R>, n: usize, conv: impl Fn(Complex<R>) -> S) -> TruncatedSeries1<S> {
    let s = dm_to_series(phi, n);
    TruncatedSeries1::new(s.coeffs().iter().map(|&z| conv(z)).collect()).expect("finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn samples() -> Vec<Complex64> {
        (0..20).map(|k| Complex64::from_polar(0.05 + 0.04 * k as f64, 0.7 * k as f64)).collect()
    }

    #[test]
    fn eval_examples() {
        let b = DiskMap::affine(c(0.5, 0.0), 0.2).unwrap();
        assert_eq!(dm_eval(&b, c(0.0, 0.0)).unwrap(), c(0.5, 0.0));
        let id = DiskMap::<f64>::identity();
        assert_eq!(dm_eval(&id, c(0.3, -0.2)).unwrap(), c(0.3, -0.2));
        let m = DiskMap::mobius(0.0, c(0.3, 0.0)).unwrap();
        assert!(dm_eval(&m, c(0.3, 0.0)).unwrap().norm() < 1e-16);
        assert!(matches!(dm_eval(&m, c(1.0, 0.0)), Err(DiskMapError::Domain(_))));
    }

    #[test]
    fn constructors_validate() {
        assert!(DiskMap::mobius(0.0, c(1.0, 0.0)).is_err());
        assert!(DiskMap::affine(c(0.7, 0.0), 0.4).is_err());
        assert!(DiskMap::affine(c(0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn affine_composition_is_closed() {
        let f = DiskMap::affine(c(0.1, 0.2), 0.5).unwrap();
        let g = DiskMap::affine(c(-0.3, 0.1), 0.4).unwrap();
        assert_eq!(dm_compose(&f, &g).unwrap(), DiskMap::Affine { a: c(-0.3, 0.1) * 0.5 + c(0.1, 0.2), r: 0.2 });
    }

    #[test]
    fn mobius_composition_matches_pointwise() {
        let f = DiskMap::mobius(0.7, c(0.3, -0.4)).unwrap();
        let g = DiskMap::mobius(-1.9, c(-0.5, 0.2)).unwrap();
        let h = dm_compose(&f, &g).unwrap();
        assert!(matches!(h, DiskMap::Mobius { .. }));
        for z in samples() {
            assert!((h.value(z) - f.value(g.value(z))).norm() < 1e-12);
        }
        let fid = dm_compose(&f, &DiskMap::identity()).unwrap();
        assert!((fid.value(c(0.2, 0.1)) - f.value(c(0.2, 0.1))).norm() < 1e-15);
    }

    #[test]
    fn mixed_composition_becomes_series() {
        let f = DiskMap::mobius(0.4, c(0.2, 0.1)).unwrap();
        let g = DiskMap::affine(c(0.3, 0.0), 0.5).unwrap();
        let h = dm_compose(&f, &g).unwrap();
        match &h {
            DiskMap::Series { series, .. } => assert_eq!(series.cutoff(), DEFAULT_MIXED_CUTOFF),
            other => panic!("expected series, got {other:?}"),
        }
        for z in samples() {
            assert!((h.value(z) - f.value(g.value(z))).norm() < 1e-12);
        }
        let h2 = dm_compose(&g, &f).unwrap();
        for z in samples() {
            assert!((h2.value(z) - g.value(f.value(z))).norm() < 1e-10);
        }
    }

    #[test]
    fn conjugation_examples() {
        let m = DiskMap::mobius(0.9, c(0.3, 0.2)).unwrap();
        assert_eq!(dm_conjugate(&m), DiskMap::Mobius { theta: -0.9, alpha: c(0.3, -0.2) });
        for z in samples() {
            assert!((dm_conjugate(&m).value(z) - m.value(z.conj()).conj()).norm() < 1e-14);
        }
        let b = DiskMap::affine(c(0.2, 0.3), 0.1).unwrap();
        assert_eq!(dm_conjugate(&b), DiskMap::Affine { a: c(0.2, -0.3), r: 0.1 });
        assert_eq!(dm_conjugate(&dm_conjugate(&m)), m);
    }

    #[test]
    fn series_examples() {
        let b = DiskMap::affine(c(0.2, 0.3), 0.1).unwrap();
        assert_eq!(dm_to_series(&b, 4).coeffs(), &[c(0.2, 0.3), c(0.1, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let id = DiskMap::<f64>::identity();
        assert_eq!(dm_to_series(&id, 3).coeffs(), &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let m = DiskMap::mobius(0.0, c(0.3, 0.0)).unwrap();
        let s = dm_to_series(&m, 60);
        for n in 1..6 {
            assert!((s.coeff(n) - c(0.3f64.powi(n as i32 - 1) * 0.91, 0.0)).norm() < 1e-15);
        }
        for z in samples().into_iter().take(10) {
            assert!((s.eval(&z) - m.value(z)).norm() < 1e-12);
        }
    }

    #[test]
    fn disjointness_examples() {
        let f = DiskMap::affine(c(0.5, 0.0), 0.2).unwrap();
        let g = DiskMap::affine(c(-0.3, 0.0), 0.2).unwrap();
        assert_eq!(dm_disjoint(&f, &g, true).verdict, Verdict::Disjoint);
        let f = DiskMap::affine(c(0.4, 0.0), 0.4).unwrap();
        let g = DiskMap::affine(c(-0.4, 0.0), 0.4).unwrap();
        assert_eq!(dm_disjoint(&f, &g, true).verdict, Verdict::Touching);
        assert_eq!(dm_disjoint(&f, &g, false).verdict, Verdict::Disjoint);
        assert_eq!(dm_disjoint(&f, &f, false).verdict, Verdict::Overlapping);
        let m = DiskMap::mobius(0.3, c(0.1, 0.0)).unwrap();
        assert_eq!(dm_disjoint(&m, &g, false), Disjointness { verdict: Verdict::Overlapping, evidence: Evidence::Analytic });
    }

    #[test]
    fn sampled_disjointness_for_series_maps() {
        let m = DiskMap::mobius(0.3, c(0.1, 0.0)).unwrap();
        let left = DiskMap::affine(c(-0.5, 0.0), 0.3).unwrap();
        let right = DiskMap::affine(c(0.5, 0.0), 0.3).unwrap();
        let a = dm_compose(&left, &m).unwrap();
        let b = dm_compose(&right, &m).unwrap();
        assert_eq!(dm_disjoint(&a, &b, true), Disjointness { verdict: Verdict::Disjoint, evidence: Evidence::Sampled });
        assert_eq!(dm_disjoint(&a, &a, true).verdict, Verdict::Overlapping);
        assert_eq!(dm_disjoint(&a, &left, false).verdict, Verdict::Overlapping);
    }

    #[test]
    fn sigma_examples() {
        let s = |a: f64, r: f64, b: f64, t: f64| {
            separation_sigma(&DiskMap::affine(c(a, 0.0), r).unwrap(), &DiskMap::affine(c(b, 0.0), t).unwrap())
        };
        assert!((s(0.4, 0.2, -0.4, 0.2).unwrap() - 0.5).abs() < 1e-15);
        assert!((s(0.4, 0.4, -0.4, 0.4).unwrap() - 1.0).abs() < 1e-15);
        assert!((s(0.25, 0.1, -0.25, 0.3).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(s(0.1, 0.1, 0.1, 0.1), Err(DiskMapError::Degenerate));
    }

    #[test]
    fn configurations_enforce_membership() {
        let f = DiskMap::affine(c(0.4, 0.0), 0.4).unwrap();
        let g = DiskMap::affine(c(-0.4, 0.0), 0.4).unwrap();
        assert!(Configuration::new(vec![f.clone(), g.clone()], Membership::Embedded).is_ok());
        assert!(Configuration::new(vec![f, g], Membership::Separated).is_err());
        assert!(Configuration::<f64>::new(vec![], Membership::Separated).unwrap().is_empty());
    }

    #[test]
    fn record_round_trip() {
        let json = r#"{"kind":"mobius","theta":0.5,"alpha":[0.1,0.2]}"#;
        let rec: MapRecord = serde_json::from_str(json).unwrap();
        assert_eq!(rec.to_map().unwrap(), DiskMap::mobius(0.5, c(0.1, 0.2)).unwrap());
        assert!(serde_json::from_str::<MapRecord>(r#"{"kind":"affine","a":[0,0],"r":0.5,"theta":1}"#).is_err());
        let back = serde_json::to_string(&MapRecord::from_map(&DiskMap::affine(c(0.1, 0.0), 0.5).unwrap())).unwrap();
        assert_eq!(back, r#"{"kind":"affine","a":[0.1,0.0],"r":0.5}"#);
    }

    fn arb_mobius() -> impl Strategy<Value = DiskMap<f64>> {
        (-3.0f64..3.0, 0.0f64..0.9, -3.0f64..3.0).prop_map(|(t, r, a)| DiskMap::mobius(t, Complex64::from_polar(r, a)).unwrap())
    }

    proptest! {
        #[test]
        fn composition_is_associative(f in arb_mobius(), g in arb_mobius(), h in arb_mobius()) {
            let left = dm_compose(&dm_compose(&f, &g).unwrap(), &h).unwrap();
            let right = dm_compose(&f, &dm_compose(&g, &h).unwrap()).unwrap();
            for z in samples() {
                prop_assert!((left.value(z) - right.value(z)).norm() < 1e-10);
            }
        }

        #[test]
        fn conjugation_is_a_homomorphism(f in arb_mobius(), a in -0.4f64..0.4, r in 0.1f64..0.5) {
            let g = DiskMap::affine(c(a, 0.1), r).unwrap();
            let lhs = dm_conjugate(&dm_compose(&f, &g).unwrap());
            let rhs = dm_compose(&dm_conjugate(&f), &dm_conjugate(&g)).unwrap();
            for z in samples() {
                prop_assert!((lhs.value(z) - rhs.value(z)).norm() < 1e-10);
            }
        }

        #[test]
        fn images_stay_in_the_disk(f in arb_mobius()) {
            for k in 0..64 {
                let z = Complex64::from_polar(0.999 * (k % 8) as f64 / 8.0, k as f64);
                prop_assert!(f.value(z).norm() < 1.0);
            }
        }

        #[test]
        fn mobius_identity_of_the_kernel(f in arb_mobius(), z in (-0.6f64..0.6, -0.6f64..0.6), w in (-0.6f64..0.6, -0.6f64..0.6)) {
            let (z, w) = (c(z.0, z.1), c(w.0, w.1));
            let lhs = f.derivative(z) * f.derivative(w).conj() / (Complex64::new(1.0, 0.0) - f.value(z) * f.value(w).conj()).powi(2);
            let rhs = Complex64::new(1.0, 0.0) / (Complex64::new(1.0, 0.0) - z * w.conj()).powi(2);
            prop_assert!((lhs - rhs).norm() < 1e-9 * rhs.norm());
        }
    }
}
