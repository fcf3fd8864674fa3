//! Truncated bosonic Fock space over the Bergman space.
//!
//! States are stored in the orthonormal occupation basis `ê_ν`. Internally the
//! operators work on the polynomial picture, where the monomial `xᶥ`
//! (one variable per Bergman mode) stands for the symmetrized tensor
//! `Ŝ(e_0^{⊗ν_0} ⊗ e_1^{⊗ν_1} ⊗ …)`. In that picture merging is polynomial
//! multiplication, a one-body operator `M` is the linear substitution
//! `x_i ↦ Σ_j M_{j,i} x_j`, and a pair contraction with kernel `c` is
//! `½ Σ c_{ab} ∂_a ∂_b`. The conversion is `amp_ν = coeff_ν · √(Πν_i! / p!)`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bergman::{contraction_functional, pair_functional, rho_cl_matrix, ActionMatrix, BergmanError, BergmanVector};
use crate::cocycle::GrunskyMatrix;
use crate::diskmap::{Configuration, DiskMap};
use crate::scalar::{factorial, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("cutoff mismatch: {0}")]
    Cutoff(String),
    #[error("expected {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("oracle-scale limits exceeded: {0}")]
    OracleScale(String),
    #[error("parameter outside its domain: {0}")]
    Domain(String),
    #[error("invalid Fock record: {0}")]
    Record(String),
    #[error(transparent)]
    Bergman(#[from] BergmanError),
}

/// Occupation numbers `ν_0, ν_1, …` of the Bergman modes.
///
/// Stored as the ascending list of occupied modes (with multiplicity), which
/// stays short when few particles spread over many modes. Ordered by particle
/// count, then lexicographically in `ν`; this is the canonical serialization
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct OccupationIndex(Vec<u16>);

impl OccupationIndex {
    /// From occupation numbers; trailing zeros are irrelevant.
    pub fn new(nu: Vec<u32>) -> Self {
        let modes: Vec<usize> = nu.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat_n(i, k as usize)).collect();
        Self::from_modes(&modes)
    }

    pub fn vacuum() -> Self {
        Self(Vec::new())
    }

    /// One particle in mode `i`.
    pub fn single(i: usize) -> Self {
        Self(vec![mode_key(i)])
    }

    /// Occupation index of a multiset of modes.
    pub fn from_modes(modes: &[usize]) -> Self {
        let mut m: Vec<u16> = modes.iter().map(|&i| mode_key(i)).collect();
        m.sort_unstable();
        Self(m)
    }

    /// Occupation numbers up to the highest occupied mode.
    pub fn nu(&self) -> Vec<u32> {
        let mut nu = vec![0; self.span()];
        for &m in &self.0 {
            nu[m as usize] += 1;
        }
        nu
    }

    pub fn occupation(&self, i: usize) -> u32 {
        let Ok(key) = u16::try_from(i) else { return 0 };
        let lo = self.0.partition_point(|&m| m < key);
        let hi = self.0.partition_point(|&m| m <= key);
        (hi - lo) as u32
    }

    pub fn particles(&self) -> usize {
        self.0.len()
    }

    /// Number of modes spanned (index of the highest occupied mode plus one).
    pub fn span(&self) -> usize {
        self.0.last().map_or(0, |&m| m as usize + 1)
    }

    /// `Σ (i+1) ν_i`, the eigenvalue exponent of a dilation.
    pub fn weight(&self) -> usize {
        self.0.iter().map(|&m| m as usize + 1).sum()
    }

    /// Modes listed with multiplicity in increasing order.
    pub fn modes(&self) -> Vec<usize> {
        self.0.iter().map(|&m| m as usize).collect()
    }

    /// Distinct occupied modes with their occupation numbers.
    fn runs(&self) -> Vec<(usize, u32)> {
        let mut out: Vec<(usize, u32)> = Vec::new();
        for &m in &self.0 {
            match out.last_mut() {
                Some((last, k)) if *last == m as usize => *k += 1,
                _ => out.push((m as usize, 1)),
            }
        }
        out
    }

    fn removed(&self, i: usize) -> Self {
        let mut m = self.0.clone();
        let pos = m.binary_search(&mode_key(i)).expect("mode must be occupied");
        m.remove(pos);
        Self(m)
    }

    fn sum(&self, other: &Self) -> Self {
        let mut m = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() || j < other.0.len() {
            if j == other.0.len() || (i < self.0.len() && self.0[i] <= other.0[j]) {
                m.push(self.0[i]);
                i += 1;
            } else {
                m.push(other.0[j]);
                j += 1;
            }
        }
        Self(m)
    }

    /// `√(Πν_i! / p!)`, the norm of `Ŝ(e^{⊗ν})`.
    fn monomial_norm<R: Real>(&self) -> R {
        let num = self.runs().iter().fold(R::one(), |acc, &(_, k)| acc * factorial::<R>(k as usize));
        (num / factorial::<R>(self.particles())).sqrt()
    }
}

fn mode_key(i: usize) -> u16 {
    u16::try_from(i).expect("mode index must fit in 16 bits")
}

impl Ord for OccupationIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        // Lexicographic order on ν is the reverse of lexicographic order on the ascending mode lists.
        self.0.len().cmp(&other.0.len()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for OccupationIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

type Poly<R> = BTreeMap<OccupationIndex, Complex<R>>;

/// Per-slot linear map on occupation monomials.
type SlotMap<'a, R> = Box<dyn Fn(&OccupationIndex) -> Poly<R> + 'a>;

fn poly_add_term<R: Real>(p: &mut Poly<R>, key: OccupationIndex, c: Complex<R>) {
    *p.entry(key).or_insert_with(Complex::zero) += c;
}

fn poly_mul<R: Real>(a: &Poly<R>, b: &Poly<R>, max_particles: usize, drops: &mut u64) -> Poly<R> {
    let mut out = Poly::new();
    for (ka, ca) in a {
        for (kb, cb) in b {
            if ka.particles() + kb.particles() > max_particles {
                if !(ca * cb).is_zero() {
                    *drops += 1;
                }
                continue;
            }
            poly_add_term(&mut out, ka.sum(kb), ca * cb);
        }
    }
    out
}

/// Substitutes `x_i ↦ Σ_j M_{j,i} x_j`.
fn poly_lift<R: Real>(m: &ActionMatrix<R>, p: &Poly<R>) -> Poly<R> {
    let n = m.cutoff();
    let mut cache: BTreeMap<usize, Poly<R>> = BTreeMap::new();
    let mut linear = |i: usize| -> Poly<R> {
        cache
            .entry(i)
            .or_insert_with(|| {
                let mut l = Poly::new();
                if i < n {
                    for j in 0..n {
                        let v = m.get(j, i);
                        if !v.is_zero() {
                            l.insert(OccupationIndex::single(j), v);
                        }
                    }
                }
                l
            })
            .clone()
    };
    let mut out = Poly::new();
    let mut unused = 0;
    for (key, c) in p {
        let mut acc = Poly::new();
        acc.insert(OccupationIndex::vacuum(), *c);
        for mode in key.modes() {
            acc = poly_mul(&acc, &linear(mode), usize::MAX, &mut unused);
        }
        for (k, v) in acc {
            poly_add_term(&mut out, k, v);
        }
    }
    out
}

/// `½ Σ_{a,b} c_{ab} ∂_a ∂_b`.
fn poly_contract<R: Real>(c: &GrunskyMatrix<R>, p: &Poly<R>) -> Poly<R> {
    let n = c.cutoff();
    let half = R::lit(0.5);
    let mut out = Poly::new();
    for (key, coeff) in p {
        let runs: Vec<(usize, u32)> = key.runs().into_iter().filter(|&(i, _)| i < n).collect();
        for (ia, &(a, na)) in runs.iter().enumerate() {
            if na >= 2 {
                let w = c.at(a, a) * half * R::lit((na * (na - 1)) as f64);
                if !w.is_zero() {
                    poly_add_term(&mut out, key.removed(a).removed(a), coeff * w);
                }
            }
            for &(b, nb) in &runs[ia + 1..] {
                let w = (c.at(a, b) + c.at(b, a)) * half * R::lit((na * nb) as f64);
                if !w.is_zero() {
                    poly_add_term(&mut out, key.removed(a).removed(b), coeff * w);
                }
            }
        }
    }
    out
}

fn poly_exp_contract<R: Real>(c: &GrunskyMatrix<R>, p: &Poly<R>) -> Poly<R> {
    let mut total = p.clone();
    let mut term = p.clone();
    let mut k = 1;
    loop {
        term = poly_contract(c, &term);
        if term.is_empty() {
            return total;
        }
        let inv = R::one() / R::lit(k as f64);
        for (key, v) in &term {
            poly_add_term(&mut total, key.clone(), v * inv);
        }
        term.values_mut().for_each(|v| *v *= inv);
        k += 1;
    }
}

/// Mode and particle cutoffs of a Fock state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockCutoffs {
    pub modes: usize,
    pub particles: usize,
}

/// A finitely supported vector of the truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector<R: Real> {
    cutoffs: FockCutoffs,
    amps: BTreeMap<OccupationIndex, Complex<R>>,
    drops: u64,
}

impl<R: Real> FockVector<R> {
    pub fn zero(cutoffs: FockCutoffs) -> Self {
        Self { cutoffs, amps: BTreeMap::new(), drops: 0 }
    }

    pub fn vacuum(cutoffs: FockCutoffs) -> Self {
        Self::basis(OccupationIndex::vacuum(), cutoffs)
    }

    /// The ON basis vector `ê_ν` (zero if it exceeds the cutoffs).
    pub fn basis(nu: OccupationIndex, cutoffs: FockCutoffs) -> Self {
        let mut v = Self::zero(cutoffs);
        v.set(nu, Complex::one());
        v
    }

    /// The one-particle state with the given Bergman coordinates.
    pub fn one_particle(v: &BergmanVector<R>, cutoffs: FockCutoffs) -> Self {
        let mut out = Self::zero(cutoffs);
        for (i, c) in v.coeffs.iter().enumerate() {
            if !c.is_zero() {
                out.set(OccupationIndex::single(i), *c);
            }
        }
        out
    }

    pub fn cutoffs(&self) -> FockCutoffs {
        self.cutoffs
    }

    /// Number of nonzero terms discarded by the particle cutoff while building this vector.
    pub fn drops(&self) -> u64 {
        self.drops
    }

    fn admissible(&self, nu: &OccupationIndex) -> bool {
        nu.span() <= self.cutoffs.modes && nu.particles() <= self.cutoffs.particles
    }

    /// Sets an amplitude; indices outside the cutoffs are counted as drops.
    pub fn set(&mut self, nu: OccupationIndex, amp: Complex<R>) {
        if self.admissible(&nu) {
            self.amps.insert(nu, amp);
        } else if !amp.is_zero() {
            self.drops += 1;
        }
    }

    pub fn amp(&self, nu: &OccupationIndex) -> Complex<R> {
        self.amps.get(nu).copied().unwrap_or_else(Complex::zero)
    }

    pub fn vacuum_amplitude(&self) -> Complex<R> {
        self.amp(&OccupationIndex::vacuum())
    }

    /// Stored entries in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&OccupationIndex, &Complex<R>)> {
        self.amps.iter()
    }

    pub fn norm_sq(&self) -> R {
        self.amps.values().fold(R::zero(), |acc, a| acc + a.norm_sqr())
    }

    pub fn inner(&self, other: &Self) -> Complex<R> {
        self.amps.iter().fold(Complex::zero(), |acc, (k, a)| acc + a.conj() * other.amp(k))
    }

    pub fn scale(&self, s: Complex<R>) -> Self {
        Self { cutoffs: self.cutoffs, amps: self.amps.iter().map(|(k, v)| (k.clone(), v * s)).collect(), drops: self.drops }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, Complex::one());
        out
    }

    /// `self += s · other`.
    pub fn add_scaled(&mut self, other: &Self, s: Complex<R>) {
        for (k, v) in &other.amps {
            *self.amps.entry(k.clone()).or_insert_with(Complex::zero) += v * s;
        }
        self.drops += other.drops;
    }

    /// Restriction to the `p`-particle sector.
    pub fn sector(&self, p: usize) -> Self {
        Self {
            cutoffs: self.cutoffs,
            amps: self.amps.iter().filter(|(k, _)| k.particles() == p).map(|(k, v)| (k.clone(), *v)).collect(),
            drops: 0,
        }
    }

    pub fn max_particles(&self) -> usize {
        self.amps.iter().filter(|(_, v)| !v.is_zero()).map(|(k, _)| k.particles()).max().unwrap_or(0)
    }

    pub fn max_abs_diff(&self, other: &Self) -> R {
        let mut m = R::zero();
        for (k, v) in &self.amps {
            m = m.max((v - other.amp(k)).norm());
        }
        for (k, v) in &other.amps {
            if !self.amps.contains_key(k) {
                m = m.max(v.norm());
            }
        }
        m
    }

    /// The same amplitudes under different cutoffs; fails if an occupied index does not fit.
    pub fn recut(&self, cutoffs: FockCutoffs) -> Result<Self, FockError> {
        let mut out = Self { cutoffs, amps: BTreeMap::new(), drops: self.drops };
        for (k, v) in &self.amps {
            if !out.admissible(k) {
                return Err(FockError::Cutoff(format!("occupation {:?} does not fit {cutoffs:?}", k.nu())));
            }
            out.amps.insert(k.clone(), *v);
        }
        Ok(out)
    }

    /// Multiplies the `p`-particle sector by `f(p)`.
    pub fn map_sectors(&self, f: impl Fn(usize) -> R) -> Self {
        Self { cutoffs: self.cutoffs, amps: self.amps.iter().map(|(k, v)| (k.clone(), v * f(k.particles()))).collect(), drops: self.drops }
    }

    fn to_poly(&self) -> Poly<R> {
        self.amps.iter().map(|(k, v)| (k.clone(), v / k.monomial_norm::<R>())).collect()
    }

    fn from_poly(p: Poly<R>, cutoffs: FockCutoffs, drops: u64) -> Self {
        let mut out = Self { cutoffs, amps: BTreeMap::new(), drops };
        for (k, v) in p {
            let amp = v * k.monomial_norm::<R>();
            out.set(k, amp);
        }
        out
    }

    pub fn to_record(&self) -> FockRecord {
        FockRecord {
            modes: self.cutoffs.modes,
            particles: self.cutoffs.particles,
            drops: self.drops,
            amps: self.amps.iter().map(|(k, v)| AmpRecord { nu: k.nu(), amp: [v.re.as_f64(), v.im.as_f64()] }).collect(),
        }
    }

    pub fn from_record(rec: &FockRecord) -> Result<Self, FockError> {
        if rec.modes == 0 {
            return Err(FockError::Record("modes must be positive".into()));
        }
        let mut out = Self::zero(FockCutoffs { modes: rec.modes, particles: rec.particles });
        for a in &rec.amps {
            let nu = OccupationIndex::new(a.nu.clone());
            if !out.admissible(&nu) {
                return Err(FockError::Record(format!("occupation {:?} exceeds the cutoffs", a.nu)));
            }
            if !(a.amp[0].is_finite() && a.amp[1].is_finite()) {
                return Err(FockError::Record("non-finite amplitude".into()));
            }
            *out.amps.entry(nu).or_insert_with(Complex::zero) += Complex::new(R::lit(a.amp[0]), R::lit(a.amp[1]));
        }
        out.drops = rec.drops;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmpRecord {
    pub nu: Vec<u32>,
    pub amp: [f64; 2],
}

/// JSON form of a [`FockVector`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockRecord {
    pub modes: usize,
    pub particles: usize,
    #[serde(default)]
    pub drops: u64,
    pub amps: Vec<AmpRecord>,
}

fn same_cutoffs(a: FockCutoffs, b: FockCutoffs) -> Result<(), FockError> {
    if a != b {
        return Err(FockError::Cutoff(format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

/// `ê_ν ⊗ ê_μ ↦ κ(ν, μ) ê_{ν+μ}` extended bilinearly.
pub fn merge<R: Real>(u: &FockVector<R>, w: &FockVector<R>) -> Result<FockVector<R>, FockError> {
    same_cutoffs(u.cutoffs, w.cutoffs)?;
    let mut drops = u.drops + w.drops;
    let p = poly_mul(&u.to_poly(), &w.to_poly(), u.cutoffs.particles, &mut drops);
    Ok(FockVector::from_poly(p, u.cutoffs, drops))
}

/// `κ(ν, μ) = √(p! q! / (p+q)! · Π C(ν_i+μ_i, ν_i))`.
pub fn merge_coefficient<R: Real>(nu: &OccupationIndex, mu: &OccupationIndex) -> R {
    let (p, q) = (nu.particles(), mu.particles());
    let n = nu.span().max(mu.span());
    let binoms = (0..n).fold(R::one(), |acc, i| {
        acc * crate::scalar::binomial::<R>((nu.occupation(i) + mu.occupation(i)) as usize, nu.occupation(i) as usize)
    });
    (factorial::<R>(p) * factorial::<R>(q) / factorial::<R>(p + q) * binoms).sqrt()
}

/// `M^{⊗p}` on every `p`-particle sector.
pub fn lift_one_body<R: Real>(m: &ActionMatrix<R>, v: &FockVector<R>) -> Result<FockVector<R>, FockError> {
    if m.cutoff() != v.cutoffs.modes {
        return Err(FockError::Cutoff(format!("matrix has {} modes, vector {}", m.cutoff(), v.cutoffs.modes)));
    }
    Ok(FockVector::from_poly(poly_lift(m, &v.to_poly()), v.cutoffs, v.drops))
}

/// `Ŝ(v_1 ⊗ … ⊗ v_k)` in ON coordinates; the empty product is the vacuum.
pub fn symmetric_product<R: Real>(vs: &[BergmanVector<R>], cutoffs: FockCutoffs) -> FockVector<R> {
    let mut drops = 0;
    let mut acc = Poly::from([(OccupationIndex::vacuum(), Complex::one())]);
    for v in vs {
        let linear: Poly<R> = v
            .coeffs
            .iter()
            .enumerate()
            .take(cutoffs.modes)
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (OccupationIndex::single(i), *c))
            .collect();
        acc = poly_mul(&acc, &linear, cutoffs.particles, &mut drops);
    }
    FockVector::from_poly(acc, cutoffs, drops)
}

/// Sum over unordered particle pairs of `c`-weighted removals.
pub fn pair_annihilate<R: Real>(c: &GrunskyMatrix<R>, v: &FockVector<R>) -> FockVector<R> {
    FockVector::from_poly(poly_contract(c, &v.to_poly()), v.cutoffs, v.drops)
}

/// `exp` of [`pair_annihilate`], a finite sum since each application removes two particles.
pub fn exp_pair_annihilate<R: Real>(c: &GrunskyMatrix<R>, v: &FockVector<R>) -> FockVector<R> {
    FockVector::from_poly(poly_exp_contract(c, &v.to_poly()), v.cutoffs, v.drops)
}

/// An element of a tensor product of several Fock spaces, one per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotTensor<R: Real> {
    cutoffs: FockCutoffs,
    // Keys are per-slot monomials in the polynomial picture.
    terms: BTreeMap<Vec<OccupationIndex>, Complex<R>>,
    drops: u64,
}

impl<R: Real> SlotTensor<R> {
    /// `inputs[0] ⊗ inputs[1] ⊗ …`.
    pub fn product(inputs: &[FockVector<R>], cutoffs: FockCutoffs) -> Result<Self, FockError> {
        let mut terms: BTreeMap<Vec<OccupationIndex>, Complex<R>> = BTreeMap::new();
        terms.insert(Vec::new(), Complex::one());
        let mut drops = 0;
        for v in inputs {
            same_cutoffs(v.cutoffs, cutoffs)?;
            drops += v.drops;
            let poly = v.to_poly();
            let mut next = BTreeMap::new();
            for (key, c) in &terms {
                for (k, a) in &poly {
                    let mut nk = key.clone();
                    nk.push(k.clone());
                    next.insert(nk, c * a);
                }
            }
            terms = next;
        }
        Ok(Self { cutoffs, terms, drops })
    }

    pub fn slots(&self) -> usize {
        self.terms.keys().next().map_or(0, Vec::len)
    }

    /// `Σ_{a,b} c_{ab} ∂_{a}^{(i)} ∂_{b}^{(j)}`, pairing one particle of slot `i` with one of slot `j`.
    pub fn contract(&self, i: usize, j: usize, c: &GrunskyMatrix<R>) -> Self {
        let n = c.cutoff();
        let mut out: BTreeMap<Vec<OccupationIndex>, Complex<R>> = BTreeMap::new();
        for (key, coeff) in &self.terms {
            for (a, na) in key[i].runs().into_iter().filter(|&(a, _)| a < n) {
                for (b, nb) in key[j].runs().into_iter().filter(|&(b, _)| b < n) {
                    let w = c.at(a, b) * R::lit((na * nb) as f64);
                    if w.is_zero() {
                        continue;
                    }
                    let mut nk = key.clone();
                    nk[i] = key[i].removed(a);
                    nk[j] = key[j].removed(b);
                    *out.entry(nk).or_insert_with(Complex::zero) += coeff * w;
                }
            }
        }
        Self { cutoffs: self.cutoffs, terms: out, drops: self.drops }
    }

    fn add_scaled(&mut self, other: &Self, s: R) {
        for (k, v) in &other.terms {
            *self.terms.entry(k.clone()).or_insert_with(Complex::zero) += v * s;
        }
    }

    /// `exp(Σ_{i<j} Ĉ^{ij})` with the pair functionals `c[(i, j)]`.
    pub fn exp_contract(&self, pairs: &[((usize, usize), GrunskyMatrix<R>)]) -> Self {
        let mut total = self.clone();
        let mut term = self.clone();
        let mut k = 1;
        while !pairs.is_empty() {
            let mut next = Self { cutoffs: self.cutoffs, terms: BTreeMap::new(), drops: 0 };
            for ((i, j), c) in pairs {
                next.add_scaled(&term.contract(*i, *j, c), R::one());
            }
            if next.terms.is_empty() {
                break;
            }
            let inv = R::one() / R::lit(k as f64);
            next.terms.values_mut().for_each(|v| *v *= inv);
            total.add_scaled(&next, R::one());
            term = next;
            k += 1;
        }
        total
    }

    /// Applies a linear map to each slot's monomials and multiplies the results.
    fn apply_and_merge(&self, slot_maps: &[SlotMap<'_, R>]) -> FockVector<R> {
        let mut caches: Vec<BTreeMap<OccupationIndex, Poly<R>>> = vec![BTreeMap::new(); slot_maps.len()];
        let mut drops = self.drops;
        let mut out = Poly::new();
        for (key, coeff) in &self.terms {
            let mut acc = Poly::new();
            acc.insert(OccupationIndex::vacuum(), *coeff);
            for (s, k) in key.iter().enumerate() {
                let image = caches[s].entry(k.clone()).or_insert_with(|| slot_maps[s](k));
                acc = poly_mul(&acc, image, self.cutoffs.particles, &mut drops);
            }
            for (k, v) in acc {
                poly_add_term(&mut out, k, v);
            }
        }
        FockVector::from_poly(out, self.cutoffs, drops)
    }

    /// Merges all slots into a single Fock vector.
    pub fn merge_all(&self) -> FockVector<R> {
        let ident: Vec<SlotMap<'_, R>> =
            (0..self.slots()).map(|_| Box::new(|k: &OccupationIndex| Poly::from([(k.clone(), Complex::one())])) as _).collect();
        self.apply_and_merge(&ident)
    }
}

/// Cross-slot contraction `Ĉ` of slots `i` and `j`.
pub fn pair_annihilate_cross<R: Real>(c: &GrunskyMatrix<R>, v: &SlotTensor<R>, i: usize, j: usize) -> SlotTensor<R> {
    v.contract(i, j, c)
}

fn rho1_poly<R: Real>(rho: &ActionMatrix<R>, c: &GrunskyMatrix<R>, p: &Poly<R>) -> Poly<R> {
    poly_lift(rho, &poly_exp_contract(c, p))
}

/// `ρ(φ) = ρ_cl(φ) ∘ exp(∂_φ)`.
pub fn rho1<R: Real>(phi: &DiskMap<R>, v: &FockVector<R>) -> Result<FockVector<R>, FockError> {
    let n = v.cutoffs.modes;
    let rho = rho_cl_matrix(phi, n);
    let c = contraction_functional(phi, n)?;
    Ok(FockVector::from_poly(rho1_poly(&rho, &c, &v.to_poly()), v.cutoffs, v.drops))
}

/// The operadic product `ρ_{(g_1, …, g_n)}(v_1, …, v_n)`.
pub fn rho_n<R: Real>(config: &Configuration<R>, inputs: &[FockVector<R>], cutoffs: FockCutoffs) -> Result<FockVector<R>, FockError> {
    if inputs.len() != config.len() {
        return Err(FockError::Arity { expected: config.len(), got: inputs.len() });
    }
    if inputs.is_empty() {
        return Ok(FockVector::vacuum(cutoffs));
    }
    let n = cutoffs.modes;
    let maps = config.maps();
    let mut pairs = Vec::new();
    for i in 0..maps.len() {
        for j in i + 1..maps.len() {
            pairs.push(((i, j), pair_functional(&maps[i], &maps[j], n)?));
        }
    }
    let mut slot_ops = Vec::with_capacity(maps.len());
    for phi in maps {
        slot_ops.push((rho_cl_matrix(phi, n), contraction_functional(phi, n)?));
    }
    let tensor = SlotTensor::product(inputs, cutoffs)?.exp_contract(&pairs);
    let slot_maps: Vec<SlotMap<'_, R>> = slot_ops
        .iter()
        .map(|(rho, c)| Box::new(move |k: &OccupationIndex| rho1_poly(rho, c, &Poly::from([(k.clone(), Complex::one())]))) as _)
        .collect();
    Ok(tensor.apply_and_merge(&slot_maps))
}

/// `𝒩 ∘ ρ_n ∘ (𝒩⁻¹ ⊗ … ⊗ 𝒩⁻¹)` with `𝒩 = √(p!)` on the `p`-particle sector.
pub fn rho_n_normalized<R: Real>(
    config: &Configuration<R>,
    inputs: &[FockVector<R>],
    cutoffs: FockCutoffs,
) -> Result<FockVector<R>, FockError> {
    let scaled: Vec<_> = inputs.iter().map(|v| v.map_sectors(|p| R::one() / factorial::<R>(p).sqrt())).collect();
    Ok(rho_n(config, &scaled, cutoffs)?.map_sectors(|p| factorial::<R>(p).sqrt()))
}

/// The configuration with every map conjugated by `J`.
pub fn twist_j<R: Real>(config: &Configuration<R>) -> Configuration<R> {
    config.conjugate()
}

/// Truncated trace of `ρ_cl(B_{0,r})` on the Fock space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DilationTrace {
    /// `Σ r^{Σ(i+1)ν_i}` over indices with modes `< N`, particles `≤ P`.
    pub value: f64,
    /// `Π_{n=1}^{N} (1 - rⁿ)^{-1}`.
    pub reference: f64,
    pub gap: f64,
    /// Upper bound on the contribution of states with more than `P` particles.
    pub tail_bound: f64,
}

pub fn dilation_trace(r: f64, modes: usize, particles: usize) -> Result<DilationTrace, FockError> {
    if !(r > 0.0 && r < 1.0) {
        return Err(FockError::Domain(format!("dilation parameter {r} must lie in (0, 1)")));
    }
    // by_count[p] accumulates the weight of all states with exactly p particles.
    let mut by_count = vec![0.0f64; particles + 1];
    by_count[0] = 1.0;
    for i in 0..modes {
        let step = r.powi(i as i32 + 1);
        for p in (1..=particles).rev() {
            let mut add = 0.0;
            let mut w = 1.0;
            for k in 1..=p {
                w *= step;
                add += by_count[p - k] * w;
            }
            by_count[p] += add;
        }
    }
    let value: f64 = by_count.iter().sum();
    let reference = (1..=modes).fold(1.0, |acc, n| acc / (1.0 - r.powi(n as i32)));
    Ok(DilationTrace { value, reference, gap: (reference - value).abs(), tail_bound: r.powi(particles as i32 + 1) * reference / (1.0 - r) })
}

/// Brute-force tensors `(C^N)^{⊗p}` for validating the occupation-basis constants.
pub mod dense {
    use super::*;

    pub const MAX_ORDER: usize = 4;
    pub const MAX_MODES: usize = 6;

    /// A `p`-fold tensor over `N` modes, row-major in the slot indices.
    #[derive(Debug, Clone, PartialEq)]
    pub struct DenseTensor<R: Real> {
        pub modes: usize,
        pub order: usize,
        pub data: Vec<Complex<R>>,
    }

    fn check(modes: usize, order: usize) -> Result<(), FockError> {
        if modes > MAX_MODES || order > MAX_ORDER {
            return Err(FockError::OracleScale(format!("N = {modes}, p = {order}")));
        }
        Ok(())
    }

    fn digits(mut idx: usize, modes: usize, order: usize) -> Vec<usize> {
        let mut out = vec![0; order];
        for d in out.iter_mut().rev() {
            *d = idx % modes;
            idx /= modes;
        }
        out
    }

    fn index(seq: &[usize], modes: usize) -> usize {
        seq.iter().fold(0, |acc, &d| acc * modes + d)
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..n {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    impl<R: Real> DenseTensor<R> {
        pub fn zero(modes: usize, order: usize) -> Result<Self, FockError> {
            check(modes, order)?;
            Ok(Self { modes, order, data: vec![Complex::zero(); modes.pow(order as u32)] })
        }

        /// `v_1 ⊗ … ⊗ v_p`.
        pub fn product(vs: &[BergmanVector<R>], modes: usize) -> Result<Self, FockError> {
            let mut t = Self::zero(modes, vs.len())?;
            for idx in 0..t.data.len() {
                let seq = digits(idx, modes, vs.len());
                t.data[idx] =
                    seq.iter().zip(vs).fold(Complex::one(), |acc, (&d, v)| acc * v.coeffs.get(d).copied().unwrap_or_else(Complex::zero));
            }
            Ok(t)
        }

        /// Average over all permutations of the slots.
        pub fn symmetrize(&self) -> Self {
            let perms = permutations(self.order);
            let inv = R::one() / R::lit(perms.len() as f64);
            let mut out = self.clone();
            for idx in 0..self.data.len() {
                let seq = digits(idx, self.modes, self.order);
                let sum = perms.iter().fold(Complex::zero(), |acc, p| {
                    let permuted: Vec<usize> = p.iter().map(|&k| seq[k]).collect();
                    acc + self.data[index(&permuted, self.modes)]
                });
                out.data[idx] = sum * inv;
            }
            out
        }

        /// The dense form of `ê_ν`: every index sequence with occupation `ν` has entry `√(Πν!/p!)`.
        pub fn basis(nu: &OccupationIndex, modes: usize) -> Result<Self, FockError> {
            let mut t = Self::zero(modes, nu.particles())?;
            let value = nu.monomial_norm::<R>();
            for idx in 0..t.data.len() {
                if OccupationIndex::from_modes(&digits(idx, modes, t.order)) == *nu {
                    t.data[idx] = Complex::new(value, R::zero());
                }
            }
            Ok(t)
        }

        /// Coordinates in the `ê_ν` basis of a symmetric tensor.
        pub fn to_fock(&self, cutoffs: FockCutoffs) -> FockVector<R> {
            let mut out = FockVector::zero(cutoffs);
            for idx in 0..self.data.len() {
                let nu = OccupationIndex::from_modes(&digits(idx, self.modes, self.order));
                let w = nu.monomial_norm::<R>();
                let prev = out.amp(&nu);
                out.set(nu, prev + self.data[idx] * w);
            }
            out.amps.retain(|_, v| !v.is_zero());
            out
        }

        /// Sector-`p` part of a Fock vector as a dense tensor.
        pub fn from_fock(v: &FockVector<R>, p: usize) -> Result<Self, FockError> {
            let mut t = Self::zero(v.cutoffs.modes, p)?;
            for (nu, a) in v.iter().filter(|(nu, _)| nu.particles() == p) {
                let b = Self::basis(nu, v.cutoffs.modes)?;
                for (x, y) in t.data.iter_mut().zip(&b.data) {
                    *x += a * y;
                }
            }
            Ok(t)
        }

        /// `M ⊗ … ⊗ M`.
        pub fn apply_one_body(&self, m: &ActionMatrix<R>) -> Self {
            let mut cur = self.clone();
            for slot in 0..self.order {
                let mut next = cur.clone();
                for idx in 0..cur.data.len() {
                    let seq = digits(idx, self.modes, self.order);
                    let mut acc = Complex::zero();
                    for k in 0..self.modes {
                        let mut s = seq.clone();
                        s[slot] = k;
                        acc += m.get(seq[slot], k) * cur.data[index(&s, self.modes)];
                    }
                    next.data[idx] = acc;
                }
                cur = next;
            }
            cur
        }

        /// `Σ_{s<t} c(slot s, slot t)`, contracting a pair of slots and keeping the rest in order.
        pub fn contract_pairs(&self, c: &GrunskyMatrix<R>) -> Result<Self, FockError> {
            if self.order < 2 {
                return Self::zero(self.modes, 0);
            }
            let mut out = Self::zero(self.modes, self.order - 2)?;
            for idx in 0..self.data.len() {
                let seq = digits(idx, self.modes, self.order);
                for s in 0..self.order {
                    for t in s + 1..self.order {
                        let rest: Vec<usize> = (0..self.order).filter(|&k| k != s && k != t).map(|k| seq[k]).collect();
                        out.data[index(&rest, self.modes)] += c.at(seq[s], seq[t]) * self.data[idx];
                    }
                }
            }
            Ok(out)
        }

        /// `self ⊗ other`.
        pub fn tensor(&self, other: &Self) -> Result<Self, FockError> {
            let mut out = Self::zero(self.modes, self.order + other.order)?;
            for (i, a) in self.data.iter().enumerate() {
                for (j, b) in other.data.iter().enumerate() {
                    out.data[i * other.data.len() + j] = a * b;
                }
            }
            Ok(out)
        }
    }

    /// Symmetrized product of up to four one-particle vectors, in `ê_ν` coordinates.
    pub fn dense_symmetrize<R: Real>(vs: &[BergmanVector<R>], modes: usize) -> Result<FockVector<R>, FockError> {
        let cutoffs = FockCutoffs { modes, particles: vs.len() };
        Ok(DenseTensor::product(vs, modes)?.symmetrize().to_fock(cutoffs))
    }
}

#[cfg(test)]
mod tests {
    use super::dense::{dense_symmetrize, DenseTensor};
    use super::*;
    use crate::bergman::{kernel_vector, t_matrix};
    use crate::cocycle::{cocycle_f, grunsky, GrunskySource};
    use crate::diskmap::{dm_compose_with_cutoff, Membership};
    use crate::series::{TruncatedSeries1, TruncatedSeries2};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cut(modes: usize, particles: usize) -> FockCutoffs {
        FockCutoffs { modes, particles }
    }

    fn occ(nu: &[u32]) -> OccupationIndex {
        OccupationIndex::new(nu.to_vec())
    }

    fn random_vector(seed: &[(f64, f64)]) -> BergmanVector<f64> {
        BergmanVector::new(seed.iter().map(|&(a, b)| c(a, b)).collect())
    }

    fn random_matrix(n: usize, vals: &[(f64, f64)]) -> ActionMatrix<f64> {
        ActionMatrix::from_fn(n, crate::bergman::OperatorTag::Derived, |i, j| {
            let (a, b) = vals[i * n + j];
            c(a, b)
        })
    }

    fn random_grunsky(n: usize, vals: &[(f64, f64)], symmetric: bool) -> GrunskyMatrix<f64> {
        let entries = TruncatedSeries2::from_fn(n, 2 * n - 2, |i, j| {
            let (a, b) = if symmetric { vals[i.min(j) * n + i.max(j)] } else { vals[i * n + j] };
            c(a, b)
        });
        GrunskyMatrix { entries, source: GrunskySource::G }
    }

    fn random_fock(n: usize, p: usize, vals: &[(f64, f64)]) -> FockVector<f64> {
        let mut v = FockVector::zero(cut(n, 6));
        let mut k = 0;
        for idx in 0..n.pow(p as u32) {
            let mut seq = Vec::new();
            let mut x = idx;
            for _ in 0..p {
                seq.push(x % n);
                x /= n;
            }
            if seq.windows(2).all(|w| w[0] <= w[1]) {
                let (a, b) = vals[k % vals.len()];
                v.set(OccupationIndex::from_modes(&seq), c(a, b));
                k += 1;
            }
        }
        v
    }

    #[test]
    fn canonical_order_is_graded_lexicographic() {
        let mut keys = vec![occ(&[0, 1]), occ(&[2]), occ(&[]), occ(&[1]), occ(&[1, 1]), occ(&[0, 0, 1])];
        keys.sort();
        assert_eq!(keys, vec![occ(&[]), occ(&[0, 0, 1]), occ(&[0, 1]), occ(&[1]), occ(&[1, 1]), occ(&[2])]);
        assert_eq!(occ(&[1, 0, 0]), occ(&[1]));
        assert_eq!(occ(&[2, 0, 1]).nu(), vec![2, 0, 1]);
        assert_eq!(occ(&[2, 0, 1]).occupation(0), 2);
        assert_eq!(occ(&[2, 0, 1]).occupation(1), 0);
    }

    #[test]
    fn dense_symmetrize_examples() {
        let n = 4;
        let e0 = BergmanVector::<f64>::basis(0, n);
        let e1 = BergmanVector::<f64>::basis(1, n);
        let a = dense_symmetrize(&[e0.clone(), e0.clone()], n).unwrap();
        assert!((a.amp(&occ(&[2])) - c(1.0, 0.0)).norm() < 1e-15);
        let b = dense_symmetrize(&[e0.clone(), e1.clone()], n).unwrap();
        // Ŝ(e0⊗e1) has norm 1/√2, and ê_(1,1) = √2 Ŝ(e0⊗e1).
        assert!((b.amp(&occ(&[1, 1])) - c(0.5f64.sqrt(), 0.0)).norm() < 1e-15);
        let single = random_vector(&[(0.1, 0.2), (0.3, -0.4), (0.0, 1.0), (0.5, 0.5)]);
        let s = dense_symmetrize(std::slice::from_ref(&single), n).unwrap();
        assert!(s.max_abs_diff(&FockVector::one_particle(&single, cut(n, 1))) < 1e-15);
        assert!(matches!(dense_symmetrize(&vec![e0; 5], n), Err(FockError::OracleScale(_))));
    }

    #[test]
    fn merge_matches_closed_kappa_and_dense_oracle() {
        let n: usize = 4;
        let all: Vec<OccupationIndex> = (0..n.pow(3))
            .flat_map(|idx| {
                let seq: Vec<usize> = vec![idx % n, (idx / n) % n, idx / (n * n)];
                (0..=3).map(move |p| OccupationIndex::from_modes(&seq[..p]))
            })
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        for nu in &all {
            for mu in &all {
                if nu.particles() + mu.particles() > 4 {
                    continue;
                }
                let u = FockVector::<f64>::basis(nu.clone(), cut(n, 4));
                let w = FockVector::<f64>::basis(mu.clone(), cut(n, 4));
                let m = merge(&u, &w).unwrap();
                let kappa = merge_coefficient::<f64>(nu, mu);
                assert!((m.amp(&nu.sum(mu)) - c(kappa, 0.0)).norm() < 1e-12);
                let dense = DenseTensor::from_fock(&u, nu.particles())
                    .unwrap()
                    .tensor(&DenseTensor::from_fock(&w, mu.particles()).unwrap())
                    .unwrap()
                    .symmetrize()
                    .to_fock(cut(n, 4));
                assert!(m.max_abs_diff(&dense) < 1e-12, "{nu:?} {mu:?}");
            }
        }
        let vac = FockVector::vacuum(cut(n, 6));
        let w = random_fock(n, 2, &[(0.3, 0.1), (-0.2, 0.5)]);
        assert!(merge(&vac, &w).unwrap().max_abs_diff(&w) < 1e-15);
    }

    #[test]
    fn symmetric_product_matches_dense() {
        let n = 4;
        let vs = [
            random_vector(&[(0.1, 0.2), (0.3, -0.4), (0.0, 1.0), (0.5, 0.5)]),
            random_vector(&[(0.7, 0.0), (-0.3, 0.1), (0.2, 0.2), (0.0, -0.6)]),
            random_vector(&[(0.2, 0.3), (0.1, 0.1), (-0.5, 0.0), (0.3, 0.4)]),
        ];
        for k in 0..=3 {
            let fast = symmetric_product(&vs[..k], cut(n, 3));
            let dense = if k == 0 { FockVector::vacuum(cut(n, 3)) } else { dense_symmetrize(&vs[..k], n).unwrap() };
            assert!(fast.max_abs_diff(&dense) < 1e-14);
        }
    }

    #[test]
    fn merge_counts_dropped_particles() {
        let u = FockVector::<f64>::basis(occ(&[2]), cut(3, 3));
        let m = merge(&u, &u).unwrap();
        assert_eq!(m.drops(), 1);
        assert!(m.iter().next().is_none());
    }

    #[test]
    fn lift_of_dilation_is_diagonal() {
        let r = 0.7;
        let n = 5;
        let m = rho_cl_matrix(&DiskMap::affine(c(0.0, 0.0), r).unwrap(), n);
        let v = random_fock(n, 3, &[(0.3, 0.1), (-0.2, 0.5), (0.9, 0.0)]);
        let lifted = lift_one_body(&m, &v).unwrap();
        for (nu, a) in v.iter() {
            assert!((lifted.amp(nu) - a * r.powi(nu.weight() as i32)).norm() < 1e-14);
        }
        assert!(lift_one_body(&ActionMatrix::identity(n), &v).unwrap().max_abs_diff(&v) < 1e-15);
    }

    #[test]
    fn one_slot_contraction_examples() {
        let n = 4;
        let vals: Vec<(f64, f64)> = (0..16).map(|k| ((k as f64 * 0.37).sin(), (k as f64 * 0.91).cos())).collect();
        let g = random_grunsky(n, &vals, true);
        let vac = FockVector::vacuum(cut(n, 4));
        assert!(pair_annihilate(&g, &vac).iter().all(|(_, v)| v.is_zero()));
        let one = FockVector::basis(occ(&[0, 1]), cut(n, 4));
        assert!(pair_annihilate(&g, &one).iter().all(|(_, v)| v.is_zero()));
        let two = FockVector::basis(occ(&[2]), cut(n, 4));
        assert!((pair_annihilate(&g, &two).vacuum_amplitude() - g.at(0, 0)).norm() < 1e-15);
        let mob = contraction_functional(&DiskMap::mobius(0.4, c(0.3, -0.2)).unwrap(), n).unwrap();
        let v = random_fock(n, 3, &vals);
        assert!(pair_annihilate(&mob, &v).iter().all(|(_, x)| x.norm() < 1e-12));
    }

    #[test]
    fn two_point_value() {
        let n = 12;
        let cfg = Configuration::new(
            vec![DiskMap::affine(c(0.5, 0.0), 0.2).unwrap(), DiskMap::affine(c(-0.3, 0.0), 0.2).unwrap()],
            Membership::Embedded,
        )
        .unwrap();
        let e0 = FockVector::basis(OccupationIndex::single(0), cut(n, 2));
        let out = rho_n(&cfg, &[e0.clone(), e0.clone()], cut(n, 2)).unwrap();
        assert!((out.vacuum_amplitude() - c(0.0625, 0.0)).norm() < 1e-12);
        assert_eq!(out.drops(), 0);
        // Complex parameters: the J-twist conjugates the two-point value.
        let (a, b) = (c(0.4, 0.3), c(-0.3, -0.2));
        let cfg =
            Configuration::new(vec![DiskMap::affine(a, 0.2).unwrap(), DiskMap::affine(b, 0.3).unwrap()], Membership::Embedded).unwrap();
        let plain = rho_n(&cfg, &[e0.clone(), e0.clone()], cut(n, 2)).unwrap().vacuum_amplitude();
        let twisted = rho_n(&twist_j(&cfg), &[e0.clone(), e0], cut(n, 2)).unwrap().vacuum_amplitude();
        let expect = 0.06 / (a - b).powi(2);
        assert!((plain - expect).norm() < 1e-12);
        assert!((twisted - expect.conj()).norm() < 1e-12);
        assert_eq!(twist_j(&twist_j(&cfg)), cfg);
    }

    #[test]
    fn rho_n_small_cases() {
        let n = 8;
        let cf = cut(n, 6);
        let phi = DiskMap::series(TruncatedSeries1::new(vec![c(0.1, 0.0), c(0.5, 0.0), c(0.1, 0.05)]).unwrap(), 0.0);
        let cfg1 = Configuration::new(vec![phi.clone()], Membership::Embedded).unwrap();
        let v = random_fock(n, 2, &[(0.3, 0.1), (-0.2, 0.5)]);
        assert!(rho_n(&cfg1, std::slice::from_ref(&v), cf).unwrap().max_abs_diff(&rho1(&phi, &v).unwrap()) < 1e-14);
        let cfg0 = Configuration::<f64>::new(vec![], Membership::Embedded).unwrap();
        assert_eq!(rho_n(&cfg0, &[], cf).unwrap(), FockVector::vacuum(cf));
        let cfg2 = Configuration::new(
            vec![DiskMap::affine(c(0.5, 0.1), 0.3).unwrap(), DiskMap::affine(c(-0.4, 0.0), 0.3).unwrap()],
            Membership::Embedded,
        )
        .unwrap();
        let vac = FockVector::vacuum(cf);
        assert!(rho_n(&cfg2, &[vac.clone(), vac.clone()], cf).unwrap().max_abs_diff(&vac) < 1e-14);
        assert!(matches!(rho_n(&cfg2, &[vac], cf), Err(FockError::Arity { expected: 2, got: 1 })));
    }

    #[test]
    fn slot_permutation_equivariance() {
        let n = 8;
        let cf = cut(n, 6);
        let maps = vec![DiskMap::affine(c(0.5, 0.1), 0.3).unwrap(), DiskMap::affine(c(-0.4, 0.0), 0.25).unwrap()];
        let u = random_fock(n, 1, &[(0.3, 0.1), (-0.2, 0.5), (0.1, 0.1)]);
        let w = random_fock(n, 2, &[(0.7, -0.1), (0.2, 0.4)]);
        let a = rho_n(&Configuration::new(maps.clone(), Membership::Embedded).unwrap(), &[u.clone(), w.clone()], cf).unwrap();
        let rev: Vec<_> = maps.into_iter().rev().collect();
        let b = rho_n(&Configuration::new(rev, Membership::Embedded).unwrap(), &[w, u], cf).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-14);
    }

    #[test]
    fn normalized_product_on_vacuum() {
        let cf = cut(6, 4);
        let cfg = Configuration::new(
            vec![DiskMap::affine(c(0.5, 0.0), 0.2).unwrap(), DiskMap::affine(c(0.0, 0.0), 0.2).unwrap()],
            Membership::Embedded,
        )
        .unwrap();
        let vac = FockVector::vacuum(cf);
        assert!(rho_n_normalized(&cfg, &[vac.clone(), vac.clone()], cf).unwrap().max_abs_diff(&vac) < 1e-15);
        let e1 = FockVector::basis(OccupationIndex::single(1), cf);
        let out = rho_n_normalized(&cfg, &[e1.clone(), e1], cf).unwrap();
        assert!(out.max_particles() <= 2);
    }

    #[test]
    fn dilation_acts_by_weight() {
        let r = 0.6;
        let v = random_fock(6, 3, &[(0.3, 0.1), (-0.2, 0.5)]);
        let out = rho1(&DiskMap::affine(c(0.0, 0.0), r).unwrap(), &v).unwrap();
        for (nu, a) in v.iter() {
            assert!((out.amp(nu) - a * r.powi(nu.weight() as i32)).norm() < 1e-14);
        }
        let phi = DiskMap::series(TruncatedSeries1::new(vec![c(0.0, 0.0), c(0.5, 0.0), c(0.1, 0.0)]).unwrap(), 0.0);
        let vac = FockVector::vacuum(cut(6, 3));
        assert!(rho1(&phi, &vac).unwrap().max_abs_diff(&vac) < 1e-15);
    }

    #[test]
    fn mobius_rho_is_classical_lift() {
        let n = 6;
        let phi = DiskMap::mobius(0.3, c(0.2, 0.1)).unwrap();
        let v = random_fock(n, 3, &[(0.3, 0.1), (-0.2, 0.5), (0.4, 0.4)]);
        let a = rho1(&phi, &v).unwrap();
        let b = lift_one_body(&rho_cl_matrix(&phi, n), &v).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn monoid_law_on_triangular_maps() {
        let n = 10;
        let phi = DiskMap::series(TruncatedSeries1::new(vec![c(0.0, 0.0), c(0.6, 0.0), c(0.15, 0.05)]).unwrap(), 0.0);
        let psi = DiskMap::series(TruncatedSeries1::new(vec![c(0.0, 0.0), c(0.5, 0.1), c(-0.1, 0.0), c(0.02, 0.0)]).unwrap(), 0.0);
        let comp = dm_compose_with_cutoff(&phi, &psi, 64).unwrap();
        for p in 1..=3 {
            let v = random_fock(n, p, &[(0.3, 0.1), (-0.2, 0.5), (0.4, -0.4)]);
            let lhs = rho1(&comp, &v).unwrap();
            let rhs = rho1(&phi, &rho1(&psi, &v).unwrap()).unwrap();
            assert!(lhs.max_abs_diff(&rhs) < 1e-9, "p = {p}: {}", lhs.max_abs_diff(&rhs));
        }
    }

    #[test]
    fn contraction_cocycle_matches_kernel_pairing() {
        // Merging two one-particle states gives Ŝ(E_a ⊗ E_b), on which ∂_φ is the kernel pairing.
        let n = 40;
        let cc = c(0.1, 0.0);
        let phi = DiskMap::series(TruncatedSeries1::new(vec![c(0.0, 0.0), c(1.0, 0.0), cc]).unwrap(), 0.0);
        let g = grunsky(&cocycle_f(&phi, n).unwrap(), GrunskySource::F);
        let (a, b) = (c(0.2, 0.0), c(-0.1, 0.0));
        let ea = FockVector::one_particle(&kernel_vector(a, n).unwrap(), cut(n, 2));
        let eb = FockVector::one_particle(&kernel_vector(b, n).unwrap(), cut(n, 2));
        let two = merge(&ea, &eb).unwrap();
        let val = pair_annihilate(&g, &two).vacuum_amplitude();
        let expect = -cc * cc / (1.0 + cc * (a + b)).powi(2);
        assert!((val - expect).norm() < 1e-8);
    }

    #[test]
    fn dilation_trace_against_gaussian_binomial() {
        let t = dilation_trace(0.5, 20, 20).unwrap();
        // Π_{i=1}^{P} (1 - r^{N+i}) / (1 - r^i) counts states with ≤ P particles in N modes.
        let gb = (1..=20).fold(1.0, |acc, i| acc * (1.0 - 0.5f64.powi(20 + i)) / (1.0 - 0.5f64.powi(i)));
        assert!((t.value - gb).abs() < 1e-12);
        assert!(t.gap <= t.tail_bound && t.tail_bound < 1e-4);
        assert!((dilation_trace(1e-9, 10, 10).unwrap().value - 1.0).abs() < 1e-8);
        assert!(dilation_trace(0.5, 10, 5).unwrap().value < dilation_trace(0.5, 11, 5).unwrap().value);
        assert!(dilation_trace(0.5, 10, 5).unwrap().value < dilation_trace(0.5, 10, 6).unwrap().value);
        assert!(matches!(dilation_trace(1.0, 4, 4), Err(FockError::Domain(_))));
    }

    #[test]
    fn record_round_trip() {
        let v = random_fock(4, 2, &[(0.3, 0.1), (-0.2, 0.5)]);
        let json = serde_json::to_string(&v.to_record()).unwrap();
        let back = FockVector::<f64>::from_record(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, v);
        let bad = r#"{"modes":2,"particles":1,"amps":[{"nu":[0,0,1],"amp":[1,0]}]}"#;
        assert!(FockVector::<f64>::from_record(&serde_json::from_str(bad).unwrap()).is_err());
    }

    fn vals_strategy(len: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn lift_matches_dense(p in 1usize..=3, mv in vals_strategy(16), vv in vals_strategy(20)) {
            let n = 4;
            let m = random_matrix(n, &mv);
            let v = random_fock(n, p, &vv);
            let fast = lift_one_body(&m, &v).unwrap();
            let dense = DenseTensor::from_fock(&v, p).unwrap().apply_one_body(&m).to_fock(cut(n, 6));
            prop_assert!(fast.max_abs_diff(&dense) < 1e-12);
        }

        #[test]
        fn contraction_matches_dense(p in 2usize..=4, gv in vals_strategy(16), vv in vals_strategy(35)) {
            let n = 4;
            let g = random_grunsky(n, &gv, true);
            let v = random_fock(n, p, &vv);
            let fast = pair_annihilate(&g, &v);
            let dense = DenseTensor::from_fock(&v, p).unwrap().contract_pairs(&g).unwrap().symmetrize().to_fock(cut(n, 6));
            prop_assert!(fast.max_abs_diff(&dense) < 1e-12);
        }

        #[test]
        fn cross_contraction_matches_dense(p in 1usize..=2, q in 1usize..=2, gv in vals_strategy(16), uv in vals_strategy(10), wv in vals_strategy(10)) {
            let n = 4;
            let g = random_grunsky(n, &gv, false);
            let (u, w) = (random_fock(n, p, &uv), random_fock(n, q, &wv));
            let fast = SlotTensor::product(&[u.clone(), w.clone()], cut(n, 6)).unwrap();
            let fast = pair_annihilate_cross(&g, &fast, 0, 1).merge_all();
            // Dense: contract the first factor of u against the first factor of w, weighted by p·q.
            let du = DenseTensor::from_fock(&u, p).unwrap();
            let dw = DenseTensor::from_fock(&w, q).unwrap();
            let joint = du.tensor(&dw).unwrap();
            let mut out = DenseTensor::<f64>::zero(n, p + q - 2).unwrap();
            for (idx, val) in joint.data.iter().enumerate() {
                let mut seq = Vec::new();
                let mut x = idx;
                for _ in 0..p + q {
                    seq.push(x % n);
                    x /= n;
                }
                seq.reverse();
                let rest: Vec<usize> = seq.iter().enumerate().filter(|&(k, _)| k != 0 && k != p).map(|(_, &d)| d).collect();
                let pos = rest.iter().fold(0, |acc, &d| acc * n + d);
                out.data[pos] += g.at(seq[0], seq[p]) * val * (p * q) as f64;
            }
            let dense = out.symmetrize().to_fock(cut(n, 6));
            prop_assert!(fast.max_abs_diff(&dense) < 1e-12);
        }

        #[test]
        fn t_and_lift_compose(theta in -3.0f64..3.0, r in 0.0f64..0.7, arg in -3.0f64..3.0) {
            // Lifting is multiplicative on triangular matrices (no truncation loss).
            let n = 5;
            let phi = DiskMap::mobius(theta, Complex64::from_polar(r, arg)).unwrap();
            let m = t_matrix(&DiskMap::affine(c(0.0, 0.0), 0.5).unwrap(), n);
            let mm = rho_cl_matrix(&phi, n);
            let v = random_fock(n, 2, &[(0.3, 0.1), (-0.2, 0.5)]);
            let two = lift_one_body(&m, &lift_one_body(&m, &v).unwrap()).unwrap();
            let once = lift_one_body(&m.matmul(&m).unwrap(), &v).unwrap();
            prop_assert!(two.max_abs_diff(&once) < 1e-14);
            let fast = lift_one_body(&mm, &v).unwrap();
            let dense = DenseTensor::from_fock(&v, 2).unwrap().apply_one_body(&mm).to_fock(cut(n, 6));
            prop_assert!(fast.max_abs_diff(&dense) < 1e-12);
        }
    }
}
