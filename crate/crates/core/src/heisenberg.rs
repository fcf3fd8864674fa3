//! The Heisenberg vertex algebra on the partition basis `h(-k_1)…h(-k_p)𝟙`.
//!
//! Amplitudes are generic over [`Scalar`], so the combinatorial identities can
//! be checked in exact rational arithmetic. Intermediate results of mode and
//! Virasoro operators are never truncated; cutoffs apply to the returned vector.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bergman::{kernel_derivative, BergmanError, BergmanVector};
use crate::fock::{symmetric_product, FockCutoffs, FockVector};
use crate::scalar::{factorial, factorial_big, Real, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeisenbergError {
    #[error("mode depth {depth} exceeds the Bergman cutoff {modes}")]
    Cutoff { depth: u32, modes: usize },
    #[error("singular expansion point: {0}")]
    Singular(String),
    #[error("not implemented for this state: {0}")]
    NotImplemented(String),
    #[error("invalid partition {0:?}: depths must be positive")]
    Partition(Vec<u32>),
    #[error("invalid Heisenberg record: {0}")]
    Record(String),
    #[error(transparent)]
    Bergman(#[from] BergmanError),
}

/// Mode depths `k_1 ≥ … ≥ k_p ≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PartitionState(Vec<u32>);

impl PartitionState {
    pub fn new(mut ks: Vec<u32>) -> Result<Self, HeisenbergError> {
        if ks.contains(&0) {
            return Err(HeisenbergError::Partition(ks));
        }
        ks.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self(ks))
    }

    pub fn vacuum() -> Self {
        Self(Vec::new())
    }

    pub fn depths(&self) -> &[u32] {
        &self.0
    }

    pub fn weight(&self) -> usize {
        self.0.iter().map(|&k| k as usize).sum()
    }

    pub fn particles(&self) -> usize {
        self.0.len()
    }

    pub fn multiplicity(&self, k: u32) -> usize {
        self.0.iter().filter(|&&d| d == k).count()
    }

    fn with(&self, k: u32) -> Self {
        let mut ks = self.0.clone();
        let pos = ks.iter().position(|&d| d < k).unwrap_or(ks.len());
        ks.insert(pos, k);
        Self(ks)
    }

    fn without(&self, k: u32) -> Option<Self> {
        let pos = self.0.iter().position(|&d| d == k)?;
        let mut ks = self.0.clone();
        ks.remove(pos);
        Some(Self(ks))
    }

    /// `Π_k m_k! k^{m_k}`, the squared norm of the basis state.
    pub fn norm_sq(&self) -> BigInt {
        let mut acc = BigInt::one();
        let mut i = 0;
        while i < self.0.len() {
            let k = self.0[i];
            let m = self.multiplicity(k);
            acc *= factorial_big(m) * BigInt::from(k).pow(m as u32);
            i += m;
        }
        acc
    }

    /// Bergman occupation numbers: depth `k` sits in mode `k - 1`.
    pub fn occupation(&self) -> Vec<u32> {
        let top = self.0.first().copied().unwrap_or(0) as usize;
        let mut nu = vec![0; top];
        for &k in &self.0 {
            nu[k as usize - 1] += 1;
        }
        nu
    }
}

impl Ord for PartitionState {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.weight(), self.particles(), &self.0).cmp(&(other.weight(), other.particles(), &other.0))
    }
}

impl PartialOrd for PartitionState {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// All partitions with exactly `p` parts and weight at most `max_weight`.
pub fn partitions(p: usize, max_weight: usize) -> Vec<PartitionState> {
    fn rec(p: usize, budget: usize, cap: u32, prefix: &mut Vec<u32>, out: &mut Vec<PartitionState>) {
        if p == 0 {
            out.push(PartitionState(prefix.clone()));
            return;
        }
        // Every remaining part is at least 1.
        let top = (cap as usize).min(budget + 1 - p);
        for k in (1..=top).rev() {
            prefix.push(k as u32);
            rec(p - 1, budget - k, k as u32, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if p <= max_weight || p == 0 {
        rec(p, max_weight, u32::MAX, &mut Vec::new(), &mut out);
    }
    out.sort();
    out
}

/// Particle and weight cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeisenbergCutoffs {
    pub particles: usize,
    pub weight: usize,
}

type Terms<S> = BTreeMap<PartitionState, S>;

fn add_term<S: Scalar>(t: &mut Terms<S>, k: PartitionState, v: S) {
    let slot = t.entry(k).or_insert_with(S::zero);
    *slot = slot.clone() + v;
}

fn raw_mode<S: Scalar>(n: i64, t: &Terms<S>) -> Terms<S> {
    let mut out = Terms::new();
    match n.cmp(&0) {
        std::cmp::Ordering::Less => {
            for (k, v) in t {
                add_term(&mut out, k.with((-n) as u32), v.clone());
            }
        }
        std::cmp::Ordering::Greater => {
            for (k, v) in t {
                let m = k.multiplicity(n as u32);
                if let Some(rest) = k.without(n as u32) {
                    add_term(&mut out, rest, v.clone() * S::from_int(n * m as i64));
                }
            }
        }
        std::cmp::Ordering::Equal => {}
    }
    out
}

fn max_depth<S>(t: &Terms<S>) -> i64 {
    t.keys().filter_map(|k| k.depths().first()).copied().max().unwrap_or(0) as i64
}

fn raw_virasoro<S: Scalar>(n: i64, t: &Terms<S>) -> Terms<S> {
    let top = max_depth(t);
    let half = S::from_ratio(1, 2);
    let mut out = Terms::new();
    let mut accumulate = |terms: Terms<S>| {
        for (k, v) in terms {
            add_term(&mut out, k, v * half.clone());
        }
    };
    // k ≥ 0: h(n-k) h(k); h(k) annihilates unless 1 ≤ k ≤ top.
    for k in 1..=top {
        accumulate(raw_mode(n - k, &raw_mode(k, t)));
    }
    // k < 0: h(k) h(n-k); h(n-k) annihilates unless n-k ≤ top.
    for k in (n - top).min(n)..0 {
        accumulate(raw_mode(k, &raw_mode(n - k, t)));
    }
    out.retain(|_, v| !v.is_zero());
    out
}

/// A finitely supported element of the truncated Heisenberg module.
#[derive(Debug, Clone, PartialEq)]
pub struct HeisenbergVector<S: Scalar> {
    cutoffs: HeisenbergCutoffs,
    amps: Terms<S>,
    drops: u64,
}

impl<S: Scalar> HeisenbergVector<S> {
    pub fn zero(cutoffs: HeisenbergCutoffs) -> Self {
        Self { cutoffs, amps: Terms::new(), drops: 0 }
    }

    pub fn vacuum(cutoffs: HeisenbergCutoffs) -> Self {
        Self::basis(PartitionState::vacuum(), cutoffs)
    }

    pub fn basis(state: PartitionState, cutoffs: HeisenbergCutoffs) -> Self {
        let mut v = Self::zero(cutoffs);
        v.set(state, S::one());
        v
    }

    pub fn cutoffs(&self) -> HeisenbergCutoffs {
        self.cutoffs
    }

    pub fn drops(&self) -> u64 {
        self.drops
    }

    fn admissible(&self, k: &PartitionState) -> bool {
        k.particles() <= self.cutoffs.particles && k.weight() <= self.cutoffs.weight
    }

    pub fn set(&mut self, state: PartitionState, amp: S) {
        if self.admissible(&state) {
            self.amps.insert(state, amp);
        } else if !amp.is_zero() {
            self.drops += 1;
        }
    }

    pub fn amp(&self, state: &PartitionState) -> S {
        self.amps.get(state).cloned().unwrap_or_else(S::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PartitionState, &S)> {
        self.amps.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.amps.values().all(Zero::is_zero)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.amps {
            add_term(&mut out.amps, k.clone(), v.clone());
        }
        out.drops += other.drops;
        out
    }

    pub fn scale(&self, s: &S) -> Self {
        Self { cutoffs: self.cutoffs, amps: self.amps.iter().map(|(k, v)| (k.clone(), v.clone() * s.clone())).collect(), drops: self.drops }
    }

    fn from_terms(terms: Terms<S>, cutoffs: HeisenbergCutoffs, drops: u64) -> Self {
        let mut out = Self { cutoffs, amps: Terms::new(), drops };
        for (k, v) in terms {
            if !v.is_zero() {
                out.set(k, v);
            }
        }
        out
    }
}

/// `(u, v)_M`, conjugate-linear in `u`, diagonal with `‖λ‖² = Π m_k! k^{m_k}`.
pub fn inner_m<S: Scalar>(u: &HeisenbergVector<S>, v: &HeisenbergVector<S>) -> S {
    u.amps.iter().fold(S::zero(), |acc, (k, a)| {
        let w = big_to_scalar::<S>(&k.norm_sq());
        acc + a.conj() * v.amp(k) * w
    })
}

fn big_to_scalar<S: Scalar>(n: &BigInt) -> S {
    // Norms of the basis states grow factorially; split to stay exact for rationals.
    let limit = BigInt::from(i64::MAX);
    if n.abs() <= limit {
        return S::from_int(i64::try_from(n).expect("bounded"));
    }
    let base = BigInt::from(1u64 << 31);
    let (q, r) = (n / &base, n % &base);
    big_to_scalar::<S>(&q) * S::from_int(1i64 << 31) + S::from_int(i64::try_from(&r).expect("bounded"))
}

/// `h(n)`: creation for `n < 0`, annihilation with weight `n · multiplicity` for `n > 0`.
pub fn mode_h<S: Scalar>(n: i64, v: &HeisenbergVector<S>) -> HeisenbergVector<S> {
    HeisenbergVector::from_terms(raw_mode(n, &v.amps), v.cutoffs, v.drops)
}

/// `L(n) = ½ (Σ_{k≥0} h(n-k) h(k) + Σ_{k<0} h(k) h(n-k))`.
pub fn virasoro_l<S: Scalar>(n: i64, v: &HeisenbergVector<S>) -> HeisenbergVector<S> {
    HeisenbergVector::from_terms(raw_virasoro(n, &v.amps), v.cutoffs, v.drops)
}

/// `t^{L(0)}`: multiplies each amplitude by `t^{weight}`.
pub fn scale_l0<S: Scalar>(t: &S, v: &HeisenbergVector<S>) -> HeisenbergVector<S> {
    let amps = v.amps.iter().map(|(k, a)| (k.clone(), a.clone() * crate::scalar::powi(t, k.weight() as u32))).collect();
    HeisenbergVector { cutoffs: v.cutoffs, amps, drops: v.drops }
}

/// The invariant bilinear form on basis states, from `h(n)' = -h(-n)` and `(𝟙, 𝟙) = 1`.
pub fn invariant_form(u: &PartitionState, v: &PartitionState) -> BigRational {
    fn rec(u: &[u32], v: &Terms<BigRational>) -> BigRational {
        match u.split_first() {
            None => v.get(&PartitionState::vacuum()).cloned().unwrap_or_else(BigRational::zero),
            Some((&k, rest)) => -rec(rest, &raw_mode(k as i64, v)),
        }
    }
    rec(u.depths(), &Terms::from([(v.clone(), BigRational::one())]))
}

/// `(θ u, v)` with `θ = (-1)^p` on the `p`-particle sector.
pub fn theta_form(u: &PartitionState, v: &PartitionState) -> BigRational {
    let f = invariant_form(u, v);
    if u.particles() % 2 == 1 {
        -f
    } else {
        f
    }
}

/// Gram matrix of `(θ·, ·)` on the `p`-particle sector with weight at most `max_weight`.
pub fn theta_gram(p: usize, max_weight: usize) -> (Vec<PartitionState>, Vec<Vec<BigRational>>) {
    let basis = partitions(p, max_weight);
    let gram = basis.iter().map(|u| basis.iter().map(|v| theta_form(u, v)).collect()).collect();
    (basis, gram)
}

/// Pivots of an exact `LDLᵀ` factorization; `None` if a zero pivot blocks it.
pub fn ldl_pivots(gram: &[Vec<BigRational>]) -> Option<Vec<BigRational>> {
    let n = gram.len();
    let mut a: Vec<Vec<BigRational>> = gram.to_vec();
    let mut pivots = Vec::with_capacity(n);
    for k in 0..n {
        let d = a[k][k].clone();
        if d.is_zero() {
            return None;
        }
        for i in k + 1..n {
            let f = a[i][k].clone() / d.clone();
            for j in k + 1..n {
                let delta = f.clone() * a[k][j].clone();
                a[i][j] -= delta;
            }
        }
        pivots.push(d);
    }
    Some(pivots)
}

/// `Ψ`: `h(-k_1)…h(-k_p)𝟙 ↦ √(p!) Ŝ(h_{k_1-1} ⊗ … ⊗ h_{k_p-1})` in ON Fock coordinates.
///
/// With occupation `ν` of the Bergman modes the image is `√(Πν_i!) Π(i+1)^{ν_i/2} ê_ν`.
pub fn psi<R: Real>(v: &HeisenbergVector<Complex<R>>, cutoffs: FockCutoffs) -> Result<FockVector<R>, HeisenbergError> {
    let mut out = FockVector::zero(cutoffs);
    for (k, a) in v.iter() {
        if let Some(&top) = k.depths().first() {
            if top as usize > cutoffs.modes {
                return Err(HeisenbergError::Cutoff { depth: top, modes: cutoffs.modes });
            }
        }
        let nu = k.occupation();
        let factor = nu
            .iter()
            .enumerate()
            .fold(R::one(), |acc, (i, &m)| acc * factorial::<R>(m as usize).sqrt() * R::lit((i + 1) as f64).powi(m as i32).sqrt());
        let idx = crate::fock::OccupationIndex::new(nu);
        let prev = out.amp(&idx);
        out.set(idx, prev + a * factor);
    }
    Ok(out)
}

/// `C_z^{i,j} = (-1)^i (i+j+1)!/(i! j!) z^{-i-j-2}`.
pub fn contraction_coefficient<R: Real>(i: usize, j: usize, z: Complex<R>) -> Complex<R> {
    let sign = if i.is_multiple_of(2) { R::one() } else { -R::one() };
    let c = sign * factorial::<R>(i + j + 1) / (factorial::<R>(i) * factorial::<R>(j));
    z.powi(-(i as i32) - (j as i32) - 2) * c
}

fn injections(from: usize, into: usize) -> Vec<Vec<usize>> {
    fn rec(k: usize, into: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for t in 0..into {
            if !used[t] {
                used[t] = true;
                cur.push(t);
                rec(k, into, used, cur, out);
                cur.pop();
                used[t] = false;
            }
        }
    }
    let mut out = Vec::new();
    if from <= into {
        rec(from, into, &mut vec![false; into], &mut Vec::new(), &mut out);
    }
    out
}

fn vertex_basis<R: Real>(
    v: &PartitionState,
    w: &PartitionState,
    zeta: Complex<R>,
    cutoffs: FockCutoffs,
) -> Result<FockVector<R>, HeisenbergError> {
    let n_modes = cutoffs.modes;
    // Depth k corresponds to h(-i-1) with i = k - 1.
    let is: Vec<usize> = v.depths().iter().map(|&k| k as usize - 1).collect();
    let js: Vec<usize> = w.depths().iter().map(|&k| k as usize - 1).collect();
    let mut kernel_parts = Vec::with_capacity(is.len());
    for &i in &is {
        let d = kernel_derivative(zeta, i, n_modes)?;
        kernel_parts.push(d.scale(Complex::new(R::one() / factorial::<R>(i), R::zero())));
    }
    let h_parts: Vec<BergmanVector<R>> = js.iter().map(|&j| BergmanVector::h(j, n_modes)).collect();
    let mut out = FockVector::zero(cutoffs);
    for mask in 0u32..(1 << is.len()) {
        let s: Vec<usize> = (0..is.len()).filter(|&p| mask & (1 << p) != 0).collect();
        for t in injections(s.len(), js.len()) {
            let coeff = s.iter().zip(&t).fold(Complex::<R>::one(), |acc, (&p, &q)| acc * contraction_coefficient(is[p], js[q], zeta));
            let mut factors: Vec<BergmanVector<R>> = (0..is.len()).filter(|p| !s.contains(p)).map(|p| kernel_parts[p].clone()).collect();
            factors.extend((0..js.len()).filter(|q| !t.contains(q)).map(|q| h_parts[q].clone()));
            let k = factors.len();
            let sym = symmetric_product(&factors, cutoffs);
            out.add_scaled(&sym, coeff * factorial::<R>(k).sqrt());
        }
    }
    Ok(out)
}

/// `Ψ(Y(r^{L(0)} v, z) s^{L(0)} w)|_{z=ζ}` by the subset/injection expansion.
pub fn vertex_side<R: Real>(
    v: &HeisenbergVector<Complex<R>>,
    w: &HeisenbergVector<Complex<R>>,
    zeta: Complex<R>,
    r: R,
    s: R,
    cutoffs: FockCutoffs,
) -> Result<FockVector<R>, HeisenbergError> {
    if zeta.is_zero() {
        return Err(HeisenbergError::Singular("ζ = 0".into()));
    }
    if zeta.norm() >= R::one() {
        return Err(HeisenbergError::Singular(format!("|ζ| = {} is not inside the disk", zeta.norm())));
    }
    let mut out = FockVector::zero(cutoffs);
    for (kv, av) in v.iter() {
        for (kw, aw) in w.iter() {
            let scale = av * aw * r.powi(kv.weight() as i32) * s.powi(kw.weight() as i32);
            out.add_scaled(&vertex_basis(kv, kw, zeta, cutoffs)?, scale);
        }
    }
    Ok(out)
}

/// Partial sums of `Σ_n ‖v(n) w‖² |ζ|^{-2n-2}`, most annihilating modes first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormProfile {
    /// `(n, ‖v(n) w‖² |ζ|^{-2n-2})` in summation order.
    pub terms: Vec<(i64, f64)>,
    pub partial_sums: Vec<f64>,
    /// Ratio of the last two nonzero terms.
    pub ratio_estimate: f64,
}

fn norm_m_sq<R: Real>(t: &Terms<Complex<R>>) -> f64 {
    t.iter().fold(0.0, |acc, (k, a)| acc + a.norm_sqr().as_f64() * big_to_f64(&k.norm_sq()))
}

fn big_to_f64(n: &BigInt) -> f64 {
    num_traits::ToPrimitive::to_f64(n).unwrap_or(f64::INFINITY)
}

/// The convergence profile for `v ∈ span{h(-l-1)𝟙} = span{L(-1)^l h(-1)𝟙}`.
pub fn norm_convergence_profile<R: Real>(
    v: &HeisenbergVector<Complex<R>>,
    w: &HeisenbergVector<Complex<R>>,
    zeta: Complex<R>,
    terms: usize,
) -> Result<NormProfile, HeisenbergError> {
    if zeta.is_zero() || zeta.norm() >= R::one() {
        return Err(HeisenbergError::Singular("profile needs 0 < |ζ| < 1".into()));
    }
    let support: Vec<_> = v.iter().filter(|(_, a)| !a.is_zero()).collect();
    let (state, amp) = match support.as_slice() {
        [(k, a)] if k.particles() == 1 => ((*k).clone(), **a),
        _ => return Err(HeisenbergError::NotImplemented("only multiples of L(-1)^l h(-1)𝟙 have explicit modes here".into())),
    };
    let l = state.depths()[0] as i64 - 1;
    // v = amp/l! · L(-1)^l h(-1)𝟙, and (L(-1)^l h(-1)𝟙)(n) = Π_{u<l} (u - n) · h(n - l).
    let lf = factorial::<R>(l as usize);
    let z2 = zeta.norm_sqr().as_f64();
    let top = l + max_depth(&w.amps);
    let mut out = NormProfile { terms: Vec::new(), partial_sums: Vec::new(), ratio_estimate: f64::NAN };
    let mut total = 0.0;
    for step in 0..terms as i64 {
        let n = top - step;
        let falling = (0..l).fold(1.0, |acc, u| acc * (u - n) as f64);
        let image = raw_mode(n - l, &w.amps);
        let coef = (amp / lf).norm_sqr().as_f64() * falling * falling;
        let term = coef * norm_m_sq(&image) * z2.powi((-n - 1) as i32);
        total += term;
        out.terms.push((n, term));
        out.partial_sums.push(total);
    }
    let nonzero: Vec<f64> = out.terms.iter().map(|t| t.1).filter(|&t| t > 0.0).collect();
    if nonzero.len() >= 2 {
        out.ratio_estimate = nonzero[nonzero.len() - 1] / nonzero[nonzero.len() - 2];
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionAmp {
    pub partition: Vec<u32>,
    pub amp: [f64; 2],
}

/// JSON form of a complex [`HeisenbergVector`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeisenbergRecord {
    pub particles: usize,
    pub weight: usize,
    pub amps: Vec<PartitionAmp>,
}

impl HeisenbergVector<Complex<f64>> {
    pub fn to_record(&self) -> HeisenbergRecord {
        HeisenbergRecord {
            particles: self.cutoffs.particles,
            weight: self.cutoffs.weight,
            amps: self.amps.iter().map(|(k, a)| PartitionAmp { partition: k.depths().to_vec(), amp: [a.re, a.im] }).collect(),
        }
    }

    pub fn from_record(rec: &HeisenbergRecord) -> Result<Self, HeisenbergError> {
        let mut out = Self::zero(HeisenbergCutoffs { particles: rec.particles, weight: rec.weight });
        for a in &rec.amps {
            let k = PartitionState::new(a.partition.clone())?;
            if !out.admissible(&k) {
                return Err(HeisenbergError::Record(format!("partition {:?} exceeds the cutoffs", a.partition)));
            }
            add_term(&mut out.amps, k, Complex::new(a.amp[0], a.amp[1]));
        }
        Ok(out)
    }
}
