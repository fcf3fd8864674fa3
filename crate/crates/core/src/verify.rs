//! Verification suites and their run configuration.
//!
//! Each suite evaluates a family of identities at finite truncation and
//! returns one [`Check`] per identity. A check always carries the measured
//! quantity in `value`, the target in `expected` and `|value - expected|` in
//! `abs_err`. For inequality checks `expected` holds the bound and the
//! relation is recorded under `params.relation`.
//!
//! Dual-cutoff checks compare a coarse and a fine truncation. They pass when
//! the fine discrepancy is at most `factor` times the coarse one, or when it
//! is already below [`ROUNDING_FLOOR`], where further shrinking cannot be
//! observed in double precision.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::bergman::{contraction_functional, pair_functional, rho_cl_matrix, ActionMatrix, BergmanError, OperatorTag};
use crate::cocycle::{
    affine_g, cocycle_f, cocycle_f_exact, grunsky, hs_assess, hs_norm_sq, hs_partial_profile, verify_f_cocycle, verify_g_cocycles,
    CocycleError, CocycleReport, GrunskyMatrix, GrunskySource, HsVerdict,
};
use crate::diskmap::{dm_compose_with_cutoff, Configuration, DiskMap, DiskMapError, Membership};
use crate::fock::{dilation_trace, rho1, rho_n, rho_n_normalized, FockCutoffs, FockError, FockVector, OccupationIndex};
use crate::heisenberg::{
    norm_convergence_profile, partitions, psi, vertex_side, HeisenbergCutoffs, HeisenbergError, HeisenbergVector, PartitionState,
};
use crate::scalar::{binomial, exact_complex};
use crate::series::TruncatedSeries1;

/// Fine-cutoff discrepancies below this are treated as converged.
pub const ROUNDING_FLOOR: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    DiskMap(#[from] DiskMapError),
    #[error(transparent)]
    Cocycle(#[from] CocycleError),
    #[error(transparent)]
    Bergman(#[from] BergmanError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Heisenberg(#[from] HeisenbergError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    Extended,
}

impl FromStr for Precision {
    type Err = VerifyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "double" => Ok(Precision::Double),
            "extended" => Ok(Precision::Extended),
            other => Err(VerifyError::Config(format!("unknown precision `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Cutoffs {
    #[serde(rename = "N")]
    pub modes: usize,
    #[serde(rename = "P")]
    pub particles: usize,
    #[serde(rename = "W")]
    pub weight: usize,
}

impl Default for Cutoffs {
    fn default() -> Self {
        Self { modes: 48, particles: 6, weight: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub conv_factor: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs_tol: 1e-8, conv_factor: 0.6 }
    }
}

/// Parameters of one verification run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cutoffs: Cutoffs,
    pub tolerance: Tolerance,
    pub precision: Precision,
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), VerifyError> {
        let fail = |m: &str| Err(VerifyError::Config(m.into()));
        if self.cutoffs.modes < 4 {
            return fail("N must be at least 4");
        }
        if self.cutoffs.particles < 1 {
            return fail("P must be at least 1");
        }
        if !(self.tolerance.abs_tol > 0.0) {
            return fail("abs_tol must be positive");
        }
        if !(self.tolerance.conv_factor > 0.0 && self.tolerance.conv_factor <= 1.0) {
            return fail("conv_factor must lie in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub params: Value,
    pub value: f64,
    pub expected: f64,
    pub abs_err: f64,
    pub pass: bool,
}

impl Check {
    /// `|value - expected| ≤ tol`.
    fn close(id: &str, mut params: Value, value: f64, expected: f64, tol: f64) -> Self {
        let abs_err = (value - expected).abs();
        params["tol"] = json!(tol);
        Self { id: id.into(), params, value, expected, abs_err, pass: abs_err <= tol }
    }

    /// A discrepancy that should vanish.
    fn vanishes(id: &str, params: Value, value: f64, tol: f64) -> Self {
        Self::close(id, params, value, 0.0, tol)
    }

    /// `value < bound`.
    fn below(id: &str, mut params: Value, value: f64, bound: f64) -> Self {
        params["relation"] = json!("<");
        Self { id: id.into(), params, value, expected: bound, abs_err: (value - bound).abs(), pass: value < bound }
    }

    /// `value ≥ bound`.
    fn at_least(id: &str, mut params: Value, value: f64, bound: f64) -> Self {
        params["relation"] = json!(">=");
        Self { id: id.into(), params, value, expected: bound, abs_err: (value - bound).abs(), pass: value >= bound }
    }

    fn holds(id: &str, mut params: Value, ok: bool) -> Self {
        params["relation"] = json!("holds");
        let value = if ok { 1.0 } else { 0.0 };
        Self { id: id.into(), params, value, expected: 1.0, abs_err: 1.0 - value, pass: ok }
    }

    /// Fine discrepancy against `factor` times the coarse one.
    fn shrinks(id: &str, mut params: Value, coarse: f64, fine: f64, factor: f64) -> Self {
        params["coarse"] = json!(coarse);
        params["factor"] = json!(factor);
        params["floor"] = json!(ROUNDING_FLOOR);
        params["relation"] = json!("shrinks");
        let bound = factor * coarse;
        let pass = fine <= bound || fine <= ROUNDING_FLOOR;
        Self { id: id.into(), params, value: fine, expected: bound, abs_err: (fine - bound).abs(), pass }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suite {
    CocycleIdentities,
    Monoid,
    Covariance,
    Operad,
    Trace,
    Correspondence,
    Convergence,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::CocycleIdentities,
        Suite::Monoid,
        Suite::Covariance,
        Suite::Operad,
        Suite::Trace,
        Suite::Correspondence,
        Suite::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::CocycleIdentities => "cocycle-identities",
            Suite::Monoid => "monoid",
            Suite::Covariance => "covariance",
            Suite::Operad => "operad",
            Suite::Trace => "trace",
            Suite::Correspondence => "correspondence",
            Suite::Convergence => "convergence",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = VerifyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| VerifyError::UnknownSuite(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.failed == 0
    }
}

pub fn run_suite(suite: Suite, cfg: &RunConfig) -> Result<SuiteReport, VerifyError> {
    cfg.validate()?;
    if cfg.precision == Precision::Extended && suite != Suite::CocycleIdentities {
        return Err(VerifyError::Config(format!("extended precision is not available for suite `{suite}`")));
    }
    let checks = match suite {
        Suite::CocycleIdentities => cocycle_identities(cfg)?,
        Suite::Monoid => monoid(cfg)?,
        Suite::Covariance => covariance(cfg)?,
        Suite::Operad => operad(cfg)?,
        Suite::Trace => trace(cfg)?,
        Suite::Correspondence => correspondence(cfg)?,
        Suite::Convergence => convergence(cfg)?,
    };
    let passed = checks.iter().filter(|c| c.pass).count();
    Ok(SuiteReport { suite: suite.name().into(), config: *cfg, failed: checks.len() - passed, passed, checks })
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn series_map(coeffs: &[(f64, f64)]) -> DiskMap<f64> {
    let s = TruncatedSeries1::new(coeffs.iter().map(|&(a, b)| c(a, b)).collect()).expect("finite coefficients");
    DiskMap::series(s, 0.0)
}

fn affine(re: f64, im: f64, r: f64) -> Result<DiskMap<f64>, VerifyError> {
    Ok(DiskMap::affine(c(re, im), r)?)
}

fn compose(phi: &DiskMap<f64>, psi: &DiskMap<f64>, n: usize) -> Result<DiskMap<f64>, VerifyError> {
    Ok(dm_compose_with_cutoff(phi, psi, 2 * n + 2)?)
}

fn report_params(r: &CocycleReport) -> Value {
    json!({ "N": r.cutoff, "triangular": r.triangular, "window": r.window_discrepancy })
}

fn random_mobius(rng: &mut ChaCha8Rng) -> Result<DiskMap<f64>, VerifyError> {
    let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let rad = rng.gen_range(0.0..0.8);
    let arg = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    Ok(DiskMap::mobius(theta, Complex64::from_polar(rad, arg))?)
}

fn quadratic(cc: Complex64) -> DiskMap<f64> {
    DiskMap::series(TruncatedSeries1::new(vec![c(0.0, 0.0), c(1.0, 0.0), cc]).expect("finite"), 0.0)
}

/// `d_{n,m} = -c²(n+m+1)(-c)^{n+m} C(n+m, n)` for `z + cz²`.
pub fn quadratic_closed_form(cc: Complex64, i: usize, j: usize) -> Complex64 {
    let k = i + j;
    -cc * cc * (k as f64 + 1.0) * (-cc).powu(k as u32) * binomial::<f64>(k, i)
}

/// Cutoff for the tangency profile, large enough to read `S_{2k}` for `k ≤ 40`.
pub const TANGENCY_CUTOFF: usize = 81;

/// Lower bound on `S_{2k} - S_k` expected from a tangent pair.
pub const TANGENCY_FLOOR: f64 = 0.05;

/// `min_{1 ≤ k ≤ kmax} (S_{2k} - S_k)` for a partial-sum profile indexed by degree.
pub fn min_doubling_increment(profile: &[(usize, f64)], kmax: usize) -> f64 {
    (1..=kmax).filter(|k| 2 * k < profile.len()).map(|k| profile[2 * k].1 - profile[k].1).fold(f64::INFINITY, f64::min)
}

fn cocycle_identities(cfg: &RunConfig) -> Result<Vec<Check>, VerifyError> {
    let n = cfg.cutoffs.modes;
    let tol = cfg.tolerance.abs_tol;
    let factor = cfg.tolerance.conv_factor;
    let mut out = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let m = random_mobius(&mut rng)?;
        let g = grunsky(&cocycle_f(&m, n)?, GrunskySource::F);
        worst = worst.max(hs_norm_sq(&g, g.valid_total_degree())?);
    }
    out.push(Check::vanishes("mobius-hs-norm", json!({ "N": n, "maps": 10, "seed": cfg.seed }), worst, 1e-18));

    for (label, cc) in [("0.1", c(0.1, 0.0)), ("0.2i", c(0.0, 0.2))] {
        let params = json!({ "N": n, "c": label, "precision": cfg.precision });
        let err = match cfg.precision {
            Precision::Double => cocycle_f(&quadratic(cc), n)?
                .trusted_entries()
                .map(|(i, j, v)| (v - quadratic_closed_form(cc, i, j)).norm())
                .fold(0.0, f64::max),
            Precision::Extended => {
                let exact = cocycle_f_exact(&quadratic(cc), n)?;
                let mut worst: f64 = 0.0;
                for (i, j, v) in exact.trusted_entries() {
                    let e = quadratic_closed_form(cc, i, j);
                    let d = v - exact_complex(e.re, e.im);
                    let re = num_traits::ToPrimitive::to_f64(&d.re).unwrap_or(f64::INFINITY);
                    let im = num_traits::ToPrimitive::to_f64(&d.im).unwrap_or(f64::INFINITY);
                    worst = worst.max(re.hypot(im));
                }
                worst
            }
        };
        out.push(Check::vanishes("quadratic-closed-form", params, err, 1e-10));
    }

    // Triangular family: every substitution fixes 0, so truncation is exact.
    let mob = DiskMap::mobius(0.4, c(0.3, -0.2))?;
    let tri = series_map(&[(0.0, 0.0), (0.6, 0.0), (0.1, 0.05)]);
    let tri2 = series_map(&[(0.0, 0.0), (0.7, 0.1), (-0.05, 0.0), (0.02, 0.0)]);
    let rep = verify_f_cocycle(&mob, &tri, n)?;
    out.push(Check::vanishes("f-cocycle/triangular", report_params(&rep), rep.max_discrepancy, tol));
    let (g1, g2) = (affine(0.5, 0.1, 0.3)?, affine(-0.4, 0.0, 0.35)?);
    let rep = verify_g_cocycles(&mob, &g1, &g2, &tri, &tri2, n)?;
    out.push(Check::vanishes("g-post-cocycle/triangular", report_params(&rep.post), rep.post.max_discrepancy, tol));
    out.push(Check::vanishes("g-pre-cocycle/triangular", report_params(&rep.pre), rep.pre.max_discrepancy, tol));

    // General family: off-centre inner maps and a nonlinear outer map.
    let quad = series_map(&[(0.0, 0.0), (0.6, 0.0), (0.2, 0.05)]);
    let off = affine(0.3, -0.1, 0.5)?;
    let mob2 = DiskMap::mobius(-0.7, c(0.5, 0.45))?;
    let coarse_n = n / 2;
    let f_lo = verify_f_cocycle(&quad, &mob2, coarse_n)?;
    let f_hi = verify_f_cocycle(&quad, &mob2, n)?;
    out.push(Check::shrinks("f-cocycle/general", json!({ "N": n }), f_lo.window_discrepancy, f_hi.window_discrepancy, factor));
    let g_lo = verify_g_cocycles(&quad, &g1, &g2, &mob2, &off, coarse_n)?;
    let g_hi = verify_g_cocycles(&quad, &g1, &g2, &mob2, &off, n)?;
    out.push(Check::shrinks(
        "g-post-cocycle/general",
        json!({ "N": n }),
        g_lo.post.window_discrepancy,
        g_hi.post.window_discrepancy,
        factor,
    ));
    out.push(Check::shrinks("g-pre-cocycle/general", json!({ "N": n }), g_lo.pre.window_discrepancy, g_hi.pre.window_discrepancy, factor));

    for (sigma, r) in [(1.0, 0.4), (0.9, 0.36)] {
        let g = grunsky(&affine_g(c(0.4, 0.0), r, c(-0.4, 0.0), r, TANGENCY_CUTOFF), GrunskySource::G);
        let profile: Vec<(usize, f64)> = hs_partial_profile(&g);
        let assessment = hs_assess(&profile);
        let params = json!({ "N": TANGENCY_CUTOFF, "sigma": sigma, "verdict": assessment.verdict });
        if sigma >= 1.0 {
            let inc = min_doubling_increment(&profile, 40);
            out.push(Check::at_least("tangency/non-cauchy", params, inc, TANGENCY_FLOOR));
        } else {
            out.push(Check::holds("tangency/separated-converges", params, assessment.verdict == HsVerdict::Converged));
        }
    }
    Ok(out)
}

/// Every occupation index with `p` particles in modes `< modes`.
fn indices(modes: usize, p: usize) -> Vec<OccupationIndex> {
    fn rec(start: usize, modes: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<OccupationIndex>) {
        if left == 0 {
            out.push(OccupationIndex::from_modes(cur));
            return;
        }
        for m in start..modes {
            cur.push(m);
            rec(m, modes, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, modes, p, &mut Vec::new(), &mut out);
    out
}

/// Random `p`-particle state supported on modes `< 4`.
fn random_state(rng: &mut ChaCha8Rng, p: usize, cutoffs: FockCutoffs) -> FockVector<f64> {
    let mut v = FockVector::zero(cutoffs);
    for k in indices(cutoffs.modes.min(4), p) {
        v.set(k, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    }
    v
}

/// Largest coordinate difference over indices whose modes are all `< span`.
fn window_diff(a: &FockVector<f64>, b: &FockVector<f64>, span: usize) -> f64 {
    let keys = a.iter().chain(b.iter()).map(|(k, _)| k).filter(|k| k.span() <= span);
    keys.map(|k| (a.amp(k) - b.amp(k)).norm()).fold(0.0, f64::max)
}

fn grunsky_matrix(g: &GrunskyMatrix<f64>, n: usize) -> ActionMatrix<f64> {
    ActionMatrix::from_fn(n, OperatorTag::Derived, |i, j| g.at(i, j))
}

/// `c_ψ + ρ_cl(ψ)ᵀ c_φ ρ_cl(ψ)` against `c_{φ∘ψ}` over the `window x window` block.
fn cocycle_law_gap(phi: &DiskMap<f64>, psi_map: &DiskMap<f64>, n: usize, window: usize) -> Result<f64, VerifyError> {
    let comp = compose(phi, psi_map, n)?;
    let lhs = grunsky_matrix(&contraction_functional(&comp, n)?, n);
    let rho = rho_cl_matrix(psi_map, n);
    let inner = grunsky_matrix(&contraction_functional(phi, n)?, n);
    let pulled = rho.transpose().matmul(&inner)?.matmul(&rho)?;
    let base = grunsky_matrix(&contraction_functional(psi_map, n)?, n);
    Ok(block_gap(&lhs, |i, j| base.get(i, j) + pulled.get(i, j), window))
}

fn block_gap(lhs: &ActionMatrix<f64>, rhs: impl Fn(usize, usize) -> Complex64, window: usize) -> f64 {
    let w = window.min(lhs.cutoff());
    (0..w).flat_map(|i| (0..w).map(move |j| (i, j))).map(|(i, j)| (lhs.get(i, j) - rhs(i, j)).norm()).fold(0.0, f64::max)
}

fn halving(cfg: &RunConfig) -> f64 {
    cfg.tolerance.conv_factor.min(0.5)
}

fn monoid(cfg: &RunConfig) -> Result<Vec<Check>, VerifyError> {
    let n = cfg.cutoffs.modes.min(32);
    let tol = cfg.tolerance.abs_tol;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();

    let phi = series_map(&[(0.0, 0.0), (0.6, 0.0), (0.15, 0.05)]);
    let psi_map = series_map(&[(0.0, 0.0), (0.5, 0.1), (-0.1, 0.0), (0.02, 0.0)]);
    let comp = compose(&phi, &psi_map, n)?;
    let cf = FockCutoffs { modes: n, particles: 3 };
    for p in 1..=3 {
        let v = random_state(&mut rng, p, cf);
        let lhs = rho1(&comp, &v)?;
        let rhs = rho1(&phi, &rho1(&psi_map, &v)?)?;
        out.push(Check::vanishes("monoid/triangular", json!({ "N": n, "p": p }), lhs.max_abs_diff(&rhs), tol));
    }
    let gap = cocycle_law_gap(&phi, &psi_map, n, n)?;
    out.push(Check::vanishes("cocycle-law/triangular", json!({ "N": n }), gap, tol));

    // General family: ψ moves the origin, so ρ_cl(ψ) is dense and truncation matters.
    let phi_gen = compose(&series_map(&[(0.0, 0.0), (0.6, 0.0), (0.2, 0.0)]), &DiskMap::mobius(0.2, c(0.4, 0.2))?, 64)?;
    let psi_gen = affine(0.6, 0.1, 0.3)?;
    let (coarse, fine) = (n / 4, n / 2);
    let window = 4;
    for p in 1..=3 {
        let mut gaps = [0.0; 2];
        let seed_state = random_state(&mut rng, p, FockCutoffs { modes: coarse, particles: 3 });
        for (slot, m) in [coarse, fine].into_iter().enumerate() {
            let cfm = FockCutoffs { modes: m, particles: 3 };
            let v = seed_state.recut(cfm)?;
            let comp = compose(&phi_gen, &psi_gen, m)?;
            let lhs = rho1(&comp, &v)?;
            let rhs = rho1(&phi_gen, &rho1(&psi_gen, &v)?)?;
            gaps[slot] = window_diff(&lhs, &rhs, window);
        }
        out.push(Check::shrinks("monoid/general", json!({ "N": fine, "p": p, "window": window }), gaps[0], gaps[1], halving(cfg)));
    }
    let lo = cocycle_law_gap(&phi_gen, &psi_gen, coarse, window)?;
    let hi = cocycle_law_gap(&phi_gen, &psi_gen, n, window)?;
    out.push(Check::shrinks("cocycle-law/general", json!({ "N": n, "window": window }), lo, hi, halving(cfg)));
    Ok(out)
}

/// `C_{φ₁∘ψ₁, φ₂∘ψ₂}` against `ρ_cl(ψ₁)ᵀ C_{φ₁,φ₂} ρ_cl(ψ₂)`.
fn pre_covariance_gap(maps: [&DiskMap<f64>; 4], n: usize, window: usize) -> Result<f64, VerifyError> {
    let [phi1, phi2, psi1, psi2] = maps;
    let lhs = grunsky_matrix(&pair_functional(&compose(phi1, psi1, n)?, &compose(phi2, psi2, n)?, n)?, n);
    let mid = grunsky_matrix(&pair_functional(phi1, phi2, n)?, n);
    let rhs = rho_cl_matrix(psi1, n).transpose().matmul(&mid)?.matmul(&rho_cl_matrix(psi2, n))?;
    Ok(block_gap(&lhs, |i, j| rhs.get(i, j), window))
}

/// `C_{h∘φ₁, h∘φ₂}` against `C_{φ₁,φ₂} + ρ_cl(φ₁)ᵀ c_h ρ_cl(φ₂)`.
fn post_covariance_gap(h: &DiskMap<f64>, phi1: &DiskMap<f64>, phi2: &DiskMap<f64>, n: usize, window: usize) -> Result<f64, VerifyError> {
    let lhs = grunsky_matrix(&pair_functional(&compose(h, phi1, n)?, &compose(h, phi2, n)?, n)?, n);
    let base = grunsky_matrix(&pair_functional(phi1, phi2, n)?, n);
    let ch = grunsky_matrix(&contraction_functional(h, n)?, n);
    let pulled = rho_cl_matrix(phi1, n).transpose().matmul(&ch)?.matmul(&rho_cl_matrix(phi2, n))?;
    Ok(block_gap(&lhs, |i, j| base.get(i, j) + pulled.get(i, j), window))
}

fn covariance(cfg: &RunConfig) -> Result<Vec<Check>, VerifyError> {
    let n = cfg.cutoffs.modes;
    let tol = cfg.tolerance.abs_tol;
    let factor = cfg.tolerance.conv_factor;
    let coarse = n / 2;
    let window = 8.min(coarse);
    let phi1 = affine(0.5, 0.1, 0.35)?;
    let phi2 = affine(-0.5, -0.05, 0.4)?;
    let psi1 = series_map(&[(0.0, 0.0), (0.6, 0.0), (0.1, 0.05)]);
    let psi2 = DiskMap::mobius(0.5, c(0.0, 0.0))?;
    let mut out = Vec::new();
    let gap = pre_covariance_gap([&phi1, &phi2, &psi1, &psi2], n, n)?;
    out.push(Check::vanishes("pre-composition/triangular", json!({ "N": n }), gap, tol));

    let psi3 = affine(0.6, -0.1, 0.3)?;
    let lo = pre_covariance_gap([&phi1, &phi2, &psi1, &psi3], coarse, window)?;
    let hi = pre_covariance_gap([&phi1, &phi2, &psi1, &psi3], n, window)?;
    out.push(Check::shrinks("pre-composition/general", json!({ "N": n, "window": window }), lo, hi, factor));

    let h = series_map(&[(0.0, 0.0), (0.6, 0.0), (0.2, 0.0)]);
    let lo = post_covariance_gap(&h, &phi1, &phi2, coarse, window)?;
    let hi = post_covariance_gap(&h, &phi1, &phi2, n, window)?;
    out.push(Check::shrinks("post-composition/general", json!({ "N": n, "window": window }), lo, hi, factor));
    Ok(out)
}

/// `ρ_{(g, g_out∘h₁, g_out∘h₂)}(v, w₁, w₂)` against `ρ_{(g, g_out)}(v, ρ_{(h₁,h₂)}(w₁, w₂))`.
fn operad_gap(
    g: &DiskMap<f64>,
    g_out: &DiskMap<f64>,
    hs: [&DiskMap<f64>; 2],
    inputs: &[FockVector<f64>; 3],
    cf: FockCutoffs,
) -> Result<f64, VerifyError> {
    let n = cf.modes;
    let composed = vec![g.clone(), compose(g_out, hs[0], n)?, compose(g_out, hs[1], n)?];
    let lhs = rho_n(&Configuration::new(composed, Membership::Embedded)?, inputs, cf)?;
    let inner_cfg = Configuration::new(vec![hs[0].clone(), hs[1].clone()], Membership::Embedded)?;
    let inner = rho_n(&inner_cfg, &inputs[1..], cf)?;
    let outer_cfg = Configuration::new(vec![g.clone(), g_out.clone()], Membership::Embedded)?;
    let rhs = rho_n(&outer_cfg, &[inputs[0].clone(), inner], cf)?;
    Ok(lhs.max_abs_diff(&rhs))
}

fn operad_inputs(rng: &mut ChaCha8Rng, cf: FockCutoffs) -> [FockVector<f64>; 3] {
    let v = random_state(rng, 1, cf).add(&random_state(rng, 2, cf));
    [v, random_state(rng, 1, cf), random_state(rng, 1, cf).add(&FockVector::vacuum(cf))]
}

fn operad(cfg: &RunConfig) -> Result<Vec<Check>, VerifyError> {
    let n = cfg.cutoffs.modes.min(24);
    let tol = cfg.tolerance.abs_tol;
    let cf = FockCutoffs { modes: n, particles: cfg.cutoffs.particles.max(4) };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let coarse = n / 2;
    let cf_lo = FockCutoffs { modes: coarse, ..cf };
    let [a, b, d] = operad_inputs(&mut rng, cf_lo);
    let inputs = [a.recut(cf)?, b.recut(cf)?, d.recut(cf)?];
    let mut out = Vec::new();

    let g = affine(-0.75, 0.0, 0.2)?;
    let g_out = affine(0.0, 0.0, 0.3)?;
    let (h1, h2) = (affine(0.5, 0.0, 0.3)?, affine(-0.1, 0.55, 0.3)?);
    let gap = operad_gap(&g, &g_out, [&h1, &h2], &inputs, cf)?;
    out.push(Check::vanishes("operad/affine", json!({ "N": n, "P": cf.particles }), gap, tol));

    // Möbius-dressed inner maps are no longer affine and converge with N.
    let dress = DiskMap::mobius(0.3, c(0.5, -0.3))?;
    let (d1, d2) = (compose(&h1, &dress, n)?, compose(&h2, &dress, n)?);
    let inputs_lo = [inputs[0].recut(cf_lo)?, inputs[1].recut(cf_lo)?, inputs[2].recut(cf_lo)?];
    let lo = operad_gap(&g, &g_out, [&d1, &d2], &inputs_lo, cf_lo)?;
    let hi = operad_gap(&g, &g_out, [&d1, &d2], &inputs, cf)?;
    out.push(Check::shrinks("operad/mobius-dressed", json!({ "N": n, "P": cf.particles }), lo, hi, cfg.tolerance.conv_factor));

    let maps = vec![g.clone(), h1.clone(), h2.clone()];
    let a = rho_n(&Configuration::new(maps, Membership::Embedded)?, &inputs, cf)?;
    let b =
        rho_n(&Configuration::new(vec![h2, g, h1], Membership::Embedded)?, &[inputs[2].clone(), inputs[0].clone(), inputs[1].clone()], cf)?;
    out.push(Check::vanishes("slot-equivariance", json!({ "N": n, "permutation": [2, 0, 1] }), a.max_abs_diff(&b), 1e-12));
    Ok(out)
}

/// `Π_{i=1}^{P} (1 - r^{N+i}) / (1 - r^i)`, the weighted count of states with at most `P` particles in `N` modes.
pub fn gaussian_binomial_trace(r: f64, modes: usize, particles: usize) -> f64 {
    (1..=particles).fold(1.0, |acc, i| acc * (1.0 - r.powi((modes + i) as i32)) / (1.0 - r.powi(i as i32)))
}

fn trace(cfg: &RunConfig) -> Result<Vec<Check>, VerifyError> {
    let (n, p) = (cfg.cutoffs.modes, cfg.cutoffs.particles);
    let r = 0.5;
    let rho = rho_cl_matrix(&affine(0.0, 0.0, r)?, n);
    let spectrum_err = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let target = if i == j { r.powi(i as i32 + 1) } else { 0.0 };
            (rho.get(i, j) - c(target, 0.0)).norm()
        })
        .fold(0.0, f64::max);
    let t = dilation_trace(r, n, p)?;
    let params = json!({ "r": r, "N": n, "P": p });
    Ok(vec![
        Check::vanishes("dilation-spectrum", params.clone(), spectrum_err, 1e-12),
        Check::close("dilation-trace/closed-form", params.clone(), t.value, gaussian_binomial_trace(r, n, p), 1e-12),
        Check::close(
            "dilation-trace/product",
            json!({ "r": r, "N": n, "P": p, "tail_bound": t.tail_bound }),
            t.value,
            t.reference,
            t.tail_bound,
        ),
    ])
}

/// Discrepancies between the operadic and vertex sides over every basis pair of weight `≤ max_weight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrespondenceGap {
    /// Operadic side at the coarse cutoff against the vertex side at the fine cutoff.
    pub coarse: f64,
    /// Both sides at the fine cutoff.
    pub fine: f64,
    pub pairs: usize,
}

pub fn correspondence_gap(
    max_weight: usize,
    coarse: usize,
    fine: usize,
    zeta: Complex64,
    r: f64,
    s: f64,
) -> Result<CorrespondenceGap, VerifyError> {
    let particles = 2 * max_weight;
    let big = HeisenbergCutoffs { particles, weight: max_weight };
    let states: Vec<_> = (0..=max_weight).flat_map(|p| partitions(p, max_weight)).collect();
    let pairs: Vec<_> = states.iter().flat_map(|v| states.iter().map(move |w| (v, w))).collect();
    let cfg = Configuration::new(vec![DiskMap::affine(zeta, r)?, DiskMap::affine(Complex64::zero(), s)?], Membership::Embedded)?;
    let gaps: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|(v, w)| -> Result<(f64, f64), VerifyError> {
            let hv = HeisenbergVector::<Complex64>::basis((*v).clone(), big);
            let hw = HeisenbergVector::<Complex64>::basis((*w).clone(), big);
            let side = |m: usize| -> Result<FockVector<f64>, VerifyError> {
                let cf = FockCutoffs { modes: m, particles };
                Ok(rho_n_normalized(&cfg, &[psi(&hv, cf)?, psi(&hw, cf)?], cf)?)
            };
            let cf = FockCutoffs { modes: fine, particles };
            let vertex = vertex_side(&hv, &hw, zeta, r, s, cf)?;
            Ok((side(coarse)?.max_abs_diff(&vertex), side(fine)?.max_abs_diff(&vertex)))
        })
        .collect::<Result<_, _>>()?;
    let (coarse_gap, fine_gap) = gaps.iter().fold((0.0f64, 0.0f64), |acc, g| (acc.0.max(g.0), acc.1.max(g.1)));
    Ok(CorrespondenceGap { coarse: coarse_gap, fine: fine_gap, pairs: pairs.len() })
}

fn correspondence(cfg: &RunConfig) -> Result<Vec<Check>, VerifyError> {
    let fine = cfg.cutoffs.modes.min(40);
    let coarse = fine / 2;
    let w = cfg.cutoffs.weight.min(4);
    let (zeta, r, s) = (c(0.5, 0.0), 0.2, 0.2);
    let gap = correspondence_gap(w, coarse, fine, zeta, r, s)?;
    let params = json!({ "N": fine, "W": w, "zeta": [zeta.re, zeta.im], "r": r, "s": s, "pairs": gap.pairs });
    let big = HeisenbergCutoffs { particles: 2, weight: 1 };
    let h1 = HeisenbergVector::<Complex64>::basis(PartitionState::new(vec![1])?, big);
    let witness = vertex_side(&h1, &h1, zeta, r, s, FockCutoffs { modes: fine, particles: 2 })?.vacuum_amplitude();
    Ok(vec![
        Check::vanishes("correspondence/agreement", params.clone(), gap.fine, cfg.tolerance.abs_tol),
        Check::shrinks("correspondence/shrink", params, gap.coarse, gap.fine, halving(cfg)),
        Check::close(
            "two-point-witness",
            json!({ "zeta": [zeta.re, zeta.im], "r": r, "s": s }),
            witness.re,
            r * s / zeta.norm_sqr(),
            cfg.tolerance.abs_tol,
        ),
    ])
}

fn convergence(cfg: &RunConfig) -> Result<Vec<Check>, VerifyError> {
    let zeta = c(0.5, 0.0);
    let big = HeisenbergCutoffs { particles: 4, weight: 8 };
    let basis =
        |ks: Vec<u32>| -> Result<HeisenbergVector<Complex64>, VerifyError> { Ok(HeisenbergVector::basis(PartitionState::new(ks)?, big)) };
    let h1 = basis(vec![1])?;
    let vac = basis(vec![])?;
    let mut out = Vec::new();

    let p = norm_convergence_profile(&h1, &h1, zeta, 40)?;
    let monotone = p.partial_sums.windows(2).all(|w| w[1] >= w[0]);
    let params = json!({ "v": [1], "w": [1], "zeta": 0.5, "terms": 40 });
    out.push(Check::below("profile-ratio", params.clone(), p.ratio_estimate, 0.3));
    out.push(Check::holds("profile-monotone", params, monotone));

    let p = norm_convergence_profile(&h1, &vac, zeta, 400)?;
    let sum = p.partial_sums.last().copied().unwrap_or(f64::NAN);
    let closed = 1.0 / (1.0 - zeta.norm_sqr()).powi(2);
    out.push(Check::close(
        "profile-sum/vacuum",
        json!({ "v": [1], "w": [], "zeta": 0.5, "terms": 400 }),
        sum,
        closed,
        cfg.tolerance.abs_tol,
    ));

    let v = basis(vec![3])?;
    let w = basis(vec![2, 1])?;
    let p = norm_convergence_profile(&v, &w, zeta, 80)?;
    let params = json!({ "v": [3], "w": [2, 1], "zeta": 0.5, "terms": 80 });
    out.push(Check::below("profile-ratio/derivative", params, p.ratio_estimate, 1.0));
    Ok(out)
}
