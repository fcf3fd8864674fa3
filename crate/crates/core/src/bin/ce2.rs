use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde::de::DeserializeOwned;
use serde::Serialize;

use ce2_core::cocycle::{
    cocycle_f, cocycle_f_exact, cocycle_g, cocycle_g_series, grunsky, hs_assess, hs_norm_sq, hs_partial_profile, GrunskySource,
    HsAssessment,
};
use ce2_core::diskmap::{dm_disjoint, dm_to_exact_series, Configuration, MapRecord, Membership, Verdict};
use ce2_core::fock::{rho_n, twist_j, FockCutoffs, FockRecord, FockVector};
use ce2_core::verify::{run_suite, Precision, RunConfig, Suite, SuiteReport, VerifyError};
use ce2_core::{DiskMap64, ExactSeries2, Series2};

#[derive(Parser)]
#[command(name = "ce2", version, about = "Disk-map cocycles, Fock-space products and verification suites")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Overrides the precision of a run configuration.
    #[arg(long, value_enum, global = true)]
    precision: Option<PrecisionArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cocycle coefficients, Grunsky matrix and Hilbert–Schmidt profile of one map or a pair of maps.
    Cocycle {
        map: PathBuf,
        #[arg(long, default_value_t = 48)]
        cutoff: usize,
    },
    /// Vacuum amplitude of the product of Fock states placed in a configuration, plain and conjugated.
    Twopoint {
        config: PathBuf,
        #[arg(long, num_args = 0..)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 48)]
        cutoff: usize,
        #[arg(long, default_value_t = 6)]
        particles: usize,
    },
    /// Runs a named verification suite.
    Verify {
        suite: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PrecisionArg {
    Double,
    Extended,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Double => Precision::Double,
            PrecisionArg::Extended => Precision::Extended,
        }
    }
}

enum Failure {
    /// Unreadable or malformed input, or an unknown suite.
    Parse(String),
    /// A mathematical or configuration error.
    Math(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Parse(_) => 2,
            Failure::Math(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Parse(m) | Failure::Math(m) => m,
        }
    }
}

fn math(e: impl std::fmt::Display) -> Failure {
    Failure::Math(e.to_string())
}

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::UnknownSuite(_) => Failure::Parse(e.to_string()),
            other => Failure::Math(other.to_string()),
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

/// Reads a single map, a list of maps, or `{"maps": [...]}`.
fn load_maps(path: &Path) -> Result<(Vec<MapRecord>, Vec<DiskMap64>), Failure> {
    let parse = |e: &dyn std::fmt::Display| Failure::Parse(format!("{}: {e}", path.display()));
    let value: serde_json::Value = read_json(path)?;
    let items = match value {
        serde_json::Value::Array(items) => items,
        serde_json::Value::Object(mut obj) if !obj.contains_key("kind") => match obj.remove("maps") {
            Some(serde_json::Value::Array(items)) if obj.is_empty() => items,
            _ => return Err(parse(&"expected a map record, a list of records or {\"maps\": [...]}")),
        },
        single => vec![single],
    };
    let records: Vec<MapRecord> = items.into_iter().map(serde_json::from_value).collect::<Result<_, _>>().map_err(|e| parse(&e))?;
    let maps = records.iter().map(|r| r.to_map().map_err(|e| parse(&e))).collect::<Result<_, _>>()?;
    Ok((records, maps))
}

type Cell = [f64; 2];

#[derive(Serialize)]
struct CocycleOutput {
    kernel: &'static str,
    maps: Vec<MapRecord>,
    cutoff: usize,
    precision: Precision,
    trusted_degree: usize,
    coefficients: Vec<Vec<Cell>>,
    grunsky: Vec<Vec<Cell>>,
    hs_norm_sq: f64,
    profile: Vec<(usize, f64)>,
    assessment: HsAssessment,
}

fn exact_to_f64(p: &ExactSeries2) -> Series2 {
    let f = |q: &num_rational::BigRational| q.to_f64().unwrap_or(f64::NAN);
    Series2::from_fn(p.cutoff(), p.valid_total_degree(), |i, j| {
        p.get(i, j).map_or(Complex64::new(0.0, 0.0), |z| Complex64::new(f(&z.re), f(&z.im)))
    })
}

fn grid(p: &Series2) -> Vec<Vec<Cell>> {
    let n = p.cutoff();
    (0..n).map(|i| (0..n).map(|j| p.get(i, j).map_or([f64::NAN, f64::NAN], |z| [z.re, z.im])).collect()).collect()
}

fn cmd_cocycle(path: &Path, n: usize, precision: Precision) -> Result<CocycleOutput, Failure> {
    if n == 0 {
        return Err(Failure::Math("cutoff must be positive".into()));
    }
    let (records, maps) = load_maps(path)?;
    let (kernel, coeffs, source) = match (maps.as_slice(), precision) {
        ([phi], Precision::Double) => ("F", cocycle_f(phi, n).map_err(math)?, GrunskySource::F),
        ([phi], Precision::Extended) => ("F", exact_to_f64(&cocycle_f_exact(phi, n).map_err(math)?), GrunskySource::F),
        ([phi, psi], Precision::Double) => ("G", cocycle_g(phi, psi, n).map_err(math)?, GrunskySource::G),
        ([phi, psi], Precision::Extended) => {
            if dm_disjoint(phi, psi, false).verdict == Verdict::Overlapping {
                return Err(Failure::Math("images overlap".into()));
            }
            let exact = cocycle_g_series(&dm_to_exact_series(phi, 2 * n), &dm_to_exact_series(psi, 2 * n), n).map_err(math)?;
            ("G", exact_to_f64(&exact), GrunskySource::G)
        }
        (other, _) => return Err(Failure::Math(format!("expected one or two maps, got {}", other.len()))),
    };
    let g = grunsky(&coeffs, source);
    let profile = hs_partial_profile(&g);
    Ok(CocycleOutput {
        kernel,
        maps: records,
        cutoff: n,
        precision,
        trusted_degree: coeffs.valid_total_degree(),
        coefficients: grid(&coeffs),
        grunsky: grid(&g.entries),
        hs_norm_sq: hs_norm_sq(&g, g.valid_total_degree()).map_err(math)?,
        assessment: hs_assess(&profile),
        profile,
    })
}

#[derive(Serialize)]
struct TwoPointOutput {
    maps: Vec<MapRecord>,
    cutoff: usize,
    particles: usize,
    plain: Cell,
    twisted: Cell,
    /// `|twisted - conj(plain)|`.
    conjugate_gap: f64,
    /// Cutoff used for the truncation-tail estimate.
    coarse_cutoff: usize,
    /// `|plain(N) - plain(coarse)|`.
    tail_estimate: f64,
}

fn vacuum_amplitudes(config: &Configuration<f64>, inputs: &[FockVector<f64>], cf: FockCutoffs) -> Result<(Complex64, Complex64), Failure> {
    let inputs: Vec<_> = inputs.iter().map(|v| v.recut(cf)).collect::<Result<_, _>>().map_err(math)?;
    let plain = rho_n(config, &inputs, cf).map_err(math)?.vacuum_amplitude();
    let twisted = rho_n(&twist_j(config), &inputs, cf).map_err(math)?.vacuum_amplitude();
    Ok((plain, twisted))
}

fn cmd_twopoint(path: &Path, inputs: &[PathBuf], n: usize, p: usize, precision: Precision) -> Result<TwoPointOutput, Failure> {
    if precision == Precision::Extended {
        return Err(Failure::Math("extended precision is not available for twopoint".into()));
    }
    let (records, maps) = load_maps(path)?;
    let states: Vec<FockVector<f64>> = inputs
        .iter()
        .map(|f| read_json::<FockRecord>(f).and_then(|r| FockVector::from_record(&r).map_err(|e| Failure::Parse(e.to_string()))))
        .collect::<Result<_, _>>()?;
    if states.len() != maps.len() {
        return Err(Failure::Math(format!("{} maps but {} inputs", maps.len(), states.len())));
    }
    let config = Configuration::new(maps, Membership::Separated).map_err(math)?;
    let cf = FockCutoffs { modes: n, particles: p };
    let (plain, twisted) = vacuum_amplitudes(&config, &states, cf)?;
    let needed = states.iter().flat_map(|v| v.iter().map(|(k, _)| k.span())).max().unwrap_or(0);
    let coarse = (n / 2).max(needed).max(1);
    let (coarse_plain, _) = vacuum_amplitudes(&config, &states, FockCutoffs { modes: coarse, particles: p })?;
    Ok(TwoPointOutput {
        maps: records,
        cutoff: n,
        particles: p,
        plain: [plain.re, plain.im],
        twisted: [twisted.re, twisted.im],
        conjugate_gap: (twisted - plain.conj()).norm(),
        coarse_cutoff: coarse,
        tail_estimate: (plain - coarse_plain).norm(),
    })
}

fn cmd_verify(suite: &str, config: Option<&Path>, precision: Option<Precision>) -> Result<SuiteReport, Failure> {
    let suite: Suite = suite.parse()?;
    let mut cfg = match config {
        Some(path) => read_json::<RunConfig>(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = precision {
        cfg.precision = p;
    }
    Ok(run_suite(suite, &cfg)?)
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(math)?;
    for row in rows {
        w.write_record(&row).map_err(math)?;
    }
    let bytes = w.into_inner().map_err(math)?;
    String::from_utf8(bytes).map_err(math)
}

fn sci(x: f64) -> String {
    format!("{x:e}")
}

fn cocycle_csv(out: &CocycleOutput) -> Result<String, Failure> {
    let rows = out.coefficients.iter().zip(&out.grunsky).enumerate().flat_map(|(i, (row, grow))| {
        row.iter()
            .zip(grow)
            .enumerate()
            .map(move |(j, (c, g))| vec![i.to_string(), j.to_string(), sci(c[0]), sci(c[1]), sci(g[0]), sci(g[1])])
    });
    csv_table(&["i", "j", "re", "im", "grunsky_re", "grunsky_im"], rows)
}

fn twopoint_csv(out: &TwoPointOutput) -> Result<String, Failure> {
    let rows = [
        ("plain", out.plain[0], out.plain[1]),
        ("twisted", out.twisted[0], out.twisted[1]),
        ("conjugate_gap", out.conjugate_gap, 0.0),
        ("tail_estimate", out.tail_estimate, 0.0),
    ];
    csv_table(&["quantity", "re", "im"], rows.iter().map(|&(q, re, im)| vec![q.to_string(), sci(re), sci(im)]))
}

fn verify_csv(rep: &SuiteReport) -> Result<String, Failure> {
    let rows = rep.checks.iter().map(|c| vec![c.id.clone(), sci(c.value), sci(c.expected), sci(c.abs_err), c.pass.to_string()]);
    csv_table(&["id", "value", "expected", "abs_err", "pass"], rows)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(math)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("CE2_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::Math(format!("CE2_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(math)
}

fn run(cli: Cli) -> Result<(String, bool), Failure> {
    configure_threads()?;
    let precision = cli.precision.map(Precision::from);
    let csv = cli.format == Format::Csv;
    match cli.command {
        Command::Cocycle { map, cutoff } => {
            let out = cmd_cocycle(&map, cutoff, precision.unwrap_or_default())?;
            Ok((if csv { cocycle_csv(&out)? } else { to_json(&out)? }, true))
        }
        Command::Twopoint { config, inputs, cutoff, particles } => {
            let out = cmd_twopoint(&config, &inputs, cutoff, particles, precision.unwrap_or_default())?;
            Ok((if csv { twopoint_csv(&out)? } else { to_json(&out)? }, true))
        }
        Command::Verify { suite, config } => {
            let rep = cmd_verify(&suite, config.as_deref(), precision)?;
            let text = if csv { verify_csv(&rep)? } else { to_json(&rep)? };
            Ok((text, rep.all_pass()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((text, ok)) => {
            print!("{text}");
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(f) => {
            eprintln!("ce2: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
