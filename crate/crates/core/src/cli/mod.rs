//! Command-line front end.
//!
//! Exit codes: 0 on success (and, for `verify` and `graph-check`, when every
//! check passes), 1 when a claim fails, 2 on usage or spec errors.

pub mod spec;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::compose::{Claim, Strength};
use crate::divergences::{divergence, DivergenceKind, SolverConfig};
use crate::domain::{Distribution, FlatSource};
use crate::error::{Error, Result};
use crate::expanders::power_walk;
use crate::samplers::{estimate_mean, measure_failures, SamplerClaim};
use crate::verify::{worst_flat_error, SourceFamily, DEFAULT_CAP};

pub use spec::{from_hex, parse_json, to_hex, ExtractorSpec, GraphKind, HashKind, SamplerSpec};

/// Seed used when `--seed` is absent.
pub const DEFAULT_SEED: u64 = 0x5eed;
/// Random supports examined when exhaustive enumeration exceeds `--cap`.
pub const STRUCTURED_SAMPLES: usize = 100_000;
/// Slack allowed between a measured error and its claim.
pub const CLAIM_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(name = "divext", version, about = "Divergence-parameterized extractors and samplers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Seed for every randomized step; echoed into reports.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Largest number of flat sources enumerated exhaustively.
    #[arg(long, global = true, default_value_t = DEFAULT_CAP)]
    pub cap: u64,
    /// Report format; CSV is only available for `bench`.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (defaults to hardware parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build an extractor from a spec and print its claim ledger.
    Build { spec: PathBuf },
    /// Run a sampler on one coin string against a function table.
    Sample {
        spec: PathBuf,
        /// JSON array of `2^m` values (or `{"values": [...]}`).
        function: PathBuf,
        /// Coin string in hex, most significant digit first.
        coins: String,
    },
    /// Divergence between two distributions (`U_m` is the uniform one).
    Divergence { kind: String, p: String, q: String },
    /// Measure worst flat-source error and compare it with the claims.
    Verify {
        spec: PathBuf,
        /// `{"kind", "k", "family"?, "strong"?}` or an array of them; all
        /// checkable ledger entries when omitted.
        #[arg(long)]
        query: Option<PathBuf>,
    },
    /// Sweep (δ, ε) and measure sampler failure rates per class.
    Bench {
        #[arg(long, value_enum, default_value_t = BenchSampler::Pairwise)]
        sampler: BenchSampler,
        #[arg(long)]
        m: u32,
        #[arg(long, value_delimiter = ',', required = true)]
        deltas: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        functions: usize,
    },
    /// Regularity, labelling and λ report for an expander.
    #[command(name = "graph-check", alias = "graph")]
    GraphCheck {
        #[arg(long)]
        n: u32,
        #[arg(long, value_enum, default_value_t = GraphKind::Mgg)]
        graph: GraphKind,
        #[arg(long, default_value_t = 1)]
        walk: u32,
    },
}

impl ValueEnum for GraphKind {
    fn value_variants<'a>() -> &'a [Self] {
        &[GraphKind::Mgg, GraphKind::Xor]
    }
    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            GraphKind::Mgg => "mgg",
            GraphKind::Xor => "xor",
        }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BenchSampler {
    Pairwise,
    Expander,
    Subgaussian,
}

/// Resolved invocation, echoed into reports.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub spec_path: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    pub seed: u64,
    pub cap: u64,
    pub format: Format,
}

/// Outcome of a command: the report text and whether every check passed.
pub struct Outcome {
    pub text: String,
    pub pass: bool,
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(t) = cli.threads {
        // A global pool may already exist when embedded; that is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    match execute(&cli) {
        Ok(out) => {
            let written = match &cli.output {
                Some(p) => std::fs::write(p, &out.text).map_err(Error::from),
                None => {
                    print!("{}", out.text);
                    Ok(())
                }
            };
            match written {
                Ok(()) if out.pass => 0,
                Ok(()) => 1,
                Err(e) => {
                    eprintln!("error: {e}");
                    2
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Infeasible(_) | Error::CountExceedsCap { .. } | Error::WidthTooLarge(..)) {
                eprintln!("hint: desk-scale limits apply; try smaller widths or adjust --cap");
            }
            2
        }
    }
}

fn config(cli: &Cli, command: &str, spec_path: Option<&Path>, format: Format) -> RunConfig {
    RunConfig {
        command: command.into(),
        spec_path: spec_path.map(Path::to_path_buf),
        output_path: cli.output.clone(),
        seed: cli.seed,
        cap: cli.cap,
        format,
    }
}

fn json_only(cli: &Cli) -> Result<Format> {
    match cli.format {
        Some(Format::Csv) => Err(Error::Spec("CSV output is only available for bench".into())),
        _ => Ok(Format::Json),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Spec(format!("cannot read {}: {e}", path.display())))
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Runs a parsed command.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Build { spec } => {
            let cfg = config(cli, "build", Some(spec), json_only(cli)?);
            let ext = parse_json::<ExtractorSpec>(&read(spec)?)?.build()?;
            let report = BuildReport {
                config: cfg,
                label: ext.label().to_string(),
                n: ext.n(),
                d: ext.d(),
                m: ext.m(),
                waste: ext.waste().map(|w| WasteReport { width: w.width, injectivity: format!("{:?}", w.injectivity) }),
                claims: ext.claims().to_vec(),
            };
            Ok(Outcome { text: pretty(&report)?, pass: true })
        }
        Command::Sample { spec, function, coins } => {
            let cfg = config(cli, "sample", Some(spec), json_only(cli)?);
            let s = parse_json::<SamplerSpec>(&read(spec)?)?.build()?;
            let f = match parse_json::<FunctionTable>(&read(function)?)? {
                FunctionTable::Values(v) | FunctionTable::Object { values: v } => v,
            };
            if f.len() != 1usize << s.m() {
                return Err(Error::Spec(format!("function table has {} entries, expected 2^{} = {}", f.len(), s.m(), 1u64 << s.m())));
            }
            let x = from_hex(coins, s.n())?;
            let estimate = estimate_mean(&s, &f, x)?;
            let true_mean = f.iter().sum::<f64>() / f.len() as f64;
            let report = SampleReport {
                config: cfg,
                sampler: s.label().to_string(),
                n: s.n(),
                m: s.m(),
                coins: to_hex(x, s.n()),
                points: s.points(x).into_iter().map(|y| to_hex(y, s.m())).collect(),
                estimate,
                true_mean,
                error: estimate - true_mean,
                claims: s.claims().to_vec(),
            };
            Ok(Outcome { text: pretty(&report)?, pass: true })
        }
        Command::Divergence { kind, p, q } => {
            json_only(cli)?;
            let kind: DivergenceKind = kind.parse()?;
            let (p, q) = (load_distribution(p)?, load_distribution(q)?);
            let solver = SolverConfig { seed: cli.seed, ..SolverConfig::default() };
            let r = divergence(kind, &p, &q, &solver)?;
            let report = DivergenceReport { lower: r.lower, upper: r.upper, exact: r.exact, seed: (!r.exact).then_some(cli.seed) };
            Ok(Outcome { text: serde_json::to_string(&report)? + "\n", pass: true })
        }
        Command::Verify { spec, query } => {
            let cfg = config(cli, "verify", Some(spec), json_only(cli)?);
            let ext = parse_json::<ExtractorSpec>(&read(spec)?)?.build()?;
            let queries = match query {
                Some(path) => match parse_json::<QueryList>(&read(path)?)? {
                    QueryList::One(q) => vec![q],
                    QueryList::Many(v) => v,
                },
                None => ledger_queries(ext.claims()),
            };
            if queries.is_empty() {
                return Err(Error::MissingClaim(format!("'{}' has no claim the flat-source oracle can check", ext.label())));
            }
            let default_family = SourceFamily::Auto { cap: cli.cap, samples: STRUCTURED_SAMPLES, seed: cli.seed };
            let mut results = Vec::new();
            for q in &queries {
                let kind = q.kind.canonical();
                let strong = q.strong.unwrap_or_else(|| ext.claims().iter().any(|c| c.strength.is_strong() && c.covers(kind, q.k, c.strength).is_some()));
                let claim = ext.best_claim(kind, q.k, Strength::from_flags(strong, false)).cloned();
                let family = q.family.clone().unwrap_or_else(|| default_family.clone());
                let w = worst_flat_error(&ext, kind, q.k, &family, strong)?;
                let pass = claim.as_ref().is_some_and(|c| w.worst <= c.eps + CLAIM_TOL);
                results.push(VerifyResult {
                    kind,
                    k: q.k,
                    strong,
                    worst: w.worst,
                    witness_hex: w.witness.support().iter().map(|v| to_hex(*v, ext.n())).collect(),
                    witness: w.witness,
                    claim,
                    pass,
                    exact: w.exact,
                    label: w.label,
                    sources: w.sources,
                });
            }
            let pass = results.iter().all(|r| r.pass);
            let report = VerifyReport { config: cfg, extractor: ext.label().to_string(), ledger: ext.claims().to_vec(), results, pass };
            Ok(Outcome { text: pretty(&report)?, pass })
        }
        Command::Bench { sampler, m, deltas, eps, functions } => {
            let format = cli.format.unwrap_or(Format::Csv);
            let mut rows = Vec::new();
            for &delta in deltas {
                for &e in eps {
                    let spec = match sampler {
                        BenchSampler::Pairwise => SamplerSpec::Pairwise { m: *m, delta, eps: e },
                        BenchSampler::Expander => SamplerSpec::Expander { m: *m, delta, eps: e, graph: GraphKind::Mgg },
                        BenchSampler::Subgaussian => {
                            SamplerSpec::Subgaussian { m: *m, delta, eps: e, alpha: 1.0, graph: GraphKind::Xor }
                        }
                    };
                    let s = match spec.build() {
                        Ok(s) => s,
                        Err(Error::Infeasible(_) | Error::Precondition(_)) => continue,
                        Err(err) => return Err(err),
                    };
                    for r in measure_failures(&s, *functions, cli.seed)? {
                        rows.push(BenchRow {
                            sampler: *sampler,
                            m: *m,
                            delta,
                            eps: e,
                            n: s.n(),
                            samples: s.samples(),
                            class: r.claim.class.to_string(),
                            strong: r.claim.strong,
                            absolute: r.claim.absolute,
                            claim_delta: r.claim.delta,
                            claim_eps: r.claim.eps,
                            worst_failure: r.worst_failure,
                            mean_failure: r.mean_failure,
                            functions: r.functions,
                            seed: cli.seed,
                        });
                    }
                }
            }
            let text = match format {
                Format::Json => pretty(&rows)?,
                Format::Csv => bench_csv(&rows),
            };
            Ok(Outcome { text, pass: true })
        }
        Command::GraphCheck { n, graph, walk } => {
            json_only(cli)?;
            let base = graph.provider().graph(*n)?;
            let g = if *walk > 1 { power_walk(&base, *walk)? } else { base };
            let labelled = g.is_consistently_labelled()?;
            let connected = g.is_connected()?;
            let measured = g.measure_lambda().ok();
            let lambda_ok = measured.is_none_or(|(l, _)| l <= g.lambda_bound + 1e-9);
            let report = GraphReport {
                name: g.name.clone(),
                n: g.n,
                seed_bits: g.d,
                degree: g.degree(),
                regular: labelled,
                consistently_labelled: labelled,
                connected,
                lambda_bound: g.lambda_bound,
                lambda_source: format!("{:?}", g.lambda_source),
                lambda_measured: measured.map(|m| m.0),
            };
            Ok(Outcome { text: pretty(&report)?, pass: labelled && connected && lambda_ok })
        }
    }
}

/// `U_m`, or a path to a distribution JSON file.
fn load_distribution(arg: &str) -> Result<Distribution> {
    if let Some(w) = arg.strip_prefix("U_").or_else(|| arg.strip_prefix("u_")) {
        let width: u32 = w.parse().map_err(|_| Error::Spec(format!("bad uniform shorthand {arg:?}")))?;
        return Distribution::uniform(width);
    }
    parse_json(&read(Path::new(arg))?)
}

/// One query per distinct checkable `(kind, k, strong)` in the ledger.
fn ledger_queries(claims: &[Claim]) -> Vec<VerifyQuery> {
    let mut out: Vec<VerifyQuery> = Vec::new();
    for c in claims {
        if matches!(c.kind, DivergenceKind::Subgaussian | DivergenceKind::Subexponential) {
            continue;
        }
        let q = VerifyQuery { kind: c.kind, k: c.k, family: None, strong: Some(c.strength.is_strong()) };
        if !out.iter().any(|o| o.kind == q.kind && o.k == q.k && o.strong == q.strong) {
            out.push(q);
        }
    }
    out
}

fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(
        "sampler,m,delta,eps,n,samples,class,strong,absolute,claim_delta,claim_eps,worst_failure,mean_failure,functions,seed\n",
    );
    for r in rows {
        let sampler = serde_json::to_value(r.sampler).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        let _ = writeln!(
            s,
            "{sampler},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.m,
            r.delta,
            r.eps,
            r.n,
            r.samples,
            r.class,
            r.strong,
            r.absolute,
            r.claim_delta,
            r.claim_eps,
            r.worst_failure,
            r.mean_failure,
            r.functions,
            r.seed
        );
    }
    s
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FunctionTable {
    Values(Vec<f64>),
    Object { values: Vec<f64> },
}

/// One `verify` request.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyQuery {
    pub kind: DivergenceKind,
    pub k: f64,
    #[serde(default)]
    pub family: Option<SourceFamily>,
    #[serde(default)]
    pub strong: Option<bool>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum QueryList {
    One(VerifyQuery),
    Many(Vec<VerifyQuery>),
}

#[derive(Serialize)]
struct WasteReport {
    width: u32,
    injectivity: String,
}

#[derive(Serialize)]
struct BuildReport {
    config: RunConfig,
    label: String,
    n: u32,
    d: u32,
    m: u32,
    waste: Option<WasteReport>,
    claims: Vec<Claim>,
}

#[derive(Serialize)]
struct SampleReport {
    config: RunConfig,
    sampler: String,
    n: u32,
    m: u32,
    coins: String,
    points: Vec<String>,
    estimate: f64,
    true_mean: f64,
    error: f64,
    claims: Vec<SamplerClaim>,
}

#[derive(Serialize)]
struct DivergenceReport {
    lower: f64,
    upper: f64,
    exact: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct VerifyResult {
    kind: DivergenceKind,
    k: f64,
    strong: bool,
    worst: f64,
    witness: FlatSource,
    witness_hex: Vec<String>,
    claim: Option<Claim>,
    pass: bool,
    exact: bool,
    label: String,
    sources: u64,
}

#[derive(Serialize)]
struct VerifyReport {
    config: RunConfig,
    extractor: String,
    ledger: Vec<Claim>,
    results: Vec<VerifyResult>,
    pass: bool,
}

#[derive(Serialize)]
struct BenchRow {
    sampler: BenchSampler,
    m: u32,
    delta: f64,
    eps: f64,
    n: u32,
    samples: u64,
    class: String,
    strong: bool,
    absolute: bool,
    claim_delta: f64,
    claim_eps: f64,
    worst_failure: f64,
    mean_failure: f64,
    functions: usize,
    seed: u64,
}

#[derive(Serialize)]
struct GraphReport {
    name: String,
    n: u32,
    seed_bits: u32,
    degree: u64,
    regular: bool,
    consistently_labelled: bool,
    connected: bool,
    lambda_bound: f64,
    lambda_source: String,
    lambda_measured: Option<f64>,
}
