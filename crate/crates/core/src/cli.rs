//! The `harmex` command line: verification suite, distance experiments,
//! radial profiles and split multipliers, as CSV or JSON lines.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarmexError, Result};
use crate::extremal::{distance_report, split_weights, DistanceOptions, DistancePair, DistanceSetup, Theorem, TheoremParams};
use crate::harmonic_model::{EvalOptions, TestFunctionSpec};
use crate::interval::IntervalSet;
use crate::norms::{NormOptions, NormValue, ProfileSpec, RadialProfile};
use crate::quadrature::GridParams;
use crate::verify::{csv_field, run_suite, EmbeddingGrid, KernelBox, SuiteOptions, CSV_HEADER};

/// Exit code of a run whose checks all pass.
pub const EXIT_OK: i32 = 0;
/// Exit code of a numeric failure.
pub const EXIT_FAIL: i32 = 1;
/// Exit code of a usage or configuration error.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    /// JSON lines.
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub levels: usize,
    pub per_annulus: usize,
    pub tail: usize,
    pub max_level: usize,
    pub per_panel: usize,
    pub head_cap: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let n = NormOptions::default();
        Self {
            levels: n.grid.levels,
            per_annulus: n.grid.per_annulus,
            tail: n.grid.tail,
            max_level: n.max_level,
            per_panel: n.per_panel,
            head_cap: DistanceOptions::default().head_cap,
        }
    }
}

impl GridConfig {
    pub fn norm_options(&self) -> NormOptions {
        NormOptions {
            grid: GridParams { levels: self.levels, per_annulus: self.per_annulus, tail: self.tail },
            eval: EvalOptions::default(),
            max_level: self.max_level,
            per_panel: self.per_panel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub corpus_size: usize,
    pub kernel_box: KernelBox,
    pub embedding: EmbeddingGrid,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let s = SuiteOptions::default();
        Self { corpus_size: s.corpus_size, kernel_box: s.kernel_box, embedding: s.embedding }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub format: Format,
}

/// Everything a run depends on. Every field has a default, so a config file
/// only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub corpus: Vec<TestFunctionSpec>,
    pub theorems: Vec<Theorem>,
    pub params: Vec<TheoremParams>,
    pub grid: GridConfig,
    /// Largest accepted `s1_upper / ε*`.
    pub c_max: f64,
    /// Accepted shortfall of the ratio below one.
    pub grid_tol: f64,
    /// Largest accepted `s1_upper` when `ε* = 0`.
    pub floor: f64,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            corpus: vec![TestFunctionSpec::q_kernel(2, 0.0, 1.0).expect("valid default")],
            theorems: vec![Theorem::T3],
            params: vec![TheoremParams::new(1.0)],
            grid: GridConfig::default(),
            c_max: 50.0,
            grid_tol: 0.05,
            floor: 1e-6,
            verify: VerifyConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarmexError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| HarmexError::Config(format!("{}: {e}", path.display())))
    }

    pub fn suite_options(&self) -> SuiteOptions {
        SuiteOptions {
            seed: self.seed,
            norm: self.grid.norm_options(),
            kernel_box: self.verify.kernel_box,
            corpus_size: self.verify.corpus_size,
            embedding: self.verify.embedding.clone(),
        }
    }

    pub fn distance_options(&self) -> DistanceOptions {
        DistanceOptions { norm: self.grid.norm_options(), head_cap: self.grid.head_cap, epsilon_grid: None }
    }

    /// Checks the corpus and every theorem/parameter combination.
    pub fn validate_distance(&self) -> Result<()> {
        if self.corpus.is_empty() || self.theorems.is_empty() || self.params.is_empty() {
            return Err(HarmexError::Config("corpus, theorems and params must be non-empty".into()));
        }
        for f in &self.corpus {
            f.validate()?;
        }
        for &t in &self.theorems {
            for p in &self.params {
                DistanceSetup::new(t, p)?;
            }
        }
        self.grid.norm_options().radial_grid()?;
        if !(self.c_max >= 1.0 && self.grid_tol >= 0.0 && self.floor >= 0.0) {
            return Err(HarmexError::Config("c_max must be >= 1, grid_tol and floor >= 0".into()));
        }
        Ok(())
    }

    /// SHA-256 of the config without its output section.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        hash_json(&c)
    }
}

fn hash_json<T: Serialize>(v: &T) -> String {
    let text = serde_json::to_string(v).unwrap_or_default();
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// First line of every output.
pub fn header_line(hash: &str) -> String {
    format!("# harmex {} config={hash}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Parser)]
#[command(name = "harmex", version, about = "Distance estimates and kernel checks for harmonic function spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the verification suite.
    Verify(VerifyArgs),
    /// Bracket distances for every corpus function and theorem.
    Distance(DistanceArgs),
    /// Tabulate a radial profile.
    Profile(ProfileArgs),
    /// Dump split multipliers for a level set.
    Decompose(DecomposeArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dyadic annuli of the radial grid.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Deepest annulus sampled for infinite series.
    #[arg(long)]
    pub max_level: Option<usize>,
}

impl CommonArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(f) = self.format {
            cfg.output.format = f;
        }
        if let Some(p) = &self.output {
            cfg.output.path = Some(p.clone());
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(l) = self.levels {
            cfg.grid.levels = l;
        }
        if let Some(m) = self.max_level {
            cfg.grid.max_level = m;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Theorem tag (T3, T4, T5, T6, Tfinal); repeatable.
    #[arg(long = "theorem")]
    pub theorems: Vec<String>,
    /// Test function as JSON, e.g. '{"kind":"poisson","n":2}'; repeatable.
    #[arg(long = "function")]
    pub functions: Vec<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub p: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Split order of the T4 problem.
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,
    #[arg(long)]
    pub c_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// `M_q(f, r)`.
    Mean,
    /// `A_α(f, r)`.
    BallAverage,
}

#[derive(Debug, Args, Serialize)]
pub struct ProfileArgs {
    /// Test function as JSON.
    #[arg(long)]
    pub function: String,
    #[arg(long, value_enum, default_value = "mean")]
    pub functional: ProfileKind,
    /// Exponent of the mean; `inf` for the maximum.
    #[arg(long, default_value = "1")]
    pub q: String,
    /// Weight exponent of the ball average.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Multiply the profile by `(1-r)^weight`.
    #[arg(long, default_value_t = 0.0)]
    pub weight: f64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub max_level: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub n: usize,
    /// Kernel order of the split.
    #[arg(long, allow_negative_numbers = true)]
    pub order: f64,
    /// Level set as `a:b,c:d`, or `full` / `empty`.
    #[arg(long)]
    pub set: String,
    #[arg(long, default_value_t = 32)]
    pub k_max: usize,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Distance(a) => cmd_distance(&a, out),
        Command::Profile(a) => cmd_profile(&a, out),
        Command::Decompose(a) => cmd_decompose(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(e)) => {
            let _ = writeln!(err, "harmex: {e}");
            EXIT_USAGE
        }
        Err(Failure::Numeric(e)) => {
            let _ = writeln!(err, "harmex: {e}");
            EXIT_FAIL
        }
    }
}

enum Failure {
    Usage(HarmexError),
    Numeric(HarmexError),
}

fn usage<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Usage)
}

fn numeric<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| match e {
        HarmexError::Resolution(_) => Failure::Numeric(e),
        HarmexError::Io(_) => Failure::Numeric(e),
        other => Failure::Usage(other),
    })
}

/// Writes `text` to the configured file or to `out`.
fn emit(text: &str, path: Option<&PathBuf>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.10e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn norm_str(v: Option<NormValue>) -> String {
    match v {
        Some(NormValue::Finite(x)) => num(x),
        Some(NormValue::Divergent) => "divergent".into(),
        None => String::new(),
    }
}

fn json_line<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string(v)? + "\n")
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> std::result::Result<i32, Failure> {
    let cfg = usage(args.common.load())?;
    let opts = cfg.suite_options();
    usage(opts.validate())?;
    let reports = numeric(run_suite(&opts))?;
    let mut text = String::new();
    match cfg.output.format {
        Format::Csv => {
            text += &header_line(&cfg.hash());
            text += "\n";
            text += CSV_HEADER;
            text += "\n";
            for r in &reports {
                text += &r.csv_row();
                text += "\n";
            }
        }
        Format::Json => {
            text += &numeric(json_line(&serde_json::json!({ "harmex": env!("CARGO_PKG_VERSION"), "config": cfg.hash() })))?;
            for r in &reports {
                text += &numeric(json_line(r))?;
            }
        }
    }
    numeric(emit(&text, cfg.output.path.as_ref(), out))?;
    Ok(if reports.iter().all(|r| r.pass) { EXIT_OK } else { EXIT_FAIL })
}

/// One distance experiment with its pass verdict.
#[derive(Debug, Clone, Serialize)]
pub struct DistanceRow {
    pub function: String,
    pub n: usize,
    pub theorem: Theorem,
    pub params: TheoremParams,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<DistancePair>,
}

/// `ε* > 0`: the ratio lies in `[1 - grid_tol, c_max]`; `ε* = 0`: `s1_upper <= floor`.
/// Rejected functions pass.
pub fn row_passes(rep: &DistancePair, cfg: &ExperimentConfig) -> bool {
    if rep.rejected {
        return true;
    }
    match rep.ratio {
        Some(r) => r >= 1.0 - cfg.grid_tol && r <= cfg.c_max,
        None => rep.epsilon_star == 0.0 && rep.s1_upper <= cfg.floor,
    }
}

const DISTANCE_HEADER: &str =
    "function,n,theorem,alpha,p,beta,t,epsilon_star,s1_upper,ratio,best_epsilon,ambient_norm,small_norm,rejected,pass";

/// Runs every `(function, theorem, params)` job of the config in order.
pub fn distance_rows(cfg: &ExperimentConfig) -> Vec<DistanceRow> {
    let opts = cfg.distance_options();
    let jobs: Vec<(&TestFunctionSpec, Theorem, TheoremParams)> = cfg
        .corpus
        .iter()
        .flat_map(|f| cfg.theorems.iter().flat_map(move |&t| cfg.params.iter().map(move |&p| (f, t, p))))
        .collect();
    jobs.par_iter()
        .map(|&(f, theorem, params)| {
            let (report, error) = match distance_report(f, theorem, &params, &opts) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let pass = report.as_ref().is_some_and(|r| row_passes(r, cfg));
            DistanceRow { function: f.label(), n: f.n, theorem, params, pass, error, report }
        })
        .collect()
}

fn distance_csv_row(row: &DistanceRow) -> String {
    let p = &row.params;
    let lead = format!(
        "{},{},{},{},{},{},{}",
        csv_field(&row.function),
        row.n,
        row.theorem.tag(),
        num(p.alpha),
        num(p.p),
        num(p.beta),
        opt_num(p.t)
    );
    match &row.report {
        Some(r) => format!(
            "{lead},{},{},{},{},{},{},{},{}",
            num(r.epsilon_star),
            num(r.s1_upper),
            opt_num(r.ratio),
            opt_num(r.best_epsilon),
            norm_str(Some(r.ambient_norm)),
            norm_str(r.diagnostics.f1_small_norm),
            r.rejected,
            row.pass
        ),
        None => format!("{lead},,,,,{},,false,false", csv_field(&format!("error: {}", row.error.as_deref().unwrap_or("")))),
    }
}

fn cmd_distance(args: &DistanceArgs, out: &mut dyn Write) -> std::result::Result<i32, Failure> {
    let mut cfg = usage(args.common.load())?;
    if !args.theorems.is_empty() {
        cfg.theorems = usage(args.theorems.iter().map(|t| Theorem::parse(t)).collect())?;
    }
    if !args.functions.is_empty() {
        cfg.corpus = usage(
            args.functions
                .iter()
                .map(|s| serde_json::from_str(s).map_err(|e| HarmexError::Config(format!("bad --function {s:?}: {e}"))))
                .collect(),
        )?;
    }
    if args.alpha.is_some() || args.p.is_some() || args.beta.is_some() || args.t.is_some() {
        let base = cfg.params.first().copied().unwrap_or(TheoremParams::new(1.0));
        cfg.params = vec![TheoremParams {
            alpha: args.alpha.unwrap_or(base.alpha),
            beta: args.beta.unwrap_or(base.beta),
            p: args.p.unwrap_or(base.p),
            t: args.t.or(base.t),
        }];
    }
    if let Some(c) = args.c_max {
        cfg.c_max = c;
    }
    usage(cfg.validate_distance())?;
    let rows = distance_rows(&cfg);
    let mut text = String::new();
    match cfg.output.format {
        Format::Csv => {
            text += &header_line(&cfg.hash());
            text += "\n";
            text += DISTANCE_HEADER;
            text += "\n";
            for r in &rows {
                text += &distance_csv_row(r);
                text += "\n";
            }
        }
        Format::Json => {
            text += &numeric(json_line(&serde_json::json!({ "harmex": env!("CARGO_PKG_VERSION"), "config": cfg.hash() })))?;
            for r in &rows {
                text += &numeric(json_line(r))?;
            }
        }
    }
    numeric(emit(&text, cfg.output.path.as_ref(), out))?;
    Ok(if rows.iter().all(|r| r.pass) { EXIT_OK } else { EXIT_FAIL })
}

fn parse_q(s: &str) -> Result<f64> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    s.parse::<f64>()
        .ok()
        .filter(|q| *q > 0.0)
        .ok_or_else(|| HarmexError::Config(format!("--q must be a positive number or inf, got {s:?}")))
}

fn cmd_profile(args: &ProfileArgs, out: &mut dyn Write) -> std::result::Result<i32, Failure> {
    let f: TestFunctionSpec =
        usage(serde_json::from_str(&args.function).map_err(|e| HarmexError::Config(format!("bad --function: {e}"))))?;
    usage(f.validate())?;
    let mut opts = NormOptions::default();
    if let Some(l) = args.levels {
        opts.grid.levels = l;
    }
    if let Some(m) = args.max_level {
        opts.max_level = m;
    }
    usage(opts.radial_grid())?;
    let spec = match args.functional {
        ProfileKind::Mean => ProfileSpec::mean(usage(parse_q(&args.q))?, args.weight),
        ProfileKind::BallAverage => ProfileSpec::ball_average(args.alpha, args.weight),
    };
    let profile = numeric(RadialProfile::compute(&f, &spec, &opts))?;
    let resolved = profile.resolved_levels() * profile.grid().per_annulus() + 1;
    let hash = hash_json(&(args, &f, &opts));
    let mut text = String::new();
    let rows: Vec<(f64, f64)> = profile.points().take(resolved).map(|(r, _, v)| (r, v)).collect();
    match args.format {
        Format::Csv => {
            text += &header_line(&hash);
            text += "\nr,value\n";
            for (r, v) in rows {
                text += &format!("{},{}\n", num(r), num(v));
            }
        }
        Format::Json => {
            text += &numeric(json_line(&serde_json::json!({ "harmex": env!("CARGO_PKG_VERSION"), "config": hash })))?;
            for (r, v) in rows {
                text += &numeric(json_line(&serde_json::json!({ "r": r, "value": v })))?;
            }
        }
    }
    numeric(emit(&text, args.output.as_ref(), out))?;
    Ok(EXIT_OK)
}

/// Parses `a:b,c:d`, `full` or `empty`.
pub fn parse_set(s: &str) -> Result<IntervalSet> {
    match s.trim() {
        "full" => return Ok(IntervalSet::full()),
        "empty" | "" => return Ok(IntervalSet::empty()),
        _ => {}
    }
    let pieces = s
        .split(',')
        .map(|piece| {
            let (a, b) = piece
                .split_once(':')
                .ok_or_else(|| HarmexError::Config(format!("interval {piece:?} is not of the form a:b")))?;
            let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| HarmexError::Config(format!("bad endpoint {v:?}: {e}")));
            Ok((parse(a)?, parse(b)?))
        })
        .collect::<Result<Vec<_>>>()?;
    IntervalSet::from_intervals(pieces)
}

fn cmd_decompose(args: &DecomposeArgs, out: &mut dyn Write) -> std::result::Result<i32, Failure> {
    let set = usage(parse_set(&args.set))?;
    if args.n < 2 || !(args.order > -1.0) {
        return Err(Failure::Usage(HarmexError::Config(format!(
            "decompose needs n >= 2 and order > -1 (n = {}, order = {})",
            args.n, args.order
        ))));
    }
    let w = numeric(split_weights(args.n, args.order, &set, args.k_max))?;
    let hash = hash_json(args);
    let mut text = String::new();
    match args.format {
        Format::Csv => {
            text += &header_line(&hash);
            text += "\nk,w,one_minus_w\n";
            for (k, w) in w.iter().enumerate() {
                text += &format!("{k},{},{}\n", num(*w), num(1.0 - w));
            }
        }
        Format::Json => {
            text += &numeric(json_line(&serde_json::json!({ "harmex": env!("CARGO_PKG_VERSION"), "config": hash })))?;
            for (k, w) in w.iter().enumerate() {
                text += &numeric(json_line(&serde_json::json!({ "k": k, "w": w })))?;
            }
        }
    }
    numeric(emit(&text, args.output.as_ref(), out))?;
    Ok(EXIT_OK)
}

/// Caps the global worker pool at `HARMEX_THREADS` when set.
pub fn init_threads() {
    if let Some(n) = std::env::var("HARMEX_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
