//! Command-line front end: argument parsing, the moment cache file and
//! rendering of reports as text, CSV or JSON.

use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rug::{Float, Integer, Rational};
use thiserror::Error;

use crate::closedform::{
    self, extract_p_from_values, log_ratio, sep_prob, structural_prediction, structure_checks, AlphaCase,
    ClosedFormError, StructureCheck,
};
use crate::inversion::{self, convergence_profile, InversionError, Method, Number, NumericMode};
use crate::moments::{moment_sequence, MomentError, MomentSequence, Scenario, Variable};
use crate::recon::{parse_approximant, reconstruct_rational, RationalGuess, ReconError};
use crate::serde_rational;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Inversion(#[from] InversionError),
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
    #[error(transparent)]
    Recon(#[from] ReconError),
    #[error("cache {path}: header is for {found}, requested {requested}")]
    CacheMismatch { path: PathBuf, found: String, requested: String },
    #[error("cache {path}: {reason}")]
    CacheCorrupt { path: PathBuf, reason: String },
    #[error("cache {0} is locked by another writer (remove the .lock file if stale)")]
    CacheLocked(PathBuf),
    #[error("{0}")]
    Argument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// `Module::Variant` name reported on failure.
    pub fn name(&self) -> String {
        fn variant<T: std::fmt::Debug>(e: &T) -> String {
            format!("{e:?}").chars().take_while(|c| c.is_alphanumeric()).collect()
        }
        match self {
            CliError::Moment(MomentError::AtIndex { source, .. }) => format!("MomentError::{}", variant(source.as_ref())),
            CliError::Moment(e) => format!("MomentError::{}", variant(e)),
            CliError::Inversion(e) => format!("InversionError::{}", variant(e)),
            CliError::ClosedForm(e) => format!("ClosedFormError::{}", variant(e)),
            CliError::Recon(e) => format!("ReconError::{}", variant(e)),
            other => format!("CliError::{}", variant(other)),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sepprob", version, about = "Determinantal moments, moment inversion and separability probabilities")]
pub struct Cli {
    /// Output format (plot-data defaults to csv, everything else to text)
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute (and optionally cache) exact moments mu_0..mu_m
    Moments(MomentsArgs),
    /// Estimate Pr{X > xi} from truncated moments
    Tail(TailArgs),
    /// Exact separability tables and difference-region proportions
    Tables(TablesArgs),
    /// Fit p_alpha(k) and check it against the structural predictions
    Fit(FitArgs),
    /// Log-ratio of successive separability probabilities at large k
    Asymptote(AsymptoteArgs),
    /// CSV samples of the probability curves
    PlotData(PlotArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    #[arg(long, value_parser = parse_variable)]
    pub variable: Variable,
    #[arg(long, value_parser = parse_rational_arg)]
    pub alpha: Rational,
    #[arg(long, value_parser = parse_rational_arg, default_value = "0")]
    pub k: Rational,
    /// Moment cache file (created or extended)
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub m: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Legendre,
    Gegenbauer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Float,
}

#[derive(Debug, Clone, Args)]
pub struct InversionArgs {
    #[arg(long, value_enum, default_value = "legendre")]
    pub method: MethodArg,
    /// Weight exponent for the Gegenbauer method
    #[arg(long, default_value_t = 2)]
    pub geg_alpha: u32,
    #[arg(long, value_parser = parse_rational_arg, default_value = "0")]
    pub xi: Rational,
    /// Exact up to m = 500, big-float beyond, unless given
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Decimal digits in float mode
    #[arg(long, default_value_t = inversion::DEFAULT_FLOAT_DIGITS)]
    pub precision: u32,
}

impl InversionArgs {
    fn method(&self) -> Method {
        match self.method {
            MethodArg::Legendre => Method::Legendre,
            MethodArg::Gegenbauer => Method::Gegenbauer(self.geg_alpha),
        }
    }

    fn mode(&self, m: u32) -> NumericMode {
        match self.mode {
            Some(ModeArg::Exact) => NumericMode::Exact,
            Some(ModeArg::Float) => NumericMode::BigFloat(self.precision),
            None => match NumericMode::default_for(m) {
                NumericMode::BigFloat(_) => NumericMode::BigFloat(self.precision),
                exact => exact,
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TailArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub inversion: InversionArgs,
    #[arg(long, conflicts_with = "m_list", required_unless_present = "m_list")]
    pub m: Option<u32>,
    /// Comma-separated increasing truncation orders
    #[arg(long, value_delimiter = ',')]
    pub m_list: Option<Vec<u32>>,
    /// Reconstruct a rational with this denominator bound
    #[arg(long)]
    pub bound: Option<u64>,
    /// Error radius for reconstruction (default: |v(m) - v(7m/10)|)
    #[arg(long)]
    pub radius: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct TablesArgs {
    /// Also run the difference-variable pipeline at this order
    #[arg(long)]
    pub m: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long, value_parser = parse_rational_arg)]
    pub alpha: Rational,
    /// Rational values "k:P,k:P,..." of the separability probability
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<String>>,
    /// Obtain the values from the moment pipeline plus reconstruction
    #[arg(long, conflicts_with = "values")]
    pub from_approximants: bool,
    #[arg(long, default_value_t = 1000)]
    pub m: u32,
    #[arg(long, default_value_t = 1000)]
    pub bound: u64,
    #[command(flatten)]
    pub inversion: InversionArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AsymptoteArgs {
    #[arg(long, value_parser = parse_rational_arg)]
    pub alpha: Rational,
    #[arg(long, value_delimiter = ',', default_values_t = [10, 100, 1000, 10000])]
    pub k_list: Vec<i64>,
    #[arg(long, default_value_t = closedform::LOG_RATIO_DIGITS)]
    pub precision: u32,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub figure: u8,
    #[arg(long)]
    pub k_max: Option<i64>,
    /// Truncation order for the proportion curves
    #[arg(long, default_value_t = 200)]
    pub m: u32,
}

fn parse_variable(s: &str) -> Result<Variable, String> {
    s.parse().map_err(|e: MomentError| e.to_string())
}

/// Accepts `p/q`, integers and finite decimals.
pub fn parse_rational_arg(s: &str) -> Result<Rational, String> {
    if s.contains('/') {
        return serde_rational::parse(s);
    }
    parse_approximant(s).map(|a| a.value).map_err(|e| e.to_string())
}

/// One titled table of string cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub title: String,
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Section {
    fn new(title: impl Into<String>, columns: &[&str]) -> Self {
        Section {
            title: title.into(),
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Report {
    pub sections: Vec<Section>,
}

impl Report {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.render_text(),
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    fn render_text(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "# {}", s.title);
            for (k, v) in &s.meta {
                let _ = writeln!(out, "# {k}: {v}");
            }
            let widths: Vec<usize> = (0..s.columns.len())
                .map(|c| s.rows.iter().map(|r| r[c].len()).chain([s.columns[c].len()]).max().unwrap_or(0))
                .collect();
            let line = |cells: &[String]| {
                let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                padded.join("  ").trim_end().to_string()
            };
            let _ = writeln!(out, "{}", line(&s.columns));
            for r in &s.rows {
                let _ = writeln!(out, "{}", line(r));
            }
        }
        out
    }

    fn render_csv(&self) -> String {
        let escape = |c: &str| {
            if c.contains([',', '"', '\n']) {
                format!("\"{}\"", c.replace('"', "\"\""))
            } else {
                c.to_string()
            }
        };
        let mut out = String::new();
        for (i, s) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "{}", s.columns.iter().map(|c| escape(c)).collect::<Vec<_>>().join(","));
            for r in &s.rows {
                let _ = writeln!(out, "{}", r.iter().map(|c| escape(c)).collect::<Vec<_>>().join(","));
            }
        }
        out
    }

    fn render_json(&self) -> String {
        let sections: Vec<serde_json::Value> = self
            .sections
            .iter()
            .map(|s| {
                let meta: serde_json::Map<String, serde_json::Value> =
                    s.meta.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect();
                let rows: Vec<serde_json::Value> = s
                    .rows
                    .iter()
                    .map(|r| {
                        let obj: serde_json::Map<String, serde_json::Value> = s
                            .columns
                            .iter()
                            .zip(r)
                            .map(|(c, v)| (c.clone(), serde_json::Value::String(v.clone())))
                            .collect();
                        serde_json::Value::Object(obj)
                    })
                    .collect();
                serde_json::json!({ "title": s.title, "meta": meta, "rows": rows })
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&serde_json::json!({ "sections": sections }))
            .expect("string-only JSON serializes");
        text.push('\n');
        text
    }
}

fn rat(q: &Rational) -> String {
    serde_rational::to_string(q)
}

/// Fixed-point rendering rounded half away from zero, trailing zeros trimmed.
pub fn fixed_decimal(q: &Rational, places: u32) -> String {
    let scale = Integer::from(Integer::u_pow_u(10, places));
    let scaled = Rational::from(q.abs_ref()) * &scale + Rational::from((1, 2));
    let digits = scaled.floor().numer().clone();
    let s = digits.to_string();
    let places = places as usize;
    let s = if s.len() <= places { format!("{}{s}", "0".repeat(places + 1 - s.len())) } else { s };
    let (int, frac) = s.split_at(s.len() - places);
    let frac = frac.trim_end_matches('0');
    let sign = if *q < 0 && (int != "0" || !frac.is_empty()) { "-" } else { "" };
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

fn number_cells(v: &Number, places: u32) -> (String, String) {
    match v {
        Number::Exact(q) => (rat(q), fixed_decimal(q, places)),
        Number::Float(f) => {
            let q = f.to_rational().unwrap_or_default();
            let d = fixed_decimal(&q, places);
            (d.clone(), d)
        }
    }
}

const DECIMAL_PLACES: u32 = 30;

fn scenario_of(args: &ScenarioArgs) -> Result<Scenario, CliError> {
    Ok(Scenario::new(args.variable, args.alpha.clone(), args.k.clone())?)
}

fn obtain_moments(args: &ScenarioArgs, m: u32) -> Result<MomentSequence, CliError> {
    let scenario = scenario_of(args)?;
    match &args.cache {
        Some(path) => cached_sequence(path, &scenario, m),
        None => Ok(moment_sequence(&scenario, m)?),
    }
}

/// Magic first line of a moment cache file.
pub const CACHE_MAGIC: &str = "sepprob-moment-cache";
pub const CACHE_VERSION: u32 = 1;

fn cache_header(s: &Scenario) -> String {
    format!(
        "{CACHE_MAGIC} {CACHE_VERSION}\nvariable {}\nalpha {}\nk {}\n",
        s.variable(),
        rat(s.alpha()),
        rat(s.k())
    )
}

struct CacheLock(PathBuf);

impl CacheLock {
    fn acquire(path: &Path) -> Result<Self, CliError> {
        let mut lock = path.as_os_str().to_owned();
        lock.push(".lock");
        let lock = PathBuf::from(lock);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => Ok(CacheLock(lock)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::CacheLocked(path.to_path_buf())),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for CacheLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

/// Reads a cache file. Records must run `0, 1, 2, ...`.
pub fn read_cache(path: &Path) -> Result<MomentSequence, CliError> {
    let corrupt = |reason: String| CliError::CacheCorrupt { path: path.to_path_buf(), reason };
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let mut header = Vec::new();
    for _ in 0..4 {
        header.push(lines.next().ok_or_else(|| corrupt("truncated header".into()))??);
    }
    if header[0] != format!("{CACHE_MAGIC} {CACHE_VERSION}") {
        return Err(corrupt(format!("unsupported header line {:?}", header[0])));
    }
    let field = |line: &str, key: &str| -> Result<String, CliError> {
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| corrupt(format!("expected '{key}' line, found {line:?}")))
    };
    let variable: Variable = field(&header[1], "variable")?.parse()?;
    let alpha = serde_rational::parse(&field(&header[2], "alpha")?).map_err(corrupt)?;
    let k = serde_rational::parse(&field(&header[3], "k")?).map_err(corrupt)?;
    let scenario = Scenario::new(variable, alpha, k)?;
    let mut mu = Vec::new();
    for line in lines {
        let line = line?;
        let (n, value) = line.split_once(' ').ok_or_else(|| corrupt(format!("bad record {line:?}")))?;
        let n: usize = n.parse().map_err(|_| corrupt(format!("bad index in {line:?}")))?;
        if n != mu.len() {
            return Err(corrupt(format!("record {n} out of sequence, expected {}", mu.len())));
        }
        mu.push(serde_rational::parse(value).map_err(corrupt)?);
    }
    Ok(MomentSequence { scenario, mu })
}

/// Loads, verifies and extends the cache for `scenario` up to order `m`.
pub fn cached_sequence(path: &Path, scenario: &Scenario, m: u32) -> Result<MomentSequence, CliError> {
    let _lock = CacheLock::acquire(path)?;
    let mut seq = if path.exists() {
        let seq = read_cache(path)?;
        if seq.scenario != *scenario {
            return Err(CliError::CacheMismatch {
                path: path.to_path_buf(),
                found: seq.scenario.to_string(),
                requested: scenario.to_string(),
            });
        }
        if !seq.mu.is_empty() {
            let n = rand::thread_rng().gen_range(0..seq.mu.len());
            let fresh = scenario.moment(n as u32)?;
            if fresh != seq.mu[n] {
                return Err(CliError::CacheCorrupt {
                    path: path.to_path_buf(),
                    reason: format!("record {n} does not match recomputation"),
                });
            }
        }
        seq
    } else {
        let mut f = File::create(path)?;
        f.write_all(cache_header(scenario).as_bytes())?;
        MomentSequence { scenario: scenario.clone(), mu: Vec::new() }
    };
    let start = seq.mu.len();
    if start <= m as usize {
        seq.extend_to(m)?;
        let mut f = OpenOptions::new().append(true).open(path)?;
        let mut buf = String::new();
        for (n, q) in seq.mu.iter().enumerate().skip(start) {
            let _ = writeln!(buf, "{n} {}", rat(q));
        }
        f.write_all(buf.as_bytes())?;
        f.sync_all()?;
    }
    seq.mu.truncate(m as usize + 1);
    Ok(seq)
}

fn cmd_moments(args: &MomentsArgs) -> Result<Report, CliError> {
    let seq = obtain_moments(&args.scenario, args.m)?;
    let mut s = Section::new("moments", &["n", "moment"]).meta("scenario", &seq.scenario);
    for (n, q) in seq.mu.iter().enumerate() {
        s.row(vec![n.to_string(), rat(q)]);
    }
    Ok(Report { sections: vec![s] })
}

/// Error radius from the spread between orders `7m/10` and `m`.
fn spread_radius(hi: &Number, lo: &Number) -> Rational {
    let prec = 2048;
    let d = Float::with_val(prec, hi.to_float(prec) - lo.to_float(prec)).abs();
    d.to_rational().unwrap_or_default()
}

fn guess_section(guess: &RationalGuess, radius: &Rational) -> Section {
    let mut s = Section::new("reconstruction", &["value", "confidence", "residual", "radius", "bound"]);
    s.row(vec![
        rat(&guess.value),
        guess.confidence.to_string(),
        format!("{:.6e}", guess.residual.to_f64()),
        format!("{:.6e}", radius.to_f64()),
        guess.denominator_bound.to_string(),
    ]);
    s
}

/// Tail profile plus an optional reconstruction of the last value.
pub struct TailRun {
    pub profile: Vec<(u32, Number)>,
    pub guess: Option<(RationalGuess, Rational)>,
}

fn run_tail(
    seq_args: &ScenarioArgs,
    inv: &InversionArgs,
    m_list: &[u32],
    bound: Option<u64>,
    radius: Option<&str>,
) -> Result<TailRun, CliError> {
    let m_max = *m_list.last().ok_or_else(|| CliError::Argument("empty --m-list".into()))?;
    let mut orders = m_list.to_vec();
    let lower = m_max * 7 / 10;
    let need_spread = bound.is_some() && radius.is_none();
    if need_spread {
        if m_max == 0 {
            return Err(CliError::Argument("reconstruction at m = 0 needs an explicit --radius".into()));
        }
        if !orders.contains(&lower) {
            orders.push(lower);
            orders.sort_unstable();
        }
    }
    let seq = obtain_moments(seq_args, m_max)?;
    let all = convergence_profile(&seq, inv.method(), &inv.xi, &orders, inv.mode(m_max))?;
    let last = all.last().expect("nonempty").1.clone();
    let guess = match bound {
        None => None,
        Some(b) => {
            let radius = match radius {
                Some(r) => parse_rational_arg(r).map_err(CliError::Argument)?,
                None => {
                    let lo = &all.iter().find(|(m, _)| *m == lower).expect("included").1;
                    spread_radius(&last, lo)
                }
            };
            let x = match &last {
                Number::Exact(q) => q.clone(),
                Number::Float(f) => f.to_rational().unwrap_or_default(),
            };
            Some((reconstruct_rational(&x, &radius, &Integer::from(b))?, radius))
        }
    };
    let profile = all.into_iter().filter(|(m, _)| m_list.contains(m)).collect();
    Ok(TailRun { profile, guess })
}

fn cmd_tail(args: &TailArgs) -> Result<Report, CliError> {
    let m_list = match (&args.m, &args.m_list) {
        (Some(m), _) => vec![*m],
        (None, Some(list)) => list.clone(),
        (None, None) => return Err(CliError::Argument("one of --m or --m-list is required".into())),
    };
    let scenario = scenario_of(&args.scenario)?;
    let m_max = *m_list.last().unwrap_or(&0);
    let run = run_tail(&args.scenario, &args.inversion, &m_list, args.bound, args.radius.as_deref())?;
    let mut s = Section::new("tail", &["m", "value", "decimal"])
        .meta("scenario", &scenario)
        .meta("method", args.inversion.method())
        .meta("mode", args.inversion.mode(m_max))
        .meta("xi", rat(&args.inversion.xi));
    for (m, v) in &run.profile {
        let (value, decimal) = number_cells(v, DECIMAL_PLACES);
        s.row(vec![m.to_string(), value, decimal]);
    }
    let mut sections = vec![s];
    if let Some((guess, radius)) = &run.guess {
        sections.push(guess_section(guess, radius));
    }
    Ok(Report { sections })
}

const TABLE_K: std::ops::RangeInclusive<i64> = 0..=8;

/// Printed proportions of the difference region, by `(alpha case, k)`.
fn printed_proportion(case: AlphaCase, k: i64) -> Option<Rational> {
    let q = |n: i64, d: i64| Some(Rational::from((n, d)));
    match (case, k) {
        (_, 0) => q(1, 2),
        (AlphaCase::Rebit, 1) => q(843, 2060),
        (AlphaCase::Rebit, 2) => q(9949, 26320),
        (AlphaCase::Qubit, 1) => q(45, 122),
        (AlphaCase::Qubit, 2) => q(1553, 4921),
        (AlphaCase::Qubit, 3) => q(3073, 10557),
        (AlphaCase::Qubit, 4) => q(2087, 7450),
        (AlphaCase::Quaterbit, 1) => q(771, 2335),
        (AlphaCase::Quaterbit, 2) => q(26503, 104806),
        (AlphaCase::Quaterbit, 3) => q(51585, 242978),
        (AlphaCase::Quaterbit, 4) => q(2195945, 11586069),
        (AlphaCase::Quaterbit, 5) => q(4390079, 24859079),
        (AlphaCase::Quaterbit, 6) => q(8310451, 48993770),
        _ => None,
    }
}

/// Known rational values of `Pr{|rho^PT| > |rho|}`.
pub fn known_difference_tail(case: AlphaCase, k: i64) -> Option<Rational> {
    let q = |n: i64, d: i64| Some(Rational::from((n, d)));
    match (case, k) {
        (AlphaCase::Rebit, 0) => q(29, 128),
        (AlphaCase::Qubit, 0) => q(4, 33),
        (AlphaCase::Quaterbit, 0) => q(13, 323),
        (AlphaCase::Rebit, 1) => q(281, 1024),
        (AlphaCase::Qubit, 1) => q(45, 286),
        (AlphaCase::Quaterbit, 1) => q(2056, 37145),
        _ => None,
    }
}

/// Difference-region share of the total: `(tail, source)` where the source is
/// `derived` (from a known tail), `reported` or `unconfirmed`.
pub fn proportion(case: AlphaCase, k: i64) -> Result<(Option<Rational>, &'static str), CliError> {
    if let Some(tail) = known_difference_tail(case, k) {
        return Ok((Some(tail / sep_prob(case, k)?), "derived"));
    }
    Ok(match printed_proportion(case, k) {
        Some(p) => (Some(p), "reported"),
        None => (None, "unconfirmed"),
    })
}

const PROPORTION_K: std::ops::RangeInclusive<i64> = 0..=6;

fn pipeline_proportion(case: AlphaCase, k: i64, m: u32) -> Result<Number, CliError> {
    let scenario = Scenario::new(Variable::Diff, case.alpha(), Rational::from(k))?;
    let seq = moment_sequence(&scenario, m)?;
    let est = inversion::legendre_tail(&seq, &Rational::new(), m, NumericMode::default_for(m))?;
    let total = sep_prob(case, k)?;
    Ok(match est.value {
        Number::Exact(q) => Number::Exact(q / total),
        Number::Float(f) => {
            let prec = f.prec();
            Number::Float(f / Float::with_val(prec, total))
        }
    })
}

fn case_name(case: AlphaCase) -> &'static str {
    match case {
        AlphaCase::Rebit => "rebit",
        AlphaCase::Qubit => "qubit",
        AlphaCase::Quaterbit => "quaterbit",
    }
}

fn cmd_tables(args: &TablesArgs) -> Result<Report, CliError> {
    let mut sections = Vec::new();
    for case in AlphaCase::ALL {
        let mut s = Section::new(format!("{} separability probabilities", case_name(case)), &["k", "probability", "decimal"])
            .meta("alpha", rat(&case.alpha()));
        for k in TABLE_K {
            let p = sep_prob(case, k)?;
            s.row(vec![k.to_string(), rat(&p), fixed_decimal(&p, 6)]);
        }
        sections.push(s);
    }
    let mut columns = vec!["alpha", "k", "proportion", "source"];
    if args.m.is_some() {
        columns.push("pipeline");
    }
    let mut s = Section::new("proportion with |rho^PT| > |rho|", &columns);
    if let Some(m) = args.m {
        s = s.meta("pipeline_m", m);
    }
    for case in AlphaCase::ALL {
        for k in PROPORTION_K {
            let (value, source) = proportion(case, k)?;
            let mut row = vec![
                rat(&case.alpha()),
                k.to_string(),
                value.as_ref().map_or_else(|| "-".to_string(), rat),
                source.to_string(),
            ];
            if let Some(m) = args.m {
                row.push(number_cells(&pipeline_proportion(case, k, m)?, 8).1);
            }
            s.row(row);
        }
    }
    sections.push(s);
    Ok(Report { sections })
}

fn parse_value_pairs(items: &[String]) -> Result<Vec<(i64, Rational)>, CliError> {
    items
        .iter()
        .map(|item| {
            let (k, v) = item
                .split_once(':')
                .ok_or_else(|| CliError::Argument(format!("expected k:value, got {item:?}")))?;
            let k = k.trim().parse().map_err(|_| CliError::Argument(format!("bad k in {item:?}")))?;
            Ok((k, parse_rational_arg(v).map_err(CliError::Argument)?))
        })
        .collect()
}

fn cmd_fit(args: &FitArgs) -> Result<Report, CliError> {
    let prediction = structural_prediction(&args.alpha)?;
    let mut sources = Section::new("samples", &["k", "probability", "source"]);
    let values: Vec<(i64, Rational)> = if let Some(items) = &args.values {
        let v = parse_value_pairs(items)?;
        for (k, p) in &v {
            sources.row(vec![k.to_string(), rat(p), "given".into()]);
        }
        v
    } else {
        let case = AlphaCase::from_alpha(&args.alpha)?;
        let count = prediction.degree as i64 + 1 + closedform::WITNESS_SAMPLES as i64;
        let mut v = Vec::new();
        for k in 0..count {
            let p = if args.from_approximants {
                let sargs = ScenarioArgs {
                    variable: Variable::PtDet,
                    alpha: args.alpha.clone(),
                    k: Rational::from(k),
                    cache: None,
                };
                let run = run_tail(&sargs, &args.inversion, &[args.m], Some(args.bound), None)?;
                let (guess, _) = run.guess.expect("bound given");
                sources.row(vec![k.to_string(), rat(&guess.value), format!("pipeline ({})", guess.confidence)]);
                guess.value
            } else {
                let p = sep_prob(case, k)?;
                sources.row(vec![k.to_string(), rat(&p), "closed form".into()]);
                p
            };
            v.push((k, p));
        }
        v
    };
    let p = extract_p_from_values(&args.alpha, &values)?;
    let checks = structure_checks(&p, &prediction);
    let poly = Section::new("polynomial", &["coefficient", "value"])
        .meta("alpha", rat(&args.alpha))
        .meta("p", &p);
    let mut poly = poly;
    for (i, c) in p.coeffs().iter().enumerate() {
        poly.row(vec![format!("k^{i}"), rat(c)]);
    }
    let failed: Vec<&StructureCheck> = checks.iter().filter(|c| !c.passed).collect();
    if !failed.is_empty() {
        let names: Vec<String> = failed.iter().map(|c| format!("{} ({})", c.name, c.detail)).collect();
        return Err(ClosedFormError::StructureViolation(format!("failed checks: {}", names.join("; "))).into());
    }
    let mut check_section = Section::new("checks", &["check", "passed", "detail"]);
    for c in &checks {
        check_section.row(vec![c.name.clone(), c.passed.to_string(), c.detail.clone()]);
    }
    Ok(Report { sections: vec![sources, poly, check_section] })
}

fn cmd_asymptote(args: &AsymptoteArgs) -> Result<Report, CliError> {
    let case = AlphaCase::from_alpha(&args.alpha)?;
    let limit = Rational::from((16, 27));
    let mut s = Section::new("log ratio", &["k", "ratio", "distance", "error_bound"])
        .meta("alpha", rat(&args.alpha))
        .meta("limit", rat(&limit));
    for &k in &args.k_list {
        let r = log_ratio(case, k, args.precision)?;
        let prec = r.value.prec();
        let dist = Float::with_val(prec, &r.value - &limit).abs();
        s.row(vec![
            k.to_string(),
            fixed_decimal(&r.value.to_rational().unwrap_or_default(), 20),
            format!("{:.6e}", dist.to_f64()),
            format!("{:.3e}", r.error_bound.to_f64()),
        ]);
    }
    Ok(Report { sections: vec![s] })
}

fn cmd_plot_data(args: &PlotArgs) -> Result<Report, CliError> {
    let names: Vec<&str> = AlphaCase::ALL.iter().map(|c| case_name(*c)).collect();
    let mut columns = vec!["k"];
    columns.extend(names);
    if args.figure == 1 {
        let mut s = Section::new("separability probability", &columns);
        for k in 0..=args.k_max.unwrap_or(20) {
            let mut row = vec![k.to_string()];
            for case in AlphaCase::ALL {
                row.push(fixed_decimal(&sep_prob(case, k)?, 12));
            }
            s.row(row);
        }
        Ok(Report { sections: vec![s] })
    } else {
        let mut s = Section::new("difference-region proportion", &columns).meta("m", args.m);
        for k in 0..=args.k_max.unwrap_or(*PROPORTION_K.end()) {
            let mut row = vec![k.to_string()];
            for case in AlphaCase::ALL {
                row.push(number_cells(&pipeline_proportion(case, k, args.m)?, 12).1);
            }
            s.row(row);
        }
        Ok(Report { sections: vec![s] })
    }
}

/// Runs a parsed command line and returns the rendered output.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let report = match &cli.command {
        Command::Moments(a) => cmd_moments(a)?,
        Command::Tail(a) => cmd_tail(a)?,
        Command::Tables(a) => cmd_tables(a)?,
        Command::Fit(a) => cmd_fit(a)?,
        Command::Asymptote(a) => cmd_asymptote(a)?,
        Command::PlotData(a) => cmd_plot_data(a)?,
    };
    let default = match cli.command {
        Command::PlotData(_) => Format::Csv,
        _ => Format::Text,
    };
    Ok(report.render(cli.format.unwrap_or(default)))
}

/// Parses `args` (including the program name) and executes.
pub fn execute_args<I, T>(args: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Argument(e.to_string()))?;
    execute(&cli)
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn decimals() {
        assert_eq!(fixed_decimal(&q(29, 64), 12), "0.453125");
        assert_eq!(fixed_decimal(&q(8, 33), 12), "0.242424242424");
        assert_eq!(fixed_decimal(&q(26, 323), 6), "0.080495");
        assert_eq!(fixed_decimal(&q(-1, 3), 3), "-0.333");
        assert_eq!(fixed_decimal(&q(-1, 10_000), 3), "0");
        assert_eq!(fixed_decimal(&q(5, 1), 3), "5");
    }

    #[test]
    fn rational_args() {
        assert_eq!(parse_rational_arg("1/2").unwrap(), q(1, 2));
        assert_eq!(parse_rational_arg("0.5").unwrap(), q(1, 2));
        assert_eq!(parse_rational_arg("-3").unwrap(), q(-3, 1));
        assert!(parse_rational_arg("x").is_err());
    }

    #[test]
    fn error_names() {
        let e: CliError = MomentError::Domain("x".into()).into();
        assert_eq!(e.name(), "MomentError::Domain");
        let e: CliError = ClosedFormError::Singularity { alpha: q(1, 2), k: -2 }.into();
        assert_eq!(e.name(), "ClosedFormError::Singularity");
        assert_eq!(CliError::Argument("x".into()).name(), "CliError::Argument");
    }

    #[test]
    fn proportions() {
        assert_eq!(proportion(AlphaCase::Qubit, 1).unwrap(), (Some(q(45, 122)), "derived"));
        assert_eq!(proportion(AlphaCase::Rebit, 1).unwrap(), (Some(q(843, 2060)), "derived"));
        assert_eq!(proportion(AlphaCase::Quaterbit, 1).unwrap(), (Some(q(771, 2335)), "derived"));
        assert_eq!(proportion(AlphaCase::Qubit, 3).unwrap(), (Some(q(3073, 10557)), "reported"));
        assert_eq!(proportion(AlphaCase::Rebit, 3).unwrap(), (None, "unconfirmed"));
        for case in AlphaCase::ALL {
            for k in 0..=1 {
                let (derived, _) = proportion(case, k).unwrap();
                assert_eq!(derived, printed_proportion(case, k));
            }
        }
    }
}
