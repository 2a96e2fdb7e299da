//! Command-line interface: `fit`, `simulate`, `eval`, and `segment`.
//!
//! Every command is deterministic given its inputs and `--seed`: primary
//! outputs (JSON/CSV files and stdout) are byte-identical across repeated
//! runs and across `--threads` settings. Each run also emits a manifest
//! recording the command line, a SHA-256 hash over every input byte that
//! affects the output, the seed, the library version, and wall-clock
//! timestamps (the manifest is diagnostic and carries the only
//! non-reproducible bytes).
//!
//! Exit codes: 0 success, 1 usage error, 2 data/config error, 3 numeric
//! failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::family::Family;
use crate::imgseg::{
    gray_to_ppm_bytes, labels_to_pgm_bytes, parameter_table, rgb_to_ppm_bytes, segment,
    transformed_histograms, ImageTensor, SegmentConfig,
};
use crate::metrics::{ari, l2_mixture_distance, overlap_report, DEFAULT_OVERLAP_RESOLUTION};
use crate::mixture::{MixtureModel, SortedSample};
use crate::mwde::{fit_mwde, FitReport, MwdeConfig};
use crate::pmle::{fit_pmle, PmleConfig};
use crate::sim::{aggregate, run_experiment, Estimator, ExperimentConfig, ResultRow};
use crate::Error;

/// Library version plus the version of the file formats it reads/writes.
pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (formats v1)");

#[derive(Parser)]
#[command(
    name = "mixest",
    version = VERSION,
    about = "Finite location-scale mixture learning: minimum Wasserstein distance and penalized maximum likelihood"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a mixture to a single-column CSV of reals.
    Fit(FitArgs),
    /// Run a simulation experiment from a JSON config.
    Simulate(SimulateArgs),
    /// Evaluate a metric between mixtures or labelings.
    Eval(EvalArgs),
    /// Segment a PPM image with per-channel two-component normal mixtures.
    Segment(SegmentArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Input data: single-column CSV of reals, optional header.
    #[arg(long)]
    input: PathBuf,
    /// Estimator: mwde or pmle.
    #[arg(long)]
    method: MethodArg,
    /// Subpopulation family.
    #[arg(long, default_value = "normal")]
    family: Family,
    /// Number of components.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Optimizer starts (start 0 is deterministic).
    #[arg(long, default_value_t = 8)]
    starts: usize,
    /// Master seed for the random starts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Penalty strength for pmle: "auto" (N^{-1/2}) or a positive number.
    #[arg(long = "a-n", default_value = "auto")]
    a_n: String,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for results.csv, summary.json, timings.csv.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 uses the available parallelism.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Metric: l2, ari, or overlap.
    #[arg(long)]
    metric: MetricArg,
    /// First mixture (JSON interchange form or fit output), for l2/overlap.
    #[arg(long)]
    g1: Option<PathBuf>,
    /// Second mixture, for l2.
    #[arg(long)]
    g2: Option<PathBuf>,
    /// First labeling (single-column integer CSV), for ari.
    #[arg(long = "labels-a")]
    labels_a: Option<PathBuf>,
    /// Second labeling, for ari.
    #[arg(long = "labels-b")]
    labels_b: Option<PathBuf>,
    /// Quantile-grid resolution for overlap.
    #[arg(long, default_value_t = DEFAULT_OVERLAP_RESOLUTION)]
    resolution: usize,
    /// Also write the CSV rows to this path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    /// Input image (binary PPM, maxval 255).
    #[arg(long)]
    input: PathBuf,
    /// Estimator: mwde, pmle, or both.
    #[arg(long, default_value = "both")]
    method: SegmentMethod,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Master seed for the fits.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optimizer starts per channel fit.
    #[arg(long, default_value_t = 4)]
    starts: usize,
    /// Worker threads; 0 uses the available parallelism.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum MethodArg {
    Mwde,
    Pmle,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum MetricArg {
    L2,
    Ari,
    Overlap,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum SegmentMethod {
    Mwde,
    Pmle,
    Both,
}

enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parse and dispatch; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let command_line = render_command_line(&cli.command);
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args, command_line),
        Command::Simulate(args) => cmd_simulate(args, command_line),
        Command::Eval(args) => cmd_eval(args, command_line),
        Command::Segment(args) => cmd_segment(args, command_line),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            1
        }
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn render_command_line(cmd: &Command) -> Vec<String> {
    // Reconstructed rather than echoing argv so the manifest is stable
    // against flag ordering.
    match cmd {
        Command::Fit(a) => vec![
            "fit".into(),
            format!("--input={}", a.input.display()),
            format!("--method={}", method_name(a.method)),
            format!("--family={}", a.family),
            format!("--k={}", a.k),
            format!("--starts={}", a.starts),
            format!("--seed={}", a.seed),
            format!("--a-n={}", a.a_n),
        ],
        Command::Simulate(a) => vec![
            "simulate".into(),
            format!("--config={}", a.config.display()),
            format!("--threads={}", a.threads),
        ],
        Command::Eval(a) => {
            let mut v = vec!["eval".into(), format!("--metric={}", metric_name(a.metric))];
            for (flag, p) in [
                ("--g1", &a.g1),
                ("--g2", &a.g2),
                ("--labels-a", &a.labels_a),
                ("--labels-b", &a.labels_b),
            ] {
                if let Some(path) = p {
                    v.push(format!("{flag}={}", path.display()));
                }
            }
            v.push(format!("--resolution={}", a.resolution));
            v
        }
        Command::Segment(a) => vec![
            "segment".into(),
            format!("--input={}", a.input.display()),
            format!(
                "--method={}",
                match a.method {
                    SegmentMethod::Mwde => "mwde",
                    SegmentMethod::Pmle => "pmle",
                    SegmentMethod::Both => "both",
                }
            ),
            format!("--seed={}", a.seed),
            format!("--starts={}", a.starts),
            format!("--threads={}", a.threads),
        ],
    }
}

fn method_name(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Mwde => "mwde",
        MethodArg::Pmle => "pmle",
    }
}

fn metric_name(m: MetricArg) -> &'static str {
    match m {
        MetricArg::L2 => "l2",
        MetricArg::Ari => "ari",
        MetricArg::Overlap => "overlap",
    }
}

// ---------------------------------------------------------------------
// Manifest

#[derive(serde::Serialize)]
struct RunManifest {
    command_line: Vec<String>,
    config_hash: String,
    master_seed: Option<u64>,
    version: String,
    started_at_unix: f64,
    finished_at_unix: f64,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(SystemTime::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

struct InputHash(Sha256);

impl InputHash {
    fn new(command: &str) -> Self {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        Self(h)
    }

    fn arg(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.0.update(format!("\n{key}={value}").as_bytes());
        self
    }

    fn file(&mut self, label: &str, bytes: &[u8]) -> &mut Self {
        self.0
            .update(format!("\nfile:{label}:{}:", bytes.len()).as_bytes());
        self.0.update(bytes);
        self
    }

    fn finish(self) -> String {
        let digest = self.0.finalize();
        let mut hex = String::with_capacity(64);
        for b in digest {
            let _ = write!(hex, "{b:02x}");
        }
        hex
    }
}

fn write_manifest(out_dir_or_file: Option<&Path>, manifest: &RunManifest) -> crate::Result<()> {
    let body = serde_json::to_string_pretty(manifest)?;
    match out_dir_or_file {
        Some(path) => fs::write(path, body + "\n")?,
        None => eprintln!("{body}"),
    }
    Ok(())
}

/// Manifest path next to a file output: `fit.json` -> `fit.manifest.json`.
fn sibling_manifest_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.manifest.json"))
}

// ---------------------------------------------------------------------
// Input parsing

fn read_reals_csv(path: &Path) -> crate::Result<Vec<f64>> {
    let content = fs::read_to_string(path)?;
    let mut values = Vec::new();
    let mut first_data_line = true;
    for (lineno, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.contains(',') {
            return Err(Error::Parse(format!(
                "{}:{}: expected a single column",
                path.display(),
                lineno + 1
            )));
        }
        match line.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => {
                return Err(Error::Parse(format!(
                    "{}:{}: non-finite value {v}",
                    path.display(),
                    lineno + 1
                )))
            }
            Err(_) if first_data_line => { /* header */ }
            Err(_) => {
                return Err(Error::Parse(format!(
                    "{}:{}: not a number: {line}",
                    path.display(),
                    lineno + 1
                )))
            }
        }
        first_data_line = false;
    }
    if values.is_empty() {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    Ok(values)
}

fn read_labels_csv(path: &Path) -> crate::Result<Vec<usize>> {
    let content = fs::read_to_string(path)?;
    let mut raw_labels: Vec<i64> = Vec::new();
    let mut first_data_line = true;
    for (lineno, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<i64>() {
            Ok(v) => raw_labels.push(v),
            Err(_) if first_data_line => { /* header */ }
            Err(_) => {
                return Err(Error::Parse(format!(
                    "{}:{}: not an integer label: {line}",
                    path.display(),
                    lineno + 1
                )))
            }
        }
        first_data_line = false;
    }
    if raw_labels.is_empty() {
        return Err(Error::Parse(format!("{}: no labels", path.display())));
    }
    // ARI is invariant to relabeling; map arbitrary integers densely.
    let mut mapping = std::collections::HashMap::new();
    Ok(raw_labels
        .into_iter()
        .map(|v| {
            let next = mapping.len();
            *mapping.entry(v).or_insert(next)
        })
        .collect())
}

/// A mixture file: either the bare interchange object or a fit output
/// whose `model` field holds one.
fn read_mixture(path: &Path) -> crate::Result<MixtureModel> {
    let content = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&content)?;
    let model_value = value.get("model").cloned().unwrap_or(value);
    Ok(serde_json::from_value(model_value)?)
}

fn format_float(v: f64) -> String {
    format!("{v:?}")
}

// ---------------------------------------------------------------------
// fit

#[derive(serde::Serialize)]
struct FitOutput {
    method: String,
    model: MixtureModel,
    objective: f64,
    starts_tried: usize,
    converged: bool,
    iterations: usize,
    starts: Vec<crate::mwde::StartDiagnostic>,
    trace: Vec<f64>,
    flags: Vec<String>,
}

impl FitOutput {
    fn new(method: &str, family: Family, report: FitReport) -> Self {
        Self {
            method: method.to_string(),
            model: MixtureModel {
                family,
                mixing: report.g_hat,
            },
            objective: report.objective,
            starts_tried: report.starts_tried,
            converged: report.converged,
            iterations: report.iterations,
            starts: report.starts,
            trace: report.trace,
            flags: report.flags,
        }
    }
}

fn cmd_fit(args: FitArgs, command_line: Vec<String>) -> CliResult<()> {
    let started = unix_now();
    let a_n = match (args.method, args.a_n.as_str()) {
        (_, "auto") => None,
        (MethodArg::Pmle, raw) => Some(
            raw.parse::<f64>()
                .map_err(|_| usage(format!("--a-n must be 'auto' or a number, got '{raw}'")))?,
        ),
        (MethodArg::Mwde, _) => {
            return Err(usage("--a-n applies only to --method pmle"));
        }
    };

    let input_bytes = fs::read(&args.input).map_err(Error::from)?;
    let data = read_reals_csv(&args.input)?;
    let sample = SortedSample::new(&data)?;

    let mut hash = InputHash::new("fit");
    hash.arg("method", method_name(args.method))
        .arg("family", args.family)
        .arg("k", args.k)
        .arg("starts", args.starts)
        .arg("seed", args.seed)
        .arg("a_n", &args.a_n)
        .file("input", &input_bytes);

    let report = match args.method {
        MethodArg::Mwde => fit_mwde(
            &sample,
            args.family,
            args.k,
            &MwdeConfig {
                n_starts: args.starts,
                seed: args.seed,
                ..MwdeConfig::default()
            },
        )?,
        MethodArg::Pmle => fit_pmle(
            &sample,
            args.family,
            args.k,
            &PmleConfig {
                n_starts: args.starts,
                seed: args.seed,
                a_n,
                ..PmleConfig::default()
            },
        )?,
    };

    let output = FitOutput::new(method_name(args.method), args.family, report);
    let body = serde_json::to_string_pretty(&output).map_err(Error::from)? + "\n";
    match &args.out {
        Some(path) => fs::write(path, &body).map_err(Error::from)?,
        None => print!("{body}"),
    }

    let manifest = RunManifest {
        command_line,
        config_hash: hash.finish(),
        master_seed: Some(args.seed),
        version: VERSION.to_string(),
        started_at_unix: started,
        finished_at_unix: unix_now(),
    };
    let manifest_path = args.out.as_deref().map(sibling_manifest_path);
    write_manifest(manifest_path.as_deref(), &manifest)?;
    Ok(())
}

// ---------------------------------------------------------------------
// simulate

fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("scenario,estimator,n,rep,l2,ari,converged\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.scenario,
            r.estimator,
            r.n,
            r.rep,
            format_float(r.l2),
            format_float(r.ari),
            r.converged
        );
    }
    out
}

fn timings_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("scenario,estimator,n,rep,wall_ms\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.scenario,
            r.estimator,
            r.n,
            r.rep,
            format_float(r.wall_ms)
        );
    }
    out
}

fn build_pool(threads: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| usage(format!("cannot build thread pool: {e}")))
}

fn cmd_simulate(args: SimulateArgs, command_line: Vec<String>) -> CliResult<()> {
    let started = unix_now();
    let config_bytes = fs::read(&args.config).map_err(Error::from)?;
    let config: ExperimentConfig = serde_json::from_slice(&config_bytes).map_err(Error::from)?;

    let mut hash = InputHash::new("simulate");
    hash.file("config", &config_bytes);

    let pool = build_pool(args.threads)?;
    let rows = pool.install(|| run_experiment(&config))?;
    let summary = aggregate(&rows)?;

    fs::create_dir_all(&args.out).map_err(Error::from)?;
    fs::write(args.out.join("results.csv"), results_csv(&rows)).map_err(Error::from)?;
    fs::write(args.out.join("timings.csv"), timings_csv(&rows)).map_err(Error::from)?;
    let summary_body = serde_json::to_string_pretty(&summary).map_err(Error::from)? + "\n";
    fs::write(args.out.join("summary.json"), summary_body).map_err(Error::from)?;

    let manifest = RunManifest {
        command_line,
        config_hash: hash.finish(),
        master_seed: Some(config.master_seed),
        version: VERSION.to_string(),
        started_at_unix: started,
        finished_at_unix: unix_now(),
    };
    write_manifest(Some(&args.out.join("manifest.json")), &manifest)?;
    Ok(())
}

// ---------------------------------------------------------------------
// eval

fn cmd_eval(args: EvalArgs, command_line: Vec<String>) -> CliResult<()> {
    let started = unix_now();
    let mut hash = InputHash::new("eval");
    hash.arg("metric", metric_name(args.metric));

    let mut rows: Vec<(String, f64)> = Vec::new();
    let mut seed = None;
    match args.metric {
        MetricArg::L2 => {
            let (g1_path, g2_path) = match (&args.g1, &args.g2) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(usage("--metric l2 needs --g1 and --g2")),
            };
            let m1 = read_mixture(g1_path)?;
            let m2 = read_mixture(g2_path)?;
            if m1.family != m2.family {
                return Err(CliError::Lib(Error::InvalidParameter(format!(
                    "family mismatch: {} vs {}",
                    m1.family, m2.family
                ))));
            }
            hash.file("g1", &fs::read(g1_path).map_err(Error::from)?);
            hash.file("g2", &fs::read(g2_path).map_err(Error::from)?);
            rows.push((
                "l2".into(),
                l2_mixture_distance(&m1.mixing, &m2.mixing, m1.family)?,
            ));
        }
        MetricArg::Ari => {
            let (a_path, b_path) = match (&args.labels_a, &args.labels_b) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(usage("--metric ari needs --labels-a and --labels-b")),
            };
            let la = read_labels_csv(a_path)?;
            let lb = read_labels_csv(b_path)?;
            hash.file("labels_a", &fs::read(a_path).map_err(Error::from)?);
            hash.file("labels_b", &fs::read(b_path).map_err(Error::from)?);
            rows.push(("ari".into(), ari(&la, &lb)?));
        }
        MetricArg::Overlap => {
            let g1_path = args
                .g1
                .as_ref()
                .ok_or_else(|| usage("--metric overlap needs --g1"))?;
            let model = read_mixture(g1_path)?;
            hash.file("g1", &fs::read(g1_path).map_err(Error::from)?);
            hash.arg("resolution", args.resolution);
            let report = overlap_report(&model.mixing, model.family, args.resolution)?;
            for i in 0..report.k() {
                for j in (i + 1)..report.k() {
                    rows.push((format!("o_{}_{}", i + 1, j + 1), report.get(i, j)));
                }
            }
            rows.push(("mean_omega".into(), report.mean_omega));
            seed = None;
        }
    }

    let config_hash = hash.finish();
    let mut csv = String::from("metric,value,config_hash\n");
    for (name, value) in &rows {
        let _ = writeln!(csv, "{name},{},{config_hash}", format_float(*value));
    }
    print!("{csv}");
    if let Some(path) = &args.out {
        fs::write(path, &csv).map_err(Error::from)?;
    }

    let manifest = RunManifest {
        command_line,
        config_hash,
        master_seed: seed,
        version: VERSION.to_string(),
        started_at_unix: started,
        finished_at_unix: unix_now(),
    };
    let manifest_path = args.out.as_deref().map(sibling_manifest_path);
    write_manifest(manifest_path.as_deref(), &manifest)?;
    Ok(())
}

// ---------------------------------------------------------------------
// segment

fn cmd_segment(args: SegmentArgs, command_line: Vec<String>) -> CliResult<()> {
    let started = unix_now();
    let input_bytes = fs::read(&args.input).map_err(Error::from)?;
    let image = ImageTensor::from_ppm_bytes(&input_bytes)?;
    let estimators: Vec<Estimator> = match args.method {
        SegmentMethod::Mwde => vec![Estimator::Mwde],
        SegmentMethod::Pmle => vec![Estimator::Pmle],
        SegmentMethod::Both => vec![Estimator::Mwde, Estimator::Pmle],
    };

    let mut hash = InputHash::new("segment");
    hash.arg(
        "method",
        match args.method {
            SegmentMethod::Mwde => "mwde",
            SegmentMethod::Pmle => "pmle",
            SegmentMethod::Both => "both",
        },
    )
    .arg("seed", args.seed)
    .arg("starts", args.starts)
    .file("input", &input_bytes);

    let pool = build_pool(args.threads)?;
    let result = pool.install(|| {
        segment(
            &image,
            &estimators,
            &SegmentConfig {
                seed: args.seed,
                n_starts: args.starts,
            },
        )
    })?;

    fs::create_dir_all(&args.out).map_err(Error::from)?;
    let (w, h) = (result.width, result.height);
    for run in &result.runs {
        let est = run.estimator.to_string();
        for (c, name) in ["red", "green", "blue"].iter().enumerate() {
            let channel = &run.channels[c];
            fs::write(
                args.out.join(format!("labels_{name}_{est}.pgm")),
                labels_to_pgm_bytes(&channel.labels, w, h),
            )
            .map_err(Error::from)?;
            fs::write(
                args.out.join(format!("recolored_{name}_{est}.ppm")),
                gray_to_ppm_bytes(&channel.recolored, w, h),
            )
            .map_err(Error::from)?;
            if channel.fallback {
                eprintln!("warning: {est}/{name} fell back to a single cluster");
            }
        }
        fs::write(
            args.out.join(format!("combined_{est}.ppm")),
            rgb_to_ppm_bytes(&run.combined, w, h),
        )
        .map_err(Error::from)?;
    }

    let params = parameter_table(&result);
    let mut params_csv = String::from("channel,estimator,w1,w2,mu1,mu2,sigma1,sigma2\n");
    for row in &params {
        let _ = writeln!(
            params_csv,
            "{},{},{},{},{},{},{},{}",
            row.channel,
            row.estimator,
            format_float(row.w1),
            format_float(row.w2),
            format_float(row.mu1),
            format_float(row.mu2),
            format_float(row.sigma1),
            format_float(row.sigma2)
        );
    }
    fs::write(args.out.join("params.csv"), params_csv).map_err(Error::from)?;
    let params_json = serde_json::to_string_pretty(&params).map_err(Error::from)? + "\n";
    fs::write(args.out.join("params.json"), params_json).map_err(Error::from)?;

    let mut hist_csv = String::from("channel,bin_lo,bin_hi,count\n");
    for row in transformed_histograms(&image, 64) {
        let _ = writeln!(
            hist_csv,
            "{},{},{},{}",
            row.channel,
            format_float(row.bin_lo),
            format_float(row.bin_hi),
            row.count
        );
    }
    fs::write(args.out.join("histograms.csv"), hist_csv).map_err(Error::from)?;

    let manifest = RunManifest {
        command_line,
        config_hash: hash.finish(),
        master_seed: Some(args.seed),
        version: VERSION.to_string(),
        started_at_unix: started,
        finished_at_unix: unix_now(),
    };
    write_manifest(Some(&args.out.join("manifest.json")), &manifest)?;
    Ok(())
}
