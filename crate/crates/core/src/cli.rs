//! Command-line front end: `analyze`, `explore`, `select` and `quantize`.
//!
//! Every command reads all of its inputs before writing anything, and
//! writes each output through a temporary file that is renamed into place.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O, 3 schema, 4 shape/validation,
//! 5 no feasible configuration.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::DEFAULT_BATCH_SIZE;
use crate::error::{Error, ErrorCategory, Result};
use crate::io::{self, ConfigFile, Metadata, ReportFormat};
use crate::network::Network;
use crate::pipeline::{
    explore, run_layer_analysis, select_best, Constraint, Evaluator, FitOptions, FlRange, Selection, SweepMode,
    SweepSpec, Targets, DEFAULT_SIGMA_MULT, DEFAULT_TABLE_BW,
};
use crate::quant::{memory_saving, SchemeKind};
use crate::tensor::Tensor;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_SCHEMA: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;
pub const EXIT_INFEASIBLE: i32 = 5;

/// Seed used for calibration subsampling when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(name = "quantscope", version, about = "Post-training quantization analysis and exploration")]
pub struct Cli {
    /// Maximum worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Layer analysis: statistics and fitted parameters into a config file.
    Analyze(AnalyzeArgs),
    /// Network space exploration over the fitted parameters.
    Explore(ExploreArgs),
    /// Pick the best configuration of a report under a constraint.
    Select(SelectArgs),
    /// Write a quantized weights bundle for a selected configuration.
    Quantize(QuantizeArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Network description (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Weights container.
    #[arg(long)]
    pub weights: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Calibration container (one record per sample).
    #[arg(long)]
    pub calib: PathBuf,
    /// Output configuration file.
    #[arg(long)]
    pub out: PathBuf,
    /// Calibration samples drawn from the file.
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
    /// Bit widths to fit, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![4u8, 6, 8, 12, 16])]
    pub bits: Vec<u8>,
    /// Techniques to fit, comma separated: standard_fixed, dynamic_fixed,
    /// kmeans_linear, kmeans_gaussian.
    #[arg(long, value_delimiter = ',', default_values_t = vec![SchemeKind::DynamicFixed])]
    pub techniques: Vec<SchemeKind>,
    /// Seed for calibration subsampling.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Fractional-length search range, `lo:hi`.
    #[arg(long, default_value = "8:20")]
    pub fl_range: FlRange,
    /// Gaussian k-means range half-width in standard deviations.
    #[arg(long, default_value_t = DEFAULT_SIGMA_MULT)]
    pub sigma: f64,
    /// Bit width of the k-means shared-value table.
    #[arg(long, default_value_t = DEFAULT_TABLE_BW)]
    pub table_bw: u8,
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Configuration file from `analyze`.
    #[arg(long)]
    pub config: PathBuf,
    /// Calibration container used during `analyze`.
    #[arg(long)]
    pub calib: PathBuf,
    /// Output report (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the text table here.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Also write a `bw,final_distance` curve here.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// single, group or whole (default: from the config).
    #[arg(long)]
    pub mode: Option<SweepMode>,
    /// Layer ids, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<String>>,
    /// weights, activations or both.
    #[arg(long)]
    pub targets: Option<Targets>,
    /// Bit widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub bits: Option<Vec<u8>>,
    /// Techniques, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub technique: Option<Vec<SchemeKind>>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Report from `explore`.
    #[arg(long)]
    pub report: PathBuf,
    /// Maximize savings with final distance at most this.
    #[arg(long, required_unless_present = "min_saving", conflicts_with = "min_saving")]
    pub max_distance: Option<f64>,
    /// Minimize final distance with combined saving at least this percent.
    #[arg(long)]
    pub min_saving: Option<f64>,
    /// Output quantization config.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Quantization config from `select`.
    #[arg(long)]
    pub config: PathBuf,
    /// Output bundle container.
    #[arg(long)]
    pub out: PathBuf,
}

/// Outcome of a command that did not fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Infeasible,
}

pub fn exit_code(err: &Error) -> i32 {
    match err.category() {
        ErrorCategory::Io => EXIT_IO,
        ErrorCategory::Schema => EXIT_SCHEMA,
        ErrorCategory::Validation => EXIT_VALIDATION,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let (mut stdout, mut stderr) = (String::new(), String::new());
    let result = execute(&cli, &mut stdout, &mut stderr);
    let _ = out.write_all(stdout.as_bytes());
    let _ = err.write_all(stderr.as_bytes());
    match result {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::Infeasible) => {
            let _ = writeln!(err, "error: no feasible configuration");
            EXIT_INFEASIBLE
        }
        Err(e) => {
            let _ = writeln!(err, "error [{}]: {e}", e.code());
            exit_code(&e)
        }
    }
}

/// Runs a parsed command, appending its console output to `out` and `err`.
pub fn execute(cli: &Cli, out: &mut String, err: &mut String) -> Result<Outcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Analyze(a) => analyze(a, out, err),
        Command::Explore(a) => explore_cmd(a, out),
        Command::Select(a) => select(a, out),
        Command::Quantize(a) => quantize(a, out),
    })
}

fn load_net(m: &ModelArgs) -> Result<Network> {
    io::description::load_model_files(&m.model, &m.weights)
}

/// Draws `batch_size` samples with a seeded generator, kept in file order.
pub fn subsample(samples: Vec<Tensor>, batch_size: usize, seed: u64) -> Result<Vec<Tensor>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("calibration file holds no samples".into()));
    }
    if batch_size >= samples.len() {
        return Ok(samples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, samples.len(), batch_size).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| samples[i].clone()).collect())
}

fn analyze(a: &AnalyzeArgs, out: &mut String, err: &mut String) -> Result<Outcome> {
    let net = load_net(&a.model)?;
    let all = io::load_calibration(&a.calib)?;
    let total = all.len();
    let batch = subsample(all, a.batch_size, a.seed)?;
    if batch.len() == 1 {
        let _ = writeln!(
            err,
            "warning: batch size 1; first-layer statistics may be unrepresentative"
        );
    }
    let mut sweep = SweepSpec::new(SweepMode::SingleLayer, Targets::Both, a.bits.clone(), a.techniques.clone());
    sweep.fl_search_range = a.fl_range;
    sweep.sigma_mult = a.sigma;
    sweep.table_bw = a.table_bw;
    sweep.validate()?;
    let analysis = run_layer_analysis(&net, &batch, &a.techniques, &a.bits, &FitOptions::from(&sweep))?;
    let cfg = ConfigFile::new(
        Metadata {
            seed: a.seed,
            batch_size: batch.len(),
            calibration_samples: total,
        },
        analysis.stats,
        analysis.fitted,
        sweep,
    );
    io::save_config(&a.out, &cfg)?;
    let _ = write!(out, "{}", stats_table(&cfg));
    Ok(Outcome::Done)
}

/// Per-layer statistics table printed by `analyze`.
pub fn stats_table(cfg: &ConfigFile) -> String {
    let mut s = format!(
        "{:<12} {:<12} {:>12} {:>12} {:>12} {:>12} {:>4} {:>4}\n",
        "layer", "target", "min", "max", "mean", "std", "IL", "FL"
    );
    for st in &cfg.stats {
        s.push_str(&format!(
            "{:<12} {:<12} {:>12.5} {:>12.5} {:>12.5} {:>12.5} {:>4} {:>4}\n",
            st.layer_id,
            st.target.as_str(),
            st.min,
            st.max,
            st.mean,
            st.std,
            st.suggested_il,
            st.suggested_fl
        ));
    }
    s
}

fn explore_cmd(a: &ExploreArgs, out: &mut String) -> Result<Outcome> {
    let net = load_net(&a.model)?;
    let cfg = io::load_config(&a.config)?;
    let all = io::load_calibration(&a.calib)?;
    if all.len() != cfg.metadata.calibration_samples {
        return Err(Error::InvalidArgument(format!(
            "calibration file holds {} samples, config was built from {}",
            all.len(),
            cfg.metadata.calibration_samples
        )));
    }
    let batch = subsample(all, cfg.metadata.batch_size, cfg.metadata.seed)?;
    let mut spec = cfg.sweep.clone();
    if let Some(m) = a.mode {
        spec.mode = m;
    }
    if let Some(l) = &a.layers {
        spec.layers = l.clone();
    }
    if let Some(t) = a.targets {
        spec.targets = t;
    }
    if let Some(b) = &a.bits {
        spec.bit_widths = b.clone();
    }
    if let Some(t) = &a.technique {
        spec.techniques = t.clone();
    }
    let eval = Evaluator::new(&net, &batch)?;
    let report = explore(&eval, &cfg.schemes, &spec)?;
    let table = io::render_table(&report);
    let json = io::ReportFile::new(report.clone()).to_json();
    io::write_atomic(&a.out, json.as_bytes())?;
    if let Some(p) = &a.table {
        io::write_report(p, &report, ReportFormat::Table)?;
    }
    if let Some(p) = &a.curve {
        io::write_atomic(p, io::curve_csv(&report).as_bytes())?;
    }
    let _ = write!(out, "{table}");
    Ok(Outcome::Done)
}

fn select(a: &SelectArgs, out: &mut String) -> Result<Outcome> {
    let report = io::load_report(&a.report)?;
    let constraint = match (a.max_distance, a.min_saving) {
        (Some(d), None) => Constraint::MaxDistance(d),
        (None, Some(s)) => Constraint::MinSaving(s),
        _ => return Err(Error::InvalidArgument("give exactly one of --max-distance, --min-saving".into())),
    };
    match select_best(&report, constraint) {
        Selection::Feasible { row, config } => {
            io::save_quant_config(&a.out, &config)?;
            let _ = write!(out, "{}", io::report::table_of(&[&report.rows[row]]));
            Ok(Outcome::Done)
        }
        Selection::Infeasible => Ok(Outcome::Infeasible),
    }
}

fn quantize(a: &QuantizeArgs, out: &mut String) -> Result<Outcome> {
    let net = load_net(&a.model)?;
    let cfg = io::load_quant_config(&a.config)?;
    let bundle = io::quantize_bundle(&net, &cfg)?;
    let bytes = bundle.to_bytes();
    io::write_atomic(&a.out, &bytes)?;
    let _ = writeln!(out, "{:<16} {:<10} {:>12} {:>14}", "record", "encoding", "bytes", "model bits");
    for r in &bundle.records {
        let n = crate::tensor::shape_numel(&r.shape) as u64;
        let (enc, bits) = match &r.payload {
            io::Payload::F32(_) => ("f32", n * 32),
            io::Payload::Fixed { params, .. } => ("fixed", n * params.bw as u64),
            io::Payload::KMeans { table, .. } => (
                "kmeans",
                memory_saving(32, table.k(), table.table.bw as u32, n)?.total_bits,
            ),
            io::Payload::Json(_) => ("json", 0),
        };
        let _ = writeln!(out, "{:<16} {:<10} {:>12} {:>14}", r.name, enc, r.payload_len(), bits);
    }
    let _ = writeln!(out, "total {} bytes", bytes.len());
    Ok(Outcome::Done)
}
