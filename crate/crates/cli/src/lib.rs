//! Command-line front end. `main` only forwards to [`run`], which tests call
//! directly.
//!
//! Configuration precedence, lowest first: built-in defaults, `QSSM_OUTPUT_DIR`,
//! the `--config` file, then individual flags.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use qssm::bench::{self, BenchOptions};
use qssm::checkpoint;
use qssm::config::RunConfig;
use qssm::data::{self, PreparedData, Split};
use qssm::engine::{epoch_log_csv, train_with, EpochRecord};
use qssm::eval::{evaluate, evaluate_naive, ForecastReport, ReportLabels, REPORT_CSV_HEADER};
use qssm::gradcheck::{self, GradcheckOptions};
use qssm::model::{GateKind, Model};
use qssm::qgate::{GateGrad, GateOutput, GateParams};
use qssm::Error;

pub const OUTPUT_DIR_ENV: &str = "QSSM_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// A gate backward pass, replaceable for mutation testing.
pub type GateBackward = fn(&GateOutput, &GateParams, f64) -> GateGrad;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad config, missing inputs: exit 2.
    Usage(String),
    /// Runtime or check failure: exit 1.
    Failure(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) => CliError::Usage(e.to_string()),
            other => CliError::Failure(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "qssm", version, about = "Quantum-gated selective state-space forecaster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train on a dataset; writes checkpoint, epoch log, test report and resolved config.
    Train(TrainArgs),
    /// Score a checkpoint on one split.
    Eval(EvalArgs),
    /// Write the forecast for one window as CSV.
    Forecast(ForecastArgs),
    /// Cross-check analytic, finite-difference and parameter-shift gradients.
    Gradcheck(GradcheckArgs),
    /// Time forward+backward passes while sweeping window length and horizon.
    Bench(BenchArgs),
    /// Train the quantum gate and a classical gate with the same seed and compare.
    Ablate(AblateArgs),
    /// Write a synthetic sine CSV.
    Synth(SynthArgs),
}

/// One optional flag per config key.
#[derive(Args, Debug, Default, Clone)]
struct ConfigFlags {
    /// Flat key = value config file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "CSV")]
    dataset: Option<String>,
    #[arg(long)]
    dataset_name: Option<String>,
    /// ett | traffic | none
    #[arg(long)]
    calendar: Option<String>,
    #[arg(long)]
    datetime_column: Option<String>,
    #[arg(long)]
    datetime_format: Option<String>,
    /// Comma-separated raw column names to forecast.
    #[arg(long)]
    target_columns: Option<String>,
    #[arg(long)]
    predict_calendar: Option<String>,
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    dropout_p: Option<String>,
    #[arg(long)]
    g_min: Option<String>,
    #[arg(long)]
    g_max: Option<String>,
    /// quantum | classical | classical-per-step
    #[arg(long)]
    gate: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    weight_decay: Option<String>,
    #[arg(long)]
    decoupled_weight_decay: Option<String>,
    #[arg(long)]
    scheduler_factor: Option<String>,
    #[arg(long)]
    scheduler_patience: Option<String>,
    #[arg(long)]
    early_stop_patience: Option<String>,
    #[arg(long)]
    max_epochs: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Defaults to $QSSM_OUTPUT_DIR, then "runs".
    #[arg(long)]
    output_dir: Option<String>,
}

impl ConfigFlags {
    fn overrides(&self) -> [(&'static str, &Option<String>); 25] {
        [
            ("dataset", &self.dataset),
            ("dataset-name", &self.dataset_name),
            ("calendar", &self.calendar),
            ("datetime-column", &self.datetime_column),
            ("datetime-format", &self.datetime_format),
            ("target-columns", &self.target_columns),
            ("predict-calendar", &self.predict_calendar),
            ("window", &self.window),
            ("horizon", &self.horizon),
            ("k", &self.k),
            ("d", &self.d),
            ("dropout-p", &self.dropout_p),
            ("g-min", &self.g_min),
            ("g-max", &self.g_max),
            ("gate", &self.gate),
            ("learning-rate", &self.learning_rate),
            ("weight-decay", &self.weight_decay),
            ("decoupled-weight-decay", &self.decoupled_weight_decay),
            ("scheduler-factor", &self.scheduler_factor),
            ("scheduler-patience", &self.scheduler_patience),
            ("early-stop-patience", &self.early_stop_patience),
            ("max-epochs", &self.max_epochs),
            ("batch-size", &self.batch_size),
            ("seed", &self.seed),
            ("output-dir", &self.output_dir),
        ]
    }

    fn resolve(&self) -> CliResult<RunConfig> {
        let mut c = RunConfig::default();
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                c.output_dir = dir;
            }
        }
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("--config: cannot read {}: {e}", path.display()))
            })?;
            c.apply_text(&text)
                .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
        }
        for (key, value) in self.overrides() {
            if let Some(v) = value {
                c.set(key, v).map_err(|e| CliError::Usage(format!("--{key}: {e}")))?;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigFlags,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigFlags,
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    /// train | val | test
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Args, Debug)]
struct ForecastArgs {
    #[command(flatten)]
    config: ConfigFlags,
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// Window index within the split; defaults to the last window.
    #[arg(long)]
    index: Option<usize>,
    /// Keep z-scored values instead of native units.
    #[arg(long)]
    normalized: bool,
    /// Write here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    step: f64,
    #[arg(long, default_value_t = 1e-7)]
    tolerance: f64,
    /// Must be 0: the check needs a deterministic forward pass.
    #[arg(long, default_value_t = 0.0)]
    dropout_p: f64,
    #[arg(long, default_value_t = 200)]
    gate_trials: usize,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [64usize, 128, 256, 512])]
    windows: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [24usize, 48, 96, 192])]
    horizons: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output_dir: Option<String>,
    /// Exit 1 unless every doubling ratio lies in [1.6, 2.6].
    #[arg(long)]
    check: bool,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[command(flatten)]
    config: ConfigFlags,
    /// Classical variant to compare against.
    #[arg(long, default_value = "classical")]
    baseline: String,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long, default_value_t = data::SINE_FIXTURE_ROWS)]
    rows: usize,
    #[arg(long, default_value_t = data::SINE_FIXTURE_PERIOD)]
    period: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_gate_backward(args, out, err, qssm::qgate::gate_backward)
}

/// [`run`] with the gate backward pass used by `gradcheck` replaced.
pub fn run_with_gate_backward<I, T>(
    args: I,
    out: &mut dyn Write,
    err: &mut dyn Write,
    gate_bw: GateBackward,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a, out, err),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Forecast(a) => cmd_forecast(&a, out),
        Command::Gradcheck(a) => cmd_gradcheck(&a, out, gate_bw),
        Command::Bench(a) => cmd_bench(&a, out),
        Command::Ablate(a) => cmd_ablate(&a, out, err),
        Command::Synth(a) => cmd_synth(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}

fn load_data(cfg: &RunConfig) -> CliResult<PreparedData> {
    if cfg.dataset.is_empty() {
        return Err(CliError::Usage(
            "no dataset given: pass --dataset <CSV> or set 'dataset' in the --config file".into(),
        ));
    }
    let series = data::load_csv(&cfg.dataset, &cfg.datetime_column, &cfg.datetime_format)?;
    Ok(data::prepare(&series, &cfg.data_options())?)
}

fn output_dir(cfg: &RunConfig) -> CliResult<PathBuf> {
    let dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&dir).map_err(|e| {
        CliError::Failure(format!("cannot create output directory {}: {e}", dir.display()))
    })?;
    Ok(dir)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents)
        .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))
}

fn write_report(dir: &Path, stem: &str, report: &ForecastReport) -> CliResult<()> {
    write_file(&dir.join(format!("{stem}.json")), &(report.to_json()? + "\n"))?;
    write_file(
        &dir.join(format!("{stem}.csv")),
        &format!("{REPORT_CSV_HEADER}\n{}\n", report.csv_row()),
    )
}

fn labels(cfg: &RunConfig, split: Split) -> ReportLabels {
    ReportLabels {
        dataset: cfg.dataset_label(),
        split: split.to_string(),
        seed: cfg.train.seed,
        config_hash: cfg.config_hash(),
    }
}

fn progress<'a>(err: &'a mut dyn Write, quiet: bool, tag: &str) -> impl FnMut(&EpochRecord) + 'a {
    let tag = tag.to_string();
    move |r: &EpochRecord| {
        if !quiet {
            let _ = writeln!(
                err,
                "{tag}epoch {:>3}  train {:.6}  val {:.6}  lr {:.2e}  gate {:.4}",
                r.epoch, r.train_mse, r.val_mse, r.lr, r.gate_value
            );
        }
    }
}

struct TrainedRun {
    model: Model,
    log: Vec<EpochRecord>,
    report: ForecastReport,
}

fn train_and_report(
    cfg: &RunConfig,
    data: &PreparedData,
    err: &mut dyn Write,
    quiet: bool,
    tag: &str,
) -> CliResult<TrainedRun> {
    let clock = std::time::Instant::now();
    let outcome = train_with(&cfg.train, data, progress(err, quiet, tag))?;
    let seconds = clock.elapsed().as_secs_f64();
    let model = outcome.store.into_model();
    let mut report = evaluate(&model, &data.test, &labels(cfg, Split::Test))?;
    report.seconds = seconds;
    Ok(TrainedRun {
        model,
        log: outcome.log,
        report,
    })
}

fn cmd_train(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let cfg = a.config.resolve()?;
    let data = load_data(&cfg)?;
    let dir = output_dir(&cfg)?;
    write_file(&dir.join("config.txt"), &cfg.emit())?;
    let run = train_and_report(&cfg, &data, err, a.quiet, "")?;
    checkpoint::save(dir.join("model.ckpt"), &run.model, &cfg.config_hash())?;
    write_file(&dir.join("log.csv"), &epoch_log_csv(&run.log))?;
    write_report(&dir, "report", &run.report)?;
    writeln!(out, "{}", run.report.to_json()?)?;
    Ok(())
}

fn parse_split(s: &str) -> CliResult<Split> {
    s.parse().map_err(|e: Error| CliError::Usage(format!("--split: {e}")))
}

/// Loads a checkpoint and refuses it unless it was trained under `cfg`.
fn load_matching(cfg: &RunConfig, flags: &ConfigFlags, path: &Path) -> CliResult<Model> {
    let ck = checkpoint::load(path)?;
    let trained_h = ck.model.decoder.horizon;
    if cfg.train.horizon != trained_h {
        let source = if flags.horizon.is_some() { "--horizon" } else { "config horizon" };
        return Err(CliError::Usage(format!(
            "{source} is {} but the checkpoint decoder was trained for H = {trained_h}; \
             the output layer shape depends on H, so retrain for a different horizon",
            cfg.train.horizon
        )));
    }
    let hash = cfg.config_hash();
    if ck.config_hash != hash {
        return Err(CliError::Failure(format!(
            "config hash {hash} does not match checkpoint hash {}; evaluate with the \
             config.txt written next to the checkpoint (--config)",
            ck.config_hash
        )));
    }
    if ck.model.dims().gate != cfg.train.gate {
        return Err(CliError::Failure(format!(
            "checkpoint uses the {} gate but the config selects {}",
            ck.model.dims().gate,
            cfg.train.gate
        )));
    }
    Ok(ck.model)
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = a.config.resolve()?;
    let split = parse_split(&a.split)?;
    let model = load_matching(&cfg, &a.config, &a.checkpoint)?;
    let data = load_data(&cfg)?;
    let report = evaluate(&model, data.split(split), &labels(&cfg, split))?;
    let dir = output_dir(&cfg)?;
    write_report(&dir, &format!("eval_{split}"), &report)?;
    writeln!(out, "{}", report.to_json()?)?;
    Ok(())
}

fn cmd_forecast(a: &ForecastArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = a.config.resolve()?;
    let split = parse_split(&a.split)?;
    let model = load_matching(&cfg, &a.config, &a.checkpoint)?;
    let data = load_data(&cfg)?;
    let samples = data.split(split);
    let index = a.index.unwrap_or(samples.len().saturating_sub(1));
    let sample = samples.get(index).ok_or_else(|| {
        CliError::Usage(format!(
            "--index {index} out of range: split '{split}' has {} windows",
            samples.len()
        ))
    })?;
    let mut values = model.predict(sample)?.values;
    if !a.normalized {
        values = data.normalizer.denormalize_columns(&values, &data.target_columns);
    }
    let raw = data.columns.len();
    let names: Vec<String> = data
        .target_columns
        .iter()
        .map(|&c| data.columns.get(c).cloned().unwrap_or_else(|| format!("calendar_{}", c - raw)))
        .collect();
    let mut csv = format!("step,{}\n", names.join(","));
    for r in 0..values.rows() {
        let row: Vec<String> = values.row(r).iter().map(|v| v.to_string()).collect();
        csv.push_str(&format!("{},{}\n", r + 1, row.join(",")));
    }
    match &a.out {
        Some(p) => write_file(p, &csv)?,
        None => write!(out, "{csv}")?,
    }
    Ok(())
}

fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write, gate_bw: GateBackward) -> CliResult<()> {
    if a.dropout_p != 0.0 {
        return Err(CliError::Usage(format!(
            "refusing to run with --dropout-p {}: gradcheck needs a deterministic forward pass",
            a.dropout_p
        )));
    }
    let opts = GradcheckOptions {
        seed: a.seed,
        step: a.step,
        tolerance: a.tolerance,
        gate_trials: a.gate_trials,
        ..GradcheckOptions::default()
    };
    let report = gradcheck::run_with(&opts, gate_bw)?;
    for c in &report.checks {
        writeln!(
            out,
            "{:<38} {:>5} compared  max rel err {:.3e} at {:<22} tol {:.0e}  {}",
            c.check,
            c.compared,
            c.max_rel_err,
            c.worst,
            c.tolerance,
            if c.passed() { "ok" } else { "FAILED" }
        )?;
    }
    if report.passed() {
        writeln!(out, "gradcheck passed: max relative error {:.3e}", report.max_rel_err())?;
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "gradcheck failed for: {}",
            report.offenders().join(", ")
        )))
    }
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> CliResult<()> {
    let opts = BenchOptions {
        windows: a.windows.clone(),
        horizons: a.horizons.clone(),
        trials: a.trials,
        seed: a.seed,
        ..BenchOptions::default()
    };
    let report = bench::run(&opts)?;
    let mut cfg = RunConfig::default();
    if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
        if !dir.is_empty() {
            cfg.output_dir = dir;
        }
    }
    if let Some(d) = &a.output_dir {
        cfg.output_dir = d.clone();
    }
    let dir = output_dir(&cfg)?;
    write_file(&dir.join("bench.csv"), &report.to_csv())?;
    write!(out, "{}", report.to_csv())?;
    let mut ok = true;
    for sweep in ["window", "horizon"] {
        let ratios = report.ratios(sweep);
        ok &= ratios.iter().all(|q| (1.6..=2.6).contains(q));
        let shown: Vec<String> = ratios.iter().map(|q| format!("{q:.2}")).collect();
        writeln!(
            out,
            "{sweep}: fitted exponent {:.3}, doubling ratios [{}]",
            report.exponent(sweep),
            shown.join(", ")
        )?;
    }
    if a.check && !ok {
        return Err(CliError::Failure(
            "a doubling ratio fell outside [1.6, 2.6]".into(),
        ));
    }
    Ok(())
}

fn cmd_ablate(a: &AblateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let cfg = a.config.resolve()?;
    let baseline: GateKind =
        a.baseline.parse().map_err(|e: Error| CliError::Usage(format!("--baseline: {e}")))?;
    if baseline == GateKind::Quantum {
        return Err(CliError::Usage("--baseline must be a classical gate".into()));
    }
    let data = load_data(&cfg)?;
    let dir = output_dir(&cfg)?;
    write_file(&dir.join("config.txt"), &cfg.emit())?;
    let mut rows = format!("gate,{REPORT_CSV_HEADER}\n");
    for gate in [GateKind::Quantum, baseline] {
        let run_cfg = cfg.with_gate(gate);
        let run = train_and_report(&run_cfg, &data, err, a.quiet, &format!("[{gate}] "))?;
        write_file(&dir.join(format!("log_{gate}.csv")), &epoch_log_csv(&run.log))?;
        rows.push_str(&format!("{gate},{}\n", run.report.csv_row()));
    }
    let (naive_mse, naive_mae) = evaluate_naive(&data.test)?;
    write_file(&dir.join("ablation.csv"), &rows)?;
    write!(out, "{rows}")?;
    writeln!(out, "naive last value: mse {naive_mse} mae {naive_mae}")?;
    Ok(())
}

fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> CliResult<()> {
    if a.rows == 0 || !(a.period > 0.0) || !(a.noise >= 0.0) {
        return Err(CliError::Usage(
            "--rows and --period must be positive and --noise non-negative".into(),
        ));
    }
    let series = data::synthetic_sine(a.rows, a.period, a.noise, a.seed);
    let file = fs::File::create(&a.out)
        .map_err(|e| CliError::Failure(format!("cannot create {}: {e}", a.out.display())))?;
    data::write_csv(&series, std::io::BufWriter::new(file), data::DEFAULT_DATETIME_FORMAT)?;
    writeln!(out, "wrote {} rows to {}", a.rows, a.out.display())?;
    Ok(())
}
