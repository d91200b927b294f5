//! Command-line front end for the packed-convolution engine.
//!
//! Six subcommands cover the operational surface: `bench` measures
//! throughput and fidelity across packing layouts and emits CSV, `conv`
//! and `xcorr` filter signal files, `snr-grid` sweeps quantization levels
//! against the analytic fidelity model, `adaptive` runs per-block mode
//! selection under an SNR floor, and `validate-backend` checks a
//! convolution core's numerical noise against the unpacking guard.
//!
//! Exit codes: 0 on success, 2 for configuration or input-format
//! problems, 3 for a companding-range violation under the strict bound
//! policy, 4 for a failed backend validation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use packconv::bench::{rows_to_csv, BenchConfig};
use packconv::io::{read_signal, write_signal};
use packconv::pipeline::{adaptive_convolve, convolve, cross_correlate, RunStats};
use packconv::precision::measured_snr_db;
use packconv::{
    companding_range, estimate_stats, synth, validate_backend_with, BoundPolicy, EngineConfig,
    Error, PackingMode, SnrModel,
};

#[derive(Parser)]
#[command(
    name = "packconv",
    version,
    about = "Precision-scalable 1D convolution and cross-correlation",
    max_term_width = 100
)]
struct Cli {
    /// Defaults file with one key=value per line (keys match the shared
    /// flag names); command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure throughput and fidelity across packing layouts; emits CSV.
    Bench(BenchArgs),
    /// Convolve a signal file with a kernel file.
    Conv(FilterArgs),
    /// Cross-correlate a signal file with a template file.
    Xcorr(FilterArgs),
    /// Sweep quantization levels and report predicted and measured SNR as CSV.
    SnrGrid(SnrGridArgs),
    /// Convolve with per-block layout selection under a fidelity floor.
    Adaptive(FilterArgs),
    /// Check a convolution core's numerical noise against the unpacking guard.
    ValidateBackend(ValidateArgs),
}

/// Flags shared by every subcommand, all optional so that a config file
/// can supply defaults.
#[derive(Args, Clone, Default)]
struct SharedOpts {
    /// Packing layout: full, sym, asym2, asym3, or adaptive.
    #[arg(long, value_name = "MODE")]
    mode: Option<String>,

    /// Signal quantization level.
    #[arg(long, value_name = "LEVEL")]
    sq: Option<u32>,

    /// Kernel quantization level.
    #[arg(long, value_name = "LEVEL")]
    kq: Option<u32>,

    /// Convolution core: direct or fft.
    #[arg(long, value_name = "CORE")]
    backend: Option<String>,

    /// Companding-range policy: strict (fail) or warn (record and continue).
    #[arg(long, value_name = "POLICY")]
    bound_policy: Option<String>,

    /// Guard magnitude absorbed during unpacking.
    #[arg(long, value_name = "REAL")]
    usys: Option<f64>,

    /// New samples consumed per processing block.
    #[arg(long, value_name = "COUNT")]
    block_w: Option<usize>,

    /// RNG seed for synthetic operands.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,

    /// Per-block fidelity floor in dB for adaptive runs (`inf` forces
    /// full precision everywhere).
    #[arg(long, value_name = "DB", allow_hyphen_values = true)]
    snr_floor: Option<f64>,

    /// Worker threads for block-parallel processing (results identical).
    #[arg(long, value_name = "COUNT")]
    workers: Option<usize>,
}

#[derive(Args)]
struct FilterArgs {
    /// Input signal: `.wav` (PCM16 mono) or raw little-endian f64.
    input: PathBuf,

    /// Kernel (or template for `xcorr`), same formats.
    kernel: PathBuf,

    /// Output file; the extension picks the format.
    output: PathBuf,

    /// Skip the one-block model calibration probe on adaptive runs.
    #[arg(long)]
    no_calibrate: bool,

    /// Skip the backend precision pre-flight.
    #[arg(long)]
    no_validate: bool,

    #[command(flatten)]
    shared: SharedOpts,
}

#[derive(Args)]
struct BenchArgs {
    /// Input length in samples.
    #[arg(long, default_value_t = 1 << 20)]
    l: usize,

    /// Kernel lengths, comma-separated.
    #[arg(long = "n", value_name = "N,..", value_delimiter = ',', default_value = "800")]
    n_values: Vec<usize>,

    /// Block budgets, comma-separated; `auto` lets the planner choose.
    #[arg(long = "w", value_name = "W,..", value_delimiter = ',', default_value = "auto")]
    w_values: Vec<String>,

    /// Layouts to measure; the full-precision baseline always runs.
    #[arg(long, value_delimiter = ',', default_value = "sym,asym2,asym3")]
    modes: Vec<String>,

    /// Timing repetitions per point; the median is reported.
    #[arg(long, default_value_t = 3)]
    reps: usize,

    /// Amplitude of the uniform synthetic operands.
    #[arg(long, default_value_t = 128.0)]
    amplitude: f64,

    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    #[command(flatten)]
    shared: SharedOpts,
}

#[derive(Args)]
struct SnrGridArgs {
    /// Measure on this signal file instead of a synthetic source.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,

    /// Kernel file; defaults to a synthetic uniform kernel.
    #[arg(long, value_name = "FILE")]
    kernel: Option<PathBuf>,

    /// Synthetic source when no input file is given: uniform, gaussian,
    /// laplacian, or ar1 (lag-0.9 autoregression, Laplacian innovations).
    #[arg(long, default_value = "uniform")]
    synth: String,

    /// Synthetic signal length.
    #[arg(long, default_value_t = 1 << 16)]
    l: usize,

    /// Kernel length when the kernel is synthetic.
    #[arg(long, default_value_t = 800)]
    n: usize,

    /// Amplitude (uniform) or scale (gaussian / laplacian / ar1
    /// innovations) of the synthetic operands.
    #[arg(long, default_value_t = 128.0)]
    amplitude: f64,

    /// Quantization levels applied to both operands, comma-separated.
    /// `--levels` with no value emits just the header.
    #[arg(
        long,
        value_delimiter = ',',
        num_args = 0..,
        default_value = "8,16,32,64,128,256"
    )]
    levels: Vec<u32>,

    /// Layouts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "sym,asym2,asym3")]
    modes: Vec<String>,

    /// Calibrate the model against one measurement at this level first.
    #[arg(long, value_name = "LEVEL")]
    calibrate_at: Option<u32>,

    /// Emit model predictions only; leave the measured column empty.
    #[arg(long)]
    predict_only: bool,

    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    #[command(flatten)]
    shared: SharedOpts,
}

#[derive(Args)]
struct ValidateArgs {
    /// Kernel length to validate at (padded to odd internally).
    #[arg(long, default_value_t = 801)]
    n: usize,

    /// Companding range; defaults to N * S_q * K_q from the level flags.
    #[arg(long, value_name = "INT")]
    r_max: Option<u64>,

    /// Random packed trials to run.
    #[arg(long, default_value_t = 100)]
    trials: usize,

    #[command(flatten)]
    shared: SharedOpts,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Maps failures onto the documented exit codes: 2 for anything the user
/// can fix in the invocation or input files, 3 for a strict-policy range
/// violation, 4 for a backend that failed validation.
fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Error>() {
        return match e {
            Error::BoundExceeded { .. } => 3,
            Error::BackendPrecisionFailure { .. } => 4,
            Error::Config(_) | Error::Io(_) | Error::Format(_) | Error::DegenerateSignal => 2,
            _ => 1,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 2;
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file_opts = match &cli.config {
        Some(path) => config_opts(path)?,
        None => SharedOpts::default(),
    };
    match cli.command {
        Command::Bench(args) => cmd_bench(args, file_opts),
        Command::Conv(args) => cmd_filter(args, file_opts, Direction::Convolve),
        Command::Xcorr(args) => cmd_filter(args, file_opts, Direction::Correlate),
        Command::SnrGrid(args) => cmd_snr_grid(args, file_opts),
        Command::Adaptive(mut args) => {
            match args.shared.mode.as_deref() {
                None => args.shared.mode = Some("adaptive".into()),
                Some("adaptive") => {}
                Some(other) => {
                    return Err(Error::Config(format!(
                        "the adaptive subcommand implies --mode adaptive, not '{other}'"
                    ))
                    .into())
                }
            }
            cmd_filter(args, file_opts, Direction::Convolve)
        }
        Command::ValidateBackend(args) => cmd_validate(args, file_opts),
    }
}

// ---------------------------------------------------------------------
// Shared-option resolution
// ---------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq)]
enum ModeChoice {
    Fixed(PackingMode),
    Adaptive,
}

enum Direction {
    Convolve,
    Correlate,
}

struct Settings {
    mode: ModeChoice,
    engine: EngineConfig,
    seed: u64,
    snr_floor: Option<f64>,
}

/// Turns merged options into a concrete engine configuration, starting
/// from the library defaults.
fn settings(opts: SharedOpts) -> Result<Settings, Error> {
    let mut engine = EngineConfig::default();
    let mode = match opts.mode.as_deref() {
        None => ModeChoice::Fixed(engine.mode),
        Some("adaptive") => ModeChoice::Adaptive,
        Some(raw) => ModeChoice::Fixed(raw.parse()?),
    };
    if let ModeChoice::Fixed(m) = mode {
        engine.mode = m;
    }
    if let Some(q) = opts.sq {
        engine.s_q = q;
    }
    if let Some(q) = opts.kq {
        engine.k_q = q;
    }
    if let Some(raw) = opts.backend.as_deref() {
        engine.backend = raw.parse()?;
    }
    if let Some(raw) = opts.bound_policy.as_deref() {
        engine.bound_policy = match raw {
            "strict" => BoundPolicy::Strict,
            "warn" => BoundPolicy::Warn,
            other => {
                return Err(Error::Config(format!(
                    "unknown bound policy '{other}' (expected strict or warn)"
                )))
            }
        };
    }
    if let Some(u) = opts.usys {
        engine.u_sys = u;
    }
    if opts.block_w.is_some() {
        engine.block_w = opts.block_w;
    }
    if let Some(w) = opts.workers {
        engine.workers = w;
    }
    Ok(Settings {
        mode,
        engine,
        seed: opts.seed.unwrap_or(0x7061636b),
        snr_floor: opts.snr_floor,
    })
}

/// Command-line flags win over config-file values.
fn merge(cli: SharedOpts, file: SharedOpts) -> SharedOpts {
    SharedOpts {
        mode: cli.mode.or(file.mode),
        sq: cli.sq.or(file.sq),
        kq: cli.kq.or(file.kq),
        backend: cli.backend.or(file.backend),
        bound_policy: cli.bound_policy.or(file.bound_policy),
        usys: cli.usys.or(file.usys),
        block_w: cli.block_w.or(file.block_w),
        seed: cli.seed.or(file.seed),
        snr_floor: cli.snr_floor.or(file.snr_floor),
        workers: cli.workers.or(file.workers),
    }
}

fn config_opts(path: &Path) -> anyhow::Result<SharedOpts> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "{}:{}: expected key=value, got '{line}'",
                path.display(),
                lineno + 1
            ))
            .into());
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    opts_from_map(&map).map_err(Into::into)
}

fn opts_from_map(map: &BTreeMap<String, String>) -> Result<SharedOpts, Error> {
    let mut opts = SharedOpts::default();
    for (key, value) in map {
        match key.as_str() {
            "mode" => opts.mode = Some(value.clone()),
            "sq" => opts.sq = Some(parse_value(key, value)?),
            "kq" => opts.kq = Some(parse_value(key, value)?),
            "backend" => opts.backend = Some(value.clone()),
            "bound-policy" => opts.bound_policy = Some(value.clone()),
            "usys" => opts.usys = Some(parse_value(key, value)?),
            "block-w" => opts.block_w = Some(parse_value(key, value)?),
            "seed" => opts.seed = Some(parse_value(key, value)?),
            "snr-floor" => opts.snr_floor = Some(parse_value(key, value)?),
            "workers" => opts.workers = Some(parse_value(key, value)?),
            other => {
                return Err(Error::Config(format!("unknown config key '{other}'")));
            }
        }
    }
    Ok(opts)
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, Error>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e| Error::Config(format!("config key '{key}': {e}")))
}

// ---------------------------------------------------------------------
// conv / xcorr / adaptive
// ---------------------------------------------------------------------

fn cmd_filter(args: FilterArgs, file_opts: SharedOpts, dir: Direction) -> anyhow::Result<()> {
    let st = settings(merge(args.shared, file_opts))?;
    let (signal, rate) = read_signal(&args.input)?;
    let (kernel, _) = read_signal(&args.kernel)?;
    let mut cfg = st.engine;
    if args.no_validate {
        cfg.validate = false;
    }

    let out = match st.mode {
        ModeChoice::Adaptive => {
            let floor = st.snr_floor.ok_or_else(|| {
                Error::Config("adaptive mode needs --snr-floor (use `inf` for lossless)".into())
            })?;
            let kernel: Vec<f64> = match dir {
                Direction::Convolve => kernel,
                Direction::Correlate => kernel.iter().rev().copied().collect(),
            };
            adaptive_convolve(&signal, &kernel, floor, &cfg, !args.no_calibrate)?
        }
        ModeChoice::Fixed(_) => match dir {
            Direction::Convolve => convolve(&signal, &kernel, &cfg)?,
            Direction::Correlate => cross_correlate(&signal, &kernel, &cfg)?,
        },
    };

    report_run(&out.stats);
    write_signal(&args.output, &out.samples, rate)?;
    eprintln!(
        "wrote {} samples to {}",
        out.samples.len(),
        args.output.display()
    );
    Ok(())
}

/// Prints run diagnostics to stderr so data streams stay clean.
fn report_run(stats: &RunStats) {
    if let Some(v) = &stats.bound_violation {
        eprintln!(
            "warning: companding range {} exceeds the {} limit {}; digits may collide",
            v.r_max, v.mode, v.limit
        );
    }
    if let Some(rep) = &stats.backend_validation {
        eprintln!(
            "backend {}: {} trials, max error {:.3e} vs threshold {:.3e} -> {}",
            rep.backend,
            rep.trials,
            rep.max_abs_error,
            rep.threshold,
            if rep.passed { "ok" } else { "FAILED" }
        );
    }
    for d in &stats.decisions {
        eprintln!(
            "block {:>5}: {} S_q={} K_q={} predicted {:.1} dB",
            d.block, d.mode, d.s_q, d.k_q, d.predicted_snr_db
        );
    }
    if stats.unpack_overflows > 0 {
        eprintln!(
            "warning: {} decoded digits fell outside the companding range",
            stats.unpack_overflows
        );
    }
}

// ---------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------

fn cmd_bench(args: BenchArgs, file_opts: SharedOpts) -> anyhow::Result<()> {
    let st = settings(merge(args.shared, file_opts))?;
    let modes = args
        .modes
        .iter()
        .map(|m| m.parse::<PackingMode>())
        .collect::<Result<Vec<_>, _>>()?;
    let w_values = args
        .w_values
        .iter()
        .map(|w| parse_budget(w))
        .collect::<Result<Vec<_>, _>>()?;

    let cfg = BenchConfig {
        l: args.l,
        n_values: args.n_values,
        w_values,
        modes,
        s_q: st.engine.s_q,
        k_q: st.engine.k_q,
        backend: st.engine.backend,
        repetitions: args.reps,
        seed: st.seed,
        amplitude: args.amplitude,
        workers: st.engine.workers,
    };
    let rows = packconv::bench::run_bench(&cfg)?;

    let mut doc = format!(
        "# packconv bench l={} sq={} kq={} backend={} reps={} seed={} amplitude={} workers={}\n",
        cfg.l,
        cfg.s_q,
        cfg.k_q,
        cfg.backend,
        cfg.repetitions,
        cfg.seed,
        cfg.amplitude,
        cfg.workers
    );
    doc.push_str(&rows_to_csv(&rows));
    emit(args.out.as_deref(), &doc)
}

fn parse_budget(raw: &str) -> Result<Option<usize>, Error> {
    if raw == "auto" {
        return Ok(None);
    }
    raw.parse::<usize>().map(Some).map_err(|e| {
        Error::Config(format!("block budget '{raw}': {e} (expected a count or `auto`)"))
    })
}

// ---------------------------------------------------------------------
// snr-grid
// ---------------------------------------------------------------------

fn cmd_snr_grid(args: SnrGridArgs, file_opts: SharedOpts) -> anyhow::Result<()> {
    let st = settings(merge(args.shared, file_opts))?;
    let signal = match (&args.input, args.synth.as_str()) {
        (Some(path), _) => read_signal(path)?.0,
        (None, "uniform") => synth::uniform(args.l, args.amplitude, st.seed),
        (None, "gaussian") => synth::gaussian(args.l, args.amplitude, st.seed),
        (None, "laplacian") => synth::laplacian(args.l, args.amplitude, st.seed),
        (None, "ar1") => synth::ar1(args.l, 0.9, args.amplitude, st.seed),
        (None, other) => {
            return Err(Error::Config(format!(
                "unknown synthetic source '{other}' (expected uniform, gaussian, laplacian or ar1)"
            ))
            .into())
        }
    };
    let kernel = match &args.kernel {
        Some(path) => read_signal(path)?.0,
        None => synth::uniform(args.n, args.amplitude, st.seed.wrapping_add(1)),
    };

    let modes = args
        .modes
        .iter()
        .map(|m| m.parse::<PackingMode>())
        .collect::<Result<Vec<_>, _>>()?;
    let base_model = SnrModel::new(estimate_stats(&signal)?, estimate_stats(&kernel)?, kernel.len());

    // Grid exploration never aborts on a range violation: out-of-bound
    // points simply measure poorly, which is the information the grid is
    // for.
    let mut run_cfg = st.engine.clone();
    run_cfg.bound_policy = BoundPolicy::Warn;

    let reference = if args.predict_only {
        Vec::new()
    } else {
        let mut full = run_cfg.clone();
        full.mode = PackingMode::Full;
        convolve(&signal, &kernel, &full)?.samples
    };

    let mut doc = format!(
        "# packconv snr-grid source={} n={} l={} backend={} seed={}{}\n",
        args.input
            .as_deref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| args.synth.clone()),
        kernel.len(),
        signal.len(),
        run_cfg.backend,
        st.seed,
        match args.calibrate_at {
            Some(q) => format!(" calibrated_at={q}"),
            None => String::new(),
        }
    );
    doc.push_str("s_q,k_q,mode,predicted_db,measured_db\n");

    for &mode in &modes {
        let mut cfg = run_cfg.clone();
        cfg.mode = mode;

        let model = match args.calibrate_at {
            None => base_model.clone(),
            Some(q) => {
                cfg.s_q = q;
                cfg.k_q = q;
                let probe = convolve(&signal, &kernel, &cfg)?.samples;
                let measured = measured_snr_db(&reference, &probe)?;
                base_model.calibrated(measured, q, q)?
            }
        };

        for &q in &args.levels {
            let predicted = model.predicted_snr_db(q, q)?;
            let measured = if args.predict_only {
                String::new()
            } else {
                cfg.s_q = q;
                cfg.k_q = q;
                let approx = convolve(&signal, &kernel, &cfg)?.samples;
                format!("{:.3}", measured_snr_db(&reference, &approx)?)
            };
            writeln!(doc, "{q},{q},{mode},{predicted:.3},{measured}").expect("string write");
        }
    }
    emit(args.out.as_deref(), &doc)
}

// ---------------------------------------------------------------------
// validate-backend
// ---------------------------------------------------------------------

fn cmd_validate(args: ValidateArgs, file_opts: SharedOpts) -> anyhow::Result<()> {
    let st = settings(merge(args.shared, file_opts))?;
    let r_max = args
        .r_max
        .unwrap_or_else(|| companding_range(args.n, st.engine.s_q, st.engine.k_q));
    let backend = st.engine.backend.build();
    let report = validate_backend_with(
        backend.as_ref(),
        args.n,
        r_max,
        args.trials,
        st.engine.u_sys,
        st.seed,
    );
    println!(
        "backend={} n={} r_max={} trials={} max_abs_error={:.3e} threshold={:.3e} passed={}",
        report.backend,
        report.n,
        report.r_max,
        report.trials,
        report.max_abs_error,
        report.threshold,
        report.passed
    );
    report.into_result()?;
    Ok(())
}

// ---------------------------------------------------------------------

fn emit(out: Option<&Path>, doc: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, doc)
            .with_context(|| format!("writing report to {}", path.display()))?,
        None => print!("{doc}"),
    }
    Ok(())
}
