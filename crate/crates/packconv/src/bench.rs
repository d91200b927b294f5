//! Throughput and fidelity measurement across layouts.
//!
//! Each configured `(kernel length, block budget, mode)` point convolves
//! the same seeded uniform operands through the full pipeline (companding,
//! packing, and unpacking included) and reports median-of-repetitions
//! throughput, the speedup against the full-precision baseline at the
//! same geometry, the measured SNR against that baseline's output, and
//! the analytic per-block operation count.

use std::time::Instant;

use crate::backend::BackendKind;
use crate::error::{Error, Result};
use crate::flops::{flop_count, Domain};
use crate::packing::{BoundPolicy, PackingMode};
use crate::pipeline::{convolve, EngineConfig};
use crate::precision::measured_snr_db;
use crate::synth;

/// Benchmark configuration.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Input length in samples.
    pub l: usize,
    /// Kernel lengths to sweep.
    pub n_values: Vec<usize>,
    /// Block budgets to sweep (`None` entries use the plan default).
    pub w_values: Vec<Option<usize>>,
    /// Packed layouts to measure (the full-precision baseline always
    /// runs).
    pub modes: Vec<PackingMode>,
    pub s_q: u32,
    pub k_q: u32,
    pub backend: BackendKind,
    /// Timing repetitions per point (median is reported); at least 3.
    pub repetitions: usize,
    pub seed: u64,
    /// Amplitude of the uniform test operands.
    pub amplitude: f64,
    pub workers: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            l: 1 << 20,
            n_values: vec![800],
            w_values: vec![None],
            modes: vec![
                PackingMode::Symmetric,
                PackingMode::Asymmetric(2),
                PackingMode::Asymmetric(3),
            ],
            s_q: 16,
            k_q: 16,
            backend: BackendKind::Direct,
            repetitions: 3,
            seed: 0x62656e63,
            amplitude: 128.0,
            workers: 1,
        }
    }
}

/// One measured point.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub mode: PackingMode,
    pub backend: BackendKind,
    pub n: usize,
    /// Block budget actually used.
    pub w: usize,
    pub s_q: u32,
    pub k_q: u32,
    /// Millions of output samples per second, end to end.
    pub msamples_per_s: f64,
    /// Throughput gain over the full-precision baseline, in percent.
    pub gain_pct: f64,
    /// Measured SNR against the baseline output (infinite when equal).
    pub snr_db: f64,
    /// Analytic per-block operation count for the point.
    pub flops: f64,
}

/// CSV header matching [`row_to_csv`].
pub const CSV_HEADER: &str = "mode,backend,N,W,S_q,K_q,msamples_per_s,gain_pct,snr_db,flops";

/// Formats one row; infinite SNR is written as `inf`.
pub fn row_to_csv(row: &BenchRow) -> String {
    let snr = if row.snr_db.is_infinite() {
        "inf".to_string()
    } else {
        format!("{:.3}", row.snr_db)
    };
    format!(
        "{},{},{},{},{},{},{:.3},{:.1},{},{:.0}",
        row.mode,
        row.backend,
        row.n,
        row.w,
        row.s_q,
        row.k_q,
        row.msamples_per_s,
        row.gain_pct,
        snr,
        row.flops
    )
}

/// Renders a full CSV document.
pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row_to_csv(row));
        out.push('\n');
    }
    out
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    xs[xs.len() / 2]
}

/// Times one configuration, discarding a warm-up run, and returns
/// `(median_msamples_per_s, output)`.
fn time_point(
    signal: &[f64],
    kernel: &[f64],
    cfg: &EngineConfig,
    repetitions: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut output = convolve(signal, kernel, cfg)?.samples; // warm-up
    let out_len = output.len() as f64;
    let mut rates = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        output = convolve(signal, kernel, cfg)?.samples;
        let secs = start.elapsed().as_secs_f64();
        rates.push(out_len / secs / 1e6);
    }
    Ok((median(rates), output))
}

/// Runs the benchmark matrix. Outputs are deterministic for a given seed;
/// only the timing figures vary between runs.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.repetitions < 3 {
        return Err(Error::Config(
            "benchmark needs at least 3 repetitions for a median".to_string(),
        ));
    }
    let domain = match cfg.backend {
        BackendKind::Direct => Domain::Time,
        BackendKind::Fft => Domain::Frequency,
    };
    let signal = synth::uniform(cfg.l, cfg.amplitude, cfg.seed);
    let mut rows = Vec::new();

    for &n in &cfg.n_values {
        let kernel = synth::uniform(n, cfg.amplitude, cfg.seed ^ 0x6b65726e);
        for &w in &cfg.w_values {
            let base_cfg = EngineConfig {
                mode: PackingMode::Full,
                s_q: cfg.s_q,
                k_q: cfg.k_q,
                backend: cfg.backend,
                bound_policy: BoundPolicy::Warn,
                block_w: w,
                workers: cfg.workers,
                ..EngineConfig::default()
            };
            let (full_rate, full_out) = time_point(&signal, &kernel, &base_cfg, cfg.repetitions)?;
            let plan =
                crate::plan::plan_blocks(cfg.l, n, w, PackingMode::Full)?;
            rows.push(BenchRow {
                mode: PackingMode::Full,
                backend: cfg.backend,
                n,
                w: plan.w,
                s_q: cfg.s_q,
                k_q: cfg.k_q,
                msamples_per_s: full_rate,
                gain_pct: 0.0,
                snr_db: f64::INFINITY,
                flops: flop_count(PackingMode::Full, domain, n),
            });
            for &mode in &cfg.modes {
                if mode == PackingMode::Full {
                    continue;
                }
                let mode_cfg = EngineConfig {
                    mode,
                    ..base_cfg.clone()
                };
                let (rate, out) = time_point(&signal, &kernel, &mode_cfg, cfg.repetitions)?;
                let plan = crate::plan::plan_blocks(cfg.l, n, w, mode)?;
                rows.push(BenchRow {
                    mode,
                    backend: cfg.backend,
                    n,
                    w: plan.w,
                    s_q: cfg.s_q,
                    k_q: cfg.k_q,
                    msamples_per_s: rate,
                    gain_pct: (rate / full_rate - 1.0) * 100.0,
                    snr_db: measured_snr_db(&full_out, &out)?,
                    flops: flop_count(mode, domain, n),
                });
            }
        }
    }
    Ok(rows)
}
