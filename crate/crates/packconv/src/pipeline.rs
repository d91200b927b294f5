//! The streaming engine: compand, pack, convolve, unpack, rescale — block
//! by block.
//!
//! The kernel is companded once; each input block is companded against its
//! own peak, packed in the configured layout, convolved through the chosen
//! backend, and its packed outputs decoded back to integer digits. Kept
//! digit slices are mapped to global output positions by the block plan
//! and scaled by the inverse of the two companding factors.
//!
//! On the time-domain backend the packed streams use the integer-grid
//! layout, so below the mode's range limit the decoded digits are
//! *exactly* the integer convolution of the companded operands. On the
//! FFT backend packed values live in the coefficient domain and unpacking
//! runs the guarded floor ladder; it is reliable whenever
//! [`crate::backend::validate_backend`] passes for the operating point,
//! which the pipeline checks up front.

use rayon::prelude::*;

use crate::backend::{validate_backend_with, BackendKind, ConvBackend, ValidationReport};
use crate::companding::{compand, estimate_stats, MarginalStats, QuantizedSignal};
use crate::error::{Error, Result};
use crate::packing::{
    check_bound, companding_range, pack_asymmetric_window, pack_asymmetric_window_scaled,
    pack_symmetric_kernel_crossed, pack_symmetric_signal, pack_symmetric_signal_scaled,
    packing_coefficient, BoundPolicy, BoundViolation, PackingMode,
};
use crate::plan::{plan_blocks, BlockPlan};
use crate::precision::{measured_snr_db, select_mode, SnrModel};
use crate::unpack::{
    assemble_output, unpack_asymmetric_guarded, unpack_asymmetric_scaled,
    unpack_symmetric_guarded, unpack_symmetric_scaled, GuardedDigits, UnpackContext,
    U_SYS_DEFAULT,
};

/// Pipeline configuration.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub mode: PackingMode,
    pub s_q: u32,
    pub k_q: u32,
    pub backend: BackendKind,
    pub bound_policy: BoundPolicy,
    /// Systematic guard for floor-based unpacking.
    pub u_sys: f64,
    /// Per-block budget of new samples; defaults to twice the padded
    /// kernel length.
    pub block_w: Option<usize>,
    /// Block-level parallelism; values above 1 enable a worker pool.
    /// Results are identical either way.
    pub workers: usize,
    /// Run the backend precision pre-flight for inexact backends.
    pub validate: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: PackingMode::Symmetric,
            s_q: 16,
            k_q: 16,
            backend: BackendKind::Direct,
            bound_policy: BoundPolicy::Strict,
            u_sys: U_SYS_DEFAULT,
            block_w: None,
            workers: 1,
            validate: true,
        }
    }
}

/// One adaptive per-block choice, for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockDecision {
    pub block: usize,
    pub mode: PackingMode,
    pub s_q: u32,
    pub k_q: u32,
    pub predicted_snr_db: f64,
}

/// Run diagnostics.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    pub blocks: usize,
    /// Digits found outside the companding range while decoding (possible
    /// only when the range limit was overridden or an inexact backend's
    /// noise breached the guard). Detection only; nothing is corrected.
    pub unpack_overflows: u64,
    /// Range violation recorded under [`BoundPolicy::Warn`].
    pub bound_violation: Option<BoundViolation>,
    /// Pre-flight precision report for inexact backends.
    pub backend_validation: Option<ValidationReport>,
    /// Per-block mode choices (adaptive runs only).
    pub decisions: Vec<BlockDecision>,
}

/// Convolution result plus diagnostics.
#[derive(Debug, Clone)]
pub struct ConvOutput {
    pub samples: Vec<f64>,
    pub stats: RunStats,
}

/// Full linear convolution of `signal` with `kernel` through the
/// configured packing pipeline. Output length is
/// `signal.len() + kernel.len() - 1`.
pub fn convolve(signal: &[f64], kernel: &[f64], cfg: &EngineConfig) -> Result<ConvOutput> {
    let plan = plan_blocks(signal.len(), kernel.len(), cfg.block_w, cfg.mode)?;
    run_plan(signal, kernel, &plan, cfg)
}

/// Full cross-correlation: the kernel is time-reversed and fed through the
/// same pipeline, so output index `t` holds the correlation at lag
/// `t - (kernel.len() - 1)`.
pub fn cross_correlate(signal: &[f64], kernel: &[f64], cfg: &EngineConfig) -> Result<ConvOutput> {
    let reversed: Vec<f64> = kernel.iter().rev().copied().collect();
    let plan = plan_blocks(signal.len(), reversed.len(), cfg.block_w, cfg.mode)?;
    run_plan(signal, &reversed, &plan, cfg)
}

fn run_plan(
    signal: &[f64],
    kernel: &[f64],
    plan: &BlockPlan,
    cfg: &EngineConfig,
) -> Result<ConvOutput> {
    let mut kernel_p = kernel.to_vec();
    kernel_p.resize(plan.n, 0.0);
    let backend = cfg.backend.build();

    if cfg.mode == PackingMode::Full {
        let pieces = map_blocks(plan.p, cfg.workers, |idx| {
            full_block_piece(plan, idx, signal, &*backend, &kernel_p)
        })?;
        let samples = assemble_output(pieces, plan.output_len());
        return Ok(ConvOutput {
            samples,
            stats: RunStats {
                blocks: plan.p,
                ..RunStats::default()
            },
        });
    }

    if cfg.s_q == 0 || cfg.k_q == 0 {
        return Err(Error::Config(
            "quantization levels must be at least 1".to_string(),
        ));
    }
    let range = companding_range(plan.n, cfg.s_q, cfg.k_q);
    let bound_violation = check_bound(cfg.mode, range, cfg.bound_policy)?;
    let backend_validation = preflight(&*backend, plan.n, range + 1, cfg)?;

    let qk = compand(&kernel_p, cfg.k_q);
    let ops = KernelOps::build(cfg.mode, &qk, range);
    let results = map_blocks(plan.p, cfg.workers, |idx| {
        packed_block_piece(
            plan, idx, signal, &*backend, cfg.mode, cfg.s_q, cfg.k_q, &qk, &ops, cfg.u_sys,
        )
    })?;

    let mut unpack_overflows = 0;
    let mut pieces = Vec::with_capacity(results.len());
    for (piece, overflows) in results {
        unpack_overflows += overflows;
        pieces.push(piece);
    }
    let samples = assemble_output(pieces, plan.output_len());
    Ok(ConvOutput {
        samples,
        stats: RunStats {
            blocks: plan.p,
            unpack_overflows,
            bound_violation,
            backend_validation,
            decisions: Vec::new(),
        },
    })
}

/// Candidate ladder used by adaptive runs, cheapest first. Full precision
/// is the implicit fallback.
pub const ADAPTIVE_CANDIDATES: [PackingMode; 2] =
    [PackingMode::Symmetric, PackingMode::Asymmetric(2)];

/// Convolution with per-block mode selection under an SNR floor.
///
/// For every block the marginal statistics of its window drive the
/// analytic model; the cheapest candidate whose prediction clears
/// `floor_db` processes the block, and full precision takes over when
/// none does. With `calibrate`, block 0 is first run at coarse levels
/// (`s_q = k_q = 8`) against a full-precision reference and the measured
/// gap is folded into all subsequent predictions.
///
/// Backend pre-flight validation is skipped (operating points vary per
/// block); decode overflow counters still catch corruption.
pub fn adaptive_convolve(
    signal: &[f64],
    kernel: &[f64],
    floor_db: f64,
    cfg: &EngineConfig,
    calibrate: bool,
) -> Result<ConvOutput> {
    let n_odd = if kernel.len() % 2 == 0 {
        kernel.len() + 1
    } else {
        kernel.len()
    };
    // One geometry must serve every candidate layout, so the block budget
    // is shaped for all of them at once.
    let granule = 2 * ADAPTIVE_CANDIDATES
        .iter()
        .map(|m| m.digits_per_value())
        .fold(1, lcm);
    let base = cfg.block_w.unwrap_or(2 * n_odd).max(2 * n_odd);
    let w = base.div_ceil(granule) * granule;
    let plan = plan_blocks(signal.len(), kernel.len(), Some(w), PackingMode::Symmetric)?;

    let mut kernel_p = kernel.to_vec();
    kernel_p.resize(plan.n, 0.0);
    let backend = cfg.backend.build();
    let kstats = estimate_stats(&kernel_p)?;

    // Pre-resolve the candidate operating points: tied levels depend only
    // on the mode limit and kernel length, not on block statistics.
    let mut candidate_ops = Vec::new();
    for &mode in &ADAPTIVE_CANDIDATES {
        let probe = SnrModel::new(
            MarginalStats {
                sigma: 1.0,
                peak: 1.0,
            },
            MarginalStats {
                sigma: 1.0,
                peak: 1.0,
            },
            plan.n,
        );
        let d = select_mode(&probe, f64::NEG_INFINITY, &[mode]);
        if d.mode != mode {
            continue; // Range cannot fit even unit levels.
        }
        let range = companding_range(plan.n, d.s_q, d.k_q);
        let qk = compand(&kernel_p, d.k_q);
        let ops = KernelOps::build(mode, &qk, range);
        candidate_ops.push((mode, d.s_q, d.k_q, qk, ops));
    }

    let calibration_offset = if calibrate {
        calibration_offset(signal, &kernel_p, &plan, &*backend, kstats, cfg.u_sys)
    } else {
        0.0
    };

    let results = map_blocks(plan.p, cfg.workers, |idx| {
        let window = extract_window(signal, &plan, idx);
        let sstats = estimate_stats(&window).unwrap_or(MarginalStats {
            sigma: 0.0,
            peak: 0.0,
        });
        let mut model = SnrModel::new(sstats, kstats, plan.n);
        model.calibration_offset_db = calibration_offset;
        let d = select_mode(&model, floor_db, &ADAPTIVE_CANDIDATES);
        let decision = BlockDecision {
            block: idx,
            mode: d.mode,
            s_q: d.s_q,
            k_q: d.k_q,
            predicted_snr_db: d.predicted_snr_db,
        };
        let (piece, overflows) = match candidate_ops
            .iter()
            .find(|(m, s, k, _, _)| *m == d.mode && *s == d.s_q && *k == d.k_q)
        {
            Some((mode, s_q, k_q, qk, ops)) => packed_block_piece(
                &plan, idx, signal, &*backend, *mode, *s_q, *k_q, qk, ops, cfg.u_sys,
            ),
            None => (
                full_block_piece(&plan, idx, signal, &*backend, &kernel_p),
                0,
            ),
        };
        (piece, overflows, decision)
    })?;

    let mut unpack_overflows = 0;
    let mut pieces = Vec::with_capacity(results.len());
    let mut decisions = Vec::with_capacity(results.len());
    for (piece, overflows, decision) in results {
        unpack_overflows += overflows;
        pieces.push(piece);
        decisions.push(decision);
    }
    let samples = assemble_output(pieces, plan.output_len());
    Ok(ConvOutput {
        samples,
        stats: RunStats {
            blocks: plan.p,
            unpack_overflows,
            bound_violation: None,
            backend_validation: None,
            decisions,
        },
    })
}

/// Measures the model error on block 0 at coarse levels and returns the
/// dB offset to fold into later predictions. Falls back to zero when the
/// block is degenerate or the probe is exact.
fn calibration_offset(
    signal: &[f64],
    kernel_p: &[f64],
    plan: &BlockPlan,
    backend: &dyn ConvBackend,
    kstats: MarginalStats,
    u_sys: f64,
) -> f64 {
    const PROBE_Q: u32 = 8;
    let range = companding_range(plan.n, PROBE_Q, PROBE_Q);
    let mode = if range <= PackingMode::Symmetric.bound_limit().unwrap_or(0) {
        PackingMode::Symmetric
    } else if range <= PackingMode::Asymmetric(2).bound_limit().unwrap_or(0) {
        PackingMode::Asymmetric(2)
    } else {
        return 0.0;
    };
    let window = extract_window(signal, plan, 0);
    let Ok(sstats) = estimate_stats(&window) else {
        return 0.0;
    };
    let model = SnrModel::new(sstats, kstats, plan.n);
    let Ok(predicted) = model.predicted_snr_db(PROBE_Q, PROBE_Q) else {
        return 0.0;
    };
    let qk = compand(kernel_p, PROBE_Q);
    let ops = KernelOps::build(mode, &qk, range);
    let ((_, scale, probe), _) =
        packed_block_piece(plan, 0, signal, backend, mode, PROBE_Q, PROBE_Q, &qk, &ops, u_sys);
    let (_, _, reference) = full_block_piece(plan, 0, signal, backend, kernel_p);
    let probe_scaled: Vec<f64> = probe.iter().map(|&x| x * scale).collect();
    match measured_snr_db(&reference, &probe_scaled) {
        Ok(measured) if measured.is_finite() => measured - predicted,
        _ => 0.0,
    }
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// `(output_offset, inverse_companding_scale, kept_samples)`.
type Piece = (usize, f64, Vec<f64>);

fn map_blocks<T, F>(p: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        Ok(pool.install(|| (0..p).into_par_iter().map(f).collect()))
    } else {
        Ok((0..p).map(f).collect())
    }
}

fn preflight(
    backend: &dyn ConvBackend,
    n: usize,
    r_eff: u64,
    cfg: &EngineConfig,
) -> Result<Option<ValidationReport>> {
    if backend.exact_integer_limit() > 0.0 || !cfg.validate {
        return Ok(None);
    }
    const PREFLIGHT_TRIALS: usize = 20;
    let report = validate_backend_with(backend, n, r_eff, PREFLIGHT_TRIALS, cfg.u_sys, 0x70636b76);
    if !report.passed && cfg.bound_policy == BoundPolicy::Strict {
        return report.into_result().map(Some);
    }
    Ok(Some(report))
}

fn extract_window(signal: &[f64], plan: &BlockPlan, idx: usize) -> Vec<f64> {
    let off = plan.source_offset(idx).min(signal.len());
    let end = (off + plan.w_block).min(signal.len());
    let mut window = Vec::with_capacity(plan.w_block);
    window.extend_from_slice(&signal[off..end]);
    window.resize(plan.w_block, 0.0);
    window
}

fn full_block_piece(
    plan: &BlockPlan,
    idx: usize,
    signal: &[f64],
    backend: &dyn ConvBackend,
    kernel: &[f64],
) -> Piece {
    let window = extract_window(signal, plan, idx);
    let conv = backend.convolve(&window, kernel);
    let (start_t, len) = plan.keep_range(idx);
    (
        plan.out_offset(idx),
        1.0,
        conv[start_t..start_t + len].to_vec(),
    )
}

/// Kernel-side packed operand, built once per operating point.
enum KernelOps {
    /// Symmetric crossed layout (integer-valued in both pictures).
    Crossed(Vec<f64>),
    /// Unpacked taps.
    Taps(Vec<f64>),
}

impl KernelOps {
    fn build(mode: PackingMode, qk: &QuantizedSignal, range: u64) -> KernelOps {
        let beta = 2.0 * (range + 1) as f64;
        match mode {
            PackingMode::Symmetric => {
                KernelOps::Crossed(pack_symmetric_kernel_crossed(&qk.samples, beta))
            }
            _ => KernelOps::Taps(qk.samples.iter().map(|&x| x as f64).collect()),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn packed_block_piece(
    plan: &BlockPlan,
    idx: usize,
    signal: &[f64],
    backend: &dyn ConvBackend,
    mode: PackingMode,
    s_q: u32,
    k_q: u32,
    qk: &QuantizedSignal,
    ops: &KernelOps,
    u_sys: f64,
) -> (Piece, u64) {
    let range = companding_range(plan.n, s_q, k_q);
    let r_eff = range + 1;
    let beta = 2.0 * r_eff as f64;
    let eps = packing_coefficient(r_eff);
    let use_scaled = backend.exact_integer_limit() > 0.0;

    let window = extract_window(signal, plan, idx);
    let qs = compand(&window, s_q);
    let scale = 1.0 / (qs.c * qk.c);

    match (mode, ops) {
        (PackingMode::Symmetric, KernelOps::Crossed(kc)) => {
            let w_start = plan.w_start(idx);
            let m_hi = if idx == 0 {
                plan.w_block / 2 - 2
            } else {
                plan.w_block / 2 - 1
            };
            let conv;
            let guarded = if use_scaled {
                let svals = pack_symmetric_signal_scaled(&qs.samples, beta);
                conv = backend.convolve(&svals, kc);
                unpack_symmetric_scaled(&conv[w_start..=m_hi], r_eff, range)
            } else {
                let packed = pack_symmetric_signal(&qs, eps);
                conv = backend.convolve(&packed.values, kc);
                let ctx = UnpackContext::new(r_eff, u_sys, w_start, mode);
                unpack_symmetric_guarded(&conv[w_start..=m_hi], &ctx, range)
            };
            let (samples, extra) = symmetric_samples(&guarded, plan, idx, range);
            (
                (plan.out_offset(idx), scale, samples),
                guarded.overflows + extra,
            )
        }
        (PackingMode::Asymmetric(m), KernelOps::Taps(taps)) => {
            let m = m as usize;
            let stride = plan.w / m;
            let lp = stride + plan.n - 1;
            let base = if idx == 0 { 0 } else { 2 };
            let conv;
            let guarded = if use_scaled {
                let svals =
                    pack_asymmetric_window_scaled(&qs.samples[base..], beta, m, stride, lp);
                conv = backend.convolve(&svals, taps);
                unpack_asymmetric_scaled(&conv[..lp], m, r_eff, range)
            } else {
                let svals = pack_asymmetric_window(&qs.samples[base..], eps, m, stride, lp);
                conv = backend.convolve(&svals, taps);
                let ctx = UnpackContext::new(r_eff, u_sys, 0, mode);
                unpack_asymmetric_guarded(&conv[..lp], &ctx, m, range)
            };
            let samples = asymmetric_samples(&guarded, m, stride, plan, idx);
            ((plan.out_offset(idx), scale, samples), guarded.overflows)
        }
        _ => unreachable!("kernel operand layout mismatches the packing mode"),
    }
}

/// Recombines symmetric digit groups into the block's kept output slice.
/// Also counts recombined outputs outside the companding range.
fn symmetric_samples(
    guarded: &GuardedDigits,
    plan: &BlockPlan,
    idx: usize,
    range: u64,
) -> (Vec<f64>, u64) {
    let (start_t, len) = plan.keep_range(idx);
    let w_start = plan.w_start(idx);
    let mut interleaved = Vec::with_capacity(2 * guarded.digits.len());
    let mut prev_low = 0_i64;
    for g in &guarded.digits {
        interleaved.push(g[0] + prev_low);
        interleaved.push(g[1]);
        prev_low = g[2];
    }
    let off = start_t - 2 * w_start;
    let kept = &interleaved[off..off + len];
    let extra = kept
        .iter()
        .filter(|v| v.unsigned_abs() > range)
        .count() as u64;
    (kept.iter().map(|&d| d as f64).collect(), extra)
}

/// Places asymmetric digits into the block's kept output slice. Digit `q`
/// of packed output `j` is the convolution output at block-local position
/// `base + q * stride + j`; positions below the window's steady state are
/// meaningful only for the leading digit of block 0.
fn asymmetric_samples(
    guarded: &GuardedDigits,
    m: usize,
    stride: usize,
    plan: &BlockPlan,
    idx: usize,
) -> Vec<f64> {
    let (start_t, len) = plan.keep_range(idx);
    let n = plan.n;
    let base = if idx == 0 { 0 } else { 2 };
    let mut out = vec![0.0; len];
    for (j, g) in guarded.digits.iter().enumerate() {
        for (q, &d) in g.iter().take(m).enumerate() {
            let steady = j + 1 >= n;
            let leading = idx == 0 && q == 0 && j + 2 <= n;
            if !(steady || leading) {
                continue;
            }
            let t = base + q * stride + j;
            if t >= start_t && t < start_t + len {
                out[t - start_t] = d as f64;
            }
        }
    }
    out
}
