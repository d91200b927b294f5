//! Shared helpers for the integration suites: a wide-integer convolution
//! oracle and a harness that drives the packed pipeline on integer
//! operands so its output can be compared against the oracle bit for bit.

use packconv::{BackendKind, ConvOutput, EngineConfig, PackingMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force linear convolution in 128-bit arithmetic. No packing, no
/// floating point: the ground truth everything else is measured against.
pub fn integer_conv(signal: &[i64], kernel: &[i64]) -> Vec<i128> {
    if signal.is_empty() || kernel.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0i128; signal.len() + kernel.len() - 1];
    for (i, &s) in signal.iter().enumerate() {
        for (j, &k) in kernel.iter().enumerate() {
            out[i + j] += s as i128 * k as i128;
        }
    }
    out
}

/// Runs the packed pipeline on integer-valued operands with the
/// quantization levels pinned to the operand peaks, so companding is the
/// identity and the output should be bit-exactly the integer convolution.
///
/// `block_w` of `None` uses the planner default (several blocks for long
/// inputs); the caller must then guarantee every block window attains the
/// signal peak. Passing the signal length (or more) forces a single block,
/// where the pin alone is enough.
pub fn exact_pipeline(
    signal: &[i64],
    kernel: &[i64],
    mode: PackingMode,
    backend: BackendKind,
    block_w: Option<usize>,
    u_sys: f64,
) -> packconv::Result<ConvOutput> {
    let s: Vec<f64> = signal.iter().map(|&v| v as f64).collect();
    let k: Vec<f64> = kernel.iter().map(|&v| v as f64).collect();
    let cfg = EngineConfig {
        mode,
        s_q: peak(signal),
        k_q: peak(kernel),
        backend,
        u_sys,
        block_w,
        ..EngineConfig::default()
    };
    packconv::convolve(&s, &k, &cfg)
}

/// Largest magnitude, clamped to at least 1 so all-zero operands stay
/// legal as a quantization level.
pub fn peak(values: &[i64]) -> u32 {
    values
        .iter()
        .map(|v| v.unsigned_abs())
        .max()
        .unwrap_or(0)
        .max(1) as u32
}

/// Random integer vector in `[-limit, limit]` with the first sample
/// pinned to `limit`, so the quantization level equals the peak exactly.
pub fn saturated_vector(len: usize, limit: i64, rng: &mut ChaCha8Rng) -> Vec<i64> {
    assert!(len > 0 && limit > 0);
    let mut out: Vec<i64> = (0..len).map(|_| rng.gen_range(-limit..=limit)).collect();
    out[0] = if rng.gen() { limit } else { -limit };
    out
}

/// Compares the pipeline output against the oracle bit for bit.
pub fn assert_matches_oracle(out: &[f64], signal: &[i64], kernel: &[i64], label: &str) {
    let oracle = integer_conv(signal, kernel);
    assert_eq!(out.len(), oracle.len(), "{label}: length");
    for (t, (&got, &want)) in out.iter().zip(oracle.iter()).enumerate() {
        assert_eq!(
            got, want as f64,
            "{label}: output {t} of {} (signal len {}, kernel len {})",
            oracle.len(),
            signal.len(),
            kernel.len()
        );
    }
}

/// Seeded RNG for deterministic randomized suites.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Naive single-shot floating-point convolution, the full-precision
/// reference for overlap-save and fidelity comparisons.
pub fn float_conv(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    if signal.is_empty() || kernel.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0f64; signal.len() + kernel.len() - 1];
    for (i, &s) in signal.iter().enumerate() {
        for (j, &k) in kernel.iter().enumerate() {
            out[i + j] += s * k;
        }
    }
    out
}
