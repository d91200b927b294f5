//! Convolution backends and precision validation.
//!
//! The packing layers are backend-agnostic: anything that computes a full
//! linear convolution can sit underneath. What differs is arithmetic
//! fidelity — the time-domain backend keeps integer-valued inputs exact up
//! to 2^53, while an FFT backend spreads rounding noise over every output.
//! Packed streams are only decodable when that noise stays below half the
//! systematic guard, so [`validate_backend`] measures it empirically for a
//! given kernel length and companding range before a backend is trusted.

use std::sync::Arc;
use std::sync::Mutex;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::packing::packing_coefficient;
use crate::unpack::U_SYS_DEFAULT;

/// Identifies a backend implementation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Direct,
    Fft,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Direct => "direct",
            Algorithm::Fft => "fft",
        }
    }
}

/// A full linear convolution engine.
///
/// Implementations must be deterministic (same inputs, same outputs) and
/// shareable across worker threads.
pub trait ConvBackend: Send + Sync {
    fn algorithm(&self) -> Algorithm;

    /// Magnitude below which integer-valued results are computed exactly,
    /// assuming integer-valued inputs whose partial sums also stay below
    /// the limit. Zero when no such guarantee exists.
    fn exact_integer_limit(&self) -> f64;

    /// Full linear convolution: output length `signal.len() + kernel.len()
    /// - 1`.
    fn convolve(&self, signal: &[f64], kernel: &[f64]) -> Vec<f64>;
}

/// Time-domain convolution.
///
/// Accumulates tap-by-tap in ascending tap order, so products of
/// integer-valued inputs sum exactly while every partial sum stays below
/// 2^53.
#[derive(Debug, Default)]
pub struct DirectBackend;

impl DirectBackend {
    pub fn new() -> Self {
        DirectBackend
    }
}

impl ConvBackend for DirectBackend {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Direct
    }

    fn exact_integer_limit(&self) -> f64 {
        9_007_199_254_740_992.0 // 2^53
    }

    fn convolve(&self, signal: &[f64], kernel: &[f64]) -> Vec<f64> {
        if signal.is_empty() || kernel.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0.0; signal.len() + kernel.len() - 1];
        for (n, &kv) in kernel.iter().enumerate() {
            if kv == 0.0 {
                continue;
            }
            let dst = &mut out[n..n + signal.len()];
            for (d, &sv) in dst.iter_mut().zip(signal) {
                *d += kv * sv;
            }
        }
        out
    }
}

/// Frequency-domain convolution over complex f64, sized to the next
/// 5-smooth length at or above the linear output length.
pub struct FftBackend {
    planner: Mutex<FftPlanner<f64>>,
}

impl FftBackend {
    pub fn new() -> Self {
        FftBackend {
            planner: Mutex::new(FftPlanner::new()),
        }
    }

    fn plans(&self, size: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
        let mut planner = self.planner.lock().expect("fft planner lock poisoned");
        (
            planner.plan_fft_forward(size),
            planner.plan_fft_inverse(size),
        )
    }
}

impl Default for FftBackend {
    fn default() -> Self {
        Self::new()
    }
}

/// Smallest integer at or above `n` whose prime factors are all in
/// {2, 3, 5}.
pub(crate) fn next_fast_len(n: usize) -> usize {
    if n <= 1 {
        return 1;
    }
    let mut candidate = n;
    loop {
        let mut m = candidate;
        while m % 2 == 0 {
            m /= 2;
        }
        while m % 3 == 0 {
            m /= 3;
        }
        while m % 5 == 0 {
            m /= 5;
        }
        if m == 1 {
            return candidate;
        }
        candidate += 1;
    }
}

impl ConvBackend for FftBackend {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Fft
    }

    fn exact_integer_limit(&self) -> f64 {
        0.0
    }

    fn convolve(&self, signal: &[f64], kernel: &[f64]) -> Vec<f64> {
        if signal.is_empty() || kernel.is_empty() {
            return Vec::new();
        }
        let out_len = signal.len() + kernel.len() - 1;
        let size = next_fast_len(out_len);
        let (forward, inverse) = self.plans(size);

        let mut a: Vec<Complex<f64>> = signal
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(size)
            .collect();
        let mut b: Vec<Complex<f64>> = kernel
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(size)
            .collect();
        forward.process(&mut a);
        forward.process(&mut b);
        let scale = 1.0 / size as f64;
        for (av, bv) in a.iter_mut().zip(&b) {
            *av *= bv * scale;
        }
        inverse.process(&mut a);
        a.truncate(out_len);
        a.into_iter().map(|c| c.re).collect()
    }
}

/// Which backend the pipeline should build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Direct,
    Fft,
}

impl BackendKind {
    pub fn build(&self) -> Box<dyn ConvBackend> {
        match self {
            BackendKind::Direct => Box::new(DirectBackend::new()),
            BackendKind::Fft => Box::new(FftBackend::new()),
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(BackendKind::Direct),
            "fft" => Ok(BackendKind::Fft),
            other => Err(Error::Config(format!(
                "unknown backend '{other}' (expected direct or fft)"
            ))),
        }
    }
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendKind::Direct => write!(f, "direct"),
            BackendKind::Fft => write!(f, "fft"),
        }
    }
}

/// Convolves one block through the given backend.
pub fn convolve_block(backend: &dyn ConvBackend, signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    debug_assert!(!kernel.is_empty());
    debug_assert!(signal.len() >= kernel.len());
    backend.convolve(signal, kernel)
}

/// Outcome of a backend precision check.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub backend: &'static str,
    pub n: usize,
    pub r_max: u64,
    pub trials: usize,
    /// Largest deviation from the time-domain reference across all trials
    /// and outputs.
    pub max_abs_error: f64,
    /// Pass threshold: half the systematic guard.
    pub threshold: f64,
    pub passed: bool,
}

impl ValidationReport {
    /// Converts a failed report into the corresponding error.
    pub fn into_result(self) -> Result<ValidationReport> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::BackendPrecisionFailure {
                backend: self.backend,
                max_abs_error: self.max_abs_error,
                threshold: self.threshold,
            })
        }
    }
}

/// Default number of randomized trials for [`validate_backend`].
pub const VALIDATION_TRIALS: usize = 100;

/// Measures a backend's worst-case deviation from the time-domain
/// reference on packed operands representative of kernel length `n` and
/// companding range `r_max`, at the default guard and trial count.
pub fn validate_backend(backend: &dyn ConvBackend, n: usize, r_max: u64) -> ValidationReport {
    validate_backend_with(backend, n, r_max, VALIDATION_TRIALS, U_SYS_DEFAULT, 0x7061636b)
}

/// [`validate_backend`] with explicit trial count, guard, and RNG seed.
///
/// Operands are drawn uniformly at the largest tied quantization the range
/// admits, packed in the symmetric layout (the densest one), and convolved
/// by both the backend under test and the time-domain reference. The check
/// passes when the largest deviation stays below `0.5 * u_sys`, the
/// tolerance unpacking can absorb.
pub fn validate_backend_with(
    backend: &dyn ConvBackend,
    n: usize,
    r_max: u64,
    trials: usize,
    u_sys: f64,
    seed: u64,
) -> ValidationReport {
    let n = if n % 2 == 0 { n + 1 } else { n.max(1) };
    let q = ((r_max as f64 / n as f64).sqrt().floor() as i64).max(1);
    let eps = packing_coefficient(r_max);
    let eps_inv = 2.0 * r_max as f64;
    let w_block = 3 * n + 1;
    let reference = DirectBackend::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_abs_error = 0.0_f64;

    for _ in 0..trials.max(1) {
        let mut signal = Vec::with_capacity(w_block.div_ceil(2));
        for _ in 0..w_block.div_ceil(2) {
            let hi = rng.gen_range(-q..=q) as f64;
            let lo = rng.gen_range(-q..=q) as f64;
            signal.push(hi + eps * lo);
        }
        let mut kernel = Vec::with_capacity(n.div_ceil(2));
        for i in 0..n.div_ceil(2) {
            let even = rng.gen_range(-q..=q) as f64;
            let odd = if 2 * i + 1 < n {
                rng.gen_range(-q..=q) as f64
            } else {
                0.0
            };
            kernel.push(odd + eps_inv * even);
        }
        let want = reference.convolve(&signal, &kernel);
        let got = backend.convolve(&signal, &kernel);
        for (w, g) in want.iter().zip(&got) {
            max_abs_error = max_abs_error.max((w - g).abs());
        }
    }

    let threshold = 0.5 * u_sys;
    ValidationReport {
        backend: backend.algorithm().name(),
        n,
        r_max,
        trials: trials.max(1),
        max_abs_error,
        threshold,
        passed: max_abs_error <= threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv_i128(s: &[i64], k: &[i64]) -> Vec<i128> {
        let mut out = vec![0i128; s.len() + k.len() - 1];
        for (i, &kv) in k.iter().enumerate() {
            for (j, &sv) in s.iter().enumerate() {
                out[i + j] += kv as i128 * sv as i128;
            }
        }
        out
    }

    #[test]
    fn direct_matches_integer_convolution() {
        let s = vec![2, -1, 3, 0, 1, 2, -2, 1];
        let k = vec![1, -2, 1];
        let sf: Vec<f64> = s.iter().map(|&x| x as f64).collect();
        let kf: Vec<f64> = k.iter().map(|&x| x as f64).collect();
        let got = DirectBackend::new().convolve(&sf, &kf);
        let want = conv_i128(&s, &k);
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(*g, *w as f64);
        }
    }

    #[test]
    fn impulse_kernel_is_identity() {
        let s = vec![0.5, -1.25, 3.75];
        let got = DirectBackend::new().convolve(&s, &[1.0]);
        assert_eq!(got, s);
    }

    #[test]
    fn fft_agrees_with_direct_on_small_integers() {
        let s: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let k: Vec<f64> = (0..7).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let d = DirectBackend::new().convolve(&s, &k);
        let f = FftBackend::new().convolve(&s, &k);
        assert_eq!(d.len(), f.len());
        for (a, b) in d.iter().zip(&f) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(next_fast_len(1), 1);
        assert_eq!(next_fast_len(7), 8);
        assert_eq!(next_fast_len(31), 32);
        assert_eq!(next_fast_len(97), 100);
        assert_eq!(next_fast_len(240), 240);
        assert_eq!(next_fast_len(241), 243);
    }

    #[test]
    fn direct_backend_validates_exactly() {
        let backend = DirectBackend::new();
        let report = validate_backend(&backend, 9, 81);
        assert!(report.passed);
        assert_eq!(report.max_abs_error, 0.0);
        assert_eq!(report.backend, "direct");
        assert!(report.clone().into_result().is_ok());
    }

    #[test]
    fn failed_validation_converts_to_error() {
        let report = ValidationReport {
            backend: "fft",
            n: 801,
            r_max: 51_200,
            trials: 100,
            max_abs_error: 1.0,
            threshold: 1.5e-11,
            passed: false,
        };
        assert!(matches!(
            report.into_result(),
            Err(Error::BackendPrecisionFailure { backend: "fft", .. })
        ));
    }

    #[test]
    fn backend_kind_parses() {
        assert_eq!("direct".parse::<BackendKind>().unwrap(), BackendKind::Direct);
        assert_eq!("fft".parse::<BackendKind>().unwrap(), BackendKind::Fft);
        assert!("dft".parse::<BackendKind>().is_err());
    }
}
