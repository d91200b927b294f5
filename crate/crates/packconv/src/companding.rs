//! Companding: reversible scaling of real-valued signals onto a small
//! integer grid.
//!
//! Each operand is scaled by `c = Q / max|x|` so that its largest sample
//! lands exactly on the chosen quantization level `Q`, then rounded to the
//! nearest integer (ties away from zero). The scale factor is retained so
//! the convolution result can be mapped back to the original amplitude
//! range by dividing by the product of the two factors. Smaller `Q` means
//! coarser quantization and therefore more packing headroom; the error it
//! introduces is modelled in [`crate::precision`].

use crate::error::{Error, Result};

/// Quantization levels for the two operands of a convolution.
///
/// Each side is companded independently: the signal onto `[-s_q, s_q]`,
/// the kernel onto `[-k_q, k_q]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompandingSpec {
    pub s_q: u32,
    pub k_q: u32,
}

impl CompandingSpec {
    /// Builds a spec, rejecting zero levels.
    pub fn new(s_q: u32, k_q: u32) -> Result<Self> {
        if s_q == 0 || k_q == 0 {
            return Err(Error::Config(
                "quantization levels must be at least 1".to_string(),
            ));
        }
        Ok(CompandingSpec { s_q, k_q })
    }
}

/// A companded signal: integer samples plus the scale needed to undo them.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedSignal {
    /// Integer samples, each in `[-q, q]` for the `q` used to compand.
    pub samples: Vec<i64>,
    /// Scale factor that was applied before rounding (`1.0` for an
    /// all-zero input).
    pub c: f64,
    /// Peak magnitude of the original input.
    pub peak: f64,
}

impl QuantizedSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Marginal statistics of a signal, used by the SNR model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalStats {
    /// Standard deviation (square root of the second central moment).
    pub sigma: f64,
    /// Peak magnitude.
    pub peak: f64,
}

/// Scales `block` so the largest magnitude maps to `q`, then rounds every
/// sample to the nearest integer (ties away from zero).
///
/// An all-zero block gets scale factor `1.0` and all-zero samples, so the
/// round trip stays exact.
///
/// # Example
///
/// ```
/// use packconv::companding::compand;
///
/// let q = compand(&[0.3, -0.3, 0.15], 8);
/// assert!((q.c - 8.0 / 0.3).abs() < 1e-12);
/// assert_eq!(q.samples, vec![8, -8, 4]);
/// ```
pub fn compand(block: &[f64], q: u32) -> QuantizedSignal {
    let peak = block.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()));
    let c = if peak > 0.0 { q as f64 / peak } else { 1.0 };
    let samples = block.iter().map(|&x| (c * x).round() as i64).collect();
    QuantizedSignal { samples, c, peak }
}

/// Undoes the companding of both convolution operands on a result block:
/// every sample is divided by `c_s * c_k`.
pub fn inverse_compand(result: &mut [f64], c_s: f64, c_k: f64) {
    let inv = 1.0 / (c_s * c_k);
    for x in result.iter_mut() {
        *x *= inv;
    }
}

/// Computes the standard deviation and peak magnitude of `signal`.
///
/// Errors with [`Error::DegenerateSignal`] on an empty input.
pub fn estimate_stats(signal: &[f64]) -> Result<MarginalStats> {
    if signal.is_empty() {
        return Err(Error::DegenerateSignal);
    }
    let n = signal.len() as f64;
    let mean = signal.iter().sum::<f64>() / n;
    let var = signal.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let peak = signal.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()));
    Ok(MarginalStats {
        sigma: var.sqrt(),
        peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_peak_onto_quantization_level() {
        let q = compand(&[1.0, -0.5, 0.25], 4);
        assert_eq!(q.c, 4.0);
        assert_eq!(q.samples, vec![4, -2, 1]);
        assert_eq!(q.peak, 1.0);
    }

    #[test]
    fn all_zero_block_keeps_unit_scale() {
        let q = compand(&[0.0, 0.0, 0.0], 16);
        assert_eq!(q.c, 1.0);
        assert_eq!(q.samples, vec![0, 0, 0]);
        assert_eq!(q.peak, 0.0);
    }

    #[test]
    fn fractional_peak_example() {
        let q = compand(&[0.3, -0.3, 0.15], 8);
        assert!((q.c - 26.666666666666668).abs() < 1e-12);
        assert_eq!(q.samples, vec![8, -8, 4]);
    }

    #[test]
    fn rounds_ties_away_from_zero() {
        // Peak 4 with q=4 gives c=1, so the samples quantize directly.
        let q = compand(&[4.0, 2.5, -2.5, 0.5, -0.5], 4);
        assert_eq!(q.samples, vec![4, 3, -3, 1, -1]);
    }

    #[test]
    fn quantization_error_is_at_most_half_step() {
        let block: Vec<f64> = (0..1000)
            .map(|i| ((i * 2654435761_u64 as usize) % 997) as f64 / 997.0 - 0.5)
            .collect();
        let q = compand(&block, 16);
        for (&x, &s) in block.iter().zip(&q.samples) {
            assert!((q.c * x - s as f64).abs() <= 0.5 + 1e-12);
            assert!(s.unsigned_abs() <= 16);
        }
    }

    #[test]
    fn inverse_compand_restores_scale() {
        let mut r = vec![8.0, -4.0, 2.0];
        inverse_compand(&mut r, 2.0, 4.0);
        assert_eq!(r, vec![1.0, -0.5, 0.25]);
    }

    #[test]
    fn stats_of_alternating_signal() {
        let s = estimate_stats(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(s.sigma, 1.0);
        assert_eq!(s.peak, 1.0);
        assert!(estimate_stats(&[]).is_err());
    }

    #[test]
    fn spec_rejects_zero_levels() {
        assert!(CompandingSpec::new(0, 8).is_err());
        assert!(CompandingSpec::new(8, 0).is_err());
        assert!(CompandingSpec::new(1, 1).is_ok());
    }
}
