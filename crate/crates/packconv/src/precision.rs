//! Analytic fidelity model and mode selection.
//!
//! Companding both operands adds independent, roughly uniform quantization
//! noise to each. Treating signal and kernel as wide-sense stationary with
//! known deviations and peaks, the convolution's noise power grows with
//! the same kernel-length factor as the signal power, so the predicted
//! SNR depends only on the marginal statistics and the two quantization
//! levels — not on the kernel length. A single measured operating point
//! can be folded back in as an additive calibration offset to absorb
//! whatever the stationarity assumptions miss.

use statrs::function::gamma::ln_gamma;

use crate::companding::MarginalStats;
use crate::error::{Error, Result};
use crate::packing::{companding_range, PackingMode};

/// Marginal statistics of both operands plus an optional calibration
/// offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrModel {
    pub sigma_s: f64,
    pub sigma_k: f64,
    pub peak_s: f64,
    pub peak_k: f64,
    /// Kernel length (after odd-padding).
    pub n: usize,
    /// Additive correction in dB, from [`SnrModel::calibrated`].
    pub calibration_offset_db: f64,
}

/// A resolved per-block operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDecision {
    pub mode: PackingMode,
    /// Quantization levels (zero when no packing is involved).
    pub s_q: u32,
    pub k_q: u32,
    /// Model prediction for the chosen point; infinite for
    /// [`PackingMode::Full`].
    pub predicted_snr_db: f64,
}

impl SnrModel {
    pub fn new(signal: MarginalStats, kernel: MarginalStats, n: usize) -> Self {
        SnrModel {
            sigma_s: signal.sigma,
            sigma_k: kernel.sigma,
            peak_s: signal.peak,
            peak_k: kernel.peak,
            n,
            calibration_offset_db: 0.0,
        }
    }

    /// Per-output quantization noise power for levels `(s_q, k_q)`: the
    /// three cross terms of (signal + its quantization noise) convolved
    /// with (kernel + its quantization noise), each uniform noise having
    /// deviation `peak / (q * sqrt(12))`.
    pub fn noise_power(&self, s_q: u32, k_q: u32) -> f64 {
        let sigma_vs = self.peak_s / (s_q as f64 * 12f64.sqrt());
        let sigma_vk = self.peak_k / (k_q as f64 * 12f64.sqrt());
        self.n as f64
            * ((self.sigma_s * sigma_vk).powi(2)
                + (self.sigma_k * sigma_vs).powi(2)
                + (sigma_vk * sigma_vs).powi(2))
    }

    /// Predicted output SNR in dB at levels `(s_q, k_q)`, including the
    /// calibration offset.
    pub fn predicted_snr_db(&self, s_q: u32, k_q: u32) -> Result<f64> {
        if self.sigma_s == 0.0 || self.sigma_k == 0.0 {
            return Err(Error::DegenerateSignal);
        }
        if s_q == 0 || k_q == 0 {
            return Err(Error::Config(
                "quantization levels must be at least 1".to_string(),
            ));
        }
        let signal_power = self.n as f64 * (self.sigma_s * self.sigma_k).powi(2);
        Ok(10.0 * (signal_power / self.noise_power(s_q, k_q)).log10()
            + self.calibration_offset_db)
    }

    /// Returns a copy carrying the offset that makes the model agree with
    /// one measured point: `measured - predicted(at_s_q, at_k_q)`.
    pub fn calibrated(&self, measured_db: f64, at_s_q: u32, at_k_q: u32) -> Result<SnrModel> {
        let mut base = *self;
        base.calibration_offset_db = 0.0;
        let predicted = base.predicted_snr_db(at_s_q, at_k_q)?;
        base.calibration_offset_db = measured_db - predicted;
        Ok(base)
    }
}

/// Picks the cheapest candidate mode that still meets `floor_db`,
/// maximizing tied quantization levels under the mode's range limit.
/// Falls back to full precision (infinite predicted SNR) when no
/// candidate qualifies.
///
/// Candidates are tried in the order given, so list them cheapest first.
pub fn select_mode(model: &SnrModel, floor_db: f64, candidates: &[PackingMode]) -> ModeDecision {
    for &mode in candidates {
        let Some(limit) = mode.bound_limit() else {
            // An unbounded candidate always qualifies.
            return ModeDecision {
                mode,
                s_q: 0,
                k_q: 0,
                predicted_snr_db: f64::INFINITY,
            };
        };
        let q_sq = limit / model.n.max(1) as u64;
        let q = (q_sq as f64).sqrt().floor() as u64;
        if q == 0 {
            continue; // Even unit levels would overflow the range.
        }
        // Floor-of-sqrt can still overshoot the limit by a hair; trim.
        let mut q = q as u32;
        while q > 1 && companding_range(model.n, q, q) > limit {
            q -= 1;
        }
        match model.predicted_snr_db(q, q) {
            Ok(snr) if snr >= floor_db => {
                return ModeDecision {
                    mode,
                    s_q: q,
                    k_q: q,
                    predicted_snr_db: snr,
                };
            }
            Err(Error::DegenerateSignal) => {
                // No signal energy: any mode reproduces silence exactly.
                return ModeDecision {
                    mode,
                    s_q: q,
                    k_q: q,
                    predicted_snr_db: f64::INFINITY,
                };
            }
            _ => {}
        }
    }
    ModeDecision {
        mode: PackingMode::Full,
        s_q: 0,
        k_q: 0,
        predicted_snr_db: f64::INFINITY,
    }
}

/// Measured SNR of `approx` against `reference`, in dB. Infinite when the
/// two agree exactly; errors when the reference carries no energy or the
/// lengths differ.
pub fn measured_snr_db(reference: &[f64], approx: &[f64]) -> Result<f64> {
    if reference.len() != approx.len() {
        return Err(Error::Config(format!(
            "length mismatch: reference {} vs approximation {}",
            reference.len(),
            approx.len()
        )));
    }
    let mut signal = 0.0;
    let mut noise = 0.0;
    for (&r, &a) in reference.iter().zip(approx) {
        signal += r * r;
        let d = r - a;
        noise += d * d;
    }
    if signal == 0.0 {
        return Err(Error::DegenerateSignal);
    }
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / noise).log10())
}

/// Fits a two-parameter Weibull distribution to the magnitudes of
/// `samples` by matching the first two moments. Returns `(lambda, kappa)`
/// (scale, shape).
///
/// The moment ratio `E[X^2] / E[X]^2 = Gamma(1 + 2/k) / Gamma(1 + 1/k)^2`
/// decreases monotonically in the shape, so the shape is recovered by
/// bisection and the scale follows from the mean.
pub fn fit_weibull_moments(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::DegenerateSignal);
    }
    let n = samples.len() as f64;
    let m1 = samples.iter().map(|x| x.abs()).sum::<f64>() / n;
    let m2 = samples.iter().map(|x| x * x).sum::<f64>() / n;
    if m1 == 0.0 {
        return Err(Error::DegenerateSignal);
    }
    let ratio = m2 / (m1 * m1);
    if ratio <= 1.0 + 1e-12 {
        // Constant magnitudes: the shape diverges.
        return Err(Error::DegenerateSignal);
    }
    let log_ratio_of = |kappa: f64| {
        ln_gamma(1.0 + 2.0 / kappa) - 2.0 * ln_gamma(1.0 + 1.0 / kappa)
    };
    let target = ratio.ln();
    let (mut lo, mut hi) = (0.02_f64, 200.0_f64);
    // log_ratio_of is decreasing: large at lo, ~0 at hi.
    if log_ratio_of(lo) < target {
        return Err(Error::Config(
            "moment ratio outside the representable shape range".to_string(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_ratio_of(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let kappa = 0.5 * (lo + hi);
    let lambda = m1 / (ln_gamma(1.0 + 1.0 / kappa)).exp();
    Ok((lambda, kappa))
}

/// Second moment of a Weibull(lambda, kappa) variable — its square root
/// can serve as the `sigma` of a zero-mean source with that magnitude
/// distribution.
pub fn weibull_second_moment(lambda: f64, kappa: f64) -> f64 {
    lambda * lambda * (ln_gamma(1.0 + 2.0 / kappa)).exp()
}

/// Fits a zero-mean Laplacian by moments and returns its scale `b`
/// (`sigma = b * sqrt(2)`).
pub fn fit_laplacian_moments(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::DegenerateSignal);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(Error::DegenerateSignal);
    }
    Ok((var / 2.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn uniform_model(n: usize) -> SnrModel {
        // Uniform on [-128, 128]: sigma = 256 / sqrt(12), peak = 128.
        let sigma = 256.0 / 12f64.sqrt();
        SnrModel {
            sigma_s: sigma,
            sigma_k: sigma,
            peak_s: 128.0,
            peak_k: 128.0,
            n,
            calibration_offset_db: 0.0,
        }
    }

    #[test]
    fn uniform_anchor_points() {
        let model = uniform_model(801);
        let at16 = model.predicted_snr_db(16, 16).unwrap();
        assert!((at16 - 27.0906).abs() < 0.01, "got {at16}");
        let at256 = model.predicted_snr_db(256, 256).unwrap();
        assert!((at256 - 51.1752).abs() < 0.01, "got {at256}");
        // The prediction does not depend on the kernel length.
        let other = uniform_model(93).predicted_snr_db(16, 16).unwrap();
        assert!((at16 - other).abs() < 1e-9);
    }

    #[test]
    fn noise_power_components() {
        // At s_q = k_q = 16, peak 128: sigma_v = 8 / sqrt(12) each side.
        let model = uniform_model(1);
        let d = model.noise_power(16, 16);
        let sigma = 256.0 / 12f64.sqrt();
        let sv = 8.0 / 12f64.sqrt();
        let want = (sigma * sv).powi(2) * 2.0 + sv.powi(4);
        assert!((d - want).abs() < 1e-9);
    }

    #[test]
    fn snr_is_monotone_in_levels() {
        let model = uniform_model(801);
        let mut last = f64::NEG_INFINITY;
        for q in [2, 4, 8, 16, 32, 64, 128, 256] {
            let snr = model.predicted_snr_db(q, q).unwrap();
            assert!(snr > last);
            last = snr;
        }
    }

    #[test]
    fn degenerate_stats_are_rejected() {
        let mut model = uniform_model(10);
        model.sigma_s = 0.0;
        assert!(matches!(
            model.predicted_snr_db(16, 16),
            Err(Error::DegenerateSignal)
        ));
    }

    #[test]
    fn calibration_shifts_predictions() {
        let model = uniform_model(801);
        let raw = model.predicted_snr_db(8, 8).unwrap();
        let cal = model.calibrated(raw + 1.5, 8, 8).unwrap();
        assert!((cal.calibration_offset_db - 1.5).abs() < 1e-9);
        let shifted = cal.predicted_snr_db(16, 16).unwrap();
        let base = model.predicted_snr_db(16, 16).unwrap();
        assert!((shifted - base - 1.5).abs() < 1e-9);
    }

    #[test]
    fn mode_selection_walks_the_candidate_ladder() {
        let model = uniform_model(801);
        let candidates = [PackingMode::Symmetric, PackingMode::Asymmetric(2)];
        // Low floor: symmetric wins with the largest tied levels that fit,
        // floor(sqrt(97667 / 801)) = 11.
        let d = select_mode(&model, 20.0, &candidates);
        assert_eq!(d.mode, PackingMode::Symmetric);
        assert_eq!((d.s_q, d.k_q), (11, 11));
        // Mid floor: symmetric's best point falls short, the two-digit
        // asymmetric layout with floor(sqrt(43165096 / 801)) = 232 takes
        // over.
        let d = select_mode(&model, 40.0, &candidates);
        assert_eq!(d.mode, PackingMode::Asymmetric(2));
        assert_eq!((d.s_q, d.k_q), (232, 232));
        assert!(d.predicted_snr_db >= 40.0);
        // Unreachable floor: full precision.
        let d = select_mode(&model, 80.0, &candidates);
        assert_eq!(d.mode, PackingMode::Full);
        assert!(d.predicted_snr_db.is_infinite());
    }

    #[test]
    fn selected_levels_respect_the_range_limit() {
        for n in [1, 2, 3, 17, 801, 4001, 97_668, 200_000] {
            let model = uniform_model(n);
            let d = select_mode(&model, -100.0, &[PackingMode::Symmetric]);
            if d.mode == PackingMode::Symmetric {
                assert!(companding_range(n, d.s_q, d.k_q) <= 97_667, "n = {n}");
            } else {
                // Range can't fit even unit levels.
                assert!(n as u64 > 97_667);
            }
        }
    }

    #[test]
    fn measured_snr_basics() {
        let r = vec![1.0, -2.0, 3.0];
        assert!(measured_snr_db(&r, &r).unwrap().is_infinite());
        let a = vec![1.1, -2.0, 3.0];
        let snr = measured_snr_db(&r, &a).unwrap();
        assert!((snr - 10.0 * (14.0_f64 / 0.01).log10()).abs() < 1e-9);
        assert!(measured_snr_db(&r, &a[..2]).is_err());
        assert!(measured_snr_db(&[0.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn weibull_fit_recovers_parameters() {
        let draws = synth::weibull(200_000, 0.248, 1.191, 0xfeed);
        let (lambda, kappa) = fit_weibull_moments(&draws).unwrap();
        assert!((lambda - 0.248).abs() / 0.248 < 0.1, "lambda {lambda}");
        assert!((kappa - 1.191).abs() / 1.191 < 0.1, "kappa {kappa}");
        let m2 = weibull_second_moment(lambda, kappa);
        let emp = draws.iter().map(|x| x * x).sum::<f64>() / draws.len() as f64;
        assert!((m2 - emp).abs() / emp < 0.05);
    }

    #[test]
    fn laplacian_fit_recovers_scale() {
        let draws = synth::laplacian(200_000, 0.7, 0xbeef);
        let b = fit_laplacian_moments(&draws).unwrap();
        assert!((b - 0.7).abs() / 0.7 < 0.05, "b {b}");
    }

    #[test]
    fn constant_samples_cannot_be_fitted() {
        assert!(fit_weibull_moments(&[2.0; 100]).is_err());
        assert!(fit_laplacian_moments(&[2.0; 100]).is_err());
        assert!(fit_weibull_moments(&[]).is_err());
    }
}
