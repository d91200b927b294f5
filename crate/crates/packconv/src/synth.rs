//! Seeded synthetic sources for benchmarks, calibration experiments, and
//! tests. All generators are deterministic for a given seed, across
//! platforms.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Uniform samples on `[-amplitude, amplitude)`.
pub fn uniform(len: usize, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| rng.gen_range(-amplitude..amplitude))
        .collect()
}

/// Zero-mean Gaussian samples via the Box-Muller transform.
pub fn gaussian(len: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        out.push(sigma * r * theta.cos());
        if out.len() < len {
            out.push(sigma * r * theta.sin());
        }
    }
    out
}

/// Zero-mean Laplacian samples with scale `b` (deviation `b * sqrt(2)`),
/// by inverse-CDF sampling.
pub fn laplacian(len: usize, b: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let u: f64 = rng.gen_range(-0.5..0.5);
            -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
        })
        .collect()
}

/// Weibull(lambda, kappa) samples by inverse-CDF sampling.
pub fn weibull(len: usize, lambda: f64, kappa: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let u: f64 = rng.gen_range(0.0..1.0);
            lambda * (-(1.0 - u).ln()).powf(1.0 / kappa)
        })
        .collect()
}

/// First-order autoregressive source `x[t] = phi * x[t-1] + w[t]` with
/// Laplacian innovations of scale `innovation_b`. `|phi| < 1` keeps it
/// stationary.
pub fn ar1(len: usize, phi: f64, innovation_b: f64, seed: u64) -> Vec<f64> {
    let noise = laplacian(len, innovation_b, seed);
    let mut out = Vec::with_capacity(len);
    let mut prev = 0.0;
    for w in noise {
        let x = phi * prev + w;
        out.push(x);
        prev = x;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(uniform(16, 1.0, 7), uniform(16, 1.0, 7));
        assert_eq!(laplacian(16, 1.0, 7), laplacian(16, 1.0, 7));
        assert_eq!(ar1(16, 0.9, 1.0, 7), ar1(16, 0.9, 1.0, 7));
        assert_ne!(uniform(16, 1.0, 7), uniform(16, 1.0, 8));
    }

    #[test]
    fn uniform_respects_amplitude() {
        let xs = uniform(10_000, 128.0, 1);
        assert!(xs.iter().all(|x| (-128.0..128.0).contains(x)));
        // Unbiased enough for statistics work.
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 3.0);
    }

    #[test]
    fn gaussian_moments() {
        let xs = gaussian(100_000, 2.0, 3);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.05);
        assert!((var.sqrt() - 2.0).abs() < 0.05);
    }

    #[test]
    fn laplacian_variance_matches_scale() {
        let xs = laplacian(100_000, 0.5, 9);
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        // Var = 2 b^2.
        assert!((var - 0.5).abs() < 0.02);
    }

    #[test]
    fn ar1_is_correlated() {
        let xs = ar1(100_000, 0.95, 1.0, 11);
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        let lag1 = xs.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (xs.len() - 1) as f64;
        assert!(lag1 / var > 0.9);
    }
}
