//! Closed-form operation counts per block, for comparing layouts without
//! running them.
//!
//! Counts assume the minimum block geometry (a budget of `2n` new samples
//! per block for a kernel of `n` taps) and cover the whole pipeline:
//! packing, the convolution itself, and unpacking. Time-domain costs are
//! quadratic in `n`; frequency-domain costs follow the usual
//! `size * log2(size)` transform law on the packed operand length.

use crate::packing::PackingMode;

/// Which arithmetic the backend performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Time,
    Frequency,
}

impl Domain {
    pub fn name(&self) -> &'static str {
        match self {
            Domain::Time => "time",
            Domain::Frequency => "freq",
        }
    }
}

/// Floating-point operations per block for a kernel of `n` taps at the
/// minimum block geometry.
pub fn flop_count(mode: PackingMode, domain: Domain, n: usize) -> f64 {
    let nf = n as f64;
    match (mode, domain) {
        (PackingMode::Full, Domain::Time) => 4.0 * nf * nf,
        (PackingMode::Full, Domain::Frequency) => {
            (45.0 * nf + 15.0) * (3.0 * nf + 1.0).log2() + 3.0 * nf + 1.0
        }
        (PackingMode::Symmetric, Domain::Time) => nf * nf + nf,
        (PackingMode::Symmetric, Domain::Frequency) => {
            (22.5 * nf + 7.5) * (3.0 * nf + 1.0).log2() + 5.0 * nf + 1.0
        }
        (PackingMode::Asymmetric(2), Domain::Time) => 2.5 * nf * nf - nf,
        (PackingMode::Asymmetric(2), Domain::Frequency) => {
            (30.0 * nf + 15.0) * (2.0 * nf + 1.0).log2() + 19.5 * nf + 6.5
        }
        (PackingMode::Asymmetric(_), Domain::Time) => 2.0 * nf * nf - 2.0 * nf / 3.0,
        (PackingMode::Asymmetric(_), Domain::Frequency) => {
            (25.0 * nf + 15.0) * (5.0 * nf / 3.0 + 1.0).log2() + 62.0 * nf / 3.0 + 7.0
        }
    }
}
