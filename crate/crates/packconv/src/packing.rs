//! Packing: folding several companded integers into each f64 so one
//! multiply-accumulate advances several outputs at once.
//!
//! A packed value is a fixed-point polynomial in the packing coefficient
//! `epsilon = 1 / (2 * r_max)`, where `r_max` bounds the magnitude of any
//! convolution output on the integer grid. Choosing the radix that way
//! keeps neighbouring digits from colliding, provided `r_max` stays below
//! a mode-specific limit ([`PackingMode::bound_limit`]).
//!
//! Two layouts are provided:
//!
//! * **Symmetric** — signal and kernel are both packed two-per-value; a
//!   single multiply then advances four partial products. Cheapest, but
//!   tightest on headroom.
//! * **Asymmetric** — only the signal is packed, `m` samples per value,
//!   each digit taken from a stride-separated segment of the block; the
//!   kernel stays unpacked. One multiply advances `m` outputs that lie a
//!   segment apart.

use std::fmt;
use std::str::FromStr;

use crate::companding::QuantizedSignal;
use crate::error::{Error, Result};

/// Largest companding range for which two-per-value packing (shared by the
/// symmetric layout and the three-per-value asymmetric layout) unpacks
/// without digit collisions.
pub const SYMMETRIC_BOUND: u64 = 97_667;
/// Largest companding range for the two-per-value asymmetric layout.
pub const ASYMMETRIC2_BOUND: u64 = 43_165_096;

/// How several integers share one f64.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PackingMode {
    /// No packing: plain floating-point convolution at full precision.
    Full,
    /// Both operands packed two-per-value.
    Symmetric,
    /// Signal packed `m`-per-value (`m` = 2 or 3), kernel unpacked.
    Asymmetric(u8),
}

impl PackingMode {
    /// Builds an asymmetric mode, rejecting unsupported digit counts.
    pub fn asymmetric(m: u8) -> Result<Self> {
        if m == 2 || m == 3 {
            Ok(PackingMode::Asymmetric(m))
        } else {
            Err(Error::Config(format!(
                "asymmetric packing supports 2 or 3 digits per value, not {m}"
            )))
        }
    }

    /// Number of companded samples carried per packed value.
    pub fn digits_per_value(&self) -> usize {
        match self {
            PackingMode::Full => 1,
            PackingMode::Symmetric => 2,
            PackingMode::Asymmetric(m) => *m as usize,
        }
    }

    /// Largest companding range the mode can unpack without collisions,
    /// or `None` when unbounded (no packing).
    pub fn bound_limit(&self) -> Option<u64> {
        match self {
            PackingMode::Full => None,
            PackingMode::Symmetric | PackingMode::Asymmetric(3) => Some(SYMMETRIC_BOUND),
            PackingMode::Asymmetric(_) => Some(ASYMMETRIC2_BOUND),
        }
    }
}

impl fmt::Display for PackingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PackingMode::Full => write!(f, "full"),
            PackingMode::Symmetric => write!(f, "sym"),
            PackingMode::Asymmetric(m) => write!(f, "asym{m}"),
        }
    }
}

impl FromStr for PackingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(PackingMode::Full),
            "sym" | "symmetric" => Ok(PackingMode::Symmetric),
            "asym2" => Ok(PackingMode::Asymmetric(2)),
            "asym3" => Ok(PackingMode::Asymmetric(3)),
            other => Err(Error::Config(format!(
                "unknown packing mode '{other}' (expected full, sym, asym2 or asym3)"
            ))),
        }
    }
}

/// Whether range violations abort the run or only get reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundPolicy {
    /// Violations are errors.
    Strict,
    /// Violations are recorded and the run proceeds; unpacking errors are
    /// then possible and are counted rather than corrected.
    Warn,
}

/// A recorded companding-range violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundViolation {
    pub mode: PackingMode,
    pub r_max: u64,
    pub limit: u64,
}

/// Worst-case magnitude of any convolution output on the integer grid:
/// `n * s_q * k_q` for a length-`n` kernel.
pub fn companding_range(n: usize, s_q: u32, k_q: u32) -> u64 {
    n as u64 * s_q as u64 * k_q as u64
}

/// The packing coefficient `epsilon = 1 / (2 * r_max)`.
///
/// # Example
///
/// ```
/// use packconv::packing::packing_coefficient;
///
/// assert_eq!(packing_coefficient(97_667), 1.0 / 195_334.0);
/// ```
pub fn packing_coefficient(r_max: u64) -> f64 {
    1.0 / (2.0 * r_max as f64)
}

/// Checks a companding range against the mode's limit.
///
/// Returns `Ok(None)` when the range is representable (always, for
/// [`PackingMode::Full`]), `Ok(Some(violation))` under
/// [`BoundPolicy::Warn`], and [`Error::BoundExceeded`] under
/// [`BoundPolicy::Strict`].
pub fn check_bound(
    mode: PackingMode,
    r_max: u64,
    policy: BoundPolicy,
) -> Result<Option<BoundViolation>> {
    let Some(limit) = mode.bound_limit() else {
        return Ok(None);
    };
    if r_max <= limit {
        return Ok(None);
    }
    match policy {
        BoundPolicy::Strict => Err(Error::BoundExceeded { mode, r_max, limit }),
        BoundPolicy::Warn => Ok(Some(BoundViolation { mode, r_max, limit })),
    }
}

/// A packed signal block.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedSignal {
    pub values: Vec<f64>,
    pub epsilon: f64,
    pub r_max: u64,
    pub mode: PackingMode,
    /// Distance between the samples sharing one value (asymmetric only).
    pub segment_len: Option<usize>,
    /// Number of companded samples the block was packed from.
    pub source_len: usize,
}

/// A packed kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedKernel {
    pub values: Vec<f64>,
    pub mode: PackingMode,
    /// Kernel length before packing.
    pub n_original: usize,
}

/// Packs a companded signal two samples per value: `values[i] =
/// s[2i] + epsilon * s[2i + 1]`, with an implicit trailing zero when the
/// length is odd.
///
/// # Example
///
/// ```
/// use packconv::companding::QuantizedSignal;
/// use packconv::packing::pack_symmetric_signal;
///
/// let q = QuantizedSignal { samples: vec![3, 1, 4, 1], c: 1.0, peak: 4.0 };
/// let p = pack_symmetric_signal(&q, 0.25);
/// assert_eq!(p.values, vec![3.25, 4.25]);
/// ```
pub fn pack_symmetric_signal(q: &QuantizedSignal, epsilon: f64) -> PackedSignal {
    let n = q.samples.len();
    let mut values = Vec::with_capacity(n.div_ceil(2));
    let mut i = 0;
    while i < n {
        let hi = q.samples[i] as f64;
        let lo = if i + 1 < n { q.samples[i + 1] as f64 } else { 0.0 };
        values.push(hi + epsilon * lo);
        i += 2;
    }
    PackedSignal {
        values,
        epsilon,
        r_max: (0.5 / epsilon).round() as u64,
        mode: PackingMode::Symmetric,
        segment_len: None,
        source_len: n,
    }
}

/// Packs a companded kernel two taps per value with the second tap scaled
/// *up*: `values[i] = k[2i] + k[2i + 1] / epsilon`. A final unpaired tap
/// (odd length) is carried alone.
///
/// # Example
///
/// ```
/// use packconv::companding::QuantizedSignal;
/// use packconv::packing::pack_symmetric_kernel;
///
/// let k = QuantizedSignal { samples: vec![2, 7, 1], c: 1.0, peak: 7.0 };
/// let p = pack_symmetric_kernel(&k, 0.25);
/// assert_eq!(p.values, vec![30.0, 1.0]);
/// ```
pub fn pack_symmetric_kernel(q: &QuantizedSignal, epsilon: f64) -> PackedKernel {
    let n = q.samples.len();
    let eps_inv = 1.0 / epsilon;
    let mut values = Vec::with_capacity(n.div_ceil(2));
    let mut i = 0;
    while i < n {
        let even = q.samples[i] as f64;
        let odd = if i + 1 < n { q.samples[i + 1] as f64 } else { 0.0 };
        values.push(even + eps_inv * odd);
        i += 2;
    }
    PackedKernel {
        values,
        mode: PackingMode::Symmetric,
        n_original: n,
    }
}

/// Packs a companded signal block `m` samples per value, the digits drawn
/// from segments `floor(w / m)` apart: `values[i] = sum_q epsilon^q *
/// s[i + q * floor(w / m)]`, for `i` below `floor(len / m)`.
///
/// `w` is the stride budget of the enclosing block plan (the number of new
/// samples each block contributes).
///
/// # Example
///
/// ```
/// use packconv::companding::QuantizedSignal;
/// use packconv::packing::pack_asymmetric_signal;
///
/// let q = QuantizedSignal { samples: vec![1, 2, 3, 4, 5, 6], c: 1.0, peak: 6.0 };
/// let p = pack_asymmetric_signal(&q, 0.1, 2, 4).unwrap();
/// assert_eq!(p.values, vec![1.3, 2.4, 3.5]);
/// ```
pub fn pack_asymmetric_signal(
    q: &QuantizedSignal,
    epsilon: f64,
    m: u8,
    w: usize,
) -> Result<PackedSignal> {
    let mode = PackingMode::asymmetric(m)?;
    let m = m as usize;
    let len = q.samples.len();
    let stride = w / m;
    let packed_len = len / m;
    let needed = packed_len + (m - 1) * stride;
    if needed > len {
        return Err(Error::IndexOverrun {
            needed,
            available: len,
        });
    }
    let mut values = Vec::with_capacity(packed_len);
    for i in 0..packed_len {
        let mut v = 0.0;
        let mut scale = 1.0;
        for d in 0..m {
            v += scale * q.samples[i + d * stride] as f64;
            scale *= epsilon;
        }
        values.push(v);
    }
    Ok(PackedSignal {
        values,
        epsilon,
        r_max: (0.5 / epsilon).round() as u64,
        mode,
        segment_len: Some(stride),
        source_len: len,
    })
}

// ---------------------------------------------------------------------------
// Integer-grid packers used by the block pipeline.
//
// The public layouts above store digits at scales epsilon^0, epsilon^1, ...
// which is the natural fixed-point picture but places digit
// boundaries between representable floats, so near the mode limits the
// arithmetic itself erodes the lowest digit. The pipeline instead scales
// every packed value by the inverse of its least digit weight: all digits
// become integer-weighted (base beta = 2 * r_eff), every product and
// partial sum below the mode limits is an exactly-representable integer,
// and unpacking reduces to integer div/mod. The two pictures differ by a
// constant factor per value, so the convolution results are equivalent.
// ---------------------------------------------------------------------------

/// Symmetric signal on the integer grid: `beta * s[2i] + s[2i + 1]`.
pub(crate) fn pack_symmetric_signal_scaled(samples: &[i64], beta: f64) -> Vec<f64> {
    let n = samples.len();
    let mut values = Vec::with_capacity(n.div_ceil(2));
    let mut i = 0;
    while i < n {
        let hi = samples[i] as f64;
        let lo = if i + 1 < n { samples[i + 1] as f64 } else { 0.0 };
        values.push(beta * hi + lo);
        i += 2;
    }
    values
}

/// Symmetric kernel with the tap pairs crossed: `beta * k[2i] + k[2i + 1]`
/// pairs against the signal layout so that the three digit positions of
/// each product carry, respectively, the even-by-even, mixed, and
/// odd-by-odd partial convolutions — each a clean slice of the output.
/// Already integer-valued, so it serves both the integer-grid path and the
/// epsilon-domain path (where it reads `k[2i + 1] + k[2i] / epsilon`).
pub(crate) fn pack_symmetric_kernel_crossed(samples: &[i64], beta: f64) -> Vec<f64> {
    let n = samples.len();
    debug_assert!(n % 2 == 1, "kernel must be padded to odd length");
    let mut values = Vec::with_capacity(n.div_ceil(2));
    let mut i = 0;
    while i < n {
        let even = samples[i] as f64;
        let odd = if i + 1 < n { samples[i + 1] as f64 } else { 0.0 };
        values.push(beta * even + odd);
        i += 2;
    }
    values
}

/// Asymmetric signal window on the integer grid: digit `q` of `m` carries
/// weight `beta^(m - 1 - q)`, mirroring the epsilon-domain layout times
/// `beta^(m - 1)`.
pub(crate) fn pack_asymmetric_window_scaled(
    samples: &[i64],
    beta: f64,
    m: usize,
    stride: usize,
    window_len: usize,
) -> Vec<f64> {
    let mut weights = vec![1.0; m];
    for q in (0..m - 1).rev() {
        weights[q] = weights[q + 1] * beta;
    }
    let mut values = Vec::with_capacity(window_len);
    for j in 0..window_len {
        let mut v = 0.0;
        for (q, &wq) in weights.iter().enumerate() {
            v += wq * samples[j + q * stride] as f64;
        }
        values.push(v);
    }
    values
}

/// Asymmetric signal window in the epsilon domain (digit `q` at weight
/// `epsilon^q`), with a caller-chosen window length so overlapping windows
/// can tile a block seamlessly.
pub(crate) fn pack_asymmetric_window(
    samples: &[i64],
    epsilon: f64,
    m: usize,
    stride: usize,
    window_len: usize,
) -> Vec<f64> {
    let mut values = Vec::with_capacity(window_len);
    for j in 0..window_len {
        let mut v = 0.0;
        let mut scale = 1.0;
        for q in 0..m {
            v += scale * samples[j + q * stride] as f64;
            scale *= epsilon;
        }
        values.push(v);
    }
    values
}
