//! Unpacking: recovering the integer digits carried by each packed
//! convolution output.
//!
//! Every packed output is a fixed-point number whose digits sit at powers
//! of the packing coefficient. Digits are signed, so each one is first
//! shifted by `r_max` (making it non-negative) and then peeled off the
//! value with floor operations, most significant first. A tiny systematic
//! guard `u_sys` is added so that backend rounding noise — which can sit
//! on either side of an exact integer — is pushed strictly above it,
//! keeping every floor one-sided. The guard accumulates a known bias of
//! `u_sys / epsilon^d` by the time the last digit `d` is reached, so that
//! digit is recovered by recentring instead of a raw floor.
//!
//! Digit recovery through f64 floors is reliable while the working values
//! stay well inside the f64 integer grid (small and moderate `r_max`).
//! Near the mode limits the arithmetic itself erodes the lowest digit, so
//! the streaming pipeline's time-domain path uses an equivalent
//! integer-grid formulation (`*_scaled` here) whose div/mod extraction is
//! exact all the way to the limits.

use crate::error::{Error, Result};
use crate::packing::PackingMode;

/// Default systematic guard added before floor-based digit extraction.
pub const U_SYS_DEFAULT: f64 = 3.1193e-11;

/// Everything unpacking needs to know about how a stream was packed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnpackContext {
    /// Half-radix of the digit alphabet. Digits of magnitude strictly
    /// below `r_max` are always separable; a digit exactly at the rim can
    /// collide with a neighbour's carry, so streaming callers size
    /// `r_max` one above the data's true range.
    pub r_max: u64,
    /// Packing coefficient `1 / (2 * r_max)`.
    pub epsilon: f64,
    /// Shift that makes every digit of a symmetric packed output
    /// non-negative: `r_max * (epsilon + 1 + 1/epsilon) + u_sys /
    /// epsilon`.
    pub r_safe: f64,
    /// Systematic guard.
    pub u_sys: f64,
    /// First packed index whose digits are meaningful for the enclosing
    /// block (earlier indices are transient).
    pub w_start: usize,
    pub mode: PackingMode,
}

impl UnpackContext {
    pub fn new(r_max: u64, u_sys: f64, w_start: usize, mode: PackingMode) -> Self {
        let epsilon = 1.0 / (2.0 * r_max as f64);
        let eps_inv = 2.0 * r_max as f64;
        let r_safe = r_max as f64 * (epsilon + 1.0 + eps_inv) + u_sys * eps_inv;
        UnpackContext {
            r_max,
            epsilon,
            r_safe,
            u_sys,
            w_start,
            mode,
        }
    }
}

/// Digits recovered from one block, before placement.
#[derive(Debug, Clone)]
pub(crate) struct GuardedDigits {
    /// `digits[i]` holds the digit group of packed value `i`.
    pub digits: Vec<[i64; 3]>,
    /// How many digits exceeded the expected range (corruption detector).
    pub overflows: u64,
    /// The first out-of-range digit, if any.
    pub first_overflow: Option<i64>,
}

/// Floor-based symmetric digit extraction (three digits per value, the
/// least-significant one belonging to the *next* value's leading output).
///
/// Returns digit groups `[even_part, odd, low_part]` where
/// `even_output(i) = even_part(i) + low_part(i - 1)` (a zero low part is
/// implied before the first value).
pub(crate) fn unpack_symmetric_guarded(
    packed_out: &[f64],
    ctx: &UnpackContext,
    range_check: u64,
) -> GuardedDigits {
    let rm = ctx.r_max as f64;
    let eps = ctx.epsilon;
    let eps_inv = 2.0 * rm;
    // Known guard accumulation in the carried low digit.
    let low_bias = ctx.u_sys * eps_inv * eps_inv;
    let limit = range_check as i64;

    let mut digits = Vec::with_capacity(packed_out.len());
    let mut overflows = 0_u64;
    let mut first_overflow = None;

    for &r in packed_out {
        let u = r + ctx.r_safe;
        let fu = u.floor();
        let frac = u - fu;
        let side_eps_inv = (eps * u).floor();
        let even_part = (side_eps_inv - rm).round() as i64;
        let odd = (fu - eps_inv * side_eps_inv - rm).floor() as i64;
        let low_part = (eps_inv * frac - rm - low_bias).round() as i64;
        for d in [even_part, odd, low_part] {
            if d.abs() > limit {
                overflows += 1;
                if first_overflow.is_none() {
                    first_overflow = Some(d);
                }
            }
        }
        digits.push([even_part, odd, low_part]);
    }

    GuardedDigits {
        digits,
        overflows,
        first_overflow,
    }
}

/// Recovers the output samples carried by a symmetric packed convolution.
///
/// `packed_out[i]` is taken as packed output index `ctx.w_start + i`; the
/// result interleaves the two outputs each value carries:
/// `[out(2 w_start), out(2 w_start + 1), out(2 w_start + 2), ...]`.
///
/// Errors with [`Error::UnpackOverflow`] when a recovered digit exceeds
/// `ctx.r_max` (detection only — the digits are not corrected).
pub fn unpack_symmetric(packed_out: &[f64], ctx: &UnpackContext) -> Result<Vec<i64>> {
    let g = unpack_symmetric_guarded(packed_out, ctx, ctx.r_max);
    let mut out = Vec::with_capacity(2 * packed_out.len());
    let mut prev_low = 0_i64;
    for d in &g.digits {
        out.push(d[0] + prev_low);
        out.push(d[1]);
        prev_low = d[2];
    }
    if let Some(value) = g.first_overflow {
        return Err(Error::UnpackOverflow {
            value,
            r_max: ctx.r_max,
        });
    }
    // The recombined even outputs can overflow even when the parts do not.
    if let Some(&value) = out.iter().find(|v| v.unsigned_abs() > ctx.r_max) {
        return Err(Error::UnpackOverflow {
            value,
            r_max: ctx.r_max,
        });
    }
    Ok(out)
}

/// Floor-based asymmetric digit extraction: `m` digits per value, most
/// significant first.
pub(crate) fn unpack_asymmetric_guarded(
    packed_out: &[f64],
    ctx: &UnpackContext,
    m: usize,
    range_check: u64,
) -> GuardedDigits {
    let rm = ctx.r_max as f64;
    let eps = ctx.epsilon;
    let eps_inv = 2.0 * rm;
    // Shift that makes every digit non-negative.
    let mut shift = 0.0;
    let mut scale = 1.0;
    for _ in 0..m {
        shift += scale * rm;
        scale *= eps;
    }
    // Guard magnitude once it has been rescaled up to the last digit.
    let mut final_guard = ctx.u_sys;
    for _ in 0..m - 1 {
        final_guard *= eps_inv;
    }
    let limit = range_check as i64;

    let mut digits = Vec::with_capacity(packed_out.len());
    let mut overflows = 0_u64;
    let mut first_overflow = None;

    for &v in packed_out {
        let mut u = v + shift + ctx.u_sys;
        let mut group = [0_i64; 3];
        for (q, slot) in group.iter_mut().take(m).enumerate() {
            let d = if q + 1 < m {
                let fu = u.floor();
                u = eps_inv * (u - fu);
                fu as i64 - ctx.r_max as i64
            } else {
                (u - final_guard).round() as i64 - ctx.r_max as i64
            };
            if d.abs() > limit {
                overflows += 1;
                if first_overflow.is_none() {
                    first_overflow = Some(d);
                }
            }
            *slot = d;
        }
        digits.push(group);
    }

    GuardedDigits {
        digits,
        overflows,
        first_overflow,
    }
}

/// Recovers the output samples carried by an asymmetric packed
/// convolution.
///
/// Digit `q` of packed value `i` lands at output `q * segment_len + i`,
/// mirroring the segments the values were packed from.
///
/// Errors with [`Error::UnpackOverflow`] on a digit beyond `ctx.r_max`,
/// and rejects geometries whose digit placements would collide.
pub fn unpack_asymmetric(
    packed_out: &[f64],
    ctx: &UnpackContext,
    m: u8,
    segment_len: usize,
) -> Result<Vec<i64>> {
    PackingMode::asymmetric(m)?;
    let m = m as usize;
    if m > 1 && segment_len < packed_out.len() {
        return Err(Error::Config(format!(
            "segment length {segment_len} shorter than the packed block \
             ({} values): digit placements would collide",
            packed_out.len()
        )));
    }
    let g = unpack_asymmetric_guarded(packed_out, ctx, m, ctx.r_max);
    if let Some(value) = g.first_overflow {
        return Err(Error::UnpackOverflow {
            value,
            r_max: ctx.r_max,
        });
    }
    let mut out = vec![0_i64; (m - 1) * segment_len + packed_out.len()];
    for (i, group) in g.digits.iter().enumerate() {
        for (q, &d) in group.iter().take(m).enumerate() {
            out[q * segment_len + i] = d;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Integer-grid decoders (used by the pipeline's time-domain path).
// ---------------------------------------------------------------------------

/// Exact digit extraction for the integer-grid symmetric layout. The
/// packed outputs must be exact integers (guaranteed below the mode
/// limits on the time-domain backend); digits come out via i128 div/mod.
pub(crate) fn unpack_symmetric_scaled(
    packed_out: &[f64],
    r_eff: u64,
    range_check: u64,
) -> GuardedDigits {
    let beta = 2 * r_eff as i128;
    let r = r_eff as i128;
    let shift = r * (beta * beta + beta + 1);
    let limit = range_check as i64;

    let mut digits = Vec::with_capacity(packed_out.len());
    let mut overflows = 0_u64;
    let mut first_overflow = None;

    for &v in packed_out {
        let vs = v as i128 + shift;
        let top = vs.div_euclid(beta * beta);
        let rem = vs - top * beta * beta;
        let mid = rem.div_euclid(beta);
        let low = rem - mid * beta;
        let group = [(top - r) as i64, (mid - r) as i64, (low - r) as i64];
        for d in group {
            if d.abs() > limit {
                overflows += 1;
                if first_overflow.is_none() {
                    first_overflow = Some(d);
                }
            }
        }
        digits.push(group);
    }

    GuardedDigits {
        digits,
        overflows,
        first_overflow,
    }
}

/// Exact digit extraction for the integer-grid asymmetric layout.
pub(crate) fn unpack_asymmetric_scaled(
    packed_out: &[f64],
    m: usize,
    r_eff: u64,
    range_check: u64,
) -> GuardedDigits {
    let beta = 2 * r_eff as i128;
    let r = r_eff as i128;
    let mut shift = 0_i128;
    let mut place = 1_i128;
    for _ in 0..m {
        shift += r * place;
        place *= beta;
    }
    let limit = range_check as i64;

    let mut digits = Vec::with_capacity(packed_out.len());
    let mut overflows = 0_u64;
    let mut first_overflow = None;

    for &v in packed_out {
        let mut vs = v as i128 + shift;
        let mut group = [0_i64; 3];
        for q in (0..m).rev() {
            let d = vs.rem_euclid(beta);
            vs = vs.div_euclid(beta);
            let digit = (d - r) as i64;
            if digit.abs() > limit {
                overflows += 1;
                if first_overflow.is_none() {
                    first_overflow = Some(digit);
                }
            }
            group[q] = digit;
        }
        digits.push(group);
    }

    GuardedDigits {
        digits,
        overflows,
        first_overflow,
    }
}

/// Stitches kept block slices into the final output.
///
/// Each piece is `(output_offset, inverse_companding_scale, samples)`; the
/// scale is applied while writing and anything past `out_len` is dropped.
pub fn assemble_output(
    pieces: impl IntoIterator<Item = (usize, f64, Vec<f64>)>,
    out_len: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; out_len];
    for (offset, scale, samples) in pieces {
        if offset >= out_len {
            continue;
        }
        let len = samples.len().min(out_len - offset);
        for (dst, &src) in out[offset..offset + len].iter_mut().zip(&samples[..len]) {
            *dst = scale * src;
        }
    }
    out
}
