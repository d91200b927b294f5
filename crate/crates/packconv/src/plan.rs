//! Block planning for streaming (overlap-save) convolution.
//!
//! Long inputs are cut into overlapping windows of `w_block = w + n + 1`
//! samples, where `w` is the number of new samples per block and `n` the
//! (odd-padded) kernel length. Each window is convolved independently and
//! a contiguous slice of its full convolution is kept:
//!
//! * block 0 keeps outputs `0 ..= w + n - 2` (the leading transient plus
//!   its `w` steady-state samples);
//! * block `i > 0` starts two samples early (`offset = w * i - 2`) and
//!   keeps outputs `n + 1 ..= w + n`, which land at global positions
//!   `n - 1 + w * i ..`.
//!
//! The two-sample rewind keeps every block's kept range away from its
//! window edges once packing shifts outputs around inside a block; the
//! spare sample pair is also why the window is `w + n + 1` long rather
//! than the classic `w + n - 1`.

use crate::error::{Error, Result};
use crate::packing::PackingMode;

/// Geometry of one streaming convolution run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPlan {
    /// Kernel length after odd-padding.
    pub n: usize,
    /// Kernel length as supplied.
    pub n_source: usize,
    /// New samples consumed per block.
    pub w: usize,
    /// Window length per block.
    pub w_block: usize,
    /// Number of blocks.
    pub p: usize,
    /// Input length.
    pub l: usize,
    /// Zero samples implicitly appended so the final window is full.
    pub tail_pad: usize,
    /// Packing mode the plan was shaped for.
    pub mode: PackingMode,
}

impl BlockPlan {
    /// First packed index whose unpacked outputs are kept.
    /// Zero for block 0, `(n - 1) / 2` afterwards.
    pub fn w_start(&self, block: usize) -> usize {
        if block == 0 {
            0
        } else {
            (self.n - 1) / 2
        }
    }

    /// Where the block's window begins in the input.
    pub fn source_offset(&self, block: usize) -> usize {
        if block == 0 {
            0
        } else {
            self.w * block - 2
        }
    }

    /// Kept slice of the block's full convolution, as
    /// `(first_output_index, length)`.
    pub fn keep_range(&self, block: usize) -> (usize, usize) {
        if block == 0 {
            (0, self.w + self.n - 1)
        } else {
            (self.n + 1, self.w)
        }
    }

    /// Global output position of the block's first kept sample.
    pub fn out_offset(&self, block: usize) -> usize {
        if block == 0 {
            0
        } else {
            self.n - 1 + self.w * block
        }
    }

    /// Final output length: `l + n_source - 1`.
    pub fn output_len(&self) -> usize {
        self.l + self.n_source - 1
    }
}

/// Lays out the block geometry for an input of `l` samples and a kernel of
/// `n` taps.
///
/// The kernel length is padded to odd (a zero tap changes nothing), the
/// per-block budget `w` defaults to twice the padded length and is rounded
/// up so that every asymmetric segment boundary falls on a packed-pair
/// boundary (a multiple of 2 for full/symmetric modes, of `2 m` for
/// `m`-digit asymmetric packing).
pub fn plan_blocks(
    l: usize,
    n: usize,
    w_request: Option<usize>,
    mode: PackingMode,
) -> Result<BlockPlan> {
    if l == 0 {
        return Err(Error::Config("input signal is empty".to_string()));
    }
    if n == 0 {
        return Err(Error::Config("kernel is empty".to_string()));
    }
    let n_padded = if n % 2 == 0 { n + 1 } else { n };
    let granule = match mode {
        PackingMode::Asymmetric(m) => 2 * m as usize,
        _ => 2,
    };
    let base = w_request.unwrap_or(2 * n_padded).max(2 * n_padded);
    let w = base.div_ceil(granule) * granule;
    let w_block = w + n_padded + 1;
    let p = l.div_ceil(w);
    let last_offset = if p == 1 { 0 } else { w * (p - 1) - 2 };
    let tail_pad = (last_offset + w_block).saturating_sub(l);
    Ok(BlockPlan {
        n: n_padded,
        n_source: n,
        w,
        w_block,
        p,
        l,
        tail_pad,
        mode,
    })
}
