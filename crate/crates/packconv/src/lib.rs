//! Precision-scalable 1D convolution and cross-correlation.
//!
//! The engine trades a controlled amount of output fidelity for
//! throughput: both operands are companded onto a small integer grid,
//! several integers are packed into each f64, the packed streams are
//! convolved by any full-convolution backend, and every packed output is
//! then split back into several true convolution outputs. With the digit
//! budget chosen against the worst-case output magnitude, unpacking is
//! error-free and the only fidelity cost is the companding itself — a
//! cost predicted by a closed-form SNR model, which in turn drives
//! per-block selection of the cheapest layout meeting a fidelity floor.
//!
//! # Example
//!
//! ```
//! use packconv::pipeline::{convolve, EngineConfig};
//!
//! // Integer operands whose peaks match the quantization levels in every
//! // processing block pass through companding unchanged, so the pipeline
//! // is exact.
//! let signal = vec![2.0, -1.0, 3.0, 0.0, 3.0, 2.0, -2.0, 3.0];
//! let kernel = vec![1.0, -2.0, 1.0];
//! let cfg = EngineConfig { s_q: 3, k_q: 2, ..EngineConfig::default() };
//! let out = convolve(&signal, &kernel, &cfg).unwrap();
//! assert_eq!(out.samples, vec![2.0, -5.0, 7.0, -7.0, 6.0, -4.0, -3.0, 9.0, -8.0, 3.0]);
//! ```

pub mod backend;
pub mod bench;
pub mod companding;
pub mod error;
pub mod flops;
pub mod io;
pub mod packing;
pub mod pipeline;
pub mod plan;
pub mod precision;
pub mod synth;
pub mod unpack;

pub use backend::{
    validate_backend, validate_backend_with, Algorithm, BackendKind, ConvBackend, DirectBackend,
    FftBackend, ValidationReport,
};
pub use companding::{compand, estimate_stats, inverse_compand, CompandingSpec, MarginalStats,
    QuantizedSignal};
pub use error::{Error, Result};
pub use packing::{
    check_bound, companding_range, packing_coefficient, BoundPolicy, BoundViolation, PackedKernel,
    PackedSignal, PackingMode,
};
pub use pipeline::{
    adaptive_convolve, convolve, cross_correlate, BlockDecision, ConvOutput, EngineConfig,
    RunStats,
};
pub use plan::{plan_blocks, BlockPlan};
pub use precision::{
    fit_laplacian_moments, fit_weibull_moments, measured_snr_db, select_mode, ModeDecision,
    SnrModel,
};
pub use unpack::{assemble_output, unpack_asymmetric, unpack_symmetric, UnpackContext,
    U_SYS_DEFAULT};
