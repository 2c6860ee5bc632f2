//! Link-level analysis of MIMO MMSE receivers with noisy channel estimates.
//!
//! The crate has two halves that check each other:
//!
//! * an analytic side ([`mmse`]) that computes the per-stream post-processing
//!   SNR (PPSNR) of a linear MMSE detector, both for perfect channel knowledge
//!   and in closed form when the receiver only has an estimate
//!   `Ĥ = H + ΔH` with i.i.d. complex Gaussian error of variance `σe²`;
//! * a Monte Carlo side ([`sim`]) that transmits packets through Rayleigh
//!   channels, estimates the channel per packet (maximum-likelihood training,
//!   fixed-variance error, or perfect CSI), detects with the exact perturbed
//!   MMSE filter and counts bit errors.
//!
//! Predicted BER is obtained by feeding the PPSNR into the AWGN error-rate
//! formula of the active constellation ([`modem`]); the simulator provides the
//! ground truth the analysis is validated against.
//!
//! All Monte Carlo paths are reproducible: every random draw comes from a
//! counter-keyed ChaCha substream ([`channel::RngStream`]), so results are
//! bit-identical for a fixed seed regardless of how work is scheduled across
//! threads.

pub mod channel;
pub mod cxmat;
pub mod mmse;
pub mod modem;
pub mod sim;

pub use cxmat::CMat;
pub use num_complex::Complex64;

/// Crate-wide error type covering input-contract violations and
/// linear-algebra failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian positive definite (pivot {pivot:.3e} at column {col})")]
    NotHpd { col: usize, pivot: f64 },
    #[error("matrix is singular to working precision (pivot {pivot:.3e} at column {col})")]
    Singular { col: usize, pivot: f64 },
    #[error("non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
