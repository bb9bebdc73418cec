//! Desk-scale simulator of MXFP4 micro-scaling training.
//!
//! The crate provides, bottom to top:
//!
//! - [`fp4`]: E2M1 value coding, E8M0 shared-exponent scales, nearest-even
//!   and stochastic rounding.
//! - [`block_quant`]: tensor-level MXFP4 quantization under 1x32 / 32x1 /
//!   32x32 block layouts, a simulated-FP8 (E4M3) baseline quantizer, and
//!   quantization-error metrics.
//! - [`hadamard`]: deterministic and randomized Hadamard rotations (H16,
//!   H32), dense and fast tiled application.
//! - [`qgemm`]: the three quantized GEMM paths (Fprop, Dgrad, Wgrad) with
//!   optional Hadamard injection on both operands of the shared
//!   contraction axis.
//! - [`trainer`]: a manual-backprop linear-layer harness that runs the
//!   stage-wise MXFP4 enablement ladder and measures steps-to-target
//!   overhead and divergence.

pub mod block_quant;
pub mod error;
pub mod fp4;
pub mod hadamard;
pub mod matrix;
pub mod qgemm;
pub mod seeding;
pub mod trainer;

pub use error::{Error, Result};
pub use matrix::Matrix;
