//! The three GEMM paths of a linear layer — Fprop, Dgrad, Wgrad — with
//! per-operand quantization and optional Hadamard injection on the shared
//! contraction axis of both operands.
//!
//! Rotation placement mirrors the cancellation identities: for
//! `Y = X W^T` both operands become `X H` and `W H`; for
//! `∇X = ∇Y W` the operands are `(∇Y) H` and `W^T H`; for
//! `∇W = (∇Y)^T X` they are `(∇Y)^T H` and `X^T H`. The product of each
//! pair contains `H H^T = I`, so in exact arithmetic rotation never
//! changes the result and no inverse is materialized. GEMMs always
//! multiply dequantized binary64 values; the formats describe operands,
//! not accumulators.

use serde::{Deserialize, Serialize};

use crate::block_quant::{dequantize_tensor, quantize_fp8, quantize_tensor, QuantLayout};
use crate::error::{Error, Result};
use crate::fp4::RoundingMode;
use crate::hadamard::{fast_apply, Axis, HadamardSpec};
use crate::matrix::Matrix;
use crate::seeding;

/// Which of a linear layer's three GEMMs is being computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GemmPath {
    Fprop,
    Dgrad,
    Wgrad,
}

/// Rounding selector for MXFP4 operands. `Stochastic` carries the seed of
/// the per-call stream; the two operands of one GEMM draw from sub-streams
/// derived from it, so a config value fully determines the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoundingSelect {
    NearestEven,
    Stochastic { seed: u64 },
}

/// Numeric treatment of a path's operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Numeric {
    Exact,
    Fp8Sim,
    Mxfp4 {
        /// Layout for the activation/gradient-side operand.
        a_layout: QuantLayout,
        /// Layout for the weight-side operand (both operands of Wgrad are
        /// activation/gradient tensors, so its default is row-wise too).
        b_layout: QuantLayout,
        rounding: RoundingSelect,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub numeric: Numeric,
    pub hadamard: Option<HadamardSpec>,
}

impl PathConfig {
    pub fn exact() -> Self {
        PathConfig {
            numeric: Numeric::Exact,
            hadamard: None,
        }
    }
}

/// Quantize-dequantize an operand per the MXFP4 selector. `operand` labels
/// the A (0) or B (1) side so stochastic streams never alias.
fn mxfp4_copy(
    m: &Matrix,
    layout: QuantLayout,
    rounding: RoundingSelect,
    operand: u64,
) -> Result<Matrix> {
    let mut mode = match rounding {
        RoundingSelect::NearestEven => RoundingMode::NearestEven,
        RoundingSelect::Stochastic { seed } => {
            RoundingMode::stochastic(seeding::mix(seed, operand))
        }
    };
    dequantize_tensor(&quantize_tensor(m, layout, &mut mode)?)
}

/// Applies the optional rotation to both operands along their column axes
/// (the shared contraction axis after any pre-transposition), then runs
/// the configured numeric and multiplies `a * b^T`.
fn rotated_quantized_product(a: &Matrix, b: &Matrix, cfg: &PathConfig) -> Result<Matrix> {
    let (a, b) = match &cfg.hadamard {
        Some(spec) => (
            fast_apply(a, spec, Axis::Cols)?,
            fast_apply(b, spec, Axis::Cols)?,
        ),
        None => (a.clone(), b.clone()),
    };
    match cfg.numeric {
        Numeric::Exact => a.matmul_nt(&b),
        Numeric::Fp8Sim => quantize_fp8(&a)?.matmul_nt(&quantize_fp8(&b)?),
        Numeric::Mxfp4 {
            a_layout,
            b_layout,
            rounding,
        } => mxfp4_copy(&a, a_layout, rounding, 0)?
            .matmul_nt(&mxfp4_copy(&b, b_layout, rounding, 1)?),
    }
}

/// Forward GEMM: `Y = X W^T` with `x` of shape `[tokens × d_in]` and `w`
/// of shape `[d_out × d_in]`. The contraction axis is `d_in`.
pub fn fprop(x: &Matrix, w: &Matrix, cfg: &PathConfig) -> Result<Matrix> {
    if x.cols() != w.cols() {
        return Err(Error::ShapeMismatch(format!(
            "fprop x {:?} vs w {:?}",
            x.shape(),
            w.shape()
        )));
    }
    rotated_quantized_product(x, w, cfg)
}

/// Input-gradient GEMM: `∇X = ∇Y W` with `dy` of shape `[tokens × d_out]`
/// and `w` of shape `[d_out × d_in]`. The contraction axis is `d_out`, so
/// the weight operand is pre-transposed before rotation and quantization.
pub fn dgrad(dy: &Matrix, w: &Matrix, cfg: &PathConfig) -> Result<Matrix> {
    if dy.cols() != w.rows() {
        return Err(Error::ShapeMismatch(format!(
            "dgrad dy {:?} vs w {:?}",
            dy.shape(),
            w.shape()
        )));
    }
    rotated_quantized_product(dy, &w.transpose(), cfg)
}

/// Weight-gradient GEMM: `∇W = (∇Y)^T X` with `dy` of shape
/// `[tokens × d_out]` and `x` of shape `[tokens × d_in]`. The contraction
/// axis is `tokens`, so both operands are pre-transposed.
pub fn wgrad(dy: &Matrix, x: &Matrix, cfg: &PathConfig) -> Result<Matrix> {
    if dy.rows() != x.rows() {
        return Err(Error::ShapeMismatch(format!(
            "wgrad dy {:?} vs x {:?}",
            dy.shape(),
            x.shape()
        )));
    }
    rotated_quantized_product(&dy.transpose(), &x.transpose(), cfg)
}
