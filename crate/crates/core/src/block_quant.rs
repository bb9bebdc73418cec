//! Tensor-level MXFP4 quantization under three block layouts, a simulated
//! FP8 (E4M3) per-tensor quantizer used as the experiment baseline, and
//! quantization-error metrics.
//!
//! Block indexing is row-major over the scale grid; tensors whose
//! dimensions are not multiples of the block shape quantize ragged edge
//! blocks over their actual extent with their own amax.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp4::{
    decode_fp4, floor_log2, pow2, quantize_scalar, shared_exponent, E8M0Scale, Fp4Code,
    RoundingMode,
};
use crate::matrix::Matrix;

/// How a 2-D tensor is carved into shared-scale blocks.
///
/// `Row1x32` groups 32 consecutive elements along the last (contraction-
/// facing) dimension, `Col32x1` along the first, and `Block32x32` tiles
/// 32x32 patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantLayout {
    Row1x32,
    Col32x1,
    Block32x32,
}

impl QuantLayout {
    /// Block extent as `(rows, cols)`.
    pub fn block_shape(self) -> (usize, usize) {
        match self {
            QuantLayout::Row1x32 => (1, 32),
            QuantLayout::Col32x1 => (32, 1),
            QuantLayout::Block32x32 => (32, 32),
        }
    }

    fn tag(self) -> u8 {
        match self {
            QuantLayout::Row1x32 => 0,
            QuantLayout::Col32x1 => 1,
            QuantLayout::Block32x32 => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(QuantLayout::Row1x32),
            1 => Ok(QuantLayout::Col32x1),
            2 => Ok(QuantLayout::Block32x32),
            other => Err(Error::MalformedBytes(format!("unknown layout tag {other}"))),
        }
    }
}

/// A 2-D tensor quantized to FP4 codes with one E8M0 scale per block.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    rows: usize,
    cols: usize,
    layout: QuantLayout,
    codes: Vec<Fp4Code>,
    scales: Vec<E8M0Scale>,
    scale_rows: usize,
    scale_cols: usize,
}

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

impl QuantizedTensor {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn layout(&self) -> QuantLayout {
        self.layout
    }

    /// Scale-grid dimensions: the tensor shape divided by the block shape,
    /// rounded up.
    pub fn scale_grid(&self) -> (usize, usize) {
        (self.scale_rows, self.scale_cols)
    }

    pub fn code(&self, r: usize, c: usize) -> Fp4Code {
        self.codes[r * self.cols + c]
    }

    pub fn scale_at(&self, block_row: usize, block_col: usize) -> E8M0Scale {
        self.scales[block_row * self.scale_cols + block_col]
    }

    /// Row-major index of the block containing element `(r, c)`.
    pub fn block_index_of(&self, r: usize, c: usize) -> usize {
        let (bh, bw) = self.layout.block_shape();
        (r / bh) * self.scale_cols + c / bw
    }

    pub fn scales(&self) -> &[E8M0Scale] {
        &self.scales
    }

    /// Serializes as: rows u32 LE, cols u32 LE, layout tag byte, packed
    /// codes row-major two per byte (first element of each pair in the
    /// high nibble), then scale exponents row-major as signed bytes with
    /// `-128` for the NaN sentinel.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(9 + self.codes.len().div_ceil(2) + self.scales.len());
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        out.push(self.layout.tag());
        for pair in self.codes.chunks(2) {
            let hi = pair[0].to_bits() << 4;
            let lo = pair.get(1).map_or(0, |c| c.to_bits());
            out.push(hi | lo);
        }
        out.extend(self.scales.iter().map(|s| s.to_byte() as u8));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 9 {
            return Err(Error::MalformedBytes("header truncated".into()));
        }
        let rows = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let layout = QuantLayout::from_tag(bytes[8])?;
        let n = rows * cols;
        let code_bytes = n.div_ceil(2);
        let (bh, bw) = layout.block_shape();
        let scale_rows = ceil_div(rows, bh);
        let scale_cols = ceil_div(cols, bw);
        let n_scales = scale_rows * scale_cols;
        let expected = 9 + code_bytes + n_scales;
        if bytes.len() != expected {
            return Err(Error::MalformedBytes(format!(
                "expected {expected} bytes for {rows}x{cols} {layout:?}, got {}",
                bytes.len()
            )));
        }
        let mut codes = Vec::with_capacity(n);
        for i in 0..n {
            let b = bytes[9 + i / 2];
            let nibble = if i % 2 == 0 { b >> 4 } else { b & 0x0F };
            codes.push(Fp4Code::from_bits(nibble));
        }
        let scales = bytes[9 + code_bytes..]
            .iter()
            .map(|&b| E8M0Scale::from_byte(b as i8))
            .collect();
        Ok(QuantizedTensor {
            rows,
            cols,
            layout,
            codes,
            scales,
            scale_rows,
            scale_cols,
        })
    }
}

/// Quantizes a finite matrix under the given block layout. Each block's
/// shared exponent comes from its own amax; elements are divided by the
/// block scale and rounded per `mode`. Blocks are visited row-major over
/// the scale grid, elements row-major within a block, which fixes the
/// stochastic stream order.
pub fn quantize_tensor(
    x: &Matrix,
    layout: QuantLayout,
    mode: &mut RoundingMode,
) -> Result<QuantizedTensor> {
    if !x.is_finite() {
        return Err(Error::NonFinite("quantize_tensor"));
    }
    let (rows, cols) = x.shape();
    let (bh, bw) = layout.block_shape();
    let scale_rows = ceil_div(rows, bh);
    let scale_cols = ceil_div(cols, bw);
    let mut codes = vec![Fp4Code::ZERO; rows * cols];
    let mut scales = Vec::with_capacity(scale_rows * scale_cols);
    let mut block = Vec::with_capacity(bh * bw);
    for br in 0..scale_rows {
        for bc in 0..scale_cols {
            let r0 = br * bh;
            let r1 = (r0 + bh).min(rows);
            let c0 = bc * bw;
            let c1 = (c0 + bw).min(cols);
            block.clear();
            for r in r0..r1 {
                block.extend_from_slice(&x.row(r)[c0..c1]);
            }
            let scale = shared_exponent(&block)?;
            let scale_value = scale.value();
            for r in r0..r1 {
                for c in c0..c1 {
                    codes[r * cols + c] = quantize_scalar(x.get(r, c) / scale_value, mode)?;
                }
            }
            scales.push(scale);
        }
    }
    Ok(QuantizedTensor {
        rows,
        cols,
        layout,
        codes,
        scales,
        scale_rows,
        scale_cols,
    })
}

/// Reconstructs `decode(code) * 2^e_block` per element. Errors if any
/// block scale is the NaN sentinel.
pub fn dequantize_tensor(q: &QuantizedTensor) -> Result<Matrix> {
    if q.scales.iter().any(|s| s.is_nan()) {
        return Err(Error::NanScale);
    }
    let (bh, bw) = q.layout.block_shape();
    let mut out = Matrix::zeros(q.rows, q.cols);
    for r in 0..q.rows {
        for c in 0..q.cols {
            let scale = q.scales[(r / bh) * q.scale_cols + c / bw];
            out.set(r, c, decode_fp4(q.codes[r * q.cols + c]) * scale.value());
        }
    }
    Ok(out)
}

/// Largest finite E4M3 magnitude.
pub const E4M3_MAX: f64 = 448.0;

/// Round-to-nearest-even onto the E4M3 value grid, saturating at ±448.
fn e4m3_nearest(v: f64) -> f64 {
    let negative = v < 0.0;
    let av = v.abs().min(E4M3_MAX);
    if av == 0.0 {
        return 0.0;
    }
    // subnormal step 2^-9 below 2^-6, otherwise 8 steps per binade
    let step = if av < pow2(-6) {
        pow2(-9)
    } else {
        pow2(floor_log2(av) - 3)
    };
    let mag = (av / step).round_ties_even() * step;
    if negative {
        -mag
    } else {
        mag
    }
}

/// Simulated-FP8 baseline: projects a tensor onto the E4M3 grid under a
/// per-tensor power-of-two scale chosen so the tensor amax fits at or
/// below the E4M3 maximum. Deterministic round-to-nearest-even.
pub fn quantize_fp8(x: &Matrix) -> Result<Matrix> {
    if !x.is_finite() {
        return Err(Error::NonFinite("quantize_fp8"));
    }
    let amax = x.max_abs();
    if amax == 0.0 {
        return Ok(x.clone());
    }
    let mut e = floor_log2(amax) - 8;
    if amax > E4M3_MAX * pow2(e.clamp(-1000, 1000)) {
        e += 1;
    }
    let scale = pow2(e.clamp(-1000, 1000));
    Ok(x.map(|v| e4m3_nearest(v / scale) * scale))
}

/// Quantization-error summary. `per_block_mse` is keyed by row-major block
/// index over the scale grid; each entry averages over that block's actual
/// element count.
#[derive(Debug, Clone)]
pub struct QuantErrorStats {
    pub mse: f64,
    pub max_abs_err: f64,
    pub per_block_mse: Vec<f64>,
}

pub fn quant_error_stats(x: &Matrix, q: &QuantizedTensor) -> Result<QuantErrorStats> {
    if x.shape() != q.shape() {
        return Err(Error::ShapeMismatch(format!(
            "stats on {:?} vs quantized {:?}",
            x.shape(),
            q.shape()
        )));
    }
    let deq = dequantize_tensor(q)?;
    let (bh, bw) = q.layout.block_shape();
    let mut per_block_sum = vec![0.0f64; q.scale_rows * q.scale_cols];
    let mut per_block_n = vec![0usize; q.scale_rows * q.scale_cols];
    let mut sum = 0.0;
    let mut max_abs = 0.0f64;
    for r in 0..q.rows {
        for c in 0..q.cols {
            let err = x.get(r, c) - deq.get(r, c);
            let sq = err * err;
            sum += sq;
            max_abs = max_abs.max(err.abs());
            let bi = (r / bh) * q.scale_cols + c / bw;
            per_block_sum[bi] += sq;
            per_block_n[bi] += 1;
        }
    }
    let n = (q.rows * q.cols).max(1);
    Ok(QuantErrorStats {
        mse: sum / n as f64,
        max_abs_err: max_abs,
        per_block_mse: per_block_sum
            .iter()
            .zip(&per_block_n)
            .map(|(&s, &k)| s / k.max(1) as f64)
            .collect(),
    })
}
