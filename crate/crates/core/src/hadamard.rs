//! Orthonormal Hadamard rotations (H16, H32), deterministic or with a
//! seeded random sign diagonal, applied tile-wise along one axis of a
//! matrix.
//!
//! Matrices are Sylvester constructions scaled by `1/sqrt(n)`, so
//! `H H^T = H^T H = I` holds literally and rotations cancel across a GEMM
//! without materializing an inverse. The randomized variant is `H * D`
//! with `D` a seeded ±1 diagonal (still orthonormal).
//!
//! Application convention: `Axis::Cols` right-multiplies each consecutive
//! length-n segment of every row by `H` (block-diagonal `x * diag(H..H)`);
//! `Axis::Rows` left-multiplies column segments (`diag(H..H) * x`).

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Transform size; only 16 and 32 are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HadamardSize {
    H16,
    H32,
}

impl HadamardSize {
    pub fn from_len(n: usize) -> Result<Self> {
        match n {
            16 => Ok(HadamardSize::H16),
            32 => Ok(HadamardSize::H32),
            other => Err(Error::UnsupportedHadamardSize(other)),
        }
    }

    #[inline]
    pub fn n(self) -> usize {
        match self {
            HadamardSize::H16 => 16,
            HadamardSize::H32 => 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HadamardVariant {
    Deterministic,
    Randomized { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HadamardSpec {
    pub size: HadamardSize,
    pub variant: HadamardVariant,
}

impl HadamardSpec {
    pub fn deterministic(size: HadamardSize) -> Self {
        HadamardSpec {
            size,
            variant: HadamardVariant::Deterministic,
        }
    }

    pub fn randomized(size: HadamardSize, seed: u64) -> Self {
        HadamardSpec {
            size,
            variant: HadamardVariant::Randomized { seed },
        }
    }
}

/// A materialized n×n orthonormal rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct HadamardMatrix {
    n: usize,
    data: Vec<f64>, // row-major
}

impl HadamardMatrix {
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(self.n, self.n, self.data.clone()).expect("square by construction")
    }
}

/// Unnormalized Sylvester ±1 matrix of power-of-two order `n`.
fn sylvester(n: usize) -> Vec<f64> {
    debug_assert!(n.is_power_of_two());
    let mut h = vec![1.0];
    let mut m = 1;
    while m < n {
        let mut next = vec![0.0; 4 * m * m];
        for i in 0..m {
            for j in 0..m {
                let v = h[i * m + j];
                next[i * 2 * m + j] = v;
                next[i * 2 * m + j + m] = v;
                next[(i + m) * 2 * m + j] = v;
                next[(i + m) * 2 * m + j + m] = -v;
            }
        }
        h = next;
        m *= 2;
    }
    h
}

/// Seeded ±1 sign diagonal.
fn sign_diagonal(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| if rng.next_u64() & 1 == 0 { 1.0 } else { -1.0 })
        .collect()
}

/// Builds the normalized rotation: Sylvester `H_2^{⊗k} / sqrt(n)`, right-
/// multiplied by the seeded sign diagonal for the randomized variant.
pub fn build_hadamard(spec: &HadamardSpec) -> HadamardMatrix {
    let n = spec.size.n();
    let mut data = sylvester(n);
    let norm = 1.0 / (n as f64).sqrt();
    for v in &mut data {
        *v *= norm;
    }
    if let HadamardVariant::Randomized { seed } = spec.variant {
        let d = sign_diagonal(n, seed);
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] *= d[j];
            }
        }
    }
    HadamardMatrix { n, data }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

fn check_axis(x: &Matrix, axis: Axis, n: usize) -> Result<()> {
    let len = match axis {
        Axis::Rows => x.rows(),
        Axis::Cols => x.cols(),
    };
    if !len.is_multiple_of(n) {
        return Err(Error::AxisNotDivisible { len, size: n });
    }
    Ok(())
}

/// Dense tiled application of the rotation along `axis`.
pub fn apply_rotation(x: &Matrix, spec: &HadamardSpec, axis: Axis) -> Result<Matrix> {
    let h = build_hadamard(spec);
    let n = h.n();
    check_axis(x, axis, n)?;
    let (rows, cols) = x.shape();
    let mut out = Matrix::zeros(rows, cols);
    match axis {
        Axis::Cols => {
            for r in 0..rows {
                for t in 0..cols / n {
                    let base = t * n;
                    for j in 0..n {
                        let mut acc = 0.0;
                        for k in 0..n {
                            acc += x.get(r, base + k) * h.entry(k, j);
                        }
                        out.set(r, base + j, acc);
                    }
                }
            }
        }
        Axis::Rows => {
            for t in 0..rows / n {
                let base = t * n;
                for c in 0..cols {
                    for i in 0..n {
                        let mut acc = 0.0;
                        for k in 0..n {
                            acc += h.entry(i, k) * x.get(base + k, c);
                        }
                        out.set(base + i, c, acc);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// In-place fast Walsh–Hadamard butterfly (unnormalized, natural order).
/// Equals the Sylvester matrix action because both follow `H_2^{⊗k}`.
fn fwht_in_place(seg: &mut [f64]) {
    let n = seg.len();
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (seg[j], seg[j + h]);
                seg[j] = a + b;
                seg[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// O(n log n) tiled application. Summation order differs from the dense
/// path, so results agree only to within `1e-10 * max_abs(x)` rather than
/// bit-exactly.
pub fn fast_apply(x: &Matrix, spec: &HadamardSpec, axis: Axis) -> Result<Matrix> {
    let n = spec.size.n();
    check_axis(x, axis, n)?;
    let norm = 1.0 / (n as f64).sqrt();
    let signs = match spec.variant {
        HadamardVariant::Deterministic => None,
        HadamardVariant::Randomized { seed } => Some(sign_diagonal(n, seed)),
    };
    let (rows, cols) = x.shape();
    let mut out = x.clone();
    let mut seg = vec![0.0; n];
    match axis {
        Axis::Cols => {
            // row segment v -> (v^T H) D: butterfly first, then signs
            for r in 0..rows {
                let row = out.row_mut(r);
                for t in 0..cols / n {
                    let tile = &mut row[t * n..(t + 1) * n];
                    fwht_in_place(tile);
                    match &signs {
                        Some(d) => {
                            for (v, s) in tile.iter_mut().zip(d) {
                                *v *= norm * s;
                            }
                        }
                        None => tile.iter_mut().for_each(|v| *v *= norm),
                    }
                }
            }
        }
        Axis::Rows => {
            // column segment v -> H (D v): signs first, then butterfly
            for t in 0..rows / n {
                let base = t * n;
                for c in 0..cols {
                    for (k, v) in seg.iter_mut().enumerate() {
                        *v = out.get(base + k, c);
                    }
                    if let Some(d) = &signs {
                        for (v, s) in seg.iter_mut().zip(d) {
                            *v *= s;
                        }
                    }
                    fwht_in_place(&mut seg);
                    for (i, v) in seg.iter().enumerate() {
                        out.set(base + i, c, v * norm);
                    }
                }
            }
        }
    }
    Ok(out)
}
