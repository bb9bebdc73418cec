//! Quantization-error probe: builds a synthetic tensor, quantizes it with
//! and without a Hadamard rotation, and prints the error stats side by
//! side. Demonstrates how concentrated outliers dominate a block's
//! quantization range and how rotation disperses them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use mxladder_core::block_quant::{quant_error_stats, quantize_tensor, QuantErrorStats, QuantLayout};
use mxladder_core::fp4::RoundingMode;
use mxladder_core::hadamard::{fast_apply, Axis, HadamardSpec};
use mxladder_core::matrix::Matrix;

use crate::CliError;

#[derive(Debug, Clone, Copy)]
pub enum ProbeDist {
    Gaussian,
    Uniform,
    Zeros,
}

pub struct ProbeSpec {
    pub rows: usize,
    pub cols: usize,
    pub dist: ProbeDist,
    pub outlier_mag: f64,
    pub outliers_per_block: usize,
    pub layout: QuantLayout,
    pub hadamard: Option<HadamardSpec>,
    pub seed: u64,
}

pub struct ProbeReport {
    pub plain: QuantErrorStats,
    pub rotated: Option<QuantErrorStats>,
}

fn build_tensor(spec: &ProbeSpec) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x = match spec.dist {
        ProbeDist::Gaussian => {
            Matrix::from_fn(spec.rows, spec.cols, |_, _| rng.sample(StandardNormal))
        }
        ProbeDist::Uniform => {
            Matrix::from_fn(spec.rows, spec.cols, |_, _| rng.random_range(-1.0..1.0))
        }
        ProbeDist::Zeros => Matrix::zeros(spec.rows, spec.cols),
    };
    if spec.outliers_per_block > 0 && !matches!(spec.dist, ProbeDist::Zeros) {
        // scale `outliers_per_block` elements of every 32-wide row block to
        // outlier_mag times the block's median magnitude
        for r in 0..spec.rows {
            for b in 0..spec.cols / 32 {
                let mut mags: Vec<f64> =
                    (0..32).map(|i| x.get(r, b * 32 + i).abs()).collect();
                mags.sort_by(f64::total_cmp);
                let median = mags[16].max(1e-12);
                for _ in 0..spec.outliers_per_block {
                    let pos = b * 32 + rng.random_range(0..32usize);
                    let sign = if rng.random_range(0..2) == 0 { 1.0 } else { -1.0 };
                    x.set(r, pos, sign * spec.outlier_mag * median);
                }
            }
        }
    }
    x
}

pub fn run_probe(spec: &ProbeSpec) -> Result<(ProbeReport, Matrix), CliError> {
    let x = build_tensor(spec);
    let stats = |m: &Matrix| -> Result<QuantErrorStats, CliError> {
        let q = quantize_tensor(m, spec.layout, &mut RoundingMode::NearestEven)
            .map_err(|e| CliError::runtime(format!("quantize: {e}")))?;
        quant_error_stats(m, &q).map_err(|e| CliError::runtime(format!("stats: {e}")))
    };
    let plain = stats(&x)?;
    let rotated = match &spec.hadamard {
        Some(h) => {
            let xr = fast_apply(&x, h, Axis::Cols)
                .map_err(|e| CliError::usage(format!("rotation: {e}")))?;
            Some(stats(&xr)?)
        }
        None => None,
    };
    Ok((ProbeReport { plain, rotated }, x))
}

fn worst_block(stats: &QuantErrorStats) -> f64 {
    stats.per_block_mse.iter().copied().fold(0.0, f64::max)
}

pub fn render_report(spec: &ProbeSpec, report: &ProbeReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "quant probe: {}x{} {:?} layout {:?} outliers {}x{} seed {}\n",
        spec.rows,
        spec.cols,
        spec.dist,
        spec.layout,
        spec.outliers_per_block,
        spec.outlier_mag,
        spec.seed
    ));
    match &report.rotated {
        Some(rot) => {
            out.push_str(&format!("{:<16} {:>14} {:>14}\n", "", "unrotated", "rotated"));
            out.push_str(&format!(
                "{:<16} {:>14.6e} {:>14.6e}\n",
                "mse", report.plain.mse, rot.mse
            ));
            out.push_str(&format!(
                "{:<16} {:>14.6e} {:>14.6e}\n",
                "max_abs_err", report.plain.max_abs_err, rot.max_abs_err
            ));
            out.push_str(&format!(
                "{:<16} {:>14.6e} {:>14.6e}\n",
                "worst_block_mse",
                worst_block(&report.plain),
                worst_block(rot)
            ));
        }
        None => {
            out.push_str(&format!("{:<16} {:>14}\n", "", "unrotated"));
            out.push_str(&format!("{:<16} {:>14.6e}\n", "mse", report.plain.mse));
            out.push_str(&format!(
                "{:<16} {:>14.6e}\n",
                "max_abs_err", report.plain.max_abs_err
            ));
            out.push_str(&format!(
                "{:<16} {:>14.6e}\n",
                "worst_block_mse",
                worst_block(&report.plain)
            ));
        }
    }
    out
}
