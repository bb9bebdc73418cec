//! Rotation micro-benchmark: dense vs fast tiled application for H16 and
//! H32. Informational only; throughput is hardware-dependent, so nothing
//! here is asserted.

use std::time::Instant;

use serde::Serialize;

use mxladder_core::hadamard::{apply_rotation, fast_apply, Axis, HadamardSize, HadamardSpec};
use mxladder_core::matrix::Matrix;

#[derive(Debug, Serialize)]
pub struct BenchVariant {
    pub name: String,
    pub melems_per_sec: f64,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub rows: usize,
    pub cols: usize,
    pub iters: usize,
    pub variants: Vec<BenchVariant>,
}

pub fn run_bench(rows: usize, cols: usize, iters: usize) -> BenchReport {
    let x = Matrix::from_fn(rows, cols, |r, c| ((r * cols + c) as f64 * 0.61).sin());
    let elems = (rows * cols * iters) as f64;
    let mut variants = Vec::new();
    for size in [HadamardSize::H16, HadamardSize::H32] {
        let spec = HadamardSpec::deterministic(size);
        type ApplyFn = fn(&Matrix, &HadamardSpec, Axis) -> mxladder_core::Result<Matrix>;
        for (kind, f) in [
            ("dense", apply_rotation as ApplyFn),
            ("fast", fast_apply as ApplyFn),
        ] {
            let t0 = Instant::now();
            let mut sink = 0.0;
            for _ in 0..iters {
                let y = f(&x, &spec, Axis::Cols).expect("conforming bench shapes");
                sink += y.get(0, 0);
            }
            let dt = t0.elapsed().as_secs_f64().max(1e-12);
            std::hint::black_box(sink);
            variants.push(BenchVariant {
                name: format!("det{}_{kind}", size.n()),
                melems_per_sec: elems / dt / 1e6,
            });
        }
    }
    BenchReport {
        rows,
        cols,
        iters,
        variants,
    }
}

pub fn soft_warnings(report: &BenchReport) -> Vec<String> {
    let mut out = Vec::new();
    let rate = |name: &str| {
        report
            .variants
            .iter()
            .find(|v| v.name == name)
            .map(|v| v.melems_per_sec)
    };
    if let (Some(fast), Some(dense)) = (rate("det32_fast"), rate("det32_dense")) {
        if fast < dense {
            out.push(format!(
                "note: fast H32 apply ({fast:.1} Melem/s) measured below dense ({dense:.1} Melem/s) on this machine"
            ));
        }
    }
    out
}
