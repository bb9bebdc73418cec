//! Run artifacts: per-run CSV curves, the ladder summary JSON, and a
//! plain-text table of the ladder rows.
//!
//! Everything written here is a pure function of the config file bytes and
//! the master seed, so re-running a ladder reproduces the artifact
//! directory byte for byte.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use mxladder_core::trainer::{
    LadderConfig, LadderResult, RunResult, Stabilizer, Verdict,
};

use crate::CliError;

/// One summary line per run, shared by the JSON and the text table.
#[derive(Debug, Serialize)]
pub struct RowSummary {
    pub label: String,
    pub stabilizer: String,
    pub hadamard: Option<String>,
    pub mx_paths: Vec<String>,
    pub verdict: String,
    pub divergence_reason: Option<String>,
    pub steps_to_target: Option<u64>,
    pub overhead_vs_baseline: Option<f64>,
    pub final_val_loss: Option<f64>,
    pub curve_csv: String,
}

#[derive(Debug, Serialize)]
pub struct LadderSummary {
    pub config_hash: String,
    pub master_seed: u64,
    pub target_loss: f64,
    pub baseline: RowSummary,
    pub rows: Vec<RowSummary>,
}

pub fn config_hash(config_text: &str, seed: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config_text.as_bytes());
    hasher.update(seed.to_le_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn stabilizer_names(stab: &Stabilizer) -> (String, Option<String>) {
    match stab {
        Stabilizer::None => ("none".into(), None),
        Stabilizer::StochasticRounding => ("stochastic_rounding".into(), None),
        Stabilizer::DetHadamard(s) => ("det_hadamard".into(), Some(format!("h{}", s.n()))),
        Stabilizer::RandHadamard(s) => ("rand_hadamard".into(), Some(format!("h{}", s.n()))),
    }
}

fn verdict_names(v: &Verdict) -> (String, Option<String>) {
    match v {
        Verdict::Converged { .. } => ("converged".into(), None),
        Verdict::DidNotConverge { reason } => (
            "did_not_converge".into(),
            Some(
                match reason {
                    mxladder_core::trainer::DivergenceReason::NanLoss => "nan_loss",
                    mxladder_core::trainer::DivergenceReason::LossBlowup => "loss_blowup",
                    mxladder_core::trainer::DivergenceReason::Timeout => "timeout",
                }
                .into(),
            ),
        ),
    }
}

fn row_summary(label: &str, cfg: &LadderConfig, result: &RunResult, csv_name: &str) -> RowSummary {
    let (stabilizer, hadamard) = stabilizer_names(&cfg.stabilizer);
    let (verdict, divergence_reason) = verdict_names(&result.verdict);
    RowSummary {
        label: label.to_string(),
        stabilizer,
        hadamard,
        mx_paths: cfg.mx_paths.names().iter().map(|s| s.to_string()).collect(),
        verdict,
        divergence_reason,
        steps_to_target: result.verdict.steps_to_target(),
        overhead_vs_baseline: result.overhead_vs_baseline,
        final_val_loss: result
            .curve
            .iter()
            .rev()
            .find(|p| p.val_loss.is_finite())
            .map(|p| p.val_loss),
        curve_csv: csv_name.to_string(),
    }
}

fn write_curve_csv(path: &Path, result: &RunResult) -> Result<(), CliError> {
    let mut text = String::from("step,train_loss,val_loss\n");
    for p in &result.curve {
        text.push_str(&format!("{},{},{}\n", p.step, p.train_loss, p.val_loss));
    }
    fs::write(path, text).map_err(|e| CliError::runtime(format!("writing {path:?}: {e}")))
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

fn overhead_cell(result: &RunResult) -> String {
    match (&result.verdict, result.overhead_vs_baseline) {
        (Verdict::DidNotConverge { reason }, _) => format!(
            "Does Not Converge ({})",
            match reason {
                mxladder_core::trainer::DivergenceReason::NanLoss => "nan",
                mxladder_core::trainer::DivergenceReason::LossBlowup => "blowup",
                mxladder_core::trainer::DivergenceReason::Timeout => "timeout",
            }
        ),
        (_, Some(o)) => format!("{:+.1}%", o * 100.0),
        (_, None) => "n/a".into(),
    }
}

fn paths_cell(cfg: &LadderConfig, baseline_name: &str) -> String {
    if cfg.mx_paths.is_empty() {
        format!("None (all GEMMs {baseline_name})")
    } else {
        let names: Vec<String> = cfg
            .mx_paths
            .names()
            .iter()
            .map(|n| {
                let mut c = n.chars();
                c.next().map(|f| f.to_uppercase().collect::<String>() + c.as_str()).unwrap_or_default()
            })
            .collect();
        names.join(" + ")
    }
}

fn stabilizer_cell(stab: &Stabilizer) -> (String, String) {
    match stab {
        Stabilizer::None => ("None".into(), "--".into()),
        Stabilizer::StochasticRounding => ("Stochastic Rounding".into(), "--".into()),
        Stabilizer::DetHadamard(s) => ("Deterministic Hadamard".into(), format!("H{}", s.n())),
        Stabilizer::RandHadamard(s) => ("Randomized Hadamard".into(), format!("H{}", s.n())),
    }
}

/// Renders the ladder as a fixed-width text table with the columns
/// Stabilizer / Hadamard / MXFP4 paths / Step overhead.
pub fn render_table(
    configs: &[LadderConfig],
    result: &LadderResult,
    baseline_name: &str,
) -> String {
    let mut lines: Vec<[String; 4]> = Vec::new();
    lines.push([
        format!("{} Baseline", baseline_name.to_uppercase()),
        "--".into(),
        format!("None (all GEMMs {baseline_name})"),
        overhead_cell(&result.baseline),
    ]);
    for (cfg, row) in configs.iter().zip(&result.rows) {
        let (stab, had) = stabilizer_cell(&cfg.stabilizer);
        lines.push([stab, had, paths_cell(cfg, baseline_name), overhead_cell(row)]);
    }
    let header = [
        "Stabilizer".to_string(),
        "Hadamard".to_string(),
        "MXFP4 paths".to_string(),
        "Step overhead".to_string(),
    ];
    let mut width = [0usize; 4];
    for row in std::iter::once(&header).chain(&lines) {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let fmt_row = |row: &[String; 4]| {
        format!(
            "{:<w0$}  {:<w1$}  {:<w2$}  {:<w3$}",
            row[0],
            row[1],
            row[2],
            row[3],
            w0 = width[0],
            w1 = width[1],
            w2 = width[2],
            w3 = width[3],
        )
        .trim_end()
        .to_string()
    };
    let mut out = String::new();
    out.push_str(&fmt_row(&header));
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 6));
    out.push('\n');
    out.push_str(&format!("target validation loss: {}\n", result.target_loss));
    for line in &lines {
        out.push_str(&fmt_row(line));
        out.push('\n');
    }
    out
}

/// Writes the whole artifact directory: one CSV per run (baseline first),
/// `summary.json`, and `table.txt`. Returns the summary for display.
pub fn write_artifacts(
    out_dir: &Path,
    config_text: &str,
    master_seed: u64,
    labels: &[String],
    configs: &[LadderConfig],
    result: &LadderResult,
) -> Result<LadderSummary, CliError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::runtime(format!("creating {out_dir:?}: {e}")))?;

    let baseline_csv = "baseline.csv".to_string();
    write_curve_csv(&out_dir.join(&baseline_csv), &result.baseline)?;
    let baseline_cfg = LadderConfig {
        mx_paths: mxladder_core::trainer::PathSet::none(),
        stabilizer: Stabilizer::None,
        ..configs[0].clone()
    };
    let baseline_name = match configs[0].baseline_numeric {
        mxladder_core::trainer::BaselineNumeric::Exact => "exact",
        mxladder_core::trainer::BaselineNumeric::Fp8Sim => "fp8",
    };
    let mut summary = LadderSummary {
        config_hash: config_hash(config_text, master_seed),
        master_seed,
        target_loss: result.target_loss,
        baseline: row_summary("baseline", &baseline_cfg, &result.baseline, &baseline_csv),
        rows: Vec::with_capacity(result.rows.len()),
    };
    for (i, ((label, cfg), row)) in labels.iter().zip(configs).zip(&result.rows).enumerate() {
        let csv_name = format!("row_{i:02}_{}.csv", sanitize(label));
        write_curve_csv(&out_dir.join(&csv_name), row)?;
        summary.rows.push(row_summary(label, cfg, row, &csv_name));
    }

    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::runtime(format!("serializing summary: {e}")))?;
    fs::write(out_dir.join("summary.json"), json.as_bytes())
        .map_err(|e| CliError::runtime(format!("writing summary.json: {e}")))?;

    let table = render_table(configs, result, baseline_name);
    fs::write(out_dir.join("table.txt"), table.as_bytes())
        .map_err(|e| CliError::runtime(format!("writing table.txt: {e}")))?;
    Ok(summary)
}
