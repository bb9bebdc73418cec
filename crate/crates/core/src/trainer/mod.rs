//! Desk-scale training harness for the stage-wise MXFP4 enablement ladder.
//!
//! A ladder holds one shared task/model/optimizer setup and a list of rows
//! that differ only in which GEMM paths run MXFP4 and which stabilizer is
//! active. The baseline (no MXFP4, no stabilizer) runs first; every row's
//! steps-to-target is compared against it to produce a step overhead.
//!
//! All randomness flows through [`SeedSchedule`], a counter-based
//! derivation from one master seed, so runs are reproducible and rows may
//! execute concurrently without changing any result.

pub mod data;
mod model;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::block_quant::QuantLayout;
use crate::error::{Error, Result};
use crate::hadamard::HadamardSize;
use crate::qgemm::GemmPath;
use crate::seeding;

pub use data::{generate_dataset, sample_batch, Batch, DataConfig, Dataset};
pub use model::{
    batch_loss, build_model, evaluate_loss, loss_and_gradients, train_step, ModelState,
    StepMetrics,
};

/// EMA coefficient applied to the validation-loss curve before the
/// steps-to-target crossing is detected.
pub const VAL_SMOOTHING_ALPHA: f64 = 0.25;

/// Fraction of the step budget at which an auto-calibrated target reads
/// the baseline's smoothed validation loss.
pub const AUTO_TARGET_FRACTION: f64 = 0.6;

/// Master seed plus the documented counter-based sub-seed derivation:
/// `derive(step, layer, path, purpose)` chains each label through a
/// splitmix64 mix, so every (step, layer, path, purpose) tuple owns an
/// independent reproducible stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedSchedule {
    master: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPurpose {
    Init,
    Batch,
    Rounding,
    HadamardSign,
}

impl SeedPurpose {
    fn label(self) -> u64 {
        match self {
            SeedPurpose::Init => 1,
            SeedPurpose::Batch => 2,
            SeedPurpose::Rounding => 3,
            SeedPurpose::HadamardSign => 4,
        }
    }
}

impl SeedSchedule {
    pub fn new(master: u64) -> Self {
        SeedSchedule { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn derive(
        &self,
        step: u64,
        layer: usize,
        path: Option<GemmPath>,
        purpose: SeedPurpose,
    ) -> u64 {
        let path_label = match path {
            None => 0,
            Some(GemmPath::Fprop) => 1,
            Some(GemmPath::Dgrad) => 2,
            Some(GemmPath::Wgrad) => 3,
        };
        seeding::derive_seed(self.master, step, layer as u64, path_label, purpose.label())
    }
}

/// Which GEMM paths run MXFP4; the rest run the baseline numeric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PathSet {
    pub fprop: bool,
    pub dgrad: bool,
    pub wgrad: bool,
}

impl PathSet {
    pub fn none() -> Self {
        PathSet::default()
    }

    pub fn of(fprop: bool, dgrad: bool, wgrad: bool) -> Self {
        PathSet { fprop, dgrad, wgrad }
    }

    pub fn all() -> Self {
        PathSet::of(true, true, true)
    }

    pub fn contains(&self, path: GemmPath) -> bool {
        match path {
            GemmPath::Fprop => self.fprop,
            GemmPath::Dgrad => self.dgrad,
            GemmPath::Wgrad => self.wgrad,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.fprop || self.dgrad || self.wgrad)
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.fprop {
            out.push("fprop");
        }
        if self.dgrad {
            out.push("dgrad");
        }
        if self.wgrad {
            out.push("wgrad");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stabilizer {
    None,
    StochasticRounding,
    DetHadamard(HadamardSize),
    RandHadamard(HadamardSize),
}

impl Stabilizer {
    pub fn hadamard_size(&self) -> Option<HadamardSize> {
        match self {
            Stabilizer::DetHadamard(s) | Stabilizer::RandHadamard(s) => Some(*s),
            _ => None,
        }
    }
}

/// Numeric used by paths that are not enabled for MXFP4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineNumeric {
    Exact,
    Fp8Sim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Tanh,
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Layer widths from input to output; depth = widths.len() - 1.
    pub widths: Vec<usize>,
    pub nonlinearity: Nonlinearity,
    /// Adds skip connections around hidden layers of equal width.
    pub residual: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptMethod {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub method: OptMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TargetLoss {
    /// Calibrate as the baseline's smoothed validation loss at
    /// `AUTO_TARGET_FRACTION` of the step budget.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceConfig {
    /// A validation loss above `factor * initial` classifies the run as
    /// diverged.
    pub loss_blowup_factor: f64,
    /// Abort the run at the first non-finite training loss.
    pub nan_abort: bool,
}

/// Per-operand-role quantization layouts. Row-wise for activations and
/// gradients, 2-D blocks for weights, both overridable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutPolicy {
    pub activation: QuantLayout,
    pub weight: QuantLayout,
}

impl Default for LayoutPolicy {
    fn default() -> Self {
        LayoutPolicy {
            activation: QuantLayout::Row1x32,
            weight: QuantLayout::Block32x32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderConfig {
    pub mx_paths: PathSet,
    pub stabilizer: Stabilizer,
    pub baseline_numeric: BaselineNumeric,
    pub model: ModelConfig,
    pub data: DataConfig,
    pub optimizer: OptimizerConfig,
    pub layouts: LayoutPolicy,
    pub target_loss: TargetLoss,
    pub max_steps: u64,
    /// Validation-loss cadence in steps.
    pub eval_every: u64,
    pub divergence: DivergenceConfig,
}

impl LadderConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.model.widths;
        if w.len() < 2 {
            return Err(Error::InvalidConfig(
                "model needs at least one layer (two widths)".into(),
            ));
        }
        if w.contains(&0) {
            return Err(Error::InvalidConfig("zero layer width".into()));
        }
        if self.optimizer.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if !self.optimizer.learning_rate.is_finite() || self.optimizer.learning_rate < 0.0 {
            return Err(Error::InvalidConfig(
                "learning_rate must be finite and >= 0".into(),
            ));
        }
        if self.max_steps == 0 || self.eval_every == 0 {
            return Err(Error::InvalidConfig(
                "max_steps and eval_every must be positive".into(),
            ));
        }
        if self.divergence.loss_blowup_factor <= 1.0 {
            return Err(Error::InvalidConfig(
                "loss_blowup_factor must exceed 1".into(),
            ));
        }
        if self.data.train_samples == 0 || self.data.val_samples == 0 {
            return Err(Error::InvalidConfig("dataset must be non-empty".into()));
        }
        if let TargetLoss::Fixed(t) = self.target_loss {
            if !t.is_finite() {
                return Err(Error::InvalidConfig(
                    "fixed target_loss must be finite".into(),
                ));
            }
        }
        if let Some(size) = self.stabilizer.hadamard_size() {
            let n = size.n();
            // every rotated contraction axis: layer widths (fprop/dgrad)
            // and the token axis (wgrad)
            for &width in w {
                if !width.is_multiple_of(n) {
                    return Err(Error::InvalidConfig(format!(
                        "width {width} is not a multiple of the Hadamard size {n}"
                    )));
                }
            }
            if !self.optimizer.batch_size.is_multiple_of(n) {
                return Err(Error::InvalidConfig(format!(
                    "batch_size {} is not a multiple of the Hadamard size {n}",
                    self.optimizer.batch_size
                )));
            }
        }
        Ok(())
    }

    /// Closed-form parameter count of the configured model.
    pub fn param_count(&self) -> usize {
        self.model.widths.windows(2).map(|p| p[0] * p[1]).sum()
    }

    fn baseline(&self) -> LadderConfig {
        LadderConfig {
            mx_paths: PathSet::none(),
            stabilizer: Stabilizer::None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub step: u64,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceReason {
    NanLoss,
    LossBlowup,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Verdict {
    Converged { steps_to_target: u64 },
    DidNotConverge { reason: DivergenceReason },
}

impl Verdict {
    pub fn steps_to_target(&self) -> Option<u64> {
        match self {
            Verdict::Converged { steps_to_target } => Some(*steps_to_target),
            Verdict::DidNotConverge { .. } => None,
        }
    }

    pub fn converged(&self) -> bool {
        matches!(self, Verdict::Converged { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub verdict: Verdict,
    pub target_loss: f64,
    /// (step, train loss, validation loss) at every eval point.
    pub curve: Vec<LossPoint>,
    /// `steps / baseline_steps - 1`; None when either run did not converge.
    pub overhead_vs_baseline: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderResult {
    pub target_loss: f64,
    pub baseline: RunResult,
    pub rows: Vec<RunResult>,
}

/// EMA of the validation losses with [`VAL_SMOOTHING_ALPHA`], seeded at
/// the first point.
pub fn smoothed_val_curve(curve: &[LossPoint]) -> Vec<f64> {
    let mut out = Vec::with_capacity(curve.len());
    let mut ema = None;
    for p in curve {
        let next = match ema {
            None => p.val_loss,
            Some(prev) => VAL_SMOOTHING_ALPHA * p.val_loss + (1.0 - VAL_SMOOTHING_ALPHA) * prev,
        };
        ema = Some(next);
        out.push(next);
    }
    out
}

/// Classifies a loss curve. Events are checked in curve order: a
/// non-finite loss wins, then a raw validation blowup past
/// `factor * initial`, then the first smoothed crossing of the target;
/// a curve that ends without any of these timed out.
pub fn detect_divergence(curve: &[LossPoint], target_loss: f64, cfg: &LadderConfig) -> Verdict {
    let mut ema: Option<f64> = None;
    let mut initial_val = None;
    for p in curve {
        if !p.train_loss.is_finite() || !p.val_loss.is_finite() {
            return Verdict::DidNotConverge {
                reason: DivergenceReason::NanLoss,
            };
        }
        let init = *initial_val.get_or_insert(p.val_loss);
        if p.val_loss > cfg.divergence.loss_blowup_factor * init {
            return Verdict::DidNotConverge {
                reason: DivergenceReason::LossBlowup,
            };
        }
        let next = match ema {
            None => p.val_loss,
            Some(prev) => VAL_SMOOTHING_ALPHA * p.val_loss + (1.0 - VAL_SMOOTHING_ALPHA) * prev,
        };
        ema = Some(next);
        if next <= target_loss {
            return Verdict::Converged {
                steps_to_target: p.step,
            };
        }
    }
    Verdict::DidNotConverge {
        reason: DivergenceReason::Timeout,
    }
}

enum StopCause {
    TargetCrossed,
    NanLoss,
    Blowup,
}

/// Runs one config for up to `step_budget` steps, recording eval points at
/// step 0 and every `eval_every` steps, stopping early at a smoothed
/// target crossing, a validation blowup, or (per config) a NaN loss.
fn run_curve(
    cfg: &LadderConfig,
    master_seed: u64,
    step_budget: u64,
    early_target: Option<f64>,
) -> Result<Vec<LossPoint>> {
    let ds = generate_dataset(&cfg.data, &cfg.model.widths);
    let mut state = build_model(cfg, master_seed)?;
    let schedule = SeedSchedule::new(master_seed);
    let mut curve: Vec<LossPoint> = Vec::new();

    let mut ema: Option<f64> = None;
    let mut initial_val: Option<f64> = None;
    let note = |curve: &mut Vec<LossPoint>,
                    point: LossPoint,
                    ema: &mut Option<f64>,
                    initial: &mut Option<f64>|
     -> Option<StopCause> {
        curve.push(point);
        if !point.train_loss.is_finite() || !point.val_loss.is_finite() {
            return Some(StopCause::NanLoss);
        }
        let init = *initial.get_or_insert(point.val_loss);
        if point.val_loss > cfg.divergence.loss_blowup_factor * init {
            return Some(StopCause::Blowup);
        }
        let next = match *ema {
            None => point.val_loss,
            Some(prev) => VAL_SMOOTHING_ALPHA * point.val_loss + (1.0 - VAL_SMOOTHING_ALPHA) * prev,
        };
        *ema = Some(next);
        if let Some(t) = early_target {
            if next <= t {
                return Some(StopCause::TargetCrossed);
            }
        }
        None
    };

    // step-0 point: loss of the first batch before any update
    let batch0 = sample_batch(
        &ds,
        cfg.optimizer.batch_size,
        schedule.derive(0, 0, None, SeedPurpose::Batch),
    );
    let train0 = batch_loss(&state, &batch0, cfg)?;
    let val0 = evaluate_loss(&state, cfg, &ds.val_inputs, &ds.val_targets)?;
    let point0 = LossPoint {
        step: 0,
        train_loss: train0,
        val_loss: val0,
    };
    match note(&mut curve, point0, &mut ema, &mut initial_val) {
        Some(StopCause::NanLoss) if !cfg.divergence.nan_abort => {}
        Some(_) => return Ok(curve),
        None => {}
    }

    for step in 0..step_budget {
        let batch = sample_batch(
            &ds,
            cfg.optimizer.batch_size,
            schedule.derive(step, 0, None, SeedPurpose::Batch),
        );
        let metrics = train_step(&mut state, &batch, cfg)?;
        let completed = step + 1;
        if !metrics.loss.is_finite() {
            curve.push(LossPoint {
                step: completed,
                train_loss: metrics.loss,
                val_loss: f64::NAN,
            });
            if cfg.divergence.nan_abort {
                return Ok(curve);
            }
            continue;
        }
        if completed.is_multiple_of(cfg.eval_every) {
            let val = evaluate_loss(&state, cfg, &ds.val_inputs, &ds.val_targets)?;
            let point = LossPoint {
                step: completed,
                train_loss: metrics.loss,
                val_loss: val,
            };
            match note(&mut curve, point, &mut ema, &mut initial_val) {
                Some(StopCause::NanLoss) if !cfg.divergence.nan_abort => {}
                Some(_) => return Ok(curve),
                None => {}
            }
        }
    }
    Ok(curve)
}

/// Runs one config to a resolved verdict. A fixed target stops at the
/// first smoothed crossing; an auto target runs the calibration prefix of
/// the budget and reads the target off its own smoothed curve.
pub fn run_single(cfg: &LadderConfig, master_seed: u64) -> Result<RunResult> {
    cfg.validate()?;
    match cfg.target_loss {
        TargetLoss::Fixed(target) => {
            let curve = run_curve(cfg, master_seed, cfg.max_steps, Some(target))?;
            let verdict = detect_divergence(&curve, target, cfg);
            Ok(RunResult {
                verdict,
                target_loss: target,
                curve,
                overhead_vs_baseline: None,
            })
        }
        TargetLoss::Auto => {
            let cal_budget = ((cfg.max_steps as f64 * AUTO_TARGET_FRACTION).floor() as u64).max(1);
            let curve = run_curve(cfg, master_seed, cal_budget, None)?;
            let smoothed = smoothed_val_curve(&curve);
            let target = smoothed.last().copied().unwrap_or(f64::INFINITY);
            let verdict = detect_divergence(&curve, target, cfg);
            Ok(RunResult {
                verdict,
                target_loss: target,
                curve,
                overhead_vs_baseline: None,
            })
        }
    }
}

fn overhead(row_steps: Option<u64>, base_steps: Option<u64>) -> Option<f64> {
    match (row_steps, base_steps) {
        (Some(r), Some(b)) if b > 0 => Some(r as f64 / b as f64 - 1.0),
        _ => None,
    }
}

fn check_shared_settings(rows: &[LadderConfig]) -> Result<()> {
    let first = &rows[0];
    for (i, row) in rows.iter().enumerate().skip(1) {
        let same = row.model == first.model
            && row.data == first.data
            && row.optimizer == first.optimizer
            && row.baseline_numeric == first.baseline_numeric
            && row.target_loss == first.target_loss
            && row.max_steps == first.max_steps
            && row.eval_every == first.eval_every
            && row.divergence == first.divergence;
        if !same {
            return Err(Error::InvalidConfig(format!(
                "ladder row {i} does not share the baseline settings"
            )));
        }
    }
    Ok(())
}

/// Runs the baseline followed by every row, computing each row's step
/// overhead against the baseline. Rows may run concurrently on up to
/// `jobs` threads; results are merged by row index, and since every
/// random stream is derived from `(master_seed, step, layer, path)`,
/// concurrency cannot change any number.
pub fn run_ladder(rows: &[LadderConfig], master_seed: u64, jobs: usize) -> Result<LadderResult> {
    if rows.is_empty() {
        return Err(Error::InvalidConfig("empty ladder".into()));
    }
    for row in rows {
        row.validate()?;
    }
    check_shared_settings(rows)?;

    let baseline_cfg = rows[0].baseline();
    let mut baseline = run_single(&baseline_cfg, master_seed)?;
    let target = baseline.target_loss;
    let base_steps = baseline.verdict.steps_to_target();
    baseline.overhead_vs_baseline = overhead(base_steps, base_steps);

    let fixed: Vec<LadderConfig> = rows
        .iter()
        .map(|r| LadderConfig {
            target_loss: TargetLoss::Fixed(target),
            ..r.clone()
        })
        .collect();

    let n = fixed.len();
    let slots: Mutex<Vec<Option<Result<RunResult>>>> = Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = jobs.max(1).min(n);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let result = run_single(&fixed[i], master_seed);
                slots.lock().expect("ladder worker poisoned")[i] = Some(result);
            });
        }
    });

    let mut results = Vec::with_capacity(n);
    for (i, slot) in slots
        .into_inner()
        .expect("ladder slots")
        .into_iter()
        .enumerate()
    {
        let mut r = slot.unwrap_or_else(|| panic!("ladder row {i} never ran"))?;
        r.overhead_vs_baseline = overhead(r.verdict.steps_to_target(), base_steps);
        results.push(r);
    }
    Ok(LadderResult {
        target_loss: target,
        baseline,
        rows: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> LadderConfig {
        LadderConfig {
            mx_paths: PathSet::none(),
            stabilizer: Stabilizer::None,
            baseline_numeric: BaselineNumeric::Exact,
            model: ModelConfig {
                widths: vec![16, 16, 8],
                nonlinearity: Nonlinearity::Tanh,
                residual: false,
            },
            data: DataConfig {
                seed: 3,
                train_samples: 256,
                val_samples: 64,
                gain_sigma: 0.5,
                outlier_prob: 0.0,
                outlier_gain: 1.0,
                noise_std: 0.01,
            },
            optimizer: OptimizerConfig {
                learning_rate: 0.05,
                batch_size: 16,
                method: OptMethod::Sgd { momentum: 0.9 },
            },
            layouts: LayoutPolicy::default(),
            target_loss: TargetLoss::Auto,
            max_steps: 100,
            eval_every: 5,
            divergence: DivergenceConfig {
                loss_blowup_factor: 10.0,
                nan_abort: true,
            },
        }
    }

    #[test]
    fn config_validation_catches_degenerate_models() {
        let mut cfg = tiny_cfg();
        cfg.model.widths = vec![16];
        assert!(cfg.validate().is_err());
        cfg.model.widths = vec![16, 0, 8];
        assert!(cfg.validate().is_err());
        cfg.model.widths = vec![16, 16, 8];
        assert!(cfg.validate().is_ok());
        // hadamard divisibility on widths and the token axis
        cfg.stabilizer = Stabilizer::DetHadamard(HadamardSize::H32);
        assert!(cfg.validate().is_err()); // widths not multiples of 32
        cfg.model.widths = vec![32, 32, 32];
        assert!(cfg.validate().is_err()); // batch 16 not multiple of 32
        cfg.optimizer.batch_size = 32;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn param_count_closed_form() {
        let cfg = tiny_cfg();
        assert_eq!(cfg.param_count(), 16 * 16 + 16 * 8);
        let state = build_model(&cfg, 1).unwrap();
        assert_eq!(state.param_count(), cfg.param_count());
    }

    #[test]
    fn detect_divergence_cases() {
        let cfg = tiny_cfg();
        let mk = |vals: &[f64]| -> Vec<LossPoint> {
            vals.iter()
                .enumerate()
                .map(|(i, &v)| LossPoint {
                    step: i as u64 * 5,
                    train_loss: v,
                    val_loss: v,
                })
                .collect()
        };
        // monotone decrease reaching the target reports the first crossing
        let curve = mk(&[1.0, 0.8, 0.6, 0.4, 0.2]);
        let v = detect_divergence(&curve, 0.5, &cfg);
        // EMA(0.25): 1.0, 0.95, 0.8625, 0.7469, 0.6102 — no crossing yet
        assert_eq!(
            v,
            Verdict::DidNotConverge {
                reason: DivergenceReason::Timeout
            }
        );
        // EMA: 1.0, 0.875, 0.70625, 0.5547, 0.4285, 0.3264, 0.2473 — first
        // crossing of 0.3 at the seventh point, step 30
        let curve = mk(&[1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01]);
        match detect_divergence(&curve, 0.3, &cfg) {
            Verdict::Converged { steps_to_target } => assert_eq!(steps_to_target, 30),
            other => panic!("expected convergence, got {other:?}"),
        }
        // NaN anywhere dominates
        let mut curve = mk(&[1.0, 0.5, 0.2]);
        curve[1].train_loss = f64::NAN;
        assert_eq!(
            detect_divergence(&curve, 0.0, &cfg),
            Verdict::DidNotConverge {
                reason: DivergenceReason::NanLoss
            }
        );
        // blowup past factor * initial
        let curve = mk(&[1.0, 2.0, 11.0]);
        assert_eq!(
            detect_divergence(&curve, 0.0, &cfg),
            Verdict::DidNotConverge {
                reason: DivergenceReason::LossBlowup
            }
        );
        // flat curve at budget end
        let curve = mk(&[1.0; 10]);
        assert_eq!(
            detect_divergence(&curve, 0.5, &cfg),
            Verdict::DidNotConverge {
                reason: DivergenceReason::Timeout
            }
        );
    }

    #[test]
    fn smoothing_is_a_pure_function_of_the_curve() {
        let curve: Vec<LossPoint> = (0..20)
            .map(|i| LossPoint {
                step: i,
                train_loss: 1.0 / (i + 1) as f64,
                val_loss: 1.0 / (i + 1) as f64,
            })
            .collect();
        assert_eq!(smoothed_val_curve(&curve), smoothed_val_curve(&curve));
        let mut ema = curve[0].val_loss;
        for (i, p) in curve.iter().enumerate().skip(1) {
            ema = VAL_SMOOTHING_ALPHA * p.val_loss + (1.0 - VAL_SMOOTHING_ALPHA) * ema;
            assert_eq!(smoothed_val_curve(&curve)[i], ema);
        }
    }
}
