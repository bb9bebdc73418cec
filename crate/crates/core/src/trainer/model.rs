//! Manual-backprop linear-layer stack whose three GEMMs per layer are
//! routed through the quantized paths.
//!
//! Master weights and optimizer state stay in binary64; only GEMM
//! operands are quantized, and only on the paths the config enables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::qgemm::{self, GemmPath, Numeric, PathConfig, RoundingSelect};
use crate::trainer::data::Batch;
use crate::trainer::{
    BaselineNumeric, LadderConfig, Nonlinearity, OptMethod, SeedPurpose, SeedSchedule, Stabilizer,
};
use crate::hadamard::HadamardSpec;

#[derive(Debug, Clone)]
enum OptState {
    Sgd { velocity: Vec<Matrix> },
    Adam { m: Vec<Matrix>, v: Vec<Matrix>, t: u64 },
}

/// Model parameters plus optimizer state and the step counter that drives
/// the seed schedule.
#[derive(Debug, Clone)]
pub struct ModelState {
    schedule: SeedSchedule,
    step: u64,
    widths: Vec<usize>,
    weights: Vec<Matrix>,
    opt: OptState,
}

#[derive(Debug, Clone, Copy)]
pub struct StepMetrics {
    /// Training-batch loss before this step's update.
    pub loss: f64,
}

impl ModelState {
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.rows() * w.cols()).sum()
    }

    /// FNV-1a over the weight bit patterns; equal fingerprints mean
    /// bit-identical parameters.
    pub fn fingerprint(&self) -> u64 {
        let mut h = 0xCBF2_9CE4_8422_2325u64;
        for w in &self.weights {
            for &v in w.data() {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x1000_0000_01B3);
                }
            }
        }
        h
    }
}

/// Builds a model with deterministic seeded initialization: layer `l`
/// weights are `N(0, 1/fan_in)` from the `(step=0, layer=l)` init stream.
pub fn build_model(cfg: &LadderConfig, master_seed: u64) -> Result<ModelState> {
    cfg.validate()?;
    let widths = cfg.model.widths.clone();
    let schedule = SeedSchedule::new(master_seed);
    let mut weights = Vec::with_capacity(widths.len() - 1);
    for l in 0..widths.len() - 1 {
        let seed = schedule.derive(0, l, None, SeedPurpose::Init);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = 1.0 / (widths[l] as f64).sqrt();
        weights.push(Matrix::from_fn(widths[l + 1], widths[l], |_, _| {
            rng.sample::<f64, _>(StandardNormal) * std
        }));
    }
    let zeros_like: Vec<Matrix> = weights
        .iter()
        .map(|w| Matrix::zeros(w.rows(), w.cols()))
        .collect();
    let opt = match cfg.optimizer.method {
        OptMethod::Sgd { .. } => OptState::Sgd {
            velocity: zeros_like,
        },
        OptMethod::Adam { .. } => OptState::Adam {
            m: zeros_like.clone(),
            v: zeros_like,
            t: 0,
        },
    };
    Ok(ModelState {
        schedule,
        step: 0,
        widths,
        weights,
        opt,
    })
}

fn nonlin(kind: Nonlinearity, z: &Matrix) -> Matrix {
    match kind {
        Nonlinearity::Tanh => z.map(f64::tanh),
        Nonlinearity::Relu => z.map(|v| v.max(0.0)),
        Nonlinearity::Identity => z.clone(),
    }
}

/// Derivative of the nonlinearity expressed through its output.
fn nonlin_deriv(kind: Nonlinearity, h: f64) -> f64 {
    match kind {
        Nonlinearity::Tanh => 1.0 - h * h,
        Nonlinearity::Relu => {
            if h > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Nonlinearity::Identity => 1.0,
    }
}

/// The per-(step, layer, path) GEMM configuration. MXFP4 applies only to
/// paths in `mx_paths`; the stabilizer's rotation is injected before every
/// GEMM of the pipeline (it cancels in the product, so un-quantized paths
/// are unaffected up to roundoff); stochastic-rounding streams derive from
/// the seed schedule; the randomized sign diagonal is resampled once per
/// step and shared by all GEMMs of that step.
fn path_config(
    cfg: &LadderConfig,
    schedule: &SeedSchedule,
    step: u64,
    layer: usize,
    path: GemmPath,
) -> PathConfig {
    let numeric = if cfg.mx_paths.contains(path) {
        let (a_layout, b_layout) = match path {
            GemmPath::Fprop | GemmPath::Dgrad => (cfg.layouts.activation, cfg.layouts.weight),
            GemmPath::Wgrad => (cfg.layouts.activation, cfg.layouts.activation),
        };
        let rounding = match cfg.stabilizer {
            Stabilizer::StochasticRounding => RoundingSelect::Stochastic {
                seed: schedule.derive(step, layer, Some(path), SeedPurpose::Rounding),
            },
            _ => RoundingSelect::NearestEven,
        };
        Numeric::Mxfp4 {
            a_layout,
            b_layout,
            rounding,
        }
    } else {
        match cfg.baseline_numeric {
            BaselineNumeric::Exact => Numeric::Exact,
            BaselineNumeric::Fp8Sim => Numeric::Fp8Sim,
        }
    };
    let hadamard = match cfg.stabilizer {
        Stabilizer::DetHadamard(size) => Some(HadamardSpec::deterministic(size)),
        Stabilizer::RandHadamard(size) => Some(HadamardSpec::randomized(
            size,
            schedule.derive(step, 0, None, SeedPurpose::HadamardSign),
        )),
        _ => None,
    };
    PathConfig { numeric, hadamard }
}

struct ForwardPass {
    /// Layer inputs: acts[l] feeds layer l; acts[depth] is the prediction.
    acts: Vec<Matrix>,
    /// Nonlinearity outputs before any residual add (None for the last,
    /// linear, layer).
    hidden: Vec<Option<Matrix>>,
    loss: f64,
}

fn residual_at(cfg: &LadderConfig, layer: usize) -> bool {
    let widths = &cfg.model.widths;
    cfg.model.residual && layer + 2 < widths.len() && widths[layer] == widths[layer + 1]
}

fn forward(state: &ModelState, batch: &Batch, cfg: &LadderConfig) -> Result<ForwardPass> {
    let depth = state.weights.len();
    if batch.inputs.cols() != state.widths[0] {
        return Err(Error::ShapeMismatch(format!(
            "batch inputs {:?} vs model input width {}",
            batch.inputs.shape(),
            state.widths[0]
        )));
    }
    let mut acts = Vec::with_capacity(depth + 1);
    let mut hidden = Vec::with_capacity(depth);
    acts.push(batch.inputs.clone());
    for l in 0..depth {
        let pc = path_config(cfg, &state.schedule, state.step, l, GemmPath::Fprop);
        let z = qgemm::fprop(&acts[l], &state.weights[l], &pc)?;
        if l == depth - 1 {
            hidden.push(None);
            acts.push(z);
        } else {
            let h = nonlin(cfg.model.nonlinearity, &z);
            let a = if residual_at(cfg, l) {
                h.add(&acts[l])?
            } else {
                h.clone()
            };
            hidden.push(Some(h));
            acts.push(a);
        }
    }
    let pred = &acts[depth];
    let diff = pred.sub(&batch.targets)?;
    let n = (diff.rows() * diff.cols()) as f64;
    let loss = diff.data().iter().map(|d| d * d).sum::<f64>() / n;
    Ok(ForwardPass { acts, hidden, loss })
}

/// Mean-squared-error loss and the analytic weight gradients of one batch,
/// with every GEMM routed through the configured paths.
pub fn loss_and_gradients(
    state: &ModelState,
    batch: &Batch,
    cfg: &LadderConfig,
) -> Result<(f64, Vec<Matrix>)> {
    let depth = state.weights.len();
    let pass = forward(state, batch, cfg)?;
    let pred = &pass.acts[depth];
    let n = (pred.rows() * pred.cols()) as f64;
    // dL/d(prediction) for mean-squared error
    let mut g = pred.sub(&batch.targets)?.scale(2.0 / n);
    let mut grads: Vec<Matrix> = (0..depth).map(|_| Matrix::zeros(0, 0)).collect();
    for l in (0..depth).rev() {
        let dz = match &pass.hidden[l] {
            None => g.clone(),
            Some(h) => g.zip_with(h, |gv, hv| gv * nonlin_deriv(cfg.model.nonlinearity, hv))?,
        };
        let pc_w = path_config(cfg, &state.schedule, state.step, l, GemmPath::Wgrad);
        grads[l] = qgemm::wgrad(&dz, &pass.acts[l], &pc_w)?;
        if l > 0 {
            let pc_d = path_config(cfg, &state.schedule, state.step, l, GemmPath::Dgrad);
            let mut g_prev = qgemm::dgrad(&dz, &state.weights[l], &pc_d)?;
            if residual_at(cfg, l) {
                g_prev = g_prev.add(&g)?;
            }
            g = g_prev;
        }
    }
    Ok((pass.loss, grads))
}

/// Forward-only batch loss under the configured paths. Non-finite
/// activations report as a NaN loss rather than an error.
pub fn batch_loss(state: &ModelState, batch: &Batch, cfg: &LadderConfig) -> Result<f64> {
    match forward(state, batch, cfg) {
        Ok(pass) => Ok(pass.loss),
        Err(Error::NonFinite(_)) => Ok(f64::NAN),
        Err(e) => Err(e),
    }
}

/// Validation loss of the master weights, always in exact arithmetic with
/// no rotation, so the metric measures the model rather than the
/// quantization pipeline.
pub fn evaluate_loss(
    state: &ModelState,
    cfg: &LadderConfig,
    inputs: &Matrix,
    targets: &Matrix,
) -> Result<f64> {
    let depth = state.weights.len();
    let mut a = inputs.clone();
    for l in 0..depth {
        let z = a.matmul_nt(&state.weights[l])?;
        if l == depth - 1 {
            a = z;
        } else {
            let h = nonlin(cfg.model.nonlinearity, &z);
            a = if residual_at(cfg, l) { h.add(&a)? } else { h };
        }
    }
    let diff = a.sub(targets)?;
    Ok(diff.data().iter().map(|d| d * d).sum::<f64>() / (diff.rows() * diff.cols()) as f64)
}

fn apply_update(state: &mut ModelState, grads: &[Matrix], cfg: &LadderConfig) {
    let lr = cfg.optimizer.learning_rate;
    match (&mut state.opt, cfg.optimizer.method) {
        (OptState::Sgd { velocity }, OptMethod::Sgd { momentum }) => {
            for ((w, v), g) in state.weights.iter_mut().zip(velocity).zip(grads) {
                for i in 0..w.data().len() {
                    v.data_mut()[i] = momentum * v.data()[i] + g.data()[i];
                    w.data_mut()[i] -= lr * v.data()[i];
                }
            }
        }
        (OptState::Adam { m, v, t }, OptMethod::Adam { beta1, beta2, epsilon }) => {
            *t += 1;
            let t = *t as i32;
            let bc1 = 1.0 - beta1.powi(t);
            let bc2 = 1.0 - beta2.powi(t);
            for (((w, m), v), g) in state.weights.iter_mut().zip(m).zip(v).zip(grads) {
                for i in 0..w.data().len() {
                    let gi = g.data()[i];
                    m.data_mut()[i] = beta1 * m.data()[i] + (1.0 - beta1) * gi;
                    v.data_mut()[i] = beta2 * v.data()[i] + (1.0 - beta2) * gi * gi;
                    let mhat = m.data()[i] / bc1;
                    let vhat = v.data()[i] / bc2;
                    w.data_mut()[i] -= lr * mhat / (vhat.sqrt() + epsilon);
                }
            }
        }
        _ => unreachable!("optimizer state matches the config it was built from"),
    }
}

/// One training step: forward and backward under the configured paths,
/// then a full-precision parameter update. A non-finite loss (including
/// non-finite activations inside a quantized path) records as NaN and
/// skips the update; the caller decides whether to abort the run.
pub fn train_step(state: &mut ModelState, batch: &Batch, cfg: &LadderConfig) -> Result<StepMetrics> {
    let outcome = loss_and_gradients(state, batch, cfg);
    let metrics = match outcome {
        Ok((loss, grads)) => {
            if loss.is_finite() {
                apply_update(state, &grads, cfg);
            }
            StepMetrics { loss }
        }
        Err(Error::NonFinite(_)) => StepMetrics { loss: f64::NAN },
        Err(e) => return Err(e),
    };
    state.step += 1;
    Ok(metrics)
}
