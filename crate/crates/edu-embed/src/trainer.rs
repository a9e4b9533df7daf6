//! AdamW, the warmup-cosine schedule, and the two training loops: ranking
//! loss only (single loader) and dual objective (two loaders, strictly
//! alternating steps).

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::dataset::{batch_indices, LabeledPair, SentencePair};
use crate::encoder::{encode_backward, encode_batch, EncoderParams, ParamGrads, Vocabulary};
use crate::error::{Error, Result};
use crate::losses::{cosine_mse_loss, mnrl_loss, LossConfig};
use crate::numerics::Matrix;

/// Which objective(s) a training run optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    MnrlOnly,
    Dual,
}

/// Full optimization configuration. The defaults mirror the reference setup:
/// 25 epochs, batch 64, weight decay 0.01, warmup-cosine schedule, peak
/// learning rate and warmup fraction depending on the mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub peak_lr: f64,
    pub warmup_fraction: f64,
    pub weight_decay: f64,
    pub loss_scale: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn for_mode(mode: TrainMode) -> Self {
        let (peak_lr, warmup_fraction) = match mode {
            TrainMode::MnrlOnly => (2e-5, 0.15),
            TrainMode::Dual => (1e-5, 0.10),
        };
        Self {
            mode,
            epochs: 25,
            batch_size: 64,
            peak_lr,
            warmup_fraction,
            weight_decay: 0.01,
            loss_scale: crate::losses::DEFAULT_SCALE,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.peak_lr > 0.0) {
            return Err(Error::Config(format!(
                "peak_lr must be positive, got {}",
                self.peak_lr
            )));
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return Err(Error::Config(format!(
                "warmup_fraction must lie in (0, 1), got {}",
                self.warmup_fraction
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight_decay must be nonnegative, got {}",
                self.weight_decay
            )));
        }
        if !(self.loss_scale > 0.0) {
            return Err(Error::Config(format!(
                "loss_scale must be positive, got {}",
                self.loss_scale
            )));
        }
        Ok(())
    }
}

/// Warmup-cosine learning-rate schedule: linear from 0 to `peak_lr` over the
/// warmup steps, then a half cosine down to 0 at `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub total_steps: usize,
    pub warmup_steps: usize,
    pub peak_lr: f64,
}

impl Schedule {
    pub fn new(total_steps: usize, warmup_fraction: f64, peak_lr: f64) -> Self {
        let warmup_steps =
            ((warmup_fraction * total_steps as f64).round() as usize).min(total_steps);
        Self { total_steps, warmup_steps, peak_lr }
    }
}

/// Learning rate at a 0-based step count (number of completed steps).
pub fn lr_at(schedule: &Schedule, step: usize) -> Result<f64> {
    if step > schedule.total_steps {
        return Err(Error::Range(format!(
            "step {step} exceeds total steps {}",
            schedule.total_steps
        )));
    }
    if step < schedule.warmup_steps {
        return Ok(schedule.peak_lr * step as f64 / schedule.warmup_steps as f64);
    }
    let decay_len = schedule.total_steps - schedule.warmup_steps;
    if decay_len == 0 {
        return Ok(schedule.peak_lr);
    }
    let progress = (step - schedule.warmup_steps) as f64 / decay_len as f64;
    Ok(schedule.peak_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
}

/// First/second moment accumulators and step counter for AdamW.
#[derive(Debug, Clone)]
pub struct AdamWState {
    pub m: ParamGrads,
    pub v: ParamGrads,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamWState {
    pub fn new(params: &EncoderParams) -> Self {
        Self {
            m: ParamGrads::zeros_like(params),
            v: ParamGrads::zeros_like(params),
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

fn adamw_update_tensor(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    weight_decay: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    bias1: f64,
    bias2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + epsilon) + lr * weight_decay * params[i];
    }
}

/// One bias-corrected AdamW step with decoupled weight decay:
/// `p <- p - lr * m̂ / (sqrt(v̂) + ε) - lr * λ * p`.
pub fn adamw_step(
    params: &mut EncoderParams,
    grads: &ParamGrads,
    state: &mut AdamWState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::Numeric(
            "non-finite gradient; aborting optimizer step".into(),
        ));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bias1 = 1.0 - state.beta1.powi(t);
    let bias2 = 1.0 - state.beta2.powi(t);
    adamw_update_tensor(
        params.embedding.as_mut_slice(),
        grads.embedding.as_slice(),
        state.m.embedding.as_mut_slice(),
        state.v.embedding.as_mut_slice(),
        lr,
        weight_decay,
        state.beta1,
        state.beta2,
        state.epsilon,
        bias1,
        bias2,
    );
    adamw_update_tensor(
        params.projection.as_mut_slice(),
        grads.projection.as_slice(),
        state.m.projection.as_mut_slice(),
        state.v.projection.as_mut_slice(),
        lr,
        weight_decay,
        state.beta1,
        state.beta2,
        state.epsilon,
        bias1,
        bias2,
    );
    adamw_update_tensor(
        &mut params.bias,
        &grads.bias,
        &mut state.m.bias,
        &mut state.v.bias,
        lr,
        weight_decay,
        state.beta1,
        state.beta2,
        state.epsilon,
        bias1,
        bias2,
    );
    Ok(())
}

/// Which loss produced a given training step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mnrl,
    Cosine,
}

/// One history record per optimizer step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss_kind: LossKind,
    pub loss: f64,
    pub lr: f64,
}

/// Closed-form optimizer step count for a run, used both by the schedule and
/// by tests.
pub fn total_steps(
    mode: TrainMode,
    n_positive: usize,
    n_labeled: usize,
    batch_size: usize,
    epochs: usize,
) -> usize {
    let per_epoch_mnrl = n_positive.div_ceil(batch_size);
    let per_epoch_cos = match mode {
        TrainMode::MnrlOnly => 0,
        TrainMode::Dual => n_labeled.div_ceil(batch_size),
    };
    epochs * (per_epoch_mnrl + per_epoch_cos)
}

// Stream separation for the per-epoch shuffles of the two loaders.
const STREAM_MNRL: u64 = 0;
const STREAM_COSINE: u64 = 1;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn epoch_seed(seed: u64, epoch: usize, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64((epoch as u64) << 1 | stream))
}

enum PlannedStep {
    Mnrl(Vec<usize>),
    Cosine(Vec<usize>),
}

/// Per-element backward contributions, reduced in index order so results are
/// bit-identical regardless of execution order.
fn batch_param_grads(
    params: &EncoderParams,
    vocab: &Vocabulary,
    texts: &[&str],
    upstreams: &Matrix,
) -> Result<ParamGrads> {
    let work = |i: usize| encode_backward(params, vocab, texts[i], upstreams.row(i));

    #[cfg(feature = "parallel")]
    let parts: Vec<Result<ParamGrads>> = (0..texts.len()).into_par_iter().map(work).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<ParamGrads>> = (0..texts.len()).map(work).collect();

    let mut total = ParamGrads::zeros_like(params);
    for part in parts {
        total.add_assign(&part?);
    }
    Ok(total)
}

/// Train the encoder in place and return the per-step history.
///
/// `mnrl_only` walks shuffled positive-pair batches; `dual` interleaves one
/// ranking step and one cosine step strictly alternately per epoch, starting
/// with the ranking loss, and drains whichever loader runs longer. Runs are
/// bit-reproducible for a fixed seed.
pub fn train(
    params: &mut EncoderParams,
    vocab: &Vocabulary,
    pos_pairs: &[SentencePair],
    labeled_pairs: Option<&[LabeledPair]>,
    cfg: &TrainConfig,
) -> Result<Vec<StepRecord>> {
    cfg.validate()?;
    if pos_pairs.is_empty() {
        return Err(Error::Config("positive-pair dataset is empty".into()));
    }
    let labeled: &[LabeledPair] = match cfg.mode {
        TrainMode::MnrlOnly => &[],
        TrainMode::Dual => match labeled_pairs {
            Some(l) if !l.is_empty() => l,
            _ => {
                return Err(Error::Config(
                    "dual mode requires a nonempty labeled-pair dataset".into(),
                ))
            }
        },
    };

    let total = total_steps(
        cfg.mode,
        pos_pairs.len(),
        labeled.len(),
        cfg.batch_size,
        cfg.epochs,
    );
    let schedule = Schedule::new(total, cfg.warmup_fraction, cfg.peak_lr);
    let loss_cfg = LossConfig { scale: cfg.loss_scale };
    let mut state = AdamWState::new(params);
    let mut history = Vec::with_capacity(total);
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        let mnrl_batches = batch_indices(
            pos_pairs.len(),
            cfg.batch_size,
            epoch_seed(cfg.seed, epoch, STREAM_MNRL),
        );
        let cos_batches = match cfg.mode {
            TrainMode::MnrlOnly => Vec::new(),
            TrainMode::Dual => batch_indices(
                labeled.len(),
                cfg.batch_size,
                epoch_seed(cfg.seed, epoch, STREAM_COSINE),
            ),
        };

        // Strict alternation starting with the ranking loss; once one loader
        // is exhausted the rest of the other is consumed consecutively.
        let mut plan = Vec::with_capacity(mnrl_batches.len() + cos_batches.len());
        let mut m_iter = mnrl_batches.into_iter();
        let mut c_iter = cos_batches.into_iter();
        loop {
            match (m_iter.next(), c_iter.next()) {
                (Some(m), Some(c)) => {
                    plan.push(PlannedStep::Mnrl(m));
                    plan.push(PlannedStep::Cosine(c));
                }
                (Some(m), None) => {
                    plan.push(PlannedStep::Mnrl(m));
                    plan.extend(m_iter.by_ref().map(PlannedStep::Mnrl));
                }
                (None, Some(c)) => {
                    plan.push(PlannedStep::Cosine(c));
                    plan.extend(c_iter.by_ref().map(PlannedStep::Cosine));
                }
                (None, None) => break,
            }
        }

        for planned in plan {
            let lr = lr_at(&schedule, step)?;
            let (kind, loss, grads) = match planned {
                PlannedStep::Mnrl(indices) => {
                    let anchors: Vec<&str> =
                        indices.iter().map(|&i| pos_pairs[i].anchor.as_str()).collect();
                    let positives: Vec<&str> =
                        indices.iter().map(|&i| pos_pairs[i].positive.as_str()).collect();
                    let a = encode_batch(params, vocab, &anchors)?;
                    let p = encode_batch(params, vocab, &positives)?;
                    let (loss, grad_a, grad_p) = mnrl_loss(&a, &p, &loss_cfg)?;
                    let mut grads = batch_param_grads(params, vocab, &anchors, &grad_a)?;
                    grads.add_assign(&batch_param_grads(params, vocab, &positives, &grad_p)?);
                    (LossKind::Mnrl, loss, grads)
                }
                PlannedStep::Cosine(indices) => {
                    let lefts: Vec<&str> =
                        indices.iter().map(|&i| labeled[i].sentence1.as_str()).collect();
                    let rights: Vec<&str> =
                        indices.iter().map(|&i| labeled[i].sentence2.as_str()).collect();
                    let labels: Vec<u8> = indices.iter().map(|&i| labeled[i].label).collect();
                    let l = encode_batch(params, vocab, &lefts)?;
                    let r = encode_batch(params, vocab, &rights)?;
                    let (loss, grad_l, grad_r) = cosine_mse_loss(&l, &r, &labels)?;
                    let mut grads = batch_param_grads(params, vocab, &lefts, &grad_l)?;
                    grads.add_assign(&batch_param_grads(params, vocab, &rights, &grad_r)?);
                    (LossKind::Cosine, loss, grads)
                }
            };
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss at step {step} (epoch {epoch})"
                )));
            }
            adamw_step(params, &grads, &mut state, lr, cfg.weight_decay)?;
            history.push(StepRecord { step, epoch, loss_kind: kind, loss, lr });
            step += 1;
        }
    }
    debug_assert_eq!(step, total);
    Ok(history)
}

/// Serialize history as JSON lines, one record per step.
pub fn history_to_jsonl(history: &[StepRecord]) -> String {
    let mut out = String::new();
    for record in history {
        out.push_str(&serde_json::to_string(record).expect("step records serialize"));
        out.push('\n');
    }
    out
}
