//! Weighted displacement loss, Adam with global-norm clipping, and the epoch
//! loop.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::SampleWindow;
use crate::error::{MotionError, Result};
use crate::eval;
use crate::numkernel::{Tape, Tensor, Var};
use crate::phasespace::{norm3, sub3, to_phase, PhaseTrajectory, Vec3};
use crate::predictor::{Binder, ForwardMode, Model, NamedTensor, OptimizerState, ParamStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub clip_threshold: f64,
    pub epochs: usize,
    /// `τ`: weight ratio between consecutive prediction frames.
    pub temporal_decay: f64,
    /// `ε` guard in the joint motion factor.
    pub motion_emphasis: f64,
    pub seed: u64,
    /// Feed ground-truth displacements back into the decoder instead of its
    /// own outputs.
    pub teacher_forcing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            learning_rate: 0.001,
            dropout: 0.05,
            clip_threshold: 5.0,
            epochs: 50,
            temporal_decay: 0.95,
            motion_emphasis: 1e-6,
            seed: 0,
            teacher_forcing: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(MotionError::Config(m));
        if self.batch_size == 0 {
            return fail("batch size must be positive".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate {} must be a non-negative number", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.clip_threshold.is_nan() || self.clip_threshold <= 0.0 {
            return fail(format!("clip threshold {} must be positive", self.clip_threshold));
        }
        if !(self.temporal_decay > 0.0 && self.temporal_decay <= 1.0) {
            return fail(format!("temporal decay {} outside (0, 1]", self.temporal_decay));
        }
        if self.motion_emphasis.is_nan() || self.motion_emphasis <= 0.0 {
            return fail(format!("motion emphasis {} must be positive", self.motion_emphasis));
        }
        Ok(())
    }
}

/// Per (prediction frame, joint) loss weights, frame-major, mean 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    horizon: usize,
    joints: usize,
    w: Vec<f64>,
}

impl LossWeights {
    /// Uniform weights of 1.
    pub fn uniform(horizon: usize, joints: usize) -> Self {
        LossWeights {
            horizon,
            joints,
            w: vec![1.0; horizon * joints],
        }
    }

    pub fn from_raw(horizon: usize, joints: usize, w: Vec<f64>) -> Result<Self> {
        if w.len() != horizon * joints {
            return Err(MotionError::dim(
                "loss_weights",
                format!("{} weights for {horizon}×{joints}", w.len()),
            ));
        }
        Ok(LossWeights { horizon, joints, w })
    }

    pub fn get(&self, frame: usize, joint: usize) -> f64 {
        self.w[frame * self.joints + joint]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }
}

/// Un-normalized `(α_j, β_i)` factors.
pub fn weight_factors(observed: &PhaseTrajectory, horizon: usize, tau: f64, eps: f64) -> (Vec<f64>, Vec<f64>) {
    let jn = observed.joints();
    let r: Vec<f64> = (0..jn)
        .map(|j| (0..observed.steps()).map(|i| norm3(observed.displacement(i, j))).sum())
        .collect();
    let mean_r = r.iter().sum::<f64>() / jn as f64;
    let alpha = r.iter().map(|rj| 1.0 + rj / (mean_r + eps)).collect();
    let beta = (0..horizon).map(|i| tau.powi(i as i32)).collect();
    (alpha, beta)
}

/// Joints that moved more in the observed window, and earlier prediction
/// frames, weigh more.
pub fn compute_weights(observed: &PhaseTrajectory, horizon: usize, config: &TrainConfig) -> Result<LossWeights> {
    if observed.steps() == 0 {
        return Err(MotionError::InsufficientLength(
            "loss weights need at least one observed displacement".into(),
        ));
    }
    let (alpha, beta) = weight_factors(observed, horizon, config.temporal_decay, config.motion_emphasis);
    let mut w: Vec<f64> = beta.iter().flat_map(|b| alpha.iter().map(move |a| a * b)).collect();
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    for v in &mut w {
        *v /= mean;
    }
    LossWeights::from_raw(horizon, observed.joints(), w)
}

/// `Σ_{i,j} w_ij ‖pred_ij − truth_ij‖²` over `n × J × 3` fields.
pub fn weighted_loss(pred: &Tensor, truth: &Tensor, w: &LossWeights) -> Result<f64> {
    let expect = [w.horizon, w.joints, 3];
    if pred.shape() != expect || truth.shape() != expect {
        return Err(MotionError::dim(
            "weighted_loss",
            format!(
                "prediction {:?} and truth {:?} must both be {expect:?}",
                pred.shape(),
                truth.shape()
            ),
        ));
    }
    let mut tape = Tape::new();
    let p = tape.constant(pred.clone());
    let l = tape.weighted_sq_error(p, truth, &w.w)?;
    Ok(tape.value(l).item())
}

/// Displacements of the future frames, the first taken from the last
/// observed pose. `n × J`, frame-major.
pub fn future_displacements(window: &SampleWindow) -> Vec<Vec3> {
    let jn = window.observed.joints();
    let last = window.observed.pose(window.observed.frames() - 1);
    let mut out = Vec::with_capacity(window.future.frames() * jn);
    for i in 0..window.future.frames() {
        let prev = if i == 0 { last } else { window.future.pose(i - 1) };
        for (a, b) in window.future.pose(i).iter().zip(prev) {
            out.push(sub3(*a, *b));
        }
    }
    out
}

/// Rescales `grads` in place so their joint L2 norm is at most `threshold`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Tensor], threshold: f64) -> f64 {
    let norm = grads.iter().map(Tensor::norm_sq).sum::<f64>().sqrt();
    if norm > threshold {
        let s = threshold / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= s;
            }
        }
    }
    norm
}

/// Bias-corrected Adam.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &ParamStore, learning_rate: f64) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Resumes from saved moments; names and shapes must match `params`.
    pub fn from_state(params: &ParamStore, learning_rate: f64, state: &OptimizerState) -> Result<Self> {
        let load = |named: &[NamedTensor]| -> Result<Vec<Tensor>> {
            let mut store = params.clone();
            store.load_named(named)?;
            Ok(store.iter().map(|(_, t)| t.clone()).collect())
        };
        let mut adam = Adam::new(params, learning_rate);
        adam.m = load(&state.first_moment)?;
        adam.v = load(&state.second_moment)?;
        adam.step = state.step;
        Ok(adam)
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn state(&self, params: &ParamStore) -> OptimizerState {
        let named = |ts: &[Tensor]| {
            ts.iter()
                .enumerate()
                .map(|(i, t)| NamedTensor {
                    name: params.name(i).to_string(),
                    shape: t.shape().to_vec(),
                    data: t.data().to_vec(),
                })
                .collect()
        };
        OptimizerState {
            step: self.step,
            first_moment: named(&self.m),
            second_moment: named(&self.v),
        }
    }

    pub fn update(&mut self, params: &mut ParamStore, grads: &[Tensor]) {
        assert_eq!(grads.len(), params.len(), "one gradient per parameter");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, g) in grads.iter().enumerate() {
            let p = params.get_mut(i).data_mut();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (k, &gk) in g.data().iter().enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                p[k] -= self.learning_rate * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

struct SampleTape {
    tape: Tape,
    binder: Binder,
    loss: Var,
}

fn record_sample(
    model: &Model,
    window: &SampleWindow,
    config: &TrainConfig,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<SampleTape> {
    let phase = to_phase(&window.observed)?;
    let horizon = model.config().horizon;
    if window.future.frames() != horizon {
        return Err(MotionError::dim(
            "train",
            format!("window has {} future frames, model predicts {horizon}", window.future.frames()),
        ));
    }
    let truth = future_displacements(window);
    let weights = compute_weights(&phase, horizon, config)?;
    let target = Tensor::new(
        vec![truth.len(), 3],
        truth.iter().flat_map(|v| v.iter().copied()).collect(),
    )?;

    let mut tape = Tape::new();
    let mut binder = Binder::new(model.params());
    let mut mode = ForwardMode {
        dropout: config.dropout,
        dropout_rng,
        teacher: config.teacher_forcing.then_some(truth.as_slice()),
    };
    let out = model.forward_on_tape(&mut tape, &mut binder, &phase, &mut mode)?;
    let mm = tape.scale(out.omega_hat, model.config().displacement_scale);
    let loss = tape.weighted_sq_error(mm, &target, weights.as_slice())?;
    Ok(SampleTape { tape, binder, loss })
}

/// Weighted loss of one window without dropout.
pub fn sample_loss(model: &Model, window: &SampleWindow, config: &TrainConfig) -> Result<f64> {
    let s = record_sample(model, window, config, None)?;
    Ok(s.tape.value(s.loss).item())
}

/// Loss of one window and its gradient for every parameter (zeros for
/// parameters the forward pass did not touch). Dropout applies only when
/// `dropout_rng` is given.
pub fn sample_gradients(
    model: &Model,
    window: &SampleWindow,
    config: &TrainConfig,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, Vec<Tensor>)> {
    let SampleTape { tape, binder, loss } = record_sample(model, window, config, dropout_rng)?;
    let value = tape.value(loss).item();
    let grads = tape.backward(loss)?;
    let per_param = binder
        .bound()
        .iter()
        .enumerate()
        .map(|(i, v)| match v {
            Some(v) => grads.get(*v),
            None => Tensor::zeros(model.params().get(i).shape()),
        })
        .collect();
    Ok((value, per_param))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// MPJPE (mm) at the 400 ms frame on the validation windows; `None`
    /// without validation data.
    pub val_mpjpe: Option<f64>,
}

impl EpochRecord {
    pub fn log_line(&self) -> String {
        let mut s = format!("{}\t{:.17e}\t", self.epoch, self.train_loss);
        match self.val_mpjpe {
            Some(v) => write!(s, "{v:.17e}").expect("string write"),
            None => s.push_str("nan"),
        }
        s
    }
}

pub struct TrainOutcome {
    pub log: Vec<EpochRecord>,
    pub optimizer: Adam,
}

impl TrainOutcome {
    pub fn log_text(&self) -> String {
        self.log.iter().map(|r| r.log_line() + "\n").collect()
    }
}

/// Frame index used for the per-epoch validation metric.
pub fn validation_frame(fps: f64, horizon: usize) -> usize {
    ((400.0 * fps / 1000.0).round() as usize).clamp(1, horizon)
}

/// Runs `config.epochs` epochs of minibatch Adam over `train`, calling
/// `on_epoch` after each. Deterministic for a fixed seed.
pub fn train(
    model: &mut Model,
    train: &[SampleWindow],
    val: &[SampleWindow],
    fps: f64,
    config: &TrainConfig,
    optimizer: Option<Adam>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(MotionError::EmptyDataset("no training windows".into()));
    }
    let mut adam = optimizer.unwrap_or_else(|| Adam::new(model.params(), config.learning_rate));
    adam.learning_rate = config.learning_rate;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let val_frame = validation_frame(fps, model.config().horizon);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let mut sum: Option<Vec<Tensor>> = None;
            let mut batch_loss = 0.0;
            for &idx in batch {
                let (loss, grads) = sample_gradients(model, &train[idx], config, Some(&mut dropout_rng))?;
                batch_loss += loss;
                match &mut sum {
                    Some(acc) => acc.iter_mut().zip(&grads).for_each(|(a, g)| a.add_assign(g)),
                    None => sum = Some(grads),
                }
            }
            if !batch_loss.is_finite() {
                return Err(MotionError::NonFiniteLoss(format!(
                    "epoch {epoch}, batch {b} (windows {batch:?}) produced loss {batch_loss}"
                )));
            }
            total += batch_loss;
            let mut grads = sum.expect("non-empty batch");
            let inv = 1.0 / batch.len() as f64;
            for g in &mut grads {
                for v in g.data_mut() {
                    *v *= inv;
                }
            }
            clip_global_norm(&mut grads, config.clip_threshold);
            adam.update(model.params_mut(), &grads);
            model.project_offsets();
        }
        let val_mpjpe = if val.is_empty() {
            None
        } else {
            Some(eval::mean_mpjpe_at(model, val, val_frame)?)
        };
        let rec = EpochRecord {
            epoch,
            train_loss: total / train.len() as f64,
            val_mpjpe,
        };
        on_epoch(&rec);
        log.push(rec);
    }
    Ok(TrainOutcome { log, optimizer: adam })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasespace::PoseSequence;

    fn two_joint_phase() -> PhaseTrajectory {
        // joint 0 static, joint 1 moves 1 mm per frame for 2 frames: r = [0, 2]
        let pos = vec![[0.0; 3], [0.0; 3], [0.0; 3], [1.0, 0.0, 0.0], [0.0; 3], [2.0, 0.0, 0.0]];
        to_phase(&PoseSequence::new(2, pos).unwrap()).unwrap()
    }

    #[test]
    fn moving_joint_weighs_three_times_static() {
        let ph = two_joint_phase();
        let (alpha, _) = weight_factors(&ph, 3, 0.95, 1e-300);
        assert_eq!(alpha, vec![1.0, 3.0]);
        let cfg = TrainConfig {
            motion_emphasis: 1e-300,
            ..TrainConfig::default()
        };
        let w = compute_weights(&ph, 3, &cfg).unwrap();
        for i in 0..3 {
            assert!((w.get(i, 1) / w.get(i, 0) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn static_history_with_unit_decay_is_uniform() {
        let ph = to_phase(&PoseSequence::new(3, vec![[5.0, 1.0, 2.0]; 9]).unwrap()).unwrap();
        let cfg = TrainConfig {
            temporal_decay: 1.0,
            ..TrainConfig::default()
        };
        let w = compute_weights(&ph, 4, &cfg).unwrap();
        assert!(w.as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn temporal_decay_is_geometric() {
        let ph = two_joint_phase();
        let cfg = TrainConfig::default();
        let w = compute_weights(&ph, 5, &cfg).unwrap();
        for j in 0..2 {
            assert!((w.get(1, j) / w.get(0, j) - 0.95).abs() < 1e-12);
        }
        let mean = w.as_slice().iter().sum::<f64>() / 10.0;
        assert!((mean - 1.0).abs() < 1e-9);
    }

    #[test]
    fn three_four_five_loss() {
        let w = LossWeights::uniform(1, 1);
        let pred = Tensor::new(vec![1, 1, 3], vec![3.0, 4.0, 0.0]).unwrap();
        let truth = Tensor::zeros(&[1, 1, 3]);
        assert_eq!(weighted_loss(&pred, &truth, &w).unwrap(), 25.0);
        assert_eq!(weighted_loss(&truth, &truth, &w).unwrap(), 0.0);
        let bad = Tensor::zeros(&[1, 2, 3]);
        assert!(matches!(weighted_loss(&bad, &truth, &w), Err(MotionError::Dimension { .. })));
    }

    #[test]
    fn clipping_halves_norm_ten() {
        let mut g = vec![Tensor::vector(vec![6.0, 8.0])];
        let n = clip_global_norm(&mut g, 5.0);
        assert_eq!(n, 10.0);
        assert_eq!(g[0].data(), &[3.0, 4.0]);

        let mut small = vec![Tensor::vector(vec![0.1, -0.3]), Tensor::vector(vec![0.7])];
        let before = small.clone();
        clip_global_norm(&mut small, 5.0);
        assert_eq!(small, before);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut store = ParamStore::new();
        store.insert("p", Tensor::vector(vec![1.0, -1.0]));
        let mut adam = Adam::new(&store, 0.1);
        adam.update(&mut store, &[Tensor::vector(vec![2.0, -0.5])]);
        // bias-corrected first step is lr · sign(g) up to eps
        assert!((store.get(0).data()[0] - 0.9).abs() < 1e-7);
        assert!((store.get(0).data()[1] + 0.9).abs() < 1e-7);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { temporal_decay: 0.0, ..Default::default() },
            TrainConfig { temporal_decay: 1.5, ..Default::default() },
            TrainConfig { dropout: 1.0, ..Default::default() },
            TrainConfig { clip_threshold: 0.0, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(MotionError::Config(_))));
        }
    }

    #[test]
    fn validation_frame_at_25fps() {
        assert_eq!(validation_frame(25.0, 25), 10);
        assert_eq!(validation_frame(25.0, 4), 4);
    }
}
