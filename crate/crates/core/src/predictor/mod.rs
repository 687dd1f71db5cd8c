//! Explicit dependency modeling: per-joint deformable dilated convolution
//! branches over the phase trajectories of related joints, decoded by a GRU
//! into future displacements, followed by the global affinity refinement.
//!
//! Parameters are shared between joints of the same class, keyed by the
//! relation-set size and the limb tag.

mod config;
mod params;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{AblationSpec, ModelConfig};
pub use params::{CheckpointFile, NamedTensor, OptimizerState, ParamStore, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};

use crate::error::{MotionError, Result};
use crate::numkernel::{offset_bounds, Pick, Tape, Tensor, Var};
use crate::phasespace::{reconstruct, to_phase, PhaseTrajectory, PoseSequence, Vec3};
use crate::refiner::{self, AffinityMatrix, RefinerParams, RefinerVars};
use crate::skeleton::{build_relations, LimbTag, RelationSet, Skeleton};

/// Parameter indices of one joint class.
#[derive(Debug, Clone)]
struct ClassParams {
    key: String,
    related: usize,
    kernels: Vec<usize>,
    offsets: Vec<usize>,
    gru_w: usize,
    gru_u: usize,
    gru_b: usize,
    out_w: usize,
    out_b: usize,
}

#[derive(Debug, Clone, Copy)]
struct RefinerIdx {
    gamma_w: usize,
    gamma_b: usize,
    phi_w: usize,
    phi_b: usize,
}

/// Output of [`Model::predict`]; displacements in millimetres per frame.
#[derive(Debug, Clone)]
pub struct Prediction {
    /// Pre-refinement field, `n × J × 3`.
    pub omega_tilde: Tensor,
    /// Refined field (equal to `omega_tilde` when refinement is ablated).
    pub omega_hat: Tensor,
    pub affinity: Option<AffinityMatrix>,
    pub poses: PoseSequence,
}

/// Per-forward training switches.
#[derive(Default)]
pub(crate) struct ForwardMode<'a> {
    /// Inverted-dropout rate on the observed GRU inputs; needs `dropout_rng`.
    pub dropout: f64,
    pub dropout_rng: Option<&'a mut ChaCha8Rng>,
    /// Ground-truth future displacements (`n × J`, mm) fed back instead of
    /// the model's own outputs.
    pub teacher: Option<&'a [Vec3]>,
}

/// Lazily binds store parameters as tape leaves.
pub(crate) struct Binder {
    vars: Vec<Option<Var>>,
}

impl Binder {
    pub fn new(store: &ParamStore) -> Self {
        Binder {
            vars: vec![None; store.len()],
        }
    }

    fn bind(&mut self, tape: &mut Tape, store: &ParamStore, i: usize) -> Var {
        *self.vars[i].get_or_insert_with(|| tape.param(store.get(i).clone()))
    }

    /// Bound variable per parameter, `None` if the forward never used it.
    pub fn bound(&self) -> &[Option<Var>] {
        &self.vars
    }
}

pub(crate) struct TapeForward {
    /// `K × 3`, model units.
    pub omega_tilde: Var,
    /// `K × 3`, model units.
    pub omega_hat: Var,
    pub affinity: Option<Var>,
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    skeleton: Skeleton,
    relations: RelationSet,
    joint_class: Vec<usize>,
    classes: Vec<ClassParams>,
    refiner: RefinerIdx,
    params: ParamStore,
}

fn xavier(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape")
}

impl Model {
    /// Fresh model with fan-based uniform weights and zero offsets/biases.
    pub fn new(config: ModelConfig, skeleton: Skeleton, seed: u64) -> Result<Model> {
        config.validate()?;
        let relations = if config.ablation.use_explicit {
            build_relations(&skeleton, config.relations)?
        } else {
            RelationSet::singletons(skeleton.len())
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let mut classes: Vec<ClassParams> = Vec::new();
        let mut joint_class = Vec::with_capacity(skeleton.len());
        let c_in = config.input_channels();
        let k = config.kernel_size;
        let m = config.channels;
        let h = config.hidden;
        for j in 0..skeleton.len() {
            let related = relations.cardinality(j);
            let key = class_key(related, skeleton.tag(j));
            if let Some(ci) = classes.iter().position(|c| c.key == key) {
                joint_class.push(ci);
                continue;
            }
            let mut kernels = Vec::new();
            let mut offsets = Vec::new();
            for b in 0..config.dilations.len() {
                kernels.push(params.insert(
                    format!("{key}.conv{b}.kernel"),
                    xavier(&mut rng, &[m, c_in, k], c_in * k, m * k),
                ));
                offsets.push(params.insert(format!("{key}.conv{b}.offsets"), Tensor::zeros(&[k])));
            }
            let d_in = gru_input_width(&config, related);
            let gru_w = params.insert(format!("{key}.gru.w"), xavier(&mut rng, &[3 * h, d_in], d_in, h));
            let gru_u = params.insert(format!("{key}.gru.u"), xavier(&mut rng, &[3 * h, h], h, h));
            let gru_b = params.insert(format!("{key}.gru.b"), Tensor::zeros(&[3 * h]));
            let out_w = params.insert(format!("{key}.out.w"), xavier(&mut rng, &[3, h], h, 3));
            let out_b = params.insert(format!("{key}.out.b"), Tensor::zeros(&[3]));
            joint_class.push(classes.len());
            classes.push(ClassParams {
                key,
                related,
                kernels,
                offsets,
                gru_w,
                gru_u,
                gru_b,
                out_w,
                out_b,
            });
        }
        let refiner = RefinerIdx {
            gamma_w: params.insert("refiner.gamma.w", xavier(&mut rng, &[3, 3], 3, 3)),
            gamma_b: params.insert("refiner.gamma.b", Tensor::zeros(&[3])),
            phi_w: params.insert("refiner.phi.w", xavier(&mut rng, &[3, 3], 3, 3)),
            phi_b: params.insert("refiner.phi.b", Tensor::zeros(&[3])),
        };
        Ok(Model {
            config,
            skeleton,
            relations,
            joint_class,
            classes,
            refiner,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn relations(&self) -> &RelationSet {
        &self.relations
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Class key of joint `j`'s shared parameters.
    pub fn class_of(&self, j: usize) -> &str {
        &self.classes[self.joint_class[j]].key
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Indices of the refiner's projection parameters.
    pub fn refiner_param_indices(&self) -> [usize; 4] {
        let r = self.refiner;
        [r.gamma_w, r.gamma_b, r.phi_w, r.phi_b]
    }

    pub fn refiner_params(&self) -> RefinerParams {
        let r = self.refiner;
        RefinerParams {
            gamma_w: self.params.get(r.gamma_w).clone(),
            gamma_b: self.params.get(r.gamma_b).clone(),
            phi_w: self.params.get(r.phi_w).clone(),
            phi_b: self.params.get(r.phi_b).clone(),
        }
    }

    /// Indices of every tap-offset tensor, with its branch dilation.
    pub fn offset_params(&self) -> Vec<(usize, usize)> {
        self.classes
            .iter()
            .flat_map(|c| c.offsets.iter().zip(&self.config.dilations).map(|(&i, &d)| (i, d)))
            .collect()
    }

    /// Clamps every tap offset into its valid sampling range.
    pub fn project_offsets(&mut self) {
        let k = self.config.kernel_size;
        for (idx, d) in self.offset_params() {
            for (tap, v) in self.params.get_mut(idx).data_mut().iter_mut().enumerate() {
                let (lo, hi) = offset_bounds(tap, k, d);
                *v = v.clamp(lo, hi);
            }
        }
    }

    fn check_phase(&self, phase: &PhaseTrajectory) -> Result<()> {
        if phase.joints() != self.skeleton.len() {
            return Err(MotionError::dim(
                "predictor",
                format!("trajectory has {} joints, skeleton {}", phase.joints(), self.skeleton.len()),
            ));
        }
        if phase.frames() != self.config.observed_frames() {
            return Err(MotionError::dim(
                "predictor",
                format!(
                    "trajectory has {} frames, model observes N+1 = {}",
                    phase.frames(),
                    self.config.observed_frames()
                ),
            ));
        }
        Ok(())
    }

    /// `c_in × N` input of joint `r`: positions of frames `1..=N` and the
    /// displacements arriving at them, in model units.
    fn joint_signal(&self, phase: &PhaseTrajectory, r: usize) -> Tensor {
        let n = self.config.history;
        let c_in = self.config.input_channels();
        let mut data = vec![0.0; c_in * n];
        for t in 0..n {
            let p = phase.positions().get(t + 1, r);
            for a in 0..3 {
                data[a * n + t] = p[a] / self.config.position_scale;
            }
            if c_in == 6 {
                let d = phase.displacement(t, r);
                for a in 0..3 {
                    data[(3 + a) * n + t] = d[a] / self.config.displacement_scale;
                }
            }
        }
        Tensor::new(vec![c_in, n], data).expect("signal shape")
    }

    /// Features of joint `j`, shaped `(m·branches) × |C(j)| × N'`.
    fn encode_on_tape(
        &self,
        tape: &mut Tape,
        binder: &mut Binder,
        signals: &mut [Option<Var>],
        phase: &PhaseTrajectory,
        j: usize,
    ) -> Result<Var> {
        let class = &self.classes[self.joint_class[j]];
        let related = self.relations.get(j);
        let cfg = &self.config;
        let m = cfg.channels;
        let n_feat = cfg.feature_len();
        let mut parts = Vec::with_capacity(cfg.dilations.len() * related.len());
        let mut lens = Vec::with_capacity(cfg.dilations.len());
        for (b, &d) in cfg.dilations.iter().enumerate() {
            let kernel = binder.bind(tape, &self.params, class.kernels[b]);
            let offsets = binder.bind(tape, &self.params, class.offsets[b]);
            for &r in related {
                let sig = match signals[r] {
                    Some(v) => v,
                    None => {
                        let v = tape.constant(self.joint_signal(phase, r));
                        signals[r] = Some(v);
                        v
                    }
                };
                parts.push(tape.dilated_conv1d(sig, kernel, d, offsets)?);
            }
            lens.push(cfg.history - (cfg.kernel_size - 1) * d);
        }
        let nr = related.len();
        let branches = cfg.dilations.len();
        let mut picks: Vec<Pick> = Vec::with_capacity(branches * m * nr * n_feat);
        for ch in 0..branches * m {
            let (b, c) = (ch / m, ch % m);
            let skip = lens[b] - n_feat;
            for ri in 0..nr {
                for t in 0..n_feat {
                    picks.push(Some(((b * nr + ri) as u32, (c * lens[b] + skip + t) as u32)));
                }
            }
        }
        tape.gather(&parts, picks, &[branches * m, nr, n_feat])
    }

    /// `n` output vectors (model units) for joint `j` from its features.
    fn decode_on_tape(
        &self,
        tape: &mut Tape,
        binder: &mut Binder,
        features: Var,
        j: usize,
        mode: &mut ForwardMode<'_>,
    ) -> Result<Vec<Var>> {
        let class = &self.classes[self.joint_class[j]];
        let cfg = &self.config;
        let shape = tape.shape(features).to_vec();
        let (channels, nr, n_feat) = match shape.as_slice() {
            [a, b, c] if *b == class.related => (*a, *b, *c),
            other => {
                return Err(MotionError::dim(
                    "decode_sequence",
                    format!("features {other:?} do not match joint class {}", class.key),
                ))
            }
        };
        let width = gru_input_width(cfg, class.related);
        if channels * nr > width {
            return Err(MotionError::dim("decode_sequence", "feature width exceeds GRU input"));
        }
        let w = binder.bind(tape, &self.params, class.gru_w);
        let u = binder.bind(tape, &self.params, class.gru_u);
        let b = binder.bind(tape, &self.params, class.gru_b);
        let ow = binder.bind(tape, &self.params, class.out_w);
        let ob = binder.bind(tape, &self.params, class.out_b);

        let mut h = tape.constant(Tensor::zeros(&[cfg.hidden]));
        for t in 0..n_feat {
            let mut picks: Vec<Pick> = Vec::with_capacity(width);
            for ch in 0..channels {
                for ri in 0..nr {
                    picks.push(Some((0, ((ch * nr + ri) * n_feat + t) as u32)));
                }
            }
            picks.resize(width, None);
            let mut x = tape.gather(&[features], picks, &[width])?;
            if let Some(rng) = mode.dropout_rng.as_deref_mut() {
                if mode.dropout > 0.0 {
                    let keep = 1.0 - mode.dropout;
                    let mask = (0..width)
                        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect();
                    x = tape.mul_const(x, mask)?;
                }
            }
            h = tape.gru_cell(x, h, w, u, b)?;
        }

        let mut outputs = Vec::with_capacity(cfg.horizon);
        let mut y = tape.linear(h, ow, ob)?;
        outputs.push(y);
        let feed: Vec<Pick> = (0..width).map(|i| (i < 3).then_some((0, i as u32))).collect();
        for step in 1..cfg.horizon {
            let x = match mode.teacher {
                Some(truth) => {
                    let v = truth[(step - 1) * self.skeleton.len() + j];
                    let mut data = vec![0.0; width];
                    for a in 0..3 {
                        data[a] = v[a] / cfg.displacement_scale;
                    }
                    tape.constant(Tensor::vector(data))
                }
                None => tape.gather(&[y], feed.clone(), &[width])?,
            };
            h = tape.gru_cell(x, h, w, u, b)?;
            y = tape.linear(h, ow, ob)?;
            outputs.push(y);
        }
        Ok(outputs)
    }

    pub(crate) fn forward_on_tape(
        &self,
        tape: &mut Tape,
        binder: &mut Binder,
        phase: &PhaseTrajectory,
        mode: &mut ForwardMode<'_>,
    ) -> Result<TapeForward> {
        self.check_phase(phase)?;
        let jn = self.skeleton.len();
        let mut signals = vec![None; jn];
        let mut per_joint = Vec::with_capacity(jn);
        for j in 0..jn {
            let feats = self.encode_on_tape(tape, binder, &mut signals, phase, j)?;
            per_joint.push(self.decode_on_tape(tape, binder, feats, j, mode)?);
        }
        let rows: Vec<Var> = (0..self.config.horizon)
            .flat_map(|i| per_joint.iter().map(move |outs| outs[i]))
            .collect();
        let omega_tilde = tape.stack_rows(&rows)?;
        if !self.config.ablation.use_implicit {
            return Ok(TapeForward {
                omega_tilde,
                omega_hat: omega_tilde,
                affinity: None,
            });
        }
        let r = self.refiner;
        let vars = RefinerVars {
            gamma_w: binder.bind(tape, &self.params, r.gamma_w),
            gamma_b: binder.bind(tape, &self.params, r.gamma_b),
            phi_w: binder.bind(tape, &self.params, r.phi_w),
            phi_b: binder.bind(tape, &self.params, r.phi_b),
        };
        let (omega_hat, a) = refiner::refiner_on_tape(tape, omega_tilde, vars, self.config.affinity_norm)?;
        Ok(TapeForward {
            omega_tilde,
            omega_hat,
            affinity: Some(a),
        })
    }

    /// Features of joint `j`: `(m·branches) × |C(j)| × N'`.
    pub fn encode_joint(&self, phase: &PhaseTrajectory, j: usize) -> Result<Tensor> {
        self.check_phase(phase)?;
        if j >= self.skeleton.len() {
            return Err(MotionError::Index(format!("joint {j} of {}", self.skeleton.len())));
        }
        let mut tape = Tape::new();
        let mut binder = Binder::new(&self.params);
        let mut signals = vec![None; self.skeleton.len()];
        let v = self.encode_on_tape(&mut tape, &mut binder, &mut signals, phase, j)?;
        Ok(tape.value(v).clone())
    }

    /// Decodes joint `j`'s features into `n × 3` displacements (mm/frame).
    pub fn decode_sequence(&self, j: usize, features: &Tensor) -> Result<Tensor> {
        if j >= self.skeleton.len() {
            return Err(MotionError::Index(format!("joint {j} of {}", self.skeleton.len())));
        }
        let mut tape = Tape::new();
        let mut binder = Binder::new(&self.params);
        let f = tape.constant(features.clone());
        let outs = self.decode_on_tape(&mut tape, &mut binder, f, j, &mut ForwardMode::default())?;
        let s = self.config.displacement_scale;
        let data = outs.iter().flat_map(|v| tape.value(*v).data().iter().map(|x| x * s)).collect();
        Tensor::new(vec![outs.len(), 3], data)
    }

    /// Pre-refinement displacements `n × J × 3` (mm/frame).
    pub fn forward(&self, phase: &PhaseTrajectory) -> Result<Tensor> {
        let mut tape = Tape::new();
        let mut binder = Binder::new(&self.params);
        let out = self.forward_on_tape(&mut tape, &mut binder, phase, &mut ForwardMode::default())?;
        self.rows_to_field(tape.value(out.omega_tilde))
    }

    fn rows_to_field(&self, rows: &Tensor) -> Result<Tensor> {
        let s = self.config.displacement_scale;
        rows.map(|x| x * s)
            .reshape(&[self.config.horizon, self.skeleton.len(), 3])
    }

    /// Predicts `n` future poses from `N + 1` observed frames.
    pub fn predict(&self, observed: &PoseSequence) -> Result<Prediction> {
        let phase = to_phase(observed)?;
        let mut tape = Tape::new();
        let mut binder = Binder::new(&self.params);
        let out = self.forward_on_tape(&mut tape, &mut binder, &phase, &mut ForwardMode::default())?;
        let omega_tilde = self.rows_to_field(tape.value(out.omega_tilde))?;
        let omega_hat = self.rows_to_field(tape.value(out.omega_hat))?;
        let disp: Vec<Vec3> = omega_hat.data().chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        let poses = reconstruct(observed.pose(observed.frames() - 1), &disp)?;
        Ok(Prediction {
            omega_tilde,
            omega_hat,
            affinity: out.affinity.map(|a| AffinityMatrix(tape.value(a).clone())),
            poses,
        })
    }

    pub fn to_checkpoint(&self, optimizer: Option<OptimizerState>) -> CheckpointFile {
        CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            skeleton: serde_json::from_str(&self.skeleton.to_json()).expect("skeleton json"),
            params: self.params.to_named(),
            optimizer,
        }
    }

    /// Rebuilds a model from a checkpoint, validating every tensor shape
    /// against the stored configuration.
    pub fn from_checkpoint(ck: &CheckpointFile) -> Result<Model> {
        let skeleton = Skeleton::from_json(&ck.skeleton.to_string())?;
        let mut model = Model::new(ck.config.clone(), skeleton, 0).map_err(|e| match e {
            MotionError::Config(m) => MotionError::Checkpoint(format!("invalid configuration: {m}")),
            other => other,
        })?;
        model.params.load_named(&ck.params)?;
        if !model.params.all_finite() {
            return Err(MotionError::Checkpoint("non-finite parameter values".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path, optimizer: Option<OptimizerState>) -> Result<()> {
        self.to_checkpoint(optimizer).write(path)
    }

    pub fn load(path: &Path) -> Result<(Model, Option<OptimizerState>)> {
        let ck = CheckpointFile::read(path)?;
        let model = Model::from_checkpoint(&ck)?;
        Ok((model, ck.optimizer))
    }
}

fn class_key(related: usize, tag: LimbTag) -> String {
    format!("c{related}_{}", tag.as_str())
}

/// GRU input width: flattened features, at least wide enough to take a fed
/// back 3-vector.
fn gru_input_width(cfg: &ModelConfig, related: usize) -> usize {
    (cfg.branch_channels() * related).max(3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth, SynthKind};

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            hidden: 8,
            history: 8,
            horizon: 5,
            ..ModelConfig::default()
        }
    }

    fn phase_for(model: &Model, seed: u64) -> PhaseTrajectory {
        let seq = synth(SynthKind::SinusoidLimbs, model.skeleton(), model.config().observed_frames(), seed).unwrap();
        to_phase(&seq).unwrap()
    }

    #[test]
    fn feature_shape_matches_valid_lengths() {
        let model = Model::new(tiny_config(), Skeleton::toy(), 1).unwrap();
        let ph = phase_for(&model, 2);
        // root has |C| = 5 on the toy skeleton; N=8, k=3, max dilation 3 -> N' = 2
        let f = model.encode_joint(&ph, 0).unwrap();
        assert_eq!(f.shape(), &[3, 5, 2]);
        let ll1 = 4;
        assert_eq!(model.relations().cardinality(ll1), 3);
        assert_eq!(model.encode_joint(&ph, ll1).unwrap().shape(), &[3, 3, 2]);
    }

    #[test]
    fn zero_kernels_give_zero_features() {
        let mut model = Model::new(tiny_config(), Skeleton::toy(), 1).unwrap();
        for i in 0..model.params().len() {
            if model.params().name(i).contains("kernel") {
                let shape = model.params().get(i).shape().to_vec();
                *model.params_mut().get_mut(i) = Tensor::zeros(&shape);
            }
        }
        let ph = phase_for(&model, 3);
        for j in 0..7 {
            assert!(model.encode_joint(&ph, j).unwrap().data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn unit_kernel_is_pointwise_linear() {
        let cfg = ModelConfig {
            kernel_size: 1,
            dilations: vec![1],
            ..tiny_config()
        };
        let model = Model::new(cfg.clone(), Skeleton::toy(), 4).unwrap();
        let ph = phase_for(&model, 5);
        let j = 1;
        let f = model.encode_joint(&ph, j).unwrap();
        assert_eq!(f.shape(), &[1, 4, 8]);
        let kernel = model.params().by_name(&format!("{}.conv0.kernel", model.class_of(j))).unwrap();
        for (ri, &r) in model.relations().get(j).iter().enumerate() {
            for t in 0..8 {
                let p = ph.positions().get(t + 1, r);
                let d = ph.displacement(t, r);
                let input = [
                    p[0] / 1000.0,
                    p[1] / 1000.0,
                    p[2] / 1000.0,
                    d[0] / 10.0,
                    d[1] / 10.0,
                    d[2] / 10.0,
                ];
                let expect: f64 = (0..6).map(|c| kernel.data()[c] * input[c]).sum();
                assert!((f.at3(0, ri, t) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_params_predict_zero() {
        let mut model = Model::new(tiny_config(), Skeleton::toy(), 1).unwrap();
        for i in 0..model.params().len() {
            let shape = model.params().get(i).shape().to_vec();
            *model.params_mut().get_mut(i) = Tensor::zeros(&shape);
        }
        let ph = phase_for(&model, 3);
        let out = model.forward(&ph).unwrap();
        assert_eq!(out.shape(), &[5, 7, 3]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decoding_is_prefix_stable() {
        let long = Model::new(tiny_config(), Skeleton::toy(), 9).unwrap();
        let short = Model::new(ModelConfig { horizon: 1, ..tiny_config() }, Skeleton::toy(), 9).unwrap();
        let ph = phase_for(&long, 1);
        for j in 0..7 {
            let f = long.encode_joint(&ph, j).unwrap();
            let a = long.decode_sequence(j, &f).unwrap();
            let b = short.decode_sequence(j, &f).unwrap();
            assert_eq!(&a.data()[..3], b.data());
        }
    }

    #[test]
    fn single_joint_skeleton() {
        let skel = Skeleton::new("one", vec!["root".into()], vec![0], vec![LimbTag::Torso]).unwrap();
        let model = Model::new(
            ModelConfig {
                ablation: AblationSpec {
                    use_implicit: false,
                    ..AblationSpec::FULL
                },
                ..tiny_config()
            },
            skel.clone(),
            3,
        )
        .unwrap();
        let seq = synth(SynthKind::Circle, &skel, 9, 1).unwrap();
        let ph = to_phase(&seq).unwrap();
        let f = model.encode_joint(&ph, 0).unwrap();
        let direct = model.decode_sequence(0, &f).unwrap();
        let full = model.forward(&ph).unwrap();
        assert_eq!(direct.data(), full.data());
    }

    #[test]
    fn rejects_short_history() {
        let cfg = ModelConfig {
            history: 6,
            ..tiny_config()
        };
        assert!(matches!(Model::new(cfg, Skeleton::toy(), 0), Err(MotionError::Config(_))));
    }

    #[test]
    fn explicit_off_uses_singletons() {
        let cfg = ModelConfig {
            ablation: AblationSpec {
                use_explicit: false,
                ..AblationSpec::FULL
            },
            ..tiny_config()
        };
        let model = Model::new(cfg, Skeleton::default_eval(), 0).unwrap();
        for j in 0..22 {
            assert_eq!(model.relations().get(j), &[j]);
        }
    }

    #[test]
    fn checkpoint_round_trip_and_shape_check() {
        let model = Model::new(tiny_config(), Skeleton::toy(), 12).unwrap();
        let ck = model.to_checkpoint(None);
        let back = Model::from_checkpoint(&ck).unwrap();
        assert_eq!(back.params(), model.params());

        let mut bad = ck.clone();
        bad.params[0].shape = vec![99];
        bad.params[0].data = vec![0.0; 99];
        assert!(matches!(Model::from_checkpoint(&bad), Err(MotionError::Checkpoint(_))));

        let mut other = ck.clone();
        other.config.hidden = 4;
        assert!(matches!(Model::from_checkpoint(&other), Err(MotionError::Checkpoint(_))));
    }

    #[test]
    fn deterministic_without_dropout() {
        let model = Model::new(tiny_config(), Skeleton::toy(), 12).unwrap();
        let ph = phase_for(&model, 8);
        assert_eq!(model.forward(&ph).unwrap(), model.forward(&ph).unwrap());
    }
}
