//! Central finite-difference verification of the tape's adjoints, per op and
//! through the whole predictor, refiner and loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::SampleWindow;
use crate::error::Result;
use crate::numkernel::{offset_bounds, Tape, Tensor, Var};
use crate::phasespace::PoseSequence;
use crate::predictor::{Model, ModelConfig};
use crate::skeleton::{LimbTag, Skeleton};
use crate::training::{sample_gradients, sample_loss, TrainConfig};

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOLERANCE: f64 = 1e-4;
/// Denominator floor per unit of loss magnitude. A central difference with
/// step 1e-5 cannot resolve gradient components much below `1e-6·|L|` in
/// double precision; those are judged against the floor instead.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error < REL_TOLERANCE
    }

    fn new(name: impl Into<String>) -> Self {
        GradCheck {
            name: name.into(),
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            checked: 0,
        }
    }

    fn record(&mut self, analytic: f64, numeric: f64, loss: f64) {
        let abs = (analytic - numeric).abs();
        self.max_abs_error = self.max_abs_error.max(abs);
        self.max_rel_error = self.max_rel_error.max(relative_error(analytic, numeric, loss));
        self.checked += 1;
    }

    fn merge(&mut self, other: &GradCheck) {
        self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
        self.max_abs_error = self.max_abs_error.max(other.max_abs_error);
        self.checked += other.checked;
    }
}

/// `|a − n| / max(|a|, |n|, REL_FLOOR·max(1, |loss|))`.
pub fn relative_error(analytic: f64, numeric: f64, loss: f64) -> f64 {
    let floor = REL_FLOOR * loss.abs().max(1.0);
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).expect("shape")
}

type Build<'a> = dyn Fn(&mut Tape, &[Var]) -> Result<Var> + 'a;

/// Checks `build` against central differences. A non-scalar output is
/// reduced by a fixed random projection.
pub fn check_op(name: &str, inputs: &[Tensor], seed: u64, build: &Build<'_>) -> Result<GradCheck> {
    let probe_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let eval = |vals: &[Tensor], probe: Option<&Tensor>| -> Result<(Tape, Vec<Var>, Var, Tensor)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|t| tape.param(t.clone())).collect();
        let out = build(&mut tape, &vars)?;
        let p = match probe {
            Some(p) => p.clone(),
            None => random(&mut probe_rng.clone(), tape.shape(out), 1.0),
        };
        let c = tape.constant(p.clone());
        let prod = tape.mul(out, c)?;
        let loss = tape.sum(prod);
        Ok((tape, vars, loss, p))
    };
    let (tape, vars, loss, probe) = eval(inputs, None)?;
    let grads = tape.backward(loss)?;
    let loss_value = tape.value(loss).item();

    let mut result = GradCheck::new(name);
    let mut vals = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads.get(*v);
        for k in 0..vals[i].len() {
            let orig = vals[i].data()[k];
            vals[i].data_mut()[k] = orig + FD_STEP;
            let (t, _, l, _) = eval(&vals, Some(&probe))?;
            let up = t.value(l).item();
            vals[i].data_mut()[k] = orig - FD_STEP;
            let (t, _, l, _) = eval(&vals, Some(&probe))?;
            let down = t.value(l).item();
            vals[i].data_mut()[k] = orig;
            result.record(analytic.data()[k], (up - down) / (2.0 * FD_STEP), loss_value);
        }
    }
    Ok(result)
}

/// Offsets strictly inside their bounds with fractional parts in
/// `[0.2, 0.8]`, away from the interpolation kinks at integers.
pub fn fractional_offsets(rng: &mut ChaCha8Rng, k: usize, dilation: usize) -> Tensor {
    let data = (0..k)
        .map(|tap| {
            let (lo, hi) = offset_bounds(tap, k, dilation);
            if hi <= lo {
                return lo;
            }
            rng.gen_range(lo as i64..hi as i64) as f64 + rng.gen_range(0.2..0.8)
        })
        .collect();
    Tensor::vector(data)
}

/// Every differentiable tape op on random inputs.
pub fn check_ops(seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = |shape: &[usize]| random(&mut rng, shape, 1.0);
    let mat = [r(&[3, 4]), r(&[4, 2])];
    let pair = [r(&[2, 3]), r(&[2, 3])];
    let v5 = r(&[5]);
    let m34 = r(&[3, 4]);
    let b4 = r(&[4]);
    let big = random(&mut ChaCha8Rng::seed_from_u64(seed + 1), &[3, 4], 4.0);
    let gru = [r(&[3]), r(&[4]), r(&[12, 3]), r(&[12, 4]), r(&[12])];
    let lin = [r(&[4]), r(&[3, 4]), r(&[3])];
    let gather_in = [r(&[3]), r(&[2, 2])];
    let sq_pred = r(&[4, 3]);
    let sq_target = r(&[4, 3]);
    let signal = r(&[2, 9]);
    let kernel = r(&[2, 2, 3]);
    let mut orng = ChaCha8Rng::seed_from_u64(seed + 2);
    let offsets = fractional_offsets(&mut orng, 3, 2);
    let mask: Vec<f64> = (0..5).map(|i| if i % 2 == 0 { 1.25 } else { 0.0 }).collect();

    let mut out = Vec::new();
    out.push(check_op("matmul", &mat, seed, &|t, v| t.matmul(v[0], v[1]))?);
    out.push(check_op("add", &pair, seed, &|t, v| t.add(v[0], v[1]))?);
    out.push(check_op("sub", &pair, seed, &|t, v| t.sub(v[0], v[1]))?);
    out.push(check_op("mul", &pair, seed, &|t, v| t.mul(v[0], v[1]))?);
    out.push(check_op("scale", &pair[..1], seed, &|t, v| Ok(t.scale(v[0], -1.7)))?);
    out.push(check_op("mul_const", std::slice::from_ref(&v5), seed, &|t, v| {
        t.mul_const(v[0], mask.clone())
    })?);
    out.push(check_op("add_row_bias", &[m34.clone(), b4], seed, &|t, v| {
        t.add_row_bias(v[0], v[1])
    })?);
    out.push(check_op("transpose", &pair[..1], seed, &|t, v| t.transpose(v[0]))?);
    out.push(check_op("softmax_rows", &[big], seed, &|t, v| t.softmax_rows(v[0]))?);
    out.push(check_op("tanh", std::slice::from_ref(&v5), seed, &|t, v| Ok(t.tanh(v[0])))?);
    out.push(check_op("sigmoid", std::slice::from_ref(&v5), seed, &|t, v| Ok(t.sigmoid(v[0])))?);
    out.push(check_op("sum", std::slice::from_ref(&m34), seed, &|t, v| Ok(t.sum(v[0])))?);
    out.push(check_op("gather", &gather_in, seed, &|t, v| {
        let picks = vec![Some((1, 3)), None, Some((0, 0)), Some((0, 0)), Some((1, 1)), Some((0, 2))];
        t.gather(v, picks, &[2, 3])
    })?);
    out.push(check_op("dilated_conv1d", &[signal, kernel, offsets], seed, &|t, v| {
        t.dilated_conv1d(v[0], v[1], 2, v[2])
    })?);
    out.push(check_op("gru_cell", &gru, seed, &|t, v| t.gru_cell(v[0], v[1], v[2], v[3], v[4]))?);
    out.push(check_op("linear", &lin, seed, &|t, v| t.linear(v[0], v[1], v[2]))?);
    let refine_in = [
        random(&mut rng, &[7, 3], 1.0),
        random(&mut rng, &[3, 3], 1.0),
        random(&mut rng, &[3], 0.5),
        random(&mut rng, &[3, 3], 1.0),
        random(&mut rng, &[3], 0.5),
    ];
    for (name, columns) in [("refine_rows", false), ("refine_columns", true)] {
        out.push(check_op(name, &refine_in, seed, &|t, v| {
            Ok(t.refine(v[0], (v[1], v[2]), (v[3], v[4]), columns)?.0)
        })?);
    }
    out.push(check_op("weighted_sq_error", &[sq_pred], seed, &|t, v| {
        t.weighted_sq_error(v[0], &sq_target, &[0.5, 1.0, 1.5, 2.0])
    })?);
    Ok(out)
}

/// Four-joint skeleton: torso root with a head and two one-joint arms.
pub fn tiny_skeleton() -> Skeleton {
    Skeleton::new(
        "tiny4",
        ["root", "head", "left_arm", "right_arm"].map(String::from).to_vec(),
        vec![0, 0, 0, 0],
        vec![LimbTag::Torso, LimbTag::Head, LimbTag::LeftArm, LimbTag::RightArm],
    )
    .expect("valid skeleton")
}

/// Smallest configuration exercising every pathway: `N = 4`, `n = 2`,
/// one channel per branch, hidden size 8.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        channels: 1,
        dilations: vec![1, 2, 3],
        kernel_size: 2,
        hidden: 8,
        history: 4,
        horizon: 2,
        // unit output scale keeps the loss O(1) so differences resolve
        displacement_scale: 1.0,
        ..ModelConfig::default()
    }
}

/// A random small-motion window for `skeleton`.
pub fn random_window(rng: &mut ChaCha8Rng, skeleton: &Skeleton, history: usize, horizon: usize) -> SampleWindow {
    let jn = skeleton.len();
    let rest = crate::data::rest_pose(skeleton);
    let frames = history + 1 + horizon;
    let mut pos = Vec::with_capacity(frames * jn);
    let mut cur = rest.clone();
    let vel: Vec<[f64; 3]> = (0..jn)
        .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    for _ in 0..frames {
        for j in 0..jn {
            for a in 0..3 {
                cur[j][a] += vel[j][a] + rng.gen_range(-0.3..0.3);
            }
        }
        pos.extend_from_slice(&cur);
    }
    let seq = PoseSequence::new(jn, pos).expect("finite");
    SampleWindow {
        observed: seq.slice(0, history + 1),
        future: seq.slice(history + 1, frames),
        source: 0,
        start: 0,
        action: "gradcheck".into(),
    }
}

/// Full-composition check of `model` on `window`: every parameter element
/// against central differences of the weighted loss.
pub fn check_model_on(model: &Model, window: &SampleWindow, config: &TrainConfig) -> Result<GradCheck> {
    let (loss, grads) = sample_gradients(model, window, config, None)?;
    let mut probe = model.clone();
    let mut result = GradCheck::new("model");
    for (i, g) in grads.iter().enumerate() {
        for k in 0..g.len() {
            let orig = probe.params().get(i).data()[k];
            probe.params_mut().get_mut(i).data_mut()[k] = orig + FD_STEP;
            let up = sample_loss(&probe, window, config)?;
            probe.params_mut().get_mut(i).data_mut()[k] = orig - FD_STEP;
            let down = sample_loss(&probe, window, config)?;
            probe.params_mut().get_mut(i).data_mut()[k] = orig;
            result.record(g.data()[k], (up - down) / (2.0 * FD_STEP), loss);
        }
    }
    Ok(result)
}

/// Tiny model with fractional tap offsets, checked end to end.
pub fn check_model(seed: u64) -> Result<GradCheck> {
    let skel = tiny_skeleton();
    let cfg = tiny_config();
    let mut model = Model::new(cfg.clone(), skel.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(7));
    for (idx, d) in model.offset_params() {
        *model.params_mut().get_mut(idx) = fractional_offsets(&mut rng, cfg.kernel_size, d);
    }
    let window = random_window(&mut rng, &skel, cfg.history, cfg.horizon);
    let config = TrainConfig {
        dropout: 0.0,
        ..TrainConfig::default()
    };
    check_model_on(&model, &window, &config)
}

/// Ops plus the full model for one seed; the summary row is named `all`.
pub fn check_all(seed: u64) -> Result<Vec<GradCheck>> {
    let mut rows = check_ops(seed)?;
    rows.push(check_model(seed)?);
    let mut all = GradCheck::new("all");
    for r in &rows {
        all.merge(r);
    }
    rows.push(all);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ops_pass_one_seed() {
        for r in check_ops(3).unwrap() {
            assert!(r.passed(), "{} rel error {}", r.name, r.max_rel_error);
            assert!(r.checked > 0);
        }
    }

    #[test]
    fn fractional_offsets_stay_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 1..4 {
            for _ in 0..50 {
                let o = fractional_offsets(&mut rng, 3, d);
                for (tap, v) in o.data().iter().enumerate() {
                    let (lo, hi) = offset_bounds(tap, 3, d);
                    assert!(*v > lo && *v < hi);
                    assert!((v - v.floor()) > 0.1);
                }
            }
        }
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0, 1.0), 0.0);
        assert_eq!(relative_error(2.0, 1.0, 1.0), 0.5);
        assert!((relative_error(2e-7, 1e-7, 10.0) - 1e-2).abs() < 1e-12);
    }
}
