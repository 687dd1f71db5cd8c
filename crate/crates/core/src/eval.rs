//! MPJPE per horizon, reference baselines and ablation runs.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde_json::{json, Map, Value};

use crate::data::SampleWindow;
use crate::error::{MotionError, Result};
use crate::phasespace::{norm3, reconstruct, sub3, PoseSequence};
use crate::predictor::{AblationSpec, Model, ModelConfig};
use crate::skeleton::Skeleton;
use crate::training::{self, TrainConfig};

pub const DEFAULT_HORIZONS_MS: [f64; 7] = [80.0, 160.0, 320.0, 400.0, 560.0, 720.0, 1000.0];

/// Mean joint distance between `pred` and `truth` at `frame` (0-based).
pub fn mpjpe(pred: &PoseSequence, truth: &PoseSequence, frame: usize) -> Result<f64> {
    if pred.joints() != truth.joints() {
        return Err(MotionError::dim(
            "mpjpe",
            format!("{} vs {} joints", pred.joints(), truth.joints()),
        ));
    }
    if frame >= pred.frames() || frame >= truth.frames() {
        return Err(MotionError::Index(format!(
            "frame {frame} outside sequences of {} and {} frames",
            pred.frames(),
            truth.frames()
        )));
    }
    let sum: f64 = pred
        .pose(frame)
        .iter()
        .zip(truth.pose(frame))
        .map(|(a, b)| norm3(sub3(*a, *b)))
        .sum();
    Ok(sum / pred.joints() as f64)
}

/// 1-based future frame index of each horizon, `round(ms · fps / 1000)`.
pub fn horizon_frames(horizons_ms: &[f64], fps: f64, horizon: usize) -> Result<Vec<usize>> {
    horizons_ms
        .iter()
        .map(|&ms| {
            let f = (ms * fps / 1000.0).round();
            if f < 1.0 || f > horizon as f64 {
                Err(MotionError::Config(format!(
                    "{ms} ms is frame {f} at {fps} fps, outside the predicted 1..={horizon}"
                )))
            } else {
                Ok(f as usize)
            }
        })
        .collect()
}

/// Anything that maps `N + 1` observed poses to future poses.
pub trait Forecaster {
    fn forecast(&self, observed: &PoseSequence, horizon: usize) -> Result<PoseSequence>;
}

impl Forecaster for Model {
    fn forecast(&self, observed: &PoseSequence, horizon: usize) -> Result<PoseSequence> {
        if horizon != self.config().horizon {
            return Err(MotionError::Config(format!(
                "model predicts {} frames, {horizon} requested",
                self.config().horizon
            )));
        }
        Ok(self.predict(observed)?.poses)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    ZeroVelocity,
    ConstantVelocity,
}

impl Baseline {
    pub fn as_str(self) -> &'static str {
        match self {
            Baseline::ZeroVelocity => "zero_velocity",
            Baseline::ConstantVelocity => "constant_velocity",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Baseline {
    type Err = MotionError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_velocity" => Ok(Baseline::ZeroVelocity),
            "constant_velocity" => Ok(Baseline::ConstantVelocity),
            other => Err(MotionError::Usage(format!(
                "unknown baseline {other:?} (expected zero_velocity or constant_velocity)"
            ))),
        }
    }
}

/// `zero_velocity` holds the last pose; `constant_velocity` keeps adding the
/// last observed displacement.
pub fn baseline(kind: Baseline, observed: &PoseSequence, horizon: usize) -> Result<PoseSequence> {
    let frames = observed.frames();
    let need = match kind {
        Baseline::ZeroVelocity => 1,
        Baseline::ConstantVelocity => 2,
    };
    if frames < need {
        return Err(MotionError::InsufficientLength(format!(
            "{kind} needs {need} observed frames, got {frames}"
        )));
    }
    let last = observed.pose(frames - 1);
    let step: Vec<_> = match kind {
        Baseline::ZeroVelocity => vec![[0.0; 3]; observed.joints()],
        Baseline::ConstantVelocity => last
            .iter()
            .zip(observed.pose(frames - 2))
            .map(|(a, b)| sub3(*a, *b))
            .collect(),
    };
    let mut out = Vec::with_capacity(horizon * observed.joints());
    for i in 1..=horizon {
        let k = i as f64;
        out.extend(
            last.iter()
                .zip(&step)
                .map(|(p, d)| [p[0] + k * d[0], p[1] + k * d[1], p[2] + k * d[2]]),
        );
    }
    PoseSequence::new(observed.joints(), out)
}

impl Forecaster for Baseline {
    fn forecast(&self, observed: &PoseSequence, horizon: usize) -> Result<PoseSequence> {
        baseline(*self, observed, horizon)
    }
}

/// Replays the ground-truth future; every horizon scores zero.
pub struct Oracle<'a>(pub &'a [SampleWindow]);

impl Forecaster for Oracle<'_> {
    fn forecast(&self, observed: &PoseSequence, horizon: usize) -> Result<PoseSequence> {
        let w = self
            .0
            .iter()
            .find(|w| &w.observed == observed)
            .ok_or_else(|| MotionError::Index("observed window not in the oracle set".into()))?;
        let disp = training::future_displacements(w);
        let seq = reconstruct(observed.pose(observed.frames() - 1), &disp)?;
        Ok(seq.slice(0, horizon.min(seq.frames())))
    }
}

/// MPJPE per horizon, per action and averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonTable {
    pub horizons_ms: Vec<f64>,
    /// 1-based future frame per horizon.
    pub frames: Vec<usize>,
    /// Action label → per-horizon MPJPE averaged over that action's windows.
    pub actions: BTreeMap<String, Vec<f64>>,
    /// Uniform mean over actions.
    pub mean_over_actions: Vec<f64>,
    /// Uniform mean over all windows.
    pub mean_over_windows: Vec<f64>,
    pub windows: usize,
}

impl HorizonTable {
    /// Average of `mean_over_windows` across horizons.
    pub fn overall(&self) -> f64 {
        self.mean_over_windows.iter().sum::<f64>() / self.mean_over_windows.len() as f64
    }

    /// MPJPE (window mean) at the given horizon.
    pub fn at_ms(&self, ms: f64) -> Option<f64> {
        self.horizons_ms
            .iter()
            .position(|&h| h == ms)
            .map(|i| self.mean_over_windows[i])
    }

    pub fn to_text(&self) -> String {
        let label_w = self
            .actions
            .keys()
            .map(String::len)
            .chain([16])
            .max()
            .unwrap_or(16);
        let mut s = format!("{:<label_w$}", "ms");
        for h in &self.horizons_ms {
            write!(s, " {:>9}", h).unwrap();
        }
        s.push('\n');
        let mut row = |name: &str, vals: &[f64]| {
            write!(s, "{name:<label_w$}").unwrap();
            for v in vals {
                write!(s, " {v:>9.3}").unwrap();
            }
            s.push('\n');
        };
        for (a, vals) in &self.actions {
            row(a, vals);
        }
        row("average(actions)", &self.mean_over_actions);
        row("average(windows)", &self.mean_over_windows);
        s
    }

    pub fn to_json(&self) -> Value {
        let per = |vals: &[f64]| {
            let mut m = Map::new();
            for (h, v) in self.horizons_ms.iter().zip(vals) {
                m.insert(format!("{h}"), json!(v));
            }
            Value::Object(m)
        };
        let mut actions = Map::new();
        for (a, vals) in &self.actions {
            actions.insert(a.clone(), per(vals));
        }
        json!({
            "horizons_ms": self.horizons_ms,
            "frames": self.frames,
            "windows": self.windows,
            "actions": actions,
            "average_over_actions": per(&self.mean_over_actions),
            "average_over_windows": per(&self.mean_over_windows),
        })
    }
}

/// Forecasts every window and tabulates MPJPE at each horizon.
pub fn horizon_report(
    f: &dyn Forecaster,
    windows: &[SampleWindow],
    horizons_ms: &[f64],
    fps: f64,
) -> Result<HorizonTable> {
    let Some(first) = windows.first() else {
        return Err(MotionError::EmptyDataset("no evaluation windows".into()));
    };
    let horizon = first.future.frames();
    let frames = horizon_frames(horizons_ms, fps, horizon)?;
    let preds = windows
        .iter()
        .map(|w| f.forecast(&w.observed, horizon))
        .collect::<Result<Vec<_>>>()?;
    table_from_predictions(&preds, windows, horizons_ms, &frames)
}

/// Tabulates given predictions against `windows`' futures.
pub fn table_from_predictions(
    preds: &[PoseSequence],
    windows: &[SampleWindow],
    horizons_ms: &[f64],
    frames: &[usize],
) -> Result<HorizonTable> {
    if preds.len() != windows.len() || windows.is_empty() {
        return Err(MotionError::dim(
            "horizon_report",
            format!("{} predictions for {} windows", preds.len(), windows.len()),
        ));
    }
    let h = frames.len();
    let mut per_action: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    let mut total = vec![0.0; h];
    for (p, w) in preds.iter().zip(windows) {
        let entry = per_action.entry(w.action.clone()).or_insert_with(|| (vec![0.0; h], 0));
        for (k, &f) in frames.iter().enumerate() {
            let e = mpjpe(p, &w.future, f - 1)?;
            entry.0[k] += e;
            total[k] += e;
        }
        entry.1 += 1;
    }
    let actions: BTreeMap<String, Vec<f64>> = per_action
        .into_iter()
        .map(|(a, (sum, c))| (a, sum.iter().map(|s| s / c as f64).collect()))
        .collect();
    let na = actions.len() as f64;
    let mean_over_actions = (0..h).map(|k| actions.values().map(|v| v[k]).sum::<f64>() / na).collect();
    let mean_over_windows = total.iter().map(|s| s / windows.len() as f64).collect();
    Ok(HorizonTable {
        horizons_ms: horizons_ms.to_vec(),
        frames: frames.to_vec(),
        actions,
        mean_over_actions,
        mean_over_windows,
        windows: windows.len(),
    })
}

/// Mean MPJPE over `windows` at 1-based future `frame`.
pub fn mean_mpjpe_at(f: &dyn Forecaster, windows: &[SampleWindow], frame: usize) -> Result<f64> {
    if windows.is_empty() {
        return Err(MotionError::EmptyDataset("no evaluation windows".into()));
    }
    let mut sum = 0.0;
    for w in windows {
        let p = f.forecast(&w.observed, w.future.frames())?;
        sum += mpjpe(&p, &w.future, frame - 1)?;
    }
    Ok(sum / windows.len() as f64)
}

/// The full model and the three single-pathway ablations.
pub fn standard_variants() -> Vec<(&'static str, AblationSpec)> {
    vec![
        ("full", AblationSpec::FULL),
        (
            "no_explicit",
            AblationSpec {
                use_explicit: false,
                ..AblationSpec::FULL
            },
        ),
        (
            "no_implicit",
            AblationSpec {
                use_implicit: false,
                ..AblationSpec::FULL
            },
        ),
        (
            "no_displacement",
            AblationSpec {
                use_displacement: false,
                ..AblationSpec::FULL
            },
        ),
    ]
}

/// Shared inputs of an ablation run.
pub struct AblationSetup<'a> {
    pub skeleton: &'a Skeleton,
    pub model: &'a ModelConfig,
    pub train: &'a TrainConfig,
    pub train_windows: &'a [SampleWindow],
    pub test_windows: &'a [SampleWindow],
    pub horizons_ms: &'a [f64],
    pub fps: f64,
}

/// Trains and evaluates one model per ablation setting under identical seeds.
pub fn ablate(specs: &[AblationSpec], setup: &AblationSetup<'_>) -> Result<Vec<(AblationSpec, HorizonTable)>> {
    for s in specs {
        s.validate()?;
    }
    specs
        .iter()
        .map(|&spec| {
            let cfg = ModelConfig {
                ablation: spec,
                ..setup.model.clone()
            };
            let mut model = Model::new(cfg, setup.skeleton.clone(), setup.train.seed)?;
            training::train(
                &mut model,
                setup.train_windows,
                &[],
                setup.fps,
                setup.train,
                None,
                |_| {},
            )?;
            let table = horizon_report(&model, setup.test_windows, setup.horizons_ms, setup.fps)?;
            Ok((spec, table))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_windows, synth_dataset, SynthKind, DEFAULT_FPS};

    #[test]
    fn three_four_five() {
        let a = PoseSequence::new(1, vec![[3.0, 4.0, 0.0]]).unwrap();
        let b = PoseSequence::new(1, vec![[0.0; 3]]).unwrap();
        assert_eq!(mpjpe(&a, &b, 0).unwrap(), 5.0);
        assert_eq!(mpjpe(&a, &a, 0).unwrap(), 0.0);
        assert!(matches!(mpjpe(&a, &b, 1), Err(MotionError::Index(_))));
    }

    #[test]
    fn frames_at_25fps() {
        let f = horizon_frames(&DEFAULT_HORIZONS_MS, 25.0, 25).unwrap();
        assert_eq!(f, vec![2, 4, 8, 10, 14, 18, 25]);
        assert!(matches!(
            horizon_frames(&DEFAULT_HORIZONS_MS, 25.0, 24),
            Err(MotionError::Config(_))
        ));
    }

    #[test]
    fn baselines_on_constant_velocity() {
        let skel = Skeleton::toy();
        let ds = synth_dataset(SynthKind::ConstantVelocity, &skel, 40, 3, 2).unwrap();
        let w = make_windows(&ds, 9, 25, 5).unwrap();
        let cv = horizon_report(&Baseline::ConstantVelocity, &w, &DEFAULT_HORIZONS_MS, DEFAULT_FPS).unwrap();
        assert!(cv.mean_over_windows.iter().all(|&v| v < 1e-9));
        let zv = baseline(Baseline::ZeroVelocity, &w[0].observed, 25).unwrap();
        for i in 0..25 {
            assert_eq!(zv.pose(i), w[0].observed.pose(9));
        }
    }

    #[test]
    fn oracle_scores_zero() {
        let skel = Skeleton::toy();
        let ds = synth_dataset(SynthKind::Circle, &skel, 40, 1, 2).unwrap();
        let w = make_windows(&ds, 9, 25, 5).unwrap();
        let t = horizon_report(&Oracle(&w), &w, &DEFAULT_HORIZONS_MS, DEFAULT_FPS).unwrap();
        assert!(t.mean_over_windows.iter().all(|&v| v < 1e-9));
    }

    #[test]
    fn short_window_for_constant_velocity() {
        let one = PoseSequence::new(1, vec![[0.0; 3]]).unwrap();
        assert!(baseline(Baseline::ZeroVelocity, &one, 3).is_ok());
        assert!(matches!(
            baseline(Baseline::ConstantVelocity, &one, 3),
            Err(MotionError::InsufficientLength(_))
        ));
    }

    #[test]
    fn text_and_json_shapes() {
        let skel = Skeleton::toy();
        let ds = synth_dataset(SynthKind::Circle, &skel, 40, 1, 2).unwrap();
        let w = make_windows(&ds, 9, 25, 5).unwrap();
        let t = horizon_report(&Baseline::ZeroVelocity, &w, &DEFAULT_HORIZONS_MS, DEFAULT_FPS).unwrap();
        assert_eq!(t.to_text().lines().count(), 4);
        let j = t.to_json();
        assert!(j["actions"]["circle"]["400"].as_f64().unwrap() > 0.0);
    }
}
