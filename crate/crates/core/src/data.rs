//! Position CSV ingest, windowing into observed/future samples, and synthetic
//! motion generators.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MotionError, Result};
use crate::phasespace::{add3, PoseSequence, Vec3};
use crate::skeleton::{LimbTag, Skeleton};

pub const DEFAULT_FPS: f64 = 25.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub action: String,
    /// File stem or generator tag.
    pub id: String,
    pub sequence: PoseSequence,
}

#[derive(Debug, Clone)]
pub struct MotionDataset {
    pub sequences: Vec<LabeledSequence>,
    pub fps: f64,
    pub skeleton: Skeleton,
}

impl MotionDataset {
    pub fn new(skeleton: Skeleton, fps: f64) -> Self {
        MotionDataset {
            sequences: Vec::new(),
            fps,
            skeleton,
        }
    }

    pub fn push(&mut self, action: impl Into<String>, id: impl Into<String>, sequence: PoseSequence) -> Result<()> {
        if sequence.joints() != self.skeleton.len() {
            return Err(MotionError::dim(
                "dataset",
                format!(
                    "sequence has {} joints, skeleton {}",
                    sequence.joints(),
                    self.skeleton.len()
                ),
            ));
        }
        self.sequences.push(LabeledSequence {
            action: action.into(),
            id: id.into(),
            sequence,
        });
        Ok(())
    }

    pub fn extend(&mut self, other: MotionDataset) -> Result<()> {
        for s in other.sequences {
            self.push(s.action, s.id, s.sequence)?;
        }
        Ok(())
    }
}

/// Contiguous observed/future split of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    /// `N + 1` frames.
    pub observed: PoseSequence,
    /// `n` frames immediately after `observed`.
    pub future: PoseSequence,
    pub source: usize,
    pub start: usize,
    pub action: String,
}

/// Column header for a skeleton: `frame,<joint>_x,<joint>_y,<joint>_z,...`.
pub fn csv_header(skeleton: &Skeleton) -> Vec<String> {
    let mut cols = vec!["frame".to_string()];
    for name in skeleton.names() {
        for axis in ["x", "y", "z"] {
            cols.push(format!("{name}_{axis}"));
        }
    }
    cols
}

/// Action label derived from a file stem: a trailing `_<digits>` is dropped.
pub fn action_from_stem(stem: &str) -> String {
    match stem.rsplit_once('_') {
        Some((head, tail)) if !head.is_empty() && !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit()) => {
            head.to_string()
        }
        _ => stem.to_string(),
    }
}

pub fn read_pose_csv(path: &Path, skeleton: &Skeleton) -> Result<PoseSequence> {
    let parse_err = |line: u64, detail: String| MotionError::Parse {
        path: path.to_path_buf(),
        line,
        detail,
    };
    let file = fs::File::open(path).map_err(|e| MotionError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let expected_cols = 1 + 3 * skeleton.len();
    let header = csv_header(skeleton);

    let mut records = reader.records();
    let first = match records.next() {
        None => return Err(parse_err(1, "missing header row".into())),
        Some(r) => r.map_err(|e| parse_err(1, e.to_string()))?,
    };
    if first.len() != expected_cols {
        return Err(parse_err(
            1,
            format!("expected 1+3J = {expected_cols} columns, found {}", first.len()),
        ));
    }
    if first.iter().zip(&header).any(|(a, b)| a != b) {
        return Err(parse_err(
            1,
            format!("header does not match skeleton joints; expected {}", header.join(",")),
        ));
    }

    let mut positions = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != expected_cols {
            return Err(parse_err(
                line,
                format!("expected 1+3J = {expected_cols} columns, found {}", rec.len()),
            ));
        }
        let mut vals = Vec::with_capacity(expected_cols - 1);
        for (c, cell) in rec.iter().enumerate().skip(1) {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("non-numeric cell {cell:?} in column {}", header[c])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value in column {}", header[c])));
            }
            vals.push(v);
        }
        positions.extend(vals.chunks(3).map(|c| [c[0], c[1], c[2]]));
    }
    PoseSequence::new(skeleton.len(), positions)
}

/// One file → one labelled sequence.
pub fn load_csv(path: &Path, skeleton: &Skeleton) -> Result<MotionDataset> {
    let seq = read_pose_csv(path, skeleton)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sequence").to_string();
    let mut ds = MotionDataset::new(skeleton.clone(), DEFAULT_FPS);
    ds.push(action_from_stem(&stem), stem, seq)?;
    Ok(ds)
}

/// All `*.csv` files in `dir`, in file-name order.
pub fn load_dir(dir: &Path, skeleton: &Skeleton) -> Result<MotionDataset> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| MotionError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut ds = MotionDataset::new(skeleton.clone(), DEFAULT_FPS);
    for f in files {
        ds.extend(load_csv(&f, skeleton)?)?;
    }
    Ok(ds)
}

/// Writes a sequence with 17 significant digits so reloading is bit-exact.
/// `first_frame` numbers the first row.
pub fn save_csv(path: &Path, seq: &PoseSequence, skeleton: &Skeleton, first_frame: usize) -> Result<()> {
    if seq.joints() != skeleton.len() {
        return Err(MotionError::dim(
            "save_csv",
            format!("sequence has {} joints, skeleton {}", seq.joints(), skeleton.len()),
        ));
    }
    let mut out = String::new();
    out.push_str(&csv_header(skeleton).join(","));
    out.push('\n');
    for t in 0..seq.frames() {
        out.push_str(&(first_frame + t).to_string());
        for p in seq.pose(t) {
            for v in p {
                out.push(',');
                out.push_str(&format!("{v:.16e}"));
            }
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| MotionError::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| MotionError::io(path, e))
}

/// Sliding windows of `history + 1` observed and `horizon` future frames.
pub fn make_windows(ds: &MotionDataset, history: usize, horizon: usize, stride: usize) -> Result<Vec<SampleWindow>> {
    if stride == 0 || horizon == 0 {
        return Err(MotionError::Usage("stride and horizon must be positive".into()));
    }
    let span = history + 1 + horizon;
    let mut out = Vec::new();
    for (src, ls) in ds.sequences.iter().enumerate() {
        let len = ls.sequence.frames();
        if len < span {
            continue;
        }
        let count = (len - span) / stride + 1;
        for w in 0..count {
            let start = w * stride;
            out.push(SampleWindow {
                observed: ls.sequence.slice(start, start + history + 1),
                future: ls.sequence.slice(start + history + 1, start + span),
                source: src,
                start,
                action: ls.action.clone(),
            });
        }
    }
    if out.is_empty() {
        return Err(MotionError::EmptyDataset(format!(
            "no sequence has the {span} frames a window needs"
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    ConstantVelocity,
    SinusoidLimbs,
    Circle,
}

impl SynthKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SynthKind::ConstantVelocity => "constant_velocity",
            SynthKind::SinusoidLimbs => "sinusoid_limbs",
            SynthKind::Circle => "circle",
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SynthKind {
    type Err = MotionError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant_velocity" => Ok(SynthKind::ConstantVelocity),
            "sinusoid_limbs" => Ok(SynthKind::SinusoidLimbs),
            "circle" => Ok(SynthKind::Circle),
            other => Err(MotionError::Usage(format!(
                "unknown synthetic kind {other:?} (expected constant_velocity, sinusoid_limbs or circle)"
            ))),
        }
    }
}

/// Deterministic standing pose: root at 1 m height, limbs spread
/// mirror-symmetrically about the `x = 0` plane.
pub fn rest_pose(skeleton: &Skeleton) -> Vec<Vec3> {
    let n = skeleton.len();
    let mut pos = vec![[0.0; 3]; n];
    let root = skeleton.root();
    pos[root] = [0.0, 1000.0, 0.0];
    // parents before children
    let mut order = vec![root];
    let mut i = 0;
    while i < order.len() {
        order.extend(skeleton.children(order[i]));
        i += 1;
    }
    for &j in &order[1..] {
        let p = skeleton.parent(j).expect("non-root");
        let tag = skeleton.tag(j);
        let s = tag.side();
        let rank = skeleton.limb_rank(j);
        let sibling = skeleton
            .children(p)
            .iter()
            .filter(|&&c| c < j && skeleton.tag(c) == tag)
            .count() as f64;
        let dir: Vec3 = match tag {
            LimbTag::Torso => [0.0, 150.0, 0.0],
            LimbTag::Head => [0.0, 120.0, 40.0 * sibling],
            LimbTag::LeftArm | LimbTag::RightArm if rank == 0 => [s * 180.0, 0.0, 0.0],
            LimbTag::LeftArm | LimbTag::RightArm => [s * 40.0, -220.0, 60.0 * sibling],
            LimbTag::LeftLeg | LimbTag::RightLeg if rank == 0 => [s * 120.0, -250.0, 0.0],
            LimbTag::LeftLeg | LimbTag::RightLeg => [0.0, -230.0, 50.0 + 60.0 * sibling],
        };
        pos[j] = add3(pos[p], dir);
    }
    pos
}

/// Synthetic motion; deterministic per `(kind, skeleton, frames, seed)`.
///
/// * `ConstantVelocity`: every joint drifts with its own fixed velocity.
/// * `SinusoidLimbs`: limb joints oscillate about the rest pose, one phase per
///   limb pair, mirrored limbs in exact anti-phase; torso and head stay still.
/// * `Circle`: the whole body translates rigidly while the root traces a
///   horizontal circle at uniform angular speed.
pub fn synth(kind: SynthKind, skeleton: &Skeleton, frames: usize, seed: u64) -> Result<PoseSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rest = rest_pose(skeleton);
    let n = skeleton.len();
    let mut positions = Vec::with_capacity(frames * n);
    match kind {
        SynthKind::ConstantVelocity => {
            let vel: Vec<Vec3> = (0..n)
                .map(|_| [rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)])
                .collect();
            for t in 0..frames {
                let tf = t as f64;
                for j in 0..n {
                    positions.push(add3(rest[j], [vel[j][0] * tf, vel[j][1] * tf, vel[j][2] * tf]));
                }
            }
        }
        SynthKind::SinusoidLimbs => {
            let period: f64 = rng.gen_range(16.0..40.0);
            let omega = 2.0 * PI / period;
            let arm_phase: f64 = rng.gen_range(0.0..2.0 * PI);
            let leg_phase: f64 = rng.gen_range(0.0..2.0 * PI);
            let mut amp = || -> Vec3 {
                [rng.gen_range(10.0..30.0), rng.gen_range(10.0..30.0), rng.gen_range(20.0..60.0)]
            };
            let arm_amp = amp();
            let leg_amp = amp();
            for t in 0..frames {
                let tf = t as f64;
                for j in 0..n {
                    let tag = skeleton.tag(j);
                    let (a, phase) = match tag {
                        LimbTag::LeftArm | LimbTag::RightArm => (arm_amp, arm_phase),
                        LimbTag::LeftLeg | LimbTag::RightLeg => (leg_amp, leg_phase),
                        _ => {
                            positions.push(rest[j]);
                            continue;
                        }
                    };
                    // right limbs carry the sign flip, i.e. a half-period shift
                    let k = (skeleton.limb_rank(j) + 1) as f64 * tag.side() * (omega * tf + phase).sin();
                    positions.push(add3(rest[j], [a[0] * k, a[1] * k, a[2] * k]));
                }
            }
        }
        SynthKind::Circle => {
            let radius: f64 = rng.gen_range(100.0..300.0);
            let omega: f64 = rng.gen_range(0.05..0.2);
            let theta0: f64 = rng.gen_range(0.0..2.0 * PI);
            let (c0, s0) = (theta0.cos(), theta0.sin());
            for t in 0..frames {
                let th = theta0 + omega * t as f64;
                let shift = [radius * (th.cos() - c0), 0.0, radius * (th.sin() - s0)];
                for r in &rest {
                    positions.push(add3(*r, shift));
                }
            }
        }
    }
    PoseSequence::new(n, positions)
}

/// `count` sequences of one kind with seeds `first_seed..first_seed + count`.
pub fn synth_dataset(
    kind: SynthKind,
    skeleton: &Skeleton,
    frames: usize,
    first_seed: u64,
    count: usize,
) -> Result<MotionDataset> {
    let mut ds = MotionDataset::new(skeleton.clone(), DEFAULT_FPS);
    for s in 0..count as u64 {
        let seed = first_seed + s;
        ds.push(kind.as_str(), format!("{kind}_{seed}"), synth(kind, skeleton, frames, seed)?)?;
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasespace::{norm3, sub3, to_phase};

    #[test]
    fn window_arithmetic() {
        let skel = Skeleton::toy();
        let mut ds = MotionDataset::new(skel.clone(), DEFAULT_FPS);
        ds.push("a", "a", synth(SynthKind::Circle, &skel, 40, 1).unwrap()).unwrap();
        let w = make_windows(&ds, 9, 25, 5).unwrap();
        assert_eq!(w.iter().map(|w| w.start).collect::<Vec<_>>(), vec![0, 5]);

        let mut ds = MotionDataset::new(skel.clone(), DEFAULT_FPS);
        ds.push("a", "a", synth(SynthKind::Circle, &skel, 35, 1).unwrap()).unwrap();
        assert_eq!(make_windows(&ds, 9, 25, 1).unwrap().len(), 1);
    }

    #[test]
    fn too_short_is_empty_dataset() {
        let skel = Skeleton::toy();
        let mut ds = MotionDataset::new(skel.clone(), DEFAULT_FPS);
        ds.push("a", "a", synth(SynthKind::Circle, &skel, 20, 1).unwrap()).unwrap();
        assert!(matches!(make_windows(&ds, 9, 25, 1), Err(MotionError::EmptyDataset(_))));
    }

    #[test]
    fn windows_are_contiguous() {
        let skel = Skeleton::toy();
        let seq = synth(SynthKind::ConstantVelocity, &skel, 30, 3).unwrap();
        let mut ds = MotionDataset::new(skel, DEFAULT_FPS);
        ds.push("cv", "cv", seq.clone()).unwrap();
        for w in make_windows(&ds, 4, 3, 2).unwrap() {
            assert_eq!(w.observed, seq.slice(w.start, w.start + 5));
            assert_eq!(w.future, seq.slice(w.start + 5, w.start + 8));
        }
    }

    #[test]
    fn constant_velocity_has_constant_displacement() {
        let skel = Skeleton::toy();
        let ph = to_phase(&synth(SynthKind::ConstantVelocity, &skel, 20, 11).unwrap()).unwrap();
        for i in 1..ph.steps() {
            for j in 0..skel.len() {
                let d = sub3(ph.displacement(i, j), ph.displacement(0, j));
                assert!(norm3(d) < 1e-9);
            }
        }
    }

    #[test]
    fn sinusoid_mirror_joints_reflect() {
        let skel = Skeleton::default_eval();
        let seq = synth(SynthKind::SinusoidLimbs, &skel, 60, 5).unwrap();
        for (l, r) in [(LimbTag::LeftArm, LimbTag::RightArm), (LimbTag::LeftLeg, LimbTag::RightLeg)] {
            for (&a, &b) in skel.limb_chain(l).iter().zip(&skel.limb_chain(r)) {
                for t in 0..seq.frames() {
                    assert!((seq.get(t, a)[0] + seq.get(t, b)[0]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn circle_speed_is_uniform() {
        let skel = Skeleton::toy();
        let ph = to_phase(&synth(SynthKind::Circle, &skel, 50, 2).unwrap()).unwrap();
        let speed0 = norm3(ph.displacement(0, 0));
        assert!(speed0 > 0.0);
        for i in 0..ph.steps() {
            for j in 0..skel.len() {
                assert!((norm3(ph.displacement(i, j)) - speed0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn synth_is_deterministic() {
        let skel = Skeleton::toy();
        for kind in [SynthKind::ConstantVelocity, SynthKind::SinusoidLimbs, SynthKind::Circle] {
            assert_eq!(synth(kind, &skel, 30, 9).unwrap(), synth(kind, &skel, 30, 9).unwrap());
        }
        assert!(matches!("walk".parse::<SynthKind>(), Err(MotionError::Usage(_))));
    }

    #[test]
    fn action_labels() {
        assert_eq!(action_from_stem("walking_0003"), "walking");
        assert_eq!(action_from_stem("sinusoid_limbs_12"), "sinusoid_limbs");
        assert_eq!(action_from_stem("eating"), "eating");
    }
}
