//! Pose sequences and their phase-space form: per-joint positions paired with
//! frame-to-frame displacements.

use serde::{Deserialize, Serialize};

use crate::error::{MotionError, Result};

pub type Vec3 = [f64; 3];

#[inline]
pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn norm3(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// `frames × joints` joint positions in millimetres, frame-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseSequence {
    joints: usize,
    positions: Vec<Vec3>,
}

impl PoseSequence {
    pub fn new(joints: usize, positions: Vec<Vec3>) -> Result<Self> {
        if joints == 0 || !positions.len().is_multiple_of(joints) {
            return Err(MotionError::dim(
                "pose_sequence",
                format!("{} positions do not split into frames of {joints} joints", positions.len()),
            ));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(MotionError::Domain {
                op: "pose_sequence",
                detail: "non-finite coordinate".into(),
            });
        }
        Ok(PoseSequence { joints, positions })
    }

    pub fn frames(&self) -> usize {
        self.positions.len() / self.joints
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn get(&self, frame: usize, joint: usize) -> Vec3 {
        self.positions[frame * self.joints + joint]
    }

    pub fn pose(&self, frame: usize) -> &[Vec3] {
        &self.positions[frame * self.joints..(frame + 1) * self.joints]
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    /// Frames `start..end` as a new sequence.
    pub fn slice(&self, start: usize, end: usize) -> PoseSequence {
        PoseSequence {
            joints: self.joints,
            positions: self.positions[start * self.joints..end * self.joints].to_vec(),
        }
    }

    pub fn translated(&self, by: Vec3) -> PoseSequence {
        PoseSequence {
            joints: self.joints,
            positions: self.positions.iter().map(|p| add3(*p, by)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> PoseSequence {
        PoseSequence {
            joints: self.joints,
            positions: self.positions.iter().map(|p| [p[0] * s, p[1] * s, p[2] * s]).collect(),
        }
    }
}

/// Positions plus displacements `ω[i] = D[i+1] − D[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    positions: PoseSequence,
    displacements: Vec<Vec3>,
}

impl PhaseTrajectory {
    pub fn positions(&self) -> &PoseSequence {
        &self.positions
    }

    pub fn frames(&self) -> usize {
        self.positions.frames()
    }

    pub fn joints(&self) -> usize {
        self.positions.joints()
    }

    /// Number of displacement frames (`frames − 1`).
    pub fn steps(&self) -> usize {
        self.displacements.len() / self.joints()
    }

    /// Displacement arriving at frame `i + 1`.
    pub fn displacement(&self, i: usize, joint: usize) -> Vec3 {
        self.displacements[i * self.joints() + joint]
    }

    pub fn displacements(&self) -> &[Vec3] {
        &self.displacements
    }
}

pub fn to_phase(seq: &PoseSequence) -> Result<PhaseTrajectory> {
    if seq.frames() < 2 {
        return Err(MotionError::InsufficientLength(format!(
            "phase conversion needs at least 2 frames, got {}",
            seq.frames()
        )));
    }
    let j = seq.joints();
    let displacements = seq.positions[j..]
        .iter()
        .zip(&seq.positions[..seq.positions.len() - j])
        .map(|(next, prev)| sub3(*next, *prev))
        .collect();
    Ok(PhaseTrajectory {
        positions: seq.clone(),
        displacements,
    })
}

/// Future poses from the last observed pose and `n × J` chained
/// displacements: `pose[i] = last + Σ_{k≤i} ω[k]`.
pub fn reconstruct(last_pose: &[Vec3], displacements: &[Vec3]) -> Result<PoseSequence> {
    let j = last_pose.len();
    if j == 0 || !displacements.len().is_multiple_of(j) {
        return Err(MotionError::dim(
            "reconstruct",
            format!("{} displacements for {j} joints", displacements.len()),
        ));
    }
    let mut current = last_pose.to_vec();
    let mut out = Vec::with_capacity(displacements.len());
    for frame in displacements.chunks(j) {
        for (c, d) in current.iter_mut().zip(frame) {
            *c = add3(*c, *d);
        }
        out.extend_from_slice(&current);
    }
    PoseSequence::new(j, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_joint_displacements() {
        let seq = PoseSequence::new(1, vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0]]).unwrap();
        let ph = to_phase(&seq).unwrap();
        assert_eq!(ph.displacements(), &[[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
    }

    #[test]
    fn constant_pose_has_zero_displacement() {
        let seq = PoseSequence::new(2, [[4.0, 5.0, 6.0], [-1.0, 2.0, 0.0]].repeat(5)).unwrap();
        let ph = to_phase(&seq).unwrap();
        assert!(ph.displacements().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn one_frame_is_too_short() {
        let seq = PoseSequence::new(1, vec![[0.0; 3]]).unwrap();
        assert!(matches!(to_phase(&seq), Err(MotionError::InsufficientLength(_))));
    }

    #[test]
    fn reconstruct_zero_and_constant() {
        let last = [[1.0, 2.0, 3.0]];
        let seq = reconstruct(&last, &[[0.0; 3]; 4]).unwrap();
        assert!(seq.positions().iter().all(|p| *p == last[0]));

        let seq = reconstruct(&[[0.0; 3]], &[[1.0, 0.0, 0.0]; 3]).unwrap();
        assert_eq!(
            seq.positions(),
            &[[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0]]
        );
    }

    #[test]
    fn reconstruct_shape_error() {
        assert!(reconstruct(&[[0.0; 3]; 2], &[[0.0; 3]; 3]).is_err());
    }
}
