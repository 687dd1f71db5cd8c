#![allow(clippy::needless_range_loop)]

use phasemotion::gradcheck::{self, REL_TOLERANCE};
use phasemotion::phasespace::to_phase;
use phasemotion::{AblationSpec, Model, ModelConfig, PoseSequence, Skeleton, Tensor, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(ablation: AblationSpec, horizon: usize) -> ModelConfig {
    ModelConfig {
        hidden: 4,
        horizon,
        ablation,
        ..ModelConfig::default()
    }
}

fn random_seq(rng: &mut ChaCha8Rng, frames: usize, joints: usize) -> PoseSequence {
    let pos: Vec<Vec3> = (0..frames * joints).map(|_| [(); 3].map(|_| rng.gen_range(-800.0..800.0))).collect();
    PoseSequence::new(joints, pos).unwrap()
}

fn joint_bits(t: &Tensor, joints: usize, j: usize) -> Vec<u64> {
    let n = t.shape()[0];
    (0..n).flat_map(|i| (0..3).map(move |c| (i, c))).map(|(i, c)| t.data()[(i * joints + j) * 3 + c].to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn explicit_stage_is_local_on_the_eval_skeleton(seed in any::<u64>(), j in 0usize..22, moved in prop::collection::vec(0usize..22, 1..6)) {
        let skel = Skeleton::default_eval();
        let model = Model::new(config(AblationSpec::FULL, 3), skel.clone(), seed % 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_seq(&mut rng, 10, 22);
        let related = model.relations().get(j).to_vec();
        let outside: Vec<usize> = moved.into_iter().filter(|k| !related.contains(k)).collect();
        let mut pos = base.positions().to_vec();
        for (i, p) in pos.iter_mut().enumerate() {
            if outside.contains(&(i % 22)) {
                p.iter_mut().for_each(|v| *v += rng.gen_range(-200.0..200.0));
            }
        }
        let a = model.forward(&to_phase(&base).unwrap()).unwrap();
        let b = model.forward(&to_phase(&PoseSequence::new(22, pos).unwrap()).unwrap()).unwrap();
        prop_assert_eq!(joint_bits(&a, 22, j), joint_bits(&b, 22, j));
    }
}

#[test]
fn explicit_off_makes_every_joint_independent() {
    let skel = Skeleton::toy();
    let off = AblationSpec { use_explicit: false, ..AblationSpec::FULL };
    let model = Model::new(config(off, 3), skel.clone(), 0).unwrap();
    assert!(model.relations().iter().enumerate().all(|(j, c)| c == [j]));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let base = random_seq(&mut rng, 10, 7);
    let a = model.forward(&to_phase(&base).unwrap()).unwrap();
    for k in 0..7 {
        let mut pos = base.positions().to_vec();
        for f in 0..10 {
            pos[f * 7 + k][0] += 50.0;
        }
        let b = model.forward(&to_phase(&PoseSequence::new(7, pos).unwrap()).unwrap()).unwrap();
        for j in (0..7).filter(|&j| j != k) {
            assert_eq!(joint_bits(&a, 7, j), joint_bits(&b, 7, j));
        }
    }
}

#[test]
fn implicit_off_passes_the_explicit_output_through() {
    let off = AblationSpec { use_implicit: false, ..AblationSpec::FULL };
    let model = Model::new(config(off, 5), Skeleton::toy(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = model.predict(&random_seq(&mut rng, 10, 7)).unwrap();
    assert!(p.affinity.is_none());
    let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&p.omega_hat), bits(&p.omega_tilde));
}

#[test]
fn predictions_reconstruct_from_the_last_observed_pose() {
    let model = Model::new(config(AblationSpec::FULL, 4), Skeleton::toy(), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let observed = random_seq(&mut rng, 10, 7);
    let p = model.predict(&observed).unwrap();
    let mut cur = observed.pose(9).to_vec();
    for i in 0..4 {
        for (j, c) in cur.iter_mut().enumerate() {
            for a in 0..3 {
                c[a] += p.omega_hat.at3(i, j, a);
            }
        }
        assert_eq!(p.poses.pose(i), &cur[..]);
    }
}

#[test]
fn full_model_gradients_match_finite_differences() {
    for seed in 0..3 {
        let r = gradcheck::check_model(seed).unwrap();
        assert!(r.max_rel_error < REL_TOLERANCE, "seed {seed}: {}", r.max_rel_error);
    }
}
