//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export is a thin wrapper over a plain function so the logic can be
//! tested natively.

use phasemotion::data::{make_windows, synth, synth_dataset, SynthKind, DEFAULT_FPS};
use phasemotion::eval::{self, Baseline, DEFAULT_HORIZONS_MS};
use phasemotion::phasespace::to_phase;
use phasemotion::refiner::{self, AffinityNorm, RefinerParams};
use phasemotion::{MotionError, Result, Skeleton, Tensor};
use wasm_bindgen::prelude::*;

const HISTORY: usize = 9;

fn skeleton(name: &str) -> Result<Skeleton> {
    match name {
        "h36m22" => Ok(Skeleton::default_eval()),
        "toy7" => Ok(Skeleton::toy()),
        other => Err(MotionError::Usage(format!("unknown skeleton {other:?} (expected toy7 or h36m22)"))),
    }
}

/// `(child, parent)` index pairs for drawing bones.
pub fn bones(skel: &Skeleton) -> Vec<u32> {
    (0..skel.len())
        .filter_map(|j| skel.parent(j).map(|p| [j as u32, p as u32]))
        .flatten()
        .collect()
}

/// Flat `frames × J × 3` positions of one synthetic sequence.
pub fn trajectory(kind: &str, skel: &Skeleton, frames: usize, seed: u64) -> Result<Vec<f64>> {
    let seq = synth(kind.parse()?, skel, frames, seed)?;
    Ok(seq.positions().iter().flatten().copied().collect())
}

/// Row-normalised affinity over the true future displacements of the window
/// starting at `start`, with both projections set to `sharpness · I`.
/// Returns `K × K` row-major, `K = horizon · J`.
pub fn affinity(kind: &str, skel: &Skeleton, seed: u64, start: usize, horizon: usize, sharpness: f64) -> Result<Vec<f64>> {
    let frames = start + HISTORY + 1 + horizon;
    let seq = synth(kind.parse()?, skel, frames, seed)?;
    // displacements from the last observed frame through the horizon
    let ph = to_phase(&seq.slice(start + HISTORY, frames))?;
    let j = skel.len();
    // model units: decimetres per frame
    let field: Vec<f64> = ph.displacements().iter().flatten().map(|v| v / 10.0).collect();
    let omega = Tensor::new(vec![horizon, j, 3], field)?;
    let mut p = RefinerParams::identity();
    p.gamma_w = Tensor::eye(3).map(|v| v * sharpness);
    p.phi_w = p.gamma_w.clone();
    let a = refiner::affinity(&refiner::project(&omega, &p)?, AffinityNorm::Rows)?;
    Ok(a.0.into_data())
}

/// MPJPE of the zero- and constant-velocity baselines at the default
/// horizons, concatenated: seven values each.
pub fn baseline_curves(kind: &str, skel: &Skeleton, seed: u64, sequences: usize) -> Result<Vec<f64>> {
    let kind: SynthKind = kind.parse()?;
    let ds = synth_dataset(kind, skel, 80, seed, sequences.max(1))?;
    let windows = make_windows(&ds, HISTORY, 25, 5)?;
    let mut out = Vec::with_capacity(14);
    for b in [Baseline::ZeroVelocity, Baseline::ConstantVelocity] {
        out.extend(eval::horizon_report(&b, &windows, &DEFAULT_HORIZONS_MS, DEFAULT_FPS)?.mean_over_windows);
    }
    Ok(out)
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = jointCount)]
pub fn joint_count(skel: &str) -> std::result::Result<usize, JsError> {
    Ok(js(skeleton(skel))?.len())
}

#[wasm_bindgen(js_name = jointNames)]
pub fn joint_names(skel: &str) -> std::result::Result<Vec<String>, JsError> {
    Ok(js(skeleton(skel))?.names().to_vec())
}

#[wasm_bindgen(js_name = bones)]
pub fn js_bones(skel: &str) -> std::result::Result<Vec<u32>, JsError> {
    Ok(bones(&js(skeleton(skel))?))
}

#[wasm_bindgen(js_name = trajectory)]
pub fn js_trajectory(kind: &str, skel: &str, frames: usize, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    js(skeleton(skel).and_then(|s| trajectory(kind, &s, frames, seed.into())))
}

#[wasm_bindgen(js_name = affinity)]
pub fn js_affinity(
    kind: &str,
    skel: &str,
    seed: u32,
    start: usize,
    horizon: usize,
    sharpness: f64,
) -> std::result::Result<Vec<f64>, JsError> {
    js(skeleton(skel).and_then(|s| affinity(kind, &s, seed.into(), start, horizon, sharpness)))
}

#[wasm_bindgen(js_name = baselineCurves)]
pub fn js_baseline_curves(kind: &str, skel: &str, seed: u32, sequences: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(skeleton(skel).and_then(|s| baseline_curves(kind, &s, seed.into(), sequences)))
}

#[wasm_bindgen(js_name = horizonsMs)]
pub fn horizons_ms() -> Vec<f64> {
    DEFAULT_HORIZONS_MS.to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let s = Skeleton::toy();
        assert_eq!(bones(&s).len(), 2 * (s.len() - 1));
        assert_eq!(trajectory("circle", &s, 12, 1).unwrap().len(), 12 * s.len() * 3);
        let k = 4 * s.len();
        let a = affinity("sinusoid_limbs", &s, 0, 3, 4, 2.0).unwrap();
        assert_eq!(a.len(), k * k);
        for row in a.chunks(k) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(trajectory("spiral", &s, 5, 0).is_err());
        assert!(skeleton("toy8").is_err());
    }

    #[test]
    fn zero_sharpness_is_uniform() {
        let s = Skeleton::toy();
        let k = 3 * s.len();
        let a = affinity("circle", &s, 2, 0, 3, 0.0).unwrap();
        assert!(a.iter().all(|&v| (v - 1.0 / k as f64).abs() < 1e-15));
    }

    #[test]
    fn constant_velocity_baseline_is_exact_on_its_own_data() {
        let c = baseline_curves("constant_velocity", &Skeleton::toy(), 0, 2).unwrap();
        assert_eq!(c.len(), 14);
        assert!(c[..7].iter().all(|&v| v > 0.0));
        assert!(c[7..].iter().all(|&v| v < 1e-9));
    }
}
