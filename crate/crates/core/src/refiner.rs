//! Global affinity refinement of predicted displacements.
//!
//! Every (future frame, joint) displacement is projected by two pointwise
//! linear maps `γ` and `φ`; their inner products form a `K×K` logit matrix,
//! `K = n·J`, normalised into an affinity `A`. The refined field is the
//! residual update `ω̂_q = ω̃_q + Σ_q' A[q, q'] ω̃_q'`.
//!
//! Positions are flattened frame-major: column `q = i·J + j`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MotionError, Result};
use crate::numkernel::{Tape, Tensor, Var};

/// Axis the affinity logits are normalised over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffinityNorm {
    /// Each row (target position) is a distribution over source positions.
    #[default]
    Rows,
    /// Each column sums to one instead.
    Columns,
}

/// Weights of the two `1×1` projections.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinerParams {
    pub gamma_w: Tensor,
    pub gamma_b: Tensor,
    pub phi_w: Tensor,
    pub phi_b: Tensor,
}

impl RefinerParams {
    pub fn identity() -> Self {
        RefinerParams {
            gamma_w: Tensor::eye(3),
            gamma_b: Tensor::zeros(&[3]),
            phi_w: Tensor::eye(3),
            phi_b: Tensor::zeros(&[3]),
        }
    }

    pub fn zeros() -> Self {
        RefinerParams {
            gamma_w: Tensor::zeros(&[3, 3]),
            gamma_b: Tensor::zeros(&[3]),
            phi_w: Tensor::zeros(&[3, 3]),
            phi_b: Tensor::zeros(&[3]),
        }
    }
}

/// `γ` and `φ`, each `3 × K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionFeatures {
    pub gamma: Tensor,
    pub phi: Tensor,
}

impl ProjectionFeatures {
    pub fn positions(&self) -> usize {
        self.gamma.shape()[1]
    }
}

/// Row- or column-stochastic `K × K` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix(pub Tensor);

impl AffinityMatrix {
    pub fn size(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn get(&self, target: usize, source: usize) -> f64 {
        self.0.at2(target, source)
    }

    /// Row-major text dump, one row per line.
    pub fn to_text(&self) -> String {
        let k = self.size();
        let mut s = String::new();
        for r in 0..k {
            for c in 0..k {
                if c > 0 {
                    s.push(' ');
                }
                write!(s, "{:.17e}", self.get(r, c)).expect("string write");
            }
            s.push('\n');
        }
        s
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| MotionError::io(path, e))
    }
}

/// `n × J × 3` field as a `K × 3` matrix (row `q = i·J + j`).
fn as_rows(omega: &Tensor) -> Result<Tensor> {
    match omega.shape() {
        [n, j, 3] => omega.reshape(&[n * j, 3]),
        [_, 3] => Ok(omega.clone()),
        other => Err(MotionError::dim(
            "refiner",
            format!("expected an n×J×3 displacement field, got {other:?}"),
        )),
    }
}

/// Pointwise projection of `K × 3` displacement rows: returns `K × 3`
/// (the transpose of the `3 × K` feature matrix).
pub(crate) fn project_on_tape(tape: &mut Tape, omega: Var, w: Var, b: Var) -> Result<Var> {
    let wt = tape.transpose(w)?;
    let lin = tape.matmul(omega, wt)?;
    tape.add_row_bias(lin, b)
}

pub(crate) fn affinity_on_tape(tape: &mut Tape, gamma_rows: Var, phi_rows: Var, norm: AffinityNorm) -> Result<Var> {
    let phi_t = tape.transpose(phi_rows)?;
    let logits = tape.matmul(gamma_rows, phi_t)?;
    match norm {
        AffinityNorm::Rows => tape.softmax_rows(logits),
        AffinityNorm::Columns => {
            let t = tape.transpose(logits)?;
            let s = tape.softmax_rows(t)?;
            tape.transpose(s)
        }
    }
}

pub(crate) fn refine_on_tape(tape: &mut Tape, omega: Var, affinity: Var) -> Result<Var> {
    let mixed = tape.matmul(affinity, omega)?;
    tape.add(omega, mixed)
}

/// Refiner parameters bound on a tape.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RefinerVars {
    pub gamma_w: Var,
    pub gamma_b: Var,
    pub phi_w: Var,
    pub phi_b: Var,
}

/// Full project → affinity → refine pass over `K × 3` rows. Returns
/// `(ω̂ rows, A)`.
pub(crate) fn refiner_on_tape(tape: &mut Tape, omega: Var, p: RefinerVars, norm: AffinityNorm) -> Result<(Var, Var)> {
    tape.refine(
        omega,
        (p.gamma_w, p.gamma_b),
        (p.phi_w, p.phi_b),
        norm == AffinityNorm::Columns,
    )
}

/// Same pass composed from primitive ops; kept as a cross-check for the fused
/// node.
#[cfg(test)]
pub(crate) fn refiner_on_tape_composed(
    tape: &mut Tape,
    omega: Var,
    p: RefinerVars,
    norm: AffinityNorm,
) -> Result<(Var, Var)> {
    let g = project_on_tape(tape, omega, p.gamma_w, p.gamma_b)?;
    let f = project_on_tape(tape, omega, p.phi_w, p.phi_b)?;
    let a = affinity_on_tape(tape, g, f, norm)?;
    let out = refine_on_tape(tape, omega, a)?;
    Ok((out, a))
}

pub fn project(omega: &Tensor, params: &RefinerParams) -> Result<ProjectionFeatures> {
    let rows = as_rows(omega)?;
    let mut tape = Tape::new();
    let o = tape.constant(rows);
    let gw = tape.constant(params.gamma_w.clone());
    let gb = tape.constant(params.gamma_b.clone());
    let pw = tape.constant(params.phi_w.clone());
    let pb = tape.constant(params.phi_b.clone());
    let g = project_on_tape(&mut tape, o, gw, gb)?;
    let f = project_on_tape(&mut tape, o, pw, pb)?;
    Ok(ProjectionFeatures {
        gamma: tape.value(g).transpose()?,
        phi: tape.value(f).transpose()?,
    })
}

pub fn affinity(features: &ProjectionFeatures, norm: AffinityNorm) -> Result<AffinityMatrix> {
    let (c, k) = features.gamma.matrix_dims("affinity")?;
    if c != 3 || features.phi.shape() != [3, k] {
        return Err(MotionError::dim(
            "affinity",
            format!("γ {:?} and φ {:?} must both be 3×K", features.gamma.shape(), features.phi.shape()),
        ));
    }
    let mut tape = Tape::new();
    let g = tape.constant(features.gamma.transpose()?);
    let f = tape.constant(features.phi.transpose()?);
    let a = affinity_on_tape(&mut tape, g, f, norm)?;
    Ok(AffinityMatrix(tape.value(a).clone()))
}

/// Residual refinement with a fixed affinity; output has `omega`'s shape.
pub fn refine(omega: &Tensor, a: &AffinityMatrix) -> Result<Tensor> {
    let rows = as_rows(omega)?;
    if a.0.shape() != [rows.shape()[0], rows.shape()[0]] {
        return Err(MotionError::dim(
            "refine",
            format!("affinity {:?} for {} positions", a.0.shape(), rows.shape()[0]),
        ));
    }
    let mut tape = Tape::new();
    let o = tape.constant(rows);
    let av = tape.constant(a.0.clone());
    let out = refine_on_tape(&mut tape, o, av)?;
    tape.value(out).reshape(omega.shape())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(n: usize, j: usize, f: impl Fn(usize) -> f64) -> Tensor {
        Tensor::new(vec![n, j, 3], (0..n * j * 3).map(f).collect()).unwrap()
    }

    #[test]
    fn identity_projection_reshapes() {
        let w = field(2, 3, |i| i as f64 * 0.5 - 1.0);
        let pf = project(&w, &RefinerParams::identity()).unwrap();
        for q in 0..6 {
            for c in 0..3 {
                assert_eq!(pf.gamma.at2(c, q), w.data()[q * 3 + c]);
            }
        }
    }

    #[test]
    fn zero_projection_gives_zero_features_and_uniform_affinity() {
        let w = field(2, 3, |i| i as f64);
        let pf = project(&w, &RefinerParams::zeros()).unwrap();
        assert!(pf.gamma.data().iter().chain(pf.phi.data()).all(|&v| v == 0.0));
        let a = affinity(&pf, AffinityNorm::Rows).unwrap();
        assert!(a.0.data().iter().all(|&v| (v - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn single_position_affinity_is_one() {
        let pf = ProjectionFeatures {
            gamma: Tensor::new(vec![3, 1], vec![1.0, -2.0, 3.0]).unwrap(),
            phi: Tensor::new(vec![3, 1], vec![0.5, 0.5, 9.0]).unwrap(),
        };
        assert_eq!(affinity(&pf, AffinityNorm::Rows).unwrap().0.data(), &[1.0]);
    }

    #[test]
    fn constant_field_doubles() {
        let v = [1.5, -2.0, 0.25];
        let w = field(3, 2, |i| v[i % 3]);
        let pf = project(&w, &RefinerParams::identity()).unwrap();
        let a = affinity(&pf, AffinityNorm::Rows).unwrap();
        let out = refine(&w, &a).unwrap();
        for (o, i) in out.data().iter().zip(w.data()) {
            assert!((o - 2.0 * i).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_field_stays_zero() {
        let w = Tensor::zeros(&[2, 2, 3]);
        let a = AffinityMatrix(Tensor::full(&[4, 4], 0.25));
        assert!(refine(&w, &a).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn column_norm_sums_columns() {
        let w = field(2, 2, |i| (i as f64 * 0.7).sin());
        let pf = project(&w, &RefinerParams::identity()).unwrap();
        let a = affinity(&pf, AffinityNorm::Columns).unwrap();
        for c in 0..4 {
            let s: f64 = (0..4).map(|r| a.get(r, c)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn refine_shape_mismatch() {
        let w = Tensor::zeros(&[2, 2, 3]);
        let a = AffinityMatrix(Tensor::full(&[3, 3], 1.0 / 3.0));
        assert!(matches!(refine(&w, &a), Err(MotionError::Dimension { .. })));
    }

    #[test]
    fn text_dump_has_one_row_per_line() {
        let a = AffinityMatrix(Tensor::full(&[3, 3], 1.0 / 3.0));
        let text = a.to_text();
        assert_eq!(text.lines().count(), 3);
        let row: Vec<f64> = text.lines().next().unwrap().split(' ').map(|x| x.parse().unwrap()).collect();
        assert_eq!(row, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn fused_pass_matches_composed_ops() {
        use crate::numkernel::Tape;
        let k = 11;
        let val = |n: usize, off: f64| -> Vec<f64> { (0..n).map(|i| ((i as f64 * 0.731 + off).sin()) * 0.9).collect() };
        for norm in [AffinityNorm::Rows, AffinityNorm::Columns] {
            let mut results = Vec::new();
            for fused in [true, false] {
                let mut tape = Tape::new();
                let omega = tape.param(Tensor::new(vec![k, 3], val(k * 3, 0.1)).unwrap());
                let p = RefinerVars {
                    gamma_w: tape.param(Tensor::new(vec![3, 3], val(9, 1.3)).unwrap()),
                    gamma_b: tape.param(Tensor::new(vec![3], val(3, 2.2)).unwrap()),
                    phi_w: tape.param(Tensor::new(vec![3, 3], val(9, 3.7)).unwrap()),
                    phi_b: tape.param(Tensor::new(vec![3], val(3, 4.1)).unwrap()),
                };
                let (out, a) = if fused {
                    refiner_on_tape(&mut tape, omega, p, norm).unwrap()
                } else {
                    refiner_on_tape_composed(&mut tape, omega, p, norm).unwrap()
                };
                let probe = tape.constant(Tensor::new(vec![k, 3], val(k * 3, 5.0)).unwrap());
                let prod = tape.mul(out, probe).unwrap();
                let loss = tape.sum(prod);
                let g = tape.backward(loss).unwrap();
                let mut flat = tape.value(out).data().to_vec();
                flat.extend_from_slice(tape.value(a).data());
                for v in [omega, p.gamma_w, p.gamma_b, p.phi_w, p.phi_b] {
                    flat.extend_from_slice(g.get(v).data());
                }
                results.push(flat);
            }
            for (x, y) in results[0].iter().zip(&results[1]) {
                assert!((x - y).abs() < 1e-12, "{norm:?}: {x} vs {y}");
            }
        }
    }
}
