//! Reverse-mode differentiation over a linear tape.
//!
//! Every recorded node holds its forward value. Node order is the recording
//! order, which is a topological order, so [`Tape::backward`] is a single
//! reverse sweep.

use crate::error::{MotionError, Result};

use super::ops::{self, ConvPlan, GruCache, RefineCache};
use super::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Source of one gathered element: `(part, flat index)` or a literal zero.
pub type Pick = Option<(u32, u32)>;

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Vec<f64>),
    /// `a: p×q` plus a length-`q` bias broadcast over rows.
    AddRowBias(Var, Var),
    Transpose(Var),
    SoftmaxRows(Var),
    Tanh(Var),
    Sigmoid(Var),
    Sum(Var),
    Gather {
        parts: Vec<Var>,
        picks: Vec<Pick>,
    },
    Conv {
        signal: Var,
        kernel: Var,
        offsets: Var,
        plan: Box<ConvPlan>,
    },
    Gru {
        x: Var,
        h: Var,
        w: Var,
        u: Var,
        b: Var,
        cache: Box<GruCache>,
    },
    /// `w·x + b` for a vector `x`.
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    /// Fused affinity refinement over `K × 3` rows.
    Refine {
        omega: Var,
        gamma_w: Var,
        gamma_b: Var,
        phi_w: Var,
        phi_b: Var,
        cache: Box<RefineCache>,
    },
    /// `Σ_r weights[r]·‖pred_r − target_r‖²` over rows of width `width`.
    WeightedSqError {
        pred: Var,
        target: Vec<f64>,
        weights: Vec<f64>,
        width: usize,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Single-writer record of a forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Adjoint of `v`; zeros if `v` does not reach the loss.
    pub fn get(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    pub fn get_ref(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Differentiable leaf, e.g. a parameter.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = ops::matmul(self.value(a), self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(MotionError::dim(
                op,
                format!("shapes {:?} and {:?} differ", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::new(va.shape().to_vec(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.zip_with(a, b, |x, y| x + y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = self.zip_with(a, b, |x, y| x - y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.zip_with(a, b, |x, y| x * y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|x| x * s);
        let rg = self.rg(&[a]);
        self.push(value, Op::Scale(a, s), rg)
    }

    /// Elementwise product with a constant mask (dropout).
    pub fn mul_const(&mut self, a: Var, mask: Vec<f64>) -> Result<Var> {
        if mask.len() != self.value(a).len() {
            return Err(MotionError::dim(
                "mul_const",
                format!("mask of {} for shape {:?}", mask.len(), self.shape(a)),
            ));
        }
        let va = self.value(a);
        let data = va.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.rg(&[a]);
        Ok(self.push(value, Op::MulConst(a, mask), rg))
    }

    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (p, q) = self.value(a).matrix_dims("add_row_bias")?;
        if self.value(bias).len() != q {
            return Err(MotionError::dim(
                "add_row_bias",
                format!("bias {:?} for matrix {:?}", self.shape(bias), self.shape(a)),
            ));
        }
        let b = self.value(bias).data().to_vec();
        let mut data = self.value(a).data().to_vec();
        for r in 0..p {
            for c in 0..q {
                data[r * q + c] += b[c];
            }
        }
        let rg = self.rg(&[a, bias]);
        Ok(self.push(Tensor::new(vec![p, q], data)?, Op::AddRowBias(a, bias), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).transpose()?;
        let rg = self.rg(&[a]);
        Ok(self.push(value, Op::Transpose(a), rg))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let value = ops::softmax_rows(self.value(a))?;
        let rg = self.rg(&[a]);
        Ok(self.push(value, Op::SoftmaxRows(a), rg))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        let rg = self.rg(&[a]);
        self.push(value, Op::Tanh(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(ops::sigmoid);
        let rg = self.rg(&[a]);
        self.push(value, Op::Sigmoid(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(&[a]);
        self.push(value, Op::Sum(a), rg)
    }

    /// Builds a tensor of `shape` whose elements are picked from `parts`.
    /// This one primitive covers concatenation, slicing, stacking and padding.
    pub fn gather(&mut self, parts: &[Var], picks: Vec<Pick>, shape: &[usize]) -> Result<Var> {
        if picks.len() != shape.iter().product::<usize>() {
            return Err(MotionError::dim(
                "gather",
                format!("{} picks for shape {shape:?}", picks.len()),
            ));
        }
        let mut data = Vec::with_capacity(picks.len());
        for p in &picks {
            data.push(match *p {
                None => 0.0,
                Some((part, idx)) => {
                    let src = parts.get(part as usize).ok_or_else(|| {
                        MotionError::dim("gather", format!("part {part} of {}", parts.len()))
                    })?;
                    *self.value(*src).data().get(idx as usize).ok_or_else(|| {
                        MotionError::dim("gather", format!("index {idx} past {:?}", self.shape(*src)))
                    })?
                }
            });
        }
        let rg = self.rg(parts);
        Ok(self.push(
            Tensor::new(shape.to_vec(), data)?,
            Op::Gather {
                parts: parts.to_vec(),
                picks,
            },
            rg,
        ))
    }

    /// Flat concatenation into a vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut picks = Vec::new();
        for (pi, v) in parts.iter().enumerate() {
            for idx in 0..self.value(*v).len() {
                picks.push(Some((pi as u32, idx as u32)));
            }
        }
        let n = picks.len();
        self.gather(parts, picks, &[n])
    }

    /// Stacks equal-length vectors as rows of a matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        let width = rows.first().map_or(0, |r| self.value(*r).len());
        if rows.iter().any(|r| self.value(*r).len() != width) {
            return Err(MotionError::dim("stack_rows", "rows differ in length"));
        }
        let flat = self.concat(rows)?;
        let value = self.value(flat).reshape(&[rows.len(), width])?;
        // Relabel the concat node's value in place; gather is shape-agnostic.
        self.nodes[flat.0].value = value;
        Ok(flat)
    }

    pub fn dilated_conv1d(&mut self, signal: Var, kernel: Var, dilation: usize, offsets: Var) -> Result<Var> {
        let plan = ops::conv_plan(self.value(signal), self.value(kernel), dilation, self.value(offsets))?;
        let out = ops::conv_forward(&plan, self.value(signal).data(), self.value(kernel).data());
        let value = Tensor::new(vec![plan.c_out, plan.out_len], out)?;
        let rg = self.rg(&[signal, kernel, offsets]);
        Ok(self.push(
            value,
            Op::Conv {
                signal,
                kernel,
                offsets,
                plan: Box::new(plan),
            },
            rg,
        ))
    }

    pub fn gru_cell(&mut self, x: Var, h: Var, w: Var, u: Var, b: Var) -> Result<Var> {
        ops::gru_check(self.value(x), self.value(h), self.value(w), self.value(u), self.value(b))?;
        let (out, cache) = ops::gru_forward(
            self.value(x).data(),
            self.value(h).data(),
            self.value(w).data(),
            self.value(u).data(),
            self.value(b).data(),
        );
        let rg = self.rg(&[x, h, w, u, b]);
        Ok(self.push(
            Tensor::vector(out),
            Op::Gru {
                x,
                h,
                w,
                u,
                b,
                cache: Box::new(cache),
            },
            rg,
        ))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (o, d) = self.value(w).matrix_dims("linear")?;
        if self.value(x).len() != d || self.value(b).len() != o {
            return Err(MotionError::dim(
                "linear",
                format!(
                    "x {:?}, w {:?}, b {:?}",
                    self.shape(x),
                    self.shape(w),
                    self.shape(b)
                ),
            ));
        }
        let mut out = self.value(b).data().to_vec();
        ops::matmul_into(self.value(w).data(), self.value(x).data(), &mut out, o, d, 1);
        let rg = self.rg(&[x, w, b]);
        Ok(self.push(Tensor::vector(out), Op::Linear { x, w, b }, rg))
    }

    /// `Ω + A·Ω` with `A` the row- (or column-) normalised `exp(Γ Φᵀ)`,
    /// `Γ = Ω Wγᵀ + bγ`, `Φ = Ω Wφᵀ + bφ`, for `Ω: K × 3`. Same result as
    /// composing the primitive ops, in one node. The returned affinity is a
    /// constant snapshot; gradients flow through the first output only.
    pub fn refine(
        &mut self,
        omega: Var,
        gamma: (Var, Var),
        phi: (Var, Var),
        columns: bool,
    ) -> Result<(Var, Var)> {
        let (k, c) = self.value(omega).matrix_dims("refine")?;
        let ok = c == 3
            && [gamma.0, phi.0].iter().all(|w| self.shape(*w) == [3, 3])
            && [gamma.1, phi.1].iter().all(|b| self.value(*b).len() == 3);
        if !ok {
            return Err(MotionError::dim(
                "refine",
                format!(
                    "rows {:?}, maps {:?}/{:?}, biases {:?}/{:?}",
                    self.shape(omega),
                    self.shape(gamma.0),
                    self.shape(phi.0),
                    self.shape(gamma.1),
                    self.shape(phi.1)
                ),
            ));
        }
        let (out, cache) = ops::refine_forward(
            self.value(omega).data(),
            self.value(gamma.0).data(),
            self.value(gamma.1).data(),
            self.value(phi.0).data(),
            self.value(phi.1).data(),
            columns,
        );
        let a = Tensor::new(vec![k, k], cache.a.clone())?;
        let rg = self.rg(&[omega, gamma.0, gamma.1, phi.0, phi.1]);
        let out = self.push(
            Tensor::new(vec![k, 3], out)?,
            Op::Refine {
                omega,
                gamma_w: gamma.0,
                gamma_b: gamma.1,
                phi_w: phi.0,
                phi_b: phi.1,
                cache: Box::new(cache),
            },
            rg,
        );
        let a = self.constant(a);
        Ok((out, a))
    }

    pub fn weighted_sq_error(&mut self, pred: Var, target: &Tensor, weights: &[f64]) -> Result<Var> {
        let p = self.value(pred);
        if p.len() != target.len() || weights.is_empty() || !p.len().is_multiple_of(weights.len()) {
            return Err(MotionError::dim(
                "weighted_sq_error",
                format!(
                    "prediction {:?}, target {:?}, {} weights",
                    p.shape(),
                    target.shape(),
                    weights.len()
                ),
            ));
        }
        let width = p.len() / weights.len();
        let mut total = 0.0;
        for (r, w) in weights.iter().enumerate() {
            let mut sq = 0.0;
            for c in 0..width {
                let e = p.data()[r * width + c] - target.data()[r * width + c];
                sq += e * e;
            }
            total += w * sq;
        }
        let rg = self.rg(&[pred]);
        Ok(self.push(
            Tensor::scalar(total),
            Op::WeightedSqError {
                pred,
                target: target.data().to_vec(),
                weights: weights.to_vec(),
                width,
            },
            rg,
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(MotionError::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(lv.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    /// Adjoint slot of `v` for in-place accumulation; `None` when `v` takes
    /// no gradient.
    fn take_adjoint(&self, grads: &mut [Option<Tensor>], v: Var) -> Option<Tensor> {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        Some(grads[v.0].take().unwrap_or_else(|| Tensor::zeros(node.value.shape())))
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let nodes = &self.nodes;
        let acc = |grads: &mut [Option<Tensor>], v: Var, data: Vec<f64>| {
            if !nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => {
                    for (e, d) in existing.data_mut().iter_mut().zip(&data) {
                        *e += d;
                    }
                }
                slot @ None => {
                    *slot = Some(Tensor::new(nodes[v.0].value.shape().to_vec(), data).expect("adjoint shape"))
                }
            }
        };
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let va = &nodes[a.0].value;
                let vb = &nodes[b.0].value;
                let (p, q) = (va.shape()[0], va.shape()[1]);
                let r = vb.shape()[1];
                let mut da = vec![0.0; p * q];
                ops::matmul_nt_into(gd, vb.data(), &mut da, p, r, q);
                acc(grads, *a, da);
                let mut db = vec![0.0; q * r];
                ops::matmul_tn_into(va.data(), gd, &mut db, p, q, r);
                acc(grads, *b, db);
            }
            Op::Add(a, b) => {
                acc(grads, *a, gd.to_vec());
                acc(grads, *b, gd.to_vec());
            }
            Op::Sub(a, b) => {
                acc(grads, *a, gd.to_vec());
                acc(grads, *b, gd.iter().map(|x| -x).collect());
            }
            Op::Mul(a, b) => {
                let va = nodes[a.0].value.data();
                let vb = nodes[b.0].value.data();
                acc(grads, *a, gd.iter().zip(vb).map(|(g, y)| g * y).collect());
                acc(grads, *b, gd.iter().zip(va).map(|(g, x)| g * x).collect());
            }
            Op::Scale(a, s) => acc(grads, *a, gd.iter().map(|g| g * s).collect()),
            Op::MulConst(a, mask) => acc(grads, *a, gd.iter().zip(mask).map(|(g, m)| g * m).collect()),
            Op::AddRowBias(a, bias) => {
                acc(grads, *a, gd.to_vec());
                let q = nodes[bias.0].value.len();
                let mut db = vec![0.0; q];
                for (i, gv) in gd.iter().enumerate() {
                    db[i % q] += gv;
                }
                acc(grads, *bias, db);
            }
            Op::Transpose(a) => {
                let t = g.transpose().expect("matrix");
                acc(grads, *a, t.into_data());
            }
            Op::SoftmaxRows(a) => {
                let (rows, cols) = (node.value.shape()[0], node.value.shape()[1]);
                acc(grads, *a, ops::softmax_rows_backward(node.value.data(), gd, rows, cols));
            }
            Op::Tanh(a) => acc(
                grads,
                *a,
                gd.iter().zip(node.value.data()).map(|(g, y)| g * (1.0 - y * y)).collect(),
            ),
            Op::Sigmoid(a) => acc(
                grads,
                *a,
                gd.iter().zip(node.value.data()).map(|(g, y)| g * y * (1.0 - y)).collect(),
            ),
            Op::Sum(a) => acc(grads, *a, vec![gd[0]; nodes[a.0].value.len()]),
            Op::Gather { parts, picks } => {
                let mut bufs: Vec<Vec<f64>> = parts.iter().map(|p| vec![0.0; nodes[p.0].value.len()]).collect();
                for (gv, pick) in gd.iter().zip(picks) {
                    if let Some((part, idx)) = pick {
                        bufs[*part as usize][*idx as usize] += gv;
                    }
                }
                for (p, buf) in parts.iter().zip(bufs) {
                    acc(grads, *p, buf);
                }
            }
            Op::Conv {
                signal,
                kernel,
                offsets,
                plan,
            } => {
                let cg = ops::conv_backward(plan, nodes[signal.0].value.data(), nodes[kernel.0].value.data(), gd);
                acc(grads, *signal, cg.signal);
                acc(grads, *kernel, cg.kernel);
                acc(grads, *offsets, cg.offsets);
            }
            Op::Gru { x, h, w, u, b, cache } => {
                // Weight adjoints are accumulated in place: one cell per
                // step would otherwise allocate a full matrix each time.
                let mut dw = self.take_adjoint(grads, *w);
                let mut du = self.take_adjoint(grads, *u);
                let gg = ops::gru_backward(
                    nodes[x.0].value.data(),
                    nodes[h.0].value.data(),
                    nodes[w.0].value.data(),
                    nodes[u.0].value.data(),
                    cache,
                    gd,
                    dw.as_mut().map(|t| t.data_mut()),
                    du.as_mut().map(|t| t.data_mut()),
                );
                grads[w.0] = dw;
                grads[u.0] = du;
                acc(grads, *x, gg.x);
                acc(grads, *h, gg.h);
                acc(grads, *b, gg.b);
            }
            Op::Linear { x, w, b } => {
                let vx = nodes[x.0].value.data();
                let vw = nodes[w.0].value.data();
                let (o, d) = (vw.len() / vx.len(), vx.len());
                let mut dx = vec![0.0; d];
                ops::matmul_tn_into(vw, gd, &mut dx, o, d, 1);
                acc(grads, *x, dx);
                let mut dw = vec![0.0; o * d];
                for r in 0..o {
                    for c in 0..d {
                        dw[r * d + c] = gd[r] * vx[c];
                    }
                }
                acc(grads, *w, dw);
                acc(grads, *b, gd.to_vec());
            }
            Op::Refine {
                omega,
                gamma_w,
                gamma_b,
                phi_w,
                phi_b,
                cache,
            } => {
                let rg = ops::refine_backward(
                    nodes[omega.0].value.data(),
                    nodes[gamma_w.0].value.data(),
                    nodes[phi_w.0].value.data(),
                    cache,
                    gd,
                );
                acc(grads, *omega, rg.omega);
                acc(grads, *gamma_w, rg.gamma_w);
                acc(grads, *gamma_b, rg.gamma_b);
                acc(grads, *phi_w, rg.phi_w);
                acc(grads, *phi_b, rg.phi_b);
            }
            Op::WeightedSqError {
                pred,
                target,
                weights,
                width,
            } => {
                let p = nodes[pred.0].value.data();
                let mut dp = vec![0.0; p.len()];
                for (r, w) in weights.iter().enumerate() {
                    for c in 0..*width {
                        let i = r * width + c;
                        dp[i] = gd[0] * 2.0 * w * (p[i] - target[i]);
                    }
                }
                acc(grads, *pred, dp);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, -2.0, 3.0, 0.5, 7.0]));
        let loss = tape.sum(x);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(x).data(), &[1.0; 5]);
    }

    #[test]
    fn square_sum_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0]));
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum(sq);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(x).data(), &[2.0, 4.0]);
    }

    #[test]
    fn non_scalar_loss_is_usage_error() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(MotionError::Usage(_))));
    }

    #[test]
    fn unreachable_values_get_zero_adjoint() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0]));
        let y = tape.param(Tensor::vector(vec![3.0, 4.0]));
        let _unused = tape.mul(y, y).unwrap();
        let loss = tape.sum(x);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(y).data(), &[0.0, 0.0]);
        assert!(g.get_ref(y).is_none());
    }

    #[test]
    fn constants_do_not_collect_gradients() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::vector(vec![1.0, 2.0]));
        let x = tape.param(Tensor::vector(vec![3.0, 4.0]));
        let p = tape.mul(c, x).unwrap();
        let loss = tape.sum(p);
        let g = tape.backward(loss).unwrap();
        assert!(g.get_ref(c).is_none());
        assert_eq!(g.get(x).data(), &[1.0, 2.0]);
    }

    #[test]
    fn weighted_sq_error_value() {
        let mut tape = Tape::new();
        let p = tape.param(Tensor::vector(vec![3.0, 4.0, 0.0]));
        let loss = tape
            .weighted_sq_error(p, &Tensor::zeros(&[3]), &[1.0])
            .unwrap();
        assert_eq!(tape.value(loss).item(), 25.0);
    }

    #[test]
    fn gather_pads_with_zeros() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::vector(vec![1.0, 2.0]));
        let out = tape.gather(&[a], vec![Some((0, 1)), None, Some((0, 0))], &[3]).unwrap();
        assert_eq!(tape.value(out).data(), &[2.0, 0.0, 1.0]);
        let loss = tape.sum(out);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(a).data(), &[1.0, 1.0]);
    }
}
