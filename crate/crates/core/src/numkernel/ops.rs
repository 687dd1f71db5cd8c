//! Forward kernels and their vector-Jacobian products.
//!
//! The public functions here are the value-level entry points; the tape in
//! [`super::tape`] calls the same kernels when recording.

use crate::error::{MotionError, Result};

use super::Tensor;

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (p, q) = a.matrix_dims("matmul")?;
    let (q2, r) = b.matrix_dims("matmul")?;
    if q != q2 {
        return Err(MotionError::dim(
            "matmul",
            format!("cannot multiply {:?} by {:?}", a.shape(), b.shape()),
        ));
    }
    let mut out = vec![0.0; p * r];
    matmul_into(a.data(), b.data(), &mut out, p, q, r);
    Tensor::new(vec![p, r], out)
}

/// `out += a · b` for row-major `a: p×q`, `b: q×r`.
pub(crate) fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], p: usize, q: usize, r: usize) {
    for i in 0..p {
        let row = &mut out[i * r..(i + 1) * r];
        for k in 0..q {
            let aik = a[i * q + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * r..(k + 1) * r];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
}

/// `out += aᵀ · b` for `a: q×p`, `b: q×r` (result `p×r`).
pub(crate) fn matmul_tn_into(a: &[f64], b: &[f64], out: &mut [f64], q: usize, p: usize, r: usize) {
    for k in 0..q {
        let brow = &b[k * r..(k + 1) * r];
        for i in 0..p {
            let aki = a[k * p + i];
            if aki == 0.0 {
                continue;
            }
            let row = &mut out[i * r..(i + 1) * r];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += aki * bv;
            }
        }
    }
}

/// `out += a · bᵀ` for `a: p×q`, `b: r×q` (result `p×r`).
pub(crate) fn matmul_nt_into(a: &[f64], b: &[f64], out: &mut [f64], p: usize, q: usize, r: usize) {
    for i in 0..p {
        let arow = &a[i * q..(i + 1) * q];
        for j in 0..r {
            let brow = &b[j * q..(j + 1) * q];
            out[i * r + j] += arow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// Row-wise softmax with per-row max subtraction.
pub fn softmax_rows(logits: &Tensor) -> Result<Tensor> {
    let (rows, cols) = logits.matrix_dims("softmax_rows")?;
    let mut out = logits.data().to_vec();
    for r in 0..rows {
        let row = &mut out[r * cols..(r + 1) * cols];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Tensor::new(vec![rows, cols], out)
}

pub(crate) fn softmax_rows_backward(y: &[f64], g: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut dx = vec![0.0; rows * cols];
    for r in 0..rows {
        let ys = &y[r * cols..(r + 1) * cols];
        let gs = &g[r * cols..(r + 1) * cols];
        let dot: f64 = ys.iter().zip(gs).map(|(a, b)| a * b).sum();
        for c in 0..cols {
            dx[r * cols + c] = ys[c] * (gs[c] - dot);
        }
    }
    dx
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// ---------------------------------------------------------------------------
// Deformable dilated temporal convolution

/// Resolved geometry of one deformable convolution call.
#[derive(Debug, Clone)]
pub(crate) struct ConvPlan {
    pub c_in: usize,
    pub len: usize,
    pub c_out: usize,
    pub k: usize,
    pub out_len: usize,
    /// For tap `i` and output step `t`, the left sample index and the
    /// interpolation weight of the right neighbour.
    pub taps: Vec<(usize, f64)>,
}

const OFFSET_SLACK: f64 = 1e-12;

/// Valid offset range for tap `i` so that every sampled time stays inside the
/// signal: `[-(i·d), (k-1-i)·d]`.
pub fn offset_bounds(tap: usize, kernel_size: usize, dilation: usize) -> (f64, f64) {
    let lo = -((tap * dilation) as f64);
    let hi = ((kernel_size - 1 - tap) * dilation) as f64;
    (lo, hi)
}

pub(crate) fn conv_plan(
    signal: &Tensor,
    kernel: &Tensor,
    dilation: usize,
    offsets: &Tensor,
) -> Result<ConvPlan> {
    const OP: &str = "dilated_conv1d";
    let (c_in, len) = signal.matrix_dims(OP)?;
    let (c_out, kc_in, k) = match kernel.shape() {
        [a, b, c] => (*a, *b, *c),
        other => {
            return Err(MotionError::dim(OP, format!("kernel must be c_out×c_in×k, got {other:?}")))
        }
    };
    if kc_in != c_in {
        return Err(MotionError::dim(
            OP,
            format!("kernel {:?} does not match signal {:?}", kernel.shape(), signal.shape()),
        ));
    }
    if dilation == 0 || k == 0 {
        return Err(MotionError::Domain {
            op: OP,
            detail: format!("dilation {dilation} and kernel size {k} must be positive"),
        });
    }
    if offsets.len() != k {
        return Err(MotionError::dim(
            OP,
            format!("expected {k} tap offsets, got shape {:?}", offsets.shape()),
        ));
    }
    let span = (k - 1) * dilation;
    if len < span + 1 {
        return Err(MotionError::dim(
            OP,
            format!("signal length {len} shorter than receptive field {}", span + 1),
        ));
    }
    let out_len = len - span;
    let mut taps = Vec::with_capacity(k * out_len);
    for (i, &off) in offsets.data().iter().enumerate() {
        let (lo, hi) = offset_bounds(i, k, dilation);
        if !off.is_finite() || off < lo - OFFSET_SLACK || off > hi + OFFSET_SLACK {
            return Err(MotionError::Domain {
                op: OP,
                detail: format!("offset {off} of tap {i} outside [{lo}, {hi}]"),
            });
        }
        for t in 0..out_len {
            let p = ((t + i * dilation) as f64 + off).clamp(0.0, (len - 1) as f64);
            let mut i0 = p.floor() as usize;
            let mut frac = p - i0 as f64;
            if i0 >= len - 1 {
                if len == 1 {
                    i0 = 0;
                    frac = 0.0;
                } else {
                    i0 = len - 2;
                    frac = 1.0;
                }
            }
            taps.push((i0, frac));
        }
    }
    Ok(ConvPlan {
        c_in,
        len,
        c_out,
        k,
        out_len,
        taps,
    })
}

#[inline]
fn sample(row: &[f64], i0: usize, frac: f64) -> f64 {
    if frac == 0.0 {
        row[i0]
    } else {
        row[i0] * (1.0 - frac) + row[i0 + 1] * frac
    }
}

pub(crate) fn conv_forward(plan: &ConvPlan, signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    let ConvPlan {
        c_in,
        len,
        c_out,
        k,
        out_len,
        ..
    } = *plan;
    let mut out = vec![0.0; c_out * out_len];
    for c in 0..c_in {
        let row = &signal[c * len..(c + 1) * len];
        for i in 0..k {
            let taps = &plan.taps[i * out_len..(i + 1) * out_len];
            for o in 0..c_out {
                let w = kernel[(o * c_in + c) * k + i];
                if w == 0.0 {
                    continue;
                }
                let orow = &mut out[o * out_len..(o + 1) * out_len];
                for (t, &(i0, frac)) in taps.iter().enumerate() {
                    orow[t] += w * sample(row, i0, frac);
                }
            }
        }
    }
    out
}

/// Gradients of the convolution w.r.t. signal, kernel and offsets.
pub(crate) struct ConvGrads {
    pub signal: Vec<f64>,
    pub kernel: Vec<f64>,
    pub offsets: Vec<f64>,
}

pub(crate) fn conv_backward(plan: &ConvPlan, signal: &[f64], kernel: &[f64], g: &[f64]) -> ConvGrads {
    let ConvPlan {
        c_in,
        len,
        c_out,
        k,
        out_len,
        ..
    } = *plan;
    let mut ds = vec![0.0; c_in * len];
    let mut dk = vec![0.0; kernel.len()];
    let mut doff = vec![0.0; k];
    for c in 0..c_in {
        let row = &signal[c * len..(c + 1) * len];
        for i in 0..k {
            let taps = &plan.taps[i * out_len..(i + 1) * out_len];
            for o in 0..c_out {
                let widx = (o * c_in + c) * k + i;
                let w = kernel[widx];
                let grow = &g[o * out_len..(o + 1) * out_len];
                let mut acc_k = 0.0;
                let mut acc_off = 0.0;
                for (t, &(i0, frac)) in taps.iter().enumerate() {
                    let gt = grow[t];
                    if gt == 0.0 {
                        continue;
                    }
                    acc_k += gt * sample(row, i0, frac);
                    if len > 1 {
                        acc_off += gt * (row[i0 + 1] - row[i0]);
                    }
                    ds[c * len + i0] += gt * w * (1.0 - frac);
                    if frac != 0.0 {
                        ds[c * len + i0 + 1] += gt * w * frac;
                    }
                }
                dk[widx] += acc_k;
                doff[i] += w * acc_off;
            }
        }
    }
    ConvGrads {
        signal: ds,
        kernel: dk,
        offsets: doff,
    }
}

/// Deformable dilated causal convolution along time.
///
/// `signal` is `c_in×L`, `kernel` is `c_out×c_in×k`. Output step `t` reads
/// tap `i` at fractional time `t + i·dilation + offsets[i]`, so the last tap
/// sits on the most recent sample (`t + (k-1)·dilation`) when its offset is
/// zero. Fractional times are linearly interpolated.
pub fn dilated_conv1d(
    signal: &Tensor,
    kernel: &Tensor,
    dilation: usize,
    offsets: &Tensor,
) -> Result<Tensor> {
    let plan = conv_plan(signal, kernel, dilation, offsets)?;
    let out = conv_forward(&plan, signal.data(), kernel.data());
    Tensor::new(vec![plan.c_out, plan.out_len], out)
}

// ---------------------------------------------------------------------------
// Gated recurrent unit

/// Weights of one GRU cell. Gate blocks are stacked in the order
/// update (z), reset (r), candidate (n).
#[derive(Debug, Clone, PartialEq)]
pub struct GruWeights {
    /// `3h × d_in`
    pub w: Tensor,
    /// `3h × h`
    pub u: Tensor,
    /// `3h`
    pub b: Tensor,
}

impl GruWeights {
    pub fn zeros(d_in: usize, hidden: usize) -> Self {
        GruWeights {
            w: Tensor::zeros(&[3 * hidden, d_in]),
            u: Tensor::zeros(&[3 * hidden, hidden]),
            b: Tensor::zeros(&[3 * hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.shape()[1]
    }

    pub fn input_width(&self) -> usize {
        self.w.shape()[1]
    }
}

pub(crate) fn gru_check(x: &Tensor, h: &Tensor, w: &Tensor, u: &Tensor, b: &Tensor) -> Result<(usize, usize)> {
    const OP: &str = "gru_cell";
    let (gh, d_in) = w.matrix_dims(OP)?;
    let (gh2, hid) = u.matrix_dims(OP)?;
    if gh != 3 * hid || gh2 != gh || b.len() != gh || x.len() != d_in || h.len() != hid {
        return Err(MotionError::dim(
            OP,
            format!(
                "x {:?}, h {:?}, w {:?}, u {:?}, b {:?} are inconsistent",
                x.shape(),
                h.shape(),
                w.shape(),
                u.shape(),
                b.shape()
            ),
        ));
    }
    Ok((d_in, hid))
}

/// Saved activations of one GRU step.
#[derive(Debug, Clone)]
pub(crate) struct GruCache {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    /// `r ⊙ h`
    pub s: Vec<f64>,
}

pub(crate) fn gru_forward(x: &[f64], h: &[f64], w: &[f64], u: &[f64], b: &[f64]) -> (Vec<f64>, GruCache) {
    let hid = h.len();
    let d_in = x.len();
    let dot = |row: &[f64], v: &[f64]| -> f64 { row.iter().zip(v).map(|(a, b)| a * b).sum() };
    // pre = W x + b for all three gates.
    let mut pre: Vec<f64> = w.chunks_exact(d_in).zip(b).map(|(row, bv)| dot(row, x) + bv).collect();
    let (zr, n_pre) = pre.split_at_mut(2 * hid);
    for (p, row) in zr.iter_mut().zip(u.chunks_exact(hid)) {
        *p = sigmoid(*p + dot(row, h));
    }
    let z = zr[..hid].to_vec();
    let r = zr[hid..].to_vec();
    let s: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let u_n = &u[2 * hid * hid..];
    let mut n = Vec::with_capacity(hid);
    let mut out = Vec::with_capacity(hid);
    for (q, (p, row)) in n_pre.iter().zip(u_n.chunks_exact(hid)).enumerate() {
        let nq = (p + dot(row, &s)).tanh();
        n.push(nq);
        out.push((1.0 - z[q]) * h[q] + z[q] * nq);
    }
    (out, GruCache { z, r, n, s })
}

pub(crate) struct GruGrads {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    pub b: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn gru_backward(
    x: &[f64],
    h: &[f64],
    w: &[f64],
    u: &[f64],
    cache: &GruCache,
    g: &[f64],
    mut dw: Option<&mut [f64]>,
    mut du: Option<&mut [f64]>,
) -> GruGrads {
    let hid = h.len();
    let d_in = x.len();
    let GruCache { z, r, n, s } = cache;
    // Pre-activation gradients, stacked like the weights.
    let mut da = vec![0.0; 3 * hid];
    let mut dh = vec![0.0; hid];
    for q in 0..hid {
        let dz = g[q] * (n[q] - h[q]);
        let dn = g[q] * z[q];
        dh[q] = g[q] * (1.0 - z[q]);
        da[q] = dz * z[q] * (1.0 - z[q]);
        da[2 * hid + q] = dn * (1.0 - n[q] * n[q]);
    }
    // ds = U_nᵀ · da_n
    let mut ds = vec![0.0; hid];
    for q in 0..hid {
        let a = da[2 * hid + q];
        if a == 0.0 {
            continue;
        }
        let urow = &u[(2 * hid + q) * hid..(2 * hid + q + 1) * hid];
        for (d, uv) in ds.iter_mut().zip(urow) {
            *d += a * uv;
        }
    }
    for q in 0..hid {
        dh[q] += ds[q] * r[q];
        let dr = ds[q] * h[q];
        da[hid + q] = dr * r[q] * (1.0 - r[q]);
    }

    let mut dx = vec![0.0; d_in];
    for row in 0..3 * hid {
        let a = da[row];
        if a == 0.0 {
            continue;
        }
        let hin: &[f64] = if row >= 2 * hid { s } else { h };
        let wrow = &w[row * d_in..(row + 1) * d_in];
        for (d, wv) in dx.iter_mut().zip(wrow) {
            *d += a * wv;
        }
        if let Some(dw) = dw.as_deref_mut() {
            for (d, xv) in dw[row * d_in..(row + 1) * d_in].iter_mut().zip(x) {
                *d += a * xv;
            }
        }
        if let Some(du) = du.as_deref_mut() {
            for (d, hv) in du[row * hid..(row + 1) * hid].iter_mut().zip(hin) {
                *d += a * hv;
            }
        }
        if row < 2 * hid {
            let urow = &u[row * hid..(row + 1) * hid];
            for (d, uv) in dh.iter_mut().zip(urow) {
                *d += a * uv;
            }
        }
    }
    GruGrads { x: dx, h: dh, b: da }
}

/// One GRU step: `h' = (1-z)⊙h + z⊙tanh(W_n x + U_n (r⊙h) + b_n)`.
pub fn gru_cell(x: &Tensor, h: &Tensor, weights: &GruWeights) -> Result<Tensor> {
    gru_check(x, h, &weights.w, &weights.u, &weights.b)?;
    let (out, _) = gru_forward(x.data(), h.data(), weights.w.data(), weights.u.data(), weights.b.data());
    Ok(Tensor::vector(out))
}

/// Saved forward state of the fused affinity refinement.
pub(crate) struct RefineCache {
    pub gamma: Vec<f64>,
    pub phi: Vec<f64>,
    /// `K × K` normalised affinity.
    pub a: Vec<f64>,
    pub columns: bool,
}

pub(crate) struct RefineGrads {
    pub omega: Vec<f64>,
    pub gamma_w: Vec<f64>,
    pub gamma_b: Vec<f64>,
    pub phi_w: Vec<f64>,
    pub phi_b: Vec<f64>,
}

/// `X·Wᵀ + b` for `K × 3` rows and a `3 × 3` map.
fn project3(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks_exact(3) {
        for c in 0..3 {
            out.push(w[c * 3] * row[0] + w[c * 3 + 1] * row[1] + w[c * 3 + 2] * row[2] + b[c]);
        }
    }
    out
}

fn dot3(a: &[f64], b: &[f64]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Fused `Ω + softmax(Γ Φᵀ)·Ω` over `K × 3` rows, normalising rows or
/// columns of the logits.
pub(crate) fn refine_forward(
    omega: &[f64],
    gw: &[f64],
    gb: &[f64],
    pw: &[f64],
    pb: &[f64],
    columns: bool,
) -> (Vec<f64>, RefineCache) {
    let k = omega.len() / 3;
    let gamma = project3(omega, gw, gb);
    let phi = project3(omega, pw, pb);
    let mut a = vec![0.0; k * k];
    for (arow, gq) in a.chunks_exact_mut(k).zip(gamma.chunks_exact(3)) {
        for (v, pr) in arow.iter_mut().zip(phi.chunks_exact(3)) {
            *v = dot3(gq, pr);
        }
    }
    if columns {
        let mut max = vec![f64::NEG_INFINITY; k];
        for row in a.chunks_exact(k) {
            for (m, v) in max.iter_mut().zip(row) {
                *m = m.max(*v);
            }
        }
        let mut total = vec![0.0; k];
        for row in a.chunks_exact_mut(k) {
            for ((v, m), t) in row.iter_mut().zip(&max).zip(total.iter_mut()) {
                *v = (*v - m).exp();
                *t += *v;
            }
        }
        for row in a.chunks_exact_mut(k) {
            for (v, t) in row.iter_mut().zip(&total) {
                *v /= t;
            }
        }
    } else {
        for row in a.chunks_exact_mut(k) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            let inv = 1.0 / total;
            for v in row.iter_mut() {
                *v *= inv;
            }
        }
    }
    let mut out = omega.to_vec();
    for (oq, arow) in out.chunks_exact_mut(3).zip(a.chunks_exact(k)) {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (&w, or) in arow.iter().zip(omega.chunks_exact(3)) {
            s0 += w * or[0];
            s1 += w * or[1];
            s2 += w * or[2];
        }
        oq[0] += s0;
        oq[1] += s1;
        oq[2] += s2;
    }
    (
        out,
        RefineCache {
            gamma,
            phi,
            a,
            columns,
        },
    )
}

pub(crate) fn refine_backward(omega: &[f64], gw: &[f64], pw: &[f64], cache: &RefineCache, g: &[f64]) -> RefineGrads {
    let k = omega.len() / 3;
    let a = &cache.a;
    let rows = |x: &[f64]| -> Vec<[f64; 3]> { x.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect() };
    let (om, gr, gam, phi) = (rows(omega), rows(g), rows(&cache.gamma), rows(&cache.phi));
    // P[q, r] = A[q, r]·(g_q · ω_r); the softmax Jacobian subtracts A times
    // the sum of P along the normalised axis.
    let mut p = vec![0.0; k * k];
    let mut norm_dot = vec![0.0; k];
    for (q, ((prow, arow), gq)) in p.chunks_exact_mut(k).zip(a.chunks_exact(k)).zip(&gr).enumerate() {
        let mut row_total = 0.0;
        for ((pv, &w), or) in prow.iter_mut().zip(arow).zip(&om) {
            *pv = w * dot3(gq, or);
            row_total += *pv;
        }
        if cache.columns {
            for (nd, pv) in norm_dot.iter_mut().zip(prow.iter()) {
                *nd += pv;
            }
        } else {
            norm_dot[q] = row_total;
        }
    }
    let mut d_omega = rows(g);
    let mut d_gamma = vec![[0.0; 3]; k];
    let mut d_phi = vec![[0.0; 3]; k];
    for (q, ((prow, arow), gq)) in p.chunks_exact(k).zip(a.chunks_exact(k)).zip(&gr).enumerate() {
        let gam_q = gam[q];
        let mut dg = [0.0; 3];
        let rows = prow.iter().zip(arow).zip(&phi).zip(&norm_dot);
        for ((((&pv, &w), pr), &nd_r), (dor, dpr)) in rows.zip(d_omega.iter_mut().zip(d_phi.iter_mut())) {
            let ds = pv - w * if cache.columns { nd_r } else { norm_dot[q] };
            for c in 0..3 {
                dor[c] += w * gq[c];
                dg[c] += ds * pr[c];
                dpr[c] += ds * gam_q[c];
            }
        }
        d_gamma[q] = dg;
    }
    let mut grads = RefineGrads {
        omega: Vec::new(),
        gamma_w: vec![0.0; 9],
        gamma_b: vec![0.0; 3],
        phi_w: vec![0.0; 9],
        phi_b: vec![0.0; 3],
    };
    for (d, w, dw, db) in [
        (&d_gamma, gw, &mut grads.gamma_w, &mut grads.gamma_b),
        (&d_phi, pw, &mut grads.phi_w, &mut grads.phi_b),
    ] {
        for ((dq, oq), dom) in d.iter().zip(&om).zip(d_omega.iter_mut()) {
            for c in 0..3 {
                db[c] += dq[c];
                for e in 0..3 {
                    dw[c * 3 + e] += dq[c] * oq[e];
                    dom[e] += dq[c] * w[c * 3 + e];
                }
            }
        }
    }
    grads.omega = d_omega.into_iter().flatten().collect();
    grads
}
