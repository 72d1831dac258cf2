//! Dense kernels shared by the tape and the reference tests.

use serde::{Deserialize, Serialize};

/// `y += W x` for a row-major `rows x cols` matrix.
pub fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    for (r, yr) in y.iter_mut().enumerate().take(rows) {
        let row = &w[r * cols..(r + 1) * cols];
        *yr += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `dx += W^T g`.
pub fn matvec_t_add(w: &[f64], rows: usize, cols: usize, g: &[f64], dx: &mut [f64]) {
    for r in 0..rows {
        let gr = g[r];
        if gr == 0.0 {
            continue;
        }
        for (d, a) in dx.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
            *d += gr * a;
        }
    }
}

/// `dW += g x^T`.
pub fn outer_add(dw: &mut [f64], g: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, gr) in g.iter().enumerate() {
        if *gr == 0.0 {
            continue;
        }
        for (d, xv) in dw[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *d += gr * xv;
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GruDims {
    pub input: usize,
    pub hidden: usize,
}

/// Gate activations saved by the forward pass.
#[derive(Debug, Clone)]
pub struct GruCache {
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub n: Vec<f64>,
    /// `(W_hn h + b_hn)`, needed for the reset-gate gradient.
    pub gh_n: Vec<f64>,
}

/// Gate layout is `[reset, update, new]` along the `3H` rows.
/// `h' = (1 - z) * n + z * h`, `n = tanh(W_in x + b_in + r * (W_hn h + b_hn))`.
pub fn gru_forward(
    w_ih: &[f64],
    w_hh: &[f64],
    b_ih: &[f64],
    b_hh: &[f64],
    dims: GruDims,
    x: &[f64],
    h: &[f64],
) -> (Vec<f64>, GruCache) {
    let hd = dims.hidden;
    let mut gi = b_ih.to_vec();
    matvec(w_ih, 3 * hd, dims.input, x, &mut gi);
    let mut gh = b_hh.to_vec();
    matvec(w_hh, 3 * hd, hd, h, &mut gh);
    let mut cache = GruCache {
        r: Vec::with_capacity(hd),
        z: Vec::with_capacity(hd),
        n: Vec::with_capacity(hd),
        gh_n: gh[2 * hd..].to_vec(),
    };
    let mut out = Vec::with_capacity(hd);
    for k in 0..hd {
        let r = sigmoid(gi[k] + gh[k]);
        let z = sigmoid(gi[hd + k] + gh[hd + k]);
        let n = (gi[2 * hd + k] + r * gh[2 * hd + k]).tanh();
        out.push((1.0 - z) * n + z * h[k]);
        cache.r.push(r);
        cache.z.push(z);
        cache.n.push(n);
    }
    (out, cache)
}

/// Accumulators for the GRU parameter gradients.
pub struct GruGrads<'a> {
    pub w_ih: &'a mut [f64],
    pub w_hh: &'a mut [f64],
    pub b_ih: &'a mut [f64],
    pub b_hh: &'a mut [f64],
}

#[allow(clippy::too_many_arguments)]
pub fn gru_backward(
    w_ih: &[f64],
    w_hh: &[f64],
    dims: GruDims,
    x: &[f64],
    h: &[f64],
    cache: &GruCache,
    dout: &[f64],
    grads: GruGrads<'_>,
    dx: &mut [f64],
    dh: &mut [f64],
) {
    let hd = dims.hidden;
    let mut dgi = vec![0.0; 3 * hd];
    let mut dgh = vec![0.0; 3 * hd];
    for k in 0..hd {
        let (r, z, n) = (cache.r[k], cache.z[k], cache.n[k]);
        let d = dout[k];
        let dn_pre = d * (1.0 - z) * (1.0 - n * n);
        let dz_pre = d * (h[k] - n) * z * (1.0 - z);
        let dr_pre = dn_pre * cache.gh_n[k] * r * (1.0 - r);
        dgi[k] = dr_pre;
        dgi[hd + k] = dz_pre;
        dgi[2 * hd + k] = dn_pre;
        dgh[k] = dr_pre;
        dgh[hd + k] = dz_pre;
        dgh[2 * hd + k] = dn_pre * r;
        dh[k] += d * z;
    }
    outer_add(grads.w_ih, &dgi, x);
    outer_add(grads.w_hh, &dgh, h);
    for (a, b) in grads.b_ih.iter_mut().zip(&dgi) {
        *a += b;
    }
    for (a, b) in grads.b_hh.iter_mut().zip(&dgh) {
        *a += b;
    }
    matvec_t_add(w_ih, 3 * hd, dims.input, &dgi, dx);
    matvec_t_add(w_hh, 3 * hd, hd, &dgh, dh);
}
