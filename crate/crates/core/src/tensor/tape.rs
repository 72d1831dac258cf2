//! Tape-based reverse mode over a small fixed set of layer primitives.
//!
//! A [`Tape`] borrows a [`ParamStore`] read-only, records each operation's
//! output, and [`Tape::backward`] walks the records in reverse to produce a
//! [`Gradients`] buffer. Values are plain `Vec<f64>`; scalars are length-1.

use super::kernels::{
    gru_backward, gru_forward, matvec, matvec_t_add, outer_add, GruCache, GruDims, GruGrads,
};
use super::store::{Gradients, ParamId, ParamStore};
use super::TensorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Parameter ids of one GRU cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruParams {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b_ih: ParamId,
    pub b_hh: ParamId,
    pub dims: GruDims,
}

impl GruParams {
    pub fn register(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize) -> Self {
        Self {
            w_ih: store.add_matrix(&format!("{prefix}.w_ih"), 3 * hidden, input),
            w_hh: store.add_matrix(&format!("{prefix}.w_hh"), 3 * hidden, hidden),
            b_ih: store.add_zeros(&format!("{prefix}.b_ih"), &[3 * hidden]),
            b_hh: store.add_zeros(&format!("{prefix}.b_hh"), &[3 * hidden]),
            dims: GruDims { input, hidden },
        }
    }
}

/// Weight matrix plus optional bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearParams {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub rows: usize,
    pub cols: usize,
}

impl LinearParams {
    pub fn register(store: &mut ParamStore, prefix: &str, input: usize, output: usize) -> Self {
        Self {
            w: store.add_matrix(&format!("{prefix}.w"), output, input),
            b: Some(store.add_zeros(&format!("{prefix}.b"), &[output])),
            rows: output,
            cols: input,
        }
    }

    /// Zero-initialized weights and bias.
    pub fn register_zero(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        output: usize,
    ) -> Self {
        Self {
            w: store.add_zeros(&format!("{prefix}.w"), &[output, input]),
            b: Some(store.add_zeros(&format!("{prefix}.b"), &[output])),
            rows: output,
            cols: input,
        }
    }
}

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Linear(LinearParams, Var),
    Embed { table: ParamId, row: usize },
    Concat(Vec<Var>),
    Gru(GruParams, Var, Var, Box<GruCache>),
    Tanh(Var),
    LogSoftmax(Var),
    Softmax(Var),
    Pick(Var, usize),
    Dot(Var, Var),
    Entropy(Var),
    WeightedSum(Var, Vec<Var>),
    Sum(Vec<(Var, f64)>),
    SqErr(Var, f64),
}

struct Node {
    value: Vec<f64>,
    op: Op,
}

pub struct Tape<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn input(&mut self, x: Vec<f64>) -> Var {
        self.push(x, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.store.value(id).to_vec();
        self.push(value, Op::Param(id))
    }

    pub fn linear(&mut self, p: LinearParams, x: Var) -> Result<Var, TensorError> {
        let xv = self.value(x);
        if xv.len() != p.cols {
            return Err(TensorError::Shape(format!(
                "linear expects input {}, got {}",
                p.cols,
                xv.len()
            )));
        }
        let mut y = match p.b {
            Some(b) => self.store.value(b).to_vec(),
            None => vec![0.0; p.rows],
        };
        matvec(self.store.value(p.w), p.rows, p.cols, xv, &mut y);
        Ok(self.push(y, Op::Linear(p, x)))
    }

    pub fn embed(&mut self, table: ParamId, row: usize) -> Result<Var, TensorError> {
        let shape = &self.store.param(table).shape;
        let (rows, dim) = (shape[0], shape[1]);
        if row >= rows {
            return Err(TensorError::Label {
                label: row,
                classes: rows,
            });
        }
        let value = self.store.value(table)[row * dim..(row + 1) * dim].to_vec();
        Ok(self.push(value, Op::Embed { table, row }))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let value = parts
            .iter()
            .flat_map(|&v| self.value(v).iter().copied())
            .collect();
        self.push(value, Op::Concat(parts.to_vec()))
    }

    pub fn gru(&mut self, p: GruParams, x: Var, h: Var) -> Result<Var, TensorError> {
        let (xv, hv) = (self.value(x), self.value(h));
        if xv.len() != p.dims.input || hv.len() != p.dims.hidden {
            return Err(TensorError::Shape(format!(
                "gru expects input {} / hidden {}, got {} / {}",
                p.dims.input,
                p.dims.hidden,
                xv.len(),
                hv.len()
            )));
        }
        let s = self.store;
        let (out, cache) = gru_forward(
            s.value(p.w_ih),
            s.value(p.w_hh),
            s.value(p.b_ih),
            s.value(p.b_hh),
            p.dims,
            xv,
            hv,
        );
        Ok(self.push(out, Op::Gru(p, x, h, Box::new(cache))))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|v| v.tanh()).collect();
        self.push(value, Op::Tanh(x))
    }

    pub fn log_softmax(&mut self, x: Var) -> Var {
        let value = log_softmax(self.value(x));
        self.push(value, Op::LogSoftmax(x))
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let value = softmax(self.value(x));
        self.push(value, Op::Softmax(x))
    }

    pub fn pick(&mut self, x: Var, index: usize) -> Result<Var, TensorError> {
        let n = self.value(x).len();
        if index >= n {
            return Err(TensorError::Label {
                label: index,
                classes: n,
            });
        }
        let v = self.value(x)[index];
        Ok(self.push(vec![v], Op::Pick(x, index)))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.len() != bv.len() {
            return Err(TensorError::Shape(format!(
                "dot of {} and {}",
                av.len(),
                bv.len()
            )));
        }
        let v = av.iter().zip(bv).map(|(x, y)| x * y).sum();
        Ok(self.push(vec![v], Op::Dot(a, b)))
    }

    /// Entropy `-Σ p log p` of the distribution given by log-probabilities.
    pub fn entropy(&mut self, log_probs: Var) -> Var {
        let v = -self
            .value(log_probs)
            .iter()
            .map(|lp| lp.exp() * lp)
            .sum::<f64>();
        self.push(vec![v], Op::Entropy(log_probs))
    }

    /// `Σ_j w_j · items_j` for a weight vector and equally sized items.
    pub fn weighted_sum(&mut self, weights: Var, items: &[Var]) -> Result<Var, TensorError> {
        let w = self.value(weights);
        if w.len() != items.len() || items.is_empty() {
            return Err(TensorError::Shape(format!(
                "{} weights for {} items",
                w.len(),
                items.len()
            )));
        }
        let dim = self.value(items[0]).len();
        let mut out = vec![0.0; dim];
        for (j, &it) in items.iter().enumerate() {
            let iv = self.value(it);
            if iv.len() != dim {
                return Err(TensorError::Shape(
                    "weighted_sum items differ in size".into(),
                ));
            }
            for (o, x) in out.iter_mut().zip(iv) {
                *o += w[j] * x;
            }
        }
        Ok(self.push(out, Op::WeightedSum(weights, items.to_vec())))
    }

    /// Linear combination of scalar vars.
    pub fn sum(&mut self, terms: &[(Var, f64)]) -> Var {
        let v = terms.iter().map(|&(t, c)| c * self.scalar(t)).sum();
        self.push(vec![v], Op::Sum(terms.to_vec()))
    }

    /// `(x - target)^2` for a scalar var.
    pub fn sq_err(&mut self, x: Var, target: f64) -> Var {
        let d = self.scalar(x) - target;
        self.push(vec![d * d], Op::SqErr(x, target))
    }

    /// Cross-entropy `-log softmax(logits)[label]`.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var, TensorError> {
        let lp = self.log_softmax(logits);
        let picked = self.pick(lp, label)?;
        Ok(self.sum(&[(picked, -1.0)]))
    }

    /// Reverse pass from a scalar loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(TensorError::Usage(
                "backward called without a recorded forward pass".into(),
            ));
        }
        if self.nodes[loss.0].value.len() != 1 {
            return Err(TensorError::Usage(format!(
                "backward needs a scalar loss, got length {}",
                self.nodes[loss.0].value.len()
            )));
        }
        let mut grads = Gradients::for_store(self.store);
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);

        fn acc(adj: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
            adj[v.0].get_or_insert_with(|| vec![0.0; len])
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    for (a, b) in grads.slot(*id, g.len()).iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                Op::Linear(p, x) => {
                    let xv = &self.nodes[x.0].value;
                    outer_add(grads.slot(p.w, p.rows * p.cols), &g, xv);
                    if let Some(b) = p.b {
                        for (a, d) in grads.slot(b, p.rows).iter_mut().zip(&g) {
                            *a += d;
                        }
                    }
                    let dx = acc(&mut adj, *x, p.cols);
                    matvec_t_add(self.store.value(p.w), p.rows, p.cols, &g, dx);
                }
                Op::Embed { table, row } => {
                    let dim = g.len();
                    let n = self.store.value(*table).len();
                    let slot = grads.slot(*table, n);
                    for (a, d) in slot[row * dim..(row + 1) * dim].iter_mut().zip(&g) {
                        *a += d;
                    }
                }
                Op::Concat(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let n = self.nodes[p.0].value.len();
                        for (a, d) in acc(&mut adj, p, n).iter_mut().zip(&g[at..at + n]) {
                            *a += d;
                        }
                        at += n;
                    }
                }
                Op::Gru(p, x, h, cache) => {
                    let s = self.store;
                    let (xv, hv) = (&self.nodes[x.0].value, &self.nodes[h.0].value);
                    let mut dx = vec![0.0; p.dims.input];
                    let mut dh = vec![0.0; p.dims.hidden];
                    let h3 = 3 * p.dims.hidden;
                    let mut dw_ih = vec![0.0; h3 * p.dims.input];
                    let mut dw_hh = vec![0.0; h3 * p.dims.hidden];
                    let mut db_ih = vec![0.0; h3];
                    let mut db_hh = vec![0.0; h3];
                    gru_backward(
                        s.value(p.w_ih),
                        s.value(p.w_hh),
                        p.dims,
                        xv,
                        hv,
                        cache,
                        &g,
                        GruGrads {
                            w_ih: &mut dw_ih,
                            w_hh: &mut dw_hh,
                            b_ih: &mut db_ih,
                            b_hh: &mut db_hh,
                        },
                        &mut dx,
                        &mut dh,
                    );
                    for (id, d) in [
                        (p.w_ih, &dw_ih),
                        (p.w_hh, &dw_hh),
                        (p.b_ih, &db_ih),
                        (p.b_hh, &db_hh),
                    ] {
                        for (a, v) in grads.slot(id, d.len()).iter_mut().zip(d) {
                            *a += v;
                        }
                    }
                    for (a, d) in acc(&mut adj, *x, dx.len()).iter_mut().zip(&dx) {
                        *a += d;
                    }
                    for (a, d) in acc(&mut adj, *h, dh.len()).iter_mut().zip(&dh) {
                        *a += d;
                    }
                }
                Op::Tanh(x) => {
                    let y = &node.value;
                    for ((a, d), yv) in acc(&mut adj, *x, y.len()).iter_mut().zip(&g).zip(y) {
                        *a += d * (1.0 - yv * yv);
                    }
                }
                Op::LogSoftmax(x) => {
                    let lp = &node.value;
                    let total: f64 = g.iter().sum();
                    for ((a, d), l) in acc(&mut adj, *x, lp.len()).iter_mut().zip(&g).zip(lp) {
                        *a += d - l.exp() * total;
                    }
                }
                Op::Softmax(x) => {
                    let p = &node.value;
                    let dot: f64 = g.iter().zip(p).map(|(d, pv)| d * pv).sum();
                    for ((a, d), pv) in acc(&mut adj, *x, p.len()).iter_mut().zip(&g).zip(p) {
                        *a += pv * (d - dot);
                    }
                }
                Op::Pick(x, idx) => {
                    let n = self.nodes[x.0].value.len();
                    acc(&mut adj, *x, n)[*idx] += g[0];
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (self.nodes[a.0].value.clone(), self.nodes[b.0].value.clone());
                    for (s, y) in acc(&mut adj, *a, av.len()).iter_mut().zip(&bv) {
                        *s += g[0] * y;
                    }
                    for (s, x) in acc(&mut adj, *b, bv.len()).iter_mut().zip(&av) {
                        *s += g[0] * x;
                    }
                }
                Op::Entropy(lp_var) => {
                    // H = -Σ p l with p = exp(l), l = log-probs (treated as free inputs)
                    let lp = &self.nodes[lp_var.0].value;
                    for (a, l) in acc(&mut adj, *lp_var, lp.len()).iter_mut().zip(lp) {
                        *a += -g[0] * l.exp() * (l + 1.0);
                    }
                }
                Op::WeightedSum(w, items) => {
                    let wv = self.nodes[w.0].value.clone();
                    let mut dw = vec![0.0; wv.len()];
                    for (j, &it) in items.iter().enumerate() {
                        let iv = &self.nodes[it.0].value;
                        dw[j] = iv.iter().zip(&g).map(|(x, d)| x * d).sum();
                        for (a, d) in acc(&mut adj, it, g.len()).iter_mut().zip(&g) {
                            *a += wv[j] * d;
                        }
                    }
                    for (a, d) in acc(&mut adj, *w, dw.len()).iter_mut().zip(&dw) {
                        *a += d;
                    }
                }
                Op::Sum(terms) => {
                    for &(t, c) in terms {
                        acc(&mut adj, t, 1)[0] += c * g[0];
                    }
                }
                Op::SqErr(x, target) => {
                    let d = self.nodes[x.0].value[0] - target;
                    acc(&mut adj, *x, 1)[0] += 2.0 * d * g[0];
                }
            }
        }
        Ok(grads)
    }
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

/// `-log p[label]` for an explicit distribution; probabilities are clamped
/// at 1e-300 so a zero entry gives a large finite loss.
pub fn cross_entropy(dist: &[f64], label: usize) -> Result<f64, TensorError> {
    let p = *dist.get(label).ok_or(TensorError::Label {
        label,
        classes: dist.len(),
    })?;
    Ok(-p.max(1e-300).ln())
}
