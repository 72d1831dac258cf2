//! Named parameter arrays with gradient accumulators, Adam state and
//! checkpointing.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TensorError;

pub type ParamId = usize;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u64,
    touched: bool,
}

impl Param {
    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    /// Whether the accumulator has received a gradient since the last update.
    pub fn touched(&self) -> bool {
        self.touched
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Sparse per-parameter gradient buffer, aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn new(n_params: usize) -> Self {
        Self {
            grads: vec![None; n_params],
        }
    }

    pub fn for_store(store: &ParamStore) -> Self {
        Self::new(store.len())
    }

    pub fn slot(&mut self, id: ParamId, len: usize) -> &mut [f64] {
        if id >= self.grads.len() {
            self.grads.resize(id + 1, None);
        }
        self.grads[id].get_or_insert_with(|| vec![0.0; len])
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.grads.get(id).and_then(|g| g.as_deref())
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_deref().map(|g| (i, g)))
    }

    pub fn merge(&mut self, other: &Gradients) {
        for (id, g) in other.iter() {
            for (a, b) in self.slot(id, g.len()).iter_mut().zip(g) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for g in self.grads.iter_mut().flatten() {
            g.iter_mut().for_each(|x| *x *= c);
        }
    }

    pub fn norm(&self) -> f64 {
        self.iter()
            .flat_map(|(_, g)| g.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|(_, g)| g.iter().all(|x| x.is_finite()))
    }
}

#[derive(Debug, Clone)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: BTreeMap<String, ParamId>,
    version: u64,
    seed: u64,
    rng: ChaCha8Rng,
    /// Free-form provenance (training houses, completed stages), carried
    /// through checkpoints.
    pub meta: BTreeMap<String, String>,
}

impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.version == other.version && self.seed == other.seed
    }
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        Self {
            params: Vec::new(),
            by_name: BTreeMap::new(),
            version: 0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            meta: BTreeMap::new(),
        }
    }

    fn push(&mut self, name: &str, shape: Vec<usize>, value: Vec<f64>) -> ParamId {
        assert!(
            !self.by_name.contains_key(name),
            "duplicate parameter {name}"
        );
        let n = value.len();
        let id = self.params.len();
        self.params.push(Param {
            name: name.to_string(),
            shape,
            value,
            grad: vec![0.0; n],
            m: vec![0.0; n],
            v: vec![0.0; n],
            steps: 0,
            touched: false,
        });
        self.by_name.insert(name.to_string(), id);
        id
    }

    /// `rows x cols` matrix drawn from U(-1/sqrt(cols), 1/sqrt(cols)).
    pub fn add_matrix(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        let bound = 1.0 / (cols.max(1) as f64).sqrt();
        let value = (0..rows * cols)
            .map(|_| self.rng.gen_range(-bound..=bound))
            .collect();
        self.push(name, vec![rows, cols], value)
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> ParamId {
        let n = shape.iter().product();
        self.push(name, shape.to_vec(), vec![0.0; n])
    }

    pub fn add_values(&mut self, name: &str, shape: &[usize], value: Vec<f64>) -> ParamId {
        assert_eq!(shape.iter().product::<usize>(), value.len());
        self.push(name, shape.to_vec(), value)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id]
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        &self.params[id].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id].value
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.params[id].grad
    }

    pub fn ids_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = ParamId> + 'a {
        self.by_name
            .range(prefix.to_string()..)
            .take_while(move |(k, _)| k.starts_with(prefix))
            .map(|(_, &v)| v)
    }

    /// Adds a gradient buffer into the accumulators.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (id, g) in grads.iter() {
            let p = &mut self.params[id];
            assert_eq!(
                p.grad.len(),
                g.len(),
                "gradient shape mismatch for {}",
                p.name
            );
            for (a, b) in p.grad.iter_mut().zip(g) {
                *a += b;
            }
            p.touched = true;
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
            p.touched = false;
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .flat_map(|p| p.grad.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales accumulators so their global norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm > max_norm && norm.is_finite() {
            let c = max_norm / norm;
            for p in &mut self.params {
                p.grad.iter_mut().for_each(|g| *g *= c);
            }
        }
        norm
    }

    /// Adam update on every parameter that received a gradient since the
    /// last step, then clears the accumulators and bumps the version.
    /// Non-finite gradients reject the whole update and leave the store
    /// untouched apart from clearing the accumulators.
    pub fn optimizer_step(&mut self, cfg: &AdamConfig) -> Result<(), TensorError> {
        if let Some(p) = self
            .params
            .iter()
            .find(|p| p.touched && p.grad.iter().any(|g| !g.is_finite()))
        {
            let name = p.name.clone();
            self.zero_grad();
            return Err(TensorError::NonFiniteGradient(name));
        }
        for p in self.params.iter_mut().filter(|p| p.touched) {
            p.steps += 1;
            let bc1 = 1.0 - cfg.beta1.powi(p.steps as i32);
            let bc2 = 1.0 - cfg.beta2.powi(p.steps as i32);
            for i in 0..p.value.len() {
                let g = p.grad[i];
                p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
                p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
                let m_hat = p.m[i] / bc1;
                let v_hat = p.v[i] / bc2;
                p.value[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        self.zero_grad();
        self.version += 1;
        debug_assert!(self.all_finite(), "non-finite parameter after update");
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.params
            .iter()
            .all(|p| p.value.iter().all(|x| x.is_finite()))
    }

    /// Copies parameter values (not optimizer state) from `other` for every
    /// name present in both stores with the same shape.
    pub fn copy_values_from(
        &mut self,
        other: &ParamStore,
        prefix: &str,
    ) -> Result<usize, TensorError> {
        let mut n = 0;
        for p in self
            .params
            .iter_mut()
            .filter(|p| p.name.starts_with(prefix))
        {
            let id = other
                .id(&p.name)
                .ok_or_else(|| TensorError::Checkpoint(format!("missing parameter {}", p.name)))?;
            let q = &other.params[id];
            if q.shape != p.shape {
                return Err(TensorError::Checkpoint(format!(
                    "parameter {}: shape {:?} does not match {:?}",
                    p.name, q.shape, p.shape
                )));
            }
            p.value.copy_from_slice(&q.value);
            n += 1;
        }
        Ok(n)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            version: self.version,
            seed: self.seed,
            rng_word_pos: self.rng.get_word_pos(),
            meta: self.meta.clone(),
            params: self
                .params
                .iter()
                .map(|p| CheckpointParam {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    values: p.value.clone(),
                    adam_m: p.m.clone(),
                    adam_v: p.v.clone(),
                    adam_steps: p.steps,
                })
                .collect(),
        }
    }

    /// Restores values, optimizer moments, version and RNG state into a
    /// store with the same architecture.
    pub fn load_checkpoint(&mut self, ckpt: &Checkpoint) -> Result<(), TensorError> {
        if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(TensorError::Checkpoint(format!(
                "checkpoint format version {} unsupported (expected {CHECKPOINT_FORMAT_VERSION})",
                ckpt.format_version
            )));
        }
        if ckpt.params.len() != self.params.len() {
            return Err(TensorError::Checkpoint(format!(
                "checkpoint has {} parameters, model has {}",
                ckpt.params.len(),
                self.params.len()
            )));
        }
        for cp in &ckpt.params {
            let id = self
                .id(&cp.name)
                .ok_or_else(|| TensorError::Checkpoint(format!("unknown parameter {}", cp.name)))?;
            let p = &self.params[id];
            if cp.shape != p.shape {
                return Err(TensorError::Checkpoint(format!(
                    "parameter {}: checkpoint shape {:?} does not match model shape {:?}",
                    cp.name, cp.shape, p.shape
                )));
            }
            let n = p.value.len();
            if cp.values.len() != n || cp.adam_m.len() != n || cp.adam_v.len() != n {
                return Err(TensorError::Checkpoint(format!(
                    "parameter {}: value count mismatch",
                    cp.name
                )));
            }
        }
        for cp in &ckpt.params {
            let id = self.by_name[&cp.name];
            let p = &mut self.params[id];
            p.value.copy_from_slice(&cp.values);
            p.m.copy_from_slice(&cp.adam_m);
            p.v.copy_from_slice(&cp.adam_v);
            p.steps = cp.adam_steps;
            p.grad.iter_mut().for_each(|g| *g = 0.0);
            p.touched = false;
        }
        self.version = ckpt.version;
        self.seed = ckpt.seed;
        self.rng = ChaCha8Rng::seed_from_u64(ckpt.seed);
        self.rng.set_word_pos(ckpt.rng_word_pos);
        self.meta = ckpt.meta.clone();
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), TensorError> {
        let s = serde_json::to_string(&self.to_checkpoint()).expect("checkpoint serializes");
        fs::write(path, s).map_err(|e| TensorError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(&mut self, path: &Path) -> Result<(), TensorError> {
        let s = fs::read_to_string(path)
            .map_err(|e| TensorError::Checkpoint(format!("{}: {e}", path.display())))?;
        let ckpt: Checkpoint = serde_json::from_str(&s).map_err(|e| {
            TensorError::Checkpoint(format!("{}: malformed checkpoint: {e}", path.display()))
        })?;
        self.load_checkpoint(&ckpt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub adam_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub version: u64,
    pub seed: u64,
    pub rng_word_pos: u128,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
    pub params: Vec<CheckpointParam>,
}
