//! Building blocks of the regression network: linear maps, batch
//! normalization, ReLU, channel-wise max pooling, and the stable sigmoid.
//! Every forward caches exactly what its analytic backward needs.

use ndarray::{Array1, Array2, Axis};

use super::store::{Grads, Init, ParamStore, TensorId};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// y = max(0, x), elementwise.
pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Affine layer y = x W^T + b with weight stored [out x in].
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: TensorId,
    pub b: TensorId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize) -> Self {
        let w = store.register(
            &format!("{name}.weight"),
            &[out_dim, in_dim],
            Init::UniformFanIn(in_dim),
        );
        let b = store.register(
            &format!("{name}.bias"),
            &[out_dim],
            Init::UniformFanIn(in_dim),
        );
        Linear {
            w,
            b,
            in_dim,
            out_dim,
        }
    }

    /// T-Net projection flavor: zero weight, identity bias, so the output is
    /// the identity matrix for any input at initialization.
    pub fn new_identity_proj(store: &mut ParamStore, name: &str, in_dim: usize, d: usize) -> Self {
        let w = store.register(&format!("{name}.weight"), &[d * d, in_dim], Init::Zero);
        let b = store.register(&format!("{name}.bias"), &[d * d], Init::Identity(d));
        Linear {
            w,
            b,
            in_dim,
            out_dim: d * d,
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Array2<f64>) -> Array2<f64> {
        debug_assert_eq!(x.ncols(), self.in_dim);
        let mut y = x.dot(&store.mat(self.w).t());
        y += &store.vector(self.b);
        y
    }

    /// Accumulates dW and db; returns dx.
    pub fn backward(
        &self,
        store: &ParamStore,
        grads: &mut Grads,
        x: &Array2<f64>,
        dy: &Array2<f64>,
    ) -> Array2<f64> {
        let dw = dy.t().dot(x);
        {
            let mut gw = grads.mat_mut(store, self.w);
            gw += &dw;
        }
        let db = dy.sum_axis(Axis(0));
        for (g, d) in grads
            .slice_mut(store, self.b)
            .iter_mut()
            .zip(db.iter())
        {
            *g += d;
        }
        dy.dot(&store.mat(self.w))
    }
}

/// Per-channel running statistics of a batch-norm layer (not trainable).
#[derive(Debug, Clone)]
pub struct BnState {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl BnState {
    pub fn new(dim: usize) -> Self {
        BnState {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
        }
    }
}

/// Batch normalization over rows, per column, with trainable scale and shift.
///
/// Train mode normalizes by the biased batch statistics; inference mode uses
/// the running statistics committed by the trainer.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: TensorId,
    pub beta: TensorId,
    pub dim: usize,
    /// Index into the model's running-state table.
    pub state_idx: usize,
}

#[derive(Debug, Clone)]
pub struct BnCache {
    pub xhat: Array2<f64>,
    pub inv_std: Vec<f64>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
    pub rows: usize,
}

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, state_idx: usize) -> Self {
        let gamma = store.register(&format!("{name}.bn_gamma"), &[dim], Init::Const(1.0));
        let beta = store.register(&format!("{name}.bn_beta"), &[dim], Init::Zero);
        BatchNorm {
            gamma,
            beta,
            dim,
            state_idx,
        }
    }

    pub fn forward_train(&self, store: &ParamStore, x: &Array2<f64>) -> (Array2<f64>, BnCache) {
        let m = x.nrows() as f64;
        let mean = x.mean_axis(Axis(0)).unwrap();
        let mut var = Array1::<f64>::zeros(x.ncols());
        for row in x.rows() {
            for (c, &v) in row.iter().enumerate() {
                let d = v - mean[c];
                var[c] += d * d;
            }
        }
        var /= m;
        let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut xhat = x.clone();
        for mut row in xhat.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - mean[c]) * inv_std[c];
            }
        }
        let gamma = store.vector(self.gamma);
        let beta = store.vector(self.beta);
        let mut y = xhat.clone();
        for mut row in y.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = gamma[c] * *v + beta[c];
            }
        }
        let cache = BnCache {
            xhat,
            inv_std,
            batch_mean: mean.to_vec(),
            batch_var: var.to_vec(),
            rows: x.nrows(),
        };
        (y, cache)
    }

    pub fn forward_infer(&self, store: &ParamStore, state: &BnState, x: &Array2<f64>) -> Array2<f64> {
        let gamma = store.vector(self.gamma);
        let beta = store.vector(self.beta);
        let scale: Vec<f64> = (0..self.dim)
            .map(|c| gamma[c] / (state.var[c] + BN_EPS).sqrt())
            .collect();
        let mut y = x.clone();
        for mut row in y.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - state.mean[c]) * scale[c] + beta[c];
            }
        }
        y
    }

    /// Full train-mode gradient, differentiating through the batch statistics.
    pub fn backward(
        &self,
        store: &ParamStore,
        grads: &mut Grads,
        cache: &BnCache,
        dy: &Array2<f64>,
    ) -> Array2<f64> {
        let m = dy.nrows() as f64;
        let cols = dy.ncols();
        let mut dgamma = vec![0.0; cols];
        let mut dbeta = vec![0.0; cols];
        let mut mean_dy = vec![0.0; cols];
        let mut mean_dy_xhat = vec![0.0; cols];
        for (dy_row, xh_row) in dy.rows().into_iter().zip(cache.xhat.rows()) {
            for c in 0..cols {
                dgamma[c] += dy_row[c] * xh_row[c];
                dbeta[c] += dy_row[c];
                mean_dy[c] += dy_row[c];
                mean_dy_xhat[c] += dy_row[c] * xh_row[c];
            }
        }
        for c in 0..cols {
            mean_dy[c] /= m;
            mean_dy_xhat[c] /= m;
        }
        for (g, d) in grads
            .slice_mut(store, self.gamma)
            .iter_mut()
            .zip(dgamma.iter())
        {
            *g += d;
        }
        for (g, d) in grads
            .slice_mut(store, self.beta)
            .iter_mut()
            .zip(dbeta.iter())
        {
            *g += d;
        }
        let gamma = store.vector(self.gamma);
        let mut dx = dy.clone();
        for (mut dx_row, xh_row) in dx.rows_mut().into_iter().zip(cache.xhat.rows()) {
            for c in 0..cols {
                dx_row[c] = gamma[c]
                    * cache.inv_std[c]
                    * (dx_row[c] - mean_dy[c] - xh_row[c] * mean_dy_xhat[c]);
            }
        }
        dx
    }

    /// Exponential update of the running statistics from one batch. A batch
    /// of one row carries no variance information and would decay the running
    /// variance toward zero, so single-row batches leave the state untouched.
    pub fn commit(&self, state: &mut BnState, cache: &BnCache) {
        if cache.rows < 2 {
            return;
        }
        for c in 0..self.dim {
            state.mean[c] = BN_MOMENTUM * state.mean[c] + (1.0 - BN_MOMENTUM) * cache.batch_mean[c];
            state.var[c] = BN_MOMENTUM * state.var[c] + (1.0 - BN_MOMENTUM) * cache.batch_var[c];
        }
    }
}

/// One linear layer optionally followed by batch norm and ReLU.
#[derive(Debug, Clone)]
pub struct MlpLayer {
    pub lin: Linear,
    pub bn: Option<BatchNorm>,
    pub relu: bool,
}

pub struct MlpLayerCache {
    /// Layer input.
    pub x: Array2<f64>,
    pub bn: Option<BnCache>,
    /// Pre-activation seen by ReLU (post-bn when bn is present).
    pub pre_relu: Array2<f64>,
}

impl MlpLayer {
    pub fn forward_train(
        &self,
        store: &ParamStore,
        x: Array2<f64>,
    ) -> (Array2<f64>, MlpLayerCache) {
        let z = self.lin.forward(store, &x);
        let (pre_relu, bn_cache) = match &self.bn {
            Some(bn) => {
                let (h, c) = bn.forward_train(store, &z);
                (h, Some(c))
            }
            None => (z, None),
        };
        let y = if self.relu {
            pre_relu.mapv(relu)
        } else {
            pre_relu.clone()
        };
        (
            y,
            MlpLayerCache {
                x,
                bn: bn_cache,
                pre_relu,
            },
        )
    }

    pub fn forward_infer(
        &self,
        store: &ParamStore,
        states: &[BnState],
        x: &Array2<f64>,
    ) -> Array2<f64> {
        let z = self.lin.forward(store, x);
        let h = match &self.bn {
            Some(bn) => bn.forward_infer(store, &states[bn.state_idx], &z),
            None => z,
        };
        if self.relu {
            h.mapv(relu)
        } else {
            h
        }
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        grads: &mut Grads,
        cache: &MlpLayerCache,
        dy: &Array2<f64>,
    ) -> Array2<f64> {
        let dh = if self.relu {
            let mut d = dy.clone();
            d.zip_mut_with(&cache.pre_relu, |g, &p| {
                if p <= 0.0 {
                    *g = 0.0;
                }
            });
            d
        } else {
            dy.clone()
        };
        let dz = match (&self.bn, &cache.bn) {
            (Some(bn), Some(c)) => bn.backward(store, grads, c, &dh),
            _ => dh,
        };
        self.lin.backward(store, grads, &cache.x, &dz)
    }
}

/// A stack of [`MlpLayer`]s sharing one input/output matrix shape convention.
#[derive(Debug, Clone)]
pub struct MlpStack {
    pub layers: Vec<MlpLayer>,
}

impl MlpStack {
    /// Hidden stack: every layer gets bn + ReLU. Each bn layer claims the next
    /// slot of `bn_registry` (name, channel count) for its running statistics.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        widths: &[usize],
        bn_registry: &mut Vec<(String, usize)>,
    ) -> Self {
        let mut layers = Vec::new();
        let mut prev = in_dim;
        for (i, &w) in widths.iter().enumerate() {
            let lname = format!("{name}.{i}");
            let lin = Linear::new(store, &lname, prev, w);
            let bn = BatchNorm::new(store, &lname, w, bn_registry.len());
            bn_registry.push((lname, w));
            layers.push(MlpLayer {
                lin,
                bn: Some(bn),
                relu: true,
            });
            prev = w;
        }
        MlpStack { layers }
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().lin.out_dim
    }

    pub fn forward_train(
        &self,
        store: &ParamStore,
        x: Array2<f64>,
    ) -> (Array2<f64>, Vec<MlpLayerCache>) {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x;
        for layer in &self.layers {
            let (y, c) = layer.forward_train(store, cur);
            caches.push(c);
            cur = y;
        }
        (cur, caches)
    }

    pub fn forward_infer(
        &self,
        store: &ParamStore,
        states: &[BnState],
        x: &Array2<f64>,
    ) -> Array2<f64> {
        let mut cur = self.layers[0].forward_infer(store, states, x);
        for layer in &self.layers[1..] {
            cur = layer.forward_infer(store, states, &cur);
        }
        cur
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        grads: &mut Grads,
        caches: &[MlpLayerCache],
        dy: &Array2<f64>,
    ) -> Array2<f64> {
        let mut cur = dy.clone();
        for (layer, cache) in self.layers.iter().zip(caches.iter()).rev() {
            cur = layer.backward(store, grads, cache, &cur);
        }
        cur
    }

    /// Fold this batch's bn statistics into the running states.
    pub fn commit_bn(&self, states: &mut [BnState], caches: &[MlpLayerCache]) {
        for (layer, cache) in self.layers.iter().zip(caches.iter()) {
            if let (Some(bn), Some(c)) = (&layer.bn, &cache.bn) {
                bn.commit(&mut states[bn.state_idx], c);
            }
        }
    }
}

/// Channel-wise max over each cloud's rows: (B*N) x C -> B x C.
///
/// Ties go to the lowest row index, which is also where the gradient routes.
pub fn max_pool(x: &Array2<f64>, n_points: usize) -> (Array2<f64>, Vec<usize>) {
    let rows = x.nrows();
    debug_assert_eq!(rows % n_points, 0);
    let b = rows / n_points;
    let c = x.ncols();
    let mut out = Array2::zeros((b, c));
    let mut argmax = vec![0usize; b * c];
    for bi in 0..b {
        let base = bi * n_points;
        for ci in 0..c {
            let mut best = x[[base, ci]];
            let mut best_r = base;
            for r in base + 1..base + n_points {
                let v = x[[r, ci]];
                if v > best {
                    best = v;
                    best_r = r;
                }
            }
            out[[bi, ci]] = best;
            argmax[bi * c + ci] = best_r;
        }
    }
    (out, argmax)
}

/// Route pooled gradients back to the argmax rows.
pub fn max_pool_backward(
    dy: &Array2<f64>,
    argmax: &[usize],
    rows: usize,
) -> Array2<f64> {
    let (b, c) = dy.dim();
    let mut dx = Array2::zeros((rows, c));
    for bi in 0..b {
        for ci in 0..c {
            dx[[argmax[bi * c + ci], ci]] += dy[[bi, ci]];
        }
    }
    dx
}
