//! Transform mini-networks: a shared MLP over points, max pooling, two FC
//! layers, and a final projection that starts as the exact identity matrix.

use ndarray::{s, Array2};

use super::layers::{max_pool, max_pool_backward, BnState, Linear, MlpLayerCache, MlpStack};
use super::store::{Grads, ParamStore};

/// Predicts one d x d alignment matrix per cloud from the cloud's own points
/// or features.
#[derive(Debug, Clone)]
pub struct TNet {
    pub shared: MlpStack,
    pub fc: MlpStack,
    pub proj: Linear,
    pub d: usize,
}

pub struct TNetCache {
    pub shared: Vec<MlpLayerCache>,
    pub argmax: Vec<usize>,
    pub rows: usize,
    pub pooled: Array2<f64>,
    pub fc: Vec<MlpLayerCache>,
    pub fc_out: Array2<f64>,
    /// One d x d matrix per cloud.
    pub mats: Vec<Array2<f64>>,
}

impl TNet {
    /// `widths` are the shared-MLP widths, `fc_widths` the decoder widths,
    /// already scaled by the caller.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d: usize,
        widths: &[usize],
        fc_widths: &[usize],
        bn_registry: &mut Vec<(String, usize)>,
    ) -> Self {
        let shared = MlpStack::new(store, &format!("{name}.shared"), d, widths, bn_registry);
        let fc = MlpStack::new(
            store,
            &format!("{name}.fc"),
            shared.out_dim(),
            fc_widths,
            bn_registry,
        );
        let proj = Linear::new_identity_proj(store, &format!("{name}.proj"), fc.out_dim(), d);
        TNet {
            shared,
            fc,
            proj,
            d,
        }
    }

    fn to_mats(&self, flat: &Array2<f64>) -> Vec<Array2<f64>> {
        flat.rows()
            .into_iter()
            .map(|row| {
                Array2::from_shape_vec((self.d, self.d), row.to_vec()).unwrap()
            })
            .collect()
    }

    pub fn forward_train(
        &self,
        store: &ParamStore,
        x: &Array2<f64>,
        n_points: usize,
    ) -> (Vec<Array2<f64>>, TNetCache) {
        let (h, shared_cache) = self.shared.forward_train(store, x.clone());
        let (pooled, argmax) = max_pool(&h, n_points);
        let (fc_out, fc_cache) = self.fc.forward_train(store, pooled.clone());
        let flat = self.proj.forward(store, &fc_out);
        let mats = self.to_mats(&flat);
        let cache = TNetCache {
            shared: shared_cache,
            argmax,
            rows: x.nrows(),
            pooled,
            fc: fc_cache,
            fc_out,
            mats: mats.clone(),
        };
        (mats, cache)
    }

    pub fn forward_infer(
        &self,
        store: &ParamStore,
        states: &[BnState],
        x: &Array2<f64>,
        n_points: usize,
    ) -> Vec<Array2<f64>> {
        let h = self.shared.forward_infer(store, states, x);
        let (pooled, _) = max_pool(&h, n_points);
        let fc_out = self.fc.forward_infer(store, states, &pooled);
        let flat = self.proj.forward(store, &fc_out);
        self.to_mats(&flat)
    }

    /// Backward from per-cloud matrix gradients; returns the gradient with
    /// respect to the T-Net's input rows.
    pub fn backward(
        &self,
        store: &ParamStore,
        grads: &mut Grads,
        cache: &TNetCache,
        d_mats: &[Array2<f64>],
    ) -> Array2<f64> {
        let b = d_mats.len();
        let mut d_flat = Array2::zeros((b, self.d * self.d));
        for (bi, dm) in d_mats.iter().enumerate() {
            let row: Vec<f64> = dm.iter().cloned().collect();
            d_flat
                .slice_mut(s![bi, ..])
                .assign(&Array2::from_shape_vec((1, self.d * self.d), row).unwrap().row(0));
        }
        let d_fc_out = self.proj.backward(store, grads, &cache.fc_out, &d_flat);
        let d_pooled = self.fc.backward(store, grads, &cache.fc, &d_fc_out);
        let dh = max_pool_backward(&d_pooled, &cache.argmax, cache.rows);
        self.shared.backward(store, grads, &cache.shared, &dh)
    }

    pub fn commit_bn(&self, states: &mut [BnState], cache: &TNetCache) {
        self.shared.commit_bn(states, &cache.shared);
        self.fc.commit_bn(states, &cache.fc);
    }
}

/// Per-cloud matrix multiply: rows of cloud b map through mats[b].
pub fn apply_transform(
    x: &Array2<f64>,
    mats: &[Array2<f64>],
    n_points: usize,
) -> Array2<f64> {
    let mut y = Array2::zeros(x.raw_dim());
    for (b, t) in mats.iter().enumerate() {
        let range = s![b * n_points..(b + 1) * n_points, ..];
        y.slice_mut(range).assign(&x.slice(range).dot(t));
    }
    y
}

/// Backward of [`apply_transform`]: returns the direct input gradient and the
/// per-cloud matrix gradients.
pub fn apply_transform_backward(
    x: &Array2<f64>,
    mats: &[Array2<f64>],
    dy: &Array2<f64>,
    n_points: usize,
) -> (Array2<f64>, Vec<Array2<f64>>) {
    let mut dx = Array2::zeros(x.raw_dim());
    let mut d_mats = Vec::with_capacity(mats.len());
    for (b, t) in mats.iter().enumerate() {
        let range = s![b * n_points..(b + 1) * n_points, ..];
        let xb = x.slice(range);
        let dyb = dy.slice(range);
        dx.slice_mut(range).assign(&dyb.dot(&t.t()));
        d_mats.push(xb.t().dot(&dyb));
    }
    (dx, d_mats)
}
