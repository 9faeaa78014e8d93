//! Point-cloud permeability regression network.
//!
//! The encoder applies two alignment transforms to the input coordinates,
//! then shared MLPs (64, 64) and (64, 128, 1024) per point, and collapses the
//! point dimension with a channel-wise max into a global feature. A fully
//! connected decoder (512, 256, 1) maps the global feature to a sigmoid
//! output in (0, 1). Every hidden layer is linear + batch norm + ReLU; the
//! two transform blocks are mini point networks whose final projection starts
//! as the exact identity. Forward and backward passes are hand-written; the
//! backward is exact for the train-mode graph, including the batch-norm
//! statistics.

mod layers;
mod store;
mod tnet;

pub use layers::{max_pool, max_pool_backward, relu, sigmoid, BnState, Linear, MlpLayer, MlpStack};
pub use store::{stable_hash, Grads, Init, ParamStore, TensorId, TensorSpec};
pub use tnet::{apply_transform, apply_transform_backward, TNet, TNetCache};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;

use layers::MlpLayerCache;

/// Decoder hidden widths paired to each supported global feature size.
pub fn decoder_pairing(global_feature_size: usize) -> Result<(usize, usize)> {
    match global_feature_size {
        128 => Ok((128, 128)),
        256 => Ok((256, 128)),
        512 => Ok((512, 256)),
        1024 => Ok((512, 256)),
        2048 => Ok((512, 256)),
        other => Err(Error::InvalidInput(format!(
            "unsupported global feature size {other} (expected 128, 256, 512, 1024, or 2048)"
        ))),
    }
}

/// Shape of the regression network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Fixed cloud size every input must be resampled to.
    pub n_points: usize,
    pub global_feature_size: usize,
    /// Decoder hidden widths (base, unscaled); must match the pairing for the
    /// chosen global feature size.
    pub decoder_sizes: (usize, usize),
    pub use_transforms: bool,
    /// Uniform width multiplier for every hidden layer; 0.25, 0.5, or 1.0.
    pub width_scale: f64,
    pub n_outputs: usize,
    /// Keep-nothing probability of the decoder dropout; off by default.
    pub dropout: Option<f64>,
    /// Weight of the transform-orthogonality penalty; off by default.
    pub ortho_reg: Option<f64>,
}

impl ModelConfig {
    pub fn new(n_points: usize, global_feature_size: usize) -> Result<Self> {
        let cfg = ModelConfig {
            n_points,
            global_feature_size,
            decoder_sizes: decoder_pairing(global_feature_size)?,
            use_transforms: true,
            width_scale: 1.0,
            n_outputs: 1,
            dropout: None,
            ortho_reg: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 {
            return Err(Error::InvalidInput("n_points must be >= 1".into()));
        }
        if self.n_outputs == 0 {
            return Err(Error::InvalidInput("n_outputs must be >= 1".into()));
        }
        let pairing = decoder_pairing(self.global_feature_size)?;
        if self.decoder_sizes != pairing {
            return Err(Error::InvalidInput(format!(
                "decoder sizes {:?} do not match the pairing {:?} for global feature size {}",
                self.decoder_sizes, pairing, self.global_feature_size
            )));
        }
        if ![0.25, 0.5, 1.0].contains(&self.width_scale) {
            return Err(Error::InvalidInput(format!(
                "width_scale must be 0.25, 0.5, or 1.0, got {}",
                self.width_scale
            )));
        }
        if let Some(p) = self.dropout {
            if !(0.0 < p && p < 1.0) {
                return Err(Error::InvalidInput(format!("dropout must lie in (0, 1), got {p}")));
            }
        }
        Ok(())
    }

    fn scaled(&self, base: usize) -> usize {
        ((base as f64 * self.width_scale).round() as usize).max(1)
    }
}

/// B clouds of exactly N points flattened into a (B*N) x 3 matrix.
#[derive(Debug, Clone)]
pub struct CloudBatch {
    pub data: Array2<f64>,
    pub batch: usize,
    pub n_points: usize,
}

impl CloudBatch {
    pub fn from_clouds(clouds: &[&PointCloud], n_points: usize) -> Result<Self> {
        if clouds.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let b = clouds.len();
        let mut data = Array2::zeros((b * n_points, 3));
        for (bi, cloud) in clouds.iter().enumerate() {
            if cloud.len() != n_points {
                return Err(Error::InvalidInput(format!(
                    "cloud {bi} has {} points, expected {n_points}",
                    cloud.len()
                )));
            }
            for (pi, p) in cloud.points.iter().enumerate() {
                for a in 0..3 {
                    data[[bi * n_points + pi, a]] = p[a];
                }
            }
        }
        Ok(CloudBatch {
            data,
            batch: b,
            n_points,
        })
    }

    pub fn single(cloud: &PointCloud, n_points: usize) -> Result<Self> {
        Self::from_clouds(&[cloud], n_points)
    }
}

fn fnv_byte(h: &mut u64, b: u8) {
    *h ^= b as u64;
    *h = h.wrapping_mul(0x0000_0100_0000_01b3);
}

fn hash_stack_signs(h: &mut u64, caches: &[MlpLayerCache]) {
    for c in caches {
        for &v in c.pre_relu.iter() {
            fnv_byte(h, (v > 0.0) as u8);
        }
    }
}

fn hash_argmax(h: &mut u64, argmax: &[usize]) {
    for &a in argmax {
        for b in (a as u64).to_le_bytes() {
            fnv_byte(h, b);
        }
    }
}

/// Everything the backward pass needs from one train-mode forward.
pub struct ModelCache {
    x0: Array2<f64>,
    t1: Option<TNetCache>,
    x1: Option<Array2<f64>>,
    t2: Option<TNetCache>,
    m1: Vec<MlpLayerCache>,
    m2: Vec<MlpLayerCache>,
    argmax: Vec<usize>,
    rows: usize,
    dec: Vec<MlpLayerCache>,
    dropout_mask: Option<Array2<f64>>,
    /// Input of the output layer (after dropout when enabled).
    dec_out: Array2<f64>,
    /// Sigmoid outputs, batch x n_outputs.
    pub y: Array2<f64>,
    batch: usize,
    n_points: usize,
}

impl ModelCache {
    /// Hash of every ReLU activation pattern and max-pool selection in this
    /// forward pass. Two evaluations share the signature exactly when they
    /// lie on the same smooth branch of the piecewise-smooth loss, which is
    /// what makes a finite-difference probe comparable to the analytic
    /// gradient.
    pub fn branch_signature(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in [&self.t1, &self.t2].into_iter().flatten() {
            hash_stack_signs(&mut h, &t.shared);
            hash_argmax(&mut h, &t.argmax);
            hash_stack_signs(&mut h, &t.fc);
        }
        hash_stack_signs(&mut h, &self.m1);
        hash_stack_signs(&mut h, &self.m2);
        hash_argmax(&mut h, &self.argmax);
        hash_stack_signs(&mut h, &self.dec);
        h
    }
}

/// The assembled network: configuration, trainable parameters, and batch-norm
/// running statistics.
#[derive(Debug, Clone)]
pub struct PointNet {
    pub cfg: ModelConfig,
    pub store: ParamStore,
    pub bn_states: Vec<BnState>,
    bn_names: Vec<String>,
    tnet1: Option<TNet>,
    tnet2: Option<TNet>,
    mlp1: MlpStack,
    mlp2: MlpStack,
    decoder: MlpStack,
    output: Linear,
}

impl PointNet {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new(seed);
        let mut bn_registry: Vec<(String, usize)> = Vec::new();

        let s = |w: usize| cfg.scaled(w);
        let tnet_shared = [s(64), s(128), s(1024)];
        let tnet_fc = [s(512), s(256)];

        let (tnet1, tnet2) = if cfg.use_transforms {
            (
                Some(TNet::new(&mut store, "tnet1", 3, &tnet_shared, &tnet_fc, &mut bn_registry)),
                Some(TNet::new(&mut store, "tnet2", 3, &tnet_shared, &tnet_fc, &mut bn_registry)),
            )
        } else {
            (None, None)
        };
        let mlp1 = MlpStack::new(&mut store, "mlp1", 3, &[s(64), s(64)], &mut bn_registry);
        let mlp2 = MlpStack::new(
            &mut store,
            "mlp2",
            mlp1.out_dim(),
            &[s(64), s(128), s(cfg.global_feature_size)],
            &mut bn_registry,
        );
        let (d1, d2) = cfg.decoder_sizes;
        let decoder = MlpStack::new(
            &mut store,
            "decoder",
            mlp2.out_dim(),
            &[s(d1), s(d2)],
            &mut bn_registry,
        );
        let output = Linear::new(&mut store, "output", decoder.out_dim(), cfg.n_outputs);

        let bn_states = bn_registry.iter().map(|(_, d)| BnState::new(*d)).collect();
        let bn_names = bn_registry.into_iter().map(|(n, _)| n).collect();
        Ok(PointNet {
            cfg,
            store,
            bn_states,
            bn_names,
            tnet1,
            tnet2,
            mlp1,
            mlp2,
            decoder,
            output,
        })
    }

    /// Count of trainable scalars (weights, biases, bn gamma/beta; running
    /// statistics excluded).
    pub fn param_count(&self) -> usize {
        self.store.param_count()
    }

    fn check_batch(&self, batch: &CloudBatch) -> Result<()> {
        if batch.n_points != self.cfg.n_points {
            return Err(Error::InvalidInput(format!(
                "batch has {} points per cloud, model expects {}",
                batch.n_points, self.cfg.n_points
            )));
        }
        Ok(())
    }

    /// Train-mode forward: batch statistics for bn, dropout active when
    /// configured. Running statistics are NOT updated here; call
    /// [`PointNet::commit_bn`] with the returned cache to fold them in.
    pub fn forward_train(&self, batch: &CloudBatch, dropout_seed: u64) -> Result<ModelCache> {
        self.check_batch(batch)?;
        let n = batch.n_points;
        let store = &self.store;
        let x0 = batch.data.clone();

        let (t1, x1, t2, encoded) = match (&self.tnet1, &self.tnet2) {
            (Some(tn1), Some(tn2)) => {
                let (mats1, c1) = tn1.forward_train(store, &x0, n);
                let x1 = apply_transform(&x0, &mats1, n);
                let (mats2, c2) = tn2.forward_train(store, &x1, n);
                let x2 = apply_transform(&x1, &mats2, n);
                (Some(c1), Some(x1), Some(c2), x2)
            }
            _ => (None, None, None, x0.clone()),
        };

        let (h1, m1) = self.mlp1.forward_train(store, encoded);
        let (h2, m2) = self.mlp2.forward_train(store, h1);
        let rows = h2.nrows();
        let (global, argmax) = max_pool(&h2, n);
        let (dec_raw, dec) = self.decoder.forward_train(store, global);

        let (dec_out, dropout_mask) = match self.cfg.dropout {
            Some(p) => {
                let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
                let keep = 1.0 - p;
                let mask = Array2::from_shape_fn(dec_raw.raw_dim(), |_| {
                    if rng.gen::<f64>() < p {
                        0.0
                    } else {
                        1.0 / keep
                    }
                });
                (&dec_raw * &mask, Some(mask))
            }
            None => (dec_raw, None),
        };

        let z = self.output.forward(store, &dec_out);
        let y = z.mapv(sigmoid);
        Ok(ModelCache {
            x0,
            t1,
            x1,
            t2,
            m1,
            m2,
            argmax,
            rows,
            dec,
            dropout_mask,
            dec_out,
            y,
            batch: batch.batch,
            n_points: n,
        })
    }

    /// Inference-mode forward: bn running statistics, no dropout. Returns one
    /// row per cloud.
    pub fn forward_infer(&self, batch: &CloudBatch) -> Result<Array2<f64>> {
        self.check_batch(batch)?;
        let n = batch.n_points;
        let store = &self.store;
        let states = &self.bn_states;

        let encoded = match (&self.tnet1, &self.tnet2) {
            (Some(tn1), Some(tn2)) => {
                let mats1 = tn1.forward_infer(store, states, &batch.data, n);
                let x1 = apply_transform(&batch.data, &mats1, n);
                let mats2 = tn2.forward_infer(store, states, &x1, n);
                apply_transform(&x1, &mats2, n)
            }
            _ => batch.data.clone(),
        };
        let h1 = self.mlp1.forward_infer(store, states, &encoded);
        let h2 = self.mlp2.forward_infer(store, states, &h1);
        let (global, _) = max_pool(&h2, n);
        let dec = self.decoder.forward_infer(store, states, &global);
        let z = self.output.forward(store, &dec);
        Ok(z.mapv(sigmoid))
    }

    /// Scaled permeability prediction in (0, 1) for one cloud.
    pub fn predict_one(&self, cloud: &PointCloud) -> Result<f64> {
        let batch = CloudBatch::single(cloud, self.cfg.n_points)?;
        Ok(self.forward_infer(&batch)?[[0, 0]])
    }

    /// Exact gradients of every trainable parameter for the train-mode graph,
    /// given dL/dy at the sigmoid outputs.
    pub fn backward(&self, cache: &ModelCache, upstream: &Array2<f64>) -> Grads {
        let store = &self.store;
        let mut grads = Grads::zeros_like(store);
        let n = cache.n_points;

        // sigmoid'(z) = y (1 - y)
        let mut dz = upstream.clone();
        dz.zip_mut_with(&cache.y, |g, &y| *g *= y * (1.0 - y));

        let d_dec_out = self.output.backward(store, &mut grads, &cache.dec_out, &dz);
        let d_dec_raw = match &cache.dropout_mask {
            Some(mask) => &d_dec_out * mask,
            None => d_dec_out,
        };
        let d_global = self.decoder.backward(store, &mut grads, &cache.dec, &d_dec_raw);
        let dh2 = max_pool_backward(&d_global, &cache.argmax, cache.rows);
        let dh1 = self.mlp2.backward(store, &mut grads, &cache.m2, &dh2);
        let d_encoded = self.mlp1.backward(store, &mut grads, &cache.m1, &dh1);

        if let (Some(tn1), Some(tn2), Some(c1), Some(c2), Some(x1)) =
            (&self.tnet1, &self.tnet2, &cache.t1, &cache.t2, &cache.x1)
        {
            let (dx1_direct, mut d_t2) = apply_transform_backward(x1, &c2.mats, &d_encoded, n);
            if let Some(lambda) = self.cfg.ortho_reg {
                let scale = lambda / cache.batch as f64;
                for (dm, t) in d_t2.iter_mut().zip(&c2.mats) {
                    let a = Array2::eye(t.nrows()) - t.dot(&t.t());
                    *dm += &(a.dot(t) * (-4.0 * scale));
                }
            }
            let dx1_tnet = tn2.backward(store, &mut grads, c2, &d_t2);
            let dx1 = &dx1_direct + &dx1_tnet;
            let (_dx0, d_t1) = apply_transform_backward(&cache.x0, &c1.mats, &dx1, n);
            tn1.backward(store, &mut grads, c1, &d_t1);
        }
        grads
    }

    /// Mean orthogonality penalty of the second transform over the batch,
    /// zero when disabled.
    pub fn ortho_penalty(&self, cache: &ModelCache) -> f64 {
        match (self.cfg.ortho_reg, &cache.t2) {
            (Some(lambda), Some(c2)) => {
                let mut total = 0.0;
                for t in &c2.mats {
                    let a = Array2::<f64>::eye(t.nrows()) - t.dot(&t.t());
                    total += a.iter().map(|v| v * v).sum::<f64>();
                }
                lambda * total / cache.batch as f64
            }
            _ => 0.0,
        }
    }

    /// Fold the batch statistics of one train-mode forward into the running
    /// bn states.
    pub fn commit_bn(&mut self, cache: &ModelCache) {
        let states = &mut self.bn_states;
        if let (Some(tn1), Some(tn2), Some(c1), Some(c2)) =
            (&self.tnet1, &self.tnet2, &cache.t1, &cache.t2)
        {
            tn1.commit_bn(states, c1);
            tn2.commit_bn(states, c2);
        }
        self.mlp1.commit_bn(states, &cache.m1);
        self.mlp2.commit_bn(states, &cache.m2);
        self.decoder.commit_bn(states, &cache.dec);
    }

    /// Names of the bn running-stat tensors in state order, as
    /// `<layer>.bn_running_mean` / `<layer>.bn_running_var`.
    pub fn bn_state_names(&self) -> Vec<(String, String)> {
        self.bn_names
            .iter()
            .map(|n| (format!("{n}.bn_running_mean"), format!("{n}.bn_running_var")))
            .collect()
    }

    /// Overwrite one named tensor (trainable or running stat) from raw data.
    pub fn load_tensor(&mut self, name: &str, data: &[f64]) -> Result<()> {
        if let Some(id) = self.store.find(name) {
            let dst = self.store.slice_mut(id);
            if dst.len() != data.len() {
                return Err(Error::InvalidInput(format!(
                    "tensor {name} has {} values, expected {}",
                    data.len(),
                    dst.len()
                )));
            }
            dst.copy_from_slice(data);
            return Ok(());
        }
        for (idx, (mean_name, var_name)) in self.bn_state_names().iter().enumerate() {
            let target = if name == mean_name {
                Some(&mut self.bn_states[idx].mean)
            } else if name == var_name {
                Some(&mut self.bn_states[idx].var)
            } else {
                None
            };
            if let Some(dst) = target {
                if dst.len() != data.len() {
                    return Err(Error::InvalidInput(format!(
                        "tensor {name} has {} values, expected {}",
                        data.len(),
                        dst.len()
                    )));
                }
                dst.copy_from_slice(data);
                return Ok(());
            }
        }
        Err(Error::InvalidInput(format!("unknown tensor name {name}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::SliceRandom;

    fn tiny_cfg(n_points: usize, transforms: bool) -> ModelConfig {
        ModelConfig {
            n_points,
            global_feature_size: 1024,
            decoder_sizes: (512, 256),
            use_transforms: transforms,
            width_scale: 0.25,
            n_outputs: 1,
            dropout: None,
            ortho_reg: None,
        }
    }

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud {
            points: (0..n).map(|_| [rng.gen(), rng.gen(), 0.0]).collect(),
            source_dim: 2,
        }
    }

    #[test]
    fn param_count_full_network_matches_anchor() {
        let cfg = ModelConfig::new(673, 1024).unwrap();
        let net = PointNet::new(cfg, 0).unwrap();
        assert_eq!(net.param_count(), 2_415_763);
    }

    #[test]
    fn param_count_without_transforms_matches_anchor() {
        let cfg = ModelConfig {
            use_transforms: false,
            ..ModelConfig::new(673, 1024).unwrap()
        };
        let net = PointNet::new(cfg, 0).unwrap();
        assert_eq!(net.param_count(), 809_601);
    }

    #[test]
    fn param_count_quarter_scale_matches_anchor() {
        let cfg = ModelConfig {
            use_transforms: false,
            width_scale: 0.25,
            ..ModelConfig::new(673, 1024).unwrap()
        };
        let net = PointNet::new(cfg, 0).unwrap();
        assert_eq!(net.param_count(), 51_873);
    }

    #[test]
    fn output_lies_strictly_inside_unit_interval() {
        let net = PointNet::new(tiny_cfg(16, true), 1).unwrap();
        let cloud = random_cloud(16, 2);
        let y = net.predict_one(&cloud).unwrap();
        assert!(y > 0.0 && y < 1.0, "prediction {y}");
    }

    #[test]
    fn inference_is_invariant_under_point_permutation() {
        let net = PointNet::new(tiny_cfg(32, true), 3).unwrap();
        let cloud = random_cloud(32, 4);
        let base = net.predict_one(&cloud).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let mut shuffled = cloud.clone();
            shuffled.points.shuffle(&mut rng);
            let y = net.predict_one(&shuffled).unwrap();
            assert!((y - base).abs() <= 1e-6, "perm deviation {}", (y - base).abs());
        }
    }

    #[test]
    fn inference_is_invariant_under_duplicate_substitution() {
        let net = PointNet::new(tiny_cfg(24, true), 6).unwrap();
        // 12 distinct points padded to 24 by duplication two different ways
        let distinct = random_cloud(12, 7);
        let pad_a = crate::pointcloud::sample_to_n(&distinct, 24, 1).unwrap();
        let pad_b = crate::pointcloud::sample_to_n(&distinct, 24, 2).unwrap();
        let a = net.predict_one(&pad_a).unwrap();
        let b = net.predict_one(&pad_b).unwrap();
        assert!((a - b).abs() <= 1e-6, "duplicate-substitution deviation {}", (a - b).abs());
    }

    #[test]
    fn transforms_are_identity_at_initialization() {
        let with = PointNet::new(tiny_cfg(16, true), 11).unwrap();
        let without = PointNet::new(tiny_cfg(16, false), 11).unwrap();
        let cloud = random_cloud(16, 12);
        let a = with.predict_one(&cloud).unwrap();
        let b = without.predict_one(&cloud).unwrap();
        assert!((a - b).abs() <= 1e-6, "init transform deviation {}", (a - b).abs());
    }

    #[test]
    fn rejects_wrong_cloud_size() {
        let net = PointNet::new(tiny_cfg(16, false), 0).unwrap();
        let cloud = random_cloud(8, 0);
        assert!(net.predict_one(&cloud).is_err());
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_parameter_gradients() {
        let net = PointNet::new(tiny_cfg(8, true), 13).unwrap();
        let batch = CloudBatch::from_clouds(&[&random_cloud(8, 1), &random_cloud(8, 2)], 8).unwrap();
        let cache = net.forward_train(&batch, 0).unwrap();
        let grads = net.backward(&cache, &Array2::zeros((2, 1)));
        assert!(grads.data.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn output_is_monotone_in_final_preactivation() {
        // raising the output bias must strictly raise the prediction
        let mut net = PointNet::new(tiny_cfg(8, false), 17).unwrap();
        let cloud = random_cloud(8, 3);
        let y0 = net.predict_one(&cloud).unwrap();
        let id = net.store.find("output.bias").unwrap();
        net.store.slice_mut(id)[0] += 0.25;
        let y1 = net.predict_one(&cloud).unwrap();
        net.store.slice_mut(id)[0] += 0.25;
        let y2 = net.predict_one(&cloud).unwrap();
        assert!(y0 < y1 && y1 < y2);
    }

    #[test]
    fn duplicate_point_duplicates_shared_features() {
        // per-point locality of the shared stack
        let net = PointNet::new(tiny_cfg(4, false), 19).unwrap();
        let mut cloud = random_cloud(4, 5);
        cloud.points[3] = cloud.points[1];
        let batch = CloudBatch::single(&cloud, 4).unwrap();
        let h = net
            .mlp1
            .forward_infer(&net.store, &net.bn_states, &batch.data);
        for c in 0..h.ncols() {
            assert_eq!(h[[1, c]], h[[3, c]]);
        }
    }

    #[test]
    fn config_rejects_mismatched_decoder_sizes() {
        let cfg = ModelConfig {
            decoder_sizes: (512, 512),
            ..ModelConfig::new(10, 1024).unwrap()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_rejects_unknown_global_feature_size() {
        assert!(ModelConfig::new(10, 777).is_err());
    }

    #[test]
    fn load_tensor_roundtrips_by_name() {
        let mut net = PointNet::new(tiny_cfg(8, false), 23).unwrap();
        let id = net.store.find("mlp1.0.weight").unwrap();
        let values: Vec<f64> = net.store.slice(id).to_vec();
        let mut twiddled = values.clone();
        twiddled[0] += 1.0;
        net.load_tensor("mlp1.0.weight", &twiddled).unwrap();
        assert_eq!(net.store.slice(id)[0], values[0] + 1.0);
        assert!(net.load_tensor("nope", &[1.0]).is_err());
        assert!(net.load_tensor("mlp1.0.weight", &[1.0]).is_err());
    }
}
