//! Flat storage for trainable tensors with named, shaped views.
//!
//! All trainable scalars live in one contiguous `Vec<f64>` so the optimizer,
//! gradient checker, and checkpoint writer can treat parameters uniformly;
//! layers hold tensor ids and borrow shaped views on demand.

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Handle to one named tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(pub usize);

#[derive(Debug, Clone)]
pub struct TensorSpec {
    pub name: String,
    /// 1 entry for vectors, 2 (rows, cols) for matrices.
    pub dims: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

/// How a tensor is filled at registration time.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    /// U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
    UniformFanIn(usize),
    Zero,
    Const(f64),
    /// Flattened row-major identity of the given side length.
    Identity(usize),
}

/// FNV-1a 64-bit: stable across platforms, used to derive per-tensor init
/// streams so identical layer names get identical weights in any model
/// configuration built from the same seed.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone)]
pub struct ParamStore {
    pub data: Vec<f64>,
    specs: Vec<TensorSpec>,
    seed: u64,
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        ParamStore {
            data: Vec::new(),
            specs: Vec::new(),
            seed,
        }
    }

    pub fn register(&mut self, name: &str, dims: &[usize], init: Init) -> TensorId {
        let len: usize = dims.iter().product();
        let offset = self.data.len();
        match init {
            Init::UniformFanIn(fan_in) => {
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut rng =
                    ChaCha8Rng::seed_from_u64(self.seed ^ stable_hash(name.as_bytes()));
                self.data
                    .extend((0..len).map(|_| rng.gen_range(-bound..bound)));
            }
            Init::Zero => self.data.extend(std::iter::repeat(0.0).take(len)),
            Init::Const(c) => self.data.extend(std::iter::repeat(c).take(len)),
            Init::Identity(d) => {
                assert_eq!(d * d, len);
                self.data
                    .extend((0..len).map(|i| if i % (d + 1) == 0 { 1.0 } else { 0.0 }));
            }
        }
        self.specs.push(TensorSpec {
            name: name.to_string(),
            dims: dims.to_vec(),
            offset,
            len,
        });
        TensorId(self.specs.len() - 1)
    }

    /// Count of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.data.len()
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn spec(&self, id: TensorId) -> &TensorSpec {
        &self.specs[id.0]
    }

    pub fn slice(&self, id: TensorId) -> &[f64] {
        let s = &self.specs[id.0];
        &self.data[s.offset..s.offset + s.len]
    }

    pub fn slice_mut(&mut self, id: TensorId) -> &mut [f64] {
        let s = &self.specs[id.0];
        &mut self.data[s.offset..s.offset + s.len]
    }

    /// Matrix view (rows, cols) of a 2D tensor.
    pub fn mat(&self, id: TensorId) -> ArrayView2<'_, f64> {
        let s = &self.specs[id.0];
        assert_eq!(s.dims.len(), 2, "{} is not a matrix", s.name);
        ArrayView2::from_shape((s.dims[0], s.dims[1]), self.slice(id)).unwrap()
    }

    pub fn vector(&self, id: TensorId) -> ArrayView1<'_, f64> {
        let s = &self.specs[id.0];
        assert_eq!(s.dims.len(), 1, "{} is not a vector", s.name);
        ArrayView1::from_shape(s.dims[0], self.slice(id)).unwrap()
    }

    /// Find a tensor id by name (for checkpoint loading).
    pub fn find(&self, name: &str) -> Option<TensorId> {
        self.specs
            .iter()
            .position(|s| s.name == name)
            .map(TensorId)
    }
}

/// Gradient accumulator shaped exactly like a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Grads {
    pub data: Vec<f64>,
}

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Grads {
            data: vec![0.0; store.data.len()],
        }
    }

    pub fn slice_mut(&mut self, store: &ParamStore, id: TensorId) -> &mut [f64] {
        let s = store.spec(id);
        &mut self.data[s.offset..s.offset + s.len]
    }

    pub fn mat_mut(&mut self, store: &ParamStore, id: TensorId) -> ArrayViewMut2<'_, f64> {
        let s = store.spec(id);
        assert_eq!(s.dims.len(), 2);
        ArrayViewMut2::from_shape((s.dims[0], s.dims[1]), &mut self.data[s.offset..s.offset + s.len])
            .unwrap()
    }
}
