//! Synthetic binary porous media via truncated Gaussian simulation: correlated
//! Gaussian fields are built by periodic smoothing of white noise, then
//! quantile-thresholded to a target porosity. Non-percolating draws are
//! rejected so every emitted medium can carry flow along x.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, Dims, ScalarField, VoxelGrid, GRAIN, PORE};

/// Generation parameters for one dataset of media.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    /// Cells per axis.
    pub n: usize,
    /// 2 or 3.
    pub dim: u8,
    /// Gaussian kernel support in pixels (odd, >= 3). Controls the spatial
    /// correlation length; the kernel sigma is `correlation_length_px / 4`.
    pub correlation_length_px: usize,
    /// Half-open porosity range [lo, hi); the target porosity of each sample
    /// is drawn uniformly from it.
    pub porosity_range: (f64, f64),
    /// Dataset-level seed; per-sample streams derive from it.
    pub seed: u64,
    /// Attempts per sample before giving up on the percolation criterion.
    pub max_retries: u32,
    /// Physical pixel size in meters.
    pub pixel_size_m: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n: 128,
            dim: 2,
            correlation_length_px: 9,
            porosity_range: (0.125, 0.25),
            seed: 0,
            max_retries: 100,
            pixel_size_m: crate::grid::DEFAULT_PIXEL_SIZE_M,
        }
    }
}

impl GenConfig {
    pub fn dims(&self) -> Dims {
        Dims {
            n: self.n,
            dim: self.dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        Dims::new(self.n, self.dim)?;
        let (lo, hi) = self.porosity_range;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::InvalidInput(format!(
                "porosity range must satisfy 0 < lo < hi < 1, got [{lo}, {hi})"
            )));
        }
        if self.correlation_length_px < 3 || self.correlation_length_px % 2 == 0 {
            return Err(Error::InvalidInput(format!(
                "correlation_length_px must be odd and >= 3, got {}",
                self.correlation_length_px
            )));
        }
        if self.correlation_length_px > self.n {
            return Err(Error::InvalidInput(format!(
                "kernel size {} exceeds domain extent {}",
                self.correlation_length_px, self.n
            )));
        }
        if self.max_retries < 1 {
            return Err(Error::InvalidInput("max_retries must be >= 1".into()));
        }
        if !(self.pixel_size_m > 0.0) {
            return Err(Error::InvalidInput("pixel_size_m must be positive".into()));
        }
        Ok(())
    }
}

/// Derive the RNG seed of sample `index` from the dataset seed.
///
/// SplitMix64 finalizer over (seed ^ golden-ratio-scrambled index), so sample
/// streams are independent and generation parallelizes deterministically.
pub fn sample_stream_seed(dataset_seed: u64, index: u64) -> u64 {
    let mut z = dataset_seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// I.i.d. standard-normal field: ChaCha8 stream, ziggurat normal sampling
/// (`rand_distr::StandardNormal`), cells filled in linear index order. Same
/// seed gives a bit-identical field.
pub fn gaussian_noise(dims: Dims, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..dims.cells()).map(|_| rng.sample(StandardNormal)).collect();
    ScalarField { dims, values }
}

/// Truncated, normalized 1D Gaussian kernel of odd support `size` with
/// sigma = size / 4.
pub fn gaussian_kernel(size: usize) -> Vec<f64> {
    assert!(size % 2 == 1 && size >= 1, "kernel support must be odd");
    let sigma = size as f64 / 4.0;
    let r = (size / 2) as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|j| (-((j * j) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for w in &mut k {
        *w /= sum;
    }
    k
}

/// Separable convolution with a 1D kernel applied along every axis,
/// periodic boundary wrap.
pub fn filter_periodic(field: &ScalarField, kernel: &[f64]) -> Result<ScalarField> {
    if kernel.len() % 2 == 0 || kernel.is_empty() {
        return Err(Error::InvalidInput(format!(
            "kernel support must be odd, got {}",
            kernel.len()
        )));
    }
    if kernel.len() > field.dims.n {
        return Err(Error::InvalidInput(format!(
            "kernel size {} exceeds domain extent {}",
            kernel.len(),
            field.dims.n
        )));
    }
    let dims = field.dims;
    let n = dims.n as isize;
    let r = (kernel.len() / 2) as isize;
    let mut cur = field.values.clone();
    let mut next = vec![0.0; cur.len()];

    for axis in 0..dims.dim as usize {
        for idx in 0..cur.len() {
            let c = dims.coords(idx);
            let mut acc = 0.0;
            for (j, &w) in kernel.iter().enumerate() {
                let off = j as isize - r;
                let mut nc = c;
                nc[axis] = (c[axis] as isize + off).rem_euclid(n) as usize;
                acc += w * cur[dims.index(nc[0], nc[1], nc[2])];
            }
            next[idx] = acc;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    ScalarField::new(dims, cur)
}

/// Smooth a field with the Gaussian kernel of support `kernel_size_px`.
pub fn gaussian_filter(field: &ScalarField, kernel_size_px: usize) -> Result<ScalarField> {
    if kernel_size_px % 2 == 0 {
        return Err(Error::InvalidInput(format!(
            "kernel support must be odd, got {kernel_size_px}"
        )));
    }
    filter_periodic(field, &gaussian_kernel(kernel_size_px))
}

/// Affine rescale so the minimum maps to 0 and the maximum to 1.
pub fn normalize01(field: &ScalarField) -> Result<ScalarField> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in &field.values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > lo) {
        return Err(Error::InvalidInput(
            "cannot normalize a constant field (no correlated structure)".into(),
        ));
    }
    let span = hi - lo;
    let values = field.values.iter().map(|&v| (v - lo) / span).collect();
    ScalarField::new(field.dims, values)
}

/// Quantile threshold: the round(phi * V) smallest-valued cells become pore,
/// the rest grain. Ties break by ascending linear cell index, so the result
/// porosity is within 1/V of `phi`.
pub fn threshold_to_porosity(field: &ScalarField, phi: f64, pixel_size_m: f64) -> Result<VoxelGrid> {
    if !(0.0 < phi && phi < 1.0) {
        return Err(Error::InvalidInput(format!("phi must lie in (0, 1), got {phi}")));
    }
    let v = field.dims.cells();
    let n_pore = (phi * v as f64).round() as usize;
    let mut order: Vec<usize> = (0..v).collect();
    order.sort_unstable_by(|&a, &b| {
        field.values[a]
            .total_cmp(&field.values[b])
            .then(a.cmp(&b))
    });
    let mut phase = vec![GRAIN; v];
    for &idx in order.iter().take(n_pore) {
        phase[idx] = PORE;
    }
    VoxelGrid::new(field.dims, phase, pixel_size_m)
}

/// Full pipeline for one sample: noise -> Gaussian filter -> normalize ->
/// quantile threshold, with the target porosity drawn once from the config
/// range and fresh noise on every retry until the grid percolates along x.
///
/// Pure function of (config, seed).
pub fn generate_sample(config: &GenConfig, seed: u64) -> Result<VoxelGrid> {
    config.validate()?;
    let dims = config.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = config.porosity_range;
    let phi = rng.gen_range(lo..hi);
    let kernel = gaussian_kernel(config.correlation_length_px);

    for _ in 0..config.max_retries {
        let noise_seed = rng.gen::<u64>();
        let noise = gaussian_noise(dims, noise_seed);
        let smooth = filter_periodic(&noise, &kernel)?;
        let normed = normalize01(&smooth)?;
        let grid = threshold_to_porosity(&normed, phi, config.pixel_size_m)?;
        if grid.percolates(Axis::X) {
            return Ok(grid);
        }
    }
    Err(Error::InvalidInput(format!(
        "no percolating medium along x after {} retries (phi = {phi:.4}, kernel = {})",
        config.max_retries, config.correlation_length_px
    )))
}
