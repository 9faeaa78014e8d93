//! Pore-grain boundary point clouds: extraction from voxel grids, resampling
//! to a fixed size, and coordinate normalization for the network.

use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::VoxelGrid;

/// Fixed-size or raw set of boundary point coordinates. For 2D sources the
/// third coordinate is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    pub source_dim: u8,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Per-axis bounds used for coordinate normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudBounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl CloudBounds {
    /// The fixed domain box [0, n] per spatial axis. Identical for every
    /// sample of a dataset, so absolute pore positions survive normalization.
    pub fn domain(n: usize, dim: u8) -> Self {
        let hi = n as f64;
        CloudBounds {
            min: [0.0; 3],
            max: [hi, hi, if dim == 3 { hi } else { 0.0 }],
        }
    }

    /// Tight bounds of a cloud's own points.
    pub fn of_cloud(cloud: &PointCloud) -> Self {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for p in &cloud.points {
            for a in 0..3 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        CloudBounds { min, max }
    }
}

/// One point per pore cell that touches at least one face-adjacent grain cell.
///
/// Point coordinates are cell centers (i+0.5, j+0.5, k+0.5); the adjacency
/// test does not wrap, and domain edges do not count as grain. Points are
/// emitted in ascending linear cell index order.
pub fn extract_boundary(grid: &VoxelGrid) -> Result<PointCloud> {
    let dims = grid.dims;
    let n = dims.n;
    let mut points = Vec::new();
    for idx in 0..dims.cells() {
        if !grid.is_pore(idx) {
            continue;
        }
        let c = dims.coords(idx);
        let mut on_boundary = false;
        'adj: for axis in 0..dims.dim as usize {
            for step in [-1isize, 1] {
                let v = c[axis] as isize + step;
                if v < 0 || v >= n as isize {
                    continue;
                }
                let mut nc = c;
                nc[axis] = v as usize;
                if !grid.is_pore(dims.index(nc[0], nc[1], nc[2])) {
                    on_boundary = true;
                    break 'adj;
                }
            }
        }
        if on_boundary {
            let z = if dims.dim == 3 { c[2] as f64 + 0.5 } else { 0.0 };
            points.push([c[0] as f64 + 0.5, c[1] as f64 + 0.5, z]);
        }
    }
    if points.is_empty() {
        return Err(Error::InvalidInput(
            "empty pore-grain boundary: grid has no pore-grain interface".into(),
        ));
    }
    Ok(PointCloud {
        points,
        source_dim: dims.dim,
    })
}

/// Resample a cloud to exactly `n_target` points.
///
/// Larger clouds are uniformly subsampled without replacement (original order
/// kept); smaller clouds keep every point and are padded by uniform draws,
/// with replacement, of their own points. Deterministic given `seed`.
pub fn sample_to_n(cloud: &PointCloud, n_target: usize, seed: u64) -> Result<PointCloud> {
    if n_target == 0 {
        return Err(Error::InvalidInput("n_target must be >= 1".into()));
    }
    if cloud.is_empty() {
        return Err(Error::InvalidInput("cannot resample an empty cloud".into()));
    }
    let n = cloud.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = match n.cmp(&n_target) {
        std::cmp::Ordering::Equal => cloud.points.clone(),
        std::cmp::Ordering::Greater => {
            let mut keep = index_sample(&mut rng, n, n_target).into_vec();
            keep.sort_unstable();
            keep.into_iter().map(|i| cloud.points[i]).collect()
        }
        std::cmp::Ordering::Less => {
            let mut points = cloud.points.clone();
            points.extend((n..n_target).map(|_| cloud.points[rng.gen_range(0..n)]));
            points
        }
    };
    Ok(PointCloud {
        points,
        source_dim: cloud.source_dim,
    })
}

/// Per-axis affine map (v - min) / (max - min). 2D clouds keep z = 0.
pub fn normalize_coords(cloud: &PointCloud, bounds: &CloudBounds) -> Result<PointCloud> {
    let spatial_axes = if cloud.source_dim == 3 { 3 } else { 2 };
    for a in 0..spatial_axes {
        if !(bounds.max[a] > bounds.min[a]) {
            return Err(Error::InvalidInput(format!(
                "degenerate normalization bounds on axis {a}: [{}, {}]",
                bounds.min[a], bounds.max[a]
            )));
        }
    }
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let mut q = [0.0; 3];
            for a in 0..spatial_axes {
                q[a] = (p[a] - bounds.min[a]) / (bounds.max[a] - bounds.min[a]);
            }
            q
        })
        .collect();
    Ok(PointCloud {
        points,
        source_dim: cloud.source_dim,
    })
}

/// Min/max/histogram of raw boundary sizes, to guide the choice of the
/// cloud-size hyperparameter.
#[derive(Debug, Clone)]
pub struct CloudStats {
    pub n_min: usize,
    pub n_max: usize,
    /// Counts over `bins` equal-width bins spanning [n_min, n_max].
    pub histogram: Vec<usize>,
}

pub fn cloud_stats(sizes: &[usize], bins: usize) -> Result<CloudStats> {
    if sizes.is_empty() {
        return Err(Error::InvalidInput("cloud_stats needs at least one cloud".into()));
    }
    let n_min = *sizes.iter().min().unwrap();
    let n_max = *sizes.iter().max().unwrap();
    let bins = bins.max(1);
    let mut histogram = vec![0usize; bins];
    let span = (n_max - n_min).max(1) as f64;
    for &s in sizes {
        let b = (((s - n_min) as f64 / span) * bins as f64) as usize;
        histogram[b.min(bins - 1)] += 1;
    }
    Ok(CloudStats {
        n_min,
        n_max,
        histogram,
    })
}
