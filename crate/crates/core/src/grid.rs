//! Square/cubic domains, scalar fields, and binary pore/grain voxel grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Phase value of a pore cell.
pub const PORE: u8 = 0;
/// Phase value of a grain (solid) cell.
pub const GRAIN: u8 = 1;

/// Default physical pixel size in meters.
pub const DEFAULT_PIXEL_SIZE_M: f64 = 0.003;

/// Extents of a square (dim 2) or cubic (dim 3) domain with `n` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub dim: u8,
}

impl Dims {
    pub fn new(n: usize, dim: u8) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidInput(format!("dim must be 2 or 3, got {dim}")));
        }
        if n == 0 {
            return Err(Error::InvalidInput("n must be positive".into()));
        }
        Ok(Dims { n, dim })
    }

    pub fn square(n: usize) -> Self {
        Dims { n, dim: 2 }
    }

    pub fn cube(n: usize) -> Self {
        Dims { n, dim: 3 }
    }

    /// Total cell count n^dim.
    pub fn cells(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Linear index with x fastest-varying; z must be 0 for 2D.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.n && y < self.n);
        debug_assert!(self.dim == 3 || z == 0);
        x + self.n * (y + self.n * z)
    }

    /// Inverse of [`Dims::index`].
    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.n;
        let y = (idx / self.n) % self.n;
        let z = idx / (self.n * self.n);
        [x, y, z]
    }
}

/// Domain axis. X is the flow axis throughout the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn as_usize(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Real-valued field over a square/cubic domain, x fastest-varying.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub dims: Dims,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(dims: Dims, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.cells() {
            return Err(Error::InvalidInput(format!(
                "field length {} does not match dims {}^{}",
                values.len(),
                dims.n,
                dims.dim
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("scalar field contains non-finite values".into()));
        }
        Ok(ScalarField { dims, values })
    }

    pub fn constant(dims: Dims, value: f64) -> Self {
        ScalarField {
            dims,
            values: vec![value; dims.cells()],
        }
    }
}

/// Binary pore/grain medium with physical pixel size.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub dims: Dims,
    /// One byte per cell: 0 = pore, 1 = grain. x fastest-varying.
    pub phase: Vec<u8>,
    pub pixel_size_m: f64,
}

impl VoxelGrid {
    pub fn new(dims: Dims, phase: Vec<u8>, pixel_size_m: f64) -> Result<Self> {
        if phase.len() != dims.cells() {
            return Err(Error::InvalidInput(format!(
                "phase length {} does not match dims {}^{}",
                phase.len(),
                dims.n,
                dims.dim
            )));
        }
        if let Some(bad) = phase.iter().find(|&&p| p != PORE && p != GRAIN) {
            return Err(Error::InvalidInput(format!("phase value {bad} not in {{0, 1}}")));
        }
        if !(pixel_size_m > 0.0) {
            return Err(Error::InvalidInput(format!(
                "pixel_size_m must be positive, got {pixel_size_m}"
            )));
        }
        Ok(VoxelGrid {
            dims,
            phase,
            pixel_size_m,
        })
    }

    #[inline]
    pub fn is_pore(&self, idx: usize) -> bool {
        self.phase[idx] == PORE
    }

    /// Pore fraction: (#pore cells) / (total cells).
    pub fn porosity(&self) -> f64 {
        let pore = self.phase.iter().filter(|&&p| p == PORE).count();
        pore as f64 / self.dims.cells() as f64
    }

    /// True iff a face-connected pore path joins the inlet face (coordinate 0)
    /// to the outlet face (coordinate n-1) along `axis`. No periodic wrap.
    pub fn percolates(&self, axis: Axis) -> bool {
        let n = self.dims.n;
        let dim = self.dims.dim;
        if axis == Axis::Z && dim == 2 {
            return false;
        }
        let a = axis.as_usize();
        let mut visited = vec![false; self.dims.cells()];
        let mut stack: Vec<usize> = Vec::new();

        // Seed with pore cells on the inlet face.
        for idx in 0..self.dims.cells() {
            if self.is_pore(idx) && self.dims.coords(idx)[a] == 0 {
                visited[idx] = true;
                stack.push(idx);
            }
        }

        let target = n - 1;
        while let Some(idx) = stack.pop() {
            let c = self.dims.coords(idx);
            if c[a] == target {
                return true;
            }
            for axis_i in 0..dim as usize {
                for step in [-1isize, 1] {
                    let v = c[axis_i] as isize + step;
                    if v < 0 || v >= n as isize {
                        continue;
                    }
                    let mut nc = c;
                    nc[axis_i] = v as usize;
                    let nidx = self.dims.index(nc[0], nc[1], nc[2]);
                    if !visited[nidx] && self.is_pore(nidx) {
                        visited[nidx] = true;
                        stack.push(nidx);
                    }
                }
            }
        }
        false
    }
}
