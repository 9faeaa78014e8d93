//! BGK lattice-Boltzmann solver for steady low-Reynolds flow through the pore
//! space, with Darcy permeability extraction.
//!
//! Lattices: D2Q9 in 2D, D3Q19 in 3D. The pressure gradient is realized as a
//! uniform body force along x with periodic wrap in x (Guo forcing); walls are
//! half-way bounce-back, both at pore-grain links and at the domain's y (and z)
//! boundaries. Collision is cell-local and streaming pulls from the
//! previous-step buffer only, so results are independent of thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Dims, VoxelGrid};

/// 1 millidarcy in square meters.
pub const M2_PER_MILLIDARCY: f64 = 9.869233e-16;

/// Relaxation time, body force, and reference density in lattice units.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FluidParams {
    pub tau: f64,
    /// Body-force density along x standing in for -dp/dx.
    pub force_x: f64,
    pub rho0: f64,
}

impl Default for FluidParams {
    fn default() -> Self {
        FluidParams {
            tau: 1.0,
            force_x: 1e-6,
            rho0: 1.0,
        }
    }
}

impl FluidParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.5) {
            return Err(Error::InvalidInput(format!("tau must exceed 0.5, got {}", self.tau)));
        }
        if !(self.force_x >= 0.0 && self.force_x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "force_x must be finite and non-negative, got {}",
                self.force_x
            )));
        }
        if !(self.rho0 > 0.0) {
            return Err(Error::InvalidInput(format!("rho0 must be positive, got {}", self.rho0)));
        }
        Ok(())
    }

    /// Kinematic viscosity nu = (tau - 1/2) / 3.
    pub fn kinematic_viscosity(&self) -> f64 {
        (self.tau - 0.5) / 3.0
    }

    /// Dynamic viscosity mu = nu * rho0.
    pub fn dynamic_viscosity(&self) -> f64 {
        self.kinematic_viscosity() * self.rho0
    }
}

/// Convergence controls for [`run_to_steady`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SteadyOpts {
    /// Relative change of mean x-velocity between checks that counts as steady.
    pub tol: f64,
    pub check_every: u64,
    pub max_steps: u64,
}

impl Default for SteadyOpts {
    fn default() -> Self {
        SteadyOpts {
            tol: 1e-6,
            check_every: 100,
            max_steps: 200_000,
        }
    }
}

const D2Q9_VEL: [[i32; 3]; 9] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [-1, 0, 0],
    [0, -1, 0],
    [1, 1, 0],
    [-1, 1, 0],
    [-1, -1, 0],
    [1, -1, 0],
];
const D2Q9_W: [f64; 9] = [
    4.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
];
const D2Q9_OPP: [usize; 9] = [0, 3, 4, 1, 2, 7, 8, 5, 6];

const D3Q19_VEL: [[i32; 3]; 19] = [
    [0, 0, 0],
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
    [1, 1, 0],
    [-1, -1, 0],
    [1, -1, 0],
    [-1, 1, 0],
    [1, 0, 1],
    [-1, 0, -1],
    [1, 0, -1],
    [-1, 0, 1],
    [0, 1, 1],
    [0, -1, -1],
    [0, 1, -1],
    [0, -1, 1],
];
const D3Q19_W: [f64; 19] = [
    1.0 / 3.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
];
const D3Q19_OPP: [usize; 19] = [0, 2, 1, 4, 3, 6, 5, 8, 7, 10, 9, 12, 11, 14, 13, 16, 15, 18, 17];

/// Distribution functions over the pore space plus the grain mask.
pub struct FlowState {
    pub dims: Dims,
    q: usize,
    solid: Vec<bool>,
    /// Cell-major distributions, `f[cell * q + i]`; zero on grain cells.
    f: Vec<f64>,
    buf: Vec<f64>,
    pub step_count: u64,
}

/// Macroscopic result of a steady solve.
#[derive(Debug, Clone)]
pub struct FlowField {
    pub dims: Dims,
    /// Velocity per cell in lattice units; exactly zero on grain cells.
    pub u: Vec<[f64; 3]>,
    /// Mean x-velocity over every cell of the domain, grain cells included.
    pub mean_ux: f64,
    pub converged: bool,
    pub steps: u64,
}

/// Equilibrium distributions at rest (density rho0, zero velocity) on pore
/// cells; step counter zero.
pub fn init_state(grid: &VoxelGrid, params: &FluidParams) -> Result<FlowState> {
    params.validate()?;
    let q = match grid.dims.dim {
        2 => 9,
        3 => 19,
        d => return Err(Error::InvalidInput(format!("unsupported dim {d}"))),
    };
    let cells = grid.dims.cells();
    let solid: Vec<bool> = grid.phase.iter().map(|&p| p != crate::grid::PORE).collect();
    let mut f = vec![0.0; cells * q];
    let w: &[f64] = if q == 9 { &D2Q9_W } else { &D3Q19_W };
    for cell in 0..cells {
        if !solid[cell] {
            for i in 0..q {
                f[cell * q + i] = w[i] * params.rho0;
            }
        }
    }
    Ok(FlowState {
        dims: grid.dims,
        q,
        solid,
        buf: vec![0.0; cells * q],
        f,
        step_count: 0,
    })
}

impl FlowState {
    pub fn q(&self) -> usize {
        self.q
    }

    /// Total mass (sum of all distributions).
    pub fn total_mass(&self) -> f64 {
        self.f.iter().sum()
    }

    pub fn density(&self, cell: usize) -> f64 {
        self.f[cell * self.q..(cell + 1) * self.q].iter().sum()
    }

    /// Macroscopic velocity at a cell (half-force corrected); zero on grain.
    pub fn velocity(&self, cell: usize, params: &FluidParams) -> [f64; 3] {
        if self.solid[cell] {
            return [0.0; 3];
        }
        let vel: &[[i32; 3]] = if self.q == 9 { &D2Q9_VEL } else { &D3Q19_VEL };
        let base = cell * self.q;
        let mut rho = 0.0;
        let mut m = [0.0f64; 3];
        for i in 0..self.q {
            let fi = self.f[base + i];
            rho += fi;
            m[0] += fi * vel[i][0] as f64;
            m[1] += fi * vel[i][1] as f64;
            m[2] += fi * vel[i][2] as f64;
        }
        [
            (m[0] + 0.5 * params.force_x) / rho,
            m[1] / rho,
            m[2] / rho,
        ]
    }

    /// Mean x-velocity over all cells, grain cells counted as zero.
    pub fn mean_ux(&self, params: &FluidParams) -> f64 {
        let cells = self.dims.cells();
        let mut sum = 0.0;
        for cell in 0..cells {
            sum += self.velocity(cell, params)[0];
        }
        sum / cells as f64
    }

    /// One BGK collide-stream update with Guo forcing and half-way bounce-back.
    pub fn step(&mut self, params: &FluidParams) {
        match self.q {
            9 => self.step_impl::<9>(params, &D2Q9_VEL, &D2Q9_W, &D2Q9_OPP),
            19 => self.step_impl::<19>(params, &D3Q19_VEL, &D3Q19_W, &D3Q19_OPP),
            _ => unreachable!(),
        }
        self.step_count += 1;
    }

    fn step_impl<const Q: usize>(
        &mut self,
        params: &FluidParams,
        vel: &[[i32; 3]; Q],
        w: &[f64; Q],
        opp: &[usize; Q],
    ) {
        let cells = self.dims.cells();
        let tau = params.tau;
        let fx = params.force_x;
        let force_pref = 1.0 - 0.5 / tau;
        let solid = &self.solid;

        // Collide into buf (post-collision), cell-local.
        {
            let f = &self.f;
            let collide_one = |cell: usize, out: &mut [f64]| {
                if solid[cell] {
                    out.fill(0.0);
                    return;
                }
                let base = cell * Q;
                let mut rho = 0.0;
                let mut mx = 0.0;
                let mut my = 0.0;
                let mut mz = 0.0;
                for i in 0..Q {
                    let fi = f[base + i];
                    rho += fi;
                    mx += fi * vel[i][0] as f64;
                    my += fi * vel[i][1] as f64;
                    mz += fi * vel[i][2] as f64;
                }
                let ux = (mx + 0.5 * fx) / rho;
                let uy = my / rho;
                let uz = mz / rho;
                let usq = ux * ux + uy * uy + uz * uz;
                for i in 0..Q {
                    let ex = vel[i][0] as f64;
                    let ey = vel[i][1] as f64;
                    let ez = vel[i][2] as f64;
                    let eu = ex * ux + ey * uy + ez * uz;
                    let feq = w[i] * rho * (1.0 + 3.0 * eu + 4.5 * eu * eu - 1.5 * usq);
                    let src = force_pref * w[i] * fx * (3.0 * (ex - ux) + 9.0 * eu * ex);
                    out[i] = f[base + i] + (feq - f[base + i]) / tau + src;
                }
            };
            if cells >= 4096 {
                self.buf
                    .par_chunks_mut(Q)
                    .enumerate()
                    .for_each(|(cell, out)| collide_one(cell, out));
            } else {
                for (cell, out) in self.buf.chunks_mut(Q).enumerate() {
                    collide_one(cell, out);
                }
            }
        }

        // Stream: pull post-collision values from source cells; bounce back at
        // grain links and at domain y/z walls; wrap periodically in x.
        {
            let n = self.dims.n as i32;
            let dims = self.dims;
            let post = &self.buf;
            let stream_one = |cell: usize, out: &mut [f64]| {
                if solid[cell] {
                    out.fill(0.0);
                    return;
                }
                let [x, y, z] = dims.coords(cell);
                for i in 0..Q {
                    let e = vel[i];
                    let sy = y as i32 - e[1];
                    let sz = z as i32 - e[2];
                    // Domain walls normal to y (and z in 3D).
                    if sy < 0 || sy >= n || sz < 0 || sz >= n {
                        out[i] = post[cell * Q + opp[i]];
                        continue;
                    }
                    let sx = (x as i32 - e[0]).rem_euclid(n);
                    let src = dims.index(sx as usize, sy as usize, sz as usize);
                    if solid[src] {
                        out[i] = post[cell * Q + opp[i]];
                    } else {
                        out[i] = post[src * Q + i];
                    }
                }
            };
            if cells >= 4096 {
                self.f
                    .par_chunks_mut(Q)
                    .enumerate()
                    .for_each(|(cell, out)| stream_one(cell, out));
            } else {
                for (cell, out) in self.f.chunks_mut(Q).enumerate() {
                    stream_one(cell, out);
                }
            }
        }
    }

    /// Extract the macroscopic field without convergence metadata.
    pub fn field(&self, params: &FluidParams, converged: bool) -> FlowField {
        let cells = self.dims.cells();
        let mut u = Vec::with_capacity(cells);
        let mut sum = 0.0;
        for cell in 0..cells {
            let v = self.velocity(cell, params);
            sum += v[0];
            u.push(v);
        }
        FlowField {
            dims: self.dims,
            u,
            mean_ux: sum / cells as f64,
            converged,
            steps: self.step_count,
        }
    }
}

/// Iterate until the relative change of mean x-velocity between successive
/// checks drops below `opts.tol`, or `opts.max_steps` is reached
/// (`converged = false`). NaN aborts with a diagnostic.
pub fn run_to_steady(
    state: &mut FlowState,
    params: &FluidParams,
    opts: &SteadyOpts,
) -> Result<FlowField> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tol must be positive, got {}", opts.tol)));
    }
    let mut prev = state.mean_ux(params);
    let mut converged = false;
    while state.step_count < opts.max_steps {
        let chunk = opts.check_every.min(opts.max_steps - state.step_count);
        for _ in 0..chunk {
            state.step(params);
        }
        let now = state.mean_ux(params);
        if !now.is_finite() {
            return Err(Error::Numeric(format!(
                "flow solve produced NaN at step {} (tau = {}, force_x = {}); \
                 the tau/force combination is unstable",
                state.step_count, params.tau, params.force_x
            )));
        }
        if (now - prev).abs() / now.abs().max(f64::EPSILON) < opts.tol {
            converged = true;
            prev = now;
            break;
        }
        prev = now;
    }
    let _ = prev;
    Ok(state.field(params, converged))
}

/// Darcy's law: k = -mu * mean_ux / grad_p.
pub fn darcy_permeability(mean_ux: f64, mu: f64, grad_p: f64) -> Result<f64> {
    if grad_p == 0.0 {
        return Err(Error::InvalidInput("grad_p must be nonzero".into()));
    }
    Ok(-mu * mean_ux / grad_p)
}

/// Permeability in lattice units for the body-force formulation, where the
/// applied pressure gradient is grad_p = -force_x.
pub fn permeability_lattice(mean_ux: f64, params: &FluidParams) -> Result<f64> {
    darcy_permeability(mean_ux, params.dynamic_viscosity(), -params.force_x)
}

/// Convert lattice-unit permeability to millidarcy given the pixel size.
pub fn to_millidarcy(k_lattice: f64, pixel_size_m: f64) -> f64 {
    k_lattice * pixel_size_m * pixel_size_m / M2_PER_MILLIDARCY
}

/// Inverse of [`to_millidarcy`].
pub fn from_millidarcy(k_md: f64, pixel_size_m: f64) -> f64 {
    k_md * M2_PER_MILLIDARCY / (pixel_size_m * pixel_size_m)
}

/// Initialize, run to steady state, and return the field plus permeability in
/// lattice units.
pub fn solve_permeability(
    grid: &VoxelGrid,
    params: &FluidParams,
    opts: &SteadyOpts,
) -> Result<(FlowField, f64)> {
    let mut state = init_state(grid, params)?;
    let field = run_to_steady(&mut state, params, opts)?;
    let k = permeability_lattice(field.mean_ux, params)?;
    Ok((field, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Dims, VoxelGrid, GRAIN, PORE};

    fn open_channel(n: usize) -> VoxelGrid {
        VoxelGrid::new(Dims::square(n), vec![PORE; n * n], 0.003).unwrap()
    }

    #[test]
    fn lattice_tables_are_consistent() {
        assert!((D2Q9_W.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((D3Q19_W.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..9 {
            for a in 0..3 {
                assert_eq!(D2Q9_VEL[D2Q9_OPP[i]][a], -D2Q9_VEL[i][a]);
            }
            assert_eq!(D2Q9_W[D2Q9_OPP[i]], D2Q9_W[i]);
        }
        for i in 0..19 {
            for a in 0..3 {
                assert_eq!(D3Q19_VEL[D3Q19_OPP[i]][a], -D3Q19_VEL[i][a]);
            }
            assert_eq!(D3Q19_W[D3Q19_OPP[i]], D3Q19_W[i]);
        }
    }

    #[test]
    fn init_is_rest_equilibrium() {
        let g = open_channel(8);
        let p = FluidParams::default();
        let s = init_state(&g, &p).unwrap();
        assert_eq!(s.step_count, 0);
        for cell in 0..64 {
            assert!((s.density(cell) - 1.0).abs() < 1e-14);
            let u = s.velocity(cell, &FluidParams { force_x: 0.0, ..p });
            assert_eq!(u, [0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn zero_force_rest_state_is_fixed_point() {
        let g = open_channel(8);
        let p = FluidParams {
            force_x: 0.0,
            ..FluidParams::default()
        };
        let init = init_state(&g, &p).unwrap();
        let f0 = init.f.clone();
        let mut s = init_state(&g, &p).unwrap();
        for _ in 0..50 {
            s.step(&p);
        }
        for (a, b) in s.f.iter().zip(&f0) {
            assert!((a - b).abs() <= 1e-14, "drifted: {a} vs {b}");
        }
    }

    #[test]
    fn mass_is_conserved() {
        let g = crate::mediagen::generate_sample(
            &crate::mediagen::GenConfig {
                n: 32,
                porosity_range: (0.55, 0.8),
                ..Default::default()
            },
            3,
        )
        .unwrap();
        let p = FluidParams::default();
        let mut s = init_state(&g, &p).unwrap();
        let m0 = s.total_mass();
        for _ in 0..200 {
            s.step(&p);
        }
        let m1 = s.total_mass();
        assert!(((m1 - m0) / m0).abs() < 1e-10, "mass drift {}", (m1 - m0) / m0);
    }

    #[test]
    fn channel_velocity_grows_monotonically_at_startup() {
        let g = open_channel(16);
        let p = FluidParams::default();
        let mut s = init_state(&g, &p).unwrap();
        let mut prev = 0.0;
        for _ in 0..100 {
            s.step(&p);
            let now = s.mean_ux(&p);
            assert!(now > prev, "mean ux must grow during startup");
            prev = now;
        }
    }

    #[test]
    fn zero_force_converges_immediately_to_zero_flow() {
        let g = open_channel(8);
        let p = FluidParams {
            force_x: 0.0,
            ..FluidParams::default()
        };
        let mut s = init_state(&g, &p).unwrap();
        let field = run_to_steady(&mut s, &p, &SteadyOpts::default()).unwrap();
        assert!(field.converged);
        assert_eq!(field.mean_ux, 0.0);
        assert_eq!(field.steps, 100);
    }

    #[test]
    fn all_grain_grid_has_zero_flow() {
        let g = VoxelGrid::new(Dims::square(8), vec![GRAIN; 64], 0.003).unwrap();
        let p = FluidParams::default();
        let mut s = init_state(&g, &p).unwrap();
        let field = run_to_steady(&mut s, &p, &SteadyOpts::default()).unwrap();
        assert!(field.converged);
        assert_eq!(field.mean_ux, 0.0);
        for u in &field.u {
            assert_eq!(*u, [0.0; 3]);
        }
    }

    #[test]
    fn grain_cells_have_exactly_zero_velocity() {
        let mut phase = vec![PORE; 16 * 16];
        let d = Dims::square(16);
        for x in 0..16 {
            phase[d.index(x, 0, 0)] = GRAIN;
            phase[d.index(x, 15, 0)] = GRAIN;
        }
        let g = VoxelGrid::new(d, phase, 0.003).unwrap();
        let p = FluidParams::default();
        let mut s = init_state(&g, &p).unwrap();
        for _ in 0..50 {
            s.step(&p);
        }
        let field = s.field(&p, false);
        for x in 0..16 {
            assert_eq!(field.u[d.index(x, 0, 0)], [0.0; 3]);
            assert_eq!(field.u[d.index(x, 15, 0)], [0.0; 3]);
        }
    }

    #[test]
    fn poiseuille_small_channel_matches_analytic() {
        // Open channel of height 16: k = H^2 / 12 within 2%.
        let g = open_channel(16);
        let p = FluidParams::default();
        let (field, k) = solve_permeability(&g, &p, &SteadyOpts::default()).unwrap();
        assert!(field.converged);
        let expect = 16.0 * 16.0 / 12.0;
        assert!(
            (k - expect).abs() / expect < 0.02,
            "k = {k}, analytic = {expect}"
        );
    }

    #[test]
    fn darcy_direct_substitution() {
        assert_eq!(darcy_permeability(1.0, 1.0, -1.0).unwrap(), 1.0);
        assert_eq!(darcy_permeability(0.0, 1.0, -1.0).unwrap(), 0.0);
        assert!(darcy_permeability(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn millidarcy_conversion() {
        assert_eq!(to_millidarcy(0.0, 0.003), 0.0);
        let md = to_millidarcy(1.0, 1e-6);
        assert!((md - 1e-12 / 9.869233e-16).abs() / md < 1e-12);
        let k = 3.7e-3;
        let rt = from_millidarcy(to_millidarcy(k, 0.003), 0.003);
        assert!(((rt - k) / k).abs() < 1e-12);
    }

    #[test]
    fn unstable_parameters_abort_with_nan_diagnostic() {
        let g = crate::mediagen::generate_sample(
            &crate::mediagen::GenConfig {
                n: 32,
                porosity_range: (0.55, 0.8),
                ..Default::default()
            },
            3,
        )
        .unwrap();
        let p = FluidParams {
            tau: 0.501,
            force_x: 0.1,
            rho0: 1.0,
        };
        let mut s = init_state(&g, &p).unwrap();
        let err = run_to_steady(&mut s, &p, &SteadyOpts::default());
        assert!(matches!(err, Err(Error::Numeric(_))), "expected NaN abort");
    }

    #[test]
    fn force_linearity_in_stokes_regime() {
        let g = crate::mediagen::generate_sample(
            &crate::mediagen::GenConfig {
                n: 32,
                porosity_range: (0.6, 0.8),
                ..Default::default()
            },
            5,
        )
        .unwrap();
        let opts = SteadyOpts::default();
        let p1 = FluidParams::default();
        let p2 = FluidParams {
            force_x: p1.force_x / 2.0,
            ..p1
        };
        let (f1, _) = solve_permeability(&g, &p1, &opts).unwrap();
        let (f2, _) = solve_permeability(&g, &p2, &opts).unwrap();
        let ratio = f1.mean_ux / f2.mean_ux;
        assert!((ratio - 2.0).abs() < 0.01, "ratio {ratio}");
    }
}
