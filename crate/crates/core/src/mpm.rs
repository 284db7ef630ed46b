//! MLS-MPM kernels for the soft continuum: particle seeding, neo-Hookean +
//! viscous stress, particle-to-grid transfer, grid update with floor contact,
//! and grid-to-particle transfer.
//!
//! All loops run in a fixed order so that repeated evaluation is bit-identical;
//! the backward pass relies on that.

use crate::design::SoftMaterial;
use crate::error::SimError;
use crate::math::{bspline_weights, stencil_base, Mat3, Vec3};
use crate::scene::SceneConfig;

/// Lagrangian particle set (structure of arrays).
#[derive(Debug, Clone)]
pub struct ParticleState {
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
    /// APIC affine velocity matrix (serves as the velocity gradient).
    pub c: Vec<Mat3>,
    pub f: Vec<Mat3>,
    pub phi: Vec<f64>,
    pub phi_hat: Vec<f64>,
    pub mass: Vec<f64>,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub volume0: f64,
}

impl ParticleState {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Refresh per-particle material parameters from projected densities.
    pub fn apply_design(&mut self, phi_hat: &[f64], mat: &SoftMaterial) {
        assert_eq!(phi_hat.len(), self.len());
        for i in 0..self.len() {
            let ph = phi_hat[i];
            self.phi_hat[i] = ph;
            self.mass[i] = mat.rho(ph) * self.volume0;
            self.mu[i] = mat.mu(ph);
            self.lambda[i] = mat.lambda(ph);
        }
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.x
            .iter()
            .enumerate()
            .map(|(i, _)| self.mass[i] * self.v[i])
            .sum()
    }
}

/// Seed a regular particle lattice at dx/2 pitch filling the soft box.
pub fn seed_particles(cfg: &SceneConfig) -> Result<ParticleState, SimError> {
    let h = cfg.dx() / 2.0;
    let lo = cfg.soft_box_min();
    let hi = cfg.soft_box_max();
    let mut counts = [0usize; 3];
    for a in 0..3 {
        counts[a] = ((hi[a] - lo[a]) / h + 1e-9).floor() as usize;
        if counts[a] == 0 {
            return Err(SimError::Other(format!(
                "soft box axis {a} is smaller than one particle spacing"
            )));
        }
    }
    let n = counts[0] * counts[1] * counts[2];
    let mut x = Vec::with_capacity(n);
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            for k in 0..counts[2] {
                x.push(Vec3::new(
                    lo.x + (i as f64 + 0.5) * h,
                    lo.y + (j as f64 + 0.5) * h,
                    lo.z + (k as f64 + 0.5) * h,
                ));
            }
        }
    }
    let volume0 = h * h * h;
    let rho = cfg.soft_body.density_kgpm3;
    Ok(ParticleState {
        v: vec![Vec3::zeros(); n],
        c: vec![Mat3::zeros(); n],
        f: vec![Mat3::identity(); n],
        phi: vec![0.0; n],
        phi_hat: vec![1.0; n],
        mass: vec![rho * volume0; n],
        mu: vec![cfg.lame_mu(); n],
        lambda: vec![cfg.lame_lambda(); n],
        x,
        volume0,
    })
}

/// Background grid with a touched-node list so per-step work scales with the
/// occupied region rather than the full domain.
#[derive(Debug, Clone)]
pub struct GridField {
    pub cells: [usize; 3],
    pub dx: f64,
    pub mass: Vec<f64>,
    pub momentum: Vec<Vec3>,
    pub velocity: Vec<Vec3>,
    touched: Vec<u32>,
    stamp: Vec<u32>,
    epoch: u32,
}

impl GridField {
    pub fn new(cells: [usize; 3], dx: f64) -> Self {
        let n = cells[0] * cells[1] * cells[2];
        GridField {
            cells,
            dx,
            mass: vec![0.0; n],
            momentum: vec![Vec3::zeros(); n],
            velocity: vec![Vec3::zeros(); n],
            touched: Vec::new(),
            stamp: vec![0; n],
            epoch: 0,
        }
    }

    pub fn for_scene(cfg: &SceneConfig) -> Self {
        Self::new(cfg.domain.grid_cells, cfg.dx())
    }

    #[inline]
    pub fn index(&self, i: i64, j: i64, k: i64) -> usize {
        ((i as usize * self.cells[1]) + j as usize) * self.cells[2] + k as usize
    }

    /// Reset touched nodes in O(touched).
    pub fn clear(&mut self) {
        for &idx in &self.touched {
            self.mass[idx as usize] = 0.0;
            self.momentum[idx as usize] = Vec3::zeros();
            self.velocity[idx as usize] = Vec3::zeros();
        }
        self.touched.clear();
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
    }

    #[inline]
    pub fn touch(&mut self, idx: usize) {
        if self.stamp[idx] != self.epoch {
            self.stamp[idx] = self.epoch;
            self.touched.push(idx as u32);
        }
    }

    pub fn touched_nodes(&self) -> &[u32] {
        &self.touched
    }

    pub fn total_mass(&self) -> f64 {
        self.touched.iter().map(|&i| self.mass[i as usize]).sum()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.touched
            .iter()
            .map(|&i| self.momentum[i as usize])
            .sum()
    }

    /// Node coordinates from a flat index.
    #[inline]
    pub fn node_coords(&self, idx: usize) -> (usize, usize, usize) {
        let k = idx % self.cells[2];
        let j = (idx / self.cells[2]) % self.cells[1];
        let i = idx / (self.cells[1] * self.cells[2]);
        (i, j, k)
    }
}

/// Cauchy stress: compressible neo-Hookean plus deviatoric viscous term with
/// the particle affine matrix standing in for the velocity gradient.
pub fn compute_stress(
    f: &Mat3,
    c: &Mat3,
    mu: f64,
    lambda: f64,
    eta: f64,
) -> Result<Mat3, SimError> {
    let j = f.determinant();
    if !(j > 0.0) {
        return Err(SimError::Inverted { index: 0, step: 0 });
    }
    let elastic = (mu * f * f.transpose() + (lambda * j.ln() - mu) * Mat3::identity()) / j;
    let viscous = eta * (c + c.transpose() - (2.0 / 3.0) * c.trace() * Mat3::identity());
    Ok(elastic + viscous)
}

/// Fused MLS-MPM force scale: the stress contribution enters the momentum
/// transfer as `-dt * V0 * 4/dx^2 * sigma * (x_i - x_p)`.
#[inline]
pub fn stress_momentum_scale(volume0: f64, dt: f64, dx: f64) -> f64 {
    -dt * volume0 * 4.0 / (dx * dx)
}

/// Particle-to-grid transfer: mass, APIC momentum and fused stress force.
pub fn p2g(
    particles: &ParticleState,
    grid: &mut GridField,
    dt: f64,
    eta: f64,
    step: usize,
) -> Result<(), SimError> {
    let dx = grid.dx;
    let scale = stress_momentum_scale(particles.volume0, dt, dx);
    for p in 0..particles.len() {
        let (base, fx) = stencil_base(&particles.x[p], dx, grid.cells)
            .ok_or(SimError::ParticleOutOfDomain { index: p, step })?;
        let sigma = compute_stress(
            &particles.f[p],
            &particles.c[p],
            particles.mu[p],
            particles.lambda[p],
            eta,
        )
        .map_err(|_| SimError::Inverted { index: p, step })?;
        let affine = particles.mass[p] * particles.c[p] + scale * sigma;
        let m = particles.mass[p];
        let mv = m * particles.v[p];
        let wx = bspline_weights(fx.x);
        let wy = bspline_weights(fx.y);
        let wz = bspline_weights(fx.z);
        for di in 0..3 {
            for dj in 0..3 {
                for dk in 0..3 {
                    let w = wx[di] * wy[dj] * wz[dk];
                    let dpos = Vec3::new(
                        (di as f64 - fx.x) * dx,
                        (dj as f64 - fx.y) * dx,
                        (dk as f64 - fx.z) * dx,
                    );
                    let idx = grid.index(base[0] + di as i64, base[1] + dj as i64, base[2] + dk as i64);
                    grid.touch(idx);
                    grid.mass[idx] += w * m;
                    grid.momentum[idx] += w * (mv + affine * dpos);
                }
            }
        }
    }
    Ok(())
}

/// Grid momentum update: normalize, apply gravity, resolve floor contact with
/// Coulomb friction, and zero the domain-boundary band.
pub fn grid_update(
    grid: &mut GridField,
    dt: f64,
    gravity: &Vec3,
    floor_height: Option<f64>,
    friction_mu: f64,
    boundary_margin: usize,
) {
    let dx = grid.dx;
    let cells = grid.cells;
    let margin = boundary_margin;
    for t in 0..grid.touched.len() {
        let idx = grid.touched[t] as usize;
        let m = grid.mass[idx];
        if m <= 0.0 {
            grid.velocity[idx] = Vec3::zeros();
            continue;
        }
        let mut v = grid.momentum[idx] / m + gravity * dt;
        let (i, j, k) = grid.node_coords(idx);
        if let Some(fh) = floor_height {
            let z = k as f64 * dx;
            if z <= fh + 1e-12 && v.z < 0.0 {
                let vn = -v.z;
                v.z = 0.0;
                let vt = (v.x * v.x + v.y * v.y).sqrt();
                if vt > 0.0 {
                    let red = friction_mu * vn;
                    if red >= vt {
                        v.x = 0.0;
                        v.y = 0.0;
                    } else {
                        let s = 1.0 - red / vt;
                        v.x *= s;
                        v.y *= s;
                    }
                }
            }
        }
        let near = |c: usize, n: usize| c < margin || c + margin >= n;
        if near(i, cells[0]) || near(j, cells[1]) || near(k, cells[2]) {
            v = Vec3::zeros();
        }
        grid.velocity[idx] = v;
    }
}

/// Grid-to-particle transfer: APIC gather, advection, deformation update.
pub fn g2p(
    grid: &GridField,
    particles: &mut ParticleState,
    dt: f64,
    step: usize,
) -> Result<(), SimError> {
    let dx = grid.dx;
    let inv_d = 4.0 / (dx * dx);
    for p in 0..particles.len() {
        let (base, fx) = stencil_base(&particles.x[p], dx, grid.cells)
            .ok_or(SimError::ParticleOutOfDomain { index: p, step })?;
        let wx = bspline_weights(fx.x);
        let wy = bspline_weights(fx.y);
        let wz = bspline_weights(fx.z);
        let mut v_new = Vec3::zeros();
        let mut c_new = Mat3::zeros();
        for di in 0..3 {
            for dj in 0..3 {
                for dk in 0..3 {
                    let w = wx[di] * wy[dj] * wz[dk];
                    let dpos = Vec3::new(
                        (di as f64 - fx.x) * dx,
                        (dj as f64 - fx.y) * dx,
                        (dk as f64 - fx.z) * dx,
                    );
                    let idx = grid.index(base[0] + di as i64, base[1] + dj as i64, base[2] + dk as i64);
                    let gv = grid.velocity[idx];
                    v_new += w * gv;
                    c_new += (w * inv_d) * gv * dpos.transpose();
                }
            }
        }
        particles.v[p] = v_new;
        particles.c[p] = c_new;
        particles.x[p] += dt * v_new;
        let f_new = (Mat3::identity() + dt * c_new) * particles.f[p];
        if !(f_new.determinant() > 0.0) {
            return Err(SimError::Inverted { index: p, step });
        }
        particles.f[p] = f_new;
    }
    Ok(())
}
