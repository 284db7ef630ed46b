//! Maps from raw design variables to physical parameters: particle-space
//! density filter, smooth Heaviside projection, cubic SIMP interpolation for
//! the soft body, and the nonvanishing-gradient interpolation for bars.

use crate::math::Vec3;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Parameter floor for the soft body, relative to the full-density value.
pub const SOFT_FLOOR_FRAC: f64 = 1e-6;
/// Relative floor for bar mass and stiffness.
pub const BONE_FLOOR_FRAC: f64 = 1e-9;

/// Raw design variables. `w` is stored actuator-major: `w[a * n_pulses + k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignVariables {
    pub phi: Vec<f64>,
    pub gamma: Vec<f64>,
    pub w: Vec<f64>,
    pub n_actuators: usize,
    pub n_pulses: usize,
}

impl DesignVariables {
    pub fn new(n_particles: usize, n_bars: usize, n_actuators: usize, n_pulses: usize) -> Self {
        DesignVariables {
            phi: vec![0.0; n_particles],
            gamma: vec![0.0; n_bars],
            w: vec![0.0; n_actuators * n_pulses],
            n_actuators,
            n_pulses,
        }
    }

    pub fn w_at(&self, actuator: usize, pulse: usize) -> f64 {
        self.w[actuator * self.n_pulses + pulse]
    }

    pub fn clamp_to_boxes(&mut self) {
        for v in &mut self.phi {
            *v = v.clamp(-1.0, 1.0);
        }
        for v in &mut self.gamma {
            *v = v.clamp(0.0, 1.0);
        }
        for v in &mut self.w {
            *v = v.clamp(0.0, 1.0);
        }
    }
}

/// Linear density filter over particle rest positions. Neighborhoods and
/// normalized weights are precomputed once; the filter acts in material
/// space and is not updated during motion.
#[derive(Debug, Clone)]
pub struct DensityFilter {
    /// Per particle: (neighbor index, normalized weight). Includes self.
    neighbors: Vec<Vec<(u32, f64)>>,
}

impl DensityFilter {
    pub fn build(rest_positions: &[Vec3], radius: f64, exponent: f64) -> Self {
        assert!(radius > 0.0, "filter radius must be positive");
        // spatial hash with cell size = radius
        let mut cells: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        let key = |p: &Vec3| {
            (
                (p.x / radius).floor() as i64,
                (p.y / radius).floor() as i64,
                (p.z / radius).floor() as i64,
            )
        };
        for (i, p) in rest_positions.iter().enumerate() {
            cells.entry(key(p)).or_default().push(i as u32);
        }
        let mut neighbors = Vec::with_capacity(rest_positions.len());
        for (i, p) in rest_positions.iter().enumerate() {
            let (cx, cy, cz) = key(p);
            let mut list: Vec<(u32, f64)> = Vec::new();
            let mut total = 0.0;
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(bucket) = cells.get(&(cx + dx, cy + dy, cz + dz)) {
                            for &j in bucket {
                                let r = (rest_positions[j as usize] - p).norm();
                                if r < radius {
                                    let w = (1.0 - r / radius).powf(exponent);
                                    list.push((j, w));
                                    total += w;
                                }
                            }
                        }
                    }
                }
            }
            debug_assert!(total > 0.0, "particle {i} has an empty filter neighborhood");
            // deterministic order independent of hash iteration
            list.sort_unstable_by_key(|&(j, _)| j);
            for entry in &mut list {
                entry.1 /= total;
            }
            neighbors.push(list);
        }
        DensityFilter { neighbors }
    }

    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        self.neighbors
            .iter()
            .map(|nbrs| nbrs.iter().map(|&(j, w)| w * phi[j as usize]).sum())
            .collect()
    }

    /// Adjoint of [`DensityFilter::apply`] (transpose of the weight matrix).
    pub fn apply_transpose(&self, adj: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; adj.len()];
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            let a = adj[i];
            for &(j, w) in nbrs {
                out[j as usize] += w * a;
            }
        }
        out
    }
}

/// Smooth Heaviside projection of the filtered field into [0, 1].
#[inline]
pub fn project_density(phi_bar: f64, beta: f64) -> f64 {
    0.5 * (1.0 + (beta * phi_bar).tanh() / beta.tanh())
}

#[inline]
pub fn project_density_deriv(phi_bar: f64, beta: f64) -> f64 {
    let t = (beta * phi_bar).tanh();
    0.5 * beta * (1.0 - t * t) / beta.tanh()
}

/// Full-density soft material constants; interpolation scales them by the
/// cubic SIMP law with a small floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftMaterial {
    pub mu_max: f64,
    pub lambda_max: f64,
    pub rho_max: f64,
    pub eta_visc: f64,
}

impl SoftMaterial {
    #[inline]
    fn simp(max: f64, phi_hat: f64) -> f64 {
        let floor = SOFT_FLOOR_FRAC * max;
        floor + (max - floor) * phi_hat * phi_hat * phi_hat
    }

    #[inline]
    fn simp_deriv(max: f64, phi_hat: f64) -> f64 {
        let floor = SOFT_FLOOR_FRAC * max;
        3.0 * (max - floor) * phi_hat * phi_hat
    }

    pub fn mu(&self, phi_hat: f64) -> f64 {
        Self::simp(self.mu_max, phi_hat)
    }
    pub fn lambda(&self, phi_hat: f64) -> f64 {
        Self::simp(self.lambda_max, phi_hat)
    }
    pub fn rho(&self, phi_hat: f64) -> f64 {
        Self::simp(self.rho_max, phi_hat)
    }
    pub fn mu_deriv(&self, phi_hat: f64) -> f64 {
        Self::simp_deriv(self.mu_max, phi_hat)
    }
    pub fn lambda_deriv(&self, phi_hat: f64) -> f64 {
        Self::simp_deriv(self.lambda_max, phi_hat)
    }
    pub fn rho_deriv(&self, phi_hat: f64) -> f64 {
        Self::simp_deriv(self.rho_max, phi_hat)
    }
}

/// Bar interpolation fraction with nonvanishing gradient at gamma = 0:
/// f = ((g+eps)^p - eps^p) / ((1+eps)^p - eps^p).
#[inline]
pub fn bone_interpolation(gamma: f64, eps_b: f64, p: f64) -> f64 {
    ((gamma + eps_b).powf(p) - eps_b.powf(p)) / ((1.0 + eps_b).powf(p) - eps_b.powf(p))
}

#[inline]
pub fn bone_interpolation_deriv(gamma: f64, eps_b: f64, p: f64) -> f64 {
    p * (gamma + eps_b).powf(p - 1.0) / ((1.0 + eps_b).powf(p) - eps_b.powf(p))
}

/// Bar stiffness from the interpolation fraction.
#[inline]
pub fn bone_kappa(fraction: f64, kappa_max: f64) -> f64 {
    let kmin = BONE_FLOOR_FRAC * kappa_max;
    kmin + (kappa_max - kmin) * fraction
}

/// Mass fraction with the relative floor applied.
#[inline]
pub fn bone_mass_fraction(fraction: f64) -> f64 {
    fraction.max(BONE_FLOOR_FRAC)
}
