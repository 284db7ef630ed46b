//! Bar-network dynamics: nodal mass assembly from bar densities, explicit
//! prediction, single-pass XPBD distance-constraint projection, and the
//! buckling-aware stiffness cap.

use crate::design::{bone_interpolation, bone_kappa, bone_mass_fraction, BONE_FLOOR_FRAC};
use crate::math::Vec3;
use crate::scene::{BarRole, GroundStructure};

#[derive(Debug, Clone)]
pub struct Bar {
    pub a: usize,
    pub b: usize,
    /// Geometric rest length; also the constraint reference except for the
    /// slider bars whose reference switches with the engagement state.
    pub l_rest: f64,
    /// Design-derived axial stiffness (EA form, per unit reference length).
    pub kappa: f64,
    pub kappa_min: f64,
    pub role: BarRole,
    pub gamma: f64,
    /// XPBD Lagrange multiplier; reset at the start of every substep.
    pub lambda: f64,
    pub young: f64,
    pub second_moment: f64,
    pub k_factor: f64,
    pub buckling_exempt: bool,
    pub designable: bool,
}

#[derive(Debug, Clone)]
pub struct BarNetwork {
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub mass: Vec<f64>,
    pub inv_mass: Vec<f64>,
    pub pinned: Vec<bool>,
    pub bars: Vec<Bar>,
}

impl BarNetwork {
    pub fn n_nodes(&self) -> usize {
        self.x.len()
    }

    pub fn total_momentum(&self) -> Vec3 {
        (0..self.n_nodes())
            .filter(|&i| !self.pinned[i])
            .map(|i| self.mass[i] * self.v[i])
            .sum()
    }

    /// Network skeleton from the ground structure; masses and stiffnesses
    /// still need [`apply_bar_design`].
    pub fn from_ground_structure(gs: &GroundStructure) -> Self {
        let n = gs.nodes.len();
        let bars = gs
            .bars
            .iter()
            .map(|b| Bar {
                a: b.a,
                b: b.b,
                l_rest: b.rest_length,
                kappa: b.kappa_max,
                kappa_min: BONE_FLOOR_FRAC * b.kappa_max,
                role: b.role,
                gamma: 1.0,
                lambda: 0.0,
                young: b.young,
                second_moment: b.second_moment,
                k_factor: b.buckling_length_factor,
                buckling_exempt: b.buckling_exempt,
                designable: b.designable,
            })
            .collect();
        BarNetwork {
            x: gs.nodes.iter().map(|n| n.pos).collect(),
            v: vec![Vec3::zeros(); n],
            mass: vec![0.0; n],
            inv_mass: vec![0.0; n],
            pinned: vec![false; n],
            bars,
        }
    }
}

/// Map designable-bar gammas onto stiffness and reassemble nodal masses.
/// Returns the indices of nodes that hit the mass floor with no fixed mass,
/// so callers can warn about isolated nodes.
pub fn apply_bar_design(
    net: &mut BarNetwork,
    gs: &GroundStructure,
    gamma: &[f64],
    eps_b: f64,
    p_exp: f64,
) -> Vec<usize> {
    assert_eq!(gamma.len(), gs.designable_bars.len());
    for (g_idx, &bar_idx) in gs.designable_bars.iter().enumerate() {
        let g = gamma[g_idx];
        let f = bone_interpolation(g, eps_b, p_exp);
        let bar = &mut net.bars[bar_idx];
        bar.gamma = g;
        bar.kappa = bone_kappa(f, gs.bars[bar_idx].kappa_max);
    }
    assemble_node_masses(net, gs, gamma, eps_b, p_exp)
}

/// Distribute half of each bar's mass to its endpoints, add lumped hardware
/// masses, and apply the relative mass floor.
pub fn assemble_node_masses(
    net: &mut BarNetwork,
    gs: &GroundStructure,
    gamma: &[f64],
    eps_b: f64,
    p_exp: f64,
) -> Vec<usize> {
    let n = net.n_nodes();
    let mut mass = vec![0.0; n];
    let mut gamma_of_bar = vec![None; gs.bars.len()];
    for (g_idx, &bar_idx) in gs.designable_bars.iter().enumerate() {
        gamma_of_bar[bar_idx] = Some(gamma[g_idx]);
    }
    for (bar_idx, gsb) in gs.bars.iter().enumerate() {
        if gsb.rho_area == 0.0 {
            continue;
        }
        let frac = match gamma_of_bar[bar_idx] {
            Some(g) => bone_mass_fraction(bone_interpolation(g, eps_b, p_exp)),
            None => 1.0,
        };
        let half = 0.5 * frac * gsb.rho_area * gsb.rest_length;
        mass[gsb.a] += half;
        mass[gsb.b] += half;
    }
    for (i, node) in gs.nodes.iter().enumerate() {
        mass[i] += node.fixed_mass;
    }
    let max_mass = mass.iter().cloned().fold(0.0, f64::max);
    let floor = BONE_FLOOR_FRAC * max_mass;
    let mut floored = Vec::new();
    for (i, m) in mass.iter_mut().enumerate() {
        if *m < floor {
            *m = floor;
            if gs.nodes[i].fixed_mass == 0.0 {
                floored.push(i);
            }
        }
    }
    for i in 0..n {
        net.mass[i] = mass[i];
        net.inv_mass[i] = if net.pinned[i] || mass[i] == 0.0 {
            0.0
        } else {
            1.0 / mass[i]
        };
    }
    floored
}

/// Explicit prediction under gravity and external nodal forces.
pub fn predict_positions(
    net: &BarNetwork,
    f_ext: &[Vec3],
    gravity: &Vec3,
    dt: f64,
    x_pred: &mut [Vec3],
    v_pred: &mut [Vec3],
) {
    for i in 0..net.n_nodes() {
        if net.pinned[i] {
            v_pred[i] = Vec3::zeros();
            x_pred[i] = net.x[i];
        } else {
            let v = net.v[i] + dt * (gravity + f_ext[i] * net.inv_mass[i]);
            v_pred[i] = v;
            x_pred[i] = net.x[i] + dt * v;
        }
    }
}

/// Euler buckling critical load for a bar.
#[inline]
pub fn critical_load(young: f64, second_moment: f64, k_factor: f64, l_ref: f64) -> f64 {
    let kl = k_factor * l_ref;
    std::f64::consts::PI.powi(2) * young * second_moment / (kl * kl)
}

/// Cap the stiffness so the implied compressive axial force cannot exceed the
/// Euler critical load.
pub fn effective_stiffness_buckling(
    kappa: f64,
    kappa_min: f64,
    l_ref: f64,
    current_len: f64,
    young: f64,
    second_moment: f64,
    k_factor: f64,
) -> f64 {
    if current_len >= l_ref {
        return kappa;
    }
    let p_cr = critical_load(young, second_moment, k_factor, l_ref);
    let p_est = kappa / l_ref * (l_ref - current_len);
    if p_est >= p_cr {
        kappa.min(p_cr * l_ref / (l_ref - current_len)).max(kappa_min)
    } else {
        kappa
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectionOutcome {
    Projected { delta_lambda: f64 },
    /// Coincident endpoints: direction undefined, constraint skipped.
    SkippedDegenerate,
}

/// One XPBD projection of a distance constraint. Positions are corrected in
/// place and the accumulated multiplier updated.
#[allow(clippy::too_many_arguments)]
pub fn project_distance_constraint(
    xa: &mut Vec3,
    xb: &mut Vec3,
    inv_ma: f64,
    inv_mb: f64,
    l_ref: f64,
    kappa_eff: f64,
    lambda: &mut f64,
    dt: f64,
) -> ProjectionOutcome {
    let u = *xa - *xb;
    let len = u.norm();
    if len <= 0.0 {
        return ProjectionOutcome::SkippedDegenerate;
    }
    let n = u / len;
    let g = len - l_ref;
    let alpha = l_ref / (kappa_eff * dt * dt);
    let denom = inv_ma + inv_mb + alpha;
    let dl = (-g - alpha * *lambda) / denom;
    *xa += dl * inv_ma * n;
    *xb -= dl * inv_mb * n;
    *lambda += dl;
    ProjectionOutcome::Projected { delta_lambda: dl }
}
