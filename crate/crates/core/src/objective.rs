//! Locomotion objective, deviation penalties, binarization/count constraints
//! and the augmented Lagrangian, together with its exact partial derivatives
//! with respect to end states, masses and design variables.

use crate::math::Vec3;
use serde::{Deserialize, Serialize};

/// Constraint order used throughout: soft, bone, act, nbone.
pub const N_CONSTRAINTS: usize = 4;
pub const C_SOFT: usize = 0;
pub const C_BONE: usize = 1;
pub const C_ACT: usize = 2;
pub const C_NBONE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParams {
    pub d_soft_ref: f64,
    pub d_bone_ref: f64,
    pub c_soft_bound: f64,
    pub c_act_bound: f64,
    /// Already scaled by the designable-bar count.
    pub c_bone_bound: f64,
    pub c_nbone_bound: f64,
}

/// Augmented-Lagrangian multiplier state. `c_soft_active` is the latched
/// gate: the soft binarization term only enters once the skeletal constraint
/// has been satisfied at least once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub lambda: [f64; N_CONSTRAINTS],
    pub sigma: [f64; N_CONSTRAINTS],
    pub c_soft_active: bool,
}

impl Multipliers {
    pub fn new(sigma_init: f64) -> Self {
        Multipliers {
            lambda: [0.0; N_CONSTRAINTS],
            sigma: [sigma_init; N_CONSTRAINTS],
            c_soft_active: false,
        }
    }

    pub fn term_active(&self, i: usize) -> bool {
        i != C_SOFT || self.c_soft_active
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub l_x: f64,
    pub d_soft: f64,
    pub d_bone: f64,
    pub constraints: [f64; N_CONSTRAINTS],
    pub lambda: [f64; N_CONSTRAINTS],
    pub sigma: [f64; N_CONSTRAINTS],
    pub c_soft_active: bool,
    pub l_total: f64,
}

/// Everything the objective reads from a finished run.
pub struct ObjectiveInputs<'a> {
    pub cg0: Vec3,
    pub cg_start: Vec3,
    pub cg_end: Vec3,
    pub x0_particles: &'a [Vec3],
    pub x0_nodes: &'a [Vec3],
    /// Positions at t_start; only the mass partial of L_x reads these.
    pub x_start_particles: &'a [Vec3],
    pub x_start_nodes: &'a [Vec3],
    pub x_end_particles: &'a [Vec3],
    pub x_end_nodes: &'a [Vec3],
    pub particle_mass: &'a [f64],
    pub node_mass: &'a [f64],
    pub pinned: &'a [bool],
}

/// Forward displacement of the combined center of gravity along +x.
pub fn locomotion_distance(cg_start: &Vec3, cg_end: &Vec3) -> f64 {
    cg_end.x - cg_start.x
}

/// Mass-weighted mean deviation from rigid x-translation, measured from the
/// initial configuration, separately for particles and nodes.
pub fn deviation_penalties(inputs: &ObjectiveInputs) -> (f64, f64) {
    let dcgx = inputs.cg_end.x - inputs.cg0.x;
    let soft = weighted_deviation(
        inputs.x0_particles,
        inputs.x_end_particles,
        inputs.particle_mass,
        None,
        dcgx,
    );
    let bone = weighted_deviation(
        inputs.x0_nodes,
        inputs.x_end_nodes,
        inputs.node_mass,
        Some(inputs.pinned),
        dcgx,
    );
    (soft, bone)
}

fn weighted_deviation(
    x0: &[Vec3],
    x1: &[Vec3],
    mass: &[f64],
    pinned: Option<&[bool]>,
    dcgx: f64,
) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..x0.len() {
        if pinned.map_or(false, |p| p[i]) {
            continue;
        }
        let d = (x1[i] - x0[i]) - Vec3::new(dcgx, 0.0, 0.0);
        num += mass[i] * d.norm();
        den += mass[i];
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn mean_binarization(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().map(|v| v * (1.0 - v)).sum::<f64>() / values.len() as f64
    }
}

/// Quadratic binarization constraints plus the bone-count constraint;
/// positive means violated.
pub fn binarization_constraints(
    phi_hat: &[f64],
    gamma: &[f64],
    w: &[f64],
    params: &ObjectiveParams,
) -> [f64; N_CONSTRAINTS] {
    let mean_gamma = if gamma.is_empty() {
        0.0
    } else {
        gamma.iter().sum::<f64>() / gamma.len() as f64
    };
    [
        mean_binarization(phi_hat) - params.c_soft_bound,
        mean_binarization(gamma) - params.c_bone_bound,
        mean_binarization(w) - params.c_act_bound,
        mean_gamma - params.c_nbone_bound,
    ]
}

/// Assemble the augmented Lagrangian from its pieces.
pub fn augmented_lagrangian(
    l_x: f64,
    d_soft: f64,
    d_bone: f64,
    constraints: &[f64; N_CONSTRAINTS],
    params: &ObjectiveParams,
    mult: &Multipliers,
) -> f64 {
    let a_s = params.d_soft_ref / (params.d_soft_ref + d_soft);
    let a_b = params.d_bone_ref / (params.d_bone_ref + d_bone);
    let mut l = -l_x * a_s * a_b;
    for i in 0..N_CONSTRAINTS {
        if mult.term_active(i) {
            let c = constraints[i];
            l += -mult.lambda[i] * c + 0.5 * mult.sigma[i] * c * c;
        }
    }
    l
}

pub fn evaluate(
    inputs: &ObjectiveInputs,
    phi_hat: &[f64],
    gamma: &[f64],
    w: &[f64],
    params: &ObjectiveParams,
    mult: &Multipliers,
) -> ObjectiveReport {
    let l_x = locomotion_distance(&inputs.cg_start, &inputs.cg_end);
    let (d_soft, d_bone) = deviation_penalties(inputs);
    let constraints = binarization_constraints(phi_hat, gamma, w, params);
    let l_total = augmented_lagrangian(l_x, d_soft, d_bone, &constraints, params, mult);
    ObjectiveReport {
        l_x,
        d_soft,
        d_bone,
        constraints,
        lambda: mult.lambda,
        sigma: mult.sigma,
        c_soft_active: mult.c_soft_active,
        l_total,
    }
}

/// Partial derivatives of L_total with respect to its scalar pieces.
#[derive(Debug, Clone, Copy)]
pub struct AlPartials {
    pub dl_dlx: f64,
    pub dl_dd_soft: f64,
    pub dl_dd_bone: f64,
    pub dl_dc: [f64; N_CONSTRAINTS],
}

pub fn al_partials(report: &ObjectiveReport, params: &ObjectiveParams) -> AlPartials {
    let a_s = params.d_soft_ref / (params.d_soft_ref + report.d_soft);
    let a_b = params.d_bone_ref / (params.d_bone_ref + report.d_bone);
    let mut dl_dc = [0.0; N_CONSTRAINTS];
    for i in 0..N_CONSTRAINTS {
        let active = i != C_SOFT || report.c_soft_active;
        if active {
            dl_dc[i] = -report.lambda[i] + report.sigma[i] * report.constraints[i];
        }
    }
    AlPartials {
        dl_dlx: -a_s * a_b,
        dl_dd_soft: report.l_x * a_b * params.d_soft_ref
            / ((params.d_soft_ref + report.d_soft) * (params.d_soft_ref + report.d_soft)),
        dl_dd_bone: report.l_x * a_s * params.d_bone_ref
            / ((params.d_bone_ref + report.d_bone) * (params.d_bone_ref + report.d_bone)),
        dl_dc,
    }
}

/// Exact adjoint of the objective with respect to end-state positions,
/// start-state positions, per-body masses and the directly-entering design
/// variables. Everything the backward sweep needs to start.
pub struct ObjectiveAdjoint {
    pub report: ObjectiveReport,
    pub x_end_particles: Vec<Vec3>,
    pub x_end_nodes: Vec<Vec3>,
    pub x_start_particles: Vec<Vec3>,
    pub x_start_nodes: Vec<Vec3>,
    pub mass_particles: Vec<f64>,
    pub mass_nodes: Vec<f64>,
    pub phi_hat: Vec<f64>,
    pub gamma: Vec<f64>,
    pub w: Vec<f64>,
}

pub fn evaluate_with_adjoint(
    inputs: &ObjectiveInputs,
    phi_hat: &[f64],
    gamma: &[f64],
    w: &[f64],
    params: &ObjectiveParams,
    mult: &Multipliers,
) -> ObjectiveAdjoint {
    let report = evaluate(inputs, phi_hat, gamma, w, params, mult);
    let p = al_partials(&report, params);

    let np = inputs.x0_particles.len();
    let nn = inputs.x0_nodes.len();
    let m_soft: f64 = inputs.particle_mass.iter().sum();
    let m_bone: f64 = (0..nn)
        .filter(|&i| !inputs.pinned[i])
        .map(|i| inputs.node_mass[i])
        .sum();
    let m_total = m_soft + m_bone;
    let dcgx = inputs.cg_end.x - inputs.cg0.x;
    let ex = Vec3::new(1.0, 0.0, 0.0);

    // Deviation unit vectors and the mass-weighted x-sums that couple every
    // body through the center of gravity.
    let eps = 1e-20;
    let unit = |d: Vec3| {
        let n = d.norm();
        if n > eps {
            d / n
        } else {
            Vec3::zeros()
        }
    };
    let dev_p: Vec<Vec3> = (0..np)
        .map(|i| {
            unit((inputs.x_end_particles[i] - inputs.x0_particles[i]) - dcgx * ex)
        })
        .collect();
    let dev_n: Vec<Vec3> = (0..nn)
        .map(|i| {
            if inputs.pinned[i] {
                Vec3::zeros()
            } else {
                unit((inputs.x_end_nodes[i] - inputs.x0_nodes[i]) - dcgx * ex)
            }
        })
        .collect();
    // dD/d(dcgx) = -sum_i (m_i/M_group) * unit_i . e_x
    let s_soft: f64 = (0..np)
        .map(|i| inputs.particle_mass[i] * dev_p[i].x)
        .sum::<f64>()
        / m_soft.max(eps);
    let s_bone: f64 = (0..nn)
        .filter(|&i| !inputs.pinned[i])
        .map(|i| inputs.node_mass[i] * dev_n[i].x)
        .sum::<f64>()
        / m_bone.max(eps);
    let dd_soft_dcgx = -s_soft;
    let dd_bone_dcgx = -s_bone;
    // total adjoint flowing into dcgx (cg_end.x - cg0.x); cg0 is constant
    let dcgx_adj = p.dl_dd_soft * dd_soft_dcgx + p.dl_dd_bone * dd_bone_dcgx;

    // dL/dx_end = dl_dlx * m_i/M * ex  (locomotion)
    //           + dl_dd  * m_i/M_group * unit_i  (deviation, direct)
    //           + dcgx_adj * m_i/M * ex  (deviation, through the cg)
    let mut x_end_p = vec![Vec3::zeros(); np];
    let mut x_end_n = vec![Vec3::zeros(); nn];
    for i in 0..np {
        let mi = inputs.particle_mass[i];
        x_end_p[i] = (p.dl_dlx + dcgx_adj) * (mi / m_total) * ex
            + p.dl_dd_soft * (mi / m_soft.max(eps)) * dev_p[i];
    }
    for i in 0..nn {
        if inputs.pinned[i] {
            continue;
        }
        let mi = inputs.node_mass[i];
        x_end_n[i] = (p.dl_dlx + dcgx_adj) * (mi / m_total) * ex
            + p.dl_dd_bone * (mi / m_bone.max(eps)) * dev_n[i];
    }

    // dL/dx_start = -dl_dlx * m_i/M * ex (only L_x reads the start state)
    let start_coeff = -p.dl_dlx / m_total;
    let x_start_p: Vec<Vec3> = (0..np)
        .map(|i| start_coeff * inputs.particle_mass[i] * ex)
        .collect();
    let x_start_n: Vec<Vec3> = (0..nn)
        .map(|i| {
            if inputs.pinned[i] {
                Vec3::zeros()
            } else {
                start_coeff * inputs.node_mass[i] * ex
            }
        })
        .collect();

    // Mass adjoints. Three paths per body:
    //   dL_x/dm_i   = ((x_i(te) - x_i(ts)).e_x - L_x) / M
    //   dD/dm_i     = (|d_i| - D) / M_group          (own group only)
    //   d(dcgx)/dm_i = ((x_i(te) - x_i(0)).e_x - dcgx) / M
    let l_x = report.l_x;
    let mut mass_p = vec![0.0; np];
    let mut mass_n = vec![0.0; nn];
    let n_deviation = |i: usize, is_particle: bool| -> f64 {
        if is_particle {
            ((inputs.x_end_particles[i] - inputs.x0_particles[i]) - dcgx * ex).norm()
        } else {
            ((inputs.x_end_nodes[i] - inputs.x0_nodes[i]) - dcgx * ex).norm()
        }
    };
    for i in 0..np {
        let ni = n_deviation(i, true);
        let direct = p.dl_dd_soft * (ni - report.d_soft) / m_soft.max(eps);
        let cg_term = dcgx_adj
            * (inputs.x_end_particles[i].x - inputs.x0_particles[i].x - dcgx)
            / m_total;
        let lx_term = p.dl_dlx
            * ((inputs.x_end_particles[i].x - inputs.x_start_particles[i].x) - l_x)
            / m_total;
        mass_p[i] = direct + cg_term + lx_term;
    }
    for i in 0..nn {
        if inputs.pinned[i] {
            continue;
        }
        let ni = n_deviation(i, false);
        let direct = p.dl_dd_bone * (ni - report.d_bone) / m_bone.max(eps);
        let cg_term =
            dcgx_adj * (inputs.x_end_nodes[i].x - inputs.x0_nodes[i].x - dcgx) / m_total;
        let lx_term = p.dl_dlx
            * ((inputs.x_end_nodes[i].x - inputs.x_start_nodes[i].x) - l_x)
            / m_total;
        mass_n[i] = direct + cg_term + lx_term;
    }

    // Direct design-variable terms from the constraint penalties.
    let nphi = phi_hat.len().max(1) as f64;
    let phi_hat_adj: Vec<f64> = phi_hat
        .iter()
        .map(|&v| p.dl_dc[C_SOFT] * (1.0 - 2.0 * v) / nphi)
        .collect();
    let ngam = gamma.len().max(1) as f64;
    let gamma_adj: Vec<f64> = gamma
        .iter()
        .map(|&v| p.dl_dc[C_BONE] * (1.0 - 2.0 * v) / ngam + p.dl_dc[C_NBONE] / ngam)
        .collect();
    let nw = w.len().max(1) as f64;
    let w_adj: Vec<f64> = w
        .iter()
        .map(|&v| p.dl_dc[C_ACT] * (1.0 - 2.0 * v) / nw)
        .collect();

    ObjectiveAdjoint {
        report,
        x_end_particles: x_end_p,
        x_end_nodes: x_end_n,
        x_start_particles: x_start_p,
        x_start_nodes: x_start_n,
        mass_particles: mass_p,
        mass_nodes: mass_n,
        phi_hat: phi_hat_adj,
        gamma: gamma_adj,
        w: w_adj,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ObjectiveParams {
        ObjectiveParams {
            d_soft_ref: 0.005,
            d_bone_ref: 0.005,
            c_soft_bound: 0.0125,
            c_act_bound: 0.0025,
            c_bone_bound: 0.0125 / 180.0,
            c_nbone_bound: 40.0 / 180.0,
        }
    }

    #[test]
    fn pure_translation_distance() {
        let a = Vec3::new(0.1, 0.2, 0.3);
        let b = a + Vec3::new(0.05, 0.0, 0.0);
        assert!((locomotion_distance(&a, &b) - 0.05).abs() < 1e-15);
        // lateral motion contributes nothing
        let c = a + Vec3::new(0.0, 0.4, -0.2);
        assert_eq!(locomotion_distance(&a, &c), 0.0);
    }

    fn inputs_from(
        x0p: &[Vec3],
        x1p: &[Vec3],
        mp: &[f64],
    ) -> (Vec3, Vec3) {
        let m: f64 = mp.iter().sum();
        let cg0 = x0p
            .iter()
            .zip(mp)
            .map(|(x, &w)| w * x)
            .sum::<Vec3>()
            / m;
        let cg1 = x1p
            .iter()
            .zip(mp)
            .map(|(x, &w)| w * x)
            .sum::<Vec3>()
            / m;
        (cg0, cg1)
    }

    #[test]
    fn rigid_translations() {
        let x0: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let m = vec![1.0; 5];
        // exact rigid x-translation: zero deviation
        let x1: Vec<Vec3> = x0.iter().map(|p| p + Vec3::new(0.3, 0.0, 0.0)).collect();
        let (cg0, cg1) = inputs_from(&x0, &x1, &m);
        let inputs = ObjectiveInputs {
            cg0,
            cg_start: cg0,
            cg_end: cg1,
            x0_particles: &x0,
            x0_nodes: &[],
            x_start_particles: &x0,
            x_start_nodes: &[],
            x_end_particles: &x1,
            x_end_nodes: &[],
            particle_mass: &m,
            node_mass: &[],
            pinned: &[],
        };
        let (ds, db) = deviation_penalties(&inputs);
        assert!(ds.abs() < 1e-15);
        assert_eq!(db, 0.0);

        // rigid y-translation by 0.01: deviation equals the lateral motion
        let x1: Vec<Vec3> = x0.iter().map(|p| p + Vec3::new(0.0, 0.01, 0.0)).collect();
        let (cg0, cg1) = inputs_from(&x0, &x1, &m);
        let inputs = ObjectiveInputs {
            cg0,
            cg_start: cg0,
            cg_end: cg1,
            x0_particles: &x0,
            x0_nodes: &[],
            x_start_particles: &x0,
            x_start_nodes: &[],
            x_end_particles: &x1,
            x_end_nodes: &[],
            particle_mass: &m,
            node_mass: &[],
            pinned: &[],
        };
        let (ds, _) = deviation_penalties(&inputs);
        assert!((ds - 0.01).abs() < 1e-15);
    }

    #[test]
    fn single_displaced_particle_matches_brute_force() {
        // N equal masses, one displaced along x: brute-force the definition
        let n = 8usize;
        let x0: Vec<Vec3> = (0..n).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let mut x1 = x0.clone();
        let delta = 0.02;
        x1[3].x += delta;
        let m = vec![2.0; n];
        let (cg0, cg1) = inputs_from(&x0, &x1, &m);
        let inputs = ObjectiveInputs {
            cg0,
            cg_start: cg0,
            cg_end: cg1,
            x0_particles: &x0,
            x0_nodes: &[],
            x_start_particles: &x0,
            x_start_nodes: &[],
            x_end_particles: &x1,
            x_end_nodes: &[],
            particle_mass: &m,
            node_mass: &[],
            pinned: &[],
        };
        let (ds, _) = deviation_penalties(&inputs);
        // direct summation oracle
        let dcgx = delta / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let move_x = if i == 3 { delta } else { 0.0 };
            acc += 2.0 * (move_x - dcgx).abs();
        }
        let oracle = acc / (2.0 * n as f64);
        assert!((ds - oracle).abs() < 1e-15);
    }

    #[test]
    fn binary_designs_sit_at_the_bounds() {
        let p = params();
        let phi: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
        let gamma = vec![1.0; 180];
        let w = vec![0.0; 20];
        let c = binarization_constraints(&phi, &gamma, &w, &p);
        assert_eq!(c[C_SOFT], -0.0125);
        assert_eq!(c[C_ACT], -0.0025);
        assert!(c[C_BONE] < 0.0);
    }

    #[test]
    fn half_density_soft_constraint() {
        let p = params();
        let phi = vec![0.5; 100];
        let c = binarization_constraints(&phi, &[], &[], &p);
        assert!((c[C_SOFT] - 0.2375).abs() < 1e-15);
    }

    #[test]
    fn bone_count_constraint_at_forty_of_180() {
        let p = params();
        let mut gamma = vec![0.0; 180];
        for g in gamma.iter_mut().take(40) {
            *g = 1.0;
        }
        let c = binarization_constraints(&[], &gamma, &[], &p);
        assert!(c[C_NBONE].abs() < 1e-15);
    }

    #[test]
    fn single_half_dense_bar_violates_bone_bound() {
        let p = params();
        let mut gamma = vec![0.0; 180];
        gamma[7] = 0.5;
        let c = binarization_constraints(&[], &gamma, &[], &p);
        assert!(c[C_BONE] > 0.0);
    }

    #[test]
    fn deviation_at_reference_halves_locomotion() {
        let p = params();
        let mult = Multipliers::new(1.0);
        let l0 = augmented_lagrangian(0.1, 0.0, 0.0, &[0.0; 4], &p, &mult);
        assert_eq!(l0, -0.1);
        let l_half = augmented_lagrangian(0.1, 0.005, 0.0, &[0.0; 4], &p, &mult);
        assert_eq!(l_half, -0.05);
    }

    #[test]
    fn penalty_contribution() {
        let p = params();
        let mut mult = Multipliers::new(10.0);
        mult.c_soft_active = true;
        // lambda = 0, sigma = 10, C = 0.1 -> 0.5 * 10 * 0.01 = 0.05
        let l = augmented_lagrangian(0.0, 0.0, 0.0, &[0.1, 0.0, 0.0, 0.0], &p, &mult);
        assert!((l - 0.05).abs() < 1e-15);
    }

    #[test]
    fn soft_gate_removes_its_term() {
        let p = params();
        let mut mult = Multipliers::new(10.0);
        mult.c_soft_active = false;
        let l = augmented_lagrangian(0.0, 0.0, 0.0, &[0.3, 0.0, 0.0, 0.0], &p, &mult);
        assert_eq!(l, 0.0);
    }

    #[test]
    fn adjoint_matches_finite_differences() {
        // synthetic two-population state; FD through the full evaluate()
        let x0p: Vec<Vec3> = (0..6)
            .map(|i| Vec3::new(0.1 * i as f64, 0.02 * i as f64, 0.0))
            .collect();
        let x1p: Vec<Vec3> = x0p
            .iter()
            .enumerate()
            .map(|(i, p)| p + Vec3::new(0.05 + 0.01 * (i as f64).sin(), 0.003 * i as f64, 0.002))
            .collect();
        let x0n: Vec<Vec3> = (0..3).map(|i| Vec3::new(0.2 * i as f64, 0.1, 0.05)).collect();
        let x1n: Vec<Vec3> = x0n
            .iter()
            .enumerate()
            .map(|(i, p)| p + Vec3::new(0.04, -0.002 * i as f64, 0.001))
            .collect();
        let mp: Vec<f64> = (0..6).map(|i| 0.5 + 0.1 * i as f64).collect();
        let mn = vec![0.3, 0.2, 0.4];
        let pinned = vec![false; 3];
        let phi_hat = vec![0.3, 0.6, 0.9, 0.2, 0.5, 0.7];
        let gamma = vec![0.4, 0.8, 0.1];
        let w = vec![0.2, 0.9];
        let p = params();
        let mut mult = Multipliers::new(3.0);
        mult.c_soft_active = true;
        mult.lambda = [-0.1, -0.2, 0.0, -0.05];

        // x at t_start: use a distinct configuration so dL_x/d(start) != 0
        let xsp: Vec<Vec3> = x0p.iter().map(|v| v + Vec3::new(0.01, 0.0, 0.0)).collect();
        let xsn: Vec<Vec3> = x0n.iter().map(|v| v + Vec3::new(0.01, 0.0, 0.0)).collect();

        let eval = |x1p: &[Vec3], x1n: &[Vec3], mp: &[f64], mn: &[f64], phi: &[f64]| -> f64 {
            let m_tot: f64 = mp.iter().sum::<f64>() + mn.iter().sum::<f64>();
            let cg = |xp: &[Vec3], xn: &[Vec3]| -> Vec3 {
                (xp.iter()
                    .zip(mp)
                    .map(|(x, &w)| w * x)
                    .sum::<Vec3>()
                    + xn.iter().zip(mn).map(|(x, &w)| w * x).sum::<Vec3>())
                    / m_tot
            };
            let inputs = ObjectiveInputs {
                cg0: cg(&x0p, &x0n),
                cg_start: cg(&xsp, &xsn),
                cg_end: cg(x1p, x1n),
                x0_particles: &x0p,
                x0_nodes: &x0n,
                x_start_particles: &xsp,
                x_start_nodes: &xsn,
                x_end_particles: x1p,
                x_end_nodes: x1n,
                particle_mass: mp,
                node_mass: mn,
                pinned: &pinned,
            };
            evaluate(&inputs, phi, &gamma, &w, &p, &mult).l_total
        };

        let m_tot: f64 = mp.iter().sum::<f64>() + mn.iter().sum::<f64>();
        let cg = |xp: &[Vec3], xn: &[Vec3]| -> Vec3 {
            (xp.iter().zip(&mp).map(|(x, &w)| w * x).sum::<Vec3>()
                + xn.iter().zip(&mn).map(|(x, &w)| w * x).sum::<Vec3>())
                / m_tot
        };
        let inputs = ObjectiveInputs {
            cg0: cg(&x0p, &x0n),
            cg_start: cg(&xsp, &xsn),
            cg_end: cg(&x1p, &x1n),
            x0_particles: &x0p,
            x0_nodes: &x0n,
            x_start_particles: &xsp,
            x_start_nodes: &xsn,
            x_end_particles: &x1p,
            x_end_nodes: &x1n,
            particle_mass: &mp,
            node_mass: &mn,
            pinned: &pinned,
        };
        let adj = evaluate_with_adjoint(&inputs, &phi_hat, &gamma, &w, &p, &mult);

        let h = 1e-7;
        // end positions
        for i in 0..x1p.len() {
            for a in 0..3 {
                let mut xp = x1p.clone();
                xp[i][a] += h;
                let mut xm = x1p.clone();
                xm[i][a] -= h;
                let fd = (eval(&xp, &x1n, &mp, &mn, &phi_hat)
                    - eval(&xm, &x1n, &mp, &mn, &phi_hat))
                    / (2.0 * h);
                assert!(
                    (adj.x_end_particles[i][a] - fd).abs() < 1e-6 * fd.abs().max(1.0),
                    "particle {i} axis {a}: {} vs {fd}",
                    adj.x_end_particles[i][a]
                );
            }
        }
        for i in 0..x1n.len() {
            for a in 0..3 {
                let mut xp = x1n.clone();
                xp[i][a] += h;
                let mut xm = x1n.clone();
                xm[i][a] -= h;
                let fd = (eval(&x1p, &xp, &mp, &mn, &phi_hat)
                    - eval(&x1p, &xm, &mp, &mn, &phi_hat))
                    / (2.0 * h);
                assert!(
                    (adj.x_end_nodes[i][a] - fd).abs() < 1e-6 * fd.abs().max(1.0),
                    "node {i} axis {a}"
                );
            }
        }
        // phi_hat (direct constraint path)
        for i in 0..phi_hat.len() {
            let mut pp = phi_hat.clone();
            pp[i] += h;
            let mut pm = phi_hat.clone();
            pm[i] -= h;
            let fd =
                (eval(&x1p, &x1n, &mp, &mn, &pp) - eval(&x1p, &x1n, &mp, &mn, &pm)) / (2.0 * h);
            assert!((adj.phi_hat[i] - fd).abs() < 1e-6 * fd.abs().max(1.0));
        }
        // masses (cg weights in L_x, dcgx and the deviation means)
        for i in 0..mp.len() {
            let mut a = mp.clone();
            a[i] += h;
            let mut b = mp.clone();
            b[i] -= h;
            let fd =
                (eval(&x1p, &x1n, &a, &mn, &phi_hat) - eval(&x1p, &x1n, &b, &mn, &phi_hat))
                    / (2.0 * h);
            assert!(
                (adj.mass_particles[i] - fd).abs() < 1e-5 * fd.abs().max(1.0),
                "mass particle {i}: {} vs {fd}",
                adj.mass_particles[i]
            );
        }
        for i in 0..mn.len() {
            let mut a = mn.clone();
            a[i] += h;
            let mut b = mn.clone();
            b[i] -= h;
            let fd =
                (eval(&x1p, &x1n, &mp, &a, &phi_hat) - eval(&x1p, &x1n, &mp, &b, &phi_hat))
                    / (2.0 * h);
            assert!(
                (adj.mass_nodes[i] - fd).abs() < 1e-5 * fd.abs().max(1.0),
                "mass node {i}: {} vs {fd}",
                adj.mass_nodes[i]
            );
        }
    }
}
