//! Reverse-mode gradients of the augmented-Lagrangian objective with respect
//! to all design variables, via segment-checkpointed replay and hand-written
//! kernel adjoints, plus a central finite-difference oracle.

mod adjoint;

pub use adjoint::{AdjointBuffers, AdjointState, ParamAdjoints};

use crate::actuation::voltage_adjoint_into;
use crate::design::{
    bone_interpolation, bone_interpolation_deriv, project_density_deriv, DesignVariables,
    BONE_FLOOR_FRAC,
};
use crate::error::SimError;
use crate::mpm::GridField;
use crate::objective::{evaluate_with_adjoint, Multipliers, ObjectiveReport};
use crate::problem::{DesignCache, Problem};
use crate::stepper::{step_core, RunResult, SimContext, StepRecord, StepScratch};

#[derive(Debug, Clone)]
pub struct GradientVector {
    pub d_phi: Vec<f64>,
    pub d_gamma: Vec<f64>,
    pub d_w: Vec<f64>,
    /// Peak simultaneously-live full states during the backward pass.
    pub peak_live_states: usize,
}

impl GradientVector {
    pub fn is_finite(&self) -> bool {
        self.d_phi
            .iter()
            .chain(&self.d_gamma)
            .chain(&self.d_w)
            .all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.d_phi
            .iter()
            .chain(&self.d_gamma)
            .chain(&self.d_w)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Mirror-pair averaging; the optimizer applies this before Adam.
    pub fn symmetrize(&mut self, sym: &crate::scene::SymmetryMap) {
        sym.symmetrize_particles(&mut self.d_phi);
        sym.symmetrize_bars(&mut self.d_gamma);
    }
}

/// Reverse sweep over a finished forward run with checkpoints. Returns the
/// raw (unsymmetrized) gradient.
pub fn backward_pass(
    problem: &Problem,
    vars: &DesignVariables,
    run: &RunResult,
    ctx: &SimContext,
    cache: &DesignCache,
    mult: &Multipliers,
) -> Result<(ObjectiveReport, GradientVector), SimError> {
    let store = run
        .checkpoints
        .as_ref()
        .ok_or(SimError::MissingCheckpoint { segment: 0 })?;
    let np = problem.n_particles();
    let nn = problem.base_net.n_nodes();
    let n_bars = problem.base_net.bars.len();

    let inputs = problem.objective_inputs(run, ctx);
    let oadj = evaluate_with_adjoint(
        &inputs,
        &cache.phi_hat,
        &vars.gamma,
        &vars.w,
        &problem.obj_params,
        mult,
    );
    let report = oadj.report;

    let mut adj = AdjointState::zeros(np, nn);
    adj.px.copy_from_slice(&oadj.x_end_particles);
    adj.nx.copy_from_slice(&oadj.x_end_nodes);

    let mut params = ParamAdjoints::zeros(np, nn, n_bars, ctx.voltages.len());
    let grid_nodes = ctx.grid_cells[0] * ctx.grid_cells[1] * ctx.grid_cells[2];
    let mut buf = AdjointBuffers::new(grid_nodes, np, nn);
    let mut grid = GridField::new(ctx.grid_cells, ctx.grid_dx);
    let mut scratch = StepScratch::new(nn, ctx.units.len());
    let mut record = StepRecord::default();
    let i_start = ctx.settle_steps;
    let mut peak_live = 0usize;

    for segment in (0..store.segment_count()).rev() {
        let states = store.replay_segment(segment, ctx, &mut grid, &mut scratch, ctx.n_steps)?;
        peak_live = peak_live.max(store.live_states() + states.len() + 1);
        let seg_start = segment * store.interval;
        for local in (0..states.len()).rev() {
            let k = seg_start + local;
            let mut working = states[local].clone();
            step_core(&mut working, &mut grid, &mut scratch, ctx, Some(&mut record))?;
            adjoint::adjoint_step(
                &states[local],
                &record,
                &grid,
                ctx,
                &mut adj,
                &mut params,
                &mut buf,
                k,
            );
            if k == i_start {
                for (i, seed) in oadj.x_start_particles.iter().enumerate() {
                    adj.px[i] += seed;
                }
                for (i, seed) in oadj.x_start_nodes.iter().enumerate() {
                    adj.nx[i] += seed;
                }
            }
            if k % 128 == 0 && !adj.is_finite() {
                return Err(SimError::NonFiniteAdjoint { step: k });
            }
        }
    }
    if !adj.is_finite() {
        return Err(SimError::NonFiniteAdjoint { step: 0 });
    }

    // fold the objective's direct mass dependence into the dynamic totals
    for i in 0..np {
        params.p_mass[i] += oadj.mass_particles[i];
    }
    for i in 0..nn {
        params.n_mass[i] += oadj.mass_nodes[i];
    }

    let grad = assemble_design_gradient(problem, vars, cache, &params, &oadj, ctx, peak_live);
    if !grad.is_finite() {
        return Err(SimError::NonFiniteGradient {
            group: "design".to_string(),
        });
    }
    Ok((report, grad))
}

fn assemble_design_gradient(
    problem: &Problem,
    vars: &DesignVariables,
    cache: &DesignCache,
    params: &ParamAdjoints,
    oadj: &crate::objective::ObjectiveAdjoint,
    ctx: &SimContext,
    peak_live_states: usize,
) -> GradientVector {
    let mat = &problem.material;
    let beta = problem.cfg.optimizer.projection_beta;
    let v0 = problem.base_particles.volume0;

    // phi: mass/mu/lambda and the direct constraint term, chained through the
    // Heaviside projection and the transposed filter.
    let np = problem.n_particles();
    let mut phi_bar_adj = vec![0.0; np];
    for i in 0..np {
        let ph = cache.phi_hat[i];
        let phi_hat_adj = params.p_mass[i] * mat.rho_deriv(ph) * v0
            + params.p_mu[i] * mat.mu_deriv(ph)
            + params.p_lambda[i] * mat.lambda_deriv(ph)
            + oadj.phi_hat[i];
        phi_bar_adj[i] = phi_hat_adj * project_density_deriv(cache.phi_bar[i], beta);
    }
    let d_phi = problem.filter.apply_transpose(&phi_bar_adj);

    // gamma: stiffness interpolation plus nodal mass assembly.
    let eps_b = problem.cfg.optimizer.bone_eps;
    let p_exp = problem.cfg.optimizer.bone_exponent;
    let mut d_gamma = vec![0.0; problem.n_designable()];
    for (g, &bar_idx) in problem.gs.designable_bars.iter().enumerate() {
        let gamma = vars.gamma[g];
        let f = bone_interpolation(gamma, eps_b, p_exp);
        let fp = bone_interpolation_deriv(gamma, eps_b, p_exp);
        let gsb = &problem.gs.bars[bar_idx];
        let kappa_max = gsb.kappa_max;
        let kappa_min = BONE_FLOOR_FRAC * kappa_max;
        let mut acc = params.bar_kappa[bar_idx] * (kappa_max - kappa_min) * fp;
        if f > BONE_FLOOR_FRAC {
            let dm = 0.5 * gsb.rho_area * gsb.rest_length * fp;
            if !cache.node_floored[gsb.a] {
                acc += params.n_mass[gsb.a] * dm;
            }
            if !cache.node_floored[gsb.b] {
                acc += params.n_mass[gsb.b] * dm;
            }
        }
        d_gamma[g] = acc + oadj.gamma[g];
    }

    // w: voltage adjoints chained through the Gaussian-pulse synthesis.
    let n_act = ctx.n_act;
    let mut d_w = oadj.w.clone();
    if n_act > 0 {
        let vp = ctx.voltage_params(&problem.cfg, problem.n_pulses);
        for s in 0..ctx.n_steps {
            if let Some(t_cyc) = ctx.cycle_time_of_step(&problem.cfg, s) {
                for a in 0..n_act {
                    let v_adj = params.v_in[s * n_act + a];
                    if v_adj != 0.0 {
                        let row = &vars.w[a * problem.n_pulses..(a + 1) * problem.n_pulses];
                        let out =
                            &mut d_w[a * problem.n_pulses..(a + 1) * problem.n_pulses];
                        voltage_adjoint_into(row, t_cyc, &vp, v_adj, out);
                    }
                }
            }
        }
    }

    GradientVector {
        d_phi,
        d_gamma,
        d_w,
        peak_live_states,
    }
}

/// Forward with checkpoints followed by the backward sweep.
pub fn loss_and_grad(
    problem: &Problem,
    vars: &DesignVariables,
    mult: &Multipliers,
) -> Result<(ObjectiveReport, GradientVector), SimError> {
    let (run, ctx, cache) = problem.forward(vars, true, usize::MAX)?;
    backward_pass(problem, vars, &run, &ctx, &cache, mult)
}

// ---------------------------------------------------------------------------
// Finite-difference oracle
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarGroup {
    Phi,
    Gamma,
    W,
}

impl std::fmt::Display for VarGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VarGroup::Phi => write!(f, "phi"),
            VarGroup::Gamma => write!(f, "gamma"),
            VarGroup::W => write!(f, "w"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FdRecord {
    pub group: VarGroup,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

/// Central finite differences of the loss against the adjoint gradient for a
/// sampled subset of variables. Relative errors use a scale-aware floor so
/// that genuinely negligible gradients compare as equal.
pub fn finite_difference_check(
    problem: &Problem,
    vars: &DesignVariables,
    mult: &Multipliers,
    samples: &[(VarGroup, usize)],
    h: f64,
) -> Result<Vec<FdRecord>, SimError> {
    let (_, grad) = loss_and_grad(problem, vars, mult)?;
    let scale = grad.max_abs().max(1e-30);
    let mut out = Vec::with_capacity(samples.len());
    for &(group, index) in samples {
        let analytic = match group {
            VarGroup::Phi => grad.d_phi[index],
            VarGroup::Gamma => grad.d_gamma[index],
            VarGroup::W => grad.d_w[index],
        };
        let mut plus = vars.clone();
        let mut minus = vars.clone();
        {
            let (vp, vm) = match group {
                VarGroup::Phi => (&mut plus.phi[index], &mut minus.phi[index]),
                VarGroup::Gamma => (&mut plus.gamma[index], &mut minus.gamma[index]),
                VarGroup::W => (&mut plus.w[index], &mut minus.w[index]),
            };
            *vp += h;
            *vm -= h;
        }
        let lp = problem.loss(&plus, mult)?.l_total;
        let lm = problem.loss(&minus, mult)?.l_total;
        let numeric = (lp - lm) / (2.0 * h);
        let denom = analytic.abs().max(numeric.abs()).max(1e-6 * scale);
        let rel_err = (analytic - numeric).abs() / denom;
        out.push(FdRecord {
            group,
            index,
            analytic,
            numeric,
            rel_err,
        });
    }
    Ok(out)
}

/// Summary statistics of an FD comparison.
pub fn fd_summary(records: &[FdRecord]) -> (f64, f64, f64) {
    let mut errs: Vec<f64> = records.iter().map(|r| r.rel_err).collect();
    errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if errs.is_empty() {
        0.0
    } else {
        errs[errs.len() / 2]
    };
    let max = errs.last().copied().unwrap_or(0.0);
    let frac_within = if errs.is_empty() {
        1.0
    } else {
        errs.iter().filter(|&&e| e < 1e-2).count() as f64 / errs.len() as f64
    };
    (median, max, frac_within)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{Mat3, Vec3};
    use crate::scene::{ActuatorUnit, BarRole, SceneConfig};
    use crate::stepper::{SimContext, SimState};
    use crate::xpbd::{Bar, BarNetwork};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Linear loss over the post-step state; its adjoint seed is the weights.
    struct Seeds {
        px: Vec<Vec3>,
        pv: Vec<Vec3>,
        pc: Vec<Mat3>,
        pf: Vec<Mat3>,
        nx: Vec<Vec3>,
        nv: Vec<Vec3>,
    }

    impl Seeds {
        fn random(np: usize, nn: usize, rng: &mut StdRng) -> Self {
            let v3 = |r: &mut StdRng| {
                Vec3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
            };
            let m3 = |r: &mut StdRng| {
                Mat3::from_fn(|_, _| r.gen_range(-1.0..1.0))
            };
            Seeds {
                px: (0..np).map(|_| v3(rng)).collect(),
                pv: (0..np).map(|_| v3(rng)).collect(),
                pc: (0..np).map(|_| m3(rng)).collect(),
                pf: (0..np).map(|_| m3(rng)).collect(),
                nx: (0..nn).map(|_| v3(rng)).collect(),
                nv: (0..nn).map(|_| v3(rng)).collect(),
            }
        }

        fn loss(&self, s: &SimState) -> f64 {
            let mut l = 0.0;
            for p in 0..s.particles.len() {
                l += self.px[p].dot(&s.particles.x[p]);
                l += self.pv[p].dot(&s.particles.v[p]);
                l += self.pc[p].dot(&s.particles.c[p]);
                l += self.pf[p].dot(&s.particles.f[p]);
            }
            for i in 0..s.net.n_nodes() {
                l += self.nx[i].dot(&s.net.x[i]);
                l += self.nv[i].dot(&s.net.v[i]);
            }
            l
        }
    }

    fn test_unit() -> ActuatorUnit {
        ActuatorUnit {
            upper_node: 0,
            lower_node: 1,
            bridge_node: 0,
            axial_bars: [0, 0],
            lateral_bars: [0, 0],
            bridge_bars: [0, 0],
            l0: 0.060,
            dl: 0.015,
            l_core: 0.030,
            f_max: 4.0,
            kappa_free: 0.3,
            kappa_act: 3.0e6,
        }
    }

    fn mk_bar(a: usize, b: usize, rest: f64, kappa: f64) -> Bar {
        Bar {
            a,
            b,
            l_rest: rest,
            kappa,
            kappa_min: 1e-9 * kappa,
            role: BarRole::Bone,
            gamma: 0.5,
            lambda: 0.0,
            young: 3e9,
            second_moment: 4.333e-13,
            k_factor: 1.0,
            buckling_exempt: false,
            designable: true,
        }
    }

    /// Contact, buckling, an engaged-or-free slider and an out-of-grid node
    /// in one synthetic state.
    fn build_case(slider_engaged: bool) -> (SimState, SimContext) {
        let mut rng = StdRng::seed_from_u64(42);
        let h = 0.005;
        let mut particles = crate::stepper::tests::empty_particles();
        particles.volume0 = h * h * h;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    particles.x.push(Vec3::new(
                        0.14 + i as f64 * h + rng.gen_range(-5e-4..5e-4),
                        0.14 + j as f64 * h + rng.gen_range(-5e-4..5e-4),
                        // straddle the floor so some grid nodes clamp
                        0.052 + k as f64 * h + rng.gen_range(-5e-4..5e-4),
                    ));
                    particles.v.push(Vec3::new(
                        rng.gen_range(-0.2..0.2),
                        rng.gen_range(-0.2..0.2),
                        rng.gen_range(-0.4..-0.1),
                    ));
                    let mut c = Mat3::from_fn(|_, _| rng.gen_range(-2.0..2.0));
                    c *= 0.5;
                    particles.c.push(c);
                    particles.f.push(
                        Mat3::identity() + Mat3::from_fn(|_, _| rng.gen_range(-0.05..0.05)),
                    );
                    particles.phi.push(0.0);
                    particles.phi_hat.push(1.0);
                    particles.mass.push(1.07e3 * h * h * h * rng.gen_range(0.5..1.5));
                    particles.mu.push(5.1e4);
                    particles.lambda.push(2.06e5);
                }
            }
        }

        let unit = test_unit();
        let slider_len = if slider_engaged { 0.044 } else { 0.055 };
        // node 0 = core (upper), node 1 = coil (lower); nodes 2,3 frame with a
        // bar deep in the buckling cap; node 4 normal; node 5 out of grid
        let x = vec![
            Vec3::new(0.150, 0.150, 0.060 + slider_len),
            Vec3::new(0.150, 0.150, 0.060),
            Vec3::new(0.120, 0.145, 0.100),
            Vec3::new(0.120 + 0.046, 0.145, 0.100),
            Vec3::new(0.160, 0.155, 0.110),
            Vec3::new(0.9, 0.9, 0.9),
        ];
        let v = (0..6)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-0.1..0.1),
                    rng.gen_range(-0.1..0.1),
                    rng.gen_range(-0.1..0.1),
                )
            })
            .collect();
        let mass = vec![0.016, 0.075, 0.002, 0.003, 0.004, 0.001];
        let inv_mass = mass.iter().map(|m: &f64| 1.0 / m).collect();
        let mut slider = mk_bar(0, 1, unit.l0, unit.kappa_free);
        slider.role = BarRole::ActuatorAxial;
        slider.buckling_exempt = true;
        slider.designable = false;
        let bars = vec![
            slider,
            // rest 0.05, current 0.046 -> deep compression, cap active
            mk_bar(2, 3, 0.05, 1.56e4),
            // connects frame to the coil node, near rest
            mk_bar(3, 4, (x[3] - x[4]).norm() * 1.01, 8.0e3),
        ];
        let net = BarNetwork {
            x,
            v,
            mass,
            inv_mass,
            pinned: vec![false; 6],
            bars,
        };

        let mut ctx = crate::stepper::tests::bare_ctx(32, 0.01, 2e-4, 4);
        ctx.floor_height = Some(0.06);
        ctx.friction_mu = 0.4;
        ctx.eta_visc = 5.0;
        ctx.units = vec![unit];
        ctx.slider_of_bar = vec![Some(0), None, None];
        ctx.n_act = 1;
        ctx.voltages = vec![0.7; 5];
        (
            SimState {
                particles,
                net,
                step_index: 0,
            },
            ctx,
        )
    }

    fn run_loss(state: &SimState, ctx: &SimContext, seeds: &Seeds) -> f64 {
        let mut s = state.clone();
        let mut grid = crate::mpm::GridField::new(ctx.grid_cells, ctx.grid_dx);
        let mut scratch = StepScratch::new(s.net.n_nodes(), ctx.units.len());
        step_core(&mut s, &mut grid, &mut scratch, ctx, None).unwrap();
        seeds.loss(&s)
    }

    fn adjoint_of_case(
        state: &SimState,
        ctx: &SimContext,
        seeds: &Seeds,
    ) -> (AdjointState, ParamAdjoints) {
        let np = state.particles.len();
        let nn = state.net.n_nodes();
        let mut s = state.clone();
        let mut grid = crate::mpm::GridField::new(ctx.grid_cells, ctx.grid_dx);
        let mut scratch = StepScratch::new(nn, ctx.units.len());
        let mut record = StepRecord::default();
        step_core(&mut s, &mut grid, &mut scratch, ctx, Some(&mut record)).unwrap();

        let mut adj = AdjointState::zeros(np, nn);
        adj.px.copy_from_slice(&seeds.px);
        adj.pv.copy_from_slice(&seeds.pv);
        adj.pc.copy_from_slice(&seeds.pc);
        adj.pf.copy_from_slice(&seeds.pf);
        adj.nx.copy_from_slice(&seeds.nx);
        adj.nv.copy_from_slice(&seeds.nv);
        let mut params = ParamAdjoints::zeros(np, nn, state.net.bars.len(), ctx.voltages.len());
        let grid_nodes = ctx.grid_cells[0] * ctx.grid_cells[1] * ctx.grid_cells[2];
        let mut buf = AdjointBuffers::new(grid_nodes, np, nn);
        adjoint::adjoint_step(state, &record, &grid, ctx, &mut adj, &mut params, &mut buf, 0);
        (adj, params)
    }

    fn check(analytic: f64, fd: f64, scale: f64, what: &str) {
        let err = (analytic - fd).abs();
        let tol = 1e-5 * analytic.abs().max(fd.abs()) + 1e-9 * scale;
        assert!(
            err <= tol,
            "{what}: adjoint {analytic:.9e} vs fd {fd:.9e} (err {err:.3e}, tol {tol:.3e})"
        );
    }

    /// Richardson-extrapolated central difference (4th order).
    fn fd_r(f: impl Fn(f64) -> f64, h: f64) -> f64 {
        let d1 = (f(h) - f(-h)) / (2.0 * h);
        let d2 = (f(h / 2.0) - f(-h / 2.0)) / h;
        (4.0 * d2 - d1) / 3.0
    }

    fn step_adjoint_matches_fd(engaged: bool) {
        let (state, ctx) = build_case(engaged);
        let mut rng = StdRng::seed_from_u64(7);
        let seeds = Seeds::random(state.particles.len(), state.net.n_nodes(), &mut rng);
        let (adj, params) = adjoint_of_case(&state, &ctx, &seeds);
        let scale = 1.0;

        // particle state entries (sampled)
        for &p in &[0usize, 7, 13, 26] {
            for axis in 0..3 {
                let fd = fd_r(
                    |d| {
                        let mut s = state.clone();
                        s.particles.x[p][axis] += d;
                        run_loss(&s, &ctx, &seeds)
                    },
                    1e-6,
                );
                check(adj.px[p][axis], fd, scale, &format!("particle {p} x[{axis}]"));
                let fd = fd_r(
                    |d| {
                        let mut s = state.clone();
                        s.particles.v[p][axis] += d;
                        run_loss(&s, &ctx, &seeds)
                    },
                    1e-6,
                );
                check(adj.pv[p][axis], fd, scale, &format!("particle {p} v[{axis}]"));
            }
            for r in 0..3 {
                for c in 0..3 {
                    let fd = fd_r(
                        |d| {
                            let mut s = state.clone();
                            s.particles.f[p][(r, c)] += d;
                            run_loss(&s, &ctx, &seeds)
                        },
                        1e-4,
                    );
                    check(adj.pf[p][(r, c)], fd, scale, &format!("particle {p} F[{r}{c}]"));
                    let fd = fd_r(
                        |d| {
                            let mut s = state.clone();
                            s.particles.c[p][(r, c)] += d;
                            run_loss(&s, &ctx, &seeds)
                        },
                        1e-4,
                    );
                    check(adj.pc[p][(r, c)], fd, scale, &format!("particle {p} C[{r}{c}]"));
                }
            }
            let fd = fd_r(
                |d| {
                    let mut s = state.clone();
                    s.particles.mass[p] += d;
                    run_loss(&s, &ctx, &seeds)
                },
                1e-5 * state.particles.mass[p],
            );
            check(params.p_mass[p], fd, scale, &format!("particle {p} mass"));
            let fd = fd_r(
                |d| {
                    let mut s = state.clone();
                    s.particles.mu[p] += d;
                    run_loss(&s, &ctx, &seeds)
                },
                1.0,
            );
            check(params.p_mu[p], fd, scale, &format!("particle {p} mu"));
            let fd = fd_r(
                |d| {
                    let mut s = state.clone();
                    s.particles.lambda[p] += d;
                    run_loss(&s, &ctx, &seeds)
                },
                1.0,
            );
            check(params.p_lambda[p], fd, scale, &format!("particle {p} lambda"));
        }

        // node state and masses (including the out-of-grid node 5)
        for i in 0..state.net.n_nodes() {
            for axis in 0..3 {
                let fd = fd_r(
                    |d| {
                        let mut s = state.clone();
                        s.net.x[i][axis] += d;
                        run_loss(&s, &ctx, &seeds)
                    },
                    1e-7,
                );
                check(adj.nx[i][axis], fd, scale, &format!("node {i} x[{axis}]"));
                let fd = fd_r(
                    |d| {
                        let mut s = state.clone();
                        s.net.v[i][axis] += d;
                        run_loss(&s, &ctx, &seeds)
                    },
                    1e-4,
                );
                check(adj.nv[i][axis], fd, scale, &format!("node {i} v[{axis}]"));
            }
            let fd = fd_r(
                |d| {
                    let mut s = state.clone();
                    s.net.mass[i] += d;
                    s.net.inv_mass[i] = 1.0 / s.net.mass[i];
                    run_loss(&s, &ctx, &seeds)
                },
                1e-5 * state.net.mass[i],
            );
            check(params.n_mass[i], fd, scale, &format!("node {i} mass"));
        }

        // design stiffness of the un-capped bar (bar 2)
        let fd = fd_r(
            |d| {
                let mut s = state.clone();
                s.net.bars[2].kappa += d;
                run_loss(&s, &ctx, &seeds)
            },
            1e-1,
        );
        check(params.bar_kappa[2], fd, scale, "bar 2 kappa");

        // voltage input of the actuator at this step
        let fd = fd_r(
            |d| {
                let mut c = ctx.clone();
                c.voltages[0] += d;
                run_loss(&state, &c, &seeds)
            },
            1e-3,
        );
        check(params.v_in[0], fd, scale, "v_in");
    }

    #[test]
    fn step_adjoint_matches_fd_free_slider() {
        step_adjoint_matches_fd(false);
    }

    #[test]
    fn step_adjoint_matches_fd_engaged_slider() {
        step_adjoint_matches_fd(true);
    }

    #[test]
    fn capped_bar_has_zero_kappa_gradient_but_length_chain() {
        let (state, ctx) = build_case(false);
        let mut rng = StdRng::seed_from_u64(9);
        let seeds = Seeds::random(state.particles.len(), state.net.n_nodes(), &mut rng);
        let (_, params) = adjoint_of_case(&state, &ctx, &seeds);
        // bar 1 is deep in the buckling cap: kappa_eff is independent of kappa
        assert_eq!(params.bar_kappa[1], 0.0);
        let h = 1.0;
        let mut sp = state.clone();
        sp.net.bars[1].kappa += h;
        let mut sm = state.clone();
        sm.net.bars[1].kappa -= h;
        let fd = (run_loss(&sp, &ctx, &seeds) - run_loss(&sm, &ctx, &seeds)) / (2.0 * h);
        assert!(fd.abs() < 1e-10, "capped bar kappa fd {fd}");
    }

    // ---- end-to-end gradient vs finite differences on a nano scene ----

    pub(crate) fn nano_scene_toml() -> String {
        r#"
seed = 3

[simulation]
dt_s = 2e-5
checkpoint_interval_steps = 250

[domain]
size_m = [0.4, 0.4, 0.4]
grid_cells = [32, 32, 32]
gravity_mps2 = 9.81
floor_height_m = 0.1125

[soft_body]
box_min_m = [0.15, 0.1875, 0.15]
box_max_m = [0.20, 0.2125, 0.1875]
young_modulus_pa = 1.44e5
poisson_ratio = 0.4
density_kgpm3 = 1070.0

[phases]
t_start_s = 0.01
t_end_s = 0.03
cycle_duration_s = 0.01
cycle_repeats = 2

[skeleton]
rows = 2
cols = 3
pitch_m = 0.02
origin_m = [0.15, 0.15]
young_modulus_pa = 3.0e9
cross_section_m = [5.2e-3, 1.0e-3]
density_kgpm3 = 1250.0

[bridge]
cross_section_m = [8.0e-3, 8.0e-3]

[[actuators]]
x_m = 0.175
z_lower_m = 0.152

[actuator_params]
rest_length_m = 0.02
stroke_m = 0.005
core_length_m = 0.01
f_max_n = 2.0
kappa_free_npm = 0.3
kappa_act_npm = 3.0e6
core_mass_kg = 0.016
coil_mass_kg = 0.075
mount_length_m = 0.005
pulse_dt_s = 0.002

[optimizer]
init_w = 0.3
"#
        .to_string()
    }

    #[test]
    fn end_to_end_gradient_matches_fd_on_nano_scene() {
        let cfg = SceneConfig::from_toml(&nano_scene_toml()).unwrap();
        let problem = Problem::from_config(cfg).unwrap();
        let vars = problem.initial_vars();
        let mut mult = Multipliers::new(1.0);
        mult.c_soft_active = true;

        let samples = vec![
            (VarGroup::Phi, 0),
            (VarGroup::Phi, problem.n_particles() / 2),
            (VarGroup::Gamma, 0),
            (VarGroup::Gamma, problem.n_designable() / 2),
            (VarGroup::W, 1),
            (VarGroup::W, 3),
        ];
        let records =
            finite_difference_check(&problem, &vars, &mult, &samples, 1e-4).unwrap();
        for r in &records {
            assert!(
                r.rel_err < 1e-2,
                "{} [{}]: analytic {:.6e} numeric {:.6e} rel {:.3e}",
                r.group,
                r.index,
                r.analytic,
                r.numeric,
                r.rel_err
            );
        }
        let (median, _, frac) = fd_summary(&records);
        assert!(frac >= 0.99);
        assert!(median < 1e-3, "median fd error {median}");
    }

    #[test]
    fn backward_is_deterministic() {
        let cfg = SceneConfig::from_toml(&nano_scene_toml()).unwrap();
        let problem = Problem::from_config(cfg).unwrap();
        let vars = problem.initial_vars();
        let mult = Multipliers::new(1.0);
        let (_, g1) = loss_and_grad(&problem, &vars, &mult).unwrap();
        let (_, g2) = loss_and_grad(&problem, &vars, &mult).unwrap();
        assert_eq!(g1.d_phi.len(), g2.d_phi.len());
        for (a, b) in g1.d_phi.iter().zip(&g2.d_phi) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in g1.d_gamma.iter().zip(&g2.d_gamma) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in g1.d_w.iter().zip(&g2.d_w) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
