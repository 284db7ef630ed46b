//! One coupled MPM-XPBD time step, the settle/actuation phase schedule, and
//! the checkpoint store for reverse-mode replay.
//!
//! Sub-phase order within a step:
//!   1. soft-body P2G;
//!   2. actuator state switch and contraction forces, XPBD prediction
//!      (gravity deferred to the grid), one constraint projection per bar,
//!      corrected nodal velocity v* = (x_proj - x_prev) / dt;
//!   3. node mass and momentum scattered to the same grid;
//!   4. grid update (normalize, gravity, floor contact, boundary band);
//!   5. soft-body G2P;
//!   6. node gather where the stencil carries grid mass, else v* plus the
//!      gravity increment the grid would have applied.
//!
//! Gravity reaches every body exactly once, through the grid for anything
//! that scatters, which keeps the single-node round trip at g*dt per step.

use crate::actuation::{
    axial_state_switch, solenoid_force, stroke_attenuation, synthesize_voltage, VoltageParams,
};
use crate::error::SimError;
use crate::math::{bspline_weights, digest_f64, stencil_base, Vec3};
use crate::mpm::{g2p, grid_update, p2g, GridField, ParticleState};
use crate::scene::{ActuatorUnit, GroundStructure, SceneConfig};
use crate::xpbd::{
    effective_stiffness_buckling, predict_positions, project_distance_constraint, BarNetwork,
    ProjectionOutcome,
};

/// Fraction of node mass the stencil must carry for two-way coupling.
pub const COUPLING_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct SimState {
    pub particles: ParticleState,
    pub net: BarNetwork,
    pub step_index: usize,
}

impl SimState {
    pub fn time(&self, dt: f64) -> f64 {
        self.step_index as f64 * dt
    }

    pub fn total_mass(&self) -> f64 {
        let pm: f64 = self.particles.mass.iter().sum();
        let nm: f64 = (0..self.net.n_nodes())
            .filter(|&i| !self.net.pinned[i])
            .map(|i| self.net.mass[i])
            .sum();
        pm + nm
    }

    /// Mass-weighted center of gravity over particles and nodes.
    pub fn center_of_gravity(&self) -> Vec3 {
        let mut m_sum = 0.0;
        let mut mx = Vec3::zeros();
        for i in 0..self.particles.len() {
            m_sum += self.particles.mass[i];
            mx += self.particles.mass[i] * self.particles.x[i];
        }
        for i in 0..self.net.n_nodes() {
            if !self.net.pinned[i] {
                m_sum += self.net.mass[i];
                mx += self.net.mass[i] * self.net.x[i];
            }
        }
        mx / m_sum
    }

    pub fn max_speed(&self) -> f64 {
        let pv = self
            .particles
            .v
            .iter()
            .map(|v| v.norm_squared())
            .fold(0.0, f64::max);
        let nv = self
            .net
            .v
            .iter()
            .map(|v| v.norm_squared())
            .fold(0.0, f64::max);
        pv.max(nv).sqrt()
    }

    /// Bit-exact digest of the dynamic state, for replay verification.
    pub fn digest(&self) -> u64 {
        let p = &self.particles;
        let scalars = p
            .x
            .iter()
            .chain(p.v.iter())
            .flat_map(|v| [v.x, v.y, v.z])
            .chain(p.c.iter().chain(p.f.iter()).flat_map(|m| {
                (0..9).map(|i| m[(i / 3, i % 3)]).collect::<Vec<_>>()
            }))
            .chain(
                self.net
                    .x
                    .iter()
                    .chain(self.net.v.iter())
                    .flat_map(|v| [v.x, v.y, v.z]),
            )
            .chain([self.step_index as f64]);
        digest_f64(scalars)
    }
}

/// Immutable per-run context: scene constants, actuator wiring and the
/// precomputed voltage table.
#[derive(Debug, Clone)]
pub struct SimContext {
    pub dt: f64,
    pub grid_cells: [usize; 3],
    pub grid_dx: f64,
    pub gravity: Vec3,
    pub floor_height: Option<f64>,
    pub friction_mu: f64,
    pub boundary_margin: usize,
    pub blowup_cap: f64,
    pub eta_visc: f64,
    pub units: Vec<ActuatorUnit>,
    /// For each bar: the actuator unit whose slider it is, if any.
    pub slider_of_bar: Vec<Option<usize>>,
    /// Step-major voltage table `v[(step * n_act) + a]`, length (n_steps+1)*n_act.
    pub voltages: Vec<f64>,
    pub n_act: usize,
    pub n_steps: usize,
    pub settle_steps: usize,
    pub checkpoint_interval: usize,
}

impl SimContext {
    pub fn new(cfg: &SceneConfig, gs: &GroundStructure, n_bars: usize) -> Self {
        let mut slider_of_bar = vec![None; n_bars];
        for (u, unit) in gs.actuators.iter().enumerate() {
            slider_of_bar[unit.axial_bars[0]] = Some(u);
        }
        let n_steps = cfg.total_steps();
        SimContext {
            dt: cfg.dt(),
            grid_cells: cfg.domain.grid_cells,
            grid_dx: cfg.dx(),
            gravity: cfg.gravity_vector(),
            floor_height: cfg.domain.floor_height_m,
            friction_mu: cfg.domain.friction_mu,
            boundary_margin: cfg.simulation.boundary_margin_cells,
            blowup_cap: cfg.simulation.blowup_cap_mps,
            eta_visc: cfg.soft_body.viscosity_pas,
            units: gs.actuators.clone(),
            slider_of_bar,
            voltages: vec![0.0; (n_steps + 1) * gs.actuators.len().max(1)],
            n_act: gs.actuators.len(),
            n_steps,
            settle_steps: cfg.step_of_time(cfg.phases.t_start_s),
            checkpoint_interval: cfg.simulation.checkpoint_interval_steps,
        }
    }

    pub fn voltage(&self, step: usize, actuator: usize) -> f64 {
        if self.n_act == 0 {
            0.0
        } else {
            self.voltages[step * self.n_act + actuator]
        }
    }

    /// Fill the voltage table from actuation design variables: zero through
    /// the settle phase, Gaussian-pulse synthesis cycle-locally afterwards.
    pub fn set_voltages_from_design(
        &mut self,
        cfg: &SceneConfig,
        w: &[f64],
        n_pulses: usize,
    ) {
        let vp = self.voltage_params(cfg, n_pulses);
        let cycle = cfg.phases.cycle_duration_s;
        for s in 0..=self.n_steps {
            let t = s as f64 * self.dt;
            for a in 0..self.n_act {
                let idx = s * self.n_act + a;
                if t < cfg.phases.t_start_s || t >= cfg.phases.t_end_s {
                    self.voltages[idx] = 0.0;
                } else {
                    let t_cyc = (t - cfg.phases.t_start_s) % cycle;
                    let row = &w[a * n_pulses..(a + 1) * n_pulses];
                    self.voltages[idx] = synthesize_voltage(row, t_cyc, &vp);
                }
            }
        }
    }

    pub fn voltage_params(&self, cfg: &SceneConfig, n_pulses: usize) -> VoltageParams {
        let ap = &cfg.actuator_params;
        VoltageParams {
            pulse_dt: ap.pulse_dt_s,
            sigma: ap.pulse_sigma_s,
            amp: ap.pulse_amp,
            ceiling: ap.voltage_ceiling,
            clip_halfwidth: ap.voltage_clip_halfwidth,
            n_pulses,
        }
    }

    /// Cycle-local time of a step, if it falls inside the actuation phase.
    pub fn cycle_time_of_step(&self, cfg: &SceneConfig, step: usize) -> Option<f64> {
        let t = step as f64 * self.dt;
        if t < cfg.phases.t_start_s || t >= cfg.phases.t_end_s {
            None
        } else {
            Some((t - cfg.phases.t_start_s) % cfg.phases.cycle_duration_s)
        }
    }
}

/// Reusable per-step buffers.
#[derive(Debug, Clone, Default)]
pub struct StepScratch {
    pub f_ext: Vec<Vec3>,
    pub x_pred: Vec<Vec3>,
    pub v_pred: Vec<Vec3>,
    pub v_star: Vec<Vec3>,
    pub scattered: Vec<bool>,
    pub gathered: Vec<bool>,
    pub slider_state: Vec<(f64, f64, bool)>,
}

impl StepScratch {
    pub fn new(n_nodes: usize, n_units: usize) -> Self {
        StepScratch {
            f_ext: vec![Vec3::zeros(); n_nodes],
            x_pred: vec![Vec3::zeros(); n_nodes],
            v_pred: vec![Vec3::zeros(); n_nodes],
            v_star: vec![Vec3::zeros(); n_nodes],
            scattered: vec![false; n_nodes],
            gathered: vec![false; n_nodes],
            slider_state: vec![(0.0, 0.0, false); n_units],
        }
    }
}

/// Stiffness branch taken by a bar during projection, for the backward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StiffnessBranch {
    /// kappa_eff equals the design stiffness (no cap active).
    Design,
    /// Buckling cap interior: kappa_eff = P_cr * L / (L - len).
    BucklingCap,
    /// Cap clamped at kappa_min (no local dependence on anything).
    BucklingFloor,
    /// Slider bar using the switched (kappa, L_ref) pair.
    Slider,
}

#[derive(Debug, Clone)]
pub struct BarRecord {
    pub xa: Vec3,
    pub xb: Vec3,
    pub kappa_eff: f64,
    pub l_ref: f64,
    pub branch: StiffnessBranch,
    pub delta_lambda: f64,
    pub skipped: bool,
}

#[derive(Debug, Clone)]
pub struct UnitRecord {
    pub len: f64,
    pub dir: Vec3,
    pub eta: f64,
    pub v_in: f64,
    pub force: f64,
}

/// Forward intermediates of one step needed by its adjoint. The grid object
/// itself retains the post-scatter mass/momentum and post-update velocity.
#[derive(Debug, Clone, Default)]
pub struct StepRecord {
    pub units: Vec<UnitRecord>,
    pub f_ext: Vec<Vec3>,
    pub x_pred: Vec<Vec3>,
    pub v_pred: Vec<Vec3>,
    pub bars: Vec<BarRecord>,
    pub x_proj: Vec<Vec3>,
    pub v_star: Vec<Vec3>,
    pub scattered: Vec<bool>,
    pub gathered: Vec<bool>,
}

/// Advance the coupled state by one step. With `record` set, forward
/// intermediates are captured for the adjoint; the math is identical.
pub fn step_core(
    state: &mut SimState,
    grid: &mut GridField,
    scratch: &mut StepScratch,
    ctx: &SimContext,
    mut record: Option<&mut StepRecord>,
) -> Result<(), SimError> {
    let dt = ctx.dt;
    let step = state.step_index;
    let n_nodes = state.net.n_nodes();

    // (1) soft body to grid
    grid.clear();
    p2g(&state.particles, grid, dt, ctx.eta_visc, step)?;

    // (2) actuators: state switch and contraction forces
    for f in scratch.f_ext.iter_mut() {
        *f = Vec3::zeros();
    }
    if let Some(rec) = record.as_deref_mut() {
        rec.units.clear();
    }
    for (u_idx, unit) in ctx.units.iter().enumerate() {
        let d = state.net.x[unit.upper_node] - state.net.x[unit.lower_node];
        let len = d.norm();
        let (kappa, l_ref, engaged) = axial_state_switch(unit, len);
        scratch.slider_state[u_idx] = (kappa, l_ref, engaged);
        let v_in = ctx.voltage(step, u_idx);
        let (dir, force) = if len > 0.0 {
            (d / len, solenoid_force(v_in, len, unit))
        } else {
            (Vec3::zeros(), 0.0)
        };
        scratch.f_ext[unit.upper_node] -= force * dir;
        scratch.f_ext[unit.lower_node] += force * dir;
        if let Some(rec) = record.as_deref_mut() {
            rec.units.push(UnitRecord {
                len,
                dir,
                eta: stroke_attenuation(len, unit),
                v_in,
                force,
            });
        }
    }

    // XPBD prediction; nodal gravity is applied on the grid instead so that
    // coupled and uncoupled nodes see it exactly once.
    predict_positions(
        &state.net,
        &scratch.f_ext,
        &Vec3::zeros(),
        dt,
        &mut scratch.x_pred,
        &mut scratch.v_pred,
    );
    if let Some(rec) = record.as_deref_mut() {
        rec.f_ext.clone_from(&scratch.f_ext);
        rec.x_pred.clone_from(&scratch.x_pred);
        rec.v_pred.clone_from(&scratch.v_pred);
        rec.bars.clear();
    }

    // single Gauss-Seidel projection pass in fixed bar order
    for b in 0..state.net.bars.len() {
        let (a_idx, b_idx) = (state.net.bars[b].a, state.net.bars[b].b);
        let (kappa_eff, l_ref, branch) = effective_bar_stiffness(state, scratch, ctx, b);
        let (xa0, xb0) = (scratch.x_pred[a_idx], scratch.x_pred[b_idx]);
        state.net.bars[b].lambda = 0.0;
        let (inv_ma, inv_mb) = (state.net.inv_mass[a_idx], state.net.inv_mass[b_idx]);
        let mut lambda = 0.0;
        let (mut xa, mut xb) = (xa0, xb0);
        let outcome = project_distance_constraint(
            &mut xa, &mut xb, inv_ma, inv_mb, l_ref, kappa_eff, &mut lambda, dt,
        );
        scratch.x_pred[a_idx] = xa;
        scratch.x_pred[b_idx] = xb;
        state.net.bars[b].lambda = lambda;
        if let Some(rec) = record.as_deref_mut() {
            rec.bars.push(BarRecord {
                xa: xa0,
                xb: xb0,
                kappa_eff,
                l_ref,
                branch,
                delta_lambda: lambda,
                skipped: outcome == ProjectionOutcome::SkippedDegenerate,
            });
        }
    }

    // corrected nodal velocity; the norm clamp keeps near-massless
    // (design-eliminated) nodes from writing huge velocities into grid nodes
    // that carry no other mass
    let v_star_cap = 0.5 * ctx.blowup_cap;
    for i in 0..n_nodes {
        scratch.v_star[i] = if state.net.pinned[i] {
            Vec3::zeros()
        } else {
            let raw = (scratch.x_pred[i] - state.net.x[i]) / dt;
            let norm = raw.norm();
            if norm > v_star_cap {
                raw * (v_star_cap / norm)
            } else {
                raw
            }
        };
    }
    if let Some(rec) = record.as_deref_mut() {
        rec.x_proj.clone_from(&scratch.x_pred);
        rec.v_star.clone_from(&scratch.v_star);
    }

    // (3) node scatter with the same B-spline stencils
    for i in 0..n_nodes {
        scratch.scattered[i] = false;
        if state.net.pinned[i] {
            continue;
        }
        if let Some((base, fx)) = stencil_base(&state.net.x[i], grid.dx, grid.cells) {
            scratch.scattered[i] = true;
            let m = state.net.mass[i];
            let mv = m * scratch.v_star[i];
            let wx = bspline_weights(fx.x);
            let wy = bspline_weights(fx.y);
            let wz = bspline_weights(fx.z);
            for di in 0..3 {
                for dj in 0..3 {
                    for dk in 0..3 {
                        let w = wx[di] * wy[dj] * wz[dk];
                        let idx = grid.index(
                            base[0] + di as i64,
                            base[1] + dj as i64,
                            base[2] + dk as i64,
                        );
                        grid.touch(idx);
                        grid.mass[idx] += w * m;
                        grid.momentum[idx] += w * mv;
                    }
                }
            }
        }
    }

    // (4) grid momentum update
    grid_update(
        grid,
        dt,
        &ctx.gravity,
        ctx.floor_height,
        ctx.friction_mu,
        ctx.boundary_margin,
    );

    // (5) grid back to soft body
    g2p(grid, &mut state.particles, dt, step)?;

    // (6) node gather
    for i in 0..n_nodes {
        scratch.gathered[i] = false;
        if state.net.pinned[i] {
            continue;
        }
        let mut v_new = scratch.v_star[i] + ctx.gravity * dt;
        if scratch.scattered[i] {
            let (base, fx) = stencil_base(&state.net.x[i], grid.dx, grid.cells)
                .expect("scattered node keeps its stencil");
            let wx = bspline_weights(fx.x);
            let wy = bspline_weights(fx.y);
            let wz = bspline_weights(fx.z);
            let mut gathered_v = Vec3::zeros();
            let mut gathered_m = 0.0;
            let mut w_sq = 0.0;
            for di in 0..3 {
                for dj in 0..3 {
                    for dk in 0..3 {
                        let w = wx[di] * wy[dj] * wz[dk];
                        let idx = grid.index(
                            base[0] + di as i64,
                            base[1] + dj as i64,
                            base[2] + dk as i64,
                        );
                        gathered_m += w * grid.mass[idx];
                        gathered_v += w * grid.velocity[idx];
                        w_sq += w * w;
                    }
                }
            }
            // coupling test counts the stencil mass excluding this node's own
            // scatter, so bodies outside the soft continuum keep their XPBD
            // motion (and may penetrate the floor, which has no node contact)
            let other_m = gathered_m - w_sq * state.net.mass[i];
            if other_m > COUPLING_THRESHOLD * state.net.mass[i] {
                scratch.gathered[i] = true;
                v_new = gathered_v;
            }
        }
        state.net.v[i] = v_new;
        state.net.x[i] += dt * v_new;
    }
    if let Some(rec) = record.as_deref_mut() {
        rec.scattered.clone_from(&scratch.scattered);
        rec.gathered.clone_from(&scratch.gathered);
    }

    state.step_index += 1;

    let vmax = state.max_speed();
    if vmax > ctx.blowup_cap {
        return Err(SimError::BlowUp {
            step: state.step_index,
            vmax,
            cap: ctx.blowup_cap,
        });
    }
    Ok(())
}

/// Resolve the (kappa_eff, L_ref, branch) triple for a bar at projection
/// time. Sliders use the per-step switch state; everything else runs through
/// the buckling cap on its current (Gauss-Seidel updated) length.
fn effective_bar_stiffness(
    state: &SimState,
    scratch: &StepScratch,
    ctx: &SimContext,
    bar_idx: usize,
) -> (f64, f64, StiffnessBranch) {
    let bar = &state.net.bars[bar_idx];
    if let Some(u) = ctx.slider_of_bar[bar_idx] {
        let (kappa, l_ref, _) = scratch.slider_state[u];
        return (kappa, l_ref, StiffnessBranch::Slider);
    }
    let len = (scratch.x_pred[bar.a] - scratch.x_pred[bar.b]).norm();
    if bar.buckling_exempt {
        return (bar.kappa, bar.l_rest, StiffnessBranch::Design);
    }
    let kappa_eff = effective_stiffness_buckling(
        bar.kappa,
        bar.kappa_min,
        bar.l_rest,
        len,
        bar.young,
        bar.second_moment,
        bar.k_factor,
    );
    let branch = if kappa_eff == bar.kappa {
        StiffnessBranch::Design
    } else if kappa_eff == bar.kappa_min {
        StiffnessBranch::BucklingFloor
    } else {
        StiffnessBranch::BucklingCap
    };
    (kappa_eff, bar.l_rest, branch)
}

// ---------------------------------------------------------------------------
// Phase runner, trajectory recording, checkpoints
// ---------------------------------------------------------------------------

/// Decimated probe/cg/actuation series plus the full-rate cg history that the
/// objective consumes.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub decimation: usize,
    pub probe_ids: Vec<usize>,
    pub sample_steps: Vec<usize>,
    pub probes: Vec<Vec<Vec3>>,
    pub cg_samples: Vec<Vec3>,
    pub voltages: Vec<Vec<f64>>,
    /// Center of gravity at every step, index = step.
    pub cg_series: Vec<Vec3>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.sample_steps.iter().map(|&s| s as f64 * self.dt).collect()
    }
}

#[derive(Debug, Clone)]
pub struct CheckpointStore {
    pub interval: usize,
    pub states: Vec<SimState>,
    pub digests: Vec<u64>,
}

impl CheckpointStore {
    pub fn new(interval: usize) -> Self {
        CheckpointStore {
            interval,
            states: Vec::new(),
            digests: Vec::new(),
        }
    }

    pub fn segment_count(&self) -> usize {
        self.states.len()
    }

    pub fn live_states(&self) -> usize {
        self.states.len()
    }

    fn push(&mut self, state: &SimState) {
        self.states.push(state.clone());
        self.digests.push(state.digest());
    }

    /// Recompute the per-step states of one segment: returns the state before
    /// each step of the segment, in order. The recomputed endpoint is checked
    /// bit-exactly against the next stored checkpoint.
    pub fn replay_segment(
        &self,
        segment: usize,
        ctx: &SimContext,
        grid: &mut GridField,
        scratch: &mut StepScratch,
        n_steps_total: usize,
    ) -> Result<Vec<SimState>, SimError> {
        let start = self
            .states
            .get(segment)
            .ok_or(SimError::MissingCheckpoint { segment })?;
        if start.digest() != self.digests[segment] {
            return Err(SimError::ReplayMismatch { segment });
        }
        let seg_start = segment * self.interval;
        let seg_end = ((segment + 1) * self.interval).min(n_steps_total);
        let mut states = Vec::with_capacity(seg_end - seg_start);
        let mut state = start.clone();
        for _ in seg_start..seg_end {
            states.push(state.clone());
            step_core(&mut state, grid, scratch, ctx, None)?;
        }
        if segment + 1 < self.states.len() && state.digest() != self.digests[segment + 1] {
            return Err(SimError::ReplayMismatch { segment });
        }
        Ok(states)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub trajectory: Trajectory,
    /// Particle and node positions at t = 0, for the deviation penalties.
    pub x0_particles: Vec<Vec3>,
    pub x0_nodes: Vec<Vec3>,
    /// Positions at the end of the settle phase (t_start).
    pub x_start_particles: Vec<Vec3>,
    pub x_start_nodes: Vec<Vec3>,
    pub final_state: SimState,
    pub checkpoints: Option<CheckpointStore>,
}

/// Simulate the settle phase followed by the actuation phase. Voltages must
/// already be in the context table (zero through settling by construction).
pub fn run_phases(
    initial: &SimState,
    ctx: &SimContext,
    probe_ids: &[usize],
    decimation: usize,
    keep_checkpoints: bool,
) -> Result<RunResult, SimError> {
    let mut state = initial.clone();
    state.step_index = 0;
    let mut grid = GridField::new(ctx.grid_cells, ctx.grid_dx);
    let mut scratch = StepScratch::new(state.net.n_nodes(), ctx.units.len());
    let mut store = keep_checkpoints.then(|| CheckpointStore::new(ctx.checkpoint_interval));
    let decimation = decimation.max(1);

    let mut traj = Trajectory {
        dt: ctx.dt,
        decimation,
        probe_ids: probe_ids.to_vec(),
        sample_steps: Vec::new(),
        probes: vec![Vec::new(); probe_ids.len()],
        cg_samples: Vec::new(),
        voltages: vec![Vec::new(); ctx.n_act],
        cg_series: Vec::with_capacity(ctx.n_steps + 1),
    };
    let x0_particles = state.particles.x.clone();
    let x0_nodes = state.net.x.clone();
    let mut x_start_particles = state.particles.x.clone();
    let mut x_start_nodes = state.net.x.clone();

    let record_sample = |traj: &mut Trajectory, state: &SimState, step: usize| {
        traj.sample_steps.push(step);
        for (pi, &node) in probe_ids.iter().enumerate() {
            traj.probes[pi].push(state.net.x[node]);
        }
        traj.cg_samples.push(state.center_of_gravity());
        for a in 0..ctx.n_act {
            traj.voltages[a].push(ctx.voltage(step, a));
        }
    };

    traj.cg_series.push(state.center_of_gravity());
    record_sample(&mut traj, &state, 0);

    for step in 0..ctx.n_steps {
        if let Some(store) = store.as_mut() {
            if step % store.interval == 0 {
                store.push(&state);
            }
        }
        step_core(&mut state, &mut grid, &mut scratch, ctx, None)?;
        traj.cg_series.push(state.center_of_gravity());
        let done = step + 1;
        if done == ctx.settle_steps {
            x_start_particles.clone_from(&state.particles.x);
            x_start_nodes.clone_from(&state.net.x);
        }
        if done % decimation == 0 {
            record_sample(&mut traj, &state, done);
        }
    }

    Ok(RunResult {
        trajectory: traj,
        x0_particles,
        x0_nodes,
        x_start_particles,
        x_start_nodes,
        final_state: state,
        checkpoints: store,
    })
}

/// Default probes: the lowest-front and lowest-rear skeletal nodes.
pub fn default_probes(net: &BarNetwork) -> Vec<usize> {
    if net.n_nodes() == 0 {
        return Vec::new();
    }
    let zmin = net.x.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    let band = |i: &usize| net.x[*i].z < zmin + 1e-6 + 0.02;
    let candidates: Vec<usize> = (0..net.n_nodes()).filter(|i| band(i)).collect();
    let front = candidates
        .iter()
        .copied()
        .max_by(|&a, &b| net.x[a].x.partial_cmp(&net.x[b].x).unwrap())
        .unwrap();
    let rear = candidates
        .iter()
        .copied()
        .min_by(|&a, &b| net.x[a].x.partial_cmp(&net.x[b].x).unwrap())
        .unwrap();
    vec![front, rear]
}
