//! Co-design problem wiring: scene, seeded particles, ground structure,
//! symmetry map, design-variable pipeline and forward evaluation.

use crate::design::{project_density, DensityFilter, DesignVariables, SoftMaterial};
use crate::error::{MarrowError, SimError};
use crate::mpm::{seed_particles, ParticleState};
use crate::objective::{
    evaluate, Multipliers, ObjectiveInputs, ObjectiveParams, ObjectiveReport,
};
use crate::scene::{
    build_ground_structure, build_symmetry_map, GroundStructure, SceneConfig, SymmetryMap,
};
use crate::stepper::{default_probes, run_phases, RunResult, SimContext, SimState};
use crate::xpbd::{apply_bar_design, BarNetwork};

/// Cached intermediate design fields of one evaluation.
#[derive(Debug, Clone)]
pub struct DesignCache {
    pub phi_bar: Vec<f64>,
    pub phi_hat: Vec<f64>,
    /// Nodes whose assembled mass hit the floor (mass chain derivative zero).
    pub node_floored: Vec<bool>,
}

/// A fully wired co-design problem.
pub struct Problem {
    pub cfg: SceneConfig,
    pub gs: GroundStructure,
    pub sym: SymmetryMap,
    pub filter: DensityFilter,
    pub material: SoftMaterial,
    pub obj_params: ObjectiveParams,
    pub base_particles: ParticleState,
    pub base_net: BarNetwork,
    pub probes: Vec<usize>,
    pub n_pulses: usize,
}

impl Problem {
    pub fn from_config(cfg: SceneConfig) -> Result<Self, MarrowError> {
        cfg.validate()?;
        let gs = build_ground_structure(&cfg)?;
        let base_particles = seed_particles(&cfg)?;
        let sym = build_symmetry_map(&gs, &base_particles.x, cfg.sagittal_y())?;
        let filter = DensityFilter::build(
            &base_particles.x,
            cfg.optimizer.filter_radius_m,
            cfg.optimizer.filter_exponent,
        );
        let material = SoftMaterial {
            mu_max: cfg.lame_mu(),
            lambda_max: cfg.lame_lambda(),
            rho_max: cfg.soft_body.density_kgpm3,
            eta_visc: cfg.soft_body.viscosity_pas,
        };
        let base_net = BarNetwork::from_ground_structure(&gs);
        let probes = default_probes(&base_net);
        let n_pulses =
            (cfg.phases.cycle_duration_s / cfg.actuator_params.pulse_dt_s).round() as usize;
        let n_designable = gs.n_designable().max(1) as f64;
        let obj_params = ObjectiveParams {
            d_soft_ref: cfg.optimizer.d_soft_ref_m,
            d_bone_ref: cfg.optimizer.d_bone_ref_m,
            c_soft_bound: cfg.optimizer.c_soft_bound,
            c_act_bound: cfg.optimizer.c_act_bound,
            c_bone_bound: cfg.optimizer.c_bone_bound_scale / n_designable,
            c_nbone_bound: cfg.optimizer.max_bones as f64 / n_designable,
        };
        Ok(Problem {
            cfg,
            gs,
            sym,
            filter,
            material,
            obj_params,
            base_particles,
            base_net,
            probes,
            n_pulses,
        })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, MarrowError> {
        Ok(Self::from_config(SceneConfig::load(path)?)?)
    }

    pub fn n_particles(&self) -> usize {
        self.base_particles.len()
    }

    pub fn n_designable(&self) -> usize {
        self.gs.n_designable()
    }

    pub fn n_actuators(&self) -> usize {
        self.gs.actuators.len()
    }

    /// Initial design per the configured constants, symmetric by construction.
    pub fn initial_vars(&self) -> DesignVariables {
        let mut vars = DesignVariables::new(
            self.n_particles(),
            self.n_designable(),
            self.n_actuators(),
            self.n_pulses,
        );
        vars.phi.fill(self.cfg.optimizer.init_phi);
        vars.gamma.fill(self.cfg.optimizer.init_gamma);
        vars.w.fill(self.cfg.optimizer.init_w);
        vars.clamp_to_boxes();
        vars
    }

    /// Run the design pipeline: filter + projection for the soft body, bar
    /// interpolation and mass assembly for the skeleton.
    pub fn apply_design(&self, vars: &DesignVariables) -> (SimState, DesignCache) {
        let phi_bar = self.filter.apply(&vars.phi);
        let phi_hat: Vec<f64> = phi_bar
            .iter()
            .map(|&pb| project_density(pb, self.cfg.optimizer.projection_beta))
            .collect();
        let mut particles = self.base_particles.clone();
        particles.phi.copy_from_slice(&vars.phi);
        particles.apply_design(&phi_hat, &self.material);
        let mut net = self.base_net.clone();
        let floored_list = apply_bar_design(
            &mut net,
            &self.gs,
            &vars.gamma,
            self.cfg.optimizer.bone_eps,
            self.cfg.optimizer.bone_exponent,
        );
        let mut node_floored = vec![false; net.n_nodes()];
        for i in floored_list {
            node_floored[i] = true;
        }
        (
            SimState {
                particles,
                net,
                step_index: 0,
            },
            DesignCache {
                phi_bar,
                phi_hat,
                node_floored,
            },
        )
    }

    /// Simulation context with the voltage table synthesized from `vars.w`.
    pub fn context(&self, vars: &DesignVariables) -> SimContext {
        let mut ctx = SimContext::new(&self.cfg, &self.gs, self.base_net.bars.len());
        ctx.set_voltages_from_design(&self.cfg, &vars.w, self.n_pulses);
        ctx
    }

    pub fn forward(
        &self,
        vars: &DesignVariables,
        keep_checkpoints: bool,
        decimation: usize,
    ) -> Result<(RunResult, SimContext, DesignCache), SimError> {
        let (state, cache) = self.apply_design(vars);
        let ctx = self.context(vars);
        let run = run_phases(&state, &ctx, &self.probes, decimation, keep_checkpoints)?;
        Ok((run, ctx, cache))
    }

    pub fn objective_inputs<'a>(
        &self,
        run: &'a RunResult,
        ctx: &SimContext,
    ) -> ObjectiveInputs<'a> {
        let traj = &run.trajectory;
        ObjectiveInputs {
            cg0: traj.cg_series[0],
            cg_start: traj.cg_series[ctx.settle_steps],
            cg_end: traj.cg_series[ctx.n_steps],
            x0_particles: &run.x0_particles,
            x0_nodes: &run.x0_nodes,
            x_start_particles: &run.x_start_particles,
            x_start_nodes: &run.x_start_nodes,
            x_end_particles: &run.final_state.particles.x,
            x_end_nodes: &run.final_state.net.x,
            particle_mass: &run.final_state.particles.mass,
            node_mass: &run.final_state.net.mass,
            pinned: &run.final_state.net.pinned,
        }
    }

    /// Forward simulation and objective under fixed multipliers.
    pub fn loss(
        &self,
        vars: &DesignVariables,
        mult: &Multipliers,
    ) -> Result<ObjectiveReport, SimError> {
        let (run, ctx, cache) = self.forward(vars, false, usize::MAX)?;
        let inputs = self.objective_inputs(&run, &ctx);
        Ok(evaluate(
            &inputs,
            &cache.phi_hat,
            &vars.gamma,
            &vars.w,
            &self.obj_params,
            mult,
        ))
    }
}
