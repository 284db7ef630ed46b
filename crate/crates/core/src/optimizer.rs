//! Adam updates per variable group, the augmented-Lagrangian schedule
//! (penalty growth on stationarity, multiplier updates, soft-constraint
//! gating), rollback on simulation blow-up, and the outer co-design loop.

use crate::design::DesignVariables;
use crate::error::SimError;
use crate::grad::{loss_and_grad, GradientVector};
use crate::objective::{Multipliers, ObjectiveReport, C_BONE, N_CONSTRAINTS};
use crate::problem::Problem;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
const STATIONARITY_WINDOW: usize = 10;
const MAX_CONSECUTIVE_FAILURES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamMoments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamMoments {
    pub fn new(n: usize) -> Self {
        AdamMoments {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One Adam step; returns the applied delta (to subtract from the vars).
    pub fn update(&mut self, grad: &[f64], lr: f64) -> Vec<f64> {
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let b1t = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let b2t = 1.0 - ADAM_BETA2.powi(self.t as i32);
        let mut delta = vec![0.0; grad.len()];
        for i in 0..grad.len() {
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * grad[i];
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            delta[i] = lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
        delta
    }
}

/// Stationarity rule: relative difference of the means over two consecutive
/// windows of five losses below the tolerance.
pub fn stationarity(losses: &[f64], tol: f64) -> bool {
    if losses.len() < STATIONARITY_WINDOW {
        return false;
    }
    let n = losses.len();
    let recent: f64 = losses[n - 5..].iter().sum::<f64>() / 5.0;
    let previous: f64 = losses[n - 10..n - 5].iter().sum::<f64>() / 5.0;
    (recent - previous).abs() / previous.abs().max(1e-12) < tol
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimState {
    pub adam_phi: AdamMoments,
    pub adam_gamma: AdamMoments,
    pub adam_w: AdamMoments,
    pub iteration: usize,
    pub mult: Multipliers,
    pub loss_window: Vec<f64>,
    pub consecutive_failures: usize,
    pub rng: ChaCha8Rng,
}

/// Everything needed to resume an interrupted optimization bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSnapshot {
    pub vars: DesignVariables,
    pub state: OptimState,
    pub last_delta: Option<LastDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastDelta {
    pub base: DesignVariables,
    pub d_phi: Vec<f64>,
    pub d_gamma: Vec<f64>,
    pub d_w: Vec<f64>,
    pub scale: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub l_total: f64,
    pub l_x: f64,
    pub d_soft: f64,
    pub d_bone: f64,
    pub constraints: [f64; N_CONSTRAINTS],
    pub lambda: [f64; N_CONSTRAINTS],
    pub sigma: [f64; N_CONSTRAINTS],
    pub c_soft_active: bool,
    pub grad_max: f64,
    pub rolled_back: bool,
    pub wall_s: f64,
}

pub struct Optimizer<'a> {
    pub problem: &'a Problem,
    pub vars: DesignVariables,
    pub state: OptimState,
    last_delta: Option<LastDelta>,
    pub history: Vec<IterationRecord>,
}

impl<'a> Optimizer<'a> {
    pub fn new(problem: &'a Problem) -> Self {
        let vars = problem.initial_vars();
        let cfg = &problem.cfg.optimizer;
        let mut mult = Multipliers::new(cfg.sigma_init);
        if let Some(per) = cfg.sigma_init_per {
            mult.sigma = per;
        }
        let state = OptimState {
            adam_phi: AdamMoments::new(vars.phi.len()),
            adam_gamma: AdamMoments::new(vars.gamma.len()),
            adam_w: AdamMoments::new(vars.w.len()),
            iteration: 0,
            mult,
            loss_window: Vec::new(),
            consecutive_failures: 0,
            rng: rand::SeedableRng::seed_from_u64(problem.cfg.seed),
        };
        Optimizer {
            problem,
            vars,
            state,
            last_delta: None,
            history: Vec::new(),
        }
    }

    pub fn from_snapshot(problem: &'a Problem, snapshot: OptimizerSnapshot) -> Self {
        Optimizer {
            problem,
            vars: snapshot.vars,
            state: snapshot.state,
            last_delta: snapshot.last_delta,
            history: Vec::new(),
        }
    }

    pub fn snapshot(&self) -> OptimizerSnapshot {
        OptimizerSnapshot {
            vars: self.vars.clone(),
            state: self.state.clone(),
            last_delta: self.last_delta.clone(),
        }
    }

    fn apply_delta(&mut self, delta: &LastDelta) {
        let mut vars = delta.base.clone();
        for (v, d) in vars.phi.iter_mut().zip(&delta.d_phi) {
            *v -= delta.scale * d;
        }
        for (v, d) in vars.gamma.iter_mut().zip(&delta.d_gamma) {
            *v -= delta.scale * d;
        }
        for (v, d) in vars.w.iter_mut().zip(&delta.d_w) {
            *v -= delta.scale * d;
        }
        vars.clamp_to_boxes();
        self.problem.sym.symmetrize_particles(&mut vars.phi);
        self.problem.sym.symmetrize_bars(&mut vars.gamma);
        self.vars = vars;
    }

    /// One outer iteration: forward + backward, Adam update, schedule. On
    /// simulation failure the last update is replayed at half scale.
    pub fn step_once(&mut self) -> Result<IterationRecord, SimError> {
        let start = std::time::Instant::now();
        let cfg = &self.problem.cfg.optimizer;
        let (report, grad) = match loss_and_grad(self.problem, &self.vars, &self.state.mult) {
            Ok(pair) => pair,
            Err(err) => {
                self.state.consecutive_failures += 1;
                if self.state.consecutive_failures >= MAX_CONSECUTIVE_FAILURES {
                    return Err(err);
                }
                match self.last_delta.clone() {
                    Some(mut delta) => {
                        delta.scale *= 0.5;
                        self.apply_delta(&delta);
                        self.last_delta = Some(delta);
                    }
                    None => return Err(err),
                }
                let record = IterationRecord {
                    iteration: self.state.iteration,
                    l_total: f64::NAN,
                    l_x: f64::NAN,
                    d_soft: f64::NAN,
                    d_bone: f64::NAN,
                    constraints: [f64::NAN; N_CONSTRAINTS],
                    lambda: self.state.mult.lambda,
                    sigma: self.state.mult.sigma,
                    c_soft_active: self.state.mult.c_soft_active,
                    grad_max: f64::NAN,
                    rolled_back: true,
                    wall_s: start.elapsed().as_secs_f64(),
                };
                self.state.iteration += 1;
                self.history.push(record.clone());
                return Ok(record);
            }
        };
        self.state.consecutive_failures = 0;

        // latch the soft-constraint gate once the skeletal constraint holds
        if report.constraints[C_BONE] <= 0.0 {
            self.state.mult.c_soft_active = true;
        }

        let mut grad = grad;
        grad.symmetrize(&self.problem.sym);

        let d_phi = self.state.adam_phi.update(&grad.d_phi, cfg.lr_soft);
        let d_gamma = self.state.adam_gamma.update(&grad.d_gamma, cfg.lr_bone);
        let d_w = self.state.adam_w.update(&grad.d_w, cfg.lr_act);
        let delta = LastDelta {
            base: self.vars.clone(),
            d_phi,
            d_gamma,
            d_w,
            scale: 1.0,
        };
        self.apply_delta(&delta);
        self.last_delta = Some(delta);

        self.state.loss_window.push(report.l_total);
        if self.state.loss_window.len() > STATIONARITY_WINDOW {
            let drop = self.state.loss_window.len() - STATIONARITY_WINDOW;
            self.state.loss_window.drain(..drop);
        }
        if stationarity(&self.state.loss_window, cfg.stationarity_tol) {
            for i in 0..N_CONSTRAINTS {
                let c = report.constraints[i];
                self.state.mult.sigma[i] =
                    (cfg.sigma_growth * self.state.mult.sigma[i]).min(cfg.sigma_max);
                self.state.mult.lambda[i] =
                    (self.state.mult.lambda[i] - self.state.mult.sigma[i] * c.max(0.0)).min(0.0);
            }
            self.state.loss_window.clear();
        }

        let record = IterationRecord {
            iteration: self.state.iteration,
            l_total: report.l_total,
            l_x: report.l_x,
            d_soft: report.d_soft,
            d_bone: report.d_bone,
            constraints: report.constraints,
            lambda: report.lambda,
            sigma: report.sigma,
            c_soft_active: report.c_soft_active,
            grad_max: grad.max_abs(),
            rolled_back: false,
            wall_s: start.elapsed().as_secs_f64(),
        };
        self.state.iteration += 1;
        self.history.push(record.clone());
        Ok(record)
    }

    pub fn run(
        &mut self,
        budget: usize,
        mut on_iteration: impl FnMut(&IterationRecord),
    ) -> Result<(), SimError> {
        for _ in 0..budget {
            let record = self.step_once()?;
            on_iteration(&record);
        }
        Ok(())
    }

    /// Evaluate the objective at the current variables without updating.
    pub fn evaluate(&self) -> Result<ObjectiveReport, SimError> {
        self.problem.loss(&self.vars, &self.state.mult)
    }

    pub fn gradient_is_symmetric(&self, grad: &GradientVector) -> bool {
        self.problem
            .sym
            .bar_pairs
            .iter()
            .all(|&(a, b)| grad.d_gamma[a] == grad.d_gamma[b])
    }
}
