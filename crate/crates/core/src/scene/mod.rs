//! Scene configuration: parsing, validation, ground-structure construction
//! and sagittal symmetry pairing.
//!
//! The on-disk format is a TOML tree with units spelled out in key names;
//! `docs/scene_format.md` is the normative schema. Unknown keys are rejected
//! so a typo cannot silently fall back to a default.

mod ground;
mod symmetry;

pub use ground::{build_ground_structure, ActuatorUnit, BarRole, GroundStructure, GsBar, GsNode, Side};
pub use symmetry::{build_symmetry_map, SymmetryMap};

use crate::error::ConfigError;
use crate::math::Vec3;
use serde::{Deserialize, Serialize};
use std::path::Path;

fn default_gravity() -> f64 {
    9.81
}
fn default_tilt() -> f64 {
    0.0
}
fn default_friction() -> f64 {
    0.4
}
fn default_viscosity() -> f64 {
    5.0
}
fn default_checkpoint_interval() -> usize {
    250
}
fn default_blowup_cap() -> f64 {
    100.0
}
fn default_boundary_margin() -> usize {
    3
}
fn default_radius_factor() -> f64 {
    1.5
}
fn default_buckling_k() -> f64 {
    1.0
}
fn default_mount_length() -> f64 {
    0.015
}
fn default_pulse_dt() -> f64 {
    0.002
}
fn default_pulse_sigma() -> f64 {
    0.01
}
fn default_pulse_amp() -> f64 {
    0.2
}
fn default_voltage_ceiling() -> f64 {
    1.0
}
fn default_clip_halfwidth() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub dt_s: f64,
    #[serde(default = "default_checkpoint_interval")]
    pub checkpoint_interval_steps: usize,
    #[serde(default = "default_blowup_cap")]
    pub blowup_cap_mps: f64,
    #[serde(default = "default_boundary_margin")]
    pub boundary_margin_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub size_m: [f64; 3],
    pub grid_cells: [usize; 3],
    #[serde(default = "default_gravity")]
    pub gravity_mps2: f64,
    /// Tilt of the gravity vector about the forward (x) axis; a positive
    /// tilt leans the robot laterally (+y).
    #[serde(default = "default_tilt")]
    pub gravity_tilt_deg: f64,
    /// Height of the ground plane. Absent means no floor.
    #[serde(default)]
    pub floor_height_m: Option<f64>,
    #[serde(default = "default_friction")]
    pub friction_mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoftBodyConfig {
    pub box_min_m: [f64; 3],
    pub box_max_m: [f64; 3],
    pub young_modulus_pa: f64,
    pub poisson_ratio: f64,
    pub density_kgpm3: f64,
    #[serde(default = "default_viscosity")]
    pub viscosity_pas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub cycle_duration_s: f64,
    pub cycle_repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkeletonConfig {
    /// Rows (vertical) of the staggered node lattice on each lateral face.
    pub rows: usize,
    /// Nodes in even rows; odd rows are staggered with one node fewer.
    pub cols: usize,
    pub pitch_m: f64,
    /// Lattice origin in the x-z plane: position of the first even-row node.
    pub origin_m: [f64; 2],
    #[serde(default = "default_radius_factor")]
    pub connection_radius_factor: f64,
    pub young_modulus_pa: f64,
    pub cross_section_m: [f64; 2],
    pub density_kgpm3: f64,
    #[serde(default = "default_buckling_k")]
    pub buckling_length_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeConfig {
    pub cross_section_m: [f64; 2],
    /// Axial stiffness of the hardware bars (bridges, brackets, mount).
    /// Defaults to E*A of the bridge section; smaller values keep the
    /// hardware response inside the explicit coupling stability band at
    /// coarser time steps while remaining far stiffer than the soft body.
    #[serde(default)]
    pub kappa_npm: Option<f64>,
}

/// Placement of one solenoid unit. The unit sits on the sagittal plane:
/// coil node at `z_lower_m`, core node one rest length above it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorPlacement {
    pub x_m: f64,
    pub z_lower_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorParams {
    pub rest_length_m: f64,
    pub stroke_m: f64,
    pub core_length_m: f64,
    pub f_max_n: f64,
    /// Axial stiffness (per unit length) of the slider bar while free.
    pub kappa_free_npm: f64,
    /// Axial stiffness once the stroke limit engages.
    pub kappa_act_npm: f64,
    pub core_mass_kg: f64,
    pub coil_mass_kg: f64,
    /// Length of the rigid bar connecting the core node to the bridge.
    #[serde(default = "default_mount_length")]
    pub mount_length_m: f64,
    #[serde(default = "default_pulse_dt")]
    pub pulse_dt_s: f64,
    #[serde(default = "default_pulse_sigma")]
    pub pulse_sigma_s: f64,
    #[serde(default = "default_pulse_amp")]
    pub pulse_amp: f64,
    #[serde(default = "default_voltage_ceiling")]
    pub voltage_ceiling: f64,
    #[serde(default = "default_clip_halfwidth")]
    pub voltage_clip_halfwidth: f64,
}

fn default_lr_soft() -> f64 {
    0.02
}
fn default_lr_bone() -> f64 {
    0.01
}
fn default_lr_act() -> f64 {
    0.02
}
fn default_filter_radius() -> f64 {
    0.02
}
fn default_filter_exponent() -> f64 {
    3.0
}
fn default_beta() -> f64 {
    8.0
}
fn default_bone_eps() -> f64 {
    0.1
}
fn default_bone_exponent() -> f64 {
    6.0
}
fn default_c_soft_bound() -> f64 {
    0.0125
}
fn default_c_act_bound() -> f64 {
    0.0025
}
fn default_c_bone_scale() -> f64 {
    0.0125
}
fn default_max_bones() -> usize {
    40
}
fn default_sigma_init() -> f64 {
    1.0
}
fn default_sigma_max() -> f64 {
    1e4
}
fn default_sigma_growth() -> f64 {
    2.0
}
fn default_stationarity_tol() -> f64 {
    1e-3
}
fn default_d_ref() -> f64 {
    0.005
}
fn default_init_phi() -> f64 {
    0.0
}
fn default_init_gamma() -> f64 {
    0.5
}
fn default_init_w() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_lr_soft")]
    pub lr_soft: f64,
    #[serde(default = "default_lr_bone")]
    pub lr_bone: f64,
    #[serde(default = "default_lr_act")]
    pub lr_act: f64,
    #[serde(default = "default_filter_radius")]
    pub filter_radius_m: f64,
    #[serde(default = "default_filter_exponent")]
    pub filter_exponent: f64,
    #[serde(default = "default_beta")]
    pub projection_beta: f64,
    #[serde(default = "default_bone_eps")]
    pub bone_eps: f64,
    #[serde(default = "default_bone_exponent")]
    pub bone_exponent: f64,
    #[serde(default = "default_c_soft_bound")]
    pub c_soft_bound: f64,
    #[serde(default = "default_c_act_bound")]
    pub c_act_bound: f64,
    /// The skeletal binarization bound is this value divided by the number
    /// of designable bars, so a single half-dense bar violates it.
    #[serde(default = "default_c_bone_scale")]
    pub c_bone_bound_scale: f64,
    #[serde(default = "default_max_bones")]
    pub max_bones: usize,
    #[serde(default = "default_sigma_init")]
    pub sigma_init: f64,
    /// Optional per-constraint overrides of the initial penalty, in the
    /// order soft, bone, act, nbone.
    #[serde(default)]
    pub sigma_init_per: Option<[f64; 4]>,
    #[serde(default = "default_sigma_max")]
    pub sigma_max: f64,
    #[serde(default = "default_sigma_growth")]
    pub sigma_growth: f64,
    #[serde(default = "default_stationarity_tol")]
    pub stationarity_tol: f64,
    #[serde(default = "default_d_ref")]
    pub d_soft_ref_m: f64,
    #[serde(default = "default_d_ref")]
    pub d_bone_ref_m: f64,
    #[serde(default = "default_init_phi")]
    pub init_phi: f64,
    #[serde(default = "default_init_gamma")]
    pub init_gamma: f64,
    #[serde(default = "default_init_w")]
    pub init_w: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        toml::from_str("").expect("all optimizer keys have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default)]
    pub seed: u64,
    pub simulation: SimulationConfig,
    pub domain: DomainConfig,
    pub soft_body: SoftBodyConfig,
    pub phases: PhaseConfig,
    pub skeleton: SkeletonConfig,
    pub bridge: BridgeConfig,
    #[serde(default)]
    pub actuators: Vec<ActuatorPlacement>,
    pub actuator_params: ActuatorParams,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

impl SceneConfig {
    /// Load, parse and validate a scene file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: SceneConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Grid spacing; the validator guarantees it is uniform across axes.
    pub fn dx(&self) -> f64 {
        self.domain.size_m[0] / self.domain.grid_cells[0] as f64
    }

    pub fn dt(&self) -> f64 {
        self.simulation.dt_s
    }

    pub fn soft_box_min(&self) -> Vec3 {
        Vec3::from(self.soft_body.box_min_m)
    }

    pub fn soft_box_max(&self) -> Vec3 {
        Vec3::from(self.soft_body.box_max_m)
    }

    /// y coordinate of the sagittal mirror plane (soft-box center).
    pub fn sagittal_y(&self) -> f64 {
        0.5 * (self.soft_body.box_min_m[1] + self.soft_body.box_max_m[1])
    }

    /// Gravity vector after the lateral tilt about the forward axis.
    pub fn gravity_vector(&self) -> Vec3 {
        let g = self.domain.gravity_mps2;
        let t = self.domain.gravity_tilt_deg.to_radians();
        Vec3::new(0.0, g * t.sin(), -g * t.cos())
    }

    /// Total steps of the full schedule (settle + actuation).
    pub fn total_steps(&self) -> usize {
        (self.phases.t_end_s / self.simulation.dt_s).round() as usize
    }

    pub fn step_of_time(&self, t: f64) -> usize {
        (t / self.simulation.dt_s).round() as usize
    }

    /// First Lame parameter from (E, nu).
    pub fn lame_mu(&self) -> f64 {
        let e = self.soft_body.young_modulus_pa;
        let nu = self.soft_body.poisson_ratio;
        e / (2.0 * (1.0 + nu))
    }

    pub fn lame_lambda(&self) -> f64 {
        let e = self.soft_body.young_modulus_pa;
        let nu = self.soft_body.poisson_ratio;
        e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.domain;
        if d.grid_cells.iter().any(|&c| c == 0) {
            return Err(ConfigError::invalid("domain.grid_cells", "must be positive"));
        }
        let dx = d.size_m[0] / d.grid_cells[0] as f64;
        for a in 1..3 {
            let dxa = d.size_m[a] / d.grid_cells[a] as f64;
            if (dxa - dx).abs() > 1e-12 * dx.max(1.0) {
                return Err(ConfigError::invalid(
                    "domain.size_m/grid_cells",
                    format!("non-uniform cells: dx[0]={dx}, dx[{a}]={dxa}"),
                ));
            }
        }
        if !(dx > 0.0) {
            return Err(ConfigError::invalid("domain.size_m", "must be positive"));
        }
        if !(self.simulation.dt_s > 0.0) {
            return Err(ConfigError::invalid("simulation.dt_s", "dt must be > 0"));
        }

        let margin = self.simulation.boundary_margin_cells as f64 * dx;
        for a in 0..3 {
            let lo = self.soft_body.box_min_m[a];
            let hi = self.soft_body.box_max_m[a];
            if !(lo < hi) {
                return Err(ConfigError::invalid(
                    "soft_body.box_min_m/box_max_m",
                    format!("axis {a}: empty box"),
                ));
            }
            if lo < margin || hi > d.size_m[a] - margin {
                return Err(ConfigError::invalid(
                    "soft_body.box_min_m/box_max_m",
                    format!(
                        "axis {a}: box must keep a {} cell margin from the domain boundary",
                        self.simulation.boundary_margin_cells
                    ),
                ));
            }
        }

        let p = &self.phases;
        if !(p.t_start_s < p.t_end_s) {
            return Err(ConfigError::invalid(
                "phases.t_start_s/t_end_s",
                "t_start must be < t_end",
            ));
        }
        if p.t_start_s < 0.0 {
            return Err(ConfigError::invalid("phases.t_start_s", "must be >= 0"));
        }
        let span = p.t_end_s - p.t_start_s;
        let covered = p.cycle_duration_s * p.cycle_repeats as f64;
        if (covered - span).abs() > 1e-9 * span.max(1.0) {
            return Err(ConfigError::invalid(
                "phases.cycle_duration_s",
                format!("cycle_duration * cycle_repeats = {covered} != t_end - t_start = {span}"),
            ));
        }

        let sb = &self.soft_body;
        if !(sb.young_modulus_pa > 0.0) || !(sb.density_kgpm3 > 0.0) {
            return Err(ConfigError::invalid("soft_body", "E and rho must be positive"));
        }
        if !(0.0..0.5).contains(&sb.poisson_ratio) {
            return Err(ConfigError::invalid(
                "soft_body.poisson_ratio",
                "must be in [0, 0.5)",
            ));
        }

        let sk = &self.skeleton;
        if sk.rows < 1 || sk.cols < 2 {
            return Err(ConfigError::invalid(
                "skeleton.rows/cols",
                "need at least 1 row and 2 cols",
            ));
        }
        if !(sk.pitch_m > 0.0) {
            return Err(ConfigError::invalid("skeleton.pitch_m", "must be positive"));
        }

        let ap = &self.actuator_params;
        if !(ap.stroke_m > 0.0 && ap.stroke_m < ap.rest_length_m) {
            return Err(ConfigError::invalid(
                "actuator_params.stroke_m",
                "need 0 < stroke < rest_length",
            ));
        }
        if !(ap.core_length_m > 0.0) {
            return Err(ConfigError::invalid(
                "actuator_params.core_length_m",
                "must be positive",
            ));
        }
        for (i, a) in self.actuators.iter().enumerate() {
            let ztop = a.z_lower_m + ap.rest_length_m + ap.mount_length_m;
            if a.x_m < margin
                || a.x_m > d.size_m[0] - margin
                || a.z_lower_m < margin
                || ztop > d.size_m[2] - margin
            {
                return Err(ConfigError::invalid(
                    &format!("actuators[{i}]"),
                    "actuator anchor outside the safe domain band",
                ));
            }
        }

        if let Some(fh) = d.floor_height_m {
            if fh < 0.0 || fh > d.size_m[2] {
                return Err(ConfigError::invalid(
                    "domain.floor_height_m",
                    "must lie inside the domain",
                ));
            }
        }
        Ok(())
    }
}
