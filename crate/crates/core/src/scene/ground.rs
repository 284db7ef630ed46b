//! Ground-structure construction: staggered node lattices on both lateral
//! faces of the soft body, densely connected candidate bone bars, solenoid
//! units and the bridge bars tying the two halves together.

use super::SceneConfig;
use crate::error::ConfigError;
use crate::math::Vec3;
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    /// On the sagittal plane (actuator and bridge-center nodes).
    Mid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarRole {
    Bone,
    ActuatorAxial,
    ActuatorLateral,
    Bridge,
}

#[derive(Debug, Clone)]
pub struct GsNode {
    pub pos: Vec3,
    pub side: Side,
    /// Lumped hardware mass (solenoid core/coil); zero for lattice nodes.
    pub fixed_mass: f64,
}

#[derive(Debug, Clone)]
pub struct GsBar {
    pub a: usize,
    pub b: usize,
    pub role: BarRole,
    pub rest_length: f64,
    /// Only bone bars carry a design variable.
    pub designable: bool,
    /// Axial stiffness per unit reference length (EA) at full density.
    pub kappa_max: f64,
    /// Linear mass density rho*A used for nodal mass distribution; zero for
    /// actuator bars whose hardware mass is lumped at the unit's endpoints.
    pub rho_area: f64,
    pub young: f64,
    /// Weak-axis second moment of area of the cross section.
    pub second_moment: f64,
    pub buckling_length_factor: f64,
    /// The slider bar's compressive response is governed by the hard stop,
    /// not by Euler buckling.
    pub buckling_exempt: bool,
}

/// One solenoid: coil node (lower, heavy), core node (upper), and a bridge
/// node the core mount hangs from. The slider bar carries the state switch
/// and the contraction force; the mount bar is a stiff fixed-length link.
#[derive(Debug, Clone)]
pub struct ActuatorUnit {
    pub upper_node: usize,
    pub lower_node: usize,
    pub bridge_node: usize,
    /// `[slider, mount]`.
    pub axial_bars: [usize; 2],
    pub lateral_bars: [usize; 2],
    pub bridge_bars: [usize; 2],
    pub l0: f64,
    pub dl: f64,
    pub l_core: f64,
    pub f_max: f64,
    pub kappa_free: f64,
    pub kappa_act: f64,
}

impl ActuatorUnit {
    /// Contraction limit: reference length while engaged.
    pub fn engaged_length(&self) -> f64 {
        self.l0 - self.dl
    }
}

#[derive(Debug, Clone)]
pub struct GroundStructure {
    pub nodes: Vec<GsNode>,
    pub bars: Vec<GsBar>,
    pub actuators: Vec<ActuatorUnit>,
    /// Bar indices that carry a gamma variable, in gamma-vector order.
    pub designable_bars: Vec<usize>,
    /// Lattice nodes per side (left nodes are 0..n, right are n..2n).
    pub lattice_nodes_per_side: usize,
}

impl GroundStructure {
    pub fn n_designable(&self) -> usize {
        self.designable_bars.len()
    }
}

fn weak_axis_second_moment(section: [f64; 2]) -> f64 {
    // I = w * t^3 / 12 about the weak axis (t = thinner dimension)
    let (w, t) = if section[0] >= section[1] {
        (section[0], section[1])
    } else {
        (section[1], section[0])
    };
    w * t * t * t / 12.0
}

/// Positions of the staggered lattice on one face, row-major. Even rows have
/// `cols` nodes, odd rows `cols - 1` nodes shifted by half a pitch.
fn lattice_positions(cfg: &SceneConfig, y: f64) -> Vec<Vec3> {
    let sk = &cfg.skeleton;
    let (x0, z0) = (sk.origin_m[0], sk.origin_m[1]);
    let p = sk.pitch_m;
    let mut out = Vec::new();
    for r in 0..sk.rows {
        let z = z0 + r as f64 * p;
        if r % 2 == 0 {
            for c in 0..sk.cols {
                out.push(Vec3::new(x0 + c as f64 * p, y, z));
            }
        } else {
            for c in 0..sk.cols - 1 {
                out.push(Vec3::new(x0 + (c as f64 + 0.5) * p, y, z));
            }
        }
    }
    out
}

fn nearest_node(nodes: &[GsNode], range: std::ops::Range<usize>, target: &Vec3) -> usize {
    let mut best = range.start;
    let mut best_d = f64::INFINITY;
    for i in range {
        let d = (nodes[i].pos - target).norm_squared();
        if d < best_d - 1e-18 {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Build the skeletal candidate structure plus actuator and bridge elements.
pub fn build_ground_structure(cfg: &SceneConfig) -> Result<GroundStructure, ConfigError> {
    let sk = &cfg.skeleton;
    let y_left = cfg.soft_body.box_min_m[1];
    let y_right = cfg.soft_body.box_max_m[1];
    let y_mid = cfg.sagittal_y();

    let left = lattice_positions(cfg, y_left);
    let right = lattice_positions(cfg, y_right);
    let per_side = left.len();

    let mut nodes: Vec<GsNode> = Vec::with_capacity(2 * per_side + 3 * cfg.actuators.len());
    for pos in left {
        nodes.push(GsNode {
            pos,
            side: Side::Left,
            fixed_mass: 0.0,
        });
    }
    for pos in right {
        nodes.push(GsNode {
            pos,
            side: Side::Right,
            fixed_mass: 0.0,
        });
    }

    // Candidate bone connectivity: all same-side pairs within the radius.
    // The same local pair list serves both sides so that bar k on the left
    // mirrors bar k + n/2 on the right.
    let radius = sk.connection_radius_factor * sk.pitch_m;
    let mut local_pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..per_side {
        for j in (i + 1)..per_side {
            let d = (nodes[i].pos - nodes[j].pos).norm();
            if d <= radius + 1e-12 {
                local_pairs.push((i, j));
            }
        }
    }
    if local_pairs.is_empty() {
        return Err(ConfigError::invalid(
            "skeleton.connection_radius_factor",
            "connection radius produces zero bars",
        ));
    }

    let bone_kappa = sk.young_modulus_pa * sk.cross_section_m[0] * sk.cross_section_m[1];
    let bone_rho_area = sk.density_kgpm3 * sk.cross_section_m[0] * sk.cross_section_m[1];
    let bone_i = weak_axis_second_moment(sk.cross_section_m);

    let mut bars: Vec<GsBar> = Vec::new();
    let mut designable = Vec::new();
    for side_offset in [0, per_side] {
        for &(i, j) in &local_pairs {
            let (a, b) = (i + side_offset, j + side_offset);
            let rest = (nodes[a].pos - nodes[b].pos).norm();
            designable.push(bars.len());
            bars.push(GsBar {
                a,
                b,
                role: BarRole::Bone,
                rest_length: rest,
                designable: true,
                kappa_max: bone_kappa,
                rho_area: bone_rho_area,
                young: sk.young_modulus_pa,
                second_moment: bone_i,
                buckling_length_factor: sk.buckling_length_factor,
                buckling_exempt: false,
            });
        }
    }

    // Actuator units with bridges across the two halves.
    let ap = &cfg.actuator_params;
    let bridge_area = cfg.bridge.cross_section_m[0] * cfg.bridge.cross_section_m[1];
    let bridge_kappa = cfg
        .bridge
        .kappa_npm
        .unwrap_or(sk.young_modulus_pa * bridge_area);
    let bridge_rho_area = sk.density_kgpm3 * bridge_area;
    let bridge_i = weak_axis_second_moment(cfg.bridge.cross_section_m);
    let mut actuators = Vec::new();

    let fixed_bar = |a: usize,
                     b: usize,
                     role: BarRole,
                     rest: f64,
                     rho_area: f64,
                     exempt: bool| GsBar {
        a,
        b,
        role,
        rest_length: rest,
        designable: false,
        kappa_max: bridge_kappa,
        rho_area,
        young: sk.young_modulus_pa,
        second_moment: bridge_i,
        buckling_length_factor: sk.buckling_length_factor,
        buckling_exempt: exempt,
    };

    for placement in &cfg.actuators {
        let x = placement.x_m;
        let z_low = placement.z_lower_m;
        // Bracket and mount bars carry their hardware mass (half to each
        // endpoint, like every bar); the lumped unit masses are reduced by
        // those halves so the assembled core and coil nodes come out at
        // exactly the configured totals.
        let z_bridge = z_low + ap.rest_length_m + ap.mount_length_m;
        let lower_pos = Vec3::new(x, y_mid, z_low);
        let upper_pos = Vec3::new(x, y_mid, z_low + ap.rest_length_m);
        let anchor_l_low = nearest_node(&nodes, 0..per_side, &Vec3::new(x, y_left, z_low));
        let anchor_r_low = anchor_l_low + per_side;
        let anchor_l_top =
            nearest_node(&nodes, 0..per_side, &Vec3::new(x, y_left, z_bridge));
        let anchor_r_top = anchor_l_top + per_side;
        let lat_l_len = (nodes[anchor_l_low].pos - lower_pos).norm();
        let lat_r_len = (nodes[anchor_r_low].pos - lower_pos).norm();
        let mount_mass = bridge_rho_area * ap.mount_length_m;
        let lateral_mass = bridge_rho_area * (lat_l_len + lat_r_len);
        let coil_fixed = ap.coil_mass_kg - 0.5 * lateral_mass;
        let core_fixed = ap.core_mass_kg - 0.5 * mount_mass;
        if coil_fixed <= 0.0 || core_fixed <= 0.0 {
            return Err(ConfigError::invalid(
                "actuator_params",
                "bracket/mount hardware mass exceeds the configured unit masses",
            ));
        }

        let lower = nodes.len();
        nodes.push(GsNode {
            pos: lower_pos,
            side: Side::Mid,
            fixed_mass: coil_fixed,
        });
        let upper = nodes.len();
        nodes.push(GsNode {
            pos: upper_pos,
            side: Side::Mid,
            fixed_mass: core_fixed,
        });
        let bridge_mid = nodes.len();
        nodes.push(GsNode {
            pos: Vec3::new(x, y_mid, z_bridge),
            side: Side::Mid,
            fixed_mass: 0.0,
        });

        let slider = bars.len();
        let mut bar = fixed_bar(
            upper,
            lower,
            BarRole::ActuatorAxial,
            ap.rest_length_m,
            0.0,
            true,
        );
        bar.kappa_max = ap.kappa_free_npm;
        bars.push(bar);

        let mount = bars.len();
        bars.push(fixed_bar(
            bridge_mid,
            upper,
            BarRole::ActuatorAxial,
            ap.mount_length_m,
            bridge_rho_area,
            false,
        ));

        let lat_l = bars.len();
        bars.push(fixed_bar(
            lower,
            anchor_l_low,
            BarRole::ActuatorLateral,
            lat_l_len,
            bridge_rho_area,
            false,
        ));
        let lat_r = bars.len();
        bars.push(fixed_bar(
            lower,
            anchor_r_low,
            BarRole::ActuatorLateral,
            lat_r_len,
            bridge_rho_area,
            false,
        ));

        let br_l = bars.len();
        let rest = (nodes[anchor_l_top].pos - nodes[bridge_mid].pos).norm();
        bars.push(fixed_bar(
            anchor_l_top,
            bridge_mid,
            BarRole::Bridge,
            rest,
            bridge_rho_area,
            false,
        ));
        let br_r = bars.len();
        let rest = (nodes[anchor_r_top].pos - nodes[bridge_mid].pos).norm();
        bars.push(fixed_bar(
            bridge_mid,
            anchor_r_top,
            BarRole::Bridge,
            rest,
            bridge_rho_area,
            false,
        ));

        actuators.push(ActuatorUnit {
            upper_node: upper,
            lower_node: lower,
            bridge_node: bridge_mid,
            axial_bars: [slider, mount],
            lateral_bars: [lat_l, lat_r],
            bridge_bars: [br_l, br_r],
            l0: ap.rest_length_m,
            dl: ap.stroke_m,
            l_core: ap.core_length_m,
            f_max: ap.f_max_n,
            kappa_free: ap.kappa_free_npm,
            kappa_act: ap.kappa_act_npm,
        });
    }

    // No duplicate unordered endpoint pairs.
    let mut seen = HashSet::new();
    for bar in &bars {
        let key = (bar.a.min(bar.b), bar.a.max(bar.b));
        if !seen.insert(key) {
            return Err(ConfigError::invalid(
                "skeleton",
                format!("duplicate bar between nodes {} and {}", key.0, key.1),
            ));
        }
        if !(bar.rest_length > 0.0) {
            return Err(ConfigError::invalid(
                "skeleton",
                format!("zero-length bar between nodes {} and {}", bar.a, bar.b),
            ));
        }
    }

    Ok(GroundStructure {
        nodes,
        bars,
        actuators,
        designable_bars: designable,
        lattice_nodes_per_side: per_side,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::tests::paper_like_toml;

    #[test]
    fn paper_like_lattice_has_180_designable_bars() {
        let cfg = SceneConfig::from_toml(&paper_like_toml()).unwrap();
        let gs = build_ground_structure(&cfg).unwrap();
        assert_eq!(gs.n_designable(), 180);
    }

    #[test]
    fn actuator_unit_has_two_axial_and_two_lateral_bars() {
        let cfg = SceneConfig::from_toml(&paper_like_toml()).unwrap();
        let gs = build_ground_structure(&cfg).unwrap();
        assert_eq!(gs.actuators.len(), 2);
        for unit in &gs.actuators {
            let n_axial = gs
                .bars
                .iter()
                .enumerate()
                .filter(|(i, b)| {
                    b.role == BarRole::ActuatorAxial && unit.axial_bars.contains(i)
                })
                .count();
            assert_eq!(n_axial, 2);
            for &i in &unit.lateral_bars {
                assert_eq!(gs.bars[i].role, BarRole::ActuatorLateral);
            }
            // slider rest length equals the installed length
            assert!((gs.bars[unit.axial_bars[0]].rest_length - unit.l0).abs() < 1e-12);
        }
    }

    #[test]
    fn too_small_radius_yields_zero_bars_error() {
        let toml = paper_like_toml().replace(
            "pitch_m = 0.0112",
            "pitch_m = 0.0112\nconnection_radius_factor = 0.5",
        );
        let cfg = SceneConfig::from_toml(&toml).unwrap();
        let err = build_ground_structure(&cfg).unwrap_err();
        assert!(err.to_string().contains("zero bars"));
    }

    #[test]
    fn rest_lengths_match_endpoint_distances() {
        let cfg = SceneConfig::from_toml(&paper_like_toml()).unwrap();
        let gs = build_ground_structure(&cfg).unwrap();
        for bar in &gs.bars {
            let d = (gs.nodes[bar.a].pos - gs.nodes[bar.b].pos).norm();
            assert!((d - bar.rest_length).abs() < 1e-12);
        }
    }

    #[test]
    fn rebuild_is_bit_identical() {
        let cfg = SceneConfig::from_toml(&paper_like_toml()).unwrap();
        let a = build_ground_structure(&cfg).unwrap();
        let b = build_ground_structure(&cfg).unwrap();
        assert_eq!(a.nodes.len(), b.nodes.len());
        for (na, nb) in a.nodes.iter().zip(&b.nodes) {
            assert_eq!(na.pos, nb.pos);
        }
        for (ba, bb) in a.bars.iter().zip(&b.bars) {
            assert_eq!((ba.a, ba.b), (bb.a, bb.b));
            assert_eq!(ba.rest_length.to_bits(), bb.rest_length.to_bits());
        }
    }

    #[test]
    fn only_bone_bars_are_designable() {
        let cfg = SceneConfig::from_toml(&paper_like_toml()).unwrap();
        let gs = build_ground_structure(&cfg).unwrap();
        for (i, bar) in gs.bars.iter().enumerate() {
            assert_eq!(bar.designable, bar.role == BarRole::Bone);
            assert_eq!(gs.designable_bars.contains(&i), bar.designable);
        }
    }

    #[test]
    fn weak_axis_moment_of_paper_section() {
        // 5.2 x 1.0 mm -> I = 4.333e-13 m^4
        let i = weak_axis_second_moment([5.2e-3, 1.0e-3]);
        assert!((i - 4.333e-13).abs() / 4.333e-13 < 1e-3);
    }
}
