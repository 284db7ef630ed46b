//! Sagittal-plane mirror pairing of particles, skeletal nodes and designable
//! bars. Design variables and gradients are symmetrized by averaging over
//! pairs, which keeps mirror entries bit-identical after every update.

use super::GroundStructure;
use crate::error::ConfigError;
use crate::math::Vec3;
use std::collections::HashMap;

const MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
pub struct SymmetryMap {
    /// (i, mirror_i) with i < mirror_i, over particle indices.
    pub particle_pairs: Vec<(usize, usize)>,
    /// Particles on the sagittal plane.
    pub particle_self: Vec<usize>,
    /// Pairs of gamma-vector indices (designable bars).
    pub bar_pairs: Vec<(usize, usize)>,
    pub bar_self: Vec<usize>,
    /// Pairs over network node indices, used to mirror node quantities.
    pub node_pairs: Vec<(usize, usize)>,
    pub node_self: Vec<usize>,
}

impl SymmetryMap {
    /// Average mirror pairs in place; both members end up bit-identical.
    pub fn symmetrize_particles(&self, values: &mut [f64]) {
        for &(i, j) in &self.particle_pairs {
            let m = 0.5 * (values[i] + values[j]);
            values[i] = m;
            values[j] = m;
        }
    }

    pub fn symmetrize_bars(&self, values: &mut [f64]) {
        for &(i, j) in &self.bar_pairs {
            let m = 0.5 * (values[i] + values[j]);
            values[i] = m;
            values[j] = m;
        }
    }

    /// Mirror-pair lookup as an involution over particle indices.
    pub fn particle_mirror(&self, n: usize) -> Vec<usize> {
        let mut map: Vec<usize> = (0..n).collect();
        for &(i, j) in &self.particle_pairs {
            map[i] = j;
            map[j] = i;
        }
        map
    }
}

fn pair_by_mirror(
    positions: &[Vec3],
    plane_y: f64,
    what: &str,
) -> Result<(Vec<(usize, usize)>, Vec<usize>), ConfigError> {
    // Mirror partners share x and z exactly (same construction formula), so
    // bucket on those bit patterns and match y within tolerance.
    let mut buckets: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
    for (i, p) in positions.iter().enumerate() {
        buckets
            .entry((p.x.to_bits(), p.z.to_bits()))
            .or_default()
            .push(i);
    }
    let mut pairs = Vec::new();
    let mut selfs = Vec::new();
    let mut matched = vec![false; positions.len()];
    for (i, p) in positions.iter().enumerate() {
        if matched[i] {
            continue;
        }
        if (p.y - plane_y).abs() < MATCH_TOL {
            matched[i] = true;
            selfs.push(i);
            continue;
        }
        let target_y = 2.0 * plane_y - p.y;
        let group = &buckets[&(p.x.to_bits(), p.z.to_bits())];
        let partner = group
            .iter()
            .copied()
            .find(|&j| j != i && !matched[j] && (positions[j].y - target_y).abs() < MATCH_TOL);
        match partner {
            Some(j) => {
                matched[i] = true;
                matched[j] = true;
                pairs.push((i.min(j), i.max(j)));
            }
            None => {
                return Err(ConfigError::invalid(
                    "symmetry",
                    format!(
                        "{what} {i} at ({:.6}, {:.6}, {:.6}) has no mirror partner",
                        p.x, p.y, p.z
                    ),
                ));
            }
        }
    }
    Ok((pairs, selfs))
}

/// Pair every particle, node and designable bar with its sagittal mirror.
pub fn build_symmetry_map(
    gs: &GroundStructure,
    particle_positions: &[Vec3],
    plane_y: f64,
) -> Result<SymmetryMap, ConfigError> {
    let (particle_pairs, particle_self) =
        pair_by_mirror(particle_positions, plane_y, "particle")?;

    let node_positions: Vec<Vec3> = gs.nodes.iter().map(|n| n.pos).collect();
    let (node_pairs, node_self) = pair_by_mirror(&node_positions, plane_y, "node")?;

    // Node-index involution.
    let mut node_mirror: Vec<usize> = (0..gs.nodes.len()).collect();
    for &(i, j) in &node_pairs {
        node_mirror[i] = j;
        node_mirror[j] = i;
    }

    // Designable bars: match by mirrored unordered endpoint pair.
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
    for (g, &bar_idx) in gs.designable_bars.iter().enumerate() {
        let bar = &gs.bars[bar_idx];
        lookup.insert((bar.a.min(bar.b), bar.a.max(bar.b)), g);
    }
    let mut bar_pairs = Vec::new();
    let mut bar_self = Vec::new();
    let mut matched = vec![false; gs.designable_bars.len()];
    for (g, &bar_idx) in gs.designable_bars.iter().enumerate() {
        if matched[g] {
            continue;
        }
        let bar = &gs.bars[bar_idx];
        let (ma, mb) = (node_mirror[bar.a], node_mirror[bar.b]);
        let key = (ma.min(mb), ma.max(mb));
        match lookup.get(&key) {
            Some(&h) if h == g => {
                matched[g] = true;
                bar_self.push(g);
            }
            Some(&h) if !matched[h] => {
                matched[g] = true;
                matched[h] = true;
                bar_pairs.push((g.min(h), g.max(h)));
            }
            _ => {
                return Err(ConfigError::invalid(
                    "symmetry",
                    format!("designable bar {g} (nodes {}-{}) has no mirror", bar.a, bar.b),
                ));
            }
        }
    }

    Ok(SymmetryMap {
        particle_pairs,
        particle_self,
        bar_pairs,
        bar_self,
        node_pairs,
        node_self,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpm::seed_particles;
    use crate::scene::tests::paper_like_toml;
    use crate::scene::{build_ground_structure, SceneConfig};

    fn setup() -> (GroundStructure, Vec<Vec3>, f64, SymmetryMap) {
        let cfg = SceneConfig::from_toml(&paper_like_toml()).unwrap();
        let gs = build_ground_structure(&cfg).unwrap();
        let particles = seed_particles(&cfg).unwrap();
        let plane = cfg.sagittal_y();
        let map = build_symmetry_map(&gs, &particles.x, plane).unwrap();
        (gs, particles.x, plane, map)
    }

    #[test]
    fn pairing_is_total_and_reflective() {
        let (gs, px, plane, map) = setup();
        assert_eq!(
            2 * map.particle_pairs.len() + map.particle_self.len(),
            px.len()
        );
        assert_eq!(
            2 * map.bar_pairs.len() + map.bar_self.len(),
            gs.n_designable()
        );
        for &(i, j) in &map.particle_pairs {
            assert!((px[i].y - (2.0 * plane - px[j].y)).abs() < 1e-9);
            assert_eq!(px[i].x, px[j].x);
            assert_eq!(px[i].z, px[j].z);
        }
    }

    #[test]
    fn actuator_nodes_are_self_mirrored() {
        let (gs, _, _, map) = setup();
        for unit in &gs.actuators {
            for id in [unit.upper_node, unit.lower_node, unit.bridge_node] {
                assert!(map.node_self.contains(&id));
            }
        }
    }

    #[test]
    fn symmetrize_twice_is_identity() {
        let (gs, _, _, map) = setup();
        let mut vals: Vec<f64> = (0..gs.n_designable()).map(|i| (i as f64).sin()).collect();
        map.symmetrize_bars(&mut vals);
        let once = vals.clone();
        map.symmetrize_bars(&mut vals);
        assert_eq!(once, vals);
        for &(i, j) in &map.bar_pairs {
            assert_eq!(vals[i].to_bits(), vals[j].to_bits());
        }
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let (gs, mut px, plane, _) = setup();
        px[0].y += 1e-3;
        let err = build_symmetry_map(&gs, &px, plane).unwrap_err();
        assert!(err.to_string().contains("no mirror"));
    }
}
