fn main() {
    for path in ["scenes/paper.toml", "scenes/desk.toml"] {
        let problem = marrow::problem::Problem::load(path).unwrap();
        println!(
            "{path}: dx={} particles={} nodes={} bars={} designable={} actuators={} steps={} pulses={}",
            problem.cfg.dx(),
            problem.n_particles(),
            problem.base_net.n_nodes(),
            problem.base_net.bars.len(),
            problem.n_designable(),
            problem.n_actuators(),
            problem.cfg.total_steps(),
            problem.n_pulses,
        );
        println!("  probes: {:?}", problem.probes);
    }
}
