use marrow::math::Vec3;
use marrow::mpm::GridField;
use marrow::objective::Multipliers;
use marrow::optimizer::Optimizer;
use marrow::stepper::{step_core, StepScratch};

fn main() {
    let problem = marrow::problem::Problem::load("scenes/desk.toml").unwrap();
    let mut opt = Optimizer::new(&problem);
    // run until the first failure, keeping the last good vars
    let mut last_good = opt.vars.clone();
    for i in 0..60 {
        let vars_before = opt.vars.clone();
        match opt.step_once() {
            Ok(r) if !r.rolled_back => {
                last_good = vars_before;
                println!("iter {i} ok L_x {:.3} mm", r.l_x * 1e3);
            }
            Ok(_) => {
                println!("iter {i} rolled back; diagnosing the failing design");
                break;
            }
            Err(e) => {
                println!("iter {i} err {e}");
                break;
            }
        }
    }
    let _ = last_good;
    // diagnose the CURRENT vars (the ones that fail)
    let vars = opt.vars.clone();
    let (state0, _) = problem.apply_design(&vars);
    let ctx = problem.context(&vars);
    let mut state = state0.clone();
    state.step_index = 0;
    let mut grid = GridField::new(ctx.grid_cells, ctx.grid_dx);
    let mut scratch = StepScratch::new(state.net.n_nodes(), ctx.units.len());
    let mut prev_max = 0.0f64;
    for step in 0..ctx.n_steps {
        match step_core(&mut state, &mut grid, &mut scratch, &ctx, None) {
            Ok(()) => {}
            Err(e) => {
                println!("failed at step {step}: {e}");
                break;
            }
        }
        let (mut vmax_n, mut imax_n) = (0.0f64, 0usize);
        for (i, v) in state.net.v.iter().enumerate() {
            if v.norm() > vmax_n {
                vmax_n = v.norm();
                imax_n = i;
            }
        }
        let (mut vmax_p, mut imax_p) = (0.0f64, 0usize);
        for (i, v) in state.particles.v.iter().enumerate() {
            if v.norm() > vmax_p {
                vmax_p = v.norm();
                imax_p = i;
            }
        }
        let m = vmax_n.max(vmax_p);
        if m > 2.0 * prev_max.max(1.0) || step % 50 == 0 && m > 3.0 {
            let who = if vmax_n > vmax_p {
                format!(
                    "node {imax_n} m={:.2e} x=({:.3},{:.3},{:.3})",
                    state.net.mass[imax_n],
                    state.net.x[imax_n].x,
                    state.net.x[imax_n].y,
                    state.net.x[imax_n].z
                )
            } else {
                format!("particle {imax_p} x z={:.3}", state.particles.x[imax_p].z)
            };
            println!("step {step}: vmax_node {vmax_n:.2} vmax_part {vmax_p:.2}  <- {who}");
            prev_max = m;
        }
        if m > 3000.0 {
            // report slider lengths
            for (u, unit) in ctx.units.iter().enumerate() {
                let l = (state.net.x[unit.upper_node] - state.net.x[unit.lower_node]).norm();
                println!(
                    "  unit {u}: len {:.4} (engaged at {:.4}), coil z {:.4}",
                    l,
                    unit.engaged_length(),
                    state.net.x[unit.lower_node].z
                );
            }
            break;
        }
    }
    let mean_gamma = vars.gamma.iter().sum::<f64>() / vars.gamma.len() as f64;
    println!("mean gamma of failing design: {mean_gamma:.3}");
    let _ = Multipliers::new(0.0);
    let _ = Vec3::zeros();
}
