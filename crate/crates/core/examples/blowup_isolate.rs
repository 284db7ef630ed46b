use marrow::mpm::GridField;
use marrow::optimizer::Optimizer;
use marrow::stepper::{step_core, StepScratch};

fn run_forward(
    problem: &marrow::problem::Problem,
    vars: &marrow::design::DesignVariables,
    zero_voltage: bool,
    no_floor: bool,
    label: &str,
) {
    let (state0, _) = problem.apply_design(vars);
    let mut ctx = problem.context(vars);
    if zero_voltage {
        ctx.voltages.iter_mut().for_each(|v| *v = 0.0);
    }
    if no_floor {
        ctx.floor_height = None;
    }
    let mut state = state0;
    let mut grid = GridField::new(ctx.grid_cells, ctx.grid_dx);
    let mut scratch = StepScratch::new(state.net.n_nodes(), ctx.units.len());
    let mut peak = 0.0f64;
    for step in 0..ctx.n_steps {
        if let Err(e) = step_core(&mut state, &mut grid, &mut scratch, &ctx, None) {
            println!("{label}: FAILED at step {step}: {e} (peak {peak:.1})");
            return;
        }
        peak = peak.max(state.max_speed());
    }
    println!("{label}: survived all {} steps (peak speed {peak:.2} m/s)", ctx.n_steps);
}

fn main() {
    let problem = marrow::problem::Problem::load("scenes/desk.toml").unwrap();
    let mut opt = Optimizer::new(&problem);
    for _ in 0..20 {
        match opt.step_once() {
            Ok(r) if !r.rolled_back => continue,
            _ => break,
        }
    }
    let vars = opt.vars.clone();
    run_forward(&problem, &vars, false, false, "full          ");
    run_forward(&problem, &vars, true, false, "no actuation  ");
    run_forward(&problem, &vars, false, true, "no floor      ");
    run_forward(&problem, &vars, true, true, "neither       ");
}
