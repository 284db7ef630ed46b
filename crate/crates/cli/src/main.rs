//! Command-line driver: simulate, optimize, grad-check, analyze, export.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 blow-up abort.

use clap::{Args, Parser, Subcommand};
use marrow::design::DesignVariables;
use marrow::error::{MarrowError, SimError};
use marrow::grad::{finite_difference_check, fd_summary, VarGroup};
use marrow::io;
use marrow::objective::Multipliers;
use marrow::optimizer::Optimizer;
use marrow::problem::Problem;
use marrow::scene::SceneConfig;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "marrow", version, about = "Differentiable soft-rigid co-design simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scene configuration file (TOML; see docs/scene_format.md).
    #[arg(long)]
    scene: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Fixed-order deterministic execution (always on; flag kept for
    /// compatibility with scripted runs).
    #[arg(long, default_value_t = true)]
    deterministic: bool,
    /// Override the scene's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Forward-simulate a design and export trajectory, design and summary.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Probe node ids (defaults to the lowest front/rear skeletal nodes).
        #[arg(long, value_delimiter = ',')]
        probe: Vec<usize>,
        /// Record every Nth step.
        #[arg(long, default_value_t = 100)]
        decimate: usize,
        /// Start from an optimizer snapshot instead of the initial design.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Also dump the final particle state as a binary snapshot.
        #[arg(long, default_value_t = false)]
        dump_particles: bool,
    },
    /// Run the co-design loop.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
        /// Outer iterations to run.
        #[arg(long, default_value_t = 50)]
        iters: usize,
        /// Resume from a snapshot written by a previous run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Compare adjoint gradients against central finite differences.
    GradCheck {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of variables sampled across all groups.
        #[arg(long, default_value_t = 30)]
        samples: usize,
        /// Central-difference step.
        #[arg(long, default_value_t = 1e-4)]
        h: f64,
    },
    /// Fourier analysis of an actuation CSV: dominant frequency per actuator
    /// and the inter-actuator phase delay.
    Analyze {
        /// Actuation time series (t_s, V_in_0, V_in_1, ...).
        #[arg(long)]
        input: PathBuf,
        /// Cycle duration; defaults to the scene's value when --scene given.
        #[arg(long)]
        cycle_duration: Option<f64>,
        #[arg(long)]
        scene: Option<PathBuf>,
    },
    /// Export the design and actuation of a snapshot without simulating.
    Export {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        resume: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            std::process::exit(1);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            let code = match &err {
                MarrowError::Sim(SimError::BlowUp { .. }) => 3,
                _ => 2,
            };
            std::process::exit(code);
        }
    }
}

fn load_problem(common: &CommonArgs) -> Result<Problem, MarrowError> {
    let mut cfg = SceneConfig::load(&common.scene)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Problem::from_config(cfg)
}

fn vars_from_resume(
    problem: &Problem,
    resume: &Option<PathBuf>,
) -> Result<DesignVariables, MarrowError> {
    match resume {
        Some(path) => Ok(io::read_snapshot(path)?.vars),
        None => Ok(problem.initial_vars()),
    }
}

fn export_design(problem: &Problem, vars: &DesignVariables, dir: &Path) -> Result<(), MarrowError> {
    let (_, cache) = problem.apply_design(vars);
    let bars: Vec<(usize, usize)> = problem
        .gs
        .designable_bars
        .iter()
        .map(|&b| (problem.gs.bars[b].a, problem.gs.bars[b].b))
        .collect();
    io::write_design_csv(
        dir.join("design.csv"),
        &problem.base_particles.x,
        &vars.phi,
        &cache.phi_hat,
        &bars,
        &vars.gamma,
    )
}

fn export_actuation(
    problem: &Problem,
    vars: &DesignVariables,
    dir: &Path,
    decimate: usize,
) -> Result<(), MarrowError> {
    let ctx = problem.context(vars);
    let decimate = decimate.max(1);
    let mut times = Vec::new();
    let mut series = vec![Vec::new(); ctx.n_act];
    let mut s = 0;
    while s <= ctx.n_steps {
        times.push(s as f64 * ctx.dt);
        for (a, out) in series.iter_mut().enumerate() {
            out.push(ctx.voltage(s, a));
        }
        s += decimate;
    }
    io::write_actuation_csv(dir.join("actuation.csv"), &times, &series)
}

fn run(cli: Cli) -> Result<(), MarrowError> {
    match cli.command {
        Command::Simulate {
            common,
            probe,
            decimate,
            resume,
            dump_particles,
        } => {
            let problem = load_problem(&common)?;
            std::fs::create_dir_all(&common.out)?;
            let vars = vars_from_resume(&problem, &resume)?;
            let probes = if probe.is_empty() {
                problem.probes.clone()
            } else {
                probe
            };
            let started = std::time::Instant::now();
            let (state, cache) = problem.apply_design(&vars);
            let ctx = problem.context(&vars);
            let run = marrow::stepper::run_phases(&state, &ctx, &probes, decimate, false)?;
            let inputs = problem.objective_inputs(&run, &ctx);
            let report = marrow::objective::evaluate(
                &inputs,
                &cache.phi_hat,
                &vars.gamma,
                &vars.w,
                &problem.obj_params,
                &Multipliers::new(problem.cfg.optimizer.sigma_init),
            );
            io::write_trajectory_csv(common.out.join("trajectory.csv"), &run.trajectory)?;
            export_design(&problem, &vars, &common.out)?;
            export_actuation(&problem, &vars, &common.out, decimate)?;
            if dump_particles {
                io::write_particle_snapshot(
                    common.out.join("particles_final.bin"),
                    &run.final_state.particles.x,
                    &run.final_state.particles.phi_hat,
                )?;
            }
            let summary = serde_json::json!({
                "steps": ctx.n_steps,
                "dt_s": ctx.dt,
                "l_x_m": report.l_x,
                "d_soft_m": report.d_soft,
                "d_bone_m": report.d_bone,
                "constraints": report.constraints,
                "wall_s": started.elapsed().as_secs_f64(),
            });
            std::fs::write(
                common.out.join("summary.json"),
                serde_json::to_string_pretty(&summary).unwrap(),
            )?;
            println!(
                "simulated {} steps, L_x = {:.4} mm",
                ctx.n_steps,
                report.l_x * 1e3
            );
            Ok(())
        }
        Command::Optimize {
            common,
            iters,
            resume,
        } => {
            let problem = load_problem(&common)?;
            std::fs::create_dir_all(&common.out)?;
            let mut opt = match &resume {
                Some(path) => Optimizer::from_snapshot(&problem, io::read_snapshot(path)?),
                None => Optimizer::new(&problem),
            };
            let mut log = io::IterationLog::create(common.out.join("iterations.csv"))?;
            let out_dir = common.out.clone();
            let result = opt.run(iters, |rec| {
                let _ = log.append(rec);
                println!(
                    "iter {:4}  L = {:+.6e}  L_x = {:+.3} mm  C_bone = {:+.3e}{}",
                    rec.iteration,
                    rec.l_total,
                    rec.l_x * 1e3,
                    rec.constraints[1],
                    if rec.rolled_back { "  [rolled back]" } else { "" }
                );
            });
            io::write_snapshot(out_dir.join("snapshot.json"), &opt.snapshot())?;
            export_design(&problem, &opt.vars, &out_dir)?;
            export_actuation(&problem, &opt.vars, &out_dir, 100)?;
            result?;
            println!("snapshot and design written to {}", out_dir.display());
            Ok(())
        }
        Command::GradCheck { common, samples, h } => {
            let problem = load_problem(&common)?;
            std::fs::create_dir_all(&common.out)?;
            let vars = problem.initial_vars();
            let mult = Multipliers::new(problem.cfg.optimizer.sigma_init);
            let mut picks = Vec::new();
            let groups: [(VarGroup, usize); 3] = [
                (VarGroup::Phi, problem.n_particles()),
                (VarGroup::Gamma, problem.n_designable()),
                (VarGroup::W, vars.w.len()),
            ];
            let per_group = (samples / 3).max(1);
            for (group, n) in groups {
                if n == 0 {
                    continue;
                }
                let stride = (n / per_group).max(1);
                for i in (0..n).step_by(stride).take(per_group) {
                    picks.push((group, i));
                }
            }
            let records = finite_difference_check(&problem, &vars, &mult, &picks, h)?;
            let path = common.out.join("grad_check.csv");
            let mut out = String::from("group,index,analytic,numeric,rel_err\n");
            for r in &records {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.group, r.index, r.analytic, r.numeric, r.rel_err
                ));
            }
            std::fs::write(&path, out)?;
            let (median, max, frac) = fd_summary(&records);
            println!(
                "{} samples: median rel err {:.3e}, max {:.3e}, {:.1}% within 1e-2",
                records.len(),
                median,
                max,
                frac * 100.0
            );
            Ok(())
        }
        Command::Analyze {
            input,
            cycle_duration,
            scene,
        } => {
            let cycle = match (cycle_duration, &scene) {
                (Some(c), _) => c,
                (None, Some(path)) => SceneConfig::load(path)?.phases.cycle_duration_s,
                (None, None) => {
                    return Err(MarrowError::Other(
                        "analyze needs --cycle-duration or --scene".into(),
                    ))
                }
            };
            let (times, series) = io::read_actuation_csv(&input)?;
            if times.len() < 2 {
                return Err(MarrowError::Other("series too short".into()));
            }
            let sample_dt = times[1] - times[0];
            let report = io::analyze_spectrum(&series, sample_dt, cycle)
                .map_err(MarrowError::Sim)?;
            for (a, f) in report.dominant_hz.iter().enumerate() {
                println!("actuator {a}: dominant {f:.2} Hz");
            }
            if let Some(delay) = report.phase_delay_rad {
                println!(
                    "shared dominant {:.2} Hz, phase delay {:.4} rad",
                    report.shared_dominant_hz, delay
                );
            }
            Ok(())
        }
        Command::Export { common, resume } => {
            let problem = load_problem(&common)?;
            std::fs::create_dir_all(&common.out)?;
            let vars = io::read_snapshot(&resume)?.vars;
            export_design(&problem, &vars, &common.out)?;
            export_actuation(&problem, &vars, &common.out, 100)?;
            println!("design and actuation exported to {}", common.out.display());
            Ok(())
        }
    }
}
