use marrow::optimizer::Optimizer;

fn main() {
    let iters: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(50);
    let scene = std::env::args().nth(2).unwrap_or("scenes/desk.toml".into());
    let problem = marrow::problem::Problem::load(&scene).unwrap();
    let mut opt = Optimizer::new(&problem);
    let t0 = std::time::Instant::now();
    opt.run(iters, |r| {
        println!(
            "iter {:3}  L {:+.5e}  L_x {:+8.3} mm  Dsoft {:6.2}mm Dbone {:6.2}mm  Cb {:+.4e} Ca {:+.3e} CN {:+.3e} sb {:7.1} act {}  {:4.1}s",
            r.iteration, r.l_total, r.l_x * 1e3, r.d_soft*1e3, r.d_bone*1e3,
            r.constraints[1], r.constraints[2], r.constraints[3],
            r.sigma[1], r.c_soft_active as u8, r.wall_s
        );
    })
    .unwrap();
    println!("total {:.0} s", t0.elapsed().as_secs_f64());
    let snap = opt.snapshot();
    marrow::io::write_snapshot("/tmp/desk_opt_snapshot.json", &snap).unwrap();
    let n = problem.n_pulses;
    let gam = &opt.vars.gamma;
    println!("gamma: min {:.3} max {:.3} mean {:.3}", gam.iter().cloned().fold(1.0,f64::min), gam.iter().cloned().fold(0.0,f64::max), gam.iter().sum::<f64>()/gam.len() as f64);
    let wmax = opt.vars.w.iter().cloned().fold(0.0, f64::max);
    println!("w: max {:.3}, rear row sum {:.2}, front row sum {:.2}", wmax,
        opt.vars.w[..n].iter().sum::<f64>(), opt.vars.w[n..].iter().sum::<f64>());
}
