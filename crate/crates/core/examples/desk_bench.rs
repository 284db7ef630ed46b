use marrow::objective::Multipliers;

fn main() {
    let problem = marrow::problem::Problem::load("scenes/desk.toml").unwrap();
    let vars = problem.initial_vars();
    let mult = Multipliers::new(1.0);

    let t0 = std::time::Instant::now();
    let report = problem.loss(&vars, &mult).unwrap();
    let t_fwd = t0.elapsed().as_secs_f64();
    println!("forward only: {t_fwd:.2} s");
    println!(
        "L_x = {:.4} mm, D_soft = {:.4} mm, D_bone = {:.4} mm, C = {:?}",
        report.l_x * 1e3,
        report.d_soft * 1e3,
        report.d_bone * 1e3,
        report.constraints
    );

    let t0 = std::time::Instant::now();
    let (rep2, grad) = marrow::grad::loss_and_grad(&problem, &vars, &mult).unwrap();
    let t_full = t0.elapsed().as_secs_f64();
    println!("forward+backward: {t_full:.2} s  (L = {:.6e})", rep2.l_total);
    println!(
        "grad max |phi| = {:.3e}, |gamma| = {:.3e}, |w| = {:.3e}, peak states = {}",
        grad.d_phi.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        grad.d_gamma.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        grad.d_w.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        grad.peak_live_states
    );
}
