// Compare the optimized design against the same design with the skeleton
// removed (all gamma forced to 0).
use marrow::objective::Multipliers;

fn main() {
    let snap_path = std::env::args().nth(1).unwrap_or("/tmp/desk_opt_snapshot.json".into());
    let problem = marrow::problem::Problem::load("scenes/desk.toml").unwrap();
    let snap = marrow::io::read_snapshot(&snap_path).unwrap();
    let mult = Multipliers::new(0.0);
    let with = problem.loss(&snap.vars, &mult).unwrap();
    let mut stripped = snap.vars.clone();
    stripped.gamma.fill(0.0);
    let without = problem.loss(&stripped, &mult).unwrap();
    println!(
        "with skeleton:    L_x = {:+.3} mm (D_s {:.2} mm, D_b {:.2} mm)",
        with.l_x * 1e3, with.d_soft * 1e3, with.d_bone * 1e3
    );
    println!(
        "without skeleton: L_x = {:+.3} mm (D_s {:.2} mm, D_b {:.2} mm)",
        without.l_x * 1e3, without.d_soft * 1e3, without.d_bone * 1e3
    );
    println!("ratio without/with = {:.3}", without.l_x / with.l_x);
}
