use marrow::objective::Multipliers;
use marrow::problem::Problem;

fn burst(n: usize, period: usize, width: usize, offset: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    let mut s = offset;
    while s < n {
        for k in 0..width.min(n - s) {
            w[s + k] = 1.0;
        }
        s += period;
    }
    w
}

fn main() {
    let problem = Problem::load("scenes/desk.toml").unwrap();
    let n = problem.n_pulses;
    let mult = Multipliers::new(0.0);
    let half = problem.n_designable() / 2;
    let find = |a: usize, b: usize| -> usize {
        problem
            .gs
            .designable_bars
            .iter()
            .position(|&bi| {
                let bar = &problem.gs.bars[bi];
                (bar.a == a && bar.b == b) || (bar.a == b && bar.b == a)
            })
            .unwrap()
    };
    let pairs = [
        (9usize, 10usize), (10, 11), (11, 12), (12, 13),
        (0, 5), (5, 9), (4, 8), (8, 13),
        (0, 1), (3, 4),
    ];
    for period in [46usize, 50, 56] {
        for delay_frac in [0.25f64, 0.3, 0.35] {
            for width in [4usize, 6, 8] {
                let delay = (period as f64 * delay_frac).round() as usize;
                let mut vars = problem.initial_vars();
                vars.gamma.fill(0.0);
                for &(a, b) in &pairs {
                    let g = find(a, b);
                    vars.gamma[g] = 1.0;
                    vars.gamma[g + half] = 1.0;
                }
                vars.w[..n].copy_from_slice(&burst(n, period, width, 0));
                vars.w[n..].copy_from_slice(&burst(n, period, width, delay));
                let with = problem.loss(&vars, &mult).map(|r| r.l_x).unwrap_or(f64::NAN);
                let mut bare = vars.clone();
                bare.gamma.fill(0.0);
                let without = problem.loss(&bare, &mult).map(|r| r.l_x).unwrap_or(f64::NAN);
                println!(
                    "p {period:2} d {delay:2} w {width}: with {:+7.3} mm, without {:+7.3} mm, ratio {:+.2}",
                    with * 1e3,
                    without * 1e3,
                    without / with
                );
            }
        }
    }
}
