// Search sparse leg-like skeleton subsets and burst gaits for a desk-scale
// configuration where the skeleton at least doubles locomotion.
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

    // designable index of the left-lattice bar with local endpoints (a, b)
    let find = |a: usize, b: usize| -> usize {
        problem
            .gs
            .designable_bars
            .iter()
            .position(|&bi| {
                let bar = &problem.gs.bars[bi];
                (bar.a == a && bar.b == b) || (bar.a == b && bar.b == a)
            })
            .unwrap_or_else(|| panic!("no designable bar ({a},{b})"))
    };

    let subsets: Vec<(&str, Vec<(usize, usize)>)> = vec![
        (
            "legs+chord",
            vec![
                (9, 10), (10, 11), (11, 12), (12, 13),
                (0, 5), (5, 9), (4, 8), (8, 13),
                (0, 1), (3, 4),
            ],
        ),
        (
            "tri-legs",
            vec![
                (0, 5), (1, 5), (5, 9), (5, 10),
                (3, 8), (4, 8), (8, 12), (8, 13),
                (10, 11), (11, 12),
            ],
        ),
        (
            "verticals",
            vec![
                (9, 10), (10, 11), (11, 12), (12, 13),
                (0, 5), (5, 9), (2, 6), (6, 10), (4, 8), (8, 13),
            ],
        ),
        (
            "feet-only",
            vec![(0, 5), (5, 9), (4, 8), (8, 13)],
        ),
    ];

    for (name, pairs) in &subsets {
        let mut best: Option<(f64, f64, usize, usize)> = None;
        for period in [50usize, 42, 36, 30, 25] {
            for delay_frac in [0.3f64, 0.5] {
                let delay = (period as f64 * delay_frac).round() as usize;
                let mut vars = problem.initial_vars();
                vars.gamma.fill(0.0);
                for &(a, b) in pairs {
                    let g = find(a, b);
                    vars.gamma[g] = 1.0;
                    vars.gamma[g + half] = 1.0;
                }
                let rear = burst(n, period, 6, 0);
                let front = burst(n, period, 6, delay);
                vars.w[..n].copy_from_slice(&rear);
                vars.w[n..].copy_from_slice(&front);
                let with = match problem.loss(&vars, &mult) {
                    Ok(r) => r.l_x,
                    Err(_) => continue,
                };
                let mut bare = vars.clone();
                bare.gamma.fill(0.0);
                let without = match problem.loss(&bare, &mult) {
                    Ok(r) => r.l_x,
                    Err(_) => continue,
                };
                let better = match best {
                    None => true,
                    Some((bw, bo, _, _)) => (with - 2.0 * without) > (bw - 2.0 * bo),
                };
                if better {
                    best = Some((with, without, period, delay));
                }
                println!(
                    "{name:10} period {period:2} delay {delay:2}: with {:+7.3} mm, without {:+7.3} mm",
                    with * 1e3,
                    without * 1e3
                );
            }
        }
        if let Some((w, wo, p, d)) = best {
            println!(
                "== {name}: best period {p} delay {d}: with {:+.3} mm vs without {:+.3} mm (ratio {:.2})\n",
                w * 1e3,
                wo * 1e3,
                wo / w
            );
        }
    }
}
