// Scan hand-built alternating pulse gaits on the desk scene: rear/front
// bursts at a few frequencies and phase delays, full vs no skeleton.
use marrow::objective::Multipliers;

fn burst_pattern(n_pulses: usize, period_slots: usize, width: usize, offset: usize) -> Vec<f64> {
    let mut w = vec![0.0; n_pulses];
    let mut start = offset;
    while start < n_pulses {
        for k in 0..width {
            if start + k < n_pulses {
                w[start + k] = 1.0;
            }
        }
        start += period_slots;
    }
    w
}

fn main() {
    let problem = marrow::problem::Problem::load("scenes/desk.toml").unwrap();
    let mult = Multipliers::new(0.0);
    let n = problem.n_pulses;
    for (label, gamma_val) in [("skeleton", 1.0f64), ("no-skel ", 0.0)] {
        for period in [25usize, 16, 12] {
            for delay in [0usize, period / 4, period / 2] {
                let mut vars = problem.initial_vars();
                vars.gamma.fill(gamma_val);
                let rear = burst_pattern(n, period, 5, 0);
                let front = burst_pattern(n, period, 5, delay);
                // actuator 0 at x=0.22 (rear), actuator 1 at x=0.26 (front)
                vars.w[..n].copy_from_slice(&rear);
                vars.w[n..].copy_from_slice(&front);
                match problem.loss(&vars, &mult) {
                    Ok(r) => println!(
                        "{label} period={period:2} ({:4.1} Hz) delay={delay:2} -> L_x = {:+7.2} mm  D_s={:.1}mm D_b={:.1}mm",
                        1.0 / (period as f64 * 0.002),
                        r.l_x * 1e3,
                        r.d_soft * 1e3,
                        r.d_bone * 1e3
                    ),
                    Err(e) => println!("{label} period={period:2} delay={delay:2} -> FAILED: {e}"),
                }
            }
        }
    }
}
