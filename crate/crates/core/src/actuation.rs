//! Solenoid model: Gaussian-pulse voltage synthesis, stroke-dependent force
//! attenuation, and the state-dependent stiffness switch of the slider bar.

use crate::math::{soft_clip, soft_clip_deriv};
use crate::scene::ActuatorUnit;

#[derive(Debug, Clone, Copy)]
pub struct VoltageParams {
    pub pulse_dt: f64,
    pub sigma: f64,
    pub amp: f64,
    pub ceiling: f64,
    pub clip_halfwidth: f64,
    pub n_pulses: usize,
}

impl VoltageParams {
    /// Pulse indices whose Gaussian meaningfully overlaps `t_cyc` (8 sigma).
    pub fn window(&self, t_cyc: f64) -> std::ops::Range<usize> {
        let lo = ((t_cyc - 8.0 * self.sigma) / self.pulse_dt).floor().max(0.0) as usize;
        let hi = (((t_cyc + 8.0 * self.sigma) / self.pulse_dt).ceil() as usize + 1)
            .min(self.n_pulses);
        lo..hi.max(lo)
    }

    /// Gaussian weight of pulse `k` at cycle-local time `t_cyc`.
    #[inline]
    pub fn pulse_weight(&self, k: usize, t_cyc: f64) -> f64 {
        let d = t_cyc - k as f64 * self.pulse_dt;
        self.amp * (-d * d / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Unclipped pulse superposition for one actuator row of `w`.
pub fn raw_pulse_sum(w_row: &[f64], t_cyc: f64, p: &VoltageParams) -> f64 {
    let mut s = 0.0;
    for k in p.window(t_cyc) {
        s += w_row[k] * p.pulse_weight(k, t_cyc);
    }
    s
}

/// Normalized voltage input: pulse superposition with a smooth ceiling clip.
pub fn synthesize_voltage(w_row: &[f64], t_cyc: f64, p: &VoltageParams) -> f64 {
    soft_clip(raw_pulse_sum(w_row, t_cyc, p), p.ceiling, p.clip_halfwidth)
}

/// Accumulate dL/dw for one actuator row given the adjoint of the voltage.
pub fn voltage_adjoint_into(
    w_row: &[f64],
    t_cyc: f64,
    p: &VoltageParams,
    v_adj: f64,
    w_adj_row: &mut [f64],
) {
    let s = raw_pulse_sum(w_row, t_cyc, p);
    let ds = soft_clip_deriv(s, p.ceiling, p.clip_halfwidth) * v_adj;
    for k in p.window(t_cyc) {
        w_adj_row[k] += ds * p.pulse_weight(k, t_cyc);
    }
}

/// Stroke attenuation: 1 when fully contracted, linear falloff while the core
/// exits the coil, 0 once disengaged.
pub fn stroke_attenuation(len: f64, unit: &ActuatorUnit) -> f64 {
    let engaged = unit.l0 - unit.dl;
    if len <= engaged {
        1.0
    } else if len >= engaged + unit.l_core {
        0.0
    } else {
        1.0 - (len - engaged) / unit.l_core
    }
}

/// Piecewise derivative of [`stroke_attenuation`] with respect to length.
pub fn stroke_attenuation_deriv(len: f64, unit: &ActuatorUnit) -> f64 {
    let engaged = unit.l0 - unit.dl;
    if len <= engaged || len >= engaged + unit.l_core {
        0.0
    } else {
        -1.0 / unit.l_core
    }
}

/// Contractile force magnitude between the slider endpoints.
pub fn solenoid_force(v_in: f64, len: f64, unit: &ActuatorUnit) -> f64 {
    unit.f_max * v_in * stroke_attenuation(len, unit)
}

/// Slider stiffness and reference length from the current length. Engagement
/// at the limit is inclusive (closed lower branch).
pub fn axial_state_switch(unit: &ActuatorUnit, len: f64) -> (f64, f64, bool) {
    let limit = unit.engaged_length();
    if len <= limit {
        (unit.kappa_act, limit, true)
    } else {
        (unit.kappa_free, unit.l0, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ActuatorUnit {
        ActuatorUnit {
            upper_node: 0,
            lower_node: 1,
            bridge_node: 2,
            axial_bars: [0, 1],
            lateral_bars: [2, 3],
            bridge_bars: [4, 5],
            l0: 0.065,
            dl: 0.015,
            l_core: 0.030,
            f_max: 10.0,
            kappa_free: 0.3,
            kappa_act: 3.0e8,
        }
    }

    fn params(n: usize) -> VoltageParams {
        VoltageParams {
            pulse_dt: 0.002,
            sigma: 0.01,
            amp: 0.2,
            ceiling: 1.0,
            clip_halfwidth: 0.05,
            n_pulses: n,
        }
    }

    #[test]
    fn zero_weights_zero_voltage() {
        let p = params(250);
        let w = vec![0.0; 250];
        for i in 0..50 {
            assert_eq!(synthesize_voltage(&w, i as f64 * 0.01, &p), 0.0);
        }
    }

    #[test]
    fn single_pulse_peak_is_amp() {
        let p = params(250);
        let mut w = vec![0.0; 250];
        w[100] = 1.0;
        let v = synthesize_voltage(&w, 100.0 * 0.002, &p);
        assert!((v - 0.2).abs() < 1e-15);
    }

    #[test]
    fn dense_pulses_match_direct_summation() {
        let p = params(250);
        let w = vec![1.0; 250];
        let t = 0.25;
        // dense Gaussian-sum oracle over every pulse
        let mut s = 0.0;
        for k in 0..250 {
            let d: f64 = t - k as f64 * 0.002;
            s += 0.2 * (-d * d / (2.0 * 0.01f64 * 0.01)).exp();
        }
        let raw = raw_pulse_sum(&w, t, &p);
        assert!((raw - s).abs() < 1e-9, "window truncation too aggressive");
        // overlapping pulses exceed the ceiling and get clipped
        assert!(s > 1.0);
        assert_eq!(synthesize_voltage(&w, t, &p), 1.0);
    }

    #[test]
    fn attenuation_breakpoints() {
        let u = unit();
        assert_eq!(stroke_attenuation(0.050, &u), 1.0);
        assert_eq!(stroke_attenuation(0.080, &u), 0.0);
        assert!((stroke_attenuation(0.065, &u) - 0.5).abs() < 1e-15);
        assert_eq!(stroke_attenuation(0.040, &u), 1.0);
        assert_eq!(stroke_attenuation(0.120, &u), 0.0);
    }

    #[test]
    fn attenuation_is_monotone_and_bounded() {
        let u = unit();
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let len = 0.02 + i as f64 * 0.0006;
            let eta = stroke_attenuation(len, &u);
            assert!((0.0..=1.0).contains(&eta));
            assert!(eta <= prev + 1e-15);
            prev = eta;
        }
    }

    #[test]
    fn force_product_law() {
        let u = unit();
        assert_eq!(solenoid_force(1.0, 0.045, &u), 10.0);
        assert_eq!(solenoid_force(0.0, 0.045, &u), 0.0);
        // eta = 0.5 at mid-stroke
        assert!((solenoid_force(0.5, 0.065, &u) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn switch_states() {
        let u = unit();
        let (k, lref, engaged) = axial_state_switch(&u, 0.066);
        assert_eq!((k, lref, engaged), (0.3, 0.065, false));
        let (k, lref, engaged) = axial_state_switch(&u, 0.049);
        assert_eq!((k, lref, engaged), (3.0e8, 0.050, true));
        // exactly at the threshold: engaged
        let (_, _, engaged) = axial_state_switch(&u, 0.050);
        assert!(engaged);
    }

    #[test]
    fn free_slider_force_is_small_against_f_max() {
        // Static constraint force of the free slider at full stroke:
        // g * kappa_free / L0. With the published kappa_free this is about
        // 0.07 N, i.e. under 1% of F_max.
        let u = unit();
        let bound = u.kappa_free * u.dl / u.l0;
        assert!(bound < 0.01 * u.f_max);
        let mut xa = crate::math::Vec3::new(0.0, 0.0, u.l0 + u.dl);
        let mut xb = crate::math::Vec3::zeros();
        let mut lambda = 0.0;
        let dt = 2e-5;
        let inv_m = 1.0 / 0.016;
        crate::xpbd::project_distance_constraint(
            &mut xa, &mut xb, inv_m, 0.0, u.l0, u.kappa_free, &mut lambda, dt,
        );
        let force = lambda.abs() / (dt * dt);
        assert!(force <= bound * (1.0 + 1e-6), "force {force} > bound {bound}");
    }

    #[test]
    fn voltage_adjoint_matches_fd() {
        let p = params(50);
        let mut w = vec![0.0; 50];
        for (i, v) in w.iter_mut().enumerate() {
            *v = 0.5 + 0.4 * ((i as f64) * 0.7).sin();
        }
        let t = 0.043;
        let mut adj = vec![0.0; 50];
        voltage_adjoint_into(&w, t, &p, 1.0, &mut adj);
        let h = 1e-6;
        for k in 15..30 {
            let mut wp = w.clone();
            wp[k] += h;
            let mut wm = w.clone();
            wm[k] -= h;
            let fd =
                (synthesize_voltage(&wp, t, &p) - synthesize_voltage(&wm, t, &p)) / (2.0 * h);
            assert!((adj[k] - fd).abs() < 1e-7, "pulse {k}: {} vs {fd}", adj[k]);
        }
    }
}
