//! Small numeric helpers shared by the solvers.

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Quadratic B-spline weights per axis for a sample at fractional offset `fx`
/// from the stencil base node, with `fx` in `[0.5, 1.5)`.
#[inline]
pub fn bspline_weights(fx: f64) -> [f64; 3] {
    [
        0.5 * (1.5 - fx) * (1.5 - fx),
        0.75 - (fx - 1.0) * (fx - 1.0),
        0.5 * (fx - 0.5) * (fx - 0.5),
    ]
}

/// Derivatives of [`bspline_weights`] with respect to `fx`.
#[inline]
pub fn bspline_weight_derivs(fx: f64) -> [f64; 3] {
    [-(1.5 - fx), -2.0 * (fx - 1.0), fx - 0.5]
}

/// Stencil base index and fractional offsets for a position, `h` = cell size.
/// Returns `None` when the 3x3x3 stencil would leave `[0, cells)` on any axis.
#[inline]
pub fn stencil_base(pos: &Vec3, h: f64, cells: [usize; 3]) -> Option<([i64; 3], Vec3)> {
    let mut base = [0i64; 3];
    let mut fx = Vec3::zeros();
    for a in 0..3 {
        let s = pos[a] / h;
        let b = (s - 0.5).floor();
        let f = s - b;
        if !(0.5..1.5).contains(&f) {
            // only possible through NaN/Inf positions
            return None;
        }
        if b < 0.0 || b + 2.0 >= cells[a] as f64 {
            return None;
        }
        base[a] = b as i64;
        fx[a] = f;
    }
    Some((base, fx))
}

/// C1 soft minimum against a ceiling: identity below `c - delta`, constant
/// `c` above `c + delta`, quadratic blend in between. Exact at 0, which a
/// logistic softmin is not.
#[inline]
pub fn soft_clip(x: f64, c: f64, delta: f64) -> f64 {
    if x <= c - delta {
        x
    } else if x >= c + delta {
        c
    } else {
        let t = x - (c - delta);
        x - t * t / (4.0 * delta)
    }
}

/// Derivative of [`soft_clip`] with respect to `x`.
#[inline]
pub fn soft_clip_deriv(x: f64, c: f64, delta: f64) -> f64 {
    if x <= c - delta {
        1.0
    } else if x >= c + delta {
        0.0
    } else {
        1.0 - (x - (c - delta)) / (2.0 * delta)
    }
}

/// FNV-1a over the little-endian bit patterns of a float slice. Used for
/// checkpoint integrity checks; bit-exact by construction.
pub fn digest_f64(values: impl Iterator<Item = f64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
    }
    h
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(mut a: f64) -> f64 {
    use std::f64::consts::PI;
    while a > PI {
        a -= 2.0 * PI;
    }
    while a <= -PI {
        a += 2.0 * PI;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weights_at_node_center() {
        // particle exactly on a grid node: fx = 1 relative to the base
        let w = bspline_weights(1.0);
        assert_eq!(w[1], 0.75);
        assert_eq!(w[0], 0.125);
        assert_eq!(w[2], 0.125);
    }

    #[test]
    fn soft_clip_endpoints() {
        assert_eq!(soft_clip(0.0, 1.0, 0.05), 0.0);
        assert_eq!(soft_clip(0.2, 1.0, 0.05), 0.2);
        assert_eq!(soft_clip(2.0, 1.0, 0.05), 1.0);
        // C1 at the blend boundaries
        let eps = 1e-9;
        let d = (soft_clip(0.95 + eps, 1.0, 0.05) - soft_clip(0.95 - eps, 1.0, 0.05)) / (2.0 * eps);
        assert!((d - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn weights_partition_of_unity(fx in 0.5f64..1.5) {
            let w = bspline_weights(fx);
            let sum: f64 = w.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn weight_derivs_match_fd(fx in 0.51f64..1.49) {
            let h = 1e-7;
            let wp = bspline_weights(fx + h);
            let wm = bspline_weights(fx - h);
            let d = bspline_weight_derivs(fx);
            for i in 0..3 {
                let fd = (wp[i] - wm[i]) / (2.0 * h);
                prop_assert!((d[i] - fd).abs() < 1e-6);
            }
        }
    }
}
