//! Hand-written adjoint of one coupled step. Each section mirrors the
//! corresponding forward kernel in reverse order; branchy operations (floor
//! contact, buckling cap, actuator switch, gather test) differentiate the
//! branch the forward pass took.

use crate::actuation::stroke_attenuation_deriv;
use crate::math::{bspline_weight_derivs, bspline_weights, stencil_base, Mat3, Vec3};
use crate::mpm::{compute_stress, stress_momentum_scale, GridField};
use crate::stepper::{SimContext, SimState, StepRecord, StiffnessBranch};

/// Adjoint of the dynamic state (same shape as the state itself).
#[derive(Debug, Clone, Default)]
pub struct AdjointState {
    pub px: Vec<Vec3>,
    pub pv: Vec<Vec3>,
    pub pc: Vec<Mat3>,
    pub pf: Vec<Mat3>,
    pub nx: Vec<Vec3>,
    pub nv: Vec<Vec3>,
}

impl AdjointState {
    pub fn zeros(n_particles: usize, n_nodes: usize) -> Self {
        AdjointState {
            px: vec![Vec3::zeros(); n_particles],
            pv: vec![Vec3::zeros(); n_particles],
            pc: vec![Mat3::zeros(); n_particles],
            pf: vec![Mat3::zeros(); n_particles],
            nx: vec![Vec3::zeros(); n_nodes],
            nv: vec![Vec3::zeros(); n_nodes],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.px.iter().chain(&self.pv).chain(&self.nx).chain(&self.nv).all(|v| {
            v.x.is_finite() && v.y.is_finite() && v.z.is_finite()
        }) && self
            .pc
            .iter()
            .chain(&self.pf)
            .all(|m| m.iter().all(|x| x.is_finite()))
    }
}

/// Accumulated adjoints of the per-iteration parameters.
#[derive(Debug, Clone, Default)]
pub struct ParamAdjoints {
    pub p_mass: Vec<f64>,
    pub p_mu: Vec<f64>,
    pub p_lambda: Vec<f64>,
    pub n_mass: Vec<f64>,
    pub bar_kappa: Vec<f64>,
    /// Step-major, `[(step * n_act) + a]`, matching the voltage table.
    pub v_in: Vec<f64>,
}

impl ParamAdjoints {
    pub fn zeros(n_particles: usize, n_nodes: usize, n_bars: usize, v_len: usize) -> Self {
        ParamAdjoints {
            p_mass: vec![0.0; n_particles],
            p_mu: vec![0.0; n_particles],
            p_lambda: vec![0.0; n_particles],
            n_mass: vec![0.0; n_nodes],
            bar_kappa: vec![0.0; n_bars],
            v_in: vec![0.0; v_len],
        }
    }
}

/// Scratch buffers reused across steps.
pub struct AdjointBuffers {
    gm: Vec<f64>,
    gmom: Vec<Vec3>,
    gvel: Vec<Vec3>,
    f_ext: Vec<Vec3>,
    v_star: Vec<Vec3>,
    pos: Vec<Vec3>,
    nx_new: Vec<Vec3>,
    nv_new: Vec<Vec3>,
    px_new: Vec<Vec3>,
    pv_new: Vec<Vec3>,
    pc_new: Vec<Mat3>,
    pf_new: Vec<Mat3>,
}

impl AdjointBuffers {
    pub fn new(grid_nodes: usize, n_particles: usize, n_nodes: usize) -> Self {
        AdjointBuffers {
            gm: vec![0.0; grid_nodes],
            gmom: vec![Vec3::zeros(); grid_nodes],
            gvel: vec![Vec3::zeros(); grid_nodes],
            f_ext: vec![Vec3::zeros(); n_nodes],
            v_star: vec![Vec3::zeros(); n_nodes],
            pos: vec![Vec3::zeros(); n_nodes],
            nx_new: vec![Vec3::zeros(); n_nodes],
            nv_new: vec![Vec3::zeros(); n_nodes],
            px_new: vec![Vec3::zeros(); n_particles],
            pv_new: vec![Vec3::zeros(); n_particles],
            pc_new: vec![Mat3::zeros(); n_particles],
            pf_new: vec![Mat3::zeros(); n_particles],
        }
    }
}

/// Per-axis weight and gradient factors of the quadratic stencil.
struct StencilWeights {
    w: [[f64; 3]; 3],
    dw: [[f64; 3]; 3],
    inv_h: f64,
}

impl StencilWeights {
    fn at(fx: &Vec3, h: f64) -> Self {
        StencilWeights {
            w: [
                bspline_weights(fx.x),
                bspline_weights(fx.y),
                bspline_weights(fx.z),
            ],
            dw: [
                bspline_weight_derivs(fx.x),
                bspline_weight_derivs(fx.y),
                bspline_weight_derivs(fx.z),
            ],
            inv_h: 1.0 / h,
        }
    }

    #[inline]
    fn weight(&self, di: usize, dj: usize, dk: usize) -> f64 {
        self.w[0][di] * self.w[1][dj] * self.w[2][dk]
    }

    /// Gradient of the 3d weight with respect to the sample position.
    #[inline]
    fn grad(&self, di: usize, dj: usize, dk: usize) -> Vec3 {
        Vec3::new(
            self.dw[0][di] * self.w[1][dj] * self.w[2][dk],
            self.w[0][di] * self.dw[1][dj] * self.w[2][dk],
            self.w[0][di] * self.w[1][dj] * self.dw[2][dk],
        ) * self.inv_h
    }
}

/// Pull the adjoint of the post-step state back through one step.
///
/// `pre` is the state before the step, `rec` the forward intermediates, and
/// `grid` the grid as `step_core` left it (post-scatter mass and momentum,
/// post-update velocity). On return `adj` holds the adjoint of the pre-step
/// state and `params` has this step's parameter contributions added.
#[allow(clippy::too_many_arguments)]
pub fn adjoint_step(
    pre: &SimState,
    rec: &StepRecord,
    grid: &GridField,
    ctx: &SimContext,
    adj: &mut AdjointState,
    params: &mut ParamAdjoints,
    buf: &mut AdjointBuffers,
    step: usize,
) {
    let dt = ctx.dt;
    let dx = grid.dx;
    let n_nodes = pre.net.n_nodes();
    let n_particles = pre.particles.len();

    for &idx in grid.touched_nodes() {
        buf.gm[idx as usize] = 0.0;
        buf.gmom[idx as usize] = Vec3::zeros();
        buf.gvel[idx as usize] = Vec3::zeros();
    }
    for i in 0..n_nodes {
        buf.f_ext[i] = Vec3::zeros();
        buf.v_star[i] = Vec3::zeros();
        buf.pos[i] = Vec3::zeros();
        buf.nx_new[i] = Vec3::zeros();
        buf.nv_new[i] = Vec3::zeros();
    }
    for p in 0..n_particles {
        buf.px_new[p] = Vec3::zeros();
        buf.pv_new[p] = Vec3::zeros();
        buf.pc_new[p] = Mat3::zeros();
        buf.pf_new[p] = Mat3::zeros();
    }

    // ---- (6R) node gather ----
    for i in 0..n_nodes {
        if pre.net.pinned[i] {
            buf.nx_new[i] += adj.nx[i];
            buf.nv_new[i] += adj.nv[i];
            continue;
        }
        let v_hat = adj.nv[i] + dt * adj.nx[i];
        buf.nx_new[i] += adj.nx[i];
        if rec.gathered[i] {
            let (base, fx) = stencil_base(&pre.net.x[i], dx, grid.cells)
                .expect("gathered node has a stencil");
            let sw = StencilWeights::at(&fx, dx);
            for di in 0..3 {
                for dj in 0..3 {
                    for dk in 0..3 {
                        let idx = grid.index(
                            base[0] + di as i64,
                            base[1] + dj as i64,
                            base[2] + dk as i64,
                        );
                        let w = sw.weight(di, dj, dk);
                        buf.gvel[idx] += w * v_hat;
                        buf.nx_new[i] += sw.grad(di, dj, dk) * grid.velocity[idx].dot(&v_hat);
                    }
                }
            }
        } else {
            buf.v_star[i] += v_hat;
        }
    }

    // ---- (5R) G2P ----
    let inv_d = 4.0 / (dx * dx);
    for p in 0..n_particles {
        let (base, fx) =
            stencil_base(&pre.particles.x[p], dx, grid.cells).expect("particle in grid");
        let sw = StencilWeights::at(&fx, dx);
        // recompute the gathered C to form (I + dt*C_new)
        let mut c_new = Mat3::zeros();
        for di in 0..3 {
            for dj in 0..3 {
                for dk in 0..3 {
                    let idx = grid.index(
                        base[0] + di as i64,
                        base[1] + dj as i64,
                        base[2] + dk as i64,
                    );
                    let w = sw.weight(di, dj, dk);
                    let dpos = Vec3::new(
                        (di as f64 - fx.x) * dx,
                        (dj as f64 - fx.y) * dx,
                        (dk as f64 - fx.z) * dx,
                    );
                    c_new += (w * inv_d) * grid.velocity[idx] * dpos.transpose();
                }
            }
        }
        let f_old = pre.particles.f[p];
        let f_hat_post = adj.pf[p];
        let c_hat = adj.pc[p] + dt * f_hat_post * f_old.transpose();
        buf.pf_new[p] += (Mat3::identity() + dt * c_new).transpose() * f_hat_post;
        let v_hat = adj.pv[p] + dt * adj.px[p];
        buf.px_new[p] += adj.px[p];
        for di in 0..3 {
            for dj in 0..3 {
                for dk in 0..3 {
                    let idx = grid.index(
                        base[0] + di as i64,
                        base[1] + dj as i64,
                        base[2] + dk as i64,
                    );
                    let w = sw.weight(di, dj, dk);
                    let dpos = Vec3::new(
                        (di as f64 - fx.x) * dx,
                        (dj as f64 - fx.y) * dx,
                        (dk as f64 - fx.z) * dx,
                    );
                    let gv = grid.velocity[idx];
                    buf.gvel[idx] += w * (v_hat + inv_d * c_hat * dpos);
                    let scalar = gv.dot(&v_hat) + inv_d * gv.dot(&(c_hat * dpos));
                    buf.px_new[p] += sw.grad(di, dj, dk) * scalar
                        - (w * inv_d) * (c_hat.transpose() * gv);
                }
            }
        }
    }

    // ---- (4R) grid update ----
    let cells = grid.cells;
    let margin = ctx.boundary_margin;
    for &idx_u in grid.touched_nodes() {
        let idx = idx_u as usize;
        let m = grid.mass[idx];
        if m <= 0.0 {
            continue;
        }
        let vf_hat = buf.gvel[idx];
        if vf_hat == Vec3::zeros() {
            continue;
        }
        let (i, j, k) = grid.node_coords(idx);
        let near = |c: usize, n: usize| c < margin || c + margin >= n;
        if near(i, cells[0]) || near(j, cells[1]) || near(k, cells[2]) {
            continue;
        }
        let v1 = grid.momentum[idx] / m + ctx.gravity * dt;
        let mut v_hat = vf_hat;
        if let Some(fh) = ctx.floor_height {
            let z = k as f64 * dx;
            if z <= fh + 1e-12 && v1.z < 0.0 {
                let vt = (v1.x * v1.x + v1.y * v1.y).sqrt();
                if vt > 0.0 {
                    let red = ctx.friction_mu * (-v1.z);
                    if red >= vt {
                        v_hat = Vec3::zeros();
                    } else {
                        let s = 1.0 - red / vt;
                        let common = vf_hat.x * v1.x + vf_hat.y * v1.y;
                        v_hat = Vec3::new(
                            s * vf_hat.x + common * red * v1.x / (vt * vt * vt),
                            s * vf_hat.y + common * red * v1.y / (vt * vt * vt),
                            common * ctx.friction_mu / vt,
                        );
                    }
                } else {
                    v_hat = Vec3::new(vf_hat.x, vf_hat.y, 0.0);
                }
            }
        }
        let v_raw = grid.momentum[idx] / m;
        buf.gmom[idx] += v_hat / m;
        buf.gm[idx] -= v_hat.dot(&v_raw) / m;
    }

    // ---- (3R) node scatter ----
    for i in 0..n_nodes {
        if pre.net.pinned[i] || !rec.scattered[i] {
            continue;
        }
        let (base, fx) =
            stencil_base(&pre.net.x[i], dx, grid.cells).expect("scattered node has a stencil");
        let sw = StencilWeights::at(&fx, dx);
        let m = pre.net.mass[i];
        let vs = rec.v_star[i];
        for di in 0..3 {
            for dj in 0..3 {
                for dk in 0..3 {
                    let idx = grid.index(
                        base[0] + di as i64,
                        base[1] + dj as i64,
                        base[2] + dk as i64,
                    );
                    let w = sw.weight(di, dj, dk);
                    let (gm_hat, gmom_hat) = (buf.gm[idx], buf.gmom[idx]);
                    buf.v_star[i] += w * m * gmom_hat;
                    params.n_mass[i] += w * (gm_hat + vs.dot(&gmom_hat));
                    buf.nx_new[i] +=
                        sw.grad(di, dj, dk) * (m * gm_hat + m * vs.dot(&gmom_hat));
                }
            }
        }
    }

    // ---- v* = clamp((x_proj - x_prev) / dt) ----
    let v_star_cap = 0.5 * ctx.blowup_cap;
    for i in 0..n_nodes {
        if pre.net.pinned[i] {
            continue;
        }
        let mut vs_hat = buf.v_star[i];
        let raw = (rec.x_proj[i] - pre.net.x[i]) / dt;
        let norm = raw.norm();
        if norm > v_star_cap {
            // v* = c * raw/|raw|: Jacobian (c/|raw|) (I - r r^T)
            let r = raw / norm;
            vs_hat = (v_star_cap / norm) * (vs_hat - r * r.dot(&vs_hat));
        }
        buf.pos[i] = vs_hat / dt;
        buf.nx_new[i] -= vs_hat / dt;
    }

    // ---- projection sweep in reverse bar order ----
    for b in (0..pre.net.bars.len()).rev() {
        let r = &rec.bars[b];
        if r.skipped {
            continue;
        }
        let bar = &pre.net.bars[b];
        let (ai, bi) = (bar.a, bar.b);
        let (wa, wb) = (pre.net.inv_mass[ai], pre.net.inv_mass[bi]);
        let u = r.xa - r.xb;
        let len = u.norm();
        let n = u / len;
        let g = len - r.l_ref;
        let alpha = r.l_ref / (r.kappa_eff * dt * dt);
        let denom = wa + wb + alpha;
        let dl = r.delta_lambda;

        let (xa_hat, xb_hat) = (buf.pos[ai], buf.pos[bi]);
        let c_dl = wa * xa_hat.dot(&n) - wb * xb_hat.dot(&n);
        let n_hat = dl * (wa * xa_hat - wb * xb_hat);

        let d_dl_ddenom = g / (denom * denom);
        let dkappa_dlen = match r.branch {
            StiffnessBranch::BucklingCap => r.kappa_eff / (r.l_ref - len),
            _ => 0.0,
        };
        let dalpha_dkappa = -alpha / r.kappa_eff;
        let d_dl_dlen = -1.0 / denom + d_dl_ddenom * dalpha_dkappa * dkappa_dlen;

        let u_hat = (n_hat - n * n.dot(&n_hat)) / len + (c_dl * d_dl_dlen) * n;
        buf.pos[ai] = xa_hat + u_hat;
        buf.pos[bi] = xb_hat - u_hat;

        if wa > 0.0 {
            let wa_hat = dl * xa_hat.dot(&n) + c_dl * d_dl_ddenom;
            params.n_mass[ai] -= wa_hat * wa * wa;
        }
        if wb > 0.0 {
            let wb_hat = -dl * xb_hat.dot(&n) + c_dl * d_dl_ddenom;
            params.n_mass[bi] -= wb_hat * wb * wb;
        }
        if r.branch == StiffnessBranch::Design {
            params.bar_kappa[b] += c_dl * d_dl_ddenom * dalpha_dkappa;
        }
    }

    // ---- predict ----
    for i in 0..n_nodes {
        let xp_hat = buf.pos[i];
        if pre.net.pinned[i] {
            buf.nx_new[i] += xp_hat;
            continue;
        }
        buf.nx_new[i] += xp_hat;
        let vp_hat = dt * xp_hat;
        buf.nv_new[i] += vp_hat;
        let w = pre.net.inv_mass[i];
        buf.f_ext[i] = dt * vp_hat * w;
        params.n_mass[i] -= dt * vp_hat.dot(&rec.f_ext[i]) * w * w;
    }

    // ---- actuator forces and switch ----
    for (u_idx, unit) in ctx.units.iter().enumerate() {
        let r = &rec.units[u_idx];
        if r.len <= 0.0 {
            continue;
        }
        let fu_hat = buf.f_ext[unit.upper_node];
        let fl_hat = buf.f_ext[unit.lower_node];
        let df = fl_hat - fu_hat;
        let force_hat = df.dot(&r.dir);
        let dir_hat = r.force * df;
        if ctx.n_act > 0 {
            params.v_in[step * ctx.n_act + u_idx] += force_hat * unit.f_max * r.eta;
        }
        let eta_hat = force_hat * unit.f_max * r.v_in;
        let len_hat = eta_hat * stroke_attenuation_deriv(r.len, unit);
        let u_hat = (dir_hat - r.dir * r.dir.dot(&dir_hat)) / r.len + len_hat * r.dir;
        buf.nx_new[unit.upper_node] += u_hat;
        buf.nx_new[unit.lower_node] -= u_hat;
    }

    // ---- (1R) P2G and stress ----
    let scale = stress_momentum_scale(pre.particles.volume0, dt, dx);
    for p in 0..n_particles {
        let (base, fx) =
            stencil_base(&pre.particles.x[p], dx, grid.cells).expect("particle in grid");
        let sw = StencilWeights::at(&fx, dx);
        let m = pre.particles.mass[p];
        let v = pre.particles.v[p];
        let c = pre.particles.c[p];
        let f = pre.particles.f[p];
        let (mu, la) = (pre.particles.mu[p], pre.particles.lambda[p]);
        let sigma = compute_stress(&f, &c, mu, la, ctx.eta_visc)
            .expect("replayed stress must be valid");
        let affine = m * c + scale * sigma;

        let mut v_hat = Vec3::zeros();
        let mut a_hat = Mat3::zeros();
        let mut m_hat = 0.0;
        let mut x_acc = Vec3::zeros();
        for di in 0..3 {
            for dj in 0..3 {
                for dk in 0..3 {
                    let idx = grid.index(
                        base[0] + di as i64,
                        base[1] + dj as i64,
                        base[2] + dk as i64,
                    );
                    let w = sw.weight(di, dj, dk);
                    let dpos = Vec3::new(
                        (di as f64 - fx.x) * dx,
                        (dj as f64 - fx.y) * dx,
                        (dk as f64 - fx.z) * dx,
                    );
                    let (gm_hat, gmom_hat) = (buf.gm[idx], buf.gmom[idx]);
                    v_hat += w * m * gmom_hat;
                    a_hat += w * gmom_hat * dpos.transpose();
                    m_hat += w * gm_hat
                        + w * v.dot(&gmom_hat)
                        + w * (c * dpos).dot(&gmom_hat);
                    x_acc += sw.grad(di, dj, dk)
                        * (m * gm_hat + (m * v + affine * dpos).dot(&gmom_hat))
                        - w * (affine.transpose() * gmom_hat);
                }
            }
        }
        buf.pv_new[p] += v_hat;
        buf.px_new[p] += x_acc;
        params.p_mass[p] += m_hat;

        let sigma_hat = scale * a_hat;
        buf.pc_new[p] += m * a_hat;
        // viscous part
        buf.pc_new[p] += ctx.eta_visc
            * (sigma_hat + sigma_hat.transpose()
                - (2.0 / 3.0) * sigma_hat.trace() * Mat3::identity());
        // elastic part
        let j = f.determinant();
        let c1 = mu / j;
        let f_ft = f * f.transpose();
        let c1_hat = sigma_hat.dot(&f_ft);
        let c2_hat = sigma_hat.trace();
        let mut f_hat = c1 * (sigma_hat + sigma_hat.transpose()) * f;
        let j_hat = c1_hat * (-mu / (j * j)) + c2_hat * (la * (1.0 - j.ln()) + mu) / (j * j);
        let f_inv_t = f
            .try_inverse()
            .expect("det(F) > 0 on the forward path")
            .transpose();
        f_hat += j_hat * j * f_inv_t;
        buf.pf_new[p] += f_hat;
        params.p_mu[p] += c1_hat / j - c2_hat / j;
        params.p_lambda[p] += c2_hat * j.ln() / j;
    }

    std::mem::swap(&mut adj.px, &mut buf.px_new);
    std::mem::swap(&mut adj.pv, &mut buf.pv_new);
    std::mem::swap(&mut adj.pc, &mut buf.pc_new);
    std::mem::swap(&mut adj.pf, &mut buf.pf_new);
    std::mem::swap(&mut adj.nx, &mut buf.nx_new);
    std::mem::swap(&mut adj.nv, &mut buf.nv_new);
}
