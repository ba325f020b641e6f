//! Newton polish of a primal-dual pair on the KKT system of its active set.
//!
//! The recovered primal inherits the accuracy of the dual iterate, which is
//! roughly the square root of the dual-value accuracy. Fixing the active set
//! read off the pair and solving the remaining smooth square system restores
//! full precision.

use crate::dual::{DualPoint, Routes};
use crate::model::{rate, Allocation, Link, SystemParams};

const NV: usize = 9;
const NY: usize = 6;

/// Primal variables `[τ1, τ2, τ3, P1, P2, P3, l_u, l_h, l_a]` and multipliers
/// `[λ1, λ2, λ3, μ1, μ2, ν]`, `ν` pricing the helper frequency cap.
struct System<'a> {
    p: &'a SystemParams,
    free: [bool; NV],
    active: [bool; NY],
    v0: [f64; NV],
    /// Values of the multipliers that are not unknowns.
    y0: [f64; NY],
    vscale: [f64; NV],
    yscale: [f64; NY],
    gscale: [f64; NV],
    cscale: [f64; NY],
}

fn dr(link: Link, power: f64, p: &SystemParams) -> f64 {
    let a = p.snr_per_watt(link);
    p.bandwidth / std::f64::consts::LN_2 * a / (1.0 + power * a)
}

impl System<'_> {
    fn gradient(&self, v: &[f64; NV], y: &[f64; NY]) -> [f64; NV] {
        let p = self.p;
        let t = p.block;
        let [tau1, _, _, p1, p2, p3, lu, lh, _] = *v;
        let [l1, l2, l3, m1, m2, nu] = *y;
        let kh = p.kappa_h * p.c_h.powi(3);
        let w = t - tau1;
        [
            p1 + 2.0 * kh * lh.powi(3) / w.powi(3) - l1 * rate(Link::UserHelper, p1, p) + m1 + nu * p.f_h_max,
            p2 - l2 * rate(Link::UserAp, p2, p) - l3 * rate(Link::UserHelper, p2, p) + m1,
            p3 - l2 * rate(Link::HelperAp, p3, p) + m1,
            // Power derivatives divided by their slot length.
            1.0 - l1 * dr(Link::UserHelper, p1, p),
            1.0 - l2 * dr(Link::UserAp, p2, p) - l3 * dr(Link::UserHelper, p2, p),
            1.0 - l2 * dr(Link::HelperAp, p3, p),
            3.0 * p.kappa_u * p.c_u.powi(3) * lu * lu / (t * t) - m2,
            3.0 * kh * lh * lh / (w * w) + l1 - m2 + nu * p.c_h,
            l2 + l3 + m1 * p.ap_secs_per_bit() - m2,
        ]
    }

    fn constraints(&self, v: &[f64; NV]) -> [f64; NY] {
        let p = self.p;
        let t = p.block;
        let [tau1, tau2, tau3, p1, p2, p3, lu, lh, la] = *v;
        [
            lh - tau1 * rate(Link::UserHelper, p1, p),
            la - tau2 * rate(Link::UserAp, p2, p) - tau3 * rate(Link::HelperAp, p3, p),
            la - tau2 * rate(Link::UserHelper, p2, p),
            tau1 + tau2 + tau3 + p.ap_secs_per_bit() * la - t,
            p.task_bits - lu - lh - la,
            p.c_h * lh - (t - tau1) * p.f_h_max,
        ]
    }

    fn unpack(&self, u: &[f64]) -> ([f64; NV], [f64; NY]) {
        let mut v = self.v0;
        let mut y = self.y0;
        let mut k = 0;
        for j in 0..NV {
            if self.free[j] {
                v[j] = u[k] * self.vscale[j];
                k += 1;
            }
        }
        for i in 0..NY {
            if self.active[i] {
                y[i] = u[k] * self.yscale[i];
                k += 1;
            }
        }
        (v, y)
    }

    fn residual(&self, u: &[f64]) -> Vec<f64> {
        let (v, y) = self.unpack(u);
        let g = self.gradient(&v, &y);
        let c = self.constraints(&v);
        let mut r = Vec::with_capacity(u.len());
        for j in 0..NV {
            if self.free[j] {
                r.push(g[j] / self.gscale[j]);
            }
        }
        for i in 0..NY {
            if self.active[i] {
                r.push(c[i] / self.cscale[i]);
            }
        }
        r
    }

    fn caps(&self) -> [f64; NV] {
        let p = self.p;
        [p.block, p.block, p.block, p.p_u_max, p.p_u_max, p.p_h_max, p.local_capacity(), p.task_bits, p.task_bits]
    }

    fn pack(&self, v: &[f64; NV], y: &[f64; NY]) -> Vec<f64> {
        let mut u = Vec::new();
        for j in 0..NV {
            if self.free[j] {
                u.push(v[j] / self.vscale[j]);
            }
        }
        for i in 0..NY {
            if self.active[i] {
                u.push(y[i] / self.yscale[i]);
            }
        }
        u
    }

    fn in_domain(&self, u: &[f64]) -> bool {
        let (v, _) = self.unpack(u);
        let caps = self.caps();
        (0..NV).all(|j| !self.free[j] || (v[j] >= 0.0 && v[j] <= caps[j])) && v[0] < self.p.block
    }

    /// Free powers and local bits that `u` pushes past their caps.
    fn cap_hits(&self, u: &[f64]) -> Vec<usize> {
        let (v, _) = self.unpack(u);
        let caps = self.caps();
        (3..7).filter(|&j| self.free[j] && v[j] > caps[j]).collect()
    }
}

fn solve_dense(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))?;
        if !(m[piv][c].abs() > 1e-300) {
            return None;
        }
        m.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            if f != 0.0 {
                for q in c..n {
                    m[r][q] -= f * m[c][q];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|q| m[c][q] * x[q]).sum();
        x[c] = (b[c] - s) / m[c][c];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

type NewtonResult = Result<(Vec<f64>, Option<Vec<f64>>), (Vec<f64>, Vec<usize>)>;

/// Damped Newton iterations from `u`. Returns the last iterate with its
/// residual, `None` for the residual when a step cannot be taken, or the
/// variables that block the step at their caps.
fn newton(sys: &System, mut u: Vec<f64>) -> NewtonResult {
    let n = u.len();
    let mut r = sys.residual(&u);
    for _ in 0..40 {
        let f = norm(&r);
        if f <= 1e-14 {
            break;
        }
        let mut jac = vec![vec![0.0; n]; n];
        for k in 0..n {
            let h = 1e-7 * u[k].abs().max(1e-3);
            let mut up = u.clone();
            let mut um = u.clone();
            up[k] += h;
            um[k] -= h;
            let (rp, rm) = (sys.residual(&up), sys.residual(&um));
            for i in 0..n {
                jac[i][k] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let Some(step) = solve_dense(jac, r.iter().map(|x| -x).collect()) else {
            return Ok((u, None));
        };
        let full: Vec<f64> = u.iter().zip(&step).map(|(x, dx)| x + dx).collect();
        let mut s = 1.0;
        let mut next = None;
        for _ in 0..30 {
            let cand: Vec<f64> = u.iter().zip(&step).map(|(x, dx)| x + s * dx).collect();
            if sys.in_domain(&cand) {
                let rc = sys.residual(&cand);
                if norm(&rc) < f {
                    next = Some((cand, rc));
                    break;
                }
            }
            s *= 0.5;
        }
        match next {
            Some((cand, rc)) => {
                u = cand;
                r = rc;
            }
            None => {
                let hits = sys.cap_hits(&full);
                return if hits.is_empty() { Ok((u, None)) } else { Err((u, hits)) };
            }
        }
    }
    Ok((u, Some(r)))
}

/// Newton iterations on the KKT system of the active set of `(a, d)`.
/// Returns `None` when the system is singular, leaves its domain or yields
/// negative multipliers.
pub(crate) fn kkt_polish(a: &Allocation, d: &DualPoint, p: &SystemParams, routes: Routes) -> Option<(Allocation, DualPoint)> {
    let t = p.block;
    let l = p.task_bits;
    if !(l > 0.0 && t > 0.0) {
        return None;
    }
    let tiny = 1e-12;
    let interior = |x: f64, hi: f64| x > tiny * hi && x < hi * (1.0 - tiny);
    let v0 = [a.tau1, a.tau2, a.tau3, a.p1, a.p2, a.p3, a.l_u, a.l_h, a.l_a];
    let helper = routes.helper && a.tau1 > tiny * t && a.l_h > 0.0;
    let relay = routes.relay && a.l_a > 0.0 && a.tau2 > tiny * t;
    let tau3 = relay && a.tau3 > tiny * t;
    let free = [
        helper,
        relay,
        tau3,
        helper && interior(a.p1, p.p_u_max),
        relay && interior(a.p2, p.p_u_max),
        tau3 && interior(a.p3, p.p_h_max),
        routes.local && interior(a.l_u, p.local_capacity()),
        helper,
        relay,
    ];
    let probe = System {
        p,
        free,
        active: [false; NY],
        v0,
        y0: [0.0; NY],
        vscale: [1.0; NV],
        yscale: [1.0; NY],
        gscale: [1.0; NV],
        cscale: [1.0; NY],
    };
    let c = probe.constraints(&v0);
    let tight = |x: f64, scale: f64| x.abs() <= 1e-7 * scale;
    let bit_price = [d.lambda1, d.lambda2, d.lambda3, d.mu2].into_iter().fold(1e-300, f64::max);
    let r_ref = [rate(Link::UserHelper, p.p_u_max, p), rate(Link::UserAp, p.p_u_max, p), rate(Link::HelperAp, p.p_h_max, p)]
        .into_iter()
        .fold(0.0, f64::max);
    let slot_price = (bit_price * r_ref).max(d.mu1).max(1e-300);
    // A constraint is taken as active when it is tight or clearly priced.
    let priced = |y: f64, scale: f64| y > 1e-6 * scale;
    let active = [
        helper,
        relay && (tau3 || tight(c[1], l) || priced(d.lambda2, bit_price)),
        relay && (tight(c[2], l) || priced(d.lambda3, bit_price)),
        (helper || relay) && (tight(c[3], t) || priced(d.mu1, slot_price)),
        true,
        helper && tight(c[5], t * p.f_h_max),
    ];
    // A tight constraint whose multiplier no equation determines keeps its
    // dual value; it still enters the sign conditions of variables at zero.
    let duals = [d.lambda1, d.lambda2, d.lambda3, d.mu1, d.mu2, 0.0];
    let scales = [l, l, l, t, l, t * p.f_h_max];
    let y0 = std::array::from_fn(|i| if tight(c[i], scales[i]) { duals[i] } else { 0.0 });
    let mut sys = System {
        vscale: [t, t, t, p.p_u_max, p.p_u_max, p.p_h_max, l, l, l],
        yscale: [bit_price, bit_price, bit_price, slot_price, bit_price, bit_price / p.c_h],
        gscale: [slot_price, slot_price, slot_price, 1.0, 1.0, 1.0, bit_price, bit_price, bit_price],
        cscale: scales,
        active,
        y0,
        ..probe
    };

    // A Newton step that runs into the cap of a power or of the local bits
    // fixes that variable at its cap and restarts on the smaller system.
    let mut u = sys.pack(&v0, &duals);
    let (u, r) = loop {
        match newton(&sys, u) {
            Ok((u_end, r)) => break (u_end, r?),
            Err((u_end, hits)) => {
                let (v, y) = sys.unpack(&u_end);
                let caps = sys.caps();
                sys.v0 = v;
                for j in hits {
                    sys.free[j] = false;
                    sys.v0[j] = caps[j];
                }
                u = sys.pack(&sys.v0, &y);
            }
        }
    };
    if norm(&r) > 1e-10 {
        return None;
    }
    let (v, y) = sys.unpack(&u);
    if y.iter().zip(sys.yscale).any(|(x, s)| *x < -1e-9 * s) {
        return None;
    }
    let mut y = y.map(|x| x.max(0.0));
    // Rounding can leave the relay bit price a hair below zero.
    if routes.relay {
        let deficit = y[4] - y[1] - y[2] - y[3] * p.ap_secs_per_bit();
        if deficit > 0.0 {
            y[1] += deficit + 4.0 * f64::EPSILON * y[4];
        }
    }
    let alloc = Allocation::from_powers([v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]], p);
    Some((alloc, DualPoint::new(y[0], y[1], y[2], y[3], y[4])))
}
