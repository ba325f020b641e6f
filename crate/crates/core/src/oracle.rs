//! Slow, independent checks for the solvers: a primal solver built from
//! nested one-dimensional searches, brute-force minimizers of the five
//! Lagrangian subproblems and a KKT residual evaluator.
//!
//! Nothing here uses the dual machinery of [`crate::dual`].

use crate::dual::{DualPoint, Routes};
use crate::error::Result;
use crate::model::{local_compute_energy, power_for_rate, rate, total_energy, Allocation, Link, SystemParams};

/// Golden-section search that returns the best probe it evaluated.
fn golden<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    let mut best = (lo, f(lo));
    let keep = |x: f64, v: f64, best: &mut (f64, f64)| {
        if v < best.1 {
            *best = (x, v);
        }
    };
    if !(hi > lo) {
        return best;
    }
    let vh = f(hi);
    keep(hi, vh, &mut best);
    let r = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    keep(x1, f1, &mut best);
    keep(x2, f2, &mut best);
    for _ in 0..iters {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
            keep(x1, f1, &mut best);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
            keep(x2, f2, &mut best);
        }
    }
    best
}

/// Full-power rates of the three links.
struct Rates {
    r01: f64,
    r0: f64,
    r1: f64,
}

impl Rates {
    fn max(p: &SystemParams) -> Self {
        Self {
            r01: rate(Link::UserHelper, p.p_u_max, p),
            r0: rate(Link::UserAp, p.p_u_max, p),
            r1: rate(Link::HelperAp, p.p_h_max, p),
        }
    }

    /// Shortest relay schedule for `bits` relayed bits at full power.
    fn relay_time(&self, bits: f64) -> f64 {
        if bits <= 0.0 {
            0.0
        } else if self.r0 >= self.r1 {
            bits / self.r01.min(self.r0)
        } else {
            let tau2 = bits / self.r01;
            tau2 + (bits - tau2 * self.r0).max(0.0) / self.r1
        }
    }
}

/// Least relay energy for `bits` relayed bits when the two relay slots may
/// use at most `t` seconds, with the chosen `(τ2, τ3, P2, P3)`.
fn relay_energy(bits: f64, t: f64, p: &SystemParams, iters: usize) -> (f64, [f64; 4]) {
    if bits <= 0.0 {
        return (0.0, [0.0; 4]);
    }
    let r = Rates::max(p);
    if t < r.relay_time(bits) * (1.0 - 1e-12) {
        return (f64::INFINITY, [0.0; 4]);
    }
    // Feasible τ2 with τ3 = t - τ2 at full powers.
    let mut lo = bits / r.r01;
    let mut hi = t;
    if r.r0 > r.r1 {
        lo = lo.max((bits - t * r.r1) / (r.r0 - r.r1));
    } else if r.r0 < r.r1 {
        hi = hi.min((t * r.r1 - bits) / (r.r1 - r.r0));
    }
    let lo = lo.clamp(0.0, t);
    let hi = hi.clamp(lo, t);
    let inner = |tau2: f64| -> (f64, f64, f64) {
        let tau3 = t - tau2;
        let p2_hop = power_for_rate(Link::UserHelper, bits / tau2, p);
        let direct_need = (bits - tau3 * r.r1) / tau2;
        let p2_lo = p2_hop.max(power_for_rate(Link::UserAp, direct_need, p));
        if !(p2_lo <= p.p_u_max * (1.0 + 1e-12)) {
            return (f64::INFINITY, 0.0, 0.0);
        }
        let p2_lo = p2_lo.min(p.p_u_max);
        let p3_of = |p2: f64| {
            let rest = (bits - tau2 * rate(Link::UserAp, p2, p)).max(0.0);
            if rest == 0.0 {
                0.0
            } else if tau3 > 0.0 {
                power_for_rate(Link::HelperAp, rest / tau3, p).min(p.p_h_max)
            } else {
                f64::INFINITY
            }
        };
        let (p2, e) = golden(|p2| tau2 * p2 + tau3 * p3_of(p2), p2_lo, p.p_u_max, iters);
        (e, p2, p3_of(p2))
    };
    let (tau2, e) = golden(|x| inner(x).0, lo, hi, iters);
    let (_, p2, p3) = inner(tau2);
    (e, [tau2, t - tau2, p2, p3])
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub energy: f64,
    pub allocation: Allocation,
    pub feasible: bool,
}

/// Reference optimum of the partial-offloading problem by nested
/// golden-section searches over `l_a`, `l_h`, `τ1`, `τ2` and `P2`, every
/// other variable being eliminated in closed form. `budget` is the number of
/// golden iterations per level.
pub fn oracle_p11(p: &SystemParams, budget: usize) -> Result<OracleResult> {
    oracle_routes(p, Routes::ALL, budget)
}

pub fn oracle_routes(p: &SystemParams, routes: Routes, budget: usize) -> Result<OracleResult> {
    p.validate()?;
    let l = p.task_bits;
    if l == 0.0 {
        return Ok(OracleResult { energy: 0.0, allocation: Allocation::zero(), feasible: true });
    }
    let t = p.block;
    let secs = p.ap_secs_per_bit();
    let r = Rates::max(p);
    let lu_max = if routes.local { p.local_capacity() } else { 0.0 };
    let tau1_best = t * p.f_h_max / (p.c_h * r.r01 + p.f_h_max);
    let relay_time = |la: f64| r.relay_time(la);
    let helper_max = |la: f64| {
        if !routes.helper {
            return 0.0;
        }
        let avail = t - secs * la - relay_time(la);
        if avail <= 0.0 {
            0.0
        } else if tau1_best <= avail {
            tau1_best * r.r01
        } else {
            avail * r.r01
        }
    };
    let per_bit_time = relay_time(1.0) + secs;
    let la_cap = if routes.relay { l.min(t / per_bit_time) } else { 0.0 };
    let slack = |la: f64| la + helper_max(la) + lu_max - l;

    // `slack` is concave in l_a, so its nonnegative set is an interval.
    let kink = if routes.relay { ((t - tau1_best) / per_bit_time).clamp(0.0, la_cap) } else { 0.0 };
    let peak = [0.0, kink, la_cap].into_iter().fold(0.0, |b, x| if slack(x) > slack(b) { x } else { b });
    if slack(peak) < -1e-9 * l {
        return Ok(OracleResult { energy: f64::INFINITY, allocation: Allocation::zero(), feasible: false });
    }
    let edge = |mut inside: f64, mut outside: f64| {
        if slack(outside) >= 0.0 {
            return outside;
        }
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if slack(mid) >= 0.0 {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let la_lo = edge(peak, 0.0);
    let la_hi = edge(peak, la_cap);

    // Energy for fixed (l_a, l_h, τ1) plus the chosen relay schedule.
    let at_tau1 = |la: f64, lh: f64, tau1: f64| -> (f64, [f64; 4]) {
        let lu = l - la - lh;
        let tx1 = if lh > 0.0 { tau1 * power_for_rate(Link::UserHelper, lh / tau1, p) } else { 0.0 };
        let helper = if lh > 0.0 { p.kappa_h * (p.c_h * lh).powi(3) / (t - tau1).powi(2) } else { 0.0 };
        let user = p.kappa_u * (p.c_u * lu.max(0.0)).powi(3) / (t * t);
        let (relay, sched) = relay_energy(la, t - secs * la - tau1, p, budget);
        (tx1 + helper + user + relay, sched)
    };
    let best_tau1 = |la: f64, lh: f64| -> (f64, f64) {
        if lh <= 0.0 {
            return (0.0, at_tau1(la, 0.0, 0.0).0);
        }
        let lo = lh / r.r01;
        let hi = (t - p.c_h * lh / p.f_h_max).min(t - secs * la - relay_time(la));
        if hi < lo {
            return (lo, f64::INFINITY);
        }
        golden(|x| at_tau1(la, lh, x).0, lo, hi, budget)
    };
    let best_lh = |la: f64| -> (f64, f64) {
        let lo = (l - la - lu_max).max(0.0);
        let hi = helper_max(la).min(l - la);
        if hi < lo {
            return (lo, f64::INFINITY);
        }
        golden(|lh| best_tau1(la, lh).1, lo, hi, budget)
    };
    let (la, energy) = golden(|la| best_lh(la).1, la_lo, la_hi, budget);
    let (lh, _) = best_lh(la);
    let (tau1, _) = best_tau1(la, lh);
    let (_, [tau2, tau3, p2, p3]) = at_tau1(la, lh, tau1);
    let p1 = if lh > 0.0 { power_for_rate(Link::UserHelper, lh / tau1, p) } else { 0.0 };
    let tau1 = if lh > 0.0 { tau1 } else { 0.0 };
    let allocation = Allocation::from_powers([tau1, tau2, tau3], [p1, p2, p3], [l - la - lh, lh, la], p);
    let check = total_energy(&allocation, p)?;
    Ok(OracleResult { energy: check.max(energy), allocation, feasible: energy.is_finite() })
}

/// Communication cooperation with binary offloading: all bits relayed to
/// the AP. A coarse grid over `(τ2, P2)` picks a bracket that golden-section
/// searches then refine; `τ3` fills the remaining time and `P3` is the least
/// power carrying the rest.
pub fn oracle_comm_coop(p: &SystemParams, grid: usize, refine: usize) -> Result<f64> {
    p.validate()?;
    let l = p.task_bits;
    if l == 0.0 {
        return Ok(0.0);
    }
    let t = p.block - p.ap_secs_per_bit() * l;
    if t <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let energy = |tau2: f64, p2: f64| -> f64 {
        let tau3 = t - tau2;
        if tau2 <= 0.0 || rate(Link::UserHelper, p2, p) * tau2 < l * (1.0 - 1e-13) {
            return f64::INFINITY;
        }
        let rest = (l - tau2 * rate(Link::UserAp, p2, p)).max(0.0);
        let p3 = if rest == 0.0 {
            0.0
        } else if tau3 > 0.0 {
            power_for_rate(Link::HelperAp, rest / tau3, p)
        } else {
            f64::INFINITY
        };
        if p3 > p.p_h_max * (1.0 + 1e-13) {
            return f64::INFINITY;
        }
        tau2 * p2 + tau3 * p3
    };
    let best_p2 = |tau2: f64| -> f64 {
        let n = grid.max(2);
        let step = p.p_u_max / n as f64;
        let mut best = (0usize, f64::INFINITY);
        for i in 0..=n {
            let v = energy(tau2, i as f64 * step);
            if v < best.1 {
                best = (i, v);
            }
        }
        if !best.1.is_finite() {
            return f64::INFINITY;
        }
        let lo = (best.0 as f64 - 1.0).max(0.0) * step;
        let hi = ((best.0 as f64 + 1.0) * step).min(p.p_u_max);
        golden(|x| energy(tau2, x), lo, hi, refine).1.min(best.1)
    };
    let n = grid.max(2);
    let step = t / n as f64;
    let mut best = (0usize, f64::INFINITY);
    for i in 1..=n {
        let v = best_p2(i as f64 * step);
        if v < best.1 {
            best = (i, v);
        }
    }
    let lo = (best.0 as f64 - 1.0).max(0.0) * step;
    let hi = ((best.0 as f64 + 1.0) * step).min(t);
    Ok(golden(best_p2, lo, hi, refine).1.min(best.1))
}

/// Dense grid minimum of the computation-cooperation (binary) energy over
/// its feasible offloading-slot interval.
pub fn oracle_comp_coop_grid(p: &SystemParams, points: usize) -> Option<f64> {
    let l = p.task_bits;
    let lo = l / rate(Link::UserHelper, p.p_u_max, p);
    let hi = p.block - p.c_h * l / p.f_h_max;
    if hi < lo {
        return None;
    }
    let n = points.max(2) - 1;
    (0..=n)
        .map(|i| {
            let tau = lo + (hi - lo) * i as f64 / n as f64;
            let tx = tau * power_for_rate(Link::UserHelper, l / tau, p).min(p.p_u_max);
            tx + local_compute_energy(l, p.block - tau, p.kappa_h, p.c_h).unwrap_or(f64::INFINITY)
        })
        .reduce(f64::min)
}

// ---- subproblem brute force -------------------------------------------------

/// Minimizes `f` over the box `[lo, hi]` by a grid that repeatedly zooms in
/// around its best point. Returns the best point and value.
pub fn zoom_grid_min<F: Fn(&[f64]) -> f64>(f: F, lo: &[f64], hi: &[f64], per_dim: usize, rounds: usize) -> (Vec<f64>, f64) {
    let dim = lo.len();
    let n = per_dim.max(3);
    let (mut a, mut b) = (lo.to_vec(), hi.to_vec());
    let mut best = (lo.to_vec(), f(lo));
    let mut x = vec![0.0; dim];
    for _ in 0..rounds {
        let total = n.pow(dim as u32);
        for idx in 0..total {
            let mut k = idx;
            for j in 0..dim {
                let i = k % n;
                k /= n;
                x[j] = a[j] + (b[j] - a[j]) * i as f64 / (n - 1) as f64;
            }
            let v = f(&x);
            if v < best.1 {
                best = (x.clone(), v);
            }
        }
        for j in 0..dim {
            let h = (b[j] - a[j]) / (n - 1) as f64;
            a[j] = (best.0[j] - 2.0 * h).max(lo[j]);
            b[j] = (best.0[j] + 2.0 * h).min(hi[j]);
        }
    }
    best
}

/// Lagrangian of subproblem 1 at `(P1, τ1, l_h)`.
pub fn sub1_objective(d: &DualPoint, p: &SystemParams, p1: f64, tau1: f64, lh: f64) -> f64 {
    let t = p.block;
    let helper = if lh > 0.0 { p.kappa_h * (p.c_h * lh).powi(3) / (t - tau1).powi(2) } else { 0.0 };
    tau1 * p1 + helper + d.lambda1 * (lh - tau1 * rate(Link::UserHelper, p1, p)) + d.mu1 * tau1 - d.mu2 * lh
}

pub fn sub2_objective(d: &DualPoint, p: &SystemParams, p2: f64, tau2: f64) -> f64 {
    tau2 * (p2 - d.lambda2 * rate(Link::UserAp, p2, p) - d.lambda3 * rate(Link::UserHelper, p2, p) + d.mu1)
}

pub fn sub3_objective(d: &DualPoint, p: &SystemParams, p3: f64, tau3: f64) -> f64 {
    tau3 * (p3 - d.lambda2 * rate(Link::HelperAp, p3, p) + d.mu1)
}

pub fn sub4_objective(d: &DualPoint, p: &SystemParams, lu: f64) -> f64 {
    p.kappa_u * (p.c_u * lu).powi(3) / p.block.powi(2) - d.mu2 * lu
}

pub fn sub5_objective(d: &DualPoint, p: &SystemParams, la: f64) -> f64 {
    (d.lambda2 + d.lambda3 + d.mu1 * p.c_a / p.f_a_max - d.mu2) * la
}

/// Smallest fraction of a power or bit cap the subproblem grid reaches.
const LOG_SPAN: f64 = 1e-10;

/// Brute-force minima of the five subproblem objectives at `d`.
pub fn grid_subproblems(d: &DualPoint, p: &SystemParams, per_dim: usize, rounds: usize) -> [f64; 5] {
    let t = p.block;
    let cap_h = p.f_h_max / p.c_h;
    // Powers and l_h span many decades at optimum, so their grid coordinate
    // is logarithmic; a linear grid collapses onto the zero corner first.
    let log = |x: f64, hi: f64| hi * LOG_SPAN.powf(1.0 - x);
    let s1 = zoom_grid_min(
        |x| sub1_objective(d, p, log(x[0], p.p_u_max), x[1], log(x[2], (t - x[1]) * cap_h)),
        &[0.0, 0.0, 0.0],
        &[1.0, t, 1.0],
        per_dim,
        rounds,
    )
    .1;
    // The negative band of a transmit power can be narrow, so the cheaper
    // two-dimensional grids are four times finer.
    let fine = 4 * per_dim;
    let s2 = zoom_grid_min(|x| sub2_objective(d, p, log(x[0], p.p_u_max), x[1]), &[0.0, 0.0], &[1.0, t], fine, rounds).1;
    let s3 = zoom_grid_min(|x| sub3_objective(d, p, log(x[0], p.p_h_max), x[1]), &[0.0, 0.0], &[1.0, t], fine, rounds).1;
    let s4 = zoom_grid_min(|x| sub4_objective(d, p, x[0]), &[0.0], &[p.local_capacity()], per_dim, rounds).1;
    let s5 = zoom_grid_min(|x| sub5_objective(d, p, x[0]), &[0.0], &[p.task_bits], per_dim, rounds).1;
    [s1, s2, s3, s4, s5]
}

// ---- KKT residuals -----------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KktRow {
    /// Derivative of subproblem 1 in `E1` (interior `P1` only).
    Sub1Energy,
    /// Derivative in `τ1` (interior `τ1`), or its sign when `τ1 = 0`.
    Sub1Slot,
    /// Derivative in `l_h` (interior `l_h` only).
    Sub1Bits,
    Sub2Energy,
    Sub2Slot,
    Sub3Energy,
    Sub3Slot,
    Sub4Bits,
    Sub5Bits,
    /// Complementary slackness of the constraint priced by each multiplier.
    Slack(u8),
    /// Primal bit balance.
    BitBalance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktResiduals {
    pub rows: Vec<(KktRow, f64)>,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.rows.iter().map(|r| r.1.abs()).fold(0.0, f64::max)
    }

    pub fn get(&self, row: KktRow) -> Option<f64> {
        self.rows.iter().find(|r| r.0 == row).map(|r| r.1)
    }
}

/// Scaled KKT residuals of the convex problem at the primal-dual pair
/// `(a, d)`. Energy derivatives are dimensionless; bit derivatives are
/// divided by the largest bit price, slot derivatives by the largest price of
/// a second of airtime, and slackness products by the largest price times `L`.
pub fn kkt_residuals(a: &Allocation, d: &DualPoint, p: &SystemParams) -> KktResiduals {
    let t = p.block;
    let l = p.task_bits;
    let k = p.bandwidth / std::f64::consts::LN_2;
    let (a01, a0, a1) = (
        p.snr_per_watt(Link::UserHelper),
        p.snr_per_watt(Link::UserAp),
        p.snr_per_watt(Link::HelperAp),
    );
    let secs = p.ap_secs_per_bit();
    let bit_price = [d.lambda1, d.lambda2, d.lambda3, d.mu2.abs()].into_iter().fold(1e-300, f64::max);
    let r_ref = [
        rate(Link::UserHelper, p.p_u_max, p),
        rate(Link::UserAp, p.p_u_max, p),
        rate(Link::HelperAp, p.p_h_max, p),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let slot_price = (bit_price * r_ref).max(d.mu1).max(1e-300);
    let energy_scale = (bit_price * l.max(1.0)).max(d.mu1 * t).max(1e-300);
    let tiny = 1e-12;
    let interior = |x: f64, hi: f64| x > tiny * hi && x < hi * (1.0 - tiny);
    let mut rows = Vec::new();

    // Subproblem 1.
    let window = t - a.tau1;
    let m1 = if window > 0.0 { a.l_h / window } else { 0.0 };
    if a.tau1 > 0.0 && interior(a.p1, p.p_u_max) {
        rows.push((KktRow::Sub1Energy, 1.0 - d.lambda1 * k * a01 / (1.0 + a.p1 * a01)));
    }
    let m_cap = p.f_h_max / p.c_h;
    if window > 0.0 && interior(m1, m_cap) {
        let v = 3.0 * p.kappa_h * p.c_h.powi(3) * m1 * m1 + d.lambda1 - d.mu2;
        rows.push((KktRow::Sub1Bits, v / bit_price));
    }
    if a.tau1 > 0.0 || a.l_h > 0.0 {
        let alpha = if a.p1 >= p.p_u_max * (1.0 - tiny) {
            (d.lambda1 * k * a01 / (1.0 + a.p1 * a01) - 1.0).max(0.0)
        } else {
            0.0
        };
        let beta = if m1 >= m_cap * (1.0 - tiny) {
            (d.mu2 - d.lambda1 - 3.0 * p.kappa_h * p.c_h.powi(3) * m1 * m1).max(0.0)
        } else {
            0.0
        };
        let snr = a.p1 * a01;
        let rho = d.mu1 - d.lambda1 * rate(Link::UserHelper, a.p1, p)
            + 2.0 * p.kappa_h * (p.c_h * m1).powi(3)
            + d.lambda1 * k * snr / (1.0 + snr)
            - alpha * p.p_u_max
            + beta * m_cap;
        if interior(a.tau1, t) {
            rows.push((KktRow::Sub1Slot, rho / slot_price));
        }
    }

    // Subproblems 2 and 3.
    if a.tau2 > 0.0 {
        let d2 = |pw: f64| 1.0 - d.lambda2 * k * a0 / (1.0 + pw * a0) - d.lambda3 * k * a01 / (1.0 + pw * a01);
        if interior(a.p2, p.p_u_max) {
            rows.push((KktRow::Sub2Energy, d2(a.p2)));
        }
        let alpha = if a.p2 >= p.p_u_max * (1.0 - tiny) { (-d2(a.p2)).max(0.0) } else { 0.0 };
        let rho = a.p2 + d.mu1 - d.lambda2 * rate(Link::UserAp, a.p2, p) - d.lambda3 * rate(Link::UserHelper, a.p2, p)
            + alpha * (a.p2 - p.p_u_max);
        if interior(a.tau2, t) {
            rows.push((KktRow::Sub2Slot, rho / slot_price));
        }
    }
    if a.tau3 > 0.0 {
        let d3 = |pw: f64| 1.0 - d.lambda2 * k * a1 / (1.0 + pw * a1);
        if interior(a.p3, p.p_h_max) {
            rows.push((KktRow::Sub3Energy, d3(a.p3)));
        }
        let rho = a.p3 + d.mu1 - d.lambda2 * rate(Link::HelperAp, a.p3, p);
        if interior(a.tau3, t) {
            rows.push((KktRow::Sub3Slot, rho / slot_price));
        }
    }

    // Subproblems 4 and 5.
    if interior(a.l_u, p.local_capacity()) {
        let v = 3.0 * p.kappa_u * p.c_u.powi(3) * a.l_u * a.l_u / (t * t) - d.mu2;
        rows.push((KktRow::Sub4Bits, v / bit_price));
    }
    if interior(a.l_a, l) {
        rows.push((KktRow::Sub5Bits, (d.lambda2 + d.lambda3 + d.mu1 * secs - d.mu2) / bit_price));
    }

    // Complementary slackness.
    let slacks = [
        d.lambda1 * (a.tau1 * rate(Link::UserHelper, a.p1, p) - a.l_h),
        d.lambda2 * (a.tau2 * rate(Link::UserAp, a.p2, p) + a.tau3 * rate(Link::HelperAp, a.p3, p) - a.l_a),
        d.lambda3 * (a.tau2 * rate(Link::UserHelper, a.p2, p) - a.l_a),
        d.mu1 * (t - a.tau1 - a.tau2 - a.tau3 - secs * a.l_a),
    ];
    for (i, s) in slacks.iter().enumerate() {
        rows.push((KktRow::Slack(i as u8 + 1), s / energy_scale));
    }
    rows.push((KktRow::BitBalance, (a.l_u + a.l_h + a.l_a - l) / l.max(1.0)));
    KktResiduals { rows }
}
