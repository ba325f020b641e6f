//! Partial offloading: computation capacity, the dual ellipsoid solve and
//! primal recovery. The same pipeline serves the restricted schemes by
//! closing routes.

use serde::Serialize;

use crate::bench::Scheme;
use crate::dual::{eval_dual_routes, DualPoint, Routes, SubproblemSolution};
use crate::ellipsoid::{ellipsoid_resume, CutOracleResult, EllipsoidOptions, EllipsoidState, TraceRow};
use crate::error::Result;
use crate::lp::{lp_solve, LpProblem};
use crate::model::{check_feasible, power_for_rate, rate, total_energy, Allocation, Link, SystemParams, FEAS_TOL};
use crate::p2::BinaryMode;
use crate::polish::kkt_polish;

/// Target relative duality gap of an optimal report.
pub const GAP_TOL: f64 = 1e-5;
const MAX_ITER: usize = 5000;
/// Gap at which refinement stops early.
const AIM_GAP: f64 = 1e-10;
/// Side of the initial box in normalized dual units.
const INIT_BOX: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NonConverged,
}

impl SolveStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::NonConverged => "nonconverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub scheme: Scheme,
    /// Selected computation mode for binary offloading.
    pub mode: Option<BinaryMode>,
    pub energy: f64,
    pub allocation: Allocation,
    pub dual: DualPoint,
    /// Best dual value, a lower bound on the optimal energy.
    pub dual_value: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    /// Computation capacity of the scheme on this instance.
    pub capacity: f64,
    pub trace: Vec<TraceRow>,
}

impl SolveReport {
    pub(crate) fn infeasible(scheme: Scheme, capacity: f64) -> Self {
        Self {
            status: SolveStatus::Infeasible,
            scheme,
            mode: None,
            energy: f64::NAN,
            allocation: Allocation::zero(),
            dual: DualPoint::default(),
            dual_value: f64::NAN,
            duality_gap: f64::NAN,
            iterations: 0,
            capacity,
            trace: Vec::new(),
        }
    }

    /// Closed-form solve: the energy is exact, so the gap is zero.
    pub(crate) fn exact(scheme: Scheme, allocation: Allocation, energy: f64, capacity: f64) -> Self {
        Self {
            status: SolveStatus::Optimal,
            scheme,
            mode: None,
            energy,
            allocation,
            dual: DualPoint::default(),
            dual_value: energy,
            duality_gap: 0.0,
            iterations: 0,
            capacity,
            trace: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Capacity LP over `[l_u, l_h, l_a, τ1, τ2, τ3]` at full transmit power.
/// The relay is limited by both decode-and-forward terms.
fn capacity_lp(p: &SystemParams, routes: Routes) -> Option<[f64; 6]> {
    let t = p.block;
    if !(t > 0.0) {
        return None;
    }
    let r01 = rate(Link::UserHelper, p.p_u_max, p);
    let r0 = rate(Link::UserAp, p.p_u_max, p);
    let r1 = rate(Link::HelperAp, p.p_h_max, p);
    let mut lp = LpProblem::new(vec![-1.0, -1.0, -1.0, 0.0, 0.0, 0.0]);
    lp.add_le(vec![0.0, 1.0, 0.0, -r01, 0.0, 0.0], 0.0)
        .add_le(vec![0.0, p.c_h, 0.0, p.f_h_max, 0.0, 0.0], t * p.f_h_max)
        .add_le(vec![0.0, 0.0, 1.0, 0.0, -r0, -r1], 0.0)
        .add_le(vec![0.0, 0.0, 1.0, 0.0, -r01, 0.0], 0.0)
        .add_le(vec![0.0, 0.0, p.ap_secs_per_bit(), 1.0, 1.0, 1.0], t);
    lp.bounds(0, 0.0, if routes.local { p.local_capacity() } else { 0.0 });
    if !routes.helper {
        lp.bounds(1, 0.0, 0.0).bounds(3, 0.0, 0.0);
    }
    if !routes.relay {
        lp.bounds(2, 0.0, 0.0).bounds(4, 0.0, 0.0).bounds(5, 0.0, 0.0);
    }
    let sol = lp_solve(&lp);
    if !sol.is_optimal() {
        return None;
    }
    let mut x = [0.0; 6];
    for (xi, v) in x.iter_mut().zip(&sol.x) {
        *xi = v.max(0.0);
    }
    Some(x)
}

/// Largest task a scheme restricted to `routes` can finish within the block.
pub fn capacity(p: &SystemParams, routes: Routes) -> f64 {
    capacity_lp(p, routes).map_or(0.0, |x| x[0] + x[1] + x[2])
}

/// Computation capacity of partial offloading.
pub fn lmax_partial(p: &SystemParams) -> f64 {
    capacity(p, Routes::ALL)
}

/// The capacity-LP schedule shrunk to `L` bits with the smallest powers that
/// carry them. Feasible whenever `L` does not exceed the capacity.
fn reference_point(p: &SystemParams, routes: Routes) -> Option<Allocation> {
    let x = capacity_lp(p, routes)?;
    let total = x[0] + x[1] + x[2];
    if !(total > 0.0) || p.task_bits > total {
        return None;
    }
    let theta = p.task_bits / total;
    let bits = [x[0] * theta, x[1] * theta, x[2] * theta];
    let taus = [x[3], x[4], x[5]];
    let a = Allocation::from_powers(taus, [p.p_u_max, p.p_u_max, p.p_h_max], bits, p);
    Some(polish_powers(&a, p))
}

/// Lowers each transmit power to the least value that still carries the
/// scheduled bits; slot durations and the bit split are unchanged.
fn polish_powers(a: &Allocation, p: &SystemParams) -> Allocation {
    let [tau1, tau2, tau3] = a.taus();
    let mut powers = a.powers();
    powers[0] = if tau1 > 0.0 && a.l_h > 0.0 {
        power_for_rate(Link::UserHelper, a.l_h / tau1, p).min(powers[0])
    } else {
        0.0
    };
    if a.l_a > 0.0 && tau2 > 0.0 {
        let relay_power = |p2: f64| {
            let rest = (a.l_a - tau2 * rate(Link::UserAp, p2, p)).max(0.0);
            if rest == 0.0 {
                0.0
            } else if tau3 > 0.0 {
                power_for_rate(Link::HelperAp, rest / tau3, p)
            } else {
                f64::INFINITY
            }
        };
        let cost = |p2: f64| {
            let p3 = relay_power(p2);
            if p3 > p.p_h_max { f64::INFINITY } else { tau2 * p2 + tau3 * p3 }
        };
        let lo = power_for_rate(Link::UserHelper, a.l_a / tau2, p).min(powers[1]);
        let hi = powers[1];
        let best = golden_min(&cost, lo, hi, 100);
        let p2 = if cost(best) <= cost(hi) { best } else { hi };
        let p3 = relay_power(p2);
        if cost(p2) <= tau2 * powers[1] + tau3 * powers[2] {
            powers[1] = p2;
            powers[2] = p3.min(powers[2]);
        }
    } else {
        powers[1] = 0.0;
        powers[2] = 0.0;
    }
    Allocation::from_powers(a.taus(), powers, a.bits(), p)
}

/// Golden-section minimizer of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_min<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    if !(hi > lo) {
        return lo;
    }
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    [lo, mid, hi].into_iter().fold(mid, |b, x| if f(x) < f(b) { x } else { b })
}

/// Primal recovery at a (near) dual-optimal point of the full problem.
pub fn recover_primal(d: &DualPoint, p: &SystemParams) -> Result<Allocation> {
    recover_primal_routes(d, p, Routes::ALL)
}

/// Fixes the powers, the helper compute rate and the local bits at their
/// Lagrangian minimizers and picks slot durations and relayed bits by LP.
pub fn recover_primal_routes(d: &DualPoint, p: &SystemParams, routes: Routes) -> Result<Allocation> {
    let sol = eval_dual_routes(d, p, routes)?.solution;
    let first = initial_recovery(&Fixed::from_solution(&sol), p, routes);
    Ok(first.or_else(|| reference_point(p, routes)).unwrap_or_else(Allocation::zero))
}

fn initial_recovery(base: &Fixed, p: &SystemParams, routes: Routes) -> Option<Allocation> {
    let tolerances = std::iter::once(0.0).chain((0..11).map(|i| 1e-6 * f64::powi(2.0, i)));
    for eps in tolerances {
        if let Some(a) = recovery_lp(base, p, routes, eps).and_then(|a| repair(&a, p, routes)) {
            return Some(polish_powers(&a, p));
        }
    }
    // Raise the powers towards their caps until the bits fit.
    let mut theta = 1e-9;
    while theta <= 1.0 {
        let boosted = base.boost(p, theta);
        for eps in [0.0, 1e-6] {
            if let Some(a) = recovery_lp(&boosted, p, routes, eps).and_then(|a| repair(&a, p, routes)) {
                return Some(polish_powers(&a, p));
            }
        }
        theta *= 2.0;
    }
    None
}

/// Lagrangian minimizers held fixed during recovery.
#[derive(Debug, Clone, Copy)]
struct Fixed {
    powers: [f64; 3],
    m1: f64,
    l_u: f64,
}

impl Fixed {
    fn from_solution(s: &SubproblemSolution) -> Self {
        Self { powers: s.powers(), m1: s.sub1.m1, l_u: s.l_u }
    }

    fn boost(&self, p: &SystemParams, theta: f64) -> Self {
        let caps = [p.p_u_max, p.p_u_max, p.p_h_max];
        let mut out = *self;
        for (pw, cap) in out.powers.iter_mut().zip(caps) {
            *pw += theta * (cap - *pw);
        }
        out
    }
}

/// LP over `[τ1, τ2, τ3, l_a]` with `l_h = m1 (T - τ1)`. With `eps > 0` the
/// bit balance is relaxed to `|l_u + l_h + l_a - L| <= eps L`.
fn recovery_lp(f: &Fixed, p: &SystemParams, routes: Routes, eps: f64) -> Option<Allocation> {
    let t = p.block;
    let [p1, p2, p3] = f.powers;
    let m1 = if routes.helper { f.m1 } else { 0.0 };
    let kc3 = p.kappa_h * p.c_h.powi(3);
    let r01_1 = rate(Link::UserHelper, p1, p);
    let (r0, r01_2, r1) = (rate(Link::UserAp, p2, p), rate(Link::UserHelper, p2, p), rate(Link::HelperAp, p3, p));

    let mut lp = LpProblem::new(vec![p1 - kc3 * m1 * m1 * m1, p2, p3, 0.0]);
    lp.add_le(vec![-(m1 + r01_1), 0.0, 0.0, 0.0], -m1 * t)
        .add_le(vec![0.0, -r0, -r1, 1.0], 0.0)
        .add_le(vec![0.0, -r01_2, 0.0, 1.0], 0.0)
        .add_le(vec![1.0, 1.0, 1.0, p.ap_secs_per_bit()], t);
    let rhs = p.task_bits - f.l_u - m1 * t;
    let bit_row = vec![-m1, 0.0, 0.0, 1.0];
    if eps == 0.0 {
        lp.add_eq(bit_row, rhs);
    } else {
        lp.add_le(bit_row.clone(), rhs + eps * p.task_bits).add_ge(bit_row, rhs - eps * p.task_bits);
    }
    lp.bounds(0, 0.0, if routes.helper { t } else { 0.0 });
    let relay_t = if routes.relay { t } else { 0.0 };
    lp.bounds(1, 0.0, relay_t).bounds(2, 0.0, relay_t);
    lp.bounds(3, 0.0, if routes.relay { p.task_bits } else { 0.0 });
    let sol = lp_solve(&lp);
    if !sol.is_optimal() {
        return None;
    }
    let [tau1, tau2, tau3, l_a] = [sol.x[0], sol.x[1], sol.x[2], sol.x[3]].map(|v| v.max(0.0));
    let tau1 = tau1.min(t);
    let l_h = m1 * (t - tau1);
    Some(Allocation::from_powers([tau1, tau2, tau3], f.powers, [f.l_u, l_h, l_a], p))
}

/// Turns an almost-feasible schedule into an exactly feasible one by trimming
/// bits to the link and CPU limits and then balancing the bit count.
fn repair(a: &Allocation, p: &SystemParams, routes: Routes) -> Option<Allocation> {
    let t = p.block;
    let secs = p.ap_secs_per_bit();
    let mut taus = a.taus();
    let powers = a.powers();
    let [mut l_u, mut l_h, mut l_a] = a.bits();
    if !routes.local {
        l_u = 0.0;
    }

    let helper_cap = |taus: &[f64; 3]| {
        if routes.helper {
            (taus[0] * rate(Link::UserHelper, powers[0], p)).min((t - taus[0]) * p.f_h_max / p.c_h).max(0.0)
        } else {
            0.0
        }
    };
    let relay_cap = |taus: &[f64; 3]| {
        if routes.relay {
            let combined = taus[1] * rate(Link::UserAp, powers[1], p) + taus[2] * rate(Link::HelperAp, powers[2], p);
            combined.min(taus[1] * rate(Link::UserHelper, powers[1], p)).max(0.0)
        } else {
            0.0
        }
    };

    l_u = l_u.min(p.local_capacity());
    l_h = l_h.min(helper_cap(&taus));
    l_a = l_a.min(relay_cap(&taus));
    let used = taus.iter().sum::<f64>() + secs * l_a;
    if used > t {
        let avail = t - secs * l_a;
        if avail < 0.0 {
            return None;
        }
        let scale = avail / taus.iter().sum::<f64>();
        taus.iter_mut().for_each(|x| *x *= scale);
        l_h = l_h.min(helper_cap(&taus));
        l_a = l_a.min(relay_cap(&taus));
    }

    let deficit = p.task_bits - (l_u + l_h + l_a);
    if deficit > 0.0 {
        let mut left = deficit;
        let add_u = if routes.local { left.min(p.local_capacity() - l_u).max(0.0) } else { 0.0 };
        l_u += add_u;
        left -= add_u;
        let add_h = left.min(helper_cap(&taus) - l_h).max(0.0);
        l_h += add_h;
        left -= add_h;
        let slack_t = (t - taus.iter().sum::<f64>() - secs * l_a).max(0.0) / secs;
        let add_a = left.min(relay_cap(&taus) - l_a).min(slack_t).max(0.0);
        l_a += add_a;
        left -= add_a;
        if left > FEAS_TOL * 1e-3 * p.task_bits.max(1.0) {
            return None;
        }
    } else if deficit < 0.0 {
        let mut extra = -deficit;
        for l in [&mut l_u, &mut l_a, &mut l_h] {
            let cut = extra.min(*l);
            *l -= cut;
            extra -= cut;
        }
    }
    let out = Allocation::from_powers(taus, powers, [l_u, l_h, l_a], p);
    check_feasible(&out, p, FEAS_TOL).feasible.then_some(out)
}

/// Normalization between SI multipliers and the ellipsoid's coordinates.
struct DualScaling {
    /// Indices of the active coordinates among `(λ1, λ2, λ3, μ1, μ2)`.
    active: Vec<usize>,
    scale: [f64; 5],
    energy: f64,
}

impl DualScaling {
    fn new(p: &SystemParams, routes: Routes, energy_ref: f64) -> Self {
        let mut r_ref: f64 = 0.0;
        if routes.helper {
            r_ref = r_ref.max(rate(Link::UserHelper, p.p_u_max, p));
        }
        if routes.relay {
            r_ref = r_ref
                .max(rate(Link::UserHelper, p.p_u_max, p))
                .max(rate(Link::UserAp, p.p_u_max, p))
                .max(rate(Link::HelperAp, p.p_h_max, p));
        }
        if r_ref == 0.0 {
            r_ref = 1.0 / p.ap_secs_per_bit();
        }
        let price = energy_ref / p.task_bits;
        let active = routes.active_coords().iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i).collect();
        Self { active, scale: [price, price, price, price * r_ref, price], energy: energy_ref }
    }

    fn to_dual(&self, z: &[f64]) -> DualPoint {
        let mut v = [0.0; 5];
        for (k, &i) in self.active.iter().enumerate() {
            v[i] = z[k] * self.scale[i];
        }
        DualPoint::from_array(v)
    }
}

/// Separation oracle in normalized coordinates: sign constraints, the relay
/// bit-price constraint, then the dual function itself.
fn dual_oracle(p: &SystemParams, routes: Routes, s: &DualScaling, z: &[f64]) -> Result<CutOracleResult> {
    let m = z.len();
    let mut worst: Option<(f64, Vec<f64>)> = None;
    let mut consider = |violation: f64, normal: Vec<f64>| {
        let norm = normal.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v = violation / norm;
        if v > 0.0 && worst.as_ref().is_none_or(|(w, _)| v > *w) {
            worst = Some((v, normal));
        }
    };
    for k in 0..m {
        let mut n = vec![0.0; m];
        n[k] = -1.0;
        consider(-z[k], n);
    }
    if routes.relay {
        // -(λ2 + λ3 + μ1 c_a / f_a - μ2) <= 0 in normalized units.
        let d = s.to_dual(z);
        let coef = [0.0, 1.0, 1.0, p.ap_secs_per_bit(), -1.0];
        let normal: Vec<f64> = s.active.iter().map(|&i| -coef[i] * s.scale[i] / s.scale[4]).collect();
        consider(-d.relay_bit_price(p) / s.scale[4], normal);
    }
    if let Some((_, n)) = worst {
        return Ok(CutOracleResult::feasibility(n));
    }
    let e = eval_dual_routes(&s.to_dual(z), p, routes)?;
    let grad = s.active.iter().map(|&i| e.subgradient[i] * s.scale[i] / s.energy).collect();
    Ok(CutOracleResult::objective(e.g / s.energy, grad))
}

/// Result of the dual pipeline before it is labelled with a scheme.
pub(crate) struct PipelineOutput {
    pub status: SolveStatus,
    pub allocation: Allocation,
    pub energy: f64,
    pub dual: DualPoint,
    pub dual_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub capacity: f64,
    pub trace: Vec<TraceRow>,
}

pub(crate) fn run_pipeline(p: &SystemParams, routes: Routes) -> Result<PipelineOutput> {
    p.validate()?;
    let cap = capacity(p, routes);
    let mut out = PipelineOutput {
        status: SolveStatus::Infeasible,
        allocation: Allocation::zero(),
        energy: f64::NAN,
        dual: DualPoint::default(),
        dual_value: f64::NAN,
        gap: f64::NAN,
        iterations: 0,
        capacity: cap,
        trace: Vec::new(),
    };
    if p.task_bits == 0.0 {
        out.status = SolveStatus::Optimal;
        out.energy = 0.0;
        out.dual_value = 0.0;
        out.gap = 0.0;
        return Ok(out);
    }
    let Some(reference) = reference_point(p, routes) else {
        return Ok(out);
    };
    let e_ref = total_energy(&reference, p)?;
    let scaling = DualScaling::new(p, routes, e_ref);
    let m = scaling.active.len();

    let mut side = INIT_BOX;
    let mut state = EllipsoidState::ball(&vec![side / 2.0; m], side * (m as f64).sqrt() / 2.0);
    let mut tol_rel = 1e-10;
    let mut best: Option<(Allocation, f64)> = None;
    loop {
        let used = state.iterations;
        let opts = EllipsoidOptions { tol_abs: 1e-14, tol_rel, max_iter: MAX_ITER.saturating_sub(used) };
        let run = ellipsoid_resume(state, |z| dual_oracle(p, routes, &scaling, z), &opts)?;
        out.trace.extend(run.trace.iter().copied());
        out.iterations = run.iterations;
        state = run.state;
        let Some(z) = run.best_point.clone() else {
            break;
        };

        // The starting ball circumscribes the cube [0, side]^m. Its rim meets
        // the nonnegative orthant only at the cube's corners or past its upper
        // faces, and only the latter hints at an optimum outside the ball.
        if z.iter().any(|&x| x > 0.9 * side) && side < 1e6 {
            side *= 8.0;
            let iters = state.iterations;
            state = EllipsoidState::ball(&vec![side / 2.0; m], side * (m as f64).sqrt() / 2.0);
            state.iterations = iters;
            if iters < MAX_ITER {
                continue;
            }
        }

        let d = scaling.to_dual(&z);
        let g = run.best_value * scaling.energy;
        let a = recover_primal_routes(&d, p, routes)?;
        let e = total_energy(&a, p)?;
        if best.as_ref().is_none_or(|(_, be)| e < *be) {
            best = Some((a, e));
        }
        let (ba, be) = best.unwrap();
        out.allocation = ba;
        out.energy = be;
        out.dual = d;
        out.dual_value = g;
        out.gap = (be - g) / be;
        let feasible = check_feasible(&ba, p, FEAS_TOL).feasible;
        out.status = if feasible && out.gap <= GAP_TOL { SolveStatus::Optimal } else { SolveStatus::NonConverged };
        // Keep refining while iterations remain so that schemes with equal
        // optima compare equal to well below the reporting tolerance.
        if (feasible && out.gap <= AIM_GAP) || state.iterations >= MAX_ITER || tol_rel < 1e-15 {
            break;
        }
        tol_rel *= 1e-2;
    }
    if out.status != SolveStatus::Infeasible {
        polish(&mut out, p, routes);
    }
    Ok(out)
}

/// Replaces the reported pair by its KKT polish when that is feasible, no
/// worse in energy (unless the current point is infeasible) and still
/// certified by the dual.
fn polish(out: &mut PipelineOutput, p: &SystemParams, routes: Routes) {
    let Some((a, d)) = kkt_polish(&out.allocation, &out.dual, p, routes) else {
        return;
    };
    let Ok(e) = total_energy(&a, p) else {
        return;
    };
    let was_feasible = check_feasible(&out.allocation, p, FEAS_TOL).feasible;
    if !check_feasible(&a, p, FEAS_TOL).feasible || (was_feasible && e > out.energy * (1.0 + 1e-12)) {
        return;
    }
    let Ok(eval) = eval_dual_routes(&d, p, routes) else {
        return;
    };
    let g = eval.g.max(out.dual_value);
    let gap = (e - g) / e;
    if gap <= GAP_TOL {
        out.allocation = a;
        out.energy = e;
        out.dual = d;
        out.dual_value = g;
        out.gap = gap;
        out.status = SolveStatus::Optimal;
    }
}

/// Solves a scheme restricted to `routes` and labels the report.
pub fn solve_restricted(p: &SystemParams, routes: Routes, scheme: Scheme) -> Result<SolveReport> {
    let o = run_pipeline(p, routes)?;
    if o.status == SolveStatus::Infeasible {
        return Ok(SolveReport::infeasible(scheme, o.capacity));
    }
    Ok(SolveReport {
        status: o.status,
        scheme,
        mode: None,
        energy: o.energy,
        allocation: o.allocation,
        dual: o.dual,
        dual_value: o.dual_value,
        duality_gap: o.gap,
        iterations: o.iterations,
        capacity: o.capacity,
        trace: o.trace,
    })
}

/// Energy-optimal partial offloading.
pub fn solve_p1(p: &SystemParams) -> Result<SolveReport> {
    solve_restricted(p, Routes::ALL, Scheme::JointPartial)
}

/// Starting point of the dual search in SI units, exposed for diagnostics.
pub fn initial_dual(p: &SystemParams, routes: Routes) -> Result<Option<DualPoint>> {
    let Some(reference) = reference_point(p, routes) else {
        return Ok(None);
    };
    let s = DualScaling::new(p, routes, total_energy(&reference, p)?);
    Ok(Some(s.to_dual(&vec![INIT_BOX / 2.0; s.active.len()])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Geometry;

    #[test]
    fn capacity_edge_cases() {
        let p = SystemParams::default().with_block(0.0);
        assert_eq!(lmax_partial(&p), 0.0);
        let p = SystemParams { h01: 1e-300, h0: 1e-300, h1: 1e-300, ..SystemParams::default() };
        let c = lmax_partial(&p);
        assert!((c - p.local_capacity()).abs() <= 1e-6 * c, "{c}");
    }

    #[test]
    fn capacity_exceeds_local() {
        let p = SystemParams::with_geometry(&Geometry { d_user_helper: 20.0, ..Default::default() }, 1e5, 0.05).unwrap();
        assert!(lmax_partial(&p) > p.local_capacity());
    }

    #[test]
    fn zero_task() {
        let p = SystemParams::default().with_task_bits(0.0);
        let r = solve_p1(&p).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.energy, 0.0);
        assert_eq!(r.allocation, Allocation::zero());
    }

    #[test]
    fn infeasible_task() {
        let p = SystemParams::default();
        let cap = lmax_partial(&p);
        let r = solve_p1(&p.with_task_bits(cap * 1.01)).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert_eq!(r.capacity, cap);
    }

    #[test]
    fn default_instance_converges() {
        let p = SystemParams::default();
        let r = solve_p1(&p).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal, "{r:?}");
        assert!(r.duality_gap <= GAP_TOL);
        assert!(check_feasible(&r.allocation, &p, FEAS_TOL).feasible);
    }

    #[test]
    fn golden_section() {
        let x = golden_min(&|x: f64| (x - 0.3).powi(2), 0.0, 1.0, 80);
        assert!((x - 0.3).abs() < 1e-9);
    }
}
