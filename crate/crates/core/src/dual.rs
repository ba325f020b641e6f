//! Dual function of the convex reformulation of the partial-offloading
//! problem. The Lagrangian separates into five subproblems, each solved in
//! closed or semi-closed form.
//!
//! Everything here is SI. The multipliers are
//! `λ1` for `l_h <= τ1 r01(P1)`, `λ2` for `l_a <= τ2 r0(P2) + τ3 r1(P3)`,
//! `λ3` for `l_a <= τ2 r01(P2)`, `μ1` for the deadline and `μ2` for the bit
//! balance.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rate, Link, SystemParams};

/// Which execution routes a (possibly restricted) problem may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Routes {
    pub local: bool,
    pub helper: bool,
    pub relay: bool,
}

impl Routes {
    pub const ALL: Routes = Routes { local: true, helper: true, relay: true };
    pub const LOCAL_HELPER: Routes = Routes { local: true, helper: true, relay: false };
    pub const LOCAL_RELAY: Routes = Routes { local: true, helper: false, relay: true };
    pub const RELAY: Routes = Routes { local: false, helper: false, relay: true };

    /// Dual coordinates that carry a constraint under these routes, in the
    /// order `(λ1, λ2, λ3, μ1, μ2)`.
    pub fn active_coords(&self) -> [bool; 5] {
        [self.helper, self.relay, self.relay, true, true]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DualPoint {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl DualPoint {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64, mu1: f64, mu2: f64) -> Self {
        Self { lambda1, lambda2, lambda3, mu1, mu2 }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.lambda1, self.lambda2, self.lambda3, self.mu1, self.mu2]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    /// Coefficient of `l_a` in the Lagrangian.
    pub fn relay_bit_price(&self, p: &SystemParams) -> f64 {
        self.lambda2 + self.lambda3 + self.mu1 * p.ap_secs_per_bit() - self.mu2
    }

    fn check_signs(&self) -> Result<()> {
        let v = self.to_array();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::DualInfeasible(format!("non-finite multiplier in {self:?}")));
        }
        if v[..4].iter().any(|&x| x < 0.0) {
            return Err(Error::DualInfeasible(format!("negative multiplier in {self:?}")));
        }
        Ok(())
    }

    /// Membership in the dual domain used by the solver: nonnegative
    /// inequality multipliers and, when the relay route is open, a
    /// nonnegative price on relayed bits.
    pub fn check_domain(&self, p: &SystemParams, routes: Routes) -> Result<()> {
        self.check_signs()?;
        if routes.relay && self.relay_bit_price(p) < 0.0 {
            return Err(Error::DualInfeasible(format!(
                "lambda2 + lambda3 + mu1 c_a / f_a - mu2 = {} < 0",
                self.relay_bit_price(p)
            )));
        }
        Ok(())
    }
}

/// `B / ln 2`, the slope of the rate at zero SNR per unit SNR.
fn rate_slope(p: &SystemParams) -> f64 {
    p.bandwidth / LN_2
}

fn is_tie(rho: f64, d: &DualPoint) -> bool {
    rho.abs() <= 1e-12 * d.mu1.max(1.0)
}

fn slot_choice(rho: f64, d: &DualPoint, t: f64) -> f64 {
    if rho < 0.0 && !is_tie(rho, d) {
        t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sub1 {
    pub p1: f64,
    /// Helper compute rate in bits/s, so `l_h = m1 (T - τ1)`.
    pub m1: f64,
    pub tau1: f64,
    pub e1: f64,
    pub l_h: f64,
    pub rho1: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sub2 {
    pub p2: f64,
    pub tau2: f64,
    pub e2: f64,
    pub rho2: f64,
    pub alpha2: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sub3 {
    pub p3: f64,
    pub tau3: f64,
    pub e3: f64,
    pub rho3: f64,
    pub alpha3: f64,
    pub value: f64,
}

/// Subproblem in `(E1, τ1, l_h)`: helper offloading and helper computing.
pub fn solve_sub1(d: &DualPoint, p: &SystemParams) -> Result<Sub1> {
    d.check_signs()?;
    let t = p.block;
    let k = rate_slope(p);
    let a01 = p.snr_per_watt(Link::UserHelper);
    let kc3 = p.kappa_h * p.c_h.powi(3);
    let m_cap = p.f_h_max / p.c_h;

    let p1_free = d.lambda1 * k - 1.0 / a01;
    let p1 = p1_free.clamp(0.0, p.p_u_max);
    let alpha1 = if p1_free > p.p_u_max { d.lambda1 * k * a01 / (1.0 + p.p_u_max * a01) - 1.0 } else { 0.0 };

    let surplus = d.mu2 - d.lambda1;
    let m_free = if surplus > 0.0 { (surplus / (3.0 * kc3)).sqrt() } else { 0.0 };
    let m1 = m_free.min(m_cap);
    let beta1 = if m_free > m_cap { surplus - 3.0 * kc3 * m1 * m1 } else { 0.0 };

    // Per-second Lagrangian while transmitting (a) and while computing (c).
    let a = p1 + d.mu1 - d.lambda1 * rate(Link::UserHelper, p1, p);
    let c = kc3 * m1 * m1 * m1 - surplus * m1;
    let rho1 = a - c;
    let tau1 = slot_choice(rho1, d, t);
    Ok(Sub1 {
        p1,
        m1,
        tau1,
        e1: p1 * tau1,
        l_h: m1 * (t - tau1),
        rho1,
        alpha1,
        beta1,
        value: t * c + tau1 * rho1,
    })
}

/// Subproblem in `(E2, τ2)`: the user's broadcast to the AP and the helper.
pub fn solve_sub2(d: &DualPoint, p: &SystemParams) -> Result<Sub2> {
    d.check_signs()?;
    let k = rate_slope(p);
    let a0 = p.snr_per_watt(Link::UserAp);
    let a01 = p.snr_per_watt(Link::UserHelper);
    let per_sec = |pw: f64| {
        pw + d.mu1 - d.lambda2 * rate(Link::UserAp, pw, p) - d.lambda3 * rate(Link::UserHelper, pw, p)
    };

    // Stationarity of the per-second Lagrangian in P2 is u P^2 + v P + w = 0.
    let u = a0 * a01 / k;
    let v = (a0 + a01) / k - (d.lambda2 + d.lambda3) * a0 * a01;
    let w = 1.0 / k - d.lambda2 * a0 - d.lambda3 * a01;
    let disc = v * v - 4.0 * u * w;
    let p2 = if w >= 0.0 {
        0.0
    } else if disc < 0.0 {
        if per_sec(p.p_u_max) < per_sec(0.0) { p.p_u_max } else { 0.0 }
    } else {
        let sq = disc.sqrt();
        let root = if v > 0.0 { -2.0 * w / (v + sq) } else { (sq - v) / (2.0 * u) };
        root.clamp(0.0, p.p_u_max)
    };
    let alpha2 = if w < 0.0 && p2 == p.p_u_max {
        (d.lambda3 * k * a01 / (1.0 + p2 * a01) + d.lambda2 * k * a0 / (1.0 + p2 * a0) - 1.0).max(0.0)
    } else {
        0.0
    };
    let rho2 = per_sec(p2);
    let tau2 = slot_choice(rho2, d, p.block);
    Ok(Sub2 { p2, tau2, e2: p2 * tau2, rho2, alpha2, value: tau2 * rho2 })
}

/// Subproblem in `(E3, τ3)`: the helper's relay transmission.
pub fn solve_sub3(d: &DualPoint, p: &SystemParams) -> Result<Sub3> {
    d.check_signs()?;
    let k = rate_slope(p);
    let a1 = p.snr_per_watt(Link::HelperAp);
    let p3_free = d.lambda2 * k - 1.0 / a1;
    let p3 = p3_free.clamp(0.0, p.p_h_max);
    let alpha3 = if p3_free > p.p_h_max { d.lambda2 * k * a1 / (1.0 + p3 * a1) - 1.0 } else { 0.0 };
    let rho3 = p3 + d.mu1 - d.lambda2 * rate(Link::HelperAp, p3, p);
    let tau3 = slot_choice(rho3, d, p.block);
    Ok(Sub3 { p3, tau3, e3: p3 * tau3, rho3, alpha3, value: tau3 * rho3 })
}

/// Local bits: minimizes `κu cu³ lu³ / T² - μ2 lu` over the frequency cap.
pub fn solve_sub4(d: &DualPoint, p: &SystemParams) -> f64 {
    if d.mu2 <= 0.0 {
        return 0.0;
    }
    let free = p.block * (d.mu2 / (3.0 * p.kappa_u * p.c_u.powi(3))).sqrt();
    free.min(p.local_capacity())
}

/// Bits offloaded to the AP: all or nothing by the sign of their price, with
/// a tie going to zero.
pub fn solve_sub5(d: &DualPoint, p: &SystemParams, task_bits: f64) -> f64 {
    if d.relay_bit_price(p) < 0.0 {
        task_bits
    } else {
        0.0
    }
}

/// Assembled minimizer of the Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SubproblemSolution {
    pub sub1: Sub1,
    pub sub2: Sub2,
    pub sub3: Sub3,
    pub l_u: f64,
    pub l_a: f64,
    pub g_value: f64,
}

impl SubproblemSolution {
    pub fn taus(&self) -> [f64; 3] {
        [self.sub1.tau1, self.sub2.tau2, self.sub3.tau3]
    }

    pub fn powers(&self) -> [f64; 3] {
        [self.sub1.p1, self.sub2.p2, self.sub3.p3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualEval {
    pub g: f64,
    pub solution: SubproblemSolution,
    /// Constraint values at the minimizer, a supergradient of `g`.
    pub subgradient: [f64; 5],
}

pub fn eval_dual(d: &DualPoint, p: &SystemParams) -> Result<DualEval> {
    eval_dual_routes(d, p, Routes::ALL)
}

/// Dual function of the problem restricted to `routes`. Closed routes keep
/// their variables at zero and their multipliers are ignored.
pub fn eval_dual_routes(d: &DualPoint, p: &SystemParams, routes: Routes) -> Result<DualEval> {
    let mut d = *d;
    if !routes.helper {
        d.lambda1 = 0.0;
    }
    if !routes.relay {
        d.lambda2 = 0.0;
        d.lambda3 = 0.0;
    }
    d.check_domain(p, routes)?;

    let s1 = if routes.helper { solve_sub1(&d, p)? } else { Sub1::default() };
    let (s2, s3, l_a) = if routes.relay {
        (solve_sub2(&d, p)?, solve_sub3(&d, p)?, solve_sub5(&d, p, p.task_bits))
    } else {
        (Sub2::default(), Sub3::default(), 0.0)
    };
    let l_u = if routes.local { solve_sub4(&d, p) } else { 0.0 };

    let t = p.block;
    let v4 = p.kappa_u * (p.c_u * l_u).powi(3) / (t * t) - d.mu2 * l_u;
    let v5 = d.relay_bit_price(p) * l_a;
    let g = s1.value + s2.value + s3.value + v4 + v5 - d.mu1 * t + d.mu2 * p.task_bits;

    let subgradient = [
        if routes.helper { s1.l_h - s1.tau1 * rate(Link::UserHelper, s1.p1, p) } else { 0.0 },
        if routes.relay {
            l_a - s2.tau2 * rate(Link::UserAp, s2.p2, p) - s3.tau3 * rate(Link::HelperAp, s3.p3, p)
        } else {
            0.0
        },
        if routes.relay { l_a - s2.tau2 * rate(Link::UserHelper, s2.p2, p) } else { 0.0 },
        s1.tau1 + s2.tau2 + s3.tau3 + l_a * p.ap_secs_per_bit() - t,
        p.task_bits - l_u - s1.l_h - l_a,
    ];
    Ok(DualEval {
        g,
        solution: SubproblemSolution { sub1: s1, sub2: s2, sub3: s3, l_u, l_a, g_value: g },
        subgradient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn sub1_clips() {
        let p = SystemParams::default();
        let s = solve_sub1(&DualPoint::default(), &p).unwrap();
        assert_eq!(s.p1, 0.0);
        let d = DualPoint { lambda1: 1.0, ..Default::default() };
        let s = solve_sub1(&d, &p).unwrap();
        assert_eq!(s.p1, p.p_u_max);
        assert!(s.alpha1 > 0.0);
    }

    #[test]
    fn rho1_matches_multiplier_form() {
        let p = SystemParams::default();
        let k = p.bandwidth / LN_2;
        let a01 = p.snr_per_watt(Link::UserHelper);
        for d in [
            DualPoint::new(3e-7, 0.0, 0.0, 2.0, 5e-7),
            DualPoint::new(1.0, 0.0, 0.0, 0.5, 4.0),
            DualPoint::new(2e-7, 0.0, 0.0, 1.0, 1e-7),
        ] {
            let s = solve_sub1(&d, &p).unwrap();
            let snr = s.p1 * a01;
            let explicit = d.mu1 - d.lambda1 * rate(Link::UserHelper, s.p1, &p)
                + 2.0 * p.kappa_h * (p.c_h * s.m1).powi(3)
                + d.lambda1 * k * snr / (1.0 + snr)
                - s.alpha1 * p.p_u_max
                + s.beta1 * p.f_h_max / p.c_h;
            assert!((s.rho1 - explicit).abs() <= 1e-9 * (1.0 + s.rho1.abs()), "{} vs {}", s.rho1, explicit);
        }
    }

    #[test]
    fn sub2_zero_prices() {
        let p = SystemParams::default();
        let d = DualPoint { mu1: 1.0, ..Default::default() };
        let s = solve_sub2(&d, &p).unwrap();
        assert_eq!(s.p2, 0.0);
        assert_eq!(s.tau2, 0.0);
    }

    #[test]
    fn sub2_is_stationary() {
        let p = SystemParams::default();
        let k = p.bandwidth / LN_2;
        let (a0, a01) = (p.snr_per_watt(Link::UserAp), p.snr_per_watt(Link::UserHelper));
        let d = DualPoint::new(0.0, 2e-7, 3e-7, 1.0, 0.0);
        let s = solve_sub2(&d, &p).unwrap();
        assert!(s.p2 > 0.0 && s.p2 < p.p_u_max);
        let deriv = 1.0 - d.lambda2 * k * a0 / (1.0 + s.p2 * a0) - d.lambda3 * k * a01 / (1.0 + s.p2 * a01);
        assert!(deriv.abs() < 1e-10);
    }

    #[test]
    fn sub3_cases() {
        let p = SystemParams::default();
        let d = DualPoint { mu1: 0.7, ..Default::default() };
        let s = solve_sub3(&d, &p).unwrap();
        assert_eq!((s.p3, s.rho3, s.tau3), (0.0, 0.7, 0.0));
        let d = DualPoint { lambda2: 1.0, ..Default::default() };
        let s = solve_sub3(&d, &p).unwrap();
        assert_eq!(s.p3, p.p_h_max);
        assert_eq!(s.tau3, p.block);
    }

    #[test]
    fn sub4_values() {
        let p = SystemParams { block: 1.0, f_u_max: 1e12, ..SystemParams::default() };
        assert_eq!(solve_sub4(&DualPoint { mu2: -1.0, ..Default::default() }, &p), 0.0);
        let d = DualPoint { mu2: 3e-18, ..Default::default() };
        assert!(close(solve_sub4(&d, &p), 1.0, 1e-12));
        let p = SystemParams::default();
        let d = DualPoint { mu2: 1e3, ..Default::default() };
        assert_eq!(solve_sub4(&d, &p), p.local_capacity());
    }

    #[test]
    fn sub5_sign_rule() {
        let p = SystemParams::default();
        assert_eq!(solve_sub5(&DualPoint::new(0.0, 1.0, 0.0, 0.0, 0.5), &p, 10.0), 0.0);
        assert_eq!(solve_sub5(&DualPoint::new(0.0, 0.0, 0.0, 0.0, 0.5), &p, 10.0), 10.0);
        assert_eq!(solve_sub5(&DualPoint::new(0.0, 0.25, 0.25, 0.0, 0.5), &p, 10.0), 0.0);
    }

    #[test]
    fn origin_gives_zero() {
        let p = SystemParams::default();
        let e = eval_dual(&DualPoint::default(), &p).unwrap();
        assert_eq!(e.g, 0.0);
        assert_eq!(e.solution.l_u, 0.0);
        assert_eq!(e.solution.taus(), [0.0; 3]);
    }

    #[test]
    fn domain_rejections() {
        let p = SystemParams::default();
        assert!(eval_dual(&DualPoint::new(-1.0, 0.0, 0.0, 0.0, 0.0), &p).is_err());
        assert!(eval_dual(&DualPoint::new(0.0, 0.0, 0.0, 0.0, 1.0), &p).is_err());
        // Without the relay route the bit-price condition does not apply.
        assert!(eval_dual_routes(&DualPoint::new(0.0, 0.0, 0.0, 0.0, 1.0), &p, Routes::LOCAL_HELPER).is_ok());
    }
}
