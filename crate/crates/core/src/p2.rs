//! Binary offloading: the whole task runs at exactly one node, so the
//! problem splits into three computation modes that are solved separately.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::bench::Scheme;
use crate::dual::Routes;
use crate::error::Result;
use crate::model::{local_compute_energy, power_for_rate, rate, Allocation, Link, SystemParams};
use crate::p1::{capacity, solve_restricted, SolveReport, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BinaryMode {
    Local,
    CompCoop,
    CommCoop,
}

impl BinaryMode {
    pub fn label(&self) -> &'static str {
        match self {
            BinaryMode::Local => "local",
            BinaryMode::CompCoop => "comp-coop",
            BinaryMode::CommCoop => "comm-coop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryCapacity {
    pub l_u_max: f64,
    pub l_h_max: f64,
    pub l_a_max: f64,
    pub l_max: f64,
}

/// Per-mode computation capacities and their maximum.
pub fn lmax_binary(p: &SystemParams) -> BinaryCapacity {
    let t = p.block.max(0.0);
    let l_u_max = t * p.f_u_max / p.c_u;
    let r01 = rate(Link::UserHelper, p.p_u_max, p);
    let tau_b = t * p.f_h_max / (p.c_h * r01 + p.f_h_max);
    let l_h_max = tau_b * r01;
    let l_a_max = capacity(p, Routes::RELAY);
    BinaryCapacity { l_u_max, l_h_max, l_a_max, l_max: l_u_max.max(l_h_max).max(l_a_max) }
}

pub fn mode_local(p: &SystemParams) -> Result<SolveReport> {
    p.validate()?;
    let cap = p.local_capacity();
    if p.task_bits > cap {
        return Ok(SolveReport::infeasible(Scheme::Local, cap));
    }
    let energy = local_compute_energy(p.task_bits, p.block, p.kappa_u, p.c_u)?;
    let a = Allocation::from_powers([0.0; 3], [0.0; 3], [p.task_bits, 0.0, 0.0], p);
    Ok(SolveReport::exact(Scheme::Local, a, energy, cap))
}

/// Energy of offloading everything to the helper when the offloading slot
/// lasts `tau` seconds: minimal transmit energy plus helper computing.
pub fn comp_coop_objective(tau: f64, p: &SystemParams) -> f64 {
    let l = p.task_bits;
    let a01 = p.snr_per_watt(Link::UserHelper);
    let x = l / (p.bandwidth * tau);
    let window = p.block - tau;
    (x * LN_2).exp_m1() * tau / a01 + p.kappa_h * (p.c_h * l).powi(3) / (window * window)
}

fn comp_coop_slope(tau: f64, p: &SystemParams) -> f64 {
    let l = p.task_bits;
    let a01 = p.snr_per_watt(Link::UserHelper);
    let x = l / (p.bandwidth * tau);
    let xl = x * LN_2;
    let window = p.block - tau;
    (xl.exp_m1() - xl * xl.exp()) / a01 + 2.0 * p.kappa_h * (p.c_h * l).powi(3) / window.powi(3)
}

/// Feasible offloading-slot interval of the computation-cooperation mode.
pub fn comp_coop_interval(p: &SystemParams) -> Option<(f64, f64)> {
    let l = p.task_bits;
    let lo = l / rate(Link::UserHelper, p.p_u_max, p);
    let hi = p.block - p.c_h * l / p.f_h_max;
    (lo <= hi).then_some((lo, hi))
}

pub fn mode_comp_coop(p: &SystemParams) -> Result<SolveReport> {
    p.validate()?;
    let cap = lmax_binary(p).l_h_max;
    if p.task_bits == 0.0 {
        return Ok(SolveReport::exact(Scheme::CompBinary, Allocation::zero(), 0.0, cap));
    }
    let Some((lo, hi)) = (p.task_bits <= cap).then(|| comp_coop_interval(p)).flatten() else {
        return Ok(SolveReport::infeasible(Scheme::CompBinary, cap));
    };
    let tau = if comp_coop_slope(lo, p) >= 0.0 {
        lo
    } else if comp_coop_slope(hi, p) <= 0.0 {
        hi
    } else {
        let (mut a, mut b) = (lo, hi);
        while b - a > 1e-12 * p.block {
            let mid = 0.5 * (a + b);
            if comp_coop_slope(mid, p) > 0.0 {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };
    let p1 = power_for_rate(Link::UserHelper, p.task_bits / tau, p).min(p.p_u_max);
    let a = Allocation::from_powers([tau, 0.0, 0.0], [p1, 0.0, 0.0], [0.0, p.task_bits, 0.0], p);
    Ok(SolveReport::exact(Scheme::CompBinary, a, comp_coop_objective(tau, p), cap))
}

pub fn mode_comm_coop(p: &SystemParams) -> Result<SolveReport> {
    solve_restricted(p, Routes::RELAY, Scheme::CommBinary)
}

/// Energy-optimal binary offloading: the cheapest feasible mode, preferring
/// fewer transmissions on ties.
pub fn solve_p2(p: &SystemParams) -> Result<SolveReport> {
    p.validate()?;
    let cap = lmax_binary(p).l_max;
    let ((local, comp), comm) = rayon::join(|| (mode_local(p), mode_comp_coop(p)), || mode_comm_coop(p));
    let candidates = [(BinaryMode::Local, local?), (BinaryMode::CompCoop, comp?), (BinaryMode::CommCoop, comm?)];
    let mut best: Option<(BinaryMode, SolveReport)> = None;
    for (mode, r) in candidates {
        if r.status == SolveStatus::Infeasible || !r.energy.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((_, b)) => r.energy < b.energy && (b.energy - r.energy) > 1e-12 * b.energy.abs(),
        };
        if better {
            best = Some((mode, r));
        }
    }
    Ok(match best {
        Some((mode, mut r)) => {
            r.scheme = Scheme::JointBinary;
            r.mode = Some(mode);
            r.capacity = cap;
            r
        }
        None => SolveReport::infeasible(Scheme::JointBinary, cap),
    })
}
