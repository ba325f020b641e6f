//! Three-node system model: the user, the helper and the access point (AP)
//! with its edge server.
//!
//! All quantities are SI (watts, joules, seconds, hertz, bits). Decibel
//! inputs are converted once at ingestion with [`dbm_to_watts`] and
//! [`db_to_linear`].

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default feasibility tolerance on normalized residuals.
pub const FEAS_TOL: f64 = 1e-9;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Placement of the three nodes. The helper sits on the segment between
/// the user and the AP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub d_user_ap: f64,
    pub d_user_helper: f64,
    /// Linear gain at the reference distance.
    pub beta0: f64,
    pub d0: f64,
    pub zeta: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            d_user_ap: 250.0,
            d_user_helper: 120.0,
            beta0: db_to_linear(-60.0),
            d0: 10.0,
            zeta: 3.0,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let ok = self.d_user_helper > 0.0
            && self.d_user_helper < self.d_user_ap
            && self.zeta > 0.0
            && self.beta0 > 0.0
            && self.d0 > 0.0
            && self.d_user_ap.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "geometry requires 0 < d_user_helper < d_user_ap and positive beta0, d0, zeta: {self:?}"
            )))
        }
    }

    /// Channel gains `(h01, h0, h1)` for user→helper, user→AP and helper→AP.
    pub fn gains(&self) -> Result<(f64, f64, f64)> {
        Ok((
            pathloss(self.d_user_helper, self)?,
            pathloss(self.d_user_ap, self)?,
            pathloss(self.d_user_ap - self.d_user_helper, self)?,
        ))
    }
}

/// Power-law pathloss `beta0 * (d / d0)^(-zeta)`.
pub fn pathloss(d: f64, g: &Geometry) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::NonPositiveDistance(d));
    }
    Ok(g.beta0 * (d / g.d0).powf(-g.zeta))
}

/// Physical and computational constants of one problem instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Task size `L` in bits.
    pub task_bits: f64,
    /// Block duration `T` in seconds.
    pub block: f64,
    pub bandwidth: f64,
    pub h01: f64,
    pub h0: f64,
    pub h1: f64,
    /// Noise power at the AP.
    pub sigma0_sq: f64,
    /// Noise power at the helper.
    pub sigma1_sq: f64,
    pub gamma_gap: f64,
    pub p_u_max: f64,
    pub p_h_max: f64,
    pub c_u: f64,
    pub c_h: f64,
    pub c_a: f64,
    pub kappa_u: f64,
    pub kappa_h: f64,
    pub f_u_max: f64,
    pub f_h_max: f64,
    pub f_a_max: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::with_geometry(&Geometry::default(), 2e4, 0.1).expect("default geometry is valid")
    }
}

impl SystemParams {
    /// Reference constants with channel gains taken from `geometry`.
    pub fn with_geometry(geometry: &Geometry, task_bits: f64, block: f64) -> Result<Self> {
        let (h01, h0, h1) = geometry.gains()?;
        Ok(Self {
            task_bits,
            block,
            bandwidth: 1e6,
            h01,
            h0,
            h1,
            sigma0_sq: dbm_to_watts(-70.0),
            sigma1_sq: dbm_to_watts(-70.0),
            gamma_gap: 1.0,
            p_u_max: dbm_to_watts(40.0),
            p_h_max: dbm_to_watts(40.0),
            c_u: 1e3,
            c_h: 1e3,
            c_a: 1e3,
            kappa_u: 1e-27,
            kappa_h: 0.3e-27,
            f_u_max: 2e9,
            f_h_max: 3e9,
            f_a_max: 5e9,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("block", self.block),
            ("bandwidth", self.bandwidth),
            ("h01", self.h01),
            ("h0", self.h0),
            ("h1", self.h1),
            ("sigma0_sq", self.sigma0_sq),
            ("sigma1_sq", self.sigma1_sq),
            ("p_u_max", self.p_u_max),
            ("p_h_max", self.p_h_max),
            ("c_u", self.c_u),
            ("c_h", self.c_h),
            ("c_a", self.c_a),
            ("kappa_u", self.kappa_u),
            ("kappa_h", self.kappa_h),
            ("f_u_max", self.f_u_max),
            ("f_h_max", self.f_h_max),
            ("f_a_max", self.f_a_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.task_bits >= 0.0 && self.task_bits.is_finite()) {
            return Err(Error::InvalidParams(format!("task_bits must be >= 0, got {}", self.task_bits)));
        }
        if !(self.gamma_gap >= 1.0 && self.gamma_gap.is_finite()) {
            return Err(Error::InvalidParams(format!("gamma_gap must be >= 1, got {}", self.gamma_gap)));
        }
        Ok(())
    }

    /// Linear SNR per watt of a link, `h / (Γ σ²)` on the user→helper hop and
    /// `h / σ²` on the two hops into the AP.
    pub fn snr_per_watt(&self, link: Link) -> f64 {
        match link {
            Link::UserHelper => self.h01 / (self.gamma_gap * self.sigma1_sq),
            Link::UserAp => self.h0 / self.sigma0_sq,
            Link::HelperAp => self.h1 / self.sigma0_sq,
        }
    }

    /// Seconds of AP execution per offloaded bit.
    pub fn ap_secs_per_bit(&self) -> f64 {
        self.c_a / self.f_a_max
    }

    /// Bits the user can compute alone within the block.
    pub fn local_capacity(&self) -> f64 {
        self.block * self.f_u_max / self.c_u
    }

    pub fn with_task_bits(mut self, bits: f64) -> Self {
        self.task_bits = bits;
        self
    }

    pub fn with_block(mut self, block: f64) -> Self {
        self.block = block;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    UserHelper,
    UserAp,
    HelperAp,
}

/// Achievable rate in bits/s at transmit power `power`.
pub fn rate(link: Link, power: f64, p: &SystemParams) -> f64 {
    p.bandwidth * (power.max(0.0) * p.snr_per_watt(link)).ln_1p() / LN_2
}

/// Smallest power achieving `rate_bps` on `link`; inverse of [`rate`].
pub fn power_for_rate(link: Link, rate_bps: f64, p: &SystemParams) -> f64 {
    if rate_bps <= 0.0 {
        return 0.0;
    }
    (rate_bps / p.bandwidth * LN_2).exp_m1() / p.snr_per_watt(link)
}

/// Bits carried in `duration` seconds at power `power`; zero for a zero-length slot.
pub fn slot_bits(link: Link, duration: f64, power: f64, p: &SystemParams) -> f64 {
    if duration <= 0.0 {
        0.0
    } else {
        duration * rate(link, power, p)
    }
}

/// Energy of computing `bits` at a constant CPU frequency spread over `window`
/// seconds: `kappa * c^3 * bits^3 / window^2`.
pub fn local_compute_energy(bits: f64, window: f64, kappa: f64, cycles_per_bit: f64) -> Result<f64> {
    if bits <= 0.0 {
        return Ok(0.0);
    }
    if !(window > 0.0) {
        return Err(Error::InfeasibleWindow { bits, window });
    }
    let cycles = cycles_per_bit * bits;
    Ok(kappa * cycles * cycles * cycles / (window * window))
}

/// A complete primal point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Allocation {
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    /// AP execution time, `c_a l_a / f_a_max`.
    pub tau4: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub l_u: f64,
    pub l_h: f64,
    pub l_a: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub f_u: f64,
    pub f_h: f64,
}

impl Allocation {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Assembles an allocation from slot durations, powers and the bit split,
    /// filling in the slot energies, the AP slot and the CPU frequencies.
    pub fn from_powers(taus: [f64; 3], powers: [f64; 3], bits: [f64; 3], p: &SystemParams) -> Self {
        let [tau1, tau2, tau3] = taus;
        let [p1, p2, p3] = powers;
        let [l_u, l_h, l_a] = bits;
        let helper_window = p.block - tau1;
        Self {
            tau1,
            tau2,
            tau3,
            tau4: p.ap_secs_per_bit() * l_a,
            p1,
            p2,
            p3,
            l_u,
            l_h,
            l_a,
            e1: tau1 * p1,
            e2: tau2 * p2,
            e3: tau3 * p3,
            f_u: p.c_u * l_u / p.block,
            f_h: if l_h > 0.0 && helper_window > 0.0 { p.c_h * l_h / helper_window } else { 0.0 },
        }
    }

    /// Same as [`Allocation::from_powers`] with slot energies instead of
    /// powers; a zero-length slot carries zero power.
    pub fn from_energies(taus: [f64; 3], energies: [f64; 3], bits: [f64; 3], p: &SystemParams) -> Self {
        let mut powers = [0.0; 3];
        for i in 0..3 {
            if taus[i] > 0.0 {
                powers[i] = energies[i] / taus[i];
            }
        }
        let mut a = Self::from_powers(taus, powers, bits, p);
        a.e1 = energies[0];
        a.e2 = energies[1];
        a.e3 = energies[2];
        a
    }

    pub fn taus(&self) -> [f64; 3] {
        [self.tau1, self.tau2, self.tau3]
    }

    pub fn powers(&self) -> [f64; 3] {
        [self.p1, self.p2, self.p3]
    }

    pub fn bits(&self) -> [f64; 3] {
        [self.l_u, self.l_h, self.l_a]
    }
}

/// Objective of the partial-offloading problem: user and helper compute
/// energy plus the three offloading energies.
pub fn total_energy(a: &Allocation, p: &SystemParams) -> Result<f64> {
    let user = local_compute_energy(a.l_u, p.block, p.kappa_u, p.c_u)?;
    let helper = local_compute_energy(a.l_h, p.block - a.tau1, p.kappa_h, p.c_h)?;
    Ok(user + helper + a.e1 + a.e2 + a.e3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    BitBalance,
    Deadline,
    /// `l_h <= tau1 r01(P1)`.
    HelperLink,
    /// `l_a <= tau2 r0(P2) + tau3 r1(P3)`.
    RelayCombined,
    /// `l_a <= tau2 r01(P2)`.
    RelayHop,
    UserFrequency,
    HelperFrequency,
    PowerRange(u8),
    SlotRange(u8),
    BitsNonNegative(u8),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub constraint: Constraint,
    /// Normalized residual; positive means violated.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub residuals: Vec<Residual>,
    pub max_violation: f64,
    pub feasible: bool,
}

impl ConstraintReport {
    pub fn get(&self, c: Constraint) -> Option<f64> {
        self.residuals.iter().find(|r| r.constraint == c).map(|r| r.value)
    }
}

fn range_residual(x: f64, lo: f64, hi: f64, scale: f64) -> f64 {
    (lo - x).max(x - hi) / scale
}

/// Evaluates every constraint of the partial-offloading problem at `a`.
/// Bit constraints are normalized by `L`, time constraints by `T`, power
/// bounds by the cap and frequency bounds by the cycle budget.
pub fn check_feasible(a: &Allocation, p: &SystemParams, tol: f64) -> ConstraintReport {
    let t = p.block;
    let bit_scale = p.task_bits.max(1.0);
    let mut residuals = Vec::with_capacity(16);
    let mut push = |constraint, value: f64| residuals.push(Residual { constraint, value });

    push(Constraint::BitBalance, (a.l_u + a.l_h + a.l_a - p.task_bits).abs() / bit_scale);
    push(
        Constraint::Deadline,
        (a.tau1 + a.tau2 + a.tau3 + p.ap_secs_per_bit() * a.l_a - t) / t,
    );
    push(
        Constraint::HelperLink,
        (a.l_h - slot_bits(Link::UserHelper, a.tau1, a.p1, p)) / bit_scale,
    );
    push(
        Constraint::RelayCombined,
        (a.l_a - slot_bits(Link::UserAp, a.tau2, a.p2, p) - slot_bits(Link::HelperAp, a.tau3, a.p3, p))
            / bit_scale,
    );
    push(
        Constraint::RelayHop,
        (a.l_a - slot_bits(Link::UserHelper, a.tau2, a.p2, p)) / bit_scale,
    );
    push(
        Constraint::UserFrequency,
        (p.c_u * a.l_u - t * p.f_u_max) / (t * p.f_u_max),
    );
    push(
        Constraint::HelperFrequency,
        (p.c_h * a.l_h - (t - a.tau1) * p.f_h_max) / (t * p.f_h_max),
    );
    let caps = [p.p_u_max, p.p_u_max, p.p_h_max];
    for (i, (&pw, cap)) in a.powers().iter().zip(caps).enumerate() {
        push(Constraint::PowerRange(i as u8 + 1), range_residual(pw, 0.0, cap, cap));
    }
    for (i, &tau) in a.taus().iter().enumerate() {
        push(Constraint::SlotRange(i as u8 + 1), range_residual(tau, 0.0, t, t));
    }
    for (i, &l) in a.bits().iter().enumerate() {
        push(Constraint::BitsNonNegative(i as u8), -l / bit_scale);
    }

    let max_violation = residuals
        .iter()
        .map(|r| r.value)
        .fold(0.0_f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v) });
    ConstraintReport { feasible: max_violation <= tol, residuals, max_violation }
}
