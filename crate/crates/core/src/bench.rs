//! Benchmark schemes: restrictions of the partial and binary problems.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::dual::Routes;
use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::p1::{capacity, lmax_partial, solve_p1, solve_restricted, SolveReport};
use crate::p2::{lmax_binary, mode_comm_coop, mode_comp_coop, mode_local, solve_p2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Scheme {
    Local,
    CompPartial,
    CommPartial,
    CompBinary,
    CommBinary,
    JointPartial,
    JointBinary,
}

impl Scheme {
    /// All schemes in their stable output order.
    pub const ALL: [Scheme; 7] = [
        Scheme::Local,
        Scheme::CompPartial,
        Scheme::CommPartial,
        Scheme::CompBinary,
        Scheme::CommBinary,
        Scheme::JointPartial,
        Scheme::JointBinary,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Local => "local",
            Scheme::CompPartial => "comp-partial",
            Scheme::CommPartial => "comm-partial",
            Scheme::CompBinary => "comp-binary",
            Scheme::CommBinary => "comm-binary",
            Scheme::JointPartial => "joint-partial",
            Scheme::JointBinary => "joint-binary",
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, Scheme::Local | Scheme::CompBinary | Scheme::CommBinary | Scheme::JointBinary)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.label() == s.trim())
            .ok_or_else(|| Error::Field { field: "schemes".into(), message: format!("unknown scheme `{s}`") })
    }
}

pub fn run_benchmark(scheme: Scheme, p: &SystemParams) -> Result<SolveReport> {
    match scheme {
        Scheme::Local => mode_local(p),
        Scheme::CompPartial => solve_restricted(p, Routes::LOCAL_HELPER, scheme),
        Scheme::CommPartial => solve_restricted(p, Routes::LOCAL_RELAY, scheme),
        Scheme::CompBinary => mode_comp_coop(p),
        Scheme::CommBinary => mode_comm_coop(p),
        Scheme::JointPartial => solve_p1(p),
        Scheme::JointBinary => solve_p2(p),
    }
}

/// Computation capacity of a scheme.
pub fn scheme_capacity(scheme: Scheme, p: &SystemParams) -> f64 {
    match scheme {
        Scheme::Local => lmax_binary(p).l_u_max,
        Scheme::CompPartial => capacity(p, Routes::LOCAL_HELPER),
        Scheme::CommPartial => capacity(p, Routes::LOCAL_RELAY),
        Scheme::CompBinary => lmax_binary(p).l_h_max,
        Scheme::CommBinary => lmax_binary(p).l_a_max,
        Scheme::JointPartial => lmax_partial(p),
        Scheme::JointBinary => lmax_binary(p).l_max,
    }
}
