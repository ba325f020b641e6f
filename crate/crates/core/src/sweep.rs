//! Parameter sweeps over a scenario, written as CSV.

use std::io::Write;

use rayon::prelude::*;

use crate::bench::{run_benchmark, Scheme};
use crate::error::{Error, Result};
use crate::p1::{SolveReport, SolveStatus};
use crate::scenario::{Scenario, SweepParam};

pub const CSV_HEADER: [&str; 18] = [
    "sweep_param",
    "value",
    "scheme",
    "status",
    "energy_J",
    "l_u",
    "l_h",
    "l_a",
    "tau1",
    "tau2",
    "tau3",
    "tau4",
    "P1",
    "P2",
    "P3",
    "duality_gap",
    "iterations",
    "capacity_bits",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: SweepParam,
    /// Sweep value in the scenario's human unit.
    pub value: f64,
    pub scheme: Scheme,
    pub report: SolveReport,
}

impl SweepRow {
    fn record(&self) -> Vec<String> {
        let r = &self.report;
        let a = &r.allocation;
        let num = |x: f64| format!("{x:.11e}");
        let mut out = vec![self.param.label().to_string(), num(self.value), self.scheme.label().to_string(), r.status.label().to_string()];
        out.extend([r.energy, a.l_u, a.l_h, a.l_a, a.tau1, a.tau2, a.tau3, a.tau4, a.p1, a.p2, a.p3, r.duality_gap].map(num));
        out.push(r.iterations.to_string());
        out.push(num(r.capacity));
        out
    }
}

/// Solves every (sweep point, scheme) pair. Points run in parallel; rows
/// come back in ascending sweep order with schemes in their stable order.
pub fn run_sweep(s: &Scenario) -> Result<Vec<SweepRow>> {
    let sweep = s.sweep()?.ok_or_else(|| Error::Validation("the scenario has no sweep".into()))?;
    let schemes = s.scheme_list()?;
    let jobs: Vec<(f64, Scheme)> = sweep.values().into_iter().flat_map(|v| schemes.iter().map(move |&sc| (v, sc))).collect();
    jobs.into_par_iter()
        .map(|(value, scheme)| {
            let p = s.at(sweep.param, value).params()?;
            let report = run_benchmark(scheme, &p)?;
            Ok(SweepRow { param: sweep.param, value, scheme, report })
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Io { path: "csv output".into(), message: e.to_string() };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record(r.record()).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io { path: "csv output".into(), message: e.to_string() })
}

/// True when no row of the sweep is feasible.
pub fn all_infeasible(rows: &[SweepRow]) -> bool {
    rows.iter().all(|r| r.report.status == SolveStatus::Infeasible)
}
