use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mec_coop::bench::scheme_capacity;
use mec_coop::oracle::oracle_p11;
use mec_coop::scenario::{load_scenario, Scenario};
use mec_coop::sweep::{all_infeasible, run_sweep, write_csv};
use mec_coop::{run_benchmark, solve_p1, Error, Scheme, SolveReport, SolveStatus};

/// Exit codes.
const OK: u8 = 0;
const INFEASIBLE: u8 = 1;
const CONFIG: u8 = 2;
const NONCONVERGED: u8 = 3;
const MISMATCH: u8 = 4;

/// Largest relative difference between the solver and the oracle that
/// `verify` accepts.
const VERIFY_TOL: f64 = 1e-3;

#[derive(Parser)]
#[command(name = "mec-coop", version, about = "Energy-optimal cooperative computation offloading")]
struct Cli {
    /// Seed for the random instances of `verify`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the scenario's base instance.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Scheme label; defaults to every scheme the scenario lists.
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Run the scenario's sweep and write one CSV row per point and scheme.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report the computation capacity of every scheme.
    Feascheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare the partial-offloading solver with the slow reference solver.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Golden-section iterations per level of the reference solver.
        #[arg(long, default_value_t = 30)]
        budget: usize,
        /// Extra random instances around the base instance.
        #[arg(long, default_value_t = 0)]
        instances: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { config, scheme } => solve(&config, scheme.as_deref()),
        Command::Sweep { config, out } => sweep(&config, &out),
        Command::Feascheck { config } => feascheck(&config),
        Command::Verify { config, budget, instances } => verify(&config, budget, instances, cli.seed),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::DegenerateCut | Error::DualInfeasible(_) => NONCONVERGED,
                _ => CONFIG,
            })
        }
    }
}

fn print_report(r: &SolveReport) {
    let a = &r.allocation;
    let mode = r.mode.map_or(String::new(), |m| format!(" mode={}", m.label()));
    println!(
        "{:<14} {:<12} energy={:.11e} J gap={:.3e} iterations={}{mode}",
        r.scheme.label(),
        r.status.label(),
        r.energy,
        r.duality_gap,
        r.iterations
    );
    if r.status != SolveStatus::Infeasible {
        println!(
            "{:14} bits u/h/a = {:.6e} {:.6e} {:.6e}  slots = {:.6e} {:.6e} {:.6e} {:.6e} s  powers = {:.6e} {:.6e} {:.6e} W",
            "", a.l_u, a.l_h, a.l_a, a.tau1, a.tau2, a.tau3, a.tau4, a.p1, a.p2, a.p3
        );
    }
}

fn summary_code(reports: &[SolveReport]) -> u8 {
    if reports.iter().any(|r| r.status == SolveStatus::NonConverged) {
        NONCONVERGED
    } else if reports.iter().all(|r| r.status == SolveStatus::Infeasible) {
        INFEASIBLE
    } else {
        OK
    }
}

fn solve(config: &Path, scheme: Option<&str>) -> Result<u8, Error> {
    let s = load_scenario(config)?;
    let p = s.params()?;
    let schemes = match scheme {
        Some(label) => vec![label.parse::<Scheme>()?],
        None => s.scheme_list()?,
    };
    let mut reports = Vec::new();
    for sc in schemes {
        let r = run_benchmark(sc, &p)?;
        print_report(&r);
        reports.push(r);
    }
    Ok(summary_code(&reports))
}

fn sweep(config: &Path, out: &Path) -> Result<u8, Error> {
    let s = load_scenario(config)?;
    let rows = run_sweep(&s)?;
    let file = File::create(out).map_err(|e| Error::Io { path: out.display().to_string(), message: e.to_string() })?;
    write_csv(&rows, BufWriter::new(file))?;
    println!("wrote {} rows to {}", rows.len(), out.display());
    if all_infeasible(&rows) {
        return Ok(INFEASIBLE);
    }
    let reports: Vec<SolveReport> = rows.into_iter().map(|r| r.report).collect();
    Ok(summary_code(&reports))
}

fn feascheck(config: &Path) -> Result<u8, Error> {
    let s = load_scenario(config)?;
    let p = s.params()?;
    println!("task: {:.6e} bits in {:.6e} s", p.task_bits, p.block);
    let mut any = false;
    for sc in Scheme::ALL {
        let cap = scheme_capacity(sc, &p);
        let fits = p.task_bits <= cap;
        any |= fits;
        println!("{:<14} capacity={:.11e} bits {}", sc.label(), cap, if fits { "feasible" } else { "infeasible" });
    }
    Ok(if any { OK } else { INFEASIBLE })
}

/// The base scenario followed by `n` instances with the block length, task
/// size and helper distance scaled by log-uniform factors in [1/2, 2].
fn verify_instances(s: &Scenario, n: usize, seed: u64) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![s.clone()];
    for _ in 0..n {
        let mut f = || 2f64.powf(rng.gen_range(-1.0..=1.0));
        let mut x = s.clone();
        x.block_ms *= f();
        x.task_mbits *= f();
        x.d_user_helper_m = (x.d_user_helper_m * f()).min(0.95 * x.d_user_ap_m);
        out.push(x);
    }
    out
}

fn verify(config: &Path, budget: usize, instances: usize, seed: u64) -> Result<u8, Error> {
    let s = load_scenario(config)?;
    let mut code = OK;
    for (i, x) in verify_instances(&s, instances, seed).iter().enumerate() {
        let p = x.params()?;
        let r = solve_p1(&p)?;
        let o = oracle_p11(&p, budget)?;
        let tag = format!("#{i} T={:.4} ms L={:.4} Mbits D={:.2} m", x.block_ms, x.task_mbits, x.d_user_helper_m);
        match (r.status, o.feasible) {
            (SolveStatus::Infeasible, false) => println!("{tag}: infeasible (agree)"),
            (SolveStatus::Infeasible, true) | (_, false) => {
                println!("{tag}: feasibility disagrees (solver {}, oracle feasible={})", r.status.label(), o.feasible);
                code = MISMATCH;
            }
            (status, true) => {
                let rel = (r.energy - o.energy) / o.energy;
                // Weak duality: the dual bound never exceeds a feasible energy.
                let weak = r.dual_value <= o.energy * (1.0 + 1e-9);
                let ok = rel.abs() <= VERIFY_TOL && weak;
                println!(
                    "{tag}: solver={:.11e} oracle={:.11e} rel={rel:.3e} dual={:.11e} {}",
                    r.energy,
                    o.energy,
                    r.dual_value,
                    if ok { "ok" } else { "MISMATCH" }
                );
                if status == SolveStatus::NonConverged && code == OK {
                    code = NONCONVERGED;
                }
                if !ok {
                    code = MISMATCH;
                }
            }
        }
    }
    Ok(code)
}
