//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion.

mod common;

use std::time::Instant;

use common::{at, random_instance, rel};
use mec_coop::bench::{run_benchmark, scheme_capacity, Scheme};
use mec_coop::dual::{solve_sub1, solve_sub2, solve_sub3, solve_sub4, solve_sub5, DualPoint};
use mec_coop::model::{check_feasible, SystemParams, FEAS_TOL};
use mec_coop::oracle::{
    grid_subproblems, kkt_residuals, oracle_comm_coop, oracle_comp_coop_grid, oracle_p11, sub4_objective, sub5_objective,
};
use mec_coop::p1::{capacity, lmax_partial, solve_p1, SolveStatus, GAP_TOL};
use mec_coop::p2::{lmax_binary, mode_comm_coop, mode_comp_coop, mode_local};
use mec_coop::dual::Routes;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, failures: Vec<String>, summary: String) -> Check {
    let detail = if failures.is_empty() { summary } else { format!("{summary}; {}", failures[..failures.len().min(5)].join("; ")) };
    Check { name, pass: failures.is_empty(), detail }
}

fn instances(seed: u64, n: usize) -> Vec<SystemParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_instance(&mut rng)).collect()
}

fn duality_gap() -> Check {
    let mut failures = Vec::new();
    let (mut worst_gap, mut worst_time) = (0f64, 0f64);
    for (i, p) in instances(1, 50).iter().enumerate() {
        let start = Instant::now();
        let r = solve_p1(p).unwrap();
        let secs = start.elapsed().as_secs_f64();
        worst_time = worst_time.max(secs);
        let gap = ((r.energy - r.dual_value) / r.energy).abs();
        worst_gap = worst_gap.max(gap);
        if r.status != SolveStatus::Optimal || !(gap <= GAP_TOL) || secs > 1.0 {
            failures.push(format!("instance {i}: {} gap {gap:.2e} in {secs:.2} s", r.status.label()));
        }
    }
    check("duality gap <= 1e-5 within 1 s on 50 random instances", failures, format!("max gap {worst_gap:.2e}, max time {worst_time:.3} s"))
}

fn oracle_agreement() -> Check {
    let mut failures = Vec::new();
    let (mut w1, mut w2, mut w3) = (0f64, 0f64, 0f64);
    for (i, p) in instances(2, 20).iter().enumerate() {
        let r = solve_p1(p).unwrap();
        let o = oracle_p11(p, 30).unwrap();
        let e = rel(r.energy, o.energy);
        w1 = w1.max(e);
        if !(e <= 1e-3) || r.dual_value > o.energy * (1.0 + 1e-9) {
            failures.push(format!("instance {i}: partial {:.9e} vs {:.9e}, dual {:.9e}", r.energy, o.energy, r.dual_value));
        }

        let c = mode_comm_coop(p).unwrap();
        if c.status != SolveStatus::Infeasible {
            let o = oracle_comm_coop(p, 100, 60).unwrap();
            let e = rel(c.energy, o);
            w2 = w2.max(e);
            if !(e <= 1e-3) {
                failures.push(format!("instance {i}: relay mode {:.9e} vs {o:.9e}", c.energy));
            }
        }

        let h = mode_comp_coop(p).unwrap();
        if h.status != SolveStatus::Infeasible {
            let o = oracle_comp_coop_grid(p, 1_000_000).unwrap();
            let e = rel(h.energy, o);
            w3 = w3.max(e);
            if !(e <= 1e-6) {
                failures.push(format!("instance {i}: helper mode {:.12e} vs {o:.12e}", h.energy));
            }
        }
    }
    check(
        "solvers agree with independent oracles on 20 instances",
        failures,
        format!("partial {w1:.2e} (tol 1e-3), relay mode {w2:.2e} (tol 1e-3), helper mode {w3:.2e} (tol 1e-6)"),
    )
}

fn random_dual<R: Rng>(rng: &mut R, p: &SystemParams) -> DualPoint {
    let lu = |rng: &mut R, lo: f64, hi: f64| common::log_uniform(rng, lo, hi);
    loop {
        let d = DualPoint::new(
            lu(rng, 1e-9, 1e-5),
            lu(rng, 1e-9, 1e-5),
            lu(rng, 1e-9, 1e-5),
            lu(rng, 1e-4, 10.0),
            lu(rng, 1e-9, 1e-5),
        );
        if d.relay_bit_price(p) >= 0.0 {
            return d;
        }
    }
}

fn subproblems() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = Vec::new();
    let mut worst = [0f64; 5];
    let params = instances(4, 10);
    for i in 0..100 {
        let p = &params[i % params.len()];
        let d = random_dual(&mut rng, p);
        let s4 = solve_sub4(&d, p);
        let closed = [
            solve_sub1(&d, p).unwrap().value,
            solve_sub2(&d, p).unwrap().value,
            solve_sub3(&d, p).unwrap().value,
            sub4_objective(&d, p, s4),
            sub5_objective(&d, p, solve_sub5(&d, p, p.task_bits)),
        ];
        let grid = grid_subproblems(&d, p, 21, 40);
        // Values can vanish, so differences are measured against the size of
        // one second of slot price as well.
        let floor = d.mu1 * p.block;
        for k in 0..5 {
            let e = (closed[k] - grid[k]).abs() / closed[k].abs().max(grid[k].abs()).max(floor);
            worst[k] = worst[k].max(e);
            if !(e <= 1e-6) {
                failures.push(format!("point {i} subproblem {}: {:.12e} vs grid {:.12e}", k + 1, closed[k], grid[k]));
            }
        }
    }
    check(
        "five subproblem solvers match brute force on 100 dual points",
        failures,
        format!("max rel diff {:.1e} {:.1e} {:.1e} {:.1e} {:.1e}", worst[0], worst[1], worst[2], worst[3], worst[4]),
    )
}

fn kkt() -> Check {
    let mut failures = Vec::new();
    let mut worst = 0f64;
    let mut solves = 0;
    let schemes = [Scheme::CompPartial, Scheme::CommPartial, Scheme::CommBinary, Scheme::JointPartial];
    for (i, p) in instances(1, 50).iter().enumerate() {
        for s in schemes {
            let r = run_benchmark(s, p).unwrap();
            match r.status {
                SolveStatus::Infeasible => continue,
                SolveStatus::NonConverged => {
                    failures.push(format!("instance {i} {s}: not converged"));
                    continue;
                }
                SolveStatus::Optimal => solves += 1,
            }
            let k = kkt_residuals(&r.allocation, &r.dual, p).max();
            worst = worst.max(k);
            if !(k <= 1e-6) {
                failures.push(format!("instance {i} {s}: {k:.2e}"));
            }
        }
    }
    check("scaled KKT residuals <= 1e-6 at converged solves", failures, format!("{solves} solves, max residual {worst:.2e}"))
}

fn capacity_ordering() -> Check {
    let mut failures = Vec::new();
    let mut prev = 0.0;
    for i in 1..=10 {
        let t = 0.01 * i as f64;
        let p = at(0.0, t, 20.0);
        let l1 = lmax_partial(&p);
        let b = lmax_binary(&p);
        let singles = [("local", b.l_u_max), ("helper", b.l_h_max), ("relay", b.l_a_max)];
        if l1 < b.l_max {
            failures.push(format!("T={t}: partial {l1} < binary {}", b.l_max));
        }
        for (name, c) in singles {
            if b.l_max < c {
                failures.push(format!("T={t}: binary {} < {name} {c}", b.l_max));
            }
        }
        for (name, c) in [("comp-partial", capacity(&p, Routes::LOCAL_HELPER)), ("comm-partial", capacity(&p, Routes::LOCAL_RELAY))] {
            if l1 < c {
                failures.push(format!("T={t}: partial {l1} < {name} {c}"));
            }
        }
        if l1 < prev {
            failures.push(format!("T={t}: partial capacity decreased {prev} -> {l1}"));
        }
        prev = l1;
    }
    check("capacity ordering and growth in T at D = 20 m (exact)", failures, format!("capacity at T = 0.1 s: {prev:.6e} bits"))
}

fn energies(p: &SystemParams) -> Vec<(Scheme, f64)> {
    Scheme::ALL
        .iter()
        .filter_map(|&s| {
            let r = run_benchmark(s, p).unwrap();
            (r.status != SolveStatus::Infeasible).then_some((s, r.energy))
        })
        .collect()
}

fn block_sweep_points() -> Vec<f64> {
    (0..=16).map(|i| 0.02 + 0.005 * i as f64).collect()
}

fn energy_ordering() -> Check {
    let mut failures = Vec::new();
    let mut points = 0;
    let sweeps: Vec<SystemParams> = block_sweep_points()
        .into_iter()
        .map(|t| at(2e4, t, 120.0))
        .chain((1..=15).map(|i| at(2e4 * i as f64, 0.15, 120.0)))
        .collect();
    for p in &sweeps {
        points += 1;
        let e = energies(p);
        let get = |s: Scheme| e.iter().find(|x| x.0 == s).map(|x| x.1);
        let tol = |x: f64| x * (1.0 + 1e-9);
        if let Some(jp) = get(Scheme::JointPartial) {
            for &(s, v) in &e {
                if jp > tol(v) {
                    failures.push(format!("T={} L={}: joint-partial {jp:.12e} > {s} {v:.12e}", p.block, p.task_bits));
                }
            }
        }
        if let Some(jb) = get(Scheme::JointBinary) {
            for &(s, v) in e.iter().filter(|x| x.0.is_binary()) {
                if jb > tol(v) {
                    failures.push(format!("T={} L={}: joint-binary {jb:.12e} > {s} {v:.12e}", p.block, p.task_bits));
                }
            }
        }
    }
    check("joint schemes use the least energy on every sweep point (1e-9 rel)", failures, format!("{points} points"))
}

fn monotone_in_t() -> Check {
    let mut failures = Vec::new();
    let mut prev: Vec<(Scheme, f64)> = Vec::new();
    for t in block_sweep_points() {
        let e = energies(&at(2e4, t, 120.0));
        for &(s, v) in &e {
            if let Some(&(_, before)) = prev.iter().find(|x| x.0 == s) {
                if v > before * (1.0 + 1e-9) {
                    failures.push(format!("{s} rises at T={t}: {before:.12e} -> {v:.12e}"));
                }
            }
        }
        prev = e;
    }
    check("every scheme's energy is nonincreasing in T over [0.02, 0.1] s", failures, format!("{} points", block_sweep_points().len()))
}

fn binary_crossovers() -> Check {
    let mut comm_wins = Vec::new();
    let mut local_wins = Vec::new();
    for i in 0..=18 {
        let t = 0.01 + 0.005 * i as f64;
        let p = at(2e4, t, 120.0);
        let e = |r: mec_coop::SolveReport| if r.status == SolveStatus::Infeasible { f64::INFINITY } else { r.energy };
        let local = e(mode_local(&p).unwrap());
        let comp = e(mode_comp_coop(&p).unwrap());
        let comm = e(mode_comm_coop(&p).unwrap());
        if comm < local && comm < comp {
            comm_wins.push(t);
        }
        if local < comm && local < comp {
            local_wins.push(t);
        }
    }
    let ok = comm_wins.first().is_some_and(|&c| local_wins.iter().any(|&l| l > c));
    let failures = if ok { Vec::new() } else { vec!["no relay-then-local crossover".to_string()] };
    check(
        "binary crossover: relay mode wins at small T and local computing at larger T",
        failures,
        format!("relay wins at T = {comm_wins:?}; local wins from T = {:?}", local_wins.first()),
    )
}

fn distance_shape() -> Check {
    let mut failures = Vec::new();
    let (mut local, mut comm, mut comp) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..=21 {
        let p = at(5e5, 0.3, 20.0 + 10.0 * i as f64);
        local.push(run_benchmark(Scheme::Local, &p).unwrap().energy);
        comm.push(run_benchmark(Scheme::CommPartial, &p).unwrap().energy);
        comp.push(run_benchmark(Scheme::CompPartial, &p).unwrap().energy);
    }
    if local.iter().any(|&x| x != local[0]) {
        failures.push("local energy varies with D".into());
    }
    let signs: Vec<bool> = comm.windows(2).filter(|w| w[1] != w[0]).map(|w| w[1] > w[0]).collect();
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    if changes != 1 || signs.first() != Some(&false) {
        failures.push(format!("comm-partial differences change sign {changes} times"));
    }
    if comp.windows(2).any(|w| w[1] < w[0]) {
        failures.push("comp-partial energy decreases with D".into());
    }
    let argmin = comm.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|x| 20 + 10 * x.0).unwrap();
    check(
        "distance shape at T = 0.3 s, L = 0.5 Mbits",
        failures,
        format!("local constant {:.9e} J, comm-partial minimum at D = {argmin} m", local[0]),
    )
}

fn spot_values() -> Check {
    let p = SystemParams::default().with_block(0.05);
    let mut failures = Vec::new();
    let lu = scheme_capacity(Scheme::Local, &p);
    if rel(lu, 1e5) > 1e-12 {
        failures.push(format!("local capacity {lu}"));
    }
    let e = mode_local(&p).unwrap().energy;
    if rel(e, 3.2e-3) > 1e-12 {
        failures.push(format!("local energy {e}"));
    }
    let r = solve_p1(&p).unwrap();
    if r.status == SolveStatus::Optimal && !check_feasible(&r.allocation, &p, FEAS_TOL).feasible {
        failures.push("optimal allocation is infeasible".into());
    }
    check("closed-form spot values (1e-12 rel)", failures, format!("local capacity {lu:.12e} bits, local energy {e:.12e} J"))
}

fn main() {
    let criteria: [fn() -> Check; 10] = [
        duality_gap,
        oracle_agreement,
        subproblems,
        kkt,
        capacity_ordering,
        energy_ordering,
        monotone_in_t,
        binary_crossovers,
        distance_shape,
        spot_values,
    ];
    let mut failed = 0;
    for f in criteria {
        let start = Instant::now();
        let c = f();
        println!("{} {}: {} [{:.1} s]", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!c.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
