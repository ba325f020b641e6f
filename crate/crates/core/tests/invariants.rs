mod common;

use common::{at, random_instance};
use mec_coop::bench::{run_benchmark, Scheme};
use mec_coop::dual::{eval_dual, DualPoint};
use mec_coop::ellipsoid::{ellipsoid_resume, CutOracleResult, EllipsoidOptions, EllipsoidState};
use mec_coop::lp::{lp_solve, LpProblem};
use mec_coop::model::{check_feasible, local_compute_energy, rate, total_energy, Allocation, Link, SystemParams, FEAS_TOL};
use mec_coop::oracle::{kkt_residuals, oracle_p11};
use mec_coop::p1::{solve_p1, SolveStatus};
use mec_coop::p2::{comp_coop_interval, comp_coop_objective, solve_p2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64) -> SystemParams {
    random_instance(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn dual_point(p: &SystemParams, x: [f64; 5]) -> DualPoint {
    // Exponents map to log-uniform prices; λ2 absorbs any relay deficit.
    let e = |s: f64, lo: f64, hi: f64| 10f64.powf(lo + s * (hi - lo));
    let mut d = DualPoint::new(e(x[0], -9.0, -5.0), e(x[1], -9.0, -5.0), e(x[2], -9.0, -5.0), e(x[3], -4.0, 1.0), e(x[4], -9.0, -5.0));
    let price = d.relay_bit_price(p);
    if price < 0.0 {
        d.lambda2 -= price * (1.0 + 1e-12);
    }
    d
}

fn unit5() -> impl Strategy<Value = [f64; 5]> {
    [0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64]
}

fn link() -> impl Strategy<Value = Link> {
    prop_oneof![Just(Link::UserHelper), Just(Link::UserAp), Just(Link::HelperAp)]
}

/// Determinant and quadratic form `xᵀ A⁻¹ x` by Gaussian elimination.
fn det_and_form(a: &[Vec<f64>], x: &[f64]) -> (f64, f64) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(x).map(|(row, xi)| row.iter().copied().chain([*xi]).collect()).collect();
    let mut det = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        if piv != c {
            m.swap(piv, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..=n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut y = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * y[k]).sum();
        y[r] = (m[r][n] - s) / m[r][r];
    }
    (det, x.iter().zip(&y).map(|(a, b)| a * b).sum())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rate_is_concave(l in link(), a in 0.0..10.0f64, b in 0.0..10.0f64, theta in 0.0..=1.0f64) {
        let p = SystemParams::default();
        let mid = rate(l, theta * a + (1.0 - theta) * b, &p);
        let chord = theta * rate(l, a, &p) + (1.0 - theta) * rate(l, b, &p);
        prop_assert!(mid >= chord - 1e-9 * mid.abs().max(1.0));
    }

    #[test]
    fn slot_bits_are_jointly_concave(
        l in link(),
        t in prop::array::uniform2(1e-4..0.1f64),
        e in prop::array::uniform2(0.0..1.0f64),
    ) {
        let p = SystemParams::default();
        let bits = |tau: f64, energy: f64| tau * rate(l, energy / tau, &p);
        let mid = bits(0.5 * (t[0] + t[1]), 0.5 * (e[0] + e[1]));
        let chord = 0.5 * (bits(t[0], e[0]) + bits(t[1], e[1]));
        prop_assert!(mid >= chord - 1e-9 * mid.max(1.0));
    }

    #[test]
    fn energy_is_representation_free(seed in 0u64..1000, x in unit5(), y in prop::array::uniform3(0.0..1.0f64)) {
        let p = instance(seed);
        let taus = [x[0] * p.block / 3.0, x[1] * p.block / 3.0, x[2] * p.block / 3.0];
        let powers = [y[0] * p.p_u_max, y[1] * p.p_u_max, y[2] * p.p_h_max];
        let bits = [x[3] * p.local_capacity(), x[4] * 1e4, 1e3];
        let a = Allocation::from_powers(taus, powers, bits, &p);
        let energies = [taus[0] * powers[0], taus[1] * powers[1], taus[2] * powers[2]];
        let b = Allocation::from_energies(taus, energies, bits, &p);
        let (ea, eb) = (total_energy(&a, &p).unwrap(), total_energy(&b, &p).unwrap());
        prop_assert!((ea - eb).abs() <= 1e-12 * ea.abs().max(1e-300));
    }

    #[test]
    fn compute_energy_sums_per_cycle(cycles in 1u32..200, c in 1u32..5, window in 1e-3..1.0f64) {
        let kappa = 1e-27;
        let bits = cycles as f64 / c as f64;
        let f = cycles as f64 / window;
        let per_cycle: f64 = (0..cycles).map(|_| kappa * f * f).sum();
        let e = local_compute_energy(bits, window, kappa, c as f64).unwrap();
        prop_assert!((e - per_cycle).abs() <= 1e-12 * per_cycle);
    }

    #[test]
    fn lp_matches_vertex_enumeration(
        c in prop::array::uniform2(-1.0..1.0f64),
        rows in prop::collection::vec((prop::array::uniform2(-1.0..1.0f64), 0.1..2.0f64), 1..5),
    ) {
        let hi = 3.0;
        let mut lp = LpProblem::new(c.to_vec());
        lp.bounds(0, 0.0, hi).bounds(1, 0.0, hi);
        for (a, b) in &rows {
            lp.add_le(a.to_vec(), *b);
        }
        let sol = lp_solve(&lp);
        // The origin is feasible and the box is bounded, so an optimum exists.
        prop_assert!(sol.is_optimal());
        prop_assert!(lp.max_violation(&sol.x) <= 1e-9);

        let mut lines: Vec<([f64; 2], f64)> = rows.clone();
        lines.extend([([1.0, 0.0], 0.0), ([1.0, 0.0], hi), ([0.0, 1.0], 0.0), ([0.0, 1.0], hi)]);
        let mut best = f64::INFINITY;
        for i in 0..lines.len() {
            for j in i + 1..lines.len() {
                let ([a, b], e) = lines[i];
                let ([cc, d], f) = lines[j];
                let det = a * d - b * cc;
                if det.abs() < 1e-12 {
                    continue;
                }
                let x = [(e * d - b * f) / det, (a * f - e * cc) / det];
                if lp.max_violation(&x) <= 1e-9 {
                    best = best.min(c[0] * x[0] + c[1] * x[1]);
                }
            }
        }
        prop_assert!((sol.objective - best).abs() <= 1e-9 * best.abs().max(1.0));

        // Weak duality against a handful of feasible points on the segment
        // from the origin to the optimum and along each axis.
        for s in [0.0, 0.25, 0.5, 0.75] {
            let x = [s * sol.x[0], s * sol.x[1]];
            prop_assert!(c[0] * x[0] + c[1] * x[1] >= sol.objective - 1e-12);
        }
        prop_assert_eq!(lp_solve(&lp), sol);
    }

    #[test]
    fn dual_is_concave_on_segments(seed in 0u64..1000, x in unit5(), y in unit5()) {
        let p = instance(seed);
        let (a, b) = (dual_point(&p, x), dual_point(&p, y));
        let m = DualPoint::from_array(std::array::from_fn(|i| 0.5 * (a.to_array()[i] + b.to_array()[i])));
        let (ga, gb, gm) = (eval_dual(&a, &p).unwrap().g, eval_dual(&b, &p).unwrap().g, eval_dual(&m, &p).unwrap().g);
        let scale = ga.abs() + gb.abs() + gm.abs();
        prop_assert!(gm >= 0.5 * (ga + gb) - 1e-9 * scale);
    }

    #[test]
    fn supergradient_inequality(seed in 0u64..1000, x in unit5(), y in unit5()) {
        let p = instance(seed);
        let (a, b) = (dual_point(&p, x), dual_point(&p, y));
        let ea = eval_dual(&a, &p).unwrap();
        let gb = eval_dual(&b, &p).unwrap().g;
        let step: Vec<f64> = (0..5).map(|i| ea.subgradient[i] * (b.to_array()[i] - a.to_array()[i])).collect();
        let scale = ea.g.abs() + gb.abs() + step.iter().map(|v| v.abs()).sum::<f64>();
        prop_assert!(gb <= ea.g + step.iter().sum::<f64>() + 1e-9 * scale);
    }

    #[test]
    fn weak_duality(seed in 0u64..1000, x in unit5()) {
        let p = instance(seed);
        let r = solve_p1(&p).unwrap();
        prop_assert_eq!(r.status, SolveStatus::Optimal);
        let g = eval_dual(&dual_point(&p, x), &p).unwrap().g;
        prop_assert!(g <= r.energy * (1.0 + 1e-9));
    }

    #[test]
    fn comp_coop_objective_is_convex(seed in 0u64..1000, s in prop::array::uniform2(0.0..=1.0f64)) {
        let p = instance(seed);
        if let Some((lo, hi)) = comp_coop_interval(&p) {
            let t = [lo + s[0] * (hi - lo), lo + s[1] * (hi - lo)];
            // The open ends are poles or zero-length windows.
            prop_assume!(t.iter().all(|&x| x > 0.0 && x < p.block));
            let f = |x: f64| comp_coop_objective(x, &p);
            let mid = f(0.5 * (t[0] + t[1]));
            prop_assert!(mid <= 0.5 * (f(t[0]) + f(t[1])) + 1e-12 * mid.abs());
        }
    }

    #[test]
    fn scheme_orderings(seed in 0u64..1000) {
        let p = instance(seed);
        let e = |s: Scheme| {
            let r = run_benchmark(s, &p).unwrap();
            (r.status != SolveStatus::Infeasible).then_some(r.energy)
        };
        let tol = |x: f64| x * (1.0 + 1e-9);
        let best = solve_p1(&p).unwrap().energy;
        for (partial, binary) in [(Scheme::CompPartial, Scheme::CompBinary), (Scheme::CommPartial, Scheme::CommBinary)] {
            if let Some(x) = e(partial) {
                prop_assert!(best <= tol(x));
                if let Some(y) = e(binary) {
                    prop_assert!(x <= tol(y));
                }
            }
        }
        if let Some(y) = e(Scheme::JointBinary) {
            prop_assert!(best <= tol(y));
            let modes = [Scheme::Local, Scheme::CompBinary, Scheme::CommBinary].map(e);
            let min = modes.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(solve_p2(&p).unwrap().energy, min);
        }
    }

    #[test]
    fn restricted_schemes_pin_their_variables(seed in 0u64..1000) {
        let p = instance(seed);
        let comp = run_benchmark(Scheme::CompPartial, &p).unwrap();
        if comp.status != SolveStatus::Infeasible {
            let a = comp.allocation;
            prop_assert!(a.tau2 == 0.0 && a.tau3 == 0.0 && a.l_a == 0.0 && a.p2 == 0.0 && a.p3 == 0.0);
        }
        let comm = run_benchmark(Scheme::CommPartial, &p).unwrap();
        if comm.status != SolveStatus::Infeasible {
            let a = comm.allocation;
            prop_assert!(a.tau1 == 0.0 && a.l_h == 0.0 && a.p1 == 0.0);
        }
        for s in Scheme::ALL {
            let r = run_benchmark(s, &p).unwrap();
            if r.status == SolveStatus::Optimal {
                prop_assert!(check_feasible(&r.allocation, &p, FEAS_TOL).feasible, "{}", s);
            }
        }
    }

    #[test]
    fn energy_never_rises_with_block(seed in 0u64..1000, stretch in 1.0..3.0f64) {
        let p = instance(seed);
        let q = p.with_block(p.block * stretch);
        let (a, b) = (solve_p1(&p).unwrap(), solve_p1(&q).unwrap());
        prop_assert!(b.energy <= a.energy * (1.0 + 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ellipsoid_volume_and_cuts(
        target in prop::array::uniform3(-1.0..1.0f64),
        normal in prop::array::uniform3(-1.0..1.0f64),
        offset in -0.5..0.5f64,
        samples in prop::collection::vec(prop::array::uniform3(-3.0..3.0f64), 64),
    ) {
        prop_assume!(normal.iter().map(|x| x * x).sum::<f64>() > 1e-3);
        // Maximize a concave quadratic over the half-space nᵀx <= offset.
        let oracle = |x: &[f64]| {
            let c: f64 = normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - offset;
            if c > 0.0 {
                return Ok(CutOracleResult::feasibility(normal.to_vec()));
            }
            let v = -x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            Ok(CutOracleResult::objective(v, x.iter().zip(&target).map(|(a, b)| -2.0 * (a - b)).collect()))
        };
        let n = 3.0f64;
        let mut state = EllipsoidState::ball(&[0.0; 3], 3.0);
        let opts = EllipsoidOptions { max_iter: 1, tol_abs: 0.0, ..Default::default() };
        let mut best = f64::NEG_INFINITY;
        for _ in 0..60 {
            let before = state.clone();
            let out = ellipsoid_resume(state, oracle, &opts).unwrap();
            state = out.state;
            prop_assert!(state.best_value >= best);
            best = state.best_value;
            if state.restarts != before.restarts {
                break;
            }
            let zero = [0.0; 3];
            let (d0, _) = det_and_form(&before.shape, &zero);
            let (d1, _) = det_and_form(&state.shape, &zero);
            prop_assert!((d1 / d0).sqrt() <= (-1.0 / (2.0 * n)).exp() * (1.0 + 1e-9));

            let c: f64 = normal.iter().zip(&before.center).map(|(a, b)| a * b).sum::<f64>() - offset;
            if c > 0.0 {
                // Points of the old ellipsoid on the feasible side stay inside.
                for s in &samples {
                    let rel = |e: &EllipsoidState| -> Vec<f64> { s.iter().zip(&e.center).map(|(a, b)| a - b).collect() };
                    let inside_before = det_and_form(&before.shape, &rel(&before)).1 <= 1.0;
                    let feasible = normal.iter().zip(s).map(|(a, b)| a * b).sum::<f64>() <= offset;
                    if inside_before && feasible {
                        prop_assert!(det_and_form(&state.shape, &rel(&state)).1 <= 1.0 + 1e-9);
                    }
                }
            }
        }
    }
}

#[test]
fn oracle_improves_with_budget() {
    for seed in 0..3 {
        let p = instance(100 + seed);
        let mut prev = f64::INFINITY;
        for budget in [8, 12, 16] {
            let e = oracle_p11(&p, budget).unwrap().energy;
            assert!(e <= prev * (1.0 + 1e-12), "seed {seed} budget {budget}: {e} after {prev}");
            prev = e;
        }
    }
}

#[test]
fn kkt_residuals_vanish_at_a_built_stationary_point() {
    // Local computing plus the helper, relay hops too weak to matter. Pick
    // P1, τ1 and l_h, then choose the block and the local share so that every
    // stationarity condition holds with slack deadline and caps.
    let mut p = at(0.0, 1.0, 120.0);
    p.h0 = 1e-30;
    p.h1 = 1e-30;
    p.f_u_max = 1e12;
    p.f_h_max = 1e12;
    let (p1, tau1) = (0.5, 0.02);
    let a01 = p.snr_per_watt(Link::UserHelper);
    let r = rate(Link::UserHelper, p1, &p);
    let dr = p.bandwidth / std::f64::consts::LN_2 * a01 / (1.0 + p1 * a01);
    let lambda1 = 1.0 / dr;
    let lh = tau1 * r;
    let kh = p.kappa_h * p.c_h.powi(3);
    let w = (2.0 * kh * lh.powi(3) / (lambda1 * r - p1)).cbrt();
    p.block = tau1 + w;
    let mu2 = 3.0 * kh * lh * lh / (w * w) + lambda1;
    let lu = p.block * (mu2 / (3.0 * p.kappa_u * p.c_u.powi(3))).sqrt();
    p.task_bits = lu + lh;
    let a = Allocation::from_powers([tau1, 0.0, 0.0], [p1, 0.0, 0.0], [lu, lh, 0.0], &p);
    let d = DualPoint::new(lambda1, mu2, 0.0, 0.0, mu2);
    assert!(check_feasible(&a, &p, 1e-12).feasible);
    let k = kkt_residuals(&a, &d, &p);
    assert!(k.max() <= 1e-9, "{k:?}");

    // Moving the power off its stationary value shows up in the residuals.
    let b = Allocation::from_powers([tau1, 0.0, 0.0], [1.5 * p1, 0.0, 0.0], [lu, lh, 0.0], &p);
    assert!(kkt_residuals(&b, &d, &p).max() > 1e-3);
}

#[test]
fn random_points_are_not_stationary() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let p = random_instance(&mut rng);
        let r = solve_p1(&p).unwrap();
        let mut a = r.allocation;
        let shift = 0.3 * a.l_u.min(p.task_bits - a.l_u);
        if shift <= 0.0 {
            continue;
        }
        // Moving bits between local computing and offloading breaks the
        // balance of their marginal prices.
        let bits = if a.l_h > 0.0 { [a.l_u - shift, a.l_h + shift, a.l_a] } else { [a.l_u - shift, a.l_h, a.l_a + shift] };
        a = Allocation::from_powers(a.taus(), a.powers(), bits, &p);
        assert!(kkt_residuals(&a, &r.dual, &p).max() > 1e-3);
    }
}

#[test]
fn identical_inputs_give_identical_reports() {
    let p = instance(5);
    // Debug output compares NaN fields of infeasible reports bit for bit.
    let show = |r: mec_coop::SolveReport| format!("{r:?}");
    assert_eq!(show(solve_p1(&p).unwrap()), show(solve_p1(&p).unwrap()));
    assert_eq!(show(solve_p2(&p).unwrap()), show(solve_p2(&p).unwrap()));
}
