//! Dense two-phase simplex for the handful of small linear programs in this
//! crate (capacity problems and primal recovery).
//!
//! Rows and columns are equilibrated before pivoting because the problems mix
//! bit counts (~1e5), durations (~1e-2) and rates (~1e7) in a single row.
//! Pivoting follows Bland's rule, so degenerate vertices cannot cycle.

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 50_000;

/// `minimize c·x` subject to `a_ub x <= b_ub`, `a_eq x = b_eq` and
/// `lower <= x <= upper` (infinite bounds allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub c: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// Minimize `c·x` with `x >= 0` and no rows yet.
    pub fn new(c: Vec<f64>) -> Self {
        let n = c.len();
        Self {
            c,
            a_ub: Vec::new(),
            b_ub: Vec::new(),
            a_eq: Vec::new(),
            b_eq: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self
    }

    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.add_le(row.into_iter().map(|v| -v).collect(), -rhs)
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self
    }

    pub fn bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    fn check_dims(&self) {
        let n = self.n_vars();
        assert_eq!(self.a_ub.len(), self.b_ub.len(), "a_ub/b_ub row count mismatch");
        assert_eq!(self.a_eq.len(), self.b_eq.len(), "a_eq/b_eq row count mismatch");
        assert!(self.a_ub.iter().chain(&self.a_eq).all(|r| r.len() == n), "row length != number of variables");
        assert!(self.lower.len() == n && self.upper.len() == n, "bound vectors must match variable count");
    }

    /// Largest scaled violation of rows and bounds at `x`. Each row is divided
    /// by its largest coefficient magnitude (or the rhs when larger).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let row_viol = |row: &[f64], rhs: f64, eq: bool| {
            let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            let scale = row.iter().map(|a| a.abs()).fold(0.0, f64::max).max(1e-300);
            let d = (lhs - rhs) / scale;
            if eq { d.abs() } else { d.max(0.0) }
        };
        let mut worst = 0.0_f64;
        for (row, &b) in self.a_ub.iter().zip(&self.b_ub) {
            worst = worst.max(row_viol(row, b, false));
        }
        for (row, &b) in self.a_eq.iter().zip(&self.b_eq) {
            worst = worst.max(row_viol(row, b, true));
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LpSolution {
    fn without_point(status: LpStatus, n: usize) -> Self {
        let objective = match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
        Self { status, x: vec![f64::NAN; n], objective }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// How an original variable is written in terms of nonnegative columns:
/// `x = offset + sum(coef * y[col])`.
struct VarMap {
    offset: f64,
    terms: Vec<(usize, f64)>,
}

struct Row {
    coefs: Vec<f64>,
    rhs: f64,
    is_eq: bool,
}

pub fn lp_solve(problem: &LpProblem) -> LpSolution {
    problem.check_dims();
    let n = problem.n_vars();

    // Substitute bounds so every column is nonnegative.
    let mut maps = Vec::with_capacity(n);
    let mut n_cols = 0;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (problem.lower[j], problem.upper[j]);
        if lo > hi {
            return LpSolution::without_point(LpStatus::Infeasible, n);
        }
        if lo.is_finite() {
            maps.push(VarMap { offset: lo, terms: vec![(n_cols, 1.0)] });
            if hi.is_finite() {
                bound_rows.push((n_cols, hi - lo));
            }
            n_cols += 1;
        } else if hi.is_finite() {
            maps.push(VarMap { offset: hi, terms: vec![(n_cols, -1.0)] });
            n_cols += 1;
        } else {
            maps.push(VarMap { offset: 0.0, terms: vec![(n_cols, 1.0), (n_cols + 1, -1.0)] });
            n_cols += 2;
        }
    }

    let transform = |row: &[f64], rhs: f64, is_eq: bool| {
        let mut coefs = vec![0.0; n_cols];
        let mut shift = 0.0;
        for (j, &a) in row.iter().enumerate() {
            shift += a * maps[j].offset;
            for &(col, s) in &maps[j].terms {
                coefs[col] += a * s;
            }
        }
        Row { coefs, rhs: rhs - shift, is_eq }
    };
    let mut rows: Vec<Row> = Vec::new();
    for (row, &b) in problem.a_ub.iter().zip(&problem.b_ub) {
        rows.push(transform(row, b, false));
    }
    for (row, &b) in problem.a_eq.iter().zip(&problem.b_eq) {
        rows.push(transform(row, b, true));
    }
    for &(col, ub) in &bound_rows {
        let mut coefs = vec![0.0; n_cols];
        coefs[col] = 1.0;
        rows.push(Row { coefs, rhs: ub, is_eq: false });
    }

    let mut cost = vec![0.0; n_cols];
    for (j, &cj) in problem.c.iter().enumerate() {
        for &(col, s) in &maps[j].terms {
            cost[col] += cj * s;
        }
    }

    // Empty rows: either trivially satisfied or infeasible.
    let mut kept = Vec::with_capacity(rows.len());
    for r in rows {
        if r.coefs.iter().all(|&a| a == 0.0) {
            let bad = if r.is_eq { r.rhs.abs() > FEAS_TOL * r.rhs.abs().max(1.0) } else { r.rhs < -FEAS_TOL * r.rhs.abs().max(1.0) };
            if bad {
                return LpSolution::without_point(LpStatus::Infeasible, n);
            }
        } else {
            kept.push(r);
        }
    }
    let mut rows = kept;

    let col_scale = equilibrate(&mut rows, n_cols);
    for (c, s) in cost.iter_mut().zip(&col_scale) {
        *c *= s;
    }
    let cost_norm = cost.iter().map(|c| c.abs()).fold(0.0, f64::max);
    let cost_unit = if cost_norm > 0.0 { cost_norm } else { 1.0 };
    let scaled_cost: Vec<f64> = cost.iter().map(|c| c / cost_unit).collect();

    let (status, z) = Tableau::build(&rows, n_cols).solve(&scaled_cost);
    if status != LpStatus::Optimal {
        return LpSolution::without_point(status, n);
    }

    let y: Vec<f64> = z.iter().zip(&col_scale).map(|(z, s)| z * s).collect();
    let x: Vec<f64> = maps
        .iter()
        .map(|m| m.offset + m.terms.iter().map(|&(col, s)| s * y[col]).sum::<f64>())
        .collect();
    let objective = problem.c.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
    LpSolution { status: LpStatus::Optimal, x, objective }
}

/// Alternating row/column max-norm scaling. Returns the column factors `d`
/// such that original column values are `d * scaled`.
fn equilibrate(rows: &mut [Row], n_cols: usize) -> Vec<f64> {
    let mut col_scale = vec![1.0; n_cols];
    for pass in 0..3 {
        for r in rows.iter_mut() {
            let m = r.coefs.iter().map(|a| a.abs()).fold(0.0, f64::max);
            if m > 0.0 {
                r.coefs.iter_mut().for_each(|a| *a /= m);
                r.rhs /= m;
            }
        }
        if pass == 2 {
            break;
        }
        for j in 0..n_cols {
            let m = rows.iter().map(|r| r.coefs[j].abs()).fold(0.0, f64::max);
            if m > 0.0 {
                for r in rows.iter_mut() {
                    r.coefs[j] /= m;
                }
                col_scale[j] /= m;
            }
        }
    }
    col_scale
}

struct Tableau {
    /// `m` constraint rows, each `width + 1` long (last entry is the rhs).
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_cols: usize,
    n_slack: usize,
    width: usize,
    artificial: Vec<bool>,
}

impl Tableau {
    fn build(rows: &[Row], n_cols: usize) -> Self {
        let m = rows.len();
        let n_slack = rows.iter().filter(|r| !r.is_eq).count();
        // One artificial per row; rows whose slack can start basic leave theirs unused.
        let width = n_cols + n_slack + m;
        let mut t = vec![vec![0.0; width + 1]; m];
        let mut basis = vec![0; m];
        let mut artificial = vec![false; width];
        let mut slack_idx = n_cols;
        for (i, r) in rows.iter().enumerate() {
            let flip = if r.rhs < 0.0 { -1.0 } else { 1.0 };
            for j in 0..n_cols {
                t[i][j] = flip * r.coefs[j];
            }
            t[i][width] = flip * r.rhs;
            let art = n_cols + n_slack + i;
            artificial[art] = true;
            if r.is_eq {
                t[i][art] = 1.0;
                basis[i] = art;
            } else {
                t[i][slack_idx] = flip;
                if flip > 0.0 {
                    basis[i] = slack_idx;
                } else {
                    t[i][art] = 1.0;
                    basis[i] = art;
                }
                slack_idx += 1;
            }
        }
        Self { t, basis, n_cols, n_slack, width, artificial }
    }

    fn solve(mut self, cost: &[f64]) -> (LpStatus, Vec<f64>) {
        let m = self.t.len();
        let rhs_scale = self.t.iter().map(|r| r[self.width].abs()).fold(1.0, f64::max);

        // Phase one: minimize the sum of artificials.
        let mut phase1 = vec![0.0; self.width];
        for j in 0..self.width {
            if self.artificial[j] {
                phase1[j] = 1.0;
            }
        }
        if self.basis.iter().any(|&b| self.artificial[b]) {
            if self.iterate(&phase1, true) != LpStatus::Optimal {
                return (LpStatus::Infeasible, Vec::new());
            }
            let infeas: f64 = (0..m)
                .filter(|&i| self.artificial[self.basis[i]])
                .map(|i| self.t[i][self.width])
                .sum();
            if infeas > FEAS_TOL * rhs_scale {
                return (LpStatus::Infeasible, Vec::new());
            }
            self.drive_out_artificials();
        }

        // Phase two on the structural and slack columns.
        let mut phase2 = vec![0.0; self.width];
        phase2[..self.n_cols].copy_from_slice(cost);
        let status = self.iterate(&phase2, false);
        if status != LpStatus::Optimal {
            return (status, Vec::new());
        }
        let mut z = vec![0.0; self.n_cols];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_cols {
                z[b] = self.t[i][self.width].max(0.0);
            }
        }
        (LpStatus::Optimal, z)
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (dj, tij) in d.iter_mut().zip(&self.t[i][..self.width]) {
                    *dj -= cb * tij;
                }
            }
        }
        d
    }

    fn iterate(&mut self, cost: &[f64], allow_artificial: bool) -> LpStatus {
        for _ in 0..MAX_PIVOTS {
            let d = self.reduced_costs(cost);
            let entering = (0..self.width)
                .filter(|&j| allow_artificial || !self.artificial[j])
                .find(|&j| d[j] < -PIVOT_TOL && !self.basis.contains(&j));
            let Some(col) = entering else {
                return LpStatus::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.t[i][self.width].max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * br.abs().max(1e-300);
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return LpStatus::Unbounded;
            };
            self.pivot(row, col);
        }
        // Bland's rule terminates; reaching this means numerical trouble.
        LpStatus::Infeasible
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Replaces zero-level artificial basics by structural or slack columns,
    /// dropping rows that turn out to be redundant.
    fn drive_out_artificials(&mut self) {
        let mut i = 0;
        while i < self.t.len() {
            if self.artificial[self.basis[i]] {
                let real = self.n_cols + self.n_slack;
                let candidate = (0..real)
                    .filter(|j| !self.basis.contains(j))
                    .max_by(|&a, &b| self.t[i][a].abs().total_cmp(&self.t[i][b].abs()))
                    .filter(|&j| self.t[i][j].abs() > PIVOT_TOL);
                match candidate {
                    Some(col) => self.pivot(i, col),
                    None => {
                        self.t.remove(i);
                        self.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }
}
