//! Central-cut ellipsoid method for maximizing a concave function over a
//! convex set described by a separation oracle.
//!
//! The ellipsoid is `{x : (x - c)ᵀ A⁻¹ (x - c) <= 1}`. Each oracle call
//! returns either a supergradient at a feasible point or the outward normal
//! of a violated constraint; both cut away the half that cannot hold the
//! maximizer.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutKind {
    Objective,
    Feasibility,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutOracleResult {
    pub kind: CutKind,
    /// Supergradient for an objective cut, outward constraint normal for a
    /// feasibility cut.
    pub vector: Vec<f64>,
    /// Objective value at the query point (objective cuts only).
    pub value: f64,
}

impl CutOracleResult {
    pub fn objective(value: f64, supergradient: Vec<f64>) -> Self {
        Self { kind: CutKind::Objective, vector: supergradient, value }
    }

    pub fn feasibility(normal: Vec<f64>) -> Self {
        Self { kind: CutKind::Feasibility, vector: normal, value: f64::NAN }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipsoidOptions {
    /// Stop once `upper_bound - best <= tol_abs + tol_rel * |best|`.
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iter: usize,
}

impl Default for EllipsoidOptions {
    fn default() -> Self {
        Self { tol_abs: 1e-9, tol_rel: 0.0, max_iter: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidState {
    pub center: Vec<f64>,
    pub shape: Vec<Vec<f64>>,
    pub iterations: usize,
    pub best_point: Option<Vec<f64>>,
    pub best_value: f64,
    /// Smallest `g(x_k) + sqrt(s_kᵀ A_k s_k)` seen; an upper bound on the
    /// maximum whenever the initial ellipsoid contained a maximizer.
    pub upper_bound: f64,
    pub radius: f64,
    pub restarts: usize,
}

impl EllipsoidState {
    /// Ball of radius `radius` around `center`.
    pub fn ball(center: &[f64], radius: f64) -> Self {
        let n = center.len();
        let mut shape = vec![vec![0.0; n]; n];
        for (i, row) in shape.iter_mut().enumerate() {
            row[i] = radius * radius;
        }
        Self {
            center: center.to_vec(),
            shape,
            iterations: 0,
            best_point: None,
            best_value: f64::NEG_INFINITY,
            upper_bound: f64::INFINITY,
            radius,
            restarts: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn gap(&self) -> f64 {
        self.upper_bound - self.best_value
    }

    fn converged(&self, opts: &EllipsoidOptions) -> bool {
        self.best_point.is_some() && self.gap() <= opts.tol_abs + opts.tol_rel * self.best_value.abs()
    }

    fn shape_times(&self, v: &[f64]) -> Vec<f64> {
        self.shape.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    fn degenerate(&self) -> bool {
        self.shape.iter().enumerate().any(|(i, row)| row[i] <= 1e-300 || row.iter().any(|v| !v.is_finite()))
            || self.center.iter().any(|v| !v.is_finite())
    }

    fn restart(&mut self) {
        let center = self.best_point.clone().unwrap_or_else(|| self.center.clone());
        let radius = 2.0 * self.radius;
        let fresh = Self::ball(&center, radius);
        self.center = fresh.center;
        self.shape = fresh.shape;
        self.radius = radius;
        self.restarts += 1;
    }

    /// Central cut keeping `{x : vᵀ(x - c) >= 0}`. Returns `sqrt(vᵀAv)`.
    fn cut(&mut self, v: &[f64]) -> f64 {
        let n = self.dim() as f64;
        let av = self.shape_times(v);
        let vav: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
        let norm = vav.max(0.0).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return norm;
        }
        let ag: Vec<f64> = av.iter().map(|x| x / norm).collect();
        for (c, a) in self.center.iter_mut().zip(&ag) {
            *c += a / (n + 1.0);
        }
        if self.dim() == 1 {
            self.shape[0][0] /= 4.0;
        } else {
            let factor = n * n / (n * n - 1.0);
            let w = 2.0 / (n + 1.0);
            for (i, row) in self.shape.iter_mut().enumerate() {
                for (j, x) in row.iter_mut().enumerate() {
                    *x = factor * (*x - w * ag[i] * ag[j]);
                }
            }
            let m = self.dim();
            for i in 0..m {
                for j in (i + 1)..m {
                    let s = 0.5 * (self.shape[i][j] + self.shape[j][i]);
                    self.shape[i][j] = s;
                    self.shape[j][i] = s;
                }
            }
        }
        norm
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    /// Objective value, `None` for feasibility cuts.
    pub value: Option<f64>,
    pub gap_bound: f64,
}

impl TraceRow {
    pub fn csv_header() -> &'static str {
        "iter,g_value,gap_bound"
    }

    pub fn to_csv(&self) -> String {
        match self.value {
            Some(v) => format!("{},{:.11e},{:.11e}", self.iter, v, self.gap_bound),
            None => format!("{},,{:.11e}", self.iter, self.gap_bound),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidOutcome {
    pub best_point: Option<Vec<f64>>,
    pub best_value: f64,
    pub upper_bound: f64,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
    pub state: EllipsoidState,
}

pub fn ellipsoid_run<F>(oracle: F, init_center: &[f64], init_radius: f64, opts: &EllipsoidOptions) -> Result<EllipsoidOutcome>
where
    F: FnMut(&[f64]) -> Result<CutOracleResult>,
{
    if init_center.is_empty() {
        return Err(Error::InvalidParams("ellipsoid dimension must be at least 1".into()));
    }
    if !(init_radius > 0.0 && init_radius.is_finite()) {
        return Err(Error::InvalidParams(format!("initial radius must be positive, got {init_radius}")));
    }
    ellipsoid_resume(EllipsoidState::ball(init_center, init_radius), oracle, opts)
}

/// Continues from `state` for at most `opts.max_iter` further iterations.
pub fn ellipsoid_resume<F>(mut state: EllipsoidState, mut oracle: F, opts: &EllipsoidOptions) -> Result<EllipsoidOutcome>
where
    F: FnMut(&[f64]) -> Result<CutOracleResult>,
{
    let mut trace = Vec::new();
    let mut converged = state.converged(opts);
    let mut steps = 0;
    while !converged && steps < opts.max_iter {
        steps += 1;
        state.iterations += 1;
        let x = state.center.clone();
        let cut = oracle(&x)?;
        if cut.vector.len() != state.dim() || cut.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateCut);
        }
        let zero = cut.vector.iter().all(|&v| v == 0.0);
        let v: Vec<f64> = match cut.kind {
            CutKind::Objective => {
                if cut.value > state.best_value {
                    state.best_value = cut.value;
                    state.best_point = Some(x.clone());
                }
                if zero {
                    // A zero supergradient certifies a maximizer.
                    state.upper_bound = state.upper_bound.min(cut.value);
                    trace.push(TraceRow { iter: state.iterations, value: Some(cut.value), gap_bound: 0.0 });
                    converged = true;
                    break;
                }
                cut.vector
            }
            CutKind::Feasibility => {
                if zero {
                    return Err(Error::DegenerateCut);
                }
                cut.vector.iter().map(|x| -x).collect()
            }
        };
        let bound = state.cut(&v);
        if cut.kind == CutKind::Objective {
            state.upper_bound = state.upper_bound.min(cut.value + bound);
        }
        trace.push(TraceRow {
            iter: state.iterations,
            value: (cut.kind == CutKind::Objective).then_some(cut.value),
            gap_bound: bound,
        });
        if state.degenerate() || !(bound > 0.0) {
            state.restart();
        }
        converged = state.converged(opts);
    }
    Ok(EllipsoidOutcome {
        best_point: state.best_point.clone(),
        best_value: state.best_value,
        upper_bound: state.upper_bound,
        converged,
        iterations: state.iterations,
        trace,
        state,
    })
}
