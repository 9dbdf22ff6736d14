//! Galerkin assembly and the linearized two-step theta scheme.
//!
//! With `U^n = sum_i y_i^n phi_i`, each step solves
//!
//! ```text
//! (I + (1 - theta) h A(Ub)) y^n = (I - theta h A(Ub)) y^{n-1} + h f_h(Ub)
//! ```
//!
//! where `Ub = (2 - theta) U^{n-1} - (1 - theta) U^{n-2}` extrapolates the
//! solution to `t_{n-theta}`. Coefficients of `A` and `f` are frozen at the
//! extrapolated state, so every step is a single symmetric positive-definite
//! linear solve. `theta = 0` is the fully implicit end of the family and
//! `theta = 1/2` is Crank-Nicolson.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::{eigenvalue, BasisSpec, BasisTable, SpectralCoeffs};
use crate::error::{Error, Result};
use crate::kernels::{lag_count, lag_weights, LagWeights, MemoryRule};
use crate::problem::{Diffusivity, ProblemSpec, SourceFn};

/// Time difference used by the startup corrector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrectorForm {
    /// `(U^1 - U^0) / h`: a second solve from `U^0` with coefficients frozen
    /// at the predicted midpoint state.
    #[default]
    Standard,
    /// `(U^1 - W) / h`, the difference against the predictor taken literally.
    FromPredictor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub theta: f64,
    pub h: f64,
    /// Basis cutoff `N`.
    pub n: usize,
    /// Quadrature size; `None` selects `max(64, 2N + 16)`.
    pub q: Option<usize>,
    pub rule: MemoryRule,
    pub corrector: CorrectorForm,
    pub store_trajectory: bool,
}

impl SchemeConfig {
    /// Crank-Nicolson with trapezoid memory weights.
    pub fn new(h: f64, n: usize) -> Self {
        Self {
            theta: 0.5,
            h,
            n,
            q: None,
            rule: MemoryRule::Trapezoid,
            corrector: CorrectorForm::Standard,
            store_trajectory: false,
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_rule(mut self, rule: MemoryRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_trajectory(mut self, store: bool) -> Self {
        self.store_trajectory = store;
        self
    }

    pub fn with_corrector(mut self, corrector: CorrectorForm) -> Self {
        self.corrector = corrector;
        self
    }

    pub fn basis(&self) -> Result<BasisSpec> {
        match self.q {
            None => Ok(BasisSpec::new(self.n)),
            Some(q) => BasisSpec::with_quadrature(self.n, q),
        }
    }

    /// Validates against `problem` and returns the number of steps to `t0`.
    pub fn validate(&self, problem: &ProblemSpec) -> Result<usize> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!(
                "theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::Config(format!(
                "time step must be positive, got {}",
                self.h
            )));
        }
        self.basis()?;
        let ratio = problem.t0 / self.h;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 {
            return Err(Error::Grid(format!(
                "horizon {} is not an integer multiple of the step {}",
                problem.t0, self.h
            )));
        }
        if problem.has_memory() {
            lag_count(problem.tau, self.h)?;
        }
        problem.validate_history(self.h)?;
        Ok(steps as usize)
    }
}

/// Dense symmetric `(N+1) x (N+1)` matrix of the form `a(D; phi_i, phi_j)`,
/// mass term included.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessMatrix {
    dim: usize,
    data: Vec<f64>,
    diagonal: bool,
}

impl StiffnessMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// True when assembled by the constant-diffusivity shortcut.
    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// `A y`.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        if self.diagonal {
            return (0..self.dim).map(|i| self.get(i, i) * y[i]).collect();
        }
        self.data
            .chunks(self.dim)
            .map(|row| row.iter().zip(y).map(|(a, b)| a * b).sum())
            .collect()
    }
}

fn check_len(expected: usize, c: &SpectralCoeffs) -> Result<()> {
    if c.len() != expected {
        return Err(Error::Shape {
            expected,
            actual: c.len(),
        });
    }
    Ok(())
}

/// Assembles `A_ij = sum_q w_q D(t, W(x_q)) (1 - x_q^2) phi_i'(x_q) phi_j'(x_q) + delta_ij`
/// with `W` synthesized from `wbar`.
///
/// Every entry is a sequential sum over the nodes, so the result does not
/// depend on how rows are distributed over threads.
pub fn assemble_stiffness(
    table: &BasisTable,
    d: &Diffusivity,
    t: f64,
    wbar: &SpectralCoeffs,
) -> Result<StiffnessMatrix> {
    let dim = table.modes();
    check_len(dim, wbar)?;
    if let Diffusivity::Constant(value) = *d {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::Eval(format!("diffusivity {value} is not positive")));
        }
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = value * eigenvalue(i) + 1.0;
        }
        return Ok(StiffnessMatrix {
            dim,
            data,
            diagonal: true,
        });
    }

    let rule = table.rule();
    let w_nodes = table.synthesize(wbar);
    let mut coeff = Vec::with_capacity(rule.len());
    for (q, (&x, &w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        let dq = d.eval(t, w_nodes[q]);
        if !(dq > 0.0) || !dq.is_finite() {
            return Err(Error::Eval(format!(
                "diffusivity {dq} at x={x}, u={} violates positivity",
                w_nodes[q]
            )));
        }
        coeff.push(w * dq * (1.0 - x * x));
    }
    let entry = |i: usize, j: usize| -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let mut s = 0.0;
        for (q, c) in coeff.iter().enumerate() {
            s += c * table.slope(q, a) * table.slope(q, b);
        }
        s
    };
    let rows: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|i| {
            (0..dim)
                .map(|j| entry(i, j) + if i == j { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(StiffnessMatrix {
        dim,
        data: rows.concat(),
        diagonal: false,
    })
}

/// `(2 - theta) U^{n-1} - (1 - theta) U^{n-2}`.
pub fn extrapolate(
    u_nm1: &SpectralCoeffs,
    u_nm2: &SpectralCoeffs,
    theta: f64,
) -> Result<SpectralCoeffs> {
    check_len(u_nm1.len(), u_nm2)?;
    Ok(SpectralCoeffs::new(
        u_nm1
            .iter()
            .zip(u_nm2.iter())
            .map(|(a, b)| (2.0 - theta) * a - (1.0 - theta) * b)
            .collect(),
    ))
}

/// Load vector `(f(., t, Ubar, Jbar), phi_i)`; `jbar` is `None` without memory,
/// in which case the source receives `w = 0`.
pub fn assemble_load(
    table: &BasisTable,
    f: &SourceFn,
    t: f64,
    ubar: &SpectralCoeffs,
    jbar: Option<&SpectralCoeffs>,
) -> Result<Vec<f64>> {
    let dim = table.modes();
    check_len(dim, ubar)?;
    let u_nodes = table.synthesize(ubar);
    let j_nodes = match jbar {
        Some(j) => {
            check_len(dim, j)?;
            table.synthesize(j)
        }
        None => vec![0.0; u_nodes.len()],
    };
    let nodes = table.rule().nodes();
    let samples: Vec<f64> = (0..nodes.len())
        .into_par_iter()
        .map(|q| f(nodes[q], t, u_nodes[q], j_nodes[q]))
        .collect();
    if let Some(q) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::Eval(format!(
            "source is not finite at x={}, t={t}, u={}, w={}",
            nodes[q], u_nodes[q], j_nodes[q]
        )));
    }
    Ok(table.project_samples(&samples).into_vec())
}

/// Time levels `n, n-1, ...` of the solution, newest first.
///
/// With memory the buffer keeps `M + 3` levels, enough for the extrapolated
/// memory sum of the next step; without memory it keeps two.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    levels: VecDeque<SpectralCoeffs>,
    newest: i64,
    capacity: usize,
    h: f64,
}

impl HistoryBuffer {
    fn new(capacity: usize, h: f64) -> Self {
        Self {
            levels: VecDeque::with_capacity(capacity + 1),
            newest: 0,
            capacity,
            h,
        }
    }

    /// Index of the newest stored level.
    pub fn newest_level(&self) -> i64 {
        self.newest
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// Coefficients at time level `n`, if still stored.
    pub fn level(&self, n: i64) -> Option<&SpectralCoeffs> {
        let back = self.newest - n;
        if back < 0 {
            return None;
        }
        self.levels.get(back as usize)
    }

    fn expect_level(&self, n: i64) -> Result<&SpectralCoeffs> {
        self.level(n).ok_or_else(|| {
            Error::Config(format!(
                "time level {n} is not stored (newest {}, {} levels)",
                self.newest,
                self.levels.len()
            ))
        })
    }

    /// Appends level `newest + 1`, dropping the oldest level when full.
    pub fn push(&mut self, c: SpectralCoeffs) {
        if self.levels.is_empty() {
            self.levels.push_front(c);
            return;
        }
        self.levels.push_front(c);
        self.newest += 1;
        if self.levels.len() > self.capacity {
            self.levels.pop_back();
        }
    }

    fn seed(&mut self, oldest_level: i64, levels: Vec<SpectralCoeffs>) {
        self.levels.clear();
        self.newest = oldest_level + levels.len() as i64 - 1;
        for c in levels {
            self.levels.push_front(c);
        }
    }
}

enum SystemKind {
    /// Diagonal of `A`, fixed for the whole run.
    Diagonal(Vec<f64>),
    Dense,
}

/// Solver state bound to one problem and scheme.
pub struct Solver<'a> {
    problem: &'a ProblemSpec,
    cfg: SchemeConfig,
    table: BasisTable,
    weights: Option<LagWeights>,
    system: SystemKind,
    steps: usize,
}

impl<'a> Solver<'a> {
    pub fn new(problem: &'a ProblemSpec, cfg: &SchemeConfig) -> Result<Self> {
        let steps = cfg.validate(problem)?;
        let table = BasisTable::new(cfg.basis()?);
        let weights = match &problem.kernel {
            Some(k) => Some(lag_weights(k, cfg.h, cfg.rule)?),
            None => None,
        };
        // constant diffusivity: the matrix is diag(D lambda_i + 1) for the whole run
        let system = match problem.diffusivity {
            Diffusivity::Constant(_) => {
                let a = assemble_stiffness(
                    &table,
                    &problem.diffusivity,
                    0.0,
                    &SpectralCoeffs::zeros(table.modes()),
                )?;
                SystemKind::Diagonal(a.diag())
            }
            Diffusivity::Variable { .. } => SystemKind::Dense,
        };
        Ok(Self {
            problem,
            cfg: cfg.clone(),
            table,
            weights,
            system,
            steps,
        })
    }

    pub fn table(&self) -> &BasisTable {
        &self.table
    }

    pub fn weights(&self) -> Option<&LagWeights> {
        self.weights.as_ref()
    }

    /// Number of steps to reach the horizon.
    pub fn steps(&self) -> usize {
        self.steps
    }

    fn modes(&self) -> usize {
        self.table.modes()
    }

    fn project_history(&self, level: i64) -> SpectralCoeffs {
        let s = level as f64 * self.cfg.h;
        let psi = &self.problem.history;
        self.table.project(|x| psi(x, s))
    }

    fn buffer_capacity(&self) -> usize {
        match &self.weights {
            Some(w) => w.lags() + 3,
            None => 2,
        }
    }

    fn stiffness(&self, t: f64, state: &SpectralCoeffs) -> Result<StiffnessMatrix> {
        assemble_stiffness(&self.table, &self.problem.diffusivity, t, state)
    }

    /// Solves `(I + (1-theta) h A) y = (I - theta h A) prev + h load`, or with
    /// `explicit_part` replacing `(I - theta h A) prev` when given.
    fn solve_system(
        &self,
        t: f64,
        coeff_state: &SpectralCoeffs,
        prev: &SpectralCoeffs,
        load: &[f64],
        base: Option<&SpectralCoeffs>,
    ) -> Result<SpectralCoeffs> {
        let h = self.cfg.h;
        let theta = self.cfg.theta;
        let implicit = (1.0 - theta) * h;
        let explicit = theta * h;
        let base = base.unwrap_or(prev);
        match &self.system {
            SystemKind::Diagonal(a) => Ok(SpectralCoeffs::new(
                (0..a.len())
                    .map(|i| {
                        let rhs = base[i] - explicit * a[i] * prev[i] + h * load[i];
                        rhs / (1.0 + implicit * a[i])
                    })
                    .collect(),
            )),
            SystemKind::Dense => {
                let a = self.stiffness(t, coeff_state)?;
                let ay = a.apply(prev.as_slice());
                let dim = a.dim();
                let rhs = DVector::from_iterator(
                    dim,
                    (0..dim).map(|i| base[i] - explicit * ay[i] + h * load[i]),
                );
                let mut m = a.to_dmatrix() * implicit;
                for i in 0..dim {
                    m[(i, i)] += 1.0;
                }
                let chol = m.cholesky().ok_or_else(|| {
                    Error::Solve(format!(
                        "system matrix at t={t} is not positive definite; diffusivity bounds violated"
                    ))
                })?;
                Ok(SpectralCoeffs::new(
                    chol.solve(&rhs).iter().copied().collect(),
                ))
            }
        }
    }

    fn memory(
        &self,
        lagged: impl Fn(usize) -> Result<SpectralCoeffs>,
    ) -> Result<Option<SpectralCoeffs>> {
        let Some(w) = &self.weights else {
            return Ok(None);
        };
        let mut out = SpectralCoeffs::zeros(self.modes());
        for (i, &wi) in w.weights().iter().enumerate() {
            out.add_scaled(wi, &lagged(i)?);
        }
        Ok(Some(out))
    }

    /// Startup by predictor-corrector; returns a buffer holding `U^0`, `U^1`
    /// and, with memory, the projected history back to level `-(M + 2)`.
    pub fn initialize(&self) -> Result<HistoryBuffer> {
        let h = self.cfg.h;
        let theta = self.cfg.theta;
        let mut buffer = HistoryBuffer::new(self.buffer_capacity(), h);
        let depth = self.weights.as_ref().map_or(0, |w| w.lags() as i64 + 2);
        let past: Vec<SpectralCoeffs> = (-depth..=0)
            .into_par_iter()
            .map(|level| self.project_history(level))
            .collect();
        buffer.seed(-depth, past);

        let u0 = buffer.expect_level(0)?.clone();
        let t_half = (1.0 - theta) * h;
        let source = &self.problem.source;

        // predictor: coefficients frozen at U^0, memory from exact history levels
        let j0 = self.memory(|i| Ok(buffer.expect_level(-(i as i64))?.clone()))?;
        let load = assemble_load(&self.table, source, t_half, &u0, j0.as_ref())?;
        let w = self.solve_system(t_half, &u0, &u0, &load, None)?;

        // corrector: coefficients frozen at W^{1-theta} = (1 - theta) U^0 + theta W
        let mix = |older: &SpectralCoeffs, newer: &SpectralCoeffs| {
            let mut c = older.scaled(1.0 - theta);
            c.add_scaled(theta, newer);
            c
        };
        let w_mid = mix(&u0, &w);
        let j_mid = self.memory(|i| {
            let lag = -(i as i64);
            let newer = if i == 0 {
                &w
            } else {
                buffer.expect_level(lag + 1)?
            };
            Ok(mix(buffer.expect_level(lag)?, newer))
        })?;
        let load = assemble_load(&self.table, source, t_half, &w_mid, j_mid.as_ref())?;
        let base = match self.cfg.corrector {
            CorrectorForm::Standard => None,
            CorrectorForm::FromPredictor => Some(&w),
        };
        let u1 = self.solve_system(t_half, &w_mid, &u0, &load, base)?;
        buffer.push(u1);
        Ok(buffer)
    }

    /// Advances the buffer by one level and returns the new coefficients.
    pub fn step(&self, buffer: &mut HistoryBuffer) -> Result<SpectralCoeffs> {
        let theta = self.cfg.theta;
        let n = buffer.newest_level() + 1;
        let t = (n as f64 - theta) * self.cfg.h;
        let prev = buffer.expect_level(n - 1)?;
        let ubar = extrapolate(prev, buffer.expect_level(n - 2)?, theta)?;
        let jbar = self.memory(|i| {
            let lag = n - i as i64;
            extrapolate(
                buffer.expect_level(lag - 1)?,
                buffer.expect_level(lag - 2)?,
                theta,
            )
        })?;
        let load = assemble_load(&self.table, &self.problem.source, t, &ubar, jbar.as_ref())?;
        let next = self.solve_system(t, &ubar, prev, &load, None)?;
        buffer.push(next.clone());
        Ok(next)
    }

    /// Runs to the horizon.
    pub fn run(&self) -> Result<Trajectory> {
        let h = self.cfg.h;
        let mut buffer = self.initialize()?;
        let mut traj = Trajectory::default();
        if self.cfg.store_trajectory {
            traj.push(0.0, buffer.expect_level(0)?.clone());
            traj.push(h, buffer.expect_level(1)?.clone());
        }
        for n in 2..=self.steps {
            let c = self.step(&mut buffer)?;
            if self.cfg.store_trajectory {
                traj.push(n as f64 * h, c);
            }
        }
        if !self.cfg.store_trajectory {
            let last = buffer.newest_level();
            traj.push(last as f64 * h, buffer.expect_level(last)?.clone());
        }
        Ok(traj)
    }
}

/// Solution levels `(t_n, U^n)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub levels: Vec<SpectralCoeffs>,
}

impl Trajectory {
    fn push(&mut self, t: f64, c: SpectralCoeffs) {
        self.times.push(t);
        self.levels.push(c);
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &SpectralCoeffs)> {
        self.levels.last().map(|c| (*self.times.last().unwrap(), c))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &SpectralCoeffs)> {
        self.times.iter().copied().zip(&self.levels)
    }
}

/// `(U^0, U^1)` from the predictor-corrector startup.
pub fn initialize(
    problem: &ProblemSpec,
    cfg: &SchemeConfig,
) -> Result<(SpectralCoeffs, SpectralCoeffs)> {
    let solver = Solver::new(problem, cfg)?;
    let buffer = solver.initialize()?;
    Ok((
        buffer.expect_level(0)?.clone(),
        buffer.expect_level(1)?.clone(),
    ))
}

/// Solves `problem` to its horizon.
pub fn solve(problem: &ProblemSpec, cfg: &SchemeConfig) -> Result<Trajectory> {
    Solver::new(problem, cfg)?.run()
}
