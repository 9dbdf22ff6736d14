//! Error norms, convergence orders, and the spatial and temporal studies.
//!
//! Reference solutions are computed in-process at the reference resolution;
//! no stored fixtures are involved.

use rayon::prelude::*;

use crate::basis::{eigenvalue, SpectralCoeffs};
use crate::error::{Error, Result};
use crate::kernels::MemoryRule;
use crate::problem::{canonical_case, CaseId, ProblemSpec};
use crate::solver::{solve, SchemeConfig};

/// Errors below this level count as saturated.
pub const SATURATION_FLOOR: f64 = 1e-13;

/// L2(0, 1) distance of two coefficient vectors, the shorter zero-padded.
pub fn l2_error(a: &SpectralCoeffs, b: &SpectralCoeffs) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let x = a.as_slice().get(i).copied().unwrap_or(0.0);
            let y = b.as_slice().get(i).copied().unwrap_or(0.0);
            (x - y) * (x - y)
        })
        .sum::<f64>()
        .sqrt()
}

/// `log(e_{k-1} / e_k) / log(h_{k-1} / h_k)` for `k = 1..`.
pub fn eoc(errors: &[f64], steps: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != steps.len() {
        return Err(Error::Shape {
            expected: steps.len(),
            actual: errors.len(),
        });
    }
    if errors.len() < 2 {
        return Err(Error::Domain("at least two resolutions are needed".into()));
    }
    if let Some(e) = errors.iter().find(|&&e| !(e > 0.0)) {
        return Err(Error::Domain(format!(
            "error {e} is not positive (saturated)"
        )));
    }
    if let Some(h) = steps.iter().find(|&&h| !(h > 0.0)) {
        return Err(Error::Domain(format!("step {h} is not positive")));
    }
    Ok(errors
        .windows(2)
        .zip(steps.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}

/// Estimated order in one report row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eoc {
    /// First row.
    Undefined,
    Value(f64),
    /// Error at or below [`SATURATION_FLOOR`]; excluded from order fits.
    Saturated,
}

impl Eoc {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Value(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Spatial,
    Temporal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    /// `N` for spatial studies, `h` for temporal ones.
    pub resolution: f64,
    pub error: f64,
    pub eoc: Eoc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub kind: StudyKind,
    pub case: String,
    /// Time at which solutions were compared.
    pub t_eval: f64,
    /// `N_ref` or `h_ref`.
    pub reference: f64,
    pub rows: Vec<StudyRow>,
}

impl ConvergenceReport {
    fn from_errors(
        kind: StudyKind,
        case: String,
        t_eval: f64,
        reference: f64,
        resolutions: &[f64],
        errors: &[f64],
    ) -> Self {
        // spatial orders are measured against 1/N
        let step = |r: f64| match kind {
            StudyKind::Spatial => 1.0 / r,
            StudyKind::Temporal => r,
        };
        let rows = resolutions
            .iter()
            .zip(errors)
            .enumerate()
            .map(|(k, (&r, &e))| {
                let eoc = if k == 0 {
                    Eoc::Undefined
                } else if e <= SATURATION_FLOOR || errors[k - 1] <= SATURATION_FLOOR {
                    Eoc::Saturated
                } else {
                    Eoc::Value((errors[k - 1] / e).ln() / (step(resolutions[k - 1]) / step(r)).ln())
                };
                StudyRow {
                    resolution: r,
                    error: e,
                    eoc,
                }
            })
            .collect();
        Self {
            kind,
            case,
            t_eval,
            reference,
            rows,
        }
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    /// Last finite order, skipping saturated rows.
    pub fn terminal_eoc(&self) -> Option<f64> {
        self.rows.iter().rev().find_map(|r| r.eoc.value())
    }
}

/// Parameters of the spatial study.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialStudy {
    pub n_list: Vec<usize>,
    pub n_ref: usize,
    pub h: f64,
    pub t_eval: f64,
    pub theta: f64,
    pub rule: MemoryRule,
}

impl Default for SpatialStudy {
    fn default() -> Self {
        Self {
            n_list: (1..=10).map(|k| 2 * k).collect(),
            n_ref: 30,
            h: 0.02,
            t_eval: 0.125,
            theta: 0.5,
            rule: MemoryRule::Trapezoid,
        }
    }
}

/// Parameters of the temporal study.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalStudy {
    pub h_list: Vec<f64>,
    pub h_ref: f64,
    pub n: usize,
    /// Comparison time; `None` selects the problem horizon.
    pub t_eval: Option<f64>,
    pub theta: f64,
    pub rule: MemoryRule,
    /// Scheme weight of the reference run.
    pub reference_theta: f64,
    /// Memory rule of the reference run.
    pub reference_rule: MemoryRule,
}

impl Default for TemporalStudy {
    fn default() -> Self {
        Self {
            h_list: vec![0.05, 0.025, 0.0125, 0.00625],
            h_ref: 0.002,
            n: 20,
            t_eval: None,
            theta: 0.5,
            rule: MemoryRule::Trapezoid,
            reference_theta: 0.5,
            reference_rule: MemoryRule::Trapezoid,
        }
    }
}

fn final_level(problem: &ProblemSpec, cfg: &SchemeConfig) -> Result<SpectralCoeffs> {
    let traj = solve(problem, cfg)?;
    traj.last()
        .map(|(_, c)| c.clone())
        .ok_or_else(|| Error::Solve("empty trajectory".into()))
}

/// Errors against a reference run at `N_ref`, all runs sharing one time step.
///
/// Solutions are compared at the time level nearest to `t_eval`; the report
/// records that level's time.
pub fn spatial_study(problem: &ProblemSpec, study: &SpatialStudy) -> Result<ConvergenceReport> {
    if study.n_list.is_empty() {
        return Err(Error::Config("spatial study needs at least one N".into()));
    }
    if let Some(&n) = study.n_list.iter().find(|&&n| n >= study.n_ref) {
        return Err(Error::Config(format!(
            "N = {n} is not below the reference N = {}",
            study.n_ref
        )));
    }
    let level = (study.t_eval / study.h).round().max(1.0);
    let t_eval = level * study.h;
    let problem = problem.with_horizon(t_eval)?;
    let cfg = |n: usize| {
        SchemeConfig::new(study.h, n)
            .with_theta(study.theta)
            .with_rule(study.rule)
    };
    let runs: Vec<usize> = std::iter::once(study.n_ref)
        .chain(study.n_list.iter().copied())
        .collect();
    let finals = runs
        .par_iter()
        .map(|&n| final_level(&problem, &cfg(n)))
        .collect::<Result<Vec<_>>>()?;
    let reference = &finals[0];
    let errors: Vec<f64> = finals[1..].iter().map(|c| l2_error(c, reference)).collect();
    let resolutions: Vec<f64> = study.n_list.iter().map(|&n| n as f64).collect();
    Ok(ConvergenceReport::from_errors(
        StudyKind::Spatial,
        problem.label.clone(),
        t_eval,
        study.n_ref as f64,
        &resolutions,
        &errors,
    ))
}

/// Errors against a reference run at `h_ref`, all runs sharing one basis size.
pub fn temporal_study(problem: &ProblemSpec, study: &TemporalStudy) -> Result<ConvergenceReport> {
    if study.h_list.is_empty() {
        return Err(Error::Config(
            "temporal study needs at least one step".into(),
        ));
    }
    if let Some(&h) = study.h_list.iter().find(|&&h| h <= study.h_ref) {
        return Err(Error::Config(format!(
            "step {h} is not coarser than the reference step {}",
            study.h_ref
        )));
    }
    let problem = match study.t_eval {
        Some(t) => problem.with_horizon(t)?,
        None => problem.clone(),
    };
    let mut runs = vec![SchemeConfig::new(study.h_ref, study.n)
        .with_theta(study.reference_theta)
        .with_rule(study.reference_rule)];
    runs.extend(study.h_list.iter().map(|&h| {
        SchemeConfig::new(h, study.n)
            .with_theta(study.theta)
            .with_rule(study.rule)
    }));
    // surface grid errors before any expensive run
    for cfg in &runs {
        cfg.validate(&problem)?;
    }
    let finals = runs
        .par_iter()
        .map(|cfg| final_level(&problem, cfg))
        .collect::<Result<Vec<_>>>()?;
    let reference = &finals[0];
    let errors: Vec<f64> = finals[1..].iter().map(|c| l2_error(c, reference)).collect();
    Ok(ConvergenceReport::from_errors(
        StudyKind::Temporal,
        problem.label.clone(),
        problem.t0,
        study.h_ref,
        &study.h_list,
        &errors,
    ))
}

/// Discrepancies of a single-mode linear run against its closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalDiscrepancy {
    /// Largest deviation over all levels and modes from the per-step
    /// rational amplification `(1 - theta h mu) / (1 + (1 - theta) h mu)`.
    pub recurrence: f64,
    /// Deviation at `t` from `y(0) exp(-mu t)`, `mu = lambda_i + 1`.
    pub exact: f64,
}

/// Runs `D = 1`, `f = 0` from `phi_mode` and compares with the modal solution.
pub fn modal_oracle_error(mode: usize, theta: f64, h: f64, t: f64) -> Result<ModalDiscrepancy> {
    let problem = canonical_case(CaseId::ManufacturedLinear { mode })?.with_horizon(t)?;
    let cfg = SchemeConfig::new(h, mode + 2)
        .with_theta(theta)
        .with_trajectory(true);
    let traj = solve(&problem, &cfg)?;
    let y0 = traj.levels[0].clone();
    let factors: Vec<f64> = (0..y0.len())
        .map(|j| {
            let mu = eigenvalue(j) + 1.0;
            (1.0 - theta * h * mu) / (1.0 + (1.0 - theta) * h * mu)
        })
        .collect();
    let mut expected = y0.clone();
    let mut recurrence = 0.0f64;
    for level in &traj.levels[1..] {
        for (j, e) in expected.as_mut_slice().iter_mut().enumerate() {
            *e *= factors[j];
        }
        recurrence = recurrence.max(
            l2_error(level, &expected).max(
                level
                    .iter()
                    .zip(expected.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            ),
        );
    }
    let (t_end, last) = traj.last().expect("trajectory holds U^0");
    let mu = eigenvalue(mode) + 1.0;
    let exact = (last[mode] - y0[mode] * (-mu * t_end).exp()).abs();
    Ok(ModalDiscrepancy { recurrence, exact })
}
