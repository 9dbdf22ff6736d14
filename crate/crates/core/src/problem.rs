//! Problem instances of the transformed equation
//!
//! ```text
//! u_t + u = (D(t, u) (1 - x^2) u_x)_x + f(x, t, u, J u),   x in (0, 1)
//! u(x, s) = psi(x, s),                                      -tau <= s <= 0
//! ```
//!
//! obtained from the physical temperature model through `u = e^{-t} T`.

use std::fmt;
use std::sync::Arc;

use crate::basis::{basis_eval, Derivative, SpectralCoeffs};
use crate::error::{Error, Result};
use crate::kernels::{KernelFn, KernelSpec};

/// `D(t, u)`.
pub type DiffusivityFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// `f(x, t, u, w)` where `w` is the memory value at `x`.
pub type SourceFn = Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;
/// `psi(x, s)` for `s <= 0`.
pub type HistoryFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Memory length of the canonical cases.
pub const CANONICAL_TAU: f64 = 0.4;
/// Horizon of the canonical cases.
pub const CANONICAL_T0: f64 = 0.5;
/// Default exponent of the nonlinear-diffusion case.
pub const DEFAULT_BETA: f64 = 1.0;
/// Representative fractional order.
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Clone)]
pub enum Diffusivity {
    Constant(f64),
    Variable {
        d: DiffusivityFn,
        /// `(D_-, D_+)` on the expected solution range, when known.
        bounds: Option<(f64, f64)>,
    },
}

impl Diffusivity {
    pub fn variable(d: DiffusivityFn) -> Self {
        Self::Variable { d, bounds: None }
    }

    pub fn eval(&self, t: f64, u: f64) -> f64 {
        match self {
            Self::Constant(d) => *d,
            Self::Variable { d, .. } => d(t, u),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant(_))
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            Self::Constant(d) => Some((*d, *d)),
            Self::Variable { bounds, .. } => *bounds,
        }
    }
}

impl fmt::Debug for Diffusivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(d) => f.debug_tuple("Constant").field(d).finish(),
            Self::Variable { bounds, .. } => {
                f.debug_struct("Variable").field("bounds", bounds).finish()
            }
        }
    }
}

/// One instance of the transformed problem.
#[derive(Clone)]
pub struct ProblemSpec {
    pub label: String,
    pub diffusivity: Diffusivity,
    pub source: SourceFn,
    pub kernel: Option<KernelSpec>,
    pub history: HistoryFn,
    pub tau: f64,
    pub t0: f64,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("label", &self.label)
            .field("diffusivity", &self.diffusivity)
            .field("kernel", &self.kernel)
            .field("tau", &self.tau)
            .field("t0", &self.t0)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn new(
        label: impl Into<String>,
        diffusivity: Diffusivity,
        source: SourceFn,
        kernel: Option<KernelSpec>,
        history: HistoryFn,
        tau: f64,
        t0: f64,
    ) -> Result<Self> {
        let spec = Self {
            label: label.into(),
            diffusivity,
            source,
            kernel,
            history,
            tau,
            t0,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0) || !self.t0.is_finite() {
            return Err(Error::Config(format!(
                "horizon t0 must be positive, got {}",
                self.t0
            )));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::Config(format!(
                "memory length must be nonnegative, got {}",
                self.tau
            )));
        }
        if let Some(k) = &self.kernel {
            if (k.tau() - self.tau).abs() > 1e-12 * self.tau.max(1.0) {
                return Err(Error::Config(format!(
                    "kernel memory length {} differs from problem memory length {}",
                    k.tau(),
                    self.tau
                )));
            }
        }
        if let Diffusivity::Constant(d) = self.diffusivity {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Config(format!(
                    "diffusivity must be positive, got {d}"
                )));
            }
        }
        Ok(())
    }

    pub fn has_memory(&self) -> bool {
        self.kernel.is_some()
    }

    /// Copy of this problem ending at `t0`.
    pub fn with_horizon(&self, t0: f64) -> Result<Self> {
        let mut p = self.clone();
        p.t0 = t0;
        p.validate()?;
        Ok(p)
    }

    /// Checks that `psi` is finite on the history window `[-tau - 2h, 0]`
    /// at every lag level and a sample of points.
    pub fn validate_history(&self, h: f64) -> Result<()> {
        let depth = if self.has_memory() {
            (self.tau / h).round() as i64 + 2
        } else {
            0
        };
        for level in -depth..=0 {
            let s = level as f64 * h;
            for k in 0..=8 {
                let x = k as f64 / 8.0;
                let v = (self.history)(x, s);
                if !v.is_finite() {
                    return Err(Error::Eval(format!(
                        "initial history is not finite at x={x}, s={s}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The canonical test problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaseId {
    /// `D(u) = exp(-beta u)`, `f = u (1 - u^2)`, no memory.
    NonlinearDiffusion { beta: f64 },
    /// `D = 1`, `f = w (1 - w)`, Gaussian memory kernel.
    GaussianMemory { amplitude: f64, sigma: f64 },
    /// `D = 1`, `f = w (1 - w)`, fractional memory kernel.
    FractionalMemory { alpha: f64 },
    /// `D = 1`, `f = 0`, history `phi_mode(x)` constant in time.
    ManufacturedLinear { mode: usize },
}

impl CaseId {
    pub fn nonlinear_default() -> Self {
        Self::NonlinearDiffusion { beta: DEFAULT_BETA }
    }

    /// Gaussian memory with `A = 1`, `sigma = tau / 4`.
    pub fn gaussian_default() -> Self {
        Self::GaussianMemory {
            amplitude: 1.0,
            sigma: CANONICAL_TAU / 4.0,
        }
    }

    pub fn fractional_default() -> Self {
        Self::FractionalMemory {
            alpha: DEFAULT_ALPHA,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::NonlinearDiffusion { .. } => "nonlinear_diffusion",
            Self::GaussianMemory { .. } => "gaussian_memory",
            Self::FractionalMemory { .. } => "fractional_memory",
            Self::ManufacturedLinear { .. } => "manufactured_linear",
        }
    }
}

fn canonical_history() -> HistoryFn {
    Arc::new(|x: f64, s: f64| (std::f64::consts::PI * x).cos() / (1.0 + s))
}

fn logistic_memory_source() -> SourceFn {
    Arc::new(|_x, _t, _u, w| w * (1.0 - w))
}

/// Range of `u` over which canonical diffusivity bounds are recorded.
pub const BOUNDS_RANGE: (f64, f64) = (-3.0, 3.0);

/// Builds one of the canonical problems.
pub fn canonical_case(id: CaseId) -> Result<ProblemSpec> {
    let tau = CANONICAL_TAU;
    let t0 = CANONICAL_T0;
    match id {
        CaseId::NonlinearDiffusion { beta } => {
            if !beta.is_finite() {
                return Err(Error::Config(format!("beta must be finite, got {beta}")));
            }
            let (lo, hi) = BOUNDS_RANGE;
            let a = (-beta * lo).exp();
            let b = (-beta * hi).exp();
            ProblemSpec::new(
                id.name(),
                Diffusivity::Variable {
                    d: Arc::new(move |_t, u| (-beta * u).exp()),
                    bounds: Some((a.min(b), a.max(b))),
                },
                Arc::new(|_x, _t, u, _w| u * (1.0 - u * u)),
                None,
                canonical_history(),
                tau,
                t0,
            )
        }
        CaseId::GaussianMemory { amplitude, sigma } => ProblemSpec::new(
            id.name(),
            Diffusivity::Constant(1.0),
            logistic_memory_source(),
            Some(KernelSpec::gaussian(amplitude, sigma, tau)?),
            canonical_history(),
            tau,
            t0,
        ),
        CaseId::FractionalMemory { alpha } => ProblemSpec::new(
            id.name(),
            Diffusivity::Constant(1.0),
            logistic_memory_source(),
            Some(KernelSpec::fractional(alpha, tau)?),
            canonical_history(),
            tau,
            t0,
        ),
        CaseId::ManufacturedLinear { mode } => ProblemSpec::new(
            id.name(),
            Diffusivity::Constant(1.0),
            Arc::new(|_x, _t, _u, _w| 0.0),
            None,
            Arc::new(move |x, _s| basis_eval(mode, x, Derivative::Value)),
            tau,
            t0,
        ),
    }
}

/// Physical model on the temperature scale: `T_t = (d(T)(1-x^2)T_x)_x + g(x, t, T, J T)`.
#[derive(Clone)]
pub struct PhysicalModel {
    pub diffusivity: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub source: SourceFn,
    /// `T0(x, s)` for `s <= 0`.
    pub initial: HistoryFn,
    pub kernel: Option<KernelSpec>,
    pub tau: f64,
    pub t0: f64,
}

/// Rewrites a physical model in the variable `u = e^{-t} T`.
///
/// `D(t, u) = d(e^t u)`, `psi(x, s) = e^{-s} T0(x, s)`, and the memory of the
/// transformed problem uses the kernel `K(s) e^{-s}`, so that its value `w`
/// satisfies `J T = e^t w`. The source becomes
/// `f(x, t, u, w) = e^{-t} g(x, t, e^t u, e^t w)`.
pub fn to_transformed(model: PhysicalModel) -> Result<ProblemSpec> {
    let PhysicalModel {
        diffusivity,
        source,
        initial,
        kernel,
        tau,
        t0,
    } = model;
    let kernel = match kernel {
        None => None,
        Some(k) => {
            let inner = k.clone();
            let damped: KernelFn = Arc::new(move |s: f64| {
                // eval only fails outside (0, tau], which the weight generator never requests
                inner.eval(s).unwrap_or(f64::NAN) * (-s).exp()
            });
            Some(KernelSpec::numeric(damped, k.tau())?)
        }
    };
    ProblemSpec::new(
        "transformed",
        Diffusivity::variable(Arc::new(move |t, u| diffusivity(t.exp() * u))),
        Arc::new(move |x, t, u, w| {
            let e = t.exp();
            source(x, t, e * u, e * w) / e
        }),
        kernel,
        Arc::new(move |x, s| (-s).exp() * initial(x, s)),
        tau,
        t0,
    )
}

/// Temperature-scale coefficients `T = e^t u`.
pub fn untransform(u: &SpectralCoeffs, t: f64) -> SpectralCoeffs {
    u.scaled(t.exp())
}
