//! Run configuration files.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use ebm_spectral::{
    canonical_case, to_transformed, CaseId, CorrectorForm, Diffusivity, KernelSpec, MemoryRule,
    PhysicalModel, ProblemSpec, SchemeConfig, SpatialStudy, TemporalStudy,
};
use serde::Deserialize;

use crate::expr::Formula;

/// Invalid configuration; the message starts with the offending field.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn field_err(field: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{field}: {msg}"))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemBlock,
    #[serde(default)]
    pub scheme: SchemeBlock,
    pub study: Option<StudyBlock>,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub threads: Threads,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub case: CaseName,
    pub beta: Option<f64>,
    pub amplitude: Option<f64>,
    pub sigma: Option<f64>,
    pub alpha: Option<f64>,
    pub mode: Option<usize>,
    pub scale: Option<Scale>,
    pub diffusivity: Option<String>,
    pub source: Option<String>,
    pub history: Option<String>,
    pub tau: Option<f64>,
    pub t0: Option<f64>,
    pub kernel: Option<KernelBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseName {
    NonlinearDiffusion,
    GaussianMemory,
    FractionalMemory,
    ManufacturedLinear,
    Custom,
}

/// Variables the custom expressions are written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// `u = e^{-t} T`: `D(t, u)`, `f(x, t, u, w)`, `psi(x, s)`.
    #[default]
    Transformed,
    /// Temperature: `d(T)`, `g(x, t, T, w)`, `T0(x, s)`.
    Physical,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelBlock {
    Gaussian { amplitude: f64, sigma: f64 },
    Fractional { alpha: f64 },
    Constant { value: f64 },
    Expression { expr: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeBlock {
    pub theta: f64,
    pub h: f64,
    pub n: usize,
    pub q: Option<usize>,
    pub rule: RuleName,
    pub corrector_form: CorrectorName,
}

impl Default for SchemeBlock {
    fn default() -> Self {
        Self {
            theta: 0.5,
            h: 0.02,
            n: 20,
            q: None,
            rule: RuleName::Trapezoid,
            corrector_form: CorrectorName::Standard,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleName {
    Rectangle,
    #[default]
    Trapezoid,
}

impl From<RuleName> for MemoryRule {
    fn from(r: RuleName) -> Self {
        match r {
            RuleName::Rectangle => MemoryRule::Rectangle,
            RuleName::Trapezoid => MemoryRule::Trapezoid,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectorName {
    #[default]
    Standard,
    FromPredictor,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyBlock {
    pub kind: StudyKindName,
    /// N values (spatial) or step sizes (temporal).
    pub resolutions: Option<Vec<f64>>,
    /// N_ref (spatial) or h_ref (temporal).
    pub reference: Option<f64>,
    pub t_eval: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKindName {
    Spatial,
    Temporal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub emit_plot_scripts: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("output"),
            emit_plot_scripts: false,
        }
    }
}

/// Worker count: a number or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Threads {
    #[default]
    Auto,
    Count(usize),
}

impl<'de> Deserialize<'de> for Threads {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(0) => Err(serde::de::Error::custom("threads must be positive")),
            Raw::Count(n) => Ok(Threads::Count(n)),
            Raw::Word(w) if w == "auto" => Ok(Threads::Auto),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "threads must be a positive integer or \"auto\", got {w:?}"
            ))),
        }
    }
}

/// What a study run needs.
#[derive(Debug, Clone)]
pub enum StudyPlan {
    Spatial(SpatialStudy),
    Temporal(TemporalStudy),
}

/// Fully validated configuration.
#[derive(Debug, Clone)]
pub struct Validated {
    pub problem: ProblemSpec,
    pub scheme: SchemeConfig,
    pub study: Option<StudyPlan>,
    pub output: PathBuf,
    pub emit_plot_scripts: bool,
    pub threads: Threads,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string().trim_end().to_string()))
    }

    pub fn validate(&self) -> Result<Validated, ConfigError> {
        let problem = self.problem.build()?;
        let scheme = self.scheme.build();
        check_theta("scheme.theta", scheme.theta)?;
        let study = match &self.study {
            None => None,
            Some(s) => Some(s.build(&self.scheme, &problem)?),
        };
        if study.is_none() {
            check_run(&problem, &scheme, "scheme")?;
        }
        Ok(Validated {
            problem,
            scheme,
            study,
            output: self.output.directory.clone(),
            emit_plot_scripts: self.output.emit_plot_scripts,
            threads: self.threads,
        })
    }
}

fn check_theta(field: &str, theta: f64) -> Result<(), ConfigError> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(field_err(field, format!("must lie in [0, 1], got {theta}")));
    }
    Ok(())
}

fn check_run(problem: &ProblemSpec, cfg: &SchemeConfig, field: &str) -> Result<(), ConfigError> {
    cfg.validate(problem)
        .map(|_| ())
        .map_err(|e| field_err(field, e))
}

impl SchemeBlock {
    fn build(&self) -> SchemeConfig {
        let mut cfg = SchemeConfig::new(self.h, self.n)
            .with_theta(self.theta)
            .with_rule(self.rule.into())
            .with_corrector(match self.corrector_form {
                CorrectorName::Standard => CorrectorForm::Standard,
                CorrectorName::FromPredictor => CorrectorForm::FromPredictor,
            });
        cfg.q = self.q;
        cfg
    }
}

fn as_count(field: &str, v: f64) -> Result<usize, ConfigError> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e6 {
        Ok(v as usize)
    } else {
        Err(field_err(
            field,
            format!("expected a nonnegative integer, got {v}"),
        ))
    }
}

impl StudyBlock {
    fn build(&self, scheme: &SchemeBlock, problem: &ProblemSpec) -> Result<StudyPlan, ConfigError> {
        if let Some(r) = &self.resolutions {
            if r.is_empty() {
                return Err(field_err("study.resolutions", "list is empty"));
            }
        }
        let base = scheme.build();
        match self.kind {
            StudyKindName::Spatial => {
                let mut s = SpatialStudy {
                    h: scheme.h,
                    theta: scheme.theta,
                    rule: scheme.rule.into(),
                    ..SpatialStudy::default()
                };
                if let Some(r) = &self.resolutions {
                    s.n_list = r
                        .iter()
                        .map(|&v| as_count("study.resolutions", v))
                        .collect::<Result<_, _>>()?;
                }
                if let Some(v) = self.reference {
                    s.n_ref = as_count("study.reference", v)?;
                }
                if let Some(t) = self.t_eval {
                    s.t_eval = t;
                }
                if let Some(&n) = s.n_list.iter().find(|&&n| n >= s.n_ref) {
                    return Err(field_err(
                        "study.resolutions",
                        format!("N = {n} is not below the reference N = {}", s.n_ref),
                    ));
                }
                if !(s.t_eval > 0.0) {
                    return Err(field_err("study.t_eval", "must be positive"));
                }
                let level = (s.t_eval / s.h).round().max(1.0);
                let at = problem
                    .with_horizon(level * s.h)
                    .map_err(|e| field_err("study.t_eval", e))?;
                for n in std::iter::once(s.n_ref).chain(s.n_list.iter().copied()) {
                    let mut cfg = base.clone();
                    cfg.n = n;
                    check_run(&at, &cfg, "study")?;
                }
                Ok(StudyPlan::Spatial(s))
            }
            StudyKindName::Temporal => {
                let mut s = TemporalStudy {
                    n: scheme.n,
                    theta: scheme.theta,
                    rule: scheme.rule.into(),
                    t_eval: self.t_eval,
                    ..TemporalStudy::default()
                };
                if let Some(r) = &self.resolutions {
                    s.h_list = r.clone();
                }
                if let Some(v) = self.reference {
                    s.h_ref = v;
                }
                if let Some(&h) = s.h_list.iter().find(|&&h| !(h > s.h_ref)) {
                    return Err(field_err(
                        "study.resolutions",
                        format!(
                            "step {h} is not coarser than the reference step {}",
                            s.h_ref
                        ),
                    ));
                }
                let at = match s.t_eval {
                    Some(t) => problem
                        .with_horizon(t)
                        .map_err(|e| field_err("study.t_eval", e))?,
                    None => problem.clone(),
                };
                let reference = base.clone().with_theta(s.reference_theta);
                let mut reference = reference.with_rule(s.reference_rule);
                reference.h = s.h_ref;
                check_run(&at, &reference, "study.reference")?;
                for &h in &s.h_list {
                    let mut cfg = base.clone();
                    cfg.h = h;
                    check_run(&at, &cfg, "study.resolutions")?;
                }
                Ok(StudyPlan::Temporal(s))
            }
        }
    }
}

const CASE_ONLY: [&str; 5] = ["beta", "amplitude", "sigma", "alpha", "mode"];
const CUSTOM_ONLY: [&str; 7] = [
    "scale",
    "diffusivity",
    "source",
    "history",
    "tau",
    "t0",
    "kernel",
];

impl ProblemBlock {
    fn present(&self) -> Vec<&'static str> {
        let flags = [
            ("beta", self.beta.is_some()),
            ("amplitude", self.amplitude.is_some()),
            ("sigma", self.sigma.is_some()),
            ("alpha", self.alpha.is_some()),
            ("mode", self.mode.is_some()),
            ("scale", self.scale.is_some()),
            ("diffusivity", self.diffusivity.is_some()),
            ("source", self.source.is_some()),
            ("history", self.history.is_some()),
            ("tau", self.tau.is_some()),
            ("t0", self.t0.is_some()),
            ("kernel", self.kernel.is_some()),
        ];
        flags.iter().filter(|(_, p)| *p).map(|(k, _)| *k).collect()
    }

    fn allow(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.present().into_iter().find(|k| !allowed.contains(k)) {
            Some(k) => Err(field_err(
                &format!("problem.{k}"),
                format!("not used by case {:?}", self.case),
            )),
            None => Ok(()),
        }
    }

    fn build(&self) -> Result<ProblemSpec, ConfigError> {
        let case_err = |e: ebm_spectral::Error| field_err("problem", e);
        let mut allowed: Vec<&str> = Vec::new();
        let id = match self.case {
            CaseName::NonlinearDiffusion => {
                allowed.push("beta");
                CaseId::NonlinearDiffusion {
                    beta: self.beta.unwrap_or(1.0),
                }
            }
            CaseName::GaussianMemory => {
                allowed.extend(["amplitude", "sigma"]);
                let CaseId::GaussianMemory { amplitude, sigma } = CaseId::gaussian_default() else {
                    unreachable!()
                };
                CaseId::GaussianMemory {
                    amplitude: self.amplitude.unwrap_or(amplitude),
                    sigma: self.sigma.unwrap_or(sigma),
                }
            }
            CaseName::FractionalMemory => {
                allowed.push("alpha");
                CaseId::FractionalMemory {
                    alpha: self.alpha.unwrap_or(0.5),
                }
            }
            CaseName::ManufacturedLinear => {
                allowed.push("mode");
                CaseId::ManufacturedLinear {
                    mode: self.mode.unwrap_or(1),
                }
            }
            CaseName::Custom => {
                self.allow(&CUSTOM_ONLY)?;
                return self.build_custom();
            }
        };
        debug_assert!(allowed.iter().all(|k| CASE_ONLY.contains(k)));
        self.allow(&allowed)?;
        let mut p = canonical_case(id).map_err(case_err)?;
        if let Some(t0) = self.t0 {
            p = p.with_horizon(t0).map_err(|e| field_err("problem.t0", e))?;
        }
        Ok(p)
    }

    fn build_custom(&self) -> Result<ProblemSpec, ConfigError> {
        let scale = self.scale.unwrap_or_default();
        let tau = self.tau.unwrap_or(0.4);
        let t0 = self
            .t0
            .ok_or_else(|| field_err("problem.t0", "required for a custom problem"))?;
        let text = |field: &'static str, value: &Option<String>| {
            value.clone().ok_or_else(|| {
                field_err(&format!("problem.{field}"), "required for a custom problem")
            })
        };
        let parse = |field: &str, s: &str, vars: &[&str]| {
            Formula::parse(s, vars).map_err(|e| field_err(&format!("problem.{field}"), e))
        };
        let kernel = match &self.kernel {
            None => None,
            Some(k) => Some(build_kernel(k, tau)?),
        };
        let d_text = text("diffusivity", &self.diffusivity)?;
        let f_text = text("source", &self.source)?;
        let h_text = text("history", &self.history)?;
        let history = parse("history", &h_text, &["x", "s"])?;
        let history: ebm_spectral::problem::HistoryFn = Arc::new(move |x, s| history.eval(&[x, s]));
        match scale {
            Scale::Transformed => {
                let d = parse("diffusivity", &d_text, &["t", "u"])?;
                let diffusivity = if d.is_constant() {
                    Diffusivity::Constant(d.eval(&[]))
                } else {
                    Diffusivity::variable(Arc::new(move |t, u| d.eval(&[t, u])))
                };
                let f = parse("source", &f_text, &["x", "t", "u", "w"])?;
                ProblemSpec::new(
                    "custom",
                    diffusivity,
                    Arc::new(move |x, t, u, w| f.eval(&[x, t, u, w])),
                    kernel,
                    history,
                    tau,
                    t0,
                )
                .map_err(|e| field_err("problem", e))
            }
            Scale::Physical => {
                let d = parse("diffusivity", &d_text, &["T"])?;
                let g = parse("source", &f_text, &["x", "t", "T", "w"])?;
                let mut p = to_transformed(PhysicalModel {
                    diffusivity: Arc::new(move |temp| d.eval(&[temp])),
                    source: Arc::new(move |x, t, temp, w| g.eval(&[x, t, temp, w])),
                    initial: history,
                    kernel,
                    tau,
                    t0,
                })
                .map_err(|e| field_err("problem", e))?;
                p.label = "custom".into();
                Ok(p)
            }
        }
    }
}

fn build_kernel(k: &KernelBlock, tau: f64) -> Result<KernelSpec, ConfigError> {
    let err = |e| field_err("problem.kernel", e);
    match k {
        KernelBlock::Gaussian { amplitude, sigma } => {
            KernelSpec::gaussian(*amplitude, *sigma, tau).map_err(err)
        }
        KernelBlock::Fractional { alpha } => KernelSpec::fractional(*alpha, tau).map_err(err),
        KernelBlock::Constant { value } => KernelSpec::constant(*value, tau).map_err(err),
        KernelBlock::Expression { expr } => {
            let f =
                Formula::parse(expr, &["s"]).map_err(|e| field_err("problem.kernel.expr", e))?;
            KernelSpec::numeric(Arc::new(move |s| f.eval(&[s])), tau).map_err(err)
        }
    }
}
