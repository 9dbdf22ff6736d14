//! Memory kernels and product-integration weights for the trailing-window
//! operator `J u(t) = int_0^tau K(s) u(t - s) ds`.
//!
//! The unknown is interpolated on the lag grid `s_i = i h` (piecewise constant
//! for the rectangle rule, piecewise linear for the trapezoid rule) while the
//! kernel is integrated exactly on each cell. Weakly singular kernels therefore
//! never meet a pointwise quadrature at `s = 0`.

use std::fmt;
use std::sync::Arc;

use libm::{erf, erfc, tgamma as gamma};
use rayon::prelude::*;

use crate::basis::{gauss_rule, QuadratureRule, SpectralCoeffs};
use crate::error::{Error, Result};

/// Scalar kernel supplied as a closure.
pub type KernelFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Memory kernel on `(0, tau)`.
#[derive(Clone)]
pub enum KernelSpec {
    /// `A exp(-(tau - 2s)^2 / (8 sigma^2))`, a bump centred at `tau / 2`.
    Gaussian {
        amplitude: f64,
        sigma: f64,
        tau: f64,
    },
    /// `s^(alpha - 1) / Gamma(alpha)`, the Riemann-Liouville kernel.
    Fractional {
        alpha: f64,
        tau: f64,
    },
    Constant {
        value: f64,
        tau: f64,
    },
    /// Any integrable kernel; cell integrals use adaptive quadrature.
    Numeric {
        kernel: KernelFn,
        tau: f64,
    },
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussian {
                amplitude,
                sigma,
                tau,
            } => f
                .debug_struct("Gaussian")
                .field("amplitude", amplitude)
                .field("sigma", sigma)
                .field("tau", tau)
                .finish(),
            Self::Fractional { alpha, tau } => f
                .debug_struct("Fractional")
                .field("alpha", alpha)
                .field("tau", tau)
                .finish(),
            Self::Constant { value, tau } => f
                .debug_struct("Constant")
                .field("value", value)
                .field("tau", tau)
                .finish(),
            Self::Numeric { tau, .. } => f.debug_struct("Numeric").field("tau", tau).finish(),
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "memory length must be positive, got {tau}"
        )))
    }
}

impl KernelSpec {
    pub fn gaussian(amplitude: f64, sigma: f64, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        if !(amplitude >= 0.0) || !(sigma > 0.0) {
            return Err(Error::Domain(format!(
                "Gaussian kernel needs amplitude >= 0 and sigma > 0, got A={amplitude}, sigma={sigma}"
            )));
        }
        Ok(Self::Gaussian {
            amplitude,
            sigma,
            tau,
        })
    }

    /// Gaussian kernel with `A = 1` and `sigma = tau / 4`.
    pub fn gaussian_default(tau: f64) -> Result<Self> {
        Self::gaussian(1.0, tau / 4.0, tau)
    }

    pub fn fractional(alpha: f64, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        if !(alpha > 0.0) {
            return Err(Error::Domain(format!(
                "fractional order must be positive, got {alpha}"
            )));
        }
        Ok(Self::Fractional { alpha, tau })
    }

    pub fn constant(value: f64, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self::Constant { value, tau })
    }

    pub fn numeric(kernel: KernelFn, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self::Numeric { kernel, tau })
    }

    /// Memory length.
    pub fn tau(&self) -> f64 {
        match *self {
            Self::Gaussian { tau, .. }
            | Self::Fractional { tau, .. }
            | Self::Constant { tau, .. }
            | Self::Numeric { tau, .. } => tau,
        }
    }

    /// Kernel value at `s` in `(0, tau]`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        let tau = self.tau();
        if s > tau * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "lag {s} exceeds memory length {tau}"
            )));
        }
        if s < 0.0 {
            return Err(Error::Domain(format!("negative lag {s}")));
        }
        Ok(match self {
            Self::Gaussian {
                amplitude, sigma, ..
            } => {
                let z = tau - 2.0 * s;
                amplitude * (-z * z / (8.0 * sigma * sigma)).exp()
            }
            Self::Fractional { alpha, .. } => {
                if s == 0.0 {
                    if *alpha < 1.0 {
                        return Err(Error::Domain(format!(
                            "fractional kernel with alpha={alpha} is singular at s=0"
                        )));
                    }
                    if *alpha > 1.0 {
                        return Ok(0.0);
                    }
                }
                s.powf(alpha - 1.0) / gamma(*alpha)
            }
            Self::Constant { value, .. } => *value,
            Self::Numeric { kernel, .. } => kernel(s),
        })
    }

    fn check_interval(&self, a: f64, b: f64) -> Result<()> {
        let tau = self.tau();
        if a < 0.0 || b < a || b > tau * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "interval [{a}, {b}] is not inside [0, {tau}]"
            )));
        }
        Ok(())
    }

    /// `int_a^b K(s) ds` for `0 <= a <= b <= tau`.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        self.check_interval(a, b)?;
        if a == b {
            return Ok(0.0);
        }
        Ok(match self {
            Self::Gaussian {
                amplitude,
                sigma,
                tau,
            } => {
                let c = 0.5 * tau;
                let r = std::f64::consts::SQRT_2 * sigma;
                amplitude
                    * sigma
                    * (0.5 * std::f64::consts::PI).sqrt()
                    * erf_difference((a - c) / r, (b - c) / r)
            }
            Self::Fractional { alpha, .. } => power_difference(a, b, *alpha) / gamma(alpha + 1.0),
            Self::Constant { value, .. } => value * (b - a),
            Self::Numeric { kernel, .. } => integrate_kernel(kernel.as_ref(), a, b)?,
        })
    }

    /// Hat-weighted cell integrals on `[a, b]`:
    /// `(int K (b - s) / (b - a) ds, int K (s - a) / (b - a) ds)`.
    pub fn hat_moments(&self, a: f64, b: f64) -> Result<(f64, f64)> {
        self.check_interval(a, b)?;
        let h = b - a;
        if h == 0.0 {
            return Ok((0.0, 0.0));
        }
        let (total, rising) = match self {
            Self::Gaussian {
                amplitude,
                sigma,
                tau,
            } => {
                let c = 0.5 * tau;
                let total = self.integral(a, b)?;
                let s2 = 2.0 * sigma * sigma;
                // int K (s - c) ds in closed form
                let centred = amplitude
                    * sigma
                    * sigma
                    * ((-(a - c) * (a - c) / s2).exp() - (-(b - c) * (b - c) / s2).exp());
                (total, (centred + (c - a) * total) / h)
            }
            Self::Fractional { alpha, .. } => {
                let total = power_difference(a, b, *alpha) / gamma(alpha + 1.0);
                let rising = if a == 0.0 {
                    alpha * b.powf(*alpha) / gamma(alpha + 2.0)
                } else {
                    let g = gamma(*alpha);
                    (power_difference(a, b, alpha + 1.0) / (alpha + 1.0)
                        - a * power_difference(a, b, *alpha) / alpha)
                        / (h * g)
                };
                (total, rising)
            }
            Self::Constant { value, .. } => (value * h, 0.5 * value * h),
            Self::Numeric { kernel, .. } => {
                let total = integrate_kernel(kernel.as_ref(), a, b)?;
                let rising = integrate_kernel(&|s: f64| kernel(s) * (s - a) / h, a, b)?;
                (total, rising)
            }
        };
        Ok((total - rising, rising))
    }
}

/// `erf(y) - erf(x)` for `x <= y`, using complementary values in the tails.
fn erf_difference(x: f64, y: f64) -> f64 {
    if x >= 0.0 {
        erfc(x) - erfc(y)
    } else if y <= 0.0 {
        erfc(-y) - erfc(-x)
    } else {
        erf(y) - erf(x)
    }
}

/// `b^p - a^p` without cancellation when `a` and `b` are close.
fn power_difference(a: f64, b: f64, p: f64) -> f64 {
    if a == 0.0 {
        return b.powf(p);
    }
    a.powf(p) * (p * ((b - a) / a).ln_1p()).exp_m1()
}

/// `K(s)` at `s`, see [`KernelSpec::eval`].
pub fn kernel_eval(k: &KernelSpec, s: f64) -> Result<f64> {
    k.eval(s)
}

/// `int_a^b K(s) ds`, see [`KernelSpec::integral`].
pub fn kernel_integral(k: &KernelSpec, a: f64, b: f64) -> Result<f64> {
    k.integral(a, b)
}

const ADAPTIVE_REL_TOL: f64 = 1e-12;
const ADAPTIVE_ACCEPT_TOL: f64 = 1e-10;
const ADAPTIVE_MAX_DEPTH: usize = 40;
const ADAPTIVE_NODES: usize = 15;

/// Adaptive Gauss-Legendre integration by interval bisection.
///
/// An interval starting at `s = 0` is first mapped by `s = b v^2`, which
/// removes integrable algebraic singularities of order up to `s^(-1/2)` at the
/// origin.
fn integrate_kernel(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    let rule = gauss_rule(ADAPTIVE_NODES);
    if a == 0.0 {
        let g = |v: f64| 2.0 * b * v * f(b * v * v);
        adaptive(&rule, &g, 0.0, 1.0)
    } else {
        adaptive(&rule, f, a, b)
    }
}

fn adaptive(rule: &QuadratureRule, f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    let whole = rule.integrate_on(a, b, f);
    let mut estimate = 0.0;
    let value = bisect(rule, f, a, b, whole, 0, &mut estimate);
    if !value.is_finite() {
        return Err(Error::Tolerance {
            a,
            b,
            estimate: f64::INFINITY,
        });
    }
    if estimate > ADAPTIVE_ACCEPT_TOL * value.abs().max(f64::MIN_POSITIVE) && estimate > 1e-300 {
        return Err(Error::Tolerance { a, b, estimate });
    }
    Ok(value)
}

fn bisect(
    rule: &QuadratureRule,
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    depth: usize,
    estimate: &mut f64,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate_on(a, mid, f);
    let right = rule.integrate_on(mid, b, f);
    let halves = left + right;
    let diff = (halves - whole).abs();
    if diff <= ADAPTIVE_REL_TOL * halves.abs() || diff <= 1e-300 {
        return halves;
    }
    if depth >= ADAPTIVE_MAX_DEPTH {
        *estimate += diff;
        return halves;
    }
    bisect(rule, f, a, mid, left, depth + 1, estimate)
        + bisect(rule, f, mid, b, right, depth + 1, estimate)
}

/// Lag-grid interpolation used by the memory quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryRule {
    /// Piecewise-constant interpolation, first order.
    Rectangle,
    /// Piecewise-linear interpolation, second order.
    Trapezoid,
}

/// Weights `w_0..=w_M` with `J_h U^n = sum_i w_i U^{n-i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagWeights {
    weights: Vec<f64>,
    h: f64,
    rule: MemoryRule,
}

impl LagWeights {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// Number of lags `M = tau / h`.
    pub fn lags(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn rule(&self) -> MemoryRule {
        self.rule
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `M` with `M h = tau`, or a grid error when `h` does not divide `tau`.
pub fn lag_count(tau: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) {
        return Err(Error::Grid(format!("time step must be positive, got {h}")));
    }
    let ratio = tau / h;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-9 {
        return Err(Error::Grid(format!(
            "memory length {tau} is not an integer multiple of the step {h}"
        )));
    }
    Ok(m as usize)
}

/// Rectangle product-integration weights, `w_M = 0`.
pub fn rectangle_weights(k: &KernelSpec, h: f64) -> Result<LagWeights> {
    let m = lag_count(k.tau(), h)?;
    let mut weights = (0..m)
        .into_par_iter()
        .map(|i| k.integral(i as f64 * h, cell_end(k, i, m, h)))
        .collect::<Result<Vec<f64>>>()?;
    weights.push(0.0);
    Ok(LagWeights {
        weights,
        h,
        rule: MemoryRule::Rectangle,
    })
}

/// Trapezoid product-integration weights (hat functions on the lag grid).
pub fn trapezoid_weights(k: &KernelSpec, h: f64) -> Result<LagWeights> {
    let m = lag_count(k.tau(), h)?;
    let cells = (0..m)
        .into_par_iter()
        .map(|i| k.hat_moments(i as f64 * h, cell_end(k, i, m, h)))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let mut weights = vec![0.0; m + 1];
    for (i, (falling, rising)) in cells.into_iter().enumerate() {
        weights[i] += falling;
        weights[i + 1] += rising;
    }
    Ok(LagWeights {
        weights,
        h,
        rule: MemoryRule::Trapezoid,
    })
}

/// Weights for either rule.
pub fn lag_weights(k: &KernelSpec, h: f64, rule: MemoryRule) -> Result<LagWeights> {
    match rule {
        MemoryRule::Rectangle => rectangle_weights(k, h),
        MemoryRule::Trapezoid => trapezoid_weights(k, h),
    }
}

// last cell ends exactly at tau
fn cell_end(k: &KernelSpec, i: usize, m: usize, h: f64) -> f64 {
    if i + 1 == m {
        k.tau()
    } else {
        (i + 1) as f64 * h
    }
}

/// `sum_i w_i hist_i`, coefficientwise; `hist[i]` is the level at lag `i`.
pub fn apply_memory(w: &LagWeights, hist: &[SpectralCoeffs]) -> Result<SpectralCoeffs> {
    if hist.len() != w.weights.len() {
        return Err(Error::Shape {
            expected: w.weights.len(),
            actual: hist.len(),
        });
    }
    let modes = hist[0].len();
    let mut out = SpectralCoeffs::zeros(modes);
    for (&wi, level) in w.weights.iter().zip(hist) {
        if level.len() != modes {
            return Err(Error::Shape {
                expected: modes,
                actual: level.len(),
            });
        }
        out.add_scaled(wi, level);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sqrt_pi() -> f64 {
        std::f64::consts::PI.sqrt()
    }

    #[test]
    fn kernel_values() {
        let g = KernelSpec::gaussian(1.0, 0.1, 0.4).unwrap();
        assert_abs_diff_eq!(g.eval(0.2).unwrap(), 1.0, epsilon = 1e-15);
        let one = KernelSpec::fractional(1.0, 0.4).unwrap();
        assert_abs_diff_eq!(one.eval(0.3).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(one.eval(0.0).unwrap(), 1.0, epsilon = 1e-15);
        let half = KernelSpec::fractional(0.5, 0.4).unwrap();
        assert_abs_diff_eq!(half.eval(0.25).unwrap(), 2.0 / sqrt_pi(), epsilon = 1e-14);
        assert_abs_diff_eq!(
            2.0 / sqrt_pi(),
            std::f64::consts::FRAC_2_SQRT_PI,
            epsilon = 1e-15
        );
    }

    #[test]
    fn kernel_domain_errors() {
        let half = KernelSpec::fractional(0.5, 0.4).unwrap();
        assert!(matches!(half.eval(0.0), Err(Error::Domain(_))));
        assert!(matches!(half.eval(0.5), Err(Error::Domain(_))));
        assert!(half.integral(0.1, 0.5).is_err());
        assert!(KernelSpec::gaussian(1.0, 0.0, 0.4).is_err());
        assert!(KernelSpec::fractional(0.0, 0.4).is_err());
        assert!(KernelSpec::constant(1.0, 0.0).is_err());
    }

    #[test]
    fn closed_form_integrals() {
        let c = KernelSpec::constant(1.0, 0.4).unwrap();
        assert_abs_diff_eq!(c.integral(0.0, 0.4).unwrap(), 0.4, epsilon = 1e-16);

        let half = KernelSpec::fractional(0.5, 0.4).unwrap();
        let expect = 2.0 * 0.4f64.sqrt() / sqrt_pi();
        assert_abs_diff_eq!(half.integral(0.0, 0.4).unwrap(), expect, epsilon = 1e-14);
        assert_abs_diff_eq!(expect, 0.7136496465, epsilon = 1e-10);

        let g = KernelSpec::gaussian(1.0, 0.1, 0.4).unwrap();
        let z = 0.4 / (2.0 * 2f64.sqrt() * 0.1);
        let expect = 0.1 * (std::f64::consts::PI / 2.0).sqrt() * (erf(z) - erf(-z));
        assert_abs_diff_eq!(g.integral(0.0, 0.4).unwrap(), expect, epsilon = 1e-15);
        assert_abs_diff_eq!(expect, 0.2392576027, epsilon = 1e-10);
    }

    #[test]
    fn numeric_integration_matches_closed_forms() {
        let g = KernelSpec::gaussian(1.3, 0.07, 0.4).unwrap();
        let kernel: KernelFn = {
            let g = g.clone();
            Arc::new(move |s| g.eval(s).unwrap())
        };
        let n = KernelSpec::numeric(kernel, 0.4).unwrap();
        for (a, b) in [(0.0, 0.4), (0.05, 0.1), (0.3, 0.4)] {
            let exact = g.integral(a, b).unwrap();
            assert_abs_diff_eq!(
                n.integral(a, b).unwrap(),
                exact,
                epsilon = 1e-12 * exact.max(1.0)
            );
            let (lf, lr) = g.hat_moments(a, b).unwrap();
            let (nf, nr) = n.hat_moments(a, b).unwrap();
            assert_abs_diff_eq!(lf, nf, epsilon = 1e-12);
            assert_abs_diff_eq!(lr, nr, epsilon = 1e-12);
        }

        // weakly singular kernel through the numeric path
        let alpha = 0.5;
        let frac = KernelSpec::fractional(alpha, 0.4).unwrap();
        let n = KernelSpec::numeric(
            Arc::new(move |s: f64| s.powf(alpha - 1.0) / gamma(alpha)),
            0.4,
        )
        .unwrap();
        assert_abs_diff_eq!(
            n.integral(0.0, 0.1).unwrap(),
            frac.integral(0.0, 0.1).unwrap(),
            epsilon = 1e-11
        );
        let (nf, nr) = n.hat_moments(0.0, 0.1).unwrap();
        let (ff, fr) = frac.hat_moments(0.0, 0.1).unwrap();
        assert_abs_diff_eq!(nf, ff, epsilon = 1e-11);
        assert_abs_diff_eq!(nr, fr, epsilon = 1e-11);
    }

    #[test]
    fn fractional_hat_moments_against_quadrature() {
        // smooth cells away from the origin: high-order Gauss is an exact oracle
        let rule = gauss_rule(40);
        for alpha in [0.3, 0.5, 1.0, 1.7] {
            let k = KernelSpec::fractional(alpha, 0.4).unwrap();
            for (a, b) in [(0.01, 0.02), (0.2, 0.3), (0.398, 0.4)] {
                let h = b - a;
                let f = |s: f64| s.powf(alpha - 1.0) / gamma(alpha);
                let fall = rule.integrate_on(a, b, |s| f(s) * (b - s) / h);
                let rise = rule.integrate_on(a, b, |s| f(s) * (s - a) / h);
                let (kf, kr) = k.hat_moments(a, b).unwrap();
                assert!(
                    (kf - fall).abs() <= 1e-11 * fall.abs(),
                    "alpha={alpha} [{a},{b}]"
                );
                assert!(
                    (kr - rise).abs() <= 1e-11 * rise.abs(),
                    "alpha={alpha} [{a},{b}]"
                );
            }
        }
    }

    #[test]
    fn rectangle_examples() {
        let c = KernelSpec::constant(1.0, 0.4).unwrap();
        let w = rectangle_weights(&c, 0.1).unwrap();
        assert_eq!(w.lags(), 4);
        for (got, want) in w.weights().iter().zip([0.1, 0.1, 0.1, 0.1, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }

        let k = KernelSpec::fractional(0.5, 0.4).unwrap();
        let w = rectangle_weights(&k, 0.2).unwrap();
        let g15 = gamma(1.5);
        assert_abs_diff_eq!(w.weights()[0], 0.2f64.sqrt() / g15, epsilon = 1e-15);
        assert_abs_diff_eq!(
            w.weights()[1],
            (0.4f64.sqrt() - 0.2f64.sqrt()) / g15,
            epsilon = 1e-15
        );
        assert_eq!(w.weights()[2], 0.0);
    }

    #[test]
    fn trapezoid_examples() {
        let c = KernelSpec::constant(1.0, 0.4).unwrap();
        let w = trapezoid_weights(&c, 0.1).unwrap();
        for (got, want) in w.weights().iter().zip([0.05, 0.1, 0.1, 0.1, 0.05]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(w.sum(), 0.4, epsilon = 1e-15);

        let one = KernelSpec::fractional(1.0, 0.4).unwrap();
        let wf = trapezoid_weights(&one, 0.1).unwrap();
        for (a, b) in wf.weights().iter().zip(w.weights()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn grid_must_resolve_tau() {
        let c = KernelSpec::constant(1.0, 0.4).unwrap();
        assert!(matches!(rectangle_weights(&c, 0.3), Err(Error::Grid(_))));
        assert!(matches!(trapezoid_weights(&c, 0.15), Err(Error::Grid(_))));
        assert!(matches!(trapezoid_weights(&c, 0.0), Err(Error::Grid(_))));
        assert_eq!(lag_count(0.4, 0.002).unwrap(), 200);
        assert_eq!(lag_count(0.4, 0.00625).unwrap(), 64);
    }

    #[test]
    fn weight_sums_and_positivity() {
        let kernels = [
            KernelSpec::constant(2.0, 0.4).unwrap(),
            KernelSpec::gaussian_default(0.4).unwrap(),
            KernelSpec::fractional(0.5, 0.4).unwrap(),
            KernelSpec::fractional(1.5, 0.4).unwrap(),
        ];
        for k in &kernels {
            let total = k.integral(0.0, k.tau()).unwrap();
            for h in [0.1, 0.02, 0.002] {
                for rule in [MemoryRule::Rectangle, MemoryRule::Trapezoid] {
                    let w = lag_weights(k, h, rule).unwrap();
                    assert_abs_diff_eq!(w.sum(), total, epsilon = 1e-10);
                    assert!(w.weights().iter().all(|&x| x >= 0.0));
                }
            }
        }
    }

    #[test]
    fn trapezoid_exact_on_linear_histories() {
        // y(t) = 2 - 3t sampled at t - s_i; exact value by closed-form moments
        let t = 1.0;
        let y = |t: f64| 2.0 - 3.0 * t;
        let fine = gauss_rule(60);
        for k in [
            KernelSpec::gaussian(0.7, 0.05, 0.4).unwrap(),
            KernelSpec::constant(1.0, 0.4).unwrap(),
        ] {
            let w = trapezoid_weights(&k, 0.05).unwrap();
            let approx: f64 = w
                .weights()
                .iter()
                .enumerate()
                .map(|(i, wi)| wi * y(t - i as f64 * 0.05))
                .sum();
            let exact = fine.integrate_on(0.0, 0.4, |s| k.eval(s).unwrap() * y(t - s));
            assert_abs_diff_eq!(approx, exact, epsilon = 1e-10);
        }
        // power kernels: oracle from exact power moments
        for alpha in [0.5, 1.5] {
            let k = KernelSpec::fractional(alpha, 0.4).unwrap();
            let w = trapezoid_weights(&k, 0.05).unwrap();
            let approx: f64 = w
                .weights()
                .iter()
                .enumerate()
                .map(|(i, wi)| wi * y(t - i as f64 * 0.05))
                .sum();
            // int_0^tau s^(a-1)/G(a) (2 - 3(t - s)) ds
            let m0 = 0.4f64.powf(alpha) / gamma(alpha + 1.0);
            let m1 = 0.4f64.powf(alpha + 1.0) / ((alpha + 1.0) * gamma(alpha));
            let exact = (2.0 - 3.0 * t) * m0 + 3.0 * m1;
            assert_abs_diff_eq!(approx, exact, epsilon = 1e-12);
        }
    }

    fn consistency_error(rule: MemoryRule, h: f64) -> f64 {
        // y(t) = t^2, K = 1, t = 1: int_0^tau (1 - s)^2 ds
        let tau = 0.4;
        let k = KernelSpec::constant(1.0, tau).unwrap();
        let w = lag_weights(&k, h, rule).unwrap();
        let approx: f64 = w
            .weights()
            .iter()
            .enumerate()
            .map(|(i, wi)| wi * (1.0 - i as f64 * h).powi(2))
            .sum();
        let exact = (1.0 - (1.0f64 - tau).powi(3)) / 3.0;
        (approx - exact).abs()
    }

    #[test]
    fn quadrature_orders() {
        for (rule, order) in [(MemoryRule::Rectangle, 1.0), (MemoryRule::Trapezoid, 2.0)] {
            let hs = [0.1, 0.05, 0.025];
            let e: Vec<f64> = hs.iter().map(|&h| consistency_error(rule, h)).collect();
            for k in 1..e.len() {
                let eoc = (e[k - 1] / e[k]).ln() / (hs[k - 1] / hs[k]).ln();
                assert!((eoc - order).abs() <= 0.2, "{rule:?}: eoc={eoc}");
            }
        }
    }

    #[test]
    fn memory_application() {
        let c = KernelSpec::constant(1.0, 0.4).unwrap();
        let w = trapezoid_weights(&c, 0.1).unwrap();
        let level = SpectralCoeffs::new(vec![1.0, -2.0, 0.5]);
        let hist = vec![level.clone(); 5];
        let j = apply_memory(&w, &hist).unwrap();
        for (a, b) in j.iter().zip(level.iter()) {
            assert_abs_diff_eq!(*a, 0.4 * b, epsilon = 1e-15);
        }

        let w = rectangle_weights(&c, 0.1).unwrap();
        let hist: Vec<SpectralCoeffs> = (0..5)
            .map(|i| SpectralCoeffs::new(vec![i as f64, 1.0]))
            .collect();
        let j = apply_memory(&w, &hist).unwrap();
        assert_abs_diff_eq!(j[0], 0.1 * (0.0 + 1.0 + 2.0 + 3.0), epsilon = 1e-15);
        assert_abs_diff_eq!(j[1], 0.4, epsilon = 1e-15);

        let zero = vec![SpectralCoeffs::zeros(3); 5];
        assert_eq!(apply_memory(&w, &zero).unwrap(), SpectralCoeffs::zeros(3));

        assert!(matches!(
            apply_memory(&w, &hist[..4]),
            Err(Error::Shape {
                expected: 5,
                actual: 4
            })
        ));
    }
}
