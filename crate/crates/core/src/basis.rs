//! Even-Legendre orthonormal basis on (0, 1).
//!
//! The basis functions are `phi_i(x) = sqrt(4i + 1) L_{2i}(x)`, where `L_k` is
//! the Legendre polynomial of degree `k`. Because `L_{2i}` is even, the
//! functions are orthonormal on (0, 1), have vanishing slope at the equator
//! `x = 0`, and diagonalize the degenerate operator
//! `L v = -((1 - x^2) v')'` with eigenvalues `2i(2i + 1)`.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Basis cutoff `N` and quadrature size `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSpec {
    n: usize,
    q: usize,
}

impl BasisSpec {
    /// Basis with modes `0..=n` and the default quadrature size.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            q: default_quadrature_size(n),
        }
    }

    /// Basis with an explicit quadrature size; `q` must be at least `n + 1`
    /// so that products of two basis functions are integrated exactly.
    pub fn with_quadrature(n: usize, q: usize) -> Result<Self> {
        if q < n + 1 {
            return Err(Error::Config(format!(
                "quadrature size {q} cannot resolve basis cutoff {n} (need at least {})",
                n + 1
            )));
        }
        Ok(Self { n, q })
    }

    /// Largest mode index.
    pub fn cutoff(&self) -> usize {
        self.n
    }

    /// Number of modes, `N + 1`.
    pub fn modes(&self) -> usize {
        self.n + 1
    }

    pub fn quadrature_size(&self) -> usize {
        self.q
    }
}

/// `max(64, 2N + 16)`.
pub fn default_quadrature_size(n: usize) -> usize {
    (2 * n + 16).max(64)
}

/// Gauss-Legendre rule on (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Approximates the integral of `f` over (0, 1).
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Approximates the integral of `f` over `(a, b)` by an affine map.
    pub fn integrate_on<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let len = b - a;
        len * self.integrate(|x| f(a + len * x))
    }
}

/// Gauss-Legendre nodes and weights with `q` points, mapped to (0, 1).
///
/// Nodes are found by Newton iteration on `L_q` started from Chebyshev-type
/// guesses. Only the nonnegative half is iterated; the other half follows by
/// symmetry, so the rule is exactly symmetric about `1/2`.
pub fn gauss_rule(q: usize) -> QuadratureRule {
    assert!(q >= 1, "a quadrature rule needs at least one node");
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let qf = q as f64;
    for k in 0..q.div_ceil(2) {
        // k-th largest root on [-1, 1]
        let mut xi = (std::f64::consts::PI * (k as f64 + 0.75) / (qf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, d) = legendre_pair(q, xi);
            dp = d;
            let dx = p / d;
            xi -= dx;
            if dx.abs() <= NEWTON_TOL {
                break;
            }
        }
        let (_, d) = legendre_pair(q, xi);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - xi * xi) * dp * dp);
        // centre node of an odd rule is exactly zero
        if 2 * k + 1 == q {
            xi = 0.0;
        }
        nodes[q - 1 - k] = 0.5 * (1.0 + xi);
        nodes[k] = 0.5 * (1.0 - xi);
        weights[q - 1 - k] = 0.5 * w;
        weights[k] = 0.5 * w;
    }
    QuadratureRule { nodes, weights }
}

/// `(L_k(x), L_k'(x))` by the three-term recurrence.
fn legendre_pair(k: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    let mut d_prev = 0.0;
    let mut d = 1.0;
    if k == 0 {
        return (1.0, 0.0);
    }
    for m in 1..k {
        let mf = m as f64;
        let p_next = ((2.0 * mf + 1.0) * x * p - mf * p_prev) / (mf + 1.0);
        // L'_{m+1} = L'_{m-1} + (2m + 1) L_m
        let d_next = d_prev + (2.0 * mf + 1.0) * p;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d)
}

/// Values and slopes of `phi_0..=phi_n` at `x`, from a single recurrence sweep.
pub fn eval_all(n: usize, x: f64, values: &mut [f64], slopes: &mut [f64]) {
    debug_assert!(values.len() > n && slopes.len() > n);
    values[0] = 1.0;
    slopes[0] = 0.0;
    let mut p_prev = 1.0;
    let mut p = x;
    let mut d_prev = 0.0;
    let mut d = 1.0;
    // advance two degrees per mode; p, d hold L_{2i-1} on entry to mode i
    for i in 1..=n {
        let m = (2 * i - 1) as f64;
        let p_next = ((2.0 * m + 1.0) * x * p - m * p_prev) / (m + 1.0);
        let d_next = d_prev + (2.0 * m + 1.0) * p;
        let scale = ((4 * i + 1) as f64).sqrt();
        values[i] = scale * p_next;
        slopes[i] = scale * d_next;

        let m = m + 1.0;
        let p_odd = ((2.0 * m + 1.0) * x * p_next - m * p) / (m + 1.0);
        let d_odd = d + (2.0 * m + 1.0) * p_next;
        p_prev = p_next;
        p = p_odd;
        d_prev = d_next;
        d = d_odd;
    }
}

/// Selects a basis value or its first derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Value,
    First,
}

/// `phi_i(x)` or `phi_i'(x)`.
pub fn basis_eval(i: usize, x: f64, derivative: Derivative) -> f64 {
    let (p, d) = legendre_pair(2 * i, x);
    let scale = ((4 * i + 1) as f64).sqrt();
    match derivative {
        Derivative::Value => scale * p,
        Derivative::First => scale * d,
    }
}

/// Eigenvalue `2i(2i + 1)` of `-((1 - x^2) v')'` on `phi_i`.
pub fn eigenvalue(i: usize) -> f64 {
    let k = 2 * i as u64;
    (k * (k + 1)) as f64
}

/// Coefficients `y_0..=y_N` of `sum_i y_i phi_i`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectralCoeffs(Vec<f64>);

impl SpectralCoeffs {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self(coeffs)
    }

    pub fn zeros(modes: usize) -> Self {
        Self(vec![0.0; modes])
    }

    /// Unit vector `e_i` of length `modes`.
    pub fn unit(modes: usize, i: usize) -> Self {
        let mut c = Self::zeros(modes);
        c.0[i] = 1.0;
        c
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    /// L2(0, 1) norm of the represented function (Plancherel).
    pub fn l2_norm(&self) -> f64 {
        l2_norm(self)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|y| factor * y).collect())
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, factor: f64, other: &SpectralCoeffs) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
    }

    /// Value of the represented function at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        let n = self.0.len() - 1;
        let mut values = vec![0.0; n + 1];
        let mut slopes = vec![0.0; n + 1];
        eval_all(n, x, &mut values, &mut slopes);
        self.0.iter().zip(&values).map(|(y, v)| y * v).sum()
    }
}

impl Index<usize> for SpectralCoeffs {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for SpectralCoeffs {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<Vec<f64>> for SpectralCoeffs {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Euclidean norm of the coefficients.
pub fn l2_norm(c: &SpectralCoeffs) -> f64 {
    c.0.iter().map(|y| y * y).sum::<f64>().sqrt()
}

/// Pointwise values of `c` at `points`.
pub fn synthesize(c: &SpectralCoeffs, points: &[f64]) -> Vec<f64> {
    if c.is_empty() {
        return vec![0.0; points.len()];
    }
    let n = c.len() - 1;
    let mut values = vec![0.0; n + 1];
    let mut slopes = vec![0.0; n + 1];
    points
        .iter()
        .map(|&x| {
            eval_all(n, x, &mut values, &mut slopes);
            c.0.iter().zip(&values).map(|(y, v)| y * v).sum()
        })
        .collect()
}

/// Truncated orthogonal projection of `f` onto `phi_0..=phi_N`, by quadrature.
pub fn project<F: Fn(f64) -> f64>(
    f: F,
    basis: &BasisSpec,
    rule: &QuadratureRule,
) -> SpectralCoeffs {
    let n = basis.cutoff();
    let mut values = vec![0.0; n + 1];
    let mut slopes = vec![0.0; n + 1];
    let mut out = vec![0.0; n + 1];
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        eval_all(n, x, &mut values, &mut slopes);
        let fx = w * f(x);
        for (o, v) in out.iter_mut().zip(&values) {
            *o += fx * v;
        }
    }
    SpectralCoeffs(out)
}

/// Basis values and slopes tabulated at the Gauss nodes of a [`BasisSpec`].
///
/// Tables are stored node-major: entry `(q, i)` lives at `q * modes + i`.
#[derive(Debug, Clone)]
pub struct BasisTable {
    spec: BasisSpec,
    rule: QuadratureRule,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl BasisTable {
    pub fn new(spec: BasisSpec) -> Self {
        let rule = gauss_rule(spec.quadrature_size());
        let modes = spec.modes();
        let mut values = vec![0.0; rule.len() * modes];
        let mut slopes = vec![0.0; rule.len() * modes];
        for (q, &x) in rule.nodes().iter().enumerate() {
            let range = q * modes..(q + 1) * modes;
            eval_all(
                spec.cutoff(),
                x,
                &mut values[range.clone()],
                &mut slopes[range],
            );
        }
        Self {
            spec,
            rule,
            values,
            slopes,
        }
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn modes(&self) -> usize {
        self.spec.modes()
    }

    /// `phi_i` at node `q`.
    #[inline]
    pub fn value(&self, q: usize, i: usize) -> f64 {
        self.values[q * self.modes() + i]
    }

    /// `phi_i'` at node `q`.
    #[inline]
    pub fn slope(&self, q: usize, i: usize) -> f64 {
        self.slopes[q * self.modes() + i]
    }

    pub fn node_values(&self, q: usize) -> &[f64] {
        let m = self.modes();
        &self.values[q * m..(q + 1) * m]
    }

    /// Values of `c` at every node.
    pub fn synthesize(&self, c: &SpectralCoeffs) -> Vec<f64> {
        (0..self.rule.len())
            .map(|q| {
                self.node_values(q)
                    .iter()
                    .zip(c.iter())
                    .map(|(v, y)| v * y)
                    .sum()
            })
            .collect()
    }

    /// Projection of nodal samples `samples[q] = f(x_q)`.
    pub fn project_samples(&self, samples: &[f64]) -> SpectralCoeffs {
        let modes = self.modes();
        let mut out = vec![0.0; modes];
        for (q, (&w, &fx)) in self.rule.weights().iter().zip(samples).enumerate() {
            let wf = w * fx;
            for (o, v) in out.iter_mut().zip(self.node_values(q)) {
                *o += wf * v;
            }
        }
        SpectralCoeffs(out)
    }

    /// Projection of a function of `x`.
    pub fn project<F: Fn(f64) -> f64>(&self, f: F) -> SpectralCoeffs {
        let samples: Vec<f64> = self.rule.nodes().iter().map(|&x| f(x)).collect();
        self.project_samples(&samples)
    }
}
