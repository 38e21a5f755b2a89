//! Jackson q-calculus differentiation kernel.
//!
//! The q-derivative of `f` at `x` is the secant slope between `x` and `q·x`:
//!
//! ```text
//! D_q f(x) = (f(x) − f(q·x)) / ((1 − q)·x)
//! ```
//!
//! It is exact on affine maps, maps `x^k` to `[k]_q · x^(k−1)` and tends to
//! the classical derivative as `q → 1`. When `|(1 − q)·x|` drops to the
//! guard threshold `epsilon_q` (in particular at `x = 0`) every operator here
//! switches to a central finite difference.

use crate::denselin::{expect_len, DenseMatrix};
use crate::error::{check_param, Error, Result};

/// Default guard on the q-difference denominator `|(1 − q)·x|`.
pub const DEFAULT_EPSILON_Q: f64 = 1e-10;

/// Step used by the central-difference fallback.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FallbackStep {
    /// `h = max(1e−8, 1e−8·|x|)`.
    #[default]
    Relative,
    /// A fixed positive step.
    Fixed(f64),
}

impl FallbackStep {
    pub fn at(&self, x: f64) -> f64 {
        match *self {
            FallbackStep::Relative => (1e-8 * x.abs()).max(1e-8),
            FallbackStep::Fixed(h) => h,
        }
    }

    fn validate(&self) -> Result<()> {
        if let FallbackStep::Fixed(h) = *self {
            check_param(
                h > 0.0 && h.is_finite(),
                "fallback_step",
                "fallback_step > 0",
                h,
            )?;
        }
        Ok(())
    }
}

/// Per-coordinate q parameters, each strictly inside `(0, 1)`, together with
/// the degenerate-denominator threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct QVector {
    q: Vec<f64>,
    epsilon_q: f64,
}

impl QVector {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        Self::with_epsilon(q, DEFAULT_EPSILON_Q)
    }

    pub fn with_epsilon(q: Vec<f64>, epsilon_q: f64) -> Result<Self> {
        for &qi in &q {
            check_q(qi)?;
        }
        check_param(
            epsilon_q > 0.0 && epsilon_q.is_finite(),
            "epsilon_q",
            "epsilon_q > 0",
            epsilon_q,
        )?;
        Ok(Self { q, epsilon_q })
    }

    /// The same `q` for all `n` coordinates.
    pub fn uniform(n: usize, q: f64) -> Result<Self> {
        Self::new(vec![q; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn epsilon_q(&self) -> f64 {
        self.epsilon_q
    }
}

fn check_q(q: f64) -> Result<()> {
    check_param(q > 0.0 && q < 1.0, "q", "0 < q < 1", q)
}

/// A real-valued function of `arity` variables.
pub trait ScalarField {
    fn arity(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
}

/// Closure-backed [`ScalarField`].
pub struct FnScalarField<F> {
    arity: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64> FnScalarField<F> {
    pub fn new(arity: usize, f: F) -> Self {
        Self { arity, f }
    }
}

impl<F: Fn(&[f64]) -> f64> ScalarField for FnScalarField<F> {
    fn arity(&self) -> usize {
        self.arity
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// A map from `num_params()` parameters to `num_residuals()` residuals.
///
/// Implementations must return exactly `num_residuals()` values and should
/// have `num_residuals() >= num_params()`.
pub trait ResidualMap {
    fn num_params(&self) -> usize;
    fn num_residuals(&self) -> usize;
    fn residuals(&self, x: &[f64]) -> Vec<f64>;

    /// Closed-form Jacobian, used only for verification.
    fn analytic_jacobian(&self, _x: &[f64]) -> Option<DenseMatrix> {
        None
    }
}

type EvalFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type JacFn = dyn Fn(&[f64]) -> DenseMatrix + Send + Sync;

/// Closure-backed [`ResidualMap`].
pub struct FnResidualMap {
    n: usize,
    m: usize,
    eval: Box<EvalFn>,
    jacobian: Option<Box<JacFn>>,
}

impl FnResidualMap {
    pub fn new(
        n: usize,
        m: usize,
        eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::DimensionMismatch {
                context: "parameter count",
                expected: 1,
                found: 0,
            });
        }
        if m < n {
            return Err(Error::DimensionMismatch {
                context: "residual count (m >= n)",
                expected: n,
                found: m,
            });
        }
        Ok(Self {
            n,
            m,
            eval: Box::new(eval),
            jacobian: None,
        })
    }

    pub fn with_jacobian(
        mut self,
        jacobian: impl Fn(&[f64]) -> DenseMatrix + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Box::new(jacobian));
        self
    }
}

impl ResidualMap for FnResidualMap {
    fn num_params(&self) -> usize {
        self.n
    }

    fn num_residuals(&self) -> usize {
        self.m
    }

    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }

    fn analytic_jacobian(&self, x: &[f64]) -> Option<DenseMatrix> {
        self.jacobian.as_ref().map(|j| j(x))
    }
}

impl std::fmt::Debug for FnResidualMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnResidualMap")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

/// Evaluates the residual map, checking output length and finiteness.
pub fn eval_residuals<F: ResidualMap + ?Sized>(map: &F, x: &[f64]) -> Result<Vec<f64>> {
    expect_len("parameter vector", map.num_params(), x.len())?;
    let r = map.residuals(x);
    expect_len("residual vector", map.num_residuals(), r.len())?;
    if let Some(row) = r.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteEvaluation {
            point: x.to_vec(),
            row: Some(row),
            column: None,
        });
    }
    Ok(r)
}

/// Returns the scaled coordinate `q·x` and the denominator `x − q·x` when the
/// q-difference branch applies.
///
/// The denominator is taken from the two points actually evaluated, which is
/// `(1 − q)·x` up to the rounding of `q·x`.
fn q_branch(x: f64, q: f64, epsilon_q: f64) -> Option<(f64, f64)> {
    let scaled = q * x;
    let denom = x - scaled;
    (denom.abs() > epsilon_q).then_some((scaled, denom))
}

fn finite_at(value: f64, point: impl FnOnce() -> Vec<f64>, column: Option<usize>) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteEvaluation {
            point: point(),
            row: None,
            column,
        })
    }
}

/// Jackson q-derivative of a scalar function, guarded with [`DEFAULT_EPSILON_Q`].
pub fn q_derivative<F: Fn(f64) -> f64>(
    f: F,
    x: f64,
    q: f64,
    fallback: FallbackStep,
) -> Result<f64> {
    q_derivative_guarded(f, x, q, DEFAULT_EPSILON_Q, fallback)
}

/// [`q_derivative`] with an explicit denominator threshold.
pub fn q_derivative_guarded<F: Fn(f64) -> f64>(
    f: F,
    x: f64,
    q: f64,
    epsilon_q: f64,
    fallback: FallbackStep,
) -> Result<f64> {
    check_q(q)?;
    fallback.validate()?;
    if !x.is_finite() {
        return Err(Error::NonFiniteInput("evaluation point"));
    }
    match q_branch(x, q, epsilon_q) {
        Some((xs, denom)) => {
            let fx = finite_at(f(x), || vec![x], None)?;
            let fs = finite_at(f(xs), || vec![xs], None)?;
            Ok((fx - fs) / denom)
        }
        None => {
            let h = fallback.at(x);
            let fp = finite_at(f(x + h), || vec![x + h], None)?;
            let fm = finite_at(f(x - h), || vec![x - h], None)?;
            Ok((fp - fm) / (2.0 * h))
        }
    }
}

/// q-partial derivative of `f` with respect to coordinate `i` (zero-based),
/// using `q[i]`.
pub fn q_partial<F: ScalarField + ?Sized>(
    f: &F,
    x: &[f64],
    i: usize,
    q: &QVector,
    fallback: FallbackStep,
) -> Result<f64> {
    expect_len("point", f.arity(), x.len())?;
    expect_len("q vector", f.arity(), q.len())?;
    if i >= x.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: x.len(),
        });
    }
    fallback.validate()?;
    let mut probe = x.to_vec();
    let eval = |p: &[f64]| finite_at(f.eval(p), || p.to_vec(), Some(i));
    match q_branch(x[i], q.q[i], q.epsilon_q) {
        Some((xs, denom)) => {
            let base = eval(x)?;
            probe[i] = xs;
            Ok((base - eval(&probe)?) / denom)
        }
        None => {
            let h = fallback.at(x[i]);
            probe[i] = x[i] + h;
            let fp = eval(&probe)?;
            probe[i] = x[i] - h;
            let fm = eval(&probe)?;
            Ok((fp - fm) / (2.0 * h))
        }
    }
}

/// Vector of q-partials, one per coordinate.
pub fn q_gradient<F: ScalarField + ?Sized>(
    f: &F,
    x: &[f64],
    q: &QVector,
    fallback: FallbackStep,
) -> Result<Vec<f64>> {
    (0..x.len())
        .map(|i| q_partial(f, x, i, q, fallback))
        .collect()
}

/// m×n q-Jacobian of a residual map.
///
/// Uses one base evaluation plus one evaluation per coordinate on the
/// q-difference branch, or two per coordinate on the fallback branch.
pub fn q_jacobian<F: ResidualMap + ?Sized>(
    map: &F,
    x: &[f64],
    q: &QVector,
    fallback: FallbackStep,
) -> Result<DenseMatrix> {
    let (n, m) = (map.num_params(), map.num_residuals());
    expect_len("q vector", n, q.len())?;
    fallback.validate()?;
    check_shape(n, m)?;
    let base = eval_residuals(map, x)?;
    let mut jac = DenseMatrix::zeros(m, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        match q_branch(x[j], q.q[j], q.epsilon_q) {
            Some((xs, denom)) => {
                probe[j] = xs;
                let scaled = eval_column(map, &probe, j)?;
                for i in 0..m {
                    jac[(i, j)] = (base[i] - scaled[i]) / denom;
                }
            }
            None => central_column(map, &mut probe, j, fallback, &mut jac)?,
        }
        probe[j] = x[j];
    }
    Ok(jac)
}

/// m×n Jacobian by central differences with step `fallback.at(x_j)`.
pub fn central_jacobian<F: ResidualMap + ?Sized>(
    map: &F,
    x: &[f64],
    fallback: FallbackStep,
) -> Result<DenseMatrix> {
    let (n, m) = (map.num_params(), map.num_residuals());
    expect_len("parameter vector", n, x.len())?;
    fallback.validate()?;
    check_shape(n, m)?;
    let mut jac = DenseMatrix::zeros(m, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        central_column(map, &mut probe, j, fallback, &mut jac)?;
        probe[j] = x[j];
    }
    Ok(jac)
}

fn check_shape(n: usize, m: usize) -> Result<()> {
    if m < n {
        Err(Error::DimensionMismatch {
            context: "residual count (m >= n)",
            expected: n,
            found: m,
        })
    } else {
        Ok(())
    }
}

fn central_column<F: ResidualMap + ?Sized>(
    map: &F,
    probe: &mut [f64],
    j: usize,
    fallback: FallbackStep,
    jac: &mut DenseMatrix,
) -> Result<()> {
    let xj = probe[j];
    let h = fallback.at(xj);
    probe[j] = xj + h;
    let fp = eval_column(map, probe, j)?;
    probe[j] = xj - h;
    let fm = eval_column(map, probe, j)?;
    for i in 0..fp.len() {
        jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
    }
    Ok(())
}

fn eval_column<F: ResidualMap + ?Sized>(map: &F, probe: &[f64], j: usize) -> Result<Vec<f64>> {
    eval_residuals(map, probe).map_err(|e| match e {
        Error::NonFiniteEvaluation { point, row, .. } => Error::NonFiniteEvaluation {
            point,
            row,
            column: Some(j),
        },
        other => other,
    })
}

/// q-integer `[n]_q = 1 + q + … + q^(n−1)`.
pub fn q_bracket(n: u32, q: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for _ in 0..n {
        sum += term;
        term *= q;
    }
    sum
}

/// q-factorial `[n]_q! = [1]_q · [2]_q ⋯ [n]_q`, with `[0]_q! = 1`.
pub fn q_factorial(n: u32, q: f64) -> f64 {
    (1..=n).map(|k| q_bracket(k, q)).product()
}

/// Evaluates a polynomial through its q-Taylor expansion about `c`:
///
/// ```text
/// f(x) = Σ_j (D_q^j f)(c) · (x − c)_q^j / [j]_q!
/// (x − c)_q^j = Π_{s<j} (x − q^s·c)
/// ```
///
/// `poly` holds coefficients in ascending powers. The result equals the
/// direct evaluation of the polynomial at `x` up to rounding.
pub fn q_taylor_eval(poly: &[f64], c: f64, x: f64, q: f64) -> Result<f64> {
    if poly.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "polynomial coefficients",
            expected: 1,
            found: 0,
        });
    }
    check_q(q)?;
    let mut deriv = poly.to_vec();
    let mut sum = 0.0;
    let mut shifted = 1.0;
    let mut factorial = 1.0;
    let mut q_pow = 1.0;
    for j in 0..poly.len() {
        if j > 0 {
            deriv = q_derivative_coeffs(&deriv, q);
            shifted *= x - q_pow * c;
            q_pow *= q;
            factorial *= q_bracket(j as u32, q);
        }
        sum += horner(&deriv, c) * shifted / factorial;
    }
    Ok(sum)
}

/// Coefficients of `D_q p` via `D_q x^k = [k]_q x^(k−1)`.
fn q_derivative_coeffs(coeffs: &[f64], q: f64) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, a)| a * q_bracket(k as u32, q))
        .collect()
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, a| acc * x + a)
}
