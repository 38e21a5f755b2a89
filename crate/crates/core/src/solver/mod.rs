//! Iterative least-squares solvers driven by q-Jacobians.
//!
//! * [`qlm_solve`]: damped steps `x − (J_qᵀJ_q + λI)⁻¹J_qᵀf` with the
//!   multiplicative λ schedule (`df` on acceptance, `mf` on rejection).
//! * [`qgn_solve`]: the same step with λ pinned near zero.
//! * [`qsd_solve`]: steepest descent along `−J_qᵀf` with a halving line search.
//! * [`lm_classic_solve`]: the q-LM loop on central-difference Jacobians,
//!   the `q → 1` reference.
//!
//! Every loop turn appends an [`IterationRecord`]; row 0 is the start point.

mod damping;
mod report;
mod schedule;

pub use damping::{accept_or_reject, DampingState, Decision, LAMBDA_MIN};
pub use report::{check_termination, IterationRecord, SolveResult, SolverConfig, Termination};
pub use schedule::{advance_q, QStrategy, Q_CEILING};

use crate::denselin::{damped_normal_solve, expect_len, norm2, norm_inf, DenseMatrix};
use crate::error::{check_param, Error, Result};
use crate::qcalc::{
    central_jacobian, eval_residuals, q_jacobian, FallbackStep, QVector, ResidualMap,
};

/// Pinned damping used by [`qgn_solve`].
pub const LAMBDA_GN: f64 = 1e-12;

/// Maximum number of step halvings in [`qsd_solve`].
pub const MAX_HALVINGS: u32 = 30;

/// One damped q-LM step from `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct QlmStep {
    pub candidate: Vec<f64>,
    /// `J_qᵀ f(x)`.
    pub grad: Vec<f64>,
    pub step_norm: f64,
}

pub fn qlm_step<F: ResidualMap + ?Sized>(
    map: &F,
    x: &[f64],
    q: &QVector,
    lambda: f64,
    fallback: FallbackStep,
) -> Result<QlmStep> {
    check_param(
        lambda > 0.0 && lambda.is_finite(),
        "lambda",
        "lambda > 0",
        lambda,
    )?;
    let f = eval_residuals(map, x)?;
    let jac = q_jacobian(map, x, q, fallback)?;
    let d = damped_normal_solve(&jac, &f, lambda)?;
    Ok(QlmStep {
        candidate: x.iter().zip(&d).map(|(xi, di)| xi - di).collect(),
        grad: jac.tr_mul_vec(&f)?,
        step_norm: norm2(&d),
    })
}

pub fn qlm_solve<F: ResidualMap + ?Sized>(
    map: &F,
    x0: &[f64],
    qs: &QStrategy,
    damping0: DampingState,
    config: &SolverConfig,
) -> Result<SolveResult> {
    damping0.validate()?;
    let session = Session::new(map, Rule::Q(qs), config, x0)?;
    session.damped_loop(Damping::Adaptive(damping0))
}

/// Gauss-Newton on q-Jacobians. A turn that fails to decrease the SSE ends
/// the run with [`Termination::NoProgress`]; a singular system is an error.
pub fn qgn_solve<F: ResidualMap + ?Sized>(
    map: &F,
    x0: &[f64],
    qs: &QStrategy,
    config: &SolverConfig,
) -> Result<SolveResult> {
    let session = Session::new(map, Rule::Q(qs), config, x0)?;
    session.damped_loop(Damping::Pinned(LAMBDA_GN))
}

/// The q-LM loop with central-difference Jacobians (q column reported as 1).
pub fn lm_classic_solve<F: ResidualMap + ?Sized>(
    map: &F,
    x0: &[f64],
    damping0: DampingState,
    config: &SolverConfig,
) -> Result<SolveResult> {
    damping0.validate()?;
    let session = Session::new(map, Rule::Central, config, x0)?;
    session.damped_loop(Damping::Adaptive(damping0))
}

/// q-steepest descent on `½‖f‖²`: `x ← x − α·J_qᵀf`, with `α` halved from
/// `step0` until the SSE strictly decreases. The `lambda` column of the trace
/// holds the step length tried last.
pub fn qsd_solve<F: ResidualMap + ?Sized>(
    map: &F,
    x0: &[f64],
    qs: &QStrategy,
    step0: f64,
    config: &SolverConfig,
) -> Result<SolveResult> {
    check_param(
        step0 > 0.0 && step0.is_finite(),
        "step0",
        "step0 > 0",
        step0,
    )?;
    let session = Session::new(map, Rule::Q(qs), config, x0)?;
    session.descent_loop(step0)
}

enum Rule<'a> {
    Q(&'a QStrategy),
    Central,
}

enum Damping {
    Adaptive(DampingState),
    Pinned(f64),
}

/// Mutable state of one solve: current iterate, its residuals and Jacobian.
struct Session<'a, F: ?Sized> {
    map: &'a F,
    rule: Rule<'a>,
    config: &'a SolverConfig,
    x: Vec<f64>,
    f: Vec<f64>,
    sse: f64,
    q: Vec<f64>,
    jac: DenseMatrix,
    grad: Vec<f64>,
    accepted: u32,
    jacobian_evals: usize,
    trace: Vec<IterationRecord>,
}

impl<'a, F: ResidualMap + ?Sized> Session<'a, F> {
    fn new(map: &'a F, rule: Rule<'a>, config: &'a SolverConfig, x0: &[f64]) -> Result<Self> {
        config.validate()?;
        let n = map.num_params();
        expect_len("starting point", n, x0.len())?;
        if let Rule::Q(qs) = rule {
            expect_len("q0", n, qs.dim())?;
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("starting point"));
        }
        let f = eval_residuals(map, x0)?;
        let mut session = Self {
            map,
            rule,
            config,
            x: x0.to_vec(),
            sse: sum_sq(&f),
            f,
            q: Vec::new(),
            jac: DenseMatrix::identity(1),
            grad: Vec::new(),
            accepted: 0,
            jacobian_evals: 0,
            trace: Vec::new(),
        };
        session.q = session.current_q();
        session.jac = session.jacobian_at(&session.x.clone())?;
        session.grad = session.jac.tr_mul_vec(&session.f)?;
        Ok(session)
    }

    fn current_q(&self) -> Vec<f64> {
        match self.rule {
            Rule::Q(qs) => advance_q(qs, self.accepted),
            Rule::Central => vec![1.0; self.x.len()],
        }
    }

    fn jacobian_at(&mut self, x: &[f64]) -> Result<DenseMatrix> {
        self.jacobian_evals += 1;
        match self.rule {
            Rule::Q(_) => {
                let q = QVector::with_epsilon(self.q.clone(), self.config.epsilon_q)?;
                q_jacobian(self.map, x, &q, self.config.fallback)
            }
            Rule::Central => central_jacobian(self.map, x, self.config.fallback),
        }
    }

    /// Moves to an accepted candidate, advancing q and refreshing the
    /// Jacobian. Returns `Ok(false)` if the Jacobian at the candidate cannot
    /// be evaluated, which callers treat as a rejection.
    fn commit(&mut self, x: Vec<f64>, f: Vec<f64>) -> Result<bool> {
        let accepted = self.accepted + 1;
        let q = match self.rule {
            Rule::Q(qs) => advance_q(qs, accepted),
            Rule::Central => self.q.clone(),
        };
        let saved_q = std::mem::replace(&mut self.q, q);
        match self.jacobian_at(&x) {
            Ok(jac) => {
                self.grad = jac.tr_mul_vec(&f)?;
                self.jac = jac;
                self.x = x;
                self.sse = sum_sq(&f);
                self.f = f;
                self.accepted = accepted;
                Ok(true)
            }
            Err(Error::NonFiniteEvaluation { .. }) => {
                self.q = saved_q;
                Ok(false)
            }
            Err(e) => Err(e),
        }
    }

    fn record(&mut self, k: u32, lambda: f64, accepted: bool, step_norm: f64) -> IterationRecord {
        let row = IterationRecord {
            k,
            x: self.x.clone(),
            sse: self.sse,
            lambda,
            q: self.q.clone(),
            accepted,
            grad_norm: norm_inf(&self.grad),
            step_norm,
        };
        self.trace.push(row.clone());
        row
    }

    fn finish(self, termination: Termination) -> SolveResult {
        SolveResult {
            x_final: self.x,
            sse_final: self.sse,
            termination,
            iterations: self.trace.len(),
            trace: self.trace,
            jacobian_evals: self.jacobian_evals,
        }
    }

    /// Evaluates a candidate; non-finite residuals give `None`.
    fn try_candidate(&self, candidate: &[f64]) -> Result<Option<(Vec<f64>, f64)>> {
        match eval_residuals(self.map, candidate) {
            Ok(f) => {
                let sse = sum_sq(&f);
                Ok(sse.is_finite().then_some((f, sse)))
            }
            Err(Error::NonFiniteEvaluation { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn damped_loop(mut self, damping: Damping) -> Result<SolveResult> {
        let (mut state, pinned) = match damping {
            Damping::Adaptive(s) => (s, None),
            Damping::Pinned(l) => (
                DampingState {
                    lambda: l,
                    ..DampingState::default()
                },
                Some(l),
            ),
        };
        let row = self.record(0, state.lambda, true, 0.0);
        if let Some(t) = check_termination(&row, self.config, pinned.is_none().then_some(&state)) {
            return Ok(self.finish(t));
        }
        for k in 1.. {
            if self.config.strict_paper {
                self.jac = self.jacobian_at(&self.x.clone())?;
                self.grad = self.jac.tr_mul_vec(&self.f)?;
            }
            let (candidate, step_norm) = match damped_normal_solve(&self.jac, &self.f, state.lambda)
            {
                Ok(d) => {
                    let c: Vec<f64> = self.x.iter().zip(&d).map(|(xi, di)| xi - di).collect();
                    (Some(c), norm2(&d))
                }
                // Only reachable when λ is negligible against JᵀJ; raise λ.
                Err(Error::SingularSystem { .. }) if pinned.is_none() => (None, 0.0),
                Err(e) => return Err(e),
            };
            let evaluated = match &candidate {
                Some(c) => self.try_candidate(c)?,
                None => None,
            };
            let sse_candidate = evaluated.as_ref().map_or(f64::NAN, |(_, s)| *s);

            let mut decision = accept_or_reject(sse_candidate, self.sse, state);
            if decision.accepted {
                let (f, _) = evaluated.expect("accepted candidate has residuals");
                if !self.commit(candidate.expect("accepted candidate exists"), f)? {
                    decision = accept_or_reject(f64::NAN, self.sse, state);
                }
            }
            if pinned.is_none() {
                state = decision.state;
            }
            let row = self.record(k, state.lambda, decision.accepted, step_norm);
            if pinned.is_some() && !decision.accepted {
                return Ok(self.finish(Termination::NoProgress));
            }
            if let Some(t) =
                check_termination(&row, self.config, pinned.is_none().then_some(&state))
            {
                return Ok(self.finish(t));
            }
        }
        unreachable!("loop exits through a termination check")
    }

    fn descent_loop(mut self, step0: f64) -> Result<SolveResult> {
        let row = self.record(0, step0, true, 0.0);
        if let Some(t) = check_termination(&row, self.config, None) {
            return Ok(self.finish(t));
        }
        for k in 1.. {
            if self.config.strict_paper {
                self.jac = self.jacobian_at(&self.x.clone())?;
                self.grad = self.jac.tr_mul_vec(&self.f)?;
            }
            let grad_len = norm2(&self.grad);
            let mut alpha = step0;
            let mut accepted = false;
            for halving in 0..=MAX_HALVINGS {
                if halving > 0 {
                    alpha *= 0.5;
                }
                let candidate: Vec<f64> = self
                    .x
                    .iter()
                    .zip(&self.grad)
                    .map(|(xi, gi)| xi - alpha * gi)
                    .collect();
                if let Some((f, sse)) = self.try_candidate(&candidate)? {
                    if sse < self.sse && self.commit(candidate, f)? {
                        accepted = true;
                        break;
                    }
                }
            }
            let row = self.record(k, alpha, accepted, alpha * grad_len);
            if !accepted {
                return Ok(self.finish(Termination::NoProgress));
            }
            if let Some(t) = check_termination(&row, self.config, None) {
                return Ok(self.finish(t));
            }
        }
        unreachable!("loop exits through a termination check")
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}
