use std::fmt;

use crate::error::{check_param, Result};
use crate::qcalc::{FallbackStep, DEFAULT_EPSILON_Q};

use super::damping::DampingState;

/// Tolerances and iteration budget shared by all solver variants.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stop once `‖f(x)‖² <= stop_iter`.
    pub stop_iter: f64,
    /// Loop-turn budget.
    pub max_no_iter: u32,
    /// Stop once `‖J_qᵀf‖∞ <= gtol`.
    pub gtol: f64,
    /// Stop after an accepted step with `‖d‖ <= xtol·(1 + ‖x‖)`.
    pub xtol: f64,
    /// Re-evaluate the Jacobian on every loop turn, even after a rejection.
    pub strict_paper: bool,
    pub epsilon_q: f64,
    pub fallback: FallbackStep,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            stop_iter: 1e-12,
            max_no_iter: 1000,
            gtol: 1e-10,
            xtol: 1e-12,
            strict_paper: false,
            epsilon_q: DEFAULT_EPSILON_Q,
            fallback: FallbackStep::Relative,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        check_param(
            self.max_no_iter >= 1,
            "max_no_iter",
            "max_no_iter >= 1",
            self.max_no_iter as f64,
        )?;
        check_param(
            self.stop_iter >= 0.0,
            "stop_iter",
            "stop_iter >= 0",
            self.stop_iter,
        )?;
        check_param(self.gtol >= 0.0, "gtol", "gtol >= 0", self.gtol)?;
        check_param(self.xtol >= 0.0, "xtol", "xtol >= 0", self.xtol)?;
        check_param(
            self.epsilon_q > 0.0,
            "epsilon_q",
            "epsilon_q > 0",
            self.epsilon_q,
        )
    }
}

/// One loop turn, recorded after the accept/reject decision.
///
/// Row 0 describes the starting point. For a rejected turn `x` and `sse` are
/// the unchanged iterate and `step_norm` is the norm of the refused step.
/// `lambda` is the damping after the update (the step length for q-SD).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: u32,
    pub x: Vec<f64>,
    pub sse: f64,
    pub lambda: f64,
    pub q: Vec<f64>,
    pub accepted: bool,
    pub grad_norm: f64,
    pub step_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    SseBelowThreshold,
    MaxIterations,
    StationaryGradient,
    SmallStep,
    LambdaOverflow,
    /// A q-GN or q-SD turn failed to decrease the SSE.
    NoProgress,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SseBelowThreshold => "sse_below_threshold",
            Self::MaxIterations => "max_iterations",
            Self::StationaryGradient => "stationary_gradient",
            Self::SmallStep => "small_step",
            Self::LambdaOverflow => "lambda_overflow",
            Self::NoProgress => "no_progress",
        }
    }

    /// Whether the reason indicates convergence rather than an exhausted budget.
    pub fn is_converged(&self) -> bool {
        matches!(
            self,
            Self::SseBelowThreshold | Self::StationaryGradient | Self::SmallStep
        )
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub x_final: Vec<f64>,
    pub sse_final: f64,
    pub termination: Termination,
    /// Number of trace rows, including the starting row.
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    /// Number of Jacobian formations.
    pub jacobian_evals: usize,
}

impl SolveResult {
    /// Accepted turns, not counting the starting row.
    pub fn accepted_steps(&self) -> usize {
        self.trace.iter().filter(|r| r.k > 0 && r.accepted).count()
    }

    /// Loop turns after the starting row.
    pub fn loop_turns(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }
}

/// First matching stop reason, in priority order: SSE threshold, stationary
/// gradient, small accepted step, λ overflow on a rejection, iteration cap.
pub fn check_termination(
    record: &IterationRecord,
    config: &SolverConfig,
    damping: Option<&DampingState>,
) -> Option<Termination> {
    if record.sse <= config.stop_iter {
        return Some(Termination::SseBelowThreshold);
    }
    if record.grad_norm <= config.gtol {
        return Some(Termination::StationaryGradient);
    }
    if record.k > 0 && record.accepted {
        let x_norm = record.x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if record.step_norm <= config.xtol * (1.0 + x_norm) {
            return Some(Termination::SmallStep);
        }
    }
    if let Some(d) = damping {
        if !record.accepted && record.lambda >= d.lambda_max {
            return Some(Termination::LambdaOverflow);
        }
    }
    if record.k >= config.max_no_iter {
        return Some(Termination::MaxIterations);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(sse: f64, grad_norm: f64) -> IterationRecord {
        IterationRecord {
            k: 3,
            x: vec![1.0, 1.0],
            sse,
            lambda: 1e-3,
            q: vec![0.5, 0.5],
            accepted: true,
            grad_norm,
            step_norm: 1.0,
        }
    }

    #[test]
    fn priority_order() {
        let cfg = SolverConfig::default();
        assert_eq!(
            check_termination(&record(1e-20, 0.0), &cfg, None),
            Some(Termination::SseBelowThreshold)
        );
        assert_eq!(
            check_termination(&record(1.0, 0.0), &cfg, None),
            Some(Termination::StationaryGradient)
        );
        assert_eq!(check_termination(&record(1.0, 1.0), &cfg, None), None);
    }

    #[test]
    fn iteration_cap() {
        let cfg = SolverConfig {
            max_no_iter: 3,
            ..SolverConfig::default()
        };
        assert_eq!(
            check_termination(&record(100.0, 5.0), &cfg, None),
            Some(Termination::MaxIterations)
        );
    }

    #[test]
    fn small_step_only_on_accepted_turns() {
        let cfg = SolverConfig {
            xtol: 1e-6,
            ..SolverConfig::default()
        };
        let mut r = record(1.0, 1.0);
        r.step_norm = 1e-7;
        assert_eq!(
            check_termination(&r, &cfg, None),
            Some(Termination::SmallStep)
        );
        r.accepted = false;
        assert_eq!(check_termination(&r, &cfg, None), None);
    }

    #[test]
    fn overflow_on_rejection_at_cap() {
        let cfg = SolverConfig::default();
        let damping = DampingState::default();
        let mut r = record(1.0, 1.0);
        r.accepted = false;
        r.lambda = damping.lambda_max;
        assert_eq!(
            check_termination(&r, &cfg, Some(&damping)),
            Some(Termination::LambdaOverflow)
        );
    }
}
