use crate::error::{check_param, Result};

/// Marquardt damping parameter with its update factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingState {
    pub lambda: f64,
    /// Multiplication factor applied on rejection, `mf > 1`.
    pub mf: f64,
    /// Division factor applied on acceptance, `0 < df < 1`.
    pub df: f64,
    pub lambda_max: f64,
}

impl Default for DampingState {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            mf: 10.0,
            df: 0.1,
            lambda_max: 1e12,
        }
    }
}

/// Lower clamp for repeated reductions, so that `lambda` stays positive.
pub const LAMBDA_MIN: f64 = f64::MIN_POSITIVE;

impl DampingState {
    pub fn new(lambda: f64, mf: f64, df: f64, lambda_max: f64) -> Result<Self> {
        let state = Self {
            lambda,
            mf,
            df,
            lambda_max,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        check_param(
            self.mf > 1.0 && self.mf.is_finite(),
            "mf",
            "mf > 1",
            self.mf,
        )?;
        check_param(self.df > 0.0 && self.df < 1.0, "df", "0 < df < 1", self.df)?;
        check_param(
            self.lambda_max > 0.0 && self.lambda_max.is_finite(),
            "lambda_max",
            "lambda_max > 0",
            self.lambda_max,
        )?;
        check_param(
            self.lambda > 0.0 && self.lambda <= self.lambda_max,
            "lambda",
            "0 < lambda <= lambda_max",
            self.lambda,
        )
    }
}

/// Outcome of one acceptance test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub accepted: bool,
    pub state: DampingState,
    /// The rejection increase hit `lambda_max`.
    pub clamped: bool,
}

/// Accepts a candidate only on a strict SSE decrease.
///
/// Accepted: `λ ← df·λ`. Rejected (including ties and non-finite candidates):
/// `λ ← min(mf·λ, lambda_max)`.
pub fn accept_or_reject(sse_candidate: f64, sse_current: f64, state: DampingState) -> Decision {
    let accepted = sse_candidate.is_finite() && sse_candidate < sse_current;
    let mut next = state;
    let mut clamped = false;
    if accepted {
        next.lambda = (state.df * state.lambda).max(LAMBDA_MIN);
    } else {
        let raised = state.mf * state.lambda;
        if raised >= state.lambda_max {
            next.lambda = state.lambda_max;
            clamped = true;
        } else {
            next.lambda = raised;
        }
    }
    Decision {
        accepted,
        state: next,
        clamped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(lambda: f64) -> DampingState {
        DampingState {
            lambda,
            ..DampingState::default()
        }
    }

    #[test]
    fn decrease_is_accepted() {
        let d = accept_or_reject(1.0, 2.0, state(10.0));
        assert!(d.accepted);
        assert_eq!(d.state.lambda, 1.0);
        assert!(!d.clamped);
    }

    #[test]
    fn tie_is_rejected() {
        let d = accept_or_reject(2.0, 2.0, state(10.0));
        assert!(!d.accepted);
        assert_eq!(d.state.lambda, 100.0);
    }

    #[test]
    fn non_finite_candidate_is_rejected() {
        for bad in [f64::NAN, f64::INFINITY] {
            let d = accept_or_reject(bad, 2.0, state(1.0));
            assert!(!d.accepted);
            assert_eq!(d.state.lambda, 10.0);
        }
    }

    #[test]
    fn increase_is_clamped() {
        let d = accept_or_reject(3.0, 2.0, state(5e11));
        assert!(!d.accepted && d.clamped);
        assert_eq!(d.state.lambda, 1e12);
    }

    #[test]
    fn validation_messages() {
        let err = DampingState::new(1e-3, 0.5, 0.1, 1e12).unwrap_err();
        assert_eq!(err.to_string(), "mf must satisfy mf > 1 (got 0.5)");
        let err = DampingState::new(1e-3, 10.0, 1.5, 1e12).unwrap_err();
        assert_eq!(err.to_string(), "df must satisfy 0 < df < 1 (got 1.5)");
        assert!(DampingState::new(0.0, 10.0, 0.1, 1e12).is_err());
        assert!(DampingState::new(1e13, 10.0, 0.1, 1e12).is_err());
        assert!(DampingState::default().validate().is_ok());
    }
}
