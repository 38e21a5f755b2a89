use crate::error::{check_param, Error, Result};

/// Largest q a schedule will produce.
pub const Q_CEILING: f64 = 1.0 - 1e-12;

/// Rule producing the per-coordinate q vector after `k` accepted steps.
#[derive(Debug, Clone, PartialEq)]
pub enum QStrategy {
    /// `q_k = q0` for every k.
    Fixed { q0: Vec<f64> },
    /// `q_k = 1 − (1 − q0)·gamma^k`, rising toward one.
    Geometric { q0: Vec<f64>, gamma: f64 },
}

impl QStrategy {
    pub fn fixed(q0: Vec<f64>) -> Result<Self> {
        check_q0(&q0)?;
        Ok(Self::Fixed { q0 })
    }

    pub fn geometric(q0: Vec<f64>, gamma: f64) -> Result<Self> {
        check_q0(&q0)?;
        check_param(gamma > 0.0 && gamma < 1.0, "gamma", "0 < gamma < 1", gamma)?;
        Ok(Self::Geometric { q0, gamma })
    }

    pub fn q0(&self) -> &[f64] {
        match self {
            Self::Fixed { q0 } | Self::Geometric { q0, .. } => q0,
        }
    }

    pub fn dim(&self) -> usize {
        self.q0().len()
    }
}

fn check_q0(q0: &[f64]) -> Result<()> {
    if q0.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "q0",
            expected: 1,
            found: 0,
        });
    }
    for &q in q0 {
        check_param(q > 0.0 && q < 1.0, "q0", "0 < q0 < 1", q)?;
    }
    Ok(())
}

/// The q vector after `k` accepted steps, clamped below [`Q_CEILING`].
pub fn advance_q(qs: &QStrategy, k: u32) -> Vec<f64> {
    match qs {
        QStrategy::Fixed { q0 } => q0.clone(),
        QStrategy::Geometric { q0, gamma } => {
            let decay = gamma.powi(k.min(i32::MAX as u32) as i32);
            q0.iter()
                .map(|q| (1.0 - (1.0 - q) * decay).min(Q_CEILING))
                .collect()
        }
    }
}
