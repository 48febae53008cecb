//! Decision algorithms for the charging-station agents: LinUCB with
//! disjoint and hybrid context models, and tabular Q-learning with an
//! epsilon-greedy policy.

mod linucb;
mod qlearning;

pub use linucb::{
    linucb_predict, linucb_select, linucb_update, ArmState, LinUcb, LinUcbConfig, SharedState,
};
pub use qlearning::{epsilon_greedy_select, q_update, QLearnerConfig, QTable};

use crate::error::{EvsimError, Result};

/// A fixed-dimension perception vector fed to LinUCB. Every entry is
/// finite; features are expected to be normalized by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector {
    values: Vec<f64>,
}

impl ContextVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(EvsimError::contract("context vector must have d >= 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EvsimError::contract("context vector contains non-finite entry"));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_rejects_nan_and_empty() {
        assert!(ContextVector::new(vec![]).is_err());
        assert!(ContextVector::new(vec![0.0, f64::NAN]).is_err());
        assert!(ContextVector::new(vec![0.0, 1.0]).is_ok());
    }
}
