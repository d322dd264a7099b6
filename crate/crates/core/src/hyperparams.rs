use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training settings for one phase (pretraining, softmax, or fine-tuning).
///
/// `Default` gives the constrained regime: p = 0.05, β = 3, α₁ = 3e-4,
/// α₂ = 3e-3, κ = 0.1, with a pretraining learning rate of 0.5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    /// Target mean activation of each hidden unit.
    pub p: f64,
    /// Weight of the KL sparsity term.
    pub beta: f64,
    /// Smoothed-L1 factor on negative weights.
    pub alpha1: f64,
    /// Squared-L2 factor on negative weights.
    pub alpha2: f64,
    /// Knee of the smoothed L1 function.
    pub kappa: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

pub const PRETRAIN_LEARNING_RATE: f64 = 0.5;
pub const FINETUNE_LEARNING_RATE: f64 = 0.1;

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            p: 0.05,
            beta: 3.0,
            alpha1: 0.0003,
            alpha2: 0.003,
            kappa: 0.1,
            learning_rate: PRETRAIN_LEARNING_RATE,
            epochs: 400,
            seed: 0,
        }
    }
}

impl Hyperparams {
    /// Defaults for the supervised fine-tuning phase.
    pub fn finetune() -> Self {
        Hyperparams {
            learning_rate: FINETUNE_LEARNING_RATE,
            ..Self::default()
        }
    }

    /// The same settings with the nonnegativity penalty switched off (plain SAE).
    pub fn unconstrained(&self) -> Self {
        Hyperparams {
            alpha1: 0.0,
            alpha2: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::invalid(msg)) };
        check(self.p > 0.0 && self.p < 1.0, format!("p must lie in (0, 1), got {}", self.p))?;
        check(self.kappa > 0.0, format!("kappa must be positive, got {}", self.kappa))?;
        check(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            format!("learning_rate must be positive, got {}", self.learning_rate),
        )?;
        for (name, v) in [("beta", self.beta), ("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            check(v >= 0.0 && v.is_finite(), format!("{name} must be finite and >= 0, got {v}"))?;
        }
        Ok(())
    }
}
