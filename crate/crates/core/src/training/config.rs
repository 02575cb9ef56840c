use crate::error::{Error, Result};

/// Form of the critic and its objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriticMode {
    /// Sigmoid critic, maximizing `E[D(x)] + E[1 - D(G(z))] - λ·GP`.
    Bounded,
    /// Unbounded critic, maximizing `E[D(x)] - E[D(G(z))] - λ·GP`.
    Wgan,
}

impl CriticMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Bounded => "bounded",
            Self::Wgan => "wgan",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bounded" => Ok(Self::Bounded),
            "wgan" => Ok(Self::Wgan),
            _ => Err(Error::Config(format!(
                "unknown critic mode {s:?} (expected bounded or wgan)"
            ))),
        }
    }

    pub fn uses_sigmoid(self) -> bool {
        self == Self::Bounded
    }
}

/// Where the conditions of generated samples come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionPairing {
    /// Drawn afresh from the training distances.
    Resample,
    /// Copied from the real minibatch.
    Paired,
}

impl ConditionPairing {
    pub fn name(self) -> &'static str {
        match self {
            Self::Resample => "resample",
            Self::Paired => "paired",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "resample" => Ok(Self::Resample),
            "paired" => Ok(Self::Paired),
            _ => Err(Error::Config(format!(
                "unknown condition pairing {s:?} (expected resample or paired)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Gradient penalty weight λ.
    pub penalty_weight: f64,
    /// Critic updates per generator update.
    pub critic_steps: usize,
    pub generator_lr: f64,
    pub critic_lr: f64,
    pub seed: u64,
    /// Epochs between checkpoints; 0 keeps only the final one.
    pub checkpoint_interval: usize,
    /// Epochs between evaluations; 0 disables them.
    pub eval_interval: usize,
    /// Generated samples per evaluation.
    pub eval_samples: usize,
    pub critic_mode: CriticMode,
    pub condition_pairing: ConditionPairing,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 64,
            penalty_weight: 10.0,
            critic_steps: 3,
            generator_lr: 1e-4,
            critic_lr: 1e-4,
            seed: 1,
            checkpoint_interval: 50,
            eval_interval: 50,
            eval_samples: 400,
            critic_mode: CriticMode::Bounded,
            condition_pairing: ConditionPairing::Resample,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.critic_steps == 0 {
            return Err(Error::Config(
                "train.batch_size and train.critic_steps must be positive".into(),
            ));
        }
        if !(self.penalty_weight >= 0.0 && self.penalty_weight.is_finite()) {
            return Err(Error::Config("train.penalty_weight must be >= 0".into()));
        }
        for (name, lr) in [("generator_lr", self.generator_lr), ("critic_lr", self.critic_lr)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("train.{name} must be positive")));
            }
        }
        Ok(())
    }
}
