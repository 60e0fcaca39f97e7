//! Run configuration shared by the agent, the sampler and the harness.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::envs::EnvName;
use crate::nn::Activation;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algo {
    #[serde(rename = "sac")]
    Sac,
    #[serde(rename = "cgar-sac")]
    CgarSac,
}

impl Algo {
    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Sac => "sac",
            Algo::CgarSac => "cgar-sac",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sac" => Ok(Algo::Sac),
            "cgar-sac" | "cgar" => Ok(Algo::CgarSac),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Which online critic scores the CGAR candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticChoice {
    /// Minimum of the twin critics.
    #[default]
    Min,
    /// The first critic alone.
    First,
}

impl FromStr for CriticChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(CriticChoice::Min),
            "first" => Ok(CriticChoice::First),
            other => Err(Error::Config(format!("unknown critic choice `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub algo: Algo,
    pub env: EnvName,
    pub seed: u64,
    pub gamma: f64,
    pub tau: f64,
    pub lr_critic: f64,
    pub lr_actor: f64,
    pub lr_alpha: f64,
    pub init_alpha: f64,
    /// Number of CGAR candidates.
    pub k: usize,
    pub softmax_temperature: f64,
    pub scorer: CriticChoice,
    /// Uniform-random warm-up steps.
    pub n_init: usize,
    /// Policy-driven steps, each followed by one gradient step.
    pub n_train: usize,
    pub batch_size: usize,
    /// `None` resolves to `-(action dimension)`.
    pub target_entropy: Option<f64>,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub buffer_capacity: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Training metrics are logged every this many steps.
    pub log_interval: usize,
    /// Emit CGAR candidate records.
    pub verbose: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algo: Algo::Sac,
            env: EnvName::Pendulum,
            seed: 0,
            gamma: 0.99,
            tau: 0.005,
            lr_critic: 3e-4,
            lr_actor: 3e-4,
            lr_alpha: 3e-4,
            init_alpha: 1.0,
            k: 10,
            softmax_temperature: 1.0,
            scorer: CriticChoice::Min,
            n_init: 1000,
            n_train: 30_000,
            batch_size: 256,
            target_entropy: None,
            hidden: vec![64, 64],
            activation: Activation::Relu,
            buffer_capacity: 100_000,
            eval_interval: 1000,
            eval_episodes: 10,
            log_interval: 100,
            verbose: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        for (name, v) in [
            ("lr_critic", self.lr_critic),
            ("lr_actor", self.lr_actor),
            ("lr_alpha", self.lr_alpha),
            ("init_alpha", self.init_alpha),
            ("softmax_temperature", self.softmax_temperature),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.eval_interval == 0 || self.eval_episodes == 0 || self.log_interval == 0 {
            return bad("eval_interval, eval_episodes and log_interval must be positive".into());
        }
        if self.buffer_capacity < self.batch_size {
            return bad("buffer_capacity must hold at least one batch".into());
        }
        if self.n_train > 0 && self.n_init < self.batch_size {
            return bad(format!(
                "n_init ({}) must be at least batch_size ({}) so training can start",
                self.n_init, self.batch_size
            ));
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive".into());
        }
        if let Some(h) = self.target_entropy {
            if !h.is_finite() {
                return bad("target_entropy must be finite".into());
            }
        }
        Ok(())
    }

    pub fn resolved_target_entropy(&self, action_dim: usize) -> f64 {
        self.target_entropy.unwrap_or(-(action_dim as f64))
    }

    /// Label used to group runs: the algorithm name, with CGAR settings
    /// appended when they differ from the defaults.
    pub fn label(&self) -> String {
        match self.algo {
            Algo::Sac => "sac".into(),
            Algo::CgarSac => {
                let default = TrainConfig::default();
                if self.k == default.k
                    && self.softmax_temperature == default.softmax_temperature
                    && self.scorer == default.scorer
                {
                    "cgar-sac".into()
                } else {
                    let scorer = match self.scorer {
                        CriticChoice::Min => "",
                        CriticChoice::First => "-q1",
                    };
                    format!("cgar-sac-k{}-t{}{}", self.k, self.softmax_temperature, scorer)
                }
            }
        }
    }

    /// FNV-1a hash of the canonical JSON form.
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("config serializes");
        fnv1a(json.as_bytes())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let cases: Vec<Box<dyn Fn(&mut TrainConfig)>> = vec![
            Box::new(|c| c.gamma = 1.0),
            Box::new(|c| c.tau = 0.0),
            Box::new(|c| c.lr_actor = -1.0),
            Box::new(|c| c.k = 0),
            Box::new(|c| c.softmax_temperature = 0.0),
            Box::new(|c| c.n_init = 10),
        ];
        for mutate in cases {
            let mut c = TrainConfig::default();
            mutate(&mut c);
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn json_round_trip_and_hash() {
        let mut c = TrainConfig::default();
        c.algo = Algo::CgarSac;
        c.target_entropy = Some(-0.5);
        let back: TrainConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        c.seed = 1;
        assert_ne!(back.hash(), c.hash());
    }

    #[test]
    fn labels() {
        let mut c = TrainConfig::default();
        assert_eq!(c.label(), "sac");
        c.algo = Algo::CgarSac;
        assert_eq!(c.label(), "cgar-sac");
        c.k = 5;
        c.softmax_temperature = 0.5;
        assert_eq!(c.label(), "cgar-sac-k5-t0.5");
    }

    #[test]
    fn target_entropy_default_is_negative_action_dim() {
        assert_eq!(TrainConfig::default().resolved_target_entropy(3), -3.0);
    }
}
