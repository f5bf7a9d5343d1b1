use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::nn::Activation;
use crate::error::{Error, Result};

/// When learner updates happen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainFreqUnit {
    Step,
    Episode,
}

/// Entropy coefficient: fixed, or tuned toward a target entropy
/// (`-action_dim` when `target_entropy` is omitted).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EntCoef {
    Fixed(f64),
    Auto { init: f64, target_entropy: Option<f64> },
}

impl EntCoef {
    pub fn auto() -> Self {
        EntCoef::Auto {
            init: 1.0,
            target_entropy: None,
        }
    }
}

// Accepted forms: `0.1`, `"auto"`, `"auto_0.1"`, and
// `{"auto": {"init": 0.1, "target_entropy": -2.0}}`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EntCoefRepr {
    Value(f64),
    Text(String),
    Object { auto: AutoRepr },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AutoRepr {
    #[serde(default = "one")]
    init: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target_entropy: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Serialize for EntCoef {
    fn serialize<Se: Serializer>(&self, s: Se) -> std::result::Result<Se::Ok, Se::Error> {
        match *self {
            EntCoef::Fixed(a) => EntCoefRepr::Value(a),
            EntCoef::Auto {
                init,
                target_entropy: None,
            } if init == 1.0 => EntCoefRepr::Text("auto".into()),
            EntCoef::Auto { init, target_entropy } => EntCoefRepr::Object {
                auto: AutoRepr { init, target_entropy },
            },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for EntCoef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match EntCoefRepr::deserialize(d)? {
            EntCoefRepr::Value(a) => Ok(EntCoef::Fixed(a)),
            EntCoefRepr::Text(t) if t == "auto" => Ok(EntCoef::auto()),
            EntCoefRepr::Text(t) => match t.strip_prefix("auto_").map(str::parse::<f64>) {
                Some(Ok(init)) => Ok(EntCoef::Auto {
                    init,
                    target_entropy: None,
                }),
                _ => Err(D::Error::custom(format!("invalid ent_coef {t:?}"))),
            },
            EntCoefRepr::Object { auto } => Ok(EntCoef::Auto {
                init: auto.init,
                target_entropy: auto.target_entropy,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub num_layers: usize,
    pub num_hidden: usize,
    pub gradient_steps: usize,
    pub train_freq: usize,
    pub train_freq_unit: TrainFreqUnit,
    pub buffer_size: usize,
    pub learning_starts: usize,
    pub ent_coef: EntCoef,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

fn default_tau() -> f64 {
    0.005
}

fn default_activation() -> Activation {
    Activation::Relu
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            learning_rate: 3e-4,
            batch_size: 256,
            num_layers: 2,
            num_hidden: 256,
            gradient_steps: 1,
            train_freq: 1,
            train_freq_unit: TrainFreqUnit::Step,
            buffer_size: 1_000_000,
            learning_starts: 100,
            ent_coef: EntCoef::auto(),
            tau: default_tau(),
            activation: default_activation(),
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.num_layers == 0 || self.num_hidden == 0 {
            return bad("networks need at least one hidden layer of width >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau must lie in [0, 1], got {}", self.tau));
        }
        if self.train_freq == 0 {
            return bad("train_freq must be at least 1".into());
        }
        if self.buffer_size == 0 {
            return bad("buffer_size must be at least 1".into());
        }
        match self.ent_coef {
            EntCoef::Fixed(a) if !(a >= 0.0 && a.is_finite()) => bad(format!("ent_coef must be >= 0, got {a}")),
            EntCoef::Auto { init, .. } if !(init > 0.0 && init.is_finite()) => {
                bad(format!("initial auto ent_coef must be > 0, got {init}"))
            }
            _ => Ok(()),
        }
    }

    /// Hidden layer widths.
    pub fn hidden(&self) -> Vec<usize> {
        vec![self.num_hidden; self.num_layers]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ent_coef_forms() {
        let parse = |s: &str| serde_json::from_str::<EntCoef>(s);
        assert_eq!(parse("0").unwrap(), EntCoef::Fixed(0.0));
        assert_eq!(parse("\"auto\"").unwrap(), EntCoef::auto());
        assert_eq!(
            parse("\"auto_0.1\"").unwrap(),
            EntCoef::Auto {
                init: 0.1,
                target_entropy: None
            }
        );
        assert_eq!(
            parse(r#"{"auto": {"target_entropy": -3}}"#).unwrap(),
            EntCoef::Auto {
                init: 1.0,
                target_entropy: Some(-3.0)
            }
        );
        assert!(parse("\"sometimes\"").is_err());
        for e in [
            EntCoef::Fixed(0.2),
            EntCoef::auto(),
            EntCoef::Auto {
                init: 0.5,
                target_entropy: Some(-1.0),
            },
        ] {
            let back: EntCoef = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
            assert_eq!(back, e);
        }
    }

    #[test]
    fn validation() {
        assert!(LearnerConfig::default().validate().is_ok());
        let mut c = LearnerConfig::default();
        c.gamma = 1.0;
        assert!(c.validate().is_err());
        let mut c = LearnerConfig::default();
        c.batch_size = 0;
        assert!(c.validate().is_err());
        let json = serde_json::to_value(LearnerConfig::default()).unwrap();
        let mut obj = json.as_object().unwrap().clone();
        obj.insert("momentum".into(), 0.5.into());
        assert!(serde_json::from_value::<LearnerConfig>(obj.into()).is_err());
    }
}
