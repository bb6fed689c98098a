//! Scenarios and their JSON file format.
//!
//! ```json
//! {"k": 2, "m": [1, 0], "p": [5.0, 3.0],
//!  "consumers": [{"model": {"family": "uniform", "upper": [20.0, 10.0], "prior": [0.5, 0.5]},
//!                 "true_type": {"theta": 15.0, "b": 1}}],
//!  "seed": 7}
//! ```
//!
//! Besides `uniform` (support `[0, upper_b]`), the `truncated_exponential`
//! family takes `{"rate": [per level], "upper": float, "prior": [...]}`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::model::{ConsumerType, MarketStructure, ReportedProfile, ValuationModel};

#[derive(Debug, Clone, PartialEq)]
pub struct Consumer {
    pub model: ValuationModel,
    pub true_type: Option<ConsumerType>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub market: MarketStructure,
    pub consumers: Vec<Consumer>,
    pub seed: u64,
}

impl Scenario {
    pub fn new(market: MarketStructure, consumers: Vec<Consumer>, seed: u64) -> Result<Self> {
        let k = market.k();
        for (l, consumer) in consumers.iter().enumerate() {
            if consumer.model.k() != k {
                return Err(validation(format!(
                    "consumer {l} has a model with {} levels, market has {k}",
                    consumer.model.k()
                )));
            }
            if let Some(t) = consumer.true_type {
                market.check_level(t.b)?;
                let (lo, hi) = consumer.model.support(t.b)?;
                if !(t.theta >= lo && t.theta <= hi) {
                    return Err(Error::Domain {
                        theta: t.theta,
                        level: t.b,
                        lo,
                        hi,
                    });
                }
            }
        }
        Ok(Self {
            market,
            consumers,
            seed,
        })
    }

    /// Same model for every consumer, no true types.
    pub fn symmetric(
        market: MarketStructure,
        model: ValuationModel,
        n: usize,
        seed: u64,
    ) -> Result<Self> {
        let consumers = (0..n)
            .map(|_| Consumer {
                model: model.clone(),
                true_type: None,
            })
            .collect();
        Self::new(market, consumers, seed)
    }

    pub fn n(&self) -> usize {
        self.consumers.len()
    }

    pub fn models(&self) -> Vec<ValuationModel> {
        self.consumers.iter().map(|c| c.model.clone()).collect()
    }

    /// Truthful reports built from the true types; every consumer needs one.
    pub fn truthful_reports(&self) -> Result<ReportedProfile> {
        let types = self.true_types()?;
        Ok(ReportedProfile::truthful(&types))
    }

    pub fn true_types(&self) -> Result<Vec<ConsumerType>> {
        self.consumers
            .iter()
            .enumerate()
            .map(|(l, c)| {
                c.true_type
                    .ok_or_else(|| validation(format!("consumer {l} has no true_type")))
            })
            .collect()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ScenarioFile =
            serde_json::from_str(s).map_err(|e| validation(format!("scenario JSON: {e}")))?;
        file.try_into()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }
}

/// Draws `(theta_l, b_l)` independently for every consumer: `b_l` from the
/// prior, `theta_l` by inverse-cdf sampling from the level's distribution.
pub fn sample_profile<R: Rng + ?Sized>(
    scenario: &Scenario,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<usize>)> {
    scenario
        .consumers
        .iter()
        .try_for_each(|c| c.model.check_prior())?;
    Ok(sample_types(scenario, rng)
        .into_iter()
        .map(|t| (t.theta, t.b))
        .unzip())
}

pub(crate) fn sample_types<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Vec<ConsumerType> {
    scenario
        .consumers
        .iter()
        .map(|c| c.model.sample(rng))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub k: usize,
    pub m: Vec<u64>,
    pub p: Vec<f64>,
    #[serde(default)]
    pub consumers: Vec<ConsumerFile>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsumerFile {
    pub model: ModelFile,
    #[serde(default)]
    pub true_type: Option<ConsumerType>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelFile {
    Uniform {
        upper: Vec<f64>,
        prior: Vec<f64>,
    },
    TruncatedExponential {
        rate: Vec<f64>,
        upper: f64,
        prior: Vec<f64>,
    },
}

impl TryFrom<ModelFile> for ValuationModel {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        let model = match file {
            ModelFile::Uniform { upper, prior } => ValuationModel::uniform(&upper, prior)?,
            ModelFile::TruncatedExponential { rate, upper, prior } => {
                ValuationModel::truncated_exponential(&rate, upper, prior)?
            }
        };
        model.check_prior()?;
        Ok(model)
    }
}

impl TryFrom<ScenarioFile> for Scenario {
    type Error = Error;

    fn try_from(file: ScenarioFile) -> Result<Self> {
        if file.k != file.m.len() || file.k != file.p.len() {
            return Err(validation(format!(
                "k = {} but m has {} entries and p has {}",
                file.k,
                file.m.len(),
                file.p.len()
            )));
        }
        let market = MarketStructure::new(file.m, file.p)?;
        let consumers = file
            .consumers
            .into_iter()
            .map(|c| {
                Ok(Consumer {
                    model: c.model.try_into()?,
                    true_type: c.true_type,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Scenario::new(market, consumers, file.seed)
    }
}
