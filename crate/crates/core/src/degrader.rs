//! A configured random mixture over degradations, applied per call.

use std::collections::BTreeMap;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::degradations::{self, DegradationId, DegradationOutcome, DegradationParams};
use crate::error::{Error, Result};
use crate::error_measure::ErrorProfile;
use crate::note::Excerpt;
use crate::random::RandomSource;

/// Tolerance on `clean + sum(proportions) == 1` for profiles.
pub const PROFILE_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegraderConfig {
    /// Probability that an excerpt is returned undegraded.
    pub clean_proportion: f64,
    /// Relative weight of each degradation; missing entries weigh 0.
    pub weights: BTreeMap<DegradationId, f64>,
    /// Per-degradation parameters; missing entries use the defaults.
    pub params: BTreeMap<DegradationId, DegradationParams>,
    pub seed: u64,
}

impl Default for DegraderConfig {
    fn default() -> Self {
        DegraderConfig {
            clean_proportion: 1.0 / 9.0,
            weights: DegradationId::ALL.iter().map(|&d| (d, 1.0 / 8.0)).collect(),
            params: BTreeMap::new(),
            seed: 0,
        }
    }
}

impl DegraderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.clean_proportion) {
            return Err(Error::Config(format!(
                "clean_proportion {} outside [0, 1]",
                self.clean_proportion
            )));
        }
        for (id, w) in &self.weights {
            if *id == DegradationId::None {
                return Err(Error::Config("`none` cannot carry a degradation weight".into()));
            }
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::Config(format!("weight for {id} must be finite and nonnegative")));
            }
        }
        if self.clean_proportion < 1.0 && !self.weights.values().any(|w| *w > 0.0) {
            return Err(Error::Config("degradation weights are all zero".into()));
        }
        for (id, p) in &self.params {
            p.validate().map_err(|e| Error::Config(format!("{id}: {e}")))?;
        }
        Ok(())
    }

    /// Weights over [`DegradationId::ALL`], summing to 1 (all zero if no
    /// weight is positive).
    pub fn normalized_weights(&self) -> [f64; 8] {
        let mut out = [0.0; 8];
        for (i, id) in DegradationId::ALL.iter().enumerate() {
            out[i] = self.weights.get(id).copied().unwrap_or(0.0);
        }
        let total: f64 = out.iter().sum();
        if total > 0.0 {
            out.iter_mut().for_each(|w| *w /= total);
        }
        out
    }

    pub fn params_for(&self, id: DegradationId) -> DegradationParams {
        self.params.get(&id).cloned().unwrap_or_default()
    }

    /// Clean proportion and weights taken from a measured profile.
    pub fn from_profile(
        profile: &ErrorProfile,
        params: BTreeMap<DegradationId, DegradationParams>,
        seed: u64,
    ) -> Result<Self> {
        let total = profile.clean + profile.proportions.iter().sum::<f64>();
        if (total - 1.0).abs() > PROFILE_SUM_TOLERANCE {
            return Err(Error::Profile {
                field: "clean".into(),
                message: format!("proportions sum to {total}, expected 1"),
            });
        }
        let config = DegraderConfig {
            clean_proportion: profile.clean.clamp(0.0, 1.0),
            weights: DegradationId::ALL
                .iter()
                .zip(profile.proportions)
                .map(|(&id, p)| (id, p))
                .collect(),
            params,
            seed,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Applies a random degradation (or none) to each excerpt it is given.
///
/// Each call draws once to decide clean vs. degraded, then draws a
/// degradation by weight. An inapplicable degradation is dropped and the
/// draw repeated over the remaining weights; if none applies, the excerpt is
/// returned clean. The label always names what was actually applied.
#[derive(Debug, Clone)]
pub struct Degrader {
    config: DegraderConfig,
    weights: [f64; 8],
    params: [DegradationParams; 8],
    rng: RandomSource,
}

impl Degrader {
    pub fn new(config: DegraderConfig) -> Result<Self> {
        config.validate()?;
        let rng = RandomSource::new(config.seed);
        Ok(Degrader {
            weights: config.normalized_weights(),
            params: DegradationId::ALL.map(|id| config.params_for(id)),
            config,
            rng,
        })
    }

    pub fn from_profile(
        profile: &ErrorProfile,
        params: BTreeMap<DegradationId, DegradationParams>,
        seed: u64,
    ) -> Result<Self> {
        Degrader::new(DegraderConfig::from_profile(profile, params, seed)?)
    }

    pub fn config(&self) -> &DegraderConfig {
        &self.config
    }

    /// Degrades using the degrader's own random stream.
    pub fn degrade(&mut self, excerpt: &Excerpt) -> DegradationOutcome {
        mixture(
            self.config.clean_proportion,
            &self.weights,
            &self.params,
            excerpt,
            &mut self.rng,
        )
    }

    /// Degrades using a caller-supplied random stream, leaving the internal
    /// one untouched.
    pub fn degrade_with(&self, excerpt: &Excerpt, rng: &mut RandomSource) -> DegradationOutcome {
        mixture(self.config.clean_proportion, &self.weights, &self.params, excerpt, rng)
    }
}

fn mixture(
    clean_proportion: f64,
    weights: &[f64; 8],
    params: &[DegradationParams; 8],
    excerpt: &Excerpt,
    rng: &mut RandomSource,
) -> DegradationOutcome {
    if rng.unit() < clean_proportion {
        return DegradationOutcome::clean(excerpt);
    }
    let mut weights = *weights;
    while let Some(k) = rng.weighted(&weights) {
        match degradations::apply(DegradationId::ALL[k], excerpt, &params[k], rng) {
            Ok(outcome) => return outcome,
            Err(e) => {
                debug!("{e}; drawing another degradation");
                weights[k] = 0.0;
            }
        }
    }
    DegradationOutcome::clean(excerpt)
}
