//! Run configuration file (TOML). Every key is optional; unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::SynthConfig;
use crate::error::{Error, Result};
use crate::ipmodel::{Hyperparams, ModelKind};
use crate::predict::{CvConfig, LogRegConfig, DEFAULT_KAPPA_SAMPLES};
use crate::sampler::SamplerConfig;
use crate::topics::LdaConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    pub samples: usize,
    pub folds: usize,
    /// Model kinds compared by cross-validation.
    pub cv_kinds: Vec<ModelKind>,
    pub tune_l1: bool,
    pub logreg: LogRegConfig,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_KAPPA_SAMPLES,
            folds: 5,
            cv_kinds: ModelKind::ALL.to_vec(),
            tune_l1: true,
            logreg: LogRegConfig::default(),
        }
    }
}

/// Default file locations, used when a subcommand flag is omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub topics: Option<PathBuf>,
    pub mixtures: Option<PathBuf>,
    pub fit: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kind: ModelKind,
    pub seed: u64,
    pub lda: LdaConfig,
    pub hyper: Hyperparams,
    pub sampler: SamplerConfig,
    pub predict: PredictConfig,
    pub synth: SynthConfig,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::RandomUtility,
            seed: 0,
            lda: LdaConfig::default(),
            hyper: Hyperparams::default(),
            sampler: SamplerConfig::default(),
            predict: PredictConfig::default(),
            synth: SynthConfig::default(),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.lda.validate()?;
        self.hyper.validate()?;
        self.sampler.validate()?;
        self.synth.validate()?;
        self.predict.logreg.validate()?;
        if self.predict.samples == 0 {
            return Err(Error::invalid("predict.samples must be positive"));
        }
        Ok(())
    }

    /// Sampler settings with the run seed applied.
    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig { seed: self.seed, ..self.sampler }
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            kinds: self.predict.cv_kinds.clone(),
            folds: self.predict.folds,
            kappa_samples: self.predict.samples,
            tune_l1: self.predict.tune_l1,
            logreg: self.predict.logreg,
            lda: self.lda,
            sampler: self.sampler,
            hyper: self.hyper,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.lda.num_topics, 30);
        assert_eq!(cfg.lda.alpha, 0.1);
        assert_eq!(cfg.lda.beta, 0.001);
        assert_eq!(cfg.hyper.lambda, 1.0);
        assert_eq!(cfg.hyper.sigma_kappa, 4.0);
        assert_eq!(cfg.hyper.eta, 1.0);
        assert_eq!(cfg.hyper.xi, 1.0);
        assert_eq!(cfg.sampler.gibbs_iters, 2000);
    }

    #[test]
    fn partial_tables_merge_with_defaults() {
        let cfg = RunConfig::from_toml("kind = \"issues\"\nseed = 9\n[lda]\nnum_topics = 5\n[hyper]\neta = 0.5\n").unwrap();
        assert_eq!(cfg.kind, ModelKind::Issues);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.lda.num_topics, 5);
        assert_eq!(cfg.lda.iters, LdaConfig::default().iters);
        assert_eq!(cfg.hyper.eta, 0.5);
        assert_eq!(cfg.sampler_config().seed, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("topics = 3").is_err());
        assert!(RunConfig::from_toml("[lda]\nk = 3").is_err());
        assert!(RunConfig::from_toml("[hyper]\nlambda = -1.0").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
