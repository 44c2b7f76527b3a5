use std::path::{Path, PathBuf};

use popcode::checks::VerifyConfig;
use popcode::fit::PathsConfig;
use popcode::neuron::{NeuronConfig, SweepRanges};
use popcode::repro::CompareConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 1,000 trials per state.
    Desk,
    /// 10,000 trials per state.
    Paper,
}

impl Profile {
    pub fn trials(self) -> usize {
        match self {
            Profile::Desk => 1_000,
            Profile::Paper => 10_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub profile: Option<Profile>,
    /// Overrides the profile's trial count.
    pub trials: Option<usize>,
    /// Directory holding a previous sweep, read by `paths`.
    pub input: Option<PathBuf>,
}

/// Everything a run reads, one section per module.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub sweep: SweepRanges,
    pub neuron: NeuronConfig,
    pub paths: PathsConfig,
    pub compare: CompareConfig,
    pub verify: VerifyConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }

    /// Applies command-line overrides and the profile's trial count.
    pub fn resolve(mut self, seed: Option<u64>, out: Option<PathBuf>, profile: Option<Profile>) -> Self {
        if seed.is_some() {
            self.run.seed = seed;
        }
        if out.is_some() {
            self.run.out = out;
        }
        if profile.is_some() {
            self.run.profile = profile;
        }
        let profile = *self.run.profile.get_or_insert(Profile::Desk);
        self.neuron.sim.n_trials = self.run.trials.unwrap_or(profile.trials());
        self
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.run.seed.ok_or_else(|| CliError::validation("a seed is required (--seed or [run] seed)"))
    }

    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.run.out.clone().unwrap_or_else(|| PathBuf::from("results"));
        std::fs::create_dir_all(&dir).map_err(|e| CliError::validation(format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }

    /// SHA-256 of the resolved configuration's canonical JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_sets_trials_unless_overridden() {
        let cfg = RunConfig::default().resolve(Some(3), None, Some(Profile::Paper));
        assert_eq!(cfg.neuron.sim.n_trials, 10_000);
        assert_eq!(cfg.seed().unwrap(), 3);
        let mut base = RunConfig::default();
        base.run.trials = Some(250);
        assert_eq!(base.resolve(None, None, None).neuron.sim.n_trials, 250);
    }

    #[test]
    fn seed_is_required_and_flags_win() {
        assert!(RunConfig::default().resolve(None, None, None).seed().is_err());
        let cfg: RunConfig = toml::from_str("[run]\nseed = 5\nprofile = \"paper\"\n").unwrap();
        let cfg = cfg.resolve(Some(9), None, Some(Profile::Desk));
        assert_eq!(cfg.run.seed, Some(9));
        assert_eq!(cfg.neuron.sim.n_trials, 1_000);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default().resolve(Some(1), None, None);
        let b = RunConfig::default().resolve(Some(1), None, None);
        let c = RunConfig::default().resolve(Some(2), None, None);
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        let back: RunConfig = toml::from_str(&toml::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }
}
