//! Run configuration: a `key=value` file where every key is optional.

use std::path::{Path, PathBuf};

use crate::ecohydro::preset::{ScenarioPreset, BUILTIN_SCENARIOS};
use crate::error::{Error, Result};
use crate::kvfile::{self, Entry};
use crate::mcmc::{DEFAULT_ITERATIONS, DEFAULT_PROPOSAL_SD};

/// Ensemble sizes compared against the full ensemble in the size study.
pub const DEFAULT_STUDY_SIZES: [usize; 4] = [50, 100, 200, 300];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Built-in scenario name, used unless `preset` is set.
    pub scenario: String,
    /// Custom scenario preset file.
    pub preset: Option<PathBuf>,
    pub years: usize,
    pub spinup_cycles: usize,
    /// LHS ensemble size used to train the surrogate.
    pub members: usize,
    pub iterations: usize,
    pub proposal_sd: f64,
    pub burn_in: usize,
    /// Observation error scale of the cost function, K.
    pub sigma_o: f64,
    /// Noise added to the synthetic observations, K.
    pub obs_noise_sd: f64,
    pub seed: u64,
    /// Seed of the synthetic weather; kept apart from `seed` so that the
    /// scenario climate does not change with the experiment seed.
    pub forcing_seed: u64,
    pub first_obs_hour: usize,
    pub obs_spacing_hours: usize,
    pub bins: usize,
    /// Members drawn from the prior and from the posterior for the skill
    /// evaluation.
    pub eval_members: usize,
    pub size_study: bool,
    pub study_sizes: Vec<usize>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: "site1".into(),
            preset: None,
            years: 8,
            spinup_cycles: 4,
            members: 400,
            iterations: DEFAULT_ITERATIONS,
            proposal_sd: DEFAULT_PROPOSAL_SD,
            burn_in: 0,
            sigma_o: 1.0,
            obs_noise_sd: 0.0,
            seed: 0,
            forcing_seed: 1,
            first_obs_hour: 1,
            obs_spacing_hours: 48,
            bins: crate::diagnostics::DEFAULT_BINS,
            eval_members: 400,
            size_study: false,
            study_sizes: DEFAULT_STUDY_SIZES.to_vec(),
            out_dir: PathBuf::from("twin_out"),
        }
    }
}

fn count(e: &Entry) -> Result<usize> {
    usize::try_from(e.count()?).map_err(|_| e.bad("a count that fits in memory"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for e in kvfile::parse(text)? {
            match e.key.as_str() {
                "scenario" => c.scenario = e.value.clone(),
                "preset" => c.preset = Some(PathBuf::from(&e.value)),
                "years" => c.years = count(&e)?,
                "spinup_cycles" => c.spinup_cycles = count(&e)?,
                "members" => c.members = count(&e)?,
                "iterations" => c.iterations = count(&e)?,
                "proposal_sd" => c.proposal_sd = e.float()?,
                "burn_in" => c.burn_in = count(&e)?,
                "sigma_o" => c.sigma_o = e.float()?,
                "obs_noise_sd" => c.obs_noise_sd = e.float()?,
                "seed" => c.seed = e.count()?,
                "forcing_seed" => c.forcing_seed = e.count()?,
                "first_obs_hour" => c.first_obs_hour = count(&e)?,
                "obs_spacing_hours" => c.obs_spacing_hours = count(&e)?,
                "bins" => c.bins = count(&e)?,
                "eval_members" => c.eval_members = count(&e)?,
                "size_study" => c.size_study = e.flag()?,
                "study_sizes" => {
                    c.study_sizes = e
                        .value
                        .split(',')
                        .map(|s| s.trim().parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| e.bad("a comma separated list of counts"))?
                }
                "out_dir" => c.out_dir = PathBuf::from(&e.value),
                other => {
                    return Err(Error::Config {
                        line: e.line,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config { line: 0, msg });
        let counts = [
            ("years", self.years),
            ("members", self.members),
            ("iterations", self.iterations),
            ("obs_spacing_hours", self.obs_spacing_hours),
            ("bins", self.bins),
            ("eval_members", self.eval_members),
        ];
        for (k, v) in counts {
            if v == 0 {
                return bad(format!("`{k}` must be at least 1"));
            }
        }
        if !(self.sigma_o > 0.0) {
            return bad(format!("`sigma_o` must be > 0, got {}", self.sigma_o));
        }
        if !(self.proposal_sd > 0.0) {
            return bad(format!("`proposal_sd` must be > 0, got {}", self.proposal_sd));
        }
        if !(self.obs_noise_sd >= 0.0) {
            return bad(format!("`obs_noise_sd` must be >= 0, got {}", self.obs_noise_sd));
        }
        if self.burn_in >= self.iterations {
            return bad("`burn_in` must be smaller than `iterations`".into());
        }
        if self.study_sizes.iter().any(|&s| s == 0) {
            return bad("`study_sizes` entries must be at least 1".into());
        }
        if self.preset.is_none() && !BUILTIN_SCENARIOS.contains(&self.scenario.as_str()) {
            return bad(format!(
                "unknown scenario `{}` (expected one of {})",
                self.scenario,
                BUILTIN_SCENARIOS.join(", ")
            ));
        }
        Ok(())
    }

    /// Built-in scenario or the preset file, if one is configured.
    pub fn load_preset(&self) -> Result<ScenarioPreset> {
        match &self.preset {
            Some(p) => ScenarioPreset::from_file(p),
            None => ScenarioPreset::builtin(&self.scenario),
        }
    }
}

/// Reads a run configuration; keys left out take their defaults.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::parse(&text)
}
