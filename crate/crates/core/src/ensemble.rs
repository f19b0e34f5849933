//! Latin hypercube design, parallel execution of the full forward model,
//! the RMSE/cost pair, and the `(theta, RMSE)` training dataset.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ecohydro::{ForcingSeries, ModelState, ScenarioPreset, ToyModel};
use crate::error::{Error, Result};
use crate::param_space::{ParamRanges, ScaledParams, N_PARAMS};
use crate::rtm::{observe_states, ChannelParams, ObservationSeries, N_CHANNELS};
use crate::scalar::{fmt_exact, Real};

pub const DATASET_CSV_HEADER: &str = "member,theta1,theta2,theta3,theta4,rmse_K";

/// Observation error of the cost function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostConfig<T> {
    /// K.
    pub sigma_o: T,
}

impl<T: Real> CostConfig<T> {
    pub fn new(sigma_o: T) -> Result<Self> {
        if sigma_o > T::zero() && sigma_o.is_finite() {
            Ok(Self { sigma_o })
        } else {
            Err(Error::Invalid(format!("sigma_o must be positive, got {sigma_o}")))
        }
    }
}

impl<T: Real> Default for CostConfig<T> {
    fn default() -> Self {
        Self { sigma_o: T::one() }
    }
}

/// Latin hypercube design on `[0, 1]^n_dims`: each dimension has exactly one
/// point in every bin `[k/n, (k+1)/n)`.
pub fn lhs_unit(n_members: usize, n_dims: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_members as f64;
    let mut points = vec![vec![0.0; n_dims]; n_members];
    let mut perm: Vec<usize> = (0..n_members).collect();
    for d in 0..n_dims {
        perm.shuffle(&mut rng);
        for (k, point) in points.iter_mut().enumerate() {
            let u: f64 = rng.random();
            point[d] = (perm[k] as f64 + u) / n;
        }
    }
    points
}

/// Latin hypercube design of scaled parameter vectors.
pub fn lhs_sample<T: Real>(n_members: usize, n_dims: usize, seed: u64) -> Result<Vec<ScaledParams<T>>> {
    if n_members == 0 {
        return Err(Error::Invalid("LHS needs at least one member".into()));
    }
    if n_dims != N_PARAMS {
        return Err(Error::Invalid(format!("LHS dimension must be {N_PARAMS}, got {n_dims}")));
    }
    lhs_unit(n_members, n_dims, seed)
        .into_iter()
        .map(|p| ScaledParams::from_f64([p[0], p[1], p[2], p[3]]))
        .collect()
}

/// Root-mean-square difference pooled over every (time, channel) pair.
pub fn rmse<T: Real>(sim: &ObservationSeries<T>, obs: &ObservationSeries<T>) -> Result<T> {
    if sim.hours != obs.hours {
        return Err(Error::Alignment(format!(
            "timestamps differ ({} vs {} entries)",
            sim.len(),
            obs.len()
        )));
    }
    if sim.is_empty() {
        return Err(Error::Alignment("empty series".into()));
    }
    let mut acc = T::zero();
    for (a, b) in sim.tb.iter().zip(&obs.tb) {
        for c in 0..N_CHANNELS {
            let d = a[c] - b[c];
            acc = acc + d * d;
        }
    }
    let count = T::lit((sim.len() * N_CHANNELS) as f64);
    Ok((acc / count).sqrt())
}

/// Cost `C = exp(-RMSE / sigma_o)`; larger is a better fit.
pub fn cost<T: Real>(rmse_value: T, cfg: &CostConfig<T>) -> T {
    (-rmse_value / cfg.sigma_o).exp()
}

/// The full forward model of one scenario: land surface model, forcing,
/// observation operator and observation schedule.
#[derive(Debug, Clone)]
pub struct FullModel<T> {
    pub scenario: String,
    pub model: ToyModel<T>,
    pub ranges: ParamRanges<T>,
    pub forcing: ForcingSeries<T>,
    pub channels: Vec<ChannelParams<T>>,
    pub obs_hours: Vec<usize>,
    pub spinup_cycles: usize,
}

/// What one member run produces at the observation times.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberOutput<T> {
    pub tb: ObservationSeries<T>,
    pub states: Vec<ModelState<T>>,
}

impl<T: Real> FullModel<T> {
    pub fn new(
        preset: &ScenarioPreset,
        forcing: ForcingSeries<T>,
        obs_hours: Vec<usize>,
        spinup_cycles: usize,
    ) -> Result<Self> {
        let model = ToyModel::from_preset(preset)?;
        let defaults = crate::param_space::PhysicalParams {
            ks: T::lit(preset.defaults.ks),
            n: T::lit(preset.defaults.n),
            vmax0: T::lit(preset.defaults.vmax0),
            es: T::lit(preset.defaults.es),
        };
        let ranges = ParamRanges::with_defaults(defaults)?;
        Ok(Self {
            scenario: preset.name.clone(),
            model,
            ranges,
            forcing,
            channels: preset.channels.iter().map(|c| c.cast()).collect(),
            obs_hours,
            spinup_cycles,
        })
    }

    /// Runs the model for `theta` and observes it at the schedule, adding
    /// noise of standard deviation `noise_sd` drawn from `rng`.
    pub fn run<R: Rng + ?Sized>(&self, theta: &ScaledParams<T>, noise_sd: T, rng: &mut R) -> Result<MemberOutput<T>> {
        let physical = self.ranges.denormalize(theta)?;
        let states = self
            .model
            .simulate_at(&physical, &self.forcing, self.spinup_cycles, &self.obs_hours)?;
        let tb = observe_states(&states, &self.obs_hours, &self.channels, noise_sd, rng)?;
        Ok(MemberOutput { tb, states })
    }

    /// Noiseless simulated observations for `theta`.
    pub fn simulate_obs(&self, theta: &ScaledParams<T>) -> Result<ObservationSeries<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(self.run(theta, T::zero(), &mut rng)?.tb)
    }
}

/// Runs `f(i, rng_i)` for every member on a pool of `workers` threads, with
/// member `i` drawing from a private stream seeded by `master_seed ^ i`.
/// Results are returned in member order whatever the scheduling.
pub fn par_members<O, F>(n: usize, workers: usize, master_seed: u64, f: F) -> Result<Vec<O>>
where
    O: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> O + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ i as u64);
                f(i, &mut rng)
            })
            .collect()
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRecord<T> {
    pub member: usize,
    pub theta: ScaledParams<T>,
    /// K.
    pub rmse: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemberFailure {
    pub member: usize,
    pub reason: String,
}

/// Training pairs of scaled parameters and RMSE.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleDataset<T> {
    pub records: Vec<EnsembleRecord<T>>,
    pub scenario: String,
    pub seed: u64,
    /// Members that failed; non-empty means the dataset is partial.
    pub failures: Vec<MemberFailure>,
}

impl<T: Real> EnsembleDataset<T> {
    pub fn new(records: Vec<EnsembleRecord<T>>, scenario: impl Into<String>, seed: u64) -> Result<Self> {
        let ds = Self {
            records,
            scenario: scenario.into(),
            seed,
            failures: Vec::new(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn thetas(&self) -> Vec<ScaledParams<T>> {
        self.records.iter().map(|r| r.theta).collect()
    }

    pub fn rmses(&self) -> Vec<T> {
        self.records.iter().map(|r| r.rmse).collect()
    }

    pub fn rmse_range(&self) -> (T, T) {
        self.records.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), r| {
            (lo.min(r.rmse), hi.max(r.rmse))
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for r in &self.records {
            if !(r.rmse.is_finite() && r.rmse >= T::zero()) {
                return Err(Error::Invalid(format!("member {} has invalid RMSE {}", r.member, r.rmse)));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 + self.records.len() * 128);
        let _ = writeln!(out, "# scenario={}", self.scenario);
        let _ = writeln!(out, "# seed={}", self.seed);
        for f in &self.failures {
            let _ = writeln!(out, "# failed member {}: {}", f.member, f.reason.replace('\n', " "));
        }
        out.push_str(DATASET_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{}", r.member);
            for t in r.theta.as_array() {
                let _ = write!(out, ",{}", fmt_exact(*t));
            }
            let _ = writeln!(out, ",{}", fmt_exact(r.rmse));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut scenario = String::new();
        let mut seed = 0u64;
        let mut header_seen = false;
        let mut records = Vec::new();
        let n_lines = text.lines().count();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let parse_err = |msg: String| Error::Parse { line: line_no, msg };
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                if let Some(v) = meta.strip_prefix("scenario=") {
                    scenario = v.to_string();
                } else if let Some(v) = meta.strip_prefix("seed=") {
                    seed = v.parse().map_err(|_| parse_err(format!("bad seed `{v}`")))?;
                }
                continue;
            }
            if !header_seen {
                if line.trim() != DATASET_CSV_HEADER {
                    return Err(parse_err(format!("expected header `{DATASET_CSV_HEADER}`")));
                }
                header_seen = true;
                continue;
            }
            if line_no == n_lines && !text.ends_with('\n') {
                return Err(parse_err("truncated final line".into()));
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 6 {
                return Err(parse_err(format!("expected 6 fields, found {}", fields.len())));
            }
            let member = fields[0]
                .parse::<usize>()
                .map_err(|_| parse_err(format!("bad member index `{}`", fields[0])))?;
            let mut vals = [T::zero(); 5];
            for (k, v) in vals.iter_mut().enumerate() {
                *v = fields[k + 1]
                    .parse::<T>()
                    .map_err(|_| parse_err(format!("bad number `{}`", fields[k + 1])))?;
            }
            let theta = ScaledParams::new([vals[0], vals[1], vals[2], vals[3]]).map_err(|e| parse_err(e.to_string()))?;
            if !(vals[4].is_finite() && vals[4] >= T::zero()) {
                return Err(parse_err(format!("invalid RMSE `{}`", fields[5])));
            }
            records.push(EnsembleRecord {
                member,
                theta,
                rmse: vals[4],
            });
        }
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            records,
            scenario,
            seed,
            failures: Vec::new(),
        })
    }
}

pub fn save_dataset<T: Real>(ds: &EnsembleDataset<T>, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(ds.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_dataset<T: Real>(path: &Path) -> Result<EnsembleDataset<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EnsembleDataset::parse_csv(&text)
}

/// Runs every member through the full model and scores it against `obs`.
///
/// Members are noiseless; failures are recorded with their index and the
/// dataset is returned partial rather than aborting.
pub fn run_ensemble<T: Real>(
    thetas: &[ScaledParams<T>],
    full: &FullModel<T>,
    obs: &ObservationSeries<T>,
    workers: usize,
    master_seed: u64,
) -> Result<EnsembleDataset<T>> {
    let results = par_members(thetas.len(), workers, master_seed, |i, rng| {
        full.run(&thetas[i], T::zero(), rng).and_then(|out| rmse(&out.tb, obs))
    })?;
    let mut records = Vec::with_capacity(thetas.len());
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => records.push(EnsembleRecord {
                member: i,
                theta: thetas[i],
                rmse: v,
            }),
            Err(e) => failures.push(MemberFailure {
                member: i,
                reason: e.to_string(),
            }),
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(EnsembleDataset {
        records,
        scenario: full.scenario.clone(),
        seed: master_seed,
        failures,
    })
}
