//! Stages of the twin experiment. Each stage is a thin composition of the
//! library operations; artifacts are handed between stages as files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use crate::diagnostics::{
    correlation_csv, ensemble_size_study, histograms_csv, pairwise_correlation, scores_csv, sensitivity_index,
    size_study_csv, EvalScores, ScoreComparison, SizeStudyConfig, SizeStudyRow,
};
use crate::ecohydro::preset::ScenarioPreset;
use crate::ecohydro::{generate_forcing, ModelState, HOURS_PER_YEAR};
use crate::ensemble::{
    lhs_sample, load_dataset, par_members, rmse, run_ensemble, save_dataset, CostConfig, EnsembleDataset, FullModel,
    MemberOutput,
};
use crate::error::{Error, Result};
use crate::mcmc::{chain_stats, metropolis_hastings, Chain, MarginalStats, McmcConfig};
use crate::param_space::{ScaledParams, N_PARAMS, PARAM_NAMES, TRUTH_THETA};
use crate::rtm::{observation_hours, ObservationSeries};
use crate::scalar::fmt_exact;
use crate::surrogate::{self, r_squared, GpSurrogate};

pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const TRUTH_FILE: &str = "truth_states.csv";
pub const ENSEMBLE_FILE: &str = "ensemble.csv";
pub const SURROGATE_FILE: &str = "surrogate.txt";
pub const CHAIN_FILE: &str = "chain.csv";
pub const HISTOGRAMS_FILE: &str = "histograms.csv";
pub const CORRELATION_FILE: &str = "correlation.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const SKILL_FILE: &str = "skill_members.csv";
pub const SIZE_STUDY_FILE: &str = "size_study.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Leading years of observations used for calibration under a period split.
pub const SPLIT_TRAIN_YEARS: usize = 3;

/// Variables scored by the skill evaluation.
pub const EVAL_VARIABLES: [&str; 4] = ["tb", "lai", "surface_sm", "root_zone_sm"];

/// Cost function identifier stored with surrogate chains.
pub const SURROGATE_COST_ID: &str = "gp-matern52";

/// Per-stage seeds derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub noise: u64,
    pub design: u64,
    pub fit: u64,
    pub mcmc: u64,
    pub prior_draws: u64,
    pub size_study: u64,
}

impl Seeds {
    pub fn from_master(seed: u64) -> Self {
        let s = |k: u64| seed.wrapping_mul(6).wrapping_add(k);
        Self {
            noise: s(0),
            design: s(1),
            fit: s(2),
            mcmc: s(3),
            prior_draws: s(4),
            size_study: s(5),
        }
    }
}

/// Execution settings that never change an artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub workers: usize,
    /// Calibrate on the leading years only and evaluate on the rest.
    pub split: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: 1, split: false }
    }
}

fn in_stage<R>(stage: &'static str, f: impl FnOnce() -> Result<R>) -> Result<R> {
    f().map_err(|e| e.in_stage(stage))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Synthetic truth, its observations and the forward models that are
/// compared against them.
#[derive(Debug, Clone)]
pub struct Twin {
    pub preset: ScenarioPreset,
    /// Truth run at every observation time, observations with noise.
    pub truth: MemberOutput<f64>,
    /// Forward model observed at the calibration times.
    pub calib: FullModel<f64>,
    pub obs: ObservationSeries<f64>,
    /// Forward model observed at the evaluation times.
    pub eval: FullModel<f64>,
    pub eval_obs: ObservationSeries<f64>,
    pub eval_truth: Vec<ModelState<f64>>,
}

pub fn build_twin(cfg: &RunConfig, split: bool) -> Result<Twin> {
    let preset = cfg.load_preset()?;
    let forcing = generate_forcing::<f64>(&preset, cfg.years, cfg.forcing_seed)?;
    let hours = observation_hours(forcing.len(), cfg.first_obs_hour, cfg.obs_spacing_hours);
    if hours.is_empty() {
        return Err(Error::Invalid("observation schedule is empty".into()));
    }
    let cut = if split {
        if cfg.years <= SPLIT_TRAIN_YEARS {
            return Err(Error::Invalid(format!(
                "a period split needs more than {SPLIT_TRAIN_YEARS} years, got {}",
                cfg.years
            )));
        }
        SPLIT_TRAIN_YEARS * HOURS_PER_YEAR
    } else {
        usize::MAX
    };
    let all = FullModel::new(&preset, forcing, hours, cfg.spinup_cycles)?;
    let mut rng = ChaCha8Rng::seed_from_u64(Seeds::from_master(cfg.seed).noise);
    let truth = all.run(&ScaledParams::truth(), cfg.obs_noise_sd, &mut rng)?;
    let calib_keep = |h: usize| h < cut;
    let eval_keep = |h: usize| !split || h >= cut;
    let obs = truth.tb.filter_hours(calib_keep);
    let eval_obs = truth.tb.filter_hours(eval_keep);
    let eval_truth = truth
        .tb
        .hours
        .iter()
        .zip(&truth.states)
        .filter(|(h, _)| eval_keep(**h))
        .map(|(_, s)| *s)
        .collect();
    let calib = FullModel {
        obs_hours: obs.hours.clone(),
        ..all.clone()
    };
    let eval = FullModel {
        obs_hours: eval_obs.hours.clone(),
        ..all
    };
    Ok(Twin {
        preset,
        truth,
        calib,
        obs,
        eval,
        eval_obs,
        eval_truth,
    })
}

pub fn truth_csv(twin: &Twin) -> String {
    let mut out = String::from("hour,lai,w1,w2,w3,c_leaf,c_stem,c_root\n");
    for (h, s) in twin.truth.tb.hours.iter().zip(&twin.truth.states) {
        let _ = writeln!(
            out,
            "{h},{},{},{},{},{},{},{}",
            fmt_exact(s.lai),
            fmt_exact(s.w[0]),
            fmt_exact(s.w[1]),
            fmt_exact(s.w[2]),
            fmt_exact(s.c_leaf),
            fmt_exact(s.c_stem),
            fmt_exact(s.c_root)
        );
    }
    out
}

/// Scores the LHS training design against the calibration observations.
pub fn run_design(cfg: &RunConfig, twin: &Twin, workers: usize) -> Result<EnsembleDataset<f64>> {
    let seed = Seeds::from_master(cfg.seed).design;
    let thetas = lhs_sample(cfg.members, N_PARAMS, seed)?;
    let data = run_ensemble(&thetas, &twin.calib, &twin.obs, workers, seed)?;
    for f in &data.failures {
        log::warn!("member {} failed: {}", f.member, f.reason);
    }
    Ok(data)
}

pub fn fit_surrogate(cfg: &RunConfig, data: &EnsembleDataset<f64>) -> Result<GpSurrogate<f64>> {
    if data.is_partial() {
        log::warn!("fitting on a partial ensemble ({} failed members)", data.failures.len());
    }
    surrogate::fit(data, Seeds::from_master(cfg.seed).fit)
}

pub fn mcmc_config(cfg: &RunConfig) -> McmcConfig<f64> {
    McmcConfig {
        iterations: cfg.iterations,
        proposal_sd: cfg.proposal_sd,
        initial_theta: ScaledParams::center(),
        seed: Seeds::from_master(cfg.seed).mcmc,
        burn_in: cfg.burn_in,
    }
}

pub fn sample_posterior(cfg: &RunConfig, gp: &GpSurrogate<f64>) -> Result<Chain<f64>> {
    let cost = CostConfig::new(cfg.sigma_o)?;
    metropolis_hastings(|t| gp.predict_cost(t, &cost), &mcmc_config(cfg), SURROGATE_COST_ID)
}

/// Posterior summaries of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnosis {
    /// Post-burn-in marginals.
    pub marginals: Vec<MarginalStats<f64>>,
    /// Marginals over every stored iteration.
    pub full_marginals: Vec<MarginalStats<f64>>,
    pub sensitivity: [f64; N_PARAMS],
    pub correlation: [[f64; N_PARAMS]; N_PARAMS],
    pub zero_variance: [bool; N_PARAMS],
    pub acceptance_rate: f64,
}

pub fn diagnose(cfg: &RunConfig, chain: &Chain<f64>) -> Result<Diagnosis> {
    let marginals = chain_stats(chain, cfg.bins, false)?;
    let full_marginals = chain_stats(chain, cfg.bins, true)?;
    let mut sensitivity = [0.0; N_PARAMS];
    for (d, s) in sensitivity.iter_mut().enumerate() {
        *s = sensitivity_index(chain, d, cfg.bins)?;
    }
    let (correlation, zero_variance) = pairwise_correlation(chain.samples())?;
    Ok(Diagnosis {
        marginals,
        full_marginals,
        sensitivity,
        correlation,
        zero_variance,
        acceptance_rate: chain.acceptance_rate(),
    })
}

/// Forward runs of a parameter ensemble over the evaluation period.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillEnsemble {
    pub thetas: Vec<ScaledParams<f64>>,
    /// Pooled brightness temperature RMSE per member, K.
    pub tb_rmse: Vec<f64>,
    /// `series[v][member]`, one series per entry of [`EVAL_VARIABLES`].
    pub series: Vec<Vec<Vec<f64>>>,
    pub failures: usize,
}

impl SkillEnsemble {
    pub fn median_tb_rmse(&self) -> f64 {
        crate::mcmc::median(&self.tb_rmse)
    }
}

fn variable_series(tb: &ObservationSeries<f64>, states: &[ModelState<f64>]) -> Vec<Vec<f64>> {
    vec![
        tb.tb.iter().flatten().copied().collect(),
        states.iter().map(|s| s.lai).collect(),
        states.iter().map(|s| s.w[0]).collect(),
        states.iter().map(|s| s.root_zone_moisture()).collect(),
    ]
}

/// Reference series of the truth over the evaluation period.
pub fn truth_series(twin: &Twin) -> Vec<Vec<f64>> {
    variable_series(&twin.eval_obs, &twin.eval_truth)
}

pub fn run_skill_ensemble(twin: &Twin, thetas: &[ScaledParams<f64>], workers: usize, seed: u64) -> Result<SkillEnsemble> {
    let runs = par_members(thetas.len(), workers, seed, |i, rng| {
        let out = twin.eval.run(&thetas[i], 0.0, rng)?;
        let r = rmse(&out.tb, &twin.eval_obs)?;
        Ok::<_, Error>((r, variable_series(&out.tb, &out.states)))
    })?;
    let mut skill = SkillEnsemble {
        thetas: Vec::with_capacity(thetas.len()),
        tb_rmse: Vec::with_capacity(thetas.len()),
        series: vec![Vec::with_capacity(thetas.len()); EVAL_VARIABLES.len()],
        failures: 0,
    };
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Ok((r, vars)) => {
                skill.thetas.push(thetas[i]);
                skill.tb_rmse.push(r);
                for (dst, v) in skill.series.iter_mut().zip(vars) {
                    dst.push(v);
                }
            }
            Err(e) => {
                log::warn!("evaluation member {i} failed: {e}");
                skill.failures += 1;
            }
        }
    }
    if skill.thetas.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(skill)
}

/// `n` states spread evenly over the post-burn-in chain.
pub fn posterior_draws(chain: &Chain<f64>, n: usize) -> Vec<ScaledParams<f64>> {
    let s = chain.samples();
    (0..n).map(|k| s[((2 * k + 1) * s.len()) / (2 * n)]).collect()
}

/// Prior-drawn and posterior-drawn ensembles with their score comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub prior: SkillEnsemble,
    pub posterior: SkillEnsemble,
    pub scores: Vec<ScoreComparison<f64>>,
}

pub fn prior_draws(cfg: &RunConfig) -> Result<Vec<ScaledParams<f64>>> {
    lhs_sample(cfg.eval_members, N_PARAMS, Seeds::from_master(cfg.seed).prior_draws)
}

pub fn compare_skill(twin: &Twin, prior: SkillEnsemble, posterior: SkillEnsemble) -> Result<Evaluation> {
    let truth = truth_series(twin);
    let mut scores = Vec::with_capacity(EVAL_VARIABLES.len());
    for (v, name) in EVAL_VARIABLES.iter().enumerate() {
        scores.push(ScoreComparison {
            variable: name.to_string(),
            uniform: EvalScores::compute(&prior.series[v], &truth[v])?,
            mcmc: EvalScores::compute(&posterior.series[v], &truth[v])?,
        });
    }
    Ok(Evaluation { prior, posterior, scores })
}

pub fn evaluate(cfg: &RunConfig, twin: &Twin, chain: &Chain<f64>, workers: usize) -> Result<Evaluation> {
    let seeds = Seeds::from_master(cfg.seed);
    let prior = run_skill_ensemble(twin, &prior_draws(cfg)?, workers, seeds.prior_draws)?;
    let posterior = run_skill_ensemble(twin, &posterior_draws(chain, cfg.eval_members), workers, seeds.prior_draws)?;
    compare_skill(twin, prior, posterior)
}

pub fn skill_csv(ev: &Evaluation) -> String {
    let mut out = String::from("draw,member,theta1,theta2,theta3,theta4,tb_rmse\n");
    for (label, sk) in [("prior", &ev.prior), ("posterior", &ev.posterior)] {
        for (i, (t, r)) in sk.thetas.iter().zip(&sk.tb_rmse).enumerate() {
            let _ = write!(out, "{label},{i}");
            for v in t.as_array() {
                let _ = write!(out, ",{}", fmt_exact(*v));
            }
            let _ = writeln!(out, ",{}", fmt_exact(*r));
        }
    }
    out
}

pub fn run_size_study(cfg: &RunConfig, twin: &Twin, reference: &Chain<f64>, workers: usize) -> Result<Vec<SizeStudyRow<f64>>> {
    let seeds = Seeds::from_master(cfg.seed);
    let study = SizeStudyConfig {
        sizes: cfg.study_sizes.clone(),
        cost: CostConfig::new(cfg.sigma_o)?,
        mcmc: mcmc_config(cfg),
        fit_seed: seeds.fit,
        workers,
        bins: cfg.bins,
    };
    ensemble_size_study(&twin.calib, &twin.obs, reference, &study, seeds.size_study)
}

/// Wall-clock breakdown of a run. Kept out of every artifact so that reruns
/// stay byte-identical.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timing {
    pub stages: Vec<(&'static str, f64)>,
    /// Full forward model, seconds per member run.
    pub model_seconds_per_run: f64,
    /// Surrogate cost evaluations, seconds per 10^5 evaluations.
    pub surrogate_seconds_per_1e5: f64,
}

impl Timing {
    fn record(&mut self, stage: &'static str, t: Instant) {
        self.stages.push((stage, t.elapsed().as_secs_f64()));
    }

    pub fn stage(&self, name: &str) -> Option<f64> {
        self.stages.iter().find(|(s, _)| *s == name).map(|(_, v)| *v)
    }

    /// Cost-evaluation throughput of the surrogate relative to the full model.
    pub fn speedup(&self) -> f64 {
        self.model_seconds_per_run / (self.surrogate_seconds_per_1e5 / 1e5)
    }

    /// Time of an MCMC run on the full model over the time of the surrogate
    /// pipeline (ensemble, fit and sampling).
    pub fn pipeline_speedup(&self, iterations: usize) -> f64 {
        let pipeline: f64 = ["ensemble", "fit", "sample"].iter().filter_map(|s| self.stage(s)).sum();
        iterations as f64 * self.model_seconds_per_run / pipeline
    }

    pub fn report(&self, iterations: usize) -> String {
        let mut out = String::new();
        for (s, v) in &self.stages {
            let _ = writeln!(out, "stage {s}: {v:.3} s");
        }
        let _ = writeln!(out, "full model: {:.4} s per run", self.model_seconds_per_run);
        let _ = writeln!(out, "surrogate: {:.4} s per 1e5 evaluations", self.surrogate_seconds_per_1e5);
        let _ = writeln!(out, "cost evaluation speedup: {:.0}x", self.speedup());
        let _ = writeln!(out, "extrapolated pipeline speedup over {iterations} full-model iterations: {:.0}x", self.pipeline_speedup(iterations));
        out
    }
}

/// Everything the twin experiment produced.
#[derive(Debug, Clone)]
pub struct TwinReport {
    pub config: RunConfig,
    pub split: bool,
    pub dataset: EnsembleDataset<f64>,
    pub surrogate: GpSurrogate<f64>,
    pub chain: Chain<f64>,
    pub diagnosis: Diagnosis,
    pub evaluation: Evaluation,
    /// Surrogate R² on the prior-drawn evaluation ensemble; only defined when
    /// calibration and evaluation use the same observations.
    pub validation_r2: Option<f64>,
    pub size_study: Option<Vec<SizeStudyRow<f64>>>,
    pub timing: Timing,
}

impl TwinReport {
    pub fn summary(&self) -> String {
        let c = &self.config;
        let mut o = String::new();
        let _ = writeln!(o, "scenario={}", self.dataset.scenario);
        let _ = writeln!(o, "seed={}", c.seed);
        let _ = writeln!(o, "years={} spinup_cycles={} split={}", c.years, c.spinup_cycles, self.split);
        let (lo, hi) = self.dataset.rmse_range();
        let _ = writeln!(
            o,
            "ensemble: members={} failed={} rmse_min={lo:.4} rmse_max={hi:.4}",
            self.dataset.len(),
            self.dataset.failures.len()
        );
        let h = &self.surrogate.hyper;
        let _ = writeln!(
            o,
            "surrogate: length_scales={:.4?} signal_variance={:.4} noise_variance={:.3e}",
            h.length_scales, h.signal_variance, h.noise_variance
        );
        if let Some(r2) = self.validation_r2 {
            let _ = writeln!(o, "surrogate: validation_r2={r2:.4}");
        }
        let d = &self.diagnosis;
        let _ = writeln!(o, "chain: iterations={} burn_in={} acceptance_rate={:.4}", c.iterations, c.burn_in, d.acceptance_rate);
        for k in 0..N_PARAMS {
            let m = &d.marginals[k];
            let _ = writeln!(
                o,
                "theta{} ({}): truth={} median={:.4} mode={:.4} sensitivity={:.4}",
                k + 1,
                PARAM_NAMES[k],
                TRUTH_THETA[k],
                m.median,
                m.mode,
                d.sensitivity[k]
            );
        }
        if c.burn_in > 0 {
            for k in 0..N_PARAMS {
                let m = &d.full_marginals[k];
                let _ = writeln!(o, "theta{} full chain: median={:.4} mode={:.4}", k + 1, m.median, m.mode);
            }
        }
        for i in 0..N_PARAMS {
            for j in i + 1..N_PARAMS {
                let _ = writeln!(o, "corr(theta{},theta{})={:.4}", i + 1, j + 1, d.correlation[i][j]);
            }
        }
        let e = &self.evaluation;
        let _ = writeln!(
            o,
            "skill: tb_rmse_median_prior={:.4} tb_rmse_median_posterior={:.4}",
            e.prior.median_tb_rmse(),
            e.posterior.median_tb_rmse()
        );
        for s in &e.scores {
            let rate = |r: Result<f64>| r.map(|v| format!("{v:.4}")).unwrap_or_else(|_| "undefined".into());
            let _ = writeln!(
                o,
                "{}: ir_bias={} ir_ubrmse={}",
                s.variable,
                rate(s.bias_rate()),
                rate(s.ubrmse_rate())
            );
        }
        if let Some(rows) = &self.size_study {
            for r in rows {
                let _ = writeln!(o, "size_study {}: kld={:.4?}", r.size, r.kld);
            }
        }
        o
    }
}

fn prepare_out(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir.to_path_buf())
}

fn write_twin_inputs(dir: &Path, twin: &Twin) -> Result<()> {
    twin.obs.write_csv(&dir.join(OBSERVATIONS_FILE))?;
    write_file(&dir.join(TRUTH_FILE), &truth_csv(twin))
}

fn write_diagnosis(dir: &Path, d: &Diagnosis) -> Result<()> {
    let hists: Vec<_> = d.marginals.iter().map(|m| m.histogram.clone()).collect();
    write_file(&dir.join(HISTOGRAMS_FILE), &histograms_csv(&hists))?;
    write_file(&dir.join(CORRELATION_FILE), &correlation_csv(&d.correlation))
}

fn write_evaluation(dir: &Path, ev: &Evaluation) -> Result<()> {
    write_file(&dir.join(SCORES_FILE), &scores_csv(&ev.scores))?;
    write_file(&dir.join(SKILL_FILE), &skill_csv(ev))
}

/// Full twin experiment: truth, ensemble, fit, sample, diagnose, evaluate
/// and optionally the ensemble-size study. Artifacts written before a
/// failing stage stay on disk.
pub fn cmd_twin(cfg: &RunConfig, opts: &RunOptions) -> Result<TwinReport> {
    let dir = prepare_out(&cfg.out_dir)?;
    let mut timing = Timing::default();

    let t = Instant::now();
    let twin = in_stage("truth", || {
        let twin = build_twin(cfg, opts.split)?;
        write_twin_inputs(&dir, &twin)?;
        Ok(twin)
    })?;
    timing.record("truth", t);

    let t = Instant::now();
    let dataset = in_stage("ensemble", || {
        let data = run_design(cfg, &twin, opts.workers)?;
        save_dataset(&data, &dir.join(ENSEMBLE_FILE))?;
        Ok(data)
    })?;
    timing.record("ensemble", t);
    timing.model_seconds_per_run = timing.stage("ensemble").unwrap_or(0.0) / cfg.members as f64;

    let t = Instant::now();
    let gp = in_stage("fit", || {
        let gp = fit_surrogate(cfg, &dataset)?;
        gp.save(&dir.join(SURROGATE_FILE))?;
        Ok(gp)
    })?;
    timing.record("fit", t);

    let t = Instant::now();
    let chain = in_stage("sample", || {
        let chain = sample_posterior(cfg, &gp)?;
        chain.save(&dir.join(CHAIN_FILE))?;
        Ok(chain)
    })?;
    timing.record("sample", t);
    timing.surrogate_seconds_per_1e5 = timing.stage("sample").unwrap_or(0.0) / cfg.iterations as f64 * 1e5;

    let t = Instant::now();
    let diagnosis = in_stage("diagnose", || {
        let d = diagnose(cfg, &chain)?;
        write_diagnosis(&dir, &d)?;
        Ok(d)
    })?;
    timing.record("diagnose", t);

    let t = Instant::now();
    let evaluation = in_stage("evaluate", || {
        let ev = evaluate(cfg, &twin, &chain, opts.workers)?;
        write_evaluation(&dir, &ev)?;
        Ok(ev)
    })?;
    timing.record("evaluate", t);
    let validation_r2 = (!opts.split).then(|| {
        let pred: Vec<f64> = evaluation.prior.thetas.iter().map(|t| gp.predict_rmse(t)).collect();
        r_squared(&pred, &evaluation.prior.tb_rmse)
    });

    let size_study = if cfg.size_study {
        let t = Instant::now();
        let rows = in_stage("size_study", || {
            let rows = run_size_study(cfg, &twin, &chain, opts.workers)?;
            write_file(&dir.join(SIZE_STUDY_FILE), &size_study_csv(&rows))?;
            Ok(rows)
        })?;
        timing.record("size_study", t);
        Some(rows)
    } else {
        None
    };

    let report = TwinReport {
        config: cfg.clone(),
        split: opts.split,
        dataset,
        surrogate: gp,
        chain,
        diagnosis,
        evaluation,
        validation_r2,
        size_study,
        timing,
    };
    in_stage("report", || write_file(&dir.join(SUMMARY_FILE), &report.summary()))?;
    Ok(report)
}

/// `ensemble` subcommand: truth, observations and the scored LHS design.
pub fn cmd_ensemble(cfg: &RunConfig, opts: &RunOptions) -> Result<EnsembleDataset<f64>> {
    let dir = prepare_out(&cfg.out_dir)?;
    let twin = in_stage("truth", || {
        let twin = build_twin(cfg, opts.split)?;
        write_twin_inputs(&dir, &twin)?;
        Ok(twin)
    })?;
    in_stage("ensemble", || {
        let data = run_design(cfg, &twin, opts.workers)?;
        save_dataset(&data, &dir.join(ENSEMBLE_FILE))?;
        Ok(data)
    })
}

/// `fit` subcommand: ensemble file to surrogate file.
pub fn cmd_fit(cfg: &RunConfig) -> Result<GpSurrogate<f64>> {
    in_stage("fit", || {
        let data = load_dataset(&cfg.out_dir.join(ENSEMBLE_FILE))?;
        let gp = fit_surrogate(cfg, &data)?;
        gp.save(&cfg.out_dir.join(SURROGATE_FILE))?;
        Ok(gp)
    })
}

/// `sample` subcommand: surrogate file to chain file.
pub fn cmd_sample(cfg: &RunConfig) -> Result<Chain<f64>> {
    in_stage("sample", || {
        let gp = GpSurrogate::load(&cfg.out_dir.join(SURROGATE_FILE))?;
        let chain = sample_posterior(cfg, &gp)?;
        chain.save(&cfg.out_dir.join(CHAIN_FILE))?;
        Ok(chain)
    })
}

/// `diagnose` subcommand: chain file to histogram and correlation files,
/// plus the size study when configured.
pub fn cmd_diagnose(cfg: &RunConfig, opts: &RunOptions) -> Result<Diagnosis> {
    let chain = in_stage("diagnose", || Chain::load(&cfg.out_dir.join(CHAIN_FILE)))?;
    let d = in_stage("diagnose", || {
        let d = diagnose(cfg, &chain)?;
        write_diagnosis(&cfg.out_dir, &d)?;
        Ok(d)
    })?;
    if cfg.size_study {
        in_stage("size_study", || {
            let twin = build_twin(cfg, opts.split)?;
            let rows = run_size_study(cfg, &twin, &chain, opts.workers)?;
            write_file(&cfg.out_dir.join(SIZE_STUDY_FILE), &size_study_csv(&rows))
        })?;
    }
    Ok(d)
}

/// `evaluate` subcommand: chain file to score files.
pub fn cmd_evaluate(cfg: &RunConfig, opts: &RunOptions) -> Result<Evaluation> {
    in_stage("evaluate", || {
        let chain = Chain::load(&cfg.out_dir.join(CHAIN_FILE))?;
        let twin = build_twin(cfg, opts.split)?;
        let ev = evaluate(cfg, &twin, &chain, opts.workers)?;
        write_evaluation(&cfg.out_dir, &ev)?;
        Ok(ev)
    })
}
