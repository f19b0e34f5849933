//! Posterior and ensemble diagnostics: KL-divergence sensitivity, parameter
//! correlations, ensemble bias/ubRMSE, improvement rates and the
//! ensemble-size study.

use std::fmt::Write as _;

use crate::ensemble::{lhs_sample, run_ensemble, CostConfig, EnsembleDataset, FullModel};
use crate::error::{Error, Result};
use crate::mcmc::{metropolis_hastings, Chain, McmcConfig};
use crate::param_space::{ScaledParams, N_PARAMS, PARAM_NAMES};
use crate::rtm::ObservationSeries;
use crate::scalar::{fmt_exact, Real};
use crate::surrogate;

pub const DEFAULT_BINS: usize = 20;
/// q-side masses are floored here before renormalization.
pub const KLD_FLOOR: f64 = 1e-10;

/// Normalized histogram on `[0, 1]` with uniform bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<T> {
    pub edges: Vec<T>,
    pub masses: Vec<T>,
}

fn uniform_edges<T: Real>(bins: usize) -> Vec<T> {
    (0..=bins).map(|k| T::lit(k as f64 / bins as f64)).collect()
}

impl<T: Real> Histogram<T> {
    pub fn bins(&self) -> usize {
        self.masses.len()
    }

    pub fn uniform(bins: usize) -> Self {
        let m = T::one() / T::lit(bins as f64);
        Self {
            edges: uniform_edges(bins),
            masses: vec![m; bins],
        }
    }

    /// Samples outside `[0, 1]` are an error; `1` falls in the last bin.
    pub fn from_samples(samples: &[T], bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::Invalid(format!("need at least 2 bins, got {bins}")));
        }
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut counts = vec![0usize; bins];
        for &s in samples {
            if !(s >= T::zero() && s <= T::one()) {
                return Err(Error::Invalid(format!("sample {s} outside [0, 1]")));
            }
            let k = (s.as_f64() * bins as f64) as usize;
            counts[k.min(bins - 1)] += 1;
        }
        let n = samples.len() as f64;
        Ok(Self {
            edges: uniform_edges(bins),
            masses: counts.iter().map(|&c| T::lit(c as f64 / n)).collect(),
        })
    }

    /// Histogram from (possibly unnormalized) non-negative masses.
    pub fn from_masses(masses: Vec<T>) -> Result<Self> {
        let total: T = masses.iter().copied().sum();
        if masses.len() < 2 || masses.iter().any(|m| !(*m >= T::zero())) || !(total > T::zero()) {
            return Err(Error::Invalid("masses must be non-negative with positive total".into()));
        }
        Ok(Self {
            edges: uniform_edges(masses.len()),
            masses: masses.into_iter().map(|m| m / total).collect(),
        })
    }

    /// Center of the fullest bin, ties to the lowest index.
    pub fn mode(&self) -> T {
        let mut best = 0;
        for (k, m) in self.masses.iter().enumerate() {
            if *m > self.masses[best] {
                best = k;
            }
        }
        (self.edges[best] + self.edges[best + 1]) * T::lit(0.5)
    }
}

/// `sum p log(p / q)` in nats, with `q` floored and renormalized.
pub fn kld<T: Real>(p: &Histogram<T>, q: &Histogram<T>) -> Result<T> {
    if p.edges != q.edges || p.masses.len() != q.masses.len() {
        return Err(Error::BinningMismatch(format!("{} vs {} bins", p.bins(), q.bins())));
    }
    let floor = T::lit(KLD_FLOOR);
    let mut qf: Vec<T> = q.masses.iter().map(|m| m.max(floor)).collect();
    let total: T = qf.iter().copied().sum();
    // renormalize only when flooring actually changed something, so identical
    // inputs give exactly zero
    if q.masses.iter().any(|m| *m < floor) {
        qf.iter_mut().for_each(|m| *m = *m / total);
    }
    let mut acc = T::zero();
    for (pi, qi) in p.masses.iter().zip(&qf) {
        if *pi > T::zero() {
            acc = acc + *pi * (*pi / *qi).ln();
        }
    }
    Ok(acc.max(T::zero()))
}

/// KL divergence of one parameter's posterior marginal from the uniform prior.
pub fn sensitivity_index<T: Real>(chain: &Chain<T>, param: usize, bins: usize) -> Result<T> {
    let h = Histogram::from_samples(&chain.column(param), bins)?;
    kld(&h, &Histogram::uniform(bins))
}

/// Pearson correlation matrix of post-burn-in samples. Dimensions with zero
/// variance get zero correlations and a set flag.
pub fn pairwise_correlation<T: Real>(samples: &[ScaledParams<T>]) -> Result<([[T; N_PARAMS]; N_PARAMS], [bool; N_PARAMS])> {
    if samples.len() < 2 {
        return Err(Error::Invalid("correlation needs at least 2 samples".into()));
    }
    let n = T::lit(samples.len() as f64);
    let mean: [T; N_PARAMS] = std::array::from_fn(|d| samples.iter().map(|s| s.get(d)).sum::<T>() / n);
    let mut cov = [[T::zero(); N_PARAMS]; N_PARAMS];
    for s in samples {
        for i in 0..N_PARAMS {
            for j in 0..=i {
                cov[i][j] = cov[i][j] + (s.get(i) - mean[i]) * (s.get(j) - mean[j]);
            }
        }
    }
    let flat: [bool; N_PARAMS] = std::array::from_fn(|d| !(cov[d][d] > T::zero()));
    let mut r = [[T::zero(); N_PARAMS]; N_PARAMS];
    for i in 0..N_PARAMS {
        r[i][i] = T::one();
        for j in 0..i {
            let v = if flat[i] || flat[j] {
                T::zero()
            } else {
                (cov[i][j] / (cov[i][i].sqrt() * cov[j][j].sqrt())).max(-T::one()).min(T::one())
            };
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    Ok((r, flat))
}

fn check_aligned<T>(sims: &[Vec<T>], obs: &[T]) -> Result<()> {
    if sims.is_empty() {
        return Err(Error::Alignment("empty ensemble".into()));
    }
    if obs.is_empty() {
        return Err(Error::Alignment("empty observation series".into()));
    }
    if let Some((i, s)) = sims.iter().enumerate().find(|(_, s)| s.len() != obs.len()) {
        return Err(Error::Alignment(format!(
            "member {i} has {} values for {} observations",
            s.len(),
            obs.len()
        )));
    }
    Ok(())
}

/// Root mean square over members of each member's time-mean bias.
pub fn bias_ens<T: Real>(sims: &[Vec<T>], obs: &[T]) -> Result<T> {
    check_aligned(sims, obs)?;
    let nt = T::lit(obs.len() as f64);
    let sq: T = sims
        .iter()
        .map(|s| {
            let b = s.iter().zip(obs).map(|(f, o)| *f - *o).sum::<T>() / nt;
            b * b
        })
        .sum();
    Ok((sq / T::lit(sims.len() as f64)).sqrt())
}

/// Member-averaged unbiased RMSE, with the forecast bias taken from the
/// time mean of the ensemble mean.
pub fn ubrmse_ens<T: Real>(sims: &[Vec<T>], obs: &[T]) -> Result<T> {
    check_aligned(sims, obs)?;
    let nt = T::lit(obs.len() as f64);
    let n = T::lit(sims.len() as f64);
    let e_f = sims.iter().map(|s| s.iter().copied().sum::<T>()).sum::<T>() / (n * nt);
    let e_o = obs.iter().copied().sum::<T>() / nt;
    let total: T = sims
        .iter()
        .map(|s| {
            let ms = s
                .iter()
                .zip(obs)
                .map(|(f, o)| {
                    let d = (*f - e_f) - (*o - e_o);
                    d * d
                })
                .sum::<T>()
                / nt;
            ms.sqrt()
        })
        .sum();
    Ok(total / n)
}

/// `(s_mcmc - s_unif) / s_unif`; negative means the calibrated ensemble is better.
pub fn improvement_rate<T: Real>(s_mcmc: T, s_unif: T) -> Result<T> {
    if s_unif == T::zero() {
        return Err(Error::UndefinedRate);
    }
    Ok((s_mcmc - s_unif) / s_unif)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalScores<T> {
    pub bias_ens: T,
    pub ubrmse_ens: T,
}

impl<T: Real> EvalScores<T> {
    pub fn compute(sims: &[Vec<T>], obs: &[T]) -> Result<Self> {
        Ok(Self {
            bias_ens: bias_ens(sims, obs)?,
            ubrmse_ens: ubrmse_ens(sims, obs)?,
        })
    }
}

/// Scores of a prior-drawn and a posterior-drawn ensemble for one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreComparison<T> {
    pub variable: String,
    pub uniform: EvalScores<T>,
    pub mcmc: EvalScores<T>,
}

impl<T: Real> ScoreComparison<T> {
    pub fn bias_rate(&self) -> Result<T> {
        improvement_rate(self.mcmc.bias_ens, self.uniform.bias_ens)
    }

    pub fn ubrmse_rate(&self) -> Result<T> {
        improvement_rate(self.mcmc.ubrmse_ens, self.uniform.ubrmse_ens)
    }
}

pub const SCORES_CSV_HEADER: &str = "variable,bias_ens_unif,bias_ens_mcmc,ir_bias,ubrmse_ens_unif,ubrmse_ens_mcmc,ir_ubrmse";

fn rate_str<T: Real>(r: Result<T>) -> String {
    r.map(|v| fmt_exact(v)).unwrap_or_else(|_| "nan".into())
}

pub fn scores_csv<T: Real>(rows: &[ScoreComparison<T>]) -> String {
    let mut out = String::from(SCORES_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.variable,
            fmt_exact(r.uniform.bias_ens),
            fmt_exact(r.mcmc.bias_ens),
            rate_str(r.bias_rate()),
            fmt_exact(r.uniform.ubrmse_ens),
            fmt_exact(r.mcmc.ubrmse_ens),
            rate_str(r.ubrmse_rate()),
        );
    }
    out
}

/// One CSV per chain: `bin_lo,bin_hi` then one mass column per parameter.
pub fn histograms_csv<T: Real>(hists: &[Histogram<T>]) -> String {
    let mut out = String::from("bin_lo,bin_hi");
    for name in PARAM_NAMES.iter().take(hists.len()) {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    if let Some(h0) = hists.first() {
        for k in 0..h0.bins() {
            let _ = write!(out, "{},{}", fmt_exact(h0.edges[k]), fmt_exact(h0.edges[k + 1]));
            for h in hists {
                let _ = write!(out, ",{}", fmt_exact(h.masses[k]));
            }
            out.push('\n');
        }
    }
    out
}

pub fn correlation_csv<T: Real>(r: &[[T; N_PARAMS]; N_PARAMS]) -> String {
    let mut out = String::from("param");
    for n in PARAM_NAMES {
        let _ = write!(out, ",{n}");
    }
    out.push('\n');
    for (i, row) in r.iter().enumerate() {
        out.push_str(PARAM_NAMES[i]);
        for v in row {
            let _ = write!(out, ",{}", fmt_exact(*v));
        }
        out.push('\n');
    }
    out
}

/// Per-size outcome of the ensemble-size study.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeStudyRow<T> {
    pub size: usize,
    pub kld: [T; N_PARAMS],
}

pub const SIZE_STUDY_CSV_HEADER: &str = "size,kld_theta1,kld_theta2,kld_theta3,kld_theta4";

pub fn size_study_csv<T: Real>(rows: &[SizeStudyRow<T>]) -> String {
    let mut out = String::from(SIZE_STUDY_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{}", r.size);
        for v in r.kld {
            let _ = write!(out, ",{}", fmt_exact(v));
        }
        out.push('\n');
    }
    out
}

/// Settings shared by every size in the study.
#[derive(Debug, Clone)]
pub struct SizeStudyConfig<T> {
    pub sizes: Vec<usize>,
    pub cost: CostConfig<T>,
    pub mcmc: McmcConfig<T>,
    pub fit_seed: u64,
    pub workers: usize,
    pub bins: usize,
}

/// Fits a surrogate to `data` and samples its posterior.
pub fn surrogate_posterior<T: Real>(data: &EnsembleDataset<T>, cost: &CostConfig<T>, mcmc: &McmcConfig<T>, fit_seed: u64) -> Result<Chain<T>> {
    let gp = surrogate::fit(data, fit_seed)?;
    metropolis_hastings(|t| gp.predict_cost(t, cost), mcmc, "gp")
}

/// Compares posteriors from smaller ensembles against a reference chain.
///
/// Each size gets an independent LHS design seeded `seed + size`; every
/// other setting matches the reference run.
pub fn ensemble_size_study<T: Real>(
    full: &FullModel<T>,
    obs: &ObservationSeries<T>,
    reference: &Chain<T>,
    cfg: &SizeStudyConfig<T>,
    seed: u64,
) -> Result<Vec<SizeStudyRow<T>>> {
    let ref_hists: Vec<Histogram<T>> = (0..N_PARAMS)
        .map(|d| Histogram::from_samples(&reference.column(d), cfg.bins))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(cfg.sizes.len());
    for &size in &cfg.sizes {
        let design_seed = seed.wrapping_add(size as u64);
        let thetas = lhs_sample(size, N_PARAMS, design_seed)?;
        let data = run_ensemble(&thetas, full, obs, cfg.workers, design_seed)?;
        let chain = surrogate_posterior(&data, &cfg.cost, &cfg.mcmc, cfg.fit_seed)?;
        let mut k = [T::zero(); N_PARAMS];
        for d in 0..N_PARAMS {
            let h = Histogram::from_samples(&chain.column(d), cfg.bins)?;
            k[d] = kld(&h, &ref_hists[d])?;
        }
        log::info!("size study: {size} members -> kld {k:?}");
        rows.push(SizeStudyRow { size, kld: k });
    }
    Ok(rows)
}
