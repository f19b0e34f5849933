//! Random-walk Metropolis-Hastings on the unit hypercube.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::diagnostics::Histogram;
use crate::error::{Error, Result};
use crate::param_space::{ScaledParams, N_PARAMS};
use crate::scalar::{fmt_exact, Real};

pub const CHAIN_CSV_HEADER: &str = "iter,theta1,theta2,theta3,theta4,accepted";
pub const DEFAULT_ITERATIONS: usize = 100_000;
pub const DEFAULT_PROPOSAL_SD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig<T> {
    pub iterations: usize,
    pub proposal_sd: T,
    pub initial_theta: ScaledParams<T>,
    pub seed: u64,
    pub burn_in: usize,
}

impl<T: Real> McmcConfig<T> {
    pub fn new(seed: u64) -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            proposal_sd: T::lit(DEFAULT_PROPOSAL_SD),
            initial_theta: ScaledParams::center(),
            seed,
            burn_in: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Invalid("iterations must be at least 1".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Invalid("burn_in must be smaller than iterations".into()));
        }
        if !(self.proposal_sd > T::zero() && self.proposal_sd.is_finite()) {
            return Err(Error::Invalid(format!("proposal sd must be positive, got {}", self.proposal_sd)));
        }
        Ok(())
    }
}

/// A Markov chain over scaled parameters. Every iteration is stored; the
/// burn-in prefix is kept so full-chain statistics remain available.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain<T> {
    pub states: Vec<ScaledParams<T>>,
    pub accepted: Vec<bool>,
    pub burn_in: usize,
    pub seed: u64,
    pub cost_id: String,
}

impl<T: Real> Chain<T> {
    /// Post-burn-in samples.
    pub fn samples(&self) -> &[ScaledParams<T>] {
        &self.states[self.burn_in.min(self.states.len())..]
    }

    pub fn acceptance_count(&self) -> usize {
        self.accepted.iter().filter(|a| **a).count()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.acceptance_count() as f64 / self.accepted.len().max(1) as f64
    }

    /// Column `d` of the post-burn-in samples.
    pub fn column(&self, d: usize) -> Vec<T> {
        self.samples().iter().map(|s| s.get(d)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.states.len() * 110 + 128);
        let _ = writeln!(out, "# cost={}", self.cost_id);
        let _ = writeln!(out, "# seed={}", self.seed);
        let _ = writeln!(out, "# burn_in={}", self.burn_in);
        out.push_str(CHAIN_CSV_HEADER);
        out.push('\n');
        for (i, (s, a)) in self.states.iter().zip(&self.accepted).enumerate() {
            let _ = write!(out, "{}", i + 1);
            for v in s.as_array() {
                let _ = write!(out, ",{}", fmt_exact(*v));
            }
            let _ = writeln!(out, ",{}", *a as u8);
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut chain = Chain {
            states: Vec::new(),
            accepted: Vec::new(),
            burn_in: 0,
            seed: 0,
            cost_id: String::new(),
        };
        let mut header_seen = false;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let perr = |msg: String| Error::Parse { line: line_no, msg };
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                if let Some(v) = meta.strip_prefix("cost=") {
                    chain.cost_id = v.to_string();
                } else if let Some(v) = meta.strip_prefix("seed=") {
                    chain.seed = v.parse().map_err(|_| perr(format!("bad seed `{v}`")))?;
                } else if let Some(v) = meta.strip_prefix("burn_in=") {
                    chain.burn_in = v.parse().map_err(|_| perr(format!("bad burn_in `{v}`")))?;
                }
                continue;
            }
            if !header_seen {
                if line.trim() != CHAIN_CSV_HEADER {
                    return Err(perr(format!("expected header `{CHAIN_CSV_HEADER}`")));
                }
                header_seen = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 6 {
                return Err(perr(format!("expected 6 fields, found {}", f.len())));
            }
            let mut theta = [T::zero(); N_PARAMS];
            for d in 0..N_PARAMS {
                theta[d] = f[d + 1].parse().map_err(|_| perr(format!("bad number `{}`", f[d + 1])))?;
            }
            chain.states.push(ScaledParams::new(theta).map_err(|e| perr(e.to_string()))?);
            chain.accepted.push(match f[5] {
                "1" => true,
                "0" => false,
                other => return Err(perr(format!("bad accepted flag `{other}`"))),
            });
        }
        if chain.states.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(chain)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }
}

/// Gaussian random-walk candidate; may fall outside the unit hypercube.
pub fn propose<T: Real, R: Rng + ?Sized>(current: &ScaledParams<T>, sd: T, rng: &mut R) -> [T; N_PARAMS] {
    std::array::from_fn(|d| {
        let z: f64 = StandardNormal.sample(rng);
        current.get(d) + sd * T::lit(z)
    })
}

/// Samples `p(theta) ∝ costfn(theta)` on `[0, 1]^4`.
///
/// Out-of-support candidates are rejected without evaluating the cost; a
/// candidate is accepted when a uniform draw `b` satisfies
/// `b <= cost(candidate) / cost(current)`.
pub fn metropolis_hastings<T, F>(mut costfn: F, cfg: &McmcConfig<T>, cost_id: &str) -> Result<Chain<T>>
where
    T: Real,
    F: FnMut(&ScaledParams<T>) -> T,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = cfg.initial_theta;
    let mut c_current = costfn(&current);
    if !c_current.is_finite() || c_current <= T::zero() {
        return Err(Error::SamplerAbort {
            iteration: 0,
            value: c_current.as_f64(),
        });
    }
    let mut states = Vec::with_capacity(cfg.iterations);
    let mut accepted = Vec::with_capacity(cfg.iterations);
    for it in 1..=cfg.iterations {
        let cand = propose(&current, cfg.proposal_sd, &mut rng);
        let mut took = false;
        if ScaledParams::in_support(&cand) {
            let cand = ScaledParams::new(cand)?;
            let c = costfn(&cand);
            if !c.is_finite() {
                return Err(Error::SamplerAbort {
                    iteration: it,
                    value: c.as_f64(),
                });
            }
            let a = c / c_current;
            let b: f64 = rng.random();
            if T::lit(b) <= a {
                current = cand;
                c_current = c;
                took = true;
            }
        }
        states.push(current);
        accepted.push(took);
    }
    Ok(Chain {
        states,
        accepted,
        burn_in: cfg.burn_in,
        seed: cfg.seed,
        cost_id: cost_id.to_string(),
    })
}

/// Summary of one parameter's marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalStats<T> {
    pub histogram: Histogram<T>,
    pub median: T,
    pub mode: T,
}

pub fn median<T: Real>(values: &[T]) -> T {
    let mut v = values.to_vec();
    let n = v.len();
    let cmp = |a: &T, b: &T| a.partial_cmp(b).expect("finite samples");
    let (_, hi, _) = v.select_nth_unstable_by(n / 2, cmp);
    let hi = *hi;
    if n % 2 == 1 {
        hi
    } else {
        let lo = *v[..n / 2].iter().max_by(|a, b| cmp(a, b)).expect("n >= 2");
        (lo + hi) * T::lit(0.5)
    }
}

/// Per-parameter histogram, median and histogram mode of the post-burn-in
/// samples (or of the whole chain when `full_chain` is set).
pub fn chain_stats<T: Real>(chain: &Chain<T>, bins: usize, full_chain: bool) -> Result<Vec<MarginalStats<T>>> {
    let samples = if full_chain { &chain.states[..] } else { chain.samples() };
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    (0..N_PARAMS)
        .map(|d| {
            let col: Vec<T> = samples.iter().map(|s| s.get(d)).collect();
            let histogram = Histogram::from_samples(&col, bins)?;
            let mode = histogram.mode();
            Ok(MarginalStats {
                histogram,
                median: median(&col),
                mode,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::kld;

    #[test]
    fn zero_sd_proposal_stays_put() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = ScaledParams::new([0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(propose(&c, 0.0, &mut rng), *c.as_array());
    }

    #[test]
    fn proposal_spread_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = ScaledParams::<f64>::center();
        let n = 100_000;
        let steps: Vec<[f64; 4]> = (0..n).map(|_| propose(&c, 0.1, &mut rng).map(|v| v - 0.5)).collect();
        for d in 0..4 {
            let first = &steps[..10_000];
            let m = first.iter().map(|s| s[d]).sum::<f64>() / 1e4;
            let sd = (first.iter().map(|s| (s[d] - m).powi(2)).sum::<f64>() / (1e4 - 1.0)).sqrt();
            assert!((0.095..=0.105).contains(&sd), "sd {sd}");
            let m = steps.iter().map(|s| s[d]).sum::<f64>() / n as f64;
            let m2 = steps.iter().map(|s| (s[d] - m).powi(2)).sum::<f64>() / n as f64;
            let m3 = steps.iter().map(|s| (s[d] - m).powi(3)).sum::<f64>() / n as f64;
            assert!((m3 / m2.powf(1.5)).abs() < 0.05);
        }
    }

    #[test]
    fn constant_cost_accepts_every_inbound_proposal() {
        let cfg = McmcConfig { iterations: 5_000, ..McmcConfig::<f64>::new(3) };
        let chain = metropolis_hastings(|_| 0.3, &cfg, "const").unwrap();
        let mut prev = cfg.initial_theta;
        for (s, a) in chain.states.iter().zip(&chain.accepted) {
            if *a {
                assert_ne!(*s, prev);
            } else {
                // only out-of-support candidates are rejected under a flat cost
                assert_eq!(*s, prev);
            }
            prev = *s;
        }
        assert!(chain.acceptance_rate() > 0.5 && chain.acceptance_rate() < 1.0);
        assert_eq!(chain.states.len(), 5_000);
    }

    fn exp_target(t: &ScaledParams<f64>) -> f64 {
        (-(t.get(0) - 0.5).abs() / 0.1).exp()
    }

    /// Bin masses of a 1-D density on [0, 1] by composite Simpson integration.
    fn integrated_masses(f: impl Fn(f64) -> f64, bins: usize) -> Vec<f64> {
        let sub = 200;
        let mut m: Vec<f64> = (0..bins)
            .map(|b| {
                let (a, w) = (b as f64 / bins as f64, 1.0 / bins as f64);
                let h = w / sub as f64;
                (0..=sub)
                    .map(|k| {
                        let c = if k == 0 || k == sub { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                        c * f(a + k as f64 * h)
                    })
                    .sum::<f64>()
                    * h
                    / 3.0
            })
            .collect();
        let s: f64 = m.iter().sum();
        m.iter_mut().for_each(|v| *v /= s);
        m
    }

    #[test]
    fn recovers_one_dimensional_exponential_target() {
        let cfg = McmcConfig::<f64>::new(11);
        let chain = metropolis_hastings(exp_target, &cfg, "exp").unwrap();
        let hist = Histogram::from_samples(&chain.column(0), 20).unwrap();
        let oracle = Histogram::from_masses(integrated_masses(|x| (-(x - 0.5f64).abs() / 0.1).exp(), 20)).unwrap();
        let d = kld(&hist, &oracle).unwrap();
        assert!(d < 0.02, "kld {d}");
        // the flat dimensions stay uniform
        let flat = Histogram::from_samples(&chain.column(2), 20).unwrap();
        assert!(kld(&flat, &Histogram::uniform(20)).unwrap() < 0.02);
    }

    #[test]
    fn separable_target_marginals() {
        let f1 = |x: f64| (-(x - 0.3f64).powi(2) / (2.0 * 0.1f64.powi(2))).exp();
        let f2 = |x: f64| (-(x - 0.7f64).abs() / 0.15).exp();
        let cfg = McmcConfig::<f64>::new(4);
        let chain = metropolis_hastings(|t| f1(t.get(0)) * f2(t.get(1)), &cfg, "sep").unwrap();
        for (d, f) in [(0, &f1 as &dyn Fn(f64) -> f64), (1, &f2)] {
            let hist = Histogram::from_samples(&chain.column(d), 20).unwrap();
            let oracle = Histogram::from_masses(integrated_masses(f, 20)).unwrap();
            assert!(kld(&hist, &oracle).unwrap() < 0.02);
        }
    }

    #[test]
    fn deterministic_and_scale_invariant() {
        let cfg = McmcConfig { iterations: 10_000, ..McmcConfig::<f64>::new(5) };
        let a = metropolis_hastings(exp_target, &cfg, "exp").unwrap();
        let b = metropolis_hastings(exp_target, &cfg, "exp").unwrap();
        assert_eq!(a, b);
        for k in [2.5, 1e-3, 1e3] {
            let c = metropolis_hastings(|t| k * exp_target(t), &cfg, "exp").unwrap();
            assert_eq!(a.states, c.states);
        }
    }

    #[test]
    fn non_finite_cost_aborts_with_iteration() {
        let cfg = McmcConfig { iterations: 100, ..McmcConfig::<f64>::new(5) };
        let mut calls = 0;
        let res = metropolis_hastings(
            |_| {
                calls += 1;
                if calls > 3 {
                    f64::NAN
                } else {
                    1.0
                }
            },
            &cfg,
            "nan",
        );
        assert!(matches!(res, Err(Error::SamplerAbort { iteration, .. }) if iteration >= 3));
    }

    #[test]
    fn point_mass_stats() {
        let s = ScaledParams::<f64>::new([0.33, 0.5, 0.9, 0.01]).unwrap();
        let chain = Chain {
            states: vec![s; 100],
            accepted: vec![false; 100],
            burn_in: 0,
            seed: 0,
            cost_id: "x".into(),
        };
        let st = chain_stats(&chain, 20, false).unwrap();
        assert_eq!(st[0].median, 0.33);
        assert!((st[0].mode - 0.325).abs() < 1e-12);
        assert_eq!(st[0].histogram.masses.iter().filter(|m| **m > 0.0).count(), 1);
    }

    #[test]
    fn median_matches_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [100_000usize, 99_999] {
            let v: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let mut s = v.clone();
            s.sort_by(f64::total_cmp);
            let expect = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
            assert_eq!(median(&v), expect);
        }
    }

    #[test]
    fn uniform_chain_histogram_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 100_000;
        let states: Vec<ScaledParams<f64>> = (0..n)
            .map(|_| ScaledParams::new(std::array::from_fn(|_| rng.random())).unwrap())
            .collect();
        let chain = Chain {
            states,
            accepted: vec![true; n],
            burn_in: 0,
            seed: 0,
            cost_id: "u".into(),
        };
        let p = 1.0 / 20.0;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        for st in chain_stats(&chain, 20, false).unwrap() {
            for m in &st.histogram.masses {
                assert!((m - p).abs() < 3.0 * sigma);
            }
        }
    }

    #[test]
    fn chain_csv_round_trip_and_burn_in() {
        let cfg = McmcConfig { iterations: 500, burn_in: 100, ..McmcConfig::<f64>::new(5) };
        let chain = metropolis_hastings(exp_target, &cfg, "exp").unwrap();
        assert_eq!(chain.samples().len(), 400);
        assert_eq!(Chain::parse_csv(&chain.to_csv()).unwrap(), chain);
    }
}
