//! Gaussian-process surrogate of the normalized RMSE surface.
//!
//! Matérn 5/2 kernel with one length scale per parameter, a constant prior
//! mean equal to the mean training target, and hyperparameters chosen by
//! maximizing the log marginal likelihood.

pub mod linalg;

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensemble::{CostConfig, EnsembleDataset};
use crate::error::{Error, Result};
use crate::param_space::{ScaledParams, N_PARAMS};
use crate::scalar::{fmt_exact, Real};
use linalg::{backward_solve, cholesky_in_place, forward_solve, half_log_det, row_start};

pub const MATERN_NU: f64 = 2.5;
pub const NOISE_FLOOR: f64 = 1e-8;
pub const LENGTH_SCALE_BOUNDS: (f64, f64) = (0.05, 5.0);
pub const SIGNAL_VARIANCE_BOUNDS: (f64, f64) = (0.01, 10.0);
pub const NOISE_VARIANCE_BOUNDS: (f64, f64) = (NOISE_FLOOR, 1e-2);
pub const MAX_JITTER: f64 = 1e-4;
/// Predicted normalized RMSE is clamped to this range before conversion to cost.
pub const NORM_RMSE_CLAMP: (f64, f64) = (-0.5, 1.5);
pub const MIN_TRAINING_RECORDS: usize = 10;

const SQRT5: f64 = 2.236_067_977_499_79;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyper<T> {
    pub length_scales: [T; N_PARAMS],
    pub signal_variance: T,
    pub noise_variance: T,
}

impl<T: Real> GpHyper<T> {
    pub fn unit() -> Self {
        Self {
            length_scales: [T::one(); N_PARAMS],
            signal_variance: T::one(),
            noise_variance: T::lit(NOISE_FLOOR),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok_pos = |v: T| v > T::zero() && v.is_finite();
        if !self.length_scales.iter().all(|&l| ok_pos(l)) {
            return Err(Error::Invalid("length scales must be positive".into()));
        }
        if !ok_pos(self.signal_variance) {
            return Err(Error::Invalid("signal variance must be positive".into()));
        }
        if !(self.noise_variance >= T::lit(NOISE_FLOOR) && self.noise_variance.is_finite()) {
            return Err(Error::Invalid(format!("noise variance must be at least {NOISE_FLOOR:e}")));
        }
        Ok(())
    }

    fn from_log(p: &[f64; N_PARAMS + 2]) -> Self {
        Self {
            length_scales: std::array::from_fn(|d| T::lit(p[d].exp())),
            signal_variance: T::lit(p[N_PARAMS].exp()),
            noise_variance: T::lit(p[N_PARAMS + 1].exp().max(NOISE_FLOOR)),
        }
    }
}

fn log_bounds() -> [(f64, f64); N_PARAMS + 2] {
    let ln = |(a, b): (f64, f64)| (a.ln(), b.ln());
    let mut b = [ln(LENGTH_SCALE_BOUNDS); N_PARAMS + 2];
    b[N_PARAMS] = ln(SIGNAL_VARIANCE_BOUNDS);
    b[N_PARAMS + 1] = ln(NOISE_VARIANCE_BOUNDS);
    b
}

/// Matérn 5/2 covariance as a function of the squared scaled distance.
#[inline]
pub fn matern_from_r2<T: Real>(r2: T, signal_variance: T) -> T {
    let s5 = T::lit(SQRT5);
    let r = r2.sqrt();
    signal_variance * (T::one() + s5 * r + T::lit(5.0 / 3.0) * r2) * (-s5 * r).exp()
}

fn scaled_r2<T: Real>(a: &[T; N_PARAMS], b: &[T; N_PARAMS], hyper: &GpHyper<T>) -> T {
    (0..N_PARAMS)
        .map(|d| {
            let z = (a[d] - b[d]) / hyper.length_scales[d];
            z * z
        })
        .sum()
}

pub fn matern_kernel<T: Real>(a: &ScaledParams<T>, b: &ScaledParams<T>, hyper: &GpHyper<T>) -> T {
    matern_from_r2(scaled_r2(a.as_array(), b.as_array(), hyper), hyper.signal_variance)
}

/// Per-dimension squared differences of every training pair, packed lower.
struct PairwiseSq<T> {
    n: usize,
    d2: [Vec<T>; N_PARAMS],
}

impl<T: Real> PairwiseSq<T> {
    fn new(x: &[[T; N_PARAMS]]) -> Self {
        let n = x.len();
        let d2 = std::array::from_fn(|d| {
            let mut v = Vec::with_capacity(row_start(n));
            for i in 0..n {
                for j in 0..=i {
                    let z = x[i][d] - x[j][d];
                    v.push(z * z);
                }
            }
            v
        });
        Self { n, d2 }
    }

    /// Packed kernel matrix with `diag_noise` added on the diagonal.
    fn kernel(&self, hyper: &GpHyper<T>, diag_noise: T) -> Vec<T> {
        let inv: [T; N_PARAMS] = std::array::from_fn(|d| T::one() / (hyper.length_scales[d] * hyper.length_scales[d]));
        let mut k: Vec<T> = (0..self.d2[0].len())
            .map(|idx| {
                let r2 = (0..N_PARAMS).map(|d| self.d2[d][idx] * inv[d]).sum();
                matern_from_r2(r2, hyper.signal_variance)
            })
            .collect();
        for i in 0..self.n {
            let ii = row_start(i) + i;
            k[ii] = k[ii] + diag_noise;
        }
        k
    }

    /// Cholesky factor with jitter escalation; returns the factor and the
    /// total diagonal noise that made it succeed.
    fn factor(&self, hyper: &GpHyper<T>) -> Result<(Vec<T>, T)> {
        let mut extra = 0.0;
        loop {
            let diag = hyper.noise_variance + T::lit(extra);
            let mut k = self.kernel(hyper, diag);
            if cholesky_in_place(&mut k, self.n) {
                return Ok((k, diag));
            }
            extra = if extra == 0.0 { 1e-10 } else { extra * 10.0 };
            if extra > MAX_JITTER * 1.000_001 {
                return Err(Error::IllConditioned { jitter: MAX_JITTER });
            }
        }
    }
}

fn solve_weights<T: Real>(chol: &[T], n: usize, y: &[T]) -> Vec<T> {
    let mut alpha = y.to_vec();
    forward_solve(chol, n, &mut alpha);
    backward_solve(chol, n, &mut alpha);
    alpha
}

fn lml_from_factor<T: Real>(chol: &[T], n: usize, y: &[T]) -> T {
    let alpha = solve_weights(chol, n, y);
    let fit: T = y.iter().zip(&alpha).map(|(a, b)| *a * *b).sum();
    T::lit(-0.5) * fit - half_log_det(chol, n) - T::lit(0.5 * n as f64 * LN_2PI)
}

/// Gaussian log marginal likelihood of targets `y` at inputs `x` under a
/// zero-mean prior.
pub fn log_marginal_likelihood<T: Real>(x: &[ScaledParams<T>], y: &[T], hyper: &GpHyper<T>) -> Result<T> {
    hyper.validate()?;
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Invalid(format!("{} inputs for {} targets", x.len(), y.len())));
    }
    let xs: Vec<[T; N_PARAMS]> = x.iter().map(|t| *t.as_array()).collect();
    let pair = PairwiseSq::new(&xs);
    let (chol, _) = pair.factor(hyper)?;
    Ok(lml_from_factor(&chol, xs.len(), y))
}

/// Optimizer settings for [`fit_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub seed: u64,
    pub restarts: usize,
    /// Likelihood evaluations allowed per restart.
    pub max_evals: usize,
    /// Smallest log-space step before a restart stops.
    pub min_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 5,
            max_evals: 400,
            min_step: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpSurrogate<T> {
    pub x: Vec<[T; N_PARAMS]>,
    /// Normalized training targets.
    pub y: Vec<T>,
    /// K.
    pub rmse_min: T,
    /// K.
    pub rmse_max: T,
    pub prior_mean: T,
    pub hyper: GpHyper<T>,
    /// Diagonal noise actually used, hyper noise plus any jitter.
    pub effective_noise: T,
    chol: Vec<T>,
    alpha: Vec<T>,
}

fn normalized_targets<T: Real>(data: &EnsembleDataset<T>) -> Result<(Vec<[T; N_PARAMS]>, Vec<T>, T, T)> {
    if data.len() < MIN_TRAINING_RECORDS {
        return Err(Error::Invalid(format!(
            "surrogate needs at least {MIN_TRAINING_RECORDS} records, got {}",
            data.len()
        )));
    }
    let (lo, hi) = data.rmse_range();
    if !(hi > lo) {
        return Err(Error::Invalid("training RMSE has zero spread".into()));
    }
    let x = data.records.iter().map(|r| *r.theta.as_array()).collect();
    let y = data.records.iter().map(|r| (r.rmse - lo) / (hi - lo)).collect();
    Ok((x, y, lo, hi))
}

fn centered<T: Real>(y: &[T]) -> (Vec<T>, T) {
    let mean = y.iter().copied().sum::<T>() / T::lit(y.len() as f64);
    (y.iter().map(|v| *v - mean).collect(), mean)
}

/// Fits with default optimizer settings and the given seed.
pub fn fit<T: Real>(data: &EnsembleDataset<T>, seed: u64) -> Result<GpSurrogate<T>> {
    fit_with(data, &FitOptions { seed, ..FitOptions::default() })
}

pub fn fit_with<T: Real>(data: &EnsembleDataset<T>, opts: &FitOptions) -> Result<GpSurrogate<T>> {
    let (x, y, lo, hi) = normalized_targets(data)?;
    let (yc, mean) = centered(&y);
    let pair = PairwiseSq::new(&x);
    let n = x.len();
    let objective = |p: &[f64; N_PARAMS + 2]| -> f64 {
        let hyper = GpHyper::<T>::from_log(p);
        match pair.factor(&hyper) {
            Ok((chol, _)) => {
                let v = lml_from_factor(&chol, n, &yc).as_f64();
                if v.is_finite() {
                    v
                } else {
                    f64::NEG_INFINITY
                }
            }
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let bounds = log_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<([f64; N_PARAMS + 2], f64)> = None;
    for restart in 0..opts.restarts.max(1) {
        let start: [f64; N_PARAMS + 2] = std::array::from_fn(|k| rng.random_range(bounds[k].0..=bounds[k].1));
        let (p, v) = hill_climb(start, &bounds, &objective, opts);
        log::debug!("gp restart {restart}: log likelihood {v:.6}");
        if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
            best = Some((p, v));
        }
    }
    let (p, v) = best.expect("at least one restart");
    if !v.is_finite() {
        return Err(Error::IllConditioned { jitter: MAX_JITTER });
    }
    let hyper = GpHyper::from_log(&p);
    log::info!(
        "gp fit: n={n} log likelihood {v:.4}, length scales {:?}, signal {:.4e}, noise {:.4e}",
        hyper.length_scales,
        hyper.signal_variance,
        hyper.noise_variance
    );
    assemble(x, y, lo, hi, mean, hyper)
}

/// Coordinate-wise search in log space: each coordinate tries one step up
/// and one down; the step halves when no coordinate improves.
fn hill_climb<F>(start: [f64; N_PARAMS + 2], bounds: &[(f64, f64); N_PARAMS + 2], f: &F, opts: &FitOptions) -> ([f64; N_PARAMS + 2], f64)
where
    F: Fn(&[f64; N_PARAMS + 2]) -> f64,
{
    let mut p = start;
    let mut val = f(&p);
    let mut evals = 1;
    let mut step = 1.0;
    while step >= opts.min_step && evals < opts.max_evals {
        let mut improved = false;
        for k in 0..p.len() {
            for dir in [1.0, -1.0] {
                let mut cand = p;
                cand[k] = (p[k] + dir * step).clamp(bounds[k].0, bounds[k].1);
                if cand[k] == p[k] {
                    continue;
                }
                let v = f(&cand);
                evals += 1;
                if v > val {
                    p = cand;
                    val = v;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (p, val)
}

/// Builds a surrogate with fixed hyperparameters, skipping optimization.
pub fn fit_fixed<T: Real>(data: &EnsembleDataset<T>, hyper: GpHyper<T>) -> Result<GpSurrogate<T>> {
    hyper.validate()?;
    let (x, y, lo, hi) = normalized_targets(data)?;
    let (_, mean) = centered(&y);
    assemble(x, y, lo, hi, mean, hyper)
}

fn assemble<T: Real>(x: Vec<[T; N_PARAMS]>, y: Vec<T>, lo: T, hi: T, mean: T, hyper: GpHyper<T>) -> Result<GpSurrogate<T>> {
    let pair = PairwiseSq::new(&x);
    let (chol, effective_noise) = pair.factor(&hyper)?;
    let yc: Vec<T> = y.iter().map(|v| *v - mean).collect();
    let alpha = solve_weights(&chol, x.len(), &yc);
    Ok(GpSurrogate {
        x,
        y,
        rmse_min: lo,
        rmse_max: hi,
        prior_mean: mean,
        hyper,
        effective_noise,
        chol,
        alpha,
    })
}

impl<T: Real> GpSurrogate<T> {
    pub fn n_train(&self) -> usize {
        self.x.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.alpha
    }

    fn cross_cov(&self, theta: &[T; N_PARAMS]) -> Vec<T> {
        self.x
            .iter()
            .map(|xi| matern_from_r2(scaled_r2(xi, theta, &self.hyper), self.hyper.signal_variance))
            .collect()
    }

    /// Posterior mean of the normalized RMSE.
    pub fn predict_norm_rmse(&self, theta: &ScaledParams<T>) -> T {
        let t = theta.as_array();
        let mut acc = T::zero();
        for (xi, a) in self.x.iter().zip(&self.alpha) {
            acc = acc + matern_from_r2(scaled_r2(xi, t, &self.hyper), self.hyper.signal_variance) * *a;
        }
        self.prior_mean + acc
    }

    /// Posterior mean and latent variance of the normalized RMSE.
    pub fn predict_with_variance(&self, theta: &ScaledParams<T>) -> (T, T) {
        let mut k = self.cross_cov(theta.as_array());
        let mean = self.prior_mean + k.iter().zip(&self.alpha).map(|(a, b)| *a * *b).sum::<T>();
        forward_solve(&self.chol, self.n_train(), &mut k);
        let explained: T = k.iter().map(|v| *v * *v).sum();
        (mean, (self.hyper.signal_variance - explained).max(T::zero()))
    }

    pub fn denormalize(&self, norm: T) -> T {
        norm * (self.rmse_max - self.rmse_min) + self.rmse_min
    }

    /// Predicted RMSE (K) from the clamped normalized prediction.
    pub fn predict_rmse(&self, theta: &ScaledParams<T>) -> T {
        let norm = self
            .predict_norm_rmse(theta)
            .max(T::lit(NORM_RMSE_CLAMP.0))
            .min(T::lit(NORM_RMSE_CLAMP.1));
        self.denormalize(norm)
    }

    /// Surrogate cost `g(theta) = exp(-RMSE_pred / sigma_o)`.
    pub fn predict_cost(&self, theta: &ScaledParams<T>, cfg: &CostConfig<T>) -> T {
        (-self.predict_rmse(theta) / cfg.sigma_o).exp()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let join = |v: &[T]| v.iter().map(|x| fmt_exact(*x)).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "# matern gaussian process surrogate");
        let _ = writeln!(out, "nu={MATERN_NU}");
        let _ = writeln!(out, "n_train={}", self.n_train());
        let _ = writeln!(out, "length_scales={}", join(&self.hyper.length_scales));
        let _ = writeln!(out, "signal_variance={}", fmt_exact(self.hyper.signal_variance));
        let _ = writeln!(out, "noise_variance={}", fmt_exact(self.hyper.noise_variance));
        let _ = writeln!(out, "effective_noise={}", fmt_exact(self.effective_noise));
        let _ = writeln!(out, "rmse_min={}", fmt_exact(self.rmse_min));
        let _ = writeln!(out, "rmse_max={}", fmt_exact(self.rmse_max));
        let _ = writeln!(out, "prior_mean={}", fmt_exact(self.prior_mean));
        let _ = writeln!(out, "theta1,theta2,theta3,theta4,target,weight");
        for ((x, y), a) in self.x.iter().zip(&self.y).zip(&self.alpha) {
            let _ = writeln!(out, "{},{},{}", join(x), fmt_exact(*y), fmt_exact(*a));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut header = std::collections::HashMap::new();
        let mut rows = Vec::new();
        let mut in_rows = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: line_no, msg };
            if !in_rows {
                if line.starts_with("theta1,") {
                    in_rows = true;
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| perr("expected key=value".into()))?;
                header.insert(k.trim().to_string(), (line_no, v.trim().to_string()));
                continue;
            }
            let vals = line
                .split(',')
                .map(|f| f.trim().parse::<T>().map_err(|_| perr(format!("bad number `{f}`"))))
                .collect::<Result<Vec<T>>>()?;
            if vals.len() != N_PARAMS + 2 {
                return Err(perr(format!("expected {} fields, found {}", N_PARAMS + 2, vals.len())));
            }
            rows.push(vals);
        }
        let get = |k: &str| -> Result<(usize, String)> {
            header
                .get(k)
                .cloned()
                .ok_or_else(|| Error::Parse { line: 0, msg: format!("missing `{k}`") })
        };
        let num = |k: &str| -> Result<T> {
            let (line, v) = get(k)?;
            v.parse::<T>().map_err(|_| Error::Parse { line, msg: format!("bad value for `{k}`") })
        };
        let (ls_line, ls) = get("length_scales")?;
        let ls: Vec<T> = ls
            .split(',')
            .map(|f| f.trim().parse::<T>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse { line: ls_line, msg: "bad length scales".into() })?;
        if ls.len() != N_PARAMS {
            return Err(Error::Parse { line: ls_line, msg: format!("expected {N_PARAMS} length scales") });
        }
        let hyper = GpHyper {
            length_scales: std::array::from_fn(|d| ls[d]),
            signal_variance: num("signal_variance")?,
            noise_variance: num("noise_variance")?,
        };
        hyper.validate()?;
        let (n_line, n_str) = get("n_train")?;
        let n: usize = n_str.parse().map_err(|_| Error::Parse { line: n_line, msg: "bad n_train".into() })?;
        if rows.len() != n || n == 0 {
            return Err(Error::Parse {
                line: n_line,
                msg: format!("n_train={n} but {} rows", rows.len()),
            });
        }
        let x: Vec<[T; N_PARAMS]> = rows.iter().map(|r| std::array::from_fn(|d| r[d])).collect();
        let y: Vec<T> = rows.iter().map(|r| r[N_PARAMS]).collect();
        let effective_noise = num("effective_noise")?;
        let prior_mean = num("prior_mean")?;
        let pair = PairwiseSq::new(&x);
        let mut chol = pair.kernel(&hyper, effective_noise);
        if !cholesky_in_place(&mut chol, n) {
            return Err(Error::IllConditioned { jitter: effective_noise.as_f64() });
        }
        let yc: Vec<T> = y.iter().map(|v| *v - prior_mean).collect();
        let alpha = solve_weights(&chol, n, &yc);
        Ok(Self {
            x,
            y,
            rmse_min: num("rmse_min")?,
            rmse_max: num("rmse_max")?,
            prior_mean,
            hyper,
            effective_noise,
            chol,
            alpha,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Coefficient of determination of `pred` against `actual`.
pub fn r_squared<T: Real>(pred: &[T], actual: &[T]) -> T {
    let n = T::lit(actual.len() as f64);
    let mean = actual.iter().copied().sum::<T>() / n;
    let ss_tot: T = actual.iter().map(|a| (*a - mean) * (*a - mean)).sum();
    let ss_res: T = pred.iter().zip(actual).map(|(p, a)| (*p - *a) * (*p - *a)).sum();
    T::one() - ss_res / ss_tot
}
