//! Scaled calibration parameters, their physical meaning and the prior.
//!
//! The four calibrated quantities are the saturated hydraulic conductivity
//! `K_s`, the van Genuchten shape `n`, the top-leaf Rubisco capacity `V_max0`
//! and the carbon-pool ratio factor `e_s`. Each one is exposed to the sampler
//! as a scaled value `theta` in `[0, 1]` and maps to physical space through a
//! multiplier of its default: `p = p_def * (min + (max - min) * theta)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const N_PARAMS: usize = 4;

/// Parameter labels, in vector order.
pub const PARAM_NAMES: [&str; N_PARAMS] = ["ks", "n", "vmax0", "es"];

/// Synthetic truth used by the twin experiments, in scaled units.
pub const TRUTH_THETA: [f64; N_PARAMS] = [0.75, 0.4, 0.25, 0.6];

/// Lower multiplier bound per parameter.
pub const MULTIPLIER_MIN: [f64; N_PARAMS] = [0.5, 0.8, 0.5, 0.25];
/// Upper multiplier bound per parameter.
pub const MULTIPLIER_MAX: [f64; N_PARAMS] = [1.5, 1.2, 1.5, 1.75];

/// Physical `n` never drops below this, keeping `n / (n - 1)` finite.
pub const MIN_VG_N: f64 = 1.01;

/// Point in the unit hypercube of scaled parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledParams<T> {
    theta: [T; N_PARAMS],
}

impl<T: Real> ScaledParams<T> {
    pub fn new(theta: [T; N_PARAMS]) -> Result<Self> {
        for (i, &t) in theta.iter().enumerate() {
            if !(t >= T::zero() && t <= T::one()) {
                return Err(Error::Domain(format!(
                    "theta{} = {} outside [0, 1]",
                    i + 1,
                    t
                )));
            }
        }
        Ok(Self { theta })
    }

    pub fn from_f64(theta: [f64; N_PARAMS]) -> Result<Self> {
        Self::new(theta.map(T::lit))
    }

    /// Center of the prior support.
    pub fn center() -> Self {
        Self {
            theta: [T::lit(0.5); N_PARAMS],
        }
    }

    pub fn truth() -> Self {
        Self {
            theta: TRUTH_THETA.map(T::lit),
        }
    }

    pub fn as_array(&self) -> &[T; N_PARAMS] {
        &self.theta
    }

    pub fn get(&self, i: usize) -> T {
        self.theta[i]
    }

    /// True when every component of `x` lies in `[0, 1]`.
    pub fn in_support(x: &[T; N_PARAMS]) -> bool {
        x.iter().all(|&t| t >= T::zero() && t <= T::one())
    }
}

/// Physical values of the four calibrated parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams<T> {
    /// Saturated hydraulic conductivity, m/s.
    pub ks: T,
    /// van Genuchten shape parameter.
    pub n: T,
    /// Maximum Rubisco capacity of the top leaf, mol m-2 s-1.
    pub vmax0: T,
    /// Carbon-pool ratio factor.
    pub es: T,
}

impl<T: Real> PhysicalParams<T> {
    pub fn to_array(&self) -> [T; N_PARAMS] {
        [self.ks, self.n, self.vmax0, self.es]
    }

    pub fn from_array(a: [T; N_PARAMS]) -> Self {
        Self {
            ks: a[0],
            n: a[1],
            vmax0: a[2],
            es: a[3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.ks > T::zero() && self.n > T::one() && self.vmax0 > T::zero() && self.es > T::zero();
        if ok && self.to_array().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid physical parameters {self:?}")))
        }
    }
}

/// Multiplier ranges and defaults mapping scaled to physical parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRanges<T> {
    pub theta_min: [T; N_PARAMS],
    pub theta_max: [T; N_PARAMS],
    pub defaults: PhysicalParams<T>,
}

impl<T: Real> ParamRanges<T> {
    /// Standard multiplier ranges around the given defaults.
    pub fn with_defaults(defaults: PhysicalParams<T>) -> Result<Self> {
        let r = Self {
            theta_min: MULTIPLIER_MIN.map(T::lit),
            theta_max: MULTIPLIER_MAX.map(T::lit),
            defaults,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..N_PARAMS {
            if !(self.theta_min[i] < self.theta_max[i]) {
                return Err(Error::Domain(format!(
                    "{}: multiplier range [{}, {}] is empty",
                    PARAM_NAMES[i], self.theta_min[i], self.theta_max[i]
                )));
            }
            let d = self.defaults.to_array()[i];
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::Domain(format!(
                    "{}: default {} must be positive",
                    PARAM_NAMES[i], d
                )));
            }
        }
        Ok(())
    }

    /// Maps scaled parameters to physical ones.
    pub fn denormalize(&self, theta: &ScaledParams<T>) -> Result<PhysicalParams<T>> {
        // re-check: ScaledParams can only be built in bounds, but keep the
        // error contract for callers holding raw arrays
        let theta = ScaledParams::new(theta.theta)?;
        let defaults = self.defaults.to_array();
        let mut out = [T::zero(); N_PARAMS];
        for i in 0..N_PARAMS {
            let mult = self.theta_min[i] + (self.theta_max[i] - self.theta_min[i]) * theta.theta[i];
            out[i] = defaults[i] * mult;
        }
        out[1] = out[1].max(T::lit(MIN_VG_N));
        let p = PhysicalParams::from_array(out);
        p.validate()?;
        Ok(p)
    }

    /// Inverse of [`denormalize`](Self::denormalize).
    pub fn normalize(&self, physical: &PhysicalParams<T>) -> Result<ScaledParams<T>> {
        let defaults = self.defaults.to_array();
        let values = physical.to_array();
        let mut theta = [T::zero(); N_PARAMS];
        // allow for rounding at the range endpoints
        let slack = T::lit(1e-12);
        for i in 0..N_PARAMS {
            let mult = values[i] / defaults[i];
            let t = (mult - self.theta_min[i]) / (self.theta_max[i] - self.theta_min[i]);
            if !(t >= -slack && t <= T::one() + slack) {
                return Err(Error::Domain(format!(
                    "{} = {} outside multiplier range [{}, {}] of default {}",
                    PARAM_NAMES[i], values[i], self.theta_min[i], self.theta_max[i], defaults[i]
                )));
            }
            theta[i] = t.max(T::zero()).min(T::one());
        }
        ScaledParams::new(theta)
    }
}

/// Draws from the bounded uniform prior on `[0, 1]^4`.
pub fn prior_sample<T: Real, R: Rng + ?Sized>(rng: &mut R) -> ScaledParams<T> {
    let theta = std::array::from_fn(|_| T::lit(rng.random::<f64>()));
    ScaledParams { theta }
}
