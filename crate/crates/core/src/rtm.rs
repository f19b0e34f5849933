//! Zeroth-order tau-omega radiative transfer: the observation operator that
//! maps model states to passive-microwave brightness temperatures.
//!
//! Soil emissivity is linear in surface soil moisture and the canopy optical
//! depth is proportional to LAI. Channel constants are fixed per scenario and
//! never calibrated.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ecohydro::ModelState;
use crate::error::{Error, Result};
use crate::scalar::{fmt_exact, Real};

/// Channel labels in series column order: 6.925 and 10.65 GHz, H and V.
pub const CHANNEL_LABELS: [&str; 4] = ["069H", "069V", "107H", "107V"];
pub const N_CHANNELS: usize = 4;

pub const OBS_CSV_HEADER: &str = "hour,tb_069H_K,tb_069V_K,tb_107H_K,tb_107V_K";

/// Valid brightness temperature range, K (exclusive).
pub const TB_BOUNDS: (f64, f64) = (100.0, 340.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    H,
    V,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams<T> {
    pub label: String,
    pub polarization: Polarization,
    /// Single-scattering albedo.
    pub omega: T,
    /// Optical depth per unit LAI.
    pub b_veg: T,
    /// Emissivity of dry soil.
    pub e_dry: T,
    /// Emissivity loss per unit volumetric surface moisture.
    pub s_m: T,
    /// Incidence angle, radians.
    pub inc_angle: T,
}

impl<T: Real> ChannelParams<T> {
    pub fn validate(&self, w_s: T) -> Result<()> {
        let ok = self.omega >= T::zero()
            && self.omega <= T::lit(0.2)
            && self.e_dry > T::zero()
            && self.e_dry <= T::one()
            && self.s_m >= T::zero()
            && self.e_dry - self.s_m * w_s > T::zero()
            && self.b_veg >= T::zero()
            && self.inc_angle >= T::zero()
            && self.inc_angle < T::lit(std::f64::consts::FRAC_PI_2);
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid channel {}: {self:?}", self.label)))
        }
    }

    pub fn cast<U: Real>(&self) -> ChannelParams<U> {
        ChannelParams {
            label: self.label.clone(),
            polarization: self.polarization,
            omega: U::lit(self.omega.as_f64()),
            b_veg: U::lit(self.b_veg.as_f64()),
            e_dry: U::lit(self.e_dry.as_f64()),
            s_m: U::lit(self.s_m.as_f64()),
            inc_angle: U::lit(self.inc_angle.as_f64()),
        }
    }
}

/// Brightness temperature from the explicit inputs of the tau-omega model.
#[inline]
pub fn tau_omega<T: Real>(t_surf: T, lai: T, w_surface: T, ch: &ChannelParams<T>) -> T {
    let tau = ch.b_veg * lai;
    let gamma = (-tau / ch.inc_angle.cos()).exp();
    let e_soil = ch.e_dry - ch.s_m * w_surface;
    let one = T::one();
    t_surf * (e_soil * gamma + (one - ch.omega) * (one - gamma) * (one + (one - e_soil) * gamma))
}

/// Brightness temperature, K, of `state` seen through `channel`.
pub fn brightness_temperature<T: Real>(state: &ModelState<T>, channel: &ChannelParams<T>) -> Result<T> {
    let inputs = [state.t_surf, state.lai, state.w[0]];
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            layer: 0,
            what: format!("non-finite radiative transfer input {inputs:?}"),
        });
    }
    let tb = tau_omega(state.t_surf, state.lai, state.w[0], channel);
    if !tb.is_finite() {
        return Err(Error::Numerical {
            layer: 0,
            what: format!("non-finite brightness temperature for channel {}", channel.label),
        });
    }
    Ok(tb)
}

/// Brightness temperatures at a set of timestamps, one column per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries<T> {
    pub hours: Vec<usize>,
    /// `tb[t][c]`, K.
    pub tb: Vec<[T; N_CHANNELS]>,
    /// Standard deviation of the noise added at generation, K.
    pub noise_sd: T,
}

impl<T: Real> ObservationSeries<T> {
    pub fn len(&self) -> usize {
        self.hours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hours.is_empty()
    }

    /// Column of one channel.
    pub fn channel(&self, c: usize) -> Vec<T> {
        self.tb.iter().map(|row| row[c]).collect()
    }

    /// Rows whose timestamps satisfy `keep`.
    pub fn filter_hours(&self, keep: impl Fn(usize) -> bool) -> Self {
        let (hours, tb) = self
            .hours
            .iter()
            .zip(&self.tb)
            .filter(|(h, _)| keep(**h))
            .map(|(h, r)| (*h, *r))
            .unzip();
        Self {
            hours,
            tb,
            noise_sd: self.noise_sd,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 100);
        out.push_str(OBS_CSV_HEADER);
        out.push('\n');
        for (h, row) in self.hours.iter().zip(&self.tb) {
            out.push_str(&h.to_string());
            for v in row {
                out.push(',');
                out.push_str(&fmt_exact(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == OBS_CSV_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header `{OBS_CSV_HEADER}`"),
                })
            }
        }
        let mut hours = Vec::new();
        let mut tb = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != N_CHANNELS + 1 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {} fields, found {}", N_CHANNELS + 1, fields.len()),
                });
            }
            let hour = fields[0].trim().parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad hour `{}`", fields[0]),
            })?;
            let mut row = [T::zero(); N_CHANNELS];
            for c in 0..N_CHANNELS {
                row[c] = fields[c + 1].trim().parse::<T>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad brightness temperature `{}`", fields[c + 1]),
                })?;
            }
            hours.push(hour);
            tb.push(row);
        }
        if hours.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            hours,
            tb,
            noise_sd: T::zero(),
        })
    }
}

/// Observation times every `spacing_hours`, starting at `first_hour`.
pub fn observation_hours(total_hours: usize, first_hour: usize, spacing_hours: usize) -> Vec<usize> {
    (first_hour..total_hours).step_by(spacing_hours.max(1)).collect()
}

/// Brightness temperatures of a sampled trajectory, with optional Gaussian
/// noise of standard deviation `noise_sd`.
///
/// `states[i]` must be the model state at `hours[i]`.
pub fn observe_states<T: Real, R: Rng + ?Sized>(
    states: &[ModelState<T>],
    hours: &[usize],
    channels: &[ChannelParams<T>],
    noise_sd: T,
    rng: &mut R,
) -> Result<ObservationSeries<T>> {
    if channels.len() != N_CHANNELS {
        return Err(Error::Invalid(format!("expected {N_CHANNELS} channels, got {}", channels.len())));
    }
    if states.len() != hours.len() {
        return Err(Error::Alignment(format!(
            "{} states for {} timestamps",
            states.len(),
            hours.len()
        )));
    }
    let mut tb = Vec::with_capacity(states.len());
    for state in states {
        let mut row = [T::zero(); N_CHANNELS];
        for (c, ch) in channels.iter().enumerate() {
            let mut v = brightness_temperature(state, ch)?;
            if noise_sd > T::zero() {
                let z: f64 = StandardNormal.sample(rng);
                v = v + noise_sd * T::lit(z);
            }
            row[c] = v;
        }
        tb.push(row);
    }
    Ok(ObservationSeries {
        hours: hours.to_vec(),
        tb,
        noise_sd,
    })
}

/// Observes an hourly trajectory at the given timestamps.
pub fn observe<T: Real, R: Rng + ?Sized>(
    trajectory: &[ModelState<T>],
    hours: &[usize],
    channels: &[ChannelParams<T>],
    noise_sd: T,
    rng: &mut R,
) -> Result<ObservationSeries<T>> {
    let mut states = Vec::with_capacity(hours.len());
    for &h in hours {
        let s = trajectory.get(h).ok_or(Error::Range {
            hour: h,
            len: trajectory.len(),
        })?;
        states.push(*s);
    }
    observe_states(&states, hours, channels, noise_sd, rng)
}
