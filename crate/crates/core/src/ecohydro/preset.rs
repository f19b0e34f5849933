//! Scenario presets: climate, default parameters and the fixed model and
//! radiative-transfer constants of one site.

use std::path::Path;

use crate::error::{Error, Result};
use crate::kvfile;
use crate::param_space::PhysicalParams;
use crate::rtm::{ChannelParams, Polarization, CHANNEL_LABELS};

const SITE1: &str = include_str!("../../presets/site1.preset");
const SITE2: &str = include_str!("../../presets/site2.preset");
const SITE3: &str = include_str!("../../presets/site3.preset");

pub const BUILTIN_SCENARIOS: [&str; 3] = ["site1", "site2", "site3"];

// per-channel keys, in `CHANNEL_LABELS` order
const CHANNEL_KEYS: [[&str; 4]; 4] = [
    ["ch069H.omega", "ch069H.b_veg", "ch069H.e_dry", "ch069H.s_m"],
    ["ch069V.omega", "ch069V.b_veg", "ch069V.e_dry", "ch069V.s_m"],
    ["ch107H.omega", "ch107H.b_veg", "ch107H.e_dry", "ch107H.s_m"],
    ["ch107V.omega", "ch107V.b_veg", "ch107V.e_dry", "ch107V.s_m"],
];

/// Seasonal climate driving the forcing generator.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Climate {
    pub annual_precip_mm: f64,
    /// Day of year at the centre of the wet season.
    pub wet_peak_day: f64,
    /// Standard deviation of the wet-season bell, days.
    pub wet_width_days: f64,
    /// Rain-day probability at the wet-season peak.
    pub rain_day_prob: f64,
    pub event_hours_max: usize,
    pub t_mean_k: f64,
    pub t_annual_amp_k: f64,
    pub t_peak_day: f64,
    pub t_diurnal_amp_k: f64,
    pub t_wet_cooling_k: f64,
    pub sw_peak_wm2: f64,
    /// Fractional radiation loss to clouds at the wet-season peak.
    pub cloud_wet: f64,
    /// Potential evaporation per unit shortwave, (m/s) / (W/m2).
    pub pet_per_wm2: f64,
}

/// Soil constants that are not calibrated.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SoilConstants {
    pub alpha: f64,
    pub w_s: f64,
    pub w_r: f64,
    pub layer_depths: [f64; 3],
    pub psi_evap_max: f64,
}

/// Vegetation constants that are not calibrated.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VegConstants {
    pub sl: f64,
    pub a_leaf: f64,
    pub a_stem: f64,
    pub a_root: f64,
    pub d_leaf: f64,
    pub d_stem: f64,
    pub d_root: f64,
    pub k_ext: f64,
    pub w_wilt: f64,
    pub w_fc: f64,
    pub water_per_carbon: f64,
}

/// Initial state before spin-up.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InitialState {
    pub w: f64,
    pub c_leaf: f64,
    pub c_stem: f64,
    pub c_root: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPreset {
    pub name: String,
    pub climate: Climate,
    pub defaults: PhysicalParams<f64>,
    pub soil: SoilConstants,
    pub veg: VegConstants,
    pub initial: InitialState,
    pub channels: Vec<ChannelParams<f64>>,
}

impl ScenarioPreset {
    pub fn builtin(name: &str) -> Result<Self> {
        let text = match name {
            "site1" => SITE1,
            "site2" => SITE2,
            "site3" => SITE3,
            other => return Err(Error::Invalid(format!("unknown scenario `{other}`"))),
        };
        Self::parse(text)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses a preset; every key must be present exactly once.
    pub fn parse(text: &str) -> Result<Self> {
        let entries = kvfile::parse(text)?;
        let mut p = ScenarioPreset {
            name: String::new(),
            climate: Climate::default(),
            defaults: PhysicalParams {
                ks: 0.0,
                n: 0.0,
                vmax0: 0.0,
                es: 0.0,
            },
            soil: SoilConstants::default(),
            veg: VegConstants::default(),
            initial: InitialState::default(),
            channels: CHANNEL_LABELS
                .iter()
                .map(|l| ChannelParams {
                    label: l.to_string(),
                    polarization: if l.ends_with('H') { Polarization::H } else { Polarization::V },
                    omega: 0.0,
                    b_veg: 0.0,
                    e_dry: 0.0,
                    s_m: 0.0,
                    inc_angle: 0.0,
                })
                .collect(),
        };
        let mut seen: Vec<&str> = Vec::new();
        let mut name_seen = false;
        let mut event_hours_seen = false;
        for e in &entries {
            match e.key.as_str() {
                "name" => {
                    p.name = e.value.clone();
                    name_seen = true;
                    continue;
                }
                "event_hours_max" => {
                    p.climate.event_hours_max = e.count()? as usize;
                    event_hours_seen = true;
                    continue;
                }
                "inc_angle_deg" => {
                    let v = e.float()?.to_radians();
                    for ch in &mut p.channels {
                        ch.inc_angle = v;
                    }
                    seen.push("inc_angle_deg");
                    continue;
                }
                _ => {}
            }
            let v = e.float()?;
            let mut fields = p.float_fields();
            let slot = fields
                .iter_mut()
                .find(|(k, _)| *k == e.key)
                .ok_or_else(|| Error::Config {
                    line: e.line,
                    msg: format!("unknown preset key `{}`", e.key),
                })?;
            *slot.1 = v;
            seen.push(slot.0);
        }
        let mut missing: Vec<&str> = p
            .float_fields()
            .iter()
            .map(|(k, _)| *k)
            .filter(|k| !seen.contains(k))
            .collect();
        if !name_seen {
            missing.push("name");
        }
        if !event_hours_seen {
            missing.push("event_hours_max");
        }
        if !seen.contains(&"inc_angle_deg") {
            missing.push("inc_angle_deg");
        }
        if !missing.is_empty() {
            return Err(Error::Config {
                line: 0,
                msg: format!("preset is missing keys: {}", missing.join(", ")),
            });
        }
        p.validate()?;
        Ok(p)
    }

    fn float_fields(&mut self) -> Vec<(&'static str, &mut f64)> {
        let c = &mut self.climate;
        let d = &mut self.defaults;
        let s = &mut self.soil;
        let v = &mut self.veg;
        let i = &mut self.initial;
        let [d0, d1, d2] = &mut s.layer_depths;
        let mut out: Vec<(&'static str, &mut f64)> = vec![
            ("annual_precip_mm", &mut c.annual_precip_mm),
            ("wet_peak_day", &mut c.wet_peak_day),
            ("wet_width_days", &mut c.wet_width_days),
            ("rain_day_prob", &mut c.rain_day_prob),
            ("t_mean_k", &mut c.t_mean_k),
            ("t_annual_amp_k", &mut c.t_annual_amp_k),
            ("t_peak_day", &mut c.t_peak_day),
            ("t_diurnal_amp_k", &mut c.t_diurnal_amp_k),
            ("t_wet_cooling_k", &mut c.t_wet_cooling_k),
            ("sw_peak_wm2", &mut c.sw_peak_wm2),
            ("cloud_wet", &mut c.cloud_wet),
            ("pet_per_wm2", &mut c.pet_per_wm2),
            ("ks_def", &mut d.ks),
            ("n_def", &mut d.n),
            ("vmax0_def", &mut d.vmax0),
            ("es_def", &mut d.es),
            ("alpha", &mut s.alpha),
            ("w_s", &mut s.w_s),
            ("w_r", &mut s.w_r),
            ("depth1", d0),
            ("depth2", d1),
            ("depth3", d2),
            ("psi_evap_max", &mut s.psi_evap_max),
            ("sl", &mut v.sl),
            ("a_leaf", &mut v.a_leaf),
            ("a_stem", &mut v.a_stem),
            ("a_root", &mut v.a_root),
            ("d_leaf", &mut v.d_leaf),
            ("d_stem", &mut v.d_stem),
            ("d_root", &mut v.d_root),
            ("k_ext", &mut v.k_ext),
            ("w_wilt", &mut v.w_wilt),
            ("w_fc", &mut v.w_fc),
            ("water_per_carbon", &mut v.water_per_carbon),
            ("init_w", &mut i.w),
            ("init_c_leaf", &mut i.c_leaf),
            ("init_c_stem", &mut i.c_stem),
            ("init_c_root", &mut i.c_root),
        ];
        for (ch, keys) in self.channels.iter_mut().zip(CHANNEL_KEYS.iter()) {
            out.push((keys[0], &mut ch.omega));
            out.push((keys[1], &mut ch.b_veg));
            out.push((keys[2], &mut ch.e_dry));
            out.push((keys[3], &mut ch.s_m));
        }
        out
    }

    /// Serializes every key in a form [`ScenarioPreset::parse`] reads back
    /// exactly.
    pub fn to_text(&self) -> String {
        let mut copy = self.clone();
        let mut out = format!("name={}\nevent_hours_max={}\n", self.name, self.climate.event_hours_max);
        let angle = self.channels.first().map_or(0.0, |c| c.inc_angle.to_degrees());
        out.push_str(&format!("inc_angle_deg={}\n", crate::scalar::fmt_exact(angle)));
        for (k, v) in copy.float_fields() {
            out.push_str(&format!("{k}={}\n", crate::scalar::fmt_exact(*v)));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.veg;
        let s = &self.soil;
        let frac_sum = v.a_leaf + v.a_stem + v.a_root;
        let fracs_ok = [v.a_leaf, v.a_stem, v.a_root].iter().all(|f| (0.0..=1.0).contains(f))
            && (frac_sum - 1.0).abs() < 1e-9;
        if !fracs_ok {
            return Err(Error::Domain(format!("{}: allocation fractions must sum to 1", self.name)));
        }
        if v.d_leaf < 0.0 || v.d_stem < 0.0 || v.d_root < 0.0 {
            return Err(Error::Domain(format!("{}: turnover rates must be non-negative", self.name)));
        }
        if !(0.0 < v.w_wilt && v.w_wilt < v.w_fc && v.w_fc < s.w_s) {
            return Err(Error::Domain(format!("{}: need 0 < w_wilt < w_fc < w_s", self.name)));
        }
        if !(s.w_r <= self.initial.w && self.initial.w <= s.w_s) {
            return Err(Error::Domain(format!("{}: initial water content out of range", self.name)));
        }
        if self.climate.annual_precip_mm < 0.0 || self.climate.wet_width_days <= 0.0 {
            return Err(Error::Domain(format!("{}: invalid climate", self.name)));
        }
        for ch in &self.channels {
            ch.validate(s.w_s)?;
        }
        Ok(())
    }
}
