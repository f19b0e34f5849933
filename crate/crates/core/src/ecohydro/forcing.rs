//! Synthetic hourly meteorological forcing.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use super::preset::{Climate, ScenarioPreset};
use crate::error::{Error, Result};
use crate::scalar::{fmt_exact, Real};

pub const HOURS_PER_DAY: usize = 24;
pub const DAYS_PER_YEAR: usize = 365;
pub const HOURS_PER_YEAR: usize = HOURS_PER_DAY * DAYS_PER_YEAR;

pub const FORCING_CSV_HEADER: &str = "hour,precip_m_s,temp_K,swrad_Wm2,pet_m_s";

/// One hour of forcing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingRecord<T> {
    /// Precipitation rate, m/s.
    pub precip: T,
    /// Air temperature, K.
    pub temp: T,
    /// Incoming shortwave radiation, W/m2.
    pub swrad: T,
    /// Potential evaporation rate, m/s.
    pub pet: T,
}

/// Hourly forcing covering a whole number of 365-day years.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSeries<T> {
    records: Vec<ForcingRecord<T>>,
}

impl<T: Real> ForcingSeries<T> {
    pub fn new(records: Vec<ForcingRecord<T>>) -> Result<Self> {
        if records.is_empty() || records.len() % HOURS_PER_YEAR != 0 {
            return Err(Error::Invalid(format!(
                "forcing length {} is not a whole number of years",
                records.len()
            )));
        }
        for (h, r) in records.iter().enumerate() {
            let ok = r.precip >= T::zero()
                && r.temp >= T::lit(200.0)
                && r.temp <= T::lit(330.0)
                && r.swrad >= T::zero()
                && r.pet >= T::zero()
                && r.precip.is_finite()
                && r.swrad.is_finite()
                && r.pet.is_finite();
            if !ok {
                return Err(Error::Invalid(format!("forcing record at hour {h} out of range: {r:?}")));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[ForcingRecord<T>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn years(&self) -> usize {
        self.records.len() / HOURS_PER_YEAR
    }

    /// Total precipitation per year, mm.
    pub fn annual_precip_mm(&self) -> Vec<f64> {
        self.records
            .chunks(HOURS_PER_YEAR)
            .map(|y| y.iter().map(|r| r.precip.as_f64() * 3600.0 * 1000.0).sum())
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.records.len() * 96);
        out.push_str(FORCING_CSV_HEADER);
        out.push('\n');
        for (h, r) in self.records.iter().enumerate() {
            out.push_str(&format!(
                "{h},{},{},{},{}\n",
                fmt_exact(r.precip),
                fmt_exact(r.temp),
                fmt_exact(r.swrad),
                fmt_exact(r.pet)
            ));
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Gaussian wet-season weight in `[0, 1]`, periodic over the year.
pub fn wetness(day: usize, climate: &Climate) -> f64 {
    let d = day as f64 - climate.wet_peak_day;
    let year = DAYS_PER_YEAR as f64;
    let d = d - year * (d / year).round();
    (-0.5 * (d / climate.wet_width_days).powi(2)).exp()
}

/// Builds a forcing series for `years` years from the preset climate.
///
/// Temperature and radiation are deterministic seasonal and diurnal cycles.
/// Rain events are drawn day by day with a probability following the wet
/// season, and each year is rescaled so its total equals the preset target.
pub fn generate_forcing<T: Real>(preset: &ScenarioPreset, years: usize, seed: u64) -> Result<ForcingSeries<T>> {
    if years == 0 {
        return Err(Error::Invalid("forcing needs at least one year".into()));
    }
    let c = &preset.climate;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(years * HOURS_PER_YEAR);
    for _ in 0..years {
        let mut rain = vec![0.0f64; HOURS_PER_YEAR];
        let mut total = 0.0;
        for day in 0..DAYS_PER_YEAR {
            let p = c.rain_day_prob * wetness(day, c);
            let u: f64 = rng.random();
            if u >= p {
                continue;
            }
            let depth: f64 = Exp1.sample(&mut rng);
            let start = rng.random_range(0..HOURS_PER_DAY);
            let duration = rng.random_range(1..=c.event_hours_max.max(1));
            let first = day * HOURS_PER_DAY + start;
            let last = (first + duration).min(HOURS_PER_YEAR);
            let per_hour = depth / (last - first) as f64;
            for slot in &mut rain[first..last] {
                *slot += per_hour;
            }
            total += depth;
        }
        if total <= 0.0 {
            // guarantee at least one event so the annual target is met
            let first = c.wet_peak_day.round() as usize % DAYS_PER_YEAR * HOURS_PER_DAY;
            rain[first] = 1.0;
            total = 1.0;
        }
        let scale = c.annual_precip_mm / 1000.0 / total / 3600.0;
        for (h, r) in rain.iter().enumerate() {
            let day = h / HOURS_PER_DAY;
            let hod = (h % HOURS_PER_DAY) as f64;
            let wet = wetness(day, c);
            let season = (2.0 * PI * (day as f64 - c.t_peak_day) / DAYS_PER_YEAR as f64).cos();
            let diurnal = (2.0 * PI * (hod - 14.0) / HOURS_PER_DAY as f64).cos();
            let temp = c.t_mean_k + c.t_annual_amp_k * season + c.t_diurnal_amp_k * diurnal - c.t_wet_cooling_k * wet;
            let sun = (PI * (hod - 6.0) / 12.0).sin().max(0.0);
            let swrad = c.sw_peak_wm2 * sun * (1.0 - c.cloud_wet * wet);
            records.push(ForcingRecord {
                precip: T::lit(r * scale),
                temp: T::lit(temp),
                swrad: T::lit(swrad),
                pet: T::lit(c.pet_per_wm2 * swrad),
            });
        }
    }
    ForcingSeries::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecohydro::preset::ScenarioPreset;

    #[test]
    fn annual_totals_match_targets() {
        for (name, target) in [("site1", 1190.0), ("site2", 1590.0), ("site3", 110.0)] {
            let p = ScenarioPreset::builtin(name).unwrap();
            let f: ForcingSeries<f64> = generate_forcing(&p, 3, 5).unwrap();
            assert_eq!(f.len(), 3 * HOURS_PER_YEAR);
            for total in f.annual_precip_mm() {
                assert!((total - target).abs() <= 0.1 * target, "{name}: {total}");
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let p = ScenarioPreset::builtin("site1").unwrap();
        let a: ForcingSeries<f64> = generate_forcing(&p, 2, 42).unwrap();
        let b: ForcingSeries<f64> = generate_forcing(&p, 2, 42).unwrap();
        let c: ForcingSeries<f64> = generate_forcing(&p, 2, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_years_rejected() {
        let p = ScenarioPreset::builtin("site3").unwrap();
        assert!(generate_forcing::<f64>(&p, 0, 1).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let p = ScenarioPreset::builtin("site3").unwrap();
        let f: ForcingSeries<f64> = generate_forcing(&p, 1, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forcing.csv");
        f.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(FORCING_CSV_HEADER));
        assert_eq!(lines.count(), HOURS_PER_YEAR);
    }
}
