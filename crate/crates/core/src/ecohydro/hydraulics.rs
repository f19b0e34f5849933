//! van Genuchten soil water retention and unsaturated conductivity.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const N_LAYERS: usize = 3;

/// Tolerance for water contents drifting outside `[w_r, w_s]` through rounding.
pub const DRIFT_TOLERANCE: f64 = 1e-9;

/// Hydraulic properties of the soil column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoilParams<T> {
    /// Saturated hydraulic conductivity, m/s.
    pub ks: T,
    /// Shape parameter `n` (> 1).
    pub n: T,
    /// Inverse air-entry suction, 1/m.
    pub alpha: T,
    /// Saturated water content (porosity), m3/m3.
    pub w_s: T,
    /// Residual water content, m3/m3.
    pub w_r: T,
    /// Layer thicknesses from the surface down, m.
    pub layer_depths: [T; N_LAYERS],
    /// Suction at which bare-soil evaporation stops, m.
    pub psi_evap_max: T,
}

impl<T: Real> SoilParams<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.w_r >= T::zero()
            && self.w_r < self.w_s
            && self.w_s <= T::one()
            && self.alpha > T::zero()
            && self.n > T::one()
            && self.ks > T::zero()
            && self.psi_evap_max > T::zero()
            && self.layer_depths.iter().all(|&d| d > T::zero());
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid soil parameters {self:?}")))
        }
    }

    /// Exponent `n / (n - 1)` shared by retention and conductivity.
    #[inline]
    fn inv_m(&self) -> T {
        self.n / (self.n - T::one())
    }
}

/// Effective saturation `S = (w - w_r) / (w_s - w_r)`.
///
/// Values within [`DRIFT_TOLERANCE`] outside the physical range are clamped
/// with a warning; anything further out is a domain error.
pub fn effective_saturation<T: Real>(w: T, soil: &SoilParams<T>) -> Result<T> {
    let tol = T::lit(DRIFT_TOLERANCE);
    if !(w >= soil.w_r - tol && w <= soil.w_s + tol) {
        return Err(Error::Domain(format!(
            "water content {} outside [{}, {}]",
            w, soil.w_r, soil.w_s
        )));
    }
    if w < soil.w_r || w > soil.w_s {
        log::warn!("clamping water content {w} into [{}, {}]", soil.w_r, soil.w_s);
    }
    let w = w.max(soil.w_r).min(soil.w_s);
    Ok((w - soil.w_r) / (soil.w_s - soil.w_r))
}

/// Capillary suction head, m, from the standard van Genuchten closed form
/// `psi = (S^(-n/(n-1)) - 1)^(1/n) / alpha`.
pub fn vg_suction<T: Real>(w: T, soil: &SoilParams<T>) -> Result<T> {
    let s = effective_saturation(w, soil)?;
    if s <= T::zero() {
        return Err(Error::SuctionOverflow {
            w: w.as_f64(),
            w_r: soil.w_r.as_f64(),
        });
    }
    Ok(suction_from_saturation(s, soil.n, soil.alpha))
}

/// Suction for an effective saturation already known to lie in `(0, 1]`.
#[inline]
pub fn suction_from_saturation<T: Real>(s: T, n: T, alpha: T) -> T {
    let inv_m = n / (n - T::one());
    suction_from_root(pow_pos(s, inv_m), n, alpha)
}

/// `a^b` for `a > 0` via `exp(b ln a)`, about ten times cheaper than `powf`.
#[inline]
fn pow_pos<T: Real>(a: T, b: T) -> T {
    (b * a.ln()).exp()
}

/// Suction from `x = S^(n/(n-1))`.
#[inline]
fn suction_from_root<T: Real>(x: T, n: T, alpha: T) -> T {
    let y = T::one() / x - T::one();
    if y > T::zero() {
        pow_pos(y, T::one() / n) / alpha
    } else {
        T::zero()
    }
}

/// Conductivity from `S` and `x = S^(n/(n-1))`.
#[inline]
fn conductivity_from_root<T: Real>(s: T, x: T, soil: &SoilParams<T>) -> T {
    let m = T::one() - T::one() / soil.n;
    let d = T::one() - x;
    let inner = if d > T::zero() { T::one() - pow_pos(d, m) } else { T::one() };
    soil.ks * s.sqrt() * inner * inner
}

/// Suction (evaluated at `max(S, s_floor)`) and conductivity at `S` in one
/// pass, sharing the power of `S`.
#[inline]
pub fn suction_and_conductivity<T: Real>(s: T, s_floor: T, soil: &SoilParams<T>) -> (T, T) {
    let inv_m = soil.inv_m();
    let x = if s > T::zero() { pow_pos(s, inv_m) } else { T::zero() };
    let k = if s > T::zero() { conductivity_from_root(s, x, soil) } else { T::zero() };
    let psi = if s >= s_floor {
        suction_from_root(x, soil.n, soil.alpha)
    } else {
        suction_from_saturation(s_floor, soil.n, soil.alpha)
    };
    (psi, k)
}

/// Unsaturated hydraulic conductivity, m/s (Mualem-van Genuchten).
pub fn vg_conductivity<T: Real>(w: T, soil: &SoilParams<T>) -> Result<T> {
    let s = effective_saturation(w, soil)?;
    Ok(conductivity_from_saturation(s, soil))
}

#[inline]
pub fn conductivity_from_saturation<T: Real>(s: T, soil: &SoilParams<T>) -> T {
    if s <= T::zero() {
        return T::zero();
    }
    conductivity_from_root(s, pow_pos(s, soil.inv_m()), soil)
}

/// Water content at which suction equals `psi` (retention curve inverse).
pub fn water_content_at_suction<T: Real>(psi: T, soil: &SoilParams<T>) -> T {
    let m = T::one() - T::one() / soil.n;
    let s = (T::one() + (soil.alpha * psi).powf(soil.n)).powf(-m);
    soil.w_r + s * (soil.w_s - soil.w_r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn soil(alpha: f64, n: f64, ks: f64) -> SoilParams<f64> {
        SoilParams {
            ks,
            n,
            alpha,
            w_s: 0.45,
            w_r: 0.05,
            layer_depths: [0.05, 0.10, 0.10],
            psi_evap_max: 100.0,
        }
    }

    #[test]
    fn saturation_endpoints() {
        let s = soil(2.0, 2.0, 1e-5);
        assert_eq!(effective_saturation(0.45, &s).unwrap(), 1.0);
        assert_eq!(effective_saturation(0.05, &s).unwrap(), 0.0);
        assert!((effective_saturation(0.25, &s).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn saturation_drift_and_domain() {
        let s = soil(2.0, 2.0, 1e-5);
        assert_eq!(effective_saturation(0.45 + 1e-12, &s).unwrap(), 1.0);
        assert!(matches!(effective_saturation(0.46, &s), Err(Error::Domain(_))));
        assert!(matches!(effective_saturation(0.0, &s), Err(Error::Domain(_))));
    }

    #[test]
    fn suction_zero_at_saturation_and_overflow_at_residual() {
        let s = soil(2.0, 2.0, 1e-5);
        assert_eq!(vg_suction(0.45, &s).unwrap(), 0.0);
        assert!(matches!(vg_suction(0.05, &s), Err(Error::SuctionOverflow { .. })));
    }

    #[test]
    fn suction_half_saturation() {
        // S = 0.5, alpha = 2, n = 2 gives 0.5 * sqrt(3)
        let s = soil(2.0, 2.0, 1e-5);
        let psi = vg_suction(0.25, &s).unwrap();
        assert!((psi - 0.5 * 3f64.sqrt()).abs() < 1e-14);
        // inverting the retention curve w(psi) by bisection lands on S = 0.5
        let (mut lo, mut hi) = (1e-6f64, 1e3f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let th = 1.0 / (1.0 + (2.0 * mid).powi(2)).sqrt();
            if th > 0.5 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((0.5 * (lo + hi) - psi).abs() < 1e-10);
        assert!((water_content_at_suction(psi, &s) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn conductivity_anchors() {
        let s = soil(2.0, 2.0, 3e-6);
        assert!((vg_conductivity(0.45, &s).unwrap() - 3e-6).abs() < 1e-20);
        assert_eq!(vg_conductivity(0.05, &s).unwrap(), 0.0);
        // 0.5^0.5 * (1 - 0.75^0.5)^2
        let expect = 0.5f64.sqrt() * (1.0 - 0.75f64.sqrt()).powi(2);
        let k = vg_conductivity(0.25, &s).unwrap() / 3e-6;
        assert!((k - expect).abs() < 1e-14);
        assert!((k - 0.012_692).abs() < 5e-6);
    }

    #[test]
    fn f32_agrees_with_f64() {
        let s64 = soil(2.0, 1.6, 1e-5);
        let s32 = SoilParams {
            ks: 1e-5_f32,
            n: 1.6,
            alpha: 2.0,
            w_s: 0.45,
            w_r: 0.05,
            layer_depths: [0.05, 0.1, 0.1],
            psi_evap_max: 100.0,
        };
        for w in [0.1, 0.2, 0.3, 0.4] {
            let a = vg_suction(w, &s64).unwrap();
            let b = vg_suction(w as f32, &s32).unwrap() as f64;
            assert!((a - b).abs() <= 1e-4 * a.max(1.0));
        }
    }

    #[test]
    fn monotone_over_random_soils() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let s = soil(rng.random_range(0.5..10.0), rng.random_range(1.05..3.0), rng.random_range(1e-7..1e-4));
            let mut prev_k = -1.0;
            let mut prev_psi = f64::INFINITY;
            for k in 1..=1000 {
                let w = s.w_r + (s.w_s - s.w_r) * k as f64 / 1000.0;
                let kk = vg_conductivity(w, &s).unwrap();
                let psi = vg_suction(w, &s).unwrap();
                assert!(kk >= prev_k && kk <= s.ks * (1.0 + 1e-12));
                assert!(psi <= prev_psi && psi >= 0.0);
                prev_k = kk;
                prev_psi = psi;
            }
        }
    }
}
