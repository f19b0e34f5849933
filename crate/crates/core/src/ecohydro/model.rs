//! Three-layer soil column coupled to a three-pool carbon balance.

use super::forcing::{ForcingRecord, ForcingSeries};
use super::hydraulics::{effective_saturation, suction_and_conductivity, SoilParams, N_LAYERS};
use super::preset::ScenarioPreset;
use crate::error::{Error, Result};
use crate::param_space::PhysicalParams;
use crate::scalar::Real;

/// Model time step, s.
pub const DT_SECONDS: f64 = 3600.0;

/// Fraction of roots in each soil layer.
pub const ROOT_FRACTION: [f64; N_LAYERS] = [0.3, 0.4, 0.3];

/// kg of carbon per mol.
pub const CARBON_KG_PER_MOL: f64 = 0.012;

pub const WATER_DENSITY: f64 = 1000.0;

/// Lower bound on the LAI seen by the light-interception term, so bare
/// ground can re-green.
pub const LAI_SEED: f64 = 0.05;

// saturation floor used when evaluating suction inside flux terms
const FLUX_SATURATION_FLOOR: f64 = 1e-4;

/// Vegetation parameters of the carbon balance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VegParams<T> {
    /// Maximum Rubisco capacity of the top leaf, mol m-2 s-1.
    pub vmax0: T,
    /// Minimum ratio of stem plus root carbon to leaf carbon.
    pub es: T,
    /// Specific leaf area, m2/kg.
    pub sl: T,
    pub a_leaf: T,
    pub a_stem: T,
    pub a_root: T,
    /// Turnover rates, 1/s.
    pub d_leaf: T,
    pub d_stem: T,
    pub d_root: T,
    pub k_ext: T,
    pub w_wilt: T,
    pub w_fc: T,
    /// Water transpired per unit carbon fixed, kg/kg.
    pub water_per_carbon: T,
}

impl<T: Real> VegParams<T> {
    pub fn validate(&self, w_s: T) -> Result<()> {
        let fr = [self.a_leaf, self.a_stem, self.a_root];
        let sum = self.a_leaf + self.a_stem + self.a_root;
        let ok = fr.iter().all(|&f| f >= T::zero() && f <= T::one())
            && (sum - T::one()).abs() < T::lit(1e-6)
            && self.d_leaf >= T::zero()
            && self.d_stem >= T::zero()
            && self.d_root >= T::zero()
            && T::zero() < self.w_wilt
            && self.w_wilt < self.w_fc
            && self.w_fc < w_s
            && self.vmax0 > T::zero()
            && self.es > T::zero()
            && self.sl > T::zero()
            && self.water_per_carbon >= T::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid vegetation parameters {self:?}")))
        }
    }

    /// Water-stress factor in `[0, 1]` for a root-zone water content.
    #[inline]
    pub fn water_factor(&self, w_root: T) -> T {
        ((w_root - self.w_wilt) / (self.w_fc - self.w_wilt)).max(T::zero()).min(T::one())
    }

    /// Net primary production of `state` under `forcing`, kg C m-2 s-1.
    #[inline]
    pub fn npp(&self, state: &ModelState<T>, forcing: &ForcingRecord<T>) -> T {
        if !(forcing.swrad > T::zero()) {
            return T::zero();
        }
        let lai = self.sl * state.c_leaf;
        let f_water = self.water_factor(state.root_zone_moisture());
        let f_light = (T::one() - (-self.k_ext * lai.max(T::lit(LAI_SEED))).exp())
            * (forcing.swrad / T::lit(1000.0)).max(T::zero());
        self.vmax0 * f_light * f_water * T::lit(CARBON_KG_PER_MOL)
    }
}

/// Prognostic land state at one hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelState<T> {
    /// Volumetric soil moisture per layer, m3/m3.
    pub w: [T; N_LAYERS],
    /// Carbon pools, kg/m2.
    pub c_leaf: T,
    pub c_stem: T,
    pub c_root: T,
    /// Leaf area index, `sl * c_leaf`.
    pub lai: T,
    /// Surface temperature, K, taken from the forcing air temperature.
    pub t_surf: T,
}

impl<T: Real> ModelState<T> {
    /// Root-fraction weighted soil moisture.
    pub fn root_zone_moisture(&self) -> T {
        self.w
            .iter()
            .zip(ROOT_FRACTION)
            .fold(T::zero(), |acc, (&w, f)| acc + w * T::lit(f))
    }

    /// Column water storage, m.
    pub fn storage(&self, depths: &[T; N_LAYERS]) -> T {
        self.w.iter().zip(depths).fold(T::zero(), |acc, (&w, &d)| acc + w * d)
    }
}

/// Water moved during one soil step, m of water.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WaterFluxes<T> {
    pub precip: T,
    pub infiltration: T,
    pub runoff: T,
    pub evaporation: T,
    pub transpiration: T,
    pub drainage: T,
}

impl<T: Real> WaterFluxes<T> {
    pub fn accumulate(&mut self, other: &Self) {
        self.precip = self.precip + other.precip;
        self.infiltration = self.infiltration + other.infiltration;
        self.runoff = self.runoff + other.runoff;
        self.evaporation = self.evaporation + other.evaporation;
        self.transpiration = self.transpiration + other.transpiration;
        self.drainage = self.drainage + other.drainage;
    }

    /// Net water entering the column.
    pub fn net_input(&self) -> T {
        self.infiltration - self.evaporation - self.transpiration - self.drainage
    }
}

fn finite<T: Real>(v: T, layer: usize, what: &str) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical {
            layer,
            what: format!("{what} is {v}"),
        })
    }
}

/// Advances the soil column by one explicit step.
///
/// Order of operations: infiltration (filling layers from the top, capped by
/// the saturated conductivity), bare-soil evaporation from the surface
/// layer, root-weighted transpiration, Darcy exchange across the two internal
/// faces, free drainage at the bottom. Every flux is limited so that no layer
/// leaves `[w_r, w_s]`; capillary exchange is further limited to the amount
/// that equalizes saturation between the two layers.
pub fn step_soil<T: Real>(
    state: &ModelState<T>,
    forcing: &ForcingRecord<T>,
    soil: &SoilParams<T>,
    veg: &VegParams<T>,
    dt: T,
) -> Result<(ModelState<T>, WaterFluxes<T>)> {
    let dz = soil.layer_depths;
    let span = soil.w_s - soil.w_r;
    let floor = T::lit(FLUX_SATURATION_FLOOR);

    let mut sat = [T::zero(); N_LAYERS];
    let mut psi = [T::zero(); N_LAYERS];
    let mut cond = [T::zero(); N_LAYERS];
    for i in 0..N_LAYERS {
        sat[i] = effective_saturation(state.w[i], soil)?;
        let (p, k) = suction_and_conductivity(sat[i], floor, soil);
        psi[i] = finite(p, i, "suction")?;
        cond[i] = finite(k, i, "conductivity")?;
    }

    let mut store: [T; N_LAYERS] = std::array::from_fn(|i| state.w[i] * dz[i]);
    let lo: [T; N_LAYERS] = std::array::from_fn(|i| soil.w_r * dz[i]);
    let hi: [T; N_LAYERS] = std::array::from_fn(|i| soil.w_s * dz[i]);
    let mut fx = WaterFluxes {
        precip: forcing.precip * dt,
        ..Default::default()
    };

    // infiltration
    let half = T::lit(0.5);
    let capacity = soil.ks * dt;
    let space: T = (0..N_LAYERS).fold(T::zero(), |a, i| a + (hi[i] - store[i]).max(T::zero()));
    let mut remaining = fx.precip.min(capacity).min(space);
    fx.infiltration = remaining;
    for i in 0..N_LAYERS {
        let take = remaining.min((hi[i] - store[i]).max(T::zero()));
        store[i] = store[i] + take;
        remaining = remaining - take;
    }
    fx.infiltration = finite(fx.infiltration - remaining, 0, "infiltration")?;
    fx.runoff = fx.precip - fx.infiltration;

    // evaporation and transpiration
    let evap = if forcing.pet > T::zero() {
        let gap = (-veg.k_ext * state.lai).exp();
        let beta = (T::one() - psi[0] / soil.psi_evap_max).max(T::zero());
        (forcing.pet * dt * beta * gap).min((store[0] - lo[0]).max(T::zero()))
    } else {
        T::zero()
    };
    store[0] = store[0] - evap;
    fx.evaporation = finite(evap, 0, "evaporation")?;
    // stomatal water loss follows carbon uptake
    let demand = veg.npp(state, forcing) * veg.water_per_carbon / T::lit(WATER_DENSITY) * dt;
    for i in 0..N_LAYERS {
        let t = (demand * T::lit(ROOT_FRACTION[i])).min((store[i] - lo[i]).max(T::zero()));
        store[i] = store[i] - finite(t, i, "transpiration")?;
        fx.transpiration = fx.transpiration + t;
    }

    // interlayer exchange
    for i in 0..N_LAYERS - 1 {
        let j = i + 1;
        let k_face = half * (cond[i] + cond[j]);
        let dzc = half * (dz[i] + dz[j]);
        let s_i = (store[i] - lo[i]) / (span * dz[i]);
        let s_j = (store[j] - lo[j]) / (span * dz[j]);
        let s_eq = (s_i * dz[i] + s_j * dz[j]) / (dz[i] + dz[j]);
        let to_equal = (s_i - s_eq) * span * dz[i];
        let mut capillary = k_face * (psi[j] - psi[i]) / dzc * dt;
        if capillary * to_equal > T::zero() {
            let cap = to_equal.abs();
            capillary = capillary.max(-cap).min(cap);
        } else {
            capillary = T::zero();
        }
        let mut transfer = finite(capillary + k_face * dt, i, "interlayer flux")?;
        if transfer > T::zero() {
            transfer = transfer.min(store[i] - lo[i]).min(hi[j] - store[j]).max(T::zero());
        } else {
            transfer = transfer.max(-(store[j] - lo[j])).max(-(hi[i] - store[i])).min(T::zero());
        }
        store[i] = store[i] - transfer;
        store[j] = store[j] + transfer;
    }

    // free drainage
    let last = N_LAYERS - 1;
    let drain = (cond[last] * dt).min((store[last] - lo[last]).max(T::zero()));
    store[last] = store[last] - finite(drain, last, "drainage")?;
    fx.drainage = drain;

    let mut next = *state;
    for i in 0..N_LAYERS {
        next.w[i] = finite(store[i] / dz[i], i, "water content")?.max(soil.w_r).min(soil.w_s);
    }
    next.t_surf = forcing.temp;
    Ok((next, fx))
}

/// Advances the carbon pools by one explicit step.
///
/// NPP (see [`VegParams::npp`]) follows light interception, normalized radiation and root-zone water
/// stress. Leaf allocation is suspended while stem plus root carbon is below
/// `es` times leaf carbon; any remaining excess of leaf carbon after the
/// update is moved to stem and root so the constraint holds at every step.
pub fn step_vegetation<T: Real>(state: &ModelState<T>, forcing: &ForcingRecord<T>, veg: &VegParams<T>, dt: T) -> ModelState<T> {
    let zero = T::zero();
    let half = T::lit(0.5);
    let f_water = veg.water_factor(state.root_zone_moisture());
    let npp = veg.npp(state, forcing);

    let (mut a_leaf, mut a_stem, mut a_root) = (veg.a_leaf, veg.a_stem, veg.a_root);
    if state.c_stem + state.c_root < veg.es * state.c_leaf {
        a_stem = a_stem + half * a_leaf;
        a_root = a_root + half * a_leaf;
        a_leaf = zero;
    }
    // water stress adds to leaf turnover; temperature stress is not modelled
    let gamma = veg.d_leaf * (T::one() - f_water);

    let mut leaf = (state.c_leaf + dt * (a_leaf * npp - (veg.d_leaf + gamma) * state.c_leaf)).max(zero);
    let mut stem = (state.c_stem + dt * (a_stem * npp - veg.d_stem * state.c_stem)).max(zero);
    let mut root = (state.c_root + dt * (a_root * npp - veg.d_root * state.c_root)).max(zero);

    let support = stem + root;
    if support < veg.es * leaf {
        let moved = (veg.es * leaf - support) / (T::one() + veg.es);
        leaf = leaf - moved;
        stem = stem + half * moved;
        root = root + half * moved;
    }

    ModelState {
        c_leaf: leaf,
        c_stem: stem,
        c_root: root,
        lai: veg.sl * leaf,
        ..*state
    }
}

/// Land surface model with scenario constants bound, awaiting the four
/// calibrated parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel<T> {
    /// Soil constants; `ks` and `n` are overwritten per run.
    pub soil: SoilParams<T>,
    /// Vegetation constants; `vmax0` and `es` are overwritten per run.
    pub veg: VegParams<T>,
    pub initial: ModelState<T>,
}

impl<T: Real> ToyModel<T> {
    pub fn from_preset(p: &ScenarioPreset) -> Result<Self> {
        let s = &p.soil;
        let v = &p.veg;
        let soil = SoilParams {
            ks: T::lit(p.defaults.ks),
            n: T::lit(p.defaults.n),
            alpha: T::lit(s.alpha),
            w_s: T::lit(s.w_s),
            w_r: T::lit(s.w_r),
            layer_depths: s.layer_depths.map(T::lit),
            psi_evap_max: T::lit(s.psi_evap_max),
        };
        let veg = VegParams {
            vmax0: T::lit(p.defaults.vmax0),
            es: T::lit(p.defaults.es),
            sl: T::lit(v.sl),
            a_leaf: T::lit(v.a_leaf),
            a_stem: T::lit(v.a_stem),
            a_root: T::lit(v.a_root),
            d_leaf: T::lit(v.d_leaf),
            d_stem: T::lit(v.d_stem),
            d_root: T::lit(v.d_root),
            k_ext: T::lit(v.k_ext),
            w_wilt: T::lit(v.w_wilt),
            w_fc: T::lit(v.w_fc),
            water_per_carbon: T::lit(v.water_per_carbon),
        };
        let i = &p.initial;
        let initial = ModelState {
            w: [T::lit(i.w); N_LAYERS],
            c_leaf: T::lit(i.c_leaf),
            c_stem: T::lit(i.c_stem),
            c_root: T::lit(i.c_root),
            lai: T::lit(v.sl * i.c_leaf),
            t_surf: T::lit(p.climate.t_mean_k),
        };
        let m = Self { soil, veg, initial };
        m.soil.validate()?;
        m.veg.validate(m.soil.w_s)?;
        Ok(m)
    }

    /// Soil and vegetation parameters for one set of calibrated values.
    pub fn bind(&self, params: &PhysicalParams<T>) -> Result<(SoilParams<T>, VegParams<T>)> {
        params.validate()?;
        let soil = SoilParams {
            ks: params.ks,
            n: params.n,
            ..self.soil
        };
        let veg = VegParams {
            vmax0: params.vmax0,
            es: params.es,
            ..self.veg
        };
        soil.validate()?;
        Ok((soil, veg))
    }

    /// Runs `spinup_cycles` passes over the forcing, then one recorded pass,
    /// calling `visit(hour, state, fluxes)` after every recorded step.
    pub fn run<F>(&self, params: &PhysicalParams<T>, forcing: &ForcingSeries<T>, spinup_cycles: usize, mut visit: F) -> Result<ModelState<T>>
    where
        F: FnMut(usize, &ModelState<T>, &WaterFluxes<T>),
    {
        let (soil, veg) = self.bind(params)?;
        let dt = T::lit(DT_SECONDS);
        let mut state = self.initial;
        for cycle in 0..=spinup_cycles {
            let recording = cycle == spinup_cycles;
            for (hour, rec) in forcing.records().iter().enumerate() {
                let (s, fx) = step_soil(&state, rec, &soil, &veg, dt).map_err(|e| Error::Step {
                    hour: cycle * forcing.len() + hour,
                    source: Box::new(e),
                })?;
                state = step_vegetation(&s, rec, &veg, dt);
                if recording {
                    visit(hour, &state, &fx);
                }
            }
        }
        Ok(state)
    }

    /// Hourly post-spin-up trajectory, one state per forcing record.
    pub fn simulate(&self, params: &PhysicalParams<T>, forcing: &ForcingSeries<T>, spinup_cycles: usize) -> Result<Vec<ModelState<T>>> {
        let mut out = Vec::with_capacity(forcing.len());
        self.run(params, forcing, spinup_cycles, |_, s, _| out.push(*s))?;
        Ok(out)
    }

    /// Post-spin-up states at the given strictly increasing hours only.
    pub fn simulate_at(&self, params: &PhysicalParams<T>, forcing: &ForcingSeries<T>, spinup_cycles: usize, hours: &[usize]) -> Result<Vec<ModelState<T>>> {
        if let Some(&h) = hours.iter().find(|&&h| h >= forcing.len()) {
            return Err(Error::Range { hour: h, len: forcing.len() });
        }
        if hours.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("sampling hours must be strictly increasing".into()));
        }
        let mut out = Vec::with_capacity(hours.len());
        let mut next = 0;
        self.run(params, forcing, spinup_cycles, |h, s, _| {
            if next < hours.len() && hours[next] == h {
                out.push(*s);
                next += 1;
            }
        })?;
        Ok(out)
    }
}
