//! Toy ecohydrological forward model standing in for a full land surface
//! model: van Genuchten soil hydraulics plus a carbon-balance vegetation
//! scheme, driven by synthetic hourly forcing.

pub mod forcing;
pub mod hydraulics;
pub mod model;
pub mod preset;

pub use forcing::{generate_forcing, ForcingRecord, ForcingSeries, HOURS_PER_YEAR};
pub use hydraulics::{effective_saturation, vg_conductivity, vg_suction, SoilParams, N_LAYERS};
pub use model::{step_soil, step_vegetation, ModelState, ToyModel, VegParams, WaterFluxes, DT_SECONDS};
pub use preset::ScenarioPreset;
