//! Whole-run properties of the toy land surface model on the shipped presets.

use lsm_surrogate::ecohydro::{generate_forcing, ScenarioPreset, ToyModel, WaterFluxes, HOURS_PER_YEAR};
use lsm_surrogate::param_space::{ParamRanges, PhysicalParams, ScaledParams, TRUTH_THETA};
use lsm_surrogate::{Forcing, Model};

fn setup(scenario: &str, years: usize) -> (ScenarioPreset, Model, Forcing) {
    let preset = ScenarioPreset::builtin(scenario).unwrap();
    let model = ToyModel::from_preset(&preset).unwrap();
    let forcing = generate_forcing(&preset, years, 1).unwrap();
    (preset, model, forcing)
}

fn defaults(p: &ScenarioPreset) -> PhysicalParams<f64> {
    let d = &p.defaults;
    PhysicalParams::from_array([d.ks, d.n, d.vmax0, d.es])
}

fn truth(p: &ScenarioPreset) -> PhysicalParams<f64> {
    ParamRanges::with_defaults(defaults(p)).unwrap().denormalize(&ScaledParams::truth()).unwrap()
}

#[test]
fn yearly_water_balance_closes() {
    for scenario in ["site1", "site2", "site3"] {
        let (p, model, forcing) = setup(scenario, 4);
        let dz = model.soil.layer_depths;
        for params in [defaults(&p), truth(&p)] {
            // separate running sums rather than WaterFluxes::accumulate
            let (mut inf, mut out, mut rain, mut lost) = (0.0, 0.0, 0.0, 0.0);
            let mut start = model.initial.storage(&dz);
            let mut worst: f64 = 0.0;
            model
                .run(&params, &forcing, 0, |h, s, fx: &WaterFluxes<f64>| {
                    inf += fx.infiltration;
                    out += fx.evaporation + fx.transpiration + fx.drainage;
                    rain += fx.precip;
                    lost += fx.runoff;
                    if (h + 1) % HOURS_PER_YEAR == 0 {
                        let end: f64 = s.w.iter().zip(&dz).map(|(w, d)| w * d).sum();
                        worst = worst.max((end - start - (inf - out)).abs());
                        worst = worst.max((rain - inf - lost).abs());
                        start = end;
                        (inf, out, rain, lost) = (0.0, 0.0, 0.0, 0.0);
                    }
                })
                .unwrap();
            assert!(worst < 1e-6, "{scenario}: yearly imbalance {worst} m");
        }
    }
}

#[test]
fn spin_up_starts_from_the_last_state() {
    // spinup cycles only replay the forcing, so the recorded pass of a
    // 1-cycle run is the second pass of a 0-cycle run on doubled forcing
    let (p, model, forcing) = setup("site1", 1);
    let params = truth(&p);
    let twice = Forcing::new([forcing.records(), forcing.records()].concat()).unwrap();
    let a = model.simulate(&params, &forcing, 1).unwrap();
    let b = model.simulate(&params, &twice, 0).unwrap();
    assert_eq!(a[..], b[HOURS_PER_YEAR..]);
}

#[test]
fn site1_lai_stays_in_band() {
    let (p, model, forcing) = setup("site1", 8);
    let traj = model.simulate(&truth(&p), &forcing, 4).unwrap();
    let lo = traj.iter().map(|s| s.lai).fold(f64::INFINITY, f64::min);
    let hi = traj.iter().map(|s| s.lai).fold(0.0, f64::max);
    assert!(lo >= 0.3 && hi <= 2.5, "site1 LAI range {lo}..{hi}");
    assert!(hi - lo > 0.5, "no seasonal cycle: {lo}..{hi}");
}

#[test]
fn scenario_lai_levels() {
    let mean_lai = |scenario: &str| {
        let (p, model, forcing) = setup(scenario, 8);
        let traj = model.simulate(&truth(&p), &forcing, 4).unwrap();
        traj.iter().map(|s| s.lai).sum::<f64>() / traj.len() as f64
    };
    let (s1, s2, s3) = (mean_lai("site1"), mean_lai("site2"), mean_lai("site3"));
    assert!((0.5..=2.0).contains(&s1), "site1 {s1}");
    assert!((2.0..=4.0).contains(&s2), "site2 {s2}");
    assert!(s3 < 0.05, "site3 {s3}");
}

#[test]
fn more_vmax0_never_less_leaf() {
    // five points over the calibrated range, 0.5x to 1.5x the default; the
    // first and third differ by a factor of two
    let (p, model, forcing) = setup("site1", 2);
    let ranges = ParamRanges::with_defaults(defaults(&p)).unwrap();
    let mut prev = 0.0;
    for k in 0..5 {
        let mut theta = TRUTH_THETA;
        theta[2] = k as f64 / 4.0;
        let params = ranges.denormalize(&ScaledParams::from_f64(theta).unwrap()).unwrap();
        let traj = model.simulate(&params, &forcing, 1).unwrap();
        let mean = traj.iter().map(|s| s.lai).sum::<f64>() / traj.len() as f64;
        assert!(mean >= prev, "theta3={}: {mean} < {prev}", theta[2]);
        prev = mean;
    }
}
