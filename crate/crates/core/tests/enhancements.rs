//! Directional checks on the interference-mitigation and identification
//! features, run on short uplink simulations.

mod common;

use aerosim::config::RunConfig;
use aerosim::enhancements::{
    aerial_id_roc, operating_point, partition_resources, received_power_profiles, sweep_power_control, PcScope,
};
use aerosim::uplink::UplinkParams;
use common::baseline;

const SEEDS: [u64; 3] = [1, 2, 3];

fn short(cfg: &RunConfig) -> UplinkParams {
    UplinkParams {
        duration_s: 3.0,
        offered_loads_bps: vec![4e6],
        altitudes: vec![120.0],
        ..cfg.uplink().unwrap().clone()
    }
}

#[test]
fn lower_aerial_alpha_does_not_hurt_terrestrial_throughput() {
    let (cfg, scn) = baseline();
    let rows = sweep_power_control(&scn, &short(&cfg), &SEEDS, PcScope::Aerial, &[-90.0], &[0.8, 1.0]).unwrap();
    let (reduced, base) = (&rows[0], &rows[1]);
    assert!(reduced.terrestrial_tput_bps >= base.terrestrial_tput_bps, "{rows:?}");
    assert!(reduced.mean_iot_db < base.mean_iot_db, "{rows:?}");
}

#[test]
fn lower_p0_for_everyone_lowers_interference() {
    let (cfg, scn) = baseline();
    let rows = sweep_power_control(&scn, &short(&cfg), &SEEDS, PcScope::All, &[-93.0, -90.0], &[1.0]).unwrap();
    assert!(rows[0].mean_iot_db < rows[1].mean_iot_db, "{rows:?}");
}

#[test]
fn partition_isolates_terrestrial_pool() {
    let (cfg, scn) = baseline();
    let p = short(&cfg);
    let rows: Vec<_> = [0.05, 0.2, 0.5]
        .iter()
        .map(|&f| partition_resources(&scn, &p, &SEEDS, f).unwrap())
        .collect();
    for r in &rows {
        assert_eq!(r.aerial_on_terrestrial_mw, 0.0, "{r:?}");
    }
    for w in rows.windows(2) {
        assert!(w[1].terrestrial_tput_bps <= w[0].terrestrial_tput_bps, "{rows:?}");
    }
    // A generous aerial reservation sits idle relative to the terrestrial pool.
    assert!(rows[2].aerial_underutilized, "{:?}", rows[2]);
}

#[test]
fn classifier_meets_roc_gate() {
    let (cfg, scn) = baseline();
    let a = cfg.aerial_id.clone().unwrap();
    let pc = cfg.uplink().unwrap().power_control;
    let profiles: Vec<_> = SEEDS
        .iter()
        .flat_map(|&s| received_power_profiles(&scn, &pc, a.ues_per_cell, a.aerial_ratio, a.altitude_m, s).unwrap())
        .collect();
    let roc = aerial_id_roc(&profiles, &a.delta_grid_db, &a.k_grid).unwrap();
    let op = operating_point(&roc, 0.1).expect("some grid point within the false-positive budget");
    assert!(op.tpr >= 0.9, "{op:?}");
}
