use std::fs;
use std::path::PathBuf;

use uavwpt_core::baselines::plan;
use uavwpt_core::bsa::Algorithm;
use uavwpt_core::io::{load_scenario, read_plan, write_json, write_run, ScenarioFile};
use uavwpt_core::sco::ScoOptions;
use uavwpt_core::verify::simulate_plan;

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

#[test]
fn shipped_defaults() {
    let sc = load_scenario(&shipped("reference.json")).unwrap();
    let p = &sc.params;
    assert!((p.gt_tx_power_w - 0.1).abs() < 1e-15);
    assert!((p.uav_tx_power_w - 10.0).abs() < 1e-12);
    assert!((p.snr_gap_linear - 10f64.powf(0.82)).abs() < 1e-12);
    assert!((p.ref_channel_gain_linear - 0.1).abs() < 1e-15);
    assert!((p.noise_power_w - 1e-10).abs() < 1e-22);
    assert_eq!(sc.num_gts(), 50);
    assert!(sc.gts.iter().all(|g| g.demand_bits == 40960.0));
    assert_eq!(load_scenario(&shipped("desk.json")).unwrap().num_gts(), 5);
}

#[test]
fn missing_field_is_named() {
    let text = fs::read_to_string(shipped("desk.json")).unwrap();
    let cut = text.replace("\"beta1\": 6400.0,", "");
    let err = ScenarioFile::parse(&cut).unwrap_err().to_string();
    assert!(err.contains("beta1"), "{err}");
}

#[test]
fn written_plans_reverify_identically() {
    let sc = load_scenario(&shipped("desk.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (i, alg) in [Algorithm::Proposed, Algorithm::Gsa, Algorithm::Cha].into_iter().enumerate() {
        let r = plan(&sc, alg, &ScoOptions::default(), 1).unwrap();
        assert!(r.feasible && r.report.feasible, "{}", alg.label());
        let run = dir.path().join(format!("run{i}"));
        write_run(&run, &sc, &r).unwrap();
        let back = read_plan(&run.join("trajectory.csv"), &run.join("schedule.csv")).unwrap();
        assert_eq!(back, r.plan);
        let again = dir.path().join(format!("again{i}.json"));
        write_json(&again, &simulate_plan(&sc, &back).unwrap()).unwrap();
        assert_eq!(fs::read(&again).unwrap(), fs::read(run.join("report.json")).unwrap());
    }
}

#[test]
fn proposed_beats_or_ties_baselines_on_desk_scenario() {
    let sc = load_scenario(&shipped("desk.json")).unwrap();
    let sco = ScoOptions::default();
    let p = plan(&sc, Algorithm::Proposed, &sco, 1).unwrap();
    let g = plan(&sc, Algorithm::Gsa, &sco, 1).unwrap();
    let c = plan(&sc, Algorithm::Cha, &sco, 1).unwrap();
    assert!(p.completion_slots <= g.completion_slots);
    assert!(g.completion_slots <= c.completion_slots);
    // Every probe below the answer failed, every one at or above it passed.
    for pr in &p.probes {
        assert_eq!(pr.feasible, pr.t >= p.completion_slots, "T={} theta={}", pr.t, pr.theta);
    }
}
