//! Fixtures shared by the benchmarks: seeded desk-scale scenarios and the
//! intermediate problems of one optimizer iteration.

pub use uavwpt_core;

use uavwpt_core::gsp::{build_gsp, solve_gsp, GspProblem};
use uavwpt_core::init::initial_trajectory;
use uavwpt_core::io::{GeneratorSpec, ScenarioFile};
use uavwpt_core::linearize::make_expansion_point;
use uavwpt_core::utp::{build_utp, UtpProblem};
use uavwpt_core::{Point2, Scenario, Trajectory};

/// `m` terminals over 200 m × 200 m, 5 KB each.
pub fn desk_scenario(m: usize, seed: u64) -> Scenario {
    ScenarioFile::reference(GeneratorSpec {
        count: m,
        area_m: [200.0, 200.0],
        seed,
        demand_bits: 40960.0,
    })
    .build()
    .expect("reference scenario")
}

pub struct Stage {
    pub scenario: Scenario,
    pub horizon: usize,
    pub initial: Vec<Point2>,
    pub gsp: GspProblem,
    pub utp: UtpProblem,
}

/// The first scheduling and trajectory problems at horizon `t`.
pub fn first_stage(m: usize, seed: u64, t: usize) -> Stage {
    let scenario = desk_scenario(m, seed);
    let initial = initial_trajectory(&scenario, t, seed).expect("initial trajectory");
    let traj = Trajectory::compress(&initial, 200);
    let gsp = build_gsp(&traj, &scenario).expect("gsp");
    let sched = solve_gsp(&gsp, 1e-6).expect("lp").schedule;
    let ep = make_expansion_point(&traj, &scenario).expect("expansion point");
    let utp = build_utp(&sched, &ep, &scenario).expect("utp");
    Stage {
        scenario,
        horizon: t,
        initial,
        gsp,
        utp,
    }
}
