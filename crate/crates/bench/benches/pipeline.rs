use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use uavwpt_bench::{desk_scenario, first_stage};
use uavwpt_core::baselines::plan;
use uavwpt_core::bsa::Algorithm;
use uavwpt_core::gsp::solve_gsp;
use uavwpt_core::sco::{run_sco, ScoOptions};
use uavwpt_core::utp::solve_utp;

fn stages(c: &mut Criterion) {
    let mut g = c.benchmark_group("stage");
    g.sample_size(20);
    for m in [3usize, 5] {
        let s = first_stage(m, 1, 8 * m + 10);
        g.bench_with_input(BenchmarkId::new("schedule_lp", m), &s, |b, s| {
            b.iter(|| solve_gsp(black_box(&s.gsp), 1e-6).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("trajectory", m), &s, |b, s| {
            b.iter(|| solve_utp(black_box(&s.utp), 1e-6).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("sco", m), &s, |b, s| {
            b.iter(|| run_sco(&s.scenario, s.horizon, black_box(&s.initial), &ScoOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn planners(c: &mut Criterion) {
    let mut g = c.benchmark_group("plan");
    g.sample_size(10);
    let sc = desk_scenario(5, 1);
    for alg in [Algorithm::Cha, Algorithm::Gsa, Algorithm::Proposed] {
        g.bench_function(alg.label(), |b| b.iter(|| plan(black_box(&sc), alg, &ScoOptions::default(), 1).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, stages, planners);
criterion_main!(benches);
