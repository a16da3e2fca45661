//! Parameter sweeps: one planning run per (sweep value, algorithm), run in
//! a worker pool since the points are independent.
//!
//! `sweep.csv` holds only deterministic columns so that identical inputs
//! give byte-identical files; wall-clock times go to `timings.csv`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{plan, plan_within};
use crate::bsa::{Algorithm, BsaOptions};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, ScenarioFile};
use crate::model::Scenario;
use crate::sco::ScoOptions;

/// Environment variable holding the worker count for sweeps.
pub const THREADS_ENV: &str = "UAVWPT_THREADS";

/// Bits in one kilobyte of demand.
pub const BITS_PER_KB: f64 = 8192.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Number of generated terminals.
    Gts,
    /// Demand per terminal, in KB.
    Data,
    /// Flight altitude, in metres.
    Altitude,
}

impl SweepKind {
    pub fn label(self) -> &'static str {
        match self {
            SweepKind::Gts => "gts",
            SweepKind::Data => "data_kb",
            SweepKind::Altitude => "altitude_m",
        }
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gts" => Ok(SweepKind::Gts),
            "data" => Ok(SweepKind::Data),
            "altitude" => Ok(SweepKind::Altitude),
            _ => Err(Error::param("sweep", format!("unknown sweep {s:?} (expected gts, data or altitude)"))),
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Parse `a..b` (inclusive, unit step) or a comma list `v1,v2,…`.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::param("sweep values", format!("cannot parse {text:?} (expected a..b or v1,v2,...)"));
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).map(|v| v as f64).collect());
    }
    let vals = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<f64>>>()?;
    if vals.is_empty() || vals.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(vals)
}

/// Scenario for one sweep value.
pub fn scenario_at(base: &ScenarioFile, kind: SweepKind, value: f64) -> Result<Scenario> {
    match kind {
        SweepKind::Gts => {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(Error::param("sweep", format!("terminal count must be a positive integer, got {value}")));
            }
            let Some(gen) = base.generator else {
                return Err(Error::param("sweep", "a terminal-count sweep needs a scenario with a `generator`"));
            };
            let mut f = base.clone();
            f.generator = Some(crate::io::GeneratorSpec {
                count: value as usize,
                ..gen
            });
            f.build()
        }
        SweepKind::Data => base.build()?.with_uniform_demand(value * BITS_PER_KB),
        SweepKind::Altitude => base.build()?.with_altitude(value),
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub values: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub sco: ScoOptions,
    pub seed: u64,
    /// Explicit `(t_min, t_max)`; automatic bounds when `None`.
    pub bounds: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub algorithm: Algorithm,
    /// `None` when no feasible horizon was found.
    pub completion_slots: Option<usize>,
    pub feasible: bool,
    /// Optimizer iterations summed over all probes.
    pub iterations: usize,
    pub probes: usize,
    pub wall_s: f64,
    pub error: Option<String>,
}

fn run_point(base: &ScenarioFile, cfg: &SweepConfig, value: f64, alg: Algorithm) -> SweepRow {
    let start = Instant::now();
    let res = scenario_at(base, cfg.kind, value).and_then(|sc| match cfg.bounds {
        None => plan(&sc, alg, &cfg.sco, cfg.seed),
        Some((t_min, t_max)) => plan_within(
            &sc,
            alg,
            &BsaOptions {
                t_min,
                t_max,
                sco: cfg.sco.clone(),
                seed: cfg.seed,
            },
        ),
    });
    let wall_s = start.elapsed().as_secs_f64();
    match res {
        Ok(r) => SweepRow {
            value,
            algorithm: alg,
            completion_slots: r.feasible.then_some(r.completion_slots),
            feasible: r.feasible,
            iterations: r.probes.iter().map(|p| p.iterations).sum(),
            probes: r.probes.len(),
            wall_s,
            error: None,
        },
        Err(e) => SweepRow {
            value,
            algorithm: alg,
            completion_slots: None,
            feasible: false,
            iterations: 0,
            probes: 0,
            wall_s,
            error: Some(e.to_string()),
        },
    }
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Run every point. Rows come back ordered by value, then algorithm, no
/// matter how the pool schedules them.
pub fn run_sweep(base: &ScenarioFile, cfg: &SweepConfig, threads: Option<usize>) -> Result<Vec<SweepRow>> {
    if cfg.values.is_empty() || cfg.algorithms.is_empty() {
        return Err(Error::param("sweep", "needs at least one value and one algorithm"));
    }
    cfg.sco.validate()?;
    // Fail on a malformed base before starting the pool.
    scenario_at(base, cfg.kind, cfg.values[0])?;
    let jobs: Vec<(f64, Algorithm)> = cfg
        .values
        .iter()
        .flat_map(|&v| cfg.algorithms.iter().map(move |&a| (v, a)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::param("threads", e.to_string()))?;
    Ok(pool.install(|| jobs.par_iter().map(|&(v, a)| run_point(base, cfg, v, a)).collect()))
}

fn algorithm_name(a: &Algorithm) -> String {
    match a {
        Algorithm::LinearEh { efficiency } => format!("linear-eh:{}", fmt_f64(*efficiency)),
        other => other.label().to_string(),
    }
}

/// `sweep,value,algorithm,completion_slots,feasible,iterations,probes,error`.
pub fn write_sweep_csv(path: &Path, kind: SweepKind, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sweep", "value", "algorithm", "completion_slots", "feasible", "iterations", "probes", "error"])?;
    for r in rows {
        w.write_record([
            kind.label().to_string(),
            fmt_f64(r.value),
            algorithm_name(&r.algorithm),
            r.completion_slots.map_or(String::new(), |t| t.to_string()),
            r.feasible.to_string(),
            r.iterations.to_string(),
            r.probes.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `sweep,value,algorithm,wall_s`.
pub fn write_timings_csv(path: &Path, kind: SweepKind, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sweep", "value", "algorithm", "wall_s"])?;
    for r in rows {
        w.write_record([kind.label().to_string(), fmt_f64(r.value), algorithm_name(&r.algorithm), fmt_f64(r.wall_s)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::GeneratorSpec;

    fn base(count: usize) -> ScenarioFile {
        ScenarioFile::reference(GeneratorSpec {
            count,
            area_m: [200.0, 200.0],
            seed: 4,
            demand_bits: 8192.0,
        })
    }

    #[test]
    fn value_lists() {
        assert_eq!(parse_values("5..10").unwrap(), vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
        assert_eq!(parse_values("10, 20,30").unwrap(), vec![10.0, 20.0, 30.0]);
        assert_eq!(parse_values("3..3").unwrap(), vec![3.0]);
        assert!(parse_values("5..2").is_err());
        assert!(parse_values("a,b").is_err());
        assert!(parse_values("").is_err());
    }

    #[test]
    fn sweep_scenarios() {
        let b = base(3);
        assert_eq!(scenario_at(&b, SweepKind::Gts, 6.0).unwrap().num_gts(), 6);
        let small = scenario_at(&b, SweepKind::Gts, 2.0).unwrap();
        let big = scenario_at(&b, SweepKind::Gts, 5.0).unwrap();
        assert_eq!(small.gts[..], big.gts[..2]);
        assert!(scenario_at(&b, SweepKind::Gts, 2.5).is_err());
        let d = scenario_at(&b, SweepKind::Data, 2.0).unwrap();
        assert!(d.gts.iter().all(|g| g.demand_bits == 16384.0));
        let h = scenario_at(&b, SweepKind::Altitude, 30.0).unwrap();
        assert_eq!(h.params.altitude_m, 30.0);
    }

    #[test]
    fn rows_are_ordered_and_repeatable() {
        let cfg = SweepConfig {
            kind: SweepKind::Gts,
            values: vec![1.0, 2.0],
            algorithms: vec![Algorithm::Cha, Algorithm::Gsa],
            sco: ScoOptions::default(),
            seed: 1,
            bounds: None,
        };
        let a = run_sweep(&base(2), &cfg, Some(2)).unwrap();
        let b = run_sweep(&base(2), &cfg, Some(1)).unwrap();
        let key = |r: &SweepRow| (r.value, r.algorithm.label(), r.completion_slots, r.iterations);
        assert_eq!(a.iter().map(key).collect::<Vec<_>>(), b.iter().map(key).collect::<Vec<_>>());
        assert_eq!(a.len(), 4);
        assert_eq!(a[0].value, 1.0);
        assert_eq!(a[1].algorithm, Algorithm::Gsa);
        assert!(a.iter().all(|r| r.feasible));
    }
}
