//! Bisection over the mission horizon.
//!
//! A horizon is feasible when the per-horizon optimizer reaches `θ <= 0`
//! and the replayed plan passes verification. Since the optimizer is a
//! heuristic, the returned horizon is minimal only relative to it.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::init::{initial_trajectory_from_tour, solve_tsp, TspTour};
use crate::model::{HarvestModel, Scenario};
use crate::plan::Plan;
use crate::sco::{run_sco_with, ScoIteration, ScoOptions};
use crate::verify::{simulate_plan, simulate_plan_with, VerificationReport};

/// Upper-bound doublings tried before giving up.
pub const MAX_DOUBLINGS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Algorithm {
    Proposed,
    Gsa,
    Cha,
    LinearEh { efficiency: f64 },
}

impl Algorithm {
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::Proposed => "proposed",
            Algorithm::Gsa => "gsa",
            Algorithm::Cha => "cha",
            Algorithm::LinearEh { .. } => "linear-eh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbePhase {
    /// Establishing the upper bound.
    Bound,
    Search,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Probe {
    pub t: usize,
    pub theta: f64,
    pub feasible: bool,
    pub iterations: usize,
    pub phase: ProbePhase,
}

#[derive(Debug, Clone)]
pub struct ProbeOutcome {
    pub theta: f64,
    pub feasible: bool,
    /// `None` when no trajectory exists for the horizon.
    pub plan: Option<Plan>,
    pub iterations: usize,
    pub sco_trace: Vec<ScoIteration>,
}

impl ProbeOutcome {
    pub fn impossible() -> Self {
        ProbeOutcome {
            theta: f64::INFINITY,
            feasible: false,
            plan: None,
            iterations: 0,
            sco_trace: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BsaOptions {
    pub t_min: usize,
    pub t_max: usize,
    pub sco: ScoOptions,
    /// Seed of the tour heuristic.
    pub seed: u64,
}

impl BsaOptions {
    pub fn validate(&self) -> Result<()> {
        if self.t_min < 2 {
            return Err(Error::param("t_min", "must be at least 2"));
        }
        if self.t_max < self.t_min {
            return Err(Error::param("t_max", format!("must be >= t_min = {}", self.t_min)));
        }
        self.sco.validate()
    }
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub algorithm: Algorithm,
    pub plan: Plan,
    pub completion_slots: usize,
    pub theta: f64,
    pub feasible: bool,
    /// Every horizon evaluated, in order.
    pub probes: Vec<Probe>,
    /// Optimizer trace of the returned horizon.
    pub sco_trace: Vec<ScoIteration>,
    /// Replay under the model the plan was optimized for.
    pub report: VerificationReport,
    /// Replay under the sigmoid model, for plans optimized under another.
    pub cross_report: Option<VerificationReport>,
}

/// Cached horizon evaluations plus the bracket search over them.
pub struct HorizonSearch<F> {
    probe: F,
    cache: BTreeMap<usize, ProbeOutcome>,
    log: Vec<Probe>,
}

impl<F: FnMut(usize) -> Result<ProbeOutcome>> HorizonSearch<F> {
    pub fn new(probe: F) -> Self {
        HorizonSearch {
            probe,
            cache: BTreeMap::new(),
            log: Vec::new(),
        }
    }

    pub fn eval(&mut self, t: usize, phase: ProbePhase) -> Result<&ProbeOutcome> {
        if !self.cache.contains_key(&t) {
            let out = (self.probe)(t)?;
            log::info!("probe T={t}: theta={:.6e} feasible={}", out.theta, out.feasible);
            self.log.push(Probe {
                t,
                theta: out.theta,
                feasible: out.feasible,
                iterations: out.iterations,
                phase,
            });
            self.cache.insert(t, out);
        }
        Ok(&self.cache[&t])
    }

    pub fn probes(&self) -> &[Probe] {
        &self.log
    }

    /// Double `t` from `start` until a feasible horizon is found.
    pub fn widen(&mut self, start: usize) -> Result<usize> {
        let mut t = start.max(2);
        for _ in 0..=MAX_DOUBLINGS {
            if self.eval(t, ProbePhase::Bound)?.feasible {
                return Ok(t);
            }
            t *= 2;
        }
        Err(Error::Unbounded { t_max: t / 2 })
    }

    /// Bracket search between `t_min` and `t_max`. Returns the chosen
    /// horizon and whether it is feasible.
    pub fn bisect(&mut self, t_min: usize, t_max: usize) -> Result<(usize, bool)> {
        let (mut lo, mut hi) = (t_min, t_max);
        while hi - lo > 1 {
            let t = (lo + hi).div_ceil(2);
            if self.eval(t, ProbePhase::Search)?.feasible {
                hi = t;
            } else {
                lo = t;
            }
        }
        if self.eval(lo, ProbePhase::Search)?.feasible {
            return Ok((lo, true));
        }
        let ok = self.eval(hi, ProbePhase::Search)?.feasible;
        Ok((hi, ok))
    }

    pub fn outcome(&self, t: usize) -> Option<&ProbeOutcome> {
        self.cache.get(&t)
    }

    fn take(&mut self, t: usize) -> Option<ProbeOutcome> {
        self.cache.remove(&t)
    }
}

/// Assemble the result for horizon `t` of a finished search.
pub fn finish_search<F: FnMut(usize) -> Result<ProbeOutcome>>(
    scenario: &Scenario,
    algorithm: Algorithm,
    harvest: &HarvestModel,
    mut search: HorizonSearch<F>,
    t: usize,
    feasible: bool,
) -> Result<PlanResult> {
    let probes = search.probes().to_vec();
    let out = search.take(t).ok_or(Error::Unbounded { t_max: t })?;
    let plan = out.plan.ok_or(Error::Unbounded { t_max: t })?;
    let report = simulate_plan_with(scenario, &plan, harvest)?;
    let cross_report = match harvest {
        HarvestModel::Nonlinear(_) => None,
        HarvestModel::Linear { .. } => Some(simulate_plan(scenario, &plan)?),
    };
    Ok(PlanResult {
        algorithm,
        completion_slots: plan.horizon(),
        plan,
        theta: out.theta,
        feasible,
        probes,
        sco_trace: out.sco_trace,
        report,
        cross_report,
    })
}

/// One horizon of the full pipeline: initial trajectory, alternating
/// optimization, replay.
pub fn probe_sco(
    scenario: &Scenario,
    harvest: &HarvestModel,
    tour: &TspTour,
    t: usize,
    sco: &ScoOptions,
) -> Result<ProbeOutcome> {
    let init = match initial_trajectory_from_tour(scenario, tour, t) {
        Ok(q) => q,
        Err(Error::HorizonTooShort { .. }) => return Ok(ProbeOutcome::impossible()),
        Err(e) => return Err(e),
    };
    let r = run_sco_with(scenario, harvest, t, &init, sco)?;
    let plan = Plan::new(r.trajectory, r.schedule)?;
    let report = simulate_plan_with(scenario, &plan, harvest)?;
    Ok(ProbeOutcome {
        theta: r.theta,
        feasible: r.theta <= 0.0 && report.feasible,
        plan: Some(plan),
        iterations: r.iterations_used,
        sco_trace: r.trace,
    })
}

fn probe_opts(sco: &ScoOptions) -> ScoOptions {
    ScoOptions {
        stop_at_feasible: true,
        ..sco.clone()
    }
}

/// Search `[opts.t_min, opts.t_max]` with the full pipeline.
pub fn run_bsa(scenario: &Scenario, opts: &BsaOptions) -> Result<PlanResult> {
    run_bsa_with(scenario, &scenario.nonlinear(), Algorithm::Proposed, opts)
}

pub(crate) fn run_bsa_with(
    scenario: &Scenario,
    harvest: &HarvestModel,
    algorithm: Algorithm,
    opts: &BsaOptions,
) -> Result<PlanResult> {
    opts.validate()?;
    let tour = solve_tsp(scenario, opts.seed);
    let sco = probe_opts(&opts.sco);
    let mut search = HorizonSearch::new(|t| probe_sco(scenario, harvest, &tour, t, &sco));
    let (t, ok) = search.bisect(opts.t_min, opts.t_max)?;
    finish_search(scenario, algorithm, harvest, search, t, ok)
}

/// Bounds for the full pipeline: `t_min = 2`, `t_max` the fly-and-hover
/// baseline's completion time, doubled until feasible.
pub fn default_bounds(scenario: &Scenario, sco: &ScoOptions, seed: u64) -> Result<BsaOptions> {
    let tour = solve_tsp(scenario, seed);
    let start = crate::baselines::cha_completion_slots(scenario, &tour);
    let opts = probe_opts(sco);
    let harvest = scenario.nonlinear();
    let mut search = HorizonSearch::new(|t| probe_sco(scenario, &harvest, &tour, t, &opts));
    let t_max = search.widen(start)?;
    Ok(BsaOptions {
        t_min: 2,
        t_max,
        sco: sco.clone(),
        seed,
    })
}

/// Full pipeline with automatic bounds; upper-bound probes are shared with
/// the search and appear in the probe log.
pub fn plan_proposed(scenario: &Scenario, sco: &ScoOptions, seed: u64) -> Result<PlanResult> {
    plan_auto(scenario, &scenario.nonlinear(), Algorithm::Proposed, sco, seed)
}

pub(crate) fn plan_auto(
    scenario: &Scenario,
    harvest: &HarvestModel,
    algorithm: Algorithm,
    sco: &ScoOptions,
    seed: u64,
) -> Result<PlanResult> {
    sco.validate()?;
    let tour = solve_tsp(scenario, seed);
    let start = crate::baselines::cha_completion_slots(scenario, &tour);
    let opts = probe_opts(sco);
    let mut search = HorizonSearch::new(|t| probe_sco(scenario, harvest, &tour, t, &opts));
    let t_max = search.widen(start)?;
    let (t, ok) = search.bisect(2, t_max)?;
    finish_search(scenario, algorithm, harvest, search, t, ok)
}
