//! Alternating optimization for a fixed horizon: schedule LP, then
//! trajectory program, re-linearized at every new trajectory.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::gsp::{build_gsp_with, repair, solve_gsp, GspProblem};
use crate::linearize::make_expansion_point;
use crate::model::{HarvestModel, Scenario};
use crate::plan::{Schedule, Trajectory};
use crate::utp::{build_utp_with, solve_utp, UtpStatus};

#[derive(Debug, Clone, Serialize)]
pub struct ScoOptions {
    /// Stop once an iteration lowers `θ` by less than this many bits.
    pub theta_threshold_bits: f64,
    pub max_iterations: usize,
    pub gsp_tol: f64,
    pub utp_tol: f64,
    /// Hover runs of the trajectory are grouped into at most this many
    /// blocks (flight slots are never merged).
    pub max_blocks: usize,
    /// Return as soon as a schedule with `θ <= 0` is found.
    pub stop_at_feasible: bool,
}

impl Default for ScoOptions {
    fn default() -> Self {
        ScoOptions {
            theta_threshold_bits: 1.0,
            max_iterations: 50,
            gsp_tol: 1e-6,
            utp_tol: 1e-6,
            max_blocks: 200,
            stop_at_feasible: false,
        }
    }
}

impl ScoOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_threshold_bits > 0.0) {
            return Err(Error::param("theta_threshold_bits", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be at least 1"));
        }
        if self.max_blocks < 2 {
            return Err(Error::param("max_blocks", "must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoStatus {
    Converged,
    IterationLimit,
    Feasible,
    /// The trajectory program failed; the previous trajectory was kept.
    TrajectoryStalled,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoIteration {
    pub iteration: usize,
    /// Shortfall after the scheduling step.
    pub theta_gsp: f64,
    /// Bound-implied shortfall reported by the trajectory step.
    pub theta_utp: f64,
    /// Shortfall of the schedule LP on the new trajectory.
    pub theta: f64,
    pub max_violation: f64,
    pub newton_steps: usize,
}

#[derive(Debug, Clone)]
pub struct ScoResult {
    /// Per-slot schedule.
    pub schedule: Schedule,
    /// Per-slot trajectory.
    pub trajectory: Vec<Point2>,
    /// True shortfall of the returned pair.
    pub theta: f64,
    pub iterations_used: usize,
    /// `θ` after each iteration.
    pub theta_history: Vec<f64>,
    pub trace: Vec<ScoIteration>,
    pub status: ScoStatus,
}

const ENERGY_TOL_J: f64 = 1e-12;

pub fn run_sco(scenario: &Scenario, t: usize, initial: &[Point2], opts: &ScoOptions) -> Result<ScoResult> {
    run_sco_with(scenario, &scenario.nonlinear(), t, initial, opts)
}

/// Alternate the scheduling LP and the trajectory program from `initial`.
///
/// Each iteration's decrease is measured between the scheduling steps
/// before and after its trajectory step, so the gain the LP draws from a
/// new trajectory counts toward the iteration that produced it.
pub fn run_sco_with(
    scenario: &Scenario,
    harvest: &HarvestModel,
    t: usize,
    initial: &[Point2],
    opts: &ScoOptions,
) -> Result<ScoResult> {
    opts.validate()?;
    check_initial(scenario, t, initial)?;
    let mut traj = Trajectory::compress(initial, opts.max_blocks);
    let gp = build_gsp_with(&traj, scenario, harvest)?;
    let (mut sched, mut theta_gsp) = best_schedule(&gp, opts.gsp_tol, None)?;
    let mut history = Vec::new();
    let mut trace = Vec::new();
    let mut status = ScoStatus::IterationLimit;

    for it in 1..=opts.max_iterations {
        if opts.stop_at_feasible && theta_gsp <= 0.0 {
            history.push(theta_gsp);
            trace.push(ScoIteration {
                iteration: it,
                theta_gsp,
                theta_utp: theta_gsp,
                theta: theta_gsp,
                max_violation: 0.0,
                newton_steps: 0,
            });
            status = ScoStatus::Feasible;
            break;
        }

        let ep = make_expansion_point(&traj, scenario)?;
        let up = build_utp_with(&sched, &ep, scenario, harvest)?;
        let us = solve_utp(&up, opts.utp_tol)?;
        // The trajectory program works with a small energy slack, so the
        // schedule is repaired along the new trajectory before scoring it.
        // A step is kept when the schedule LP does no worse on the new path.
        let mut step = None;
        if us.status != UtpStatus::NoProgress {
            let gp_new = build_gsp_with(&us.trajectory, scenario, harvest)?;
            let mut a = sched.clone();
            repair(&gp_new, &mut a);
            let (next, theta_next) = best_schedule(&gp_new, opts.gsp_tol, Some(&a))?;
            if theta_next <= theta_gsp {
                step = Some((next, theta_next));
            }
        }
        let theta = step.as_ref().map_or(theta_gsp, |s| s.1);
        history.push(theta);
        trace.push(ScoIteration {
            iteration: it,
            theta_gsp,
            theta_utp: us.theta,
            theta,
            max_violation: us.max_violation,
            newton_steps: us.newton_steps,
        });
        log::debug!(
            "sco T={t} it={it} gsp={theta_gsp:.6e} utp={:.6e} after={theta:.6e} status={:?}",
            us.theta,
            us.status
        );
        let Some((next, theta_next)) = step else {
            status = if us.status == UtpStatus::NoProgress {
                ScoStatus::TrajectoryStalled
            } else {
                ScoStatus::Converged
            };
            break;
        };
        let decrease = theta_gsp - theta_next;
        traj = us.trajectory;
        sched = next;
        theta_gsp = theta_next;
        if decrease < opts.theta_threshold_bits {
            status = ScoStatus::Converged;
            break;
        }
    }
    if status == ScoStatus::IterationLimit && opts.stop_at_feasible && theta_gsp <= 0.0 {
        status = ScoStatus::Feasible;
    }
    finish(&traj, sched, theta_gsp, history, trace, status)
}

fn check_initial(scenario: &Scenario, t: usize, initial: &[Point2]) -> Result<()> {
    if initial.len() != t {
        return Err(Error::Dimension(format!("initial trajectory has {} slots, horizon is {t}", initial.len())));
    }
    if t < 2 {
        return Err(Error::HorizonTooShort {
            horizon: t,
            reason: "at least the two endpoint slots are required".into(),
        });
    }
    let q0 = scenario.params.initial_position_m;
    if initial[0] != q0 || initial[t - 1] != q0 {
        return Err(Error::Trajectory("initial trajectory must start and end at the initial position".into()));
    }
    let dmax = scenario.params.max_step_m();
    if let Some(k) = initial.windows(2).position(|w| w[0].dist(w[1]) > dmax * (1.0 + 1e-9) + 1e-9) {
        return Err(Error::Trajectory(format!("initial trajectory exceeds the speed limit at slot {k}")));
    }
    Ok(())
}

/// Solve the LP at the current trajectory and keep the previous schedule
/// instead when it is still energy-feasible there and does better.
fn best_schedule(gp: &GspProblem, tol: f64, prev: Option<&Schedule>) -> Result<(Schedule, f64)> {
    let gs = solve_gsp(gp, tol)?;
    if let Some(ps) = prev {
        if ps.num_rows() == gp.num_blocks() && gp.min_stored_energy(ps) >= -ENERGY_TOL_J {
            let th = gp.shortfall(ps);
            if th < gs.theta {
                return Ok((ps.clone(), th));
            }
        }
    }
    Ok((gs.schedule, gs.theta))
}

fn finish(
    traj: &Trajectory,
    sched: Schedule,
    theta: f64,
    theta_history: Vec<f64>,
    trace: Vec<ScoIteration>,
    status: ScoStatus,
) -> Result<ScoResult> {
    Ok(ScoResult {
        schedule: sched.expand(traj.weights()),
        trajectory: traj.expand(),
        theta,
        iterations_used: trace.len(),
        theta_history,
        trace,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::initial_trajectory;
    use crate::model::{EhParams, GroundTerminal, SystemParams};

    fn scenario(gts: &[(f64, f64, f64)]) -> Scenario {
        Scenario::new(
            SystemParams::reference(),
            EhParams::reference(),
            gts.iter()
                .map(|&(x, y, l)| GroundTerminal {
                    position_m: Point2::new(x, y),
                    demand_bits: l,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_demand_one_iteration() {
        let sc = scenario(&[(40.0, 10.0, 0.0), (-20.0, 30.0, 0.0)]);
        let init = initial_trajectory(&sc, 8, 1).unwrap();
        let opts = ScoOptions {
            stop_at_feasible: true,
            ..ScoOptions::default()
        };
        let r = run_sco(&sc, 8, &init, &opts).unwrap();
        assert_eq!(r.iterations_used, 1);
        assert_eq!(r.status, ScoStatus::Feasible);
        assert!(r.theta <= 0.0);
        let r = run_sco(&sc, 8, &init, &ScoOptions::default()).unwrap();
        assert!(r.theta <= 0.0);
        assert!(r.iterations_used <= 50);
    }

    #[test]
    fn infinite_threshold_one_iteration() {
        let sc = scenario(&[(40.0, 10.0, 20000.0)]);
        let init = initial_trajectory(&sc, 6, 1).unwrap();
        let opts = ScoOptions {
            theta_threshold_bits: f64::INFINITY,
            ..ScoOptions::default()
        };
        let r = run_sco(&sc, 6, &init, &opts).unwrap();
        assert_eq!(r.iterations_used, 1);
    }

    #[test]
    fn history_is_monotone() {
        let sc = scenario(&[(40.0, 10.0, 40960.0), (-30.0, 35.0, 40960.0), (10.0, -45.0, 40960.0)]);
        let init = initial_trajectory(&sc, 12, 3).unwrap();
        let r = run_sco(&sc, 12, &init, &ScoOptions::default()).unwrap();
        for w in r.theta_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "{:?}", r.theta_history);
        }
        assert!(r.theta <= *r.theta_history.last().unwrap() + 1e-6);
        assert_eq!(r.trajectory.len(), 12);
        assert_eq!(r.schedule.num_rows(), 12);
    }

    #[test]
    fn rejects_bad_initial() {
        let sc = scenario(&[(40.0, 10.0, 1.0)]);
        let init = vec![Point2::ORIGIN, Point2::new(100.0, 0.0), Point2::ORIGIN];
        assert!(run_sco(&sc, 3, &init, &ScoOptions::default()).is_err());
        assert!(run_sco(&sc, 4, &init, &ScoOptions::default()).is_err());
    }

    #[test]
    fn deterministic() {
        let sc = scenario(&[(40.0, 10.0, 30000.0), (-30.0, 35.0, 30000.0)]);
        let init = initial_trajectory(&sc, 10, 5).unwrap();
        let a = run_sco(&sc, 10, &init, &ScoOptions::default()).unwrap();
        let b = run_sco(&sc, 10, &init, &ScoOptions::default()).unwrap();
        assert_eq!(a.theta_history, b.theta_history);
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.schedule, b.schedule);
    }
}
