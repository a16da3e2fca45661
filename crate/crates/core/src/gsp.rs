//! Terminal scheduling for a fixed trajectory: a linear program in the
//! schedule `A` and the shortfall `θ`.
//!
//! The cumulative energy-causality constraints are written in state form,
//! `E[m,k] = E[m,k-1] + w_k τ (Φ[m,k] α0[k] - P^D α_m[k])` with `E >= 0`,
//! which keeps the constraint matrix sparse. Within a block of `w_k`
//! identical slots the stored energy moves linearly, so checking block
//! ends is exact.

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use crate::error::{Error, Result};
use crate::model::{input_power, rate, HarvestModel, Scenario};
use crate::plan::{Schedule, Trajectory};

/// Harvested powers below this (watts) are treated as zero: the terminal
/// cannot upload in that block without prior charge.
const PHI_FLOOR: f64 = 1e-30;
/// LP coefficients smaller than this fraction of their row's largest are
/// dropped. Dropping harvest or rate terms only tightens the LP, and the
/// simplex basis otherwise turns singular on far-away terminals.
const COEF_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct GspProblem {
    pub weights: Vec<usize>,
    /// `R[k][m]` in bits/s.
    pub rates: Vec<Vec<f64>>,
    /// `Φ[k][m]` in watts.
    pub harvest: Vec<Vec<f64>>,
    pub demands: Vec<f64>,
    pub tau: f64,
    pub p_d: f64,
}

impl GspProblem {
    pub fn num_blocks(&self) -> usize {
        self.weights.len()
    }

    pub fn num_gts(&self) -> usize {
        self.demands.len()
    }

    pub fn num_variables(&self) -> usize {
        self.num_blocks() * (self.num_gts() + 1) + 1
    }

    /// Largest data shortfall implied by `schedule`.
    pub fn shortfall(&self, schedule: &Schedule) -> f64 {
        (0..self.num_gts())
            .map(|m| self.demands[m] - self.delivered(schedule, m))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn delivered(&self, schedule: &Schedule, m: usize) -> f64 {
        (0..self.num_blocks())
            .map(|k| self.weights[k] as f64 * self.tau * schedule.upload(k, m) * self.rates[k][m])
            .sum()
    }

    /// Lowest stored energy over all terminals and block ends.
    pub fn min_stored_energy(&self, schedule: &Schedule) -> f64 {
        let mut worst = f64::INFINITY;
        for m in 0..self.num_gts() {
            let mut e = 0.0;
            for k in 0..self.num_blocks() {
                e += self.block_energy(schedule.wpt(k), schedule.upload(k, m), k, m);
                worst = worst.min(e);
            }
        }
        worst
    }

    fn block_energy(&self, a0: f64, am: f64, k: usize, m: usize) -> f64 {
        self.weights[k] as f64 * self.tau * (a0 * self.harvest[k][m] - self.p_d * am)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GspStatus {
    Optimal,
    /// The LP solver stopped on a tolerance issue; the returned schedule is
    /// the feasible repair of its last iterate.
    ToleranceLimit,
}

#[derive(Debug, Clone)]
pub struct GspSolution {
    /// One row per trajectory block.
    pub schedule: Schedule,
    pub theta: f64,
    pub status: GspStatus,
    /// Largest simplex-row excess `Σ α - 1` before repair.
    pub row_residual: f64,
    /// Most negative stored energy (J) before repair.
    pub energy_residual: f64,
}

/// Build with the sigmoid harvesting model.
pub fn build_gsp(traj: &Trajectory, scenario: &Scenario) -> Result<GspProblem> {
    build_gsp_with(traj, scenario, &scenario.nonlinear())
}

pub fn build_gsp_with(traj: &Trajectory, scenario: &Scenario, harvest: &HarvestModel) -> Result<GspProblem> {
    let pts = traj.points();
    if traj.horizon() < 2 {
        return Err(Error::HorizonTooShort {
            horizon: traj.horizon(),
            reason: "at least the two endpoint slots are required".into(),
        });
    }
    let q0 = scenario.params.initial_position_m;
    if pts[0] != q0 || pts[pts.len() - 1] != q0 {
        return Err(Error::Trajectory("trajectory must start and end at the initial position".into()));
    }
    let p = &scenario.params;
    let mut rates = Vec::with_capacity(pts.len());
    let mut phis = Vec::with_capacity(pts.len());
    for &q in pts {
        rates.push(scenario.gts.iter().map(|g| rate(q, g.position_m, p)).collect());
        phis.push(
            scenario
                .gts
                .iter()
                .map(|g| harvest.output_power(input_power(q, g.position_m, p)).max(0.0))
                .collect(),
        );
    }
    Ok(GspProblem {
        weights: traj.weights().to_vec(),
        rates,
        harvest: phis,
        demands: scenario.gts.iter().map(|g| g.demand_bits).collect(),
        tau: p.slot_duration_s,
        p_d: p.gt_tx_power_w,
    })
}

/// Steady-state per-slot split for a terminal hovering at a fixed point:
/// spend exactly what is harvested, `α1 P^D = α0 Φ` with `α0 + α1 = 1`.
/// Returns `(α0, α1)`.
pub fn hover_split(phi: f64, p_d: f64) -> (f64, f64) {
    let a1 = phi / (p_d + phi);
    let a0 = 1.0 - a1;
    (a0, a1.min(a0 * phi / p_d))
}

/// Solve the scheduling LP. `tol` is the relative gap accepted between the
/// LP objective and the repaired schedule's shortfall before the status is
/// downgraded to [`GspStatus::ToleranceLimit`].
pub fn solve_gsp(problem: &GspProblem, tol: f64) -> Result<GspSolution> {
    let scale_l = problem.demands.iter().copied().fold(0.0, f64::max).max(1.0);
    let mut attempt = lp_schedule(problem);
    for &eps in &PERTURBATIONS {
        if !matches!(attempt, Err(Error::Solver(_))) {
            break;
        }
        log::debug!("scheduling LP failed, retrying with coefficients shaded by {eps:e}");
        attempt = lp_schedule(&shade(problem, eps));
    }
    let (mut schedule, lp_theta) = attempt?;

    let row_residual = schedule
        .rows()
        .map(|r| r.iter().sum::<f64>() - 1.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let energy_residual = problem.min_stored_energy(&schedule);

    repair(problem, &mut schedule);
    let theta = problem.shortfall(&schedule);
    let status = if theta - lp_theta <= tol * scale_l.max(lp_theta.abs()) {
        GspStatus::Optimal
    } else {
        GspStatus::ToleranceLimit
    };
    debug_assert!(theta <= problem.demands.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1e-9 * scale_l);
    Ok(GspSolution {
        schedule,
        theta,
        status,
        row_residual,
        energy_residual,
    })
}

/// LP schedule before repair, and the LP's `θ`.
fn lp_schedule(problem: &GspProblem) -> Result<(Schedule, f64)> {
    let kb = problem.num_blocks();
    let mg = problem.num_gts();
    let scale_l = problem
        .demands
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .max(1.0);

    // Per-terminal scaling: uploads in units of σ_m = Φmax_m / P^D and
    // energies in units of τ Φmax_m, so every coefficient is O(w).
    let phi_max: Vec<f64> = (0..mg)
        .map(|m| (0..kb).map(|k| problem.harvest[k][m]).fold(0.0, f64::max))
        .collect();

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let theta = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    let mut a0 = Vec::with_capacity(kb);
    let mut am: Vec<Vec<Option<(Variable, f64)>>> = Vec::with_capacity(kb);
    for k in 0..kb {
        a0.push(lp.add_var(0.0, (0.0, 1.0)));
        let mut row = Vec::with_capacity(mg);
        for &pm in &phi_max {
            if pm > PHI_FLOOR {
                let sigma = (pm / problem.p_d).min(1.0);
                row.push(Some((lp.add_var(0.0, (0.0, 1.0 / sigma)), sigma)));
            } else {
                row.push(None);
            }
        }
        am.push(row);
        let mut simplex = vec![(a0[k], 1.0)];
        simplex.extend(am[k].iter().flatten().map(|&(v, s)| (v, s)));
        lp.add_constraint(simplex.as_slice(), ComparisonOp::Le, 1.0);
    }
    for m in 0..mg {
        if phi_max[m] <= PHI_FLOOR {
            continue;
        }
        let e_unit = problem.tau * phi_max[m];
        let mut prev: Option<Variable> = None;
        for k in 0..kb {
            let (v, sigma) = am[k][m].expect("terminal with harvest has upload columns");
            let w = problem.weights[k] as f64 * problem.tau;
            let e = lp.add_var(0.0, (0.0, f64::INFINITY));
            let h = if problem.harvest[k][m] >= COEF_FLOOR * phi_max[m] { problem.harvest[k][m] } else { 0.0 };
            // e - prev - w Φ α0 / e_unit + w P^D σ ã / e_unit = 0
            let mut terms = vec![
                (e, 1.0),
                (a0[k], -w * h / e_unit),
                (v, w * problem.p_d * sigma / e_unit),
            ];
            if let Some(p) = prev {
                terms.push((p, -1.0));
            }
            lp.add_constraint(terms.as_slice(), ComparisonOp::Eq, 0.0);
            prev = Some(e);
        }
    }
    for m in 0..mg {
        // θ + Σ w τ R α ≥ L, divided by scale_l.
        let mut terms = vec![(theta, 1.0)];
        let coefs: Vec<(Variable, f64)> = (0..kb)
            .filter_map(|k| am[k][m].map(|(v, sigma)| (v, problem.weights[k] as f64 * problem.tau * problem.rates[k][m] * sigma / scale_l)))
            .collect();
        let top = coefs.iter().map(|c| c.1).fold(0.0, f64::max);
        terms.extend(coefs.into_iter().filter(|&(_, c)| c > 0.0 && c >= COEF_FLOOR * top));
        lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, problem.demands[m] / scale_l);
    }

    quiet_solver_panics();
    let sol = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| lp.solve())) {
        Ok(r) => r.map_err(|e| Error::Solver(format!("scheduling LP: {e}")))?,
        Err(_) => return Err(Error::Solver("scheduling LP: singular basis".into())),
    };

    let mut schedule = Schedule::zeros(kb, mg);
    for k in 0..kb {
        let row = schedule.row_mut(k);
        row[0] = sol[a0[k]];
        for m in 0..mg {
            if let Some((v, sigma)) = am[k][m] {
                row[m + 1] = sol[v] * sigma;
            }
        }
    }
    Ok((schedule, sol[theta] * scale_l))
}

/// Relative shading tried, in order, when the simplex solver breaks down.
const PERTURBATIONS: [f64; 3] = [1e-9, 1e-7, 1e-5];

/// Scale every rate and harvest coefficient down by a slightly different
/// factor in `[1 - 2 eps, 1 - eps]`. This breaks the degeneracy that trips
/// the solver, and only ever tightens the LP.
fn shade(problem: &GspProblem, eps: f64) -> GspProblem {
    let mut p = problem.clone();
    let f = |k: usize, m: usize| 1.0 - eps * (1.0 + ((k * 31 + m * 17) % 13) as f64 / 13.0);
    for (k, (r, h)) in p.rates.iter_mut().zip(p.harvest.iter_mut()).enumerate() {
        for m in 0..r.len() {
            r[m] *= f(k, m);
            h[m] *= f(k, m + 7);
        }
    }
    p
}

/// The simplex solver panics on a singular basis instead of returning an
/// error. Those panics are caught and retried, so their messages are
/// silenced; every other panic goes to the previous hook.
fn quiet_solver_panics() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| {
        let prev = std::panic::take_hook();
        std::panic::set_hook(Box::new(move |info| {
            if info.location().is_some_and(|l| l.file().contains("minilp")) {
                return;
            }
            prev(info)
        }));
    });
}

/// Project an LP iterate onto the exact feasible set: clamp entries to
/// `[0, 1]`, shrink over-full rows, then walk forward through each
/// terminal's energy state and trim uploads that would overdraw it.
pub fn repair(problem: &GspProblem, schedule: &mut Schedule) {
    let mg = problem.num_gts();
    for k in 0..problem.num_blocks() {
        let row = schedule.row_mut(k);
        for a in row.iter_mut() {
            *a = a.clamp(0.0, 1.0);
        }
        let up: f64 = row[1..].iter().sum();
        if row[0] + up > 1.0 {
            let room = (1.0 - row[0]).max(0.0);
            if up > 0.0 {
                let f = room / up;
                for a in &mut row[1..] {
                    *a *= f;
                }
            }
            // Rounding in the scaled sum can still leave a residue.
            while row.iter().sum::<f64>() > 1.0 {
                let j = (1..=mg).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap_or(0);
                if row[j] == 0.0 {
                    row[0] = 1.0 - row[1..].iter().sum::<f64>();
                    break;
                }
                row[j] = (row[j] - f64::EPSILON).max(0.0);
            }
        }
    }
    for m in 0..mg {
        let mut e = 0.0;
        for k in 0..problem.num_blocks() {
            let a0 = schedule.wpt(k);
            let w = problem.weights[k] as f64 * problem.tau;
            let next = e + problem.block_energy(a0, schedule.upload(k, m), k, m);
            if next < 0.0 {
                let afford = ((e + w * a0 * problem.harvest[k][m]) / (w * problem.p_d)).max(0.0);
                let mut a = afford.min(schedule.upload(k, m));
                while a > 0.0 && e + problem.block_energy(a0, a, k, m) < 0.0 {
                    a = (a * (1.0 - 4.0 * f64::EPSILON) - f64::MIN_POSITIVE).max(0.0);
                }
                schedule.row_mut(k)[m + 1] = a;
                e += problem.block_energy(a0, a, k, m);
            } else {
                e = next;
            }
            e = e.max(0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;
    use crate::model::{EhParams, GroundTerminal, SystemParams};

    fn hover_scenario(demand: f64) -> Scenario {
        Scenario::new(
            SystemParams::reference(),
            EhParams::reference(),
            vec![GroundTerminal {
                position_m: Point2::ORIGIN,
                demand_bits: demand,
            }],
        )
        .unwrap()
    }

    #[test]
    fn shape_and_constants() {
        let sc = hover_scenario(1000.0);
        let t = Trajectory::from_slots(vec![Point2::ORIGIN; 4]);
        let p = build_gsp(&t, &sc).unwrap();
        assert_eq!(p.num_variables(), 4 * 2 + 1);
        assert!(p.rates.iter().all(|r| r[0] == p.rates[0][0]));
        assert!(p.harvest.iter().all(|r| r[0] == p.harvest[0][0]));
        assert!((p.rates[0][0] / 1.498e7 - 1.0).abs() < 1e-3);
        assert!((p.harvest[0][0] / 7.64e-5 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_trajectory() {
        let sc = hover_scenario(1000.0);
        assert!(build_gsp(&Trajectory::from_slots(vec![Point2::ORIGIN]), &sc).is_err());
        let t = Trajectory::from_slots(vec![Point2::ORIGIN, Point2::new(1.0, 0.0)]);
        assert!(build_gsp(&t, &sc).is_err());
    }

    #[test]
    fn zero_demand() {
        let sc = hover_scenario(0.0);
        let p = build_gsp(&Trajectory::from_slots(vec![Point2::ORIGIN; 3]), &sc).unwrap();
        let s = solve_gsp(&p, 1e-6).unwrap();
        assert!(s.theta <= 0.0);
    }

    #[test]
    fn hover_closed_form() {
        let l = 40960.0;
        let sc = hover_scenario(l);
        for t in [2usize, 3, 10, 50] {
            let p = build_gsp(&Trajectory::from_slots(vec![Point2::ORIGIN; t]), &sc).unwrap();
            let s = solve_gsp(&p, 1e-6).unwrap();
            let phi = p.harvest[0][0];
            let r = p.rates[0][0];
            let (_, a1) = hover_split(phi, p.p_d);
            assert!((a1 / 7.63e-4 - 1.0).abs() < 2e-3);
            let expect = l - t as f64 * a1 * r;
            assert!((s.theta - expect).abs() <= 1e-6 * l, "T={t}: {} vs {expect}", s.theta);
            assert!(p.min_stored_energy(&s.schedule) >= 0.0);
        }
    }

    #[test]
    fn demand_shift_moves_theta() {
        let sc = hover_scenario(1e9);
        let t = Trajectory::from_slots(vec![Point2::ORIGIN; 2]);
        let p = build_gsp(&t, &sc).unwrap();
        let base = solve_gsp(&p, 1e-6).unwrap().theta;
        let mut q = p.clone();
        q.demands[0] += 12345.0;
        let shifted = solve_gsp(&q, 1e-6).unwrap().theta;
        assert!((shifted - base - 12345.0).abs() < 1e-6 * 1e9);
    }

    #[test]
    fn blocks_match_slots() {
        let sc = Scenario::new(
            SystemParams::reference(),
            EhParams::reference(),
            vec![
                GroundTerminal {
                    position_m: Point2::new(10.0, 0.0),
                    demand_bits: 1e6,
                },
                GroundTerminal {
                    position_m: Point2::new(-5.0, 8.0),
                    demand_bits: 2e6,
                },
            ],
        )
        .unwrap();
        let mut pts = vec![Point2::ORIGIN];
        pts.extend(std::iter::repeat_n(Point2::new(10.0, 0.0), 30));
        pts.extend(std::iter::repeat_n(Point2::new(-5.0, 8.0), 20));
        pts.push(Point2::ORIGIN);
        let per_slot = solve_gsp(&build_gsp(&Trajectory::from_slots(pts.clone()), &sc).unwrap(), 1e-6).unwrap();
        let blocks = Trajectory::compress(&pts, 8);
        assert!(blocks.num_blocks() <= 8);
        let agg = solve_gsp(&build_gsp(&blocks, &sc).unwrap(), 1e-6).unwrap();
        assert!((per_slot.theta - agg.theta).abs() <= 1e-6 * 2e6);
    }

    #[test]
    fn repair_restores_causality() {
        let sc = hover_scenario(1e5);
        let p = build_gsp(&Trajectory::from_slots(vec![Point2::ORIGIN; 3]), &sc).unwrap();
        let mut s = Schedule::from_rows(&[vec![0.0, 1.0], vec![0.6, 0.6], vec![1.0, 0.0]]).unwrap();
        repair(&p, &mut s);
        assert_eq!(s.upload(0, 0), 0.0);
        assert!(s.row(1).iter().sum::<f64>() <= 1.0);
        assert!(p.min_stored_energy(&s) >= 0.0);
    }
}
