//! Forward replay of a plan against the exact channel and harvesting
//! models. Uses nothing from the optimizer.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    consumed_energy, harvested_energy, input_power, linear_harvested_energy, rate, HarvestModel, Scenario,
};
use crate::plan::Plan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Absolute slack per cumulative energy constraint, joules.
    pub energy_j: f64,
    /// Absolute data slack per terminal, bits.
    pub data_bits: f64,
    /// Absolute excess per flight step, metres.
    pub speed_m: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            energy_j: 1e-9,
            data_bits: 1.0,
            speed_m: 1e-6,
        }
    }
}

/// Energy ledger entry of one terminal in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyEntry {
    pub harvested_j: f64,
    pub consumed_j: f64,
    /// Stored energy at the end of the slot.
    pub remaining_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Distance of the first or last slot from the initial position.
    Endpoint { slot: usize, error_m: f64 },
    /// Step from `slot` to `slot + 1` longer than allowed.
    Speed { slot: usize, excess_m: f64 },
    /// Negative share or row sum above one.
    Simplex { slot: usize, excess: f64 },
    /// Stored energy below zero at the end of `slot` (0-based).
    Causality { gt: usize, slot: usize, deficit_j: f64 },
    Data { gt: usize, shortfall_bits: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Endpoint { slot, error_m } => write!(f, "endpoint at slot {slot}: off by {error_m:.3e} m"),
            Violation::Speed { slot, excess_m } => write!(f, "speed at step {slot}: {excess_m:.3e} m too long"),
            Violation::Simplex { slot, excess } => write!(f, "schedule row {slot}: excess {excess:.3e}"),
            Violation::Causality { gt, slot, deficit_j } => {
                write!(f, "energy causality of GT {gt} at slot {slot}: deficit {deficit_j:.3e} J")
            }
            Violation::Data { gt, shortfall_bits } => write!(f, "data of GT {gt}: short by {shortfall_bits:.3e} bits"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub horizon: usize,
    /// `energy[t][m]`.
    pub energy: Vec<Vec<EnergyEntry>>,
    pub delivered_bits: Vec<f64>,
    pub demand_bits: Vec<f64>,
    /// Largest endpoint offset, metres.
    pub endpoint_error_m: f64,
    /// `max_t (‖q[t+1] - q[t]‖ - D)`, metres (negative when slack).
    pub max_step_excess_m: f64,
    /// Largest simplex excess over all rows.
    pub max_simplex_excess: f64,
    /// `min_{m,t} E_R[t]`, joules.
    pub min_remaining_j: f64,
    /// `max_m (L_m - delivered_m)`, bits.
    pub max_data_shortfall_bits: f64,
    pub tolerances: Tolerances,
    /// Every violated constraint at `tolerances`.
    pub violations: Vec<Violation>,
    pub feasible: bool,
    /// Largest violation, each kind scaled by its tolerance.
    pub worst_violation: f64,
}

/// Replay under the sigmoid harvesting model.
pub fn simulate_plan(scenario: &Scenario, plan: &Plan) -> Result<VerificationReport> {
    simulate_plan_with(scenario, plan, &scenario.nonlinear())
}

pub fn simulate_plan_with(scenario: &Scenario, plan: &Plan, harvest: &HarvestModel) -> Result<VerificationReport> {
    let t_len = plan.trajectory.len();
    let mg = scenario.num_gts();
    if plan.schedule.num_rows() != t_len || plan.schedule.num_gts() != mg {
        return Err(Error::Dimension(format!(
            "plan has {t_len} slots and a {}x{} schedule for {mg} terminals",
            plan.schedule.num_rows(),
            plan.schedule.num_gts() + 1
        )));
    }
    let p = &scenario.params;
    let tau = p.slot_duration_s;
    let q0 = p.initial_position_m;

    let endpoint_error_m = match (plan.trajectory.first(), plan.trajectory.last()) {
        (Some(a), Some(b)) => a.dist(q0).max(b.dist(q0)),
        _ => f64::INFINITY,
    };
    let steps: Vec<f64> = plan
        .trajectory
        .windows(2)
        .map(|w| w[0].dist(w[1]) - p.max_step_m())
        .collect();
    let simplex: Vec<f64> = plan
        .schedule
        .rows()
        .map(|r| {
            let neg = r.iter().map(|&a| -a).fold(0.0, f64::max);
            (r.iter().sum::<f64>() - 1.0).max(neg)
        })
        .collect();

    let mut energy = Vec::with_capacity(t_len);
    let mut stored = vec![0.0; mg];
    let mut delivered = vec![0.0; mg];
    for (t, &q) in plan.trajectory.iter().enumerate() {
        let row = plan.schedule.row(t);
        let mut slot = Vec::with_capacity(mg);
        for (m, gt) in scenario.gts.iter().enumerate() {
            let p_in = input_power(q, gt.position_m, p);
            let harvested_j = match harvest {
                HarvestModel::Nonlinear(eh) => harvested_energy(row[0], p_in, eh, tau),
                HarvestModel::Linear { efficiency } => linear_harvested_energy(row[0], p_in, *efficiency, tau),
            };
            let consumed_j = consumed_energy(row[m + 1], p);
            stored[m] += harvested_j - consumed_j;
            delivered[m] += tau * row[m + 1] * rate(q, gt.position_m, p);
            slot.push(EnergyEntry {
                harvested_j,
                consumed_j,
                remaining_j: stored[m],
            });
        }
        energy.push(slot);
    }
    let demand_bits: Vec<f64> = scenario.gts.iter().map(|g| g.demand_bits).collect();
    let tolerances = Tolerances::default();
    let mut report = VerificationReport {
        horizon: t_len,
        min_remaining_j: energy
            .iter()
            .flatten()
            .map(|e| e.remaining_j)
            .fold(f64::INFINITY, f64::min),
        max_data_shortfall_bits: demand_bits
            .iter()
            .zip(&delivered)
            .map(|(l, d)| l - d)
            .fold(f64::NEG_INFINITY, f64::max),
        energy,
        delivered_bits: delivered,
        demand_bits,
        endpoint_error_m,
        max_step_excess_m: steps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_simplex_excess: simplex.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        tolerances,
        violations: Vec::new(),
        feasible: false,
        worst_violation: 0.0,
    };
    apply_tolerances(&mut report, &steps, &simplex, tolerances);
    Ok(report)
}

fn apply_tolerances(report: &mut VerificationReport, steps: &[f64], simplex: &[f64], tol: Tolerances) {
    let mut v = Vec::new();
    let mut worst: f64 = 0.0;
    if report.endpoint_error_m > 0.0 {
        v.push(Violation::Endpoint {
            slot: report.horizon.saturating_sub(1),
            error_m: report.endpoint_error_m,
        });
        worst = worst.max(report.endpoint_error_m / tol.speed_m);
    }
    for (t, &e) in steps.iter().enumerate() {
        if e > tol.speed_m {
            v.push(Violation::Speed { slot: t, excess_m: e });
        }
        worst = worst.max(e / tol.speed_m);
    }
    for (t, &e) in simplex.iter().enumerate() {
        if e > 1e-12 {
            v.push(Violation::Simplex { slot: t, excess: e });
        }
        worst = worst.max(e / 1e-12);
    }
    for (t, slot) in report.energy.iter().enumerate() {
        for (m, e) in slot.iter().enumerate() {
            if -e.remaining_j > tol.energy_j {
                v.push(Violation::Causality {
                    gt: m,
                    slot: t,
                    deficit_j: -e.remaining_j,
                });
            }
            worst = worst.max(-e.remaining_j / tol.energy_j);
        }
    }
    for (m, (l, d)) in report.demand_bits.iter().zip(&report.delivered_bits).enumerate() {
        if l - d > tol.data_bits {
            v.push(Violation::Data {
                gt: m,
                shortfall_bits: l - d,
            });
        }
        worst = worst.max((l - d) / tol.data_bits);
    }
    report.feasible = v.is_empty();
    report.violations = v;
    report.worst_violation = worst;
    report.tolerances = tol;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub violations: Vec<Violation>,
}

/// Threshold a report at custom energy and data tolerances. Speed,
/// endpoint and simplex checks keep their default thresholds.
pub fn assert_feasible(report: &VerificationReport, tol_energy_j: f64, tol_bits: f64) -> Verdict {
    let mut violations = Vec::new();
    for &viol in &report.violations {
        match viol {
            Violation::Causality { .. } | Violation::Data { .. } => {}
            other => violations.push(other),
        }
    }
    for (t, slot) in report.energy.iter().enumerate() {
        for (m, e) in slot.iter().enumerate() {
            if -e.remaining_j > tol_energy_j {
                violations.push(Violation::Causality {
                    gt: m,
                    slot: t,
                    deficit_j: -e.remaining_j,
                });
            }
        }
    }
    for (m, (l, d)) in report.demand_bits.iter().zip(&report.delivered_bits).enumerate() {
        if l - d > tol_bits {
            violations.push(Violation::Data {
                gt: m,
                shortfall_bits: l - d,
            });
        }
    }
    Verdict {
        pass: violations.is_empty(),
        violations,
    }
}
