//! Convexified trajectory subproblem for a fixed schedule.
//!
//! The slack variables `S` and `U` are eliminated in closed form. Both the
//! rate and the harvest bounds increase with `S` and `U`, so at any optimum
//! their upper bounds are active:
//!
//! ```text
//! S = S^μ - κ Δ,            κ = B2 H / (2 n^{3/2})
//! U = U^μ + β1 (P^lb - P^μ)
//! ```
//!
//! with `Δ = ‖q - s‖² + H² - n`. Every bound then becomes a scalar concave,
//! non-increasing function of `Δ`, and `Δ` is convex in `q`:
//!
//! ```text
//! R^lb(Δ) = R^μ - X e^{-S^μ} (e^{κΔ} - 1) - Y Δ
//! P^lb(Δ) = P^μ - ψ e^{-S^μ} (e^{κΔ} - 1) - η Δ
//! h(Δ)    = Φ^μ - D1 σ(U^μ) σ(-U^μ) (e^{z} - 1),   z = -β1 (P^lb - P^μ)
//! ```
//!
//! The remaining program in the free block points and `θ` is solved by the
//! log-barrier method in [`crate::barrier`].

use nalgebra::DMatrix;

use crate::barrier::{self, BarrierOptions, BarrierStatus, ConvexConstraints};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::linearize::{input_power_bound_coeffs, rate_bound_coeffs, ExpansionPoint};
use crate::model::{sigmoid, HarvestModel, Scenario};
use crate::plan::{Schedule, Trajectory};

/// Exponent cap of the active terms; beyond it the bounds are so negative
/// that the point is useless, and evaluation would overflow.
const EXP_GUARD: f64 = 50.0;
/// Harvest terms with a smaller WPT share are dropped (true harvest is
/// non-negative, so this is conservative).
const ALPHA_EPS: f64 = 1e-12;
/// Relative slack on every cumulative energy row. Schedules from the LP
/// spend every harvested joule, and where the UAV already hovers overhead
/// no trajectory can harvest more, so without it the program would have no
/// strict interior. The slack also gives the trajectory room to trade a
/// little energy for data; callers repair the schedule afterwards.
const ENERGY_SLACK: f64 = 1e-3;
/// The warm start is pulled this fraction toward the initial position, so
/// full-speed steps start strictly inside the speed limit.
const WARM_SHRINK: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
enum HarvestBound {
    Sigmoid { beta1: f64 },
    Linear { efficiency: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Term {
    gt: Point2,
    n: f64,
    kappa: f64,
    r_mu: f64,
    xr: f64,
    y: f64,
    pr: f64,
    eta: f64,
    phi_mu: f64,
    /// `D1 σ(U^μ) σ(-U^μ)`, i.e. `χ^μ e^{-U^μ}` per unit `τ α0`.
    ch: f64,
}

impl Term {
    fn rate(&self, d: f64) -> (f64, f64, f64) {
        let e = (self.kappa * d).exp();
        (
            self.r_mu - self.xr * (self.kappa * d).exp_m1() - self.y * d,
            -self.xr * self.kappa * e - self.y,
            -self.xr * self.kappa * self.kappa * e,
        )
    }

    /// `P^μ - P^lb` and its derivatives.
    fn power_drop(&self, d: f64) -> (f64, f64, f64) {
        let e = (self.kappa * d).exp();
        (
            self.pr * (self.kappa * d).exp_m1() + self.eta * d,
            self.pr * self.kappa * e + self.eta,
            self.pr * self.kappa * self.kappa * e,
        )
    }

    fn harvest(&self, d: f64, model: HarvestBound) -> (f64, f64, f64) {
        let (p, p1, p2) = self.power_drop(d);
        match model {
            HarvestBound::Sigmoid { beta1 } => {
                let (z, z1, z2) = (beta1 * p, beta1 * p1, beta1 * p2);
                let ez = z.exp();
                (
                    self.phi_mu - self.ch * z.exp_m1(),
                    -self.ch * ez * z1,
                    -self.ch * ez * (z1 * z1 + z2),
                )
            }
            HarvestBound::Linear { efficiency } => (
                self.phi_mu - efficiency * p,
                -efficiency * p1,
                -efficiency * p2,
            ),
        }
    }

    fn exponent(&self, d: f64, model: HarvestBound) -> f64 {
        match model {
            HarvestBound::Sigmoid { beta1 } => (self.kappa * d).max(beta1 * self.power_drop(d).0),
            HarvestBound::Linear { .. } => self.kappa * d,
        }
    }
}

#[derive(Debug, Clone)]
struct EnergyRow {
    m: usize,
    k: usize,
    /// `Σ_{k' <= k} w τ P^D α_m`, the normalizer.
    consumed: f64,
}

/// Trajectory subproblem around an expansion point for a fixed schedule.
#[derive(Debug, Clone)]
pub struct UtpProblem {
    weights: Vec<usize>,
    q0: Point2,
    altitude: f64,
    d_max: f64,
    demands: Vec<f64>,
    data_scale: f64,
    model: HarvestBound,
    /// `terms[k][m]`.
    terms: Vec<Vec<Term>>,
    /// `w τ α_m[k]` per `[k][m]`.
    upload: Vec<Vec<f64>>,
    /// `w τ α0[k]`.
    wpt: Vec<f64>,
    energy_rows: Vec<EnergyRow>,
    s_mu: Vec<Vec<f64>>,
    u_mu: Vec<Vec<f64>>,
    ep_points: Vec<Point2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtpStatus {
    Optimal,
    /// No strictly feasible point exists around the warm start, or the
    /// solver failed; the warm start is returned.
    NoProgress,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct UtpSolution {
    pub trajectory: Trajectory,
    /// `S[k][m]` at the solution.
    pub s: Vec<Vec<f64>>,
    /// `U[k][m]` at the solution (sigmoid model only; empty otherwise).
    pub u: Vec<Vec<f64>>,
    /// Bound-implied shortfall `max_m (L_m - Σ w τ α R^lb)`.
    pub theta: f64,
    pub status: UtpStatus,
    /// Largest scaled constraint value at the returned point.
    pub max_violation: f64,
    pub newton_steps: usize,
}

impl UtpProblem {
    pub fn num_blocks(&self) -> usize {
        self.weights.len()
    }

    pub fn num_gts(&self) -> usize {
        self.demands.len()
    }

    fn num_free(&self) -> usize {
        self.num_blocks().saturating_sub(2)
    }

    /// Number of optimization variables: free block coordinates and `θ`.
    pub fn num_variables(&self) -> usize {
        2 * self.num_free() + 1
    }

    fn theta_index(&self) -> usize {
        2 * self.num_free()
    }

    fn point(&self, x: &[f64], k: usize) -> Point2 {
        if k == 0 || k + 1 == self.num_blocks() {
            self.q0
        } else {
            Point2::new(x[2 * (k - 1)], x[2 * (k - 1) + 1]) * self.d_max
        }
    }

    fn delta(&self, q: Point2, t: &Term) -> f64 {
        q.dist_sq(t.gt) + self.altitude * self.altitude - t.n
    }

    fn num_speed(&self) -> usize {
        self.num_blocks().saturating_sub(1)
    }

    /// Bound-implied shortfall at block points `pts`.
    fn shortfall_at(&self, pts: &[Point2]) -> f64 {
        (0..self.num_gts())
            .map(|m| {
                let got: f64 = (0..self.num_blocks())
                    .filter(|&k| self.upload[k][m] > 0.0)
                    .map(|k| self.upload[k][m] * self.terms[k][m].rate(self.delta(pts[k], &self.terms[k][m])).0)
                    .sum();
                self.demands[m] - got
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn encode(&self, pts: &[Point2], theta: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.num_variables());
        for p in &pts[1..pts.len() - 1] {
            x.push(p.x / self.d_max);
            x.push(p.y / self.d_max);
        }
        x.push(theta / self.data_scale);
        x
    }

    fn decode(&self, x: &[f64]) -> Vec<Point2> {
        (0..self.num_blocks()).map(|k| self.point(x, k)).collect()
    }
}

pub fn build_utp(schedule: &Schedule, ep: &ExpansionPoint, scenario: &Scenario) -> Result<UtpProblem> {
    build_utp_with(schedule, ep, scenario, &scenario.nonlinear())
}

pub fn build_utp_with(
    schedule: &Schedule,
    ep: &ExpansionPoint,
    scenario: &Scenario,
    harvest: &HarvestModel,
) -> Result<UtpProblem> {
    let kb = ep.num_blocks();
    let mg = ep.num_gts();
    if schedule.num_rows() != kb || schedule.num_gts() != mg || scenario.num_gts() != mg {
        return Err(Error::Dimension(format!(
            "schedule is {}x{}, expansion point has {kb} blocks and {mg} terminals",
            schedule.num_rows(),
            schedule.num_gts() + 1
        )));
    }
    let p = &scenario.params;
    let weights = ep.trajectory.weights().to_vec();
    let (model, phi_of): (HarvestBound, Box<dyn Fn(f64) -> f64>) = match *harvest {
        HarvestModel::Nonlinear(eh) => (HarvestBound::Sigmoid { beta1: eh.slope }, Box::new(move |_| 0.0)),
        HarvestModel::Linear { efficiency } => (HarvestBound::Linear { efficiency }, Box::new(move |pin| efficiency * pin)),
    };
    let d1 = scenario.eh.d1();
    let mut terms = Vec::with_capacity(kb);
    let mut upload = Vec::with_capacity(kb);
    let mut wpt = Vec::with_capacity(kb);
    for k in 0..kb {
        let w = weights[k] as f64 * p.slot_duration_s;
        let mut row = Vec::with_capacity(mg);
        for m in 0..mg {
            let rc = rate_bound_coeffs(ep, m, k, p);
            let pc = input_power_bound_coeffs(ep, m, k, p);
            let n = ep.dist_sq[k][m];
            let es = (-ep.s[k][m]).exp();
            let u = ep.u[k][m];
            let phi_mu = match model {
                HarvestBound::Sigmoid { .. } => ep.harvest_power[k][m],
                HarvestBound::Linear { .. } => phi_of(ep.input_power[k][m]),
            };
            row.push(Term {
                gt: ep.gt_positions[m],
                n,
                kappa: p.logistic.b2 * p.altitude_m / (2.0 * n.powf(1.5)),
                r_mu: rc.r_mu,
                xr: rc.x_mu * es,
                y: rc.y_mu,
                pr: pc.psi_mu * es,
                eta: pc.eta_mu,
                phi_mu,
                ch: d1 * sigmoid(u) * sigmoid(-u),
            });
        }
        terms.push(row);
        let r = schedule.row(k);
        let clean = |a: f64| if a.is_finite() { a.clamp(0.0, 1.0) } else { 0.0 };
        wpt.push(if r[0] > ALPHA_EPS { w * clean(r[0]) } else { 0.0 });
        upload.push((0..mg).map(|m| w * clean(r[m + 1])).collect::<Vec<f64>>());
    }
    // Rows whose harvest terms all sit at the pinned endpoints are
    // constants; when they already hold they are dropped, since a barrier
    // cannot carry a constant constraint that is tight.
    let first_free_harvest = (1..kb.saturating_sub(1)).find(|&k| wpt[k] > 0.0).unwrap_or(kb);
    let mut energy_rows = Vec::new();
    for m in 0..mg {
        let mut consumed = 0.0;
        let mut pinned_harvest = 0.0;
        for k in 0..kb {
            if k == 0 || k + 1 == kb {
                pinned_harvest += wpt[k] * terms[k][m].phi_mu;
            }
            if upload[k][m] > 0.0 {
                consumed += p.gt_tx_power_w * upload[k][m];
                let constant = k < first_free_harvest;
                if constant && consumed <= pinned_harvest * (1.0 + 1e-12) {
                    continue;
                }
                energy_rows.push(EnergyRow { m, k, consumed });
            }
        }
    }
    let demands: Vec<f64> = scenario.gts.iter().map(|g| g.demand_bits).collect();
    let data_scale = demands.iter().copied().fold(1.0, f64::max);
    Ok(UtpProblem {
        weights,
        q0: p.initial_position_m,
        altitude: p.altitude_m,
        d_max: p.max_step_m(),
        demands,
        data_scale,
        model,
        terms,
        upload,
        wpt,
        energy_rows,
        s_mu: ep.s.clone(),
        u_mu: ep.u.clone(),
        ep_points: ep.trajectory.points().to_vec(),
    })
}

/// Scratch evaluation of every `(k, m)` term at a point.
struct TermValues {
    delta: Vec<Vec<f64>>,
    r: Vec<Vec<(f64, f64, f64)>>,
    h: Vec<Vec<(f64, f64, f64)>>,
}

impl UtpProblem {
    fn term_values(&self, pts: &[Point2]) -> Option<TermValues> {
        let kb = self.num_blocks();
        let mg = self.num_gts();
        let mut tv = TermValues {
            delta: vec![vec![0.0; mg]; kb],
            r: vec![vec![(0.0, 0.0, 0.0); mg]; kb],
            h: vec![vec![(0.0, 0.0, 0.0); mg]; kb],
        };
        for k in 0..kb {
            let harvest_active = self.wpt[k] > 0.0;
            for m in 0..mg {
                let t = &self.terms[k][m];
                let d = self.delta(pts[k], t);
                tv.delta[k][m] = d;
                let data_active = self.upload[k][m] > 0.0;
                if !(data_active || harvest_active) {
                    continue;
                }
                if t.exponent(d, self.model) > EXP_GUARD || !d.is_finite() {
                    return None;
                }
                if data_active {
                    tv.r[k][m] = t.rate(d);
                }
                if harvest_active {
                    tv.h[k][m] = t.harvest(d, self.model);
                }
            }
        }
        Some(tv)
    }
}

impl ConvexConstraints for UtpProblem {
    fn dim(&self) -> usize {
        self.num_variables()
    }

    fn num_constraints(&self) -> usize {
        self.num_speed() + self.num_gts() + self.energy_rows.len()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> bool {
        let pts = self.decode(x);
        let Some(tv) = self.term_values(&pts) else {
            return false;
        };
        let theta = x[self.theta_index()];
        let mut i = 0;
        for k in 0..self.num_speed() {
            out[i] = pts[k + 1].dist_sq(pts[k]) / (self.d_max * self.d_max) - 1.0;
            i += 1;
        }
        for m in 0..self.num_gts() {
            let got: f64 = (0..self.num_blocks())
                .filter(|&k| self.upload[k][m] > 0.0)
                .map(|k| self.upload[k][m] * tv.r[k][m].0)
                .sum();
            out[i] = (self.demands[m] - got) / self.data_scale - theta;
            i += 1;
        }
        let mg = self.num_gts();
        let mut harvested = vec![0.0; mg];
        let mut next = vec![0usize; mg];
        // Rows are grouped by terminal and ordered by block.
        let mut row_start = vec![0usize; mg + 1];
        for r in &self.energy_rows {
            row_start[r.m + 1] += 1;
        }
        for m in 0..mg {
            row_start[m + 1] += row_start[m];
        }
        for m in 0..mg {
            next[m] = row_start[m];
        }
        for k in 0..self.num_blocks() {
            for m in 0..mg {
                if self.wpt[k] > 0.0 {
                    harvested[m] += self.wpt[k] * tv.h[k][m].0;
                }
                if next[m] < row_start[m + 1] && self.energy_rows[next[m]].k == k {
                    let row = &self.energy_rows[next[m]];
                    out[i + next[m]] = (row.consumed - harvested[m]) / row.consumed - ENERGY_SLACK;
                    next[m] += 1;
                }
            }
        }
        out.iter().all(|v| v.is_finite())
    }

    fn derivatives(&self, x: &[f64], w: &[f64], v: &[f64], gw: &mut [f64], gv: &mut [f64], hess: &mut DMatrix<f64>) {
        let kb = self.num_blocks();
        let mg = self.num_gts();
        let nf = self.num_free();
        let th = self.theta_index();
        let pts = self.decode(x);
        let tv = self.term_values(&pts).expect("derivatives requested outside the domain");
        let dm = self.d_max;
        let free = |k: usize| k >= 1 && k <= nf;
        let idx = |k: usize| 2 * (k - 1);

        // Speed.
        for k in 0..self.num_speed() {
            let dq = (pts[k + 1] - pts[k]) * (1.0 / dm);
            let g = [2.0 * dq.x, 2.0 * dq.y];
            let (wi, vi) = (w[k], v[k]);
            let blocks: [(usize, f64); 2] = [(k + 1, 1.0), (k, -1.0)];
            for &(b, sgn) in &blocks {
                if !free(b) {
                    continue;
                }
                let j = idx(b);
                for a in 0..2 {
                    gw[j + a] += wi * sgn * g[a];
                    gv[j + a] += vi * sgn * g[a];
                }
            }
            for &(b1, s1) in &blocks {
                if !free(b1) {
                    continue;
                }
                for &(b2, s2) in &blocks {
                    if !free(b2) {
                        continue;
                    }
                    let (i1, i2) = (idx(b1), idx(b2));
                    for a in 0..2 {
                        hess[(i1 + a, i2 + a)] += wi * 2.0 * s1 * s2;
                        for b in 0..2 {
                            hess[(i1 + a, i2 + b)] += vi * s1 * s2 * g[a] * g[b];
                        }
                    }
                }
            }
        }

        // Per-term gradient (w.r.t. scaled block coordinates) and Hessian
        // of a scalar function f(Δ) with derivatives (f1, f2).
        let grad_hess = |k: usize, m: usize, f1: f64, f2: f64| -> ([f64; 2], [[f64; 2]; 2]) {
            let r = pts[k] - self.terms[k][m].gt;
            let g = [f1 * 2.0 * dm * r.x, f1 * 2.0 * dm * r.y];
            let rr = [r.x, r.y];
            let mut h = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    h[a][b] = f2 * 4.0 * dm * dm * rr[a] * rr[b];
                }
                h[a][a] += f1 * 2.0 * dm * dm;
            }
            (g, h)
        };

        // Data rows: c = (L - Σ u R(Δ)) / Ls - θ.
        let base = self.num_speed();
        let mut gbuf: Vec<(usize, [f64; 2])> = Vec::with_capacity(kb);
        for m in 0..mg {
            let (wi, vi) = (w[base + m], v[base + m]);
            gbuf.clear();
            for k in 1..=nf {
                if self.upload[k][m] <= 0.0 {
                    continue;
                }
                let c = -self.upload[k][m] / self.data_scale;
                let (_, r1, r2) = tv.r[k][m];
                let (g, h) = grad_hess(k, m, c * r1, c * r2);
                let j = idx(k);
                for a in 0..2 {
                    gw[j + a] += wi * g[a];
                    gv[j + a] += vi * g[a];
                    for b in 0..2 {
                        hess[(j + a, j + b)] += wi * h[a][b];
                    }
                }
                gbuf.push((j, g));
            }
            gw[th] -= wi;
            gv[th] -= vi;
            hess[(th, th)] += vi;
            for &(j1, g1) in &gbuf {
                for a in 0..2 {
                    hess[(j1 + a, th)] -= vi * g1[a];
                    hess[(th, j1 + a)] -= vi * g1[a];
                }
                for &(j2, g2) in &gbuf {
                    for a in 0..2 {
                        for b in 0..2 {
                            hess[(j1 + a, j2 + b)] += vi * g1[a] * g2[b];
                        }
                    }
                }
            }
        }

        // Energy rows: c_{mk} = (C_{mk} - Σ_{k'<=k} a_{k'} h(Δ_{mk'})) / C_{mk}.
        let ebase = base + mg;
        // Suffix sums over a terminal's rows: Σ w/C, Σ v/C and Σ v/C².
        let mut sw = vec![0.0; kb + 1];
        let mut sv1 = vec![0.0; kb + 1];
        let mut sv = vec![0.0; kb + 1];
        let mut gk: Vec<[f64; 2]> = vec![[0.0; 2]; kb];
        let mut row = 0;
        for m in 0..mg {
            sw.iter_mut().for_each(|s| *s = 0.0);
            sv1.iter_mut().for_each(|s| *s = 0.0);
            sv.iter_mut().for_each(|s| *s = 0.0);
            let start = row;
            while row < self.energy_rows.len() && self.energy_rows[row].m == m {
                let r = &self.energy_rows[row];
                sw[r.k] += w[ebase + row] / r.consumed;
                sv1[r.k] += v[ebase + row] / r.consumed;
                sv[r.k] += v[ebase + row] / (r.consumed * r.consumed);
                row += 1;
            }
            if row == start {
                continue;
            }
            for k in (0..kb).rev() {
                sw[k] += sw[k + 1];
                sv1[k] += sv1[k + 1];
                sv[k] += sv[k + 1];
            }
            let mut active: Vec<usize> = Vec::new();
            for k in 1..=nf {
                if self.wpt[k] <= 0.0 || sw[k] == 0.0 && sv[k] == 0.0 {
                    continue;
                }
                let (_, h1, h2) = tv.h[k][m];
                let a = -self.wpt[k];
                let (g, h) = grad_hess(k, m, a * h1, a * h2);
                gk[k] = g;
                let j = idx(k);
                for p in 0..2 {
                    gw[j + p] += sw[k] * g[p];
                    gv[j + p] += sv1[k] * g[p];
                    for q in 0..2 {
                        hess[(j + p, j + q)] += sw[k] * h[p][q];
                    }
                }
                active.push(k);
            }
            for (ai, &k1) in active.iter().enumerate() {
                let j1 = idx(k1);
                for &k2 in &active[ai..] {
                    let j2 = idx(k2);
                    let s = sv[k2];
                    let (g1, g2) = (gk[k1], gk[k2]);
                    for p in 0..2 {
                        for q in 0..2 {
                            let val = s * g1[p] * g2[q];
                            hess[(j1 + p, j2 + q)] += val;
                            if k1 != k2 {
                                hess[(j2 + q, j1 + p)] += val;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Solve the trajectory subproblem warm-started at the expansion point.
/// `tol` is the relative objective accuracy.
pub fn solve_utp(problem: &UtpProblem, tol: f64) -> Result<UtpSolution> {
    let pts0 = problem.ep_points.clone();
    let theta0 = problem.shortfall_at(&pts0);
    let start: Vec<Point2> = pts0
        .iter()
        .map(|&q| problem.q0 + (q - problem.q0) * (1.0 - WARM_SHRINK))
        .collect();
    let x0 = problem.encode(&start, theta0 + 0.1 * problem.data_scale.max(theta0.abs()));
    let gap = tol * (theta0.abs() / problem.data_scale).max(1.0);
    let opts = BarrierOptions {
        gap_tol: gap,
        interior_margin: 0.1 * WARM_SHRINK,
        ..BarrierOptions::default()
    };
    let res = barrier::minimize(problem, &vec_unit(problem.num_variables(), problem.theta_index()), &x0, &opts);
    let warm = |newton_steps| -> Result<UtpSolution> { finish(problem, &pts0, UtpStatus::NoProgress, 0.0, newton_steps) };
    match res.status {
        BarrierStatus::NoInterior | BarrierStatus::BadStart => return warm(res.newton_steps),
        BarrierStatus::Converged | BarrierStatus::IterationLimit => {}
    }
    let pts = problem.decode(&res.x);
    let theta = problem.shortfall_at(&pts);
    // Within solver accuracy of the warm start still counts: the barrier
    // lands near the analytic center, and the energy headroom it buys is
    // what the next schedule step spends.
    if !(theta <= theta0 + gap * problem.data_scale) {
        return warm(res.newton_steps);
    }
    let status = if res.status == BarrierStatus::Converged {
        UtpStatus::Optimal
    } else {
        UtpStatus::IterationLimit
    };
    finish(problem, &pts, status, res.max_violation, res.newton_steps)
}

fn vec_unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn finish(problem: &UtpProblem, pts: &[Point2], status: UtpStatus, max_violation: f64, newton_steps: usize) -> Result<UtpSolution> {
    let kb = problem.num_blocks();
    let mg = problem.num_gts();
    let mut s = vec![vec![0.0; mg]; kb];
    let mut u = Vec::new();
    for k in 0..kb {
        for m in 0..mg {
            let t = &problem.terms[k][m];
            s[k][m] = problem.s_mu[k][m] - t.kappa * problem.delta(pts[k], t);
        }
    }
    if let HarvestBound::Sigmoid { beta1 } = problem.model {
        u = vec![vec![0.0; mg]; kb];
        for k in 0..kb {
            for m in 0..mg {
                let t = &problem.terms[k][m];
                u[k][m] = problem.u_mu[k][m] - beta1 * t.power_drop(problem.delta(pts[k], t)).0;
            }
        }
    }
    Ok(UtpSolution {
        trajectory: Trajectory::from_blocks(pts.to_vec(), problem.weights.clone())?,
        s,
        u,
        theta: problem.shortfall_at(pts),
        status,
        max_violation,
        newton_steps,
    })
}
