//! Global lower bounds of the rate, elevation sine, input power and
//! harvested energy around an expansion trajectory.
//!
//! Each bound is the first-order Taylor expansion of a function that is
//! convex in `(e^{-S}, ‖q - s‖²)` (or in `e^{-U}`), hence a global
//! under-estimator. Writing `k = 1 + e^{-S^μ}` and `n = ‖q^μ - s‖² = (d^μ)²`:
//!
//! ```text
//! X^μ = γ C2 B / (ln2 · k · (γ (C1 k + C2) + k n^{a/2}))
//! Y^μ = γ a B (C1 k + C2) / (ln4 · n · (γ (C1 k + C2) + k n^{a/2}))
//! ψ^μ = C2 δ / (k² n^{a/2})
//! η^μ = (a/2) δ (C1 k + C2) / (k n^{a/2 + 1})
//! χ^μ = τ α0 D1 / (1 + e^{-U^μ})²
//! ```
//!
//! `n^{a/2+1} = (d^μ)^{a+2}`: the distance power in `η^μ` is `a + 2`.
//! Evaluators never clamp: the convex subproblem relies on the unclamped
//! affine and exponential forms.

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::model::{sigmoid, EhParams, Scenario, SystemParams};
use crate::plan::Trajectory;

/// Cached quantities of the current iterate `Q^μ`, indexed `[k][m]` by
/// trajectory block and zero-based terminal.
#[derive(Debug, Clone)]
pub struct ExpansionPoint {
    pub trajectory: Trajectory,
    pub gt_positions: Vec<Point2>,
    pub altitude: f64,
    /// `n = ‖q^μ - s_m‖²` including the altitude term, i.e. `(d^μ)²`.
    pub dist_sq: Vec<Vec<f64>>,
    pub elevation: Vec<Vec<f64>>,
    /// `S^μ = B1 + B2 v^μ`.
    pub s: Vec<Vec<f64>>,
    pub input_power: Vec<Vec<f64>>,
    /// `U^μ = β1 P_in^μ - β1 β2`.
    pub u: Vec<Vec<f64>>,
    /// `R^μ`, the rate at the expansion point.
    pub rate: Vec<Vec<f64>>,
    /// Harvested power `Φ(P_in^μ)`.
    pub harvest_power: Vec<Vec<f64>>,
}

impl ExpansionPoint {
    pub fn num_blocks(&self) -> usize {
        self.dist_sq.len()
    }

    pub fn num_gts(&self) -> usize {
        self.gt_positions.len()
    }

    pub fn point(&self, k: usize) -> Point2 {
        self.trajectory.points()[k]
    }

    /// `‖q - s_m‖²` including the altitude term.
    #[inline]
    pub fn dist_sq_at(&self, m: usize, q: Point2) -> f64 {
        q.dist_sq(self.gt_positions[m]) + self.altitude * self.altitude
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBoundCoeffs {
    pub r_mu: f64,
    pub x_mu: f64,
    pub y_mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputPowerBoundCoeffs {
    pub pin_mu: f64,
    pub psi_mu: f64,
    pub eta_mu: f64,
}

/// Harvest bound coefficients per unit of `τ α0`: `eh_mu` is the harvested
/// power at the expansion point and `chi_mu = D1 / (1 + e^{-U^μ})²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarvestBoundCoeffs {
    pub eh_mu: f64,
    pub chi_mu: f64,
    pub u_mu: f64,
    pub tau: f64,
}

pub fn make_expansion_point(trajectory: &Trajectory, scenario: &Scenario) -> Result<ExpansionPoint> {
    let params = &scenario.params;
    let pts = trajectory.points();
    if pts.is_empty() {
        return Err(Error::Dimension("empty trajectory".into()));
    }
    let q0 = params.initial_position_m;
    if pts[0] != q0 || pts[pts.len() - 1] != q0 {
        return Err(Error::Trajectory("trajectory must start and end at the initial position".into()));
    }
    let h = params.altitude_m;
    let gts: Vec<Point2> = scenario.gts.iter().map(|g| g.position_m).collect();
    let kb = pts.len();
    let mut ep = ExpansionPoint {
        trajectory: trajectory.clone(),
        gt_positions: gts.clone(),
        altitude: h,
        dist_sq: Vec::with_capacity(kb),
        elevation: Vec::with_capacity(kb),
        s: Vec::with_capacity(kb),
        input_power: Vec::with_capacity(kb),
        u: Vec::with_capacity(kb),
        rate: Vec::with_capacity(kb),
        harvest_power: Vec::with_capacity(kb),
    };
    let gamma = params.gamma();
    let delta = params.delta();
    let a = params.pathloss_exponent;
    for &q in pts {
        let mut n_row = Vec::with_capacity(gts.len());
        let mut v_row = Vec::with_capacity(gts.len());
        let mut s_row = Vec::with_capacity(gts.len());
        let mut p_row = Vec::with_capacity(gts.len());
        let mut u_row = Vec::with_capacity(gts.len());
        let mut r_row = Vec::with_capacity(gts.len());
        let mut phi_row = Vec::with_capacity(gts.len());
        for &s in &gts {
            let n = q.dist_sq(s) + h * h;
            let d = n.sqrt();
            let v = h / d;
            let s_val = params.logistic.s_of(v);
            let factor = params.logistic.factor_from_s(s_val);
            let da = n.powf(a / 2.0);
            let p_in = factor * delta / da;
            let r = params.bandwidth_hz * (factor * gamma / da).ln_1p() / std::f64::consts::LN_2;
            n_row.push(n);
            v_row.push(v);
            s_row.push(s_val);
            p_row.push(p_in);
            u_row.push(scenario.eh.u_of(p_in));
            r_row.push(r);
            phi_row.push(scenario.eh.output_power(p_in));
        }
        ep.dist_sq.push(n_row);
        ep.elevation.push(v_row);
        ep.s.push(s_row);
        ep.input_power.push(p_row);
        ep.u.push(u_row);
        ep.rate.push(r_row);
        ep.harvest_power.push(phi_row);
    }
    Ok(ep)
}

pub fn rate_bound_coeffs(ep: &ExpansionPoint, m: usize, k: usize, params: &SystemParams) -> RateBoundCoeffs {
    let l = &params.logistic;
    let gamma = params.gamma();
    let a = params.pathloss_exponent;
    let b = params.bandwidth_hz;
    let n = ep.dist_sq[k][m];
    let kk = 1.0 + (-ep.s[k][m]).exp();
    let lin = l.c1 * kk + l.c2;
    let denom = gamma * lin + kk * n.powf(a / 2.0);
    let ln2 = std::f64::consts::LN_2;
    RateBoundCoeffs {
        r_mu: b * (lin / kk * gamma / n.powf(a / 2.0)).ln_1p() / ln2,
        x_mu: gamma * l.c2 * b / (ln2 * kk * denom),
        y_mu: gamma * a * b * lin / (2.0 * ln2 * n * denom),
    }
}

/// `R^lb(q, S)`; equal to `R^μ` at `(q^μ, S^μ)` and below the rate with
/// logistic slack `S` everywhere.
pub fn rate_lower_bound(c: &RateBoundCoeffs, ep: &ExpansionPoint, m: usize, k: usize, q: Point2, s: f64) -> f64 {
    let du = ep.dist_sq_at(m, q) - ep.dist_sq[k][m];
    c.r_mu - c.x_mu * ((-s).exp() - (-ep.s[k][m]).exp()) - c.y_mu * du
}

/// Affine-in-`‖q - s‖²` lower bound of `v = H / d`.
pub fn elevation_lower_bound(ep: &ExpansionPoint, m: usize, k: usize, q: Point2) -> f64 {
    let n = ep.dist_sq[k][m];
    let du = ep.dist_sq_at(m, q) - n;
    ep.elevation[k][m] - ep.altitude / (2.0 * n.powf(1.5)) * du
}

pub fn input_power_bound_coeffs(ep: &ExpansionPoint, m: usize, k: usize, params: &SystemParams) -> InputPowerBoundCoeffs {
    let l = &params.logistic;
    let delta = params.delta();
    let a = params.pathloss_exponent;
    let n = ep.dist_sq[k][m];
    let kk = 1.0 + (-ep.s[k][m]).exp();
    let na = n.powf(a / 2.0);
    InputPowerBoundCoeffs {
        pin_mu: ep.input_power[k][m],
        psi_mu: l.c2 * delta / (kk * kk * na),
        eta_mu: (a / 2.0) * delta * (l.c1 * kk + l.c2) / (kk * na * n),
    }
}

pub fn input_power_lower_bound(
    c: &InputPowerBoundCoeffs,
    ep: &ExpansionPoint,
    m: usize,
    k: usize,
    q: Point2,
    s: f64,
) -> f64 {
    let du = ep.dist_sq_at(m, q) - ep.dist_sq[k][m];
    c.pin_mu - c.psi_mu * ((-s).exp() - (-ep.s[k][m]).exp()) - c.eta_mu * du
}

pub fn harvest_bound_coeffs(ep: &ExpansionPoint, m: usize, k: usize, eh: &EhParams, tau: f64) -> HarvestBoundCoeffs {
    let u = ep.u[k][m];
    let kk = 1.0 + (-u).exp();
    HarvestBoundCoeffs {
        eh_mu: eh.d1() * sigmoid(u) - eh.d2(),
        chi_mu: eh.d1() / (kk * kk),
        u_mu: u,
        tau,
    }
}

/// `E^{H,lb}` in joules for WPT share `alpha0` and exponent slack `u`.
pub fn harvest_lower_bound(c: &HarvestBoundCoeffs, alpha0: f64, u: f64) -> f64 {
    c.tau * alpha0 * (c.eh_mu - c.chi_mu * ((-u).exp() - (-c.u_mu).exp()))
}
