//! Scenario description and the exact (non-linearized) channel and
//! energy-harvesting models.
//!
//! Every quantity is stored in SI units with linear gains; decibel values
//! are converted once at ingestion (see [`db_to_linear`] and
//! [`dbm_to_watts`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Logistic function `1 / (1 + e^{-x})`, saturating cleanly at both ends.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Coefficients of the elevation-dependent logistic fit of the outage-rate
/// threshold: `C1 + C2 / (1 + exp(-(B1 + B2 v)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Logistic {
    /// Logistic factor for a given slack value `s = B1 + B2 v`.
    #[inline]
    pub fn factor_from_s(&self, s: f64) -> f64 {
        self.c1 + self.c2 * sigmoid(s)
    }

    #[inline]
    pub fn s_of(&self, elevation_sine: f64) -> f64 {
        self.b1 + self.b2 * elevation_sine
    }

    #[inline]
    pub fn factor(&self, elevation_sine: f64) -> f64 {
        self.factor_from_s(self.s_of(elevation_sine))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub bandwidth_hz: f64,
    pub noise_power_w: f64,
    pub snr_gap_linear: f64,
    pub gt_tx_power_w: f64,
    pub uav_tx_power_w: f64,
    pub ref_channel_gain_linear: f64,
    pub pathloss_exponent: f64,
    pub slot_duration_s: f64,
    pub altitude_m: f64,
    pub max_speed_mps: f64,
    pub initial_position_m: Point2,
    pub logistic: Logistic,
    /// Outage level the logistic coefficients were fitted for. Carried for
    /// provenance only; no formula reads it.
    pub outage_epsilon: Option<f64>,
}

impl SystemParams {
    /// Radio and flight parameters of the reference evaluation setup.
    pub fn reference() -> Self {
        SystemParams {
            bandwidth_hz: 1e6,
            noise_power_w: 1e-10,
            snr_gap_linear: db_to_linear(8.2),
            gt_tx_power_w: dbm_to_watts(20.0),
            uav_tx_power_w: dbm_to_watts(40.0),
            ref_channel_gain_linear: db_to_linear(-10.0),
            pathloss_exponent: 2.0,
            slot_duration_s: 1.0,
            altitude_m: 20.0,
            max_speed_mps: 35.0,
            initial_position_m: Point2::ORIGIN,
            logistic: Logistic {
                b1: -4.3221,
                b2: 6.075,
                c1: 0.0,
                c2: 1.0,
            },
            outage_epsilon: None,
        }
    }

    /// `γ = P^D ρ0 / (σ² Γ)`.
    pub fn gamma(&self) -> f64 {
        self.gt_tx_power_w * self.ref_channel_gain_linear / (self.noise_power_w * self.snr_gap_linear)
    }

    /// `δ = P^U ρ0`.
    pub fn delta(&self) -> f64 {
        self.uav_tx_power_w * self.ref_channel_gain_linear
    }

    /// Largest horizontal displacement per slot, `v_max τ`.
    pub fn max_step_m(&self) -> f64 {
        self.max_speed_mps * self.slot_duration_s
    }

    pub fn validate(&self) -> Result<()> {
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("noise_power_w", self.noise_power_w)?;
        if !(self.snr_gap_linear >= 1.0) || !self.snr_gap_linear.is_finite() {
            return Err(Error::param("snr_gap_linear", "must be finite and >= 1"));
        }
        positive("gt_tx_power_w", self.gt_tx_power_w)?;
        positive("uav_tx_power_w", self.uav_tx_power_w)?;
        positive("ref_channel_gain_linear", self.ref_channel_gain_linear)?;
        if !(self.pathloss_exponent >= 2.0) || !self.pathloss_exponent.is_finite() {
            return Err(Error::param("pathloss_exponent", "must be finite and >= 2"));
        }
        positive("slot_duration_s", self.slot_duration_s)?;
        positive("altitude_m", self.altitude_m)?;
        positive("max_speed_mps", self.max_speed_mps)?;
        if !self.initial_position_m.is_finite() {
            return Err(Error::param("initial_position_m", "must be finite"));
        }
        let l = &self.logistic;
        if !l.b1.is_finite() {
            return Err(Error::param("logistic.b1", "must be finite"));
        }
        positive("logistic.b2", l.b2)?;
        if !(l.c1 >= 0.0) || !l.c1.is_finite() {
            return Err(Error::param("logistic.c1", "must be finite and >= 0"));
        }
        positive("logistic.c2", l.c2)?;
        if ((l.c1 + l.c2) - 1.0).abs() > 1e-9 {
            return Err(Error::param("logistic", format!("c1 + c2 must equal 1, got {}", l.c1 + l.c2)));
        }
        if let Some(eps) = self.outage_epsilon {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::param("outage_epsilon", "must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and > 0, got {v}")))
    }
}

/// Sigmoid energy-harvesting circuit model: saturation `K`, slope `β1` and
/// turning point `β2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EhParams {
    pub max_output_w: f64,
    pub slope: f64,
    pub turning_point_w: f64,
}

impl EhParams {
    pub fn reference() -> Self {
        EhParams {
            max_output_w: 0.02,
            slope: 6400.0,
            turning_point_w: 0.003,
        }
    }

    /// `Ω = 1 / (1 + exp(β1 β2))`, the logistic output at zero input.
    pub fn omega(&self) -> f64 {
        sigmoid(-self.slope * self.turning_point_w)
    }

    /// `D1 = K / (1 - Ω)`.
    pub fn d1(&self) -> f64 {
        self.max_output_w / (1.0 - self.omega())
    }

    /// `D2 = K Ω / (1 - Ω)`.
    pub fn d2(&self) -> f64 {
        self.max_output_w * self.omega() / (1.0 - self.omega())
    }

    /// Exponent argument `U = β1 p - β1 β2` of the harvesting logistic.
    #[inline]
    pub fn u_of(&self, p_in: f64) -> f64 {
        self.slope * p_in - self.slope * self.turning_point_w
    }

    /// Harvested DC power for input power `p_in >= 0` (unchecked).
    #[inline]
    pub fn output_power(&self, p_in: f64) -> f64 {
        let omega = self.omega();
        let psi = self.max_output_w * sigmoid(self.u_of(p_in));
        (psi - self.max_output_w * omega) / (1.0 - omega)
    }

    pub fn validate(&self) -> Result<()> {
        positive("eh.max_output_w", self.max_output_w)?;
        positive("eh.slope", self.slope)?;
        positive("eh.turning_point_w", self.turning_point_w)?;
        let omega = self.omega();
        if !(omega > 0.0 && omega < 1.0) {
            return Err(Error::param(
                "eh",
                format!("Ω = {omega} must lie strictly inside (0, 1); reduce slope * turning_point"),
            ));
        }
        Ok(())
    }
}

/// How received RF power turns into stored energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HarvestModel {
    Nonlinear(EhParams),
    Linear { efficiency: f64 },
}

impl HarvestModel {
    #[inline]
    pub fn output_power(&self, p_in: f64) -> f64 {
        match self {
            HarvestModel::Nonlinear(eh) => eh.output_power(p_in),
            HarvestModel::Linear { efficiency } => efficiency * p_in,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            HarvestModel::Nonlinear(eh) => eh.validate(),
            HarvestModel::Linear { efficiency } => {
                if *efficiency > 0.0 && *efficiency <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::param("efficiency", "must lie in (0, 1]"))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTerminal {
    pub position_m: Point2,
    pub demand_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: SystemParams,
    pub eh: EhParams,
    pub gts: Vec<GroundTerminal>,
}

impl Scenario {
    pub fn new(params: SystemParams, eh: EhParams, gts: Vec<GroundTerminal>) -> Result<Self> {
        let s = Scenario { params, eh, gts };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.eh.validate()?;
        if self.gts.is_empty() {
            return Err(Error::param("gts", "at least one ground terminal is required"));
        }
        for gt in &self.gts {
            if !gt.position_m.is_finite() {
                return Err(Error::param("gts.position_m", "must be finite"));
            }
            if !(gt.demand_bits >= 0.0) || !gt.demand_bits.is_finite() {
                return Err(Error::param("gts.demand_bits", "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn num_gts(&self) -> usize {
        self.gts.len()
    }

    pub fn nonlinear(&self) -> HarvestModel {
        HarvestModel::Nonlinear(self.eh)
    }

    pub fn max_demand(&self) -> f64 {
        self.gts.iter().map(|g| g.demand_bits).fold(0.0, f64::max)
    }

    pub fn total_demand(&self) -> f64 {
        self.gts.iter().map(|g| g.demand_bits).sum()
    }

    pub fn with_altitude(mut self, altitude_m: f64) -> Result<Self> {
        self.params.altitude_m = altitude_m;
        self.validate()?;
        Ok(self)
    }

    pub fn with_uniform_demand(mut self, bits: f64) -> Result<Self> {
        for gt in &mut self.gts {
            gt.demand_bits = bits;
        }
        self.validate()?;
        Ok(self)
    }
}

/// UAV-to-terminal distance for a UAV at horizontal position `q` flying at
/// `altitude` (> 0) and a terminal on the ground at `s`.
#[inline]
pub fn distance(q: Point2, s: Point2, altitude: f64) -> f64 {
    (q.dist_sq(s) + altitude * altitude).sqrt()
}

/// Sine of the elevation angle, `H / d`.
#[inline]
pub fn elevation_sine(q: Point2, s: Point2, altitude: f64) -> f64 {
    altitude / distance(q, s, altitude)
}

/// Outage-constrained uplink rate in bits/s.
pub fn rate(q: Point2, s: Point2, params: &SystemParams) -> f64 {
    let h = params.altitude_m;
    let d = distance(q, s, h);
    let factor = params.logistic.factor(h / d);
    let snr = factor * params.gamma() / d.powf(params.pathloss_exponent);
    params.bandwidth_hz * snr.ln_1p() / std::f64::consts::LN_2
}

/// RF power arriving at the terminal's harvesting circuit, in watts.
pub fn input_power(q: Point2, s: Point2, params: &SystemParams) -> f64 {
    let h = params.altitude_m;
    let d = distance(q, s, h);
    params.logistic.factor(h / d) * params.delta() / d.powf(params.pathloss_exponent)
}

/// Harvested power under the sigmoid circuit model. Rejects negative input.
pub fn harvested_power(p_in: f64, eh: &EhParams) -> Result<f64> {
    if !(p_in >= 0.0) {
        return Err(Error::param("p_in", format!("input power must be >= 0, got {p_in}")));
    }
    Ok(eh.output_power(p_in))
}

/// Energy harvested in one slot when a fraction `alpha0` is spent on WPT.
pub fn harvested_energy(alpha0: f64, p_in: f64, eh: &EhParams, tau: f64) -> f64 {
    tau * alpha0 * (eh.d1() * sigmoid(eh.u_of(p_in)) - eh.d2())
}

/// Energy a terminal spends uploading for a fraction `alpha` of one slot.
pub fn consumed_energy(alpha: f64, params: &SystemParams) -> f64 {
    params.slot_duration_s * params.gt_tx_power_w * alpha
}

/// Fixed-efficiency harvesting model used as a comparison baseline.
pub fn linear_harvested_energy(alpha0: f64, p_in: f64, efficiency: f64, tau: f64) -> f64 {
    tau * alpha0 * efficiency * p_in
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn overhead() -> (Point2, Point2) {
        (Point2::ORIGIN, Point2::ORIGIN)
    }

    #[test]
    fn distance_and_elevation() {
        let (q, s) = overhead();
        assert_eq!(distance(q, s, 20.0), 20.0);
        assert_eq!(elevation_sine(q, s, 20.0), 1.0);
        let q = Point2::new(30.0, 40.0);
        assert_relative_eq!(distance(q, s, 20.0), 2900f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(distance(q, s, 20.0), 53.852, epsilon = 1e-3);
        assert_relative_eq!(elevation_sine(q, s, 20.0), 0.37139, epsilon = 1e-5);
        let mut prev = 1.0;
        for k in 1..100 {
            let v = elevation_sine(Point2::new(k as f64 * 10.0, 0.0), s, 20.0);
            assert!(v < prev && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn reference_rate_and_power_overhead() {
        let p = SystemParams::reference();
        assert_relative_eq!(p.gamma(), 1.5136e7, max_relative = 1e-4);
        assert_relative_eq!(p.delta(), 1.0, max_relative = 1e-12);
        let (q, s) = overhead();
        let r = rate(q, s, &p);
        assert_relative_eq!(r, 1.498e7, max_relative = 1e-3);
        assert_eq!(r, rate(q, s, &p));
        let pin = input_power(q, s, &p);
        assert_relative_eq!(pin, 2.1308e-3, max_relative = 1e-4);
        let eh = EhParams::reference();
        assert_relative_eq!(harvested_power(pin, &eh).unwrap(), 7.64e-5, max_relative = 1e-3);
        assert_relative_eq!(harvested_energy(1.0, pin, &eh, 1.0), 7.64e-5, max_relative = 1e-3);
    }

    #[test]
    fn zero_gt_power_gives_zero_rate() {
        // γ = 0 is outside the validated domain, but the formula must degrade gracefully.
        let mut p = SystemParams::reference();
        p.gt_tx_power_w = 0.0;
        assert_eq!(rate(Point2::ORIGIN, Point2::ORIGIN, &p), 0.0);
        p.uav_tx_power_w = 0.0;
        assert_eq!(input_power(Point2::ORIGIN, Point2::ORIGIN, &p), 0.0);
    }

    #[test]
    fn input_power_inverse_square_at_fixed_logistic() {
        // Hold the logistic factor fixed and double the distance.
        let p = SystemParams::reference();
        let factor = p.logistic.factor(0.5);
        let at = |d: f64| factor * p.delta() / d.powf(p.pathloss_exponent);
        assert_relative_eq!(at(40.0) / at(20.0), 0.25, max_relative = 1e-14);
    }

    #[test]
    fn harvest_model_edges() {
        let eh = EhParams::reference();
        assert_eq!(harvested_power(0.0, &eh).unwrap(), 0.0);
        assert!(harvested_power(-1e-9, &eh).is_err());
        assert!((harvested_power(10.0, &eh).unwrap() - 0.02).abs() < 1e-15);
        assert_eq!(harvested_energy(0.0, 2e-3, &eh, 1.0), 0.0);
        let full = harvested_energy(1.0, 2.1308e-3, &eh, 1.0);
        assert_relative_eq!(harvested_energy(0.5, 2.1308e-3, &eh, 1.0), 0.5 * full, max_relative = 1e-15);
        // The ledger form and the normalized-sigmoid form agree.
        for k in 0..100 {
            let p = k as f64 * 1e-4;
            assert_relative_eq!(
                harvested_energy(1.0, p, &eh, 1.0),
                eh.output_power(p),
                max_relative = 1e-9,
                epsilon = 1e-18
            );
        }
    }

    #[test]
    fn consumed_and_linear_energy() {
        let p = SystemParams::reference();
        assert_eq!(consumed_energy(0.0, &p), 0.0);
        assert_relative_eq!(consumed_energy(1.0, &p), 0.1, max_relative = 1e-12);
        assert_relative_eq!(consumed_energy(0.25, &p), 0.025, max_relative = 1e-12);
        assert_relative_eq!(linear_harvested_energy(1.0, 2e-3, 0.5, 1.0), 1e-3, max_relative = 1e-15);
        assert_eq!(linear_harvested_energy(0.0, 2e-3, 0.5, 1.0), 0.0);
        let eh = EhParams::reference();
        let pin = 2.1308e-3;
        let lin = linear_harvested_energy(1.0, pin, 0.5, 1.0);
        let nonlin = harvested_energy(1.0, pin, &eh, 1.0);
        assert!((lin - nonlin).abs() > 1e-4 * lin);
    }

    #[test]
    fn harvest_monotone_and_bounded_on_grid() {
        let eh = EhParams::reference();
        let k = eh.max_output_w;
        let mut prev = 0.0;
        for i in 0..=10_000 {
            let p = i as f64 * 1e-4;
            let phi = eh.output_power(p);
            assert!(phi >= prev, "non-monotone at {p}");
            assert!((0.0..=k).contains(&phi));
            // Strictly below saturation wherever the logistic tail is representable.
            if eh.u_of(p) < 30.0 {
                assert!(phi < k);
            }
            prev = phi;
        }
        assert!(eh.output_power(0.0).abs() <= 1e-15);
    }

    #[test]
    fn validation_catches_bad_params() {
        let mut p = SystemParams::reference();
        p.logistic.c1 = 0.2;
        assert!(p.validate().is_err());
        p.logistic.c2 = 0.8;
        assert!(p.validate().is_ok());
        p.pathloss_exponent = 1.5;
        assert!(p.validate().is_err());
        let gts = vec![];
        assert!(Scenario::new(SystemParams::reference(), EhParams::reference(), gts).is_err());
    }

    #[test]
    fn db_round_trip() {
        for &x in &[1e-12, 3.7e-4, 0.5, 1.0, 42.0, 9.1e7] {
            assert_relative_eq!(db_to_linear(linear_to_db(x)), x, max_relative = 1e-12);
            assert_relative_eq!(dbm_to_watts(watts_to_dbm(x)), x, max_relative = 1e-12);
        }
        assert_relative_eq!(dbm_to_watts(20.0), 0.1, max_relative = 1e-12);
        assert_relative_eq!(dbm_to_watts(40.0), 10.0, max_relative = 1e-12);
    }
}
