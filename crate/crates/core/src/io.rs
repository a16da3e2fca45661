//! Scenario files, seeded scenario generation and run artifacts.
//!
//! Scenario documents are JSON. Powers accept a number in watts or a string
//! with a `W`, `mW`, `dBW` or `dBm` suffix; gains accept a linear number or
//! a string with a `dB` suffix. Unknown keys are rejected.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bsa::{PlanResult, Probe};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::model::{db_to_linear, dbm_to_watts, EhParams, GroundTerminal, Logistic, Scenario, SystemParams};
use crate::plan::{Plan, Schedule};
use crate::sco::ScoIteration;

pub const SCHEMA_VERSION: u32 = 1;

/// A number or a string with a unit suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

impl Quantity {
    fn split(s: &str) -> Option<(f64, String)> {
        let s = s.trim();
        let idx = s
            .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
            .unwrap_or(s.len());
        let v: f64 = s[..idx].trim().parse().ok()?;
        Some((v, s[idx..].trim().to_string()))
    }

    pub fn watts(&self, field: &str) -> Result<f64> {
        match self {
            Quantity::Number(v) => Ok(*v),
            Quantity::Text(s) => match Self::split(s) {
                Some((v, u)) if u == "W" => Ok(v),
                Some((v, u)) if u == "mW" => Ok(v * 1e-3),
                Some((v, u)) if u == "dBm" => Ok(dbm_to_watts(v)),
                Some((v, u)) if u == "dBW" => Ok(db_to_linear(v)),
                _ => Err(Error::Schema(format!("`{field}`: cannot read power {s:?} (expected W, mW, dBW or dBm)"))),
            },
        }
    }

    pub fn linear(&self, field: &str) -> Result<f64> {
        match self {
            Quantity::Number(v) => Ok(*v),
            Quantity::Text(s) => match Self::split(s) {
                Some((v, u)) if u == "dB" => Ok(db_to_linear(v)),
                Some((v, u)) if u.is_empty() => Ok(v),
                _ => Err(Error::Schema(format!("`{field}`: cannot read gain {s:?} (expected a number or dB)"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub bandwidth_hz: f64,
    pub noise_power: Quantity,
    pub snr_gap: Quantity,
    pub gt_tx_power: Quantity,
    pub uav_tx_power: Quantity,
    pub ref_channel_gain: Quantity,
    pub pathloss_exponent: f64,
    pub slot_duration_s: f64,
    pub altitude_m: f64,
    pub max_speed_mps: f64,
    pub initial_position_m: [f64; 2],
    pub logistic: LogisticFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outage_epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticFile {
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EhFile {
    /// Saturation output `K`.
    pub max_output: Quantity,
    pub beta1: f64,
    /// Turning point, a power.
    pub beta2: Quantity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtFile {
    pub position_m: [f64; 2],
    pub demand_bits: f64,
}

/// Terminals drawn uniformly from a rectangle centred on the initial
/// position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub count: usize,
    pub area_m: [f64; 2],
    pub seed: u64,
    pub demand_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub params: ParamsFile,
    pub eh: EhFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gts: Option<Vec<GtFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
}

impl ScenarioFile {
    /// Reference radio, flight and harvester parameters with a generator.
    pub fn reference(generator: GeneratorSpec) -> Self {
        ScenarioFile {
            version: SCHEMA_VERSION,
            params: ParamsFile {
                bandwidth_hz: 1e6,
                noise_power: Quantity::Text("-70 dBm".into()),
                snr_gap: Quantity::Text("8.2 dB".into()),
                gt_tx_power: Quantity::Text("20 dBm".into()),
                uav_tx_power: Quantity::Text("40 dBm".into()),
                ref_channel_gain: Quantity::Text("-10 dB".into()),
                pathloss_exponent: 2.0,
                slot_duration_s: 1.0,
                altitude_m: 20.0,
                max_speed_mps: 35.0,
                initial_position_m: [0.0, 0.0],
                logistic: LogisticFile {
                    b1: -4.3221,
                    b2: 6.075,
                    c1: 0.0,
                    c2: 1.0,
                },
                outage_epsilon: None,
            },
            eh: EhFile {
                max_output: Quantity::Text("0.02 W".into()),
                beta1: 6400.0,
                beta2: Quantity::Text("0.003 W".into()),
            },
            gts: None,
            generator: Some(generator),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if f.version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "`version`: unsupported schema version {} (expected {SCHEMA_VERSION})",
                f.version
            )));
        }
        Ok(f)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn build(&self) -> Result<Scenario> {
        let p = &self.params;
        let params = SystemParams {
            bandwidth_hz: p.bandwidth_hz,
            noise_power_w: p.noise_power.watts("params.noise_power")?,
            snr_gap_linear: p.snr_gap.linear("params.snr_gap")?,
            gt_tx_power_w: p.gt_tx_power.watts("params.gt_tx_power")?,
            uav_tx_power_w: p.uav_tx_power.watts("params.uav_tx_power")?,
            ref_channel_gain_linear: p.ref_channel_gain.linear("params.ref_channel_gain")?,
            pathloss_exponent: p.pathloss_exponent,
            slot_duration_s: p.slot_duration_s,
            altitude_m: p.altitude_m,
            max_speed_mps: p.max_speed_mps,
            initial_position_m: Point2::new(p.initial_position_m[0], p.initial_position_m[1]),
            logistic: Logistic {
                b1: p.logistic.b1,
                b2: p.logistic.b2,
                c1: p.logistic.c1,
                c2: p.logistic.c2,
            },
            outage_epsilon: p.outage_epsilon,
        };
        let eh = EhParams {
            max_output_w: self.eh.max_output.watts("eh.max_output")?,
            slope: self.eh.beta1,
            turning_point_w: self.eh.beta2.watts("eh.beta2")?,
        };
        let gts = match (&self.gts, &self.generator) {
            (Some(list), None) => list
                .iter()
                .map(|g| GroundTerminal {
                    position_m: Point2::new(g.position_m[0], g.position_m[1]),
                    demand_bits: g.demand_bits,
                })
                .collect(),
            (None, Some(spec)) => generate_gts(spec, params.initial_position_m)?,
            (Some(_), Some(_)) => return Err(Error::Schema("give either `gts` or `generator`, not both".into())),
            (None, None) => return Err(Error::Schema("missing `gts` or `generator`".into())),
        };
        Scenario::new(params, eh, gts)
    }
}

/// Deterministic terminal layout for a generator spec.
pub fn generate_gts(spec: &GeneratorSpec, center: Point2) -> Result<Vec<GroundTerminal>> {
    if spec.count == 0 {
        return Err(Error::Schema("`generator.count` must be at least 1".into()));
    }
    if !(spec.area_m[0] > 0.0 && spec.area_m[1] > 0.0) {
        return Err(Error::Schema("`generator.area_m` must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.count)
        .map(|_| {
            let x = (rng.random::<f64>() - 0.5) * spec.area_m[0];
            let y = (rng.random::<f64>() - 0.5) * spec.area_m[1];
            GroundTerminal {
                position_m: center + Point2::new(x, y),
                demand_bits: spec.demand_bits,
            }
        })
        .collect())
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioFile> {
    let text = fs::read_to_string(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    ScenarioFile::parse(&text).map_err(|e| match e {
        Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    load_scenario_file(path)?.build()
}

/// Fixed-width float text that round-trips exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Schema(format!("{what}: cannot parse {s:?} as a number")))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

/// `t,x,y,z`, one row per slot (1-based `t`).
pub fn write_trajectory_csv(path: &Path, plan: &Plan, altitude: f64) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "x", "y", "z"])?;
    for (t, q) in plan.trajectory.iter().enumerate() {
        w.write_record([(t + 1).to_string(), fmt_f64(q.x), fmt_f64(q.y), fmt_f64(altitude)])?;
    }
    w.flush()?;
    Ok(())
}

/// `t,alpha_0,…,alpha_M`, one row per slot.
pub fn write_schedule_csv(path: &Path, schedule: &Schedule) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..=schedule.num_gts()).map(|m| format!("alpha_{m}")));
    w.write_record(&header)?;
    for (t, row) in schedule.rows().enumerate() {
        let mut rec = vec![(t + 1).to_string()];
        rec.extend(row.iter().map(|&a| fmt_f64(a)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_plan(trajectory_csv: &Path, schedule_csv: &Path) -> Result<Plan> {
    let mut traj = Vec::new();
    let mut r = csv::Reader::from_path(trajectory_csv)?;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::Schema(format!("{}: expected t,x,y,z", trajectory_csv.display())));
        }
        traj.push(Point2::new(parse_f64(&rec[1], "x")?, parse_f64(&rec[2], "y")?));
    }
    let mut rows = Vec::new();
    let mut r = csv::Reader::from_path(schedule_csv)?;
    for rec in r.records() {
        let rec = rec?;
        rows.push(rec.iter().skip(1).map(|s| parse_f64(s, "alpha")).collect::<Result<Vec<f64>>>()?);
    }
    if rows.is_empty() {
        return Err(Error::Schema(format!("{}: no schedule rows", schedule_csv.display())));
    }
    Plan::new(traj, Schedule::from_rows(&rows)?)
}

pub fn write_probes_csv(path: &Path, probes: &[Probe]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "theta", "feasible", "iterations", "phase"])?;
    for p in probes {
        let phase = match p.phase {
            crate::bsa::ProbePhase::Bound => "bound",
            crate::bsa::ProbePhase::Search => "search",
        };
        w.write_record([
            p.t.to_string(),
            fmt_f64(p.theta),
            p.feasible.to_string(),
            p.iterations.to_string(),
            phase.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sco_trace_csv(path: &Path, trace: &[ScoIteration]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["iteration", "theta_gsp", "theta_utp", "theta", "max_violation", "newton_steps"])?;
    for it in trace {
        w.write_record([
            it.iteration.to_string(),
            fmt_f64(it.theta_gsp),
            fmt_f64(it.theta_utp),
            fmt_f64(it.theta),
            fmt_f64(it.max_violation),
            it.newton_steps.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct PlanSummary<'a> {
    algorithm: &'static str,
    completion_slots: usize,
    theta: f64,
    feasible: bool,
    verified: bool,
    nonlinear_replay_feasible: Option<bool>,
    probes: &'a [Probe],
}

/// Write every artifact of a planning run into `dir`: `trajectory.csv`,
/// `schedule.csv`, `report.json`, `probes.csv`, `sco_trace.csv` and
/// `summary.json` (plus `nonlinear_report.json` for cross-model plans).
pub fn write_run(dir: &Path, scenario: &Scenario, result: &PlanResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_trajectory_csv(&dir.join("trajectory.csv"), &result.plan, scenario.params.altitude_m)?;
    write_schedule_csv(&dir.join("schedule.csv"), &result.plan.schedule)?;
    write_json(&dir.join("report.json"), &result.report)?;
    if let Some(cross) = &result.cross_report {
        write_json(&dir.join("nonlinear_report.json"), cross)?;
    }
    write_probes_csv(&dir.join("probes.csv"), &result.probes)?;
    write_sco_trace_csv(&dir.join("sco_trace.csv"), &result.sco_trace)?;
    write_json(
        &dir.join("summary.json"),
        &PlanSummary {
            algorithm: result.algorithm.label(),
            completion_slots: result.completion_slots,
            theta: result.theta,
            feasible: result.feasible,
            verified: result.report.feasible,
            nonlinear_replay_feasible: result.cross_report.as_ref().map(|r| r.feasible),
            probes: &result.probes,
        },
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_text() -> String {
        ScenarioFile::reference(GeneratorSpec {
            count: 5,
            area_m: [200.0, 200.0],
            seed: 42,
            demand_bits: 40960.0,
        })
        .to_json()
        .unwrap()
    }

    #[test]
    fn units() {
        let q = |s: &str| Quantity::Text(s.into());
        assert!((q("20 dBm").watts("x").unwrap() - 0.1).abs() < 1e-15);
        assert!((q("40dBm").watts("x").unwrap() - 10.0).abs() < 1e-12);
        assert!((q("3 mW").watts("x").unwrap() - 0.003).abs() < 1e-15);
        assert!((q("-10 dB").linear("x").unwrap() - 0.1).abs() < 1e-15);
        assert!((q("8.2 dB").linear("x").unwrap() - 10f64.powf(0.82)).abs() < 1e-12);
        assert!((q("1e-3 W").watts("x").unwrap() - 1e-3).abs() < 1e-18);
        assert!(q("20 dB").watts("x").is_err());
        assert!(q("3 dBm").linear("x").is_err());
    }

    #[test]
    fn reference_matches_model_defaults() {
        let sc = ScenarioFile::parse(&reference_text()).unwrap().build().unwrap();
        let r = SystemParams::reference();
        assert!((sc.params.gt_tx_power_w - 0.1).abs() < 1e-15);
        assert!((sc.params.uav_tx_power_w - 10.0).abs() < 1e-12);
        assert!((sc.params.snr_gap_linear - r.snr_gap_linear).abs() < 1e-12);
        assert!((sc.params.ref_channel_gain_linear - 0.1).abs() < 1e-15);
        assert!((sc.params.noise_power_w - 1e-10).abs() < 1e-24);
        assert_eq!(sc.eh, EhParams::reference());
    }

    #[test]
    fn unknown_and_missing_keys() {
        let text = reference_text().replace("\"beta1\"", "\"beta_one\"");
        let e = ScenarioFile::parse(&text).unwrap_err().to_string();
        assert!(e.contains("beta_one") || e.contains("beta1"), "{e}");
        let mut v: serde_json::Value = serde_json::from_str(&reference_text()).unwrap();
        v["eh"].as_object_mut().unwrap().remove("beta1");
        let e = ScenarioFile::parse(&v.to_string()).unwrap_err().to_string();
        assert!(e.contains("beta1"), "{e}");
        let text = reference_text().replace("\"version\": 1", "\"version\": 9");
        assert!(ScenarioFile::parse(&text).is_err());
    }

    #[test]
    fn generator_is_deterministic() {
        let spec = GeneratorSpec {
            count: 50,
            area_m: [500.0, 500.0],
            seed: 7,
            demand_bits: 1.0,
        };
        let a = generate_gts(&spec, Point2::ORIGIN).unwrap();
        let b = generate_gts(&spec, Point2::ORIGIN).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|g| g.position_m.x.abs() <= 250.0 && g.position_m.y.abs() <= 250.0));
        let c = generate_gts(&GeneratorSpec { seed: 8, ..spec }, Point2::ORIGIN).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn plan_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let plan = Plan::new(
            vec![Point2::ORIGIN, Point2::new(1.0 / 3.0, -2e-7), Point2::ORIGIN],
            Schedule::from_rows(&[vec![0.1, 0.2], vec![1.0 / 7.0, 0.0], vec![0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let tp = dir.path().join("t.csv");
        let sp = dir.path().join("s.csv");
        write_trajectory_csv(&tp, &plan, 20.0).unwrap();
        write_schedule_csv(&sp, &plan.schedule).unwrap();
        assert_eq!(read_plan(&tp, &sp).unwrap(), plan);
        let head = fs::read_to_string(&sp).unwrap();
        assert!(head.starts_with("t,alpha_0,alpha_1\n"));
    }
}
