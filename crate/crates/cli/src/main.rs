use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use uavwpt_core::baselines::{plan, plan_within};
use uavwpt_core::bsa::{default_bounds, Algorithm, BsaOptions, PlanResult};
use uavwpt_core::io::{load_scenario, load_scenario_file, read_plan, write_json, write_run, GeneratorSpec, ScenarioFile};
use uavwpt_core::sco::ScoOptions;
use uavwpt_core::sweep::{
    parse_values, run_sweep, threads_from_env, write_sweep_csv, write_timings_csv, SweepConfig, SweepKind, BITS_PER_KB,
};
use uavwpt_core::verify::simulate_plan;
use uavwpt_core::Error;

const EXIT_INFEASIBLE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "uavwpt", version, about = "Mission-time planner for a UAV that powers ground terminals and collects their data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a mission and write its artifacts.
    Plan(PlanArgs),
    /// Replay a written plan against the exact models.
    Verify(VerifyArgs),
    /// Write a scenario file with the reference parameters.
    Init(InitArgs),
    /// Sweep one scenario parameter and tabulate completion times.
    Benchmark(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgArg {
    Proposed,
    Gsa,
    Cha,
    LinearEh,
}

impl AlgArg {
    fn with_efficiency(self, efficiency: f64) -> Algorithm {
        match self {
            AlgArg::Proposed => Algorithm::Proposed,
            AlgArg::Gsa => Algorithm::Gsa,
            AlgArg::Cha => Algorithm::Cha,
            AlgArg::LinearEh => Algorithm::LinearEh { efficiency },
        }
    }
}

#[derive(Args)]
struct SearchArgs {
    /// Seed of the tour heuristic.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Conversion efficiency of the linear harvester.
    #[arg(long, default_value_t = 0.5)]
    efficiency: f64,
    /// Lower end of the horizon search, in slots.
    #[arg(long)]
    tmin: Option<usize>,
    /// Upper end of the horizon search, in slots.
    #[arg(long)]
    tmax: Option<usize>,
    /// Stop the alternating optimization below this decrease, in bits.
    #[arg(long, default_value_t = 1.0)]
    threshold_bits: f64,
    #[arg(long, default_value_t = 50)]
    max_iterations: usize,
}

impl SearchArgs {
    fn sco(&self) -> ScoOptions {
        ScoOptions {
            theta_threshold_bits: self.threshold_bits,
            max_iterations: self.max_iterations,
            ..ScoOptions::default()
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum, default_value = "proposed")]
    algorithm: AlgArg,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Print the horizon search and optimizer traces.
    #[arg(long)]
    trace: bool,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Directory holding `trajectory.csv` and `schedule.csv`.
    #[arg(long)]
    plan: PathBuf,
    /// Write the report here as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InitArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    gts: usize,
    /// Side of the square deployment area, metres.
    #[arg(long, default_value_t = 200.0)]
    area: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Demand per terminal, in KB.
    #[arg(long, default_value_t = 5.0)]
    data_kb: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// Base scenario; a 5-terminal reference layout when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Swept quantity and its values, e.g. `--sweep gts 5..10` or
    /// `--sweep altitude 10,20,30,40`.
    #[arg(long, num_args = 2, value_names = ["KIND", "VALUES"], required = true)]
    sweep: Vec<String>,
    /// Algorithms to run; all but linear-eh when omitted.
    #[arg(long, value_enum, value_delimiter = ',')]
    algorithm: Vec<AlgArg>,
    /// Output directory for `sweep.csv` and `timings.csv`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: bool,
    #[command(flatten)]
    search: SearchArgs,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Solver(_) => EXIT_SOLVER,
        Error::Unbounded { .. } | Error::HorizonTooShort { .. } => EXIT_INFEASIBLE,
        _ => EXIT_INPUT,
    }
}

fn bounds(scenario: &uavwpt_core::Scenario, args: &SearchArgs) -> Result<Option<BsaOptions>, Error> {
    if args.tmin.is_none() && args.tmax.is_none() {
        return Ok(None);
    }
    let t_max = match args.tmax {
        Some(t) => t,
        None => default_bounds(scenario, &args.sco(), args.seed)?.t_max,
    };
    Ok(Some(BsaOptions {
        t_min: args.tmin.unwrap_or(2),
        t_max,
        sco: args.sco(),
        seed: args.seed,
    }))
}

fn print_trace(r: &PlanResult) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "probe  phase   T  theta_bits  iterations  feasible");
    for (i, p) in r.probes.iter().enumerate() {
        let _ = writeln!(
            err,
            "{i:>5}  {:<6} {:>3}  {:>10.3e}  {:>10}  {}",
            format!("{:?}", p.phase).to_lowercase(),
            p.t,
            p.theta,
            p.iterations,
            p.feasible
        );
    }
    if !r.sco_trace.is_empty() {
        let _ = writeln!(err, "iter  theta_gsp   theta_utp   theta       max_viol   newton");
        for it in &r.sco_trace {
            let _ = writeln!(
                err,
                "{:>4}  {:>10.3e}  {:>10.3e}  {:>10.3e}  {:>9.2e}  {:>6}",
                it.iteration, it.theta_gsp, it.theta_utp, it.theta, it.max_violation, it.newton_steps
            );
        }
    }
}

fn cmd_plan(args: &PlanArgs) -> Result<u8, Error> {
    let scenario = load_scenario(&args.scenario)?;
    let algorithm = args.algorithm.with_efficiency(args.search.efficiency);
    let result = match bounds(&scenario, &args.search)? {
        Some(opts) => plan_within(&scenario, algorithm, &opts)?,
        None => plan(&scenario, algorithm, &args.search.sco(), args.search.seed)?,
    };
    write_run(&args.out, &scenario, &result)?;
    if args.trace {
        print_trace(&result);
    }
    let ok = result.feasible && result.report.feasible;
    println!(
        "{}: T = {} slots, theta = {:.6e} bits, {} ({} probes)",
        algorithm.label(),
        result.completion_slots,
        result.theta,
        if ok { "verified" } else { "infeasible" },
        result.probes.len()
    );
    if let Some(cross) = &result.cross_report {
        println!("replay under the nonlinear harvester: {}", if cross.feasible { "feasible" } else { "infeasible" });
    }
    Ok(if ok { 0 } else { EXIT_INFEASIBLE })
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8, Error> {
    let scenario = load_scenario(&args.scenario)?;
    let plan = read_plan(&args.plan.join("trajectory.csv"), &args.plan.join("schedule.csv"))?;
    let report = simulate_plan(&scenario, &plan)?;
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    for v in &report.violations {
        println!("violation: {v}");
    }
    println!(
        "T = {} slots, min stored energy {:.3e} J, worst data shortfall {:.3e} bits: {}",
        report.horizon,
        report.min_remaining_j,
        report.max_data_shortfall_bits,
        if report.feasible { "feasible" } else { "infeasible" }
    );
    Ok(if report.feasible { 0 } else { EXIT_INFEASIBLE })
}

fn cmd_init(args: &InitArgs) -> Result<u8, Error> {
    let file = ScenarioFile::reference(GeneratorSpec {
        count: args.gts,
        area_m: [args.area, args.area],
        seed: args.seed,
        demand_bits: args.data_kb * BITS_PER_KB,
    });
    file.build()?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&args.out, file.to_json()?)?;
    info!("wrote {}", args.out.display());
    Ok(0)
}

fn default_base(seed: u64) -> ScenarioFile {
    ScenarioFile::reference(GeneratorSpec {
        count: 5,
        area_m: [200.0, 200.0],
        seed,
        demand_bits: 5.0 * BITS_PER_KB,
    })
}

fn cmd_benchmark(args: &BenchArgs) -> Result<u8, Error> {
    let kind: SweepKind = args.sweep[0].parse()?;
    let values = parse_values(&args.sweep[1])?;
    let base = match &args.scenario {
        Some(p) => load_scenario_file(p)?,
        None => default_base(args.search.seed),
    };
    let algs = if args.algorithm.is_empty() {
        vec![AlgArg::Proposed, AlgArg::Gsa, AlgArg::Cha]
    } else {
        args.algorithm.clone()
    };
    let bounds = match (args.search.tmin, args.search.tmax) {
        (None, None) => None,
        (lo, Some(hi)) => Some((lo.unwrap_or(2), hi)),
        (Some(_), None) => {
            return Err(Error::InvalidParameter {
                name: "tmax",
                reason: "sweeps need --tmax whenever --tmin is given".into(),
            })
        }
    };
    let cfg = SweepConfig {
        kind,
        values,
        algorithms: algs.iter().map(|a| a.with_efficiency(args.search.efficiency)).collect(),
        sco: args.search.sco(),
        seed: args.search.seed,
        bounds,
    };
    std::fs::create_dir_all(&args.out)?;
    let rows = run_sweep(&base, &cfg, threads_from_env())?;
    write_sweep_csv(&args.out.join("sweep.csv"), kind, &rows)?;
    write_timings_csv(&args.out.join("timings.csv"), kind, &rows)?;
    let mut code = 0;
    for r in &rows {
        let t = r.completion_slots.map_or("-".to_string(), |t| t.to_string());
        if args.trace || r.error.is_some() {
            eprintln!(
                "{kind}={} {}: T={t} iterations={} probes={} {:.2}s{}",
                r.value,
                r.algorithm.label(),
                r.iterations,
                r.probes,
                r.wall_s,
                r.error.as_deref().map(|e| format!(" error: {e}")).unwrap_or_default()
            );
        }
        if r.error.is_some() {
            code = EXIT_SOLVER;
        }
    }
    println!("{} rows written to {}", rows.len(), args.out.join("sweep.csv").display());
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Init(a) => cmd_init(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
