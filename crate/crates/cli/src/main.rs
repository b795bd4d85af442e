//! Command-line front end: `analyze` prints the closed-form report,
//! `simulate` runs one play and emits a trace, `sweep` compares analytic and
//! simulated verdicts along one axis, `verify` runs the randomized property
//! suite.
//!
//! Exit codes are scriptable: 0 defenders hold (or success), 1 attacker
//! wins, 2 invalid input, 3 verification failure.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use perimeter_core::analytic::{self, AnalyticReport};
use perimeter_core::engine::{self, SimSettings, Verdict};
use perimeter_core::geometry::Direction;
use perimeter_core::model::{AttackerStrategy, CaseKind, ScenarioFile, ScenarioParams};
use perimeter_core::sweep::{run_sweep, SweepAxis, SweepSpec};
use perimeter_core::verify::{self, VerifyConfig};

const EXIT_HOLD: u8 = 0;
const EXIT_ATTACKER_WINS: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_VERIFY_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "perimeter",
    version,
    about = "Closed-form calculator and exact simulator for a multi-defender perimeter defense game on a ring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the closed-form report for a scenario.
    Analyze(AnalyzeArgs),
    /// Simulate one play and emit the event trace as CSV.
    Simulate(SimulateArgs),
    /// Sweep one parameter and compare analytic and simulated verdicts.
    Sweep(SweepArgs),
    /// Run the randomized property suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (JSON); flags override its fields.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    circumference: Option<f64>,
    #[arg(long)]
    defenders: Option<u32>,
    #[arg(long)]
    defense_length: Option<f64>,
    #[arg(long)]
    defender_speed: Option<f64>,
    #[arg(long)]
    attacker_speed: Option<f64>,
}

struct Scenario {
    params: ScenarioParams,
    file: Option<ScenarioFile>,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<Scenario, String> {
        let file = match &self.scenario {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                Some(
                    ScenarioFile::from_json(&text)
                        .map_err(|e| format!("invalid scenario {}: {e}", path.display()))?,
                )
            }
            None => None,
        };
        let mut missing = Vec::new();
        let mut pick = |flag: Option<f64>, from_file: Option<f64>, name: &'static str| match flag
            .or(from_file)
        {
            Some(v) => v,
            None => {
                missing.push(name);
                f64::NAN
            }
        };
        let base = file.as_ref();
        let circumference = pick(self.circumference, base.map(|f| f.circumference), "--circumference");
        let defense_length = pick(self.defense_length, base.map(|f| f.defense_length), "--defense-length");
        let defender_speed = pick(self.defender_speed, base.map(|f| f.defender_speed), "--defender-speed");
        let attacker_speed = pick(self.attacker_speed, base.map(|f| f.attacker_speed), "--attacker-speed");
        let defender_count = match self.defenders.or(base.map(|f| f.defender_count)) {
            Some(n) => n,
            None => {
                missing.push("--defenders");
                0
            }
        };
        if !missing.is_empty() {
            return Err(format!("missing scenario fields: {}", missing.join(", ")));
        }
        let params = ScenarioParams::new(
            circumference,
            defender_count,
            defense_length,
            defender_speed,
            attacker_speed,
        );
        params.ensure_valid().map_err(|e| e.to_string())?;
        Ok(Scenario { params, file })
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Emit the report as JSON instead of the table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Initial configuration: attacker at a touch point (case1) or at the
    /// blocker's midpoint (case2).
    #[arg(long, value_parser = parse_case)]
    config: Option<CaseKind>,
    /// Attacker's initial direction: +1 or -1.
    #[arg(long, value_parser = parse_direction, allow_hyphen_values = true)]
    attacker_dir: Option<Direction>,
    /// Attacker switch times, comma separated.
    #[arg(long, value_delimiter = ',')]
    switch_times: Option<Vec<f64>>,
    /// Horizon as a multiple of C / (attacker speed - defender speed).
    #[arg(long, default_value_t = 10.0)]
    horizon_mult: f64,
    /// Write the trace CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Axis to sweep: circumference, defender_count, defense_length,
    /// defender_speed, attacker_speed or speed_ratio.
    #[arg(long)]
    axis: SweepAxis,
    /// Swept values, comma separated, in axis order.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Vec<f64>,
    /// Largest number of attacker switches searched per point.
    #[arg(long, default_value_t = 2)]
    max_switches: u32,
    /// Switch-time grid step for the brute-force attacker (default: an
    /// automatic 1/20th of the search horizon).
    #[arg(long)]
    grid: Option<f64>,
    /// Search horizon as a multiple of C / (attacker speed - defender speed).
    #[arg(long, default_value_t = 4.0)]
    horizon_mult: f64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Seed for the deterministic draw sequence.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of random scenario draws.
    #[arg(long, default_value_t = 100)]
    count: u32,
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    match s {
        "+1" | "1" => Ok(Direction::Positive),
        "-1" => Ok(Direction::Negative),
        other => Err(format!("direction must be +1 or -1, got {other:?}")),
    }
}

fn parse_case(s: &str) -> Result<CaseKind, String> {
    match s {
        "case1" => Ok(CaseKind::Case1),
        "case2" => Ok(CaseKind::Case2),
        other => Err(format!("config must be case1 or case2, got {other:?}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Analyze(args) => analyze(&args),
        Command::Simulate(args) => simulate(&args),
        Command::Sweep(args) => sweep(&args),
        Command::Verify(args) => verify_cmd(&args),
    };
    match code {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn analyze(args: &AnalyzeArgs) -> Result<u8, String> {
    let scenario = args.scenario.resolve()?;
    let p = scenario.params;
    let report = AnalyticReport::for_params(&p).map_err(|e| e.to_string())?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?);
    } else {
        print_report(&p, &report);
    }
    Ok(if report.attacker_wins { EXIT_ATTACKER_WINS } else { EXIT_HOLD })
}

fn print_report(p: &ScenarioParams, r: &AnalyticReport) {
    println!("circumference          {}", p.circumference);
    println!("defenders              {}", p.defender_count);
    println!("defense length         {}", p.defense_length);
    println!("defender speed         {}", p.defender_speed);
    println!("attacker speed         {}", p.attacker_speed);
    println!();
    println!("gamma                  {}", r.gamma);
    println!("optimal gap            {}", r.optimal_gap);
    println!("max circumference      {}", r.max_circumference);
    println!("margin                 {}", r.margin);
    println!(
        "verdict                {}",
        if r.attacker_wins { "attacker wins" } else { "defenders hold" }
    );
    println!("min defenders          {}", r.min_defenders);
    println!("max defense length     {}", r.max_defense_length_threshold);
    match r.critical_speed_ratio {
        Some(ratio) => println!("critical speed ratio   {ratio}"),
        None => println!("critical speed ratio   none (covered by count)"),
    }
    println!("case transition time   {}", r.case_transition_time);
    if r.full_coverage {
        println!("note                   defended intervals cover the whole ring");
    }
}

fn simulate(args: &SimulateArgs) -> Result<u8, String> {
    let scenario = args.scenario.resolve()?;
    let p = scenario.params;

    // total coverage admits no disjoint starting layout; the verdict is fixed
    if p.defender_count as f64 * p.defense_length > p.circumference {
        eprintln!("note: full coverage; no play is possible and none is needed");
        println!("VERDICT defended t=0 pos=-");
        return Ok(EXIT_HOLD);
    }

    let case = args
        .config
        .or(scenario.file.as_ref().and_then(|f| f.initial_config))
        .unwrap_or(CaseKind::Case1);
    let config = match case {
        CaseKind::Case1 => analytic::case1_config(&p),
        CaseKind::Case2 => analytic::case2_config(&p),
    }
    .map_err(|e| e.to_string())?;
    if config.exceeds_max {
        eprintln!("note: circumference exceeds the defensible maximum; expect a breach");
    }

    let strategy = match (&args.attacker_dir, &args.switch_times) {
        (None, None) => match scenario.file.as_ref().and_then(|f| f.attacker_strategy.clone()) {
            Some(spec) => spec.build().map_err(|e| e.to_string())?,
            None => AttackerStrategy::constant(Direction::Positive),
        },
        (dir, times) => AttackerStrategy::new(
            dir.unwrap_or(Direction::Positive),
            times.clone().unwrap_or_default(),
        )
        .map_err(|e| e.to_string())?,
    };

    let settings = SimSettings {
        horizon: args.horizon_mult * p.circumference / (p.attacker_speed - p.defender_speed),
        ..SimSettings::for_params(&p)
    };
    let outcome =
        engine::simulate(&p, &config.state, &strategy, &settings).map_err(|e| e.to_string())?;

    match &args.out {
        Some(path) => {
            let mut file = fs::File::create(path)
                .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            engine::write_trace_csv(&mut file, &p, &outcome).map_err(|e| e.to_string())?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            engine::write_trace_csv(&mut lock, &p, &outcome).map_err(|e| e.to_string())?;
            lock.flush().map_err(|e| e.to_string())?;
        }
    }

    match outcome.verdict {
        Verdict::Breach { time, position } => {
            println!("VERDICT breach t={time} pos={position}");
            Ok(EXIT_ATTACKER_WINS)
        }
        Verdict::Defended { time, .. } => {
            println!("VERDICT defended t={time} pos=-");
            Ok(EXIT_HOLD)
        }
    }
}

fn sweep(args: &SweepArgs) -> Result<u8, String> {
    let scenario = args.scenario.resolve()?;
    let spec = SweepSpec::with_auto_oracle(
        scenario.params,
        args.axis,
        args.values.clone(),
        args.max_switches,
        args.grid,
        args.horizon_mult,
    )
    .map_err(|e| e.to_string())?;
    let table = run_sweep(&spec).map_err(|e| e.to_string())?;
    match &args.out {
        Some(path) => {
            let mut file = fs::File::create(path)
                .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            table.write_csv(&mut file).map_err(|e| e.to_string())?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            table.write_csv(&mut lock).map_err(|e| e.to_string())?;
            lock.flush().map_err(|e| e.to_string())?;
        }
    }
    Ok(EXIT_HOLD)
}

fn verify_cmd(args: &VerifyArgs) -> Result<u8, String> {
    if args.count == 0 {
        return Err("--count must be at least 1".to_string());
    }
    let report = verify::run(&VerifyConfig { seed: args.seed, count: args.count });
    println!("{:<34} {:>7} {:>7}", "property", "pass", "fail");
    for prop in &report.properties {
        println!(
            "{:<34} {:>7} {:>7}",
            prop.name,
            prop.passes,
            prop.failures.len()
        );
        for failure in &prop.failures {
            println!("    {failure}");
        }
    }
    if report.ok() {
        println!(
            "VERIFY ok ({} properties, {} draws, seed {})",
            report.properties.len(),
            report.count,
            report.seed
        );
        Ok(EXIT_HOLD)
    } else {
        println!(
            "VERIFY failed ({} draws, seed {})",
            report.count, report.seed
        );
        Ok(EXIT_VERIFY_FAILED)
    }
}
