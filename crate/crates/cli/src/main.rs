use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use serde_json::json;

use spn_core::eval::{
    export_traces, parse_lidar_label, run_episode, run_eval, sweep, EvalOptions, EvalPolicy, TRACE_INTERVAL,
};
use spn_core::sac::config::Precision;
use spn_core::sac::{TrainConfig, Trainer};
use spn_core::sensing::LidarConfig;
use spn_core::world::{sample_task, EvalTask, Scenario};
use spn_core::{Actor64, Scalar};

#[derive(Parser)]
#[command(name = "spn", version, about = "Support-point navigation: train, evaluate and visualize LiDAR policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an actor and critics with SAC.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Continue from the checkpoint in --out.
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate an actor on seeded random tasks.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "360|0.33|5|0")]
        lidar: String,
        #[arg(long, default_value_t = 100)]
        tasks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also export support-point traces into this directory.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Evaluate every sensor label on every scenario in a directory.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated sensor labels.
        #[arg(long)]
        lidars: String,
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long, default_value_t = 100)]
        tasks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run one episode and export its trajectory and support points.
    Viz {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Goal position `X,Y`.
        #[arg(long, allow_hyphen_values = true)]
        goal: String,
        /// Start pose `X,Y,THETA`; sampled from --seed when omitted.
        #[arg(long, allow_hyphen_values = true)]
        start: Option<String>,
        #[arg(long, default_value = "360|0.33|5|0")]
        lidar: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = TRACE_INTERVAL)]
        interval: usize,
        #[arg(long)]
        trace_out: PathBuf,
    },
    /// Run the brute-force oracle suites.
    OracleCheck,
}

/// Failure attributed to a command-line flag where possible.
struct CliError {
    flag: Option<&'static str>,
    message: String,
}

impl CliError {
    fn flag(flag: &'static str, e: impl std::fmt::Display) -> Self {
        Self { flag: Some(flag), message: e.to_string() }
    }

    fn other(e: impl std::fmt::Display) -> Self {
        Self { flag: None, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

fn require_file(flag: &'static str, path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::flag(flag, format!("{} does not exist or is not a file", path.display())))
    }
}

fn load_actor(path: &Path) -> CliResult<Actor64> {
    require_file("--model", path)?;
    let file = fs::File::open(path).map_err(|e| CliError::flag("--model", format!("{}: {e}", path.display())))?;
    Actor64::load(std::io::BufReader::new(file)).map_err(|e| CliError::flag("--model", format!("{}: {e}", path.display())))
}

fn load_scenario(flag: &'static str, path: &Path) -> CliResult<Scenario> {
    require_file(flag, path)?;
    Scenario::load(path).map_err(|e| CliError::flag(flag, format!("{}: {e}", path.display())))
}

fn load_scenarios(flag: &'static str, paths: &[PathBuf]) -> CliResult<Vec<Scenario>> {
    paths.iter().map(|p| load_scenario(flag, p)).collect()
}

fn parse_floats<const N: usize>(flag: &'static str, text: &str) -> CliResult<[f64; N]> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::flag(flag, format!("{text:?}: {e}")))?;
    vals.try_into().map_err(|_| CliError::flag(flag, format!("{text:?}: expected {N} comma-separated numbers")))
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize, flag: &'static str) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(CliError::other)?;
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::flag(flag, format!("{}: {e}", dir.display())))?;
            }
            fs::write(p, text + "\n").map_err(|e| CliError::flag(flag, format!("{}: {e}", p.display())))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn train<T: Scalar>(config: TrainConfig, seed: u64, out: &Path, resume: bool) -> CliResult<()> {
    let scenarios = load_scenarios("--config", &config.scenarios)?;
    let heldout = load_scenarios("--config", &config.heldout)?;
    let trainer = if resume {
        Trainer::<T>::resume(config, scenarios, heldout, out)
    } else {
        Trainer::<T>::new(config, scenarios, heldout, seed)
    };
    let mut trainer = trainer.map_err(CliError::other)?.with_output(out).map_err(|e| CliError::flag("--out", e))?;
    trainer.run().map_err(CliError::other)?;
    let summary = json!({
        "steps": trainer.step(),
        "episodes": trainer.episodes(),
        "updates": trainer.agent.updates,
        "actor": out.join("actor.spnw"),
        "metrics": out.join("metrics.jsonl"),
    });
    println!("{summary}");
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train { config, seed, out, resume } => {
            require_file("--config", &config)?;
            let cfg = TrainConfig::load(&config).map_err(|e| CliError::flag("--config", e))?;
            match cfg.precision {
                Precision::F32 => train::<f32>(cfg, seed, &out, resume),
                Precision::F64 => train::<f64>(cfg, seed, &out, resume),
            }
        }
        Command::Eval { model, scenario, lidar, tasks, seed, report, trace_out } => {
            let actor = load_actor(&model)?;
            let scenario = load_scenario("--scenario", &scenario)?;
            let lidar = parse_lidar_label(&lidar).map_err(|e| CliError::flag("--lidar", e))?;
            let options = EvalOptions { trace_interval: trace_out.as_ref().map(|_| TRACE_INTERVAL) };
            let run = run_eval(&actor, &scenario, &lidar, tasks, seed, options).map_err(CliError::other)?;
            if let Some(dir) = &trace_out {
                let traces: Vec<_> = run.episodes.iter().filter_map(|e| e.trace.clone()).collect();
                if !traces.is_empty() {
                    export_traces(&traces, &scenario, dir).map_err(|e| CliError::flag("--trace-out", e))?;
                }
            }
            write_json(report.as_deref(), &run.report, "--report")
        }
        Command::Sweep { model, lidars, scenarios, tasks, seed, report } => {
            let actor = load_actor(&model)?;
            let labels: Vec<LidarConfig> = lidars
                .split(',')
                .map(|l| parse_lidar_label(l.trim()))
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::flag("--lidars", e))?;
            if !scenarios.is_dir() {
                return Err(CliError::flag("--scenarios", format!("{} is not a directory", scenarios.display())));
            }
            let mut files: Vec<PathBuf> = fs::read_dir(&scenarios)
                .map_err(|e| CliError::flag("--scenarios", e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(CliError::flag("--scenarios", format!("no .json scenarios in {}", scenarios.display())));
            }
            let worlds = load_scenarios("--scenarios", &files)?;
            let rep = sweep(&actor, &labels, &worlds, tasks, seed).map_err(CliError::other)?;
            write_json(report.as_deref(), &rep, "--report")
        }
        Command::Viz { model, scenario, goal, start, lidar, seed, interval, trace_out } => {
            let actor = load_actor(&model)?;
            let scenario = load_scenario("--scenario", &scenario)?;
            let lidar = parse_lidar_label(&lidar).map_err(|e| CliError::flag("--lidar", e))?;
            let goal = parse_floats::<2>("--goal", &goal)?;
            let start = match start {
                Some(s) => parse_floats::<3>("--start", &s)?,
                None => {
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                    let (robot, _) = sample_task(&scenario, &mut rng).map_err(CliError::other)?;
                    [robot.pose.x, robot.pose.y, robot.pose.theta]
                }
            };
            let task = EvalTask { start, goal };
            let builder = spn_core::eval::runner::observation_builder(&actor, &lidar).map_err(CliError::other)?;
            let options = EvalOptions { trace_interval: Some(interval.max(1)) };
            let rec = run_episode(&actor, &scenario, &builder, 0, &task, options).map_err(CliError::other)?;
            let trace = rec.trace.ok_or_else(|| {
                CliError::flag("--model", format!("{} has no support points to trace", actor.model_kind()))
            })?;
            let files = export_traces(&[trace], &scenario, &trace_out).map_err(|e| CliError::flag("--trace-out", e))?;
            println!("{}", json!({ "status": format!("{:?}", rec.status), "steps": rec.steps, "score": rec.score, "files": files }));
            Ok(())
        }
        Command::OracleCheck => {
            let results = spn_core::oracle::run_all();
            let mut failed = 0;
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                failed += usize::from(!r.passed);
            }
            if failed > 0 {
                return Err(CliError::other(format!("{failed} oracle suite(s) failed")));
            }
            Ok(())
        }
    }
}

/// Reports argument errors in the same one-line JSON form as runtime errors.
fn parse_args() -> Result<Cli, ExitCode> {
    use clap::error::{ContextKind, ContextValue, ErrorKind};
    Cli::try_parse().map_err(|e| {
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
            let _ = e.print();
            return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
        let flag = match e.get(ContextKind::InvalidArg) {
            Some(ContextValue::String(s)) => Some(s.clone()),
            Some(ContextValue::Strings(v)) => v.first().cloned(),
            _ => None,
        }
        .map(|f| f.split_whitespace().next().unwrap_or("").to_string());
        let message = e.kind().to_string();
        let line = match flag {
            Some(flag) => json!({ "error": message, "flag": flag }),
            None => json!({ "error": e.to_string().lines().next().unwrap_or("invalid arguments") }),
        };
        eprintln!("{line}");
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match parse_args() {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = match e.flag {
                Some(flag) => json!({ "error": e.message, "flag": flag }),
                None => json!({ "error": e.message }),
            };
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
