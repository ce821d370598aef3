use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toponav_harness::ablation::{run_ablation, write_ablation_csv, Sweep};
use toponav_harness::error::{Error, Result};
use toponav_harness::plot::write_run_plots;
use toponav_harness::report::{load_log, save_log, write_metrics_csv};
use toponav_harness::run::{run_closed_loop, run_open_loop};
use toponav_harness::{Goal, Method, Scenario};

#[derive(Parser)]
#[command(name = "toponav", version, about = "Localization and navigation experiments on topometric maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Open-loop localization along the scenario route; writes logs, metrics and plots.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Restrict to one method (default: the scenario's list).
        #[arg(long)]
        method: Option<Method>,
    },
    /// Closed-loop navigation to a goal.
    Nav {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        goal: GoalArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        method: Option<Method>,
        /// Also write run logs and plots here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep map noise or landmark corruption; prints CSV.
    Ablate {
        #[arg(long)]
        scenario: PathBuf,
        /// noise=0,0.1,0.2 | fn=0..0.8 | fp=0..0.8:0.2
        #[arg(long)]
        sweep: Sweep,
        /// Runs seeds 0..K.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Comma-separated methods (default: the scenario's list).
        #[arg(long, value_delimiter = ',')]
        methods: Vec<Method>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run cells one at a time instead of in parallel.
        #[arg(long)]
        serial: bool,
    },
    /// Recompute the metrics table from saved run logs.
    Metrics {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(multiple = false)]
struct GoalArgs {
    /// Map point "x,y".
    #[arg(long)]
    goal: Option<String>,
    #[arg(long)]
    goal_node: Option<u32>,
    /// Free-text landmark query.
    #[arg(long)]
    goal_text: Option<String>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn methods_for(scenario: &Scenario, pick: Option<Method>) -> Vec<Method> {
    pick.map_or_else(|| scenario.file.methods.clone(), |m| vec![m])
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            out,
            method,
        } => {
            let sc = Scenario::load(&scenario)?;
            create_dir(&out)?;
            let mut logs = Vec::new();
            for m in methods_for(&sc, method) {
                let log = run_open_loop(&sc, m, seed)?;
                save_log(&log, &out.join(format!("{m}.log.json")))?;
                logs.push(log);
            }
            let csv_path = out.join("metrics.csv");
            write_metrics_csv(&logs, output(Some(&csv_path))?)?;
            write_run_plots(&logs, &out)?;
            write_metrics_csv(&logs, io::stdout().lock())?;
        }
        Command::Nav {
            scenario,
            goal,
            seed,
            method,
            out,
        } => {
            let sc = Scenario::load(&scenario)?;
            let goal = match (goal.goal, goal.goal_node, goal.goal_text) {
                (Some(p), _, _) => Goal::parse_point(&p)?,
                (_, Some(id), _) => Goal::Node { id },
                (_, _, Some(query)) => Goal::Text { query },
                _ => sc
                    .file
                    .goal
                    .clone()
                    .ok_or_else(|| Error::config("no goal given and the scenario has none"))?,
            };
            let mut logs = Vec::new();
            let mut failed = false;
            for m in methods_for(&sc, method) {
                let (result, log) = run_closed_loop(&sc, m, seed, &goal)?;
                failed |= result.error.is_some();
                println!("{}", serde_json::to_string(&result).map_err(|e| Error::config(e.to_string()))?);
                logs.push(log);
            }
            if let Some(dir) = out {
                create_dir(&dir)?;
                for log in &logs {
                    save_log(log, &dir.join(format!("{}.log.json", log.method)))?;
                }
                write_run_plots(&logs, &dir)?;
            }
            if failed {
                return Err(Error::Core(toponav::Error::Unreachable));
            }
        }
        Command::Ablate {
            scenario,
            sweep,
            seeds,
            methods,
            out,
            serial,
        } => {
            let sc = Scenario::load(&scenario)?;
            let methods = if methods.is_empty() { sc.file.methods.clone() } else { methods };
            let seeds: Vec<u64> = (0..seeds).collect();
            let rows = run_ablation(&sc, &sweep, &methods, &seeds, !serial);
            write_ablation_csv(&rows, output(out.as_deref())?)?;
        }
        Command::Metrics { log, out } => {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&log)
                .map_err(|e| Error::io(&log, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.to_string_lossy().ends_with(".log.json"))
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(Error::config(format!("no *.log.json files in {}", log.display())));
            }
            let logs = paths.iter().map(|p| load_log(p)).collect::<Result<Vec<_>>>()?;
            write_metrics_csv(&logs, output(out.as_deref())?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
