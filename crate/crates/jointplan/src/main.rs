use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jointplan::experiment::{
    self, parse_planner, prepare, ConfigError, ExperimentConfig, WorkloadSource, ALL_PLANNERS,
};
use jointplan::io;
use jointplan::report;
use jointplan_core::milp::{build_milp, choose_delta};
use jointplan_core::{PlannerKind, PlannerOptions, Problem};

#[derive(Parser)]
#[command(
    name = "jointplan",
    version,
    about = "Plan and simulate multi-model training on a GPU cluster"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print or write each planner's initial plan.
    Plan(PlanArgs),
    /// Plan and simulate, printing the execution reports.
    Simulate(RunArgs),
    /// Plan and simulate every planner and print the comparison table.
    Compare(RunArgs),
    /// Write a preset workload (and its synthetic profiles) as files.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Markdown,
}

#[derive(Args)]
struct Source {
    /// Workload JSON file.
    #[arg(long, conflicts_with = "preset")]
    workload: Option<PathBuf>,
    /// Generator preset: wikitext_mirror or imagenet_mirror.
    #[arg(long)]
    preset: Option<String>,
    /// Nodes for the preset.
    #[arg(long, default_value_t = 1)]
    nodes: usize,
    /// Seed for the preset and the random planner.
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct Common {
    #[command(flatten)]
    source: Source,
    /// Comma-separated planners: saturn, current-practice, random[:SEED], optimus, optimus-dynamic.
    #[arg(long, value_delimiter = ',')]
    planners: Option<Vec<String>>,
    /// Measured profile CSV (job,technique,gpus,latency_s) instead of the synthetic model.
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Cap on intervals in the time-indexed program.
    #[arg(long, default_value_t = jointplan_core::milp::DEFAULT_MAX_INTERVALS)]
    delta_max_intervals: u32,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    format: Format,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    common: Common,
    /// Also write the time-indexed program as text (needs --out).
    #[arg(long)]
    dump_milp: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Seconds between re-plans for introspective planners; 0 disables.
    /// Defaults to a tenth of the initial predicted makespan.
    #[arg(long)]
    introspection_interval: Option<f64>,
    /// Seconds charged to each reconfigured job.
    #[arg(long, default_value_t = jointplan_core::sim::DEFAULT_CHECKPOINT_COST)]
    checkpoint_cost: f64,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 1)]
    nodes: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Directory for workload.json and profiles.csv; prints the workload when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Planner,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn config(common: &Common, default: &[&str]) -> Result<ExperimentConfig, Failure> {
    let s = &common.source;
    let source = match (&s.workload, &s.preset) {
        (Some(p), None) => WorkloadSource::File(p.clone()),
        (None, Some(name)) => WorkloadSource::Preset {
            name: name.clone(),
            nodes: s.nodes,
            seed: s.seed,
        },
        _ => return Err(Failure::Config("give exactly one of --workload or --preset".into())),
    };
    let names: Vec<String> = match &common.planners {
        Some(list) => list.clone(),
        None => default.iter().map(|s| s.to_string()).collect(),
    };
    let mut planners = Vec::new();
    for n in &names {
        planners.push(parse_planner(n, s.seed).ok_or_else(|| Failure::Config(format!("unknown planner `{n}`")))?);
    }
    let mut cfg = ExperimentConfig::new(source, planners);
    cfg.profiles = common.profiles.clone();
    cfg.planner = PlannerOptions {
        max_intervals: common.delta_max_intervals,
        ..PlannerOptions::default()
    };
    Ok(cfg)
}

fn write_out(dir: &std::path::Path, name: &str, text: &str) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
    io::write_file(&dir.join(name), text).map_err(|e| Failure::Config(e.to_string()))
}

fn plan_cmd(args: &PlanArgs) -> Result<(), Failure> {
    let cfg = config(&args.common, &["saturn"])?;
    let prepared = prepare(&cfg)?;
    let mut failed = false;
    let mut json = serde_json::Map::new();
    let mut csv = String::from("planner,job,technique,gpus,node,start_s,predicted_end_s\n");
    let mut md = String::new();
    for &kind in &cfg.planners {
        match experiment::plan_one(&prepared, kind, &cfg.planner) {
            Ok(plan) => {
                json.insert(
                    kind.label().into(),
                    serde_json::to_value(&plan).expect("plans serialize"),
                );
                for line in report::plan_csv(&plan, &prepared.workload).lines().skip(1) {
                    let _ = writeln!(csv, "{},{line}", kind.label());
                }
                let _ = write!(
                    md,
                    "## {}\n\n{}\n",
                    kind.display_name(),
                    report::plan_markdown(&plan, &prepared.workload)
                );
            }
            Err(e) => {
                eprintln!("error: {e}");
                failed = true;
            }
        }
    }
    let json = report::to_json(&json);
    if let Some(dir) = &args.common.out {
        write_out(dir, "plans.json", &json)?;
        write_out(dir, "plans.csv", &csv)?;
        write_out(dir, "plans.md", &md)?;
        if args.dump_milp {
            let problem = Problem::initial(&prepared.workload, &prepared.grid);
            let dump = choose_delta(&problem, cfg.planner.max_intervals, None)
                .and_then(|d| build_milp(&problem, d, cfg.planner.max_intervals))
                .map(|inst| inst.dump());
            match dump {
                Ok(text) => write_out(dir, "milp.txt", &text)?,
                Err(e) => {
                    eprintln!("error: cannot build the time-indexed program: {e}");
                    failed = true;
                }
            }
        }
    }
    print!(
        "{}",
        match args.common.format {
            Format::Json => json,
            Format::Csv => csv,
            Format::Markdown => md,
        }
    );
    if failed {
        Err(Failure::Planner)
    } else {
        Ok(())
    }
}

fn run_cmd(args: &RunArgs, compare: bool) -> Result<(), Failure> {
    let mut cfg = config(&args.common, if compare { &ALL_PLANNERS } else { &["saturn"] })?;
    cfg.introspection_interval = args.introspection_interval;
    cfg.checkpoint_cost = args.checkpoint_cost;
    let exp = experiment::run_experiment(&cfg)?;
    for e in exp.failures() {
        eprintln!("error: {e}");
    }
    if let Some(dir) = &args.common.out {
        match exp.write(dir) {
            Ok(_) => {}
            Err(experiment::EmitError::Report(_)) => {}
            Err(e) => return Err(Failure::Config(e.to_string())),
        }
    }
    let rows = exp.rows();
    if !rows.is_empty() {
        let text = if compare {
            match args.common.format {
                Format::Csv => report::comparison_csv(&rows),
                Format::Json => report::comparison_json(&rows),
                Format::Markdown => report::comparison_markdown(&exp.label, &rows),
            }
            .expect("rows are non-empty")
        } else {
            simulate_text(&exp, args.common.format)
        };
        print!("{text}");
    }
    if exp.failures().next().is_some() {
        Err(Failure::Planner)
    } else {
        Ok(())
    }
}

fn simulate_text(exp: &experiment::Experiment, format: Format) -> String {
    let reports: Vec<(PlannerKind, &jointplan_core::SimReport)> = exp
        .runs
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|(_, rep)| (r.planner, rep)))
        .collect();
    match format {
        Format::Json => report::to_json(&reports.iter().map(|(_, r)| r).collect::<Vec<_>>()),
        Format::Csv => {
            let mut out = String::from("planner,job,technique,gpus,node,start_s,end_s,batches\n");
            for (kind, rep) in &reports {
                for line in report::timeline_csv(rep).lines().skip(1) {
                    let _ = writeln!(out, "{},{line}", kind.label());
                }
            }
            out
        }
        Format::Markdown => {
            let mut out = String::from(
                "| planner | makespan (s) | predicted (s) | replans | adopted | checkpoints | profiling (s) |\n\
                 |---|---|---|---|---|---|---|\n",
            );
            for (kind, r) in &reports {
                let _ = writeln!(
                    out,
                    "| {} | {:.3} | {:.3} | {} | {} | {} | {:.3} |",
                    kind.display_name(),
                    r.makespan,
                    r.predicted_makespan,
                    r.replan_count,
                    r.replans_adopted,
                    r.checkpoint_count,
                    r.profiling_time_total
                );
            }
            if let Some((_, r)) = reports.first() {
                let _ = writeln!(out, "\nprofiles: {}", r.profile_provenance.as_str());
            }
            out
        }
    }
}

fn generate_cmd(args: &GenerateArgs) -> Result<(), Failure> {
    let cfg = ExperimentConfig::new(
        WorkloadSource::Preset {
            name: args.preset.clone(),
            nodes: args.nodes,
            seed: args.seed,
        },
        vec![PlannerKind::Saturn],
    );
    let prepared = prepare(&cfg)?;
    let json = io::workload_json(&prepared.workload);
    match &args.out {
        Some(dir) => {
            write_out(dir, "workload.json", &json)?;
            write_out(dir, "profiles.csv", &io::profiles_csv(&prepared.table))?;
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan(a) => plan_cmd(a),
        Command::Simulate(a) => run_cmd(a, false),
        Command::Compare(a) => run_cmd(a, true),
        Command::Generate(a) => generate_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Planner) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
