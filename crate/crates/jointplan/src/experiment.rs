//! Planner-by-simulator experiment runs.

use std::path::{Path, PathBuf};
use std::thread;

use jointplan_core::planners::{self, PlanningError};
use jointplan_core::{
    build_profile_table, simulate, LatencyGrid, Plan, PlannerKind, PlannerOptions, Problem, ProfileError, ProfileTable,
    SimError, SimOptions, SimReport, SyntheticExecutor, Workload,
};

use crate::generate::{generate_workload, GenerateError};
use crate::io::{self, IoError};
use crate::report::{self, ComparisonRow, ReportError};

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadSource {
    File(PathBuf),
    Preset { name: String, nodes: usize, seed: u64 },
}

impl WorkloadSource {
    /// Short label for tables.
    pub fn label(&self) -> String {
        match self {
            WorkloadSource::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "workload".into()),
            WorkloadSource::Preset { name, nodes, .. } => {
                format!("{name} ({nodes} node{})", if *nodes == 1 { "" } else { "s" })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: WorkloadSource,
    pub planners: Vec<PlannerKind>,
    /// Measured profiles to use instead of the synthetic cost model.
    pub profiles: Option<PathBuf>,
    /// `None` uses a tenth of each initial plan's predicted makespan.
    pub introspection_interval: Option<f64>,
    pub checkpoint_cost: f64,
    pub planner: PlannerOptions,
}

impl ExperimentConfig {
    pub fn new(source: WorkloadSource, planners: Vec<PlannerKind>) -> Self {
        ExperimentConfig {
            source,
            planners,
            profiles: None,
            introspection_interval: None,
            checkpoint_cost: jointplan_core::sim::DEFAULT_CHECKPOINT_COST,
            planner: PlannerOptions::default(),
        }
    }

    pub fn sim_options(&self, kind: PlannerKind) -> SimOptions {
        SimOptions {
            introspection_interval: self.introspection_interval,
            checkpoint_cost: self.checkpoint_cost,
            replanner: kind,
            planner: self.planner,
        }
    }
}

/// Problems with the inputs, as opposed to planner failures.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("no planners selected")]
    NoPlanners,
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error("profiles: {0}")]
    Profile(#[from] ProfileError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("{planner}: planning failed: {source}")]
    Planning {
        planner: &'static str,
        #[source]
        source: PlanningError,
    },
    #[error("{planner}: simulation failed: {source}")]
    Simulation {
        planner: &'static str,
        #[source]
        source: SimError,
    },
}

/// A workload with its profiles resolved.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub workload: Workload,
    pub table: ProfileTable,
    pub grid: LatencyGrid,
}

impl Prepared {
    /// Profiles `workload` with the synthetic executor.
    pub fn synthetic(workload: Workload) -> Result<Self, ConfigError> {
        let table = build_profile_table(&workload, &SyntheticExecutor::for_cluster(workload.cluster()))?;
        Self::with_table(workload, table)
    }

    pub fn with_table(workload: Workload, table: ProfileTable) -> Result<Self, ConfigError> {
        let grid = LatencyGrid::new(&workload, &table)?;
        Ok(Prepared { workload, table, grid })
    }
}

pub fn load_source(source: &WorkloadSource) -> Result<Workload, ConfigError> {
    Ok(match source {
        WorkloadSource::File(p) => io::load_workload(p)?,
        WorkloadSource::Preset { name, nodes, seed } => generate_workload(name, *nodes, *seed)?,
    })
}

/// Loads or generates the workload and builds its profile table, synthetic
/// unless a profile file is given.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared, ConfigError> {
    if config.planners.is_empty() {
        return Err(ConfigError::NoPlanners);
    }
    if !(config.checkpoint_cost >= 0.0 && config.checkpoint_cost.is_finite()) {
        return Err(ConfigError::Invalid(
            "checkpoint cost must be a non-negative number".into(),
        ));
    }
    if let Some(r) = config.introspection_interval {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(ConfigError::Invalid(
                "introspection interval must be a non-negative number".into(),
            ));
        }
    }
    if config.planner.max_intervals == 0 {
        return Err(ConfigError::Invalid("interval cap must be at least 1".into()));
    }
    let workload = load_source(&config.source)?;
    match &config.profiles {
        Some(p) => Prepared::with_table(workload, io::load_profiles(p)?),
        None => Prepared::synthetic(workload),
    }
}

/// Initial plan of one planner.
pub fn plan_one(prepared: &Prepared, kind: PlannerKind, opts: &PlannerOptions) -> Result<Plan, RunError> {
    let problem = Problem::initial(&prepared.workload, &prepared.grid);
    planners::plan(kind, &problem, opts).map_err(|source| RunError::Planning {
        planner: kind.label(),
        source,
    })
}

/// Plans and simulates one planner, checking the report's invariants.
pub fn run_one(
    prepared: &Prepared,
    config: &ExperimentConfig,
    kind: PlannerKind,
) -> Result<(Plan, SimReport), RunError> {
    let plan = plan_one(prepared, kind, &config.planner)?;
    let sim = |source| RunError::Simulation {
        planner: kind.label(),
        source,
    };
    let report = simulate(&prepared.workload, &prepared.grid, &plan, &config.sim_options(kind)).map_err(sim)?;
    report.verify(&prepared.workload, &prepared.grid).map_err(sim)?;
    Ok((plan, report))
}

#[derive(Debug, Clone)]
pub struct PlannerRun {
    pub planner: PlannerKind,
    pub outcome: Result<(Plan, SimReport), RunError>,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub label: String,
    pub prepared: Prepared,
    /// In planner order.
    pub runs: Vec<PlannerRun>,
}

impl Experiment {
    pub fn rows(&self) -> Vec<ComparisonRow> {
        self.runs
            .iter()
            .filter_map(|r| {
                r.outcome.as_ref().ok().map(|(_, rep)| ComparisonRow {
                    planner: r.planner,
                    makespan: rep.makespan,
                })
            })
            .collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &RunError> {
        self.runs.iter().filter_map(|r| r.outcome.as_ref().err())
    }

    pub fn report(&self, kind: PlannerKind) -> Option<&SimReport> {
        self.runs
            .iter()
            .find(|r| r.planner == kind)
            .and_then(|r| r.outcome.as_ref().ok())
            .map(|(_, rep)| rep)
    }

    /// Writes one report JSON and one timeline CSV per successful planner,
    /// plus `comparison.csv` and `comparison.md`. Returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, EmitError> {
        std::fs::create_dir_all(dir).map_err(|source| IoError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let rows = self.rows();
        let mut written = Vec::new();
        let mut put = |name: String, text: String| -> Result<(), EmitError> {
            let path = dir.join(name);
            io::write_file(&path, &text)?;
            written.push(path);
            Ok(())
        };
        put("comparison.csv".into(), report::comparison_csv(&rows)?)?;
        put("comparison.md".into(), report::comparison_markdown(&self.label, &rows)?)?;
        for run in &self.runs {
            if let Ok((_, rep)) = &run.outcome {
                put(format!("{}.json", run.planner.label()), report::report_json(rep))?;
                put(
                    format!("{}_timeline.csv", run.planner.label()),
                    report::timeline_csv(rep),
                )?;
            }
        }
        Ok(written)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EmitError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

/// Runs every selected planner concurrently on the same profiles. A failing
/// planner is recorded and the others still run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Experiment, ConfigError> {
    let prepared = prepare(config)?;
    let mut kinds = config.planners.clone();
    kinds.sort();
    kinds.dedup();
    let runs = thread::scope(|s| {
        let handles: Vec<_> = kinds
            .iter()
            .map(|&kind| {
                let prepared = &prepared;
                s.spawn(move || PlannerRun {
                    planner: kind,
                    outcome: run_one(prepared, config, kind),
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("planner threads do not panic"))
            .collect()
    });
    Ok(Experiment {
        label: config.source.label(),
        prepared,
        runs,
    })
}

/// Parses a planner name: `saturn`, `current-practice`, `random[:SEED]`,
/// `optimus`, `optimus-dynamic`. Underscores are accepted for hyphens.
pub fn parse_planner(name: &str, default_seed: u64) -> Option<PlannerKind> {
    let name = name.trim().to_ascii_lowercase().replace('_', "-");
    if let Some(seed) = name.strip_prefix("random:") {
        return seed.parse().ok().map(PlannerKind::Random);
    }
    Some(match name.as_str() {
        "saturn" => PlannerKind::Saturn,
        "current-practice" => PlannerKind::CurrentPractice,
        "random" => PlannerKind::Random(default_seed),
        "optimus" => PlannerKind::Optimus,
        "optimus-dynamic" => PlannerKind::OptimusDynamic,
        _ => return None,
    })
}

pub const ALL_PLANNERS: [&str; 5] = ["saturn", "current-practice", "random", "optimus", "optimus-dynamic"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planner_names_parse() {
        assert_eq!(parse_planner("Saturn", 0), Some(PlannerKind::Saturn));
        assert_eq!(parse_planner("current_practice", 0), Some(PlannerKind::CurrentPractice));
        assert_eq!(parse_planner("random", 7), Some(PlannerKind::Random(7)));
        assert_eq!(parse_planner("random:42", 7), Some(PlannerKind::Random(42)));
        assert_eq!(parse_planner("random:x", 7), None);
        assert_eq!(parse_planner("gurobi", 7), None);
        for n in ALL_PLANNERS {
            assert!(parse_planner(n, 0).is_some());
        }
    }

    #[test]
    fn labels_describe_source() {
        let p = WorkloadSource::Preset {
            name: "wikitext_mirror".into(),
            nodes: 2,
            seed: 7,
        };
        assert_eq!(p.label(), "wikitext_mirror (2 nodes)");
        assert_eq!(WorkloadSource::File("runs/mix.json".into()).label(), "mix");
    }

    #[test]
    fn empty_planner_list_is_a_config_error() {
        let cfg = ExperimentConfig::new(
            WorkloadSource::Preset {
                name: "wikitext_mirror".into(),
                nodes: 1,
                seed: 7,
            },
            vec![],
        );
        assert!(matches!(run_experiment(&cfg), Err(ConfigError::NoPlanners)));
    }
}
