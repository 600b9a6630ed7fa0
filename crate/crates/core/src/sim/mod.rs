//! Event-driven execution of plans, with periodic re-planning.
//!
//! A plan is executed by dispatching its jobs in order of planned start, each
//! at the earliest instant its planned node has the GPUs free. Profiles are
//! exact, so the dispatched schedule is what actually happens unless a
//! re-plan replaces it. At every introspection tick the replanner sees the
//! unfinished jobs with their progress and current placements; its plan is
//! adopted only when dispatching it finishes strictly earlier than carrying
//! on. Running jobs whose placement changes (or that are paused) lose the
//! partial batch in flight and hold their old GPUs for a checkpoint before
//! they can resume.

use alloc::collections::BinaryHeap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use serde::{Deserialize, Serialize};

use crate::plan::{Plan, PlanError};
use crate::planners::{self, PlannerKind, PlannerOptions};
use crate::problem::{JobWork, Placement, Problem};
use crate::profile::{LatencyGrid, Provenance};
use crate::timeline::{capacity_violation, Occupancy};
use crate::workload::{Config, Workload};
use crate::TIME_EPS;

/// Default checkpoint overhead, seconds.
pub const DEFAULT_CHECKPOINT_COST: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Seconds between re-plans; `None` means a tenth of the initial plan's
    /// predicted makespan and `Some(0.0)` disables re-planning.
    pub introspection_interval: Option<f64>,
    /// Seconds a reconfigured job spends checkpointing on its old GPUs.
    pub checkpoint_cost: f64,
    /// Planner behind the initial plan. Only introspective kinds re-plan.
    pub replanner: PlannerKind,
    pub planner: PlannerOptions,
}

impl SimOptions {
    pub fn new(replanner: PlannerKind) -> Self {
        SimOptions {
            introspection_interval: None,
            checkpoint_cost: DEFAULT_CHECKPOINT_COST,
            replanner,
            planner: PlannerOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid plan: {0}")]
    InvalidPlan(#[from] PlanError),
    #[error("invalid options: {0}")]
    InvalidOptions(&'static str),
    #[error("node {node} over capacity at t={time}")]
    CapacityViolation { node: usize, time: f64 },
    #[error("job `{job}` ran {ran} batches, expected {expected}")]
    Conservation { job: String, ran: u64, expected: u64 },
    #[error("segment of job `{0}` disagrees with its profiled latency")]
    LatencyMismatch(String),
    #[error("report makespan {stated} differs from last segment end {actual}")]
    MakespanMismatch { stated: f64, actual: f64 },
    #[error("report names unknown {0}")]
    UnknownName(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    /// Training; `batches` mini-batches completed.
    Compute,
    /// Partial batch lost when the job was reconfigured.
    Discarded,
    /// Checkpoint write on the old GPUs; zero length when the cost is zero.
    Checkpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub technique: String,
    pub gpus: u32,
    pub node: String,
    pub start: f64,
    pub end: f64,
    pub batches: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobTimeline {
    pub job: String,
    pub finish: f64,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub planner: PlannerKind,
    pub seed: Option<u64>,
    pub makespan: f64,
    /// Makespan the initial plan predicted.
    pub predicted_makespan: f64,
    /// Grid of the initial plan, for time-indexed plans.
    pub resolution: Option<f64>,
    pub introspection_interval: f64,
    pub checkpoint_cost: f64,
    /// Re-plans attempted.
    pub replan_count: u32,
    /// Re-plans whose plan replaced the running one.
    pub replans_adopted: u32,
    pub replan_failures: u32,
    pub checkpoint_count: u32,
    pub checkpoint_time_total: f64,
    /// Simulated seconds spent profiling before planning.
    pub profiling_time_total: f64,
    pub profile_provenance: Provenance,
    /// One entry per job, in id order.
    pub timeline: Vec<JobTimeline>,
}

impl SimReport {
    /// Work conservation, per-segment latency agreement, node capacity and
    /// makespan consistency.
    pub fn verify(&self, workload: &Workload, grid: &LatencyGrid) -> Result<(), SimError> {
        let mut usages = Vec::new();
        let mut last = 0.0f64;
        for t in &self.timeline {
            let j = workload
                .job_index(&t.job)
                .ok_or_else(|| SimError::UnknownName(alloc::format!("job `{}`", t.job)))?;
            let mut ran = 0;
            for s in &t.segments {
                let technique = workload
                    .technique_index(&s.technique)
                    .ok_or_else(|| SimError::UnknownName(alloc::format!("technique `{}`", s.technique)))?;
                let node = workload
                    .node_index(&s.node)
                    .ok_or_else(|| SimError::UnknownName(alloc::format!("node `{}`", s.node)))?;
                if s.kind == SegmentKind::Compute {
                    let lat = grid
                        .latency(
                            j,
                            Config {
                                technique,
                                gpus: s.gpus,
                            },
                        )
                        .ok_or_else(|| SimError::LatencyMismatch(t.job.clone()))?;
                    let expected = s.batches as f64 * lat;
                    if ((s.end - s.start) - expected).abs() > 1e-6 * expected.max(1.0) {
                        return Err(SimError::LatencyMismatch(t.job.clone()));
                    }
                    ran += s.batches;
                } else if s.batches != 0 {
                    return Err(SimError::LatencyMismatch(t.job.clone()));
                }
                usages.push((node, s.start, s.end, s.gpus));
                last = last.max(s.end);
            }
            let expected = workload.jobs()[j].total_batches;
            if ran != expected {
                return Err(SimError::Conservation {
                    job: t.job.clone(),
                    ran,
                    expected,
                });
            }
        }
        if let Some((node, time)) = capacity_violation(&workload.cluster().capacities(), usages) {
            return Err(SimError::CapacityViolation { node, time });
        }
        if (last - self.makespan).abs() > TIME_EPS {
            return Err(SimError::MakespanMismatch {
                stated: self.makespan,
                actual: last,
            });
        }
        Ok(())
    }

    pub fn job(&self, id: &str) -> Option<&JobTimeline> {
        self.timeline.iter().find(|t| t.job == id)
    }
}

/// Execution state of one job.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JobState {
    Pending,
    Running {
        config: Config,
        node: usize,
        since: f64,
        /// Completed batches when this run began.
        done_at_start: u64,
        latency: f64,
    },
    /// Writing a checkpoint on its old GPUs until `until`.
    Checkpointing {
        config: Config,
        node: usize,
        until: f64,
    },
    Done {
        finish: f64,
    },
}

/// Where and when a pending job will start.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Slot {
    config: Config,
    node: usize,
    start: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Finish(usize),
    CheckpointDone(usize),
    Tick,
    Start(usize),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EventKind,
    /// Position of the job in id order; zero for ticks.
    rank: usize,
    generation: u32,
}

impl Event {
    fn class(&self) -> u8 {
        match self.kind {
            EventKind::Finish(_) | EventKind::CheckpointDone(_) => 0,
            EventKind::Tick => 1,
            EventKind::Start(_) => 2,
        }
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.class().cmp(&other.class()))
            .then(self.rank.cmp(&other.rank))
            .then(self.generation.cmp(&other.generation))
    }
}

/// Simulated cluster state. Jobs are indexed as in the workload.
#[derive(Debug, Clone)]
pub struct SimState<'a> {
    workload: &'a Workload,
    grid: &'a LatencyGrid,
    pub clock: f64,
    /// Free GPUs per node.
    pub free: Vec<u32>,
    pub jobs: Vec<JobState>,
    /// Committed batches per job; a running job's in-flight progress is not included.
    pub batches_done: Vec<u64>,
    slots: Vec<Option<Slot>>,
    generation: Vec<u32>,
    rank: Vec<usize>,
    queue: BinaryHeap<Reverse<Event>>,
    segments: Vec<Vec<Segment>>,
    checkpoint_count: u32,
    checkpoint_time: f64,
}

impl<'a> SimState<'a> {
    pub fn new(workload: &'a Workload, grid: &'a LatencyGrid) -> Self {
        let n = workload.jobs().len();
        let mut rank = vec![0; n];
        for (r, &j) in workload.id_order().iter().enumerate() {
            rank[j] = r;
        }
        SimState {
            workload,
            grid,
            clock: 0.0,
            free: workload.cluster().capacities(),
            jobs: vec![JobState::Pending; n],
            batches_done: vec![0; n],
            slots: vec![None; n],
            generation: vec![0; n],
            rank,
            queue: BinaryHeap::new(),
            segments: vec![Vec::new(); n],
            checkpoint_count: 0,
            checkpoint_time: 0.0,
        }
    }

    fn total(&self, j: usize) -> u64 {
        self.workload.jobs()[j].total_batches
    }

    /// Exact batches completed by a running job at `clock`.
    fn progress(&self, j: usize, clock: f64) -> f64 {
        match self.jobs[j] {
            JobState::Running {
                since,
                done_at_start,
                latency,
                ..
            } => (done_at_start as f64 + (clock - since) / latency).min(self.total(j) as f64),
            JobState::Done { .. } => self.total(j) as f64,
            _ => self.batches_done[j] as f64,
        }
    }

    /// Whole batches completed at `clock`, never counting a running job as finished.
    fn completed(&self, j: usize, clock: f64) -> u64 {
        match self.jobs[j] {
            JobState::Running { .. } => {
                let whole = libm::floor(self.progress(j, clock) + 1e-9) as u64;
                whole.min(self.total(j) - 1)
            }
            JobState::Done { .. } => self.total(j),
            _ => self.batches_done[j],
        }
    }

    /// Batches `j` still has to run, counting from its last completed batch.
    pub fn remaining_batches(&self, j: usize, clock: f64) -> u64 {
        self.total(j) - self.completed(j, clock)
    }

    pub fn unfinished(&self) -> Vec<usize> {
        self.workload
            .id_order()
            .iter()
            .copied()
            .filter(|&j| !matches!(self.jobs[j], JobState::Done { .. }))
            .collect()
    }

    /// When the current schedule ends if nothing changes.
    pub fn projected_makespan(&self) -> f64 {
        let mut end = self.clock;
        for (j, s) in self.jobs.iter().enumerate() {
            let t = match *s {
                JobState::Done { finish } => finish,
                JobState::Running {
                    since,
                    done_at_start,
                    latency,
                    ..
                } => since + (self.total(j) - done_at_start) as f64 * latency,
                JobState::Pending | JobState::Checkpointing { .. } => match self.slots[j] {
                    Some(slot) => slot.start + self.slot_duration(j, slot.config),
                    None => f64::INFINITY,
                },
            };
            end = end.max(t);
        }
        end
    }

    fn slot_duration(&self, j: usize, config: Config) -> f64 {
        let lat = self.grid.latency(j, config).unwrap_or(f64::INFINITY);
        (self.total(j) - self.batches_done[j]) as f64 * lat
    }

    /// The re-planning instance at the current clock.
    pub fn problem(&self, checkpoint_cost: f64) -> Problem<'a> {
        let jobs = self
            .unfinished()
            .into_iter()
            .map(|j| match self.jobs[j] {
                JobState::Running { config, node, .. } => JobWork {
                    job: j,
                    batches_done: self.completed(j, self.clock),
                    progress: self.progress(j, self.clock),
                    current: Some(Placement { config, node }),
                },
                _ => JobWork {
                    job: j,
                    batches_done: self.batches_done[j],
                    progress: self.batches_done[j] as f64,
                    current: None,
                },
            })
            .collect();
        Problem {
            workload: self.workload,
            grid: self.grid,
            now: self.clock,
            checkpoint_cost,
            jobs,
        }
    }

    fn push(&mut self, time: f64, kind: EventKind) {
        let (rank, generation) = match kind {
            EventKind::Tick => (0, 0),
            EventKind::Finish(j) | EventKind::CheckpointDone(j) | EventKind::Start(j) => {
                (self.rank[j], self.generation[j])
            }
        };
        self.queue.push(Reverse(Event {
            time,
            kind,
            rank,
            generation,
        }));
    }

    fn segment(
        &mut self,
        j: usize,
        kind: SegmentKind,
        config: Config,
        node: usize,
        (start, end): (f64, f64),
        batches: u64,
    ) {
        let wl = self.workload;
        self.segments[j].push(Segment {
            kind,
            technique: wl.techniques()[config.technique].name.clone(),
            gpus: config.gpus,
            node: wl.cluster().nodes[node].id.clone(),
            start,
            end,
            batches,
        });
    }

    /// Slots every pending or checkpointing job at the earliest instant its
    /// planned node has room, in order of planned start.
    fn dispatch(&mut self, plan: &Plan) -> Result<(), SimError> {
        let now = self.clock;
        let mut occupancy: Vec<Occupancy> = self
            .workload
            .cluster()
            .capacities()
            .into_iter()
            .map(Occupancy::new)
            .collect();
        let mut waiting = Vec::new();
        for j in 0..self.jobs.len() {
            match self.jobs[j] {
                JobState::Running { config, node, .. } => {
                    let end = self.projected_end(j);
                    occupancy[node].add(now, end, config.gpus);
                }
                JobState::Checkpointing { config, node, until } => {
                    occupancy[node].add(now, until, config.gpus);
                    waiting.push((j, until));
                }
                JobState::Pending => waiting.push((j, now)),
                JobState::Done { .. } => {}
            }
        }
        let mut order = Vec::with_capacity(waiting.len());
        for (j, ready) in waiting {
            let id = &self.workload.jobs()[j].id;
            let entry = plan.entries.get(id).ok_or_else(|| PlanError::MissingJob(id.clone()))?;
            order.push((entry.start_time, self.rank[j], j, ready, entry.config, entry.node));
        }
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, _, j, ready, config, node) in order {
            let id = &self.workload.jobs()[j].id;
            if node >= occupancy.len()
                || !self.workload.hosts(j, config, node)
                || self.grid.latency(j, config).is_none()
            {
                return Err(PlanError::BadPlacement(id.clone()).into());
            }
            let duration = self.slot_duration(j, config);
            let start = occupancy[node]
                .earliest_fit(config.gpus, duration, ready)
                .ok_or_else(|| PlanError::BadPlacement(id.clone()))?;
            occupancy[node].add(start, start + duration, config.gpus);
            self.slots[j] = Some(Slot { config, node, start });
            self.generation[j] += 1;
            self.push(start, EventKind::Start(j));
        }
        Ok(())
    }

    fn projected_end(&self, j: usize) -> f64 {
        match self.jobs[j] {
            JobState::Running {
                since,
                done_at_start,
                latency,
                ..
            } => since + (self.total(j) - done_at_start) as f64 * latency,
            _ => self.clock,
        }
    }

    /// Adopts `plan` for the unfinished jobs. Running jobs keep going when the
    /// plan leaves them in place from now; the rest checkpoint for
    /// `checkpoint_cost` seconds on their old GPUs, restart from their last
    /// completed batch, and are dispatched with every other waiting job.
    pub fn apply_replan(&mut self, plan: &Plan, checkpoint_cost: f64) -> Result<(), SimError> {
        let now = self.clock;
        for j in self.unfinished() {
            let JobState::Running {
                config,
                node,
                since,
                done_at_start,
                latency,
            } = self.jobs[j]
            else {
                continue;
            };
            let id = &self.workload.jobs()[j].id;
            let entry = plan.entries.get(id).ok_or_else(|| PlanError::MissingJob(id.clone()))?;
            if entry.config == config && entry.node == node && (entry.start_time - now).abs() <= TIME_EPS {
                continue;
            }
            let done = self.completed(j, now);
            let boundary = since + (done - done_at_start) as f64 * latency;
            if done > done_at_start {
                self.segment(
                    j,
                    SegmentKind::Compute,
                    config,
                    node,
                    (since, boundary),
                    done - done_at_start,
                );
            }
            if now - boundary > 1e-9 {
                self.segment(j, SegmentKind::Discarded, config, node, (boundary, now), 0);
            }
            let until = now + checkpoint_cost;
            self.segment(j, SegmentKind::Checkpoint, config, node, (now, until), 0);
            self.batches_done[j] = done;
            self.jobs[j] = JobState::Checkpointing { config, node, until };
            self.generation[j] += 1;
            self.push(until, EventKind::CheckpointDone(j));
            self.checkpoint_count += 1;
            self.checkpoint_time += checkpoint_cost;
        }
        self.dispatch(plan)
    }

    fn is_current(&self, ev: &Event, j: usize) -> bool {
        ev.generation == self.generation[j]
    }

    fn start(&mut self, j: usize) -> Result<(), SimError> {
        let Some(slot) = self.slots[j].take() else {
            return Ok(());
        };
        if self.free[slot.node] < slot.config.gpus {
            return Err(SimError::CapacityViolation {
                node: slot.node,
                time: self.clock,
            });
        }
        self.free[slot.node] -= slot.config.gpus;
        let latency = self
            .grid
            .latency(j, slot.config)
            .expect("dispatched configs are profiled");
        self.jobs[j] = JobState::Running {
            config: slot.config,
            node: slot.node,
            since: self.clock,
            done_at_start: self.batches_done[j],
            latency,
        };
        let end = self.projected_end(j);
        self.push(end, EventKind::Finish(j));
        Ok(())
    }

    fn finish(&mut self, j: usize) {
        let JobState::Running {
            config,
            node,
            since,
            done_at_start,
            ..
        } = self.jobs[j]
        else {
            return;
        };
        let total = self.total(j);
        self.segment(
            j,
            SegmentKind::Compute,
            config,
            node,
            (since, self.clock),
            total - done_at_start,
        );
        self.batches_done[j] = total;
        self.free[node] += config.gpus;
        self.jobs[j] = JobState::Done { finish: self.clock };
    }

    fn checkpoint_done(&mut self, j: usize) {
        if let JobState::Checkpointing { config, node, until } = self.jobs[j] {
            if (until - self.clock).abs() <= TIME_EPS {
                self.free[node] += config.gpus;
                self.jobs[j] = JobState::Pending;
            }
        }
    }
}

/// Executes `plan0` and, for introspective planners, re-plans every
/// introspection interval. Planner failures during a run keep the old plan.
pub fn simulate(
    workload: &Workload,
    grid: &LatencyGrid,
    plan0: &Plan,
    opts: &SimOptions,
) -> Result<SimReport, SimError> {
    plan0.check(workload)?;
    let interval = match opts.introspection_interval {
        _ if !opts.replanner.introspective() => 0.0,
        Some(r) => r,
        None => plan0.predicted_makespan / 10.0,
    };
    if !(interval >= 0.0 && interval.is_finite()) {
        return Err(SimError::InvalidOptions(
            "introspection interval must be finite and non-negative",
        ));
    }
    if !(opts.checkpoint_cost >= 0.0 && opts.checkpoint_cost.is_finite()) {
        return Err(SimError::InvalidOptions(
            "checkpoint cost must be finite and non-negative",
        ));
    }
    let mut planner_opts = opts.planner;
    if planner_opts.min_delta.is_none() {
        planner_opts.min_delta = plan0.resolution;
    }

    let mut state = SimState::new(workload, grid);
    state.dispatch(plan0)?;
    if interval > 0.0 {
        state.push(interval, EventKind::Tick);
    }
    let (mut replans, mut adopted, mut failures) = (0u32, 0u32, 0u32);

    while let Some(Reverse(ev)) = state.queue.pop() {
        if state.unfinished().is_empty() {
            break;
        }
        debug_assert!(ev.time + TIME_EPS >= state.clock);
        state.clock = state.clock.max(ev.time);
        match ev.kind {
            EventKind::Finish(j) => {
                if state.is_current(&ev, j) {
                    state.finish(j);
                }
            }
            EventKind::CheckpointDone(j) => state.checkpoint_done(j),
            EventKind::Start(j) => {
                if state.is_current(&ev, j) && state.jobs[j] == JobState::Pending {
                    state.start(j)?;
                }
            }
            EventKind::Tick => {
                let pending = state.unfinished();
                if pending.is_empty() {
                    continue;
                }
                replans += 1;
                let problem = state.problem(opts.checkpoint_cost);
                let outcome = planners::plan(opts.replanner, &problem, &planner_opts)
                    .map_err(|e| alloc::format!("{e}"))
                    .and_then(|p| {
                        p.check_subset(workload, &pending)
                            .map(|_| p)
                            .map_err(|e| alloc::format!("{e}"))
                    })
                    .and_then(|p| {
                        let mut next = state.clone();
                        next.apply_replan(&p, opts.checkpoint_cost)
                            .map(|_| next)
                            .map_err(|e| alloc::format!("{e}"))
                    });
                match outcome {
                    Ok(next) => {
                        let current = state.projected_makespan();
                        if next.projected_makespan() < current - TIME_EPS.max(1e-9 * current) {
                            state = next;
                            adopted += 1;
                        }
                    }
                    Err(e) => {
                        failures += 1;
                        log::warn!("re-plan at t={:.3} failed, keeping the current plan: {e}", state.clock);
                    }
                }
                state.push(state.clock + interval, EventKind::Tick);
            }
        }
    }
    if !state.unfinished().is_empty() {
        let j = state.unfinished()[0];
        return Err(PlanError::MissingJob(workload.jobs()[j].id.clone()).into());
    }

    let timeline: Vec<JobTimeline> = workload
        .id_order()
        .iter()
        .map(|&j| JobTimeline {
            job: workload.jobs()[j].id.clone(),
            finish: match state.jobs[j] {
                JobState::Done { finish } => finish,
                _ => f64::NAN,
            },
            segments: core::mem::take(&mut state.segments[j]),
        })
        .collect();
    let makespan = timeline.iter().map(|t| t.finish).fold(0.0, f64::max);
    Ok(SimReport {
        planner: opts.replanner,
        seed: opts.replanner.seed(),
        makespan,
        predicted_makespan: plan0.predicted_makespan,
        resolution: plan0.resolution,
        introspection_interval: interval,
        checkpoint_cost: opts.checkpoint_cost,
        replan_count: replans,
        replans_adopted: adopted,
        replan_failures: failures,
        checkpoint_count: state.checkpoint_count,
        checkpoint_time_total: state.checkpoint_time,
        profiling_time_total: grid.profiling_seconds(),
        profile_provenance: grid.provenance(),
        timeline,
    })
}
