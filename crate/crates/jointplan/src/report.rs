//! Report renderers. Seconds print with three decimals, rows follow the
//! planner order Saturn, CurrentPractice, Random, Optimus, OptimusDynamic.

use std::fmt::Write as _;

use jointplan_core::sim::SegmentKind;
use jointplan_core::{Plan, PlannerKind, SimReport, Workload};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReportError {
    #[error("no reports to emit")]
    Empty,
}

/// One planner's simulated makespan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub planner: PlannerKind,
    pub makespan: f64,
}

/// Column order of the Markdown comparison table.
const TABLE_ORDER: [fn(PlannerKind) -> bool; 5] = [
    |k| k == PlannerKind::CurrentPractice,
    |k| matches!(k, PlannerKind::Random(_)),
    |k| k == PlannerKind::Optimus,
    |k| k == PlannerKind::OptimusDynamic,
    |k| k == PlannerKind::Saturn,
];

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round3(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to milliseconds.
pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("reports serialize");
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("values serialize");
    s.push('\n');
    s
}

pub fn report_json(report: &SimReport) -> String {
    to_json(report)
}

/// Gantt-ready rows: `job,technique,gpus,node,start_s,end_s,batches`.
/// Non-compute segments report zero batches.
pub fn timeline_csv(report: &SimReport) -> String {
    let mut out = String::from("job,technique,gpus,node,start_s,end_s,batches\n");
    for t in &report.timeline {
        for s in &t.segments {
            let batches = if s.kind == SegmentKind::Compute { s.batches } else { 0 };
            let _ = writeln!(
                out,
                "{},{},{},{},{:.3},{:.3},{}",
                t.job, s.technique, s.gpus, s.node, s.start, s.end, batches
            );
        }
    }
    out
}

/// `job,technique,gpus,node,start_s,predicted_end_s` in job id order.
pub fn plan_csv(plan: &Plan, workload: &Workload) -> String {
    let mut out = String::from("job,technique,gpus,node,start_s,predicted_end_s\n");
    for (id, e) in &plan.entries {
        let _ = writeln!(
            out,
            "{id},{},{},{},{:.3},{:.3}",
            workload.techniques()[e.config.technique].name,
            e.config.gpus,
            workload.cluster().nodes[e.node].id,
            e.start_time,
            e.predicted_end
        );
    }
    out
}

pub fn plan_markdown(plan: &Plan, workload: &Workload) -> String {
    let mut out = String::from("| job | technique | gpus | node | start (s) | predicted end (s) |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for (id, e) in &plan.entries {
        let _ = writeln!(
            out,
            "| {id} | {} | {} | {} | {:.3} | {:.3} |",
            workload.techniques()[e.config.technique].name,
            e.config.gpus,
            workload.cluster().nodes[e.node].id,
            e.start_time,
            e.predicted_end
        );
    }
    let _ = writeln!(out, "\npredicted makespan: {:.3} s", plan.predicted_makespan);
    out
}

fn sorted(rows: &[ComparisonRow]) -> Result<Vec<ComparisonRow>, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut rows = rows.to_vec();
    rows.sort_by_key(|r| r.planner);
    Ok(rows)
}

fn baseline(rows: &[ComparisonRow]) -> Option<f64> {
    rows.iter()
        .find(|r| r.planner == PlannerKind::CurrentPractice)
        .map(|r| r.makespan)
}

/// `planner,makespan_s[,speedup_vs_current_practice]`; the speedup column
/// appears only when CurrentPractice is among the rows.
pub fn comparison_csv(rows: &[ComparisonRow]) -> Result<String, ReportError> {
    let rows = sorted(rows)?;
    let base = baseline(&rows);
    let mut out = String::from("planner,makespan_s");
    if base.is_some() {
        out.push_str(",speedup_vs_current_practice");
    }
    out.push('\n');
    for r in &rows {
        let _ = write!(out, "{},{:.3}", r.planner.label(), r.makespan);
        if let Some(b) = base {
            let _ = write!(out, ",{:.3}", b / r.makespan);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn comparison_json(rows: &[ComparisonRow]) -> Result<String, ReportError> {
    let rows = sorted(rows)?;
    let base = baseline(&rows);
    let items: Vec<Value> = rows
        .iter()
        .map(|r| {
            let mut m = serde_json::Map::new();
            m.insert("planner".into(), r.planner.label().into());
            if let Some(seed) = r.planner.seed() {
                m.insert("seed".into(), seed.into());
            }
            m.insert("makespan_s".into(), r.makespan.into());
            if let Some(b) = base {
                m.insert("speedup_vs_current_practice".into(), (b / r.makespan).into());
            }
            Value::Object(m)
        })
        .collect();
    Ok(to_json(&items))
}

/// One row per workload label, one column per planner in the order Current
/// Practice, Random, Optimus, Optimus-Dynamic, Saturn; makespans in seconds.
pub fn comparison_markdown(label: &str, rows: &[ComparisonRow]) -> Result<String, ReportError> {
    let rows = sorted(rows)?;
    let mut columns: Vec<ComparisonRow> = Vec::new();
    for matches in TABLE_ORDER {
        columns.extend(rows.iter().filter(|r| matches(r.planner)));
    }
    let mut out = String::from("| workload |");
    for c in &columns {
        let _ = write!(out, " {} |", c.planner.display_name());
    }
    out.push_str("\n|---|");
    for _ in &columns {
        out.push_str("---|");
    }
    let _ = write!(out, "\n| {label} |");
    for c in &columns {
        let _ = write!(out, " {:.3} |", c.makespan);
    }
    out.push('\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<ComparisonRow> {
        vec![
            ComparisonRow {
                planner: PlannerKind::OptimusDynamic,
                makespan: 90.0,
            },
            ComparisonRow {
                planner: PlannerKind::Saturn,
                makespan: 60.0,
            },
            ComparisonRow {
                planner: PlannerKind::Random(7),
                makespan: 150.0,
            },
            ComparisonRow {
                planner: PlannerKind::CurrentPractice,
                makespan: 120.0,
            },
            ComparisonRow {
                planner: PlannerKind::Optimus,
                makespan: 100.0,
            },
        ]
    }

    #[test]
    fn csv_orders_rows_and_normalizes_speedup() {
        let csv = comparison_csv(&rows()).unwrap();
        assert_eq!(
            csv,
            "planner,makespan_s,speedup_vs_current_practice\n\
             saturn,60.000,2.000\n\
             current-practice,120.000,1.000\n\
             random,150.000,0.800\n\
             optimus,100.000,1.200\n\
             optimus-dynamic,90.000,1.333\n"
        );
    }

    #[test]
    fn csv_without_baseline_drops_speedup() {
        let one = [ComparisonRow {
            planner: PlannerKind::Saturn,
            makespan: 12.3456,
        }];
        assert_eq!(comparison_csv(&one).unwrap(), "planner,makespan_s\nsaturn,12.346\n");
        assert_eq!(comparison_csv(&[]).unwrap_err(), ReportError::Empty);
        assert_eq!(comparison_markdown("w", &[]).unwrap_err(), ReportError::Empty);
    }

    #[test]
    fn markdown_matches_golden() {
        let md = comparison_markdown("wikitext_mirror (1 node)", &rows()).unwrap();
        assert_eq!(
            md,
            "| workload | Current Practice | Random | Optimus | Optimus-Dynamic | Saturn |\n\
             |---|---|---|---|---|---|\n\
             | wikitext_mirror (1 node) | 120.000 | 150.000 | 100.000 | 90.000 | 60.000 |\n"
        );
    }

    #[test]
    fn json_rounds_to_milliseconds() {
        let s = to_json(&serde_json::json!({"a": 1.23456, "b": [0.1, 2.0005], "c": 3}));
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["a"], 1.235);
        assert_eq!(v["b"][0], 0.1);
        assert_eq!(v["c"], 3);
    }
}
