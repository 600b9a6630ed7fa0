//! Plain-text rendering of an instance, one constraint per line.
//!
//! ```text
//! # delta 1.5 horizon 8 origin 0
//! node 0 capacity 2
//! job 0 index 0 id a
//! var x[0,0:1,0,0] duration 7
//! min M
//! assign[0]: 1 x[0,0:1,0,0] + 1 x[0,0:2,0,0] = 1
//! capacity[0,0]: 1 x[0,0:1,0,0] + 2 x[0,0:2,0,0] <= 2
//! makespan[0]: 10.5 x[0,0:1,0,0] + 6 x[0,0:2,0,0] - 1 M <= 0
//! ```
//!
//! Numbers use the shortest representation that reads back exactly.

use alloc::string::String;
use core::fmt::Write;

use super::{MilpInstance, MilpVar, RowKind, Sense};

fn var_name(out: &mut String, v: &MilpVar) {
    let _ = write!(
        out,
        "x[{},{}:{},{},{}]",
        v.job, v.config.technique, v.config.gpus, v.node, v.start
    );
}

impl MilpInstance {
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# delta {} horizon {} origin {}",
            self.delta, self.horizon, self.origin
        );
        for (n, cap) in self.capacities.iter().enumerate() {
            let _ = writeln!(out, "node {n} capacity {cap}");
        }
        for (j, id) in self.job_ids.iter().enumerate() {
            let _ = writeln!(out, "job {j} index {} id {id}", self.jobs[j]);
        }
        for v in &self.vars {
            out.push_str("var ");
            var_name(&mut out, v);
            let _ = writeln!(out, " duration {}", v.duration);
        }
        out.push_str("min M\n");
        for row in &self.rows {
            match row.kind {
                RowKind::Assign { job } => {
                    let _ = write!(out, "assign[{job}]:");
                }
                RowKind::Capacity { node, interval } => {
                    let _ = write!(out, "capacity[{node},{interval}]:");
                }
                RowKind::Makespan { job } => {
                    let _ = write!(out, "makespan[{job}]:");
                }
            }
            for (k, &(v, c)) in row.coeffs.iter().enumerate() {
                let _ = write!(out, "{}{c} ", if k == 0 { " " } else { " + " });
                var_name(&mut out, &self.vars[v]);
            }
            if row.makespan_coeff != 0.0 {
                let _ = write!(out, " - {} M", -row.makespan_coeff);
            }
            let sense = match row.sense {
                Sense::Eq => "=",
                Sense::Le => "<=",
            };
            let _ = writeln!(out, " {sense} {}", row.rhs);
        }
        out
    }
}

#[cfg(test)]
pub(crate) fn parse_dump(text: &str) -> Result<MilpInstance, String> {
    use alloc::collections::BTreeMap;
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec::Vec;

    use super::Row;
    use crate::workload::Config;

    fn num<T: core::str::FromStr>(s: Option<&str>, line: usize) -> Result<T, String> {
        s.and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("line {line}: bad number"))
    }
    fn parse_var(s: &str, line: usize) -> Result<(usize, Config, usize, u32), String> {
        let inner = s
            .strip_prefix("x[")
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| format!("line {line}: bad variable `{s}`"))?;
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 4 {
            return Err(format!("line {line}: bad variable `{s}`"));
        }
        let (t, g) = parts[1]
            .split_once(':')
            .ok_or_else(|| format!("line {line}: bad config"))?;
        Ok((
            num(Some(parts[0]), line)?,
            Config {
                technique: num(Some(t), line)?,
                gpus: num(Some(g), line)?,
            },
            num(Some(parts[2]), line)?,
            num(Some(parts[3]), line)?,
        ))
    }

    let mut inst = MilpInstance {
        delta: 0.0,
        horizon: 0,
        origin: 0.0,
        jobs: Vec::new(),
        job_ids: Vec::new(),
        capacities: Vec::new(),
        vars: Vec::new(),
        job_vars: Vec::new(),
        rows: Vec::new(),
    };
    let mut index = BTreeMap::new();
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["#", "delta", d, "horizon", k, "origin", o] => {
                inst.delta = num(Some(d), ln)?;
                inst.horizon = num(Some(k), ln)?;
                inst.origin = num(Some(o), ln)?;
            }
            ["node", _, "capacity", c] => inst.capacities.push(num(Some(c), ln)?),
            ["job", _, "index", i, "id", id] => {
                inst.jobs.push(num(Some(i), ln)?);
                inst.job_ids.push(id.to_string());
            }
            ["var", x, "duration", d] => {
                let (job, config, node, start) = parse_var(x, ln)?;
                let duration = num(Some(d), ln)?;
                index.insert(x.to_string(), inst.vars.len());
                while inst.job_vars.len() <= job {
                    let at = inst.vars.len();
                    inst.job_vars.push(at..at);
                }
                inst.job_vars[job].end = inst.vars.len() + 1;
                inst.vars.push(MilpVar {
                    job,
                    config,
                    node,
                    start,
                    duration,
                });
            }
            ["min", "M"] => {}
            [head, rest @ ..] => {
                let (name, args) = head
                    .strip_suffix("]:")
                    .and_then(|h| h.split_once('['))
                    .ok_or_else(|| format!("line {ln}: unknown line"))?;
                let args: Vec<&str> = args.split(',').collect();
                let kind = match (name, args.as_slice()) {
                    ("assign", [j]) => RowKind::Assign { job: num(Some(j), ln)? },
                    ("capacity", [n, t]) => RowKind::Capacity {
                        node: num(Some(n), ln)?,
                        interval: num(Some(t), ln)?,
                    },
                    ("makespan", [j]) => RowKind::Makespan { job: num(Some(j), ln)? },
                    _ => return Err(format!("line {ln}: unknown row `{head}`")),
                };
                let mut row = Row {
                    kind,
                    coeffs: Vec::new(),
                    makespan_coeff: 0.0,
                    sense: Sense::Eq,
                    rhs: 0.0,
                };
                let mut it = rest.iter();
                let mut negate = false;
                while let Some(&w) = it.next() {
                    match w {
                        "+" => negate = false,
                        "-" => negate = true,
                        "=" | "<=" => {
                            row.sense = if w == "=" { Sense::Eq } else { Sense::Le };
                            row.rhs = num(it.next().copied(), ln)?;
                        }
                        c => {
                            let c: f64 = num(Some(c), ln)?;
                            let c = if negate { -c } else { c };
                            match it.next() {
                                Some(&"M") => row.makespan_coeff = c,
                                Some(x) => {
                                    let v = *index.get(*x).ok_or_else(|| format!("line {ln}: undeclared `{x}`"))?;
                                    row.coeffs.push((v, c));
                                }
                                None => return Err(format!("line {ln}: dangling coefficient")),
                            }
                        }
                    }
                }
                inst.rows.push(row);
            }
            [] => {}
        }
    }
    Ok(inst)
}
