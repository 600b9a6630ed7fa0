//! Workload JSON and profile CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use jointplan_core::profile::ProfileKey;
use jointplan_core::{Latency, ProfileTable, Provenance, Workload};

pub const PROFILE_HEADER: &str = "job,technique,gpus,latency_s";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Profile {
        path: PathBuf,
        #[source]
        source: ProfileParseError,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileParseError {
    #[error("line {0}: malformed profile row")]
    ParseError(usize),
    #[error("line {0}: latency must be positive")]
    NegativeLatency(usize),
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    fs::write(path, contents).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses and validates a workload file.
pub fn load_workload(path: &Path) -> Result<Workload, IoError> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn workload_json(workload: &Workload) -> String {
    let mut s = serde_json::to_string_pretty(workload).expect("workloads serialize");
    s.push('\n');
    s
}

pub fn save_workload(path: &Path, workload: &Workload) -> Result<(), IoError> {
    write_file(path, &workload_json(workload))
}

/// Parses profile CSV. The header is required; `inf` marks an infeasible entry.
pub fn parse_profiles(text: &str) -> Result<ProfileTable, ProfileParseError> {
    let mut table = ProfileTable::new(Provenance::Ingested);
    let mut lines = text.split('\n').enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == PROFILE_HEADER => {}
        _ => return Err(ProfileParseError::ParseError(1)),
    }
    for (i, line) in lines {
        let n = i + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let [job, technique, gpus, latency] = fields.as_slice() else {
            return Err(ProfileParseError::ParseError(n));
        };
        if job.is_empty() || technique.is_empty() {
            return Err(ProfileParseError::ParseError(n));
        }
        let gpus: u32 = gpus.parse().map_err(|_| ProfileParseError::ParseError(n))?;
        if gpus == 0 {
            return Err(ProfileParseError::ParseError(n));
        }
        let latency = if *latency == "inf" {
            Latency::Infeasible
        } else {
            let s: f64 = latency.parse().map_err(|_| ProfileParseError::ParseError(n))?;
            if s.is_nan() || s.is_infinite() {
                return Err(ProfileParseError::ParseError(n));
            }
            if s <= 0.0 {
                return Err(ProfileParseError::NegativeLatency(n));
            }
            Latency::Seconds(s)
        };
        table
            .insert(ProfileKey::new(job, technique, gpus), latency)
            .map_err(|_| ProfileParseError::NegativeLatency(n))?;
    }
    Ok(table)
}

pub fn load_profiles(path: &Path) -> Result<ProfileTable, IoError> {
    parse_profiles(&read(path)?).map_err(|source| IoError::Profile {
        path: path.to_path_buf(),
        source,
    })
}

/// Renders a table in the format [`parse_profiles`] reads, rows in key order.
pub fn profiles_csv(table: &ProfileTable) -> String {
    let mut out = String::from(PROFILE_HEADER);
    out.push('\n');
    for (key, latency) in table.iter() {
        let _ = write!(out, "{},{},{},", key.job, key.technique, key.gpus);
        match latency {
            Latency::Seconds(s) => {
                let _ = writeln!(out, "{s}");
            }
            Latency::Infeasible => out.push_str("inf\n"),
        }
    }
    out
}
