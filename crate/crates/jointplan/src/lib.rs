//! File formats, workload generation, experiment runs and report writers
//! around [`jointplan_core`].

pub mod experiment;
pub mod generate;
pub mod io;
pub mod report;

pub use jointplan_core as core;
