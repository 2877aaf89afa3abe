//! Simulation studies, report emission and data ingestion for the
//! `penselect` command-line tool.

pub mod data;
pub mod report;
pub mod sim;
