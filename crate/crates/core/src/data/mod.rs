//! Site records, weekly chronicles, calibration/simulation splits and
//! synthetic sites.

mod chronicle;
mod csv_io;
mod site;
mod split;
mod synth;
pub mod upstream;

pub use chronicle::{build_chronicles, CalibrationWeek, Chronicle, ChronicleReport, SimulationWeek};
pub use csv_io::{
    canonical_header, ingest_site, read_meta, sidecar_path, write_site, Schema, SiteMeta,
    TIMESTAMP_FORMAT,
};
pub use site::{SiteRecord, MIN_HISTORY};
pub use split::{simulation_count, split_weeks, Split};
pub use synth::{synth_fleet, synth_site, SynthSpec};

#[cfg(test)]
mod tests;
