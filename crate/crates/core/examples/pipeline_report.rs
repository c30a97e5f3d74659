//! The on-disk pipeline the command-line tool drives: sites, split,
//! calibration artifacts, results, scores and report tables.
//!
//!     cargo run --release --example pipeline_report [DIR]

use std::sync::Arc;

use gridbench::controllers::GridConfig;
use gridbench::data::{synth_fleet, SynthSpec};
use gridbench::pipeline::{ArtifactKind, CalibrationSettings, ReportFormat, Workspace};
use gridbench::simulate::ControllerSpec;
use gridbench::tariff::Tariff;

fn main() -> gridbench::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("gridbench-pipeline-demo"));
    let ws = Workspace::new(&dir);
    ws.write_sites(&synth_fleet(3, &SynthSpec::new("site", 10), 11)?)?;
    ws.split(42)?;

    let tariff = Arc::new(Tariff::default_schedule());
    let kinds = [ArtifactKind::Scenario, ArtifactKind::Noise, ArtifactKind::Ar(1)];
    ws.calibrate(&kinds, &CalibrationSettings::default(), &tariff)?;

    let specs = ["mpc", "olfc-10", "sdp", "sdpar-1"]
        .iter()
        .map(|s| ControllerSpec::parse(s))
        .collect::<gridbench::Result<Vec<_>>>()?;
    ws.simulate(&specs, tariff.clone(), GridConfig::default(), 0, 2)?;
    // Dummy and anticipative runs are added here when missing.
    let report = ws.score(tariff, GridConfig::default(), 0)?;
    for row in report.sites.iter().filter(|r| r.controller == "sdpar-1") {
        println!("{} rmse {:.3} score {:.3}", row.site_id, row.rmse.unwrap_or(f64::NAN), row.score.unwrap_or(f64::NAN));
    }
    for path in ws.report(ReportFormat::Csv)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
