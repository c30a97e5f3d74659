//! Run every controller on a small fleet in parallel and score them.
//!
//!     cargo run --release --example benchmark

use std::sync::Arc;

use gridbench::calib::{fit_ar_model, fit_noise_model, ArConfig};
use gridbench::controllers::{sdp_value_function, sdpar_value_function, GridConfig};
use gridbench::data::{build_chronicles, split_weeks, synth_fleet, SynthSpec};
use gridbench::kmeans::KMeansConfig;
use gridbench::scenario::{fit_scenario_model, ScenarioConfig};
use gridbench::scoring::score_results;
use gridbench::simulate::{run_benchmark, BenchmarkPlan, ControllerSpec, SiteArtifacts, SiteContext};
use gridbench::tariff::Tariff;

fn main() -> gridbench::Result<()> {
    let tariff = Arc::new(Tariff::default_schedule());
    let grid = GridConfig::default();
    let mut sites = Vec::new();
    for rec in synth_fleet(4, &SynthSpec::new("site", 10), 3)? {
        let rec = Arc::new(rec);
        let (chronicles, _) = build_chronicles(&rec);
        let (calib, weeks) = split_weeks(&chronicles, 42)?.apply(chronicles)?;
        let noise = fit_noise_model(&calib, &KMeansConfig::default(), 0)?;
        let sdp_vf = sdp_value_function(&noise, &rec.battery, &tariff, &grid)?;
        let ar = fit_ar_model(&calib, &ArConfig::new(1))?;
        let ar_vf = sdpar_value_function(&ar, &rec.battery, &tariff, &grid)?;
        let mut artifacts = SiteArtifacts {
            scenario: Some(Arc::new(fit_scenario_model(&calib, &ScenarioConfig::default())?)),
            sdp: Some((Arc::new(noise), Arc::new(sdp_vf))),
            ..SiteArtifacts::default()
        };
        artifacts.sdpar.insert(1, (Arc::new(ar), Arc::new(ar_vf)));
        sites.push(SiteContext { site_id: rec.site_id.clone(), battery: rec.battery, weeks, artifacts });
    }
    let controllers = ["dummy", "mpc", "olfc-10", "sdp", "sdpar-1", "anticipative"]
        .iter()
        .map(|s| ControllerSpec::parse(s))
        .collect::<gridbench::Result<Vec<_>>>()?;
    let plan = BenchmarkPlan { controllers, sites, tariff, grid, seed: 0 };
    let out = run_benchmark(&plan, 4)?;
    let report = score_results(&out.results, &Default::default(), Default::default())?;
    for c in &report.controllers {
        println!("{:<13} {:.3}", c.controller, c.score.unwrap_or(f64::NAN));
    }
    Ok(())
}
