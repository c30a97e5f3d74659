//! Calibrate per-slot noise, compute the SDP value function, inspect it
//! and run the policy.
//!
//!     cargo run --example sdp_value_function

use std::sync::Arc;

use gridbench::calib::fit_noise_model;
use gridbench::controllers::{monotonicity_violations, sdp_value_function, GridConfig, Sdp};
use gridbench::data::{build_chronicles, split_weeks, synth_site, SynthSpec};
use gridbench::kmeans::KMeansConfig;
use gridbench::simulate::simulate;
use gridbench::tariff::Tariff;

fn main() -> gridbench::Result<()> {
    let rec = Arc::new(synth_site(&SynthSpec::new("demo", 10), 2)?);
    let (chronicles, _) = build_chronicles(&rec);
    let (calib, sim) = split_weeks(&chronicles, 42)?.apply(chronicles)?;

    let noise = fit_noise_model(&calib, &KMeansConfig::default(), 0)?;
    let d = noise.at_step(4 * 19);
    println!("net demand after 19:00 on Monday: {} values, mean {:.3}", d.len(), d.mean());

    let tariff = Arc::new(Tariff::default_schedule());
    let grid = GridConfig::default();
    let vf = Arc::new(sdp_value_function(&noise, &rec.battery, &tariff, &grid)?);
    println!("value at Monday 00:00 by SoC:");
    for (ix, x) in vf.soc_grid.iter().enumerate() {
        println!("  {x:.2}  {:8.3}", vf.at(0, ix, 0));
    }
    println!("monotonicity violations: {}", monotonicity_violations(&vf, 1e-9));

    let mut sdp = Sdp::new(rec.battery, tariff.clone(), Arc::new(noise), vf, grid)?;
    for week in &sim {
        let r = simulate(&mut sdp, week, &rec.battery, &tariff);
        println!("week {} cost {:.3} ({:.1e} s per decision)", r.week_id, r.management_cost, r.online_time);
    }
    Ok(())
}
