//! Fit per-slot AR models of the net demand and run SDP-AR.
//!
//!     cargo run --example sdpar_calibration

use std::sync::Arc;

use gridbench::calib::{fit_ar_model, ArConfig};
use gridbench::controllers::{sdpar_value_function, GridConfig, SdpAr};
use gridbench::data::{build_chronicles, split_weeks, synth_site, SynthSpec};
use gridbench::simulate::simulate;
use gridbench::tariff::Tariff;

fn main() -> gridbench::Result<()> {
    let rec = Arc::new(synth_site(&SynthSpec::new("demo", 10), 2)?);
    let (chronicles, _) = build_chronicles(&rec);
    let (calib, sim) = split_weeks(&chronicles, 42)?.apply(chronicles)?;

    let tariff = Arc::new(Tariff::default_schedule());
    let grid = GridConfig::default();
    for order in [1, 2] {
        let ar = fit_ar_model(&calib, &ArConfig::new(order))?;
        let noon = ar.at_step(4 * 12);
        println!(
            "AR({order}): pooling +/-{} steps, lag range {:.2}..{:.2}, noon coefficients {:?}, intercept {:.3}",
            ar.pooling, ar.lag_range.0, ar.lag_range.1, noon.coefficients, noon.intercept
        );
        let vf = Arc::new(sdpar_value_function(&ar, &rec.battery, &tariff, &grid)?);
        let mut ctrl = SdpAr::new(rec.battery, tariff.clone(), Arc::new(ar), vf, grid)?;
        let cost: f64 = sim
            .iter()
            .map(|w| simulate(&mut ctrl, w, &rec.battery, &tariff).management_cost)
            .sum();
        println!("  mean weekly cost {:.3}", cost / sim.len() as f64);
    }
    Ok(())
}
