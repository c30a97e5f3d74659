//! Cut a site into weekly chronicles and split them for calibration and
//! simulation.
//!
//!     cargo run --example chronicles_and_split

use std::sync::Arc;

use gridbench::data::{build_chronicles, split_weeks, synth_site, SynthSpec};

fn main() -> gridbench::Result<()> {
    let rec = Arc::new(synth_site(&SynthSpec::new("demo", 10), 1)?);
    let (chronicles, report) = build_chronicles(&rec);
    println!("{} complete weeks, {} dropped", report.complete_weeks, report.dropped_weeks);

    let split = split_weeks(&chronicles, 42)?;
    println!("calibration weeks {:?}", split.calibration);
    println!("simulation weeks  {:?}", split.simulation);

    let week = &chronicles[0];
    let info = week.step(0);
    println!(
        "week {} starts {}; at step 0 the latest observation is {:.3} kWh net, the lead-1 forecast {:.3}, realized {:.3}",
        week.week_id(),
        week.monday(),
        info.past_net(0),
        info.forecast_net(1),
        week.realized(1).net()
    );
    Ok(())
}
