//! Solve one lookahead problem by hand, then run MPC over a week and
//! compare it with doing nothing and with perfect foresight.
//!
//!     cargo run --example lookahead_mpc

use std::sync::Arc;

use gridbench::controllers::{anticipative_cost, solve_plan, LookaheadProblem, Mpc};
use gridbench::data::{build_chronicles, synth_site, SynthSpec};
use gridbench::model::{BatteryParams, Dummy, StateOfCharge};
use gridbench::simulate::simulate;
use gridbench::tariff::Tariff;

fn main() -> gridbench::Result<()> {
    // Cheap power at night, a surplus at noon, an evening peak.
    let battery = BatteryParams::new(10.0, 8.0, 0.95, 0.95)?;
    let tariff = Tariff::default_schedule();
    let scenarios = vec![vec![1.0, -2.0, -1.5, 2.5, 3.0]];
    let plan = solve_plan(&LookaheadProblem {
        start_step: 4 * 20,
        soc: StateOfCharge::EMPTY,
        scenarios: &scenarios,
        probabilities: &[1.0],
        battery: &battery,
        tariff: &tariff,
    })?;
    let controls: Vec<String> = plan.controls.iter().map(|u| format!("{u:+.3}")).collect();
    println!("plan [{}] kWh costs {:.4}", controls.join(", "), plan.value);

    let rec = Arc::new(synth_site(&SynthSpec::new("demo", 2), 3)?);
    let (weeks, _) = build_chronicles(&rec);
    let week = gridbench::data::SimulationWeek::new(weeks[0].clone());
    let tariff = Arc::new(tariff);
    let mut mpc = Mpc::new(rec.battery, tariff.clone(), 96)?;
    let with_mpc = simulate(&mut mpc, &week, &rec.battery, &tariff);
    let idle = simulate(&mut Dummy, &week, &rec.battery, &tariff);
    let bound = anticipative_cost(&week, &rec.battery, &tariff)?;
    println!("dummy        {:.3}", idle.management_cost);
    println!("mpc          {:.3}", with_mpc.management_cost);
    println!("anticipative {bound:.3}");
    println!("mpc captures {:.1}% of the attainable gain", 100.0 * (idle.management_cost - with_mpc.management_cost) / (idle.management_cost - bound));
    Ok(())
}
