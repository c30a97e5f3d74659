//! Fit the forecast-error scenario model and look at what OLFC plans with.
//!
//!     cargo run --example olfc_scenarios

use std::sync::Arc;

use gridbench::controllers::Olfc;
use gridbench::data::{build_chronicles, split_weeks, synth_site, SynthSpec};
use gridbench::scenario::{fit_scenario_model, merge_duplicates, sample_scenarios, ScenarioConfig};
use gridbench::seed;
use gridbench::simulate::simulate;
use gridbench::tariff::Tariff;

fn main() -> gridbench::Result<()> {
    let rec = Arc::new(synth_site(&SynthSpec::new("demo", 8), 5)?);
    let (chronicles, _) = build_chronicles(&rec);
    let (calib, sim) = split_weeks(&chronicles, 42)?.apply(chronicles)?;
    let model = Arc::new(fit_scenario_model(&calib, &ScenarioConfig::default())?);
    println!("error clusters at leads {:?}", model.separators);

    let info = sim[0].step(40);
    let mut rng = seed::stream(0, &["example"]);
    let batch = merge_duplicates(sample_scenarios(&model, &info, 10, &mut rng));
    for s in &batch {
        println!(
            "p={:.3}  next hour {:?}",
            s.probability,
            s.net_demand[..4].iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>()
        );
    }

    let tariff = Arc::new(Tariff::default_schedule());
    let mut olfc = Olfc::new(rec.battery, tariff.clone(), 96, 10, model, seed::stream(0, &["olfc"]))?;
    let r = simulate(&mut olfc, &sim[0], &rec.battery, &tariff);
    println!("olfc-10 week cost {:.3}", r.management_cost);
    Ok(())
}
