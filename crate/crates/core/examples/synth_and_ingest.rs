//! Generate a synthetic site, write it as canonical CSV and read it back.
//!
//!     cargo run --example synth_and_ingest

use gridbench::data::{ingest_site, synth_site, write_site, Schema, SynthSpec};

fn main() -> gridbench::Result<()> {
    let mut spec = SynthSpec::new("demo", 3);
    spec.forecast_error_scale = 0.15;
    let rec = synth_site(&spec, 7)?;

    let dir = std::env::temp_dir().join("gridbench-synth-demo");
    let path = dir.join("demo.csv");
    write_site(&rec, &path)?;
    let back = ingest_site(&path, Schema::Canonical)?;
    assert_eq!(back, rec);

    let z = rec.net_demand();
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    println!("{} rows from {} ({} forecast leads)", rec.horizon(), rec.start(), rec.leads());
    println!("mean net demand {mean:.3} kWh per quarter hour");
    println!("battery: {:?}", rec.battery);
    println!("wrote {} and its sidecar", path.display());
    Ok(())
}
