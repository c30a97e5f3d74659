use std::sync::Arc;

use chrono::{NaiveDate, NaiveDateTime};

use super::*;
use crate::error::Error;
use crate::model::{BatteryParams, WEEK_STEPS};

fn battery() -> BatteryParams {
    BatteryParams::new(20.0, 8.0, 0.95, 0.95).unwrap()
}

fn at(y: i32, m: u32, d: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(y, m, d)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap()
}

/// Record whose pv/demand encode the row index.
fn indexed_record(start: NaiveDateTime, rows: usize) -> SiteRecord {
    let pv: Vec<f64> = (0..rows).map(|r| r as f64).collect();
    let demand: Vec<f64> = (0..rows).map(|r| 2.0 * r as f64).collect();
    let leads = 96;
    let mut pv_fc = Vec::with_capacity(rows * leads);
    let mut demand_fc = Vec::with_capacity(rows * leads);
    for r in 0..rows {
        for k in 1..=leads {
            pv_fc.push((r + k) as f64);
            demand_fc.push(2.0 * (r + k) as f64);
        }
    }
    SiteRecord::new("idx", battery(), start, pv, demand, leads, pv_fc, demand_fc).unwrap()
}

#[test]
fn eight_days_from_sunday_give_one_week() {
    // 2018-04-01 is a Sunday.
    let rec = Arc::new(indexed_record(at(2018, 4, 1), 8 * 96));
    let (weeks, report) = build_chronicles(&rec);
    assert_eq!(weeks.len(), 1);
    assert_eq!(report.complete_weeks, 1);
    assert_eq!(weeks[0].monday(), at(2018, 4, 2));
}

#[test]
fn fifteen_days_from_sunday_give_two_weeks() {
    let rec = Arc::new(indexed_record(at(2018, 4, 1), 15 * 96));
    let (weeks, _) = build_chronicles(&rec);
    assert_eq!(weeks.len(), 2);
    assert_eq!(weeks[1].week_id(), 1);
}

#[test]
fn no_complete_week() {
    // Tuesday to the Wednesday of the following week.
    let rec = Arc::new(indexed_record(at(2018, 4, 3), 9 * 96));
    let (weeks, report) = build_chronicles(&rec);
    assert!(weeks.is_empty());
    assert_eq!(report.dropped_weeks, 2);
}

#[test]
fn six_days_are_insufficient_history() {
    let rows = 6 * 96;
    let err = SiteRecord::new(
        "short",
        battery(),
        at(2018, 4, 1),
        vec![0.0; rows],
        vec![0.0; rows],
        96,
        vec![0.0; rows * 96],
        vec![0.0; rows * 96],
    )
    .unwrap_err();
    assert!(matches!(err, Error::InsufficientHistory { available: 576, .. }));
}

#[test]
fn missing_leading_sunday_drops_week() {
    // Starts Monday 00:00: the first week has no preceding day.
    let rec = Arc::new(indexed_record(at(2018, 4, 2), 8 * 96));
    let (weeks, _) = build_chronicles(&rec);
    assert!(weeks.is_empty());
}

#[test]
fn step_windows_align_with_realizations() {
    let rec = Arc::new(indexed_record(at(2018, 4, 1), 15 * 96));
    let (weeks, _) = build_chronicles(&rec);
    for ch in &weeks {
        for t in [0usize, 1, 95, 96, 500, 671] {
            let info = ch.step(t);
            assert_eq!(info.past(0), ch.realized(t));
            assert_eq!(info.past(5), ch.site().observation(info_row(ch, t) - 5));
            // The lead-1 forecast targets w_{t+1}.
            assert_eq!(info.forecast(1), ch.realized(t + 1));
            assert_eq!(info.step(), t);
        }
        // Step 0 sees the whole preceding Sunday.
        let info = ch.step(0);
        assert_eq!(info.step(), 0);
        let sunday_first = ch.site().timestamp(info_row(ch, 0) - 95);
        assert_eq!(sunday_first, ch.monday() - chrono::Duration::days(1));
    }
}

fn info_row(ch: &Chronicle, t: usize) -> usize {
    // w_t lives on row monday_row + t - 1; row values encode the index.
    ch.realized(t).pv as usize
}

#[test]
fn net_series_lengths() {
    let rec = Arc::new(indexed_record(at(2018, 4, 1), 8 * 96));
    let (weeks, _) = build_chronicles(&rec);
    let ch = &weeks[0];
    assert_eq!(ch.realized_net_path().len(), WEEK_STEPS);
    let series = ch.net_series_with_history();
    assert_eq!(series.len(), 96 + WEEK_STEPS);
    assert_eq!(series[95], ch.realized(0).net());
    assert_eq!(series[96 + 671], ch.realized(672).net());
}

fn fake_weeks(n: usize) -> Vec<Chronicle> {
    let rec = Arc::new(indexed_record(at(2018, 4, 1), n * WEEK_STEPS + 96));
    let (weeks, _) = build_chronicles(&rec);
    assert_eq!(weeks.len(), n);
    weeks
}

#[test]
fn split_proportions() {
    let s = split_weeks(&fake_weeks(10), 42).unwrap();
    assert_eq!((s.simulation.len(), s.calibration.len()), (4, 6));
    let s = split_weeks(&fake_weeks(5), 42).unwrap();
    assert_eq!((s.simulation.len(), s.calibration.len()), (2, 3));
    assert!(s.simulation.is_disjoint(&s.calibration));
    assert_eq!(simulation_count(6), 3);
    assert_eq!(simulation_count(2), 1);
}

#[test]
fn split_is_deterministic() {
    let w = fake_weeks(12);
    assert_eq!(split_weeks(&w, 7).unwrap(), split_weeks(&w, 7).unwrap());
}

#[test]
fn split_needs_two_weeks() {
    assert!(split_weeks(&fake_weeks(1), 1).is_err());
}

#[test]
fn split_apply_tags_roles() {
    let w = fake_weeks(5);
    let s = split_weeks(&w, 3).unwrap();
    let (calib, sim) = s.apply(w).unwrap();
    assert_eq!(calib.len(), 3);
    assert_eq!(sim.len(), 2);
    for c in &calib {
        assert!(s.calibration.contains(&c.week_id()));
    }
}

#[test]
fn synth_without_noise_has_exact_forecasts() {
    let mut spec = SynthSpec::new("s", 1);
    spec.noise_scale = 0.0;
    spec.forecast_error_scale = 0.0;
    let rec = synth_site(&spec, 1).unwrap();
    for row in (0..rec.horizon() - 96).step_by(37) {
        let (fg, fd) = rec.forecast_row(row);
        for k in 1..=96 {
            let obs = rec.observation(row + k);
            assert_eq!(fg[k - 1], obs.pv);
            assert_eq!(fd[k - 1], obs.demand);
        }
    }
}

#[test]
fn synth_without_pv() {
    let mut spec = SynthSpec::new("s", 1);
    spec.pv_amplitude = 0.0;
    let rec = synth_site(&spec, 1).unwrap();
    assert!(rec.pv().iter().all(|&g| g == 0.0));
    assert_eq!(rec.net_demand(), rec.demand().to_vec());
}

#[test]
fn synth_is_deterministic_and_nonnegative() {
    let spec = SynthSpec::new("s", 2);
    let a = synth_site(&spec, 9).unwrap();
    let b = synth_site(&spec, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.horizon(), 1344 + 96);
    assert!(a.pv().iter().chain(a.demand()).all(|&v| v >= 0.0));
    let c = synth_site(&spec, 10).unwrap();
    assert_ne!(a, c);
}

#[test]
fn synth_rejects_bad_amplitudes() {
    let mut spec = SynthSpec::new("s", 1);
    spec.demand_level = 0.0;
    assert!(synth_site(&spec, 1).is_err());
    let mut spec = SynthSpec::new("s", 1);
    spec.pv_amplitude = -1.0;
    assert!(synth_site(&spec, 1).is_err());
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("site.csv");
    let rec = synth_site(&SynthSpec::new("rt", 2), 5).unwrap();
    write_site(&rec, &path).unwrap();
    let back = ingest_site(&path, Schema::Canonical).unwrap();
    assert_eq!(back, rec);
    assert_eq!(back.horizon(), 1344 + 96);
    let path2 = dir.path().join("again.csv");
    write_site(&back, &path2).unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(&path2).unwrap()
    );
}

fn corrupt(path: &std::path::Path, line_no: usize, col: usize, value: &str) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut fields: Vec<String> = lines[line_no - 1].split(',').map(str::to_string).collect();
    fields[col] = value.to_string();
    lines[line_no - 1] = fields.join(",");
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn ingest_rejects_nan_demand_naming_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("site.csv");
    write_site(&synth_site(&SynthSpec::new("bad", 1), 5).unwrap(), &path).unwrap();
    corrupt(&path, 10, 2, "NaN");
    match ingest_site(&path, Schema::Canonical).unwrap_err() {
        Error::Ingest { row, column, .. } => {
            assert_eq!(row, 10);
            assert_eq!(column, "demand_kwh");
        }
        e => panic!("unexpected error {e}"),
    }
}

#[test]
fn ingest_rejects_missing_and_negative_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("site.csv");
    write_site(&synth_site(&SynthSpec::new("bad", 1), 5).unwrap(), &path).unwrap();
    corrupt(&path, 4, 1, "-1");
    assert!(matches!(
        ingest_site(&path, Schema::Canonical),
        Err(Error::Ingest { row: 4, .. })
    ));
    write_site(&synth_site(&SynthSpec::new("bad", 1), 5).unwrap(), &path).unwrap();
    corrupt(&path, 7, 50, "");
    assert!(matches!(
        ingest_site(&path, Schema::Canonical),
        Err(Error::Ingest { row: 7, .. })
    ));
}

#[test]
fn ingest_rejects_non_monotone_timestamps() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("site.csv");
    write_site(&synth_site(&SynthSpec::new("bad", 1), 5).unwrap(), &path).unwrap();
    corrupt(&path, 5, 0, "2018-04-01T00:00:00");
    assert!(matches!(
        ingest_site(&path, Schema::Canonical),
        Err(Error::Ingest { row: 5, .. })
    ));
}

#[test]
fn ingest_rejects_wrong_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("site.csv");
    write_site(&synth_site(&SynthSpec::new("bad", 1), 5).unwrap(), &path).unwrap();
    corrupt(&path, 1, 1, "solar");
    assert!(matches!(
        ingest_site(&path, Schema::Canonical),
        Err(Error::Schema { .. })
    ));
}

#[test]
fn upstream_adapter_reads_published_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("7.csv");
    let rec = synth_site(&SynthSpec::new("7", 1), 3).unwrap();
    let mut text = String::from("timestamp,actual_consumption,actual_pv");
    for k in 0..96 {
        text.push_str(&format!(",load_{k:02}"));
    }
    for k in 0..96 {
        text.push_str(&format!(",pv_{k:02}"));
    }
    text.push('\n');
    for row in 0..rec.horizon() {
        let o = rec.observation(row);
        let (fg, fd) = rec.forecast_row(row);
        text.push_str(&format!(
            "{},{},{}",
            rec.timestamp(row).format("%Y-%m-%d %H:%M:%S"),
            o.demand,
            o.pv
        ));
        for v in fd.iter().chain(fg) {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    std::fs::write(&path, text).unwrap();
    std::fs::write(
        sidecar_path(&path),
        serde_json::to_string(&SiteMeta::from_record(&rec)).unwrap(),
    )
    .unwrap();
    let back = ingest_site(&path, Schema::Upstream).unwrap();
    assert_eq!(back, rec);
}
