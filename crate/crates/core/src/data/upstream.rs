//! Adapter for the published per-site benchmark files.
//!
//! The column names below follow the public release as we understand it;
//! they are configurable through [`UpstreamLayout`] because the layout is
//! not part of any formal specification. Battery parameters are taken from
//! the same JSON sidecar as canonical files.

use std::collections::HashMap;
use std::path::Path;

use chrono::{Duration, NaiveDateTime};

use super::csv_io::read_meta;
use super::site::SiteRecord;
use crate::error::{Error, Result};
use crate::model::FORECAST_LEADS;

#[derive(Debug, Clone)]
pub struct UpstreamLayout {
    pub timestamp: String,
    pub demand: String,
    pub pv: String,
    /// Forecast column prefix; lead `k` reads column `{prefix}{k-1:02}`.
    pub demand_forecast_prefix: String,
    pub pv_forecast_prefix: String,
    /// Multiplier bringing file values to kWh per step.
    pub scale: f64,
}

impl Default for UpstreamLayout {
    fn default() -> Self {
        UpstreamLayout {
            timestamp: "timestamp".into(),
            demand: "actual_consumption".into(),
            pv: "actual_pv".into(),
            demand_forecast_prefix: "load_".into(),
            pv_forecast_prefix: "pv_".into(),
            scale: 1.0,
        }
    }
}

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
}

pub fn read_upstream(path: &Path, layout: &UpstreamLayout) -> Result<SiteRecord> {
    let meta = read_meta(path)?;
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let index: HashMap<&str, usize> = header
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();
    let col = |name: &str| {
        index.get(name).copied().ok_or_else(|| Error::Schema {
            path: path.to_path_buf(),
            message: format!("missing column `{name}`"),
        })
    };
    let ts_col = col(&layout.timestamp)?;
    let d_col = col(&layout.demand)?;
    let g_col = col(&layout.pv)?;
    let d_fc: Vec<usize> = (0..FORECAST_LEADS)
        .map(|k| col(&format!("{}{k:02}", layout.demand_forecast_prefix)))
        .collect::<Result<_>>()?;
    let g_fc: Vec<usize> = (0..FORECAST_LEADS)
        .map(|k| col(&format!("{}{k:02}", layout.pv_forecast_prefix)))
        .collect::<Result<_>>()?;

    let mut rows: Vec<(NaiveDateTime, csv::StringRecord)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let ts = parse_timestamp(&rec[ts_col]).ok_or_else(|| Error::Ingest {
            path: path.to_path_buf(),
            row: i + 2,
            column: layout.timestamp.clone(),
            message: format!("bad timestamp `{}`", &rec[ts_col]),
        })?;
        rows.push((ts, rec));
    }
    rows.sort_by_key(|(ts, _)| *ts);

    let value = |rec: &csv::StringRecord, row: usize, c: usize| -> Result<f64> {
        rec[c]
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(|v| v * layout.scale)
            .ok_or_else(|| Error::Ingest {
                path: path.to_path_buf(),
                row,
                column: header[c].clone(),
                message: format!("not a finite number: `{}`", &rec[c]),
            })
    };

    let start = rows.first().map(|r| r.0).ok_or(Error::InsufficientHistory {
        available: 0,
        required: super::site::MIN_HISTORY,
    })?;
    let (mut pv, mut demand, mut pv_fc, mut demand_fc) = (vec![], vec![], vec![], vec![]);
    for (i, (ts, rec)) in rows.iter().enumerate() {
        let row = i + 2;
        if *ts != start + Duration::minutes(15 * i as i64) {
            return Err(Error::Ingest {
                path: path.to_path_buf(),
                row,
                column: layout.timestamp.clone(),
                message: "gap or duplicate in the 15-minute cadence".into(),
            });
        }
        let g = value(rec, row, g_col)?;
        let d = value(rec, row, d_col)?;
        if g < 0.0 || d < 0.0 {
            return Err(Error::Ingest {
                path: path.to_path_buf(),
                row,
                column: if g < 0.0 { layout.pv.clone() } else { layout.demand.clone() },
                message: "negative value".into(),
            });
        }
        pv.push(g);
        demand.push(d);
        for &c in &g_fc {
            pv_fc.push(value(rec, row, c)?);
        }
        for &c in &d_fc {
            demand_fc.push(value(rec, row, c)?);
        }
    }
    SiteRecord::new(
        meta.site_id.clone(),
        meta.battery()?,
        start,
        pv,
        demand,
        FORECAST_LEADS,
        pv_fc,
        demand_fc,
    )
}
