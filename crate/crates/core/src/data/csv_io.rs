//! Canonical site files.
//!
//! A site is a CSV file with header
//! `timestamp,pv_kwh,demand_kwh,pv_fc_01..pv_fc_96,demand_fc_01..demand_fc_96`
//! and a JSON sidecar with the same stem holding the battery parameters.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::site::SiteRecord;
use super::upstream;
use crate::error::{Error, Result};
use crate::model::BatteryParams;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    /// The format written by this crate.
    #[default]
    Canonical,
    /// Adapter for the published per-site benchmark files.
    Upstream,
}

/// Battery metadata stored next to each site CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteMeta {
    pub site_id: String,
    pub capacity_kwh: f64,
    pub max_power_kw: f64,
    pub rho_c: f64,
    pub rho_d: f64,
}

impl SiteMeta {
    pub fn from_record(rec: &SiteRecord) -> Self {
        SiteMeta {
            site_id: rec.site_id.clone(),
            capacity_kwh: rec.battery.capacity,
            max_power_kw: rec.battery.max_power,
            rho_c: rec.battery.rho_c,
            rho_d: rec.battery.rho_d,
        }
    }

    pub fn battery(&self) -> Result<BatteryParams> {
        BatteryParams::new(self.capacity_kwh, self.max_power_kw, self.rho_c, self.rho_d)
    }
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn read_meta(csv_path: &Path) -> Result<SiteMeta> {
    let path = sidecar_path(csv_path);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Schema {
        path: path.clone(),
        message: format!("cannot read metadata sidecar: {e}"),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        path,
        message: format!("bad metadata sidecar: {e}"),
    })
}

fn lead_label(k: usize, leads: usize) -> String {
    let width = leads.to_string().len().max(2);
    format!("{k:0width$}")
}

pub fn canonical_header(leads: usize) -> Vec<String> {
    let mut h = vec![
        "timestamp".to_string(),
        "pv_kwh".to_string(),
        "demand_kwh".to_string(),
    ];
    h.extend((1..=leads).map(|k| format!("pv_fc_{}", lead_label(k, leads))));
    h.extend((1..=leads).map(|k| format!("demand_fc_{}", lead_label(k, leads))));
    h
}

/// Reads a site file and its sidecar.
pub fn ingest_site(path: &Path, schema: Schema) -> Result<SiteRecord> {
    match schema {
        Schema::Canonical => read_canonical(path),
        Schema::Upstream => upstream::read_upstream(path, &upstream::UpstreamLayout::default()),
    }
}

fn read_canonical(path: &Path) -> Result<SiteRecord> {
    let meta = read_meta(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let n_fc = header.len().saturating_sub(3);
    if n_fc == 0 || !n_fc.is_multiple_of(2) {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: format!("unexpected column count {}", header.len()),
        });
    }
    let leads = n_fc / 2;
    let expected = canonical_header(leads);
    if header != expected {
        let col = header
            .iter()
            .zip(&expected)
            .position(|(a, b)| a != b)
            .unwrap_or(0);
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: format!(
                "column {} is `{}`, expected `{}`",
                col + 1,
                header[col],
                expected[col]
            ),
        });
    }

    let columns = ColumnReader { path, header: &header };
    let mut start = None;
    let mut prev: Option<NaiveDateTime> = None;
    let mut pv = Vec::new();
    let mut demand = Vec::new();
    let mut pv_fc = Vec::new();
    let mut demand_fc = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        if record.len() != header.len() {
            return Err(columns.err(line, 0, "wrong number of fields"));
        }
        let ts = NaiveDateTime::parse_from_str(record[0].trim(), TIMESTAMP_FORMAT)
            .map_err(|e| columns.err(line, 0, &format!("bad timestamp: {e}")))?;
        if let Some(p) = prev {
            if ts != p + Duration::minutes(15) {
                return Err(columns.err(
                    line,
                    0,
                    "timestamps must increase by exactly 15 minutes",
                ));
            }
        } else {
            start = Some(ts);
        }
        prev = Some(ts);
        let g = columns.value(&record, line, 1)?;
        let d = columns.value(&record, line, 2)?;
        if g < 0.0 {
            return Err(columns.err(line, 1, "negative value"));
        }
        if d < 0.0 {
            return Err(columns.err(line, 2, "negative value"));
        }
        pv.push(g);
        demand.push(d);
        for c in 3..3 + leads {
            pv_fc.push(columns.value(&record, line, c)?);
        }
        for c in 3 + leads..3 + 2 * leads {
            demand_fc.push(columns.value(&record, line, c)?);
        }
    }
    let start = start.ok_or(Error::InsufficientHistory {
        available: 0,
        required: super::site::MIN_HISTORY,
    })?;
    SiteRecord::new(
        meta.site_id.clone(),
        meta.battery()?,
        start,
        pv,
        demand,
        leads,
        pv_fc,
        demand_fc,
    )
}

struct ColumnReader<'a> {
    path: &'a Path,
    header: &'a [String],
}

impl ColumnReader<'_> {
    fn err(&self, line: usize, col: usize, message: &str) -> Error {
        Error::Ingest {
            path: self.path.to_path_buf(),
            row: line,
            column: self.header[col].clone(),
            message: message.to_string(),
        }
    }

    fn value(&self, record: &csv::StringRecord, line: usize, col: usize) -> Result<f64> {
        let raw = record[col].trim();
        if raw.is_empty() {
            return Err(self.err(line, col, "missing value"));
        }
        let v: f64 = raw
            .parse()
            .map_err(|_| self.err(line, col, &format!("not a number: `{raw}`")))?;
        if !v.is_finite() {
            return Err(self.err(line, col, &format!("non-finite value `{raw}`")));
        }
        Ok(v)
    }
}

/// Writes the canonical CSV and its JSON sidecar.
pub fn write_site(rec: &SiteRecord, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut out = BufWriter::new(File::create(path)?);
    let leads = rec.leads();
    writeln!(out, "{}", canonical_header(leads).join(","))?;
    let mut line = String::with_capacity(4096);
    for row in 0..rec.horizon() {
        line.clear();
        let obs = rec.observation(row);
        let (pv_fc, demand_fc) = rec.forecast_row(row);
        line.push_str(&rec.timestamp(row).format(TIMESTAMP_FORMAT).to_string());
        for v in [obs.pv, obs.demand].iter().chain(pv_fc).chain(demand_fc) {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    let meta = serde_json::to_string_pretty(&SiteMeta::from_record(rec))?;
    std::fs::write(sidecar_path(path), meta + "\n")?;
    Ok(())
}
