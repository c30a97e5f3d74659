//! Gains, anticipative gain bounds, scores and forecast predictability.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::SiteRecord;
use crate::error::{Error, Result};
use crate::simulate::SimResult;

/// Sites whose gain bound is below this (€) are not scored.
pub const MIN_UPPER: f64 = 1e-6;

pub const DUMMY: &str = "dummy";
pub const ANTICIPATIVE: &str = "anticipative";

fn week_set(results: &[&SimResult]) -> BTreeSet<u32> {
    results.iter().map(|r| r.week_id).collect()
}

/// Mean weekly saving of a controller over the dummy on the same weeks.
pub fn gain(results: &[&SimResult], dummy: &[&SimResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::Validation("no simulation weeks to score".into()));
    }
    let weeks = week_set(results);
    if weeks != week_set(dummy) || weeks.len() != results.len() || dummy.len() != results.len() {
        return Err(Error::Validation(
            "controller and dummy were simulated on different weeks".into(),
        ));
    }
    if let Some(r) = results.iter().chain(dummy).find(|r| r.is_faulted()) {
        return Err(Error::Validation(format!(
            "{} faulted on week {}",
            r.controller, r.week_id
        )));
    }
    let dummy_cost: BTreeMap<u32, f64> = dummy.iter().map(|r| (r.week_id, r.management_cost)).collect();
    let total: f64 = results
        .iter()
        .map(|r| dummy_cost[&r.week_id] - r.management_cost)
        .sum();
    Ok(total / results.len() as f64)
}

/// Gain relative to the anticipative bound; `None` when the bound is too
/// small for the ratio to mean anything.
pub fn site_score(gain: f64, upper: f64) -> Option<f64> {
    (upper >= MIN_UPPER).then(|| gain / upper)
}

pub fn aggregate_score(site_scores: &[f64]) -> Result<f64> {
    if site_scores.is_empty() {
        return Err(Error::Validation("no site could be scored".into()));
    }
    Ok(site_scores.iter().sum::<f64>() / site_scores.len() as f64)
}

/// Root mean square forecast error of the min-max normalized net demand,
/// over every issue row and lead whose target lies inside the record.
pub fn rmse(rec: &SiteRecord) -> Result<f64> {
    let z = rec.net_demand();
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::Domain(format!(
            "site {}: constant net demand, normalization undefined",
            rec.site_id
        )));
    }
    let leads = rec.leads().min(crate::model::FORECAST_LEADS);
    let mut sum = 0.0;
    let mut count = 0usize;
    for t in 0..z.len() {
        for k in 1..=leads {
            if t + k >= z.len() {
                break;
            }
            let err = (z[t + k] - rec.forecast_net(t, k)) / range;
            sum += err * err;
            count += 1;
        }
    }
    Ok((sum / count as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteRow {
    pub site_id: String,
    pub controller: String,
    pub weeks: usize,
    pub gain: Option<f64>,
    pub upper: Option<f64>,
    pub score: Option<f64>,
    pub rmse: Option<f64>,
    /// Why the row has no score.
    pub note: Option<String>,
    /// Seeds and artifact hashes needed to re-run the cell.
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerRow {
    pub controller: String,
    pub score: Option<f64>,
    pub sites_scored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub controllers: Vec<ControllerRow>,
    pub sites: Vec<SiteRow>,
    pub metadata: BTreeMap<String, String>,
}

impl ScoreReport {
    pub fn controller(&self, name: &str) -> Option<&ControllerRow> {
        self.controllers.iter().find(|c| c.controller == name)
    }

    pub fn site(&self, site: &str, controller: &str) -> Option<&SiteRow> {
        self.sites
            .iter()
            .find(|r| r.site_id == site && r.controller == controller)
    }
}

/// Scores every controller found in `results`.
///
/// `results` must hold the dummy and anticipative runs of every site.
pub fn score_results(
    results: &[SimResult],
    rmse_by_site: &BTreeMap<String, f64>,
    metadata: BTreeMap<String, String>,
) -> Result<ScoreReport> {
    // by_key[site][controller] = results
    let mut by_key: BTreeMap<&str, BTreeMap<&str, Vec<&SimResult>>> = BTreeMap::new();
    for r in results {
        by_key
            .entry(&r.site_id)
            .or_default()
            .entry(&r.controller)
            .or_default()
            .push(r);
    }
    let controllers: BTreeSet<&str> = results.iter().map(|r| r.controller.as_str()).collect();
    let mut rows = Vec::new();
    for (site, per_ctrl) in &by_key {
        let dummy = per_ctrl.get(DUMMY).ok_or_else(|| {
            Error::Validation(format!("site {site} has no {DUMMY} results"))
        })?;
        let oracle = per_ctrl.get(ANTICIPATIVE).ok_or_else(|| {
            Error::Validation(format!("site {site} has no {ANTICIPATIVE} results"))
        })?;
        let upper = gain(oracle, dummy);
        for ctrl in &controllers {
            let mut row = SiteRow {
                site_id: site.to_string(),
                controller: ctrl.to_string(),
                weeks: 0,
                gain: None,
                upper: upper.as_ref().ok().copied(),
                score: None,
                rmse: rmse_by_site.get(*site).copied(),
                note: None,
                provenance: BTreeMap::new(),
            };
            match (per_ctrl.get(ctrl), &upper) {
                (None, _) => row.note = Some("not simulated".into()),
                (Some(_), Err(e)) => row.note = Some(format!("bound unavailable: {e}")),
                (Some(rs), Ok(up)) => {
                    row.weeks = rs.len();
                    match gain(rs, dummy) {
                        Err(e) => row.note = Some(e.to_string()),
                        Ok(g) => {
                            row.gain = Some(g);
                            row.score = site_score(g, *up);
                            if row.score.is_none() {
                                row.note = Some(format!("gain bound {up} below {MIN_UPPER}"));
                            }
                        }
                    }
                }
            }
            if let Some(n) = &row.note {
                log::warn!("{site} / {ctrl}: excluded from aggregation: {n}");
            }
            rows.push(row);
        }
    }
    rows.sort_by(|a, b| (&a.controller, &a.site_id).cmp(&(&b.controller, &b.site_id)));
    let controllers = controllers
        .iter()
        .map(|ctrl| {
            let scores: Vec<f64> = rows
                .iter()
                .filter(|r| r.controller == *ctrl)
                .filter_map(|r| r.score)
                .collect();
            ControllerRow {
                controller: ctrl.to_string(),
                score: aggregate_score(&scores).ok(),
                sites_scored: scores.len(),
            }
        })
        .collect();
    Ok(ScoreReport {
        controllers,
        sites: rows,
        metadata,
    })
}
