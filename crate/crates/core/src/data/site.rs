use chrono::{Duration, NaiveDateTime};

use crate::error::{Error, Result};
use crate::model::{BatteryParams, Uncertainty, DAY_STEPS, FORECAST_LEADS, WEEK_STEPS};

/// Minimum number of rows: one week plus the leading day of history.
pub const MIN_HISTORY: usize = WEEK_STEPS + DAY_STEPS;

/// Historical observations and forecasts of one site.
///
/// Row `i` covers the quarter hour starting at `start + 15 min * i`.
/// Forecast row `i`, lead `k >= 1`, is the prediction issued at the end of
/// row `i` for row `i + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteRecord {
    pub site_id: String,
    pub battery: BatteryParams,
    start: NaiveDateTime,
    pv: Vec<f64>,
    demand: Vec<f64>,
    leads: usize,
    pv_fc: Vec<f64>,
    demand_fc: Vec<f64>,
}

impl SiteRecord {
    /// Forecast arrays are row-major, `rows * leads` values.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        site_id: impl Into<String>,
        battery: BatteryParams,
        start: NaiveDateTime,
        pv: Vec<f64>,
        demand: Vec<f64>,
        leads: usize,
        pv_fc: Vec<f64>,
        demand_fc: Vec<f64>,
    ) -> Result<Self> {
        battery.validate()?;
        let rows = pv.len();
        if demand.len() != rows {
            return Err(Error::InvalidParameter(
                "pv and demand series differ in length".into(),
            ));
        }
        if leads < FORECAST_LEADS {
            return Err(Error::InvalidParameter(format!(
                "forecasts must cover at least {FORECAST_LEADS} leads, got {leads}"
            )));
        }
        if pv_fc.len() != rows * leads || demand_fc.len() != rows * leads {
            return Err(Error::InvalidParameter(
                "forecast arrays must hold rows * leads values".into(),
            ));
        }
        if rows < MIN_HISTORY {
            return Err(Error::InsufficientHistory {
                available: rows,
                required: MIN_HISTORY,
            });
        }
        for (i, (&g, &d)) in pv.iter().zip(&demand).enumerate() {
            if !(g.is_finite() && g >= 0.0) || !(d.is_finite() && d >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "row {i}: observations must be finite and nonnegative (pv {g}, demand {d})"
                )));
            }
        }
        if let Some(i) = pv_fc
            .iter()
            .chain(&demand_fc)
            .position(|v| !v.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "non-finite forecast value at flat index {i}"
            )));
        }
        Ok(SiteRecord {
            site_id: site_id.into(),
            battery,
            start,
            pv,
            demand,
            leads,
            pv_fc,
            demand_fc,
        })
    }

    /// Number of rows, `theta`.
    pub fn horizon(&self) -> usize {
        self.pv.len()
    }

    pub fn leads(&self) -> usize {
        self.leads
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn timestamp(&self, row: usize) -> NaiveDateTime {
        self.start + Duration::minutes(15 * row as i64)
    }

    pub fn observation(&self, row: usize) -> Uncertainty {
        Uncertainty::new(self.pv[row], self.demand[row])
    }

    pub fn pv(&self) -> &[f64] {
        &self.pv
    }

    pub fn demand(&self) -> &[f64] {
        &self.demand
    }

    pub fn net_demand(&self) -> Vec<f64> {
        self.demand.iter().zip(&self.pv).map(|(d, g)| d - g).collect()
    }

    /// Forecast vectors `(pv, demand)` issued at `row`.
    pub fn forecast_row(&self, row: usize) -> (&[f64], &[f64]) {
        let r = row * self.leads..(row + 1) * self.leads;
        (&self.pv_fc[r.clone()], &self.demand_fc[r])
    }

    /// Net-demand forecast issued at `row` for lead `k >= 1`.
    pub fn forecast_net(&self, row: usize, k: usize) -> f64 {
        let i = row * self.leads + k - 1;
        self.demand_fc[i] - self.pv_fc[i]
    }
}
