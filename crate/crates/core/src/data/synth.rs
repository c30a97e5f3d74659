//! Seeded synthetic sites for desk-scale experiments.

use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::site::SiteRecord;
use crate::error::{Error, Result};
use crate::model::{BatteryParams, DAY_STEPS, FORECAST_LEADS, WEEK_STEPS};
use crate::seed;

/// Parameters of a synthetic site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub site_id: String,
    /// Complete weeks generated after the leading Sunday.
    pub weeks: usize,
    /// Mean demand, kWh per step.
    pub demand_level: f64,
    /// Clear-sky midday generation at the summer solstice, kWh per step.
    pub pv_amplitude: f64,
    /// Standard deviation of the demand and PV noise, relative to their level.
    pub noise_scale: f64,
    /// Step-to-step autocorrelation of the noise.
    pub noise_persistence: f64,
    /// Standard deviation of the lead-1 forecast error, relative to level.
    pub forecast_error_scale: f64,
    /// Lead-to-lead autocorrelation of the forecast error.
    pub forecast_error_persistence: f64,
    /// Demand multiplier on Saturdays and Sundays.
    pub weekend_factor: f64,
    /// Forecast window length; the canonical file format holds 96.
    pub leads: usize,
    pub battery: BatteryParams,
    /// Timestamp of the first row; a Sunday 00:00 gives exactly `weeks`
    /// complete chronicles.
    pub start: NaiveDateTime,
}

impl SynthSpec {
    pub fn new(site_id: impl Into<String>, weeks: usize) -> Self {
        SynthSpec {
            site_id: site_id.into(),
            weeks,
            demand_level: 10.0,
            pv_amplitude: 8.0,
            noise_scale: 0.15,
            noise_persistence: 0.9,
            forecast_error_scale: 0.1,
            forecast_error_persistence: 0.97,
            weekend_factor: 0.7,
            leads: FORECAST_LEADS,
            battery: BatteryParams {
                capacity: 40.0,
                max_power: 20.0,
                rho_c: 0.95,
                rho_d: 0.95,
            },
            start: NaiveDate::from_ymd_opt(2018, 4, 1)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("synthetic site: {what}")));
        if self.weeks == 0 {
            return bad("at least one week is required");
        }
        if !(self.demand_level > 0.0) {
            return bad("demand level must be positive");
        }
        if !(self.pv_amplitude >= 0.0) {
            return bad("pv amplitude must be nonnegative");
        }
        if !(self.noise_scale >= 0.0 && self.forecast_error_scale >= 0.0) {
            return bad("noise scales must be nonnegative");
        }
        if !(0.0..1.0).contains(&self.noise_persistence)
            || !(0.0..1.0).contains(&self.forecast_error_persistence)
        {
            return bad("persistence must lie in [0, 1)");
        }
        if !(self.weekend_factor > 0.0) {
            return bad("weekend factor must be positive");
        }
        if self.leads < FORECAST_LEADS {
            return bad("forecast window shorter than 96 leads");
        }
        self.battery.validate()
    }
}

/// Mid-interval hour of day.
fn hour_of_day(ts: NaiveDateTime) -> f64 {
    ts.hour() as f64 + ts.minute() as f64 / 60.0 + 0.125
}

/// Daily demand shape, mean close to 1.
fn demand_shape(hour: f64) -> f64 {
    let base = 0.75 + 0.25 * (2.0 * PI * (hour - 9.0) / 24.0).sin();
    let evening = 0.45 * (-((hour - 19.0) / 2.0).powi(2)).exp();
    base + evening
}

/// Clear-sky generation shape between 06:30 and 19:30.
fn pv_shape(hour: f64) -> f64 {
    if (6.5..19.5).contains(&hour) {
        (PI * (hour - 6.5) / 13.0).sin().powf(1.5)
    } else {
        0.0
    }
}

fn seasonal_factor(ts: NaiveDateTime) -> f64 {
    let doy = ts.ordinal() as f64;
    0.6 + 0.4 * (2.0 * PI * (doy - 172.0) / 365.25).cos()
}

/// Generates a synthetic site record.
///
/// Demand is a daily profile times a weekday/weekend level plus AR(1)
/// noise; generation is a clear-sky bell times a seasonal factor with
/// multiplicative AR(1) cloud noise, zero at night. Forecasts are the future
/// realization plus an error that follows an AR(1) recursion over the lead
/// time, so its variance grows with the lead.
pub fn synth_site(spec: &SynthSpec, seed: u64) -> Result<SiteRecord> {
    spec.validate()?;
    let rows = spec.weeks * WEEK_STEPS + DAY_STEPS;
    let total = rows + spec.leads;
    let mut rng = seed::stream(seed, &["synth", &spec.site_id]);
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };

    let phi = spec.noise_persistence;
    let innov = (1.0 - phi * phi).sqrt();
    let mut pv = Vec::with_capacity(total);
    let mut demand = Vec::with_capacity(total);
    let mut pv_clear = Vec::with_capacity(total);
    let (mut n_d, mut n_g) = (0.0f64, 0.0f64);
    for row in 0..total {
        let ts = spec.start + chrono::Duration::minutes(15 * row as i64);
        let hour = hour_of_day(ts);
        let weekend = matches!(ts.weekday(), chrono::Weekday::Sat | chrono::Weekday::Sun);
        let level = spec.demand_level * if weekend { spec.weekend_factor } else { 1.0 };
        n_d = phi * n_d + innov * normal();
        n_g = phi * n_g + innov * normal();
        let d = level * demand_shape(hour) + spec.noise_scale * spec.demand_level * n_d;
        let clear = spec.pv_amplitude * pv_shape(hour) * seasonal_factor(ts);
        let g = clear * (1.0 + spec.noise_scale * n_g);
        demand.push(d.max(0.0));
        pv.push(g.max(0.0));
        pv_clear.push(clear);
    }

    let rho = spec.forecast_error_persistence;
    let sd_d = spec.forecast_error_scale * spec.demand_level;
    let sd_g = spec.forecast_error_scale * spec.pv_amplitude;
    let leads = spec.leads;
    let mut pv_fc = Vec::with_capacity(rows * leads);
    let mut demand_fc = Vec::with_capacity(rows * leads);
    let mut row_pv = vec![0.0; leads];
    let mut row_d = vec![0.0; leads];
    for row in 0..rows {
        let (mut e_d, mut e_g) = (0.0f64, 0.0f64);
        for k in 1..=leads {
            e_d = rho * e_d + sd_d * normal();
            e_g = rho * e_g + sd_g * normal();
            let target = row + k;
            row_d[k - 1] = (demand[target] + e_d).max(0.0);
            // Night-time generation is known to be zero.
            let shape = if spec.pv_amplitude > 0.0 {
                pv_clear[target] / spec.pv_amplitude
            } else {
                0.0
            };
            row_pv[k - 1] = (pv[target] + e_g * shape).max(0.0);
        }
        pv_fc.extend_from_slice(&row_pv);
        demand_fc.extend_from_slice(&row_d);
    }
    pv.truncate(rows);
    demand.truncate(rows);
    SiteRecord::new(
        spec.site_id.clone(),
        spec.battery,
        spec.start,
        pv,
        demand,
        leads,
        pv_fc,
        demand_fc,
    )
}

/// `n` synthetic sites `site-001..` sharing `base` except for a seeded
/// spread of demand level, generation amplitude and battery size.
pub fn synth_fleet(n: usize, base: &SynthSpec, seed: u64) -> Result<Vec<SiteRecord>> {
    (1..=n)
        .map(|i| {
            let id = format!("site-{i:03}");
            let mut rng = seed::stream(seed, &["fleet", &id]);
            let mut spec = base.clone();
            spec.site_id = id;
            spec.demand_level *= rng.random_range(0.6..1.6);
            spec.pv_amplitude *= rng.random_range(0.3..1.5);
            let size = rng.random_range(0.5..1.5);
            spec.battery.capacity *= size;
            spec.battery.max_power *= size;
            synth_site(&spec, seed)
        })
        .collect()
}
