//! Weekly chronicles cut from a site record.

use std::collections::BTreeSet;
use std::ops::Deref;
use std::sync::Arc;

use chrono::{Datelike, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use super::site::SiteRecord;
use crate::model::{StepInfo, Uncertainty, DAY_STEPS, PAST_STEPS, WEEK_STEPS};

/// One Monday-to-Sunday week of a site.
///
/// With `m` the row of Monday 00:00, the uncertainty `w_t` of the week
/// (`t = 0..=672`) is row `m + t - 1`: `w_0` is the last quarter hour of
/// the preceding Sunday and `w_{t+1}` is realized during step `t`.
#[derive(Debug, Clone)]
pub struct Chronicle {
    site: Arc<SiteRecord>,
    week_id: u32,
    monday_row: usize,
}

impl Chronicle {
    /// Chronicle starting at `monday_row`; the row must be preceded by a
    /// full day and followed by a full week.
    pub fn new(site: Arc<SiteRecord>, week_id: u32, monday_row: usize) -> Option<Self> {
        if monday_row < DAY_STEPS || monday_row + WEEK_STEPS > site.horizon() {
            return None;
        }
        Some(Chronicle {
            site,
            week_id,
            monday_row,
        })
    }

    pub fn site(&self) -> &Arc<SiteRecord> {
        &self.site
    }

    pub fn site_id(&self) -> &str {
        &self.site.site_id
    }

    pub fn week_id(&self) -> u32 {
        self.week_id
    }

    pub fn monday(&self) -> NaiveDateTime {
        self.site.timestamp(self.monday_row)
    }

    fn row_of(&self, t: isize) -> usize {
        (self.monday_row as isize + t - 1) as usize
    }

    /// Information state `h_t` for `t` in `0..672`.
    pub fn step(&self, t: usize) -> StepInfo<'_> {
        assert!(t < WEEK_STEPS, "step {t} outside the week");
        let last = self.row_of(t as isize);
        let past = last + 1 - PAST_STEPS..last + 1;
        let (fc_pv, fc_demand) = self.site.forecast_row(last);
        StepInfo::new(
            t,
            &self.site.pv()[past.clone()],
            &self.site.demand()[past],
            fc_pv,
            fc_demand,
        )
        .expect("chronicle windows have valid lengths")
    }

    /// Realized `w_t` for `t` in `0..=672`.
    pub fn realized(&self, t: usize) -> Uncertainty {
        assert!(t <= WEEK_STEPS);
        self.site.observation(self.row_of(t as isize))
    }

    /// Realized net demand `z_1..=z_672`, the values that drive the cost.
    pub fn realized_net_path(&self) -> Vec<f64> {
        (1..=WEEK_STEPS).map(|t| self.realized(t).net()).collect()
    }

    /// Net demand `z_t` for `t` in `-95..=672`, oldest first.
    pub fn net_series_with_history(&self) -> Vec<f64> {
        let first = self.row_of(1 - PAST_STEPS as isize);
        let last = self.row_of(WEEK_STEPS as isize);
        (first..=last)
            .map(|r| self.site.observation(r).net())
            .collect()
    }
}

/// Counts produced while cutting a record into weeks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChronicleReport {
    pub complete_weeks: usize,
    pub dropped_weeks: usize,
}

/// Cuts every complete Monday-to-Sunday week with a full preceding Sunday.
///
/// Rows that can only serve as history are not counted as dropped.
pub fn build_chronicles(site: &Arc<SiteRecord>) -> (Vec<Chronicle>, ChronicleReport) {
    let mut touched = BTreeSet::new();
    let mut out = Vec::new();
    for row in 0..site.horizon() {
        let ts = site.timestamp(row);
        if row >= PAST_STEPS {
            let iso = ts.date().iso_week();
            touched.insert((iso.year(), iso.week()));
        }
        let monday_midnight = ts.weekday() == Weekday::Mon && ts.hour() == 0 && ts.minute() == 0;
        if monday_midnight {
            let id = out.len() as u32;
            if let Some(ch) = Chronicle::new(site.clone(), id, row) {
                out.push(ch);
            }
        }
    }
    let report = ChronicleReport {
        complete_weeks: out.len(),
        dropped_weeks: touched.len() - out.len(),
    };
    (out, report)
}

/// A chronicle reserved for calibration.
#[derive(Debug, Clone)]
pub struct CalibrationWeek(Chronicle);

/// A chronicle reserved for out-of-sample simulation.
#[derive(Debug, Clone)]
pub struct SimulationWeek(Chronicle);

impl CalibrationWeek {
    pub fn new(ch: Chronicle) -> Self {
        CalibrationWeek(ch)
    }

    pub fn into_inner(self) -> Chronicle {
        self.0
    }
}

impl SimulationWeek {
    pub fn new(ch: Chronicle) -> Self {
        SimulationWeek(ch)
    }

    pub fn into_inner(self) -> Chronicle {
        self.0
    }
}

impl Deref for CalibrationWeek {
    type Target = Chronicle;
    fn deref(&self) -> &Chronicle {
        &self.0
    }
}

impl Deref for SimulationWeek {
    type Target = Chronicle;
    fn deref(&self) -> &Chronicle {
        &self.0
    }
}
