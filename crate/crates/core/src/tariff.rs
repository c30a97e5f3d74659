//! Time-of-use energy tariff indexed by quarter-hour of the week.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Calendar, DayType, DAY_STEPS, WEEK_STEPS};

/// Default two-level schedule shipped with the crate. Placeholder values,
/// not a published tariff.
pub const DEFAULT_TARIFF_TOML: &str = include_str!("../../../tariffs/default.toml");

/// Buying and selling prices (€/kWh) for each of the 672 slots of a week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tariff {
    buy: Vec<f64>,
    sell: Vec<f64>,
}

impl Tariff {
    /// Requires `buy[t] >= sell[t] >= 0` and finite prices in every slot.
    pub fn new(buy: Vec<f64>, sell: Vec<f64>) -> Result<Self> {
        if buy.len() != WEEK_STEPS || sell.len() != WEEK_STEPS {
            return Err(Error::InvalidParameter(format!(
                "tariff needs {WEEK_STEPS} slots, got {} buy / {} sell",
                buy.len(),
                sell.len()
            )));
        }
        for (t, (&b, &s)) in buy.iter().zip(&sell).enumerate() {
            if !(b.is_finite() && s.is_finite() && s >= 0.0 && b >= s) {
                return Err(Error::InvalidParameter(format!(
                    "slot {t}: prices must satisfy buy >= sell >= 0 (buy {b}, sell {s})"
                )));
            }
        }
        Ok(Tariff { buy, sell })
    }

    pub fn flat(buy: f64, sell: f64) -> Result<Self> {
        Tariff::new(vec![buy; WEEK_STEPS], vec![sell; WEEK_STEPS])
    }

    /// `(buy, sell)` for slot `t`; slots repeat with the week.
    #[inline]
    pub fn prices(&self, t: usize) -> (f64, f64) {
        let t = t % WEEK_STEPS;
        (self.buy[t], self.sell[t])
    }

    pub fn buy(&self) -> &[f64] {
        &self.buy
    }

    pub fn sell(&self) -> &[f64] {
        &self.sell
    }

    /// Every price multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Tariff::new(
            self.buy.iter().map(|p| p * factor).collect(),
            self.sell.iter().map(|p| p * factor).collect(),
        )
    }

    pub fn max_price(&self) -> f64 {
        self.buy.iter().copied().fold(0.0, f64::max)
    }

    pub fn default_schedule() -> Self {
        Tariff::from_toml_str(DEFAULT_TARIFF_TOML).expect("shipped tariff is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: TariffFile = toml::from_str(text)?;
        file.into_tariff()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Tariff::from_toml_str(&text)
    }
}

/// On-disk tariff: either explicit per-slot prices or a compact schedule.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TariffFile {
    #[serde(default)]
    #[allow(dead_code)]
    note: Option<String>,
    slots: Option<SlotTable>,
    schedule: Option<Schedule>,
}

#[derive(Debug, Deserialize)]
struct SlotTable {
    buy: Vec<f64>,
    sell: Vec<f64>,
}

/// Peak / off-peak schedule expanded to 672 slots.
#[derive(Debug, Deserialize)]
struct Schedule {
    peak_buy: f64,
    off_peak_buy: f64,
    peak_sell: f64,
    off_peak_sell: f64,
    /// Half-open `[start, end)` hour ranges priced at the peak rate.
    peak_hours: Vec<[u32; 2]>,
    #[serde(default)]
    weekend_off_peak: bool,
}

impl TariffFile {
    fn into_tariff(self) -> Result<Tariff> {
        match (self.slots, self.schedule) {
            (Some(slots), None) => Tariff::new(slots.buy, slots.sell),
            (None, Some(s)) => s.expand(),
            _ => Err(Error::Validation(
                "tariff file needs exactly one of [slots] or [schedule]".into(),
            )),
        }
    }
}

impl Schedule {
    fn expand(&self) -> Result<Tariff> {
        for r in &self.peak_hours {
            if r[0] >= r[1] || r[1] > 24 {
                return Err(Error::Validation(format!("bad peak range {r:?}")));
            }
        }
        let mut buy = Vec::with_capacity(WEEK_STEPS);
        let mut sell = Vec::with_capacity(WEEK_STEPS);
        for t in 0..WEEK_STEPS {
            let cal = Calendar::of_step(t);
            let hour = (cal.quarter_hour * 24 / DAY_STEPS) as u32;
            let peak = !(self.weekend_off_peak && cal.day_type == DayType::Weekend)
                && self.peak_hours.iter().any(|r| hour >= r[0] && hour < r[1]);
            if peak {
                buy.push(self.peak_buy);
                sell.push(self.peak_sell);
            } else {
                buy.push(self.off_peak_buy);
                sell.push(self.off_peak_sell);
            }
        }
        Tariff::new(buy, sell)
    }
}
