//! Battery, grid-exchange and controller primitives.
//!
//! Energies are kWh over one 15-minute step. Controls `u` are the energy
//! exchanged with the battery (positive when charging) and the state of
//! charge is the stored fraction of the capacity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tariff::Tariff;

/// Duration of one step, in hours.
pub const STEP_HOURS: f64 = 0.25;
/// Steps in one day.
pub const DAY_STEPS: usize = 96;
/// Steps in one simulated week (Monday 00:00 to Sunday 23:45).
pub const WEEK_STEPS: usize = 7 * DAY_STEPS;
/// Length of the observation window handed to a controller.
pub const PAST_STEPS: usize = 96;
/// Lead times covered by the canonical forecast window.
pub const FORECAST_LEADS: usize = 96;

/// Tolerance used by built-in controllers when projecting onto the
/// admissible interval.
pub const CONTROLLER_CLAMP_TOL: f64 = 1e-9;
/// Tolerance of the simulator's admissibility check.
pub const CONTRACT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Weekday,
    Weekend,
}

impl DayType {
    pub fn index(self) -> usize {
        match self {
            DayType::Weekday => 0,
            DayType::Weekend => 1,
        }
    }

    pub const ALL: [DayType; 2] = [DayType::Weekday, DayType::Weekend];

    pub fn label(self) -> &'static str {
        match self {
            DayType::Weekday => "weekday",
            DayType::Weekend => "weekend",
        }
    }
}

/// Number of calibration slots: quarter hour of day times day type.
pub const SLOTS: usize = 2 * DAY_STEPS;

/// Position of a step within the week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Calendar {
    pub quarter_hour: usize,
    pub day_type: DayType,
}

impl Calendar {
    /// Calendar of step `t` of a week that starts on Monday 00:00.
    pub fn of_step(t: usize) -> Self {
        let t = t % WEEK_STEPS;
        let day = t / DAY_STEPS;
        Calendar {
            quarter_hour: t % DAY_STEPS,
            day_type: if day < 5 {
                DayType::Weekday
            } else {
                DayType::Weekend
            },
        }
    }

    /// Flat index in `0..192`, used to key per-slot calibration data.
    pub fn slot(self) -> usize {
        self.day_type.index() * DAY_STEPS + self.quarter_hour
    }
}

/// Physical parameters of a site's battery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams {
    /// Capacity, kWh.
    pub capacity: f64,
    /// Maximum charge or discharge power, kW.
    pub max_power: f64,
    pub rho_c: f64,
    pub rho_d: f64,
}

impl BatteryParams {
    pub fn new(capacity: f64, max_power: f64, rho_c: f64, rho_d: f64) -> Result<Self> {
        let p = BatteryParams {
            capacity,
            max_power,
            rho_c,
            rho_d,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.capacity.is_finite()
            && self.capacity > 0.0
            && self.max_power.is_finite()
            && self.max_power > 0.0
            && self.rho_c > 0.0
            && self.rho_c <= 1.0
            && self.rho_d > 0.0
            && self.rho_d <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "battery parameters out of range: {self:?}"
            )))
        }
    }

    /// Largest energy that can flow in or out of the battery in one step.
    pub fn max_step_energy(&self) -> f64 {
        self.max_power * STEP_HOURS
    }

    /// SoC gained per kWh of charge.
    pub fn charge_gain(&self) -> f64 {
        self.rho_c / self.capacity
    }

    /// SoC lost per kWh of discharge.
    pub fn discharge_loss(&self) -> f64 {
        1.0 / (self.rho_d * self.capacity)
    }

    /// Energy control producing the SoC increment `delta`.
    ///
    /// Inverse of `dynamics` in its control argument.
    pub fn control_for_increment(&self, delta: f64) -> f64 {
        if delta >= 0.0 {
            delta * self.capacity / self.rho_c
        } else {
            delta * self.rho_d * self.capacity
        }
    }

    /// SoC increment produced by the control `u`.
    pub fn increment_for_control(&self, u: f64) -> f64 {
        self.charge_gain() * u.max(0.0) - self.discharge_loss() * (-u).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateOfCharge(f64);

impl StateOfCharge {
    pub const EMPTY: StateOfCharge = StateOfCharge(0.0);

    pub fn new(x: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&x) {
            Ok(StateOfCharge(x))
        } else {
            Err(Error::Domain(format!("state of charge {x} outside [0, 1]")))
        }
    }

    /// Clamps `x` into `[0, 1]`; NaN maps to 0.
    pub fn saturating(x: f64) -> Self {
        if x.is_nan() {
            StateOfCharge(0.0)
        } else {
            StateOfCharge(x.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Photovoltaic generation and demand over one step, kWh.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Uncertainty {
    pub pv: f64,
    pub demand: f64,
}

impl Uncertainty {
    pub fn new(pv: f64, demand: f64) -> Self {
        Uncertainty { pv, demand }
    }

    /// Net demand, demand minus generation.
    pub fn net(&self) -> f64 {
        self.demand - self.pv
    }
}

/// Closed interval of admissible controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleInterval {
    pub lo: f64,
    pub hi: f64,
}

impl AdmissibleInterval {
    pub fn contains(&self, u: f64, tol: f64) -> bool {
        u >= self.lo - tol && u <= self.hi + tol
    }

    pub fn clamp(&self, u: f64) -> f64 {
        u.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// State of charge after applying control `u` from state `x`.
///
/// Total on the reals: the result may leave `[0, 1]` when `u` is not
/// admissible.
pub fn dynamics(x: StateOfCharge, u: f64, p: &BatteryParams) -> f64 {
    x.value() + p.increment_for_control(u)
}

pub fn admissible_interval(x: StateOfCharge, p: &BatteryParams) -> AdmissibleInterval {
    let x = x.value();
    let umax = p.max_step_energy();
    let lo = (-umax).max(-x * p.capacity * p.rho_d);
    let hi = umax.min((1.0 - x) * p.capacity / p.rho_c);
    // 0 is admissible for every x in [0, 1]; keep it inside despite rounding.
    AdmissibleInterval {
        lo: lo.min(0.0),
        hi: hi.max(0.0),
    }
}

/// Cost of exchanging `e` kWh with the grid at the given prices.
#[inline]
pub fn exchange_cost(e: f64, buy: f64, sell: f64) -> f64 {
    if e >= 0.0 {
        buy * e
    } else {
        sell * e
    }
}

/// Stage cost of control `u` given the realized uncertainty of the step.
pub fn stage_cost(u: f64, w_next: Uncertainty, buy: f64, sell: f64) -> f64 {
    exchange_cost(w_next.net() + u, buy, sell)
}

/// Stage cost on slot `slot` of `tariff`.
pub fn stage_cost_at(u: f64, w_next: Uncertainty, tariff: &Tariff, slot: usize) -> f64 {
    let (buy, sell) = tariff.prices(slot);
    stage_cost(u, w_next, buy, sell)
}

pub fn total_cost(stage_costs: &[f64]) -> f64 {
    stage_costs.iter().sum()
}

/// Information available to a controller at the start of a step.
///
/// Observations are stored oldest first; `past(0)` is the most recent one.
/// A view never reaches beyond the observation and forecast windows.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo<'a> {
    step: usize,
    past_pv: &'a [f64],
    past_demand: &'a [f64],
    forecast_pv: &'a [f64],
    forecast_demand: &'a [f64],
}

impl<'a> StepInfo<'a> {
    pub fn new(
        step: usize,
        past_pv: &'a [f64],
        past_demand: &'a [f64],
        forecast_pv: &'a [f64],
        forecast_demand: &'a [f64],
    ) -> Result<Self> {
        if step >= WEEK_STEPS {
            return Err(Error::Domain(format!("step index {step} outside the week")));
        }
        if past_pv.len() != PAST_STEPS || past_demand.len() != PAST_STEPS {
            return Err(Error::InvalidParameter(format!(
                "observation window must hold {PAST_STEPS} values"
            )));
        }
        if forecast_pv.len() != forecast_demand.len() || forecast_pv.len() < FORECAST_LEADS {
            return Err(Error::InvalidParameter(format!(
                "forecast window must hold at least {FORECAST_LEADS} values per series"
            )));
        }
        Ok(StepInfo {
            step,
            past_pv,
            past_demand,
            forecast_pv,
            forecast_demand,
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn calendar(&self) -> Calendar {
        Calendar::of_step(self.step)
    }

    /// Observation `lag` steps back; `past(0)` is `w_t`.
    pub fn past(&self, lag: usize) -> Uncertainty {
        let i = PAST_STEPS - 1 - lag;
        Uncertainty::new(self.past_pv[i], self.past_demand[i])
    }

    pub fn past_net(&self, lag: usize) -> f64 {
        self.past(lag).net()
    }

    /// Number of forecast lead times available.
    pub fn leads(&self) -> usize {
        self.forecast_pv.len()
    }

    /// Forecast issued at this step for `lead` steps ahead, `lead >= 1`.
    pub fn forecast(&self, lead: usize) -> Uncertainty {
        Uncertainty::new(self.forecast_pv[lead - 1], self.forecast_demand[lead - 1])
    }

    pub fn forecast_net(&self, lead: usize) -> f64 {
        self.forecast(lead).net()
    }

    /// Net-demand forecast for leads `1..=n`.
    pub fn forecast_net_path(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|k| self.forecast_net(k)).collect()
    }
}

/// A decision rule mapping `(x_t, h_t)` to an energy control.
///
/// Implementations must return a control inside
/// `admissible_interval(x, battery)`; the simulator aborts the run
/// otherwise.
pub trait Controller {
    fn name(&self) -> &str;

    fn decide(&mut self, soc: StateOfCharge, info: &StepInfo<'_>) -> Result<f64>;
}

/// Never uses the battery.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dummy;

impl Controller for Dummy {
    fn name(&self) -> &str {
        "dummy"
    }

    fn decide(&mut self, _soc: StateOfCharge, _info: &StepInfo<'_>) -> Result<f64> {
        Ok(0.0)
    }
}

/// Projects `u` onto the admissible interval at `x`.
///
/// Values farther than [`CONTROLLER_CLAMP_TOL`] outside are reported as
/// solver errors rather than silently moved.
pub fn project_control(u: f64, x: StateOfCharge, p: &BatteryParams) -> Result<f64> {
    let iv = admissible_interval(x, p);
    if !u.is_finite() {
        return Err(Error::Solver(format!("non-finite control {u}")));
    }
    let scale = 1.0 + iv.lo.abs().max(iv.hi.abs());
    if !iv.contains(u, CONTROLLER_CLAMP_TOL * scale) {
        return Err(Error::Solver(format!(
            "control {u} outside admissible interval [{}, {}]",
            iv.lo, iv.hi
        )));
    }
    Ok(iv.clamp(u))
}
