//! Anticipative lower bound: the week solved with its realized net demand.

use super::lookahead::{solve_plan, LookaheadPlan, LookaheadProblem};
use crate::data::Chronicle;
use crate::error::Result;
use crate::model::{project_control, BatteryParams, Controller, StateOfCharge, StepInfo, WEEK_STEPS};
use crate::tariff::Tariff;

/// Optimal plan for the week knowing every realization, from an empty battery.
pub fn anticipative_plan(week: &Chronicle, battery: &BatteryParams, tariff: &Tariff) -> Result<LookaheadPlan> {
    let scenarios = [week.realized_net_path()];
    solve_plan(&LookaheadProblem {
        start_step: 0,
        soc: StateOfCharge::EMPTY,
        scenarios: &scenarios,
        probabilities: &[1.0],
        battery,
        tariff,
    })
}

/// Minimal weekly cost attainable with full knowledge of the week.
pub fn anticipative_cost(week: &Chronicle, battery: &BatteryParams, tariff: &Tariff) -> Result<f64> {
    Ok(anticipative_plan(week, battery, tariff)?.value)
}

/// Replays the anticipative plan of one chronicle. Not a valid
/// non-anticipative controller; it exists to produce the bound through the
/// same simulation path as every other controller.
#[derive(Debug, Clone)]
pub struct Anticipative {
    battery: BatteryParams,
    controls: Vec<f64>,
}

impl Anticipative {
    pub fn new(week: &Chronicle, battery: BatteryParams, tariff: &Tariff) -> Result<Self> {
        let plan = anticipative_plan(week, &battery, tariff)?;
        debug_assert_eq!(plan.controls.len(), WEEK_STEPS);
        Ok(Anticipative {
            battery,
            controls: plan.controls,
        })
    }
}

impl Controller for Anticipative {
    fn name(&self) -> &str {
        "anticipative"
    }

    fn decide(&mut self, soc: StateOfCharge, info: &StepInfo<'_>) -> Result<f64> {
        project_control(self.controls[info.step()], soc, &self.battery)
    }
}
