//! Receding-horizon controllers: deterministic MPC and scenario-based OLFC.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use super::lookahead::{solve_lookahead, LookaheadProblem, LookaheadSolution};
use crate::error::{Error, Result};
use crate::model::{project_control, BatteryParams, Controller, StateOfCharge, StepInfo, WEEK_STEPS};
use crate::scenario::{merge_duplicates, sample_scenarios, ScenarioModel, SEPARATORS};
use crate::tariff::Tariff;

/// Default lookahead window, one day.
pub const DEFAULT_HORIZON: usize = 96;

/// Window truncated at the end of the week.
fn window(horizon: usize, t: usize) -> usize {
    horizon.min(WEEK_STEPS - t)
}

/// Model predictive control on the point forecast.
#[derive(Debug, Clone)]
pub struct Mpc {
    name: String,
    battery: BatteryParams,
    tariff: Arc<Tariff>,
    horizon: usize,
}

impl Mpc {
    pub fn new(battery: BatteryParams, tariff: Arc<Tariff>, horizon: usize) -> Result<Self> {
        if horizon == 0 || horizon > WEEK_STEPS {
            return Err(Error::InvalidParameter(format!("MPC horizon {horizon} out of range")));
        }
        let name = if horizon == DEFAULT_HORIZON {
            "mpc".to_string()
        } else {
            format!("mpc-{horizon}")
        };
        Ok(Mpc {
            name,
            battery,
            tariff,
            horizon,
        })
    }

    /// Lookahead problem solved at this step.
    pub fn subproblem(&self, soc: StateOfCharge, info: &StepInfo<'_>) -> Result<LookaheadSolution> {
        let t = info.step();
        let h = window(self.horizon, t);
        if info.leads() < h {
            return Err(Error::InvalidParameter(format!(
                "forecast window holds {} leads, horizon needs {h}",
                info.leads()
            )));
        }
        let scenarios = [info.forecast_net_path(h)];
        solve_lookahead(&LookaheadProblem {
            start_step: t,
            soc,
            scenarios: &scenarios,
            probabilities: &[1.0],
            battery: &self.battery,
            tariff: &self.tariff,
        })
    }
}

impl Controller for Mpc {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, soc: StateOfCharge, info: &StepInfo<'_>) -> Result<f64> {
        let sol = self.subproblem(soc, info)?;
        project_control(sol.control, soc, &self.battery)
    }
}

/// Open-loop feedback control over sampled scenarios.
#[derive(Debug, Clone)]
pub struct Olfc {
    name: String,
    battery: BatteryParams,
    tariff: Arc<Tariff>,
    horizon: usize,
    scenarios: usize,
    model: Arc<ScenarioModel>,
    rng: ChaCha8Rng,
}

impl Olfc {
    pub fn new(
        battery: BatteryParams,
        tariff: Arc<Tariff>,
        horizon: usize,
        scenarios: usize,
        model: Arc<ScenarioModel>,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let max = *SEPARATORS.last().unwrap();
        if horizon == 0 || horizon > max {
            return Err(Error::InvalidParameter(format!(
                "OLFC horizon must lie in 1..={max}"
            )));
        }
        if scenarios == 0 {
            return Err(Error::InvalidParameter("OLFC needs at least one scenario".into()));
        }
        model.validate()?;
        Ok(Olfc {
            name: format!("olfc-{scenarios}"),
            battery,
            tariff,
            horizon,
            scenarios,
            model,
            rng,
        })
    }

    /// Samples scenarios and solves the lookahead problem of this step.
    pub fn subproblem(&mut self, soc: StateOfCharge, info: &StepInfo<'_>) -> Result<LookaheadSolution> {
        let t = info.step();
        let h = window(self.horizon, t);
        let mut batch = sample_scenarios(&self.model, info, self.scenarios, &mut self.rng);
        for s in &mut batch {
            s.net_demand.truncate(h);
        }
        let batch = merge_duplicates(batch);
        let (paths, probs): (Vec<Vec<f64>>, Vec<f64>) =
            batch.into_iter().map(|s| (s.net_demand, s.probability)).unzip();
        solve_lookahead(&LookaheadProblem {
            start_step: t,
            soc,
            scenarios: &paths,
            probabilities: &probs,
            battery: &self.battery,
            tariff: &self.tariff,
        })
    }
}

impl Controller for Olfc {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, soc: StateOfCharge, info: &StepInfo<'_>) -> Result<f64> {
        let sol = self.subproblem(soc, info)?;
        project_control(sol.control, soc, &self.battery)
    }
}
