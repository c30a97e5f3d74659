//! Closed-loop simulation of controllers over weekly chronicles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calib::{ArModel, NoiseModel};
use crate::controllers::{Anticipative, GridConfig, Mpc, Olfc, Sdp, SdpAr, ValueFunction, DEFAULT_HORIZON};
use crate::data::SimulationWeek;
use crate::error::{Error, Result};
use crate::model::{
    admissible_interval, dynamics, stage_cost_at, BatteryParams, Controller, Dummy, StateOfCharge,
    CONTRACT_TOL, WEEK_STEPS,
};
use crate::scenario::ScenarioModel;
use crate::seed;
use crate::tariff::Tariff;

/// Tolerance on the simulated state before it is clamped.
pub const STATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    pub step: usize,
    pub message: String,
}

/// Trajectory and cost of one controller over one week.
///
/// Equality ignores `online_time`, which is a wall-clock measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimResult {
    pub site_id: String,
    pub week_id: u32,
    pub controller: String,
    pub soc: Vec<f64>,
    pub controls: Vec<f64>,
    pub stage_costs: Vec<f64>,
    pub management_cost: f64,
    /// Mean seconds per `decide` call. Not serialized.
    #[serde(default, skip_serializing)]
    pub online_time: f64,
    pub fault: Option<Fault>,
}

impl PartialEq for SimResult {
    fn eq(&self, o: &Self) -> bool {
        self.site_id == o.site_id
            && self.week_id == o.week_id
            && self.controller == o.controller
            && self.soc == o.soc
            && self.controls == o.controls
            && self.stage_costs == o.stage_costs
            && self.management_cost.to_bits() == o.management_cost.to_bits()
            && self.fault == o.fault
    }
}

impl SimResult {
    pub fn is_faulted(&self) -> bool {
        self.fault.is_some()
    }
}

/// Runs `controller` through one simulation week from an empty battery.
///
/// The controller only ever sees the state of charge and the information
/// state of the step; the realized uncertainty is used afterwards to price
/// the control. A failing or inadmissible decision aborts the run and is
/// recorded as a fault.
pub fn simulate(
    controller: &mut dyn Controller,
    week: &SimulationWeek,
    battery: &BatteryParams,
    tariff: &Tariff,
) -> SimResult {
    let mut soc = Vec::with_capacity(WEEK_STEPS + 1);
    let mut controls = Vec::with_capacity(WEEK_STEPS);
    let mut stage_costs = Vec::with_capacity(WEEK_STEPS);
    let mut x = StateOfCharge::EMPTY;
    soc.push(x.value());
    let mut elapsed = 0.0;
    let mut fault = None;
    for t in 0..WEEK_STEPS {
        let info = week.step(t);
        let start = Instant::now();
        let decision = controller.decide(x, &info);
        elapsed += start.elapsed().as_secs_f64();
        let iv = admissible_interval(x, battery);
        let u = match decision {
            Ok(u) if u.is_finite() && iv.contains(u, CONTRACT_TOL) => iv.clamp(u),
            Ok(u) => {
                fault = Some(Fault {
                    step: t,
                    message: format!("control {u} outside [{}, {}]", iv.lo, iv.hi),
                });
                break;
            }
            Err(e) => {
                fault = Some(Fault {
                    step: t,
                    message: e.to_string(),
                });
                break;
            }
        };
        let next = dynamics(x, u, battery);
        if !(-STATE_TOL..=1.0 + STATE_TOL).contains(&next) {
            fault = Some(Fault {
                step: t,
                message: format!("state of charge {next} left [0, 1]"),
            });
            break;
        }
        controls.push(u);
        stage_costs.push(stage_cost_at(u, week.realized(t + 1), tariff, t));
        x = StateOfCharge::saturating(next);
        soc.push(x.value());
    }
    if let Some(f) = &fault {
        log::warn!(
            "{} on {} week {}: fault at step {}: {}",
            controller.name(),
            week.site_id(),
            week.week_id(),
            f.step,
            f.message
        );
    }
    let calls = (controls.len() + usize::from(fault.is_some())).max(1);
    SimResult {
        site_id: week.site_id().to_string(),
        week_id: week.week_id(),
        controller: controller.name().to_string(),
        management_cost: stage_costs.iter().sum(),
        soc,
        controls,
        stage_costs,
        online_time: elapsed / calls as f64,
        fault,
    }
}

/// Controller selection with its parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ControllerSpec {
    Dummy,
    Mpc { horizon: usize },
    Olfc { horizon: usize, scenarios: usize },
    Sdp,
    SdpAr { order: usize },
    Anticipative,
}

impl ControllerSpec {
    /// Name used in result files; matches the controller's own name.
    pub fn name(&self) -> String {
        match self {
            ControllerSpec::Dummy => "dummy".into(),
            ControllerSpec::Mpc { horizon } if *horizon == DEFAULT_HORIZON => "mpc".into(),
            ControllerSpec::Mpc { horizon } => format!("mpc-{horizon}"),
            ControllerSpec::Olfc { scenarios, .. } => format!("olfc-{scenarios}"),
            ControllerSpec::Sdp => "sdp".into(),
            ControllerSpec::SdpAr { order } => format!("sdpar-{order}"),
            ControllerSpec::Anticipative => "anticipative".into(),
        }
    }

    /// Parses `dummy`, `mpc`, `mpc-<H>`, `olfc-<n>`, `sdp`, `sdpar-<k>` or
    /// `anticipative`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Validation(format!("unknown controller `{s}`"));
        let num = |rest: &str| rest.parse::<usize>().ok().filter(|v| *v > 0).ok_or_else(bad);
        Ok(match s {
            "dummy" => ControllerSpec::Dummy,
            "mpc" => ControllerSpec::Mpc {
                horizon: DEFAULT_HORIZON,
            },
            "sdp" => ControllerSpec::Sdp,
            "anticipative" => ControllerSpec::Anticipative,
            _ => {
                if let Some(r) = s.strip_prefix("mpc-") {
                    ControllerSpec::Mpc { horizon: num(r)? }
                } else if let Some(r) = s.strip_prefix("olfc-") {
                    ControllerSpec::Olfc {
                        horizon: DEFAULT_HORIZON,
                        scenarios: num(r)?,
                    }
                } else if let Some(r) = s.strip_prefix("sdpar-") {
                    ControllerSpec::SdpAr { order: num(r)? }
                } else {
                    return Err(bad());
                }
            }
        })
    }
}

impl fmt::Display for ControllerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Calibrated artifacts of one site.
#[derive(Debug, Clone, Default)]
pub struct SiteArtifacts {
    pub scenario: Option<Arc<ScenarioModel>>,
    pub sdp: Option<(Arc<NoiseModel>, Arc<ValueFunction>)>,
    pub sdpar: BTreeMap<usize, (Arc<ArModel>, Arc<ValueFunction>)>,
}

#[derive(Debug, Clone)]
pub struct SiteContext {
    pub site_id: String,
    pub battery: BatteryParams,
    pub weeks: Vec<SimulationWeek>,
    pub artifacts: SiteArtifacts,
}

#[derive(Debug, Clone)]
pub struct BenchmarkPlan {
    pub controllers: Vec<ControllerSpec>,
    pub sites: Vec<SiteContext>,
    pub tariff: Arc<Tariff>,
    pub grid: GridConfig,
    /// Base seed of the controllers' random streams.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellError {
    pub controller: String,
    pub site_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchmarkOutput {
    /// Sorted by controller, site and week.
    pub results: Vec<SimResult>,
    pub errors: Vec<CellError>,
}

impl BenchmarkOutput {
    pub fn has_faults(&self) -> bool {
        self.results.iter().any(SimResult::is_faulted)
    }
}

fn missing(spec: &ControllerSpec, site: &SiteContext) -> Error {
    Error::MissingArtifact(format!("{} has no calibration for {}", site.site_id, spec.name()))
}

/// Controller instance for one `(controller, site, week)` cell.
pub fn build_controller(
    spec: &ControllerSpec,
    site: &SiteContext,
    week: &SimulationWeek,
    tariff: &Arc<Tariff>,
    grid: &GridConfig,
    base_seed: u64,
) -> Result<Box<dyn Controller>> {
    let b = site.battery;
    Ok(match spec {
        ControllerSpec::Dummy => Box::new(Dummy),
        ControllerSpec::Mpc { horizon } => Box::new(Mpc::new(b, tariff.clone(), *horizon)?),
        ControllerSpec::Olfc { horizon, scenarios } => {
            let model = site.artifacts.scenario.clone().ok_or_else(|| missing(spec, site))?;
            let rng = seed::stream(
                base_seed,
                &[&spec.name(), &site.site_id, &week.week_id().to_string()],
            );
            Box::new(Olfc::new(b, tariff.clone(), *horizon, *scenarios, model, rng)?)
        }
        ControllerSpec::Sdp => {
            let (noise, vf) = site.artifacts.sdp.clone().ok_or_else(|| missing(spec, site))?;
            Box::new(Sdp::new(b, tariff.clone(), noise, vf, *grid)?)
        }
        ControllerSpec::SdpAr { order } => {
            let (ar, vf) = site
                .artifacts
                .sdpar
                .get(order)
                .cloned()
                .ok_or_else(|| missing(spec, site))?;
            Box::new(SdpAr::new(b, tariff.clone(), ar, vf, *grid)?)
        }
        ControllerSpec::Anticipative => Box::new(Anticipative::new(week, b, tariff)?),
    })
}

/// Simulates every controller on every simulation week of every site.
///
/// Results do not depend on `parallelism` or scheduling. A cell whose
/// controller cannot be built is reported in `errors` and the remaining
/// cells still run.
pub fn run_benchmark(plan: &BenchmarkPlan, parallelism: usize) -> Result<BenchmarkOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?;
    let mut units = Vec::new();
    for (c, _) in plan.controllers.iter().enumerate() {
        for (s, site) in plan.sites.iter().enumerate() {
            for w in 0..site.weeks.len() {
                units.push((c, s, w));
            }
        }
    }
    let outcomes: Vec<std::result::Result<SimResult, CellError>> = pool.install(|| {
        units
            .par_iter()
            .map(|&(c, s, w)| {
                let spec = &plan.controllers[c];
                let site = &plan.sites[s];
                let week = &site.weeks[w];
                match build_controller(spec, site, week, &plan.tariff, &plan.grid, plan.seed) {
                    Ok(mut ctrl) => Ok(simulate(ctrl.as_mut(), week, &site.battery, &plan.tariff)),
                    Err(e) => Err(CellError {
                        controller: spec.name(),
                        site_id: site.site_id.clone(),
                        message: e.to_string(),
                    }),
                }
            })
            .collect()
    });
    let mut results = Vec::new();
    let mut errors = BTreeSet::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(e) => {
                errors.insert(e);
            }
        }
    }
    results.sort_by(|a, b| {
        (&a.controller, &a.site_id, a.week_id).cmp(&(&b.controller, &b.site_id, b.week_id))
    });
    Ok(BenchmarkOutput {
        results,
        errors: errors.into_iter().collect(),
    })
}
