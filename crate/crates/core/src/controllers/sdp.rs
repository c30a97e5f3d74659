//! Stochastic dynamic programming on a SoC grid, optionally extended with
//! autoregressive net-demand lags.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calib::{ArModel, DiscreteDist, NoiseModel};
use crate::error::{Error, Result};
use crate::model::{
    admissible_interval, exchange_cost, AdmissibleInterval, BatteryParams, Controller,
    StateOfCharge, StepInfo, WEEK_STEPS,
};
use crate::tariff::Tariff;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    pub soc_points: usize,
    pub control_points: usize,
    /// Points per net-demand lag axis.
    pub lag_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            soc_points: 10,
            control_points: 20,
            lag_points: 10,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.soc_points < 2 || self.control_points < 2 || self.lag_points < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid sizes must be >= 2: {self:?}"
            )));
        }
        Ok(())
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Candidate controls: the equally spaced grid over `[-ubar, ubar]`
/// restricted to the admissible interval, plus its endpoints and zero.
pub fn control_candidates(iv: AdmissibleInterval, ubar: f64, n: usize) -> Vec<f64> {
    let mut c: Vec<f64> = linspace(-ubar, ubar, n)
        .into_iter()
        .filter(|u| *u > iv.lo && *u < iv.hi)
        .collect();
    c.extend([iv.lo, iv.hi, 0.0]);
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

/// Picks the minimizer; near-ties go to the smallest `|u|`, then the
/// smallest `u`.
pub(crate) fn better(u: f64, q: f64, best_u: f64, best_q: f64) -> bool {
    if !best_q.is_finite() {
        return true;
    }
    let tol = 1e-12 * (1.0 + best_q.abs());
    if q < best_q - tol {
        return true;
    }
    if q > best_q + tol {
        return false;
    }
    u.abs() < best_u.abs() || (u.abs() == best_u.abs() && u < best_u)
}

/// Value functions `V_0..=V_T` on a tensor grid.
///
/// The state is `(x, z_t, ..., z_{t-k+1})`; `k = 0` is the plain SoC grid.
/// Values are stored per time slice with the SoC axis varying fastest,
/// then the most recent lag.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub soc_grid: Vec<f64>,
    pub lag_grid: Vec<f64>,
    pub order: usize,
    pub steps: usize,
    pub values: Vec<f64>,
}

impl ValueFunction {
    pub fn lag_states(&self) -> usize {
        self.lag_grid.len().pow(self.order as u32)
    }

    pub fn states(&self) -> usize {
        self.soc_grid.len() * self.lag_states()
    }

    pub fn slice(&self, t: usize) -> &[f64] {
        let n = self.states();
        &self.values[t * n..(t + 1) * n]
    }

    /// Value at grid indices `(ix, lag multi-index)`.
    pub fn at(&self, t: usize, ix: usize, lag_state: usize) -> f64 {
        self.slice(t)[lag_state * self.soc_grid.len() + ix]
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.soc_grid.len() >= 2
            && (self.order == 0 || self.lag_grid.len() >= 2)
            && self.values.len() == (self.steps + 1) * self.states()
            && self.values.iter().all(|v| v.is_finite())
            && self.slice(self.steps).iter().all(|v| *v == 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Artifact("inconsistent value function".into()))
        }
    }

    /// Lag multi-index of `lags` (most recent first) for the given digits.
    fn lag_index(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .rev()
            .fold(0, |acc, &d| acc * self.lag_grid.len() + d)
    }

    /// Values of slice `t` along the SoC axis after multilinear
    /// interpolation over the lag axes, with lags clamped to the grid.
    fn soc_profile(&self, t: usize, lags: &[f64], out: &mut [f64]) {
        let nx = self.soc_grid.len();
        let slice = self.slice(t);
        if self.order == 0 {
            out.copy_from_slice(slice);
            return;
        }
        let weights: Vec<(usize, f64)> = lags.iter().map(|z| locate(&self.lag_grid, *z)).collect();
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut digits = vec![0usize; self.order];
        for corner in 0..1usize << self.order {
            let mut w = 1.0;
            for (d, &(i, frac)) in weights.iter().enumerate() {
                if corner >> d & 1 == 1 {
                    digits[d] = (i + 1).min(self.lag_grid.len() - 1);
                    w *= frac;
                } else {
                    digits[d] = i;
                    w *= 1.0 - frac;
                }
            }
            if w == 0.0 {
                continue;
            }
            let base = self.lag_index(&digits) * nx;
            for (o, v) in out.iter_mut().zip(&slice[base..base + nx]) {
                *o += w * v;
            }
        }
    }
}

/// Cell index and fractional position of `v` on an increasing grid,
/// clamped to its range.
#[inline]
pub(crate) fn locate(grid: &[f64], v: f64) -> (usize, f64) {
    let n = grid.len();
    let (lo, hi) = (grid[0], grid[n - 1]);
    if !(v > lo) {
        return (0, 0.0);
    }
    if v >= hi {
        return (n - 2, 1.0);
    }
    let step = (hi - lo) / (n - 1) as f64;
    let mut i = (((v - lo) / step) as usize).min(n - 2);
    // Guard against rounding in the cell lookup.
    while i > 0 && v < grid[i] {
        i -= 1;
    }
    while i + 2 < n && v >= grid[i + 1] {
        i += 1;
    }
    let frac = ((v - grid[i]) / (grid[i + 1] - grid[i])).clamp(0.0, 1.0);
    (i, frac)
}

#[inline]
fn interp(grid: &[f64], values: &[f64], v: f64) -> f64 {
    let (i, f) = locate(grid, v);
    if f == 0.0 {
        values[i]
    } else {
        values[i] * (1.0 - f) + values[i + 1] * f
    }
}

/// Everything needed to evaluate one-step decisions.
struct Stage<'a> {
    battery: &'a BatteryParams,
    tariff: &'a Tariff,
    cfg: &'a GridConfig,
}

impl Stage<'_> {
    /// Expected cost-to-go of each candidate at `x`. `outcomes` lists the
    /// possible net demands with probabilities and the SoC profile of the
    /// next value function reached with each.
    fn best(&self, t: usize, x: f64, outcomes: &[(f64, f64, &[f64])], soc_grid: &[f64]) -> (f64, f64) {
        let b = self.battery;
        let (buy, sell) = self.tariff.prices(t);
        let iv = admissible_interval(StateOfCharge::saturating(x), b);
        let mut best = (0.0, f64::INFINITY);
        for u in control_candidates(iv, b.max_step_energy(), self.cfg.control_points) {
            let next = (x + b.increment_for_control(u)).clamp(0.0, 1.0);
            let q: f64 = outcomes
                .iter()
                .map(|(z, p, prof)| p * (exchange_cost(z + u, buy, sell) + interp(soc_grid, prof, next)))
                .sum();
            if better(u, q, best.0, best.1) {
                best = (u, q);
            }
        }
        best
    }
}

/// Backward recursion for the plain SDP over `steps` steps.
///
/// `noise(t)` is the distribution of the net demand realized during step `t`.
pub fn sdp_backward<'n>(
    steps: usize,
    noise: impl Fn(usize) -> &'n DiscreteDist + Sync,
    battery: &BatteryParams,
    tariff: &Tariff,
    cfg: &GridConfig,
) -> Result<ValueFunction> {
    cfg.validate()?;
    let soc_grid = linspace(0.0, 1.0, cfg.soc_points);
    let nx = soc_grid.len();
    let mut values = vec![0.0; (steps + 1) * nx];
    let stage = Stage { battery, tariff, cfg };
    for t in (0..steps).rev() {
        let (head, tail) = values.split_at_mut((t + 1) * nx);
        let next = &tail[..nx];
        let dist = noise(t);
        let outcomes: Vec<(f64, f64, &[f64])> = dist.iter().map(|(z, p)| (z, p, next)).collect();
        for (ix, slot) in head[t * nx..].iter_mut().enumerate() {
            *slot = stage.best(t, soc_grid[ix], &outcomes, &soc_grid).1;
        }
    }
    let vf = ValueFunction {
        soc_grid,
        lag_grid: vec![],
        order: 0,
        steps,
        values,
    };
    vf.validate()?;
    Ok(vf)
}

pub fn sdp_value_function(noise: &NoiseModel, battery: &BatteryParams, tariff: &Tariff, cfg: &GridConfig) -> Result<ValueFunction> {
    sdp_backward(WEEK_STEPS, |t| noise.at_step(t), battery, tariff, cfg)
}

/// One-step SDP decision at step `t` from state `x`. Returns the control
/// and its expected cost-to-go.
pub fn sdp_decide(
    x: StateOfCharge,
    t: usize,
    vf: &ValueFunction,
    dist: &DiscreteDist,
    battery: &BatteryParams,
    tariff: &Tariff,
    cfg: &GridConfig,
) -> (f64, f64) {
    let next = vf.slice(t + 1);
    let outcomes: Vec<(f64, f64, &[f64])> = dist.iter().map(|(z, p)| (z, p, next)).collect();
    Stage { battery, tariff, cfg }.best(t, x.value(), &outcomes, &vf.soc_grid)
}

/// Backward recursion on the extended state `(x, z_t, ..., z_{t-k+1})`.
///
/// `model(t)` gives the coefficients and residual distribution predicting
/// the net demand realized during step `t`.
pub fn sdpar_backward<'m>(
    steps: usize,
    order: usize,
    lag_range: (f64, f64),
    model: impl Fn(usize) -> &'m crate::calib::SlotAr + Sync,
    battery: &BatteryParams,
    tariff: &Tariff,
    cfg: &GridConfig,
) -> Result<ValueFunction> {
    cfg.validate()?;
    if order == 0 {
        return Err(Error::InvalidParameter("AR order must be >= 1".into()));
    }
    let soc_grid = linspace(0.0, 1.0, cfg.soc_points);
    let lag_grid = if lag_range.1 > lag_range.0 {
        linspace(lag_range.0, lag_range.1, cfg.lag_points)
    } else {
        // Constant history: any nondegenerate grid around the value works.
        linspace(lag_range.0 - 0.5, lag_range.1 + 0.5, cfg.lag_points)
    };
    let nx = soc_grid.len();
    let nl = lag_grid.len();
    let lag_states = nl.pow(order as u32);
    let n = nx * lag_states;
    let mut vf = ValueFunction {
        soc_grid,
        lag_grid,
        order,
        steps,
        values: vec![0.0; (steps + 1) * n],
    };
    let stage = Stage { battery, tariff, cfg };
    for t in (0..steps).rev() {
        let ar = model(t);
        let slice: Vec<f64> = (0..lag_states)
            .into_par_iter()
            .flat_map_iter(|ls| {
                let mut lags = Vec::with_capacity(order);
                let mut rest = ls;
                for _ in 0..order {
                    lags.push(vf.lag_grid[rest % nl]);
                    rest /= nl;
                }
                let mean = ar.predict(&lags);
                let mut next_lags = Vec::with_capacity(order);
                let profiles: Vec<(f64, f64, Vec<f64>)> = ar
                    .residuals
                    .iter()
                    .map(|(e, p)| {
                        let z = mean + e;
                        next_lags.clear();
                        next_lags.push(z);
                        next_lags.extend_from_slice(&lags[..order - 1]);
                        let mut prof = vec![0.0; nx];
                        vf.soc_profile(t + 1, &next_lags, &mut prof);
                        (z, p, prof)
                    })
                    .collect();
                let outcomes: Vec<(f64, f64, &[f64])> =
                    profiles.iter().map(|(z, p, v)| (*z, *p, v.as_slice())).collect();
                (0..nx)
                    .map(|ix| stage.best(t, vf.soc_grid[ix], &outcomes, &vf.soc_grid).1)
                    .collect::<Vec<_>>()
            })
            .collect();
        vf.values[t * n..(t + 1) * n].copy_from_slice(&slice);
    }
    vf.validate()?;
    Ok(vf)
}

pub fn sdpar_value_function(ar: &ArModel, battery: &BatteryParams, tariff: &Tariff, cfg: &GridConfig) -> Result<ValueFunction> {
    sdpar_backward(WEEK_STEPS, ar.order, ar.lag_range, |t| ar.at_step(t), battery, tariff, cfg)
}

/// One-step SDP-AR decision. `lags[0]` is the latest observed net demand;
/// the prediction uses the raw lags and only the value lookup is clamped
/// to the grid.
pub fn sdpar_decide(
    x: StateOfCharge,
    t: usize,
    lags: &[f64],
    vf: &ValueFunction,
    ar: &crate::calib::SlotAr,
    battery: &BatteryParams,
    tariff: &Tariff,
    cfg: &GridConfig,
) -> (f64, f64) {
    let order = vf.order;
    let nx = vf.soc_grid.len();
    let mean = ar.predict(&lags[..order]);
    let mut next_lags = Vec::with_capacity(order);
    let profiles: Vec<(f64, f64, Vec<f64>)> = ar
        .residuals
        .iter()
        .map(|(e, p)| {
            let z = mean + e;
            next_lags.clear();
            next_lags.push(z);
            next_lags.extend_from_slice(&lags[..order - 1]);
            let mut prof = vec![0.0; nx];
            vf.soc_profile(t + 1, &next_lags, &mut prof);
            (z, p, prof)
        })
        .collect();
    let outcomes: Vec<(f64, f64, &[f64])> = profiles.iter().map(|(z, p, v)| (*z, *p, v.as_slice())).collect();
    Stage { battery, tariff, cfg }.best(t, x.value(), &outcomes, &vf.soc_grid)
}

/// Counts grid points where a value function increases with SoC.
pub fn monotonicity_violations(vf: &ValueFunction, tol: f64) -> usize {
    let nx = vf.soc_grid.len();
    (0..=vf.steps)
        .map(|t| {
            vf.slice(t)
                .chunks(nx)
                .map(|row| row.windows(2).filter(|w| w[1] > w[0] + tol).count())
                .sum::<usize>()
        })
        .sum()
}

/// Controller following the SDP policy.
#[derive(Debug, Clone)]
pub struct Sdp {
    battery: BatteryParams,
    tariff: Arc<Tariff>,
    noise: Arc<NoiseModel>,
    vf: Arc<ValueFunction>,
    cfg: GridConfig,
}

impl Sdp {
    pub fn new(
        battery: BatteryParams,
        tariff: Arc<Tariff>,
        noise: Arc<NoiseModel>,
        vf: Arc<ValueFunction>,
        cfg: GridConfig,
    ) -> Result<Self> {
        if vf.order != 0 || vf.steps != WEEK_STEPS {
            return Err(Error::Artifact("value function is not a weekly SDP grid".into()));
        }
        Ok(Sdp {
            battery,
            tariff,
            noise,
            vf,
            cfg,
        })
    }
}

impl Controller for Sdp {
    fn name(&self) -> &str {
        "sdp"
    }

    fn decide(&mut self, soc: StateOfCharge, info: &StepInfo<'_>) -> Result<f64> {
        let t = info.step();
        let (u, _) = sdp_decide(
            soc,
            t,
            &self.vf,
            self.noise.at_step(t),
            &self.battery,
            &self.tariff,
            &self.cfg,
        );
        Ok(u)
    }
}

/// Controller following the SDP-AR policy.
#[derive(Debug, Clone)]
pub struct SdpAr {
    name: String,
    battery: BatteryParams,
    tariff: Arc<Tariff>,
    ar: Arc<ArModel>,
    vf: Arc<ValueFunction>,
    cfg: GridConfig,
    lags: Vec<f64>,
}

impl SdpAr {
    pub fn new(
        battery: BatteryParams,
        tariff: Arc<Tariff>,
        ar: Arc<ArModel>,
        vf: Arc<ValueFunction>,
        cfg: GridConfig,
    ) -> Result<Self> {
        if vf.order != ar.order || vf.steps != WEEK_STEPS {
            return Err(Error::Artifact(format!(
                "value function order {} does not match AR order {}",
                vf.order, ar.order
            )));
        }
        Ok(SdpAr {
            name: format!("sdpar-{}", ar.order),
            battery,
            tariff,
            lags: vec![0.0; ar.order],
            ar,
            vf,
            cfg,
        })
    }
}

impl Controller for SdpAr {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, soc: StateOfCharge, info: &StepInfo<'_>) -> Result<f64> {
        let t = info.step();
        for (j, lag) in self.lags.iter_mut().enumerate() {
            *lag = info.past_net(j);
        }
        let (u, _) = sdpar_decide(
            soc,
            t,
            &self.lags,
            &self.vf,
            self.ar.at_step(t),
            &self.battery,
            &self.tariff,
            &self.cfg,
        );
        Ok(u)
    }
}
