//! Exact solver for the deterministic and scenario-weighted lookahead
//! problems shared by MPC, OLFC and the anticipative bound.
//!
//! The problem is rewritten in SoC increments. For an increment `d` the
//! cheapest control is `u(d)`, the inverse of the dynamics, and the
//! expected stage cost `psi(d) = sum_s p_s * l(z_s + u(d))` is convex
//! piecewise linear because the exchange cost is nondecreasing and convex
//! (buy >= sell >= 0) and `u` is convex (charge and discharge efficiencies
//! multiply to at most one). The cost-to-go then obeys
//! `J_t = restrict_[0,1](J_{t+1} [] psi_t(-.))` where `[]` is infimal
//! convolution, computed exactly by merging segments.

use crate::error::{Error, Result};
use crate::model::{admissible_interval, exchange_cost, BatteryParams, StateOfCharge};
use crate::pwl::ConvexPwl;
use crate::tariff::Tariff;

/// Tolerance on scenario probabilities summing to one.
pub const PROBABILITY_TOL: f64 = 1e-9;

/// A lookahead problem starting at week step `start_step`.
///
/// Scenario `s` holds the net demand of the next `h` steps; entry `j` is
/// the uncertainty realized during step `start_step + j`.
#[derive(Debug, Clone, Copy)]
pub struct LookaheadProblem<'a> {
    pub start_step: usize,
    pub soc: StateOfCharge,
    pub scenarios: &'a [Vec<f64>],
    pub probabilities: &'a [f64],
    pub battery: &'a BatteryParams,
    pub tariff: &'a Tariff,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LookaheadSolution {
    /// First control of an optimal plan, inside the admissible interval.
    pub control: f64,
    /// Optimal expected cost over the horizon.
    pub value: f64,
}

/// An optimal open-loop plan.
#[derive(Debug, Clone, PartialEq)]
pub struct LookaheadPlan {
    pub controls: Vec<f64>,
    pub value: f64,
}

impl LookaheadProblem<'_> {
    pub fn horizon(&self) -> usize {
        self.scenarios.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.horizon();
        if h == 0 {
            return Err(Error::InvalidParameter("lookahead horizon must be >= 1".into()));
        }
        if self.scenarios.len() != self.probabilities.len() {
            return Err(Error::InvalidParameter(
                "one probability per scenario is required".into(),
            ));
        }
        if self.scenarios.iter().any(|s| s.len() != h) {
            return Err(Error::InvalidParameter("scenarios differ in length".into()));
        }
        if self
            .scenarios
            .iter()
            .flatten()
            .any(|z| !z.is_finite())
        {
            return Err(Error::InvalidParameter("non-finite scenario value".into()));
        }
        if self.probabilities.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidParameter("negative probability".into()));
        }
        let total: f64 = self.probabilities.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::InvalidParameter(format!(
                "scenario probabilities sum to {total}"
            )));
        }
        self.battery.validate()?;
        if self.battery.rho_c * self.battery.rho_d > 1.0 {
            return Err(Error::InvalidParameter(
                "round-trip efficiency above one".into(),
            ));
        }
        Ok(())
    }

    fn increment_bounds(&self) -> (f64, f64) {
        let b = self.battery;
        let umax = b.max_step_energy();
        (b.increment_for_control(-umax), b.increment_for_control(umax))
    }

    /// Expected stage cost of step `j` as a function of the SoC increment.
    fn stage_function(&self, j: usize) -> ConvexPwl {
        let b = self.battery;
        let (buy, sell) = self.tariff.prices(self.start_step + j);
        let (dmin, dmax) = self.increment_bounds();

        // Each scenario's exchange changes sign where u(d) = -z.
        let mut kinks: Vec<(f64, f64)> = Vec::with_capacity(self.scenarios.len());
        let mut positive_mass = 0.0;
        for (path, &p) in self.scenarios.iter().zip(self.probabilities) {
            if p == 0.0 {
                continue;
            }
            let d = b.increment_for_control(-path[j]);
            if d <= dmin {
                positive_mass += p;
            } else if d < dmax {
                kinks.push((d, p));
            }
        }
        kinks.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut xs: Vec<f64> = Vec::with_capacity(kinks.len() + 3);
        xs.extend([dmin, 0.0, dmax]);
        xs.extend(kinks.iter().map(|k| k.0));
        xs.sort_by(f64::total_cmp);
        xs.dedup();

        let value_lo: f64 = self
            .scenarios
            .iter()
            .zip(self.probabilities)
            .map(|(path, &p)| p * exchange_cost(path[j] + b.control_for_increment(dmin), buy, sell))
            .sum();

        let mut slopes = Vec::with_capacity(xs.len() - 1);
        let mut k = 0;
        for w in xs.windows(2) {
            while k < kinks.len() && kinks[k].0 <= w[0] {
                positive_mass += kinks[k].1;
                k += 1;
            }
            let du = if w[1] <= 0.0 {
                b.rho_d * b.capacity
            } else {
                b.capacity / b.rho_c
            };
            let dcost = sell + (buy - sell) * positive_mass.min(1.0);
            slopes.push(du * dcost);
        }
        ConvexPwl::from_breakpoints(&xs, value_lo, &slopes)
    }

    fn slope_tol(&self) -> f64 {
        let b = self.battery;
        1e-12 * (1.0 + self.tariff.max_price() * b.capacity / b.rho_c)
    }

    /// Cost-to-go functions `J_1..=J_h` on `[0, 1]`; `J_h` is zero.
    fn cost_to_go(&self) -> Vec<ConvexPwl> {
        let h = self.horizon();
        let mut out = vec![ConvexPwl::zero(0.0, 1.0)];
        for j in (1..h).rev() {
            let next = out.last().unwrap();
            let psi = self.stage_function(j).reflect();
            out.push(next.inf_convolve(&psi).restrict(0.0, 1.0));
        }
        out.reverse();
        out
    }

    /// Best increment from `x` at step `j` given the next cost-to-go.
    fn step_decision(&self, j: usize, x: f64, next: &ConvexPwl) -> (f64, f64) {
        let b = self.battery;
        let iv = admissible_interval(StateOfCharge::saturating(x), b);
        let lo = b.increment_for_control(iv.lo).max(-x);
        let hi = b.increment_for_control(iv.hi).min(1.0 - x);
        let total = self
            .stage_function(j)
            .restrict(lo, hi)
            .add(&next.shift(x));
        let (left, right) = total.argmin_interval(self.slope_tol());
        let delta = 0.0f64.clamp(left, right.max(left));
        let u = iv.clamp(b.control_for_increment(delta));
        (u, total.eval(delta))
    }
}

/// Solves the problem and returns the first control and the optimal value.
pub fn solve_lookahead(p: &LookaheadProblem<'_>) -> Result<LookaheadSolution> {
    p.validate()?;
    let j = p.cost_to_go();
    let (control, value) = p.step_decision(0, p.soc.value(), &j[0]);
    if !value.is_finite() {
        return Err(Error::Solver(format!("non-finite lookahead value {value}")));
    }
    Ok(LookaheadSolution { control, value })
}

/// Solves the problem and rolls out a full optimal plan.
///
/// With several scenarios the plan is the open-loop optimum; its value is
/// the optimal expected cost.
pub fn solve_plan(p: &LookaheadProblem<'_>) -> Result<LookaheadPlan> {
    p.validate()?;
    let j = p.cost_to_go();
    let mut x = p.soc.value();
    let mut controls = Vec::with_capacity(p.horizon());
    let mut value = f64::NAN;
    for (step, next) in j.iter().enumerate() {
        let (u, v) = p.step_decision(step, x, next);
        if step == 0 {
            value = v;
        }
        controls.push(u);
        x = (x + p.battery.increment_for_control(u)).clamp(0.0, 1.0);
    }
    if !value.is_finite() {
        return Err(Error::Solver(format!("non-finite lookahead value {value}")));
    }
    Ok(LookaheadPlan { controls, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{dynamics, stage_cost, Uncertainty};

    fn params(c: f64, lbar: f64, rho: f64) -> BatteryParams {
        BatteryParams::new(c, lbar, rho, rho).unwrap()
    }

    #[test]
    fn single_step_never_charges() {
        let b = params(10.0, 4.0, 0.95);
        let tariff = Tariff::flat(0.1, 0.05).unwrap();
        let sc = vec![vec![4.0]];
        let sol = solve_lookahead(&LookaheadProblem {
            start_step: 0,
            soc: StateOfCharge::EMPTY,
            scenarios: &sc,
            probabilities: &[1.0],
            battery: &b,
            tariff: &tariff,
        })
        .unwrap();
        assert_eq!(sol.control, 0.0);
        assert!((sol.value - 0.4).abs() < 1e-12);
    }

    #[test]
    fn stores_free_surplus() {
        let b = params(1000.0, 4.0, 1.0);
        let mut buy = vec![1.0; 672];
        buy[1] = 10.0;
        let tariff = Tariff::new(buy, vec![0.0; 672]).unwrap();
        let sc = vec![vec![-1.0, 1.0]];
        let sol = solve_lookahead(&LookaheadProblem {
            start_step: 0,
            soc: StateOfCharge::EMPTY,
            scenarios: &sc,
            probabilities: &[1.0],
            battery: &b,
            tariff: &tariff,
        })
        .unwrap();
        assert!((sol.control - 1.0).abs() < 1e-12);
        assert!(sol.value.abs() < 1e-12);
    }

    #[test]
    fn plan_cost_matches_value() {
        let b = params(20.0, 8.0, 0.9);
        let tariff = Tariff::default_schedule();
        let path: Vec<f64> = (0..200).map(|i| 3.0 * ((i as f64) / 7.0).sin() + 0.5).collect();
        let sc = vec![path.clone()];
        let p = LookaheadProblem {
            start_step: 10,
            soc: StateOfCharge::new(0.3).unwrap(),
            scenarios: &sc,
            probabilities: &[1.0],
            battery: &b,
            tariff: &tariff,
        };
        let plan = solve_plan(&p).unwrap();
        let mut x = 0.3;
        let mut cost = 0.0;
        for (j, &u) in plan.controls.iter().enumerate() {
            let iv = admissible_interval(StateOfCharge::new(x).unwrap(), &b);
            assert!(iv.contains(u, 1e-12));
            let (buy, sell) = tariff.prices(10 + j);
            cost += stage_cost(u, Uncertainty::new(0.0, path[j]), buy, sell);
            x = dynamics(StateOfCharge::new(x).unwrap(), u, &b).clamp(0.0, 1.0);
        }
        assert!((cost - plan.value).abs() < 1e-9 * (1.0 + cost.abs()));
        assert_eq!(solve_lookahead(&p).unwrap().value, plan.value);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let b = params(10.0, 4.0, 0.95);
        let tariff = Tariff::flat(0.1, 0.05).unwrap();
        let sc = vec![vec![1.0], vec![2.0]];
        let p = LookaheadProblem {
            start_step: 0,
            soc: StateOfCharge::EMPTY,
            scenarios: &sc,
            probabilities: &[0.5, 0.6],
            battery: &b,
            tariff: &tariff,
        };
        assert!(solve_lookahead(&p).is_err());
    }
}
