//! Independent reference solvers and fixtures shared by the integration
//! tests.

#![allow(dead_code)]

use std::sync::Arc;

use gridbench::calib::{DiscreteDist, SlotAr};
use gridbench::data::{build_chronicles, synth_site, SimulationWeek, SiteRecord, SynthSpec};
use gridbench::model::{BatteryParams, WEEK_STEPS};
use gridbench::tariff::Tariff;
use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Battery with capacity `c` kWh, per-step energy limit `ubar` kWh and
/// efficiencies `rho`.
pub fn battery(c: f64, ubar: f64, rho_c: f64, rho_d: f64) -> BatteryParams {
    BatteryParams {
        capacity: c,
        max_power: ubar / 0.25,
        rho_c,
        rho_d,
    }
}

/// Random weekly tariff with prices on a 0.01 grid.
pub fn random_tariff(rng: &mut ChaCha8Rng) -> Tariff {
    let mut buy = Vec::with_capacity(WEEK_STEPS);
    let mut sell = Vec::with_capacity(WEEK_STEPS);
    for _ in 0..WEEK_STEPS {
        let s = rng.random_range(0..10) as f64 / 100.0;
        let b = s + rng.random_range(0..20) as f64 / 100.0;
        buy.push(b);
        sell.push(s);
    }
    Tariff::new(buy, sell).unwrap()
}

fn exchange(y: f64, buy: f64, sell: f64) -> f64 {
    if y >= 0.0 {
        buy * y
    } else {
        sell * y
    }
}

/// State of charge after applying `u` kWh at the battery terminals.
pub fn next_soc(x: f64, u: f64, b: &BatteryParams) -> f64 {
    if u >= 0.0 {
        x + b.rho_c * u / b.capacity
    } else {
        x + u / (b.rho_d * b.capacity)
    }
}

/// Open-loop optimum over every control sequence drawn from `grid`,
/// `None` when no sequence keeps the state in `[0, 1]`.
pub fn brute_force_plan(
    start: usize,
    x0: f64,
    scenarios: &[Vec<f64>],
    probs: &[f64],
    b: &BatteryParams,
    tariff: &Tariff,
    grid: &[f64],
) -> Option<f64> {
    fn rec(
        j: usize,
        x: f64,
        acc: f64,
        start: usize,
        scenarios: &[Vec<f64>],
        probs: &[f64],
        b: &BatteryParams,
        tariff: &Tariff,
        grid: &[f64],
        best: &mut Option<f64>,
    ) {
        let h = scenarios[0].len();
        if j == h {
            if best.is_none_or(|v| acc < v) {
                *best = Some(acc);
            }
            return;
        }
        let (buy, sell) = tariff.prices(start + j);
        for &u in grid {
            let next = next_soc(x, u, b);
            if !(-1e-12..=1.0 + 1e-12).contains(&next) {
                continue;
            }
            let stage: f64 = scenarios
                .iter()
                .zip(probs)
                .map(|(s, p)| p * exchange(s[j] + u, buy, sell))
                .sum();
            rec(j + 1, next, acc + stage, start, scenarios, probs, b, tariff, grid, best);
        }
    }
    let mut best = None;
    rec(0, x0, 0.0, start, scenarios, probs, b, tariff, grid, &mut best);
    best
}

/// Optimal value of the lookahead problem written as a linear program with
/// separate charge and discharge energies.
pub fn lp_plan(
    start: usize,
    x0: f64,
    scenarios: &[Vec<f64>],
    probs: &[f64],
    b: &BatteryParams,
    tariff: &Tariff,
) -> f64 {
    let h = scenarios[0].len();
    let ubar = b.max_power * 0.25;
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mut charge = Vec::new();
    let mut discharge = Vec::new();
    let mut soc = vec![];
    for _ in 0..h {
        charge.push(lp.add_var(0.0, (0.0, ubar)));
        discharge.push(lp.add_var(0.0, (0.0, ubar)));
        soc.push(lp.add_var(0.0, (0.0, 1.0)));
    }
    for j in 0..h {
        // soc_j = soc_{j-1} + rho_c c_j / C - d_j / (rho_d C)
        let gain = b.rho_c / b.capacity;
        let loss = -1.0 / (b.rho_d * b.capacity);
        if j == 0 {
            lp.add_constraint([(soc[0], 1.0), (charge[0], -gain), (discharge[0], -loss)], ComparisonOp::Eq, x0);
        } else {
            lp.add_constraint(
                [(soc[j], 1.0), (soc[j - 1], -1.0), (charge[j], -gain), (discharge[j], -loss)],
                ComparisonOp::Eq,
                0.0,
            );
        }
        let (buy, sell) = tariff.prices(start + j);
        for (s, p) in scenarios.iter().zip(probs) {
            let import = lp.add_var(p * buy, (0.0, f64::INFINITY));
            let export = lp.add_var(-p * sell, (0.0, f64::INFINITY));
            // import - export = z + c - d
            lp.add_constraint(
                [(import, 1.0), (export, -1.0), (charge[j], -1.0), (discharge[j], 1.0)],
                ComparisonOp::Eq,
                s[j],
            );
        }
    }
    lp.solve().unwrap().into_solution().unwrap().objective()
}

/// Control candidates at `x` on a lossless battery: `n` evenly spaced
/// values over `[-ubar, ubar]` strictly inside the admissible range, plus
/// its ends and zero.
fn candidates(x: f64, b: &BatteryParams, n: usize) -> Vec<f64> {
    let ubar = b.max_power * 0.25;
    let lo = (-ubar).max(-x * b.capacity * b.rho_d);
    let hi = ubar.min((1.0 - x) * b.capacity / b.rho_c);
    let mut out = vec![lo, hi, 0.0];
    for k in 0..n {
        let u = -ubar + 2.0 * ubar * k as f64 / (n - 1) as f64;
        if u > lo && u < hi {
            out.push(u);
        }
    }
    out
}

/// Expected optimal cost over `noise.len()` steps from `x` at step `t`,
/// by exhaustive expectimin over the candidate controls.
pub fn expectimin(
    t: usize,
    x: f64,
    noise: &[DiscreteDist],
    b: &BatteryParams,
    tariff: &Tariff,
    n_controls: usize,
) -> f64 {
    if t == noise.len() {
        return 0.0;
    }
    let (buy, sell) = tariff.prices(t);
    candidates(x, b, n_controls)
        .into_iter()
        .map(|u| {
            let next = next_soc(x, u, b).clamp(0.0, 1.0);
            let future = expectimin(t + 1, next, noise, b, tariff, n_controls);
            noise[t]
                .iter()
                .map(|(z, p)| p * exchange(z + u, buy, sell))
                .sum::<f64>()
                + future
        })
        .fold(f64::INFINITY, f64::min)
}

/// Expectimin on the extended state `(x, lags)` with `lags[0]` the latest
/// net demand, for the AR dynamics `models[t]`.
pub fn expectimin_ar(
    t: usize,
    x: f64,
    lags: &[f64],
    models: &[SlotAr],
    b: &BatteryParams,
    tariff: &Tariff,
    n_controls: usize,
) -> f64 {
    if t == models.len() {
        return 0.0;
    }
    let (buy, sell) = tariff.prices(t);
    let m = &models[t];
    let mean = m.intercept + m.coefficients.iter().zip(lags).map(|(a, z)| a * z).sum::<f64>();
    candidates(x, b, n_controls)
        .into_iter()
        .map(|u| {
            let next = next_soc(x, u, b).clamp(0.0, 1.0);
            m.residuals
                .iter()
                .map(|(e, p)| {
                    let z = mean + e;
                    let mut next_lags = vec![z];
                    next_lags.extend_from_slice(&lags[..lags.len() - 1]);
                    p * (exchange(z + u, buy, sell)
                        + expectimin_ar(t + 1, next, &next_lags, models, b, tariff, n_controls))
                })
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Synthetic site with every calendar week used for simulation.
pub fn simulation_weeks(rec: SiteRecord) -> Vec<SimulationWeek> {
    let rec = Arc::new(rec);
    build_chronicles(&rec).0.into_iter().map(SimulationWeek::new).collect()
}

pub fn small_site(id: &str, weeks: usize, seed: u64) -> SiteRecord {
    synth_site(&SynthSpec::new(id, weeks), seed).unwrap()
}

/// Grid-aligned lossless lookahead instance: exact, brute force and LP
/// must agree.
pub fn check_aligned_lookahead(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let b = battery(10.0, 1.0, 1.0, 1.0);
    let tariff = random_tariff(&mut r);
    let h = r.random_range(1..=3);
    let n = r.random_range(1..=2);
    let scenarios: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..h).map(|_| r.random_range(-15..=15) as f64 / 10.0).collect())
        .collect();
    let probs = if n == 1 { vec![1.0] } else { let p = r.random_range(1..=9) as f64 / 10.0; vec![p, 1.0 - p] };
    let x0 = r.random_range(0..=10) as f64 / 10.0;
    let start = r.random_range(0..WEEK_STEPS);
    let exact = solve(start, x0, &scenarios, &probs, &b, &tariff)?;
    let grid: Vec<f64> = (-10..=10).map(|k| k as f64 / 10.0).collect();
    let brute = brute_force_plan(start, x0, &scenarios, &probs, &b, &tariff, &grid).unwrap();
    let lp = lp_plan(start, x0, &scenarios, &probs, &b, &tariff);
    if (exact - brute).abs() > 1e-9 || (exact - lp).abs() > 1e-9 {
        return Err(format!("seed {seed}: exact {exact}, brute {brute}, lp {lp}"));
    }
    Ok(())
}

/// Lossy lookahead instance: the exact value matches the LP and never
/// exceeds the best gridded plan.
pub fn check_lossy_lookahead(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let b = battery(
        r.random_range(2.0..20.0),
        r.random_range(0.5..5.0),
        r.random_range(0.8..=1.0),
        r.random_range(0.8..=1.0),
    );
    let tariff = random_tariff(&mut r);
    let h = r.random_range(1..=3);
    let n = r.random_range(1..=2);
    let scenarios: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..h).map(|_| r.random_range(-6.0..6.0)).collect())
        .collect();
    let probs = if n == 1 { vec![1.0] } else { let p = r.random_range(0.05..0.95); vec![p, 1.0 - p] };
    let x0 = r.random_range(0.0..=1.0);
    let start = r.random_range(0..WEEK_STEPS);
    let exact = solve(start, x0, &scenarios, &probs, &b, &tariff)?;
    let lp = lp_plan(start, x0, &scenarios, &probs, &b, &tariff);
    let ubar = b.max_power * 0.25;
    let grid: Vec<f64> = (0..=20).map(|k| -ubar + ubar * k as f64 / 10.0).collect();
    let brute = brute_force_plan(start, x0, &scenarios, &probs, &b, &tariff, &grid);
    let scale = 1.0 + exact.abs();
    if (exact - lp).abs() > 1e-7 * scale {
        return Err(format!("seed {seed}: exact {exact} vs lp {lp}"));
    }
    if let Some(brute) = brute {
        if exact > brute + 1e-9 * scale {
            return Err(format!("seed {seed}: exact {exact} above gridded plan {brute}"));
        }
    }
    Ok(())
}

fn solve(
    start: usize,
    x0: f64,
    scenarios: &[Vec<f64>],
    probs: &[f64],
    b: &BatteryParams,
    tariff: &Tariff,
) -> Result<f64, String> {
    let p = gridbench::controllers::LookaheadProblem {
        start_step: start,
        soc: gridbench::model::StateOfCharge::new(x0).map_err(|e| e.to_string())?,
        scenarios,
        probabilities: probs,
        battery: b,
        tariff,
    };
    let sol = gridbench::controllers::solve_lookahead(&p).map_err(|e| e.to_string())?;
    let plan = gridbench::controllers::solve_plan(&p).map_err(|e| e.to_string())?;
    if (sol.value - plan.value).abs() > 1e-9 * (1.0 + sol.value.abs()) {
        return Err(format!("decision value {} differs from plan value {}", sol.value, plan.value));
    }
    Ok(sol.value)
}

/// Lossless battery whose candidate controls map grid states onto grid
/// states: capacity 9 kWh, 19 kWh per step, 10 SoC points, 20 controls.
pub fn aligned_sdp_battery() -> BatteryParams {
    battery(9.0, 19.0, 1.0, 1.0)
}

fn random_dist(r: &mut ChaCha8Rng) -> DiscreteDist {
    let n = r.random_range(1..=2);
    let values: Vec<f64> = (0..n).map(|_| r.random_range(-30..=30) as f64 / 2.0).collect();
    let probs = if n == 1 { vec![1.0] } else { let p = r.random_range(1..=9) as f64 / 10.0; vec![p, 1.0 - p] };
    DiscreteDist::new(values, probs).unwrap()
}

/// SDP backward recursion against expectimin on a grid-aligned instance.
pub fn check_sdp(seed: u64) -> Result<(), String> {
    use gridbench::controllers::{monotonicity_violations, sdp_backward, GridConfig};
    let mut r = rng(seed);
    let b = aligned_sdp_battery();
    let tariff = random_tariff(&mut r);
    let h = r.random_range(1..=3);
    let noise: Vec<DiscreteDist> = (0..h).map(|_| random_dist(&mut r)).collect();
    let cfg = GridConfig::default();
    let vf = sdp_backward(h, |t| &noise[t], &b, &tariff, &cfg).map_err(|e| e.to_string())?;
    if monotonicity_violations(&vf, 1e-9) > 0 {
        return Err(format!("seed {seed}: value function increases with SoC"));
    }
    for (ix, &x) in vf.soc_grid.iter().enumerate() {
        let oracle = expectimin(0, x, &noise, &b, &tariff, cfg.control_points);
        let got = vf.at(0, ix, 0);
        if (oracle - got).abs() > 1e-9 * (1.0 + oracle.abs()) {
            return Err(format!("seed {seed}: x {x}: recursion {got} vs expectimin {oracle}"));
        }
    }
    Ok(())
}

/// AR dynamics that keep every reachable lag on the lag grid: the lag
/// moves by one grid step per residual, either persisting the latest lag,
/// mirroring it, or (order 2) repeating the older lag.
pub fn check_sdpar(seed: u64) -> Result<(), String> {
    use gridbench::controllers::{monotonicity_violations, sdpar_backward, GridConfig};
    let mut r = rng(seed);
    let b = aligned_sdp_battery();
    let tariff = random_tariff(&mut r);
    let h = r.random_range(1..=3);
    let order = r.random_range(1..=2);
    let (zmin, zmax) = (-9.0, 9.0);
    let step = (zmax - zmin) / 9.0;
    let models: Vec<SlotAr> = (0..h)
        .map(|_| {
            let (coefficients, intercept) = match (order, r.random_range(0..2)) {
                (1, 0) => (vec![1.0], 0.0),
                (1, _) => (vec![-1.0], zmin + zmax),
                (_, 0) => (vec![1.0, 0.0], 0.0),
                (_, _) => (vec![0.0, 1.0], 0.0),
            };
            let p = r.random_range(1..=9) as f64 / 10.0;
            SlotAr {
                coefficients,
                intercept,
                residuals: DiscreteDist::new(vec![-step, step], vec![p, 1.0 - p]).unwrap(),
                samples: 0,
            }
        })
        .collect();
    let cfg = GridConfig::default();
    let vf = sdpar_backward(h, order, (zmin, zmax), |t| &models[t], &b, &tariff, &cfg)
        .map_err(|e| e.to_string())?;
    if monotonicity_violations(&vf, 1e-9) > 0 {
        return Err(format!("seed {seed}: value function increases with SoC"));
    }
    // Interior lag states stay on the grid for three steps.
    for _ in 0..4 {
        let digits: Vec<usize> = (0..order).map(|_| r.random_range(3..=6)).collect();
        let lags: Vec<f64> = digits.iter().map(|&d| vf.lag_grid[d]).collect();
        let lag_state = digits.iter().rev().fold(0, |acc, &d| acc * vf.lag_grid.len() + d);
        for (ix, &x) in vf.soc_grid.iter().enumerate() {
            let oracle = expectimin_ar(0, x, &lags, &models, &b, &tariff, cfg.control_points);
            let got = vf.at(0, ix, lag_state);
            if (oracle - got).abs() > 1e-9 * (1.0 + oracle.abs()) {
                return Err(format!(
                    "seed {seed}: x {x}, lags {lags:?}: recursion {got} vs expectimin {oracle}"
                ));
            }
        }
    }
    Ok(())
}
