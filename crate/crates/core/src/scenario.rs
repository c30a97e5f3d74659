//! Net-demand scenarios for open-loop feedback control.
//!
//! Forecast errors are clustered at a few day-part separators (leads of
//! 15 min, 1 h, 2 h, 4 h, 12 h and 24 h). A scenario picks one cluster per
//! separator by walking a Markov chain between consecutive separators and
//! adds the linearly interpolated error path to the forecast.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::CalibrationWeek;
use crate::error::{Error, Result};
use crate::kmeans::{kmeans_1d, nearest, KMeansConfig};
use crate::model::{Calendar, DayType, StepInfo, DAY_STEPS, WEEK_STEPS};
use crate::seed;

/// Leads at which errors are clustered.
pub const SEPARATORS: [usize; 6] = [1, 4, 8, 16, 48, 96];

pub const FORMAT: &str = "scenario_model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kmeans: KMeansConfig,
    /// Fail when a separator has fewer distinct errors than clusters
    /// instead of letting clusters coincide.
    pub strict_distinct: bool,
    /// Pseudo-count added to every transition and initial count.
    pub pseudo_count: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            kmeans: KMeansConfig::default(),
            strict_distinct: false,
            pseudo_count: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioModel {
    pub format: String,
    pub version: u32,
    pub separators: Vec<usize>,
    pub clusters: usize,
    /// `centers[day_type][separator]`, sorted ascending.
    pub centers: Vec<Vec<Vec<f64>>>,
    /// `transitions[day_type][m][a][b]`: probability of cluster `b` at
    /// separator `m + 1` after cluster `a` at separator `m`.
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    /// `initial[day_type][quarter_hour][a]`: distribution of the cluster at
    /// the first separator.
    pub initial: Vec<Vec<Vec<f64>>>,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Net demand for leads `1..=96`.
    pub net_demand: Vec<f64>,
    pub probability: f64,
}

fn normalize(counts: &[f64]) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    counts.iter().map(|c| c / total).collect()
}

/// Forecast error `z_{t+j} - zhat_{t,t+j}` for every separator `j` with
/// `t + j` inside the week.
fn separator_errors(week: &CalibrationWeek, t: usize) -> Vec<Option<f64>> {
    let info = week.step(t);
    SEPARATORS
        .iter()
        .map(|&j| (t + j <= WEEK_STEPS).then(|| week.realized(t + j).net() - info.forecast_net(j)))
        .collect()
}

pub fn fit_scenario_model(calibration: &[CalibrationWeek], cfg: &ScenarioConfig) -> Result<ScenarioModel> {
    let k = cfg.kmeans.k;
    let n_sep = SEPARATORS.len();
    if calibration.is_empty() {
        return Err(Error::InsufficientData("no calibration weeks".into()));
    }
    // errors[week][t][sep]
    let errors: Vec<Vec<Vec<Option<f64>>>> = calibration
        .iter()
        .map(|w| (0..WEEK_STEPS).map(|t| separator_errors(w, t)).collect())
        .collect();

    let mut centers = vec![vec![Vec::new(); n_sep]; 2];
    for day in DayType::ALL {
        for m in 0..n_sep {
            let sample: Vec<f64> = errors
                .iter()
                .flat_map(|week| {
                    week.iter()
                        .enumerate()
                        .filter(move |(t, _)| Calendar::of_step(*t).day_type == day)
                        .filter_map(move |(_, e)| e[m])
                })
                .collect();
            if cfg.strict_distinct {
                let mut distinct = sample.clone();
                distinct.sort_by(f64::total_cmp);
                distinct.dedup();
                if distinct.len() < k {
                    return Err(Error::DegenerateClusters(format!(
                        "{} distinct errors at lead {} on {:?} days for {k} clusters; reduce k",
                        distinct.len(),
                        SEPARATORS[m],
                        day
                    )));
                }
            }
            let label = format!("{}", SEPARATORS[m]);
            let mut rng = seed::stream(cfg.seed, &["scenario", day.label(), &label]);
            let cl = kmeans_1d(&sample, &cfg.kmeans, &mut rng).map_err(|e| match e {
                Error::DegenerateClusters(msg) => Error::DegenerateClusters(format!(
                    "lead {} on {:?} days: {msg}",
                    SEPARATORS[m], day
                )),
                e => e,
            })?;
            centers[day.index()][m] = cl.centers;
        }
    }

    let mut trans_counts = vec![vec![vec![vec![cfg.pseudo_count; k]; k]; n_sep - 1]; 2];
    let mut init_counts = vec![vec![vec![cfg.pseudo_count; k]; DAY_STEPS]; 2];
    for week in &errors {
        for (t, e) in week.iter().enumerate() {
            let cal = Calendar::of_step(t);
            let d = cal.day_type.index();
            let labels: Vec<Option<usize>> = e
                .iter()
                .enumerate()
                .map(|(m, v)| v.map(|v| nearest(&centers[d][m], v)))
                .collect();
            if let Some(a) = labels[0] {
                init_counts[d][cal.quarter_hour][a] += 1.0;
            }
            for m in 0..n_sep - 1 {
                if let (Some(a), Some(b)) = (labels[m], labels[m + 1]) {
                    trans_counts[d][m][a][b] += 1.0;
                }
            }
        }
    }
    let transitions = trans_counts
        .iter()
        .map(|per_day| {
            per_day
                .iter()
                .map(|mat| mat.iter().map(|row| normalize(row)).collect())
                .collect()
        })
        .collect();
    let initial = init_counts
        .iter()
        .map(|per_day| per_day.iter().map(|row| normalize(row)).collect())
        .collect();
    let model = ScenarioModel {
        format: FORMAT.into(),
        version: VERSION,
        separators: SEPARATORS.to_vec(),
        clusters: k,
        centers,
        transitions,
        initial,
        config: *cfg,
    };
    model.validate()?;
    Ok(model)
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let mut target = rng.random::<f64>();
    for (i, p) in probs.iter().enumerate() {
        if target < *p {
            return i;
        }
        target -= p;
    }
    // Rounding left a sliver of mass; take the last supported index.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

impl ScenarioModel {
    /// Checks the structural invariants of a fitted or loaded model.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Artifact(format!("scenario model: {m}")));
        if self.format != FORMAT || self.version != VERSION {
            return bad(format!("unsupported format {} v{}", self.format, self.version));
        }
        if self.separators != SEPARATORS {
            return bad("unexpected separators".into());
        }
        let k = self.clusters;
        let n_sep = SEPARATORS.len();
        let stochastic = |row: &Vec<f64>| {
            row.len() == k
                && row.iter().all(|p| *p >= 0.0 && p.is_finite())
                && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9
        };
        let shapes = self.centers.len() == 2
            && self.transitions.len() == 2
            && self.initial.len() == 2
            && self.centers.iter().all(|d| d.len() == n_sep && d.iter().all(|c| c.len() == k))
            && self.transitions.iter().all(|d| d.len() == n_sep - 1 && d.iter().all(|m| m.len() == k))
            && self.initial.iter().all(|d| d.len() == DAY_STEPS);
        if !shapes {
            return bad("inconsistent dimensions".into());
        }
        if !self.transitions.iter().flatten().flatten().all(stochastic) {
            return bad("transition row does not sum to one".into());
        }
        if !self.initial.iter().flatten().all(stochastic) {
            return bad("initial distribution does not sum to one".into());
        }
        Ok(())
    }

    /// Draws one error skeleton: cluster index per separator and its probability.
    fn draw<R: Rng + ?Sized>(&self, cal: Calendar, rng: &mut R) -> (Vec<usize>, f64) {
        let d = cal.day_type.index();
        let init = &self.initial[d][cal.quarter_hour];
        let mut path = Vec::with_capacity(SEPARATORS.len());
        let first = sample_index(init, rng);
        let mut prob = init[first];
        path.push(first);
        for m in 0..SEPARATORS.len() - 1 {
            let row = &self.transitions[d][m][path[m]];
            let next = sample_index(row, rng);
            prob *= row[next];
            path.push(next);
        }
        (path, prob)
    }

    /// Error path for leads `1..=96` through the given separator errors.
    pub fn interpolate_errors(separator_errors: &[f64]) -> Vec<f64> {
        let last = *SEPARATORS.last().unwrap();
        let mut out = vec![0.0; last];
        for m in 0..SEPARATORS.len() - 1 {
            let (j0, j1) = (SEPARATORS[m], SEPARATORS[m + 1]);
            let (e0, e1) = (separator_errors[m], separator_errors[m + 1]);
            for lead in j0..=j1 {
                let w = (lead - j0) as f64 / (j1 - j0) as f64;
                out[lead - 1] = if lead == j1 { e1 } else { e0 + (e1 - e0) * w };
            }
        }
        out
    }
}

/// Samples `n` scenarios for the information state `info`.
///
/// Probabilities are the products of the sampled initial and transition
/// probabilities, renormalized over the batch.
pub fn sample_scenarios<R: Rng + ?Sized>(
    model: &ScenarioModel,
    info: &StepInfo<'_>,
    n: usize,
    rng: &mut R,
) -> Vec<Scenario> {
    let cal = info.calendar();
    let d = cal.day_type.index();
    let forecast = info.forecast_net_path(*SEPARATORS.last().unwrap());
    let mut out: Vec<Scenario> = (0..n)
        .map(|_| {
            let (path, prob) = model.draw(cal, rng);
            let sep_err: Vec<f64> = path
                .iter()
                .enumerate()
                .map(|(m, &c)| model.centers[d][m][c])
                .collect();
            let errors = ScenarioModel::interpolate_errors(&sep_err);
            Scenario {
                net_demand: forecast.iter().zip(&errors).map(|(f, e)| f + e).collect(),
                probability: prob,
            }
        })
        .collect();
    let total: f64 = out.iter().map(|s| s.probability).sum();
    for s in &mut out {
        s.probability /= total;
    }
    out
}

/// Merges identical paths, adding their probabilities. Order of first
/// appearance is kept.
pub fn merge_duplicates(scenarios: Vec<Scenario>) -> Vec<Scenario> {
    let mut out: Vec<Scenario> = Vec::with_capacity(scenarios.len());
    for s in scenarios {
        match out.iter_mut().find(|o| o.net_demand == s.net_demand) {
            Some(o) => o.probability += s.probability,
            None => out.push(s),
        }
    }
    out
}
