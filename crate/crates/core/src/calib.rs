//! Offline calibration for the cost-to-go controllers: per-slot discrete
//! net-demand distributions and per-slot autoregressive models.

use serde::{Deserialize, Serialize};

use crate::data::CalibrationWeek;
use crate::error::{Error, Result};
use crate::kmeans::{kmeans_1d, KMeansConfig};
use crate::model::{Calendar, DayType, DAY_STEPS, SLOTS, WEEK_STEPS};
use crate::seed;

pub const NOISE_FORMAT: &str = "noise_model";
pub const AR_FORMAT: &str = "ar_model";
pub const VERSION: u32 = 1;

/// Finite discrete distribution with distinct sorted support points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDist {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let d = DiscreteDist { values, probs };
        d.validate()?;
        Ok(d)
    }

    pub fn point(v: f64) -> Self {
        DiscreteDist {
            values: vec![v],
            probs: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = !self.values.is_empty()
            && self.values.len() == self.probs.len()
            && self.values.iter().all(|v| v.is_finite())
            && self.probs.iter().all(|p| p.is_finite() && *p >= 0.0)
            && (self.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("not a distribution: {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    /// K-means quantization of a sample; each center weighted by its share.
    pub fn quantize(sample: &[f64], cfg: &KMeansConfig, seed: u64, labels: &[&str]) -> Result<Self> {
        let mut rng = seed::stream(seed, labels);
        let cl = kmeans_1d(sample, cfg, &mut rng)?;
        let (values, probs) = cl.support().into_iter().unzip();
        Ok(DiscreteDist { values, probs })
    }
}

fn slot_name(slot: usize) -> String {
    let day = if slot < DAY_STEPS { DayType::Weekday } else { DayType::Weekend };
    let qh = slot % DAY_STEPS;
    format!("{} {:02}:{:02}", day.label(), qh / 4, 15 * (qh % 4))
}

/// Distribution of the net demand realized during step `t`, keyed by the
/// calendar slot of `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub format: String,
    pub version: u32,
    pub kmeans: KMeansConfig,
    pub seed: u64,
    pub slots: Vec<DiscreteDist>,
}

impl NoiseModel {
    pub fn from_slots(slots: Vec<DiscreteDist>) -> Result<Self> {
        let m = NoiseModel {
            format: NOISE_FORMAT.into(),
            version: VERSION,
            kmeans: KMeansConfig::default(),
            seed: 0,
            slots,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != NOISE_FORMAT || self.version != VERSION {
            return Err(Error::Artifact(format!(
                "unsupported noise model {} v{}",
                self.format, self.version
            )));
        }
        if self.slots.len() != SLOTS {
            return Err(Error::Artifact(format!("noise model needs {SLOTS} slots")));
        }
        self.slots.iter().try_for_each(DiscreteDist::validate)
    }

    /// Distribution of the uncertainty realized during step `t`.
    pub fn at_step(&self, t: usize) -> &DiscreteDist {
        &self.slots[Calendar::of_step(t).slot()]
    }
}

/// Net demand realized during each step `t`, `z_{t+1}`, grouped by slot.
fn slot_targets(calibration: &[CalibrationWeek]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new(); SLOTS];
    for w in calibration {
        for t in 0..WEEK_STEPS {
            out[Calendar::of_step(t).slot()].push(w.realized(t + 1).net());
        }
    }
    out
}

pub fn fit_noise_model(calibration: &[CalibrationWeek], kmeans: &KMeansConfig, seed: u64) -> Result<NoiseModel> {
    let samples = slot_targets(calibration);
    let slots = samples
        .iter()
        .enumerate()
        .map(|(slot, sample)| {
            if sample.len() < kmeans.k {
                return Err(Error::InsufficientData(format!(
                    "slot {slot} ({}) has {} samples for {} clusters; add calibration weeks or reduce k",
                    slot_name(slot),
                    sample.len(),
                    kmeans.k
                )));
            }
            DiscreteDist::quantize(sample, kmeans, seed, &["noise", &slot.to_string()])
        })
        .collect::<Result<_>>()?;
    Ok(NoiseModel {
        format: NOISE_FORMAT.into(),
        version: VERSION,
        kmeans: *kmeans,
        seed,
        slots,
    })
}

/// Least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Whether the ridge fallback was used.
    pub ridge: bool,
}

pub const RIDGE: f64 = 1e-8;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot is negligible.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Ordinary least squares of `y` on the rows of `x` via the normal
/// equations, falling back to ridge regularization when they are singular.
pub fn ols(x: &[Vec<f64>], y: &[f64]) -> Result<OlsFit> {
    let p = x.first().map_or(0, Vec::len);
    if p == 0 || x.len() != y.len() || x.len() < p {
        return Err(Error::InsufficientData(format!(
            "{} observations for {p} regressors",
            x.len()
        )));
    }
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, &target) in x.iter().zip(y) {
        for i in 0..p {
            xty[i] += row[i] * target;
            for j in 0..p {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    let (coefficients, ridge) = match solve_dense(xtx.clone(), xty.clone()) {
        Some(c) => (c, false),
        None => {
            log::warn!("singular normal equations, using ridge fallback");
            for (i, row) in xtx.iter_mut().enumerate() {
                row[i] += RIDGE;
            }
            let c = solve_dense(xtx, xty)
                .ok_or_else(|| Error::Solver("ridge system is singular".into()))?;
            (c, true)
        }
    };
    let residuals = x
        .iter()
        .zip(y)
        .map(|(row, &t)| t - row.iter().zip(&coefficients).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    Ok(OlsFit {
        coefficients,
        residuals,
        ridge,
    })
}

/// Autoregressive model of one slot:
/// `z_{t+1} = sum_j coefficients[j] * z_{t-j} + intercept + noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAr {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub residuals: DiscreteDist,
    pub samples: usize,
}

impl SlotAr {
    /// Prediction without noise; `lags[0]` is the most recent value.
    #[inline]
    pub fn predict(&self, lags: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .zip(lags)
            .map(|(a, z)| a * z)
            .sum::<f64>()
            + self.intercept
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArConfig {
    pub order: usize,
    pub kmeans: KMeansConfig,
    /// Adjacent slots of the same day type pooled on each side; `None`
    /// picks the smallest width giving every slot `10 * (order + 1)`
    /// samples.
    pub pooling: Option<usize>,
    pub seed: u64,
}

impl ArConfig {
    pub fn new(order: usize) -> Self {
        ArConfig {
            order,
            kmeans: KMeansConfig::default(),
            pooling: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub format: String,
    pub version: u32,
    pub order: usize,
    pub pooling: usize,
    /// Range of calibration net demand, used for the lag grid.
    pub lag_range: (f64, f64),
    pub kmeans: KMeansConfig,
    pub seed: u64,
    pub slots: Vec<SlotAr>,
}

impl ArModel {
    pub fn new(order: usize, lag_range: (f64, f64), slots: Vec<SlotAr>) -> Result<Self> {
        let m = ArModel {
            format: AR_FORMAT.into(),
            version: VERSION,
            order,
            pooling: 0,
            lag_range,
            kmeans: KMeansConfig::default(),
            seed: 0,
            slots,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Artifact(format!("ar model: {m}")));
        if self.format != AR_FORMAT || self.version != VERSION {
            return bad(format!("unsupported format {} v{}", self.format, self.version));
        }
        if self.order == 0 {
            return bad("order must be >= 1".into());
        }
        if self.slots.len() != SLOTS {
            return bad(format!("expected {SLOTS} slots"));
        }
        if !(self.lag_range.0.is_finite() && self.lag_range.1.is_finite() && self.lag_range.0 <= self.lag_range.1) {
            return bad("invalid lag range".into());
        }
        for s in &self.slots {
            if s.coefficients.len() != self.order
                || !s.coefficients.iter().all(|a| a.is_finite())
                || !s.intercept.is_finite()
            {
                return bad("invalid coefficients".into());
            }
            s.residuals.validate()?;
        }
        Ok(())
    }

    /// Model predicting the net demand realized during step `t`.
    pub fn at_step(&self, t: usize) -> &SlotAr {
        &self.slots[Calendar::of_step(t).slot()]
    }
}

/// Regression samples `(lags, target)` per slot.
type Samples = Vec<(Vec<f64>, f64)>;

fn ar_samples(calibration: &[CalibrationWeek], order: usize) -> (Vec<Samples>, (f64, f64)) {
    let mut out = vec![Vec::new(); SLOTS];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for w in calibration {
        // series[i] = z_{i - 95}
        let series = w.net_series_with_history();
        for z in &series {
            lo = lo.min(*z);
            hi = hi.max(*z);
        }
        let offset = crate::model::PAST_STEPS - 1;
        for t in 0..WEEK_STEPS {
            let lags: Vec<f64> = (0..order).map(|j| series[t + offset - j]).collect();
            let target = series[t + 1 + offset];
            out[Calendar::of_step(t).slot()].push((lags, target));
        }
    }
    (out, (lo, hi))
}

fn pooled(samples: &[Samples], slot: usize, width: usize) -> Vec<&(Vec<f64>, f64)> {
    let day = slot / DAY_STEPS;
    let qh = slot % DAY_STEPS;
    let width = width.min(DAY_STEPS / 2);
    let mut offsets: Vec<isize> = (-(width as isize)..=width as isize).collect();
    if 2 * width + 1 > DAY_STEPS {
        offsets.pop();
    }
    offsets
        .into_iter()
        .flat_map(|o| {
            let q = (qh as isize + o).rem_euclid(DAY_STEPS as isize) as usize;
            samples[day * DAY_STEPS + q].iter()
        })
        .collect()
}

pub fn fit_ar_model(calibration: &[CalibrationWeek], cfg: &ArConfig) -> Result<ArModel> {
    let k = cfg.order;
    if k == 0 || k > crate::model::PAST_STEPS {
        return Err(Error::InvalidParameter(format!("AR order {k} out of range")));
    }
    let (samples, lag_range) = ar_samples(calibration, k);
    let needed = 10 * (k + 1);
    let min_per_slot = samples.iter().map(Vec::len).min().unwrap_or(0);
    if min_per_slot == 0 {
        return Err(Error::InsufficientData("no calibration samples".into()));
    }
    let pooling = match cfg.pooling {
        Some(w) => w,
        None => (0..DAY_STEPS / 2)
            .find(|&w| (0..SLOTS).all(|s| pooled(&samples, s, w).len() >= needed))
            .unwrap_or(DAY_STEPS / 2),
    };
    let slots = (0..SLOTS)
        .map(|slot| {
            let pool = pooled(&samples, slot, pooling);
            if pool.len() < needed {
                return Err(Error::InsufficientData(format!(
                    "slot {slot} ({}) has {} samples, {needed} required for order {k}",
                    slot_name(slot),
                    pool.len()
                )));
            }
            let x: Vec<Vec<f64>> = pool
                .iter()
                .map(|(lags, _)| {
                    let mut row = lags.clone();
                    row.push(1.0);
                    row
                })
                .collect();
            let y: Vec<f64> = pool.iter().map(|s| s.1).collect();
            let fit = ols(&x, &y)?;
            let residuals = DiscreteDist::quantize(
                &fit.residuals,
                &cfg.kmeans,
                cfg.seed,
                &["ar", &k.to_string(), &slot.to_string()],
            )?;
            Ok(SlotAr {
                coefficients: fit.coefficients[..k].to_vec(),
                intercept: fit.coefficients[k],
                residuals,
                samples: pool.len(),
            })
        })
        .collect::<Result<_>>()?;
    let model = ArModel {
        format: AR_FORMAT.into(),
        version: VERSION,
        order: k,
        pooling,
        lag_range,
        kmeans: cfg.kmeans,
        seed: cfg.seed,
        slots,
    };
    model.validate()?;
    Ok(model)
}
