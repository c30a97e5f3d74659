//! One-dimensional K-means with k-means++ seeding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once no center moves by more than this.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            k: 10,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

/// Result of a clustering run. Centers are sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centers: Vec<f64>,
    pub assignment: Vec<usize>,
    pub counts: Vec<usize>,
}

impl Clustering {
    /// Cluster shares, summing to one.
    pub fn shares(&self) -> Vec<f64> {
        let n: usize = self.counts.iter().sum();
        self.counts.iter().map(|&c| c as f64 / n as f64).collect()
    }

    /// Nonempty clusters as `(center, share)`, merged when centers coincide.
    pub fn support(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (c, p) in self.centers.iter().zip(self.shares()) {
            if p == 0.0 {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.0 == *c => last.1 += p,
                _ => out.push((*c, p)),
            }
        }
        out
    }
}

/// Index of the center nearest to `v`; ties go to the lowest index.
pub fn nearest(centers: &[f64], v: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = (v - c).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn seed_plus_plus<R: Rng + ?Sized>(data: &[f64], k: usize, rng: &mut R) -> Vec<f64> {
    let mut centers = Vec::with_capacity(k);
    centers.push(data[rng.random_range(0..data.len())]);
    let mut d2: Vec<f64> = data.iter().map(|v| (v - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = data.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if target < *w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            data[pick]
        } else {
            // Every point already coincides with a center.
            centers[centers.len() - 1]
        };
        centers.push(next);
        for (w, v) in d2.iter_mut().zip(data) {
            *w = w.min((v - next).powi(2));
        }
    }
    centers
}

fn assign(data: &[f64], centers: &[f64], assignment: &mut [usize]) {
    for (a, v) in assignment.iter_mut().zip(data) {
        *a = nearest(centers, *v);
    }
}

fn means(data: &[f64], assignment: &[usize], centers: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let k = centers.len();
    let mut sum = vec![0.0; k];
    let mut count = vec![0usize; k];
    for (v, a) in data.iter().zip(assignment) {
        sum[*a] += v;
        count[*a] += 1;
    }
    let next = (0..k)
        .map(|j| {
            if count[j] > 0 {
                sum[j] / count[j] as f64
            } else {
                centers[j]
            }
        })
        .collect();
    (next, count)
}

/// Clusters `data` into `cfg.k` groups.
///
/// When the data has fewer than `k` distinct values some centers coincide
/// and their clusters stay empty; callers read the nonempty ones through
/// [`Clustering::support`].
pub fn kmeans_1d<R: Rng + ?Sized>(data: &[f64], cfg: &KMeansConfig, rng: &mut R) -> Result<Clustering> {
    if cfg.k == 0 {
        return Err(Error::InvalidParameter("k-means needs k >= 1".into()));
    }
    if data.len() < cfg.k {
        return Err(Error::DegenerateClusters(format!(
            "{} samples for {} clusters; reduce k",
            data.len(),
            cfg.k
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("k-means input must be finite".into()));
    }
    let mut centers = seed_plus_plus(data, cfg.k, rng);
    let mut assignment = vec![0usize; data.len()];
    for _ in 0..cfg.max_iter {
        assign(data, &centers, &mut assignment);
        let (mut next, count) = means(data, &assignment, &centers);
        for j in 0..cfg.k {
            if count[j] > 0 {
                continue;
            }
            let (far, dist) = data
                .iter()
                .enumerate()
                .map(|(i, v)| (i, (v - next[assignment[i]]).abs()))
                .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if dist > 0.0 {
                next[j] = data[far];
                assignment[far] = j;
            }
        }
        let shift = centers
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        centers = next;
        if shift < cfg.tol {
            break;
        }
    }
    centers.sort_by(f64::total_cmp);
    assign(data, &centers, &mut assignment);
    let (centers, counts) = means(data, &assignment, &centers);
    // Empty duplicates may end up out of order after the last update.
    let mut order: Vec<usize> = (0..cfg.k).collect();
    order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]).then(a.cmp(&b)));
    let mut rank = vec![0; cfg.k];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    let centers = order.iter().map(|&j| centers[j]).collect();
    let counts = order.iter().map(|&j| counts[j]).collect();
    for a in assignment.iter_mut() {
        *a = rank[*a];
    }
    Ok(Clustering {
        centers,
        assignment,
        counts,
    })
}
