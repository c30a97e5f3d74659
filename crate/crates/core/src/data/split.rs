use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::chronicle::{CalibrationWeek, Chronicle, SimulationWeek};
use crate::error::{Error, Result};
use crate::seed;

/// Partition of a site's weeks into calibration and simulation sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub calibration: BTreeSet<u32>,
    pub simulation: BTreeSet<u32>,
    pub seed: u64,
}

/// Number of simulation weeks out of `n`: `ceil(0.4 n)`.
pub fn simulation_count(n: usize) -> usize {
    (2 * n).div_ceil(5)
}

/// Draws 40% of the weeks (rounded up) for simulation.
///
/// The permutation depends on `seed` and the site id only.
pub fn split_weeks(chronicles: &[Chronicle], seed: u64) -> Result<Split> {
    if chronicles.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 complete weeks to split, got {}",
            chronicles.len()
        )));
    }
    let mut ids: Vec<u32> = chronicles.iter().map(Chronicle::week_id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != chronicles.len() {
        return Err(Error::Validation("duplicate week ids".into()));
    }
    let mut rng = seed::stream(seed, &["split", chronicles[0].site_id()]);
    ids.shuffle(&mut rng);
    let n_sim = simulation_count(ids.len());
    Ok(Split {
        simulation: ids[..n_sim].iter().copied().collect(),
        calibration: ids[n_sim..].iter().copied().collect(),
        seed,
    })
}

impl Split {
    /// Tags each chronicle with its role. Every week must belong to exactly
    /// one side of the split.
    pub fn apply(
        &self,
        chronicles: Vec<Chronicle>,
    ) -> Result<(Vec<CalibrationWeek>, Vec<SimulationWeek>)> {
        if !self.calibration.is_disjoint(&self.simulation) {
            return Err(Error::Validation(
                "calibration and simulation sets overlap".into(),
            ));
        }
        let mut calib = Vec::new();
        let mut sim = Vec::new();
        for ch in chronicles {
            let id = ch.week_id();
            if self.simulation.contains(&id) {
                sim.push(SimulationWeek::new(ch));
            } else if self.calibration.contains(&id) {
                calib.push(CalibrationWeek::new(ch));
            } else {
                return Err(Error::Validation(format!(
                    "week {id} of site {} is not in the split",
                    ch.site_id()
                )));
            }
        }
        Ok((calib, sim))
    }
}
