//! Distribution of the objective under plain randomization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{AssignmentConstraints, Cohort};
use crate::error::{Error, Result};
use crate::heuristic::random_feasible_assignment;
use crate::metrics::{compute_scales, mean_sd, objective, ObjectiveConfig};
use crate::rng::derive_seed;

pub const DEFAULT_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RandomBaseline {
    pub samples: usize,
    /// Sorted ascending.
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single sample.
    pub std_dev: f64,
    pub seed: u64,
}

/// Scores `samples` random feasible assignments; sample `k` is drawn with
/// the seed derived from `(seed, k)`.
pub fn build_baseline(
    cohort: &Cohort,
    constraints: &AssignmentConstraints,
    config: &ObjectiveConfig,
    samples: usize,
    seed: u64,
) -> Result<RandomBaseline> {
    if samples == 0 {
        return Err(Error::Config("baseline needs at least one sample".into()));
    }
    constraints.search_band(cohort.len())?;
    let scales = compute_scales(cohort);
    let mut values = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let a = random_feasible_assignment(cohort, constraints, derive_seed(seed, k))?;
            Ok(objective(cohort, &a, constraints.arms(), config, &scales)?.objective)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, std_dev) = mean_sd(&mut values);
    Ok(RandomBaseline {
        samples,
        values,
        mean,
        std_dev,
        seed,
    })
}

/// Percentage of baseline values below `value`, counting ties as half.
pub fn percentile_of(baseline: &RandomBaseline, value: f64) -> f64 {
    let v = &baseline.values;
    let below = v.partition_point(|&x| x < value);
    let tied = v[below..].partition_point(|&x| x <= value);
    100.0 * (below as f64 + 0.5 * tied as f64) / v.len() as f64
}
