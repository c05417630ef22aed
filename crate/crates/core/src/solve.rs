use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cohort::{validate_assignment, Assignment, AssignmentConstraints, Cohort, Validation};
use crate::error::{Error, Result};
use crate::metrics::{compute_scales, objective, ObjectiveConfig};

/// Two results within this distance are treated as tied.
pub(crate) const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolveResult {
    pub assignment: Assignment,
    /// Objective recomputed from the patient table, never the search's own estimate.
    pub objective: f64,
    /// Number of assignments (or candidate moves) scored.
    pub evaluations: u64,
    #[serde(rename = "wallTimeMs", with = "duration_ms")]
    pub wall_time: Duration,
}

/// Validates a solver's answer and re-scores it with the reference objective.
pub(crate) fn finish(
    cohort: &Cohort,
    constraints: &AssignmentConstraints,
    config: &ObjectiveConfig,
    assignment: Assignment,
    evaluations: u64,
    started: Instant,
) -> Result<SolveResult> {
    if let Validation::Invalid(v) = validate_assignment(cohort, constraints, &assignment)? {
        return Err(Error::Infeasible(format!(
            "solver produced an invalid assignment: {v:?}"
        )));
    }
    let scales = compute_scales(cohort);
    let report = objective(cohort, &assignment, constraints.arms(), config, &scales)?;
    Ok(SolveResult {
        assignment,
        objective: report.objective,
        evaluations,
        wall_time: started.elapsed(),
    })
}

pub(crate) mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1e3)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let ms = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(ms.max(0.0) / 1e3))
    }
}
