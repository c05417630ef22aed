use crate::cohort::{Assignment, AssignmentConstraints, Cohort};
use crate::error::{Error, Result};
use crate::metrics::{compute_scales, objective, ObjectiveConfig};
use crate::solve::TIE_EPS;

/// Reads bit `i` as the arm of patient `i`, then restores the size band one
/// relocation at a time: each step moves, out of the arm that is too large,
/// the patient whose move gives the smallest objective (lowest index on ties).
pub fn decode_and_repair(
    cohort: &Cohort,
    constraints: &AssignmentConstraints,
    bits: &[bool],
    config: &ObjectiveConfig,
) -> Result<Assignment> {
    if constraints.arms() != 2 {
        return Err(Error::Unsupported(format!(
            "bitstring decoding handles 2 arms, got {}",
            constraints.arms()
        )));
    }
    if bits.len() != cohort.len() {
        return Err(Error::LengthMismatch {
            expected: cohort.len(),
            actual: bits.len(),
        });
    }
    let (_, hi) = constraints.search_band(cohort.len())?;
    let scales = compute_scales(cohort);
    let mut assignment = Assignment::new(bits.iter().map(|&b| usize::from(b)).collect());
    loop {
        let sizes = assignment.arm_sizes(2);
        // With two arms, one arm below the band means the other is above it.
        let Some(from) = (0..2).find(|&a| sizes[a] > hi) else {
            break;
        };
        let to = 1 - from;
        let mut best: Option<(usize, f64)> = None;
        for i in assignment.members(from).collect::<Vec<_>>() {
            let mut trial = assignment.clone();
            trial.set(i, to);
            let score = objective(cohort, &trial, 2, config, &scales)?.objective;
            if best.is_none_or(|(_, s)| score < s - TIE_EPS) {
                best = Some((i, score));
            }
        }
        let (i, _) = best.expect("an over-full arm has members");
        assignment.set(i, to);
    }
    Ok(assignment)
}
