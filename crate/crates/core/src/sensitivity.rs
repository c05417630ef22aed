//! Greedy patient-removal sensitivity analysis for two-arm trials.
//!
//! Starting from the full cohort, each step removes the patient whose absence
//! leaves the smallest imbalance objective (scales recomputed on the smaller
//! cohort) and records the objective, its `√n`-normalized value and the
//! log-rank p-value between arms. Every arm keeps at least two patients.
//!
//! This is a diagnostic of how much the trial's significance leans on
//! imbalance, not a recommendation to drop anyone.

use std::io::{Read, Write};

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{Assignment, Cohort};
use crate::error::{Error, Result};
use crate::metrics::{compute_scales, objective, ObjectiveConfig};
use crate::rng::{derive_seed, seeded};
use crate::solve::TIE_EPS;
use crate::survival::{log_rank_test, SurvivalSample};

const ARMS: usize = 2;
const MIN_PER_ARM: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RemovalStep {
    /// `None` for step 0, the untouched cohort.
    pub removed_patient_id: Option<String>,
    pub remaining_count: usize,
    pub raw_discrepancy: f64,
    pub normalized_discrepancy: f64,
    pub log_rank_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RemovalTrace {
    pub steps: Vec<RemovalStep>,
    /// Step with the smallest p-value, lowest index on ties.
    pub k_star: usize,
    pub random_baseline_p: Option<f64>,
}

fn check_inputs(cohort: &Cohort, assignment: &Assignment) -> Result<()> {
    if assignment.len() != cohort.len() {
        return Err(Error::LengthMismatch {
            expected: cohort.len(),
            actual: assignment.len(),
        });
    }
    if !cohort.has_survival() {
        return Err(Error::Data(
            "sensitivity analysis needs survival time and event columns".into(),
        ));
    }
    if let Some(&arm) = assignment.arm_of().iter().find(|&&a| a >= ARMS) {
        return Err(Error::Unsupported(format!(
            "sensitivity analysis handles 2 arms, found arm {arm}"
        )));
    }
    for (arm, &size) in assignment.arm_sizes(ARMS).iter().enumerate() {
        if size < MIN_PER_ARM {
            return Err(Error::Data(format!(
                "arm {arm} has {size} patients; at least {MIN_PER_ARM} are needed"
            )));
        }
    }
    Ok(())
}

fn step(
    cohort: &Cohort,
    assignment: &Assignment,
    config: &ObjectiveConfig,
    removed: Option<String>,
) -> Result<RemovalStep> {
    let raw = objective(cohort, assignment, ARMS, config, &compute_scales(cohort))?.objective;
    let p = log_rank_test(&SurvivalSample::from_assignment(cohort, assignment)?)?.p_value;
    Ok(RemovalStep {
        removed_patient_id: removed,
        remaining_count: cohort.len(),
        raw_discrepancy: raw,
        normalized_discrepancy: raw / (cohort.len() as f64).sqrt(),
        log_rank_p: p,
    })
}

/// The cohort and assignment without patient `drop`.
fn without(cohort: &Cohort, assignment: &Assignment, drop: usize) -> Result<(Cohort, Assignment)> {
    let keep: Vec<usize> = (0..cohort.len()).filter(|&i| i != drop).collect();
    let arms = keep.iter().map(|&i| assignment.arm(i)).collect();
    Ok((cohort.subset(&keep)?, Assignment::new(arms)))
}

/// Objective after removing each eligible patient, `None` where removal
/// would break the per-arm floor.
pub fn removal_candidates(
    cohort: &Cohort,
    assignment: &Assignment,
    config: &ObjectiveConfig,
) -> Result<Vec<Option<f64>>> {
    let sizes = assignment.arm_sizes(ARMS);
    (0..cohort.len())
        .into_par_iter()
        .map(|i| {
            if sizes[assignment.arm(i)] <= MIN_PER_ARM {
                return Ok(None);
            }
            let (c, a) = without(cohort, assignment, i)?;
            Ok(Some(
                objective(&c, &a, ARMS, config, &compute_scales(&c))?.objective,
            ))
        })
        .collect()
}

/// Greedy removal trace with `max_removals + 1` steps; `random_baseline_p`
/// is left unset.
pub fn greedy_removal_trace(
    cohort: &Cohort,
    assignment: &Assignment,
    config: &ObjectiveConfig,
    max_removals: usize,
) -> Result<RemovalTrace> {
    check_inputs(cohort, assignment)?;
    let floor = cohort.len() - ARMS * MIN_PER_ARM;
    if max_removals >= floor {
        return Err(Error::Config(format!(
            "max removals must be below {floor} for a cohort of {}",
            cohort.len()
        )));
    }
    let mut current = (cohort.clone(), assignment.clone());
    let mut steps = vec![step(&current.0, &current.1, config, None)?];
    for _ in 0..max_removals {
        let scores = removal_candidates(&current.0, &current.1, config)?;
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in scores.iter().enumerate() {
            if let Some(s) = *s {
                if best.is_none_or(|(_, b)| s < b - TIE_EPS) {
                    best = Some((i, s));
                }
            }
        }
        let (drop, _) = best.expect("an arm above the floor exists while removals remain");
        let id = current.0.patients()[drop].id.clone();
        current = without(&current.0, &current.1, drop)?;
        steps.push(step(&current.0, &current.1, config, Some(id))?);
    }
    let k_star = argmin_p(&steps);
    Ok(RemovalTrace {
        steps,
        k_star,
        random_baseline_p: None,
    })
}

fn argmin_p(steps: &[RemovalStep]) -> usize {
    let mut k = 0;
    for (i, s) in steps.iter().enumerate() {
        if s.log_rank_p < steps[k].log_rank_p {
            k = i;
        }
    }
    k
}

/// Mean log-rank p-value after removing `k` patients uniformly at random,
/// over `repetitions` draws. Draws leaving an arm below two patients are
/// redrawn; more than `100 · repetitions` rejections is an error.
pub fn random_removal_baseline(
    cohort: &Cohort,
    assignment: &Assignment,
    k: usize,
    repetitions: usize,
    seed: u64,
) -> Result<f64> {
    check_inputs(cohort, assignment)?;
    if repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    let n = cohort.len();
    if k > n {
        return Err(Error::Config(format!("cannot remove {k} of {n} patients")));
    }
    let budget = 100 * repetitions;
    let mut rejections = 0;
    let mut mean = 0.0;
    for r in 0..repetitions {
        let mut rng = seeded(derive_seed(seed, r as u64));
        let keep = loop {
            let mut gone = vec![false; n];
            for i in sample(&mut rng, n, k) {
                gone[i] = true;
            }
            let keep: Vec<usize> = (0..n).filter(|&i| !gone[i]).collect();
            let mut sizes = [0usize; ARMS];
            for &i in &keep {
                sizes[assignment.arm(i)] += 1;
            }
            if sizes.iter().all(|&s| s >= MIN_PER_ARM) {
                break keep;
            }
            rejections += 1;
            if rejections > budget {
                return Err(Error::Infeasible(format!(
                    "removing {k} patients at random kept breaking the two-per-arm floor"
                )));
            }
        };
        let sub = cohort.subset(&keep)?;
        let arms = Assignment::new(keep.iter().map(|&i| assignment.arm(i)).collect());
        let p = log_rank_test(&SurvivalSample::from_assignment(&sub, &arms)?)?.p_value;
        // running mean stays exact when every draw gives the same p
        mean += (p - mean) / (r + 1) as f64;
    }
    Ok(mean)
}

pub fn attach_baseline(mut trace: RemovalTrace, baseline_p: f64) -> RemovalTrace {
    trace.random_baseline_p = Some(baseline_p);
    trace
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    step: usize,
    #[serde(rename = "removedId")]
    removed_id: String,
    remaining: usize,
    #[serde(rename = "rawD")]
    raw: f64,
    #[serde(rename = "normD")]
    norm: f64,
    p: f64,
}

impl RemovalTrace {
    /// Flat table `step,removedId,remaining,rawD,normD,p`; step 0 has an
    /// empty id.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (k, s) in self.steps.iter().enumerate() {
            w.serialize(CsvRow {
                step: k,
                removed_id: s.removed_patient_id.clone().unwrap_or_default(),
                remaining: s.remaining_count,
                raw: s.raw_discrepancy,
                norm: s.normalized_discrepancy,
                p: s.log_rank_p,
            })
            .map_err(|e| Error::Data(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Data(e.to_string()))?;
        Ok(())
    }

    /// Reads the steps back from [`write_csv`](Self::write_csv) output;
    /// `k_star` is recomputed and no baseline is attached.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut steps = Vec::new();
        for (k, row) in csv::Reader::from_reader(input).deserialize().enumerate() {
            let row: CsvRow = row.map_err(|e| Error::Data(e.to_string()))?;
            if row.step != k {
                return Err(Error::Data(format!("trace row {k} has step {}", row.step)));
            }
            steps.push(RemovalStep {
                removed_patient_id: (!row.removed_id.is_empty()).then_some(row.removed_id),
                remaining_count: row.remaining,
                raw_discrepancy: row.raw,
                normalized_discrepancy: row.norm,
                log_rank_p: row.p,
            });
        }
        if steps.is_empty() {
            return Err(Error::Data("empty removal trace".into()));
        }
        Ok(RemovalTrace {
            k_star: argmin_p(&steps),
            steps,
            random_baseline_p: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{Covariate, CovariateSchema, Patient};
    use crate::metrics::objective_value;
    use crate::synthetic::{confounded_trial, mirrored, TrialDesign};

    fn trial(seed: u64, patients: usize) -> (Cohort, Assignment) {
        let cohort = confounded_trial(
            &TrialDesign {
                patients,
                ..Default::default()
            },
            seed,
        );
        let arms = Assignment::new(
            cohort
                .patients()
                .iter()
                .map(|p| p.original_arm.unwrap())
                .collect(),
        );
        (cohort, arms)
    }

    #[test]
    fn every_step_is_the_greedy_argmin() {
        let (cohort, arms) = trial(3, 30);
        let cfg = ObjectiveConfig::default();
        let trace = greedy_removal_trace(&cohort, &arms, &cfg, 8).unwrap();
        assert_eq!(trace.steps.len(), 9);
        let (mut c, mut a) = (cohort, arms);
        for s in &trace.steps[1..] {
            // independent re-evaluation of every candidate
            let mut best = f64::INFINITY;
            for i in 0..c.len() {
                let (ci, ai) = without(&c, &a, i).unwrap();
                if ai.arm_sizes(2).iter().all(|&k| k >= 2) {
                    best = best.min(objective_value(&ci, &ai, 2, &cfg).unwrap());
                }
            }
            assert!(s.raw_discrepancy <= best + 1e-12);
            let drop = c
                .patients()
                .iter()
                .position(|p| Some(&p.id) == s.removed_patient_id.as_ref());
            (c, a) = without(&c, &a, drop.unwrap()).unwrap();
        }
    }

    #[test]
    fn normalization_and_counts() {
        let (cohort, arms) = trial(5, 24);
        let trace = greedy_removal_trace(&cohort, &arms, &Default::default(), 10).unwrap();
        assert_eq!(trace.steps[0].remaining_count, 24);
        assert!(trace.steps[0].removed_patient_id.is_none());
        for w in trace.steps.windows(2) {
            assert_eq!(w[1].remaining_count + 1, w[0].remaining_count);
        }
        for s in &trace.steps {
            let expect = s.raw_discrepancy / (s.remaining_count as f64).sqrt();
            assert!((s.normalized_discrepancy - expect).abs() <= 1e-12);
        }
        let min = trace
            .steps
            .iter()
            .map(|s| s.log_rank_p)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(trace.steps[trace.k_star].log_rank_p, min);
        assert!(trace.steps[..trace.k_star]
            .iter()
            .all(|s| s.log_rank_p > min));
    }

    #[test]
    fn planted_outlier_goes_first() {
        let schema = CovariateSchema::new(
            vec![Covariate::numerical("x")],
            Some("time".into()),
            Some("event".into()),
            None,
        )
        .unwrap();
        // symmetric arms, then patient 0 pushed far out
        let base = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let mut patients = Vec::new();
        for arm in 0..2 {
            for (k, &v) in base.iter().enumerate() {
                let i = arm * base.len() + k;
                patients.push(
                    Patient::new(format!("p{i}"), vec![v], vec![])
                        .with_survival(1.0 + i as f64, i % 3 != 0),
                );
            }
        }
        let sd = {
            let m = base.iter().sum::<f64>() / 5.0;
            (base.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 4.0).sqrt()
        };
        patients[0].numerical[0] = 10.0 * sd;
        let cohort = Cohort::new(schema, patients).unwrap();
        let arms = Assignment::new((0..10).map(|i| i / 5).collect());
        let cfg = ObjectiveConfig::default();
        let scores = removal_candidates(&cohort, &arms, &cfg).unwrap();
        let brute = (0..10)
            .map(|i| {
                let (c, a) = without(&cohort, &arms, i).unwrap();
                objective_value(&c, &a, 2, &cfg).unwrap()
            })
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert_eq!(brute.0, 0);
        assert_eq!(scores[0], Some(brute.1));
        let trace = greedy_removal_trace(&cohort, &arms, &cfg, 1).unwrap();
        assert_eq!(trace.steps[1].removed_patient_id.as_deref(), Some("p0"));
    }

    #[test]
    fn ties_remove_the_lowest_index() {
        // identical covariates: every removal leaves objective 0
        let (base, arms) = trial(1, 12);
        let patients = base
            .patients()
            .iter()
            .map(|p| {
                let mut p = p.clone();
                p.numerical = vec![1.0, 60.0];
                p.categorical = vec![0];
                p
            })
            .collect();
        let cohort = Cohort::new(base.schema().clone(), patients).unwrap();
        let trace = greedy_removal_trace(&cohort, &arms, &Default::default(), 3).unwrap();
        let ids: Vec<_> = trace.steps[1..]
            .iter()
            .map(|s| s.removed_patient_id.clone().unwrap())
            .collect();
        assert_eq!(ids, ["s0", "s1", "s2"]);
        assert!(trace.steps.iter().all(|s| s.raw_discrepancy == 0.0));
    }

    #[test]
    fn mirrored_twins_tie() {
        let (base, _) = trial(1, 6);
        let (cohort, arms) = mirrored(&base);
        assert_eq!(
            objective_value(&cohort, &arms, 2, &Default::default()).unwrap(),
            0.0
        );
        let scores = removal_candidates(&cohort, &arms, &Default::default()).unwrap();
        for pair in scores.chunks(2) {
            assert!((pair[0].unwrap() - pair[1].unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_removals_and_baseline_at_zero() {
        let (cohort, arms) = trial(2, 20);
        let trace = greedy_removal_trace(&cohort, &arms, &Default::default(), 0).unwrap();
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.k_star, 0);
        let p = random_removal_baseline(&cohort, &arms, 0, 25, 4).unwrap();
        assert_eq!(p, trace.steps[0].log_rank_p);
        let done = attach_baseline(trace, p);
        assert_eq!(done.random_baseline_p, Some(done.steps[0].log_rank_p));
    }

    #[test]
    fn random_baseline_is_reproducible() {
        let (cohort, arms) = trial(8, 40);
        let a = random_removal_baseline(&cohort, &arms, 5, 1, 17).unwrap();
        let b = random_removal_baseline(&cohort, &arms, 5, 1, 17).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn impossible_removals_fail() {
        let (cohort, arms) = trial(8, 10);
        assert!(greedy_removal_trace(&cohort, &arms, &Default::default(), 6).is_err());
        assert!(matches!(
            random_removal_baseline(&cohort, &arms, 7, 3, 1),
            Err(Error::Infeasible(_))
        ));
        let plain = crate::synthetic::random_cohort(10, 1, 0, 1);
        let a = Assignment::new((0..10).map(|i| i % 2).collect());
        assert!(matches!(
            greedy_removal_trace(&plain, &a, &Default::default(), 1),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn trace_round_trips_through_json_and_csv() {
        let (cohort, arms) = trial(9, 20);
        let trace = attach_baseline(
            greedy_removal_trace(&cohort, &arms, &Default::default(), 4).unwrap(),
            0.25,
        );
        let json = serde_json::to_string(&trace).unwrap();
        assert_eq!(serde_json::from_str::<RemovalTrace>(&json).unwrap(), trace);
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("step,removedId,remaining,rawD,normD,p\n"));
        let back = RemovalTrace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.steps, trace.steps);
        assert_eq!(back.k_star, trace.k_star);
    }
}
