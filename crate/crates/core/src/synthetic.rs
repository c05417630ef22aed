//! Seeded synthetic cohorts for tests, examples and benchmarks.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::cohort::{Assignment, Cohort, Covariate, CovariateSchema, Patient};
use crate::rng::seeded;

const LEVELS: [&str; 3] = ["a", "b", "c"];

/// `n` patients with `numerical` standard-normal covariates `x0, x1, …` and
/// `categorical` three-level covariates `g0, g1, …` drawn uniformly.
pub fn random_cohort(n: usize, numerical: usize, categorical: usize, seed: u64) -> Cohort {
    let mut rng = seeded(seed);
    let mut covariates: Vec<Covariate> = (0..numerical)
        .map(|j| Covariate::numerical(format!("x{j}")))
        .collect();
    covariates.extend((0..categorical).map(|c| Covariate::categorical(format!("g{c}"), LEVELS)));
    let schema = CovariateSchema::new(covariates, None, None, None).expect("valid schema");
    let patients = (0..n)
        .map(|i| {
            let num = (0..numerical).map(|_| rng.sample(StandardNormal)).collect();
            let cat = (0..categorical)
                .map(|_| rng.random_range(0..LEVELS.len()))
                .collect();
            Patient::new(format!("p{i}"), num, cat)
        })
        .collect();
    Cohort::new(schema, patients).expect("valid cohort")
}

/// Every patient followed by an identical clone, and the assignment putting
/// each original in arm 0 and its clone in arm 1. The mirrored assignment has
/// objective exactly 0.
pub fn mirrored(cohort: &Cohort) -> (Cohort, Assignment) {
    let mut patients = Vec::with_capacity(2 * cohort.len());
    for p in cohort.patients() {
        let mut twin = p.clone();
        twin.id = format!("{}'", p.id);
        patients.push(p.clone());
        patients.push(twin);
    }
    let arm_of = (0..patients.len()).map(|i| i % 2).collect();
    let doubled = Cohort::new(cohort.schema().clone(), patients).expect("ids stay unique");
    (doubled, Assignment::new(arm_of))
}

/// Parameters of [`confounded_trial`].
#[derive(Debug, Clone, Copy)]
pub struct TrialDesign {
    pub patients: usize,
    /// Log hazard ratio of the treatment (arm 1 vs arm 0).
    pub treatment_effect: f64,
    /// Log hazard ratio per unit of the prognostic covariate `risk`.
    pub risk_effect: f64,
    /// Mean shift of `risk` in the treatment arm (the planted imbalance).
    pub risk_shift: f64,
    /// Administrative censoring time.
    pub follow_up: f64,
}

impl Default for TrialDesign {
    fn default() -> Self {
        TrialDesign {
            patients: 120,
            treatment_effect: -0.5,
            risk_effect: 1.0,
            risk_shift: 0.6,
            follow_up: 3.0,
        }
    }
}

/// A two-arm trial with exponential survival where the prognostic covariate
/// `risk` is over-represented in the treatment arm, masking part of the
/// treatment benefit. Also carries a noise covariate `age` and a balanced
/// categorical `sex`. Arms alternate so both have `patients / 2` members.
pub fn confounded_trial(design: &TrialDesign, seed: u64) -> Cohort {
    let mut rng = seeded(seed);
    let schema = CovariateSchema::new(
        vec![
            Covariate::numerical("risk"),
            Covariate::numerical("age"),
            Covariate::categorical("sex", ["f", "m"]),
        ],
        Some("time".into()),
        Some("event".into()),
        Some("arm".into()),
    )
    .expect("valid schema");
    let unit = Exp::new(1.0).expect("positive rate");
    let patients = (0..design.patients)
        .map(|i| {
            let arm = i % 2;
            let z: f64 = rng.sample(StandardNormal);
            let risk = z + design.risk_shift * arm as f64;
            let age = 60.0 + 8.0 * rng.sample::<f64, _>(StandardNormal);
            let sex = rng.random_range(0..2);
            let hazard =
                0.5 * (design.risk_effect * risk + design.treatment_effect * arm as f64).exp();
            let t: f64 = unit.sample(&mut rng) / hazard;
            let (time, event) = if t > design.follow_up {
                (design.follow_up, false)
            } else {
                (t.max(1e-6), true)
            };
            Patient::new(format!("s{i}"), vec![risk, age], vec![sex])
                .with_survival(time, event)
                .with_arm(arm)
        })
        .collect();
    Cohort::new(schema, patients).expect("valid cohort")
}
