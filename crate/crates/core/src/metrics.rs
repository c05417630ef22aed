//! Covariate balance: standardized mean differences, total variation, and
//! the min-max imbalance objective.
//!
//! For an arm pair `(p, q)` the numerical discrepancy is
//!
//! ```text
//! d_num(p, q) = Σ_j ( |mean_j(p) − mean_j(q)| + w · |sd_j(p) − sd_j(q)| ) / scale_j
//! ```
//!
//! summed over retained numerical covariates, where `scale_j` is the sample
//! standard deviation of covariate `j` over the whole cohort and `w` is the
//! variance weight. The categorical discrepancy `d_cat(p, q)` is the sum of
//! total-variation distances between the arms' category distributions. The
//! objective of an assignment is the largest `d_num + α·d_cat` over all
//! unordered arm pairs.
//!
//! Everything here is computed directly from the patient table with two-pass
//! formulas and order-independent summation, so identical multisets give
//! bitwise identical statistics. The solvers use a faster incremental form
//! (see [`crate::model`]) and re-score their final answer with this module.

use serde::{Deserialize, Serialize};

use crate::cohort::{Assignment, Cohort};
use crate::error::{Error, Result};

/// Weights of the imbalance objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ObjectiveConfig {
    /// Weight of the categorical term.
    pub alpha: f64,
    /// Weight of the standard-deviation difference inside the numerical term.
    pub variance_weight: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            alpha: 1.0,
            variance_weight: 1.0,
        }
    }
}

impl ObjectiveConfig {
    pub fn new(alpha: f64, variance_weight: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(alpha) || !ok(variance_weight) {
            return Err(Error::Config(format!(
                "alpha ({alpha}) and variance weight ({variance_weight}) must be finite and nonnegative"
            )));
        }
        Ok(ObjectiveConfig {
            alpha,
            variance_weight,
        })
    }
}

/// Standardization scale per numerical covariate. `None` marks a covariate
/// dropped for having zero variance over the cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateScale {
    scales: Vec<Option<f64>>,
    dropped: Vec<String>,
}

impl CovariateScale {
    pub fn get(&self, j: usize) -> Option<f64> {
        self.scales[j]
    }

    /// `(covariate index, scale)` for every retained covariate.
    pub fn retained(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.scales
            .iter()
            .enumerate()
            .filter_map(|(j, s)| s.map(|s| (j, s)))
    }

    pub fn dropped(&self) -> &[String] {
        &self.dropped
    }

    pub fn warnings(&self) -> Vec<String> {
        self.dropped
            .iter()
            .map(|name| format!("numerical covariate `{name}` has zero variance and was dropped"))
            .collect()
    }
}

pub(crate) fn sorted_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

/// Mean and sample standard deviation (denominator k−1; 0 for a singleton).
pub(crate) fn mean_sd(values: &mut [f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = sorted_sum(values) / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (k - 1.0)).sqrt())
}

/// Whole-cohort sample standard deviation of every numerical covariate.
pub fn compute_scales(cohort: &Cohort) -> CovariateScale {
    let schema = cohort.schema();
    let mut scales = Vec::with_capacity(schema.num_numerical());
    let mut dropped = Vec::new();
    for j in 0..schema.num_numerical() {
        let mut values: Vec<f64> = cohort.numerical_column(j).collect();
        let magnitude = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let (_, sd) = mean_sd(&mut values);
        if sd <= 1e-12 * magnitude.max(f64::MIN_POSITIVE) || sd == 0.0 {
            log::warn!(
                "numerical covariate `{}` has zero variance and was dropped",
                schema.numerical_name(j)
            );
            dropped.push(schema.numerical_name(j).to_string());
            scales.push(None);
        } else {
            scales.push(Some(sd));
        }
    }
    CovariateScale { scales, dropped }
}

fn arm_values(cohort: &Cohort, assignment: &Assignment, arm: usize, j: usize) -> Result<Vec<f64>> {
    check_len(cohort, assignment)?;
    let values: Vec<f64> = assignment
        .members(arm)
        .map(|i| cohort.patients()[i].numerical[j])
        .collect();
    if values.is_empty() {
        return Err(Error::EmptyArm { arm });
    }
    Ok(values)
}

fn check_len(cohort: &Cohort, assignment: &Assignment) -> Result<()> {
    if cohort.len() != assignment.len() {
        return Err(Error::LengthMismatch {
            expected: cohort.len(),
            actual: assignment.len(),
        });
    }
    Ok(())
}

fn retained_scale(cohort: &Cohort, scales: &CovariateScale, j: usize) -> Result<f64> {
    if j >= cohort.schema().num_numerical() {
        return Err(Error::UnknownCovariate(format!("numerical #{j}")));
    }
    scales
        .get(j)
        .ok_or_else(|| Error::DroppedCovariate(cohort.schema().numerical_name(j).to_string()))
}

/// Signed standardized mean difference `(mean_p − mean_q) / scale_j`.
pub fn smd(
    cohort: &Cohort,
    assignment: &Assignment,
    j: usize,
    (p, q): (usize, usize),
    scales: &CovariateScale,
) -> Result<f64> {
    let scale = retained_scale(cohort, scales, j)?;
    let (mp, _) = mean_sd(&mut arm_values(cohort, assignment, p, j)?);
    let (mq, _) = mean_sd(&mut arm_values(cohort, assignment, q, j)?);
    Ok((mp - mq) / scale)
}

fn category_frequencies(
    cohort: &Cohort,
    assignment: &Assignment,
    arm: usize,
    c: usize,
) -> Result<Vec<f64>> {
    check_len(cohort, assignment)?;
    let mut counts = vec![0usize; cohort.schema().categorical_labels(c).len()];
    let mut total = 0usize;
    for i in assignment.members(arm) {
        counts[cohort.patients()[i].categorical[c]] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::EmptyArm { arm });
    }
    Ok(counts
        .into_iter()
        .map(|k| k as f64 / total as f64)
        .collect())
}

/// Total-variation distance between the category distributions of two arms.
pub fn total_variation(
    cohort: &Cohort,
    assignment: &Assignment,
    c: usize,
    (p, q): (usize, usize),
) -> Result<f64> {
    if c >= cohort.schema().num_categorical() {
        return Err(Error::UnknownCovariate(format!("categorical #{c}")));
    }
    let fp = category_frequencies(cohort, assignment, p, c)?;
    let fq = category_frequencies(cohort, assignment, q, c)?;
    Ok(0.5 * fp.iter().zip(&fq).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairDiscrepancy {
    pub d_num: f64,
    pub d_cat: f64,
    pub total: f64,
}

pub fn pair_discrepancy(
    cohort: &Cohort,
    assignment: &Assignment,
    pair: (usize, usize),
    config: &ObjectiveConfig,
    scales: &CovariateScale,
) -> Result<PairDiscrepancy> {
    Ok(pair_report(cohort, assignment, pair, config, scales)?.discrepancy())
}

/// One covariate's diagnostic value for an arm pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateValue {
    pub covariate: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairReport {
    pub p: usize,
    pub q: usize,
    pub d_num: f64,
    pub d_cat: f64,
    pub total: f64,
    /// Signed SMD per retained numerical covariate.
    pub smd: Vec<CovariateValue>,
    /// TV per categorical covariate.
    pub tv: Vec<CovariateValue>,
}

impl PairReport {
    pub fn discrepancy(&self) -> PairDiscrepancy {
        PairDiscrepancy {
            d_num: self.d_num,
            d_cat: self.d_cat,
            total: self.total,
        }
    }
}

fn pair_report(
    cohort: &Cohort,
    assignment: &Assignment,
    (p, q): (usize, usize),
    config: &ObjectiveConfig,
    scales: &CovariateScale,
) -> Result<PairReport> {
    let schema = cohort.schema();
    let mut d_num = 0.0;
    let mut smds = Vec::new();
    for (j, scale) in scales.retained() {
        let (mp, sp) = mean_sd(&mut arm_values(cohort, assignment, p, j)?);
        let (mq, sq) = mean_sd(&mut arm_values(cohort, assignment, q, j)?);
        d_num += ((mp - mq).abs() + config.variance_weight * (sp - sq).abs()) / scale;
        smds.push(CovariateValue {
            covariate: schema.numerical_name(j).to_string(),
            value: (mp - mq) / scale,
        });
    }
    let mut d_cat = 0.0;
    let mut tvs = Vec::new();
    for c in 0..schema.num_categorical() {
        let tv = total_variation(cohort, assignment, c, (p, q))?;
        d_cat += tv;
        tvs.push(CovariateValue {
            covariate: schema.categorical_name(c).to_string(),
            value: tv,
        });
    }
    // Empty arms with no covariates at all still have to be reported.
    if scales.retained().next().is_none() && schema.num_categorical() == 0 {
        for arm in [p, q] {
            if assignment.members(arm).next().is_none() {
                return Err(Error::EmptyArm { arm });
            }
        }
    }
    Ok(PairReport {
        p,
        q,
        d_num,
        d_cat,
        total: d_num + config.alpha * d_cat,
        smd: smds,
        tv: tvs,
    })
}

/// Full discrepancy breakdown of an assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiscrepancyReport {
    /// Largest pair total.
    pub objective: f64,
    pub pairs: Vec<PairReport>,
}

impl DiscrepancyReport {
    pub fn pair(&self, p: usize, q: usize) -> Option<&PairReport> {
        let (p, q) = (p.min(q), p.max(q));
        self.pairs.iter().find(|r| r.p == p && r.q == q)
    }
}

/// The min-max objective: the worst pair total over all arm pairs `p < q`.
pub fn objective(
    cohort: &Cohort,
    assignment: &Assignment,
    arms: usize,
    config: &ObjectiveConfig,
    scales: &CovariateScale,
) -> Result<DiscrepancyReport> {
    check_len(cohort, assignment)?;
    if let Some(&a) = assignment.arm_of().iter().find(|&&a| a >= arms) {
        return Err(Error::Data(format!(
            "arm index {a} out of range for {arms} arms"
        )));
    }
    let mut pairs = Vec::with_capacity(arms * (arms - 1) / 2);
    for p in 0..arms {
        for q in p + 1..arms {
            pairs.push(pair_report(cohort, assignment, (p, q), config, scales)?);
        }
    }
    let objective = pairs.iter().map(|r| r.total).fold(0.0, f64::max);
    Ok(DiscrepancyReport { objective, pairs })
}

/// Convenience: objective value only, with scales computed from `cohort`.
pub fn objective_value(
    cohort: &Cohort,
    assignment: &Assignment,
    arms: usize,
    config: &ObjectiveConfig,
) -> Result<f64> {
    let scales = compute_scales(cohort);
    Ok(objective(cohort, assignment, arms, config, &scales)?.objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::test_support::*;
    use crate::cohort::{Covariate, CovariateSchema, Patient};

    fn a(v: &[usize]) -> Assignment {
        Assignment::new(v.to_vec())
    }

    #[test]
    fn two_point_scale() {
        let s = compute_scales(&numeric_cohort(&[0.0, 2.0]));
        assert!((s.get(0).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn four_point_scale() {
        let s = compute_scales(&numeric_cohort(&[1.0, 2.0, 3.0, 4.0]));
        // sqrt(5/3)
        assert!((s.get(0).unwrap() - 1.290_994_448_735_805_6).abs() < 1e-12);
    }

    #[test]
    fn constant_covariate_is_dropped() {
        let cohort = numeric_cohort(&[3.0, 3.0, 3.0]);
        let s = compute_scales(&cohort);
        assert_eq!(s.get(0), None);
        assert_eq!(s.dropped(), &["x".to_string()]);
        assert!(matches!(
            smd(&cohort, &a(&[0, 1, 0]), 0, (0, 1), &s),
            Err(Error::DroppedCovariate(_))
        ));
    }

    #[test]
    fn smd_worked_example() {
        let cohort = numeric_cohort(&[1.0, 2.0, 3.0, 4.0]);
        let s = compute_scales(&cohort);
        let asg = a(&[0, 1, 0, 1]);
        let v = smd(&cohort, &asg, 0, (0, 1), &s).unwrap();
        assert!((v - (-0.774_596_669_241_483_4)).abs() < 1e-9, "{v}");
        let w = smd(&cohort, &asg, 0, (1, 0), &s).unwrap();
        assert_eq!(v, -w);
    }

    #[test]
    fn smd_identical_arms_is_zero() {
        let cohort = numeric_cohort(&[5.0, 1.0, 1.0, 5.0]);
        let s = compute_scales(&cohort);
        assert_eq!(smd(&cohort, &a(&[0, 0, 1, 1]), 0, (0, 1), &s).unwrap(), 0.0);
    }

    #[test]
    fn empty_arm_is_an_error() {
        let cohort = numeric_cohort(&[1.0, 2.0, 3.0]);
        let s = compute_scales(&cohort);
        assert!(matches!(
            smd(&cohort, &a(&[0, 0, 0]), 0, (0, 1), &s),
            Err(Error::EmptyArm { arm: 1 })
        ));
        let cat = categorical_cohort(&[0, 1]);
        assert!(matches!(
            total_variation(&cat, &a(&[1, 1]), 0, (0, 1)),
            Err(Error::EmptyArm { arm: 0 })
        ));
    }

    #[test]
    fn tv_worked_examples() {
        // arm 0 = {a,a,b,b}, arm 1 = {a,b,b,b}
        let cohort = categorical_cohort(&[0, 0, 1, 1, 0, 1, 1, 1]);
        let asg = a(&[0, 0, 0, 0, 1, 1, 1, 1]);
        assert!((total_variation(&cohort, &asg, 0, (0, 1)).unwrap() - 0.25).abs() < 1e-12);

        let disjoint = categorical_cohort(&[0, 0, 1, 1]);
        assert_eq!(
            total_variation(&disjoint, &a(&[0, 0, 1, 1]), 0, (0, 1)).unwrap(),
            1.0
        );
        assert_eq!(
            total_variation(&disjoint, &a(&[0, 1, 0, 1]), 0, (0, 1)).unwrap(),
            0.0
        );
    }

    #[test]
    fn singleton_pair_discrepancy() {
        let cohort = numeric_cohort(&[0.0, 2.0]);
        let s = compute_scales(&cohort);
        let d = pair_discrepancy(
            &cohort,
            &a(&[0, 1]),
            (0, 1),
            &ObjectiveConfig::default(),
            &s,
        )
        .unwrap();
        assert!((d.d_num - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(d.d_cat, 0.0);
        assert_eq!(d.total, d.d_num);
    }

    #[test]
    fn alpha_zero_ignores_categoricals() {
        let schema = CovariateSchema::new(
            vec![
                Covariate::numerical("x"),
                Covariate::categorical("g", ["u", "v"]),
            ],
            None,
            None,
            None,
        )
        .unwrap();
        let patients = (0..4)
            .map(|i| Patient::new(format!("p{i}"), vec![i as f64], vec![i / 2]))
            .collect();
        let cohort = Cohort::new(schema, patients).unwrap();
        let s = compute_scales(&cohort);
        let cfg = ObjectiveConfig::new(0.0, 1.0).unwrap();
        let d = pair_discrepancy(&cohort, &a(&[0, 0, 1, 1]), (0, 1), &cfg, &s).unwrap();
        assert_eq!(d.d_cat, 1.0);
        assert_eq!(d.total, d.d_num);
    }

    #[test]
    fn objective_is_max_over_pairs() {
        let cohort = numeric_cohort(&[0.0, 1.0, 5.0, 6.0, 2.0, 3.0]);
        let s = compute_scales(&cohort);
        let cfg = ObjectiveConfig::default();
        let asg = a(&[0, 0, 1, 1, 2, 2]);
        let r = objective(&cohort, &asg, 3, &cfg, &s).unwrap();
        assert_eq!(r.pairs.len(), 3);
        let max = r.pairs.iter().map(|p| p.total).fold(0.0, f64::max);
        assert_eq!(r.objective, max);
        assert_eq!(r.objective, r.pair(0, 1).unwrap().total);

        // two arms: the objective is the single pair total
        let two = a(&[0, 0, 1, 1, 0, 1]);
        let r2 = objective(&cohort, &two, 2, &cfg, &s).unwrap();
        let d = pair_discrepancy(&cohort, &two, (0, 1), &cfg, &s).unwrap();
        assert_eq!(r2.objective, d.total);
    }

    #[test]
    fn objective_rejects_out_of_range_arm() {
        let cohort = numeric_cohort(&[0.0, 1.0, 2.0]);
        let s = compute_scales(&cohort);
        assert!(objective(&cohort, &a(&[0, 1, 2]), 2, &ObjectiveConfig::default(), &s).is_err());
    }

    #[test]
    fn negative_weights_rejected() {
        assert!(ObjectiveConfig::new(-1.0, 1.0).is_err());
        assert!(ObjectiveConfig::new(1.0, f64::NAN).is_err());
    }
}
