//! Patients, cohorts, arm assignments and the feasible assignment set.
//!
//! A [`Cohort`] is a fixed table of patients described by a
//! [`CovariateSchema`]. Categorical values are stored as indices into the
//! schema's label list. An [`Assignment`] maps every patient (by position) to
//! an arm, and [`AssignmentConstraints`] describe which arm-size profiles are
//! acceptable.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CovariateKind {
    Numerical,
    Categorical { labels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Covariate {
    pub name: String,
    #[serde(flatten)]
    pub kind: CovariateKind,
}

impl Covariate {
    pub fn numerical(name: impl Into<String>) -> Self {
        Covariate {
            name: name.into(),
            kind: CovariateKind::Numerical,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        labels: impl IntoIterator<Item = S>,
    ) -> Self {
        Covariate {
            name: name.into(),
            kind: CovariateKind::Categorical {
                labels: labels.into_iter().map(Into::into).collect(),
            },
        }
    }
}

/// Names of the columns holding survival outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurvivalColumns {
    pub time: String,
    pub event: String,
}

/// Ordered covariate definitions plus optional outcome and arm columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CovariateSchema {
    covariates: Vec<Covariate>,
    survival: Option<SurvivalColumns>,
    arm_column: Option<String>,
    #[serde(skip)]
    numerical: Vec<usize>,
    #[serde(skip)]
    categorical: Vec<usize>,
}

impl CovariateSchema {
    pub fn new(
        covariates: Vec<Covariate>,
        time: Option<String>,
        event: Option<String>,
        arm_column: Option<String>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for cov in &covariates {
            if cov.name.is_empty() {
                return Err(Error::Schema("covariate names must be nonempty".into()));
            }
            if !seen.insert(cov.name.as_str()) {
                return Err(Error::Schema(format!("duplicate covariate `{}`", cov.name)));
            }
            if let CovariateKind::Categorical { labels } = &cov.kind {
                if labels.len() < 2 {
                    return Err(Error::Schema(format!(
                        "categorical covariate `{}` needs at least 2 labels",
                        cov.name
                    )));
                }
                let unique: HashSet<_> = labels.iter().collect();
                if unique.len() != labels.len() {
                    return Err(Error::Schema(format!(
                        "categorical covariate `{}` has duplicate labels",
                        cov.name
                    )));
                }
            }
        }
        let survival = match (time, event) {
            (Some(time), Some(event)) => Some(SurvivalColumns { time, event }),
            (None, None) => None,
            _ => {
                return Err(Error::Schema(
                    "survival time and event indicator must be given together".into(),
                ))
            }
        };
        Ok(Self::assemble(covariates, survival, arm_column))
    }

    fn assemble(
        covariates: Vec<Covariate>,
        survival: Option<SurvivalColumns>,
        arm_column: Option<String>,
    ) -> Self {
        let numerical = covariates
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == CovariateKind::Numerical)
            .map(|(i, _)| i)
            .collect();
        let categorical = covariates
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind != CovariateKind::Numerical)
            .map(|(i, _)| i)
            .collect();
        CovariateSchema {
            covariates,
            survival,
            arm_column,
            numerical,
            categorical,
        }
    }

    pub fn covariates(&self) -> &[Covariate] {
        &self.covariates
    }

    pub fn survival(&self) -> Option<&SurvivalColumns> {
        self.survival.as_ref()
    }

    pub fn arm_column(&self) -> Option<&str> {
        self.arm_column.as_deref()
    }

    pub fn num_numerical(&self) -> usize {
        self.numerical.len()
    }

    pub fn num_categorical(&self) -> usize {
        self.categorical.len()
    }

    /// Name of the `j`-th numerical covariate.
    pub fn numerical_name(&self, j: usize) -> &str {
        &self.covariates[self.numerical[j]].name
    }

    /// Name of the `c`-th categorical covariate.
    pub fn categorical_name(&self, c: usize) -> &str {
        &self.covariates[self.categorical[c]].name
    }

    /// Labels of the `c`-th categorical covariate.
    pub fn categorical_labels(&self, c: usize) -> &[String] {
        match &self.covariates[self.categorical[c]].kind {
            CovariateKind::Categorical { labels } => labels,
            CovariateKind::Numerical => unreachable!("index table only holds categoricals"),
        }
    }

    pub fn numerical_index(&self, name: &str) -> Option<usize> {
        (0..self.num_numerical()).find(|&j| self.numerical_name(j) == name)
    }

    pub fn categorical_index(&self, name: &str) -> Option<usize> {
        (0..self.num_categorical()).find(|&c| self.categorical_name(c) == name)
    }
}

impl<'de> Deserialize<'de> for CovariateSchema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            covariates: Vec<Covariate>,
            survival: Option<SurvivalColumns>,
            arm_column: Option<String>,
        }
        let raw = Raw::deserialize(d)?;
        let (time, event) = match raw.survival {
            Some(s) => (Some(s.time), Some(s.event)),
            None => (None, None),
        };
        CovariateSchema::new(raw.covariates, time, event, raw.arm_column)
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Survival {
    pub time: f64,
    pub event: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patient {
    pub id: String,
    pub numerical: Vec<f64>,
    pub categorical: Vec<usize>,
    pub survival: Option<Survival>,
    pub original_arm: Option<usize>,
}

impl Patient {
    pub fn new(id: impl Into<String>, numerical: Vec<f64>, categorical: Vec<usize>) -> Self {
        Patient {
            id: id.into(),
            numerical,
            categorical,
            survival: None,
            original_arm: None,
        }
    }

    pub fn with_survival(mut self, time: f64, event: bool) -> Self {
        self.survival = Some(Survival { time, event });
        self
    }

    pub fn with_arm(mut self, arm: usize) -> Self {
        self.original_arm = Some(arm);
        self
    }
}

/// An immutable, validated table of patients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cohort {
    schema: CovariateSchema,
    patients: Vec<Patient>,
}

impl Cohort {
    pub fn new(schema: CovariateSchema, patients: Vec<Patient>) -> Result<Self> {
        if patients.len() < 2 {
            return Err(Error::Cohort(format!(
                "a cohort needs at least 2 patients, got {}",
                patients.len()
            )));
        }
        let mut ids = HashSet::new();
        for p in &patients {
            if !ids.insert(p.id.as_str()) {
                return Err(Error::Cohort(format!("duplicate patient id `{}`", p.id)));
            }
            if p.numerical.len() != schema.num_numerical() {
                return Err(Error::Cohort(format!(
                    "patient `{}` has {} numerical values, schema declares {}",
                    p.id,
                    p.numerical.len(),
                    schema.num_numerical()
                )));
            }
            if let Some(j) = p.numerical.iter().position(|v| !v.is_finite()) {
                return Err(Error::Cohort(format!(
                    "patient `{}` has a non-finite value for `{}`",
                    p.id,
                    schema.numerical_name(j)
                )));
            }
            if p.categorical.len() != schema.num_categorical() {
                return Err(Error::Cohort(format!(
                    "patient `{}` has {} categorical values, schema declares {}",
                    p.id,
                    p.categorical.len(),
                    schema.num_categorical()
                )));
            }
            for (c, &k) in p.categorical.iter().enumerate() {
                if k >= schema.categorical_labels(c).len() {
                    return Err(Error::Cohort(format!(
                        "patient `{}` has category index {k} for `{}`, which has {} labels",
                        p.id,
                        schema.categorical_name(c),
                        schema.categorical_labels(c).len()
                    )));
                }
            }
            if let Some(s) = p.survival {
                if !(s.time > 0.0 && s.time.is_finite()) {
                    return Err(Error::Cohort(format!(
                        "patient `{}` has non-positive survival time {}",
                        p.id, s.time
                    )));
                }
            }
        }
        Ok(Cohort { schema, patients })
    }

    pub fn schema(&self) -> &CovariateSchema {
        &self.schema
    }

    pub fn patients(&self) -> &[Patient] {
        &self.patients
    }

    pub fn len(&self) -> usize {
        self.patients.len()
    }

    /// Always false: a cohort holds at least two patients.
    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
    }

    /// Value of numerical covariate `j` for every patient, in cohort order.
    pub fn numerical_column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.patients.iter().map(move |p| p.numerical[j])
    }

    /// The sub-cohort made of the patients at `positions` (kept in the given order).
    pub fn subset(&self, positions: &[usize]) -> Result<Cohort> {
        let patients = positions
            .iter()
            .map(|&i| self.patients[i].clone())
            .collect();
        Cohort::new(self.schema.clone(), patients)
    }

    /// True when every patient carries a survival record.
    pub fn has_survival(&self) -> bool {
        self.patients.iter().all(|p| p.survival.is_some())
    }
}

impl<'de> Deserialize<'de> for Cohort {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            schema: CovariateSchema,
            patients: Vec<Patient>,
        }
        let raw = Raw::deserialize(d)?;
        Cohort::new(raw.schema, raw.patients).map_err(serde::de::Error::custom)
    }
}

/// Number of arms and the tolerance on arm sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentConstraints {
    arms: usize,
    tolerance: usize,
}

impl AssignmentConstraints {
    pub fn new(arms: usize, tolerance: usize) -> Result<Self> {
        if arms < 2 {
            return Err(Error::Config(format!("need at least 2 arms, got {arms}")));
        }
        Ok(AssignmentConstraints { arms, tolerance })
    }

    pub fn two_arms() -> Self {
        AssignmentConstraints {
            arms: 2,
            tolerance: 0,
        }
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn tolerance(&self) -> usize {
        self.tolerance
    }

    /// Inclusive arm-size band `[⌊n/m⌋ − τ, ⌈n/m⌉ + τ]`, clipped to `[0, n]`.
    pub fn size_band(&self, n: usize) -> (usize, usize) {
        let m = self.arms;
        let lo = (n / m).saturating_sub(self.tolerance);
        let hi = (n.div_ceil(m) + self.tolerance).min(n);
        (lo, hi)
    }

    /// The band used by the solvers: like [`size_band`](Self::size_band) but
    /// every arm must also be nonempty so the objective is defined.
    pub fn search_band(&self, n: usize) -> Result<(usize, usize)> {
        let (lo, hi) = self.size_band(n);
        let lo = lo.max(1);
        if self.arms * lo > n || self.arms * hi < n {
            return Err(Error::Infeasible(format!(
                "{n} patients cannot fill {} nonempty arms of size {lo}..={hi}",
                self.arms
            )));
        }
        Ok((lo, hi))
    }
}

/// Arm index per patient, in cohort order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(Vec<usize>);

impl Assignment {
    pub fn new(arm_of: Vec<usize>) -> Self {
        Assignment(arm_of)
    }

    pub fn arm_of(&self) -> &[usize] {
        &self.0
    }

    pub fn arm(&self, patient: usize) -> usize {
        self.0[patient]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sizes of arms `0..arms`; entries at or above `arms` are ignored.
    pub fn arm_sizes(&self, arms: usize) -> Vec<usize> {
        let mut sizes = vec![0; arms];
        for &a in &self.0 {
            if a < arms {
                sizes[a] += 1;
            }
        }
        sizes
    }

    /// Positions of the patients in `arm`.
    pub fn members(&self, arm: usize) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(move |(_, &a)| a == arm)
            .map(|(i, _)| i)
    }

    pub(crate) fn set(&mut self, patient: usize, arm: usize) {
        self.0[patient] = arm;
    }

    pub(crate) fn swap(&mut self, i: usize, j: usize) {
        self.0.swap(i, j);
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    ArmOutOfRange {
        patient: usize,
        arm: usize,
    },
    ArmSize {
        arm: usize,
        size: usize,
        min: usize,
        max: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Valid,
    Invalid(Vec<Violation>),
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validation::Valid)
    }
}

/// Checks arm indices and arm sizes against the constraints.
///
/// A length mismatch is a structural error, reported as `Err` rather than as
/// a violation.
pub fn validate_assignment(
    cohort: &Cohort,
    constraints: &AssignmentConstraints,
    assignment: &Assignment,
) -> Result<Validation> {
    if assignment.len() != cohort.len() {
        return Err(Error::LengthMismatch {
            expected: cohort.len(),
            actual: assignment.len(),
        });
    }
    let m = constraints.arms();
    let mut violations: Vec<Violation> = assignment
        .arm_of()
        .iter()
        .enumerate()
        .filter(|(_, &a)| a >= m)
        .map(|(patient, &arm)| Violation::ArmOutOfRange { patient, arm })
        .collect();
    let (min, max) = constraints.size_band(cohort.len());
    for (arm, size) in assignment.arm_sizes(m).into_iter().enumerate() {
        if size < min || size > max {
            violations.push(Violation::ArmSize {
                arm,
                size,
                min,
                max,
            });
        }
    }
    Ok(if violations.is_empty() {
        Validation::Valid
    } else {
        Validation::Invalid(violations)
    })
}

/// The recorded trial assignment together with the loosest constraints it
/// needs: `m` is one more than the largest recorded arm and `τ` is the
/// smallest tolerance that admits the observed sizes.
pub fn assignment_from_arm_column(cohort: &Cohort) -> Result<(Assignment, AssignmentConstraints)> {
    let missing: Vec<&str> = cohort
        .patients()
        .iter()
        .filter(|p| p.original_arm.is_none())
        .map(|p| p.id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "patients without a recorded arm: {}",
            missing.join(", ")
        )));
    }
    let arm_of: Vec<usize> = cohort
        .patients()
        .iter()
        .map(|p| p.original_arm.expect("checked above"))
        .collect();
    let arms = arm_of.iter().copied().max().unwrap_or(0).max(1) + 1;
    let assignment = Assignment::new(arm_of);
    let constraints = loosest_constraints(&assignment, arms)?;
    Ok((assignment, constraints))
}

/// `m` arms with the smallest tolerance that admits the sizes of `assignment`.
pub fn loosest_constraints(assignment: &Assignment, arms: usize) -> Result<AssignmentConstraints> {
    let (lo, hi) = AssignmentConstraints::new(arms, 0)?.size_band(assignment.len());
    let tolerance = assignment
        .arm_sizes(arms)
        .into_iter()
        .map(|s| lo.saturating_sub(s).max(s.saturating_sub(hi)))
        .max()
        .unwrap_or(0);
    AssignmentConstraints::new(arms, tolerance)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// One numerical covariate `x`, no categoricals.
    pub fn numeric_cohort(values: &[f64]) -> Cohort {
        let schema =
            CovariateSchema::new(vec![Covariate::numerical("x")], None, None, None).unwrap();
        let patients = values
            .iter()
            .enumerate()
            .map(|(i, &v)| Patient::new(format!("p{i}"), vec![v], vec![]))
            .collect();
        Cohort::new(schema, patients).unwrap()
    }

    /// One categorical covariate with labels a, b, c.
    pub fn categorical_cohort(codes: &[usize]) -> Cohort {
        let schema = CovariateSchema::new(
            vec![Covariate::categorical("g", ["a", "b", "c"])],
            None,
            None,
            None,
        )
        .unwrap();
        let patients = codes
            .iter()
            .enumerate()
            .map(|(i, &k)| Patient::new(format!("p{i}"), vec![], vec![k]))
            .collect();
        Cohort::new(schema, patients).unwrap()
    }
}
