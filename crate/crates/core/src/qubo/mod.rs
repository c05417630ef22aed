//! Quadratic (QUBO / Ising) relaxation of the two-arm balance problem.
//!
//! With spins `z_i = 2b_i − 1` (`b_i = 1` puts patient `i` in arm 1) the
//! encoded energy is
//!
//! ```text
//! E(z) = 4/n² · Σ_j (Σ_i z_i c_ij)²            numerical covariates
//!      + α · 4/n² · Σ_k (Σ_i z_i 1[cat_i = k])²  one-hot categorical levels
//!      + λ · (Σ_i z_i)²                          arm-size penalty
//! ```
//!
//! where `c_ij` is covariate `j` of patient `i`, centred on the cohort mean
//! and divided by the cohort standard deviation. For a balanced split each
//! squared sum is a squared difference of arm means, so the energy is a
//! quadratic surrogate of the imbalance objective. The surrogate is only a
//! search device: decoded assignments are always re-scored with the true
//! objective.

mod anneal;
mod qaoa;
mod repair;

pub use anneal::{anneal_qubo, AnnealOutcome, AnnealSchedule};
pub use qaoa::{qaoa_optimize, QaoaConfig, QaoaOutcome, QaoaSimulator};
pub use repair::decode_and_repair;

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cohort::{AssignmentConstraints, Cohort};
use crate::error::{Error, Result};
use crate::metrics::{compute_scales, ObjectiveConfig};
use crate::solve::{finish, SolveResult};

/// `energy(b) = offset + Σ_{i≤j} Q(i,j)·b_i·b_j`, exactly as stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboProblem {
    n: usize,
    /// Dense row-major `n × n`; only entries with `i ≤ j` are used.
    coefficients: Vec<f64>,
    offset: f64,
}

impl QuboProblem {
    pub fn new(n: usize) -> Self {
        QuboProblem {
            n,
            coefficients: vec![0.0; n * n],
            offset: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn set_offset(&mut self, offset: f64) {
        self.offset = offset;
    }

    /// Coefficient of `b_i·b_j`; the arguments may come in either order.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = (i.min(j), i.max(j));
        self.coefficients[i * self.n + j]
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (i, j) = (i.min(j), i.max(j));
        self.coefficients[i * self.n + j] += value;
    }

    pub fn energy(&self, bits: &[bool]) -> f64 {
        assert_eq!(bits.len(), self.n, "bitstring length");
        let mut e = self.offset;
        for i in 0..self.n {
            if !bits[i] {
                continue;
            }
            let row = &self.coefficients[i * self.n..(i + 1) * self.n];
            for j in i..self.n {
                if bits[j] {
                    e += row[j];
                }
            }
        }
        e
    }

    /// Nonzero `(i, j, value)` entries with `i ≤ j`, row by row.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (i..self.n).filter_map(move |j| {
                let v = self.coefficients[i * self.n + j];
                (v != 0.0).then_some((i, j, v))
            })
        })
    }

    /// Largest coefficient magnitude.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms().map(|(_, _, v)| v.abs()).fold(0.0, f64::max)
    }

    /// Equivalent spin model over `s_i = 2b_i − 1`.
    pub fn to_ising(&self) -> IsingModel {
        let n = self.n;
        let mut ising = IsingModel {
            n,
            h: vec![0.0; n],
            couplings: vec![0.0; n * n],
            offset: self.offset,
        };
        for (i, j, q) in self.terms() {
            if i == j {
                ising.offset += q / 2.0;
                ising.h[i] += q / 2.0;
            } else {
                ising.offset += q / 4.0;
                ising.h[i] += q / 4.0;
                ising.h[j] += q / 4.0;
                ising.couplings[i * n + j] += q / 4.0;
            }
        }
        ising
    }

    /// Plain-text coefficient list:
    ///
    /// ```text
    /// n <variables>
    /// offset <value>
    /// <i> <j> <value>      one line per nonzero, i ≤ j
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = format!("n {}\noffset {:?}\n", self.n, self.offset);
        for (i, j, v) in self.terms() {
            writeln!(out, "{i} {j} {v:?}").expect("writing to a String");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, what: &str| Error::Data(format!("qubo text line {line}: {what}"));
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> Result<(usize, String)> {
            let (k, line) = lines.next().ok_or_else(|| bad(0, "missing header"))?;
            let value = line
                .strip_prefix(key)
                .map(str::trim)
                .ok_or_else(|| bad(k, &format!("expected `{key}`")))?;
            Ok((k, value.to_string()))
        };
        let (k, n) = header("n")?;
        let n: usize = n.parse().map_err(|_| bad(k, "bad variable count"))?;
        let (k, offset) = header("offset")?;
        let mut qubo = QuboProblem::new(n);
        qubo.offset = offset.parse().map_err(|_| bad(k, "bad offset"))?;
        for (k, line) in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [i, j, v] = parts[..] else {
                return Err(bad(k, "expected `i j value`"));
            };
            let i: usize = i.parse().map_err(|_| bad(k, "bad index"))?;
            let j: usize = j.parse().map_err(|_| bad(k, "bad index"))?;
            let v: f64 = v.parse().map_err(|_| bad(k, "bad value"))?;
            if i >= n || j >= n {
                return Err(bad(k, "index out of range"));
            }
            qubo.add(i, j, v);
        }
        Ok(qubo)
    }
}

/// `energy(s) = offset + Σ_i h_i s_i + Σ_{i<j} J_ij s_i s_j` over `s ∈ {−1, 1}ⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    n: usize,
    pub h: Vec<f64>,
    /// Dense row-major; only `i < j` entries are used.
    couplings: Vec<f64>,
    pub offset: f64,
}

impl IsingModel {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        let (i, j) = (i.min(j), i.max(j));
        self.couplings[i * self.n + j]
    }

    pub fn energy(&self, spins: &[i8]) -> f64 {
        let mut e = self.offset;
        for i in 0..self.n {
            let si = f64::from(spins[i]);
            e += self.h[i] * si;
            for (j, &sj) in spins.iter().enumerate().skip(i + 1) {
                e += self.couplings[i * self.n + j] * si * f64::from(sj);
            }
        }
        e
    }

    /// Energy of every computational basis state; bit `i` of the index is `b_i`.
    pub fn spectrum(&self) -> Vec<f64> {
        let n = self.n;
        (0..1usize << n)
            .map(|x| {
                let spins: Vec<i8> = (0..n)
                    .map(|i| if x >> i & 1 == 1 { 1 } else { -1 })
                    .collect();
                self.energy(&spins)
            })
            .collect()
    }

    pub fn to_qubo(&self) -> QuboProblem {
        let n = self.n;
        let mut q = QuboProblem::new(n);
        q.offset = self.offset;
        for i in 0..n {
            q.add(i, i, 2.0 * self.h[i]);
            q.offset -= self.h[i];
            for j in i + 1..n {
                let c = self.couplings[i * n + j];
                if c != 0.0 {
                    q.add(i, j, 4.0 * c);
                    q.add(i, i, -2.0 * c);
                    q.add(j, j, -2.0 * c);
                    q.offset += c;
                }
            }
        }
        q
    }
}

/// Accumulates `weight · (Σ_i a_i s_i)²` terms in spin form.
struct SquaredSums {
    n: usize,
    couplings: Vec<f64>,
    offset: f64,
}

impl SquaredSums {
    fn new(n: usize) -> Self {
        SquaredSums {
            n,
            couplings: vec![0.0; n * n],
            offset: 0.0,
        }
    }

    fn add(&mut self, weight: f64, a: &[f64]) {
        for i in 0..self.n {
            if a[i] == 0.0 {
                continue;
            }
            self.offset += weight * a[i] * a[i];
            for j in i + 1..self.n {
                self.couplings[i * self.n + j] += 2.0 * weight * a[i] * a[j];
            }
        }
    }

    fn into_ising(self) -> IsingModel {
        IsingModel {
            n: self.n,
            h: vec![0.0; self.n],
            couplings: self.couplings,
            offset: self.offset,
        }
    }
}

/// Per-patient columns of the covariate part: standardized numerical values
/// followed by one indicator column per categorical level, with weights.
fn covariate_columns(cohort: &Cohort, config: &ObjectiveConfig) -> Vec<(f64, Vec<f64>)> {
    let n = cohort.len();
    let scale_weight = 4.0 / (n * n) as f64;
    let scales = compute_scales(cohort);
    let mut columns = Vec::new();
    for (j, scale) in scales.retained() {
        let col: Vec<f64> = cohort.numerical_column(j).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        columns.push((
            scale_weight,
            col.iter().map(|v| (v - mean) / scale).collect(),
        ));
    }
    let schema = cohort.schema();
    for c in 0..schema.num_categorical() {
        for k in 0..schema.categorical_labels(c).len() {
            let col = cohort
                .patients()
                .iter()
                .map(|p| if p.categorical[c] == k { 1.0 } else { 0.0 })
                .collect();
            columns.push((config.alpha * scale_weight, col));
        }
    }
    columns
}

fn covariate_ising(cohort: &Cohort, config: &ObjectiveConfig) -> SquaredSums {
    let mut sums = SquaredSums::new(cohort.len());
    for (w, col) in covariate_columns(cohort, config) {
        sums.add(w, &col);
    }
    sums
}

/// Twice the largest coefficient magnitude of the covariate part of the QUBO.
pub fn default_penalty(cohort: &Cohort, config: &ObjectiveConfig) -> f64 {
    let max = covariate_ising(cohort, config)
        .into_ising()
        .to_qubo()
        .max_abs_coefficient();
    if max > 0.0 {
        2.0 * max
    } else {
        1.0
    }
}

/// Encodes the two-arm balance problem as a QUBO. `penalty` defaults to
/// [`default_penalty`].
pub fn encode_qubo(
    cohort: &Cohort,
    constraints: &AssignmentConstraints,
    config: &ObjectiveConfig,
    penalty: Option<f64>,
) -> Result<QuboProblem> {
    if constraints.arms() != 2 {
        return Err(Error::Unsupported(format!(
            "the QUBO encoding handles 2 arms, got {}",
            constraints.arms()
        )));
    }
    let penalty = penalty.unwrap_or_else(|| default_penalty(cohort, config));
    if !(penalty > 0.0 && penalty.is_finite()) {
        return Err(Error::Config(format!(
            "penalty weight must be positive, got {penalty}"
        )));
    }
    let mut sums = covariate_ising(cohort, config);
    sums.add(penalty, &vec![1.0; cohort.len()]);
    Ok(sums.into_ising().to_qubo())
}

/// Settings of the encode → anneal → repair pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QuboSolverConfig {
    pub penalty: Option<f64>,
    pub schedule: AnnealSchedule,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for QuboSolverConfig {
    fn default() -> Self {
        QuboSolverConfig {
            penalty: None,
            schedule: AnnealSchedule::default(),
            restarts: 10,
            seed: 0,
        }
    }
}

/// Encode, anneal the bitstring, then decode and repair it.
pub fn solve_qubo_anneal(
    cohort: &Cohort,
    constraints: &AssignmentConstraints,
    config: &QuboSolverConfig,
    objective_config: &ObjectiveConfig,
) -> Result<SolveResult> {
    let started = Instant::now();
    constraints.search_band(cohort.len())?;
    let qubo = encode_qubo(cohort, constraints, objective_config, config.penalty)?;
    let found = anneal_qubo(&qubo, &config.schedule, config.restarts, config.seed)?;
    let assignment = decode_and_repair(cohort, constraints, &found.bits, objective_config)?;
    finish(
        cohort,
        constraints,
        objective_config,
        assignment,
        found.evaluations,
        started,
    )
}

/// Encode, optimize a QAOA circuit on the statevector, then decode and repair
/// the selected basis state.
pub fn solve_qaoa(
    cohort: &Cohort,
    constraints: &AssignmentConstraints,
    config: &QaoaConfig,
    penalty: Option<f64>,
    objective_config: &ObjectiveConfig,
) -> Result<SolveResult> {
    let started = Instant::now();
    if cohort.len() > config.max_qubits {
        return Err(Error::SizeCap {
            what: "qubits for statevector QAOA",
            actual: cohort.len(),
            limit: config.max_qubits,
        });
    }
    constraints.search_band(cohort.len())?;
    let qubo = encode_qubo(cohort, constraints, objective_config, penalty)?;
    let found = qaoa_optimize(&qubo, config)?;
    let assignment = decode_and_repair(cohort, constraints, &found.bits, objective_config)?;
    finish(
        cohort,
        constraints,
        objective_config,
        assignment,
        found.evaluations,
        started,
    )
}

pub(crate) fn bits_of(index: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| index >> i & 1 == 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::test_support::numeric_cohort;
    use crate::synthetic::{mirrored, random_cohort};
    use proptest::prelude::*;

    /// The encoded energy written out directly from its definition.
    fn formula_energy(cohort: &Cohort, cfg: &ObjectiveConfig, penalty: f64, bits: &[bool]) -> f64 {
        let n = cohort.len();
        let z: Vec<f64> = bits.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
        let w = 4.0 / (n * n) as f64;
        let scales = compute_scales(cohort);
        let mut e = 0.0;
        for (j, scale) in scales.retained() {
            let mean = cohort.numerical_column(j).sum::<f64>() / n as f64;
            let s: f64 = cohort
                .numerical_column(j)
                .zip(&z)
                .map(|(v, zi)| zi * (v - mean) / scale)
                .sum();
            e += w * s * s;
        }
        for c in 0..cohort.schema().num_categorical() {
            for k in 0..cohort.schema().categorical_labels(c).len() {
                let s: f64 = cohort
                    .patients()
                    .iter()
                    .zip(&z)
                    .filter(|(p, _)| p.categorical[c] == k)
                    .map(|(_, zi)| zi)
                    .sum();
                e += cfg.alpha * w * s * s;
            }
        }
        let total: f64 = z.iter().sum();
        e + penalty * total * total
    }

    #[test]
    fn stored_energy_matches_formula_exhaustively() {
        for (seed, n) in [(1u64, 6usize), (2, 9), (3, 10)] {
            let cohort = random_cohort(n, 2, 2, seed);
            let cfg = ObjectiveConfig::new(0.7, 1.0).unwrap();
            let lambda = default_penalty(&cohort, &cfg);
            let q = encode_qubo(&cohort, &AssignmentConstraints::two_arms(), &cfg, None).unwrap();
            let ising = q.to_ising();
            for x in 0..1usize << n {
                let bits = bits_of(x, n);
                let direct = formula_energy(&cohort, &cfg, lambda, &bits);
                assert!((q.energy(&bits) - direct).abs() < 1e-9);
                let spins: Vec<i8> = bits.iter().map(|&b| if b { 1 } else { -1 }).collect();
                assert!((ising.energy(&spins) - direct).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mirrored_cohort_has_planted_zero() {
        let (cohort, asg) = mirrored(&random_cohort(4, 2, 1, 7));
        let q = encode_qubo(
            &cohort,
            &AssignmentConstraints::two_arms(),
            &ObjectiveConfig::default(),
            None,
        )
        .unwrap();
        let bits: Vec<bool> = asg.arm_of().iter().map(|&a| a == 1).collect();
        assert!(q.energy(&bits).abs() < 1e-9);
        let ground = (0..1usize << cohort.len())
            .map(|x| q.energy(&bits_of(x, cohort.len())))
            .fold(f64::INFINITY, f64::min);
        assert!(ground > -1e-9);
    }

    #[test]
    fn constant_covariates_leave_only_the_penalty() {
        let cohort = numeric_cohort(&[2.0; 6]);
        let q = encode_qubo(
            &cohort,
            &AssignmentConstraints::two_arms(),
            &ObjectiveConfig::default(),
            Some(1.5),
        )
        .unwrap();
        for x in 0..64usize {
            let bits = bits_of(x, 6);
            let ones = bits.iter().filter(|&&b| b).count() as f64;
            let sum = 2.0 * ones - 6.0;
            assert!((q.energy(&bits) - 1.5 * sum * sum).abs() < 1e-9);
            assert_eq!(q.energy(&bits).abs() < 1e-9, ones == 3.0);
        }
    }

    #[test]
    fn more_than_two_arms_is_unsupported() {
        let cohort = random_cohort(6, 1, 0, 1);
        let three = AssignmentConstraints::new(3, 0).unwrap();
        assert!(matches!(
            encode_qubo(&cohort, &three, &ObjectiveConfig::default(), None),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn ising_round_trip() {
        let cohort = random_cohort(7, 2, 1, 5);
        let q = encode_qubo(
            &cohort,
            &AssignmentConstraints::two_arms(),
            &ObjectiveConfig::default(),
            None,
        )
        .unwrap();
        let back = q.to_ising().to_qubo();
        for x in 0..128usize {
            let bits = bits_of(x, 7);
            assert!((q.energy(&bits) - back.energy(&bits)).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn text_format_round_trips(
            n in 1usize..6,
            entries in proptest::collection::vec((0usize..6, 0usize..6, -1e6f64..1e6), 0..12),
            offset in -1e3f64..1e3,
        ) {
            let mut q = QuboProblem::new(n);
            q.set_offset(offset);
            for (i, j, v) in entries {
                if i < n && j < n {
                    q.add(i, j, v);
                }
            }
            let back = QuboProblem::from_text(&q.to_text()).unwrap();
            prop_assert_eq!(back, q);
        }
    }

    #[test]
    fn text_format_rejects_garbage() {
        assert!(QuboProblem::from_text("n 2\noffset 0\n0 5 1.0\n").is_err());
        assert!(QuboProblem::from_text("offset 0\n").is_err());
        assert!(QuboProblem::from_text("n 2\noffset 0\n0 1\n").is_err());
    }
}
