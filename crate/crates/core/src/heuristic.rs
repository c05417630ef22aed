//! Metaheuristics over feasible assignments: tabu search and simulated
//! annealing, both built on a size-preserving swap neighborhood.
//!
//! Every restart `r` is seeded with `seed ^ r` and runs single-threaded;
//! restarts run in parallel and the best result wins, ties going to the lower
//! restart index, so output does not depend on the thread count.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{Assignment, AssignmentConstraints, Cohort};
use crate::error::{Error, Result};
use crate::metrics::ObjectiveConfig;
use crate::model::{BalanceModel, Relocation};
use crate::rng::{derive_seed, seeded};
use crate::solve::{finish, SolveResult, TIE_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TabuConfig {
    /// Iterations a swapped pair stays tabu; `None` means `⌈n/4⌉`.
    pub tenure: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnnealingConfig {
    /// Starting temperature; `None` estimates it from 100 random moves.
    pub initial_temp: Option<f64>,
    pub cooling_rate: f64,
    pub moves_per_temp: usize,
}

impl Default for AnnealingConfig {
    fn default() -> Self {
        AnnealingConfig {
            initial_temp: None,
            cooling_rate: 0.995,
            moves_per_temp: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HeuristicConfig {
    pub restarts: usize,
    /// Tabu iterations, or annealing temperature steps, per restart.
    /// `None` means `20·n`.
    pub max_iters: Option<usize>,
    pub seed: u64,
    pub tabu: TabuConfig,
    pub annealing: AnnealingConfig,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            restarts: 10,
            max_iters: None,
            seed: 0,
            tabu: TabuConfig { tenure: None },
            annealing: AnnealingConfig::default(),
        }
    }
}

impl HeuristicConfig {
    pub fn with_seed(seed: u64) -> Self {
        HeuristicConfig {
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let a = &self.annealing;
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be positive".into()));
        }
        if !(a.cooling_rate > 0.0 && a.cooling_rate < 1.0) {
            return Err(Error::Config(format!(
                "cooling rate must lie in (0, 1), got {}",
                a.cooling_rate
            )));
        }
        if a.moves_per_temp == 0 || self.tabu.tenure == Some(0) {
            return Err(Error::Config(
                "move counts and tenure must be positive".into(),
            ));
        }
        if let Some(t) = a.initial_temp {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!(
                    "initial temperature must be positive, got {t}"
                )));
            }
        }
        Ok(())
    }

    fn iterations(&self, n: usize) -> usize {
        self.max_iters.unwrap_or(20 * n)
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = vec![0.0; n + 1];
    for k in 1..=n {
        table[k] = table[k - 1] + (k as f64).ln();
    }
    table
}

/// Every arm-size vector that sums to `n` with sizes inside `[lo, hi]`.
fn size_profiles(n: usize, arms: usize, (lo, hi): (usize, usize)) -> Vec<Vec<usize>> {
    fn rec(
        left: usize,
        arms: usize,
        lo: usize,
        hi: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == arms - 1 {
            if (lo..=hi).contains(&left) {
                cur.push(left);
                out.push(cur.clone());
                cur.pop();
            }
            return;
        }
        let rest = arms - cur.len() - 1;
        for s in lo..=hi.min(left) {
            let after = left - s;
            if after < rest * lo || after > rest * hi {
                continue;
            }
            cur.push(s);
            rec(after, arms, lo, hi, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, arms, lo, hi, &mut Vec::with_capacity(arms), &mut out);
    out
}

/// A uniformly random assignment among those respecting the size band.
///
/// A size profile is drawn with probability proportional to its number of
/// assignments (the multinomial coefficient), then a shuffled patient order
/// is dealt round-robin into arms until each reaches its target size.
pub fn random_feasible_assignment(
    cohort: &Cohort,
    constraints: &AssignmentConstraints,
    seed: u64,
) -> Result<Assignment> {
    let mut rng = seeded(seed);
    random_feasible_with(cohort.len(), constraints, &mut rng)
}

pub(crate) fn random_feasible_with<R: Rng>(
    n: usize,
    constraints: &AssignmentConstraints,
    rng: &mut R,
) -> Result<Assignment> {
    let arms = constraints.arms();
    let band = constraints.search_band(n)?;
    let profiles = size_profiles(n, arms, band);
    let profile = if profiles.len() == 1 {
        &profiles[0]
    } else {
        let lf = ln_factorials(n);
        let log_w: Vec<f64> = profiles
            .iter()
            .map(|p| lf[n] - p.iter().map(|&s| lf[s]).sum::<f64>())
            .collect();
        let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
        let mut u = rng.random::<f64>() * w.iter().sum::<f64>();
        let mut pick = profiles.len() - 1;
        for (k, wk) in w.iter().enumerate() {
            if u < *wk {
                pick = k;
                break;
            }
            u -= wk;
        }
        &profiles[pick]
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut arm_of = vec![0; n];
    let mut filled = vec![0; arms];
    let mut arm = 0;
    for i in order {
        while filled[arm] == profile[arm] {
            arm = (arm + 1) % arms;
        }
        arm_of[i] = arm;
        filled[arm] += 1;
        arm = (arm + 1) % arms;
    }
    Ok(Assignment::new(arm_of))
}

/// A local move between feasible assignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    /// Exchange the arms of two patients in different arms (`i < j`).
    Swap(usize, usize),
    /// Move one patient to another arm.
    Relocate { patient: usize, to: usize },
}

impl Move {
    pub fn apply(&self, assignment: &mut Assignment) {
        match *self {
            Move::Swap(i, j) => assignment.swap(i, j),
            Move::Relocate { patient, to } => assignment.set(patient, to),
        }
    }

    fn relocations(&self, assignment: &Assignment) -> ([Relocation; 2], usize) {
        match *self {
            Move::Swap(i, j) => {
                let (ai, aj) = (assignment.arm(i), assignment.arm(j));
                (
                    [
                        Relocation {
                            patient: i,
                            from: ai,
                            to: aj,
                        },
                        Relocation {
                            patient: j,
                            from: aj,
                            to: ai,
                        },
                    ],
                    2,
                )
            }
            Move::Relocate { patient, to } => {
                let r = Relocation {
                    patient,
                    from: assignment.arm(patient),
                    to,
                };
                ([r, r], 1)
            }
        }
    }

    fn tabu_key(&self) -> (usize, usize) {
        match *self {
            Move::Swap(i, j) => (i, j),
            Move::Relocate { patient, .. } => (patient, patient),
        }
    }
}

/// All swaps between patients in different arms, ordered by `(i, j)`, and,
/// when the tolerance is positive, every single-patient relocation that keeps
/// all arm sizes inside the band.
pub fn swap_neighborhood(
    assignment: &Assignment,
    constraints: &AssignmentConstraints,
) -> impl Iterator<Item = Move> {
    let n = assignment.len();
    let arms = constraints.arms();
    let arm_of = assignment.arm_of().to_vec();
    let mut moves = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if arm_of[i] != arm_of[j] {
                moves.push(Move::Swap(i, j));
            }
        }
    }
    if constraints.tolerance() > 0 {
        if let Ok((lo, hi)) = constraints.search_band(n) {
            let sizes = assignment.arm_sizes(arms);
            for (patient, &from) in arm_of.iter().enumerate() {
                for to in 0..arms {
                    if to != from && sizes[from] > lo && sizes[to] < hi {
                        moves.push(Move::Relocate { patient, to });
                    }
                }
            }
        }
    }
    moves.into_iter()
}

/// Metropolis rule: always accept improvements, accept a worsening `delta`
/// with probability `exp(−delta / temp)`.
pub fn metropolis_accept<R: Rng>(delta: f64, temp: f64, rng: &mut R) -> bool {
    if delta <= 0.0 {
        return true;
    }
    if temp <= 0.0 {
        return false;
    }
    rng.random::<f64>() < (-delta / temp).exp()
}

struct RestartOutcome {
    assignment: Assignment,
    score: f64,
    evaluations: u64,
}

fn best_of(outcomes: Vec<Result<RestartOutcome>>) -> Result<(Assignment, u64)> {
    let mut evaluations = 0;
    let mut best: Option<RestartOutcome> = None;
    for outcome in outcomes {
        let outcome = outcome?;
        evaluations += outcome.evaluations;
        if best
            .as_ref()
            .is_none_or(|b| outcome.score < b.score - TIE_EPS)
        {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one restart");
    Ok((best.assignment, evaluations))
}

fn run_restarts<F>(restarts: usize, run: F) -> Result<(Assignment, u64)>
where
    F: Fn(u64) -> Result<RestartOutcome> + Sync + Send,
{
    let outcomes: Vec<_> = (0..restarts as u64).into_par_iter().map(&run).collect();
    best_of(outcomes)
}

/// Steepest-descent tabu search over the swap neighborhood.
///
/// The tabu list is keyed on unordered patient pairs; a tabu move is still
/// admissible when it beats the best objective of the restart (aspiration).
/// Ties between equally good moves go to the smallest `(i, j)`.
pub fn tabu_search(
    cohort: &Cohort,
    constraints: &AssignmentConstraints,
    config: &HeuristicConfig,
    objective_config: &ObjectiveConfig,
) -> Result<SolveResult> {
    let started = Instant::now();
    config.validate()?;
    constraints.search_band(cohort.len())?;
    let model = BalanceModel::new(cohort, constraints.arms(), objective_config);
    let (assignment, evaluations) = run_restarts(config.restarts, |r| {
        tabu_restart(cohort, &model, constraints, config, config.seed ^ r).map(|(o, _)| o)
    })?;
    finish(
        cohort,
        constraints,
        objective_config,
        assignment,
        evaluations,
        started,
    )
}

/// One tabu restart; also returns the best-so-far objective after every iteration.
fn tabu_restart(
    cohort: &Cohort,
    model: &BalanceModel,
    constraints: &AssignmentConstraints,
    config: &HeuristicConfig,
    seed: u64,
) -> Result<(RestartOutcome, Vec<f64>)> {
    let n = cohort.len();
    let tenure = config.tabu.tenure.unwrap_or(n.div_ceil(4));
    let mut current = random_feasible_assignment(cohort, constraints, seed)?;
    let mut stats = model.stats(&current);
    let mut best_score = model.score(&stats);
    let mut best = current.clone();
    let mut tabu_until = vec![0usize; n * n];
    let mut evaluations = 0u64;
    let mut history = Vec::new();
    for iter in 0..config.iterations(n) {
        let mut chosen: Option<(Move, f64)> = None;
        for mv in swap_neighborhood(&current, constraints) {
            let (relocs, k) = mv.relocations(&current);
            let score = model.score_after(&stats, &relocs[..k]);
            evaluations += 1;
            let (a, b) = mv.tabu_key();
            if tabu_until[a * n + b] > iter && score >= best_score - TIE_EPS {
                continue;
            }
            if chosen.is_none_or(|(_, s)| score < s) {
                chosen = Some((mv, score));
            }
        }
        let Some((mv, score)) = chosen else { break };
        let (relocs, k) = mv.relocations(&current);
        model.apply(&mut stats, &relocs[..k]);
        mv.apply(&mut current);
        let (a, b) = mv.tabu_key();
        tabu_until[a * n + b] = iter + 1 + tenure;
        if iter % 64 == 63 {
            stats = model.stats(&current);
        }
        if score < best_score {
            best_score = score;
            best = current.clone();
        }
        history.push(best_score);
    }
    Ok((
        RestartOutcome {
            assignment: best,
            score: best_score,
            evaluations,
        },
        history,
    ))
}

fn random_move<R: Rng>(
    current: &Assignment,
    sizes: &[usize],
    constraints: &AssignmentConstraints,
    band: (usize, usize),
    rng: &mut R,
) -> Option<Move> {
    let n = current.len();
    if constraints.tolerance() > 0 && rng.random::<f64>() < 0.2 {
        let patient = rng.random_range(0..n);
        let from = current.arm(patient);
        let to = (from + rng.random_range(1..constraints.arms())) % constraints.arms();
        return (sizes[from] > band.0 && sizes[to] < band.1)
            .then_some(Move::Relocate { patient, to });
    }
    for _ in 0..64 {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if current.arm(i) != current.arm(j) {
            return Some(Move::Swap(i.min(j), i.max(j)));
        }
    }
    None
}

/// Simulated annealing with Metropolis acceptance and geometric cooling.
///
/// Each restart runs `max_iters` temperature steps of `moves_per_temp`
/// random moves. Without an explicit starting temperature, it is the sample
/// standard deviation of objective changes over 100 random moves from the
/// starting assignment.
pub fn simulated_annealing(
    cohort: &Cohort,
    constraints: &AssignmentConstraints,
    config: &HeuristicConfig,
    objective_config: &ObjectiveConfig,
) -> Result<SolveResult> {
    let started = Instant::now();
    config.validate()?;
    constraints.search_band(cohort.len())?;
    let model = BalanceModel::new(cohort, constraints.arms(), objective_config);
    let (assignment, evaluations) = run_restarts(config.restarts, |r| {
        anneal_restart(cohort, &model, constraints, config, config.seed ^ r).map(|(o, _)| o)
    })?;
    finish(
        cohort,
        constraints,
        objective_config,
        assignment,
        evaluations,
        started,
    )
}

fn anneal_restart(
    cohort: &Cohort,
    model: &BalanceModel,
    constraints: &AssignmentConstraints,
    config: &HeuristicConfig,
    seed: u64,
) -> Result<(RestartOutcome, Vec<f64>)> {
    let n = cohort.len();
    let band = constraints.search_band(n)?;
    let mut current = random_feasible_assignment(cohort, constraints, seed)?;
    let mut rng = seeded(derive_seed(seed, 1));
    let mut stats = model.stats(&current);
    let mut sizes = current.arm_sizes(constraints.arms());
    let mut score = model.score(&stats);
    let mut best_score = score;
    let mut best = current.clone();
    let mut evaluations = 0u64;
    let mut history = Vec::new();

    let mut temp = match config.annealing.initial_temp {
        Some(t) => t,
        None => {
            let deltas: Vec<f64> = (0..100)
                .filter_map(|_| random_move(&current, &sizes, constraints, band, &mut rng))
                .map(|mv| {
                    let (relocs, k) = mv.relocations(&current);
                    model.score_after(&stats, &relocs[..k]) - score
                })
                .collect();
            sample_sd(&deltas).max(1e-12)
        }
    };

    for step in 0..config.iterations(n) {
        for _ in 0..config.annealing.moves_per_temp {
            let Some(mv) = random_move(&current, &sizes, constraints, band, &mut rng) else {
                continue;
            };
            let (relocs, k) = mv.relocations(&current);
            let candidate = model.score_after(&stats, &relocs[..k]);
            evaluations += 1;
            if metropolis_accept(candidate - score, temp, &mut rng) {
                model.apply(&mut stats, &relocs[..k]);
                for r in &relocs[..k] {
                    sizes[r.from] -= 1;
                    sizes[r.to] += 1;
                }
                mv.apply(&mut current);
                score = candidate;
                if score < best_score {
                    best_score = score;
                    best = current.clone();
                }
            }
        }
        if step % 16 == 15 {
            stats = model.stats(&current);
            score = model.score(&stats);
        }
        temp *= config.annealing.cooling_rate;
        history.push(best_score);
    }
    Ok((
        RestartOutcome {
            assignment: best,
            score: best_score,
            evaluations,
        },
        history,
    ))
}

fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::test_support::numeric_cohort;
    use crate::cohort::validate_assignment;
    use crate::exact::{solve_exact, ExactConfig};
    use crate::synthetic::{mirrored, random_cohort};
    use std::collections::HashMap;

    fn two() -> AssignmentConstraints {
        AssignmentConstraints::two_arms()
    }

    #[test]
    fn random_assignment_respects_sizes_and_seed() {
        let cohort = numeric_cohort(&[1.0, 2.0, 3.0, 4.0]);
        for seed in 0..50 {
            let a = random_feasible_assignment(&cohort, &two(), seed).unwrap();
            assert_eq!(a.arm_sizes(2), vec![2, 2]);
            assert_eq!(
                a,
                random_feasible_assignment(&cohort, &two(), seed).unwrap()
            );
        }
    }

    #[test]
    fn random_assignment_is_uniform_over_balanced_splits() {
        let cohort = numeric_cohort(&[1.0, 2.0, 3.0, 4.0]);
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        let trials = 10_000;
        for seed in 0..trials {
            let a = random_feasible_assignment(&cohort, &two(), seed).unwrap();
            *counts.entry(a.into_inner()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let expected = trials as f64 / 6.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 5 df, 0.999 quantile
        assert!(chi2 < 20.52, "chi2 = {chi2}");
        for &c in counts.values() {
            assert!((c as f64 / trials as f64 - 1.0 / 6.0).abs() < 0.02);
        }
    }

    #[test]
    fn odd_cohort_profiles_are_weighted() {
        // n=5, m=2, τ=1: profiles (2,3), (3,2) with 10 splits each, (1,4), (4,1) with 5 each.
        let cohort = numeric_cohort(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let c = AssignmentConstraints::new(2, 1).unwrap();
        let mut small = 0;
        let trials = 6000;
        for seed in 0..trials {
            let sizes = random_feasible_assignment(&cohort, &c, seed)
                .unwrap()
                .arm_sizes(2);
            if sizes.contains(&1) {
                small += 1;
            }
        }
        let frac = small as f64 / trials as f64;
        assert!((frac - 10.0 / 30.0).abs() < 0.03, "{frac}");
    }

    #[test]
    fn neighborhood_sizes() {
        let a = Assignment::new(vec![0, 0, 1, 1]);
        let moves: Vec<_> = swap_neighborhood(&a, &two()).collect();
        assert_eq!(moves.len(), 4);
        assert!(moves.iter().all(|m| matches!(m, Move::Swap(..))));
        let loose = AssignmentConstraints::new(2, 1).unwrap();
        let relocations = swap_neighborhood(&a, &loose)
            .filter(|m| matches!(m, Move::Relocate { .. }))
            .count();
        assert_eq!(relocations, 4);
    }

    #[test]
    fn every_move_stays_feasible() {
        for seed in 0..30 {
            let cohort = random_cohort(9 + (seed as usize % 5), 1, 0, seed);
            for c in [
                two(),
                AssignmentConstraints::new(2, 1).unwrap(),
                AssignmentConstraints::new(3, 1).unwrap(),
            ] {
                let a = random_feasible_assignment(&cohort, &c, seed).unwrap();
                for mv in swap_neighborhood(&a, &c) {
                    let mut b = a.clone();
                    mv.apply(&mut b);
                    assert!(validate_assignment(&cohort, &c, &b).unwrap().is_valid());
                    assert!(b.arm_sizes(c.arms()).iter().all(|&s| s > 0));
                }
            }
        }
    }

    #[test]
    fn metropolis_acceptance_rate() {
        let mut rng = seeded(11);
        let trials = 100_000;
        let accepted = (0..trials)
            .filter(|_| metropolis_accept(0.7, 0.7, &mut rng))
            .count();
        let rate = accepted as f64 / trials as f64;
        assert!((rate - (-1f64).exp()).abs() < 0.02, "{rate}");
        assert!(metropolis_accept(-1.0, 0.0, &mut rng));
        assert!(!metropolis_accept(1.0, 0.0, &mut rng));
    }

    #[test]
    fn tabu_reaches_zero_on_mirrored_cohort() {
        let (cohort, _) = mirrored(&random_cohort(6, 2, 1, 3));
        let r = tabu_search(
            &cohort,
            &two(),
            &HeuristicConfig::with_seed(5),
            &ObjectiveConfig::default(),
        )
        .unwrap();
        assert!(r.objective < 1e-9, "{}", r.objective);
    }

    #[test]
    fn tabu_matches_exact_and_is_deterministic() {
        let cohort = random_cohort(12, 2, 1, 21);
        let cfg = ObjectiveConfig::default();
        let exact = solve_exact(&cohort, &two(), &ExactConfig::default(), &cfg).unwrap();
        let h = HeuristicConfig::with_seed(7);
        let a = tabu_search(&cohort, &two(), &h, &cfg).unwrap();
        let b = tabu_search(&cohort, &two(), &h, &cfg).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert!((a.objective - exact.objective).abs() < 1e-9);
    }

    #[test]
    fn best_so_far_is_monotone() {
        let cohort = random_cohort(14, 2, 1, 2);
        let model = BalanceModel::new(&cohort, 2, &ObjectiveConfig::default());
        let h = HeuristicConfig::with_seed(3);
        let (_, tabu_hist) = tabu_restart(&cohort, &model, &two(), &h, 3).unwrap();
        let (_, sa_hist) = anneal_restart(&cohort, &model, &two(), &h, 3).unwrap();
        for hist in [tabu_hist, sa_hist] {
            assert!(!hist.is_empty());
            assert!(hist.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn zero_iterations_returns_the_start() {
        let cohort = random_cohort(10, 2, 1, 8);
        let h = HeuristicConfig {
            restarts: 1,
            max_iters: Some(0),
            seed: 42,
            ..Default::default()
        };
        let r = simulated_annealing(&cohort, &two(), &h, &ObjectiveConfig::default()).unwrap();
        assert_eq!(
            r.assignment,
            random_feasible_assignment(&cohort, &two(), 42).unwrap()
        );
    }

    #[test]
    fn annealing_is_deterministic_and_feasible() {
        let cohort = random_cohort(30, 3, 2, 5);
        let c = AssignmentConstraints::new(3, 1).unwrap();
        let h = HeuristicConfig::with_seed(9);
        let a = simulated_annealing(&cohort, &c, &h, &ObjectiveConfig::default()).unwrap();
        let b = simulated_annealing(&cohort, &c, &h, &ObjectiveConfig::default()).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert!(validate_assignment(&cohort, &c, &a.assignment)
            .unwrap()
            .is_valid());
    }

    #[test]
    fn config_validation() {
        let cohort = random_cohort(6, 1, 0, 1);
        let bad = HeuristicConfig {
            restarts: 0,
            ..Default::default()
        };
        assert!(tabu_search(&cohort, &two(), &bad, &ObjectiveConfig::default()).is_err());
        let mut bad = HeuristicConfig::default();
        bad.annealing.cooling_rate = 1.0;
        assert!(simulated_annealing(&cohort, &two(), &bad, &ObjectiveConfig::default()).is_err());
    }
}
