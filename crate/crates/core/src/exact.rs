//! Exhaustive search for the global minimizer of the imbalance objective.
//!
//! Patients are assigned in cohort order by depth-first search. Arm labels
//! are canonicalized (an arm may only be opened after all lower-numbered
//! arms are in use), which removes the `m!` relabelings of every assignment
//! and makes the first optimum met the lexicographically smallest one.
//!
//! With pruning enabled a partial assignment is discarded only when a valid
//! lower bound already reaches the incumbent. The bound is the α-weighted
//! total variation of categorical covariates whose remaining patients all
//! share one category: their final distributions depend only on the final arm
//! sizes, so the smallest reachable TV can be computed exactly.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cohort::{Assignment, AssignmentConstraints, Cohort};
use crate::error::{Error, Result};
use crate::metrics::ObjectiveConfig;
use crate::model::{ArmStats, BalanceModel};
use crate::solve::{finish, SolveResult, TIE_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExactConfig {
    /// Largest cohort accepted; `None` uses 22 for two arms and 14 otherwise.
    pub max_patients: Option<usize>,
    pub enable_pruning: bool,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            max_patients: None,
            enable_pruning: true,
        }
    }
}

impl ExactConfig {
    pub fn cap(&self, arms: usize) -> usize {
        self.max_patients.unwrap_or(if arms == 2 { 22 } else { 14 })
    }
}

pub fn solve_exact(
    cohort: &Cohort,
    constraints: &AssignmentConstraints,
    config: &ExactConfig,
    objective_config: &ObjectiveConfig,
) -> Result<SolveResult> {
    let started = Instant::now();
    let n = cohort.len();
    let cap = config.cap(constraints.arms());
    if n > cap {
        return Err(Error::SizeCap {
            what: "patients for the exact solver",
            actual: n,
            limit: cap,
        });
    }
    let band = constraints.search_band(n)?;
    let model = BalanceModel::new(cohort, constraints.arms(), objective_config);
    let mut search = Search::new(&model, band, config.enable_pruning);
    search.descend(0, 0);
    let best = search
        .best
        .ok_or_else(|| Error::Infeasible("no assignment fits the size band".into()))?;
    finish(
        cohort,
        constraints,
        objective_config,
        Assignment::new(best),
        search.evaluations,
        started,
    )
}

struct Search<'a> {
    model: &'a BalanceModel,
    lo: usize,
    hi: usize,
    prune: bool,
    /// For each categorical covariate, the start of the longest single-category
    /// suffix of the cohort and that category.
    uniform_suffix: Vec<(usize, usize)>,
    stack: Vec<ArmStats>,
    current: Vec<usize>,
    best: Option<Vec<usize>>,
    best_score: f64,
    evaluations: u64,
}

impl<'a> Search<'a> {
    fn new(model: &'a BalanceModel, (lo, hi): (usize, usize), prune: bool) -> Self {
        let n = model.n;
        let uniform_suffix = (0..model.num_categorical())
            .map(|c| {
                let last = model.category_of(n - 1, c);
                let mut start = n - 1;
                while start > 0 && model.category_of(start - 1, c) == last {
                    start -= 1;
                }
                (start, last)
            })
            .collect();
        Search {
            model,
            lo,
            hi,
            prune,
            uniform_suffix,
            stack: vec![model.empty_stats(); n + 1],
            current: vec![0; n],
            best: None,
            best_score: f64::INFINITY,
            evaluations: 0,
        }
    }

    fn descend(&mut self, depth: usize, used: usize) {
        let n = self.model.n;
        let arms = self.model.arms;
        if depth == n {
            let score = self.model.score(&self.stack[n]);
            self.evaluations += 1;
            if score < self.best_score - TIE_EPS {
                self.best_score = score;
                self.best = Some(self.current.clone());
            }
            return;
        }
        let remaining_after = n - depth - 1;
        for arm in 0..arms.min(used + 1) {
            let counts = &self.stack[depth].count;
            if counts[arm] + 1 > self.hi {
                continue;
            }
            let deficit: usize = (0..arms)
                .map(|a| {
                    let c = counts[a] + usize::from(a == arm);
                    self.lo.saturating_sub(c)
                })
                .sum();
            if deficit > remaining_after {
                continue;
            }
            let (head, tail) = self.stack.split_at_mut(depth + 1);
            tail[0].clone_from(&head[depth]);
            self.model.add(&mut tail[0], depth, arm);
            self.current[depth] = arm;
            if self.prune && self.lower_bound(depth + 1) >= self.best_score - TIE_EPS {
                continue;
            }
            self.descend(depth + 1, used.max(arm + 1));
        }
    }

    /// Lower bound on the objective of any completion of the first `depth`
    /// patients' assignment.
    fn lower_bound(&self, depth: usize) -> f64 {
        let alpha = self.model.alpha();
        if alpha == 0.0 {
            return 0.0;
        }
        let stats = &self.stack[depth];
        let remaining = self.model.n - depth;
        let arms = self.model.arms;
        let mut bound = 0.0f64;
        for p in 0..arms {
            for q in p + 1..arms {
                let mut pair = 0.0;
                for (c, &(start, category)) in self.uniform_suffix.iter().enumerate() {
                    if depth < start {
                        continue;
                    }
                    pair += self.min_tv(stats, c, category, (p, q), remaining);
                }
                bound = bound.max(alpha * pair);
            }
        }
        bound
    }

    fn min_tv(
        &self,
        stats: &ArmStats,
        c: usize,
        category: usize,
        (p, q): (usize, usize),
        remaining: usize,
    ) -> f64 {
        let lp = self.model.levels_of(stats, p, c);
        let lq = self.model.levels_of(stats, q, c);
        let (np, nq) = (stats.count[p], stats.count[q]);
        let range = |cur: usize| cur.max(self.lo)..=(cur + remaining).min(self.hi);
        let mut best = f64::INFINITY;
        for sp in range(np) {
            for sq in range(nq) {
                if (sp - np) + (sq - nq) > remaining {
                    continue;
                }
                let mut tv = 0.0;
                for l in 0..self.model.level_count(c) {
                    let extra = |s: usize, cur: usize| if l == category { s - cur } else { 0 };
                    let fp = (lp[l] as usize + extra(sp, np)) as f64 / sp as f64;
                    let fq = (lq[l] as usize + extra(sq, nq)) as f64 / sq as f64;
                    tv += (fp - fq).abs();
                }
                best = best.min(0.5 * tv);
            }
        }
        if best.is_finite() {
            best
        } else {
            0.0
        }
    }
}
