//! Incremental form of the imbalance objective used inside the solvers.
//!
//! Numerical covariates are centred on the cohort mean and divided by the
//! cohort scale once, so per-arm statistics reduce to a count, a sum and a
//! sum of squares of standardized values. Categorical covariates become
//! per-arm level counts. A candidate move is scored without mutating the
//! statistics, so long searches do not accumulate add/subtract drift.

use crate::cohort::{Assignment, Cohort};
use crate::metrics::{compute_scales, CovariateScale, ObjectiveConfig};

#[derive(Debug, Clone)]
pub(crate) struct BalanceModel {
    pub arms: usize,
    pub n: usize,
    num: usize,
    /// Standardized retained numerical values, row-major `n × num`.
    z: Vec<f64>,
    ncat: usize,
    /// Flattened level index per patient and categorical covariate, `n × ncat`.
    codes: Vec<usize>,
    level_ranges: Vec<(usize, usize)>,
    total_levels: usize,
    alpha: f64,
    variance_weight: f64,
}

/// Per-arm sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ArmStats {
    pub count: Vec<usize>,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    levels: Vec<u32>,
}

/// A patient changing arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Relocation {
    pub patient: usize,
    pub from: usize,
    pub to: usize,
}

impl BalanceModel {
    pub fn new(cohort: &Cohort, arms: usize, config: &ObjectiveConfig) -> Self {
        Self::with_scales(cohort, arms, config, &compute_scales(cohort))
    }

    pub fn with_scales(
        cohort: &Cohort,
        arms: usize,
        config: &ObjectiveConfig,
        scales: &CovariateScale,
    ) -> Self {
        let n = cohort.len();
        let retained: Vec<(usize, f64)> = scales.retained().collect();
        let num = retained.len();
        let means: Vec<f64> = retained
            .iter()
            .map(|&(j, _)| {
                let mut col: Vec<f64> = cohort.numerical_column(j).collect();
                crate::metrics::sorted_sum(&mut col) / n as f64
            })
            .collect();
        let mut z = Vec::with_capacity(n * num);
        for p in cohort.patients() {
            for (k, &(j, scale)) in retained.iter().enumerate() {
                z.push((p.numerical[j] - means[k]) / scale);
            }
        }
        let schema = cohort.schema();
        let ncat = schema.num_categorical();
        let mut level_ranges = Vec::with_capacity(ncat);
        let mut offset = 0;
        for c in 0..ncat {
            let len = schema.categorical_labels(c).len();
            level_ranges.push((offset, offset + len));
            offset += len;
        }
        let mut codes = Vec::with_capacity(n * ncat);
        for p in cohort.patients() {
            for (c, &k) in p.categorical.iter().enumerate() {
                codes.push(level_ranges[c].0 + k);
            }
        }
        BalanceModel {
            arms,
            n,
            num,
            z,
            ncat,
            codes,
            level_ranges,
            total_levels: offset,
            alpha: config.alpha,
            variance_weight: config.variance_weight,
        }
    }

    fn z_row(&self, i: usize) -> &[f64] {
        &self.z[i * self.num..(i + 1) * self.num]
    }

    fn code_row(&self, i: usize) -> &[usize] {
        &self.codes[i * self.ncat..(i + 1) * self.ncat]
    }

    pub fn num_categorical(&self) -> usize {
        self.ncat
    }

    pub fn category_of(&self, i: usize, c: usize) -> usize {
        self.codes[i * self.ncat + c] - self.level_ranges[c].0
    }

    pub fn level_count(&self, c: usize) -> usize {
        self.level_ranges[c].1 - self.level_ranges[c].0
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn empty_stats(&self) -> ArmStats {
        ArmStats {
            count: vec![0; self.arms],
            sum: vec![0.0; self.arms * self.num],
            sumsq: vec![0.0; self.arms * self.num],
            levels: vec![0; self.arms * self.total_levels],
        }
    }

    pub fn stats(&self, assignment: &Assignment) -> ArmStats {
        let mut s = self.empty_stats();
        for (i, &a) in assignment.arm_of().iter().enumerate() {
            self.add(&mut s, i, a);
        }
        s
    }

    pub fn add(&self, s: &mut ArmStats, i: usize, arm: usize) {
        s.count[arm] += 1;
        let base = arm * self.num;
        for (k, &v) in self.z_row(i).iter().enumerate() {
            s.sum[base + k] += v;
            s.sumsq[base + k] += v * v;
        }
        for &l in self.code_row(i) {
            s.levels[arm * self.total_levels + l] += 1;
        }
    }

    pub fn remove(&self, s: &mut ArmStats, i: usize, arm: usize) {
        s.count[arm] -= 1;
        let base = arm * self.num;
        for (k, &v) in self.z_row(i).iter().enumerate() {
            s.sum[base + k] -= v;
            s.sumsq[base + k] -= v * v;
        }
        for &l in self.code_row(i) {
            s.levels[arm * self.total_levels + l] -= 1;
        }
    }

    pub fn apply(&self, s: &mut ArmStats, moves: &[Relocation]) {
        for mv in moves {
            self.remove(s, mv.patient, mv.from);
            self.add(s, mv.patient, mv.to);
        }
    }

    /// Objective of the statistics as they stand; `+∞` when an arm is empty.
    pub fn score(&self, s: &ArmStats) -> f64 {
        self.score_after(s, &[])
    }

    /// Objective after applying `moves`, leaving `s` untouched.
    pub fn score_after(&self, s: &ArmStats, moves: &[Relocation]) -> f64 {
        let count = |arm: usize| -> f64 {
            let mut c = s.count[arm] as f64;
            for mv in moves {
                if mv.from == arm {
                    c -= 1.0;
                }
                if mv.to == arm {
                    c += 1.0;
                }
            }
            c
        };
        if (0..self.arms).any(|a| count(a) < 1.0) {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for p in 0..self.arms {
            for q in p + 1..self.arms {
                let total = self.pair_total(s, moves, (p, q), (count(p), count(q)));
                worst = worst.max(total);
            }
        }
        worst
    }

    fn moment(&self, s: &ArmStats, moves: &[Relocation], arm: usize, k: usize) -> (f64, f64) {
        let mut sum = s.sum[arm * self.num + k];
        let mut sumsq = s.sumsq[arm * self.num + k];
        for mv in moves {
            let v = self.z[mv.patient * self.num + k];
            if mv.from == arm {
                sum -= v;
                sumsq -= v * v;
            }
            if mv.to == arm {
                sum += v;
                sumsq += v * v;
            }
        }
        (sum, sumsq)
    }

    /// Level count of flattened level `l` (belonging to covariate `c`) in `arm`.
    fn level(&self, s: &ArmStats, moves: &[Relocation], arm: usize, c: usize, l: usize) -> f64 {
        let mut n = s.levels[arm * self.total_levels + l] as f64;
        for mv in moves {
            if self.codes[mv.patient * self.ncat + c] == l {
                if mv.from == arm {
                    n -= 1.0;
                }
                if mv.to == arm {
                    n += 1.0;
                }
            }
        }
        n
    }

    fn pair_total(
        &self,
        s: &ArmStats,
        moves: &[Relocation],
        (p, q): (usize, usize),
        (np, nq): (f64, f64),
    ) -> f64 {
        let mut d_num = 0.0;
        for k in 0..self.num {
            let (sp, ssp) = self.moment(s, moves, p, k);
            let (sq, ssq) = self.moment(s, moves, q, k);
            let (mp, mq) = (sp / np, sq / nq);
            let sdp = sd_from_moments(np, sp, ssp);
            let sdq = sd_from_moments(nq, sq, ssq);
            d_num += (mp - mq).abs() + self.variance_weight * (sdp - sdq).abs();
        }
        let mut d_cat = 0.0;
        if self.alpha != 0.0 {
            for (c, &(lo, hi)) in self.level_ranges.iter().enumerate() {
                let mut tv = 0.0;
                for l in lo..hi {
                    let fp = self.level(s, moves, p, c, l) / np;
                    let fq = self.level(s, moves, q, c, l) / nq;
                    tv += (fp - fq).abs();
                }
                d_cat += 0.5 * tv;
            }
        }
        d_num + self.alpha * d_cat
    }

    /// Per-arm level counts of categorical covariate `c`.
    pub fn levels_of(&self, s: &ArmStats, arm: usize, c: usize) -> Vec<u32> {
        let (lo, hi) = self.level_ranges[c];
        s.levels[arm * self.total_levels + lo..arm * self.total_levels + hi].to_vec()
    }
}

fn sd_from_moments(k: f64, sum: f64, sumsq: f64) -> f64 {
    if k < 2.0 {
        return 0.0;
    }
    ((sumsq - sum * sum / k) / (k - 1.0)).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::objective;
    use crate::synthetic::random_cohort;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_reference_objective() {
        for seed in 0..40 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(6..20);
            let arms = rng.random_range(2..4);
            let cohort = random_cohort(n, 2, 2, seed);
            let cfg = ObjectiveConfig::new(rng.random_range(0.0..2.0), rng.random_range(0.0..2.0))
                .unwrap();
            let mut arm_of: Vec<usize> = (0..n).map(|i| i % arms).collect();
            for i in (1..n).rev() {
                arm_of.swap(i, rng.random_range(0..=i));
            }
            let asg = Assignment::new(arm_of);
            let scales = compute_scales(&cohort);
            let model = BalanceModel::with_scales(&cohort, arms, &cfg, &scales);
            let fast = model.score(&model.stats(&asg));
            let slow = objective(&cohort, &asg, arms, &cfg, &scales)
                .unwrap()
                .objective;
            assert!((fast - slow).abs() < 1e-10, "seed {seed}: {fast} vs {slow}");
        }
    }

    #[test]
    fn score_after_matches_applied_moves() {
        let cohort = random_cohort(12, 3, 2, 9);
        let cfg = ObjectiveConfig::default();
        let model = BalanceModel::new(&cohort, 2, &cfg);
        let mut asg = Assignment::new((0..12).map(|i| i % 2).collect());
        let stats = model.stats(&asg);
        let moves = [
            Relocation {
                patient: 0,
                from: 0,
                to: 1,
            },
            Relocation {
                patient: 3,
                from: 1,
                to: 0,
            },
        ];
        let predicted = model.score_after(&stats, &moves);
        asg.swap(0, 3);
        let actual = model.score(&model.stats(&asg));
        assert!((predicted - actual).abs() < 1e-12);
    }

    #[test]
    fn empty_arm_scores_infinite() {
        let cohort = random_cohort(4, 1, 0, 1);
        let model = BalanceModel::new(&cohort, 2, &ObjectiveConfig::default());
        let s = model.stats(&Assignment::new(vec![0, 0, 0, 0]));
        assert_eq!(model.score(&s), f64::INFINITY);
    }
}
