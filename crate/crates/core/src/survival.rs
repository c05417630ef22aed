//! Two-sample log-rank test under right censoring.
//!
//! At tied times events are processed before censorings, so a record
//! censored at `t` is still at risk for events at `t`.

use serde::{Deserialize, Serialize};

use crate::cohort::{Assignment, Cohort};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub time: f64,
    pub event: bool,
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurvivalSample {
    pub records: Vec<SurvivalRecord>,
}

impl SurvivalSample {
    pub fn new(records: Vec<SurvivalRecord>) -> Result<Self> {
        for (k, r) in records.iter().enumerate() {
            if !(r.time > 0.0 && r.time.is_finite()) {
                return Err(Error::Data(format!(
                    "record {k}: time must be positive, got {}",
                    r.time
                )));
            }
            if r.group > 1 {
                return Err(Error::Data(format!(
                    "record {k}: group must be 0 or 1, got {}",
                    r.group
                )));
            }
        }
        Ok(SurvivalSample { records })
    }

    /// Survival outcomes of a two-arm assignment, grouped by arm.
    pub fn from_assignment(cohort: &Cohort, assignment: &Assignment) -> Result<Self> {
        if assignment.len() != cohort.len() {
            return Err(Error::LengthMismatch {
                expected: cohort.len(),
                actual: assignment.len(),
            });
        }
        let records = cohort
            .patients()
            .iter()
            .zip(assignment.arm_of())
            .map(|(p, &group)| {
                let s = p.survival.ok_or_else(|| {
                    Error::Data(format!("patient `{}` has no survival data", p.id))
                })?;
                Ok(SurvivalRecord {
                    time: s.time,
                    event: s.event,
                    group,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(records)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogRankResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Observed minus expected events in group 0.
    pub observed_minus_expected: f64,
    pub variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl LogRankResult {
    fn degenerate(observed_minus_expected: f64, variance: f64, why: &str) -> Self {
        log::warn!("log-rank test is degenerate: {why}");
        LogRankResult {
            statistic: 0.0,
            p_value: 1.0,
            observed_minus_expected,
            variance,
            warning: Some(why.to_string()),
        }
    }
}

/// `(time, O − E, variance)` contributed by each distinct event time.
fn contributions(records: &[SurvivalRecord], mut at_risk: [usize; 2]) -> Vec<(f64, f64, f64)> {
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut terms = Vec::new();
    let mut k = 0;
    while k < sorted.len() {
        let t = sorted[k].time;
        let end = k + sorted[k..].partition_point(|r| r.time == t);
        let mut deaths = [0usize; 2];
        let mut leaving = [0usize; 2];
        for r in &sorted[k..end] {
            leaving[r.group] += 1;
            if r.event {
                deaths[r.group] += 1;
            }
        }
        let d = deaths[0] + deaths[1];
        if d > 0 {
            let n = (at_risk[0] + at_risk[1]) as f64;
            let share = at_risk[0] as f64 / n;
            let d = d as f64;
            let var = if n > 1.0 {
                d * share * (1.0 - share) * (n - d) / (n - 1.0)
            } else {
                0.0
            };
            terms.push((t, deaths[0] as f64 - d * share, var));
        }
        at_risk[0] -= leaving[0];
        at_risk[1] -= leaving[1];
        k = end;
    }
    terms
}

pub fn log_rank_test(sample: &SurvivalSample) -> Result<LogRankResult> {
    let mut at_risk = [0usize; 2];
    for r in &sample.records {
        at_risk[r.group] += 1;
    }
    if at_risk.contains(&0) {
        return Err(Error::Data(
            "log-rank test needs records in both groups".into(),
        ));
    }
    let terms = contributions(&sample.records, at_risk);
    if terms.is_empty() {
        return Ok(LogRankResult::degenerate(
            0.0,
            0.0,
            "no events in the sample",
        ));
    }
    let o_minus_e: f64 = terms.iter().map(|t| t.1).sum();
    let variance: f64 = terms.iter().map(|t| t.2).sum();
    if variance <= 0.0 {
        return Ok(LogRankResult::degenerate(o_minus_e, 0.0, "zero variance"));
    }
    let statistic = o_minus_e * o_minus_e / variance;
    Ok(LogRankResult {
        statistic,
        p_value: chi_square_1df_pvalue(statistic)?,
        observed_minus_expected: o_minus_e,
        variance,
        warning: None,
    })
}

/// Upper tail of the chi-square distribution with one degree of freedom.
pub fn chi_square_1df_pvalue(statistic: f64) -> Result<f64> {
    if statistic.is_nan() || statistic < 0.0 {
        return Err(Error::Data(format!(
            "chi-square statistic must be nonnegative, got {statistic}"
        )));
    }
    Ok(libm::erfc((statistic / 2.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn rec(time: f64, event: bool, group: usize) -> SurvivalRecord {
        SurvivalRecord { time, event, group }
    }

    /// Direct tabulation: for every distinct event time, count the risk set
    /// and deaths by scanning all records.
    fn tabulated(records: &[SurvivalRecord]) -> (f64, f64) {
        let mut times: Vec<f64> = records.iter().filter(|r| r.event).map(|r| r.time).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let (mut oe, mut var) = (0.0, 0.0);
        for t in times {
            let n = records.iter().filter(|r| r.time >= t).count() as f64;
            let n0 = records
                .iter()
                .filter(|r| r.time >= t && r.group == 0)
                .count() as f64;
            let d = records.iter().filter(|r| r.time == t && r.event).count() as f64;
            let d0 = records
                .iter()
                .filter(|r| r.time == t && r.event && r.group == 0)
                .count() as f64;
            oe += d0 - d * n0 / n;
            if n > 1.0 {
                var += d * (n0 / n) * (1.0 - n0 / n) * (n - d) / (n - 1.0);
            }
        }
        (oe, var)
    }

    fn random_sample(seed: u64) -> SurvivalSample {
        let mut rng = seeded(seed);
        let n = rng.random_range(4..=40);
        let mut records: Vec<_> = (0..n)
            .map(|i| {
                // coarse times so ties occur
                let time = f64::from(rng.random_range(1..=12u32)) * 0.5;
                rec(time, rng.random_bool(0.7), i % 2)
            })
            .collect();
        records[0].event = true;
        SurvivalSample::new(records).unwrap()
    }

    #[test]
    fn worked_example() {
        let s = SurvivalSample::new(vec![
            rec(1.0, true, 0),
            rec(2.0, true, 0),
            rec(3.0, true, 1),
            rec(4.0, true, 1),
        ])
        .unwrap();
        let r = log_rank_test(&s).unwrap();
        assert!((r.observed_minus_expected - 7.0 / 6.0).abs() < 1e-12);
        assert!((r.variance - 17.0 / 36.0).abs() < 1e-12);
        assert!((r.statistic - 49.0 / 17.0).abs() < 1e-12);
        assert!((r.statistic - 2.8824).abs() < 1e-4);
        assert!((r.p_value - 0.0896).abs() < 1e-4);
    }

    #[test]
    fn matches_tabulation_oracle() {
        for seed in 0..100u64 {
            let s = random_sample(seed);
            let r = log_rank_test(&s).unwrap();
            let (oe, var) = tabulated(&s.records);
            assert!((r.observed_minus_expected - oe).abs() < 1e-9, "seed {seed}");
            assert!((r.variance - var).abs() < 1e-9, "seed {seed}");
            if var > 0.0 {
                assert!((r.statistic - oe * oe / var).abs() < 1e-9);
                assert!((r.p_value - chi_square_1df_pvalue(r.statistic).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exchangeable_groups_give_zero() {
        let times = [(1.0, true), (2.5, false), (3.0, true), (4.0, true)];
        let records = times
            .iter()
            .flat_map(|&(t, e)| [rec(t, e, 0), rec(t, e, 1)])
            .collect();
        let r = log_rank_test(&SurvivalSample::new(records).unwrap()).unwrap();
        assert_eq!(r.observed_minus_expected, 0.0);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn degenerate_cases() {
        let none = SurvivalSample::new(vec![rec(1.0, false, 0), rec(2.0, false, 1)]).unwrap();
        let r = log_rank_test(&none).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        assert!(r.warning.is_some());
        // the only event happens when a single patient is at risk
        let lone = SurvivalSample::new(vec![rec(1.0, false, 0), rec(2.0, true, 1)]).unwrap();
        let r = log_rank_test(&lone).unwrap();
        assert_eq!((r.statistic, r.p_value, r.variance), (0.0, 1.0, 0.0));
        assert!(r.warning.is_some());
        let one_group = SurvivalSample::new(vec![rec(1.0, true, 0)]).unwrap();
        assert!(log_rank_test(&one_group).is_err());
    }

    #[test]
    fn events_precede_censoring_at_ties() {
        // the group-1 record censored at t=1 still counts in the risk set at t=1
        let s = SurvivalSample::new(vec![
            rec(1.0, true, 0),
            rec(1.0, false, 1),
            rec(2.0, true, 1),
        ])
        .unwrap();
        let r = log_rank_test(&s).unwrap();
        assert!((r.observed_minus_expected - (1.0 - 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn censoring_does_not_touch_earlier_event_times() {
        for seed in 0..30u64 {
            let s = random_sample(seed);
            let risk = |recs: &[SurvivalRecord]| {
                [0, 1].map(|g| recs.iter().filter(|r| r.group == g).count())
            };
            for k in (0..s.records.len()).filter(|&k| s.records[k].event) {
                let mut censored = s.records.clone();
                censored[k].event = false;
                let cutoff = s.records[k].time;
                let before = |recs: &[SurvivalRecord]| -> Vec<(f64, f64, f64)> {
                    contributions(recs, risk(recs))
                        .into_iter()
                        .filter(|t| t.0 < cutoff)
                        .collect()
                };
                assert_eq!(before(&s.records), before(&censored));
            }
        }
    }

    #[test]
    fn chi_square_table_values() {
        assert_eq!(chi_square_1df_pvalue(0.0).unwrap(), 1.0);
        assert!((chi_square_1df_pvalue(3.841459).unwrap() - 0.05).abs() < 1e-6);
        assert!((chi_square_1df_pvalue(6.634897).unwrap() - 0.01).abs() < 1e-6);
        assert!(chi_square_1df_pvalue(-1.0).is_err());
    }

    proptest! {
        #[test]
        fn group_swap_flips_sign_only(seed in 0u64..500) {
            let s = random_sample(seed);
            let swapped = SurvivalSample::new(
                s.records.iter().map(|r| rec(r.time, r.event, 1 - r.group)).collect(),
            ).unwrap();
            let (a, b) = (log_rank_test(&s).unwrap(), log_rank_test(&swapped).unwrap());
            prop_assert!((a.statistic - b.statistic).abs() < 1e-9);
            prop_assert!((a.p_value - b.p_value).abs() < 1e-9);
            prop_assert!((a.observed_minus_expected + b.observed_minus_expected).abs() < 1e-9);
        }

        #[test]
        fn p_value_strictly_decreasing(a in 1e-6f64..50.0, b in 1e-6f64..50.0) {
            prop_assume!((a - b).abs() > 1e-6);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(chi_square_1df_pvalue(lo).unwrap() > chi_square_1df_pvalue(hi).unwrap());
        }
    }
}
