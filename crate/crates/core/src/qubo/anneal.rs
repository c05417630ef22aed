use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::QuboProblem;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::solve::TIE_EPS;

/// Geometric cooling over `sweeps` full passes of single-bit flips.
///
/// Unset temperatures are derived from the problem: the start accepts the
/// largest possible uphill flip with probability 1/2, the end accepts the
/// smallest nonzero coefficient with probability 1/100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnnealSchedule {
    pub sweeps: usize,
    pub initial_temp: Option<f64>,
    pub final_temp: Option<f64>,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            sweeps: 1000,
            initial_temp: None,
            final_temp: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealOutcome {
    pub bits: Vec<bool>,
    pub energy: f64,
    /// Proposed bit flips over all restarts.
    pub evaluations: u64,
}

/// Dense symmetric view: `couple[i*n+j]` is the pair coefficient for `i ≠ j`.
struct Dense {
    n: usize,
    linear: Vec<f64>,
    couple: Vec<f64>,
}

impl Dense {
    fn new(q: &QuboProblem) -> Self {
        let n = q.len();
        let mut d = Dense {
            n,
            linear: vec![0.0; n],
            couple: vec![0.0; n * n],
        };
        for (i, j, v) in q.terms() {
            if i == j {
                d.linear[i] = v;
            } else {
                d.couple[i * n + j] = v;
                d.couple[j * n + i] = v;
            }
        }
        d
    }

    fn temperatures(&self, schedule: &AnnealSchedule) -> (f64, f64) {
        let mut max_flip = 0.0f64;
        let mut min_coef = f64::INFINITY;
        for i in 0..self.n {
            let row = &self.couple[i * self.n..(i + 1) * self.n];
            let reach = self.linear[i].abs() + row.iter().map(|v| v.abs()).sum::<f64>();
            max_flip = max_flip.max(reach);
            for &v in row.iter().chain(std::iter::once(&self.linear[i])) {
                if v != 0.0 {
                    min_coef = min_coef.min(v.abs());
                }
            }
        }
        if max_flip == 0.0 {
            return (1.0, 1.0);
        }
        let hot = schedule.initial_temp.unwrap_or(max_flip / 2f64.ln());
        let cold = schedule
            .final_temp
            .unwrap_or(min_coef / 100f64.ln())
            .min(hot);
        (hot, cold)
    }
}

/// Single-bit-flip Metropolis annealing from uniformly random starts.
/// Restart `r` uses the seed derived from `(seed, r)`; the lowest energy wins,
/// ties going to the lower restart.
pub fn anneal_qubo(
    qubo: &QuboProblem,
    schedule: &AnnealSchedule,
    restarts: usize,
    seed: u64,
) -> Result<AnnealOutcome> {
    if qubo.is_empty() {
        return Err(Error::Config(
            "cannot anneal a QUBO with no variables".into(),
        ));
    }
    if restarts == 0 {
        return Err(Error::Config("restarts must be at least 1".into()));
    }
    for (name, t) in [
        ("initial", schedule.initial_temp),
        ("final", schedule.final_temp),
    ] {
        if t.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::Config(format!(
                "{name} temperature must be positive"
            )));
        }
    }
    let dense = Dense::new(qubo);
    let temps = dense.temperatures(schedule);
    let runs: Vec<(Vec<bool>, f64)> = (0..restarts as u64)
        .into_par_iter()
        .map(|r| {
            anneal_once(
                &dense,
                qubo.offset(),
                schedule.sweeps,
                temps,
                derive_seed(seed, r),
            )
        })
        .collect();
    let mut best: Option<(Vec<bool>, f64)> = None;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.1 < b.1 - TIE_EPS) {
            best = Some(run);
        }
    }
    let (bits, _) = best.expect("at least one restart");
    Ok(AnnealOutcome {
        energy: qubo.energy(&bits),
        bits,
        evaluations: (restarts * schedule.sweeps * qubo.len()) as u64,
    })
}

fn anneal_once(
    d: &Dense,
    offset: f64,
    sweeps: usize,
    (hot, cold): (f64, f64),
    seed: u64,
) -> (Vec<bool>, f64) {
    let n = d.n;
    let mut rng = seeded(seed);
    let mut bits: Vec<bool> = (0..n).map(|_| rng.random()).collect();
    // field[i] = linear[i] + Σ_{j≠i} couple(i,j)·b_j, the energy change of setting b_i = 1
    let mut field = d.linear.clone();
    let mut energy = offset;
    for i in 0..n {
        if bits[i] {
            energy += d.linear[i];
            for j in 0..n {
                field[j] += d.couple[j * n + i];
                if j > i && bits[j] {
                    energy += d.couple[i * n + j];
                }
            }
        }
    }
    let mut best = (bits.clone(), energy);
    let ratio = if sweeps > 1 {
        (cold / hot).powf(1.0 / (sweeps - 1) as f64)
    } else {
        1.0
    };
    let mut temp = hot;
    for _ in 0..sweeps {
        for i in 0..n {
            let delta = if bits[i] { -field[i] } else { field[i] };
            if delta <= 0.0 || rng.random::<f64>() < (-delta / temp).exp() {
                let sign = if bits[i] { -1.0 } else { 1.0 };
                bits[i] = !bits[i];
                energy += delta;
                let row = &d.couple[i * n..(i + 1) * n];
                for (f, c) in field.iter_mut().zip(row) {
                    *f += sign * c;
                }
                if energy < best.1 - TIE_EPS {
                    best = (bits.clone(), energy);
                }
            }
        }
        temp *= ratio;
    }
    best
}
