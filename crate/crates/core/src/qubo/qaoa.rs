//! Statevector simulation of QAOA on the spin form of a [`QuboProblem`].
//!
//! Basis state `x` has `b_i = (x >> i) & 1`. The cost layer applies
//! `exp(−iγ·C(x))` with `C` the energy shifted to zero mean and scaled into
//! `[−1, 1]`, so one angle grid suits every instance; expectations are
//! reported in the original energy units.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{bits_of, QuboProblem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QaoaConfig {
    pub layers: usize,
    pub max_qubits: usize,
    /// Points per angle in the depth-1 grid over `[0, π)²`.
    pub grid_resolution: usize,
    /// Maximum coordinate-search sweeps per depth.
    pub sweeps: usize,
    /// The coordinate search stops once its step falls below this.
    pub tolerance: f64,
    /// Kept for interface symmetry with the other solvers; the search itself
    /// is deterministic.
    pub seed: u64,
}

impl Default for QaoaConfig {
    fn default() -> Self {
        QaoaConfig {
            layers: 2,
            max_qubits: 16,
            grid_resolution: 24,
            sweeps: 200,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

impl QaoaConfig {
    fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Config("QAOA needs at least one layer".into()));
        }
        if self.grid_resolution == 0 {
            return Err(Error::Config("grid resolution must be positive".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QaoaOutcome {
    pub bits: Vec<bool>,
    pub energy: f64,
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
    /// `⟨H⟩` at the optimized angles.
    pub expectation: f64,
    /// Measurement probability of the returned basis state.
    pub probability: f64,
    /// Circuit simulations run during the angle search.
    pub evaluations: u64,
}

pub struct QaoaSimulator {
    n: usize,
    energies: Vec<f64>,
    cost: Vec<f64>,
}

impl QaoaSimulator {
    pub fn new(qubo: &QuboProblem) -> Self {
        let energies = qubo.to_ising().spectrum();
        let mean = energies.iter().sum::<f64>() / energies.len() as f64;
        let spread = energies
            .iter()
            .map(|e| (e - mean).abs())
            .fold(0.0, f64::max);
        let cost = energies
            .iter()
            .map(|e| {
                if spread > 0.0 {
                    (e - mean) / spread
                } else {
                    0.0
                }
            })
            .collect();
        QaoaSimulator {
            n: qubo.len(),
            energies,
            cost,
        }
    }

    /// Energy of every basis state.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn uniform_state(&self) -> Vec<Complex64> {
        let dim = self.energies.len();
        vec![Complex64::new((dim as f64).sqrt().recip(), 0.0); dim]
    }

    /// One cost layer followed by one mixer layer.
    pub fn apply_layer(&self, state: &mut [Complex64], gamma: f64, beta: f64) {
        for (amp, c) in state.iter_mut().zip(&self.cost) {
            *amp *= Complex64::from_polar(1.0, -gamma * c);
        }
        let (cos, sin) = (beta.cos(), beta.sin());
        let off = Complex64::new(0.0, -sin);
        for q in 0..self.n {
            let bit = 1usize << q;
            for x in 0..state.len() {
                if x & bit == 0 {
                    let (a, b) = (state[x], state[x | bit]);
                    state[x] = a * cos + b * off;
                    state[x | bit] = b * cos + a * off;
                }
            }
        }
    }

    pub fn state(&self, gammas: &[f64], betas: &[f64]) -> Vec<Complex64> {
        assert_eq!(gammas.len(), betas.len(), "one β per γ");
        let mut state = self.uniform_state();
        for (&g, &b) in gammas.iter().zip(betas) {
            self.apply_layer(&mut state, g, b);
        }
        state
    }

    pub fn expectation_of(&self, state: &[Complex64]) -> f64 {
        state
            .iter()
            .zip(&self.energies)
            .map(|(a, e)| a.norm_sqr() * e)
            .sum()
    }

    pub fn expectation(&self, gammas: &[f64], betas: &[f64]) -> f64 {
        self.expectation_of(&self.state(gammas, betas))
    }
}

/// Optimizes the angles depth by depth and reads out a basis state.
///
/// Depth 1 starts from the best point of a `grid_resolution²` grid; each
/// deeper level starts from a linear interpolation of the previous angles.
/// Every level is refined by a compass search that halves its step when no
/// coordinate move improves `⟨H⟩`. The answer is the most probable state
/// among the minimum-energy ones (lowest index on ties).
pub fn qaoa_optimize(qubo: &QuboProblem, config: &QaoaConfig) -> Result<QaoaOutcome> {
    config.validate()?;
    let n = qubo.len();
    if n > config.max_qubits {
        return Err(Error::SizeCap {
            what: "qubits for statevector QAOA",
            actual: n,
            limit: config.max_qubits,
        });
    }
    if n == 0 {
        return Err(Error::Config("cannot run QAOA on zero qubits".into()));
    }
    let sim = QaoaSimulator::new(qubo);
    let mut evaluations = 0u64;
    let mut eval = |angles: &[f64]| {
        evaluations += 1;
        let (g, b) = angles.split_at(angles.len() / 2);
        sim.expectation(g, b)
    };

    let res = config.grid_resolution;
    let step0 = PI / res as f64;
    let mut angles = vec![0.0, 0.0];
    let mut value = f64::INFINITY;
    for a in 0..res {
        for b in 0..res {
            let candidate = [a as f64 * step0, b as f64 * step0];
            let v = eval(&candidate);
            if v < value {
                value = v;
                angles = candidate.to_vec();
            }
        }
    }
    value = compass_search(&mut angles, value, step0, config, &mut eval);
    for p in 1..config.layers {
        angles = interpolate(&angles, p);
        let start = eval(&angles);
        value = compass_search(&mut angles, start, step0, config, &mut eval);
    }

    let (gammas, betas) = angles.split_at(angles.len() / 2);
    let state = sim.state(gammas, betas);
    let energies = sim.energies();
    let ground = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let tie = 1e-9 * ground.abs().max(1.0);
    let mut pick = 0;
    let mut pick_prob = -1.0;
    for (x, e) in energies.iter().enumerate() {
        let p = state[x].norm_sqr();
        if *e <= ground + tie && p > pick_prob {
            pick = x;
            pick_prob = p;
        }
    }
    let bits = bits_of(pick, n);
    Ok(QaoaOutcome {
        energy: qubo.energy(&bits),
        bits,
        gammas: gammas.to_vec(),
        betas: betas.to_vec(),
        expectation: value,
        probability: pick_prob,
        evaluations,
    })
}

fn compass_search(
    angles: &mut [f64],
    mut value: f64,
    mut step: f64,
    config: &QaoaConfig,
    eval: &mut impl FnMut(&[f64]) -> f64,
) -> f64 {
    for _ in 0..config.sweeps {
        if step < config.tolerance {
            break;
        }
        let mut improved = false;
        for k in 0..angles.len() {
            for dir in [1.0, -1.0] {
                let old = angles[k];
                angles[k] = old + dir * step;
                let v = eval(angles);
                if v < value - 1e-15 * value.abs().max(1.0) {
                    value = v;
                    improved = true;
                    break;
                }
                angles[k] = old;
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    value
}

/// Depth `p` angles `[γ…, β…]` to depth `p + 1` by linear interpolation.
fn interpolate(angles: &[f64], p: usize) -> Vec<f64> {
    let (g, b) = angles.split_at(p);
    let grow = |x: &[f64]| -> Vec<f64> {
        (0..=p)
            .map(|i| {
                let prev = if i > 0 { x[i - 1] } else { 0.0 };
                let here = if i < p { x[i] } else { 0.0 };
                (i as f64 * prev + (p - i) as f64 * here) / p as f64
            })
            .collect()
    };
    let mut out = grow(g);
    out.extend(grow(b));
    out
}
