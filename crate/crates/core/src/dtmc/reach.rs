use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::Dtmc;
use crate::error::{LarError, Result};

/// Above this many undetermined states the solver switches from Gaussian
/// elimination to Gauss-Seidel value iteration.
pub const DIRECT_SOLVER_LIMIT: usize = 1500;

const VI_TOLERANCE: f64 = 1e-10;
const VI_MAX_SWEEPS: usize = 1_000_000;

/// Which states count as "bad".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetSpec {
    /// States whose label has character `'1'` (or `'0'`) at each listed
    /// position. Labels of learned models are abstract bit strings.
    LabelBits(Vec<(usize, bool)>),
    States(BTreeSet<usize>),
}

impl TargetSpec {
    /// Target = first `atoms` bits all set.
    pub fn leading_bits(atoms: usize) -> Self {
        TargetSpec::LabelBits((0..atoms).map(|i| (i, true)).collect())
    }

    pub fn resolve(&self, dtmc: &Dtmc) -> Vec<bool> {
        match self {
            TargetSpec::LabelBits(bits) => dtmc
                .labels()
                .iter()
                .map(|label| {
                    let bytes = label.as_bytes();
                    bits.iter()
                        .all(|&(i, want)| bytes.get(i).map(|&b| (b == b'1') == want).unwrap_or(false))
                })
                .collect(),
            TargetSpec::States(set) => (0..dtmc.num_states()).map(|s| set.contains(&s)).collect(),
        }
    }
}

/// `P<=r (F target)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachQuery {
    pub target: TargetSpec,
    pub threshold: f64,
}

impl ReachQuery {
    pub fn new(target: TargetSpec, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(LarError::Config(format!("threshold {threshold} outside [0, 1]")));
        }
        Ok(ReachQuery { target, threshold })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum CheckResult {
    Satisfied { probability: f64 },
    Violated { probability: f64 },
}

impl CheckResult {
    pub fn probability(&self) -> f64 {
        match *self {
            CheckResult::Satisfied { probability } | CheckResult::Violated { probability } => probability,
        }
    }

    pub fn is_satisfied(&self) -> bool {
        matches!(self, CheckResult::Satisfied { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Gaussian elimination below [`DIRECT_SOLVER_LIMIT`], iteration above.
    Auto,
    Direct,
    ValueIteration,
}

/// States from which some target state is reachable in the underlying graph.
pub fn can_reach(dtmc: &Dtmc, target: &[bool]) -> Vec<bool> {
    let preds = dtmc.predecessors();
    let mut seen = target.to_vec();
    let mut queue: VecDeque<usize> = (0..dtmc.num_states()).filter(|&s| target[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &s in &preds[t] {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
    }
    seen
}

/// Per-state probability of eventually reaching `target`: the least
/// solution of `x = 1` on targets, `x = 0` where the target is unreachable,
/// `x_s = sum_t Pr(s,t) x_t` elsewhere.
pub fn reach_probabilities(dtmc: &Dtmc, target: &[bool], solver: Solver) -> Result<Vec<f64>> {
    let n = dtmc.num_states();
    if target.len() != n {
        return Err(LarError::InvalidModel(format!(
            "target mask has {} entries for {n} states",
            target.len()
        )));
    }
    let reach = can_reach(dtmc, target);
    let mut x: Vec<f64> = target.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    let maybe: Vec<usize> = (0..n).filter(|&s| reach[s] && !target[s]).collect();
    if maybe.is_empty() {
        return Ok(x);
    }
    let direct = match solver {
        Solver::Auto => maybe.len() <= DIRECT_SOLVER_LIMIT,
        Solver::Direct => true,
        Solver::ValueIteration => false,
    };
    if direct {
        solve_direct(dtmc, target, &maybe, &mut x)?;
    } else {
        solve_iterative(dtmc, &maybe, &mut x)?;
    }
    Ok(x)
}

fn solve_direct(dtmc: &Dtmc, target: &[bool], maybe: &[usize], x: &mut [f64]) -> Result<()> {
    let m = maybe.len();
    let mut index = vec![usize::MAX; dtmc.num_states()];
    for (i, &s) in maybe.iter().enumerate() {
        index[s] = i;
    }
    // (I - A) y = b, row-major augmented matrix.
    let width = m + 1;
    let mut a = vec![0.0; m * width];
    for (i, &s) in maybe.iter().enumerate() {
        a[i * width + i] += 1.0;
        for &(t, p) in dtmc.successors(s) {
            if target[t] {
                a[i * width + m] += p;
            } else if index[t] != usize::MAX {
                a[i * width + index[t]] -= p;
            }
        }
    }
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&i, &j| a[i * width + col].abs().total_cmp(&a[j * width + col].abs()))
            .expect("non-empty range");
        let pv = a[pivot * width + col];
        if pv.abs() < 1e-300 {
            return Err(LarError::NonConvergence {
                iterations: 0,
                residual: f64::INFINITY,
            });
        }
        if pivot != col {
            for k in 0..width {
                a.swap(col * width + k, pivot * width + k);
            }
        }
        for row in col + 1..m {
            let factor = a[row * width + col] / pv;
            if factor == 0.0 {
                continue;
            }
            for k in col..width {
                a[row * width + k] -= factor * a[col * width + k];
            }
        }
    }
    let mut y = vec![0.0; m];
    for i in (0..m).rev() {
        let mut acc = a[i * width + m];
        for k in i + 1..m {
            acc -= a[i * width + k] * y[k];
        }
        y[i] = acc / a[i * width + i];
    }
    for (i, &s) in maybe.iter().enumerate() {
        x[s] = y[i].clamp(0.0, 1.0);
    }
    Ok(())
}

fn solve_iterative(dtmc: &Dtmc, maybe: &[usize], x: &mut [f64]) -> Result<()> {
    let mut residual = f64::INFINITY;
    for _ in 0..VI_MAX_SWEEPS {
        residual = 0.0;
        for &s in maybe {
            let v: f64 = dtmc.successors(s).iter().map(|&(t, p)| p * x[t]).sum();
            residual = f64::max(residual, (v - x[s]).abs());
            x[s] = v;
        }
        if residual < VI_TOLERANCE {
            return Ok(());
        }
    }
    Err(LarError::NonConvergence {
        iterations: VI_MAX_SWEEPS,
        residual,
    })
}

/// Probability of eventually reaching `target` from the initial distribution.
pub fn reach_probability(dtmc: &Dtmc, target: &[bool]) -> Result<f64> {
    let x = reach_probabilities(dtmc, target, Solver::Auto)?;
    let p: f64 = dtmc.initial().iter().zip(&x).map(|(i, v)| i * v).sum();
    Ok(p.clamp(0.0, 1.0))
}

/// Decides `dtmc |= P<=r (F target)`; the bound is inclusive.
pub fn check(dtmc: &Dtmc, query: &ReachQuery) -> Result<CheckResult> {
    let target = query.target.resolve(dtmc);
    let probability = reach_probability(dtmc, &target)?;
    Ok(if probability <= query.threshold {
        CheckResult::Satisfied { probability }
    } else {
        CheckResult::Violated { probability }
    })
}
