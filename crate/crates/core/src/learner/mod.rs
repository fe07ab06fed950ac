//! Learning a DTMC over abstract states from abstract traces.

mod tree;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

pub use tree::{MergedAutomaton, NodeId, PrefixTree};

use crate::abstraction::{AbstractState, AbstractTrace};
use crate::dtmc::Dtmc;
use crate::error::{LarError, Result};

/// A DTMC whose states carry the abstract symbol they emit. Moves are
/// symbol-deterministic: from each state at most one successor is taken on
/// any given symbol.
#[derive(Debug, Clone)]
pub struct LearnedDtmc {
    dtmc: Dtmc,
    alphabet: Vec<AbstractState>,
    symbols: Vec<u32>,
    starts: Vec<(u32, usize)>,
    moves: Vec<Vec<(u32, usize)>>,
}

impl LearnedDtmc {
    pub(crate) fn from_parts(
        dtmc: Dtmc,
        alphabet: Vec<AbstractState>,
        symbols: Vec<u32>,
        starts: Vec<(u32, usize)>,
        moves: Vec<Vec<(u32, usize)>>,
    ) -> Self {
        LearnedDtmc {
            dtmc,
            alphabet,
            symbols,
            starts,
            moves,
        }
    }

    /// Wraps a hand-written DTMC whose labels are bit strings. Fails unless
    /// every state has at most one successor per label, and at most one
    /// initial state carries any given label.
    pub fn from_dtmc(dtmc: Dtmc) -> Result<Self> {
        let parsed = dtmc
            .labels()
            .iter()
            .map(|l| {
                AbstractState::from_bits(l)
                    .ok_or_else(|| LarError::InvalidModel(format!("label `{l}` is not a bit string")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut alphabet = parsed.clone();
        alphabet.sort();
        alphabet.dedup();
        let id = |s: &AbstractState| alphabet.binary_search(s).unwrap() as u32;
        let symbols: Vec<u32> = parsed.iter().map(id).collect();
        let unique = |mut v: Vec<(u32, usize)>, what: String| -> Result<Vec<(u32, usize)>> {
            v.sort_unstable();
            if v.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(LarError::InvalidModel(format!("{what} is not symbol-deterministic")));
            }
            Ok(v)
        };
        let starts = unique(
            (0..dtmc.num_states())
                .filter(|&s| dtmc.initial()[s] > 0.0)
                .map(|s| (symbols[s], s))
                .collect(),
            "initial distribution".into(),
        )?;
        let moves = (0..dtmc.num_states())
            .map(|s| {
                unique(
                    dtmc.successors(s).iter().map(|&(t, _)| (symbols[t], t)).collect(),
                    format!("state {s}"),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LearnedDtmc {
            dtmc,
            alphabet,
            symbols,
            starts,
            moves,
        })
    }

    pub fn dtmc(&self) -> &Dtmc {
        &self.dtmc
    }

    pub fn num_states(&self) -> usize {
        self.dtmc.num_states()
    }

    pub fn symbol(&self, state: usize) -> &AbstractState {
        &self.alphabet[self.symbols[state] as usize]
    }

    fn symbol_id(&self, sym: &AbstractState) -> Option<u32> {
        self.alphabet.binary_search(sym).ok().map(|i| i as u32)
    }

    fn lookup(list: &[(u32, usize)], s: u32) -> Option<usize> {
        list.binary_search_by_key(&s, |m| m.0).ok().map(|i| list[i].1)
    }

    /// Initial state emitting `sym`, if any.
    pub fn start(&self, sym: &AbstractState) -> Option<usize> {
        Self::lookup(&self.starts, self.symbol_id(sym)?)
    }

    /// Successor of `state` on `sym`, if any.
    pub fn step(&self, state: usize, sym: &AbstractState) -> Option<usize> {
        Self::lookup(self.moves.get(state)?, self.symbol_id(sym)?)
    }

    /// State reached after reading `path` from the start.
    pub fn step_path(&self, path: &[AbstractState]) -> Option<usize> {
        let (first, rest) = path.split_first()?;
        rest.iter().try_fold(self.start(first)?, |q, s| self.step(q, s))
    }

    /// The state sequence an abstract trace follows, or `None` if it
    /// leaves the model.
    pub fn walk(&self, trace: &AbstractTrace) -> Option<Vec<usize>> {
        let (first, rest) = trace.symbols().split_first()?;
        let mut states = vec![self.start(first)?];
        for s in rest {
            states.push(self.step(*states.last().unwrap(), s)?);
        }
        Some(states)
    }

    /// `ln` of the probability of `trace`: initial probability, every step,
    /// and a final self-loop factor standing for termination.
    pub fn trace_log_likelihood(&self, trace: &AbstractTrace) -> f64 {
        let Some(states) = self.walk(trace) else {
            return f64::NEG_INFINITY;
        };
        let d = &self.dtmc;
        let last = *states.last().unwrap();
        let mut ll = d.initial()[states[0]].ln();
        for w in states.windows(2) {
            ll += d.prob(w[0], w[1]).ln();
        }
        ll + d.prob(last, last).ln()
    }
}

/// `aalergia(traces, epsilon)`: prefix tree, red-blue merging, normalisation.
pub fn aalergia(traces: &[AbstractTrace], epsilon: f64) -> Result<LearnedDtmc> {
    check_epsilon(epsilon)?;
    let mut tree = PrefixTree::build(traces)?;
    tree.merge_all(epsilon);
    Ok(tree.normalize())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_nan() || epsilon <= 1.0 {
        return Err(LarError::Config(format!("epsilon must exceed 1, got {epsilon}")));
    }
    Ok(())
}

/// `ln P(traces | model) - (weight / 2) * |states| * ln(total symbols)`.
pub fn bic_score(model: &LearnedDtmc, traces: &[AbstractTrace], weight: f64) -> f64 {
    let mut counts: BTreeMap<&AbstractTrace, u64> = BTreeMap::new();
    for t in traces {
        *counts.entry(t).or_default() += 1;
    }
    let ll: f64 = counts
        .iter()
        .map(|(t, &n)| n as f64 * model.trace_log_likelihood(t))
        .sum();
    let symbols: usize = traces.iter().map(AbstractTrace::len).sum();
    ll - weight / 2.0 * model.num_states() as f64 * (symbols as f64).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnerConfig {
    pub epsilon_max: f64,
    /// Explicit candidate list; when `None` the grid `1.1 * 2^k <= epsilon_max` is used.
    pub epsilon_grid: Option<Vec<f64>>,
    pub bic_weight: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            epsilon_max: 64.0,
            epsilon_grid: None,
            bic_weight: 1.0,
        }
    }
}

impl LearnerConfig {
    pub fn candidates(&self) -> Result<Vec<f64>> {
        let grid = match &self.epsilon_grid {
            Some(g) => g.clone(),
            None => std::iter::successors(Some(1.1), |e| Some(e * 2.0))
                .take_while(|&e| e <= self.epsilon_max)
                .collect(),
        };
        if grid.is_empty() {
            return Err(LarError::Config(format!(
                "no epsilon candidate in (1, {}]",
                self.epsilon_max
            )));
        }
        for &e in &grid {
            check_epsilon(e)?;
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateScore {
    pub epsilon: f64,
    pub bic: f64,
    pub log_likelihood: f64,
    pub states: usize,
}

#[derive(Debug, Clone)]
pub struct ModelSelection {
    pub model: LearnedDtmc,
    pub epsilon: f64,
    pub candidates: Vec<CandidateScore>,
}

/// Learns one model per epsilon candidate (in parallel) and keeps the one
/// with the highest BIC; ties go to the smaller epsilon, then fewer states.
pub fn select_model(traces: &[AbstractTrace], config: &LearnerConfig) -> Result<ModelSelection> {
    let grid = config.candidates()?;
    let tree = PrefixTree::build(traces)?;
    let learned: Vec<(f64, LearnedDtmc, CandidateScore)> = grid
        .par_iter()
        .map(|&epsilon| {
            let mut t = tree.clone();
            t.merge_all(epsilon);
            let model = t.normalize();
            let bic = bic_score(&model, traces, config.bic_weight);
            let penalty = config.bic_weight / 2.0
                * model.num_states() as f64
                * (traces.iter().map(AbstractTrace::len).sum::<usize>() as f64).ln();
            let score = CandidateScore {
                epsilon,
                bic,
                log_likelihood: bic + penalty,
                states: model.num_states(),
            };
            (epsilon, model, score)
        })
        .collect();
    let best = learned
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            b.2.bic
                .total_cmp(&a.2.bic)
                .then(a.0.total_cmp(&b.0))
                .then(a.2.states.cmp(&b.2.states))
        })
        .map(|(i, _)| i)
        .expect("grid is non-empty");
    let candidates = learned.iter().map(|c| c.2.clone()).collect();
    let (epsilon, model, _) = learned.into_iter().nth(best).unwrap();
    log::debug!("selected epsilon {epsilon} with {} states", model.num_states());
    Ok(ModelSelection {
        model,
        epsilon,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::tree::tests::{running_example, sym, trace};
    use super::*;

    #[test]
    fn grid_defaults() {
        let g = LearnerConfig::default().candidates().unwrap();
        assert_eq!(g.len(), 6);
        assert!((g[5] - 35.2).abs() < 1e-12);
        let bad = LearnerConfig {
            epsilon_grid: Some(vec![1.0]),
            ..Default::default()
        };
        assert!(bad.candidates().is_err());
        let tiny = LearnerConfig {
            epsilon_max: 1.05,
            ..Default::default()
        };
        assert!(tiny.candidates().is_err());
    }

    #[test]
    fn repeated_trace_collapses_to_one_state() {
        let traces = vec![trace("000"); 10];
        let m = aalergia(&traces, 2.0).unwrap();
        assert_eq!(m.num_states(), 1);
        assert_eq!(m.dtmc().prob(0, 0), 1.0);
    }

    #[test]
    fn unmerged_model_reproduces_frequencies() {
        let mut traces = vec![trace("01"); 2000];
        traces.extend(vec![trace("100"); 2000]);
        let m = aalergia(&traces, 1.01).unwrap();
        let tree = PrefixTree::build(&traces).unwrap();
        assert_eq!(m.num_states(), tree.num_nodes() - 1);
        for t in [trace("01"), trace("100")] {
            assert!((m.trace_log_likelihood(&t) - 0.5f64.ln()).abs() < 1e-12);
        }
        assert_eq!(m.trace_log_likelihood(&trace("11")), f64::NEG_INFINITY);
    }

    #[test]
    fn bic_of_prefix_tree_model() {
        let traces = running_example();
        let m = PrefixTree::build(&traces).unwrap().normalize();
        let ll = 88.0 * 0.88f64.ln() + 2.0 * 0.02f64.ln() + 2.0 * 0.02f64.ln() + 8.0 * 0.08f64.ln();
        let n_symbols = 88.0 * 4.0 + 2.0 * 4.0 + 2.0 * 3.0 + 8.0 * 4.0;
        let expected = ll - 0.5 * 7.0 * f64::ln(n_symbols);
        assert!((bic_score(&m, &traces, 1.0) - expected).abs() < 1e-9);
    }

    #[test]
    fn single_candidate_grid_matches_aalergia() {
        let traces = running_example();
        let cfg = LearnerConfig {
            epsilon_grid: Some(vec![2.0]),
            ..Default::default()
        };
        let sel = select_model(&traces, &cfg).unwrap();
        let direct = aalergia(&traces, 2.0).unwrap();
        assert_eq!(sel.model.dtmc(), direct.dtmc());
        assert_eq!(sel.candidates.len(), 1);
    }

    #[test]
    fn from_dtmc_requires_symbol_determinism() {
        let d = Dtmc::new(
            vec!["0".into(), "0".into()],
            vec![1.0, 0.0],
            vec![vec![(0, 0.5), (1, 0.5)], vec![(1, 1.0)]],
        )
        .unwrap();
        assert!(LearnedDtmc::from_dtmc(d).is_err());
        let d = Dtmc::new(
            vec!["0".into(), "1".into()],
            vec![1.0, 0.0],
            vec![vec![(0, 0.998), (1, 0.002)], vec![(1, 1.0)]],
        )
        .unwrap();
        let m = LearnedDtmc::from_dtmc(d).unwrap();
        assert_eq!(m.walk(&trace("0011")), Some(vec![0, 0, 1, 1]));
        assert_eq!(m.step(1, &sym("0")), None);
    }
}
