//! Explicit discrete-time Markov chains and unbounded reachability.

mod io;
mod reach;

pub use reach::{
    can_reach, check, reach_probabilities, reach_probability, CheckResult, ReachQuery, Solver, TargetSpec,
    DIRECT_SOLVER_LIMIT,
};

use serde::Serialize;

use crate::error::{LarError, Result};

/// Tolerance for stochasticity checks on rows and the initial distribution.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-12;

/// A DTMC with labelled states, an initial distribution and a sparse,
/// row-stochastic transition relation. Rows are sorted by destination.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dtmc {
    labels: Vec<String>,
    initial: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Dtmc {
    pub fn new(labels: Vec<String>, initial: Vec<f64>, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(LarError::InvalidModel("a DTMC needs at least one state".into()));
        }
        if initial.len() != n || rows.len() != n {
            return Err(LarError::InvalidModel(format!(
                "{n} labels, {} initial entries, {} rows",
                initial.len(),
                rows.len()
            )));
        }
        let check_prob = |p: f64, what: &dyn Fn() -> String| -> Result<()> {
            if !(0.0..=1.0).contains(&p) {
                return Err(LarError::InvalidModel(format!("{} = {p} is not a probability", what())));
            }
            Ok(())
        };
        for (s, &p) in initial.iter().enumerate() {
            check_prob(p, &|| format!("initial({s})"))?;
        }
        let total: f64 = initial.iter().sum();
        if (total - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return Err(LarError::InvalidModel(format!("initial distribution sums to {total}")));
        }
        let mut clean = Vec::with_capacity(n);
        for (s, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(t, _)| t);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (t, p) in row {
                if t >= n {
                    return Err(LarError::InvalidModel(format!("transition {s} -> {t}: no such state")));
                }
                check_prob(p, &|| format!("Pr({s}, {t})"))?;
                match merged.last_mut() {
                    Some((last, q)) if *last == t => *q += p,
                    _ => merged.push((t, p)),
                }
            }
            merged.retain(|&(_, p)| p > 0.0);
            let sum: f64 = merged.iter().map(|&(_, p)| p).sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(LarError::InvalidModel(format!("row {s} sums to {sum}")));
            }
            clean.push(merged);
        }
        Ok(Dtmc {
            labels,
            initial,
            rows: clean,
        })
    }

    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, s: usize) -> &str {
        &self.labels[s]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn successors(&self, s: usize) -> &[(usize, f64)] {
        &self.rows[s]
    }

    pub fn num_transitions(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// All transitions with positive probability, in (source, destination) order.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(s, row)| row.iter().map(move |&(t, p)| (s, t, p)))
    }

    pub fn prob(&self, s: usize, t: usize) -> f64 {
        match self.rows.get(s) {
            Some(row) => row
                .binary_search_by_key(&t, |&(d, _)| d)
                .map(|i| row[i].1)
                .unwrap_or(0.0),
            None => 0.0,
        }
    }

    pub fn is_absorbing(&self, s: usize) -> bool {
        self.rows[s] == [(s, 1.0)]
    }

    /// Product of the step probabilities along `path` (the initial
    /// probability of the first state is not included).
    pub fn path_probability(&self, path: &[usize]) -> Result<f64> {
        if path.is_empty() {
            return Err(LarError::InvalidModel("empty path".into()));
        }
        if let Some(&bad) = path.iter().find(|&&s| s >= self.num_states()) {
            return Err(LarError::UnknownState(bad));
        }
        Ok(path.windows(2).map(|w| self.prob(w[0], w[1])).product())
    }

    /// Like [`Dtmc::path_probability`] but weighted by the initial
    /// probability of the first state.
    pub fn initial_path_probability(&self, path: &[usize]) -> Result<f64> {
        let steps = self.path_probability(path)?;
        Ok(self.initial[path[0]] * steps)
    }

    /// Predecessor lists, used by backward reachability.
    pub(crate) fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![Vec::new(); self.num_states()];
        for (s, t, _) in self.transitions() {
            preds[t].push(s);
        }
        preds
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fig5_left() -> Dtmc {
        Dtmc::new(
            vec!["0".into(), "1".into()],
            vec![1.0, 0.0],
            vec![vec![(0, 0.998), (1, 0.002)], vec![(1, 1.0)]],
        )
        .unwrap()
    }

    #[test]
    fn path_probability_on_two_state_chain() {
        let d = fig5_left();
        let p = d.initial_path_probability(&[0, 0, 1]).unwrap();
        assert!((p - 0.001996).abs() < 1e-15);
        assert_eq!(d.initial_path_probability(&[0]).unwrap(), 1.0);
        assert_eq!(d.initial_path_probability(&[1, 0]).unwrap(), 0.0);
        assert!(matches!(d.path_probability(&[0, 5]), Err(LarError::UnknownState(5))));
    }

    #[test]
    fn validation() {
        let one = || vec!["a".to_string()];
        assert!(Dtmc::new(one(), vec![1.0], vec![vec![(0, 0.9)]]).is_err());
        assert!(Dtmc::new(one(), vec![0.5], vec![vec![(0, 1.0)]]).is_err());
        assert!(Dtmc::new(one(), vec![1.0], vec![vec![(1, 1.0)]]).is_err());
        assert!(Dtmc::new(one(), vec![1.0], vec![vec![(0, 1.5), (0, -0.5)]]).is_err());
        let d = Dtmc::new(one(), vec![1.0], vec![vec![(0, 0.5), (0, 0.5)]]).unwrap();
        assert!(d.is_absorbing(0));
    }
}
