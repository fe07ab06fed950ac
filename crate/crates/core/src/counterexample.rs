//! Smallest probabilistic counterexamples as sets of most-probable paths.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt::Write as _;
use std::rc::Rc;

use serde::Serialize;

use crate::abstraction::AbstractTrace;
use crate::dtmc::{can_reach, Dtmc};
use crate::error::{LarError, Result};
use crate::learner::LearnedDtmc;

/// Default cap on the number of paths in a counterexample.
pub const DEFAULT_K_MAX: usize = 1_000_000;

/// A finite path that reaches the target at its last state and not before.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstractPath {
    pub states: Vec<usize>,
    /// Initial-weighted probability of the path.
    pub probability: f64,
}

/// Path prefix stored as a link to its parent, so extending a candidate
/// costs O(1) instead of copying the whole state sequence.
#[derive(Debug)]
struct Link {
    state: usize,
    len: usize,
    prev: Option<Rc<Link>>,
}

impl Link {
    fn states(&self) -> Vec<usize> {
        let mut out = vec![0; self.len];
        let mut cur = Some(self);
        for slot in out.iter_mut().rev() {
            let l = cur.expect("length matches chain");
            *slot = l.state;
            cur = l.prev.as_deref();
        }
        out
    }
}

impl Drop for Link {
    // Unlink iteratively; long chains would otherwise recurse once per state.
    fn drop(&mut self) {
        let mut next = self.prev.take();
        while let Some(rc) = next {
            match Rc::try_unwrap(rc) {
                Ok(mut l) => next = l.prev.take(),
                Err(_) => break,
            }
        }
    }
}

#[derive(Debug)]
struct Candidate {
    probability: f64,
    path: Rc<Link>,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap on probability; on ties the lexicographically smaller
        // state sequence comes out first.
        self.probability.total_cmp(&other.probability).then_with(|| {
            if Rc::ptr_eq(&self.path, &other.path) {
                Ordering::Equal
            } else {
                other.path.states().cmp(&self.path.states())
            }
        })
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Best-first enumeration of target-hitting-first paths in non-increasing
/// probability order. Extensions into states that cannot reach the target
/// are never generated.
pub struct PathEnumerator<'a> {
    dtmc: &'a Dtmc,
    target: Vec<bool>,
    useful: Vec<bool>,
    heap: BinaryHeap<Candidate>,
}

impl<'a> PathEnumerator<'a> {
    pub fn new(dtmc: &'a Dtmc, target: &[bool]) -> Self {
        let useful = can_reach(dtmc, target);
        let heap = (0..dtmc.num_states())
            .filter(|&s| dtmc.initial()[s] > 0.0 && useful[s])
            .map(|s| Candidate {
                probability: dtmc.initial()[s],
                path: Rc::new(Link {
                    state: s,
                    len: 1,
                    prev: None,
                }),
            })
            .collect();
        PathEnumerator {
            dtmc,
            target: target.to_vec(),
            useful,
            heap,
        }
    }
}

impl Iterator for PathEnumerator<'_> {
    type Item = AbstractPath;

    fn next(&mut self) -> Option<AbstractPath> {
        while let Some(c) = self.heap.pop() {
            let last = c.path.state;
            if self.target[last] {
                return Some(AbstractPath {
                    states: c.path.states(),
                    probability: c.probability,
                });
            }
            for &(t, p) in self.dtmc.successors(last) {
                if self.useful[t] {
                    self.heap.push(Candidate {
                        probability: c.probability * p,
                        path: Rc::new(Link {
                            state: t,
                            len: c.path.len + 1,
                            prev: Some(Rc::clone(&c.path)),
                        }),
                    });
                }
            }
        }
        None
    }
}

/// A set of most-probable paths whose accumulated probability exceeds `r`.
#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    paths: Vec<AbstractPath>,
    mass: f64,
    threshold: f64,
    #[serde(skip)]
    target: Vec<bool>,
    #[serde(skip)]
    index: HashSet<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum CexOutcome {
    Found(Counterexample),
    /// Every target-reaching path was enumerated and the mass stays `<= r`.
    Exhausted {
        paths: usize,
        mass: f64,
    },
    /// `k_max` paths were collected without exceeding `r`.
    Truncated {
        paths: usize,
        mass: f64,
    },
}

/// Accumulates paths from [`PathEnumerator`] until their mass exceeds `r`.
pub fn build_counterexample(dtmc: &Dtmc, target: &[bool], r: f64, k_max: usize) -> Result<CexOutcome> {
    if target.len() != dtmc.num_states() {
        return Err(LarError::InvalidModel("target mask does not match the model".into()));
    }
    let mut paths = Vec::new();
    let mut mass = 0.0;
    for path in PathEnumerator::new(dtmc, target) {
        if paths.len() == k_max {
            return Ok(CexOutcome::Truncated {
                paths: paths.len(),
                mass,
            });
        }
        mass += path.probability;
        paths.push(path);
        if mass > r {
            let index = paths.iter().map(|p| p.states.clone()).collect();
            return Ok(CexOutcome::Found(Counterexample {
                paths,
                mass,
                threshold: r,
                target: target.to_vec(),
                index,
            }));
        }
    }
    Ok(CexOutcome::Exhausted {
        paths: paths.len(),
        mass,
    })
}

/// How an abstract trace relates to a counterexample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Member,
    NotMember,
    /// The trace uses a symbol the model has no move for.
    OutOfModel,
}

impl Counterexample {
    pub fn paths(&self) -> &[AbstractPath] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Number of states on the longest path.
    pub fn max_path_len(&self) -> usize {
        self.paths.iter().map(|p| p.states.len()).max().unwrap_or(0)
    }

    /// Walks `trace` through `model` up to the first target state and
    /// checks whether that prefix is one of the paths.
    pub fn classify(&self, model: &LearnedDtmc, trace: &AbstractTrace) -> Membership {
        let mut walked = Vec::new();
        for (i, sym) in trace.symbols().iter().enumerate() {
            let next = if i == 0 {
                model.start(sym)
            } else {
                model.step(walked[i - 1], sym)
            };
            let Some(q) = next else {
                return Membership::OutOfModel;
            };
            walked.push(q);
            if self.target.get(q).copied().unwrap_or(false) {
                return if self.index.contains(&walked) {
                    Membership::Member
                } else {
                    Membership::NotMember
                };
            }
        }
        Membership::NotMember
    }

    pub fn member(&self, model: &LearnedDtmc, trace: &AbstractTrace) -> bool {
        self.classify(model, trace) == Membership::Member
    }

    /// Header with mass and threshold, then one `probability<TAB>path` line
    /// per path; states are written as `index:label`.
    pub fn to_text(&self, dtmc: &Dtmc) -> String {
        let mut out = format!(
            "# counterexample: {} paths, mass {}, threshold {}\n",
            self.paths.len(),
            self.mass,
            self.threshold
        );
        for p in &self.paths {
            let _ = write!(out, "{}\t", p.probability);
            for (i, &s) in p.states.iter().enumerate() {
                let sep = if i == 0 { "" } else { " " };
                let label = dtmc.labels().get(s).map(String::as_str).unwrap_or("?");
                let _ = write!(out, "{sep}{s}:{label}");
            }
            out.push('\n');
        }
        out
    }
}
