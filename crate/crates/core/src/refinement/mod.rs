//! Spurious-transition ranking and predicate discovery.

pub mod svm;

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::abstraction::{AbstractTrace, Predicate, PredicateSet, Relation};
use crate::error::Result;
use crate::learner::LearnedDtmc;
use crate::trace::{ConcreteState, TraceSet};

pub use svm::{LinearClassifier, SvmConfig};

/// Model versus empirical probability of one transition of the learned
/// model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionStat {
    pub source: usize,
    pub dest: usize,
    pub model_prob: f64,
    /// `#s`: observed steps out of `source`.
    pub source_count: u64,
    /// `#<s,s'>`: observed steps from `source` to `dest`.
    pub transition_count: u64,
    /// `model_prob - transition_count / source_count`.
    pub p_diff: f64,
    /// No step out of `source` was observed; the empirical estimate is 0.
    pub zero_support: bool,
}

/// Walks each abstract trace through `model` up to the point where it
/// leaves the model. Entry `i` lists model states for the walked prefix.
fn walk_prefixes(model: &LearnedDtmc, traces: &[AbstractTrace]) -> Vec<Vec<usize>> {
    traces
        .iter()
        .map(|t| {
            let mut states = Vec::with_capacity(t.len());
            for (i, sym) in t.symbols().iter().enumerate() {
                let next = if i == 0 {
                    model.start(sym)
                } else {
                    model.step(states[i - 1], sym)
                };
                match next {
                    Some(q) => states.push(q),
                    None => break,
                }
            }
            states
        })
        .collect()
}

/// Ranks every transition of `model` by `p_diff`, largest first. Ties are
/// broken by `(source, dest)`; zero-support transitions come last.
pub fn identify_spurious_transitions(model: &LearnedDtmc, traces: &[AbstractTrace]) -> Vec<TransitionStat> {
    let n = model.num_states();
    let mut from = vec![0u64; n];
    let mut pair: HashMap<(usize, usize), u64> = HashMap::new();
    for (walk, trace) in walk_prefixes(model, traces).iter().zip(traces) {
        // Every state that has a following observation counts toward #s,
        // including the step on which the trace leaves the model.
        let steps = if walk.len() < trace.len() {
            walk.len()
        } else {
            walk.len().saturating_sub(1)
        };
        for i in 0..steps {
            from[walk[i]] += 1;
            if let Some(&next) = walk.get(i + 1) {
                *pair.entry((walk[i], next)).or_default() += 1;
            }
        }
    }
    let mut stats: Vec<TransitionStat> = model
        .dtmc()
        .transitions()
        .map(|(s, t, p)| {
            let source_count = from[s];
            let transition_count = pair.get(&(s, t)).copied().unwrap_or(0);
            let empirical = if source_count == 0 {
                0.0
            } else {
                transition_count as f64 / source_count as f64
            };
            TransitionStat {
                source: s,
                dest: t,
                model_prob: p,
                source_count,
                transition_count,
                p_diff: p - empirical,
                zero_support: source_count == 0,
            }
        })
        .collect();
    stats.sort_by(|a, b| {
        a.zero_support
            .cmp(&b.zero_support)
            .then(b.p_diff.total_cmp(&a.p_diff))
            .then((a.source, a.dest).cmp(&(b.source, b.dest)))
    });
    stats
}

/// Concrete source states of the observed steps out of `s`, split by
/// whether the step went to `s'`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledDataset {
    pub positives: Vec<ConcreteState>,
    pub negatives: Vec<ConcreteState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionCounts {
    pub source_count: u64,
    pub transition_count: u64,
    /// Steps out of `s` on which the trace left the model.
    pub out_of_model: u64,
    pub data: LabeledDataset,
}

fn collect(
    walks: &[Vec<usize>],
    abstract_traces: &[AbstractTrace],
    traces: &TraceSet,
    source: usize,
    dest: usize,
) -> TransitionCounts {
    let mut out = TransitionCounts {
        source_count: 0,
        transition_count: 0,
        out_of_model: 0,
        data: LabeledDataset::default(),
    };
    for ((walk, abs), concrete) in walks.iter().zip(abstract_traces).zip(traces.traces()) {
        for i in 1..abs.len() {
            let Some(&prev) = walk.get(i - 1) else { break };
            if prev != source {
                continue;
            }
            out.source_count += 1;
            let state = concrete.states()[i - 1].clone();
            match walk.get(i) {
                Some(&next) if next == dest => {
                    out.transition_count += 1;
                    out.data.positives.push(state);
                }
                Some(_) => out.data.negatives.push(state),
                None => {
                    out.out_of_model += 1;
                    out.data.negatives.push(state);
                }
            }
        }
    }
    out
}

/// Counts steps out of `source` over `traces` and collects the concrete
/// states that move to `dest` (positives) or elsewhere (negatives).
pub fn count_transition(
    model: &LearnedDtmc,
    traces: &TraceSet,
    predicates: &PredicateSet,
    source: usize,
    dest: usize,
) -> Result<TransitionCounts> {
    let abs = predicates.abstract_trace_set(traces)?;
    let walks = walk_prefixes(model, &abs);
    Ok(collect(&walks, &abs, traces, source, dest))
}

/// Distinct points with set semantics: a state is positive if any of its
/// occurrences is, and negative only otherwise.
fn to_points(data: &LabeledDataset) -> svm::Points {
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut points = svm::Points::default();
    for s in &data.positives {
        if seen.insert(s.key()) {
            points.x.push(s.values().to_vec());
            points.y.push(true);
        }
    }
    for s in &data.negatives {
        if seen.insert(s.key()) {
            points.x.push(s.values().to_vec());
            points.y.push(false);
        }
    }
    points
}

/// Trains a linear separator for `data`, minimises its variables and
/// rounds its coefficients. `None` if no classifier reaches the accuracy
/// threshold.
pub fn train_linear_classifier(data: &LabeledDataset, config: &SvmConfig) -> Option<LinearClassifier> {
    classify_points(&to_points(data), config)
}

fn classify_points(points: &svm::Points, config: &SvmConfig) -> Option<LinearClassifier> {
    let clf = svm::train_accepted(points, config)?;
    let small = svm::minimize_features(&clf, points, config);
    Some(svm::rationalize(&small, points, config))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementAttempt {
    pub source: usize,
    pub dest: usize,
    pub p_diff: f64,
    pub positives: usize,
    pub negatives: usize,
    pub accuracy: Option<f64>,
    pub predicate: Option<String>,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RefinementOutcome {
    Refined {
        predicate: Predicate,
        attempts: Vec<RefinementAttempt>,
    },
    Failure {
        attempts: Vec<RefinementAttempt>,
    },
}

impl RefinementOutcome {
    pub fn attempts(&self) -> &[RefinementAttempt] {
        match self {
            RefinementOutcome::Refined { attempts, .. } | RefinementOutcome::Failure { attempts } => attempts,
        }
    }
}

fn distinct_abstract_states(predicates: &PredicateSet, traces: &TraceSet) -> usize {
    traces
        .traces()
        .iter()
        .flat_map(|t| t.states())
        .map(|s| predicates.abstract_state(s))
        .collect::<BTreeSet<_>>()
        .len()
}

/// Tries the ranked transitions in order and returns the first new
/// predicate that separates the data, is not a duplicate of an existing
/// one, and increases the number of abstract states seen on `traces`.
pub fn refine(
    model: &LearnedDtmc,
    traces: &TraceSet,
    predicates: &PredicateSet,
    ranked: &[TransitionStat],
    config: &SvmConfig,
) -> Result<RefinementOutcome> {
    let abs = predicates.abstract_trace_set(traces)?;
    let walks = walk_prefixes(model, &abs);
    let baseline = distinct_abstract_states(predicates, traces);
    let mut attempts = Vec::new();
    for stat in ranked {
        let mut attempt = RefinementAttempt {
            source: stat.source,
            dest: stat.dest,
            p_diff: stat.p_diff,
            positives: 0,
            negatives: 0,
            accuracy: None,
            predicate: None,
            outcome: String::new(),
        };
        if stat.zero_support {
            attempt.outcome = "skipped: no observed steps".into();
            attempts.push(attempt);
            continue;
        }
        let counts = collect(&walks, &abs, traces, stat.source, stat.dest);
        attempt.positives = counts.data.positives.len();
        attempt.negatives = counts.data.negatives.len();
        let points = to_points(&counts.data);
        if points.y.iter().all(|&y| y) || points.y.iter().all(|&y| !y) {
            attempt.outcome = "skipped: one class is empty".into();
            attempts.push(attempt);
            continue;
        }
        let Some(clf) = classify_points(&points, config) else {
            attempt.outcome = "no linear separator".into();
            attempts.push(attempt);
            continue;
        };
        attempt.accuracy = Some(clf.accuracy);
        let predicate = Predicate::linear(traces.schema(), &clf.coefficients, Relation::Ge, clf.threshold)?;
        attempt.predicate = Some(predicate.to_string());
        if predicates.contains_equivalent(&predicate) {
            attempt.outcome = "rejected: duplicate predicate".into();
            attempts.push(attempt);
            continue;
        }
        let mut extended = predicates.clone();
        extended.insert(predicate.clone());
        if distinct_abstract_states(&extended, traces) <= baseline {
            attempt.outcome = "rejected: no new abstract state".into();
            attempts.push(attempt);
            continue;
        }
        attempt.outcome = "accepted".into();
        attempts.push(attempt);
        return Ok(RefinementOutcome::Refined { predicate, attempts });
    }
    Ok(RefinementOutcome::Failure { attempts })
}
