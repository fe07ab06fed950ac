use std::collections::BTreeSet;

use lar_core::learner::{aalergia, PrefixTree};
use lar_core::trace::{sample_batch, HiddenDtmcSimulator, SimulatorConfig};
use lar_core::{select_model, AbstractState, AbstractTrace, LearnerConfig, Predicate, PredicateSet};
use proptest::prelude::*;

fn sym(bits: &str) -> AbstractState {
    AbstractState::from_bits(bits).unwrap()
}

fn trace(word: &str) -> AbstractTrace {
    AbstractTrace(word.chars().map(|c| sym(&c.to_string())).collect())
}

/// Every non-empty suffix realised below `n`.
fn suffixes(tree: &PrefixTree, n: usize, prefix: &mut Vec<AbstractState>, out: &mut BTreeSet<Vec<AbstractState>>) {
    for (s, child, _) in tree.edges(n).unwrap() {
        prefix.push(s.clone());
        out.insert(prefix.clone());
        suffixes(tree, child, prefix, out);
        prefix.pop();
    }
}

/// Compatibility straight from its definition: termination and the
/// probability of every realised suffix prefix differ by less than the sum
/// of the two Hoeffding-style bounds.
fn brute_force_compatible(tree: &PrefixTree, a: usize, b: usize, eps: f64) -> bool {
    if tree.symbol(a).unwrap() != tree.symbol(b).unwrap() {
        return false;
    }
    let bound = |n: usize| {
        let l = tree.label(n).unwrap() as f64;
        (6.0 * eps * l.ln() / l).sqrt()
    };
    let total = bound(a) + bound(b);
    let ta = tree.termination_prob(a).unwrap();
    let tb = tree.termination_prob(b).unwrap();
    if (ta - tb).abs() >= total {
        return false;
    }
    let mut all = BTreeSet::new();
    suffixes(tree, a, &mut Vec::new(), &mut all);
    suffixes(tree, b, &mut Vec::new(), &mut all);
    all.iter().all(|s| {
        let pa = tree.multi_step_prob(a, s).unwrap();
        let pb = tree.multi_step_prob(b, s).unwrap();
        (pa - pb).abs() < total
    })
}

#[test]
fn compatibility_on_a_worked_pair() {
    // Node "0" carries 100 visits (90 continue with 0, 10 with 1); node
    // "00" carries 90 visits. Checked against the oracle at several bounds.
    let mut traces = Vec::new();
    traces.extend(std::iter::repeat_n(trace("000"), 60));
    traces.extend(std::iter::repeat_n(trace("0011"), 30));
    traces.extend(std::iter::repeat_n(trace("01"), 10));
    let tree = PrefixTree::build(&traces).unwrap();
    let a = tree.find(&[sym("0")]).unwrap();
    let b = tree.find(&[sym("0"), sym("0")]).unwrap();
    assert_eq!(tree.label(a).unwrap(), 100);
    assert_eq!(tree.label(b).unwrap(), 90);
    for eps in [0.01, 0.05, 0.2, 1.1, 2.0] {
        assert_eq!(
            tree.compatible(a, b, eps),
            brute_force_compatible(&tree, a, b, eps),
            "eps {eps}"
        );
    }
    // Continuation with 1 is 0.1 at "0" and 30/90 at "00"; the bound sum
    // at eps = 0.01 is about 0.054 + 0.057, so the pair is rejected.
    assert!(!tree.compatible(a, b, 0.01));
    assert!(tree.compatible(a, b, 2.0));
}

fn word_strategy() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::collection::vec(prop::bool::ANY, 1..6), 5..60).prop_map(|ws| {
        ws.into_iter()
            .map(|w| w.into_iter().map(|b| if b { '1' } else { '0' }).collect())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compatibility_matches_brute_force(words in word_strategy(), eps in prop::sample::select(vec![0.02, 0.1, 0.5, 1.1, 4.4])) {
        let traces: Vec<AbstractTrace> = words.iter().map(|w| trace(w)).collect();
        let tree = PrefixTree::build(&traces).unwrap();
        for a in 1..tree.num_nodes() {
            for b in 1..tree.num_nodes() {
                prop_assert_eq!(
                    tree.compatible(a, b, eps),
                    brute_force_compatible(&tree, a, b, eps),
                    "nodes {} {}", a, b
                );
            }
        }
    }

    #[test]
    fn learned_models_are_stochastic_and_accept_their_data(words in word_strategy(), eps in prop::sample::select(vec![1.1, 2.2, 8.8])) {
        let traces: Vec<AbstractTrace> = words.iter().map(|w| trace(w)).collect();
        let model = aalergia(&traces, eps).unwrap();
        let d = model.dtmc();
        for s in 0..d.num_states() {
            let total: f64 = d.successors(s).iter().map(|&(_, p)| p).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
        for t in &traces {
            prop_assert!(model.walk(t).is_some());
            prop_assert!(model.trace_log_likelihood(t).is_finite());
        }
    }
}

#[test]
fn two_state_chain_is_recovered() {
    let cfg = SimulatorConfig::parse(
        "[vars]\nx\n[states]\nA, 0\nB, 1\n[initial]\nA, 1\n[transitions]\nA, A, 0.7\nA, B, 0.3\nB, B, 0.6\nB, A, 0.4\n[options]\nmax_length = 20\n",
        "chain",
    )
    .unwrap();
    let mut sim = HiddenDtmcSimulator::from_config(&cfg, 11).unwrap();
    let traces = sample_batch(&mut sim, 5000, 20).unwrap();
    let schema = traces.schema().clone();
    let preds = PredicateSet::new(vec![Predicate::parse("x > 0.5", &schema).unwrap()]).unwrap();
    let abs = preds.abstract_trace_set(&traces).unwrap();
    let selection = select_model(&abs, &LearnerConfig::default()).unwrap();
    let model = selection.model;
    assert_eq!(model.num_states(), 2, "candidates: {:?}", selection.candidates);
    let a = model.start(&sym("0")).unwrap();
    let b = model.step(a, &sym("1")).unwrap();
    let d = model.dtmc();
    // Every trace stops after exactly 20 states, so one state in twenty
    // contributes termination mass to its own self-loop.
    let stop = 1.0 / 20.0;
    let expect_ab = 0.3 * (1.0 - stop);
    let expect_ba = 0.4 * (1.0 - stop);
    assert!((d.prob(a, b) - expect_ab).abs() < 0.03, "{}", d.prob(a, b));
    assert!((d.prob(b, a) - expect_ba).abs() < 0.03, "{}", d.prob(b, a));
}
