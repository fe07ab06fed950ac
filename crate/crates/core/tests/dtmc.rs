use lar_core::counterexample::{build_counterexample, CexOutcome};
use lar_core::dtmc::{reach_probabilities, reach_probability, Solver};
use lar_core::Dtmc;
use proptest::prelude::*;

/// Random acyclic chain: state `i` only moves to larger indices, the last
/// state is absorbing, and the initial distribution sits on state 0.
fn acyclic() -> impl Strategy<Value = (Dtmc, Vec<bool>)> {
    (2usize..=12).prop_flat_map(|n| {
        let rows = prop::collection::vec(prop::collection::vec(0.0f64..1.0, n), n);
        let target = prop::collection::vec(prop::bool::weighted(0.3), n);
        (rows, target).prop_map(move |(weights, target)| {
            let mut rows = Vec::with_capacity(n);
            for (i, w) in weights.iter().enumerate() {
                if i + 1 == n {
                    rows.push(vec![(i, 1.0)]);
                    continue;
                }
                let cells: Vec<(usize, f64)> = ((i + 1)..n).map(|j| (j, w[j] + 0.01)).collect();
                let total: f64 = cells.iter().map(|c| c.1).sum();
                rows.push(cells.into_iter().map(|(j, p)| (j, p / total)).collect());
            }
            let mut init = vec![0.0; n];
            init[0] = 1.0;
            let labels = (0..n).map(|i| format!("s{i}")).collect();
            (Dtmc::new(labels, init, rows).unwrap(), target)
        })
    })
}

/// Sum over all finite paths from `s` that hit the target for the first
/// time at their last state.
fn path_sum(d: &Dtmc, target: &[bool], s: usize) -> f64 {
    if target[s] {
        return 1.0;
    }
    d.successors(s)
        .iter()
        .filter(|&&(t, _)| t != s)
        .map(|&(t, p)| p * path_sum(d, target, t))
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn reachability_matches_path_sums((d, target) in acyclic()) {
        let direct = reach_probabilities(&d, &target, Solver::Direct).unwrap();
        let iterative = reach_probabilities(&d, &target, Solver::ValueIteration).unwrap();
        for s in 0..d.num_states() {
            let oracle = path_sum(&d, &target, s);
            prop_assert!((direct[s] - oracle).abs() < 1e-9, "direct {} vs {}", direct[s], oracle);
            prop_assert!((iterative[s] - oracle).abs() < 1e-9, "iterative {} vs {}", iterative[s], oracle);
        }
    }

    #[test]
    fn explicit_format_round_trips((d, _) in acyclic()) {
        let text = d.to_explicit_string();
        prop_assert_eq!(Dtmc::parse_explicit(&text, "rt").unwrap(), d);
    }

    #[test]
    fn counterexamples_exceed_the_bound((d, target) in acyclic(), r in 0.0f64..1.0) {
        let p = reach_probability(&d, &target).unwrap();
        match build_counterexample(&d, &target, r, 100_000).unwrap() {
            CexOutcome::Found(cex) => {
                prop_assert!(p > r);
                prop_assert!(cex.mass() > r);
                prop_assert!(cex.mass() <= p + 1e-9);
                let last = cex.paths().last().unwrap().probability;
                prop_assert!(cex.mass() - last <= r);
                for w in cex.paths().windows(2) {
                    prop_assert!(w[0].probability >= w[1].probability);
                }
            }
            CexOutcome::Exhausted { mass, .. } => {
                prop_assert!(p <= r + 1e-9);
                prop_assert!((mass - p).abs() < 1e-9);
            }
            CexOutcome::Truncated { .. } => prop_assert!(false, "acyclic chains have few paths"),
        }
    }
}

#[test]
fn geometric_escape() {
    // 0.5 stay, 0.25 to bad, 0.25 to an absorbing safe state.
    let d = Dtmc::new(
        vec!["s".into(), "bad".into(), "safe".into()],
        vec![1.0, 0.0, 0.0],
        vec![vec![(0, 0.5), (1, 0.25), (2, 0.25)], vec![(1, 1.0)], vec![(2, 1.0)]],
    )
    .unwrap();
    let p = reach_probability(&d, &[false, true, false]).unwrap();
    assert!((p - 0.5).abs() < 1e-12);
}

#[test]
fn dot_export_lists_every_transition() {
    let d = Dtmc::new(
        vec!["0".into(), "1".into()],
        vec![1.0, 0.0],
        vec![vec![(0, 0.998), (1, 0.002)], vec![(1, 1.0)]],
    )
    .unwrap();
    let dot = d.to_dot();
    assert!(dot.starts_with("digraph"));
    assert_eq!(dot.matches("->").count(), d.num_transitions() + 1);
}
