use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lar_core::counterexample::build_counterexample;
use lar_core::dtmc::{reach_probabilities, Solver};
use lar_core::learner::aalergia;
use lar_core::trace::{sample_batch, HiddenDtmcSimulator, SimulatorConfig};
use lar_core::{select_model, Dtmc, LearnerConfig, Predicate, PredicateSet};

const CHAIN: &str = "[vars]\nx\n[states]\nA, 0\nB, 1\nC, 2\n[initial]\nA, 1\n[transitions]\nA, A, 0.5\nA, B, 0.3\nA, C, 0.2\nB, A, 0.4\nB, B, 0.2\nB, C, 0.4\nC, C, 1\n[options]\nmax_length = 10000\n";

fn abstract_traces(count: usize) -> Vec<lar_core::AbstractTrace> {
    let cfg = SimulatorConfig::parse(CHAIN, "chain").unwrap();
    let mut sim = HiddenDtmcSimulator::from_config(&cfg, 1).unwrap();
    let traces = sample_batch(&mut sim, count, 1).unwrap();
    let schema = traces.schema().clone();
    let preds = PredicateSet::new(vec![
        Predicate::parse("x >= 0.5", &schema).unwrap(),
        Predicate::parse("x >= 1.5", &schema).unwrap(),
    ])
    .unwrap();
    preds.abstract_trace_set(&traces).unwrap()
}

fn learner(c: &mut Criterion) {
    let mut group = c.benchmark_group("learner");
    for count in [1_000, 10_000] {
        let traces = abstract_traces(count);
        group.bench_with_input(BenchmarkId::new("aalergia", count), &traces, |b, t| {
            b.iter(|| aalergia(black_box(t), 2.2).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("select_model", count), &traces, |b, t| {
            b.iter(|| select_model(black_box(t), &LearnerConfig::default()).unwrap())
        });
    }
    group.finish();
}

/// Birth-death chain with absorbing ends; state `n - 1` is the target.
fn ladder(n: usize) -> Dtmc {
    let rows = (0..n)
        .map(|i| {
            if i == 0 || i + 1 == n {
                vec![(i, 1.0)]
            } else {
                vec![(i - 1, 0.45), (i, 0.1), (i + 1, 0.45)]
            }
        })
        .collect();
    let mut init = vec![0.0; n];
    init[n / 2] = 1.0;
    Dtmc::new((0..n).map(|i| i.to_string()).collect(), init, rows).unwrap()
}

fn reachability(c: &mut Criterion) {
    let mut group = c.benchmark_group("reach");
    for n in [100, 1000] {
        let d = ladder(n);
        let mut target = vec![false; n];
        target[n - 1] = true;
        group.bench_function(BenchmarkId::new("direct", n), |b| {
            b.iter(|| reach_probabilities(black_box(&d), &target, Solver::Direct).unwrap())
        });
        // Gauss-Seidel needs on the order of n^2 sweeps on this ladder, so
        // only the small instance is timed with it.
        if n <= 100 {
            group.bench_function(BenchmarkId::new("iterative", n), |b| {
                b.iter(|| reach_probabilities(black_box(&d), &target, Solver::ValueIteration).unwrap())
            });
        }
    }
    group.finish();
}

fn counterexamples(c: &mut Criterion) {
    let d = Dtmc::new(
        vec!["0".into(), "1".into()],
        vec![1.0, 0.0],
        vec![vec![(0, 0.998), (1, 0.002)], vec![(1, 1.0)]],
    )
    .unwrap();
    c.bench_function("counterexample/112 paths", |b| {
        b.iter(|| build_counterexample(black_box(&d), &[false, true], 0.2, 1_000_000).unwrap())
    });
}

criterion_group!(benches, learner, reachability, counterexamples);
criterion_main!(benches);
