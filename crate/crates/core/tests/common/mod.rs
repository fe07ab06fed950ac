#![allow(dead_code)]

use std::path::PathBuf;

use lar_core::dtmc::reach_probability;
use lar_core::trace::{sample_batch, HiddenDtmcSimulator, SimulatorConfig};
use lar_core::{lar, parse_property, LarConfig, LarReport, Property, TraceSet};

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn simulator(name: &str, seed: u64) -> HiddenDtmcSimulator {
    let cfg = SimulatorConfig::load(data(name)).unwrap();
    HiddenDtmcSimulator::from_config(&cfg, seed).unwrap()
}

/// Exact probability of eventually satisfying `bad` in the hidden model.
pub fn ground_truth(sim: &HiddenDtmcSimulator, bad: impl FnMut(&lar_core::ConcreteState) -> bool) -> f64 {
    reach_probability(sim.model(), &sim.states_where(bad)).unwrap()
}

pub fn initial_traces(sim: &HiddenDtmcSimulator, seed: u64, count: usize) -> TraceSet {
    sample_batch(&mut sim.reseeded(seed, 0), count, 1).unwrap()
}

/// One full run with seed-derived initial traces and test samples.
pub fn run(name: &str, property: &str, count: usize, seed: u64) -> (LarReport, Property) {
    let sim = simulator(name, seed);
    let traces = initial_traces(&sim, seed, count);
    let property = parse_property(property, traces.schema()).unwrap();
    let config = LarConfig {
        seed,
        ..LarConfig::default()
    };
    let report = lar(traces, &property, &config, &mut sim.reseeded(seed, 1)).unwrap();
    (report, property)
}
