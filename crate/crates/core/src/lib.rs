//! Learn-abstract-refine verification of black-box stochastic systems.

pub mod abstraction;
pub mod counterexample;
pub mod driver;
pub mod dtmc;
pub mod error;
pub mod learner;
pub mod refinement;
pub mod sprt;
pub mod trace;

pub use abstraction::{AbstractState, AbstractTrace, Predicate, PredicateSet, Relation};
pub use driver::{export_report, lar, parse_property, sample_bound, LarConfig, LarReport, Property, Verdict};
pub use dtmc::{CheckResult, Dtmc, ReachQuery, TargetSpec};
pub use error::{LarError, Result};
pub use learner::{aalergia, select_model, LearnedDtmc, LearnerConfig, PrefixTree};
pub use trace::{load_traces, parse_traces, ConcreteState, ConcreteTrace, Sampler, TraceSet, VarKind, VariableSchema};
