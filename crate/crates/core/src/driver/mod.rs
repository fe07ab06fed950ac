//! The learn-abstract-refine loop.

mod property;
mod report;

use std::time::{Duration, Instant};

use serde::Serialize;

pub use property::{parse_property, Property};
pub use report::{export_report, render_summary, ExportedFiles};

use crate::abstraction::PredicateSet;
use crate::counterexample::{build_counterexample, CexOutcome, Counterexample, DEFAULT_K_MAX};
use crate::dtmc::reach_probability;
use crate::error::{LarError, Result};
use crate::learner::{select_model, CandidateScore, LearnedDtmc, LearnerConfig};
use crate::refinement::{identify_spurious_transitions, refine, RefinementAttempt, RefinementOutcome, SvmConfig};
use crate::sprt::{test_counterexample, Sprt, SprtConfig, SprtTranscript, SprtVerdict};
use crate::trace::{Sampler, TraceSet};

/// Statement attached to every verified result.
pub const VERIFIED_CAVEAT: &str = "the property is verified if the model is correct";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LarConfig {
    pub learner: LearnerConfig,
    pub sprt: SprtConfig,
    pub svm: SvmConfig,
    pub max_iterations: usize,
    pub k_max: usize,
    pub seed: u64,
}

impl Default for LarConfig {
    fn default() -> Self {
        LarConfig {
            learner: LearnerConfig::default(),
            sprt: SprtConfig::default(),
            svm: SvmConfig::default(),
            max_iterations: 50,
            k_max: DEFAULT_K_MAX,
            seed: 0,
        }
    }
}

impl LarConfig {
    pub fn validate(&self) -> Result<()> {
        self.learner.candidates()?;
        self.sprt.validate()?;
        if self.max_iterations == 0 {
            return Err(LarError::Config("max_iterations must be at least 1".into()));
        }
        if self.k_max == 0 {
            return Err(LarError::Config("k_max must be at least 1".into()));
        }
        if !(self.svm.accuracy_threshold > 0.0 && self.svm.accuracy_threshold <= 1.0) {
            return Err(LarError::Config("accuracy threshold must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Wall-clock time per phase of one iteration. Kept out of the JSON report
/// so that reports are reproducible byte for byte.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub learn: Duration,
    pub check: Duration,
    pub counterexample: Duration,
    pub sprt: Duration,
    pub refine: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTelemetry {
    pub iteration: usize,
    pub predicates: Vec<String>,
    pub traces: usize,
    pub states: usize,
    pub transitions: usize,
    pub epsilon: f64,
    pub bic: f64,
    pub candidates: Vec<CandidateScore>,
    pub reach_probability: f64,
    pub counterexample_paths: Option<usize>,
    pub counterexample_mass: Option<f64>,
    pub sprt_verdict: Option<SprtVerdict>,
    pub sprt_samples: Option<usize>,
    pub refinement: Vec<RefinementAttempt>,
    pub predicate_added: Option<String>,
    #[serde(skip)]
    pub timings: PhaseTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Verdict {
    Verified {
        probability: f64,
        caveat: String,
    },
    Violated {
        probability: f64,
        counterexample_mass: f64,
        counterexample_paths: usize,
        alpha: f64,
        beta: f64,
        delta: f64,
    },
    Inconclusive {
        reason: String,
    },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Verified { .. } => "verified",
            Verdict::Violated { .. } => "violated",
            Verdict::Inconclusive { .. } => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LarReport {
    pub property: String,
    pub verdict: Verdict,
    pub predicates: PredicateSet,
    pub iterations: Vec<IterationTelemetry>,
    pub total_traces: usize,
    pub config: LarConfig,
    #[serde(skip)]
    pub model: Option<LearnedDtmc>,
    pub counterexample: Option<Counterexample>,
    pub sprt: Option<SprtTranscript>,
}

/// Runs the loop: abstract the traces, learn a model, check it, and on a
/// violation test the counterexample against the system; spurious
/// counterexamples trigger refinement with one new predicate.
pub fn lar<S: Sampler + ?Sized>(
    traces: TraceSet,
    property: &Property,
    config: &LarConfig,
    sampler: &mut S,
) -> Result<LarReport> {
    config.validate()?;
    if traces.is_empty() {
        return Err(LarError::Config("no input traces".into()));
    }
    if sampler.schema() != traces.schema() {
        return Err(LarError::Schema(
            "sampler and trace file use different variables".into(),
        ));
    }
    let r = property.threshold;
    let target_spec = property.target();
    let mut predicates = PredicateSet::new(property.atoms.clone())?;
    let mut pi = traces;
    let mut iterations = Vec::new();

    let finish = |verdict, predicates, iterations, pi: &TraceSet, model, cex, sprt| LarReport {
        property: property.to_string(),
        verdict,
        predicates,
        iterations,
        total_traces: pi.len(),
        config: config.clone(),
        model,
        counterexample: cex,
        sprt,
    };

    for iteration in 1..=config.max_iterations {
        let mut timings = PhaseTimings::default();
        let clock = Instant::now();
        let abstract_traces = predicates.abstract_trace_set(&pi)?;
        let selection = select_model(&abstract_traces, &config.learner)?;
        timings.learn = clock.elapsed();
        let model = selection.model;
        let best = selection
            .candidates
            .iter()
            .find(|c| c.epsilon == selection.epsilon)
            .expect("selected candidate is listed");

        let clock = Instant::now();
        let target = target_spec.resolve(model.dtmc());
        let probability = reach_probability(model.dtmc(), &target)?;
        timings.check = clock.elapsed();
        log::info!(
            "iteration {iteration}: {} predicates, {} states, P(F bad) = {probability}",
            predicates.len(),
            model.num_states()
        );

        let mut tele = IterationTelemetry {
            iteration,
            predicates: predicates.predicates().iter().map(ToString::to_string).collect(),
            traces: pi.len(),
            states: model.num_states(),
            transitions: model.dtmc().num_transitions(),
            epsilon: selection.epsilon,
            bic: best.bic,
            candidates: selection.candidates.clone(),
            reach_probability: probability,
            counterexample_paths: None,
            counterexample_mass: None,
            sprt_verdict: None,
            sprt_samples: None,
            refinement: Vec::new(),
            predicate_added: None,
            timings,
        };

        if probability <= r {
            iterations.push(tele);
            let verdict = Verdict::Verified {
                probability,
                caveat: VERIFIED_CAVEAT.into(),
            };
            return Ok(finish(verdict, predicates, iterations, &pi, Some(model), None, None));
        }

        let clock = Instant::now();
        let outcome = build_counterexample(model.dtmc(), &target, r, config.k_max)?;
        tele.timings.counterexample = clock.elapsed();
        let cex = match outcome {
            CexOutcome::Found(c) => c,
            CexOutcome::Exhausted { paths, mass } => {
                iterations.push(tele);
                let reason = format!(
                    "all {paths} target paths carry only {mass} <= {r}, contradicting P(F bad) = {probability}"
                );
                return Ok(finish(
                    Verdict::Inconclusive { reason },
                    predicates,
                    iterations,
                    &pi,
                    Some(model),
                    None,
                    None,
                ));
            }
            CexOutcome::Truncated { paths, mass } => {
                iterations.push(tele);
                let reason = format!("counterexample truncated at {paths} paths with mass {mass} <= {r}");
                return Ok(finish(
                    Verdict::Inconclusive { reason },
                    predicates,
                    iterations,
                    &pi,
                    Some(model),
                    None,
                    None,
                ));
            }
        };
        tele.counterexample_paths = Some(cex.len());
        tele.counterexample_mass = Some(cex.mass());

        if let Err(e) = Sprt::new(r, &config.sprt) {
            iterations.push(tele);
            let reason = format!("cannot test the counterexample: {e}");
            return Ok(finish(
                Verdict::Inconclusive { reason },
                predicates,
                iterations,
                &pi,
                Some(model),
                Some(cex),
                None,
            ));
        }
        let clock = Instant::now();
        let transcript = test_counterexample(&cex, &model, &predicates, sampler, r, &config.sprt)?;
        tele.timings.sprt = clock.elapsed();
        tele.sprt_verdict = Some(transcript.verdict);
        tele.sprt_samples = Some(transcript.samples);
        pi.extend(transcript.traces.clone())?;

        match transcript.verdict {
            SprtVerdict::AcceptH0 => {
                iterations.push(tele);
                let verdict = Verdict::Violated {
                    probability,
                    counterexample_mass: cex.mass(),
                    counterexample_paths: cex.len(),
                    alpha: transcript.alpha,
                    beta: transcript.beta,
                    delta: transcript.delta,
                };
                return Ok(finish(
                    verdict,
                    predicates,
                    iterations,
                    &pi,
                    Some(model),
                    Some(cex),
                    Some(transcript),
                ));
            }
            SprtVerdict::Inconclusive => {
                iterations.push(tele);
                let reason = format!("hypothesis test undecided after {} samples", transcript.samples);
                return Ok(finish(
                    Verdict::Inconclusive { reason },
                    predicates,
                    iterations,
                    &pi,
                    Some(model),
                    Some(cex),
                    Some(transcript),
                ));
            }
            SprtVerdict::AcceptH1 => {}
        }

        let clock = Instant::now();
        let enlarged = predicates.abstract_trace_set(&pi)?;
        let ranked = identify_spurious_transitions(&model, &enlarged);
        let refined = refine(&model, &pi, &predicates, &ranked, &config.svm)?;
        tele.timings.refine = clock.elapsed();
        tele.refinement = refined.attempts().to_vec();
        match refined {
            RefinementOutcome::Refined { predicate, .. } => {
                log::info!("iteration {iteration}: adding predicate {predicate}");
                tele.predicate_added = Some(predicate.to_string());
                predicates.insert(predicate);
                iterations.push(tele);
            }
            RefinementOutcome::Failure { .. } => {
                iterations.push(tele);
                let reason =
                    "verification is unsuccessful: no spurious transition yields a new linear predicate".to_string();
                return Ok(finish(
                    Verdict::Inconclusive { reason },
                    predicates,
                    iterations,
                    &pi,
                    Some(model),
                    Some(cex),
                    Some(transcript),
                ));
            }
        }
    }
    let reason = format!("no verdict within {} iterations", config.max_iterations);
    Ok(finish(
        Verdict::Inconclusive { reason },
        predicates,
        iterations,
        &pi,
        None,
        None,
        None,
    ))
}

/// Visits per abstract state needed so that every estimated transition
/// probability of an `m`-state model is within `epsilon` with confidence
/// `1 - delta`: the least `n` with `2 m^2 exp(-2 n epsilon^2) <= delta`.
pub fn sample_bound(m: u64, epsilon: f64, delta: f64) -> Result<u64> {
    if m == 0 {
        return Err(LarError::Config("state count must be at least 1".into()));
    }
    for (name, v) in [("epsilon", epsilon), ("delta", delta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(LarError::Config(format!("{name} must lie in (0, 1), got {v}")));
        }
    }
    let m = m as f64;
    let n = ((2.0 * m * m / delta).ln() / (2.0 * epsilon * epsilon)).ceil();
    Ok(n as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_bound_values() {
        assert_eq!(sample_bound(10, 0.05, 0.05).unwrap(), 1659);
        assert_eq!(sample_bound(10, 0.1, 0.05).unwrap(), 415);
        let expected = ((2.0f64 / 0.1).ln() / (2.0 * 0.2 * 0.2)).ceil() as u64;
        assert_eq!(sample_bound(1, 0.2, 0.1).unwrap(), expected);
        assert!(sample_bound(0, 0.1, 0.1).is_err());
        assert!(sample_bound(3, 1.0, 0.1).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(LarConfig::default().validate().is_ok());
        let bad = LarConfig {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
