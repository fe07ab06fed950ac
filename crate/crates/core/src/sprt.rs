//! Sequential probability ratio test deciding whether a counterexample is
//! spurious.

use std::fmt::Write as _;

use serde::Serialize;

use crate::abstraction::PredicateSet;
use crate::counterexample::{Counterexample, Membership};
use crate::error::{LarError, Result};
use crate::learner::LearnedDtmc;
use crate::trace::{Sampler, TraceSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SprtConfig {
    /// Bound on the probability of wrongly accepting H0.
    pub alpha: f64,
    /// Bound on the probability of wrongly accepting H1.
    pub beta: f64,
    /// Half-width of the indifference region around `r`.
    pub delta: f64,
    pub max_samples: usize,
}

impl Default for SprtConfig {
    fn default() -> Self {
        SprtConfig {
            alpha: 0.05,
            beta: 0.05,
            delta: 0.05,
            max_samples: 100_000,
        }
    }
}

impl SprtConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v < 0.5) {
                return Err(LarError::Config(format!("{name} must lie in (0, 0.5), got {v}")));
            }
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(LarError::Config(format!("delta must be positive, got {}", self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SprtVerdict {
    /// The counterexample mass is at least `r + delta`: not spurious.
    AcceptH0,
    /// The mass is at most `r - delta`: spurious.
    AcceptH1,
    Inconclusive,
}

/// Wald's test of `H0: p >= r + delta` against `H1: p <= r - delta`,
/// tracked in log space.
#[derive(Debug, Clone)]
pub struct Sprt {
    p0: f64,
    p1: f64,
    delta: f64,
    upper: f64,
    lower: f64,
    on_success: f64,
    on_failure: f64,
    n: usize,
    successes: usize,
    log_ratio: f64,
    verdict: Option<SprtVerdict>,
}

impl Sprt {
    /// Sets up the test around threshold `r`. `delta` is shrunk to
    /// `min(delta, r/2, (1-r)/2)` when the indifference region would leave
    /// `[0, 1]`.
    pub fn new(r: f64, config: &SprtConfig) -> Result<Sprt> {
        config.validate()?;
        if !(0.0..=1.0).contains(&r) {
            return Err(LarError::Config(format!("threshold {r} outside [0, 1]")));
        }
        let mut delta = config.delta;
        if r - delta <= 0.0 || r + delta >= 1.0 {
            delta = delta.min(r / 2.0).min((1.0 - r) / 2.0);
            log::warn!("indifference half-width reduced from {} to {delta}", config.delta);
        }
        let (p0, p1) = (r - delta, r + delta);
        if p0 <= 0.0 || p1 >= 1.0 {
            return Err(LarError::Config(format!(
                "degenerate test: p0 = {p0}, p1 = {p1} (threshold {r} leaves no room)"
            )));
        }
        Ok(Sprt {
            p0,
            p1,
            delta,
            upper: ((1.0 - config.beta) / config.alpha).ln(),
            lower: (config.beta / (1.0 - config.alpha)).ln(),
            on_success: (p1 / p0).ln(),
            on_failure: ((1.0 - p1) / (1.0 - p0)).ln(),
            n: 0,
            successes: 0,
            log_ratio: 0.0,
            verdict: None,
        })
    }

    /// Records one Bernoulli outcome and returns the verdict once reached.
    /// Further calls after a verdict leave the state untouched.
    pub fn step(&mut self, success: bool) -> Option<SprtVerdict> {
        if self.verdict.is_some() {
            return self.verdict;
        }
        self.n += 1;
        if success {
            self.successes += 1;
            self.log_ratio += self.on_success;
        } else {
            self.log_ratio += self.on_failure;
        }
        if self.log_ratio >= self.upper {
            self.verdict = Some(SprtVerdict::AcceptH0);
        } else if self.log_ratio <= self.lower {
            self.verdict = Some(SprtVerdict::AcceptH1);
        }
        self.verdict
    }

    pub fn samples(&self) -> usize {
        self.n
    }

    pub fn successes(&self) -> usize {
        self.successes
    }

    pub fn log_ratio(&self) -> f64 {
        self.log_ratio
    }

    pub fn verdict(&self) -> Option<SprtVerdict> {
        self.verdict
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.p0, self.p1)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleRecord {
    pub index: usize,
    pub success: bool,
    pub log_ratio: f64,
}

/// Everything observed while testing one counterexample. The sampled
/// traces are kept so refinement can learn from them.
#[derive(Debug, Clone, Serialize)]
pub struct SprtTranscript {
    pub verdict: SprtVerdict,
    pub samples: usize,
    pub successes: usize,
    pub out_of_model: usize,
    pub p0: f64,
    pub p1: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub records: Vec<SampleRecord>,
    #[serde(skip)]
    pub traces: TraceSet,
}

impl SprtTranscript {
    pub fn to_text(&self) -> String {
        let mut out = String::from("# index success log_ratio\n");
        for r in &self.records {
            let _ = writeln!(out, "{} {} {:.6}", r.index, u8::from(r.success), r.log_ratio);
        }
        let _ = writeln!(
            out,
            "# verdict {:?} after {} samples ({} successes, {} out of model); p0 {} p1 {} alpha {} beta {} delta {}",
            self.verdict,
            self.samples,
            self.successes,
            self.out_of_model,
            self.p0,
            self.p1,
            self.alpha,
            self.beta,
            self.delta
        );
        out
    }
}

/// Samples traces from the system until the test decides whether the
/// concrete probability of `cex` exceeds `r`. Traces are at least as long as
/// the longest counterexample path.
pub fn test_counterexample<S: Sampler + ?Sized>(
    cex: &Counterexample,
    model: &LearnedDtmc,
    predicates: &PredicateSet,
    sampler: &mut S,
    r: f64,
    config: &SprtConfig,
) -> Result<SprtTranscript> {
    let mut sprt = Sprt::new(r, config)?;
    let min_length = cex.max_path_len().max(1);
    let mut traces = TraceSet::empty(sampler.schema().clone());
    let mut records = Vec::new();
    let mut out_of_model = 0;
    let mut verdict = SprtVerdict::Inconclusive;
    for index in 0..config.max_samples {
        let trace = sampler.next_trace(min_length).map_err(|e| match e {
            LarError::Sampler { message, .. } => LarError::Sampler { index, message },
            other => LarError::Sampler {
                index,
                message: other.to_string(),
            },
        })?;
        let membership = cex.classify(model, &predicates.abstract_trace(&trace));
        if membership == Membership::OutOfModel {
            out_of_model += 1;
        }
        let success = membership == Membership::Member;
        traces.push(trace)?;
        let decided = sprt.step(success);
        records.push(SampleRecord {
            index,
            success,
            log_ratio: sprt.log_ratio(),
        });
        if let Some(v) = decided {
            verdict = v;
            break;
        }
    }
    let (p0, p1) = sprt.bounds();
    Ok(SprtTranscript {
        verdict,
        samples: sprt.samples(),
        successes: sprt.successes(),
        out_of_model,
        p0,
        p1,
        alpha: config.alpha,
        beta: config.beta,
        delta: sprt.delta(),
        records,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn paper() -> Sprt {
        Sprt::new(0.2, &SprtConfig::default()).unwrap()
    }

    #[test]
    fn six_successes_accept_h0() {
        let mut s = paper();
        for _ in 0..5 {
            assert_eq!(s.step(true), None);
        }
        assert_eq!(s.step(true), Some(SprtVerdict::AcceptH0));
        assert!((s.log_ratio().exp() - (5.0f64 / 3.0).powi(6)).abs() < 1e-9);
    }

    #[test]
    fn twenty_four_failures_accept_h1() {
        let mut s = paper();
        for _ in 0..23 {
            assert_eq!(s.step(false), None);
        }
        assert_eq!(s.step(false), Some(SprtVerdict::AcceptH1));
    }

    #[test]
    fn interior_point_has_no_verdict() {
        let mut s = paper();
        s.step(true);
        assert_eq!(s.step(false), None);
        let expected = (5.0f64 / 3.0) * (15.0 / 17.0);
        assert!((s.log_ratio().exp() - expected).abs() < 1e-12);
    }

    #[test]
    fn delta_clamping_and_degenerate_thresholds() {
        let s = Sprt::new(0.05, &SprtConfig::default()).unwrap();
        assert!((s.delta() - 0.025).abs() < 1e-15);
        assert!(Sprt::new(0.0, &SprtConfig::default()).is_err());
        assert!(Sprt::new(1.0, &SprtConfig::default()).is_err());
        let bad = SprtConfig {
            alpha: 0.5,
            ..Default::default()
        };
        assert!(Sprt::new(0.2, &bad).is_err());
    }

    fn run(p: f64, rng: &mut ChaCha8Rng) -> SprtVerdict {
        let mut s = paper();
        loop {
            if let Some(v) = s.step(rng.gen_bool(p)) {
                return v;
            }
        }
    }

    #[test]
    fn operating_characteristic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 500;
        let wrong_h1 = (0..trials)
            .filter(|_| run(0.3, &mut rng) == SprtVerdict::AcceptH1)
            .count();
        let wrong_h0 = (0..trials)
            .filter(|_| run(0.1, &mut rng) == SprtVerdict::AcceptH0)
            .count();
        assert!((wrong_h1 as f64 / trials as f64) <= 0.07, "{wrong_h1}");
        assert!((wrong_h0 as f64 / trials as f64) <= 0.07, "{wrong_h0}");
    }

    proptest! {
        #[test]
        fn log_ratio_matches_direct_product(outcomes in proptest::collection::vec(any::<bool>(), 1..200)) {
            let cfg = SprtConfig { alpha: 1e-300, beta: 1e-300, ..Default::default() };
            let mut s = Sprt::new(0.2, &cfg).unwrap();
            for &o in &outcomes {
                s.step(o);
            }
            let d = outcomes.iter().filter(|&&o| o).count() as i32;
            let n = outcomes.len() as i32;
            let direct = (0.25f64 / 0.15).powi(d) * (0.75f64 / 0.85).powi(n - d);
            prop_assert!((s.log_ratio() - direct.ln()).abs() < 1e-9);
        }

        #[test]
        fn extra_successes_never_flip_to_h1(outcomes in proptest::collection::vec(any::<bool>(), 1..60), flip in 0usize..60) {
            let decide = |seq: &[bool]| {
                let mut s = paper();
                seq.iter().find_map(|&o| s.step(o))
            };
            let mut better = outcomes.clone();
            let i = flip % better.len();
            better[i] = true;
            if decide(&outcomes) == Some(SprtVerdict::AcceptH0) {
                prop_assert_ne!(decide(&better), Some(SprtVerdict::AcceptH1));
            }
        }
    }
}
