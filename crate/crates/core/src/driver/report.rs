use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{LarReport, Verdict};
use crate::error::{LarError, Result};

/// Paths written by [`export_report`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExportedFiles {
    pub files: Vec<PathBuf>,
}

fn secs(d: std::time::Duration) -> f64 {
    d.as_secs_f64()
}

/// Human-readable summary, including per-phase timings.
pub fn render_summary(report: &LarReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "property: {}", report.property);
    let _ = writeln!(out, "verdict: {}", report.verdict.name());
    match &report.verdict {
        Verdict::Verified { probability, caveat } => {
            let _ = writeln!(out, "model probability: {probability}");
            let _ = writeln!(out, "note: {caveat}");
        }
        Verdict::Violated {
            probability,
            counterexample_mass,
            counterexample_paths,
            alpha,
            beta,
            delta,
        } => {
            let _ = writeln!(out, "model probability: {probability}");
            let _ = writeln!(
                out,
                "counterexample: {counterexample_paths} paths, mass {counterexample_mass}"
            );
            let _ = writeln!(out, "test parameters: alpha {alpha}, beta {beta}, delta {delta}");
        }
        Verdict::Inconclusive { reason } => {
            let _ = writeln!(out, "reason: {reason}");
        }
    }
    let _ = writeln!(out, "traces used: {}", report.total_traces);
    let _ = writeln!(out, "predicates:");
    for p in report.predicates.predicates() {
        let _ = writeln!(out, "  {p}");
    }
    let _ = writeln!(out, "iterations: {}", report.iterations.len());
    for it in &report.iterations {
        let _ = write!(
            out,
            "  #{} states {} eps {} P {:.6}",
            it.iteration, it.states, it.epsilon, it.reach_probability
        );
        if let (Some(n), Some(m)) = (it.counterexample_paths, it.counterexample_mass) {
            let _ = write!(out, " cex {n}/{m:.6}");
        }
        if let (Some(v), Some(n)) = (it.sprt_verdict, it.sprt_samples) {
            let _ = write!(out, " sprt {v:?} after {n}");
        }
        if let Some(p) = &it.predicate_added {
            let _ = write!(out, " +[{p}]");
        }
        let t = &it.timings;
        let _ = writeln!(
            out,
            " (learn {:.3}s check {:.3}s cex {:.3}s sprt {:.3}s refine {:.3}s)",
            secs(t.learn),
            secs(t.check),
            secs(t.counterexample),
            secs(t.sprt),
            secs(t.refine)
        );
    }
    out
}

fn refinement_log(report: &LarReport) -> String {
    let mut out = String::from("# iteration source dest p_diff positives negatives accuracy outcome predicate\n");
    for it in &report.iterations {
        for a in &it.refinement {
            let acc = a.accuracy.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{}\t{}\t{}\t{}\t{}",
                it.iteration,
                a.source,
                a.dest,
                a.p_diff,
                a.positives,
                a.negatives,
                acc,
                a.outcome,
                a.predicate.as_deref().unwrap_or("-")
            );
        }
    }
    out
}

/// Writes the report artifacts into `dir`, creating it if needed.
///
/// `summary.txt`, `report.json` and `refinement.log` are always written.
/// `model.dtmc` and `model.dot` need a final model, `counterexample.txt`
/// a counterexample and `sprt.txt` a hypothesis test transcript.
pub fn export_report(report: &LarReport, dir: impl AsRef<Path>) -> Result<ExportedFiles> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| LarError::io(dir, e))?;
    let mut written = ExportedFiles::default();
    let mut put = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| LarError::io(&path, e))?;
        written.files.push(path);
        Ok(())
    };
    put("summary.txt", render_summary(report))?;
    put("report.json", serde_json::to_string_pretty(report)? + "\n")?;
    put("refinement.log", refinement_log(report))?;
    if let Some(model) = &report.model {
        put("model.dtmc", model.dtmc().to_explicit_string())?;
        put("model.dot", model.dtmc().to_dot())?;
        if let Some(cex) = &report.counterexample {
            put("counterexample.txt", cex.to_text(model.dtmc()))?;
        }
    }
    if let Some(t) = &report.sprt {
        put("sprt.txt", t.to_text())?;
    }
    Ok(written)
}
