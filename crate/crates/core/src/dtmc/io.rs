use std::fmt::Write as _;
use std::path::Path;

use super::Dtmc;
use crate::error::{LarError, Result};

const EMPTY_LABEL: &str = "-";

fn encode_label(label: &str) -> &str {
    if label.is_empty() {
        EMPTY_LABEL
    } else {
        label
    }
}

impl Dtmc {
    /// Explicit-state text form: one `state <id> <label> <initial>` line per
    /// state followed by one `trans <src> <dst> <prob>` line per transition.
    pub fn to_explicit_string(&self) -> String {
        let mut out = format!("# dtmc\nstates {}\n", self.num_states());
        for s in 0..self.num_states() {
            let _ = writeln!(out, "state {s} {} {}", encode_label(self.label(s)), self.initial()[s]);
        }
        for (s, t, p) in self.transitions() {
            let _ = writeln!(out, "trans {s} {t} {p}");
        }
        out
    }

    pub fn parse_explicit(text: &str, source_name: &str) -> Result<Dtmc> {
        let mut declared: Option<usize> = None;
        let mut labels: Vec<Option<String>> = Vec::new();
        let mut initial: Vec<f64> = Vec::new();
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
        let err = |line: usize, msg: String| LarError::parse(source_name, line, msg);

        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |idx: usize| -> Result<usize> {
                fields
                    .get(idx)
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| err(lineno, format!("expected a state index in `{line}`")))
            };
            let real = |idx: usize| -> Result<f64> {
                fields
                    .get(idx)
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| err(lineno, format!("expected a number in `{line}`")))
            };
            match fields[0] {
                "states" if fields.len() == 2 => {
                    let n = num(1)?;
                    declared = Some(n);
                    labels = vec![None; n];
                    initial = vec![0.0; n];
                    rows = vec![Vec::new(); n];
                }
                "state" if fields.len() == 4 => {
                    let n = declared.ok_or_else(|| err(lineno, "`state` before `states`".into()))?;
                    let s = num(1)?;
                    if s >= n {
                        return Err(err(lineno, format!("state {s} out of range")));
                    }
                    let label = if fields[2] == EMPTY_LABEL { "" } else { fields[2] };
                    labels[s] = Some(label.to_string());
                    initial[s] = real(3)?;
                }
                "trans" if fields.len() == 4 => {
                    let n = declared.ok_or_else(|| err(lineno, "`trans` before `states`".into()))?;
                    let (s, t) = (num(1)?, num(2)?);
                    if s >= n || t >= n {
                        return Err(err(lineno, format!("transition {s} -> {t} out of range")));
                    }
                    rows[s].push((t, real(3)?));
                }
                _ => return Err(err(lineno, format!("unrecognised line `{line}`"))),
            }
        }
        if declared.is_none() {
            return Err(err(0, "missing `states` line".into()));
        }
        let labels = labels
            .into_iter()
            .enumerate()
            .map(|(s, l)| l.ok_or_else(|| err(0, format!("state {s} has no `state` line"))))
            .collect::<Result<Vec<_>>>()?;
        Dtmc::new(labels, initial, rows)
    }

    pub fn load_explicit(path: impl AsRef<Path>) -> Result<Dtmc> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| LarError::io(path, e))?;
        Dtmc::parse_explicit(&text, &path.display().to_string())
    }

    /// Graphviz rendering. Transitions are labelled with their probability,
    /// initial states are fed by an invisible point node.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph dtmc {\n  rankdir=LR;\n  init [shape=point];\n");
        for s in 0..self.num_states() {
            let _ = writeln!(out, "  s{s} [label=\"{s}: {}\"];", encode_label(self.label(s)));
        }
        for (s, &p) in self.initial().iter().enumerate() {
            if p > 0.0 {
                let _ = writeln!(out, "  init -> s{s} [label=\"{p:.4}\"];");
            }
        }
        for (s, t, p) in self.transitions() {
            let _ = writeln!(out, "  s{s} -> s{t} [label=\"{p:.4}\"];");
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dtmc {
        Dtmc::new(
            vec!["".into(), "01".into(), "11".into()],
            vec![0.25, 0.75, 0.0],
            vec![
                vec![(1, 1.0 / 3.0), (2, 2.0 / 3.0)],
                vec![(0, 0.1), (1, 0.9)],
                vec![(2, 1.0)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn explicit_round_trip_is_exact() {
        let d = sample();
        let text = d.to_explicit_string();
        let back = Dtmc::parse_explicit(&text, "mem").unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn explicit_errors_carry_line_numbers() {
        let e = Dtmc::parse_explicit("states 1\nstate 0 a 1\ntrans 0 3 1\n", "m").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        assert!(Dtmc::parse_explicit("state 0 a 1\n", "m").is_err());
    }

    #[test]
    fn dot_mentions_every_transition() {
        let dot = sample().to_dot();
        assert!(dot.starts_with("digraph"));
        assert_eq!(dot.matches("->").count(), 2 + 5);
    }
}
