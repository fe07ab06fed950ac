//! Concrete traces: variable schemas, states, trace sets and the CSV-like
//! trace file format.
//!
//! A trace file starts with a header of comma-separated variable names
//! (a `:bool` suffix marks a boolean column), followed by one state per
//! line. Blank lines separate traces. Lines starting with `#` are ignored.

mod sampler;

pub use sampler::{sample_batch, CommandSampler, HiddenDtmcSimulator, Sampler, SimulatorConfig};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LarError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Boolean,
    Integer,
    Real,
}

/// Ordered, fixed list of observable variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSchema {
    names: Vec<String>,
    kinds: Vec<VarKind>,
}

impl VariableSchema {
    pub fn new(names: Vec<String>, kinds: Vec<VarKind>) -> Result<Self> {
        if names.len() != kinds.len() {
            return Err(LarError::Schema(format!(
                "{} names but {} kinds",
                names.len(),
                kinds.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(LarError::Schema("empty variable name".into()));
            }
            if !is_identifier(name) {
                return Err(LarError::Schema(format!("`{name}` is not an identifier")));
            }
            if !seen.insert(name.as_str()) {
                return Err(LarError::Schema(format!("duplicate variable `{name}`")));
            }
        }
        Ok(VariableSchema { names, kinds })
    }

    /// Schema where every variable is real-valued.
    pub fn reals<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let names: Vec<String> = names.iter().map(|n| n.as_ref().to_string()).collect();
        let kinds = vec![VarKind::Real; names.len()];
        VariableSchema::new(names, kinds)
    }

    pub fn arity(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[VarKind] {
        &self.kinds
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn header(&self) -> String {
        self.names
            .iter()
            .zip(&self.kinds)
            .map(|(n, k)| match k {
                VarKind::Boolean => format!("{n}:bool"),
                _ => n.clone(),
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// One valuation of every schema variable. Booleans are stored as 0/1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteState(pub Vec<f64>);

impl ConcreteState {
    pub fn new(values: Vec<f64>) -> Self {
        ConcreteState(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bitwise key, used to deduplicate states.
    pub(crate) fn key(&self) -> Vec<u64> {
        self.0.iter().map(|v| v.to_bits()).collect()
    }

    fn conforms_to(&self, schema: &VariableSchema) -> std::result::Result<(), String> {
        if self.0.len() != schema.arity() {
            return Err(format!(
                "state has {} values, schema has {} variables",
                self.0.len(),
                schema.arity()
            ));
        }
        for ((v, kind), name) in self.0.iter().zip(schema.kinds()).zip(schema.names()) {
            if !v.is_finite() {
                return Err(format!("non-finite value for `{name}`"));
            }
            match kind {
                VarKind::Boolean if *v != 0.0 && *v != 1.0 => {
                    return Err(format!("boolean `{name}` has value {v}"));
                }
                VarKind::Integer if v.fract() != 0.0 => {
                    return Err(format!("integer `{name}` has value {v}"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// A non-empty sequence of concrete states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteTrace {
    states: Vec<ConcreteState>,
}

impl ConcreteTrace {
    pub fn new(states: Vec<ConcreteState>) -> Result<Self> {
        if states.is_empty() {
            return Err(LarError::Schema("a trace must contain at least one state".into()));
        }
        Ok(ConcreteTrace { states })
    }

    pub fn states(&self) -> &[ConcreteState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Traces sharing one schema. Immutable once built apart from `extend`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSet {
    schema: VariableSchema,
    traces: Vec<ConcreteTrace>,
}

impl TraceSet {
    pub fn new(schema: VariableSchema, traces: Vec<ConcreteTrace>) -> Result<Self> {
        for (i, trace) in traces.iter().enumerate() {
            for (j, state) in trace.states().iter().enumerate() {
                state
                    .conforms_to(&schema)
                    .map_err(|m| LarError::Schema(format!("trace {i}, state {j}: {m}")))?;
            }
        }
        Ok(TraceSet { schema, traces })
    }

    pub fn empty(schema: VariableSchema) -> Self {
        TraceSet {
            schema,
            traces: Vec::new(),
        }
    }

    pub fn schema(&self) -> &VariableSchema {
        &self.schema
    }

    pub fn traces(&self) -> &[ConcreteTrace] {
        &self.traces
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn push(&mut self, trace: ConcreteTrace) -> Result<()> {
        for (j, state) in trace.states().iter().enumerate() {
            state
                .conforms_to(&self.schema)
                .map_err(|m| LarError::Schema(format!("state {j}: {m}")))?;
        }
        self.traces.push(trace);
        Ok(())
    }

    /// Appends every trace of `other`, which must share this schema.
    pub fn extend(&mut self, other: TraceSet) -> Result<()> {
        if other.schema.names() != self.schema.names() {
            return Err(LarError::Schema(
                "cannot merge trace sets with different variables".into(),
            ));
        }
        self.traces.extend(other.traces);
        Ok(())
    }

    pub fn total_states(&self) -> usize {
        self.traces.iter().map(ConcreteTrace::len).sum()
    }

    /// Coverage and length statistics. Whether the data is adequate is left to
    /// the caller.
    pub fn stats(&self) -> TraceStats {
        let mut distinct = BTreeSet::new();
        let mut lengths = BTreeMap::new();
        for trace in &self.traces {
            *lengths.entry(trace.len()).or_insert(0usize) += 1;
            for s in trace.states() {
                distinct.insert(s.key());
            }
        }
        TraceStats {
            traces: self.traces.len(),
            states: self.total_states(),
            distinct_states: distinct.len(),
            length_histogram: lengths,
        }
    }

    /// Renders the set in the trace file format.
    pub fn to_file_string(&self) -> String {
        let mut out = self.schema.header();
        out.push('\n');
        for (i, trace) in self.traces.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            for state in trace.states() {
                let row: Vec<String> = state.values().iter().map(|v| format!("{v}")).collect();
                let _ = writeln!(out, "{}", row.join(","));
            }
        }
        out
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_file_string()).map_err(|e| LarError::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceStats {
    pub traces: usize,
    pub states: usize,
    pub distinct_states: usize,
    pub length_histogram: BTreeMap<usize, usize>,
}

/// Reads a trace file from disk.
pub fn load_traces(path: impl AsRef<Path>) -> Result<TraceSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| LarError::io(path, e))?;
    parse_traces(&text, &path.display().to_string())
}

/// Parses the trace file format; `source_name` is used in error messages.
pub fn parse_traces(text: &str, source_name: &str) -> Result<TraceSet> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    let (header_line, header) = loop {
        match lines.next() {
            None => return Err(LarError::parse(source_name, 1, "empty file")),
            Some((_, l)) if l.starts_with('#') => continue,
            Some((n, "")) => return Err(LarError::parse(source_name, n, "malformed header: blank line")),
            Some((n, l)) => break (n, l),
        }
    };

    let mut names = Vec::new();
    let mut declared_bool = Vec::new();
    for cell in header.split(',') {
        let cell = cell.trim();
        let (name, is_bool) = match cell.strip_suffix(":bool") {
            Some(n) => (n.trim(), true),
            None => (cell, false),
        };
        if !is_identifier(name) {
            return Err(LarError::parse(
                source_name,
                header_line,
                format!("malformed header: `{cell}` is not a variable name"),
            ));
        }
        names.push(name.to_string());
        declared_bool.push(is_bool);
    }
    let arity = names.len();

    let mut traces: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut current: Vec<Vec<f64>> = Vec::new();
    for (n, line) in lines {
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !current.is_empty() {
                traces.push(std::mem::take(&mut current));
            }
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != arity {
            return Err(LarError::parse(
                source_name,
                n,
                format!("ragged row at line {n}: {} cells, expected {arity}", cells.len()),
            ));
        }
        let mut row = Vec::with_capacity(arity);
        for cell in cells {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => return Err(LarError::parse(source_name, n, format!("non-numeric cell `{cell}`"))),
            }
        }
        current.push(row);
    }
    if !current.is_empty() {
        traces.push(current);
    }
    if traces.is_empty() {
        return Err(LarError::parse(source_name, header_line, "file contains no traces"));
    }

    let mut kinds = Vec::with_capacity(arity);
    for (col, is_bool) in declared_bool.iter().enumerate() {
        let mut all_binary = true;
        let mut all_integral = true;
        for v in traces.iter().flatten().map(|row| row[col]) {
            all_binary &= v == 0.0 || v == 1.0;
            all_integral &= v.fract() == 0.0;
        }
        let kind = if *is_bool {
            if !all_binary {
                return Err(LarError::parse(
                    source_name,
                    header_line,
                    format!("column `{}` is declared boolean but holds non-0/1 values", names[col]),
                ));
            }
            VarKind::Boolean
        } else if all_integral {
            VarKind::Integer
        } else {
            VarKind::Real
        };
        kinds.push(kind);
    }

    let schema = VariableSchema::new(names, kinds)
        .map_err(|e| LarError::parse(source_name, header_line, format!("malformed header: {e}")))?;
    let traces = traces
        .into_iter()
        .map(|rows| ConcreteTrace {
            states: rows.into_iter().map(ConcreteState).collect(),
        })
        .collect();
    Ok(TraceSet { schema, traces })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_blank_line_separated_traces() {
        let set = parse_traces("x,y\n0,1\n1,1\n\n0,0\n", "t").unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.traces()[0].len(), 2);
        assert_eq!(set.traces()[1].len(), 1);
        assert_eq!(set.schema().names(), &["x", "y"]);
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = parse_traces("x,y\n0,1\n1,1,1\n", "t").unwrap_err();
        assert!(err.to_string().contains("ragged row at line 3"), "{err}");
    }

    #[test]
    fn non_numeric_and_empty_inputs() {
        let err = parse_traces("x\n0\nabc\n", "t").unwrap_err();
        assert!(matches!(err, LarError::Parse { line: 3, .. }), "{err}");
        assert!(parse_traces("", "t").is_err());
        assert!(parse_traces("x\n", "t").is_err());
        assert!(parse_traces("x,,y\n1,2,3\n", "t").is_err());
    }

    #[test]
    fn kind_inference() {
        let set = parse_traces("a:bool,b,c,d\n0,1,0.5,1\n1,2,1,0\n", "t").unwrap();
        assert_eq!(
            set.schema().kinds(),
            &[VarKind::Boolean, VarKind::Integer, VarKind::Real, VarKind::Integer]
        );
        assert!(parse_traces("a:bool\n2\n", "t").is_err());
    }

    #[test]
    fn serialization_reparses() {
        let text = "flag:bool,level\n0,1.5\n1,2\n\n1,-3\n";
        let set = parse_traces(text, "t").unwrap();
        assert_eq!(set.to_file_string(), text);
        assert_eq!(parse_traces(&set.to_file_string(), "t").unwrap(), set);
    }

    #[test]
    fn rejects_empty_trace_and_bad_schema() {
        assert!(ConcreteTrace::new(vec![]).is_err());
        assert!(VariableSchema::reals(&["x", "x"]).is_err());
        assert!(VariableSchema::reals(&[""]).is_err());
    }

    #[test]
    fn stats_count_coverage() {
        let set = parse_traces("x\n0\n1\n\n0\n", "t").unwrap();
        let stats = set.stats();
        assert_eq!(stats.distinct_states, 2);
        assert_eq!(stats.length_histogram.get(&2), Some(&1));
        assert_eq!(stats.length_histogram.get(&1), Some(&1));
    }
}
