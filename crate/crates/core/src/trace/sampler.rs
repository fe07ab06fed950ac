use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{parse_traces, ConcreteState, ConcreteTrace, TraceSet, VarKind, VariableSchema};
use crate::dtmc::Dtmc;
use crate::error::{LarError, Result};

/// Black-box access to the system under verification.
///
/// Implementations own their random state, so a sampler constructed with a
/// given seed yields the same sequence of traces on every run.
pub trait Sampler {
    fn schema(&self) -> &VariableSchema;

    /// Draws one trace with at least `min_length` states.
    fn next_trace(&mut self, min_length: usize) -> Result<ConcreteTrace>;
}

impl<S: Sampler + ?Sized> Sampler for &mut S {
    fn schema(&self) -> &VariableSchema {
        (**self).schema()
    }

    fn next_trace(&mut self, min_length: usize) -> Result<ConcreteTrace> {
        (**self).next_trace(min_length)
    }
}

impl<S: Sampler + ?Sized> Sampler for Box<S> {
    fn schema(&self) -> &VariableSchema {
        (**self).schema()
    }

    fn next_trace(&mut self, min_length: usize) -> Result<ConcreteTrace> {
        (**self).next_trace(min_length)
    }
}

/// Draws `count` traces, each at least `min_length` long.
pub fn sample_batch<S: Sampler + ?Sized>(sampler: &mut S, count: usize, min_length: usize) -> Result<TraceSet> {
    if count == 0 {
        return Err(LarError::Config("batch size must be positive".into()));
    }
    let min_length = min_length.max(1);
    let mut set = TraceSet::empty(sampler.schema().clone());
    for index in 0..count {
        let trace = sampler.next_trace(min_length).map_err(|e| match e {
            LarError::Sampler { message, .. } => LarError::Sampler { index, message },
            other => LarError::Sampler {
                index,
                message: other.to_string(),
            },
        })?;
        set.push(trace).map_err(|e| LarError::Sampler {
            index,
            message: e.to_string(),
        })?;
    }
    Ok(set)
}

/// Parsed simulator configuration file.
///
/// ```text
/// [vars]
/// obs, v1, v2:bool
/// [states]
/// s0, 0, 1, 0
/// s1, 2, 1, 1
/// [initial]
/// s0, 1
/// [transitions]
/// s0, s1, 0.5
/// s0, s0, 0.5
/// s1, s1, 1
/// [options]
/// max_length = 40
/// ```
#[derive(Debug, Clone)]
pub struct SimulatorConfig {
    pub schema: VariableSchema,
    pub state_ids: Vec<String>,
    pub valuations: Vec<ConcreteState>,
    pub initial: Vec<(usize, f64)>,
    pub transitions: Vec<(usize, usize, f64)>,
    pub max_length: usize,
}

const DEFAULT_MAX_LENGTH: usize = 1000;

impl SimulatorConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| LarError::io(path, e))?;
        SimulatorConfig::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let err = |line: usize, msg: String| LarError::parse(source_name, line, msg);
        let mut section = String::new();
        let mut schema: Option<VariableSchema> = None;
        let mut ids: BTreeMap<String, usize> = BTreeMap::new();
        let mut state_ids = Vec::new();
        let mut valuations = Vec::new();
        let mut initial = Vec::new();
        let mut transitions = Vec::new();
        let mut max_length = DEFAULT_MAX_LENGTH;

        for (n, raw) in text.lines().enumerate() {
            let n = n + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_ascii_lowercase();
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let number = |cell: &str| -> Result<f64> {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(n, format!("non-numeric value `{cell}`")))
            };
            let state = |cell: &str, ids: &BTreeMap<String, usize>| -> Result<usize> {
                ids.get(cell)
                    .copied()
                    .ok_or_else(|| err(n, format!("unknown state `{cell}`")))
            };
            match section.as_str() {
                "vars" => {
                    if schema.is_some() {
                        return Err(err(n, "variables declared twice".into()));
                    }
                    let mut names = Vec::new();
                    let mut kinds = Vec::new();
                    for cell in cells {
                        match cell.strip_suffix(":bool") {
                            Some(name) => {
                                names.push(name.trim().to_string());
                                kinds.push(VarKind::Boolean);
                            }
                            None => {
                                names.push(cell.to_string());
                                kinds.push(VarKind::Real);
                            }
                        }
                    }
                    schema = Some(VariableSchema::new(names, kinds).map_err(|e| err(n, e.to_string()))?);
                }
                "states" => {
                    let schema = schema
                        .as_ref()
                        .ok_or_else(|| err(n, "[vars] must precede [states]".into()))?;
                    if cells.len() != schema.arity() + 1 {
                        return Err(err(n, format!("state needs an id and {} values", schema.arity())));
                    }
                    let id = cells[0].to_string();
                    if ids.insert(id.clone(), state_ids.len()).is_some() {
                        return Err(err(n, format!("duplicate state `{id}`")));
                    }
                    let values = cells[1..].iter().map(|c| number(c)).collect::<Result<Vec<_>>>()?;
                    state_ids.push(id);
                    valuations.push(ConcreteState(values));
                }
                "initial" => {
                    if cells.len() != 2 {
                        return Err(err(n, "expected `id, prob`".into()));
                    }
                    initial.push((state(cells[0], &ids)?, number(cells[1])?));
                }
                "transitions" => {
                    if cells.len() != 3 {
                        return Err(err(n, "expected `src, dst, prob`".into()));
                    }
                    transitions.push((state(cells[0], &ids)?, state(cells[1], &ids)?, number(cells[2])?));
                }
                "options" => {
                    let (key, value) = line
                        .split_once('=')
                        .ok_or_else(|| err(n, "expected `key = value`".into()))?;
                    match key.trim() {
                        "max_length" => {
                            max_length = value
                                .trim()
                                .parse()
                                .map_err(|_| err(n, format!("bad max_length `{}`", value.trim())))?
                        }
                        other => return Err(err(n, format!("unknown option `{other}`"))),
                    }
                }
                "" => return Err(err(n, "content before the first section".into())),
                other => return Err(err(n, format!("unknown section [{other}]"))),
            }
        }

        let mut schema = schema.ok_or_else(|| err(1, "missing [vars] section".into()))?;
        if state_ids.is_empty() {
            return Err(err(1, "no states declared".into()));
        }
        // Refine real columns to integer where every valuation is integral.
        let kinds: Vec<VarKind> = schema
            .kinds()
            .iter()
            .enumerate()
            .map(|(col, k)| match k {
                VarKind::Real if valuations.iter().all(|v| v.0[col].fract() == 0.0) => VarKind::Integer,
                k => *k,
            })
            .collect();
        schema = VariableSchema::new(schema.names().to_vec(), kinds)?;
        for (id, v) in state_ids.iter().zip(&valuations) {
            v.conforms_to(&schema)
                .map_err(|m| err(1, format!("state `{id}`: {m}")))?;
        }
        Ok(SimulatorConfig {
            schema,
            state_ids,
            valuations,
            initial,
            transitions,
            max_length,
        })
    }

    /// The hidden chain as an explicit DTMC labelled by state id.
    pub fn to_dtmc(&self) -> Result<Dtmc> {
        let n = self.state_ids.len();
        let mut init = vec![0.0; n];
        for &(s, p) in &self.initial {
            init[s] += p;
        }
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for &(s, t, p) in &self.transitions {
            *rows[s].entry(t).or_insert(0.0) += p;
        }
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().filter(|&(_, p)| p > 0.0).collect())
            .collect();
        Dtmc::new(self.state_ids.clone(), init, rows)
    }
}

/// Ground-truth system: an explicit DTMC whose states carry full variable
/// valuations. Traces run until they are at least `min_length` long and sit
/// in an absorbing state, or until `max(min_length, max_length)` states.
#[derive(Debug, Clone)]
pub struct HiddenDtmcSimulator {
    schema: VariableSchema,
    model: Dtmc,
    valuations: Vec<ConcreteState>,
    max_length: usize,
    rng: ChaCha8Rng,
}

impl HiddenDtmcSimulator {
    pub fn new(
        schema: VariableSchema,
        model: Dtmc,
        valuations: Vec<ConcreteState>,
        max_length: usize,
        seed: u64,
    ) -> Result<Self> {
        if valuations.len() != model.num_states() {
            return Err(LarError::InvalidModel(format!(
                "{} valuations for {} states",
                valuations.len(),
                model.num_states()
            )));
        }
        for (i, v) in valuations.iter().enumerate() {
            v.conforms_to(&schema)
                .map_err(|m| LarError::InvalidModel(format!("state {i}: {m}")))?;
        }
        Ok(HiddenDtmcSimulator {
            schema,
            model,
            valuations,
            max_length: max_length.max(1),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn from_config(config: &SimulatorConfig, seed: u64) -> Result<Self> {
        HiddenDtmcSimulator::new(
            config.schema.clone(),
            config.to_dtmc()?,
            config.valuations.clone(),
            config.max_length,
            seed,
        )
    }

    /// Independent copy drawing from stream `stream` of `seed`.
    pub fn reseeded(&self, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        HiddenDtmcSimulator { rng, ..self.clone() }
    }

    pub fn model(&self) -> &Dtmc {
        &self.model
    }

    pub fn valuations(&self) -> &[ConcreteState] {
        &self.valuations
    }

    /// Hidden state indices whose valuation satisfies `pred`.
    pub fn states_where(&self, pred: impl FnMut(&ConcreteState) -> bool) -> Vec<bool> {
        self.valuations.iter().map(pred).collect()
    }

    /// Samples a run of hidden state indices.
    pub fn next_run(&mut self, min_length: usize) -> Vec<usize> {
        let min_length = min_length.max(1);
        let cap = min_length.max(self.max_length);
        let mut state = pick(&mut self.rng, self.model.initial().iter().copied().enumerate());
        let mut run = vec![state];
        while run.len() < cap {
            if run.len() >= min_length && self.model.is_absorbing(state) {
                break;
            }
            state = pick(&mut self.rng, self.model.successors(state).iter().copied());
            run.push(state);
        }
        run
    }
}

fn pick(rng: &mut ChaCha8Rng, weights: impl Iterator<Item = (usize, f64)>) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in weights {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

impl Sampler for HiddenDtmcSimulator {
    fn schema(&self) -> &VariableSchema {
        &self.schema
    }

    fn next_trace(&mut self, min_length: usize) -> Result<ConcreteTrace> {
        let run = self.next_run(min_length);
        ConcreteTrace::new(run.into_iter().map(|s| self.valuations[s].clone()).collect())
    }
}

/// Runs an external command per trace. The command receives the minimum
/// length as its last argument and must print one trace in the trace file
/// format on standard output.
#[derive(Debug, Clone)]
pub struct CommandSampler {
    program: String,
    args: Vec<String>,
    schema: VariableSchema,
}

impl CommandSampler {
    pub fn new(command_line: &str, schema: VariableSchema) -> Result<Self> {
        let mut parts = command_line.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| LarError::Config("empty sampler command".into()))?;
        Ok(CommandSampler {
            program,
            args: parts.collect(),
            schema,
        })
    }
}

impl Sampler for CommandSampler {
    fn schema(&self) -> &VariableSchema {
        &self.schema
    }

    fn next_trace(&mut self, min_length: usize) -> Result<ConcreteTrace> {
        let fail = |message: String| LarError::Sampler { index: 0, message };
        let output = Command::new(&self.program)
            .args(&self.args)
            .arg(min_length.to_string())
            .output()
            .map_err(|e| fail(format!("cannot run `{}`: {e}", self.program)))?;
        if !output.status.success() {
            return Err(fail(format!("`{}` exited with {}", self.program, output.status)));
        }
        let text = String::from_utf8_lossy(&output.stdout);
        let set = parse_traces(&text, &self.program).map_err(|e| fail(e.to_string()))?;
        if set.schema().names() != self.schema.names() {
            return Err(fail(format!(
                "sampler printed variables {:?}, expected {:?}",
                set.schema().names(),
                self.schema.names()
            )));
        }
        let trace = set
            .traces
            .into_iter()
            .next()
            .expect("parse_traces yields at least one trace");
        if trace.len() < min_length {
            return Err(fail(format!(
                "trace has {} states, at least {min_length} requested",
                trace.len()
            )));
        }
        Ok(trace)
    }
}
