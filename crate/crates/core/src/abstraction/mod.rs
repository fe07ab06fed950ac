//! Predicates over concrete states and the abstraction they induce.

mod parse;

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{LarError, Result};
use crate::trace::{ConcreteState, ConcreteTrace, TraceSet, VariableSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl Relation {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Relation::Lt => lhs < rhs,
            Relation::Le => lhs <= rhs,
            Relation::Gt => lhs > rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Eq => lhs == rhs,
        }
    }

    /// The relation that holds exactly when `self` does not, if expressible.
    pub fn negated(self) -> Option<Relation> {
        match self {
            Relation::Lt => Some(Relation::Ge),
            Relation::Le => Some(Relation::Gt),
            Relation::Gt => Some(Relation::Le),
            Relation::Ge => Some(Relation::Lt),
            Relation::Eq => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
            Relation::Eq => "==",
        }
    }
}

/// A linear comparison `sum c_i * x_i  rel  c` bound to a variable schema.
/// Atomic comparisons such as `x > 1` are the single-term case.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    terms: Vec<(usize, f64)>,
    names: Vec<String>,
    relation: Relation,
    constant: f64,
}

/// Scale- and direction-independent form used for duplicate detection.
#[derive(Debug, Clone, PartialEq)]
struct NormalForm {
    terms: Vec<(usize, f64)>,
    relation: Relation,
    constant: f64,
}

impl NormalForm {
    fn approx_eq(&self, other: &NormalForm) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
        self.relation == other.relation
            && self.terms.len() == other.terms.len()
            && self
                .terms
                .iter()
                .zip(&other.terms)
                .all(|(&(i, a), &(j, b))| i == j && close(a, b))
            && close(self.constant, other.constant)
    }
}

impl Predicate {
    /// Parses `<lincomb> <rel> <lincomb>` and resolves variables in `schema`.
    pub fn parse(text: &str, schema: &VariableSchema) -> Result<Predicate> {
        let (affine, relation) = parse::parse_comparison(text)?;
        let mut coefficients = vec![0.0; schema.arity()];
        for (name, c) in affine.terms {
            let i = schema
                .index_of(&name)
                .ok_or_else(|| LarError::UnknownVariable(name.clone()))?;
            coefficients[i] += c;
        }
        Predicate::linear(schema, &coefficients, relation, affine.constant)
    }

    /// Builds `sum coefficients[i] * x_i  relation  constant`; zero
    /// coefficients are dropped.
    pub fn linear(
        schema: &VariableSchema,
        coefficients: &[f64],
        relation: Relation,
        constant: f64,
    ) -> Result<Predicate> {
        if coefficients.len() != schema.arity() {
            return Err(LarError::Schema(format!(
                "{} coefficients for {} variables",
                coefficients.len(),
                schema.arity()
            )));
        }
        if !constant.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(LarError::Config("predicate coefficients must be finite".into()));
        }
        let terms: Vec<(usize, f64)> = coefficients
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c != 0.0)
            .map(|(i, &c)| (i, c))
            .collect();
        if terms.is_empty() {
            return Err(LarError::Config("predicate does not mention any variable".into()));
        }
        let names = terms.iter().map(|&(i, _)| schema.names()[i].clone()).collect();
        Ok(Predicate {
            terms,
            names,
            relation,
            constant,
        })
    }

    pub fn relation(&self) -> Relation {
        self.relation
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Non-zero `(variable index, coefficient)` pairs in schema order.
    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    /// `⟦p⟧_s`, evaluated directly on the stored values.
    pub fn eval(&self, s: &ConcreteState) -> bool {
        let v = s.values();
        let lhs: f64 = self.terms.iter().map(|&(i, c)| c * v[i]).sum();
        self.relation.holds(lhs, self.constant)
    }

    /// The complementary predicate, when the relation has one.
    pub fn complement(&self) -> Option<Predicate> {
        Some(Predicate {
            relation: self.relation.negated()?,
            ..self.clone()
        })
    }

    fn normal_form(&self) -> NormalForm {
        let (sign, relation) = match self.relation {
            Relation::Gt => (-1.0, Relation::Lt),
            Relation::Ge => (-1.0, Relation::Le),
            Relation::Eq if self.terms[0].1 < 0.0 => (-1.0, Relation::Eq),
            r => (1.0, r),
        };
        let scale = self.terms.iter().map(|&(_, c)| c.abs()).fold(0.0, f64::max);
        let k = sign / scale;
        NormalForm {
            terms: self.terms.iter().map(|&(i, c)| (i, c * k)).collect(),
            relation,
            constant: self.constant * k,
        }
    }

    /// True when both predicates denote the same half-space up to positive
    /// scaling and direction.
    pub fn equivalent(&self, other: &Predicate) -> bool {
        self.normal_form().approx_eq(&other.normal_form())
    }

    /// True when the two predicates split the state space identically:
    /// equivalent, or one is the complement of the other.
    pub fn same_partition(&self, other: &Predicate) -> bool {
        self.equivalent(other) || other.complement().is_some_and(|c| self.equivalent(&c))
    }

    fn check_schema(&self, schema: &VariableSchema) -> Result<()> {
        for (&(i, _), name) in self.terms.iter().zip(&self.names) {
            if schema.names().get(i) != Some(name) {
                return Err(LarError::UnknownVariable(name.clone()));
            }
        }
        Ok(())
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (&(_, c), name)) in self.terms.iter().zip(&self.names).enumerate() {
            let mag = c.abs();
            match (k, c < 0.0) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            if mag == 1.0 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{}*{name}", fmt_num(mag))?;
            }
        }
        write!(f, " {} {}", self.relation.symbol(), fmt_num(self.constant))
    }
}

impl Serialize for Predicate {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Ordered predicates; bit `i` of an abstract state is predicate `i`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PredicateSet {
    predicates: Vec<Predicate>,
}

impl PredicateSet {
    pub fn new(predicates: Vec<Predicate>) -> Result<Self> {
        let mut set = PredicateSet::default();
        for p in predicates {
            let text = p.to_string();
            if !set.insert(p) {
                return Err(LarError::Config(format!("duplicate predicate `{text}`")));
            }
        }
        Ok(set)
    }

    /// Appends `p` unless an existing predicate induces the same partition.
    pub fn insert(&mut self, p: Predicate) -> bool {
        if self.contains_equivalent(&p) {
            return false;
        }
        self.predicates.push(p);
        true
    }

    pub fn contains_equivalent(&self, p: &Predicate) -> bool {
        self.predicates.iter().any(|q| q.same_partition(p))
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.predicates
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    /// `α_P(s)`.
    pub fn abstract_state(&self, s: &ConcreteState) -> AbstractState {
        AbstractState(self.predicates.iter().map(|p| p.eval(s)).collect())
    }

    pub fn abstract_trace(&self, t: &ConcreteTrace) -> AbstractTrace {
        AbstractTrace(t.states().iter().map(|s| self.abstract_state(s)).collect())
    }

    /// Abstracts every trace of `traces`, in order.
    pub fn abstract_trace_set(&self, traces: &TraceSet) -> Result<Vec<AbstractTrace>> {
        for p in &self.predicates {
            p.check_schema(traces.schema())?;
        }
        Ok(traces.traces().iter().map(|t| self.abstract_trace(t)).collect())
    }
}

/// A bit vector over the current predicates. Ordered lexicographically
/// with `0 < 1`, so `"00" < "01" < "10"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct AbstractState(pub Vec<bool>);

impl AbstractState {
    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parses a string of `0`/`1` characters.
    pub fn from_bits(text: &str) -> Option<AbstractState> {
        text.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(AbstractState)
    }
}

impl fmt::Display for AbstractState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl Serialize for AbstractState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// The image of one concrete trace under `α_P`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbstractTrace(pub Vec<AbstractState>);

impl AbstractTrace {
    pub fn symbols(&self) -> &[AbstractState] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for AbstractTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema(names: &[&str]) -> VariableSchema {
        VariableSchema::reals(names).unwrap()
    }

    fn st(v: &[f64]) -> ConcreteState {
        ConcreteState::new(v.to_vec())
    }

    #[test]
    fn evaluation_examples() {
        let s = schema(&["observe0"]);
        let p = Predicate::parse("observe0 > 1", &s).unwrap();
        assert!(p.eval(&st(&[2.0])));
        assert!(!p.eval(&st(&[1.0])));

        let x = schema(&["x"]);
        assert!(Predicate::parse("x >= 0", &x).unwrap().eval(&st(&[0.0])));

        let s = schema(&["new", "runCount"]);
        let p = Predicate::parse("1*new - 1*runCount < 0", &s).unwrap();
        assert!(p.eval(&st(&[0.0, 3.0])));
        assert_eq!(p.to_string(), "new - runCount < 0");
    }

    #[test]
    fn unknown_variable_is_rejected() {
        let s = schema(&["x"]);
        assert!(matches!(
            Predicate::parse("y > 0", &s),
            Err(LarError::UnknownVariable(v)) if v == "y"
        ));
        let other = TraceSet::empty(schema(&["z"]));
        let set = PredicateSet::new(vec![Predicate::parse("x > 0", &s).unwrap()]).unwrap();
        assert!(set.abstract_trace_set(&other).is_err());
    }

    #[test]
    fn abstraction_examples() {
        let s = schema(&["observe0"]);
        let set = PredicateSet::new(vec![Predicate::parse("observe0 > 1", &s).unwrap()]).unwrap();
        assert_eq!(set.abstract_state(&st(&[0.0])).to_string(), "0");

        assert!(PredicateSet::default().abstract_state(&st(&[5.0])).is_empty());

        let x = schema(&["x"]);
        let two = PredicateSet::new(vec![
            Predicate::parse("x > 0", &x).unwrap(),
            Predicate::parse("x > 5", &x).unwrap(),
        ])
        .unwrap();
        assert_eq!(two.abstract_state(&st(&[3.0])).to_string(), "10");

        let trace = |vals: &[f64]| ConcreteTrace::new(vals.iter().map(|&v| st(&[v])).collect()).unwrap();
        let ts = TraceSet::new(s, vec![trace(&[0.0, 1.0, 2.0, 2.0]), trace(&[0.0, 0.0, 1.0, 1.0])]).unwrap();
        let abs = set.abstract_trace_set(&ts).unwrap();
        assert_eq!(abs[0].to_string(), "0,0,1,1");
        assert_eq!(abs[1].to_string(), "0,0,0,0");
    }

    #[test]
    fn duplicates_by_scaling_and_complement() {
        let s = schema(&["x", "y"]);
        let p = |t: &str| Predicate::parse(t, &s).unwrap();
        assert!(p("x - y >= 1").equivalent(&p("2*x - 2*y >= 2")));
        assert!(p("x - y >= 1").equivalent(&p("y - x <= -1")));
        assert!(!p("x - y >= 1").equivalent(&p("x - y > 1")));
        assert!(p("x - y >= 1").same_partition(&p("x - y < 1")));
        assert!(p("x == 1").equivalent(&p("-2*x == -2")));
        let mut set = PredicateSet::new(vec![p("x > 1")]).unwrap();
        assert!(!set.insert(p("3*x <= 3")));
        assert!(set.insert(p("y > 1")));
        assert!(PredicateSet::new(vec![p("x > 1"), p("2*x > 2")]).is_err());
    }

    #[test]
    fn abstract_state_order_matches_bit_strings() {
        let a = AbstractState::from_bits("01").unwrap();
        let b = AbstractState::from_bits("10").unwrap();
        assert!(a < b);
        assert!(AbstractState::from_bits("00").unwrap() < a);
        assert!(AbstractState::from_bits("0x").is_none());
    }

    proptest! {
        #[test]
        fn display_round_trips(
            a in -50i32..50, b in -50i32..50, c in -100i32..100, rel in 0usize..5
        ) {
            prop_assume!(a != 0 || b != 0);
            let s = schema(&["x", "y"]);
            let r = [Relation::Lt, Relation::Le, Relation::Gt, Relation::Ge, Relation::Eq][rel];
            let p = Predicate::linear(&s, &[a as f64 / 4.0, b as f64], r, c as f64 / 8.0).unwrap();
            let q = Predicate::parse(&p.to_string(), &s).unwrap();
            prop_assert_eq!(p, q);
        }

        #[test]
        fn refinement_refines_the_partition(
            points in proptest::collection::vec((-10i32..10, -10i32..10), 1..40),
            extra in -5i32..5,
        ) {
            let s = schema(&["x", "y"]);
            let coarse = PredicateSet::new(vec![Predicate::parse("x > 0", &s).unwrap()]).unwrap();
            let mut fine = coarse.clone();
            fine.insert(Predicate::parse(&format!("x + y <= {extra}"), &s).unwrap());
            let mut cell = std::collections::HashMap::new();
            for (x, y) in points {
                let state = st(&[x as f64, y as f64]);
                let f = fine.abstract_state(&state);
                let c = coarse.abstract_state(&state);
                prop_assert_eq!(&f.0[..1], &c.0[..]);
                let prev = cell.insert(f, c.clone());
                prop_assert!(prev.is_none_or(|p| p == c));
            }
        }

        #[test]
        fn abstraction_preserves_length_and_is_pure(vals in proptest::collection::vec(-3i32..3, 1..20)) {
            let s = schema(&["x"]);
            let set = PredicateSet::new(vec![Predicate::parse("x >= 0", &s).unwrap()]).unwrap();
            let t = ConcreteTrace::new(vals.iter().map(|&v| st(&[v as f64])).collect()).unwrap();
            let a = set.abstract_trace(&t);
            prop_assert_eq!(a.len(), t.len());
            prop_assert_eq!(a, set.abstract_trace(&t));
        }
    }
}
