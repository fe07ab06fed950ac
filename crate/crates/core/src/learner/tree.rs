use std::collections::HashSet;

use super::LearnedDtmc;
use crate::abstraction::{AbstractState, AbstractTrace};
use crate::dtmc::Dtmc;
use crate::error::{LarError, Result};

/// Index of a node in a [`PrefixTree`].
pub type NodeId = usize;

const NO_SYMBOL: u32 = u32::MAX;
const NO_PARENT: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Node {
    symbol: u32,
    depth: u32,
    label: u64,
    end: u64,
    /// `(symbol, target, flow)` sorted by symbol. Before any merge the flow
    /// of an edge equals the label of its target.
    edges: Vec<(u32, NodeId, u64)>,
    parent: NodeId,
    alive: bool,
}

impl Node {
    fn edge(&self, sym: u32) -> Option<usize> {
        self.edges.binary_search_by_key(&sym, |e| e.0).ok()
    }
}

/// Frequency prefix tree over abstract traces. Merging turns it into a
/// (possibly cyclic) automaton; the same type serves both roles.
#[derive(Debug, Clone)]
pub struct PrefixTree {
    alphabet: Vec<AbstractState>,
    nodes: Vec<Node>,
}

/// The prefix tree after state merging.
pub type MergedAutomaton = PrefixTree;

impl PrefixTree {
    pub fn build(traces: &[AbstractTrace]) -> Result<PrefixTree> {
        if traces.is_empty() {
            return Err(LarError::Config("cannot learn from an empty trace set".into()));
        }
        let mut alphabet: Vec<AbstractState> = traces
            .iter()
            .flat_map(|t| t.symbols().iter().cloned())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        alphabet.sort();
        let mut tree = PrefixTree {
            alphabet,
            nodes: vec![Node {
                symbol: NO_SYMBOL,
                depth: 0,
                label: 0,
                end: 0,
                edges: Vec::new(),
                parent: NO_PARENT,
                alive: true,
            }],
        };
        for trace in traces {
            if trace.is_empty() {
                return Err(LarError::Config("abstract traces must be non-empty".into()));
            }
            let mut cur = 0;
            tree.nodes[0].label += 1;
            for sym in trace.symbols() {
                let s = tree.symbol_id(sym).expect("alphabet covers all symbols");
                cur = match tree.nodes[cur].edge(s) {
                    Some(i) => {
                        tree.nodes[cur].edges[i].2 += 1;
                        tree.nodes[cur].edges[i].1
                    }
                    None => {
                        let id = tree.nodes.len();
                        let depth = tree.nodes[cur].depth + 1;
                        tree.nodes.push(Node {
                            symbol: s,
                            depth,
                            label: 0,
                            end: 0,
                            edges: Vec::new(),
                            parent: cur,
                            alive: true,
                        });
                        let edges = &mut tree.nodes[cur].edges;
                        let pos = edges.partition_point(|e| e.0 < s);
                        edges.insert(pos, (s, id, 1));
                        id
                    }
                };
                tree.nodes[cur].label += 1;
            }
            tree.nodes[cur].end += 1;
        }
        Ok(tree)
    }

    fn symbol_id(&self, sym: &AbstractState) -> Option<u32> {
        self.alphabet.binary_search(sym).ok().map(|i| i as u32)
    }

    pub fn alphabet(&self) -> &[AbstractState] {
        &self.alphabet
    }

    pub fn root(&self) -> NodeId {
        0
    }

    /// Number of live nodes, root included.
    pub fn num_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| n.alive).count()
    }

    fn live(&self, n: NodeId) -> Result<&Node> {
        match self.nodes.get(n) {
            Some(node) if node.alive => Ok(node),
            _ => Err(LarError::UnknownState(n)),
        }
    }

    /// Follows `prefix` from the root.
    pub fn find(&self, prefix: &[AbstractState]) -> Option<NodeId> {
        let mut cur = 0;
        for sym in prefix {
            let node = &self.nodes[cur];
            cur = node.edges[node.edge(self.symbol_id(sym)?)?].1;
        }
        Some(cur)
    }

    pub fn label(&self, n: NodeId) -> Result<u64> {
        Ok(self.live(n)?.label)
    }

    /// Number of traces ending exactly at `n`.
    pub fn end_count(&self, n: NodeId) -> Result<u64> {
        Ok(self.live(n)?.end)
    }

    /// Last symbol of the prefix `n` stands for; `None` at the root.
    pub fn symbol(&self, n: NodeId) -> Result<Option<&AbstractState>> {
        let node = self.live(n)?;
        Ok((node.symbol != NO_SYMBOL).then(|| &self.alphabet[node.symbol as usize]))
    }

    /// Outgoing edges as `(symbol, target, flow)`.
    pub fn edges(&self, n: NodeId) -> Result<Vec<(&AbstractState, NodeId, u64)>> {
        Ok(self
            .live(n)?
            .edges
            .iter()
            .map(|&(s, t, f)| (&self.alphabet[s as usize], t, f))
            .collect())
    }

    /// `Pr(n, <e>)`: flow on the `e`-edge divided by `L(n)`.
    pub fn next_symbol_prob(&self, n: NodeId, e: &AbstractState) -> Result<f64> {
        let node = self.live(n)?;
        let flow = self
            .symbol_id(e)
            .and_then(|s| node.edge(s))
            .map(|i| node.edges[i].2)
            .unwrap_or(0);
        Ok(flow as f64 / node.label as f64)
    }

    /// Share of the traces through `n` that stop there.
    pub fn termination_prob(&self, n: NodeId) -> Result<f64> {
        let node = self.live(n)?;
        Ok(node.end as f64 / node.label as f64)
    }

    /// Product of one-step probabilities along `suffix`; the empty suffix
    /// yields the termination probability.
    pub fn multi_step_prob(&self, n: NodeId, suffix: &[AbstractState]) -> Result<f64> {
        if suffix.is_empty() {
            return self.termination_prob(n);
        }
        let mut cur = n;
        let mut p = 1.0;
        for sym in suffix {
            let node = self.live(cur)?;
            let Some(i) = self.symbol_id(sym).and_then(|s| node.edge(s)) else {
                return Ok(0.0);
            };
            let (_, t, f) = node.edges[i];
            p *= f as f64 / node.label as f64;
            cur = t;
        }
        Ok(p)
    }

    /// Whether the future-trace distributions of `a` and `b` are within the
    /// Angluin-style bound for `epsilon`.
    pub fn compatible(&self, a: NodeId, b: NodeId, epsilon: f64) -> bool {
        let (Ok(na), Ok(nb)) = (self.live(a), self.live(b)) else {
            return false;
        };
        if na.symbol != nb.symbol || na.symbol == NO_SYMBOL {
            return false;
        }
        let bound = compat_bound(na.label, epsilon) + compat_bound(nb.label, epsilon);
        let term_a = na.end as f64 / na.label as f64;
        let term_b = nb.end as f64 / nb.label as f64;
        if (term_a - term_b).abs() >= bound {
            return false;
        }
        // Co-traversal over realised suffixes. Once both prefix
        // probabilities are below the bound no extension can exceed it.
        let mut stack = vec![(a, b, 1.0f64, 1.0f64)];
        let mut seen = HashSet::new();
        while let Some((u, v, pu, pv)) = stack.pop() {
            if !seen.insert((u, v)) {
                continue;
            }
            let (eu, ev) = (&self.nodes[u].edges, &self.nodes[v].edges);
            let (lu, lv) = (self.nodes[u].label as f64, self.nodes[v].label as f64);
            let (mut i, mut j) = (0, 0);
            while i < eu.len() || j < ev.len() {
                let su = eu.get(i).map_or(u32::MAX, |e| e.0);
                let sv = ev.get(j).map_or(u32::MAX, |e| e.0);
                if su == sv {
                    let qu = pu * eu[i].2 as f64 / lu;
                    let qv = pv * ev[j].2 as f64 / lv;
                    if (qu - qv).abs() >= bound {
                        return false;
                    }
                    if qu.max(qv) >= bound {
                        stack.push((eu[i].1, ev[j].1, qu, qv));
                    }
                    i += 1;
                    j += 1;
                } else if su < sv {
                    if pu * eu[i].2 as f64 / lu >= bound {
                        return false;
                    }
                    i += 1;
                } else {
                    if pv * ev[j].2 as f64 / lv >= bound {
                        return false;
                    }
                    j += 1;
                }
            }
        }
        true
    }

    /// Folds the subtree of `b` into `a` and redirects the incoming edge of
    /// `b` to `a`. `b` must not be the root and must be a tree node (not
    /// reachable from anywhere except its parent).
    pub fn merge(&mut self, a: NodeId, b: NodeId) -> Result<()> {
        self.live(a)?;
        let parent = self.live(b)?.parent;
        if parent == NO_PARENT || a == b {
            return Err(LarError::InvalidModel(format!("cannot merge node {b} into {a}")));
        }
        // The flag marks nodes whose flow re-enters `a` through the new
        // self-loop. Their visits are already counted on the loop edge, so
        // only the flow that continues past them is added to `a`.
        let mut work = vec![(a, b, false)];
        while let Some((x, c, looped)) = work.pop() {
            let cn = std::mem::take(&mut self.nodes[c].edges);
            let (cl, ce) = (self.nodes[c].label, self.nodes[c].end);
            self.nodes[c].alive = false;
            if looped {
                self.nodes[x].label += cl - ce;
            } else {
                self.nodes[x].label += cl;
                self.nodes[x].end += ce;
            }
            for (s, d, f) in cn {
                match self.nodes[x].edge(s) {
                    Some(i) => {
                        self.nodes[x].edges[i].2 += f;
                        let t = self.nodes[x].edges[i].1;
                        if t == b {
                            work.push((a, d, true));
                        } else {
                            work.push((t, d, false));
                        }
                    }
                    None => {
                        let edges = &mut self.nodes[x].edges;
                        let pos = edges.partition_point(|e| e.0 < s);
                        edges.insert(pos, (s, d, f));
                        self.nodes[d].parent = x;
                    }
                }
            }
        }
        for e in &mut self.nodes[parent].edges {
            if e.1 == b {
                e.1 = a;
            }
        }
        Ok(())
    }

    /// Red-blue state merging: blue candidates are taken by depth, then
    /// symbol order, and merged into the first compatible red node.
    pub fn merge_all(&mut self, epsilon: f64) {
        let mut red: Vec<NodeId> = self.nodes[0].edges.iter().map(|e| e.1).collect();
        let mut is_red = vec![false; self.nodes.len()];
        for &r in &red {
            is_red[r] = true;
        }
        loop {
            let blue = red
                .iter()
                .flat_map(|&r| self.nodes[r].edges.iter().map(|e| e.1))
                .filter(|&t| !is_red[t] && self.nodes[t].alive)
                .min_by_key(|&t| (self.nodes[t].depth, self.nodes[t].symbol, t));
            let Some(b) = blue else { break };
            match red.iter().copied().find(|&r| self.compatible(r, b, epsilon)) {
                Some(r) => self.merge(r, b).expect("red and blue nodes are live"),
                None => {
                    is_red[b] = true;
                    red.push(b);
                }
            }
        }
    }

    /// Checks `L = end + sum of outgoing flows` at every live node.
    pub fn labels_consistent(&self) -> bool {
        self.nodes
            .iter()
            .filter(|n| n.alive)
            .all(|n| n.label == n.end + n.edges.iter().map(|e| e.2).sum::<u64>())
    }

    /// Turns the automaton into a DTMC: each live non-root node becomes a
    /// state, edges get `flow / L`, and the termination share `end / L`
    /// is added to the self-loop.
    pub fn normalize(&self) -> LearnedDtmc {
        let mut order: Vec<NodeId> = (1..self.nodes.len()).filter(|&n| self.nodes[n].alive).collect();
        order.sort_by_key(|&n| (self.nodes[n].depth, self.nodes[n].symbol, n));
        let mut index = vec![usize::MAX; self.nodes.len()];
        for (i, &n) in order.iter().enumerate() {
            index[n] = i;
        }
        let root = &self.nodes[0];
        let mut initial = vec![0.0; order.len()];
        let mut starts = Vec::new();
        for &(s, t, f) in &root.edges {
            initial[index[t]] += f as f64 / root.label as f64;
            starts.push((s, index[t]));
        }
        let mut rows = Vec::with_capacity(order.len());
        let mut moves = Vec::with_capacity(order.len());
        for (i, &n) in order.iter().enumerate() {
            let node = &self.nodes[n];
            let l = node.label as f64;
            let mut row: Vec<(usize, f64)> = node.edges.iter().map(|&(_, t, f)| (index[t], f as f64 / l)).collect();
            let mut mv: Vec<(u32, usize)> = node.edges.iter().map(|&(s, t, _)| (s, index[t])).collect();
            if node.end > 0 {
                row.push((i, node.end as f64 / l));
                if node.edge(node.symbol).is_none() {
                    mv.push((node.symbol, i));
                    mv.sort_unstable();
                }
            }
            rows.push(row);
            moves.push(mv);
        }
        let symbols: Vec<u32> = order.iter().map(|&n| self.nodes[n].symbol).collect();
        let labels = symbols.iter().map(|&s| self.alphabet[s as usize].to_string()).collect();
        let dtmc = Dtmc::new(labels, initial, rows).expect("normalised tree is stochastic");
        LearnedDtmc::from_parts(dtmc, self.alphabet.clone(), symbols, starts, moves)
    }
}

fn compat_bound(label: u64, epsilon: f64) -> f64 {
    let l = label as f64;
    (6.0 * epsilon * l.ln() / l).sqrt()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn sym(bits: &str) -> AbstractState {
        AbstractState::from_bits(bits).unwrap()
    }

    pub(crate) fn trace(bits: &str) -> AbstractTrace {
        AbstractTrace(bits.chars().map(|c| sym(&c.to_string())).collect())
    }

    pub(crate) fn running_example() -> Vec<AbstractTrace> {
        let mut out = Vec::new();
        for (t, n) in [("0000", 88), ("0001", 2), ("001", 2), ("0011", 8)] {
            out.extend(std::iter::repeat_n(trace(t), n));
        }
        out
    }

    fn node(tree: &PrefixTree, bits: &str) -> NodeId {
        let path: Vec<AbstractState> = bits.chars().map(|c| sym(&c.to_string())).collect();
        tree.find(&path).unwrap()
    }

    #[test]
    fn running_example_labels() {
        let tree = PrefixTree::build(&running_example()).unwrap();
        for (p, l) in [
            ("", 100),
            ("0", 100),
            ("00", 100),
            ("000", 90),
            ("001", 10),
            ("0000", 88),
            ("0001", 2),
            ("0011", 8),
        ] {
            assert_eq!(tree.label(node(&tree, p)).unwrap(), l, "L(<{p}>)");
        }
        assert!(tree.labels_consistent());
        let n00 = node(&tree, "00");
        assert_eq!(tree.next_symbol_prob(n00, &sym("1")).unwrap(), 0.1);
        assert_eq!(tree.next_symbol_prob(node(&tree, "0000"), &sym("0")).unwrap(), 0.0);
        assert_eq!(tree.multi_step_prob(0, &[sym("0"), sym("0")]).unwrap(), 1.0);
        assert_eq!(tree.multi_step_prob(0, &[sym("1")]).unwrap(), 0.0);
        assert_eq!(tree.multi_step_prob(node(&tree, "001"), &[]).unwrap(), 0.2);
    }

    #[test]
    fn small_trees() {
        let one = PrefixTree::build(&[trace("0")]).unwrap();
        assert_eq!(one.num_nodes(), 2);
        assert_eq!(one.label(1).unwrap(), 1);
        let twice = PrefixTree::build(&[trace("01"), trace("01")]).unwrap();
        assert_eq!(twice.num_nodes(), 3);
        assert_eq!(twice.label(twice.root()).unwrap(), 2);
        assert!(PrefixTree::build(&[]).is_err());
    }

    #[test]
    fn fold_reproduces_twelve_over_one_ninety() {
        let mut tree = PrefixTree::build(&running_example()).unwrap();
        let (a, b) = (node(&tree, "00"), node(&tree, "000"));
        tree.merge(a, b).unwrap();
        assert!(tree.labels_consistent());
        assert_eq!(tree.label(a).unwrap(), 190);
        assert_eq!(tree.label(node(&tree, "001")).unwrap(), 12);
        assert_eq!(tree.next_symbol_prob(a, &sym("1")).unwrap(), 12.0 / 190.0);
        assert_eq!(tree.label(tree.root()).unwrap(), 100);

        let model = tree.normalize();
        let s00 = model.step_path(&[sym("0"), sym("0")]).unwrap();
        let s001 = model.step(s00, &sym("1")).unwrap();
        let d = model.dtmc();
        assert!((d.prob(s00, s001) - 12.0 / 190.0).abs() < 1e-15);
        assert!((d.prob(s00, s00) - (1.0 - 12.0 / 190.0)).abs() < 1e-15);
    }

    #[test]
    fn looped_fold_keeps_continuations() {
        let mut traces = vec![trace("0"); 4];
        traces.push(trace("0001"));
        let mut tree = PrefixTree::build(&traces).unwrap();
        let (a, b) = (node(&tree, "0"), node(&tree, "00"));
        tree.merge(a, b).unwrap();
        assert!(tree.labels_consistent());
        assert_eq!(tree.label(a).unwrap(), 7);
        assert_eq!(tree.end_count(a).unwrap(), 4);
        let model = tree.normalize();
        for t in &traces {
            assert!(model.walk(t).is_some(), "{t:?}");
        }
    }

    #[test]
    fn leaf_into_leaf_sums_labels() {
        let mut tree = PrefixTree::build(&[trace("00"), trace("00"), trace("10")]).unwrap();
        let (a, b) = (node(&tree, "00"), node(&tree, "10"));
        let before = tree.num_nodes();
        tree.merge(a, b).unwrap();
        assert_eq!(tree.label(a).unwrap(), 3);
        assert_eq!(tree.end_count(a).unwrap(), 3);
        assert_eq!(tree.num_nodes(), before - 1);
        assert_eq!(tree.find(&[sym("1"), sym("0")]), Some(a));
    }

    #[test]
    fn compatibility_basics() {
        let tree = PrefixTree::build(&running_example()).unwrap();
        let n0 = node(&tree, "0");
        assert!(tree.compatible(n0, n0, 2.0));
        assert!(!tree.compatible(node(&tree, "000"), node(&tree, "001"), 64.0));
        assert!(!tree.compatible(tree.root(), n0, 64.0));
    }
}
