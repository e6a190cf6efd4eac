use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{to_nnf, BindingTable, Formula, LassoWord, LtlError, Symbol, MAX_PROPOSITIONS};
use crate::graph;

pub const DEFAULT_STATE_CAP: usize = 10_000;

/// Nondeterministic Büchi automaton over the explicit alphabet `2^Π`.
///
/// Transitions are stored densely: `transitions[q][σ]` is the sorted list
/// of successors of `q` on symbol `σ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuchiAutomaton {
    propositions: Vec<String>,
    initial: Vec<usize>,
    accepting: Vec<bool>,
    transitions: Vec<Vec<Vec<usize>>>,
}

impl BuchiAutomaton {
    pub fn new(
        propositions: Vec<String>,
        initial: Vec<usize>,
        accepting: Vec<bool>,
        mut transitions: Vec<Vec<Vec<usize>>>,
    ) -> Result<Self, LtlError> {
        let n = accepting.len();
        let symbols = 1usize << propositions.len();
        if propositions.len() > MAX_PROPOSITIONS {
            return Err(LtlError::MalformedAutomaton("too many propositions".into()));
        }
        if transitions.len() != n {
            return Err(LtlError::MalformedAutomaton("transition rows != states".into()));
        }
        if initial.iter().any(|&q| q >= n) {
            return Err(LtlError::MalformedAutomaton("initial state out of range".into()));
        }
        for row in &mut transitions {
            if row.len() != symbols {
                return Err(LtlError::MalformedAutomaton(format!("expected {symbols} symbols per state")));
            }
            for targets in row.iter_mut() {
                if targets.iter().any(|&t| t >= n) {
                    return Err(LtlError::MalformedAutomaton("transition target out of range".into()));
                }
                targets.sort_unstable();
                targets.dedup();
            }
        }
        let mut initial = initial;
        initial.sort_unstable();
        initial.dedup();
        Ok(BuchiAutomaton { propositions, initial, accepting, transitions })
    }

    /// One accepting state looping on every symbol.
    pub fn universal(propositions: Vec<String>) -> Self {
        let symbols = 1usize << propositions.len();
        BuchiAutomaton {
            propositions,
            initial: vec![0],
            accepting: vec![true],
            transitions: vec![vec![vec![0]; symbols]],
        }
    }

    pub fn propositions(&self) -> &[String] {
        &self.propositions
    }

    pub fn num_states(&self) -> usize {
        self.accepting.len()
    }

    pub fn num_symbols(&self) -> usize {
        1 << self.propositions.len()
    }

    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn accepting_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states()).filter(|&q| self.accepting[q])
    }

    pub fn successors(&self, q: usize, sym: Symbol) -> &[usize] {
        &self.transitions[q][sym.0 as usize]
    }

    /// Successor set of a state set.
    pub fn post(&self, states: &BTreeSet<usize>, sym: Symbol) -> BTreeSet<usize> {
        states.iter().flat_map(|&q| self.successors(q, sym).iter().copied()).collect()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.iter().flatten().map(Vec::len).sum()
    }

    /// Graphviz rendering. Accepting states are double circles; edge labels
    /// are the symbols enabling the edge, as a disjunction of cubes.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph buchi {\n  rankdir=LR;\n  node [shape=circle];\n");
        for q in 0..self.num_states() {
            let shape = if self.accepting[q] { "doublecircle" } else { "circle" };
            let _ = writeln!(s, "  q{q} [label=\"{q}\", shape={shape}];");
        }
        for (i, &q) in self.initial.iter().enumerate() {
            let _ = writeln!(s, "  init{i} [shape=point];\n  init{i} -> q{q};");
        }
        for q in 0..self.num_states() {
            let mut by_target: Vec<(usize, Vec<bool>)> = Vec::new();
            for sym in 0..self.num_symbols() {
                for &t in &self.transitions[q][sym] {
                    let slot = match by_target.iter().position(|(x, _)| *x == t) {
                        Some(i) => i,
                        None => {
                            by_target.push((t, vec![false; self.num_symbols()]));
                            by_target.len() - 1
                        }
                    };
                    by_target[slot].1[sym] = true;
                }
            }
            by_target.sort_by_key(|(t, _)| *t);
            for (t, set) in by_target {
                let label = describe_symbols(&set, &self.propositions);
                let _ = writeln!(s, "  q{q} -> q{t} [label=\"{label}\"];");
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Compact disjunction of cubes covering exactly the marked symbols.
pub(crate) fn describe_symbols(set: &[bool], props: &[String]) -> String {
    let n = props.len();
    if set.iter().all(|&b| b) {
        return "true".into();
    }
    if set.iter().all(|&b| !b) {
        return "false".into();
    }
    // A cube assigns each proposition one of {free, true, false}.
    let mut cubes: Vec<Vec<u8>> = vec![vec![]];
    for _ in 0..n {
        cubes = cubes
            .into_iter()
            .flat_map(|c| {
                (0..3u8).map(move |v| {
                    let mut c = c.clone();
                    c.push(v);
                    c
                })
            })
            .collect();
    }
    cubes.sort_by_key(|c| std::cmp::Reverse(c.iter().filter(|&&v| v == 0).count()));
    let members = |c: &[u8]| -> Vec<usize> {
        (0..set.len())
            .filter(|&sym| {
                c.iter().enumerate().all(|(i, &v)| match v {
                    1 => sym >> i & 1 == 1,
                    2 => sym >> i & 1 == 0,
                    _ => true,
                })
            })
            .collect()
    };
    let mut covered = vec![false; set.len()];
    let mut terms = Vec::new();
    for c in &cubes {
        let m = members(c);
        if m.iter().all(|&x| set[x]) && m.iter().any(|&x| !covered[x]) {
            for x in m {
                covered[x] = true;
            }
            let lits: Vec<String> = c
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0)
                .map(|(i, &v)| if v == 1 { props[i].clone() } else { format!("!{}", props[i]) })
                .collect();
            terms.push(if lits.is_empty() { "true".into() } else { lits.join(" & ") });
        }
        if covered.iter().zip(set).all(|(c, s)| *c || !*s) {
            break;
        }
    }
    terms.join(" | ")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Node {
    True,
    False,
    Lit(usize, bool),
    And(usize, usize),
    Or(usize, usize),
    Next(usize),
    Until(usize, usize),
    Release(usize, usize),
}

#[derive(Default)]
struct Closure {
    nodes: Vec<Node>,
    ids: HashMap<Node, usize>,
}

impl Closure {
    fn intern(&mut self, f: &Formula, table: &BindingTable) -> Result<usize, LtlError> {
        let node = match f {
            Formula::True => Node::True,
            x if x.is_false() => Node::False,
            Formula::Atom(n) => Node::Lit(index(table, n)?, true),
            Formula::Not(inner) => match &**inner {
                Formula::Atom(n) => Node::Lit(index(table, n)?, false),
                _ => unreachable!("formula not in negation normal form"),
            },
            Formula::And(a, b) => Node::And(self.intern(a, table)?, self.intern(b, table)?),
            Formula::Or(a, b) => Node::Or(self.intern(a, table)?, self.intern(b, table)?),
            Formula::Next(a) => Node::Next(self.intern(a, table)?),
            Formula::Until(a, b) => Node::Until(self.intern(a, table)?, self.intern(b, table)?),
            Formula::Release(a, b) => Node::Release(self.intern(a, table)?, self.intern(b, table)?),
            Formula::Always(_) | Formula::Eventually(_) => {
                unreachable!("formula not in negation normal form")
            }
        };
        if let Some(&id) = self.ids.get(&node) {
            return Ok(id);
        }
        let id = self.nodes.len();
        self.nodes.push(node.clone());
        self.ids.insert(node, id);
        Ok(id)
    }
}

fn index(table: &BindingTable, name: &str) -> Result<usize, LtlError> {
    table.index_of(name).ok_or_else(|| LtlError::UnknownProposition(name.to_string()))
}

const INIT: usize = usize::MAX;

type Set = BTreeSet<usize>;

struct Pending {
    incoming: Set,
    new: Set,
    old: Set,
    next: Set,
}

struct TableauNode {
    incoming: Set,
    old: Set,
}

/// Declarative tableau expansion over the NNF closure.
fn expand(closure: &Closure, root: usize, cap: usize) -> Result<Vec<TableauNode>, LtlError> {
    let mut nodes: Vec<TableauNode> = Vec::new();
    let mut by_content: HashMap<(Set, Set), usize> = HashMap::new();
    let mut stack =
        vec![Pending { incoming: Set::from([INIT]), new: Set::from([root]), old: Set::new(), next: Set::new() }];

    'outer: while let Some(mut p) = stack.pop() {
        loop {
            let Some(eta) = p.new.pop_first() else {
                let key = (p.old, p.next);
                if let Some(&id) = by_content.get(&key) {
                    nodes[id].incoming.extend(p.incoming);
                } else {
                    let id = nodes.len();
                    if id >= cap {
                        return Err(LtlError::CapacityExceeded { cap });
                    }
                    let (old, next) = key;
                    by_content.insert((old.clone(), next.clone()), id);
                    nodes.push(TableauNode { incoming: p.incoming, old });
                    stack.push(Pending { incoming: Set::from([id]), new: next, old: Set::new(), next: Set::new() });
                }
                continue 'outer;
            };
            if p.old.contains(&eta) {
                continue;
            }
            match closure.nodes[eta] {
                Node::False => continue 'outer,
                Node::True => {
                    p.old.insert(eta);
                }
                Node::Lit(prop, sign) => {
                    let neg = closure.ids.get(&Node::Lit(prop, !sign));
                    if neg.is_some_and(|n| p.old.contains(n)) {
                        continue 'outer;
                    }
                    p.old.insert(eta);
                }
                Node::And(a, b) => {
                    p.old.insert(eta);
                    for x in [a, b] {
                        if !p.old.contains(&x) {
                            p.new.insert(x);
                        }
                    }
                }
                Node::Next(a) => {
                    p.old.insert(eta);
                    p.next.insert(a);
                }
                Node::Or(a, b) | Node::Until(a, b) | Node::Release(a, b) => {
                    p.old.insert(eta);
                    let mut second = Pending {
                        incoming: p.incoming.clone(),
                        new: p.new.clone(),
                        old: p.old.clone(),
                        next: p.next.clone(),
                    };
                    let (first_new, first_next, second_new): (Vec<usize>, Option<usize>, Vec<usize>) =
                        match closure.nodes[eta] {
                            Node::Or(..) => (vec![a], None, vec![b]),
                            // a U b  =  b | (a & X(a U b))
                            Node::Until(..) => (vec![a], Some(eta), vec![b]),
                            // a R b  =  (b & X(a R b)) | (a & b)
                            _ => (vec![b], Some(eta), vec![a, b]),
                        };
                    for x in first_new {
                        if !p.old.contains(&x) {
                            p.new.insert(x);
                        }
                    }
                    if let Some(x) = first_next {
                        p.next.insert(x);
                    }
                    for x in second_new {
                        if !second.old.contains(&x) {
                            second.new.insert(x);
                        }
                    }
                    stack.push(second);
                }
            }
        }
    }
    Ok(nodes)
}

/// Translates `f` into a Büchi automaton over the propositions of
/// `bindings`, with the default state cap.
pub fn to_buchi(f: &Formula, bindings: &BindingTable) -> Result<BuchiAutomaton, LtlError> {
    to_buchi_with_cap(f, bindings, DEFAULT_STATE_CAP)
}

/// Tableau translation: NNF closure, node-set expansion, one acceptance set
/// per `U` subformula, then degeneralization with a counter. States that
/// cannot reach an accepting cycle are removed.
///
/// A state's literals constrain the symbol read when leaving it, so the
/// word `σ0 σ1 …` is accepted by a run `q0 q1 …` with `qi+1 ∈ δ(qi, σi)`.
pub fn to_buchi_with_cap(f: &Formula, bindings: &BindingTable, cap: usize) -> Result<BuchiAutomaton, LtlError> {
    let props = bindings.names();
    if props.len() > MAX_PROPOSITIONS {
        return Err(LtlError::InvalidBinding(format!("at most {MAX_PROPOSITIONS} propositions")));
    }
    let nnf = to_nnf(f);
    let mut closure = Closure::default();
    let root = closure.intern(&nnf, bindings)?;
    let tableau = expand(&closure, root, cap)?;

    let untils: Vec<(usize, usize)> = closure
        .nodes
        .iter()
        .enumerate()
        .filter_map(|(id, n)| match n {
            Node::Until(_, b) => Some((id, *b)),
            _ => None,
        })
        .collect();
    let in_set = |node: &TableauNode, k: usize| {
        let (u, rhs) = untils[k];
        !node.old.contains(&u) || node.old.contains(&rhs)
    };

    // symbol constraints per tableau node
    let masks: Vec<(u32, u32)> = tableau
        .iter()
        .map(|t| {
            let (mut pos, mut neg) = (0u32, 0u32);
            for &id in &t.old {
                if let Node::Lit(p, sign) = closure.nodes[id] {
                    if sign {
                        pos |= 1 << p;
                    } else {
                        neg |= 1 << p;
                    }
                }
            }
            (pos, neg)
        })
        .collect();

    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); tableau.len()];
    let mut init_nodes = Vec::new();
    for (m, t) in tableau.iter().enumerate() {
        for &from in &t.incoming {
            if from == INIT {
                init_nodes.push(m);
            } else {
                succ[from].push(m);
            }
        }
    }

    // Degeneralize: state (node, counter).
    let m = untils.len();
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut states: Vec<(usize, usize)> = Vec::new();
    let mut queue = VecDeque::new();
    for &n in &init_nodes {
        if index.insert((n, 0), states.len()).is_none() {
            states.push((n, 0));
            queue.push_back((n, 0));
        }
    }
    let mut edges: Vec<Vec<usize>> = Vec::new();
    while let Some((n, i)) = queue.pop_front() {
        let j = if m == 0 || !in_set(&tableau[n], i) { i } else { (i + 1) % m };
        let mut out = Vec::new();
        for &s in &succ[n] {
            let key = (s, j);
            let id = match index.get(&key) {
                Some(&id) => id,
                None => {
                    let id = states.len();
                    if id >= cap {
                        return Err(LtlError::CapacityExceeded { cap });
                    }
                    index.insert(key, id);
                    states.push(key);
                    queue.push_back(key);
                    id
                }
            };
            out.push(id);
        }
        edges.push(out);
    }
    let accepting: Vec<bool> = states.iter().map(|&(n, i)| m == 0 || (i == 0 && in_set(&tableau[n], 0))).collect();

    // trim to states that can reach an accepting cycle
    let on_cycle = graph::on_marked_cycle(&edges, |v| accepting[v]);
    let useful = graph::backward_reachable(&edges, &on_cycle);
    let mut renumber = vec![usize::MAX; states.len()];
    let mut kept = 0;
    for v in 0..states.len() {
        if useful[v] {
            renumber[v] = kept;
            kept += 1;
        }
    }

    let symbols = 1usize << props.len();
    let mut transitions = Vec::with_capacity(kept);
    let mut acc = Vec::with_capacity(kept);
    for v in (0..states.len()).filter(|&v| useful[v]) {
        let (pos, neg) = masks[states[v].0];
        let targets: Vec<usize> = edges[v].iter().filter(|&&t| useful[t]).map(|&t| renumber[t]).collect();
        let row = (0..symbols as u32)
            .map(|sym| if sym & pos == pos && sym & neg == 0 { targets.clone() } else { Vec::new() })
            .collect();
        transitions.push(row);
        acc.push(accepting[v]);
    }
    let initial: Vec<usize> =
        init_nodes.iter().map(|&n| index[&(n, 0)]).filter(|&v| useful[v]).map(|v| renumber[v]).collect();
    BuchiAutomaton::new(props, initial, acc, transitions)
}

/// Whether some run of `ba` over `w` visits an accepting state infinitely
/// often.
///
/// The reachable state set after the prefix seeds a search in the product
/// of the automaton with the cycle's phase ring.
pub fn accepts_lasso(ba: &BuchiAutomaton, w: &LassoWord) -> bool {
    let mut current: BTreeSet<usize> = ba.initial().iter().copied().collect();
    for &sym in &w.prefix {
        current = ba.post(&current, sym);
    }
    if current.is_empty() {
        return false;
    }
    let c = w.cycle.len();
    let n = ba.num_states() * c;
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            let (q, k) = (v / c, v % c);
            ba.successors(q, w.cycle[k]).iter().map(|&t| t * c + (k + 1) % c).collect()
        })
        .collect();
    let roots: Vec<usize> = current.iter().map(|&q| q * c).collect();
    let reach = graph::forward_reachable(&adj, &roots);
    let good = graph::on_marked_cycle(&adj, |v| ba.is_accepting(v / c));
    (0..n).any(|v| reach[v] && good[v])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::parse_formula;

    fn one_prop() -> BindingTable {
        BindingTable::from_names(&["p"]).unwrap()
    }

    #[test]
    fn always_p_is_single_state() {
        let ba = to_buchi(&parse_formula("G p").unwrap(), &one_prop()).unwrap();
        assert_eq!(ba.num_states(), 1);
        assert_eq!(ba.initial(), &[0]);
        assert!(ba.is_accepting(0));
        assert_eq!(ba.successors(0, Symbol(1)), &[0]);
        assert!(ba.successors(0, Symbol(0)).is_empty());
    }

    #[test]
    fn eventually_p_waits_then_sinks() {
        let ba = to_buchi(&parse_formula("F p").unwrap(), &one_prop()).unwrap();
        // a non-accepting waiting state looping on everything
        let waiting: Vec<usize> =
            (0..ba.num_states()).filter(|&q| !ba.is_accepting(q) && ba.successors(q, Symbol(0)).contains(&q)).collect();
        assert_eq!(waiting.len(), 1);
        assert!(accepts_lasso(&ba, &LassoWord::new(vec![Symbol(0), Symbol(0)], vec![Symbol(1), Symbol(0)])));
        assert!(!accepts_lasso(&ba, &LassoWord::new(vec![], vec![Symbol(0)])));
    }

    #[test]
    fn false_is_empty_and_true_universal() {
        let f = to_buchi(&Formula::falsum(), &one_prop()).unwrap();
        assert_eq!(f.num_states(), 0);
        assert!(!accepts_lasso(&f, &LassoWord::new(vec![], vec![Symbol(1)])));
        let t = to_buchi(&Formula::True, &one_prop()).unwrap();
        assert!(accepts_lasso(&t, &LassoWord::new(vec![], vec![Symbol(0)])));
    }

    #[test]
    fn capacity_cap_enforced() {
        let t = BindingTable::from_names(&["a", "b", "c"]).unwrap();
        let f = parse_formula("G F a & G F b & G F c & (a U (b U c))").unwrap();
        assert_eq!(to_buchi_with_cap(&f, &t, 3), Err(LtlError::CapacityExceeded { cap: 3 }));
        assert!(to_buchi(&f, &t).is_ok());
    }

    #[test]
    fn deterministic_construction() {
        let t = BindingTable::from_names(&["covHigh", "qualHigh"]).unwrap();
        let f = parse_formula("G(F covHigh) & F qualHigh").unwrap();
        assert_eq!(to_buchi(&f, &t).unwrap(), to_buchi(&f, &t).unwrap());
    }

    #[test]
    fn dot_marks_accepting_states() {
        let t = BindingTable::from_names(&["covHigh", "qualHigh"]).unwrap();
        let ba = to_buchi(&parse_formula("G(F covHigh) & F qualHigh").unwrap(), &t).unwrap();
        let dot = ba.to_dot();
        assert!(dot.starts_with("digraph buchi {"));
        assert!(dot.contains("doublecircle"));
        assert!(dot.contains("covHigh"));
    }

    #[test]
    fn describe_symbols_compacts() {
        let props = vec!["a".to_string(), "b".to_string()];
        // symbols with a set: 1, 3
        assert_eq!(describe_symbols(&[false, true, false, true], &props), "a");
        assert_eq!(describe_symbols(&[false, false, false, true], &props), "a & b");
        assert_eq!(describe_symbols(&[true; 4], &props), "true");
    }
}
