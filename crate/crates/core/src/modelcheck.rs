//! Product of a labeled model with a Büchi automaton, accepting-lasso
//! search and violation-reachability classification.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::abstraction::Cmdp;
use crate::action::Action;
use crate::graph::{backward_reachable, on_marked_cycle};
use crate::ltl::BuchiAutomaton;
use crate::num::Scalar;

pub const DEFAULT_WITNESS_CAP: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelCheckError {
    #[error("automaton propositions {automaton:?} differ from model propositions {model:?}")]
    AlphabetMismatch { automaton: Vec<String>, model: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductEdge<T = f64> {
    pub action: Action,
    pub target: usize,
    pub probability: T,
}

/// Target-labeled product: `(s, q) -a-> (s', q')` iff `P(s'|s,a) > 0` and
/// `q' ∈ δ(q, L(s'))`. Initial pairs read the initial model state's label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductAutomaton<T = f64> {
    pairs: Vec<(usize, usize)>,
    initial: Vec<usize>,
    accepting: Vec<bool>,
    edges: Vec<Vec<ProductEdge<T>>>,
}

fn check_alphabet<T: Scalar>(cmdp: &Cmdp<T>, ba: &BuchiAutomaton) -> Result<(), ModelCheckError> {
    if cmdp.propositions() != ba.propositions() {
        return Err(ModelCheckError::AlphabetMismatch {
            automaton: ba.propositions().to_vec(),
            model: cmdp.propositions().to_vec(),
        });
    }
    Ok(())
}

/// Reachable product from the model's initial states.
pub fn build_product<T: Scalar>(cmdp: &Cmdp<T>, ba: &BuchiAutomaton) -> Result<ProductAutomaton<T>, ModelCheckError> {
    check_alphabet(cmdp, ba)?;
    let roots: Vec<(usize, usize)> = cmdp
        .initial()
        .iter()
        .flat_map(|&(s, _)| {
            ba.initial().iter().flat_map(move |&q0| ba.successors(q0, cmdp.label(s)).iter().map(move |&q| (s, q)))
        })
        .collect();
    Ok(explore(cmdp, ba, roots))
}

/// Product over every `(s, q)` pair, reachable or not. Initial pairs are as
/// in [`build_product`].
pub fn build_complete_product<T: Scalar>(
    cmdp: &Cmdp<T>,
    ba: &BuchiAutomaton,
) -> Result<ProductAutomaton<T>, ModelCheckError> {
    let reachable = build_product(cmdp, ba)?;
    let initial_pairs: Vec<(usize, usize)> = reachable.initial.iter().map(|&i| reachable.pairs[i]).collect();
    let mut roots = initial_pairs.clone();
    for s in 0..cmdp.num_states() {
        for q in 0..ba.num_states() {
            roots.push((s, q));
        }
    }
    let mut p = explore(cmdp, ba, roots);
    let index = p.index();
    p.initial = initial_pairs.iter().map(|pair| index[pair]).collect();
    p.initial.sort_unstable();
    p.initial.dedup();
    Ok(p)
}

fn explore<T: Scalar>(cmdp: &Cmdp<T>, ba: &BuchiAutomaton, roots: Vec<(usize, usize)>) -> ProductAutomaton<T> {
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pairs = Vec::new();
    let mut initial = Vec::new();
    let mut intern = |pair: (usize, usize), pairs: &mut Vec<(usize, usize)>| -> (usize, bool) {
        if let Some(&i) = index.get(&pair) {
            return (i, false);
        }
        index.insert(pair, pairs.len());
        pairs.push(pair);
        (pairs.len() - 1, true)
    };
    // breadth-first, so ids follow discovery order
    let mut queue = std::collections::VecDeque::new();
    for r in roots {
        let (i, fresh) = intern(r, &mut pairs);
        initial.push(i);
        if fresh {
            queue.push_back(i);
        }
    }
    let mut edges: Vec<Vec<ProductEdge<T>>> = Vec::new();
    while let Some(i) = queue.pop_front() {
        let (s, q) = pairs[i];
        let mut out = Vec::new();
        for a in Action::ALL {
            for (s2, p) in cmdp.successors(s, a) {
                for &q2 in ba.successors(q, cmdp.label(s2)) {
                    let (j, fresh) = intern((s2, q2), &mut pairs);
                    if fresh {
                        queue.push_back(j);
                    }
                    out.push(ProductEdge { action: a, target: j, probability: p });
                }
            }
        }
        if edges.len() <= i {
            edges.resize_with(i + 1, Vec::new);
        }
        edges[i] = out;
    }
    edges.resize_with(pairs.len(), Vec::new);
    initial.sort_unstable();
    initial.dedup();
    let accepting = pairs.iter().map(|&(_, q)| ba.is_accepting(q)).collect();
    ProductAutomaton { pairs, initial, accepting, edges }
}

impl<T: Scalar> ProductAutomaton<T> {
    pub fn num_states(&self) -> usize {
        self.pairs.len()
    }

    /// `(model state, automaton state)` of product state `i`.
    pub fn pair(&self, i: usize) -> (usize, usize) {
        self.pairs[i]
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn index(&self) -> HashMap<(usize, usize), usize> {
        self.pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect()
    }

    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    pub fn is_accepting(&self, i: usize) -> bool {
        self.accepting[i]
    }

    pub fn edges(&self, i: usize) -> &[ProductEdge<T>] {
        &self.edges[i]
    }

    pub fn num_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Distinct successors per state, ignoring actions.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        self.edges
            .iter()
            .map(|out| {
                let mut t: Vec<usize> = out.iter().map(|e| e.target).collect();
                t.sort_unstable();
                t.dedup();
                t
            })
            .collect()
    }

    /// Graphviz rendering. Violating-reachable states are filled red when a
    /// classification is given.
    pub fn to_dot(&self, cmdp: &Cmdp<T>, classification: Option<&UnsafeClassification>) -> String {
        let mut s = String::from("digraph product {\n  rankdir=LR;\n");
        for (i, &(m, q)) in self.pairs.iter().enumerate() {
            let shape = if self.accepting[i] { "doublecircle" } else { "circle" };
            let fill = match classification {
                Some(c) if c.violating[i] => ", style=filled, fillcolor=\"#f4a6a6\"",
                Some(_) => ", style=filled, fillcolor=\"#b9e4b9\"",
                None => "",
            };
            let _ = writeln!(s, "  p{i} [shape={shape}, label=\"{} q{q}\"{fill}];", cmdp.state(m));
        }
        for (k, &i) in self.initial.iter().enumerate() {
            let _ = writeln!(s, "  init{k} [shape=point];\n  init{k} -> p{i};");
        }
        for (i, out) in self.edges.iter().enumerate() {
            for e in out {
                let _ = writeln!(s, "  p{i} -> p{} [label=\"{}: {:.3}\"];", e.target, e.action, e.probability.as_f64());
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Path to an accepting state followed by a cycle back to it. `prefix`
/// starts at an initial state and stops before `cycle[0]`; the last cycle
/// state has an edge to `cycle[0]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lasso {
    pub prefix: Vec<usize>,
    pub cycle: Vec<usize>,
}

/// Nested depth-first search for accepting lassos.
///
/// The outer search visits states in post-order; each accepting state it
/// finishes seeds an inner search for a path back to itself. Inner searches
/// keep separate visited sets so every accepting state on a cycle yields its
/// own witness. Stops after `cap` witnesses.
pub fn find_violating_lassos<T: Scalar>(p: &ProductAutomaton<T>, cap: usize) -> Vec<Lasso> {
    let adj = p.adjacency();
    let n = p.num_states();
    let mut visited = vec![false; n];
    let mut witnesses = Vec::new();
    for &root in &p.initial {
        if visited[root] || witnesses.len() >= cap {
            continue;
        }
        visited[root] = true;
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut pos)) = stack.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if !visited[w] {
                    visited[w] = true;
                    stack.push((w, 0));
                }
                continue;
            }
            if p.accepting[v] {
                if let Some(cycle) = cycle_through(&adj, v) {
                    let prefix = stack[..stack.len() - 1].iter().map(|&(u, _)| u).collect();
                    witnesses.push(Lasso { prefix, cycle });
                    if witnesses.len() >= cap {
                        return witnesses;
                    }
                }
            }
            stack.pop();
        }
    }
    witnesses
}

/// Some path `seed -> ... -> seed`, as the list of states before the closing edge.
fn cycle_through(adj: &[Vec<usize>], seed: usize) -> Option<Vec<usize>> {
    let mut seen = vec![false; adj.len()];
    let mut stack: Vec<(usize, usize)> = vec![(seed, 0)];
    seen[seed] = true;
    while let Some(&mut (v, ref mut pos)) = stack.last_mut() {
        if *pos < adj[v].len() {
            let w = adj[v][*pos];
            *pos += 1;
            if w == seed {
                return Some(stack.iter().map(|&(u, _)| u).collect());
            }
            if !seen[w] {
                seen[w] = true;
                stack.push((w, 0));
            }
        } else {
            stack.pop();
        }
    }
    None
}

/// Per product state: does it lie on an accepting cycle, and can it reach one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnsafeClassification {
    pub pairs: Vec<(usize, usize)>,
    pub accepting: Vec<bool>,
    pub on_accepting_cycle: Vec<bool>,
    pub violating: Vec<bool>,
    pub witnesses: Vec<Lasso>,
}

impl UnsafeClassification {
    pub fn num_violating(&self) -> usize {
        self.violating.iter().filter(|&&v| v).count()
    }

    pub fn witnesses_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .witnesses
            .iter()
            .map(|w| {
                serde_json::json!({
                    "prefix": w.prefix.iter().map(|&i| self.pairs[i]).collect::<Vec<_>>(),
                    "cycle": w.cycle.iter().map(|&i| self.pairs[i]).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("json")
    }
}

/// Exact classification: a state is violating-reachable iff it can reach a
/// state on an accepting cycle. Witnesses are kept for reporting only.
pub fn classify_unsafe<T: Scalar>(p: &ProductAutomaton<T>, witnesses: Vec<Lasso>) -> UnsafeClassification {
    let adj = p.adjacency();
    let on_cycle = on_marked_cycle(&adj, |v| p.accepting[v]);
    debug_assert!(witnesses.iter().flat_map(|w| &w.cycle).all(|&v| on_cycle[v]));
    let violating = backward_reachable(&adj, &on_cycle);
    UnsafeClassification {
        pairs: p.pairs.clone(),
        accepting: p.accepting.clone(),
        on_accepting_cycle: on_cycle,
        violating,
        witnesses,
    }
}

/// Whether the intent can be satisfied at all on the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeTraceReport {
    pub realizable: bool,
    /// `(model state, automaton state)` initial pairs with a satisfying run.
    pub satisfying_initial: Vec<(usize, usize)>,
    pub witness: Option<Lasso>,
}

impl SafeTraceReport {
    pub fn diagnostic(&self, intent: &str) -> Option<String> {
        (!self.realizable)
            .then(|| format!("intent `{intent}` admits no satisfying trace on the learned model; relax or rewrite it"))
    }
}

pub fn check_realizability<T: Scalar>(
    cmdp: &Cmdp<T>,
    ba_pos: &BuchiAutomaton,
) -> Result<SafeTraceReport, ModelCheckError> {
    let p = build_product(cmdp, ba_pos)?;
    let witness = find_violating_lassos(&p, 1).into_iter().next();
    let c = classify_unsafe(&p, Vec::new());
    let satisfying_initial: Vec<(usize, usize)> =
        p.initial.iter().filter(|&&i| c.violating[i]).map(|&i| p.pairs[i]).collect();
    Ok(SafeTraceReport { realizable: !satisfying_initial.is_empty(), satisfying_initial, witness })
}
