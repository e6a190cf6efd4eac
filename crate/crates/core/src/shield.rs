//! Runtime violation monitor and action filter.

use std::collections::BTreeSet;
use std::fmt;
use std::io;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::abstraction::{Cmdp, DiscreteState};
use crate::action::{Action, ActionSet};
use crate::agent::{ActionGuard, GuardDecision, StepRecord};
use crate::ltl::{BuchiAutomaton, Symbol};
use crate::modelcheck::{build_complete_product, classify_unsafe, UnsafeClassification};
use crate::num::Scalar;

pub const DEFAULT_P_BLOCK: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ShieldError {
    #[error("inconsistent shield inputs: {0}")]
    InconsistentInputs(String),
    #[error("state {0} is not in the model")]
    UnknownState(String),
}

/// What to assume for a (state, action) pair the model has never seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnvisitedPolicy {
    #[default]
    Block,
    Allow,
}

/// Which successor product states count as violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskTarget {
    /// States from which an accepting cycle of the negated intent is reachable.
    Reachable,
    /// States lying on an accepting cycle.
    #[default]
    Cycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShieldConfig {
    pub p_block: f64,
    pub unvisited: UnvisitedPolicy,
    pub risk: RiskTarget,
    /// Restart the monitor from the initial states once the observed prefix
    /// already violates the intent, so later steps are still guarded.
    pub rearm: bool,
}

impl ShieldConfig {
    /// Literal possibility semantics with a monitor that never restarts.
    pub fn strict(p_block: f64) -> Self {
        ShieldConfig { p_block, unvisited: UnvisitedPolicy::Block, risk: RiskTarget::Reachable, rearm: false }
    }
}

impl Default for ShieldConfig {
    fn default() -> Self {
        ShieldConfig {
            p_block: DEFAULT_P_BLOCK,
            unvisited: UnvisitedPolicy::Block,
            risk: RiskTarget::Cycle,
            rearm: true,
        }
    }
}

/// Automaton states consistent with the labels seen so far.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Monitor {
    Tracking(BTreeSet<usize>),
    /// The negated intent's automaton has no run left: no violation possible.
    SafeSink,
}

impl Monitor {
    fn from_set(set: BTreeSet<usize>) -> Self {
        if set.is_empty() {
            Monitor::SafeSink
        } else {
            Monitor::Tracking(set)
        }
    }
}

impl fmt::Display for Monitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Monitor::SafeSink => f.write_str("safe-sink"),
            Monitor::Tracking(set) => {
                let parts: Vec<String> = set.iter().map(|q| format!("q{q}")).collect();
                write!(f, "{{{}}}", parts.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionVerdict {
    pub action: Action,
    pub allowed: bool,
    pub violation_probability: f64,
    pub support_count: u64,
    /// Let through by the all-blocked fallback.
    pub forced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub actions: [ActionVerdict; 3],
    pub degraded: bool,
}

impl Verdicts {
    pub fn allowed(&self) -> ActionSet {
        self.actions.iter().filter(|v| v.allowed).map(|v| v.action).collect()
    }

    pub fn get(&self, a: Action) -> &ActionVerdict {
        &self.actions[a.index()]
    }
}

/// Immutable part of a shield, shared by every monitor.
#[derive(Debug)]
pub struct ShieldCore<T = f64> {
    cmdp: Cmdp<T>,
    ba: BuchiAutomaton,
    config: ShieldConfig,
    /// Indexed by `s * |Q| + q`.
    risky: Vec<bool>,
    violating_pairs: usize,
    /// Accepting automaton states that loop on every symbol: reaching one
    /// means the prefix read so far already violates the intent.
    doomed: Vec<bool>,
}

impl<T: Scalar> ShieldCore<T> {
    pub fn cmdp(&self) -> &Cmdp<T> {
        &self.cmdp
    }

    pub fn automaton(&self) -> &BuchiAutomaton {
        &self.ba
    }

    pub fn config(&self) -> &ShieldConfig {
        &self.config
    }

    /// Number of (model state, automaton state) pairs counted as violations.
    pub fn risky_pairs(&self) -> usize {
        self.violating_pairs
    }

    fn is_risky(&self, s: usize, q: usize) -> bool {
        self.risky[s * self.ba.num_states() + q]
    }

    fn initial_monitor(&self, label: Symbol) -> Monitor {
        let set = self.ba.initial().iter().flat_map(|&q0| self.ba.successors(q0, label).iter().copied()).collect();
        Monitor::from_set(set)
    }

    fn unvisited(&self) -> f64 {
        match self.config.unvisited {
            UnvisitedPolicy::Block => 1.0,
            UnvisitedPolicy::Allow => 0.0,
        }
    }

    fn violation_probability(&self, monitor: &Monitor, s: usize, a: Action) -> (f64, u64) {
        let support = self.cmdp.count(s, a);
        let Monitor::Tracking(set) = monitor else {
            return (0.0, support);
        };
        if support == 0 {
            return (self.unvisited(), 0);
        }
        let mut mass = 0.0;
        for (s2, p) in self.cmdp.successors(s, a) {
            let label = self.cmdp.label(s2);
            let hit = set.iter().any(|&q| self.ba.successors(q, label).iter().any(|&q2| self.is_risky(s2, q2)));
            if hit {
                mass += p.as_f64();
            }
        }
        (mass.min(1.0), support)
    }

    fn verdicts(&self, probs: [(f64, u64); 3]) -> Verdicts {
        let mut actions = Action::ALL.map(|a| {
            let (p, n) = probs[a.index()];
            ActionVerdict {
                action: a,
                allowed: p < self.config.p_block,
                violation_probability: p,
                support_count: n,
                forced: false,
            }
        });
        let degraded = actions.iter().all(|v| !v.allowed);
        if degraded {
            let mut best = 0;
            for i in 1..3 {
                if actions[i].violation_probability < actions[best].violation_probability {
                    best = i;
                }
            }
            actions[best].allowed = true;
            actions[best].forced = true;
        }
        Verdicts { actions, degraded }
    }
}

/// A monitor over a shared [`ShieldCore`].
#[derive(Debug, Clone)]
pub struct Shield<T = f64> {
    core: Arc<ShieldCore<T>>,
    monitor: Monitor,
    violations: u64,
}

/// Builds a shield from the model, the negated intent's automaton and the
/// classification of their product.
pub fn new_shield<T: Scalar>(
    cmdp: Cmdp<T>,
    ba_neg: BuchiAutomaton,
    classification: &UnsafeClassification,
    config: ShieldConfig,
) -> Result<Shield<T>, ShieldError> {
    let bad = |m: String| Err(ShieldError::InconsistentInputs(m));
    if !(config.p_block > 0.0 && config.p_block <= 1.0) {
        return bad(format!("p_block must lie in (0, 1], got {}", config.p_block));
    }
    if cmdp.propositions() != ba_neg.propositions() {
        return bad("automaton and model propositions differ".into());
    }
    let (ns, nq) = (cmdp.num_states(), ba_neg.num_states());
    if let Some(&(s, q)) = classification.pairs.iter().find(|&&(s, q)| s >= ns || q >= nq) {
        return bad(format!("classified pair ({s}, {q}) outside {ns} x {nq}"));
    }
    // Verdicts are needed for pairs the offline product never reached, so
    // classify every pair; the two must agree where they overlap.
    let full = build_complete_product(&cmdp, &ba_neg).map_err(|e| ShieldError::InconsistentInputs(e.to_string()))?;
    let full_cls = classify_unsafe(&full, Vec::new());
    let index = full.index();
    for (k, pair) in classification.pairs.iter().enumerate() {
        if full_cls.violating[index[pair]] != classification.violating[k] {
            return bad(format!("classification disagrees with the model at {pair:?}"));
        }
    }
    let mut risky = vec![false; ns * nq];
    for (i, &(s, q)) in full.pairs().iter().enumerate() {
        risky[s * nq + q] = match config.risk {
            RiskTarget::Reachable => full_cls.violating[i],
            RiskTarget::Cycle => full_cls.on_accepting_cycle[i],
        };
    }
    let violating_pairs = risky.iter().filter(|&&r| r).count();
    let doomed = (0..nq)
        .map(|q| {
            ba_neg.is_accepting(q)
                && (0..ba_neg.num_symbols()).all(|k| ba_neg.successors(q, Symbol(k as u32)).contains(&q))
        })
        .collect();
    let core = ShieldCore { cmdp, ba: ba_neg, config, risky, violating_pairs, doomed };
    let monitor = Monitor::Tracking(core.ba.initial().iter().copied().collect());
    Ok(Shield { core: Arc::new(core), monitor, violations: 0 })
}

impl<T: Scalar> Shield<T> {
    /// A fresh monitor sharing this shield's core.
    pub fn fork(&self) -> Self {
        Shield { core: Arc::clone(&self.core), monitor: self.monitor.clone(), violations: 0 }
    }

    pub fn core(&self) -> &ShieldCore<T> {
        &self.core
    }

    pub fn monitor(&self) -> &Monitor {
        &self.monitor
    }

    fn lookup(&self, s: &DiscreteState) -> Result<usize, ShieldError> {
        self.core.cmdp.index_of(s).ok_or_else(|| ShieldError::UnknownState(s.to_string()))
    }

    /// Starts a new run in `s`: the monitor reads `L(s)` from the initial states.
    pub fn reset(&mut self, s: &DiscreteState) -> Result<(), ShieldError> {
        let i = self.lookup(s)?;
        self.reset_label(self.core.cmdp.label(i));
        Ok(())
    }

    pub fn reset_label(&mut self, label: Symbol) {
        self.monitor = self.core.initial_monitor(label);
        self.violations = 0;
        self.check_violation();
    }

    /// Prefixes seen to violate the intent since the last reset. Only
    /// counted when re-arming is enabled.
    pub fn violations(&self) -> u64 {
        self.violations
    }

    fn check_violation(&mut self) {
        if !self.core.config.rearm {
            return;
        }
        if let Monitor::Tracking(set) = &self.monitor {
            if set.iter().any(|&q| self.core.doomed[q]) {
                self.violations += 1;
                self.monitor = Monitor::Tracking(self.core.ba.initial().iter().copied().collect());
            }
        }
    }

    pub fn violation_probability(&self, s: &DiscreteState, a: Action) -> Result<(f64, u64), ShieldError> {
        let i = self.lookup(s)?;
        Ok(self.core.violation_probability(&self.monitor, i, a))
    }

    pub fn filter_actions(&self, s: &DiscreteState) -> Result<Verdicts, ShieldError> {
        let i = self.lookup(s)?;
        Ok(self.core.verdicts(Action::ALL.map(|a| self.core.violation_probability(&self.monitor, i, a))))
    }

    /// Verdicts for a state absent from the model: every action is unvisited.
    pub fn filter_unknown(&self) -> Verdicts {
        let p = match self.monitor {
            Monitor::SafeSink => 0.0,
            Monitor::Tracking(_) => self.core.unvisited(),
        };
        self.core.verdicts([(p, 0); 3])
    }

    pub fn advance(&mut self, s: &DiscreteState) -> Result<(), ShieldError> {
        let i = self.lookup(s)?;
        self.advance_label(self.core.cmdp.label(i));
        Ok(())
    }

    pub fn advance_label(&mut self, label: Symbol) {
        if let Monitor::Tracking(set) = &self.monitor {
            self.monitor = Monitor::from_set(self.core.ba.post(set, label));
        }
        self.check_violation();
    }
}

/// Per-cell shield monitors driving an agent.
#[derive(Debug)]
pub struct ShieldGuard<T = f64> {
    template: Shield<T>,
    monitors: Vec<Shield<T>>,
}

impl<T: Scalar> ShieldGuard<T> {
    pub fn new(shield: Shield<T>) -> Result<Self, ShieldError> {
        if shield.core.cmdp.abstraction().is_none() {
            return Err(ShieldError::InconsistentInputs("model has no feature abstraction".into()));
        }
        Ok(ShieldGuard { template: shield, monitors: Vec::new() })
    }

    fn encode(&self, features: &[T]) -> (DiscreteState, Symbol) {
        let abs = self.template.core.cmdp.abstraction().expect("checked in new");
        let s = abs.encode(features).expect("features are normalized");
        let label = abs.label(&s);
        (s, label)
    }
}

impl<T: Scalar> ActionGuard<T> for ShieldGuard<T> {
    fn begin_episode(&mut self, features: &[Vec<T>]) {
        self.monitors = features
            .iter()
            .map(|f| {
                let mut m = self.template.fork();
                m.reset_label(self.encode(f).1);
                m
            })
            .collect();
    }

    fn decide(&mut self, cell: usize, features: &[T]) -> GuardDecision {
        let (s, _) = self.encode(features);
        let m = &self.monitors[cell];
        let v = m.filter_actions(&s).unwrap_or_else(|_| m.filter_unknown());
        GuardDecision {
            allowed: v.allowed(),
            violation_probability: v.actions.map(|a| a.violation_probability),
            support: v.actions.map(|a| a.support_count),
            degraded: v.degraded,
            state: s.to_string(),
            monitor: m.monitor.to_string(),
        }
    }

    fn observe(&mut self, cell: usize, features: &[T]) {
        let label = self.encode(features).1;
        self.monitors[cell].advance_label(label);
    }
}

/// A proposal the shield refused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEvent {
    pub episode: usize,
    pub t: u64,
    pub cell_id: usize,
    pub state: String,
    pub monitor: String,
    pub proposed: Action,
    pub chosen: Action,
    pub violation_probability: f64,
    pub support: u64,
    pub degraded: bool,
}

impl BlockEvent {
    pub fn from_step<T: Scalar>(rec: &StepRecord<T>) -> Option<Self> {
        let d = rec.decision.as_ref()?;
        if d.allowed.contains(rec.proposed) {
            return None;
        }
        let i = rec.proposed.index();
        Some(BlockEvent {
            episode: rec.episode,
            t: rec.t,
            cell_id: rec.cell_id,
            state: d.state.clone(),
            monitor: d.monitor.clone(),
            proposed: rec.proposed,
            chosen: rec.chosen,
            violation_probability: d.violation_probability[i],
            support: d.support[i],
            degraded: d.degraded,
        })
    }
}

/// Columns `episode,t,cell_id,state,monitor,proposed,chosen,verdict,violation_probability,support,degraded`.
pub fn write_block_events_csv<W: io::Write>(events: &[BlockEvent], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "episode",
        "t",
        "cell_id",
        "state",
        "monitor",
        "proposed",
        "chosen",
        "verdict",
        "violation_probability",
        "support",
        "degraded",
    ])?;
    for e in events {
        w.write_record([
            e.episode.to_string(),
            e.t.to_string(),
            e.cell_id.to_string(),
            e.state.clone(),
            e.monitor.clone(),
            e.proposed.to_string(),
            e.chosen.to_string(),
            "blocked".to_string(),
            e.violation_probability.to_string(),
            e.support.to_string(),
            e.degraded.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
