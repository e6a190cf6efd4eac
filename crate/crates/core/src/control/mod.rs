//! End-to-end runs: collect experience, abstract, model-check, shield,
//! evaluate; plus shield/no-shield comparisons and run artifacts.

mod artifacts;
mod events;

use std::path::{Path, PathBuf};
use std::thread;

use serde::{Deserialize, Serialize};

pub use artifacts::{write_comparison_dir, write_run_dir, Manifest, ManifestEntry};
pub use events::{read_events_jsonl, write_events_jsonl, Event, EventSink, NullSink, Phase, RunMetrics, StepEvent};

use crate::abstraction::{build_cmdp, select_features, Abstraction, AbstractionError};
use crate::agent::{ActionGuard, Agent, AgentConfig, AgentError, Experience, StepRecord};
use crate::feature::Feature;
use crate::ltl::{negate, to_buchi, Formula, Intent, LtlError, Symbol};
use crate::modelcheck::{
    build_product, check_realizability, classify_unsafe, find_violating_lassos, ModelCheckError, SafeTraceReport,
    DEFAULT_WITNESS_CAP,
};
use crate::num::Scalar;
use crate::shield::{
    new_shield, BlockEvent, RiskTarget, ShieldConfig, ShieldError, ShieldGuard, UnvisitedPolicy, DEFAULT_P_BLOCK,
};
use crate::simnet::{init_network, CellObservation, NetworkConfig, SimError, TrajectoryRow};

#[derive(Debug, thiserror::Error)]
pub enum ControlError {
    #[error("no safe trace: {diagnostic}")]
    NoSafeTrace { intent: String, diagnostic: String },
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ltl(#[from] LtlError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
    #[error(transparent)]
    ModelCheck(#[from] ModelCheckError),
    #[error(transparent)]
    Shield(#[from] ShieldError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl ControlError {
    /// Process exit code: 2 for an unrealizable intent, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ControlError::NoSafeTrace { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ControlError::Io { path: path.to_path_buf(), source }
    }
}

/// Everything a run needs besides the intent text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Path of the intent file.
    pub intent: PathBuf,
    pub network: NetworkConfig,
    /// `episodes` is ignored by the pipeline; the phase lengths below apply.
    pub agent: AgentConfig,
    pub n_bins: usize,
    pub p_block: f64,
    pub shield: bool,
    pub seeds: Vec<u64>,
    pub collection_episodes: usize,
    pub eval_episodes: usize,
    pub risk: RiskTarget,
    pub rearm: bool,
    pub unvisited: UnvisitedPolicy,
    pub witness_cap: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let shield = ShieldConfig::default();
        RunConfig {
            intent: PathBuf::new(),
            network: NetworkConfig::default(),
            agent: AgentConfig::default(),
            n_bins: 3,
            p_block: DEFAULT_P_BLOCK,
            shield: true,
            seeds: vec![1, 2, 3, 4, 5],
            collection_episodes: 50,
            eval_episodes: 50,
            risk: shield.risk,
            rearm: shield.rearm,
            unvisited: shield.unvisited,
            witness_cap: DEFAULT_WITNESS_CAP,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: &str| Err(ControlError::InvalidConfig(m.to_string()));
        if self.seeds.is_empty() {
            return bad("seeds must be nonempty");
        }
        if self.n_bins < 2 {
            return bad("n_bins must be at least 2");
        }
        if !(self.p_block > 0.0 && self.p_block <= 1.0) {
            return bad("p_block must lie in (0, 1]");
        }
        if self.collection_episodes == 0 {
            return bad("collection_episodes must be positive");
        }
        self.network.validate()?;
        self.agent.validate()?;
        Ok(())
    }

    pub fn shield_config(&self) -> ShieldConfig {
        ShieldConfig { p_block: self.p_block, unvisited: self.unvisited, risk: self.risk, rearm: self.rearm }
    }

    pub fn load_intent(&self) -> Result<Intent, ControlError> {
        let text = std::fs::read_to_string(&self.intent).map_err(|e| ControlError::io(&self.intent, e))?;
        Ok(Intent::from_file_text(&text)?)
    }
}

/// Seed of the agent's RNG, kept apart from the simulator's stream.
pub fn agent_seed(seed: u64) -> u64 {
    seed ^ 0x5DEE_CE66_D1CE_5EED
}

/// Rendered model-checking artifacts of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub ba_dot: String,
    pub ba_neg_dot: String,
    pub cmdp_dot: String,
    pub cmdp_json: String,
    pub product_dot: String,
    pub witnesses_json: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: String,
    pub seed: u64,
    pub config: RunConfig,
    pub intent: Intent,
    pub metrics: RunMetrics,
    pub events: Vec<Event>,
    pub block_events: Vec<BlockEvent>,
    /// Evaluation phase only.
    pub trajectory: Vec<TrajectoryRow>,
    pub experience_csv: String,
    pub qtable_csv: String,
    pub realizability: SafeTraceReport,
    pub artifacts: Artifacts,
}

/// State-level constraints and eventualities read off the intent's
/// top-level conjuncts: `G ψ` and `F ψ` / `G F ψ` with propositional `ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntentChecks {
    pub props: Vec<String>,
    pub safety: Vec<Formula>,
    pub eventualities: Vec<Formula>,
}

impl IntentChecks {
    pub fn of(intent: &Intent) -> Self {
        let mut safety = Vec::new();
        let mut eventualities = Vec::new();
        for c in intent.formula.conjuncts() {
            match c {
                Formula::Always(inner) if inner.is_propositional() => safety.push((**inner).clone()),
                Formula::Eventually(inner) if inner.is_propositional() => eventualities.push((**inner).clone()),
                Formula::Always(inner) => match &**inner {
                    Formula::Eventually(e) if e.is_propositional() => eventualities.push((**e).clone()),
                    _ => {}
                },
                _ => {}
            }
        }
        IntentChecks { props: intent.bindings.names(), safety, eventualities }
    }

    fn truth(&self, label: Symbol) -> impl Fn(&str) -> bool + '_ {
        move |name| self.props.iter().position(|p| p == name).is_some_and(|i| label.holds(i))
    }

    pub fn is_safe(&self, label: Symbol) -> bool {
        let t = self.truth(label);
        self.safety.iter().all(|f| f.holds_now(&t))
    }

    /// Bit `i` set when eventuality `i` holds under `label`.
    pub fn met(&self, label: Symbol) -> u64 {
        let t = self.truth(label);
        self.eventualities.iter().enumerate().fold(0, |m, (i, f)| if f.holds_now(&t) { m | 1 << i } else { m })
    }

    pub fn names(&self, label: Symbol) -> Vec<String> {
        self.props.iter().enumerate().filter(|&(i, _)| label.holds(i)).map(|(_, p)| p.clone()).collect()
    }
}

/// Turns agent step callbacks into events, trajectory rows and block events.
struct Recorder<'a, T: Scalar> {
    sink: &'a mut dyn EventSink,
    events: Vec<Event>,
    abstraction: &'a Abstraction<T>,
    checks: &'a IntentChecks,
    phase: Phase,
    cells: usize,
    steps: usize,
    seen: usize,
    episode_reward: f64,
    met: Vec<u64>,
    trajectory: Vec<TrajectoryRow>,
    block_events: Vec<BlockEvent>,
}

impl<T: Scalar> Recorder<'_, T> {
    fn emit(&mut self, e: Event) {
        self.sink.emit(&e);
        self.events.push(e);
    }

    fn on_step(&mut self, rec: &StepRecord<T>, e: &Experience<T>) {
        let s = self.abstraction.encode(&e.features).expect("normalized features");
        let s2 = self.abstraction.encode(&e.next_features).expect("normalized features");
        let label = self.abstraction.label(&s2);
        let cell = self.seen % self.cells;
        if rec.t == 0 {
            self.met[cell] |= self.checks.met(self.abstraction.label(&s));
        }
        self.met[cell] |= self.checks.met(label);
        let reward = e.reward.as_f64();
        self.episode_reward += reward;

        let d = rec.decision.as_ref();
        let blocked = d.is_some_and(|d| !d.allowed.contains(rec.proposed));
        if self.phase == Phase::Evaluation {
            let obs = CellObservation { cell_id: rec.cell_id, tilt: rec.tilt, kpi: rec.kpi };
            self.trajectory.push(TrajectoryRow::new(rec.episode, rec.t, &obs, rec.chosen, e.reward));
        }
        if let Some(b) = BlockEvent::from_step(rec) {
            self.block_events.push(b);
        }
        self.emit(Event::Step(StepEvent {
            phase: self.phase,
            episode: rec.episode,
            t: rec.t,
            cell_id: rec.cell_id,
            tilt: rec.tilt.as_f64(),
            state: s.to_string(),
            next_state: s2.to_string(),
            label: self.checks.names(label),
            safe: self.checks.is_safe(label),
            proposed: rec.proposed,
            chosen: rec.chosen,
            blocked,
            color: if blocked { "red" } else { "blue" }.to_string(),
            allowed: d.map_or_else(|| crate::action::ActionSet::ALL.iter().collect(), |d| d.allowed.iter().collect()),
            violation_probability: d.map(|d| d.violation_probability),
            support: d.map(|d| d.support),
            degraded: d.is_some_and(|d| d.degraded),
            monitor: d.map(|d| d.monitor.clone()),
            reward,
        }));

        self.seen += 1;
        if self.seen == self.cells * self.steps {
            let n = self.checks.eventualities.len();
            self.emit(Event::EpisodeEnd {
                phase: self.phase,
                episode: rec.episode,
                reward: self.episode_reward,
                eventualities_met: self.met.iter().map(|m| m.count_ones() as usize).sum(),
                eventualities_total: n * self.cells,
            });
            self.seen = 0;
            self.episode_reward = 0.0;
            self.met.iter_mut().for_each(|m| *m = 0);
        }
    }
}

/// Loads the intent named by `cfg` and runs with its first seed.
pub fn run_pipeline(cfg: &RunConfig, sink: &mut dyn EventSink) -> Result<RunRecord, ControlError> {
    let intent = cfg.load_intent()?;
    let seed = *cfg.seeds.first().ok_or_else(|| ControlError::InvalidConfig("seeds must be nonempty".into()))?;
    run_pipeline_with::<f64>(cfg, &intent, seed, sink)
}

/// Full run for one seed: collect unshielded experience, build the model,
/// check the intent, then evaluate with or without the shield while
/// learning continues.
pub fn run_pipeline_with<T: Scalar>(
    cfg: &RunConfig,
    intent: &Intent,
    seed: u64,
    sink: &mut dyn EventSink,
) -> Result<RunRecord, ControlError> {
    cfg.validate()?;
    let intent_name = intent.name.clone().unwrap_or_else(|| intent.text.clone());
    let run_id = format!(
        "{}-seed{seed}-{}",
        intent.name.as_deref().unwrap_or("intent"),
        if cfg.shield { "shield" } else { "noshield" }
    );
    let mut sim = init_network::<T>(NetworkConfig { seed, ..cfg.network.clone() })?;
    let mut agent = Agent::<T>::new(cfg.agent.clone(), agent_seed(seed))?;
    let selection = select_features(&intent.bindings, &Feature::ALL)?;
    let abstraction = Abstraction::<T>::new(selection.clone(), cfg.n_bins, &intent.bindings)?;
    let checks = IntentChecks::of(intent);
    let total = cfg.collection_episodes + cfg.eval_episodes;

    let mut rec = Recorder {
        sink,
        events: Vec::new(),
        abstraction: &abstraction,
        checks: &checks,
        phase: Phase::Collection,
        cells: sim.num_cells(),
        steps: cfg.agent.steps_per_episode,
        seen: 0,
        episode_reward: 0.0,
        met: vec![0; sim.num_cells()],
        trajectory: Vec::new(),
        block_events: Vec::new(),
    };
    rec.emit(Event::RunStarted { run_id: run_id.clone(), intent: intent_name.clone(), seed, shield: cfg.shield });
    rec.emit(Event::PhaseStarted { phase: Phase::Collection });
    let buffer = agent.run_episodes(&mut sim, cfg.collection_episodes, total, None, &mut |r, e| rec.on_step(r, e))?;

    let cmdp = build_cmdp(&buffer, &selection, cfg.n_bins, &intent.bindings)?;
    let ba_pos = to_buchi(&intent.formula, &intent.bindings)?;
    let ba_neg = to_buchi(&negate(&intent.formula), &intent.bindings)?;
    let realizability = check_realizability(&cmdp, &ba_pos)?;
    if let Some(diagnostic) = realizability.diagnostic(&intent_name) {
        return Err(ControlError::NoSafeTrace { intent: intent_name, diagnostic });
    }
    let product = build_product(&cmdp, &ba_neg)?;
    let classification = classify_unsafe(&product, find_violating_lassos(&product, cfg.witness_cap));
    let artifacts = Artifacts {
        ba_dot: ba_pos.to_dot(),
        ba_neg_dot: ba_neg.to_dot(),
        cmdp_dot: cmdp.to_dot(),
        cmdp_json: cmdp.to_json(),
        product_dot: product.to_dot(&cmdp, Some(&classification)),
        witnesses_json: classification.witnesses_json(),
    };
    rec.emit(Event::Model {
        states: cmdp.num_states(),
        product_states: product.num_states(),
        violating: classification.num_violating(),
        witnesses: classification.witnesses.len(),
        snaps: cmdp.snaps().to_vec(),
    });

    let mut guard = if cfg.shield {
        let shield = new_shield(cmdp.clone(), ba_neg.clone(), &classification, cfg.shield_config())?;
        Some(ShieldGuard::new(shield)?)
    } else {
        None
    };
    rec.phase = Phase::Evaluation;
    rec.emit(Event::PhaseStarted { phase: Phase::Evaluation });
    let guard_ref = guard.as_mut().map(|g| g as &mut dyn ActionGuard<T>);
    agent.run_episodes(&mut sim, cfg.eval_episodes, total, guard_ref, &mut |r, e| rec.on_step(r, e))?;

    let metrics = RunMetrics::from_events(&rec.events);
    rec.emit(Event::RunFinished { metrics: metrics.clone() });

    let mut experience_csv = Vec::new();
    buffer.write_csv(&mut experience_csv)?;
    let mut qtable_csv = Vec::new();
    agent.q_table().write_csv(&mut qtable_csv)?;
    Ok(RunRecord {
        run_id,
        seed,
        config: cfg.clone(),
        intent: intent.clone(),
        metrics,
        events: rec.events,
        block_events: rec.block_events,
        trajectory: rec.trajectory,
        experience_csv: String::from_utf8(experience_csv).expect("utf8"),
        qtable_csv: String::from_utf8(qtable_csv).expect("utf8"),
        realizability,
        artifacts,
    })
}

/// Automata and realizability verdict for an intent, without an evaluation phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntentCheck {
    pub intent: String,
    pub ba_dot: String,
    pub ba_neg_dot: String,
    pub ba_states: usize,
    pub ba_accepting: usize,
    /// States of the model learned from the collection phase.
    pub model_states: usize,
    pub realizability: SafeTraceReport,
}

/// Collects unshielded experience for `seed`, builds the model and checks
/// whether `intent` has a satisfying trace on it.
pub fn check_intent<T: Scalar>(cfg: &RunConfig, intent: &Intent, seed: u64) -> Result<IntentCheck, ControlError> {
    cfg.validate()?;
    let mut sim = init_network::<T>(NetworkConfig { seed, ..cfg.network.clone() })?;
    let mut agent = Agent::<T>::new(cfg.agent.clone(), agent_seed(seed))?;
    let selection = select_features(&intent.bindings, &Feature::ALL)?;
    let total = cfg.collection_episodes + cfg.eval_episodes;
    let buffer = agent.run_episodes(&mut sim, cfg.collection_episodes, total, None, &mut |_, _| {})?;
    let cmdp = build_cmdp(&buffer, &selection, cfg.n_bins, &intent.bindings)?;
    let ba_pos = to_buchi(&intent.formula, &intent.bindings)?;
    let ba_neg = to_buchi(&negate(&intent.formula), &intent.bindings)?;
    Ok(IntentCheck {
        intent: intent.name.clone().unwrap_or_else(|| intent.text.clone()),
        ba_dot: ba_pos.to_dot(),
        ba_neg_dot: ba_neg.to_dot(),
        ba_states: ba_pos.num_states(),
        ba_accepting: ba_pos.accepting_states().count(),
        model_states: cmdp.num_states(),
        realizability: check_realizability(&cmdp, &ba_pos)?,
    })
}

/// One line of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub seed: u64,
    pub shield: bool,
    pub cumulative_reward: f64,
    pub safe_state_fraction: f64,
    pub unsafe_state_count: u64,
    pub blocked_action_count: u64,
    pub degraded_count: u64,
}

impl ComparisonRow {
    fn of(r: &RunRecord) -> Self {
        let m = &r.metrics;
        ComparisonRow {
            seed: r.seed,
            shield: r.config.shield,
            cumulative_reward: m.cumulative_reward,
            safe_state_fraction: m.safe_state_fraction,
            unsafe_state_count: m.unsafe_state_count,
            blocked_action_count: m.blocked_action_count,
            degraded_count: m.degraded_count,
        }
    }
}

/// Medians over seeds of one mode, or of the per-seed with-minus-without deltas.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Medians {
    pub cumulative_reward: f64,
    pub safe_state_fraction: f64,
    pub unsafe_state_count: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Per seed, without shield first.
    pub rows: Vec<ComparisonRow>,
    pub with_shield: Medians,
    pub without_shield: Medians,
    pub delta: Medians,
    pub records: Vec<RunRecord>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

fn medians(rows: impl Iterator<Item = (f64, f64, f64)> + Clone) -> Medians {
    let col = |k: usize| -> Vec<f64> { rows.clone().map(|r| [r.0, r.1, r.2][k]).collect() };
    Medians {
        cumulative_reward: median(&col(0)),
        safe_state_fraction: median(&col(1)),
        unsafe_state_count: median(&col(2)),
    }
}

/// Runs every seed twice, differing only in the shield flag. Seeds run on
/// separate threads.
pub fn compare_shield<T: Scalar>(cfg: &RunConfig, intent: &Intent) -> Result<Comparison, ControlError> {
    cfg.validate()?;
    if cfg.seeds.len() < 3 {
        return Err(ControlError::InvalidConfig("comparison needs at least 3 seeds".into()));
    }
    let jobs: Vec<(u64, bool)> = cfg.seeds.iter().flat_map(|&s| [(s, false), (s, true)]).collect();
    let results: Vec<Result<RunRecord, ControlError>> = thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(seed, shield)| {
                let c = RunConfig { shield, ..cfg.clone() };
                scope.spawn(move || run_pipeline_with::<T>(&c, intent, seed, &mut NullSink))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    });
    let records = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<ComparisonRow> = records.iter().map(ComparisonRow::of).collect();
    let triple = |r: &ComparisonRow| (r.cumulative_reward, r.safe_state_fraction, r.unsafe_state_count as f64);
    let with = rows.iter().filter(|r| r.shield).map(triple);
    let without = rows.iter().filter(|r| !r.shield).map(triple);
    let deltas = rows.chunks(2).map(|p| {
        let (a, b) = (triple(&p[0]), triple(&p[1]));
        (b.0 - a.0, b.1 - a.1, b.2 - a.2)
    });
    Ok(Comparison {
        with_shield: medians(with),
        without_shield: medians(without),
        delta: medians(deltas),
        rows,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::Intent;

    pub(crate) fn tiny(shield: bool) -> RunConfig {
        RunConfig {
            network: NetworkConfig { num_ues: 60, ..Default::default() },
            agent: AgentConfig { steps_per_episode: 4, ..Default::default() },
            collection_episodes: 4,
            eval_episodes: 3,
            shield,
            ..Default::default()
        }
    }

    fn phi1() -> Intent {
        Intent::from_file_text(
            "name: phi1\nformula: G(!sinrLow & quaHigh & covHigh)\npropositions:\n  sinrLow sinr < 0.333\n  quaHigh quality >= 0.667\n  covHigh coverage >= 0.667\n",
        )
        .unwrap()
    }

    #[test]
    fn intent_checks() {
        let c = IntentChecks::of(&phi1());
        assert_eq!(c.safety.len(), 1);
        assert!(c.eventualities.is_empty());
        // bits: sinrLow=0, quaHigh=1, covHigh=2
        assert!(c.is_safe(Symbol(0b110)));
        assert!(!c.is_safe(Symbol(0b111)));
        let phi3 = Intent::from_file_text(
            "formula: G(F covHigh) & F qualHigh\npropositions:\n  covHigh coverage >= 0.5\n  qualHigh quality >= 0.5\n",
        )
        .unwrap();
        let c3 = IntentChecks::of(&phi3);
        assert!(c3.safety.is_empty());
        assert_eq!(c3.eventualities.len(), 2);
        assert_eq!(c3.met(Symbol(0b10)), 0b10);
    }

    #[test]
    fn pipeline_completes_and_replays() {
        let mut streamed = Vec::new();
        let r = run_pipeline_with::<f64>(&tiny(true), &phi1(), 7, &mut streamed).unwrap();
        assert_eq!(streamed, r.events);
        assert_eq!(RunMetrics::from_events(&r.events), r.metrics);
        assert_eq!(r.metrics.episode_rewards.len(), 3);
        assert_eq!(r.trajectory.len(), 3 * 4 * 21);
        assert!(r.artifacts.ba_dot.starts_with("digraph"));
        assert!(r.artifacts.product_dot.contains("->"));
        assert!(matches!(r.events.last(), Some(Event::RunFinished { .. })));
        let blocked = r.events.iter().filter(|e| matches!(e, Event::Step(s) if s.blocked)).count();
        assert_eq!(blocked, r.block_events.len());
        assert_eq!(blocked as u64, r.metrics.blocked_action_count);
    }

    #[test]
    fn shield_off_never_blocks() {
        let r = run_pipeline_with::<f64>(&tiny(false), &phi1(), 7, &mut NullSink).unwrap();
        assert_eq!(r.metrics.blocked_action_count, 0);
        assert!(r.block_events.is_empty());
        assert!(r.events.iter().all(|e| !matches!(e, Event::Step(s) if s.color == "red")));
    }

    #[test]
    fn unrealizable_intent_is_reported() {
        let never =
            Intent::from_file_text("name: never\nformula: G covLow\npropositions:\n  covLow coverage < 0.333\n")
                .unwrap();
        let err = run_pipeline_with::<f64>(&tiny(true), &never, 1, &mut NullSink).unwrap_err();
        assert!(matches!(err, ControlError::NoSafeTrace { .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig { seeds: vec![], ..tiny(true) }.validate().is_err());
        assert!(RunConfig { n_bins: 1, ..tiny(true) }.validate().is_err());
        assert!(RunConfig { p_block: 0.0, ..tiny(true) }.validate().is_err());
        assert!(tiny(true).validate().is_ok());
    }

    #[test]
    fn comparison_table_shape() {
        let cfg = RunConfig { seeds: vec![1, 2, 3], ..tiny(true) };
        let c = compare_shield::<f64>(&cfg, &phi1()).unwrap();
        assert_eq!(c.rows.len(), 6);
        for pair in c.rows.chunks(2) {
            assert_eq!(pair[0].seed, pair[1].seed);
            assert!(!pair[0].shield && pair[1].shield);
            assert_eq!(pair[0].blocked_action_count, 0);
        }
        assert!(compare_shield::<f64>(&RunConfig { seeds: vec![1, 2], ..tiny(true) }, &phi1()).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
