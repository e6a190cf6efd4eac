//! Tabular Q-learning over discretized per-cell states, with ε-greedy
//! exploration and a replay memory shared by all cells.

use std::collections::BTreeMap;
use std::io;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abstraction::{AbstractionError, Discretizer, FeatureSelection};
use crate::action::{Action, ActionSet};
use crate::feature::Feature;
use crate::num::Scalar;
use crate::shield::BlockEvent;
use crate::simnet::{KpiVector, SimError, Simulation};

/// Discrete state id as produced by the agent's encoder.
pub type StateId = u64;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("allowed action set is empty")]
    EmptyAllowedSet,
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed csv: {0}")]
    MalformedCsv(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub gamma: f64,
    pub eta: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub batch_size: usize,
    pub episodes: usize,
    pub steps_per_episode: usize,
    /// Features the agent's state encoder bins.
    pub state_features: Vec<Feature>,
    pub state_bins: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.9,
            eta: 0.1,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            batch_size: 50,
            episodes: 50,
            steps_per_episode: 20,
            state_features: vec![Feature::Tilt, Feature::Coverage, Feature::Quality, Feature::Sinr],
            state_bins: 4,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon must lie in [0, 1]");
        }
        if self.state_bins < 2 {
            return bad("state_bins must be at least 2");
        }
        FeatureSelection::new(self.state_features.clone())
            .map_err(|_| AgentError::InvalidConfig("state_features must be nonempty and unique".into()))?;
        Ok(())
    }

    /// Linear decay from `epsilon_start` at episode 0 to `epsilon_end` at
    /// episode `total - 1`.
    pub fn epsilon(&self, episode: usize, total: usize) -> f64 {
        if total <= 1 {
            return self.epsilon_start;
        }
        let frac = (episode.min(total - 1)) as f64 / (total - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// One transition of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience<T = f64> {
    pub s: StateId,
    pub action: Action,
    pub reward: T,
    pub s_next: StateId,
    pub cell_id: usize,
    /// Step index within the episode.
    pub t: u64,
    /// Full feature vectors in schema order, before and after the step.
    pub features: Vec<T>,
    pub next_features: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperienceBuffer<T = f64>(Vec<Experience<T>>);

impl<T> From<Vec<Experience<T>>> for ExperienceBuffer<T> {
    fn from(v: Vec<Experience<T>>) -> Self {
        ExperienceBuffer(v)
    }
}

impl<T: Scalar> ExperienceBuffer<T> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, e: Experience<T>) {
        self.0.push(e);
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Experience<T>> {
        self.0.iter()
    }

    pub fn get(&self, i: usize) -> &Experience<T> {
        &self.0[i]
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = Experience<T>>) {
        self.0.extend(other);
    }

    /// Columns `s,a,r,s_next,cell_id,t`, then `f_<feature>` and
    /// `next_<feature>` for every schema feature.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), AgentError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["s", "a", "r", "s_next", "cell_id", "t"].map(String::from).to_vec();
        header.extend(Feature::ALL.iter().map(|f| format!("f_{}", f.name())));
        header.extend(Feature::ALL.iter().map(|f| format!("next_{}", f.name())));
        w.write_record(&header)?;
        for e in &self.0 {
            let mut row = vec![
                e.s.to_string(),
                e.action.to_string(),
                e.reward.to_string(),
                e.s_next.to_string(),
                e.cell_id.to_string(),
                e.t.to_string(),
            ];
            row.extend(e.features.iter().chain(&e.next_features).map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<Self, AgentError> {
        let mut r = csv::Reader::from_reader(input);
        let n = Feature::ALL.len();
        let mut out = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 6 + 2 * n {
                return Err(AgentError::MalformedCsv(format!("expected {} columns, got {}", 6 + 2 * n, rec.len())));
            }
            let bad = |col: &str| AgentError::MalformedCsv(format!("bad value in column {col}"));
            let num = |i: usize| -> Result<T, AgentError> {
                let v: f64 = rec[i].parse().map_err(|_| bad(&i.to_string()))?;
                Ok(T::of(v))
            };
            let features = (6..6 + n).map(num).collect::<Result<Vec<_>, _>>()?;
            let next_features = (6 + n..6 + 2 * n).map(num).collect::<Result<Vec<_>, _>>()?;
            out.push(Experience {
                s: rec[0].parse().map_err(|_| bad("s"))?,
                action: rec[1].parse().map_err(|_| bad("a"))?,
                reward: num(2)?,
                s_next: rec[3].parse().map_err(|_| bad("s_next"))?,
                cell_id: rec[4].parse().map_err(|_| bad("cell_id"))?,
                t: rec[5].parse().map_err(|_| bad("t"))?,
                features,
                next_features,
            });
        }
        Ok(ExperienceBuffer(out))
    }
}

/// Action values per state; unseen pairs read as zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QTable<T = f64>(BTreeMap<StateId, [T; 3]>);

impl<T: Scalar> QTable<T> {
    pub fn new() -> Self {
        QTable(BTreeMap::new())
    }

    pub fn get(&self, s: StateId, a: Action) -> T {
        self.row(s)[a.index()]
    }

    pub fn row(&self, s: StateId) -> [T; 3] {
        self.0.get(&s).copied().unwrap_or([T::zero(); 3])
    }

    pub fn set(&mut self, s: StateId, a: Action, v: T) {
        assert!(v.is_finite(), "non-finite Q value");
        self.0.entry(s).or_insert([T::zero(); 3])[a.index()] = v;
    }

    pub fn max(&self, s: StateId) -> T {
        let r = self.row(s);
        r[0].max(r[1]).max(r[2])
    }

    /// Number of states with a stored row.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, [T; 3])> + '_ {
        self.0.iter().map(|(&s, &r)| (s, r))
    }

    /// Columns `state,q_minus,q_zero,q_plus`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), AgentError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state", "q_minus", "q_zero", "q_plus"])?;
        for (s, r) in self.iter() {
            w.write_record([s.to_string(), r[0].to_string(), r[1].to_string(), r[2].to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<Self, AgentError> {
        let mut r = csv::Reader::from_reader(input);
        let mut q = QTable::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(AgentError::MalformedCsv("expected 4 columns".into()));
            }
            let parse = |i: usize| rec[i].parse::<f64>().map_err(|_| AgentError::MalformedCsv(format!("column {i}")));
            let s = rec[0].parse().map_err(|_| AgentError::MalformedCsv("state".into()))?;
            for a in Action::ALL {
                q.set(s, a, T::of(parse(a.index() + 1)?));
            }
        }
        Ok(q)
    }
}

/// ε-greedy choice restricted to `allowed`; greedy ties go to the first
/// action in `Down, Stay, Up` order.
pub fn select_action<T: Scalar, R: Rng + ?Sized>(
    q: &QTable<T>,
    s: StateId,
    epsilon: f64,
    allowed: ActionSet,
    rng: &mut R,
) -> Result<Action, AgentError> {
    let explore = epsilon > 0.0 && rng.gen::<f64>() < epsilon;
    choose(q, s, explore, allowed, rng)
}

fn choose<T: Scalar, R: Rng + ?Sized>(
    q: &QTable<T>,
    s: StateId,
    explore: bool,
    allowed: ActionSet,
    rng: &mut R,
) -> Result<Action, AgentError> {
    let options: Vec<Action> = allowed.iter().collect();
    if options.is_empty() {
        return Err(AgentError::EmptyAllowedSet);
    }
    if explore {
        return Ok(*options.choose(rng).expect("nonempty"));
    }
    let row = q.row(s);
    let mut best = options[0];
    for &a in &options[1..] {
        if row[a.index()] > row[best.index()] {
            best = a;
        }
    }
    Ok(best)
}

/// One temporal-difference step toward `r + gamma * max q(s', .)`.
pub fn update_q<T: Scalar>(q: &mut QTable<T>, e: &Experience<T>, gamma: T, eta: T) {
    let old = q.get(e.s, e.action);
    let target = e.reward + gamma * q.max(e.s_next);
    q.set(e.s, e.action, old + eta * (target - old));
}

/// What a guard decided for one cell at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardDecision {
    pub allowed: ActionSet,
    /// Indexed by action.
    pub violation_probability: [f64; 3],
    pub support: [u64; 3],
    /// Every action was at or above threshold; the least risky one was let through.
    pub degraded: bool,
    /// Abstract state the decision was made in.
    pub state: String,
    /// Monitor state before the step.
    pub monitor: String,
}

/// Restricts the actions a cell may take. One monitor per cell.
pub trait ActionGuard<T: Scalar> {
    /// Called with each cell's schema-order features after a reset.
    fn begin_episode(&mut self, features: &[Vec<T>]);
    fn decide(&mut self, cell: usize, features: &[T]) -> GuardDecision;
    /// Called with the cell's features after the step.
    fn observe(&mut self, cell: usize, features: &[T]);
}

/// Everything that happened to one cell in one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<T = f64> {
    pub episode: usize,
    pub t: u64,
    pub cell_id: usize,
    pub tilt: T,
    /// KPIs before the step.
    pub kpi: KpiVector<T>,
    pub experience_index: usize,
    pub proposed: Action,
    pub chosen: Action,
    pub decision: Option<GuardDecision>,
}

/// Learner state: Q-table, encoder, replay memory and its own RNG.
#[derive(Debug, Clone)]
pub struct Agent<T: Scalar = f64> {
    config: AgentConfig,
    selection: FeatureSelection,
    encoder: Discretizer<T>,
    q: QTable<T>,
    memory: ExperienceBuffer<T>,
    rng: ChaCha8Rng,
    episodes_done: usize,
}

impl<T: Scalar> Agent<T> {
    pub fn new(config: AgentConfig, seed: u64) -> Result<Self, AgentError> {
        config.validate()?;
        let selection = FeatureSelection::new(config.state_features.clone())?;
        let encoder = Discretizer::uniform(&selection, config.state_bins)?;
        Ok(Agent {
            config,
            selection,
            encoder,
            q: QTable::new(),
            memory: ExperienceBuffer::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            episodes_done: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn q_table(&self) -> &QTable<T> {
        &self.q
    }

    pub fn memory(&self) -> &ExperienceBuffer<T> {
        &self.memory
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    /// State id of a schema-order feature vector.
    pub fn encode(&self, features: &[T]) -> Result<StateId, AgentError> {
        let s = self.encoder.discretize(&self.selection.project(features))?;
        Ok(self.encoder.state_id(&s))
    }

    /// Stores new transitions and replays one minibatch drawn uniformly
    /// from the whole memory.
    pub fn learn(&mut self, fresh: impl IntoIterator<Item = Experience<T>>) {
        self.memory.extend(fresh);
        if self.memory.is_empty() {
            return;
        }
        let (gamma, eta) = (T::of(self.config.gamma), T::of(self.config.eta));
        for _ in 0..self.config.batch_size {
            let i = self.rng.gen_range(0..self.memory.len());
            let e = self.memory.get(i).clone();
            update_q(&mut self.q, &e, gamma, eta);
        }
    }

    /// Runs `episodes` episodes on `sim`, learning as it goes. ε decays over
    /// `total_episodes`, counted from the agent's first episode, so a second
    /// phase continues the schedule. Returns the new transitions; `on_step`
    /// sees every cell-step.
    pub fn run_episodes(
        &mut self,
        sim: &mut Simulation<T>,
        episodes: usize,
        total_episodes: usize,
        mut guard: Option<&mut dyn ActionGuard<T>>,
        on_step: &mut dyn FnMut(&StepRecord<T>, &Experience<T>),
    ) -> Result<ExperienceBuffer<T>, AgentError> {
        let mut out = ExperienceBuffer::default();
        let cfg = sim.config().clone();
        for _ in 0..episodes {
            let episode = self.episodes_done;
            let eps = self.config.epsilon(episode, total_episodes);
            sim.reset();
            let mut obs = sim.observations();
            let mut feats: Vec<Vec<T>> = obs.iter().map(|o| o.features(&cfg)).collect();
            if let Some(g) = guard.as_deref_mut() {
                g.begin_episode(&feats);
            }
            for t in 0..self.config.steps_per_episode as u64 {
                let mut plan = Vec::with_capacity(feats.len());
                for (cell, f) in feats.iter().enumerate() {
                    let s = self.encode(f)?;
                    let explore = eps > 0.0 && self.rng.gen::<f64>() < eps;
                    let proposed = choose(&self.q, s, explore, ActionSet::ALL, &mut self.rng)?;
                    let decision = guard.as_deref_mut().map(|g| g.decide(cell, f));
                    let chosen = match &decision {
                        Some(d) if !d.allowed.contains(proposed) => {
                            choose(&self.q, s, explore, d.allowed, &mut self.rng)?
                        }
                        _ => proposed,
                    };
                    plan.push((s, proposed, chosen, decision));
                }
                let actions: Vec<Action> = plan.iter().map(|p| p.2).collect();
                let outcome = sim.step(&actions)?;
                let next: Vec<Vec<T>> = outcome.observations.iter().map(|o| o.features(&cfg)).collect();
                let mut fresh = Vec::with_capacity(plan.len());
                for (cell, (s, proposed, chosen, decision)) in plan.into_iter().enumerate() {
                    let e = Experience {
                        s,
                        action: chosen,
                        reward: outcome.rewards[cell],
                        s_next: self.encode(&next[cell])?,
                        cell_id: obs[cell].cell_id,
                        t,
                        features: feats[cell].clone(),
                        next_features: next[cell].clone(),
                    };
                    if let Some(g) = guard.as_deref_mut() {
                        g.observe(cell, &next[cell]);
                    }
                    let rec = StepRecord {
                        episode,
                        t,
                        cell_id: e.cell_id,
                        tilt: obs[cell].tilt,
                        kpi: obs[cell].kpi,
                        experience_index: out.len() + fresh.len(),
                        proposed,
                        chosen,
                        decision,
                    };
                    on_step(&rec, &e);
                    fresh.push(e);
                }
                out.extend(fresh.iter().cloned());
                self.learn(fresh);
                obs = outcome.observations;
                feats = next;
            }
            self.episodes_done += 1;
        }
        Ok(out)
    }
}

/// Transitions from an experience-gathering run plus any blocked proposals.
#[derive(Debug, Clone, Default)]
pub struct Collection<T = f64> {
    pub buffer: ExperienceBuffer<T>,
    pub block_events: Vec<BlockEvent>,
}

/// Runs `config.episodes` learning episodes and gathers every transition of
/// every cell. With a guard, blocked proposals are logged.
pub fn collect_experience<T: Scalar>(
    sim: &mut Simulation<T>,
    agent: &mut Agent<T>,
    guard: Option<&mut dyn ActionGuard<T>>,
) -> Result<Collection<T>, AgentError> {
    let episodes = agent.config().episodes;
    let mut block_events = Vec::new();
    let buffer = agent.run_episodes(sim, episodes, episodes, guard, &mut |rec, _| {
        if let Some(ev) = BlockEvent::from_step(rec) {
            block_events.push(ev);
        }
    })?;
    Ok(Collection { buffer, block_events })
}
