//! Run event log and the metrics derived from it.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::abstraction::ThresholdSnap;
use crate::action::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Collection,
    Evaluation,
}

/// One cell's step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub phase: Phase,
    pub episode: usize,
    pub t: u64,
    pub cell_id: usize,
    pub tilt: f64,
    /// Abstract state before and after the step.
    pub state: String,
    pub next_state: String,
    /// Propositions holding in `next_state`.
    pub label: Vec<String>,
    /// `next_state` satisfies the intent's state-level constraints.
    pub safe: bool,
    pub proposed: Action,
    pub chosen: Action,
    pub blocked: bool,
    /// "red" when the proposal was blocked, "blue" otherwise.
    pub color: String,
    pub allowed: Vec<Action>,
    pub violation_probability: Option<[f64; 3]>,
    pub support: Option<[u64; 3]>,
    pub degraded: bool,
    pub monitor: Option<String>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    RunStarted { run_id: String, intent: String, seed: u64, shield: bool },
    PhaseStarted { phase: Phase },
    Model { states: usize, product_states: usize, violating: usize, witnesses: usize, snaps: Vec<ThresholdSnap> },
    Step(StepEvent),
    EpisodeEnd { phase: Phase, episode: usize, reward: f64, eventualities_met: usize, eventualities_total: usize },
    RunFinished { metrics: RunMetrics },
}

impl Event {
    /// The serialized `kind` tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Event::RunStarted { .. } => "run_started",
            Event::PhaseStarted { .. } => "phase_started",
            Event::Model { .. } => "model",
            Event::Step(_) => "step",
            Event::EpisodeEnd { .. } => "episode_end",
            Event::RunFinished { .. } => "run_finished",
        }
    }
}

/// Consumer of a run's events, in emission order.
pub trait EventSink {
    fn emit(&mut self, event: &Event);
}

impl EventSink for Vec<Event> {
    fn emit(&mut self, event: &Event) {
        self.push(event.clone());
    }
}

/// Discards events.
pub struct NullSink;

impl EventSink for NullSink {
    fn emit(&mut self, _: &Event) {}
}

impl<F: FnMut(&Event)> EventSink for F {
    fn emit(&mut self, event: &Event) {
        self(event)
    }
}

/// Evaluation-phase outcome of one run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetrics {
    pub cumulative_reward: f64,
    /// Share of visited states satisfying the intent's `G`-scoped
    /// propositional constraints.
    pub safe_state_fraction: f64,
    pub safe_state_count: u64,
    pub unsafe_state_count: u64,
    pub blocked_action_count: u64,
    pub degraded_count: u64,
    pub eventualities_met: u64,
    pub eventualities_total: u64,
    pub episode_rewards: Vec<f64>,
}

impl RunMetrics {
    /// Recomputes the metrics from an event log; only evaluation-phase
    /// events count.
    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a Event>) -> Self {
        let mut m = RunMetrics::default();
        for e in events {
            match e {
                Event::Step(s) if s.phase == Phase::Evaluation => {
                    if s.safe {
                        m.safe_state_count += 1;
                    } else {
                        m.unsafe_state_count += 1;
                    }
                    m.blocked_action_count += s.blocked as u64;
                    m.degraded_count += s.degraded as u64;
                }
                Event::EpisodeEnd {
                    phase: Phase::Evaluation, reward, eventualities_met, eventualities_total, ..
                } => {
                    m.cumulative_reward += reward;
                    m.episode_rewards.push(*reward);
                    m.eventualities_met += *eventualities_met as u64;
                    m.eventualities_total += *eventualities_total as u64;
                }
                _ => {}
            }
        }
        let visits = m.safe_state_count + m.unsafe_state_count;
        m.safe_state_fraction = if visits == 0 { 1.0 } else { m.safe_state_count as f64 / visits as f64 };
        m
    }
}

/// One JSON object per line.
pub fn write_events_jsonl<W: Write>(events: &[Event], mut out: W) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_events_jsonl<R: BufRead>(input: R) -> io::Result<Vec<Event>> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| serde_json::from_str(&l?).map_err(io::Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(phase: Phase, safe: bool, blocked: bool) -> Event {
        Event::Step(StepEvent {
            phase,
            episode: 0,
            t: 0,
            cell_id: 0,
            tilt: 4.0,
            state: "(0)".into(),
            next_state: "(1)".into(),
            label: vec![],
            safe,
            proposed: Action::Up,
            chosen: if blocked { Action::Stay } else { Action::Up },
            blocked,
            color: if blocked { "red" } else { "blue" }.into(),
            allowed: vec![Action::Stay],
            violation_probability: Some([0.0, 0.0, 0.3]),
            support: Some([1, 2, 3]),
            degraded: false,
            monitor: Some("{q0}".into()),
            reward: -0.1,
        })
    }

    fn end(phase: Phase, reward: f64) -> Event {
        Event::EpisodeEnd { phase, episode: 0, reward, eventualities_met: 1, eventualities_total: 2 }
    }

    #[test]
    fn metrics_only_count_evaluation() {
        let log = vec![
            step(Phase::Collection, false, true),
            end(Phase::Collection, -9.0),
            step(Phase::Evaluation, true, false),
            step(Phase::Evaluation, false, true),
            step(Phase::Evaluation, true, false),
            end(Phase::Evaluation, -1.5),
            end(Phase::Evaluation, -0.5),
        ];
        let m = RunMetrics::from_events(&log);
        assert_eq!(m.safe_state_count, 2);
        assert_eq!(m.unsafe_state_count, 1);
        assert!((m.safe_state_fraction - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.blocked_action_count, 1);
        assert_eq!(m.cumulative_reward, -2.0);
        assert_eq!(m.episode_rewards, vec![-1.5, -0.5]);
        assert_eq!((m.eventualities_met, m.eventualities_total), (2, 4));
        assert_eq!(RunMetrics::from_events(&[]).safe_state_fraction, 1.0);
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let log = vec![
            Event::PhaseStarted { phase: Phase::Evaluation },
            step(Phase::Evaluation, true, true),
            end(Phase::Evaluation, -0.1 - 0.2),
        ];
        let mut buf = Vec::new();
        write_events_jsonl(&log, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().contains("\"kind\":\"phase_started\""));
        assert_eq!(read_events_jsonl(buf.as_slice()).unwrap(), log);
    }

    #[test]
    fn kind_matches_the_serialized_tag() {
        let log = vec![
            Event::RunStarted { run_id: "r".into(), intent: "i".into(), seed: 1, shield: true },
            Event::PhaseStarted { phase: Phase::Collection },
            Event::Model { states: 1, product_states: 2, violating: 0, witnesses: 0, snaps: vec![] },
            step(Phase::Evaluation, true, false),
            end(Phase::Evaluation, -1.0),
            Event::RunFinished { metrics: RunMetrics::default() },
        ];
        for e in &log {
            let v = serde_json::to_value(e).unwrap();
            assert_eq!(v["kind"], e.kind());
        }
    }
}
