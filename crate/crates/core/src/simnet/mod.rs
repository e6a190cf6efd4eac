//! Seeded multi-cell radio network simulator.

mod config;
mod kpi;
pub mod radio;

use std::io;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::NetworkConfig;
pub use kpi::{compute_kpis, reward, KpiVector, CAPACITY_QUOTA_FACTOR, OVERLAP_MARGIN_DB};
pub use radio::{antenna_gain, path_loss, AntennaPattern};

use crate::action::Action;
use crate::feature::Feature;
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} actions, got {got}")]
    WrongActionCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellState<T = f64> {
    pub cell_id: usize,
    /// Site position, meters.
    pub position: [T; 2],
    /// Degrees, counter-clockwise from the x axis.
    pub azimuth: T,
    /// Downtilt, degrees.
    pub tilt: T,
}

/// Per-cell state `[tilt, KPIs]` as seen by the agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellObservation<T = f64> {
    pub cell_id: usize,
    pub tilt: T,
    pub kpi: KpiVector<T>,
}

impl<T: Scalar> CellObservation<T> {
    /// Feature value in normalized, oriented units: tilt mapped onto
    /// [0, 1] by the configured bounds, health features as `1 - deficiency`.
    pub fn feature(&self, f: Feature, cfg: &NetworkConfig) -> T {
        let k = &self.kpi;
        match f {
            Feature::Tilt => ((self.tilt - T::of(cfg.tilt_min)) / T::of(cfg.tilt_max - cfg.tilt_min)).clamp_unit(),
            Feature::Coverage => T::one() - k.cov,
            Feature::Capacity => T::one() - k.cap,
            Feature::Quality => T::one() - k.qual,
            Feature::Sinr => k.sinr,
            Feature::Overshoot => k.ta_os,
            Feature::Congestion => k.rrc_cong_rate,
        }
    }

    /// All features in schema order.
    pub fn features(&self, cfg: &NetworkConfig) -> Vec<T> {
        Feature::ALL.iter().map(|&f| self.feature(f, cfg)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T = f64> {
    pub observations: Vec<CellObservation<T>>,
    pub rewards: Vec<T>,
}

/// Network state: sites, cells, UE positions and the environment's RNG.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation<T: Scalar = f64> {
    config: NetworkConfig,
    pattern: AntennaPattern,
    cells: Vec<CellState<T>>,
    ues: Vec<[T; 2]>,
    area: [[T; 2]; 2],
    rng: ChaCha8Rng,
    t: u64,
    kpis: Vec<KpiVector<T>>,
}

/// Site positions on a hexagonal grid, ring by ring from the origin.
fn hex_sites(count: usize, spacing: f64) -> Vec<[f64; 2]> {
    let dirs: [(i64, i64); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];
    let mut out = vec![(0i64, 0i64)];
    let mut ring = 1i64;
    while out.len() < count {
        // start at the ring's corner in direction 4 and walk its six sides
        let (mut q, mut r) = (dirs[4].0 * ring, dirs[4].1 * ring);
        for d in dirs {
            for _ in 0..ring {
                out.push((q, r));
                q += d.0;
                r += d.1;
            }
        }
        ring += 1;
    }
    out.truncate(count);
    out.into_iter()
        .map(|(q, r)| {
            let (q, r) = (q as f64, r as f64);
            [spacing * (q + r / 2.0), spacing * r * 3f64.sqrt() / 2.0]
        })
        .collect()
}

/// Builds the network from `config`: sites on a hexagonal grid, sectors at
/// evenly spaced azimuths, UEs uniform over the sites' bounding box
/// (padded by half the site spacing) and tilts uniform in their bounds.
pub fn init_network<T: Scalar>(config: NetworkConfig) -> Result<Simulation<T>, SimError> {
    config.validate()?;
    let sites = hex_sites(config.num_bs, config.inter_site_distance);
    let pad = config.inter_site_distance / 2.0;
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for s in &sites {
        for k in 0..2 {
            lo[k] = lo[k].min(s[k] - pad);
            hi[k] = hi[k].max(s[k] + pad);
        }
    }
    let mut cells = Vec::with_capacity(config.num_cells());
    for (b, site) in sites.iter().enumerate() {
        for k in 0..config.cells_per_bs {
            cells.push(CellState {
                cell_id: b * config.cells_per_bs + k,
                position: [T::of(site[0]), T::of(site[1])],
                azimuth: T::of(360.0 * k as f64 / config.cells_per_bs as f64),
                tilt: T::of(config.tilt_min),
            });
        }
    }
    let mut sim = Simulation {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        area: [[T::of(lo[0]), T::of(lo[1])], [T::of(hi[0]), T::of(hi[1])]],
        config,
        pattern: AntennaPattern::default(),
        cells,
        ues: Vec::new(),
        t: 0,
        kpis: Vec::new(),
    };
    sim.reset();
    Ok(sim)
}

impl<T: Scalar> Simulation<T> {
    /// Network with an explicit layout; tilts are taken as given.
    pub fn with_layout(config: NetworkConfig, cells: Vec<CellState<T>>, ues: Vec<[T; 2]>) -> Result<Self, SimError> {
        config.validate()?;
        if cells.is_empty() || ues.is_empty() {
            return Err(SimError::InvalidConfig("layout needs cells and UEs".into()));
        }
        let (mut lo, mut hi) = ([T::infinity(); 2], [T::neg_infinity(); 2]);
        for p in ues.iter().chain(cells.iter().map(|c| &c.position)) {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let mut sim = Simulation {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            pattern: AntennaPattern::default(),
            cells,
            ues,
            area: [lo, hi],
            t: 0,
            kpis: Vec::new(),
        };
        sim.refresh();
        Ok(sim)
    }

    /// Starts a new episode: fresh tilts and UE positions from the
    /// environment RNG.
    pub fn reset(&mut self) {
        let (lo, hi) = (self.config.tilt_min, self.config.tilt_max);
        for c in &mut self.cells {
            c.tilt = T::of(self.rng.gen_range(lo..=hi));
        }
        let n = self.config.num_ues;
        self.ues = (0..n).map(|_| self.sample_position()).collect();
        self.t = 0;
        self.refresh();
    }

    fn sample_position(&mut self) -> [T; 2] {
        let [lo, hi] = self.area;
        let x = self.rng.gen_range(lo[0].as_f64()..=hi[0].as_f64());
        let y = self.rng.gen_range(lo[1].as_f64()..=hi[1].as_f64());
        [T::of(x), T::of(y)]
    }

    fn refresh(&mut self) {
        self.kpis = compute_kpis(&self.config, &self.pattern, &self.cells, &self.ues);
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn cells(&self) -> &[CellState<T>] {
        &self.cells
    }

    pub fn ues(&self) -> &[[T; 2]] {
        &self.ues
    }

    pub fn kpis(&self) -> &[KpiVector<T>] {
        &self.kpis
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn observations(&self) -> Vec<CellObservation<T>> {
        self.cells
            .iter()
            .zip(&self.kpis)
            .map(|(c, k)| CellObservation { cell_id: c.cell_id, tilt: c.tilt, kpi: *k })
            .collect()
    }

    /// Applies one action per cell, moves a share of the UEs, and returns
    /// the new per-cell observations with their rewards.
    pub fn step(&mut self, actions: &[Action]) -> Result<StepOutcome<T>, SimError> {
        if actions.len() != self.cells.len() {
            return Err(SimError::WrongActionCount { expected: self.cells.len(), got: actions.len() });
        }
        let step = T::of(self.config.tilt_step);
        let (lo, hi) = (T::of(self.config.tilt_min), T::of(self.config.tilt_max));
        for (c, a) in self.cells.iter_mut().zip(actions) {
            c.tilt = (c.tilt + step * T::of(a.sign() as f64)).max(lo).min(hi);
        }
        let n = self.ues.len();
        let k = (self.config.resample_fraction * n as f64).round() as usize;
        if k > 0 {
            let mut chosen = sample(&mut self.rng, n, k.min(n)).into_vec();
            chosen.sort_unstable();
            for i in chosen {
                self.ues[i] = self.sample_position();
            }
        }
        self.t += 1;
        self.refresh();
        let rewards = self.kpis.iter().map(reward).collect();
        Ok(StepOutcome { observations: self.observations(), rewards })
    }
}

/// One row of the trajectory export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub episode: usize,
    pub t: u64,
    pub cell_id: usize,
    pub tilt: f64,
    pub cov: f64,
    pub cap: f64,
    pub qual: f64,
    pub sinr: f64,
    pub ta_os: f64,
    pub rrc_cong_rate: f64,
    pub action: Action,
    pub reward: f64,
}

impl TrajectoryRow {
    pub fn new<T: Scalar>(episode: usize, t: u64, obs: &CellObservation<T>, action: Action, reward: T) -> Self {
        let k = &obs.kpi;
        TrajectoryRow {
            episode,
            t,
            cell_id: obs.cell_id,
            tilt: obs.tilt.as_f64(),
            cov: k.cov.as_f64(),
            cap: k.cap.as_f64(),
            qual: k.qual.as_f64(),
            sinr: k.sinr.as_f64(),
            ta_os: k.ta_os.as_f64(),
            rrc_cong_rate: k.rrc_cong_rate.as_f64(),
            action,
            reward: reward.as_f64(),
        }
    }
}

/// CSV with header `episode,t,cell_id,tilt,cov,cap,qual,sinr,ta_os,rrc_cong_rate,action,reward`.
pub fn write_trajectory_csv<W: io::Write>(rows: &[TrajectoryRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> NetworkConfig {
        NetworkConfig { num_ues: 200, seed, ..Default::default() }
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a: Simulation = init_network(small(42)).unwrap();
        let b: Simulation = init_network(small(42)).unwrap();
        assert_eq!(a, b);
        let c: Simulation = init_network(small(43)).unwrap();
        assert_ne!(a.ues(), c.ues());
    }

    #[test]
    fn default_layout_has_21_cells() {
        let sim: Simulation = init_network(small(1)).unwrap();
        assert_eq!(sim.num_cells(), 21);
        let azimuths: Vec<f64> = sim.cells()[..3].iter().map(|c| c.azimuth).collect();
        assert_eq!(azimuths, vec![0.0, 120.0, 240.0]);
        // center site plus a ring of six at the site spacing
        for c in &sim.cells()[3..] {
            let r = (c.position[0].powi(2) + c.position[1].powi(2)).sqrt();
            assert!((r - 1500.0).abs() < 1e-6);
        }
        let sites: std::collections::BTreeSet<(i64, i64)> =
            sim.cells().iter().map(|c| (c.position[0].round() as i64, c.position[1].round() as i64)).collect();
        assert_eq!(sites.len(), 7);
    }

    #[test]
    fn invalid_tilt_bounds() {
        let cfg = NetworkConfig { tilt_min: 5.0, tilt_max: 3.0, ..Default::default() };
        assert!(matches!(init_network::<f64>(cfg), Err(SimError::InvalidConfig(_))));
    }

    #[test]
    fn tilt_clamps_at_bounds() {
        let mut sim: Simulation = init_network(small(3)).unwrap();
        for _ in 0..20 {
            sim.step(&[Action::Up; 21]).unwrap();
        }
        assert!(sim.cells().iter().all(|c| c.tilt == 16.0));
        sim.step(&[Action::Up; 21]).unwrap();
        assert!(sim.cells().iter().all(|c| c.tilt == 16.0));
        for _ in 0..20 {
            sim.step(&[Action::Down; 21]).unwrap();
        }
        assert!(sim.cells().iter().all(|c| c.tilt == 1.0));
    }

    #[test]
    fn stay_without_mobility_is_fixed_point() {
        let cfg = NetworkConfig { resample_fraction: 0.0, ..small(5) };
        let mut sim: Simulation = init_network(cfg).unwrap();
        let before = sim.observations();
        let out = sim.step(&[Action::Stay; 21]).unwrap();
        assert_eq!(out.observations, before);
        assert_eq!(sim.time(), 1);
    }

    #[test]
    fn wrong_action_count() {
        let mut sim: Simulation = init_network(small(5)).unwrap();
        assert_eq!(sim.step(&[Action::Stay]), Err(SimError::WrongActionCount { expected: 21, got: 1 }));
    }

    #[test]
    fn same_actions_same_trajectory() {
        let run = || {
            let mut sim: Simulation = init_network(small(11)).unwrap();
            (0..5)
                .map(|t| {
                    let acts: Vec<Action> = (0..21).map(|c| Action::ALL[(c + t) % 3]).collect();
                    sim.step(&acts).unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn single_precision_runs() {
        let mut sim: Simulation<f32> = init_network(small(2)).unwrap();
        let out = sim.step(&[Action::Stay; 21]).unwrap();
        assert!(out.observations.iter().all(|o| o.kpi.is_normalized()));
    }

    #[test]
    fn tilt_changes_kpis() {
        let cfg = NetworkConfig { resample_fraction: 0.0, ..small(8) };
        let mut sim: Simulation = init_network(cfg).unwrap();
        let before = sim.kpis().to_vec();
        sim.step(&[Action::Up; 21]).unwrap();
        assert_ne!(before, sim.kpis());
    }

    #[test]
    fn trajectory_csv_header() {
        let sim: Simulation = init_network(small(1)).unwrap();
        let obs = &sim.observations()[0];
        let row = TrajectoryRow::new(0, 0, obs, Action::Up, reward(&obs.kpi));
        let mut buf = Vec::new();
        write_trajectory_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("episode,t,cell_id,tilt,cov,cap,qual,sinr,ta_os,rrc_cong_rate,action,reward\n"));
        assert!(text.contains(",Up,"));
    }
}
