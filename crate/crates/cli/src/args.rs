use std::path::PathBuf;

use clap::{Args, ValueEnum};
use retshield::control::RunConfig;
use retshield::feature::Feature;
use retshield::shield::{RiskTarget, UnvisitedPolicy};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Risk {
    Reachable,
    Cycle,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Unvisited {
    Block,
    Allow,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seeds(pub Vec<u64>);

#[derive(Debug, Clone, PartialEq)]
pub struct Features(pub Vec<Feature>);

/// Seed list: `1,2,3`, or a single count `N` meaning seeds 1 to N.
fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
    let nums =
        parts.iter().map(|p| p.parse::<u64>().map_err(|e| format!("`{p}`: {e}"))).collect::<Result<Vec<_>, _>>()?;
    match nums.as_slice() {
        [n] => Ok(Seeds((1..=*n).collect())),
        _ => Ok(Seeds(nums)),
    }
}

fn parse_features(s: &str) -> Result<Features, String> {
    s.split(',').map(|p| p.trim().parse::<Feature>().map_err(|e| e.to_string())).collect::<Result<_, _>>().map(Features)
}

/// Run configuration. Flags override `--config`, which overrides defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML file holding a full or partial run config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Intent file.
    #[arg(long)]
    pub intent: Option<PathBuf>,
    #[arg(long, value_parser = parse_seeds)]
    pub seeds: Option<Seeds>,
    /// Single seed; replaces `--seeds`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_bins: Option<usize>,
    #[arg(long)]
    pub p_block: Option<f64>,
    #[arg(long, action = clap::ArgAction::Set)]
    pub shield: Option<bool>,
    #[arg(long)]
    pub collection_episodes: Option<usize>,
    #[arg(long)]
    pub eval_episodes: Option<usize>,
    #[arg(long, value_enum)]
    pub risk: Option<Risk>,
    #[arg(long, action = clap::ArgAction::Set)]
    pub rearm: Option<bool>,
    #[arg(long, value_enum)]
    pub unvisited: Option<Unvisited>,
    #[arg(long)]
    pub witness_cap: Option<usize>,

    #[arg(long, help_heading = "Network")]
    pub num_bs: Option<usize>,
    #[arg(long, help_heading = "Network")]
    pub cells_per_bs: Option<usize>,
    #[arg(long, help_heading = "Network")]
    pub num_ues: Option<usize>,
    #[arg(long, help_heading = "Network")]
    pub antenna_height: Option<f64>,
    #[arg(long, help_heading = "Network")]
    pub tilt_min: Option<f64>,
    #[arg(long, help_heading = "Network")]
    pub tilt_max: Option<f64>,
    #[arg(long, help_heading = "Network")]
    pub tilt_step: Option<f64>,
    #[arg(long, help_heading = "Network")]
    pub carrier_freq: Option<f64>,
    #[arg(long, help_heading = "Network")]
    pub inter_site_distance: Option<f64>,
    #[arg(long, help_heading = "Network")]
    pub ue_height: Option<f64>,
    #[arg(long, help_heading = "Network", allow_negative_numbers = true)]
    pub rsrp_coverage_threshold: Option<f64>,
    #[arg(long, help_heading = "Network", allow_negative_numbers = true)]
    pub tx_power_dbm: Option<f64>,
    #[arg(long, help_heading = "Network", allow_negative_numbers = true)]
    pub noise_dbm: Option<f64>,
    #[arg(long, help_heading = "Network")]
    pub resample_fraction: Option<f64>,

    #[arg(long, help_heading = "Agent")]
    pub gamma: Option<f64>,
    #[arg(long, help_heading = "Agent")]
    pub eta: Option<f64>,
    #[arg(long, help_heading = "Agent")]
    pub epsilon_start: Option<f64>,
    #[arg(long, help_heading = "Agent")]
    pub epsilon_end: Option<f64>,
    #[arg(long, help_heading = "Agent")]
    pub batch_size: Option<usize>,
    #[arg(long, help_heading = "Agent")]
    pub episodes: Option<usize>,
    #[arg(long, help_heading = "Agent")]
    pub steps_per_episode: Option<usize>,
    /// Comma-separated, e.g. `tilt,coverage,quality,sinr`.
    #[arg(long, help_heading = "Agent", value_parser = parse_features)]
    pub state_features: Option<Features>,
    #[arg(long, help_heading = "Agent")]
    pub state_bins: Option<usize>,

    #[arg(long, value_enum, default_value_t)]
    pub precision: Precision,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => RunConfig::default(),
        };
        set(&mut cfg.intent, self.intent.clone());
        set(&mut cfg.seeds, self.seeds.clone().map(|s| s.0));
        set(&mut cfg.seeds, self.seed.map(|s| vec![s]));
        set(&mut cfg.n_bins, self.n_bins);
        set(&mut cfg.p_block, self.p_block);
        set(&mut cfg.shield, self.shield);
        set(&mut cfg.collection_episodes, self.collection_episodes);
        set(&mut cfg.eval_episodes, self.eval_episodes);
        set(
            &mut cfg.risk,
            self.risk.map(|r| match r {
                Risk::Reachable => RiskTarget::Reachable,
                Risk::Cycle => RiskTarget::Cycle,
            }),
        );
        set(&mut cfg.rearm, self.rearm);
        set(
            &mut cfg.unvisited,
            self.unvisited.map(|u| match u {
                Unvisited::Block => UnvisitedPolicy::Block,
                Unvisited::Allow => UnvisitedPolicy::Allow,
            }),
        );
        set(&mut cfg.witness_cap, self.witness_cap);

        let n = &mut cfg.network;
        set(&mut n.num_bs, self.num_bs);
        set(&mut n.cells_per_bs, self.cells_per_bs);
        set(&mut n.num_ues, self.num_ues);
        set(&mut n.antenna_height, self.antenna_height);
        set(&mut n.tilt_min, self.tilt_min);
        set(&mut n.tilt_max, self.tilt_max);
        set(&mut n.tilt_step, self.tilt_step);
        set(&mut n.carrier_freq, self.carrier_freq);
        set(&mut n.inter_site_distance, self.inter_site_distance);
        set(&mut n.ue_height, self.ue_height);
        set(&mut n.rsrp_coverage_threshold, self.rsrp_coverage_threshold);
        set(&mut n.tx_power_dbm, self.tx_power_dbm);
        set(&mut n.noise_dbm, self.noise_dbm);
        set(&mut n.resample_fraction, self.resample_fraction);

        let a = &mut cfg.agent;
        set(&mut a.gamma, self.gamma);
        set(&mut a.eta, self.eta);
        set(&mut a.epsilon_start, self.epsilon_start);
        set(&mut a.epsilon_end, self.epsilon_end);
        set(&mut a.batch_size, self.batch_size);
        set(&mut a.episodes, self.episodes);
        set(&mut a.steps_per_episode, self.steps_per_episode);
        set(&mut a.state_features, self.state_features.clone().map(|f| f.0));
        set(&mut a.state_bins, self.state_bins);
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[derive(Parser)]
    struct Probe {
        #[command(flatten)]
        args: ConfigArgs,
    }

    fn resolve(argv: &[&str]) -> RunConfig {
        let mut full = vec!["probe"];
        full.extend_from_slice(argv);
        Probe::try_parse_from(full).unwrap().args.resolve().unwrap()
    }

    #[test]
    fn seed_lists_and_counts() {
        assert_eq!(parse_seeds("5").unwrap().0, vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_seeds("7,9").unwrap().0, vec![7, 9]);
        assert!(parse_seeds("x").is_err());
        assert_eq!(resolve(&["--seeds", "3", "--seed", "11"]).seeds, vec![11]);
    }

    #[test]
    fn flags_override_defaults() {
        let cfg = resolve(&[
            "--p-block",
            "0.2",
            "--shield",
            "false",
            "--risk",
            "reachable",
            "--unvisited",
            "allow",
            "--num-ues",
            "50",
            "--noise-dbm",
            "-100",
            "--state-features",
            "tilt,sinr",
        ]);
        assert_eq!(cfg.p_block, 0.2);
        assert!(!cfg.shield);
        assert_eq!(cfg.risk, RiskTarget::Reachable);
        assert_eq!(cfg.unvisited, UnvisitedPolicy::Allow);
        assert_eq!(cfg.network.num_ues, 50);
        assert_eq!(cfg.network.noise_dbm, -100.0);
        assert_eq!(cfg.agent.state_features, vec![Feature::Tilt, Feature::Sinr]);
        assert_eq!(resolve(&[]), RunConfig::default());
    }
}
