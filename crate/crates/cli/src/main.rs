mod args;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use retshield::control::{
    check_intent, compare_shield, run_pipeline_with, write_comparison_dir, write_run_dir, Comparison, ControlError,
    IntentCheck, NullSink, RunConfig, RunRecord,
};
use retshield::ltl::Intent;
use retshield_service::AppState;

use args::{ConfigArgs, Precision};

#[derive(Parser)]
#[command(name = "retshield", version, about = "Shielded Q-learning for antenna tilt under LTL intents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the intent's automaton as DOT and check it has a satisfying
    /// trace on a model learned from unshielded experience.
    Check {
        #[command(flatten)]
        config: ConfigArgs,
        /// Also write the automata and verdict here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// One full run with the first seed.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Every seed with and without the shield.
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// HTTP API with per-run event streams.
    Serve {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Extra `.intent` files to preload.
        #[arg(long)]
        intents_dir: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Control(ControlError),
    Other(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Control(e) => e.exit_code() as u8,
            Failure::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Control(e) => e.fmt(f),
            Failure::Other(m) => f.write_str(m),
        }
    }
}

impl From<ControlError> for Failure {
    fn from(e: ControlError) -> Self {
        Failure::Control(e)
    }
}

impl From<String> for Failure {
    fn from(m: String) -> Self {
        Failure::Other(m)
    }
}

fn load(config: &ConfigArgs) -> Result<(RunConfig, Intent), Failure> {
    let cfg = config.resolve()?;
    if cfg.intent.as_os_str().is_empty() {
        return Err(Failure::Other("--intent is required".into()));
    }
    let intent = cfg.load_intent()?;
    Ok((cfg, intent))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))
}

fn check(config: &ConfigArgs, out_dir: Option<&Path>) -> Result<(), Failure> {
    let (cfg, intent) = load(config)?;
    let seed = cfg.seeds[0];
    let report: IntentCheck = match config.precision {
        Precision::F32 => check_intent::<f32>(&cfg, &intent, seed)?,
        Precision::F64 => check_intent::<f64>(&cfg, &intent, seed)?,
    };
    print!("{}", report.ba_dot);
    eprintln!(
        "{}: automaton {} states ({} accepting), model {} states, realizable: {}",
        report.intent,
        report.ba_states,
        report.ba_accepting,
        report.model_states,
        if report.realizability.realizable { "yes" } else { "no" }
    );
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Other(format!("{}: {e}", dir.display())))?;
        write(&dir.join("ba.dot"), &report.ba_dot)?;
        write(&dir.join("ba_neg.dot"), &report.ba_neg_dot)?;
        write(&dir.join("check.json"), &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    }
    match report.realizability.diagnostic(&report.intent) {
        Some(diagnostic) => Err(ControlError::NoSafeTrace { intent: report.intent, diagnostic }.into()),
        None => Ok(()),
    }
}

fn train(config: &ConfigArgs, out_dir: &Path) -> Result<(), Failure> {
    let (cfg, intent) = load(config)?;
    let seed = cfg.seeds[0];
    let record: RunRecord = match config.precision {
        Precision::F32 => run_pipeline_with::<f32>(&cfg, &intent, seed, &mut NullSink)?,
        Precision::F64 => run_pipeline_with::<f64>(&cfg, &intent, seed, &mut NullSink)?,
    };
    let dir = out_dir.join(&record.run_id);
    write_run_dir(&record, &dir)?;
    let m = &record.metrics;
    println!(
        "{}: reward {:.3}, safe fraction {:.4}, unsafe states {}, blocked {}, degraded {}",
        record.run_id,
        m.cumulative_reward,
        m.safe_state_fraction,
        m.unsafe_state_count,
        m.blocked_action_count,
        m.degraded_count
    );
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn compare(config: &ConfigArgs, out_dir: &Path) -> Result<(), Failure> {
    let (cfg, intent) = load(config)?;
    let cmp: Comparison = match config.precision {
        Precision::F32 => compare_shield::<f32>(&cfg, &intent)?,
        Precision::F64 => compare_shield::<f64>(&cfg, &intent)?,
    };
    write_comparison_dir(&cmp, out_dir)?;
    println!("seed  shield  reward        safe     unsafe  blocked");
    for r in &cmp.rows {
        println!(
            "{:<5} {:<7} {:<13.3} {:<8.4} {:<7} {}",
            r.seed, r.shield, r.cumulative_reward, r.safe_state_fraction, r.unsafe_state_count, r.blocked_action_count
        );
    }
    let (w, wo, d) = (cmp.with_shield, cmp.without_shield, cmp.delta);
    println!(
        "median reward {:.3} -> {:.3} (paired delta {:+.3}), safe fraction {:.4} -> {:.4} (paired delta {:+.4})",
        wo.cumulative_reward,
        w.cumulative_reward,
        d.cumulative_reward,
        wo.safe_state_fraction,
        w.safe_state_fraction,
        d.safe_state_fraction
    );
    eprintln!("wrote {}", out_dir.display());
    Ok(())
}

fn serve(config: &ConfigArgs, addr: SocketAddr, intents_dir: Option<&Path>) -> Result<(), Failure> {
    let cfg = config.resolve()?;
    let state = AppState::with_builtin(cfg)?;
    if let Some(dir) = intents_dir {
        let entries = std::fs::read_dir(dir).map_err(|e| Failure::Other(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "intent"))
            .collect();
        paths.sort();
        for path in paths {
            let text =
                std::fs::read_to_string(&path).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))?;
            let intent =
                Intent::from_file_text(&text).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))?;
            // the built-ins may already hold this name
            if let Err(e) = state.add_intent(intent) {
                eprintln!("skipping {}: {e:?}", path.display());
            }
        }
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Other(e.to_string()))?;
    eprintln!("listening on http://{addr}");
    runtime.block_on(retshield_service::serve(addr, state)).map_err(|e| Failure::Other(format!("{addr}: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Check { config, out_dir } => check(config, out_dir.as_deref()),
        Command::Train { config, out_dir } => train(config, out_dir),
        Command::Compare { config, out_dir } => compare(config, out_dir),
        Command::Serve { config, addr, intents_dir } => serve(config, *addr, intents_dir.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
