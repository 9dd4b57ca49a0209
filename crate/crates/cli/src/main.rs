use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use drlc_core::agent::DdpgAgent;
use drlc_core::harness::{
    evaluate_policy, load_config, moving_average, prepare_initializer, presets, Experiment,
    ExperimentConfig, SeedPlan,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "drlc",
    version,
    about = "Actor-critic set-point tracking experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from an experiment file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Paper machine, grid of set-points.
    Example1(PresetArgs),
    /// Two-by-two distillation column.
    Example2(PresetArgs),
    /// Heating coil with the polar reward.
    Example3(PresetArgs),
    /// Paper machine with a mid-run gain change.
    Example4(PresetArgs),
    /// Greedy rollouts of a saved agent on every grid set-point.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Tracking band; defaults to the episode tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PresetArgs {
    #[arg(long)]
    episodes: Option<usize>,
    /// 64/48 hidden units without batch norm.
    #[arg(long)]
    desk: bool,
    /// Hidden widths of both networks, e.g. `64,48`.
    #[arg(long, value_parser = parse_widths)]
    widths: Option<(usize, usize)>,
    /// Print the preset as an experiment file and exit.
    #[arg(long)]
    print_config: bool,
    #[command(flatten)]
    common: Common,
}

fn parse_widths(s: &str) -> std::result::Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [a, b] => Ok((
            a.trim().parse().map_err(|_| format!("bad width `{a}`"))?,
            b.trim().parse().map_err(|_| format!("bad width `{b}`"))?,
        )),
        _ => Err("expected two comma-separated widths".into()),
    }
}

fn apply_common(mut config: ExperimentConfig, common: &Common) -> ExperimentConfig {
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    config
}

fn train(config: ExperimentConfig) -> Result<()> {
    let out = config.output_dir.clone();
    let mut exp = Experiment::new(config).context("cannot start experiment")?;
    exp.run().context("training failed")?;
    exp.write_outputs(&out)
        .with_context(|| format!("cannot write results to {}", out.display()))?;
    let rewards = exp.log().total_rewards();
    let ma = moving_average(&rewards, 21)?;
    println!(
        "episodes {}  steps {}  final reward ma21 {:.4}",
        rewards.len(),
        exp.global_step(),
        ma.last().copied().unwrap_or(f64::NAN)
    );
    println!("results in {}", out.display());
    Ok(())
}

fn preset(name: &str, args: &PresetArgs) -> Result<()> {
    let mut config = presets::by_name(name).context("unknown preset")?;
    if let Some(n) = args.episodes {
        config.episodes = n;
    }
    if args.desk {
        config = presets::desk(config);
    }
    if let Some((a, b)) = args.widths {
        config = config.with_network_widths(a, b);
    }
    let config = apply_common(config, &args.common);
    config.validate()?;
    if args.print_config {
        print!("{}", config.to_toml()?);
        return Ok(());
    }
    train(config)
}

fn eval(checkpoint: &Path, config: &Path, tolerance: Option<f64>) -> Result<()> {
    let config = load_config(config)?;
    let text = std::fs::read_to_string(checkpoint)
        .with_context(|| format!("cannot read {}", checkpoint.display()))?;
    let agent = DdpgAgent::from_checkpoint(&text, config.seed)?;
    if agent.state_dim() != config.state_dim() {
        bail!(
            "checkpoint expects {} state entries, config produces {}",
            agent.state_dim(),
            config.state_dim()
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SeedPlan::from_seed(config.seed).env);
    let initializer = prepare_initializer(&config, &mut rng)?;
    let tolerance = tolerance.unwrap_or(config.episode.epsilon);
    let setpoints = config.setpoint.support();
    if setpoints.is_empty() {
        bail!("eval needs a set-point grid or piecewise schedule");
    }
    let mut tracked = 0;
    for (i, sp) in setpoints.iter().enumerate() {
        let outcome = evaluate_policy(
            &agent,
            &config,
            &initializer,
            sp,
            tolerance,
            config.seed + i as u64,
        )?;
        let last = outcome.outputs.last().cloned().unwrap_or_default();
        match outcome.tracked_at {
            Some(t) => {
                tracked += 1;
                println!("setpoint {sp:?}: tracked at step {t}, final output {last:?}");
            }
            None => println!("setpoint {sp:?}: not tracked, final output {last:?}"),
        }
    }
    println!("tracked {tracked}/{} within {tolerance}", setpoints.len());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, common } => {
            let loaded = load_config(&config)
                .with_context(|| format!("cannot load {}", config.display()))?;
            train(apply_common(loaded, &common))
        }
        Command::Example1(a) => preset("example1", &a),
        Command::Example2(a) => preset("example2", &a),
        Command::Example3(a) => preset("example3", &a),
        Command::Example4(a) => preset("example4", &a),
        Command::Eval {
            checkpoint,
            config,
            tolerance,
        } => eval(&checkpoint, &config, tolerance),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
