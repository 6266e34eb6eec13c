use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tgrasp_core::env::Variation;
use tgrasp_core::experiment::{
    cmd_eval, cmd_force_stats, cmd_replay, cmd_sweep, cmd_train, default_output_root,
    load_run_config, sweep_cells, ResultsTable, RunConfig,
};
use tgrasp_core::mappo::BaselineVariant;
use tgrasp_core::physics::GeometryProfile;
use tgrasp_core::Error;

/// Cooperative two-gripper grasp-and-transport training with ternary force
/// feedback.
#[derive(Parser, Debug)]
#[command(name = "tgrasp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one policy per seed from a TOML run configuration.
    Train(TrainArgs),
    /// Evaluate a checkpoint and print one results row.
    Eval(EvalArgs),
    /// Evaluate checkpoints over force scales and geometries.
    Sweep(SweepArgs),
    /// Per-channel statistics of the force observations a policy sees.
    ForceStats(ForceStatsArgs),
    /// Record one deterministic episode as line-delimited JSON.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Run configuration file; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Train only these seeds (repeatable).
    #[arg(long)]
    seed: Vec<u64>,
    #[arg(long)]
    variant: Option<BaselineVariant>,
    /// Output root (default: config `output_dir`, then $TGRASP_OUT, then ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.num_envs=8` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_key_value)]
    overrides: Vec<(String, String)>,
    #[arg(long)]
    single_threaded: bool,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args, Debug)]
struct VariationArgs {
    /// Multiply the commanded pinch force by this factor.
    #[arg(long)]
    force_scale: Option<f64>,
    /// Object geometry: slab or cylinder.
    #[arg(long)]
    geometry: Option<GeometryProfile>,
}

impl VariationArgs {
    fn variations(&self) -> Vec<Variation> {
        let mut v = Vec::new();
        if let Some(s) = self.force_scale {
            v.push(Variation::ForceScale(s));
        }
        if let Some(g) = self.geometry {
            v.push(Variation::Geometry(g));
        }
        v
    }
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Fail unless the checkpoint was trained as this variant.
    #[arg(long)]
    variant: Option<BaselineVariant>,
    #[command(flatten)]
    variation: VariationArgs,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Results CSV (default: eval_results.csv under the output root).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    single_threaded: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Checkpoints to evaluate (repeatable).
    #[arg(long, required = true)]
    checkpoint: Vec<PathBuf>,
    /// Force scales, comma separated.
    #[arg(long, value_delimiter = ',')]
    force_scale: Vec<f64>,
    /// Geometries, comma separated.
    #[arg(long, value_delimiter = ',')]
    geometry: Vec<GeometryProfile>,
    /// Evaluation seeds, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seed: Vec<u64>,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    /// Results CSV (default: sweep_results.csv under the output root).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    single_threaded: bool,
}

#[derive(Args, Debug)]
struct ForceStatsArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    variant: Option<BaselineVariant>,
    #[command(flatten)]
    variation: VariationArgs,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the statistics as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    variation: VariationArgs,
    /// Trace file (default: replay_seed<seed>.jsonl under the output root).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got '{s}'"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn out_or_default(out: Option<PathBuf>, file: &str) -> PathBuf {
    out.unwrap_or_else(|| default_output_root().join(file))
}

fn ensure_parent(path: &Path) -> tgrasp_core::Result<()> {
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(p) => std::fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        None => Ok(()),
    }
}

fn train(args: TrainArgs) -> tgrasp_core::Result<()> {
    let mut cfg = match &args.config {
        Some(path) => load_run_config(path, &args.overrides)?,
        None => {
            let defaults = RunConfig::default().to_toml()?;
            tgrasp_core::experiment::parse_run_config(&defaults, &args.overrides)?
        }
    };
    if !args.seed.is_empty() {
        cfg.seeds = args.seed.clone();
    }
    if let Some(v) = args.variant {
        cfg.variant = v;
    }
    if let Some(out) = args.out {
        cfg.output_dir = Some(out);
    }
    cfg.validate()?;
    if args.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let total = cfg.train.iterations();
    let dir = cmd_train(&cfg, !args.single_threaded, |seed, row| {
        println!(
            "seed {seed} iter {}/{total} steps {} episodes {} reward {:.1} success {:.2} entropy {:.3}",
            row.iteration,
            row.env_steps,
            row.episodes,
            row.mean_episode_reward,
            row.success_rate,
            row.entropy
        );
    })?;
    println!("run written to {}", dir.display());
    Ok(())
}

fn eval(args: EvalArgs) -> tgrasp_core::Result<()> {
    let row = cmd_eval(
        &args.checkpoint,
        args.variant,
        &args.variation.variations(),
        args.episodes,
        args.seed,
        !args.single_threaded,
    )?;
    let out = out_or_default(args.out, "eval_results.csv");
    ensure_parent(&out)?;
    ResultsTable { rows: vec![row.clone()] }.write_csv(&out)?;
    println!(
        "variant {} variation {} episodes {} seed {} success {:.3} position_error {:.4} (var {:.5})",
        row.variant,
        row.variation,
        row.n_episodes,
        row.seed,
        row.success_rate,
        row.position_error_mean,
        row.position_error_sample_variance
    );
    println!("results written to {}", out.display());
    Ok(())
}

fn sweep(args: SweepArgs) -> tgrasp_core::Result<()> {
    let cells = sweep_cells(&args.force_scale, &args.geometry)?;
    let table = cmd_sweep(
        &args.checkpoint,
        &cells,
        &args.seed,
        args.episodes,
        !args.single_threaded,
    )?;
    let out = out_or_default(args.out, "sweep_results.csv");
    ensure_parent(&out)?;
    table.write_csv(&out)?;
    print!("{}", table.pivot());
    println!("results written to {}", out.display());
    Ok(())
}

fn force_stats(args: ForceStatsArgs) -> tgrasp_core::Result<()> {
    let stats = cmd_force_stats(
        &args.checkpoint,
        args.variant,
        &args.variation.variations(),
        args.episodes,
        args.seed,
    )?;
    println!(
        "variant {} variation {} episodes {} samples {}",
        stats.variant, stats.variation, stats.n_episodes, stats.n_samples
    );
    println!("{:>5} {:>7} {:>12} {:>12}", "agent", "channel", "mean", "variance");
    for (agent, (m, v)) in stats.mean.iter().zip(&stats.variance).enumerate() {
        for k in 0..m.len() {
            println!("{agent:>5} {k:>7} {:>12.5} {:>12.5}", m[k], v[k]);
        }
    }
    println!(
        "{:>5} {:>7} {:>12.5} {:>12.5}",
        "all", "-", stats.pooled_mean, stats.pooled_variance
    );
    if let Some(out) = args.out {
        ensure_parent(&out)?;
        let json = serde_json::to_string_pretty(&stats).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(&out, json).map_err(|e| Error::io(&out, e))?;
    }
    Ok(())
}

fn replay(args: ReplayArgs) -> tgrasp_core::Result<()> {
    let out = out_or_default(args.out, &format!("replay_seed{}.jsonl", args.seed));
    let summary = cmd_replay(&args.checkpoint, args.seed, &args.variation.variations(), &out)?;
    println!(
        "outcome {:?} steps {} position_error {:.4}; trace written to {}",
        summary.outcome,
        summary.steps,
        summary.final_position_error,
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::ForceStats(a) => force_stats(a),
        Command::Replay(a) => replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Composition(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
