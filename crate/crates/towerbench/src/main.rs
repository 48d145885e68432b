//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 on argument validation failures, 1 on
//! runtime errors (IO, training divergence).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use towerbench::eval::{
    difficulty_sweep, evaluate, generalization_experiment, train_per_level_models, EvalConfig,
    DEFAULT_SWEEP,
};
use towerbench::files::{load_checkpoint, load_level, save_checkpoint};
use towerbench::report::{
    render_eval_table, render_generalization_table, render_sweep_table, write_curve_csv,
    write_eval_csv, write_generalization_csv, write_histogram_csv, write_sweep_csv,
};
use towerbench::trace::episode_trace;
use towerbench_core::ppo::{train, TrainConfig};
use towerbench_core::{builtin_suite, Agent, EnvConfig, LevelDef, MAX_DIFFICULTY};

#[derive(Parser)]
#[command(name = "towerbench", version, about = "Tower-defense benchmark: train, evaluate, sweep")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect the bundled level suite.
    Suite {
        #[command(subcommand)]
        action: SuiteAction,
    },
    /// Train a policy with PPO and save a checkpoint.
    Train(TrainArgs),
    /// Evaluate an agent over levels, seeds, and episodes.
    Eval(EvalArgs),
    /// Evaluate one agent across a difficulty grid on one level.
    Sweep(SweepArgs),
    /// Compare jointly and individually trained policies on a level subset.
    Generalize(GeneralizeArgs),
    /// Print a deterministic per-decision episode trace.
    Trace(TraceArgs),
}

#[derive(Subcommand)]
enum SuiteAction {
    /// List the bundled levels.
    List,
}

#[derive(Args)]
struct LevelSelect {
    /// One level: a bundled id (S01..S08) or a .td file path.
    #[arg(long)]
    level: Option<String>,
    /// Comma-separated list of bundled ids or .td file paths.
    #[arg(long, value_delimiter = ',')]
    levels: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    select: LevelSelect,
    /// Episodes to train for [default: 2000, or 10000 at experiment scale].
    #[arg(long)]
    episodes: Option<u32>,
    /// Master seed for initialization, sampling, and episode draws.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Difficulty scale applied to every training episode.
    #[arg(long, default_value_t = 100_000)]
    difficulty: u32,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Learning-curve CSV output path.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Hidden width of both networks [default: 64, or 1024 at experiment scale].
    #[arg(long)]
    hidden: Option<usize>,
    /// Paper-scale defaults: 10000 episodes, hidden width 1024.
    #[arg(long)]
    experiment_scale: bool,
}

#[derive(Args)]
struct AgentSelect {
    /// Controller family.
    #[arg(long, value_enum)]
    agent: AgentKind,
    /// Checkpoint path; required for (and only used by) the hrl agent.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Sample the policy during evaluation instead of taking the argmax.
    #[arg(long)]
    stochastic_eval: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AgentKind {
    Hrl,
    Hai,
    Random,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    agent: AgentSelect,
    #[command(flatten)]
    select: LevelSelect,
    /// Episodes per (level, seed batch) cell.
    #[arg(long, default_value_t = 100)]
    episodes: u32,
    /// Independent seed batches.
    #[arg(long, default_value_t = 5)]
    seeds: u32,
    /// Difficulty scale.
    #[arg(long, default_value_t = 100_000)]
    difficulty: u32,
    /// Master seed the per-episode seeds derive from.
    #[arg(long, default_value_t = 1)]
    master_seed: u64,
    /// Directory to write eval.csv into.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    agent: AgentSelect,
    /// Bundled id or .td file path.
    #[arg(long)]
    level: String,
    /// Comma-separated difficulty grid.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SWEEP)]
    difficulties: Vec<u32>,
    /// Episodes per (difficulty, seed batch) cell.
    #[arg(long, default_value_t = 100)]
    episodes: u32,
    /// Independent seed batches.
    #[arg(long, default_value_t = 5)]
    seeds: u32,
    /// Master seed the per-episode seeds derive from.
    #[arg(long, default_value_t = 1)]
    master_seed: u64,
    /// Sweep CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GeneralizeArgs {
    /// Levels jointly trained on per seed, sampled without replacement.
    #[arg(long)]
    n: usize,
    /// Training seeds (one subset sample and one joint model each).
    #[arg(long, default_value_t = 3)]
    seeds: u32,
    /// Training episodes per model.
    #[arg(long, default_value_t = 2000)]
    episodes: u32,
    /// Episodes per evaluation cell.
    #[arg(long, default_value_t = 100)]
    eval_episodes: u32,
    /// Seed batches per evaluation.
    #[arg(long, default_value_t = 3)]
    eval_seeds: u32,
    /// Difficulty scale for training and evaluation.
    #[arg(long, default_value_t = 100_000)]
    difficulty: u32,
    /// Master seed.
    #[arg(long, default_value_t = 1)]
    master_seed: u64,
    /// Hidden width of both networks.
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    /// Result CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    agent: AgentSelect,
    /// Bundled id or .td file path.
    #[arg(long)]
    level: String,
    /// Episode seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Difficulty scale.
    #[arg(long, default_value_t = 100_000)]
    difficulty: u32,
    /// Write the trace here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Argument combinations clap cannot check; exits with code 2.
fn validate(msg: &str) -> ! {
    eprintln!("error: {msg}");
    std::process::exit(2);
}

/// Resolves a level spec: bundled id first, then a file path.
fn resolve_level(spec: &str) -> Result<LevelDef> {
    if let Some(level) = builtin_suite().into_iter().find(|l| l.id == spec) {
        return Ok(level);
    }
    let path = Path::new(spec);
    if path.exists() {
        return load_level(path);
    }
    validate(&format!("unknown level {spec:?}: not a bundled id or an existing file"));
}

fn resolve_selection(select: &LevelSelect, default_all: bool) -> Result<Vec<LevelDef>> {
    let mut specs: Vec<String> = Vec::new();
    if let Some(one) = &select.level {
        specs.push(one.clone());
    }
    specs.extend(select.levels.iter().cloned());
    if specs.is_empty() {
        if default_all {
            return Ok(builtin_suite());
        }
        validate("no levels selected: pass --level or --levels");
    }
    specs.iter().map(|s| resolve_level(s)).collect()
}

fn check_difficulty(d: u32) {
    if d > MAX_DIFFICULTY {
        validate(&format!("difficulty {d} exceeds the maximum {MAX_DIFFICULTY}"));
    }
}

/// Loads the checkpoint behind an agent selection, if it needs one.
fn load_agent_model(select: &AgentSelect) -> Result<Option<towerbench_core::ppo::Checkpoint>> {
    match select.agent {
        AgentKind::Hrl => {
            let Some(path) = &select.model else {
                validate("--agent hrl requires --model");
            };
            Ok(Some(load_checkpoint(path)?))
        }
        AgentKind::Hai | AgentKind::Random => {
            if select.model.is_some() {
                validate("--model is only meaningful with --agent hrl");
            }
            Ok(None)
        }
    }
}

fn agent_from<'a>(
    select: &AgentSelect,
    checkpoint: &'a Option<towerbench_core::ppo::Checkpoint>,
) -> Agent<'a> {
    match select.agent {
        AgentKind::Hrl => Agent::Hrl {
            actor: &checkpoint.as_ref().expect("checked by load_agent_model").actor,
            stochastic: select.stochastic_eval,
        },
        AgentKind::Hai => Agent::Hai,
        AgentKind::Random => Agent::Random,
    }
}

fn agent_label(kind: AgentKind) -> &'static str {
    match kind {
        AgentKind::Hrl => "HRL",
        AgentKind::Hai => "HAI",
        AgentKind::Random => "Random",
    }
}

fn cmd_suite_list() {
    for level in builtin_suite() {
        let enemies: u32 =
            level.waves.iter().flat_map(|w| w.entries.iter().map(|e| e.count)).sum();
        println!(
            "{}  rows {}  loadout {}  waves {} ({} enemies)  sun {}  max_ticks {}",
            level.id,
            level.rows,
            level.loadout.len(),
            level.waves.len(),
            enemies,
            level.starting_sun,
            level.max_ticks,
        );
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    check_difficulty(args.difficulty);
    let levels = resolve_selection(&args.select, false)?;
    let episodes = args.episodes.unwrap_or(if args.experiment_scale { 10_000 } else { 2000 });
    let hidden = args.hidden.unwrap_or(if args.experiment_scale { 1024 } else { 64 });
    let config = TrainConfig { total_episodes: episodes, hidden_size: hidden, ..TrainConfig::default() };
    let ids: Vec<&str> = levels.iter().map(|l| l.id.as_str()).collect();
    println!(
        "training on {} for {episodes} episodes (hidden {hidden}, difficulty {}, seed {})",
        ids.join(","),
        args.difficulty,
        args.seed
    );
    let result = train(&levels, args.difficulty, &config, args.seed)
        .context("training failed")?;
    save_checkpoint(&args.out, &result.actor, &result.critic, args.seed, &config)?;
    println!(
        "finished: {} episodes, {} updates, checkpoint {}",
        result.episodes,
        result.updates,
        args.out.display()
    );
    if let Some(last) = result.curve.last() {
        println!(
            "final window: mean reward {:.3}, success rate {:.2}",
            last.mean_reward, last.success_rate
        );
    }
    if let Some(path) = &args.curve {
        write_curve_csv(path, &result.curve)?;
        println!("curve written to {}", path.display());
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    check_difficulty(args.difficulty);
    let levels = resolve_selection(&args.select, true)?;
    let checkpoint = load_agent_model(&args.agent)?;
    let agent = agent_from(&args.agent, &checkpoint);
    let config = EvalConfig {
        episodes: args.episodes,
        seeds: args.seeds,
        difficulty: args.difficulty,
        env: EnvConfig::default(),
    };
    let report = evaluate(&agent, &levels, &config, args.master_seed)?;
    print!("{}", render_eval_table(&report));
    if let Some(dir) = &args.report {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))?;
        let eval_path = dir.join("eval.csv");
        write_eval_csv(&eval_path, &report)?;
        write_histogram_csv(&dir.join("histogram.csv"), &report.histogram)?;
        println!("report written to {} and histogram.csv", eval_path.display());
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    for &d in &args.difficulties {
        check_difficulty(d);
    }
    let level = resolve_level(&args.level)?;
    let checkpoint = load_agent_model(&args.agent)?;
    let agent = agent_from(&args.agent, &checkpoint);
    let config = EvalConfig {
        episodes: args.episodes,
        seeds: args.seeds,
        difficulty: 0,
        env: EnvConfig::default(),
    };
    let label = agent_label(args.agent.agent);
    let rows = difficulty_sweep(
        &[(label, agent)],
        &level,
        &args.difficulties,
        &config,
        args.master_seed,
    )?;
    print!("{}", render_sweep_table(&rows));
    if let Some(path) = &args.out {
        write_sweep_csv(path, &rows)?;
        println!("sweep written to {}", path.display());
    }
    Ok(())
}

fn cmd_generalize(args: GeneralizeArgs) -> Result<()> {
    check_difficulty(args.difficulty);
    let suite = builtin_suite();
    if args.n == 0 || args.n >= suite.len() {
        validate(&format!("--n must be between 1 and {}", suite.len() - 1));
    }
    let train_config = TrainConfig {
        total_episodes: args.episodes,
        hidden_size: args.hidden,
        ..TrainConfig::default()
    };
    let eval_config = EvalConfig {
        episodes: args.eval_episodes,
        seeds: args.eval_seeds,
        difficulty: args.difficulty,
        env: EnvConfig::default(),
    };
    println!(
        "training {} per-level models, then {} joint models of {} levels each",
        suite.len(),
        args.seeds,
        args.n
    );
    let models = train_per_level_models(&suite, args.difficulty, &train_config, args.master_seed)
        .context("per-level training failed")?;
    let actors: Vec<_> = models.into_iter().map(|m| m.actor).collect();
    let report = generalization_experiment(
        &suite,
        args.n,
        args.seeds,
        &train_config,
        &eval_config,
        &actors,
        args.master_seed,
    )
    .context("generalization experiment failed")?;
    print!("{}", render_generalization_table(&report));
    if let Some(path) = &args.out {
        write_generalization_csv(path, &report)?;
        println!("results written to {}", path.display());
    }
    Ok(())
}

fn cmd_trace(args: TraceArgs) -> Result<()> {
    check_difficulty(args.difficulty);
    let level = resolve_level(&args.level)?;
    let checkpoint = load_agent_model(&args.agent)?;
    let agent = agent_from(&args.agent, &checkpoint);
    let text = episode_trace(&agent, &level, args.difficulty, args.seed, EnvConfig::default())?;
    match &args.out {
        Some(path) => {
            std::fs::write(path, &text)
                .with_context(|| format!("writing {}", path.display()))?;
            println!("trace written to {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Suite { action: SuiteAction::List } => {
            cmd_suite_list();
            Ok(())
        }
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Generalize(args) => cmd_generalize(args),
        Command::Trace(args) => cmd_trace(args),
    }
}

fn main() -> ExitCode {
    towerbench::init_thread_pool();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
