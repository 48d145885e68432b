//! Deterministic batch evaluation, difficulty sweeps, and the
//! generalization experiment.
//!
//! Every episode gets its own seed derived from `(master, level id hash,
//! seed batch, episode index)`, so results are independent of scheduling:
//! rayon only changes wall time, never numbers. Scores aggregate in two
//! stages: per seed batch first (mean over its episodes), then mean and
//! population standard deviation across seed batches.

use rayon::prelude::*;
use towerbench_core::ppo::{train, Mlp, PpoError, TrainConfig, TrainResult};
use towerbench_core::rng::{derive_seed, seeded_rng};
use towerbench_core::{
    run_episode, Agent, EnvConfig, EpisodeRecord, LevelDef, LevelError, ACTION_COUNT,
};

use rand::Rng as _;

/// Default difficulty grid for sweeps.
pub const DEFAULT_SWEEP: [u32; 5] = [0, 50_000, 100_000, 150_000, 200_000];

/// Normalized frequency of each action over an evaluation run.
pub type Histogram = [f64; ACTION_COUNT];

/// Batch evaluation shape.
#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    /// Episodes per (level, seed batch) cell.
    pub episodes: u32,
    /// Independent seed batches.
    pub seeds: u32,
    /// Difficulty every level is scaled to.
    pub difficulty: u32,
    /// Environment parameters.
    pub env: EnvConfig,
}

impl Default for EvalConfig {
    fn default() -> EvalConfig {
        EvalConfig {
            episodes: 100,
            seeds: 5,
            difficulty: 100_000,
            env: EnvConfig::default(),
        }
    }
}

/// Mean and population standard deviation across seed batches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    /// Mean over seed batches.
    pub mean: f64,
    /// Population standard deviation over seed batches.
    pub std: f64,
}

fn spread(values: &[f64]) -> Spread {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Spread { mean, std: var.sqrt() }
}

/// Scores for one level (or the totals row).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelScore {
    /// Level id, or `Total` for the cross-level summary.
    pub level_id: String,
    /// Win percentage (0 to 100).
    pub success: Spread,
    /// Mean episode reward.
    pub reward: Spread,
    /// Mean decisions per episode.
    pub decisions: Spread,
}

/// A finished evaluation over a level set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// One row per level, suite order.
    pub rows: Vec<LevelScore>,
    /// Cross-level summary: success averages over levels per seed batch,
    /// reward and decisions sum over levels per seed batch.
    pub total: LevelScore,
    /// Normalized action frequencies over every episode of the run; all
    /// zero when no decision was ever taken.
    pub histogram: Histogram,
    /// Episodes per (level, seed batch) cell.
    pub episodes: u32,
    /// Seed batches.
    pub seeds: u32,
    /// Difficulty evaluated at.
    pub difficulty: u32,
}

/// FNV-1a of a level id, used as its seed-stream label.
fn id_label(id: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Seed for one evaluation episode.
fn episode_seed(master: u64, level_id: &str, seed_batch: u32, episode: u32) -> u64 {
    derive_seed(master, &[id_label(level_id), seed_batch as u64, episode as u64])
}

/// Runs every episode of the grid in parallel and aggregates.
///
/// Results are a pure function of `(agent, levels, config, master_seed)`;
/// the rayon thread count is immaterial.
pub fn evaluate(
    agent: &Agent,
    levels: &[LevelDef],
    config: &EvalConfig,
    master_seed: u64,
) -> Result<EvalReport, LevelError> {
    assert!(config.episodes > 0 && config.seeds > 0, "empty evaluation grid");
    // One job per (level, seed batch, episode), reduced in index order.
    let jobs: Vec<(usize, u32, u32)> = (0..levels.len())
        .flat_map(|l| {
            (0..config.seeds).flat_map(move |s| (0..config.episodes).map(move |e| (l, s, e)))
        })
        .collect();
    let records: Vec<Result<EpisodeRecord, LevelError>> = jobs
        .par_iter()
        .map(|&(l, s, e)| {
            let level = &levels[l];
            let seed = episode_seed(master_seed, &level.id, s, e);
            run_episode(agent, level, config.difficulty, seed, config.env)
        })
        .collect();
    let mut iter = records.into_iter();
    let mut rows = Vec::with_capacity(levels.len());
    let mut action_totals = [0u64; ACTION_COUNT];
    // per_seed[s] collects (success%, mean reward, mean decisions) rows per
    // level, for the totals reduction.
    let mut per_seed: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new(); config.seeds as usize];
    for level in levels {
        let mut success = Vec::with_capacity(config.seeds as usize);
        let mut reward = Vec::with_capacity(config.seeds as usize);
        let mut decisions = Vec::with_capacity(config.seeds as usize);
        for s in 0..config.seeds {
            let mut wins = 0u32;
            let mut reward_sum = 0.0;
            let mut decision_sum = 0.0;
            for _ in 0..config.episodes {
                let r = iter.next().expect("job grid covers all cells")?;
                wins += r.win as u32;
                reward_sum += r.total_reward;
                decision_sum += r.decisions as f64;
                for (a, &c) in r.action_counts.iter().enumerate() {
                    action_totals[a] += c as u64;
                }
            }
            let e = config.episodes as f64;
            let cell = (wins as f64 / e * 100.0, reward_sum / e, decision_sum / e);
            success.push(cell.0);
            reward.push(cell.1);
            decisions.push(cell.2);
            per_seed[s as usize].push(cell);
        }
        rows.push(LevelScore {
            level_id: level.id.clone(),
            success: spread(&success),
            reward: spread(&reward),
            decisions: spread(&decisions),
        });
    }
    let n_levels = levels.len() as f64;
    let totals: Vec<(f64, f64, f64)> = per_seed
        .iter()
        .map(|cells| {
            let success = cells.iter().map(|c| c.0).sum::<f64>() / n_levels;
            let reward = cells.iter().map(|c| c.1).sum::<f64>();
            let decisions = cells.iter().map(|c| c.2).sum::<f64>();
            (success, reward, decisions)
        })
        .collect();
    let total = LevelScore {
        level_id: String::from("Total"),
        success: spread(&totals.iter().map(|t| t.0).collect::<Vec<_>>()),
        reward: spread(&totals.iter().map(|t| t.1).collect::<Vec<_>>()),
        decisions: spread(&totals.iter().map(|t| t.2).collect::<Vec<_>>()),
    };
    let taken: u64 = action_totals.iter().sum();
    let mut histogram = [0.0; ACTION_COUNT];
    if taken > 0 {
        for (h, &c) in histogram.iter_mut().zip(&action_totals) {
            *h = c as f64 / taken as f64;
        }
    }
    Ok(EvalReport {
        rows,
        total,
        histogram,
        episodes: config.episodes,
        seeds: config.seeds,
        difficulty: config.difficulty,
    })
}

/// One difficulty level of a sweep: per-agent success spreads.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Difficulty this row was evaluated at.
    pub difficulty: u32,
    /// `(agent name, success spread)` in the caller's agent order.
    pub scores: Vec<(String, Spread)>,
}

/// Evaluates every named agent on one level across a difficulty grid.
pub fn difficulty_sweep(
    agents: &[(&str, Agent)],
    level: &LevelDef,
    difficulties: &[u32],
    config: &EvalConfig,
    master_seed: u64,
) -> Result<Vec<SweepRow>, LevelError> {
    let levels = std::slice::from_ref(level);
    let mut rows = Vec::with_capacity(difficulties.len());
    for &difficulty in difficulties {
        let cell_config = EvalConfig { difficulty, ..*config };
        let mut scores = Vec::with_capacity(agents.len());
        for (name, agent) in agents {
            // The agent name joins the master seed so each agent draws an
            // independent episode stream at every difficulty.
            let seed = derive_seed(master_seed, &[id_label(name), difficulty as u64]);
            let report = evaluate(agent, levels, &cell_config, seed)?;
            scores.push((String::from(*name), report.rows[0].success));
        }
        rows.push(SweepRow { difficulty, scores });
    }
    Ok(rows)
}

/// Trains one policy per level, each on its level alone.
///
/// Seeds derive from the level id, so adding or reordering suite levels
/// never changes another level's model.
pub fn train_per_level_models(
    suite: &[LevelDef],
    difficulty: u32,
    config: &TrainConfig,
    master_seed: u64,
) -> Result<Vec<TrainResult>, PpoError> {
    suite
        .iter()
        .map(|level| {
            let seed = derive_seed(master_seed, &[id_label(&level.id)]);
            train(std::slice::from_ref(level), difficulty, config, seed)
        })
        .collect()
}

/// One suite level of the generalization comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizationLevelRow {
    /// Level evaluated on.
    pub level_id: String,
    /// Subset-trained models' success here, averaged over training seeds.
    pub subset_success: f64,
    /// This level's own per-level model's success here.
    pub per_level_success: f64,
    /// HAI's success here.
    pub hai_success: f64,
}

/// Outcome of the generalization experiment for one subset size.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizationReport {
    /// Levels jointly trained on per training seed.
    pub n: usize,
    /// Training seeds (one subset sample and one joint model each).
    pub seeds: u32,
    /// The level ids sampled for each training seed, suite order.
    pub subsets: Vec<Vec<String>>,
    /// One row per suite level.
    pub rows: Vec<GeneralizationLevelRow>,
    /// Mean of `subset_success` over the suite.
    pub subset_mean: f64,
    /// Mean of `per_level_success` over the suite.
    pub per_level_mean: f64,
    /// Mean of `hai_success` over the suite.
    pub hai_mean: f64,
}

/// Trains one joint model per training seed on a freshly sampled subset of
/// `n` levels, evaluates it on the whole suite, and reports it against the
/// per-level models and HAI.
///
/// `per_level` holds one trained actor per suite level, same order.
pub fn generalization_experiment(
    suite: &[LevelDef],
    n: usize,
    seeds: u32,
    train_config: &TrainConfig,
    eval_config: &EvalConfig,
    per_level: &[Mlp],
    master_seed: u64,
) -> Result<GeneralizationReport, PpoError> {
    assert!(n > 0 && n < suite.len(), "subset size must be 1..suite");
    assert!(seeds > 0 && per_level.len() == suite.len(), "one model per suite level");
    let mut subsets = Vec::with_capacity(seeds as usize);
    let mut subset_success = vec![0.0; suite.len()];
    for s in 0..seeds {
        // Partial Fisher-Yates, then suite order: the sample is a set, not
        // a sequence, so training sees a canonical level order.
        let mut rng = seeded_rng(derive_seed(master_seed, &[10, s as u64]));
        let mut idx: Vec<usize> = (0..suite.len()).collect();
        for i in 0..n {
            let j = rng.random_range(i..idx.len());
            idx.swap(i, j);
        }
        idx.truncate(n);
        idx.sort_unstable();
        let sampled: Vec<LevelDef> = idx.iter().map(|&i| suite[i].clone()).collect();
        subsets.push(sampled.iter().map(|l| l.id.clone()).collect());
        let joint = train(
            &sampled,
            eval_config.difficulty,
            train_config,
            derive_seed(master_seed, &[11, s as u64]),
        )?;
        let agent = Agent::Hrl { actor: &joint.actor, stochastic: false };
        let report =
            evaluate(&agent, suite, eval_config, derive_seed(master_seed, &[12, s as u64]))?;
        for (acc, row) in subset_success.iter_mut().zip(&report.rows) {
            *acc += row.success.mean;
        }
    }
    for acc in &mut subset_success {
        *acc /= seeds as f64;
    }

    let hai_master = derive_seed(master_seed, &[13]);
    let hai = evaluate(&Agent::Hai, suite, eval_config, hai_master)?;
    let mut rows = Vec::with_capacity(suite.len());
    for (i, level) in suite.iter().enumerate() {
        let agent = Agent::Hrl { actor: &per_level[i], stochastic: false };
        let own = evaluate(
            &agent,
            std::slice::from_ref(level),
            eval_config,
            derive_seed(master_seed, &[14, id_label(&level.id)]),
        )?;
        rows.push(GeneralizationLevelRow {
            level_id: level.id.clone(),
            subset_success: subset_success[i],
            per_level_success: own.rows[0].success.mean,
            hai_success: hai.rows[i].success.mean,
        });
    }
    let count = suite.len() as f64;
    Ok(GeneralizationReport {
        n,
        seeds,
        subsets,
        subset_mean: rows.iter().map(|r| r.subset_success).sum::<f64>() / count,
        per_level_mean: rows.iter().map(|r| r.per_level_success).sum::<f64>() / count,
        hai_mean: rows.iter().map(|r| r.hai_success).sum::<f64>() / count,
        rows,
    })
}
