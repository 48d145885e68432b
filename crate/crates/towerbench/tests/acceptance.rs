//! Acceptance gate: ten numbered criteria covering the observation and mask
//! contracts, the reward ledger, determinism, learner correctness, baseline
//! invariance, and the three benchmark experiments at desk scale.
//!
//! Each test prints `ACCEPTANCE <n> PASS|FAIL` (visible under
//! `--nocapture`); a FAIL also panics with the failing assertion. The three
//! experiment criteria share one set of per-level models, trained once at a
//! pinned master seed, so the full gate stays well inside its time budgets
//! on a single desktop core.

use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;
use towerbench::eval::{
    difficulty_sweep, evaluate, generalization_experiment, train_per_level_models, EvalConfig,
    DEFAULT_SWEEP,
};
use towerbench::trace::episode_trace;
use towerbench_core::env::encode_observation;
use towerbench_core::ppo::{ppo_grads, ppo_loss, PpoSample, TrainResult};
use towerbench_core::rng::{derive_seed, seeded_rng};
use towerbench_core::strategy::StrategyKind;
use towerbench_core::{
    builtin_suite, compute_gae, hai_priorities, plan, run_episode, select_action, train, Agent,
    DecisionStep, Env, EnvConfig, EnvError, LaneMetrics, Mlp, SemanticType, TrainConfig,
    ACTION_COUNT, NOOP_ACTION, OBS_WIDTH,
};

/// Master seed every experiment criterion derives from.
const MASTER: u64 = 1;

/// The two levels the difficulty sweep criterion runs on.
const DESIGNATED_SWEEP_LEVELS: [&str; 2] = ["S02", "S06"];

/// Desk-scale training configuration shared by criteria 8 through 10.
fn desk_train_config() -> TrainConfig {
    TrainConfig { total_episodes: 2000, hidden_size: 64, ..TrainConfig::default() }
}

/// Desk-scale evaluation grid shared by criteria 8 and 9.
fn desk_eval_config() -> EvalConfig {
    EvalConfig { episodes: 100, seeds: 5, difficulty: 100_000, ..EvalConfig::default() }
}

/// Per-level models for the experiment criteria, trained once on first use.
fn desk_models() -> &'static (Vec<TrainResult>, Duration) {
    static MODELS: OnceLock<(Vec<TrainResult>, Duration)> = OnceLock::new();
    MODELS.get_or_init(|| {
        let start = Instant::now();
        let models =
            train_per_level_models(&builtin_suite(), 100_000, &desk_train_config(), MASTER)
                .expect("per-level training");
        (models, start.elapsed())
    })
}

/// Runs one criterion body and prints its verdict line.
fn criterion(number: u32, name: &str, body: impl FnOnce()) {
    let result = catch_unwind(AssertUnwindSafe(body));
    let verdict = if result.is_ok() { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {number} {verdict}  {name}");
    if let Err(panic) = result {
        resume_unwind(panic);
    }
}

/// Visits `count` non-terminal decision states reached by random play across
/// the whole suite at several difficulties, in a deterministic order.
fn visit_states(count: usize, mut visit: impl FnMut(&Env, &DecisionStep)) {
    let suite = builtin_suite();
    let mut seen = 0;
    let mut round = 0u64;
    while seen < count {
        for (i, level) in suite.iter().enumerate() {
            if seen >= count {
                break;
            }
            let difficulty = [0, 50_000, 100_000, 200_000][(round as usize + i) % 4];
            let seed = derive_seed(0xACCE_97ED, &[round, i as u64]);
            let mut rng = seeded_rng(derive_seed(seed, &[1]));
            let (mut env, mut step) =
                Env::reset(level, difficulty, derive_seed(seed, &[0]), EnvConfig::default())
                    .expect("suite level resets");
            while !step.terminal && seen < count {
                visit(&env, &step);
                seen += 1;
                let action = select_action(&Agent::Random, &env, &step, &mut rng);
                step = env.step(action).expect("legal action steps");
            }
        }
        round += 1;
    }
}

#[test]
fn criterion_01_observation_contract() {
    criterion(1, "observation contract", || {
        let start = Instant::now();
        let mut checked = 0usize;
        visit_states(10_000, |env, step| {
            let state = env.state();
            let obs = encode_observation(state);
            assert_eq!(obs.len(), OBS_WIDTH);
            assert_eq!(obs, step.observation, "env hands out the encoder's observation");

            // Slots 0..36: one-hot semantic type per loadout slot.
            let loadout = &state.level().loadout;
            let types = SemanticType::ALL.len();
            for slot in 0..6 {
                for t in 0..types {
                    let expected = match loadout.get(slot) {
                        Some(spec) if spec.semantic_type.index() == t => 1.0,
                        _ => 0.0,
                    };
                    assert_eq!(obs[slot * types + t], expected, "slot {slot} type {t}");
                }
            }
            // Slots 36..42: remaining cooldown fraction per loadout slot.
            for slot in 0..6 {
                let expected = match loadout.get(slot) {
                    Some(spec) if spec.cooldown > 0 => {
                        state.cooldowns()[slot] as f64 / spec.cooldown as f64
                    }
                    _ => 0.0,
                };
                assert_eq!(obs[36 + slot], expected, "cooldown slot {slot}");
            }
            // Slot 42: sun over 1000.
            assert_eq!(obs[42], state.sun() as f64 / 1000.0);
            // Slots 43..88: per-lane enemy and plant metrics.
            let LaneMetrics { count, mean_hp, closest_norm, past_mid, planted } =
                state.lane_metrics();
            for lane in 0..5 {
                assert_eq!(obs[43 + lane], mean_hp[lane] / 1000.0, "mean hp lane {lane}");
                assert_eq!(obs[48 + lane], closest_norm[lane], "closest lane {lane}");
                assert_eq!(obs[53 + lane], past_mid[lane] as f64, "past mid lane {lane}");
                assert_eq!(obs[58 + lane], count[lane] as f64, "count lane {lane}");
                for t in 0..5 {
                    assert_eq!(
                        obs[63 + lane * 5 + t],
                        planted[lane][t] as f64,
                        "planted lane {lane} type {t}"
                    );
                }
            }
            checked += 1;
        });
        assert_eq!(checked, 10_000);
        let elapsed = start.elapsed();
        assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}, budget 10s");
    });
}

#[test]
fn criterion_02_mask_soundness() {
    criterion(2, "mask soundness", || {
        let mut checked = 0usize;
        visit_states(10_000, |env, step| {
            let state = env.state();
            for kind in StrategyKind::ALL {
                let k = kind.index();
                assert_eq!(
                    step.mask[k],
                    plan(kind, state).is_some(),
                    "mask bit {k} mirrors plan emptiness"
                );
            }
            assert!(step.mask[NOOP_ACTION], "no-op is always legal");
            for action in 0..ACTION_COUNT {
                let mut probe = env.clone();
                let result = probe.step(action);
                if step.mask[action] {
                    assert!(result.is_ok(), "mask-true action {action} must execute");
                } else {
                    assert_eq!(
                        result.unwrap_err(),
                        EnvError::MaskedAction(action),
                        "masked action {action} must be rejected"
                    );
                }
            }
            checked += 1;
        });
        assert_eq!(checked, 10_000);
    });
}

#[test]
fn criterion_03_reward_ledger() {
    criterion(3, "reward ledger", || {
        let suite = builtin_suite();
        let config = EnvConfig::default();
        let mut episodes = 0usize;
        let mut round = 0u64;
        while episodes < 1_000 {
            for (i, level) in suite.iter().enumerate() {
                if episodes >= 1_000 {
                    break;
                }
                let difficulty = [0, 100_000, 200_000][(round as usize + i) % 3];
                let seed = derive_seed(0x1ED6E4, &[round, i as u64]);
                let record = run_episode(&Agent::Random, level, difficulty, seed, config)
                    .expect("suite episode runs");
                let terminal = if record.win { config.win_reward } else { -config.loss_penalty };
                let expected = config.kill_reward * record.kills as f64
                    - config.advance_penalty * record.advanced as f64
                    + terminal;
                let error = (record.total_reward - expected).abs();
                assert!(
                    error < 1e-9,
                    "episode ledger off by {error} on {} difficulty {difficulty}",
                    level.id
                );
                episodes += 1;
            }
            round += 1;
        }
    });
}

#[test]
fn criterion_04_determinism() {
    criterion(4, "determinism", || {
        let start = Instant::now();
        let suite = builtin_suite();
        // Same (level, difficulty, seed, agent stream) twice: identical bytes.
        for (level_id, agent) in [("S03", Agent::Random), ("S05", Agent::Hai)] {
            let level = suite.iter().find(|l| l.id == level_id).unwrap();
            let first = episode_trace(&agent, level, 100_000, 9, EnvConfig::default()).unwrap();
            let second = episode_trace(&agent, level, 100_000, 9, EnvConfig::default()).unwrap();
            assert_eq!(first, second, "episode trace must be bit-identical on {level_id}");
        }
        // Same training seed twice: identical 200-episode learning curve.
        let level = suite.iter().find(|l| l.id == "S03").unwrap();
        let config = TrainConfig {
            total_episodes: 200,
            curve_interval: 20,
            ..desk_train_config()
        };
        let first = train(std::slice::from_ref(level), 100_000, &config, 13).unwrap();
        let second = train(std::slice::from_ref(level), 100_000, &config, 13).unwrap();
        assert!(!first.curve.is_empty());
        assert_eq!(first.curve, second.curve, "training curve must replay exactly");
        assert_eq!(first.actor, second.actor, "trained weights must replay exactly");
        let elapsed = start.elapsed();
        assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}, budget 2min");
    });
}

#[test]
fn criterion_05_gradient_check() {
    criterion(5, "gradient check", || {
        let start = Instant::now();
        let mut rng = seeded_rng(41);
        let actor = Mlp::init(&[OBS_WIDTH, 16, 16, ACTION_COUNT], 0.01, &mut rng);
        let critic = Mlp::init(&[OBS_WIDTH, 16, 16, 1], 1.0, &mut rng);
        let config = TrainConfig::default();

        // An 8-sample buffer of live observations from random play.
        let mut samples: Vec<PpoSample> = Vec::new();
        visit_states(8, |_, step| {
            let logits: [f64; ACTION_COUNT] =
                actor.forward(&step.observation).try_into().unwrap();
            let log_probs = towerbench_core::ppo::masked_log_probs(&logits, &step.mask);
            let action = (0..ACTION_COUNT).find(|&a| step.mask[a]).unwrap();
            samples.push(PpoSample {
                observation: step.observation,
                mask: step.mask,
                action,
                old_log_prob: log_probs[action] + rng.random_range(-0.05..=0.05),
                advantage: rng.random_range(-1.0..1.0),
                value_target: rng.random_range(-2.0..2.0),
            });
        });
        assert_eq!(samples.len(), 8);

        let (loss, _, grads_actor, grads_critic) = ppo_grads(&actor, &critic, &samples, &config);
        assert!(loss.is_finite());
        let h = 1e-5;
        let check = |net: &Mlp, grads_flat: Vec<f64>, is_actor: bool| {
            for idx in 0..net.param_count() {
                let mut plus = net.clone();
                plus.set_param(idx, plus.get_param(idx) + h);
                let mut minus = net.clone();
                minus.set_param(idx, minus.get_param(idx) - h);
                let (lp, lm) = if is_actor {
                    (
                        ppo_loss(&plus, &critic, &samples, &config).0,
                        ppo_loss(&minus, &critic, &samples, &config).0,
                    )
                } else {
                    (
                        ppo_loss(&actor, &plus, &samples, &config).0,
                        ppo_loss(&actor, &minus, &samples, &config).0,
                    )
                };
                let fd = (lp - lm) / (2.0 * h);
                let g = grads_flat[idx];
                let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
                assert!(
                    rel < 1e-4,
                    "{} param {idx}: analytic {g} vs central difference {fd} (rel {rel})",
                    if is_actor { "actor" } else { "critic" }
                );
            }
        };
        let flatten = |g: &towerbench_core::ppo::MlpGrads| {
            let mut flat = Vec::new();
            for l in 0..g.weights.len() {
                flat.extend_from_slice(&g.weights[l]);
                flat.extend_from_slice(&g.biases[l]);
            }
            flat
        };
        check(&actor, flatten(&grads_actor), true);
        check(&critic, flatten(&grads_critic), false);
        let elapsed = start.elapsed();
        assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}, budget 30s");
    });
}

#[test]
fn criterion_06_gae_oracle() {
    criterion(6, "advantage estimator oracle", || {
        let mut rng = seeded_rng(6);
        for case in 0..100 {
            let n = rng.random_range(1..=32);
            let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let (gamma, lam) = (rng.random_range(0.9..1.0), rng.random_range(0.8..1.0));
            let got = compute_gae(&rewards, &values, gamma, lam).unwrap();

            // Independent backward recursion with a terminal bootstrap of 0.
            let mut advantages = vec![0.0; n];
            let mut next_adv = 0.0;
            let mut next_value = 0.0;
            for t in (0..n).rev() {
                let delta = rewards[t] + gamma * next_value - values[t];
                next_adv = delta + gamma * lam * next_adv;
                next_value = values[t];
                advantages[t] = next_adv;
            }
            for t in 0..n {
                assert!(
                    (got.advantages[t] - advantages[t]).abs() <= 1e-12,
                    "case {case} step {t}: {} vs oracle {}",
                    got.advantages[t],
                    advantages[t]
                );
                let ret = advantages[t] + values[t];
                assert!(
                    (got.returns[t] - ret).abs() <= 1e-12,
                    "case {case} step {t}: return {} vs oracle {ret}",
                    got.returns[t]
                );
            }
        }
    });
}

#[test]
fn criterion_07_hai_level_independence() {
    criterion(7, "baseline level-independence", || {
        let suite = builtin_suite();
        let mut checked = 0usize;
        let mut round = 0u64;
        while checked < 1_000 {
            for (i, level) in suite.iter().enumerate() {
                if checked >= 1_000 {
                    break;
                }
                // The same game under a different level id.
                let mut relabeled = level.clone();
                relabeled.id = format!("Z{i:02}");
                let difficulty = [0, 100_000][(round as usize + i) % 2];
                let seed = derive_seed(0x7A1, &[round, i as u64]);
                let mut rng = seeded_rng(derive_seed(seed, &[1]));
                let (mut a, mut step_a) =
                    Env::reset(level, difficulty, derive_seed(seed, &[0]), EnvConfig::default())
                        .unwrap();
                let (mut b, step_b) =
                    Env::reset(&relabeled, difficulty, derive_seed(seed, &[0]), EnvConfig::default())
                        .unwrap();
                assert_eq!(step_a.observation, step_b.observation);
                while !step_a.terminal && checked < 1_000 {
                    let pa = hai_priorities(a.state());
                    let pb = hai_priorities(b.state());
                    assert_eq!(pa, pb, "priorities must ignore the level id");
                    checked += 1;
                    let action = select_action(&Agent::Random, &a, &step_a, &mut rng);
                    step_a = a.step(action).unwrap();
                    let step_b = b.step(action).unwrap();
                    assert_eq!(step_a.observation, step_b.observation);
                    assert_eq!(step_a.terminal, step_b.terminal);
                }
            }
            round += 1;
        }
    });
}

#[test]
fn criterion_08_per_level_benchmark() {
    criterion(8, "per-level benchmark margins", || {
        let start = Instant::now();
        let suite = builtin_suite();
        let (models, train_time) = desk_models();
        let config = desk_eval_config();

        let mut hrl_scores = Vec::with_capacity(suite.len());
        for (level, result) in suite.iter().zip(models) {
            let agent = Agent::Hrl { actor: &result.actor, stochastic: false };
            let report =
                evaluate(&agent, std::slice::from_ref(level), &config, MASTER).unwrap();
            hrl_scores.push(report.rows[0].success.mean);
        }
        let hai = evaluate(&Agent::Hai, &suite, &config, MASTER).unwrap();
        let random = evaluate(&Agent::Random, &suite, &config, MASTER).unwrap();

        let hrl_mean = hrl_scores.iter().sum::<f64>() / hrl_scores.len() as f64;
        let hai_mean = hai.total.success.mean;
        let random_mean = random.total.success.mean;
        for (i, level) in suite.iter().enumerate() {
            println!(
                "  {}  hrl {:5.1}  hai {:5.1}  random {:5.1}",
                level.id, hrl_scores[i], hai.rows[i].success.mean, random.rows[i].success.mean
            );
        }
        println!("  total  hrl {hrl_mean:.2}  hai {hai_mean:.2}  random {random_mean:.2}");
        assert!(
            hrl_mean >= hai_mean + 5.0,
            "learned policy must beat the scripted baseline by 5 points: {hrl_mean:.2} vs {hai_mean:.2}"
        );
        assert!(
            hai_mean >= random_mean - 5.0,
            "scripted baseline must stay within 5 points of random: {hai_mean:.2} vs {random_mean:.2}"
        );
        let wall = start.elapsed() + *train_time;
        assert!(wall < Duration::from_secs(3 * 3600), "took {wall:?}, budget 3h");
    });
}

#[test]
fn criterion_09_difficulty_sweeps() {
    criterion(9, "difficulty sweep margins", || {
        let suite = builtin_suite();
        let (models, _) = desk_models();
        let config = desk_eval_config();
        for level_id in DESIGNATED_SWEEP_LEVELS {
            let index = suite.iter().position(|l| l.id == level_id).unwrap();
            let agents = [
                ("HRL", Agent::Hrl { actor: &models[index].actor, stochastic: false }),
                ("HAI", Agent::Hai),
                ("Random", Agent::Random),
            ];
            let rows =
                difficulty_sweep(&agents, &suite[index], &DEFAULT_SWEEP, &config, MASTER)
                    .unwrap();
            for row in &rows {
                let hrl = row.scores[0].1.mean;
                let hai = row.scores[1].1.mean;
                println!(
                    "  {level_id} d={:<6}  hrl {hrl:5.1}  hai {hai:5.1}  random {:5.1}",
                    row.difficulty, row.scores[2].1.mean
                );
                assert!(
                    hrl >= hai - 5.0,
                    "{level_id} at difficulty {}: learned {hrl:.1} vs scripted {hai:.1}",
                    row.difficulty
                );
            }
            let first = &rows[0];
            let last = rows.last().unwrap();
            assert_eq!(first.difficulty, 0);
            assert_eq!(last.difficulty, 200_000);
            for agent_index in 0..agents.len() {
                let at_zero = first.scores[agent_index].1.mean;
                let at_top = last.scores[agent_index].1.mean;
                assert!(
                    at_top <= at_zero,
                    "{level_id} {}: success may not rise with difficulty ({at_top:.1} vs {at_zero:.1})",
                    agents[agent_index].0
                );
            }
        }
    });
}

#[test]
fn criterion_10_generalization_gap() {
    criterion(10, "generalization gap", || {
        let suite = builtin_suite();
        let (models, _) = desk_models();
        let actors: Vec<Mlp> = models.iter().map(|m| m.actor.clone()).collect();
        let eval_config = EvalConfig { episodes: 100, seeds: 3, ..desk_eval_config() };
        for n in [2usize, 4] {
            let report = generalization_experiment(
                &suite,
                n,
                3,
                &desk_train_config(),
                &eval_config,
                &actors,
                MASTER,
            )
            .unwrap();
            println!(
                "  n={n}  subset {:.2}  per-level {:.2}  hai {:.2}",
                report.subset_mean, report.per_level_mean, report.hai_mean
            );
            assert!(
                report.subset_mean <= report.per_level_mean + 2.0,
                "subset-trained models may not beat per-level models by over 2 points: \
                 {:.2} vs {:.2} at n={n}",
                report.subset_mean,
                report.per_level_mean
            );
        }
    });
}
