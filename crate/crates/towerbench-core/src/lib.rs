//! Core engine for the towerbench lane-defense benchmark.
//!
//! Everything in this crate is deterministic and `no_std` (with `alloc`):
//! the fixed-point simulator, the scripted strategy layer, the decision-level
//! RL environment, the PPO trainer, and the agent episode loop. File IO, the
//! CLI, and parallel evaluation live in the companion `towerbench` crate.
//!
//! Determinism is load-bearing: every random draw flows through a seeded
//! [`rand_chacha::ChaCha8Rng`], simulation state is integer-only (positions in
//! thousandths of a cell), and float math in the learner goes through `libm`
//! so results are bit-identical across platforms and thread counts.

#![no_std]
#![warn(missing_docs)]

#[cfg(test)]
extern crate std;

extern crate alloc;

pub mod agent;
pub mod env;
pub mod level;
pub mod ppo;
pub mod rng;
pub mod sim;
pub mod strategy;

pub use agent::{run_episode, select_action, Agent, EpisodeRecord};
pub use ppo::{
    compute_gae, decode_checkpoint, encode_checkpoint, train, Checkpoint, CheckpointError,
    CurvePoint, Mlp, PpoError, TrainConfig, TrainResult, UpdateStats,
};
pub use env::{ActionMask, DecisionStep, Env, EnvConfig, EnvError, Observation, ACTION_COUNT, NOOP_ACTION, OBS_WIDTH};
pub use level::{
    builtin_suite, Catalog, DifficultyParams, EnemySpec, LevelDef, LevelError, SemanticType,
    Terrain, UnitSpec, WaveEntry, WaveLane, WaveSpec, COLS, MAX_DIFFICULTY, MAX_ROWS,
};
pub use sim::{
    BoardCell, EnemyInstance, GameState, LaneMetrics, Outcome, PlaceError, PlantInstance,
    TickDelta, TickError, POS_SCALE,
};
pub use strategy::{hai_priorities, hai_select, plan, strategy_execute, Placement, StrategyKind};
