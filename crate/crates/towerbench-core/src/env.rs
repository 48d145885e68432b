//! Decision-point environment over the simulator.
//!
//! The environment advances the game in fixed windows of
//! [`EnvConfig::decision_interval`] ticks. At each decision the agent picks
//! one of [`ACTION_COUNT`] actions: the four strategies in
//! [`StrategyKind::ALL`] order, or [`NOOP_ACTION`] to place nothing. The
//! action mask marks exactly the strategies whose plan is non-empty; NoOp is
//! always legal. Windows where NoOp is the only legal action carry no
//! meaningful choice, so the environment fast-forwards through them and the
//! skipped windows' rewards fold into the returned step.
//!
//! Rewards per window are `kill_reward * kills - advance_penalty * advances`
//! where an advance is one enemy dropping one integer cell. On termination
//! the step additionally carries `+win_reward` or `-loss_penalty`; running
//! out of ticks counts as a loss while the simulator outcome stays
//! [`Outcome::Ongoing`].

use core::fmt;

use crate::level::{LevelDef, LevelError, SemanticType};
use crate::sim::{GameState, LaneMetrics, Outcome};
use crate::strategy::{plan, strategy_execute, StrategyKind};

/// Observation width: 36 loadout one-hots, 6 cooldown fractions, sun, and
/// 45 lane features.
pub const OBS_WIDTH: usize = 88;

/// Number of discrete actions (four strategies plus NoOp).
pub const ACTION_COUNT: usize = 5;

/// Index of the NoOp action.
pub const NOOP_ACTION: usize = 4;

/// Dense observation vector. Layout:
///
/// | Range    | Content                                                    |
/// |----------|------------------------------------------------------------|
/// | 0..36    | per-slot semantic one-hot (6 slots x 6 types, slot-major)  |
/// | 36..42   | per-slot remaining cooldown fraction                       |
/// | 42       | held sun / 1000                                            |
/// | 43..48   | per-lane mean enemy hp / 1000                              |
/// | 48..53   | per-lane closest enemy position / 9 cells (1 when empty)   |
/// | 53..58   | per-lane enemies past the midpoint                         |
/// | 58..63   | per-lane enemy count                                       |
/// | 63..88   | per-lane standing plants per persistent type (lane-major)  |
///
/// Slots beyond the loadout read as zero everywhere.
pub type Observation = [f64; OBS_WIDTH];

/// Legality mask over the five actions, [`StrategyKind::ALL`] order then
/// NoOp. `mask[k]` is true exactly when strategy `k` has a non-empty plan;
/// `mask[NOOP_ACTION]` is always true.
pub type ActionMask = [bool; ACTION_COUNT];

/// Reward shaping and pacing parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvConfig {
    /// Ticks simulated between decisions.
    pub decision_interval: u32,
    /// Reward per enemy destroyed.
    pub kill_reward: f64,
    /// Penalty per enemy cell-advance.
    pub advance_penalty: f64,
    /// Terminal bonus on a win.
    pub win_reward: f64,
    /// Terminal penalty on a loss (applied negatively).
    pub loss_penalty: f64,
}

impl Default for EnvConfig {
    fn default() -> EnvConfig {
        EnvConfig {
            decision_interval: 30,
            kill_reward: 1.2,
            advance_penalty: 1.0 / 200.0,
            win_reward: 1.0,
            loss_penalty: 5.0,
        }
    }
}

/// What the agent sees at one decision point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionStep {
    /// Observation after the window (and any fast-forwarded windows).
    pub observation: Observation,
    /// Action legality for the next decision.
    pub mask: ActionMask,
    /// Reward accumulated since the previous decision, terminal bonus
    /// included.
    pub reward: f64,
    /// True once the episode is decided; no further steps are accepted.
    pub terminal: bool,
}

/// A step call the environment rejected. The state is untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvError {
    /// The episode already ended.
    Terminal,
    /// Action index outside `0..ACTION_COUNT`.
    InvalidAction(usize),
    /// The action's mask entry is false.
    MaskedAction(usize),
}

impl fmt::Display for EnvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvError::Terminal => write!(f, "step on a finished episode"),
            EnvError::InvalidAction(a) => write!(f, "action index {a} out of range"),
            EnvError::MaskedAction(a) => write!(f, "action {a} is masked"),
        }
    }
}

impl core::error::Error for EnvError {}

/// Encodes the observation for a state. See [`Observation`] for the layout.
pub fn encode_observation(state: &GameState) -> Observation {
    let mut obs = [0.0; OBS_WIDTH];
    let loadout = &state.level().loadout;
    for (slot, spec) in loadout.iter().enumerate() {
        obs[slot * SemanticType::ALL.len() + spec.semantic_type.index()] = 1.0;
        if spec.cooldown > 0 {
            obs[36 + slot] = state.cooldowns()[slot] as f64 / spec.cooldown as f64;
        }
    }
    obs[42] = state.sun() as f64 / 1000.0;
    let LaneMetrics { count, mean_hp, closest_norm, past_mid, planted } = state.lane_metrics();
    for lane in 0..5 {
        obs[43 + lane] = mean_hp[lane] / 1000.0;
        obs[48 + lane] = closest_norm[lane];
        obs[53 + lane] = past_mid[lane] as f64;
        obs[58 + lane] = count[lane] as f64;
        for t in 0..5 {
            obs[63 + lane * 5 + t] = planted[lane][t] as f64;
        }
    }
    obs
}

/// Computes the action mask for a state: each strategy's plan emptiness,
/// plus an always-true NoOp entry.
pub fn compute_mask(state: &GameState) -> ActionMask {
    let mut mask = [false; ACTION_COUNT];
    for kind in StrategyKind::ALL {
        mask[kind.index()] = plan(kind, state).is_some();
    }
    mask[NOOP_ACTION] = true;
    mask
}

/// One episode of the decision-point environment.
#[derive(Debug, Clone)]
pub struct Env {
    state: GameState,
    config: EnvConfig,
    terminal: bool,
    timed_out: bool,
    kills_accum: u32,
    advances_accum: u32,
}

impl Env {
    /// Starts an episode on `level` scaled to `difficulty` and returns the
    /// first decision point.
    ///
    /// The initial step carries the rewards of any fast-forwarded opening
    /// windows (none on levels where a placement is affordable at tick 0).
    /// Errors only when `difficulty` is out of range.
    pub fn reset(
        level: &LevelDef,
        difficulty: u32,
        seed: u64,
        config: EnvConfig,
    ) -> Result<(Env, DecisionStep), LevelError> {
        assert!(config.decision_interval > 0, "decision interval must be positive");
        let scaled = level.apply_difficulty(difficulty)?;
        let mut env = Env {
            state: GameState::new(scaled, seed),
            config,
            terminal: false,
            timed_out: false,
            kills_accum: 0,
            advances_accum: 0,
        };
        let mut reward = 0.0;
        env.fast_forward(&mut reward);
        let step = env.snapshot(reward);
        Ok((env, step))
    }

    /// Applies one action, simulates the window, fast-forwards through
    /// choiceless windows, and returns the next decision point.
    pub fn step(&mut self, action: usize) -> Result<DecisionStep, EnvError> {
        if self.terminal {
            return Err(EnvError::Terminal);
        }
        if action >= ACTION_COUNT {
            return Err(EnvError::InvalidAction(action));
        }
        if action != NOOP_ACTION {
            let kind = StrategyKind::ALL[action];
            if plan(kind, &self.state).is_none() {
                return Err(EnvError::MaskedAction(action));
            }
            strategy_execute(kind, &mut self.state);
        }
        let mut reward = 0.0;
        self.run_window(&mut reward);
        self.fast_forward(&mut reward);
        Ok(self.snapshot(reward))
    }

    /// The wrapped simulation state.
    pub fn state(&self) -> &GameState {
        &self.state
    }

    /// The active configuration.
    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// True once the episode ended (win, loss, or tick budget).
    pub fn terminal(&self) -> bool {
        self.terminal
    }

    /// True when the episode ended by exhausting the level's tick budget.
    /// The simulator outcome stays `Ongoing` in that case; the environment
    /// scores it as a loss.
    pub fn timed_out(&self) -> bool {
        self.timed_out
    }

    /// Total kills and enemy cell-advances over the episode so far.
    pub fn totals(&self) -> (u32, u32) {
        (self.kills_accum, self.advances_accum)
    }

    /// Simulates one decision window and folds its reward into `reward`.
    fn run_window(&mut self, reward: &mut f64) {
        for _ in 0..self.config.decision_interval {
            if self.state.outcome() != Outcome::Ongoing {
                break;
            }
            if self.state.tick_count() >= self.state.level().max_ticks {
                self.timed_out = true;
                break;
            }
            self.state.tick().expect("outcome checked above");
        }
        let (kills, advances) = self.state.take_decision_counters();
        self.kills_accum += kills;
        self.advances_accum += advances;
        *reward += self.config.kill_reward * kills as f64
            - self.config.advance_penalty * advances as f64;
        match self.state.outcome() {
            Outcome::Won => {
                *reward += self.config.win_reward;
                self.terminal = true;
            }
            Outcome::Lost => {
                *reward -= self.config.loss_penalty;
                self.terminal = true;
            }
            Outcome::Ongoing => {
                if self.timed_out {
                    *reward -= self.config.loss_penalty;
                    self.terminal = true;
                }
            }
        }
    }

    /// Runs windows while NoOp is the only legal action.
    fn fast_forward(&mut self, reward: &mut f64) {
        while !self.terminal {
            let legal = compute_mask(&self.state).iter().filter(|&&m| m).count();
            if legal >= 2 {
                break;
            }
            self.run_window(reward);
        }
    }

    fn snapshot(&self, reward: f64) -> DecisionStep {
        DecisionStep {
            observation: encode_observation(&self.state),
            mask: compute_mask(&self.state),
            reward,
            terminal: self.terminal,
        }
    }

    /// Test-only: mutable access to the wrapped state for crafted setups.
    #[cfg(test)]
    pub(crate) fn state_mut(&mut self) -> &mut GameState {
        &mut self.state
    }
}
