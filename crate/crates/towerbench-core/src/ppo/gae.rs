//! Generalized advantage estimation over one finished episode.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Advantages and value targets for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct GaeResult {
    /// Per-step advantage estimates.
    pub advantages: Vec<f64>,
    /// Per-step value targets (`advantage + value`).
    pub returns: Vec<f64>,
}

/// Rewards and values disagree in length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaeLengthMismatch {
    /// Number of rewards given.
    pub rewards: usize,
    /// Number of values given.
    pub values: usize,
}

impl fmt::Display for GaeLengthMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} rewards but {} values", self.rewards, self.values)
    }
}

impl core::error::Error for GaeLengthMismatch {}

/// Computes GAE(`gamma`, `lam`) for a complete episode.
///
/// `values[t]` is the critic's estimate for the state the `t`-th action was
/// taken in; the value after the final transition is 0 because the episode
/// terminated. The recursion runs backward:
///
/// ```text
/// delta_t = r_t + gamma * v_{t+1} - v_t        (v_T = 0)
/// adv_t   = delta_t + gamma * lam * adv_{t+1}  (adv_T = 0)
/// ```
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    gamma: f64,
    lam: f64,
) -> Result<GaeResult, GaeLengthMismatch> {
    if rewards.len() != values.len() {
        return Err(GaeLengthMismatch { rewards: rewards.len(), values: values.len() });
    }
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut next_value = 0.0;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let delta = rewards[t] + gamma * next_value - values[t];
        next_adv = delta + gamma * lam * next_adv;
        advantages[t] = next_adv;
        next_value = values[t];
    }
    let returns = advantages.iter().zip(values.iter()).map(|(a, v)| a + v).collect();
    Ok(GaeResult { advantages, returns })
}
