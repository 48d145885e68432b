//! Binary checkpoint format for trained policy pairs.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic    4 bytes  "TBC1"
//! version  u16      currently 1
//! hash     u64      FNV-1a of the training configuration
//! seed     u64      master training seed
//! actor    network  (see below)
//! critic   network
//!
//! network: u8 layer-size count, then each size as u32, then for every
//! layer its row-major weights followed by its biases, each value f64.
//! ```
//!
//! Decoding rejects anything that is not an 88-input actor with 5 outputs
//! paired with an 88-input critic with 1 output.

use alloc::vec::Vec;
use core::fmt;

use super::nn::Mlp;
use super::TrainConfig;
use crate::env::{ACTION_COUNT, OBS_WIDTH};

const MAGIC: &[u8; 4] = b"TBC1";
const VERSION: u16 = 1;

/// A decoded checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Policy network, `OBS_WIDTH` in, `ACTION_COUNT` out.
    pub actor: Mlp,
    /// Value network, `OBS_WIDTH` in, 1 out.
    pub critic: Mlp,
    /// Master seed the pair was trained with.
    pub seed: u64,
    /// FNV-1a hash of the training configuration.
    pub config_hash: u64,
}

/// Why a checkpoint failed to decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointError {
    /// The magic bytes are wrong.
    BadMagic,
    /// The format version is unsupported.
    BadVersion(u16),
    /// The buffer ended early or carries trailing bytes.
    BadLength,
    /// Network shapes do not match the environment contract.
    BadShape,
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointError::BadMagic => write!(f, "not a checkpoint (bad magic)"),
            CheckpointError::BadVersion(v) => write!(f, "unsupported checkpoint version {v}"),
            CheckpointError::BadLength => write!(f, "checkpoint truncated or oversized"),
            CheckpointError::BadShape => write!(f, "network shapes do not fit the environment"),
        }
    }
}

impl core::error::Error for CheckpointError {}

/// FNV-1a over the canonical byte serialization of the configuration.
/// Floats hash by their bit patterns, so any change to any field changes
/// the hash.
pub fn config_hash(config: &TrainConfig) -> u64 {
    let mut bytes = Vec::new();
    for f in [
        config.gamma,
        config.lam,
        config.clip,
        config.learning_rate,
        config.entropy_coef,
        config.value_coef,
        config.env.kill_reward,
        config.env.advance_penalty,
        config.env.win_reward,
        config.env.loss_penalty,
    ] {
        bytes.extend_from_slice(&f.to_bits().to_le_bytes());
    }
    for n in [
        config.epochs as u64,
        config.minibatch_size as u64,
        config.rollout_size as u64,
        config.total_episodes as u64,
        config.hidden_size as u64,
        config.curve_interval as u64,
        config.env.decision_interval as u64,
    ] {
        bytes.extend_from_slice(&n.to_le_bytes());
    }
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn put_net(out: &mut Vec<u8>, net: &Mlp) {
    out.push(net.sizes.len() as u8);
    for &s in &net.sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    for l in 0..net.layer_count() {
        for &w in &net.weights[l] {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for &b in &net.biases[l] {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
}

/// Serializes a trained actor-critic pair.
pub fn encode_checkpoint(actor: &Mlp, critic: &Mlp, seed: u64, config: &TrainConfig) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&config_hash(config).to_le_bytes());
    out.extend_from_slice(&seed.to_le_bytes());
    put_net(&mut out, actor);
    put_net(&mut out, critic);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.at.checked_add(n).ok_or(CheckpointError::BadLength)?;
        if end > self.bytes.len() {
            return Err(CheckpointError::BadLength);
        }
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn net(&mut self) -> Result<Mlp, CheckpointError> {
        let n_sizes = self.u8()? as usize;
        if n_sizes < 2 {
            return Err(CheckpointError::BadShape);
        }
        let mut sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            let s = self.u32()? as usize;
            if s == 0 || s > 1 << 20 {
                return Err(CheckpointError::BadShape);
            }
            sizes.push(s);
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..n_sizes - 1 {
            let mut w = Vec::with_capacity(sizes[l] * sizes[l + 1]);
            for _ in 0..sizes[l] * sizes[l + 1] {
                w.push(self.f64()?);
            }
            let mut b = Vec::with_capacity(sizes[l + 1]);
            for _ in 0..sizes[l + 1] {
                b.push(self.f64()?);
            }
            weights.push(w);
            biases.push(b);
        }
        Ok(Mlp { sizes, weights, biases })
    }
}

/// Parses a checkpoint and validates the network shapes.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let config_hash = r.u64()?;
    let seed = r.u64()?;
    let actor = r.net()?;
    let critic = r.net()?;
    if r.at != bytes.len() {
        return Err(CheckpointError::BadLength);
    }
    if actor.sizes.first() != Some(&OBS_WIDTH) || actor.sizes.last() != Some(&ACTION_COUNT) {
        return Err(CheckpointError::BadShape);
    }
    if critic.sizes.first() != Some(&OBS_WIDTH) || critic.sizes.last() != Some(&1) {
        return Err(CheckpointError::BadShape);
    }
    Ok(Checkpoint { actor, critic, seed, config_hash })
}
