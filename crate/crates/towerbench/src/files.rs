//! Checkpoint and level files on disk.

use std::path::Path;

use anyhow::{Context, Result};
use towerbench_core::ppo::{decode_checkpoint, encode_checkpoint, Checkpoint, Mlp, TrainConfig};
use towerbench_core::{Catalog, LevelDef};

/// Writes a checkpoint file.
pub fn save_checkpoint(
    path: &Path,
    actor: &Mlp,
    critic: &Mlp,
    seed: u64,
    config: &TrainConfig,
) -> Result<()> {
    let bytes = encode_checkpoint(actor, critic, seed, config);
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Reads and validates a checkpoint file.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode_checkpoint(&bytes).with_context(|| format!("decoding {}", path.display()))
}

/// Parses a level document file against the builtin catalog.
pub fn load_level(path: &Path) -> Result<LevelDef> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let catalog = Catalog::builtin();
    LevelDef::parse(&text, &catalog).with_context(|| format!("parsing {}", path.display()))
}
