//! File IO, batch evaluation, and reporting around `towerbench-core`.
//!
//! The core crate is `no_std` and owns every simulation and learning rule;
//! this crate adds the parts that need an operating system: checkpoint
//! files, CSV reports, parallel evaluation (deterministic regardless of
//! thread count), and the command-line interface.

pub mod eval;
pub mod files;
pub mod report;
pub mod trace;

/// Builds the global rayon pool from the `TOWERBENCH_THREADS` environment
/// variable (unset or 0 keeps rayon's default). Call once at startup;
/// later calls are ignored, as are calls after rayon self-initialized.
pub fn init_thread_pool() {
    if let Ok(v) = std::env::var("TOWERBENCH_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
