//! Experiment orchestration: configuration, signal registry, multi-seed
//! evaluation, result store, reports and synthetic datasets.
//!
//! Environment: `SIGBENCH_THREADS` caps the worker pool; `SIGBENCH_REPRODUCIBLE`
//! (default `1`) is recorded in every run record. All randomness is keyed to
//! cell identity and seed, so results do not depend on the worker count.

pub mod config;
pub mod registry;
pub mod report;
pub mod run;
pub mod store;
pub mod synth;

pub use config::{parse_seeds, ExperimentConfig, SignalConfig};
pub use registry::{compute_signal, Computed, SignalCache};
pub use report::{write_report, ReportKind};
pub use run::{export_signals, load_dataset, run_experiment, run_hpo, run_robustness, Dataset, RunSummary};
pub use store::{CellKey, ResultStore, RunRecord, Status};
pub use synth::{generate, self_check, SyntheticSpec};

/// Whether deterministic mode is on (`SIGBENCH_REPRODUCIBLE`, default on).
pub fn reproducible() -> bool {
    !matches!(std::env::var("SIGBENCH_REPRODUCIBLE").as_deref(), Ok("0") | Ok("false") | Ok("off"))
}

/// Worker cap from `SIGBENCH_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("SIGBENCH_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs `f` on a pool capped by `SIGBENCH_THREADS`, or the global pool.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match thread_cap().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}
