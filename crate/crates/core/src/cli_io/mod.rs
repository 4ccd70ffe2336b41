//! File formats, the command line and the benchmark harness.

pub mod bench;
pub mod cli;
pub mod files;
pub mod selftest;

pub use bench::{run_bench, write_bench_csv, BenchConfig, BenchRow};
pub use cli::{run, Cli};
pub use files::{DictKind, DictSpec, InstanceFile, MatrixFile, SolutionEntry, SolutionFile};
