//! Recovery rate over (K_p, K_q) cells around the K_p K_q < N/2 frontier.

use prosparse::cli_io::bench::{run_bench, write_bench_csv, BenchConfig};
use prosparse::cli_io::files::{DictKind, DictSpec};
use prosparse::fixtures::Placement;
use prosparse::Tolerances;

fn main() -> prosparse::Result<()> {
    let cfg = BenchConfig {
        sizes: vec![32],
        dicts: vec![DictSpec::new(DictKind::FourierCanonical)],
        trials: 10,
        seed: 1,
        placement: Placement::PicketFence,
        kp_max: Some(4),
        kq_max: Some(8),
        tol: Tolerances::default(),
    };
    let rows = run_bench(&cfg, true)?;
    write_bench_csv(&rows, &cfg, true, std::io::stdout().lock())?;
    Ok(())
}
