//! Planted-recovery sweep over `(N, K_p, K_q)` cells.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::files::{gaussian_k_max, BuiltDict, DictKind, DictSpec};
use crate::bases::trial_rng;
use crate::config::Tolerances;
use crate::error::Result;
use crate::fixtures::{make_random_planted, Placement};
use crate::gen_prosparse::{clean_interval_bound, gen_prosparse_solve, GenSolveConfig};
use crate::prosparse::{prosparse_solve, SolutionSet};
use crate::sparse::SparseVec;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub dicts: Vec<DictSpec>,
    pub trials: usize,
    pub seed: u64,
    pub placement: Placement,
    /// Explicit `K_p` / `K_q` ranges; by default every cell whose bound
    /// margin is at least `-N` is visited.
    pub kp_max: Option<usize>,
    pub kq_max: Option<usize>,
    pub tol: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub dict: &'static str,
    pub n: usize,
    pub kp: usize,
    pub kq: usize,
    pub trials: usize,
    pub inside_bound: bool,
    pub exact_recovery_rate: f64,
    pub median_ms: Option<f64>,
}

/// `N + tau L - (S(K_p) + L - 1)(K_q + tau)`; positive inside the bound.
fn bound_margin(built: &BuiltDict, kp: usize, kq: usize) -> i64 {
    let d = &built.dict;
    let n = d.n();
    match (d.psi().segment(), d.phi().local_length()) {
        (Some(cap), Some(l)) => clean_interval_bound(n, cap.sampling_factor(n, kp), l, kq, cap.tau),
        _ => i64::MIN,
    }
}

pub fn solve_with(
    built: &BuiltDict,
    y: &[crate::numerics::C64],
    tol: &Tolerances,
) -> Result<SolutionSet> {
    match built.spec.kind {
        DictKind::FourierCanonical => prosparse_solve(y, tol),
        kind => {
            let kp_limit =
                (kind == DictKind::GaussianCanonical).then(|| gaussian_k_max(built.dict.n()));
            gen_prosparse_solve(
                y,
                &built.dict,
                &GenSolveConfig {
                    tol: *tol,
                    kp_limit,
                },
            )
        }
    }
}

/// The planted pair is among the solutions with coefficients within 1e-7
/// relative.
pub fn recovered(set: &SolutionSet, xp: &SparseVec, xq: &SparseVec) -> bool {
    let scale = xp.max_abs().max(xq.max_abs());
    set.find(&xp.indices, &xq.indices)
        .is_some_and(|s| s.segment.max_abs_diff(xp).max(s.local.max_abs_diff(xq)) <= 1e-7 * scale)
}

fn cells(built: &BuiltDict, cfg: &BenchConfig) -> Vec<(usize, usize)> {
    let n = built.dict.n();
    let mut out = Vec::new();
    let kp_top = cfg.kp_max.unwrap_or(n);
    let kq_top = cfg.kq_max.unwrap_or(n);
    for kp in 1..=kp_top.min(n) {
        for kq in 1..=kq_top.min(n - kp.min(n)) {
            let explicit = cfg.kp_max.is_some() && cfg.kq_max.is_some();
            if explicit || bound_margin(built, kp, kq) >= -(n as i64) {
                out.push((kp, kq));
            }
        }
    }
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Runs every cell; trials within a cell run in parallel and are merged in
/// trial order.
pub fn run_bench(cfg: &BenchConfig, timing: bool) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for spec in &cfg.dicts {
        for &n in &cfg.sizes {
            let built = spec.build(n)?;
            for (kp, kq) in cells(&built, cfg) {
                let stream = ((n as u64) << 40) ^ ((kp as u64) << 20) ^ kq as u64;
                let base: u64 = trial_rng(cfg.seed, stream).random();
                let outcomes: Vec<Result<(bool, f64)>> = (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| {
                        let p = make_random_planted(
                            &built.dict,
                            kp,
                            kq,
                            base.wrapping_add(t as u64),
                            cfg.placement,
                        )?;
                        let clock = Instant::now();
                        let set = solve_with(&built, &p.y, &cfg.tol)?;
                        let ms = clock.elapsed().as_secs_f64() * 1e3;
                        Ok((recovered(&set, &p.segment, &p.local), ms))
                    })
                    .collect();
                let mut hits = 0;
                let mut times = Vec::with_capacity(cfg.trials);
                for o in outcomes {
                    let (ok, ms) = o?;
                    hits += ok as usize;
                    times.push(ms);
                }
                rows.push(BenchRow {
                    dict: spec.kind.name(),
                    n,
                    kp,
                    kq,
                    trials: cfg.trials,
                    inside_bound: bound_margin(&built, kp, kq) > 0,
                    exact_recovery_rate: if cfg.trials == 0 {
                        0.0
                    } else {
                        hits as f64 / cfg.trials as f64
                    },
                    median_ms: (timing && !times.is_empty()).then(|| median(times)),
                });
            }
        }
    }
    Ok(rows)
}

/// CSV with a `#`-prefixed provenance header.
pub fn write_bench_csv<W: Write>(
    rows: &[BenchRow],
    cfg: &BenchConfig,
    timing: bool,
    mut out: W,
) -> Result<()> {
    let dicts: Vec<&str> = cfg.dicts.iter().map(|d| d.kind.name()).collect();
    let sizes: Vec<String> = cfg.sizes.iter().map(|n| n.to_string()).collect();
    writeln!(
        out,
        "# generator: prosparse bench {}",
        env!("CARGO_PKG_VERSION")
    )?;
    writeln!(
        out,
        "# seed: {}; trials: {}; sizes: {}; dicts: {}; placement: {}; timing: {}",
        cfg.seed,
        cfg.trials,
        sizes.join(","),
        dicts.join(","),
        serde_json::to_value(cfg.placement)?.as_str().unwrap_or("?"),
        if timing { "on" } else { "off" }
    )?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)
            .map_err(|e| crate::Error::Malformed(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inside_cells_recover_and_rows_are_deterministic() {
        let cfg = BenchConfig {
            sizes: vec![16],
            dicts: vec![DictSpec::new(DictKind::FourierCanonical)],
            trials: 4,
            seed: 3,
            placement: Placement::Uniform,
            kp_max: Some(2),
            kq_max: Some(5),
            tol: Tolerances::default(),
        };
        let rows = run_bench(&cfg, false).unwrap();
        assert_eq!(rows.len(), 10);
        for r in &rows {
            assert_eq!(r.inside_bound, 2 * r.kp * r.kq < 16);
            if r.inside_bound {
                assert_eq!(r.exact_recovery_rate, 1.0, "{r:?}");
            }
        }
        let mut a = Vec::new();
        write_bench_csv(&rows, &cfg, false, &mut a).unwrap();
        let mut b = Vec::new();
        write_bench_csv(&run_bench(&cfg, false).unwrap(), &cfg, false, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text
            .lines()
            .nth(2)
            .unwrap()
            .starts_with("dict,n,kp,kq,trials"));
    }
}
