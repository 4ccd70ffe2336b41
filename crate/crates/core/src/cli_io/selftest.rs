//! Fast invariant checks behind `prosparse selftest`.

use rand::Rng;

use super::bench::recovered;
use crate::bases::{trial_rng, Dictionary};
use crate::bounds::BoundReport;
use crate::config::Tolerances;
use crate::fixtures::{
    make_bp_counterexample, make_random_planted, make_two_solution_instance, split_halves,
    Placement,
};
use crate::gen_prosparse::{gen_prosparse_solve, generalized_admissible, GenSolveConfig};
use crate::numerics::C64;
use crate::prony::{prony_fit, Reject};
use crate::prosparse::{clean_window_bound, count_clean_windows, prosparse_solve};

type Check = Result<(), String>;

fn ensure(cond: bool, why: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(why())
    }
}

fn counterexample(tol: &Tolerances) -> Check {
    let c = make_bp_counterexample(4).map_err(|e| e.to_string())?;
    let (xp, xq) = c.sparse_solution();
    ensure(xp.nnz() == 8 && xq.nnz() == 3, || {
        format!("sparsity ({}, {})", xp.nnz(), xq.nnz())
    })?;
    let set = prosparse_solve(&c.y, tol).map_err(|e| e.to_string())?;
    ensure(recovered(&set, &xp, &xq), || {
        "planted (8, 3) solution not found".into()
    })
}

fn two_solutions(tol: &Tolerances) -> Check {
    for seed in 0..3 {
        let t = make_two_solution_instance(4, seed).map_err(|e| e.to_string())?;
        let set = prosparse_solve(&t.y, tol).map_err(|e| e.to_string())?;
        for x in [&t.x0, &t.x1] {
            let (p, q) = split_halves(x);
            ensure(recovered(&set, &p, &q), || {
                format!("split seed {seed}: a solution is missing")
            })?;
        }
    }
    Ok(())
}

fn bounds_144() -> Check {
    let report = BoundReport::evaluate(
        144,
        "1/12".parse().map_err(|e: crate::Error| e.to_string())?,
        24,
        None,
    );
    let got = (
        report.max_total(|r| r.p0_unique.holds),
        report.max_total(|r| r.bp_simple.holds),
        report.max_total(|r| r.prosparse_total.holds),
    );
    ensure(got == (Some(11), Some(10), Some(16)), || {
        format!("thresholds {got:?}")
    })
}

fn planted(dict: &Dictionary, trials: u64, tol: &Tolerances, fourier_canonical: bool) -> Check {
    let n = dict.n();
    let cap = *dict.psi().segment().expect("segment basis");
    let l = dict.phi().local_length().expect("local basis");
    let mut rng = trial_rng(0x5e1f, n as u64);
    let mut done = 0;
    while done < trials {
        let kp = rng.random_range(1..=n / 4);
        let kq = rng.random_range(1..=n / 4);
        if !generalized_admissible(n, cap.sampling_factor(n, kp), l, kq, cap.tau) {
            continue;
        }
        let p = make_random_planted(dict, kp, kq, done, Placement::Uniform)
            .map_err(|e| e.to_string())?;
        let set = if fourier_canonical {
            prosparse_solve(&p.y, tol)
        } else {
            gen_prosparse_solve(
                &p.y,
                dict,
                &GenSolveConfig {
                    tol: *tol,
                    kp_limit: None,
                },
            )
        }
        .map_err(|e| e.to_string())?;
        ensure(recovered(&set, &p.segment, &p.local), || {
            format!("seed {done}, ({kp}, {kq}) not recovered")
        })?;
        done += 1;
    }
    Ok(())
}

fn clean_windows() -> Check {
    let n = 10;
    for mask in 0u32..1 << n {
        if mask.count_ones() > 3 {
            continue;
        }
        let spikes: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        for kp in 1..=n / 2 {
            let count = count_clean_windows(&spikes, kp, n) as i64;
            let bound = clean_window_bound(n, kp, spikes.len());
            ensure(count >= bound, || {
                format!("spikes {spikes:?}, K_p = {kp}: {count} < {bound}")
            })?;
        }
    }
    Ok(())
}

fn order_overshoot(tol: &Tolerances) -> Check {
    let n = 32;
    let y: Vec<C64> = (0..n)
        .map(|t| {
            let a = 2.0 * std::f64::consts::PI * t as f64 / n as f64;
            C64::from_polar(1.0, 3.0 * a) + C64::from_polar(0.5, 11.0 * a)
        })
        .collect();
    let r = prony_fit(&y[..6], 3, n, 0, true, tol).map_err(|e| e.to_string())?;
    ensure(r == Err(Reject::Degenerate { rank: 2 }), || {
        format!("got {r:?}")
    })
}

fn thread_independence(tol: &Tolerances) -> Check {
    let dict = Dictionary::fourier_canonical(64).map_err(|e| e.to_string())?;
    let p = make_random_planted(&dict, 3, 5, 11, Placement::Uniform).map_err(|e| e.to_string())?;
    let mut sets = Vec::new();
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        sets.push(
            pool.install(|| prosparse_solve(&p.y, tol))
                .map_err(|e| e.to_string())?,
        );
    }
    ensure(sets[0] == sets[1], || {
        "solution sets differ across thread counts".into()
    })
}

/// Named checks with their outcomes, in a fixed order.
pub fn run_selftest(tol: &Tolerances) -> Vec<(&'static str, Check)> {
    let dict = |d: crate::Result<Dictionary>| d.map_err(|e| e.to_string());
    vec![
        ("counterexample-bp", counterexample(tol)),
        ("two-solutions", two_solutions(tol)),
        ("bounds-144", bounds_144()),
        (
            "planted-fourier-canonical",
            dict(Dictionary::fourier_canonical(32)).and_then(|d| planted(&d, 40, tol, true)),
        ),
        (
            "planted-fourier-localfourier",
            dict(Dictionary::fourier_local_fourier(64, 8)).and_then(|d| planted(&d, 8, tol, false)),
        ),
        (
            "planted-dct-canonical",
            dict(Dictionary::dct_canonical(64)).and_then(|d| planted(&d, 8, tol, false)),
        ),
        ("clean-window-bound", clean_windows()),
        ("prony-order-overshoot", order_overshoot(tol)),
        ("thread-independence", thread_independence(tol)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass_with_defaults() {
        for (name, r) in run_selftest(&Tolerances::default()) {
            assert!(r.is_ok(), "{name}: {r:?}");
        }
    }
}
