use proptest::prelude::*;

use prosparse::bases::Dictionary;
use prosparse::cli_io::bench::recovered;
use prosparse::fixtures::{make_random_planted, Placement};
use prosparse::gen_prosparse::{gen_prosparse_solve, GenSolveConfig};
use prosparse::numerics::{dft, inf_norm, C64};
use prosparse::prosparse::{count_clean_windows, prosparse_solve, Pass, SolutionSet};
use prosparse::{SparseVec, Tolerances};

fn synth(n: usize, xp: &SparseVec, xq: &SparseVec) -> Vec<C64> {
    let mut y = dft(&xp.to_dense(n), true).unwrap();
    for (i, v) in xq.iter() {
        y[i] += v;
    }
    y
}

fn assert_valid(set: &SolutionSet, y: &[C64]) {
    let n = y.len();
    let limit = 1e-8 * inf_norm(y);
    let mut prev = None;
    for s in set.iter() {
        // Independent resynthesis through the FFT.
        let r = synth(n, &s.segment, &s.local);
        let err = r
            .iter()
            .zip(y)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(err <= limit, "{:?}: {err:e}", s.discovered_at);
        if s.discovered_at.pass != Pass::Seed {
            assert!(2 * s.kp() * s.kq() < n, "({}, {}) admitted", s.kp(), s.kq());
        }
        let key = (
            s.total(),
            s.kp(),
            s.segment.indices.clone(),
            s.local.indices.clone(),
        );
        if let Some(p) = prev {
            assert!(p < key, "order {p:?} then {key:?}");
        }
        prev = Some(key);
    }
}

#[test]
fn dual_pass_finds_fourier_heavy_solutions() {
    let dict = Dictionary::fourier_canonical(64).unwrap();
    let p = make_random_planted(&dict, 6, 2, 5, Placement::Uniform).unwrap();
    let set = prosparse_solve(&p.y, &Tolerances::default()).unwrap();
    let s = set.find(&p.segment.indices, &p.local.indices).unwrap();
    assert_eq!(s.discovered_at.pass, Pass::Dual);
    assert!(recovered(&set, &p.segment, &p.local));
    assert_valid(&set, &p.y);
}

#[test]
fn seeds_are_always_present() {
    let dict = Dictionary::fourier_canonical(32).unwrap();
    let p = make_random_planted(&dict, 2, 3, 1, Placement::Uniform).unwrap();
    let set = prosparse_solve(&p.y, &Tolerances::default()).unwrap();
    let seeds: Vec<_> = set
        .iter()
        .filter(|s| s.discovered_at.pass == Pass::Seed)
        .collect();
    assert_eq!(seeds.len(), 2);
    assert!(seeds.iter().any(|s| s.kp() == 0 && s.kq() == 32));
    assert!(seeds.iter().any(|s| s.kq() == 0 && s.kp() == 32));
}

#[test]
fn picket_fence_at_the_boundary_has_no_clean_window() {
    // K_p K_q = N / 2 with spikes every 2 K_p samples: every window of
    // 2 K_p samples is hit, so the planted pair is out of reach.
    let n = 32;
    let dict = Dictionary::fourier_canonical(n).unwrap();
    for seed in 0..10 {
        let p = make_random_planted(&dict, 4, 4, seed, Placement::PicketFence).unwrap();
        assert_eq!(count_clean_windows(&p.local.indices, 4, n), 0);
        let set = prosparse_solve(&p.y, &Tolerances::default()).unwrap();
        assert!(set.find(&p.segment.indices, &p.local.indices).is_none());
        assert_valid(&set, &p.y);
    }
}

#[test]
fn generalized_search_reduces_to_the_fourier_search() {
    let dict = Dictionary::fourier_canonical(32).unwrap();
    let tol = Tolerances::default();
    let direct = |set: &SolutionSet| -> Vec<(Vec<usize>, Vec<usize>, SparseVec, SparseVec)> {
        set.iter()
            .filter(|s| s.discovered_at.pass != Pass::Seed && s.kp() <= s.kq())
            .map(|s| {
                (
                    s.segment.indices.clone(),
                    s.local.indices.clone(),
                    s.segment.clone(),
                    s.local.clone(),
                )
            })
            .collect()
    };
    for seed in 0..50u64 {
        let kp = 1 + (seed % 3) as usize;
        let kq = 1 + (seed % 5) as usize;
        let p = make_random_planted(&dict, kp, kq, seed, Placement::Uniform).unwrap();
        let a = direct(&prosparse_solve(&p.y, &tol).unwrap());
        let b = direct(&gen_prosparse_solve(&p.y, &dict, &GenSolveConfig::default()).unwrap());
        assert_eq!(a.len(), b.len(), "seed {seed}");
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((&x.0, &x.1), (&y.0, &y.1), "seed {seed}");
            let scale = x.2.max_abs().max(x.3.max_abs());
            assert!(x.2.max_abs_diff(&y.2).max(x.3.max_abs_diff(&y.3)) <= 1e-10 * scale);
        }
    }
}

#[test]
fn solution_sets_do_not_depend_on_the_thread_count() {
    let dict = Dictionary::fourier_canonical(64).unwrap();
    let p = make_random_planted(&dict, 3, 4, 21, Placement::Uniform).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| prosparse_solve(&p.y, &Tolerances::default()).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn rejects_short_and_non_finite_signals() {
    let tol = Tolerances::default();
    assert!(prosparse_solve(&[C64::new(1.0, 0.0)], &tol).is_err());
    let mut y = vec![C64::new(0.0, 0.0); 8];
    y[3] = C64::new(f64::NAN, 0.0);
    assert!(prosparse_solve(&y, &tol).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn planted_inside_the_bound_is_recovered(
        n in prop::sample::select(vec![16usize, 24, 32, 48, 64]),
        kp in 1usize..8,
        kq in 1usize..16,
        seed in any::<u64>(),
        picket in any::<bool>(),
    ) {
        prop_assume!(2 * kp * kq < n);
        let dict = Dictionary::fourier_canonical(n).unwrap();
        let placement = if picket { Placement::PicketFence } else { Placement::Uniform };
        let p = make_random_planted(&dict, kp, kq, seed, placement).unwrap();
        let set = prosparse_solve(&p.y, &Tolerances::default()).unwrap();
        prop_assert!(recovered(&set, &p.segment, &p.local));
        assert_valid(&set, &p.y);
    }

    #[test]
    fn arbitrary_signals_yield_valid_sets(
        n in 4usize..40,
        raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 40),
    ) {
        let y: Vec<C64> = raw[..n].iter().map(|&(a, b)| C64::new(a, b)).collect();
        let set = prosparse_solve(&y, &Tolerances::default()).unwrap();
        assert_valid(&set, &y);
    }
}
