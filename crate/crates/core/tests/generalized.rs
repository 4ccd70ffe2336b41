use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

use prosparse::bases::{trial_rng, Dictionary, Preconditioner};
use prosparse::cli_io::bench::recovered;
use prosparse::fixtures::{make_random_planted, Placement};
use prosparse::gen_prosparse::{
    count_clean_intervals_general, gen_prosparse_solve, generalized_admissible,
    preconditioned_solve, GenSolveConfig,
};
use prosparse::numerics::{inf_norm, mat_vec, C64};
use prosparse::prosparse::{count_clean_windows, Pass, SolutionSet};

fn admitted(dict: &Dictionary, kp: usize, kq: usize) -> bool {
    let n = dict.n();
    let cap = dict.psi().segment().unwrap();
    let l = dict.phi().local_length().unwrap();
    generalized_admissible(n, cap.sampling_factor(n, kp), l, kq, cap.tau)
}

/// Every returned solution reproduces `y` through the dense dictionary and
/// window solutions pass the admission test.
fn assert_valid(set: &SolutionSet, dict: &Dictionary, y: &[C64]) {
    let n = dict.n();
    let d = Dictionary::new(dict.psi().clone(), dict.phi().clone())
        .unwrap()
        .to_matrix();
    let limit = 1e-8 * inf_norm(y);
    for s in set.iter() {
        let mut x = s.segment.to_dense(n);
        x.extend(s.local.to_dense(n));
        let r = mat_vec(&d, &x);
        let err = r
            .iter()
            .zip(y)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(err <= limit, "{:?}: {err:e}", s.discovered_at);
        if s.discovered_at.pass != Pass::Seed {
            assert!(admitted(dict, s.kp(), s.kq()), "({}, {})", s.kp(), s.kq());
        }
    }
}

fn sweep(dict: &Dictionary, cells: &[(usize, usize)], seeds: std::ops::Range<u64>) {
    for seed in seeds {
        let (kp, kq) = cells[seed as usize % cells.len()];
        let p = make_random_planted(dict, kp, kq, seed, Placement::Uniform).unwrap();
        let set = gen_prosparse_solve(&p.y, dict, &GenSolveConfig::default()).unwrap();
        assert!(
            recovered(&set, &p.segment, &p.local),
            "seed {seed} ({kp}, {kq})"
        );
        assert_valid(&set, dict, &p.y);
    }
}

#[test]
fn local_fourier_blocks() {
    let dict = Dictionary::fourier_local_fourier(32, 4).unwrap();
    let cells: Vec<_> = [(1, 1), (1, 3), (2, 2), (3, 1), (1, 4)]
        .into_iter()
        .filter(|&(p, q)| admitted(&dict, p, q))
        .collect();
    assert_eq!(cells.len(), 5);
    sweep(&dict, &cells, 0..20);
}

#[test]
fn dct_and_spikes() {
    let dict = Dictionary::dct_canonical(48).unwrap();
    let cells: Vec<_> = [(1, 1), (1, 4), (2, 2), (3, 2), (2, 3)]
        .into_iter()
        .filter(|&(p, q)| admitted(&dict, p, q))
        .collect();
    assert_eq!(cells.len(), 5);
    sweep(&dict, &cells, 0..20);
}

#[test]
fn scaling_preconditioner_changes_nothing() {
    let dict = Dictionary::fourier_local_fourier(32, 4).unwrap();
    let p = make_random_planted(&dict, 2, 2, 7, Placement::Uniform).unwrap();
    let plain = gen_prosparse_solve(&p.y, &dict, &GenSolveConfig::default()).unwrap();
    let two = DMatrix::<C64>::identity(32, 32) * C64::new(2.0, 0.0);
    let y2: Vec<C64> = p.y.iter().map(|v| v * 2.0).collect();
    let a = Preconditioner::new(two).unwrap();
    let scaled = preconditioned_solve(&a, &y2, &dict, &GenSolveConfig::default()).unwrap();
    assert_eq!(plain, scaled);
}

#[test]
fn random_preconditioner_recovers_the_planted_pair() {
    let n = 32;
    let dict = Dictionary::dct_canonical(n).unwrap();
    let mut rng = trial_rng(99, 0);
    // Diagonally dominant, so well conditioned.
    let a = DMatrix::<C64>::from_fn(n, n, |i, j| {
        let v = C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)) / n as f64;
        if i == j {
            v + C64::new(1.0, 0.0)
        } else {
            v
        }
    });
    let pre = Preconditioner::new(a.clone()).unwrap();
    let with_a = dict.clone().with_preconditioner(pre.clone()).unwrap();
    for seed in 0..5 {
        let p = make_random_planted(&dict, 2, 2, seed, Placement::Uniform).unwrap();
        let ay = mat_vec(&a, &p.y);
        let set = gen_prosparse_solve(&ay, &with_a, &GenSolveConfig::default()).unwrap();
        assert!(recovered(&set, &p.segment, &p.local), "seed {seed}");
        let again = preconditioned_solve(&pre, &ay, &dict, &GenSolveConfig::default()).unwrap();
        assert_eq!(set, again);
    }
}

#[test]
fn solutions_beyond_the_admission_test_are_not_reported() {
    let dict = Dictionary::dct_canonical(32).unwrap();
    let p = make_random_planted(&dict, 3, 6, 4, Placement::Uniform).unwrap();
    assert!(!admitted(&dict, 3, 6));
    let set = gen_prosparse_solve(&p.y, &dict, &GenSolveConfig::default()).unwrap();
    assert!(set.find(&p.segment.indices, &p.local.indices).is_none());
    assert_valid(&set, &dict, &p.y);
}

#[test]
fn kp_limit_caps_the_sweep() {
    let dict = Dictionary::dct_canonical(64).unwrap();
    let p = make_random_planted(&dict, 3, 2, 8, Placement::Uniform).unwrap();
    let cfg = GenSolveConfig {
        kp_limit: Some(2),
        ..GenSolveConfig::default()
    };
    let set = gen_prosparse_solve(&p.y, &dict, &cfg).unwrap();
    assert!(set
        .iter()
        .all(|s| s.discovered_at.pass == Pass::Seed || s.discovered_at.kp_pass <= 2));
}

#[test]
fn rejects_mismatched_signal_length() {
    let dict = Dictionary::dct_canonical(16).unwrap();
    let y = vec![C64::new(1.0, 0.0); 15];
    assert!(gen_prosparse_solve(&y, &dict, &GenSolveConfig::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn periodic_interval_count_matches_the_spike_count(
        n in 2usize..40,
        spikes in prop::collection::btree_set(0usize..40, 0..6),
        kp in 1usize..8,
    ) {
        let spikes: Vec<usize> = spikes.into_iter().filter(|&s| s < n).collect();
        prop_assume!(2 * kp <= n);
        let singletons: Vec<Vec<usize>> = spikes.iter().map(|&s| vec![s]).collect();
        prop_assert_eq!(
            count_clean_intervals_general(&singletons, 2 * kp, 0, n),
            count_clean_windows(&spikes, kp, n)
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dct_planted_inside_the_bound(kp in 1usize..5, kq in 1usize..5, seed in any::<u64>()) {
        let dict = Dictionary::dct_canonical(64).unwrap();
        prop_assume!(admitted(&dict, kp, kq));
        let p = make_random_planted(&dict, kp, kq, seed, Placement::Uniform).unwrap();
        let set = gen_prosparse_solve(&p.y, &dict, &GenSolveConfig::default()).unwrap();
        prop_assert!(recovered(&set, &p.segment, &p.local));
        assert_valid(&set, &dict, &p.y);
    }
}
