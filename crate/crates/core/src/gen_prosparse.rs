//! Window search for a dictionary `[Psi, Phi]` with `Psi` segment-recoverable
//! and `Phi` local.
//!
//! A solution with `K_p` segment atoms and `K_q` local atoms is admitted when
//! `(S(K_p) + L - 1)(K_q + tau) < N + tau L`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::bases::{Dictionary, Preconditioner};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::numerics::{self, inf_norm, C64};
use crate::prosparse::{Discovery, Pass, SolutionSet, SparseSolution};
use crate::sparse::SparseVec;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GenSolveConfig {
    pub tol: Tolerances,
    /// Upper end of the `K_p` sweep; `None` sweeps as far as any solution
    /// with a local atom can still be admitted.
    pub kp_limit: Option<usize>,
}

/// `(S + L - 1)(K_q + tau) < N + tau L`.
pub fn generalized_admissible(n: usize, s: usize, l: usize, kq: usize, tau: usize) -> bool {
    (s + l - 1) * (kq + tau) < n + tau * l
}

/// `N + tau L - (S + L - 1)(K + tau)`, the lower bound on
/// [`count_clean_intervals_general`] for `K` atoms of support length `<= L`.
pub fn clean_interval_bound(n: usize, s: usize, l: usize, k: usize, tau: usize) -> i64 {
    (n + tau * l) as i64 - ((s + l - 1) * (k + tau)) as i64
}

/// Window starts whose length-`S` window touches none of the supports:
/// every `l` in `0..N` modulo `N` when `tau = 0`, `0..=N-S` when `tau = 1`.
pub fn count_clean_intervals_general(
    supports: &[Vec<usize>],
    s: usize,
    tau: usize,
    n: usize,
) -> usize {
    let mut hit = vec![false; n];
    for sup in supports {
        for &i in sup {
            hit[i % n] = true;
        }
    }
    if tau == 0 {
        (0..n)
            .filter(|&l| (0..s).all(|i| !hit[(l + i) % n]))
            .count()
    } else if s > n {
        0
    } else {
        (0..=n - s)
            .filter(|&l| hit[l..l + s].iter().all(|h| !h))
            .count()
    }
}

struct Context<'a> {
    dict: &'a Dictionary,
    y: &'a [C64],
    l: usize,
    tau: usize,
    zero: f64,
    accept: f64,
    tol: Tolerances,
}

impl Context<'_> {
    /// Completes `x_p` with `x_q = Phi^{-1}(y - Psi x_p)`.
    fn complete(&self, xp: SparseVec, discovered_at: Discovery) -> Result<Option<SparseSolution>> {
        let yhat = self.dict.psi().synthesize_sparse(&xp)?;
        let r: Vec<C64> = self.y.iter().zip(&yhat).map(|(a, b)| a - b).collect();
        let xq = SparseVec::from_dense(&self.dict.phi().analyze(&r)?, self.zero);
        let (xp, xq) = if discovered_at.pass == Pass::Seed {
            (xp, xq)
        } else {
            self.refit(&xp, &xq)?
        };
        let mut approx = self.dict.psi().synthesize_sparse(&xp)?;
        approx
            .iter_mut()
            .zip(self.dict.phi().synthesize_sparse(&xq)?)
            .for_each(|(a, b)| *a += b);
        let err = self
            .y
            .iter()
            .zip(&approx)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        if err > self.accept {
            return Ok(None);
        }
        Ok(Some(SparseSolution {
            segment: xp,
            local: xq,
            discovered_at,
            resynthesis_error: err,
        }))
    }

    /// Least-squares coefficients of `y` on the columns of both supports, so
    /// the same supports found from different windows agree to roundoff.
    fn refit(&self, xp: &SparseVec, xq: &SparseVec) -> Result<(SparseVec, SparseVec)> {
        let n = self.y.len();
        let cols: Vec<Vec<C64>> = xp
            .indices
            .iter()
            .map(|&j| self.dict.psi().atom(j))
            .chain(xq.indices.iter().map(|&j| self.dict.phi().atom(j)))
            .collect();
        let a = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
        let c = numerics::least_squares(&a, &DVector::from_column_slice(self.y))?;
        let kp = xp.nnz();
        Ok((
            SparseVec {
                indices: xp.indices.clone(),
                values: c.as_slice()[..kp].to_vec(),
            },
            SparseVec {
                indices: xq.indices.clone(),
                values: c.as_slice()[kp..].to_vec(),
            },
        ))
    }

    fn window(&self, kp: usize, s: usize, start: usize) -> Result<Option<SparseSolution>> {
        let n = self.y.len();
        let seg: Vec<C64> = (0..s).map(|i| self.y[(start + i) % n]).collect();
        let xp = match self
            .dict
            .psi()
            .recover_segment(&seg, start, kp, &self.tol)?
        {
            Ok(c) if !c.is_empty() => c,
            _ => return Ok(None),
        };
        let found = Discovery {
            kp_pass: kp,
            window: start,
            pass: Pass::Direct,
        };
        let Some(sol) = self.complete(xp, found)? else {
            return Ok(None);
        };
        let s_own = self
            .dict
            .psi()
            .sampling_factor(sol.kp())
            .expect("segment basis");
        if generalized_admissible(n, s_own, self.l, sol.kq(), self.tau) {
            Ok(Some(sol))
        } else {
            Ok(None)
        }
    }
}

/// All admitted representations of `y` found by the window search, plus
/// the seeds `[0, Phi^{-1} y]` and `[Psi^{-1} y, 0]`. With a preconditioned
/// dictionary the search runs on `A^{-1} y`.
pub fn gen_prosparse_solve(
    y: &[C64],
    dict: &Dictionary,
    cfg: &GenSolveConfig,
) -> Result<SolutionSet> {
    let n = dict.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if !numerics::all_finite(y) {
        return Err(Error::NonFinite("signal"));
    }
    let cap = *dict.psi().segment().ok_or_else(|| {
        Error::InvalidParameter("the first basis must be segment-recoverable".into())
    })?;
    let l = dict
        .phi()
        .local_length()
        .ok_or_else(|| Error::InvalidParameter("the second basis must be local".into()))?;
    let work;
    let y = match dict.preconditioner() {
        Some(a) => {
            work = a.solve(y)?;
            &work[..]
        }
        None => y,
    };

    let scale = inf_norm(y);
    let ctx = Context {
        dict,
        y,
        l,
        tau: cap.tau,
        zero: cfg.tol.zero * scale,
        accept: cfg.tol.resynthesis * scale,
        tol: cfg.tol,
    };
    let seed = |kp_pass| Discovery {
        kp_pass,
        window: 0,
        pass: Pass::Seed,
    };

    let mut cands = Vec::new();
    if let Some(s) = ctx.complete(SparseVec::new(), seed(0))? {
        cands.push(s);
    }

    let limit = cfg.kp_limit.unwrap_or(n).min(n);
    for kp in 1..=limit {
        let s = cap.sampling_factor(n, kp);
        // Beyond here a window holds the whole signal, or no solution with a
        // local atom passes the admission test.
        if s >= n || !generalized_admissible(n, s, l, 1, cap.tau) {
            break;
        }
        let starts = if cap.tau == 0 { n } else { n - s + 1 };
        let found: Vec<Result<Option<SparseSolution>>> = (0..starts)
            .into_par_iter()
            .map(|start| ctx.window(kp, s, start))
            .collect();
        for f in found {
            if let Some(sol) = f? {
                cands.push(sol);
            }
        }
    }

    let analysis = dict.psi().analyze(y)?;
    let xp = SparseVec::from_dense(&analysis, cfg.tol.zero * inf_norm(&analysis));
    if let Some(s) = ctx.complete(xp.clone(), seed(xp.nnz()))? {
        cands.push(s);
    }
    SolutionSet::from_candidates(cands, &cfg.tol)
}

/// Solves against `D = [A Psi, A Phi]` by searching `A^{-1} y` in the base
/// dictionary; the coefficients carry over unchanged.
pub fn preconditioned_solve(
    a: &Preconditioner,
    y: &[C64],
    dict: &Dictionary,
    cfg: &GenSolveConfig,
) -> Result<SolutionSet> {
    let base = Dictionary::new(dict.psi().clone(), dict.phi().clone())?;
    gen_prosparse_solve(&a.solve(y)?, &base, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{make_random_planted, Placement};

    #[test]
    fn admission_reductions() {
        // Fourier + canonical: 2 K_p K_q < N.
        for kp in 1..8 {
            for kq in 0..16 {
                assert_eq!(
                    generalized_admissible(32, 2 * kp, 1, kq, 0),
                    2 * kp * kq < 32
                );
            }
        }
        // DCT + canonical: 4 K_p (K_q + 1) < N + 1.
        for kp in 1..8 {
            for kq in 0..16 {
                assert_eq!(
                    generalized_admissible(64, 4 * kp, 1, kq, 1),
                    4 * kp * (kq + 1) < 65
                );
            }
        }
        assert!(generalized_admissible(64, 4, 8, 3, 0));
    }

    #[test]
    fn clean_interval_examples() {
        assert_eq!(count_clean_intervals_general(&[], 5, 1, 16), 12);
        // Starts 0..=2 and 7..=13; the bound is met with equality.
        let sup = vec![vec![5, 6]];
        assert_eq!(count_clean_intervals_general(&sup, 3, 1, 16), 10);
        assert_eq!(clean_interval_bound(16, 3, 2, 1, 1), 10);
    }

    #[test]
    fn local_fourier_planted() {
        let dict = Dictionary::fourier_local_fourier(64, 8).unwrap();
        let p = make_random_planted(&dict, 2, 3, 4, Placement::Uniform).unwrap();
        let set = gen_prosparse_solve(&p.y, &dict, &GenSolveConfig::default()).unwrap();
        let s = set
            .find(&p.segment.indices, &p.local.indices)
            .expect("planted");
        assert!(s.segment.max_abs_diff(&p.segment) < 1e-7 && s.local.max_abs_diff(&p.local) < 1e-7);
    }

    #[test]
    fn dct_planted() {
        let dict = Dictionary::dct_canonical(64).unwrap();
        let p = make_random_planted(&dict, 2, 4, 9, Placement::Uniform).unwrap();
        let set = gen_prosparse_solve(&p.y, &dict, &GenSolveConfig::default()).unwrap();
        let s = set
            .find(&p.segment.indices, &p.local.indices)
            .expect("planted");
        assert!(s.segment.max_abs_diff(&p.segment) < 1e-7 && s.local.max_abs_diff(&p.local) < 1e-7);
    }

    #[test]
    fn identity_preconditioner_changes_nothing() {
        let dict = Dictionary::fourier_canonical(16).unwrap();
        let p = make_random_planted(&dict, 1, 2, 2, Placement::Uniform).unwrap();
        let cfg = GenSolveConfig::default();
        let plain = gen_prosparse_solve(&p.y, &dict, &cfg).unwrap();
        let eye = Preconditioner::new(nalgebra::DMatrix::identity(16, 16)).unwrap();
        assert_eq!(
            preconditioned_solve(&eye, &p.y, &dict, &cfg).unwrap(),
            plain
        );
    }
}
