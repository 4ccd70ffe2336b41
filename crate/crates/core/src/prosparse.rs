//! Exhaustive Prony-window search for the Fourier + canonical dictionary.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::numerics::{self, inf_norm, UnitRoots, C64};
use crate::prony::{self, FourierGrid, Reject};
use crate::sparse::SparseVec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pass {
    /// A seed solution that needs no window: `[0, Phi^{-1} y]` or `[Psi^{-1} y, 0]`.
    Seed,
    Direct,
    Dual,
}

/// Where a solution was first found: the model order of the pass, the
/// window start and the pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discovery {
    pub kp_pass: usize,
    pub window: usize,
    pub pass: Pass,
}

/// `y = Psi x_p + Phi x_q` with `x_p` the segment-basis (Fourier)
/// coefficients and `x_q` the local-basis (spike) coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    pub segment: SparseVec,
    pub local: SparseVec,
    pub discovered_at: Discovery,
    /// `||Psi x_p + Phi x_q - y||_inf`.
    pub resynthesis_error: f64,
}

impl SparseSolution {
    pub fn kp(&self) -> usize {
        self.segment.nnz()
    }

    pub fn kq(&self) -> usize {
        self.local.nnz()
    }

    pub fn total(&self) -> usize {
        self.kp() + self.kq()
    }

    fn key(&self) -> (&[usize], &[usize]) {
        (&self.segment.indices, &self.local.indices)
    }

    fn order_key(&self) -> (usize, usize, &[usize], &[usize]) {
        (
            self.total(),
            self.kp(),
            &self.segment.indices,
            &self.local.indices,
        )
    }
}

/// Solutions without repeated support pairs, sorted by total sparsity, then
/// `K_p`, then supports.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolutionSet {
    solutions: Vec<SparseSolution>,
}

impl SolutionSet {
    /// Merges candidates given in discovery order. The first discovery of a
    /// support pair is kept; a later one with different coefficients is an
    /// internal error.
    pub fn from_candidates(candidates: Vec<SparseSolution>, tol: &Tolerances) -> Result<Self> {
        let mut kept: Vec<SparseSolution> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for cand in candidates {
            let key = (cand.segment.indices.clone(), cand.local.indices.clone());
            match index.get(&key) {
                Some(&i) => {
                    let first: &SparseSolution = &kept[i];
                    let scale = first
                        .segment
                        .max_abs()
                        .max(first.local.max_abs())
                        .max(1e-300);
                    let diff = first
                        .segment
                        .max_abs_diff(&cand.segment)
                        .max(first.local.max_abs_diff(&cand.local));
                    if diff > tol.coefficient_match * scale {
                        return Err(Error::Invariant(format!(
                            "supports {:?}/{:?} found twice with coefficients {diff:e} apart",
                            key.0, key.1
                        )));
                    }
                }
                None => {
                    index.insert(key, kept.len());
                    kept.push(cand);
                }
            }
        }
        kept.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
        Ok(Self { solutions: kept })
    }

    pub fn solutions(&self) -> &[SparseSolution] {
        &self.solutions
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SparseSolution> {
        self.solutions.iter()
    }

    /// The solution with exactly these supports.
    pub fn find(
        &self,
        segment_support: &[usize],
        local_support: &[usize],
    ) -> Option<&SparseSolution> {
        self.solutions
            .iter()
            .find(|s| s.key() == (segment_support, local_support))
    }

    /// Solutions with both components nonzero.
    pub fn nontrivial(&self) -> impl Iterator<Item = &SparseSolution> {
        self.solutions.iter().filter(|s| s.kp() > 0 && s.kq() > 0)
    }

    pub fn filter(&self, keep: impl Fn(&SparseSolution) -> bool) -> Self {
        Self {
            solutions: self.solutions.iter().filter(|s| keep(s)).cloned().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a SolutionSet {
    type Item = &'a SparseSolution;
    type IntoIter = std::slice::Iter<'a, SparseSolution>;

    fn into_iter(self) -> Self::IntoIter {
        self.solutions.iter()
    }
}

/// Largest `K_p` the search visits: `ceil(sqrt(N/2) - 1)`.
pub fn max_fourier_order(n: usize) -> usize {
    ((n as f64 / 2.0).sqrt() - 1.0).ceil().max(0.0) as usize
}

/// The admission test `K_p K_q < N / 2`.
pub fn product_admissible(n: usize, kp: usize, kq: usize) -> bool {
    2 * kp * kq < n
}

/// `sum_m c_m exp(j 2 pi m t / N) / sqrt(N)` for all `t`.
fn fourier_synth(c: &SparseVec, roots: &UnitRoots) -> Vec<C64> {
    let n = roots.len();
    let s = 1.0 / (n as f64).sqrt();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (m, cm) in c.iter() {
        let a = cm * s;
        for (t, o) in out.iter_mut().enumerate() {
            *o += a * roots.get((m * t) as i64);
        }
    }
    out
}

fn resynthesis_error(y: &[C64], xp: &SparseVec, xq: &SparseVec, roots: &UnitRoots) -> f64 {
    let mut r = fourier_synth(xp, roots);
    for (q, v) in xq.iter() {
        r[q] += v;
    }
    r.iter()
        .zip(y)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()))
}

/// Least-squares coefficients of `y` on the Fourier atoms and spikes of a
/// candidate's supports.
fn refit(
    y: &[C64],
    xp: &SparseVec,
    xq: &SparseVec,
    roots: &UnitRoots,
) -> Result<(SparseVec, SparseVec)> {
    let n = y.len();
    let s = 1.0 / (n as f64).sqrt();
    let kp = xp.nnz();
    let a = DMatrix::from_fn(n, kp + xq.nnz(), |t, j| {
        if j < kp {
            roots.get((xp.indices[j] * t) as i64) * s
        } else if xq.indices[j - kp] == t {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let c = numerics::least_squares(&a, &DVector::from_column_slice(y))?;
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

/// Candidate from window `(kp, start)`: the Prony fit and the thresholded
/// residual refit jointly, or `None` when the window is rejected or not
/// admitted.
fn window_candidate(
    y: &[C64],
    kp: usize,
    start: usize,
    grid: &FourierGrid,
    zero: f64,
    tol: &Tolerances,
) -> Result<Option<(SparseVec, SparseVec)>> {
    let n = y.len();
    let seg: Vec<C64> = (0..2 * kp).map(|i| y[(start + i) % n]).collect();
    let model = match prony::prony_fit_on_grid(&seg, kp, start, grid, tol)? {
        Ok(m) => m,
        // Clustered frequencies push sigma_K below the rank threshold; a
        // full-order fit is still accepted if the root and fit tests pass.
        Err(Reject::Degenerate { .. }) => {
            match prony::prony_fit_on_grid(
                &seg,
                kp,
                start,
                grid,
                &Tolerances { rank: 0.0, ..*tol },
            )? {
                Ok(m) => m,
                Err(_) => return Ok(None),
            }
        }
        Err(_) => return Ok(None),
    };
    let xp = prony::fourier_coeffs_from_model(&model, n)?;
    let yhat = fourier_synth(&xp, grid.roots());
    let residual: Vec<C64> = y.iter().zip(&yhat).map(|(a, b)| a - b).collect();
    let xq = SparseVec::from_dense(&residual, zero);
    let kq = xq.nnz();
    if kp <= kq && product_admissible(n, kp, kq) {
        Ok(Some(refit(y, &xp, &xq, grid.roots())?))
    } else {
        Ok(None)
    }
}

/// All admitted window candidates of one pass, in `(K_p, start)` order.
fn scan(
    y: &[C64],
    grid: &FourierGrid,
    tol: &Tolerances,
) -> Result<Vec<(usize, usize, SparseVec, SparseVec)>> {
    let n = y.len();
    let zero = tol.zero * inf_norm(y);
    let mut out = Vec::new();
    for kp in 1..=max_fourier_order(n) {
        if 2 * kp > n {
            break;
        }
        let found: Vec<Result<Option<(SparseVec, SparseVec)>>> = (0..n)
            .into_par_iter()
            .map(|start| window_candidate(y, kp, start, grid, zero, tol))
            .collect();
        for (start, f) in found.into_iter().enumerate() {
            if let Some((xp, xq)) = f? {
                out.push((kp, start, xp, xq));
            }
        }
    }
    Ok(out)
}

fn check_signal(y: &[C64]) -> Result<()> {
    if y.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "signal length {} is below 2",
            y.len()
        )));
    }
    if !numerics::all_finite(y) {
        return Err(Error::NonFinite("signal"));
    }
    Ok(())
}

/// Every `(K_p, K_q)`-sparse representation of `y` in `[F, I]` with
/// `K_p K_q < N / 2`, plus the two seed solutions `[0, y]` and `[F^* y, 0]`.
///
/// Solutions with `K_p <= K_q` come from Prony fits on `y`; the rest from
/// the same search on the dual signal `conj(F^* y) = [I, F] conj(x)`.
pub fn prosparse_solve(y: &[C64], tol: &Tolerances) -> Result<SolutionSet> {
    check_signal(y)?;
    let n = y.len();
    let grid = FourierGrid::new(n);
    let zero = tol.zero * inf_norm(y);
    let seed = |kp_pass| Discovery {
        kp_pass,
        window: 0,
        pass: Pass::Seed,
    };

    let mut cands = Vec::new();
    let spikes = SparseVec::from_dense(y, zero);
    cands.push(SparseSolution {
        resynthesis_error: resynthesis_error(y, &SparseVec::new(), &spikes, grid.roots()),
        segment: SparseVec::new(),
        local: spikes,
        discovered_at: seed(0),
    });
    for (kp, start, xp, xq) in scan(y, &grid, tol)? {
        cands.push(SparseSolution {
            resynthesis_error: resynthesis_error(y, &xp, &xq, grid.roots()),
            segment: xp,
            local: xq,
            discovered_at: Discovery {
                kp_pass: kp,
                window: start,
                pass: Pass::Direct,
            },
        });
    }

    let analysis = numerics::dft(y, false)?;
    let dual: Vec<C64> = analysis.iter().map(|v| v.conj()).collect();
    let atoms = SparseVec::from_dense(&analysis, tol.zero * inf_norm(&analysis));
    cands.push(SparseSolution {
        resynthesis_error: resynthesis_error(y, &atoms, &SparseVec::new(), grid.roots()),
        discovered_at: seed(atoms.nnz()),
        segment: atoms,
        local: SparseVec::new(),
    });
    for (kp, start, c, d) in scan(&dual, &grid, tol)? {
        if kp >= d.nnz() {
            continue;
        }
        let (xp, xq) = (d.conj(), c.conj());
        cands.push(SparseSolution {
            resynthesis_error: resynthesis_error(y, &xp, &xq, grid.roots()),
            segment: xp,
            local: xq,
            discovered_at: Discovery {
                kp_pass: kp,
                window: start,
                pass: Pass::Dual,
            },
        });
    }

    let limit = tol.resynthesis * inf_norm(y);
    if let Some(bad) = cands.iter().find(|c| c.resynthesis_error > limit) {
        return Err(Error::Invariant(format!(
            "solution found at {:?} misses the signal by {:e}",
            bad.discovered_at, bad.resynthesis_error
        )));
    }
    SolutionSet::from_candidates(cands, tol)
}

/// Solutions of [`prosparse_solve`] with `K_p + K_q <= k_max`. Every
/// `K`-sparse representation with `K < sqrt(2N)` is among them, since
/// `K >= 2 sqrt(K_p K_q)`.
pub fn total_sparsity_solve(y: &[C64], k_max: usize, tol: &Tolerances) -> Result<SolutionSet> {
    Ok(prosparse_solve(y, tol)?.filter(|s| s.total() <= k_max))
}

/// Starts `l` (modulo `N`) of length-`2 K_p` windows that avoid every spike.
pub fn count_clean_windows(spikes: &[usize], kp: usize, n: usize) -> usize {
    let mut hit = vec![false; n];
    for &s in spikes {
        hit[s % n] = true;
    }
    let len = 2 * kp;
    (0..n)
        .filter(|&l| (0..len).all(|i| !hit[(l + i) % n]))
        .count()
}

/// `N - 2 K_p K_q`, the lower bound on [`count_clean_windows`].
pub fn clean_window_bound(n: usize, kp: usize, kq: usize) -> i64 {
    n as i64 - 2 * (kp * kq) as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn synth(n: usize, xp: &SparseVec, xq: &SparseVec) -> Vec<C64> {
        let mut y = numerics::dft(&xp.to_dense(n), true).unwrap();
        for (q, v) in xq.iter() {
            y[q] += v;
        }
        y
    }

    #[test]
    fn atom_plus_spike() {
        let n = 32;
        let xp = SparseVec {
            indices: vec![2],
            values: vec![c(1.0, 0.0)],
        };
        let xq = SparseVec {
            indices: vec![5],
            values: vec![c(1.0, 0.0)],
        };
        let y = synth(n, &xp, &xq);
        let set = prosparse_solve(&y, &Tolerances::default()).unwrap();
        let nontrivial: Vec<_> = set.nontrivial().collect();
        assert_eq!(nontrivial.len(), 1);
        let s = nontrivial[0];
        assert_eq!(
            (s.segment.indices.as_slice(), s.local.indices.as_slice()),
            (&[2usize][..], &[5usize][..])
        );
        assert!(s.segment.max_abs_diff(&xp) < 1e-9 && s.local.max_abs_diff(&xq) < 1e-9);
        let trivial = set.find(&[], &(0..n).collect::<Vec<_>>()).unwrap();
        assert_eq!(trivial.discovered_at.pass, Pass::Seed);
    }

    #[test]
    fn dual_pass_finds_fourier_heavy_solution() {
        let n = 32;
        let xp = SparseVec {
            indices: vec![1, 9, 20],
            values: vec![c(1.0, 0.0), c(0.0, 1.0), c(-0.5, 0.5)],
        };
        let xq = SparseVec {
            indices: vec![4],
            values: vec![c(0.8, -0.1)],
        };
        let y = synth(n, &xp, &xq);
        let set = prosparse_solve(&y, &Tolerances::default()).unwrap();
        let s = set
            .find(&xp.indices, &xq.indices)
            .expect("planted solution");
        assert_eq!(s.discovered_at.pass, Pass::Dual);
        assert!(s.segment.max_abs_diff(&xp) < 1e-9 && s.local.max_abs_diff(&xq) < 1e-9);
    }

    #[test]
    fn zero_signal_has_seeds_only() {
        let set = prosparse_solve(&[c(0.0, 0.0); 8], &Tolerances::default()).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.solutions()[0].total(), 0);
    }

    #[test]
    fn duplicate_supports_with_different_values_are_refused() {
        let d = Discovery {
            kp_pass: 1,
            window: 0,
            pass: Pass::Direct,
        };
        let a = SparseSolution {
            segment: SparseVec {
                indices: vec![1],
                values: vec![c(1.0, 0.0)],
            },
            local: SparseVec::new(),
            discovered_at: d,
            resynthesis_error: 0.0,
        };
        let mut b = a.clone();
        b.segment.values[0] = c(2.0, 0.0);
        assert!(
            SolutionSet::from_candidates(vec![a.clone(), a.clone()], &Tolerances::default())
                .is_ok()
        );
        assert!(SolutionSet::from_candidates(vec![a, b], &Tolerances::default()).is_err());
    }

    #[test]
    fn clean_window_counts() {
        assert_eq!(count_clean_windows(&[0, 4], 1, 8), 4);
        assert_eq!(clean_window_bound(8, 1, 2), 4);
        assert_eq!(count_clean_windows(&[], 3, 8), 8);
        // K_p K_q = N / 2 with evenly spaced spikes leaves nothing clean.
        assert_eq!(count_clean_windows(&[0, 4, 8, 12], 2, 16), 0);
    }

    #[test]
    fn loop_bound() {
        assert_eq!(max_fourier_order(32), 3);
        assert_eq!(max_fourier_order(128), 7);
        assert_eq!(max_fourier_order(2), 0);
        assert_eq!(max_fourier_order(8), 1);
    }
}
