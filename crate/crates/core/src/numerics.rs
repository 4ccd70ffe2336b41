//! Dense complex kernels shared by the solvers: the unitary DFT, the
//! Toeplitz system of an annihilating filter, its nullspace, polynomial
//! evaluation on the roots of unity and the Vandermonde weight fit.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default relative threshold separating genuine rank deficiency from roundoff.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Roots closer than this are treated as repeated.
pub const MIN_ROOT_SEPARATION: f64 = 1e-9;

pub fn inf_norm(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn l2_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn l1_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

pub fn all_finite(v: &[C64]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Unitary DFT with the `1/sqrt(N)` factor in both directions.
///
/// The forward direction uses `exp(-j 2 pi m n / N)` (analysis, `F^*`); the
/// inverse uses `exp(+j 2 pi m n / N)` and is the Fourier synthesis matrix `F`
/// whose columns are the Fourier atoms.
pub fn dft(v: &[C64], inverse: bool) -> Result<Vec<C64>> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = v.len();
    let direction = if inverse {
        FftDirection::Inverse
    } else {
        FftDirection::Forward
    };
    let fft = FftPlanner::new().plan_fft(n, direction);
    let mut out = v.to_vec();
    fft.process(&mut out);
    let scale = 1.0 / (n as f64).sqrt();
    out.iter_mut().for_each(|z| *z *= scale);
    Ok(out)
}

/// Exact table of the `N`-th roots of unity, indexed modulo `N`.
#[derive(Debug, Clone)]
pub struct UnitRoots {
    table: Vec<C64>,
}

impl UnitRoots {
    pub fn new(n: usize) -> Self {
        let table = (0..n)
            .map(|m| C64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64))
            .collect();
        Self { table }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// `exp(j 2 pi k / N)` for any integer `k`.
    #[inline]
    pub fn get(&self, k: i64) -> C64 {
        let n = self.table.len() as i64;
        self.table[k.rem_euclid(n) as usize]
    }
}

/// The `K x (K+1)` Toeplitz matrix whose nullspace holds the annihilating
/// filter of a window of `2K` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzSystem {
    k: usize,
    start: usize,
    source_len: usize,
    periodic: bool,
    entries: Vec<C64>,
}

impl ToeplitzSystem {
    pub fn order(&self) -> usize {
        self.k
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn periodic(&self) -> bool {
        self.periodic
    }

    pub fn rows(&self) -> usize {
        self.k
    }

    pub fn cols(&self) -> usize {
        self.k + 1
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i * (self.k + 1) + j]
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.k, self.k + 1, &self.entries)
    }

    /// `T h`, used to check the annihilation identity.
    pub fn apply(&self, h: &[C64]) -> Vec<C64> {
        (0..self.k)
            .map(|i| (0..=self.k).map(|j| self.get(i, j) * h[j]).sum())
            .collect()
    }
}

/// Entry `(i, j)` is `y[start + K + i - j]`, indices taken modulo `N` when
/// `periodic` is set.
pub fn build_toeplitz(y: &[C64], k: usize, start: usize, periodic: bool) -> Result<ToeplitzSystem> {
    if k == 0 {
        return Err(Error::ZeroOrder);
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if periodic {
        if start >= n {
            return Err(Error::WindowOutOfRange {
                start,
                end: start + 2 * k,
                len: n,
            });
        }
    } else if start + 2 * k > n {
        return Err(Error::WindowOutOfRange {
            start,
            end: start + 2 * k,
            len: n,
        });
    }
    let mut entries = Vec::with_capacity(k * (k + 1));
    for i in 0..k {
        for j in 0..=k {
            let idx = start + k + i - j;
            entries.push(y[if periodic { idx % n } else { idx }]);
        }
    }
    Ok(ToeplitzSystem {
        k,
        start,
        source_len: n,
        periodic,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegenerateReason {
    /// Fewer than `K` singular values above the rank threshold.
    RankDeficient,
    /// The nullspace vector has a vanishing leading entry.
    Unnormalizable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Degenerate {
    pub rank: usize,
    pub reason: DegenerateReason,
}

#[derive(Debug, Clone)]
pub struct NullVector {
    /// Filter coefficients with `h[0] == 1`.
    pub h: Vec<C64>,
    pub rank: usize,
    /// Singular values of `T`, descending.
    pub singular_values: Vec<f64>,
}

/// Singular values (descending) and right singular vectors of a `K x (K+1)`
/// matrix. The matrix is padded with a zero row so the decomposition also
/// yields the nullspace direction.
fn wide_svd(t: &ToeplitzSystem) -> (Vec<f64>, Vec<Vec<C64>>) {
    let k = t.k;
    let padded = faer::Mat::<C64>::from_fn(k + 1, k + 1, |i, j| {
        if i < k {
            t.get(i, j)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let Ok(svd) = padded.svd() else {
        return (vec![0.0; k + 1], (0..=k).map(|i| unit(k + 1, i)).collect());
    };
    let sigma = (0..=k).map(|i| svd.S()[i].re).collect();
    let v = svd.V();
    let vectors = (0..=k)
        .map(|i| (0..=k).map(|j| v[(j, i)]).collect())
        .collect();
    (sigma, vectors)
}

fn unit(n: usize, i: usize) -> Vec<C64> {
    let mut e = vec![C64::new(0.0, 0.0); n];
    e[i] = C64::new(1.0, 0.0);
    e
}

/// Nullspace of the Toeplitz system, scaled so the leading entry is one.
///
/// The effective rank counts singular values above `rank_tol * sigma_1`; any
/// deficiency is reported instead of resolved.
pub fn nullspace_vector(
    t: &ToeplitzSystem,
    rank_tol: f64,
) -> std::result::Result<NullVector, Degenerate> {
    let k = t.k;
    let (sigma_all, vectors) = wide_svd(t);
    // The padded row contributes one structural zero at the tail.
    let sigma: Vec<f64> = sigma_all[..k].to_vec();
    let rank = if sigma[0] == 0.0 {
        0
    } else {
        sigma.iter().filter(|&&s| s > rank_tol * sigma[0]).count()
    };
    if rank < k {
        return Err(Degenerate {
            rank,
            reason: DegenerateReason::RankDeficient,
        });
    }
    let v = &vectors[k];
    let norm = l2_norm(v);
    if v[0].norm() < 1e-12 * norm {
        return Err(Degenerate {
            rank,
            reason: DegenerateReason::Unnormalizable,
        });
    }
    let lead = v[0];
    let h = v.iter().map(|z| z / lead).collect();
    Ok(NullVector {
        h,
        rank,
        singular_values: sigma,
    })
}

/// Evaluates `P(x) = sum_i h[i] x^(K-i)` at arbitrary nodes.
pub fn eval_poly_at(h: &[C64], nodes: &[C64]) -> Vec<C64> {
    nodes
        .iter()
        .map(|&x| h.iter().fold(C64::new(0.0, 0.0), |acc, &c| acc * x + c))
        .collect()
}

/// `|P(exp(j 2 pi m / N))|` for `m = 0..N`.
pub fn eval_poly_on_root_grid(h: &[C64], n: usize) -> Vec<f64> {
    eval_poly_on_roots(h, &UnitRoots::new(n))
}

/// Same as [`eval_poly_on_root_grid`] with a precomputed root table.
pub fn eval_poly_on_roots(h: &[C64], roots: &UnitRoots) -> Vec<f64> {
    let k = h.len().saturating_sub(1) as i64;
    (0..roots.len() as i64)
        .map(|m| {
            h.iter()
                .enumerate()
                .map(|(i, &c)| c * roots.get(m * (k - i as i64)))
                .sum::<C64>()
                .norm()
        })
        .collect()
}

pub fn min_pairwise_distance(points: &[C64]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.min((a - b).norm());
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct WeightFit {
    pub weights: Vec<C64>,
    /// Largest absolute misfit over the window.
    pub residual: f64,
}

/// Least-squares weights for `y[n] = sum_k w_k u_k^(start + n)` over the
/// whole window; an exact Vandermonde solve when the window holds `K` samples.
pub fn solve_weights(roots: &[C64], samples: &[C64], start: usize) -> Result<WeightFit> {
    let k = roots.len();
    if k == 0 {
        return Err(Error::ZeroOrder);
    }
    if samples.len() < k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: samples.len(),
        });
    }
    let sep = min_pairwise_distance(roots);
    if sep < MIN_ROOT_SEPARATION {
        return Err(Error::RepeatedRoots(sep));
    }
    let w = samples.len();
    let mut v = DMatrix::<C64>::zeros(w, k);
    for (col, &u) in roots.iter().enumerate() {
        let mut p = u.powu(start as u32);
        for row in 0..w {
            v[(row, col)] = p;
            p *= u;
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(samples);
    let weights = least_squares(&v, &rhs)?;
    let fitted = &v * &weights;
    let residual = fitted
        .iter()
        .zip(samples)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    Ok(WeightFit {
        weights: weights.iter().copied().collect(),
        residual,
    })
}

/// Minimum-norm least-squares solution through the SVD.
pub fn least_squares(
    a: &DMatrix<C64>,
    b: &nalgebra::DVector<C64>,
) -> Result<nalgebra::DVector<C64>> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: b.len(),
        });
    }
    if m == 0 || n == 0 {
        return Ok(nalgebra::DVector::zeros(n));
    }
    let fa = faer::Mat::<C64>::from_fn(m, n, |i, j| a[(i, j)]);
    let svd = fa
        .thin_svd()
        .map_err(|e| Error::Singular(format!("{e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let smax = if s.dim() > 0 { s[0].re } else { 0.0 };
    let cut = smax * 1e-14 * m.max(n) as f64;
    let mut x = nalgebra::DVector::<C64>::zeros(n);
    for r in 0..s.dim() {
        let sr = s[r].re;
        if sr <= cut || sr == 0.0 {
            break;
        }
        let proj: C64 = (0..m).map(|i| u[(i, r)].conj() * b[i]).sum::<C64>() / sr;
        for j in 0..n {
            x[j] += v[(j, r)] * proj;
        }
    }
    Ok(x)
}

/// LU factorization of a square complex matrix, computed once and reused.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
}

impl DenseLu {
    /// Factorizes `a`, refusing matrices whose 1-norm condition number
    /// exceeds `max_condition`.
    pub fn new(a: &DMatrix<C64>, max_condition: f64) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        let n = a.nrows();
        let lu = a.clone().lu();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::Singular("matrix is not invertible".into()))?;
        let cond = one_norm(a) * one_norm(&inv);
        if !cond.is_finite() || cond > max_condition {
            return Err(Error::Singular(format!(
                "condition estimate {cond:e} exceeds {max_condition:e}"
            )));
        }
        Ok(Self { lu, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let rhs = nalgebra::DVector::from_column_slice(b);
        let x = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("LU solve failed".into()))?;
        Ok(x.iter().copied().collect())
    }
}

pub fn one_norm(a: &DMatrix<C64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn mat_vec(a: &DMatrix<C64>, x: &[C64]) -> Vec<C64> {
    let xv = nalgebra::DVector::from_column_slice(x);
    (a * xv).iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_exact_on_windowed_cosines() {
        // Rows 11..63 of a 64-point DCT-II on a clustered support.
        let n: f64 = 64.0;
        let cols = [1usize, 10, 14, 17, 20, 21, 23, 29, 32, 35, 38, 43, 58];
        let a = DMatrix::from_fn(52, cols.len(), |i, j| {
            let (t, k) = ((11 + i) as f64, cols[j] as f64);
            let b = if cols[j] == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            C64::new(
                b * (std::f64::consts::PI * (2.0 * t + 1.0) * k / (2.0 * n)).cos(),
                0.0,
            )
        });
        let x: Vec<C64> = (0..cols.len())
            .map(|j| C64::from_polar(1.0, j as f64))
            .collect();
        let b = &a * nalgebra::DVector::from_vec(x.clone());
        let got = least_squares(&a, &b).unwrap();
        assert!(got.iter().zip(&x).all(|(p, q)| (p - q).norm() < 1e-13));
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn direct_dft(v: &[C64], sign: f64) -> Vec<C64> {
        let n = v.len();
        (0..n)
            .map(|m| {
                v.iter()
                    .enumerate()
                    .map(|(k, &x)| {
                        x * C64::from_polar(1.0, sign * 2.0 * PI * (m * k) as f64 / n as f64)
                    })
                    .sum::<C64>()
                    / (n as f64).sqrt()
            })
            .collect()
    }

    #[test]
    fn dft_of_spike_is_flat() {
        let mut v = vec![c(0.0, 0.0); 4];
        v[0] = c(1.0, 0.0);
        for z in dft(&v, false).unwrap() {
            assert!((z - c(0.5, 0.0)).norm() < 1e-15);
        }
        let flat = vec![c(0.5, 0.0); 4];
        let back = dft(&flat, true).unwrap();
        assert!((back[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(back[1..].iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn dft_of_picket_fence_is_picket_fence() {
        let mut v = vec![c(0.0, 0.0); 32];
        for i in (0..32).step_by(8) {
            v[i] = c(2f64.sqrt(), 0.0);
        }
        let out = dft(&v, false).unwrap();
        for (i, z) in out.iter().enumerate() {
            let expect = if i % 4 == 0 { 1.0 } else { 0.0 };
            assert!((z - c(expect, 0.0)).norm() < 1e-14, "index {i}: {z}");
        }
    }

    #[test]
    fn dft_matches_direct_definition() {
        let v: Vec<C64> = (0..13)
            .map(|i| c((i as f64).sin(), (i as f64 * 0.7).cos()))
            .collect();
        for (inverse, sign) in [(false, -1.0), (true, 1.0)] {
            let fast = dft(&v, inverse).unwrap();
            let slow = direct_dft(&v, sign);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn dft_rejects_empty() {
        assert!(matches!(dft(&[], false), Err(Error::EmptyInput)));
    }

    #[test]
    fn toeplitz_small_cases() {
        let y: Vec<C64> = (0..4).map(|i| c(i as f64, 0.0)).collect();
        let t = build_toeplitz(&y, 1, 0, false).unwrap();
        assert_eq!((t.rows(), t.cols()), (1, 2));
        assert_eq!(t.get(0, 0), y[1]);
        assert_eq!(t.get(0, 1), y[0]);

        let y: Vec<C64> = (0..8).map(|i| c(i as f64, 0.0)).collect();
        let t = build_toeplitz(&y, 2, 6, true).unwrap();
        // rows: [y8, y7, y6], [y9, y8, y7] modulo 8
        assert_eq!(t.get(0, 0), y[0]);
        assert_eq!(t.get(0, 1), y[7]);
        assert_eq!(t.get(0, 2), y[6]);
        assert_eq!(t.get(1, 0), y[1]);
        assert_eq!(t.get(1, 2), y[7]);

        assert!(matches!(
            build_toeplitz(&y, 3, 4, false),
            Err(Error::WindowOutOfRange { .. })
        ));
        assert!(matches!(
            build_toeplitz(&y, 0, 0, false),
            Err(Error::ZeroOrder)
        ));
    }

    #[test]
    fn single_exponential_nullspace() {
        let u = C64::from_polar(1.0, 2.0 * PI / 8.0);
        let y = vec![c(3.0, 0.0), u * 3.0];
        let t = build_toeplitz(&y, 1, 0, false).unwrap();
        let nv = nullspace_vector(&t, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(nv.rank, 1);
        assert!((nv.h[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((nv.h[1] + u).norm() < 1e-12);
    }

    #[test]
    fn overshoot_order_is_degenerate() {
        let n = 32;
        let roots = UnitRoots::new(n);
        let y: Vec<C64> = (0..n as i64)
            .map(|t| roots.get(3 * t) * 0.7 + roots.get(11 * t) * c(0.2, -0.4))
            .collect();
        let t = build_toeplitz(&y, 3, 5, true).unwrap();
        let (sigma, _) = wide_svd(&t);
        assert!(sigma[2] / sigma[0] < 1e-10);
        let err = nullspace_vector(&t, DEFAULT_RANK_TOL).unwrap_err();
        assert_eq!(
            err,
            Degenerate {
                rank: 2,
                reason: DegenerateReason::RankDeficient
            }
        );
    }

    #[test]
    fn zero_window_has_rank_zero() {
        let y = vec![c(0.0, 0.0); 6];
        let t = build_toeplitz(&y, 2, 0, false).unwrap();
        assert_eq!(nullspace_vector(&t, DEFAULT_RANK_TOL).unwrap_err().rank, 0);
    }

    #[test]
    fn root_grid_evaluation() {
        let mags = eval_poly_on_root_grid(&[c(1.0, 0.0), c(-1.0, 0.0)], 4);
        let expect = [0.0, 2f64.sqrt(), 2.0, 2f64.sqrt()];
        for (a, b) in mags.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        let mags = eval_poly_on_root_grid(&[c(1.0, 0.0), c(0.0, 0.0)], 5);
        assert!(mags.iter().all(|m| (m - 1.0).abs() < 1e-14));

        let r1 = C64::from_polar(1.0, 2.0 * PI * 3.0 / 8.0);
        let r2 = C64::from_polar(1.0, 2.0 * PI * 5.0 / 8.0);
        let h = [c(1.0, 0.0), -(r1 + r2), r1 * r2];
        let mags = eval_poly_on_root_grid(&h, 8);
        for (m, v) in mags.iter().enumerate() {
            if m == 3 || m == 5 {
                assert!(*v < 1e-14);
            } else {
                assert!(*v > 0.1);
            }
        }
    }

    #[test]
    fn weights_of_pure_exponential() {
        let u = C64::from_polar(1.0, 2.0 * PI / 8.0);
        let samples: Vec<C64> = (5..9).map(|n| u.powu(n) * 3.0).collect();
        let fit = solve_weights(&[u], &samples, 5).unwrap();
        assert!((fit.weights[0] - c(3.0, 0.0)).norm() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn weights_reject_duplicate_roots() {
        let one = c(1.0, 0.0);
        assert!(matches!(
            solve_weights(&[one, one], &[one; 4], 0),
            Err(Error::RepeatedRoots(_))
        ));
    }

    #[test]
    fn lu_refuses_singular() {
        let a = DMatrix::<C64>::from_element(3, 3, c(1.0, 0.0));
        assert!(DenseLu::new(&a, 1e12).is_err());
        let id = DMatrix::<C64>::identity(3, 3) * c(2.0, 0.0);
        let lu = DenseLu::new(&id, 1e12).unwrap();
        let x = lu.solve(&[c(2.0, 0.0), c(4.0, 0.0), c(0.0, 2.0)]).unwrap();
        assert!((x[1] - c(2.0, 0.0)).norm() < 1e-15);
    }
}
