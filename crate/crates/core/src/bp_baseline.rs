//! Basis pursuit, `min ||x||_1 s.t. A x = y`, by an ADMM splitting between
//! the affine constraint set and a complex soft-threshold.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, l1_norm, l2_norm, C64};
use crate::sparse::SparseVec;

/// A linear operator with a cheap solve against `A A^H`.
pub trait LinearMap: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64>;
    /// `(A A^H)^{-1} r`.
    fn solve_gram(&self, r: &[C64]) -> Vec<C64>;
    /// `A^H (A A^H)^{-1} r`, the correction of the affine projection.
    fn pseudo_inverse(&self, r: &[C64]) -> Vec<C64> {
        self.apply_adjoint(&self.solve_gram(r))
    }
}

/// Dense complex operator; `A A^H` is factorized once.
pub struct DenseMap {
    a: DMatrix<C64>,
    gram: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DenseMap {
    pub fn new(a: DMatrix<C64>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::EmptyInput);
        }
        let g = &a * a.adjoint();
        let gram = g.lu();
        if !gram.is_invertible() {
            return Err(Error::Singular(
                "operator does not have full row rank".into(),
            ));
        }
        Ok(Self { a, gram })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.a
    }
}

impl LinearMap for DenseMap {
    fn rows(&self) -> usize {
        self.a.nrows()
    }

    fn cols(&self) -> usize {
        self.a.ncols()
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        numerics::mat_vec(&self.a, x)
    }

    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        let yv = nalgebra::DVector::from_column_slice(y);
        self.a.ad_mul(&yv).iter().copied().collect()
    }

    fn solve_gram(&self, r: &[C64]) -> Vec<C64> {
        let rv = nalgebra::DVector::from_column_slice(r);
        self.gram
            .solve(&rv)
            .expect("gram is invertible")
            .iter()
            .copied()
            .collect()
    }
}

/// Real operator acting on complex vectors; the Gaussian segment blocks.
pub struct RealDenseMap {
    a: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    /// `A^T (A A^T)^{-1}`.
    pinv: DMatrix<f64>,
}

impl RealDenseMap {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::EmptyInput);
        }
        let g = &a * a.transpose();
        let chol = g
            .cholesky()
            .ok_or_else(|| Error::Singular("operator does not have full row rank".into()))?;
        let pinv = chol.solve(&a).transpose();
        Ok(Self { a, chol, pinv })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

impl LinearMap for RealDenseMap {
    fn rows(&self) -> usize {
        self.a.nrows()
    }

    fn cols(&self) -> usize {
        self.a.ncols()
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        real_mat_vec(&self.a, x)
    }

    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        self.a
            .column_iter()
            .map(|col| {
                let mut acc = C64::new(0.0, 0.0);
                for (&aij, yi) in col.iter().zip(y) {
                    acc.re += aij * yi.re;
                    acc.im += aij * yi.im;
                }
                acc
            })
            .collect()
    }

    fn solve_gram(&self, r: &[C64]) -> Vec<C64> {
        let re = nalgebra::DVector::from_iterator(r.len(), r.iter().map(|z| z.re));
        let im = nalgebra::DVector::from_iterator(r.len(), r.iter().map(|z| z.im));
        let sr = self.chol.solve(&re);
        let si = self.chol.solve(&im);
        sr.iter()
            .zip(si.iter())
            .map(|(&a, &b)| C64::new(a, b))
            .collect()
    }

    fn pseudo_inverse(&self, r: &[C64]) -> Vec<C64> {
        real_mat_vec(&self.pinv, r)
    }
}

fn real_mat_vec(a: &DMatrix<f64>, x: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); a.nrows()];
    for (col, xj) in a.column_iter().zip(x) {
        for (o, &aij) in out.iter_mut().zip(col.iter()) {
            o.re += aij * xj.re;
            o.im += aij * xj.im;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Options {
    /// Relative primal/dual residual target; also the feasibility target.
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Initial penalty.
    pub rho: f64,
    /// Residual-balancing period for the penalty.
    pub adapt_every: usize,
    pub record_objective: bool,
}

impl Default for L1Options {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            max_iter: 50_000,
            rho: 1.0,
            adapt_every: 100,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct L1SolveResult {
    pub solution: Vec<C64>,
    pub iterations: usize,
    /// `||A x - y||_2` of the returned solution.
    pub primal_residual: f64,
    pub objective: f64,
    pub converged: bool,
    /// Ended by the caller's stopping test rather than by convergence.
    pub stopped_early: bool,
    /// `||x||_1` of the feasible (projected) iterate, when recorded.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

/// Magnitude shrink by `kappa`, phase preserved.
#[inline]
pub fn soft_threshold(v: C64, kappa: f64) -> C64 {
    let m = v.norm();
    if m <= kappa {
        C64::new(0.0, 0.0)
    } else {
        v * ((m - kappa) / m)
    }
}

fn project(op: &dyn LinearMap, v: &[C64], y: &[C64]) -> Vec<C64> {
    let mut r = op.apply(v);
    r.iter_mut().zip(y).for_each(|(a, b)| *a -= b);
    let w = op.pseudo_inverse(&r);
    v.iter().zip(&w).map(|(a, b)| a - b).collect()
}

/// Equality-constrained l1 minimization. Non-convergence is reported through
/// the `converged` flag together with the residuals reached.
pub fn l1_equality_solve(op: &dyn LinearMap, y: &[C64], opts: &L1Options) -> Result<L1SolveResult> {
    l1_equality_solve_until(op, y, opts, 0, |_| false)
}

/// [`l1_equality_solve`] that also stops, setting `stopped_early`, as soon
/// as `done(z)` holds for the split iterate `z`; `done` is polled every `every`
/// iterations (never when `every` is zero).
pub fn l1_equality_solve_until(
    op: &dyn LinearMap,
    y: &[C64],
    opts: &L1Options,
    every: usize,
    mut done: impl FnMut(&[C64]) -> bool,
) -> Result<L1SolveResult> {
    if y.len() != op.rows() {
        return Err(Error::DimensionMismatch {
            expected: op.rows(),
            got: y.len(),
        });
    }
    if !numerics::all_finite(y) {
        return Err(Error::NonFinite("l1 observation"));
    }
    let n = op.cols();
    let ynorm = l2_norm(y);
    let zero = C64::new(0.0, 0.0);
    if ynorm == 0.0 {
        return Ok(L1SolveResult {
            solution: vec![zero; n],
            iterations: 0,
            primal_residual: 0.0,
            objective: 0.0,
            converged: true,
            stopped_early: false,
            objective_trace: Vec::new(),
        });
    }

    let mut rho = opts.rho;
    let mut z = vec![zero; n];
    let mut u = vec![zero; n];
    let mut v = vec![zero; n];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut stopped_early = false;
    let mut iterations = 0;

    for it in 1..=opts.max_iter {
        iterations = it;
        for i in 0..n {
            v[i] = z[i] - u[i];
        }
        let x = project(op, &v, y);
        let mut dz = 0.0;
        let mut r = 0.0;
        let kappa = 1.0 / rho;
        for i in 0..n {
            let znew = soft_threshold(x[i] + u[i], kappa);
            dz += (znew - z[i]).norm_sqr();
            z[i] = znew;
            let d = x[i] - z[i];
            r += d.norm_sqr();
            u[i] += d;
        }
        let r = r.sqrt();
        let s = rho * dz.sqrt();
        if opts.record_objective {
            trace.push(l1_norm(&x));
        }
        if every > 0 && it % every == 0 && done(&z) {
            stopped_early = true;
            break;
        }

        let xz = l2_norm(&x).max(l2_norm(&z)).max(f64::MIN_POSITIVE);
        let dual_scale = (rho * l2_norm(&u)).max(f64::MIN_POSITIVE);
        if r <= opts.feas_tol * xz && s <= opts.feas_tol * dual_scale {
            let mut res = op.apply(&z);
            res.iter_mut().zip(y).for_each(|(a, b)| *a -= b);
            if l2_norm(&res) <= opts.feas_tol * ynorm {
                converged = true;
                break;
            }
        }

        if opts.adapt_every > 0 && it % opts.adapt_every == 0 {
            if r > 10.0 * s {
                rho *= 2.0;
                u.iter_mut().for_each(|w| *w *= 0.5);
            } else if s > 10.0 * r {
                rho *= 0.5;
                u.iter_mut().for_each(|w| *w *= 2.0);
            }
        }
    }

    let mut res = op.apply(&z);
    res.iter_mut().zip(y).for_each(|(a, b)| *a -= b);
    Ok(L1SolveResult {
        objective: l1_norm(&z),
        primal_residual: l2_norm(&res),
        solution: z,
        iterations,
        converged,
        stopped_early,
        objective_trace: trace,
    })
}

/// Support of an l1 solution (entries above `rel * max`) followed by a
/// least-squares refit of `A_S c_S = y` on that support.
pub fn debias(
    op_matrix: &DMatrix<C64>,
    y: &[C64],
    solution: &[C64],
    rel: f64,
) -> Result<(SparseVec, f64)> {
    let max = solution.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let support: Vec<usize> = (0..solution.len())
        .filter(|&i| solution[i].norm() > rel * max)
        .collect();
    if support.is_empty() {
        return Ok((SparseVec::new(), l2_norm(y)));
    }
    let sub = op_matrix.select_columns(support.iter());
    let rhs = nalgebra::DVector::from_column_slice(y);
    let cs = numerics::least_squares(&sub, &rhs)?;
    let fitted = &sub * &cs;
    let resid = fitted
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok((
        SparseVec {
            indices: support,
            values: cs.iter().copied().collect(),
        },
        resid,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shrinkage_keeps_phase() {
        let v = C64::new(3.0, 4.0);
        let s = soft_threshold(v, 1.0);
        assert!((s.norm() - 4.0).abs() < 1e-15);
        assert!((s.arg() - v.arg()).abs() < 1e-15);
        assert_eq!(soft_threshold(v, 5.0), C64::new(0.0, 0.0));
    }

    #[test]
    fn recovers_sparse_vector_from_gaussian_system() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (m, n) = (20, 40);
        let a = DMatrix::<f64>::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
        let op = RealDenseMap::new(a).unwrap();
        let mut x = vec![C64::new(0.0, 0.0); n];
        x[4] = C64::new(1.0, 0.5);
        x[17] = C64::new(-0.7, 0.2);
        let y = op.apply(&x);
        let res = l1_equality_solve(&op, &y, &L1Options::default()).unwrap();
        assert!(res.converged, "{} iterations", res.iterations);
        assert!(res.primal_residual <= 1e-9 * l2_norm(&y));
        for (a, b) in res.solution.iter().zip(&x) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn zero_observation_gives_zero() {
        let op = DenseMap::new(DMatrix::<C64>::identity(3, 3)).unwrap();
        let res = l1_equality_solve(&op, &[C64::new(0.0, 0.0); 3], &L1Options::default()).unwrap();
        assert!(res.converged && res.objective == 0.0);
    }

    #[test]
    fn rank_deficient_operator_is_refused() {
        let a = DMatrix::<f64>::from_element(2, 3, 1.0);
        assert!(RealDenseMap::new(a).is_err());
    }
}
