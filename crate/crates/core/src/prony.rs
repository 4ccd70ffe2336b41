//! Prony's method: recovering a sum of exponentials from `2K` consecutive
//! samples, on the roots-of-unity grid (Fourier atoms) and for bases that
//! factor as `diag(lambda) * Vandermonde(p) * S`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::numerics::{
    self, build_toeplitz, eval_poly_at, inf_norm, least_squares, min_pairwise_distance,
    nullspace_vector, solve_weights, DegenerateReason, DenseLu, UnitRoots, C64,
    MIN_ROOT_SEPARATION,
};
use crate::sparse::SparseVec;

/// Why a window did not produce a model. Rejections are ordinary outcomes
/// of the window search, not errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "reason")]
pub enum Reject {
    /// The Toeplitz system has rank below the model order.
    Degenerate {
        rank: usize,
    },
    /// The nullspace vector cannot be scaled to a leading one.
    Unnormalizable,
    /// Some, but not `expected`, candidate nodes are roots.
    WrongRootCount {
        found: usize,
        expected: usize,
    },
    /// No candidate node is a root.
    OffGrid,
    RepeatedRoots,
    /// A recovered weight is negligible, so the window holds fewer atoms.
    WeightUnderflow,
    /// The fitted model does not reproduce the window.
    BadFit,
    /// More nonzero coefficients than the declared sparsity.
    TooManyAtoms,
    /// The recovered node weights are not in the range of `S`.
    Inconsistent,
}

pub type Fitted<T> = std::result::Result<T, Reject>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PronyModel {
    pub order: usize,
    /// Global index of the first sample of the window.
    pub start: usize,
    pub roots: Vec<C64>,
    pub weights: Vec<C64>,
    /// Grid positions `m` with `roots[k] = exp(j 2 pi m / N)`, ascending.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_indices: Option<Vec<usize>>,
}

impl PronyModel {
    /// `sum_k w_k u_k^n` at the global sample index `n`.
    pub fn sample(&self, n: usize) -> C64 {
        self.roots
            .iter()
            .zip(&self.weights)
            .map(|(u, w)| w * u.powu(n as u32))
            .sum()
    }
}

/// Root table for the Fourier grid, shared across the windows of a search.
#[derive(Debug, Clone)]
pub struct FourierGrid {
    roots: UnitRoots,
}

impl FourierGrid {
    pub fn new(n: usize) -> Self {
        Self {
            roots: UnitRoots::new(n),
        }
    }

    pub fn n(&self) -> usize {
        self.roots.len()
    }

    pub fn roots(&self) -> &UnitRoots {
        &self.roots
    }
}

/// Fits a `K`-term exponential model to the window `y[start..start + 2K]`.
///
/// With `require_grid` the roots must be exactly `K` distinct `N`-th roots
/// of unity (Fourier atoms); otherwise they are found by a companion-matrix
/// eigen solve.
pub fn prony_fit(
    segment: &[C64],
    k: usize,
    n: usize,
    start: usize,
    require_grid: bool,
    tol: &Tolerances,
) -> Result<Fitted<PronyModel>> {
    if require_grid {
        prony_fit_on_grid(segment, k, start, &FourierGrid::new(n), tol)
    } else {
        prony_fit_free(segment, k, start, tol)
    }
}

fn check_segment(segment: &[C64], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::ZeroOrder);
    }
    if segment.len() != 2 * k {
        return Err(Error::DimensionMismatch {
            expected: 2 * k,
            got: segment.len(),
        });
    }
    if !numerics::all_finite(segment) {
        return Err(Error::NonFinite("prony segment"));
    }
    Ok(())
}

fn filter(segment: &[C64], k: usize, tol: &Tolerances) -> Fitted<Vec<C64>> {
    let t = build_toeplitz(segment, k, 0, false).expect("segment length checked");
    match nullspace_vector(&t, tol.rank) {
        Ok(nv) => Ok(nv.h),
        Err(d) => Err(match d.reason {
            DegenerateReason::RankDeficient => Reject::Degenerate { rank: d.rank },
            DegenerateReason::Unnormalizable => Reject::Unnormalizable,
        }),
    }
}

/// Grid variant of [`prony_fit`] with a reusable root table.
pub fn prony_fit_on_grid(
    segment: &[C64],
    k: usize,
    start: usize,
    grid: &FourierGrid,
    tol: &Tolerances,
) -> Result<Fitted<PronyModel>> {
    check_segment(segment, k)?;
    let n = grid.n();
    if k > n {
        return Ok(Err(Reject::WrongRootCount {
            found: n,
            expected: k,
        }));
    }
    let h = match filter(segment, k, tol) {
        Ok(h) => h,
        Err(r) => return Ok(Err(r)),
    };
    let mags = numerics::eval_poly_on_roots(&h, grid.roots());
    let limit = tol.root * (1.0 + h.iter().map(|c| c.norm()).sum::<f64>());
    let picked = match pick_roots(&mags, k, limit) {
        Ok(p) => p,
        Err(r) => return Ok(Err(r)),
    };

    // Vandermonde powers straight from the root table keep the grid exact.
    let w = segment.len();
    let mut v = DMatrix::<C64>::zeros(w, k);
    for (col, &m) in picked.iter().enumerate() {
        for row in 0..w {
            v[(row, col)] = grid.roots().get((m * (start + row)) as i64);
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(segment);
    let weights: Vec<C64> = least_squares(&v, &rhs)?.iter().copied().collect();
    let roots: Vec<C64> = picked.iter().map(|&m| grid.roots().get(m as i64)).collect();

    let scale = inf_norm(segment);
    if weights.iter().any(|a| a.norm() <= tol.amplitude * scale) {
        return Ok(Err(Reject::WeightUnderflow));
    }
    let fitted = &v * nalgebra::DVector::from_column_slice(&weights);
    let misfit = fitted
        .iter()
        .zip(segment)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    if misfit > tol.window_fit * scale {
        return Ok(Err(Reject::BadFit));
    }
    Ok(Ok(PronyModel {
        order: k,
        start,
        roots,
        weights,
        grid_indices: Some(picked),
    }))
}

/// Indices of the `k` smallest magnitudes, all of which must be below `limit`.
fn pick_roots(mags: &[f64], k: usize, limit: f64) -> Fitted<Vec<usize>> {
    let mut order: Vec<usize> = (0..mags.len()).collect();
    order.sort_by(|&a, &b| mags[a].total_cmp(&mags[b]).then(a.cmp(&b)));
    let found = order[..k].iter().filter(|&&m| mags[m] <= limit).count();
    if found == 0 {
        return Err(Reject::OffGrid);
    }
    if found < k {
        return Err(Reject::WrongRootCount { found, expected: k });
    }
    let mut picked = order[..k].to_vec();
    picked.sort_unstable();
    Ok(picked)
}

fn prony_fit_free(
    segment: &[C64],
    k: usize,
    start: usize,
    tol: &Tolerances,
) -> Result<Fitted<PronyModel>> {
    check_segment(segment, k)?;
    let h = match filter(segment, k, tol) {
        Ok(h) => h,
        Err(r) => return Ok(Err(r)),
    };
    let roots = polynomial_roots(&h)?;
    if min_pairwise_distance(&roots) < MIN_ROOT_SEPARATION {
        return Ok(Err(Reject::RepeatedRoots));
    }
    let fit = solve_weights(&roots, segment, start)?;
    let scale = inf_norm(segment);
    if fit
        .weights
        .iter()
        .any(|a| a.norm() <= tol.amplitude * scale)
    {
        return Ok(Err(Reject::WeightUnderflow));
    }
    if fit.residual > tol.window_fit * scale {
        return Ok(Err(Reject::BadFit));
    }
    Ok(Ok(PronyModel {
        order: k,
        start,
        roots,
        weights: fit.weights,
        grid_indices: None,
    }))
}

/// Roots of `sum_i h[i] x^(K-i)` with `h[0] = 1`, via the companion matrix.
fn polynomial_roots(h: &[C64]) -> Result<Vec<C64>> {
    let k = h.len() - 1;
    let mut companion = DMatrix::<C64>::zeros(k, k);
    for j in 0..k {
        companion[(0, j)] = -h[j + 1];
    }
    for i in 1..k {
        companion[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    let schur = companion.schur();
    let eig = schur
        .eigenvalues()
        .ok_or_else(|| Error::Singular("companion eigenvalues did not converge".into()))?;
    Ok(eig.iter().copied().collect())
}

/// Sparse Fourier coefficients `c[m_k] = alpha_k * sqrt(N)` of a grid model.
pub fn fourier_coeffs_from_model(model: &PronyModel, n: usize) -> Result<SparseVec> {
    let grid = model
        .grid_indices
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("model has no grid indices".into()))?;
    let s = (n as f64).sqrt();
    Ok(SparseVec::from_pairs(
        grid.iter()
            .zip(&model.weights)
            .map(|(&m, &a)| (m, a * s))
            .collect(),
    ))
}

/// A basis of the form `diag(lambda) * V * S` with `V[n][m] = p_m^n` and an
/// `M x N` matrix `S` whose columns carry at most `D` nonzeros.
#[derive(Debug, Clone)]
pub struct FactorizedBasis {
    n: usize,
    lambda: Vec<C64>,
    nodes: Vec<C64>,
    /// Column `j` of `S` as `(row, value)` pairs.
    s_columns: Vec<Vec<(usize, C64)>>,
    d: usize,
    /// The assembled `N x N` basis matrix.
    dense: DMatrix<C64>,
    inverse: DenseLu,
    normal: DenseLu,
}

impl FactorizedBasis {
    pub fn new(
        lambda: Vec<C64>,
        nodes: Vec<C64>,
        s_columns: Vec<Vec<(usize, C64)>>,
    ) -> Result<Self> {
        let n = lambda.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if s_columns.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s_columns.len(),
            });
        }
        if lambda.iter().any(|l| l.norm() == 0.0) {
            return Err(Error::InvalidParameter(
                "diagonal factor has a zero entry".into(),
            ));
        }
        let m = nodes.len();
        if min_pairwise_distance(&nodes) < MIN_ROOT_SEPARATION {
            return Err(Error::InvalidParameter(
                "Vandermonde nodes are not distinct".into(),
            ));
        }
        let mut d = 0;
        for col in &s_columns {
            if col.iter().any(|&(r, _)| r >= m) {
                return Err(Error::InvalidParameter(
                    "S row index outside the node set".into(),
                ));
            }
            d = d.max(col.iter().filter(|(_, v)| v.norm() != 0.0).count());
        }
        if d == 0 {
            return Err(Error::InvalidParameter("S has no nonzero entries".into()));
        }

        let mut dense = DMatrix::<C64>::zeros(n, n);
        for (j, col) in s_columns.iter().enumerate() {
            for &(r, s) in col {
                let p = nodes[r];
                let mut pw = C64::new(1.0, 0.0);
                for i in 0..n {
                    dense[(i, j)] += lambda[i] * pw * s;
                    pw *= p;
                }
            }
        }
        let inverse = DenseLu::new(&dense, 1e12)?;

        let mut gram = DMatrix::<C64>::zeros(n, n);
        for (a, ca) in s_columns.iter().enumerate() {
            for (b, cb) in s_columns.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &(ra, va) in ca {
                    for &(rb, vb) in cb {
                        if ra == rb {
                            acc += va.conj() * vb;
                        }
                    }
                }
                gram[(a, b)] = acc;
            }
        }
        let normal = DenseLu::new(&gram, 1e12)?;
        Ok(Self {
            n,
            lambda,
            nodes,
            s_columns,
            d,
            dense,
            inverse,
            normal,
        })
    }

    /// The orthonormal DCT written as `diag(b_n / sqrt(2N)) * V * ([1, 1]^T kron I_N)`
    /// with `p_m = exp(-j pi (m + 1/2) / N)` for `m < N` and
    /// `p_m = -exp(j pi (m + 1/2) / N)` for `m >= N`.
    pub fn dct(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let nf = n as f64;
        let lambda = (0..n)
            .map(|i| {
                let b = if i == 0 { 1.0 / 2f64.sqrt() } else { 1.0 };
                C64::new(b / (2.0 * nf).sqrt(), 0.0)
            })
            .collect();
        let nodes = (0..2 * n)
            .map(|m| {
                let theta = PI * (m as f64 + 0.5) / nf;
                if m < n {
                    C64::from_polar(1.0, -theta)
                } else {
                    -C64::from_polar(1.0, theta)
                }
            })
            .collect();
        let one = C64::new(1.0, 0.0);
        let s_columns = (0..n).map(|j| vec![(j, one), (j + n, one)]).collect();
        Self::new(lambda, nodes, s_columns)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn column_sparsity(&self) -> usize {
        self.d
    }

    pub fn nodes(&self) -> &[C64] {
        &self.nodes
    }

    pub fn lambda(&self) -> &[C64] {
        &self.lambda
    }

    pub fn s_columns(&self) -> &[Vec<(usize, C64)>] {
        &self.s_columns
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.dense
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.dense[(row, col)]
    }

    /// `Psi^{-1} y`.
    pub fn invert(&self, y: &[C64]) -> Result<Vec<C64>> {
        self.inverse.solve(y)
    }

    /// `(S^H S)^{-1} S^H x`.
    fn coefficients_from_nodes(&self, x: &[C64]) -> Result<Vec<C64>> {
        let sx: Vec<C64> = self
            .s_columns
            .iter()
            .map(|col| col.iter().map(|&(r, v)| v.conj() * x[r]).sum())
            .collect();
        self.normal.solve(&sx)
    }

    fn apply_s(&self, c: &[C64]) -> Vec<C64> {
        let mut x = vec![C64::new(0.0, 0.0); self.nodes.len()];
        for (col, &cj) in self.s_columns.iter().zip(c) {
            for &(r, v) in col {
                x[r] += v * cj;
            }
        }
        x
    }
}

/// Recovers a `K`-sparse `c` from `y[start..start + len]` where `y = Psi c`
/// and `Psi` is factorized. Needs `len >= 2DK`; when `2DK >= N` the whole
/// signal must be supplied and `c` is obtained by direct inversion.
pub fn generalized_prony_fit(
    segment: &[C64],
    start: usize,
    basis: &FactorizedBasis,
    k: usize,
    tol: &Tolerances,
) -> Result<Fitted<SparseVec>> {
    if k == 0 {
        return Err(Error::ZeroOrder);
    }
    let n = basis.n;
    let order = basis.d * k;
    if !numerics::all_finite(segment) {
        return Err(Error::NonFinite("prony segment"));
    }
    if 2 * order >= n {
        if start != 0 || segment.len() < n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: segment.len(),
            });
        }
        let c = basis.invert(&segment[..n])?;
        let cmax = c.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        return Ok(Ok(SparseVec::from_dense(&c, tol.zero * cmax)));
    }
    if segment.len() < 2 * order {
        return Err(Error::DimensionMismatch {
            expected: 2 * order,
            got: segment.len(),
        });
    }
    if start + segment.len() > n {
        return Err(Error::WindowOutOfRange {
            start,
            end: start + segment.len(),
            len: n,
        });
    }

    let z: Vec<C64> = segment
        .iter()
        .enumerate()
        .map(|(i, &y)| y / basis.lambda[start + i])
        .collect();

    // Numerical rank can fall short of the true node count when nodes
    // cluster. The full-order fit is then retried loosely (see `fit_nodes`)
    // before the order is lowered to the rank.
    // Otherwise only an upper bound on the active count is needed: a
    // deficient rank reveals the true count and the fit is repeated there.
    let mut active = order;
    loop {
        match fit_nodes(&z, segment, start, basis, k, active, tol, false)? {
            Err(Reject::Degenerate { rank }) if rank > 0 && rank < active => {
                if active == order {
                    if let Ok(c) = fit_nodes(&z, segment, start, basis, k, active, tol, true)? {
                        return Ok(Ok(c));
                    }
                }
                active = rank;
            }
            other => return Ok(other),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn fit_nodes(
    z: &[C64],
    segment: &[C64],
    start: usize,
    basis: &FactorizedBasis,
    k: usize,
    active: usize,
    tol: &Tolerances,
    loose: bool,
) -> Result<Fitted<SparseVec>> {
    // Loose: no rank cut and no root threshold; the `k` atoms whose nodes
    // best annihilate the filter are fitted to the window directly, since
    // node weights of clustered nodes are unreliable.
    let rank_tol = if loose { 0.0 } else { tol.rank };
    let h = match filter(
        &z[..2 * active],
        active,
        &Tolerances {
            rank: rank_tol,
            ..*tol
        },
    ) {
        Ok(h) => h,
        Err(r) => return Ok(Err(r)),
    };

    let values = eval_poly_at(&h, &basis.nodes);
    let hsum = 1.0 + h.iter().map(|c| c.norm()).sum::<f64>();
    let normalized: Vec<f64> = values
        .iter()
        .zip(&basis.nodes)
        .map(|(v, p)| v.norm() / p.norm().max(1.0).powi(active as i32))
        .collect();
    if loose {
        // Atoms ranked by the largest filter value over their nodes.
        let score: Vec<f64> = basis
            .s_columns
            .iter()
            .map(|col| col.iter().fold(0.0f64, |m, &(r, _)| m.max(normalized[r])))
            .collect();
        let mut atoms: Vec<usize> = (0..basis.n).collect();
        atoms.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
        atoms.truncate(k);
        atoms.sort_unstable();
        let a = DMatrix::from_fn(segment.len(), atoms.len(), |i, j| {
            basis.entry(start + i, atoms[j])
        });
        let c = least_squares(&a, &nalgebra::DVector::from_column_slice(segment))?;
        let coeffs = SparseVec {
            indices: atoms,
            values: c.iter().copied().collect(),
        };
        return Ok(check_window(segment, start, basis, coeffs, tol));
    }
    let picked = match pick_roots(&normalized, active, tol.root * hsum) {
        Ok(p) => p,
        Err(r) => return Ok(Err(r)),
    };
    let roots: Vec<C64> = picked.iter().map(|&m| basis.nodes[m]).collect();
    let fit = match solve_weights(&roots, z, start) {
        Ok(f) => f,
        Err(Error::RepeatedRoots(_)) => return Ok(Err(Reject::RepeatedRoots)),
        Err(e) => return Err(e),
    };
    let zscale = inf_norm(z);
    if fit
        .weights
        .iter()
        .any(|a| a.norm() <= tol.amplitude * zscale)
    {
        return Ok(Err(Reject::WeightUnderflow));
    }

    let mut x = vec![C64::new(0.0, 0.0); basis.nodes.len()];
    for (&m, &w) in picked.iter().zip(&fit.weights) {
        x[m] = w;
    }
    let c = basis.coefficients_from_nodes(&x)?;
    let sx = basis.apply_s(&c);
    let xscale = inf_norm(&x);
    let inconsistency = sx
        .iter()
        .zip(&x)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    if inconsistency > tol.window_fit * xscale {
        return Ok(Err(Reject::Inconsistent));
    }
    let cmax = c.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let coeffs = SparseVec::from_dense(&c, tol.amplitude * cmax);
    if coeffs.nnz() > k {
        return Ok(Err(Reject::TooManyAtoms));
    }

    Ok(check_window(segment, start, basis, coeffs, tol))
}

fn check_window(
    segment: &[C64],
    start: usize,
    basis: &FactorizedBasis,
    coeffs: SparseVec,
    tol: &Tolerances,
) -> Fitted<SparseVec> {
    let scale = inf_norm(segment);
    if coeffs
        .values
        .iter()
        .any(|c| c.norm() <= tol.amplitude * scale)
    {
        return Err(Reject::WeightUnderflow);
    }
    let misfit = segment.iter().enumerate().fold(0.0f64, |m, (i, &y)| {
        let row = start + i;
        let v: C64 = coeffs.iter().map(|(j, cj)| basis.entry(row, j) * cj).sum();
        m.max((v - y).norm())
    });
    if misfit > tol.window_fit * scale {
        return Err(Reject::BadFit);
    }
    Ok(coeffs)
}
