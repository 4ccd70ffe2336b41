//! Bases and two-basis dictionaries.
//!
//! A basis is either *local* (every atom is supported on a short interval of
//! length at most `L`) or *segment-recoverable* (a `K`-sparse coefficient
//! vector can be recovered from `S(K)` consecutive samples), or both.

use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bp_baseline::{self, L1Options, RealDenseMap};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::numerics::{self, l2_norm, DenseLu, C64};
use crate::prony::{self, FactorizedBasis, Fitted, FourierGrid, Reject};
use crate::sparse::SparseVec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BasisKind {
    Fourier,
    Canonical,
    Dct,
    LocalFourierBlock { block: usize },
    Banded { bandwidth: usize, seed: u64 },
    Factorized,
    RandomGaussian { seed: u64 },
}

/// Constants of the Gaussian sampling rule
/// `S(K) = ceil(max(p, min(N, c1 K ln(N / K))))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSampling {
    pub c1: f64,
    pub p_floor: f64,
}

impl GaussianSampling {
    /// `p(N) = 3 ln N`.
    pub fn default_floor(n: usize) -> f64 {
        3.0 * (n as f64).ln()
    }

    pub fn samples(&self, n: usize, k: usize) -> usize {
        let nf = n as f64;
        let growth = if k == 0 || k >= n {
            if k == 0 {
                0.0
            } else {
                nf
            }
        } else {
            self.c1 * k as f64 * (nf / k as f64).ln()
        };
        let s = self.p_floor.max(growth.min(nf)).ceil();
        (s.max(1.0) as usize).min(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingRule {
    /// `S(K) = per_atom * K`.
    Linear {
        per_atom: usize,
    },
    Gaussian(GaussianSampling),
}

/// Segment-recovery capability: `S(K)` and whether windows wrap modulo `N`
/// (`tau = 0`) or must fit inside the signal (`tau = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentCapability {
    pub tau: usize,
    pub rule: SamplingRule,
}

impl SegmentCapability {
    /// May exceed `N` for the linear rules; such a `K` is only handled by
    /// direct inversion of the full signal.
    pub fn sampling_factor(&self, n: usize, k: usize) -> usize {
        match self.rule {
            SamplingRule::Linear { per_atom } => per_atom * k,
            SamplingRule::Gaussian(g) => g.samples(n, k),
        }
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Fourier(FourierGrid),
    Canonical,
    LocalFourier {
        block: usize,
        roots: numerics::UnitRoots,
    },
    Dense {
        matrix: DMatrix<C64>,
        lu: DenseLu,
    },
    Factorized(FactorizedBasis),
    Gaussian {
        real: DMatrix<f64>,
        matrix: DMatrix<C64>,
        lu: DenseLu,
    },
}

/// An invertible `N x N` basis with its capabilities.
#[derive(Debug, Clone)]
pub struct Basis {
    kind: BasisKind,
    n: usize,
    repr: Repr,
    support_length: usize,
    local: Option<usize>,
    segment: Option<SegmentCapability>,
}

/// Length of the shortest interval covering the nonzeros of `v`.
pub fn support_length(v: &[C64]) -> usize {
    let first = v.iter().position(|z| z.norm() != 0.0);
    let last = v.iter().rposition(|z| z.norm() != 0.0);
    match (first, last) {
        (Some(a), Some(b)) => b - a + 1,
        _ => 0,
    }
}

impl Basis {
    fn assemble(
        kind: BasisKind,
        n: usize,
        repr: Repr,
        local: Option<usize>,
        segment: Option<SegmentCapability>,
    ) -> Result<Self> {
        let mut b = Self {
            kind,
            n,
            repr,
            support_length: 0,
            local,
            segment,
        };
        b.support_length = (0..n)
            .map(|j| support_length(&b.atom(j)))
            .max()
            .unwrap_or(0);
        if let Some(l) = local {
            if l != b.support_length {
                return Err(Error::Invariant(format!(
                    "declared support length {l} but atoms span up to {}",
                    b.support_length
                )));
            }
        }
        Ok(b)
    }

    fn check_n(n: usize) -> Result<()> {
        if n == 0 {
            Err(Error::EmptyInput)
        } else {
            Ok(())
        }
    }

    pub fn fourier(n: usize) -> Result<Self> {
        Self::check_n(n)?;
        let seg = SegmentCapability {
            tau: 0,
            rule: SamplingRule::Linear { per_atom: 2 },
        };
        Self::assemble(
            BasisKind::Fourier,
            n,
            Repr::Fourier(FourierGrid::new(n)),
            None,
            Some(seg),
        )
    }

    pub fn canonical(n: usize) -> Result<Self> {
        Self::check_n(n)?;
        Self::assemble(BasisKind::Canonical, n, Repr::Canonical, Some(1), None)
    }

    pub fn dct(n: usize) -> Result<Self> {
        Self::check_n(n)?;
        let f = FactorizedBasis::dct(n)?;
        let seg = SegmentCapability {
            tau: 1,
            rule: SamplingRule::Linear { per_atom: 4 },
        };
        Self::assemble(BasisKind::Dct, n, Repr::Factorized(f), None, Some(seg))
    }

    /// Block-diagonal basis of `N / L` unitary DFTs of size `L`.
    pub fn local_fourier(n: usize, block: usize) -> Result<Self> {
        Self::check_n(n)?;
        if block == 0 || !n.is_multiple_of(block) {
            return Err(Error::InvalidParameter(format!(
                "block length {block} must divide N = {n}"
            )));
        }
        let repr = Repr::LocalFourier {
            block,
            roots: numerics::UnitRoots::new(block),
        };
        Self::assemble(
            BasisKind::LocalFourierBlock { block },
            n,
            repr,
            Some(block),
            None,
        )
    }

    /// Lower-banded basis: atom `j` is supported on `j..j + L` (clipped at
    /// `N`), unit diagonal and small random off-diagonal entries.
    pub fn banded(n: usize, bandwidth: usize, seed: u64) -> Result<Self> {
        Self::check_n(n)?;
        if bandwidth == 0 || bandwidth > n {
            return Err(Error::InvalidParameter(format!(
                "bandwidth {bandwidth} outside 1..={n}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 0.5 / bandwidth as f64;
        let mut matrix = DMatrix::<C64>::zeros(n, n);
        for j in 0..n {
            matrix[(j, j)] = C64::new(1.0, 0.0);
            for i in j + 1..(j + bandwidth).min(n) {
                let re: f64 =
                    rng.random_range(0.25..1.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
                let im: f64 = rng.random_range(-1.0..1.0);
                matrix[(i, j)] = C64::new(re, im) * scale;
            }
        }
        let lu = DenseLu::new(&matrix, 1e12)?;
        let kind = BasisKind::Banded { bandwidth, seed };
        Self::assemble(kind, n, Repr::Dense { matrix, lu }, Some(bandwidth), None)
    }

    pub fn factorized(f: FactorizedBasis) -> Result<Self> {
        let n = f.n();
        let seg = SegmentCapability {
            tau: 1,
            rule: SamplingRule::Linear {
                per_atom: 2 * f.column_sparsity(),
            },
        };
        Self::assemble(
            BasisKind::Factorized,
            n,
            Repr::Factorized(f),
            None,
            Some(seg),
        )
    }

    /// i.i.d. standard normal entries from a ChaCha8 stream seeded by `seed`.
    pub fn random_gaussian(n: usize, seed: u64, sampling: GaussianSampling) -> Result<Self> {
        Self::check_n(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut real = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                real[(i, j)] = rng.sample(StandardNormal);
            }
        }
        let matrix = real.map(|v| C64::new(v, 0.0));
        let lu = DenseLu::new(&matrix, 1e12)?;
        let seg = SegmentCapability {
            tau: 0,
            rule: SamplingRule::Gaussian(sampling),
        };
        Self::assemble(
            BasisKind::RandomGaussian { seed },
            n,
            Repr::Gaussian { real, matrix, lu },
            None,
            Some(seg),
        )
    }

    /// Rebuilds a basis from its descriptor. Gaussian bases need their
    /// sampling constants; factorized bases cannot be rebuilt from a kind.
    pub fn from_kind(
        n: usize,
        kind: BasisKind,
        sampling: Option<GaussianSampling>,
    ) -> Result<Self> {
        match kind {
            BasisKind::Fourier => Self::fourier(n),
            BasisKind::Canonical => Self::canonical(n),
            BasisKind::Dct => Self::dct(n),
            BasisKind::LocalFourierBlock { block } => Self::local_fourier(n, block),
            BasisKind::Banded { bandwidth, seed } => Self::banded(n, bandwidth, seed),
            BasisKind::RandomGaussian { seed } => {
                let sampling = sampling.ok_or_else(|| {
                    Error::InvalidParameter("a Gaussian basis needs sampling constants".into())
                })?;
                Self::random_gaussian(n, seed, sampling)
            }
            BasisKind::Factorized => Err(Error::InvalidParameter(
                "a factorized basis cannot be rebuilt from its kind".into(),
            )),
        }
    }

    /// Same basis with another Gaussian sampling rule.
    pub fn with_sampling(mut self, sampling: GaussianSampling) -> Result<Self> {
        match (&self.repr, self.segment.as_mut()) {
            (Repr::Gaussian { .. }, Some(seg)) => {
                seg.rule = SamplingRule::Gaussian(sampling);
                Ok(self)
            }
            _ => Err(Error::InvalidParameter(
                "sampling constants apply to Gaussian bases only".into(),
            )),
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Maximum support length over all atoms, measured at construction.
    pub fn support_length(&self) -> usize {
        self.support_length
    }

    /// `L` for local bases.
    pub fn local_length(&self) -> Option<usize> {
        self.local
    }

    pub fn segment(&self) -> Option<&SegmentCapability> {
        self.segment.as_ref()
    }

    pub fn sampling_factor(&self, k: usize) -> Option<usize> {
        self.segment.map(|s| s.sampling_factor(self.n, k))
    }

    pub fn tau(&self) -> Option<usize> {
        self.segment.map(|s| s.tau)
    }

    pub fn gaussian_sampling(&self) -> Option<GaussianSampling> {
        match self.segment.map(|s| s.rule) {
            Some(SamplingRule::Gaussian(g)) => Some(g),
            _ => None,
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        match &self.repr {
            Repr::Fourier(grid) => grid.roots().get((i * j) as i64) / (self.n as f64).sqrt(),
            Repr::Canonical => {
                if i == j {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            Repr::LocalFourier { block, roots } => {
                if i / block != j / block {
                    C64::new(0.0, 0.0)
                } else {
                    roots.get(((i % block) * (j % block)) as i64) / (*block as f64).sqrt()
                }
            }
            Repr::Dense { matrix, .. } | Repr::Gaussian { matrix, .. } => matrix[(i, j)],
            Repr::Factorized(f) => f.entry(i, j),
        }
    }

    pub fn atom(&self, j: usize) -> Vec<C64> {
        (0..self.n).map(|i| self.entry(i, j)).collect()
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.entry(i, j))
    }

    fn check_len(&self, v: &[C64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `Phi x`.
    pub fn synthesize(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.check_len(x)?;
        Ok(match &self.repr {
            Repr::Fourier(_) => numerics::dft(x, true)?,
            Repr::Canonical => x.to_vec(),
            Repr::LocalFourier { block, .. } => {
                let mut out = Vec::with_capacity(self.n);
                for chunk in x.chunks(*block) {
                    out.extend(numerics::dft(chunk, true)?);
                }
                out
            }
            Repr::Dense { matrix, .. } | Repr::Gaussian { matrix, .. } => {
                numerics::mat_vec(matrix, x)
            }
            Repr::Factorized(f) => numerics::mat_vec(f.matrix(), x),
        })
    }

    /// `Phi x` for sparse `x`, in `O(N nnz)`.
    pub fn synthesize_sparse(&self, x: &SparseVec) -> Result<Vec<C64>> {
        if let Some(&j) = x.indices.iter().find(|&&j| j >= self.n) {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: j + 1,
            });
        }
        let mut out = vec![C64::new(0.0, 0.0); self.n];
        for (j, c) in x.iter() {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.entry(i, j) * c;
            }
        }
        Ok(out)
    }

    /// `Phi^{-1} y`.
    pub fn analyze(&self, y: &[C64]) -> Result<Vec<C64>> {
        self.check_len(y)?;
        match &self.repr {
            Repr::Fourier(_) => numerics::dft(y, false),
            Repr::Canonical => Ok(y.to_vec()),
            Repr::LocalFourier { block, .. } => {
                let mut out = Vec::with_capacity(self.n);
                for chunk in y.chunks(*block) {
                    out.extend(numerics::dft(chunk, false)?);
                }
                Ok(out)
            }
            Repr::Dense { lu, .. } | Repr::Gaussian { lu, .. } => lu.solve(y),
            Repr::Factorized(f) => f.invert(y),
        }
    }

    /// Recovers a coefficient vector with at most `k` nonzeros from the
    /// samples `y[start..start + segment.len()]` (indices modulo `N` when
    /// `tau = 0`). A segment of at least `N` samples is inverted directly.
    pub fn recover_segment(
        &self,
        segment: &[C64],
        start: usize,
        k: usize,
        tol: &Tolerances,
    ) -> Result<Fitted<SparseVec>> {
        let cap = self
            .segment
            .ok_or_else(|| Error::InvalidParameter("basis is not segment-recoverable".into()))?;
        if k == 0 {
            return Err(Error::ZeroOrder);
        }
        if start >= self.n {
            return Err(Error::WindowOutOfRange {
                start,
                end: start + segment.len(),
                len: self.n,
            });
        }
        let need = cap.sampling_factor(self.n, k).min(self.n);
        if segment.len() < need {
            return Err(Error::DimensionMismatch {
                expected: need,
                got: segment.len(),
            });
        }
        if !numerics::all_finite(segment) {
            return Err(Error::NonFinite("segment"));
        }
        if cap.tau == 1 && start + segment.len() > self.n {
            return Err(Error::WindowOutOfRange {
                start,
                end: start + segment.len(),
                len: self.n,
            });
        }

        if segment.len() >= self.n && !matches!(self.repr, Repr::Factorized(_)) {
            let mut y = vec![C64::new(0.0, 0.0); self.n];
            for (i, &v) in segment.iter().take(self.n).enumerate() {
                y[(start + i) % self.n] = v;
            }
            let c = self.analyze(&y)?;
            let cmax = c.iter().fold(0.0f64, |m, v| m.max(v.norm()));
            let c = SparseVec::from_dense(&c, tol.zero * cmax);
            return Ok(if c.nnz() > k {
                Err(Reject::TooManyAtoms)
            } else {
                Ok(c)
            });
        }

        match &self.repr {
            Repr::Fourier(grid) => {
                let seg = &segment[..2 * k];
                // Clustered atoms at high order can look rank deficient; the
                // grid root test and window fit still validate a full-order fit.
                let model = match prony::prony_fit_on_grid(seg, k, start, grid, tol)? {
                    Ok(m) => m,
                    Err(Reject::Degenerate { .. }) => {
                        let loose = Tolerances { rank: 0.0, ..*tol };
                        match prony::prony_fit_on_grid(seg, k, start, grid, &loose)? {
                            Ok(m) => m,
                            Err(r) => return Ok(Err(r)),
                        }
                    }
                    Err(r) => return Ok(Err(r)),
                };
                Ok(Ok(prony::fourier_coeffs_from_model(&model, self.n)?))
            }
            Repr::Factorized(f) => {
                let c = prony::generalized_prony_fit(segment, start, f, k, tol)?;
                Ok(c.and_then(|c| {
                    if c.nnz() > k {
                        Err(Reject::TooManyAtoms)
                    } else {
                        Ok(c)
                    }
                }))
            }
            Repr::Gaussian { real, .. } => gaussian_segment(real, segment, start, k),
            _ => Err(Error::InvalidParameter(
                "basis is not segment-recoverable".into(),
            )),
        }
    }
}

/// Options of the l1 solve behind Gaussian segment recovery.
pub fn segment_l1_options() -> L1Options {
    L1Options {
        feas_tol: 1e-9,
        max_iter: 200,
        rho: 1.0,
        adapt_every: 50,
        record_objective: false,
    }
}

/// Whether `segment` lies in the span of the columns `support` of the real
/// matrix `a`, to `1e-6 ||segment||`. Normal equations: the support is tiny.
fn fits_exactly(a: &DMatrix<f64>, segment: &[C64], support: &[usize]) -> bool {
    let sub = a.select_columns(support.iter());
    let Some(chol) = sub.tr_mul(&sub).cholesky() else {
        return false;
    };
    let re = nalgebra::DVector::from_iterator(segment.len(), segment.iter().map(|z| z.re));
    let im = nalgebra::DVector::from_iterator(segment.len(), segment.iter().map(|z| z.im));
    let cr = chol.solve(&sub.tr_mul(&re));
    let ci = chol.solve(&sub.tr_mul(&im));
    let resid = ((&sub * cr - re).norm_squared() + (&sub * ci - im).norm_squared()).sqrt();
    resid <= 1e-6 * l2_norm(segment)
}

// The l1 iterate is polled: once its `k` largest entries carry an exact fit,
// that fit is the answer, because from `S > 2k` generic rows a `k`-sparse
// representation is unique. Otherwise the final iterate is thresholded at
// `1e-6 max` and debiased.
fn gaussian_segment(
    real: &DMatrix<f64>,
    segment: &[C64],
    start: usize,
    k: usize,
) -> Result<Fitted<SparseVec>> {
    let n = real.nrows();
    let s = segment.len();
    let rows = DMatrix::<f64>::from_fn(s, n, |i, j| real[((start + i) % n, j)]);
    let op = match RealDenseMap::new(rows) {
        Ok(op) => op,
        Err(Error::Singular(_)) => return Ok(Err(Reject::Degenerate { rank: 0 })),
        Err(e) => return Err(e),
    };
    let mut found: Option<Vec<usize>> = None;
    let mut last: Vec<usize> = Vec::new();
    let sol = bp_baseline::l1_equality_solve_until(&op, segment, &segment_l1_options(), 5, |z| {
        if 2 * k >= s {
            return false;
        }
        let mut order: Vec<usize> = (0..z.len()).filter(|&i| z[i].norm() > 0.0).collect();
        order.sort_by(|&a, &b| z[b].norm().total_cmp(&z[a].norm()).then(a.cmp(&b)));
        order.truncate(k);
        order.sort_unstable();
        if order.is_empty() || order == last {
            return false;
        }
        last = order;
        if fits_exactly(op.matrix(), segment, &last) {
            found = Some(last.clone());
            return true;
        }
        false
    })?;
    let complex = op.matrix().map(|v| C64::new(v, 0.0));
    if let Some(support) = found {
        let mut z = vec![C64::new(0.0, 0.0); n];
        for &i in &support {
            z[i] = C64::new(1.0, 0.0);
        }
        let (c, _) = bp_baseline::debias(&complex, segment, &z, 0.5)?;
        return Ok(Ok(c));
    }

    let max = sol.solution.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if max == 0.0 {
        return Ok(Err(Reject::WeightUnderflow));
    }
    let count = sol
        .solution
        .iter()
        .filter(|v| v.norm() > 1e-6 * max)
        .count();
    if count > k {
        return Ok(Err(Reject::TooManyAtoms));
    }
    let (c, resid) = bp_baseline::debias(&complex, segment, &sol.solution, 1e-6)?;
    if resid > 1e-6 * l2_norm(segment) {
        return Ok(Err(Reject::BadFit));
    }
    Ok(Ok(c))
}

/// Invertible `N x N` matrix applied to both bases of a dictionary.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    matrix: DMatrix<C64>,
    lu: DenseLu,
}

impl Preconditioner {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let lu = DenseLu::new(&matrix, 1e12)?;
        Ok(Self { matrix, lu })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn apply(&self, y: &[C64]) -> Vec<C64> {
        numerics::mat_vec(&self.matrix, y)
    }

    /// `A^{-1} y`.
    pub fn solve(&self, y: &[C64]) -> Result<Vec<C64>> {
        self.lu.solve(y)
    }
}

/// `D = [Psi, Phi]`, optionally premultiplied by a preconditioner `A`.
#[derive(Debug, Clone)]
pub struct Dictionary {
    psi: Basis,
    phi: Basis,
    precondition: Option<Preconditioner>,
}

impl Dictionary {
    pub fn new(psi: Basis, phi: Basis) -> Result<Self> {
        if psi.n() != phi.n() {
            return Err(Error::DimensionMismatch {
                expected: psi.n(),
                got: phi.n(),
            });
        }
        Ok(Self {
            psi,
            phi,
            precondition: None,
        })
    }

    pub fn fourier_canonical(n: usize) -> Result<Self> {
        Self::new(Basis::fourier(n)?, Basis::canonical(n)?)
    }

    pub fn fourier_local_fourier(n: usize, block: usize) -> Result<Self> {
        Self::new(Basis::fourier(n)?, Basis::local_fourier(n, block)?)
    }

    pub fn dct_canonical(n: usize) -> Result<Self> {
        Self::new(Basis::dct(n)?, Basis::canonical(n)?)
    }

    pub fn gaussian_canonical(n: usize, seed: u64, sampling: GaussianSampling) -> Result<Self> {
        Self::new(
            Basis::random_gaussian(n, seed, sampling)?,
            Basis::canonical(n)?,
        )
    }

    pub fn with_preconditioner(mut self, a: Preconditioner) -> Result<Self> {
        if a.matrix().nrows() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: a.matrix().nrows(),
            });
        }
        self.precondition = Some(a);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.psi.n()
    }

    pub fn psi(&self) -> &Basis {
        &self.psi
    }

    pub fn phi(&self) -> &Basis {
        &self.phi
    }

    pub fn preconditioner(&self) -> Option<&Preconditioner> {
        self.precondition.as_ref()
    }

    /// `y = Psi x_p + Phi x_q`, then `A y` when preconditioned.
    pub fn synthesize(&self, xp: &SparseVec, xq: &SparseVec) -> Result<Vec<C64>> {
        let mut y = self.psi.synthesize_sparse(xp)?;
        let local = self.phi.synthesize_sparse(xq)?;
        y.iter_mut().zip(&local).for_each(|(a, b)| *a += b);
        Ok(match &self.precondition {
            Some(a) => a.apply(&y),
            None => y,
        })
    }

    /// The `N x 2N` matrix of the effective dictionary.
    pub fn to_matrix(&self) -> DMatrix<C64> {
        let n = self.n();
        let mut d = DMatrix::<C64>::zeros(n, 2 * n);
        d.columns_mut(0, n).copy_from(&self.psi.to_matrix());
        d.columns_mut(n, n).copy_from(&self.phi.to_matrix());
        match &self.precondition {
            Some(a) => a.matrix() * d,
            None => d,
        }
    }

    /// Largest normalized inner product between two distinct columns.
    pub fn mutual_coherence(&self) -> f64 {
        let d = self.to_matrix();
        let norms: Vec<f64> = d.column_iter().map(|c| c.norm()).collect();
        let gram = d.ad_mul(&d);
        let mut mu = 0.0f64;
        for j in 0..gram.ncols() {
            for i in 0..j {
                mu = mu.max(gram[(i, j)].norm() / (norms[i] * norms[j]));
            }
        }
        mu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub k: usize,
    pub samples: usize,
    pub rate: f64,
}

/// Outcome of [`gaussian_calibrate`] with everything needed to rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCalibration {
    pub n: usize,
    pub basis_seed: u64,
    pub trial_seed: u64,
    pub trials: usize,
    pub target_rate: f64,
    pub sampling: GaussianSampling,
    pub points: Vec<CalibrationPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationConfig {
    pub trials: usize,
    pub trial_seed: u64,
    /// Defaults to `3 ln N`.
    pub p_floor: Option<f64>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            trials: 200,
            trial_seed: 0x5eed,
            p_floor: None,
        }
    }
}

/// ChaCha8 stream `stream` of the generator seeded by `seed`.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Unit-modulus coefficient with a uniform phase.
pub fn random_phase(rng: &mut impl Rng) -> C64 {
    C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Fraction of random `k`-sparse instances whose coefficients are recovered
/// exactly from `s` samples starting at a random offset. Stops early once
/// more than `max_failures` trials have failed.
pub fn segment_recovery_rate(
    basis: &Basis,
    k: usize,
    s: usize,
    trials: usize,
    seed: u64,
    max_failures: Option<usize>,
) -> Result<f64> {
    let n = basis.n();
    let tol = Tolerances::default();
    let mut ok = 0;
    for t in 0..trials {
        let mut rng = trial_rng(seed, ((k as u64) << 32) | t as u64);
        let mut support = rand::seq::index::sample(&mut rng, n, k).into_vec();
        support.sort_unstable();
        let coeffs: Vec<C64> = (0..k).map(|_| random_phase(&mut rng)).collect();
        let c = SparseVec {
            indices: support,
            values: coeffs,
        };
        let y = basis.synthesize_sparse(&c)?;
        let start = if basis.tau() == Some(1) {
            rng.random_range(0..=n - s)
        } else {
            rng.random_range(0..n)
        };
        let seg: Vec<C64> = (0..s).map(|i| y[(start + i) % n]).collect();
        let good = match basis.recover_segment(&seg, start, k, &tol)? {
            Ok(r) => r.indices == c.indices && r.max_abs_diff(&c) <= 1e-6,
            Err(_) => false,
        };
        if good {
            ok += 1;
        } else if let Some(m) = max_failures {
            if t + 1 - ok > m {
                return Ok(ok as f64 / trials as f64);
            }
        }
    }
    Ok(ok as f64 / trials as f64)
}

/// Finds the smallest `c1` (to 1e-3) for which every `K` in `k_range`
/// reaches `target_rate` empirical segment recovery on the Gaussian basis
/// seeded by `basis_seed`.
pub fn gaussian_calibrate(
    n: usize,
    basis_seed: u64,
    k_range: RangeInclusive<usize>,
    target_rate: f64,
    cfg: &CalibrationConfig,
) -> Result<GaussianCalibration> {
    if k_range.is_empty() || *k_range.start() == 0 || *k_range.end() >= n {
        return Err(Error::InvalidParameter(format!(
            "K range must lie in 1..{n}"
        )));
    }
    if !(0.0..=1.0).contains(&target_rate) || cfg.trials == 0 {
        return Err(Error::InvalidParameter(
            "target rate must be in [0, 1] with at least one trial".into(),
        ));
    }
    let p_floor = cfg
        .p_floor
        .unwrap_or_else(|| GaussianSampling::default_floor(n));
    // No floor on the trial basis so any window length can be probed.
    let basis = Basis::random_gaussian(
        n,
        basis_seed,
        GaussianSampling {
            c1: 0.0,
            p_floor: 0.0,
        },
    )?;
    let max_failures = ((1.0 - target_rate) * cfg.trials as f64).floor() as usize;
    let passes = |k: usize, s: usize| -> Result<bool> {
        Ok(
            segment_recovery_rate(&basis, k, s, cfg.trials, cfg.trial_seed, Some(max_failures))?
                >= target_rate,
        )
    };

    // Smallest passing S per K, by bisection on (fail, pass].
    let mut needed = Vec::new();
    for k in k_range.clone() {
        if !passes(k, n)? {
            return Err(Error::Calibration(format!(
                "K = {k} misses the target rate even with S = N = {n}"
            )));
        }
        let (mut lo, mut hi) = (k, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if passes(k, mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        needed.push((k, hi));
    }

    let c1_for = |needed: &[(usize, usize)]| -> f64 {
        let c = needed
            .iter()
            .map(|&(k, s)| (s as f64 - 1.0 + 1e-6) / (k as f64 * (n as f64 / k as f64).ln()))
            .fold(0.0f64, f64::max);
        (c * 1000.0).ceil() / 1000.0
    };

    // The bisection assumes a monotone rate; confirm on full trial counts
    // and widen any K that falls short.
    for _ in 0..n {
        let sampling = GaussianSampling {
            c1: c1_for(&needed),
            p_floor,
        };
        let mut points = Vec::new();
        let mut short = None;
        for &(k, _) in &needed {
            let s = sampling.samples(n, k);
            let rate = segment_recovery_rate(&basis, k, s, cfg.trials, cfg.trial_seed, None)?;
            points.push(CalibrationPoint {
                k,
                samples: s,
                rate,
            });
            if rate < target_rate && short.is_none() {
                short = Some((k, s));
            }
        }
        match short {
            None => {
                return Ok(GaussianCalibration {
                    n,
                    basis_seed,
                    trial_seed: cfg.trial_seed,
                    trials: cfg.trials,
                    target_rate,
                    sampling,
                    points,
                })
            }
            Some((_, s)) if s >= n => {
                return Err(Error::Calibration(
                    "target rate not reached with S = N".into(),
                ));
            }
            Some((k, s)) => {
                for e in needed.iter_mut().filter(|e| e.0 == k) {
                    e.1 = s + 1;
                }
            }
        }
    }
    Err(Error::Calibration("sampling search did not settle".into()))
}
