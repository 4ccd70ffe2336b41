//! Adversarial and randomized test signals.
//!
//! The two picket-fence constructions live in `[F, I]` with `N = 2^(2d-1)`:
//! `z = [v; -F v]` spans the nullspace direction both of them exploit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bases::{random_phase, trial_rng, Dictionary};
use crate::error::{Error, Result};
use crate::numerics::{self, l1_norm, C64};
use crate::sparse::SparseVec;

fn picket_n(d: u32) -> Result<usize> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "d = {d}: the construction needs d >= 2"
        )));
    }
    if d > 16 {
        return Err(Error::InvalidParameter(format!("d = {d} is too large")));
    }
    Ok(1usize << (2 * d - 1))
}

/// `z = [v; -F v]` where `v` holds `2^(d-1)` entries `sqrt(2)` spaced `2^d`
/// apart. Length `2N`.
pub fn make_picket_fence_z(d: u32) -> Result<Vec<C64>> {
    let n = picket_n(d)?;
    let m = 1usize << d;
    let mut v = vec![C64::new(0.0, 0.0); n];
    for i in (0..n).step_by(m) {
        v[i] = C64::new(2f64.sqrt(), 0.0);
    }
    let fv = numerics::dft(&v, true)?;
    let mut z = v;
    z.extend(fv.iter().map(|x| -x));
    // F v is real and exactly 0 or 1 in exact arithmetic.
    for x in z.iter_mut() {
        let r = x.re.round();
        if (*x - C64::new(r, 0.0)).norm() < 1e-12 {
            *x = C64::new(r, 0.0);
        }
    }
    Ok(z)
}

/// Splits a length-`2N` coefficient vector into its Fourier and spike halves.
pub fn split_halves(x: &[C64]) -> (SparseVec, SparseVec) {
    let n = x.len() / 2;
    (
        SparseVec::from_dense(&x[..n], 0.0),
        SparseVec::from_dense(&x[n..], 0.0),
    )
}

/// `[F, I] x` for a length-`2N` vector.
pub fn synthesize_pair(x: &[C64]) -> Result<Vec<C64>> {
    let n = x.len() / 2;
    let mut y = numerics::dft(&x[..n], true)?;
    y.iter_mut().zip(&x[n..]).for_each(|(a, b)| *a += b);
    Ok(y)
}

/// `2 (2^(d-1) (sqrt(2)/2 - 1) + floor(2^(d-1) (sqrt(2) - 1)))`, the margin by
/// which the `K` largest entries of `z` outweigh half of `||z||_1`.
pub fn counterexample_gap(d: u32) -> f64 {
    let h = (1u64 << (d - 1)) as f64;
    2.0 * (h * (2f64.sqrt() / 2.0 - 1.0) + (h * (2f64.sqrt() - 1.0)).floor())
}

/// An `[F, I]` instance where the sparsest representation `x` is not the
/// minimum-l1 one: `x_tilde = z + x` has a smaller l1 norm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterexampleBP {
    pub d: u32,
    pub n: usize,
    pub k: usize,
    pub z: Vec<C64>,
    pub x: Vec<C64>,
    pub x_tilde: Vec<C64>,
    pub y: Vec<C64>,
}

impl CounterexampleBP {
    /// `(x_p, x_q)` of the sparse solution.
    pub fn sparse_solution(&self) -> (SparseVec, SparseVec) {
        split_halves(&self.x)
    }
}

pub fn make_bp_counterexample(d: u32) -> Result<CounterexampleBP> {
    if d < 4 {
        return Err(Error::InvalidParameter(format!(
            "d = {d}: the l1 gap 2(2^(d-1)(sqrt2/2 - 1) + floor(2^(d-1)(sqrt2 - 1))) = {:.3} is positive only for d >= 4",
            if d >= 1 { counterexample_gap(d) } else { f64::NAN }
        )));
    }
    let z = make_picket_fence_z(d)?;
    let n = z.len() / 2;
    let k = (n as f64).sqrt().floor() as usize;

    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| z[b].norm().total_cmp(&z[a].norm()).then(a.cmp(&b)));
    let picked = &order[..k];
    let mut x = vec![C64::new(0.0, 0.0); 2 * n];
    for &i in picked {
        x[i] = z[i] * -2.0;
    }
    let x_tilde: Vec<C64> = z.iter().zip(&x).map(|(a, b)| a + b).collect();
    let y = synthesize_pair(&x)?;

    let dz = synthesize_pair(&z)?;
    let scale = numerics::inf_norm(&z);
    if numerics::inf_norm(&dz) > 1e-10 * scale {
        return Err(Error::Invariant("D z != 0".into()));
    }
    let top: f64 = picked.iter().map(|&i| z[i].norm()).sum();
    if l1_norm(&z) >= 2.0 * top {
        return Err(Error::Invariant(
            "the K largest entries of z do not outweigh the rest".into(),
        ));
    }
    if l1_norm(&x_tilde) >= l1_norm(&x) {
        return Err(Error::Invariant("x_tilde is not l1-smaller than x".into()));
    }
    let y2 = synthesize_pair(&x_tilde)?;
    if y.iter()
        .zip(&y2)
        .any(|(a, b)| (a - b).norm() > 1e-10 * numerics::inf_norm(&y))
    {
        return Err(Error::Invariant("D x != D x_tilde".into()));
    }
    Ok(CounterexampleBP {
        d,
        n,
        k,
        z,
        x,
        x_tilde,
        y,
    })
}

/// Two `L/2`-sparse representations of one signal in `[F, I]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoSolutionInstance {
    pub d: u32,
    pub n: usize,
    pub k: usize,
    pub split_seed: u64,
    pub x0: Vec<C64>,
    pub x1: Vec<C64>,
    pub y: Vec<C64>,
}

pub fn make_two_solution_instance(d: u32, split_seed: u64) -> Result<TwoSolutionInstance> {
    let z = make_picket_fence_z(d)?;
    let n = z.len() / 2;
    let nonzero: Vec<usize> = (0..2 * n).filter(|&i| z[i].norm() != 0.0).collect();
    let l = nonzero.len();
    let k = l / 2;
    let mut rng = trial_rng(split_seed, 0);
    let chosen = rand::seq::index::sample(&mut rng, l, k);
    let mut x0 = vec![C64::new(0.0, 0.0); 2 * n];
    for i in chosen.iter() {
        x0[nonzero[i]] = z[nonzero[i]];
    }
    let x1: Vec<C64> = x0.iter().zip(&z).map(|(a, b)| a - b).collect();
    let y = synthesize_pair(&x0)?;

    let count = |x: &[C64]| x.iter().filter(|v| v.norm() != 0.0).count();
    if count(&x0) != k || count(&x1) != k {
        return Err(Error::Invariant("split is not even".into()));
    }
    let y1 = synthesize_pair(&x1)?;
    if y.iter()
        .zip(&y1)
        .any(|(a, b)| (a - b).norm() > 1e-10 * numerics::inf_norm(&z))
    {
        return Err(Error::Invariant("D x0 != D x1".into()));
    }
    for x in [&x0, &x1] {
        let (p, q) = split_halves(x);
        if 2 * p.nnz() * q.nnz() >= n {
            return Err(Error::Invariant("a split violates K_p K_q < N/2".into()));
        }
    }
    Ok(TwoSolutionInstance {
        d,
        n,
        k,
        split_seed,
        x0,
        x1,
        y,
    })
}

/// Where the local-basis atoms of a planted instance go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    Uniform,
    /// `K_q` atoms spaced `floor(N / K_q)` apart from a random offset.
    PicketFence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedInstance {
    pub seed: u64,
    pub segment: SparseVec,
    pub local: SparseVec,
    pub y: Vec<C64>,
}

/// Random supports, unit-modulus random-phase coefficients, and the
/// synthesized signal.
pub fn make_random_planted(
    dict: &Dictionary,
    kp: usize,
    kq: usize,
    seed: u64,
    placement: Placement,
) -> Result<PlantedInstance> {
    let n = dict.n();
    if kp > n || kq > n {
        return Err(Error::InvalidParameter(format!(
            "cannot place {kp} + {kq} atoms in dimension {n}"
        )));
    }
    let mut rng = trial_rng(seed, 1);
    let mut sp = rand::seq::index::sample(&mut rng, n, kp).into_vec();
    sp.sort_unstable();
    let mut sq = match placement {
        Placement::Uniform => rand::seq::index::sample(&mut rng, n, kq).into_vec(),
        Placement::PicketFence if kq == 0 => Vec::new(),
        Placement::PicketFence => {
            let step = n / kq;
            let offset = rng.random_range(0..n);
            (0..kq).map(|i| (offset + i * step) % n).collect()
        }
    };
    sq.sort_unstable();
    let segment = SparseVec {
        values: (0..kp).map(|_| random_phase(&mut rng)).collect(),
        indices: sp,
    };
    let local = SparseVec {
        values: (0..kq).map(|_| random_phase(&mut rng)).collect(),
        indices: sq,
    };
    let y = dict.synthesize(&segment, &local)?;
    Ok(PlantedInstance {
        seed,
        segment,
        local,
        y,
    })
}
