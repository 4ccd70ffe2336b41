//! Solving against [A F, A I] for a random invertible A.

use nalgebra::DMatrix;
use prosparse::bases::{trial_rng, Dictionary, Preconditioner};
use prosparse::fixtures::{make_random_planted, Placement};
use prosparse::gen_prosparse::{preconditioned_solve, GenSolveConfig};
use prosparse::numerics::C64;
use rand::Rng;

fn main() -> prosparse::Result<()> {
    let n = 32;
    let mut rng = trial_rng(99, 0);
    let a = DMatrix::<C64>::from_fn(n, n, |i, j| {
        let noise = C64::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
        if i == j {
            C64::new(1.0, 0.0) + noise
        } else {
            noise
        }
    });
    let pre = Preconditioner::new(a)?;

    let dict = Dictionary::fourier_canonical(n)?;
    let p = make_random_planted(&dict, 2, 3, 4, Placement::Uniform)?;
    let y = pre.apply(&p.y);
    let set = preconditioned_solve(&pre, &y, &dict, &GenSolveConfig::default())?;
    let s = set
        .find(&p.segment.indices, &p.local.indices)
        .expect("planted");
    println!(
        "recovered through A: max coefficient error {:.1e}",
        s.segment
            .max_abs_diff(&p.segment)
            .max(s.local.max_abs_diff(&p.local))
    );
    Ok(())
}
