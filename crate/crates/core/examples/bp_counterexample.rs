//! A signal that basis pursuit gets wrong and the window search gets right.

use prosparse::bases::Dictionary;
use prosparse::bp_baseline::{debias, l1_equality_solve, DenseMap, L1Options};
use prosparse::fixtures::make_bp_counterexample;
use prosparse::numerics::l1_norm;
use prosparse::prosparse::prosparse_solve;
use prosparse::Tolerances;

fn main() -> prosparse::Result<()> {
    let c = make_bp_counterexample(4)?;
    let (xp, xq) = c.sparse_solution();
    println!("N = {}, K_p = {}, K_q = {}", c.n, xp.nnz(), xq.nnz());
    println!(
        "||x||_1 = {:.4}, ||x_tilde||_1 = {:.4}",
        l1_norm(&c.x),
        l1_norm(&c.x_tilde)
    );

    let set = prosparse_solve(&c.y, &Tolerances::default())?;
    let found = set.find(&xp.indices, &xq.indices).is_some();
    println!(
        "window search: {} solutions, planted found: {found}",
        set.len()
    );
    assert!(found);

    let d = Dictionary::fourier_canonical(c.n)?.to_matrix();
    let r = l1_equality_solve(&DenseMap::new(d.clone())?, &c.y, &L1Options::default())?;
    let (support, _) = debias(&d, &c.y, &r.solution, 1e-6)?;
    let fourier = support.indices.iter().filter(|&&i| i < c.n).count();
    println!(
        "basis pursuit: converged {} after {} iterations, objective {:.4}, {} Fourier atoms and {} spikes",
        r.converged,
        r.iterations,
        r.objective,
        fourier,
        support.nnz() - fourier
    );
    Ok(())
}
