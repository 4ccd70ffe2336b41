//! Two equally sparse representations of one signal, both found.

use prosparse::fixtures::{make_two_solution_instance, split_halves};
use prosparse::prosparse::prosparse_solve;
use prosparse::Tolerances;

fn main() -> prosparse::Result<()> {
    let t = make_two_solution_instance(4, 7)?;
    let set = prosparse_solve(&t.y, &Tolerances::default())?;
    for (name, x) in [("x0", &t.x0), ("x1", &t.x1)] {
        let (p, q) = split_halves(x);
        let found = set.find(&p.indices, &q.indices).is_some();
        println!(
            "{name}: K_p = {}, K_q = {}, found {found}",
            p.nnz(),
            q.nnz()
        );
        assert!(found);
    }
    println!("{} solutions in total, K = {} each", set.len(), t.k);
    Ok(())
}
