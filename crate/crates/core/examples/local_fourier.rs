//! Fourier + block-local Fourier atoms of length L = 8.

use prosparse::bases::Dictionary;
use prosparse::fixtures::{make_random_planted, Placement};
use prosparse::gen_prosparse::{gen_prosparse_solve, GenSolveConfig};

fn main() -> prosparse::Result<()> {
    let (n, l) = (64, 8);
    let dict = Dictionary::fourier_local_fourier(n, l)?;
    println!(
        "coherence {:.4} (sqrt(L/N) = {:.4})",
        dict.mutual_coherence(),
        (l as f64 / n as f64).sqrt()
    );
    // (2 * 4 + 7) * 3 = 45 < 64
    let p = make_random_planted(&dict, 4, 3, 31, Placement::Uniform)?;
    let set = gen_prosparse_solve(&p.y, &dict, &GenSolveConfig::default())?;
    let s = set
        .find(&p.segment.indices, &p.local.indices)
        .expect("planted");
    println!(
        "recovered {:?} / {:?}, error {:.1e}",
        s.segment.indices, s.local.indices, s.resynthesis_error
    );
    println!("{} solutions overall", set.len());
    Ok(())
}
