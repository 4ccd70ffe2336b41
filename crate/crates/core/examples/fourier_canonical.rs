//! Every sparse representation of a planted Fourier + spikes signal.

use prosparse::bases::Dictionary;
use prosparse::fixtures::{make_random_planted, Placement};
use prosparse::prosparse::prosparse_solve;
use prosparse::Tolerances;

fn main() -> prosparse::Result<()> {
    let n = 64;
    let dict = Dictionary::fourier_canonical(n)?;
    let planted = make_random_planted(&dict, 3, 6, 2024, Placement::Uniform)?;
    println!(
        "planted Fourier atoms {:?}, spikes {:?}",
        planted.segment.indices, planted.local.indices
    );

    let set = prosparse_solve(&planted.y, &Tolerances::default())?;
    for s in &set {
        println!(
            "K_p = {:2}  K_q = {:2}  found at {:?}  resynthesis error {:.1e}",
            s.kp(),
            s.kq(),
            s.discovered_at,
            s.resynthesis_error
        );
    }
    let hit = set
        .find(&planted.segment.indices, &planted.local.indices)
        .expect("planted solution");
    assert!(hit.segment.max_abs_diff(&planted.segment) < 1e-9);
    Ok(())
}
