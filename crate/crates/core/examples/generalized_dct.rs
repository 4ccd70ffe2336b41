//! DCT + spikes: the generalized search with 4 K_p sample windows.

use prosparse::bases::Dictionary;
use prosparse::fixtures::{make_random_planted, Placement};
use prosparse::gen_prosparse::{gen_prosparse_solve, GenSolveConfig};

fn main() -> prosparse::Result<()> {
    let dict = Dictionary::dct_canonical(64)?;
    // 4 * 2 * (4 + 1) = 40 < 65
    let p = make_random_planted(&dict, 2, 4, 9, Placement::Uniform)?;
    let set = gen_prosparse_solve(&p.y, &dict, &GenSolveConfig::default())?;
    for s in &set {
        println!(
            "K_p = {:2}  K_q = {:2}  DCT atoms {:?}",
            s.kp(),
            s.kq(),
            s.segment.indices
        );
    }
    assert!(set.find(&p.segment.indices, &p.local.indices).is_some());
    Ok(())
}
