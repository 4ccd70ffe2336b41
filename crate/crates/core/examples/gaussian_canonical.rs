//! Gaussian segment basis: calibrate S(K), then search.

use prosparse::bases::{gaussian_calibrate, CalibrationConfig, Dictionary};
use prosparse::fixtures::{make_random_planted, Placement};
use prosparse::gen_prosparse::{gen_prosparse_solve, GenSolveConfig};

fn main() -> prosparse::Result<()> {
    let n = 64;
    let cal = gaussian_calibrate(n, 1, 1..=4, 0.95, &CalibrationConfig::default())?;
    println!("c1 = {}, p = {:.3}", cal.sampling.c1, cal.sampling.p_floor);
    for p in &cal.points {
        println!(
            "  K = {}: S = {:2}, segment recovery {:.3}",
            p.k, p.samples, p.rate
        );
    }

    let dict = Dictionary::gaussian_canonical(n, 1, cal.sampling)?;
    let p = make_random_planted(&dict, 2, 3, 5, Placement::Uniform)?;
    let cfg = GenSolveConfig {
        kp_limit: Some(4),
        ..GenSolveConfig::default()
    };
    let set = gen_prosparse_solve(&p.y, &dict, &cfg)?;
    let found = set.find(&p.segment.indices, &p.local.indices).is_some();
    println!("planted (2, 3) found: {found}; {} solutions", set.len());
    Ok(())
}
