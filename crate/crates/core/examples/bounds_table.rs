//! Recovery thresholds for N = 144, mu = 1/12.

use prosparse::bounds::{bound_curves, evaluate_bounds, BoundReport, Coherence};

fn main() -> prosparse::Result<()> {
    let mu: Coherence = "1/12".parse()?;
    let report = BoundReport::evaluate(144, mu.clone(), 24, None);
    println!(
        "P0 unique:          K <= {:?}",
        report.max_total(|r| r.p0_unique.holds)
    );
    println!(
        "BP (simple):        K <= {:?}",
        report.max_total(|r| r.bp_simple.holds)
    );
    println!(
        "window search (K):  K <= {:?}",
        report.max_total(|r| r.prosparse_total.holds)
    );

    let r = evaluate_bounds(128, &Coherence::inverse_sqrt(128)?, 8, 3, None);
    println!(
        "N = 128, (8, 3): P0 {}, tight BP {}, product {}",
        r.p0_unique.holds, r.bp_tight.holds, r.prosparse_product.holds
    );

    println!("K_p  P0     BP-tight  BP      K_pK_q<N/2  K<sqrt(2N)");
    for c in bound_curves(144, &mu, 12) {
        println!(
            "{:3}  {:6.2} {:8.2}  {:6.2}  {:>10}  {:6.2}",
            c.kp,
            c.p0_unique,
            c.bp_tight,
            c.bp_simple,
            c.prosparse_product
                .map_or("inf".to_string(), |v| format!("{v:.2}")),
            c.prosparse_total
        );
    }
    Ok(())
}
