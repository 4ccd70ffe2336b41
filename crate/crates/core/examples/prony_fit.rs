//! Prony's method on a short window: grid roots and free roots.

use std::f64::consts::PI;

use prosparse::numerics::C64;
use prosparse::prony::{fourier_coeffs_from_model, prony_fit};
use prosparse::Tolerances;

fn main() -> prosparse::Result<()> {
    let n = 32;
    let atoms = [
        (3usize, C64::new(1.0, 0.0)),
        (11, C64::new(0.0, -0.5)),
        (20, C64::new(0.3, 0.3)),
    ];
    let y: Vec<C64> = (0..n)
        .map(|t| {
            atoms
                .iter()
                .map(|&(m, a)| a * C64::from_polar(1.0, 2.0 * PI * (m * t) as f64 / n as f64))
                .sum::<C64>()
                / (n as f64).sqrt()
        })
        .collect();

    let tol = Tolerances::default();
    let start = 5;
    let window = &y[start..start + 6];
    let model = prony_fit(window, 3, n, start, true, &tol)?.expect("three grid roots");
    println!("grid indices {:?}", model.grid_indices);
    for (m, c) in fourier_coeffs_from_model(&model, n)?.iter() {
        println!("  atom {m:2}: {c:.6}");
    }

    let free = prony_fit(window, 3, n, start, false, &tol)?.expect("free fit");
    for u in &free.roots {
        println!(
            "  root angle / (2 pi / N) = {:.9}",
            u.arg().rem_euclid(2.0 * PI) * n as f64 / (2.0 * PI)
        );
    }

    // Asking for more atoms than the window holds is a rank deficiency.
    println!(
        "order 4: {:?}",
        prony_fit(&y[start..start + 8], 4, n, start, true, &tol)?.unwrap_err()
    );
    Ok(())
}
