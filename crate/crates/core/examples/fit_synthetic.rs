//! Draw samples from a known mixture, fit all three models, compare.
//!
//! ```bash
//! cargo run --release -p lgm-emg --example fit_synthetic
//! ```

use std::time::Instant;

use lgm::distributions::sample_lgm;
use lgm::{fit_gaussian, fit_laplacian, fit_lgm, Density, EmConfig, LgmParams};

fn main() -> lgm::Result<()> {
    let truth = LgmParams::from_parts(0.7, 0.0, 1.0, 0.0, 9.0)?;
    let y = sample_lgm(200_000, &truth, 2024)?;

    let start = Instant::now();
    let fit = fit_lgm(&y, &EmConfig::default(), 0)?;
    let elapsed = start.elapsed();

    let p = &fit.params;
    println!("generator : {truth:?}");
    println!(
        "fitted    : λ₁={:.4} μ₁={:.4} σ₁={:.4} μ₂={:.4} σ₂²={:.4}",
        p.lambda1(),
        p.laplacian().mu(),
        p.laplacian().sigma(),
        p.gaussian().mu(),
        p.gaussian().variance()
    );
    println!(
        "EM        : {} iterations, converged={}, winning restart {}, {:.2?}",
        fit.trace.iterations, fit.trace.converged, fit.restart, elapsed
    );

    let lap = fit_laplacian(&y)?;
    let gauss = fit_gaussian(&y)?;
    println!("log-likelihood  LGM {:.1}", fit.final_loglik);
    println!("                Laplacian {:.1}", lap.log_likelihood(&y)?);
    println!("                Gaussian {:.1}", gauss.log_likelihood(&y)?);
    Ok(())
}
