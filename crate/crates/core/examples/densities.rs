//! Evaluate the mixture density, its CDF and quantiles, and sample from it.
//!
//! ```bash
//! cargo run -p lgm-emg --example densities
//! ```

use lgm::distributions::sample_lgm;
use lgm::{Density, LgmParams};

fn main() -> lgm::Result<()> {
    let p = LgmParams::from_parts(0.6, 0.0, 0.5, 0.0, 4.0)?;
    println!("{}", serde_json::to_string_pretty(&p).expect("params serialize"));

    println!("\n{:>6} {:>12} {:>12}", "y", "pdf", "cdf");
    for y in [-6.0, -2.0, -0.5, 0.0, 0.5, 2.0, 6.0] {
        println!("{y:>6.1} {:>12.6} {:>12.6}", p.pdf(y), p.cdf(y));
    }

    println!("\n{:>6} {:>12}", "prob", "quantile");
    for prob in [0.01, 0.25, 0.5, 0.75, 0.99] {
        println!("{prob:>6.2} {:>12.6}", p.quantile(prob)?);
    }

    let y = sample_lgm(100_000, &p, 1)?;
    let inside = y.iter().filter(|v| v.abs() <= 1.0).count() as f64 / y.len() as f64;
    println!(
        "\nP(|Y| ≤ 1): model {:.4}, 1e5 draws {inside:.4}",
        p.interval_mass(-1.0, 1.0)
    );
    println!("log-likelihood of the draws: {:.2}", p.log_likelihood(&y)?);
    Ok(())
}
