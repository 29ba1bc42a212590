//! Likelihood-ratio tests of the mixture against each single-component model,
//! on genuine mixture data and on pure Laplacian data.
//!
//! ```bash
//! cargo run --release -p lgm-emg --example likelihood_ratio
//! ```

use lgm::distributions::sample_lgm;
use lgm::evaluation::likelihood_ratio_test;
use lgm::{fit_gaussian, fit_laplacian, fit_lgm, EmConfig, Fitted, LgmParams};

fn main() -> lgm::Result<()> {
    let cases = [
        ("mixture λ₁=0.5, σ₂²=9", LgmParams::from_parts(0.5, 0.0, 1.0, 0.0, 9.0)?),
        ("pure Laplacian", LgmParams::from_parts(1.0, 0.0, 1.0, 0.0, 1.0)?),
    ];
    for (label, truth) in cases {
        let y = sample_lgm(20_000, &truth, 11)?;
        let lgm = fit_lgm(&y, &EmConfig::default(), 0)?.fitted();
        let vs_lap = likelihood_ratio_test(&y, &lgm, &Fitted::on(&y, fit_laplacian(&y)?))?;
        let vs_gauss = likelihood_ratio_test(&y, &lgm, &Fitted::on(&y, fit_gaussian(&y)?))?;
        println!("{label}:");
        for r in [vs_lap, vs_gauss] {
            println!(
                "  null {:<9} T = {:>10.2}  p = {:.3e}  reject at 1%: {}",
                r.null_model.as_str(),
                r.t_stat,
                r.p_value,
                r.rejects_null(0.01)
            );
        }
    }
    Ok(())
}
