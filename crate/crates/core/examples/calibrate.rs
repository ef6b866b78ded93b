//! Grid search for the penalty weights `alpha0` on the desk benchmark.
//!
//! Usage: `cargo run --release --example calibrate [config.json]`

use shearscat::experiment::{alpha0_grid, calibrate_alpha0, ExperimentConfig, Problem};
use shearscat::inversion::RegularizerKind;

const CALIBRATION_NOISE: f64 = 0.005;

fn main() -> shearscat::Result<()> {
    let config = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let mut problem = Problem::new(&config)?;
    for kind in [RegularizerKind::Shearlet, RegularizerKind::DirectLp] {
        let cal = calibrate_alpha0(&mut problem, kind, CALIBRATION_NOISE, &alpha0_grid())?;
        println!("{}", kind.name());
        for p in &cal.points {
            println!(
                "  alpha0 {:.4e}  rel error {:.4}  iterations {:>3}  {}",
                p.alpha0,
                p.rel_error,
                p.iterations,
                if p.converged { "discrepancy" } else { "cap" }
            );
        }
        println!("  best alpha0 {:.4e}", cal.best);
    }
    Ok(())
}
