// False-accept and false-reject rates over a synthetic population, to pick
// a match threshold.

use bioatm::minutiae::roc::{equal_error_rate, uniform_thresholds};
use bioatm::minutiae::{MatchParams, SyntheticConfig, evaluate_far_frr, synthesize_population};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let population = synthesize_population(&SyntheticConfig {
        n_subjects: 12,
        samples_per_subject: 4,
        ..SyntheticConfig::default()
    })?;
    let rows = evaluate_far_frr(
        &population,
        &MatchParams::default(),
        &uniform_thresholds(10),
    )?;
    println!("threshold    FAR     FRR");
    for r in &rows {
        println!("{:>9.2} {:>7.3} {:>7.3}", r.threshold, r.far, r.frr);
    }
    if let Some((t, eer)) = equal_error_rate(&rows) {
        println!("equal error rate {eer:.3} near threshold {t:.2}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
