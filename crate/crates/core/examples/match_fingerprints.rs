// Match live samples against enrolled templates: genuine samples score
// high, another subject's samples score low, and a rotated copy of a
// template still matches itself.

use bioatm::minutiae::{
    MatchParams, SyntheticConfig, decide, match_templates, rigid_transform, serialize_template,
    synthesize_population,
};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let population = synthesize_population(&SyntheticConfig {
        n_subjects: 3,
        samples_per_subject: 3,
        ..SyntheticConfig::default()
    })?;
    let params = MatchParams::default();
    let threshold = 0.40;

    let first = &population[0];
    println!(
        "{} enrolled with {} minutiae; first lines of its template:",
        first.label,
        first.base.len()
    );
    for line in serialize_template(&first.base).lines().take(3) {
        println!("  {line}");
    }
    for subject in &population {
        for (k, sample) in subject.samples.iter().enumerate() {
            let r = match_templates(sample, &first.base, &params)?;
            println!(
                "{}-{} vs {}: score {:.3}, {} paired, {}",
                subject.label,
                k + 1,
                first.label,
                r.score,
                r.matched_count,
                if decide(&r, threshold) {
                    "accept"
                } else {
                    "reject"
                }
            );
        }
    }

    let turned = rigid_transform(&first.base, 25.0, 40, -30);
    let r = match_templates(&turned, &first.base, &params)?;
    println!(
        "rotated 25 degrees and shifted: score {:.3}, rotation found {:.0}",
        r.score, r.best_rotation_deg
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
