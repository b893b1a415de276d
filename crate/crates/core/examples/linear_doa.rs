//! Estimate directions with subarray step 10, where every generator aliases,
//! and show how the transmit signature picks the right candidate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tbdoa::bench::preset;
use tbdoa::doa::{estimate_doa, Algorithm};
use tbdoa::signal::build_signal_tensor;

fn main() -> tbdoa::error::Result<()> {
    let cfg = preset("exp1")?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut sc = cfg.sample_scenario(None, &mut rng)?;
    sc.snr_db = Some(10.0);
    let sig = build_signal_tensor(&sc, &mut rng)?;
    for est in estimate_doa(&sig.tensor, &sc, Algorithm::Alg1)? {
        let cands: Vec<String> = est
            .candidates
            .iter()
            .map(|c| format!("{:.2}", c.theta_deg()))
            .collect();
        println!(
            "theta = {:8.4} deg   from candidates [{}]",
            est.theta_deg,
            cands.join(", ")
        );
    }
    println!(
        "truth: {:?}",
        sc.targets.iter().map(|t| t.azimuth_deg).collect::<Vec<_>>()
    );
    Ok(())
}
