//! Irregular subarray starts: sub-ULA map and coprime rooting.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tbdoa::bench::preset;
use tbdoa::doa::{estimate_doa, sub_ula_map, Algorithm};
use tbdoa::signal::build_signal_tensor;

fn main() -> tbdoa::error::Result<()> {
    let cfg = preset("exp4")?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut sc = cfg.sample_scenario(None, &mut rng)?;
    let map = sub_ula_map(&sc.layout)?;
    println!("offsets {:?}", map.offsets);
    for b in &map.blocks {
        println!("  block step {} members {:?}", b.step, b.members);
    }
    sc.snr_db = Some(15.0);
    let sig = build_signal_tensor(&sc, &mut rng)?;
    let alg = Algorithm::for_layout(&sc.layout, false)?;
    for est in estimate_doa(&sig.tensor, &sc, alg)? {
        println!("theta = {:.4} deg", est.theta_deg);
    }
    Ok(())
}
