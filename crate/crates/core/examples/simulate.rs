//! Simulate the received tensor of the linear preset and check the realized SNR.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tbdoa::bench::preset;
use tbdoa::signal::build_signal_tensor;

fn main() -> tbdoa::error::Result<()> {
    let cfg = preset("exp1")?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut sc = cfg.sample_scenario(None, &mut rng)?;
    sc.snr_db = Some(10.0);
    let sig = build_signal_tensor(&sc, &mut rng)?;
    let noise = sig.tensor.add_scaled(&sig.noise_free, (-1.0).into())?;
    let snr = 20.0 * (sig.noise_free.frobenius_norm() / noise.frobenius_norm()).log10();
    println!("tensor (S, K, N, Q) = {:?}", sig.tensor.shape());
    println!(
        "|rcs| = {:.3?}",
        sig.rcs.iter().map(|z| z.norm()).collect::<Vec<_>>()
    );
    println!("tau = {:.4e}, realized SNR = {snr:.6} dB", sig.tau);
    println!(
        "identifiable up to {} targets",
        sig.identifiability.capacity
    );
    Ok(())
}
