//! Decompose a noise-free tensor with a Vandermonde first factor and compare
//! the estimated generators with the true ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tbdoa::array::{vandermonde_generators, Axis};
use tbdoa::bench::preset;
use tbdoa::signal::{build_signal_tensor, Scenario};
use tbdoa::vtd::decompose;

fn main() -> tbdoa::error::Result<()> {
    let cfg = preset("exp1")?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sc: Scenario = cfg.sample_scenario(None, &mut rng)?;
    let sig = build_signal_tensor(&sc, &mut rng)?;
    let [s, k, n, q] = sc.shape();
    let t = sig.tensor.reshape(&[s, k, n * q])?;

    let vtd = decompose(&t, &sc.layout.level_sizes(), sc.targets.len())?;
    let truth = vandermonde_generators(10, Axis::X, &sc.targets)?;
    println!("singular values {:.3?}", vtd.svd.singular_values);
    for (l, w) in vtd.generators.generators[0].iter().enumerate() {
        let closest = truth
            .generators
            .iter()
            .map(|z| (z - w).norm())
            .fold(f64::INFINITY, f64::min);
        println!("omega_{l} = {w:.6}  (distance to nearest true generator {closest:.1e})");
    }
    Ok(())
}
