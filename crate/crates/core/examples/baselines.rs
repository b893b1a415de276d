//! ALS and covariance ESPRIT on two targets that share a Doppler shift.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tbdoa::array::Target;
use tbdoa::baselines::als::{als_steering, AlsOptions};
use tbdoa::baselines::esprit::esprit_covariance;
use tbdoa::bench::config::LayoutSpec;
use tbdoa::bench::preset;
use tbdoa::doa::{estimate_doa, resolve_directions, Algorithm};
use tbdoa::signal::build_signal_tensor;

fn main() -> tbdoa::error::Result<()> {
    let mut cfg = preset("exp1")?;
    cfg.layout = LayoutSpec::UniformLinear {
        elements: 10,
        subarrays: 8,
        step: 1,
    };
    cfg.targets = vec![
        Target::linear(-15.0, -0.1),
        Target::linear(5.0, 0.2),
        Target::linear(15.0, 0.2),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sc = cfg.sample_scenario(None, &mut rng)?;
    let t = build_signal_tensor(&sc, &mut rng)?.tensor;

    let show = |name: &str, est: Vec<f64>| println!("{name:>9}: {est:.4?}");
    show(
        "proposed",
        estimate_doa(&t, &sc, Algorithm::Alg1)?
            .iter()
            .map(|e| e.theta_deg)
            .collect(),
    );
    let (steering, fit) = als_steering(&t, &sc, Algorithm::Alg1, &AlsOptions::default())?;
    let als = resolve_directions(&steering, &sc.tb, &sc.layout.reference, false)?;
    show("als", als.iter().map(|e| e.theta_deg).collect());
    println!(
        "           fit {:.3e}, {} sweeps, restart {}",
        fit.fit, fit.iterations, fit.restart
    );
    match esprit_covariance(&t, &sc) {
        Ok(est) => show("esprit", est.iter().map(|e| e.theta_deg).collect()),
        Err(e) => println!("   esprit: {e}"),
    }
    Ok(())
}
