use std::process::Command;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tbdoa::array::{ArrayGeometry, SubarrayLayout, Target, TargetSet};
use tbdoa::baselines::als::{als_steering, AlsOptions};
use tbdoa::baselines::esprit::esprit_covariance;
use tbdoa::bench::config::LayoutSpec;
use tbdoa::bench::metrics::assign;
use tbdoa::bench::report::{format_csv, parse_csv, CSV_FILE, CSV_HEADER};
use tbdoa::bench::{preset, Angles, ExperimentConfig, Method, MetricsRow, MetricsTable};
use tbdoa::doa::{
    estimate_doa, proposed_steering, resolve_directions, signature_estimates, Algorithm,
    AngleEstimate,
};
use tbdoa::signal::{build_signal_tensor_with_rcs, design_tb_matrix, draw_rcs, Scenario};
use tbdoa::tensor::DenseTensor;

fn noise_free(cfg: &ExperimentConfig, seed: u64) -> (Scenario, DenseTensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sc = cfg.sample_scenario(None, &mut rng).unwrap();
    let rcs = draw_rcs(&sc.targets, &mut rng);
    let t = build_signal_tensor_with_rcs(&sc, rcs, &mut rng)
        .unwrap()
        .tensor;
    (sc, t)
}

fn max_error(est: &[AngleEstimate], truth: &TargetSet) -> f64 {
    let truth: Vec<Target> = truth.iter().cloned().collect();
    let angles: Vec<Angles> = est.iter().map(Angles::from).collect();
    let a = assign(&angles, &truth).unwrap();
    truth
        .iter()
        .enumerate()
        .map(|(l, t)| {
            let e = angles[a[l]];
            let dphi = match (e.phi_deg, t.elevation_deg) {
                (Some(x), Some(y)) => (x - y).abs(),
                _ => 0.0,
            };
            (e.theta_deg - t.azimuth_deg).abs().max(dphi)
        })
        .fold(0.0, f64::max)
}

#[test]
fn signature_only_estimates_are_exact_without_noise() {
    for name in ["exp1", "exp2", "exp4"] {
        let cfg = preset(name).unwrap();
        let (sc, t) = noise_free(&cfg, 11);
        let planar = sc.targets.is_planar();
        let alg = Algorithm::for_layout(&sc.layout, planar).unwrap();
        let steering = proposed_steering(&t, &sc, alg).unwrap();
        let est = signature_estimates(&steering, &sc.tb, &sc.layout.reference, planar).unwrap();
        assert!(max_error(&est, &sc.targets) < 1e-6, "{name}");
    }
}

#[test]
fn als_estimator_is_exact_without_noise() {
    for name in ["exp1", "exp2"] {
        let cfg = preset(name).unwrap();
        let (sc, t) = noise_free(&cfg, 12);
        let planar = sc.targets.is_planar();
        let alg = Algorithm::for_layout(&sc.layout, planar).unwrap();
        let (steering, fit) = als_steering(&t, &sc, alg, &AlsOptions::default()).unwrap();
        assert!(fit.fit > 1.0 - 1e-8, "{name}: fit {}", fit.fit);
        let est = resolve_directions(&steering, &sc.tb, &sc.layout.reference, planar).unwrap();
        assert!(max_error(&est, &sc.targets) < 1e-6, "{name}");
    }
}

#[test]
fn esprit_agrees_with_proposed_on_unambiguous_layout() {
    let mut cfg = preset("exp1").unwrap();
    cfg.layout = LayoutSpec::UniformLinear {
        elements: 10,
        subarrays: 8,
        step: 1,
    };
    cfg.targets = vec![
        Target::linear(-15.0, -0.1),
        Target::linear(5.0, 0.2),
        Target::linear(15.0, 0.05),
    ];
    let (sc, t) = noise_free(&cfg, 13);
    let proposed = estimate_doa(&t, &sc, Algorithm::Alg1).unwrap();
    let esprit = esprit_covariance(&t, &sc).unwrap();
    let mut a: Vec<f64> = proposed.iter().map(|e| e.theta_deg).collect();
    let mut b: Vec<f64> = esprit.iter().map(|e| e.theta_deg).collect();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-6, "{a:?} vs {b:?}");
    }
}

#[test]
fn too_many_targets_is_reported() {
    let layout = SubarrayLayout::uniform_linear(4, 2, 1).unwrap();
    let targets: Vec<Target> = (0..3)
        .map(|i| Target::linear(-20.0 + 15.0 * i as f64, 0.1 * i as f64))
        .collect();
    let sc = Scenario {
        receive: ArrayGeometry::ula(2),
        layout,
        targets: TargetSet::new(targets).unwrap(),
        pulses: 4,
        tb: design_tb_matrix(4, 1).unwrap(),
        snr_db: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let rcs = draw_rcs(&sc.targets, &mut rng);
    let t = build_signal_tensor_with_rcs(&sc, rcs, &mut rng)
        .unwrap()
        .tensor;
    assert!(estimate_doa(&t, &sc, Algorithm::Alg1).is_err());
}

fn bench(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_tbdoa-bench"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

#[test]
fn cli_exit_codes_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_s = out.to_str().unwrap();

    let (code, stdout) = bench(&["list-presets"]);
    assert_eq!(code, 0);
    assert!(stdout.lines().count() >= 5);

    let (code, _) = bench(&[
        "run",
        "--preset",
        "exp1",
        "--trials",
        "2",
        "--seed",
        "42",
        "--snr",
        "-10,20",
        "--methods",
        "proposed,esprit",
        "--out",
        out_s,
        "--workers",
        "2",
    ]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(out.join(CSV_FILE)).unwrap();
    assert_eq!(csv.lines().next(), Some(CSV_HEADER));
    assert_eq!(csv.lines().count(), 5);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"trials": 3, "no_such_field": 1}"#).unwrap();
    assert_eq!(bench(&["validate", "--config", bad.to_str().unwrap()]).0, 2);
    assert_eq!(bench(&["run", "--preset", "exp9"]).0, 2);
    assert_eq!(
        bench(&["run", "--preset", "exp1", "--methods", "music"]).0,
        2
    );

    let strict = dir.path().join("strict.json");
    std::fs::write(&strict, r#"{"preset": "exp1", "failure_threshold": 0.0}"#).unwrap();
    let (code, _) = bench(&[
        "run",
        "--config",
        strict.to_str().unwrap(),
        "--trials",
        "6",
        "--snr",
        "-15",
        "--methods",
        "proposed",
        "--out",
        out_s,
    ]);
    assert_eq!(code, 3);

    let good = dir.path().join("good.json");
    std::fs::write(&good, r#"{"preset": "exp2", "trials": 3}"#).unwrap();
    assert_eq!(
        bench(&["validate", "--config", good.to_str().unwrap()]).0,
        0
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn single_target_recovered_for_any_step(theta in -70.0f64..70.0, step in 1usize..=10, seed in 0u64..1000) {
        let layout = SubarrayLayout::uniform_linear(10, 6, step).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let receive = layout.transmit_positions().sample(4, &mut rng).unwrap();
        let sc = Scenario {
            layout,
            receive,
            targets: TargetSet::new(vec![Target::linear(theta, 0.1)]).unwrap(),
            pulses: 8,
            tb: design_tb_matrix(10, 10).unwrap(),
            snr_db: None,
        };
        let rcs = draw_rcs(&sc.targets, &mut rng);
        let t = build_signal_tensor_with_rcs(&sc, rcs, &mut rng).unwrap().tensor;
        let est = estimate_doa(&t, &sc, Algorithm::Alg1).unwrap();
        prop_assert!((est[0].theta_deg - theta).abs() < 1e-6, "{} vs {theta}", est[0].theta_deg);
    }

    #[test]
    fn csv_round_trips(rows in proptest::collection::vec((-30i32..40, 0usize..5, 0.0f64..90.0, 1usize..200), 1..12)) {
        let mut table = MetricsTable::default();
        for (snr, m, rmse, trials) in rows {
            table.rows.push(MetricsRow {
                preset: "exp1".into(),
                snr_db: Some(snr as f64),
                method: Method::ALL[m],
                rmse_deg: rmse,
                prob_resolution: None,
                trials,
                failures: trials / 3,
            });
        }
        table.sort();
        let text = format_csv(&table).unwrap();
        let back = parse_csv(&text).unwrap();
        prop_assert_eq!(back.rows.len(), table.rows.len());
        prop_assert_eq!(format_csv(&back).unwrap(), text);
    }
}
