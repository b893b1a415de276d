//! Seeded, parallel Monte Carlo execution.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::metrics::{resolution_probability, rmse, Angles};
use crate::array::ArrayGeometry;
use crate::baselines::als::{als_steering, mix};
use crate::baselines::esprit::esprit_covariance;
use crate::doa::{proposed_steering, resolve_directions, signature_estimates, Algorithm};
use crate::error::{Error, Result};
use crate::signal::{build_signal_tensor_with_rcs, draw_rcs, Scenario};
use crate::tensor::DenseTensor;

/// Per-method outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub preset: String,
    pub snr_db: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub estimates: Option<Vec<Angles>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub preset: String,
    pub snr_db: Option<f64>,
    pub method: Method,
    /// NaN when every trial failed.
    pub rmse_deg: f64,
    /// Only defined for two-target scenarios.
    pub prob_resolution: Option<f64>,
    pub trials: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    /// Sort by preset, then SNR (noise-free last), then method.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.preset
                .cmp(&b.preset)
                .then(snr_key(a.snr_db).total_cmp(&snr_key(b.snr_db)))
                .then(a.method.cmp(&b.method))
        });
    }

    pub fn total_trials(&self) -> usize {
        self.rows.iter().map(|r| r.trials).sum()
    }

    pub fn total_failures(&self) -> usize {
        self.rows.iter().map(|r| r.failures).sum()
    }

    pub fn failure_fraction(&self) -> f64 {
        match self.total_trials() {
            0 => 0.0,
            n => self.total_failures() as f64 / n as f64,
        }
    }

    pub fn get(&self, preset: &str, snr_db: Option<f64>, method: Method) -> Option<&MetricsRow> {
        self.rows
            .iter()
            .find(|r| r.preset == preset && r.snr_db == snr_db && r.method == method)
    }
}

fn snr_key(s: Option<f64>) -> f64 {
    s.unwrap_or(f64::INFINITY)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: MetricsTable,
    pub trials: Vec<TrialRecord>,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed of one trial; depends only on its coordinates, never on scheduling.
/// Drives the noise and any randomized estimator.
pub fn trial_seed(master: u64, preset: &str, snr_db: Option<f64>, trial: usize) -> u64 {
    let snr_bits = snr_db.map_or(u64::MAX, f64::to_bits);
    [fnv1a(preset), snr_bits, trial as u64]
        .into_iter()
        .fold(mix(master), |h, x| mix(h ^ mix(x)))
}

/// Seed of the scene (RCS and receive-array draw) of one trial. It omits the
/// SNR so that every SNR point sees the same scenes and curves differ only
/// by noise level.
pub fn scene_seed(master: u64, preset: &str, trial: usize) -> u64 {
    [fnv1a(preset), 0x5ce4e, trial as u64]
        .into_iter()
        .fold(mix(master), |h, x| mix(h ^ mix(x)))
}

/// Estimate directions with one method.
pub fn run_method(
    method: Method,
    tensor: &DenseTensor,
    scenario: &Scenario,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<Angles>> {
    let planar = scenario.targets.is_planar();
    let reference = &scenario.layout.reference;
    let algorithm = Algorithm::for_layout(&scenario.layout, planar)?;
    let estimates = match method {
        Method::Proposed | Method::ProposedSub => {
            let steering = proposed_steering(tensor, scenario, algorithm)?;
            if method == Method::Proposed {
                resolve_directions(&steering, &scenario.tb, reference, planar)?
            } else {
                signature_estimates(&steering, &scenario.tb, reference, planar)?
            }
        }
        Method::Als | Method::AlsSub => {
            let opts = crate::baselines::als::AlsOptions { seed, ..cfg.als };
            let (steering, _) = als_steering(tensor, scenario, algorithm, &opts)?;
            if method == Method::Als {
                resolve_directions(&steering, &scenario.tb, reference, planar)?
            } else {
                signature_estimates(&steering, &scenario.tb, reference, planar)?
            }
        }
        Method::Esprit => esprit_covariance(tensor, scenario)?,
    };
    let angles: Vec<Angles> = estimates.iter().map(Angles::from).collect();
    if angles.iter().any(|a| !a.is_finite()) {
        return Err(Error::NoSolution { distance: f64::NAN });
    }
    Ok(angles)
}

struct SubExperiment {
    label: String,
    layout: crate::array::SubarrayLayout,
    transmit: ArrayGeometry,
    fixed_receive: Option<ArrayGeometry>,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Vec<SubExperiment>> {
    cfg.sub_experiments()
        .into_iter()
        .map(|(label, step)| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed ^ mix(fnv1a(&label))));
            let layout = cfg.layout(step, &mut rng)?;
            let transmit = layout.transmit_positions();
            let fixed_receive = if cfg.receive_per_trial {
                None
            } else {
                Some(transmit.sample(cfg.receivers, &mut rng)?)
            };
            Ok(SubExperiment {
                label,
                layout,
                transmit,
                fixed_receive,
            })
        })
        .collect()
}

fn run_trial(
    cfg: &ExperimentConfig,
    sub: &SubExperiment,
    snr_db: Option<f64>,
    trial: usize,
) -> Vec<TrialRecord> {
    let seed = trial_seed(cfg.seed, &sub.label, snr_db, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene_rng = ChaCha8Rng::seed_from_u64(scene_seed(cfg.seed, &sub.label, trial));
    let record = |method: Method, outcome: Result<Vec<Angles>>| {
        let (estimates, error) = match outcome {
            Ok(a) => (Some(a), None),
            Err(e) => (None, Some(e.to_string())),
        };
        TrialRecord {
            preset: sub.label.clone(),
            snr_db,
            trial,
            seed,
            method,
            estimates,
            error,
        }
    };
    let setup = (|| {
        let receive = match &sub.fixed_receive {
            Some(r) => r.clone(),
            None => sub.transmit.sample(cfg.receivers, &mut scene_rng)?,
        };
        let mut sc = cfg.scenario(sub.layout.clone(), receive)?;
        sc.snr_db = snr_db;
        let rcs = draw_rcs(&sc.targets, &mut scene_rng);
        let signal = build_signal_tensor_with_rcs(&sc, rcs, &mut rng)?;
        Ok::<_, Error>((sc, signal.tensor))
    })();
    match setup {
        Ok((sc, tensor)) => cfg
            .methods
            .iter()
            .map(|&m| {
                record(
                    m,
                    run_method(m, &tensor, &sc, cfg, mix(seed ^ mix(m as u64 + 1))),
                )
            })
            .collect(),
        Err(e) => {
            let msg = e.to_string();
            cfg.methods
                .iter()
                .map(|&m| record(m, Err(Error::Convergence(msg.clone()))))
                .collect()
        }
    }
}

/// SNR, successful estimates keyed by trial, trials, failures.
type Group = (Option<f64>, Vec<(usize, Vec<Angles>)>, usize, usize);

/// Aggregate stored trial records into a metrics table.
pub fn aggregate(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Result<MetricsTable> {
    let truth = &cfg.targets;
    let mut groups: BTreeMap<(String, u64, Method), Group> = BTreeMap::new();
    for r in records {
        let key = (
            r.preset.clone(),
            r.snr_db.map_or(u64::MAX, f64::to_bits),
            r.method,
        );
        let g = groups.entry(key).or_insert((r.snr_db, Vec::new(), 0, 0));
        g.2 += 1;
        match &r.estimates {
            Some(e) => g.1.push((r.trial, e.clone())),
            None => g.3 += 1,
        }
    }
    let mut table = MetricsTable::default();
    for ((preset, _, method), (snr_db, mut ok, trials, failures)) in groups {
        // Summation order must not depend on completion order.
        ok.sort_by_key(|(t, _)| *t);
        let ok: Vec<Vec<Angles>> = ok.into_iter().map(|(_, e)| e).collect();
        let (rmse_deg, prob_resolution) = if ok.is_empty() {
            (f64::NAN, None)
        } else {
            let p = if truth.len() == 2 {
                Some(resolution_probability(&ok, truth)?)
            } else {
                None
            };
            (rmse(&ok, truth)?, p)
        };
        table.rows.push(MetricsRow {
            preset,
            snr_db,
            method,
            rmse_deg,
            prob_resolution,
            trials,
            failures,
        });
    }
    table.sort();
    Ok(table)
}

/// Run every (sub-experiment, SNR, trial) on a pool of `workers` threads.
pub fn run_monte_carlo(cfg: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    cfg.validate()?;
    let subs = prepare(cfg)?;
    let jobs: Vec<(usize, Option<f64>, usize)> = (0..subs.len())
        .flat_map(|s| {
            cfg.snr_db
                .iter()
                .flat_map(move |&snr| (0..cfg.trials).map(move |t| (s, snr, t)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let trials: Vec<TrialRecord> = pool.install(|| {
        jobs.par_iter()
            .flat_map_iter(|&(s, snr, t)| run_trial(cfg, &subs[s], snr, t))
            .collect()
    });
    for r in trials.iter().filter(|r| r.error.is_some()) {
        log::debug!(
            "{} snr={:?} trial {} {}: {}",
            r.preset,
            r.snr_db,
            r.trial,
            r.method,
            r.error.as_deref().unwrap_or("")
        );
    }
    let table = aggregate(cfg, &trials)?;
    Ok(RunOutput { table, trials })
}
