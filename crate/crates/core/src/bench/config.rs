//! Experiment configuration: named presets overridable field by field from JSON.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::array::{ArrayGeometry, Axis, Level, Position, SubarrayLayout, Target, TargetSet};
use crate::baselines::als::{mix, AlsOptions};
use crate::baselines::identifiability::{identifiability_check, Variant};
use crate::doa::{sub_ula_map, Algorithm};
use crate::error::{Error, Result};
use crate::signal::{design_tb_matrix, Scenario};

pub const PRESETS: [&str; 6] = ["exp1", "exp2", "exp3", "exp4", "exp5", "custom"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Proposed,
    /// Proposed decomposition, directions from the transmit signatures only.
    ProposedSub,
    Als,
    AlsSub,
    Esprit,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Proposed,
        Method::ProposedSub,
        Method::Als,
        Method::AlsSub,
        Method::Esprit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::ProposedSub => "proposed-sub",
            Method::Als => "als",
            Method::AlsSub => "als-sub",
            Method::Esprit => "esprit",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Transmit array description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayoutSpec {
    /// `subarrays` copies of an `elements`-element ULA, `step` apart.
    UniformLinear {
        elements: usize,
        subarrays: usize,
        step: usize,
    },
    /// ULA subarrays starting at the given 1-based transmit element indices.
    Linear {
        elements: usize,
        first_elements: Vec<usize>,
    },
    /// URA subarrays on a `subarrays_x x subarrays_y` grid.
    Planar {
        elements_x: usize,
        elements_y: usize,
        subarrays_x: usize,
        subarrays_y: usize,
        step_x: usize,
        step_y: usize,
    },
    /// Reference subarray drawn uniformly in a disc once per experiment.
    RandomCircle {
        elements: usize,
        radius: f64,
        levels: Vec<Level>,
    },
    Explicit {
        reference: Vec<Position>,
        levels: Vec<Level>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: String,
    pub layout: LayoutSpec,
    /// Optional sweep of the subarray step of a `uniform_linear` layout; one
    /// sub-experiment per value.
    #[serde(default)]
    pub step_sweep: Vec<usize>,
    pub targets: Vec<Target>,
    pub pulses: usize,
    /// Number of transmit beams `K`; defaults to the reference size, i.e. the
    /// full unitary DFT.
    #[serde(default)]
    pub waveforms: Option<usize>,
    pub receivers: usize,
    /// Draw the receive array from the transmit positions every trial rather
    /// than once per experiment.
    pub receive_per_trial: bool,
    /// SNR grid in dB; `null` is noise-free.
    pub snr_db: Vec<Option<f64>>,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub seed: u64,
    /// Runs whose failed-trial fraction exceeds this are reported as failed.
    pub failure_threshold: f64,
    pub als: AlsOptions,
    #[serde(default)]
    pub out: Option<String>,
}

pub fn preset_description(name: &str) -> Option<&'static str> {
    Some(match name {
        "exp1" => "linear, 8 non-overlapped 10-element ULA subarrays, targets -15/5/15 deg",
        "exp2" => "planar, 7x7 URA reference on a 3x2 grid with step 2, three targets",
        "exp3" => "exp1 with the subarray step swept 1..10 at 10 dB",
        "exp4" => "linear, sparse subarray starts {1,2,3,5,6,7,9}",
        "exp5" => "4x4 phase-center grid of random 4-element subarrays, 3-level multiscale",
        "custom" => "exp1 defaults, intended to be overridden from a config file",
        _ => return None,
    })
}

fn base(preset: &str, layout: LayoutSpec, targets: Vec<Target>) -> ExperimentConfig {
    ExperimentConfig {
        preset: preset.into(),
        layout,
        step_sweep: Vec::new(),
        targets,
        pulses: 50,
        waveforms: None,
        receivers: 12,
        receive_per_trial: true,
        snr_db: [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]
            .into_iter()
            .map(Some)
            .collect(),
        methods: vec![
            Method::Proposed,
            Method::ProposedSub,
            Method::Als,
            Method::AlsSub,
            Method::Esprit,
        ],
        trials: 50,
        seed: 0,
        failure_threshold: 0.2,
        als: AlsOptions::default(),
        out: None,
    }
}

fn linear_targets(thetas: &[f64], dopplers: &[f64]) -> Vec<Target> {
    thetas
        .iter()
        .zip(dopplers)
        .map(|(&t, &f)| Target::linear(t, f))
        .collect()
}

fn planar_targets(thetas: &[f64], phis: &[f64], dopplers: &[f64]) -> Vec<Target> {
    thetas
        .iter()
        .zip(phis)
        .zip(dopplers)
        .map(|((&t, &p), &f)| Target::planar(t, p, f))
        .collect()
}

const DOPPLERS: [f64; 3] = [-0.1, 0.2, 0.2];

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let exp1 = || {
        base(
            name,
            LayoutSpec::UniformLinear {
                elements: 10,
                subarrays: 8,
                step: 10,
            },
            linear_targets(&[-15.0, 5.0, 15.0], &DOPPLERS),
        )
    };
    Ok(match name {
        "exp1" | "custom" => exp1(),
        "exp2" => base(
            name,
            LayoutSpec::Planar {
                elements_x: 7,
                elements_y: 7,
                subarrays_x: 3,
                subarrays_y: 2,
                step_x: 2,
                step_y: 2,
            },
            planar_targets(&[-40.0, -30.0, -20.0], &[25.0, 35.0, 45.0], &DOPPLERS),
        ),
        "exp3" => {
            let mut c = exp1();
            c.step_sweep = (1..=10).collect();
            c.snr_db = vec![Some(10.0)];
            c
        }
        "exp4" => {
            let mut c = base(
                name,
                LayoutSpec::Linear {
                    elements: 10,
                    first_elements: vec![1, 2, 3, 5, 6, 7, 9],
                },
                linear_targets(&[-5.0, 10.0, 18.0], &[0.3, -0.15, -0.15]),
            );
            c.methods = vec![Method::Proposed, Method::ProposedSub, Method::Als];
            c
        }
        "exp5" => {
            let levels = vec![
                Level::uniform(2, 1, Axis::X),
                Level::uniform(2, 2, Axis::X),
                Level::uniform(4, 1, Axis::Y),
            ];
            let mut c = base(
                name,
                LayoutSpec::RandomCircle {
                    elements: 4,
                    radius: 0.5,
                    levels,
                },
                planar_targets(&[-26.0, -19.0, -12.0], &[11.0, 21.0, 31.0], &DOPPLERS),
            );
            c.methods = vec![Method::Proposed, Method::Als, Method::Esprit];
            c
        }
        _ => {
            return Err(Error::Config(format!(
                "unknown preset {name:?}; expected one of {PRESETS:?}"
            )))
        }
    })
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    // Layout variants are replaced whole, not merged.
                    Some(slot) if k != "layout" => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl ExperimentConfig {
    /// Parse a JSON document: `preset` names the base bundle (default
    /// `custom`) and every other field overrides it.
    pub fn from_json(text: &str) -> Result<Self> {
        let overlay: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        if !overlay.is_object() {
            return Err(Error::Config("config must be a JSON object".into()));
        }
        let name = overlay
            .get("preset")
            .and_then(Value::as_str)
            .unwrap_or("custom")
            .to_string();
        let mut value = serde_json::to_value(preset(&name)?)?;
        merge(&mut value, overlay);
        let cfg: ExperimentConfig = serde_json::from_value(value)
            .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Labels of the sub-experiments and their layouts' step override.
    pub fn sub_experiments(&self) -> Vec<(String, Option<usize>)> {
        if self.step_sweep.is_empty() {
            vec![(self.preset.clone(), None)]
        } else {
            self.step_sweep
                .iter()
                .map(|&s| (format!("{}-dm{s}", self.preset), Some(s)))
                .collect()
        }
    }

    pub fn target_set(&self) -> Result<TargetSet> {
        TargetSet::new(self.targets.clone()).map_err(|e| Error::Config(e.to_string()))
    }

    /// Transmit layout for one sub-experiment. Random references come from
    /// `rng`.
    pub fn layout<R: Rng + ?Sized>(
        &self,
        step: Option<usize>,
        rng: &mut R,
    ) -> Result<SubarrayLayout> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        match (&self.layout, step) {
            (
                LayoutSpec::UniformLinear {
                    elements,
                    subarrays,
                    step: s,
                },
                over,
            ) => SubarrayLayout::uniform_linear(*elements, *subarrays, over.unwrap_or(*s)),
            (_, Some(_)) => Err(Error::Config(
                "step_sweep needs a uniform_linear layout".into(),
            )),
            (
                LayoutSpec::Linear {
                    elements,
                    first_elements,
                },
                None,
            ) => SubarrayLayout::linear(*elements, first_elements),
            (
                LayoutSpec::Planar {
                    elements_x,
                    elements_y,
                    subarrays_x,
                    subarrays_y,
                    step_x,
                    step_y,
                },
                None,
            ) => SubarrayLayout::planar(
                *elements_x,
                *elements_y,
                *subarrays_x,
                *subarrays_y,
                *step_x,
                *step_y,
            ),
            (
                LayoutSpec::RandomCircle {
                    elements,
                    radius,
                    levels,
                },
                None,
            ) => {
                if !(*radius > 0.0) {
                    return Err(Error::Config("radius must be positive".into()));
                }
                SubarrayLayout::new(
                    ArrayGeometry::random_in_circle(*elements, *radius, rng),
                    levels.clone(),
                )
            }
            (LayoutSpec::Explicit { reference, levels }, None) => {
                SubarrayLayout::new(ArrayGeometry::new(reference.clone())?, levels.clone())
            }
        }
        .map_err(cfg_err)
    }

    /// Scenario for one sub-experiment with the given receive array.
    pub fn scenario(&self, layout: SubarrayLayout, receive: ArrayGeometry) -> Result<Scenario> {
        let m0 = layout.reference.len();
        let tb = design_tb_matrix(m0, self.waveforms.unwrap_or(m0))
            .map_err(|e| Error::Config(e.to_string()))?;
        let sc = Scenario {
            layout,
            receive,
            targets: self.target_set()?,
            pulses: self.pulses,
            tb,
            snr_db: None,
        };
        sc.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(sc)
    }

    /// Layout plus a receive array drawn from its transmit positions.
    pub fn sample_scenario<R: Rng + ?Sized>(
        &self,
        step: Option<usize>,
        rng: &mut R,
    ) -> Result<Scenario> {
        let layout = self.layout(step, rng)?;
        let receive = layout.transmit_positions().sample(self.receivers, rng)?;
        self.scenario(layout, receive)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !PRESETS.contains(&self.preset.as_str()) {
            return bad(format!("unknown preset {:?}", self.preset));
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.snr_db.is_empty() {
            return bad("SNR grid is empty".into());
        }
        if self.snr_db.iter().flatten().any(|s| !s.is_finite()) {
            return bad("SNR values must be finite (use null for noise-free)".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if self.pulses == 0 || self.waveforms == Some(0) || self.receivers == 0 {
            return bad("pulses, waveforms and receivers must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.failure_threshold) {
            return bad("failure_threshold must lie in [0, 1]".into());
        }
        self.als
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        let targets = self.target_set()?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed));
        for (label, step) in self.sub_experiments() {
            let ctx = |e: Error| Error::Config(format!("{label}: {e}"));
            let layout = self.layout(step, &mut rng).map_err(ctx)?;
            let transmit = layout.transmit_positions();
            if self.receivers > transmit.len() {
                return bad(format!(
                    "{label}: {} receivers but only {} transmit positions to draw from",
                    self.receivers,
                    transmit.len()
                ));
            }
            let receive = transmit.sample(self.receivers, &mut rng).map_err(ctx)?;
            let sc = self.scenario(layout, receive).map_err(ctx)?;
            let algorithm = Algorithm::for_layout(&sc.layout, targets.is_planar()).map_err(ctx)?;
            let size = sc.size();
            let variant = match algorithm {
                Algorithm::Alg3 => {
                    let map = sub_ula_map(&sc.layout).map_err(ctx)?;
                    Variant::Reshaped {
                        i1: map.stacked_len(),
                        i2: size.waveforms,
                        i3: size.receivers * size.pulses,
                    }
                }
                _ => Variant::T,
            };
            let report = identifiability_check(&size, variant);
            if !report.passed {
                return bad(format!(
                    "{label}: {} targets exceed the identifiable maximum {}",
                    targets.len(),
                    report.capacity
                ));
            }
            for m in &self.methods {
                if *m == Method::Esprit && !sc.layout.is_uniform() {
                    return bad(format!("{label}: esprit needs uniformly spaced subarrays"));
                }
            }
        }
        Ok(())
    }
}

/// Parse a comma-separated SNR list; `inf`/`none` mean noise-free.
pub fn parse_snr_list(s: &str) -> Result<Vec<Option<f64>>> {
    s.split(',')
        .map(|t| match t.trim() {
            "inf" | "none" | "noise-free" => Ok(None),
            v => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::Config(format!("bad SNR value {v:?}"))),
        })
        .collect()
}

pub fn parse_method_list(s: &str) -> Result<Vec<Method>> {
    s.split(',').map(str::parse).collect()
}
