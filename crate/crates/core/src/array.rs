//! Array geometry, targets and steering.
//!
//! All positions are in units of half a wavelength, so every phase term has the
//! form `-jπ · position · direction`. A direction is the vector of direction
//! cosines `(v, u, w) = (sinφ cosθ, sinφ sinθ, cosφ)`; for linear arrays the
//! elevation is absent and the direction collapses to `(sinθ, 0, 0)`, which
//! puts every linear array on the x axis.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cis, CMat, CVec, C64};
use crate::tensor::khatri_rao;

pub type Position = [f64; 3];

/// Two generators closer than this (in radians of phase) count as equal.
pub const DISTINCT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// A point target. Angles are in degrees; the elevation is `None` for
/// linear-array scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub azimuth_deg: f64,
    #[serde(default)]
    pub elevation_deg: Option<f64>,
    /// Normalized Doppler shift in cycles per pulse.
    pub doppler: f64,
    /// RCS power `σ²` of the Swerling I draw.
    #[serde(default = "unit_power")]
    pub power: f64,
}

fn unit_power() -> f64 {
    1.0
}

impl Target {
    pub fn linear(azimuth_deg: f64, doppler: f64) -> Self {
        Self {
            azimuth_deg,
            elevation_deg: None,
            doppler,
            power: 1.0,
        }
    }

    pub fn planar(azimuth_deg: f64, elevation_deg: f64, doppler: f64) -> Self {
        Self {
            azimuth_deg,
            elevation_deg: Some(elevation_deg),
            doppler,
            power: 1.0,
        }
    }

    pub fn with_power(mut self, power: f64) -> Self {
        self.power = power;
        self
    }

    pub fn is_planar(&self) -> bool {
        self.elevation_deg.is_some()
    }

    pub fn direction(&self) -> Position {
        let theta = self.azimuth_deg.to_radians();
        match self.elevation_deg {
            None => [theta.sin(), 0.0, 0.0],
            Some(phi) => {
                let phi = phi.to_radians();
                [phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSet {
    pub targets: Vec<Target>,
}

impl TargetSet {
    pub fn new(targets: Vec<Target>) -> Result<Self> {
        let set = Self { targets };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn is_planar(&self) -> bool {
        self.targets.first().is_some_and(Target::is_planar)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Target> {
        self.targets.iter()
    }

    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one target is required".into(),
            ));
        }
        let planar = self.is_planar();
        for t in &self.targets {
            if t.is_planar() != planar {
                return Err(Error::InvalidArgument(
                    "mixed linear and planar targets".into(),
                ));
            }
            if !(t.azimuth_deg.is_finite() && t.doppler.is_finite() && t.power.is_finite()) {
                return Err(Error::InvalidArgument("non-finite target parameter".into()));
            }
            if t.doppler.abs() > 0.5 {
                return Err(Error::InvalidArgument(format!(
                    "|doppler| = {} exceeds 0.5",
                    t.doppler
                )));
            }
            if t.power < 0.0 {
                return Err(Error::InvalidArgument("negative RCS power".into()));
            }
        }
        for (i, a) in self.targets.iter().enumerate() {
            for b in &self.targets[i + 1..] {
                let (da, db) = (a.direction(), b.direction());
                let sep = (0..3).map(|k| (da[k] - db[k]).powi(2)).sum::<f64>().sqrt();
                if sep < DISTINCT_TOL {
                    return Err(Error::NotDistinct(format!(
                        "targets at ({}, {:?}) and ({}, {:?}) share a direction",
                        a.azimuth_deg, a.elevation_deg, b.azimuth_deg, b.elevation_deg
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Element positions of an array, in half-wavelength units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub positions: Vec<Position>,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<Position>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArgument(
                "array needs at least one element".into(),
            ));
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite element position".into()));
        }
        Ok(Self { positions })
    }

    /// Uniform linear array with half-wavelength spacing.
    pub fn ula(m: usize) -> Self {
        Self {
            positions: (0..m).map(|i| [i as f64, 0.0, 0.0]).collect(),
        }
    }

    pub fn linear(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|&x| [x, 0.0, 0.0]).collect())
    }

    /// `mx x my` rectangular grid; the y index is the slow one so the steering
    /// vector equals `u ⊗ v`.
    pub fn ura(mx: usize, my: usize) -> Self {
        let positions = (0..my)
            .flat_map(|y| (0..mx).map(move |x| [x as f64, y as f64, 0.0]))
            .collect();
        Self { positions }
    }

    /// `m` elements placed uniformly at random inside a disc of `radius`
    /// around the origin.
    pub fn random_in_circle<R: Rng + ?Sized>(m: usize, radius: f64, rng: &mut R) -> Self {
        let positions = (0..m)
            .map(|_| {
                let r = radius * rng.random::<f64>().sqrt();
                let a = 2.0 * PI * rng.random::<f64>();
                [r * a.cos(), r * a.sin(), 0.0]
            })
            .collect();
        Self { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Extent `(D_x, D_y, D_z)` along each axis.
    pub fn aperture(&self) -> Position {
        let mut out = [0.0; 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let lo = self
                .positions
                .iter()
                .map(|p| p[k])
                .fold(f64::INFINITY, f64::min);
            let hi = self
                .positions
                .iter()
                .map(|p| p[k])
                .fold(f64::NEG_INFINITY, f64::max);
            *slot = hi - lo;
        }
        out
    }

    /// Whether the positions are exactly `0, 1, .., M-1` on the x axis.
    pub fn is_contiguous_ula(&self) -> bool {
        self.positions
            .iter()
            .enumerate()
            .all(|(i, p)| p[0] == i as f64 && p[1] == 0.0 && p[2] == 0.0)
    }

    /// Whether the positions form the `mx x my` grid of [`ArrayGeometry::ura`].
    pub fn ura_dims(&self) -> Option<(usize, usize)> {
        let mx = self.positions.iter().take_while(|p| p[1] == 0.0).count();
        if mx == 0 || !self.positions.len().is_multiple_of(mx) {
            return None;
        }
        let my = self.positions.len() / mx;
        (ArrayGeometry::ura(mx, my) == *self).then_some((mx, my))
    }

    pub fn translated(&self, offset: Position) -> Self {
        let positions = self
            .positions
            .iter()
            .map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]])
            .collect();
        Self { positions }
    }

    /// Draw `n` distinct element positions from this array.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot draw {n} receive elements from {} transmit positions",
                self.len()
            )));
        }
        let mut picked: Vec<usize> = sample(rng, self.len(), n).into_vec();
        picked.sort_unstable();
        Ok(Self {
            positions: picked.into_iter().map(|i| self.positions[i]).collect(),
        })
    }
}

/// One level of subarray replication: the phase-center offsets of its copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub offsets: Vec<Position>,
}

impl Level {
    pub fn uniform(count: usize, step: usize, axis: Axis) -> Self {
        let offsets = (0..count)
            .map(|i| {
                let mut p = [0.0; 3];
                p[axis.index()] = (i * step) as f64;
                p
            })
            .collect();
        Self { offsets }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Common step vector when the offsets form an arithmetic progression.
    pub fn uniform_step(&self) -> Option<Position> {
        if self.offsets.len() < 2 {
            return None;
        }
        let o0 = self.offsets[0];
        let o1 = self.offsets[1];
        let d = [o1[0] - o0[0], o1[1] - o0[1], o1[2] - o0[2]];
        let ok = self
            .offsets
            .iter()
            .enumerate()
            .all(|(i, p)| (0..3).all(|k| (p[k] - (o0[k] + i as f64 * d[k])).abs() < 1e-12));
        ok.then_some(d)
    }

    /// Integer step along a single axis, when the level is uniform that way.
    pub fn axis_step(&self) -> Option<(Axis, usize)> {
        let d = self.uniform_step()?;
        let nonzero: Vec<usize> = (0..3).filter(|&k| d[k] != 0.0).collect();
        if nonzero.len() != 1 {
            return None;
        }
        let k = nonzero[0];
        let step = d[k];
        if step < 1.0 || step.fract() != 0.0 {
            return None;
        }
        let axis = [Axis::X, Axis::Y, Axis::Z][k];
        Some((axis, step as usize))
    }

    /// Integer x offsets, when every offset lies on the x axis at an integer.
    pub fn integer_x_offsets(&self) -> Option<Vec<usize>> {
        self.offsets
            .iter()
            .map(|p| {
                (p[1] == 0.0 && p[2] == 0.0 && p[0] >= 0.0 && p[0].fract() == 0.0)
                    .then_some(p[0] as usize)
            })
            .collect()
    }
}

/// Transmit geometry: one reference subarray replicated through a hierarchy of
/// levels. Level 0 varies fastest in the subarray index, so the overall
/// subarray steering matrix is `G^(R) ⊙ .. ⊙ G^(1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubarrayLayout {
    pub reference: ArrayGeometry,
    pub levels: Vec<Level>,
}

impl SubarrayLayout {
    pub fn new(reference: ArrayGeometry, levels: Vec<Level>) -> Result<Self> {
        let layout = Self { reference, levels };
        layout.validate()?;
        Ok(layout)
    }

    /// Linear array of ULA subarrays whose first elements sit at the 1-based
    /// indices `m_s`.
    pub fn linear(m0: usize, first_elements: &[usize]) -> Result<Self> {
        if first_elements.first() != Some(&1) {
            return Err(Error::InvalidArgument(
                "first subarray must start at element 1".into(),
            ));
        }
        let offsets = first_elements
            .iter()
            .map(|&m| [(m - 1) as f64, 0.0, 0.0])
            .collect();
        Self::new(ArrayGeometry::ula(m0), vec![Level { offsets }])
    }

    /// `S` uniformly spaced ULA subarrays of `M_0` elements, `Δ_m` apart.
    pub fn uniform_linear(m0: usize, subarrays: usize, step: usize) -> Result<Self> {
        let m_s: Vec<usize> = (0..subarrays).map(|s| 1 + s * step).collect();
        Self::linear(m0, &m_s)
    }

    /// URA subarrays replicated `I` times along x and `J` times along y.
    pub fn planar(
        mx0: usize,
        my0: usize,
        i: usize,
        j: usize,
        step_x: usize,
        step_y: usize,
    ) -> Result<Self> {
        Self::new(
            ArrayGeometry::ura(mx0, my0),
            vec![
                Level::uniform(i, step_x, Axis::X),
                Level::uniform(j, step_y, Axis::Y),
            ],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.reference.is_empty() {
            return Err(Error::InvalidArgument("empty reference subarray".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::InvalidArgument(
                "layout needs at least one level".into(),
            ));
        }
        for (r, level) in self.levels.iter().enumerate() {
            if level.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "level {r} has no subarrays"
                )));
            }
            if level.offsets[0] != [0.0; 3] {
                return Err(Error::InvalidArgument(format!(
                    "level {r} must start at offset 0"
                )));
            }
            let increasing = level.offsets.windows(2).all(|w| {
                w[0].partial_cmp(&w[1])
                    .is_some_and(|o| o == std::cmp::Ordering::Less)
            });
            if !increasing {
                return Err(Error::InvalidArgument(format!(
                    "level {r} offsets are not strictly increasing"
                )));
            }
        }
        Ok(())
    }

    pub fn num_subarrays(&self) -> usize {
        self.levels.iter().map(Level::len).product()
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Level::len).collect()
    }

    pub fn is_uniform(&self) -> bool {
        self.levels
            .iter()
            .all(|l| l.len() == 1 || l.axis_step().is_some())
    }

    /// Phase centers in subarray-index order (level 0 fastest).
    pub fn phase_centers(&self) -> Vec<Position> {
        let mut centers = vec![[0.0; 3]];
        for level in self.levels.iter().rev() {
            centers = centers
                .iter()
                .flat_map(|c| {
                    level
                        .offsets
                        .iter()
                        .map(move |o| [c[0] + o[0], c[1] + o[1], c[2] + o[2]])
                })
                .collect();
        }
        centers
    }

    pub fn subarray(&self, s: usize) -> ArrayGeometry {
        self.reference.translated(self.phase_centers()[s])
    }

    /// Every distinct transmit element position, sorted.
    pub fn transmit_positions(&self) -> ArrayGeometry {
        let mut all: Vec<Position> = self
            .phase_centers()
            .iter()
            .flat_map(|&c| self.reference.translated(c).positions)
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        all.dedup_by(|a, b| (0..3).all(|k| (a[k] - b[k]).abs() < 1e-9));
        ArrayGeometry { positions: all }
    }
}

fn phase(position: &Position, direction: &Position) -> f64 {
    -PI * (position[0] * direction[0] + position[1] * direction[1] + position[2] * direction[2])
}

/// `[1, e^{-jπ sinθ}, .., e^{-j(M-1)π sinθ}]`, θ in radians.
pub fn ula_steering(theta: f64, m: usize) -> CVec {
    let s = theta.sin();
    CVec::from_fn(m, |i, _| cis(-PI * i as f64 * s))
}

/// URA transmit steering `u(θ,φ) ⊗ v(θ,φ)` with `u` of length `my`, `v` of
/// length `mx`; angles in radians.
pub fn ura_steering(theta: f64, phi: f64, mx: usize, my: usize) -> CVec {
    let u = phi.sin() * theta.sin();
    let v = phi.sin() * theta.cos();
    let uy = CVec::from_fn(my, |i, _| cis(-PI * i as f64 * u));
    let vx = CVec::from_fn(mx, |i, _| cis(-PI * i as f64 * v));
    uy.kronecker(&vx)
}

/// Steering vector of an arbitrary array toward one target.
pub fn receive_steering(geometry: &ArrayGeometry, target: &Target) -> CVec {
    steering_for_direction(geometry, &target.direction())
}

pub fn steering_for_direction(geometry: &ArrayGeometry, direction: &Position) -> CVec {
    CVec::from_iterator(
        geometry.len(),
        geometry.positions.iter().map(|p| cis(phase(p, direction))),
    )
}

/// `len(geometry) x L` steering matrix.
pub fn steering_matrix(geometry: &ArrayGeometry, targets: &TargetSet) -> CMat {
    let mut m = CMat::zeros(geometry.len(), targets.len());
    for (l, t) in targets.iter().enumerate() {
        m.set_column(l, &receive_steering(geometry, t));
    }
    m
}

/// Per-level subarray steering matrix `G^(r)`.
pub fn level_steering_matrix(level: &Level, targets: &TargetSet) -> CMat {
    let dirs: Vec<Position> = targets.iter().map(Target::direction).collect();
    CMat::from_fn(level.len(), targets.len(), |s, l| {
        cis(phase(&level.offsets[s], &dirs[l]))
    })
}

/// Transmit subarray steering matrix `G = G^(R) ⊙ .. ⊙ G^(1)` (`S x L`).
///
/// A single uniform level gives the Vandermonde matrix `K`, two uniform planar
/// levels give `H ⊙ Δ`, and a non-uniform level gives a generalized
/// Vandermonde matrix.
pub fn subarray_steering_matrix(layout: &SubarrayLayout, targets: &TargetSet) -> CMat {
    let mut g = CMat::from_element(1, targets.len(), C64::from(1.0));
    for level in layout.levels.iter().rev() {
        g = khatri_rao(&g, &level_steering_matrix(level, targets)).expect("shared column count");
    }
    g
}

/// Vandermonde generators `e^{-jπ·step·d_l}` along one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorVector {
    pub generators: Vec<C64>,
    pub step: usize,
    pub axis: Axis,
}

pub fn vandermonde_generators(
    step: usize,
    axis: Axis,
    targets: &TargetSet,
) -> Result<GeneratorVector> {
    if step == 0 {
        return Err(Error::InvalidArgument("generator step must be >= 1".into()));
    }
    let generators: Vec<C64> = targets
        .iter()
        .map(|t| cis(-PI * step as f64 * t.direction()[axis.index()]))
        .collect();
    for i in 0..generators.len() {
        for j in i + 1..generators.len() {
            if (generators[i] / generators[j]).arg().abs() < DISTINCT_TOL {
                return Err(Error::NotDistinct(format!(
                    "targets {i} and {j} produce the same generator for step {step} along {axis:?}"
                )));
            }
        }
    }
    Ok(GeneratorVector {
        generators,
        step,
        axis,
    })
}
