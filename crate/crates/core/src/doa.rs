//! From generators and transmit signatures to unambiguous directions.
//!
//! A generator `e^{-jπΔd}` pins the direction cosine `d` only modulo `2/Δ`, so
//! widely spaced subarrays produce grating-lobe candidates. The beamspace
//! signature `χ = W_0^H a_0` of the reference subarray gives a coarse but
//! unambiguous second estimate that picks the right candidate.

use std::f64::consts::PI;

use serde::Serialize;

use crate::array::{ArrayGeometry, Axis, SubarrayLayout};
use crate::baselines::identifiability::{identifiability_check, ProblemSize, Variant};
use crate::error::{Error, Result};
use crate::linalg::{poly_roots, CMat, CVec, C64};
use crate::signal::{Scenario, TbMatrix};
use crate::tensor::DenseTensor;
use crate::vtd::{decompose, generalized_vandermonde_estimate, SubUlaMap};

/// Roots farther than this from the unit circle are not accepted.
pub const MAX_ROOT_DISTANCE: f64 = 0.5;
/// Grid step in direction-cosine space for signature minimization.
pub const GSC_GRID_STEP: f64 = 0.01;
pub const GSC_TOLERANCE: f64 = 1e-8;
pub const GSC_MAX_ITERATIONS: usize = 200;
/// Directions where the beamspace gain `‖W_0^H p‖²` falls below this fraction
/// of `‖W_0‖_F²` are treated as common beam nulls.
pub const NULL_GAIN_RTOL: f64 = 1e-6;

/// A direction in direction-cosine form. Linear scenarios only use `v = sinθ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Direction {
    pub v: f64,
    pub u: f64,
    pub planar: bool,
}

impl Direction {
    pub fn linear(sin_theta: f64) -> Self {
        Self {
            v: sin_theta.clamp(-1.0, 1.0),
            u: 0.0,
            planar: false,
        }
    }

    pub fn planar(u: f64, v: f64) -> Self {
        Self { v, u, planar: true }
    }

    pub fn theta_deg(&self) -> f64 {
        if self.planar {
            self.u.atan2(self.v).to_degrees()
        } else {
            self.v.asin().to_degrees()
        }
    }

    pub fn phi_deg(&self) -> Option<f64> {
        self.planar
            .then(|| self.u.hypot(self.v).min(1.0).asin().to_degrees())
    }

    fn distance(&self, other: &Direction) -> f64 {
        if self.planar {
            (self.u - other.u).hypot(self.v - other.v)
        } else {
            (self.theta_deg() - other.theta_deg()).abs()
        }
    }
}

/// One grating-lobe candidate and the integers that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub direction: Direction,
    /// `(k_x, k_y)`; `k_y` is 0 for linear scenarios.
    pub k: [i64; 2],
}

impl Candidate {
    pub fn theta_deg(&self) -> f64 {
        self.direction.theta_deg()
    }

    pub fn phi_deg(&self) -> Option<f64> {
        self.direction.phi_deg()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateSource {
    /// Unique candidate from the subarray generators.
    Generator,
    /// Candidate chosen by (or value taken from) the transmit signature.
    Signature,
    /// Coprime shift-invariance rooting.
    Coprime,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleEstimate {
    pub theta_deg: f64,
    pub phi_deg: Option<f64>,
    pub source: EstimateSource,
    pub candidates: Vec<Candidate>,
}

impl AngleEstimate {
    pub fn from_direction(
        direction: Direction,
        source: EstimateSource,
        candidates: Vec<Candidate>,
    ) -> Self {
        Self {
            theta_deg: direction.theta_deg(),
            phi_deg: direction.phi_deg(),
            source,
            candidates,
        }
    }
}

/// Feasible direction cosines `d = d̄ + 2k/Δ`, `|d| <= 1`, for one generator,
/// with `d̄ = -arg(ω)/(πΔ)`.
pub fn axis_candidates(omega: C64, step: usize) -> Result<Vec<(f64, i64)>> {
    if step == 0 {
        return Err(Error::InvalidArgument("step must be >= 1".into()));
    }
    let modulus = omega.norm();
    if !modulus.is_finite() || (modulus - 1.0).abs() > 0.5 {
        return Err(Error::DegenerateGenerator { modulus });
    }
    let delta = step as f64;
    let base = -omega.arg() / (PI * delta);
    let k_lo = ((-1.0 - base) * delta / 2.0 - 1e-9).ceil() as i64;
    let k_hi = ((1.0 - base) * delta / 2.0 + 1e-9).floor() as i64;
    Ok((k_lo..=k_hi)
        .map(|k| ((base + 2.0 * k as f64 / delta).clamp(-1.0, 1.0), k))
        .collect())
}

/// Grating-lobe candidates for a linear array generator.
pub fn candidates_from_generator(omega: C64, step: usize) -> Result<Vec<Candidate>> {
    Ok(axis_candidates(omega, step)?
        .into_iter()
        .map(|(d, k)| Candidate {
            direction: Direction::linear(d),
            k: [k, 0],
        })
        .collect())
}

/// Candidate `(u, v)` pairs from paired y and x generators, restricted to the
/// unit disk.
pub fn candidates_2d(
    omega_y: C64,
    omega_x: C64,
    step_y: usize,
    step_x: usize,
) -> Result<Vec<Candidate>> {
    let us = axis_candidates(omega_y, step_y)?;
    let vs = axis_candidates(omega_x, step_x)?;
    let out = planar_product(&vs, &us);
    if out.is_empty() {
        return Err(Error::NoSolution {
            distance: f64::INFINITY,
        });
    }
    Ok(out)
}

fn planar_product(vs: &[(f64, i64)], us: &[(f64, i64)]) -> Vec<Candidate> {
    let mut out = Vec::new();
    for &(v, kx) in vs {
        for &(u, ky) in us {
            if u * u + v * v <= 1.0 + 1e-12 {
                out.push(Candidate {
                    direction: Direction::planar(u, v),
                    k: [kx, ky],
                });
            }
        }
    }
    out
}

/// Index of the candidate nearest the reference; ties go to the smaller |θ|.
pub fn disambiguate(candidates: &[Candidate], reference: &Direction) -> usize {
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let (d, db) = (
            c.direction.distance(reference),
            candidates[best].direction.distance(reference),
        );
        let tie = (d - db).abs() <= 1e-12 * d.max(db).max(1.0);
        if (!tie && d < db) || (tie && c.theta_deg().abs() < candidates[best].theta_deg().abs()) {
            best = i;
        }
    }
    best
}

/// A unit-circle root estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootEstimate {
    pub theta_rad: f64,
    /// Root selected from the polynomial, before polishing.
    pub root: C64,
    pub distance: f64,
}

/// Root nearest the unit circle among those accepted by `eligible`; among
/// near-ties the root inside is preferred.
fn select_root(roots: &[C64], eligible: impl Fn(&C64) -> bool) -> Result<C64> {
    let metric = |z: &C64| (z.norm() - 1.0).abs();
    let pool: Vec<&C64> = roots.iter().filter(|z| eligible(z)).collect();
    let best = pool.iter().map(|z| metric(z)).fold(f64::INFINITY, f64::min);
    if !(best <= MAX_ROOT_DISTANCE) {
        return Err(Error::NoSolution { distance: best });
    }
    let near: Vec<&C64> = pool
        .into_iter()
        .filter(|z| metric(z) <= best + 1e-9)
        .collect();
    let pick = near.iter().find(|z| z.norm() <= 1.0).unwrap_or(&near[0]);
    Ok(**pick)
}

/// Refine `ω` to a local minimum of the real trigonometric polynomial
/// `g(ω) = Σ_k c_k e^{jkω}` (coefficients for `k = -D..D`).
///
/// Noise-free objectives have double roots on the unit circle, which the
/// companion-matrix rooting only resolves to about `sqrt(eps)`.
fn polish_on_circle(laurent: &[C64], omega: f64) -> f64 {
    let d = (laurent.len() / 2) as i64;
    let derivatives = |w: f64| {
        let (mut g1, mut g2) = (0.0, 0.0);
        for (i, c) in laurent.iter().enumerate() {
            let k = i as i64 - d;
            let e = c * C64::from_polar(1.0, k as f64 * w);
            g1 -= k as f64 * e.im;
            g2 -= (k * k) as f64 * e.re;
        }
        (g1, g2)
    };
    // Newton on g' = 0: near a double root g itself sits at rounding level,
    // but g' is still well resolved.
    let mut w = omega;
    for _ in 0..20 {
        let (g1, g2) = derivatives(w);
        if g2 <= 0.0 {
            break;
        }
        let step = (-g1 / g2).clamp(-0.05, 0.05);
        w += step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    w
}

fn angle_from_unit_phase(omega: f64) -> f64 {
    let wrapped = C64::from_polar(1.0, omega).arg();
    (-wrapped / PI).clamp(-1.0, 1.0).asin()
}

/// Root a Laurent polynomial (coefficients for `z^-D..z^D`) and return the
/// polished unit-circle phase of its selected root.
fn root_laurent(laurent: &[C64], eligible: impl Fn(&C64) -> bool) -> Result<RootEstimate> {
    let roots = poly_roots(laurent)?;
    let root = select_root(&roots, eligible)?;
    let omega = polish_on_circle(laurent, root.arg());
    Ok(RootEstimate {
        theta_rad: angle_from_unit_phase(omega),
        root,
        distance: (root.norm() - 1.0).abs(),
    })
}

/// `I - χχ^H / ‖χ‖²`.
fn orthogonal_projector(chi: &CVec) -> Result<CMat> {
    let n2 = chi.norm_squared();
    if !(n2 > 0.0) || !n2.is_finite() {
        return Err(Error::InvalidArgument(
            "signature vector is zero or non-finite".into(),
        ));
    }
    let k = chi.len();
    Ok(CMat::identity(k, k) - chi * chi.adjoint() / C64::from(n2))
}

/// Root the signature polynomial of a contiguous half-wavelength ULA reference.
///
/// `F(z) = p^H(z) W_0 P⊥ W_0^H p(z)` with `p(z) = [1, z, .., z^{M_0-1}]` vanishes
/// where `W_0^H p(z)` is parallel to `χ`; the projector makes this invariant to
/// the unknown complex scale of `χ`. It also vanishes wherever every beam has
/// a null (`W_0^H p(z) = 0`) regardless of `χ`; roots there are skipped.
pub fn gsc_root_1d(chi: &CVec, w0: &CMat) -> Result<RootEstimate> {
    if chi.len() != w0.ncols() {
        return Err(Error::Dimension(format!(
            "signature length {} vs {} beams",
            chi.len(),
            w0.ncols()
        )));
    }
    if w0.ncols() < 2 {
        return Err(Error::InvalidArgument(
            "signature rooting needs at least two beams".into(),
        ));
    }
    let m0 = w0.nrows();
    let q = w0 * orthogonal_projector(chi)? * w0.adjoint();
    let mut laurent = vec![C64::from(0.0); 2 * m0 - 1];
    for m in 0..m0 {
        for n in 0..m0 {
            laurent[n + m0 - 1 - m] += q[(m, n)];
        }
    }
    let w0h = w0.adjoint();
    let gain_floor = NULL_GAIN_RTOL * w0.norm_squared();
    let has_gain = |z: &C64| {
        let unit = z / z.norm();
        let p = CVec::from_fn(m0, |i, _| unit.powu(i as u32));
        (&w0h * p).norm_squared() > gain_floor
    };
    root_laurent(&laurent, has_gain)
}

/// Minimum of the signature mismatch over directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GscMinimum {
    pub direction: Direction,
    /// Normalized objective `‖P⊥ W_0^H a‖² / ‖W_0^H a‖²` at the minimizer.
    pub objective: f64,
    pub converged: bool,
}

struct SignatureObjective<'a> {
    w0h: CMat,
    proj: CMat,
    geometry: &'a ArrayGeometry,
    /// `W_0 χ / ‖χ‖`, so that `‖P⊥ y‖² = ‖y‖² - |b^H a|²`.
    b: CVec,
    /// `‖W_0^H a‖² = gain ‖a‖²` for every `a` when `W_0 W_0^H = gain I`.
    flat_gain: Option<f64>,
}

impl<'a> SignatureObjective<'a> {
    fn new(chi: &CVec, w0: &CMat, geometry: &'a ArrayGeometry) -> Result<Self> {
        let gram = w0 * w0.adjoint();
        let gain = gram.trace().re / gram.nrows() as f64;
        let flat = (&gram - CMat::identity(gram.nrows(), gram.nrows()) * C64::from(gain)).norm()
            <= 1e-12 * gain;
        Ok(Self {
            w0h: w0.adjoint(),
            proj: orthogonal_projector(chi)?,
            geometry,
            b: w0 * chi / C64::from(chi.norm()),
            flat_gain: flat.then_some(gain),
        })
    }

    /// Cheap form of [`Self::value`] for the grid scan; loses relative
    /// accuracy near exact matches.
    fn scan_value(&self, u: f64, v: f64) -> f64 {
        let a = CVec::from_iterator(
            self.geometry.len(),
            self.geometry
                .positions
                .iter()
                .map(|p| C64::from_polar(1.0, -PI * (p[0] * v + p[1] * u))),
        );
        let power = match self.flat_gain {
            Some(g) => g * a.len() as f64,
            None => (&self.w0h * &a).norm_squared(),
        };
        1.0 - self.b.dotc(&a).norm_sqr() / power
    }

    fn beamspace(&self, u: f64, v: f64) -> (CVec, CVec, CVec) {
        let n = self.geometry.len();
        let mut a = CVec::zeros(n);
        let mut ax = CVec::zeros(n);
        let mut ay = CVec::zeros(n);
        for (i, p) in self.geometry.positions.iter().enumerate() {
            let e = C64::from_polar(1.0, -PI * (p[0] * v + p[1] * u));
            a[i] = e;
            ax[i] = e * C64::new(0.0, -PI * p[0]);
            ay[i] = e * C64::new(0.0, -PI * p[1]);
        }
        (&self.w0h * a, &self.w0h * ax, &self.w0h * ay)
    }

    fn value(&self, u: f64, v: f64) -> f64 {
        let (y, _, _) = self.beamspace(u, v);
        (&self.proj * &y).norm_squared() / y.norm_squared()
    }

    /// Residual `P⊥ y / ‖y‖` and its derivatives along v and u, as real vectors.
    fn residual(&self, u: f64, v: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (y, yv, yu) = self.beamspace(u, v);
        let ny = y.norm();
        let r = &self.proj * &y / C64::from(ny);
        let deriv = |dy: &CVec| {
            let radial = y.dotc(dy).re / (ny * ny);
            (&self.proj * dy) / C64::from(ny) - &r * C64::from(radial)
        };
        let real = |z: &CVec| z.iter().flat_map(|c| [c.re, c.im]).collect::<Vec<f64>>();
        (real(&r), real(&deriv(&yv)), real(&deriv(&yu)))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gsc_minimize(
    chi: &CVec,
    w0: &CMat,
    reference: &ArrayGeometry,
    planar: bool,
) -> Result<GscMinimum> {
    if chi.len() != w0.ncols() || w0.nrows() != reference.len() {
        return Err(Error::Dimension(format!(
            "signature {} / TB {}x{} / reference {} mismatch",
            chi.len(),
            w0.nrows(),
            w0.ncols(),
            reference.len()
        )));
    }
    if w0.ncols() < 2 {
        return Err(Error::InvalidArgument(
            "signature matching needs at least two beams".into(),
        ));
    }
    let obj = SignatureObjective::new(chi, w0, reference)?;

    let steps = (2.0 / GSC_GRID_STEP).round() as i64;
    let grid = |i: i64| -1.0 + i as f64 * GSC_GRID_STEP;
    let (mut bu, mut bv, mut best) = (0.0, 0.0, f64::INFINITY);
    for iv in 0..=steps {
        let v = grid(iv);
        let u_range = if planar {
            0..=steps
        } else {
            steps / 2..=steps / 2
        };
        for iu in u_range {
            let u = if planar { grid(iu) } else { 0.0 };
            if u * u + v * v > 1.0 {
                continue;
            }
            let f = obj.scan_value(u, v);
            if f < best {
                (bu, bv, best) = (u, v, f);
            }
        }
    }

    // Levenberg-Marquardt on the normalized residual.
    let (mut u, mut v) = (bu, bv);
    let mut f = obj.value(u, v);
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..GSC_MAX_ITERATIONS {
        let (r, jv, ju) = obj.residual(u, v);
        let (dv, du) = if planar {
            let (a, b, c) = (dot(&jv, &jv), dot(&jv, &ju), dot(&ju, &ju));
            let (gv, gu) = (dot(&jv, &r), dot(&ju, &r));
            let (a, c) = (a * (1.0 + lambda), c * (1.0 + lambda));
            let det = a * c - b * b;
            if det <= 0.0 {
                break;
            }
            ((-c * gv + b * gu) / det, (b * gv - a * gu) / det)
        } else {
            let a = dot(&jv, &jv) * (1.0 + lambda);
            if a <= 0.0 {
                break;
            }
            (-dot(&jv, &r) / a, 0.0)
        };
        let (mut nu, mut nv) = (u + du, v + dv);
        let radius = nu.hypot(nv);
        if radius > 1.0 {
            (nu, nv) = (nu / radius, nv / radius);
        }
        let nf = obj.value(nu, nv);
        if nf <= f {
            let moved = (nu - u).hypot(nv - v);
            (u, v, f) = (nu, nv, nf);
            lambda = (lambda * 0.1).max(1e-12);
            if moved < GSC_TOLERANCE {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        log::warn!("signature refinement did not converge; returning best point found");
    }
    let direction = if planar {
        Direction::planar(u, v)
    } else {
        Direction::linear(v)
    };
    Ok(GscMinimum {
        direction,
        objective: f,
        converged,
    })
}

/// Minimize the signature mismatch over the unit disk of `(u, v)` for any
/// planar reference geometry: a 0.01 grid followed by local refinement.
pub fn gsc_min_2d(chi: &CVec, w0: &CMat, reference: &ArrayGeometry) -> Result<GscMinimum> {
    gsc_minimize(chi, w0, reference, true)
}

/// Linear counterpart of [`gsc_min_2d`] for references that are not a
/// contiguous ULA.
pub fn gsc_min_1d(chi: &CVec, w0: &CMat, reference: &ArrayGeometry) -> Result<GscMinimum> {
    gsc_minimize(chi, w0, reference, false)
}

/// Direction carried by a transmit signature alone.
pub fn signature_direction(
    chi: &CVec,
    tb: &TbMatrix,
    reference: &ArrayGeometry,
    planar: bool,
) -> Result<Direction> {
    if !planar && reference.is_contiguous_ula() {
        let r = gsc_root_1d(chi, tb.matrix())?;
        return Ok(Direction::linear(r.theta_rad.sin()));
    }
    Ok(gsc_minimize(chi, tb.matrix(), reference, planar)?.direction)
}

/// Root `f(z) = Σ_blocks ‖a z^Δ - b‖²` for a stacked generalized Vandermonde
/// column, where `a`/`b` are the leading/trailing entries of each sub-ULA.
pub fn coprime_root(column: &CVec, map: &SubUlaMap) -> Result<RootEstimate> {
    if column.len() != map.stacked_len() {
        return Err(Error::Dimension(format!(
            "column has {} entries, map stacks {}",
            column.len(),
            map.stacked_len()
        )));
    }
    if !map.has_coprime_pair() {
        return Err(Error::Ambiguity(format!(
            "shift set {:?} has no coprime pair",
            map.steps
        )));
    }
    let dmax = map.blocks.iter().map(|b| b.step).max().unwrap_or(1);
    let mut laurent = vec![C64::from(0.0); 2 * dmax + 1];
    for block in &map.blocks {
        for i in 0..block.members.len() - 1 {
            let a = column[block.start + i];
            let b = column[block.start + i + 1];
            laurent[dmax] += C64::from(a.norm_sqr() + b.norm_sqr());
            laurent[dmax + block.step] -= a * b.conj();
            laurent[dmax - block.step] -= a.conj() * b;
        }
    }
    root_laurent(&laurent, |_| true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Uniform linear subarrays.
    Alg1,
    /// Uniform planar (or multiscale) subarrays.
    Alg2,
    /// Non-uniformly spaced linear subarrays.
    Alg3,
}

impl Algorithm {
    pub fn for_layout(layout: &SubarrayLayout, planar: bool) -> Result<Self> {
        if layout.is_uniform() {
            Ok(if planar {
                Algorithm::Alg2
            } else {
                Algorithm::Alg1
            })
        } else if !planar
            && layout.levels.len() == 1
            && layout.levels[0].integer_x_offsets().is_some()
        {
            Ok(Algorithm::Alg3)
        } else {
            Err(Error::InvalidArgument(
                "no estimator supports this layout".into(),
            ))
        }
    }

    fn check(self, layout: &SubarrayLayout, planar: bool) -> Result<()> {
        let expected = Self::for_layout(layout, planar)?;
        if expected != self {
            return Err(Error::InvalidArgument(format!(
                "{self:?} does not apply to this layout/target combination (use {expected:?})"
            )));
        }
        Ok(())
    }
}

/// Generator of one uniform level for one target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelGenerator {
    pub axis: Axis,
    pub step: usize,
    pub generator: C64,
}

/// Per-target steering information produced by a decomposition, ready to be
/// turned into directions.
#[derive(Debug, Clone)]
pub enum SteeringEstimates {
    /// Uniform levels: paired generators and a signature per target.
    Uniform {
        generators: Vec<Vec<LevelGenerator>>,
        signatures: Vec<CVec>,
    },
    /// Irregular linear layout: stacked steering columns (first entry 1) and
    /// signatures.
    Irregular {
        columns: CMat,
        map: SubUlaMap,
        signatures: Vec<CVec>,
    },
}

impl SteeringEstimates {
    pub fn signatures(&self) -> &[CVec] {
        match self {
            SteeringEstimates::Uniform { signatures, .. }
            | SteeringEstimates::Irregular { signatures, .. } => signatures,
        }
    }
}

/// `(axis, step)` of every level with more than one subarray.
pub fn active_levels(layout: &SubarrayLayout) -> Result<Vec<(usize, Axis, usize)>> {
    let mut out = Vec::new();
    for (r, level) in layout.levels.iter().enumerate() {
        if level.len() < 2 {
            continue;
        }
        let (axis, step) = level.axis_step().ok_or_else(|| {
            Error::InvalidArgument(format!("level {r} is not uniform along one axis"))
        })?;
        if axis == Axis::Z {
            return Err(Error::InvalidArgument(
                "z-axis levels are not supported for estimation".into(),
            ));
        }
        out.push((r, axis, step));
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument(
            "layout has no level with two or more subarrays".into(),
        ));
    }
    Ok(out)
}

pub fn sub_ula_map(layout: &SubarrayLayout) -> Result<SubUlaMap> {
    let offsets = match layout.levels.as_slice() {
        [level] => level.integer_x_offsets(),
        _ => None,
    }
    .ok_or_else(|| {
        Error::InvalidArgument("irregular estimation needs one level of integer x offsets".into())
    })?;
    SubUlaMap::greedy(&offsets)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Candidate direction cosines along one axis from every level on it. The
/// largest step sets the candidates; smaller steps prune those they disagree
/// with, exactly when the steps are jointly coprime.
fn combined_axis_candidates(
    levels: &[LevelGenerator],
    axis: Axis,
) -> Result<Option<Vec<(f64, i64)>>> {
    let on_axis: Vec<&LevelGenerator> = levels.iter().filter(|l| l.axis == axis).collect();
    let Some(base) = on_axis.iter().max_by_key(|l| l.step) else {
        return Ok(None);
    };
    let candidates = axis_candidates(base.generator, base.step)?;
    if on_axis.len() == 1 {
        return Ok(Some(candidates));
    }
    let score = |d: f64| -> f64 {
        on_axis
            .iter()
            .map(|l| {
                let mismatch =
                    l.generator / l.generator.norm() * C64::from_polar(1.0, PI * l.step as f64 * d);
                mismatch.arg().powi(2)
            })
            .sum()
    };
    let scores: Vec<f64> = candidates.iter().map(|c| score(c.0)).collect();
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let g = on_axis.iter().fold(0, |acc, l| gcd(acc, l.step));
    if g == 1 {
        let i = scores.iter().position(|&s| s == min).expect("nonempty");
        return Ok(Some(vec![candidates[i]]));
    }
    Ok(Some(
        candidates
            .into_iter()
            .zip(scores)
            .filter(|(_, s)| *s <= min + 1e-9)
            .map(|(c, _)| c)
            .collect(),
    ))
}

/// Turn steering estimates into one angle estimate per target.
pub fn resolve_directions(
    estimates: &SteeringEstimates,
    tb: &TbMatrix,
    reference: &ArrayGeometry,
    planar: bool,
) -> Result<Vec<AngleEstimate>> {
    match estimates {
        SteeringEstimates::Irregular { columns, map, .. } => (0..columns.ncols())
            .map(|l| {
                let r = coprime_root(&columns.column(l).into_owned(), map)?;
                let dir = Direction::linear(r.theta_rad.sin());
                Ok(AngleEstimate::from_direction(
                    dir,
                    EstimateSource::Coprime,
                    vec![Candidate {
                        direction: dir,
                        k: [0, 0],
                    }],
                ))
            })
            .collect(),
        SteeringEstimates::Uniform {
            generators,
            signatures,
        } => generators
            .iter()
            .zip(signatures)
            .map(|(levels, chi)| resolve_uniform(levels, chi, tb, reference, planar))
            .collect(),
    }
}

fn resolve_uniform(
    levels: &[LevelGenerator],
    chi: &CVec,
    tb: &TbMatrix,
    reference: &ArrayGeometry,
    planar: bool,
) -> Result<AngleEstimate> {
    let xs = combined_axis_candidates(levels, Axis::X)?;
    let ys = combined_axis_candidates(levels, Axis::Y)?;
    let mut signature: Option<Direction> = None;
    let mut signature_dir = || -> Result<Direction> {
        if signature.is_none() {
            signature = Some(signature_direction(chi, tb, reference, planar)?);
        }
        Ok(signature.expect("just set"))
    };

    let candidates = if planar {
        let vs = match xs {
            Some(c) => c,
            None => vec![(signature_dir()?.v, 0)],
        };
        let us = match ys {
            Some(c) => c,
            None => vec![(signature_dir()?.u, 0)],
        };
        planar_product(&vs, &us)
    } else {
        let vs = xs.ok_or_else(|| {
            Error::InvalidArgument("linear estimation needs an x-axis level".into())
        })?;
        vs.into_iter()
            .map(|(d, k)| Candidate {
                direction: Direction::linear(d),
                k: [k, 0],
            })
            .collect()
    };
    if candidates.is_empty() {
        return Err(Error::NoSolution {
            distance: f64::INFINITY,
        });
    }
    if candidates.len() == 1 {
        let source = if signature.is_some() {
            EstimateSource::Signature
        } else {
            EstimateSource::Generator
        };
        return Ok(AngleEstimate::from_direction(
            candidates[0].direction,
            source,
            candidates,
        ));
    }
    let pick = disambiguate(&candidates, &signature_dir()?);
    Ok(AngleEstimate::from_direction(
        candidates[pick].direction,
        EstimateSource::Signature,
        candidates,
    ))
}

fn reshape_t(tensor: &DenseTensor) -> Result<DenseTensor> {
    let shape = tensor.shape();
    if shape.len() != 4 {
        return Err(Error::Dimension(format!(
            "expected an (S, K, N, Q) tensor, got shape {shape:?}"
        )));
    }
    tensor.reshape(&[shape[0], shape[1], shape[2] * shape[3]])
}

/// Proposed decomposition of a received tensor into per-target steering
/// estimates.
pub fn proposed_steering(
    tensor: &DenseTensor,
    scenario: &Scenario,
    algorithm: Algorithm,
) -> Result<SteeringEstimates> {
    let planar = scenario.targets.is_planar();
    algorithm.check(&scenario.layout, planar)?;
    let rank = scenario.targets.len();
    let t = reshape_t(tensor)?;
    let size = ProblemSize {
        subarrays: t.shape()[0],
        waveforms: t.shape()[1],
        receivers: tensor.shape()[2],
        pulses: tensor.shape()[3],
        targets: rank,
    };
    match algorithm {
        Algorithm::Alg3 => {
            let map = sub_ula_map(&scenario.layout)?;
            let variant = Variant::Reshaped {
                i1: map.stacked_len(),
                i2: t.shape()[1],
                i3: t.shape()[2],
            };
            require(identifiability_check(&size, variant))?;
            let est = generalized_vandermonde_estimate(&t, &map, rank)?;
            let signatures = (0..rank)
                .map(|l| est.signatures.column(l).into_owned())
                .collect();
            Ok(SteeringEstimates::Irregular {
                columns: est.columns,
                map,
                signatures,
            })
        }
        Algorithm::Alg1 | Algorithm::Alg2 => {
            require(identifiability_check(&size, Variant::T))?;
            let active = active_levels(&scenario.layout)?;
            let f = decompose(&t, &scenario.layout.level_sizes(), rank)?;
            let generators = (0..rank)
                .map(|l| {
                    active
                        .iter()
                        .enumerate()
                        .map(|(i, &(_, axis, step))| LevelGenerator {
                            axis,
                            step,
                            generator: f.generators.generators[i][l],
                        })
                        .collect()
                })
                .collect();
            let signatures = (0..rank).map(|l| f.x.column(l).into_owned()).collect();
            Ok(SteeringEstimates::Uniform {
                generators,
                signatures,
            })
        }
    }
}

fn require(report: crate::baselines::identifiability::IdentifiabilityReport) -> Result<()> {
    if report.passed {
        Ok(())
    } else {
        Err(Error::Identifiability(format!(
            "{:?} reshape supports at most {} targets, scenario has {}",
            report.variant, report.capacity, report.rank
        )))
    }
}

/// Full proposed pipeline: decomposition, candidates, signature-based
/// disambiguation (or coprime rooting for irregular layouts).
pub fn estimate_doa(
    tensor: &DenseTensor,
    scenario: &Scenario,
    algorithm: Algorithm,
) -> Result<Vec<AngleEstimate>> {
    let steering = proposed_steering(tensor, scenario, algorithm)?;
    resolve_directions(
        &steering,
        &scenario.tb,
        &scenario.layout.reference,
        scenario.targets.is_planar(),
    )
}

/// Directions from the transmit signatures alone, ignoring the subarray
/// generators.
pub fn signature_estimates(
    steering: &SteeringEstimates,
    tb: &TbMatrix,
    reference: &ArrayGeometry,
    planar: bool,
) -> Result<Vec<AngleEstimate>> {
    steering
        .signatures()
        .iter()
        .map(|chi| {
            let dir = signature_direction(chi, tb, reference, planar)?;
            Ok(AngleEstimate::from_direction(
                dir,
                EstimateSource::Signature,
                vec![Candidate {
                    direction: dir,
                    k: [0, 0],
                }],
            ))
        })
        .collect()
}
