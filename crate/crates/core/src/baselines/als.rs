//! Alternating least squares CPD and the DOA estimator built on it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::doa::{active_levels, sub_ula_map, Algorithm, LevelGenerator, SteeringEstimates};
use crate::error::{Error, Result};
use crate::linalg::{solve, svd, CMat, CVec, C64};
use crate::signal::{complex_normal, Scenario};
use crate::tensor::{khatri_rao_all, CpdFactors, DenseTensor};
use crate::vtd::ShiftSelection;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct AlsOptions {
    pub max_iterations: usize,
    /// Stop when the fit improves by less than this between sweeps.
    pub tolerance: f64,
    /// Maximum number of random starts.
    pub restarts: usize,
    /// Stop restarting once the misfit `‖t - t̂‖/‖t‖` is within this factor
    /// of the rank-`L` truncated-SVD misfit of the worst unfolding, a lower
    /// bound for any rank-`L` CPD. Only converged restarts count. `None`
    /// always runs every restart.
    pub early_stop: Option<f64>,
    pub seed: u64,
    /// Extrapolate along the last update direction after each sweep and keep
    /// the step when it improves the fit; shortens swamps considerably.
    pub line_search: bool,
    /// The DOA estimator rejects decompositions whose largest component
    /// cross-congruence exceeds this (a degenerate, swamp-like solution).
    pub degeneracy_limit: f64,
}

impl Default for AlsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tolerance: 1e-10,
            restarts: 20,
            early_stop: Some(1.05),
            seed: 0,
            line_search: true,
            degeneracy_limit: 0.5,
        }
    }
}

impl AlsOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.restarts == 0 || !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(
                "ALS needs max_iterations >= 1, restarts >= 1 and tolerance > 0".into(),
            ));
        }
        if !(self.degeneracy_limit > 0.0 && self.degeneracy_limit <= 1.0) {
            return Err(Error::InvalidArgument(
                "ALS degeneracy_limit must lie in (0, 1]".into(),
            ));
        }
        if self.early_stop.is_some_and(|r| !(r >= 1.0)) {
            return Err(Error::InvalidArgument(
                "ALS early_stop ratio must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AlsResult {
    pub factors: CpdFactors,
    /// `1 - ‖t - reconstruction‖ / ‖t‖`.
    pub fit: f64,
    pub iterations: usize,
    pub restart: usize,
    pub converged: bool,
    /// Fit after every sweep of the winning restart.
    pub fit_history: Vec<f64>,
}

/// splitmix64 step, used to derive independent restart seeds.
pub(crate) fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// CP decomposition by alternating least squares from random complex Gaussian
/// starts; the restart with the best fit wins.
pub fn als_cpd(t: &DenseTensor, rank: usize, opts: &AlsOptions) -> Result<AlsResult> {
    opts.validate()?;
    if rank == 0 {
        return Err(Error::InvalidArgument("rank must be >= 1".into()));
    }
    let norm = t.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::InvalidArgument(
            "cannot decompose an all-zero tensor".into(),
        ));
    }
    // A mode longer than the product of the others is projected onto its row
    // space once. The projection is lossless, so iterates and fits are those
    // of the full problem.
    let shape = t.shape();
    let total: usize = shape.iter().product();
    let compressed = (0..t.order())
        .find(|&n| shape[n] * shape[n] > total)
        .map(|n| -> Result<_> {
            let basis = svd(&t.unfold(n + 1)?).v;
            let mut small = shape.to_vec();
            small[n] = basis.ncols();
            let core = DenseTensor::fold(&(t.unfold(n + 1)? * &basis), n + 1, &small)?;
            Ok((n, basis, core))
        });
    let compressed = compressed.transpose()?;
    let work = compressed.as_ref().map_or(t, |c| &c.2);
    let unfoldings: Vec<CMat> = (1..=work.order())
        .map(|n| work.unfold(n))
        .collect::<Result<_>>()?;
    let target_misfit = match opts.early_stop {
        Some(ratio) => {
            let mut bound: f64 = 0.0;
            for u in &unfoldings {
                let s = svd(u).s;
                let tail: f64 = s.iter().skip(rank).map(|x| x * x).sum();
                bound = bound.max(tail.sqrt() / norm);
            }
            Some(ratio * bound)
        }
        None => None,
    };
    let mut best: Option<AlsResult> = None;
    let mut last_error = None;
    for restart in 0..opts.restarts {
        if let (Some(target), Some(b)) = (target_misfit, &best) {
            if b.converged && 1.0 - b.fit <= target {
                break;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(opts.seed ^ mix(restart as u64)));
        match als_single(work.shape(), &unfoldings, norm, rank, opts, &mut rng) {
            Ok(mut r) => {
                r.restart = restart;
                if best.as_ref().is_none_or(|b| r.fit > b.fit) {
                    best = Some(r);
                }
            }
            Err(e) => last_error = Some(e),
        }
    }
    let mut best = best.ok_or_else(|| {
        last_error.unwrap_or_else(|| Error::Convergence("no ALS restart succeeded".into()))
    })?;
    if let Some((n, basis, _)) = compressed {
        let mut factors = best.factors.into_factors();
        factors[n] = basis.map(|z| z.conj()) * &factors[n];
        best.factors = CpdFactors::new(factors)?;
    }
    Ok(best)
}

fn als_single(
    shape: &[usize],
    unfoldings: &[CMat],
    norm: f64,
    rank: usize,
    opts: &AlsOptions,
    rng: &mut ChaCha8Rng,
) -> Result<AlsResult> {
    let order = shape.len();
    let mut factors: Vec<CMat> = shape
        .iter()
        .map(|&i| CMat::from_fn(i, rank, |_, _| complex_normal(rng)))
        .collect();
    let mut history = Vec::new();
    let mut converged = false;
    let mut previous: Option<Vec<CMat>> = None;
    for iteration in 1..=opts.max_iterations {
        let mut residual = 0.0;
        for n in 0..order {
            let others: Vec<&CMat> = (0..order)
                .filter(|&m| m != n)
                .map(|m| &factors[m])
                .collect();
            let kr = khatri_rao_all(&others)?;
            let mut gram = CMat::from_element(rank, rank, C64::from(1.0));
            for f in &others {
                gram.component_mul_assign(&(f.adjoint() * *f));
            }
            let update = solve(&gram, &(kr.adjoint() * &unfoldings[n]))
                .map_err(|_| Error::Convergence("singular Gram matrix in ALS update".into()))?;
            if update
                .iter()
                .any(|z| !z.re.is_finite() || !z.im.is_finite())
            {
                return Err(Error::Convergence("non-finite ALS update".into()));
            }
            factors[n] = update.transpose();
            if n == order - 1 {
                residual = (&unfoldings[n] - kr * factors[n].transpose()).norm();
            }
        }
        normalize(&mut factors);
        let mut fit = 1.0 - residual / norm;
        if let (true, Some(prev)) = (opts.line_search && iteration > 2, &previous) {
            let step = C64::from((iteration as f64).cbrt());
            let mut trial: Vec<CMat> = factors
                .iter()
                .zip(prev)
                .map(|(a, p)| p + (a - p) * step)
                .collect();
            let trial_fit = 1.0 - last_mode_residual(&trial, unfoldings)? / norm;
            if trial_fit > fit {
                normalize(&mut trial);
                factors = trial;
                fit = trial_fit;
            }
        }
        previous = Some(factors.clone());
        if let Some(&prev) = history.last() {
            if fit < prev - 1e-9 {
                log::warn!("ALS fit decreased from {prev} to {fit}");
            }
            history.push(fit);
            if (fit - prev).abs() < opts.tolerance {
                converged = true;
                break;
            }
        } else {
            history.push(fit);
        }
    }
    let fit = *history.last().expect("at least one sweep");
    Ok(AlsResult {
        factors: CpdFactors::new(factors)?,
        fit,
        iterations: history.len(),
        restart: 0,
        converged,
        fit_history: history,
    })
}

/// Move column scale into the last factor to keep the others bounded.
fn normalize(factors: &mut [CMat]) {
    let (last, rest) = factors.split_last_mut().expect("at least one factor");
    for f in rest {
        for l in 0..f.ncols() {
            let s = f.column(l).norm();
            if s > 0.0 {
                f.column_mut(l).unscale_mut(s);
                last.column_mut(l).scale_mut(s);
            }
        }
    }
}

fn last_mode_residual(factors: &[CMat], unfoldings: &[CMat]) -> Result<f64> {
    let (last, rest) = factors.split_last().expect("at least one factor");
    let refs: Vec<&CMat> = rest.iter().collect();
    let kr = khatri_rao_all(&refs)?;
    Ok((unfoldings.last().expect("same order") - kr * last.transpose()).norm())
}

/// Greedy column matching: repeatedly pair the estimated and true columns with
/// the largest `|cos|`, then fix each matched column's complex scale by least
/// squares. Returns `(permutation, congruences, rescaled estimate)` where
/// `permutation[j]` is the estimated column matched to true column `j`.
pub fn match_factors(estimate: &CMat, truth: &CMat) -> Result<(Vec<usize>, Vec<f64>, CMat)> {
    if estimate.shape() != truth.shape() {
        return Err(Error::Dimension(format!(
            "{:?} vs {:?}",
            estimate.shape(),
            truth.shape()
        )));
    }
    let l = truth.ncols();
    let cosine = |i: usize, j: usize| {
        let (a, b) = (estimate.column(i), truth.column(j));
        a.dotc(&b).norm() / (a.norm() * b.norm())
    };
    let mut pairs: Vec<(f64, usize, usize)> = (0..l)
        .flat_map(|i| (0..l).map(move |j| (i, j)))
        .map(|(i, j)| (cosine(i, j), i, j))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut perm = vec![usize::MAX; l];
    let mut congruence = vec![0.0; l];
    let mut used = vec![false; l];
    for (c, i, j) in pairs {
        if used[i] || perm[j] != usize::MAX {
            continue;
        }
        used[i] = true;
        perm[j] = i;
        congruence[j] = c;
    }
    let mut rescaled = CMat::zeros(truth.nrows(), l);
    for (j, &pj) in perm.iter().enumerate() {
        let a: CVec = estimate.column(pj).into_owned();
        let scale = a.dotc(&truth.column(j)) / C64::from(a.norm_squared());
        rescaled.set_column(j, &(a * scale));
    }
    Ok((perm, congruence, rescaled))
}

/// ALS decomposition of the `(S, K, NQ)` reshape followed by per-level
/// generator fits on the recovered first factor.
/// Largest `Π_n |cos(a_n,i, a_n,j)|` over component pairs `i != j`.
pub fn cross_congruence(factors: &CpdFactors) -> f64 {
    let rank = factors.rank();
    let mut worst: f64 = 0.0;
    for i in 0..rank {
        for j in i + 1..rank {
            let c: f64 = factors
                .factors()
                .iter()
                .map(|m| {
                    let (a, b) = (m.column(i), m.column(j));
                    a.dotc(&b).norm() / (a.norm() * b.norm())
                })
                .product();
            worst = worst.max(c);
        }
    }
    worst
}

pub fn als_steering(
    tensor: &DenseTensor,
    scenario: &Scenario,
    algorithm: Algorithm,
    opts: &AlsOptions,
) -> Result<(SteeringEstimates, AlsResult)> {
    let shape = tensor.shape();
    if shape.len() != 4 {
        return Err(Error::Dimension(format!(
            "expected an (S, K, N, Q) tensor, got {shape:?}"
        )));
    }
    let planar = scenario.targets.is_planar();
    if Algorithm::for_layout(&scenario.layout, planar)? != algorithm {
        return Err(Error::InvalidArgument(format!(
            "{algorithm:?} does not apply to this layout"
        )));
    }
    let rank = scenario.targets.len();
    let t = tensor.reshape(&[shape[0], shape[1], shape[2] * shape[3]])?;
    let result = als_cpd(&t, rank, opts)?;
    let cc = cross_congruence(&result.factors);
    if cc > opts.degeneracy_limit {
        return Err(Error::Convergence(format!(
            "degenerate CPD, component cross-congruence {cc:.3}"
        )));
    }
    let g = &result.factors.factors()[0];
    let x = &result.factors.factors()[1];
    let signatures: Vec<CVec> = (0..rank).map(|l| x.column(l).into_owned()).collect();
    let steering = match algorithm {
        Algorithm::Alg3 => {
            let map = sub_ula_map(&scenario.layout)?;
            let columns = CMat::from_fn(map.stacked_len(), rank, |i, l| {
                g[(map.rows[i], l)] / g[(map.rows[0], l)]
            });
            SteeringEstimates::Irregular {
                columns,
                map,
                signatures,
            }
        }
        Algorithm::Alg1 | Algorithm::Alg2 => {
            let sizes = scenario.layout.level_sizes();
            let active = active_levels(&scenario.layout)?;
            let generators = (0..rank)
                .map(|l| {
                    let col = g.column(l);
                    active
                        .iter()
                        .map(|&(r, axis, step)| {
                            let sel = ShiftSelection::for_level(&sizes, r, 1);
                            let (mut num, mut den) = (C64::from(0.0), 0.0);
                            for (&a, &b) in sel.lead.iter().zip(&sel.trail) {
                                num += col[a].conj() * col[b];
                                den += col[a].norm_sqr();
                            }
                            LevelGenerator {
                                axis,
                                step,
                                generator: num / den,
                            }
                        })
                        .collect()
                })
                .collect();
            SteeringEstimates::Uniform {
                generators,
                signatures,
            }
        }
    };
    Ok((steering, result))
}
