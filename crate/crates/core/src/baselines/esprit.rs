//! Covariance-based ESPRIT on the subarray shift invariance.

use crate::array::Axis;
use crate::doa::{active_levels, AngleEstimate, Candidate, Direction, EstimateSource};
use crate::error::{Error, Result};
use crate::linalg::{eig, pinv, solve, svd, CMat, C64, PINV_RCOND};
use crate::signal::Scenario;
use crate::tensor::DenseTensor;
use crate::vtd::ShiftSelection;

/// ESPRIT on the `(S, KN, Q)` arrangement. The signal subspace is the top
/// `L` left singular vectors of the `SKN x Q` unfolding, i.e. the principal
/// eigenvectors of the sample covariance. Each axis uses its smallest-step
/// level and keeps only the principal (`k = 0`) branch, so steps larger than
/// one alias.
pub fn esprit_covariance(tensor: &DenseTensor, scenario: &Scenario) -> Result<Vec<AngleEstimate>> {
    let shape = tensor.shape();
    if shape.len() != 4 {
        return Err(Error::Dimension(format!(
            "expected an (S, K, N, Q) tensor, got {shape:?}"
        )));
    }
    if !scenario.layout.is_uniform() {
        return Err(Error::InvalidArgument(
            "ESPRIT needs uniformly spaced subarrays".into(),
        ));
    }
    let rank = scenario.targets.len();
    let (s, kn, q) = (shape[0], shape[1] * shape[2], shape[3]);
    if q < rank || s * kn < rank {
        return Err(Error::Identifiability(format!(
            "{rank} targets exceed the {s}x{kn}x{q} covariance rank"
        )));
    }
    let f3 = tensor.reshape(&[s, kn, q])?.unfold(3)?;
    let u = svd(&f3).u.columns(0, rank).into_owned();

    let active = active_levels(&scenario.layout)?;
    let sizes = scenario.layout.level_sizes();
    let pick = |axis: Axis| {
        active
            .iter()
            .enumerate()
            .filter(|(_, l)| l.1 == axis)
            .min_by_key(|(_, l)| l.2)
    };
    let chosen: Vec<_> = [Axis::X, Axis::Y].into_iter().filter_map(pick).collect();
    let rows = |idx: &[usize]| CMat::from_fn(idx.len(), rank, |i, j| u[(idx[i], j)]);
    let mut generators: Vec<Vec<C64>> = Vec::with_capacity(chosen.len());
    let mut basis: Option<CMat> = None;
    for (_, &(r, _, _)) in &chosen {
        let sel = ShiftSelection::for_level(&sizes, r, kn);
        let psi = pinv(&rows(&sel.lead), PINV_RCOND) * rows(&sel.trail);
        match &basis {
            None => {
                let (values, vectors) = eig(&psi)?;
                generators.push(values);
                basis = Some(vectors);
            }
            Some(e) => {
                let d = solve(e, &(psi * e))?;
                generators.push((0..rank).map(|l| d[(l, l)]).collect());
            }
        }
    }

    let planar = scenario.targets.is_planar();
    let mut out = Vec::with_capacity(rank);
    for l in 0..rank {
        let (mut v, mut w) = (0.0, 0.0);
        for (i, (_, &(_, axis, step))) in chosen.iter().enumerate() {
            let d = -generators[i][l].arg() / (std::f64::consts::PI * step as f64);
            match axis {
                Axis::X => v = d,
                _ => w = d,
            }
        }
        let direction = if planar {
            let r = w.hypot(v);
            if r > 1.0 {
                Direction::planar(w / r, v / r)
            } else {
                Direction::planar(w, v)
            }
        } else {
            Direction::linear(v)
        };
        out.push(AngleEstimate::from_direction(
            direction,
            EstimateSource::Generator,
            vec![Candidate {
                direction,
                k: [0, 0],
            }],
        ));
    }
    Ok(out)
}
