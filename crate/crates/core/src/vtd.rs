//! Vandermonde-constrained tensor decomposition.
//!
//! The signal subspace of `T_(3) = (G ⊙ X)(B ⊙ C)^T` is spanned by the left
//! singular vectors `U = (G ⊙ X) E^{-1}` for some nonsingular `E`. Rows of `G`
//! that differ by a subarray shift are related by a diagonal of generators, so
//! `U_1^† U_2 = E^{-1} Ω E` reveals both the generators and `E` at once.

use crate::error::{Error, Result};
use crate::linalg::{eig, pinv, solve, svd, CMat, CVec, C64, PINV_RCOND};
use crate::tensor::{khatri_rao, DenseTensor};

/// Singular values below this fraction of the largest are treated as noise
/// when the rank is detected from data.
pub const RANK_DETECTION_RTOL: f64 = 1e-6;
/// Leading row blocks with a larger condition number are rejected.
pub const MAX_SELECTION_CONDITION: f64 = 1e10;
/// Off-diagonal to diagonal energy ratio above which generator pairing fails.
pub const MAX_PAIRING_LEAKAGE: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct UnfoldingSvd {
    pub u: CMat,
    pub singular_values: Vec<f64>,
    pub v: CMat,
    pub rank: usize,
    /// Number of singular values above `RANK_DETECTION_RTOL * σ_1`.
    pub detected_rank: usize,
}

pub fn detect_rank(singular_values: &[f64]) -> usize {
    let top = singular_values.first().copied().unwrap_or(0.0);
    singular_values
        .iter()
        .filter(|&&s| s > RANK_DETECTION_RTOL * top)
        .count()
}

/// Rank-`rank` truncation of the SVD of `m`.
pub fn low_rank_svd(m: &CMat, rank: usize) -> Result<UnfoldingSvd> {
    if rank == 0 || rank > m.nrows().min(m.ncols()) {
        return Err(Error::Dimension(format!(
            "rank {rank} is not in 1..={} for a {}x{} matrix",
            m.nrows().min(m.ncols()),
            m.nrows(),
            m.ncols()
        )));
    }
    let full = svd(m);
    let detected_rank = detect_rank(&full.s);
    Ok(UnfoldingSvd {
        u: full.u.columns(0, rank).into_owned(),
        singular_values: full.s[..rank].to_vec(),
        v: full.v.columns(0, rank).into_owned(),
        rank,
        detected_rank,
    })
}

/// Paired row sets: row `lead[i]` of the steering factor times the generator
/// equals row `trail[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftSelection {
    pub lead: Vec<usize>,
    pub trail: Vec<usize>,
}

impl ShiftSelection {
    /// Expand subarray pairs into row pairs of an unfolding whose rows are
    /// `subarray * inner + j`.
    pub fn from_pairs(pairs: &[(usize, usize)], inner: usize) -> Self {
        let expand = |pick: fn(&(usize, usize)) -> usize| {
            pairs
                .iter()
                .flat_map(|p| (0..inner).map(move |j| pick(p) * inner + j))
                .collect()
        };
        Self {
            lead: expand(|p| p.0),
            trail: expand(|p| p.1),
        }
    }

    /// Shift by one position along `level` of a multi-level layout, where the
    /// subarray index has level 0 varying fastest.
    pub fn for_level(level_sizes: &[usize], level: usize, inner: usize) -> Self {
        let stride: usize = level_sizes[..level].iter().product();
        let total: usize = level_sizes.iter().product();
        let pairs: Vec<(usize, usize)> = (0..total)
            .filter(|s| (s / stride) % level_sizes[level] + 1 < level_sizes[level])
            .map(|s| (s, s + stride))
            .collect();
        Self::from_pairs(&pairs, inner)
    }

    pub fn len(&self) -> usize {
        self.lead.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lead.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorEstimates {
    /// `generators[r][l]`: generator of selection `r` for column `l` of `E`.
    pub generators: Vec<Vec<C64>>,
    /// Eigenvectors shared by every selection.
    pub e: CMat,
    /// Selection whose eigendecomposition produced `E`.
    pub primary: usize,
    /// Off-diagonal energy ratio of `E^{-1} Ψ_r E` per selection (0 for the primary).
    pub leakage: Vec<f64>,
    pub e_condition: f64,
    pub lead_condition: Vec<f64>,
}

fn min_separation(values: &[C64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            best = best.min((values[i] - values[j]).norm());
        }
    }
    best
}

fn singular_condition(m: &CMat) -> f64 {
    let s = svd(m).s;
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Generators for every shift selection, paired through one shared `E`.
///
/// `E` comes from the selection whose eigenvalues are best separated; every
/// other generator vector is read off the diagonal of `E^{-1} U_a^† U_b E`.
pub fn shift_invariance_generators(
    u: &CMat,
    selections: &[ShiftSelection],
) -> Result<GeneratorEstimates> {
    if selections.is_empty() {
        return Err(Error::InvalidArgument(
            "no shift selection available".into(),
        ));
    }
    let rank = u.ncols();
    let mut psis = Vec::with_capacity(selections.len());
    let mut lead_condition = Vec::with_capacity(selections.len());
    for sel in selections {
        if sel.len() < rank {
            return Err(Error::Identifiability(format!(
                "{} shifted rows cannot support rank {rank}",
                sel.len()
            )));
        }
        let ua = u.select_rows(sel.lead.iter());
        let ub = u.select_rows(sel.trail.iter());
        let cond = singular_condition(&ua);
        if cond > MAX_SELECTION_CONDITION {
            return Err(Error::IllConditioned {
                context: "leading row block".into(),
                condition: cond,
            });
        }
        lead_condition.push(cond);
        psis.push(pinv(&ua, PINV_RCOND) * ub);
    }

    let mut primary = 0;
    let mut primary_eig = None;
    let mut best_sep = f64::NEG_INFINITY;
    for (r, psi) in psis.iter().enumerate() {
        let (values, vectors) = eig(psi)?;
        let sep = if rank == 1 {
            0.0
        } else {
            min_separation(&values)
        };
        if sep > best_sep {
            best_sep = sep;
            primary = r;
            primary_eig = Some((values, vectors));
        }
    }
    let (values, e) = primary_eig.expect("at least one selection");
    let e_condition = singular_condition(&e);
    if !e_condition.is_finite() || e_condition > 1.0 / f64::EPSILON {
        return Err(Error::IllConditioned {
            context: "eigenvector matrix E".into(),
            condition: e_condition,
        });
    }

    let mut generators = Vec::with_capacity(psis.len());
    let mut leakage = Vec::with_capacity(psis.len());
    for (r, psi) in psis.iter().enumerate() {
        if r == primary {
            generators.push(values.clone());
            leakage.push(0.0);
            continue;
        }
        let d = solve(&e, &(psi * &e))?;
        let diag: Vec<C64> = (0..rank).map(|l| d[(l, l)]).collect();
        let diag_energy: f64 = diag.iter().map(|z| z.norm_sqr()).sum();
        let off_energy = d.iter().map(|z| z.norm_sqr()).sum::<f64>() - diag_energy;
        let ratio = (off_energy / diag_energy).sqrt();
        if !(ratio <= MAX_PAIRING_LEAKAGE) {
            return Err(Error::Pairing { leakage: ratio });
        }
        generators.push(diag);
        leakage.push(ratio);
    }
    for z in generators.iter().flatten() {
        let m = z.norm();
        if !(0.5..=2.0).contains(&m) {
            return Err(Error::DegenerateGenerator { modulus: m });
        }
    }
    Ok(GeneratorEstimates {
        generators,
        e,
        primary,
        leakage,
        e_condition,
        lead_condition,
    })
}

/// Vandermonde column `κ_R ⊗ .. ⊗ κ_1` with `κ_r = [1, ω_r, .., ω_r^{S_r-1}]`.
/// Generators are projected onto the unit circle first.
pub fn vandermonde_column(generators: &[C64], level_sizes: &[usize]) -> CVec {
    let mut kappa = CVec::from_element(1, C64::from(1.0));
    for (w, &size) in generators.iter().zip(level_sizes).rev() {
        let unit = w / w.norm();
        let level = CVec::from_fn(size, |i, _| unit.powu(i as u32));
        kappa = kappa.kronecker(&level);
    }
    kappa
}

/// `χ = (κ^H ⊗ I) U e / (κ^H κ)`: the transmit signature hidden in one column
/// of `U E`, up to the CPD scale.
pub fn recover_tx_signature(u: &CMat, e_col: &CVec, kappa: &CVec, inner: usize) -> Result<CVec> {
    if u.nrows() != kappa.len() * inner {
        return Err(Error::Dimension(format!(
            "U has {} rows, expected {} x {inner}",
            u.nrows(),
            kappa.len()
        )));
    }
    let y = u * e_col;
    let mut chi = CVec::zeros(inner);
    for (s, ks) in kappa.iter().enumerate() {
        for j in 0..inner {
            chi[j] += ks.conj() * y[s * inner + j];
        }
    }
    Ok(chi / C64::from(kappa.norm_squared()))
}

/// Least-squares third factor given the first two:
/// `A3^T = ((A1^H A1) * (A2^H A2))^{-1} (A1 ⊙ A2)^H T_(3)`.
pub fn recover_third_factor(a1: &CMat, a2: &CMat, t3: &CMat) -> Result<CMat> {
    let kr = khatri_rao(a1, a2)?;
    if kr.nrows() != t3.nrows() {
        return Err(Error::Dimension(format!(
            "unfolding has {} rows, factors imply {}",
            t3.nrows(),
            kr.nrows()
        )));
    }
    let gram = (a1.adjoint() * a1).component_mul(&(a2.adjoint() * a2));
    let cond = singular_condition(&gram);
    if cond > 1e12 {
        return Err(Error::IllConditioned {
            context: "Gram product".into(),
            condition: cond,
        });
    }
    Ok(solve(&gram, &(kr.adjoint() * t3))?.transpose())
}

/// Result of decomposing `T` with a uniform Vandermonde first factor.
#[derive(Debug, Clone)]
pub struct VtdFactors {
    /// Estimated subarray steering matrix with unit first row.
    pub g: CMat,
    pub x: CMat,
    /// Third factor (`B ⊙ C` for the signal tensor).
    pub third: CMat,
    pub generators: GeneratorEstimates,
    pub svd: UnfoldingSvd,
}

/// Decompose a third-order tensor whose first factor is the Khatri-Rao product
/// of Vandermonde matrices with the given level sizes (level 0 fastest).
pub fn decompose(t: &DenseTensor, level_sizes: &[usize], rank: usize) -> Result<VtdFactors> {
    if t.order() != 3 || t.shape()[0] != level_sizes.iter().product::<usize>() {
        return Err(Error::Dimension(format!(
            "expected a third-order tensor with {} rows in mode 1, got shape {:?}",
            level_sizes.iter().product::<usize>(),
            t.shape()
        )));
    }
    let inner = t.shape()[1];
    let t3 = t.unfold(3)?;
    let usvd = low_rank_svd(&t3, rank)?;
    let selections: Vec<ShiftSelection> = (0..level_sizes.len())
        .filter(|&r| level_sizes[r] > 1)
        .map(|r| ShiftSelection::for_level(level_sizes, r, inner))
        .collect();
    let active: Vec<usize> = (0..level_sizes.len())
        .filter(|&r| level_sizes[r] > 1)
        .collect();
    let gens = shift_invariance_generators(&usvd.u, &selections)?;
    let mut g = CMat::zeros(t.shape()[0], rank);
    let mut x = CMat::zeros(inner, rank);
    for l in 0..rank {
        let mut per_level = vec![C64::from(1.0); level_sizes.len()];
        for (sel, &r) in active.iter().enumerate() {
            per_level[r] = gens.generators[sel][l];
        }
        let kappa = vandermonde_column(&per_level, level_sizes);
        let chi = recover_tx_signature(&usvd.u, &gens.e.column(l).into_owned(), &kappa, inner)?;
        g.set_column(l, &kappa);
        x.set_column(l, &chi);
    }
    let third = recover_third_factor(&g, &x, &t3)?;
    Ok(VtdFactors {
        g,
        x,
        third,
        generators: gens,
        svd: usvd,
    })
}

/// One sub-ULA: subarrays whose offsets form an arithmetic progression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubUlaBlock {
    pub step: usize,
    /// Subarray indices, in increasing offset order.
    pub members: Vec<usize>,
    /// Position of the first member in the stacked row order.
    pub start: usize,
}

/// Decomposition of an irregular linear layout into uniform sub-ULAs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubUlaMap {
    pub offsets: Vec<usize>,
    pub blocks: Vec<SubUlaBlock>,
    /// Stacked row order: `rows[i]` is the subarray occupying stacked row `i`.
    pub rows: Vec<usize>,
    /// Distinct steps, increasing.
    pub steps: Vec<usize>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl SubUlaMap {
    /// Greedy construction: for steps 1, 2, .. add every maximal arithmetic
    /// progression of length >= 2, until every subarray is covered and the
    /// step set contains a coprime pair (or steps run out).
    pub fn greedy(offsets: &[usize]) -> Result<Self> {
        if offsets.len() < 2 {
            return Err(Error::InvalidArgument("need at least two subarrays".into()));
        }
        if offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "offsets must be strictly increasing".into(),
            ));
        }
        let position = |o: usize| offsets.iter().position(|&x| x == o);
        let span = offsets[offsets.len() - 1] - offsets[0];
        let mut map = SubUlaMap {
            offsets: offsets.to_vec(),
            blocks: vec![],
            rows: vec![],
            steps: vec![],
        };
        let mut covered = vec![false; offsets.len()];
        for step in 1..=span {
            let mut added = false;
            for (i, &o) in offsets.iter().enumerate() {
                if o >= step && position(o - step).is_some() {
                    continue;
                }
                let mut members = vec![i];
                let mut next = o + step;
                while let Some(j) = position(next) {
                    members.push(j);
                    next += step;
                }
                if members.len() >= 2 {
                    for &m in &members {
                        covered[m] = true;
                    }
                    map.blocks.push(SubUlaBlock {
                        step,
                        start: map.rows.len(),
                        members: members.clone(),
                    });
                    map.rows.extend(members);
                    added = true;
                }
            }
            if added {
                map.steps.push(step);
            }
            if covered.iter().all(|&c| c) && map.has_coprime_pair() {
                break;
            }
        }
        if !covered.iter().all(|&c| c) {
            return Err(Error::InvalidArgument(
                "sub-ULA blocks do not cover every subarray".into(),
            ));
        }
        Ok(map)
    }

    pub fn has_coprime_pair(&self) -> bool {
        self.steps
            .iter()
            .any(|&a| self.steps.iter().any(|&b| gcd(a, b) == 1))
    }

    pub fn stacked_len(&self) -> usize {
        self.rows.len()
    }

    /// Block with the most members; ties go to the smaller step.
    pub fn largest_block(&self) -> usize {
        let mut best = 0;
        for (b, block) in self.blocks.iter().enumerate() {
            if block.members.len() > self.blocks[best].members.len() {
                best = b;
            }
        }
        best
    }

    /// Consecutive-member shift selection of block `b` in stacked row order.
    pub fn block_selection(&self, b: usize, inner: usize) -> ShiftSelection {
        let block = &self.blocks[b];
        let pairs: Vec<(usize, usize)> = (0..block.members.len() - 1)
            .map(|i| (block.start + i, block.start + i + 1))
            .collect();
        ShiftSelection::from_pairs(&pairs, inner)
    }
}

#[derive(Debug, Clone)]
pub struct GeneralizedVandermondeEstimate {
    /// Stacked-order columns of `K^(sub)`, first entry 1 (`S' x L`).
    pub columns: CMat,
    /// Matching transmit signatures (`K x L`).
    pub signatures: CMat,
    pub generators: GeneratorEstimates,
    pub svd: UnfoldingSvd,
}

/// Estimate the generalized Vandermonde columns of an irregular linear layout.
///
/// `t` is the `(S, K, NQ)` tensor; its first mode is restacked into sub-ULA
/// order, the signal subspace is computed and `E` is taken from the largest
/// sub-ULA. Each column of `U E` is then a rank-one `S' x K` matrix whose left
/// factor is the steering column.
pub fn generalized_vandermonde_estimate(
    t: &DenseTensor,
    map: &SubUlaMap,
    rank: usize,
) -> Result<GeneralizedVandermondeEstimate> {
    if map.blocks.is_empty() {
        return Err(Error::InvalidArgument("sub-ULA map has no blocks".into()));
    }
    let inner = t.shape()[1];
    let stacked = t.select_mode(1, &map.rows)?;
    let usvd = low_rank_svd(&stacked.unfold(3)?, rank)?;
    let selection = map.block_selection(map.largest_block(), inner);
    let gens = shift_invariance_generators(&usvd.u, &[selection])?;
    let ue = &usvd.u * &gens.e;
    let s_sub = map.stacked_len();
    let mut columns = CMat::zeros(s_sub, rank);
    let mut signatures = CMat::zeros(inner, rank);
    for l in 0..rank {
        let m = CMat::from_fn(s_sub, inner, |s, k| ue[(s * inner + k, l)]);
        let dec = svd(&m);
        let left = dec.u.column(0);
        let first = left[0];
        if first.norm() < 1e-300 {
            return Err(Error::IllConditioned {
                context: "steering column".into(),
                condition: f64::INFINITY,
            });
        }
        columns.set_column(l, &(left / first));
        let chi = dec.v.column(0).map(|z| z.conj()) * (first * C64::from(dec.s[0]));
        signatures.set_column(l, &chi);
    }
    Ok(GeneralizedVandermondeEstimate {
        columns,
        signatures,
        generators: gens,
        svd: usvd,
    })
}
