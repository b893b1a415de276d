//! Dense complex tensors and the multilinear primitives used throughout:
//! Khatri-Rao and Kronecker products, mode-n unfolding, reshape and CP
//! reconstruction.
//!
//! Flattening convention: the multi-index `(i_1, ..., i_N)` maps to a flat
//! offset with `i_N` varying fastest. Under this convention stacking subarray,
//! waveform and receive-element samples coincides with the row order of
//! `G ⊙ X ⊙ B`, so unfoldings can be read directly as Khatri-Rao products.

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

/// N-order complex tensor stored in a single flat buffer (last index fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Dimension(format!("invalid tensor shape {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {len} entries, buffer has {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(shape, vec![C64::from(0.0); len])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        index.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| {
            debug_assert!(i < n);
            acc * n + i
        })
    }

    pub fn get(&self, index: &[usize]) -> C64 {
        self.data[self.flat_index(index)]
    }

    pub fn set(&mut self, index: &[usize], value: C64) {
        let k = self.flat_index(index);
        self.data[k] = value;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    /// Elementwise `self + factor * other`.
    pub fn add_scaled(&self, other: &Self, factor: C64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "cannot add tensors of shape {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b * factor)
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            data,
        })
    }

    /// Mode-`mode` unfolding (1-based), shaped `(prod_{m != n} I_m) x I_n`.
    ///
    /// Rows enumerate the retained modes in increasing order with the last one
    /// fastest, so a CP tensor unfolds to `(A1 ⊙ .. ⊙ A_{n-1} ⊙ A_{n+1} ⊙ .. ⊙ AN) A_n^T`.
    pub fn unfold(&self, mode: usize) -> Result<CMat> {
        let n = self.check_mode(mode)?;
        let cols = self.shape[n];
        let rows = self.data.len() / cols;
        let mut out = CMat::zeros(rows, cols);
        let mut index = vec![0usize; self.shape.len()];
        for &value in &self.data {
            let mut row = 0;
            for (m, (&i, &dim)) in index.iter().zip(&self.shape).enumerate() {
                if m != n {
                    row = row * dim + i;
                }
            }
            out[(row, index[n])] = value;
            increment(&mut index, &self.shape);
        }
        Ok(out)
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(matrix: &CMat, mode: usize, shape: &[usize]) -> Result<Self> {
        let mut t = Self::zeros(shape.to_vec())?;
        let n = t.check_mode(mode)?;
        if matrix.ncols() != shape[n] || matrix.nrows() * matrix.ncols() != t.len() {
            return Err(Error::Dimension(format!(
                "cannot fold {}x{} matrix into shape {shape:?} along mode {mode}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let mut index = vec![0usize; shape.len()];
        for k in 0..t.data.len() {
            let mut row = 0;
            for (m, (&i, &dim)) in index.iter().zip(shape).enumerate() {
                if m != n {
                    row = row * dim + i;
                }
            }
            t.data[k] = matrix[(row, index[n])];
            increment(&mut index, shape);
        }
        Ok(t)
    }

    /// Reinterpret the flat buffer under a new shape with the same element count.
    pub fn reshape(&self, new_shape: &[usize]) -> Result<Self> {
        let len: usize = new_shape.iter().product();
        if len != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} ({} entries) to {new_shape:?} ({len} entries)",
                self.shape,
                self.data.len()
            )));
        }
        Self::new(new_shape.to_vec(), self.data.clone())
    }

    /// Order-1 reshape.
    pub fn vec(&self) -> Vec<C64> {
        self.data.clone()
    }

    /// Keep only the listed slices along `mode` (1-based), in the given order.
    /// Indices may repeat.
    pub fn select_mode(&self, mode: usize, indices: &[usize]) -> Result<Self> {
        let n = self.check_mode(mode)?;
        if indices.is_empty() || indices.iter().any(|&i| i >= self.shape[n]) {
            return Err(Error::InvalidArgument(format!(
                "slice selection {indices:?} out of range for mode length {}",
                self.shape[n]
            )));
        }
        let outer: usize = self.shape[..n].iter().product();
        let inner: usize = self.shape[n + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * indices.len() * inner);
        for o in 0..outer {
            for &i in indices {
                let start = (o * self.shape[n] + i) * inner;
                data.extend_from_slice(&self.data[start..start + inner]);
            }
        }
        let mut shape = self.shape.clone();
        shape[n] = indices.len();
        Self::new(shape, data)
    }

    fn check_mode(&self, mode: usize) -> Result<usize> {
        if mode == 0 || mode > self.shape.len() {
            return Err(Error::InvalidArgument(format!(
                "mode {mode} out of range for order-{} tensor",
                self.shape.len()
            )));
        }
        Ok(mode - 1)
    }
}

fn increment(index: &mut [usize], shape: &[usize]) {
    for m in (0..index.len()).rev() {
        index[m] += 1;
        if index[m] < shape[m] {
            return;
        }
        index[m] = 0;
    }
}

/// Factor matrices of a rank-L CP model, one `I_n x L` matrix per mode.
#[derive(Debug, Clone)]
pub struct CpdFactors {
    factors: Vec<CMat>,
}

impl CpdFactors {
    pub fn new(factors: Vec<CMat>) -> Result<Self> {
        let rank = factors.first().map(|f| f.ncols()).unwrap_or(0);
        if rank == 0 {
            return Err(Error::Dimension(
                "CP model needs at least one factor of rank >= 1".into(),
            ));
        }
        if let Some(bad) = factors.iter().find(|f| f.ncols() != rank || f.nrows() == 0) {
            return Err(Error::Dimension(format!(
                "factor of size {}x{} does not match rank {rank}",
                bad.nrows(),
                bad.ncols()
            )));
        }
        Ok(Self { factors })
    }

    pub fn rank(&self) -> usize {
        self.factors[0].ncols()
    }

    pub fn factors(&self) -> &[CMat] {
        &self.factors
    }

    pub fn into_factors(self) -> Vec<CMat> {
        self.factors
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }
}

/// Columnwise Kronecker product; row `(i, j)` maps to `i * J + j`.
pub fn khatri_rao(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "Khatri-Rao needs equal column counts, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let (ra, rb) = (a.nrows(), b.nrows());
    Ok(CMat::from_fn(ra * rb, a.ncols(), |r, l| {
        a[(r / rb, l)] * b[(r % rb, l)]
    }))
}

/// Khatri-Rao product of a sequence, first factor slowest.
pub fn khatri_rao_all(factors: &[&CMat]) -> Result<CMat> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("empty Khatri-Rao product".into()))?;
    rest.iter()
        .try_fold((*first).clone(), |acc, f| khatri_rao(&acc, f))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (rb, cb) = (b.nrows(), b.ncols());
    CMat::from_fn(a.nrows() * rb, a.ncols() * cb, |r, c| {
        a[(r / rb, c / cb)] * b[(r % rb, c % cb)]
    })
}

/// Sum of outer products of corresponding factor columns.
pub fn cpd_reconstruct(f: &CpdFactors) -> Result<DenseTensor> {
    let factors = f.factors();
    let shape = f.shape();
    let last = factors.last().expect("nonempty");
    let head: Vec<&CMat> = factors[..factors.len() - 1].iter().collect();
    let lead = if head.is_empty() {
        CMat::from_element(1, f.rank(), C64::from(1.0))
    } else {
        khatri_rao_all(&head)?
    };
    let cols = last.nrows();
    let mut data = vec![C64::from(0.0); lead.nrows() * cols];
    for r in 0..lead.nrows() {
        for i in 0..cols {
            let mut acc = C64::from(0.0);
            for l in 0..f.rank() {
                acc += lead[(r, l)] * last[(i, l)];
            }
            data[r * cols + i] = acc;
        }
    }
    DenseTensor::new(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn real(rows: usize, cols: usize, v: &[f64]) -> CMat {
        CMat::from_row_slice(
            rows,
            cols,
            &v.iter().map(|&x| C64::from(x)).collect::<Vec<_>>(),
        )
    }

    fn pseudo_random(rows: usize, cols: usize, seed: f64) -> CMat {
        CMat::from_fn(rows, cols, |i, j| {
            let t = seed + 0.731 * i as f64 + 1.913 * j as f64;
            c((3.1 * t).sin(), (1.7 * t).cos())
        })
    }

    #[test]
    fn khatri_rao_hand_example() {
        let a = real(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let expected = real(4, 2, &[0.0, 2.0, 1.0, 0.0, 0.0, 4.0, 3.0, 0.0]);
        assert_eq!(khatri_rao(&a, &b).unwrap(), expected);
    }

    #[test]
    fn khatri_rao_identity_row_and_identities() {
        let b = pseudo_random(3, 2, 0.4);
        let ones = CMat::from_element(1, 2, C64::from(1.0));
        assert_eq!(khatri_rao(&ones, &b).unwrap(), b);

        let i2 = CMat::identity(2, 2);
        let expected = real(4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(khatri_rao(&i2, &i2).unwrap(), expected);
    }

    #[test]
    fn khatri_rao_rejects_column_mismatch() {
        let a = CMat::zeros(2, 2);
        let b = CMat::zeros(2, 3);
        assert!(matches!(khatri_rao(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn kron_examples() {
        assert_eq!(
            kron(&CMat::identity(2, 2), &CMat::identity(3, 3)),
            CMat::identity(6, 6)
        );
        let z = c(0.3, -0.8);
        let w = c(-0.1, 0.5);
        let a = CMat::from_row_slice(1, 2, &[C64::from(1.0), z]);
        let b = CMat::from_row_slice(1, 2, &[C64::from(1.0), w]);
        let expected = CMat::from_row_slice(1, 4, &[C64::from(1.0), w, z, z * w]);
        assert_eq!(kron(&a, &b), expected);
    }

    #[test]
    fn kron_mixed_product() {
        let a = pseudo_random(2, 2, 0.1);
        let cm = pseudo_random(2, 2, 1.2);
        let d = pseudo_random(2, 2, 2.3);
        let e = pseudo_random(2, 2, 3.4);
        let lhs = kron(&a, &cm) * kron(&d, &e);
        let rhs = kron(&(&a * &d), &(&cm * &e));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn unfold_order_two_is_the_matrix() {
        let m = pseudo_random(2, 3, 0.0);
        let data: Vec<C64> = (0..2)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)])
            .collect();
        let t = DenseTensor::new(vec![2, 3], data).unwrap();
        // Mode 2 keeps mode 1 as rows.
        assert_eq!(t.unfold(2).unwrap(), m);
        assert_eq!(t.unfold(1).unwrap(), m.transpose());
    }

    #[test]
    fn unfold_rank_one_matches_khatri_rao() {
        let a = pseudo_random(2, 1, 0.5);
        let b = pseudo_random(3, 1, 1.5);
        let cc = pseudo_random(4, 1, 2.5);
        let f = CpdFactors::new(vec![a.clone(), b.clone(), cc.clone()]).unwrap();
        let t = cpd_reconstruct(&f).unwrap();
        let expected = khatri_rao(&a, &b).unwrap() * cc.transpose();
        assert!((t.unfold(3).unwrap() - expected).norm() < 1e-14);
    }

    #[test]
    fn unfold_fold_round_trip_is_exact() {
        let data: Vec<C64> = (0..60).map(|k| c(k as f64, -(k as f64) * 0.5)).collect();
        let t = DenseTensor::new(vec![3, 4, 5], data).unwrap();
        for mode in 1..=3 {
            let m = t.unfold(mode).unwrap();
            assert_eq!(DenseTensor::fold(&m, mode, t.shape()).unwrap(), t);
        }
        assert!(t.unfold(0).is_err());
        assert!(t.unfold(4).is_err());
    }

    #[test]
    fn reshape_merges_trailing_factors() {
        let a = pseudo_random(2, 2, 0.2);
        let b = pseudo_random(3, 2, 0.9);
        let cc = pseudo_random(4, 2, 1.7);
        let f = CpdFactors::new(vec![a.clone(), b.clone(), cc.clone()]).unwrap();
        let t = cpd_reconstruct(&f).unwrap();
        let merged = t.reshape(&[2, 12]).unwrap();
        let expected = khatri_rao(&b, &cc).unwrap() * a.transpose();
        assert!((merged.unfold(1).unwrap() - expected).norm() < 1e-14);
        assert_eq!(merged.reshape(&[2, 3, 4]).unwrap(), t);
        assert!(t.reshape(&[5, 5]).is_err());
    }

    #[test]
    fn reconstruct_simple_cases() {
        let a = real(2, 1, &[1.0, 2.0]);
        let b = real(2, 1, &[3.0, 5.0]);
        let cc = real(2, 1, &[7.0, 11.0]);
        let t = cpd_reconstruct(&CpdFactors::new(vec![a, b, cc]).unwrap()).unwrap();
        assert_eq!(t.get(&[1, 1, 1]), C64::from(2.0 * 5.0 * 11.0));
        assert_eq!(t.get(&[0, 1, 0]), C64::from(1.0 * 5.0 * 7.0));

        let ones = CMat::from_element(3, 2, C64::from(1.0));
        let t = cpd_reconstruct(&CpdFactors::new(vec![ones.clone(), ones.clone(), ones]).unwrap())
            .unwrap();
        assert!(t.data().iter().all(|&z| z == C64::from(2.0)));
    }

    #[test]
    fn reconstruct_then_unfold_matches_formula_every_mode() {
        let fs: Vec<CMat> = [(3, 0.1), (4, 0.7), (2, 1.3), (3, 2.1)]
            .iter()
            .map(|&(n, s)| pseudo_random(n, 3, s))
            .collect();
        let f = CpdFactors::new(fs.clone()).unwrap();
        let t = cpd_reconstruct(&f).unwrap();
        for n in 0..fs.len() {
            let others: Vec<&CMat> = fs
                .iter()
                .enumerate()
                .filter(|(m, _)| *m != n)
                .map(|(_, f)| f)
                .collect();
            let expected = khatri_rao_all(&others).unwrap() * fs[n].transpose();
            assert!((t.unfold(n + 1).unwrap() - expected).norm() < 1e-13);
        }
    }

    #[test]
    fn select_mode_picks_slices() {
        let data: Vec<C64> = (0..24).map(|k| C64::from(k as f64)).collect();
        let t = DenseTensor::new(vec![4, 3, 2], data).unwrap();
        let s = t.select_mode(1, &[2, 0, 2]).unwrap();
        assert_eq!(s.shape(), &[3, 3, 2]);
        assert_eq!(s.get(&[0, 1, 1]), t.get(&[2, 1, 1]));
        assert_eq!(s.get(&[1, 2, 0]), t.get(&[0, 2, 0]));
        assert_eq!(s.get(&[2, 0, 1]), t.get(&[2, 0, 1]));
        assert!(t.select_mode(1, &[4]).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(DenseTensor::new(vec![2, 0], vec![]).is_err());
        assert!(DenseTensor::new(vec![2, 2], vec![C64::from(0.0); 3]).is_err());
        assert!(CpdFactors::new(vec![CMat::zeros(2, 2), CMat::zeros(3, 1)]).is_err());
    }
}
