//! Dense complex linear algebra helpers on top of nalgebra: ordered SVD,
//! SVD-based pseudo-inverse, general (non-Hermitian) eigendecomposition and
//! polynomial rooting through the companion matrix.
//!
//! The SVD is delegated to faer; nalgebra's complex SVD returns wrong factors
//! for a small fraction of rank-deficient inputs.

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Relative singular-value cutoff used by [`pinv`].
pub const PINV_RCOND: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `e^{j phase}`.
#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

/// Thin SVD with singular values sorted in nonincreasing order.
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

pub fn svd(m: &CMat) -> Svd {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Svd {
            u: CMat::zeros(r, 0),
            s: Vec::new(),
            v: CMat::zeros(c, 0),
        };
    }
    let f = faer::Mat::<C64>::from_fn(r, c, |i, j| m[(i, j)]);
    let dec = f.thin_svd().expect("SVD of a finite matrix");
    let (fu, fs, fv) = (dec.U(), dec.S().column_vector(), dec.V());
    Svd {
        u: CMat::from_fn(r, k, |i, j| fu[(i, j)]),
        s: (0..k).map(|j| fs[j].re).collect(),
        v: CMat::from_fn(c, k, |i, j| fv[(i, j)]),
    }
}

/// Ratio of the largest to the smallest singular value (infinite when rank deficient).
pub fn condition_number(m: &CMat) -> f64 {
    let s = svd(m).s;
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Moore-Penrose pseudo-inverse; singular values below `rcond * s_max` are dropped.
pub fn pinv(m: &CMat, rcond: f64) -> CMat {
    let Svd { u, s, v } = svd(m);
    let cutoff = s.first().copied().unwrap_or(0.0) * rcond;
    let mut out = CMat::zeros(m.ncols(), m.nrows());
    for (k, &sk) in s.iter().enumerate() {
        if sk <= cutoff || sk == 0.0 {
            continue;
        }
        let vk = v.column(k);
        let uk = u.column(k);
        out += (vk * uk.adjoint()) * C64::from(1.0 / sk);
    }
    out
}

/// Solve `a x = b` for square nonsingular `a`.
pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::IllConditioned {
            context: "linear system".into(),
            condition: f64::INFINITY,
        })
}

/// Eigendecomposition of a general complex square matrix.
///
/// Returns eigenvalues and unit-norm eigenvectors (columns), in the order the
/// Schur form produces them. No sorting is applied.
pub fn eig(m: &CMat) -> Result<(Vec<C64>, CMat)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension(format!(
            "eig of {}x{} matrix",
            n,
            m.ncols()
        )));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidArgument("non-finite matrix entry".into()));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Convergence("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let small = f64::EPSILON * t.norm().max(f64::MIN_POSITIVE);

    let mut vectors = CMat::zeros(n, n);
    for i in 0..n {
        let lambda = values[i];
        let mut y = vec![C64::from(0.0); n];
        y[i] = C64::from(1.0);
        for j in (0..i).rev() {
            let mut acc = C64::from(0.0);
            for (k, yk) in y.iter().enumerate().take(i + 1).skip(j + 1) {
                acc += t[(j, k)] * yk;
            }
            let mut d = t[(j, j)] - lambda;
            if d.norm() < small {
                d = C64::from(small);
            }
            y[j] = -acc / d;
        }
        let y = CVec::from_vec(y);
        let v = &q * y;
        let norm = v.norm();
        vectors.set_column(i, &(v / C64::from(norm)));
    }
    Ok((values, vectors))
}

/// Roots of `sum_k coeffs[k] z^k` (ascending powers).
///
/// Leading coefficients that vanish relative to the largest one are trimmed;
/// trailing zero coefficients contribute exact roots at the origin.
pub fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let scale = coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::InvalidArgument(
            "polynomial is identically zero".into(),
        ));
    }
    let mut hi = coeffs.len();
    while hi > 0 && coeffs[hi - 1].norm() <= 1e-14 * scale {
        hi -= 1;
    }
    let mut lo = 0;
    while lo < hi && coeffs[lo].norm() == 0.0 {
        lo += 1;
    }
    let mut roots = vec![C64::from(0.0); lo];
    let c = &coeffs[lo..hi];
    let degree = c.len().saturating_sub(1);
    if degree == 0 {
        return Ok(roots);
    }
    let lead = c[degree];
    let mut companion = CMat::zeros(degree, degree);
    for j in 0..degree {
        companion[(0, j)] = -c[degree - 1 - j] / lead;
    }
    for i in 1..degree {
        companion[(i, i - 1)] = C64::from(1.0);
    }
    let (values, _) = eig(&companion)?;
    roots.extend(values);
    Ok(roots)
}

/// Evaluate an ascending-power polynomial with Horner's rule.
pub fn poly_eval(coeffs: &[C64], z: C64) -> C64 {
    coeffs
        .iter()
        .rev()
        .fold(C64::from(0.0), |acc, &ck| acc * z + ck)
}
