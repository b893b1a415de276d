//! Build a rank-2 CP tensor, unfold it and check `T_(3) = (A ⊙ B) C^T`.

use tbdoa::linalg::{c, CMat};
use tbdoa::tensor::{cpd_reconstruct, khatri_rao, CpdFactors};

fn main() -> tbdoa::error::Result<()> {
    let a = CMat::from_fn(3, 2, |i, j| c(i as f64 + 1.0, j as f64));
    let b = CMat::from_fn(2, 2, |i, j| c(1.0, (i * j) as f64));
    let cc = CMat::from_fn(4, 2, |i, j| c((i + j) as f64, -1.0));
    let t = cpd_reconstruct(&CpdFactors::new(vec![a.clone(), b.clone(), cc.clone()])?)?;
    println!(
        "tensor shape {:?}, ‖T‖ = {:.4}",
        t.shape(),
        t.frobenius_norm()
    );

    let t3 = t.unfold(3)?;
    let formula = khatri_rao(&a, &b)? * cc.transpose();
    println!(
        "mode-3 unfolding is {}x{}, |T_(3) - (A⊙B)C^T| = {:.2e}",
        t3.nrows(),
        t3.ncols(),
        (t3 - formula).norm()
    );
    Ok(())
}
