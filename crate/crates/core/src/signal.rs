//! Received-signal synthesis for transmit-beamspace MIMO radar.
//!
//! The matched-filter output is the fourth-order tensor
//! `Z = [[G, X, B, C]] + τR` of shape `(S, K, N, Q)`: subarrays, waveforms,
//! receive elements and pulses.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::array::{
    steering_matrix, subarray_steering_matrix, ArrayGeometry, SubarrayLayout, TargetSet,
};
use crate::baselines::identifiability::{
    identifiability_check, IdentifiabilityReport, ProblemSize, Variant,
};
use crate::error::{Error, Result};
use crate::linalg::{cis, svd, CMat, C64};
use crate::tensor::{cpd_reconstruct, CpdFactors, DenseTensor};

/// Transmit beamspace matrix `W_0` (`M_0 x K`).
#[derive(Debug, Clone, PartialEq)]
pub struct TbMatrix {
    w0: CMat,
}

impl TbMatrix {
    pub fn new(w0: CMat) -> Result<Self> {
        if w0.ncols() == 0 || w0.ncols() > w0.nrows() {
            return Err(Error::Dimension(format!(
                "TB matrix must be M0 x K with 1 <= K <= M0, got {}x{}",
                w0.nrows(),
                w0.ncols()
            )));
        }
        let s = svd(&w0).s;
        if s.last().copied().unwrap_or(0.0) <= 1e-12 * s[0] {
            return Err(Error::IllConditioned {
                context: "TB matrix".into(),
                condition: s[0] / s.last().copied().unwrap_or(0.0),
            });
        }
        Ok(Self { w0 })
    }

    pub fn matrix(&self) -> &CMat {
        &self.w0
    }

    pub fn elements(&self) -> usize {
        self.w0.nrows()
    }

    pub fn waveforms(&self) -> usize {
        self.w0.ncols()
    }
}

/// First `k_wf` columns of the unitary `M_0`-point DFT matrix,
/// `W[m, k] = e^{-j2πmk/M_0} / √M_0`.
pub fn design_tb_matrix(m0: usize, k_wf: usize) -> Result<TbMatrix> {
    if k_wf == 0 || k_wf > m0 {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= K_wf <= M0, got K_wf={k_wf}, M0={m0}"
        )));
    }
    let norm = C64::from(1.0 / (m0 as f64).sqrt());
    let w0 = CMat::from_fn(m0, k_wf, |m, k| {
        cis(-2.0 * PI * (m * k) as f64 / m0 as f64) * norm
    });
    TbMatrix::new(w0)
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub layout: SubarrayLayout,
    pub receive: ArrayGeometry,
    pub targets: TargetSet,
    pub pulses: usize,
    pub tb: TbMatrix,
    /// `None` means noise-free.
    pub snr_db: Option<f64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        self.targets.validate()?;
        if self.pulses == 0 {
            return Err(Error::InvalidArgument("Q must be >= 1".into()));
        }
        if self.receive.is_empty() {
            return Err(Error::InvalidArgument("receive array is empty".into()));
        }
        if self.tb.elements() != self.layout.reference.len() {
            return Err(Error::Dimension(format!(
                "TB matrix has {} rows but the reference subarray has {} elements",
                self.tb.elements(),
                self.layout.reference.len()
            )));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::InvalidArgument("SNR must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn size(&self) -> ProblemSize {
        ProblemSize {
            subarrays: self.layout.num_subarrays(),
            waveforms: self.tb.waveforms(),
            receivers: self.receive.len(),
            pulses: self.pulses,
            targets: self.targets.len(),
        }
    }

    pub fn shape(&self) -> [usize; 4] {
        let s = self.size();
        [s.subarrays, s.waveforms, s.receivers, s.pulses]
    }

    /// Beamspace transmit signatures `X = W_0^H A_0` (`K x L`).
    pub fn tx_signatures(&self) -> CMat {
        self.tb.matrix().adjoint() * steering_matrix(&self.layout.reference, &self.targets)
    }

    /// Ground-truth CPD factors `(G, X, B, C)` for a given RCS draw.
    pub fn factors(&self, rcs: &[C64]) -> Result<CpdFactors> {
        CpdFactors::new(vec![
            subarray_steering_matrix(&self.layout, &self.targets),
            self.tx_signatures(),
            steering_matrix(&self.receive, &self.targets),
            doppler_matrix(&self.targets, self.pulses, rcs)?,
        ])
    }
}

/// `C[q, l] = σ_l e^{j2π f_l q}` for `q = 1..Q`.
pub fn doppler_matrix(targets: &TargetSet, pulses: usize, rcs: &[C64]) -> Result<CMat> {
    if rcs.len() != targets.len() {
        return Err(Error::Dimension(format!(
            "{} RCS values for {} targets",
            rcs.len(),
            targets.len()
        )));
    }
    let f: Vec<f64> = targets.iter().map(|t| t.doppler).collect();
    Ok(CMat::from_fn(pulses, targets.len(), |q, l| {
        rcs[l] * cis(2.0 * PI * f[l] * (q + 1) as f64)
    }))
}

/// Circular complex Gaussian sample with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Swerling I amplitudes: one complex Gaussian draw per target per CPI.
pub fn draw_rcs<R: Rng + ?Sized>(targets: &TargetSet, rng: &mut R) -> Vec<C64> {
    targets
        .iter()
        .map(|t| complex_normal(rng) * t.power.sqrt())
        .collect()
}

#[derive(Debug, Clone)]
pub struct SignalTensor {
    pub tensor: DenseTensor,
    pub noise_free: DenseTensor,
    pub tau: f64,
    pub rcs: Vec<C64>,
    pub identifiability: IdentifiabilityReport,
}

/// Draw RCS and noise, then synthesize the received tensor.
pub fn build_signal_tensor<R: Rng + ?Sized>(
    scenario: &Scenario,
    rng: &mut R,
) -> Result<SignalTensor> {
    let rcs = draw_rcs(&scenario.targets, rng);
    build_signal_tensor_with_rcs(scenario, rcs, rng)
}

pub fn build_signal_tensor_with_rcs<R: Rng + ?Sized>(
    scenario: &Scenario,
    rcs: Vec<C64>,
    rng: &mut R,
) -> Result<SignalTensor> {
    scenario.validate()?;
    let identifiability = identifiability_check(&scenario.size(), Variant::T);
    if !identifiability.passed {
        log::warn!(
            "rank {} exceeds the {} targets the (S, K, NQ) reshape can identify",
            identifiability.rank,
            identifiability.capacity
        );
    }
    let noise_free = cpd_reconstruct(&scenario.factors(&rcs)?)?;
    let (tensor, tau) = add_noise_snr(&noise_free, scenario.snr_db, rng)?;
    Ok(SignalTensor {
        tensor,
        noise_free,
        tau,
        rcs,
        identifiability,
    })
}

/// Oracle construction that never forms `G` or uses the Khatri-Rao structure:
/// each subarray's steering vectors come from its actual element positions and
/// the per-pulse matched-filter outputs `W_0^H A_s diag(c_q) B^T` are stacked.
pub fn build_tensor_subarraywise(scenario: &Scenario, rcs: &[C64]) -> Result<DenseTensor> {
    scenario.validate()?;
    let [s_count, k_wf, n, q_count] = scenario.shape();
    let wh = scenario.tb.matrix().adjoint();
    let b = steering_matrix(&scenario.receive, &scenario.targets);
    let c = doppler_matrix(&scenario.targets, q_count, rcs)?;
    let mut out = DenseTensor::zeros(vec![s_count, k_wf, n, q_count])?;
    for s in 0..s_count {
        let a_s = steering_matrix(&scenario.layout.subarray(s), &scenario.targets);
        let x_s = &wh * a_s;
        for q in 0..q_count {
            let diag = CMat::from_diagonal(&c.row(q).transpose());
            let y = &x_s * diag * b.transpose();
            for k in 0..k_wf {
                for nn in 0..n {
                    out.set(&[s, k, nn, q], y[(k, nn)]);
                }
            }
        }
    }
    Ok(out)
}

/// Add `τR` with `R` standard complex Gaussian and `τ` chosen so the realized
/// ratio `‖X‖² / ‖τR‖²` equals the requested SNR exactly.
pub fn add_noise_snr<R: Rng + ?Sized>(
    noise_free: &DenseTensor,
    snr_db: Option<f64>,
    rng: &mut R,
) -> Result<(DenseTensor, f64)> {
    let Some(snr_db) = snr_db else {
        return Ok((noise_free.clone(), 0.0));
    };
    let noise: Vec<C64> = (0..noise_free.len()).map(|_| complex_normal(rng)).collect();
    let noise = DenseTensor::new(noise_free.shape().to_vec(), noise)?;
    let tau = noise_free.frobenius_norm() / (noise.frobenius_norm() * 10f64.powf(snr_db / 20.0));
    Ok((noise_free.add_scaled(&noise, C64::from(tau))?, tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::Target;
    use crate::linalg::c;
    use crate::tensor::khatri_rao;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp1_like(step: usize) -> Scenario {
        let layout = SubarrayLayout::uniform_linear(10, 8, step).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let receive = layout.transmit_positions().sample(12, &mut rng).unwrap();
        let targets = TargetSet::new(vec![
            Target::linear(-15.0, -0.1),
            Target::linear(5.0, 0.2),
            Target::linear(15.0, 0.2),
        ])
        .unwrap();
        Scenario {
            layout,
            receive,
            targets,
            pulses: 50,
            tb: design_tb_matrix(10, 4).unwrap(),
            snr_db: None,
        }
    }

    #[test]
    fn tb_matrix_examples() {
        let w = design_tb_matrix(2, 2).unwrap();
        let r = 1.0 / 2f64.sqrt();
        let expected = [c(r, 0.0), c(r, 0.0), c(r, 0.0), c(-r, 0.0)];
        for (g, e) in w.matrix().iter().zip(expected) {
            assert!((g - e).norm() < 1e-15);
        }
        let w = design_tb_matrix(4, 1).unwrap();
        assert!(w.matrix().iter().all(|z| (z.norm() - 0.5).abs() < 1e-15));
        let w = design_tb_matrix(10, 4).unwrap();
        assert!(svd(w.matrix()).s.iter().all(|&s| s > 1e-12));
        assert!(design_tb_matrix(3, 4).is_err());
    }

    #[test]
    fn doppler_examples() {
        let t = TargetSet::new(vec![Target::linear(0.0, 0.25)]).unwrap();
        let m = doppler_matrix(&t, 4, &[C64::from(1.0)]).unwrap();
        let expected = [c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0), c(1.0, 0.0)];
        for (g, e) in m.iter().zip(expected) {
            assert!((g - e).norm() < 1e-15);
        }
        let t = TargetSet::new(vec![Target::linear(0.0, 0.0)]).unwrap();
        assert!(doppler_matrix(&t, 5, &[C64::from(1.0)])
            .unwrap()
            .iter()
            .all(|&z| z == C64::from(1.0)));
        let t = TargetSet::new(vec![Target::linear(-5.0, 0.2), Target::linear(5.0, 0.2)]).unwrap();
        let m = doppler_matrix(&t, 50, &[c(0.3, 1.0), c(-2.0, 0.1)]).unwrap();
        let s = svd(&m).s;
        assert!(s[1] < 1e-12 * s[0]);
    }

    #[test]
    fn rcs_draws() {
        let t = TargetSet::new(vec![
            Target::linear(0.0, 0.0).with_power(0.0),
            Target::linear(9.0, 0.0),
        ])
        .unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        let x = draw_rcs(&t, &mut a);
        assert_eq!(x[0], C64::from(0.0));
        assert_eq!(x, draw_rcs(&t, &mut b));

        let t = TargetSet::new(vec![Target::linear(0.0, 0.0).with_power(2.5)]).unwrap();
        let n = 10_000;
        let var = (0..n)
            .map(|_| draw_rcs(&t, &mut a)[0].norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((var - 2.5).abs() < 0.05 * 2.5, "variance {var}");
    }

    #[test]
    fn single_target_tensor_is_rank_one() {
        let mut sc = exp1_like(10);
        sc.targets = TargetSet::new(vec![Target::linear(12.0, 0.1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sig = build_signal_tensor(&sc, &mut rng).unwrap();
        let s = svd(&sig.tensor.unfold(3).unwrap()).s;
        assert!(s[1] < 1e-12 * s[0]);
        assert_eq!(sig.tau, 0.0);
    }

    #[test]
    fn zero_power_targets_give_zero_tensor() {
        let mut sc = exp1_like(10);
        sc.targets =
            TargetSet::new(sc.targets.iter().map(|t| t.with_power(0.0)).collect()).unwrap();
        let sig = build_signal_tensor(&sc, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(sig.tensor.frobenius_norm(), 0.0);
    }

    #[test]
    fn reshaped_unfolding_matches_factor_product() {
        let sc = exp1_like(10);
        let rcs = vec![c(1.0, 0.5), c(-0.4, 0.9), c(0.7, -1.1)];
        let sig = build_signal_tensor_with_rcs(&sc, rcs.clone(), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        let t = sig.tensor.reshape(&[8, 4, 12 * 50]).unwrap();
        let f = sc.factors(&rcs).unwrap();
        let [g, x, b, cm] = [
            &f.factors()[0],
            &f.factors()[1],
            &f.factors()[2],
            &f.factors()[3],
        ];
        let rhs = khatri_rao(g, x).unwrap() * khatri_rao(b, cm).unwrap().transpose();
        let lhs = t.unfold(3).unwrap();
        assert!((lhs - &rhs).norm() < 1e-12 * rhs.norm());
        assert!(sig.identifiability.passed);
    }

    #[test]
    fn subarraywise_matches_compact() {
        for step in [1, 2, 10] {
            let sc = exp1_like(step);
            let rcs = vec![c(1.0, 0.5), c(-0.4, 0.9), c(0.7, -1.1)];
            let compact = cpd_reconstruct(&sc.factors(&rcs).unwrap()).unwrap();
            let oracle = build_tensor_subarraywise(&sc, &rcs).unwrap();
            let diff = compact
                .add_scaled(&oracle, C64::from(-1.0))
                .unwrap()
                .frobenius_norm();
            assert!(diff < 1e-12 * compact.frobenius_norm());
        }
    }

    #[test]
    fn snr_is_exact() {
        let sc = exp1_like(10);
        let rcs = vec![C64::from(1.0); 3];
        let clean = cpd_reconstruct(&sc.factors(&rcs).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (same, tau) = add_noise_snr(&clean, None, &mut rng).unwrap();
        assert_eq!(tau, 0.0);
        assert_eq!(same, clean);
        for snr in [0.0, 10.0] {
            let (noisy, _) = add_noise_snr(&clean, Some(snr), &mut rng).unwrap();
            let noise = noisy.add_scaled(&clean, C64::from(-1.0)).unwrap();
            let ratio = clean.frobenius_norm().powi(2) / noise.frobenius_norm().powi(2);
            assert!((ratio - 10f64.powf(snr / 10.0)).abs() < 1e-12);
        }
    }
}
