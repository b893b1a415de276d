//! Accuracy metrics over Monte Carlo trials.

use serde::{Deserialize, Serialize};

use crate::array::Target;
use crate::error::{Error, Result};

/// One angle estimate in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angles {
    pub theta_deg: f64,
    pub phi_deg: Option<f64>,
}

impl Angles {
    pub fn is_finite(&self) -> bool {
        self.theta_deg.is_finite() && self.phi_deg.is_none_or(f64::is_finite)
    }

    fn errors(&self, truth: &Target) -> (f64, f64) {
        let dphi = match (self.phi_deg, truth.elevation_deg) {
            (Some(a), Some(b)) => a - b,
            _ => 0.0,
        };
        (self.theta_deg - truth.azimuth_deg, dphi)
    }
}

impl From<&crate::doa::AngleEstimate> for Angles {
    fn from(e: &crate::doa::AngleEstimate) -> Self {
        Self {
            theta_deg: e.theta_deg,
            phi_deg: e.phi_deg,
        }
    }
}

impl From<&Target> for Angles {
    fn from(t: &Target) -> Self {
        Self {
            theta_deg: t.azimuth_deg,
            phi_deg: t.elevation_deg,
        }
    }
}

/// Greedy nearest assignment: `result[l]` is the estimate matched to target
/// `l`. Pairs are taken in order of increasing angular distance.
pub fn assign(estimates: &[Angles], truth: &[Target]) -> Result<Vec<usize>> {
    if estimates.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "{} estimates for {} targets",
            estimates.len(),
            truth.len()
        )));
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(truth.len() * truth.len());
    for (i, e) in estimates.iter().enumerate() {
        for (l, t) in truth.iter().enumerate() {
            let (a, b) = e.errors(t);
            pairs.push((a.hypot(b), i, l));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out = vec![usize::MAX; truth.len()];
    let mut used = vec![false; estimates.len()];
    for (_, i, l) in pairs {
        if !used[i] && out[l] == usize::MAX {
            used[i] = true;
            out[l] = i;
        }
    }
    Ok(out)
}

/// `sqrt(1/(2PL) Σ_p Σ_l [(θ̂ - θ)² + (φ̂ - φ)²])` in degrees; the φ term is
/// absent for linear targets.
pub fn rmse(trials: &[Vec<Angles>], truth: &[Target]) -> Result<f64> {
    if trials.is_empty() || truth.is_empty() {
        return Err(Error::InvalidArgument(
            "rmse needs at least one trial and one target".into(),
        ));
    }
    let mut sum = 0.0;
    for est in trials {
        let a = assign(est, truth)?;
        for (l, t) in truth.iter().enumerate() {
            let (dt, dp) = est[a[l]].errors(t);
            sum += dt * dt + dp * dp;
        }
    }
    Ok((sum / (2 * trials.len() * truth.len()) as f64).sqrt())
}

/// Fraction of trials in which both targets lie within half their separation
/// (per angle) of their estimates.
pub fn resolution_probability(trials: &[Vec<Angles>], truth: &[Target]) -> Result<f64> {
    if truth.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "resolution needs exactly 2 targets, got {}",
            truth.len()
        )));
    }
    if trials.is_empty() {
        return Err(Error::InvalidArgument(
            "resolution needs at least one trial".into(),
        ));
    }
    let half_theta = (truth[0].azimuth_deg - truth[1].azimuth_deg).abs() / 2.0;
    let half_phi = match (truth[0].elevation_deg, truth[1].elevation_deg) {
        (Some(a), Some(b)) => (a - b).abs() / 2.0,
        _ => f64::INFINITY,
    };
    // Absorbs rounding in differences such as -5.5 - (-5).
    let slack = 1e-9;
    let mut resolved = 0;
    for est in trials {
        let a = assign(est, truth)?;
        let ok = truth.iter().enumerate().all(|(l, t)| {
            let (dt, dp) = est[a[l]].errors(t);
            dt.abs() <= half_theta + slack && dp.abs() <= half_phi + slack
        });
        if ok {
            resolved += 1;
        }
    }
    Ok(resolved as f64 / trials.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(t: f64) -> Angles {
        Angles {
            theta_deg: t,
            phi_deg: None,
        }
    }

    #[test]
    fn rmse_examples() {
        let truth = [Target::linear(-5.0, 0.1), Target::linear(5.0, 0.2)];
        assert_eq!(rmse(&[vec![lin(-5.0), lin(5.0)]], &truth).unwrap(), 0.0);
        assert!(
            (rmse(&[vec![lin(12.0)]], &[Target::linear(10.0, 0.0)]).unwrap() - 2f64.sqrt()).abs()
                < 1e-12
        );
        let p = [Target::planar(10.0, 20.0, 0.0)];
        let e = Angles {
            theta_deg: 11.0,
            phi_deg: Some(21.0),
        };
        assert!((rmse(&[vec![e]], &p).unwrap() - 1.0).abs() < 1e-12);
        assert!(rmse(&[vec![lin(0.0)]], &truth).is_err());
    }

    #[test]
    fn assignment_undoes_swaps() {
        let truth = [Target::linear(-5.0, 0.2), Target::linear(-6.0, 0.2)];
        let swapped = vec![lin(-6.1), lin(-4.9)];
        assert_eq!(assign(&swapped, &truth).unwrap(), vec![1, 0]);
        assert!(
            (rmse(std::slice::from_ref(&swapped), &truth).unwrap() - 0.1 / 2f64.sqrt()).abs()
                < 1e-12
        );
        assert_eq!(resolution_probability(&[swapped], &truth).unwrap(), 1.0);
    }

    #[test]
    fn resolution_boundary_counts() {
        let truth = [Target::linear(-5.0, 0.2), Target::linear(-6.0, 0.2)];
        assert_eq!(
            resolution_probability(&[vec![lin(-5.0), lin(-6.0)]], &truth).unwrap(),
            1.0
        );
        assert_eq!(
            resolution_probability(&[vec![lin(-5.5), lin(-5.5)]], &truth).unwrap(),
            1.0
        );
        let trials = [
            vec![lin(-5.0), lin(-6.0)],
            vec![lin(-5.6), lin(-5.4)],
            vec![lin(-5.7), lin(-5.7)],
        ];
        // Second trial: -5.4 → -5 and -5.6 → -6, both within 0.4. Third: -5.7 is 0.7 from -5.
        assert!((resolution_probability(&trials, &truth).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(resolution_probability(&trials, &[Target::linear(1.0, 0.0)]).is_err());
    }

    #[test]
    fn planar_resolution_needs_both_angles() {
        let truth = [
            Target::planar(-10.0, 15.0, 0.2),
            Target::planar(-11.0, 16.0, 0.2),
        ];
        let good = vec![
            Angles {
                theta_deg: -10.2,
                phi_deg: Some(15.3),
            },
            Angles {
                theta_deg: -10.9,
                phi_deg: Some(16.0),
            },
        ];
        let bad_phi = vec![
            Angles {
                theta_deg: -10.0,
                phi_deg: Some(15.6),
            },
            Angles {
                theta_deg: -11.0,
                phi_deg: Some(16.0),
            },
        ];
        assert_eq!(resolution_probability(&[good], &truth).unwrap(), 1.0);
        assert_eq!(resolution_probability(&[bad_phi], &truth).unwrap(), 0.0);
    }
}
