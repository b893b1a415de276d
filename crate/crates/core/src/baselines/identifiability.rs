//! Uniqueness predicates for the three-way reshapes used by the estimators.
//!
//! Every variant reduces to `min((I1 - 1) I2, I3) >= L` for a particular
//! choice of `(I1, I2, I3)`.

use serde::Serialize;

/// Tensor sizes relevant to identifiability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ProblemSize {
    pub subarrays: usize,
    pub waveforms: usize,
    pub receivers: usize,
    pub pulses: usize,
    pub targets: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Variant {
    /// `(S, K N, Q)`: receive steering kept in the second mode.
    F,
    /// `(S, K, N Q)`: receive steering merged with the Doppler mode.
    T,
    /// Any reshape `I1 x I2 x I3` whose first mode carries the Vandermonde factor.
    Reshaped { i1: usize, i2: usize, i3: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Binding {
    /// `(I1 - 1) I2` is the smaller term.
    ShiftRows,
    /// `I3` is the smaller term.
    ThirdMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IdentifiabilityReport {
    pub variant: Variant,
    pub passed: bool,
    /// `min((I1 - 1) I2, I3)`: the largest rank the reshape supports.
    pub capacity: usize,
    pub binding: Binding,
    pub rank: usize,
}

impl Variant {
    pub fn dims(&self, size: &ProblemSize) -> (usize, usize, usize) {
        match *self {
            Variant::F => (size.subarrays, size.waveforms * size.receivers, size.pulses),
            Variant::T => (size.subarrays, size.waveforms, size.receivers * size.pulses),
            Variant::Reshaped { i1, i2, i3 } => (i1, i2, i3),
        }
    }
}

pub fn identifiability_check(size: &ProblemSize, variant: Variant) -> IdentifiabilityReport {
    let (i1, i2, i3) = variant.dims(size);
    let shift = i1.saturating_sub(1) * i2;
    let (capacity, binding) = if shift <= i3 {
        (shift, Binding::ShiftRows)
    } else {
        (i3, Binding::ThirdMode)
    };
    IdentifiabilityReport {
        variant,
        passed: capacity >= size.targets,
        capacity,
        binding,
        rank: size.targets,
    }
}
