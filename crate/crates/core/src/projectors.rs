//! Amplitude projection onto the torus `T_a`, orthogonal projection onto the
//! range of `FQ`, and the truncation mask used by t-PS.

use crate::error::{Error, Result};
use crate::fft::Direction;
use crate::forward::ForwardModel;
use crate::grid::{FrameStack, MeasurementStack, C64};

/// Entries with modulus below this are treated as exact zeros by `P_a`.
pub const ZERO_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug)]
pub struct AmplitudeProjector {
    a: MeasurementStack,
}

impl AmplitudeProjector {
    pub fn new(a: MeasurementStack) -> Self {
        Self { a }
    }

    pub fn amplitudes(&self) -> &MeasurementStack {
        &self.a
    }

    pub fn norm_a(&self) -> f64 {
        self.a.norm()
    }

    /// `P_a z`: keep the phase, replace the modulus. Zero entries get phase 0.
    pub fn project(&self, z: &FrameStack) -> Result<FrameStack> {
        let mut out = z.clone();
        self.project_in_place(&mut out)?;
        Ok(out)
    }

    pub fn project_in_place(&self, z: &mut FrameStack) -> Result<()> {
        if z.len() != self.a.len() {
            return Err(Error::Shape(format!("stack length {} vs amplitudes {}", z.len(), self.a.len())));
        }
        for (v, &a) in z.as_mut_slice().iter_mut().zip(self.a.as_slice()) {
            *v = project_scalar(*v, a);
        }
        Ok(())
    }
}

#[inline]
pub fn project_scalar(z: C64, a: f64) -> C64 {
    let r = z.norm();
    if r < ZERO_FLOOR {
        C64::new(a, 0.0)
    } else {
        z * (a / r)
    }
}

/// `P_FQ = F Q (Q*Q)^{-1} Q* F*`, applied matrix-free.
#[derive(Clone, Debug)]
pub struct RangeProjector {
    model: ForwardModel,
}

impl RangeProjector {
    pub fn new(model: ForwardModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &ForwardModel {
        &self.model
    }

    pub fn project(&self, z: &FrameStack) -> Result<FrameStack> {
        let psi = self.model.reconstruct_object(z)?;
        self.model.forward_frames(&psi)
    }

    /// `Q* F* z` scaled by `(Q*Q)^{-1}` — exposed for callers that need the
    /// object-domain intermediate.
    pub fn object_of(&self, z: &FrameStack) -> Result<crate::grid::ComplexGrid> {
        self.model.reconstruct_object(z)
    }

    /// `F* z` frame by frame.
    pub fn to_object_frames(&self, z: &FrameStack) -> FrameStack {
        let mut out = z.clone();
        self.model.dft().apply_stack(out.as_mut_slice(), Direction::Inverse);
        out
    }
}

/// `T_a = diag(a > ε_a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncationMask {
    keep: Vec<bool>,
    threshold: f64,
}

impl TruncationMask {
    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn kept(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    /// Zeroes the dropped entries in place.
    pub fn apply(&self, z: &mut [C64]) {
        for (v, &k) in z.iter_mut().zip(&self.keep) {
            if !k {
                *v = C64::new(0.0, 0.0);
            }
        }
    }
}

/// Threshold at the `(1 - percentile_keep)` quantile; entries equal to the
/// threshold are dropped.
pub fn truncation_mask(a: &MeasurementStack, percentile_keep: f64) -> Result<TruncationMask> {
    if !(percentile_keep > 0.0 && percentile_keep <= 1.0) {
        return Err(Error::InvalidParameter(format!("percentile_keep = {percentile_keep} must be in (0, 1]")));
    }
    let v = a.as_slice();
    let n = v.len();
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let keep_count = ((percentile_keep * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let drop = n - keep_count.min(n);
    let threshold = if drop == 0 { f64::NEG_INFINITY } else { sorted[drop - 1] };
    Ok(TruncationMask { keep: v.iter().map(|&x| x > threshold).collect(), threshold })
}
