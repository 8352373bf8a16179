//! Convergence metrics, all normalized by `‖a‖` and blind to the global phase.

use crate::error::Result;
use crate::grid::{dist, inner, FrameStack, C64};
use crate::projectors::{AmplitudeProjector, RangeProjector};

/// Best `t` in `min_t ‖u − e^{it} v‖` and the attained distance.
pub fn global_phase_align(u: &[C64], v: &[C64]) -> (f64, f64) {
    let c = inner(v, u); // sum conj(v) u
    let t = if c.norm() > 0.0 { c.arg() } else { 0.0 };
    // direct evaluation; ‖u‖² + ‖v‖² − 2|c| cancels badly near zero
    let rot = C64::from_polar(1.0, t);
    let d = u.iter().zip(v).map(|(a, b)| (a - b * rot).norm_sqr()).sum::<f64>().sqrt();
    (t, d)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricRow {
    pub iter: usize,
    pub eps_a: f64,
    pub eps_fq: f64,
    pub eps_afq: f64,
    pub eps_0: Option<f64>,
    pub eps_delta: Option<f64>,
}

/// Evaluates the five metrics at `zeta`; `eps_0` needs the reference `FQψ₀`,
/// `eps_delta` the next iterate.
pub fn compute_metrics(
    iter: usize,
    zeta: &FrameStack,
    zeta_next: Option<&FrameStack>,
    pa: &AmplitudeProjector,
    pfq: &RangeProjector,
    reference: Option<&FrameStack>,
) -> Result<MetricRow> {
    let na = pa.norm_a();
    let paz = pa.project(zeta)?;
    let pfz = pfq.project(zeta)?;
    let z = zeta.as_slice();
    Ok(MetricRow {
        iter,
        eps_a: dist(z, paz.as_slice()) / na,
        eps_fq: dist(z, pfz.as_slice()) / na,
        eps_afq: dist(paz.as_slice(), pfz.as_slice()) / na,
        eps_0: reference.map(|r| global_phase_align(z, r.as_slice()).1 / na),
        eps_delta: zeta_next.map(|nx| dist(z, nx.as_slice()) / na),
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub rows: Vec<MetricRow>,
    pub norm_a: f64,
}

impl ConvergenceTrace {
    pub fn new(norm_a: f64) -> Self {
        Self { rows: Vec::new(), norm_a }
    }

    pub fn push(&mut self, row: MetricRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&MetricRow> {
        self.rows.last()
    }

    /// First iteration index whose `eps_0` is at or below `tol`.
    pub fn first_below(&self, tol: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.eps_0.is_some_and(|e| e <= tol)).map(|r| r.iter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_rotation() {
        let v: Vec<C64> = (0..5).map(|k| C64::new(k as f64, 1.0 - k as f64)).collect();
        let rot = C64::from_polar(1.0, std::f64::consts::PI / 3.0);
        let u: Vec<C64> = v.iter().map(|x| x * rot).collect();
        let (t, d) = global_phase_align(&u, &v);
        assert!((t - std::f64::consts::PI / 3.0).abs() < 1e-12);
        assert!(d < 1e-12);
    }

    #[test]
    fn orthogonal_pair() {
        let u = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let v = [C64::new(0.0, 0.0), C64::new(0.0, 2.0)];
        let (t, d) = global_phase_align(&u, &v);
        assert_eq!(t, 0.0);
        assert!((d * d - 5.0).abs() < 1e-14);
    }
}
