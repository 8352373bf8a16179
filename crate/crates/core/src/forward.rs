//! The linear operator `Q` (window extraction times lens), its adjoint, the
//! diagonal `Q*Q`, the measurement map `a = |F Q ψ|`, and the noise model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fft::{Dft2, Direction};
use crate::grid::{ComplexGrid, FrameStack, MeasurementStack, C64};
use crate::scheme::{shifted_probe, IlluminationScheme};

/// Lens magnitudes below this count as zero.
pub const LENS_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct ForwardModel {
    scheme: IlluminationScheme,
    omega: ComplexGrid,
    anchors: Vec<(usize, usize)>,
    // one bilinearly shifted lens per frame
    probes: Vec<ComplexGrid>,
    qtq: Vec<f64>,
    qtq_inv: Vec<f64>,
    dft: Dft2,
}

impl ForwardModel {
    /// Builds the operator for `scheme` and lens `omega` (m x m).
    ///
    /// The scheme is not required to satisfy the coverage conditions, but every
    /// pixel inside some window must receive nonzero lens energy.
    pub fn new(scheme: IlluminationScheme, omega: ComplexGrid) -> Result<Self> {
        let m = scheme.window();
        let n = scheme.object();
        if omega.rows() != m || omega.cols() != m {
            return Err(Error::Shape(format!(
                "lens is {}x{}, scheme window is {m}x{m}",
                omega.rows(),
                omega.cols()
            )));
        }
        let anchors = scheme.anchors();
        let probes: Vec<ComplexGrid> = scheme
            .positions()
            .iter()
            .map(|p| {
                let mut w = shifted_probe(&omega, p.frac());
                for z in w.as_mut_slice() {
                    if z.norm() < LENS_FLOOR {
                        *z = C64::new(0.0, 0.0);
                    }
                }
                w
            })
            .collect();

        let mut qtq = vec![0.0; n * n];
        let mut inside = vec![false; n * n];
        for ((r0, c0), w) in anchors.iter().zip(&probes) {
            for a in 0..m {
                for b in 0..m {
                    let p = (r0 + a) * n + c0 + b;
                    qtq[p] += w.get(a, b).norm_sqr();
                    inside[p] = true;
                }
            }
        }
        let mut qtq_inv = vec![0.0; n * n];
        for p in 0..n * n {
            if inside[p] {
                if qtq[p] <= 0.0 {
                    return Err(Error::DegenerateModel { row: p / n, col: p % n });
                }
                qtq_inv[p] = 1.0 / qtq[p];
            }
        }
        Ok(Self { scheme, omega, anchors, probes, qtq, qtq_inv, dft: Dft2::new(m) })
    }

    pub fn scheme(&self) -> &IlluminationScheme {
        &self.scheme
    }

    pub fn omega(&self) -> &ComplexGrid {
        &self.omega
    }

    /// Shifted lens used for frame `k`.
    pub fn probe(&self, k: usize) -> &ComplexGrid {
        &self.probes[k]
    }

    pub fn anchor(&self, k: usize) -> (usize, usize) {
        self.anchors[k]
    }

    pub fn frames(&self) -> usize {
        self.anchors.len()
    }

    pub fn window(&self) -> usize {
        self.scheme.window()
    }

    pub fn object(&self) -> usize {
        self.scheme.object()
    }

    pub fn dft(&self) -> &Dft2 {
        &self.dft
    }

    /// Diagonal of `Q*Q` as an n x n row-major array.
    pub fn qtq_diagonal(&self) -> &[f64] {
        &self.qtq
    }

    /// `(Q*Q)^{-1}` on covered pixels, 0 elsewhere.
    pub fn qtq_inverse(&self) -> &[f64] {
        &self.qtq_inv
    }

    fn check_object(&self, psi: &ComplexGrid) -> Result<()> {
        let n = self.object();
        if psi.rows() != n || psi.cols() != n {
            return Err(Error::Shape(format!("object is {}x{}, model expects {n}x{n}", psi.rows(), psi.cols())));
        }
        Ok(())
    }

    fn check_stack(&self, z: &FrameStack) -> Result<()> {
        if !z.same_shape(self.frames(), self.window()) {
            return Err(Error::Shape(format!(
                "stack has {} frames of side {}, model expects {} of side {}",
                z.frames(),
                z.side(),
                self.frames(),
                self.window()
            )));
        }
        Ok(())
    }

    /// `Q ψ`.
    pub fn extract_frames(&self, psi: &ComplexGrid) -> Result<FrameStack> {
        self.check_object(psi)?;
        let (m, n) = (self.window(), self.object());
        let src = psi.as_slice();
        let mut out = FrameStack::zeros(self.frames(), m);
        for (k, ((r0, c0), w)) in self.anchors.iter().zip(&self.probes).enumerate() {
            let f = out.frame_mut(k);
            let w = w.as_slice();
            for a in 0..m {
                let row = &src[(r0 + a) * n + c0..(r0 + a) * n + c0 + m];
                for b in 0..m {
                    f[a * m + b] = w[a * m + b] * row[b];
                }
            }
        }
        Ok(out)
    }

    /// `Q* z`: each frame times `conj(ω)`, accumulated into its window.
    pub fn scatter_adjoint(&self, z: &FrameStack) -> Result<ComplexGrid> {
        self.check_stack(z)?;
        let (m, n) = (self.window(), self.object());
        let mut out = ComplexGrid::zeros(n, n);
        let dst = out.as_mut_slice();
        for (k, ((r0, c0), w)) in self.anchors.iter().zip(&self.probes).enumerate() {
            let f = z.frame(k);
            let w = w.as_slice();
            for a in 0..m {
                let base = (r0 + a) * n + c0;
                for b in 0..m {
                    dst[base + b] += w[a * m + b].conj() * f[a * m + b];
                }
            }
        }
        Ok(out)
    }

    /// `F Q ψ`.
    pub fn forward_frames(&self, psi: &ComplexGrid) -> Result<FrameStack> {
        let mut z = self.extract_frames(psi)?;
        self.dft.apply_stack(z.as_mut_slice(), Direction::Forward);
        Ok(z)
    }

    /// `a = |F Q ψ|`.
    pub fn forward_measure(&self, psi: &ComplexGrid) -> Result<MeasurementStack> {
        let z = self.forward_frames(psi)?;
        MeasurementStack::from_vec(self.frames(), self.window(), z.as_slice().iter().map(|v| v.norm()).collect())
    }

    /// `(Q*Q)^{-1} Q* F* ζ`, the least-squares object for a stacked iterate.
    pub fn reconstruct_object(&self, zeta: &FrameStack) -> Result<ComplexGrid> {
        self.check_stack(zeta)?;
        let mut z = zeta.clone();
        self.dft.apply_stack(z.as_mut_slice(), Direction::Inverse);
        let mut psi = self.scatter_adjoint(&z)?;
        psi.as_mut_slice().iter_mut().zip(&self.qtq_inv).for_each(|(v, s)| *v *= s);
        Ok(psi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub sigma_std: f64,
    pub seed: u64,
}

/// Intensity-proxy noise: `sqrt(|a² + σ a|)` with `σ ~ N(0, sigma_std²)` per
/// entry. Returns the noisy amplitudes and `‖a_noisy − a‖ / ‖a_noisy‖`.
pub fn add_noise(a: &MeasurementStack, spec: &NoiseSpec) -> Result<(MeasurementStack, f64)> {
    if !(spec.sigma_std >= 0.0) || !spec.sigma_std.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma_std = {} must be >= 0", spec.sigma_std)));
    }
    if spec.sigma_std == 0.0 {
        return Ok((a.clone(), 0.0));
    }
    let normal = Normal::new(0.0, spec.sigma_std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noisy: Vec<f64> = a
        .as_slice()
        .iter()
        .map(|&v| {
            let s: f64 = normal.sample(&mut rng);
            (v * v + s * v).abs().sqrt()
        })
        .collect();
    let num = noisy.iter().zip(a.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den = noisy.iter().map(|x| x * x).sum::<f64>().sqrt();
    let eps = if den > 0.0 { num / den } else { 0.0 };
    Ok((MeasurementStack::from_vec(a.frames(), a.side(), noisy)?, eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::Position;

    fn ones(m: usize) -> ComplexGrid {
        ComplexGrid::constant(m, m, C64::new(1.0, 0.0))
    }

    #[test]
    fn single_full_window_is_identity() {
        let s = IlluminationScheme::new(vec![Position::new(0.0, 0.0)], 4, 4).unwrap();
        let model = ForwardModel::new(s, ones(4)).unwrap();
        let psi = ComplexGrid::from_fn(4, 4, |r, c| C64::new(r as f64, c as f64));
        let z = model.extract_frames(&psi).unwrap();
        assert_eq!(z.as_slice(), psi.as_slice());
        let a = model.forward_measure(&ones(4)).unwrap();
        assert!((a.as_slice()[0] - 4.0).abs() < 1e-14);
        assert!(a.as_slice()[1..].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn overlapping_copies_accumulate() {
        let s = IlluminationScheme::new(vec![Position::new(0.0, 0.0), Position::new(0.0, 0.0)], 2, 3).unwrap();
        let model = ForwardModel::new(s, ones(2)).unwrap();
        let f = [C64::new(1.0, 2.0), C64::new(-1.0, 0.5), C64::new(0.0, 1.0), C64::new(3.0, 0.0)];
        let z = FrameStack::from_vec(2, 2, [f, f].concat()).unwrap();
        let psi = model.scatter_adjoint(&z).unwrap();
        assert_eq!(psi.get(0, 0), f[0] * 2.0);
        assert_eq!(psi.get(1, 1), f[3] * 2.0);
        assert_eq!(psi.get(2, 2), C64::new(0.0, 0.0));
        assert_eq!(model.qtq_diagonal()[0], 2.0);
        assert_eq!(model.qtq_diagonal()[8], 0.0);
    }

    #[test]
    fn vanishing_lens_is_degenerate() {
        let s = IlluminationScheme::new(vec![Position::new(0.0, 0.0)], 2, 2).unwrap();
        let mut w = ones(2);
        w.set(1, 0, C64::new(0.0, 0.0));
        assert!(matches!(ForwardModel::new(s, w), Err(Error::DegenerateModel { row: 1, col: 0 })));
    }

    #[test]
    fn zero_noise_is_identity() {
        let a = MeasurementStack::from_vec(1, 2, vec![1.0, 2.0, 0.0, 3.0]).unwrap();
        let (b, eps) = add_noise(&a, &NoiseSpec { sigma_std: 0.0, seed: 1 }).unwrap();
        assert_eq!(a, b);
        assert_eq!(eps, 0.0);
        let x = add_noise(&a, &NoiseSpec { sigma_std: 0.1, seed: 5 }).unwrap();
        let y = add_noise(&a, &NoiseSpec { sigma_std: 0.1, seed: 5 }).unwrap();
        assert_eq!(x, y);
    }
}
