//! Executable pieces of the AP convergence analysis: the objective
//! `ρ(z) = ½‖|z| − a‖²`, its gradient and Hessian form, the branches of
//! `(I − P_a)^{-1}`, the stagnation sphere, residual ratio sequences, and a
//! small dense laboratory for AP over a generic frame `S`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{dist, norm, C64};
use crate::projectors::project_scalar;

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("length {a} vs {b}")));
    }
    Ok(())
}

/// `½ Σ (|z_k| − a_k)²`.
pub fn rho(z: &[C64], a: &[f64]) -> f64 {
    0.5 * z.iter().zip(a).map(|(z, a)| (z.norm() - a).powi(2)).sum::<f64>()
}

/// `½ (I − P_a) z`, defined only where `z` has no zero entry.
pub fn grad_rho(z: &[C64], a: &[f64]) -> Result<Vec<C64>> {
    check_len(z.len(), a.len())?;
    z.iter()
        .zip(a)
        .enumerate()
        .map(|(k, (&z, &a))| {
            let c = z.norm();
            if c == 0.0 {
                return Err(Error::Domain(format!("gradient undefined: z[{k}] = 0")));
            }
            Ok(z * (0.5 * (c - a) / c))
        })
        .collect()
}

/// Second derivative of `h ↦ ρ(z + h w)` at `h = 0`:
/// `Σ b²(1 − (a/c) sin²(θ − φ))` with `z = c e^{iφ}`, `w = b e^{iθ}`.
pub fn hessian_form(z: &[C64], w: &[C64], a: &[f64]) -> Result<f64> {
    check_len(z.len(), a.len())?;
    check_len(w.len(), a.len())?;
    let mut acc = 0.0;
    for (k, ((z, w), a)) in z.iter().zip(w).zip(a).enumerate() {
        let c = z.norm();
        if c == 0.0 {
            return Err(Error::Domain(format!("Hessian undefined: z[{k}] = 0")));
        }
        let b2 = w.norm_sqr();
        if b2 == 0.0 {
            continue;
        }
        // sin(θ − φ) = Im(conj(z) w) / (c b)
        let s = (z.conj() * w).im / c;
        acc += b2 - (a / c) * s * s;
    }
    Ok(acc)
}

/// Solutions `η` of `η − P_a η = ζ` for one entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Preimage {
    Unique(C64),
    Pair(C64, C64),
    /// Every `η` with `|η| = radius`.
    Circle { radius: f64 },
}

impl Preimage {
    /// Number of solutions; `None` for the continuum.
    pub fn count(&self) -> Option<usize> {
        match self {
            Preimage::Unique(_) => Some(1),
            Preimage::Pair(..) => Some(2),
            Preimage::Circle { .. } => None,
        }
    }
}

pub fn invert_residual_scalar(zeta: C64, a: f64) -> Result<Preimage> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("amplitude {a} must be > 0")));
    }
    let r = zeta.norm();
    if r == 0.0 {
        return Ok(Preimage::Circle { radius: a });
    }
    let u = zeta / r;
    if r >= a {
        Ok(Preimage::Unique(u * (r + a)))
    } else {
        Ok(Preimage::Pair(u * (r - a), u * (r + a)))
    }
}

/// Which piece of the domain of `I − P_a` a point lies in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// Some `|η_i| = a_i`: the map is not locally injective there.
    Infinite,
    /// `Y_k`: `2^k`-to-one, with `k` entries on the two-branch side.
    Finite(usize),
}

pub fn classify_region(eta: &[C64], a: &[f64]) -> Result<Region> {
    check_len(eta.len(), a.len())?;
    let mut k = 0;
    for (i, (e, &a)) in eta.iter().zip(a).enumerate() {
        let r = e.norm();
        if r == 0.0 {
            return Err(Error::Domain(format!("eta[{i}] = 0")));
        }
        if !(a > 0.0) {
            return Err(Error::InvalidParameter(format!("a[{i}] = {a} must be > 0")));
        }
        if (r - a).abs() <= 1e-12 * a {
            return Ok(Region::Infinite);
        }
        if r < 2.0 * a {
            k += 1;
        }
    }
    Ok(Region::Finite(k))
}

/// `Σ(|η_k| − a_k/2)² − ¼Σa_k²`; vanishes at every AP fixed point.
pub fn stagnation_sphere_residual(eta: &[C64], a: &[f64]) -> f64 {
    let lhs: f64 = eta.iter().zip(a).map(|(e, a)| (e.norm() - 0.5 * a).powi(2)).sum();
    let rhs: f64 = a.iter().map(|a| a * a).sum::<f64>() * 0.25;
    lhs - rhs
}

pub fn amplitude_project(z: &[C64], a: &[f64]) -> Vec<C64> {
    z.iter().zip(a).map(|(&z, &a)| project_scalar(z, a)).collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResidualRatios {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Step at which a residual vanished and the sequences were cut.
    pub converged_at: Option<usize>,
}

impl ResidualRatios {
    pub fn max(&self) -> f64 {
        self.alpha.iter().chain(&self.beta).copied().fold(0.0, f64::max)
    }
}

/// `α_l = ‖(P_a−I)ζ_l‖ / ‖(P_a−I)ζ_{l−1}‖` and `β_l` likewise for
/// `‖(P_S−I)P_a ζ_l‖`, along a trajectory of AP iterates.
pub fn residual_ratios(
    iterates: &[Vec<C64>],
    a: &[f64],
    range: impl Fn(&[C64]) -> Vec<C64>,
) -> ResidualRatios {
    let floor = 1e-14 * a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut out = ResidualRatios::default();
    let mut prev: Option<(f64, f64)> = None;
    for (l, z) in iterates.iter().enumerate() {
        let pa = amplitude_project(z, a);
        let ra = dist(&pa, z);
        let rs = dist(&range(&pa), &pa);
        if ra < floor || rs < floor {
            out.converged_at = Some(l);
            break;
        }
        if let Some((pa0, ps0)) = prev {
            out.alpha.push(ra / pa0);
            out.beta.push(rs / ps0);
        }
        prev = Some((ra, rs));
    }
    out
}

/// Both sides of the phase-step inequality for consecutive AP iterates:
/// `(2Σ a b_l (1 − cos Δφ), Σ(a − b_{l−1})² − Σ(a − b_l)²)`.
pub fn phase_step_terms(prev: &[C64], cur: &[C64], a: &[f64]) -> (f64, f64) {
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for ((p, c), a) in prev.iter().zip(cur).zip(a) {
        let (bp, bc) = (p.norm(), c.norm());
        let phase = |z: &C64, b: f64| if b > 0.0 { z.arg() } else { 0.0 };
        lhs += 2.0 * a * bc * (1.0 - (phase(c, bc) - phase(p, bp)).cos());
        rhs += (a - bp).powi(2) - (a - bc).powi(2);
    }
    (lhs, rhs)
}

/// A dense complex frame `S` (M x N) with its range projector.
#[derive(Clone, Debug)]
pub struct GenericFrame {
    s: DMatrix<C64>,
    ps: DMatrix<C64>,
}

/// Residuals tracked by the lab, all divided by `‖a‖`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabResiduals {
    /// Distance to the solution circle.
    pub eps_0: f64,
    /// `‖(P_a − I)ζ‖`.
    pub amplitude: f64,
    /// `‖(P_S − I)P_a ζ‖`.
    pub range: f64,
}

impl GenericFrame {
    /// Draws i.i.d. complex standard normal entries, redrawing until the
    /// condition number is below 1e12. The flag is false when `M < 4N − 2`.
    pub fn sample(n: usize, m: usize, seed: u64) -> Result<(Self, bool)> {
        if n == 0 || m < n {
            return Err(Error::InvalidParameter(format!("need M >= N >= 1, got M = {m}, N = {n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        loop {
            let s = DMatrix::from_fn(m, n, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re * scale, im * scale)
            });
            if let Ok(frame) = Self::from_matrix(s) {
                return Ok((frame, m + 2 >= 4 * n));
            }
        }
    }

    pub fn from_matrix(s: DMatrix<C64>) -> Result<Self> {
        let sv = s.clone().singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        if !(lo > 0.0) || hi / lo > 1e12 {
            return Err(Error::Domain("frame is numerically rank deficient".into()));
        }
        let gram = s.adjoint() * &s;
        let inv = gram.try_inverse().ok_or_else(|| Error::Domain("singular Gram matrix".into()))?;
        let ps = &s * inv * s.adjoint();
        Ok(Self { s, ps })
    }

    pub fn rows(&self) -> usize {
        self.s.nrows()
    }

    pub fn cols(&self) -> usize {
        self.s.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.s
    }

    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        let x = nalgebra::DVector::from_column_slice(psi);
        (&self.s * x).as_slice().to_vec()
    }

    /// `P_S = S(S*S)^{-1}S*`.
    pub fn project_range(&self, z: &[C64]) -> Vec<C64> {
        let x = nalgebra::DVector::from_column_slice(z);
        (&self.ps * x).as_slice().to_vec()
    }

    pub fn ap_step(&self, z: &[C64], a: &[f64]) -> Vec<C64> {
        self.project_range(&amplitude_project(z, a))
    }

    pub fn residuals(&self, z: &[C64], a: &[f64], solution: &[C64]) -> LabResiduals {
        let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let pa = amplitude_project(z, a);
        LabResiduals {
            eps_0: crate::metrics::global_phase_align(z, solution).1 / na,
            amplitude: dist(&pa, z) / na,
            range: dist(&self.project_range(&pa), &pa) / na,
        }
    }

    /// Runs AP for `iters` steps and returns the iterates (including the start).
    pub fn run_ap(&self, zeta0: &[C64], a: &[f64], iters: usize) -> Vec<Vec<C64>> {
        let mut out = Vec::with_capacity(iters + 1);
        out.push(zeta0.to_vec());
        for _ in 0..iters {
            let next = self.ap_step(out.last().expect("non-empty"), a);
            out.push(next);
        }
        out
    }
}

/// Complex standard normal vector, seeded.
pub fn gaussian_vector(len: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..len)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        })
        .collect()
}

/// Amplitudes of `S ψ₀` for a fresh generic object, redrawn while any entry
/// is below `1e-12 · max`.
pub fn lab_instance(frame: &GenericFrame, rng: &mut ChaCha8Rng) -> (Vec<C64>, Vec<C64>, Vec<f64>) {
    loop {
        let psi = gaussian_vector(frame.cols(), rng);
        let z = frame.apply(&psi);
        let a: Vec<f64> = z.iter().map(|v| v.norm()).collect();
        let max = a.iter().copied().fold(0.0, f64::max);
        if max > 0.0 && a.iter().all(|&v| v >= 1e-12 * max) && norm(&z) > 0.0 {
            return (psi, z, a);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preimage_examples() {
        assert_eq!(invert_residual_scalar(C64::new(2.0, 0.0), 1.0).unwrap(), Preimage::Unique(C64::new(3.0, 0.0)));
        assert_eq!(
            invert_residual_scalar(C64::new(0.5, 0.0), 1.0).unwrap(),
            Preimage::Pair(C64::new(-0.5, 0.0), C64::new(1.5, 0.0))
        );
        assert_eq!(invert_residual_scalar(C64::new(0.0, 0.0), 1.0).unwrap(), Preimage::Circle { radius: 1.0 });
        assert!(invert_residual_scalar(C64::new(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn region_examples() {
        let a = [1.0, 2.0, 0.5];
        let eta: Vec<C64> = a.iter().map(|&v| C64::new(0.0, 3.0 * v)).collect();
        assert_eq!(classify_region(&eta, &a).unwrap(), Region::Finite(0));
        let mut one = eta.clone();
        one[1] = C64::new(1.0, 0.0); // |η| = 0.5 a
        assert_eq!(classify_region(&one, &a).unwrap(), Region::Finite(1));
        one[2] = C64::new(0.0, -0.5);
        assert_eq!(classify_region(&one, &a).unwrap(), Region::Infinite);
    }

    #[test]
    fn sphere_examples() {
        let a = [1.0; 4];
        let on: Vec<C64> = a.iter().map(|&v| C64::new(v, 0.0)).collect();
        assert!(stagnation_sphere_residual(&on, &a).abs() < 1e-15);
        assert_eq!(stagnation_sphere_residual(&[C64::new(0.0, 0.0); 4], &a), 0.0);
        let two: Vec<C64> = a.iter().map(|&v| C64::new(2.0 * v, 0.0)).collect();
        assert_eq!(stagnation_sphere_residual(&two, &a), 8.0);
    }

    #[test]
    fn gradient_special_cases() {
        let a = [1.0, 2.0, 0.5];
        let z: Vec<C64> = a.iter().map(|&v| C64::new(2.0 * v, 0.0)).collect();
        let g = grad_rho(&z, &a).unwrap();
        for (g, a) in g.iter().zip(a) {
            assert!((g - C64::new(0.5 * a, 0.0)).norm() < 1e-15);
        }
        assert!(grad_rho(&[C64::new(0.0, 0.0)], &[1.0]).is_err());
        assert_eq!(rho(&[C64::new(0.0, 0.0); 3], &a), 0.5 * (1.0 + 4.0 + 0.25));
    }
}
