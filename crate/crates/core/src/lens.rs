//! Illumination designs: an annular aperture with a beam stop, and a
//! band-limited random (BLR) lens shaped by alternating projections.
//!
//! Radii are in cycles per pixel, so Nyquist is 0.5. Both lenses are centered
//! at pixel `(m/2, m/2)` of the window; the centering is a linear phase in the
//! Fourier domain and leaves the aperture amplitude untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{Dft2, Direction};
use crate::grid::{norm, ComplexGrid, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LensKind {
    Small,
    Blr,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LensSpec {
    pub kind: LensKind,
    pub m: usize,
    /// Outer aperture radius, cycles per pixel.
    pub r_outer: f64,
    /// Beam stop (small) or annulus inner radius (blr); 0 keeps DC.
    pub r_inner: f64,
    /// Real-space focus radius in pixels (blr only).
    pub focus_radius: f64,
    pub design_iters: usize,
    pub seed: u64,
}

impl LensSpec {
    pub fn small(m: usize, r_inner: f64, r_outer: f64) -> Self {
        Self { kind: LensKind::Small, m, r_outer, r_inner, focus_radius: 0.0, design_iters: 0, seed: 0 }
    }

    pub fn blr(m: usize, r_inner: f64, r_outer: f64, focus_radius: f64, design_iters: usize, seed: u64) -> Self {
        Self { kind: LensKind::Blr, m, r_outer, r_inner, focus_radius, design_iters, seed }
    }

    /// Desk-scale default used by the examples and the test suite.
    pub fn desk(m: usize, seed: u64) -> Self {
        Self::blr(m, 0.1, 0.4, m as f64 * 0.3, 100, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidParameter("lens side must be >= 2".into()));
        }
        if !(self.r_inner >= 0.0 && self.r_inner < self.r_outer) {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= r_inner < r_outer, got {} and {}",
                self.r_inner, self.r_outer
            )));
        }
        if self.r_outer > 0.5 * std::f64::consts::SQRT_2 + 1e-12 {
            return Err(Error::InvalidParameter(format!("r_outer = {} beyond the frequency grid", self.r_outer)));
        }
        if self.kind == LensKind::Blr {
            if self.design_iters == 0 {
                return Err(Error::InvalidParameter("blr lens needs design_iters >= 1".into()));
            }
            if !(self.focus_radius > 0.0 && self.focus_radius < self.m as f64 / 2.0) {
                return Err(Error::InvalidParameter(format!(
                    "focus_radius = {} must be in (0, m/2)",
                    self.focus_radius
                )));
            }
        }
        Ok(())
    }
}

/// Radial frequency of DFT index `(mu, nu)`, wrapped to `[-1/2, 1/2)`.
pub fn radial_frequency(mu: usize, nu: usize, m: usize) -> f64 {
    let wrap = |k: usize| {
        let k = k as f64;
        let m = m as f64;
        if k < m / 2.0 {
            k / m
        } else {
            (k - m) / m
        }
    };
    wrap(mu).hypot(wrap(nu))
}

/// Indicator of the aperture on the DFT grid.
pub fn aperture(m: usize, r_inner: f64, r_outer: f64) -> Vec<bool> {
    let mut out = Vec::with_capacity(m * m);
    for mu in 0..m {
        for nu in 0..m {
            let q = radial_frequency(mu, nu, m);
            let inside_stop = if r_inner > 0.0 { q <= r_inner } else { false };
            out.push(q <= r_outer + 1e-12 && !inside_stop);
        }
    }
    out
}

fn centering_ramp(m: usize) -> Vec<C64> {
    // translation by s = floor(m/2) along both axes
    let s = (m / 2) as f64;
    let mut out = Vec::with_capacity(m * m);
    for mu in 0..m {
        for nu in 0..m {
            let t = 2.0 * std::f64::consts::PI * (mu + nu) as f64 * s / m as f64;
            out.push(C64::from_polar(1.0, t));
        }
    }
    out
}

fn normalized(mut w: ComplexGrid) -> Result<ComplexGrid> {
    let e = w.norm();
    if e == 0.0 {
        return Err(Error::InvalidParameter("lens has no energy".into()));
    }
    w.scale(C64::new(1.0 / e, 0.0));
    Ok(w)
}

pub fn make_small_lens(spec: &LensSpec) -> Result<ComplexGrid> {
    spec.validate()?;
    let m = spec.m;
    let ap = aperture(m, spec.r_inner, spec.r_outer);
    if !ap.iter().any(|&x| x) {
        return Err(Error::InvalidParameter("aperture contains no frequency".into()));
    }
    let ramp = centering_ramp(m);
    let mut data: Vec<C64> = ap.iter().zip(&ramp).map(|(&k, r)| if k { *r } else { C64::new(0.0, 0.0) }).collect();
    Dft2::new(m).apply(&mut data, Direction::Inverse);
    normalized(ComplexGrid::from_vec(m, m, data)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LensReport {
    /// Fraction of energy outside the focus disk at return.
    pub energy_outside_focus: f64,
    /// Relative amplitude mismatch on the aperture before the last Fourier step.
    pub aperture_deviation: f64,
    /// Per-iteration outside-focus fraction.
    pub history: Vec<f64>,
    /// Set when the residual failed to decrease for more than half the loop.
    pub stagnated: bool,
}

impl std::fmt::Display for LensReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "energy outside focus {:.4e}, aperture deviation {:.4e}{}",
            self.energy_outside_focus,
            self.aperture_deviation,
            if self.stagnated { " (design loop stagnated)" } else { "" }
        )
    }
}

fn focus_disk(m: usize, radius: f64) -> Vec<bool> {
    let c = (m / 2) as f64;
    let mut out = Vec::with_capacity(m * m);
    for r in 0..m {
        for col in 0..m {
            out.push((r as f64 - c).hypot(col as f64 - c) <= radius);
        }
    }
    out
}

fn outside_fraction(w: &[C64], disk: &[bool]) -> f64 {
    let total: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    let out: f64 = w.iter().zip(disk).filter(|(_, &d)| !d).map(|(z, _)| z.norm_sqr()).sum();
    if total > 0.0 {
        out / total
    } else {
        0.0
    }
}

pub fn make_blr_lens(spec: &LensSpec) -> Result<(ComplexGrid, LensReport)> {
    spec.validate()?;
    if spec.kind != LensKind::Blr {
        return Err(Error::InvalidParameter("spec is not a blr lens".into()));
    }
    let m = spec.m;
    let ap = aperture(m, spec.r_inner, spec.r_outer);
    if !ap.iter().any(|&x| x) {
        return Err(Error::InvalidParameter("aperture contains no frequency".into()));
    }
    let disk = focus_disk(m, spec.focus_radius);
    let dft = Dft2::new(m);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let two_pi = 2.0 * std::f64::consts::PI;

    let mut spectrum: Vec<C64> = ap
        .iter()
        .map(|&k| {
            let t: f64 = rng.random_range(0.0..two_pi);
            if k {
                C64::from_polar(1.0, t)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    let ap_norm = (ap.iter().filter(|&&k| k).count() as f64).sqrt();

    let mut history = Vec::with_capacity(spec.design_iters);
    let mut deviation = 0.0;
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    let mut stagnated = false;
    let mut real = spectrum.clone();
    for _ in 0..spec.design_iters {
        real.copy_from_slice(&spectrum);
        dft.apply(&mut real, Direction::Inverse);
        // real domain: confine to the focus disk
        for (z, &d) in real.iter_mut().zip(&disk) {
            if !d {
                *z = C64::new(0.0, 0.0);
            }
        }
        dft.apply(&mut real, Direction::Forward);
        // Fourier domain: restore the aperture amplitude, keep the phase
        let mut dev = 0.0;
        for ((s, z), &k) in spectrum.iter_mut().zip(&real).zip(&ap) {
            if k {
                dev += (z.norm() - 1.0).powi(2);
                *s = crate::projectors::project_scalar(*z, 1.0);
            } else {
                dev += z.norm_sqr();
                *s = C64::new(0.0, 0.0);
            }
        }
        deviation = dev.sqrt() / ap_norm;

        let mut w = spectrum.clone();
        dft.apply(&mut w, Direction::Inverse);
        let frac = outside_fraction(&w, &disk);
        history.push(frac);
        if frac < best * (1.0 - 1e-12) {
            best = frac;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > spec.design_iters / 2 {
                stagnated = true;
            }
        }
    }
    dft.apply(&mut spectrum, Direction::Inverse);
    let energy_outside_focus = outside_fraction(&spectrum, &disk);
    let lens = normalized(ComplexGrid::from_vec(m, m, spectrum)?)?;
    debug_assert!((norm(lens.as_slice()) - 1.0).abs() < 1e-12);
    Ok((lens, LensReport { energy_outside_focus, aperture_deviation: deviation, history, stagnated }))
}

/// Builds either lens kind from its spec, dropping the design report.
pub fn make_lens(spec: &LensSpec) -> Result<ComplexGrid> {
    match spec.kind {
        LensKind::Small => make_small_lens(spec),
        LensKind::Blr => make_blr_lens(spec).map(|(w, _)| w),
    }
}
