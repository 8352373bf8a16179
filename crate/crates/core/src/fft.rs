//! Unitary 2D DFT on square frames.
//!
//! The forward kernel is `exp(+2πi(μα+νβ)/m) / m`, DC at index (0, 0), no
//! shift. The inverse is its exact adjoint.

use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::grid::{ComplexGrid, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Cached row/column plans for one frame side.
#[derive(Clone)]
pub struct Dft2 {
    m: usize,
    // rustfft's "inverse" carries the positive exponent
    pos: Arc<dyn Fft<f64>>,
    neg: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for Dft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft2").field("m", &self.m).finish()
    }
}

impl Dft2 {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m,
            pos: planner.plan_fft_inverse(m),
            neg: planner.plan_fft_forward(m),
            scale: 1.0 / m as f64,
        }
    }

    pub fn side(&self) -> usize {
        self.m
    }

    /// In-place transform of one `m*m` row-major frame.
    pub fn apply(&self, frame: &mut [C64], dir: Direction) {
        let m = self.m;
        debug_assert_eq!(frame.len(), m * m);
        let plan = match dir {
            Direction::Forward => &self.pos,
            Direction::Inverse => &self.neg,
        };
        // rows
        plan.process(frame);
        // columns through a transpose
        transpose_in_place(frame, m);
        plan.process(frame);
        transpose_in_place(frame, m);
        let s = self.scale;
        frame.iter_mut().for_each(|z| *z *= s);
    }

    /// Transforms every `m*m` block of a stacked vector.
    pub fn apply_stack(&self, data: &mut [C64], dir: Direction) {
        let n = self.m * self.m;
        for frame in data.chunks_exact_mut(n) {
            self.apply(frame, dir);
        }
    }
}

fn transpose_in_place(a: &mut [C64], m: usize) {
    for r in 0..m {
        for c in r + 1..m {
            a.swap(r * m + c, c * m + r);
        }
    }
}

/// Out-of-place convenience wrapper around [`Dft2`].
pub fn dft2(frame: &ComplexGrid, dir: Direction) -> ComplexGrid {
    assert!(frame.is_square(), "dft2 needs a square frame");
    let mut out = frame.clone();
    Dft2::new(frame.rows()).apply(out.as_mut_slice(), dir);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(m: usize, seed: u64) -> ComplexGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexGrid::from_fn(m, m, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn direct(f: &ComplexGrid, sign: f64) -> ComplexGrid {
        let m = f.rows();
        ComplexGrid::from_fn(m, m, |mu, nu| {
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..m {
                for b in 0..m {
                    let ph = sign * 2.0 * std::f64::consts::PI * ((mu * a + nu * b) % m) as f64 / m as f64;
                    acc += f.get(a, b) * C64::from_polar(1.0, ph);
                }
            }
            acc / m as f64
        })
    }

    #[test]
    fn constant_frame_maps_to_dc() {
        let f = ComplexGrid::constant(4, 4, C64::new(1.0, 0.0));
        let g = dft2(&f, Direction::Forward);
        assert!((g.get(0, 0) - C64::new(4.0, 0.0)).norm() < 1e-14);
        for (i, z) in g.as_slice().iter().enumerate().skip(1) {
            assert!(z.norm() < 1e-14, "entry {i} = {z}");
        }
    }

    #[test]
    fn delta_maps_to_flat() {
        let mut f = ComplexGrid::zeros(4, 4);
        f.set(0, 0, C64::new(1.0, 0.0));
        let g = dft2(&f, Direction::Forward);
        for z in g.as_slice() {
            assert!((z - C64::new(0.25, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn matches_direct_double_sum() {
        let f = random_grid(8, 11);
        let fast = dft2(&f, Direction::Forward);
        let slow = direct(&f, 1.0);
        let err = crate::grid::dist(fast.as_slice(), slow.as_slice());
        assert!(err < 1e-12, "{err}");
        let fast = dft2(&f, Direction::Inverse);
        let slow = direct(&f, -1.0);
        assert!(crate::grid::dist(fast.as_slice(), slow.as_slice()) < 1e-12);
    }

    #[test]
    fn round_trip_and_unitarity() {
        for m in [1, 2, 5, 8, 16] {
            let f = random_grid(m, m as u64);
            let g = dft2(&f, Direction::Forward);
            assert!((g.norm() - f.norm()).abs() < 1e-12 * f.norm());
            let back = dft2(&g, Direction::Inverse);
            assert!(crate::grid::dist(back.as_slice(), f.as_slice()) < 1e-12);
        }
    }
}
