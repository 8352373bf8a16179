#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ptycho::lens::{make_blr_lens, make_lens, LensSpec};
use ptycho::{build_scheme, ComplexGrid, ForwardModel, FrameStack, RasterSpec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_c(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn rand_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..len).map(|_| rand_c(rng)).collect()
}

pub fn rand_grid(n: usize, rng: &mut ChaCha8Rng) -> ComplexGrid {
    ComplexGrid::from_fn(n, n, |_, _| rand_c(rng))
}

pub fn rand_stack(k: usize, m: usize, rng: &mut ChaCha8Rng) -> FrameStack {
    FrameStack::from_vec(k, m, rand_vec(k * m * m, rng)).unwrap()
}

pub fn raster(n: usize, m: usize, d: f64) -> RasterSpec {
    RasterSpec { n, m, dx: d, dy: d, jitter: 0.0, shear: false, seed: 0 }
}

/// Lattice scheme with a random complex lens.
pub fn random_model(n: usize, m: usize, d: f64, seed: u64) -> ForwardModel {
    let mut r = rng(seed);
    let lens = ComplexGrid::from_fn(m, m, |_, _| rand_c(&mut r) + C64::new(1.5, 0.0));
    ForwardModel::new(build_scheme(&raster(n, m, d)).unwrap(), lens).unwrap()
}

pub fn small_model(n: usize, m: usize, d: f64) -> ForwardModel {
    let lens = make_lens(&LensSpec::small(m, 0.0, 0.45)).unwrap();
    ForwardModel::new(build_scheme(&raster(n, m, d)).unwrap(), lens).unwrap()
}

/// The standard desk instance: n = 64, m = 16, step 4, BLR lens.
pub fn desk_model(lens_seed: u64) -> ForwardModel {
    let (lens, _) = make_blr_lens(&LensSpec::desk(16, lens_seed)).unwrap();
    ForwardModel::new(build_scheme(&raster(64, 16, 4.0)).unwrap(), lens).unwrap()
}

/// Dense matrix of a linear map given by its action on basis vectors.
pub fn dense_of(cols: usize, f: impl Fn(&[C64]) -> Vec<C64>) -> DMatrix<C64> {
    let mut e = vec![C64::new(0.0, 0.0); cols];
    let first = {
        e[0] = C64::new(1.0, 0.0);
        f(&e)
    };
    let rows = first.len();
    let mut m = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        e.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        e[c] = C64::new(1.0, 0.0);
        let col = if c == 0 { first.clone() } else { f(&e) };
        for (r, v) in col.into_iter().enumerate() {
            m[(r, c)] = v;
        }
    }
    m
}

/// Dense `FQ` (K m² x n²).
pub fn dense_fq(model: &ForwardModel) -> DMatrix<C64> {
    let n = model.object();
    dense_of(n * n, |x| {
        let psi = ComplexGrid::from_vec(n, n, x.to_vec()).unwrap();
        model.forward_frames(&psi).unwrap().into_vec()
    })
}

/// `S (S*S)^{-1} S*`.
pub fn dense_range_projector(s: &DMatrix<C64>) -> DMatrix<C64> {
    let gram = s.adjoint() * s;
    s * gram.try_inverse().unwrap() * s.adjoint()
}

pub fn apply(m: &DMatrix<C64>, x: &[C64]) -> Vec<C64> {
    (m * DVector::from_column_slice(x)).as_slice().to_vec()
}

pub fn max_abs_diff(x: &[C64], y: &[C64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

/// Top eigenpair of a Hermitian matrix by dense decomposition.
pub fn dense_top_eig(m: &DMatrix<C64>) -> (f64, Vec<C64>) {
    let eig = m.clone().symmetric_eigen();
    let i = eig.eigenvalues.imax();
    (eig.eigenvalues[i], eig.eigenvectors.column(i).as_slice().to_vec())
}

/// Removes the global phase that best aligns `u` with `v`.
pub fn align_to(u: &[C64], v: &[C64]) -> Vec<C64> {
    let (t, _) = ptycho::metrics::global_phase_align(v, u);
    let rot = C64::from_polar(1.0, t);
    u.iter().map(|x| x * rot).collect()
}
