//! Spectral initializers and the power-iteration engine behind them.
//!
//! For overlapping frames `i, j` with anchor lag `Δ = A_i − A_j`, the `(i, j)`
//! block of `P_FQ` is `F M F*` where `(M y)(s) = w_ij(s) y(s + Δ)` and
//! `w_ij(s) = ω_i(s) conj(ω_j(s + Δ)) / (Q*Q)(A_i + s)`. In the Fourier domain
//!
//! ```text
//! Ω(q_i, q_j) = exp(−2πi q_j·Δ / m) · V_ij(q_i − q_j),   V_ij = F(w_ij) / m,
//! ```
//!
//! so `|Ω|` depends on the frequency lag only. That is what makes the degree
//! vector `D` a sum of circular convolutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fft::{Dft2, Direction};
use crate::forward::ForwardModel;
use crate::grid::{inner, norm, ComplexGrid, FrameStack, C64};
use crate::projectors::{AmplitudeProjector, RangeProjector, TruncationMask};

/// A Hermitian linear map on `C^dim`.
pub trait HermitianOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Result<Vec<C64>>;
}

/// Dense Hermitian matrix, row-major.
#[derive(Clone, Debug)]
pub struct DenseHermitian {
    pub n: usize,
    pub data: Vec<C64>,
}

impl HermitianOperator for DenseHermitian {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        Ok(self.data.chunks_exact(self.n).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerOptions {
    pub tol: f64,
    /// Operator applications allowed.
    pub max_iter: usize,
    pub seed: u64,
    /// Krylov dimension for [`top_eigpair`]; 0 selects plain power iteration.
    pub krylov: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 5000, seed: 0, krylov: 40 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenResult {
    pub eigenvalue: f64,
    pub vector: Vec<C64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

pub fn random_unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mut v: Vec<C64> =
        (0..dim).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let s = norm(&v);
    v.iter_mut().for_each(|z| *z /= s);
    v
}

/// Relative self-adjointness defect over `pairs` random pairs.
pub fn hermitian_defect(op: &dyn HermitianOperator, pairs: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let x = random_unit_vector(op.dim(), rng);
        let y = random_unit_vector(op.dim(), rng);
        let ax = op.apply(&x)?;
        let ay = op.apply(&y)?;
        let lhs = inner(&ax, &y);
        let rhs = inner(&x, &ay);
        let scale = norm(&ax).max(norm(&ay)).max(f64::MIN_POSITIVE);
        worst = worst.max((lhs - rhs).norm() / scale);
    }
    Ok(worst)
}

/// Power iteration for the dominant eigenpair of a Hermitian PSD operator.
/// Stops when `‖Av − λv‖ ≤ tol·|λ|`; an unconverged result is still returned.
pub fn power_top_eigpair(op: &dyn HermitianOperator, opts: &PowerOptions) -> Result<EigenResult> {
    power_top_eigpair_from(op, opts, None)
}

/// Same as [`power_top_eigpair`], starting from `start` when it is given and nonzero.
pub fn power_top_eigpair_from(
    op: &dyn HermitianOperator,
    opts: &PowerOptions,
    start: Option<&[C64]>,
) -> Result<EigenResult> {
    let dim = op.dim();
    if dim == 0 {
        return Err(Error::InvalidParameter("empty operator".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let defect = hermitian_defect(op, 5, &mut rng)?;
    if defect > 1e-10 {
        return Err(Error::NotHermitian(defect));
    }
    let mut v = random_unit_vector(dim, &mut rng);
    if let Some(x) = start.filter(|x| x.len() == dim && norm(x) > 0.0) {
        let s = norm(x);
        v = x.iter().map(|z| z / s).collect();
    }
    let mut av = op.apply(&v)?;
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter.max(1) {
        lambda = inner(&v, &av).re;
        residual = av.iter().zip(&v).map(|(a, x)| (a - x * lambda).norm_sqr()).sum::<f64>().sqrt();
        if residual <= opts.tol * lambda.abs() {
            return Ok(EigenResult { eigenvalue: lambda, vector: v, iterations: it, residual, converged: true });
        }
        let s = norm(&av);
        if s == 0.0 {
            // v is in the kernel and the operator is PSD: nothing larger exists
            return Ok(EigenResult { eigenvalue: 0.0, vector: v, iterations: it, residual: 0.0, converged: true });
        }
        v = av.iter().map(|z| z / s).collect();
        av = op.apply(&v)?;
    }
    Ok(EigenResult { eigenvalue: lambda, vector: v, iterations: opts.max_iter, residual, converged: false })
}

/// Dominant eigenpair by explicitly restarted Lanczos (full
/// reorthogonalization, restart from the top Ritz vector), or plain power
/// iteration when `opts.krylov == 0`. Same stopping rule and result type.
pub fn top_eigpair(op: &dyn HermitianOperator, opts: &PowerOptions) -> Result<EigenResult> {
    if opts.krylov == 0 {
        return power_top_eigpair(op, opts);
    }
    let dim = op.dim();
    if dim == 0 {
        return Err(Error::InvalidParameter("empty operator".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let defect = hermitian_defect(op, 5, &mut rng)?;
    if defect > 1e-10 {
        return Err(Error::NotHermitian(defect));
    }
    let p = opts.krylov.min(dim).max(1);
    let mut v0 = random_unit_vector(dim, &mut rng);
    let mut applied = 0usize;
    let mut best = EigenResult { eigenvalue: 0.0, vector: v0.clone(), iterations: 0, residual: f64::INFINITY, converged: false };
    while applied < opts.max_iter.max(1) {
        let mut basis: Vec<Vec<C64>> = vec![v0.clone()];
        let mut alpha: Vec<f64> = Vec::with_capacity(p);
        let mut beta: Vec<f64> = Vec::with_capacity(p);
        for j in 0..p {
            let mut w = op.apply(&basis[j])?;
            applied += 1;
            alpha.push(inner(&basis[j], &w).re);
            // full reorthogonalization, twice for stability
            for _ in 0..2 {
                for q in &basis {
                    let c = inner(q, &w);
                    w.iter_mut().zip(q).for_each(|(x, q)| *x -= q * c);
                }
            }
            let b = norm(&w);
            if j + 1 == p || b < 1e-14 || applied >= opts.max_iter.max(1) {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let k = alpha.len();
        let t = nalgebra::DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let top = eig.eigenvalues.imax();
        let y = eig.eigenvectors.column(top);
        let mut x = vec![C64::new(0.0, 0.0); dim];
        for (q, &c) in basis.iter().zip(y.iter()) {
            x.iter_mut().zip(q).for_each(|(x, q)| *x += q * c);
        }
        let s = norm(&x);
        x.iter_mut().for_each(|z| *z /= s);
        let ax = op.apply(&x)?;
        applied += 1;
        let lambda = inner(&x, &ax).re;
        let residual = ax.iter().zip(&x).map(|(a, v)| (a - v * lambda).norm_sqr()).sum::<f64>().sqrt();
        let converged = residual <= opts.tol * lambda.abs() || norm(&ax) == 0.0;
        best = EigenResult { eigenvalue: lambda, vector: x.clone(), iterations: applied, residual, converged };
        if converged {
            break;
        }
        v0 = x;
    }
    Ok(best)
}

/// Unit-modulus phase of the lens spectrum, 1 where the spectrum vanishes.
pub fn omega_tilde(omega: &ComplexGrid) -> Vec<C64> {
    let spec = crate::fft::dft2(omega, Direction::Forward);
    spec.as_slice()
        .iter()
        .map(|z| {
            let r = z.norm();
            if r > 0.0 {
                z / r
            } else {
                C64::new(1.0, 0.0)
            }
        })
        .collect()
}

fn lag(model: &ForwardModel, i: usize, j: usize) -> (isize, isize) {
    let (ri, ci) = model.anchor(i);
    let (rj, cj) = model.anchor(j);
    (ri as isize - rj as isize, ci as isize - cj as isize)
}

/// The overlap-masked, coverage-normalized lens product `w_ij` on the window of frame `i`.
pub fn pair_weight(model: &ForwardModel, i: usize, j: usize) -> Result<ComplexGrid> {
    if !model.scheme().overlaps(i, j) {
        return Err(Error::InvalidParameter(format!("frames {i} and {j} do not overlap")));
    }
    let m = model.window() as isize;
    let n = model.object();
    let (dr, dc) = lag(model, i, j);
    let (ri, ci) = model.anchor(i);
    let (wi, wj) = (model.probe(i), model.probe(j));
    let inv = model.qtq_inverse();
    Ok(ComplexGrid::from_fn(m as usize, m as usize, |a, b| {
        let (sa, sb) = (a as isize + dr, b as isize + dc);
        if sa < 0 || sb < 0 || sa >= m || sb >= m {
            return C64::new(0.0, 0.0);
        }
        wi.get(a, b) * wj.get(sa as usize, sb as usize).conj() * inv[(ri + a) * n + ci + b]
    }))
}

/// `V_ij(Φ)` on the m x m frequency-lag grid.
pub fn ambiguity_kernel(model: &ForwardModel, i: usize, j: usize) -> Result<ComplexGrid> {
    let mut v = pair_weight(model, i, j)?;
    model.dft().apply(v.as_mut_slice(), Direction::Forward);
    let s = 1.0 / model.window() as f64;
    v.scale(C64::new(s, 0.0));
    Ok(v)
}

/// `exp(−2πi q·Δ/m)` over the frequency grid.
fn lag_ramp(m: usize, (dr, dc): (isize, isize)) -> Vec<C64> {
    let mut out = Vec::with_capacity(m * m);
    for mu in 0..m {
        for nu in 0..m {
            let t = -2.0 * std::f64::consts::PI * (mu as f64 * dr as f64 + nu as f64 * dc as f64) / m as f64;
            out.push(C64::from_polar(1.0, t));
        }
    }
    out
}

/// Circular convolution `x ⊛ y` of two m x m frames.
fn circular_convolve(dft: &Dft2, x: &[C64], y: &[C64]) -> Vec<C64> {
    let m = dft.side() as f64;
    let mut fx = x.to_vec();
    let mut fy = y.to_vec();
    dft.apply(&mut fx, Direction::Forward);
    dft.apply(&mut fy, Direction::Forward);
    let mut out: Vec<C64> = fx.iter().zip(&fy).map(|(a, b)| a * b * m).collect();
    dft.apply(&mut out, Direction::Inverse);
    out
}

/// The connection graph `(w, g)` over diffraction pixels, held matrix-free:
/// `S = diag(a ω̃) P_FQ diag(a conj ω̃)` and the degree vector `D`.
#[derive(Clone, Debug)]
pub struct ConnectionGraphOperator {
    pfq: RangeProjector,
    a: Vec<f64>,
    omega_tilde: Vec<C64>,
    degree: Vec<f64>,
    pairs: Vec<(usize, usize)>,
}

pub fn build_gcl(model: &ForwardModel, a: &crate::grid::MeasurementStack) -> Result<ConnectionGraphOperator> {
    let (k, m) = (model.frames(), model.window());
    if a.frames() != k || a.side() != m {
        return Err(Error::Shape("amplitudes do not match the model".into()));
    }
    let pairs = model.scheme().overlap_pairs();
    let mm = m * m;
    let dft = model.dft();
    let mut degree = vec![0.0; k * mm];
    let a_c: Vec<C64> = a.as_slice().iter().map(|&v| C64::new(v, 0.0)).collect();
    for &(i, j) in &pairs {
        let v = ambiguity_kernel(model, i, j)?;
        let mag: Vec<C64> = v.as_slice().iter().map(|z| C64::new(z.norm(), 0.0)).collect();
        let conv = circular_convolve(dft, &mag, &a_c[j * mm..(j + 1) * mm]);
        for (d, c) in degree[i * mm..(i + 1) * mm].iter_mut().zip(&conv) {
            *d += c.re;
        }
    }
    for (p, (d, &av)) in degree.iter_mut().zip(a.as_slice()).enumerate() {
        *d *= av;
        if !(*d > 0.0) {
            return Err(Error::DegenerateGraph { vertex: p });
        }
    }
    Ok(ConnectionGraphOperator {
        pfq: RangeProjector::new(model.clone()),
        a: a.as_slice().to_vec(),
        omega_tilde: omega_tilde(model.omega()),
        degree,
        pairs,
    })
}

impl ConnectionGraphOperator {
    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    pub fn omega_tilde(&self) -> &[C64] {
        &self.omega_tilde
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn range(&self) -> &RangeProjector {
        &self.pfq
    }

    fn model(&self) -> &ForwardModel {
        self.pfq.model()
    }

    fn tilde_at(&self, p: usize) -> C64 {
        let mm = self.omega_tilde.len();
        self.omega_tilde[p % mm]
    }

    /// `S x` through the range projector.
    pub fn apply_s(&self, x: &[C64]) -> Result<Vec<C64>> {
        let model = self.model();
        let mut y = FrameStack::from_vec(
            model.frames(),
            model.window(),
            x.iter().enumerate().map(|(p, v)| v * self.tilde_at(p).conj() * self.a[p]).collect(),
        )?;
        y = self.pfq.project(&y)?;
        Ok(y.into_vec().into_iter().enumerate().map(|(p, v)| v * self.tilde_at(p) * self.a[p]).collect())
    }

    /// `S x` assembled pair by pair from the ambiguity kernels. Slower than
    /// [`apply_s`](Self::apply_s); kept as an independent route for checks.
    pub fn apply_s_pairwise(&self, x: &[C64]) -> Result<Vec<C64>> {
        let model = self.model();
        let mm = model.window() * model.window();
        let dft = model.dft();
        let y: Vec<C64> = x.iter().enumerate().map(|(p, v)| v * self.tilde_at(p).conj() * self.a[p]).collect();
        let mut out = vec![C64::new(0.0, 0.0); x.len()];
        for &(i, j) in &self.pairs {
            let v = ambiguity_kernel(model, i, j)?;
            let ramp = lag_ramp(model.window(), lag(model, i, j));
            let u: Vec<C64> = y[j * mm..(j + 1) * mm].iter().zip(&ramp).map(|(a, b)| a * b).collect();
            let c = circular_convolve(dft, v.as_slice(), &u);
            for (o, c) in out[i * mm..(i + 1) * mm].iter_mut().zip(&c) {
                *o += c;
            }
        }
        Ok(out.into_iter().enumerate().map(|(p, v)| v * self.tilde_at(p) * self.a[p]).collect())
    }

    /// `D^{-1/2} S D^{-1/2} x`.
    pub fn apply_normalized(&self, x: &[C64]) -> Result<Vec<C64>> {
        let scaled: Vec<C64> = x.iter().zip(&self.degree).map(|(v, d)| v / d.sqrt()).collect();
        let s = self.apply_s(&scaled)?;
        Ok(s.into_iter().zip(&self.degree).map(|(v, d)| v / d.sqrt()).collect())
    }
}

/// `(A + I)/2` with `A = D^{-1/2} S D^{-1/2}`: same eigenvectors, spectrum in `[0, 1]`.
struct ShiftedGcl<'a>(&'a ConnectionGraphOperator);

impl HermitianOperator for ShiftedGcl<'_> {
    fn dim(&self) -> usize {
        self.0.degree.len()
    }

    fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        let ax = self.0.apply_normalized(x)?;
        Ok(ax.iter().zip(x).map(|(a, v)| (a + v) * 0.5).collect())
    }
}

/// The normalized graph operator as a [`HermitianOperator`] (not shifted).
pub struct NormalizedGcl<'a>(pub &'a ConnectionGraphOperator);

impl HermitianOperator for NormalizedGcl<'_> {
    fn dim(&self) -> usize {
        self.0.degree.len()
    }

    fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.0.apply_normalized(x)
    }
}

/// Top eigenvector of the normalized connection operator, with eigenvalue
/// reported for `D^{-1/2} S D^{-1/2}` itself.
pub fn gcl_top_eigpair(graph: &ConnectionGraphOperator, opts: &PowerOptions) -> Result<EigenResult> {
    let mut r = top_eigpair(&ShiftedGcl(graph), opts)?;
    r.eigenvalue = 2.0 * r.eigenvalue - 1.0;
    r.residual *= 2.0;
    Ok(r)
}

/// GCL-PS: `ζ⁰ = P_FQ P_a v` with `v = D^{-1/2} u` the top eigenvector of
/// `D⁻¹S` and the `ω̃` gauge removed.
pub fn gcl_ps_init(
    graph: &ConnectionGraphOperator,
    pa: &AmplitudeProjector,
    opts: &PowerOptions,
) -> Result<(FrameStack, EigenResult)> {
    let eig = gcl_top_eigpair(graph, opts)?;
    let model = graph.model();
    let v: Vec<C64> = eig
        .vector
        .iter()
        .enumerate()
        .map(|(p, u)| u / graph.degree[p].sqrt() * graph.tilde_at(p).conj())
        .collect();
    let v = FrameStack::from_vec(model.frames(), model.window(), v)?;
    let zeta = graph.pfq.project(&pa.project(&v)?)?;
    Ok((zeta, eig))
}

/// `x ↦ T_a P_FQ T_a x`.
pub struct TruncatedKernel<'a> {
    pub pfq: &'a RangeProjector,
    pub mask: &'a TruncationMask,
}

impl HermitianOperator for TruncatedKernel<'_> {
    fn dim(&self) -> usize {
        self.mask.keep().len()
    }

    fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        let model = self.pfq.model();
        let mut y = FrameStack::from_vec(model.frames(), model.window(), x.to_vec())?;
        self.mask.apply(y.as_mut_slice());
        let mut z = self.pfq.project(&y)?;
        self.mask.apply(z.as_mut_slice());
        Ok(z.into_vec())
    }
}

/// t-PS: `ζ⁰ = P_FQ P_a v₀` with `v₀` the top eigenvector of `T_a P_FQ T_a`.
pub fn tps_init(
    pfq: &RangeProjector,
    pa: &AmplitudeProjector,
    mask: &TruncationMask,
    opts: &PowerOptions,
) -> Result<(FrameStack, EigenResult)> {
    let op = TruncatedKernel { pfq, mask };
    let eig = top_eigpair(&op, opts)?;
    let model = pfq.model();
    let v = FrameStack::from_vec(model.frames(), model.window(), eig.vector.clone())?;
    let zeta = pfq.project(&pa.project(&v)?)?;
    Ok((zeta, eig))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(values: &[f64]) -> DenseHermitian {
        let n = values.len();
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        for (i, v) in values.iter().enumerate() {
            data[i * n + i] = C64::new(*v, 0.0);
        }
        DenseHermitian { n, data }
    }

    #[test]
    fn diagonal_top_pair() {
        let r = power_top_eigpair(&diag(&[1.0, 2.0, 3.0]), &PowerOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.eigenvalue - 3.0).abs() < 1e-8);
        assert!((r.vector[2].norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn identity_converges_immediately() {
        let r = power_top_eigpair(&diag(&[1.0; 6]), &PowerOptions::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert!((r.eigenvalue - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let op = DenseHermitian { n: 2, data: vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)] };
        assert!(matches!(power_top_eigpair(&op, &PowerOptions::default()), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn delta_lens_has_flat_phase() {
        let mut w = ComplexGrid::zeros(4, 4);
        w.set(0, 0, C64::new(1.0, 0.0));
        assert!(omega_tilde(&w).iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
    }
}
