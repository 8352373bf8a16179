//! Reconstruction engines: AP, RAAR, frame-synchronized RAAR and
//! frame-synchronized conjugate gradients, plus the driver that records
//! convergence traces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Direction;
use crate::forward::ForwardModel;
use crate::grid::{inner, norm, ComplexGrid, FrameStack, MeasurementStack, C64};
use crate::metrics::{compute_metrics, ConvergenceTrace};
use crate::projectors::{truncation_mask, AmplitudeProjector, RangeProjector};
use crate::spectral::{self, DenseHermitian, PowerOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Ap,
    Raar,
    SynchroRaar,
    SynchroCg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMethod {
    Random,
    Tps,
    Gcl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyncKernel {
    /// `K`, weighted by `(Q*Q)^{-1}`.
    #[serde(rename = "K")]
    Weighted,
    /// `𝒦`, normalized by the `√(Q*Q)` window norms.
    #[serde(rename = "curlyK")]
    Normalized,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub iterations: usize,
    pub beta: f64,
    pub init: InitMethod,
    /// Fraction of amplitudes kept by the t-PS mask.
    pub percentile_keep: f64,
    pub sync_kernel: SyncKernel,
    pub alpha_max: f64,
    pub line_search_tol: f64,
    /// Stop early once `ε_Δ` falls below this.
    pub stop_eps_delta: Option<f64>,
    /// Eigensolver budget of the t-PS / GCL-PS initializers.
    pub init_power: PowerOptions,
    /// Eigensolver of the per-iteration frame synchronization (warm-started power iteration).
    pub sync_power: PowerOptions,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Ap,
            iterations: 100,
            beta: 0.9,
            init: InitMethod::Random,
            percentile_keep: 0.8,
            sync_kernel: SyncKernel::Weighted,
            alpha_max: 2.0,
            line_search_tol: 1e-6,
            stop_eps_delta: None,
            init_power: PowerOptions { max_iter: 300, ..PowerOptions::default() },
            sync_power: PowerOptions { max_iter: 200, krylov: 0, ..PowerOptions::default() },
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!("beta = {} must lie in (0, 1)", self.beta)));
        }
        if !(self.percentile_keep > 0.0 && self.percentile_keep <= 1.0) {
            return Err(Error::Config(format!("percentile_keep = {} must lie in (0, 1]", self.percentile_keep)));
        }
        if !(self.alpha_max > 0.0) || !(self.line_search_tol > 0.0) {
            return Err(Error::Config("line search needs alpha_max > 0 and tol > 0".into()));
        }
        Ok(())
    }
}

/// `P_FQ P_a ζ`.
pub fn ap_step(pfq: &RangeProjector, pa: &AmplitudeProjector, zeta: &FrameStack) -> Result<FrameStack> {
    pfq.project(&pa.project(zeta)?)
}

fn raar_combine(zeta: &FrameStack, paz: &FrameStack, p_paz: &FrameStack, p_z: &FrameStack, beta: f64) -> FrameStack {
    let data = zeta
        .as_slice()
        .iter()
        .zip(paz.as_slice())
        .zip(p_paz.as_slice())
        .zip(p_z.as_slice())
        .map(|(((z, pa), ppa), pz)| ppa * (2.0 * beta) + pa * (1.0 - 2.0 * beta) + (z - pz) * beta)
        .collect();
    FrameStack::from_vec(zeta.frames(), zeta.side(), data).expect("shapes agree")
}

/// `2β P_FQ P_a ζ + (1 − 2β) P_a ζ + β (I − P_FQ) ζ`, i.e. `β/2 (R_FQ R_a + I) + (1 − β) P_a`.
pub fn raar_step(pfq: &RangeProjector, pa: &AmplitudeProjector, zeta: &FrameStack, beta: f64) -> Result<FrameStack> {
    let paz = pa.project(zeta)?;
    let p_paz = pfq.project(&paz)?;
    let p_z = pfq.project(zeta)?;
    Ok(raar_combine(zeta, &paz, &p_paz, &p_z, beta))
}

/// Per-frame phase factors from the frame synchronization kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSyncState {
    pub xi: Vec<C64>,
    /// Row-major K x K kernel.
    pub kernel: Vec<C64>,
    pub converged: bool,
}

impl FrameSyncState {
    pub fn identity(k: usize) -> Self {
        Self { xi: vec![C64::new(1.0, 0.0); k], kernel: Vec::new(), converged: true }
    }
}

/// Builds the K x K frame kernel from `z_i = F*(P_a ζ)_i`.
pub fn sync_kernel_matrix(
    model: &ForwardModel,
    pa: &AmplitudeProjector,
    zeta: &FrameStack,
    variant: SyncKernel,
) -> Result<Vec<C64>> {
    let (k, m, n) = (model.frames(), model.window(), model.object());
    let mut z = pa.project(zeta)?;
    model.dft().apply_stack(z.as_mut_slice(), Direction::Inverse);
    // u_i = conj(ω_i) z_i, the window content of Q_i* z_i
    let mut u = z.clone();
    for i in 0..k {
        let w = model.probe(i).as_slice();
        for (v, w) in u.frame_mut(i).iter_mut().zip(w) {
            *v *= w.conj();
        }
    }
    let qtq = model.qtq_diagonal();
    let inv = model.qtq_inverse();
    let scale: Vec<f64> = match variant {
        SyncKernel::Weighted => (0..k).map(|i| pa.amplitudes().frame_norm(i)).collect(),
        SyncKernel::Normalized => (0..k)
            .map(|i| {
                let (r0, c0) = model.anchor(i);
                let f = z.frame(i);
                let mut acc = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        acc += qtq[(r0 + a) * n + c0 + b] * f[a * m + b].norm_sqr();
                    }
                }
                acc.sqrt()
            })
            .collect(),
    };
    let mut kernel = vec![C64::new(0.0, 0.0); k * k];
    for (i, j) in model.scheme().overlap_pairs() {
        if j < i {
            continue;
        }
        let (ri, ci) = model.anchor(i);
        let (rj, cj) = model.anchor(j);
        let (ui, uj) = (u.frame(i), u.frame(j));
        let mut acc = C64::new(0.0, 0.0);
        let r_lo = ri.max(rj);
        let r_hi = (ri + m).min(rj + m);
        let c_lo = ci.max(cj);
        let c_hi = (ci + m).min(cj + m);
        for r in r_lo..r_hi {
            for c in c_lo..c_hi {
                let w = match variant {
                    SyncKernel::Weighted => inv[r * n + c],
                    SyncKernel::Normalized => 1.0,
                };
                acc += ui[(r - ri) * m + c - ci].conj() * uj[(r - rj) * m + c - cj] * w;
            }
        }
        let d = scale[i] * scale[j];
        let v = if d > 0.0 { acc / d } else { C64::new(0.0, 0.0) };
        kernel[i * k + j] = v;
        kernel[j * k + i] = v.conj();
    }
    for i in 0..k {
        // exact real diagonal
        kernel[i * k + i] = C64::new(kernel[i * k + i].re, 0.0);
    }
    Ok(kernel)
}

/// Top eigenvector `ξ` of the frame kernel, with its global phase fixed so
/// that `Σ ξ` is real and positive. `warm` seeds the power iteration.
pub fn frame_sync_kernel(
    model: &ForwardModel,
    pa: &AmplitudeProjector,
    zeta: &FrameStack,
    variant: SyncKernel,
    opts: &PowerOptions,
    warm: Option<&[C64]>,
) -> Result<FrameSyncState> {
    let k = model.frames();
    if k < 2 {
        return Ok(FrameSyncState::identity(k));
    }
    let kernel = sync_kernel_matrix(model, pa, zeta, variant)?;
    let op = DenseHermitian { n: k, data: kernel };
    let eig = match spectral::power_top_eigpair_from(&op, opts, warm) {
        Ok(e) => e,
        Err(_) => return Ok(FrameSyncState { xi: vec![C64::new(1.0, 0.0); k], kernel: op.data, converged: false }),
    };
    let mut xi = eig.vector;
    let s: C64 = xi.iter().sum();
    if s.norm() > 0.0 {
        let g = s.conj() / s.norm();
        xi.iter_mut().for_each(|x| *x *= g);
    }
    Ok(FrameSyncState { xi, kernel: op.data, converged: eig.converged })
}

/// `P_FQ diag(B ξ/|ξ|) x`: frame `k` of `x` is rotated by the phase of `ξ_k`
/// before the range projection.
pub fn apply_frame_phases(pfq: &RangeProjector, x: &FrameStack, xi: &[C64]) -> Result<FrameStack> {
    if xi.len() != x.frames() {
        return Err(Error::Shape(format!("{} phases for {} frames", xi.len(), x.frames())));
    }
    let mut y = x.clone();
    for (k, x) in xi.iter().enumerate() {
        let r = x.norm();
        let u = if r > 0.0 { x / r } else { C64::new(1.0, 0.0) };
        y.frame_mut(k).iter_mut().for_each(|v| *v *= u);
    }
    pfq.project(&y)
}

/// RAAR with `P_FQ` replaced by its frame-synchronized version.
pub fn synchro_raar_step_with(
    pfq: &RangeProjector,
    pa: &AmplitudeProjector,
    zeta: &FrameStack,
    beta: f64,
    xi: &[C64],
) -> Result<FrameStack> {
    let paz = pa.project(zeta)?;
    let p_paz = apply_frame_phases(pfq, &paz, xi)?;
    let p_z = apply_frame_phases(pfq, zeta, xi)?;
    Ok(raar_combine(zeta, &paz, &p_paz, &p_z, beta))
}

/// One frame synchronization solve followed by the synchronized RAAR update.
pub fn synchro_raar_step(
    pfq: &RangeProjector,
    pa: &AmplitudeProjector,
    zeta: &FrameStack,
    beta: f64,
    variant: SyncKernel,
    opts: &PowerOptions,
    warm: Option<&[C64]>,
) -> Result<(FrameStack, FrameSyncState)> {
    let sync = frame_sync_kernel(pfq.model(), pa, zeta, variant, opts, warm)?;
    let next = synchro_raar_step_with(pfq, pa, zeta, beta, &sync.xi)?;
    Ok((next, sync))
}

fn amplitude_misfit(zeta: &[C64], dir: &[C64], a: &[f64], alpha: f64) -> f64 {
    zeta.iter()
        .zip(dir)
        .zip(a)
        .map(|((z, d), a)| ((z + d * alpha).norm() - a).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Minimizes `‖|ζ + αΛ| − a‖` over `[0, alpha_max]`: 32 equispaced samples,
/// then golden-section refinement around the best one.
pub fn line_search_alpha(zeta: &[C64], dir: &[C64], a: &[f64], alpha_max: f64, tol: f64) -> f64 {
    if dir.iter().all(|d| d.norm_sqr() == 0.0) {
        return 0.0;
    }
    let f = |t: f64| amplitude_misfit(zeta, dir, a, t);
    const SAMPLES: usize = 32;
    let h = alpha_max / (SAMPLES - 1) as f64;
    let (mut best_i, mut best_f) = (0usize, f(0.0));
    for i in 1..SAMPLES {
        let v = f(i as f64 * h);
        if v < best_f {
            best_i = i;
            best_f = v;
        }
    }
    let mut lo = (best_i.saturating_sub(1)) as f64 * h;
    let mut hi = ((best_i + 1).min(SAMPLES - 1)) as f64 * h;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    let best_alpha = best_i as f64 * h;
    if f(mid) <= best_f {
        mid
    } else {
        best_alpha
    }
}

/// Conjugate-gradient state carried between steps.
#[derive(Clone, Debug)]
pub struct CgState {
    pub zeta: FrameStack,
    pub prev_delta: Option<FrameStack>,
    pub prev_dir: Option<FrameStack>,
    pub xi: Option<Vec<C64>>,
    pub last_alpha: f64,
}

impl CgState {
    pub fn new(zeta: FrameStack) -> Self {
        Self { zeta, prev_delta: None, prev_dir: None, xi: None, last_alpha: 0.0 }
    }
}

/// One synchro-CG step: projected gradient `Δ = P_FQ^(ℓ) P_a ζ − ζ`, PR+
/// conjugate direction, line search along it.
pub fn cg_step(
    state: &CgState,
    pfq: &RangeProjector,
    pa: &AmplitudeProjector,
    variant: SyncKernel,
    cfg: &SolverConfig,
) -> Result<CgState> {
    let zeta = &state.zeta;
    let sync = frame_sync_kernel(pfq.model(), pa, zeta, variant, &cfg.sync_power, state.xi.as_deref())?;
    let target = apply_frame_phases(pfq, &pa.project(zeta)?, &sync.xi)?;
    let delta: Vec<C64> = target.as_slice().iter().zip(zeta.as_slice()).map(|(t, z)| t - z).collect();

    let floor = 1e-14 * pa.norm_a();
    let dir: Vec<C64> = match (&state.prev_delta, &state.prev_dir) {
        (Some(pd), Some(pl)) if norm(pd.as_slice()) >= floor => {
            let diff: Vec<C64> = delta.iter().zip(pd.as_slice()).map(|(d, p)| d - p).collect();
            let b = (inner(&delta, &diff).re / norm(pd.as_slice()).powi(2)).max(0.0);
            delta.iter().zip(pl.as_slice()).map(|(d, l)| d + l * b).collect()
        }
        _ => delta.clone(),
    };
    let alpha = line_search_alpha(zeta.as_slice(), &dir, pa.amplitudes().as_slice(), cfg.alpha_max, cfg.line_search_tol);
    let next: Vec<C64> = zeta.as_slice().iter().zip(&dir).map(|(z, d)| z + d * alpha).collect();
    let (k, m) = (zeta.frames(), zeta.side());
    Ok(CgState {
        zeta: FrameStack::from_vec(k, m, next)?,
        prev_delta: Some(FrameStack::from_vec(k, m, delta)?),
        prev_dir: Some(FrameStack::from_vec(k, m, dir)?),
        xi: Some(sync.xi),
        last_alpha: alpha,
    })
}

/// `(Q*Q)^{-1} Q* F* ζ`.
pub fn reconstruct_object(model: &ForwardModel, zeta: &FrameStack) -> Result<ComplexGrid> {
    model.reconstruct_object(zeta)
}

/// `F Q` applied to a complex Gaussian object of unit variance.
pub fn random_init(model: &ForwardModel, seed: u64) -> Result<FrameStack> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.object();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi = ComplexGrid::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re * s, im * s)
    });
    model.forward_frames(&psi)
}

/// Starting iterate for the configured initializer.
pub fn initialize(
    cfg: &SolverConfig,
    pfq: &RangeProjector,
    pa: &AmplitudeProjector,
) -> Result<FrameStack> {
    let model = pfq.model();
    let opts = PowerOptions { seed: cfg.seed, ..cfg.init_power };
    match cfg.init {
        InitMethod::Random => random_init(model, cfg.seed),
        InitMethod::Tps => {
            let mask = truncation_mask(pa.amplitudes(), cfg.percentile_keep)?;
            Ok(spectral::tps_init(pfq, pa, &mask, &opts)?.0)
        }
        InitMethod::Gcl => {
            let graph = spectral::build_gcl(model, pa.amplitudes())?;
            Ok(spectral::gcl_ps_init(&graph, pa, &opts)?.0)
        }
    }
}

/// Iterates one configured algorithm from a given start.
pub struct Stepper<'a> {
    cfg: SolverConfig,
    pfq: &'a RangeProjector,
    pa: &'a AmplitudeProjector,
    zeta: FrameStack,
    cg: Option<CgState>,
    xi: Option<Vec<C64>>,
}

impl<'a> Stepper<'a> {
    pub fn new(cfg: SolverConfig, pfq: &'a RangeProjector, pa: &'a AmplitudeProjector, zeta: FrameStack) -> Self {
        let cg = (cfg.algorithm == Algorithm::SynchroCg).then(|| CgState::new(zeta.clone()));
        Self { cfg, pfq, pa, zeta, cg, xi: None }
    }

    pub fn current(&self) -> &FrameStack {
        &self.zeta
    }

    /// The iterate that the next call to [`advance`](Self::advance) would produce.
    fn peek(&self) -> Result<(FrameStack, Option<CgState>, Option<Vec<C64>>)> {
        let (pfq, pa, cfg) = (self.pfq, self.pa, &self.cfg);
        match cfg.algorithm {
            Algorithm::Ap => Ok((ap_step(pfq, pa, &self.zeta)?, None, None)),
            Algorithm::Raar => Ok((raar_step(pfq, pa, &self.zeta, cfg.beta)?, None, None)),
            Algorithm::SynchroRaar => {
                let (next, sync) =
                    synchro_raar_step(pfq, pa, &self.zeta, cfg.beta, cfg.sync_kernel, &cfg.sync_power, self.xi.as_deref())?;
                Ok((next, None, Some(sync.xi)))
            }
            Algorithm::SynchroCg => {
                let st = cg_step(self.cg.as_ref().expect("cg state"), pfq, pa, cfg.sync_kernel, cfg)?;
                Ok((st.zeta.clone(), Some(st), None))
            }
        }
    }

    pub fn advance(&mut self) -> Result<&FrameStack> {
        let (next, cg, xi) = self.peek()?;
        self.zeta = next;
        if cg.is_some() {
            self.cg = cg;
        }
        if xi.is_some() {
            self.xi = xi;
        }
        Ok(&self.zeta)
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub psi: ComplexGrid,
    pub zeta: FrameStack,
    pub trace: ConvergenceTrace,
}

/// Initializes, iterates and records one metric row per iterate
/// (`iterations + 1` rows unless stopped early). `psi0`, when given, enables `ε₀`.
pub fn run(cfg: &SolverConfig, model: &ForwardModel, a: &MeasurementStack, psi0: Option<&ComplexGrid>) -> Result<RunOutput> {
    cfg.validate()?;
    let pfq = RangeProjector::new(model.clone());
    let pa = AmplitudeProjector::new(a.clone());
    let start = initialize(cfg, &pfq, &pa).map_err(|e| Error::Iteration { iteration: 0, source: Box::new(e) })?;
    run_from(cfg, &pfq, &pa, start, psi0)
}

/// Same as [`run`] from an explicit starting iterate.
pub fn run_from(
    cfg: &SolverConfig,
    pfq: &RangeProjector,
    pa: &AmplitudeProjector,
    start: FrameStack,
    psi0: Option<&ComplexGrid>,
) -> Result<RunOutput> {
    cfg.validate()?;
    let reference = psi0.map(|p| pfq.model().forward_frames(p)).transpose()?;
    let mut trace = ConvergenceTrace::new(pa.norm_a());
    let mut stepper = Stepper::new(*cfg, pfq, pa, start);
    let wrap = |iteration: usize| move |e: Error| Error::Iteration { iteration, source: Box::new(e) };
    for l in 0..=cfg.iterations {
        let (next, cg, xi) = stepper.peek().map_err(wrap(l))?;
        let row = compute_metrics(l, stepper.current(), Some(&next), pa, pfq, reference.as_ref()).map_err(wrap(l))?;
        let done = cfg.stop_eps_delta.is_some_and(|t| row.eps_delta.is_some_and(|d| d < t));
        trace.push(row);
        if l == cfg.iterations || done {
            break;
        }
        stepper.zeta = next;
        if cg.is_some() {
            stepper.cg = cg;
        }
        if xi.is_some() {
            stepper.xi = xi;
        }
    }
    let zeta = stepper.zeta;
    let psi = pfq.model().reconstruct_object(&zeta)?;
    Ok(RunOutput { psi, zeta, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_line_search() {
        let alpha = line_search_alpha(&[C64::new(1.0, 0.0)], &[C64::new(1.0, 0.0)], &[3.0], 4.0, 1e-9);
        assert!((alpha - 2.0).abs() < 1e-6, "{alpha}");
        assert_eq!(line_search_alpha(&[C64::new(1.0, 0.0)], &[C64::new(0.0, 0.0)], &[3.0], 4.0, 1e-9), 0.0);
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        assert!(c.validate().is_ok());
        c.beta = 1.0;
        assert!(c.validate().is_err());
    }
}
