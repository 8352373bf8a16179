//! Built-in property suite behind `ptycho verify`: small instances, each
//! check reporting its measured residual against a threshold.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fft::{Dft2, Direction};
use crate::forward::ForwardModel;
use crate::grid::{dist, inner, norm, ComplexGrid, MeasurementStack, C64};
use crate::lens::{make_lens, LensSpec};
use crate::projectors::{AmplitudeProjector, RangeProjector};
use crate::scheme::{build_scheme, RasterSpec};
use crate::theory::{self, GenericFrame, Preimage, Region};

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyCheck {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub passed: bool,
    pub note: String,
}

impl PropertyCheck {
    fn below(name: &str, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold,
            passed: measured.is_finite() && measured < threshold,
            note: String::new(),
        }
    }

    fn with_note(mut self, note: String) -> Self {
        self.note = note;
        self
    }
}

impl std::fmt::Display for PropertyCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:<34} measured {:.3e} (limit {:.1e})",
            if self.passed { "pass" } else { "FAIL" },
            self.name,
            self.measured,
            self.threshold
        )?;
        if !self.note.is_empty() {
            write!(f, "  {}", self.note)?;
        }
        Ok(())
    }
}

fn rand_c(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn rand_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..len).map(|_| rand_c(rng)).collect()
}

/// Worst relative error of `grad` against central differences of `ρ`.
/// The gradient is taken in the real-inner-product sense `d/dh ρ(z + h w) = 2 Re⟨g, w⟩`.
pub fn gradient_fd_error(grad: impl Fn(&[C64], &[f64]) -> Result<Vec<C64>>, trials: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let z = rand_vec(6, &mut rng);
        let a: Vec<f64> = (0..6).map(|_| rng.random_range(0.1..1.5)).collect();
        let w = rand_vec(6, &mut rng);
        let g = grad(&z, &a)?;
        let analytic = 2.0 * inner(&g, &w).re;
        let h = 1e-6;
        let shift = |t: f64| -> Vec<C64> { z.iter().zip(&w).map(|(z, w)| z + w * t).collect() };
        let fd = (theory::rho(&shift(h), &a) - theory::rho(&shift(-h), &a)) / (2.0 * h);
        worst = worst.max((analytic - fd).abs() / analytic.abs().max(1e-3));
    }
    Ok(worst)
}

/// Worst relative error of `hessian_form` against second differences of `ρ`.
pub fn hessian_fd_error(trials: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let z = rand_vec(6, &mut rng);
        let a: Vec<f64> = (0..6).map(|_| rng.random_range(0.1..1.5)).collect();
        let w = rand_vec(6, &mut rng);
        let analytic = theory::hessian_form(&z, &w, &a)?;
        let h = 1e-4;
        let shift = |t: f64| -> Vec<C64> { z.iter().zip(&w).map(|(z, w)| z + w * t).collect() };
        let fd = (theory::rho(&shift(h), &a) - 2.0 * theory::rho(&z, &a) + theory::rho(&shift(-h), &a)) / (h * h);
        worst = worst.max((analytic - fd).abs() / analytic.abs().max(1e-2));
    }
    Ok(worst)
}

/// Small square instance with a centered annular lens.
pub fn toy_model(n: usize, m: usize, d: f64) -> Result<ForwardModel> {
    let scheme = build_scheme(&RasterSpec { n, m, dx: d, dy: d, jitter: 0.0, shear: false, seed: 0 })?;
    let lens = make_lens(&LensSpec::small(m, 0.0, 0.45))?;
    ForwardModel::new(scheme, lens)
}

/// Searches lab AP runs for a step where `‖ζ_{l+1} − ζ_l‖ > ‖ζ_l − ζ_{l−1}‖`.
/// Returns `(seed, iteration, previous step, next step)`.
pub fn step_size_witness() -> Option<(u64, usize, f64, f64)> {
    for seed in 0..64u64 {
        let (frame, _) = GenericFrame::sample(4, 8, seed).ok()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let (_, _, a) = theory::lab_instance(&frame, &mut rng);
        let start = frame.project_range(&theory::gaussian_vector(8, &mut rng));
        let iterates = frame.run_ap(&start, &a, 60);
        for l in 1..iterates.len() - 1 {
            let s0 = dist(&iterates[l], &iterates[l - 1]);
            let s1 = dist(&iterates[l + 1], &iterates[l]);
            if s1 > s0 * (1.0 + 1e-9) && s0 > 1e-12 {
                return Some((seed, l, s0, s1));
            }
        }
    }
    None
}

pub fn run_suite() -> Result<Vec<PropertyCheck>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    // unitary DFT
    let dft = Dft2::new(8);
    let x = rand_vec(64, &mut rng);
    let mut y = x.clone();
    dft.apply(&mut y, Direction::Forward);
    let energy = (norm(&y) - norm(&x)).abs();
    dft.apply(&mut y, Direction::Inverse);
    out.push(PropertyCheck::below("dft unitary + round trip", energy.max(dist(&x, &y)), 1e-12));

    // projectors
    let model = toy_model(8, 4, 2.0)?;
    let pfq = RangeProjector::new(model.clone());
    let psi = ComplexGrid::from_fn(8, 8, |_, _| rand_c(&mut rng));
    let a = model.forward_measure(&psi)?;
    let pa = AmplitudeProjector::new(a.clone());
    let z = crate::grid::FrameStack::from_vec(model.frames(), 4, rand_vec(model.frames() * 16, &mut rng))?;
    let w = crate::grid::FrameStack::from_vec(model.frames(), 4, rand_vec(model.frames() * 16, &mut rng))?;
    let p1 = pfq.project(&z)?;
    let p2 = pfq.project(&p1)?;
    out.push(PropertyCheck::below("range projector idempotent", dist(p1.as_slice(), p2.as_slice()) / z.norm(), 1e-10));
    let pw = pfq.project(&w)?;
    let sa = (inner(p1.as_slice(), w.as_slice()) - inner(z.as_slice(), pw.as_slice())).norm() / (z.norm() * w.norm());
    out.push(PropertyCheck::below("range projector self-adjoint", sa, 1e-10));
    let q1 = pa.project(&z)?;
    let q2 = pa.project(&q1)?;
    out.push(PropertyCheck::below("amplitude projector idempotent", dist(q1.as_slice(), q2.as_slice()) / z.norm(), 1e-12));

    // AP step equals the projected gradient step ζ − 2 P_FQ ∇ρ on the range
    let zr = pfq.project(&z)?;
    let ap = crate::solvers::ap_step(&pfq, &pa, &zr)?;
    let g = theory::grad_rho(zr.as_slice(), a.as_slice())?;
    let pg = pfq.project(&crate::grid::FrameStack::from_vec(model.frames(), 4, g)?)?;
    let pgd: Vec<C64> = zr.as_slice().iter().zip(pg.as_slice()).map(|(z, g)| z - g * 2.0).collect();
    out.push(PropertyCheck::below("AP = projected gradient", dist(ap.as_slice(), &pgd) / zr.norm(), 1e-12));

    out.push(PropertyCheck::below("gradient vs central differences", gradient_fd_error(theory::grad_rho, 50, 7)?, 1e-6));
    out.push(PropertyCheck::below("Hessian vs second differences", hessian_fd_error(50, 8)?, 1e-4));

    // residual inverse branches
    let mut bad = 0usize;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let zeta = rand_c(&mut rng) * 2.0;
        let amp = rng.random_range(0.05..1.5);
        let pre = theory::invert_residual_scalar(zeta, amp)?;
        let sols = match &pre {
            Preimage::Unique(e) => vec![*e],
            Preimage::Pair(e, f) => vec![*e, *f],
            Preimage::Circle { radius } => vec![C64::new(*radius, 0.0)],
        };
        let mut consistent = true;
        for e in &sols {
            worst = worst.max((e - theory::amplitude_project(&[*e], &[amp])[0] - zeta).norm());
            consistent &= match (pre.count(), theory::classify_region(&[*e], &[amp])?) {
                (None, Region::Infinite) => true,
                (Some(c), Region::Finite(k)) => c == 1usize << k,
                _ => false,
            };
        }
        bad += (!consistent) as usize;
    }
    out.push(PropertyCheck::below("(I - P_a) preimages", worst + bad as f64, 1e-14));

    // monotone residuals and the sphere condition on lab AP runs
    let mut worst_ratio: f64 = 0.0;
    let mut worst_sphere: f64 = 0.0;
    for seed in 0..5 {
        let (frame, _) = GenericFrame::sample(2, 6, seed)?;
        let mut r = ChaCha8Rng::seed_from_u64(seed + 100);
        let (_, _, amp) = theory::lab_instance(&frame, &mut r);
        // the monotone chain needs the start on the range
        let start = frame.project_range(&theory::gaussian_vector(6, &mut r));
        let iterates = frame.run_ap(&start, &amp, 300);
        let ratios = theory::residual_ratios(&iterates, &amp, |v| frame.project_range(v));
        worst_ratio = worst_ratio.max(ratios.max());
        let last = iterates.last().expect("non-empty");
        let prev = &iterates[iterates.len() - 2];
        let na = norm(&amp.iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<_>>());
        if dist(last, prev) < 1e-12 * na {
            worst_sphere = worst_sphere.max(theory::stagnation_sphere_residual(last, &amp) / (na * na));
        }
    }
    out.push(PropertyCheck::below("AP residual ratios <= 1", worst_ratio, 1.0 + 1e-12));
    out.push(PropertyCheck::below("stagnation sphere at fixed points", worst_sphere, 1e-8));

    let witness = step_size_witness();
    let check = match witness {
        Some((seed, l, s0, s1)) => PropertyCheck::below("step size may increase (witness)", 0.0, 1.0)
            .with_note(format!("lab N=4 M=8 seed {seed}, step {l}: {s0:.4e} -> {s1:.4e}")),
        None => PropertyCheck::below("step size may increase (witness)", f64::INFINITY, 1.0)
            .with_note("no witness found".into()),
    };
    out.push(check);

    // array format round trip
    let arr = crate::io::ArrayFile::from_grid(&psi);
    let back = crate::io::ArrayFile::from_bytes(&arr.to_bytes())?;
    out.push(PropertyCheck::below("array file round trip", (back != arr) as u8 as f64, 0.5));

    // noise-free measurement consistency
    let ms: MeasurementStack = model.forward_measure(&psi)?;
    let recon = model.reconstruct_object(&model.forward_frames(&psi)?)?;
    out.push(PropertyCheck::below(
        "object recovered from its frames",
        dist(recon.as_slice(), psi.as_slice()) / psi.norm() + (ms.norm() - a.norm()).abs(),
        1e-12,
    ));
    Ok(out)
}
