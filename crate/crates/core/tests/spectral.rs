mod common;

use std::f64::consts::PI;

use common::*;
use nalgebra::DMatrix;
use ptycho::projectors::{truncation_mask, AmplitudeProjector, RangeProjector};
use ptycho::spectral::{
    ambiguity_kernel, build_gcl, gcl_ps_init, gcl_top_eigpair, hermitian_defect, omega_tilde, pair_weight,
    power_top_eigpair, top_eigpair, tps_init, DenseHermitian, NormalizedGcl, PowerOptions,
};
use ptycho::{ComplexGrid, ForwardModel, IlluminationScheme, Position, C64};

fn random_psd(n: usize, seed: u64) -> DMatrix<C64> {
    let mut r = rng(seed);
    let b = DMatrix::from_fn(n, n, |_, _| rand_c(&mut r));
    &b * b.adjoint()
}

fn as_operator(m: &DMatrix<C64>) -> DenseHermitian {
    let n = m.nrows();
    DenseHermitian { n, data: (0..n * n).map(|p| m[(p / n, p % n)]).collect() }
}

fn aligned_error(v: &[C64], u: &[C64]) -> f64 {
    max_abs_diff(&align_to(v, u), u)
}

#[test]
fn eigensolvers_match_dense_decomposition() {
    let m = random_psd(50, 1);
    let (lambda, u) = dense_top_eig(&m);
    let op = as_operator(&m);
    let lanczos = top_eigpair(&op, &PowerOptions { tol: 1e-12, ..PowerOptions::default() }).unwrap();
    assert!(lanczos.converged);
    assert!((lanczos.eigenvalue - lambda).abs() < 1e-8 * lambda);
    assert!(aligned_error(&lanczos.vector, &u) < 1e-6);

    let power =
        power_top_eigpair(&op, &PowerOptions { tol: 1e-11, max_iter: 100_000, ..PowerOptions::default() }).unwrap();
    assert!(power.converged);
    assert!((power.eigenvalue - lambda).abs() < 1e-8 * lambda);
}

#[test]
fn non_hermitian_input_is_rejected() {
    let mut r = rng(2);
    let n = 6;
    let op = DenseHermitian { n, data: rand_vec(n * n, &mut r) };
    assert!(matches!(power_top_eigpair(&op, &PowerOptions::default()), Err(ptycho::Error::NotHermitian(_))));
    assert!(hermitian_defect(&as_operator(&random_psd(n, 3)), 10, &mut r).unwrap() < 1e-13);
}

#[test]
fn omega_tilde_examples() {
    // an even real lens has a real spectrum
    let m = 8;
    let even = ComplexGrid::from_fn(m, m, |a, b| {
        let d = |x: usize| x.min(m - x) as f64;
        C64::new((-0.3 * (d(a).powi(2) + d(b).powi(2))).exp(), 0.0)
    });
    for v in omega_tilde(&even) {
        assert!((v.re.abs() - 1.0).abs() < 1e-12 && v.im.abs() < 1e-12);
    }
    let mut r = rng(4);
    for v in omega_tilde(&rand_grid(m, &mut r)) {
        assert!((v.norm() - 1.0).abs() < 1e-14);
    }
    let zero = omega_tilde(&ComplexGrid::zeros(4, 4));
    assert!(zero.iter().all(|v| *v == C64::new(1.0, 0.0)));
}

#[test]
fn ambiguity_kernel_matches_direct_sum() {
    let model = random_model(12, 4, 2.0, 5);
    let m = 4;
    let pairs = model.scheme().overlap_pairs();
    assert!(pairs.iter().any(|&(i, j)| i != j));
    for &(i, j) in &pairs {
        let w = pair_weight(&model, i, j).unwrap();
        let v = ambiguity_kernel(&model, i, j).unwrap();
        let l1: f64 = w.as_slice().iter().map(|z| z.norm()).sum::<f64>() / (m * m) as f64;
        for p in 0..m {
            for q in 0..m {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..m {
                    for b in 0..m {
                        let t = 2.0 * PI * (p * a + q * b) as f64 / m as f64;
                        acc += w.get(a, b) * C64::from_polar(1.0, t);
                    }
                }
                acc /= (m * m) as f64;
                assert!((v.get(p, q) - acc).norm() < 1e-14);
                assert!(v.get(p, q).norm() <= l1 + 1e-14);
            }
        }
    }
    assert!(pair_weight(&model, 0, model.frames() - 1).is_err());
}

#[test]
fn graph_operator_matches_dense_construction() {
    let model = random_model(10, 4, 2.0, 6);
    let mut r = rng(7);
    let psi = rand_grid(10, &mut r);
    let a = model.forward_measure(&psi).unwrap();
    let graph = build_gcl(&model, &a).unwrap();
    let p = dense_range_projector(&dense_fq(&model));
    let av = a.as_slice();
    let dim = av.len();
    let tilde = omega_tilde(model.omega());
    let mm = 16;

    // D_p = a_p Σ_q |P(p, q)| a_q
    for row in 0..dim {
        let d: f64 = av[row] * (0..dim).map(|q| p[(row, q)].norm() * av[q]).sum::<f64>();
        assert!((graph.degree()[row] - d).abs() < 1e-10 * d);
    }

    let s = DMatrix::from_fn(dim, dim, |i, j| av[i] * tilde[i % mm] * p[(i, j)] * tilde[j % mm].conj() * av[j]);
    let x = rand_vec(dim, &mut r);
    let dense = apply(&s, &x);
    assert!(max_abs_diff(&graph.apply_s(&x).unwrap(), &dense) < 1e-12 * norm(&dense));
    assert!(max_abs_diff(&graph.apply_s_pairwise(&x).unwrap(), &dense) < 1e-12 * norm(&dense));

    let normalized = dense_of(dim, |x| graph.apply_normalized(x).unwrap());
    assert!((&normalized - normalized.adjoint()).iter().all(|z| z.norm() < 1e-12));
    let eig = normalized.clone().symmetric_eigen();
    assert!(eig.eigenvalues.iter().all(|&l| (-1.0 - 1e-10..=1.0 + 1e-10).contains(&l)));
    assert!(hermitian_defect(&NormalizedGcl(&graph), 10, &mut r).unwrap() < 1e-12);

    let top = gcl_top_eigpair(&graph, &PowerOptions { tol: 1e-12, ..PowerOptions::default() }).unwrap();
    let dense_top = eig.eigenvalues.max();
    assert!((top.eigenvalue - dense_top).abs() < 1e-9);
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn single_frame_graph_is_trivial() {
    let mut r = rng(8);
    let lens = ComplexGrid::from_fn(4, 4, |_, _| rand_c(&mut r) + C64::new(1.5, 0.0));
    let model =
        ForwardModel::new(IlluminationScheme::new(vec![Position::new(0.0, 0.0)], 4, 4).unwrap(), lens).unwrap();
    let a = model.forward_measure(&rand_grid(4, &mut r)).unwrap();
    let graph = build_gcl(&model, &a).unwrap();
    for (d, a) in graph.degree().iter().zip(a.as_slice()) {
        assert!((d - a * a).abs() < 1e-12 * a * a);
    }
    let x = rand_vec(16, &mut r);
    assert!(max_abs_diff(&graph.apply_normalized(&x).unwrap(), &x) < 1e-12);
}

#[test]
fn initializers_land_in_the_range() {
    let model = random_model(12, 4, 2.0, 9);
    let mut r = rng(10);
    let a = model.forward_measure(&rand_grid(12, &mut r)).unwrap();
    let pfq = RangeProjector::new(model.clone());
    let pa = AmplitudeProjector::new(a.clone());
    let opts = PowerOptions { tol: 1e-10, ..PowerOptions::default() };

    let mask = truncation_mask(&a, 0.6).unwrap();
    let (z, eig) = tps_init(&pfq, &pa, &mask, &opts).unwrap();
    assert!(eig.eigenvalue <= 1.0 + 1e-10 && eig.eigenvalue > 0.0);
    assert!(max_abs_diff(pfq.project(&z).unwrap().as_slice(), z.as_slice()) < 1e-12 * z.norm());

    // nothing truncated: the kernel is P_FQ itself
    let full = truncation_mask(&a, 1.0).unwrap();
    let (_, eig) = tps_init(&pfq, &pa, &full, &opts).unwrap();
    assert!((eig.eigenvalue - 1.0).abs() < 1e-9);

    let graph = build_gcl(&model, &a).unwrap();
    let (z, eig) = gcl_ps_init(&graph, &pa, &opts).unwrap();
    assert!(eig.eigenvalue <= 1.0 + 1e-10);
    assert!(max_abs_diff(pfq.project(&z).unwrap().as_slice(), z.as_slice()) < 1e-12 * z.norm());
}

#[test]
fn graph_rejects_mismatched_amplitudes() {
    let model = random_model(12, 4, 2.0, 11);
    let wrong = ptycho::MeasurementStack::from_vec(1, 4, vec![1.0; 16]).unwrap();
    assert!(build_gcl(&model, &wrong).is_err());
    let zeros = ptycho::MeasurementStack::from_vec(model.frames(), 4, vec![0.0; model.frames() * 16]).unwrap();
    assert!(matches!(build_gcl(&model, &zeros), Err(ptycho::Error::DegenerateGraph { .. })));
}
