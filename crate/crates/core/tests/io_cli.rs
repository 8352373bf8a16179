mod common;

use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use ptycho::io::{
    magnitude_pgm, phase_ppm, read_array, read_pnm_header, trace_csv, ArrayData, ArrayFile, ExperimentConfig,
};
use ptycho::lens::{make_lens, LensSpec};
use ptycho::metrics::{ConvergenceTrace, MetricRow};
use ptycho::{ComplexGrid, ForwardModel, IlluminationScheme, Position, C64};

const CONFIG: &str = r#"
[object]
source = "phantom"
n = 24

[lens]
kind = "blr"
m = 8
r_outer = 0.4
r_inner = 0.1
focus_radius = 2.5
design_iters = 30
seed = 3

[scheme]
dx = 2
dy = 2
seed = 3

[noise]
sigma_std = 0.0
seed = 4

[init]
method = "tps"

[solver]
algorithm = "ap"
iterations = 101
seed = 5

[output]
directory = "unused"
"#;

fn ptycho(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_ptycho")).args(args).output().expect("binary runs");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

proptest! {
    #[test]
    fn arrays_round_trip_bit_exactly(
        dims in prop::collection::vec(1usize..5, 0..4),
        bits in prop::collection::vec(any::<u64>(), 128),
        complex in any::<bool>(),
    ) {
        let count: usize = dims.iter().product();
        let f = |i: usize| f64::from_bits(bits[i % bits.len()]);
        let arr = if complex {
            ArrayFile::complex(dims.clone(), (0..count).map(|i| C64::new(f(2 * i), f(2 * i + 1))).collect()).unwrap()
        } else {
            ArrayFile::real(dims.clone(), (0..count).map(f).collect()).unwrap()
        };
        let bytes = arr.to_bytes();
        let back = ArrayFile::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back.dims, &dims);
        prop_assert_eq!(back.to_bytes(), bytes);
    }
}

#[test]
fn malformed_arrays_are_rejected() {
    let good = ArrayFile::real(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap().to_bytes();
    assert_eq!(&good[..4], b"PTYC");
    assert_eq!(good.len(), 7 + 16 + 32);
    let mut bad = good.clone();
    bad[0] = b'X';
    assert!(ArrayFile::from_bytes(&bad).is_err());
    let mut bad = good.clone();
    bad[4] = 9;
    assert!(ArrayFile::from_bytes(&bad).is_err());
    let mut bad = good.clone();
    bad[5] = 3;
    assert!(ArrayFile::from_bytes(&bad).is_err());
    assert!(ArrayFile::from_bytes(&good[..good.len() - 1]).is_err());
    assert!(ArrayFile::from_bytes(&good[..10]).is_err());
    assert!(ArrayFile::real(vec![3], vec![1.0]).is_err());
}

#[test]
fn config_parsing() {
    let cfg = ExperimentConfig::from_toml(CONFIG).unwrap();
    assert_eq!(cfg.solver.iterations, 101);
    assert_eq!(cfg.init.percentile_keep, 0.8);
    assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);

    let rejected = [
        CONFIG.replace("n = 24", "n = 24\ncolour = 1"),
        CONFIG.replace("dy = 2\nseed = 3", "dy = 2"),
        CONFIG.replace("sigma_std = 0.0\nseed = 4", "sigma_std = 0.0"),
        CONFIG.replace("iterations = 101\nseed = 5", "iterations = 101"),
        CONFIG.replace("source = \"phantom\"", "source = \"file\""),
        CONFIG.replace("n = 24", "n = 4"),
        CONFIG.replace("sigma_std = 0.0", "sigma_std = -1.0"),
        CONFIG.replace("algorithm = \"ap\"", "algorithm = \"hio\""),
        CONFIG.replace("iterations = 101", "iterations = 101\nbeta = 1.5"),
    ];
    for text in rejected {
        assert!(ExperimentConfig::from_toml(&text).is_err(), "{text}");
    }
}

#[test]
fn lens_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let small = dir.path().join("small.ptyc");
    ptycho(&["lens", "--kind", "small", "--m", "128", "--out", s(&small)]);
    let arr = read_array(&small).unwrap();
    assert_eq!(arr.dims, vec![128, 128]);
    assert_eq!(std::fs::read(&small).unwrap()[5], 1);
    assert!(matches!(arr.data, ArrayData::Complex(_)));
    let expect = make_lens(&LensSpec::small(128, 0.1, 0.4)).unwrap();
    assert_eq!(arr.to_grid().unwrap(), expect);

    let (b1, b2) = (dir.path().join("b1.ptyc"), dir.path().join("b2.ptyc"));
    for p in [&b1, &b2] {
        ptycho(&["lens", "--kind", "blr", "--m", "32", "--iters", "30", "--seed", "9", "--out", s(p)]);
    }
    assert_eq!(std::fs::read(&b1).unwrap(), std::fs::read(&b2).unwrap());
    let spec = LensSpec::blr(32, 0.1, 0.4, 0.3 * 32.0, 30, 9);
    assert_eq!(read_array(&b1).unwrap().to_grid().unwrap(), make_lens(&spec).unwrap());
}

#[test]
fn simulate_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), CONFIG);
    let sim = dir.path().join("sim");
    let out = ptycho(&["simulate", "--config", s(&cfg_path), "--out", s(&sim)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("eps_sigma 0.000000e0"));
    let report = std::fs::read_to_string(sim.join("simulate_report.txt")).unwrap();
    assert!(report.contains("n = 24") && report.contains("eps_sigma = 0.00000000000000000e0"));

    let a = read_array(&sim.join("a.ptyc")).unwrap().to_measurements().unwrap();
    let psi0 = read_array(&sim.join("psi0.ptyc")).unwrap().to_grid().unwrap();
    let pos = read_array(&sim.join("positions.ptyc")).unwrap();
    let lens = read_array(&sim.join("lens.ptyc")).unwrap().to_grid().unwrap();
    assert_eq!(pos.dims, vec![a.frames(), 2]);
    assert_eq!((psi0.rows(), lens.rows(), a.side()), (24, 8, 8));
    let positions = pos.real_data().unwrap().chunks_exact(2).map(|p| Position::new(p[0], p[1])).collect();
    let model = ForwardModel::new(IlluminationScheme::new(positions, 8, 24).unwrap(), lens).unwrap();
    let again = model.forward_measure(&psi0).unwrap();
    let worst = again.as_slice().iter().zip(a.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-12);

    let res = dir.path().join("res");
    ptycho(&["solve", "--config", s(&cfg_path), "--input", s(&sim), "--out", s(&res)]);
    let csv = std::fs::read_to_string(res.join("trace.csv")).unwrap();
    assert!(csv.starts_with("# algorithm=ap init=tps\n"));
    assert!(!csv.contains("beta="));
    assert!(csv.contains("iter,eps_a,eps_fq,eps_afq,eps_0,eps_delta"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 102);
    assert!(rows.iter().all(|r| r.split(',').count() == 6 && !r.split(',').nth(4).unwrap().is_empty()));
    let psi_hat = read_array(&res.join("psi_hat.ptyc")).unwrap();
    assert_eq!(psi_hat.dims, vec![24, 24]);

    // without the true object the eps_0 column stays empty
    std::fs::remove_file(sim.join("psi0.ptyc")).unwrap();
    let raar = write_config(
        dir.path(),
        &CONFIG.replace("algorithm = \"ap\"", "algorithm = \"raar\"").replace("iterations = 101", "iterations = 5"),
    );
    ptycho(&["solve", "--config", s(&raar), "--input", s(&sim), "--out", s(&res)]);
    let csv = std::fs::read_to_string(res.join("trace.csv")).unwrap();
    assert!(csv.contains("# beta=0.9\n"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.split(',').nth(4) == Some("")));

    // images of the reconstruction
    let prefix = dir.path().join("img");
    ptycho(&["export", "--input", s(&res.join("psi_hat.ptyc")), "--prefix", s(&prefix)]);
    let pgm = std::fs::read(dir.path().join("img_mag.pgm")).unwrap();
    let ppm = std::fs::read(dir.path().join("img_phase.ppm")).unwrap();
    assert_eq!(read_pnm_header(&pgm).unwrap(), ("P5".to_string(), 24, 24));
    assert_eq!(read_pnm_header(&ppm).unwrap(), ("P6".to_string(), 24, 24));
    assert_eq!(pgm.len(), "P5\n24 24\n255\n".len() + 24 * 24);
    assert_eq!(ppm.len(), "P6\n24 24\n255\n".len() + 3 * 24 * 24);
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("n = 24", "n = 24\nbogus = true"));
    let out = Command::new(env!("CARGO_BIN_EXE_ptycho")).args(["simulate", "--config", s(&cfg)]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let missing = dir.path().join("none.ptyc");
    let out = Command::new(env!("CARGO_BIN_EXE_ptycho"))
        .args(["export", "--input", s(&missing), "--prefix", s(&dir.path().join("x"))])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn verify_subcommand_passes() {
    let out = ptycho(&["verify"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains(" 0 failed"), "{text}");
}

#[test]
fn image_examples() {
    let ones = ComplexGrid::constant(3, 5, C64::new(1.0, 0.0));
    let pgm = magnitude_pgm(&ones);
    assert!(pgm.starts_with(b"P5\n5 3\n255\n"));
    assert!(pgm[pgm.len() - 15..].iter().all(|&b| b == 255));
    let zeros = ComplexGrid::zeros(3, 5);
    let pgm = magnitude_pgm(&zeros);
    assert!(pgm[pgm.len() - 15..].iter().all(|&b| b == 0));
    let ppm = phase_ppm(&zeros);
    assert!(ppm.starts_with(b"P6\n5 3\n255\n") && ppm[ppm.len() - 45..].iter().all(|&b| b == 0));
    // phase 0 sits half way round the hue circle: cyan
    let ppm = phase_ppm(&ones);
    assert_eq!(&ppm[ppm.len() - 3..], &[0, 255, 255]);
    assert_eq!(read_pnm_header(&magnitude_pgm(&ComplexGrid::zeros(7, 2))).unwrap(), ("P5".into(), 2, 7));
}

#[test]
fn trace_csv_layout() {
    let mut t = ConvergenceTrace::new(1.0);
    t.push(MetricRow { iter: 0, eps_a: 0.5, eps_fq: 0.25, eps_afq: 0.125, eps_0: None, eps_delta: Some(1.0) });
    let csv = trace_csv(&t, &["x=1".into()]);
    assert_eq!(
        csv,
        "# x=1\niter,eps_a,eps_fq,eps_afq,eps_0,eps_delta\n0,5.00000000000000000e-1,2.50000000000000000e-1,1.25000000000000000e-1,,1.00000000000000000e0\n"
    );
}
