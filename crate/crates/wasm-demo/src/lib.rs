//! wasm-bindgen front end for the static page in `www/`.
//!
//! The plain functions do the work and are what the native tests call; the
//! `#[wasm_bindgen]` wrappers only turn errors into JS exceptions.

use ptycho::lens::{make_blr_lens, make_small_lens, LensSpec};
use ptycho::solvers::{self, Algorithm, InitMethod, SolverConfig};
use ptycho::{build_scheme, ComplexGrid, ForwardModel, RasterSpec};
use wasm_bindgen::prelude::*;

/// Row-major magnitude and phase planes of a square complex image.
#[wasm_bindgen]
#[derive(Clone, Debug)]
pub struct ImagePlanes {
    side: usize,
    magnitude: Vec<f64>,
    phase: Vec<f64>,
}

#[wasm_bindgen]
impl ImagePlanes {
    #[wasm_bindgen(getter)]
    pub fn side(&self) -> usize {
        self.side
    }

    #[wasm_bindgen(getter)]
    pub fn magnitude(&self) -> Vec<f64> {
        self.magnitude.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn phase(&self) -> Vec<f64> {
        self.phase.clone()
    }
}

impl ImagePlanes {
    fn of(g: &ComplexGrid) -> Self {
        Self {
            side: g.rows(),
            magnitude: g.as_slice().iter().map(|z| z.norm()).collect(),
            phase: g.as_slice().iter().map(|z| z.arg()).collect(),
        }
    }
}

#[wasm_bindgen]
#[derive(Clone, Debug)]
pub struct LensView {
    planes: ImagePlanes,
    /// Fraction of energy outside the focus disk; NaN for the small lens.
    leakage: f64,
}

#[wasm_bindgen]
impl LensView {
    #[wasm_bindgen(getter)]
    pub fn planes(&self) -> ImagePlanes {
        self.planes.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn leakage(&self) -> f64 {
        self.leakage
    }
}

pub fn design_lens(
    blr: bool,
    m: usize,
    r_inner: f64,
    r_outer: f64,
    focus_radius: f64,
    iters: usize,
    seed: u64,
) -> ptycho::Result<LensView> {
    if blr {
        let (w, report) = make_blr_lens(&LensSpec::blr(m, r_inner, r_outer, focus_radius, iters, seed))?;
        Ok(LensView { planes: ImagePlanes::of(&w), leakage: report.energy_outside_focus })
    } else {
        let w = make_small_lens(&LensSpec::small(m, r_inner, r_outer))?;
        Ok(LensView { planes: ImagePlanes::of(&w), leakage: f64::NAN })
    }
}

/// Scan anchors as a flat `[row0, col0, row1, col1, ...]` list.
pub fn scan_positions(n: usize, m: usize, step: f64, jitter: f64, shear: bool, seed: u64) -> ptycho::Result<Vec<f64>> {
    let scheme = build_scheme(&RasterSpec { n, m, dx: step, dy: step, jitter, shear, seed })?;
    Ok(scheme.positions().iter().flat_map(|p| [p.row, p.col]).collect())
}

#[wasm_bindgen]
#[derive(Clone, Debug)]
pub struct Reconstruction {
    eps_a: Vec<f64>,
    eps_0: Vec<f64>,
    object: ImagePlanes,
    truth: ImagePlanes,
}

#[wasm_bindgen]
impl Reconstruction {
    /// Amplitude residual per iterate.
    #[wasm_bindgen(getter)]
    pub fn eps_a(&self) -> Vec<f64> {
        self.eps_a.clone()
    }

    /// Distance to the true frames per iterate, up to global phase.
    #[wasm_bindgen(getter)]
    pub fn eps_0(&self) -> Vec<f64> {
        self.eps_0.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn object(&self) -> ImagePlanes {
        self.object.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn truth(&self) -> ImagePlanes {
        self.truth.clone()
    }
}

fn algorithm(name: &str) -> ptycho::Result<Algorithm> {
    Ok(match name {
        "ap" => Algorithm::Ap,
        "raar" => Algorithm::Raar,
        "synchro-raar" => Algorithm::SynchroRaar,
        "synchro-cg" => Algorithm::SynchroCg,
        other => return Err(ptycho::Error::InvalidParameter(format!("unknown algorithm {other:?}"))),
    })
}

fn init(name: &str) -> ptycho::Result<InitMethod> {
    Ok(match name {
        "random" => InitMethod::Random,
        "tps" => InitMethod::Tps,
        "gcl" => InitMethod::Gcl,
        other => return Err(ptycho::Error::InvalidParameter(format!("unknown initializer {other:?}"))),
    })
}

/// Simulates the phantom under a BLR lens on a raster scan and reconstructs it.
pub fn reconstruct(
    n: usize,
    m: usize,
    step: f64,
    algorithm_name: &str,
    init_name: &str,
    iterations: usize,
    seed: u64,
) -> ptycho::Result<Reconstruction> {
    let lens = make_blr_lens(&LensSpec::desk(m, seed))?.0;
    let scheme = build_scheme(&RasterSpec { n, m, dx: step, dy: step, jitter: 0.0, shear: false, seed })?;
    let model = ForwardModel::new(scheme, lens)?;
    let psi0 = ptycho::io::phantom(n);
    let a = model.forward_measure(&psi0)?;
    let cfg = SolverConfig {
        algorithm: algorithm(algorithm_name)?,
        init: init(init_name)?,
        iterations,
        seed,
        ..SolverConfig::default()
    };
    let out = solvers::run(&cfg, &model, &a, Some(&psi0))?;
    // rotate the estimate onto the truth so the phase images are comparable
    let (t, _) = ptycho::metrics::global_phase_align(psi0.as_slice(), out.psi.as_slice());
    let mut psi = out.psi;
    psi.scale(ptycho::C64::from_polar(1.0, t));
    Ok(Reconstruction {
        eps_a: out.trace.rows.iter().map(|r| r.eps_a).collect(),
        eps_0: out.trace.rows.iter().map(|r| r.eps_0.unwrap_or(f64::NAN)).collect(),
        object: ImagePlanes::of(&psi),
        truth: ImagePlanes::of(&psi0),
    })
}

fn js(e: ptycho::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = designLens)]
pub fn design_lens_js(
    blr: bool,
    m: usize,
    r_inner: f64,
    r_outer: f64,
    focus_radius: f64,
    iters: usize,
    seed: u32,
) -> Result<LensView, JsError> {
    design_lens(blr, m, r_inner, r_outer, focus_radius, iters, seed.into()).map_err(js)
}

#[wasm_bindgen(js_name = scanPositions)]
pub fn scan_positions_js(n: usize, m: usize, step: f64, jitter: f64, shear: bool, seed: u32) -> Result<Vec<f64>, JsError> {
    scan_positions(n, m, step, jitter, shear, seed.into()).map_err(js)
}

#[wasm_bindgen(js_name = reconstruct)]
pub fn reconstruct_js(
    n: usize,
    m: usize,
    step: f64,
    algorithm: &str,
    init: &str,
    iterations: usize,
    seed: u32,
) -> Result<Reconstruction, JsError> {
    reconstruct(n, m, step, algorithm, init, iterations, seed.into()).map_err(js)
}
