//! Persistence and experiment plumbing: the `PTYC` array format, TOML
//! experiment configs, CSV traces, PGM/PPM previews and the built-in phantom.

mod array;
mod config;
mod image;
mod pipeline;
mod trace;

pub use array::{read_array, write_array, write_atomic, ArrayData, ArrayFile};
pub use config::{
    ExperimentConfig, InitSection, NoiseSection, ObjectSection, ObjectSource, OutputSection, SchemeSection,
    SolverSection,
};
pub use image::{export_images, hsv_to_rgb, magnitude_pgm, phase_ppm, read_pnm_header};
pub use pipeline::{
    load_inputs, simulate, solve_and_write, write_simulation, Simulation, LENS, MEASUREMENTS, OBJECT, POSITIONS,
    RECONSTRUCTION, REPORT, TRACE,
};
pub use trace::{trace_csv, write_trace_csv};

use crate::grid::{ComplexGrid, C64};

/// Smooth complex test object: magnitude in `[0.6, 1]`, phase in `(-π, π]`,
/// both from sums of fixed Gaussian bumps.
pub fn phantom(n: usize) -> ComplexGrid {
    let bumps1 = [(0.3, 0.35, 0.12, 1.0), (0.65, 0.6, 0.18, -0.8), (0.45, 0.8, 0.08, 0.6)];
    let bumps2 = [(0.7, 0.25, 0.15, 1.0), (0.25, 0.7, 0.1, 0.7), (0.55, 0.5, 0.22, -0.5)];
    let field = |bumps: &[(f64, f64, f64, f64)], y: f64, x: f64| -> f64 {
        bumps.iter().map(|&(cy, cx, s, w)| w * (-((y - cy).powi(2) + (x - cx).powi(2)) / (2.0 * s * s)).exp()).sum()
    };
    let nf = n.max(1) as f64;
    ComplexGrid::from_fn(n, n, |r, c| {
        let (y, x) = (r as f64 / nf, c as f64 / nf);
        let g1 = field(&bumps1, y, x).tanh();
        let g2 = 0.5 * (1.0 + field(&bumps2, y, x).tanh());
        C64::from_polar(0.6 + 0.4 * g2, std::f64::consts::PI * 0.9 * g1)
    })
}
