use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::forward::{add_noise, ForwardModel};
use crate::grid::{ComplexGrid, MeasurementStack};
use crate::lens::make_lens;
use crate::scheme::{build_scheme, IlluminationScheme, Position};
use crate::solvers::{self, Algorithm, RunOutput};

use super::{read_array, write_array, write_atomic, write_trace_csv, ArrayFile, ExperimentConfig, ObjectSource};

pub const MEASUREMENTS: &str = "a.ptyc";
pub const OBJECT: &str = "psi0.ptyc";
pub const POSITIONS: &str = "positions.ptyc";
pub const LENS: &str = "lens.ptyc";
pub const RECONSTRUCTION: &str = "psi_hat.ptyc";
pub const TRACE: &str = "trace.csv";
pub const REPORT: &str = "simulate_report.txt";

pub struct Simulation {
    pub model: ForwardModel,
    pub psi0: ComplexGrid,
    pub a: MeasurementStack,
    pub eps_sigma: f64,
}

/// Builds the scheme, lens and object of `cfg` and measures (with noise).
pub fn simulate(cfg: &ExperimentConfig) -> Result<Simulation> {
    let scheme = build_scheme(&cfg.raster())?;
    let lens = make_lens(&cfg.lens)?;
    let psi0 = match cfg.object.source {
        ObjectSource::Phantom => super::phantom(cfg.object.n),
        ObjectSource::File => {
            let path = cfg.object.path.as_ref().expect("validated");
            let g = read_array(path)?.to_grid()?;
            if g.rows() != cfg.object.n || g.cols() != cfg.object.n {
                return Err(Error::Config(format!("object file is {}x{}, config says n = {}", g.rows(), g.cols(), cfg.object.n)));
            }
            g
        }
    };
    let model = ForwardModel::new(scheme, lens)?;
    let clean = model.forward_measure(&psi0)?;
    let (a, eps_sigma) = add_noise(&clean, &cfg.noise_spec())?;
    Ok(Simulation { model, psi0, a, eps_sigma })
}

fn positions_array(scheme: &IlluminationScheme) -> Result<ArrayFile> {
    let data = scheme.positions().iter().flat_map(|p| [p.row, p.col]).collect();
    ArrayFile::real(vec![scheme.len(), 2], data)
}

pub fn write_simulation(dir: &Path, sim: &Simulation) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let files = [
        (MEASUREMENTS, ArrayFile::from_measurements(&sim.a)),
        (OBJECT, ArrayFile::from_grid(&sim.psi0)),
        (POSITIONS, positions_array(sim.model.scheme())?),
        (LENS, ArrayFile::from_grid(sim.model.omega())),
    ];
    let mut out = Vec::new();
    for (name, arr) in files {
        let p = dir.join(name);
        write_array(&p, &arr)?;
        out.push(p);
    }
    let report = format!(
        "n = {}\nm = {}\nframes = {}\neps_sigma = {:.17e}\n",
        sim.model.object(),
        sim.model.window(),
        sim.model.frames(),
        sim.eps_sigma
    );
    let p = dir.join(REPORT);
    write_atomic(&p, report.as_bytes())?;
    out.push(p);
    Ok(out)
}

/// Reads measurements, positions, lens and (if present) the true object
/// from `dir`, checking them against `cfg`.
pub fn load_inputs(dir: &Path, cfg: &ExperimentConfig) -> Result<(ForwardModel, MeasurementStack, Option<ComplexGrid>)> {
    let a = read_array(&dir.join(MEASUREMENTS))?.to_measurements()?;
    let pos = read_array(&dir.join(POSITIONS))?;
    let lens = read_array(&dir.join(LENS))?.to_grid()?;
    let (n, m) = (cfg.object.n, cfg.lens.m);
    let coords = pos.real_data()?;
    if pos.dims.len() != 2 || pos.dims[1] != 2 {
        return Err(Error::Format(format!("positions must be [K, 2], got {:?}", pos.dims)));
    }
    let k = pos.dims[0];
    if a.frames() != k || a.side() != m || lens.rows() != m || lens.cols() != m {
        return Err(Error::Config(format!(
            "inconsistent inputs: {} frames of side {} and lens {}x{} vs {k} positions and m = {m}",
            a.frames(),
            a.side(),
            lens.rows(),
            lens.cols()
        )));
    }
    let positions = coords.chunks_exact(2).map(|p| Position::new(p[0], p[1])).collect();
    let scheme = IlluminationScheme::new(positions, m, n)?;
    let model = ForwardModel::new(scheme, lens)?;
    let psi_path = dir.join(OBJECT);
    let psi0 = if psi_path.exists() {
        let g = read_array(&psi_path)?.to_grid()?;
        (g.rows() == n && g.cols() == n).then_some(g)
    } else {
        None
    };
    Ok((model, a, psi0))
}

/// The spelling a value has in a config file.
fn config_name<T: serde::Serialize>(v: &T) -> String {
    match toml::Value::try_from(v) {
        Ok(toml::Value::String(s)) => s,
        _ => String::new(),
    }
}

/// Runs the configured solver on the inputs in `input` and writes the
/// reconstruction and trace into `output`.
pub fn solve_and_write(cfg: &ExperimentConfig, input: &Path, output: &Path) -> Result<RunOutput> {
    let (model, a, psi0) = load_inputs(input, cfg)?;
    let scfg = cfg.solver_config();
    let run = solvers::run(&scfg, &model, &a, psi0.as_ref())?;
    fs::create_dir_all(output)?;
    write_array(&output.join(RECONSTRUCTION), &ArrayFile::from_grid(&run.psi))?;
    let mut comments = vec![format!("algorithm={} init={}", config_name(&scfg.algorithm), config_name(&scfg.init))];
    if matches!(scfg.algorithm, Algorithm::Raar | Algorithm::SynchroRaar) {
        comments.push(format!("beta={}", scfg.beta));
    }
    write_trace_csv(&output.join(TRACE), &run.trace, &comments)?;
    Ok(run)
}
