use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ptycho::io::{self, ArrayFile, ExperimentConfig};
use ptycho::lens::{make_blr_lens, make_small_lens, LensSpec};

#[derive(Parser)]
#[command(name = "ptycho", version, about = "Ptychographic phase retrieval experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Small,
    Blr,
}

#[derive(Subcommand)]
enum Command {
    /// Design a lens and write it as a PTYC array.
    Lens {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0.4)]
        r_outer: f64,
        #[arg(long, default_value_t = 0.1)]
        r_inner: f64,
        /// Focus radius in pixels (blr); defaults to 0.3 m.
        #[arg(long)]
        focus_radius: Option<f64>,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "lens.ptyc")]
        out: PathBuf,
    },
    /// Simulate measurements from an experiment config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides output.directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct from simulated inputs; writes psi_hat.ptyc and trace.csv.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Directory with a.ptyc, positions.ptyc, lens.ptyc (default: output.directory).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in property suite.
    Verify,
    /// Write magnitude (PGM) and phase (PPM) previews of a complex array.
    Export {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        prefix: PathBuf,
    },
}

fn run(cli: Cli) -> ptycho::Result<bool> {
    match cli.cmd {
        Command::Lens { kind, m, r_outer, r_inner, focus_radius, iters, seed, out } => {
            let lens = match kind {
                Kind::Small => make_small_lens(&LensSpec::small(m, r_inner, r_outer))?,
                Kind::Blr => {
                    let spec =
                        LensSpec::blr(m, r_inner, r_outer, focus_radius.unwrap_or(0.3 * m as f64), iters, seed);
                    let (lens, report) = make_blr_lens(&spec)?;
                    println!("{report}");
                    lens
                }
            };
            io::write_array(&out, &ArrayFile::from_grid(&lens))?;
            println!("wrote {}", out.display());
        }
        Command::Simulate { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.directory.clone());
            let sim = io::simulate(&cfg)?;
            for p in io::write_simulation(&dir, &sim)? {
                println!("wrote {}", p.display());
            }
            println!("frames {}, eps_sigma {:.6e}", sim.model.frames(), sim.eps_sigma);
        }
        Command::Solve { config, input, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let input = input.unwrap_or_else(|| cfg.output.directory.clone());
            let out = out.unwrap_or_else(|| input.clone());
            let run = io::solve_and_write(&cfg, &input, &out)?;
            if let Some(last) = run.trace.last() {
                let eps0 = last.eps_0.map(|e| format!("{e:.4e}")).unwrap_or_else(|| "-".into());
                println!("{} iterations, eps_a {:.4e}, eps_0 {eps0}", last.iter, last.eps_a);
            }
            println!("wrote {}", out.display());
        }
        Command::Verify => {
            let checks = ptycho::verify::run_suite()?;
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            println!("{} properties, {failed} failed", checks.len());
            return Ok(failed == 0);
        }
        Command::Export { input, prefix } => {
            let psi = io::read_array(&input)?.to_grid()?;
            let (pgm, ppm) = io::export_images(&psi, &prefix)?;
            println!("wrote {} and {}", pgm.display(), ppm.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
