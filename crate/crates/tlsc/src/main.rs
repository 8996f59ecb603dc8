use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tlsc::config::{default_coarse_degree, default_coarse_sub, ExperimentConfig, LevelPair};
use tlsc::exec::RayonExecutor;
use tlsc::experiment::{self, Levels, Measurement, Setup};
use tlsc::formats::{self, WorkLine};
use tlsc::AppError;
use tlsc_core::random_field::{compute_kl, verify_coercivity, CovarianceKernel};
use tlsc_core::{Mesh, TensorGrid};

/// Two-level stochastic collocation experiments.
#[derive(Parser)]
#[command(name = "tlsc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// `key = value` experiment file; built-in defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Use the large meshes and degrees instead of the desk-sized defaults.
    #[arg(long)]
    full_scale: bool,
    /// Worker threads for collocation points; 0 picks the machine default.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Accepted for interface stability; every run is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method once and write results.csv and work.txt.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also write the fine mesh to mesh.txt.
        #[arg(long)]
        dump_mesh: bool,
    },
    /// Spatial convergence study over the h ladder; adds slope.txt.
    ConvergeH {
        #[command(flatten)]
        common: Common,
    },
    /// Collocation-degree study over the p ladder; adds slope.txt.
    ConvergeP {
        #[command(flatten)]
        common: Common,
    },
    /// Coarse, direct and two-level errors side by side in table.txt.
    Table {
        #[command(flatten)]
        common: Common,
    },
    /// Leading KL eigenvalues of the configured kernel in kl_spectrum.csv.
    KlSpectrum {
        #[command(flatten)]
        common: Common,
        /// Number of eigenvalues to report.
        #[arg(long, default_value_t = 20)]
        modes: usize,
    },
}

struct Session {
    cfg: ExperimentConfig,
    from_file: bool,
    full_scale: bool,
    out: PathBuf,
    exec: RayonExecutor,
}

impl Session {
    fn open(c: &Common) -> Result<Self, AppError> {
        let (cfg, from_file) = match &c.config {
            Some(p) => (ExperimentConfig::load(p)?, true),
            None => (ExperimentConfig::default(), false),
        };
        let out = c.output.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
        experiment::ensure_dir(&out)?;
        let exec = RayonExecutor::new(c.threads)?;
        if c.seed.is_some() {
            log::debug!("--seed ignored: no step of the computation is random");
        }
        log::info!("{} threads, output in {}", exec.threads(), out.display());
        Ok(Session { cfg, from_file, full_scale: c.full_scale, out, exec })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn setup(&self) -> Result<Setup, AppError> {
        experiment::build_problem(&self.cfg)
    }

    fn run(&self, setup: &Setup, level_sets: &[Levels]) -> Result<Vec<Measurement>, AppError> {
        let finest = level_sets.iter().map(|l| l.fine_sub).max().unwrap_or(self.cfg.fine_sub);
        let max_degree = level_sets.iter().map(|l| l.fine_degree).max().unwrap_or(self.cfg.fine_degree);
        let reference = experiment::resolve_reference(&self.cfg, setup, finest, max_degree, &self.exec)?;
        experiment::run_all(&self.cfg, setup, &reference, level_sets, &self.exec)
    }

    fn write_common(&self, setup: &Setup, level_sets: &[Levels], ms: &[Measurement]) -> Result<(), AppError> {
        let path = self.path("results.csv");
        formats::write_results(&path, &experiment::result_rows(&self.cfg, ms))?;
        let mut notes = setup.notes.clone();
        notes.push(coercivity_note(setup, level_sets)?);
        let lines: Vec<WorkLine> = ms.iter().flat_map(Measurement::work_lines).collect();
        let wpath = self.path("work.txt");
        formats::write_work(&wpath, &lines, &notes).map_err(|source| AppError::Io { path: wpath, source })?;
        Ok(())
    }
}

/// Smallest coefficient value over the finest collocation grid and mesh vertices.
fn coercivity_note(setup: &Setup, level_sets: &[Levels]) -> Result<String, AppError> {
    let finest = level_sets.iter().map(|l| l.fine_sub).max().unwrap_or(1);
    let degree = level_sets.iter().map(|l| l.fine_degree).max().unwrap_or(0);
    let grid = TensorGrid::isotropic(setup.problem.dims(), degree)?;
    let mesh = Mesh::uniform(setup.problem.domain, finest)?;
    let a_min = verify_coercivity(&setup.problem.coefficient, grid.points(), mesh.vertices())?;
    Ok(format!("min a(y, x) over {} collocation points and {} vertices: {a_min:.6e}", grid.len(), mesh.num_vertices()))
}

fn desk_h_ladder() -> Vec<LevelPair> {
    [8, 16, 32, 64].into_iter().map(|h| (default_coarse_sub(h), h)).collect()
}

fn full_h_ladder() -> Vec<LevelPair> {
    vec![(4, 8), (8, 32), (16, 128), (32, 512)]
}

fn desk_p_ladder() -> Vec<LevelPair> {
    (1..=6).map(|p| (default_coarse_degree(p), p)).collect()
}

fn full_p_ladder() -> Vec<LevelPair> {
    vec![(1, 2), (2, 4), (3, 6), (4, 8)]
}

fn write_slopes(s: &Session, lines: &[formats::SlopeLine]) -> Result<(), AppError> {
    let path = s.path("slope.txt");
    formats::write_slopes(&path, lines).map_err(|source| AppError::Io { path, source })
}

fn solve(s: &Session, dump_mesh: bool) -> Result<(), AppError> {
    let setup = s.setup()?;
    let levels = [Levels::from_config(&s.cfg)];
    let ms = s.run(&setup, &levels)?;
    s.write_common(&setup, &levels, &ms)?;
    if dump_mesh {
        let path = s.path("mesh.txt");
        let mesh = Mesh::uniform(setup.problem.domain, s.cfg.fine_sub)?;
        let write = || -> std::io::Result<()> {
            let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
            formats::write_mesh(&mut f, &mesh)
        };
        write().map_err(|source| AppError::Io { path: path.clone(), source })?;
    }
    Ok(())
}

fn converge_h(s: &mut Session) -> Result<(), AppError> {
    let ladder = match (&s.cfg.h_ladder, s.full_scale) {
        (Some(l), _) => l.clone(),
        (None, false) => desk_h_ladder(),
        (None, true) => {
            if !s.from_file {
                (s.cfg.coarse_degree, s.cfg.fine_degree) = (4, 8);
            }
            full_h_ladder()
        }
    };
    let setup = s.setup()?;
    let levels = experiment::h_level_sets(&s.cfg, &ladder);
    let ms = s.run(&setup, &levels)?;
    s.write_common(&setup, &levels, &ms)?;
    write_slopes(s, &experiment::h_slopes(&s.cfg, &ms))
}

fn converge_p(s: &mut Session) -> Result<(), AppError> {
    let ladder = match (&s.cfg.p_ladder, s.full_scale) {
        (Some(l), _) => l.clone(),
        (None, false) => {
            if !s.from_file {
                s.cfg.fine_sub = 64;
                s.cfg.coarse_sub = default_coarse_sub(64);
            }
            desk_p_ladder()
        }
        (None, true) => {
            if !s.from_file {
                (s.cfg.coarse_sub, s.cfg.fine_sub) = (64, 2048);
            }
            full_p_ladder()
        }
    };
    let setup = s.setup()?;
    let levels = experiment::p_level_sets(&s.cfg, &ladder);
    let ms = s.run(&setup, &levels)?;
    s.write_common(&setup, &levels, &ms)?;
    write_slopes(s, &experiment::p_slopes(&s.cfg, &ms))
}

fn table(s: &mut Session) -> Result<(), AppError> {
    if s.full_scale && !s.from_file {
        (s.cfg.coarse_sub, s.cfg.fine_sub, s.cfg.coarse_degree, s.cfg.fine_degree) = (8, 512, 4, 8);
    }
    let setup = s.setup()?;
    let levels = [Levels::from_config(&s.cfg)];
    let ms = s.run(&setup, &levels)?;
    s.write_common(&setup, &levels, &ms)?;
    let path = s.path("table.txt");
    std::fs::write(&path, experiment::format_table(&ms)).map_err(|source| AppError::Io { path, source })
}

fn kl_spectrum(s: &Session, modes: usize) -> Result<(), AppError> {
    let kl = &s.cfg.kl;
    let kernel = CovarianceKernel::Exponential { sigma: kl.sigma, correlation_length: kl.correlation_length };
    let expansion = compute_kl(&kernel, tlsc_core::Rect::reference_square(), kl.kl_n, modes)?;
    let path = s.path("kl_spectrum.csv");
    formats::write_kl_spectrum(&path, expansion.eigenvalues())?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Solve { common, dump_mesh } => solve(&Session::open(&common)?, dump_mesh),
        Command::ConvergeH { common } => converge_h(&mut Session::open(&common)?),
        Command::ConvergeP { common } => converge_p(&mut Session::open(&common)?),
        Command::Table { common } => table(&mut Session::open(&common)?),
        Command::KlSpectrum { common, modes } => kl_spectrum(&Session::open(&common)?, modes),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
