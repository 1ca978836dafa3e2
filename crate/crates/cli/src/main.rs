//! `octacage`: sweeps, spectra and unit conversion for the caged-pair model.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use octacage_core::assembly::{static_electron_matrix, DynamicProblem, MatrixPair};
use octacage_core::observables::{
    collision_gap_ev, first_collision_level, level_error_estimate, uniform_z_grid, DensityEvaluator,
    SWEEP_LEVELS,
};
use octacage_core::{
    collision_table, molecule_sweep, solve, static_sweep, units_to_ev, CageConfig, Error,
    QuadratureMethod, SweepTable,
};

use output::{emit, manifest_path, num, opt, QuadratureTotals, RunManifest, Table};

/// Fraction of the largest collision density that marks a collision level.
const COLLISION_FRACTION: f64 = 0.2;

#[derive(Parser, Debug)]
#[command(name = "octacage", version, about = "Two positive charges in an octahedral cage")]
struct Cli {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Table destination; stdout when omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Levels and filling energies along the static separation grid.
    StaticSweep {
        /// Overrides `sweep.points`.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Two-electron energy of the isolated pair.
    Molecule {
        #[arg(long)]
        points: Option<usize>,
    },
    /// Dynamic spectrum with the collision density of every level.
    Dynamic {
        /// Matrix cache, reused when its config hash matches.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Projected separation densities of selected levels.
    Density {
        /// One-based level numbers, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
        #[arg(long, default_value_t = 96)]
        z_points: usize,
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Converts energy units to eV at the configured cage size.
    ConvertUnits {
        #[arg(long, allow_negative_numbers = true)]
        units: f64,
    },
    /// Ground level against softening and volume node count.
    Convergence,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::StaticSweep { .. } => "static-sweep",
            Command::Molecule { .. } => "molecule",
            Command::Dynamic { .. } => "dynamic",
            Command::Density { .. } => "density",
            Command::ConvertUnits { .. } => "convert-units",
            Command::Convergence => "convergence",
        }
    }
}

/// An error with its exit status.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            code: 4,
            message: format!("{}: {e}", path.display()),
        }
    }

    fn csv(e: impl std::fmt::Display) -> Self {
        Self {
            code: 4,
            message: format!("csv: {e}"),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } | Error::Serialization(_) => 4,
            e if e.is_numerical() => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

struct Outcome {
    table: Option<Table>,
    passes: usize,
    separation_nodes: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("octacage: error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<CageConfig, Failure> {
    Ok(match path {
        Some(p) => CageConfig::load(p)?,
        None => CageConfig::default_with_env(std::env::vars())?,
    })
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let start = Instant::now();
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    match &cli.command {
        Command::StaticSweep { points } | Command::Molecule { points } => {
            if let Some(p) = points {
                config.sweep.points = *p;
            }
            config.validate()?;
        }
        _ => {}
    }

    let outcome = match &cli.command {
        Command::StaticSweep { .. } => sweep_table(&config, false)?,
        Command::Molecule { .. } => sweep_table(&config, true)?,
        Command::Dynamic { cache } => dynamic(&config, cache.as_deref())?,
        Command::Density {
            levels,
            z_points,
            cache,
        } => density(&config, levels, *z_points, cache.as_deref())?,
        Command::ConvertUnits { units } => {
            let ev = units_to_ev(*units, config.a_angstrom)?;
            println!("{units} units = {ev:.1} eV (a = {} Å)", config.a_angstrom);
            Outcome {
                table: None,
                passes: 0,
                separation_nodes: 0,
            }
        }
        Command::Convergence => convergence(&config)?,
    };

    let Some(table) = outcome.table else {
        return Ok(());
    };
    let name = cli.command.name();
    emit(&table.render(name, &config)?, cli.output.as_deref())?;
    if let Some(out) = &cli.output {
        let nodes = match config.quadrature.method {
            QuadratureMethod::MonteCarlo => config.quadrature.points.div_ceil(48) * 48,
            QuadratureMethod::ProductGauss => 8 * config.quadrature.points.pow(3),
        };
        RunManifest {
            config_hash: config.hash(),
            subcommand: name.into(),
            config_path: cli.config.clone(),
            outputs: vec![out.clone()],
            wall_time_s: start.elapsed().as_secs_f64(),
            quadrature: QuadratureTotals {
                volume_nodes_per_pass: nodes,
                volume_passes: outcome.passes,
                separation_nodes: outcome.separation_nodes,
            },
        }
        .write(&manifest_path(out))?;
    }
    Ok(())
}

fn sweep_table(config: &CageConfig, molecule: bool) -> Result<Outcome, Failure> {
    let grid = config.sweep.grid();
    let sweep: SweepTable = if molecule {
        molecule_sweep(&grid, config)?
    } else {
        static_sweep(&grid, config)?
    };
    let levels = if molecule { 2 } else { SWEEP_LEVELS };
    let mut header = vec!["l".to_string()];
    header.extend((1..=levels).map(|i| format!("lambda_{i}")));
    header.extend(["H0", "E1", "E2"].map(String::from));
    if !molecule {
        header.push("E16".into());
    }
    let mut table = Table::new(header);
    for r in &sweep.rows {
        let mut row = vec![num(r.l)];
        row.extend((0..levels).map(|i| opt(r.lambdas.get(i).copied())));
        row.extend([num(r.h0), num(r.e1), num(r.e2)]);
        if !molecule {
            row.push(opt(r.e16));
        }
        table.push(row);
    }
    for (label, pick) in [("E1", 0), ("E2", 1), ("E16", 2)] {
        if molecule && pick != 1 {
            continue;
        }
        let l = sweep.argmin(|r| match pick {
            0 => Some(r.e1),
            1 => Some(r.e2),
            _ => r.e16,
        });
        table.notes.push(format!("argmin_{label} = {}", opt(l)));
    }
    let passes = match (molecule, config.molecule.domain) {
        (true, octacage_core::MoleculeDomain::Free) => 0,
        _ => grid.len(),
    };
    Ok(Outcome {
        table: Some(table),
        passes,
        separation_nodes: 0,
    })
}

/// Loads the cached matrices when their hash matches, else assembles and
/// refreshes the cache.
fn dynamic_pair(
    problem: &DynamicProblem,
    config: &CageConfig,
    cache: Option<&Path>,
) -> Result<(MatrixPair, usize), Failure> {
    let hash = config.hash();
    if let Some(path) = cache.filter(|p| p.exists()) {
        let pair = MatrixPair::load(path)?;
        if pair.config_hash == hash {
            return Ok((pair, 0));
        }
    }
    let pair = problem.matrix()?;
    if let Some(path) = cache {
        pair.save(path)?;
    }
    Ok((pair, problem.z_rule.nodes.len()))
}

fn dynamic(config: &CageConfig, cache: Option<&Path>) -> Result<Outcome, Failure> {
    let problem = DynamicProblem::new(config)?;
    let (pair, passes) = dynamic_pair(&problem, config, cache)?;
    let spectrum = solve(&pair, config.overlap_threshold)?;
    let rows = collision_table(&problem, &spectrum)?;
    let mut table = Table::new(["k", "lambda", "psi0_sq"]);
    for r in &rows {
        table.push(vec![r.k.to_string(), num(r.lambda), num(r.psi0_sq)]);
    }
    table.notes.push(format!("retained = {} of {}", spectrum.retained, spectrum.dim()));
    if let Some(first) = first_collision_level(&rows, COLLISION_FRACTION) {
        table.notes.push(format!(
            "first_collision_level = {} (psi0_sq >= {COLLISION_FRACTION} of max)",
            first.k
        ));
    }
    if let Some(gap) = collision_gap_ev(&rows, COLLISION_FRACTION, config.energy_unit_ev()) {
        table.notes.push(format!("collision_gap_ev = {gap:.3}"));
    }
    Ok(Outcome {
        table: Some(table),
        passes: passes + 1,
        separation_nodes: problem.z_rule.nodes.len(),
    })
}

fn density(
    config: &CageConfig,
    levels: &[usize],
    z_points: usize,
    cache: Option<&Path>,
) -> Result<Outcome, Failure> {
    if levels.contains(&0) {
        return Err(Failure::usage("levels are numbered from 1"));
    }
    if z_points < 2 {
        return Err(Failure::usage("--z-points must be at least 2"));
    }
    let problem = DynamicProblem::new(config)?;
    let (pair, passes) = dynamic_pair(&problem, config, cache)?;
    let spectrum = solve(&pair, config.overlap_threshold)?;
    let grid = uniform_z_grid(config.z_max, z_points);
    let zero_based: Vec<usize> = levels.iter().map(|k| k - 1).collect();
    let densities = DensityEvaluator::new(&problem, &spectrum)?.densities(&zero_based, &grid)?;
    let mut header = vec!["z".to_string()];
    header.extend(levels.iter().map(|k| format!("density_{k}")));
    let mut table = Table::new(header);
    for (i, z) in grid.iter().enumerate() {
        let mut row = vec![num(*z)];
        row.extend(densities.iter().map(|d| num(d.values[i])));
        table.push(row);
    }
    for k in levels {
        table.notes.push(format!("lambda_{k} = {}", num(spectrum.eigenvalues[k - 1])));
    }
    Ok(Outcome {
        table: Some(table),
        passes: passes + grid.len(),
        separation_nodes: problem.z_rule.nodes.len(),
    })
}

fn convergence(config: &CageConfig) -> Result<Outcome, Failure> {
    let l = config.convergence.l;
    let mut table = Table::new(["sweep", "value", "lambda_1", "error_estimate"]);
    let mut passes = 0;
    let mut probe = |c: &CageConfig, kind: &str, value: String| -> Result<(), Failure> {
        let pair = static_electron_matrix(l, c)?;
        let spectrum = solve(&pair, c.overlap_threshold)?;
        let err = level_error_estimate(&pair, &spectrum, 0)?;
        table.push(vec![kind.into(), value, num(spectrum.eigenvalues[0]), num(err)]);
        passes += 1;
        Ok(())
    };
    for &delta in &config.convergence.deltas {
        let mut c = config.clone();
        c.quadrature.delta = delta;
        probe(&c, "delta", num(delta))?;
    }
    for &points in &config.convergence.points {
        let mut c = config.clone();
        c.quadrature.points = points;
        probe(&c, "points", points.to_string())?;
    }
    table.notes.push(format!("l = {}", num(l)));
    Ok(Outcome {
        table: Some(table),
        passes,
        separation_nodes: 0,
    })
}
