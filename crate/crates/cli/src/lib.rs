//! Command-line front end: configuration files, the five subcommands and
//! CSV emission.

pub mod config;
pub mod output;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use dheom_core::hierarchy::{self, DepthMode, SolverConfig};
use dheom_core::montecarlo;
use dheom_core::rydberg::{self, Method, NoiseKind};
use dheom_core::validation;

use config::{ConfigError, RunConfig};
use output::{matrix_cells, matrix_columns, num, RunManifest, Table};

/// Exit code for a validation or runtime failure.
pub const EXIT_FAILURE: i32 = 1;
/// Exit code for an invalid command line or configuration.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "dheom",
    version,
    about = "Averaged dynamics of quantum systems driven by diffusive noise",
    after_help = config::SCHEMA_HELP
)]
pub struct Cli {
    /// Worker threads (default: available parallelism). Results do not
    /// depend on this value.
    #[arg(long, global = true, env = "DHEOM_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV path (default: standard output).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Random seed, overriding `[montecarlo] seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hierarchy depth, `auto` or a positive integer.
    #[arg(long, value_parser = parse_depth_arg)]
    pub depth: Option<DepthMode>,
    /// Accept square-root noise with gamma <= 1.
    #[arg(long)]
    pub allow_unsound_truncation: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the density-matrix hierarchy: columns t, rho_i_j_re, rho_i_j_im.
    Simulate(Common),
    /// Integrate the averaged dynamical map: columns t, e_i_j_re, e_i_j_im.
    Propagator(Common),
    /// Monte Carlo average: columns t, rho_i_j_*, se_i_j_*.
    Montecarlo(Common),
    /// Rydberg transfer population versus detuning: columns delta, population[, se].
    RydbergSweep {
        #[command(flatten)]
        common: Common,
        /// dheom, mc or coherent.
        #[arg(long, default_value = "dheom", value_parser = ["dheom", "mc", "coherent"])]
        method: String,
        /// none, ou, sr or jacobi with the default sweep parameters
        /// (default: the [noise] section, or none).
        #[arg(long, value_parser = ["none", "ou", "sr", "jacobi"])]
        noise: Option<String>,
    },
    /// Hierarchy versus Monte Carlo on seeded random two-level problems.
    Validate {
        #[command(flatten)]
        common: Common,
        /// ou, sr, jacobi or all.
        #[arg(long, default_value = "all", value_parser = ["ou", "sr", "jacobi", "all"])]
        process: String,
        /// Random problems per process.
        #[arg(long, default_value_t = 5)]
        problems: usize,
        /// Monte Carlo trajectories per problem.
        #[arg(long, default_value_t = validation::DEFAULT_TRAJECTORIES)]
        trajectories: usize,
    },
}

fn parse_depth_arg(s: &str) -> Result<DepthMode, String> {
    config::parse_depth(s)
        .ok_or_else(|| format!("expected `auto` or a positive integer, got `{s}`"))
}

/// A failed run: exit code, machine-readable code and message.
#[derive(Debug)]
pub struct Failure {
    pub exit: i32,
    pub code: String,
    pub message: String,
    /// Output still worth emitting, such as a failed validation report.
    pub report: Option<String>,
}

impl Failure {
    fn config(code: &str, message: impl ToString) -> Self {
        Self {
            exit: EXIT_CONFIG,
            code: code.to_string(),
            message: message.to_string(),
            report: None,
        }
    }

    fn runtime(code: &str, message: impl ToString) -> Self {
        Self {
            exit: EXIT_FAILURE,
            code: code.to_string(),
            message: message.to_string(),
            report: None,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::config(e.code(), e)
    }
}

/// Runs the command line and returns the process exit code. Results go
/// to `--output` or `stdout`; diagnostics and errors go to `stderr`, the
/// last error line being `ERROR <code>: <message>`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let _ = write!(stderr, "{e}");
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ")
                .to_string();
            let _ = writeln!(stderr, "ERROR UsageError: {first}");
            return EXIT_CONFIG;
        }
    };
    if let Some(threads) = cli.threads {
        // a global pool can only be installed once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    let emit = |text: &str, path: Option<&PathBuf>, stdout: &mut dyn Write| match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display()))
        }
        None => stdout.write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    let path = cli.command.common().output.as_ref();
    let (result, exit) = match execute(&cli.command, stderr) {
        Ok(text) => (emit(&text, path, stdout), 0),
        Err(f) => {
            let written = f
                .report
                .as_deref()
                .map_or(Ok(()), |r| emit(r, path, stdout));
            let _ = writeln!(stderr, "ERROR {}: {}", f.code, f.message);
            return if written.is_ok() {
                f.exit
            } else {
                EXIT_FAILURE
            };
        }
    };
    match result {
        Ok(()) => exit,
        Err(message) => {
            let _ = writeln!(stderr, "ERROR IoError: {message}");
            EXIT_FAILURE
        }
    }
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Self::Simulate(c) | Self::Propagator(c) | Self::Montecarlo(c) => c,
            Self::RydbergSweep { common, .. } | Self::Validate { common, .. } => common,
        }
    }
}

fn load(common: &Common, required: bool) -> Result<RunConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => config::parse_file(path)?,
        None if required => {
            return Err(Failure::config(
                "ValidationError",
                "this command needs --config",
            ))
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.montecarlo.seed = seed;
    }
    if let Some(depth) = common.depth {
        config.truncation.mode = depth;
    }
    if common.allow_unsound_truncation {
        if let Some(noise) = config.noise.as_mut() {
            noise.allow_unsound_truncation = true;
        }
    }
    config
        .validate_noise()
        .map_err(|e| Failure::config(e.code(), e))?;
    Ok(config)
}

/// Validates a solver configuration, treating every violation as a
/// configuration error.
fn checked(solver: SolverConfig, stderr: &mut dyn Write) -> Result<SolverConfig, Failure> {
    solver
        .validate()
        .map_err(|e| Failure::config(e.code(), e))?;
    if let Some(warning) = solver.process.truncation_warning() {
        let _ = writeln!(stderr, "warning: {warning}");
    }
    Ok(solver)
}

fn execute(command: &Command, stderr: &mut dyn Write) -> Result<String, Failure> {
    match command {
        Command::Simulate(common) => simulate(common, stderr),
        Command::Propagator(common) => propagator(common, stderr),
        Command::Montecarlo(common) => monte_carlo(common, stderr),
        Command::RydbergSweep {
            common,
            method,
            noise,
        } => rydberg_sweep(common, method, noise.as_deref()),
        Command::Validate {
            common,
            process,
            problems,
            trajectories,
        } => validate(common, process, *problems, *trajectories),
    }
}

fn simulate(common: &Common, stderr: &mut dyn Write) -> Result<String, Failure> {
    let config = load(common, true)?;
    let solver = checked(config.solver_config()?, stderr)?;
    let d = solver.rho0.dim();
    let evolution = hierarchy::integrate(&solver).map_err(|e| Failure::runtime(e.code(), e))?;
    let mut manifest = RunManifest::new("simulate", config.hash());
    manifest.wall_time("dheom", evolution.diagnostics.wall_time);
    manifest.diagnostics(&evolution.diagnostics);
    let mut table = Table::new(
        std::iter::once("t".to_string())
            .chain(matrix_columns("rho", d))
            .collect(),
    );
    for (t, state) in evolution.times.iter().zip(&evolution.states) {
        table.rows.push(
            std::iter::once(num(*t))
                .chain(matrix_cells(state.matrix()))
                .collect(),
        );
    }
    Ok(table.render(&manifest))
}

fn propagator(common: &Common, stderr: &mut dyn Write) -> Result<String, Failure> {
    let config = load(common, true)?;
    let solver = checked(config.solver_config()?, stderr)?;
    let d = solver.rho0.dim();
    let maps =
        hierarchy::integrate_propagator(&solver).map_err(|e| Failure::runtime(e.code(), e))?;
    let mut manifest = RunManifest::new("propagator", config.hash());
    manifest.wall_time("dheom", maps.diagnostics.wall_time);
    manifest.diagnostics(&maps.diagnostics);
    let mut table = Table::new(
        std::iter::once("t".to_string())
            .chain(matrix_columns("e", d * d))
            .collect(),
    );
    for (t, map) in maps.times.iter().zip(&maps.maps) {
        table
            .rows
            .push(std::iter::once(num(*t)).chain(matrix_cells(map)).collect());
    }
    Ok(table.render(&manifest))
}

fn monte_carlo(common: &Common, stderr: &mut dyn Write) -> Result<String, Failure> {
    let config = load(common, true)?;
    let mut mc = config.mc_config()?;
    mc.solver = checked(mc.solver, stderr)?;
    mc.validate().map_err(|e| Failure::config(e.code(), e))?;
    let d = mc.solver.rho0.dim();
    let result = montecarlo::average(&mc).map_err(|e| Failure::runtime(e.code(), e))?;
    let mut manifest = RunManifest::new("montecarlo", config.hash());
    manifest.wall_time("mc", result.wall_time);
    manifest.field("trajectories", result.trajectories);
    let header = std::iter::once("t".to_string())
        .chain(matrix_columns("rho", d))
        .chain(matrix_columns("se", d))
        .collect();
    let mut table = Table::new(header);
    for ((t, mean), se) in result
        .times
        .iter()
        .zip(&result.mean)
        .zip(&result.standard_error)
    {
        table.rows.push(
            std::iter::once(num(*t))
                .chain(matrix_cells(mean.matrix()))
                .chain(matrix_cells(se))
                .collect(),
        );
    }
    Ok(table.render(&manifest))
}

fn rydberg_sweep(common: &Common, method: &str, noise: Option<&str>) -> Result<String, Failure> {
    let mut config = load(common, false)?;
    if let Some(name) = noise {
        let kind = NoiseKind::parse(name).expect("validated by clap");
        config.noise = kind
            .fig1_process()
            .map(|p| p.allowing_unsound_truncation(common.allow_unsound_truncation));
    }
    let method = Method::parse(method).expect("validated by clap");
    let sweep_config = config.rydberg_config();
    sweep_config
        .validate()
        .map_err(|e| Failure::config(e.code(), e))?;
    let sweep = rydberg::sweep(&sweep_config, method).map_err(|e| Failure::runtime(e.code(), e))?;
    let mut manifest = RunManifest::new("rydberg-sweep", config.hash());
    manifest.field("method", method.name());
    manifest.field("noise", config.noise.map_or("none", |p| p.kind.name()));
    manifest.wall_time(method.name(), sweep.wall_time);
    if let Some(depth) = sweep.rows.iter().filter_map(|r| r.depth).max() {
        manifest.field("max_depth_used", depth);
    }
    let with_se = sweep.rows.iter().any(|r| r.standard_error.is_some());
    let mut header = vec!["delta".to_string(), "population".to_string()];
    if with_se {
        header.push("se".into());
    }
    let mut table = Table::new(header);
    for row in &sweep.rows {
        let mut cells = vec![num(row.delta), num(row.population)];
        if with_se {
            cells.push(num(row.standard_error.unwrap_or(0.0)));
        }
        table.rows.push(cells);
    }
    Ok(table.render(&manifest))
}

fn validate(
    common: &Common,
    process: &str,
    problems: usize,
    trajectories: usize,
) -> Result<String, Failure> {
    if problems == 0 || trajectories < 2 {
        return Err(Failure::config(
            "ValidationError",
            "need at least 1 problem and 2 trajectories",
        ));
    }
    let base = load(common, false)?;
    let seed = common.seed.unwrap_or(0);
    let processes: Vec<_> = validation::suite_processes()
        .into_iter()
        .filter(|p| process == "all" || p.kind.name() == process)
        .collect();
    let started = Instant::now();
    let mut table = Table::new(
        [
            "process",
            "seed",
            "depth",
            "max_deviation",
            "allowance",
            "worst_ratio",
            "propagator_deviation",
            "dheom_s",
            "mc_s",
            "passed",
        ]
        .map(String::from)
        .to_vec(),
    );
    let (mut dheom, mut mc, mut all_passed) = (0.0, 0.0, true);
    let (mut worst_dev, mut worst_allowance, mut worst_ratio) = (0.0f64, 0.0, 0.0f64);
    for spec in processes {
        for problem_seed in validation::suite_seeds(seed, problems) {
            let mut solver = validation::random_problem(spec, problem_seed);
            solver.dt = base.dt;
            solver.truncation = base.truncation;
            let check = validation::cross_check(&solver, problem_seed, trajectories)
                .map_err(|e| Failure::runtime(e.code(), e))?;
            dheom += check.dheom_time.as_secs_f64();
            mc += check.mc_time.as_secs_f64();
            all_passed &= check.passed();
            if check.worst_ratio >= worst_ratio {
                (worst_dev, worst_allowance, worst_ratio) =
                    (check.max_deviation, check.allowance, check.worst_ratio);
            }
            table.rows.push(vec![
                spec.kind.name().to_string(),
                problem_seed.to_string(),
                check.depth.to_string(),
                num(check.max_deviation),
                num(check.allowance),
                num(check.worst_ratio),
                num(check.propagator_deviation),
                format!("{:.6}", check.dheom_time.as_secs_f64()),
                format!("{:.6}", check.mc_time.as_secs_f64()),
                check.passed().to_string(),
            ]);
        }
    }
    let mut manifest = RunManifest::new("validate", base.hash());
    manifest.field("seed", seed);
    manifest.field("trajectories", trajectories);
    manifest.wall_time("total", started.elapsed());
    let mut text = table.render(&manifest);
    text.push_str(&format!(
        "# max_deviation={worst_dev:.3e} allowance={worst_allowance:.3e} worst_ratio={worst_ratio:.3} \
         dheom_s={dheom:.3} mc_s={mc:.3} speedup={:.1}\n",
        mc / dheom.max(1e-12)
    ));
    if !all_passed {
        let mut failure = Failure::runtime(
            "ValidationFailed",
            format!("deviation {worst_dev:.3e} exceeds allowance {worst_allowance:.3e}"),
        );
        failure.report = Some(text);
        return Err(failure);
    }
    Ok(text)
}
