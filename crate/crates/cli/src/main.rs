use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use cavity_core::dense::steady_state;
use cavity_core::fock::LatticeSpec;
use cavity_core::model::{build_liouvillian, ModelParams};
use cavity_core::momentum::resonant_modes;
use cavity_core::mpdo::relax_to_steady;
use cavity_core::observables::{
    density, fit_correlation_length, g1_row, g2_row, variance, Expectation, FitResult,
};
use cavity_core::sweep::{run_and_emit, Axis, Format, SolverKind, SweepConfig};
use cavity_core::{validate, Error};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

/// Steady states of driven-dissipative Bose-Hubbard cavity arrays.
#[derive(Parser)]
#[command(name = "cavity", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one parameter point and print state diagnostics as JSON.
    Steady(PointArgs),
    /// Evaluate the configured (Ω, J) grid and write CSV/JSON.
    Sweep(SweepArgs),
    /// Print g1/g2 rows and the correlation-length fit at one point.
    Correlate(PointArgs),
    /// Print the plane-wave detuning spectrum of a ring.
    Modes(ModesArgs),
    /// Run the built-in reference checks.
    Validate,
}

#[derive(Args)]
struct PointArgs {
    #[arg(long)]
    config: PathBuf,
    /// Drive magnitude; defaults to the first grid value.
    #[arg(long)]
    drive: Option<f64>,
    /// Hopping; defaults to the first grid value.
    #[arg(long)]
    hopping: Option<f64>,
    /// Write the JSON report into this directory instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated formats (`csv`, `json`), overriding `output.formats`.
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<Format>>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct ModesArgs {
    /// Take N, Δ and J from the first point of a sweep file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short = 'n')]
    sites: Option<usize>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    hopping: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidLattice(_) | Error::InvalidParams(_) | Error::InvalidDimension(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Run(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Steady(args) => point(args, false),
        Command::Correlate(args) => point(args, true),
        Command::Sweep(args) => sweep(args),
        Command::Modes(args) => modes(args),
        Command::Validate => run_validation(),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_point(args: &PointArgs) -> Result<SweepConfig, Failure> {
    let mut config = SweepConfig::load(&args.config)?;
    if let Some(drive) = args.drive {
        config.grid.drive = Axis::fixed(drive);
    }
    if let Some(hopping) = args.hopping {
        config.grid.hopping = Axis::fixed(hopping);
    }
    config.validate()?;
    Ok(config)
}

fn point(args: PointArgs, correlations: bool) -> Result<ExitCode, Failure> {
    let config = load_point(&args)?;
    let params = config.params_at(0, 0);
    let spec = &config.lattice;
    let report = match config.solver.kind {
        SolverKind::Dense => {
            let (state, report) = steady_state(&build_liouvillian(spec, &params)?, &config.solver.dense)?;
            let mut out = describe(&state, &config, correlations)?;
            out["solver"] = json!(report);
            out["min_eigenvalue"] = json!(state.min_eigenvalue()?);
            out["populations"] = json!(state.site_populations(config.anchor())?);
            out
        }
        SolverKind::Mpdo => {
            let (state, report) = relax_to_steady(spec, &params, &config.solver.mpdo)?;
            let mut out = describe(&state, &config, correlations)?;
            out["solver"] = json!(report);
            out["bond_dims"] = json!(state.bond_dims());
            out
        }
    };
    let report = json!({ "lattice": spec, "params": params, "result": report });
    emit_json(&report, args.out.as_ref(), if correlations { "correlate" } else { "steady" })?;
    Ok(ExitCode::SUCCESS)
}

fn describe<S: Expectation>(state: &S, config: &SweepConfig, correlations: bool) -> Result<Value, Failure> {
    let n = config.lattice.n_sites();
    let densities: Vec<f64> = (0..n).map(|j| density(state, j)).collect::<Result<_, _>>()?;
    let variances: Vec<f64> = (0..n).map(|j| variance(state, j)).collect::<Result<_, _>>()?;
    let mut out = json!({ "anchor": config.anchor(), "density": densities, "variance": variances });
    if correlations {
        let row = g1_row(state, config.anchor())?;
        let fit: Option<FitResult> = fit_correlation_length(&row, &config.observables.fit_options).ok();
        out["g1_re"] = json!(row.values.iter().map(|g| g.re).collect::<Vec<_>>());
        out["g1_im"] = json!(row.values.iter().map(|g| g.im).collect::<Vec<_>>());
        out["g2"] = json!(g2_row(state, config.anchor(), config.observables.g2_imag_tol)?);
        out["fit"] = match fit {
            Some(f) if f.success => json!(f),
            Some(f) => json!({ "success": false, "rms_residual": f.rms_residual, "n_points": f.n_points }),
            None => Value::Null,
        };
    }
    Ok(out)
}

/// Writes `text` and a newline to stdout; a closed pipe is not an error.
fn print_out(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Run(e.to_string())),
        _ => Ok(()),
    }
}

fn emit_json(value: &Value, out: Option<&PathBuf>, stem: &str) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Run(e.to_string()))?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Failure::Run(e.to_string()))?;
            let path = dir.join(format!("{stem}.json"));
            std::fs::write(&path, text + "\n").map_err(|e| Failure::Run(e.to_string()))?;
            eprintln!("wrote {}", path.display());
        }
        None => print_out(&text)?,
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<ExitCode, Failure> {
    let mut config = SweepConfig::load(&args.config)?;
    if let Some(dir) = args.out {
        config.output.dir = dir;
    }
    if let Some(formats) = args.format {
        config.output.formats = formats;
    }
    if args.threads == 0 {
        return Err(Failure::Config("--threads must be at least 1".into()));
    }
    let (result, files) = run_and_emit(&config, args.threads)?;
    for f in &files {
        eprintln!("wrote {}", f.display());
    }
    let failed = result.failures();
    if failed > 0 {
        eprintln!("{failed} of {} grid points failed", result.records.len());
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn modes(args: ModesArgs) -> Result<ExitCode, Failure> {
    let (n, delta, hopping) = match &args.config {
        Some(path) => {
            let config = SweepConfig::load(path)?;
            let p: ModelParams = config.params_at(0, 0);
            (config.lattice.n_sites(), p.delta, p.hopping)
        }
        None => {
            let n = args.sites.ok_or_else(|| Failure::Config("either --config or --sites is required".into()))?;
            LatticeSpec::periodic(n, 2)?;
            (n, args.delta, args.hopping)
        }
    };
    let spectrum = resonant_modes(n, delta, hopping, args.tol)?;
    let mut table = String::from("k\tdetuning\tresonant");
    for (k, d) in spectrum.detunings.iter().enumerate() {
        table.push_str(&format!("\n{k}\t{d:?}\t{}", spectrum.resonant.contains(&k)));
    }
    print_out(&table)?;
    Ok(ExitCode::SUCCESS)
}

fn run_validation() -> Result<ExitCode, Failure> {
    let checks = validate::run_all();
    let lines: Vec<String> =
        checks.iter().map(|c| format!("{} {:<20} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)).collect();
    print_out(&lines.join("\n"))?;
    let all = checks.iter().all(|c| c.passed);
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
