//! Command-line driver for the two-grid Navier-Stokes experiments.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure
//! (solver/Newton), 3 threshold violation in `selftest`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};

use twogrid::experiments::errors::{write_error_csv, write_report_table};
use twogrid::experiments::exp1::{run_experiment1, Experiment1Config};
use twogrid::experiments::exp2::{run_experiment2, Experiment2Config};
use twogrid::experiments::selftest::run_selftest;
use twogrid::experiments::stokes_mms::{run_stokes_mms, StokesMmsConfig};
use twogrid::Family;

#[derive(Parser, Debug)]
#[command(
    name = "twogrid",
    version,
    about = "Two-grid postprocessed Galerkin solver for the 2D incompressible Navier-Stokes equations"
)]
struct Cli {
    /// Plain "key = value" file supplying defaults; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convergence experiment: coarse Galerkin evolution plus one fine
    /// Oseen postprocess per mesh pair, errors against the manufactured
    /// solution.
    Converge(ConvergeArgs),
    /// Method comparison on a decaying vortex: Galerkin, standard Stokes
    /// postprocess and the new Oseen postprocess against a fine reference.
    Compare(CompareArgs),
    /// Steady Stokes/Oseen convergence check with manufactured forcing.
    StokesMms(StokesMmsArgs),
    /// Runs the structural invariant suite.
    Selftest,
}

#[derive(clap::Args, Debug)]
struct ConvergeArgs {
    /// Mesh pairs "coarseN:fineN,..."
    #[arg(long, default_value = "6:20,8:26,10:32,12:36")]
    pairs: String,
    #[arg(long, default_value_t = 0.05)]
    nu: f64,
    #[arg(long = "t-final", default_value_t = 0.5)]
    t_final: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Output CSV (method,H,h,nu,t,err_u_L2,err_u_H1,err_p_L2)
    #[arg(long, default_value = "errors.csv")]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    nu: f64,
    /// Coarse mesh subdivisions N (H = 1/N)
    #[arg(long, default_value_t = 10)]
    coarse: usize,
    /// Fine mesh subdivisions for the postprocess
    #[arg(long, default_value_t = 30)]
    fine: usize,
    /// Points per side of the sampled field dumps
    #[arg(long = "dump-grid", default_value_t = 101)]
    dump_grid: usize,
    #[arg(long, default_value = "compare.csv")]
    out: PathBuf,
    #[arg(long = "t-final", default_value_t = 0.5)]
    t_final: f64,
    #[arg(long, default_value_t = 0.005)]
    dt: f64,
    /// Reference-solution cache directory
    #[arg(long = "cache-dir", default_value = "oracle-cache")]
    cache_dir: PathBuf,
    /// Reference mesh subdivisions (advanced)
    #[arg(long = "oracle-n", default_value_t = 40, hide = true)]
    oracle_n: usize,
    /// Reference time step (advanced)
    #[arg(long = "oracle-dt", default_value_t = 0.0025, hide = true)]
    oracle_dt: f64,
    /// Companion mesh for the oracle adequacy check (advanced)
    #[arg(long = "adequacy-n", default_value_t = 32, hide = true)]
    adequacy_n: usize,
}

#[derive(clap::Args, Debug)]
struct StokesMmsArgs {
    #[arg(long, value_parser = parse_family, default_value = "mini")]
    family: Family,
    /// Mesh subdivision levels "8,16,32"
    #[arg(long, default_value = "8,16,32")]
    levels: String,
    #[arg(long, default_value_t = 0.05)]
    nu: f64,
    /// Solve the Oseen variant (exact wind in the operator)
    #[arg(long)]
    oseen: bool,
}

fn parse_family(s: &str) -> Result<Family, String> {
    match s {
        "mini" => Ok(Family::Mini),
        "taylor-hood" => Ok(Family::TaylorHood),
        other => Err(format!("unknown family '{other}' (mini | taylor-hood)")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli, &matches) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                AppError::Usage(_) => ExitCode::from(1),
                AppError::Numerical(_) => ExitCode::from(2),
            }
        }
    }
}

enum AppError {
    Usage(String),
    Numerical(String),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Usage(m) | AppError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

impl From<twogrid::Error> for AppError {
    fn from(e: twogrid::Error) -> Self {
        if e.is_numerical() {
            AppError::Numerical(e.to_string())
        } else {
            AppError::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Usage(e.to_string())
    }
}

fn run(cli: Cli, matches: &ArgMatches) -> Result<ExitCode, AppError> {
    let overlay = match &cli.config {
        Some(path) => parse_config_file(path)?,
        None => HashMap::new(),
    };
    match cli.command {
        Command::Converge(mut args) => {
            let sub = matches.subcommand_matches("converge").expect("subcommand");
            apply(&overlay, sub, "pairs", &mut args.pairs)?;
            apply(&overlay, sub, "nu", &mut args.nu)?;
            apply(&overlay, sub, "t-final", &mut args.t_final)?;
            apply(&overlay, sub, "dt", &mut args.dt)?;
            apply(&overlay, sub, "out", &mut args.out)?;
            converge(args)
        }
        Command::Compare(mut args) => {
            let sub = matches.subcommand_matches("compare").expect("subcommand");
            apply(&overlay, sub, "nu", &mut args.nu)?;
            apply(&overlay, sub, "coarse", &mut args.coarse)?;
            apply(&overlay, sub, "fine", &mut args.fine)?;
            apply(&overlay, sub, "dump-grid", &mut args.dump_grid)?;
            apply(&overlay, sub, "out", &mut args.out)?;
            apply(&overlay, sub, "t-final", &mut args.t_final)?;
            apply(&overlay, sub, "dt", &mut args.dt)?;
            apply(&overlay, sub, "cache-dir", &mut args.cache_dir)?;
            apply(&overlay, sub, "oracle-n", &mut args.oracle_n)?;
            apply(&overlay, sub, "oracle-dt", &mut args.oracle_dt)?;
            apply(&overlay, sub, "adequacy-n", &mut args.adequacy_n)?;
            compare(args)
        }
        Command::StokesMms(mut args) => {
            let sub = matches.subcommand_matches("stokes-mms").expect("subcommand");
            let mut family_key = String::new();
            apply(&overlay, sub, "levels", &mut args.levels)?;
            apply(&overlay, sub, "nu", &mut args.nu)?;
            apply(&overlay, sub, "family", &mut family_key)?;
            if !family_key.is_empty() {
                args.family = parse_family(&family_key).map_err(AppError::Usage)?;
            }
            apply(&overlay, sub, "oseen", &mut args.oseen)?;
            stokes_mms(args)
        }
        Command::Selftest => selftest(),
    }
}

/// Overrides `field` with the config-file value unless the flag was given
/// explicitly on the command line.
fn apply<T: std::str::FromStr>(
    overlay: &HashMap<String, String>,
    matches: &ArgMatches,
    key: &str,
    field: &mut T,
) -> Result<(), AppError>
where
    T::Err: std::fmt::Display,
{
    let Some(raw) = overlay.get(key) else {
        return Ok(());
    };
    if matches!(matches.value_source(key), Some(ValueSource::CommandLine)) {
        return Ok(());
    }
    *field = raw
        .parse()
        .map_err(|e| AppError::Usage(format!("config key '{key}': {e}")))?;
    Ok(())
}

fn parse_config_file(path: &Path) -> Result<HashMap<String, String>, AppError> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(AppError::Usage(format!(
                "config {}:{}: expected 'key = value'",
                path.display(),
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_pairs(s: &str) -> Result<Vec<(usize, usize)>, AppError> {
    let mut pairs = Vec::new();
    for part in s.split(',') {
        let Some((c, f)) = part.split_once(':') else {
            return Err(AppError::Usage(format!(
                "bad pair '{part}' (expected coarseN:fineN)"
            )));
        };
        let coarse = c
            .trim()
            .parse()
            .map_err(|e| AppError::Usage(format!("bad coarse level '{c}': {e}")))?;
        let fine = f
            .trim()
            .parse()
            .map_err(|e| AppError::Usage(format!("bad fine level '{f}': {e}")))?;
        pairs.push((coarse, fine));
    }
    if pairs.is_empty() {
        return Err(AppError::Usage("no mesh pairs given".into()));
    }
    Ok(pairs)
}

fn parse_levels(s: &str) -> Result<Vec<usize>, AppError> {
    let levels: Result<Vec<usize>, _> = s.split(',').map(|p| p.trim().parse()).collect();
    levels.map_err(|e| AppError::Usage(format!("bad levels '{s}': {e}")))
}

fn converge(args: ConvergeArgs) -> Result<ExitCode, AppError> {
    let config = Experiment1Config {
        pairs: parse_pairs(&args.pairs)?,
        nu: args.nu,
        t_final: args.t_final,
        dt: args.dt,
    };
    let out = run_experiment1(&config)?;
    let mut file = fs::File::create(&args.out)?;
    write_error_csv(&out.reports, &mut file)?;
    let mut stdout = std::io::stdout().lock();
    write_report_table(&out.reports, &mut stdout)?;
    println!("\n{}", out.slopes);
    println!("wrote {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn compare(args: CompareArgs) -> Result<ExitCode, AppError> {
    let mut config = Experiment2Config::new(args.nu, &args.cache_dir);
    config.coarse_n = args.coarse;
    config.fine_n = args.fine;
    config.t_final = args.t_final;
    config.dt = args.dt;
    config.dump_grid = args.dump_grid;
    config.oracle.n_ref = args.oracle_n;
    config.oracle.dt = args.oracle_dt;
    config.adequacy_n = args.adequacy_n;
    let out = run_experiment2(&config)?;

    let mut file = fs::File::create(&args.out)?;
    write_error_csv(&out.reports, &mut file)?;
    let mut stdout = std::io::stdout().lock();
    write_report_table(&out.reports, &mut stdout)?;
    println!();
    for c in &out.comparisons {
        println!("midline total variation ({}): {:e}", c.method, c.midline_tv);
    }
    println!("oracle adequacy ratio: {:e} (trusted when < 0.5)", out.adequacy_ratio);

    // grid-sampled dumps alongside the CSV, one per method plus the reference
    let stem = args.out.file_stem().unwrap_or_default().to_string_lossy();
    let dir = args.out.parent().map(Path::to_path_buf).unwrap_or_default();
    for (name, field) in out
        .comparisons
        .iter()
        .map(|c| (c.method.as_str(), &c.velocity))
        .chain(std::iter::once(("reference", &out.reference_velocity)))
    {
        let path = dir.join(format!("{stem}_{name}.csv"));
        let mut f = fs::File::create(&path)?;
        field
            .write_grid_csv(args.dump_grid, &mut f)
            .map_err(AppError::from)?;
        println!("wrote {}", path.display());
    }
    println!("wrote {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn stokes_mms(args: StokesMmsArgs) -> Result<ExitCode, AppError> {
    let mut config = StokesMmsConfig::new(args.family, parse_levels(&args.levels)?);
    config.nu = args.nu;
    config.oseen = args.oseen;
    let out = run_stokes_mms(&config)?;
    let mut stdout = std::io::stdout().lock();
    write_report_table(&out.reports, &mut stdout)?;
    println!("\n{}", out.slopes);
    Ok(ExitCode::SUCCESS)
}

fn selftest() -> Result<ExitCode, AppError> {
    let results = run_selftest()?;
    let mut failed = 0;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {} - {}", r.name, r.detail);
        if !r.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} of {} checks failed", results.len());
        Ok(ExitCode::from(3))
    } else {
        println!("all {} checks passed", results.len());
        Ok(ExitCode::SUCCESS)
    }
}
