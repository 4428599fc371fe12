#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use rankgroth::apps::{ground_state, xor_game_bounds};
use rankgroth::constants::{beta_qr, grothendieck_table, table_to_csv, SeriesConfig, DEFAULT_GRID_STEP};
use rankgroth::graph::{lattice_instance, Couplings, WeightedInstance, XorGame};
use rankgroth::rounding::{algorithm_a, identity_check, AlgorithmConfig};
use rankgroth::sdp::solve_sdp_infinity;
use rankgroth::theta::{
    solve_theta_complement, solve_theta_projections, ThetaMode, DEFAULT_THETA_TOL, MAX_PROJECTION_ITERATIONS,
};
use rankgroth::{Backend, Error};

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Rank-constrained Grothendieck constants and randomized rounding for rank-r SDPs.
#[derive(Parser, Debug)]
#[command(name = "rankgroth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Monte-Carlo samples.
    #[arg(long, global = true, default_value_t = 2000)]
    samples: usize,

    /// Working precision of the series coefficients.
    #[arg(long, global = true, default_value_t = 256)]
    precision_bits: usize,

    /// Number of odd Taylor coefficients kept.
    #[arg(long, global = true, default_value_t = 1024)]
    terms: usize,

    /// Bisection tolerance for beta.
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol: f64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write the result here instead of stdout (replaced atomically).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Base of the logarithm in floor(log d) for entangled XOR game bounds.
    #[arg(long, global = true, default_value_t = 2.0)]
    log_base: f64,

    #[arg(long, global = true, value_enum, default_value_t = BackendArg::Parallel)]
    backend: BackendArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum BackendArg {
    Sequential,
    Parallel,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ThetaSolver {
    InteriorPoint,
    Projections,
}

#[derive(Args, Debug, Serialize)]
struct Source {
    /// Edge-list (`n m` then `u v w` lines) or JSON instance file.
    #[arg(long, required_unless_present = "lattice", conflicts_with = "lattice")]
    instance: Option<PathBuf>,

    /// Generate a lattice box instead, e.g. `4,4,4`.
    #[arg(long, value_delimiter = ',')]
    lattice: Vec<usize>,

    /// Lattice weights: ferro, antiferro or random (+-1 from --seed).
    #[arg(long, default_value = "random")]
    couplings: Couplings,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Table of K(r, G) = 1/beta(r, G).
    Constants {
        #[arg(long, default_value_t = 10)]
        rmax: u32,
        /// Values of theta (comma separated). Defaults to 2,3 when neither this nor --chi is given.
        #[arg(long, value_delimiter = ',')]
        theta: Vec<f64>,
        /// Chromatic numbers used in place of theta.
        #[arg(long, value_delimiter = ',')]
        chi: Vec<usize>,
    },
    /// Theta number of the complement graph with its certificate.
    Theta {
        /// Graph file in either instance format; weights are ignored.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value_t = ThetaSolver::InteriorPoint)]
        method: ThetaSolver,
        #[arg(long, default_value_t = DEFAULT_THETA_TOL)]
        theta_tol: f64,
    },
    /// Solve SDP_inf by block-coordinate ascent.
    Solve {
        #[command(flatten)]
        source: Source,
    },
    /// Rank-r rounding pipeline.
    Round {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 1)]
        r: usize,
        /// `solve` or `chi:k`; defaults to chi:2 for bipartite graphs and solve otherwise.
        #[arg(long)]
        theta_mode: Option<ThetaMode>,
    },
    /// n-vector model ground state.
    GroundState {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 3)]
        r: usize,
        #[arg(long)]
        theta_mode: Option<ThetaMode>,
    },
    /// Classical and entangled value brackets for an XOR game.
    XorGame {
        /// JSON file with `pi` and `g` matrices.
        #[arg(long)]
        game: PathBuf,
        /// Local dimension of the shared entangled state.
        #[arg(long, default_value_t = 2)]
        d: u64,
        #[arg(long, default_value_t = 50)]
        restarts: usize,
    },
    /// K(q -> r, G) from the Gegenbauer expansion.
    BetaQ {
        #[arg(long)]
        q: u32,
        #[arg(long)]
        r: u32,
        #[arg(long, default_value_t = 2.0)]
        theta: f64,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
    },
    /// Monte-Carlo check of E_r against its Taylor series.
    Identity {
        #[arg(long)]
        r: u32,
        #[arg(long)]
        t: f64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Constants { .. } => "constants",
            Command::Theta { .. } => "theta",
            Command::Solve { .. } => "solve",
            Command::Round { .. } => "round",
            Command::GroundState { .. } => "ground-state",
            Command::XorGame { .. } => "xor-game",
            Command::BetaQ { .. } => "beta-q",
            Command::Identity { .. } => "identity",
        }
    }
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Core(Error::Numerical(_) | Error::NotConverged { .. } | Error::PropertyViolation { .. }) => {
                EXIT_NUMERICAL
            }
            Failure::Core(_) => EXIT_USAGE,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn validate(cli: &Cli) -> Result<(), Failure> {
    if cli.samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    if cli.precision_bits < 64 {
        return Err(usage("--precision-bits must be at least 64"));
    }
    if cli.terms < 2 {
        return Err(usage("--terms must be at least 2"));
    }
    if !(cli.tol > 0.0 && cli.tol < 1.0) {
        return Err(usage("--tol must lie in (0, 1)"));
    }
    if !(cli.log_base > 1.0) || !cli.log_base.is_finite() {
        return Err(usage("--log-base must be a finite number above 1"));
    }
    match &cli.command {
        Command::Constants { rmax, theta, chi } => {
            if *rmax < 1 {
                return Err(usage("--rmax must be at least 1"));
            }
            if theta.iter().any(|t| !(*t >= 2.0) || !t.is_finite()) || chi.iter().any(|&k| k < 2) {
                return Err(usage("theta and chi values must be at least 2"));
            }
        }
        Command::Theta { theta_tol, .. } if !(*theta_tol > 0.0) => {
            return Err(usage("--theta-tol must be positive"));
        }
        Command::Round { r, .. } | Command::GroundState { r, .. } if *r == 0 => {
            return Err(usage("--r must be at least 1"));
        }
        Command::XorGame { d, restarts, .. } if *d == 0 || *restarts == 0 => {
            return Err(usage("--d and --restarts must be at least 1"));
        }
        Command::BetaQ { q, r, theta, grid_step } => {
            if *r == 0 || *q < 2 || q < r {
                return Err(usage("need q >= max(r, 2) and r >= 1"));
            }
            if !(*theta >= 2.0) || !(*grid_step > 0.0 && *grid_step < 1.0) {
                return Err(usage("--theta must be >= 2 and --grid-step in (0, 1)"));
            }
        }
        Command::Identity { r, t } if *r == 0 || !(t.abs() <= 1.0) => {
            return Err(usage("need --r >= 1 and |--t| <= 1"));
        }
        _ => {}
    }
    Ok(())
}

fn load_source(src: &Source, seed: u64) -> Result<WeightedInstance, Failure> {
    match &src.instance {
        Some(path) => WeightedInstance::load(path).map_err(|e| with_path(e, path)),
        None => Ok(lattice_instance(&src.lattice, src.couplings, seed)?),
    }
}

fn with_path(e: Error, path: &Path) -> Failure {
    match e {
        Error::Io(io) => usage(format!("{}: {io}", path.display())),
        Error::Parse { line, msg } => usage(format!("{}:{line}: {msg}", path.display())),
        other => Failure::Core(other),
    }
}

/// Result of a command: the JSON value and, for the constants table, its CSV form.
struct Outcome {
    value: Value,
    csv: Option<String>,
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let series = SeriesConfig {
        terms: cli.terms,
        precision_bits: cli.precision_bits,
    };
    let backend = match cli.backend {
        BackendArg::Sequential => Backend::Sequential,
        BackendArg::Parallel => Backend::Parallel,
    };
    let cfg = AlgorithmConfig {
        series,
        beta_tol: cli.tol,
        backend,
        ..AlgorithmConfig::default()
    };
    let to_value = |v: &dyn erased::Ser| v.value();
    let outcome = match &cli.command {
        Command::Constants { rmax, theta, chi } => {
            let mut thetas: Vec<f64> = theta.clone();
            thetas.extend(chi.iter().map(|&k| k as f64));
            if thetas.is_empty() {
                thetas = vec![2.0, 3.0];
            }
            let rows = grothendieck_table(*rmax, &thetas, series, cli.tol, backend)?;
            Outcome {
                value: to_value(&rows),
                csv: Some(table_to_csv(&rows)),
            }
        }
        Command::Theta {
            graph,
            method,
            theta_tol,
        } => {
            let inst = WeightedInstance::load(graph).map_err(|e| with_path(e, graph))?;
            let cert = match method {
                ThetaSolver::InteriorPoint => solve_theta_complement(inst.graph(), *theta_tol)?,
                ThetaSolver::Projections => {
                    solve_theta_projections(inst.graph(), *theta_tol, MAX_PROJECTION_ITERATIONS)?
                }
            };
            Outcome {
                value: serde_json::from_str(&cert.to_json()?).map_err(Error::from)?,
                csv: None,
            }
        }
        Command::Solve { source } => {
            let inst = load_source(source, cli.seed)?;
            let sol = solve_sdp_infinity(&inst, cfg.sdp_tol, cfg.max_sweeps, cli.seed)?;
            let mut value: Value = serde_json::from_str(&sol.to_json()?).map_err(Error::from)?;
            value["dual_bound"] = json!(sol.dual_bound);
            value["sweeps"] = json!(sol.iterations);
            value["converged"] = json!(sol.converged);
            Outcome { value, csv: None }
        }
        Command::Round { source, r, theta_mode } => {
            let inst = load_source(source, cli.seed)?;
            let mode = theta_mode.unwrap_or_else(|| ThetaMode::default_for(inst.graph()));
            let rep = algorithm_a(&inst, *r, cli.samples, cli.seed, mode, &cfg)?;
            let mut value = to_value(&rep);
            value["ratio"] = json!(rep.rounding.ratio());
            Outcome { value, csv: None }
        }
        Command::GroundState { source, r, theta_mode } => {
            let inst = load_source(source, cli.seed)?;
            let mode = theta_mode.unwrap_or_else(|| ThetaMode::default_for(inst.graph()));
            let rep = ground_state(&inst, *r, cli.samples, cli.seed, mode, &cfg)?;
            Outcome {
                value: to_value(&rep),
                csv: None,
            }
        }
        Command::XorGame { game, d, restarts } => {
            let game = XorGame::load(game).map_err(|e| with_path(e, game))?;
            let rep = xor_game_bounds(&game, *d, cli.log_base, *restarts, cli.seed, &cfg)?;
            Outcome {
                value: to_value(&rep),
                csv: None,
            }
        }
        Command::BetaQ { q, r, theta, grid_step } => {
            let res = beta_qr(*q, *r, *theta, *grid_step, cli.tol, series)?;
            Outcome {
                value: to_value(&res),
                csv: None,
            }
        }
        Command::Identity { r, t } => {
            let res = identity_check(*r, *t, cli.samples, cli.seed, series, backend)?;
            let mut value = to_value(&res);
            let z = if res.std_error > 0.0 {
                (res.mc_mean - res.series_value) / res.std_error
            } else {
                0.0
            };
            value["z_score"] = json!(z);
            Outcome { value, csv: None }
        }
    };
    Ok(outcome)
}

/// Object-safe `Serialize -> Value`.
mod erased {
    pub trait Ser {
        fn value(&self) -> serde_json::Value;
    }

    impl<T: serde::Serialize> Ser for T {
        fn value(&self) -> serde_json::Value {
            serde_json::to_value(self).expect("serializable result")
        }
    }
}

fn config_echo(cli: &Cli) -> Value {
    json!({
        "seed": cli.seed,
        "samples": cli.samples,
        "precision_bits": cli.precision_bits,
        "terms": cli.terms,
        "tol": cli.tol,
        "format": cli.format,
        "log_base": cli.log_base,
        "backend": cli.backend,
        "args": cli.command,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

/// Scalar leaves of `v` as `(dotted.key, value)`; arrays are skipped.
fn scalars(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                scalars(&key, x, out);
            }
        }
        Value::Array(_) => {}
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn render(cli: &Cli, outcome: &Outcome) -> String {
    match cli.format {
        Format::Json => {
            let doc = json!({
                "command": cli.command.name(),
                "config": config_echo(cli),
                "result": outcome.value,
            });
            serde_json::to_string_pretty(&doc).expect("json") + "\n"
        }
        Format::Csv => match &outcome.csv {
            Some(csv) => csv.clone(),
            None => {
                let mut out = String::from("key,value\n");
                let mut rows = Vec::new();
                scalars("", &outcome.value, &mut rows);
                for (k, v) in rows {
                    writeln!(out, "{k},{v}").unwrap();
                }
                out
            }
        },
        Format::Text => {
            if let Command::Constants { .. } = cli.command {
                return constants_text(&outcome.value);
            }
            let mut rows = Vec::new();
            scalars("", &outcome.value, &mut rows);
            let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            let mut out = String::new();
            for (k, v) in rows {
                writeln!(out, "{k:<width$}  {v}").unwrap();
            }
            out
        }
    }
}

fn constants_text(rows: &Value) -> String {
    let mut out = format!("{:>3}  {:>6}  {:>16}  {:>16}\n", "r", "theta", "beta", "K");
    for row in rows.as_array().into_iter().flatten() {
        writeln!(
            out,
            "{:>3}  {:>6}  {:>16.12}  {:>16.12}",
            row["r"].to_string(),
            row["theta"].to_string(),
            row["beta"].as_f64().unwrap_or(f64::NAN),
            row["k_bound"].as_f64().unwrap_or(f64::NAN)
        )
        .unwrap();
    }
    out
}

/// Writes next to `path` and renames, so readers never see a partial file.
fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = validate(&cli).and_then(|()| run(&cli));
    let outcome = match result {
        Ok(o) => o,
        Err(f) => {
            eprintln!("error: {f}");
            return ExitCode::from(f.exit_code());
        }
    };
    let text = render(&cli, &outcome);
    match &cli.output {
        Some(path) => {
            if let Err(e) = write_atomic(path, &text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_USAGE);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::SUCCESS
}
