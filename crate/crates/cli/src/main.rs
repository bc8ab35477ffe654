use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use futaki_core::error::GeomError;
use futaki_core::jet::{DEFAULT_ORDER, MAX_ORDER};
use futaki_core::manifolds::{builtin, load_spec_text, Manifold, BUILTIN};
use futaki_core::quadrature::QuadratureAtlas;

mod commands;
mod suites;

#[derive(Parser, Debug)]
#[command(
    name = "futaki",
    version,
    about = "Moment map and Futaki-type invariants on Kähler charts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute all invariants for the selected fields.
    Compute(RunArgs),
    /// Run a verification suite.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[command(flatten)]
        run: RunArgs,
    },
    /// List manifolds, fields or suites.
    List {
        #[arg(value_enum, default_value = "all")]
        what: ListWhat,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Built-in manifold name.
    #[arg(long, conflicts_with = "spec")]
    manifold: Option<String>,
    /// JSON manifold spec file.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Comma-separated field names, or `all`.
    #[arg(long, default_value = "all")]
    field: String,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    jet_order: usize,
    /// Gauss nodes per axis; defaults depend on the dimension.
    #[arg(long)]
    nodes: Option<usize>,
    /// Tolerance override; its meaning depends on the command (see README).
    #[arg(long)]
    tol: Option<f64>,
    /// Write the JSON report to this path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON report to stdout instead of a summary.
    #[arg(long)]
    json: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Suite {
    Bianchi,
    MomentProperty,
    ChernIdentity,
    TraceIdentity,
    ClassInvariance,
    Character,
    Prop41,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Bianchi,
        Suite::MomentProperty,
        Suite::ChernIdentity,
        Suite::TraceIdentity,
        Suite::ClassInvariance,
        Suite::Character,
        Suite::Prop41,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Bianchi => "bianchi",
            Suite::MomentProperty => "moment_property",
            Suite::ChernIdentity => "chern_identity",
            Suite::TraceIdentity => "trace_identity",
            Suite::ClassInvariance => "class_invariance",
            Suite::Character => "character",
            Suite::Prop41 => "prop41",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ListWhat {
    All,
    Manifolds,
    Fields,
    Suites,
}

/// Failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Reject(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Reject(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Reject(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<GeomError> for CliError {
    fn from(e: GeomError) -> Self {
        match e {
            GeomError::Parse(_)
            | GeomError::Unsupported(_)
            | GeomError::Dimension(_)
            | GeomError::Domain(_) => CliError::Usage(e.to_string()),
            _ => CliError::Reject(e.to_string()),
        }
    }
}

/// Validated run configuration.
pub struct RunConfig {
    pub manifold: Manifold,
    pub field: String,
    pub jet_order: usize,
    pub nodes: Option<usize>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub json: bool,
}

impl RunConfig {
    fn from_args(a: RunArgs) -> Result<RunConfig, CliError> {
        let manifold = match (&a.manifold, &a.spec) {
            (Some(name), None) => builtin(name)?,
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
                load_spec_text(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            _ => {
                return Err(CliError::Usage(
                    "exactly one of --manifold or --spec is required".into(),
                ))
            }
        };
        if !(DEFAULT_ORDER..=MAX_ORDER).contains(&a.jet_order) {
            return Err(CliError::Usage(format!(
                "--jet-order must lie in {DEFAULT_ORDER}..={MAX_ORDER}; the moment map needs sixth derivatives"
            )));
        }
        if let Some(t) = a.tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Usage(format!("--tol must be positive, got {t}")));
            }
        }
        if a.nodes.is_some_and(|n| !(4..=256).contains(&n)) {
            return Err(CliError::Usage("--nodes must lie in 4..=256".into()));
        }
        Ok(RunConfig {
            manifold,
            field: a.field,
            jet_order: a.jet_order,
            nodes: a.nodes,
            tol: a.tol,
            out: a.out,
            json: a.json,
        })
    }

    pub fn atlas(&self) -> QuadratureAtlas {
        match self.nodes {
            Some(n) => QuadratureAtlas::with_nodes(self.manifold.chart.compactification.clone(), n),
            None => QuadratureAtlas::for_chart(&self.manifold.chart),
        }
    }

    /// Writes `report` to `--out` and, with `--json`, to stdout; otherwise
    /// prints `summary`.
    pub fn emit<T: Serialize>(&self, report: &T, summary: &str) -> Result<(), CliError> {
        let text = to_json(report)?;
        if let Some(path) = &self.out {
            std::fs::write(path, &text)
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        }
        if self.json {
            print!("{text}");
        } else {
            print!("{summary}");
        }
        Ok(())
    }
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn list(what: ListWhat, json: bool) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Entry {
        name: String,
        complex_dim: usize,
        fields: Vec<String>,
        description: String,
    }
    let mut manifolds = Vec::new();
    for name in BUILTIN {
        let m = builtin(name)?;
        manifolds.push(Entry {
            name: name.to_string(),
            complex_dim: m.chart.complex_dim,
            fields: m.fields.iter().map(|f| f.name().to_string()).collect(),
            description: m.description.clone(),
        });
    }
    let suites: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
    let show_m = matches!(what, ListWhat::All | ListWhat::Manifolds | ListWhat::Fields);
    let show_s = matches!(what, ListWhat::All | ListWhat::Suites);
    if json {
        let mut v = serde_json::Map::new();
        if show_m {
            v.insert(
                "manifolds".into(),
                serde_json::to_value(&manifolds).expect("serializable"),
            );
        }
        if show_s {
            v.insert(
                "suites".into(),
                serde_json::to_value(&suites).expect("serializable"),
            );
        }
        print!("{}", to_json(&v)?);
        return Ok(());
    }
    if show_m {
        for m in &manifolds {
            match what {
                ListWhat::Fields => println!("{}: {}", m.name, m.fields.join(", ")),
                _ => println!(
                    "{:<10} n={}  {}  [{}]",
                    m.name,
                    m.complex_dim,
                    m.description,
                    m.fields.join(", ")
                ),
            }
        }
    }
    if show_s {
        println!("suites: {}", suites.join(", "));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Compute(args) => {
            let cfg = RunConfig::from_args(args)?;
            commands::compute(&cfg)?;
            Ok(true)
        }
        Command::Verify { suite, run } => {
            let cfg = RunConfig::from_args(run)?;
            suites::verify(&cfg, suite)
        }
        Command::List { what, json } => {
            list(what, json)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
