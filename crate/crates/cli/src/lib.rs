//! Batch front end for the `leafspace` library.

pub mod commands;
pub mod error;
pub mod presets;
pub mod wire;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use leafspace::experiments::{Z_MAX, Z_MIN};
use leafspace::roof::RoofOptions;
use serde::Serialize;

pub use error::CliError;

#[derive(Parser, Debug, Clone)]
#[command(name = "leafspace", version, about = "Subalgebra-relative entanglement of formation and conditional entropy")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Convex roof of the restricted entropy.
    Eof(EofArgs),
    /// Conditional entropy, imbedded or against a second subalgebra.
    Condent(CondentArgs),
    /// Bifurcation scan of the symmetric M3 family.
    ScanM3(ScanArgs),
    /// Non-additivity of the conditional entropy for tracial states.
    Counterexample(CounterArgs),
    /// Linearity of the roof on the leaf of an optimal decomposition.
    LeafCheck(LeafArgs),
    /// Compatibility inequality over random coefficient vectors.
    Compat(CompatArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OptArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    /// Plateau tolerance on the objective value.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub grad_tol: f64,
    /// Members per decomposition (POVM outcomes in pair mode).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub members: Option<usize>,
}

impl OptArgs {
    pub fn roof_options(&self) -> RoofOptions {
        RoofOptions {
            member_count: self.members,
            restarts: self.restarts,
            grad_tol: self.grad_tol,
            value_tol: self.tol,
            seed: self.seed,
            ..RoofOptions::default()
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, Default)]
pub struct OutArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct StateArgs {
    /// State as a matrix JSON file or a preset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    /// State preset: m3:z=…, m2:x=…, tracial:d=…, diag:p=….
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Subalgebra as a JSON file or a preset; diagonal by default.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subalg: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EofArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: StateArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub opt: OptArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CondentArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: StateArgs,
    /// Second subalgebra; selects the pair form.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subalg_b: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub opt: OptArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ScanArgs {
    #[arg(long, default_value_t = Z_MIN, allow_hyphen_values = true)]
    pub z_min: f64,
    #[arg(long, default_value_t = Z_MAX, allow_hyphen_values = true)]
    pub z_max: f64,
    #[arg(long, default_value_t = 151)]
    pub steps: usize,
    /// Fill the runtime_ms column.
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub opt: OptArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CounterArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub opt: OptArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LeafArgs {
    /// Leaf, ensemble or state JSON file, or a state preset.
    #[command(flatten)]
    #[serde(flatten)]
    pub input: StateArgs,
    /// Weight-grid points along the leaf.
    #[arg(long, default_value_t = 11)]
    pub steps: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub opt: OptArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConventionArg {
    Validated,
    Literal,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GapDirectionArg {
    Entanglement,
    Conditional,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CompatArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: StateArgs,
    /// Number of random coefficient vectors.
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = ConventionArg::Validated)]
    pub convention: ConventionArg,
    #[arg(long, value_enum, default_value_t = GapDirectionArg::Entanglement)]
    pub direction: GapDirectionArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub opt: OptArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

impl Command {
    pub fn out(&self) -> &OutArgs {
        match self {
            Command::Eof(a) => &a.out,
            Command::Condent(a) => &a.out,
            Command::ScanM3(a) => &a.out,
            Command::Counterexample(a) => &a.out,
            Command::LeafCheck(a) => &a.out,
            Command::Compat(a) => &a.out,
        }
    }

    /// The run configuration embedded in every output. Output path and
    /// thread count are left out since they do not affect results.
    pub fn config(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Command-line arguments that re-create a run from its embedded config.
pub fn config_to_args(config: &serde_json::Value) -> Result<Vec<String>, CliError> {
    let obj = config
        .as_object()
        .ok_or_else(|| CliError::Input("config: expected an object".into()))?;
    let command = obj
        .get("command")
        .and_then(|c| c.as_str())
        .ok_or_else(|| CliError::Input("config: missing command".into()))?;
    let mut args = vec![command.to_string()];
    for (k, v) in obj {
        if k == "command" {
            continue;
        }
        let flag = format!("--{}", k.replace('_', "-"));
        match v {
            serde_json::Value::Bool(true) => args.push(flag),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::String(s) => {
                args.push(flag);
                args.push(s.clone());
            }
            serde_json::Value::Number(n) => {
                args.push(flag);
                args.push(n.to_string());
            }
            other => return Err(CliError::Input(format!("config.{k}: unsupported value {other}"))),
        }
    }
    Ok(args)
}

/// Outcome of a successful run: rendered output and whether a numerical flag was raised.
pub struct Outcome {
    pub body: String,
    /// Extra files to write beside the main output, as `(suffix, contents)`.
    pub side_files: Vec<(String, String)>,
    /// Text for standard error.
    pub notes: Vec<String>,
    pub numerical_flag: bool,
}

pub fn run(cmd: &Command) -> Result<Outcome, CliError> {
    commands::dispatch(cmd)
}

/// Runs and writes output files; returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let out = cli.command.out();
    if let Some(t) = out.threads {
        if t == 0 {
            eprintln!("input error: --threads must be positive");
            return 2;
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match run(&cli.command) {
        Ok(o) => {
            for n in &o.notes {
                eprintln!("{n}");
            }
            if let Err(e) = write_outputs(out, &o) {
                eprintln!("{e}");
                return e.exit_code();
            }
            if o.numerical_flag {
                eprintln!("numerical flag raised; see flags in the output");
                3
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn write_outputs(out: &OutArgs, o: &Outcome) -> Result<(), CliError> {
    match &out.out {
        Some(path) => {
            std::fs::write(path, &o.body)?;
            for (suffix, text) in &o.side_files {
                let mut p = path.clone().into_os_string();
                p.push(suffix);
                std::fs::write(PathBuf::from(p), text)?;
            }
        }
        None => {
            print!("{}", o.body);
            for (_, text) in &o.side_files {
                eprint!("{text}");
            }
        }
    }
    Ok(())
}
