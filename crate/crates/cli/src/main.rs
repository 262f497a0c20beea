//! `mobknot`: energies, potentials, gradients, transforms, the invariance
//! suite and gradient flows from the command line.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use mobknot::check::{run_checks, CheckConfig};
use mobknot::conformal::{potential_v_hadamard, AngleField};
use mobknot::energy::{energy_e_fhw, energy_e_from_v};
use mobknot::gradient::{gradient, weighted_gradient, GradientField, GradientRoute, CIRCLE_TOL};
use mobknot::io::{angle_csv, gradient_csv, potential_csv, read_knot, read_transform, trace_csv, write_knot};
use mobknot::{
    build_weight, energy_e_cosine, potential_v_cosine, run_flow, FlowConfig, HadamardLadder, KnotCurve, KnotError,
    MoebiusTransform, Preset, WeightKind,
};

#[derive(Parser)]
#[command(name = "mobknot", version, about = "Möbius-invariant knot energies and flows")]
struct Cli {
    /// JSON config with optional `check`, `flow` and `ladder` sections.
    #[arg(long, global = true, env = "MOBKNOT_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Knot JSON file, `-` for stdin, or `preset:NAME[:p1,p2,...]`.
    #[arg(long)]
    input: String,
    /// Write here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Resample the knot to this many grid points.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// EnergyReport JSON.
    Energy {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "cosine", value_parser = ["cosine", "fhw", "from-v", "hadamard"])]
        method: String,
    },
    /// CSV profile of V.
    Potential {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "cosine", value_parser = ["cosine", "hadamard"])]
        method: String,
    },
    /// CSV of the conformal angle over grid pairs.
    Angle {
        #[command(flatten)]
        common: Common,
    },
    /// CSV of G_E, or of G_E/Φ when a weight is given.
    Grad {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "pv", value_parser = ["pv", "hadamard"])]
        route: String,
        #[arg(long, value_parser = ["v3", "phi0", "psi-sin", "psi-acyclic", "conformal"])]
        weight: Option<String>,
    },
    /// Apply a transform JSON (or a seeded random word) to the knot.
    Transform {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        transform: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Run the invariance suite; exit status 0 iff every check passes.
    Check {
        /// Repeatable; defaults to an ellipse, a trefoil and a perturbed circle.
        #[arg(long)]
        input: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Descend along the weighted gradient; trace CSV plus optional snapshots.
    Flow {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        snapshots: Option<PathBuf>,
        #[arg(long, value_parser = ["v3", "phi0", "psi-sin", "psi-acyclic", "conformal"])]
        weight: Option<String>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    check: Option<serde_json::Value>,
    flow: FlowConfig,
    ladder: HadamardLadder,
}

impl Config {
    /// `check.ladder` falls back to the top-level ladder.
    fn check(&self) -> Result<CheckConfig, CliError> {
        let mut value = self.check.clone().unwrap_or_else(|| json!({}));
        if let Some(map) = value.as_object_mut() {
            map.entry("ladder").or_insert(serde_json::to_value(self.ladder).expect("ladder serializes"));
        }
        serde_json::from_value(value).map_err(|e| CliError::new("config", format!("check section: {e}")))
    }
}

#[derive(Debug)]
struct CliError {
    kind: &'static str,
    message: String,
}

impl CliError {
    fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }
}

impl From<KnotError> for CliError {
    fn from(e: KnotError) -> Self {
        let kind = match e {
            KnotError::SelfIntersection { .. } | KnotError::NotImmersed { .. } | KnotError::InvalidGridSize(_) => "invalid_knot",
            KnotError::ImageNotCompact { .. } => "not_compact",
            KnotError::StepFailure { .. } => "step_failure",
            KnotError::InvalidParameter(_) | KnotError::OutOfRange { .. } => "invalid_input",
            KnotError::Format(_) => "parse",
            _ => "numerical",
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::new("io", e.to_string())
    }
}

fn read_text(path: &str) -> Result<String, CliError> {
    if path == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| CliError::new("io", format!("{path}: {e}")))
}

fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::new("io", format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::new("config", format!("{}: {e}", p.display())))
        }
    }
}

const PRESET_GRID: usize = 256;

fn load_knot(source: &str, grid: Option<usize>) -> Result<KnotCurve<f64>, CliError> {
    let curve = if let Some(rest) = source.strip_prefix("preset:") {
        let (name, params) = rest.split_once(':').unwrap_or((rest, ""));
        let params: Vec<f64> = params
            .split(',')
            .filter(|p| !p.is_empty())
            .map(|p| p.trim().parse().map_err(|_| CliError::new("parse", format!("bad preset parameter '{p}'"))))
            .collect::<Result<_, _>>()?;
        Preset::from_name(name, &params)?.build(grid.unwrap_or(PRESET_GRID))?
    } else {
        let text = read_text(source)?;
        read_knot::<f64>(&text).map_err(|e| match e {
            KnotError::Format(m) => CliError::new("parse", format!("{source}: {m}")),
            other => other.into(),
        })?
    };
    match grid {
        Some(n) if n != curve.grid_size() => Ok(curve.with_grid_size(n)?),
        _ => Ok(curve),
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| CliError::new("io", format!("{}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn weight_kind(name: Option<&str>) -> Result<Option<WeightKind>, CliError> {
    Ok(name.map(WeightKind::from_name).transpose()?)
}

fn energy(common: &Common, method: &str, cfg: &Config) -> Result<(), CliError> {
    let f = load_knot(&common.input, common.grid)?.evaluate();
    let cosine = energy_e_cosine(&f).value;
    let (value, reference) = match method {
        "cosine" => (cosine, energy_e_fhw(&f).value),
        "fhw" => (energy_e_fhw(&f).value, cosine),
        "from-v" => (energy_e_from_v(&potential_v_cosine(&f), &f)?.value, cosine),
        _ => (energy_e_from_v(&potential_v_hadamard(&f, &cfg.ladder)?, &f)?.value, cosine),
    };
    let report = json!({
        "value": value,
        "method": method,
        "grid_size": f.len(),
        "cross_check": value - reference,
    });
    emit(common.output.as_deref(), &serde_json::to_string_pretty(&report).expect("report serializes"))
}

fn potential(common: &Common, method: &str, cfg: &Config) -> Result<(), CliError> {
    let f = load_knot(&common.input, common.grid)?.evaluate();
    let profile = match method {
        "cosine" => potential_v_cosine(&f),
        _ => potential_v_hadamard(&f, &cfg.ladder)?,
    };
    emit(common.output.as_deref(), &potential_csv(&f, &profile))
}

fn angle(common: &Common) -> Result<(), CliError> {
    let f = load_knot(&common.input, common.grid)?.evaluate();
    emit(common.output.as_deref(), &angle_csv(&AngleField::compute(&f)?))
}

fn grad(common: &Common, route: &str, weight: Option<&str>, cfg: &Config) -> Result<(), CliError> {
    let f = load_knot(&common.input, common.grid)?.evaluate();
    let g = gradient(&f, GradientRoute::from_name(route)?, &cfg.ladder)?;
    let field = match weight_kind(weight)? {
        None => g,
        Some(kind) => {
            let phi = build_weight(&kind, &f)?;
            let residual = g.route_residual.as_ref().map(|r| r.iter().zip(&phi.values).map(|(a, w)| a / w).collect());
            GradientField {
                g: weighted_gradient(&f, &g, &phi, CIRCLE_TOL)?,
                route_residual: residual,
                ..g
            }
        }
    };
    emit(common.output.as_deref(), &gradient_csv(&f, &field))
}

fn transform(common: &Common, path: Option<&Path>, seed: u64) -> Result<(), CliError> {
    let curve = load_knot(&common.input, common.grid)?;
    let t = match path {
        Some(p) => {
            let text = read_text(&p.to_string_lossy())?;
            read_transform::<f64>(&text).map_err(|e| match e {
                KnotError::Format(m) => CliError::new("parse", format!("{}: {m}", p.display())),
                other => other.into(),
            })?
        }
        None => MoebiusTransform::random_compact_preserving(seed, &curve.evaluate()),
    };
    emit(common.output.as_deref(), &write_knot(&t.apply_to_curve(&curve)?))
}

fn default_check_inputs() -> Vec<String> {
    ["preset:ellipse", "preset:trefoil", "preset:perturbed_circle"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn check(
    inputs: &[String],
    output: Option<&Path>,
    grid: Option<usize>,
    seed: Option<u64>,
    count: Option<usize>,
    cfg: &Config,
) -> Result<bool, CliError> {
    let mut check = cfg.check()?;
    if let Some(n) = grid {
        check.grid_size = n;
    }
    if let Some(s) = seed {
        check.seed = s;
    }
    if let Some(c) = count {
        check.count = c;
        check.equivariance_count = check.equivariance_count.min(c);
    }
    let inputs = if inputs.is_empty() { default_check_inputs() } else { inputs.to_vec() };
    let knots = inputs
        .iter()
        .map(|source| Ok((knot_label(source), load_knot(source, Some(check.grid_size))?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = run_checks(&knots, &check)?;
    emit(output, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    Ok(report.pass)
}

/// File stem or preset name, used as the prefix of check ids.
fn knot_label(source: &str) -> String {
    match source.strip_prefix("preset:") {
        Some(rest) => rest.split(':').next().unwrap_or(rest).to_string(),
        None => Path::new(source)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| source.to_string()),
    }
}

fn flow(common: &Common, snapshots: Option<&Path>, weight: Option<&str>, cfg: &Config) -> Result<(), CliError> {
    let curve = load_knot(&common.input, common.grid)?;
    let mut fc = cfg.flow.clone();
    if let Some(kind) = weight_kind(weight)? {
        fc.weight = kind;
    }
    if snapshots.is_some() && fc.snapshot_every == 0 {
        fc.snapshot_every = 10;
    }
    let trace = run_flow(&curve, &fc)?;
    if let Some(dir) = snapshots {
        fs::create_dir_all(dir).map_err(|e| CliError::new("io", format!("{}: {e}", dir.display())))?;
        for (step, c) in &trace.snapshots {
            fs::write(dir.join(format!("step_{step:05}.json")), write_knot(c))?;
        }
        fs::write(dir.join("final.json"), write_knot(&trace.final_curve))?;
    }
    emit(common.output.as_deref(), &trace_csv(&trace.records))
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let cfg = load_config(cli.config.as_deref())?;
    cfg.ladder.validate()?;
    match &cli.command {
        Command::Energy { common, method } => energy(common, method, &cfg)?,
        Command::Potential { common, method } => potential(common, method, &cfg)?,
        Command::Angle { common } => angle(common)?,
        Command::Grad { common, route, weight } => grad(common, route, weight.as_deref(), &cfg)?,
        Command::Transform { common, transform: t, seed } => transform(common, t.as_deref(), *seed)?,
        Command::Check {
            input,
            output,
            grid,
            seed,
            count,
        } => return check(input, output.as_deref(), *grid, *seed, *count, &cfg),
        Command::Flow {
            common,
            snapshots,
            weight,
        } => flow(common, snapshots.as_deref(), weight.as_deref(), &cfg)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let body = json!({ "error": { "kind": e.kind, "message": e.message } });
            eprintln!("{body}");
            ExitCode::from(2)
        }
    }
}
