//! `mfmp`: minimum reflux of multi-feed, multi-product columns from JSON
//! specification files.
//!
//! Exit status: 0 on success, 1 on usage, input or I/O errors, 2 when the
//! column model is infeasible for the requested analysis.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use mfmp::column::Column;
use mfmp::export::{canonical_json, profile_csv, ternary_export, SCHEMA_VERSION};
use mfmp::minreflux::{vreb_min_column, MinRefluxError, MinRefluxOptions, MinRefluxResult};
use mfmp::optimizer::{optimize_distribution, FreeSplitSpec, OptimizationStatus, SearchConfig};
use mfmp::simulator::{min_reflux_by_bisection, simulate_column, OracleConfig};
use mfmp::specfile::{bundled, bundled_examples, SpecFile};
use mfmp::underwood::decomposition_min_reflux;

#[derive(Debug, Parser)]
#[command(
    name = "mfmp",
    version,
    about = "Minimum reflux of multi-feed, multi-product distillation columns"
)]
struct Cli {
    /// Write the bundled example specifications into this directory.
    #[arg(long, value_name = "DIR", global = true)]
    seed_docs: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
    Svg,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Specification file, or the name of a bundled example.
    input: String,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Shortcut minimum reboiler vapor and reflux ratio.
    Minreflux {
        #[command(flatten)]
        common: Common,
        /// Binding tolerance in root units (default 1e-7 of the volatility span).
        #[arg(long)]
        tol_bind: Option<f64>,
        /// Also run the stage-by-stage bisection oracle.
        #[arg(long)]
        oracle: bool,
        /// Stages per section for the oracle.
        #[arg(long, default_value_t = 50)]
        stages: usize,
    },
    /// Minimum reboiler vapor over the free product splits of the file.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Grid intervals per free split.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// Binding tolerance in root units (default 1e-7 of the volatility span).
        #[arg(long)]
        tol_bind: Option<f64>,
    },
    /// Column decomposition baseline.
    Decompose {
        #[command(flatten)]
        common: Common,
    },
    /// Stage-by-stage simulation at a given reflux ratio.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Reflux ratio L/D at the top of the column.
        #[arg(long)]
        reflux: f64,
        /// Stages per section.
        #[arg(long, default_value_t = 50)]
        stages: usize,
    },
    /// Pinch simplices and profile of a three-component column.
    TernaryExport {
        #[command(flatten)]
        common: Common,
        /// Stages per section of the profile simulated at the shortcut minimum
        /// reflux; 0 leaves the profile out.
        #[arg(long, default_value_t = 50)]
        stages: usize,
        /// Reflux ratio of the profile; the shortcut minimum when omitted.
        #[arg(long)]
        reflux: Option<f64>,
    },
    /// Check a specification file.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    /// Usage, input or I/O problem.
    Usage(anyhow::Error),
    /// The model has no solution.
    Infeasible(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(2)
        }
    }
}

/// `MFMP_THREADS` caps the worker pool.
fn configure_threads() -> anyhow::Result<()> {
    let Ok(text) = std::env::var("MFMP_THREADS") else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| anyhow!("MFMP_THREADS must be a positive integer, got {text:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    if let Some(dir) = &cli.seed_docs {
        seed_docs(dir)?;
    }
    let Some(command) = cli.command else {
        if cli.seed_docs.is_some() {
            return Ok(());
        }
        return Err(Failure::Usage(anyhow!("no command given; see mfmp --help")));
    };
    match command {
        Command::Minreflux {
            common,
            tol_bind,
            oracle,
            stages,
        } => minreflux(&common, tol_bind, oracle.then_some(stages)),
        Command::Optimize { common, grid, tol_bind } => optimize(&common, grid, tol_bind),
        Command::Decompose { common } => decompose(&common),
        Command::Simulate { common, reflux, stages } => simulate(&common, reflux, stages),
        Command::TernaryExport { common, stages, reflux } => ternary(&common, stages, reflux),
        Command::Validate { common } => validate(&common),
    }
}

fn seed_docs(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, text) in bundled_examples() {
        let path = dir.join(format!("{name}.json"));
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Reads a specification from a path, falling back to a bundled example
/// named by the argument or by the path's file stem.
fn load(input: &str) -> anyhow::Result<SpecFile> {
    let path = Path::new(input);
    if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {input}"))?;
        return SpecFile::from_json(&text).with_context(|| format!("parsing {input}"));
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(input);
    bundled(input)
        .or_else(|| bundled(stem))
        .ok_or_else(|| anyhow!("{input}: no such file or bundled example"))
}

fn column_of(spec: &SpecFile) -> anyhow::Result<Column> {
    spec.column()
        .map_err(|e| anyhow!("invalid specification {}: {e}", spec.name))
}

fn check_range(name: &str, value: f64, lo: f64, hi: f64) -> anyhow::Result<()> {
    if !(value >= lo && value <= hi) {
        bail!("--{name} must lie in [{lo}, {hi}], got {value}");
    }
    Ok(())
}

fn options(tol_bind: Option<f64>) -> anyhow::Result<MinRefluxOptions> {
    if let Some(t) = tol_bind {
        check_range("tol-bind", t, 0.0, 1e-2)?;
    }
    let mut opts = MinRefluxOptions::default();
    opts.feasibility.bind_tol = tol_bind;
    Ok(opts)
}

fn check_stages(stages: usize) -> anyhow::Result<()> {
    if !(1..=1000).contains(&stages) {
        bail!("--stages must lie in [1, 1000], got {stages}");
    }
    Ok(())
}

fn envelope<T: Serialize>(command: &str, spec: &SpecFile, result: &T) -> anyhow::Result<Value> {
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "spec": spec.name,
        "result": serde_json::to_value(result)?,
    }))
}

fn emit(common: &Common, text: &str) -> anyhow::Result<()> {
    match &common.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(common: &Common, doc: &Value) -> anyhow::Result<()> {
    emit(common, &canonical_json(doc)?)
}

fn unsupported(common: &Common, command: &str) -> Failure {
    Failure::Usage(anyhow!(
        "--format {} is not available for {command}",
        common.format.to_possible_value().expect("visible format").get_name()
    ))
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b) / b
}

fn minreflux(common: &Common, tol_bind: Option<f64>, oracle: Option<usize>) -> Outcome {
    let spec = load(&common.input)?;
    let column = column_of(&spec)?;
    let opts = options(tol_bind)?;
    if let Some(n) = oracle {
        check_stages(n)?;
    }
    let result = match vreb_min_column(column.clone(), &opts) {
        Ok(r) => r,
        Err(MinRefluxError::NoFeasibleCandidate { count, candidates }) => {
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "command": "minreflux",
                "spec": spec.name,
                "status": "infeasible",
                "candidates": candidates,
            });
            if common.format == Format::Json {
                emit_json(common, &doc)?;
            }
            return Err(Failure::Infeasible(format!(
                "no candidate yields a feasible column ({count} evaluated)"
            )));
        }
        Err(e) => return Err(Failure::Usage(anyhow!(e))),
    };
    let oracle = match oracle {
        Some(n) => {
            let cfg = OracleConfig {
                stages_per_section: n,
                ..OracleConfig::default()
            };
            Some(min_reflux_by_bisection(&column, &cfg).map_err(|e| Failure::Infeasible(e.to_string()))?)
        }
        None => None,
    };
    let reference = spec.reference.clone().unwrap_or_default();
    match common.format {
        Format::Json => {
            let mut doc = envelope("minreflux", &spec, &result)?;
            doc["summary"] = json!({
                "v_reb_min": result.v_reb_min,
                "r_min": result.r_min,
                "controlling_stream": result.controlling_name,
                "reference_r_min": reference.r_min,
                "relative_difference": reference.r_min.map(|r| relative(result.r_min, r)),
            });
            if let Some(o) = &oracle {
                doc["oracle"] = json!({
                    "r_min": o.r_min,
                    "v_reb_min": o.v_reb_min,
                    "r_feasible": o.r_feasible,
                    "r_infeasible": o.r_infeasible,
                    "simulations": o.simulations,
                    "not_converged": o.not_converged,
                    "stages_per_section": o.profile.stages_per_section,
                });
            }
            emit_json(common, &doc)?;
        }
        Format::Text => {
            let mut text = summary_text(&spec, &result);
            if let Some(r) = reference.r_min {
                text.push_str(&format!(
                    "reference R_min      {r:.4} ({:+.2}%)\n",
                    100.0 * relative(result.r_min, r)
                ));
            }
            if let Some(o) = &oracle {
                text.push_str(&format!(
                    "oracle R_min         {:.4} ({} stages/section, V_reb {:.2} mol/s)\n",
                    o.r_min, o.profile.stages_per_section, o.v_reb_min
                ));
            }
            emit(common, &text)?;
        }
        _ => return Err(unsupported(common, "minreflux")),
    }
    Ok(())
}

fn summary_text(spec: &SpecFile, r: &MinRefluxResult) -> String {
    format!(
        "{}\nV_reb,min            {:.2} mol/s\nR_min                {:.4}\ncontrolling stream   {}\nbinding root         rho_{} = {:.6}\n",
        spec.name,
        r.v_reb_min,
        r.r_min,
        r.controlling_name,
        r.binding.rho_index,
        r.binding.rho
    )
}

fn optimize(common: &Common, grid: usize, tol_bind: Option<f64>) -> Outcome {
    let spec = load(&common.input)?;
    if !(1..=4096).contains(&grid) {
        return Err(Failure::Usage(anyhow!("--grid must lie in [1, 4096], got {grid}")));
    }
    let fs = FreeSplitSpec::from_specfile(&spec).map_err(|e| anyhow!(e))?;
    let config = SearchConfig {
        grid,
        minreflux: options(tol_bind)?,
        ..SearchConfig::default()
    };
    let result = optimize_distribution(&fs, &config);
    match common.format {
        Format::Json => emit_json(common, &envelope("optimize", &spec, &result)?)?,
        Format::Text => {
            let mut text = format!("{}\nstatus               {:?}\n", spec.name, result.status);
            if let (Some(v), Some(r)) = (result.v_reb_min, result.r_min) {
                text.push_str(&format!(
                    "V_reb,min            {v:.2} mol/s\nR_min                {r:.4}\n"
                ));
            }
            for p in &result.distribution {
                let flows: Vec<String> = p.flows.iter().map(|f| format!("{f:.2}")).collect();
                text.push_str(&format!("{:<20} {}\n", p.name, flows.join(", ")));
            }
            emit(common, &text)?;
        }
        _ => return Err(unsupported(common, "optimize")),
    }
    if result.status == OptimizationStatus::Infeasible {
        return Err(Failure::Infeasible("no free split gives a feasible column".into()));
    }
    Ok(())
}

fn decompose(common: &Common) -> Outcome {
    let spec = load(&common.input)?;
    let column = column_of(&spec)?;
    let result = decomposition_min_reflux(&column).map_err(|e| Failure::Infeasible(e.to_string()))?;
    let mut warnings: Vec<String> = result.columns.iter().flat_map(|c| c.warnings.clone()).collect();
    let reference = spec.reference.clone().unwrap_or_default().r_min;
    if let Some(r) = reference {
        if result.reflux > r * (1.0 + 1e-3) {
            warnings.push(format!(
                "decomposition overestimates the minimum reflux {r:.4} by a factor of {:.3}",
                result.reflux / r
            ));
        } else if result.reflux < r * (1.0 - 1e-3) {
            warnings.push(format!(
                "decomposition underestimates the minimum reflux {r:.4} by a factor of {:.3}",
                result.reflux / r
            ));
        }
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    match common.format {
        Format::Json => {
            let mut doc = envelope("decompose", &spec, &result)?;
            doc["warnings"] = json!(warnings);
            doc["reference_r_min"] = json!(reference);
            emit_json(common, &doc)?;
        }
        Format::Text => {
            let mut text = format!(
                "{}\ndecomposition R      {:.4} (controlled by {})\n",
                spec.name, result.reflux, result.controlling_feed
            );
            for c in &result.columns {
                text.push_str(&format!("  {:<18} R {:.4}\n", c.feed, c.column_reflux));
            }
            emit(common, &text)?;
        }
        _ => return Err(unsupported(common, "decompose")),
    }
    Ok(())
}

fn simulate(common: &Common, reflux: f64, stages: usize) -> Outcome {
    let spec = load(&common.input)?;
    let column = column_of(&spec)?;
    check_range("reflux", reflux, 1e-6, 1e4)?;
    check_stages(stages)?;
    let profile = simulate_column(&column, reflux, stages).map_err(|e| Failure::Infeasible(e.to_string()))?;
    match common.format {
        Format::Json => emit_json(common, &envelope("simulate", &spec, &profile)?)?,
        Format::Csv => emit(common, &profile_csv(&column, &profile))?,
        Format::Text => {
            let names = column.components().names();
            let mut text = format!(
                "{}\nR {:.4}, {} stages/section, V_reb {:.2} mol/s, {} iterations\n",
                spec.name,
                reflux,
                stages,
                profile.v_reb(),
                profile.iterations
            );
            for p in &profile.products {
                let parts: Vec<String> = names
                    .iter()
                    .zip(&p.composition)
                    .map(|(n, x)| format!("{n} {:.4}%", 100.0 * x))
                    .collect();
                text.push_str(&format!("{:<20} {}\n", p.name, parts.join(", ")));
            }
            emit(common, &text)?;
        }
        Format::Svg => return Err(unsupported(common, "simulate")),
    }
    Ok(())
}

fn ternary(common: &Common, stages: usize, reflux: Option<f64>) -> Outcome {
    let spec = load(&common.input)?;
    let column = column_of(&spec)?;
    let result = vreb_min_column(column.clone(), &MinRefluxOptions::default())
        .map_err(|e| Failure::Infeasible(e.to_string()))?;
    let profile = if stages == 0 {
        None
    } else {
        check_stages(stages)?;
        let r = reflux.unwrap_or(result.r_min);
        check_range("reflux", r, 1e-6, 1e4)?;
        Some(simulate_column(&column, r, stages).map_err(|e| Failure::Infeasible(e.to_string()))?)
    };
    let doc = ternary_export(&column, &result, profile.as_ref()).map_err(|e| Failure::Usage(anyhow!(e)))?;
    match common.format {
        Format::Json => emit(common, &canonical_json(&doc).map_err(|e| anyhow!(e))?)?,
        Format::Svg => emit(common, &doc.to_svg())?,
        _ => return Err(unsupported(common, "ternary-export")),
    }
    Ok(())
}

fn validate(common: &Common) -> Outcome {
    let spec = load(&common.input)?;
    let column = column_of(&spec)?;
    if spec.free_splits.is_some() {
        FreeSplitSpec::from_specfile(&spec).map_err(|e| anyhow!("invalid free splits: {e}"))?;
    }
    let names: Vec<&str> = column.streams().iter().map(|s| s.name.as_str()).collect();
    match common.format {
        Format::Json => emit_json(
            common,
            &json!({
                "schema_version": SCHEMA_VERSION,
                "command": "validate",
                "spec": spec.name,
                "valid": true,
                "components": column.components().names(),
                "streams": names,
                "sections": column.section_count(),
            }),
        )?,
        Format::Text => emit(
            common,
            &format!(
                "{}: valid, {} components, {} sections, streams {}\n",
                spec.name,
                column.count(),
                column.section_count(),
                names.join(", ")
            ),
        )?,
        _ => return Err(unsupported(common, "validate")),
    }
    Ok(())
}
