//! `spdpow`: power-Euclidean tensor statistics from the command line.
//!
//! Exit codes: 0 on success, 1 on runtime or data errors, 2 on usage errors.

mod literal;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use spd_power::field::{
    self, estimate_alpha_map, generate_synthetic_field, load_field, normalize_subjects, save_field,
    smooth_alpha_profile, write_alpha_map_csv, write_profile_csv, FieldFormat, NeighborhoodSpec,
    SyntheticFieldSpec,
};
use spd_power::likelihood::AlphaGrid;
use spd_power::simulation::{run_coverage, CoverageReport, SimDesign};
use spd_power::{
    dist_log_euclidean, dist_power, dist_procrustes_power, format_sig, fractional_anisotropy,
    frechet_mean, interpolate, PowerParam, SymMatrix,
};

const SCHEMA_VERSION: u32 = 1;
const DIGITS: usize = 12;

#[derive(Debug, Parser)]
#[command(
    name = "spdpow",
    version,
    about = "Power-Euclidean statistics for diffusion tensors"
)]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,

    /// Write the result here instead of stdout (a directory for `fit`).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo coverage of the profile-likelihood interval for alpha.
    Simulate(SimulateArgs),
    /// Estimate an alpha map over ball neighbourhoods of a tensor field.
    Fit(FitArgs),
    /// Write a synthetic multi-subject lattice field drawn from the simulation model.
    SynthField(SynthArgs),
    /// Distances, means, anisotropy and interpolation of tensor literals.
    #[command(subcommand)]
    Compute(ComputeCommand),
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long, default_value_t = -0.1, allow_negative_numbers = true, value_parser = finite)]
    grid_lo: f64,
    #[arg(long, default_value_t = 0.7, allow_negative_numbers = true, value_parser = finite)]
    grid_hi: f64,
    #[arg(long, default_value_t = 0.02, value_parser = positive)]
    grid_step: f64,
    /// Log-likelihood drop defining the confidence interval.
    #[arg(long, default_value_t = 2.0, value_parser = nonnegative)]
    ci_drop: f64,
}

impl GridArgs {
    fn grid(&self) -> Result<AlphaGrid> {
        AlphaGrid::new(self.grid_lo, self.grid_hi, self.grid_step).map_err(usage)
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Voxels per subject.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    n_v: u32,
    /// Subjects.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    n_s: u32,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u32).range(1..))]
    reps: u32,
    #[arg(long, default_value_t = 0.3, allow_negative_numbers = true, value_parser = finite)]
    alpha_true: f64,
    #[arg(long, default_value_t = 0.02, value_parser = positive)]
    sigma2: f64,
    /// vech of the mean of X, comma separated.
    #[arg(long, default_value = "2,0,0,1,0,1", allow_hyphen_values = true)]
    mu: String,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Tensor field (CSV or JSON lines).
    #[arg(long, short)]
    input: PathBuf,
    /// Input format; guessed from the file extension by default.
    #[arg(long, value_enum)]
    input_format: Option<InputFormat>,
    #[command(flatten)]
    grid: GridArgs,
    /// Grid spacing in mm.
    #[arg(long, default_value_t = 2.0, value_parser = positive)]
    spacing: f64,
    /// Ball radius in mm.
    #[arg(long, default_value_t = 0.7, value_parser = positive)]
    radius: f64,
    /// Minimum voxels per subject in a ball.
    #[arg(long, default_value_t = 15, value_parser = clap::value_parser!(u32).range(1..))]
    n_v_min: u32,
    /// Grid origin `x,y,z` in mm.
    #[arg(long, default_value = "0,0,0", allow_hyphen_values = true)]
    offset: String,
    /// Divide each subject by the norm of its mean tensor.
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    normalize: Toggle,
    /// Half-width of the running-mean smoother, in neighbourhoods.
    #[arg(long, default_value_t = 2)]
    smooth_bandwidth: usize,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 9, value_parser = clap::value_parser!(u32).range(1..))]
    subjects: u32,
    /// Lattice pitch in mm.
    #[arg(long, default_value_t = 0.4, value_parser = positive)]
    pitch: f64,
    /// Lattice covers [0, extent] mm on each axis.
    #[arg(long, default_value_t = 10.0, value_parser = nonnegative)]
    extent: f64,
    #[arg(long, default_value_t = 0.3, allow_negative_numbers = true, value_parser = finite)]
    alpha: f64,
    #[arg(long, default_value_t = 0.02, value_parser = positive)]
    sigma2: f64,
    #[arg(long, default_value = "2,0,0,1,0,1", allow_hyphen_values = true)]
    mu: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    EuclideanPower,
    LogEuclidean,
    ProcrustesPower,
}

#[derive(Debug, Args)]
struct AlphaArg {
    /// Power of the metric; 0 selects the log-Euclidean branch.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true, value_parser = finite)]
    alpha: f64,
}

#[derive(Debug, Subcommand)]
enum ComputeCommand {
    /// Distance between two tensors.
    Dist {
        #[command(flatten)]
        alpha: AlphaArg,
        #[arg(long, value_enum, default_value_t = Metric::EuclideanPower)]
        metric: Metric,
        #[arg(num_args = 2, required = true)]
        tensors: Vec<String>,
    },
    /// Frechet mean of tensors given inline or in a file (one per line).
    Mean {
        #[command(flatten)]
        alpha: AlphaArg,
        #[arg(long)]
        file: Option<PathBuf>,

        tensors: Vec<String>,
    },
    /// Power fractional anisotropy.
    Fa {
        #[command(flatten)]
        alpha: AlphaArg,

        tensor: String,
    },
    /// Point at fraction t between two tensors.
    Interp {
        #[command(flatten)]
        alpha: AlphaArg,
        #[arg(long, value_parser = unit_interval)]
        t: f64,
        #[arg(num_args = 2, required = true)]
        tensors: Vec<String>,
    },
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format!("{s:?} is not a number"))
}

fn finite(s: &str) -> std::result::Result<f64, String> {
    let v = parse_f64(s)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("must be finite".into())
    }
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let v = finite(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err("must be positive".into())
    }
}

fn nonnegative(s: &str) -> std::result::Result<f64, String> {
    let v = finite(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err("must be nonnegative".into())
    }
}

fn unit_interval(s: &str) -> std::result::Result<f64, String> {
    let v = finite(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err("must lie in [0, 1]".into())
    }
}

/// An error in the arguments that clap could not catch on its own.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: impl std::fmt::Display) -> anyhow::Error {
    anyhow::Error::new(UsageError(e.to_string()))
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| finite(t).map_err(|e| usage(format!("{what}: {t:?} {e}"))))
        .collect()
}

fn num(x: f64) -> String {
    format_sig(x, DIGITS)
}

/// JSON number carrying the same rounding as the text output.
fn jnum(x: f64) -> Value {
    num(x)
        .parse::<f64>()
        .ok()
        .and_then(serde_json::Number::from_f64)
        .map_or(Value::Null, Value::Number)
}

fn jmatrix(s: &SymMatrix) -> Value {
    Value::Array(
        s.to_rows()
            .iter()
            .map(|row| Value::Array(row.iter().map(|&x| jnum(x)).collect()))
            .collect(),
    )
}

fn matrix_text(s: &SymMatrix) -> String {
    s.to_rows()
        .iter()
        .map(|row| row.iter().map(|&x| num(x)).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

fn envelope(command: &str, result: Value) -> String {
    let doc = json!({ "schema_version": SCHEMA_VERSION, "command": command, "result": result });
    serde_json::to_string_pretty(&doc).expect("serialisable") + "\n"
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let design = SimDesign {
        m: 3,
        mu: parse_list(&a.mu, "--mu")?,
        sigma2: a.sigma2,
        alpha_true: a.alpha_true,
        n_v: a.n_v as usize,
        n_s: a.n_s as usize,
        grid: a.grid.grid()?,
        ci_drop: a.grid.ci_drop,
        replications: a.reps as usize,
        seed: cli.seed,
    };
    design.validate().map_err(usage)?;
    let report = run_coverage(&design)?;
    let text = match cli.format {
        OutputFormat::Csv => format!(
            "{}\n{}\n",
            CoverageReport::CSV_HEADER,
            coverage_row(&report)
        ),
        OutputFormat::Json => {
            let mut v = report.to_json();
            v["coverage"] = jnum(report.coverage);
            v["mc_stderr"] = jnum(report.mc_stderr);
            envelope("simulate", v)
        }
    };
    emit(cli.output.as_deref(), &text)
}

fn coverage_row(r: &CoverageReport) -> String {
    let d = &r.design;
    format!(
        "{},{},{},{},{},{},{}",
        d.n_v,
        d.n_s,
        d.replications,
        num(r.coverage),
        num(r.mc_stderr),
        r.failures,
        d.seed
    )
}

fn cmd_fit(cli: &Cli, a: &FitArgs) -> Result<()> {
    let grid = a.grid.grid()?;
    let offset = parse_list(&a.offset, "--offset")?;
    let offset: [f64; 3] = offset
        .try_into()
        .map_err(|_| usage("--offset needs three comma-separated values"))?;
    let spec = NeighborhoodSpec {
        spacing: a.spacing,
        radius: a.radius,
        n_v_min: a.n_v_min as usize,
        offset,
    };
    let format = match a.input_format {
        Some(InputFormat::Csv) => FieldFormat::Csv,
        Some(InputFormat::Jsonl) => FieldFormat::JsonLines,
        None => FieldFormat::from_path(&a.input),
    };
    let mut data =
        load_field(&a.input, format).with_context(|| format!("reading {}", a.input.display()))?;
    if a.normalize == Toggle::On {
        data = normalize_subjects(&data)?;
    }
    let entries = estimate_alpha_map(&data, &grid, a.grid.ci_drop, &spec)?;
    let profile = smooth_alpha_profile(&entries, a.smooth_bandwidth);

    let mut map_csv = Vec::new();
    write_alpha_map_csv(&mut map_csv, &entries)?;
    let mut profile_csv = Vec::new();
    write_profile_csv(&mut profile_csv, &profile)?;

    let dir = cli.output.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let map_path = dir.join("alpha_map.csv");
    let profile_path = dir.join("alpha_profile.csv");
    fs::write(&map_path, map_csv)
        .with_context(|| format!("cannot write {}", map_path.display()))?;
    fs::write(&profile_path, profile_csv)
        .with_context(|| format!("cannot write {}", profile_path.display()))?;

    let fitted: Vec<f64> = entries.iter().filter_map(|e| e.alpha_hat()).collect();
    let lo = fitted.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = fitted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let failed = entries.len() - fitted.len();
    match cli.format {
        OutputFormat::Csv => {
            let range = if fitted.is_empty() {
                "none".to_string()
            } else {
                format!("[{}, {}]", num(lo), num(hi))
            };
            println!(
                "neighbourhoods: {} (fitted {}, failed {}), alpha_hat range {range}, smoother running_mean bandwidth {}",
                entries.len(),
                fitted.len(),
                failed,
                a.smooth_bandwidth
            );
        }
        OutputFormat::Json => {
            let result = json!({
                "neighborhoods": entries.len(),
                "fitted": fitted.len(),
                "failed": failed,
                "alpha_hat_min": if fitted.is_empty() { Value::Null } else { jnum(lo) },
                "alpha_hat_max": if fitted.is_empty() { Value::Null } else { jnum(hi) },
                "normalized": a.normalize == Toggle::On,
                "smoother": { "kind": "running_mean", "bandwidth": a.smooth_bandwidth },
                "alpha_map": map_path.display().to_string(),
                "profile": profile_path.display().to_string(),
            });
            print!("{}", envelope("fit", result));
        }
    }
    Ok(())
}

fn cmd_synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let spec = SyntheticFieldSpec {
        n_subjects: a.subjects as usize,
        pitch: a.pitch,
        extent: a.extent,
        mu: parse_list(&a.mu, "--mu")?,
        sigma2: a.sigma2,
        alpha: a.alpha,
        seed: cli.seed,
    };
    if spec.mu.len() != 6 {
        return Err(usage("--mu needs six values (vech of a 3x3 matrix)"));
    }
    let data = generate_synthetic_field(&spec)?;
    let format = match cli.format {
        OutputFormat::Csv => FieldFormat::Csv,
        OutputFormat::Json => FieldFormat::JsonLines,
    };
    match &cli.output {
        Some(path) => save_field(path, &data, format)?,
        None => field::write_field(std::io::stdout().lock(), &data, format)?,
    }
    Ok(())
}

fn cmd_compute(cli: &Cli, c: &ComputeCommand) -> Result<()> {
    let (op, scalar, matrix, extra) = match c {
        ComputeCommand::Dist {
            alpha,
            metric,
            tensors,
        } => {
            let t = literal::parse_tensors(tensors)?;
            let p = PowerParam::new(alpha.alpha)?;
            match metric {
                Metric::EuclideanPower => {
                    ("dist", Some(dist_power(&t[0], &t[1], p)?), None, json!({}))
                }
                Metric::LogEuclidean => (
                    "dist",
                    Some(dist_log_euclidean(&t[0], &t[1])?),
                    None,
                    json!({}),
                ),
                Metric::ProcrustesPower => {
                    if p.is_log() {
                        return Err(usage("the Procrustes power metric needs a nonzero --alpha"));
                    }
                    let fit = dist_procrustes_power(&t[0], &t[1], p)?;
                    let rotation: Vec<Value> = fit
                        .rotation
                        .row_iter()
                        .map(|r| Value::Array(r.iter().map(|&x| jnum(x)).collect()))
                        .collect();
                    (
                        "dist",
                        Some(fit.distance),
                        None,
                        json!({ "rotation": rotation }),
                    )
                }
            }
        }
        ComputeCommand::Mean {
            alpha,
            file,
            tensors,
        } => {
            let mut texts = tensors.clone();
            if let Some(path) = file {
                texts.extend(literal::read_tensor_file(path)?);
            }
            if texts.is_empty() {
                return Err(usage("mean needs at least one tensor"));
            }
            let t = literal::parse_tensors(&texts)?;
            let r = frechet_mean(&t, PowerParam::new(alpha.alpha)?)?;
            ("mean", None, Some(r.mean), json!({ "n": r.n }))
        }
        ComputeCommand::Fa { alpha, tensor } => {
            let t = literal::parse_tensors(std::slice::from_ref(tensor))?;
            (
                "fa",
                Some(fractional_anisotropy(&t[0], PowerParam::new(alpha.alpha)?)?),
                None,
                json!({}),
            )
        }
        ComputeCommand::Interp { alpha, t, tensors } => {
            let s = literal::parse_tensors(tensors)?;
            (
                "interp",
                None,
                Some(interpolate(
                    &s[0],
                    &s[1],
                    *t,
                    PowerParam::new(alpha.alpha)?,
                )?),
                json!({}),
            )
        }
    };
    let text = match cli.format {
        OutputFormat::Csv => match (&scalar, &matrix) {
            (Some(x), _) => format!("{}\n", num(*x)),
            (_, Some(m)) => matrix_text(m),
            _ => unreachable!(),
        },
        OutputFormat::Json => {
            let mut v = json!({ "op": op });
            if let Some(x) = scalar {
                v["value"] = jnum(x);
            }
            if let Some(m) = &matrix {
                v["matrix"] = jmatrix(m);
            }
            if let Value::Object(map) = extra {
                v.as_object_mut().unwrap().extend(map);
            }
            envelope("compute", v)
        }
    };
    emit(cli.output.as_deref(), &text)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .map_err(|e| anyhow!("cannot start thread pool: {e}"))?;
    }
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Fit(a) => cmd_fit(cli, a),
        Command::SynthField(a) => cmd_synth(cli, a),
        Command::Compute(c) => cmd_compute(cli, c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
