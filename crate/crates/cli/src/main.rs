//! `xaibench` command-line runner.
//!
//! Exit codes: 0 success, 2 configuration or argument error, 3 runtime error.
//! Every command validates its configuration and computes all outputs in
//! memory before writing anything, then writes the outputs and a
//! `manifest.json` under the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use xaibench::config::{ExperimentConfig, OutputFormat, VERSION};
use xaibench::datagen::{oracle, sample};
use xaibench::evalmetrics::{global_attribution, local_attribution, run_benchmark};
use xaibench::faithfulness::{ablation_drop, aopc, deletion_curve};
use xaibench::{Attribution64, GeneratorSpec64, LinearModel64};

type Config = ExperimentConfig<f64>;

#[derive(Parser)]
#[command(
    name = "xaibench",
    version,
    about = "Suppressor-variable benchmark for feature attribution methods"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample datasets and write them as CSV with a JSON sidecar.
    Generate(Common),
    /// Run the attribution benchmark and write the report.
    Benchmark(Common),
    /// Write the scatter data and Bayes-optimal boundaries behind the two-panel figure.
    Figure1(Common),
    /// Attribute one model at one point with every configured method.
    Attribute(Common),
    /// Deletion curves and single-feature ablation drops.
    Ablate(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment configuration; built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Base seed; overrides `base_seed` from the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output formats; repeat or comma-separate. Overrides `formats`.
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Vec<Format>,
    /// Sample size; overrides `n` from the config.
    #[arg(long, value_name = "N")]
    n: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Md,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Md => OutputFormat::Md,
        }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<xaibench::Error> for Failure {
    fn from(e: xaibench::Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

/// Files produced by a command, held in memory until everything succeeded.
#[derive(Default)]
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    fn add_json<S: Serialize>(&mut self, name: &str, value: &S) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.add(name, text);
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    library_version: &'a str,
    config_path: Option<String>,
    config_file_sha256: Option<String>,
    /// Hash of the effective configuration below, after command-line overrides.
    config_sha256: String,
    config: &'a Config,
    seeds: Vec<u64>,
    outputs: Vec<&'a str>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

struct Loaded {
    config: Config,
    raw: Option<Vec<u8>>,
    out_dir: PathBuf,
}

fn load(args: &Common) -> CliResult<Loaded> {
    let (mut config, raw) = match &args.config {
        Some(path) => {
            let raw = fs::read(path)
                .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
            let text = std::str::from_utf8(&raw)
                .map_err(|e| Failure::Config(format!("config {} is not UTF-8: {e}", path.display())))?;
            (Config::from_json_str(text)?, Some(raw))
        }
        None => (Config::default(), None),
    };
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    if let Some(n) = args.n {
        config.n = n;
    }
    if !args.format.is_empty() {
        let mut formats: Vec<OutputFormat> = args.format.iter().map(|&f| f.into()).collect();
        formats.sort();
        formats.dedup();
        config.formats = formats;
    }
    config.validate()?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Loaded { config, raw, out_dir })
}

fn write_all(command: &str, args: &Common, loaded: &Loaded, outputs: &Outputs) -> CliResult<()> {
    let config_json = serde_json::to_vec(&loaded.config)?;
    let manifest = Manifest {
        command,
        library_version: VERSION,
        config_path: args.config.as_ref().map(|p| p.display().to_string()),
        config_file_sha256: loaded.raw.as_deref().map(sha256_hex),
        config_sha256: sha256_hex(&config_json),
        config: &loaded.config,
        seeds: loaded.config.seed_list(),
        outputs: outputs.files.iter().map(|(name, _)| name.as_str()).collect(),
    };
    let mut manifest_json = serde_json::to_string_pretty(&manifest)?;
    manifest_json.push('\n');

    let dir = &loaded.out_dir;
    fs::create_dir_all(dir)
        .map_err(|e| Failure::Runtime(format!("cannot create output directory {}: {e}", dir.display())))?;
    for (name, bytes) in &outputs.files {
        write_file(dir, name, bytes)?;
    }
    write_file(dir, "manifest.json", manifest_json.as_bytes())
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// `name.ext` for a single spec, `name_<i>.ext` otherwise.
fn per_spec(name: &str, ext: &str, i: usize, count: usize) -> String {
    if count == 1 {
        format!("{name}.{ext}")
    } else {
        format!("{name}_{i}.{ext}")
    }
}

fn generate(cfg: &Config) -> CliResult<Outputs> {
    let mut out = Outputs::default();
    let seed = cfg.base_seed;
    for (i, spec) in cfg.specs.iter().enumerate() {
        let data = sample(spec, cfg.n, seed)?;
        if cfg.wants(OutputFormat::Csv) {
            let mut csv = Vec::new();
            data.write_csv(&mut csv)?;
            out.add(per_spec("data", "csv", i, cfg.specs.len()), csv);
        }
        out.add_json(&per_spec("data", "json", i, cfg.specs.len()), &data.metadata())?;
    }
    Ok(out)
}

fn benchmark(cfg: &Config) -> CliResult<Outputs> {
    let report = run_benchmark(&cfg.specs, &cfg.methods, cfg.n, &cfg.seed_list(), &cfg.benchmark)?;
    let mut out = Outputs::default();
    if cfg.wants(OutputFormat::Json) {
        out.add_json("report.json", &report)?;
    }
    if cfg.wants(OutputFormat::Md) {
        out.add("report.md", report.to_markdown());
    }
    if cfg.wants(OutputFormat::Csv) {
        for &method in &cfg.methods {
            let mut csv = String::from("spec,step,accuracy_mean,accuracy_std\n");
            for (s, spec) in report.specs.iter().enumerate() {
                let Some(m) = spec.methods.iter().find(|m| m.method == method) else {
                    continue;
                };
                for (step, stat) in m.deletion_curve.iter().enumerate() {
                    let _ = writeln!(csv, "{s},{step},{},{}", stat.mean, stat.std);
                }
            }
            out.add(format!("curve_{}.csv", method.name()), csv);
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct Boundary {
    c: f64,
    s1_sq: f64,
    s2_sq: f64,
    weights: Vec<f64>,
    bias: f64,
    /// `x2 = slope * x1 + intercept`; absent when the boundary is vertical.
    slope: Option<f64>,
    intercept: Option<f64>,
    /// `x1` of a vertical boundary.
    vertical_x1: Option<f64>,
    accuracy: f64,
}

fn figure1(cfg: &Config) -> CliResult<Outputs> {
    if cfg.specs.len() != 1 {
        return Err(Failure::Config(
            "specs: figure1 takes exactly one example_a spec".into(),
        ));
    }
    let (s1_sq, s2_sq, c) = match cfg.specs[0] {
        GeneratorSpec64::ExampleA { s1_sq, s2_sq, c } => (s1_sq, s2_sq, c),
        ref other => {
            return Err(Failure::Config(format!(
                "specs[0]: figure1 requires an example_a spec, got {}",
                other.variant_name()
            )))
        }
    };
    let mut out = Outputs::default();
    let mut boundaries = Vec::new();
    let panels = if c == 0.0 { vec![c] } else { vec![c, 0.0] };
    for c in panels {
        let spec = GeneratorSpec64::example_a(s1_sq, s2_sq, c)?;
        let data = sample(&spec, cfg.n, cfg.base_seed)?;
        let mut csv = Vec::new();
        data.write_csv(&mut csv)?;
        out.add(format!("scatter_c{c}.csv"), csv);

        let model = oracle(&spec)?.model();
        let (w, b) = (model.weights(), model.bias());
        let vertical = w[1].abs() <= f64::EPSILON * w[0].abs();
        boundaries.push(Boundary {
            c,
            s1_sq,
            s2_sq,
            weights: w.to_vec(),
            bias: b,
            slope: (!vertical).then(|| -w[0] / w[1]),
            intercept: (!vertical).then(|| -b / w[1]),
            vertical_x1: vertical.then(|| -b / w[0]),
            accuracy: xaibench::models::accuracy(&model, &data)?,
        });
    }
    out.add_json("boundary.json", &boundaries)?;
    Ok(out)
}

#[derive(Serialize)]
struct PointAttribution<'a> {
    spec: String,
    seed: u64,
    n: usize,
    model: &'a LinearModel64,
    point: &'a [f64],
    decision_score: f64,
    attributions: &'a [Attribution64],
}

fn attribute(cfg: &Config) -> CliResult<Outputs> {
    let spec = &cfg.specs[0];
    let data = sample(spec, cfg.n, cfg.base_seed)?;
    let model = cfg.benchmark.model.build(spec, &data)?;
    let point = match &cfg.point {
        Some(p) => p.clone(),
        None => data.features().row(0).to_vec(),
    };
    let attributions = cfg
        .methods
        .iter()
        .map(|&m| local_attribution(m, &model, spec, &data, &point, &cfg.benchmark))
        .collect::<xaibench::Result<Vec<_>>>()?;

    let mut out = Outputs::default();
    if cfg.wants(OutputFormat::Json) {
        out.add_json(
            "attribution.json",
            &PointAttribution {
                spec: spec.label(),
                seed: cfg.base_seed,
                n: cfg.n,
                model: &model,
                point: &point,
                decision_score: xaibench::models::decision_score(&model, &point)?,
                attributions: &attributions,
            },
        )?;
    }
    let d = spec.dim();
    if cfg.wants(OutputFormat::Csv) {
        let mut csv = String::from("method");
        for j in 1..=d {
            let _ = write!(csv, ",x{j}");
        }
        csv.push('\n');
        for a in &attributions {
            csv.push_str(a.method.name());
            for s in &a.scores {
                let _ = write!(csv, ",{s}");
            }
            csv.push('\n');
        }
        out.add("attribution.csv", csv);
    }
    if cfg.wants(OutputFormat::Md) {
        let mut md = format!("# Attributions at {point:?}\n\n{}\n\n| Method |", spec.label());
        for j in 1..=d {
            let _ = write!(md, " x{j} |");
        }
        md.push_str("\n|---|");
        md.push_str(&"---|".repeat(d));
        md.push('\n');
        for a in &attributions {
            let _ = write!(md, "| {} |", a.method.display_name());
            for s in &a.scores {
                let _ = write!(md, " {s:.4} |");
            }
            md.push('\n');
        }
        out.add("attribution.md", md);
    }
    Ok(out)
}

#[derive(Serialize)]
struct AblationRecord {
    spec: usize,
    label: String,
    seed: u64,
    method: xaibench::Method,
    order: Vec<usize>,
    accuracies: Vec<f64>,
    aopc: f64,
}

#[derive(Serialize)]
struct FeatureDrop {
    spec: usize,
    feature: usize,
    informative: bool,
    drop: f64,
}

#[derive(Serialize)]
struct Ablation {
    replacement: xaibench::Replacement,
    curves: Vec<AblationRecord>,
    single_feature_drops: Vec<FeatureDrop>,
}

fn ablate(cfg: &Config) -> CliResult<Outputs> {
    let seed = cfg.base_seed;
    let replacement = cfg.benchmark.replacement;
    let mut out = Outputs::default();
    let mut curves = Vec::new();
    let mut drops = Vec::new();
    for (s, spec) in cfg.specs.iter().enumerate() {
        let data = sample(spec, cfg.n, seed)?;
        let model = cfg.benchmark.model.build(spec, &data)?;
        for &method in &cfg.methods {
            let attr = global_attribution(method, &model, spec, &data, &cfg.benchmark)?;
            let curve = deletion_curve(&model, &data, &attr, replacement)?;
            if cfg.wants(OutputFormat::Csv) {
                let mut csv = Vec::new();
                curve.write_csv(&mut csv)?;
                let stem = format!("deletion_{}", method.name());
                out.add(per_spec(&stem, "csv", s, cfg.specs.len()), csv);
            }
            curves.push(AblationRecord {
                spec: s,
                label: spec.label(),
                seed,
                method,
                aopc: aopc(&curve),
                order: curve.order,
                accuracies: curve.accuracies,
            });
        }
        for (feature, &informative) in data.mask().iter().enumerate() {
            drops.push(FeatureDrop {
                spec: s,
                feature,
                informative,
                drop: ablation_drop(&model, &data, feature, replacement)?,
            });
        }
    }
    if cfg.wants(OutputFormat::Md) {
        let mut md = String::from(
            "# Ablation\n\n| Spec | Method | Deletion order | Accuracies | AOPC |\n|---|---|---|---|---|\n",
        );
        for c in &curves {
            let order: Vec<String> = c.order.iter().map(|j| format!("x{}", j + 1)).collect();
            let accs: Vec<String> = c.accuracies.iter().map(|a| format!("{a:.4}")).collect();
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {:.4} |",
                c.label,
                c.method.display_name(),
                order.join(", "),
                accs.join(", "),
                c.aopc
            );
        }
        md.push_str("\n| Spec | Feature | Informative | Accuracy drop |\n|---|---|---|---|\n");
        for d in &drops {
            let _ = writeln!(
                md,
                "| {} | x{} | {} | {:.4} |",
                cfg.specs[d.spec].label(),
                d.feature + 1,
                d.informative,
                d.drop
            );
        }
        out.add("ablation.md", md);
    }
    if cfg.wants(OutputFormat::Json) {
        out.add_json(
            "ablation.json",
            &Ablation {
                replacement,
                curves,
                single_feature_drops: drops,
            },
        )?;
    }
    Ok(out)
}

fn run(command: &Command) -> CliResult<()> {
    let (name, args) = match command {
        Command::Generate(a) => ("generate", a),
        Command::Benchmark(a) => ("benchmark", a),
        Command::Figure1(a) => ("figure1", a),
        Command::Attribute(a) => ("attribute", a),
        Command::Ablate(a) => ("ablate", a),
    };
    let loaded = load(args)?;
    let cfg = &loaded.config;
    let outputs = match command {
        Command::Generate(_) => generate(cfg)?,
        Command::Benchmark(_) => benchmark(cfg)?,
        Command::Figure1(_) => figure1(cfg)?,
        Command::Attribute(_) => attribute(cfg)?,
        Command::Ablate(_) => ablate(cfg)?,
    };
    write_all(name, args, &loaded, &outputs)?;
    eprintln!(
        "{name}: wrote {} file(s) and manifest.json to {}",
        outputs.files.len(),
        loaded.out_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
