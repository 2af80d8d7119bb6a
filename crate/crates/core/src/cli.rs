//! The `coreset` command-line tool.
//!
//! Data (summaries, reports without `--out`) goes to stdout; warnings and
//! errors go to stderr. No command reads the environment or an unseeded
//! entropy source.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::features::{
    concat_features, load_features, normalize_rows, write_features, FeatureMatrix,
};
use crate::manifest::{load_manifest, Manifest};
use crate::report::{compare_methods, EvaluationReport, SelectionReport};
use crate::selectors::{
    select_diversity, select_entropy_balance_with, select_farthest_point, select_random,
    BalanceObjective, BalanceOptions, Method, OverflowPolicy, SelectionBudget, SelectionResult,
};

#[derive(Debug, Parser)]
#[command(
    name = "coreset",
    version,
    about = "Duration-budgeted core-set selection for speech corpora"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a manifest and the row alignment of feature files against it.
    Validate {
        manifest: PathBuf,
        features: Vec<PathBuf>,
    },
    /// Concatenate per-aspect feature files column-wise.
    Join(JoinArgs),
    /// Select a subset under a duration budget.
    Select(SelectArgs),
    /// Compute metrics for a given subset.
    Evaluate(EvaluateArgs),
    /// Tabulate metrics for several selection reports.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct JoinArgs {
    /// Feature files in concatenation order.
    #[arg(required = true)]
    pub parts: Vec<PathBuf>,
    /// Scale each part's rows to unit norm before joining.
    #[arg(long)]
    pub normalize_parts: bool,
    /// Scale the joined rows to unit norm.
    #[arg(long)]
    pub normalize_output: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Diversity,
    PhonemeBalance,
    InputBalance,
    Random,
    FarthestPoint,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Diversity => Method::Diversity,
            MethodArg::PhonemeBalance => Method::PhonemeBalance,
            MethodArg::InputBalance => Method::InputBalance,
            MethodArg::Random => Method::Random,
            MethodArg::FarthestPoint => Method::FarthestPoint,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    #[value(alias = "stop_on_first_overflow")]
    StopOnFirstOverflow,
    #[value(alias = "skip_and_continue")]
    SkipAndContinue,
}

impl From<PolicyArg> for OverflowPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::StopOnFirstOverflow => OverflowPolicy::StopOnFirstOverflow,
            PolicyArg::SkipAndContinue => OverflowPolicy::SkipAndContinue,
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Joint feature file; required by diversity and farthest-point.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(
        long,
        required_unless_present = "t_max_hours",
        conflicts_with = "t_max_hours"
    )]
    pub t_max_seconds: Option<f64>,
    /// Same budget in hours (multiplied by 3600).
    #[arg(long)]
    pub t_max_hours: Option<f64>,
    /// Required for diversity, farthest-point and random.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "stop-on-first-overflow")]
    pub overflow_policy: PolicyArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a one-row CSV metrics table.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Worker threads for the candidate scan (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, default_value_t = 1.0)]
    pub phoneme_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    pub speaker_weight: f64,
    /// Input balance: speaker probabilities from durations, not counts.
    #[arg(long)]
    pub speaker_by_duration: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// One manifest index per line.
    #[arg(
        long,
        conflicts_with = "result_file",
        required_unless_present = "result_file"
    )]
    pub indices_file: Option<PathBuf>,
    /// Report written by `coreset select`.
    #[arg(long)]
    pub result_file: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Selection reports to compare.
    #[arg(long = "result", required = true)]
    pub results: Vec<PathBuf>,
    /// Write the JSON table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { manifest, features } => validate(&manifest, &features),
        Command::Join(args) => join(&args),
        Command::Select(args) => select(&args),
        Command::Evaluate(args) => evaluate(&args),
        Command::Compare(args) => compare(&args),
    }
}

fn read_manifest(path: &Path) -> Result<Manifest> {
    load_manifest(path).with_context(|| format!("invalid manifest {}", path.display()))
}

fn read_features(path: &Path) -> Result<FeatureMatrix> {
    load_features(path).with_context(|| format!("invalid feature file {}", path.display()))
}

fn read_aligned_features(path: &Path, manifest: &Manifest) -> Result<FeatureMatrix> {
    let features = read_features(path)?;
    ensure!(
        features.rows() == manifest.len(),
        "feature file {} has {} rows but the manifest has {} records",
        path.display(),
        features.rows(),
        manifest.len()
    );
    Ok(features)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn validate(manifest_path: &Path, feature_paths: &[PathBuf]) -> Result<()> {
    let manifest = read_manifest(manifest_path)?;
    println!(
        "manifest {}: {} records, {:.3} s, {} phonemes, {} speakers",
        manifest_path.display(),
        manifest.len(),
        manifest.total_duration(),
        manifest.phoneme_inventory().len(),
        manifest.speaker_inventory().len()
    );
    for path in feature_paths {
        let features = read_aligned_features(path, &manifest)?;
        println!(
            "features {}: {} rows x {} dim",
            path.display(),
            features.rows(),
            features.dim()
        );
    }
    Ok(())
}

fn join(args: &JoinArgs) -> Result<()> {
    let mut parts = Vec::with_capacity(args.parts.len());
    for path in &args.parts {
        let mut part = read_features(path)?;
        if args.normalize_parts {
            part = normalize_rows(&part)
                .with_context(|| format!("cannot normalize {}", path.display()))?;
        }
        parts.push(part);
    }
    let refs: Vec<&FeatureMatrix> = parts.iter().collect();
    let mut joined = concat_features(&refs)?;
    if args.normalize_output {
        joined = normalize_rows(&joined).context("cannot normalize joined rows")?;
    }
    write_features(&joined, &args.out)?;
    println!(
        "wrote {}: {} rows x {} dim",
        args.out.display(),
        joined.rows(),
        joined.dim()
    );
    Ok(())
}

fn select(args: &SelectArgs) -> Result<()> {
    let method = Method::from(args.method);
    let t_max = match (args.t_max_seconds, args.t_max_hours) {
        (Some(s), None) => s,
        (None, Some(h)) => h * 3600.0,
        _ => bail!("give exactly one of --t-max-seconds and --t-max-hours"),
    };
    let budget = SelectionBudget::new(t_max, args.overflow_policy.into())?;
    let seed = match (args.seed, method) {
        (Some(seed), _) => seed,
        (None, Method::PhonemeBalance | Method::InputBalance) => 0,
        (None, _) => bail!("--seed is required for the {method} method"),
    };

    let manifest = read_manifest(&args.manifest)?;
    let features = match &args.features {
        Some(path) => Some(read_aligned_features(path, &manifest)?),
        None if method.needs_features() => bail!("--features is required for the {method} method"),
        None => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .context("cannot start worker threads")?;
    let result: SelectionResult = pool.install(|| -> Result<SelectionResult> {
        let options = BalanceOptions {
            phoneme_weight: args.phoneme_weight,
            speaker_weight: args.speaker_weight,
            speaker_by_duration: args.speaker_by_duration,
            ..BalanceOptions::default()
        };
        Ok(match method {
            Method::Diversity => {
                select_diversity(features.as_ref().unwrap(), &manifest, budget, seed)?
            }
            Method::FarthestPoint => {
                select_farthest_point(features.as_ref().unwrap(), &manifest, budget, seed)?
            }
            Method::Random => select_random(&manifest, budget, seed)?,
            Method::PhonemeBalance => select_entropy_balance_with(
                &manifest,
                BalanceObjective::Phoneme,
                &options,
                budget,
                seed,
            )?,
            Method::InputBalance => select_entropy_balance_with(
                &manifest,
                BalanceObjective::PhonemePlusSpeaker,
                &options,
                budget,
                seed,
            )?,
        })
    })?;

    let report = SelectionReport::new(&result, &manifest, features.as_ref())?;
    write_text(&args.out, &report.to_json_line())?;
    if let Some(table) = &args.table {
        let comparison =
            compare_methods(std::slice::from_ref(&result), &manifest, features.as_ref())?;
        write_text(table, &comparison.to_csv())?;
    }

    if result.indices.is_empty() {
        eprintln!("warning: no record fits within the {t_max} s budget under the chosen policy");
    }
    let objective = result
        .final_objective()
        .map_or_else(|| "-".to_string(), |v| v.to_string());
    println!(
        "method={} n_selected={} total_sec={} objective={}",
        method,
        result.indices.len(),
        result.total_duration(),
        objective
    );
    Ok(())
}

fn parse_indices(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            l.trim()
                .parse::<usize>()
                .with_context(|| format!("line {}: not an index: {:?}", n + 1, l))
        })
        .collect()
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let manifest = read_manifest(&args.manifest)?;
    let features = match &args.features {
        Some(path) => Some(read_aligned_features(path, &manifest)?),
        None => None,
    };
    let indices = match (&args.indices_file, &args.result_file) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            parse_indices(&text)
                .with_context(|| format!("invalid indices file {}", path.display()))?
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            let report = SelectionReport::parse(&text)
                .with_context(|| format!("invalid result file {}", path.display()))?;
            ensure!(
                report.manifest_fingerprint == manifest.fingerprint(),
                "result file {} was produced from a different manifest",
                path.display()
            );
            report.indices_in(&manifest)?
        }
        _ => bail!("give exactly one of --indices-file and --result-file"),
    };
    let report = EvaluationReport::new(&manifest, features.as_ref(), &indices)?;
    match &args.out {
        Some(path) => write_text(path, &report.to_json_line()),
        None => {
            print!("{}", report.to_json_line());
            Ok(())
        }
    }
}

fn compare(args: &CompareArgs) -> Result<()> {
    let manifest = read_manifest(&args.manifest)?;
    let features = match &args.features {
        Some(path) => Some(read_aligned_features(path, &manifest)?),
        None => None,
    };
    let mut results = Vec::with_capacity(args.results.len());
    for path in &args.results {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let report = SelectionReport::parse(&text)
            .with_context(|| format!("invalid result file {}", path.display()))?;
        results.push(report.into_result());
    }
    let table = compare_methods(&results, &manifest, features.as_ref())?;
    if let Some(csv) = &args.csv {
        write_text(csv, &table.to_csv())?;
    }
    match &args.out {
        Some(path) => write_text(path, &table.to_json_line()),
        None => {
            print!("{}", table.to_json_line());
            Ok(())
        }
    }
}
