use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use mhaec::features::{evaluate_loo, extract_features, EventRecord, DEFAULT_K};
use mhaec::io::{
    read_features_csv, read_manifest, read_stats_csv, read_wav, write_features_csv,
    write_stats_csv, write_text, write_wav,
};
use mhaec::sim::dataset::MANIFEST_FILE;
use mhaec::sim::{make_dataset, ManifestRow};
use mhaec::{run_aec, Error, EventClass, RunConfig};

const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "mhaec", version, about = "Sub-band multi-hypothesis echo canceller and scene analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a labelled dataset of reference/microphone WAV pairs.
    Simulate(SimulateArgs),
    /// Cancel echo in one reference/microphone pair.
    Aec(AecArgs),
    /// Turn statistics CSVs into clip-level feature vectors.
    Features(FeaturesArgs),
    /// Leave-one-out k-NN evaluation of a features CSV.
    Evaluate(EvaluateArgs),
    /// simulate, aec, features and evaluate in one go.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 25)]
    n_per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated subset of classes (default: all four).
    #[arg(long, value_delimiter = ',', value_parser = parse_class)]
    classes: Vec<EventClass>,
    /// Mono float WAV used as the near-end talker instead of the synthetic one.
    #[arg(long)]
    interferer: Option<PathBuf>,
}

/// Overrides applied on top of the config file.
#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML run configuration; every field is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    taps: Option<usize>,
    #[arg(long)]
    stats_bands: Option<usize>,
    #[arg(long)]
    truncate_s: Option<f64>,
    #[arg(long)]
    time_constant_s: Option<f64>,
    #[arg(long)]
    mic_delay_frames: Option<usize>,
    #[arg(long)]
    mu_main: Option<f64>,
    #[arg(long)]
    copy_threshold_db: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> mhaec::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.taps {
            cfg.taps = v;
        }
        if let Some(v) = self.stats_bands {
            cfg.stats_bands = v;
        }
        if let Some(v) = self.truncate_s {
            cfg.truncate_s = v;
        }
        if let Some(v) = self.time_constant_s {
            cfg.time_constant_s = v;
        }
        if let Some(v) = self.mic_delay_frames {
            cfg.mic_delay_frames = v;
        }
        if let Some(v) = self.mu_main {
            cfg.control.mu_main = v;
        }
        if let Some(v) = self.copy_threshold_db {
            cfg.control.copy_threshold_db = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct AecArgs {
    reference: PathBuf,
    mic: PathBuf,
    #[arg(long)]
    residual: PathBuf,
    #[arg(long)]
    stats: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(required = true)]
    stats: Vec<PathBuf>,
    /// Label and seed each file by the manifest row whose id matches the
    /// file stem (optionally suffixed `_stats`).
    #[arg(long, conflicts_with = "label", required_unless_present = "label")]
    manifest: Option<PathBuf>,
    /// Label applied to every file.
    #[arg(long, value_parser = parse_class)]
    label: Option<EventClass>,
    /// Seed column used with --label.
    #[arg(long, default_value_t = 0, requires = "label")]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    features: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long)]
    confusion_out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 25)]
    n_per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Also write residual WAVs next to the statistics.
    #[arg(long)]
    residuals: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

fn parse_class(s: &str) -> Result<EventClass, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(err: &Error) -> u8 {
    if err.is_io() {
        EXIT_IO
    } else {
        EXIT_INPUT
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Aec(a) => aec(a),
        Command::Features(a) => features(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Pipeline(a) => pipeline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult = Result<(), CliError>;

fn simulate(a: SimulateArgs) -> CliResult {
    let classes = if a.classes.is_empty() {
        EventClass::ALL.to_vec()
    } else {
        a.classes
    };
    let interferer = match &a.interferer {
        Some(path) => Some(read_wav(path)?.0),
        None => None,
    };
    make_dataset(a.n_per_class, a.seed, &classes, &a.out, interferer.as_deref())?;
    println!("{}", a.out.join(MANIFEST_FILE).display());
    Ok(())
}

fn load_pair(reference: &Path, mic: &Path, cfg: &RunConfig) -> mhaec::Result<(Vec<f64>, Vec<f64>)> {
    let (x, rate_x) = read_wav(reference)?;
    let (d, rate_d) = read_wav(mic)?;
    for (path, rate) in [(reference, rate_x), (mic, rate_d)] {
        if rate != cfg.sample_rate {
            return Err(Error::Input(format!(
                "{}: sample rate {rate} Hz, expected {} Hz",
                path.display(),
                cfg.sample_rate
            )));
        }
    }
    if x.len() != d.len() {
        return Err(Error::Input(format!(
            "{} has {} samples but {} has {}",
            reference.display(),
            x.len(),
            mic.display(),
            d.len()
        )));
    }
    Ok((x, d))
}

fn aec(a: AecArgs) -> CliResult {
    let cfg = a.config.resolve()?;
    let (x, d) = load_pair(&a.reference, &a.mic, &cfg)?;
    let out = run_aec(&x, &d, &cfg)?;
    write_wav(&a.residual, &out.residual, cfg.sample_rate)?;
    write_stats_csv(&a.stats, &out.stats)?;
    Ok(())
}

fn stats_id(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    stem.strip_suffix("_stats").map(str::to_string).unwrap_or(stem)
}

fn features(a: FeaturesArgs) -> CliResult {
    let lookup: Option<HashMap<String, ManifestRow>> = match &a.manifest {
        Some(path) => Some(
            read_manifest(path)?
                .into_iter()
                .map(|r| (r.id.clone(), r))
                .collect(),
        ),
        None => None,
    };
    let mut records = Vec::with_capacity(a.stats.len());
    for path in &a.stats {
        let (label, seed) = match (&lookup, a.label) {
            (Some(rows), _) => {
                let id = stats_id(path);
                let row = rows.get(&id).ok_or_else(|| {
                    Error::Input(format!("{}: no manifest row with id '{id}'", path.display()))
                })?;
                (row.label, row.seed)
            }
            (None, Some(label)) => (label, a.seed),
            (None, None) => unreachable!("clap requires --manifest or --label"),
        };
        let trajectory = read_stats_csv(path)?;
        let features = extract_features(&trajectory)
            .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        records.push(EventRecord {
            label,
            features,
            seed,
        });
    }
    write_features_csv(&a.out, &records)?;
    Ok(())
}

fn report(records: &[EventRecord], k: usize, confusion_out: Option<&Path>) -> mhaec::Result<String> {
    let r = evaluate_loo(records, k)?;
    let text = format!(
        "records: {}\nk: {}\nleave-one-out accuracy: {:.4}\n\n{}",
        records.len(),
        r.k,
        r.accuracy,
        r.confusion_table()
    );
    if let Some(path) = confusion_out {
        write_text(path, &r.confusion_csv())?;
    }
    Ok(text)
}

fn evaluate(a: EvaluateArgs) -> CliResult {
    let records = read_features_csv(&a.features)?;
    if a.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    print!("{}", report(&records, a.k, a.confusion_out.as_deref())?);
    Ok(())
}

fn pipeline(a: PipelineArgs) -> CliResult {
    let cfg = a.config.resolve()?;
    let audio = a.out.join("audio");
    let stats_dir = a.out.join("stats");
    let rows = make_dataset(a.n_per_class, a.seed, &EventClass::ALL, &audio, None)?;
    std::fs::create_dir_all(&stats_dir).map_err(|e| Error::Io {
        path: stats_dir.clone(),
        source: e,
    })?;
    let records = rows
        .par_iter()
        .map(|row| {
            let (x, d) = load_pair(&audio.join(&row.path_ref), &audio.join(&row.path_mic), &cfg)?;
            let out = run_aec(&x, &d, &cfg)?;
            write_stats_csv(&stats_dir.join(format!("{}_stats.csv", row.id)), &out.stats)?;
            if a.residuals {
                write_wav(
                    &stats_dir.join(format!("{}_residual.wav", row.id)),
                    &out.residual,
                    cfg.sample_rate,
                )?;
            }
            Ok(EventRecord {
                label: row.label,
                features: extract_features(&out.stats)?,
                seed: row.seed,
            })
        })
        .collect::<mhaec::Result<Vec<_>>>()?;
    write_features_csv(&a.out.join("features.csv"), &records)?;
    let text = report(&records, a.k, Some(&a.out.join("confusion.csv")))?;
    write_text(&a.out.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}
