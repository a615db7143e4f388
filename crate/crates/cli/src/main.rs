//! `ears`: corpus mixing, mask-estimator training, enhancement and
//! objective scoring from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ears_core::audio::{read_wav_16k, write_wav, WavEncoding};
use ears_core::checkpoint::{write_feature_cache, Checkpoint};
use ears_core::config::Config;
use ears_core::features;
use ears_core::frontend::{Frontend, FrontendKind};
use ears_core::metrics::{delta_report, DeltaMetrics, EvalReport};
use ears_core::mixer::{self, CorpusConfig};
use ears_core::pipeline::Enhancer;
use ears_core::trainer::{self, TrainConfig};
use ears_core::Error;

#[derive(Parser)]
#[command(
    name = "ears",
    version,
    about = "Cochlear-model noise suppression: mix corpora, train mask estimators, enhance, score"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build train/valid/test manifests from clean and noise WAV directories
    Mix(MixArgs),
    /// Precompute per-utterance feature caches for a manifest
    Features(FeaturesArgs),
    /// Train a mask estimator described by a config file
    Train(TrainArgs),
    /// Enhance noisy 16 kHz WAV files with a trained checkpoint
    Enhance(EnhanceArgs),
    /// Score clean/noisy/enhanced triples
    Eval(EvalArgs),
    /// Run a checkpoint over every test condition and emit a CSV table
    Compare(CompareArgs),
}

#[derive(Args)]
struct MixArgs {
    /// Corpus description: clean_dir, noise_dir, train_noise, out_dir, ...
    #[arg(long)]
    config: PathBuf,
    /// Manifest directory (overrides out_dir from the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FeaturesArgs {
    /// JSON-lines manifest to render
    #[arg(long)]
    manifest: PathBuf,
    /// Front end producing the features: gt, drnl or carfac
    #[arg(long, default_value = "gt")]
    frontend: String,
    /// Output directory, one cache file per manifest line
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training run description (arch, manifests, out, ...)
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EnhanceArgs {
    /// Trained checkpoint
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output directory; enhanced files keep their input names
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for file-level parallelism
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Noisy 16 kHz WAV files
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Clean reference WAV (repeat all three flags for more triples)
    #[arg(long, required = true)]
    clean: Vec<PathBuf>,
    /// Noisy baseline WAV
    #[arg(long, required = true)]
    noisy: Vec<PathBuf>,
    /// Enhanced WAV
    #[arg(long, required = true)]
    enhanced: Vec<PathBuf>,
    /// Emit one JSON report line per triple instead of readable text
    #[arg(long)]
    json: bool,
    /// Annotations recorded in the report
    #[arg(long, default_value = "unspecified")]
    noise: String,
    #[arg(long, default_value_t = 0.0)]
    snr_db: f64,
    #[arg(long, default_value = "unspecified")]
    frontend: String,
    #[arg(long, default_value = "unspecified")]
    arch: String,
    /// Worker threads for file-level parallelism
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct CompareArgs {
    /// Trained checkpoint
    #[arg(long)]
    checkpoint: PathBuf,
    /// Directory holding test_*.jsonl manifests from `ears mix`
    #[arg(long)]
    manifests: PathBuf,
    /// Worker threads for file-level parallelism
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Also write the CSV here (stdout always gets it)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Mix(args) => run_mix(args),
        Command::Features(args) => run_features(args),
        Command::Train(args) => run_train(args),
        Command::Enhance(args) => run_enhance(args),
        Command::Eval(args) => run_eval(args),
        Command::Compare(args) => run_compare(args),
    }
}

/// EARS_SEED is the lowest-precedence seed source (--seed, then config,
/// then the environment, then 0).
fn env_seed() -> Result<Option<u64>, Error> {
    match std::env::var("EARS_SEED") {
        Ok(s) => s
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Error::Config(format!("EARS_SEED must be an unsigned integer, got '{s}'"))),
        Err(_) => Ok(None),
    }
}

/// Applies `f` to every item, in order when jobs <= 1, or on a bounded
/// thread pool otherwise. Results come back in input order.
fn map_parallel<T: Sync, R: Send>(
    jobs: usize,
    items: &[T],
    f: impl Fn(&T) -> Result<R, Error> + Sync + Send,
) -> Result<Vec<R>, Error> {
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot build a {jobs}-thread pool: {e}")))?;
    pool.install(|| {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    })
}

const MIX_KEYS: &[&str] = &[
    "clean_dir",
    "noise_dir",
    "out_dir",
    "train_noise",
    "seed",
    "max_duration_s",
    "valid_count",
    "test_count",
];

fn run_mix(args: MixArgs) -> Result<(), Error> {
    let cfg = Config::load(&args.config)?;
    cfg.validate_keys(MIX_KEYS)?;
    let out_dir = args
        .out
        .or_else(|| cfg.get("out_dir").map(PathBuf::from))
        .ok_or_else(|| Error::Config("output directory missing (out_dir key or --out)".into()))?;
    let config = CorpusConfig {
        clean_dir: cfg.require("clean_dir")?.into(),
        noise_dir: cfg.require("noise_dir")?.into(),
        out_dir,
        train_noise: cfg.require("train_noise")?.to_string(),
        seed: args.seed.or(cfg.get_u64("seed")?).or(env_seed()?).unwrap_or(0),
        max_duration_s: cfg.get_f64("max_duration_s")?,
        valid_count: cfg.get_usize("valid_count")?,
        test_count: cfg.get_usize("test_count")?,
    };
    let manifests = mixer::build_corpus(&config)?;
    println!("train: {}", manifests.train.display());
    println!("valid: {}", manifests.valid.display());
    for (noise, snr, path) in &manifests.test {
        println!("test {noise} {snr} dB: {}", path.display());
    }
    Ok(())
}

fn run_features(args: FeaturesArgs) -> Result<(), Error> {
    let kind = FrontendKind::parse(&args.frontend)?;
    let frontend = Frontend::build(kind);
    let specs = mixer::read_manifest(&args.manifest)?;
    std::fs::create_dir_all(&args.out)?;
    for (i, spec) in specs.iter().enumerate() {
        let mix = mixer::load_mixture(spec)?;
        let noisy_spec = frontend.analyze_energies(&mix.noisy)?;
        let feats = features::base_features_from(&noisy_spec);
        let stem = Path::new(&spec.clean_path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "utt".to_string());
        write_feature_cache(&args.out.join(format!("{i:04}_{stem}.feats")), kind, &feats)?;
    }
    println!("wrote {} feature caches to {}", specs.len(), args.out.display());
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<(), Error> {
    let cfg = Config::load(&args.config)?;
    let config = TrainConfig::from_config(&cfg, args.seed, env_seed()?)?;
    let report = trainer::train(&config, &mut |r| {
        println!("epoch={} train_loss={:.6} valid_loss={:.6}", r.epoch, r.train_loss, r.valid_loss);
    })?;
    println!(
        "best_epoch={} best_valid_loss={:.6} untrained_valid_loss={:.6}",
        report.best_epoch, report.best_valid_mse, report.untrained_valid_mse
    );
    println!("checkpoint: {}", report.out_path.display());
    Ok(())
}

fn run_enhance(args: EnhanceArgs) -> Result<(), Error> {
    let enhancer = Enhancer::new(Checkpoint::load(&args.checkpoint)?);
    std::fs::create_dir_all(&args.out)?;
    map_parallel(args.jobs, &args.inputs, |input| {
        let noisy = read_wav_16k(input)?;
        let out = enhancer.enhance(&noisy)?;
        let name = input
            .file_name()
            .ok_or_else(|| Error::Config(format!("{} has no file name", input.display())))?;
        write_wav(args.out.join(name), &out, WavEncoding::Float32)
    })?;
    println!("enhanced {} file(s) into {}", args.inputs.len(), args.out.display());
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<(), Error> {
    if args.clean.len() != args.noisy.len() || args.clean.len() != args.enhanced.len() {
        return Err(Error::Config(format!(
            "need equally many --clean/--noisy/--enhanced, got {}/{}/{}",
            args.clean.len(),
            args.noisy.len(),
            args.enhanced.len()
        )));
    }
    let triples: Vec<(&PathBuf, &PathBuf, &PathBuf)> = args
        .clean
        .iter()
        .zip(&args.noisy)
        .zip(&args.enhanced)
        .map(|((c, n), e)| (c, n, e))
        .collect();
    let reports = map_parallel(args.jobs, &triples, |(clean, noisy, enhanced)| {
        let c = read_wav_16k(clean)?;
        let n = read_wav_16k(noisy)?;
        let e = read_wav_16k(enhanced)?;
        let m = delta_report(&c, &n, &e)?;
        Ok(EvalReport::from_metrics(
            enhanced.display().to_string(),
            args.snr_db,
            args.noise.clone(),
            args.frontend.clone(),
            args.arch.clone(),
            &m,
        ))
    })?;
    for report in &reports {
        if args.json {
            let line = serde_json::to_string(report)
                .map_err(|e| Error::Config(format!("cannot serialize report: {e}")))?;
            println!("{line}");
        } else {
            if reports.len() > 1 {
                println!("{}", report.file);
            }
            println!(
                "segSNR: noisy {:.2} dB, enhanced {:.2} dB, delta {:+.2} dB",
                report.segsnr_noisy, report.segsnr_enh, report.delta_segsnr
            );
            println!(
                "CD:     noisy {:.2}, enhanced {:.2}, delta {:+.2}",
                report.cd_noisy, report.cd_enh, report.delta_cd
            );
        }
    }
    Ok(())
}

fn run_compare(args: CompareArgs) -> Result<(), Error> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let frontend_tag = ckpt.frontend.tag().to_string();
    let arch = ckpt.model.arch_string();
    let enhancer = Enhancer::new(ckpt);

    let mut manifests: Vec<PathBuf> = std::fs::read_dir(&args.manifests)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("test_") && n.ends_with(".jsonl"))
        })
        .collect();
    manifests.sort();
    if manifests.is_empty() {
        return Err(Error::EmptyCorpus(format!(
            "no test_*.jsonl manifests in {}",
            args.manifests.display()
        )));
    }

    let mut csv = String::from(
        "noise,snr_db,files,frontend,arch,segsnr_noisy,segsnr_enh,delta_segsnr,cd_noisy,cd_enh,delta_cd\n",
    );
    let mut rows = Vec::new();
    for manifest in &manifests {
        let specs = mixer::read_manifest(manifest)?;
        let noise = Path::new(&specs[0].noise_path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "unknown".to_string());
        let snr = specs[0].snr_db;
        let metrics = map_parallel(args.jobs, &specs, |spec| {
            let mix = mixer::load_mixture(spec)?;
            let enhanced = enhancer.enhance(&mix.noisy)?;
            delta_report(&mix.clean, &mix.noisy, &enhanced)
        })?;
        let n = metrics.len() as f64;
        let mean = |pick: fn(&DeltaMetrics) -> f64| metrics.iter().map(pick).sum::<f64>() / n;
        rows.push((
            noise,
            snr,
            metrics.len(),
            mean(|m| m.segsnr_noisy),
            mean(|m| m.segsnr_enh),
            mean(|m| m.delta_segsnr),
            mean(|m| m.cd_noisy),
            mean(|m| m.cd_enh),
            mean(|m| m.delta_cd),
        ));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    for (noise, snr, files, sn, se, ds, cn, ce, dc) in rows {
        csv.push_str(&format!(
            "{noise},{snr},{files},{frontend_tag},{arch},{sn:.4},{se:.4},{ds:.4},{cn:.4},{ce:.4},{dc:.4}\n"
        ));
    }
    print!("{csv}");
    if let Some(path) = &args.out {
        std::fs::write(path, &csv)?;
    }
    Ok(())
}
