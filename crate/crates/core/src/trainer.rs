//! Training loops for the mask estimators: per-epoch validation, lowest
//! validation loss wins, deterministic down to the checkpoint bytes for a
//! fixed seed.
//!
//! Validation losses are always computed on an f32-rounded copy of the
//! model, so the number reported for the best epoch is exactly what the
//! saved checkpoint reproduces after loading.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::features::{self, NormStats};
use crate::frontend::{Frontend, FrontendKind, GammatoneFilterbank};
use crate::mixer::{self, MixtureSpec};
use crate::nnet::{mse_loss, mse_loss_multi, Adam, LstmModel, MlpModel, Model, Tensor2};

/// Recurrent sequences are truncated to this many frames (5 s).
pub const MAX_SEQ_FRAMES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchKind {
    Mlp,
    Lstm,
}

impl ArchKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ArchKind::Mlp),
            "lstm" => Ok(ArchKind::Lstm),
            other => Err(Error::Config(format!("unknown arch '{other}' (mlp|lstm)"))),
        }
    }
}

/// Keys a training config file may contain.
pub const CONFIG_KEYS: &[&str] = &[
    "arch",
    "frontend",
    "lr",
    "epochs",
    "batch_size",
    "keep_prob",
    "hidden",
    "seed",
    "clip_norm",
    "train_manifest",
    "valid_manifest",
    "out",
];

/// One training run. `batch_size` counts frames for the MLP and whole
/// recordings for the LSTM; `hidden` is the MLP layer width or the LSTM
/// cell count.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub arch: ArchKind,
    pub frontend: FrontendKind,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub keep_prob: f64,
    pub hidden: usize,
    pub seed: u64,
    pub clip_norm: Option<f64>,
    pub train_manifest: PathBuf,
    pub valid_manifest: PathBuf,
    pub out: PathBuf,
}

impl TrainConfig {
    /// Reads a run description. `cli_seed` (a --seed flag) overrides the
    /// config value; `env_seed` is the fallback when neither is set.
    pub fn from_config(
        cfg: &Config,
        cli_seed: Option<u64>,
        env_seed: Option<u64>,
    ) -> Result<TrainConfig> {
        cfg.validate_keys(CONFIG_KEYS)?;
        let arch = ArchKind::parse(cfg.require("arch")?)?;
        let frontend = match cfg.get("frontend") {
            Some(s) => FrontendKind::parse(s)?,
            None => FrontendKind::Gt,
        };
        let (d_lr, d_epochs, d_batch, d_hidden) = match arch {
            ArchKind::Mlp => (1e-3, 20, 1024, 128),
            ArchKind::Lstm => (1e-4, 200, 16, 64),
        };
        let config = TrainConfig {
            arch,
            frontend,
            lr: cfg.get_f64("lr")?.unwrap_or(d_lr),
            epochs: cfg.get_usize("epochs")?.unwrap_or(d_epochs),
            batch_size: cfg.get_usize("batch_size")?.unwrap_or(d_batch),
            keep_prob: cfg.get_f64("keep_prob")?.unwrap_or(0.9),
            hidden: cfg.get_usize("hidden")?.unwrap_or(d_hidden),
            seed: cli_seed.or(cfg.get_u64("seed")?).or(env_seed).unwrap_or(0),
            clip_norm: cfg.get_f64("clip_norm")?,
            train_manifest: cfg.require("train_manifest")?.into(),
            valid_manifest: cfg.require("valid_manifest")?.into(),
            out: cfg.require("out")?.into(),
        };
        if config.lr <= 0.0 || !config.lr.is_finite() {
            return Err(Error::Config(format!("lr must be positive, got {}", config.lr)));
        }
        if config.epochs == 0 || config.batch_size == 0 || config.hidden == 0 {
            return Err(Error::Config("epochs, batch_size and hidden must be >= 1".into()));
        }
        if let Some(c) = config.clip_norm {
            if c <= 0.0 || !c.is_finite() {
                return Err(Error::Config(format!("clip_norm must be positive, got {c}")));
            }
        }
        Ok(config)
    }
}

/// One manifest line rendered into network matrices: un-normalized base
/// features (frames × 128) through the configured front end, and
/// frame-major ideal-ratio-mask targets (frames × 64), always from the
/// gammatone domain where masking happens.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub features: Tensor2,
    pub targets: Tensor2,
}

pub fn load_utterance(
    spec: &MixtureSpec,
    frontend: &Frontend,
    gt: &GammatoneFilterbank,
) -> Result<Utterance> {
    let mix = mixer::load_mixture(spec)?;
    let s = features::envelope_energies(&gt.analyze(&mix.clean)?);
    let w = features::envelope_energies(&gt.analyze(&mix.scaled_noise)?);
    let irm = features::compute_irm(&s, &w)?;
    let noisy_spec = frontend.analyze_energies(&mix.noisy)?;
    Ok(Utterance {
        features: features::base_features_from(&noisy_spec),
        targets: irm.to_frame_major(),
    })
}

/// Loads every manifest line; `max_frames` truncates long recordings.
pub fn load_dataset(
    manifest: &Path,
    frontend: &Frontend,
    gt: &GammatoneFilterbank,
    max_frames: Option<usize>,
) -> Result<Vec<Utterance>> {
    let specs = mixer::read_manifest(manifest)?;
    let mut utts = Vec::with_capacity(specs.len());
    for spec in &specs {
        let mut u = load_utterance(spec, frontend, gt)?;
        if let Some(max) = max_frames {
            if u.features.rows() > max {
                u.features = u.features.slice_rows(0, max);
                u.targets = u.targets.slice_rows(0, max);
            }
        }
        utts.push(u);
    }
    Ok(utts)
}

fn stack_rows(mats: &[Tensor2]) -> Tensor2 {
    let cols = mats[0].cols();
    let rows = mats.iter().map(Tensor2::rows).sum();
    let mut out = Tensor2::zeros(rows, cols);
    let mut at = 0;
    for m in mats {
        for r in 0..m.rows() {
            out.row_mut(at).copy_from_slice(m.row(r));
            at += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Validation MSE of the freshly initialized model (f32-rounded).
    pub untrained_valid_mse: f64,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_valid_mse: f64,
    pub out_path: PathBuf,
}

/// Runs the configured training loop, writes the best checkpoint to
/// `config.out`, and reports per-epoch losses. `log` fires once per
/// epoch, in order.
pub fn train(config: &TrainConfig, log: &mut dyn FnMut(&EpochRecord)) -> Result<TrainReport> {
    match config.arch {
        ArchKind::Mlp => train_mlp(config, log),
        ArchKind::Lstm => train_lstm(config, log),
    }
}

/// Callback receiving one parameter block and its accumulated gradient.
type BlockFn<'a> = dyn FnMut(&mut [f64], &[f64]) + 'a;

/// One optimizer step over every parameter block, with optional global
/// gradient-norm clipping.
fn optimizer_step(opt: &mut Adam, clip_norm: Option<f64>, visit: &mut dyn FnMut(&mut BlockFn)) {
    let mut scale = 1.0;
    if let Some(clip) = clip_norm {
        let mut sq = 0.0;
        visit(&mut |_, g| sq += g.iter().map(|v| v * v).sum::<f64>());
        let norm = sq.sqrt();
        if norm > clip {
            scale = clip / norm;
        }
    }
    opt.begin_step();
    visit(&mut |p, g| opt.update_scaled(p, g, scale));
}

/// Validation MSE of an f32-rounded copy, and the checkpoint holding it.
fn eval_mlp(
    model: &MlpModel,
    frontend: FrontendKind,
    stats: &NormStats,
    x: &Tensor2,
    y: &Tensor2,
) -> Result<(f64, Checkpoint)> {
    let mut ckpt =
        Checkpoint { frontend, stats: stats.clone(), model: Model::Mlp(model.clone()) };
    ckpt.quantize();
    let pred = ckpt.model.predict(x)?;
    let (loss, _) = mse_loss(&pred, y)?;
    Ok((loss, ckpt))
}

fn eval_lstm(
    model: &LstmModel,
    frontend: FrontendKind,
    stats: &NormStats,
    valid: &[Utterance],
) -> Result<(f64, Checkpoint)> {
    let mut ckpt =
        Checkpoint { frontend, stats: stats.clone(), model: Model::Lstm(model.clone()) };
    ckpt.quantize();
    let Model::Lstm(quantized) = &ckpt.model else { unreachable!() };
    let mut preds = Vec::with_capacity(valid.len());
    for u in valid {
        preds.push(quantized.infer(&u.features)?);
    }
    let pairs: Vec<(&Tensor2, &Tensor2)> =
        preds.iter().zip(valid).map(|(p, u)| (p, &u.targets)).collect();
    let (loss, _) = mse_loss_multi(&pairs)?;
    Ok((loss, ckpt))
}

struct Best {
    loss: f64,
    epoch: usize,
    checkpoint: Checkpoint,
}

impl Best {
    fn offer(slot: &mut Option<Best>, loss: f64, epoch: usize, checkpoint: Checkpoint) {
        if slot.as_ref().is_none_or(|b| loss < b.loss) {
            *slot = Some(Best { loss, epoch, checkpoint });
        }
    }
}

fn train_mlp(config: &TrainConfig, log: &mut dyn FnMut(&EpochRecord)) -> Result<TrainReport> {
    let frontend = Frontend::build(config.frontend);
    let gt = GammatoneFilterbank::default_16k();
    let train_utts = load_dataset(&config.train_manifest, &frontend, &gt, None)?;
    let valid_utts = load_dataset(&config.valid_manifest, &frontend, &gt, None)?;
    let mut stats = NormStats::compute(train_utts.iter().map(|u| &u.features))?;
    stats.round_to_f32();

    let prepare = |utts: &[Utterance]| -> Result<(Tensor2, Tensor2)> {
        let mut xs = Vec::with_capacity(utts.len());
        let mut ys = Vec::with_capacity(utts.len());
        for u in utts {
            let mut f = u.features.clone();
            stats.normalize(&mut f)?;
            xs.push(features::context_expand(&f, features::CONTEXT_FRAMES));
            ys.push(u.targets.clone());
        }
        Ok((stack_rows(&xs), stack_rows(&ys)))
    };
    let (x_train, y_train) = prepare(&train_utts)?;
    let (x_valid, y_valid) = prepare(&valid_utts)?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = MlpModel::new(config.hidden, config.keep_prob, &mut init_rng)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    dropout_rng.set_stream(2);

    let (untrained, _) = eval_mlp(&model, config.frontend, &stats, &x_valid, &y_valid)?;
    let mut opt = Adam::new(config.lr);
    let mut order: Vec<usize> = (0..x_train.rows()).collect();
    let mut records = Vec::with_capacity(config.epochs);
    let mut best: Option<Best> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut row_count = 0usize;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let xb = x_train.gather_rows(chunk);
            let yb = y_train.gather_rows(chunk);
            let (pred, cache) = model.forward_train(&xb, &mut dropout_rng)?;
            let (loss, grad) = mse_loss(&pred, &yb)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: batch_idx, value: loss });
            }
            loss_sum += loss * chunk.len() as f64;
            row_count += chunk.len();
            model.zero_grads();
            model.backward(&cache, &grad)?;
            optimizer_step(&mut opt, config.clip_norm, &mut |f| model.visit_params(f));
        }
        let (valid_loss, ckpt) = eval_mlp(&model, config.frontend, &stats, &x_valid, &y_valid)?;
        let record =
            EpochRecord { epoch, train_loss: loss_sum / row_count as f64, valid_loss };
        log(&record);
        records.push(record);
        Best::offer(&mut best, valid_loss, epoch, ckpt);
    }

    finish(config, untrained, records, best)
}

fn train_lstm(config: &TrainConfig, log: &mut dyn FnMut(&EpochRecord)) -> Result<TrainReport> {
    let frontend = Frontend::build(config.frontend);
    let gt = GammatoneFilterbank::default_16k();
    let mut train_utts =
        load_dataset(&config.train_manifest, &frontend, &gt, Some(MAX_SEQ_FRAMES))?;
    let mut valid_utts =
        load_dataset(&config.valid_manifest, &frontend, &gt, Some(MAX_SEQ_FRAMES))?;
    let mut stats = NormStats::compute(train_utts.iter().map(|u| &u.features))?;
    stats.round_to_f32();
    for u in train_utts.iter_mut().chain(valid_utts.iter_mut()) {
        stats.normalize(&mut u.features)?;
    }

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = LstmModel::new(config.hidden, &mut init_rng)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);

    let (untrained, _) = eval_lstm(&model, config.frontend, &stats, &valid_utts)?;
    let mut opt = Adam::new(config.lr);
    let mut order: Vec<usize> = (0..train_utts.len()).collect();
    let mut records = Vec::with_capacity(config.epochs);
    let mut best: Option<Best> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut elem_count = 0usize;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let feats: Vec<Tensor2> =
                chunk.iter().map(|&i| train_utts[i].features.clone()).collect();
            let (preds, cache) = model.forward_train(&feats)?;
            let pairs: Vec<(&Tensor2, &Tensor2)> =
                preds.iter().zip(chunk).map(|(p, &i)| (p, &train_utts[i].targets)).collect();
            let (loss, grads) = mse_loss_multi(&pairs)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: batch_idx, value: loss });
            }
            let elems: usize = preds.iter().map(|p| p.rows() * p.cols()).sum();
            loss_sum += loss * elems as f64;
            elem_count += elems;
            model.zero_grads();
            model.backward(&cache, &grads)?;
            optimizer_step(&mut opt, config.clip_norm, &mut |f| model.visit_params(f));
        }
        let (valid_loss, ckpt) = eval_lstm(&model, config.frontend, &stats, &valid_utts)?;
        let record =
            EpochRecord { epoch, train_loss: loss_sum / elem_count as f64, valid_loss };
        log(&record);
        records.push(record);
        Best::offer(&mut best, valid_loss, epoch, ckpt);
    }

    finish(config, untrained, records, best)
}

fn finish(
    config: &TrainConfig,
    untrained: f64,
    records: Vec<EpochRecord>,
    best: Option<Best>,
) -> Result<TrainReport> {
    let best = best.expect("epochs >= 1 is validated");
    if let Some(dir) = config.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    best.checkpoint.save(&config.out)?;
    Ok(TrainReport {
        untrained_valid_mse: untrained,
        epochs: records,
        best_epoch: best.epoch,
        best_valid_mse: best.loss,
        out_path: config.out.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{write_wav, WavEncoding};
    use crate::synth;
    use std::fmt::Write as _;

    #[test]
    fn config_defaults_follow_arch() {
        let base = "train_manifest = t.jsonl\nvalid_manifest = v.jsonl\nout = m.ckpt\n";
        let cfg = Config::parse(&format!("arch = mlp\n{base}")).unwrap();
        let tc = TrainConfig::from_config(&cfg, None, None).unwrap();
        assert_eq!(tc.lr, 1e-3);
        assert_eq!(tc.epochs, 20);
        assert_eq!(tc.batch_size, 1024);
        assert_eq!(tc.keep_prob, 0.9);
        assert_eq!(tc.hidden, 128);
        assert_eq!(tc.frontend, FrontendKind::Gt);
        assert_eq!(tc.seed, 0);
        assert_eq!(tc.clip_norm, None);

        let cfg = Config::parse(&format!("arch = lstm\nfrontend = carfac\n{base}")).unwrap();
        let tc = TrainConfig::from_config(&cfg, None, None).unwrap();
        assert_eq!(tc.lr, 1e-4);
        assert_eq!(tc.epochs, 200);
        assert_eq!(tc.batch_size, 16);
        assert_eq!(tc.hidden, 64);
        assert_eq!(tc.frontend, FrontendKind::Carfac);
    }

    #[test]
    fn seed_precedence_is_cli_config_env() {
        let with_seed = Config::parse(
            "arch = mlp\nseed = 5\ntrain_manifest = t\nvalid_manifest = v\nout = o",
        )
        .unwrap();
        let without = Config::parse("arch = mlp\ntrain_manifest = t\nvalid_manifest = v\nout = o")
            .unwrap();
        assert_eq!(TrainConfig::from_config(&with_seed, Some(9), Some(7)).unwrap().seed, 9);
        assert_eq!(TrainConfig::from_config(&with_seed, None, Some(7)).unwrap().seed, 5);
        assert_eq!(TrainConfig::from_config(&without, None, Some(7)).unwrap().seed, 7);
        assert_eq!(TrainConfig::from_config(&without, None, None).unwrap().seed, 0);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let parse = |s: &str| TrainConfig::from_config(&Config::parse(s).unwrap(), None, None);
        assert!(parse("arch = cnn\ntrain_manifest = t\nvalid_manifest = v\nout = o").is_err());
        assert!(parse("arch = mlp\nlearning_rate = 1\ntrain_manifest = t\nvalid_manifest = v\nout = o").is_err());
        assert!(parse("arch = mlp\nlr = -1\ntrain_manifest = t\nvalid_manifest = v\nout = o").is_err());
        assert!(parse("arch = mlp\ntrain_manifest = t\nvalid_manifest = v").is_err());
        assert!(parse("arch = mlp\nclip_norm = 0\ntrain_manifest = t\nvalid_manifest = v\nout = o").is_err());
    }

    /// Writes a one-utterance corpus and a single-line manifest usable as
    /// both train and validation split.
    fn tiny_corpus(dir: &Path, secs: f64) -> PathBuf {
        let clean = synth::synthetic_utterance(41, secs);
        let noise = synth::speech_shaped_noise(42, clean.len());
        let clean_path = dir.join("clean.wav");
        let noise_path = dir.join("noise.wav");
        write_wav(&clean_path, &clean, WavEncoding::Float32).unwrap();
        write_wav(&noise_path, &noise, WavEncoding::Float32).unwrap();
        let manifest = dir.join("single.jsonl");
        mixer::write_manifest(
            &manifest,
            &[mixer::MixtureSpec {
                clean_path: clean_path.display().to_string(),
                noise_path: noise_path.display().to_string(),
                snr_db: 3.0,
                noise_offset: 0,
                seed: 1,
                split: mixer::Split::Train,
            }],
        )
        .unwrap();
        manifest
    }

    fn overfit_config(dir: &Path, manifest: &Path, arch: &str, extra: &str) -> TrainConfig {
        let mut text = String::new();
        writeln!(text, "arch = {arch}").unwrap();
        writeln!(text, "train_manifest = {}", manifest.display()).unwrap();
        writeln!(text, "valid_manifest = {}", manifest.display()).unwrap();
        writeln!(text, "out = {}", dir.join(format!("{arch}.ckpt")).display()).unwrap();
        text.push_str(extra);
        TrainConfig::from_config(&Config::parse(&text).unwrap(), None, None).unwrap()
    }

    #[test]
    fn mlp_overfits_a_single_utterance() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(dir.path(), 0.5);
        let config = overfit_config(
            dir.path(),
            &manifest,
            "mlp",
            "lr = 0.01\nepochs = 200\nseed = 3\n",
        );
        let mut last = None;
        let report = train(&config, &mut |r| last = Some(*r)).unwrap();
        assert_eq!(report.epochs.len(), 200);
        assert_eq!(last.unwrap().epoch, 200);
        // One epoch of updates already improves on the untrained model.
        assert!(
            report.epochs[0].valid_loss < report.untrained_valid_mse,
            "epoch 1 {} vs untrained {}",
            report.epochs[0].valid_loss,
            report.untrained_valid_mse
        );
        let final_train = report.epochs.last().unwrap().train_loss;
        assert!(final_train < 0.01, "did not overfit: final train MSE {final_train}");

        // The saved checkpoint reproduces the reported best loss exactly.
        let loaded = Checkpoint::load(&report.out_path).unwrap();
        let Model::Mlp(_) = &loaded.model else { panic!("wrong arch saved") };
        let gt = GammatoneFilterbank::default_16k();
        let frontend = Frontend::build(loaded.frontend);
        let utts = load_dataset(&manifest, &frontend, &gt, None).unwrap();
        let mut f = utts[0].features.clone();
        loaded.stats.normalize(&mut f).unwrap();
        let x = features::context_expand(&f, features::CONTEXT_FRAMES);
        let pred = loaded.model.predict(&x).unwrap();
        let (loss, _) = mse_loss(&pred, &utts[0].targets).unwrap();
        assert_eq!(loss, report.best_valid_mse, "reloaded valid loss must match bit-for-bit");
    }

    #[test]
    fn lstm_overfits_a_single_sequence() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(dir.path(), 0.5);
        let config = overfit_config(
            dir.path(),
            &manifest,
            "lstm",
            "lr = 0.01\nepochs = 400\nhidden = 32\nseed = 4\n",
        );
        let report = train(&config, &mut |_| {}).unwrap();
        let final_train = report.epochs.last().unwrap().train_loss;
        assert!(final_train < 0.01, "did not overfit: final train MSE {final_train}");
        assert!(report.best_valid_mse < report.untrained_valid_mse);

        let loaded = Checkpoint::load(&report.out_path).unwrap();
        let Model::Lstm(model) = &loaded.model else { panic!("wrong arch saved") };
        let gt = GammatoneFilterbank::default_16k();
        let frontend = Frontend::build(loaded.frontend);
        let utts = load_dataset(&manifest, &frontend, &gt, Some(MAX_SEQ_FRAMES)).unwrap();
        let mut f = utts[0].features.clone();
        loaded.stats.normalize(&mut f).unwrap();
        let pred = model.infer(&f).unwrap();
        let (loss, _) = mse_loss_multi(&[(&pred, &utts[0].targets)]).unwrap();
        assert_eq!(loss, report.best_valid_mse, "reloaded valid loss must match bit-for-bit");
    }

    #[test]
    fn same_seed_gives_identical_checkpoint_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(dir.path(), 0.4);
        for arch in ["mlp", "lstm"] {
            let run = |out: &str| {
                let mut config = overfit_config(
                    dir.path(),
                    &manifest,
                    arch,
                    "epochs = 3\nhidden = 8\nseed = 11\nbatch_size = 32\n",
                );
                config.out = dir.path().join(out);
                train(&config, &mut |_| {}).unwrap();
                std::fs::read(&config.out).unwrap()
            };
            let a = run("a.ckpt");
            let b = run("b.ckpt");
            assert_eq!(a, b, "{arch} reruns diverged");
        }
    }

    #[test]
    fn best_checkpoint_tracks_the_lowest_validation_loss() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(dir.path(), 0.4);
        let config = overfit_config(
            dir.path(),
            &manifest,
            "mlp",
            "lr = 0.01\nepochs = 12\nhidden = 16\nseed = 6\n",
        );
        let report = train(&config, &mut |_| {}).unwrap();
        let min = report
            .epochs
            .iter()
            .min_by(|a, b| a.valid_loss.total_cmp(&b.valid_loss))
            .unwrap();
        assert_eq!(report.best_epoch, min.epoch);
        assert_eq!(report.best_valid_mse, min.valid_loss);
    }

    #[test]
    fn clip_norm_still_learns() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(dir.path(), 0.4);
        let config = overfit_config(
            dir.path(),
            &manifest,
            "mlp",
            "lr = 0.01\nepochs = 10\nhidden = 16\nseed = 7\nclip_norm = 0.5\n",
        );
        let report = train(&config, &mut |_| {}).unwrap();
        assert!(report.best_valid_mse < report.untrained_valid_mse);
    }
}
