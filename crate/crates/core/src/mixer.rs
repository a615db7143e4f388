//! Corpus mixing: combine clean speech and noise at an exact SNR and build
//! JSON-lines manifests for the train/validation/test splits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{read_wav_16k, Waveform};
use crate::error::{Error, Result};

/// SNRs of the test conditions.
pub const TEST_SNRS_DB: [f64; 3] = [-3.0, 3.0, 9.0];
/// Train mixtures draw uniformly from this range.
pub const TRAIN_SNR_RANGE_DB: (f64, f64) = (6.0, 12.0);
/// The validation split is fixed at this SNR.
pub const VALID_SNR_DB: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub clean_path: String,
    pub noise_path: String,
    pub snr_db: f64,
    pub noise_offset: usize,
    pub seed: u64,
    pub split: Split,
}

/// Scales a noise segment so that `10·log10(P_clean/P_noise)` equals
/// `snr_db` exactly, then adds it to the clean signal. The noise is read
/// from `offset`, wrapping around if shorter than the clean signal.
/// Returns `(noisy, scaled_noise)`; `noisy − scaled_noise == clean` to
/// machine precision, so exact mask targets remain computable.
pub fn mix_at_snr(
    clean: &Waveform,
    noise: &Waveform,
    snr_db: f64,
    offset: usize,
) -> Result<(Waveform, Waveform)> {
    if clean.sample_rate != noise.sample_rate {
        return Err(Error::RateMismatch { expected: clean.sample_rate, got: noise.sample_rate });
    }
    if noise.is_empty() {
        return Err(Error::SilentInput("noise".into()));
    }
    let seg: Vec<f64> = (0..clean.len())
        .map(|i| noise.samples[(offset + i) % noise.len()])
        .collect();
    let clean_rms = clean.rms();
    let seg_rms = (seg.iter().map(|v| v * v).sum::<f64>() / seg.len().max(1) as f64).sqrt();
    if clean_rms < 1e-8 {
        return Err(Error::SilentInput("clean".into()));
    }
    if seg_rms < 1e-8 {
        return Err(Error::SilentInput("noise".into()));
    }
    let alpha = clean_rms / (seg_rms * 10f64.powf(snr_db / 20.0));
    let scaled: Vec<f64> = seg.iter().map(|v| v * alpha).collect();
    let noisy: Vec<f64> =
        clean.samples.iter().zip(&scaled).map(|(c, w)| c + w).collect();
    Ok((
        Waveform::new(noisy, clean.sample_rate),
        Waveform::new(scaled, clean.sample_rate),
    ))
}

/// Writes one `MixtureSpec` per line as JSON.
pub fn write_manifest(path: &Path, specs: &[MixtureSpec]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for spec in specs {
        let line = serde_json::to_string(spec).map_err(|e| Error::MalformedFile {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a JSON-lines manifest; empty or blank files are an error.
pub fn read_manifest(path: &Path) -> Result<Vec<MixtureSpec>> {
    let r = BufReader::new(File::open(path)?);
    let mut specs = Vec::new();
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let spec: MixtureSpec = serde_json::from_str(&line).map_err(|e| Error::MalformedFile {
            path: path.display().to_string(),
            detail: format!("line {}: {e}", ln + 1),
        })?;
        specs.push(spec);
    }
    if specs.is_empty() {
        return Err(Error::EmptyManifest(path.display().to_string()));
    }
    Ok(specs)
}

/// Materializes one manifest line into aligned signals.
pub struct LoadedMixture {
    pub clean: Waveform,
    pub noisy: Waveform,
    pub scaled_noise: Waveform,
}

pub fn load_mixture(spec: &MixtureSpec) -> Result<LoadedMixture> {
    let clean = read_wav_16k(&spec.clean_path)?;
    let noise = read_wav_16k(&spec.noise_path)?;
    let (noisy, scaled_noise) = mix_at_snr(&clean, &noise, spec.snr_db, spec.noise_offset)?;
    Ok(LoadedMixture { clean, noisy, scaled_noise })
}

/// Inputs to `build_corpus`.
#[derive(Debug, Clone)]
pub struct CorpusConfig {
    /// Directory of clean 16 kHz WAV files.
    pub clean_dir: PathBuf,
    /// Directory of noise WAV files; the file stem names the noise type.
    pub noise_dir: PathBuf,
    /// Where the manifest files go.
    pub out_dir: PathBuf,
    /// Noise type (file stem in noise_dir) used for train and validation.
    pub train_noise: String,
    pub seed: u64,
    /// Drop clean files longer than this (used for recurrent-model corpora).
    pub max_duration_s: Option<f64>,
    /// Clean files reserved for validation and test. Defaults: one fifth
    /// each, at least 1.
    pub valid_count: Option<usize>,
    pub test_count: Option<usize>,
}

/// Manifest paths produced by `build_corpus`.
#[derive(Debug, Clone)]
pub struct CorpusManifests {
    pub train: PathBuf,
    pub valid: PathBuf,
    /// (noise type, snr_db, path), one per test condition.
    pub test: Vec<(String, f64, PathBuf)>,
}

fn wav_files_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "wav"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyCorpus(format!("no .wav files in {}", dir.display())));
    }
    Ok(files)
}

/// Builds train/valid/test manifests. Deterministic in `seed`: the clean
/// list is shuffled with a seeded RNG, per-utterance SNRs, offsets and
/// seeds come from the same stream, and file lists are sorted before use.
pub fn build_corpus(config: &CorpusConfig) -> Result<CorpusManifests> {
    let mut clean = wav_files_sorted(&config.clean_dir)?;
    if let Some(max_s) = config.max_duration_s {
        clean.retain(|p| match read_wav_16k(p) {
            Ok(w) => w.duration_secs() <= max_s,
            Err(_) => false,
        });
        if clean.is_empty() {
            return Err(Error::EmptyCorpus(format!(
                "no clean files at or under {max_s} s in {}",
                config.clean_dir.display()
            )));
        }
    }
    let noises = wav_files_sorted(&config.noise_dir)?;
    let noise_len = |p: &Path| -> Result<usize> { Ok(read_wav_16k(p)?.len()) };
    let train_noise_path = noises
        .iter()
        .find(|p| p.file_stem().is_some_and(|s| s == config.train_noise.as_str()))
        .cloned()
        .ok_or_else(|| {
            Error::Config(format!(
                "train_noise '{}' not found in {}",
                config.train_noise,
                config.noise_dir.display()
            ))
        })?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..clean.len()).collect();
    // Fisher–Yates with the seeded stream.
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }

    let n = clean.len();
    let n_test = config.test_count.unwrap_or((n / 5).max(1));
    let n_valid = config.valid_count.unwrap_or((n / 5).max(1));
    if n_test + n_valid >= n {
        return Err(Error::EmptyCorpus(format!(
            "{n} clean files cannot cover {n_valid} valid + {n_test} test + train"
        )));
    }
    let test_idx = &order[..n_test];
    let valid_idx = &order[n_test..n_test + n_valid];
    let train_idx = &order[n_test + n_valid..];

    std::fs::create_dir_all(&config.out_dir)?;
    let train_noise_samples = noise_len(&train_noise_path)?;
    let path_str = |p: &Path| p.display().to_string();

    let mut train_specs = Vec::new();
    for &i in train_idx {
        train_specs.push(MixtureSpec {
            clean_path: path_str(&clean[i]),
            noise_path: path_str(&train_noise_path),
            snr_db: rng.gen_range(TRAIN_SNR_RANGE_DB.0..=TRAIN_SNR_RANGE_DB.1),
            noise_offset: rng.gen_range(0..train_noise_samples),
            seed: rng.gen(),
            split: Split::Train,
        });
    }
    let mut valid_specs = Vec::new();
    for &i in valid_idx {
        valid_specs.push(MixtureSpec {
            clean_path: path_str(&clean[i]),
            noise_path: path_str(&train_noise_path),
            snr_db: VALID_SNR_DB,
            noise_offset: rng.gen_range(0..train_noise_samples),
            seed: rng.gen(),
            split: Split::Valid,
        });
    }

    let train_path = config.out_dir.join("train.jsonl");
    let valid_path = config.out_dir.join("valid.jsonl");
    write_manifest(&train_path, &train_specs)?;
    write_manifest(&valid_path, &valid_specs)?;

    let mut test_manifests = Vec::new();
    for noise_path in &noises {
        let stem = noise_path.file_stem().unwrap().to_string_lossy().to_string();
        let len = noise_len(noise_path)?;
        for &snr in &TEST_SNRS_DB {
            let mut specs = Vec::new();
            for &i in test_idx {
                specs.push(MixtureSpec {
                    clean_path: path_str(&clean[i]),
                    noise_path: path_str(noise_path),
                    snr_db: snr,
                    noise_offset: rng.gen_range(0..len),
                    seed: rng.gen(),
                    split: Split::Test,
                });
            }
            let path = config.out_dir.join(format!("test_{stem}_{snr}dB.jsonl"));
            write_manifest(&path, &specs)?;
            test_manifests.push((stem.clone(), snr, path));
        }
    }

    Ok(CorpusManifests { train: train_path, valid: valid_path, test: test_manifests })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{write_wav, WavEncoding, PIPELINE_RATE};
    use crate::synth;

    fn tone(freq: f64, amp: f64, len: usize) -> Waveform {
        let w = 2.0 * std::f64::consts::PI * freq / PIPELINE_RATE as f64;
        Waveform::new((0..len).map(|i| amp * (w * i as f64).sin()).collect(), PIPELINE_RATE)
    }

    fn measured_snr_db(clean: &Waveform, scaled: &Waveform) -> f64 {
        let p_s: f64 = clean.samples.iter().map(|v| v * v).sum();
        let p_w: f64 = scaled.samples.iter().map(|v| v * v).sum();
        10.0 * (p_s / p_w).log10()
    }

    #[test]
    fn equal_rms_at_zero_snr_gives_unit_alpha() {
        let clean = tone(440.0, 0.2, 16000);
        let noise = tone(1234.5, 0.2, 16000);
        let (_, scaled) = mix_at_snr(&clean, &noise, 0.0, 0).unwrap();
        // alpha = 1 means the scaled noise equals the raw segment.
        for (s, n) in scaled.samples.iter().zip(&noise.samples) {
            assert!((s - n).abs() < 1e-12);
        }
    }

    #[test]
    fn measured_snr_hits_target_across_conditions() {
        for (k, &snr) in [-3.0, 0.0, 3.0, 6.0, 9.0, 12.0, 20.0].iter().enumerate() {
            let clean = synth::synthetic_utterance(100 + k as u64, 0.5);
            let noise = synth::speech_shaped_noise(200 + k as u64, 12000);
            let (noisy, scaled) = mix_at_snr(&clean, &noise, snr, 371 * k).unwrap();
            let measured = measured_snr_db(&clean, &scaled);
            assert!(
                (measured - snr).abs() <= 0.01,
                "target {snr} dB, measured {measured} dB"
            );
            // Additivity to machine precision.
            let mut err = 0.0f64;
            for i in 0..clean.len() {
                let d = noisy.samples[i] - scaled.samples[i] - clean.samples[i];
                err += d * d;
            }
            assert!((err / clean.len() as f64).sqrt() < 1e-12);
        }
    }

    #[test]
    fn short_noise_wraps_seamlessly() {
        let clean = tone(300.0, 0.1, 2500);
        let noise = Waveform::new(
            (0..1000).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect(),
            PIPELINE_RATE,
        );
        let offset = 800;
        let (noisy, scaled) = mix_at_snr(&clean, &noise, 5.0, offset).unwrap();
        assert_eq!(noisy.len(), clean.len());
        let alpha = scaled.samples[0] / noise.samples[offset];
        for i in 0..clean.len() {
            let expect = alpha * noise.samples[(offset + i) % 1000];
            assert!((scaled.samples[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn silent_inputs_are_rejected() {
        let silent = Waveform::new(vec![0.0; 1000], PIPELINE_RATE);
        let noise = tone(500.0, 0.1, 1000);
        assert!(matches!(mix_at_snr(&silent, &noise, 0.0, 0), Err(Error::SilentInput(_))));
        assert!(matches!(mix_at_snr(&noise, &silent, 0.0, 0), Err(Error::SilentInput(_))));
    }

    #[test]
    fn manifest_round_trip_and_empty_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let specs = vec![MixtureSpec {
            clean_path: "a.wav".into(),
            noise_path: "b.wav".into(),
            snr_db: 7.25,
            noise_offset: 123,
            seed: 99,
            split: Split::Train,
        }];
        write_manifest(&path, &specs).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), specs);
        // Field names appear verbatim in the JSON.
        let text = std::fs::read_to_string(&path).unwrap();
        for key in ["clean_path", "noise_path", "snr_db", "noise_offset", "seed", "split"] {
            assert!(text.contains(key), "missing {key}");
        }
        assert!(text.contains("\"train\""));

        std::fs::write(&path, "\n\n").unwrap();
        assert!(matches!(read_manifest(&path), Err(Error::EmptyManifest(_))));
    }

    #[test]
    fn corpus_build_is_deterministic_and_well_formed() {
        let dir = tempfile::tempdir().unwrap();
        let clean_dir = dir.path().join("clean");
        let noise_dir = dir.path().join("noise");
        std::fs::create_dir_all(&clean_dir).unwrap();
        std::fs::create_dir_all(&noise_dir).unwrap();
        for k in 0..8 {
            let u = synth::synthetic_utterance(k, 0.4);
            write_wav(clean_dir.join(format!("utt{k:02}.wav")), &u, WavEncoding::Float32).unwrap();
        }
        for name in ["babble", "factory"] {
            let n = synth::noise_by_name(name, 77, 16000).unwrap();
            write_wav(noise_dir.join(format!("{name}.wav")), &n, WavEncoding::Float32).unwrap();
        }

        let config = CorpusConfig {
            clean_dir,
            noise_dir,
            out_dir: dir.path().join("m1"),
            train_noise: "babble".into(),
            seed: 9,
            max_duration_s: Some(5.0),
            valid_count: None,
            test_count: None,
        };
        let m1 = build_corpus(&config).unwrap();
        assert_eq!(m1.test.len(), 6, "2 noises × 3 SNRs");

        let train = read_manifest(&m1.train).unwrap();
        assert!(train.iter().all(|s| (6.0..=12.0).contains(&s.snr_db)));
        assert!(train.iter().all(|s| s.split == Split::Train));
        let valid = read_manifest(&m1.valid).unwrap();
        assert!(valid.iter().all(|s| s.snr_db == VALID_SNR_DB));
        for (_, snr, path) in &m1.test {
            let specs = read_manifest(path).unwrap();
            assert!(specs.iter().all(|s| s.snr_db == *snr && s.split == Split::Test));
        }
        // No clean file appears in two splits.
        let mut seen = std::collections::HashSet::new();
        for s in train.iter().chain(&valid) {
            assert!(seen.insert(s.clean_path.clone()), "{} in two splits", s.clean_path);
        }
        let test0 = read_manifest(&m1.test[0].2).unwrap();
        for s in &test0 {
            assert!(!seen.contains(&s.clean_path), "{} leaked into test", s.clean_path);
        }

        // Rerun with the same seed into a second directory: byte-identical.
        let config2 = CorpusConfig { out_dir: dir.path().join("m2"), ..config };
        let m2 = build_corpus(&config2).unwrap();
        let b1 = std::fs::read(&m1.train).unwrap();
        let b2 = std::fs::read(&m2.train).unwrap();
        assert_eq!(b1, b2);
    }
}
