//! Writes a small synthetic corpus to play with the `ears` pipeline:
//! `clean/utt_NN.wav` plus `noise/{speech_shaped,babble,factory}.wav`.
//!
//!     cargo run --release -p ears-cli --example gen_demo_corpus -- --out demo

use std::path::PathBuf;

use clap::Parser;
use ears_core::audio::{write_wav, WavEncoding, PIPELINE_RATE};
use ears_core::mixer::mix_at_snr;
use ears_core::synth;

#[derive(Parser)]
#[command(about = "Generate a synthetic demo corpus")]
struct Opts {
    /// Corpus root; clean/ and noise/ are created inside
    #[arg(long)]
    out: PathBuf,
    /// Number of clean utterances
    #[arg(long, default_value_t = 40)]
    utterances: usize,
    /// Length of each utterance in seconds
    #[arg(long, default_value_t = 2.0)]
    secs: f64,
    /// Length of each noise recording in seconds
    #[arg(long, default_value_t = 30.0)]
    noise_secs: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() {
    let opts = Opts::parse();
    let clean_dir = opts.out.join("clean");
    let noise_dir = opts.out.join("noise");
    std::fs::create_dir_all(&clean_dir).expect("create clean dir");
    std::fs::create_dir_all(&noise_dir).expect("create noise dir");

    for i in 0..opts.utterances {
        let utt = synth::synthetic_utterance(opts.seed.wrapping_add(i as u64), opts.secs);
        let path = clean_dir.join(format!("utt_{i:02}.wav"));
        write_wav(&path, &utt, WavEncoding::Float32).expect("write utterance");
    }

    let noise_len = (opts.noise_secs * PIPELINE_RATE as f64).round() as usize;
    let mut noises = Vec::new();
    for name in ["speech_shaped", "babble", "factory"] {
        let noise = synth::noise_by_name(name, opts.seed.wrapping_add(1000), noise_len)
            .expect("known noise type");
        write_wav(noise_dir.join(format!("{name}.wav")), &noise, WavEncoding::Float32)
            .expect("write noise");
        noises.push(noise);
    }

    // A couple of premixed noisy files for `ears enhance` / `ears eval`.
    let noisy_dir = opts.out.join("noisy");
    std::fs::create_dir_all(&noisy_dir).expect("create noisy dir");
    for i in 0..opts.utterances.min(2) {
        let clean = synth::synthetic_utterance(opts.seed.wrapping_add(i as u64), opts.secs);
        let (noisy, _) = mix_at_snr(&clean, &noises[1], 3.0, 0).expect("mix demo file");
        let path = noisy_dir.join(format!("utt_{i:02}_babble_3dB.wav"));
        write_wav(&path, &noisy, WavEncoding::Float32).expect("write noisy demo");
    }

    println!(
        "wrote {} utterances, 3 noise files and 2 noisy demo mixes under {}",
        opts.utterances,
        opts.out.display()
    );
}
