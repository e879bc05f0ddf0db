//! Seeded synthetic stereo corpus.
//!
//! Each speaker is a white-noise source shaped by a two-pole resonator at a
//! speaker-specific center frequency, mixed with a broadband noise floor,
//! and placed in the stereo field at a speaker-specific left/right gain
//! ratio. Spectral signatures separate speakers imperfectly (they overlap on
//! purpose); the gain ratios are the extra channel cue the combination
//! methods can exploit.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stereoclust_core::derive_seed;

use crate::audio::StereoSignal;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub seconds_per_speaker: u32,
    pub sample_rate: u32,
    pub seed: u64,
    /// Center frequency of the first speaker's resonance, Hz.
    pub base_hz: f64,
    /// Geometric ratio between neighboring speakers' center frequencies.
    pub spacing: f64,
    /// Resonator pole radius in (0, 1); closer to 1 is a sharper, more
    /// distinctive peak.
    pub pole_radius: f64,
    /// Amount of shared broadband noise mixed in after the resonator;
    /// raising it blurs the spectral identities.
    pub noise_floor: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_speakers: 6,
            seconds_per_speaker: 30,
            sample_rate: 16000,
            seed: 0,
            base_hz: 500.0,
            spacing: 1.15,
            pole_radius: 0.70,
            noise_floor: 1.2,
        }
    }
}

/// A generated corpus: one long stereo recording plus its annotation
/// manifest, one contiguous span per speaker.
#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub signal: StereoSignal,
    pub manifest: String,
}

fn resonate(input: &[f64], center_hz: f64, radius: f64, sample_rate: u32) -> Vec<f64> {
    let omega = 2.0 * PI * center_hz / sample_rate as f64;
    let a1 = 2.0 * radius * omega.cos();
    let a2 = -radius * radius;
    let mut out = Vec::with_capacity(input.len());
    let (mut y1, mut y2) = (0.0f64, 0.0f64);
    for &x in input {
        let y = x + a1 * y1 + a2 * y2;
        out.push(y);
        y2 = y1;
        y1 = y;
    }
    out
}

fn peak_normalize(samples: &mut [f64], target: f64) {
    let peak = samples.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if peak > 0.0 {
        let scale = target / peak;
        for v in samples.iter_mut() {
            *v *= scale;
        }
    }
}

/// Stereo pan gains of speaker `i` out of `n`: angles spread across the
/// stereo field give every speaker a distinct left/right ratio.
pub fn pan_gains(i: usize, n: usize) -> (f64, f64) {
    let lo = 0.2f64;
    let hi = PI / 2.0 - 0.2;
    let theta = if n == 1 {
        (lo + hi) / 2.0
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    };
    (theta.cos(), theta.sin())
}

pub fn speaker_name(i: usize) -> String {
    format!("spk{:02}", i + 1)
}

/// Generates the corpus. Deterministic for a fixed config.
pub fn generate(config: &SynthConfig) -> SynthCorpus {
    assert!(config.n_speakers >= 1);
    assert!((0.0..1.0).contains(&config.pole_radius));
    let samples_per_speaker = (config.sample_rate * config.seconds_per_speaker) as usize;

    let mut left = Vec::with_capacity(samples_per_speaker * config.n_speakers);
    let mut right = Vec::with_capacity(samples_per_speaker * config.n_speakers);
    let mut manifest = String::from("# synthetic corpus: speaker_id,start_s,end_s\n");

    for i in 0..config.n_speakers {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, i as u64));
        let excitation: Vec<f64> = (0..samples_per_speaker)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let center = config.base_hz * config.spacing.powi(i as i32);
        let mut shaped = resonate(&excitation, center, config.pole_radius, config.sample_rate);
        peak_normalize(&mut shaped, 1.0);

        let mut source: Vec<f64> = shaped
            .iter()
            .map(|&v| v + config.noise_floor * rng.gen_range(-1.0..1.0))
            .collect();
        peak_normalize(&mut source, 0.95);

        let (gain_left, gain_right) = pan_gains(i, config.n_speakers);
        left.extend(source.iter().map(|&v| v * gain_left));
        right.extend(source.iter().map(|&v| v * gain_right));

        let start = i as u32 * config.seconds_per_speaker;
        manifest.push_str(&format!(
            "{},{},{}\n",
            speaker_name(i),
            start,
            start + config.seconds_per_speaker
        ));
    }

    let signal = StereoSignal::new(config.sample_rate, left, right)
        .expect("generated samples are finite and equal-length");
    SynthCorpus { signal, manifest }
}
