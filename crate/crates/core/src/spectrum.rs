//! Framing, FFT and mel filterbank machinery behind the spectral embedder.

use alloc::vec;
use alloc::vec::Vec;

const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

/// In-place radix-2 Cooley-Tukey FFT. Lengths must be a power of two.
pub fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    debug_assert_eq!(n, im.len());
    debug_assert!(n.is_power_of_two());

    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let ang = -TWO_PI / len as f64;
        let (step_r, step_i) = (libm::cos(ang), libm::sin(ang));
        for start in (0..n).step_by(len) {
            let mut wr = 1.0;
            let mut wi = 0.0;
            let half = len / 2;
            for k in 0..half {
                let (er, ei) = (re[start + k], im[start + k]);
                let (or, oi) = (re[start + k + half], im[start + k + half]);
                let tr = or * wr - oi * wi;
                let ti = or * wi + oi * wr;
                re[start + k] = er + tr;
                im[start + k] = ei + ti;
                re[start + k + half] = er - tr;
                im[start + k + half] = ei - ti;
                let next_r = wr * step_r - wi * step_i;
                wi = wr * step_i + wi * step_r;
                wr = next_r;
            }
        }
        len <<= 1;
    }
}

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 - 0.5 * libm::cos(TWO_PI * k as f64 / n as f64))
        .collect()
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * libm::log10(1.0 + hz / 700.0)
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (libm::pow(10.0, mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank over the one-sided spectrum of an `fft_size`
/// transform. Row `m` holds the weights of filter `m` for bins
/// `0..=fft_size/2`; filter edges span 0 Hz to Nyquist, peaks are 1.
pub fn mel_filterbank(n_mels: usize, fft_size: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let n_bins = fft_size / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);

    // n_mels + 2 equally spaced points on the mel axis: the outer two are
    // the lower/upper edges, the inner ones the filter centers.
    let hz_points: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64))
        .collect();

    let bin_hz = sample_rate as f64 / fft_size as f64;
    let mut bank = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (lo, center, hi) = (hz_points[m], hz_points[m + 1], hz_points[m + 2]);
        let mut row = vec![0.0; n_bins];
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            if f > lo && f < hi {
                *w = if f <= center {
                    (f - lo) / (center - lo)
                } else {
                    (hi - f) / (hi - center)
                };
            }
        }
        bank.push(row);
    }
    bank
}

/// Log-mel energies per frame: Hann-windowed frames, magnitude spectrum,
/// triangular mel filters, natural log with floor `1e-10`.
///
/// Returns one `n_mels`-vector per frame; the trailing samples that do not
/// fill a whole frame are dropped. Caller guarantees at least one frame.
pub fn log_mel_frames(
    samples: &[f64],
    frame_len: usize,
    hop: usize,
    fft_size: usize,
    bank: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    debug_assert!(samples.len() >= frame_len);
    let window = hann_window(frame_len);
    let n_frames = (samples.len() - frame_len) / hop + 1;
    let n_bins = fft_size / 2 + 1;

    let mut frames = Vec::with_capacity(n_frames);
    let mut re = vec![0.0; fft_size];
    let mut im = vec![0.0; fft_size];
    for f in 0..n_frames {
        let start = f * hop;
        re[..frame_len]
            .iter_mut()
            .zip(&samples[start..start + frame_len])
            .zip(&window)
            .for_each(|((slot, &s), &w)| *slot = s * w);
        re[frame_len..].fill(0.0);
        im.fill(0.0);
        fft_in_place(&mut re, &mut im);

        let magnitude: Vec<f64> = (0..n_bins)
            .map(|k| libm::sqrt(re[k] * re[k] + im[k] * im[k]))
            .collect();

        let mut bands = Vec::with_capacity(bank.len());
        for row in bank {
            let energy: f64 = row.iter().zip(&magnitude).map(|(w, m)| w * m).sum();
            bands.push(libm::log(energy.max(1e-10)));
        }
        frames.push(bands);
    }
    frames
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn naive_dft(signal: &[f64]) -> Vec<(f64, f64)> {
        let n = signal.len();
        (0..n)
            .map(|k| {
                let mut acc = (0.0, 0.0);
                for (t, &x) in signal.iter().enumerate() {
                    let ang = -TWO_PI * k as f64 * t as f64 / n as f64;
                    acc.0 += x * libm::cos(ang);
                    acc.1 += x * libm::sin(ang);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn fft_matches_naive_dft() {
        let signal: Vec<f64> = (0..32)
            .map(|t| libm::sin(0.3 * t as f64) + 0.5 * libm::cos(1.7 * t as f64))
            .collect();
        let mut re = signal.clone();
        let mut im = vec![0.0; 32];
        fft_in_place(&mut re, &mut im);
        for (k, &(er, ei)) in naive_dft(&signal).iter().enumerate() {
            assert!((re[k] - er).abs() < 1e-9, "bin {k} real");
            assert!((im[k] - ei).abs() < 1e-9, "bin {k} imag");
        }
    }

    #[test]
    fn fft_of_impulse_is_flat() {
        let mut re = vec![0.0; 16];
        let mut im = vec![0.0; 16];
        re[0] = 1.0;
        fft_in_place(&mut re, &mut im);
        for k in 0..16 {
            assert!((re[k] - 1.0).abs() < 1e-12);
            assert!(im[k].abs() < 1e-12);
        }
    }

    #[test]
    fn mel_scale_round_trips() {
        for hz in [0.0, 120.0, 440.0, 3000.0, 7999.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
    }

    #[test]
    fn filterbank_weights_are_triangular_and_bounded() {
        let bank = mel_filterbank(40, 512, 16000);
        assert_eq!(bank.len(), 40);
        for row in &bank {
            assert_eq!(row.len(), 257);
            assert!(row.iter().all(|&w| (0.0..=1.0).contains(&w)));
            assert!(row.iter().any(|&w| w > 0.0), "empty mel filter");
        }
    }

    #[test]
    fn frame_count_follows_hop_arithmetic() {
        let bank = mel_filterbank(8, 64, 1000);
        let samples = vec![0.0; 100];
        // frame 40, hop 20 -> frames at 0,20,40,60: 4 frames
        let frames = log_mel_frames(&samples, 40, 20, 64, &bank);
        assert_eq!(frames.len(), 4);
    }
}
