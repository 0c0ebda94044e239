//! Acoustic frontend: MFCC extraction with per-utterance CMVN and
//! windowed-sinc speed perturbation.
//!
//! The pipeline is pre-emphasis -> Hamming window -> power spectrum ->
//! mel filterbank -> floored log -> orthonormal DCT-II, with snip-edges
//! framing (only frames that fit entirely inside the signal are emitted).

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::align::{frames_from_seconds, PhoneSegment, UttAlignment};
use crate::error::{Error, Result};
use crate::io::Waveform;

/// MFCC extraction parameters. Defaults: 40 cepstra from 40 mel filters
/// over 25 ms frames with a 10 ms shift at 16 kHz.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    pub sample_rate: u32,
    pub frame_length_ms: f64,
    pub frame_shift_ms: f64,
    pub num_ceps: usize,
    pub num_mel_filters: usize,
    pub fft_size: usize,
    pub preemphasis: f64,
    pub mel_low_hz: f64,
    pub mel_high_hz: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            sample_rate: 16000,
            frame_length_ms: 25.0,
            frame_shift_ms: 10.0,
            num_ceps: 40,
            num_mel_filters: 40,
            fft_size: 512,
            preemphasis: 0.97,
            mel_low_hz: 20.0,
            mel_high_hz: 16000.0 / 2.0 - 400.0,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    /// Default configuration at a different sample rate; the filterbank
    /// ceiling tracks the Nyquist frequency.
    pub fn with_sample_rate(sample_rate: u32) -> Self {
        MfccConfig {
            sample_rate,
            mel_high_hz: sample_rate as f64 / 2.0 - 400.0,
            ..MfccConfig::default()
        }
    }

    pub fn frame_samples(&self) -> usize {
        (self.sample_rate as f64 * self.frame_length_ms / 1000.0).round() as usize
    }

    pub fn shift_samples(&self) -> usize {
        (self.sample_rate as f64 * self.frame_shift_ms / 1000.0).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_ceps > self.num_mel_filters {
            return Err(Error::invalid(format!(
                "num_ceps {} exceeds num_mel_filters {}",
                self.num_ceps, self.num_mel_filters
            )));
        }
        if self.fft_size < self.frame_samples() {
            return Err(Error::invalid(format!(
                "fft_size {} smaller than the {}-sample frame",
                self.fft_size,
                self.frame_samples()
            )));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.mel_low_hz < self.mel_high_hz && self.mel_high_hz <= nyquist) {
            return Err(Error::invalid(format!(
                "mel band [{}, {}] must sit below the Nyquist frequency {}",
                self.mel_low_hz, self.mel_high_hz, nyquist
            )));
        }
        Ok(())
    }
}

/// T x D acoustic features with frame timing metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub utt_id: String,
    rows: Vec<Vec<f64>>,
    pub frame_shift_ms: f64,
    pub frame_length_ms: f64,
}

impl FeatureMatrix {
    /// Builds a matrix from rectangular, finite rows. Timing metadata
    /// defaults to the 25 ms / 10 ms frontend configuration.
    pub fn from_rows(utt_id: impl Into<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = rows.first() {
            for (t, row) in rows.iter().enumerate() {
                if row.len() != first.len() {
                    return Err(Error::invalid(format!(
                        "row {t} has {} values, expected {}",
                        row.len(),
                        first.len()
                    )));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!("non-finite value in row {t}")));
                }
            }
        }
        Ok(FeatureMatrix {
            utt_id: utt_id.into(),
            rows,
            frame_shift_ms: 10.0,
            frame_length_ms: 25.0,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub(crate) fn rows_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.rows
    }
}

/// Computes MFCC features. The frame count follows the snip-edges formula
/// `T = floor((N - frame) / shift) + 1`.
pub fn compute_mfcc(waveform: &Waveform, config: &MfccConfig) -> Result<FeatureMatrix> {
    let log_mel = log_mel_spectrogram(waveform, config)?;
    let dct = dct_matrix(config.num_ceps, config.num_mel_filters);
    let rows: Vec<Vec<f64>> = log_mel
        .iter()
        .map(|mel| {
            dct.iter()
                .map(|basis| basis.iter().zip(mel).map(|(b, m)| b * m).sum())
                .collect()
        })
        .collect();
    Ok(FeatureMatrix {
        utt_id: String::new(),
        rows,
        frame_shift_ms: config.frame_shift_ms,
        frame_length_ms: config.frame_length_ms,
    })
}

/// Floored log mel-filterbank energies, one row per frame. Exposed so the
/// pre-DCT stage can be inspected directly.
pub fn log_mel_spectrogram(waveform: &Waveform, config: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    if waveform.sample_rate != config.sample_rate {
        return Err(Error::invalid(format!(
            "waveform sample rate {} does not match config {}",
            waveform.sample_rate, config.sample_rate
        )));
    }
    let frame = config.frame_samples();
    let shift = config.shift_samples();
    let n = waveform.samples.len();
    if n < frame {
        return Err(Error::invalid(format!(
            "waveform too short: {n} samples, need at least {frame}"
        )));
    }

    let emphasized = preemphasize(&waveform.samples, config.preemphasis);
    let window = hamming(frame);
    let filterbank = mel_filterbank(config);
    let fft = FftPlanner::new().plan_fft_forward(config.fft_size);

    let num_frames = (n - frame) / shift + 1;
    let mut out = Vec::with_capacity(num_frames);
    let mut buf = vec![Complex::new(0.0, 0.0); config.fft_size];
    for t in 0..num_frames {
        let start = t * shift;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = if i < frame {
                Complex::new(emphasized[start + i] * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        out.push(frame_log_mel(&fft, &mut buf, &filterbank, config.log_floor));
    }
    Ok(out)
}

fn frame_log_mel(
    fft: &Arc<dyn rustfft::Fft<f64>>,
    buf: &mut [Complex<f64>],
    filterbank: &[Vec<(usize, f64)>],
    log_floor: f64,
) -> Vec<f64> {
    fft.process(buf);
    let n_bins = buf.len() / 2 + 1;
    let power: Vec<f64> = buf[..n_bins].iter().map(|c| c.norm_sqr()).collect();
    filterbank
        .iter()
        .map(|filt| {
            let e: f64 = filt.iter().map(|&(k, w)| w * power[k]).sum();
            e.max(log_floor).ln()
        })
        .collect()
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10.0f64.powf(mel / 2595.0) - 1.0)
}

/// Center frequencies of the triangular mel filters, in Hz.
pub fn mel_filter_centers_hz(config: &MfccConfig) -> Vec<f64> {
    mel_points(config)[1..=config.num_mel_filters]
        .iter()
        .map(|&m| mel_to_hz(m))
        .collect()
}

fn mel_points(config: &MfccConfig) -> Vec<f64> {
    let lo = hz_to_mel(config.mel_low_hz);
    let hi = hz_to_mel(config.mel_high_hz);
    let n = config.num_mel_filters + 2;
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Sparse triangular filters with weights computed on the mel scale:
/// each filter is a list of `(fft_bin, weight)` pairs.
fn mel_filterbank(config: &MfccConfig) -> Vec<Vec<(usize, f64)>> {
    let points = mel_points(config);
    let n_bins = config.fft_size / 2 + 1;
    let hz_per_bin = config.sample_rate as f64 / config.fft_size as f64;
    (0..config.num_mel_filters)
        .map(|i| {
            let (left, center, right) = (points[i], points[i + 1], points[i + 2]);
            let mut filt = Vec::new();
            for k in 0..n_bins {
                let mel = hz_to_mel(k as f64 * hz_per_bin);
                let w = if mel > left && mel <= center {
                    (mel - left) / (center - left)
                } else if mel > center && mel < right {
                    (right - mel) / (right - center)
                } else {
                    0.0
                };
                if w > 0.0 {
                    filt.push((k, w));
                }
            }
            filt
        })
        .collect()
}

fn preemphasize(samples: &[f64], coeff: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    if let Some(&first) = samples.first() {
        out.push(first);
        for i in 1..samples.len() {
            out.push(samples[i] - coeff * samples[i - 1]);
        }
    }
    out
}

fn hamming(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Orthonormal DCT-II matrix, `num_ceps` rows of length `n`.
fn dct_matrix(num_ceps: usize, n: usize) -> Vec<Vec<f64>> {
    (0..num_ceps)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            (0..n)
                .map(|i| scale * (PI * (i as f64 + 0.5) * k as f64 / n as f64).cos())
                .collect()
        })
        .collect()
}

/// Per-utterance cepstral mean and variance normalization. Constant
/// dimensions map to zero instead of dividing by a vanishing variance.
pub fn apply_cmvn(features: &FeatureMatrix) -> Result<FeatureMatrix> {
    let t = features.num_frames();
    if t < 2 {
        return Err(Error::invalid(format!(
            "CMVN needs at least 2 frames, got {t}"
        )));
    }
    let d = features.dim();
    for (i, row) in features.rows().iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value in frame {i}")));
        }
    }

    let mut out = features.clone();
    for dim in 0..d {
        let column = || features.rows().iter().map(move |r| r[dim]);
        let lo = column().fold(f64::INFINITY, f64::min);
        let hi = column().fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            for row in out.rows_mut() {
                row[dim] = 0.0;
            }
            continue;
        }
        let mean = column().sum::<f64>() / t as f64;
        let var = column().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t as f64;
        let inv_std = 1.0 / var.sqrt();
        for row in out.rows_mut() {
            row[dim] = (row[dim] - mean) * inv_std;
        }
    }
    Ok(out)
}

const RESAMPLE_ZERO_CROSSINGS: usize = 16;
const KAISER_BETA: f64 = 8.6;

/// Speed perturbation by windowed-sinc resampling: the output plays
/// `factor` times faster, so its length is `round(len / factor)`.
/// A factor of 1.0 returns the input bit-for-bit.
pub fn speed_perturb(waveform: &Waveform, factor: f64) -> Result<Waveform> {
    validate_speed_factor(factor)?;
    if factor == 1.0 {
        return Ok(waveform.clone());
    }
    let n = waveform.samples.len();
    let out_len = (n as f64 / factor).round() as usize;
    let halfwidth = RESAMPLE_ZERO_CROSSINGS as f64;
    let i0_beta = bessel_i0(KAISER_BETA);

    let mut out = Vec::with_capacity(out_len);
    for m in 0..out_len {
        let pos = m as f64 * factor;
        let lo = (pos - halfwidth).ceil().max(0.0) as usize;
        let hi = ((pos + halfwidth).floor() as usize).min(n.saturating_sub(1));
        let mut acc = 0.0;
        for (k, &sample) in waveform.samples[lo..=hi.max(lo)].iter().enumerate() {
            let t = pos - (lo + k) as f64;
            acc += sample * sinc(t) * kaiser(t / halfwidth, i0_beta);
        }
        out.push(acc);
    }
    Ok(Waveform {
        samples: out,
        sample_rate: waveform.sample_rate,
    })
}

pub fn validate_speed_factor(factor: f64) -> Result<()> {
    if !(factor > 0.5 && factor < 2.0) {
        return Err(Error::invalid(format!(
            "speed factor {factor} outside (0.5, 2.0)"
        )));
    }
    Ok(())
}

fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        (PI * t).sin() / (PI * t)
    }
}

fn kaiser(u: f64, i0_beta: f64) -> f64 {
    let x = 1.0 - u * u;
    if x <= 0.0 {
        0.0
    } else {
        bessel_i0(KAISER_BETA * x.sqrt()) / i0_beta
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Rescales an alignment to track speed-perturbed audio: segment times in
/// seconds are divided by `factor` and re-quantized to frames.
///
/// Degenerate one-frame segments can collide after re-quantization because
/// of the one-frame floor; that case is reported as an error rather than
/// silently reordered.
pub fn scale_alignment(alignment: &UttAlignment, factor: f64) -> Result<UttAlignment> {
    validate_speed_factor(factor)?;
    if factor == 1.0 {
        return Ok(alignment.clone());
    }
    let shift_sec = alignment.frame_shift_ms / 1000.0;
    let mut phones = Vec::with_capacity(alignment.phones.len());
    let mut prev_end = 0usize;
    for seg in &alignment.phones {
        let start_sec = seg.start_frame as f64 * shift_sec / factor;
        let dur_sec = seg.num_frames as f64 * shift_sec / factor;
        let (start_frame, num_frames) =
            frames_from_seconds(start_sec, dur_sec, alignment.frame_shift_ms);
        if !phones.is_empty() && start_frame < prev_end {
            return Err(Error::invalid(format!(
                "utterance {}: phone {} collides with the previous segment after scaling by {factor}",
                alignment.utt_id, seg.phone
            )));
        }
        prev_end = start_frame + num_frames;
        phones.push(PhoneSegment {
            phone: seg.phone.clone(),
            start_frame,
            num_frames,
            word_index: seg.word_index,
        });
    }
    UttAlignment::new(alignment.utt_id.clone(), phones, alignment.frame_shift_ms)
}
