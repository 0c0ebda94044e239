//! Readers and writers for the external file formats: 16-bit PCM mono WAV,
//! the text feature archive, CTM alignment files, and word-piece
//! vocabularies.
//!
//! All functions are pure with respect to their inputs and safe to call
//! concurrently on distinct paths.

use std::collections::BTreeSet;
use std::path::Path;

use indexmap::IndexMap;

use crate::align::{frames_from_seconds, PhoneSegment, UttAlignment};
use crate::error::{Error, Result};
use crate::frontend::FeatureMatrix;
use crate::tokenize::WordPieceVocab;

/// Mono audio with samples scaled to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn duration_sec(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

// --- WAV -------------------------------------------------------------------

const PCM_SCALE: f64 = 32768.0;

/// Reads a RIFF/WAVE file. Only 16-bit PCM mono is accepted; samples are
/// `int16 / 32768` exactly.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let bytes = std::fs::read(path)?;
    parse_wav(&bytes)
}

pub fn parse_wav(bytes: &[u8]) -> Result<Waveform> {
    fn wav_err(field: &str, detail: impl Into<String>) -> Error {
        Error::WavFormat {
            field: field.to_string(),
            detail: detail.into(),
        }
    }

    if bytes.len() < 12 {
        return Err(wav_err("riff", "file shorter than the 12-byte RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(wav_err("riff", "missing RIFF magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(wav_err("wave", "missing WAVE form type"));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    let mut off = 12usize;
    while off + 8 <= bytes.len() {
        let id = &bytes[off..off + 4];
        let size = u32::from_le_bytes(bytes[off + 4..off + 8].try_into().unwrap()) as usize;
        let body_start = off + 8;
        let body_end = body_start + size;
        if body_end > bytes.len() {
            let name = String::from_utf8_lossy(id).trim().to_string();
            return Err(wav_err(
                &name,
                format!("chunk claims {size} bytes but only {} remain", bytes.len() - body_start),
            ));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(wav_err("fmt ", "fmt chunk shorter than 16 bytes"));
                }
                let format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned; odd sizes carry a pad byte.
        off = body_end + (size & 1);
    }

    let (format, channels, rate, bits) = fmt.ok_or_else(|| wav_err("fmt ", "fmt chunk missing"))?;
    if format != 1 {
        return Err(wav_err(
            "audio_format",
            format!("audio_format={format} unsupported (PCM required)"),
        ));
    }
    if channels != 1 {
        return Err(wav_err("channels", format!("channels={channels} unsupported")));
    }
    if bits != 16 {
        return Err(wav_err(
            "bits_per_sample",
            format!("bits_per_sample={bits} unsupported (16 required)"),
        ));
    }
    if rate == 0 {
        return Err(wav_err("sample_rate", "sample_rate=0"));
    }
    let data = data.ok_or_else(|| wav_err("data", "data chunk missing"))?;
    if data.len() % 2 != 0 {
        return Err(wav_err("data", "data chunk has an odd byte count"));
    }

    let samples = data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / PCM_SCALE)
        .collect();
    Ok(Waveform {
        samples,
        sample_rate: rate,
    })
}

/// Writes a 16-bit PCM mono WAV. Samples are clamped to `[-1, 1]` and
/// rounded; values read by [`read_wav`] round-trip sample-exactly.
pub fn write_wav(waveform: &Waveform, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, wav_bytes(waveform))?;
    Ok(())
}

pub fn wav_bytes(waveform: &Waveform) -> Vec<u8> {
    let n = waveform.samples.len();
    let data_size = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_size).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&waveform.sample_rate.to_le_bytes());
    out.extend_from_slice(&(waveform.sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_size.to_le_bytes());
    for &s in &waveform.samples {
        let v = (s * PCM_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

// --- Feature archive --------------------------------------------------------

/// Ordered map from utterance id to feature matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureArchive {
    entries: IndexMap<String, FeatureMatrix>,
}

impl FeatureArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a matrix under `utt_id`, stamping the id onto the matrix.
    pub fn insert(&mut self, utt_id: impl Into<String>, mut matrix: FeatureMatrix) -> Result<()> {
        let utt_id = utt_id.into();
        validate_utt_id(&utt_id)?;
        if self.entries.contains_key(&utt_id) {
            return Err(Error::invalid(format!("duplicate utterance id `{utt_id}`")));
        }
        matrix.utt_id = utt_id.clone();
        self.entries.insert(utt_id, matrix);
        Ok(())
    }

    pub fn get(&self, utt_id: &str) -> Option<&FeatureMatrix> {
        self.entries.get(utt_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &FeatureMatrix)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn validate_utt_id(utt_id: &str) -> Result<()> {
    if utt_id.is_empty() || utt_id.chars().any(char::is_whitespace) {
        return Err(Error::invalid(format!(
            "utterance id `{utt_id}` must be non-empty and contain no whitespace"
        )));
    }
    Ok(())
}

/// Serializes an archive as text: one `utt_id  [` header per utterance, one
/// frame per row, values printed with 17 significant digits so doubles
/// round-trip bit-exactly.
pub fn feature_archive_to_string(archive: &FeatureArchive) -> Result<String> {
    let mut out = String::new();
    for (utt_id, matrix) in archive.iter() {
        if matrix.num_frames() > 0 && matrix.dim() == 0 {
            return Err(Error::invalid(format!(
                "utterance {utt_id}: cannot write a matrix with zero dimensions"
            )));
        }
        out.push_str(utt_id);
        out.push_str("  [\n");
        let last = matrix.num_frames().saturating_sub(1);
        for (t, row) in matrix.rows().iter().enumerate() {
            out.push(' ');
            for v in row {
                if !v.is_finite() {
                    return Err(Error::invalid(format!(
                        "utterance {utt_id}: non-finite value at frame {t}"
                    )));
                }
                out.push(' ');
                out.push_str(&format!("{v:.16e}"));
            }
            if t == last {
                out.push_str(" ]");
            }
            out.push('\n');
        }
        if matrix.num_frames() == 0 {
            out.push_str(" ]\n");
        }
    }
    Ok(out)
}

pub fn write_feature_archive(archive: &FeatureArchive, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, feature_archive_to_string(archive)?)?;
    Ok(())
}

pub fn read_feature_archive(path: impl AsRef<Path>) -> Result<FeatureArchive> {
    parse_feature_archive(&std::fs::read_to_string(path)?)
}

pub fn parse_feature_archive(text: &str) -> Result<FeatureArchive> {
    let mut archive = FeatureArchive::new();
    let mut lines = text.lines().enumerate().peekable();

    while let Some((header_idx, header)) = lines.next() {
        let line_no = header_idx + 1;
        if header.trim().is_empty() {
            continue;
        }
        let header = header.trim_end();
        let Some(utt_part) = header.strip_suffix('[') else {
            return Err(Error::parse(
                line_no,
                format!("expected `utt_id  [` header, got `{header}`"),
            ));
        };
        let utt_id = utt_part.trim();
        validate_utt_id(utt_id).map_err(|e| Error::parse(line_no, e.to_string()))?;

        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut closed = false;
        for (row_idx, raw) in lines.by_ref() {
            let row_no = row_idx + 1;
            let mut tokens: Vec<&str> = raw.split_whitespace().collect();
            let terminal = tokens.last() == Some(&"]");
            if terminal {
                tokens.pop();
            }
            if !tokens.is_empty() {
                let mut row = Vec::with_capacity(tokens.len());
                for tok in &tokens {
                    let v: f64 = tok.parse().map_err(|_| {
                        Error::parse(row_no, format!("expected a number, got `{tok}`"))
                    })?;
                    row.push(v);
                }
                if let Some(first) = rows.first() {
                    if row.len() != first.len() {
                        return Err(Error::parse(
                            row_no,
                            format!("ragged row: {} values, expected {}", row.len(), first.len()),
                        ));
                    }
                }
                rows.push(row);
            }
            if terminal {
                closed = true;
                break;
            }
        }
        if !closed {
            return Err(Error::parse(
                line_no,
                format!("matrix for `{utt_id}` is missing its closing `]`"),
            ));
        }
        let matrix = FeatureMatrix::from_rows(utt_id, rows)
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        archive
            .insert(utt_id, matrix)
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
    }
    Ok(archive)
}

// --- CTM alignments ----------------------------------------------------------

/// Reads a CTM file: `utt_id channel start_sec dur_sec phone [word_index]`
/// per line, `#` comment lines, `-` (or an absent sixth column) marking
/// silence. Times are quantized to frames at `frame_shift_ms`.
pub fn read_ctm(path: impl AsRef<Path>, frame_shift_ms: f64) -> Result<Vec<UttAlignment>> {
    parse_ctm(&std::fs::read_to_string(path)?, frame_shift_ms)
}

pub fn parse_ctm(text: &str, frame_shift_ms: f64) -> Result<Vec<UttAlignment>> {
    struct PendingUtt {
        phones: Vec<PhoneSegment>,
        last_start_sec: f64,
        last_line: usize,
    }

    let mut order: Vec<String> = Vec::new();
    let mut utts: IndexMap<String, PendingUtt> = IndexMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() < 5 || fields.len() > 6 {
            return Err(Error::parse(
                line_no,
                format!("expected 5 or 6 fields, got {}", fields.len()),
            ));
        }
        let utt_id = fields[0];
        validate_utt_id(utt_id).map_err(|e| Error::parse(line_no, e.to_string()))?;
        let _channel: u32 = fields[1]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("unparseable channel `{}`", fields[1])))?;
        let start_sec: f64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("unparseable start time `{}`", fields[2])))?;
        let dur_sec: f64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("unparseable duration `{}`", fields[3])))?;
        if !start_sec.is_finite() || start_sec < 0.0 {
            return Err(Error::parse(line_no, format!("negative start time {start_sec}")));
        }
        if !dur_sec.is_finite() || dur_sec < 0.0 {
            return Err(Error::parse(line_no, format!("negative duration {dur_sec}")));
        }
        if dur_sec == 0.0 {
            return Err(Error::parse(line_no, "zero duration".to_string()));
        }
        let phone = fields[4].to_string();
        let word_index = match fields.get(5) {
            None | Some(&"-") => None,
            Some(tok) => Some(tok.parse::<usize>().map_err(|_| {
                Error::parse(line_no, format!("unparseable word index `{tok}`"))
            })?),
        };

        let (start_frame, num_frames) = frames_from_seconds(start_sec, dur_sec, frame_shift_ms);
        let entry = utts.entry(utt_id.to_string()).or_insert_with(|| {
            order.push(utt_id.to_string());
            PendingUtt {
                phones: Vec::new(),
                last_start_sec: f64::NEG_INFINITY,
                last_line: 0,
            }
        });
        if start_sec <= entry.last_start_sec {
            return Err(Error::parse(
                line_no,
                format!(
                    "non-monotonic start time {start_sec} (previous segment at line {} started at {})",
                    entry.last_line, entry.last_start_sec
                ),
            ));
        }
        if let Some(prev) = entry.phones.last() {
            if start_frame < prev.end_frame() {
                return Err(Error::parse(
                    line_no,
                    format!(
                        "segment overlaps previous after frame quantization (starts at frame {start_frame}, previous ends at {})",
                        prev.end_frame()
                    ),
                ));
            }
        }
        entry.last_start_sec = start_sec;
        entry.last_line = line_no;
        entry.phones.push(PhoneSegment {
            phone,
            start_frame,
            num_frames,
            word_index,
        });
    }

    let mut out = Vec::with_capacity(order.len());
    for utt_id in order {
        let pending = utts.shift_remove(&utt_id).expect("utt recorded");
        let ali = UttAlignment::new(&utt_id, pending.phones, frame_shift_ms)
            .map_err(|e| Error::invalid(format!("utterance {utt_id}: {e}")))?;
        out.push(ali);
    }
    Ok(out)
}

/// Serializes alignments back to CTM, frame times rendered in seconds.
pub fn ctm_to_string(alignments: &[UttAlignment]) -> String {
    let mut out = String::new();
    for ali in alignments {
        let shift_sec = ali.frame_shift_ms / 1000.0;
        for seg in &ali.phones {
            let start = seg.start_frame as f64 * shift_sec;
            let dur = seg.num_frames as f64 * shift_sec;
            let word = match seg.word_index {
                Some(w) => w.to_string(),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "{} 1 {:.4} {:.4} {} {}\n",
                ali.utt_id, start, dur, seg.phone, word
            ));
        }
    }
    out
}

// --- Word-piece vocabulary ---------------------------------------------------

/// Reads a vocabulary: one UTF-8 piece per line, duplicates rejected.
pub fn read_vocab(path: impl AsRef<Path>) -> Result<WordPieceVocab> {
    parse_vocab(&std::fs::read_to_string(path)?)
}

pub fn parse_vocab(text: &str) -> Result<WordPieceVocab> {
    let mut seen = BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() {
            return Err(Error::parse(line_no, "empty vocabulary piece".to_string()));
        }
        if !seen.insert(line.to_string()) {
            return Err(Error::parse(
                line_no,
                format!("duplicate vocabulary piece `{line}`"),
            ));
        }
    }
    Ok(WordPieceVocab::from_pieces(seen))
}
