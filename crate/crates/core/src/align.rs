//! In-memory alignment model: phone segments, word spans, validation
//! against feature matrices, and duration statistics.

use std::collections::BTreeMap;
use std::ops::Range;

use crate::error::{Error, Result};

/// One aligned phone. `word_index` is `None` for silence / non-speech.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhoneSegment {
    pub phone: String,
    pub start_frame: usize,
    pub num_frames: usize,
    pub word_index: Option<usize>,
}

impl PhoneSegment {
    pub fn end_frame(&self) -> usize {
        self.start_frame + self.num_frames
    }

    pub fn is_silence(&self) -> bool {
        self.word_index.is_none()
    }
}

/// A word span: the contiguous run of phones sharing one word index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSegment {
    pub word_index: usize,
    /// Index range into the owning utterance's phone list.
    pub phone_range: Range<usize>,
    pub start_frame: usize,
    pub num_frames: usize,
}

impl WordSegment {
    pub fn end_frame(&self) -> usize {
        self.start_frame + self.num_frames
    }
}

/// Per-utterance alignment: sorted, non-overlapping phone segments plus the
/// word spans derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct UttAlignment {
    pub utt_id: String,
    pub phones: Vec<PhoneSegment>,
    pub words: Vec<WordSegment>,
    pub frame_shift_ms: f64,
}

impl UttAlignment {
    /// Builds the alignment, deriving word spans from the phones.
    pub fn new(utt_id: impl Into<String>, phones: Vec<PhoneSegment>, frame_shift_ms: f64) -> Result<Self> {
        let words = build_word_spans(&phones)?;
        Ok(UttAlignment {
            utt_id: utt_id.into(),
            phones,
            words,
            frame_shift_ms,
        })
    }

    /// Frame index one past the last aligned frame.
    pub fn end_frame(&self) -> usize {
        self.phones.last().map_or(0, |p| p.end_frame())
    }

    pub fn word(&self, word_index: usize) -> Option<&WordSegment> {
        self.words.iter().find(|w| w.word_index == word_index)
    }
}

/// Quantizes a `(start_sec, dur_sec)` span to frames: round both boundaries
/// to the nearest frame, then floor the width at one frame so every segment
/// stays maskable.
pub fn frames_from_seconds(start_sec: f64, dur_sec: f64, frame_shift_ms: f64) -> (usize, usize) {
    let shift_sec = frame_shift_ms / 1000.0;
    let start_frame = (start_sec / shift_sec).round() as usize;
    let end_frame = ((start_sec + dur_sec) / shift_sec).round() as usize;
    let num_frames = end_frame.saturating_sub(start_frame).max(1);
    (start_frame, num_frames)
}

/// Checks that segments are sorted, non-overlapping, and end within
/// `num_feature_frames` plus a two-frame slack for framing differences.
pub fn validate_alignment(alignment: &UttAlignment, num_feature_frames: usize) -> Result<()> {
    let mut prev_end = 0usize;
    for (i, seg) in alignment.phones.iter().enumerate() {
        if i > 0 && seg.start_frame < prev_end {
            return Err(Error::invalid(format!(
                "utterance {}: segment {} ({}) at frame {} overlaps previous segment ending at {}",
                alignment.utt_id, i, seg.phone, seg.start_frame, prev_end
            )));
        }
        prev_end = seg.end_frame();
    }
    let end = alignment.end_frame();
    if end > num_feature_frames + 2 {
        return Err(Error::invalid(format!(
            "utterance {}: alignment exceeds features by {} > 2 (alignment ends at frame {}, features have {})",
            alignment.utt_id,
            end - num_feature_frames,
            end,
            num_feature_frames
        )));
    }
    Ok(())
}

/// Groups phones into word spans. Each word index must occupy one
/// contiguous run of phones; silence may separate words but not split one.
pub fn build_word_spans(phones: &[PhoneSegment]) -> Result<Vec<WordSegment>> {
    let mut words: Vec<WordSegment> = Vec::new();
    let mut closed: Vec<usize> = Vec::new();
    let mut current: Option<(usize, usize)> = None; // (word_index, first phone idx)

    for (i, seg) in phones.iter().enumerate() {
        match (current, seg.word_index) {
            (Some((w, first)), Some(idx)) if idx == w => {
                let _ = (first, idx);
            }
            (maybe, idx_opt) => {
                if let Some((w, first)) = maybe {
                    words.push(make_word(phones, w, first..i));
                    closed.push(w);
                }
                current = match idx_opt {
                    Some(idx) => {
                        if closed.contains(&idx) {
                            return Err(Error::invalid(format!(
                                "word {} split by other material (phone {} at frame {})",
                                idx, seg.phone, seg.start_frame
                            )));
                        }
                        Some((idx, i))
                    }
                    None => None,
                };
            }
        }
    }
    if let Some((w, first)) = current {
        words.push(make_word(phones, w, first..phones.len()));
    }
    Ok(words)
}

fn make_word(phones: &[PhoneSegment], word_index: usize, range: Range<usize>) -> WordSegment {
    let start = phones[range.start].start_frame;
    let end = phones[range.end - 1].end_frame();
    WordSegment {
        word_index,
        phone_range: range,
        start_frame: start,
        num_frames: end - start,
    }
}

/// Duration summary for one phone label.
#[derive(Debug, Clone, PartialEq)]
pub struct PhoneDuration {
    pub count: usize,
    pub mean_sec: f64,
    pub min_sec: f64,
    pub max_sec: f64,
}

/// Corpus-level phone duration statistics. Silence segments are excluded
/// throughout; `short_phone_ratio` is the fraction of speech phones lasting
/// exactly three frames.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationStats {
    pub per_phone: BTreeMap<String, PhoneDuration>,
    pub overall_mean_sec: f64,
    pub short_phone_ratio: f64,
    pub frame_shift_ms: f64,
}

/// Seconds spanned by `num_frames` frames. Multiplies before dividing so
/// integer frame counts at a 10 ms shift land on exact decimals.
pub fn frames_to_seconds(num_frames: usize, frame_shift_ms: f64) -> f64 {
    num_frames as f64 * frame_shift_ms / 1000.0
}

pub fn duration_stats(alignments: &[UttAlignment], frame_shift_ms: f64) -> Result<DurationStats> {
    let mut per_phone: BTreeMap<String, (usize, f64, f64, f64)> = BTreeMap::new();
    let mut total_sec = 0.0f64;
    let mut count = 0usize;
    let mut short = 0usize;

    for ali in alignments {
        for seg in ali.phones.iter().filter(|s| !s.is_silence()) {
            let dur = frames_to_seconds(seg.num_frames, frame_shift_ms);
            total_sec += dur;
            count += 1;
            if seg.num_frames == 3 {
                short += 1;
            }
            let entry = per_phone
                .entry(seg.phone.clone())
                .or_insert((0, 0.0, f64::INFINITY, f64::NEG_INFINITY));
            entry.0 += 1;
            entry.1 += dur;
            entry.2 = entry.2.min(dur);
            entry.3 = entry.3.max(dur);
        }
    }

    if count == 0 {
        return Err(Error::invalid(
            "duration statistics need at least one non-silence phone",
        ));
    }

    Ok(DurationStats {
        per_phone: per_phone
            .into_iter()
            .map(|(phone, (n, sum, min, max))| {
                (
                    phone,
                    PhoneDuration {
                        count: n,
                        mean_sec: sum / n as f64,
                        min_sec: min,
                        max_sec: max,
                    },
                )
            })
            .collect(),
        overall_mean_sec: total_sec / count as f64,
        short_phone_ratio: short as f64 / count as f64,
        frame_shift_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phone(label: &str, start: usize, len: usize, word: Option<usize>) -> PhoneSegment {
        PhoneSegment {
            phone: label.to_string(),
            start_frame: start,
            num_frames: len,
            word_index: word,
        }
    }

    #[test]
    fn frames_from_seconds_basic() {
        assert_eq!(frames_from_seconds(0.0, 0.08, 10.0), (0, 8));
    }

    #[test]
    fn frames_from_seconds_floors_at_one_frame() {
        // round(0.005/0.01) = 1 (round half away from zero), round(0.016/0.01) = 2,
        // but a 2 ms tail would give zero frames without the floor.
        assert_eq!(frames_from_seconds(0.005, 0.011, 10.0), (1, 1));
        assert_eq!(frames_from_seconds(0.10, 0.001, 10.0), (10, 1));
    }

    #[test]
    fn adjacent_segments_quantize_adjacent() {
        // Adjacent spans with durations of at least one frame shift share a
        // boundary after quantization.
        let shift = 10.0;
        let mut cases = Vec::new();
        for i in 0..200 {
            let s = i as f64 * 0.0137;
            let d1 = 0.011 + (i % 7) as f64 * 0.013;
            let d2 = 0.012 + (i % 5) as f64 * 0.017;
            cases.push((s, d1, d2));
        }
        for (s, d1, d2) in cases {
            let (a0, n1) = frames_from_seconds(s, d1, shift);
            let (b0, _) = frames_from_seconds(s + d1, d2, shift);
            assert_eq!(a0 + n1, b0, "s={s} d1={d1} d2={d2}");
        }
    }

    #[test]
    fn quantized_total_within_one_frame_per_segment() {
        // Each boundary contributes at most one frame of rounding, so the
        // summed frame count stays within the segment count of the ideal.
        let shift = 10.0;
        for case in 0..100 {
            let n_segs = 1 + case % 9;
            let mut at = 0.013 * case as f64;
            let start = at;
            let mut total_frames = 0usize;
            for i in 0..n_segs {
                let dur = 0.017 + 0.011 * ((case + i) % 6) as f64;
                let (_, num) = frames_from_seconds(at, dur, shift);
                total_frames += num;
                at += dur;
            }
            let ideal = ((at - start) / (shift / 1000.0)).round();
            assert!(
                (total_frames as f64 - ideal).abs() <= n_segs as f64,
                "case {case}: {total_frames} frames vs ideal {ideal}"
            );
        }
    }

    #[test]
    fn validate_accepts_two_frame_slack() {
        let ali = UttAlignment::new("u1", vec![phone("a", 0, 98, Some(0))], 10.0).unwrap();
        assert!(validate_alignment(&ali, 98).is_ok());
        assert!(validate_alignment(&ali, 96).is_ok());
    }

    #[test]
    fn validate_rejects_three_frame_excess() {
        let ali = UttAlignment::new("u1", vec![phone("a", 0, 101, Some(0))], 10.0).unwrap();
        let err = validate_alignment(&ali, 98).unwrap_err().to_string();
        assert!(err.contains("exceeds features by 3 > 2"), "{err}");
    }

    #[test]
    fn validate_rejects_overlap() {
        let ali = UttAlignment {
            utt_id: "u1".into(),
            phones: vec![phone("a", 0, 5, Some(0)), phone("b", 3, 4, Some(1))],
            words: vec![],
            frame_shift_ms: 10.0,
        };
        let err = validate_alignment(&ali, 100).unwrap_err().to_string();
        assert!(err.contains("overlaps"), "{err}");
    }

    #[test]
    fn word_spans_group_contiguous_runs() {
        let phones = vec![
            phone("a", 0, 3, Some(0)),
            phone("b", 3, 4, Some(0)),
            phone("c", 7, 5, Some(1)),
        ];
        let words = build_word_spans(&phones).unwrap();
        assert_eq!(words.len(), 2);
        assert_eq!(words[0].word_index, 0);
        assert_eq!(words[0].phone_range, 0..2);
        assert_eq!(words[0].start_frame, 0);
        assert_eq!(words[0].num_frames, 7);
        assert_eq!(words[1].phone_range, 2..3);
        assert_eq!(words[1].num_frames, 5);
    }

    #[test]
    fn all_silence_yields_no_words() {
        let phones = vec![phone("SIL", 0, 10, None)];
        assert!(build_word_spans(&phones).unwrap().is_empty());
    }

    #[test]
    fn split_word_is_rejected() {
        let phones = vec![
            phone("a", 0, 3, Some(0)),
            phone("SIL", 3, 2, None),
            phone("b", 5, 3, Some(0)),
        ];
        let err = build_word_spans(&phones).unwrap_err().to_string();
        assert!(err.contains("word 0 split by other material"), "{err}");
    }

    #[test]
    fn word_spans_round_trip_word_indices() {
        let phones = vec![
            phone("a", 0, 3, Some(0)),
            phone("b", 3, 3, Some(1)),
            phone("SIL", 6, 2, None),
            phone("c", 8, 3, Some(2)),
            phone("d", 11, 3, Some(2)),
        ];
        let words = build_word_spans(&phones).unwrap();
        let flattened: Vec<usize> = words
            .iter()
            .flat_map(|w| w.phone_range.clone().map(move |_| w.word_index))
            .collect();
        let original: Vec<usize> = phones.iter().filter_map(|p| p.word_index).collect();
        assert_eq!(flattened, original);
    }

    #[test]
    fn duration_stats_single_phone() {
        let ali = UttAlignment::new("u1", vec![phone("uyg", 0, 8, Some(0))], 10.0).unwrap();
        let stats = duration_stats(&[ali], 10.0).unwrap();
        assert_eq!(stats.overall_mean_sec, 0.08);
        assert_eq!(stats.per_phone["uyg"].count, 1);
        assert_eq!(stats.per_phone["uyg"].mean_sec, 0.08);
    }

    #[test]
    fn duration_stats_per_phone_means() {
        let phones = vec![
            phone("man", 0, 14, Some(0)),
            phone("eng", 14, 10, Some(1)),
            phone("uyg", 24, 8, Some(2)),
        ];
        let ali = UttAlignment::new("u1", phones, 10.0).unwrap();
        let stats = duration_stats(&[ali], 10.0).unwrap();
        assert_eq!(stats.per_phone["man"].mean_sec, 0.14);
        assert_eq!(stats.per_phone["eng"].mean_sec, 0.10);
        assert_eq!(stats.per_phone["uyg"].mean_sec, 0.08);
    }

    #[test]
    fn short_phone_ratio_counts_three_frame_phones() {
        let phones = vec![
            phone("a", 0, 3, Some(0)),
            phone("b", 3, 3, Some(1)),
            phone("c", 6, 4, Some(2)),
            phone("d", 10, 5, Some(3)),
        ];
        let ali = UttAlignment::new("u1", phones, 10.0).unwrap();
        let stats = duration_stats(&[ali], 10.0).unwrap();
        assert_eq!(stats.short_phone_ratio, 0.5);
    }

    #[test]
    fn silence_excluded_from_stats() {
        let phones = vec![phone("SIL", 0, 3, None), phone("a", 3, 8, Some(0))];
        let ali = UttAlignment::new("u1", phones, 10.0).unwrap();
        let stats = duration_stats(&[ali], 10.0).unwrap();
        assert_eq!(stats.overall_mean_sec, 0.08);
        assert!(!stats.per_phone.contains_key("SIL"));
        assert_eq!(stats.short_phone_ratio, 0.0);
    }

    #[test]
    fn stats_require_speech() {
        let ali = UttAlignment::new("u1", vec![phone("SIL", 0, 3, None)], 10.0).unwrap();
        assert!(duration_stats(&[ali], 10.0).is_err());
    }

    #[test]
    fn overall_mean_matches_naive_recount() {
        // Naive oracle: collect every speech duration and average it the
        // obvious way; must agree bit-for-bit.
        let mut alignments = Vec::new();
        let mut lens = Vec::new();
        for u in 0..13 {
            let mut phones = Vec::new();
            let mut at = 0usize;
            for i in 0..(3 + u % 5) {
                let len = 1 + (u * 7 + i * 3) % 19;
                phones.push(phone(&format!("p{}", i % 4), at, len, Some(i)));
                lens.push(len);
                at += len;
            }
            alignments.push(UttAlignment::new(format!("u{u}"), phones, 10.0).unwrap());
        }
        let stats = duration_stats(&alignments, 10.0).unwrap();
        let mut sum = 0.0f64;
        for len in &lens {
            sum += frames_to_seconds(*len, 10.0);
        }
        let naive = sum / lens.len() as f64;
        assert_eq!(stats.overall_mean_sec, naive);
    }
}
