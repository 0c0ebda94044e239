//! Grapheme splitting and word-piece segmentation against a supplied
//! vocabulary, plus the mapping from pieces to frame spans used by
//! word-piece masking.

use std::collections::BTreeSet;
use std::ops::Range;

use unicode_segmentation::UnicodeSegmentation;

use crate::align::{PhoneSegment, WordSegment};
use crate::error::{Error, Result};

/// An immutable set of word-piece strings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordPieceVocab {
    pieces: BTreeSet<String>,
    max_graphemes: usize,
}

impl WordPieceVocab {
    pub fn from_pieces(pieces: impl IntoIterator<Item = String>) -> Self {
        let pieces: BTreeSet<String> = pieces.into_iter().collect();
        let max_graphemes = pieces
            .iter()
            .map(|p| p.graphemes(true).count())
            .max()
            .unwrap_or(0);
        WordPieceVocab {
            pieces,
            max_graphemes,
        }
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.pieces.contains(piece)
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }
}

/// Splits a word into grapheme clusters (combining marks stay attached to
/// their base character).
pub fn graphemes(word: &str) -> Result<Vec<String>> {
    if word.is_empty() {
        return Err(Error::invalid("cannot split an empty word"));
    }
    Ok(word.graphemes(true).map(str::to_string).collect())
}

/// One segmented piece; `unknown` marks a single-grapheme fallback that was
/// not in the vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub text: String,
    pub num_graphemes: usize,
    pub unknown: bool,
}

/// Greedy longest-match segmentation over graphemes. Unmatched graphemes
/// fall back to single-grapheme unknown pieces, so the concatenation of the
/// output always equals the input word.
pub fn segment_word_pieces(word: &str, vocab: &WordPieceVocab) -> Result<Vec<Piece>> {
    let gs = graphemes(word)?;
    let mut out = Vec::new();
    let mut at = 0usize;
    while at < gs.len() {
        let longest = vocab.max_graphemes.min(gs.len() - at);
        let mut matched = 0usize;
        for len in (1..=longest).rev() {
            let candidate: String = gs[at..at + len].concat();
            if vocab.contains(&candidate) {
                matched = len;
                break;
            }
        }
        if matched == 0 {
            out.push(Piece {
                text: gs[at].clone(),
                num_graphemes: 1,
                unknown: true,
            });
            at += 1;
        } else {
            out.push(Piece {
                text: gs[at..at + matched].concat(),
                num_graphemes: matched,
                unknown: false,
            });
            at += matched;
        }
    }
    Ok(out)
}

/// A piece with its frame span inside a word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PieceSpan {
    pub piece: Piece,
    /// Phone indices (within the word) backing the span, when graphemes map
    /// one-to-one onto phones.
    pub phone_range: Option<Range<usize>>,
    pub start_frame: usize,
    pub num_frames: usize,
}

impl PieceSpan {
    pub fn end_frame(&self) -> usize {
        self.start_frame + self.num_frames
    }
}

/// Assigns frame spans to pieces so they partition the word's frames.
///
/// When the word has exactly one phone per grapheme, piece boundaries fall
/// on phone boundaries. Otherwise frames are allocated proportionally to
/// grapheme counts with largest-remainder rounding.
pub fn piece_frame_spans(
    word: &WordSegment,
    phones_of_word: &[PhoneSegment],
    pieces: &[Piece],
) -> Result<Vec<PieceSpan>> {
    let total_graphemes: usize = pieces.iter().map(|p| p.num_graphemes).sum();
    if pieces.is_empty() || total_graphemes == 0 {
        return Err(Error::invalid("no pieces to span"));
    }

    let word_start = word.start_frame;
    let word_end = word.end_frame();

    if total_graphemes == phones_of_word.len() {
        // One grapheme per phone: cut the word at each piece's first phone.
        let mut spans = Vec::with_capacity(pieces.len());
        let mut phone_at = 0usize;
        for (i, piece) in pieces.iter().enumerate() {
            let first_phone = phone_at;
            phone_at += piece.num_graphemes;
            let start = if i == 0 {
                word_start
            } else {
                phones_of_word[first_phone].start_frame.clamp(word_start, word_end)
            };
            let end = if i == pieces.len() - 1 {
                word_end
            } else {
                phones_of_word[phone_at].start_frame.clamp(start, word_end)
            };
            spans.push(PieceSpan {
                piece: piece.clone(),
                phone_range: Some(first_phone..phone_at),
                start_frame: start,
                num_frames: end - start,
            });
        }
        return Ok(spans);
    }

    // Largest-remainder allocation of the word's frames.
    let frames = word.num_frames;
    let mut alloc: Vec<usize> = Vec::with_capacity(pieces.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(pieces.len());
    let mut assigned = 0usize;
    for (i, piece) in pieces.iter().enumerate() {
        let quota = frames as f64 * piece.num_graphemes as f64 / total_graphemes as f64;
        let floor = quota.floor() as usize;
        alloc.push(floor);
        assigned += floor;
        remainders.push((i, quota - floor as f64));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for &(i, _) in remainders.iter().take(frames - assigned) {
        alloc[i] += 1;
    }

    let mut spans = Vec::with_capacity(pieces.len());
    let mut at = word_start;
    for (piece, n) in pieces.iter().zip(alloc) {
        spans.push(PieceSpan {
            piece: piece.clone(),
            phone_range: None,
            start_frame: at,
            num_frames: n,
        });
        at += n;
    }
    debug_assert_eq!(at, word_end);
    Ok(spans)
}
