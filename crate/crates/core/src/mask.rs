//! Masking augmentation: phone mask (PM), word-piece mask (WPM), word mask
//! (STM), and SpecAugment, with mean-fill strategies and deterministic
//! per-utterance seeding.
//!
//! Planning is separated from application: a [`MaskPlan`] records concrete
//! frame/dimension regions plus how each region is filled, and
//! [`apply_mask`] writes the fills into a copy of the features. Fills are
//! always computed from the unmasked input, so region order only matters
//! where SpecAugment regions overlap (last writer wins).

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;

use crate::align::{validate_alignment, UttAlignment};
use crate::error::{Error, Result};
use crate::frontend::FeatureMatrix;
use crate::io::FeatureArchive;
use crate::rng::{mix64, SplitMix64};
use crate::tokenize::{piece_frame_spans, segment_word_pieces, WordPieceVocab};

/// Masking unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMethod {
    /// Phone mask: masks the frame span of randomly selected phones.
    Phone,
    /// Word-piece mask: masks randomly selected word-piece spans.
    WordPiece,
    /// Word (semantic) mask: masks whole word spans.
    Word,
    /// Random time and frequency stripes, zero-filled.
    SpecAugment,
}

impl MaskMethod {
    pub fn needs_alignment(self) -> bool {
        self != MaskMethod::SpecAugment
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MaskMethod::Phone => "pm",
            MaskMethod::WordPiece => "wpm",
            MaskMethod::Word => "stm",
            MaskMethod::SpecAugment => "specaugment",
        }
    }
}

impl fmt::Display for MaskMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What masked segment regions are filled with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillStrategy {
    /// Per-dimension mean over the whole utterance.
    UtteranceMean,
    /// Per-dimension mean over the containing word (the `_FW` variant).
    WordMean,
}

impl FillStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            FillStrategy::UtteranceMean => "utt_mean",
            FillStrategy::WordMean => "word_mean",
        }
    }
}

/// SpecAugment stripe parameters: `num_freq_masks` frequency stripes of
/// width up to `max_freq_width`, and `num_time_masks` time stripes of width
/// up to `max_time_width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecAugmentParams {
    pub max_freq_width: usize,
    pub num_freq_masks: usize,
    pub max_time_width: usize,
    pub num_time_masks: usize,
}

impl Default for SpecAugmentParams {
    fn default() -> Self {
        SpecAugmentParams {
            max_freq_width: 8,
            num_freq_masks: 2,
            max_time_width: 40,
            num_time_masks: 2,
        }
    }
}

/// Full masking configuration. The default mirrors the common 15% ratio;
/// 20% is the tuned optimum for phone and word-piece masking.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskConfig {
    pub method: MaskMethod,
    pub ratio: f64,
    pub fill: FillStrategy,
    pub spec_augment: SpecAugmentParams,
    pub seed: u64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            method: MaskMethod::Phone,
            ratio: 0.15,
            fill: FillStrategy::UtteranceMean,
            spec_augment: SpecAugmentParams::default(),
            seed: 0,
        }
    }
}

impl MaskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(Error::invalid(format!(
                "mask ratio {} outside [0, 1]",
                self.ratio
            )));
        }
        Ok(())
    }
}

/// How one region's fill vector is computed from the unmasked features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillSource {
    Zero,
    UtteranceMean,
    /// Mean over the recorded word span.
    WordMean {
        word_start: usize,
        word_end: usize,
    },
}

impl FillSource {
    pub fn kind_label(self) -> &'static str {
        match self {
            FillSource::Zero => "zero",
            FillSource::UtteranceMean => "utt_mean",
            FillSource::WordMean { .. } => "word_mean",
        }
    }
}

/// A rectangular masked region: frames `[start_frame, end_frame)` over
/// dimensions `[dim_start, dim_end)`. SpecAugment draws may produce
/// zero-width (no-op) regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskRegion {
    pub start_frame: usize,
    pub end_frame: usize,
    pub dim_start: usize,
    pub dim_end: usize,
    pub fill: FillSource,
}

/// A reproducible per-utterance masking plan.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPlan {
    pub utt_id: String,
    pub regions: Vec<MaskRegion>,
    pub config: MaskConfig,
    pub utt_seed: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Derives the per-utterance seed: FNV-1a over the utterance id, XORed with
/// the global seed, passed through the SplitMix64 finalizer.
pub fn derive_utt_seed(global_seed: u64, utt_id: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in utt_id.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    mix64(h ^ global_seed)
}

/// Number of units to mask: `round(ratio * n)`, at least one whenever the
/// ratio is positive and there is anything to select.
fn mask_count(ratio: f64, n: usize) -> usize {
    if ratio == 0.0 || n == 0 {
        return 0;
    }
    ((ratio * n as f64).round() as usize).max(1).min(n)
}

/// First `k` entries of a seeded Fisher-Yates shuffle of `0..n`, in
/// selection order.
fn select_without_replacement(n: usize, k: usize, rng: &mut SplitMix64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = i + rng.next_below((n - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

fn segment_fill(
    strategy: FillStrategy,
    alignment: &UttAlignment,
    word_index: Option<usize>,
) -> FillSource {
    match strategy {
        FillStrategy::UtteranceMean => FillSource::UtteranceMean,
        FillStrategy::WordMean => match word_index.and_then(|w| alignment.word(w)) {
            Some(word) => FillSource::WordMean {
                word_start: word.start_frame,
                word_end: word.end_frame(),
            },
            // Segments outside any word only occur in malformed data; fall
            // back to the utterance mean.
            None => FillSource::UtteranceMean,
        },
    }
}

/// Plans a phone mask: selects `round(ratio * N)` of the `N` non-silence
/// phones and masks each one's full-band frame span.
pub fn plan_phone_mask(
    alignment: &UttAlignment,
    num_dims: usize,
    config: &MaskConfig,
    utt_seed: u64,
) -> MaskPlan {
    let eligible: Vec<usize> = alignment
        .phones
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_silence())
        .map(|(i, _)| i)
        .collect();
    let k = mask_count(config.ratio, eligible.len());
    let mut rng = SplitMix64::new(utt_seed);
    let regions = select_without_replacement(eligible.len(), k, &mut rng)
        .into_iter()
        .map(|pick| {
            let phone = &alignment.phones[eligible[pick]];
            MaskRegion {
                start_frame: phone.start_frame,
                end_frame: phone.end_frame(),
                dim_start: 0,
                dim_end: num_dims,
                fill: segment_fill(config.fill, alignment, phone.word_index),
            }
        })
        .collect();
    MaskPlan {
        utt_id: alignment.utt_id.clone(),
        regions,
        config: config.clone(),
        utt_seed,
    }
}

/// Plans a word (semantic) mask over whole word spans.
pub fn plan_word_mask(
    alignment: &UttAlignment,
    num_dims: usize,
    config: &MaskConfig,
    utt_seed: u64,
) -> MaskPlan {
    let k = mask_count(config.ratio, alignment.words.len());
    let mut rng = SplitMix64::new(utt_seed);
    let regions = select_without_replacement(alignment.words.len(), k, &mut rng)
        .into_iter()
        .map(|pick| {
            let word = &alignment.words[pick];
            MaskRegion {
                start_frame: word.start_frame,
                end_frame: word.end_frame(),
                dim_start: 0,
                dim_end: num_dims,
                fill: segment_fill(config.fill, alignment, Some(word.word_index)),
            }
        })
        .collect();
    MaskPlan {
        utt_id: alignment.utt_id.clone(),
        regions,
        config: config.clone(),
        utt_seed,
    }
}

/// Plans a word-piece mask: every word is segmented against the vocabulary
/// (its text is the concatenation of its phone labels), the piece spans are
/// pooled, and `round(ratio * |pieces|)` spans are selected.
pub fn plan_word_piece_mask(
    alignment: &UttAlignment,
    vocab: &WordPieceVocab,
    num_dims: usize,
    config: &MaskConfig,
    utt_seed: u64,
) -> Result<MaskPlan> {
    let mut pool: Vec<(usize, usize, usize)> = Vec::new(); // (start, end, word_index)
    for word in &alignment.words {
        let phones = &alignment.phones[word.phone_range.clone()];
        let text: String = phones.iter().map(|p| p.phone.as_str()).collect();
        let pieces = segment_word_pieces(&text, vocab)?;
        for span in piece_frame_spans(word, phones, &pieces)? {
            pool.push((span.start_frame, span.end_frame(), word.word_index));
        }
    }
    let k = mask_count(config.ratio, pool.len());
    let mut rng = SplitMix64::new(utt_seed);
    let regions = select_without_replacement(pool.len(), k, &mut rng)
        .into_iter()
        .map(|pick| {
            let (start, end, word_index) = pool[pick];
            MaskRegion {
                start_frame: start,
                end_frame: end,
                dim_start: 0,
                dim_end: num_dims,
                fill: segment_fill(config.fill, alignment, Some(word_index)),
            }
        })
        .collect();
    Ok(MaskPlan {
        utt_id: alignment.utt_id.clone(),
        regions,
        config: config.clone(),
        utt_seed,
    })
}

/// Plans SpecAugment stripes: time masks first, then frequency masks, all
/// zero-filled (features are post-CMVN, so zero is the global mean).
pub fn plan_spec_augment(
    utt_id: &str,
    num_frames: usize,
    num_dims: usize,
    config: &MaskConfig,
    utt_seed: u64,
) -> Result<MaskPlan> {
    let spec = config.spec_augment;
    if spec.max_freq_width >= num_dims && num_dims > 0 && spec.num_freq_masks > 0 {
        return Err(Error::invalid(format!(
            "max_freq_width {} must be smaller than the feature dimension {}",
            spec.max_freq_width, num_dims
        )));
    }
    let mut regions = Vec::new();
    let mut rng = SplitMix64::new(utt_seed);
    if num_frames > 0 {
        for _ in 0..spec.num_time_masks {
            let max_w = spec.max_time_width.min(num_frames);
            let w = rng.next_below(max_w as u64 + 1) as usize;
            let start = rng.next_below((num_frames - w) as u64 + 1) as usize;
            regions.push(MaskRegion {
                start_frame: start,
                end_frame: start + w,
                dim_start: 0,
                dim_end: num_dims,
                fill: FillSource::Zero,
            });
        }
        if num_dims > 0 {
            for _ in 0..spec.num_freq_masks {
                let w = rng.next_below(spec.max_freq_width as u64 + 1) as usize;
                let start = rng.next_below((num_dims - w) as u64 + 1) as usize;
                regions.push(MaskRegion {
                    start_frame: 0,
                    end_frame: num_frames,
                    dim_start: start,
                    dim_end: start + w,
                    fill: FillSource::Zero,
                });
            }
        }
    }
    Ok(MaskPlan {
        utt_id: utt_id.to_string(),
        regions,
        config: config.clone(),
        utt_seed,
    })
}

/// Plans a mask for one utterance with the method picked by the config.
pub fn plan_mask(
    features: &FeatureMatrix,
    alignment: Option<&UttAlignment>,
    vocab: Option<&WordPieceVocab>,
    config: &MaskConfig,
    utt_seed: u64,
) -> Result<MaskPlan> {
    let d = features.dim();
    match config.method {
        MaskMethod::SpecAugment => {
            plan_spec_augment(&features.utt_id, features.num_frames(), d, config, utt_seed)
        }
        method => {
            let alignment = alignment.ok_or_else(|| {
                Error::MissingAlignment(vec![features.utt_id.clone()])
            })?;
            match method {
                MaskMethod::Phone => Ok(plan_phone_mask(alignment, d, config, utt_seed)),
                MaskMethod::Word => Ok(plan_word_mask(alignment, d, config, utt_seed)),
                MaskMethod::WordPiece => {
                    let vocab = vocab.ok_or_else(|| {
                        Error::invalid("word-piece masking requires a vocabulary")
                    })?;
                    plan_word_piece_mask(alignment, vocab, d, config, utt_seed)
                }
                MaskMethod::SpecAugment => unreachable!(),
            }
        }
    }
}

fn mean_over(features: &FeatureMatrix, frames: (usize, usize), dims: (usize, usize)) -> Vec<f64> {
    let (f0, f1) = frames;
    let (d0, d1) = dims;
    let n = (f1 - f0) as f64;
    let mut mean = vec![0.0; d1 - d0];
    for row in &features.rows()[f0..f1] {
        for (acc, v) in mean.iter_mut().zip(&row[d0..d1]) {
            *acc += v;
        }
    }
    for acc in &mut mean {
        *acc /= n;
    }
    mean
}

/// Resolves a region's recorded fill source to a concrete vector.
pub fn fill_vector(features: &FeatureMatrix, region: &MaskRegion) -> Result<Vec<f64>> {
    if features.num_frames() == 0 {
        return Err(Error::invalid("cannot compute a fill over empty features"));
    }
    let dims = (region.dim_start, region.dim_end);
    match region.fill {
        FillSource::Zero => Ok(vec![0.0; region.dim_end - region.dim_start]),
        FillSource::UtteranceMean => Ok(mean_over(features, (0, features.num_frames()), dims)),
        FillSource::WordMean {
            word_start,
            word_end,
        } => {
            if word_end > features.num_frames() || word_start >= word_end {
                return Err(Error::invalid(format!(
                    "word span [{word_start}, {word_end}) outside features with {} frames",
                    features.num_frames()
                )));
            }
            Ok(mean_over(features, (word_start, word_end), dims))
        }
    }
}

/// Computes the fill vector for a segment-mask region under `strategy`,
/// looking up the containing word in the alignment. Regions covering no
/// word fall back to the utterance mean.
pub fn compute_fill(
    features: &FeatureMatrix,
    region: &MaskRegion,
    strategy: FillStrategy,
    alignment: &UttAlignment,
) -> Result<Vec<f64>> {
    let fill = match strategy {
        FillStrategy::UtteranceMean => FillSource::UtteranceMean,
        FillStrategy::WordMean => alignment
            .words
            .iter()
            .find(|w| w.start_frame <= region.start_frame && region.start_frame < w.end_frame())
            .map(|w| FillSource::WordMean {
                word_start: w.start_frame,
                word_end: w.end_frame(),
            })
            .unwrap_or(FillSource::UtteranceMean),
    };
    fill_vector(
        features,
        &MaskRegion {
            fill,
            ..region.clone()
        },
    )
}

/// Applies a plan to a copy of the features. Cells inside regions take the
/// region's fill value exactly; all other cells are returned bit-identical.
pub fn apply_mask(features: &FeatureMatrix, plan: &MaskPlan) -> Result<FeatureMatrix> {
    let t = features.num_frames();
    let d = features.dim();
    let mut out = features.clone();
    for region in &plan.regions {
        if region.end_frame > t
            || region.dim_end > d
            || region.start_frame > region.end_frame
            || region.dim_start > region.dim_end
        {
            return Err(Error::invalid(format!(
                "region frames [{}, {}) dims [{}, {}) out of bounds for a {t}x{d} matrix",
                region.start_frame, region.end_frame, region.dim_start, region.dim_end
            )));
        }
        if region.start_frame == region.end_frame || region.dim_start == region.dim_end {
            continue;
        }
        let fill = fill_vector(features, region)?;
        for row in &mut out.rows_mut()[region.start_frame..region.end_frame] {
            row[region.dim_start..region.dim_end].copy_from_slice(&fill);
        }
    }
    Ok(out)
}

/// Masks a whole archive: one derived seed and one plan per utterance.
/// Utterance order is preserved and the result is independent of the rayon
/// thread count.
pub fn augment_corpus(
    archive: &FeatureArchive,
    alignments: &[UttAlignment],
    vocab: Option<&WordPieceVocab>,
    config: &MaskConfig,
) -> Result<(FeatureArchive, Vec<MaskPlan>)> {
    config.validate()?;
    let by_id: HashMap<&str, &UttAlignment> = alignments
        .iter()
        .map(|a| (a.utt_id.as_str(), a))
        .collect();

    if config.method.needs_alignment() {
        let missing: Vec<String> = archive
            .iter()
            .filter(|(id, _)| !by_id.contains_key(id.as_str()))
            .map(|(id, _)| id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingAlignment(missing));
        }
        for (id, feats) in archive.iter() {
            validate_alignment(by_id[id.as_str()], feats.num_frames())?;
        }
        if config.method == MaskMethod::WordPiece && vocab.is_none() {
            return Err(Error::invalid("word-piece masking requires a vocabulary"));
        }
    }

    let entries: Vec<(&String, &FeatureMatrix)> = archive.iter().collect();
    let results: Vec<Result<(FeatureMatrix, MaskPlan)>> = entries
        .par_iter()
        .map(|(id, feats)| {
            let seed = derive_utt_seed(config.seed, id);
            let alignment = by_id.get(id.as_str()).copied();
            let plan = plan_mask(feats, alignment, vocab, config, seed)?;
            let masked = apply_mask(feats, &plan)?;
            Ok((masked, plan))
        })
        .collect();

    let mut out = FeatureArchive::new();
    let mut plans = Vec::with_capacity(results.len());
    for (entry, result) in entries.iter().zip(results) {
        let (masked, plan) = result?;
        out.insert(entry.0.clone(), masked)?;
        plans.push(plan);
    }
    Ok((out, plans))
}

/// Renders plans as the audit TSV:
/// `utt_id  method  start_frame  end_frame  d0  d1  fill_kind`.
pub fn plan_log_tsv(plans: &[MaskPlan]) -> String {
    let mut out = String::from("utt_id\tmethod\tstart_frame\tend_frame\td0\td1\tfill_kind\n");
    for plan in plans {
        for region in &plan.regions {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                plan.utt_id,
                plan.config.method,
                region.start_frame,
                region.end_frame,
                region.dim_start,
                region.dim_end,
                region.fill.kind_label()
            ));
        }
    }
    out
}
