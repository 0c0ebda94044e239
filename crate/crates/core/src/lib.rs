//! Alignment-aware masking augmentation for speech features.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! * [`io`] — WAV, feature-archive, CTM alignment, and vocabulary file formats.
//! * [`frontend`] — MFCC extraction, per-utterance CMVN, speed perturbation.
//! * [`align`] — in-memory alignment model, word spans, duration statistics.
//! * [`tokenize`] — grapheme splitting and word-piece segmentation.
//! * [`mask`] — phone / word-piece / word / SpecAugment masking with
//!   mean-fill strategies and deterministic per-utterance seeding.
//! * [`kernel`] — Conformer-block forward pass, CTC and cross-entropy
//!   losses with gradients, joint loss and joint decode scoring.
//! * [`score`] — WER with SUB/DEL/INS decomposition.

pub mod align;
pub mod error;
pub mod frontend;
pub mod io;
pub mod kernel;
pub mod mask;
pub(crate) mod rng;
pub mod score;
pub mod tokenize;

pub use align::{DurationStats, PhoneSegment, UttAlignment, WordSegment};
pub use error::{Error, Result};
pub use frontend::{FeatureMatrix, MfccConfig};
pub use io::{FeatureArchive, Waveform};
pub use kernel::{KernelParams, LogProbLattice};
pub use mask::{FillStrategy, MaskConfig, MaskMethod, MaskPlan, MaskRegion};
pub use score::ScoreReport;
pub use tokenize::WordPieceVocab;
