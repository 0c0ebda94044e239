//! WER scoring: Levenshtein alignment with a SUB/DEL/INS decomposition,
//! per utterance and corpus-level.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tokenize::graphemes;

/// One step of an edit alignment between reference and hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Match,
    Substitute,
    Delete,
    Insert,
}

/// Minimal-cost edit alignment. Tie-breaking prefers match, then
/// substitution, then deletion, then insertion, decided cell by cell in
/// forward order, so the decomposition is reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditAlignment {
    pub subs: usize,
    pub dels: usize,
    pub ins: usize,
    pub path: Vec<EditOp>,
}

impl EditAlignment {
    pub fn total_errors(&self) -> usize {
        self.subs + self.dels + self.ins
    }
}

pub fn align_edit(reference: &[String], hypothesis: &[String]) -> EditAlignment {
    let m = reference.len();
    let n = hypothesis.len();

    #[derive(Clone, Copy)]
    enum Step {
        Start,
        Diag(bool), // true = match
        Del,
        Ins,
    }

    // Lexicographic objective: minimal cost, then maximal matches. With
    // cost and matches fixed the whole (S, D, I) decomposition is
    // determined, which is what makes it reproducible and symmetric under
    // swapping reference and hypothesis.
    let mut dist = vec![vec![0usize; n + 1]; m + 1];
    let mut matches = vec![vec![0usize; n + 1]; m + 1];
    let mut step = vec![vec![Step::Start; n + 1]; m + 1];
    for i in 1..=m {
        dist[i][0] = i;
        step[i][0] = Step::Del;
    }
    for j in 1..=n {
        dist[0][j] = j;
        step[0][j] = Step::Ins;
    }
    for i in 1..=m {
        for j in 1..=n {
            let matched = reference[i - 1] == hypothesis[j - 1];
            let candidates = [
                (
                    dist[i - 1][j - 1] + usize::from(!matched),
                    matches[i - 1][j - 1] + usize::from(matched),
                    Step::Diag(matched),
                ),
                (dist[i - 1][j] + 1, matches[i - 1][j], Step::Del),
                (dist[i][j - 1] + 1, matches[i][j - 1], Step::Ins),
            ];
            let (cost, match_count, chosen) = candidates
                .into_iter()
                .reduce(|best, cand| {
                    if cand.0 < best.0 || (cand.0 == best.0 && cand.1 > best.1) {
                        cand
                    } else {
                        best
                    }
                })
                .unwrap();
            dist[i][j] = cost;
            matches[i][j] = match_count;
            step[i][j] = chosen;
        }
    }

    let mut path = Vec::with_capacity(m.max(n));
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        match step[i][j] {
            Step::Diag(matched) => {
                path.push(if matched { EditOp::Match } else { EditOp::Substitute });
                i -= 1;
                j -= 1;
            }
            Step::Del => {
                path.push(EditOp::Delete);
                i -= 1;
            }
            Step::Ins => {
                path.push(EditOp::Insert);
                j -= 1;
            }
            Step::Start => unreachable!(),
        }
    }
    path.reverse();

    let count = |op: EditOp| path.iter().filter(|&&o| o == op).count();
    EditAlignment {
        subs: count(EditOp::Substitute),
        dels: count(EditOp::Delete),
        ins: count(EditOp::Insert),
        path,
    }
}

/// Per-utterance error counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UttScore {
    pub utt_id: String,
    pub n_ref: usize,
    pub subs: usize,
    pub dels: usize,
    pub ins: usize,
    /// Set when the hypothesis side had no entry for this utterance; the
    /// reference then counts as all deletions.
    pub missing_hyp: bool,
}

impl UttScore {
    pub fn total_errors(&self) -> usize {
        self.subs + self.dels + self.ins
    }
}

/// Corpus-level error counts. Counts are exact integers; the percentage
/// accessors derive from them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreReport {
    pub n_ref: usize,
    pub subs: usize,
    pub dels: usize,
    pub ins: usize,
    pub per_utt: Vec<UttScore>,
}

impl ScoreReport {
    pub fn matches(&self) -> usize {
        self.n_ref - self.subs - self.dels
    }

    pub fn sub_rate(&self) -> f64 {
        100.0 * self.subs as f64 / self.n_ref as f64
    }

    pub fn del_rate(&self) -> f64 {
        100.0 * self.dels as f64 / self.n_ref as f64
    }

    pub fn ins_rate(&self) -> f64 {
        100.0 * self.ins as f64 / self.n_ref as f64
    }

    /// WER as a percentage, defined as the sum of the three rates so the
    /// decomposition identity holds exactly.
    pub fn wer_percent(&self) -> f64 {
        self.sub_rate() + self.del_rate() + self.ins_rate()
    }
}

/// Scores a corpus of keyed token sequences. A reference with no matching
/// hypothesis counts as all deletions and is flagged; hypothesis ids that
/// match no reference are an error.
pub fn score_corpus(
    refs: &[(String, Vec<String>)],
    hyps: &[(String, Vec<String>)],
) -> Result<ScoreReport> {
    let mut hyp_map: HashMap<&str, &Vec<String>> = HashMap::new();
    for (id, tokens) in hyps {
        if hyp_map.insert(id.as_str(), tokens).is_some() {
            return Err(Error::invalid(format!("duplicate hypothesis utterance `{id}`")));
        }
    }
    let mut seen: HashMap<&str, ()> = HashMap::new();
    let mut per_utt = Vec::with_capacity(refs.len());
    for (id, ref_tokens) in refs {
        if seen.insert(id.as_str(), ()).is_some() {
            return Err(Error::invalid(format!("duplicate reference utterance `{id}`")));
        }
        if ref_tokens.is_empty() {
            return Err(Error::invalid(format!("reference utterance `{id}` is empty")));
        }
        let score = match hyp_map.remove(id.as_str()) {
            Some(hyp_tokens) => {
                let ali = align_edit(ref_tokens, hyp_tokens);
                UttScore {
                    utt_id: id.clone(),
                    n_ref: ref_tokens.len(),
                    subs: ali.subs,
                    dels: ali.dels,
                    ins: ali.ins,
                    missing_hyp: false,
                }
            }
            None => UttScore {
                utt_id: id.clone(),
                n_ref: ref_tokens.len(),
                subs: 0,
                dels: ref_tokens.len(),
                ins: 0,
                missing_hyp: true,
            },
        };
        per_utt.push(score);
    }
    if let Some(id) = hyp_map.keys().next() {
        return Err(Error::invalid(format!(
            "hypothesis utterance `{id}` has no matching reference"
        )));
    }

    Ok(ScoreReport {
        n_ref: per_utt.iter().map(|u| u.n_ref).sum(),
        subs: per_utt.iter().map(|u| u.subs).sum(),
        dels: per_utt.iter().map(|u| u.dels).sum(),
        ins: per_utt.iter().map(|u| u.ins).sum(),
        per_utt,
    })
}

/// Parses trn transcripts: `utt_id<TAB>token token ...` per line. The token
/// list may be empty (an empty hypothesis), but the tab is required.
pub fn parse_trn(text: &str) -> Result<Vec<(String, Vec<String>)>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, rest)) = line.split_once('\t') else {
            return Err(Error::parse(
                line_no,
                format!("expected `utt_id<TAB>tokens`, got `{line}`"),
            ));
        };
        let id = id.trim();
        if id.is_empty() {
            return Err(Error::parse(line_no, "empty utterance id".to_string()));
        }
        let tokens: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
        out.push((id.to_string(), tokens));
    }
    Ok(out)
}

/// Flattens word tokens into grapheme tokens for diagnostic grapheme-level
/// scoring.
pub fn grapheme_tokens(tokens: &[String]) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for token in tokens {
        out.extend(graphemes(token)?);
    }
    Ok(out)
}
