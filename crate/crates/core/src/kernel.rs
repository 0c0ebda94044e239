//! Desk-scale numeric kernel: the Conformer block forward pass, CTC loss
//! with analytic gradients, cross-entropy, and the joint training loss and
//! joint decode score.
//!
//! Everything here is a verification target, not a trainer: plain `f64`
//! matrices, no batching, no optimizer.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Blank token index in every CTC vocabulary.
pub const BLANK: usize = 0;

// --- Layer norm and the Conformer block -------------------------------------

/// Layer normalization over one vector: `(x - mean) / sqrt(var + eps)`
/// scaled by `gamma` and shifted by `beta`. Variance is the population
/// variance.
pub fn layer_norm(x: &[f64], gamma: &[f64], beta: &[f64], eps: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + eps).sqrt();
    x.iter()
        .zip(gamma.iter().zip(beta))
        .map(|(v, (g, b))| (v - mean) * inv * g + b)
        .collect()
}

/// Two bias-free linear maps with a ReLU between them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardParams {
    /// d_model x hidden
    pub w1: Vec<Vec<f64>>,
    /// hidden x d_model
    pub w2: Vec<Vec<f64>>,
}

/// Per-head projection weights for multi-head self-attention.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// One d_model x head_dim matrix per head.
    pub wq: Vec<Vec<Vec<f64>>>,
    pub wk: Vec<Vec<Vec<f64>>>,
    pub wv: Vec<Vec<Vec<f64>>>,
    /// One head_dim x d_model output projection per head; head outputs sum.
    pub wo: Vec<Vec<Vec<f64>>>,
}

/// Convolution module weights: pointwise (d -> 2d) feeding a GLU, a
/// depthwise kernel over time, and a pointwise output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    /// d_model x 2*d_model
    pub pointwise_in: Vec<Vec<f64>>,
    /// d_model rows of kernel_size taps
    pub depthwise: Vec<Vec<f64>>,
    /// d_model x d_model
    pub pointwise_out: Vec<Vec<f64>>,
}

/// Conformer-block weights plus the joint-objective constants: `alpha`
/// weighs CE against CTC in training and `lambda` interpolates their
/// log-probabilities at decode time.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub d_model: usize,
    pub num_heads: usize,
    pub ffn_hidden: usize,
    pub conv_kernel: usize,
    pub ffn1: FeedForwardParams,
    pub attention: AttentionParams,
    pub conv: ConvParams,
    pub ffn2: FeedForwardParams,
    pub norm_gamma: Vec<f64>,
    pub norm_beta: Vec<f64>,
    pub alpha: f64,
    pub lambda: f64,
}

pub const DEFAULT_ALPHA: f64 = 0.7;
pub const DEFAULT_LAMBDA: f64 = 0.5;
pub const DEFAULT_CONV_KERNEL: usize = 15;

fn zeros(rows: usize, cols: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; cols]; rows]
}

impl KernelParams {
    /// All-zero weights with identity layer norm.
    pub fn zeroed(d_model: usize, num_heads: usize, ffn_hidden: usize, conv_kernel: usize) -> Result<Self> {
        let params = KernelParams {
            d_model,
            num_heads,
            ffn_hidden,
            conv_kernel,
            ffn1: FeedForwardParams {
                w1: zeros(d_model, ffn_hidden),
                w2: zeros(ffn_hidden, d_model),
            },
            attention: AttentionParams {
                wq: vec![zeros(d_model, d_model / num_heads.max(1)); num_heads],
                wk: vec![zeros(d_model, d_model / num_heads.max(1)); num_heads],
                wv: vec![zeros(d_model, d_model / num_heads.max(1)); num_heads],
                wo: vec![zeros(d_model / num_heads.max(1), d_model); num_heads],
            },
            conv: ConvParams {
                pointwise_in: zeros(d_model, 2 * d_model),
                depthwise: zeros(d_model, conv_kernel),
                pointwise_out: zeros(d_model, d_model),
            },
            ffn2: FeedForwardParams {
                w1: zeros(d_model, ffn_hidden),
                w2: zeros(ffn_hidden, d_model),
            },
            norm_gamma: vec![1.0; d_model],
            norm_beta: vec![0.0; d_model],
            alpha: DEFAULT_ALPHA,
            lambda: DEFAULT_LAMBDA,
        };
        params.validate()?;
        Ok(params)
    }

    /// Small seeded random weights, for exercising the block numerically.
    pub fn seeded(
        d_model: usize,
        num_heads: usize,
        ffn_hidden: usize,
        conv_kernel: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut params = Self::zeroed(d_model, num_heads, ffn_hidden, conv_kernel)?;
        let mut rng = SplitMix64::new(seed);
        let scale = 0.5 / (d_model as f64).sqrt();
        let mut fill = |m: &mut Vec<Vec<f64>>| {
            for row in m.iter_mut() {
                for v in row.iter_mut() {
                    *v = (rng.next_f64() * 2.0 - 1.0) * scale;
                }
            }
        };
        fill(&mut params.ffn1.w1);
        fill(&mut params.ffn1.w2);
        for h in 0..num_heads {
            fill(&mut params.attention.wq[h]);
            fill(&mut params.attention.wk[h]);
            fill(&mut params.attention.wv[h]);
            fill(&mut params.attention.wo[h]);
        }
        fill(&mut params.conv.pointwise_in);
        fill(&mut params.conv.depthwise);
        fill(&mut params.conv.pointwise_out);
        fill(&mut params.ffn2.w1);
        fill(&mut params.ffn2.w2);
        Ok(params)
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_heads == 0 || !self.d_model.is_multiple_of(self.num_heads) {
            return Err(Error::invalid(format!(
                "d_model {} must be divisible by num_heads {}",
                self.d_model, self.num_heads
            )));
        }
        if self.conv_kernel.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "conv_kernel {} must be odd",
                self.conv_kernel
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid(format!(
                "alpha {} and lambda {} must lie in [0, 1]",
                self.alpha, self.lambda
            )));
        }
        Ok(())
    }
}

/// `x (T x a) * w (a x b)`.
fn matmul(x: &[Vec<f64>], w: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = w.first().map_or(0, Vec::len);
    x.iter()
        .map(|row| {
            let mut out = vec![0.0; cols];
            for (xv, wrow) in row.iter().zip(w) {
                if *xv != 0.0 {
                    for (o, wv) in out.iter_mut().zip(wrow) {
                        *o += xv * wv;
                    }
                }
            }
            out
        })
        .collect()
}

fn feed_forward(x: &[Vec<f64>], p: &FeedForwardParams) -> Vec<Vec<f64>> {
    let mut hidden = matmul(x, &p.w1);
    for row in &mut hidden {
        for v in row.iter_mut() {
            *v = v.max(0.0);
        }
    }
    matmul(&hidden, &p.w2)
}

fn softmax_row(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

fn self_attention(x: &[Vec<f64>], p: &AttentionParams, head_dim: usize) -> Vec<Vec<f64>> {
    let t = x.len();
    let d = x.first().map_or(0, Vec::len);
    let mut out = zeros(t, d);
    let scale = 1.0 / (head_dim as f64).sqrt();
    for h in 0..p.wq.len() {
        let q = matmul(x, &p.wq[h]);
        let k = matmul(x, &p.wk[h]);
        let v = matmul(x, &p.wv[h]);
        let mut context = zeros(t, head_dim);
        for i in 0..t {
            let mut scores: Vec<f64> = (0..t)
                .map(|j| q[i].iter().zip(&k[j]).map(|(a, b)| a * b).sum::<f64>() * scale)
                .collect();
            softmax_row(&mut scores);
            for (j, &a) in scores.iter().enumerate() {
                for (c, vv) in context[i].iter_mut().zip(&v[j]) {
                    *c += a * vv;
                }
            }
        }
        let projected = matmul(&context, &p.wo[h]);
        for (orow, prow) in out.iter_mut().zip(projected) {
            for (o, pv) in orow.iter_mut().zip(prow) {
                *o += pv;
            }
        }
    }
    out
}

fn conv_module(x: &[Vec<f64>], p: &ConvParams, d_model: usize, kernel: usize) -> Vec<Vec<f64>> {
    let t = x.len();
    // Pointwise to 2d, then GLU back to d.
    let wide = matmul(x, &p.pointwise_in);
    let mut gated = zeros(t, d_model);
    for (g, w) in gated.iter_mut().zip(&wide) {
        for c in 0..d_model {
            let a = w[c];
            let b = w[d_model + c];
            *g.get_mut(c).unwrap() = a * sigmoid(b);
        }
    }
    // Depthwise over time with same padding.
    let half = (kernel - 1) / 2;
    let mut conv = zeros(t, d_model);
    for (i, out_row) in conv.iter_mut().enumerate() {
        for (c, out) in out_row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, tap) in p.depthwise[c].iter().enumerate() {
                let pos = i as isize + j as isize - half as isize;
                if pos >= 0 && (pos as usize) < t {
                    acc += gated[pos as usize][c] * tap;
                }
            }
            *out = acc.max(0.0);
        }
    }
    matmul(&conv, &p.pointwise_out)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Conformer block forward pass:
///
/// ```text
/// x'   = x   + 1/2 FFN1(x)
/// x''  = x'  + MHSA(x')
/// x''' = x'' + Conv(x'')
/// y    = LayerNorm(x''' + 1/2 FFN2(x'''))
/// ```
pub fn conformer_block(x: &[Vec<f64>], params: &KernelParams) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    if x.is_empty() {
        return Err(Error::invalid("conformer block needs at least one frame"));
    }
    for (t, row) in x.iter().enumerate() {
        if row.len() != params.d_model {
            return Err(Error::invalid(format!(
                "frame {t} has dimension {}, expected {}",
                row.len(),
                params.d_model
            )));
        }
    }

    let add_scaled = |a: &[Vec<f64>], b: &[Vec<f64>], s: f64| -> Vec<Vec<f64>> {
        a.iter()
            .zip(b)
            .map(|(ar, br)| ar.iter().zip(br).map(|(av, bv)| av + s * bv).collect())
            .collect()
    };

    let x1 = add_scaled(x, &feed_forward(x, &params.ffn1), 0.5);
    let x2 = add_scaled(&x1, &self_attention(&x1, &params.attention, params.head_dim()), 1.0);
    let x3 = add_scaled(
        &x2,
        &conv_module(&x2, &params.conv, params.d_model, params.conv_kernel),
        1.0,
    );
    let pre_norm = add_scaled(&x3, &feed_forward(&x3, &params.ffn2), 0.5);
    let out: Vec<Vec<f64>> = pre_norm
        .iter()
        .map(|row| layer_norm(row, &params.norm_gamma, &params.norm_beta, 1e-5))
        .collect();
    for row in &out {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("conformer block produced non-finite values"));
        }
    }
    Ok(out)
}

// --- CTC ---------------------------------------------------------------------

/// T x V matrix of log-probabilities; index 0 is the blank token.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbLattice {
    rows: Vec<Vec<f64>>,
}

impl LogProbLattice {
    /// Validates that every row log-sum-exps to zero within 1e-6.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].len() < 2 {
            return Err(Error::invalid(
                "lattice needs at least one frame and two tokens (blank plus one label)",
            ));
        }
        let v = rows[0].len();
        for (t, row) in rows.iter().enumerate() {
            if row.len() != v {
                return Err(Error::invalid(format!("ragged lattice row {t}")));
            }
            let lse = log_sum_exp(row);
            if lse.abs() > 1e-6 {
                return Err(Error::invalid(format!(
                    "lattice row {t} log-sum-exps to {lse}, expected 0"
                )));
            }
        }
        Ok(LogProbLattice { rows })
    }

    /// Skips row normalization checks; used for perturbation studies such
    /// as finite-difference gradient checks.
    pub fn from_rows_unchecked(rows: Vec<Vec<f64>>) -> Self {
        LogProbLattice { rows }
    }

    /// Uniform lattice: every token has probability 1/V at every frame.
    pub fn uniform(num_frames: usize, vocab: usize) -> Self {
        let lp = -(vocab as f64).ln();
        LogProbLattice {
            rows: vec![vec![lp; vocab]; num_frames],
        }
    }

    /// Row-wise log-softmax over raw scores.
    pub fn from_logits(logits: &[Vec<f64>]) -> Result<Self> {
        let rows = logits
            .iter()
            .map(|row| {
                let lse = log_sum_exp(row);
                row.iter().map(|v| v - lse).collect()
            })
            .collect();
        Self::new(rows)
    }

    pub fn num_frames(&self) -> usize {
        self.rows.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn lse2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        b
    } else if b == f64::NEG_INFINITY {
        a
    } else if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// CTC negative log-likelihood. `infeasible` is set instead of panicking
/// when the label sequence cannot fit in the lattice (the loss is then
/// positive infinity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtcLoss {
    pub nll: f64,
    pub infeasible: bool,
}

fn extended_labels(labels: &[usize]) -> Vec<usize> {
    let mut ext = Vec::with_capacity(2 * labels.len() + 1);
    ext.push(BLANK);
    for &l in labels {
        ext.push(l);
        ext.push(BLANK);
    }
    ext
}

fn validate_labels(lattice: &LogProbLattice, labels: &[usize]) -> Result<()> {
    for &l in labels {
        if l == BLANK || l >= lattice.vocab_size() {
            return Err(Error::invalid(format!(
                "label {l} outside the non-blank vocabulary 1..{}",
                lattice.vocab_size()
            )));
        }
    }
    Ok(())
}

/// Forward-algorithm CTC loss in the log domain over the blank-extended
/// label sequence.
pub fn ctc_loss(lattice: &LogProbLattice, labels: &[usize]) -> Result<CtcLoss> {
    validate_labels(lattice, labels)?;
    let ext = extended_labels(labels);
    let s_len = ext.len();
    let t_len = lattice.num_frames();
    let rows = lattice.rows();

    let mut alpha = vec![f64::NEG_INFINITY; s_len];
    alpha[0] = rows[0][BLANK];
    if s_len > 1 {
        alpha[1] = rows[0][ext[1]];
    }
    let mut next = vec![f64::NEG_INFINITY; s_len];
    for row in &rows[1..t_len] {
        for s in 0..s_len {
            let mut acc = alpha[s];
            if s >= 1 {
                acc = lse2(acc, alpha[s - 1]);
            }
            if s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2] {
                acc = lse2(acc, alpha[s - 2]);
            }
            next[s] = acc + row[ext[s]];
        }
        std::mem::swap(&mut alpha, &mut next);
    }

    let mut total = alpha[s_len - 1];
    if s_len >= 2 {
        total = lse2(total, alpha[s_len - 2]);
    }
    Ok(CtcLoss {
        nll: -total,
        infeasible: total == f64::NEG_INFINITY,
    })
}

/// CTC loss plus the analytic gradient of the negative log-likelihood with
/// respect to every lattice log-probability.
pub fn ctc_loss_with_grad(
    lattice: &LogProbLattice,
    labels: &[usize],
) -> Result<(CtcLoss, Vec<Vec<f64>>)> {
    validate_labels(lattice, labels)?;
    let ext = extended_labels(labels);
    let s_len = ext.len();
    let t_len = lattice.num_frames();
    let rows = lattice.rows();
    let v = lattice.vocab_size();

    let neg = f64::NEG_INFINITY;
    let mut alpha = vec![vec![neg; s_len]; t_len];
    alpha[0][0] = rows[0][BLANK];
    if s_len > 1 {
        alpha[0][1] = rows[0][ext[1]];
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let mut acc = alpha[t - 1][s];
            if s >= 1 {
                acc = lse2(acc, alpha[t - 1][s - 1]);
            }
            if s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2] {
                acc = lse2(acc, alpha[t - 1][s - 2]);
            }
            alpha[t][s] = acc + rows[t][ext[s]];
        }
    }

    let mut beta = vec![vec![neg; s_len]; t_len];
    beta[t_len - 1][s_len - 1] = rows[t_len - 1][ext[s_len - 1]];
    if s_len >= 2 {
        beta[t_len - 1][s_len - 2] = rows[t_len - 1][ext[s_len - 2]];
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let mut acc = beta[t + 1][s];
            if s + 1 < s_len {
                acc = lse2(acc, beta[t + 1][s + 1]);
            }
            if s + 2 < s_len && ext[s + 2] != BLANK && ext[s + 2] != ext[s] {
                acc = lse2(acc, beta[t + 1][s + 2]);
            }
            beta[t][s] = acc + rows[t][ext[s]];
        }
    }

    let mut log_p = alpha[t_len - 1][s_len - 1];
    if s_len >= 2 {
        log_p = lse2(log_p, alpha[t_len - 1][s_len - 2]);
    }
    let loss = CtcLoss {
        nll: -log_p,
        infeasible: log_p == f64::NEG_INFINITY,
    };
    if loss.infeasible {
        return Ok((loss, vec![vec![0.0; v]; t_len]));
    }

    // d(-log P)/d log p_t(v) = -(1/P) * sum over states s with label v of
    // alpha_t(s) * beta_t(s) / p_t(v); alpha and beta both include the
    // emission at t, hence the division.
    let mut grad = vec![vec![0.0; v]; t_len];
    for t in 0..t_len {
        let mut per_token = vec![neg; v];
        for s in 0..s_len {
            let tok = ext[s];
            let term = alpha[t][s] + beta[t][s] - rows[t][tok];
            per_token[tok] = lse2(per_token[tok], term);
        }
        for tok in 0..v {
            if per_token[tok] != neg {
                grad[t][tok] = -((per_token[tok] - log_p).exp());
            }
        }
    }
    Ok((loss, grad))
}

/// Collapses a raw frame-label path: adjacent repeats merge, then blanks
/// drop out.
pub fn collapse_path(path: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev: Option<usize> = None;
    for &tok in path {
        if Some(tok) != prev && tok != BLANK {
            out.push(tok);
        }
        prev = Some(tok);
    }
    out
}

/// Reference CTC loss by brute-force enumeration of all V^T frame paths.
/// Exponential in T; intended for the oracle comparisons behind
/// `kernel-selftest` and the test suites, and kept independent of the
/// dynamic-programming implementation above.
pub fn ctc_loss_brute_force(lattice: &LogProbLattice, labels: &[usize]) -> Result<CtcLoss> {
    validate_labels(lattice, labels)?;
    let t_len = lattice.num_frames();
    let v = lattice.vocab_size();
    let rows = lattice.rows();
    let total_paths = (v as u64).checked_pow(t_len as u32).ok_or_else(|| {
        Error::invalid("lattice too large for brute-force enumeration")
    })?;

    let mut prob = 0.0f64;
    let mut path = vec![0usize; t_len];
    for code in 0..total_paths {
        let mut c = code;
        for slot in path.iter_mut() {
            *slot = (c % v as u64) as usize;
            c /= v as u64;
        }
        if collapse_path(&path) == labels {
            let log_p: f64 = path.iter().zip(rows).map(|(&tok, row)| row[tok]).sum();
            prob += log_p.exp();
        }
    }
    Ok(CtcLoss {
        nll: -prob.ln(),
        infeasible: prob == 0.0,
    })
}

// --- Cross-entropy and the joint objectives ----------------------------------

/// `-log softmax(logits)[target]`, computed with max subtraction.
pub fn cross_entropy(logits: &[f64], target: usize) -> Result<f64> {
    if target >= logits.len() {
        return Err(Error::invalid(format!(
            "target {target} out of range for {} logits",
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite logit"));
    }
    Ok(log_sum_exp(logits) - logits[target])
}

/// Cross-entropy plus its gradient `softmax(logits) - onehot(target)`.
pub fn cross_entropy_with_grad(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    let loss = cross_entropy(logits, target)?;
    let lse = log_sum_exp(logits);
    let mut grad: Vec<f64> = logits.iter().map(|v| (v - lse).exp()).collect();
    grad[target] -= 1.0;
    Ok((loss, grad))
}

/// Training objective: `alpha * loss_ce + (1 - alpha) * loss_ctc`.
pub fn joint_loss(loss_ce: f64, loss_ctc: f64, alpha: f64) -> f64 {
    alpha * loss_ce + (1.0 - alpha) * loss_ctc
}

/// Decode score: `lambda * logp_ce + (1 - lambda) * logp_ctc`; the decoded
/// hypothesis is the argmax of this over candidates.
pub fn joint_decode_score(logp_ce: f64, logp_ctc: f64, lambda: f64) -> f64 {
    lambda * logp_ce + (1.0 - lambda) * logp_ctc
}

/// Greedy CTC decoding: per-frame argmax (first index on ties), collapse
/// repeats, drop blanks.
pub fn greedy_ctc_decode(lattice: &LogProbLattice) -> Vec<usize> {
    let path: Vec<usize> = lattice
        .rows()
        .iter()
        .map(|row| {
            let mut best = 0usize;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect();
    collapse_path(&path)
}

// --- Self-test ----------------------------------------------------------------

/// Outcome of [`run_selftest`].
#[derive(Debug, Clone)]
pub struct SelfTestReport {
    pub checks: usize,
    pub failures: Vec<String>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn random_lattice(rng: &mut SplitMix64, t: usize, v: usize) -> LogProbLattice {
    let logits: Vec<Vec<f64>> = (0..t)
        .map(|_| (0..v).map(|_| rng.next_f64() * 4.0 - 2.0).collect())
        .collect();
    LogProbLattice::from_logits(&logits).expect("valid lattice")
}

/// Runs the oracle comparisons: CTC dynamic programming against brute-force
/// path enumeration, cross-entropy against a naive softmax, gradient checks
/// against central finite differences, and the joint-objective arithmetic.
pub fn run_selftest() -> SelfTestReport {
    let mut checks = 0usize;
    let mut failures = Vec::new();
    let mut rng = SplitMix64::new(0xC0FFEE);

    // CTC forward DP vs brute force over a randomized small grid.
    for case in 0..200 {
        let t = 1 + (rng.next_below(5) as usize);
        let v = 2 + (rng.next_below(2) as usize);
        let l = rng.next_below(3) as usize;
        let labels: Vec<usize> = (0..l).map(|_| 1 + rng.next_below(v as u64 - 1) as usize).collect();
        let lattice = random_lattice(&mut rng, t, v);
        let dp = ctc_loss(&lattice, &labels).expect("dp");
        let brute = ctc_loss_brute_force(&lattice, &labels).expect("brute");
        checks += 1;
        if dp.infeasible != brute.infeasible
            || (!dp.infeasible && (dp.nll - brute.nll).abs() > 1e-8)
        {
            failures.push(format!(
                "ctc case {case}: dp {:?} vs brute force {:?} (T={t}, V={v}, labels {labels:?})",
                dp, brute
            ));
        }
    }

    // Cross-entropy vs a naive softmax computation.
    for case in 0..50 {
        let n = 2 + rng.next_below(7) as usize;
        let logits: Vec<f64> = (0..n).map(|_| rng.next_f64() * 6.0 - 3.0).collect();
        let target = rng.next_below(n as u64) as usize;
        let loss = cross_entropy(&logits, target).expect("ce");
        let denom: f64 = logits.iter().map(|v| v.exp()).sum();
        let naive = -(logits[target].exp() / denom).ln();
        checks += 1;
        if (loss - naive).abs() > 1e-12 {
            failures.push(format!("cross-entropy case {case}: {loss} vs naive {naive}"));
        }
    }

    // Gradient checks.
    for case in 0..25 {
        let t = 2 + rng.next_below(3) as usize;
        let labels = vec![1usize];
        let lattice = random_lattice(&mut rng, t, 3);
        checks += 1;
        if let Some(msg) = ctc_gradient_check(&lattice, &labels) {
            failures.push(format!("ctc gradient case {case}: {msg}"));
        }
    }
    for case in 0..25 {
        let n = 3 + rng.next_below(5) as usize;
        let logits: Vec<f64> = (0..n).map(|_| rng.next_f64() * 4.0 - 2.0).collect();
        let target = rng.next_below(n as u64) as usize;
        checks += 1;
        if let Some(msg) = cross_entropy_gradient_check(&logits, target) {
            failures.push(format!("cross-entropy gradient case {case}: {msg}"));
        }
    }

    // Joint-objective arithmetic at the published operating points.
    checks += 2;
    if joint_loss(1.0, 2.0, DEFAULT_ALPHA) != 1.3 {
        failures.push("joint_loss(1, 2, 0.7) != 1.3".to_string());
    }
    if joint_decode_score(-1.0, -3.0, DEFAULT_LAMBDA) != -2.0 {
        failures.push("joint_decode_score(-1, -3, 0.5) != -2".to_string());
    }

    SelfTestReport { checks, failures }
}

/// Central-difference check of the CTC gradient; returns a description of
/// the first failing entry, if any.
pub fn ctc_gradient_check(lattice: &LogProbLattice, labels: &[usize]) -> Option<String> {
    let h = 1e-5;
    let (loss, grad) = ctc_loss_with_grad(lattice, labels).ok()?;
    if loss.infeasible {
        return Some("instance is infeasible".to_string());
    }
    for t in 0..lattice.num_frames() {
        for v in 0..lattice.vocab_size() {
            let mut plus = lattice.rows().to_vec();
            plus[t][v] += h;
            let mut minus = lattice.rows().to_vec();
            minus[t][v] -= h;
            let lp = ctc_loss(&LogProbLattice::from_rows_unchecked(plus), labels)
                .ok()?
                .nll;
            let lm = ctc_loss(&LogProbLattice::from_rows_unchecked(minus), labels)
                .ok()?
                .nll;
            let fd = (lp - lm) / (2.0 * h);
            let a = grad[t][v];
            let denom = a.abs().max(fd.abs());
            let ok = if denom > 1e-6 {
                (a - fd).abs() / denom < 1e-5
            } else {
                (a - fd).abs() < 1e-9
            };
            if !ok {
                return Some(format!("grad[{t}][{v}] analytic {a} vs fd {fd}"));
            }
        }
    }
    None
}

/// Central-difference check of the cross-entropy gradient.
pub fn cross_entropy_gradient_check(logits: &[f64], target: usize) -> Option<String> {
    let h = 1e-5;
    let (_, grad) = cross_entropy_with_grad(logits, target).ok()?;
    for i in 0..logits.len() {
        let mut plus = logits.to_vec();
        plus[i] += h;
        let mut minus = logits.to_vec();
        minus[i] -= h;
        let fd = (cross_entropy(&plus, target).ok()? - cross_entropy(&minus, target).ok()?)
            / (2.0 * h);
        let a = grad[i];
        let denom = a.abs().max(fd.abs());
        let ok = if denom > 1e-6 {
            (a - fd).abs() / denom < 1e-5
        } else {
            (a - fd).abs() < 1e-9
        };
        if !ok {
            return Some(format!("grad[{i}] analytic {a} vs fd {fd}"));
        }
    }
    None
}
