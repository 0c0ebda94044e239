//! Subcommand implementations. All file outputs go through an atomic
//! temp-file-plus-rename write.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};

use redmask_core::align::duration_stats;
use redmask_core::frontend::{apply_cmvn, compute_mfcc, scale_alignment, speed_perturb, MfccConfig};
use redmask_core::io::{
    ctm_to_string, feature_archive_to_string, read_ctm, read_feature_archive, read_vocab,
    read_wav, FeatureArchive,
};
use redmask_core::kernel::run_selftest;
use redmask_core::mask::{
    augment_corpus, plan_log_tsv, FillStrategy, MaskConfig, MaskMethod, SpecAugmentParams,
};
use redmask_core::score::{grapheme_tokens, parse_trn, score_corpus};

use crate::config::{resolve_seed, FileConfig};
use crate::{AugmentArgs, Failure, FeatizeArgs, PerturbArgs, ScoreArgs, StatsArgs};

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .context("creating temp file")?;
    std::io::Write::write_all(&mut tmp, contents)?;
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn with_thread_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .context("building worker pool")?;
            Ok(pool.install(f))
        }
    }
}

// --- featize -------------------------------------------------------------

pub fn featize(args: &FeatizeArgs, config: &FileConfig, jobs: Option<usize>) -> Result<(), Failure> {
    let mut mfcc = match args.sample_rate.or(config.mfcc.sample_rate) {
        Some(rate) => MfccConfig::with_sample_rate(rate),
        None => MfccConfig::default(),
    };
    let m = &config.mfcc;
    if let Some(v) = m.frame_length_ms {
        mfcc.frame_length_ms = v;
    }
    if let Some(v) = m.frame_shift_ms {
        mfcc.frame_shift_ms = v;
    }
    if let Some(v) = m.num_ceps {
        mfcc.num_ceps = v;
    }
    if let Some(v) = m.num_mel_filters {
        mfcc.num_mel_filters = v;
    }
    if let Some(v) = m.fft_size {
        mfcc.fft_size = v;
    }
    if let Some(v) = m.preemphasis {
        mfcc.preemphasis = v;
    }
    if let Some(v) = m.mel_low_hz {
        mfcc.mel_low_hz = v;
    }
    if let Some(v) = m.mel_high_hz {
        mfcc.mel_high_hz = v;
    }
    if let Some(v) = m.log_floor {
        mfcc.log_floor = v;
    }
    mfcc.validate()?;

    let mut factors = args.speed.clone();
    if factors.is_empty() {
        factors.push(1.0);
    }
    for &f in &factors {
        redmask_core::frontend::validate_speed_factor(f)
            .map_err(|e| Failure::Usage(format!("--speed: {e}")))?;
    }

    let mut wavs: Vec<PathBuf> = std::fs::read_dir(&args.wav_dir)
        .with_context(|| format!("reading {}", args.wav_dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "wav"))
        .collect();
    wavs.sort();
    if wavs.is_empty() {
        return Err(Failure::Data(anyhow!(
            "no .wav files in {}",
            args.wav_dir.display()
        )));
    }

    eprintln!(
        "featize: {} files, speed factors {:?}, cmvn={}, sample_rate={}, out={}",
        wavs.len(),
        factors,
        args.cmvn,
        mfcc.sample_rate,
        args.out.display()
    );

    let tasks: Vec<(String, PathBuf, f64)> = factors
        .iter()
        .flat_map(|&factor| {
            wavs.iter().map(move |path| {
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let utt_id = if factor == 1.0 {
                    stem
                } else {
                    format!("sp{factor}-{stem}")
                };
                (utt_id, path.clone(), factor)
            })
        })
        .collect();

    let results: Vec<Result<(String, redmask_core::FeatureMatrix)>> =
        with_thread_pool(jobs, || {
            use rayon::prelude::*;
            tasks
                .par_iter()
                .map(|(utt_id, path, factor)| {
                    let wav = read_wav(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    let wav = speed_perturb(&wav, *factor)?;
                    let mut feats = compute_mfcc(&wav, &mfcc)
                        .with_context(|| format!("extracting {}", path.display()))?;
                    if args.cmvn {
                        feats = apply_cmvn(&feats)?;
                    }
                    Ok((utt_id.clone(), feats))
                })
                .collect()
        })?;

    let mut archive = FeatureArchive::new();
    for result in results {
        let (utt_id, feats) = result?;
        archive.insert(utt_id, feats)?;
    }
    write_atomic(&args.out, feature_archive_to_string(&archive)?.as_bytes())?;
    Ok(())
}

// --- stats ---------------------------------------------------------------

pub fn stats(args: &StatsArgs) -> Result<(), Failure> {
    let alignments = read_ctm(&args.ctm, args.shift_ms)?;
    let stats = duration_stats(&alignments, args.shift_ms)?;
    eprintln!(
        "stats: {} utterances from {}, shift_ms={}",
        alignments.len(),
        args.ctm.display(),
        args.shift_ms
    );
    println!("phone\tcount\tmean_sec\tmin_sec\tmax_sec");
    for (phone, d) in &stats.per_phone {
        println!(
            "{phone}\t{}\t{:.6}\t{:.6}\t{:.6}",
            d.count, d.mean_sec, d.min_sec, d.max_sec
        );
    }
    println!("#overall_mean_sec\t{:.6}", stats.overall_mean_sec);
    println!("#short_phone_ratio\t{:.6}", stats.short_phone_ratio);
    println!("#frame_shift_ms\t{}", stats.frame_shift_ms);
    Ok(())
}

// --- augment ---------------------------------------------------------------

fn parse_method(name: &str) -> Result<MaskMethod, Failure> {
    match name {
        "pm" => Ok(MaskMethod::Phone),
        "wpm" => Ok(MaskMethod::WordPiece),
        "stm" => Ok(MaskMethod::Word),
        "specaugment" => Ok(MaskMethod::SpecAugment),
        other => Err(Failure::Usage(format!(
            "--method `{other}` is not one of pm, wpm, stm, specaugment"
        ))),
    }
}

fn parse_fill(name: &str) -> Result<FillStrategy, Failure> {
    match name {
        "utt" => Ok(FillStrategy::UtteranceMean),
        "word" => Ok(FillStrategy::WordMean),
        other => Err(Failure::Usage(format!(
            "--fill `{other}` is not one of utt, word"
        ))),
    }
}

/// The named configurations used throughout the experiments.
fn preset(name: &str) -> Result<(MaskMethod, f64, FillStrategy), Failure> {
    match name {
        "specaugment" => Ok((MaskMethod::SpecAugment, 0.0, FillStrategy::UtteranceMean)),
        "stm" => Ok((MaskMethod::Word, 0.15, FillStrategy::UtteranceMean)),
        "wpm-20" => Ok((MaskMethod::WordPiece, 0.20, FillStrategy::UtteranceMean)),
        "pm" => Ok((MaskMethod::Phone, 0.15, FillStrategy::UtteranceMean)),
        "pm-20" => Ok((MaskMethod::Phone, 0.20, FillStrategy::UtteranceMean)),
        "pm20-fw" => Ok((MaskMethod::Phone, 0.20, FillStrategy::WordMean)),
        other => Err(Failure::Usage(format!(
            "--preset `{other}` is not one of specaugment, stm, wpm-20, pm, pm-20, pm20-fw"
        ))),
    }
}

fn resolve_mask_config(
    args: &AugmentArgs,
    config: &FileConfig,
) -> Result<MaskConfig, Failure> {
    let defaults = MaskConfig::default();
    let (mut method, mut ratio, mut fill) = match &args.preset {
        Some(name) => {
            let (m, r, f) = preset(name)?;
            (Some(m), Some(r), Some(f))
        }
        None => (None, None, None),
    };
    if let Some(name) = config.mask.method.as_deref() {
        method = Some(parse_method(name)?);
    }
    if let Some(r) = config.mask.ratio {
        ratio = Some(r);
    }
    if let Some(name) = config.mask.fill.as_deref() {
        fill = Some(parse_fill(name)?);
    }
    if let Some(name) = args.method.as_deref() {
        method = Some(parse_method(name)?);
    }
    if let Some(r) = args.ratio {
        ratio = Some(r);
    }
    if let Some(name) = args.fill.as_deref() {
        fill = Some(parse_fill(name)?);
    }
    let method = method.ok_or_else(|| {
        Failure::Usage("--method is required (or use --preset)".to_string())
    })?;

    let spec = SpecAugmentParams {
        max_freq_width: args
            .spec_freq_width
            .or(config.mask.spec_freq_width)
            .unwrap_or(defaults.spec_augment.max_freq_width),
        num_freq_masks: args
            .spec_freq_masks
            .or(config.mask.spec_freq_masks)
            .unwrap_or(defaults.spec_augment.num_freq_masks),
        max_time_width: args
            .spec_time_width
            .or(config.mask.spec_time_width)
            .unwrap_or(defaults.spec_augment.max_time_width),
        num_time_masks: args
            .spec_time_masks
            .or(config.mask.spec_time_masks)
            .unwrap_or(defaults.spec_augment.num_time_masks),
    };
    let mask_config = MaskConfig {
        method,
        ratio: ratio.unwrap_or(defaults.ratio),
        fill: fill.unwrap_or(defaults.fill),
        spec_augment: spec,
        seed: resolve_seed(args.seed, config).map_err(Failure::Data)?,
    };
    mask_config.validate()?;
    Ok(mask_config)
}

pub fn augment(args: &AugmentArgs, config: &FileConfig, jobs: Option<usize>) -> Result<(), Failure> {
    let mask_config = resolve_mask_config(args, config)?;
    if mask_config.method.needs_alignment() && args.ctm.is_none() {
        return Err(Failure::Usage(format!(
            "--ctm is required for --method {}",
            mask_config.method
        )));
    }
    if mask_config.method == MaskMethod::WordPiece && args.vocab.is_none() {
        return Err(Failure::Usage("--vocab is required for --method wpm".to_string()));
    }

    eprintln!(
        "augment: method={} ratio={} fill={} seed={} jobs={} feats={} out={}",
        mask_config.method,
        mask_config.ratio,
        mask_config.fill.as_str(),
        mask_config.seed,
        jobs.map_or("auto".to_string(), |j| j.to_string()),
        args.feats.display(),
        args.out.display()
    );

    let archive = read_feature_archive(&args.feats)?;
    let alignments = match &args.ctm {
        Some(path) => read_ctm(path, args.shift_ms)?,
        None => Vec::new(),
    };
    let vocab = match &args.vocab {
        Some(path) => Some(read_vocab(path)?),
        None => None,
    };

    let (masked, plans) = with_thread_pool(jobs, || {
        augment_corpus(&archive, &alignments, vocab.as_ref(), &mask_config)
    })??;

    write_atomic(&args.out, feature_archive_to_string(&masked)?.as_bytes())?;
    if let Some(plan_path) = &args.plan_log {
        write_atomic(plan_path, plan_log_tsv(&plans).as_bytes())?;
    }
    Ok(())
}

// --- perturb ---------------------------------------------------------------

pub fn perturb(args: &PerturbArgs) -> Result<(), Failure> {
    redmask_core::frontend::validate_speed_factor(args.factor)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    if args.wav.is_none() && args.ctm.is_none() {
        return Err(Failure::Usage(
            "nothing to do: pass --wav and/or --ctm".to_string(),
        ));
    }
    if args.wav.is_some() != args.out.is_some() {
        return Err(Failure::Usage("--wav and --out go together".to_string()));
    }
    if args.ctm.is_some() != args.out_ctm.is_some() {
        return Err(Failure::Usage("--ctm and --out-ctm go together".to_string()));
    }
    eprintln!("perturb: factor={}", args.factor);

    if let (Some(wav_path), Some(out_path)) = (&args.wav, &args.out) {
        let wav = read_wav(wav_path)?;
        let out = speed_perturb(&wav, args.factor)?;
        write_atomic(out_path, &redmask_core::io::wav_bytes(&out))?;
    }
    if let (Some(ctm_path), Some(out_path)) = (&args.ctm, &args.out_ctm) {
        let alignments = read_ctm(ctm_path, args.shift_ms)?;
        let scaled: redmask_core::Result<Vec<_>> = alignments
            .iter()
            .map(|a| {
                let mut scaled = scale_alignment(a, args.factor)?;
                scaled.utt_id = format!("{}{}", args.utt_prefix, scaled.utt_id);
                Ok(scaled)
            })
            .collect();
        write_atomic(out_path, ctm_to_string(&scaled?).as_bytes())?;
    }
    Ok(())
}

// --- score ---------------------------------------------------------------

pub fn score(args: &ScoreArgs, config: &FileConfig) -> Result<(), Failure> {
    let graphemes = args.graphemes || config.score.graphemes.unwrap_or(false);
    let detail = args.detail || config.score.detail.unwrap_or(false);

    let read = |path: &Path| -> Result<Vec<(String, Vec<String>)>, Failure> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(Failure::Data)?;
        let mut parsed = parse_trn(&text)?;
        if graphemes {
            for (_, tokens) in &mut parsed {
                *tokens = grapheme_tokens(tokens)?;
            }
        }
        Ok(parsed)
    };
    let refs = read(&args.reference)?;
    let hyps = read(&args.hyp)?;
    eprintln!(
        "score: {} reference utterances, tokens={}",
        refs.len(),
        if graphemes { "graphemes" } else { "words" }
    );

    let report = score_corpus(&refs, &hyps)?;
    println!("N\tWER\tSUB\tDEL\tINS");
    println!(
        "{}\t{:.1}\t{:.1}\t{:.1}\t{:.1}",
        report.n_ref,
        report.wer_percent(),
        report.sub_rate(),
        report.del_rate(),
        report.ins_rate()
    );
    if detail {
        println!("utt_id\tn_ref\tsub\tdel\tins\twer\tmissing_hyp");
        for utt in &report.per_utt {
            let wer = 100.0 * utt.total_errors() as f64 / utt.n_ref as f64;
            println!(
                "{}\t{}\t{}\t{}\t{}\t{:.1}\t{}",
                utt.utt_id, utt.n_ref, utt.subs, utt.dels, utt.ins, wer, utt.missing_hyp
            );
        }
    }
    Ok(())
}

// --- kernel-selftest ---------------------------------------------------------

pub fn kernel_selftest() -> Result<(), Failure> {
    let report = run_selftest();
    println!("kernel selftest: {} checks run", report.checks);
    for failure in &report.failures {
        println!("FAIL: {failure}");
    }
    if report.passed() {
        println!("all checks passed");
        Ok(())
    } else {
        Err(Failure::Data(anyhow!(
            "{} of {} kernel checks failed",
            report.failures.len(),
            report.checks
        )))
    }
}
