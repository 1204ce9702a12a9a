//! Implementations of the subcommands.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};

use necorpus::align::align_corpus;
use necorpus::bio::{self, BioTag, DecodeMode};
use necorpus::conllu::{self, ConlluSentence};
use necorpus::crf::{self, CrfModel, TrainConfig, TrainSentence};
use necorpus::enamex::{parse_enamex, serialize_enamex, EnamexDocument};
use necorpus::eval::evaluate;
use necorpus::features::{FeatureExtractor, Gazetteer};
use necorpus::model::{validate_mentions, Mention, Sentence, TokenMention};
use necorpus::par;
use necorpus::split::{split_indices, SplitSpec};

use crate::stats::CorpusStats;
use crate::Command;

pub fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Ingest { input, out } => ingest(&input, &out),
        Command::Align {
            enamex,
            conllu,
            out,
            errors,
        } => align(&enamex, &conllu, &out, &errors),
        Command::Convert { input, out } => convert(&input, &out),
        Command::Stats { input } => stats(&input),
        Command::Train {
            train,
            dev,
            gazetteers,
            l1,
            l2,
            seed,
            max_epochs,
            patience,
            model_out,
            log,
        } => train_cmd(
            &train,
            &dev,
            &gazetteers,
            l1,
            l2,
            seed,
            max_epochs,
            patience,
            &model_out,
            log.as_deref(),
        ),
        Command::Tag {
            model,
            input,
            out,
            gazetteers,
            broadcast,
        } => tag_cmd(&model, &input, &out, &gazetteers, broadcast),
        Command::Broadcast { input, out } => broadcast_cmd(&input, &out),
        Command::Eval { gold, pred, tsv } => eval_cmd(&gold, &pred, tsv.as_deref()),
        Command::Split {
            input,
            sizes,
            seed,
            out_dir,
        } => split_cmd(&input, &sizes, seed, &out_dir),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_extended(path: &Path) -> Result<Vec<ConlluSentence>> {
    let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    conllu::parse_extended(BufReader::new(file), DecodeMode::Strict)
        .with_context(|| format!("parsing {}", path.display()))
}

/// Reads plain or extended CoNLL-U, sniffing the column count of the first
/// token line.
fn read_any_conllu(path: &Path) -> Result<Vec<ConlluSentence>> {
    let text = read_text(path)?;
    let columns = text
        .lines()
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split('\t').count())
        .unwrap_or(10);
    let sentences = if columns == 13 {
        conllu::parse_extended(text.as_bytes(), DecodeMode::Strict)
    } else {
        conllu::parse_conllu(text.as_bytes())
    };
    sentences.with_context(|| format!("parsing {}", path.display()))
}

fn write_extended(sentences: &[ConlluSentence], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    conllu::emit_extended(sentences, &mut out)?;
    out.flush()?;
    Ok(())
}

fn ingest(input: &Path, out: &Path) -> Result<ExitCode> {
    let doc = parse_enamex(&read_text(input)?)?;
    for (i, sentence) in doc.sentences.iter().enumerate() {
        if let Err(violations) = validate_mentions(sentence) {
            let rendered: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            bail!("sentence {}: {}", i + 1, rendered.join("; "));
        }
    }
    fs::write(out, serialize_enamex(&doc)?)
        .with_context(|| format!("cannot write {}", out.display()))?;
    let n_mentions: usize = doc.sentences.iter().map(|s| s.char_mentions.len()).sum();
    eprintln!("{} sentences, {} mentions", doc.sentences.len(), n_mentions);
    Ok(ExitCode::SUCCESS)
}

fn align(enamex_path: &Path, conllu_path: &Path, out: &Path, errors: &Path) -> Result<ExitCode> {
    let doc = parse_enamex(&read_text(enamex_path)?)?;
    let conllu_file = File::open(conllu_path)
        .with_context(|| format!("cannot read {}", conllu_path.display()))?;
    let tokenized = conllu::parse_conllu(BufReader::new(conllu_file))
        .with_context(|| format!("parsing {}", conllu_path.display()))?;

    let report = align_corpus(&doc, &tokenized)?;
    write_extended(&report.sentences, out)?;
    fs::write(errors, report.machine_records())
        .with_context(|| format!("cannot write {}", errors.display()))?;
    eprint!("{}", report.human_summary());
    Ok(if report.is_clean() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

/// Detokenizes an extended corpus back to inline ENAMEX text, joining
/// surface forms with single spaces.
fn convert(input: &Path, out: &Path) -> Result<ExitCode> {
    let sentences = read_extended(input)?;
    let doc = extended_to_document(&sentences)?;
    fs::write(out, serialize_enamex(&doc)?)
        .with_context(|| format!("cannot write {}", out.display()))?;
    Ok(ExitCode::SUCCESS)
}

fn extended_to_document(sentences: &[ConlluSentence]) -> Result<EnamexDocument> {
    let mut out = Vec::with_capacity(sentences.len());
    for s in sentences {
        let units = s.surface_units();
        let mut raw = String::new();
        let mut pos = 0usize;
        // (char_start, char_end, first_word, last_word) per surface unit
        let mut spans = Vec::with_capacity(units.len());
        for (k, unit) in units.iter().enumerate() {
            if k > 0 {
                raw.push(' ');
                pos += 1;
            }
            let len = unit.form.chars().count();
            spans.push((pos, pos + len, unit.first_word, unit.last_word));
            raw.push_str(unit.form);
            pos += len;
        }
        let mut mentions = Vec::with_capacity(s.token_mentions.len());
        for m in &s.token_mentions {
            let start = spans.iter().find(|sp| sp.2 == m.first_token).map(|sp| sp.0);
            let end = spans.iter().find(|sp| sp.3 == m.last_token).map(|sp| sp.1);
            let (Some(start), Some(end)) = (start, end) else {
                bail!(
                    "sentence {}: mention over tokens {}..{} has a boundary inside a multiword range",
                    s.sent_id,
                    m.first_token,
                    m.last_token
                );
            };
            mentions.push(Mention {
                start,
                end,
                ne_type: m.ne_type,
                sub_type: m.sub_type.clone(),
                eid: m.eid.clone(),
                name: m.name.clone(),
            });
        }
        out.push(Sentence {
            sent_id: s.sent_id.clone(),
            raw_text: raw,
            char_mentions: mentions,
            ..Sentence::default()
        });
    }
    Ok(EnamexDocument { sentences: out })
}

fn stats(input: &Path) -> Result<ExitCode> {
    let sentences = read_extended(input)?;
    print!("{}", CorpusStats::of(&sentences).render());
    Ok(ExitCode::SUCCESS)
}

/// Builds the extractor from gazetteer files; priority follows flag order.
fn load_extractor(paths: &[PathBuf]) -> Result<FeatureExtractor> {
    let mut gazetteers = Vec::with_capacity(paths.len());
    for (i, path) in paths.iter().enumerate() {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("gazetteer")
            .to_owned();
        let gazetteer = Gazetteer::load(path, name, i as i64 + 1)?;
        if gazetteer.is_empty() {
            eprintln!("warning: gazetteer {} has no entries", path.display());
        }
        gazetteers.push(gazetteer);
    }
    Ok(FeatureExtractor::new(gazetteers)?)
}

fn to_train_sentences(
    sentences: &[ConlluSentence],
    extractor: &FeatureExtractor,
) -> Result<Vec<TrainSentence>> {
    let extracted = par::map_ordered(sentences, |s| {
        let forms = s.word_forms();
        let upos = s.word_upos();
        let features = extractor.extract_sentence(&forms, &upos);
        let tags = bio::encode(&s.token_mentions, s.n_words())
            .map(|tags| tags.iter().map(ToString::to_string).collect::<Vec<_>>());
        (features, tags)
    });
    extracted
        .into_iter()
        .enumerate()
        .map(|(i, (features, tags))| {
            let tags = tags.with_context(|| format!("encoding sentence {}", i + 1))?;
            Ok(TrainSentence { features, tags })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn train_cmd(
    train_path: &Path,
    dev_path: &Path,
    gazetteers: &[PathBuf],
    l1: f64,
    l2: f64,
    seed: u64,
    max_epochs: usize,
    patience: usize,
    model_out: &Path,
    log: Option<&Path>,
) -> Result<ExitCode> {
    let extractor = load_extractor(gazetteers)?;
    let train_set = to_train_sentences(&read_extended(train_path)?, &extractor)?;
    let dev_set = to_train_sentences(&read_extended(dev_path)?, &extractor)?;
    let config = TrainConfig {
        l1,
        l2,
        seed,
        max_epochs,
        patience,
        ..TrainConfig::default()
    };

    let outcome = crf::train(&train_set, &dev_set, &config, extractor.fingerprint())?;
    outcome.model.save(model_out)?;

    let log_text: String = outcome
        .log
        .iter()
        .map(|stats| format!("{}\n", stats.log_line()))
        .collect();
    match log {
        Some(path) => {
            fs::write(path, log_text).with_context(|| format!("cannot write {}", path.display()))?
        }
        None => eprint!("{log_text}"),
    }
    eprintln!(
        "model saved to {} (best epoch {}, dev error {:.6})",
        model_out.display(),
        outcome.best_epoch,
        outcome.best_dev_error
    );
    Ok(ExitCode::SUCCESS)
}

fn tag_cmd(
    model_path: &Path,
    input: &Path,
    out: &Path,
    gazetteers: &[PathBuf],
    broadcast: bool,
) -> Result<ExitCode> {
    let extractor = load_extractor(gazetteers)?;
    let model = CrfModel::load_checked(model_path, &extractor.fingerprint())?;
    let mut sentences = read_any_conllu(input)?;

    let predictions: Vec<Result<Vec<TokenMention>>> = par::map_ordered(&sentences, |s| {
        let forms = s.word_forms();
        if forms.is_empty() {
            return Ok(Vec::new());
        }
        let upos = s.word_upos();
        let features = extractor.extract_sentence(&forms, &upos);
        let encoded = model.encode_sentence(&features);
        let (path, _) = model.viterbi(&encoded);
        let tags: Vec<BioTag> = path
            .iter()
            .map(|&t| model.tags()[t].parse())
            .collect::<Result<_, _>>()?;
        // the CRF does not enforce tag grammar; repair stray I- tags
        Ok(bio::decode(&tags, DecodeMode::Repair)?)
    });
    for (sentence, prediction) in sentences.iter_mut().zip(predictions) {
        sentence.token_mentions = prediction?;
    }
    if broadcast {
        crf::broadcast_mentions(&mut sentences);
    }
    write_extended(&sentences, out)?;
    Ok(ExitCode::SUCCESS)
}

fn broadcast_cmd(input: &Path, out: &Path) -> Result<ExitCode> {
    let mut sentences = read_extended(input)?;
    crf::broadcast_mentions(&mut sentences);
    write_extended(&sentences, out)?;
    Ok(ExitCode::SUCCESS)
}

fn eval_cmd(gold: &Path, pred: &Path, tsv: Option<&Path>) -> Result<ExitCode> {
    let gold_sentences = read_extended(gold)?;
    let pred_sentences = read_extended(pred)?;
    let report = evaluate(&gold_sentences, &pred_sentences)?;
    print!("{}", report.render_table());
    if let Some(path) = tsv {
        fs::write(path, report.machine_records())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn split_cmd(input: &Path, sizes: &str, seed: Option<u64>, out_dir: &Path) -> Result<ExitCode> {
    let blocks = read_blocks(input)?;
    let parts: Vec<usize> = sizes
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .context("--sizes must be three comma-separated sentence counts")?;
    let [n_train, n_dev, n_test] = parts[..] else {
        bail!("--sizes must have exactly three components (train,dev,test)");
    };
    let spec = SplitSpec {
        n_train,
        n_dev,
        n_test,
        seed,
    };
    let (train, dev, test) = split_indices(blocks.len(), &spec)?;

    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    for (name, ids) in [("train", &train), ("dev", &dev), ("test", &test)] {
        let mut corpus = String::new();
        let mut manifest = String::new();
        for &i in ids.iter() {
            corpus.push_str(&blocks[i].text);
            corpus.push('\n');
            manifest.push_str(&blocks[i].sent_id);
            manifest.push('\n');
        }
        fs::write(out_dir.join(format!("{name}.conllu")), corpus)?;
        fs::write(out_dir.join(format!("{name}.ids")), manifest)?;
    }
    eprintln!(
        "wrote {}/{{train,dev,test}}.{{conllu,ids}} ({}/{}/{} sentences)",
        out_dir.display(),
        train.len(),
        dev.len(),
        test.len()
    );
    Ok(ExitCode::SUCCESS)
}

struct Block {
    sent_id: String,
    text: String,
}

/// Splits a CoNLL-U-shaped file into raw sentence blocks, byte-preserving,
/// keyed by `# sent_id` comment or ordinal.
fn read_blocks(path: &Path) -> Result<Vec<Block>> {
    let text = read_text(path)?;
    let mut blocks = Vec::new();
    let mut current = String::new();
    let mut sent_id: Option<String> = None;
    let flush = |current: &mut String, sent_id: &mut Option<String>, blocks: &mut Vec<Block>| {
        if !current.is_empty() {
            let id = sent_id
                .take()
                .unwrap_or_else(|| (blocks.len() + 1).to_string());
            blocks.push(Block {
                sent_id: id,
                text: std::mem::take(current),
            });
        }
    };
    for line in text.lines() {
        if line.is_empty() {
            flush(&mut current, &mut sent_id, &mut blocks);
            continue;
        }
        if let Some(value) = line
            .strip_prefix("# sent_id")
            .and_then(|rest| rest.trim_start().strip_prefix('='))
        {
            sent_id = Some(value.trim().to_owned());
        }
        current.push_str(line);
        current.push('\n');
    }
    flush(&mut current, &mut sent_id, &mut blocks);
    Ok(blocks)
}
