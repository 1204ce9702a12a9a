//! Parallel vs sequential throughput on the three data-parallel inner
//! loops: corpus alignment, batch gradient, and corpus tagging. The
//! sequential functions are the same code the `parallel` feature falls
//! back to when disabled.

use criterion::{criterion_group, criterion_main, Criterion};

use necorpus::align::{align_corpus, align_corpus_serial};
use necorpus::conllu::{ConlluRow, ConlluSentence, RowId};
use necorpus::crf::{batch_objective, batch_objective_serial, CrfModel, GoldSentence, TrainConfig};
use necorpus::enamex::EnamexDocument;
use necorpus::features::FeatureExtractor;
use necorpus::model::Sentence;
use necorpus::par;
use necorpus::split::SplitMix64;

const VOCABULARY: &[(&str, &str)] = &[
    ("paris", "PROPN"),
    ("tokyo", "PROPN"),
    ("zola", "PROPN"),
    ("acme", "PROPN"),
    ("visite", "VERB"),
    ("la", "DET"),
    ("ville", "NOUN"),
    ("musée", "NOUN"),
    ("et", "CCONJ"),
    ("dort", "VERB"),
];

fn synthetic_sentences(n: usize, seed: u64) -> Vec<ConlluSentence> {
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|idx| {
            let len = 4 + (rng.next_u64() % 10) as usize;
            let rows: Vec<ConlluRow> = (0..len)
                .map(|i| {
                    let (form, upos) =
                        VOCABULARY[(rng.next_u64() % VOCABULARY.len() as u64) as usize];
                    ConlluRow {
                        columns: vec![
                            (i + 1).to_string(),
                            form.to_owned(),
                            "_".into(),
                            upos.to_owned(),
                            "_".into(),
                            "_".into(),
                            "0".into(),
                            "_".into(),
                            "_".into(),
                            "_".into(),
                        ],
                        id: RowId::Word(i + 1),
                    }
                })
                .collect();
            ConlluSentence {
                sent_id: format!("b{idx}"),
                comments: vec![],
                rows,
                token_mentions: vec![],
            }
        })
        .collect()
}

fn detokenized(conllu: &[ConlluSentence]) -> EnamexDocument {
    EnamexDocument {
        sentences: conllu
            .iter()
            .map(|s| Sentence {
                sent_id: s.sent_id.clone(),
                raw_text: s.word_forms().join(" "),
                ..Sentence::default()
            })
            .collect(),
    }
}

fn bench_alignment(c: &mut Criterion) {
    let conllu = synthetic_sentences(2000, 0xB1);
    let doc = detokenized(&conllu);
    let mut group = c.benchmark_group("align_corpus/2000_sentences");
    group.sample_size(20);
    group.bench_function("parallel", |b| {
        b.iter(|| align_corpus(&doc, &conllu).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| align_corpus_serial(&doc, &conllu).unwrap())
    });
    group.finish();
}

/// A model over the synthetic vocabulary with pseudo-random weights; the
/// gradient cost is weight-independent, this just avoids all-zero paths.
fn gradient_fixture(sentences: &[ConlluSentence]) -> (CrfModel, Vec<GoldSentence>) {
    let extractor = FeatureExtractor::no_gazetteers();
    let mut keys: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let features: Vec<Vec<necorpus::features::FeatureVector>> = sentences
        .iter()
        .map(|s| extractor.extract_sentence(&s.word_forms(), &s.word_upos()))
        .collect();
    for sentence in &features {
        for fv in sentence {
            for key in fv.iter() {
                if seen.insert(key.to_owned()) {
                    keys.push(key.to_owned());
                }
            }
        }
    }
    let tags: Vec<String> = vec![
        "O".into(),
        "B-Company".into(),
        "B-Location".into(),
        "B-Person".into(),
        "I-Location".into(),
    ];
    let mut model =
        CrfModel::zeroed(tags, keys, extractor.fingerprint(), TrainConfig::default()).unwrap();
    let mut rng = SplitMix64::new(0xB2);
    for w in model.weights_mut() {
        *w = (rng.next_u64() % 1000) as f64 / 1000.0 - 0.5;
    }
    let batch: Vec<GoldSentence> = features
        .iter()
        .map(|fvs| GoldSentence {
            features: model.encode_sentence(fvs),
            tags: fvs.iter().map(|_| (rng.next_u64() % 5) as usize).collect(),
        })
        .collect();
    (model, batch)
}

fn bench_gradient(c: &mut Criterion) {
    let sentences = synthetic_sentences(512, 0xB3);
    let (model, batch) = gradient_fixture(&sentences);
    let mut group = c.benchmark_group("batch_gradient/512_sentences");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| batch_objective(&model, &batch, 0.1))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| batch_objective_serial(&model, &batch, 0.1))
    });
    group.finish();
}

fn bench_tagging(c: &mut Criterion) {
    let sentences = synthetic_sentences(1024, 0xB4);
    let (model, batch) = gradient_fixture(&sentences);
    let encoded: Vec<_> = batch.into_iter().map(|g| g.features).collect();
    let mut group = c.benchmark_group("viterbi_corpus/1024_sentences");
    group.sample_size(20);
    group.bench_function("parallel", |b| {
        b.iter(|| par::map_ordered(&encoded, |s| model.viterbi(s)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| par::map_ordered_seq(&encoded, |s| model.viterbi(s)))
    });
    group.finish();
}

criterion_group!(benches, bench_alignment, bench_gradient, bench_tagging);
criterion_main!(benches);
