//! Corpus generation and the ADVC corpus file.
//!
//! Layout: magic `ADVC`, `u32` version, `u64` header length, JSON header
//! (method, config, counts, image shape), then for every record the
//! original and the adversarial image as little-endian `f32`, then a
//! `u64`-length JSON index of labels and norms.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{bim_batch, cw_l2_batch, fgsm_batch, next_class_target, AdversarialRecord, AttackConfig, AttackMethod};
use crate::binfmt;
use crate::classifier::predict_labels;
use crate::dataset::LabeledImageSet;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::numerics::Network;
use crate::scalar::Scalar;

const CORPUS_MAGIC: &[u8; 4] = b"ADVC";
const CORPUS_VERSION: u32 = 1;
const ATTACK_CHUNK: usize = 64;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub requested: usize,
    /// Correctly classified candidates that were attacked.
    pub attacked: usize,
    /// Candidates skipped because the classifier already got them wrong.
    pub skipped_misclassified: usize,
    pub successes: usize,
    /// `requested - records`, nonzero when the pool ran out.
    pub shortfall: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus<S> {
    pub config: AttackConfig,
    pub records: Vec<AdversarialRecord<S>>,
    /// Index of each record's original within the attacked pool.
    pub source_indices: Vec<usize>,
    pub stats: CorpusStats,
}

impl<S> Corpus<S> {
    pub fn method(&self) -> AttackMethod {
        self.config.method()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn attack_chunk<S: Scalar>(
    model: &Network<S>,
    images: &[Image<S>],
    labels: &[usize],
    cfg: &AttackConfig,
) -> Result<Vec<AdversarialRecord<S>>> {
    match cfg {
        AttackConfig::Fgsm { epsilon } => fgsm_batch(model, images, labels, *epsilon),
        AttackConfig::Bim { epsilon, step, iterations } => bim_batch(model, images, labels, *epsilon, *step, *iterations),
        AttackConfig::CwL2(cw) => {
            let classes = model.num_outputs();
            let targets = labels
                .iter()
                .map(|&l| next_class_target(l, classes))
                .collect::<Result<Vec<_>>>()?;
            cw_l2_batch(model, images, labels, &targets, cw)
        }
    }
}

/// Attacks correctly classified images of `pool`, visited in a seeded
/// random order, until `count` successful records exist or the pool is
/// exhausted (reported as `stats.shortfall`).
pub fn generate_corpus<S: Scalar>(
    model: &Network<S>,
    pool: &LabeledImageSet<S>,
    cfg: &AttackConfig,
    count: usize,
    seed: u64,
) -> Result<Corpus<S>> {
    cfg.validate()?;
    let predicted = predict_labels(model, pool.images())?;
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (eligible, skipped): (Vec<usize>, Vec<usize>) =
        order.into_iter().partition(|&i| predicted[i] == pool.labels()[i]);

    let mut stats = CorpusStats {
        requested: count,
        skipped_misclassified: skipped.len(),
        ..CorpusStats::default()
    };
    let mut records = Vec::with_capacity(count);
    let mut source_indices = Vec::with_capacity(count);
    for chunk in eligible.chunks(ATTACK_CHUNK) {
        if records.len() >= count {
            break;
        }
        let images: Vec<Image<S>> = chunk.iter().map(|&i| pool.images()[i].clone()).collect();
        let labels: Vec<usize> = chunk.iter().map(|&i| pool.labels()[i]).collect();
        let out = attack_chunk(model, &images, &labels, cfg)?;
        for (rec, &idx) in out.into_iter().zip(chunk) {
            if records.len() >= count {
                break;
            }
            stats.attacked += 1;
            if rec.success {
                records.push(rec);
                source_indices.push(idx);
            }
        }
    }
    stats.successes = records.len();
    stats.shortfall = count - records.len();
    Ok(Corpus {
        config: cfg.clone(),
        records,
        source_indices,
        stats,
    })
}

#[derive(Serialize, Deserialize)]
struct CorpusHeader {
    method: AttackMethod,
    config: AttackConfig,
    count: usize,
    image_shape: [usize; 3],
    stats: CorpusStats,
}

#[derive(Serialize, Deserialize)]
struct IndexEntry {
    source_index: usize,
    true_label: usize,
    predicted_label: usize,
    target_label: Option<usize>,
    l2: f64,
    linf: f64,
    target_margin: Option<f64>,
    success: bool,
}

pub fn write_corpus<W: Write, S: Scalar>(w: &mut W, corpus: &Corpus<S>) -> Result<()> {
    let image_shape = corpus.records.first().map_or([0, 0, 0], |r| r.original.shape());
    let header = CorpusHeader {
        method: corpus.method(),
        config: corpus.config.clone(),
        count: corpus.len(),
        image_shape,
        stats: corpus.stats.clone(),
    };
    binfmt::write_preamble(w, CORPUS_MAGIC, CORPUS_VERSION, &header)?;
    for r in &corpus.records {
        binfmt::write_f32s(w, r.original.pixels())?;
        binfmt::write_f32s(w, r.adversarial.pixels())?;
    }
    let index: Vec<IndexEntry> = corpus
        .records
        .iter()
        .zip(&corpus.source_indices)
        .map(|(r, &source_index)| IndexEntry {
            source_index,
            true_label: r.true_label,
            predicted_label: r.predicted_label,
            target_label: r.target_label,
            l2: r.l2,
            linf: r.linf,
            target_margin: r.target_margin,
            success: r.success,
        })
        .collect();
    binfmt::write_json_block(w, &index)
}

pub fn read_corpus<R: Read, S: Scalar>(r: &mut R) -> Result<Corpus<S>> {
    let header: CorpusHeader = binfmt::read_preamble(r, CORPUS_MAGIC, CORPUS_VERSION)?;
    if header.method != header.config.method() {
        return Err(Error::format("corpus header method disagrees with its config"));
    }
    let [c, h, w] = header.image_shape;
    let len = c * h * w;
    if header.count > 0 && len == 0 {
        return Err(Error::format("corpus header has an empty image shape"));
    }
    let mut pairs = Vec::with_capacity(header.count);
    for _ in 0..header.count {
        let original = Image::new(c, h, w, binfmt::read_f32s(r, len)?)?;
        let adversarial = Image::new(c, h, w, binfmt::read_f32s(r, len)?)?;
        pairs.push((original, adversarial));
    }
    let index: Vec<IndexEntry> = binfmt::read_json(r)?;
    binfmt::expect_eof(r)?;
    if index.len() != header.count {
        return Err(Error::format(format!("index holds {} entries, header says {}", index.len(), header.count)));
    }
    let mut records = Vec::with_capacity(header.count);
    let mut source_indices = Vec::with_capacity(header.count);
    for ((original, adversarial), e) in pairs.into_iter().zip(index) {
        source_indices.push(e.source_index);
        records.push(AdversarialRecord {
            original,
            adversarial,
            true_label: e.true_label,
            predicted_label: e.predicted_label,
            target_label: e.target_label,
            l2: e.l2,
            linf: e.linf,
            target_margin: e.target_margin,
            success: e.success,
        });
    }
    Ok(Corpus {
        config: header.config,
        records,
        source_indices,
        stats: header.stats,
    })
}

pub fn save_corpus<S: Scalar>(path: &Path, corpus: &Corpus<S>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_corpus(&mut w, corpus)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_corpus<S: Scalar>(path: &Path) -> Result<Corpus<S>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(&mut BufReader::new(file))
}
