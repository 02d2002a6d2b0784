//! Skip-gram with negative sampling.
//!
//! For a center word `c`, an observed context word `o` and negatives
//! `n_1..n_k` drawn from the unigram distribution raised to 0.75, the loss is
//!
//! ```text
//! L = -ln s(u_o . v_c) - sum_i ln s(-u_ni . v_c)
//! ```
//!
//! where `v` are input (center) vectors, `u` output vectors and `s` the
//! logistic function. Only the input vectors are kept after training.
//!
//! Multi-worker training updates the shared matrices without locks (Hogwild
//! style); individual `f64` components are stored as relaxed atomics so the
//! races are benign. Deterministic mode runs a single worker.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dot, Embedding};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: u64,
    pub subsample_threshold: f64,
    /// Initial rate, decayed linearly towards zero over all epochs.
    pub learning_rate: f64,
    pub seed: u64,
    pub deterministic: bool,
    /// Worker count when not deterministic; `None` uses available parallelism.
    pub threads: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            min_count: 5,
            subsample_threshold: 1e-3,
            learning_rate: 0.025,
            seed: 1,
            deterministic: false,
            threads: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("window", self.window),
            ("negatives", self.negatives),
            ("epochs", self.epochs),
            ("min_count", self.min_count as usize),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if !(self.subsample_threshold > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "subsample_threshold and learning_rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss per (center, context) pair for each epoch.
    pub epoch_losses: Vec<f64>,
    pub vocab_size: usize,
    pub corpus_tokens: u64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln s(x)` without overflow.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// `label - s(score)`: the negative derivative of the pair loss with
/// respect to the score, shared by the trainer and [`sgns_gradient`].
fn pair_coefficient(score: f64, label: f64) -> f64 {
    label - sigmoid(score)
}

pub fn sgns_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    -log_sigmoid(dot(context, center)) - negatives.iter().map(|n| log_sigmoid(-dot(n, center))).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradient {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Analytic gradient of [`sgns_loss`] with respect to every vector.
pub fn sgns_gradient(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> SgnsGradient {
    let d = center.len();
    let mut g_center = vec![0.0; d];
    let mut accumulate = |target: &[f64], label: f64| -> Vec<f64> {
        let dl_ds = -pair_coefficient(dot(target, center), label);
        for (g, t) in g_center.iter_mut().zip(target) {
            *g += dl_ds * t;
        }
        center.iter().map(|c| dl_ds * c).collect()
    };
    let g_context = accumulate(context, 1.0);
    let g_negatives = negatives.iter().map(|n| accumulate(n, 0.0)).collect();
    SgnsGradient {
        center: g_center,
        context: g_context,
        negatives: g_negatives,
    }
}

/// Weight matrix with relaxed-atomic components for lock-free sharing.
struct SharedMatrix {
    data: Vec<AtomicU64>,
    dim: usize,
}

impl SharedMatrix {
    fn from_values(values: Vec<f64>, dim: usize) -> Self {
        SharedMatrix {
            data: values.into_iter().map(|v| AtomicU64::new(v.to_bits())).collect(),
            dim,
        }
    }

    fn load(&self, row: usize, out: &mut [f64]) {
        let base = row * self.dim;
        for (k, o) in out.iter_mut().enumerate() {
            *o = f64::from_bits(self.data[base + k].load(Ordering::Relaxed));
        }
    }

    /// `row += coef * v`
    fn add_scaled(&self, row: usize, coef: f64, v: &[f64]) {
        let base = row * self.dim;
        for (k, x) in v.iter().enumerate() {
            let cell = &self.data[base + k];
            let cur = f64::from_bits(cell.load(Ordering::Relaxed));
            cell.store((cur + coef * x).to_bits(), Ordering::Relaxed);
        }
    }

    fn into_values(self) -> Vec<f64> {
        self.data
            .into_iter()
            .map(|a| f64::from_bits(a.into_inner()))
            .collect()
    }
}

struct Vocab {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
}

fn build_vocab(sentences: &[Vec<String>], min_count: u64) -> (Vocab, u64) {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for s in sentences {
        for t in s {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let total = kept.iter().map(|(_, c)| c).sum();
    let words: Vec<String> = kept.iter().map(|(w, _)| w.to_string()).collect();
    let index = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i as u32))
        .collect();
    (
        Vocab {
            words,
            counts: kept.iter().map(|(_, c)| *c).collect(),
            index,
        },
        total,
    )
}

struct Shared<'a> {
    cfg: &'a TrainConfig,
    input: SharedMatrix,
    output: SharedMatrix,
    keep_prob: Vec<f64>,
    noise: WeightedIndex<f64>,
    processed: AtomicU64,
    total_work: u64,
}

impl Shared<'_> {
    fn learning_rate(&self) -> f64 {
        let done = self.processed.load(Ordering::Relaxed) as f64;
        let frac = 1.0 - done / (self.total_work as f64 + 1.0);
        self.cfg.learning_rate * frac.max(1e-4)
    }

    /// Trains on a chunk of sentences; returns (loss sum, pair count).
    fn run_chunk(&self, chunk: &[Vec<u32>], rng: &mut ChaCha8Rng) -> (f64, u64) {
        let d = self.cfg.dim;
        let mut v_c = vec![0.0; d];
        let mut u = vec![0.0; d];
        let mut grad = vec![0.0; d];
        let mut kept = Vec::new();
        let mut loss = 0.0;
        let mut pairs = 0u64;
        for sentence in chunk {
            kept.clear();
            kept.extend(
                sentence
                    .iter()
                    .copied()
                    .filter(|&w| rng.gen::<f64>() < self.keep_prob[w as usize]),
            );
            let lr = self.learning_rate();
            for (pos, &center) in kept.iter().enumerate() {
                let reach = rng.gen_range(1..=self.cfg.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(kept.len() - 1);
                for (ctx_pos, &context) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    self.input.load(center as usize, &mut v_c);
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for k in 0..=self.cfg.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let n = self.noise.sample(rng) as u32;
                            if n == context {
                                continue;
                            }
                            (n, 0.0)
                        };
                        self.output.load(target as usize, &mut u);
                        let score = dot(&u, &v_c);
                        loss -= if label == 1.0 {
                            log_sigmoid(score)
                        } else {
                            log_sigmoid(-score)
                        };
                        let g = pair_coefficient(score, label) * lr;
                        for (acc, x) in grad.iter_mut().zip(&u) {
                            *acc += g * x;
                        }
                        self.output.add_scaled(target as usize, g, &v_c);
                    }
                    self.input.add_scaled(center as usize, 1.0, &grad);
                    pairs += 1;
                }
            }
            self.processed
                .fetch_add(sentence.len() as u64, Ordering::Relaxed);
        }
        (loss, pairs)
    }
}

fn worker_seed(seed: u64, epoch: usize, worker: usize) -> u64 {
    // splitmix-style mixing keeps per-worker streams apart
    let mut x = seed ^ ((epoch as u64) << 32) ^ (worker as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Trains SGNS embeddings; returns the input vectors with corpus counts
/// attached as frequencies.
pub fn train_skipgram(sentences: &[Vec<String>], cfg: &TrainConfig) -> Result<(Embedding, TrainReport)> {
    cfg.validate()?;
    if sentences.iter().all(|s| s.is_empty()) {
        return Err(Error::Training("training corpus is empty".into()));
    }
    let (vocab, total_tokens) = build_vocab(sentences, cfg.min_count);
    if vocab.words.is_empty() {
        return Err(Error::Training(format!(
            "no token occurs at least min_count={} times",
            cfg.min_count
        )));
    }
    let encoded: Vec<Vec<u32>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.index.get(t).copied()).collect())
        .filter(|s: &Vec<u32>| s.len() >= 2)
        .collect();

    let n = vocab.words.len();
    let d = cfg.dim;
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let input: Vec<f64> = (0..n * d)
        .map(|_| (init_rng.gen::<f64>() - 0.5) / d as f64)
        .collect();

    let threshold = cfg.subsample_threshold * total_tokens as f64;
    let keep_prob = vocab
        .counts
        .iter()
        .map(|&c| {
            let c = c as f64;
            ((c / threshold).sqrt() + 1.0) * threshold / c
        })
        .collect();
    let noise = WeightedIndex::new(vocab.counts.iter().map(|&c| (c as f64).powf(0.75)))
        .map_err(|e| Error::Training(format!("noise distribution: {e}")))?;
    let per_epoch: u64 = encoded.iter().map(|s| s.len() as u64).sum();

    let shared = Shared {
        cfg,
        input: SharedMatrix::from_values(input, d),
        output: SharedMatrix::from_values(vec![0.0; n * d], d),
        keep_prob,
        noise,
        processed: AtomicU64::new(0),
        total_work: per_epoch * cfg.epochs as u64,
    };

    let workers = if cfg.deterministic {
        1
    } else {
        cfg.threads
            .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()))
            .clamp(1, encoded.len().max(1))
    };
    let chunk_len = encoded.len().div_ceil(workers).max(1);

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, pairs) = if workers == 1 {
            let mut rng = ChaCha8Rng::seed_from_u64(worker_seed(cfg.seed, epoch, 0));
            shared.run_chunk(&encoded, &mut rng)
        } else {
            thread::scope(|scope| {
                let handles: Vec<_> = encoded
                    .chunks(chunk_len)
                    .enumerate()
                    .map(|(w, chunk)| {
                        let shared = &shared;
                        scope.spawn(move || {
                            let mut rng = ChaCha8Rng::seed_from_u64(worker_seed(cfg.seed, epoch, w));
                            shared.run_chunk(chunk, &mut rng)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training worker panicked"))
                    .fold((0.0, 0), |(l, p), (l2, p2)| (l + l2, p + p2))
            })
        };
        epoch_losses.push(if pairs > 0 { loss / pairs as f64 } else { 0.0 });
    }

    let Shared { input, .. } = shared;
    let mut emb = Embedding::new(vocab.words, input.into_values(), d)?;
    emb.set_frequency_vec(vocab.counts);
    Ok((
        emb,
        TrainReport {
            epoch_losses,
            vocab_size: n,
            corpus_tokens: total_tokens,
        },
    ))
}
