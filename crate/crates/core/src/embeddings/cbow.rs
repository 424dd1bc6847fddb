//! CBOW trainer with negative sampling.
//!
//! The context window is averaged into a hidden vector, scored against the
//! center word and `negative` draws from the unigram^0.75 distribution, and
//! both vector tables are updated by SGD with a linearly decaying rate.
//!
//! Deterministic mode (`threads = 1`, the default) is bitwise reproducible
//! for a fixed seed. With more threads, chunks of the corpus are trained
//! concurrently with unsynchronized vector updates, which trades
//! reproducibility for throughput.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{FrequencyTable, SentenceStream, Token};
use crate::embeddings::EmbeddingModel;
use crate::error::{EmendError, Result};

#[derive(Debug, Clone)]
pub struct CbowConfig {
    /// Vector dimensionality.
    pub dim: usize,
    /// Maximum context window radius; the effective radius is sampled
    /// uniformly from 1..=window per center word.
    pub window: usize,
    pub epochs: u32,
    /// Inclusive vocabulary frequency threshold.
    pub min_count: u64,
    /// Negative samples per center word.
    pub negative: usize,
    /// Initial learning rate, decayed linearly to 1e-4 of itself.
    pub initial_lr: f64,
    pub seed: u64,
    /// 1 = deterministic single-threaded training.
    pub threads: usize,
}

impl Default for CbowConfig {
    fn default() -> CbowConfig {
        CbowConfig {
            dim: 100,
            window: 5,
            epochs: 5,
            min_count: 100,
            negative: 5,
            initial_lr: 0.025,
            seed: 1,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CbowTrainStats {
    /// Mean negative-sampling loss per center word, one entry per epoch.
    pub epoch_losses: Vec<f64>,
    /// In-vocabulary token occurrences per epoch.
    pub train_words: u64,
    pub vocab_size: usize,
}

/// One training observation: a context window, its center word, and the
/// sampled negatives, all as vocabulary indices.
#[derive(Debug, Clone)]
pub struct CbowExample {
    pub context: Vec<usize>,
    pub center: usize,
    pub negatives: Vec<usize>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Negative-sampling loss for one example:
/// -ln sigmoid(h . out_center) - sum_neg ln sigmoid(-h . out_neg)
/// with h the mean of the context input vectors.
pub fn cbow_loss(input: &[f64], output: &[f64], dim: usize, example: &CbowExample) -> f64 {
    assert!(!example.context.is_empty(), "context must be non-empty");
    let mut hidden = vec![0.0; dim];
    for &c in &example.context {
        for (h, v) in hidden.iter_mut().zip(&input[c * dim..(c + 1) * dim]) {
            *h += v;
        }
    }
    let scale = 1.0 / example.context.len() as f64;
    for h in &mut hidden {
        *h *= scale;
    }

    let score = |row: usize| -> f64 {
        hidden
            .iter()
            .zip(&output[row * dim..(row + 1) * dim])
            .map(|(h, o)| h * o)
            .sum()
    };

    let mut loss = softplus(-score(example.center));
    for &neg in &example.negatives {
        loss += softplus(score(neg));
    }
    loss
}

/// Loss plus dense gradients with respect to both vector tables.
pub fn cbow_loss_grad(
    input: &[f64],
    output: &[f64],
    dim: usize,
    example: &CbowExample,
) -> (f64, Vec<f64>, Vec<f64>) {
    assert!(!example.context.is_empty(), "context must be non-empty");
    let mut hidden = vec![0.0; dim];
    for &c in &example.context {
        for (h, v) in hidden.iter_mut().zip(&input[c * dim..(c + 1) * dim]) {
            *h += v;
        }
    }
    let scale = 1.0 / example.context.len() as f64;
    for h in &mut hidden {
        *h *= scale;
    }

    let mut grad_input = vec![0.0; input.len()];
    let mut grad_output = vec![0.0; output.len()];
    let mut grad_hidden = vec![0.0; dim];
    let mut loss = 0.0;

    let mut accumulate = |row: usize, label: f64, grad_hidden: &mut [f64], loss: &mut f64| {
        let out_row = &output[row * dim..(row + 1) * dim];
        let u: f64 = hidden.iter().zip(out_row).map(|(h, o)| h * o).sum();
        *loss += if label > 0.0 { softplus(-u) } else { softplus(u) };
        // d(loss)/du = sigmoid(u) - label
        let du = sigmoid(u) - label;
        for ((gh, go), (h, o)) in grad_hidden
            .iter_mut()
            .zip(&mut grad_output[row * dim..(row + 1) * dim])
            .zip(hidden.iter().zip(out_row))
        {
            *gh += du * o;
            *go += du * h;
        }
    };

    accumulate(example.center, 1.0, &mut grad_hidden, &mut loss);
    for &neg in &example.negatives {
        accumulate(neg, 0.0, &mut grad_hidden, &mut loss);
    }

    for &c in &example.context {
        for (gi, gh) in grad_input[c * dim..(c + 1) * dim].iter_mut().zip(&grad_hidden) {
            *gi += gh * scale;
        }
    }
    (loss, grad_input, grad_output)
}

/// f64 values stored as atomic bits so parallel mode can do unsynchronized
/// (hogwild-style) updates. Races in parallel mode are accepted by design.
struct AtomicF64Slice(Vec<AtomicU64>);

impl AtomicF64Slice {
    fn zeros(len: usize) -> AtomicF64Slice {
        AtomicF64Slice((0..len).map(|_| AtomicU64::new(0f64.to_bits())).collect())
    }

    fn set(&self, i: usize, value: f64) {
        self.0[i].store(value.to_bits(), Ordering::Relaxed);
    }

    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self.0[i].load(Ordering::Relaxed))
    }

    fn add(&self, i: usize, delta: f64) {
        self.set(i, self.get(i) + delta);
    }

    fn to_vec(&self) -> Vec<f64> {
        self.0
            .iter()
            .map(|bits| f64::from_bits(bits.load(Ordering::Relaxed)))
            .collect()
    }
}

/// Cumulative unigram^0.75 distribution for negative sampling.
struct NegativeTable {
    cumulative: Vec<f64>,
    total: f64,
}

impl NegativeTable {
    fn new(counts: &[u64]) -> NegativeTable {
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut total = 0.0;
        for &c in counts {
            total += (c as f64).powf(0.75);
            cumulative.push(total);
        }
        NegativeTable { cumulative, total }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let r = rng.random::<f64>() * self.total;
        self.cumulative
            .partition_point(|&c| c <= r)
            .min(self.cumulative.len() - 1)
    }
}

struct TrainShared<'a> {
    input: &'a AtomicF64Slice,
    output: &'a AtomicF64Slice,
    table: &'a NegativeTable,
    progress: &'a AtomicU64,
    dim: usize,
    window: usize,
    negative: usize,
    initial_lr: f64,
    schedule_span: u64,
}

/// Trains one chunk of sentences. Returns (loss sum, center-word count).
fn train_chunk(shared: &TrainShared<'_>, sentences: &[Vec<u32>], rng: &mut ChaCha8Rng) -> (f64, u64) {
    let dim = shared.dim;
    let mut hidden = vec![0.0; dim];
    let mut hidden_grad = vec![0.0; dim];
    let mut loss_sum = 0.0;
    let mut centers = 0u64;

    for sentence in sentences {
        let done = shared.progress.load(Ordering::Relaxed);
        let remaining = 1.0 - done as f64 / shared.schedule_span as f64;
        let lr = shared.initial_lr * remaining.max(1e-4);

        for center_pos in 0..sentence.len() {
            let radius = rng.random_range(1..=shared.window);
            let lo = center_pos.saturating_sub(radius);
            let hi = (center_pos + radius + 1).min(sentence.len());
            let context_len = hi - lo - 1;
            if context_len == 0 {
                continue;
            }
            let center = sentence[center_pos] as usize;

            hidden.fill(0.0);
            for pos in lo..hi {
                if pos == center_pos {
                    continue;
                }
                let row = sentence[pos] as usize * dim;
                for (h, d) in hidden.iter_mut().enumerate() {
                    *d += shared.input.get(row + h);
                }
            }
            let scale = 1.0 / context_len as f64;
            for h in &mut hidden {
                *h *= scale;
            }

            hidden_grad.fill(0.0);
            let mut loss = 0.0;
            for sample_idx in 0..=shared.negative {
                let (target, label) = if sample_idx == 0 {
                    (center, 1.0)
                } else {
                    let t = shared.table.sample(rng);
                    if t == center {
                        continue;
                    }
                    (t, 0.0)
                };
                let row = target * dim;
                let mut u = 0.0;
                for (h, &hv) in hidden.iter().enumerate() {
                    u += hv * shared.output.get(row + h);
                }
                loss += if label > 0.0 { softplus(-u) } else { softplus(u) };
                let g = (label - sigmoid(u)) * lr;
                for (h, &hv) in hidden.iter().enumerate() {
                    hidden_grad[h] += g * shared.output.get(row + h);
                    shared.output.add(row + h, g * hv);
                }
            }

            for pos in lo..hi {
                if pos == center_pos {
                    continue;
                }
                let row = sentence[pos] as usize * dim;
                for (h, &g) in hidden_grad.iter().enumerate() {
                    shared.input.add(row + h, g * scale);
                }
            }

            loss_sum += loss;
            centers += 1;
        }
        shared
            .progress
            .fetch_add(sentence.len() as u64, Ordering::Relaxed);
    }
    (loss_sum, centers)
}

/// Trains a CBOW model over the stream. The vocabulary is the set of tokens
/// at or above `min_count`, ordered by descending frequency then token.
pub fn train_cbow(
    stream: &SentenceStream,
    table: &FrequencyTable,
    config: &CbowConfig,
) -> Result<(EmbeddingModel, CbowTrainStats)> {
    if config.dim == 0 || config.window == 0 || config.epochs == 0 {
        return Err(EmendError::Config(
            "dim, window and epochs must all be positive".into(),
        ));
    }
    if config.threads == 0 {
        return Err(EmendError::Config("threads must be at least 1".into()));
    }
    if !(config.initial_lr > 0.0) {
        return Err(EmendError::Config("initial_lr must be positive".into()));
    }

    let mut vocab: Vec<Token> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    for (token, count) in table.sorted_entries() {
        if count >= config.min_count {
            vocab.push(token.clone());
            counts.push(count);
        }
    }
    if vocab.is_empty() {
        return Err(EmendError::Config(format!(
            "vocabulary is empty after applying min_count {}",
            config.min_count
        )));
    }
    let index: std::collections::HashMap<&Token, u32> = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t, i as u32))
        .collect();

    // Materialize the stream as vocabulary indices; out-of-vocabulary tokens
    // vanish before windowing, so windows span them.
    let mut sentences: Vec<Vec<u32>> = Vec::new();
    let mut train_words = 0u64;
    let mut context_pairs = 0u64;
    stream.for_each(|sentence| {
        let ids: Vec<u32> = sentence
            .iter()
            .filter_map(|t| index.get(t).copied())
            .collect();
        train_words += ids.len() as u64;
        if ids.len() >= 2 {
            context_pairs += ids.len() as u64;
        }
        if !ids.is_empty() {
            sentences.push(ids);
        }
    })?;
    if context_pairs == 0 {
        return Err(EmendError::Config(
            "no context pairs: every sentence has fewer than two in-vocabulary tokens".into(),
        ));
    }

    let dim = config.dim;
    let input = AtomicF64Slice::zeros(vocab.len() * dim);
    let output = AtomicF64Slice::zeros(vocab.len() * dim);
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    for i in 0..vocab.len() * dim {
        input.set(i, (init_rng.random::<f64>() - 0.5) / dim as f64);
    }

    let negative_table = NegativeTable::new(&counts);
    let progress = AtomicU64::new(0);
    let shared = TrainShared {
        input: &input,
        output: &output,
        table: &negative_table,
        progress: &progress,
        dim,
        window: config.window,
        negative: config.negative,
        initial_lr: config.initial_lr,
        schedule_span: config.epochs as u64 * train_words + 1,
    };

    let threads = config.threads.min(sentences.len()).max(1);
    let chunk_size = sentences.len().div_ceil(threads);
    let mut epoch_losses = Vec::with_capacity(config.epochs as usize);

    for epoch in 0..config.epochs as u64 {
        let results: Vec<(f64, u64)> = std::thread::scope(|scope| {
            let handles: Vec<_> = sentences
                .chunks(chunk_size)
                .enumerate()
                .map(|(t, chunk)| {
                    let shared = &shared;
                    let mut rng = ChaCha8Rng::seed_from_u64(
                        config
                            .seed
                            .wrapping_add(epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15))
                            .wrapping_add((t as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)),
                    );
                    scope.spawn(move || train_chunk(shared, chunk, &mut rng))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training thread panicked"))
                .collect()
        });
        let (loss_sum, centers): (f64, u64) = results
            .iter()
            .fold((0.0, 0), |(l, c), &(dl, dc)| (l + dl, c + dc));
        epoch_losses.push(if centers == 0 { 0.0 } else { loss_sum / centers as f64 });
    }

    let model = EmbeddingModel::from_parts(vocab, dim, input.to_vec(), output.to_vec())?
        .with_trained_epochs(config.epochs);
    let stats = CbowTrainStats {
        epoch_losses,
        train_words,
        vocab_size: model.len(),
    };
    Ok((model, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::count_frequencies;

    fn desk_config() -> CbowConfig {
        CbowConfig {
            dim: 16,
            window: 2,
            epochs: 20,
            min_count: 1,
            negative: 5,
            initial_lr: 0.05,
            seed: 7,
            threads: 1,
        }
    }

    /// x and y share all contexts; z lives in a disjoint one.
    fn distributional_corpus() -> SentenceStream {
        let mut text = String::new();
        for i in 0..150 {
            let shared = if i % 2 == 0 { "x" } else { "y" };
            text.push_str(&format!("alpha {shared} beta\n"));
            text.push_str("gamma z delta\n");
        }
        SentenceStream::from_text(&text)
    }

    #[test]
    fn identical_contexts_yield_similar_vectors() {
        let stream = distributional_corpus();
        let table = count_frequencies(&stream).unwrap();
        let (model, _) = train_cbow(&stream, &table, &desk_config()).unwrap();
        let x = model.token_index("x").unwrap();
        let y = model.token_index("y").unwrap();
        let z = model.token_index("z").unwrap();
        let cos_xy =
            crate::embeddings::cosine(model.input_vector(x), model.input_vector(y)).unwrap();
        let cos_xz =
            crate::embeddings::cosine(model.input_vector(x), model.input_vector(z)).unwrap();
        assert!(
            cos_xy > cos_xz,
            "cosine(x,y)={cos_xy} should exceed cosine(x,z)={cos_xz}"
        );
    }

    #[test]
    fn loss_decreases_over_epochs() {
        let stream = distributional_corpus();
        let table = count_frequencies(&stream).unwrap();
        let (_, stats) = train_cbow(&stream, &table, &desk_config()).unwrap();
        let first = stats.epoch_losses.first().unwrap();
        let last = stats.epoch_losses.last().unwrap();
        assert!(last < first, "losses {:?}", stats.epoch_losses);
    }

    #[test]
    fn single_token_corpus_is_config_error() {
        let stream = SentenceStream::from_text("solo\nsolo\nsolo\n");
        let table = count_frequencies(&stream).unwrap();
        let err = train_cbow(&stream, &table, &desk_config()).unwrap_err();
        assert!(matches!(err, EmendError::Config(_)), "{err}");
    }

    #[test]
    fn same_seed_is_bitwise_reproducible() {
        let stream = distributional_corpus();
        let table = count_frequencies(&stream).unwrap();
        let mut config = desk_config();
        config.epochs = 3;
        let (m1, _) = train_cbow(&stream, &table, &config).unwrap();
        let (m2, _) = train_cbow(&stream, &table, &config).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn empty_vocabulary_is_config_error() {
        let stream = SentenceStream::from_text("a b c\n");
        let table = count_frequencies(&stream).unwrap();
        let mut config = desk_config();
        config.min_count = 100;
        let err = train_cbow(&stream, &table, &config).unwrap_err();
        assert!(matches!(err, EmendError::Config(_)));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let dim = 4;
        let vocab = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let input: Vec<f64> = (0..vocab * dim).map(|_| rng.random::<f64>() - 0.5).collect();
        let output: Vec<f64> = (0..vocab * dim).map(|_| rng.random::<f64>() - 0.5).collect();
        let example = CbowExample {
            context: vec![1, 2],
            center: 0,
            negatives: vec![2, 1],
        };

        let (_, grad_in, grad_out) = cbow_loss_grad(&input, &output, dim, &example);
        let eps = 1e-6;
        for i in 0..input.len() {
            let mut plus = input.clone();
            let mut minus = input.clone();
            plus[i] += eps;
            minus[i] -= eps;
            let numeric = (cbow_loss(&plus, &output, dim, &example)
                - cbow_loss(&minus, &output, dim, &example))
                / (2.0 * eps);
            let denom = grad_in[i].abs().max(numeric.abs()).max(1e-8);
            assert!(
                (grad_in[i] - numeric).abs() / denom < 1e-4,
                "input grad {i}: analytic {} vs numeric {}",
                grad_in[i],
                numeric
            );
        }
        for i in 0..output.len() {
            let mut plus = output.clone();
            let mut minus = output.clone();
            plus[i] += eps;
            minus[i] -= eps;
            let numeric = (cbow_loss(&input, &plus, dim, &example)
                - cbow_loss(&input, &minus, dim, &example))
                / (2.0 * eps);
            let denom = grad_out[i].abs().max(numeric.abs()).max(1e-8);
            assert!(
                (grad_out[i] - numeric).abs() / denom < 1e-4,
                "output grad {i}: analytic {} vs numeric {}",
                grad_out[i],
                numeric
            );
        }
    }
}
