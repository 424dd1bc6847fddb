//! SGD training of the corrector network on extracted parallel pairs.
//!
//! One step processes a batch of (error form -> correct form) examples,
//! averages the per-character cross-entropy gradient, clips it by global
//! norm and applies plain SGD. The learning rate halves when the windowed
//! training loss (or held-out loss, when a holdout fraction is configured)
//! stops improving.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{EmendError, Result};
use crate::extraction::ParallelDataset;
use crate::nmt::net::{example_loss, example_loss_grad};
use crate::nmt::params::{Hyper, Layout, Seq2SeqCheckpoint};
use crate::nmt::vocab::{CharVocab, EOS};

/// Where training progress lines (`step<TAB>loss`) go.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum LogSink {
    #[default]
    Quiet,
    Stdout,
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct NmtConfig {
    pub hidden: usize,
    pub embed: usize,
    pub layers: usize,
    pub steps: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    /// Multiplier applied to the learning rate on plateau.
    pub lr_decay: f64,
    /// Steps per plateau check.
    pub plateau_window: usize,
    /// Relative improvement below which a window counts as a plateau.
    pub min_improvement: f64,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    /// Dropout between stacked recurrent layers (training only).
    pub dropout: f64,
    pub seed: u64,
    /// Fraction of pairs held out for plateau decisions (0 disables).
    pub holdout_fraction: f64,
    /// Write intermediate checkpoints every N steps into `checkpoint_dir`.
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
    /// Emit a progress line every N steps (0 = never).
    pub log_every: usize,
    pub log: LogSink,
    /// Batch gradient chunks evaluated in parallel. Results are reduced in
    /// chunk order, so a fixed value gives bitwise-reproducible training.
    pub threads: usize,
}

impl NmtConfig {
    /// Full-scale preset: the toolkit defaults the training recipe follows.
    pub fn paper() -> NmtConfig {
        NmtConfig {
            hidden: 500,
            embed: 500,
            layers: 2,
            steps: 100_000,
            batch_size: 64,
            initial_lr: 1.0,
            lr_decay: 0.5,
            plateau_window: 1000,
            min_improvement: 1e-3,
            clip_norm: 5.0,
            dropout: 0.3,
            seed: 1,
            holdout_fraction: 0.0,
            checkpoint_every: None,
            checkpoint_dir: None,
            log_every: 0,
            log: LogSink::Quiet,
            threads: 2,
        }
    }

    /// Desk-scale preset that trains in minutes on a CPU.
    pub fn desk() -> NmtConfig {
        NmtConfig {
            hidden: 64,
            embed: 64,
            steps: 5000,
            plateau_window: 400,
            dropout: 0.2,
            batch_size: 32,
            ..NmtConfig::paper()
        }
    }
}

impl Default for NmtConfig {
    fn default() -> NmtConfig {
        NmtConfig::desk()
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean per-character cross-entropy per step.
    pub step_losses: Vec<f64>,
    /// Held-out losses at plateau checks, when a holdout is configured.
    pub holdout_losses: Vec<(usize, f64)>,
    pub final_lr: f64,
    pub train_examples: usize,
    pub holdout_examples: usize,
}

struct Logger {
    sink: LogSink,
    file: Option<BufWriter<File>>,
}

impl Logger {
    fn new(sink: LogSink) -> Result<Logger> {
        let file = match &sink {
            LogSink::File(path) => Some(BufWriter::new(
                File::create(path).map_err(|e| EmendError::io(path, e))?,
            )),
            _ => None,
        };
        Ok(Logger { sink, file })
    }

    fn log(&mut self, step: usize, loss: f64) {
        match &self.sink {
            LogSink::Quiet => {}
            LogSink::Stdout => println!("{step}\t{loss:.6}"),
            LogSink::File(_) => {
                if let Some(f) = &mut self.file {
                    let _ = writeln!(f, "{step}\t{loss:.6}");
                }
            }
        }
    }
}

fn mix_seed(seed: u64, step: u64, pos: u64) -> u64 {
    seed.wrapping_add(step.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(pos.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(0x2545_F491_4F6C_DD1D)
}

type Example = (Vec<usize>, Vec<usize>);

/// Loss sum and character count over a batch; gradients accumulate into
/// `grad` unscaled. Chunks are reduced in order, so the result depends only
/// on the chunk count, not on scheduling.
#[allow(clippy::too_many_arguments)]
fn batch_loss_grad(
    params: &[f64],
    layout: &Layout,
    examples: &[Example],
    batch: &[usize],
    grad: &mut [f64],
    dropout: f64,
    seed: u64,
    step: u64,
    chunk_count: usize,
) -> (f64, usize) {
    let chunk_size = batch.len().div_ceil(chunk_count.max(1)).max(1);
    let chunks: Vec<(usize, &[usize])> = batch
        .chunks(chunk_size)
        .enumerate()
        .map(|(i, c)| (i * chunk_size, c))
        .collect();

    let partials: Vec<(Vec<f64>, f64, usize)> = chunks
        .into_par_iter()
        .map(|(offset, chunk)| {
            let mut local_grad = vec![0.0; params.len()];
            let mut loss = 0.0;
            let mut chars = 0usize;
            for (j, &idx) in chunk.iter().enumerate() {
                let (src, tgt) = &examples[idx];
                let mut rng =
                    ChaCha8Rng::seed_from_u64(mix_seed(seed, step, (offset + j) as u64));
                let dropout_opt = (dropout > 0.0).then_some((dropout, &mut rng));
                loss += example_loss_grad(params, layout, src, tgt, &mut local_grad, dropout_opt);
                chars += tgt.len();
            }
            (local_grad, loss, chars)
        })
        .collect();

    let mut loss = 0.0;
    let mut chars = 0usize;
    for (local_grad, local_loss, local_chars) in partials {
        for (g, l) in grad.iter_mut().zip(&local_grad) {
            *g += l;
        }
        loss += local_loss;
        chars += local_chars;
    }
    (loss, chars)
}

fn holdout_loss(params: &[f64], layout: &Layout, examples: &[Example], indices: &[usize]) -> f64 {
    let mut loss = 0.0;
    let mut chars = 0usize;
    for &idx in indices {
        let (src, tgt) = &examples[idx];
        loss += example_loss(params, layout, src, tgt);
        chars += tgt.len();
    }
    loss / chars.max(1) as f64
}

/// Trains a checkpoint on the dataset (error form -> correct form).
pub fn train(dataset: &ParallelDataset, config: &NmtConfig) -> Result<(Seq2SeqCheckpoint, TrainReport)> {
    if dataset.is_empty() {
        return Err(EmendError::Config("training dataset is empty".into()));
    }
    if config.steps == 0 || config.batch_size == 0 {
        return Err(EmendError::Config("steps and batch_size must be positive".into()));
    }
    if !(0.0..1.0).contains(&config.dropout) {
        return Err(EmendError::Config("dropout must lie in [0, 1)".into()));
    }
    if !(0.0..1.0).contains(&config.holdout_fraction) {
        return Err(EmendError::Config("holdout_fraction must lie in [0, 1)".into()));
    }

    let vocab = CharVocab::from_dataset(dataset)?;
    let hyper = Hyper {
        vocab: vocab.size(),
        embed: config.embed,
        hidden: config.hidden,
        layers: config.layers,
    };
    let layout = Layout::new(hyper)?;

    let examples: Vec<Example> = dataset
        .pairs
        .iter()
        .map(|pair| {
            let src = vocab.encode_word(&pair.error_form);
            let mut tgt = vocab.encode_word(&pair.correct_form);
            tgt.push(EOS);
            (src, tgt)
        })
        .collect();

    // Holdout split, deterministic in the seed.
    let mut split_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED_5EED_5EED_5EED);
    let mut all_indices: Vec<usize> = (0..examples.len()).collect();
    all_indices.shuffle(&mut split_rng);
    let holdout_count = ((examples.len() as f64) * config.holdout_fraction).round() as usize;
    let holdout_indices: Vec<usize> = all_indices[..holdout_count].to_vec();
    let train_indices: Vec<usize> = all_indices[holdout_count..].to_vec();
    if train_indices.is_empty() {
        return Err(EmendError::Config(
            "holdout fraction leaves no training examples".into(),
        ));
    }

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = layout.init_params(&mut init_rng);
    let mut grad = vec![0.0; params.len()];

    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x0BD3_0BD3_0BD3_0BD3);
    let mut order = train_indices.clone();
    order.shuffle(&mut order_rng);
    let mut cursor = 0usize;

    let mut logger = Logger::new(config.log.clone())?;
    let mut step_losses = Vec::with_capacity(config.steps);
    let mut holdout_losses = Vec::new();
    let mut lr = config.initial_lr;
    let mut best_window = f64::INFINITY;

    let mut batch = Vec::with_capacity(config.batch_size);
    for step in 1..=config.steps {
        batch.clear();
        while batch.len() < config.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut order_rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }

        grad.iter_mut().for_each(|g| *g = 0.0);
        let (loss_sum, chars) = batch_loss_grad(
            &params,
            &layout,
            &examples,
            &batch,
            &mut grad,
            config.dropout,
            config.seed,
            step as u64,
            config.threads,
        );
        let loss = loss_sum / chars as f64;
        if !loss.is_finite() {
            return Err(EmendError::Divergence { step });
        }
        step_losses.push(loss);

        let scale = 1.0 / chars as f64;
        let norm = grad.iter().map(|g| g * scale * (g * scale)).sum::<f64>().sqrt();
        let clip_scale = if norm > config.clip_norm {
            scale * config.clip_norm / norm
        } else {
            scale
        };
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= lr * clip_scale * g;
        }

        if config.log_every > 0 && step % config.log_every == 0 {
            logger.log(step, loss);
        }

        if config.plateau_window > 0 && step % config.plateau_window == 0 {
            let window_loss = if holdout_indices.is_empty() {
                let window = &step_losses[step - config.plateau_window..];
                window.iter().sum::<f64>() / window.len() as f64
            } else {
                let hl = holdout_loss(&params, &layout, &examples, &holdout_indices);
                holdout_losses.push((step, hl));
                hl
            };
            if window_loss > best_window * (1.0 - config.min_improvement) {
                lr *= config.lr_decay;
            }
            best_window = best_window.min(window_loss);
        }

        if let (Some(every), Some(dir)) = (config.checkpoint_every, &config.checkpoint_dir) {
            if every > 0 && step % every == 0 && step < config.steps {
                let snapshot = Seq2SeqCheckpoint::from_params(
                    vocab.clone(),
                    hyper,
                    &params,
                    step as u64,
                    config.seed,
                );
                std::fs::create_dir_all(dir).map_err(|e| EmendError::io(dir, e))?;
                snapshot.save(&dir.join(format!("step-{step:06}.ckpt")))?;
            }
        }
    }

    let checkpoint = Seq2SeqCheckpoint::from_params(
        vocab,
        hyper,
        &params,
        config.steps as u64,
        config.seed,
    );
    checkpoint.validate()?;
    let report = TrainReport {
        step_losses,
        holdout_losses,
        final_lr: lr,
        train_examples: train_indices.len(),
        holdout_examples: holdout_indices.len(),
    };
    Ok((checkpoint, report))
}
