//! Character-level sequence-to-sequence corrector: a stacked bidirectional
//! LSTM encoder, an LSTM decoder with general global attention, SGD
//! training on extracted parallel pairs, and beam-search decoding of ranked
//! correction candidates.

mod beam;
mod io;
mod linalg;
mod lstm;
mod net;
mod params;
mod train;
mod vocab;

pub use beam::{BeamHypothesis, StepDiagnostics};
pub use net::attention_weights;
pub use params::{Hyper, Layout, Seq2SeqCheckpoint};
pub use train::{train, LogSink, NmtConfig, TrainReport};
pub use vocab::{CharVocab, BOS, EOS, PAD, RESERVED, UNK};

use crate::corpus::Token;
use crate::error::Result;

/// A loaded checkpoint prepared for decoding. Immutable and safe to share
/// across threads.
pub struct Decoder {
    layout: Layout,
    params: Vec<f64>,
    vocab: CharVocab,
}

impl Decoder {
    pub fn new(checkpoint: &Seq2SeqCheckpoint) -> Result<Decoder> {
        checkpoint.validate()?;
        Ok(Decoder {
            layout: checkpoint.layout()?,
            params: checkpoint.params_f64(),
            vocab: checkpoint.char_vocab.clone(),
        })
    }

    pub fn vocab(&self) -> &CharVocab {
        &self.vocab
    }

    /// Ranked correction candidates, best first. At most `n_best` are
    /// returned; candidates that hit the length cap without finishing are
    /// flagged. Deterministic for a fixed checkpoint and input.
    pub fn beam_decode(&self, word: &Token, beam_size: usize, n_best: usize) -> Vec<BeamHypothesis> {
        let src = self.vocab.encode_word(word);
        beam::beam_decode_impl(&self.params, &self.layout, &self.vocab, &src, beam_size, n_best)
    }

    /// Follows the most probable symbol at every step.
    pub fn greedy_decode(&self, word: &Token) -> BeamHypothesis {
        let src = self.vocab.encode_word(word);
        beam::greedy_decode_impl(&self.params, &self.layout, &self.vocab, &src)
    }

    /// Per-step normalization sums of a greedy decode, for verifying that
    /// attention weights and output distributions are proper distributions.
    pub fn diagnostics(&self, word: &Token) -> Vec<StepDiagnostics> {
        let src = self.vocab.encode_word(word);
        beam::decode_diagnostics_impl(&self.params, &self.layout, &src)
    }
}

/// Encodes a correction target: its characters followed by EOS.
pub fn encode_target(vocab: &CharVocab, word: &Token) -> Vec<usize> {
    let mut ids = vocab.encode_word(word);
    ids.push(EOS);
    ids
}

/// Summed teacher-forced cross-entropy of one example. Low-level hook for
/// verification against finite differences.
pub fn example_loss(params: &[f64], layout: &Layout, src: &[usize], tgt_out: &[usize]) -> f64 {
    net::example_loss(params, layout, src, tgt_out)
}

/// Loss of one example plus its gradient, accumulated into `grad`.
pub fn example_loss_grad(
    params: &[f64],
    layout: &Layout,
    src: &[usize],
    tgt_out: &[usize],
    grad: &mut [f64],
) -> f64 {
    net::example_loss_grad(params, layout, src, tgt_out, grad, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;
    use crate::extraction::{ParallelDataset, ParallelPair, Provenance, SeedSource};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tok(s: &str) -> Token {
        Token::new(s).unwrap()
    }

    fn tiny_layout(vocab: usize, embed: usize, hidden: usize, layers: usize) -> Layout {
        Layout::new(Hyper {
            vocab,
            embed,
            hidden,
            layers,
        })
        .unwrap()
    }

    fn dataset_from(pairs: &[(&str, &str)]) -> ParallelDataset {
        let pairs: Vec<ParallelPair> = pairs
            .iter()
            .map(|(e, c)| ParallelPair {
                error_form: tok(e),
                correct_form: tok(c),
                distance: 1,
                seed_word: tok(c),
            })
            .collect();
        let pair_count = pairs.len();
        ParallelDataset {
            pairs,
            provenance: Provenance {
                seed_source: SeedSource::VocabAll,
                min_freq: 1,
                min_length: 1,
                k: 10,
                max_dist: 3,
                seed_count: pair_count,
                oov_seeds: 0,
                pair_count,
            },
        }
    }

    #[test]
    fn attention_weights_single_position() {
        let w_att = vec![0.3, -0.1, 0.2, 0.5];
        let weights = attention_weights(&[1.0, -2.0], &[vec![0.5, 0.5]], &w_att);
        assert_eq!(weights, vec![1.0]);
    }

    #[test]
    fn attention_weights_zero_matrix_is_uniform() {
        let w_att = vec![0.0; 9];
        let states = vec![vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 3.0]];
        let weights = attention_weights(&[0.4, -0.2, 0.9], &states, &w_att);
        for w in &weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_weights_match_reference_softmax() {
        let hidden = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w_att: Vec<f64> = (0..hidden * hidden).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h_t: Vec<f64> = (0..hidden).map(|_| rng.random_range(-1.0..1.0)).collect();
        let states: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..hidden).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();

        let got = attention_weights(&h_t, &states, &w_att);

        // Reference: raw scores h_t^T W_a h_s, then an explicit softmax.
        let scores: Vec<f64> = states
            .iter()
            .map(|m| {
                let mut s = 0.0;
                for i in 0..hidden {
                    for j in 0..hidden {
                        s += h_t[i] * w_att[i * hidden + j] * m[j];
                    }
                }
                s
            })
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for (g, e) in got.iter().zip(&exps) {
            assert!((g - e / total).abs() < 1e-10);
        }
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        // Hidden dim <= 8, words of length <= 4, double precision.
        let layout = tiny_layout(8, 3, 5, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let params = layout.init_params(&mut rng);
        let src = vec![4, 6, 5, 7];
        let tgt = vec![5, 4, 7, EOS];

        let mut grad = vec![0.0; params.len()];
        let loss = example_loss_grad(&params, &layout, &src, &tgt, &mut grad);
        assert!(loss.is_finite() && loss > 0.0);

        let eps = 1e-5;
        for i in 0..params.len() {
            let mut plus = params.clone();
            plus[i] += eps;
            let mut minus = params.clone();
            minus[i] -= eps;
            let numeric = (example_loss(&plus, &layout, &src, &tgt)
                - example_loss(&minus, &layout, &src, &tgt))
                / (2.0 * eps);
            let abs_err = (grad[i] - numeric).abs();
            let rel = abs_err / grad[i].abs().max(numeric.abs()).max(f64::MIN_POSITIVE);
            // Near-zero coordinates sit below what central differences can
            // resolve (roundoff ~ eta * |loss| / eps); the absolute guard
            // only admits that noise floor.
            assert!(
                rel < 1e-4 || abs_err < 1e-8,
                "param {i}: analytic {} vs numeric {numeric} (rel {rel})",
                grad[i]
            );
        }
    }

    #[test]
    fn untrained_decoder_emits_proper_distributions() {
        let layout = tiny_layout(9, 4, 6, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = layout.init_params(&mut rng);
        let vocab = CharVocab::from_chars(vec!['a', 'b', 'c', 'd', 'e']).unwrap();
        let checkpoint = Seq2SeqCheckpoint::from_params(
            vocab,
            Hyper {
                vocab: 9,
                embed: 4,
                hidden: 6,
                layers: 2,
            },
            &params,
            0,
            5,
        );
        let decoder = Decoder::new(&checkpoint).unwrap();
        let diags = decoder.diagnostics(&tok("bad"));
        assert!(!diags.is_empty());
        for d in diags {
            assert!((d.prob_sum - 1.0).abs() < 1e-6);
            assert!((d.attention_sum - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn overfit_identity_like_mapping_and_decode() {
        // A 20-pair toy set with a consistent character substitution.
        let pairs: Vec<(String, String)> = [
            "cat", "dog", "sun", "map", "pen", "cup", "hat", "box", "key", "jar", "bed", "fox",
            "owl", "ant", "bee", "cow", "pig", "rat", "hen", "bat",
        ]
        .iter()
        .map(|w| (w.replace('a', "q").replace('e', "x"), w.to_string()))
        .collect();
        let borrowed: Vec<(&str, &str)> =
            pairs.iter().map(|(e, c)| (e.as_str(), c.as_str())).collect();
        let dataset = dataset_from(&borrowed);

        let config = NmtConfig {
            hidden: 32,
            embed: 24,
            steps: 1500,
            batch_size: 20,
            dropout: 0.0,
            plateau_window: 400,
            seed: 9,
            threads: 2,
            ..NmtConfig::desk()
        };
        let (checkpoint, report) = train(&dataset, &config).unwrap();

        // Loss over the final 5% of steps is below the first 5%.
        let five = (config.steps / 20).max(1);
        let head: f64 = report.step_losses[..five].iter().sum::<f64>() / five as f64;
        let tail: f64 =
            report.step_losses[config.steps - five..].iter().sum::<f64>() / five as f64;
        assert!(tail < head, "head {head} tail {tail}");

        let decoder = Decoder::new(&checkpoint).unwrap();
        let mut exact = 0;
        for (error, correct) in &pairs {
            let hyp = decoder.greedy_decode(&tok(error));
            if hyp.word == *correct {
                exact += 1;
            }
        }
        assert!(exact >= 19, "only {exact}/20 reconstructed");

        // Beam search agrees with greedy at beam size 1 and never ranks a
        // worse top hypothesis with a wider beam.
        for (error, _) in pairs.iter().take(6) {
            let greedy = decoder.greedy_decode(&tok(error));
            let beam1 = decoder.beam_decode(&tok(error), 1, 1);
            assert_eq!(beam1[0].word, greedy.word);
            assert!((beam1[0].score - greedy.score).abs() < 1e-9);
            let beam10 = decoder.beam_decode(&tok(error), 10, 10);
            assert!(beam10[0].score >= greedy.score - 1e-12);
            let scores: Vec<f64> = beam10.iter().map(|h| h.score).collect();
            assert!(scores.windows(2).all(|w| w[0] >= w[1] + f64::EPSILON * -1.0));
        }
    }

    #[test]
    fn same_seed_same_checkpoint() {
        let dataset = dataset_from(&[("ab", "ba"), ("ba", "ab"), ("aa", "bb")]);
        let config = NmtConfig {
            hidden: 12,
            embed: 8,
            steps: 40,
            batch_size: 3,
            dropout: 0.2,
            seed: 33,
            threads: 2,
            ..NmtConfig::desk()
        };
        let (c1, _) = train(&dataset, &config).unwrap();
        let (c2, _) = train(&dataset, &config).unwrap();
        assert_eq!(c1, c2);
    }

    #[test]
    fn empty_dataset_rejected() {
        let dataset = dataset_from(&[]);
        let err = train(&dataset, &NmtConfig::desk()).unwrap_err();
        assert!(matches!(err, crate::EmendError::Config(_)));
    }

    #[test]
    fn checkpoint_roundtrip_preserves_decoding() {
        let dataset = dataset_from(&[("qat", "cat"), ("dqg", "dog"), ("sqn", "sun")]);
        let config = NmtConfig {
            hidden: 16,
            embed: 12,
            steps: 60,
            batch_size: 3,
            dropout: 0.0,
            seed: 2,
            ..NmtConfig::desk()
        };
        let (checkpoint, _) = train(&dataset, &config).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        checkpoint.save(&path).unwrap();
        let reloaded = Seq2SeqCheckpoint::load(&path).unwrap();
        assert_eq!(reloaded, checkpoint);

        let before = Decoder::new(&checkpoint).unwrap();
        let after = Decoder::new(&reloaded).unwrap();
        for word in ["qat", "dqg", "zzz"] {
            assert_eq!(
                before.beam_decode(&tok(word), 10, 10),
                after.beam_decode(&tok(word), 10, 10)
            );
        }
    }

    #[test]
    fn checkpoint_truncation_and_version_errors() {
        let dataset = dataset_from(&[("ab", "ba")]);
        let config = NmtConfig {
            hidden: 8,
            embed: 6,
            steps: 5,
            batch_size: 1,
            dropout: 0.0,
            ..NmtConfig::desk()
        };
        let (checkpoint, _) = train(&dataset, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        checkpoint.save(&path).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.ckpt");
        std::fs::write(&cut, &bytes[..bytes.len() - 7]).unwrap();
        assert!(matches!(
            Seq2SeqCheckpoint::load(&cut).unwrap_err(),
            crate::EmendError::Parse { .. }
        ));

        let mut versioned = bytes.clone();
        versioned[4..8].copy_from_slice(&7u32.to_le_bytes());
        let vpath = dir.path().join("v7.ckpt");
        std::fs::write(&vpath, versioned).unwrap();
        match Seq2SeqCheckpoint::load(&vpath).unwrap_err() {
            crate::EmendError::VersionMismatch { found, expected, .. } => {
                assert_eq!((found, expected), (7, 1));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn periodic_checkpoints_written() {
        let dataset = dataset_from(&[("ab", "ba"), ("ba", "ab")]);
        let dir = tempfile::tempdir().unwrap();
        let config = NmtConfig {
            hidden: 8,
            embed: 6,
            steps: 30,
            batch_size: 2,
            dropout: 0.0,
            checkpoint_every: Some(10),
            checkpoint_dir: Some(dir.path().to_path_buf()),
            ..NmtConfig::desk()
        };
        let (_, _) = train(&dataset, &config).unwrap();
        assert!(dir.path().join("step-000010.ckpt").exists());
        assert!(dir.path().join("step-000020.ckpt").exists());
        let snap = Seq2SeqCheckpoint::load(&dir.path().join("step-000020.ckpt")).unwrap();
        assert_eq!(snap.steps, 20);
    }
}
