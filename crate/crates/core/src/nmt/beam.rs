//! Beam search over the decoder, with length-normalized final scoring.
//!
//! The search prunes on cumulative log-probability but ranks results by
//! log-probability per generated symbol (EOS included), which keeps short
//! outputs from being favored unduly. One lane always follows the greedy
//! continuation, so widening the beam can never return a worse top
//! hypothesis than greedy decoding.

use crate::nmt::lstm::LstmState;
use crate::nmt::net::{attention_keys, decode_step, encode};
use crate::nmt::params::Layout;
use crate::nmt::vocab::{CharVocab, BOS, EOS, PAD, UNK};

/// A decoded candidate. `word` carries no reserved symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    pub word: String,
    /// Cumulative log-probability (EOS included when finished).
    pub log_prob: f64,
    /// Length-normalized log-probability used for ranking.
    pub score: f64,
    /// False when the hypothesis hit the length cap without emitting EOS.
    pub finished: bool,
}

struct Hyp {
    ids: Vec<usize>,
    states: Vec<LstmState>,
    cum: f64,
    next_input: usize,
    greedy: bool,
}

struct Candidate {
    parent: usize,
    token: usize,
    cum: f64,
    greedy: bool,
}

fn generation_allowed(token: usize) -> bool {
    token != BOS && token != PAD && token != UNK
}

/// Maximum decoded length for a source of `src_len` characters.
pub(crate) fn max_decode_len(src_len: usize) -> usize {
    2 * src_len + 5
}

pub(crate) fn beam_decode_impl(
    params: &[f64],
    layout: &Layout,
    vocab: &CharVocab,
    src: &[usize],
    beam_size: usize,
    n_best: usize,
) -> Vec<BeamHypothesis> {
    assert!(beam_size >= 1 && n_best >= 1 && beam_size >= n_best);
    let enc = encode(params, layout, src, None);
    let keys = attention_keys(params, layout, &enc.outputs);
    let max_len = max_decode_len(src.len());

    let mut live = vec![Hyp {
        ids: Vec::new(),
        states: enc.init.clone(),
        cum: 0.0,
        next_input: BOS,
        greedy: true,
    }];
    // (ids without EOS, cumulative log-prob, finished)
    let mut done: Vec<(Vec<usize>, f64, bool)> = Vec::new();

    for _ in 0..max_len {
        if live.is_empty() {
            break;
        }
        let mut stepped: Vec<(Vec<LstmState>, Vec<f64>)> = Vec::with_capacity(live.len());
        for hyp in &live {
            let mut states = hyp.states.clone();
            let (_, log_probs) = decode_step(
                params,
                layout,
                &enc.outputs,
                &keys,
                &mut states,
                hyp.next_input,
                None,
            );
            stepped.push((states, log_probs));
        }

        let mut candidates: Vec<Candidate> = Vec::new();
        for (parent, hyp) in live.iter().enumerate() {
            let log_probs = &stepped[parent].1;
            let argmax = (0..log_probs.len())
                .filter(|&t| generation_allowed(t))
                .reduce(|best, t| if log_probs[t] > log_probs[best] { t } else { best })
                .expect("vocabulary has generatable symbols");
            for (token, &lp) in log_probs.iter().enumerate() {
                if !generation_allowed(token) {
                    continue;
                }
                candidates.push(Candidate {
                    parent,
                    token,
                    cum: hyp.cum + lp,
                    greedy: hyp.greedy && token == argmax,
                });
            }
        }

        // Finished candidates leave the beam.
        let mut expansions: Vec<Candidate> = Vec::new();
        for cand in candidates {
            if cand.token == EOS {
                done.push((live[cand.parent].ids.clone(), cand.cum, true));
            } else {
                expansions.push(cand);
            }
        }
        expansions.sort_by(|a, b| {
            b.cum
                .partial_cmp(&a.cum)
                .expect("log-probabilities are finite")
                .then_with(|| a.parent.cmp(&b.parent))
                .then_with(|| a.token.cmp(&b.token))
        });
        let greedy_pos = expansions.iter().position(|c| c.greedy);
        let mut kept: Vec<Candidate> = Vec::new();
        for (i, cand) in expansions.into_iter().enumerate() {
            if i < beam_size || Some(i) == greedy_pos {
                kept.push(cand);
            }
        }

        live = kept
            .into_iter()
            .map(|cand| {
                let mut ids = live[cand.parent].ids.clone();
                ids.push(cand.token);
                Hyp {
                    ids,
                    states: stepped[cand.parent].0.clone(),
                    cum: cand.cum,
                    next_input: cand.token,
                    greedy: cand.greedy,
                }
            })
            .collect();
    }

    // Hypotheses that never emitted EOS are force-finished so the pool is
    // never empty and always contains the greedy continuation.
    for hyp in live {
        done.push((hyp.ids, hyp.cum, false));
    }

    let mut results: Vec<BeamHypothesis> = done
        .into_iter()
        .map(|(ids, cum, finished)| {
            let length = (ids.len() + usize::from(finished)).max(1);
            BeamHypothesis {
                word: vocab.decode(&ids),
                log_prob: cum,
                score: cum / length as f64,
                finished,
            }
        })
        .collect();
    results.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then_with(|| a.word.cmp(&b.word))
    });
    results.truncate(n_best);
    results
}

/// Greedy decoding: repeatedly take the most probable allowed symbol.
pub(crate) fn greedy_decode_impl(
    params: &[f64],
    layout: &Layout,
    vocab: &CharVocab,
    src: &[usize],
) -> BeamHypothesis {
    let enc = encode(params, layout, src, None);
    let keys = attention_keys(params, layout, &enc.outputs);
    let mut states = enc.init.clone();
    let mut input = BOS;
    let mut ids = Vec::new();
    let mut cum = 0.0;
    let mut finished = false;

    for _ in 0..max_decode_len(src.len()) {
        let (_, log_probs) = decode_step(params, layout, &enc.outputs, &keys, &mut states, input, None);
        let best = (0..log_probs.len())
            .filter(|&t| generation_allowed(t))
            .reduce(|best, t| if log_probs[t] > log_probs[best] { t } else { best })
            .expect("vocabulary has generatable symbols");
        cum += log_probs[best];
        if best == EOS {
            finished = true;
            break;
        }
        ids.push(best);
        input = best;
    }

    let length = (ids.len() + usize::from(finished)).max(1);
    BeamHypothesis {
        word: vocab.decode(&ids),
        log_prob: cum,
        score: cum / length as f64,
        finished,
    }
}

/// Per-step normalization diagnostics of a greedy decode.
#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    /// Sum of the decoder's output distribution at this step.
    pub prob_sum: f64,
    /// Sum of the attention weights at this step.
    pub attention_sum: f64,
}

pub(crate) fn decode_diagnostics_impl(
    params: &[f64],
    layout: &Layout,
    src: &[usize],
) -> Vec<StepDiagnostics> {
    let enc = encode(params, layout, src, None);
    let keys = attention_keys(params, layout, &enc.outputs);
    let mut states = enc.init.clone();
    let mut input = BOS;
    let mut out = Vec::new();

    for _ in 0..max_decode_len(src.len()) {
        let (cache, log_probs) =
            decode_step(params, layout, &enc.outputs, &keys, &mut states, input, None);
        out.push(StepDiagnostics {
            prob_sum: cache.probs.iter().sum(),
            attention_sum: cache.attention.iter().sum(),
        });
        let best = (0..log_probs.len())
            .filter(|&t| generation_allowed(t))
            .reduce(|best, t| if log_probs[t] > log_probs[best] { t } else { best })
            .expect("vocabulary has generatable symbols");
        if best == EOS {
            break;
        }
        input = best;
    }
    out
}
