//! Forward and backward passes of the corrector network.
//!
//! Architecture: character embeddings feed a stacked bidirectional LSTM
//! encoder whose per-direction outputs and final states are summed, keeping
//! every hidden dimension equal. The stacked LSTM decoder starts from the
//! summed encoder final states and attends over the encoder outputs with the
//! general score h_t^T W_a h_s; the attentional state tanh(W_c [ctx; h_t])
//! is projected to character logits.
//!
//! The backward pass is hand-derived over a per-example tape and verified
//! against central finite differences in the test suite.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::nmt::linalg::{axpy, dot, log_softmax_in_place, matvec_acc, matvec_t_acc, outer_acc, softmax_in_place};
use crate::nmt::lstm::{lstm_step, lstm_step_backward, LstmState, LstmStepCache};
use crate::nmt::params::Layout;

/// Luong general attention weights: softmax over s of h_t^T W_a h_s.
/// `w_att` is H x H row-major; every encoder state must have length H.
pub fn attention_weights(
    decoder_state: &[f64],
    encoder_states: &[Vec<f64>],
    w_att: &[f64],
) -> Vec<f64> {
    let hidden = decoder_state.len();
    assert_eq!(w_att.len(), hidden * hidden, "W_a must be H x H");
    let mut scores: Vec<f64> = encoder_states
        .iter()
        .map(|m| {
            let mut key = vec![0.0; hidden];
            matvec_acc(&mut key, w_att, hidden, hidden, m);
            dot(decoder_state, &key)
        })
        .collect();
    softmax_in_place(&mut scores);
    scores
}

fn sample_mask(rng: &mut ChaCha8Rng, p: f64, len: usize) -> Vec<f64> {
    let keep_scale = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep_scale })
        .collect()
}

pub(crate) struct EncoderTape {
    /// Per layer: forward-direction and backward-direction step caches,
    /// both indexed by source position.
    layer_caches: Vec<(Vec<LstmStepCache>, Vec<LstmStepCache>)>,
    /// Dropout masks applied to layer l's summed output (length layers-1).
    masks: Vec<Vec<Vec<f64>>>,
    /// Top-layer summed outputs per position.
    pub outputs: Vec<Vec<f64>>,
    /// Decoder initial state per layer: summed final states.
    pub init: Vec<LstmState>,
}

/// Runs the encoder. With `dropout` set, inter-layer dropout masks are
/// sampled and recorded for the backward pass.
pub(crate) fn encode(
    params: &[f64],
    layout: &Layout,
    src: &[usize],
    mut dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> EncoderTape {
    let hyper = layout.hyper;
    let seq = src.len();
    let mut inputs: Vec<Vec<f64>> = src
        .iter()
        .map(|&id| params[layout.embedding_row(&layout.emb_src, id)].to_vec())
        .collect();

    let mut layer_caches = Vec::with_capacity(hyper.layers);
    let mut masks = Vec::new();
    let mut init = Vec::with_capacity(hyper.layers);
    let mut outputs = Vec::new();

    for (layer, (fwd_slot, bwd_slot)) in layout.enc.iter().enumerate() {
        let mut fwd_caches = Vec::with_capacity(seq);
        let mut fwd_state = LstmState::zeros(hyper.hidden);
        let mut fwd_h: Vec<Vec<f64>> = Vec::with_capacity(seq);
        for t in 0..seq {
            fwd_caches.push(lstm_step(params, fwd_slot, &inputs[t], &mut fwd_state));
            fwd_h.push(fwd_state.h.clone());
        }

        let mut bwd_caches: Vec<Option<LstmStepCache>> = (0..seq).map(|_| None).collect();
        let mut bwd_state = LstmState::zeros(hyper.hidden);
        let mut bwd_h: Vec<Vec<f64>> = vec![Vec::new(); seq];
        for t in (0..seq).rev() {
            bwd_caches[t] = Some(lstm_step(params, bwd_slot, &inputs[t], &mut bwd_state));
            bwd_h[t] = bwd_state.h.clone();
        }
        let bwd_caches: Vec<LstmStepCache> =
            bwd_caches.into_iter().map(|c| c.expect("filled")).collect();

        let summed: Vec<Vec<f64>> = (0..seq)
            .map(|t| fwd_h[t].iter().zip(&bwd_h[t]).map(|(a, b)| a + b).collect())
            .collect();
        init.push(LstmState {
            h: fwd_h[seq - 1]
                .iter()
                .zip(&bwd_h[0])
                .map(|(a, b)| a + b)
                .collect(),
            c: fwd_state.c.iter().zip(&bwd_state.c).map(|(a, b)| a + b).collect(),
        });
        layer_caches.push((fwd_caches, bwd_caches));

        if layer + 1 < hyper.layers {
            if let Some((p, ref mut rng)) = dropout {
                let layer_masks: Vec<Vec<f64>> = (0..seq)
                    .map(|_| sample_mask(rng, p, hyper.hidden))
                    .collect();
                inputs = summed
                    .iter()
                    .zip(&layer_masks)
                    .map(|(o, m)| o.iter().zip(m).map(|(v, k)| v * k).collect())
                    .collect();
                masks.push(layer_masks);
            } else {
                inputs = summed.clone();
            }
        } else {
            outputs = summed;
        }
    }

    EncoderTape {
        layer_caches,
        masks,
        outputs,
        init,
    }
}

/// Attention keys W_a . m_s for every encoder output.
pub(crate) fn attention_keys(params: &[f64], layout: &Layout, outputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let h = layout.hyper.hidden;
    outputs
        .iter()
        .map(|m| {
            let mut key = vec![0.0; h];
            matvec_acc(&mut key, &params[layout.w_att.clone()], h, h, m);
            key
        })
        .collect()
}

pub(crate) struct DecStepCache {
    /// Per-layer LSTM caches, bottom to top.
    l_caches: Vec<LstmStepCache>,
    /// Dropout masks between decoder layers (layers-1 entries when training).
    masks: Vec<Vec<f64>>,
    pub attention: Vec<f64>,
    ctx: Vec<f64>,
    comb: Vec<f64>,
    pub probs: Vec<f64>,
    h_top: Vec<f64>,
}

/// Advances the decoder by one input symbol. Returns the step cache and the
/// log-probability vector over the character vocabulary.
pub(crate) fn decode_step(
    params: &[f64],
    layout: &Layout,
    enc_outputs: &[Vec<f64>],
    keys: &[Vec<f64>],
    states: &mut [LstmState],
    input_id: usize,
    mut dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> (DecStepCache, Vec<f64>) {
    let hyper = layout.hyper;
    let h = hyper.hidden;
    let mut x = params[layout.embedding_row(&layout.emb_tgt, input_id)].to_vec();

    let mut l_caches = Vec::with_capacity(hyper.layers);
    let mut masks = Vec::new();
    for (layer, slot) in layout.dec.iter().enumerate() {
        l_caches.push(lstm_step(params, slot, &x, &mut states[layer]));
        if layer + 1 < hyper.layers {
            if let Some((p, ref mut rng)) = dropout {
                let mask = sample_mask(rng, p, h);
                x = states[layer].h.iter().zip(&mask).map(|(v, k)| v * k).collect();
                masks.push(mask);
            } else {
                x = states[layer].h.clone();
            }
        }
    }
    let h_top = states[hyper.layers - 1].h.clone();

    let mut attention: Vec<f64> = keys.iter().map(|k| dot(&h_top, k)).collect();
    softmax_in_place(&mut attention);
    let mut ctx = vec![0.0; h];
    for (a, m) in attention.iter().zip(enc_outputs) {
        axpy(&mut ctx, *a, m);
    }

    let mut z = Vec::with_capacity(2 * h);
    z.extend_from_slice(&ctx);
    z.extend_from_slice(&h_top);
    let mut comb = vec![0.0; h];
    matvec_acc(&mut comb, &params[layout.w_comb.clone()], h, 2 * h, &z);
    for v in &mut comb {
        *v = v.tanh();
    }

    let mut logits = params[layout.b_out.clone()].to_vec();
    matvec_acc(&mut logits, &params[layout.w_out.clone()], hyper.vocab, h, &comb);
    let mut log_probs = logits;
    log_softmax_in_place(&mut log_probs);
    let probs: Vec<f64> = log_probs.iter().map(|lp| lp.exp()).collect();

    (
        DecStepCache {
            l_caches,
            masks,
            attention,
            ctx,
            comb,
            probs,
            h_top,
        },
        log_probs,
    )
}

pub(crate) struct ExampleTape {
    enc: EncoderTape,
    keys: Vec<Vec<f64>>,
    dec_steps: Vec<DecStepCache>,
}

/// Teacher-forced forward pass. `tgt_out` must end with EOS; the decoder
/// inputs are BOS followed by `tgt_out` without its last symbol. Returns the
/// summed cross-entropy over target symbols.
pub(crate) fn example_forward(
    params: &[f64],
    layout: &Layout,
    src: &[usize],
    tgt_out: &[usize],
    mut dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> (f64, ExampleTape) {
    debug_assert!(!src.is_empty() && !tgt_out.is_empty());
    let enc = encode(
        params,
        layout,
        src,
        dropout.as_mut().map(|(p, rng)| (*p, &mut **rng)),
    );
    let keys = attention_keys(params, layout, &enc.outputs);

    let mut states = enc.init.clone();
    let mut dec_steps = Vec::with_capacity(tgt_out.len());
    let mut loss = 0.0;
    let mut input = super::vocab::BOS;
    for &target in tgt_out {
        let (cache, log_probs) = decode_step(
            params,
            layout,
            &enc.outputs,
            &keys,
            &mut states,
            input,
            dropout.as_mut().map(|(p, rng)| (*p, &mut **rng)),
        );
        loss -= log_probs[target];
        dec_steps.push(cache);
        input = target;
    }

    (
        loss,
        ExampleTape {
            enc,
            keys,
            dec_steps,
        },
    )
}

/// Forward pass without a gradient tape; used by finite-difference checks.
pub(crate) fn example_loss(params: &[f64], layout: &Layout, src: &[usize], tgt_out: &[usize]) -> f64 {
    example_forward(params, layout, src, tgt_out, None).0
}

/// Backward pass matching `example_forward`. Gradients of the summed
/// cross-entropy accumulate into `grad` (same layout as `params`).
pub(crate) fn example_backward(
    params: &[f64],
    layout: &Layout,
    src: &[usize],
    tgt_out: &[usize],
    tape: &ExampleTape,
    grad: &mut [f64],
) {
    let hyper = layout.hyper;
    let h = hyper.hidden;
    let seq = src.len();
    let layers = hyper.layers;

    let mut d_outputs: Vec<Vec<f64>> = vec![vec![0.0; h]; seq];
    let mut carry_dh: Vec<Vec<f64>> = vec![vec![0.0; h]; layers];
    let mut carry_dc: Vec<Vec<f64>> = vec![vec![0.0; h]; layers];

    // Decoder, last step first.
    for (t, &target) in tgt_out.iter().enumerate().rev() {
        let cache = &tape.dec_steps[t];

        // Cross-entropy through the softmax.
        let mut dlogits = cache.probs.clone();
        dlogits[target] -= 1.0;

        outer_acc(&mut grad[layout.w_out.clone()], &dlogits, &cache.comb);
        for (g, d) in grad[layout.b_out.clone()].iter_mut().zip(&dlogits) {
            *g += d;
        }
        let mut dcomb = vec![0.0; h];
        matvec_t_acc(&mut dcomb, &params[layout.w_out.clone()], hyper.vocab, h, &dlogits);
        for (d, c) in dcomb.iter_mut().zip(&cache.comb) {
            *d *= 1.0 - c * c;
        }

        let mut z = Vec::with_capacity(2 * h);
        z.extend_from_slice(&cache.ctx);
        z.extend_from_slice(&cache.h_top);
        outer_acc(&mut grad[layout.w_comb.clone()], &dcomb, &z);
        let mut dz = vec![0.0; 2 * h];
        matvec_t_acc(&mut dz, &params[layout.w_comb.clone()], h, 2 * h, &dcomb);
        let (dctx, dh_comb) = dz.split_at(h);

        // Context and attention softmax.
        let attn = &cache.attention;
        let d_attn: Vec<f64> = tape.enc.outputs.iter().map(|m| dot(dctx, m)).collect();
        let expectation: f64 = attn.iter().zip(&d_attn).map(|(a, d)| a * d).sum();
        let d_scores: Vec<f64> = attn
            .iter()
            .zip(&d_attn)
            .map(|(a, d)| a * (d - expectation))
            .collect();
        for (s, d_out) in d_outputs.iter_mut().enumerate() {
            axpy(d_out, attn[s], dctx);
        }

        // Scores u_s = h_top . (W_a m_s).
        let mut dh_top = dh_comb.to_vec();
        for (s, &ds) in d_scores.iter().enumerate() {
            axpy(&mut dh_top, ds, &tape.keys[s]);
        }
        let mut weighted_m = vec![0.0; h];
        for (s, &ds) in d_scores.iter().enumerate() {
            axpy(&mut weighted_m, ds, &tape.enc.outputs[s]);
        }
        outer_acc(&mut grad[layout.w_att.clone()], &cache.h_top, &weighted_m);
        let mut wta_h = vec![0.0; h];
        matvec_t_acc(&mut wta_h, &params[layout.w_att.clone()], h, h, &cache.h_top);
        for (s, d_out) in d_outputs.iter_mut().enumerate() {
            axpy(d_out, d_scores[s], &wta_h);
        }

        // Decoder LSTM stack, top to bottom.
        let input_id = if t == 0 { super::vocab::BOS } else { tgt_out[t - 1] };
        let mut dh_from_above = dh_top;
        for layer in (0..layers).rev() {
            let slot = &layout.dec[layer];
            let mut dh_total = std::mem::take(&mut dh_from_above);
            for (d, c) in dh_total.iter_mut().zip(&carry_dh[layer]) {
                *d += c;
            }
            let mut dx = vec![0.0; slot.input_dim];
            let mut dh_prev = vec![0.0; h];
            lstm_step_backward(
                params,
                grad,
                slot,
                &cache.l_caches[layer],
                &dh_total,
                &mut carry_dc[layer],
                &mut dx,
                &mut dh_prev,
            );
            carry_dh[layer] = dh_prev;
            if layer > 0 {
                if let Some(mask) = cache.masks.get(layer - 1) {
                    for (d, m) in dx.iter_mut().zip(mask) {
                        *d *= m;
                    }
                }
                dh_from_above = dx;
            } else {
                let row = layout.embedding_row(&layout.emb_tgt, input_id);
                for (g, d) in grad[row].iter_mut().zip(&dx) {
                    *g += d;
                }
            }
        }
    }

    // Gradients on the decoder initial states flow to the encoder's summed
    // final states.
    let d_init_h = carry_dh;
    let d_init_c = carry_dc;

    // Encoder, top layer first.
    let mut d_layer_out = d_outputs;
    for layer in (0..layers).rev() {
        let (fwd_slot, bwd_slot) = &layout.enc[layer];
        let (fwd_caches, bwd_caches) = &tape.enc.layer_caches[layer];
        let mut d_inputs: Vec<Vec<f64>> = vec![vec![0.0; fwd_slot.input_dim]; seq];

        // Forward direction: final step is position seq-1.
        let mut dh_carry = d_init_h[layer].clone();
        let mut dc_carry = d_init_c[layer].clone();
        for t in (0..seq).rev() {
            let mut dh_total = d_layer_out[t].clone();
            for (d, c) in dh_total.iter_mut().zip(&dh_carry) {
                *d += c;
            }
            let mut dh_prev = vec![0.0; h];
            lstm_step_backward(
                params,
                grad,
                fwd_slot,
                &fwd_caches[t],
                &dh_total,
                &mut dc_carry,
                &mut d_inputs[t],
                &mut dh_prev,
            );
            dh_carry = dh_prev;
        }

        // Backward direction: processed right-to-left, so its final step is
        // position 0 and BPTT walks positions in ascending order.
        let mut dh_carry = d_init_h[layer].clone();
        let mut dc_carry = d_init_c[layer].clone();
        for (t, d_out) in d_layer_out.iter().enumerate() {
            let mut dh_total = d_out.clone();
            for (d, c) in dh_total.iter_mut().zip(&dh_carry) {
                *d += c;
            }
            let mut dh_prev = vec![0.0; h];
            lstm_step_backward(
                params,
                grad,
                bwd_slot,
                &bwd_caches[t],
                &dh_total,
                &mut dc_carry,
                &mut d_inputs[t],
                &mut dh_prev,
            );
            dh_carry = dh_prev;
        }

        if layer > 0 {
            if let Some(layer_masks) = tape.enc.masks.get(layer - 1) {
                for (d_in, mask) in d_inputs.iter_mut().zip(layer_masks) {
                    for (d, m) in d_in.iter_mut().zip(mask) {
                        *d *= m;
                    }
                }
            }
            d_layer_out = d_inputs;
        } else {
            for (t, &id) in src.iter().enumerate() {
                let row = layout.embedding_row(&layout.emb_src, id);
                for (g, d) in grad[row].iter_mut().zip(&d_inputs[t]) {
                    *g += d;
                }
            }
        }
    }
}

/// Summed cross-entropy loss and its gradient for one example.
pub(crate) fn example_loss_grad(
    params: &[f64],
    layout: &Layout,
    src: &[usize],
    tgt_out: &[usize],
    grad: &mut [f64],
    dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> f64 {
    let (loss, tape) = example_forward(params, layout, src, tgt_out, dropout);
    example_backward(params, layout, src, tgt_out, &tape, grad);
    loss
}
