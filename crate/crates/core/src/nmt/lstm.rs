//! Single LSTM step, forward and backward. Gate order within the 4H
//! pre-activation block is input, forget, candidate, output.

use crate::nmt::linalg::{matvec_acc, matvec_t_acc, outer_acc};
use crate::nmt::params::LstmSlot;

#[derive(Debug, Clone)]
pub(crate) struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> LstmState {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything the backward pass needs about one forward step.
#[derive(Debug, Clone)]
pub(crate) struct LstmStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Post-activation gates: i, f, g, o concatenated (4H).
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Advances the state by one step, returning the cache. `params` is the full
/// flat parameter vector; `slot` addresses this direction's tensors.
pub(crate) fn lstm_step(
    params: &[f64],
    slot: &LstmSlot,
    x: &[f64],
    state: &mut LstmState,
) -> LstmStepCache {
    let hidden = state.h.len();
    let mut pre = params[slot.b.clone()].to_vec();
    matvec_acc(&mut pre, &params[slot.wx.clone()], 4 * hidden, slot.input_dim, x);
    matvec_acc(&mut pre, &params[slot.wh.clone()], 4 * hidden, hidden, &state.h);

    let mut gates = pre;
    let (ifo, rest) = gates.split_at_mut(2 * hidden);
    let (g_block, o_block) = rest.split_at_mut(hidden);
    for v in ifo.iter_mut() {
        *v = sigmoid(*v);
    }
    for v in g_block.iter_mut() {
        *v = v.tanh();
    }
    for v in o_block.iter_mut() {
        *v = sigmoid(*v);
    }

    let cache_h_prev = state.h.clone();
    let cache_c_prev = state.c.clone();
    for j in 0..hidden {
        let i = gates[j];
        let f = gates[hidden + j];
        let g = gates[2 * hidden + j];
        let o = gates[3 * hidden + j];
        let c = f * cache_c_prev[j] + i * g;
        state.c[j] = c;
        state.h[j] = o * c.tanh();
    }

    LstmStepCache {
        x: x.to_vec(),
        h_prev: cache_h_prev,
        c_prev: cache_c_prev,
        gates,
        c: state.c.clone(),
    }
}

/// Backward through one step.
///
/// `dh`/`dc` carry the incoming gradients on this step's outputs (dc is the
/// through-time carry, updated in place to become the previous step's carry;
/// dh_prev_out likewise receives the gradient for the previous hidden state).
/// Weight gradients accumulate into `grad` (same layout as `params`), input
/// gradients into `dx_out`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn lstm_step_backward(
    params: &[f64],
    grad: &mut [f64],
    slot: &LstmSlot,
    cache: &LstmStepCache,
    dh: &[f64],
    dc: &mut Vec<f64>,
    dx_out: &mut [f64],
    dh_prev_out: &mut [f64],
) {
    let hidden = dh.len();
    let mut da = vec![0.0; 4 * hidden];
    for j in 0..hidden {
        let i = cache.gates[j];
        let f = cache.gates[hidden + j];
        let g = cache.gates[2 * hidden + j];
        let o = cache.gates[3 * hidden + j];
        let tc = cache.c[j].tanh();

        let dho = dh[j];
        let dcj = dc[j] + dho * o * (1.0 - tc * tc);

        da[j] = dcj * g * i * (1.0 - i);
        da[hidden + j] = dcj * cache.c_prev[j] * f * (1.0 - f);
        da[2 * hidden + j] = dcj * i * (1.0 - g * g);
        da[3 * hidden + j] = dho * tc * o * (1.0 - o);

        dc[j] = dcj * f;
    }

    for (gb, a) in grad[slot.b.clone()].iter_mut().zip(&da) {
        *gb += a;
    }
    outer_acc(&mut grad[slot.wx.clone()], &da, &cache.x);
    outer_acc(&mut grad[slot.wh.clone()], &da, &cache.h_prev);
    matvec_t_acc(dx_out, &params[slot.wx.clone()], 4 * hidden, slot.input_dim, &da);
    matvec_t_acc(dh_prev_out, &params[slot.wh.clone()], 4 * hidden, hidden, &da);
}
