//! Parameter layout for the corrector network.
//!
//! Every learned tensor lives in one flat `Vec<f64>` addressed through
//! `Layout` ranges. A flat vector keeps SGD, gradient clipping and
//! finite-difference checks trivial, and fixes the tensor order the
//! checkpoint format serializes.

use std::ops::Range;

use rand::Rng;

use crate::error::{EmendError, Result};
use crate::nmt::vocab::CharVocab;

/// Shape-defining hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hyper {
    /// Character vocabulary size (reserved symbols included).
    pub vocab: usize,
    /// Character embedding dimension.
    pub embed: usize,
    /// Recurrent hidden size.
    pub hidden: usize,
    /// Stacked layers in encoder and decoder.
    pub layers: usize,
}

/// Offsets of one LSTM direction's tensors within the flat vector.
#[derive(Debug, Clone)]
pub struct LstmSlot {
    /// Input weights, 4H x input_dim (gate-major rows: i, f, g, o).
    pub wx: Range<usize>,
    /// Recurrent weights, 4H x H.
    pub wh: Range<usize>,
    /// Bias, 4H.
    pub b: Range<usize>,
    pub input_dim: usize,
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub hyper: Hyper,
    /// Source and target character embeddings, V x E each.
    pub emb_src: Range<usize>,
    pub emb_tgt: Range<usize>,
    /// Encoder layers: (forward, backward) per layer.
    pub enc: Vec<(LstmSlot, LstmSlot)>,
    /// Decoder layers.
    pub dec: Vec<LstmSlot>,
    /// Attention matrix for the general score h_t^T W_a h_s, H x H.
    pub w_att: Range<usize>,
    /// Combines [context; decoder state] into the attentional state, H x 2H.
    pub w_comb: Range<usize>,
    /// Output projection, V x H, plus bias V.
    pub w_out: Range<usize>,
    pub b_out: Range<usize>,
    pub total: usize,
}

impl Layout {
    pub fn new(hyper: Hyper) -> Result<Layout> {
        if hyper.vocab < 5 || hyper.embed == 0 || hyper.hidden == 0 || hyper.layers == 0 {
            return Err(EmendError::Config(
                "network dimensions must be positive (vocab needs at least one real symbol)"
                    .into(),
            ));
        }
        let (v, e, h, l) = (hyper.vocab, hyper.embed, hyper.hidden, hyper.layers);
        let mut cursor = 0usize;
        let mut take = |len: usize| {
            let range = cursor..cursor + len;
            cursor += len;
            range
        };

        let emb_src = take(v * e);
        let emb_tgt = take(v * e);

        let mut lstm = |input_dim: usize| LstmSlot {
            wx: take(4 * h * input_dim),
            wh: take(4 * h * h),
            b: take(4 * h),
            input_dim,
        };

        let mut enc = Vec::with_capacity(l);
        for layer in 0..l {
            let input_dim = if layer == 0 { e } else { h };
            let fwd = lstm(input_dim);
            let bwd = lstm(input_dim);
            enc.push((fwd, bwd));
        }
        let mut dec = Vec::with_capacity(l);
        for layer in 0..l {
            let input_dim = if layer == 0 { e } else { h };
            dec.push(lstm(input_dim));
        }

        let w_att = take(h * h);
        let w_comb = take(h * 2 * h);
        let w_out = take(v * h);
        let b_out = take(v);

        Ok(Layout {
            hyper,
            emb_src,
            emb_tgt,
            enc,
            dec,
            w_att,
            w_comb,
            w_out,
            b_out,
            total: cursor,
        })
    }

    pub fn embedding_row(&self, table: &Range<usize>, id: usize) -> Range<usize> {
        let start = table.start + id * self.hyper.embed;
        start..start + self.hyper.embed
    }

    /// Uniform(-0.1, 0.1) initialization of the whole vector.
    pub fn init_params<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.total).map(|_| rng.random_range(-0.1..0.1)).collect()
    }
}

/// All learned parameters plus the hyperparameters and character inventory,
/// as persisted on disk. Parameter values are f32, so a checkpoint decoded
/// after a save/load roundtrip behaves bit-for-bit like the original.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqCheckpoint {
    pub char_vocab: CharVocab,
    pub embed: usize,
    pub hidden: usize,
    pub layers: usize,
    pub params: Vec<f32>,
    pub steps: u64,
    pub seed: u64,
}

impl Seq2SeqCheckpoint {
    pub fn hyper(&self) -> Hyper {
        Hyper {
            vocab: self.char_vocab.size(),
            embed: self.embed,
            hidden: self.hidden,
            layers: self.layers,
        }
    }

    pub fn layout(&self) -> Result<Layout> {
        let layout = Layout::new(self.hyper())?;
        if layout.total != self.params.len() {
            return Err(EmendError::Config(format!(
                "checkpoint has {} parameters but the declared shape needs {}",
                self.params.len(),
                layout.total
            )));
        }
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        self.layout()?;
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(EmendError::Config(
                "checkpoint contains non-finite parameters".into(),
            ));
        }
        Ok(())
    }

    /// Builds a checkpoint by rounding trained f64 parameters to f32.
    pub fn from_params(
        char_vocab: CharVocab,
        hyper: Hyper,
        params: &[f64],
        steps: u64,
        seed: u64,
    ) -> Seq2SeqCheckpoint {
        Seq2SeqCheckpoint {
            char_vocab,
            embed: hyper.embed,
            hidden: hyper.hidden,
            layers: hyper.layers,
            params: params.iter().map(|&p| p as f32).collect(),
            steps,
            seed,
        }
    }

    /// The f64 working copy used by decoding and further analysis.
    pub fn params_f64(&self) -> Vec<f64> {
        self.params.iter().map(|&p| p as f64).collect()
    }
}
