//! Desk-scale translation models: a recurrent encoder-decoder with global
//! attention and a Transformer encoder-decoder, both differentiated by the
//! tape in [`tensor`].

pub mod attention;
pub mod checkpoint;
pub mod nmt;
pub mod tensor;
pub mod train;
pub mod transformer;

use indexmap::IndexMap;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use tensor::{Tape, Var};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sequence length {len} exceeds max_len {max_len}")]
    LengthExceeded { len: usize, max_len: usize },
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("vocabulary hash mismatch: checkpoint was trained on a different vocabulary")]
    VocabMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Nmt,
    Transformer,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Nmt => "nmt",
            ModelKind::Transformer => "transformer",
        }
    }

    pub fn from_label(s: &str) -> Option<ModelKind> {
        match s {
            "nmt" => Some(ModelKind::Nmt),
            "transformer" => Some(ModelKind::Transformer),
            _ => None,
        }
    }
}

/// Score function for the recurrent model's global attention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreFn {
    /// score(h_t, h_s) = h_t . h_s
    #[default]
    Dot,
    /// score(h_t, h_s) = h_t W_a h_s
    General,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub kind: ModelKind,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub max_len: usize,
    pub dropout: f64,
    pub score_fn: ScoreFn,
    /// Sinusoidal positions on the Transformer embeddings; disabled only by
    /// the permutation-equivariance probes.
    pub positional: bool,
}

impl Hyper {
    /// Desk-scale defaults.
    pub fn new(kind: ModelKind, src_vocab: usize, tgt_vocab: usize) -> Hyper {
        Hyper {
            kind,
            d_model: 64,
            n_heads: 2,
            n_layers: 2,
            d_ff: 128,
            src_vocab,
            tgt_vocab,
            max_len: 512,
            dropout: 0.0,
            score_fn: ScoreFn::Dot,
            positional: true,
        }
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads
    }
}

/// Named tensor collection for either model.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub hyper: Hyper,
    pub tensors: IndexMap<String, Array2<f64>>,
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

impl ModelParams {
    pub fn init(hyper: Hyper, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = IndexMap::new();
        let d = hyper.d_model;
        let put = |t: &mut IndexMap<String, Array2<f64>>,
                       rng: &mut ChaCha8Rng,
                       name: String,
                       rows: usize,
                       cols: usize| {
            t.insert(name, xavier(rng, rows, cols));
        };

        put(&mut tensors, &mut rng, "src_emb".into(), hyper.src_vocab, d);
        put(&mut tensors, &mut rng, "tgt_emb".into(), hyper.tgt_vocab, d);

        match hyper.kind {
            ModelKind::Nmt => {
                for gate in ["z", "r", "n"] {
                    put(&mut tensors, &mut rng, format!("enc.w{gate}"), d, d);
                    put(&mut tensors, &mut rng, format!("enc.u{gate}"), d, d);
                    tensors.insert(format!("enc.b{gate}"), Array2::zeros((1, d)));
                    // decoder input = [embedding ; input-fed attention vector]
                    put(&mut tensors, &mut rng, format!("dec.w{gate}"), 2 * d, d);
                    put(&mut tensors, &mut rng, format!("dec.u{gate}"), d, d);
                    tensors.insert(format!("dec.b{gate}"), Array2::zeros((1, d)));
                }
                put(&mut tensors, &mut rng, "att.wc".into(), 2 * d, d);
                if hyper.score_fn == ScoreFn::General {
                    put(&mut tensors, &mut rng, "att.wa".into(), d, d);
                }
            }
            ModelKind::Transformer => {
                let dh = hyper.d_head();
                let attn_block = |t: &mut IndexMap<String, Array2<f64>>,
                                      rng: &mut ChaCha8Rng,
                                      prefix: &str| {
                    for h in 0..hyper.n_heads {
                        t.insert(format!("{prefix}.h{h}.wq"), xavier(rng, d, dh));
                        t.insert(format!("{prefix}.h{h}.wk"), xavier(rng, d, dh));
                        t.insert(format!("{prefix}.h{h}.wv"), xavier(rng, d, dh));
                    }
                    t.insert(format!("{prefix}.wo"), xavier(rng, hyper.n_heads * dh, d));
                };
                let ff_ln = |t: &mut IndexMap<String, Array2<f64>>,
                                 rng: &mut ChaCha8Rng,
                                 prefix: &str,
                                 ln_names: &[&str]| {
                    t.insert(format!("{prefix}.ff.w1"), xavier(rng, d, hyper.d_ff));
                    t.insert(format!("{prefix}.ff.b1"), Array2::zeros((1, hyper.d_ff)));
                    t.insert(format!("{prefix}.ff.w2"), xavier(rng, hyper.d_ff, d));
                    t.insert(format!("{prefix}.ff.b2"), Array2::zeros((1, d)));
                    for ln in ln_names {
                        t.insert(format!("{prefix}.{ln}.g"), Array2::ones((1, d)));
                        t.insert(format!("{prefix}.{ln}.b"), Array2::zeros((1, d)));
                    }
                };
                for i in 0..hyper.n_layers {
                    attn_block(&mut tensors, &mut rng, &format!("enc.l{i}.attn"));
                    ff_ln(&mut tensors, &mut rng, &format!("enc.l{i}"), &["ln1", "ln2"]);
                }
                for i in 0..hyper.n_layers {
                    attn_block(&mut tensors, &mut rng, &format!("dec.l{i}.attn"));
                    attn_block(&mut tensors, &mut rng, &format!("dec.l{i}.cross"));
                    ff_ln(&mut tensors, &mut rng, &format!("dec.l{i}"), &["ln1", "ln2", "ln3"]);
                }
            }
        }

        put(&mut tensors, &mut rng, "out.w".into(), d, hyper.tgt_vocab);
        tensors.insert("out.b".into(), Array2::zeros((1, hyper.tgt_vocab)));
        ModelParams { hyper, tensors }
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(|t| t.len()).sum()
    }
}

/// Model parameters bound to a tape as leaf nodes, so one backward pass
/// yields a gradient per named tensor.
pub struct BoundParams {
    pub hyper: Hyper,
    pub vars: IndexMap<String, Var>,
    dropout_rng: Option<std::cell::RefCell<ChaCha8Rng>>,
}

impl BoundParams {
    pub fn bind(tape: &mut Tape, params: &ModelParams) -> BoundParams {
        let vars = params
            .tensors
            .iter()
            .map(|(name, tensor)| (name.clone(), tape.leaf(tensor.clone())))
            .collect();
        BoundParams { hyper: params.hyper, vars, dropout_rng: None }
    }

    /// Bind for a training step: activates dropout when the rate is nonzero.
    pub fn bind_training(tape: &mut Tape, params: &ModelParams, seed: u64) -> BoundParams {
        let mut bound = Self::bind(tape, params);
        if params.hyper.dropout > 0.0 {
            bound.dropout_rng = Some(std::cell::RefCell::new(ChaCha8Rng::seed_from_u64(seed)));
        }
        bound
    }

    pub fn get(&self, name: &str) -> Var {
        *self
            .vars
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter `{name}`"))
    }

    /// Inverted dropout on `x`; identity outside training mode.
    pub(crate) fn apply_dropout(&self, tape: &mut Tape, x: Var) -> Var {
        let Some(rng) = &self.dropout_rng else { return x };
        let rate = self.hyper.dropout;
        let keep = 1.0 - rate;
        let (rows, cols) = tape.shape(x);
        let mut rng = rng.borrow_mut();
        let mask = Array2::from_shape_fn((rows, cols), |_| {
            if rng.gen_bool(keep) {
                1.0 / keep
            } else {
                0.0
            }
        });
        tape.mul_const(x, mask)
    }
}

/// Dispatch to the configured architecture. `tgt_in` is the teacher-forced
/// decoder input (BOS-prefixed); returns per-position logits over the target
/// vocabulary, shape (tgt_in.len(), tgt_vocab).
pub fn forward(
    tape: &mut Tape,
    bound: &BoundParams,
    src_ids: &[u32],
    tgt_in_ids: &[u32],
) -> Result<Var, NeuralError> {
    let max = bound.hyper.max_len;
    for (what, len) in [("source", src_ids.len()), ("target", tgt_in_ids.len())] {
        if len > max {
            return Err(NeuralError::LengthExceeded { len, max_len: max });
        }
        if len == 0 {
            return Err(NeuralError::ShapeMismatch(format!("empty {what} sequence")));
        }
    }
    match bound.hyper.kind {
        ModelKind::Nmt => nmt::forward(tape, bound, src_ids, tgt_in_ids),
        ModelKind::Transformer => transformer::forward(tape, bound, src_ids, tgt_in_ids),
    }
}
