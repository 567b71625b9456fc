//! Recurrent encoder-decoder with global attention and input feeding.
//!
//! Single-layer gated recurrent cells on both sides. Each decoder step runs
//! one global-attention pass over all encoder states; the resulting
//! attention vector is both the output projection input and part of the
//! next step's input (input feeding).

use ndarray::Array2;

use super::attention::global_attention_step;
use super::tensor::{Tape, Var};
use super::{BoundParams, NeuralError, ScoreFn};
use crate::tokenize::PAD_ID;

/// One gated recurrent cell step: input x (1, d_in), hidden h (1, d).
fn gru_step(tape: &mut Tape, bound: &BoundParams, prefix: &str, x: Var, h: Var) -> Var {
    let gate = |tape: &mut Tape, name: char, activation_tanh: bool, h_in: Var| {
        let w = bound.get(&format!("{prefix}.w{name}"));
        let u = bound.get(&format!("{prefix}.u{name}"));
        let b = bound.get(&format!("{prefix}.b{name}"));
        let xw = tape.matmul(x, w);
        let hu = tape.matmul(h_in, u);
        let sum = tape.add(xw, hu);
        let pre = tape.add_row(sum, b);
        if activation_tanh {
            tape.tanh(pre)
        } else {
            tape.sigmoid(pre)
        }
    };
    let z = gate(tape, 'z', false, h);
    let r = gate(tape, 'r', false, h);
    let rh = tape.mul(r, h);
    let n = gate(tape, 'n', true, rh);
    // h' = (1 - z) * h + z * n
    let zn = tape.mul(z, n);
    let neg_z = tape.scale(z, -1.0);
    let one_minus_z = tape.add_scalar(neg_z, 1.0);
    let keep = tape.mul(one_minus_z, h);
    tape.add(keep, zn)
}

pub fn forward(
    tape: &mut Tape,
    bound: &BoundParams,
    src_ids: &[u32],
    tgt_in_ids: &[u32],
) -> Result<Var, NeuralError> {
    let d = bound.hyper.d_model;
    let src_emb = bound.get("src_emb");
    let tgt_emb = bound.get("tgt_emb");

    // Encoder: unidirectional recurrence over the source.
    let src_rows: Vec<usize> = src_ids.iter().map(|&i| i as usize).collect();
    let src_embedded = tape.select_rows(src_emb, &src_rows);
    let src_embedded = bound.apply_dropout(tape, src_embedded);
    let mut h = tape.zeros(1, d);
    let mut states = Vec::with_capacity(src_ids.len());
    for s in 0..src_ids.len() {
        let x = tape.select_rows(src_embedded, &[s]);
        h = gru_step(tape, bound, "enc", x, h);
        states.push(h);
    }
    let h_s = tape.concat_rows(&states);

    // Decoder starts from the last non-pad encoder state, so trailing
    // padding cannot shift the loss.
    let last_real = src_ids
        .iter()
        .rposition(|&id| id != PAD_ID)
        .unwrap_or(src_ids.len() - 1);
    let mut h_dec = states[last_real];

    let src_mask = src_attention_mask(src_ids);
    let w_c = bound.get("att.wc");
    let w_a = match bound.hyper.score_fn {
        ScoreFn::Dot => None,
        ScoreFn::General => Some(bound.get("att.wa")),
    };
    let out_w = bound.get("out.w");
    let out_b = bound.get("out.b");

    let mut attn_feed = tape.zeros(1, d);
    let mut logit_rows = Vec::with_capacity(tgt_in_ids.len());
    for &tgt in tgt_in_ids {
        let emb = tape.select_rows(tgt_emb, &[tgt as usize]);
        let emb = bound.apply_dropout(tape, emb);
        let x = tape.concat_cols(&[emb, attn_feed]);
        h_dec = gru_step(tape, bound, "dec", x, h_dec);
        let (_alpha, _context, attn_vec) =
            global_attention_step(tape, h_dec, h_s, w_c, w_a, Some(src_mask.clone()))?;
        let attn_vec = bound.apply_dropout(tape, attn_vec);
        let proj = tape.matmul(attn_vec, out_w);
        logit_rows.push(tape.add_row(proj, out_b));
        attn_feed = attn_vec;
    }
    Ok(tape.concat_rows(&logit_rows))
}

fn src_attention_mask(src_ids: &[u32]) -> Array2<bool> {
    Array2::from_shape_fn((1, src_ids.len()), |(_, s)| src_ids[s] != PAD_ID)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::tensor::Tape;
    use crate::neural::{forward, Hyper, ModelKind, ModelParams};

    fn tiny_params() -> ModelParams {
        let mut hyper = Hyper::new(ModelKind::Nmt, 12, 10);
        hyper.d_model = 8;
        ModelParams::init(hyper, 11)
    }

    #[test]
    fn logits_shape_is_tgt_len_by_vocab() {
        let params = tiny_params();
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, &params);
        let logits = forward(&mut tape, &bound, &[4, 5, 6, 7], &[1, 8, 9]).unwrap();
        assert_eq!(tape.shape(logits), (3, 10));
    }

    #[test]
    fn source_permutation_changes_logits() {
        let params = tiny_params();
        let run = |src: &[u32]| {
            let mut tape = Tape::new();
            let bound = BoundParams::bind(&mut tape, &params);
            let logits = forward(&mut tape, &bound, src, &[1, 8]).unwrap();
            tape.value(logits).clone()
        };
        assert_ne!(run(&[4, 5, 6]), run(&[6, 5, 4]));
    }

    #[test]
    fn trailing_source_padding_preserves_loss() {
        let params = tiny_params();
        let run = |src: &[u32]| {
            let mut tape = Tape::new();
            let bound = BoundParams::bind(&mut tape, &params);
            let logits = forward(&mut tape, &bound, src, &[1, 8, 9]).unwrap();
            let loss = tape.cross_entropy(logits, &[8, 9, 2], &[true, true, true]);
            tape.value(loss)[(0, 0)]
        };
        let clean = run(&[4, 5, 6]);
        let padded = run(&[4, 5, 6, 0, 0]);
        assert!((clean - padded).abs() < 1e-10, "{clean} vs {padded}");
    }

    #[test]
    fn length_limit_enforced() {
        let mut hyper = Hyper::new(ModelKind::Nmt, 12, 10);
        hyper.d_model = 4;
        hyper.max_len = 4;
        let params = ModelParams::init(hyper, 1);
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, &params);
        let err = forward(&mut tape, &bound, &[1, 2, 3, 4, 5], &[1]).unwrap_err();
        assert!(matches!(err, NeuralError::LengthExceeded { len: 5, max_len: 4 }));
    }
}
