//! Post-norm Transformer encoder-decoder: multi-head scaled dot-product
//! attention, position-wise feed-forward blocks, sinusoidal positions, and a
//! causal decoder mask.

use ndarray::Array2;

use super::attention::{scaled_dot_attention, sinusoidal_positions};
use super::tensor::{Tape, Var};
use super::{BoundParams, NeuralError};
use crate::tokenize::PAD_ID;

const LN_EPS: f64 = 1e-5;

/// Key mask replicated for every query row: `keys[j] == false` hides column j.
fn key_mask(n_queries: usize, keys: &[bool]) -> Array2<bool> {
    Array2::from_shape_fn((n_queries, keys.len()), |(_, j)| keys[j])
}

/// Lower-triangular mask: query t may attend to keys 0..=t.
fn causal_mask(n: usize) -> Array2<bool> {
    Array2::from_shape_fn((n, n), |(q, k)| k <= q)
}

fn non_pad(ids: &[u32]) -> Vec<bool> {
    ids.iter().map(|&id| id != PAD_ID).collect()
}

/// Multi-head attention under `prefix` (expects `{prefix}.h{h}.wq/wk/wv` and
/// `{prefix}.wo`). Each query row sees the key rows its mask row allows.
fn multi_head(
    tape: &mut Tape,
    bound: &BoundParams,
    prefix: &str,
    queries: Var,
    keys: Var,
    values: Var,
    mask: &Array2<bool>,
) -> Result<Var, NeuralError> {
    let mut heads = Vec::with_capacity(bound.hyper.n_heads);
    for h in 0..bound.hyper.n_heads {
        let wq = bound.get(&format!("{prefix}.h{h}.wq"));
        let wk = bound.get(&format!("{prefix}.h{h}.wk"));
        let wv = bound.get(&format!("{prefix}.h{h}.wv"));
        let q = tape.matmul(queries, wq);
        let k = tape.matmul(keys, wk);
        let v = tape.matmul(values, wv);
        let (out, _) = scaled_dot_attention(tape, q, k, v, Some(mask.clone()))?;
        heads.push(out);
    }
    let concat = tape.concat_cols(&heads);
    let wo = bound.get(&format!("{prefix}.wo"));
    Ok(tape.matmul(concat, wo))
}

/// Residual connection followed by layer norm with learned gain/bias under
/// `{prefix}.g` / `{prefix}.b`.
fn add_norm(tape: &mut Tape, bound: &BoundParams, prefix: &str, x: Var, sub: Var) -> Var {
    let summed = tape.add(x, sub);
    let normed = tape.layer_norm_rows(summed, LN_EPS);
    let g = bound.get(&format!("{prefix}.g"));
    let b = bound.get(&format!("{prefix}.b"));
    let scaled = tape.mul_row(normed, g);
    tape.add_row(scaled, b)
}

fn feed_forward(tape: &mut Tape, bound: &BoundParams, prefix: &str, x: Var) -> Var {
    let w1 = bound.get(&format!("{prefix}.ff.w1"));
    let b1 = bound.get(&format!("{prefix}.ff.b1"));
    let w2 = bound.get(&format!("{prefix}.ff.w2"));
    let b2 = bound.get(&format!("{prefix}.ff.b2"));
    let hidden = tape.matmul(x, w1);
    let hidden = tape.add_row(hidden, b1);
    let hidden = tape.relu(hidden);
    let out = tape.matmul(hidden, w2);
    tape.add_row(out, b2)
}

/// Token embeddings scaled by sqrt(d_model), plus sinusoidal positions when
/// enabled.
fn embed(tape: &mut Tape, bound: &BoundParams, table: &str, ids: &[u32]) -> Var {
    let emb = bound.get(table);
    let indices: Vec<usize> = ids.iter().map(|&id| id as usize).collect();
    let gathered = tape.select_rows(emb, &indices);
    let scaled = tape.scale(gathered, (bound.hyper.d_model as f64).sqrt());
    if bound.hyper.positional {
        let pos = sinusoidal_positions(ids.len(), bound.hyper.d_model);
        let pos = tape.leaf(pos);
        tape.add(scaled, pos)
    } else {
        scaled
    }
}

fn encode(tape: &mut Tape, bound: &BoundParams, src_ids: &[u32]) -> Result<Var, NeuralError> {
    let src_keys = non_pad(src_ids);
    let self_mask = key_mask(src_ids.len(), &src_keys);
    let mut x = embed(tape, bound, "src_emb", src_ids);
    x = bound.apply_dropout(tape, x);
    for i in 0..bound.hyper.n_layers {
        let attn = multi_head(tape, bound, &format!("enc.l{i}.attn"), x, x, x, &self_mask)?;
        let attn = bound.apply_dropout(tape, attn);
        x = add_norm(tape, bound, &format!("enc.l{i}.ln1"), x, attn);
        let ff = feed_forward(tape, bound, &format!("enc.l{i}"), x);
        let ff = bound.apply_dropout(tape, ff);
        x = add_norm(tape, bound, &format!("enc.l{i}.ln2"), x, ff);
    }
    Ok(x)
}

/// Teacher-forced forward pass: logits of shape (tgt_in.len(), tgt_vocab).
pub fn forward(
    tape: &mut Tape,
    bound: &BoundParams,
    src_ids: &[u32],
    tgt_in_ids: &[u32],
) -> Result<Var, NeuralError> {
    let memory = encode(tape, bound, src_ids)?;
    let t = tgt_in_ids.len();
    let self_mask = causal_mask(t);
    let cross_mask = key_mask(t, &non_pad(src_ids));

    let mut x = embed(tape, bound, "tgt_emb", tgt_in_ids);
    x = bound.apply_dropout(tape, x);
    for i in 0..bound.hyper.n_layers {
        let attn = multi_head(tape, bound, &format!("dec.l{i}.attn"), x, x, x, &self_mask)?;
        let attn = bound.apply_dropout(tape, attn);
        x = add_norm(tape, bound, &format!("dec.l{i}.ln1"), x, attn);
        let cross = multi_head(
            tape,
            bound,
            &format!("dec.l{i}.cross"),
            x,
            memory,
            memory,
            &cross_mask,
        )?;
        let cross = bound.apply_dropout(tape, cross);
        x = add_norm(tape, bound, &format!("dec.l{i}.ln2"), x, cross);
        let ff = feed_forward(tape, bound, &format!("dec.l{i}"), x);
        let ff = bound.apply_dropout(tape, ff);
        x = add_norm(tape, bound, &format!("dec.l{i}.ln3"), x, ff);
    }

    let out_w = bound.get("out.w");
    let out_b = bound.get("out.b");
    let projected = tape.matmul(x, out_w);
    Ok(tape.add_row(projected, out_b))
}
