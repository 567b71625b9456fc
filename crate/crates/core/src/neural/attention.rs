//! Attention primitives shared by both architectures.

use ndarray::Array2;

use super::tensor::{Tape, Var};
use super::NeuralError;

/// softmax(Q K^T / sqrt(d_k)) V with an optional key mask (`false` = masked
/// out, pre-softmax -inf). Returns (output, attention weights).
pub fn scaled_dot_attention(
    tape: &mut Tape,
    q: Var,
    k: Var,
    v: Var,
    mask: Option<Array2<bool>>,
) -> Result<(Var, Var), NeuralError> {
    let (qr, qc) = tape.shape(q);
    let (kr, kc) = tape.shape(k);
    let (vr, _vc) = tape.shape(v);
    if qc != kc {
        return Err(NeuralError::ShapeMismatch(format!(
            "query dim {qc} != key dim {kc}"
        )));
    }
    if kr != vr {
        return Err(NeuralError::ShapeMismatch(format!(
            "key count {kr} != value count {vr}"
        )));
    }
    if let Some(m) = &mask {
        if (m.nrows(), m.ncols()) != (qr, kr) {
            return Err(NeuralError::ShapeMismatch(format!(
                "mask {}x{} not broadcastable to scores {qr}x{kr}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let scores = tape.matmul_transb(q, k);
    let scaled = tape.scale(scores, 1.0 / (kc as f64).sqrt());
    let weights = tape.softmax_rows(scaled, mask);
    let out = tape.matmul(weights, v);
    Ok((out, weights))
}

/// One step of global attention (recurrent decoder side): weights over all
/// source states, weighted context, and the combined attention vector
/// tanh(W_c [c_t ; h_t]). Returns (alpha, context, attention vector).
pub fn global_attention_step(
    tape: &mut Tape,
    h_t: Var,
    h_s: Var,
    w_c: Var,
    w_a: Option<Var>,
    src_mask: Option<Array2<bool>>,
) -> Result<(Var, Var, Var), NeuralError> {
    let (tr, tc) = tape.shape(h_t);
    let (_, sc) = tape.shape(h_s);
    if tr != 1 {
        return Err(NeuralError::ShapeMismatch(format!(
            "target hidden state must be one row, got {tr}"
        )));
    }
    if tc != sc {
        return Err(NeuralError::ShapeMismatch(format!(
            "hidden sizes disagree: target {tc}, source {sc}"
        )));
    }
    // score(h_t, h_s): dot by default, bilinear "general" when w_a is given.
    let query = match w_a {
        Some(wa) => tape.matmul(h_t, wa),
        None => h_t,
    };
    let scores = tape.matmul_transb(query, h_s); // (1, S)
    let alpha = tape.softmax_rows(scores, src_mask);
    let context = tape.matmul(alpha, h_s); // (1, d)
    let combined = tape.concat_cols(&[context, h_t]); // (1, 2d)
    let projected = tape.matmul(combined, w_c);
    let attn_vec = tape.tanh(projected);
    Ok((alpha, context, attn_vec))
}

/// Sinusoidal positional encodings, shape (len, d_model).
pub fn sinusoidal_positions(len: usize, d_model: usize) -> Array2<f64> {
    Array2::from_shape_fn((len, d_model), |(pos, i)| {
        let exponent = (2 * (i / 2)) as f64 / d_model as f64;
        let angle = pos as f64 / 10_000f64.powf(exponent);
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_key_value_returns_value() {
        let mut t = Tape::new();
        let q = t.leaf(array![[0.3, -0.7]]);
        let k = t.leaf(array![[1.5, 2.0]]);
        let v = t.leaf(array![[4.0, 5.0, 6.0]]);
        let (out, w) = scaled_dot_attention(&mut t, q, k, v, None).unwrap();
        assert_eq!(t.value(w)[(0, 0)], 1.0);
        assert_eq!(t.value(out), &array![[4.0, 5.0, 6.0]]);
    }

    #[test]
    fn zero_query_gives_uniform_weights() {
        let mut t = Tape::new();
        let q = t.leaf(array![[0.0, 0.0]]);
        let k = t.leaf(array![[1.0, 0.0], [0.0, 3.0], [2.0, 2.0]]);
        let v = t.leaf(array![[3.0, 0.0], [0.0, 3.0], [3.0, 3.0]]);
        let (out, w) = scaled_dot_attention(&mut t, q, k, v, None).unwrap();
        for &x in t.value(w).iter() {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((t.value(out)[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((t.value(out)[(0, 1)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_key_hand_computed_case() {
        // weights = softmax([1/sqrt(2), 0]) ~ [0.6698, 0.3302]
        let mut t = Tape::new();
        let q = t.leaf(array![[1.0, 0.0]]);
        let k = t.leaf(array![[1.0, 0.0], [0.0, 1.0]]);
        let v = t.leaf(array![[1.0, 0.0], [0.0, 1.0]]);
        let (out, w) = scaled_dot_attention(&mut t, q, k, v, None).unwrap();
        let e = (1.0f64 / 2.0f64.sqrt()).exp();
        let w0 = e / (e + 1.0);
        assert!((t.value(w)[(0, 0)] - w0).abs() < 1e-12);
        assert!((w0 - 0.6698).abs() < 5e-4);
        assert!((t.value(out)[(0, 0)] - w0).abs() < 1e-12);
        assert!((t.value(out)[(0, 1)] - (1.0 - w0)).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_detected() {
        let mut t = Tape::new();
        let q = t.leaf(array![[1.0, 0.0, 0.0]]);
        let k = t.leaf(array![[1.0, 0.0]]);
        let v = t.leaf(array![[1.0, 0.0]]);
        assert!(matches!(
            scaled_dot_attention(&mut t, q, k, v, None),
            Err(NeuralError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn global_attention_weights_normalize() {
        let mut t = Tape::new();
        let h_t = t.leaf(array![[0.5, -0.5]]);
        let h_s = t.leaf(array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let w_c = t.leaf(Array2::eye(4).slice(ndarray::s![.., ..2]).to_owned());
        let (alpha, _, _) = global_attention_step(&mut t, h_t, h_s, w_c, None, None).unwrap();
        assert!((t.value(alpha).sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_scores_give_mean_context() {
        let mut t = Tape::new();
        let h_t = t.leaf(array![[0.0, 0.0]]);
        let h_s = t.leaf(array![[2.0, 0.0], [0.0, 2.0]]);
        let w_c = t.leaf(Array2::zeros((4, 2)));
        let (_, context, _) = global_attention_step(&mut t, h_t, h_s, w_c, None, None).unwrap();
        assert_eq!(t.value(context), &array![[1.0, 1.0]]);
    }

    #[test]
    fn single_source_state_degenerates() {
        let mut t = Tape::new();
        let h_t = t.leaf(array![[0.3, 0.9]]);
        let h_s = t.leaf(array![[-1.0, 2.0]]);
        let w_c = t.leaf(Array2::ones((4, 2)));
        let (alpha, context, attn) = global_attention_step(&mut t, h_t, h_s, w_c, None, None).unwrap();
        assert_eq!(t.value(alpha)[(0, 0)], 1.0);
        assert_eq!(t.value(context), t.value(h_s));
        // a_t = tanh(W_c [h_s ; h_t]), W_c all ones: each entry tanh(sum)
        let expected = (-1.0 + 2.0 + 0.3 + 0.9f64).tanh();
        assert!((t.value(attn)[(0, 0)] - expected).abs() < 1e-12);
    }

    #[test]
    fn positions_bounded_and_distinct() {
        let pe = sinusoidal_positions(16, 8);
        assert!(pe.iter().all(|v| v.abs() <= 1.0));
        assert_ne!(pe.row(0), pe.row(1));
    }
}
