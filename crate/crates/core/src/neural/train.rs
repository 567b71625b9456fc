//! Teacher-forced training with Adam, greedy decoding, and finite-difference
//! gradient verification.

use indexmap::IndexMap;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::{Tape, Var};
use super::{forward, BoundParams, ModelParams, NeuralError};
use crate::tokenize::{BOS_ID, EOS_ID};

/// One parallel training example, already encoded (no BOS/EOS wrapping; the
/// loop adds those itself).
#[derive(Debug, Clone)]
pub struct Pair {
    pub src: Vec<u32>,
    pub tgt: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig { epochs: 10, batch_size: 16, lr: 1e-3, seed: 42 }
    }
}

/// Adam with the usual bias correction; state is kept per named tensor.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: usize,
    m: IndexMap<String, Array2<f64>>,
    v: IndexMap<String, Array2<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Adam {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: IndexMap::new(), v: IndexMap::new() }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &IndexMap<String, Array2<f64>>) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (name, grad) in grads {
            let tensor = params
                .tensors
                .get_mut(name)
                .unwrap_or_else(|| panic!("gradient for unknown parameter `{name}`"));
            let m = self
                .m
                .entry(name.clone())
                .or_insert_with(|| Array2::zeros(grad.dim()));
            let v = self
                .v
                .entry(name.clone())
                .or_insert_with(|| Array2::zeros(grad.dim()));
            azip_update(m, v, tensor, grad, self.beta1, self.beta2, self.lr, self.eps, bc1, bc2);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn azip_update(
    m: &mut Array2<f64>,
    v: &mut Array2<f64>,
    tensor: &mut Array2<f64>,
    grad: &Array2<f64>,
    beta1: f64,
    beta2: f64,
    lr: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
) {
    ndarray::Zip::from(m)
        .and(v)
        .and(tensor)
        .and(grad)
        .for_each(|m, v, w, &g| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        });
}

/// Mean cross-entropy over a batch: each sample contributes the mean loss
/// over its own target positions.
fn batch_loss(
    tape: &mut Tape,
    bound: &BoundParams,
    batch: &[&Pair],
) -> Result<Var, NeuralError> {
    let mut losses = Vec::with_capacity(batch.len());
    for pair in batch {
        let mut tgt_in = Vec::with_capacity(pair.tgt.len() + 1);
        tgt_in.push(BOS_ID);
        tgt_in.extend_from_slice(&pair.tgt);
        let mut tgt_out: Vec<usize> = pair.tgt.iter().map(|&id| id as usize).collect();
        tgt_out.push(EOS_ID as usize);
        let mask = vec![true; tgt_out.len()];
        let logits = forward(tape, bound, &pair.src, &tgt_in)?;
        losses.push(tape.cross_entropy(logits, &tgt_out, &mask));
    }
    let total = losses
        .into_iter()
        .reduce(|a, b| tape.add(a, b))
        .expect("non-empty batch");
    Ok(tape.scale(total, 1.0 / batch.len() as f64))
}

/// Gradients of `loss` with respect to every bound parameter, keyed by name.
fn named_grads(tape: &Tape, bound: &BoundParams, loss: Var) -> IndexMap<String, Array2<f64>> {
    let grads = tape.backward(loss);
    bound
        .vars
        .iter()
        .map(|(name, &var)| (name.clone(), grads.of(var).clone()))
        .collect()
}

/// Train in place; returns the mean loss per epoch.
pub fn train(
    params: &mut ModelParams,
    pairs: &[Pair],
    cfg: &TrainConfig,
) -> Result<Vec<f64>, NeuralError> {
    if pairs.is_empty() {
        return Err(NeuralError::ShapeMismatch("empty training set".into()));
    }
    let mut adam = Adam::new(cfg.lr);
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<&Pair> = chunk.iter().map(|&i| &pairs[i]).collect();
            let mut tape = Tape::new();
            let bound = BoundParams::bind_training(&mut tape, params, cfg.seed ^ step as u64);
            let loss = batch_loss(&mut tape, &bound, &batch)?;
            let loss_val = tape.value(loss)[(0, 0)];
            if !loss_val.is_finite() {
                return Err(NeuralError::NonFiniteLoss { step });
            }
            let grads = named_grads(&tape, &bound, loss);
            adam.step(params, &grads);
            epoch_loss += loss_val;
            n_batches += 1;
            step += 1;
        }
        curve.push(epoch_loss / n_batches as f64);
    }
    Ok(curve)
}

/// Greedy decoding: argmax of the final-position logits at every step, ties
/// broken toward the lowest id; stops at EOS or `max_out` tokens. The BOS/EOS
/// framing is stripped from the result.
pub fn greedy_decode(
    params: &ModelParams,
    src: &[u32],
    max_out: usize,
) -> Result<Vec<u32>, NeuralError> {
    let mut tgt_in = vec![BOS_ID];
    let mut out = Vec::new();
    while out.len() < max_out && tgt_in.len() < params.hyper.max_len {
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, params);
        let logits = forward(&mut tape, &bound, src, &tgt_in)?;
        let last = tape.value(logits).row(tgt_in.len() - 1).to_owned();
        let mut best = 0usize;
        for (i, &v) in last.iter().enumerate() {
            if v > last[best] {
                best = i;
            }
        }
        let next = best as u32;
        if next == EOS_ID {
            break;
        }
        out.push(next);
        tgt_in.push(next);
    }
    Ok(out)
}

/// Central-difference verification of the tape gradients. Samples up to
/// `per_tensor` coordinates from every parameter tensor and returns the
/// worst relative error max|g_a - g_n| / max(|g_a|, |g_n|, 1e-8).
pub fn grad_check(
    params: &ModelParams,
    pairs: &[Pair],
    per_tensor: usize,
    seed: u64,
) -> Result<f64, NeuralError> {
    let batch: Vec<&Pair> = pairs.iter().collect();
    let analytic = {
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, params);
        let loss = batch_loss(&mut tape, &bound, &batch)?;
        named_grads(&tape, &bound, loss)
    };
    let loss_at = |p: &ModelParams| -> Result<f64, NeuralError> {
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, p);
        let loss = batch_loss(&mut tape, &bound, &batch)?;
        Ok(tape.value(loss)[(0, 0)])
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = params.clone();
    let h = 1e-5;
    let mut worst = 0.0f64;
    let names: Vec<String> = params.tensors.keys().cloned().collect();
    for name in names {
        let (rows, cols) = params.tensors[&name].dim();
        let total = rows * cols;
        let picks: Vec<usize> = if total <= per_tensor {
            (0..total).collect()
        } else {
            (0..per_tensor).map(|_| rng.gen_range(0..total)).collect()
        };
        for flat in picks {
            let idx = (flat / cols, flat % cols);
            let orig = work.tensors[&name][idx];
            work.tensors[&name][idx] = orig + h;
            let up = loss_at(&work)?;
            work.tensors[&name][idx] = orig - h;
            let down = loss_at(&work)?;
            work.tensors[&name][idx] = orig;
            let numeric = (up - down) / (2.0 * h);
            let exact = analytic[&name][idx];
            let denom = exact.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((exact - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Hyper, ModelKind};

    fn toy_pairs() -> Vec<Pair> {
        // a tiny copy-ish task over ids 4..=9
        (0..12)
            .map(|i| {
                let a = 4 + (i % 6) as u32;
                let b = 4 + ((i + 2) % 6) as u32;
                Pair { src: vec![a, b], tgt: vec![a, b] }
            })
            .collect()
    }

    fn tiny(kind: ModelKind) -> Hyper {
        let mut h = Hyper::new(kind, 10, 10);
        h.d_model = 8;
        h.n_heads = 2;
        h.n_layers = 1;
        h.d_ff = 16;
        h.max_len = 16;
        h
    }

    #[test]
    fn loss_decreases_transformer() {
        let mut params = ModelParams::init(tiny(ModelKind::Transformer), 3);
        let curve = train(
            &mut params,
            &toy_pairs(),
            &TrainConfig { epochs: 12, batch_size: 4, lr: 3e-3, seed: 5 },
        )
        .unwrap();
        assert!(
            curve.last().unwrap() < &(curve[0] * 0.7),
            "no learning: {curve:?}"
        );
    }

    #[test]
    fn loss_decreases_nmt() {
        let mut params = ModelParams::init(tiny(ModelKind::Nmt), 3);
        let curve = train(
            &mut params,
            &toy_pairs(),
            &TrainConfig { epochs: 25, batch_size: 4, lr: 3e-3, seed: 5 },
        )
        .unwrap();
        assert!(
            curve.last().unwrap() < &(curve[0] * 0.7),
            "no learning: {curve:?}"
        );
    }

    #[test]
    fn grad_check_transformer() {
        let params = ModelParams::init(tiny(ModelKind::Transformer), 7);
        let pairs = vec![Pair { src: vec![4, 5, 6], tgt: vec![7, 8] }];
        let err = grad_check(&params, &pairs, 12, 99).unwrap();
        assert!(err < 1e-4, "worst relative gradient error {err}");
    }

    #[test]
    fn grad_check_nmt() {
        let params = ModelParams::init(tiny(ModelKind::Nmt), 7);
        let pairs = vec![Pair { src: vec![4, 5, 6], tgt: vec![7, 8] }];
        let err = grad_check(&params, &pairs, 12, 99).unwrap();
        assert!(err < 1e-4, "worst relative gradient error {err}");
    }

    #[test]
    fn greedy_decode_copies_after_training() {
        let mut params = ModelParams::init(tiny(ModelKind::Transformer), 3);
        train(
            &mut params,
            &toy_pairs(),
            &TrainConfig { epochs: 60, batch_size: 4, lr: 3e-3, seed: 5 },
        )
        .unwrap();
        let out = greedy_decode(&params, &[4, 6], 8).unwrap();
        assert_eq!(out, vec![4, 6]);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainConfig { epochs: 3, batch_size: 4, lr: 1e-3, seed: 11 };
        let mut a = ModelParams::init(tiny(ModelKind::Transformer), 3);
        let mut b = ModelParams::init(tiny(ModelKind::Transformer), 3);
        let ca = train(&mut a, &toy_pairs(), &cfg).unwrap();
        let cb = train(&mut b, &toy_pairs(), &cfg).unwrap();
        assert_eq!(ca, cb);
        for (name, ta) in &a.tensors {
            assert_eq!(ta, &b.tensors[name], "tensor {name} diverged");
        }
    }
}
