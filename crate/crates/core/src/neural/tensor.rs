//! Reverse-mode automatic differentiation over 2-D `f64` tensors.
//!
//! A `Tape` records every operation; `backward` replays them in reverse.
//! All tensors are row-major `(rows, cols)` matrices: sequences are
//! `(len, d_model)`, vectors are `(1, d)` rows, scalars are `(1, 1)`.

use ndarray::{s, Array2, Axis};

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

enum Op {
    Leaf,
    /// c = a @ b
    MatMul(usize, usize),
    /// c = a @ b^T
    MatMulTransB(usize, usize),
    /// same-shape elementwise sum
    Add(usize, usize),
    /// a (n, d) + row (1, d), broadcast over rows
    AddRow(usize, usize),
    /// elementwise product, same shape
    Mul(usize, usize),
    /// a (n, d) * row (1, d), broadcast over rows
    MulRow(usize, usize),
    Sub(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    /// elementwise product with a constant matrix (dropout masks)
    MulConst(usize, Array2<f64>),
    Tanh(usize),
    Sigmoid(usize),
    Relu(usize),
    /// row-wise softmax; `None` mask entries allow all columns
    SoftmaxRows(usize, Option<Array2<bool>>),
    /// per-row normalization (x - mean) / sqrt(var + eps)
    LayerNormRows(usize, f64),
    /// stack inputs left-to-right along columns
    ConcatCols(Vec<usize>),
    /// stack inputs top-to-bottom along rows
    ConcatRows(Vec<usize>),
    /// gather rows by index (embedding lookup)
    SelectRows(usize, Vec<usize>),
    /// mean of -log softmax(logits)[i, target_i] over unmasked rows
    CrossEntropy { logits: usize, targets: Vec<usize>, mask: Vec<bool> },
}

#[derive(Default)]
pub struct Tape {
    values: Vec<Array2<f64>>,
    ops: Vec<Op>,
}

/// Gradients produced by one backward pass, indexed by `Var`.
pub struct Grads(Vec<Array2<f64>>);

impl Grads {
    pub fn of(&self, var: Var) -> &Array2<f64> {
        &self.0[var.0]
    }
}

fn softmax_rows(x: &Array2<f64>, mask: Option<&Array2<bool>>) -> Array2<f64> {
    let mut out = x.clone();
    for (r, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let allowed = |c: usize| mask.map(|m| m[(r, c)]).unwrap_or(true);
        let max = row
            .iter()
            .enumerate()
            .filter(|(c, _)| allowed(*c))
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (c, v) in row.iter_mut().enumerate() {
            if allowed(c) {
                *v = (*v - max).exp();
                sum += *v;
            } else {
                *v = 0.0;
            }
        }
        if sum > 0.0 {
            row.mapv_inplace(|v| v / sum);
        }
    }
    out
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, var: Var) -> &Array2<f64> {
        &self.values[var.0]
    }

    pub fn shape(&self, var: Var) -> (usize, usize) {
        let v = self.value(var);
        (v.nrows(), v.ncols())
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.values.push(value);
        self.ops.push(op);
        Var(self.values.len() - 1)
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.leaf(Array2::zeros((rows, cols)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(
            self.value(a).ncols(),
            self.value(b).nrows(),
            "matmul inner dimension mismatch"
        );
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a.0, b.0))
    }

    /// a @ b^T without materializing the transpose on the tape.
    pub fn matmul_transb(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(
            self.value(a).ncols(),
            self.value(b).ncols(),
            "matmul_transb inner dimension mismatch"
        );
        let v = self.value(a).dot(&self.value(b).t());
        self.push(v, Op::MatMulTransB(a.0, b.0))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a.0, b.0))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "add_row expects a 1-row rhs");
        assert_eq!(self.value(a).ncols(), self.value(row).ncols(), "add_row width mismatch");
        let v = self.value(a) + &self.value(row).row(0);
        self.push(v, Op::AddRow(a.0, row.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a.0, b.0))
    }

    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "mul_row expects a 1-row rhs");
        assert_eq!(self.value(a).ncols(), self.value(row).ncols(), "mul_row width mismatch");
        let v = self.value(a) * &self.value(row).row(0);
        self.push(v, Op::MulRow(a.0, row.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "sub shape mismatch");
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a.0, b.0))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) * k;
        self.push(v, Op::Scale(a.0, k))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) + k;
        self.push(v, Op::AddScalar(a.0))
    }

    pub fn mul_const(&mut self, a: Var, mask: Array2<f64>) -> Var {
        assert_eq!(
            (mask.nrows(), mask.ncols()),
            self.shape(a),
            "mul_const shape mismatch"
        );
        let v = self.value(a) * &mask;
        self.push(v, Op::MulConst(a.0, mask))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid(a.0))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a.0))
    }

    /// Row-wise softmax. With a mask, `false` positions get weight zero;
    /// rows with no allowed position come out all-zero.
    pub fn softmax_rows(&mut self, a: Var, mask: Option<Array2<bool>>) -> Var {
        if let Some(m) = &mask {
            assert_eq!((m.nrows(), m.ncols()), self.shape(a), "softmax mask shape mismatch");
        }
        let v = softmax_rows(self.value(a), mask.as_ref());
        self.push(v, Op::SoftmaxRows(a.0, mask))
    }

    pub fn layer_norm_rows(&mut self, a: Var, eps: f64) -> Var {
        let x = self.value(a);
        let mut v = x.clone();
        for mut row in v.axis_iter_mut(Axis(0)) {
            let d = row.len() as f64;
            let mean = row.sum() / d;
            let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d;
            let inv = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|x| (x - mean) * inv);
        }
        self.push(v, Op::LayerNormRows(a.0, eps))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let rows = self.value(parts[0]).nrows();
        let cols: usize = parts.iter().map(|&p| self.value(p).ncols()).sum();
        let mut v = Array2::zeros((rows, cols));
        let mut at = 0;
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.nrows(), rows, "concat_cols row mismatch");
            v.slice_mut(s![.., at..at + pv.ncols()]).assign(pv);
            at += pv.ncols();
        }
        self.push(v, Op::ConcatCols(parts.iter().map(|p| p.0).collect()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let cols = self.value(parts[0]).ncols();
        let rows: usize = parts.iter().map(|&p| self.value(p).nrows()).sum();
        let mut v = Array2::zeros((rows, cols));
        let mut at = 0;
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.ncols(), cols, "concat_rows column mismatch");
            v.slice_mut(s![at..at + pv.nrows(), ..]).assign(pv);
            at += pv.nrows();
        }
        self.push(v, Op::ConcatRows(parts.iter().map(|p| p.0).collect()))
    }

    /// Gather rows of `a` by index; the embedding lookup.
    pub fn select_rows(&mut self, a: Var, indices: &[usize]) -> Var {
        let av = self.value(a);
        let mut v = Array2::zeros((indices.len(), av.ncols()));
        for (r, &idx) in indices.iter().enumerate() {
            assert!(idx < av.nrows(), "select_rows index {idx} out of range");
            v.row_mut(r).assign(&av.row(idx));
        }
        self.push(v, Op::SelectRows(a.0, indices.to_vec()))
    }

    /// Mean token-level cross entropy of `logits` (rows = positions) against
    /// `targets`, skipping rows where `mask` is false. Returns a scalar.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], mask: &[bool]) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.nrows(), targets.len(), "cross_entropy target length mismatch");
        assert_eq!(targets.len(), mask.len(), "cross_entropy mask length mismatch");
        let probs = softmax_rows(lv, None);
        let mut total = 0.0;
        let mut count = 0usize;
        for (r, (&t, &m)) in targets.iter().zip(mask).enumerate() {
            if m {
                total -= probs[(r, t)].max(1e-300).ln();
                count += 1;
            }
        }
        let loss = if count == 0 { 0.0 } else { total / count as f64 };
        self.push(
            Array2::from_elem((1, 1), loss),
            Op::CrossEntropy { logits: logits.0, targets: targets.to_vec(), mask: mask.to_vec() },
        )
    }

    /// Backpropagate from a scalar `loss` node.
    pub fn backward(&self, loss: Var) -> Grads {
        assert_eq!(self.shape(loss), (1, 1), "backward expects a scalar loss");
        let mut grads: Vec<Array2<f64>> = self
            .values
            .iter()
            .map(|v| Array2::zeros((v.nrows(), v.ncols())))
            .collect();
        grads[loss.0][(0, 0)] = 1.0;

        for i in (0..self.values.len()).rev() {
            if grads[i].iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = std::mem::replace(&mut grads[i], Array2::zeros((0, 0)));
            match &self.ops[i] {
                Op::Leaf => {
                    grads[i] = g; // keep leaf grads readable after the pass
                }
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.values[*b].t());
                    let db = self.values[*a].t().dot(&g);
                    grads[*a] += &da;
                    grads[*b] += &db;
                    grads[i] = g;
                }
                Op::MatMulTransB(a, b) => {
                    let da = g.dot(&self.values[*b]);
                    let db = g.t().dot(&self.values[*a]);
                    grads[*a] += &da;
                    grads[*b] += &db;
                    grads[i] = g;
                }
                Op::Add(a, b) => {
                    grads[*a] += &g;
                    grads[*b] += &g;
                    grads[i] = g;
                }
                Op::AddRow(a, row) => {
                    grads[*a] += &g;
                    let summed = g.sum_axis(Axis(0));
                    grads[*row] += &summed.view().insert_axis(Axis(0));
                    grads[i] = g;
                }
                Op::Mul(a, b) => {
                    let da = &g * &self.values[*b];
                    let db = &g * &self.values[*a];
                    grads[*a] += &da;
                    grads[*b] += &db;
                    grads[i] = g;
                }
                Op::MulRow(a, row) => {
                    let da = &g * &self.values[*row].row(0);
                    let drow = (&g * &self.values[*a]).sum_axis(Axis(0));
                    grads[*a] += &da;
                    grads[*row] += &drow.view().insert_axis(Axis(0));
                    grads[i] = g;
                }
                Op::Sub(a, b) => {
                    grads[*a] += &g;
                    grads[*b] -= &g;
                    grads[i] = g;
                }
                Op::Scale(a, k) => {
                    let da = &g * *k;
                    grads[*a] += &da;
                    grads[i] = g;
                }
                Op::AddScalar(a) => {
                    grads[*a] += &g;
                    grads[i] = g;
                }
                Op::MulConst(a, mask) => {
                    let da = &g * mask;
                    grads[*a] += &da;
                    grads[i] = g;
                }
                Op::Tanh(a) => {
                    let y = &self.values[i];
                    let da = &g * &y.mapv(|y| 1.0 - y * y);
                    grads[*a] += &da;
                    grads[i] = g;
                }
                Op::Sigmoid(a) => {
                    let y = &self.values[i];
                    let da = &g * &y.mapv(|y| y * (1.0 - y));
                    grads[*a] += &da;
                    grads[i] = g;
                }
                Op::Relu(a) => {
                    let da = &g * &self.values[*a].mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
                    grads[*a] += &da;
                    grads[i] = g;
                }
                Op::SoftmaxRows(a, _mask) => {
                    // dx_row = y ⊙ (dy_row - <dy_row, y>); masked entries have
                    // y = 0 and receive no gradient.
                    let y = &self.values[i];
                    let mut da = Array2::zeros(g.raw_dim());
                    for r in 0..y.nrows() {
                        let dot: f64 = g.row(r).iter().zip(y.row(r)).map(|(a, b)| a * b).sum();
                        for c in 0..y.ncols() {
                            da[(r, c)] = y[(r, c)] * (g[(r, c)] - dot);
                        }
                    }
                    grads[*a] += &da;
                    grads[i] = g;
                }
                Op::LayerNormRows(a, eps) => {
                    let x = &self.values[*a];
                    let y = &self.values[i];
                    let mut da = Array2::zeros(g.raw_dim());
                    for r in 0..x.nrows() {
                        let d = x.ncols() as f64;
                        let mean = x.row(r).sum() / d;
                        let var = x.row(r).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d;
                        let inv = 1.0 / (var + eps).sqrt();
                        let g_mean = g.row(r).sum() / d;
                        let gy_mean: f64 =
                            g.row(r).iter().zip(y.row(r)).map(|(a, b)| a * b).sum::<f64>() / d;
                        for c in 0..x.ncols() {
                            da[(r, c)] = inv * (g[(r, c)] - g_mean - y[(r, c)] * gy_mean);
                        }
                    }
                    grads[*a] += &da;
                    grads[i] = g;
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let w = self.values[p].ncols();
                        let slice = g.slice(s![.., at..at + w]).to_owned();
                        grads[p] += &slice;
                        at += w;
                    }
                    grads[i] = g;
                }
                Op::ConcatRows(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let h = self.values[p].nrows();
                        let slice = g.slice(s![at..at + h, ..]).to_owned();
                        grads[p] += &slice;
                        at += h;
                    }
                    grads[i] = g;
                }
                Op::SelectRows(a, indices) => {
                    for (r, &idx) in indices.iter().enumerate() {
                        let row = g.row(r).to_owned();
                        let mut target = grads[*a].row_mut(idx);
                        target += &row;
                    }
                    grads[i] = g;
                }
                Op::CrossEntropy { logits, targets, mask } => {
                    let count = mask.iter().filter(|&&m| m).count();
                    if count > 0 {
                        let upstream = g[(0, 0)];
                        let probs = softmax_rows(&self.values[*logits], None);
                        let mut dl = Array2::zeros(probs.raw_dim());
                        for (r, (&t, &m)) in targets.iter().zip(mask).enumerate() {
                            if m {
                                for c in 0..probs.ncols() {
                                    dl[(r, c)] = probs[(r, c)] / count as f64;
                                }
                                dl[(r, t)] -= 1.0 / count as f64;
                            }
                        }
                        dl *= upstream;
                        grads[*logits] += &dl;
                    }
                    grads[i] = g;
                }
            }
        }
        Grads(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn numeric_grad<F: FnMut(&Array2<f64>) -> f64>(
        x: &Array2<f64>,
        mut f: F,
        eps: f64,
    ) -> Array2<f64> {
        let mut g = Array2::zeros(x.raw_dim());
        for idx in 0..x.len() {
            let (r, c) = (idx / x.ncols(), idx % x.ncols());
            let mut plus = x.clone();
            plus[(r, c)] += eps;
            let mut minus = x.clone();
            minus[(r, c)] -= eps;
            g[(r, c)] = (f(&plus) - f(&minus)) / (2.0 * eps);
        }
        g
    }

    fn max_rel_err(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
            .fold(0.0, f64::max)
    }

    #[test]
    fn matmul_grads_match_finite_differences() {
        let a0 = array![[0.3, -1.2, 0.7], [1.1, 0.2, -0.4]];
        let b0 = array![[0.5, -0.3], [0.9, 0.1], [-0.7, 0.8]];

        fn build(a: &Array2<f64>, b: &Array2<f64>) -> (Tape, Var, Var, Var) {
            let mut t = Tape::new();
            let va = t.leaf(a.clone());
            let vb = t.leaf(b.clone());
            let c = t.matmul(va, vb);
            let th = t.tanh(c);
            // scalarize: sum of entries via matmul with ones
            let ones_r = t.leaf(Array2::from_elem((1, 2), 1.0));
            let ones_c = t.leaf(Array2::from_elem((2, 1), 1.0));
            let row = t.matmul(ones_r, th);
            let scalar = t.matmul(row, ones_c);
            (t, scalar, va, vb)
        }
        fn eval(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
            let (t, scalar, _, _) = build(a, b);
            t.value(scalar)[(0, 0)]
        }

        let (t, scalar, va, vb) = build(&a0, &b0);
        let grads = t.backward(scalar);

        let na = numeric_grad(&a0, |a| eval(a, &b0), 1e-5);
        let nb = numeric_grad(&b0, |b| eval(&a0, b), 1e-5);
        assert!(max_rel_err(grads.of(va), &na) < 1e-6);
        assert!(max_rel_err(grads.of(vb), &nb) < 1e-6);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut t = Tape::new();
        let x = t.leaf(array![[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]]);
        let y = t.softmax_rows(x, None);
        for row in t.value(y).axis_iter(Axis(0)) {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_softmax_zeroes_disallowed() {
        let mut t = Tape::new();
        let x = t.leaf(array![[5.0, 1.0, 2.0]]);
        let mask = array![[false, true, true]];
        let y = t.softmax_rows(x, Some(mask));
        let v = t.value(y);
        assert_eq!(v[(0, 0)], 0.0);
        assert!((v.row(0).sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_matches_hand_value() {
        let mut t = Tape::new();
        let logits = t.leaf(array![[0.0, 0.0], [1.0, -1.0]]);
        let loss = t.cross_entropy(logits, &[0, 1], &[true, true]);
        // row0: -ln(0.5); row1: -ln(sigmoid(-2))
        let expected = (-(0.5f64.ln()) + (1.0 + (2.0f64).exp()).ln()) / 2.0;
        assert!((t.value(loss)[(0, 0)] - expected).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_ignores_masked_rows() {
        let mut t = Tape::new();
        let logits = t.leaf(array![[0.2, -0.4], [9.0, -9.0]]);
        let l1 = t.cross_entropy(logits, &[0, 0], &[true, false]);
        let mut t2 = Tape::new();
        let logits2 = t2.leaf(array![[0.2, -0.4]]);
        let l2 = t2.cross_entropy(logits2, &[0], &[true]);
        assert!((t.value(l1)[(0, 0)] - t2.value(l2)[(0, 0)]).abs() < 1e-15);
    }

    #[test]
    fn composite_graph_grad_check() {
        // layernorm -> sigmoid -> select/concat -> cross entropy
        let x0 = array![[0.4, -0.2, 0.9, 0.1], [1.4, 0.3, -0.8, 0.2], [0.0, 0.5, 0.25, -0.75]];
        let run = |x: &Array2<f64>| {
            let mut t = Tape::new();
            let v = t.leaf(x.clone());
            let ln = t.layer_norm_rows(v, 1e-5);
            let sg = t.sigmoid(ln);
            let picked = t.select_rows(sg, &[2, 0, 1, 2]);
            let loss = t.cross_entropy(picked, &[1, 0, 3, 2], &[true, true, false, true]);
            (t, v, loss)
        };
        let (t, v, loss) = run(&x0);
        let grads = t.backward(loss);
        let numeric = numeric_grad(&x0, |x| {
            let (t, _, l) = run(x);
            t.value(l)[(0, 0)]
        }, 1e-6);
        assert!(max_rel_err(grads.of(v), &numeric) < 1e-7);
    }
}
