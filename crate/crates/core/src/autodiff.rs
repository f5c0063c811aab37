//! Reverse-mode differentiation over a tape of dense-matrix operations.
//!
//! Each forward pass builds a fresh tape; `backward` walks it in reverse
//! creation order, accumulating gradients in a fixed order so runs are
//! reproducible bit-for-bit. The op set is exactly what the pipeline needs:
//! projections, attention pieces (masked softmax, column slice/concat),
//! layer norm, ReLU, pooling, and the two log-likelihood losses.

use crate::numcore::{softmax_slice, Matrix, NumError, Scalar};

pub type NodeId = usize;

/// Probability floor/ceiling applied inside the likelihood ops.
pub const PROB_CLAMP: f64 = 1e-12;

/// Attention mask shape for [`Tape::softmax_rows`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttnMask {
    /// Every position attends to every position.
    Full,
    /// Row i attends to columns 0..=i only; masked entries are exactly 0.
    Causal,
}

enum Op<T> {
    Constant,
    Param { param: usize },
    GatherRows { table: NodeId, ids: Vec<usize> },
    MatMul { a: NodeId, b: NodeId },
    Transpose { a: NodeId },
    Add { a: NodeId, b: NodeId },
    AddBiasRow { a: NodeId, bias: NodeId },
    Scale { a: NodeId, c: T },
    Relu { a: NodeId },
    SoftmaxRows { a: NodeId },
    LayerNormRows { a: NodeId, gamma: NodeId, beta: NodeId },
    MeanPoolRows { a: NodeId },
    ConcatCols { parts: Vec<NodeId> },
    SliceCols { a: NodeId, start: usize },
    ConcatRows { parts: Vec<NodeId> },
    NegLogLikelihood { probs: NodeId, targets: Vec<usize> },
    AddWeighted { a: NodeId, b: NodeId, wa: T, wb: T },
}

struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
}

const LAYER_NORM_EPS: f64 = 1e-5;

pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix<T> {
        &self.nodes[id].value
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>) -> NodeId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    /// Input treated as a constant: no gradient flows into it.
    pub fn constant(&mut self, value: Matrix<T>) -> NodeId {
        self.push(value, Op::Constant)
    }

    /// Leaf tied to trainable tensor `param` (an index the caller owns).
    pub fn param(&mut self, param: usize, value: Matrix<T>) -> NodeId {
        self.push(value, Op::Param { param })
    }

    pub fn gather_rows(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId, NumError> {
        let tbl = self.value(table);
        let cols = tbl.cols();
        let mut out = Matrix::zeros(ids.len(), cols);
        for (r, &id) in ids.iter().enumerate() {
            if id >= tbl.rows() {
                return Err(NumError::Invalid(format!(
                    "gather_rows: row {id} out of range for {}x{cols} table",
                    tbl.rows()
                )));
            }
            out.row_mut(r).copy_from_slice(tbl.row(id));
        }
        Ok(self.push(
            out,
            Op::GatherRows {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul { a, b }))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose { a })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add { a, b }))
    }

    /// Adds a 1xC bias row to every row of `a`.
    pub fn add_bias_row(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId, NumError> {
        let (ar, ac) = self.value(a).shape();
        let (br, bc) = self.value(bias).shape();
        if br != 1 || bc != ac {
            return Err(NumError::DimensionMismatch {
                op: "add_bias_row",
                lhs_rows: ar,
                lhs_cols: ac,
                rhs_rows: br,
                rhs_cols: bc,
            });
        }
        let bias_row = self.value(bias).row(0).to_vec();
        let mut value = self.value(a).clone();
        for i in 0..ar {
            for (v, &bv) in value.row_mut(i).iter_mut().zip(&bias_row) {
                *v = *v + bv;
            }
        }
        Ok(self.push(value, Op::AddBiasRow { a, bias }))
    }

    pub fn scale(&mut self, a: NodeId, c: T) -> NodeId {
        let value = self.value(a).scale(c);
        self.push(value, Op::Scale { a, c })
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self
            .value(a)
            .map(|v| if v > T::zero() { v } else { T::zero() });
        self.push(value, Op::Relu { a })
    }

    pub fn softmax_rows(&mut self, a: NodeId, mask: AttnMask) -> NodeId {
        let x = self.value(a);
        let (rows, cols) = x.shape();
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let visible = match mask {
                AttnMask::Full => cols,
                AttnMask::Causal => (i + 1).min(cols),
            };
            softmax_slice(&x.row(i)[..visible], &mut out.row_mut(i)[..visible]);
        }
        self.push(out, Op::SoftmaxRows { a })
    }

    /// Row-wise layer norm with learned 1xD scale and shift.
    pub fn layer_norm_rows(
        &mut self,
        a: NodeId,
        gamma: NodeId,
        beta: NodeId,
    ) -> Result<NodeId, NumError> {
        let (rows, cols) = self.value(a).shape();
        if self.value(gamma).shape() != (1, cols) || self.value(beta).shape() != (1, cols) {
            return Err(NumError::Invalid(format!(
                "layer_norm_rows: scale/shift must be 1x{cols}"
            )));
        }
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let (xhat, _) = normalize_row(self.value(a).row(i));
            for (j, v) in xhat.iter().enumerate() {
                let g = self.value(gamma).get(0, j);
                let b = self.value(beta).get(0, j);
                out.set(i, j, *v * g + b);
            }
        }
        Ok(self.push(out, Op::LayerNormRows { a, gamma, beta }))
    }

    /// Column-wise mean over all rows, producing a 1xC matrix.
    pub fn mean_pool_rows(&mut self, a: NodeId) -> NodeId {
        let x = self.value(a);
        let (rows, cols) = x.shape();
        let mut out = Matrix::zeros(1, cols);
        let inv = T::one() / T::from_f64(rows as f64);
        for i in 0..rows {
            for (o, &v) in out.row_mut(0).iter_mut().zip(x.row(i)) {
                *o = *o + v;
            }
        }
        for o in out.row_mut(0) {
            *o = *o * inv;
        }
        self.push(out, Op::MeanPoolRows { a })
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, NumError> {
        let rows = self.value(parts[0]).rows();
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Matrix::zeros(rows, total);
        let mut offset = 0;
        for &p in parts {
            let m = self.value(p);
            if m.rows() != rows {
                return Err(NumError::Invalid(
                    "concat_cols: parts disagree on row count".into(),
                ));
            }
            for i in 0..rows {
                out.row_mut(i)[offset..offset + m.cols()].copy_from_slice(self.value(p).row(i));
            }
            offset += self.value(p).cols();
        }
        Ok(self.push(
            out,
            Op::ConcatCols {
                parts: parts.to_vec(),
            },
        ))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, width: usize) -> Result<NodeId, NumError> {
        let x = self.value(a);
        let (rows, cols) = x.shape();
        if start + width > cols {
            return Err(NumError::Invalid(format!(
                "slice_cols: [{start}, {}) out of range for width {cols}",
                start + width
            )));
        }
        let mut out = Matrix::zeros(rows, width);
        for i in 0..rows {
            out.row_mut(i).copy_from_slice(&x.row(i)[start..start + width]);
        }
        Ok(self.push(out, Op::SliceCols { a, start }))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId, NumError> {
        let parts: Vec<NodeId> = parts.to_vec();
        let cols = self.value(parts[0]).cols();
        let total: usize = parts.iter().map(|&p| self.value(p).rows()).sum();
        let mut out = Matrix::zeros(total, cols);
        let mut offset = 0;
        for &p in &parts {
            let m = self.value(p);
            if m.cols() != cols {
                return Err(NumError::Invalid(
                    "concat_rows: parts disagree on column count".into(),
                ));
            }
            for i in 0..m.rows() {
                out.row_mut(offset + i).copy_from_slice(self.value(p).row(i));
            }
            offset += self.value(p).rows();
        }
        Ok(self.push(out, Op::ConcatRows { parts }))
    }

    /// Mean over rows of -ln(p[row, target(row)]), probabilities clamped to
    /// [1e-12, 1 - 1e-12]. Produces a 1x1 node.
    pub fn neg_log_likelihood(
        &mut self,
        probs: NodeId,
        targets: &[usize],
    ) -> Result<NodeId, NumError> {
        let p = self.value(probs);
        if targets.len() != p.rows() {
            return Err(NumError::LengthMismatch {
                op: "neg_log_likelihood",
                lhs: p.rows(),
                rhs: targets.len(),
            });
        }
        let lo = T::from_f64(PROB_CLAMP);
        let hi = T::one() - lo;
        let mut total = T::zero();
        for (i, &t) in targets.iter().enumerate() {
            if t >= p.cols() {
                return Err(NumError::Invalid(format!(
                    "neg_log_likelihood: target {t} out of range for {} classes",
                    p.cols()
                )));
            }
            let v = p.get(i, t).max(lo).min(hi);
            total = total - v.ln();
        }
        let value = total / T::from_f64(targets.len() as f64);
        let out = Matrix::from_vec(1, 1, vec![value])?;
        Ok(self.push(
            out,
            Op::NegLogLikelihood {
                probs,
                targets: targets.to_vec(),
            },
        ))
    }

    /// wa*a + wb*b elementwise; used for the joint objective.
    pub fn add_weighted(&mut self, a: NodeId, b: NodeId, wa: T, wb: T) -> Result<NodeId, NumError> {
        let value = self.value(a).scale(wa).add(&self.value(b).scale(wb))?;
        Ok(self.push(value, Op::AddWeighted { a, b, wa, wb }))
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> T {
        debug_assert_eq!(self.value(id).shape(), (1, 1));
        self.value(id).get(0, 0)
    }

    /// Reverse pass from `root` (a 1x1 node). Returns one gradient slot per
    /// node; nodes the root does not depend on stay `None`.
    pub fn backward(&self, root: NodeId) -> Result<Gradients<T>, NumError> {
        if self.value(root).shape() != (1, 1) {
            return Err(NumError::Invalid(
                "backward: root must be a 1x1 scalar node".into(),
            ));
        }
        let mut grads: Vec<Option<Matrix<T>>> = vec![None; self.nodes.len()];
        grads[root] = Some(Matrix::from_vec(1, 1, vec![T::one()])?);

        for id in (0..=root).rev() {
            let Some(dy) = grads[id].take() else {
                continue;
            };
            match &self.nodes[id].op {
                Op::Constant | Op::Param { .. } => {
                    grads[id] = Some(dy);
                    continue;
                }
                Op::GatherRows { table, ids } => {
                    let (tr, tc) = self.value(*table).shape();
                    let mut dt = Matrix::zeros(tr, tc);
                    for (r, &row_id) in ids.iter().enumerate() {
                        for (g, &d) in dt.row_mut(row_id).iter_mut().zip(dy.row(r)) {
                            *g = *g + d;
                        }
                    }
                    accumulate(&mut grads, *table, dt)?;
                }
                Op::MatMul { a, b } => {
                    let da = dy.matmul(&self.value(*b).transpose())?;
                    let db = self.value(*a).transpose().matmul(&dy)?;
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::Transpose { a } => {
                    accumulate(&mut grads, *a, dy.transpose())?;
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads, *a, dy.clone())?;
                    accumulate(&mut grads, *b, dy)?;
                }
                Op::AddBiasRow { a, bias } => {
                    let mut db = Matrix::zeros(1, dy.cols());
                    for i in 0..dy.rows() {
                        for (g, &d) in db.row_mut(0).iter_mut().zip(dy.row(i)) {
                            *g = *g + d;
                        }
                    }
                    accumulate(&mut grads, *a, dy)?;
                    accumulate(&mut grads, *bias, db)?;
                }
                Op::Scale { a, c } => {
                    accumulate(&mut grads, *a, dy.scale(*c))?;
                }
                Op::Relu { a } => {
                    let x = self.value(*a);
                    let mut dx = dy;
                    for (g, &v) in dx.data_mut().iter_mut().zip(x.data()) {
                        if v <= T::zero() {
                            *g = T::zero();
                        }
                    }
                    accumulate(&mut grads, *a, dx)?;
                }
                Op::SoftmaxRows { a } => {
                    // Masked entries carry y = 0, so the standard Jacobian
                    // product zeroes them without special casing.
                    let y = &self.nodes[id].value;
                    let mut dx = Matrix::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let mut s = T::zero();
                        for (&yv, &dv) in y.row(i).iter().zip(dy.row(i)) {
                            s = s + yv * dv;
                        }
                        for ((g, &yv), &dv) in
                            dx.row_mut(i).iter_mut().zip(y.row(i)).zip(dy.row(i))
                        {
                            *g = yv * (dv - s);
                        }
                    }
                    accumulate(&mut grads, *a, dx)?;
                }
                Op::LayerNormRows { a, gamma, beta } => {
                    let x = self.value(*a);
                    let (rows, cols) = x.shape();
                    let g_row = self.value(*gamma).row(0).to_vec();
                    let mut dx = Matrix::zeros(rows, cols);
                    let mut dgamma = Matrix::zeros(1, cols);
                    let mut dbeta = Matrix::zeros(1, cols);
                    let n = T::from_f64(cols as f64);
                    for i in 0..rows {
                        let (xhat, inv_std) = normalize_row(x.row(i));
                        let mut sum_dxhat = T::zero();
                        let mut sum_dxhat_xhat = T::zero();
                        let mut dxhat = vec![T::zero(); cols];
                        for j in 0..cols {
                            let d = dy.get(i, j);
                            let cur_g = dgamma.get(0, j);
                            dgamma.set(0, j, cur_g + d * xhat[j]);
                            let cur_b = dbeta.get(0, j);
                            dbeta.set(0, j, cur_b + d);
                            let dh = d * g_row[j];
                            dxhat[j] = dh;
                            sum_dxhat = sum_dxhat + dh;
                            sum_dxhat_xhat = sum_dxhat_xhat + dh * xhat[j];
                        }
                        for j in 0..cols {
                            let v = (dxhat[j] * n - sum_dxhat - xhat[j] * sum_dxhat_xhat)
                                * inv_std
                                / n;
                            dx.set(i, j, v);
                        }
                    }
                    accumulate(&mut grads, *a, dx)?;
                    accumulate(&mut grads, *gamma, dgamma)?;
                    accumulate(&mut grads, *beta, dbeta)?;
                }
                Op::MeanPoolRows { a } => {
                    let (rows, cols) = self.value(*a).shape();
                    let inv = T::one() / T::from_f64(rows as f64);
                    let mut dx = Matrix::zeros(rows, cols);
                    for i in 0..rows {
                        for (g, &d) in dx.row_mut(i).iter_mut().zip(dy.row(0)) {
                            *g = d * inv;
                        }
                    }
                    accumulate(&mut grads, *a, dx)?;
                }
                Op::ConcatCols { parts } => {
                    let mut offset = 0;
                    for &p in parts {
                        let (pr, pc) = self.value(p).shape();
                        let mut dp = Matrix::zeros(pr, pc);
                        for i in 0..pr {
                            dp.row_mut(i)
                                .copy_from_slice(&dy.row(i)[offset..offset + pc]);
                        }
                        offset += pc;
                        accumulate(&mut grads, p, dp)?;
                    }
                }
                Op::SliceCols { a, start } => {
                    let (ar, ac) = self.value(*a).shape();
                    let width = dy.cols();
                    let mut da = Matrix::zeros(ar, ac);
                    for i in 0..ar {
                        da.row_mut(i)[*start..*start + width].copy_from_slice(dy.row(i));
                    }
                    accumulate(&mut grads, *a, da)?;
                }
                Op::ConcatRows { parts } => {
                    let mut offset = 0;
                    for &p in parts {
                        let (pr, pc) = self.value(p).shape();
                        let mut dp = Matrix::zeros(pr, pc);
                        for i in 0..pr {
                            dp.row_mut(i).copy_from_slice(dy.row(offset + i));
                        }
                        offset += pr;
                        accumulate(&mut grads, p, dp)?;
                    }
                }
                Op::NegLogLikelihood { probs, targets } => {
                    let p = self.value(*probs);
                    let lo = T::from_f64(PROB_CLAMP);
                    let hi = T::one() - lo;
                    let scale = dy.get(0, 0) / T::from_f64(targets.len() as f64);
                    let mut dp = Matrix::zeros(p.rows(), p.cols());
                    for (i, &t) in targets.iter().enumerate() {
                        let v = p.get(i, t);
                        // Clamp saturation means zero slope, matching forward.
                        if v > lo && v < hi {
                            dp.set(i, t, -scale / v);
                        }
                    }
                    accumulate(&mut grads, *probs, dp)?;
                }
                Op::AddWeighted { a, b, wa, wb } => {
                    accumulate(&mut grads, *a, dy.scale(*wa))?;
                    accumulate(&mut grads, *b, dy.scale(*wb))?;
                }
            }
        }
        Ok(Gradients { by_node: grads })
    }

    /// (node, param index) pairs for every parameter leaf on the tape, in
    /// creation order.
    pub fn param_nodes(&self) -> Vec<(NodeId, usize)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(id, n)| match n.op {
                Op::Param { param } => Some((id, param)),
                _ => None,
            })
            .collect()
    }
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients<T> {
    by_node: Vec<Option<Matrix<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, id: NodeId) -> Option<&Matrix<T>> {
        self.by_node.get(id).and_then(|g| g.as_ref())
    }
}

fn accumulate<T: Scalar>(
    grads: &mut [Option<Matrix<T>>],
    id: NodeId,
    delta: Matrix<T>,
) -> Result<(), NumError> {
    match &mut grads[id] {
        Some(existing) => {
            *existing = existing.add(&delta)?;
        }
        slot @ None => *slot = Some(delta),
    }
    Ok(())
}

/// Returns the normalized row and 1/std for layer norm.
fn normalize_row<T: Scalar>(row: &[T]) -> (Vec<T>, T) {
    let n = T::from_f64(row.len() as f64);
    let mut mean = T::zero();
    for &v in row {
        mean = mean + v;
    }
    mean = mean / n;
    let mut var = T::zero();
    for &v in row {
        let d = v - mean;
        var = var + d * d;
    }
    var = var / n;
    let inv_std = T::one() / (var + T::from_f64(LAYER_NORM_EPS)).sqrt();
    (row.iter().map(|&v| (v - mean) * inv_std).collect(), inv_std)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{finite_diff_grad, rel_err, LrGroup, ParamTensor};

    // Finite-difference check of a composite expression touching most ops.
    fn composite_loss(params: &[ParamTensor<f64>]) -> Result<f64, NumError> {
        let mut tape = Tape::new();
        let w = tape.param(0, params[0].value.clone());
        let b = tape.param(1, params[1].value.clone());
        let g = tape.param(2, params[2].value.clone());
        let be = tape.param(3, params[3].value.clone());
        let table = tape.param(4, params[4].value.clone());

        let x = tape.gather_rows(table, &[0, 2, 1, 2])?;
        let normed = tape.layer_norm_rows(x, g, be)?;
        let h = tape.matmul(normed, w)?;
        let h = tape.add_bias_row(h, b)?;
        let h = tape.relu(h);
        let left = tape.slice_cols(h, 0, 2)?;
        let right = tape.slice_cols(h, 2, 2)?;
        let joined = tape.concat_cols(&[right, left])?;
        let c = tape_const(&mut tape);
        let scores = tape.matmul(joined, c)?;
        let probs = tape.softmax_rows(scores, AttnMask::Causal);
        let pooled = tape.mean_pool_rows(joined);
        let pool_probs = tape.softmax_rows(pooled, AttnMask::Full);
        let l1 = tape.neg_log_likelihood(probs, &[0, 1, 0, 2])?;
        let l2 = tape.neg_log_likelihood(pool_probs, &[1])?;
        let loss = tape.add_weighted(l1, l2, 0.3, 0.7)?;
        Ok(tape.scalar(loss))
    }

    fn tape_const(tape: &mut Tape<f64>) -> NodeId {
        let m = Matrix::from_vec(4, 4, (0..16).map(|i| (i as f64) * 0.11 - 0.8).collect()).unwrap();
        tape.constant(m)
    }

    fn composite_params() -> Vec<ParamTensor<f64>> {
        let mut rng = crate::test_rng(11);
        let mut mk = |name: &str, r: usize, c: usize| {
            ParamTensor::new(
                name,
                Matrix::from_fn(r, c, |_, _| rng.next_unit() * 1.6 - 0.8),
                LrGroup::Backbone,
            )
        };
        let w = mk("w", 3, 4);
        let b = mk("b", 1, 4);
        let gamma = mk("gamma", 1, 3);
        let beta = mk("beta", 1, 3);
        let table = mk("table", 3, 3);
        vec![w, b, gamma, beta, table]
    }

    #[test]
    fn backward_matches_finite_differences_on_composite_graph() {
        let mut params = composite_params();

        // Analytic gradients via the tape.
        let mut tape = Tape::new();
        let w = tape.param(0, params[0].value.clone());
        let b = tape.param(1, params[1].value.clone());
        let g = tape.param(2, params[2].value.clone());
        let be = tape.param(3, params[3].value.clone());
        let table = tape.param(4, params[4].value.clone());
        let x = tape.gather_rows(table, &[0, 2, 1, 2]).unwrap();
        let normed = tape.layer_norm_rows(x, g, be).unwrap();
        let h = tape.matmul(normed, w).unwrap();
        let h = tape.add_bias_row(h, b).unwrap();
        let h = tape.relu(h);
        let left = tape.slice_cols(h, 0, 2).unwrap();
        let right = tape.slice_cols(h, 2, 2).unwrap();
        let joined = tape.concat_cols(&[right, left]).unwrap();
        let c = tape_const(&mut tape);
        let scores = tape.matmul(joined, c).unwrap();
        let probs = tape.softmax_rows(scores, AttnMask::Causal);
        let pooled = tape.mean_pool_rows(joined);
        let pool_probs = tape.softmax_rows(pooled, AttnMask::Full);
        let l1 = tape.neg_log_likelihood(probs, &[0, 1, 0, 2]).unwrap();
        let l2 = tape.neg_log_likelihood(pool_probs, &[1]).unwrap();
        let loss = tape.add_weighted(l1, l2, 0.3, 0.7).unwrap();
        let grads = tape.backward(loss).unwrap();

        let numeric = finite_diff_grad(&mut params, 1e-5, composite_loss).unwrap();

        let mut worst = 0.0f64;
        for (node, param) in tape.param_nodes() {
            let analytic = grads.get(node).expect("param reached by backward");
            for (a, n) in analytic.data().iter().zip(numeric[param].data()) {
                worst = worst.max(rel_err(*a, *n));
            }
        }
        assert!(worst < 1e-6, "max relative error {worst}");
    }

    #[test]
    fn causal_softmax_rows_zero_future_entries() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Matrix::from_fn(3, 3, |i, j| (i + j) as f64));
        let y = tape.softmax_rows(x, AttnMask::Causal);
        let v = tape.value(y);
        assert_eq!(v.get(0, 1), 0.0);
        assert_eq!(v.get(0, 2), 0.0);
        assert_eq!(v.get(1, 2), 0.0);
        for i in 0..3 {
            let s: f64 = v.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_param_accumulates_both_uses() {
        // y = w*w on a 1x1 param; dy/dw = 2w through the two uses.
        let mut tape = Tape::<f64>::new();
        let w = tape.param(0, Matrix::from_vec(1, 1, vec![3.0]).unwrap());
        let y = tape.matmul(w, w).unwrap();
        let loss = tape.add_weighted(y, y, 0.5, 0.5).unwrap();
        let grads = tape.backward(loss).unwrap();
        let gw = grads.get(w).unwrap();
        assert!((gw.get(0, 0) - 6.0).abs() < 1e-12);
    }
}
