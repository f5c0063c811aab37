//! Graph convolution over the encoded sequence and residual fusion.
//!
//! Each layer computes ReLU(A_tilde * G * W); fusion adds the final layer
//! output back onto the encoder output. With the graph ablated the pipeline
//! skips this module entirely and reuses the encoder output unchanged.

use crate::autodiff::{NodeId, Tape};
use crate::numcore::{Matrix, NumError, Scalar};

/// GCN stack on an existing tape: h is S x D, a_tilde S x S, one weight
/// node per layer.
pub(crate) fn gcn_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    h: NodeId,
    a_tilde: NodeId,
    weights: &[NodeId],
) -> Result<NodeId, NumError> {
    let mut g = h;
    for &w in weights {
        let mixed = tape.matmul(a_tilde, g)?;
        let projected = tape.matmul(mixed, w)?;
        g = tape.relu(projected);
    }
    Ok(g)
}

/// G_L = ReLU(A_tilde * ... * ReLU(A_tilde * H * W_1) ... * W_L).
pub fn gcn_forward<T: Scalar>(
    h: &Matrix<T>,
    a_tilde: &Matrix<T>,
    weights: &[Matrix<T>],
) -> Result<Matrix<T>, NumError> {
    let mut tape = Tape::new();
    let h_node = tape.constant(h.clone());
    let a_node = tape.constant(a_tilde.clone());
    let w_nodes: Vec<NodeId> = weights.iter().map(|w| tape.constant(w.clone())).collect();
    let out = gcn_on_tape(&mut tape, h_node, a_node, &w_nodes)?;
    Ok(tape.value(out).clone())
}

/// Residual fusion Z = H + G_L.
pub fn fuse<T: Scalar>(h: &Matrix<T>, g_l: &Matrix<T>) -> Result<Matrix<T>, NumError> {
    h.add(g_l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_adjacency_and_weights_pass_nonnegative_h_through() {
        let h = Matrix::from_vec(3, 2, vec![0.0, 1.0, 2.0, 0.5, 0.25, 3.0]).unwrap();
        let id3 = Matrix::identity(3);
        let id2 = Matrix::identity(2);
        let out = gcn_forward(&h, &id3, &[id2.clone(), id2]).unwrap();
        assert_eq!(out, h);
    }

    #[test]
    fn zero_h_stays_zero() {
        let h = Matrix::<f64>::zeros(4, 3);
        let mut rng = crate::test_rng(2);
        let a = Matrix::from_fn(4, 4, |_, _| rng.next_unit());
        let w = Matrix::from_fn(3, 3, |_, _| rng.next_unit() - 0.5);
        let out = gcn_forward(&h, &a, &[w]).unwrap();
        assert_eq!(out, h);
    }

    #[test]
    fn two_layer_forward_matches_loop_oracle() {
        let mut rng = crate::test_rng(31);
        let h = Matrix::from_fn(4, 3, |_, _| rng.next_unit() * 2.0 - 1.0);
        let a = Matrix::from_fn(4, 4, |_, _| rng.next_unit());
        let w1 = Matrix::from_fn(3, 3, |_, _| rng.next_unit() - 0.5);
        let w2 = Matrix::from_fn(3, 3, |_, _| rng.next_unit() - 0.5);
        let got = gcn_forward(&h, &a, &[w1.clone(), w2.clone()]).unwrap();

        // Independent step-by-step evaluation.
        let step = |g: &Matrix<f64>, w: &Matrix<f64>| -> Matrix<f64> {
            let mut out = Matrix::zeros(4, 3);
            for i in 0..4 {
                for j in 0..3 {
                    let mut acc = 0.0;
                    for k in 0..4 {
                        let mut inner = 0.0;
                        for l in 0..3 {
                            inner += g.get(k, l) * w.get(l, j);
                        }
                        acc += a.get(i, k) * inner;
                    }
                    out.set(i, j, acc.max(0.0));
                }
            }
            out
        };
        let expected = step(&step(&h, &w1), &w2);
        for i in 0..4 {
            for j in 0..3 {
                assert!((got.get(i, j) - expected.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_a_dimension_error() {
        let h = Matrix::<f64>::zeros(3, 2);
        let a = Matrix::<f64>::zeros(4, 4);
        let w = Matrix::<f64>::zeros(2, 2);
        assert!(gcn_forward(&h, &a, &[w]).is_err());
    }

    #[test]
    fn fuse_is_elementwise_sum() {
        let mut rng = crate::test_rng(5);
        let h = Matrix::from_fn(3, 2, |_, _| rng.next_unit());
        let g = Matrix::from_fn(3, 2, |_, _| rng.next_unit());
        let z = fuse(&h, &g).unwrap();
        let diff = z.sub(&h).unwrap();
        for (a, b) in diff.data().iter().zip(g.data()) {
            assert!((a - b).abs() < 1e-15);
        }
        // Additive identities hold bitwise.
        let zero = Matrix::<f64>::zeros(3, 2);
        assert_eq!(fuse(&h, &zero).unwrap(), h);
        assert_eq!(fuse(&zero, &g).unwrap(), g);
    }

    #[test]
    fn relu_output_is_nonnegative() {
        let mut rng = crate::test_rng(77);
        let h = Matrix::from_fn(5, 4, |_, _| rng.next_unit() * 4.0 - 2.0);
        let a = Matrix::from_fn(5, 5, |_, _| rng.next_unit() - 0.5);
        let w = Matrix::from_fn(4, 4, |_, _| rng.next_unit() - 0.5);
        let out = gcn_forward(&h, &a, &[w]).unwrap();
        assert!(out.data().iter().all(|&v| v >= 0.0));
    }
}
