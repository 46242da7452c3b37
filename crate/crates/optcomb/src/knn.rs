//! Euclidean k-nearest-neighbor voting on ±1 labels. Neighbors are ordered by
//! (distance, training index) so predictions are deterministic even with
//! duplicated points; vote ties resolve to +1.

use crate::Matrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KnnError {
    #[error("k={k} out of range 1..=N (N={n})")]
    KOutOfRange { k: usize, n: usize },
}

/// Squared Euclidean distance (monotone in the true distance, so ordering is
/// unchanged and we skip the square root).
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Predict the label of `query` by majority vote among its `k` nearest
/// training points. A tied vote returns +1.
pub fn knn_predict(
    train_x: &Matrix,
    train_t: &[i8],
    query: &[f64],
    k: usize,
) -> Result<i8, KnnError> {
    let n = train_x.rows();
    assert_eq!(n, train_t.len(), "feature/target count mismatch");
    assert_eq!(train_x.cols(), query.len(), "query dimension mismatch");
    if k == 0 || k > n {
        return Err(KnnError::KOutOfRange { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        dist2(train_x.row(i), query).total_cmp(&dist2(train_x.row(j), query)).then(i.cmp(&j))
    });
    let vote: i32 = order[..k].iter().map(|&i| i32::from(train_t[i])).sum();
    Ok(if vote >= 0 { 1 } else { -1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid4() -> (Matrix, Vec<i8>) {
        let x =
            Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        (x, vec![-1, 1, 1, -1])
    }

    #[test]
    fn one_nn_returns_nearest_label() {
        let (x, t) = grid4();
        assert_eq!(knn_predict(&x, &t, &[0.1, 0.1], 1).unwrap(), -1);
        assert_eq!(knn_predict(&x, &t, &[0.9, 0.1], 1).unwrap(), 1);
    }

    #[test]
    fn tied_vote_resolves_to_positive() {
        let (x, t) = grid4();
        // All four corners equidistant from the center: vote is 0 -> +1.
        assert_eq!(knn_predict(&x, &t, &[0.5, 0.5], 4).unwrap(), 1);
    }

    #[test]
    fn equal_distances_break_by_training_index() {
        // Two coincident training points with opposite labels: 1-NN must pick
        // the lower index deterministically.
        let x = Matrix::from_rows(&[vec![0.0], vec![0.0]]);
        assert_eq!(knn_predict(&x, &[-1, 1], &[0.0], 1).unwrap(), -1);
        assert_eq!(knn_predict(&x, &[1, -1], &[0.0], 1).unwrap(), 1);
    }

    #[test]
    fn full_vote_is_majority_label() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]);
        assert_eq!(knn_predict(&x, &[1, 1, -1], &[10.0], 3).unwrap(), 1);
    }

    #[test]
    fn k_out_of_range_is_rejected() {
        let (x, t) = grid4();
        assert!(matches!(
            knn_predict(&x, &t, &[0.0, 0.0], 0),
            Err(KnnError::KOutOfRange { k: 0, n: 4 })
        ));
        assert!(matches!(
            knn_predict(&x, &t, &[0.0, 0.0], 5),
            Err(KnnError::KOutOfRange { k: 5, n: 4 })
        ));
    }
}
