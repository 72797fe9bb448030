use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::network::VotingMatrix;

pub fn one_hot(label: usize, num_classes: usize) -> Array1<f64> {
    let mut y = Array1::zeros(num_classes);
    y[label] = 1.0;
    y
}

fn check_target(y: &Array1<f64>, voting: &VotingMatrix) -> Result<()> {
    if y.len() != voting.num_classes() {
        return Err(Error::ShapeMismatch(format!(
            "target has {} classes, voting matrix {}",
            y.len(),
            voting.num_classes()
        )));
    }
    Ok(())
}

/// Squared distance between `y` and the time-averaged votes, `|| y - (1/T) sum_t U o^t ||^2`.
pub fn loss(outputs: ArrayView2<'_, f64>, voting: &VotingMatrix, y: &Array1<f64>) -> Result<f64> {
    check_target(y, voting)?;
    let scores = voting.scores(outputs)?;
    Ok((y - &scores).mapv(|d| d * d).sum())
}

/// Loss and its gradient with respect to every output spike, `(2/T) U^T (s - y)` per timestep.
pub fn loss_with_grad(
    outputs: ArrayView2<'_, f64>,
    voting: &VotingMatrix,
    y: &Array1<f64>,
) -> Result<(f64, Array2<f64>)> {
    check_target(y, voting)?;
    let scores = voting.scores(outputs)?;
    let diff = &scores - y;
    let value = diff.mapv(|d| d * d).sum();
    let steps = outputs.nrows();
    let per_step = voting.matrix().t().dot(&diff) * (2.0 / steps as f64);
    let grad = ndarray::Array2::from_shape_fn(outputs.dim(), |(_, j)| per_step[j]);
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        let v = VotingMatrix::new(2, 4).unwrap();
        // perfect votes: class-0 neurons fire every step
        let mut perfect = Array2::zeros((5, 4));
        perfect.column_mut(0).fill(1.0);
        perfect.column_mut(1).fill(1.0);
        assert_eq!(loss(perfect.view(), &v, &one_hot(0, 2)).unwrap(), 0.0);

        assert_eq!(loss(Array2::zeros((5, 4)).view(), &v, &one_hot(1, 2)).unwrap(), 1.0);

        let mut o = Array2::zeros((10, 4));
        o.column_mut(0).fill(1.0);
        for t in 0..3 {
            o[[t, 2]] = 1.0;
        }
        o[[0, 3]] = 1.0;
        let l = loss(o.view(), &v, &one_hot(0, 2)).unwrap();
        assert!((l - 0.29).abs() < 1e-15, "{l}");
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let v = VotingMatrix::new(3, 6).unwrap();
        let o = Array2::from_shape_fn((4, 6), |(t, j)| ((t * 5 + j * 3) % 7) as f64 / 7.0);
        let y = one_hot(1, 3);
        let (l, g) = loss_with_grad(o.view(), &v, &y).unwrap();
        assert_eq!(l, loss(o.view(), &v, &y).unwrap());
        let h = 1e-6;
        for ((t, j), &gij) in g.indexed_iter() {
            let (mut up, mut down) = (o.clone(), o.clone());
            up[[t, j]] += h;
            down[[t, j]] -= h;
            let fd = (loss(up.view(), &v, &y).unwrap() - loss(down.view(), &v, &y).unwrap()) / (2.0 * h);
            assert!((fd - gij).abs() < 1e-8, "({t},{j}) {fd} vs {gij}");
        }
    }

    #[test]
    fn wrong_target_length() {
        let v = VotingMatrix::new(2, 4).unwrap();
        assert!(loss(Array2::zeros((2, 4)).view(), &v, &one_hot(0, 3)).is_err());
    }
}
