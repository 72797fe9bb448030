use ndarray::Array2;

/// `D^-1/2 A D^-1/2` for the binary symmetric adjacency of `edges`, without self-loops.
///
/// Isolated nodes get zero rows and columns (their inverse square-root degree is taken as 0).
pub fn normalize_adjacency(edges: &[(usize, usize)], num_nodes: usize) -> Array2<f64> {
    let mut raw = Array2::<f64>::zeros((num_nodes, num_nodes));
    for &(i, j) in edges {
        raw[[i, j]] = 1.0;
        raw[[j, i]] = 1.0;
    }
    let inv_sqrt: Vec<f64> = raw
        .rows()
        .into_iter()
        .map(|row| {
            let deg = row.sum();
            if deg > 0.0 {
                1.0 / deg.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    raw.indexed_iter_mut().for_each(|((i, j), v)| *v *= inv_sqrt[i] * inv_sqrt[j]);
    raw
}

/// `[I, A, A^2, ..., A^hops]` by repeated multiplication.
pub fn adjacency_powers(matrix: &Array2<f64>, hops: usize) -> Vec<Array2<f64>> {
    let n = matrix.nrows();
    let mut powers = Vec::with_capacity(hops + 1);
    powers.push(Array2::eye(n));
    for k in 1..=hops {
        let next = powers[k - 1].dot(matrix);
        powers.push(next);
    }
    powers
}
