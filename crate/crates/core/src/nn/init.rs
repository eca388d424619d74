use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{real, Real, Tensor};

/// A `[rows, cols]` matrix with orthonormal columns (if `rows >= cols`) or
/// orthonormal rows, from Gram-Schmidt on a Gaussian sample.
pub fn init_orthonormal<T: Real>(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor<T> {
    let (n, k) = if rows >= cols {
        (rows, cols)
    } else {
        (cols, rows)
    };
    // k vectors of length n
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        // two passes keep the result orthogonal to working precision
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= dot * y;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    let mut data = vec![T::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let x = if rows >= cols {
                basis[c][r]
            } else {
                basis[r][c]
            };
            data[r * cols + c] = real(x);
        }
    }
    Tensor {
        shape: vec![rows, cols],
        data,
    }
}

/// Uniform in `±sqrt(6 / (rows + cols))`.
pub fn init_glorot<T: Real>(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor<T> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| real(rng.random_range(-limit..limit)))
        .collect();
    Tensor {
        shape: vec![rows, cols],
        data,
    }
}

pub fn init_normal<T: Real>(shape: &[usize], std: f64, rng: &mut impl Rng) -> Tensor<T> {
    let data = (0..shape.iter().product())
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            real(z * std)
        })
        .collect();
    Tensor {
        shape: shape.to_vec(),
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gram(t: &Tensor<f64>, by_columns: bool) -> Vec<Vec<f64>> {
        let (rows, cols) = (t.shape[0], t.shape[1]);
        let k = if by_columns { cols } else { rows };
        let at = |i: usize, j: usize| {
            if by_columns {
                t.data[j * cols + i]
            } else {
                t.data[i * cols + j]
            }
        };
        let n = if by_columns { rows } else { cols };
        (0..k)
            .map(|a| {
                (0..k)
                    .map(|b| (0..n).map(|j| at(a, j) * at(b, j)).sum())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn orthonormal_square_and_rectangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (rows, cols, by_columns) in [(4, 4, true), (6, 3, true), (3, 7, false)] {
            let q: Tensor<f64> = init_orthonormal(rows, cols, &mut rng);
            for (i, row) in gram(&q, by_columns).iter().enumerate() {
                for (j, &x) in row.iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((x - expected).abs() < 1e-5, "{rows}x{cols} ({i},{j}) = {x}");
                }
            }
        }
    }
}
