//! Dense symmetric eigensolver and small linear solves.
//!
//! Thin bridge from `ndarray` storage to `nalgebra` factorizations.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending,
/// eigenvectors as columns.
pub fn eigh(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    let sym = (a + &a.t()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(to_na(&sym));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = Array1::from_iter(order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vecs = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            vecs[[row, col]] = eig.eigenvectors[(row, k)];
        }
    }
    (vals, vecs)
}

/// `S^{-1/2}` by symmetric (Löwdin) orthogonalization.
pub fn inv_sqrt(s: &Array2<f64>, floor: f64, max_condition: f64) -> Result<Array2<f64>> {
    let (vals, vecs) = eigh(s);
    let lo = vals[0];
    let hi = vals[vals.len() - 1];
    if lo <= floor || hi / lo > max_condition {
        return Err(Error::SingularOverlap(if lo > 0.0 { hi / lo } else { f64::INFINITY }));
    }
    let n = s.nrows();
    let mut out = Array2::zeros((n, n));
    for k in 0..n {
        let w = 1.0 / vals[k].sqrt();
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += vecs[[i, k]] * w * vecs[[j, k]];
            }
        }
    }
    Ok(out)
}

/// Solves `a x = b` by LU; `None` when singular.
pub fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let lu = to_na(a).lu();
    let x = lu.solve(&DVector::from_iterator(b.len(), b.iter().copied()))?;
    if x.iter().all(|v| v.is_finite()) {
        Some(Array1::from_iter(x.iter().copied()))
    } else {
        None
    }
}

/// Smallest accepted eigenvalue ratio of the normalized overlap of error
/// differences `e_k − e_newest`; older vectors are discarded until the
/// extrapolation subspace is this well conditioned.
const GRAM_CONDITION: f64 = 1e-12;

/// Commutator-free DIIS extrapolation over flat vectors.
#[derive(Debug, Clone)]
pub struct Diis {
    depth: usize,
    values: Vec<Vec<f64>>,
    errors: Vec<Vec<f64>>,
}

impl Diis {
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            values: Vec::new(),
            errors: Vec::new(),
        }
    }

    /// Pushes `(value, error)` and returns the extrapolated value.
    pub fn extrapolate(&mut self, value: Vec<f64>, error: Vec<f64>) -> Vec<f64> {
        if self.depth < 2 {
            return value;
        }
        if self.values.len() == self.depth {
            self.values.remove(0);
            self.errors.remove(0);
        }
        self.values.push(value);
        self.errors.push(error);
        loop {
            let m = self.values.len();
            if m < 2 {
                return self.values[m - 1].clone();
            }
            let mut b = Array2::zeros((m + 1, m + 1));
            for i in 0..m {
                for j in 0..=i {
                    let d: f64 = self.errors[i]
                        .iter()
                        .zip(&self.errors[j])
                        .map(|(x, y)| x * y)
                        .sum();
                    b[[i, j]] = d;
                    b[[j, i]] = d;
                }
                b[[i, m]] = -1.0;
                b[[m, i]] = -1.0;
            }
            // scale the error block for conditioning
            let scale = (0..m).map(|i| b[[i, i]]).fold(0.0_f64, f64::max);
            if scale > 0.0 {
                for i in 0..m {
                    for j in 0..m {
                        b[[i, j]] /= scale;
                    }
                }
            }
            let conditioned = {
                let diff = |k: usize| -> Vec<f64> {
                    self.errors[k].iter().zip(&self.errors[m - 1]).map(|(x, y)| x - y).collect()
                };
                let diffs: Vec<Vec<f64>> = (0..m - 1).map(diff).collect();
                let g = Array2::from_shape_fn((m - 1, m - 1), |(i, j)| {
                    diffs[i].iter().zip(&diffs[j]).map(|(x, y)| x * y).sum::<f64>()
                });
                let corr = Array2::from_shape_fn(g.dim(), |(i, j)| g[[i, j]] / (g[[i, i]] * g[[j, j]]).sqrt());
                let (w, _) = eigh(&corr);
                w.iter().all(|x| x.is_finite()) && w[0] > GRAM_CONDITION * w[m - 2]
            };
            let mut rhs = Array1::zeros(m + 1);
            rhs[m] = -1.0;
            match solve(&b, &rhs).filter(|_| conditioned) {
                Some(c) => {
                    let n = self.values[0].len();
                    let mut out = vec![0.0; n];
                    for (k, v) in self.values.iter().enumerate() {
                        for (o, x) in out.iter_mut().zip(v) {
                            *o += c[k] * x;
                        }
                    }
                    return out;
                }
                None => {
                    self.values.remove(0);
                    self.errors.remove(0);
                }
            }
        }
    }
}
