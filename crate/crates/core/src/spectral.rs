//! Rank-G spectral projection of a data matrix.
//!
//! For `X = U S V'` the embedding is `Y = X * V_G`, where `V_G` holds the
//! first `G` right singular vectors. Small matrices go through a dense SVD;
//! larger ones through the eigen-decomposition of the smaller Gram matrix,
//! which yields the same top-G subspace without materialising `U`.

use nalgebra::{DVector, SVD};

use crate::error::{Error, Result};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    /// Subtract column means before decomposing. Off by default: the raw
    /// data matrix is decomposed as-is.
    pub center: bool,
    /// Matrices whose rows and columns both fit within this bound use a
    /// dense SVD; anything larger takes the thin Gram route.
    pub dense_svd_max_dim: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            center: false,
            dense_svd_max_dim: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    /// `n x G` projected data.
    pub embedded: Matrix,
    /// `p x G`, orthonormal columns.
    pub basis: Matrix,
    /// Top-G singular values, non-increasing.
    pub singular_values: DVector<f64>,
    /// Column means removed before projection, when centering is on.
    pub offset: Option<DVector<f64>>,
}

impl SpectralEmbedding {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Projects other rows (same column layout as the decomposed data) into
    /// this embedding.
    pub fn project(&self, data: &Matrix) -> Result<Matrix> {
        if data.ncols() != self.basis.nrows() {
            return Err(Error::Dimension(format!(
                "cannot project {} columns onto a basis for {} columns",
                data.ncols(),
                self.basis.nrows()
            )));
        }
        Ok(match &self.offset {
            Some(mean) => centered(data, mean) * &self.basis,
            None => data * &self.basis,
        })
    }
}

pub fn spectral_transform(data: &Matrix, num_groups: usize) -> Result<SpectralEmbedding> {
    spectral_transform_with(data, num_groups, &SpectralOptions::default())
}

pub fn spectral_transform_with(
    data: &Matrix,
    num_groups: usize,
    options: &SpectralOptions,
) -> Result<SpectralEmbedding> {
    let (n, p) = data.shape();
    if num_groups == 0 || num_groups > n.min(p) {
        return Err(Error::Dimension(format!(
            "rank {num_groups} requested for a {n}x{p} matrix"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("data matrix has non-finite entries".into()));
    }

    let offset = options.center.then(|| column_means(data));
    let work = match &offset {
        Some(mean) => centered(data, mean),
        None => data.clone(),
    };

    let (mut basis, singular_values) = if n.max(p) <= options.dense_svd_max_dim {
        dense_top_right_vectors(&work, num_groups)?
    } else {
        gram_top_right_vectors(&work, num_groups)
    };
    fix_signs(&mut basis);

    let embedded = &work * &basis;
    Ok(SpectralEmbedding {
        embedded,
        basis,
        singular_values,
        offset,
    })
}

fn dense_top_right_vectors(x: &Matrix, g: usize) -> Result<(Matrix, DVector<f64>)> {
    let svd = SVD::try_new(x.clone(), false, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD returned no right singular vectors".into()))?;
    let order = descending_order(svd.singular_values.as_slice());
    let p = x.ncols();
    let mut basis = Matrix::zeros(p, g);
    let mut values = DVector::zeros(g);
    for (col, &idx) in order.iter().take(g).enumerate() {
        values[col] = svd.singular_values[idx];
        for row in 0..p {
            basis[(row, col)] = v_t[(idx, row)];
        }
    }
    Ok((basis, values))
}

/// Top-G right singular vectors from the eigenvectors of `X'X` (when `p <= n`)
/// or from `X' u / s` with `u` eigenvectors of `XX'` (when `n < p`).
fn gram_top_right_vectors(x: &Matrix, g: usize) -> (Matrix, DVector<f64>) {
    let (n, p) = x.shape();
    if p <= n {
        let (vectors, values) = top_eigenpairs(x.transpose() * x, g);
        (vectors, values.map(|v| v.max(0.0).sqrt()))
    } else {
        let (left, values) = top_eigenpairs(x * x.transpose(), g);
        let mut basis = Matrix::zeros(p, g);
        for col in 0..g {
            let mut v = x.transpose() * left.column(col);
            let norm = v.norm();
            if norm > 0.0 {
                v /= norm;
            }
            basis.set_column(col, &v);
        }
        (basis, values.map(|v| v.max(0.0).sqrt()))
    }
}

/// Leading `g` eigenpairs of a symmetric matrix: all eigenvalues by
/// implicit QR, then eigenvectors for the top `g` only by shifted inverse
/// iteration, orthogonalised against the vectors already found.
fn top_eigenpairs(sym: Matrix, g: usize) -> (Matrix, DVector<f64>) {
    let m = sym.nrows();
    let all = sym.clone().symmetric_eigenvalues();
    let order = descending_order(all.as_slice());
    let scale = all.amax().max(f64::MIN_POSITIVE);
    let mut vectors = Matrix::zeros(m, g);
    let mut values = DVector::zeros(g);
    for k in 0..g {
        let lambda = all[order[k]];
        values[k] = lambda;
        let mut v = DVector::from_fn(m, |i, _| 1.0 + (i as f64 + 1.0).sqrt().fract());
        orthonormalize(&mut v, &vectors, k);
        let mut offset = 1e-10 * scale;
        'shift: loop {
            let mut shifted = sym.clone();
            for i in 0..m {
                shifted[(i, i)] -= lambda + offset;
            }
            let lu = shifted.lu();
            let mut candidate = v.clone();
            for _ in 0..4 {
                match lu.solve(&candidate) {
                    Some(mut w) if w.iter().all(|x| x.is_finite()) => {
                        orthonormalize(&mut w, &vectors, k);
                        candidate = w;
                    }
                    _ => {
                        offset *= 10.0;
                        continue 'shift;
                    }
                }
            }
            v = candidate;
            break;
        }
        vectors.set_column(k, &v);
    }
    (vectors, values)
}

/// Removes the components along the first `k` columns of `basis`, then
/// normalises.
fn orthonormalize(v: &mut DVector<f64>, basis: &Matrix, k: usize) {
    for _ in 0..2 {
        for j in 0..k {
            let c = basis.column(j).dot(v);
            v.axpy(-c, &basis.column(j), 1.0);
        }
    }
    let norm = v.norm();
    if norm > 0.0 {
        *v /= norm;
    }
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Flips each column so that its entry of largest magnitude is positive.
/// Ties go to the lowest row index.
pub(crate) fn fix_signs(basis: &mut Matrix) {
    for mut col in basis.column_iter_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

fn column_means(data: &Matrix) -> DVector<f64> {
    let n = data.nrows() as f64;
    DVector::from_iterator(data.ncols(), data.column_iter().map(|c| c.sum() / n))
}

fn centered(data: &Matrix, mean: &DVector<f64>) -> Matrix {
    let mut out = data.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    out
}
