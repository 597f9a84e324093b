//! Thin wrappers over `faer` for the dense factorizations used throughout.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::sparse::{SparseRowMat, Triplet};
use faer::{Col, Mat, MatRef, Par, Side};

use crate::error::{Error, Result};

pub type Sparse = SparseRowMat<usize, f64>;

pub fn sparse_from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Sparse {
    let t: Vec<Triplet<usize, usize, f64>> =
        entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
    // Triplets are built in range by every caller, duplicates are summed.
    SparseRowMat::try_new_from_triplets(nrows, ncols, &t).expect("triplets in range")
}

pub fn sparse_matvec(a: &Sparse, x: &[f64]) -> Vec<f64> {
    let col = Col::<f64>::from_fn(x.len(), |i| x[i]);
    let y = a * &col;
    y.iter().copied().collect()
}

pub fn matvec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.ncols(), x.len());
    let mut y = vec![0.0; a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        let cj = a.col(j);
        for (yi, aij) in y.iter_mut().zip(cj.iter()) {
            *yi += aij * xj;
        }
    }
    y
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `xᵀ A y` for a dense form.
pub fn form(a: MatRef<'_, f64>, x: &[f64], y: &[f64]) -> f64 {
    dot(x, &matvec(a, y))
}

pub fn col_vec(a: MatRef<'_, f64>, j: usize) -> Vec<f64> {
    a.col(j).iter().copied().collect()
}

pub fn mat_from_cols(nrows: usize, cols: &[Vec<f64>]) -> Mat<f64> {
    Mat::from_fn(nrows, cols.len(), |i, j| cols[j][i])
}

pub fn frobenius(a: MatRef<'_, f64>) -> f64 {
    a.norm_l2()
}

/// Relative asymmetry ‖A − Aᵀ‖_F / ‖A‖_F (0 for the zero matrix).
pub fn asymmetry(a: MatRef<'_, f64>) -> f64 {
    let n = a.nrows();
    let mut num = 0.0;
    for j in 0..n {
        for i in 0..n {
            let d = a[(i, j)] - a[(j, i)];
            num += d * d;
        }
    }
    let den = frobenius(a);
    if den == 0.0 {
        0.0
    } else {
        num.sqrt() / den
    }
}

pub fn symmetrize(a: MatRef<'_, f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.
pub fn sym_eigen(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    if a.nrows() == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let s = symmetrize(a);
    let evd = s
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolve: {e:?}")))?;
    let vals = evd.S().column_vector().iter().copied().collect();
    Ok((vals, evd.U().to_owned()))
}

pub fn sym_eigenvalues(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    symmetrize(a)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolve: {e:?}")))
}

/// Lower Cholesky factor C with G = C Cᵀ.
pub fn cholesky(g: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let llt = symmetrize(g)
        .llt(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Gram matrix not positive definite: {e:?}")))?;
    Ok(llt.L().to_owned())
}

/// Solves C X = B in place for lower-triangular C.
pub fn lower_solve(c: MatRef<'_, f64>, b: &mut Mat<f64>) {
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(c, b.as_mut(), Par::Seq);
}

/// Solves Cᵀ X = B in place for lower-triangular C.
pub fn lower_transpose_solve(c: MatRef<'_, f64>, b: &mut Mat<f64>) {
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(
        c.transpose(),
        b.as_mut(),
        Par::Seq,
    );
}

/// C⁻¹ A C⁻ᵀ for a symmetric A and lower-triangular C.
pub fn congruence_inverse(c: MatRef<'_, f64>, a: MatRef<'_, f64>) -> Mat<f64> {
    let mut t = a.to_owned();
    lower_solve(c, &mut t);
    let mut tt = t.transpose().to_owned();
    lower_solve(c, &mut tt);
    symmetrize(tt.as_ref())
}

/// Generalized symmetric-definite eigenproblem L x = λ G x.
/// Eigenvectors are G-orthonormal.
pub fn gen_sym_eigen(l: MatRef<'_, f64>, g: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let c = cholesky(g)?;
    let t = congruence_inverse(c.as_ref(), l);
    let (vals, mut y) = sym_eigen(t.as_ref())?;
    lower_transpose_solve(c.as_ref(), &mut y);
    Ok((vals, y))
}

pub fn solve(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    a.partial_piv_lu().solve(b)
}

pub fn inverse(a: MatRef<'_, f64>) -> Mat<f64> {
    a.partial_piv_lu().inverse()
}

pub struct ThinSvd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

pub fn thin_svd(a: MatRef<'_, f64>) -> Result<ThinSvd> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(ThinSvd {
            u: Mat::zeros(a.nrows(), 0),
            s: Vec::new(),
            v: Mat::zeros(a.ncols(), 0),
        });
    }
    let svd = a
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD: {e:?}")))?;
    Ok(ThinSvd {
        u: svd.U().to_owned(),
        s: svd.S().column_vector().iter().copied().collect(),
        v: svd.V().to_owned(),
    })
}

/// Complex eigenvalues of a general real matrix as (re, im) pairs.
pub fn general_eigenvalues(a: MatRef<'_, f64>) -> Result<Vec<(f64, f64)>> {
    let ev = a
        .to_owned()
        .eigenvalues()
        .map_err(|e| Error::Numerical(format!("general eigensolve: {e:?}")))?;
    Ok(ev.iter().map(|z| (z.re, z.im)).collect())
}

pub fn block_diag(blocks: &[MatRef<'_, f64>]) -> Mat<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let m: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(n, m);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        for j in 0..b.ncols() {
            for i in 0..b.nrows() {
                out[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
        r0 += b.nrows();
        c0 += b.ncols();
    }
    out
}

pub fn diag(values: &[f64]) -> Mat<f64> {
    Mat::from_fn(values.len(), values.len(), |i, j| if i == j { values[i] } else { 0.0 })
}

/// Least-squares slope and intercept of y against x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

pub fn sparse_to_dense(a: &Sparse) -> Mat<f64> {
    let r = a.as_ref();
    let sym = r.symbolic();
    let mut out = Mat::zeros(a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        for k in sym.row_range(i) {
            out[(i, sym.col_idx()[k])] += r.val()[k];
        }
    }
    out
}

/// Maximum absolute row sum.
pub fn norm_inf(a: MatRef<'_, f64>) -> f64 {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Orthonormalizes the columns in place (modified Gram–Schmidt, two passes).
pub fn orthonormalize(v: &mut Mat<f64>) {
    for j in 0..v.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let d: f64 = (0..v.nrows()).map(|r| v[(r, i)] * v[(r, j)]).sum();
                for r in 0..v.nrows() {
                    let vi = v[(r, i)];
                    v[(r, j)] -= d * vi;
                }
            }
        }
        let n: f64 = (0..v.nrows()).map(|r| v[(r, j)] * v[(r, j)]).sum::<f64>().sqrt();
        if n > 0.0 {
            for r in 0..v.nrows() {
                v[(r, j)] /= n;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generalized_eigen_matches_scaled_problem() {
        let l = Mat::from_fn(3, 3, |i, j| if i == j { [2.0, -1.0, 4.0][i] } else { 0.0 });
        let g = diag(&[1.0, 2.0, 4.0]);
        let (vals, vecs) = gen_sym_eigen(l.as_ref(), g.as_ref()).unwrap();
        assert!((vals[0] + 0.5).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
        assert!((vals[2] - 2.0).abs() < 1e-14);
        let gram = vecs.transpose() * &g * &vecs;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|t| 3.0 * t - 1.0).collect();
        let (s, c) = linear_fit(&x, &y);
        assert!((s - 3.0).abs() < 1e-12 && (c + 1.0).abs() < 1e-12);
    }
}
