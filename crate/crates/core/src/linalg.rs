//! Dense complex linear algebra used fiber by fiber.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn real_diag(values: &[f64]) -> CMat {
    let mut m = zeros(values.len(), values.len());
    for (i, v) in values.iter().enumerate() {
        m[(i, i)] = c(*v, 0.0);
    }
    m
}

/// Largest absolute entry; cheap scale estimate for tolerances.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    hermitian_eigen(m).0
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (values, vectors) = hermitian_eigen(m);
    let mapped: Vec<f64> = values.iter().map(|&v| f(v)).collect();
    &vectors * real_diag(&mapped) * vectors.adjoint()
}

/// Singular value decomposition split at a relative tolerance.
///
/// Columns of `coimage`/`image` pair up with `values`; `kernel` and
/// `cokernel` complete them to orthonormal bases.
#[derive(Clone, Debug)]
pub struct Ranges {
    pub values: Vec<f64>,
    pub coimage: CMat,
    pub image: CMat,
    pub kernel: CMat,
    pub cokernel: CMat,
}

impl Ranges {
    pub fn rank(&self) -> usize {
        self.values.len()
    }
}

pub fn ranges(m: &CMat, rel_tol: f64) -> Ranges {
    ranges_by(m, |top| rel_tol * top)
}

/// As [`ranges`], keeping singular values above an absolute threshold.
pub fn ranges_abs(m: &CMat, threshold: f64) -> Ranges {
    ranges_by(m, |_| threshold)
}

fn ranges_by(m: &CMat, threshold: impl Fn(f64) -> f64) -> Ranges {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ranges {
            values: Vec::new(),
            coimage: zeros(cols, 0),
            image: zeros(rows, 0),
            kernel: eye(cols),
            cokernel: eye(rows),
        };
    }
    let (u, sv, v) = full_svd(m);
    let top = sv.first().copied().unwrap_or(0.0);
    let cut = threshold(top);
    let r = sv.iter().take_while(|&&s| s > cut && s > 0.0).count();
    let values = sv[..r].to_vec();
    let image = u.columns(0, r).into_owned();
    let cokernel = u.columns(r, rows - r).into_owned();
    let coimage = v.columns(0, r).into_owned();
    let kernel = v.columns(r, cols - r).into_owned();
    Ranges { values, coimage, image, kernel, cokernel }
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = to_faer(m).singular_values().expect("svd converges");
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn to_faer(m: &CMat) -> faer::Mat<faer::c64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, faer::c64>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Full SVD `m = U diag(s) V^H` with descending `s`. nalgebra's complex SVD
/// can return inaccurate vectors for rank-deficient wide inputs, so vectors
/// come from faer.
fn full_svd(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let svd = to_faer(m).svd().expect("svd converges");
    let s = svd.S().column_vector();
    let values: Vec<f64> = (0..s.nrows()).map(|k| s[k].re).collect();
    (from_faer(svd.U()), values, from_faer(svd.V()))
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns `q` inside C^n.
pub fn complement(q: &CMat, n: usize) -> CMat {
    let k = q.ncols();
    if k == 0 {
        return eye(n);
    }
    if k >= n {
        return zeros(n, 0);
    }
    let proj = eye(n) - q * q.adjoint();
    let (values, vectors) = hermitian_eigen(&proj);
    let mut out = zeros(n, n - k);
    // eigenvalues are ~0 (k of them) then ~1 (n-k of them)
    for j in 0..(n - k) {
        let src = k + j;
        debug_assert!(values[src] > 0.5);
        out.set_column(j, &vectors.column(src));
    }
    out
}

/// Orthonormalizes the columns of `m` (thin, rank-revealing).
pub fn orthonormal_columns(m: &CMat, rel_tol: f64) -> CMat {
    ranges(m, rel_tol).image
}

/// log |det| of a square matrix through its singular values.
pub fn log_abs_det(m: &CMat) -> f64 {
    singular_values(m).iter().map(|s| s.ln()).sum()
}

pub fn pseudo_inverse(m: &CMat, rel_tol: f64) -> CMat {
    let r = ranges(m, rel_tol);
    let inv: Vec<f64> = r.values.iter().map(|s| 1.0 / s).collect();
    &r.coimage * real_diag(&inv) * r.image.adjoint()
}

pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let mut m = zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    m
}

pub fn hstack(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.nrows(), b.nrows());
    let mut m = zeros(a.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    m
}

pub fn vstack(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.ncols());
    let mut m = zeros(a.nrows() + b.nrows(), a.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    m
}
