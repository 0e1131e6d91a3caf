//! Complex Hermitian linear algebra and the real embeddings shared by the
//! program builders and the interior-point solver.
//!
//! Three encodings are used throughout the crate:
//!
//! * [`embed`] maps a Hermitian `S` to the real symmetric
//!   `[[Re S, -Im S], [Im S, Re S]]`, which is PSD exactly when `S` is.
//! * [`svec`] packs a real symmetric matrix into `n(n+1)/2` coordinates with
//!   off-diagonals scaled by `sqrt(2)`, so `svec(A) . svec(B) = tr(AB)`.
//! * [`hermitian_norm_vec`] packs a Hermitian matrix into `n^2` reals whose
//!   Euclidean norm equals the Frobenius norm. Second-order cone rows use it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

const HERMITIAN_TOL: f64 = 1e-12;
const SYMMETRIC_TOL: f64 = 1e-10;

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry of `M - M^H`.
pub fn hermitian_asymmetry(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// A square complex matrix that is conjugate-symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMat);

impl HermitianMatrix {
    /// Validates conjugate symmetry (relative tolerance 1e-12) and stores the
    /// exactly symmetrized matrix.
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let asym = hermitian_asymmetry(&m);
        if asym > HERMITIAN_TOL * max_abs(&m).max(1.0) {
            return Err(Error::NotHermitian(asym));
        }
        Ok(Self::symmetrize(m))
    }

    /// `(M + M^H) / 2`, without validation.
    pub fn symmetrize(m: CMat) -> Self {
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        Self(h)
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMat::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMat::identity(n, n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = CMat::zeros(n, n);
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        Self(m)
    }

    /// `scale * v v^H`.
    pub fn outer(v: &CVec, scale: f64) -> Self {
        Self::symmetrize(v * v.adjoint() * C64::new(scale, 0.0))
    }

    pub fn side(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_inner(self) -> CMat {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.side()).map(|i| self.0[(i, i)].re).sum()
    }

    /// `v^H M v`, which is real for Hermitian `M`.
    pub fn quad_form(&self, v: &CVec) -> f64 {
        (v.adjoint() * &self.0 * v)[(0, 0)].re
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * C64::new(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    /// Eigenvalues in ascending order together with the matching unit
    /// eigenvectors (as columns).
    pub fn eigen(&self) -> (Vec<f64>, CMat) {
        let n = self.side();
        if n == 0 {
            return (Vec::new(), CMat::zeros(0, 0));
        }
        let eig = SymmetricEigen::new(self.0.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = CMat::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        (values, vectors)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Fails with [`Error::NotPsd`] when the smallest eigenvalue is below `-tol`.
    pub fn check_psd(&self, tol: f64) -> Result<()> {
        let min = self.min_eigenvalue();
        if min < -tol {
            Err(Error::NotPsd(min))
        } else {
            Ok(())
        }
    }

    /// Principal square root through the eigendecomposition; negative
    /// eigenvalues down to `-reject_tol` are clamped to zero.
    pub fn psd_sqrt(&self, reject_tol: f64) -> Result<Self> {
        let (values, vectors) = self.eigen();
        if let Some(&min) = values.first() {
            if min < -reject_tol {
                return Err(Error::NotPsd(min));
            }
        }
        let roots: Vec<C64> = values
            .iter()
            .map(|&v| C64::new(v.max(0.0).sqrt(), 0.0))
            .collect();
        let d = CMat::from_diagonal(&CVec::from_vec(roots));
        Ok(Self::symmetrize(&vectors * d * vectors.adjoint()))
    }

    /// True when every entry is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| *z == C64::new(0.0, 0.0))
    }
}

/// Real symmetric `2n x 2n` image of a Hermitian `n x n` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSymmetricEmbedding(DMatrix<f64>);

impl RealSymmetricEmbedding {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// `[[Re S, -Im S], [Im S, Re S]]` for an arbitrary complex square matrix.
pub fn embed_matrix(s: &CMat) -> DMatrix<f64> {
    let n = s.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = s[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    out
}

/// Real symmetric embedding of a Hermitian matrix.
pub fn embed(s: &HermitianMatrix) -> RealSymmetricEmbedding {
    RealSymmetricEmbedding(embed_matrix(s.as_matrix()))
}

/// Inverse of [`embed_matrix`] for matrices with the block structure; the
/// two diagonal (and off-diagonal) blocks are averaged.
pub fn unembed(m: &DMatrix<f64>) -> CMat {
    let n = m.nrows() / 2;
    CMat::from_fn(n, n, |i, j| {
        let re = 0.5 * (m[(i, j)] + m[(i + n, j + n)]);
        let im = 0.5 * (m[(i + n, j)] - m[(i, j + n)]);
        C64::new(re, im)
    })
}

/// `I_m (x) Q`: block diagonal with `m` copies of `Q`.
pub fn kron_identity(m: usize, q: &CMat) -> CMat {
    let n = q.nrows();
    let mut out = CMat::zeros(m * n, m * n);
    for b in 0..m {
        out.view_mut((b * n, b * n), (n, n)).copy_from(q);
    }
    out
}

/// Hermitian-preserving form of [`kron_identity`].
pub fn kron_identity_left(m: usize, q: &HermitianMatrix) -> HermitianMatrix {
    HermitianMatrix(kron_identity(m, q.as_matrix()))
}

/// Dimension of svec coordinates for a side-`n` symmetric matrix.
pub const fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Side of the symmetric matrix whose svec has `len` entries.
pub fn svec_side(len: usize) -> Option<usize> {
    let n = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (svec_len(n) == len).then_some(n)
}

/// Packs the lower triangle column by column, off-diagonals times sqrt(2).
pub fn svec(s: &DMatrix<f64>) -> Result<DVector<f64>> {
    if s.nrows() != s.ncols() {
        return Err(Error::Dimension(format!(
            "svec needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let n = s.nrows();
    let mut asym: f64 = 0.0;
    for j in 0..n {
        for i in j + 1..n {
            asym = asym.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if asym > SYMMETRIC_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(DVector::from_vec(svec_unchecked(s)))
}

/// [`svec`] without the symmetry check, reading the lower triangle only.
pub fn svec_unchecked(s: &DMatrix<f64>) -> Vec<f64> {
    let n = s.nrows();
    let mut out = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        out.push(s[(j, j)]);
        for i in j + 1..n {
            out.push(std::f64::consts::SQRT_2 * s[(i, j)]);
        }
    }
    out
}

/// Writes `svec(S)` into `out` without allocating.
pub fn svec_into(s: &DMatrix<f64>, out: &mut [f64]) {
    let n = s.nrows();
    let mut k = 0;
    for j in 0..n {
        out[k] = s[(j, j)];
        k += 1;
        for i in j + 1..n {
            out[k] = std::f64::consts::SQRT_2 * s[(i, j)];
            k += 1;
        }
    }
}

/// Inverse of [`svec`] for a side-`n` matrix.
pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    smat_into(v, &mut m);
    m
}

/// Inverse of [`svec`] into a preallocated square matrix.
pub fn smat_into(v: &[f64], m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let mut k = 0;
    for j in 0..n {
        m[(j, j)] = v[k];
        k += 1;
        for i in j + 1..n {
            let x = inv * v[k];
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
}

/// Real coordinates for a Hermitian matrix whose Euclidean norm equals the
/// Frobenius norm: diagonal entries, then `sqrt(2) Re`, `sqrt(2) Im` of each
/// strictly-upper entry (row-major).
pub fn hermitian_norm_vec(m: &CMat) -> Vec<f64> {
    let n = m.nrows();
    let r2 = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.push(m[(i, i)].re);
    }
    for i in 0..n {
        for j in i + 1..n {
            out.push(r2 * m[(i, j)].re);
            out.push(r2 * m[(i, j)].im);
        }
    }
    out
}

/// `(Re v_0, Im v_0, Re v_1, ...)`.
pub fn complex_interleaved(v: &CVec) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// Number of real coordinates of a side-`n` Hermitian matrix.
pub const fn hermitian_dim(n: usize) -> usize {
    n * n
}

/// The `k`-th element of the real basis of `n x n` Hermitian matrices used
/// for the transmit covariance variable: `n` diagonal units, then for each
/// strictly-upper `(i, j)` in row-major order a real symmetric pair and an
/// imaginary antisymmetric pair.
pub fn hermitian_basis(n: usize, k: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    if k < n {
        m[(k, k)] = C64::new(1.0, 0.0);
        return m;
    }
    let (i, j, imag) = upper_pair(n, k - n);
    if imag {
        m[(i, j)] = C64::new(0.0, 1.0);
        m[(j, i)] = C64::new(0.0, -1.0);
    } else {
        m[(i, j)] = C64::new(1.0, 0.0);
        m[(j, i)] = C64::new(1.0, 0.0);
    }
    m
}

fn upper_pair(n: usize, idx: usize) -> (usize, usize, bool) {
    let pair = idx / 2;
    let imag = idx % 2 == 1;
    let mut rem = pair;
    for i in 0..n {
        let row = n - i - 1;
        if rem < row {
            return (i, i + 1 + rem, imag);
        }
        rem -= row;
    }
    unreachable!("basis index out of range")
}

/// Coordinates of a Hermitian matrix in [`hermitian_basis`].
pub fn hermitian_to_coords(q: &CMat) -> Vec<f64> {
    let n = q.nrows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.push(q[(i, i)].re);
    }
    for i in 0..n {
        for j in i + 1..n {
            out.push(q[(i, j)].re);
            out.push(q[(i, j)].im);
        }
    }
    out
}

/// Rebuilds the Hermitian matrix from [`hermitian_to_coords`] output.
pub fn hermitian_from_coords(x: &[f64], n: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(x[i], 0.0);
    }
    let mut k = n;
    for i in 0..n {
        for j in i + 1..n {
            let z = C64::new(x[k], x[k + 1]);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    m
}

/// Both sides of `det(I + A) >= 1 + tr(A)` for PSD `A`, computed from the
/// eigenvalues. Equality holds exactly when `rank(A) <= 1`.
pub fn det_vs_trace_bound(a: &HermitianMatrix) -> Result<(f64, f64)> {
    let eig = a.eigenvalues();
    let scale = eig.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if let Some(&min) = eig.first() {
        if min < -1e-10 * scale {
            return Err(Error::NotPsd(min));
        }
    }
    let det = eig.iter().map(|&l| 1.0 + l.max(0.0)).product();
    let bound = 1.0 + a.trace();
    Ok((det, bound))
}

/// Number of eigenvalues above `rel_tol * lambda_max`.
pub fn numerical_rank(a: &HermitianMatrix, rel_tol: f64) -> usize {
    let eig = a.eigenvalues();
    let top = eig.last().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    eig.iter().filter(|&&l| l > rel_tol * top).count()
}

/// `log2 det(I + M)` for Hermitian PSD `M` via Cholesky; falls back to the
/// eigenvalues if the factorization fails.
pub fn log2_det_identity_plus(m: &CMat) -> f64 {
    let n = m.nrows();
    let shifted = CMat::identity(n, n) + m;
    if let Some(ch) = shifted.clone().cholesky() {
        let l = ch.l_dirty();
        (0..n).map(|i| l[(i, i)].re.ln()).sum::<f64>() * 2.0 / std::f64::consts::LN_2
    } else {
        HermitianMatrix::symmetrize(shifted)
            .eigenvalues()
            .iter()
            .map(|&l| l.max(f64::MIN_POSITIVE).log2())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn embed_identity_is_identity() {
        let e = embed(&HermitianMatrix::identity(3));
        assert_eq!(e.as_matrix(), &DMatrix::<f64>::identity(6, 6));
    }

    #[test]
    fn embed_duplicates_eigenvalues() {
        let s = CMat::from_row_slice(2, 2, &[c(0., 0.), c(0., 1.), c(0., -1.), c(0., 0.)]);
        let e = embed(&HermitianMatrix::new(s).unwrap());
        let eig = e.eigenvalues();
        for (got, want) in eig.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((e.trace() - 0.0).abs() < 1e-15);
    }

    #[test]
    fn non_hermitian_rejected() {
        let s = CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 1.), c(0., 1.), c(0., 0.)]);
        assert!(matches!(HermitianMatrix::new(s), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn kron_examples() {
        let q = HermitianMatrix::from_real_diagonal(&[1.0, 2.0]);
        assert_eq!(kron_identity_left(1, &q), q);
        let k = kron_identity_left(2, &q);
        assert_eq!(k, HermitianMatrix::from_real_diagonal(&[1.0, 2.0, 1.0, 2.0]));
        assert!((k.trace() - 6.0).abs() < 1e-15);
    }

    #[test]
    fn svec_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert_eq!(svec(&i2).unwrap().as_slice(), &[1.0, 0.0, 1.0]);
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let v = svec(&x).unwrap();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(v[2], 0.0);
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(svec(&bad), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn svec_side_inverts_len() {
        for n in 0..40 {
            assert_eq!(svec_side(svec_len(n)), Some(n));
        }
        assert_eq!(svec_side(4), None);
    }

    #[test]
    fn det_trace_sides_examples() {
        let u = CVec::from_vec(vec![c(1.0, 0.5), c(-0.3, 0.2), c(0.0, 2.0)]);
        let a = HermitianMatrix::outer(&u, 1.0);
        let (det, bound) = det_vs_trace_bound(&a).unwrap();
        let expect = 1.0 + u.norm_squared();
        assert!((det - expect).abs() < 1e-12 * expect);
        assert!((bound - expect).abs() < 1e-12 * expect);

        let (det, bound) = det_vs_trace_bound(&HermitianMatrix::identity(2)).unwrap();
        assert!((det - 4.0).abs() < 1e-12);
        assert!((bound - 3.0).abs() < 1e-12);

        let indefinite = HermitianMatrix::from_real_diagonal(&[1.0, -0.5]);
        assert!(matches!(det_vs_trace_bound(&indefinite), Err(Error::NotPsd(_))));
    }

    #[test]
    fn basis_roundtrip() {
        let n = 4;
        for k in 0..n * n {
            let b = hermitian_basis(n, k);
            let coords = hermitian_to_coords(&b);
            for (idx, v) in coords.iter().enumerate() {
                assert_eq!(*v, if idx == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn psd_sqrt_clamps_tiny_negative() {
        let a = HermitianMatrix::from_real_diagonal(&[4.0, -1e-12]);
        let r = a.psd_sqrt(1e-8).unwrap();
        assert!((r.as_matrix()[(0, 0)].re - 2.0).abs() < 1e-14);
        assert_eq!(r.as_matrix()[(1, 1)].re, 0.0);
        let bad = HermitianMatrix::from_real_diagonal(&[1.0, -1e-6]);
        assert!(bad.psd_sqrt(1e-8).is_err());
    }

    #[test]
    fn log2_det_matches_eigenvalues() {
        let m = HermitianMatrix::from_real_diagonal(&[1.0, 3.0]);
        assert!((log2_det_identity_plus(m.as_matrix()) - 3.0).abs() < 1e-12);
    }
}
