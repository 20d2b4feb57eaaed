//! Dense linear algebra over [`Field`]: exact row reduction, SVD-based float
//! kernels, Hermitian eigensolvers and a handful of subspace operations.

use nalgebra::{DMatrix, DVector};
use num_traits::Zero;

use crate::scalar::{Field, C64};

/// Conjugate transpose.
pub fn adj<S: Field>(m: &DMatrix<S>) -> DMatrix<S> {
    DMatrix::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

pub fn hcat<S: Field>(a: &DMatrix<S>, b: &DMatrix<S>) -> DMatrix<S> {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((0, a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    out
}

/// Dimension of span(a) + span(b).
pub fn sum_dim<S: Field>(a: &DMatrix<S>, b: &DMatrix<S>) -> usize {
    S::rank(&hcat(a, b))
}

/// Basis of span(a) ∩ span(b).
pub fn intersection<S: Field>(a: &DMatrix<S>, b: &DMatrix<S>) -> DMatrix<S> {
    if a.ncols() == 0 || b.ncols() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let nb = -b.clone();
    let k = S::kernel(&hcat(a, &nb));
    let top = k.rows(0, a.ncols()).into_owned();
    S::column_basis(&(a * top))
}

/// Basis of {x ∈ span(u) : vᴴx = 0}, the orthogonal complement of span(v)
/// inside span(u) for the standard Hermitian product.
pub fn orth_complement_in<S: Field>(u: &DMatrix<S>, v: &DMatrix<S>) -> DMatrix<S> {
    if u.ncols() == 0 || v.ncols() == 0 {
        return S::column_basis(u);
    }
    let k = S::kernel(&(adj(v) * u));
    S::column_basis(&(u * k))
}

/// Columns of `z` (or combinations of them) completing span(b) to span(z).
/// Assumes span(b) ⊆ span(z).
pub fn complement_reps<S: Field>(z: &DMatrix<S>, b: &DMatrix<S>) -> DMatrix<S> {
    if S::EXACT {
        // pivot columns of [b | z] that fall inside z
        let piv = S::pivots(&hcat(b, z));
        let picked: Vec<usize> = piv.into_iter().filter(|&c| c >= b.ncols()).map(|c| c - b.ncols()).collect();
        let mut out = DMatrix::zeros(z.nrows(), picked.len());
        for (c, &j) in picked.iter().enumerate() {
            out.set_column(c, &z.column(j));
        }
        out
    } else {
        orth_complement_in(z, b)
    }
}

/// Product skipping zero entries; much cheaper than the generic kernel for
/// sparse exact matrices.
pub fn mul<S: Field>(a: &DMatrix<S>, b: &DMatrix<S>) -> DMatrix<S> {
    assert_eq!(a.ncols(), b.nrows());
    if !S::EXACT {
        return a * b;
    }
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for j in 0..b.ncols() {
        for l in 0..a.ncols() {
            let blj = &b[(l, j)];
            if blj.is_zero() {
                continue;
            }
            for i in 0..a.nrows() {
                let ail = &a[(i, l)];
                if !ail.is_zero() {
                    out[(i, j)] += ail.clone() * blj.clone();
                }
            }
        }
    }
    out
}

/// Orthogonal projector onto span(u) (columns need not be orthonormal).
pub fn projector<S: Field>(u: &DMatrix<S>) -> DMatrix<S> {
    let n = u.nrows();
    if u.ncols() == 0 {
        return DMatrix::zeros(n, n);
    }
    let uh = adj(u);
    let gram = &uh * u;
    let x = S::solve(&gram, &uh).expect("Gram matrix of a basis is invertible");
    u * x
}

pub fn identity<S: Field>(n: usize) -> DMatrix<S> {
    DMatrix::from_fn(n, n, |i, j| if i == j { S::one() } else { S::zero() })
}

pub fn is_zero_matrix<S: Field>(m: &DMatrix<S>) -> bool {
    m.iter().all(|x| x.is_zero())
}

pub fn to_c64<S: Field>(m: &DMatrix<S>) -> DMatrix<C64> {
    m.map(|x| x.to_c64())
}

pub mod exact {
    use super::*;
    use crate::scalar::GaussRat;

    /// Reduced row echelon form and pivot columns.
    pub fn rref(m: &DMatrix<GaussRat>) -> (DMatrix<GaussRat>, Vec<usize>) {
        let mut a = m.clone();
        let (rows, cols) = a.shape();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..cols {
            if r == rows {
                break;
            }
            let Some(p) = (r..rows).find(|&i| !a[(i, c)].is_zero()) else { continue };
            a.swap_rows(r, p);
            let inv = <GaussRat as num_traits::One>::one() / a[(r, c)].clone();
            for j in c..cols {
                if !a[(r, j)].is_zero() {
                    let v = a[(r, j)].clone() * inv.clone();
                    a[(r, j)] = v;
                }
            }
            let nz: Vec<usize> = (c..cols).filter(|&j| !a[(r, j)].is_zero()).collect();
            for i in 0..rows {
                if i != r && !a[(i, c)].is_zero() {
                    let f = a[(i, c)].clone();
                    for &j in &nz {
                        let v = a[(r, j)].clone() * f.clone();
                        a[(i, j)] -= v;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        (a, pivots)
    }

    pub fn rank(m: &DMatrix<GaussRat>) -> usize {
        if m.is_empty() {
            return 0;
        }
        rref(m).1.len()
    }

    pub fn kernel(m: &DMatrix<GaussRat>) -> DMatrix<GaussRat> {
        let cols = m.ncols();
        if m.nrows() == 0 {
            return identity(cols);
        }
        let (r, piv) = rref(m);
        let free: Vec<usize> = (0..cols).filter(|c| !piv.contains(c)).collect();
        let mut out = DMatrix::zeros(cols, free.len());
        for (k, &f) in free.iter().enumerate() {
            out[(f, k)] = <GaussRat as num_traits::One>::one();
            for (row, &pc) in piv.iter().enumerate() {
                out[(pc, k)] = -r[(row, f)].clone();
            }
        }
        out
    }

    pub fn column_basis(m: &DMatrix<GaussRat>) -> DMatrix<GaussRat> {
        if m.ncols() == 0 || m.nrows() == 0 {
            return DMatrix::zeros(m.nrows(), 0);
        }
        let (_, piv) = rref(m);
        let mut out = DMatrix::zeros(m.nrows(), piv.len());
        for (k, &c) in piv.iter().enumerate() {
            out.set_column(k, &m.column(c));
        }
        out
    }

    pub fn solve(a: &DMatrix<GaussRat>, b: &DMatrix<GaussRat>) -> Option<DMatrix<GaussRat>> {
        let n = a.ncols();
        if a.nrows() == 0 {
            return Some(DMatrix::zeros(n, b.ncols()));
        }
        let (r, piv) = rref(&hcat(a, b));
        if piv.iter().any(|&c| c >= n) {
            return None;
        }
        let mut x = DMatrix::zeros(n, b.ncols());
        for (row, &pc) in piv.iter().enumerate() {
            for j in 0..b.ncols() {
                x[(pc, j)] = r[(row, n + j)].clone();
            }
        }
        Some(x)
    }
}

pub mod float {
    use super::*;

    pub const RANK_RTOL: f64 = 1e-10;

    fn to_faer(m: &DMatrix<C64>) -> faer::Mat<C64> {
        faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    fn from_faer(m: faer::MatRef<'_, C64>) -> DMatrix<C64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    /// Singular values (descending), U (min(rows, cols) columns) and the full
    /// square V.
    pub fn svd_full(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>, DMatrix<C64>) {
        let (rows, cols) = m.shape();
        let svd = to_faer(m).svd().expect("svd did not converge");
        let k = rows.min(cols);
        let sd = svd.S().column_vector();
        let s: Vec<f64> = (0..k).map(|i| sd[i].re).collect();
        let u = from_faer(svd.U().get(.., ..k));
        (s, u, from_faer(svd.V()))
    }

    pub fn threshold(m: &DMatrix<C64>, s: &[f64]) -> f64 {
        let smax = s.first().copied().unwrap_or(0.0);
        m.nrows().max(m.ncols()) as f64 * smax * RANK_RTOL
    }

    pub fn singular_values(m: &DMatrix<C64>) -> Vec<f64> {
        try_singular_values(m).expect("svd did not converge")
    }

    /// Descending singular values, or None if the solver did not converge.
    pub fn try_singular_values(m: &DMatrix<C64>) -> Option<Vec<f64>> {
        if m.is_empty() {
            return Some(vec![]);
        }
        to_faer(m).singular_values().ok()
    }

    pub fn rank(m: &DMatrix<C64>) -> usize {
        if m.is_empty() {
            return 0;
        }
        let s = singular_values(m);
        let t = threshold(m, &s);
        s.iter().filter(|&&x| x > t && x > 0.0).count()
    }

    pub fn kernel(m: &DMatrix<C64>) -> DMatrix<C64> {
        let cols = m.ncols();
        if m.nrows() == 0 || cols == 0 {
            return identity(cols);
        }
        let (s, _, v) = svd_full(m);
        let t = threshold(m, &s);
        let r = s.iter().filter(|&&x| x > t && x > 0.0).count();
        v.columns(r, cols - r).into_owned()
    }

    pub fn column_basis(m: &DMatrix<C64>) -> DMatrix<C64> {
        if m.is_empty() {
            return DMatrix::zeros(m.nrows(), 0);
        }
        let (s, u, _) = svd_full(m);
        let t = threshold(m, &s);
        let r = s.iter().filter(|&&x| x > t && x > 0.0).count();
        u.columns(0, r).into_owned()
    }

    /// Moore–Penrose pseudo-inverse with cutoff σ_max·`rtol`.
    pub fn pinv(m: &DMatrix<C64>, rtol: f64) -> DMatrix<C64> {
        let (rows, cols) = m.shape();
        if m.is_empty() {
            return DMatrix::zeros(cols, rows);
        }
        let (s, u, v) = svd_full(m);
        let cut = s[0] * rtol;
        let mut out = DMatrix::zeros(cols, rows);
        for (k, &sk) in s.iter().enumerate() {
            if sk > cut && sk > 0.0 && k < u.ncols() {
                out += v.column(k) * u.column(k).adjoint() * C64::new(1.0 / sk, 0.0);
            }
        }
        out
    }

    pub fn solve(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Option<DMatrix<C64>> {
        let x = pinv(a, RANK_RTOL) * b;
        let res = (a * &x - b).norm();
        // absolute floor: right-hand sides that are pure rounding noise are consistent
        let scale = a.norm() * x.norm() + b.norm() + 1e-4 * a.norm();
        if res <= 1e-8 * scale.max(f64::MIN_POSITIVE) {
            Some(x)
        } else {
            None
        }
    }

    /// Eigenvalues (ascending) of a Hermitian matrix.
    pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
        try_hermitian_eigenvalues(m).expect("eigensolver did not converge")
    }

    /// Ascending eigenvalues of the Hermitian part of `m`, or None if the
    /// solver did not converge.
    pub fn try_hermitian_eigenvalues(m: &DMatrix<C64>) -> Option<Vec<f64>> {
        if m.nrows() == 0 {
            return Some(vec![]);
        }
        // symmetrize to absorb rounding in the input
        let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
        to_faer(&sym).self_adjoint_eigenvalues(faer::Side::Lower).ok()
    }

    /// Eigenvalues (ascending) with orthonormal eigenvectors as columns.
    pub fn hermitian_eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
        let n = m.nrows();
        if n == 0 {
            return (vec![], DMatrix::zeros(0, 0));
        }
        let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
        let eig = to_faer(&sym).self_adjoint_eigen(faer::Side::Lower).expect("eigensolver did not converge");
        let sd = eig.S().column_vector();
        ((0..n).map(|i| sd[i].re).collect(), from_faer(eig.U()))
    }

    pub fn hermitian_residual(m: &DMatrix<C64>) -> f64 {
        (m - m.adjoint()).norm()
    }

    /// Largest singular value.
    pub fn op_norm(m: &DMatrix<C64>) -> f64 {
        singular_values(m).first().copied().unwrap_or(0.0)
    }

    pub fn min_eig(m: &DMatrix<C64>) -> f64 {
        hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
    }

    pub fn max_eig(m: &DMatrix<C64>) -> f64 {
        hermitian_eigenvalues(m).last().copied().unwrap_or(0.0)
    }

    /// Orthonormal basis (columns) of the kernel of a Hermitian PSD matrix,
    /// using the eigenvalue cutoff `rtol`·‖m‖.
    pub fn psd_kernel(m: &DMatrix<C64>, rtol: f64) -> DMatrix<C64> {
        psd_kernel_ref(m, rtol, 0.0)
    }

    /// Kernel with eigenvalues measured against max(‖m‖, reference), for
    /// blocks of a larger operator that may vanish up to rounding.
    pub fn psd_kernel_ref(m: &DMatrix<C64>, rtol: f64, reference: f64) -> DMatrix<C64> {
        let (vals, vecs) = hermitian_eigh(m);
        let scale = vals.iter().fold(reference, |a, v| a.max(v.abs()));
        let cut = rtol * scale.max(1e-300);
        let idx: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].abs() <= cut).collect();
        let mut out = DMatrix::zeros(m.nrows(), idx.len());
        for (k, &i) in idx.iter().enumerate() {
            out.set_column(k, &vecs.column(i));
        }
        out
    }

    pub fn max_abs(m: &DMatrix<C64>) -> f64 {
        m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
    }

    /// Generalized Hermitian problem A x = λ B x with B positive definite:
    /// eigenvalues ascending and B-orthonormal eigenvectors.
    pub fn generalized_eigh(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Option<(Vec<f64>, DMatrix<C64>)> {
        let n = a.nrows();
        if n == 0 {
            return Some((vec![], DMatrix::zeros(0, 0)));
        }
        let l = b.clone().cholesky()?.l();
        let linv = l.clone().try_inverse()?;
        let c = &linv * a * linv.adjoint();
        let (vals, y) = hermitian_eigh(&c);
        Some((vals, linv.adjoint() * y))
    }

    pub fn generalized_eigenvalues(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Option<Vec<f64>> {
        let l = b.clone().cholesky()?.l();
        let linv = l.try_inverse()?;
        Some(hermitian_eigenvalues(&(&linv * a * linv.adjoint())))
    }

    pub fn column(v: &DVector<C64>) -> DMatrix<C64> {
        DMatrix::from_column_slice(v.len(), 1, v.as_slice())
    }
}
