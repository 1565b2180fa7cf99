//! Dense complex matrix helpers on top of nalgebra.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::Float;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

pub fn diag(values: &[f64]) -> CMat {
    CMat::from_diagonal(&DVector::from_iterator(values.len(), values.iter().map(|&v| c(v))))
}

/// Matrix from row-major entries; `None` when the length is not `rows·cols`.
pub fn from_row_major(rows: usize, cols: usize, entries: &[C64]) -> Option<CMat> {
    (entries.len() == rows * cols).then(|| CMat::from_row_slice(rows, cols, entries))
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().copied().sum()
}

/// `tr[a b]` in `O(D²)`.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

/// `(m + m†)/2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn frobenius(m: &CMat) -> f64 {
    Float::sqrt(m.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

/// Largest entry of `m − m†` in absolute value.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_diagonal(m: &CMat) -> bool {
    let n = m.nrows();
    (0..n).all(|j| (0..n).all(|i| i == j || m[(i, j)] == ZERO))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Exactly diagonal inputs return permutation eigenvectors so sparsity survives.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if is_diagonal(m) {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
        let values = order.iter().map(|&i| m[(i, i)].re).collect();
        let mut vecs = CMat::zeros(n, n);
        for (col, &row) in order.iter().enumerate() {
            vecs[(row, col)] = ONE;
        }
        return (values, vecs);
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vecs)
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    let n = m.nrows();
    let mut values: Vec<f64> = if is_diagonal(m) {
        (0..n).map(|i| m[(i, i)].re).collect()
    } else {
        hermitian_part(m).symmetric_eigenvalues().iter().copied().collect()
    };
    values.sort_by(f64::total_cmp);
    values
}

/// `V diag(f(λ)) V†`.
pub fn spectral_apply(values: &[f64], vecs: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let n = values.len();
    let mut scaled = vecs.clone();
    for (j, &v) in values.iter().enumerate() {
        let fv = f(v);
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    let out = &scaled * vecs.adjoint();
    if is_permutation(vecs) {
        // keep diagonal results exactly diagonal
        CMat::from_fn(n, n, |i, j| if i == j { out[(i, j)] } else { ZERO })
    } else {
        out
    }
}

fn is_permutation(m: &CMat) -> bool {
    m.iter().all(|z| *z == ZERO || *z == ONE)
        && (0..m.ncols()).all(|j| m.column(j).iter().filter(|z| **z == ONE).count() == 1)
}

/// A left/right multiplier `X ↦ S X S` with a diagonal fast path.
#[derive(Debug, Clone)]
pub enum Sandwich {
    Diagonal(Vec<f64>),
    Dense(CMat),
}

impl Sandwich {
    pub fn from_matrix(m: CMat) -> Self {
        if is_diagonal(&m) {
            Sandwich::Diagonal((0..m.nrows()).map(|i| m[(i, i)].re).collect())
        } else {
            Sandwich::Dense(m)
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Sandwich::Diagonal(d) => d.len(),
            Sandwich::Dense(m) => m.nrows(),
        }
    }

    pub fn matrix(&self) -> CMat {
        match self {
            Sandwich::Diagonal(d) => diag(d),
            Sandwich::Dense(m) => m.clone(),
        }
    }

    /// `S X S` for Hermitian `S`.
    pub fn apply(&self, x: &CMat) -> CMat {
        match self {
            Sandwich::Diagonal(d) => CMat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * (d[i] * d[j])),
            Sandwich::Dense(s) => s * x * s,
        }
    }

    /// `S X`.
    pub fn left(&self, x: &CMat) -> CMat {
        match self {
            Sandwich::Diagonal(d) => CMat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * d[i]),
            Sandwich::Dense(s) => s * x,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_fast_path_sorts() {
        let m = diag(&[3.0, -1.0, 2.0]);
        let (vals, vecs) = eigh(&m);
        assert_eq!(vals, alloc::vec![-1.0, 2.0, 3.0]);
        let back = spectral_apply(&vals, &vecs, |x| x);
        assert_eq!(back, m);
    }

    #[test]
    fn dense_eigh_reconstructs() {
        let m = CMat::from_fn(3, 3, |i, j| {
            let x = C64::new((i + 2 * j) as f64, i as f64 - j as f64);
            if i == j {
                c(x.re)
            } else {
                x
            }
        });
        let h = hermitian_part(&m);
        let (vals, vecs) = eigh(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let back = spectral_apply(&vals, &vecs, |x| x);
        assert!(max_abs(&(back - &h)) < 1e-12);
    }

    #[test]
    fn sandwich_paths_agree() {
        let s = diag(&[0.5, 2.0]);
        let x = CMat::from_fn(2, 2, |i, j| C64::new(i as f64 + 1.0, j as f64));
        let fast = Sandwich::from_matrix(s.clone()).apply(&x);
        let slow = Sandwich::Dense(s.clone()).apply(&x);
        assert!(max_abs(&(fast - slow)) < 1e-15);
    }
}
