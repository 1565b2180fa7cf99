//! Linear maps on operators and their column-stacking matrices.
//!
//! `vec(X)` stacks columns, so entry `(i, j)` of `X` sits at `i + j·D`.
//! Under this convention `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use alloc::boxed::Box;

use crate::error::{Error, Result};
use crate::linalg::{CMat, ONE, ZERO};

/// Default cap on `D²`, the side of a dense superoperator matrix.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// A linear map on `D × D` matrices.
pub trait Superoperator {
    fn domain_dim(&self) -> usize;
    fn apply(&self, x: &CMat) -> CMat;
}

/// A superoperator given by a closure.
pub struct FnSuperoperator<'a> {
    dim: usize,
    f: Box<dyn Fn(&CMat) -> CMat + 'a>,
}

impl<'a> FnSuperoperator<'a> {
    pub fn new(dim: usize, f: impl Fn(&CMat) -> CMat + 'a) -> Self {
        Self { dim, f: Box::new(f) }
    }
}

impl Superoperator for FnSuperoperator<'_> {
    fn domain_dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &CMat) -> CMat {
        (self.f)(x)
    }
}

/// A superoperator stored as its `D² × D²` column-stacking matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSuperoperator {
    dim: usize,
    matrix: CMat,
}

impl DenseSuperoperator {
    pub fn new(dim: usize, matrix: CMat) -> Result<Self> {
        if matrix.nrows() != dim * dim || matrix.ncols() != dim * dim {
            return Err(Error::DimensionMismatch(matrix.nrows(), dim * dim));
        }
        Ok(Self { dim, matrix })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }
}

impl Superoperator for DenseSuperoperator {
    fn domain_dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &CMat) -> CMat {
        unvec(&(&self.matrix * vec(x)), self.dim)
    }
}

pub fn check_dense_cap(dim: usize, cap: usize) -> Result<()> {
    let side = dim.saturating_mul(dim);
    if side > cap {
        return Err(Error::DimensionCap { dim: side, cap });
    }
    Ok(())
}

pub fn vec(x: &CMat) -> CMat {
    CMat::from_column_slice(x.len(), 1, x.as_slice())
}

pub fn unvec(v: &CMat, dim: usize) -> CMat {
    CMat::from_column_slice(dim, dim, v.as_slice())
}

/// Dense matrix of `map` obtained by applying it to every matrix unit.
pub fn vectorize(map: &dyn Superoperator, cap: usize) -> Result<CMat> {
    let dim = map.domain_dim();
    check_dense_cap(dim, cap)?;
    let n = dim * dim;
    let mut out = CMat::zeros(n, n);
    let mut unit = CMat::zeros(dim, dim);
    for col in 0..n {
        let (i, j) = (col % dim, col / dim);
        unit[(i, j)] = ONE;
        let image = map.apply(&unit);
        out.column_mut(col).copy_from_slice(image.as_slice());
        unit[(i, j)] = ZERO;
    }
    Ok(out)
}

/// Column-stacking matrix of `X ↦ Σ_k K_k X K_k†`, i.e. `Σ_k conj(K_k) ⊗ K_k`.
pub fn kraus_matrix(kraus: &[CMat]) -> CMat {
    let dim = kraus.first().map_or(0, |k| k.nrows());
    let mut out = CMat::zeros(dim * dim, dim * dim);
    for k in kraus {
        out += k.conjugate().kronecker(k);
    }
    out
}

/// Largest entry of `vec(map(X)) − M vec(X)` over the given probes.
pub fn dense_agreement(map: &dyn Superoperator, matrix: &CMat, probes: &[CMat]) -> f64 {
    let dim = map.domain_dim();
    probes
        .iter()
        .map(|x| {
            let direct = map.apply(x);
            let via = unvec(&(matrix * vec(x)), dim);
            crate::linalg::max_abs(&(direct - via))
        })
        .fold(0.0, f64::max)
}

/// Statistical linearity residual `‖L(aX + bY) − aL(X) − bL(Y)‖_max` over probe pairs.
pub fn linearity_defect(map: &dyn Superoperator, pairs: &[(CMat, CMat)]) -> f64 {
    let (a, b) = (crate::linalg::C64::new(0.7, -0.3), crate::linalg::C64::new(-1.3, 0.4));
    let mut worst: f64 = 0.0;
    for (x, y) in pairs {
        let lhs = map.apply(&(x * a + y * b));
        let rhs = map.apply(x) * a + map.apply(y) * b;
        worst = worst.max(crate::linalg::max_abs(&(lhs - rhs)));
    }
    worst
}

/// Identity map on `D × D` matrices.
pub fn identity_map(dim: usize) -> FnSuperoperator<'static> {
    FnSuperoperator::new(dim, |x: &CMat| x.clone())
}
