//! Hermitian and density operators on chain regions.
//!
//! The basis of a region is the tensor product of site bases with the
//! lowest-indexed site as the most significant (leftmost Kronecker) factor.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Region};
use crate::linalg::{self, c, CMat, ZERO};
use crate::tol::Tolerances;

/// Index bookkeeping for splitting a support into a sub-region and the rest.
///
/// `offset(a, t)` is the index on the full support of the basis vector whose
/// digits on the sub-region read `a` and on the rest read `t`.
#[derive(Debug, Clone)]
pub(crate) struct Split {
    pub sub_dim: usize,
    pub rest_dim: usize,
    sub_offsets: Vec<usize>,
    rest_offsets: Vec<usize>,
}

impl Split {
    pub fn new(support: &Region, sub: &Region, local_dim: usize) -> Self {
        let n = support.len();
        let weight = |site: usize| {
            let p = support.position(site).expect("sub-region inside support");
            local_dim.pow((n - 1 - p) as u32)
        };
        let rest = support.difference(sub);
        let offsets = |r: &Region| -> Vec<usize> {
            let weights: Vec<usize> = r.iter().map(weight).collect();
            let dim = local_dim.pow(r.len() as u32);
            (0..dim)
                .map(|mut idx| {
                    let mut off = 0;
                    for w in weights.iter().rev() {
                        off += (idx % local_dim) * w;
                        idx /= local_dim;
                    }
                    off
                })
                .collect()
        };
        let sub_offsets = offsets(sub);
        let rest_offsets = offsets(&rest);
        Self {
            sub_dim: sub_offsets.len(),
            rest_dim: rest_offsets.len(),
            sub_offsets,
            rest_offsets,
        }
    }

    #[inline]
    pub fn index(&self, a: usize, t: usize) -> usize {
        self.sub_offsets[a] + self.rest_offsets[t]
    }

    /// `tr_rest[m]` as an operator on the sub-region.
    pub fn trace_rest(&self, m: &CMat) -> CMat {
        let mut out = CMat::zeros(self.sub_dim, self.sub_dim);
        for b in 0..self.sub_dim {
            for a in 0..self.sub_dim {
                let mut acc = ZERO;
                for t in 0..self.rest_dim {
                    acc += m[(self.index(a, t), self.index(b, t))];
                }
                out[(a, b)] = acc;
            }
        }
        out
    }

    /// `m ⊗ 𝟙_rest` on the full support.
    pub fn embed(&self, m: &CMat) -> CMat {
        let dim = self.sub_dim * self.rest_dim;
        let mut out = CMat::zeros(dim, dim);
        for t in 0..self.rest_dim {
            for b in 0..self.sub_dim {
                let j = self.index(b, t);
                for a in 0..self.sub_dim {
                    out[(self.index(a, t), j)] = m[(a, b)];
                }
            }
        }
        out
    }

    /// `x ⊗ y` with `x` on the sub-region and `y` on the rest.
    pub fn product(&self, x: &CMat, y: &CMat) -> CMat {
        let dim = self.sub_dim * self.rest_dim;
        let mut out = CMat::zeros(dim, dim);
        for t2 in 0..self.rest_dim {
            for b in 0..self.sub_dim {
                let j = self.index(b, t2);
                for t1 in 0..self.rest_dim {
                    let yv = y[(t1, t2)];
                    if yv == ZERO {
                        continue;
                    }
                    for a in 0..self.sub_dim {
                        out[(self.index(a, t1), j)] = x[(a, b)] * yv;
                    }
                }
            }
        }
        out
    }
}

/// A Hermitian matrix acting on `support`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    support: Region,
    local_dim: usize,
    matrix: CMat,
}

impl HermitianOperator {
    /// Validates shape and Hermiticity, then stores the exact Hermitian part.
    pub fn new(support: Region, local_dim: usize, matrix: CMat) -> Result<Self> {
        Self::with_tolerance(support, local_dim, matrix, Tolerances::default().herm)
    }

    pub fn with_tolerance(support: Region, local_dim: usize, matrix: CMat, tol: f64) -> Result<Self> {
        let dim = local_dim.pow(support.len() as u32);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch(matrix.nrows(), dim));
        }
        let defect = linalg::hermiticity_defect(&matrix);
        if defect > tol * linalg::frobenius(&matrix).max(1.0) {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self::from_parts(support, local_dim, linalg::hermitian_part(&matrix)))
    }

    /// Trusted constructor for matrices that are Hermitian by construction.
    pub(crate) fn from_parts(support: Region, local_dim: usize, matrix: CMat) -> Self {
        debug_assert_eq!(matrix.nrows(), local_dim.pow(support.len() as u32));
        Self {
            support,
            local_dim,
            matrix,
        }
    }

    pub fn identity(support: Region, local_dim: usize) -> Self {
        let dim = local_dim.pow(support.len() as u32);
        Self::from_parts(support, local_dim, linalg::identity(dim))
    }

    pub fn zeros(support: Region, local_dim: usize) -> Self {
        let dim = local_dim.pow(support.len() as u32);
        Self::from_parts(support, local_dim, CMat::zeros(dim, dim))
    }

    pub fn support(&self) -> &Region {
        &self.support
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_parts(self.support.clone(), self.local_dim, self.matrix.scale(s))
    }

    /// Sum of two operators on the union of their supports.
    pub fn add(&self, other: &Self) -> Self {
        let support = self.support.union(&other.support);
        let a = embed_into(self, &support);
        let b = embed_into(other, &support);
        Self::from_parts(support, self.local_dim, a.matrix + b.matrix)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn spectral(&self) -> SpectralDecomposition {
        SpectralDecomposition::of(&self.matrix)
    }
}

/// A trace-one positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator(HermitianOperator);

impl DensityOperator {
    /// Validates trace and positivity against the default tolerances.
    pub fn new(op: HermitianOperator) -> Result<Self> {
        Self::with_tolerances(op, &Tolerances::default())
    }

    pub fn with_tolerances(op: HermitianOperator, tol: &Tolerances) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > tol.trace {
            return Err(Error::NotDensity(format!("trace {tr}")));
        }
        let min = linalg::eigvalsh(op.matrix()).first().copied().unwrap_or(0.0);
        if min < -tol.psd {
            return Err(Error::NotDensity(format!("smallest eigenvalue {min:e}")));
        }
        Ok(Self(op))
    }

    pub fn from_matrix(support: Region, local_dim: usize, matrix: CMat) -> Result<Self> {
        Self::new(HermitianOperator::new(support, local_dim, matrix)?)
    }

    /// Trusted constructor for states that are valid by construction.
    pub(crate) fn from_parts(support: Region, local_dim: usize, matrix: CMat) -> Self {
        Self(HermitianOperator::from_parts(support, local_dim, matrix))
    }

    /// `𝟙/dim` on `support`.
    pub fn maximally_mixed(support: Region, local_dim: usize) -> Self {
        let dim = local_dim.pow(support.len() as u32);
        let m = linalg::identity(dim).scale(1.0 / dim as f64);
        Self::from_parts(support, local_dim, m)
    }

    /// Renormalizes a PSD matrix to unit trace without further checks.
    pub fn normalized(support: Region, local_dim: usize, matrix: CMat) -> Self {
        let tr = linalg::trace(&matrix).re;
        Self::from_parts(support, local_dim, linalg::hermitian_part(&matrix).scale(1.0 / tr))
    }

    pub fn as_operator(&self) -> &HermitianOperator {
        &self.0
    }

    pub fn into_operator(self) -> HermitianOperator {
        self.0
    }

    pub fn support(&self) -> &Region {
        self.0.support()
    }

    pub fn local_dim(&self) -> usize {
        self.0.local_dim()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CMat {
        self.0.matrix()
    }

    /// Marginal on `region ⊆ support`.
    pub fn reduce(&self, region: &Region) -> Result<DensityOperator> {
        if !region.is_subset(self.support()) {
            return Err(Error::NotInSupport);
        }
        if region == self.support() {
            return Ok(self.clone());
        }
        let traced = self.support().difference(region);
        Ok(DensityOperator(partial_trace(&self.0, &traced)?))
    }
}

/// Eigenvalues in ascending order with the matching unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
}

impl SpectralDecomposition {
    pub fn of(m: &CMat) -> Self {
        let (eigenvalues, eigenvectors) = linalg::eigh(m);
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    /// `U f(Λ) U†`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMat {
        linalg::spectral_apply(&self.eigenvalues, &self.eigenvectors, f)
    }

    pub fn reconstruct(&self) -> CMat {
        self.apply(|x| x)
    }

    /// `‖M − U Λ U†‖_max / max(‖M‖_max, 1)`.
    pub fn reconstruction_error(&self, m: &CMat) -> f64 {
        linalg::max_abs(&(self.reconstruct() - m)) / linalg::max_abs(m).max(1.0)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

/// Embeds `op` on the full lattice as `op ⊗ 𝟙`.
pub fn embed(op: &HermitianOperator, lattice: &Lattice) -> Result<HermitianOperator> {
    lattice.check_region(op.support())?;
    if op.local_dim() != lattice.local_dim() {
        return Err(Error::DimensionMismatch(op.local_dim(), lattice.local_dim()));
    }
    Ok(embed_into(op, &lattice.full_region()))
}

/// Embeds `op` into a larger support as `op ⊗ 𝟙`.
pub fn embed_into(op: &HermitianOperator, support: &Region) -> HermitianOperator {
    if op.support() == support {
        return op.clone();
    }
    assert!(
        op.support().is_subset(support),
        "embedding target must contain the support"
    );
    let split = Split::new(support, op.support(), op.local_dim());
    HermitianOperator::from_parts(support.clone(), op.local_dim(), split.embed(op.matrix()))
}

/// `tr_traced[op]`, supported on `op.support ∖ traced`.
pub fn partial_trace(op: &HermitianOperator, traced: &Region) -> Result<HermitianOperator> {
    if !traced.is_subset(op.support()) {
        return Err(Error::NotInSupport);
    }
    let kept = op.support().difference(traced);
    let split = Split::new(op.support(), &kept, op.local_dim());
    Ok(HermitianOperator::from_parts(
        kept,
        op.local_dim(),
        split.trace_rest(op.matrix()),
    ))
}

/// `a ⊗ b` for operators on disjoint supports, on the union of the supports.
pub fn tensor(a: &HermitianOperator, b: &HermitianOperator) -> Result<HermitianOperator> {
    if !a.support().is_disjoint(b.support()) {
        return Err(Error::Overlap);
    }
    let support = a.support().union(b.support());
    let split = Split::new(&support, a.support(), a.local_dim());
    Ok(HermitianOperator::from_parts(
        support,
        a.local_dim(),
        split.product(a.matrix(), b.matrix()),
    ))
}

/// Tensor product of states on disjoint supports.
pub fn tensor_states(a: &DensityOperator, b: &DensityOperator) -> Result<DensityOperator> {
    Ok(DensityOperator(tensor(a.as_operator(), b.as_operator())?))
}

/// Relabels sites of an operator by `x ↦ perm[x]`; the result keeps the sorted-support convention.
pub fn permute_sites(op: &HermitianOperator, perm: &[usize]) -> HermitianOperator {
    let d = op.local_dim();
    let old = op.support().sites();
    let new_support = Region::new(old.iter().map(|&s| perm[s]).collect());
    let n = old.len();
    // position in the new ordering of each old position
    let target: Vec<usize> = old
        .iter()
        .map(|&s| new_support.position(perm[s]).expect("permutation is a bijection"))
        .collect();
    let dim = op.dim();
    let map: Vec<usize> = (0..dim)
        .map(|mut idx| {
            let mut digits = alloc::vec![0usize; n];
            for p in (0..n).rev() {
                digits[p] = idx % d;
                idx /= d;
            }
            let mut new_digits = alloc::vec![0usize; n];
            for p in 0..n {
                new_digits[target[p]] = digits[p];
            }
            new_digits.iter().fold(0, |acc, &x| acc * d + x)
        })
        .collect();
    let mut out = CMat::zeros(dim, dim);
    for j in 0..dim {
        for i in 0..dim {
            out[(map[i], map[j])] = op.matrix()[(i, j)];
        }
    }
    HermitianOperator::from_parts(new_support, d, out)
}

/// Spatial reflection `x ↦ n−1−x` of a state on a chain of `n_sites`.
pub fn reflect_state(rho: &DensityOperator, n_sites: usize) -> DensityOperator {
    let perm: Vec<usize> = (0..n_sites).map(|x| n_sites - 1 - x).collect();
    DensityOperator(permute_sites(rho.as_operator(), &perm))
}

/// Scalar functions available through [`matrix_function`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFn {
    Log,
    Sqrt,
    InvSqrt,
    Exp,
    Inverse,
}

/// Output of [`matrix_function`]; `clamped` is raised when eigenvalues were floored.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionValue {
    pub op: HermitianOperator,
    pub clamped: bool,
}

/// Applies `f` through the Hermitian eigendecomposition.
///
/// Without clamping, `Log`, `InvSqrt` and `Inverse` reject eigenvalues at or
/// below `floor`. With clamping they are raised to `floor` and flagged.
/// `Sqrt` treats eigenvalues in `[-floor, 0)` as zero.
pub fn matrix_function(op: &HermitianOperator, f: MatrixFn, floor: f64, clamp: bool) -> Result<FunctionValue> {
    let spec = op.spectral();
    let (m, clamped) = function_of_spectrum(&spec, f, floor, clamp)?;
    Ok(FunctionValue {
        op: HermitianOperator::from_parts(op.support().clone(), op.local_dim(), m),
        clamped,
    })
}

pub(crate) fn function_of_spectrum(
    spec: &SpectralDecomposition,
    f: MatrixFn,
    floor: f64,
    clamp: bool,
) -> Result<(CMat, bool)> {
    let min = spec.min();
    let singular = matches!(f, MatrixFn::Log | MatrixFn::InvSqrt | MatrixFn::Inverse) && min <= floor;
    if singular && !clamp {
        return Err(Error::Singular(min));
    }
    if f == MatrixFn::Sqrt && min < -floor && !clamp {
        return Err(Error::Singular(min));
    }
    let m = spec.apply(|x| match f {
        MatrixFn::Log => Float::ln(x.max(floor)),
        MatrixFn::Sqrt => Float::sqrt(x.max(0.0)),
        MatrixFn::InvSqrt => 1.0 / Float::sqrt(x.max(floor)),
        MatrixFn::Exp => Float::exp(x),
        MatrixFn::Inverse => 1.0 / x.max(floor),
    });
    Ok((m, singular))
}

/// Operator and trace norms of a Hermitian operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub operator_norm: f64,
    pub trace_norm: f64,
}

pub fn norms(op: &HermitianOperator) -> Norms {
    norms_of_matrix(op.matrix())
}

pub(crate) fn norms_of_matrix(m: &CMat) -> Norms {
    let values = linalg::eigvalsh(m);
    Norms {
        operator_norm: values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())),
        trace_norm: values.iter().map(|v| v.abs()).sum(),
    }
}

/// `‖ρ − σ‖_1`.
pub fn trace_distance(rho: &DensityOperator, sigma: &DensityOperator) -> f64 {
    norms_of_matrix(&(rho.matrix() - sigma.matrix())).trace_norm
}

/// Single-site Pauli matrices, convenient for presets and tests.
pub mod pauli {
    use super::*;

    pub fn x() -> CMat {
        CMat::from_row_slice(2, 2, &[ZERO, c(1.0), c(1.0), ZERO])
    }

    pub fn y() -> CMat {
        use crate::linalg::C64;
        CMat::from_row_slice(2, 2, &[ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO])
    }

    pub fn z() -> CMat {
        linalg::diag(&[1.0, -1.0])
    }

    /// `op` placed on `site` as an operator supported there.
    pub fn on(site: usize, op: CMat) -> HermitianOperator {
        HermitianOperator::from_parts(Region::single(site), 2, op)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_chain;
    use crate::linalg::{kron, max_abs, C64};
    use crate::sampling::{random_density, random_hermitian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn i2() -> CMat {
        linalg::identity(2)
    }

    /// Loop contraction oracle for tracing out one site of a 3-qubit operator.
    fn trace_site_oracle(m: &CMat, site: usize) -> CMat {
        let mut out = CMat::zeros(4, 4);
        let digits = |i: usize| [(i >> 2) & 1, (i >> 1) & 1, i & 1];
        for i in 0..8 {
            for j in 0..8 {
                let (di, dj) = (digits(i), digits(j));
                if di[site] != dj[site] {
                    continue;
                }
                let keep = |d: [usize; 3]| {
                    let k: Vec<usize> = (0..3).filter(|&s| s != site).map(|s| d[s]).collect();
                    k[0] * 2 + k[1]
                };
                out[(keep(di), keep(dj))] += m[(i, j)];
            }
        }
        out
    }

    #[test]
    fn embed_examples() {
        let lat2 = make_chain(2, 2).unwrap();
        let z0 = embed(&pauli::on(0, pauli::z()), &lat2).unwrap();
        assert_eq!(*z0.matrix(), linalg::diag(&[1.0, 1.0, -1.0, -1.0]));
        let id1 = HermitianOperator::identity(Region::single(1), 2);
        assert_eq!(*embed(&id1, &lat2).unwrap().matrix(), linalg::identity(4));
        let lat3 = make_chain(3, 2).unwrap();
        let x1 = embed(&pauli::on(1, pauli::x()), &lat3).unwrap();
        assert_eq!(*x1.matrix(), kron(&kron(&i2(), &pauli::x()), &i2()));
        let far = pauli::on(5, pauli::x());
        assert!(embed(&far, &lat3).is_err());
    }

    #[test]
    fn embed_non_contiguous_interleaves() {
        let lat3 = make_chain(3, 2).unwrap();
        let xz = HermitianOperator::from_parts(Region::from([0, 2]), 2, kron(&pauli::x(), &pauli::z()));
        let full = embed(&xz, &lat3).unwrap();
        assert_eq!(*full.matrix(), kron(&kron(&pauli::x(), &i2()), &pauli::z()));
    }

    #[test]
    fn partial_trace_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(&mut rng, Region::single(0), 2);
        let mixed = DensityOperator::maximally_mixed(Region::single(1), 2);
        let joint = tensor(rho.as_operator(), mixed.as_operator()).unwrap();
        let back = partial_trace(&joint, &Region::single(1)).unwrap();
        assert!(max_abs(&(back.matrix() - rho.matrix())) < 1e-15);

        let full = partial_trace(rho.as_operator(), &Region::single(0)).unwrap();
        assert_eq!(full.dim(), 1);
        assert!((full.matrix()[(0, 0)].re - 1.0).abs() < 1e-14);

        let rho3 = random_density(&mut rng, Region::range(0, 3), 2);
        for site in 0..3 {
            let ours = partial_trace(rho3.as_operator(), &Region::single(site)).unwrap();
            let oracle = trace_site_oracle(rho3.matrix(), site);
            assert!(max_abs(&(ours.matrix() - oracle)) < 1e-10);
        }
        assert_eq!(
            partial_trace(rho.as_operator(), &Region::single(4)),
            Err(Error::NotInSupport)
        );
    }

    #[test]
    fn embed_trace_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lat = make_chain(4, 2).unwrap();
        let op = random_hermitian(&mut rng, Region::from([1, 3]), 2);
        let full = embed(&op, &lat).unwrap();
        let back = partial_trace(&full, &Region::from([0, 2])).unwrap();
        assert_eq!(back.support(), op.support());
        assert!(max_abs(&(back.matrix() - op.matrix().scale(4.0))) < 1e-12);
    }

    #[test]
    fn matrix_function_examples() {
        let id = HermitianOperator::identity(Region::range(0, 2), 2);
        let log = matrix_function(&id, MatrixFn::Log, 1e-14, false).unwrap();
        assert!(max_abs(log.op.matrix()) < 1e-15);
        let four = id.scale(4.0);
        let inv = matrix_function(&four, MatrixFn::InvSqrt, 1e-14, false).unwrap();
        assert!(max_abs(&(inv.op.matrix() - linalg::identity(4).scale(0.5))) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density(&mut rng, Region::range(0, 2), 2);
        let log = matrix_function(rho.as_operator(), MatrixFn::Log, 1e-14, false).unwrap();
        let back = matrix_function(&log.op, MatrixFn::Exp, 1e-14, false).unwrap();
        assert!(max_abs(&(back.op.matrix() - rho.matrix())) < 1e-10);

        let pure = HermitianOperator::from_parts(Region::single(0), 2, linalg::diag(&[1.0, 0.0]));
        assert!(matches!(
            matrix_function(&pure, MatrixFn::Log, 1e-14, false),
            Err(Error::Singular(_))
        ));
        let clamped = matrix_function(&pure, MatrixFn::Log, 1e-14, true).unwrap();
        assert!(clamped.clamped);
        assert!((clamped.op.matrix()[(1, 1)].re - Float::ln(1e-14)).abs() < 1e-12);
    }

    #[test]
    fn norm_examples() {
        let m = HermitianOperator::from_parts(Region::single(0), 2, linalg::diag(&[3.0, -4.0]));
        let n = norms(&m);
        assert_eq!((n.operator_norm, n.trace_norm), (4.0, 7.0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = random_density(&mut rng, Region::range(0, 2), 2);
        assert!((norms(rho.as_operator()).trace_norm - 1.0).abs() < 1e-12);

        let sigma = random_density(&mut rng, Region::range(0, 2), 2);
        let diff = rho.matrix() - sigma.matrix();
        let svd_sum: f64 = diff.clone().svd(false, false).singular_values.iter().sum();
        assert!((trace_distance(&rho, &sigma) - svd_sum).abs() < 1e-12);
    }

    #[test]
    fn permutation_reflects_product() {
        let a = pauli::on(0, pauli::x());
        let b = pauli::on(2, pauli::z());
        let ab = tensor(&a, &b).unwrap();
        let ab = embed(&ab, &make_chain(3, 2).unwrap()).unwrap();
        let r = permute_sites(&ab, &[2, 1, 0]);
        assert_eq!(*r.matrix(), kron(&kron(&pauli::z(), &i2()), &pauli::x()));
        let y = pauli::y();
        assert_eq!(y[(0, 1)], C64::new(0.0, -1.0));
    }

    #[test]
    fn density_validation() {
        let bad = linalg::diag(&[0.7, 0.4]);
        assert!(DensityOperator::from_matrix(Region::single(0), 2, bad).is_err());
        let neg = linalg::diag(&[1.1, -0.1]);
        assert!(DensityOperator::from_matrix(Region::single(0), 2, neg).is_err());
        let asym = CMat::from_row_slice(2, 2, &[c(0.5), c(0.1), c(0.0), c(0.5)]);
        assert!(matches!(
            HermitianOperator::new(Region::single(0), 2, asym),
            Err(Error::NotHermitian(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn partial_trace_preserves_trace_and_positivity(seed in any::<u64>(), mask in 1u8..7) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rho = random_density(&mut rng, Region::range(0, 3), 2);
                let traced = Region::new((0..3).filter(|i| mask >> i & 1 == 1).collect());
                let out = partial_trace(rho.as_operator(), &traced).unwrap();
                prop_assert!((out.trace() - 1.0).abs() < 1e-12);
                prop_assert!(linalg::eigvalsh(out.matrix())[0] > -1e-12);
            }

            #[test]
            fn nested_traces_commute(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rho = random_density(&mut rng, Region::range(0, 4), 2);
                let b = Region::from([1]);
                let cc = Region::from([3]);
                let step = partial_trace(&partial_trace(rho.as_operator(), &b).unwrap(), &cc).unwrap();
                let once = partial_trace(rho.as_operator(), &b.union(&cc)).unwrap();
                prop_assert!(max_abs(&(step.matrix() - once.matrix())) < 1e-14);
            }

            #[test]
            fn sqrt_squares_back(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rho = random_density(&mut rng, Region::range(0, 2), 2);
                let s = matrix_function(rho.as_operator(), MatrixFn::Sqrt, 1e-14, false).unwrap();
                let sq = s.op.matrix() * s.op.matrix();
                prop_assert!(max_abs(&(sq - rho.matrix())) <= 1e-10 * max_abs(rho.matrix()));
            }

            #[test]
            fn spectral_reconstruction(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let h = random_hermitian(&mut rng, Region::range(0, 3), 2);
                let spec = h.spectral();
                prop_assert!(spec.reconstruction_error(h.matrix()) <= 1e-10);
            }
        }
    }
}
