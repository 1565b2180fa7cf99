//! Seeded random operators and state ensembles.

use nalgebra::DVector;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::lattice::Region;
use crate::linalg::{self, c, CMat, C64};
use crate::operator::{DensityOperator, HermitianOperator};

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Matrix of i.i.d. standard complex Gaussians.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let s = Float::sqrt(0.5);
    CMat::from_fn(rows, cols, |_, _| C64::new(normal(rng) * s, normal(rng) * s))
}

/// Haar-random unitary via QR of a Ginibre matrix with phase correction.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMat {
    let qr = ginibre(rng, dim, dim).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0) };
        for i in 0..dim {
            u[(i, j)] *= phase;
        }
    }
    u
}

/// Random Hermitian operator with GUE-distributed entries.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, support: Region, local_dim: usize) -> HermitianOperator {
    let dim = local_dim.pow(support.len() as u32);
    let g = ginibre(rng, dim, dim);
    HermitianOperator::from_parts(support, local_dim, linalg::hermitian_part(&g))
}

/// Hilbert–Schmidt ensemble: `G G† / tr`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, support: Region, local_dim: usize) -> DensityOperator {
    let dim = local_dim.pow(support.len() as u32);
    let g = ginibre(rng, dim, dim);
    DensityOperator::normalized(support, local_dim, &g * g.adjoint())
}

/// Bures ensemble: `(𝟙+U) G G† (𝟙+U)† / tr`.
pub fn random_bures<R: Rng + ?Sized>(rng: &mut R, support: Region, local_dim: usize) -> DensityOperator {
    let dim = local_dim.pow(support.len() as u32);
    let u = haar_unitary(rng, dim) + linalg::identity(dim);
    let g = ginibre(rng, dim, dim);
    let m = &u * g;
    DensityOperator::normalized(support, local_dim, &m * m.adjoint())
}

/// Haar-conjugated diagonal state with every eigenvalue at least `floor`.
pub fn random_full_rank<R: Rng + ?Sized>(
    rng: &mut R,
    support: Region,
    local_dim: usize,
    floor: f64,
) -> DensityOperator {
    let dim = local_dim.pow(support.len() as u32);
    let raw: DVector<f64> = DVector::from_fn(dim, |_, _| -Float::ln(rng.random::<f64>().max(1e-300)));
    let total: f64 = raw.sum();
    let weights: alloc::vec::Vec<f64> = raw
        .iter()
        .map(|w| floor + (1.0 - dim as f64 * floor) * w / total)
        .collect();
    let u = haar_unitary(rng, dim);
    let m = &u * linalg::diag(&weights) * u.adjoint();
    DensityOperator::normalized(support, local_dim, m)
}

/// Haar-random pure state.
pub fn random_pure<R: Rng + ?Sized>(rng: &mut R, support: Region, local_dim: usize) -> DensityOperator {
    let dim = local_dim.pow(support.len() as u32);
    let v = ginibre(rng, dim, 1);
    DensityOperator::normalized(support, local_dim, &v * v.adjoint())
}

/// `(1−ε) σ + ε τ`.
pub fn mixture(sigma: &DensityOperator, tau: &DensityOperator, eps: f64) -> DensityOperator {
    DensityOperator::normalized(
        sigma.support().clone(),
        sigma.local_dim(),
        sigma.matrix().scale(1.0 - eps) + tau.matrix().scale(eps),
    )
}

/// Random state with a fixed product structure `ρ_A ⊗ ρ_B` on a bipartition of `support`.
pub fn random_product<R: Rng + ?Sized>(rng: &mut R, a: &Region, b: &Region, local_dim: usize) -> DensityOperator {
    let ra = random_density(rng, a.clone(), local_dim);
    let rb = random_density(rng, b.clone(), local_dim);
    crate::operator::tensor_states(&ra, &rb).expect("disjoint regions")
}
