//! Seeded state ensembles used by the estimators and inequality checks.

use alloc::vec::Vec;

use crate::classical::LowRankState;
use crate::lattice::Lattice;
use crate::operator::DensityOperator;
use crate::sampling::{mixture, random_bures, random_density, random_full_rank, stream_rng};

/// Weights of the `σ`-neighbourhood mixtures.
pub const MIXTURE_EPS: [f64; 3] = [1e-1, 1e-2, 1e-3];

/// Eigenvalue floor of the Haar-conjugated diagonal ensemble.
pub const FULL_RANK_FLOOR: f64 = 1e-6;

/// Ensemble drawn for sample `index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ensemble {
    HilbertSchmidt,
    Bures,
    Mixture(usize),
    FullRank,
}

impl Ensemble {
    /// Cycles HS, Bures, the three mixtures and the floored ensemble.
    pub fn for_index(index: usize) -> Self {
        match index % 6 {
            0 => Ensemble::HilbertSchmidt,
            1 => Ensemble::Bures,
            2..=4 => Ensemble::Mixture(index % 6 - 2),
            _ => Ensemble::FullRank,
        }
    }
}

/// Sample `index` of the mixed ensemble; stream `index` of `seed` makes it order-independent.
pub fn sample_state(lattice: &Lattice, sigma: &DensityOperator, seed: u64, index: usize) -> DensityOperator {
    let mut rng = stream_rng(seed, index as u64);
    let (full, d) = (lattice.full_region(), lattice.local_dim());
    match Ensemble::for_index(index) {
        Ensemble::HilbertSchmidt => random_density(&mut rng, full, d),
        Ensemble::Bures => random_bures(&mut rng, full, d),
        Ensemble::Mixture(j) => {
            let tau = random_density(&mut rng, full, d);
            mixture(sigma, &tau, MIXTURE_EPS[j])
        }
        Ensemble::FullRank => random_full_rank(&mut rng, full, d, FULL_RANK_FLOOR),
    }
}

/// `n` samples of the mixed ensemble.
pub fn sample_states(lattice: &Lattice, sigma: &DensityOperator, n: usize, seed: u64) -> Vec<DensityOperator> {
    (0..n).map(|i| sample_state(lattice, sigma, seed, i)).collect()
}

/// `n` full-rank states from the floored Haar-diagonal ensemble.
pub fn sample_full_rank(lattice: &Lattice, n: usize, seed: u64) -> Vec<DensityOperator> {
    (0..n)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            random_full_rank(&mut rng, lattice.full_region(), lattice.local_dim(), FULL_RANK_FLOOR)
        })
        .collect()
}

/// `n` rank-`rank` states for chains beyond dense reach.
pub fn sample_low_rank(lattice: &Lattice, n: usize, rank: usize, seed: u64) -> Vec<LowRankState> {
    (0..n)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            LowRankState::random(&mut rng, *lattice, rank)
        })
        .collect()
}
