//! Diagonal Gibbs states stored as probability vectors, paired with low-rank quantum states.
//!
//! This engine reaches chains whose dense density matrices would not fit in
//! memory: `σ` costs `D` numbers and a rank-`r` state `ρ = ΨΨ†` costs `D·r`.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use spin::RwLock;

use crate::entropy::entropy_of_spectrum;
use crate::error::{Error, Result};
use crate::gibbs::LocalPotential;
use crate::lattice::{Lattice, Region};
use crate::linalg::{self, CMat};
use crate::operator::Split;
use crate::sampling::ginibre;

/// Largest chain dimension handled by the classical engine.
pub const CLASSICAL_DIM_CAP: usize = 1 << 22;

/// Gibbs distribution of a diagonal potential.
pub struct ClassicalGibbs {
    lattice: Lattice,
    k: usize,
    beta: f64,
    probs: Arc<Vec<f64>>,
    log_partition: f64,
    cache: RwLock<BTreeMap<Region, Arc<Vec<f64>>>>,
}

impl core::fmt::Debug for ClassicalGibbs {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ClassicalGibbs")
            .field("n_sites", &self.lattice.n_sites())
            .field("beta", &self.beta)
            .finish()
    }
}

impl ClassicalGibbs {
    pub fn new(potential: &LocalPotential, beta: f64) -> Result<Self> {
        if !potential.is_diagonal() {
            return Err(Error::InvalidParameter(
                "classical engine needs a diagonal potential".into(),
            ));
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidParameter(alloc::format!(
                "beta must be finite and non-negative, got {beta}"
            )));
        }
        let n = potential.lattice().n_sites();
        let d = potential.lattice().local_dim();
        let lattice = Lattice::chain_with_cap(n, d, CLASSICAL_DIM_CAP)?;
        let dim = lattice.dim();
        let full = lattice.full_region();
        let mut energy = alloc::vec![0.0f64; dim];
        for term in potential.terms() {
            let split = Split::new(&full, term.op.support(), d);
            let m = term.op.matrix();
            for a in 0..split.sub_dim {
                let e = m[(a, a)].re;
                for t in 0..split.rest_dim {
                    energy[split.index(a, t)] += e;
                }
            }
        }
        let e_min = energy.iter().copied().fold(f64::INFINITY, f64::min);
        let mut probs: Vec<f64> = energy.iter().map(|&e| Float::exp(-beta * (e - e_min))).collect();
        let z: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= z;
        }
        Ok(Self {
            lattice,
            k: potential.k(),
            beta,
            probs: Arc::new(probs),
            log_partition: Float::ln(z) - beta * e_min,
            cache: RwLock::new(BTreeMap::new()),
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Marginal distribution on `region`, indexed with the leftmost site most significant.
    pub fn marginal(&self, region: &Region) -> Result<Arc<Vec<f64>>> {
        self.lattice.check_region(region)?;
        if *region == self.lattice.full_region() {
            return Ok(self.probs.clone());
        }
        if let Some(m) = self.cache.read().get(region) {
            return Ok(m.clone());
        }
        let m = Arc::new(marginalize(
            &self.probs,
            &self.lattice.full_region(),
            region,
            self.lattice.local_dim(),
        ));
        self.cache.write().insert(region.clone(), m.clone());
        Ok(m)
    }

    /// Dense diagonal matrix of the marginal on `region`.
    pub fn marginal_matrix(&self, region: &Region) -> Result<CMat> {
        Ok(linalg::diag(&self.marginal(region)?))
    }
}

/// Sums a distribution on `support` down to `region ⊂ support`.
pub(crate) fn marginalize(p: &[f64], support: &Region, region: &Region, d: usize) -> Vec<f64> {
    let split = Split::new(support, region, d);
    (0..split.sub_dim)
        .map(|a| (0..split.rest_dim).map(|t| p[split.index(a, t)]).sum())
        .collect()
}

/// `ρ = ΨΨ†` with `Ψ` of shape `D × r` and unit Frobenius norm.
#[derive(Debug, Clone)]
pub struct LowRankState {
    lattice: Lattice,
    psi: CMat,
}

impl LowRankState {
    pub fn new(lattice: Lattice, psi: CMat) -> Result<Self> {
        if psi.nrows() != lattice.dim() {
            return Err(Error::DimensionMismatch(psi.nrows(), lattice.dim()));
        }
        let norm = linalg::frobenius(&psi);
        if !(norm > 0.0) {
            return Err(Error::NotDensity("zero factor".into()));
        }
        Ok(Self {
            lattice,
            psi: psi.scale(1.0 / norm),
        })
    }

    /// Ginibre factor of the given rank, i.e. an induced-measure random state.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, lattice: Lattice, rank: usize) -> Self {
        let psi = ginibre(rng, lattice.dim(), rank.max(1));
        Self::new(lattice, psi).expect("nonzero Gaussian factor")
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn rank(&self) -> usize {
        self.psi.ncols()
    }

    pub fn factor(&self) -> &CMat {
        &self.psi
    }

    /// Dense `ΨΨ†`; only sensible for small chains.
    pub fn to_dense(&self) -> CMat {
        &self.psi * self.psi.adjoint()
    }

    /// Diagonal of `ρ_X` in the computational basis.
    pub fn diagonal(&self, region: &Region) -> Vec<f64> {
        let full: Vec<f64> = self
            .psi
            .row_iter()
            .map(|row| row.iter().map(|z| z.norm_sqr()).sum())
            .collect();
        marginalize(&full, &self.lattice.full_region(), region, self.lattice.local_dim())
    }

    /// `W` with `ρ_X = W W†`, columns indexed by (configuration of `X^c`, rank index).
    fn stacked(&self, region: &Region) -> CMat {
        let split = Split::new(&self.lattice.full_region(), region, self.lattice.local_dim());
        let r = self.rank();
        let mut w = CMat::zeros(split.sub_dim, split.rest_dim * r);
        for t in 0..split.rest_dim {
            for a in 0..split.sub_dim {
                let row = split.index(a, t);
                for j in 0..r {
                    w[(a, t * r + j)] = self.psi[(row, j)];
                }
            }
        }
        w
    }

    /// `ρ_X` as a dense matrix.
    pub fn reduced(&self, region: &Region) -> CMat {
        let w = self.stacked(region);
        &w * w.adjoint()
    }

    /// Nonzero spectrum of `ρ_X`, from whichever of `W W†` and `W† W` is smaller.
    pub fn reduced_spectrum(&self, region: &Region) -> Vec<f64> {
        if region.is_empty() {
            return alloc::vec![1.0];
        }
        let w = self.stacked(region);
        let gram = if w.nrows() <= w.ncols() {
            &w * w.adjoint()
        } else {
            w.adjoint() * &w
        };
        linalg::eigvalsh(&gram)
    }

    pub fn entropy(&self, region: &Region) -> f64 {
        entropy_of_spectrum(&self.reduced_spectrum(region), crate::entropy::EPS_FLOOR)
    }
}

/// `Σ_x p(x) log q(x)`, with `0 log 0 = 0`.
pub(crate) fn cross_entropy(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi != 0.0)
        .map(|(&pi, &qi)| pi * Float::ln(qi))
        .sum()
}
