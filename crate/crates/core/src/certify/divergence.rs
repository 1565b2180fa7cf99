//! Relative entropies of marginals, computed through a common interface.

use alloc::collections::BTreeMap;

use core::cell::RefCell;

use crate::classical::{cross_entropy, ClassicalGibbs, LowRankState};
use crate::entropy::{entropy_of_spectrum, EPS_FLOOR};
use crate::error::{Error, Result};
use crate::gibbs::GibbsState;
use crate::lattice::Region;
use crate::linalg;
use crate::operator::DensityOperator;

/// Entropic data of a pair `(ρ, σ)` on every sub-region.
pub trait DivergenceOracle {
    fn full_region(&self) -> Region;

    /// `S(ρ_X)`, zero on the empty region.
    fn entropy(&self, region: &Region) -> Result<f64>;

    /// `tr[ρ_X log σ_X]`, zero on the empty region.
    fn cross(&self, region: &Region) -> Result<f64>;

    /// `D(ρ_X‖σ_X)`.
    fn relative(&self, region: &Region) -> Result<f64> {
        if region.is_empty() {
            return Ok(0.0);
        }
        Ok(-self.entropy(region)? - self.cross(region)?)
    }

    /// `D_A(ρ‖σ) = D(ρ‖σ) − D(ρ_{A^c}‖σ_{A^c})`.
    fn conditional(&self, a: &Region) -> Result<f64> {
        let full = self.full_region();
        Ok(self.relative(&full)? - self.relative(&full.difference(a))?)
    }
}

/// Dense `ρ` against a Gibbs state with cached marginals.
pub struct DenseDivergence<'a> {
    sigma: &'a GibbsState,
    rho: &'a DensityOperator,
    cache: RefCell<BTreeMap<Region, (f64, f64)>>,
}

impl<'a> DenseDivergence<'a> {
    pub fn new(sigma: &'a GibbsState, rho: &'a DensityOperator) -> Result<Self> {
        if *rho.support() != sigma.lattice().full_region() || rho.local_dim() != sigma.lattice().local_dim() {
            return Err(Error::DimensionMismatch(rho.dim(), sigma.lattice().dim()));
        }
        Ok(Self {
            sigma,
            rho,
            cache: RefCell::new(BTreeMap::new()),
        })
    }

    fn pair(&self, region: &Region) -> Result<(f64, f64)> {
        if region.is_empty() {
            return Ok((0.0, 0.0));
        }
        if let Some(&v) = self.cache.borrow().get(region) {
            return Ok(v);
        }
        let reduced = self.rho.reduce(region)?;
        let s = entropy_of_spectrum(&linalg::eigvalsh(reduced.matrix()), EPS_FLOOR);
        let marginal = self.sigma.marginal(region)?;
        let (cross, _) = marginal.cross(reduced.matrix()).ok_or(Error::NotInSupport)?;
        self.cache.borrow_mut().insert(region.clone(), (s, cross));
        Ok((s, cross))
    }
}

impl DivergenceOracle for DenseDivergence<'_> {
    fn full_region(&self) -> Region {
        self.sigma.lattice().full_region()
    }

    fn entropy(&self, region: &Region) -> Result<f64> {
        Ok(self.pair(region)?.0)
    }

    fn cross(&self, region: &Region) -> Result<f64> {
        Ok(self.pair(region)?.1)
    }
}

/// Low-rank `ρ` against a classical Gibbs distribution.
pub struct ClassicalDivergence<'a> {
    sigma: &'a ClassicalGibbs,
    rho: &'a LowRankState,
    entropies: RefCell<BTreeMap<Region, f64>>,
}

impl<'a> ClassicalDivergence<'a> {
    pub fn new(sigma: &'a ClassicalGibbs, rho: &'a LowRankState) -> Result<Self> {
        if rho.lattice().dim() != sigma.lattice().dim() {
            return Err(Error::DimensionMismatch(rho.lattice().dim(), sigma.lattice().dim()));
        }
        Ok(Self {
            sigma,
            rho,
            entropies: RefCell::new(BTreeMap::new()),
        })
    }
}

impl DivergenceOracle for ClassicalDivergence<'_> {
    fn full_region(&self) -> Region {
        self.sigma.lattice().full_region()
    }

    fn entropy(&self, region: &Region) -> Result<f64> {
        if let Some(&v) = self.entropies.borrow().get(region) {
            return Ok(v);
        }
        let s = self.rho.entropy(region);
        self.entropies.borrow_mut().insert(region.clone(), s);
        Ok(s)
    }

    fn cross(&self, region: &Region) -> Result<f64> {
        if region.is_empty() {
            return Ok(0.0);
        }
        let p = self.rho.diagonal(region);
        Ok(cross_entropy(&p, &self.sigma.marginal(region)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{conditional_relative_entropy, relative_entropy};
    use crate::gibbs::gibbs_state;
    use crate::gibbs::presets::Preset;
    use crate::lattice::make_chain;
    use crate::sampling::{random_density, stream_rng};

    #[test]
    fn dense_oracle_matches_entropy_module() {
        let lat = make_chain(4, 2).unwrap();
        let g = gibbs_state(&Preset::ClusterZxz { j: 1.0 }.build(lat).unwrap(), 0.6).unwrap();
        let mut rng = stream_rng(70, 0);
        let rho = random_density(&mut rng, lat.full_region(), 2);
        let o = DenseDivergence::new(&g, &rho).unwrap();
        let full = o.relative(&lat.full_region()).unwrap();
        assert!((full - relative_entropy(&rho, g.sigma()).unwrap().value).abs() < 1e-12);
        for a in [Region::single(0), Region::from([1, 2]), lat.full_region()] {
            let oracle = conditional_relative_entropy(&rho, g.sigma(), &a).unwrap().value;
            assert!((o.conditional(&a).unwrap() - oracle).abs() < 1e-12);
        }
        assert_eq!(o.relative(&Region::empty()).unwrap(), 0.0);
    }

    #[test]
    fn classical_oracle_matches_dense_oracle() {
        let lat = make_chain(5, 2).unwrap();
        let pot = Preset::classical(4).build(lat).unwrap();
        let g = gibbs_state(&pot, 0.9).unwrap();
        let cl = ClassicalGibbs::new(&pot, 0.9).unwrap();
        let mut rng = stream_rng(71, 0);
        let low = LowRankState::random(&mut rng, lat, 2);
        let rho = DensityOperator::from_matrix(lat.full_region(), 2, low.to_dense()).unwrap();
        let (dense, classical) = (
            DenseDivergence::new(&g, &rho).unwrap(),
            ClassicalDivergence::new(&cl, &low).unwrap(),
        );
        for a in [Region::single(2), Region::from([0, 1, 4]), lat.full_region()] {
            assert!((dense.conditional(&a).unwrap() - classical.conditional(&a).unwrap()).abs() < 1e-11);
            assert!((dense.cross(&a).unwrap() - classical.cross(&a).unwrap()).abs() < 1e-12);
        }
    }
}
