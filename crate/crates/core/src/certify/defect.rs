//! Sufficient condition for the weaker mixing condition from boundary-factor spectra.

use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::gibbs::LocalPotential;
use crate::lattice::{Region, Splitting};
use crate::linalg::{self, CMat, ZERO};
use crate::operator::Split;

/// Outcome of `∏γ_i² > (2/3)∏δ_i² > 1/3`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SpinDefectReport {
    pub pass: bool,
    /// `∏γ_i²`.
    pub lhs: f64,
    /// `(2/3)∏δ_i²`.
    pub mid: f64,
}

pub fn spin_defect_condition(gammas: &[f64], deltas: &[f64]) -> Result<SpinDefectReport> {
    if gammas.len() != deltas.len() {
        return Err(Error::DimensionMismatch(gammas.len(), deltas.len()));
    }
    for (&g, &d) in gammas.iter().zip(deltas) {
        if !(g > 0.0 && d > 0.0) || !g.is_finite() || !d.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!(
                "factor extrema must be positive and finite, got ({g}, {d})"
            )));
        }
        if g > d {
            return Err(Error::InvalidParameter(alloc::format!("gamma {g} exceeds delta {d}")));
        }
    }
    let lhs: f64 = gammas.iter().map(|g| g * g).product();
    let mid = 2.0 / 3.0 * deltas.iter().map(|d| d * d).product::<f64>();
    Ok(SpinDefectReport {
        pass: lhs > mid && mid > 1.0 / 3.0,
        lhs,
        mid,
    })
}

/// One boundary factor `exp(−β Σ terms)` between consecutive segments.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct InterfaceFactor {
    /// Block index, starting at 0.
    pub block: usize,
    /// Segment pair such as `"CE"` or `"FC"`.
    pub label: String,
    /// First site to the right of the interface.
    pub position: usize,
    pub support: Region,
    pub n_terms: usize,
    pub gamma: f64,
    pub delta: f64,
}

/// Boundary factors and their per-block products.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DefectFactors {
    pub interfaces: Vec<InterfaceFactor>,
    pub gammas: Vec<f64>,
    pub deltas: Vec<f64>,
}

const LABELS: [&str; 4] = ["CE", "ED", "DF", "FC"];

/// Groups every term by the leftmost segment interface its support crosses and
/// takes eigenvalue extrema of the unnormalized factor `exp(−β H_group)`.
pub fn defect_factors(potential: &LocalPotential, beta: f64, splitting: &Splitting) -> Result<DefectFactors> {
    let lattice = potential.lattice();
    if splitting.n_sites != lattice.n_sites() {
        return Err(Error::DimensionMismatch(splitting.n_sites, lattice.n_sites()));
    }
    let d = lattice.local_dim();
    let positions: Vec<usize> = splitting
        .ordered_segments()
        .iter()
        .skip(1)
        .map(|s| s.sites()[0])
        .collect();
    let mut groups: Vec<Vec<usize>> = alloc::vec![Vec::new(); positions.len()];
    for (t, term) in potential.terms().iter().enumerate() {
        let sites = term.op.support().sites();
        let (lo, hi) = match (sites.first(), sites.last()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => continue,
        };
        if let Some(j) = positions.iter().position(|&p| lo < p && p <= hi) {
            groups[j].push(t);
        }
    }
    let mut interfaces = Vec::with_capacity(positions.len());
    for (j, (&position, group)) in positions.iter().zip(&groups).enumerate() {
        let support = group
            .iter()
            .fold(Region::empty(), |acc, &t| acc.union(potential.terms()[t].op.support()));
        let (gamma, delta) = if group.is_empty() {
            (1.0, 1.0)
        } else {
            let dim = lattice.region_dim(&support);
            let mut h = CMat::from_element(dim, dim, ZERO);
            for &t in group {
                let op = &potential.terms()[t].op;
                let split = Split::new(&support, op.support(), d);
                h += split.embed(op.matrix());
            }
            let spectrum = linalg::eigvalsh(&linalg::hermitian_part(&h));
            let (lo, hi) = (spectrum[0], spectrum[spectrum.len() - 1]);
            (Float::exp(-beta * hi), Float::exp(-beta * lo))
        };
        interfaces.push(InterfaceFactor {
            block: j / 4,
            label: LABELS[j % 4].into(),
            position,
            support,
            n_terms: group.len(),
            gamma,
            delta,
        });
    }
    let mut gammas = alloc::vec![1.0; splitting.n_blocks];
    let mut deltas = alloc::vec![1.0; splitting.n_blocks];
    for f in &interfaces {
        gammas[f.block] *= f.gamma;
        deltas[f.block] *= f.delta;
    }
    Ok(DefectFactors {
        interfaces,
        gammas,
        deltas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::mixing::{mixing_norm, GibbsRef};
    use crate::classical::ClassicalGibbs;
    use crate::gibbs::presets::Preset;
    use crate::lattice::standard_splitting;

    #[test]
    fn scalar_examples() {
        let r = spin_defect_condition(&[1.0], &[1.0]).unwrap();
        assert!(r.pass && r.lhs == 1.0 && (r.mid - 2.0 / 3.0).abs() < 1e-15);
        let r = spin_defect_condition(&[0.9], &[1.0]).unwrap();
        assert!((r.lhs - 0.81).abs() < 1e-15 && r.pass);
        let r = spin_defect_condition(&[0.5], &[1.0]).unwrap();
        assert!(!r.pass && (r.lhs - 0.25).abs() < 1e-15);
        let r = spin_defect_condition(&[0.9, 0.9], &[0.95, 0.95]).unwrap();
        assert!((r.lhs - 0.6561).abs() < 1e-14 && (r.mid - 2.0 / 3.0 * 0.81450625).abs() < 1e-14 && r.pass);
        // the middle inequality can fail on its own
        let r = spin_defect_condition(&[0.7], &[0.7]).unwrap();
        assert!(!r.pass && r.lhs > r.mid);
        assert!(spin_defect_condition(&[0.0], &[1.0]).is_err());
        assert!(spin_defect_condition(&[1.2], &[1.0]).is_err());
        assert!(spin_defect_condition(&[1.0], &[]).is_err());
    }

    #[test]
    fn interfaces_follow_the_segment_layout() {
        let sp = standard_splitting(2, 1, 2).unwrap();
        let lat = sp.lattice(2, crate::classical::CLASSICAL_DIM_CAP).unwrap();
        let pot = Preset::ising(1.0, 0.2).build(lat).unwrap();
        let f = defect_factors(&pot, 0.4, &sp).unwrap();
        let labels: Vec<&str> = f.interfaces.iter().map(|i| i.label.as_str()).collect();
        assert_eq!(labels, ["CE", "ED", "DF", "FC", "CE", "ED"]);
        assert_eq!(f.gammas.len(), 2);
        // every two-site bond that straddles an interface is assigned exactly once
        let assigned: usize = f.interfaces.iter().map(|i| i.n_terms).sum();
        assert_eq!(assigned, f.interfaces.len());
        for i in &f.interfaces {
            assert!(i.gamma <= i.delta && i.support.contains(i.position) && i.support.contains(i.position - 1));
        }
    }

    #[test]
    fn infinite_temperature_factors_are_trivial() {
        let sp = standard_splitting(2, 1, 1).unwrap();
        let lat = sp.lattice(2, 1 << 12).unwrap();
        let pot = Preset::defect().build(lat).unwrap();
        let f = defect_factors(&pot, 0.0, &sp).unwrap();
        assert!(f.gammas.iter().chain(&f.deltas).all(|&x| x == 1.0));
        assert!(spin_defect_condition(&f.gammas, &f.deltas).unwrap().pass);
    }

    #[test]
    fn high_temperature_defect_chain_meets_both_conditions() {
        let sp = standard_splitting(2, 1, 1).unwrap();
        let lat = sp.lattice(2, 1 << 12).unwrap();
        let pot = Preset::defect().build(lat).unwrap();
        for beta in [0.01, 0.03] {
            let f = defect_factors(&pot, beta, &sp).unwrap();
            let report = spin_defect_condition(&f.gammas, &f.deltas).unwrap();
            let cl = ClassicalGibbs::new(&pot, beta).unwrap();
            let h = mixing_norm(GibbsRef::Classical(&cl), &sp.c(), &sp.d()).unwrap();
            assert!(report.pass && h < 0.5, "beta {beta}: {report:?}, h = {h}");
        }
    }
}
