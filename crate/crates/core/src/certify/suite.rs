//! Randomized property suites for entropies, Markov structure and generators.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use crate::dynamics::{check_detailed_balance, evolve_signed, lindbladian};
use crate::entropy::{conditional_relative_entropy, relative_entropy, von_neumann_entropy};
use crate::error::Result;
use crate::gibbs::presets::Preset;
use crate::gibbs::{cmi, gibbs_state, qmc_log_defect_gibbs, GibbsState};
use crate::lattice::{make_chain, Region};
use crate::linalg::{self, max_abs};
use crate::operator::{tensor_states, DensityOperator};
use crate::sampling::{random_density, random_full_rank, random_hermitian, stream_rng};
use crate::tol::Tolerances;

/// Whether a property is an inequality (signed slack) or an identity (absolute residual).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PropertyKind {
    Inequality,
    Identity,
}

/// Aggregate over the instances of one property.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PropertyResult {
    pub name: String,
    pub kind: PropertyKind,
    pub n_instances: usize,
    /// Smallest slack for inequalities, largest residual for identities.
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl PropertyResult {
    fn new(name: &str, kind: PropertyKind, tolerance: f64) -> Self {
        let worst = match kind {
            PropertyKind::Inequality => f64::INFINITY,
            PropertyKind::Identity => 0.0,
        };
        Self {
            name: name.into(),
            kind,
            n_instances: 0,
            worst,
            tolerance,
            pass: true,
        }
    }

    fn record(&mut self, value: f64) {
        self.n_instances += 1;
        match self.kind {
            PropertyKind::Inequality => {
                self.worst = self.worst.min(value);
                self.pass &= value >= -self.tolerance;
            }
            PropertyKind::Identity => {
                self.worst = self.worst.max(value);
                self.pass &= value <= self.tolerance;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SuiteReport {
    pub properties: Vec<PropertyResult>,
    pub pass: bool,
}

impl SuiteReport {
    fn from(properties: Vec<PropertyResult>) -> Self {
        let pass = properties.iter().all(|p| p.pass);
        Self { properties, pass }
    }

    /// Combines reports of the same suite over disjoint instance sets.
    pub fn merge(parts: Vec<SuiteReport>) -> Option<SuiteReport> {
        let mut iter = parts.into_iter();
        let mut acc = iter.next()?.properties;
        for part in iter {
            for (a, p) in acc.iter_mut().zip(part.properties) {
                debug_assert_eq!(a.name, p.name);
                a.n_instances += p.n_instances;
                a.worst = match a.kind {
                    PropertyKind::Inequality => a.worst.min(p.worst),
                    PropertyKind::Identity => a.worst.max(p.worst),
                };
                a.pass &= p.pass;
            }
        }
        Some(SuiteReport::from(acc))
    }

    pub fn get(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }
}

fn rel(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    Ok(relative_entropy(rho, sigma)?.value)
}

/// Strong subadditivity, relative-entropy properties and conditional non-negativity on random qubit chains.
pub fn entropy_property_suite(n_instances: usize, seed: u64, tol: &Tolerances) -> Result<SuiteReport> {
    entropy_property_range(0..n_instances, seed, tol)
}

/// The entropy suite restricted to instances `range`; instance `i` always uses stream `i` of `seed`.
pub fn entropy_property_range(range: Range<usize>, seed: u64, tol: &Tolerances) -> Result<SuiteReport> {
    let mut ssa = PropertyResult::new("strong_subadditivity", PropertyKind::Inequality, tol.ssa);
    let mut nonneg = PropertyResult::new("relative_entropy_nonnegative", PropertyKind::Inequality, tol.ssa);
    let mut additive = PropertyResult::new("relative_entropy_additive", PropertyKind::Identity, tol.identity);
    let mut superadd = PropertyResult::new("relative_entropy_superadditive", PropertyKind::Inequality, tol.ssa);
    let mut dpi = PropertyResult::new("data_processing", PropertyKind::Inequality, tol.ssa);
    let mut cre = PropertyResult::new("conditional_nonnegative", PropertyKind::Inequality, tol.cre);
    for i in range {
        let mut rng = stream_rng(seed, i as u64);
        let n = 3 + i % 2;
        let full = Region::range(0, n);
        let rho = random_density(&mut rng, full.clone(), 2);
        let sigma = random_full_rank(&mut rng, full.clone(), 2, 1e-3);
        let a_end = rng.random_range(1..n - 1);
        let b_end = rng.random_range(a_end + 1..n);
        let (a, b, c) = (
            Region::range(0, a_end),
            Region::range(a_end, b_end),
            Region::range(b_end, n),
        );
        let s = |r: &Region| -> Result<f64> { Ok(von_neumann_entropy(&rho.reduce(r)?)) };
        ssa.record(s(&a.union(&b))? + s(&b.union(&c))? - s(&full)? - s(&b)?);
        nonneg.record(rel(&rho, &sigma)?);
        // additivity on a product pair split at a random cut
        let left = Region::range(0, a_end);
        let right = Region::range(a_end, n);
        let (r1, r2) = (
            random_density(&mut rng, left.clone(), 2),
            random_density(&mut rng, right.clone(), 2),
        );
        let (s1, s2) = (
            random_full_rank(&mut rng, left.clone(), 2, 1e-3),
            random_full_rank(&mut rng, right.clone(), 2, 1e-3),
        );
        let joint = rel(&tensor_states(&r1, &r2)?, &tensor_states(&s1, &s2)?)?;
        additive.record((joint - rel(&r1, &s1)? - rel(&r2, &s2)?).abs());
        // superadditivity of ρ_AB against a product reference
        let product = tensor_states(&s1, &s2)?;
        superadd.record(rel(&rho, &product)? - rel(&rho.reduce(&left)?, &s1)? - rel(&rho.reduce(&right)?, &s2)?);
        dpi.record(rel(&rho, &sigma)? - rel(&rho.reduce(&b)?, &sigma.reduce(&b)?)?);
        cre.record(conditional_relative_entropy(&rho, &sigma, &a)?.value);
    }
    Ok(SuiteReport::from(alloc::vec![
        ssa, nonneg, additive, superadd, dpi, cre
    ]))
}

/// One Markov-structure measurement.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct QmcRow {
    pub preset: String,
    pub beta: f64,
    pub n_sites: usize,
    pub a: Region,
    pub b: Region,
    pub c: Region,
    pub cmi: f64,
    pub log_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct QmcSuiteReport {
    pub rows: Vec<QmcRow>,
    pub max_cmi: f64,
    pub max_log_defect: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Contiguous tripartitions `A | B | C` of an `n`-site chain with `d(A, C) > k`.
pub fn shielded_tripartitions(n: usize, k: usize) -> Vec<(Region, Region, Region)> {
    let mut out = Vec::new();
    for a_end in 1..n {
        for b_end in a_end + 1..n {
            // d(A, C) = b_end − a_end + 1
            if b_end - a_end + 1 > k {
                out.push((
                    Region::range(0, a_end),
                    Region::range(a_end, b_end),
                    Region::range(b_end, n),
                ));
            }
        }
    }
    out
}

/// Conditional mutual information and log defect of `σ` over every shielded tripartition.
pub fn qmc_structure_suite(
    presets: &[Preset],
    betas: &[f64],
    sizes: &[usize],
    tol: &Tolerances,
) -> Result<QmcSuiteReport> {
    let mut rows = Vec::new();
    for preset in presets {
        for &n in sizes {
            let pot = preset.build(make_chain(n, 2)?)?;
            for &beta in betas {
                let g = gibbs_state(&pot, beta)?;
                for (a, b, c) in shielded_tripartitions(n, pot.k()) {
                    rows.push(QmcRow {
                        preset: preset.name().into(),
                        beta,
                        n_sites: n,
                        cmi: cmi(g.sigma(), &a, &b, &c)?,
                        log_defect: qmc_log_defect_gibbs(&g, &a, &b, &c)?,
                        a,
                        b,
                        c,
                    });
                }
            }
        }
    }
    let max_cmi = rows.iter().map(|r| r.cmi).fold(0.0, f64::max);
    let max_log_defect = rows.iter().map(|r| r.log_defect).fold(0.0, f64::max);
    Ok(QmcSuiteReport {
        pass: max_cmi <= tol.qmc && max_log_defect <= tol.qmc,
        rows,
        max_cmi,
        max_log_defect,
        tolerance: tol.qmc,
    })
}

/// Step of the central difference used for `−dD/dt`.
pub const DERIVATIVE_STEP: f64 = 1e-5;
/// Agreement required between entropy production and `−dD/dt`.
pub const DERIVATIVE_TOLERANCE: f64 = 1e-6;
/// Fixed-point residual `‖L*(σ)‖` allowed.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-10;
/// Trace of `L*(X)` allowed for unit-norm `X`.
pub const TRACE_TOLERANCE: f64 = 1e-12;
/// Residual of `L*_A + L*_B − L*_{A∪B} − L*_{A∩B}`.
pub const DECOMPOSITION_TOLERANCE: f64 = 1e-10;

/// Generator correctness on `σ`: fixed point, trace annihilation, detailed balance,
/// decomposition identity, and entropy production as the entropy derivative.
pub fn dynamics_property_suite(sigma: &GibbsState, n_instances: usize, seed: u64) -> Result<SuiteReport> {
    let lattice = *sigma.lattice();
    let n = lattice.n_sites();
    let full = lattice.full_region();
    let d = lattice.local_dim();
    let gen = lindbladian(sigma, &full)?;
    let mut fixed = PropertyResult::new("fixed_point", PropertyKind::Identity, FIXED_POINT_TOLERANCE);
    fixed.record(max_abs(&gen.apply(sigma.sigma().matrix())));
    let mut trace = PropertyResult::new("trace_annihilation", PropertyKind::Identity, TRACE_TOLERANCE);
    let mut decomposition = PropertyResult::new("decomposition", PropertyKind::Identity, DECOMPOSITION_TOLERANCE);
    let mut derivative = PropertyResult::new(
        "entropy_production_derivative",
        PropertyKind::Identity,
        DERIVATIVE_TOLERANCE,
    );
    let balance = check_detailed_balance(sigma, &full, n_instances.max(1), seed)?;
    let mut detailed = PropertyResult::new("detailed_balance", PropertyKind::Identity, balance.tolerance);
    detailed.record(balance.max_residual);
    for i in 0..n_instances {
        let mut rng = stream_rng(seed, (1 << 32) + i as u64);
        let x = random_hermitian(&mut rng, full.clone(), d).into_matrix();
        let x = x.scale(1.0 / linalg::frobenius(&x));
        trace.record(linalg::trace(&gen.apply(&x)).norm());
        // overlapping windows A and B
        let lo = rng.random_range(0..n);
        let hi = rng.random_range(lo..n);
        let (a, b) = (Region::range(0, hi + 1), Region::range(lo, n));
        let rho = random_full_rank(&mut rng, full.clone(), d, 1e-2);
        let la = lindbladian(sigma, &a)?.apply(rho.matrix());
        let lb = lindbladian(sigma, &b)?.apply(rho.matrix());
        let lu = lindbladian(sigma, &a.union(&b))?.apply(rho.matrix());
        let li = lindbladian(sigma, &a.intersection(&b))?.apply(rho.matrix());
        decomposition.record(max_abs(&(la + lb - lu - li)));
        let ep = gen.entropy_production(&rho).value;
        let h = DERIVATIVE_STEP;
        let at = |t: f64| -> Result<f64> {
            let m = evolve_signed(&gen, rho.matrix(), t)?;
            rel(&DensityOperator::normalized(full.clone(), d, m), sigma.sigma())
        };
        let (forward, backward) = (at(h)?, at(-h)?);
        derivative.record((ep + (forward - backward) / (2.0 * h)).abs());
    }
    Ok(SuiteReport::from(alloc::vec![
        fixed,
        trace,
        detailed,
        decomposition,
        derivative
    ]))
}

/// `EP_x(ρ) − D_x(ρ‖σ)` over random full-rank states and every site.
pub fn site_entropy_production_suite(
    sigma: &GibbsState,
    n_instances: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<PropertyResult> {
    let lattice = *sigma.lattice();
    let mut result = PropertyResult::new("site_entropy_production", PropertyKind::Inequality, tol.ep);
    let gens = lattice
        .full_region()
        .iter()
        .map(|x| lindbladian(sigma, &Region::single(x)))
        .collect::<Result<Vec<_>>>()?;
    for i in 0..n_instances {
        let mut rng = stream_rng(seed, i as u64);
        let rho = random_full_rank(&mut rng, lattice.full_region(), lattice.local_dim(), 1e-3);
        let x = i % lattice.n_sites();
        let ep = gens[x].entropy_production(&rho).value;
        let dx = conditional_relative_entropy(&rho, sigma.sigma(), &Region::single(x))?.value;
        result.record(ep - dx);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_suite_passes_and_counts() {
        let r = entropy_property_suite(30, 1, &Tolerances::default()).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.properties.iter().all(|p| p.n_instances == 30));
        assert!(r.get("strong_subadditivity").unwrap().worst >= -1e-9);
        let parts = [0..7, 7..19, 19..30]
            .into_iter()
            .map(|range| entropy_property_range(range, 1, &Tolerances::default()).unwrap())
            .collect();
        assert_eq!(SuiteReport::merge(parts).unwrap(), r);
    }

    #[test]
    fn tripartitions_respect_the_shield() {
        let t = shielded_tripartitions(5, 2);
        assert!(t
            .iter()
            .all(|(a, b, c)| b.len() >= 2 && a.len() + b.len() + c.len() == 5));
        assert_eq!(t.len(), 3);
        assert!(shielded_tripartitions(3, 3).is_empty());
    }

    #[test]
    fn qmc_suite_passes_for_commuting_presets() {
        let r = qmc_structure_suite(
            &[Preset::ising(1.0, 0.3), Preset::defect()],
            &[0.0, 0.7],
            &[4, 5],
            &Tolerances::default(),
        )
        .unwrap();
        assert!(r.pass, "{} {}", r.max_cmi, r.max_log_defect);
        assert!(!r.rows.is_empty());
    }

    #[test]
    fn dynamics_suite_passes() {
        let g = gibbs_state(
            &Preset::ClusterZxz { j: 1.0 }.build(make_chain(3, 2).unwrap()).unwrap(),
            0.8,
        )
        .unwrap();
        let r = dynamics_property_suite(&g, 4, 3).unwrap();
        assert!(r.pass, "{r:?}");
        let site = site_entropy_production_suite(&g, 12, 4, &Tolerances::default()).unwrap();
        assert!(site.pass && site.worst >= -1e-9);
    }
}
