//! Quasi-factorization inequalities, checked state by state with signed slacks.

use alloc::boxed::Box;
use alloc::vec::Vec;

use num_traits::Float;

use super::divergence::{ClassicalDivergence, DenseDivergence, DivergenceOracle};
use super::mixing::{mixing_norm, GibbsRef};
use crate::classical::{ClassicalGibbs, LowRankState};
use crate::error::{Error, Result};
use crate::gibbs::qmc_log_defect_gibbs;
use crate::lattice::{Region, Splitting};
use crate::operator::DensityOperator;
use crate::tol::Tolerances;

/// A state whose marginal entropies can be compared against a Gibbs state.
pub trait CertState {
    fn oracle<'a>(&'a self, sigma: GibbsRef<'a>) -> Result<Box<dyn DivergenceOracle + 'a>>;
}

impl CertState for DensityOperator {
    fn oracle<'a>(&'a self, sigma: GibbsRef<'a>) -> Result<Box<dyn DivergenceOracle + 'a>> {
        match sigma {
            GibbsRef::Dense(g) => Ok(Box::new(DenseDivergence::new(g, self)?)),
            GibbsRef::Classical(_) => Err(Error::InvalidParameter(
                "dense states are compared against dense Gibbs states".into(),
            )),
        }
    }
}

impl CertState for LowRankState {
    fn oracle<'a>(&'a self, sigma: GibbsRef<'a>) -> Result<Box<dyn DivergenceOracle + 'a>> {
        match sigma {
            GibbsRef::Classical(g) => Ok(Box::new(ClassicalDivergence::new(g, self)?)),
            GibbsRef::Dense(_) => Err(Error::InvalidParameter(
                "low-rank states are compared against classical Gibbs states".into(),
            )),
        }
    }
}

/// Per-state slacks `rhs − lhs` of an inequality.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct InequalityReport {
    pub slacks: Vec<f64>,
    /// `+∞` when no state was checked.
    pub min_slack: f64,
    pub tolerance: f64,
    /// The inequality holds trivially and no state was evaluated.
    pub vacuous: bool,
    pub pass: bool,
}

impl InequalityReport {
    fn from_slacks(slacks: Vec<f64>, tolerance: f64) -> Self {
        let min_slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            pass: slacks.iter().all(|&s| s >= -tolerance),
            slacks,
            min_slack,
            tolerance,
            vacuous: false,
        }
    }

    fn vacuous(tolerance: f64) -> Self {
        Self {
            slacks: Vec::new(),
            min_slack: f64::INFINITY,
            tolerance,
            vacuous: true,
            pass: true,
        }
    }
}

fn collect_slacks<S: CertState>(
    sigma: GibbsRef<'_>,
    states: &[S],
    slack: impl Fn(&dyn DivergenceOracle) -> Result<f64>,
) -> Result<Vec<f64>> {
    states.iter().map(|s| slack(&*s.oracle(sigma)?)).collect()
}

/// Step 1 outcome with the measured correlation norm.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Step1Report {
    pub h_norm: f64,
    pub report: InequalityReport,
}

/// `(D_A + D_B)/(1 − 2h) − D` for one state.
pub fn step1_slack(o: &dyn DivergenceOracle, a: &Region, b: &Region, h_norm: f64) -> Result<f64> {
    let rhs = (o.conditional(a)? + o.conditional(b)?) / (1.0 - 2.0 * h_norm);
    Ok(rhs - o.relative(&o.full_region())?)
}

/// `D(ρ‖σ) ≤ (1 − 2‖h(σ_CD)‖)^{-1} [D_A(ρ‖σ) + D_B(ρ‖σ)]` over `states`.
pub fn step1_check<S: CertState>(
    sigma: GibbsRef<'_>,
    splitting: &Splitting,
    states: &[S],
    tol: &Tolerances,
) -> Result<Step1Report> {
    if splitting.n_sites != sigma.lattice().n_sites() {
        return Err(Error::DimensionMismatch(splitting.n_sites, sigma.lattice().n_sites()));
    }
    let h_norm = mixing_norm(sigma, &splitting.c(), &splitting.d())?;
    if h_norm >= 0.5 {
        return Ok(Step1Report {
            h_norm,
            report: InequalityReport::vacuous(tol.slack),
        });
    }
    let (a, b) = (splitting.a(), splitting.b());
    let slacks = collect_slacks(sigma, states, |o| step1_slack(o, &a, &b, h_norm))?;
    Ok(Step1Report {
        h_norm,
        report: InequalityReport::from_slacks(slacks, tol.slack),
    })
}

/// Rejects blocks whose boundaries at interaction range `k` overlap or touch another block.
pub fn check_separated_blocks(sigma: GibbsRef<'_>, blocks: &[Region]) -> Result<()> {
    let lattice = sigma.lattice();
    let k = sigma.k();
    let closures: Vec<(Region, Region)> = blocks
        .iter()
        .map(|b| Ok((lattice.boundary(b, k)?, lattice.closure(b, k)?)))
        .collect::<Result<_>>()?;
    for (i, bi) in blocks.iter().enumerate() {
        if bi.is_empty() {
            return Err(Error::EmptyRegion);
        }
        for (j, bj) in blocks.iter().enumerate().skip(i + 1) {
            let (di, ci) = &closures[i];
            let (dj, cj) = &closures[j];
            if !di.is_disjoint(dj) || !bi.is_disjoint(cj) || !bj.is_disjoint(ci) {
                return Err(Error::OverlappingBoundaries);
            }
        }
    }
    Ok(())
}

/// `Σ_i D_{A_i} − D_A` for one state.
pub fn step2_slack(o: &dyn DivergenceOracle, blocks: &[Region]) -> Result<f64> {
    let union = blocks.iter().fold(Region::empty(), |acc, b| acc.union(b));
    let mut sum = 0.0;
    for b in blocks {
        sum += o.conditional(b)?;
    }
    Ok(sum - o.conditional(&union)?)
}

/// `D_A(ρ‖σ) ≤ Σ_i D_{A_i}(ρ‖σ)` for `A = ∪ A_i` with separated boundaries.
pub fn step2_check<S: CertState>(
    sigma: GibbsRef<'_>,
    blocks: &[Region],
    states: &[S],
    tol: &Tolerances,
) -> Result<InequalityReport> {
    check_separated_blocks(sigma, blocks)?;
    let slacks = collect_slacks(sigma, states, |o| step2_slack(o, blocks))?;
    Ok(InequalityReport::from_slacks(slacks, tol.slack))
}

/// Lemma outcome with the measured Markov defect of `A | ∂A | (A∂)^c`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LemmaReport {
    pub qmc_defect: f64,
    pub report: InequalityReport,
}

/// `D_A(ρ‖σ_A⊗σ_{A^c}) + D(ρ_{A∂}‖σ_{A∂}) − D_A(ρ‖σ)` for one state.
pub fn lemma_slack(o: &dyn DivergenceOracle, a: &Region, closure: &Region) -> Result<f64> {
    let full = o.full_region();
    let rest = full.difference(a);
    let product_conditional = -o.entropy(&full)? + o.entropy(&rest)? - o.cross(a)?;
    Ok(product_conditional + o.relative(closure)? - o.conditional(a)?)
}

/// `max |log p_ABC + log p_B − log p_AB − log p_BC|` for a partition of the chain.
pub fn classical_log_defect(sigma: &ClassicalGibbs, a: &Region, b: &Region, c: &Region) -> Result<f64> {
    let full = sigma.lattice().full_region();
    if a.union(b).union(c) != full || a.len() + b.len() + c.len() != full.len() {
        return Err(Error::InvalidParameter("regions must partition the chain".into()));
    }
    if a.is_empty() || b.is_empty() || c.is_empty() {
        return Ok(0.0);
    }
    let d = sigma.lattice().local_dim();
    let n = full.len();
    let (ab, bc) = (a.union(b), b.union(c));
    let (pb, pab, pbc) = (sigma.marginal(b)?, sigma.marginal(&ab)?, sigma.marginal(&bc)?);
    let sub_index = |digits: &[usize], region: &Region| region.iter().fold(0, |acc, s| acc * d + digits[s]);
    let mut digits = alloc::vec![0usize; n];
    let mut worst = 0.0f64;
    for (i, &p) in sigma.probabilities().iter().enumerate() {
        let mut rem = i;
        for s in (0..n).rev() {
            digits[s] = rem % d;
            rem /= d;
        }
        let defect = Float::ln(p) + Float::ln(pb[sub_index(&digits, b)])
            - Float::ln(pab[sub_index(&digits, &ab)])
            - Float::ln(pbc[sub_index(&digits, &bc)]);
        worst = worst.max(defect.abs());
    }
    Ok(worst)
}

/// `D_A(ρ‖σ) ≤ D_A(ρ‖σ_A⊗σ_{A^c}) + D(ρ_{A∂}‖σ_{A∂})`, after verifying the Markov structure.
pub fn lemma_bound_cre_check<S: CertState>(
    sigma: GibbsRef<'_>,
    a: &Region,
    states: &[S],
    tol: &Tolerances,
) -> Result<LemmaReport> {
    let lattice = sigma.lattice();
    if a.is_empty() {
        return Err(Error::EmptyRegion);
    }
    lattice.check_region(a)?;
    let boundary = lattice.boundary(a, sigma.k())?;
    let closure = a.union(&boundary);
    let outside = lattice.complement(&closure);
    let qmc_defect = if boundary.is_empty() || outside.is_empty() {
        0.0
    } else {
        match sigma {
            GibbsRef::Dense(g) => qmc_log_defect_gibbs(g, a, &boundary, &outside)?,
            GibbsRef::Classical(g) => classical_log_defect(g, a, &boundary, &outside)?,
        }
    };
    if !(qmc_defect <= tol.qmc) {
        return Err(Error::NotMarkov(qmc_defect));
    }
    let slacks = collect_slacks(sigma, states, |o| lemma_slack(o, a, &closure))?;
    Ok(LemmaReport {
        qmc_defect,
        report: InequalityReport::from_slacks(slacks, tol.slack),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::ensemble::{sample_full_rank, sample_low_rank};
    use crate::entropy::{conditional_relative_entropy, relative_entropy};
    use crate::gibbs::presets::Preset;
    use crate::gibbs::{gibbs_state, qmc_log_defect, GibbsState, LocalPotential};
    use crate::lattice::{make_chain, standard_splitting, Lattice};
    use crate::operator::pauli;

    fn dense(preset: Preset, n: usize, beta: f64) -> GibbsState {
        gibbs_state(&preset.build(make_chain(n, 2).unwrap()).unwrap(), beta).unwrap()
    }

    fn on_site_potential(lat: Lattice, fields: &[f64]) -> LocalPotential {
        let terms = fields
            .iter()
            .enumerate()
            .map(|(x, &h)| (x, pauli::on(x, pauli::z()).scale(h)))
            .collect();
        LocalPotential::new(lat, 1, terms).unwrap()
    }

    #[test]
    fn sigma_gives_zero_slacks() {
        let sp = standard_splitting(2, 1, 1).unwrap();
        let g = dense(Preset::ising(1.0, 0.3), sp.n_sites, 0.4);
        let tol = Tolerances::default();
        let states = [g.sigma().clone()];
        let s1 = step1_check(GibbsRef::Dense(&g), &sp, &states, &tol).unwrap();
        assert!(s1.report.min_slack.abs() < 1e-12 && s1.report.pass);
        let s2 = step2_check(GibbsRef::Dense(&g), &sp.a_blocks, &states, &tol).unwrap();
        assert!(s2.min_slack.abs() < 1e-12);
        let lemma = lemma_bound_cre_check(GibbsRef::Dense(&g), &Region::from([3, 4]), &states, &tol).unwrap();
        assert!(lemma.report.min_slack >= -1e-12);
    }

    #[test]
    fn product_state_step1_reduces_to_superadditivity() {
        let sp = standard_splitting(1, 1, 1).unwrap();
        let lat = make_chain(sp.n_sites, 2).unwrap();
        let g = gibbs_state(&on_site_potential(lat, &[0.3, -0.5, 0.9, 0.1, 0.7]), 1.0).unwrap();
        let states = sample_full_rank(&lat, 20, 3);
        let tol = Tolerances::default();
        let report = step1_check(GibbsRef::Dense(&g), &sp, &states, &tol).unwrap();
        assert!(report.h_norm < 1e-12);
        for (rho, slack) in states.iter().zip(&report.report.slacks) {
            let d = relative_entropy(rho, g.sigma()).unwrap().value;
            let da = conditional_relative_entropy(rho, g.sigma(), &sp.a()).unwrap().value;
            let db = conditional_relative_entropy(rho, g.sigma(), &sp.b()).unwrap().value;
            assert!((slack - (da + db - d)).abs() < 1e-10);
        }
        assert!(report.report.pass);
    }

    #[test]
    fn step1_is_vacuous_for_strong_correlations() {
        let sp = standard_splitting(1, 1, 1).unwrap();
        let g = dense(Preset::ising(1.0, 0.0), sp.n_sites, 3.0);
        let states = sample_full_rank(g.lattice(), 2, 1);
        let report = step1_check(GibbsRef::Dense(&g), &sp, &states, &Tolerances::default()).unwrap();
        assert!(report.h_norm >= 0.5);
        assert!(report.report.vacuous && report.report.slacks.is_empty());
    }

    #[test]
    fn step2_single_block_is_equality() {
        let g = dense(Preset::ClusterZxz { j: 1.0 }, 5, 0.7);
        let states = sample_full_rank(g.lattice(), 5, 8);
        let report = step2_check(
            GibbsRef::Dense(&g),
            &[Region::from([1, 2])],
            &states,
            &Tolerances::default(),
        )
        .unwrap();
        assert!(report.slacks.iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn step2_rejects_overlapping_boundaries() {
        let g = dense(Preset::ising(1.0, 0.2), 5, 0.5);
        let states: [DensityOperator; 0] = [];
        let blocks = [Region::single(0), Region::single(2)];
        let err = step2_check(GibbsRef::Dense(&g), &blocks, &states, &Tolerances::default());
        assert!(matches!(err, Err(Error::OverlappingBoundaries)));
        let far = [Region::single(0), Region::single(4)];
        assert!(step2_check(GibbsRef::Dense(&g), &far, &states, &Tolerances::default()).is_ok());
    }

    #[test]
    fn step2_holds_on_separated_blocks() {
        let g = dense(Preset::ising(1.0, 0.4), 7, 0.8);
        let states = sample_full_rank(g.lattice(), 25, 12);
        let blocks = [Region::from([0, 1]), Region::from([5, 6])];
        let report = step2_check(GibbsRef::Dense(&g), &blocks, &states, &Tolerances::default()).unwrap();
        assert!(report.pass, "{}", report.min_slack);
    }

    #[test]
    fn lemma_slack_matches_direct_formula() {
        let g = dense(Preset::ising(1.0, 0.5), 6, 0.6);
        let a = Region::from([2, 3]);
        let states = sample_full_rank(g.lattice(), 6, 4);
        let report = lemma_bound_cre_check(GibbsRef::Dense(&g), &a, &states, &Tolerances::default()).unwrap();
        assert!(report.qmc_defect < 1e-8 && report.report.pass);
        let closure = Region::range(1, 5);
        let rest = g.lattice().complement(&a);
        for (rho, slack) in states.iter().zip(&report.report.slacks) {
            let lhs = conditional_relative_entropy(rho, g.sigma(), &a).unwrap().value;
            let boundary = relative_entropy(&rho.reduce(&closure).unwrap(), &g.sigma().reduce(&closure).unwrap())
                .unwrap()
                .value;
            let s_full = crate::entropy::von_neumann_entropy(rho);
            let s_rest = crate::entropy::von_neumann_entropy(&rho.reduce(&rest).unwrap());
            let rho_a = rho.reduce(&a).unwrap();
            let (vals, vecs) = crate::linalg::eigh(g.sigma().reduce(&a).unwrap().matrix());
            let log_sa = crate::linalg::spectral_apply(&vals, &vecs, |x| x.ln());
            let cross = crate::linalg::trace_product(rho_a.matrix(), &log_sa).re;
            let oracle = -s_full + s_rest - cross + boundary - lhs;
            assert!((slack - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn lemma_slack_on_products_is_boundary_term() {
        let lat = make_chain(5, 2).unwrap();
        let g = gibbs_state(&on_site_potential(lat, &[0.2, 0.4, -0.3, 0.8, 0.5]), 1.2).unwrap();
        let a = Region::from([1, 2]);
        let states = sample_full_rank(&lat, 4, 6);
        let report = lemma_bound_cre_check(GibbsRef::Dense(&g), &a, &states, &Tolerances::default()).unwrap();
        // with k = 1 the boundary is empty, so the closure is A itself
        for (rho, slack) in states.iter().zip(&report.report.slacks) {
            let da = relative_entropy(&rho.reduce(&a).unwrap(), &g.sigma().reduce(&a).unwrap())
                .unwrap()
                .value;
            assert!((slack - da).abs() < 1e-10);
        }
    }

    #[test]
    fn classical_engine_agrees_with_dense() {
        let sp = standard_splitting(1, 1, 1).unwrap();
        let lat = make_chain(sp.n_sites, 2).unwrap();
        let pot = Preset::classical(13).build(lat).unwrap();
        let (g, cl) = (gibbs_state(&pot, 0.3).unwrap(), ClassicalGibbs::new(&pot, 0.3).unwrap());
        let low = sample_low_rank(&lat, 5, 2, 9);
        let dense_states: Vec<DensityOperator> = low
            .iter()
            .map(|s| DensityOperator::from_matrix(lat.full_region(), 2, s.to_dense()).unwrap())
            .collect();
        let tol = Tolerances::default();
        let a = Region::from([2]);
        let (ld, lc) = (
            lemma_bound_cre_check(GibbsRef::Dense(&g), &a, &dense_states, &tol).unwrap(),
            lemma_bound_cre_check(GibbsRef::Classical(&cl), &a, &low, &tol).unwrap(),
        );
        for (x, y) in ld.report.slacks.iter().zip(&lc.report.slacks) {
            assert!((x - y).abs() < 1e-10);
        }
        let (s1d, s1c) = (
            step1_check(GibbsRef::Dense(&g), &sp, &dense_states, &tol).unwrap(),
            step1_check(GibbsRef::Classical(&cl), &sp, &low, &tol).unwrap(),
        );
        assert!((s1d.h_norm - s1c.h_norm).abs() < 1e-10);
        for (x, y) in s1d.report.slacks.iter().zip(&s1c.report.slacks) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(dense_states[0].oracle(GibbsRef::Classical(&cl)).is_err());
    }

    #[test]
    fn classical_log_defect_matches_dense() {
        let lat = make_chain(6, 2).unwrap();
        let pot = Preset::defect().build(lat).unwrap();
        let (g, cl) = (gibbs_state(&pot, 0.9).unwrap(), ClassicalGibbs::new(&pot, 0.9).unwrap());
        let (a, c) = (Region::from([0, 1]), Region::from([4, 5]));
        let b = Region::from([2, 3]);
        let dense = qmc_log_defect(g.sigma(), &a, &b, &c).unwrap();
        assert!(classical_log_defect(&cl, &a, &b, &c).unwrap() < 1e-12 && dense < 1e-10);
        let (a2, b2, c2) = (Region::from([0, 1, 2]), Region::single(3), Region::from([4, 5]));
        let thin = classical_log_defect(&cl, &a2, &b2, &c2).unwrap();
        let thin_dense = qmc_log_defect(g.sigma(), &a2, &b2, &c2).unwrap();
        assert!((thin - thin_dense).abs() < 1e-9 * thin.max(1.0));
    }
}
