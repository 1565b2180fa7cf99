//! Local commuting potentials, Gibbs states and Markov-chain structure.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_traits::Float;
use spin::{Once, RwLock};

use crate::entropy::{von_neumann_entropy, Prepared};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Region};
use crate::linalg::{self, CMat, Sandwich};
use crate::operator::{embed_into, norms_of_matrix, DensityOperator, HermitianOperator, SpectralDecomposition};
use crate::tol::Tolerances;

/// An interaction term `Φ(x)` attached to its center site.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub center: usize,
    pub op: HermitianOperator,
}

/// A k-local potential: one term per center, supported in `[x−(k−1), x+(k−1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPotential {
    lattice: Lattice,
    k: usize,
    terms: Vec<Term>,
    bound: f64,
    label: Option<String>,
}

impl LocalPotential {
    /// Terms sharing a center are summed on the union of their supports.
    pub fn new(lattice: Lattice, k: usize, terms: Vec<(usize, HermitianOperator)>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        let mut merged: BTreeMap<usize, HermitianOperator> = BTreeMap::new();
        for (center, op) in terms {
            if center >= lattice.n_sites() {
                return Err(Error::SiteOutOfRange {
                    site: center,
                    n_sites: lattice.n_sites(),
                });
            }
            if op.local_dim() != lattice.local_dim() {
                return Err(Error::DimensionMismatch(op.local_dim(), lattice.local_dim()));
            }
            let window = window(&lattice, k, center);
            if !op.support().is_subset(&window) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "term at {center} leaves its radius-{k} window"
                )));
            }
            let entry = match merged.remove(&center) {
                Some(prev) => prev.add(&op),
                None => op,
            };
            merged.insert(center, entry);
        }
        let terms: Vec<Term> = merged.into_iter().map(|(center, op)| Term { center, op }).collect();
        let max_norm = terms
            .iter()
            .map(|t| norms_of_matrix(t.op.matrix()).operator_norm)
            .fold(0.0, f64::max);
        Ok(Self {
            lattice,
            k,
            terms,
            bound: max_norm * (1.0 + 1e-9) + f64::EPSILON,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// A constant `C` with `‖Φ(x)‖ < C` for every term.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn window(&self, center: usize) -> Region {
        window(&self.lattice, self.k, center)
    }

    /// True when every term is diagonal in the product basis.
    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|t| linalg::is_diagonal(t.op.matrix()))
    }
}

fn window(lattice: &Lattice, k: usize, center: usize) -> Region {
    let lo = center.saturating_sub(k - 1);
    let hi = (center + k).min(lattice.n_sites());
    Region::range(lo, hi)
}

/// `H_A = Σ_{x∈A} Φ(x)` on the full lattice.
pub fn hamiltonian(potential: &LocalPotential, region: &Region) -> Result<HermitianOperator> {
    potential.lattice.check_region(region)?;
    let full = potential.lattice.full_region();
    let d = potential.lattice.local_dim();
    let dim = potential.lattice.dim();
    let mut m = CMat::zeros(dim, dim);
    for term in potential.terms.iter().filter(|t| region.contains(t.center)) {
        m += embed_into(&term.op, &full).into_matrix();
    }
    Ok(HermitianOperator::from_parts(full, d, m))
}

/// Result of the pairwise commutation gate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CommutingReport {
    pub max_commutator_norm: f64,
    pub pass: bool,
}

/// Largest `‖[Φ(x), Φ(y)]‖` over all pairs, evaluated on the union of the two supports.
pub fn check_commuting(potential: &LocalPotential) -> CommutingReport {
    check_commuting_with(potential, Tolerances::default().comm)
}

pub fn check_commuting_with(potential: &LocalPotential, tol: f64) -> CommutingReport {
    let mut worst: f64 = 0.0;
    let terms = &potential.terms;
    for (i, s) in terms.iter().enumerate() {
        for t in &terms[i + 1..] {
            if s.op.support().is_disjoint(t.op.support()) {
                continue;
            }
            let support = s.op.support().union(t.op.support());
            let a = embed_into(&s.op, &support).into_matrix();
            let b = embed_into(&t.op, &support).into_matrix();
            let comm = &a * &b - &b * &a;
            // i[A,B] is Hermitian, so its spectrum gives the operator norm
            let herm = comm * linalg::C64::new(0.0, 1.0);
            worst = worst.max(norms_of_matrix(&herm).operator_norm);
        }
    }
    CommutingReport {
        max_commutator_norm: worst,
        pass: worst <= tol,
    }
}

/// `σ = e^{−βH}/tr e^{−βH}` with a fill-once cache of marginals.
#[derive(Debug)]
pub struct GibbsState {
    potential: LocalPotential,
    beta: f64,
    tainted: bool,
    hamiltonian: HermitianOperator,
    spectral: SpectralDecomposition,
    log_partition: f64,
    sigma: Arc<Prepared>,
    cache: RwLock<BTreeMap<Region, Arc<Prepared>>>,
    half: Once<Arc<Sandwich>>,
}

/// Builds the Gibbs state; rejects non-commuting potentials.
pub fn gibbs_state(potential: &LocalPotential, beta: f64) -> Result<GibbsState> {
    let report = check_commuting(potential);
    if !report.pass {
        return Err(Error::NonCommuting(report.max_commutator_norm));
    }
    build(potential, beta, false)
}

/// Builds the Gibbs state of a possibly non-commuting potential and marks it tainted.
pub fn gibbs_state_tainted(potential: &LocalPotential, beta: f64) -> Result<GibbsState> {
    let tainted = !check_commuting(potential).pass;
    build(potential, beta, tainted)
}

fn build(potential: &LocalPotential, beta: f64, tainted: bool) -> Result<GibbsState> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter("beta must be finite and non-negative".into()));
    }
    let lattice = potential.lattice;
    let h = hamiltonian(potential, &lattice.full_region())?;
    let spectral = h.spectral();
    let e0 = spectral.min();
    let weights: Vec<f64> = spectral
        .eigenvalues
        .iter()
        .map(|&e| Float::exp(-beta * (e - e0)))
        .collect();
    let z: f64 = weights.iter().sum();
    let log_partition = -beta * e0 + Float::ln(z);
    // Gibbs weights decrease with energy, so reverse to keep eigenvalues ascending
    let n = weights.len();
    let eigenvalues: Vec<f64> = (0..n).rev().map(|i| weights[i] / z).collect();
    let eigenvectors = CMat::from_fn(n, n, |r, c| spectral.eigenvectors[(r, n - 1 - c)]);
    let sigma_spec = SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    };
    let matrix = sigma_spec.reconstruct();
    let state = DensityOperator::normalized(lattice.full_region(), lattice.local_dim(), matrix);
    let sigma = Arc::new(Prepared::from_spectral(state, sigma_spec));
    let mut cache = BTreeMap::new();
    cache.insert(lattice.full_region(), sigma.clone());
    Ok(GibbsState {
        potential: potential.clone(),
        beta,
        tainted,
        hamiltonian: h,
        spectral,
        log_partition,
        sigma,
        cache: RwLock::new(cache),
        half: Once::new(),
    })
}

impl GibbsState {
    pub fn potential(&self) -> &LocalPotential {
        &self.potential
    }

    pub fn lattice(&self) -> &Lattice {
        &self.potential.lattice
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Set when the potential failed the commutation gate.
    pub fn tainted(&self) -> bool {
        self.tainted
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }

    /// Spectral decomposition of `H_Λ`.
    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn sigma(&self) -> &DensityOperator {
        &self.sigma.state
    }

    pub fn prepared(&self) -> &Arc<Prepared> {
        &self.sigma
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.sigma.min_eigenvalue()
    }

    /// `σ^{1/2}`, computed once.
    pub fn sqrt_sandwich(&self) -> Arc<Sandwich> {
        self.half
            .call_once(|| Arc::new(Sandwich::from_matrix(self.sigma.sqrt())))
            .clone()
    }

    /// The marginal `σ_X` with its spectral data, computed once per region.
    pub fn marginal(&self, region: &Region) -> Result<Arc<Prepared>> {
        if let Some(p) = self.cache.read().get(region) {
            return Ok(p.clone());
        }
        self.lattice().check_region(region)?;
        let state = self.sigma().reduce(region)?;
        let prepared = Arc::new(Prepared::new(state));
        let mut cache = self.cache.write();
        Ok(cache.entry(region.clone()).or_insert(prepared).clone())
    }

    pub fn cached_regions(&self) -> usize {
        self.cache.read().len()
    }
}

/// Anything with marginals: plain states and Gibbs states (cached).
pub trait Marginals {
    fn marginal_state(&self, region: &Region) -> Result<DensityOperator>;
}

impl Marginals for DensityOperator {
    fn marginal_state(&self, region: &Region) -> Result<DensityOperator> {
        self.reduce(region)
    }
}

impl Marginals for GibbsState {
    fn marginal_state(&self, region: &Region) -> Result<DensityOperator> {
        Ok(self.marginal(region)?.state.clone())
    }
}

/// Partial trace onto `region`.
pub fn reduced_state<S: Marginals + ?Sized>(state: &S, region: &Region) -> Result<DensityOperator> {
    state.marginal_state(region)
}

fn check_disjoint(regions: &[&Region]) -> Result<()> {
    for (i, a) in regions.iter().enumerate() {
        for b in &regions[i + 1..] {
            if !a.is_disjoint(b) {
                return Err(Error::Overlap);
            }
        }
    }
    Ok(())
}

/// `I(A:C|B) = S(AB) + S(BC) − S(ABC) − S(B)`.
pub fn cmi(rho: &DensityOperator, a: &Region, b: &Region, c: &Region) -> Result<f64> {
    check_disjoint(&[a, b, c])?;
    let abc = a.union(b).union(c);
    if !abc.is_subset(rho.support()) {
        return Err(Error::NotInSupport);
    }
    let s = |r: Region| -> Result<f64> {
        if r.is_empty() {
            Ok(0.0)
        } else {
            Ok(von_neumann_entropy(&rho.reduce(&r)?))
        }
    };
    Ok(s(a.union(b))? + s(b.union(c))? - s(abc)? - s(b.clone())?)
}

fn log_on(prepared: &Prepared, support: &Region) -> Result<CMat> {
    if prepared.state.support().is_empty() {
        let dim = prepared.state.local_dim().pow(support.len() as u32);
        return Ok(CMat::zeros(dim, dim));
    }
    if !prepared.is_full_rank() {
        return Err(Error::Singular(prepared.min_eigenvalue()));
    }
    let op = HermitianOperator::from_parts(
        prepared.state.support().clone(),
        prepared.state.local_dim(),
        prepared.log(),
    );
    Ok(embed_into(&op, support).into_matrix())
}

fn log_defect_with(get: impl Fn(&Region) -> Result<Arc<Prepared>>, a: &Region, b: &Region, c: &Region) -> Result<f64> {
    let abc = a.union(b).union(c);
    let ab = a.union(b);
    let bc = b.union(c);
    let log = |r: &Region| -> Result<CMat> {
        let p: Arc<Prepared> = get(r)?;
        log_on(&p, &abc)
    };
    let defect = log(&abc)? + log(b)? - log(&bc)? - log(&ab)?;
    Ok(norms_of_matrix(&defect).operator_norm)
}

/// `‖log σ_ABC + log σ_B − log σ_BC − log σ_AB‖` for regions partitioning the support of `σ`.
pub fn qmc_log_defect(sigma: &DensityOperator, a: &Region, b: &Region, c: &Region) -> Result<f64> {
    check_disjoint(&[a, b, c])?;
    if a.union(b).union(c) != *sigma.support() {
        return Err(Error::InvalidParameter("regions must partition the support".into()));
    }
    log_defect_with(|r| Ok(Arc::new(Prepared::new(sigma.reduce(r)?))), a, b, c)
}

/// [`qmc_log_defect`] for the marginal `σ_ABC` of a Gibbs state, through its cache.
pub fn qmc_log_defect_gibbs(state: &GibbsState, a: &Region, b: &Region, c: &Region) -> Result<f64> {
    check_disjoint(&[a, b, c])?;
    log_defect_with(|r| state.marginal(r), a, b, c)
}

/// Named potentials.
pub mod presets {
    use super::*;
    use crate::linalg::diag;
    use crate::operator::pauli;
    use rand::Rng;

    /// A potential recipe that can be instantiated on chains of any length.
    #[derive(Debug, Clone, PartialEq)]
    #[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
    #[cfg_attr(
        feature = "serde",
        serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)
    )]
    pub enum Preset {
        /// `Φ(x) = J Z_x Z_{x+1} + h Z_x`.
        IsingZz {
            #[cfg_attr(feature = "serde", serde(default = "one"))]
            j: f64,
            #[cfg_attr(feature = "serde", serde(default))]
            h: f64,
        },
        /// Random diagonal couplings on `{x, x+1}` and fields on `x`, uniform in `[−j, j]` and `[−h, h]`.
        ClassicalRandomField {
            seed: u64,
            #[cfg_attr(feature = "serde", serde(default = "one"))]
            j: f64,
            #[cfg_attr(feature = "serde", serde(default = "half"))]
            h: f64,
        },
        /// Ising couplings `J_x = j(1 + amplitude·decay^{|x−site|})` amplified around one site.
        ///
        /// This construction is ours; it realizes a chain whose interaction is
        /// stronger near a single defect.
        DefectChain {
            site: Option<usize>,
            #[cfg_attr(feature = "serde", serde(default = "half"))]
            j: f64,
            #[cfg_attr(feature = "serde", serde(default = "two"))]
            amplitude: f64,
            #[cfg_attr(feature = "serde", serde(default = "half"))]
            decay: f64,
            #[cfg_attr(feature = "serde", serde(default))]
            h: f64,
        },
        /// Cluster stabilizers `−J Z_{x−1} X_x Z_{x+1}`, truncated at the ends; commuting but not diagonal.
        ClusterZxz {
            #[cfg_attr(feature = "serde", serde(default = "one"))]
            j: f64,
        },
        /// `J Z_x Z_{x+1} + g X_x`; non-commuting for `g ≠ 0`, for exploratory use only.
        TransverseIsing {
            #[cfg_attr(feature = "serde", serde(default = "one"))]
            j: f64,
            g: f64,
        },
    }

    #[cfg(feature = "serde")]
    fn one() -> f64 {
        1.0
    }
    #[cfg(feature = "serde")]
    fn half() -> f64 {
        0.5
    }
    #[cfg(feature = "serde")]
    fn two() -> f64 {
        2.0
    }

    impl Preset {
        pub fn name(&self) -> &'static str {
            match self {
                Preset::IsingZz { .. } => "ising_zz",
                Preset::ClassicalRandomField { .. } => "classical_random_field",
                Preset::DefectChain { .. } => "defect_chain",
                Preset::ClusterZxz { .. } => "cluster_zxz",
                Preset::TransverseIsing { .. } => "transverse_ising",
            }
        }

        pub fn ising(j: f64, h: f64) -> Self {
            Preset::IsingZz { j, h }
        }

        pub fn classical(seed: u64) -> Self {
            Preset::ClassicalRandomField { seed, j: 1.0, h: 0.5 }
        }

        pub fn defect() -> Self {
            Preset::DefectChain {
                site: None,
                j: 0.5,
                amplitude: 2.0,
                decay: 0.5,
                h: 0.0,
            }
        }

        pub fn build(&self, lattice: Lattice) -> Result<LocalPotential> {
            let n = lattice.n_sites();
            let needs_qubits = !matches!(self, Preset::ClassicalRandomField { .. });
            if needs_qubits && lattice.local_dim() != 2 {
                return Err(Error::InvalidParameter(alloc::format!(
                    "preset {} needs local_dim 2",
                    self.name()
                )));
            }
            let zz = |x: usize| -> HermitianOperator {
                HermitianOperator::from_parts(Region::from([x, x + 1]), 2, linalg::kron(&pauli::z(), &pauli::z()))
            };
            let mut terms = Vec::new();
            match *self {
                Preset::IsingZz { j, h } => {
                    for x in 0..n {
                        let mut op = pauli::on(x, pauli::z()).scale(h);
                        if x + 1 < n {
                            op = op.add(&zz(x).scale(j));
                        }
                        terms.push((x, op));
                    }
                }
                Preset::ClassicalRandomField { seed, j, h } => {
                    let d = lattice.local_dim();
                    let mut rng = crate::sampling::stream_rng(seed, 0);
                    for x in 0..n {
                        let field: Vec<f64> = (0..d).map(|_| h * (2.0 * rng.random::<f64>() - 1.0)).collect();
                        let mut op = HermitianOperator::from_parts(Region::single(x), d, diag(&field));
                        if x + 1 < n {
                            let coupling: Vec<f64> =
                                (0..d * d).map(|_| j * (2.0 * rng.random::<f64>() - 1.0)).collect();
                            op = op.add(&HermitianOperator::from_parts(
                                Region::from([x, x + 1]),
                                d,
                                diag(&coupling),
                            ));
                        }
                        terms.push((x, op));
                    }
                }
                Preset::DefectChain {
                    site,
                    j,
                    amplitude,
                    decay,
                    h,
                } => {
                    let center = site.unwrap_or(n / 2).min(n - 1);
                    for x in 0..n {
                        let mut op = pauli::on(x, pauli::z()).scale(h);
                        if x + 1 < n {
                            let jx = j * (1.0 + amplitude * Float::powi(decay, x.abs_diff(center) as i32));
                            op = op.add(&zz(x).scale(jx));
                        }
                        terms.push((x, op));
                    }
                }
                Preset::ClusterZxz { j } => {
                    for x in 0..n {
                        let lo = x.saturating_sub(1);
                        let hi = (x + 1).min(n - 1);
                        let mut m = CMat::identity(1, 1);
                        for s in lo..=hi {
                            let f = if s == x { pauli::x() } else { pauli::z() };
                            m = linalg::kron(&m, &f);
                        }
                        let op = HermitianOperator::from_parts(Region::range(lo, hi + 1), 2, m.scale(-j));
                        terms.push((x, op));
                    }
                }
                Preset::TransverseIsing { j, g } => {
                    for x in 0..n {
                        let mut op = pauli::on(x, pauli::x()).scale(g);
                        if x + 1 < n {
                            op = op.add(&zz(x).scale(j));
                        }
                        terms.push((x, op));
                    }
                }
            }
            Ok(LocalPotential::new(lattice, 2, terms)?.with_label(self.name()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::presets::Preset;
    use super::*;
    use crate::lattice::make_chain;
    use crate::linalg::{diag, kron, max_abs};
    use crate::operator::{matrix_function, pauli, tensor_states, MatrixFn};
    use crate::sampling::{random_density, stream_rng};
    use alloc::vec;

    fn i2() -> CMat {
        linalg::identity(2)
    }

    #[test]
    fn hamiltonian_examples() {
        let lat = make_chain(3, 2).unwrap();
        let zero = LocalPotential::new(lat, 1, vec![]).unwrap();
        assert!(max_abs(hamiltonian(&zero, &lat.full_region()).unwrap().matrix()) == 0.0);

        let h = 0.7;
        let fields =
            LocalPotential::new(lat, 1, (0..3).map(|x| (x, pauli::on(x, pauli::z()).scale(h))).collect()).unwrap();
        let expected = (kron(&kron(&pauli::z(), &i2()), &i2())
            + kron(&kron(&i2(), &pauli::z()), &i2())
            + kron(&kron(&i2(), &i2()), &pauli::z()))
        .scale(h);
        let got = hamiltonian(&fields, &lat.full_region()).unwrap();
        assert!(max_abs(&(got.matrix() - expected)) < 1e-15);

        let lat4 = make_chain(4, 2).unwrap();
        let ising = Preset::ising(1.0, 0.0).build(lat4).unwrap();
        let got = hamiltonian(&ising, &Region::from([1, 2])).unwrap();
        let zz12 = kron(&kron(&kron(&i2(), &pauli::z()), &pauli::z()), &i2());
        let zz23 = kron(&kron(&kron(&i2(), &i2()), &pauli::z()), &pauli::z());
        assert!(max_abs(&(got.matrix() - (zz12 + zz23))) < 1e-15);
    }

    #[test]
    fn window_validation() {
        let lat = make_chain(5, 2).unwrap();
        let far = HermitianOperator::from_parts(Region::from([0, 2]), 2, kron(&pauli::z(), &pauli::z()));
        assert!(LocalPotential::new(lat, 1, vec![(0, far.clone())]).is_err());
        assert!(LocalPotential::new(lat, 2, vec![(1, far.clone())]).is_ok());
        let merged = LocalPotential::new(lat, 2, vec![(1, far.clone()), (1, far)]).unwrap();
        assert_eq!(merged.terms().len(), 1);
        assert!(merged.bound() > 2.0);
    }

    #[test]
    fn commutation_gate() {
        let lat = make_chain(4, 2).unwrap();
        let classical = Preset::classical(3).build(lat).unwrap();
        assert!(classical.is_diagonal());
        assert_eq!(check_commuting(&classical).max_commutator_norm, 0.0);
        let ising = Preset::ising(1.0, 0.0).build(lat).unwrap();
        assert!(check_commuting(&ising).pass);
        let cluster = Preset::ClusterZxz { j: 1.0 }.build(lat).unwrap();
        assert!(!cluster.is_diagonal());
        assert!(check_commuting(&cluster).max_commutator_norm < 1e-14);
        // [ZZ, XI] has norm 2; the two overlapping terms contribute [Z0Z1 + X0, X1] etc.
        let tfi = Preset::TransverseIsing { j: 1.0, g: 1.0 }.build(lat).unwrap();
        let r = check_commuting(&tfi);
        assert!(!r.pass && r.max_commutator_norm > 1.0);
        assert!(matches!(gibbs_state(&tfi, 0.5), Err(Error::NonCommuting(_))));
        assert!(gibbs_state_tainted(&tfi, 0.5).unwrap().tainted());

        let zz = HermitianOperator::from_parts(Region::from([0, 1]), 2, kron(&pauli::z(), &pauli::z()));
        let x0 = pauli::on(0, pauli::x());
        let pair = LocalPotential::new(make_chain(2, 2).unwrap(), 2, vec![(0, zz), (1, x0)]).unwrap();
        assert!((check_commuting(&pair).max_commutator_norm - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gibbs_examples() {
        let lat = make_chain(3, 2).unwrap();
        let pot = Preset::ising(1.0, 0.3).build(lat).unwrap();
        let g0 = gibbs_state(&pot, 0.0).unwrap();
        assert!(max_abs(&(g0.sigma().matrix() - linalg::identity(8).scale(0.125))) < 1e-15);
        let zero = LocalPotential::new(lat, 2, vec![]).unwrap();
        let gz = gibbs_state(&zero, 2.0).unwrap();
        assert!(max_abs(&(gz.sigma().matrix() - linalg::identity(8).scale(0.125))) < 1e-15);

        let lat2 = make_chain(2, 2).unwrap();
        let ising2 = Preset::ising(1.0, 0.0).build(lat2).unwrap();
        let g = gibbs_state(&ising2, 0.5).unwrap();
        let (a, b) = ((-0.5f64).exp(), 0.5f64.exp());
        let z = 2.0 * (a + b);
        let expected = diag(&[a / z, b / z, b / z, a / z]);
        assert!(max_abs(&(g.sigma().matrix() - expected)) < 1e-15);
        assert!((g.log_partition() - z.ln()).abs() < 1e-14);
    }

    #[test]
    fn gibbs_matches_direct_exponential() {
        let lat = make_chain(4, 2).unwrap();
        for preset in [Preset::ising(1.0, 0.2), Preset::ClusterZxz { j: 0.8 }, Preset::defect()] {
            let pot = preset.build(lat).unwrap();
            let g = gibbs_state(&pot, 0.7).unwrap();
            let h = hamiltonian(&pot, &lat.full_region()).unwrap();
            let e = matrix_function(&h.scale(-0.7), MatrixFn::Exp, 1e-14, false).unwrap().op;
            let direct = e.matrix().scale(1.0 / e.trace());
            assert!(max_abs(&(g.sigma().matrix() - direct)) < 1e-10);
            let comm = g.sigma().matrix() * h.matrix() - h.matrix() * g.sigma().matrix();
            assert!(max_abs(&comm) < 1e-12);
            assert!(g.min_eigenvalue() > 0.0);
        }
    }

    #[test]
    fn reduced_states_and_cache() {
        let lat = make_chain(3, 2).unwrap();
        let pot = Preset::ising(1.0, 0.4).build(lat).unwrap();
        let g = gibbs_state(&pot, 0.5).unwrap();
        let full = reduced_state(&g, &lat.full_region()).unwrap();
        assert_eq!(full, *g.sigma());
        let mid = reduced_state(&g, &Region::single(1)).unwrap();
        // loop contraction oracle
        let s = g.sigma().matrix();
        let mut oracle = CMat::zeros(2, 2);
        for a in 0..2 {
            for b in 0..2 {
                for x in 0..2 {
                    for z in 0..2 {
                        oracle[(a, b)] += s[(x * 4 + a * 2 + z, x * 4 + b * 2 + z)];
                    }
                }
            }
        }
        assert!(max_abs(&(mid.matrix() - oracle)) < 1e-14);
        let before = g.cached_regions();
        let again = g.marginal(&Region::single(1)).unwrap();
        assert_eq!(g.cached_regions(), before);
        assert_eq!(again.state, mid);

        let mut rng = stream_rng(30, 0);
        let (ra, rb) = (
            random_density(&mut rng, Region::single(0), 2),
            random_density(&mut rng, Region::from([1, 2]), 2),
        );
        let prod = tensor_states(&ra, &rb).unwrap();
        assert!(max_abs(&(reduced_state(&prod, &Region::single(0)).unwrap().matrix() - ra.matrix())) < 1e-14);
    }

    #[test]
    fn cmi_examples() {
        let mut rng = stream_rng(31, 0);
        let (a, b, c) = (Region::single(0), Region::single(1), Region::single(2));
        let prod = tensor_states(
            &tensor_states(
                &random_density(&mut rng, a.clone(), 2),
                &random_density(&mut rng, b.clone(), 2),
            )
            .unwrap(),
            &random_density(&mut rng, c.clone(), 2),
        )
        .unwrap();
        assert!(cmi(&prod, &a, &b, &c).unwrap().abs() < 1e-12);

        // classical GHZ mixture (|000⟩⟨000| + |111⟩⟨111|)/2: I(A:C|B) = 0, I(A:C) = log 2
        let ghz = DensityOperator::from_matrix(Region::range(0, 3), 2, diag(&[0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]))
            .unwrap();
        assert!(cmi(&ghz, &a, &b, &c).unwrap().abs() < 1e-12);
        assert!((cmi(&ghz, &a, &Region::empty(), &c).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert_eq!(cmi(&ghz, &a, &a, &c), Err(Error::Overlap));

        let lat = make_chain(6, 2).unwrap();
        let g = gibbs_state(&Preset::ising(1.0, 0.3).build(lat).unwrap(), 0.8).unwrap();
        let v = cmi(
            g.sigma(),
            &Region::range(0, 2),
            &Region::range(2, 4),
            &Region::range(4, 6),
        )
        .unwrap();
        assert!(v.abs() < 1e-9);
    }

    #[test]
    fn log_defect_examples() {
        let mut rng = stream_rng(32, 0);
        let (a, b, c) = (Region::single(0), Region::single(1), Region::single(2));
        let fr =
            |rng: &mut rand_chacha::ChaCha8Rng, r: &Region| crate::sampling::random_full_rank(rng, r.clone(), 2, 1e-2);
        let prod = tensor_states(
            &tensor_states(&fr(&mut rng, &a), &fr(&mut rng, &b)).unwrap(),
            &fr(&mut rng, &c),
        )
        .unwrap();
        assert!(qmc_log_defect(&prod, &a, &b, &c).unwrap() < 1e-12);

        let lat = make_chain(6, 2).unwrap();
        let g = gibbs_state(&Preset::ClusterZxz { j: 1.0 }.build(lat).unwrap(), 0.6).unwrap();
        let (ga, gb, gc) = (Region::range(0, 2), Region::range(2, 4), Region::range(4, 6));
        assert!(qmc_log_defect_gibbs(&g, &ga, &gb, &gc).unwrap() < 1e-8);
        assert!(qmc_log_defect(g.sigma(), &ga, &gb, &gc).unwrap() < 1e-8);

        let generic = fr(&mut rng, &Region::range(0, 3));
        assert!(qmc_log_defect(&generic, &a, &b, &c).unwrap() > 1e-3);
        let pure = crate::sampling::random_pure(&mut rng, Region::range(0, 3), 2);
        assert!(matches!(qmc_log_defect(&pure, &a, &b, &c), Err(Error::Singular(_))));
    }
}
