//! Heat-bath conditional expectations, generators and their quadratic forms.

mod evolve;

pub(crate) use evolve::evolve_signed;
pub use evolve::{evolve, Propagator};

use alloc::sync::Arc;
use alloc::vec::Vec;

use num_traits::Float;
use spin::Once;

use crate::entropy::EntropyValue;
use crate::error::{Error, Result};
use crate::gibbs::GibbsState;
use crate::lattice::Region;
use crate::linalg::{self, CMat, Sandwich, ONE};
use crate::operator::{norms_of_matrix, trace_distance, DensityOperator, HermitianOperator, Split};
use crate::sampling::{random_hermitian, stream_rng};
use crate::superop::{check_dense_cap, kraus_matrix, Superoperator, DEFAULT_DENSE_CAP};

/// `E*_X(ρ) = σ^{1/2} σ_{X^c}^{-1/2} ρ_{X^c} σ_{X^c}^{-1/2} σ^{1/2}` and its dual.
#[derive(Debug, Clone)]
pub struct HeatBathExpectation {
    region: Region,
    split: Split,
    s_half: Arc<Sandwich>,
    m: Sandwich,
}

impl HeatBathExpectation {
    pub fn new(state: &GibbsState, region: &Region) -> Result<Self> {
        state.lattice().check_region(region)?;
        let full = state.lattice().full_region();
        let rest = full.difference(region);
        let m = if rest.is_empty() {
            Sandwich::Diagonal(alloc::vec![1.0])
        } else {
            Sandwich::from_matrix(state.marginal(&rest)?.inv_sqrt()?)
        };
        Ok(Self {
            region: region.clone(),
            split: Split::new(&full, &rest, state.lattice().local_dim()),
            s_half: state.sqrt_sandwich(),
            m,
        })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    /// Schrödinger picture action on a full-chain matrix.
    pub fn apply(&self, rho: &CMat) -> CMat {
        let reduced = self.split.trace_rest(rho);
        self.s_half.apply(&self.split.embed(&self.m.apply(&reduced)))
    }

    /// Heisenberg picture `E_X(f) = σ_{X^c}^{-1/2} tr_X[σ^{1/2} f σ^{1/2}] σ_{X^c}^{-1/2}`.
    pub fn apply_dual(&self, f: &CMat) -> CMat {
        let reduced = self.split.trace_rest(&self.s_half.apply(f));
        self.split.embed(&self.m.apply(&reduced))
    }

    /// Kraus operators `σ^{1/2}(σ_{X^c}^{-1/2} ⊗ |s⟩⟨t|_X)`.
    pub fn kraus(&self) -> Vec<CMat> {
        let dim = self.split.sub_dim * self.split.rest_dim;
        let m = self.m.matrix();
        let p = self.s_half.left(&self.split.embed(&m));
        let dx = self.split.rest_dim;
        let mut out = Vec::with_capacity(dx * dx);
        for s in 0..dx {
            for t in 0..dx {
                let mut k = CMat::zeros(dim, dim);
                for r in 0..self.split.sub_dim {
                    let (src, dst) = (self.split.index(r, s), self.split.index(r, t));
                    k.set_column(dst, &p.column(src));
                }
                out.push(k);
            }
        }
        out
    }
}

/// Applies `E*_A` to a full-chain state.
pub fn heat_bath_expectation(sigma: &GibbsState, a: &Region, rho: &DensityOperator) -> Result<DensityOperator> {
    check_full(sigma, rho.support())?;
    let e = HeatBathExpectation::new(sigma, a)?;
    Ok(DensityOperator::normalized(
        rho.support().clone(),
        rho.local_dim(),
        e.apply(rho.matrix()),
    ))
}

/// Applies the dual `E_A` to a full-chain observable.
pub fn dual_expectation(sigma: &GibbsState, a: &Region, f: &HermitianOperator) -> Result<HermitianOperator> {
    check_full(sigma, f.support())?;
    let e = HeatBathExpectation::new(sigma, a)?;
    HermitianOperator::new(f.support().clone(), f.local_dim(), e.apply_dual(f.matrix()))
}

fn check_full(sigma: &GibbsState, support: &Region) -> Result<()> {
    if *support != sigma.lattice().full_region() {
        return Err(Error::InvalidParameter("operator must live on the full chain".into()));
    }
    Ok(())
}

/// Which heat-bath generator on a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum GeneratorKind {
    /// `L*_A = Σ_{x∈A} (E*_x − id)`.
    Sum,
    /// `L̃*_A = E*_A − id`.
    Block,
}

/// How the generator may be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Mode {
    /// Materialize the vectorized generator; fails above the cap.
    Dense,
    /// Functional action only.
    MatrixFree,
    /// Dense when under the cap, otherwise matrix-free.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorOptions {
    pub mode: Mode,
    pub dense_cap: usize,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Auto,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

/// A heat-bath generator bound to a Gibbs state.
pub struct HeatBathGenerator<'g> {
    state: &'g GibbsState,
    region: Region,
    kind: GeneratorKind,
    dense_allowed: bool,
    parts: Vec<HeatBathExpectation>,
    dense: Once<CMat>,
    propagator: Once<Option<Propagator>>,
}

/// `L*_A` with default options.
pub fn lindbladian<'g>(sigma: &'g GibbsState, a: &Region) -> Result<HeatBathGenerator<'g>> {
    HeatBathGenerator::new(sigma, a, GeneratorKind::Sum, GeneratorOptions::default())
}

/// `L̃*_A` with default options.
pub fn single_block_generator<'g>(sigma: &'g GibbsState, a: &Region) -> Result<HeatBathGenerator<'g>> {
    HeatBathGenerator::new(sigma, a, GeneratorKind::Block, GeneratorOptions::default())
}

impl<'g> HeatBathGenerator<'g> {
    pub fn new(state: &'g GibbsState, region: &Region, kind: GeneratorKind, opts: GeneratorOptions) -> Result<Self> {
        state.lattice().check_region(region)?;
        let dim = state.lattice().dim();
        let under_cap = check_dense_cap(dim, opts.dense_cap);
        let dense_allowed = match opts.mode {
            Mode::Dense => {
                under_cap?;
                true
            }
            Mode::MatrixFree => false,
            Mode::Auto => under_cap.is_ok(),
        };
        let parts = match kind {
            GeneratorKind::Sum => region
                .iter()
                .map(|x| HeatBathExpectation::new(state, &Region::single(x)))
                .collect::<Result<Vec<_>>>()?,
            GeneratorKind::Block if region.is_empty() => Vec::new(),
            GeneratorKind::Block => alloc::vec![HeatBathExpectation::new(state, region)?],
        };
        Ok(Self {
            state,
            region: region.clone(),
            kind,
            dense_allowed,
            parts,
            dense: Once::new(),
            propagator: Once::new(),
        })
    }

    pub fn state(&self) -> &'g GibbsState {
        self.state
    }

    pub fn sigma(&self) -> &'g DensityOperator {
        self.state.sigma()
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.state.lattice().dim()
    }

    pub fn is_dense(&self) -> bool {
        self.dense_allowed
    }

    /// `L*(ρ)` on a full-chain matrix.
    pub fn apply(&self, rho: &CMat) -> CMat {
        let mut out = rho.scale(-(self.parts.len() as f64));
        for e in &self.parts {
            out += e.apply(rho);
        }
        out
    }

    /// Heisenberg picture `L(f)`.
    pub fn apply_dual(&self, f: &CMat) -> CMat {
        let mut out = f.scale(-(self.parts.len() as f64));
        for e in &self.parts {
            out += e.apply_dual(f);
        }
        out
    }

    fn kraus(&self) -> Vec<CMat> {
        self.parts.iter().flat_map(|e| e.kraus()).collect()
    }

    /// Column-stacking matrix of the generator, built once on first use.
    pub fn dense_matrix(&self) -> Result<&CMat> {
        if !self.dense_allowed {
            return Err(Error::DimensionCap {
                dim: self.dim() * self.dim(),
                cap: DEFAULT_DENSE_CAP,
            });
        }
        Ok(self.dense.call_once(|| {
            let n = self.dim() * self.dim();
            let mut m = kraus_matrix(&self.kraus());
            if m.nrows() == 0 {
                m = CMat::zeros(n, n);
            }
            for i in 0..n {
                m[(i, i)] -= ONE.scale(self.parts.len() as f64);
            }
            m
        }))
    }

    /// Exact propagator in the eigenbasis of `σ`, when dense mode is allowed.
    pub fn propagator(&self) -> Option<&Propagator> {
        if !self.dense_allowed {
            return None;
        }
        self.propagator
            .call_once(|| Propagator::build(self.state, &self.kraus(), self.parts.len()))
            .as_ref()
    }

    /// `EP(ρ) = −tr[L*(ρ)(log ρ − log σ)]`, clamping logs of singular `ρ`.
    pub fn entropy_production(&self, rho: &DensityOperator) -> EntropyValue {
        let spec = rho.as_operator().spectral();
        let floor = crate::entropy::EPS_FLOOR;
        let clamped = spec.min() <= floor;
        let log_rho = spec.apply(|x| Float::ln(x.max(floor)));
        let diff = log_rho - self.state.prepared().log();
        let value = -linalg::trace_product(&self.apply(rho.matrix()), &diff).re;
        EntropyValue {
            value,
            support_violation: false,
            clamped,
        }
    }
}

impl Superoperator for HeatBathGenerator<'_> {
    fn domain_dim(&self) -> usize {
        self.dim()
    }

    fn apply(&self, x: &CMat) -> CMat {
        HeatBathGenerator::apply(self, x)
    }
}

/// `EP_A(ρ)` for the generator `L*_A`.
pub fn entropy_production(sigma: &GibbsState, a: &Region, rho: &DensityOperator) -> Result<EntropyValue> {
    check_full(sigma, rho.support())?;
    let gen = HeatBathGenerator::new(
        sigma,
        a,
        GeneratorKind::Sum,
        GeneratorOptions {
            mode: Mode::MatrixFree,
            dense_cap: DEFAULT_DENSE_CAP,
        },
    )?;
    Ok(gen.entropy_production(rho))
}

/// `⟨f, g⟩_σ = tr[f σ^{1/2} g σ^{1/2}]`.
pub fn kms_inner(s_half: &Sandwich, f: &CMat, g: &CMat) -> f64 {
    linalg::trace_product(f, &s_half.apply(g)).re
}

/// `⟨f, f − E_A(f)⟩_σ`.
pub fn dirichlet_form(sigma: &GibbsState, a: &Region, f: &HermitianOperator) -> Result<f64> {
    check_full(sigma, f.support())?;
    let e = HeatBathExpectation::new(sigma, a)?;
    Ok(dirichlet_with(&e, &sigma.sqrt_sandwich(), f.matrix()))
}

fn dirichlet_with(e: &HeatBathExpectation, s_half: &Sandwich, f: &CMat) -> f64 {
    kms_inner(s_half, f, &(f - e.apply_dual(f)))
}

/// Largest detailed-balance residual over sampled pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DetailedBalanceReport {
    pub max_residual: f64,
    pub n_samples: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// Samples Hermitian pairs with unit Frobenius norm and compares `⟨f, L(g)⟩_σ` with `⟨L(f), g⟩_σ`.
pub fn check_detailed_balance(
    sigma: &GibbsState,
    a: &Region,
    n_samples: usize,
    seed: u64,
) -> Result<DetailedBalanceReport> {
    let gen = HeatBathGenerator::new(
        sigma,
        a,
        GeneratorKind::Sum,
        GeneratorOptions {
            mode: Mode::MatrixFree,
            dense_cap: DEFAULT_DENSE_CAP,
        },
    )?;
    let s = sigma.sqrt_sandwich();
    let full = sigma.lattice().full_region();
    let d = sigma.lattice().local_dim();
    let mut worst: f64 = 0.0;
    for i in 0..n_samples {
        let mut rng = stream_rng(seed, i as u64);
        let unit = |h: HermitianOperator| {
            let m = h.into_matrix();
            let n = linalg::frobenius(&m);
            m.scale(1.0 / n)
        };
        let f = unit(random_hermitian(&mut rng, full.clone(), d));
        let g = unit(random_hermitian(&mut rng, full.clone(), d));
        let lhs = kms_inner(&s, &f, &gen.apply_dual(&g));
        let rhs = kms_inner(&s, &gen.apply_dual(&f), &g);
        worst = worst.max((lhs - rhs).abs());
    }
    let tolerance = crate::tol::Tolerances::default().identity;
    Ok(DetailedBalanceReport {
        max_residual: worst,
        n_samples,
        tolerance,
        pass: worst <= tolerance,
    })
}

/// Per-state distances to the fixed points of `E*_A` and of every `E*_x`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FixedPointRow {
    pub delta_block: f64,
    pub delta_sites: Vec<f64>,
}

/// Kernel-equivalence report with measured implication constants.
///
/// The numeric strengthening of the exact kernel statement is our own; only
/// the exact equivalence on `σ` itself is asserted.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FixedPointReport {
    pub rows: Vec<FixedPointRow>,
    pub threshold: f64,
    /// `max_x δ_x` over states with `δ_A ≤ threshold`, if any.
    pub eta: Option<f64>,
    /// `δ_A` over states with `max_x δ_x ≤ threshold`, if any.
    pub eta_prime: Option<f64>,
    pub sigma_row: FixedPointRow,
    /// `‖E*_A(E*_A(ρ)) − E*_A(ρ)‖_1` maximized over the states; reported, not asserted.
    pub idempotence_defect: f64,
    pub pass: bool,
}

pub fn fixed_point_equivalence_check(
    sigma: &GibbsState,
    a: &Region,
    states: &[DensityOperator],
) -> Result<FixedPointReport> {
    let tol = crate::tol::Tolerances::default();
    let block = HeatBathExpectation::new(sigma, a)?;
    let sites = a
        .iter()
        .map(|x| HeatBathExpectation::new(sigma, &Region::single(x)))
        .collect::<Result<Vec<_>>>()?;
    let dist = |x: &CMat, y: &CMat| norms_of_matrix(&(x - y)).trace_norm;
    let row = |rho: &CMat| FixedPointRow {
        delta_block: dist(rho, &block.apply(rho)),
        delta_sites: sites.iter().map(|e| dist(rho, &e.apply(rho))).collect(),
    };
    let mut rows = Vec::with_capacity(states.len());
    let mut idempotence_defect: f64 = 0.0;
    for rho in states {
        check_full(sigma, rho.support())?;
        rows.push(row(rho.matrix()));
        let once = block.apply(rho.matrix());
        idempotence_defect = idempotence_defect.max(dist(&block.apply(&once), &once));
    }
    let max_site = |r: &FixedPointRow| r.delta_sites.iter().copied().fold(0.0, f64::max);
    let threshold = tol.fixed_point;
    let eta = rows
        .iter()
        .filter(|r| r.delta_block <= threshold)
        .map(max_site)
        .reduce(f64::max);
    let eta_prime = rows
        .iter()
        .filter(|r| max_site(r) <= threshold)
        .map(|r| r.delta_block)
        .reduce(f64::max);
    let sigma_row = row(sigma.sigma().matrix());
    let sigma_ok = sigma_row.delta_block <= threshold && max_site(&sigma_row) <= threshold;
    let implication = |v: Option<f64>| v.is_none_or(|v| v <= tol.qmc);
    Ok(FixedPointReport {
        pass: sigma_ok && implication(eta) && implication(eta_prime),
        rows,
        threshold,
        eta,
        eta_prime,
        sigma_row,
        idempotence_defect,
    })
}

/// Sampled bounds on `⟨f,(id−E_A)f⟩_σ / Σ_x ⟨f,(id−E_x)f⟩_σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DirichletRatioReport {
    pub c_min: f64,
    pub c_max: f64,
    pub n_used: usize,
    pub n_excluded: usize,
    /// Probes with a small denominator also had a small numerator, and conversely.
    pub kernel_consistent: bool,
}

pub fn dirichlet_ratio_bounds(
    sigma: &GibbsState,
    a: &Region,
    n_samples: usize,
    seed: u64,
) -> Result<DirichletRatioReport> {
    let s = sigma.sqrt_sandwich();
    let block = HeatBathExpectation::new(sigma, a)?;
    let sites = a
        .iter()
        .map(|x| HeatBathExpectation::new(sigma, &Region::single(x)))
        .collect::<Result<Vec<_>>>()?;
    let full = sigma.lattice().full_region();
    let d = sigma.lattice().local_dim();
    let dim = sigma.lattice().dim();
    let (small, tiny) = (1e-12, 1e-10);
    let mut report = DirichletRatioReport {
        c_min: f64::INFINITY,
        c_max: 0.0,
        n_used: 0,
        n_excluded: 0,
        kernel_consistent: true,
    };
    let mut probes: Vec<CMat> = Vec::with_capacity(n_samples + 2);
    probes.push(linalg::identity(dim));
    for i in 0..n_samples {
        let mut rng = stream_rng(seed, i as u64);
        let m = random_hermitian(&mut rng, full.clone(), d).into_matrix();
        let n = linalg::frobenius(&m);
        probes.push(m.scale(1.0 / n));
    }
    // a point of the common kernel perturbed along a random direction
    if let Some(dir) = probes.get(1).cloned() {
        probes.push(linalg::identity(dim) + dir.scale(1e-8));
    }
    for f in &probes {
        let num = dirichlet_with(&block, &s, f);
        let den: f64 = sites.iter().map(|e| dirichlet_with(e, &s, f)).sum();
        if (den < small && num > tiny) || (num < small && den > tiny) {
            report.kernel_consistent = false;
        }
        if den < small {
            report.n_excluded += 1;
            continue;
        }
        let r = num / den;
        report.c_min = report.c_min.min(r);
        report.c_max = report.c_max.max(r);
        report.n_used += 1;
    }
    Ok(report)
}

/// Trace distance to `σ`, convenient for trajectories.
pub fn distance_to_sigma(sigma: &GibbsState, rho: &DensityOperator) -> f64 {
    trace_distance(rho, sigma.sigma())
}

#[cfg(test)]
mod tests;
