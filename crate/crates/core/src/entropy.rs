//! Von Neumann entropy, relative entropies and their identities.

use num_traits::Float;

use crate::error::{Error, Result};
use crate::lattice::Region;
use crate::linalg::{self, CMat};
use crate::operator::{tensor_states, DensityOperator, SpectralDecomposition};
use crate::tol::Tolerances;

/// Default eigenvalue floor for logarithms and support detection.
pub const EPS_FLOOR: f64 = 1e-14;

/// A possibly infinite entropic quantity with its support flags.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EntropyValue {
    pub value: f64,
    pub support_violation: bool,
    pub clamped: bool,
}

impl EntropyValue {
    pub fn finite(value: f64) -> Self {
        Self {
            value,
            support_violation: false,
            clamped: false,
        }
    }

    pub fn infinite() -> Self {
        Self {
            value: f64::INFINITY,
            support_violation: true,
            clamped: false,
        }
    }

    pub fn is_finite(&self) -> bool {
        !self.support_violation
    }

    /// `self − other`; infinities propagate from `self` only.
    pub fn minus(self, other: EntropyValue) -> EntropyValue {
        if self.support_violation {
            return self;
        }
        if other.support_violation {
            return EntropyValue {
                value: f64::NEG_INFINITY,
                support_violation: true,
                clamped: self.clamped || other.clamped,
            };
        }
        EntropyValue {
            value: self.value - other.value,
            support_violation: false,
            clamped: self.clamped || other.clamped,
        }
    }
}

/// `−Σ λ log λ` over eigenvalues above `floor`.
pub fn entropy_of_spectrum(values: &[f64], floor: f64) -> f64 {
    -values
        .iter()
        .filter(|&&l| l > floor)
        .map(|&l| l * Float::ln(l))
        .sum::<f64>()
}

/// `S(ρ) = −tr[ρ log ρ]`.
pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    entropy_of_spectrum(&linalg::eigvalsh(rho.matrix()), EPS_FLOOR)
}

/// A reference state with its spectral data, reusable across many divergences.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub state: DensityOperator,
    pub spectral: SpectralDecomposition,
    floor: f64,
    log: Option<CMat>,
}

impl Prepared {
    pub fn new(state: DensityOperator) -> Self {
        Self::with_floor(state, EPS_FLOOR)
    }

    pub fn with_floor(state: DensityOperator, floor: f64) -> Self {
        let spectral = state.as_operator().spectral();
        Self::assemble(state, spectral, floor)
    }

    /// Reuses a known decomposition of `state`.
    pub fn from_spectral(state: DensityOperator, spectral: SpectralDecomposition) -> Self {
        Self::assemble(state, spectral, EPS_FLOOR)
    }

    fn assemble(state: DensityOperator, spectral: SpectralDecomposition, floor: f64) -> Self {
        let log = (spectral.min() > floor).then(|| spectral.apply(Float::ln));
        Self {
            state,
            spectral,
            floor,
            log,
        }
    }

    pub fn is_full_rank(&self) -> bool {
        self.log.is_some()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectral.min()
    }

    /// `log σ`, with eigenvalues below the floor clamped.
    pub fn log(&self) -> CMat {
        match &self.log {
            Some(l) => l.clone(),
            None => self.spectral.apply(|x| Float::ln(x.max(self.floor))),
        }
    }

    pub fn sqrt(&self) -> CMat {
        self.spectral.apply(|x| Float::sqrt(x.max(0.0)))
    }

    /// `σ^{-1/2}`; rejects singular states.
    pub fn inv_sqrt(&self) -> Result<CMat> {
        if !self.is_full_rank() {
            return Err(Error::Singular(self.spectral.min()));
        }
        Ok(self.spectral.apply(|x| 1.0 / Float::sqrt(x)))
    }

    /// `tr[ρ log σ]`, or `None` when `ρ` has weight outside the support of `σ`.
    pub fn cross(&self, rho: &CMat) -> Option<(f64, bool)> {
        if let Some(log) = &self.log {
            return Some((linalg::trace_product(rho, log).re, false));
        }
        let v = &self.spectral.eigenvectors;
        let rv = rho * v;
        let mut acc = 0.0;
        let mut clamped = false;
        for (j, &mu) in self.spectral.eigenvalues.iter().enumerate() {
            let w: f64 = (0..v.nrows()).map(|i| (v[(i, j)].conj() * rv[(i, j)]).re).sum();
            if mu <= self.floor {
                if w > self.floor {
                    return None;
                }
                clamped = true;
            } else {
                acc += w * Float::ln(mu);
            }
        }
        Some((acc, clamped))
    }
}

fn same_support(rho: &DensityOperator, sigma: &DensityOperator) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), sigma.dim()));
    }
    if rho.support() != sigma.support() {
        return Err(Error::NotInSupport);
    }
    Ok(())
}

/// `D(ρ‖σ) = tr[ρ(log ρ − log σ)]`, infinite with a flag on support violations.
pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> Result<EntropyValue> {
    same_support(rho, sigma)?;
    Ok(relative_entropy_prepared(rho, &Prepared::new(sigma.clone())))
}

/// `D(ρ‖σ)` against a prepared reference; supports must already match.
pub fn relative_entropy_prepared(rho: &DensityOperator, sigma: &Prepared) -> EntropyValue {
    let s = von_neumann_entropy(rho);
    match sigma.cross(rho.matrix()) {
        None => EntropyValue::infinite(),
        Some((cross, clamped)) => EntropyValue {
            value: -s - cross,
            support_violation: false,
            clamped,
        },
    }
}

/// `D_A(ρ‖σ) = D(ρ‖σ) − D(ρ_{A^c}‖σ_{A^c})` with `A^c` taken inside the support.
pub fn conditional_relative_entropy(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    a: &Region,
) -> Result<EntropyValue> {
    same_support(rho, sigma)?;
    if !a.is_subset(rho.support()) {
        return Err(Error::NotInSupport);
    }
    let full = relative_entropy(rho, sigma)?;
    let rest = rho.support().difference(a);
    if rest.is_empty() {
        return Ok(full);
    }
    let marginal = relative_entropy(&rho.reduce(&rest)?, &sigma.reduce(&rest)?)?;
    Ok(full.minus(marginal))
}

/// `I_ρ(A:B) = D(ρ_AB‖ρ_A ⊗ ρ_B)`.
pub fn mutual_information(rho: &DensityOperator, a: &Region, b: &Region) -> Result<f64> {
    if !a.is_disjoint(b) {
        return Err(Error::Overlap);
    }
    let ab = a.union(b);
    if !ab.is_subset(rho.support()) {
        return Err(Error::NotInSupport);
    }
    let rho_ab = rho.reduce(&ab)?;
    let product = tensor_states(&rho_ab.reduce(a)?, &rho_ab.reduce(b)?)?;
    Ok(relative_entropy(&rho_ab, &product)?.value)
}

/// Residual report for an entropy identity.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityReport {
    pub fn new(lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let residual = (lhs - rhs).abs();
        Self {
            lhs,
            rhs,
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }
}

/// Checks `D_A(ρ‖σ_A⊗σ_B) = I_ρ(A:B) + D(ρ_A‖σ_A)` for `ρ` on `A ∪ B`.
pub fn cre_product_identity_check(
    rho: &DensityOperator,
    sigma_a: &DensityOperator,
    sigma_b: &DensityOperator,
    a: &Region,
    b: &Region,
) -> Result<IdentityReport> {
    if sigma_a.support() != a || sigma_b.support() != b {
        return Err(Error::NotInSupport);
    }
    let product = tensor_states(sigma_a, sigma_b)?;
    let lhs = conditional_relative_entropy(rho, &product, a)?.value;
    let rhs = mutual_information(rho, a, b)? + relative_entropy(&rho.reduce(a)?, sigma_a)?.value;
    Ok(IdentityReport::new(lhs, rhs, Tolerances::default().identity))
}

/// Report of the Markov-chain identity for conditional relative entropies.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct QmcIdentityReport {
    pub identity: IdentityReport,
    pub log_defect: f64,
    /// `D_A(ρ_ABC‖σ_ABC) − D_A(ρ_AB‖σ_AB)`, which must be non-negative.
    pub monotonicity_slack: f64,
    pub pass: bool,
}

/// Checks `D_A(ρ_ABC‖σ_ABC) = D_A(ρ_AB‖σ_AB) + I_ρ(A:C|B)` when `σ` is a Markov chain `A↔B↔C`.
pub fn cre_qmc_identity_check(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    a: &Region,
    b: &Region,
    c: &Region,
    tol: &Tolerances,
) -> Result<QmcIdentityReport> {
    same_support(rho, sigma)?;
    let log_defect = crate::gibbs::qmc_log_defect(sigma, a, b, c)?;
    if log_defect > tol.qmc {
        return Err(Error::NotMarkov(log_defect));
    }
    let ab = a.union(b);
    let lhs = conditional_relative_entropy(rho, sigma, a)?.value;
    let inner = conditional_relative_entropy(&rho.reduce(&ab)?, &sigma.reduce(&ab)?, a)?.value;
    let cmi = crate::gibbs::cmi(rho, a, b, c)?;
    let identity = IdentityReport::new(lhs, inner + cmi, tol.qmc);
    let monotonicity_slack = lhs - inner;
    Ok(QmcIdentityReport {
        identity,
        log_defect,
        monotonicity_slack,
        pass: identity.pass && monotonicity_slack >= -tol.ssa,
    })
}
