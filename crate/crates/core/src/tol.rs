//! Numerical tolerances shared across modules.

/// Every tolerance used by checks, with defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Tolerances {
    /// Hermiticity, relative to the operator norm.
    pub herm: f64,
    /// Smallest admissible eigenvalue of a density operator.
    pub psd: f64,
    /// Trace deviation of a density operator.
    pub trace: f64,
    /// Eigendecomposition reconstruction, relative.
    pub eig: f64,
    /// Eigenvalue floor for logarithms and support detection.
    pub floor: f64,
    /// Commutator norm of potential terms.
    pub comm: f64,
    /// Dense superoperator agreement with its functional form.
    pub lin: f64,
    /// Strong subadditivity and generic entropy inequalities.
    pub ssa: f64,
    /// Conditional relative entropy non-negativity.
    pub cre: f64,
    /// Entropy production non-negativity.
    pub ep: f64,
    /// Markov chain log defect and conditional mutual information.
    pub qmc: f64,
    /// Slack for inequality checks.
    pub slack: f64,
    /// Identity residuals (product identities, detailed balance).
    pub identity: f64,
    /// Denominator threshold below which quotients are degenerate.
    pub degenerate: f64,
    /// Fixed-point threshold for the kernel equivalence check.
    pub fixed_point: f64,
    /// Trace-norm PSD violation that aborts matrix-free evolution.
    pub evolve_psd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-12,
            psd: 1e-10,
            trace: 1e-10,
            eig: 1e-10,
            floor: 1e-14,
            comm: 1e-10,
            lin: 1e-10,
            ssa: 1e-9,
            cre: 1e-9,
            ep: 1e-9,
            qmc: 1e-8,
            slack: 1e-9,
            identity: 1e-9,
            degenerate: 1e-10,
            fixed_point: 1e-10,
            evolve_psd: 1e-8,
        }
    }
}
