//! Correlation measures between the complements `C = B^c` and `D = A^c` of a splitting.

use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use crate::classical::{ClassicalGibbs, CLASSICAL_DIM_CAP};
use crate::error::{Error, Result};
use crate::gibbs::{gibbs_state, GibbsState, LocalPotential};
use crate::lattice::{standard_splitting, Lattice, Region, DEFAULT_DIM_CAP};
use crate::linalg;
use crate::operator::{norms_of_matrix, Split};

/// A Gibbs state in either representation.
#[derive(Clone, Copy)]
pub enum GibbsRef<'a> {
    Dense(&'a GibbsState),
    Classical(&'a ClassicalGibbs),
}

impl GibbsRef<'_> {
    pub fn lattice(&self) -> &Lattice {
        match self {
            GibbsRef::Dense(g) => g.lattice(),
            GibbsRef::Classical(g) => g.lattice(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            GibbsRef::Dense(g) => g.potential().k(),
            GibbsRef::Classical(g) => g.k(),
        }
    }
}

fn check_pair(lattice: &Lattice, c: &Region, d: &Region) -> Result<()> {
    lattice.check_region(c)?;
    lattice.check_region(d)?;
    if !c.is_disjoint(d) {
        return Err(Error::Overlap);
    }
    Ok(())
}

/// `X = (σ_C⊗σ_D)^{-1/2} σ_CD (σ_C⊗σ_D)^{-1/2}` for dense states.
fn dense_correlation(sigma: &GibbsState, c: &Region, d: &Region) -> Result<linalg::CMat> {
    let cd = c.union(d);
    let joint = sigma.marginal(&cd)?;
    let (mc, md) = (sigma.marginal(c)?, sigma.marginal(d)?);
    let p = Split::new(&cd, c, sigma.lattice().local_dim()).product(&mc.inv_sqrt()?, &md.inv_sqrt()?);
    Ok(&p * joint.state.matrix() * &p)
}

/// `p_CD / (p_C p_D)` over configurations of `C ∪ D`.
fn classical_ratios(sigma: &ClassicalGibbs, c: &Region, d: &Region) -> Result<Vec<f64>> {
    let cd = c.union(d);
    let dim = sigma.lattice().local_dim();
    let joint = sigma.marginal(&cd)?;
    let (pc, pd) = (sigma.marginal(c)?, sigma.marginal(d)?);
    if let Some(&m) = pc.iter().chain(pd.iter()).find(|&&x| !(x > 0.0)) {
        return Err(Error::Singular(m));
    }
    let split = Split::new(&cd, c, dim);
    let mut out = alloc::vec![0.0; joint.len()];
    for a in 0..split.sub_dim {
        for t in 0..split.rest_dim {
            let i = split.index(a, t);
            out[i] = joint[i] / (pc[a] * pd[t]);
        }
    }
    Ok(out)
}

/// `‖σ_C^{-1/2}⊗σ_D^{-1/2} σ_CD σ_C^{-1/2}⊗σ_D^{-1/2} − 𝟙‖_∞`.
pub fn mixing_norm(sigma: GibbsRef<'_>, c: &Region, d: &Region) -> Result<f64> {
    check_pair(sigma.lattice(), c, d)?;
    if c.is_empty() || d.is_empty() {
        return Ok(0.0);
    }
    match sigma {
        GibbsRef::Dense(g) => {
            let x = dense_correlation(g, c, d)?;
            let n = x.nrows();
            Ok(norms_of_matrix(&(x - linalg::identity(n))).operator_norm)
        }
        GibbsRef::Classical(g) => Ok(classical_ratios(g, c, d)?
            .into_iter()
            .map(|r| (r - 1.0).abs())
            .fold(0.0, f64::max)),
    }
}

/// Verdict of `½ σ_C⊗σ_D < σ_CD < (3/2) σ_C⊗σ_D`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct IntervalReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Distances `(λ_min − 1/2, 3/2 − λ_max)`; negative on failure.
    pub margins: (f64, f64),
    pub pass: bool,
}

pub fn operator_interval_check(sigma: GibbsRef<'_>, c: &Region, d: &Region) -> Result<IntervalReport> {
    check_pair(sigma.lattice(), c, d)?;
    let (lo, hi) = if c.is_empty() || d.is_empty() {
        (1.0, 1.0)
    } else {
        match sigma {
            GibbsRef::Dense(g) => {
                let ev = linalg::eigvalsh(&dense_correlation(g, c, d)?);
                (ev[0], ev[ev.len() - 1])
            }
            GibbsRef::Classical(g) => {
                let r = classical_ratios(g, c, d)?;
                (
                    r.iter().copied().fold(f64::INFINITY, f64::min),
                    r.iter().copied().fold(0.0, f64::max),
                )
            }
        }
    };
    let margins = (lo - 0.5, 1.5 - hi);
    Ok(IntervalReport {
        min_eigenvalue: lo,
        max_eigenvalue: hi,
        margins,
        pass: margins.0 > 0.0 && margins.1 > 0.0,
    })
}

/// One geometry of a mixing scan.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MixingRow {
    pub k: usize,
    pub l: usize,
    pub n_blocks: usize,
    pub n_sites: usize,
    pub engine: String,
    pub h_norm: f64,
    pub interval: IntervalReport,
}

/// Least-squares fit `h ≈ K_1 e^{−K_2 l}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ExpFit {
    pub k1: f64,
    pub k2: f64,
    /// Root-mean-square residual of `log h`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MixingConditionReport {
    pub rows: Vec<MixingRow>,
    pub l_values: Vec<usize>,
    pub h_norms: Vec<f64>,
    pub fit: Option<ExpFit>,
    /// Every norm vanished to `1e-12`; the state factorizes across `C | D`.
    pub exact_factorization: bool,
    /// Every norm is strictly below `1/2`.
    pub weaker_pass: bool,
    pub strictly_decreasing: bool,
    /// Interval verdicts coincide with `h < 1/2` on every row.
    pub interval_consistent: bool,
}

/// Fits `log h = log K_1 − K_2 l` through points with `h > 0`.
pub fn fit_exponential(l: &[usize], h: &[f64]) -> Option<ExpFit> {
    let pts: Vec<(f64, f64)> = l
        .iter()
        .zip(h)
        .filter(|(_, &h)| h > 0.0 && h.is_finite())
        .map(|(&l, &h)| (l as f64, Float::ln(h)))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Some(ExpFit {
        k1: Float::exp(intercept),
        k2: -slope,
        residual: Float::sqrt(rss / n),
    })
}

/// Threshold below which a norm counts as exact factorization.
const ZERO_NORM: f64 = 1e-12;

/// Measures `‖h(σ_{CD})‖_∞` on the standard splitting for each `(k, l, n)`.
///
/// Diagonal potentials use the classical engine; others need a dense chain
/// within the default cap.
pub fn mixing_scan(
    potential_for: &dyn Fn(Lattice) -> Result<LocalPotential>,
    beta: f64,
    local_dim: usize,
    family: &[(usize, usize, usize)],
) -> Result<MixingConditionReport> {
    let mut rows = Vec::with_capacity(family.len());
    for &(k, l, n) in family {
        let split = standard_splitting(k, l, n)?;
        let lattice = split.lattice(local_dim, CLASSICAL_DIM_CAP)?;
        let potential = potential_for(lattice)?;
        let (c, d) = (split.c(), split.d());
        let (engine, h_norm, interval) = if potential.is_diagonal() {
            let g = ClassicalGibbs::new(&potential, beta)?;
            let r = GibbsRef::Classical(&g);
            (
                "classical",
                mixing_norm(r, &c, &d)?,
                operator_interval_check(r, &c, &d)?,
            )
        } else {
            if lattice.dim() > DEFAULT_DIM_CAP {
                return Err(Error::DimensionCap {
                    dim: lattice.dim(),
                    cap: DEFAULT_DIM_CAP,
                });
            }
            let g = gibbs_state(&potential, beta)?;
            let r = GibbsRef::Dense(&g);
            ("dense", mixing_norm(r, &c, &d)?, operator_interval_check(r, &c, &d)?)
        };
        rows.push(MixingRow {
            k,
            l,
            n_blocks: n,
            n_sites: split.n_sites,
            engine: engine.into(),
            h_norm,
            interval,
        });
    }
    Ok(summarize(rows))
}

fn summarize(rows: Vec<MixingRow>) -> MixingConditionReport {
    let l_values: Vec<usize> = rows.iter().map(|r| r.l).collect();
    let h_norms: Vec<f64> = rows.iter().map(|r| r.h_norm).collect();
    let exact_factorization = !h_norms.is_empty() && h_norms.iter().all(|&h| h <= ZERO_NORM);
    let fit = if exact_factorization {
        None
    } else {
        fit_exponential(&l_values, &h_norms)
    };
    MixingConditionReport {
        weaker_pass: h_norms.iter().all(|&h| h < 0.5),
        strictly_decreasing: h_norms.windows(2).all(|w| w[1] < w[0]),
        interval_consistent: rows.iter().all(|r| r.interval.pass == (r.h_norm < 0.5)),
        rows,
        l_values,
        h_norms,
        fit,
        exact_factorization,
    }
}
