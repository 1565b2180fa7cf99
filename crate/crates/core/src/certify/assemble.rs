//! Assembly of the global lower bound and trajectory-level mixing-time checks.

use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use super::mixing::MixingConditionReport;
use super::optimize::{MlsiEstimate, QfReport};
use crate::dynamics::{evolve, HeatBathGenerator};
use crate::entropy::relative_entropy_prepared;
use crate::error::{Error, Result};
use crate::operator::{trace_distance, DensityOperator};

/// Caveat attached to every assembled certificate.
pub const HEURISTIC_CAVEAT: &str = "conditional constants are optimizer minima, i.e. upper bounds on \
     infima, so the assembled value is a heuristic certificate; the rigorous variant uses 1/(2f) and \
     holds conditional on each sampled f bounding the true quasi-factorization constant";

/// Global MLSI lower bound built from a mixing measurement and local constants.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AssembledBound {
    pub h_norm: f64,
    /// `(1 − 2h)/2`.
    pub k_tilde: f64,
    pub min_conditional_alpha: f64,
    /// `K̃ · min α̂`.
    pub alpha_lower_certificate: f64,
    /// `K̃ · min 1/(2f̂)`, present when quasi-factorization estimates are supplied.
    pub rigorous: Option<f64>,
    pub caveat: String,
}

/// Scalar core of the assembly.
pub fn assemble_from(h_norm: f64, alphas: &[f64], f_hats: &[f64]) -> Result<AssembledBound> {
    if !(h_norm >= 0.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "h-norm must be non-negative, got {h_norm}"
        )));
    }
    if h_norm >= 0.5 {
        return Err(Error::NoCertificate(h_norm));
    }
    if alphas.is_empty() {
        return Err(Error::InvalidParameter("no conditional constants supplied".into()));
    }
    if alphas.iter().chain(f_hats).any(|x| !x.is_finite()) || f_hats.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::InvalidParameter(
            "constants must be finite and f̂ positive".into(),
        ));
    }
    let k_tilde = (1.0 - 2.0 * h_norm) / 2.0;
    let min_alpha = alphas.iter().copied().fold(f64::INFINITY, f64::min);
    let rigorous = (!f_hats.is_empty()).then(|| {
        let f_max = f_hats.iter().copied().fold(0.0, f64::max);
        k_tilde / (2.0 * f_max)
    });
    Ok(AssembledBound {
        h_norm,
        k_tilde,
        min_conditional_alpha: min_alpha,
        alpha_lower_certificate: k_tilde * min_alpha,
        rigorous,
        caveat: HEURISTIC_CAVEAT.into(),
    })
}

/// Combines the largest measured h-norm with the smallest conditional constant.
pub fn assemble_lower_bound(
    mix: &MixingConditionReport,
    cond_alphas: &[MlsiEstimate],
    qf: &[QfReport],
) -> Result<AssembledBound> {
    let h_norm = mix.h_norms.iter().copied().fold(0.0, f64::max);
    if !mix.weaker_pass {
        return Err(Error::NoCertificate(h_norm));
    }
    let alphas: Vec<f64> = cond_alphas.iter().map(|e| e.alpha_hat).collect();
    let f_hats: Vec<f64> = qf.iter().map(|q| q.f_hat).collect();
    assemble_from(h_norm, &alphas, &f_hats)
}

/// Relative entropy below which trajectory quotients are not formed.
pub const TRAJECTORY_FLOOR: f64 = 1e-9;
/// Refinement of the time grid used for the trajectory quotient.
pub const TRAJECTORY_REFINE: usize = 8;
/// Relative slack of the decay check.
pub const DECAY_RELATIVE: f64 = 1e-6;
/// Absolute slack of the distance checks and the decay check.
pub const TRAJECTORY_ABSOLUTE: f64 = 1e-9;

/// State of the trajectory at one requested time.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TrajectoryRow {
    pub t: f64,
    /// `‖ρ_t − σ‖_1`.
    pub trace_distance: f64,
    pub relative_entropy: f64,
    /// `EP(ρ_t)/(2D(ρ_t‖σ))` when `D` exceeds the floor.
    pub quotient: Option<f64>,
    pub pinsker_ok: bool,
    pub decay_ok: bool,
    pub bound_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MixingTimeReport {
    pub rows: Vec<TrajectoryRow>,
    /// Smallest quotient on the refined grid; zero when every point is below the floor.
    pub alpha_traj: f64,
    /// `√(2 log‖σ^{-1}‖_∞)`.
    pub prefactor: f64,
    pub pinsker_pass: bool,
    pub decay_pass: bool,
    pub bound_pass: bool,
    pub pass: bool,
}

struct Sample {
    t: f64,
    distance: f64,
    relative: f64,
    quotient: Option<f64>,
}

fn sample(gen: &HeatBathGenerator<'_>, t: f64, rho: &DensityOperator) -> Sample {
    let relative = relative_entropy_prepared(rho, gen.state().prepared()).value;
    let quotient = (relative >= TRAJECTORY_FLOOR).then(|| gen.entropy_production(rho).value / (2.0 * relative));
    Sample {
        t,
        distance: trace_distance(rho, gen.state().sigma()),
        relative,
        quotient,
    }
}

/// Evolves `rho0` through `times` and checks Pinsker, self-consistent decay, and the mixing-time display.
pub fn mixing_time_check(
    gen: &HeatBathGenerator<'_>,
    rho0: &DensityOperator,
    times: &[f64],
) -> Result<MixingTimeReport> {
    if times.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(Error::NegativeTime(
            times.iter().copied().find(|t| !(*t >= 0.0)).unwrap_or(f64::NAN),
        ));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("times must be ascending".into()));
    }
    let mut requested = Vec::with_capacity(times.len());
    let mut alpha = f64::INFINITY;
    let mut rho = rho0.clone();
    let mut now = 0.0;
    let initial = sample(gen, 0.0, rho0);
    if let Some(q) = initial.quotient {
        alpha = alpha.min(q);
    }
    for &t in times {
        let span = t - now;
        for j in 1..=TRAJECTORY_REFINE {
            let next = now + span * j as f64 / TRAJECTORY_REFINE as f64;
            let prev = now + span * (j - 1) as f64 / TRAJECTORY_REFINE as f64;
            rho = evolve(gen, &rho, next - prev)?;
            if j < TRAJECTORY_REFINE {
                if let Some(q) = sample(gen, next, &rho).quotient {
                    alpha = alpha.min(q);
                }
            }
        }
        now = t;
        let s = if t == 0.0 {
            sample(gen, 0.0, rho0)
        } else {
            sample(gen, t, &rho)
        };
        if let Some(q) = s.quotient {
            alpha = alpha.min(q);
        }
        requested.push(s);
    }
    let alpha_traj = if alpha.is_finite() { alpha } else { 0.0 };
    let prefactor = Float::sqrt(2.0 * -Float::ln(gen.state().min_eigenvalue()));
    let rows: Vec<TrajectoryRow> = requested
        .iter()
        .map(|s| {
            let decay_bound = initial.relative * Float::exp(-2.0 * alpha_traj * s.t);
            TrajectoryRow {
                t: s.t,
                trace_distance: s.distance,
                relative_entropy: s.relative,
                quotient: s.quotient,
                pinsker_ok: s.distance <= Float::sqrt(2.0 * s.relative.max(0.0)) + TRAJECTORY_ABSOLUTE,
                decay_ok: s.relative <= decay_bound * (1.0 + DECAY_RELATIVE) + TRAJECTORY_ABSOLUTE,
                bound_ok: s.distance <= prefactor * Float::exp(-alpha_traj * s.t) + TRAJECTORY_ABSOLUTE,
            }
        })
        .collect();
    let pinsker_pass = rows.iter().all(|r| r.pinsker_ok);
    let decay_pass = rows.iter().all(|r| r.decay_ok);
    let bound_pass = rows.iter().all(|r| r.bound_ok);
    Ok(MixingTimeReport {
        rows,
        alpha_traj,
        prefactor,
        pinsker_pass,
        decay_pass,
        bound_pass,
        pass: pinsker_pass && decay_pass && bound_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::ensemble::sample_full_rank;
    use crate::dynamics::lindbladian;
    use crate::gibbs::gibbs_state;
    use crate::gibbs::presets::Preset;
    use crate::lattice::{make_chain, Region};
    use crate::linalg::{CMat, C64};

    #[test]
    fn assembly_arithmetic() {
        let b = assemble_from(0.0, &[0.5, 0.7], &[]).unwrap();
        assert_eq!((b.k_tilde, b.alpha_lower_certificate), (0.5, 0.25));
        assert!(b.rigorous.is_none());
        let b = assemble_from(0.25, &[0.8, 0.6], &[1.0, 2.0]).unwrap();
        assert!((b.k_tilde - 0.25).abs() < 1e-15 && (b.alpha_lower_certificate - 0.15).abs() < 1e-15);
        assert!((b.rigorous.unwrap() - 0.0625).abs() < 1e-15);
        assert!(matches!(assemble_from(0.5, &[1.0], &[]), Err(Error::NoCertificate(_))));
        assert!(assemble_from(0.1, &[], &[]).is_err());
    }

    fn bloch_state(x: f64, z: f64) -> DensityOperator {
        let m = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new((1.0 + z) / 2.0, 0.0),
                C64::new(x / 2.0, 0.0),
                C64::new(x / 2.0, 0.0),
                C64::new((1.0 - z) / 2.0, 0.0),
            ],
        );
        DensityOperator::from_matrix(Region::single(0), 2, m).unwrap()
    }

    #[test]
    fn single_site_trajectory_matches_closed_form() {
        // σ = 𝟙/2 and L*(ρ) = σ − ρ shrink the Bloch vector by e^{−t}
        let lat = make_chain(1, 2).unwrap();
        let g = gibbs_state(&Preset::ising(1.0, 0.5).build(lat).unwrap(), 0.0).unwrap();
        let gen = lindbladian(&g, &Region::single(0)).unwrap();
        let (x, z) = (0.6, -0.3);
        let r0 = (x * x + z * z).sqrt();
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.5).collect();
        let report = mixing_time_check(&gen, &bloch_state(x, z), &times).unwrap();
        for row in &report.rows {
            let r = r0 * (-row.t).exp();
            let (p, q) = ((1.0 + r) / 2.0, (1.0 - r) / 2.0);
            let d = 2f64.ln() + p * p.ln() + q * q.ln();
            assert!(
                (row.relative_entropy - d).abs() < 1e-6,
                "t={} {} vs {}",
                row.t,
                row.relative_entropy,
                d
            );
            assert!((row.trace_distance - r).abs() < 1e-6);
        }
        assert!(report.pass);
    }

    #[test]
    fn sigma_stays_put() {
        let lat = make_chain(3, 2).unwrap();
        let g = gibbs_state(&Preset::ising(1.0, 0.2).build(lat).unwrap(), 0.7).unwrap();
        let gen = lindbladian(&g, &lat.full_region()).unwrap();
        let report = mixing_time_check(&gen, g.sigma(), &[0.0, 1.0, 2.0]).unwrap();
        assert!(report
            .rows
            .iter()
            .all(|r| r.trace_distance < 1e-10 && r.quotient.is_none()));
        assert!(report.pass && report.alpha_traj == 0.0);
        assert!(mixing_time_check(&gen, g.sigma(), &[1.0, 0.5]).is_err());
        assert!(mixing_time_check(&gen, g.sigma(), &[-1.0]).is_err());
    }

    #[test]
    fn four_site_ising_trajectory_passes() {
        let lat = make_chain(4, 2).unwrap();
        let g = gibbs_state(&Preset::ising(1.0, 0.3).build(lat).unwrap(), 0.5).unwrap();
        let gen = lindbladian(&g, &lat.full_region()).unwrap();
        let rho0 = sample_full_rank(&lat, 1, 31).remove(0);
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let report = mixing_time_check(&gen, &rho0, &times).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.alpha_traj > 0.0);
        assert!(report
            .rows
            .windows(2)
            .all(|w| w[1].relative_entropy <= w[0].relative_entropy + 1e-12));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn certificate_is_monotone(
                h in 0.0f64..0.49,
                dh in 0.0f64..0.2,
                alphas in proptest::collection::vec(0.01f64..5.0, 1..6),
                bump in 0.0f64..1.0,
            ) {
                let base = assemble_from(h, &alphas, &[]).unwrap().alpha_lower_certificate;
                let lower_h = assemble_from((h - dh).max(0.0), &alphas, &[]).unwrap().alpha_lower_certificate;
                prop_assert!(lower_h >= base);
                let raised: Vec<f64> = alphas.iter().map(|a| a + bump).collect();
                prop_assert!(assemble_from(h, &raised, &[]).unwrap().alpha_lower_certificate >= base);
                prop_assert!(base > 0.0);
            }
        }
    }
}
