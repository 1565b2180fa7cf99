//! Sampled and locally optimized extremal quotients of entropic functionals.

use alloc::vec::Vec;

use num_traits::Float;

use super::ensemble::sample_state;
use crate::dynamics::{GeneratorKind, GeneratorOptions, HeatBathGenerator, Mode};
use crate::entropy::EPS_FLOOR;
use crate::error::{Error, Result};
use crate::gibbs::GibbsState;
use crate::lattice::Region;
use crate::linalg::{self, CMat, ZERO};
use crate::operator::{trace_distance, DensityOperator, Split};
use crate::superop::DEFAULT_DENSE_CAP;

/// States closer than this to `σ` in trace distance are never evaluated.
pub const SIGMA_EXCLUSION: f64 = 1e-10;
/// Quotients with a denominator below this are treated as `0/0`.
pub const DEGENERATE: f64 = 1e-10;

/// Sampling and descent budget.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    pub n_random: usize,
    pub optimizer_steps: usize,
    /// Number of best samples refined by descent.
    pub n_starts: usize,
    pub seed: u64,
    /// Extra starting points, evaluated before the random samples.
    pub initial_states: Vec<DensityOperator>,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            n_random: 60,
            optimizer_steps: 40,
            n_starts: 3,
            seed: 0,
            initial_states: Vec::new(),
        }
    }
}

/// `‖ρ − σ‖_1 < SIGMA_EXCLUSION`, skipping the spectrum when the Frobenius norm decides.
pub(crate) fn near_sigma(rho: &DensityOperator, sigma: &DensityOperator) -> bool {
    let diff = rho.matrix() - sigma.matrix();
    let f = linalg::frobenius(&diff);
    if f >= SIGMA_EXCLUSION {
        return false;
    }
    if f * Float::sqrt(rho.dim() as f64) < SIGMA_EXCLUSION {
        return true;
    }
    trace_distance(rho, sigma) < SIGMA_EXCLUSION
}

/// A state with its spectral data and logarithm.
pub(crate) struct Point {
    pub rho: DensityOperator,
    values: Vec<f64>,
    vectors: CMat,
    pub log: CMat,
}

impl Point {
    pub fn new(rho: DensityOperator) -> Self {
        let (values, vectors) = linalg::eigh(rho.matrix());
        let log = linalg::spectral_apply(&values, &vectors, |x| Float::ln(x.max(EPS_FLOOR)));
        Self {
            rho,
            values,
            vectors,
            log,
        }
    }

    /// Fréchet derivative `D log_ρ[X]` through divided differences.
    pub fn dlog(&self, x: &CMat) -> CMat {
        let v = &self.vectors;
        let mut y = v.adjoint() * x * v;
        let n = self.values.len();
        for j in 0..n {
            for i in 0..n {
                let (a, b) = (self.values[i].max(EPS_FLOOR), self.values[j].max(EPS_FLOOR));
                let g = if (a - b).abs() <= 1e-12 * a.max(b) {
                    2.0 / (a + b)
                } else {
                    (Float::ln(a) - Float::ln(b)) / (a - b)
                };
                y[(i, j)] *= g;
            }
        }
        v * y * v.adjoint()
    }
}

/// Value and, on request, `ρ`-gradient of `D_X(ρ‖σ)`; `X` equal to the chain gives `D(ρ‖σ)`.
pub(crate) fn conditional_with_gradient(
    sigma: &GibbsState,
    p: &Point,
    x: &Region,
    need_grad: bool,
) -> Result<(f64, Option<CMat>)> {
    let full = sigma.lattice().full_region();
    let diff = &p.log - sigma.prepared().log();
    let mut value = linalg::trace_product(p.rho.matrix(), &diff).re;
    let mut grad = need_grad.then_some(diff);
    let rest = full.difference(x);
    if !rest.is_empty() {
        let r = p.rho.reduce(&rest)?;
        let marginal = sigma.marginal(&rest)?;
        let (vals, vecs) = linalg::eigh(r.matrix());
        let log_r = linalg::spectral_apply(&vals, &vecs, |v| Float::ln(v.max(EPS_FLOOR)));
        let local = log_r - marginal.log();
        value -= linalg::trace_product(r.matrix(), &local).re;
        if let Some(g) = grad.as_mut() {
            *g -= Split::new(&full, &rest, sigma.lattice().local_dim()).embed(&local);
        }
    }
    Ok((value, grad))
}

/// Value and, on request, `ρ`-gradient of `EP(ρ) = −tr[L*(ρ)(log ρ − log σ)]`.
pub(crate) fn ep_with_gradient(gen: &HeatBathGenerator<'_>, p: &Point, need_grad: bool) -> (f64, Option<CMat>) {
    let diff = &p.log - gen.state().prepared().log();
    let l_rho = gen.apply(p.rho.matrix());
    let value = -linalg::trace_product(&l_rho, &diff).re;
    let grad = need_grad.then(|| linalg::hermitian_part(&-(gen.apply_dual(&diff) + p.dlog(&l_rho))));
    (value, grad)
}

/// Outcome of one quotient evaluation.
pub(crate) enum Eval {
    /// The gradient is present only when it was requested.
    Valid {
        value: f64,
        grad: Option<CMat>,
    },
    Degenerate,
}

/// Result of a sampled search for the smallest objective value.
pub(crate) struct Search {
    pub best_value: f64,
    pub best_state: DensityOperator,
    pub n_samples: usize,
    pub n_excluded: usize,
    pub trace: Vec<(usize, f64)>,
}

/// `ρ = MM†/tr[MM†]`.
fn state_of(support: &Region, d: usize, m: &CMat) -> DensityOperator {
    DensityOperator::normalized(support.clone(), d, m * m.adjoint())
}

/// Minimizes `objective` over states: seeded ensemble samples, then Armijo descent in `M`.
pub(crate) fn search(
    sigma: &GibbsState,
    opts: &EstimateOptions,
    objective: &dyn Fn(&Point, bool) -> Result<Eval>,
) -> Result<Search> {
    let lattice = *sigma.lattice();
    let (full, d) = (lattice.full_region(), lattice.local_dim());
    let mut pool: Vec<(f64, DensityOperator)> = Vec::new();
    let mut n_samples = 0;
    let mut n_excluded = 0;
    let candidates = opts
        .initial_states
        .iter()
        .cloned()
        .chain((0..opts.n_random).map(|i| sample_state(&lattice, sigma.sigma(), opts.seed, i)));
    for rho in candidates {
        n_samples += 1;
        if near_sigma(&rho, sigma.sigma()) {
            n_excluded += 1;
            continue;
        }
        match objective(&Point::new(rho.clone()), false)? {
            Eval::Valid { value, .. } => pool.push((value, rho)),
            Eval::Degenerate => n_excluded += 1,
        }
    }
    if pool.is_empty() {
        return Err(Error::AllDegenerate);
    }
    // stable order keeps the result independent of evaluation scheduling
    pool.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = pool[0].clone();
    let mut trace = alloc::vec![(0, best.0)];
    let mut iteration = 0;
    for (start_value, start) in pool.iter().take(opts.n_starts.max(1)) {
        let (vals, vecs) = linalg::eigh(start.matrix());
        let mut m = linalg::spectral_apply(&vals, &vecs, |x| Float::sqrt(x.max(0.0)));
        let mut value = *start_value;
        let mut step = 1.0;
        for _ in 0..opts.optimizer_steps {
            let point = Point::new(state_of(&full, d, &m));
            let grad = match objective(&point, true)? {
                Eval::Valid { grad: Some(grad), .. } => grad,
                _ => break,
            };
            let norm = linalg::trace(&(&m * m.adjoint())).re;
            let shift = linalg::trace_product(&grad, point.rho.matrix()).re;
            let g_m = (&grad * &m - m.scale(shift)).scale(2.0 / norm);
            let g2 = linalg::frobenius(&g_m).powi(2);
            if !(g2 > 1e-30) {
                break;
            }
            let scale = Float::sqrt(norm);
            let mut accepted = false;
            step = (step * 4.0).min(1.0);
            for _ in 0..40 {
                let trial_m = &m - g_m.scale(step * scale);
                let trial = state_of(&full, d, &trial_m);
                if !near_sigma(&trial, sigma.sigma()) {
                    if let Eval::Valid { value: v, .. } = objective(&Point::new(trial.clone()), false)? {
                        if v <= value - 1e-4 * step * scale * g2 {
                            m = trial_m;
                            value = v;
                            accepted = true;
                            break;
                        }
                    }
                }
                step *= 0.5;
            }
            iteration += 1;
            if !accepted {
                break;
            }
            if value < best.0 {
                best = (value, state_of(&full, d, &m));
            }
            trace.push((iteration, best.0));
        }
    }
    // report the value recomputed at the stored state
    let best_value = match objective(&Point::new(best.1.clone()), false)? {
        Eval::Valid { value, .. } => value,
        Eval::Degenerate => best.0,
    };
    Ok(Search {
        best_value,
        best_state: best.1,
        n_samples,
        n_excluded,
        trace,
    })
}

/// Estimate of an MLSI-type infimum; an upper bound on the true constant.
#[derive(Debug, Clone, PartialEq)]
pub struct MlsiEstimate {
    pub alpha_hat: f64,
    pub argmin_state: DensityOperator,
    pub n_samples: usize,
    pub n_excluded: usize,
    /// `(iteration, best quotient so far)`.
    pub optimizer_trace: Vec<(usize, f64)>,
    pub seed: u64,
    /// Region of the conditional constant; `None` for the full generator.
    pub region: Option<Region>,
}

impl MlsiEstimate {
    pub const BOUND_KIND: &'static str = "inf upper bound";
}

fn quotient_objective<'a>(
    gen: &'a HeatBathGenerator<'a>,
    region: Option<&'a Region>,
) -> impl Fn(&Point, bool) -> Result<Eval> + 'a {
    let sigma = gen.state();
    let full = sigma.lattice().full_region();
    move |p: &Point, need_grad: bool| {
        let x = region.unwrap_or(&full);
        let (d, d_grad) = conditional_with_gradient(sigma, p, x, need_grad)?;
        if !(d >= DEGENERATE) {
            return Ok(Eval::Degenerate);
        }
        let (ep, ep_grad) = ep_with_gradient(gen, p, need_grad);
        let q = ep / (2.0 * d);
        let grad = ep_grad
            .zip(d_grad)
            .map(|(e, g)| (e - g.scale(2.0 * q)).scale(1.0 / (2.0 * d)));
        Ok(Eval::Valid { value: q, grad })
    }
}

/// `EP(ρ)/(2D(ρ‖σ))` for the generator's region, `None` at degenerate points.
pub fn mlsi_quotient(gen: &HeatBathGenerator<'_>, rho: &DensityOperator) -> Result<Option<f64>> {
    quotient(gen, None, rho)
}

/// `EP_A(ρ)/(2D_A(ρ‖σ))`, `None` at degenerate points.
pub fn conditional_quotient(gen: &HeatBathGenerator<'_>, rho: &DensityOperator) -> Result<Option<f64>> {
    let a = gen.region().clone();
    quotient(gen, Some(&a), rho)
}

fn quotient(gen: &HeatBathGenerator<'_>, region: Option<&Region>, rho: &DensityOperator) -> Result<Option<f64>> {
    let sigma = gen.state();
    let p = Point::new(rho.clone());
    let x = region.cloned().unwrap_or_else(|| sigma.lattice().full_region());
    let (d, _) = conditional_with_gradient(sigma, &p, &x, false)?;
    if !(d >= DEGENERATE) || near_sigma(rho, sigma.sigma()) {
        return Ok(None);
    }
    let (ep, _) = ep_with_gradient(gen, &p, false);
    Ok(Some(ep / (2.0 * d)))
}

/// `α̂ = min EP(ρ)/(2D(ρ‖σ))` over sampled and optimized full-rank states.
pub fn mlsi_estimate(gen: &HeatBathGenerator<'_>, opts: &EstimateOptions) -> Result<MlsiEstimate> {
    let objective = quotient_objective(gen, None);
    let s = search(gen.state(), opts, &objective)?;
    Ok(MlsiEstimate {
        alpha_hat: s.best_value,
        argmin_state: s.best_state,
        n_samples: s.n_samples,
        n_excluded: s.n_excluded,
        optimizer_trace: s.trace,
        seed: opts.seed,
        region: None,
    })
}

/// `α̂_Λ(L*_A) = min EP_A(ρ)/(2D_A(ρ‖σ))`, excluding states with `D_A < 1e-10`.
pub fn conditional_mlsi_estimate(sigma: &GibbsState, a: &Region, opts: &EstimateOptions) -> Result<MlsiEstimate> {
    if a.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let gen = HeatBathGenerator::new(
        sigma,
        a,
        GeneratorKind::Sum,
        GeneratorOptions {
            mode: Mode::MatrixFree,
            dense_cap: DEFAULT_DENSE_CAP,
        },
    )?;
    let objective = quotient_objective(&gen, Some(a));
    let s = search(sigma, opts, &objective)?;
    Ok(MlsiEstimate {
        alpha_hat: s.best_value,
        argmin_state: s.best_state,
        n_samples: s.n_samples,
        n_excluded: s.n_excluded,
        optimizer_trace: s.trace,
        seed: opts.seed,
        region: Some(a.clone()),
    })
}

/// Largest sampled `D_X / Σ_{x∈X} D_x`; a lower bound on the true supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct QfReport {
    pub region: Region,
    pub f_hat: f64,
    pub witness_state: DensityOperator,
    /// Samples whose denominator fell below the degeneracy threshold.
    pub degenerate_count: usize,
    pub n_samples: usize,
    pub optimizer_trace: Vec<(usize, f64)>,
    pub seed: u64,
}

impl QfReport {
    pub const BOUND_KIND: &'static str = "sup lower bound";
}

/// `D_X(ρ‖σ) / Σ_{x∈X} D_x(ρ‖σ)`, `None` when the denominator is degenerate.
pub fn qf_ratio(sigma: &GibbsState, x: &Region, rho: &DensityOperator) -> Result<Option<f64>> {
    let p = Point::new(rho.clone());
    match qf_eval(sigma, x, &p, false)? {
        Eval::Valid { value, .. } => Ok(Some(-value)),
        Eval::Degenerate => Ok(None),
    }
}

/// Negated ratio with its gradient, for minimization.
fn qf_eval(sigma: &GibbsState, x: &Region, p: &Point, need_grad: bool) -> Result<Eval> {
    let (num, num_grad) = conditional_with_gradient(sigma, p, x, need_grad)?;
    let mut den = 0.0;
    let mut den_grad = need_grad.then(|| CMat::from_element(p.rho.dim(), p.rho.dim(), ZERO));
    for site in x.iter() {
        let (v, g) = conditional_with_gradient(sigma, p, &Region::single(site), need_grad)?;
        den += v;
        if let (Some(acc), Some(g)) = (den_grad.as_mut(), g) {
            *acc += g;
        }
    }
    if !(den >= DEGENERATE) {
        return Ok(Eval::Degenerate);
    }
    let f = num / den;
    let grad = num_grad.zip(den_grad).map(|(n, g)| (n - g.scale(f)).scale(-1.0 / den));
    Ok(Eval::Valid { value: -f, grad })
}

pub fn qf_constant_estimate(sigma: &GibbsState, x: &Region, opts: &EstimateOptions) -> Result<QfReport> {
    if x.is_empty() {
        return Err(Error::EmptyRegion);
    }
    sigma.lattice().check_region(x)?;
    let objective = |p: &Point, need_grad: bool| qf_eval(sigma, x, p, need_grad);
    let s = search(sigma, opts, &objective)?;
    Ok(QfReport {
        region: x.clone(),
        f_hat: -s.best_value,
        witness_state: s.best_state,
        degenerate_count: s.n_excluded,
        n_samples: s.n_samples,
        optimizer_trace: s.trace.into_iter().map(|(i, v)| (i, -v)).collect(),
        seed: opts.seed,
    })
}
