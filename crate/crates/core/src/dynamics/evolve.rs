//! Time evolution `ρ ↦ e^{tL*}(ρ)`.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use super::HeatBathGenerator;
use crate::error::{Error, Result};
use crate::gibbs::GibbsState;
use crate::linalg::{self, CMat, C64, ZERO};
use crate::operator::DensityOperator;
use crate::superop::kraus_matrix;
use crate::tol::Tolerances;

/// Largest symmetrized block that is diagonalized exactly.
const MAX_BLOCK: usize = 2048;

#[derive(Debug, Clone)]
struct Block {
    indices: Vec<usize>,
    values: Vec<f64>,
    vectors: CMat,
}

/// Exact semigroup of a detailed-balance generator.
///
/// In the eigenbasis of `σ` the generator is similar to a Hermitian matrix
/// through the diagonal weights `(p_i p_j)^{1/4}`; that matrix splits into
/// independent blocks which are diagonalized once.
#[derive(Debug, Clone)]
pub struct Propagator {
    basis: CMat,
    dim: usize,
    weights: Vec<f64>,
    blocks: Vec<Block>,
}

impl Propagator {
    pub(crate) fn build(state: &GibbsState, kraus: &[CMat], n_parts: usize) -> Option<Self> {
        let spectral = state.sigma().as_operator().spectral();
        let p = &spectral.eigenvalues;
        if p.iter().any(|&x| !(x > 1e-280)) {
            return None;
        }
        let v = &spectral.eigenvectors;
        let dim = p.len();
        let n = dim * dim;
        let rotated: Vec<CMat> = kraus.iter().map(|k| v.adjoint() * k * v).collect();
        let mut l = if rotated.is_empty() {
            CMat::zeros(n, n)
        } else {
            kraus_matrix(&rotated)
        };
        for i in 0..n {
            l[(i, i)] -= C64::new(n_parts as f64, 0.0);
        }
        let weights: Vec<f64> = (0..n)
            .map(|idx| Float::powf(p[idx % dim] * p[idx / dim], 0.25))
            .collect();
        let sym = CMat::from_fn(n, n, |r, c| l[(r, c)] * (weights[c] / weights[r]));
        let sym = linalg::hermitian_part(&sym);
        let scale = linalg::max_abs(&sym);
        let groups = components(&sym, 1e-14 * scale);
        if groups.iter().any(|g| g.len() > MAX_BLOCK) {
            return None;
        }
        let blocks = groups
            .into_iter()
            .map(|indices| {
                let sub = CMat::from_fn(indices.len(), indices.len(), |r, c| sym[(indices[r], indices[c])]);
                let (values, vectors) = linalg::eigh(&sub);
                Block {
                    indices,
                    values,
                    vectors,
                }
            })
            .collect();
        Some(Self {
            basis: v.clone(),
            dim,
            weights,
            blocks,
        })
    }

    /// Eigenvalues of the generator, ascending.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.blocks.iter().flat_map(|b| b.values.iter().copied()).collect();
        all.sort_by(f64::total_cmp);
        all
    }

    /// Smallest nonzero `−λ` above `zero`.
    pub fn spectral_gap(&self, zero: f64) -> Option<f64> {
        self.spectrum()
            .into_iter()
            .map(|x| -x)
            .filter(|&x| x > zero)
            .reduce(f64::min)
    }

    /// `e^{tL*}(x)`; any real `t`.
    pub fn apply(&self, x: &CMat, t: f64) -> CMat {
        let rotated = self.basis.adjoint() * x * &self.basis;
        let mut out = CMat::zeros(self.dim, self.dim);
        for b in &self.blocks {
            let y: Vec<C64> = b
                .indices
                .iter()
                .map(|&i| rotated[(i % self.dim, i / self.dim)] / self.weights[i])
                .collect();
            let m = b.indices.len();
            let mut coeff = alloc::vec![ZERO; m];
            for (j, c) in coeff.iter_mut().enumerate() {
                let mut acc = ZERO;
                for (r, yr) in y.iter().enumerate() {
                    acc += b.vectors[(r, j)].conj() * yr;
                }
                *c = acc * Float::exp(t * b.values[j]);
            }
            for (r, &i) in b.indices.iter().enumerate() {
                let mut acc = ZERO;
                for (j, cj) in coeff.iter().enumerate() {
                    acc += b.vectors[(r, j)] * cj;
                }
                out[(i % self.dim, i / self.dim)] = acc * self.weights[i];
            }
        }
        &self.basis * out * self.basis.adjoint()
    }
}

/// Connected components of the graph with edges where `|m_ij| > threshold`.
fn components(m: &CMat, threshold: f64) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for c in 0..n {
        for r in 0..c {
            if m[(r, c)].norm() > threshold {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut root_index = alloc::vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_index[r] == usize::MAX {
            root_index[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_index[r]].push(i);
    }
    groups
}

/// `e^{tL*}(ρ)` for `t ≥ 0`.
pub fn evolve(gen: &HeatBathGenerator<'_>, rho: &DensityOperator, t: f64) -> Result<DensityOperator> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::NegativeTime(t));
    }
    if rho.dim() != gen.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), gen.dim()));
    }
    let out = evolve_signed(gen, rho.matrix(), t)?;
    let min = linalg::eigvalsh(&out)[0];
    if min < -Tolerances::default().evolve_psd {
        return Err(Error::Integrator(format!("state lost positivity: λ_min = {min:e}")));
    }
    Ok(DensityOperator::normalized(rho.support().clone(), rho.local_dim(), out))
}

/// `e^{tL*}(x)` for any sign of `t`; negative times need the exact propagator or a short step.
pub(crate) fn evolve_signed(gen: &HeatBathGenerator<'_>, x: &CMat, t: f64) -> Result<CMat> {
    if t == 0.0 {
        return Ok(x.clone());
    }
    if let Some(p) = gen.propagator() {
        return Ok(linalg::hermitian_part(&p.apply(x, t)));
    }
    dormand_prince(|y| gen.apply(y), x, t, 1e-13, 1e-10)
}

const A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const ERR: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const MAX_STEPS: usize = 1_000_000;

/// Adaptive Dormand–Prince 5(4) for the autonomous ODE `y' = f(y)`, hermitizing after every step.
fn dormand_prince(f: impl Fn(&CMat) -> CMat, y0: &CMat, t: f64, atol: f64, rtol: f64) -> Result<CMat> {
    let dir = t.signum();
    let total = t.abs();
    let mut y = y0.clone();
    let mut k1 = f(&y);
    let rate = linalg::frobenius(&k1);
    let mut h = if rate > 0.0 { total.min(1e-2 / rate) } else { total };
    let mut elapsed = 0.0;
    let mut steps = 0;
    while elapsed < total {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::Integrator(format!("step limit reached at t = {elapsed:e}")));
        }
        h = h.min(total - elapsed);
        let hs = dir * h;
        let mut ks: Vec<CMat> = Vec::with_capacity(7);
        ks.push(k1.clone());
        for (stage, row) in A.iter().enumerate() {
            let mut arg = y.clone();
            for (j, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    arg += ks[j].scale(hs * a);
                }
            }
            if stage == 5 {
                // the last row is the fifth-order solution
                let y_new = linalg::hermitian_part(&arg);
                let k7 = f(&y_new);
                ks.push(k7);
                let mut err = CMat::zeros(y.nrows(), y.ncols());
                for (j, &e) in ERR.iter().enumerate() {
                    if e != 0.0 {
                        err += ks[j].scale(hs * e);
                    }
                }
                let mut ratio: f64 = 0.0;
                for ((e, a), b) in err.iter().zip(y.iter()).zip(y_new.iter()) {
                    let scale = atol + rtol * a.norm().max(b.norm());
                    ratio = ratio.max(e.norm() / scale);
                }
                if !ratio.is_finite() {
                    return Err(Error::Integrator("non-finite error estimate".into()));
                }
                if ratio <= 1.0 {
                    elapsed += h;
                    y = y_new;
                    k1 = ks.pop().expect("seven stages");
                }
                let factor = if ratio == 0.0 {
                    5.0
                } else {
                    0.9 * Float::powf(ratio, -0.2)
                };
                h *= factor.clamp(0.2, 5.0);
                if h < total * 1e-15 {
                    return Err(Error::Integrator(format!("step size underflow at t = {elapsed:e}")));
                }
            } else {
                ks.push(f(&arg));
            }
        }
    }
    Ok(y)
}
