use super::*;
use crate::entropy::relative_entropy;
use crate::gibbs::presets::Preset;
use crate::gibbs::{gibbs_state, gibbs_state_tainted};
use crate::lattice::make_chain;
use crate::linalg::max_abs;
use crate::sampling::{random_density, random_full_rank, random_hermitian, random_pure};
use crate::superop::{dense_agreement, vectorize};

fn state(preset: Preset, n: usize, beta: f64) -> GibbsState {
    let lat = make_chain(n, 2).unwrap();
    gibbs_state(&preset.build(lat).unwrap(), beta).unwrap()
}

fn tfi(n: usize, beta: f64) -> GibbsState {
    let lat = make_chain(n, 2).unwrap();
    gibbs_state_tainted(&Preset::TransverseIsing { j: 1.0, g: 0.7 }.build(lat).unwrap(), beta).unwrap()
}

#[test]
fn expectation_fixes_sigma_and_preserves_trace() {
    for g in [
        state(Preset::ClusterZxz { j: 1.0 }, 3, 0.6),
        state(Preset::ising(1.0, 0.3), 3, 0.8),
        tfi(3, 0.5),
    ] {
        let full = g.lattice().full_region();
        for region in [Region::single(1), Region::from([0, 2]), full.clone()] {
            let e = HeatBathExpectation::new(&g, &region).unwrap();
            assert!(max_abs(&(e.apply(g.sigma().matrix()) - g.sigma().matrix())) < 1e-12);
            let mut rng = stream_rng(40, 0);
            let rho = random_density(&mut rng, full.clone(), 2);
            let out = e.apply(rho.matrix());
            assert!((linalg::trace(&out).re - 1.0).abs() < 1e-12);
            assert!(linalg::eigvalsh(&out)[0] > -1e-12);
            // dual is unital
            let one = linalg::identity(8);
            assert!(max_abs(&(e.apply_dual(&one) - &one)) < 1e-12);
        }
    }
}

#[test]
fn full_region_replaces_state_by_sigma() {
    let g = tfi(2, 0.9);
    let mut rng = stream_rng(41, 0);
    let rho = random_pure(&mut rng, g.lattice().full_region(), 2);
    let out = heat_bath_expectation(&g, &g.lattice().full_region(), &rho).unwrap();
    assert!(max_abs(&(out.matrix() - g.sigma().matrix())) < 1e-12);
}

#[test]
fn duality_and_kraus_form() {
    let g = tfi(3, 0.7);
    let full = g.lattice().full_region();
    let mut rng = stream_rng(42, 0);
    for region in [Region::single(0), Region::from([1, 2])] {
        let e = HeatBathExpectation::new(&g, &region).unwrap();
        let rho = random_density(&mut rng, full.clone(), 2);
        let f = random_hermitian(&mut rng, full.clone(), 2);
        let lhs = linalg::trace_product(f.matrix(), &e.apply(rho.matrix()));
        let rhs = linalg::trace_product(&e.apply_dual(f.matrix()), rho.matrix());
        assert!((lhs - rhs).norm() < 1e-12);

        let kraus = e.kraus();
        let mut completeness = CMat::zeros(8, 8);
        for k in &kraus {
            completeness += k.adjoint() * k;
        }
        assert!(max_abs(&(completeness - linalg::identity(8))) < 1e-12);
        let map = crate::superop::FnSuperoperator::new(8, |x: &CMat| e.apply(x));
        let dense = kraus_matrix(&kraus);
        let probes: Vec<CMat> = (0..4).map(|_| crate::sampling::ginibre(&mut rng, 8, 8)).collect();
        assert!(dense_agreement(&map, &dense, &probes) < 1e-12);
    }
}

#[test]
fn classical_expectation_is_idempotent() {
    let g = state(Preset::classical(5), 4, 1.0);
    let e = HeatBathExpectation::new(&g, &Region::from([1, 2])).unwrap();
    let mut rng = stream_rng(43, 0);
    let rho = random_density(&mut rng, g.lattice().full_region(), 2);
    let classical = CMat::from_fn(16, 16, |i, j| if i == j { rho.matrix()[(i, i)] } else { linalg::ZERO });
    let once = e.apply(&classical);
    assert!(max_abs(&(e.apply(&once) - &once)) < 1e-13);
    // coherences between configurations of A^c are damped further on a second pass
    let once = e.apply(rho.matrix());
    assert!(max_abs(&(e.apply(&once) - &once)) > 1e-6);
}

#[test]
fn generator_dense_matches_functional() {
    let g = tfi(3, 0.6);
    let a = Region::from([0, 1]);
    for kind in [GeneratorKind::Sum, GeneratorKind::Block] {
        let gen = HeatBathGenerator::new(&g, &a, kind, GeneratorOptions::default()).unwrap();
        assert!(gen.is_dense());
        let dense = gen.dense_matrix().unwrap();
        let probe = vectorize(&gen, DEFAULT_DENSE_CAP).unwrap();
        assert!(max_abs(&(dense - probe)) < 1e-12);
        assert!(max_abs(&gen.apply(g.sigma().matrix())) < 1e-12);
    }
    let big = state(Preset::ising(1.0, 0.0), 7, 0.5);
    let opts = GeneratorOptions {
        mode: Mode::Dense,
        dense_cap: DEFAULT_DENSE_CAP,
    };
    assert!(matches!(
        HeatBathGenerator::new(&big, &Region::single(0), GeneratorKind::Sum, opts),
        Err(Error::DimensionCap { dim: 16384, cap: 4096 })
    ));
    let auto = lindbladian(&big, &Region::single(0)).unwrap();
    assert!(!auto.is_dense() && auto.propagator().is_none());
}

#[test]
fn empty_region_generates_nothing() {
    let g = state(Preset::ising(1.0, 0.2), 2, 0.5);
    let gen = lindbladian(&g, &Region::empty()).unwrap();
    let mut rng = stream_rng(44, 0);
    let rho = random_density(&mut rng, g.lattice().full_region(), 2);
    assert_eq!(max_abs(&gen.apply(rho.matrix())), 0.0);
    let out = evolve(&gen, &rho, 3.0).unwrap();
    assert!(max_abs(&(out.matrix() - rho.matrix())) < 1e-14);
}

#[test]
fn propagator_matches_integrator() {
    for g in [tfi(3, 0.8), state(Preset::ClusterZxz { j: 1.0 }, 3, 0.7)] {
        let a = Region::from([0, 1, 2]);
        let gen = lindbladian(&g, &a).unwrap();
        let free = HeatBathGenerator::new(
            &g,
            &a,
            GeneratorKind::Sum,
            GeneratorOptions {
                mode: Mode::MatrixFree,
                dense_cap: DEFAULT_DENSE_CAP,
            },
        )
        .unwrap();
        let mut rng = stream_rng(45, 0);
        let rho = random_density(&mut rng, g.lattice().full_region(), 2);
        for t in [0.05, 0.7, 3.0] {
            let exact = evolve(&gen, &rho, t).unwrap();
            let rk = evolve(&free, &rho, t).unwrap();
            assert!(max_abs(&(exact.matrix() - rk.matrix())) < 1e-8, "t = {t}");
        }
        let p = gen.propagator().unwrap();
        let spec = p.spectrum();
        assert!(spec.iter().all(|&x| x < 1e-10));
        assert!(spec.iter().any(|&x| x.abs() < 1e-10));
        // semigroup and time reversal
        let half = p.apply(rho.matrix(), 0.4);
        assert!(max_abs(&(p.apply(&half, 0.4) - p.apply(rho.matrix(), 0.8))) < 1e-11);
        assert!(max_abs(&(p.apply(&half, -0.4) - rho.matrix())) < 1e-9);
        let late = evolve(&gen, &rho, 200.0).unwrap();
        assert!(trace_distance(&late, g.sigma()) < 1e-8);
    }
}

#[test]
fn negative_time_is_rejected() {
    let g = state(Preset::ising(1.0, 0.0), 2, 0.5);
    let gen = lindbladian(&g, &Region::single(0)).unwrap();
    assert_eq!(evolve(&gen, g.sigma(), -1.0), Err(Error::NegativeTime(-1.0)));
    assert!(evolve(&gen, g.sigma(), f64::NAN).is_err());
}

#[test]
fn single_qubit_entropy_production_closed_form() {
    // on one site E*(ρ) = σ, so EP(ρ) = D(ρ‖σ) + D(σ‖ρ)
    let lat = make_chain(1, 2).unwrap();
    let pot = Preset::ising(1.0, 0.8).build(lat).unwrap();
    let g = gibbs_state(&pot, 1.1).unwrap();
    let mut rng = stream_rng(46, 0);
    for _ in 0..10 {
        let rho = random_full_rank(&mut rng, Region::single(0), 2, 1e-3);
        let ep = entropy_production(&g, &Region::single(0), &rho).unwrap().value;
        let oracle =
            relative_entropy(&rho, g.sigma()).unwrap().value + relative_entropy(g.sigma(), &rho).unwrap().value;
        assert!((ep - oracle).abs() < 1e-12);
    }
}

#[test]
fn entropy_production_is_relative_entropy_derivative() {
    let g = tfi(3, 0.6);
    let a = Region::from([0, 2]);
    let gen = lindbladian(&g, &a).unwrap();
    let mut rng = stream_rng(47, 0);
    let rho = random_full_rank(&mut rng, g.lattice().full_region(), 2, 1e-2);
    let ep = gen.entropy_production(&rho).value;
    assert!(ep > 0.0);
    let h = 1e-4;
    let at = |t: f64| {
        let m = evolve_signed(&gen, rho.matrix(), t).unwrap();
        let r = DensityOperator::normalized(rho.support().clone(), 2, m);
        relative_entropy(&r, g.sigma()).unwrap().value
    };
    let derivative = (at(h) - at(-h)) / (2.0 * h);
    assert!((ep + derivative).abs() < 1e-7, "ep = {ep}, d/dt = {derivative}");
    assert!(gen.entropy_production(g.sigma()).value.abs() < 1e-12);
}

#[test]
fn pure_state_entropy_production_is_clamped() {
    let g = state(Preset::ising(1.0, 0.2), 2, 0.5);
    let mut rng = stream_rng(48, 0);
    let rho = random_pure(&mut rng, g.lattice().full_region(), 2);
    let ep = entropy_production(&g, &Region::single(0), &rho).unwrap();
    assert!(ep.clamped && ep.value.is_finite() && ep.value > 0.0);
}

#[test]
fn detailed_balance_holds_for_all_presets() {
    for g in [
        state(Preset::classical(1), 3, 1.0),
        state(Preset::ClusterZxz { j: 1.0 }, 3, 0.5),
        tfi(3, 0.9),
    ] {
        let r = check_detailed_balance(&g, &Region::from([0, 1]), 5, 7).unwrap();
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn dirichlet_form_properties() {
    let g = tfi(3, 0.5);
    let full = g.lattice().full_region();
    let one = HermitianOperator::identity(full.clone(), 2);
    assert!(dirichlet_form(&g, &Region::single(1), &one).unwrap().abs() < 1e-12);
    let mut rng = stream_rng(49, 0);
    let f = random_hermitian(&mut rng, full, 2);
    assert!(dirichlet_form(&g, &Region::single(1), &f).unwrap() > 0.0);
    let big = dirichlet_form(&g, &Region::from([0, 1]), &f).unwrap();
    let small = dirichlet_form(&g, &Region::single(1), &f).unwrap();
    assert!(big >= small - 1e-12);
}

#[test]
fn fixed_point_equivalence_on_sigma_and_samples() {
    let g = state(Preset::ClusterZxz { j: 1.0 }, 4, 0.8);
    let full = g.lattice().full_region();
    let mut rng = stream_rng(50, 0);
    let mut states: Vec<DensityOperator> = (0..4).map(|_| random_density(&mut rng, full.clone(), 2)).collect();
    let a = Region::from([1, 2]);
    // a fixed point of E*_A built from a random state
    let e = HeatBathExpectation::new(&g, &a).unwrap();
    let base = random_density(&mut rng, full.clone(), 2);
    states.push(DensityOperator::normalized(full.clone(), 2, e.apply(base.matrix())));
    states.push(g.sigma().clone());
    let r = fixed_point_equivalence_check(&g, &a, &states).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.sigma_row.delta_block < 1e-12);
    assert!(r.eta.is_some());
    assert_eq!(r.rows.len(), states.len());
    assert!(r.rows[0].delta_block > 1e-3);
}

#[test]
fn dirichlet_ratio_is_bounded_away_from_zero() {
    let g = state(Preset::classical(2), 4, 0.8);
    let r = dirichlet_ratio_bounds(&g, &Region::from([1, 2]), 30, 3).unwrap();
    assert!(r.kernel_consistent);
    assert!(r.c_min > 0.0 && r.c_min <= r.c_max);
    assert_eq!(r.n_used + r.n_excluded, 32);
    assert!(r.n_excluded >= 1);
}

#[test]
fn generator_decomposition_identity() {
    let g = tfi(4, 0.7);
    let (a, b) = (Region::from([0, 1, 2]), Region::from([1, 2, 3]));
    let gen = |r: &Region| lindbladian(&g, r).unwrap();
    let mut rng = stream_rng(51, 0);
    for _ in 0..3 {
        let rho = random_density(&mut rng, g.lattice().full_region(), 2);
        let x = rho.matrix();
        let lhs = gen(&a).apply(x) + gen(&b).apply(x);
        let rhs = gen(&a.union(&b)).apply(x) + gen(&a.intersection(&b)).apply(x);
        assert!(max_abs(&(lhs - rhs)) < 1e-12);
    }
}

#[test]
fn single_site_block_matches_sum() {
    let g = tfi(3, 0.4);
    let a = Region::single(2);
    let mut rng = stream_rng(52, 0);
    let rho = random_density(&mut rng, g.lattice().full_region(), 2);
    let sum = lindbladian(&g, &a).unwrap().apply(rho.matrix());
    let block = single_block_generator(&g, &a).unwrap().apply(rho.matrix());
    assert!(max_abs(&(sum - block)) < 1e-14);
}

#[test]
fn site_entropy_production_dominates_conditional_entropy() {
    let mut rng = stream_rng(53, 0);
    for beta in [0.0, 0.2, 0.5, 1.0] {
        for g in [
            tfi(3, beta),
            state(Preset::ClusterZxz { j: 1.0 }, 3, beta),
            state(Preset::classical(9), 3, beta),
        ] {
            for x in 0..3 {
                let a = Region::single(x);
                let rho = random_full_rank(&mut rng, g.lattice().full_region(), 2, 1e-6);
                let ep = entropy_production(&g, &a, &rho).unwrap().value;
                let dx = crate::entropy::conditional_relative_entropy(&rho, g.sigma(), &a)
                    .unwrap()
                    .value;
                assert!(ep - dx >= -1e-9, "β = {beta}, x = {x}: {ep} < {dx}");
            }
        }
    }
}

#[test]
fn single_site_product_closed_form() {
    // for a product σ, E*_x(ρ) = σ_x ⊗ ρ_{x^c}, so ρ_t = e^{−t}ρ_0 + (1 − e^{−t}) σ_x ⊗ ρ_{0,x^c}
    let lat = make_chain(2, 2).unwrap();
    let g = gibbs_state(&Preset::ising(0.0, 0.6).build(lat).unwrap(), 0.9).unwrap();
    let a = Region::single(0);
    let gen = lindbladian(&g, &a).unwrap();
    let mut rng = stream_rng(54, 0);
    let rho = random_density(&mut rng, lat.full_region(), 2);
    let target =
        crate::operator::tensor_states(&g.sigma().reduce(&a).unwrap(), &rho.reduce(&Region::single(1)).unwrap())
            .unwrap();
    for t in [0.0, 0.3, 1.0, 4.0] {
        let decay = (-t).exp();
        let oracle = rho.matrix().scale(decay) + target.matrix().scale(1.0 - decay);
        assert!(max_abs(&(evolve(&gen, &rho, t).unwrap().matrix() - oracle)) < 1e-12);
    }
}

#[test]
fn trace_distance_contracts_along_trajectories() {
    let g = tfi(3, 0.8);
    let gen = lindbladian(&g, &g.lattice().full_region()).unwrap();
    let mut rng = stream_rng(55, 0);
    let rho = random_pure(&mut rng, g.lattice().full_region(), 2);
    let mut last = f64::INFINITY;
    for i in 0..20 {
        let d = distance_to_sigma(&g, &evolve(&gen, &rho, 0.25 * i as f64).unwrap());
        assert!(d <= last + 1e-9);
        last = d;
    }
}

#[test]
fn dirichlet_form_two_term_expansion() {
    let g = tfi(3, 0.6);
    let full = g.lattice().full_region();
    let a = Region::from([0, 1]);
    let mut rng = stream_rng(56, 0);
    let f = random_hermitian(&mut rng, full.clone(), 2);
    let s = g.sigma().as_operator().spectral().apply(|x| x.sqrt());
    let ef = dual_expectation(&g, &a, &f).unwrap();
    let norm = linalg::trace_product(&(f.matrix() * &s), &(f.matrix() * &s)).re;
    let cross = linalg::trace_product(&(f.matrix() * &s), &(ef.matrix() * &s)).re;
    assert!((dirichlet_form(&g, &a, &f).unwrap() - (norm - cross)).abs() < 1e-12);
}
