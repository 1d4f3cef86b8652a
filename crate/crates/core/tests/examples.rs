//! Worked values for each public operation, computed by hand.

use approx::assert_relative_eq;
use kirchhoff_core::interp::{customized_modulus, v_omega_seminorm_sq};
use kirchhoff_core::kirchhoff::{
    hamiltonian, modified_hamiltonian, phi_map, solve_fixed_point, supercritical_apriori_constants,
    truncate_nonlinearity, FixedPointConfig, KirchhoffProblem, NonlinearitySpec, Regime,
};
use kirchhoff_core::linear::{
    mollify, parabolic_reference, perturbed_energy_subcritical, perturbed_energy_supercritical, propagate_mode,
    quadratic_form_certificate, search_k3, QuadraticFormInput, TimeCoefficient, TimeGrid,
};
use kirchhoff_core::moduli::{
    check_subcritical_gap, compose, default_grid, find_nu_subcritical, find_nu_supercritical, lambda_infinity,
    limsup_grid, modulus_constant_estimate, verify_modulus, LimsupOptions, Modulus,
};
use kirchhoff_core::regime::{classify, regime_map, Classification};
use kirchhoff_core::spectrum::{apply_power, energy_norm_sq, graph_norm_sq, split, ModeGrid, StatePair};

fn unit(g: &ModeGrid<f64>, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; g.len()];
    v[k] = 1.0;
    v
}

#[test]
fn spectral_powers_and_norms() {
    let g = ModeGrid::new(vec![1.0, 2.0, 3.0]).unwrap();
    let v = g.vector(vec![0.0, 1.0, 0.0]).unwrap();
    assert_eq!(apply_power(&v, 0.5).coeffs(), &[0.0, 2.0, 0.0]);
    assert_eq!(apply_power(&v, 0.0).coeffs(), v.coeffs());
    let g4 = ModeGrid::new(vec![4.0]).unwrap();
    assert_relative_eq!(apply_power(&g4.vector(vec![1.0]).unwrap(), 0.75).coeffs()[0], 8.0, max_relative = 1e-14);

    let s = StatePair::from_coeffs(&g, unit(&g, 2), vec![0.0; 3]).unwrap();
    assert_relative_eq!(energy_norm_sq(&s), 9.0);
    let s = StatePair::from_coeffs(&g, vec![0.0; 3], unit(&g, 1)).unwrap();
    assert_relative_eq!(energy_norm_sq(&s), 1.0);
    let s = StatePair::from_coeffs(&g, unit(&g, 1), vec![0.0; 3]).unwrap();
    assert_relative_eq!(graph_norm_sq(&s, 0.25), 8.0, max_relative = 1e-14);

    let ones = g.vector(vec![1.0; 3]).unwrap();
    let (lo, hi) = split(&ones, 2.0);
    assert_eq!((lo.coeffs(), hi.coeffs()), (&[1.0, 0.0, 0.0][..], &[0.0, 1.0, 1.0][..]));
    let (lo, hi) = split(&ones, 0.0);
    assert_eq!((lo.norm_sq(), hi.norm_sq()), (0.0, 3.0));
}

#[test]
fn modulus_laws_and_composition() {
    let grid: Vec<f64> = (1..=100).map(|k| k as f64 * 0.1).collect();
    assert!(verify_modulus(&Modulus::holder(1.0, 0.5).unwrap(), &grid).ok);
    assert!(!verify_modulus(&Modulus::power(1.0, 2.0).unwrap(), &grid).ok);
    assert!(verify_modulus(&Modulus::holder(1.0, 1.0).unwrap(), &grid).ok);

    let half = Modulus::holder(1.0, 0.5).unwrap();
    let c = compose(&half, &half);
    for &x in &default_grid::<f64>() {
        assert!((c.eval(x) - x.powf(0.25)).abs() <= 1e-12);
    }
    let (m, beta, l) = (2.0, 0.3, 5.0);
    let outer = Modulus::holder(m, beta).unwrap();
    let inner = Modulus::holder(l, 1.0).unwrap();
    let c = compose(&outer, &inner);
    for &x in &grid {
        assert!(c.eval(x) <= l.max(1.0) * m * x.powf(beta) * (1.0 + 1e-12));
    }
}

#[test]
fn lambda_infinity_examples() {
    let opts = LimsupOptions::default();
    let sigma = 0.25;
    let g = limsup_grid::<f64>();
    let faster = Modulus::holder(3.0, 0.8).unwrap();
    assert_eq!(lambda_infinity(&faster, sigma, &g, opts).value, Some(0.0));
    let exact = Modulus::holder(3.0, 0.5).unwrap();
    assert_relative_eq!(lambda_infinity(&exact, sigma, &g, opts).value.unwrap(), 3.0, max_relative = 1e-12);
    let any = Modulus::holder(1.0, 0.3).unwrap();
    assert_eq!(lambda_infinity(&any, 0.5, &g, opts).value, Some(0.0));

    assert!(check_subcritical_gap(1.0, 1.0, Some(0.0)));
    assert!(!check_subcritical_gap(1.0, 1.0, Some(2.0)));
    assert!(!check_subcritical_gap(1.0, 2.0, Some(2.0)));
}

#[test]
fn thresholds() {
    let sigma = 0.25;
    let w = Modulus::holder(0.1, 1.0 - 2.0 * sigma).unwrap();
    assert_eq!(find_nu_subcritical(1.0, 1.0, &w, sigma, 1e6).unwrap().nu, 1.0);
    let rough = Modulus::holder(1.0, 0.2).unwrap();
    assert!(find_nu_subcritical(1.0, 1.0, &rough, sigma, 1e6).is_err());
    // at sigma = 1/2 the envelope is omega(1/lambda): the first lambda with
    // omega(1/lambda)^2 + 2 omega(1/lambda) <= 4 is the answer
    let big = Modulus::holder(10.0, 1.0).unwrap();
    let r = find_nu_subcritical(1.0, 1.0, &big, 0.5, 1e6).unwrap();
    let e = |l: f64| 10.0 / l;
    assert!(e(r.nu).powi(2) + 2.0 * e(r.nu) <= 4.0);
    assert!(e(r.nu - 1.0).powi(2) + 2.0 * e(r.nu - 1.0) > 4.0);

    assert_eq!(find_nu_supercritical(1.0, 4.0, 1.0).unwrap(), 1.0);
    assert_eq!(find_nu_supercritical(0.5, 4.0, 1.0).unwrap(), 2.0);
    assert_eq!(find_nu_supercritical(1.0, 4.0, 0.5).unwrap(), 1.0);
}

#[test]
fn modulus_constant_examples() {
    let t: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let lin = Modulus::holder(1.0, 1.0).unwrap();
    assert_eq!(modulus_constant_estimate(&t, &vec![2.0; t.len()], &lin).unwrap(), 0.0);
    assert_relative_eq!(modulus_constant_estimate(&t, &t, &lin).unwrap(), 1.0, max_relative = 1e-12);
    let sq = Modulus::holder(1.0, 0.5).unwrap();
    let g: Vec<f64> = t.iter().map(|x| x.sqrt()).collect();
    assert_relative_eq!(modulus_constant_estimate(&t, &g, &sq).unwrap(), 1.0, max_relative = 1e-12);
}

#[test]
fn seminorm_and_custom_modulus_examples() {
    let g = ModeGrid::new(vec![4.0]).unwrap();
    let s = StatePair::from_coeffs(&g, vec![1.0], vec![0.0]).unwrap();
    let w = Modulus::holder(1.0, 1.0).unwrap();
    assert_relative_eq!(v_omega_seminorm_sq(&s, &w).value, 64.0);
    let z = StatePair::zeros(&g);
    assert_eq!(v_omega_seminorm_sq(&z, &w).value, 0.0);

    let g = ModeGrid::dirichlet(16).unwrap();
    let z = StatePair::zeros(&g);
    let cert = customized_modulus(&z, 0.2).unwrap();
    assert!(cert.zero_energy_fallback && cert.checks.all());
    assert_relative_eq!(cert.modulus.eval(0.5), 0.5);
    assert_relative_eq!(cert.modulus.eval(4.0), 4f64.powf(0.8), max_relative = 1e-12);

    let u1: Vec<f64> = (1..=16).map(|k| (k as f64).powf(-1.5)).collect();
    let s = StatePair::from_coeffs(&g, vec![0.0; 16], u1).unwrap();
    let cert = customized_modulus(&s, 0.0).unwrap();
    assert!(cert.checks.all());
    assert!(cert.tail_ratio < 0.5);
}

#[test]
fn mollifier_of_a_ramp() {
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    let c = TimeCoefficient::from_fn(grid, |t: f64| t, 0.0, 1.0)
        .unwrap()
        .with_modulus(Modulus::holder(1.0, 1.0).unwrap())
        .unwrap();
    let m = mollify(&c, 0.2).unwrap();
    assert_relative_eq!(m.coefficient.eval(0.5), 0.6, epsilon = 1e-9);
    assert_relative_eq!(m.coefficient.eval(0.9), 0.975, epsilon = 1e-6);
    assert!(m.checks.max_deviation <= 0.2 + 1e-9);

    let k = TimeCoefficient::constant(grid, 1.7).unwrap();
    assert!(mollify(&k, 0.2).unwrap().coefficient.samples().iter().all(|&v| (v - 1.7).abs() < 1e-12));
}

#[test]
fn single_mode_closed_forms() {
    let grid = TimeGrid::<f64>::new(5.0, 5000).unwrap();
    let one = TimeCoefficient::constant(grid, 1.0).unwrap();
    let h = propagate_mode(1.0, 0.5, 1.0, &one, None, 1.0, 0.0, &grid).unwrap();
    for (i, &w) in h.w.iter().enumerate() {
        let t = grid.time(i);
        assert!((w - (1.0 + t) * (-t).exp()).abs() <= 1e-8);
    }
    let h = propagate_mode(0.0, 0.7, 1.0, &one, None, 0.3, -0.2, &grid).unwrap();
    assert_relative_eq!(h.w[5000], 0.3 - 0.2 * 5.0, epsilon = 1e-12);

    let long = TimeGrid::<f64>::new(30.0, 3000).unwrap();
    let c1 = TimeCoefficient::constant(long, 1.0).unwrap();
    let f = vec![1.0; 3000];
    let h = propagate_mode(1.0, 0.5, 1.0, &c1, Some(&f), 0.0, 0.0, &long).unwrap();
    assert!((h.w[3000] - 1.0).abs() < 1e-10);

    let zero = TimeCoefficient::constant(grid, 0.0).unwrap();
    let (lam, sigma, delta) = (2.0f64, 0.5, 1.0);
    let h = propagate_mode(lam, sigma, delta, &zero, None, 0.4, 1.0, &grid).unwrap();
    let rate = 2.0 * delta * lam.powf(2.0 * sigma);
    for (i, &w) in h.w.iter().enumerate() {
        let t = grid.time(i);
        assert!((w - (0.4 + (1.0 - (-rate * t).exp()) / rate)).abs() <= 1e-12);
    }
}

#[test]
fn parabolic_factor() {
    let g = ModeGrid::new(vec![1.0, 2.0]).unwrap();
    let u1 = g.vector(vec![1.0, 1.0]).unwrap();
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let v = parabolic_reference(&u1, 0.5, 1.0, &grid);
    assert_eq!(v[0].coeffs(), &[1.0, 1.0]);
    assert_relative_eq!(v[10].coeffs()[0], (-2.0f64).exp(), max_relative = 1e-14);
    assert!(v[10].coeffs()[1] < v[10].coeffs()[0]);
}

#[test]
fn perturbed_energy_examples() {
    assert_relative_eq!(perturbed_energy_supercritical(1.0, 0.0, 1.0, 1.0, 1.0), 3.0);
    assert_eq!(perturbed_energy_supercritical(0.0, 0.0, 3.0, 1.0, 1.0), 0.0);
    assert_relative_eq!(perturbed_energy_subcritical(1.0, 0.0, 2.0, 0.5, 1.0, 1.0), 13.0);
}

#[test]
fn quadratic_form_examples() {
    for lambda in [1.0, 3.0, 10.0] {
        for c in [0.5, 2.0, 4.0] {
            let input = QuadraticFormInput::Supercritical { lambda, c };
            assert!(quadratic_form_certificate(0.5, 1.0, 0.0, input).pass);
        }
    }
    let r = search_k3(1.0f64, 0.1, &[QuadraticFormInput::Supercritical { lambda: 1.0, c: 4.0 }]).unwrap();
    assert!(r.k3 > 0.0 && r.k3.is_finite());
    let z = QuadraticFormInput::Supercritical { lambda: 0.0, c: 1.0 };
    assert!(quadratic_form_certificate(1.0, 1.0, 0.0, z).pass);
}

#[test]
fn hamiltonians() {
    let g = ModeGrid::new(vec![2.0]).unwrap();
    let one = NonlinearitySpec::constant(1.0, Some(1.0)).unwrap();
    let s = StatePair::from_coeffs(&g, vec![1.0], vec![0.0]).unwrap();
    assert_relative_eq!(hamiltonian(&s, &one), 4.0, max_relative = 1e-12);

    let id = NonlinearitySpec::affine(0.0, 1.0, None).unwrap();
    let g = ModeGrid::new(vec![2.0, 1.0]).unwrap();
    let s = StatePair::from_coeffs(&g, vec![1.0 / 2f64.sqrt(), 0.0], vec![0.0, 1.0]).unwrap();
    assert_relative_eq!(hamiltonian(&s, &id), 3.0, max_relative = 1e-12);

    // sigma = 1: H + delta^2 |u|^2 + delta^2 |A^{1/2} u|^2 + delta <u, u'>
    let g = ModeGrid::new(vec![1.0]).unwrap();
    let s = StatePair::from_coeffs(&g, vec![1.0], vec![1.0]).unwrap();
    let h = modified_hamiltonian(&s, 1.0, 1.0, &one).unwrap();
    assert_relative_eq!(h, 1.0 + 1.0 + 1.0 + 1.0 + 1.0, max_relative = 1e-12);
    assert!(modified_hamiltonian(&s, 0.3, 1.0, &one).is_err());
}

#[test]
fn truncation_of_the_identity() {
    let id = NonlinearitySpec::affine(0.0, 1.0, None).unwrap();
    let t = truncate_nonlinearity(&id, 3.0);
    assert_eq!(t.m0, 4.0);
    assert_relative_eq!(t.mu2, 4.0, max_relative = 1e-12);
    assert_eq!(t.m_star.eval(100.0), 4.0);
}

#[test]
fn phi_with_zero_data_is_constant() {
    let g = ModeGrid::dirichlet(8).unwrap();
    let m = NonlinearitySpec::affine(1.0, 1.0, Some(1.0)).unwrap();
    let p = KirchhoffProblem::new(StatePair::zeros(&g), 1.0, 1.0, m, 1.0).unwrap();
    let trunc = p.truncation();
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let c = TimeCoefficient::constant(grid, 1.5).unwrap();
    let (next, traj) = phi_map(&c, &p, &trunc, &grid).unwrap();
    assert!(next.samples().iter().all(|&v| v == 1.0));
    assert!(traj.potential_series().iter().all(|&v| v == 0.0));
}

#[test]
fn constant_nonlinearity_converges_at_once() {
    let g = ModeGrid::dirichlet(8).unwrap();
    let u0: Vec<f64> = (1..=8).map(|k| 1.0 / (k * k) as f64).collect();
    let s = StatePair::from_coeffs(&g, u0, vec![0.0; 8]).unwrap();
    let m = NonlinearitySpec::constant(2.0, Some(2.0)).unwrap();
    let p = KirchhoffProblem::new(s, 0.75, 0.5, m, 1.0).unwrap();
    assert_eq!(p.regime(), Regime::Supercritical);
    let r = solve_fixed_point(&p, &TimeGrid::new(1.0, 200).unwrap(), &FixedPointConfig::default()).unwrap();
    assert!(r.fixed_point_iterations <= 2);
    assert!(r.final_coefficient.samples().iter().all(|&v| v == 2.0));
}

#[test]
fn local_existence_constants() {
    // sigma >= 1: K3 = 1, K4 = 4 delta + 1/(4 delta)
    let (k3, k4) = supercritical_apriori_constants(1.0, 0.5).unwrap();
    assert_eq!(k3, 1.0);
    assert_relative_eq!(k4, 2.5);
    assert!(supercritical_apriori_constants(0.5, 1.0).is_err());
}

#[test]
fn regime_examples() {
    assert_eq!(classify(0.25, 0.8, 0.2), Classification::Covered);
    assert_eq!(classify(0.25, 0.5, 0.2), Classification::Uncovered);
    assert_eq!(classify(0.25, 0.625, 0.2), Classification::Boundary);
    assert_eq!(classify(0.5, 0.1, 0.01), Classification::Covered);
    assert_eq!(classify(0.0, 0.99, 0.249), Classification::Uncovered);
    let map = regime_map(0.5, 10, false).unwrap();
    assert_eq!(map.count(Classification::Covered), 100);
}
