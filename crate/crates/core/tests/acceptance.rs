//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::time::Instant;

use kirchhoff_core::interp::{customized_modulus, v_omega_seminorm_sq, verify_time_modulus};
use kirchhoff_core::kirchhoff::{
    check_apriori_subcritical, check_apriori_supercritical, continue_solution, energy_identity_residual, phi_map,
    smallness_constants, solve_direct, solve_fixed_point, ContinuationConfig, FixedPointConfig, KirchhoffProblem,
    NonlinearitySpec, Regime, SolveReport,
};
use kirchhoff_core::linear::{
    certify_low_frequency, convergence_study, high_frequency_sweep, propagate_mode, solve_linear, sup_distance,
    TimeCoefficient, TimeGrid,
};
use kirchhoff_core::moduli::{find_nu_subcritical, Modulus, DEFAULT_LAMBDA_CAP};
use kirchhoff_core::regime::{regime_map, Classification};
use kirchhoff_core::spectrum::{ModeGrid, StatePair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ok_if(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// `u0_k = a s_k lambda^{-p0}`, `u1_k = a s'_k lambda^{-p1}` with random signs
/// and magnitudes in `[1/2, 1]`.
fn smooth_data(grid: &ModeGrid<f64>, amp: f64, p0: f64, p1: f64, rng: &mut ChaCha8Rng) -> StatePair<f64> {
    let mut draw = |p: f64| -> Vec<f64> {
        grid.lambdas()
            .iter()
            .map(|&l| {
                let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                amp * s * rng.gen_range(0.5..1.0) * l.powf(-p)
            })
            .collect()
    };
    let u0 = draw(p0);
    let u1 = draw(p1);
    StatePair::from_coeffs(grid, u0, u1).unwrap()
}

fn nonlinearity(i: usize) -> NonlinearitySpec<f64> {
    match i % 4 {
        0 => NonlinearitySpec::affine(1.0, 1.0, Some(1.0)),
        1 => NonlinearitySpec::holder(1.0, 1.0, 0.5, Some(1.0)),
        2 => NonlinearitySpec::power(1.0, 0.5, 2.0, 10.0, Some(1.0)),
        _ => NonlinearitySpec::constant(1.5, Some(1.0)),
    }
    .unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let grid = ModeGrid::new(vec![1.0]).map_err(err)?;
    let s0 = StatePair::from_coeffs(&grid, vec![1.0], vec![0.0]).map_err(err)?;
    let tg = TimeGrid::with_step(5.0, 1e-3).map_err(err)?;
    let c = TimeCoefficient::constant(tg, 1.0).map_err(err)?;
    let tr = solve_linear(&s0, 0.5, 1.0, &c, &tg).map_err(err)?;
    let worst = tr
        .times()
        .iter()
        .zip(tr.states())
        .map(|(&t, s): (&f64, _)| (s.u0.coeffs()[0] - (1.0 + t) * (-t).exp()).abs())
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    ok_if(worst <= 1e-8 && secs < 1.0, format!("max error {worst:.2e}, {secs:.3} s"))
}

fn energy_runs(h: f64) -> Result<Vec<(f64, f64)>, String> {
    let grid = ModeGrid::dirichlet(64).map_err(err)?;
    let sigmas = [0.3, 0.5, 0.75, 1.0, 1.5];
    let mut out = Vec::new();
    for (i, &sigma) in sigmas.iter().enumerate() {
        for seed in 0..4u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed + 10 * i as u64);
            let amp = rng.gen_range(0.2..1.0);
            let delta = rng.gen_range(0.1..0.4);
            let s0 = smooth_data(&grid, amp, 4.0, 4.0, &mut rng);
            let p = KirchhoffProblem::new(s0, sigma, delta, nonlinearity(seed as usize), 1.0).map_err(err)?;
            let tg = TimeGrid::with_step(1.0, h).map_err(err)?;
            let r = solve_direct(&p, &tg).map_err(err)?;
            if let Some(d) = r.diagnostic {
                return Err(d);
            }
            out.push((sigma, energy_identity_residual(&r)));
        }
    }
    Ok(out)
}

fn criterion_2() -> Outcome {
    let coarse = energy_runs(1e-3)?;
    let fine = energy_runs(5e-4)?;
    let worst = coarse.iter().map(|r| r.1).fold(0.0, f64::max);
    let min_ratio = coarse.iter().zip(&fine).map(|(a, b)| a.1 / b.1).fold(f64::INFINITY, f64::min);
    ok_if(
        worst <= 1e-6 && min_ratio >= 2.0,
        format!("20 runs, worst residual {worst:.2e}, smallest halving ratio {min_ratio:.2}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = ModeGrid::new((0..40).map(|k| 0.5 + 1.7 * k as f64).collect()).map_err(err)?;
    let mut worst: f64 = 0.0;
    for alpha in [0.0, 0.1, 0.24] {
        let w = Modulus::power(1.0, 4.0 * alpha).map_err(err)?;
        for _ in 0..100 {
            let u0: Vec<f64> = grid.lambdas().iter().map(|l| rng.gen_range(-1.0..1.0) / (1.0 + l * l)).collect();
            let u1: Vec<f64> = grid.lambdas().iter().map(|l| rng.gen_range(-1.0..1.0) / (1.0 + l)).collect();
            let lhs = v_omega_seminorm_sq(&StatePair::from_coeffs(&grid, u0.clone(), u1.clone()).map_err(err)?, &w).value;
            let rhs: f64 = grid
                .lambdas()
                .iter()
                .enumerate()
                .map(|(k, &l)| l.powf(4.0 * alpha) * u1[k] * u1[k] + l.powf(4.0 * alpha + 2.0) * u0[k] * u0[k])
                .sum();
            worst = worst.max((lhs - rhs).abs() / rhs);
        }
    }
    ok_if(worst <= 1e-12, format!("300 pairs, worst relative deviation {worst:.2e}"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid = ModeGrid::dirichlet(48).map_err(err)?;
    let mut failures = Vec::new();
    let mut worst_tail: f64 = 0.0;
    for alpha in [0.0, 0.1, 0.2] {
        for i in 0..100 {
            let p: f64 = rng.gen_range(0.5..3.0);
            let u0: Vec<f64> = grid.lambdas().iter().map(|l: &f64| rng.gen_range(-1.0..1.0) * l.powf(-p - 1.0)).collect();
            let u1: Vec<f64> = grid.lambdas().iter().map(|l: &f64| rng.gen_range(-1.0..1.0) * l.powf(-p)).collect();
            let s = StatePair::from_coeffs(&grid, u0, u1).map_err(err)?;
            let cert = customized_modulus(&s, alpha).map_err(err)?;
            worst_tail = worst_tail.max(cert.tail_ratio);
            let exact_one = cert.modulus.eval(1.0) == 1.0;
            if !(cert.checks.all() && cert.laws.ok && exact_one && cert.tail_ratio < 0.1) {
                failures.push(format!("alpha={alpha} pair {i}: {:?}", cert.checks));
            }
        }
    }
    ok_if(
        failures.is_empty(),
        format!("300 certificates, {} failures, largest tail ratio {worst_tail:.2e} {}", failures.len(), failures.join("; ")),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid = ModeGrid::dirichlet(32).map_err(err)?;
    let tg = TimeGrid::with_step(2.0, 1e-3).map_err(err)?;
    let mut worst: f64 = 0.0;
    for run in 0..20 {
        let sigma = [0.1, 0.25, 0.4, 0.5][run % 4];
        let delta = rng.gen_range(0.5..2.0);
        let alpha = [0.05, 0.1, 0.2][run % 3];
        let s0 = smooth_data(&grid, rng.gen_range(0.1..1.0), 2.0, 1.5, &mut rng);
        let c = TimeCoefficient::from_fn(tg, |t| 1.5 + 0.5 * (3.0 * t + run as f64).sin(), 1.0, 2.0).map_err(err)?;
        let tr = solve_linear(&s0, sigma, delta, &c, &tg).map_err(err)?;
        let wd = customized_modulus(&s0, alpha).map_err(err)?.modulus;
        let l = tr.states().iter().map(|s| kirchhoff_core::interp::seminorm_sq(s, &wd)).fold(0.0, f64::max);
        let rep = verify_time_modulus(&tr, &wd, l).map_err(err)?;
        if !rep.pass {
            return Err(format!("run {run}: constant {} > 3L = {}", rep.constant, 3.0 * l));
        }
        worst = worst.max(rep.constant / (3.0 * l));
    }
    ok_if(true, format!("20 runs, largest constant / 3L = {worst:.3}"))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let (sigma, delta, mu1) = (0.25, 1.0, 1.0);
    let gamma: f64 = 0.75;
    let w = Modulus::holder(0.5 * (2.0 * std::f64::consts::PI).powf(gamma), gamma).map_err(err)?;
    let cg = TimeGrid::new(1.0, 2000).map_err(err)?;
    let c = TimeCoefficient::from_fn(cg, |t| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * t).sin().abs().powf(gamma), 1.0, 1.5)
        .map_err(err)?
        .with_modulus(w.clone())
        .map_err(err)?;
    let th = find_nu_subcritical(delta, mu1, &w, sigma, DEFAULT_LAMBDA_CAP).map_err(err)?;
    let lambdas = [10.0, 1e2, 1e3, 1e4];
    if th.nu > lambdas[0] {
        return Err(format!("nu = {} exceeds the sweep", th.nu));
    }
    let sweep = high_frequency_sweep(&lambdas, sigma, delta, &c, &TimeGrid::with_step(1.0, 1e-3).map_err(err)?)
        .map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    ok_if(
        sweep.spread < 2.0 && secs < 10.0,
        format!("nu = {}, worst ratios {:?}, spread {:.3}, {secs:.2} s", th.nu, sweep.worst_ratios, sweep.spread),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for i in 0..500 {
        let delta = [0.0, 0.1, 1.0][i % 3];
        let sigma = [0.0, 0.5, 1.0][(i / 3) % 3];
        let mu2 = rng.gen_range(0.1..5.0);
        let nu = rng.gen_range(1.0..20.0);
        let lambda = rng.gen_range(0.0..=nu);
        let tg = TimeGrid::with_step(2.0, 1e-3).map_err(err)?;
        // piecewise constant on random pieces of length >= 0.05
        let pieces: Vec<f64> = (0..40).map(|_| rng.gen_range(0.0..=mu2)).collect();
        let cbar: Vec<f64> = tg.times().iter().map(|&t| pieces[((t / 0.05) as usize).min(39)]).collect();
        let c = TimeCoefficient::new(tg, cbar, 0.0, mu2).map_err(err)?;
        let (w0, w1) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let hist = propagate_mode(lambda, sigma, delta, &c, None, w0, w1, &tg).map_err(err)?;
        let cert = certify_low_frequency(&hist, nu, mu2).map_err(err)?;
        if !cert.pass {
            return Err(format!("run {i}: ratio {} at t = {}", cert.worst_ratio, cert.worst_time));
        }
        worst = worst.max(cert.worst_ratio);
    }
    ok_if(true, format!("500 runs, largest energy/envelope {worst:.3}"))
}

fn criterion_8() -> Outcome {
    let grid = ModeGrid::dirichlet(32).map_err(err)?;
    let u0: Vec<f64> = grid.lambdas().iter().map(|&l: &f64| if l >= 8.0 { l.powf(-2.5) } else { 0.0 }).collect();
    let u1: Vec<f64> = grid.lambdas().iter().map(|&l: &f64| if l >= 8.0 { l.powf(-1.5) } else { 0.0 }).collect();
    let s0 = StatePair::from_coeffs(&grid, u0, u1).map_err(err)?;
    let tg = TimeGrid::with_step(1.0, 2.5e-4).map_err(err)?;
    let ns = [1u32, 2, 4, 8, 16, 32, 64];
    let c_inf = TimeCoefficient::constant(tg, 2.0).map_err(err)?;
    let cs = ns
        .iter()
        .map(|&n| {
            let n = n as f64;
            TimeCoefficient::from_fn(tg, |t| 2.0 + (n * t).sin() / n, 1.0, 3.0)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let rep = convergence_study(&cs, &c_inf, &s0, 1.0, 1.0, &tg).map_err(err)?;
    let monotone = rep.distances.windows(2).all(|w| w[1] < w[0]);
    let hi = rep.ratios.iter().copied().fold(0.0, f64::max);
    let lo = rep.ratios.iter().copied().fold(f64::INFINITY, f64::min);
    ok_if(
        monotone && hi / lo < 10.0 && rep.bound_ok.unwrap_or(true),
        format!(
            "d_n from {:.2e} to {:.2e}, ratio spread {:.2}, forced bounds {:?}",
            rep.distances[0],
            rep.distances[rep.distances.len() - 1],
            hi / lo,
            rep.bound_ok
        ),
    )
}

fn apriori_runs() -> Result<Vec<SolveReport<f64>>, String> {
    let grid = ModeGrid::dirichlet(32).map_err(err)?;
    let mut out = Vec::new();
    let sigmas = [0.3, 0.5, 0.75, 1.0, 1.5, 2.0];
    for (i, &sigma) in sigmas.iter().enumerate() {
        for seed in 0..4u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(900 + seed + 10 * i as u64);
            let amp = rng.gen_range(0.2..2.0);
            let delta = rng.gen_range(0.3..2.0);
            let s0 = smooth_data(&grid, amp, 2.0, 1.0, &mut rng);
            let m = match seed {
                3 => NonlinearitySpec::constant(0.25, Some(0.25)).map_err(err)?,
                _ => nonlinearity(seed as usize),
            };
            let p = KirchhoffProblem::new(s0, sigma, delta, m, 2.0).map_err(err)?;
            let r = solve_direct(&p, &TimeGrid::with_step(2.0, 1e-3).map_err(err)?).map_err(err)?;
            out.push(r);
        }
    }
    Ok(out)
}

fn criterion_9() -> Outcome {
    let runs = apriori_runs()?;
    let (mut sup_worst, mut sub_worst) = (0.0f64, 0.0f64);
    let (mut n_sup, mut n_sub) = (0, 0);
    for r in &runs {
        let sigma = r.trajectory.meta.sigma;
        let rep = if sigma > 0.5 {
            n_sup += 1;
            check_apriori_supercritical(r).map_err(err)?
        } else {
            n_sub += 1;
            check_apriori_subcritical(r).map_err(err)?
        };
        if !rep.pass {
            return Err(format!("sigma = {sigma}: ratio {} at t = {}", rep.worst_ratio, rep.worst_time));
        }
        if sigma > 0.5 {
            sup_worst = sup_worst.max(rep.worst_ratio);
        } else {
            sub_worst = sub_worst.max(rep.worst_ratio);
        }
    }
    ok_if(
        true,
        format!("{n_sup} supercritical runs (worst {sup_worst:.3}), {n_sub} subcritical runs (worst {sub_worst:.3})"),
    )
}

fn criterion_10() -> Outcome {
    let grid = ModeGrid::dirichlet(32).map_err(err)?;
    let cfg = FixedPointConfig::default();
    let sigmas = [0.3, 0.5, 0.75, 1.0, 1.5];
    let mut worst: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for (i, &sigma) in sigmas.iter().enumerate() {
        for seed in 0..4u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed + 10 * i as u64);
            let s0 = smooth_data(&grid, rng.gen_range(0.05..0.3), 3.0, 2.0, &mut rng);
            let p = KirchhoffProblem::new(s0, sigma, rng.gen_range(0.5..1.5), nonlinearity(seed as usize), 1.0)
                .map_err(err)?;
            let tg = TimeGrid::with_step(1.0, 1e-3).map_err(err)?;
            let a = solve_fixed_point(&p, &tg, &cfg).map_err(err)?;
            let b = solve_direct(&p, &tg).map_err(err)?;
            let d = sup_distance(&a.trajectory, &b.trajectory).map_err(err)?.sqrt();
            let (next, _) = phi_map(&a.final_coefficient, &p, &p.truncation(), &tg).map_err(err)?;
            let res = next
                .samples()
                .iter()
                .zip(a.final_coefficient.samples())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            if !(d <= 1e-6 && res <= cfg.tol) {
                return Err(format!("sigma = {sigma}, seed {seed}: distance {d:.2e}, residual {res:.2e}"));
            }
            worst = worst.max(d);
            worst_res = worst_res.max(res);
        }
    }
    ok_if(true, format!("20 problems, worst distance {worst:.2e}, worst residual {worst_res:.2e}"))
}

fn criterion_11() -> Outcome {
    let sigma = 0.25;
    let map = regime_map(sigma, 64, false).map_err(err)?;
    let mismatches = map
        .cells
        .iter()
        .filter(|c| {
            let lhs = 4.0 * c.alpha * c.beta;
            let gap = 1.0 - 2.0 * sigma;
            let expected = if lhs == gap {
                Classification::Boundary
            } else if lhs > gap && c.alpha < 0.25 && c.beta < 1.0 {
                Classification::Covered
            } else {
                Classification::Uncovered
            };
            expected != c.class
        })
        .count();
    ok_if(
        mismatches == 0 && map.cells.len() == 64 * 64,
        format!(
            "{} cells, {} covered, {} uncovered, {} mismatches",
            map.cells.len(),
            map.count(Classification::Covered),
            map.count(Classification::Uncovered),
            mismatches
        ),
    )
}

fn criterion_12() -> Outcome {
    let start = Instant::now();
    let grid = ModeGrid::dirichlet(64).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let s0 = smooth_data(&grid, 0.02, 2.0, 1.5, &mut rng);
    let m = NonlinearitySpec::holder(1.0, 1.0, 0.5, Some(1.0)).map_err(err)?;
    let p = KirchhoffProblem::with_alpha(s0, 0.4, 1.0, m, 50.0, Some(0.2)).map_err(err)?;
    if p.regime() != Regime::Subcritical {
        return Err("problem is not subcritical".into());
    }
    let wd = customized_modulus(p.initial(), 0.2).map_err(err)?.modulus;
    let small = smallness_constants(&p, &wd, None).map_err(err)?;
    if !small.eps1_ok {
        return Err(format!("smallness fails: {} > L1 = {}", small.lhs, small.l1));
    }
    let cfg = ContinuationConfig { chunk: 1.0, max_t: 50.0, step: 1e-3, k2: Some(small.k2), ..Default::default() };
    let r = continue_solution(&p, &cfg).map_err(err)?;
    let t_end = r.trajectory.times()[r.trajectory.len() - 1];
    let max_sn = r.max_seminorm_sq.unwrap_or(f64::INFINITY);
    let secs = start.elapsed().as_secs_f64();
    ok_if(
        r.blow_up.is_none() && (t_end - 50.0).abs() < 1e-9 && max_sn <= 2.0 * small.l1 && secs < 60.0,
        format!(
            "L1 = {:.4}, K2 = {:.3}, reached t = {t_end}, max seminorm {max_sn:.3e} <= 2 L1, {} fixed-point iterations, {secs:.1} s",
            small.l1, small.k2, r.fixed_point_iterations
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("closed-form critically damped mode", criterion_1),
        ("energy identity for nonlinear runs", criterion_2),
        ("interpolation identity", criterion_3),
        ("customized modulus certificate", criterion_4),
        ("time modulus of the potential energy", criterion_5),
        ("high-frequency uniformity", criterion_6),
        ("low-frequency envelope", criterion_7),
        ("coefficient convergence", criterion_8),
        ("a priori bounds", criterion_9),
        ("fixed-point and direct solvers agree", criterion_10),
        ("regime map", criterion_11),
        ("global small-data continuation", criterion_12),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS [{:>2}] {name}: {d} ({secs:.2} s)", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL [{:>2}] {name}: {d} ({secs:.2} s)", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
