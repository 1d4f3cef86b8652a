//! Scenario runners. Each returns a JSON summary, a table for
//! `timeseries.csv` and the plots to draw from it.

use kirchhoff_core::interp::{customized_modulus, seminorm_sq};
use kirchhoff_core::kirchhoff::{
    check_apriori_subcritical, check_apriori_supercritical, continue_solution, estimate_k2, hamiltonian, smallness_constants,
    solve_direct, solve_fixed_point, ContinuationConfig, FixedPointConfig, KirchhoffProblem, NonlinearitySpec, Regime,
    SolveReport,
};
use kirchhoff_core::linear::{
    certify_high_frequency, certify_low_frequency, convergence_study, high_frequency_sweep, solve_linear,
    TimeCoefficient, TimeGrid, Trajectory,
};
use kirchhoff_core::moduli::{
    compose, default_grid, find_nu_subcritical, find_nu_supercritical, lambda_infinity, limsup_grid,
    modulus_constant_estimate, verify_modulus, LimsupOptions, DEFAULT_LAMBDA_CAP,
};
use kirchhoff_core::regime::{regime_map, Classification};
use kirchhoff_core::spectrum::split_state;
use serde_json::{json, Value};

use crate::config::{Method, RunConfig};
use crate::output::{Plot, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scenario {
    Simulate,
    CertifyLinear,
    Converge,
    ModulusLab,
    RegimeMap,
    Continue,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Simulate => "simulate",
            Scenario::CertifyLinear => "certify-linear",
            Scenario::Converge => "converge",
            Scenario::ModulusLab => "modulus-lab",
            Scenario::RegimeMap => "regime-map",
            Scenario::Continue => "continue",
        }
    }
}

pub struct Outcome {
    pub summary: Value,
    pub table: Table,
    pub plots: Vec<Plot>,
    /// Extra tables drawn into their own SVG files.
    pub extra_plots: Vec<(Table, Plot)>,
    pub pass: bool,
}

#[derive(Debug)]
pub enum Failure {
    /// Bad or incomplete configuration; nothing was computed.
    Config(String),
    /// The computation itself failed (threshold search, non-convergence,
    /// breakdown); the summary records what is known.
    Science { message: String, summary: Value },
}

fn science(scenario: Scenario, e: impl std::fmt::Display) -> Failure {
    let message = e.to_string();
    Failure::Science { summary: json!({ "scenario": scenario.name(), "pass": false, "error": message }), message }
}

fn cfg_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

pub fn run(s: Scenario, cfg: &RunConfig) -> Result<Outcome, Failure> {
    if let Some(named) = &cfg.scenario {
        if named != s.name() {
            return Err(Failure::Config(format!("field `scenario` is \"{named}\" but the command is {}", s.name())));
        }
    }
    match s {
        Scenario::Simulate => simulate(cfg),
        Scenario::CertifyLinear => certify_linear(cfg),
        Scenario::Converge => converge(cfg),
        Scenario::ModulusLab => modulus_lab(cfg),
        Scenario::RegimeMap => regime(cfg),
        Scenario::Continue => continuation(cfg),
    }
}

const MODE_COLUMNS: usize = 8;

/// `t`, `c`, kinetic and potential energy, optional Hamiltonian, and the
/// first few mode coefficients.
fn trajectory_table(tr: &Trajectory<f64>, c: impl Fn(usize, f64) -> f64, m: Option<&NonlinearitySpec<f64>>) -> Table {
    let mut t = Table::default();
    t.push("t", tr.times().to_vec());
    t.push("c", tr.times().iter().enumerate().map(|(i, &x)| c(i, x)).collect());
    let kin: Vec<f64> = tr.states().iter().map(|s| s.u1.norm_sq()).collect();
    let pot = tr.potential_series();
    t.push("energy", kin.iter().zip(&pot).map(|(a, b)| a + b).collect());
    t.push("kinetic", kin);
    t.push("potential", pot);
    if let Some(m) = m {
        t.push("hamiltonian", tr.states().iter().map(|s| hamiltonian(s, m)).collect());
    }
    for k in 0..tr.grid().len().min(MODE_COLUMNS) {
        t.push(format!("u_{}", k + 1), tr.states().iter().map(|s| s.u0.coeffs()[k]).collect());
        t.push(format!("du_{}", k + 1), tr.states().iter().map(|s| s.u1.coeffs()[k]).collect());
    }
    t
}

fn energy_plots(with_h: bool) -> Vec<Plot> {
    let mut ys = vec!["energy".to_string(), "kinetic".into(), "potential".into()];
    if with_h {
        ys.push("hamiltonian".into());
    }
    vec![
        Plot { file: "energies.svg".into(), title: "Energies".into(), x: "t".into(), ys, log_y: false },
        Plot { file: "coefficient.svg".into(), title: "Coefficient c(t)".into(), x: "t".into(), ys: vec!["c".into()], log_y: false },
    ]
}

fn time_grid(cfg: &RunConfig, scenario: &str) -> Result<TimeGrid<f64>, Failure> {
    TimeGrid::with_step(cfg.t_end(scenario).map_err(cfg_err)?, cfg.step(scenario).map_err(cfg_err)?).map_err(cfg_err)
}

fn problem(cfg: &RunConfig, scenario: &str) -> Result<KirchhoffProblem<f64>, Failure> {
    let grid = cfg.grid(scenario).map_err(cfg_err)?;
    let data = cfg.data(&grid, scenario).map_err(cfg_err)?;
    let m = cfg
        .nonlinearity
        .as_ref()
        .ok_or_else(|| cfg_err(format!("missing field `nonlinearity` (required by {scenario})")))?
        .build::<f64>()
        .map_err(|e| cfg_err(format!("nonlinearity: {e}")))?;
    let (sigma, delta) = (cfg.sigma(scenario).map_err(cfg_err)?, cfg.delta(scenario).map_err(cfg_err)?);
    KirchhoffProblem::with_alpha(data, sigma, delta, m, cfg.t_end(scenario).map_err(cfg_err)?, cfg.alpha).map_err(cfg_err)
}

fn apriori(r: &SolveReport<f64>, regime: Regime) -> Option<Value> {
    let sigma = r.trajectory.meta.sigma;
    let rep = if sigma > 0.5 {
        check_apriori_supercritical(r).ok()
    } else if regime == Regime::Subcritical {
        check_apriori_subcritical(r).ok()
    } else {
        None
    };
    rep.map(|a| to_json(&a))
}

fn simulate(cfg: &RunConfig) -> Result<Outcome, Failure> {
    const S: Scenario = Scenario::Simulate;
    if cfg.nonlinearity.is_some() {
        let p = problem(cfg, S.name())?;
        let grid = time_grid(cfg, S.name())?;
        let fp = FixedPointConfig { max_iter: cfg.solver.max_iter, tol: cfg.solver.tol, relaxation: cfg.solver.relaxation };
        let r = match cfg.solver.method {
            Method::FixedPoint => solve_fixed_point(&p, &grid, &fp),
            Method::Direct => solve_direct(&p, &grid),
        }
        .map_err(|e| science(S, e))?;
        let bound = apriori(&r, p.regime());
        let bound_ok = bound.as_ref().is_none_or(|b| b["pass"] == json!(true));
        let pass = bound_ok && r.diagnostic.is_none();
        let m = p.nonlinearity();
        let pot = r.trajectory.potential_series();
        let table = trajectory_table(&r.trajectory, |i, _| m.eval(pot[i]), Some(&r.nonlinearity));
        let summary = json!({
            "scenario": S.name(),
            "kind": "nonlinear",
            "method": cfg.solver.method,
            "regime": p.regime(),
            "alpha": p.alpha(),
            "report": to_json(&r.summary()),
            "apriori": bound,
            "pass": pass,
        });
        Ok(Outcome { summary, table, plots: energy_plots(true), extra_plots: vec![], pass })
    } else if let Some(spec) = &cfg.coefficient {
        let grid = time_grid(cfg, S.name())?;
        let c = spec.build::<f64>(grid, cfg.seed).map_err(|e| cfg_err(format!("coefficient: {e}")))?;
        let mg = cfg.grid(S.name()).map_err(cfg_err)?;
        let s0 = cfg.data(&mg, S.name()).map_err(cfg_err)?;
        let (sigma, delta) = (cfg.sigma(S.name()).map_err(cfg_err)?, cfg.delta(S.name()).map_err(cfg_err)?);
        let tr = solve_linear(&s0, sigma, delta, &c, &grid).map_err(|e| science(S, e))?;
        let table = trajectory_table(&tr, |i, _| c.samples()[i], None);
        let energy = table.column("energy").expect("column");
        let e0 = energy[0];
        let emax = energy.iter().copied().fold(0.0, f64::max);
        let summary = json!({
            "scenario": S.name(),
            "kind": "linear",
            "sigma": sigma,
            "delta": delta,
            "mu1": c.mu1(),
            "mu2": c.mu2(),
            "samples": tr.len(),
            "energy_initial": e0,
            "energy_final": energy[energy.len() - 1],
            "energy_max_ratio": if e0 > 0.0 { emax / e0 } else { 0.0 },
            "pass": true,
        });
        Ok(Outcome { summary, table, plots: energy_plots(false), extra_plots: vec![], pass: true })
    } else {
        Err(Failure::Config("missing field `nonlinearity` or `coefficient` (simulate needs one)".into()))
    }
}

fn certify_linear(cfg: &RunConfig) -> Result<Outcome, Failure> {
    const S: Scenario = Scenario::CertifyLinear;
    let name = S.name();
    let grid = time_grid(cfg, name)?;
    let spec = cfg.coefficient.as_ref().ok_or_else(|| cfg_err("missing field `coefficient` (required by certify-linear)"))?;
    let c = spec.build::<f64>(grid, cfg.seed).map_err(|e| cfg_err(format!("coefficient: {e}")))?;
    let mg = cfg.grid(name).map_err(cfg_err)?;
    let s0 = cfg.data(&mg, name).map_err(cfg_err)?;
    let (sigma, delta) = (cfg.sigma(name).map_err(cfg_err)?, cfg.delta(name).map_err(cfg_err)?);
    if !(delta > 0.0) {
        return Err(cfg_err(format!("field `delta` must be positive, got {delta}")));
    }
    let (mu1, mu2) = (c.mu1(), c.mu2());

    let (nu, threshold) = if sigma > 0.5 {
        (find_nu_supercritical(delta, mu2, sigma).map_err(|e| science(S, e))?, Value::Null)
    } else {
        let w = c
            .modulus()
            .ok_or_else(|| cfg_err("coefficient has no declared modulus; sigma <= 1/2 needs one"))?;
        let rep = find_nu_subcritical(delta, mu1, w, sigma, DEFAULT_LAMBDA_CAP).map_err(|e| science(S, e))?;
        (rep.nu, to_json(&rep))
    };
    let (k_high, k_estimated) = match cfg.certify.high_constant {
        Some(k) => (k, false),
        None => (estimate_k2(sigma, delta, mu1, mu2).map_err(|e| science(S, e))?, true),
    };

    let tr = solve_linear(&s0, sigma, delta, &c, &grid).map_err(|e| science(S, e))?;
    let mut certs = Vec::new();
    for k in 0..mg.len() {
        let hist = tr.mode_history(k);
        let l = mg.lambda(k);
        if l <= nu {
            certs.push(certify_low_frequency(&hist, nu, mu2).map_err(|e| science(S, e))?);
        }
        if l >= nu {
            certs.push(certify_high_frequency(&hist, nu, Some(k_high)).map_err(|e| science(S, e))?);
        }
    }
    let sweep_l = cfg.certify.sweep.clone().unwrap_or_else(|| vec![10.0, 1e2, 1e3, 1e4]);
    let sweep = high_frequency_sweep(&sweep_l, sigma, delta, &c, &grid).map_err(|e| science(S, e))?;
    let failed = certs.iter().filter(|c| !c.pass).count();
    let pass = failed == 0 && sweep.uniform;

    let mut table = trajectory_table(&tr, |i, _| c.samples()[i], None);
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for s in tr.states() {
        let (a, b) = split_state(s, nu);
        lo.push(a.u1.norm_sq() + a.u0.power_norm_sq(0.5));
        hi.push(b.u1.norm_sq() + b.u0.power_norm_sq(0.5));
    }
    table.push("energy_low", lo);
    table.push("energy_high", hi);
    let mut plots = energy_plots(false);
    plots.push(Plot {
        file: "split.svg".into(),
        title: "Low / high frequency energy".into(),
        x: "t".into(),
        ys: vec!["energy_low".into(), "energy_high".into()],
        log_y: true,
    });
    let summary = json!({
        "scenario": name,
        "sigma": sigma,
        "delta": delta,
        "mu1": mu1,
        "mu2": mu2,
        "seed": cfg.seed,
        "nu": nu,
        "threshold": threshold,
        "high_constant": k_high,
        "high_constant_estimated": k_estimated,
        "certificates": to_json(&certs),
        "failed_certificates": failed,
        "sweep": to_json(&sweep),
        "pass": pass,
    });
    Ok(Outcome { summary, table, plots, extra_plots: vec![], pass })
}

fn converge(cfg: &RunConfig) -> Result<Outcome, Failure> {
    const S: Scenario = Scenario::Converge;
    let name = S.name();
    let grid = time_grid(cfg, name)?;
    let spec = cfg.coefficient.as_ref().ok_or_else(|| cfg_err("missing field `coefficient` (required by converge)"))?;
    let c_inf = spec.build::<f64>(grid, cfg.seed).map_err(|e| cfg_err(format!("coefficient: {e}")))?;
    let mg = cfg.grid(name).map_err(cfg_err)?;
    let s0 = cfg.data(&mg, name).map_err(cfg_err)?;
    let (sigma, delta) = (cfg.sigma(name).map_err(cfg_err)?, cfg.delta(name).map_err(cfg_err)?);
    let sec = &cfg.converge;
    if sec.ns.is_empty() {
        return Err(cfg_err("field `converge.ns` must not be empty"));
    }
    let mut c_list = Vec::new();
    for &n in &sec.ns {
        let eps = sec.amplitude / n as f64;
        let lo = c_inf.mu1() - eps;
        if lo < 0.0 {
            return Err(cfg_err(format!("field `converge.amplitude` too large: c_{n} could become negative")));
        }
        let c = TimeCoefficient::from_fn(grid, |t| c_inf.eval(t) + sec.amplitude * (n as f64 * t).sin() / n as f64, lo, c_inf.mu2() + eps)
            .map_err(cfg_err)?;
        c_list.push(c);
    }
    let rep = convergence_study(&c_list, &c_inf, &s0, sigma, delta, &grid).map_err(|e| science(S, e))?;
    let d = &rep.distances;
    let monotone = d.windows(2).all(|w| w[1] <= w[0]);
    let vanishing = d.len() < 2 || d[d.len() - 1] < d[0];
    let pos: Vec<f64> = rep.ratios.iter().copied().filter(|&r| r > 0.0).collect();
    let spread = if pos.is_empty() {
        1.0
    } else {
        pos.iter().copied().fold(0.0, f64::max) / pos.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let pass = monotone && vanishing && spread < 10.0 && rep.bound_ok != Some(false);

    let reference = solve_linear(&s0, sigma, delta, &c_inf, &grid).map_err(|e| science(S, e))?;
    let table = trajectory_table(&reference, |i, _| c_inf.samples()[i], None);
    let mut study = Table::default();
    study.push("n", sec.ns.iter().map(|&n| n as f64).collect());
    study.push("distance", d.clone());
    study.push("l2_sq", rep.l2_sq.clone());
    let study_plot = Plot {
        file: "convergence.svg".into(),
        title: "sup-energy distance and |c_n - c|^2_L2".into(),
        x: "n".into(),
        ys: vec!["distance".into(), "l2_sq".into()],
        log_y: true,
    };
    let summary = json!({
        "scenario": name,
        "sigma": sigma,
        "delta": delta,
        "ns": sec.ns,
        "amplitude": sec.amplitude,
        "study": to_json(&rep),
        "monotone": monotone,
        "ratio_spread": spread,
        "pass": pass,
    });
    Ok(Outcome { summary, table, plots: energy_plots(false), extra_plots: vec![(study, study_plot)], pass })
}

fn modulus_lab(cfg: &RunConfig) -> Result<Outcome, Failure> {
    const S: Scenario = Scenario::ModulusLab;
    let name = S.name();
    let sec = &cfg.modulus_lab;
    let w = sec
        .modulus
        .as_ref()
        .ok_or_else(|| cfg_err("missing field `modulus_lab.modulus` (required by modulus-lab)"))?
        .build::<f64>()
        .map_err(|e| cfg_err(format!("modulus_lab.modulus: {e}")))?;
    let xs = default_grid::<f64>();
    let laws = verify_modulus(&w, &xs);
    let mut pass = laws.ok;
    let mut summary = json!({ "scenario": name, "modulus": to_json(w.kind()), "laws": to_json(&laws) });

    let mut table = Table::default();
    table.push("x", xs.clone());
    table.push("omega", xs.iter().map(|&x| w.eval(x)).collect());
    table.push("x_over_omega", xs.iter().map(|&x| x / w.eval(x)).collect());
    let mut ys = vec!["omega".to_string(), "x_over_omega".into()];

    if let Some(inner) = &sec.inner {
        let inner = inner.build::<f64>().map_err(|e| cfg_err(format!("modulus_lab.inner: {e}")))?;
        let comp = compose(&w, &inner);
        let check = verify_modulus(&comp, &xs);
        pass &= check.ok;
        table.push("composed", xs.iter().map(|&x| comp.eval(x)).collect());
        ys.push("composed".into());
        summary["composition"] = to_json(&check);
    }
    if let Some(sigma) = cfg.sigma {
        let li = lambda_infinity(&w, sigma, &limsup_grid(), LimsupOptions::default());
        summary["lambda_infinity"] = to_json(&li);
        if let (Some(delta), Some(mu1)) = (cfg.delta, sec.mu1) {
            if sigma <= 0.5 {
                let cap = sec.lambda_cap.unwrap_or(DEFAULT_LAMBDA_CAP);
                match find_nu_subcritical(delta, mu1, &w, sigma, cap) {
                    Ok(r) => summary["threshold"] = to_json(&r),
                    Err(e) => {
                        pass = false;
                        summary["threshold"] = json!({ "error": e.to_string() });
                    }
                }
            }
        }
    }
    if let (Some(_), Some(_), Some(alpha)) = (&cfg.grid, &cfg.data, cfg.alpha) {
        let mg = cfg.grid(name).map_err(cfg_err)?;
        let s = cfg.data(&mg, name).map_err(cfg_err)?;
        let cert = customized_modulus(&s, alpha).map_err(cfg_err)?;
        pass &= cert.checks.all() && cert.laws.ok;
        table.push("omega_d", xs.iter().map(|&x| cert.modulus.eval(x)).collect());
        ys.push("omega_d".into());
        summary["customized"] = to_json(&cert);
    }
    if let Some(spec) = &cfg.coefficient {
        let grid = time_grid(cfg, name)?;
        let c = spec.build::<f64>(grid, cfg.seed).map_err(|e| cfg_err(format!("coefficient: {e}")))?;
        let k = modulus_constant_estimate(&grid.times(), c.samples(), &w).map_err(|e| science(S, e))?;
        pass &= k <= 1.0 + 1e-9;
        summary["coefficient_constant"] = json!(k);
    }
    summary["pass"] = json!(pass);
    let plots = vec![Plot { file: "modulus.svg".into(), title: "Modulus".into(), x: "x".into(), ys, log_y: true }];
    Ok(Outcome { summary, table, plots, extra_plots: vec![], pass })
}

fn regime(cfg: &RunConfig) -> Result<Outcome, Failure> {
    const S: Scenario = Scenario::RegimeMap;
    let sigma = cfg.sigma(S.name()).map_err(cfg_err)?;
    let sec = &cfg.regime_map;
    let map = regime_map(sigma, sec.resolution, sec.evidence).map_err(cfg_err)?;
    let mismatches = map
        .cells
        .iter()
        .filter(|c| match (c.class, c.evidence) {
            (Classification::Covered, Some(e)) => !e,
            (Classification::Uncovered, Some(e)) => e,
            _ => false,
        })
        .count();
    let pass = mismatches == 0;
    let code = |c: Classification| match c {
        Classification::Covered => 1.0,
        Classification::Boundary => 0.5,
        Classification::Uncovered => 0.0,
    };
    let mut table = Table::default();
    table.push("beta", map.cells.iter().map(|c| c.beta).collect());
    table.push("alpha", map.cells.iter().map(|c| c.alpha).collect());
    table.push("class", map.cells.iter().map(|c| code(c.class)).collect());

    let mut curve = Table::default();
    let betas: Vec<f64> = (1..=200).map(|i| i as f64 / 200.0).collect();
    curve.push("beta", betas.clone());
    curve.push("alpha_boundary", betas.iter().map(|&b| ((1.0 - 2.0 * sigma) / (4.0 * b)).min(0.25)).collect());
    let plot = Plot {
        file: "regime.svg".into(),
        title: format!("alpha = (1 - 2 sigma)/(4 beta), sigma = {sigma}"),
        x: "beta".into(),
        ys: vec!["alpha_boundary".into()],
        log_y: false,
    };
    let summary = json!({
        "scenario": S.name(),
        "sigma": sigma,
        "resolution": sec.resolution,
        "covered": map.count(Classification::Covered),
        "uncovered": map.count(Classification::Uncovered),
        "boundary": map.count(Classification::Boundary),
        "evidence_mismatches": sec.evidence.then_some(mismatches),
        "cells": to_json(&map.cells),
        "pass": pass,
    });
    Ok(Outcome { summary, table, plots: vec![], extra_plots: vec![(curve, plot)], pass })
}

fn continuation(cfg: &RunConfig) -> Result<Outcome, Failure> {
    const S: Scenario = Scenario::Continue;
    let name = S.name();
    let p = problem(cfg, name)?;
    let sec = &cfg.continuation;
    let d = ContinuationConfig::default();
    let cc = ContinuationConfig {
        chunk: sec.chunk.unwrap_or(d.chunk),
        max_t: cfg.t_end(name).map_err(cfg_err)?,
        step: cfg.step(name).map_err(cfg_err)?,
        fixed_point: FixedPointConfig { max_iter: cfg.solver.max_iter, tol: cfg.solver.tol, relaxation: cfg.solver.relaxation },
        blowup_factor: sec.blowup_factor.unwrap_or(d.blowup_factor),
        growth_chunks: sec.growth_chunks.unwrap_or(d.growth_chunks),
        keep_every: sec.keep_every.unwrap_or(d.keep_every).max(1),
        k2: sec.k2,
    };
    let r = continue_solution(&p, &cc).map_err(|e| science(S, e))?;
    let alpha = p.alpha().unwrap_or(0.0);
    let omega_d = customized_modulus(p.initial(), alpha).map_err(|e| science(S, e))?.modulus;
    let smallness = if p.regime() == Regime::Subcritical {
        Some(smallness_constants(&p, &omega_d, sec.k2.or(r.constants.k2)).map_err(|e| science(S, e))?)
    } else {
        None
    };
    let max_sn = r.max_seminorm_sq.unwrap_or(0.0);
    let bounded = match &smallness {
        Some(sm) if sm.eps1_ok => max_sn <= 2.0 * sm.l1,
        _ => true,
    };
    let pass = r.blow_up.is_none() && bounded;

    let m = p.nonlinearity();
    let pot = r.trajectory.potential_series();
    let mut table = trajectory_table(&r.trajectory, |i, _| m.eval(pot[i]), Some(m));
    table.push("seminorm_sq", r.trajectory.states().iter().map(|s| seminorm_sq(s, &omega_d)).collect());
    let mut plots = energy_plots(true);
    plots.push(Plot {
        file: "seminorm.svg".into(),
        title: "||(u, u')||^2 in V_omega_d".into(),
        x: "t".into(),
        ys: vec!["seminorm_sq".into()],
        log_y: true,
    });
    let summary = json!({
        "scenario": name,
        "regime": p.regime(),
        "alpha": p.alpha(),
        "config": to_json(&cc),
        "report": to_json(&r.summary()),
        "smallness": smallness.as_ref().map(to_json),
        "seminorm_bounded": bounded,
        "pass": pass,
    });
    Ok(Outcome { summary, table, plots, extra_plots: vec![], pass })
}
