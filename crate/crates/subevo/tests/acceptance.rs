//! Acceptance suite: one test per gating criterion, each printing a
//! PASS/FAIL line (run with `-- --nocapture` to see them). Tolerances are
//! pinned in code; shared computations are cached across criteria.
//!
//! Three outcomes are expected to stay red on current evidence, all analyzed
//! in the project notes: the logistic combo (delta=10, nu=2, q=0.3) lies
//! beyond the MLE existence boundary (the solver correctly reports a regime
//! failure there); the plug-in estimators at q = 0.4 carry a finite-sample
//! upward bias of ~7-11% at (n, p) = (1000, 200), shrinking to ~2% at
//! (4000, 800), so the stated tolerance is unattainable at the stated scale;
//! and the logistic risk curve at (delta=25, nu=0.1) is monotone rather than
//! U-shaped.

use std::sync::OnceLock;
use std::time::Instant;

use ndarray::Array1;
use rand::Rng;
use subevo::data::{DataModel, DesignLaw, NoiseLaw};
use subevo::estimate::{eta_sigma2_hat, fit_mestimator, gamma_hat, sigma2_hat};
use subevo::loss::LossModel;
use subevo::quad::QuadratureSpec;
use subevo::rng::{derive_rng, standard_normal, uniform_open01};
use subevo::sim::{bivariate_prox_diagnostic, draw_subsets, run_bagging_experiment, run_pair_experiment};
use subevo::state::{EtaForm, EtaSolution, RegimeParams, StateEvolution, StateSolution};

fn report(line: &str) {
    println!("{line}");
}

fn robust_params(q: f64, scale: f64, loss: LossModel) -> RegimeParams {
    let noise = NoiseLaw::student_t(2.0, scale).unwrap();
    RegimeParams {
        delta: 5.0,
        q,
        model: DataModel::robust_zero(noise, DesignLaw::Gaussian, 1).unwrap(),
        loss,
        quad: QuadratureSpec::default(),
    }
}

fn logistic_params(delta: f64, q: f64, nu: f64) -> RegimeParams {
    RegimeParams {
        delta,
        q,
        model: DataModel::logistic(nu, DesignLaw::Gaussian, 1).unwrap(),
        loss: LossModel::logistic(),
        quad: QuadratureSpec::default(),
    }
}

struct SolvedConfig {
    label: String,
    q: f64,
    engine: StateEvolution,
    state: Option<StateSolution>,
    eta: Option<EtaSolution>,
    error: Option<String>,
}

struct ContractionTable {
    configs: Vec<SolvedConfig>,
    elapsed_s: f64,
}

fn contraction_table() -> &'static ContractionTable {
    static TABLE: OnceLock<ContractionTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let t0 = Instant::now();
        let mut configs = Vec::new();
        for (loss, lname) in [
            (LossModel::huber(), "huber"),
            (LossModel::pseudo_huber(), "pseudo-huber"),
        ] {
            for scale in [1.0, 3.0, 10.0] {
                for q in [0.3, 0.6, 0.9] {
                    let params = robust_params(q, scale, loss);
                    configs.push(solve_config(
                        format!("{lname} scale={scale} q={q}"),
                        params,
                    ));
                }
            }
        }
        for nu in [1.0, 2.0] {
            for q in [0.3, 0.6, 0.9] {
                let params = logistic_params(10.0, q, nu);
                configs.push(solve_config(format!("logistic nu={nu} q={q}"), params));
            }
        }
        ContractionTable {
            configs,
            elapsed_s: t0.elapsed().as_secs_f64(),
        }
    })
}

fn solve_config(label: String, params: RegimeParams) -> SolvedConfig {
    let q = params.q;
    let engine = StateEvolution::new(params).expect("valid params");
    match engine.solve_system() {
        Ok(state) => match engine.solve_eta(&state) {
            Ok(eta) => SolvedConfig {
                label,
                q,
                engine,
                state: Some(state),
                eta: Some(eta),
                error: None,
            },
            Err(e) => SolvedConfig {
                label,
                q,
                engine,
                state: Some(state),
                eta: None,
                error: Some(e.to_string()),
            },
        },
        Err(e) => SolvedConfig {
            label,
            q,
            engine,
            state: None,
            eta: None,
            error: Some(e.to_string()),
        },
    }
}

/// Fixed-point contraction suite over every feasible listed configuration.
#[test]
fn c01_fixed_point_contraction() {
    let table = contraction_table();
    let mut failures = Vec::new();
    let mut rng = derive_rng(910, 0);
    for cfg in &table.configs {
        // the (nu=2, q=0.3) combo sits beyond the existence boundary and is
        // covered by c01_infeasible_logistic_combo
        if cfg.label == "logistic nu=2 q=0.3" {
            continue;
        }
        let Some(state) = &cfg.state else {
            failures.push(format!("{}: {}", cfg.label, cfg.error.as_deref().unwrap_or("?")));
            continue;
        };
        let q = cfg.q;
        let f1 = cfg.engine.eval_f(state, 1.0).unwrap();
        if (f1 - q).abs() > 1e-9 {
            failures.push(format!("{}: F(1)-q = {:.2e}", cfg.label, f1 - q));
        }
        // monotone on a grid
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=20 {
            let t = q * k as f64 / 20.0;
            let f = cfg.engine.eval_f(state, t).unwrap();
            if f < prev - 1e-12 {
                failures.push(format!("{}: F decreasing at t={t}", cfg.label));
            }
            prev = f;
        }
        // q-Lipschitz on random pairs
        for _ in 0..20 {
            let t1 = q * rng.gen::<f64>();
            let t2 = q * rng.gen::<f64>();
            let f1 = cfg.engine.eval_f(state, t1).unwrap();
            let f2 = cfg.engine.eval_f(state, t2).unwrap();
            if (f1 - f2).abs() > (q + 1e-6) * (t1 - t2).abs() {
                failures.push(format!("{}: Lipschitz violated at ({t1:.4},{t2:.4})", cfg.label));
            }
        }
        match &cfg.eta {
            Some(eta) => {
                if !(0.0..=q + 1e-10).contains(&eta.eta) {
                    failures.push(format!("{}: eta {} outside [0, q]", cfg.label, eta.eta));
                }
                if eta.fixed_point_residual > 1e-10 {
                    failures.push(format!(
                        "{}: fixed-point residual {:.2e}",
                        cfg.label, eta.fixed_point_residual
                    ));
                }
            }
            None => failures.push(format!("{}: eta not solved", cfg.label)),
        }
    }
    let runtime_ok = table.elapsed_s < 60.0;
    if !runtime_ok {
        failures.push(format!("runtime {:.1}s exceeds 60s", table.elapsed_s));
    }
    let ok = failures.is_empty();
    report(&format!(
        "acceptance 01 fixed-point contraction: {} ({} configs, solve+eta in {:.1}s)",
        if ok { "PASS" } else { "FAIL" },
        table.configs.len() - 1,
        table.elapsed_s
    ));
    assert!(ok, "{failures:?}");
}

/// The listed logistic combo at delta*q = 3, nu = 2 has no solution: the
/// deterministic system sits beyond the existence boundary (~3.22), confirmed
/// by direct simulation. Kept faithful to the stated grid, hence red.
#[test]
fn c01_infeasible_logistic_combo() {
    let table = contraction_table();
    let cfg = table
        .configs
        .iter()
        .find(|c| c.label == "logistic nu=2 q=0.3")
        .unwrap();
    let solved = cfg.state.is_some() && cfg.eta.is_some();
    report(&format!(
        "acceptance 01 (nu=2, q=0.3 combo): {} ({})",
        if solved { "PASS" } else { "FAIL" },
        cfg.error.as_deref().unwrap_or("solved"),
    ));
    assert!(
        solved,
        "delta*q = 3 lies beyond the logistic existence boundary; solver reports: {}",
        cfg.error.as_deref().unwrap_or("")
    );
}

struct McPoint {
    label: &'static str,
    params: RegimeParams,
    a: f64,
    sigma: f64,
    gamma: f64,
    t: f64,
}

/// Quadrature vs 10^7-draw Monte Carlo on every deterministic-system
/// integrand at fixed random-ish parameter points.
#[test]
fn c02_quadrature_vs_monte_carlo() {
    let t0 = Instant::now();
    let points = [
        McPoint {
            label: "huber scale3",
            params: robust_params(0.5, 3.0, LossModel::huber()),
            a: 0.0,
            sigma: 2.1,
            gamma: 1.3,
            t: 0.45,
        },
        McPoint {
            label: "huber scale1",
            params: robust_params(0.5, 1.0, LossModel::huber()),
            a: 0.0,
            sigma: 0.9,
            gamma: 0.5,
            t: 0.8,
        },
        McPoint {
            label: "pseudo-huber scale3",
            params: robust_params(0.5, 3.0, LossModel::pseudo_huber()),
            a: 0.0,
            sigma: 3.4,
            gamma: 2.5,
            t: 0.3,
        },
        McPoint {
            label: "logistic nu1",
            params: logistic_params(10.0, 0.5, 1.0),
            a: 1.2,
            sigma: 0.85,
            gamma: 0.62,
            t: 0.55,
        },
        McPoint {
            label: "logistic nu2",
            params: logistic_params(10.0, 0.5, 2.0),
            a: 2.6,
            sigma: 1.1,
            gamma: 0.95,
            t: 0.7,
        },
    ];
    let n = 10_000_000usize;
    let mut failures = Vec::new();
    for (k, pt) in points.iter().enumerate() {
        let engine = StateEvolution::new(pt.params.clone()).unwrap();
        let dq = pt.params.delta * pt.params.q;
        let [r1, r2, r3] = engine.residuals(pt.a, pt.sigma, pt.gamma);
        let quad_h2 = (r1 + 1.0) * pt.sigma * pt.sigma / dq;
        let quad_uh = r2 * pt.gamma;
        let quad_gp = (r3 + 1.0 - 1.0 / dq) * pt.sigma;
        let state = StateSolution {
            a: pt.a,
            sigma: pt.sigma,
            gamma: pt.gamma,
            residual_norm: 0.0,
            iterations: 0,
        };
        let quad_pair = engine.eval_f(&state, pt.t).unwrap() * pt.sigma * pt.sigma
            / (pt.params.q * pt.params.q * pt.params.delta);

        // shared-draw Monte Carlo of all four integrands
        let loss = &pt.params.loss;
        let robust = pt.params.model.is_robust();
        let noise = NoiseLaw::student_t(2.0, if pt.label.contains("scale3") { 3.0 } else { 1.0 }).unwrap();
        let nu = if pt.label.ends_with("nu2") { 2.0 } else { 1.0 };
        let mut rng = derive_rng(2024, k as u64);
        let mut acc = [0.0f64; 4];
        let mut acc2 = [0.0f64; 4];
        let s_t = (1.0 - pt.t * pt.t).sqrt();
        for _ in 0..n {
            let (y, u) = if robust {
                (noise.sample(&mut rng), 0.0)
            } else {
                let u = standard_normal(&mut rng);
                let p1 = 1.0 / (1.0 + (-nu * u).exp());
                let y = if uniform_open01(&mut rng) < p1 { 1.0 } else { 0.0 };
                (y, u)
            };
            let g = standard_normal(&mut rng);
            let z = standard_normal(&mut rng);
            let gt = pt.t * g + s_t * z;
            let arg = pt.a * u + pt.sigma * g;
            let p = loss.prox(y, pt.gamma, arg).unwrap();
            let h = arg - p;
            let argt = pt.a * u + pt.sigma * gt;
            let pt2 = loss.prox(y, pt.gamma, argt).unwrap();
            let ht = argt - pt2;
            let vals = [h * h, u * h, g * p, h * ht];
            for (i, v) in vals.into_iter().enumerate() {
                acc[i] += v;
                acc2[i] += v * v;
            }
        }
        let quads = [quad_h2, quad_uh, quad_gp, quad_pair];
        let names = ["E[h^2]", "E[U h]", "E[G prox]", "pair"];
        for i in 0..4 {
            let mean = acc[i] / n as f64;
            let var = acc2[i] / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            let diff = (quads[i] - mean).abs();
            if diff > 3.0 * se {
                failures.push(format!(
                    "{} {}: quad {:.6} vs mc {:.6} ({:.1} se)",
                    pt.label,
                    names[i],
                    quads[i],
                    mean,
                    diff / se
                ));
            }
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let runtime_ok = elapsed < 120.0;
    let ok = failures.is_empty() && runtime_ok;
    report(&format!(
        "acceptance 02 quadrature vs monte carlo: {} ({} points x 4 integrands, {:.1}s)",
        if ok { "PASS" } else { "FAIL" },
        points.len(),
        elapsed
    ));
    assert!(runtime_ok, "runtime {elapsed:.1}s exceeds 120s");
    assert!(failures.is_empty(), "{failures:?}");
}

/// System self-consistency and the robust/logistic path unification identity.
#[test]
fn c03_system_self_consistency() {
    let table = contraction_table();
    let mut failures = Vec::new();
    let mut checked = 0;
    for cfg in &table.configs {
        let Some(state) = &cfg.state else { continue };
        checked += 1;
        let res = cfg.engine.residuals(state.a, state.sigma, state.gamma);
        for v in res {
            if v.abs() > 1e-9 {
                failures.push(format!("{}: residual {v:.2e}", cfg.label));
            }
        }
        for t in [0.3, 0.9] {
            let fa = cfg.engine.eval_f_form(state, t, EtaForm::ProxDifference).unwrap();
            let fb = cfg.engine.eval_f_form(state, t, EtaForm::ScoreProduct).unwrap();
            if (fa - fb).abs() > 1e-9 {
                failures.push(format!(
                    "{}: form mismatch {:.2e} at t={t}",
                    cfg.label,
                    fa - fb
                ));
            }
        }
    }
    let ok = failures.is_empty();
    report(&format!(
        "acceptance 03 system self-consistency: {} ({checked} solved configs)",
        if ok { "PASS" } else { "FAIL" }
    ));
    assert!(ok, "{failures:?}");
}

/// Single-estimator convergence at q = 1: squared risk and mean squared
/// score against their deterministic limits.
#[test]
fn c04_single_estimator_convergence() {
    let t0 = Instant::now();
    let params = robust_params(1.0, 3.0, LossModel::huber());
    let engine = StateEvolution::new(params).unwrap();
    let st = engine.solve_system().unwrap();
    let sigma2 = st.sigma * st.sigma;
    let psi2_target = sigma2 / (st.gamma * st.gamma * 5.0);

    let (n, p, reps) = (2000, 400, 50);
    let noise = NoiseLaw::student_t(2.0, 3.0).unwrap();
    let beta_star = Array1::from((0..p).map(|j| match j % 3 {
        0 => 0.7,
        1 => -0.7,
        _ => 0.0,
    }).collect::<Vec<_>>());
    let model = DataModel::robust(noise, DesignLaw::Gaussian, beta_star.clone()).unwrap();
    let loss = LossModel::huber();
    let subset: Vec<usize> = (0..n).collect();
    let mut risks = Vec::new();
    let mut psi2s = Vec::new();
    for rep in 0..reps {
        let (x, y) = model.sample_dataset(n, p, 40_000 + rep).unwrap();
        let fit = fit_mestimator(&x, &y, &subset, &loss).unwrap();
        let d = &fit.beta_hat - &beta_star;
        risks.push(d.dot(&d));
        psi2s.push(fit.psi.dot(&fit.psi) / n as f64);
    }
    let mean_risk = risks.iter().sum::<f64>() / reps as f64;
    let mean_psi2 = psi2s.iter().sum::<f64>() / reps as f64;
    let rel_risk = (mean_risk - sigma2).abs() / sigma2;
    let rel_psi2 = (mean_psi2 - psi2_target).abs() / psi2_target;
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = rel_risk <= 0.05 && rel_psi2 <= 0.05 && elapsed < 300.0;
    report(&format!(
        "acceptance 04 single-estimator convergence: {} (risk {:.4} vs {:.4} [{:.1}%], psi2 {:.4} vs {:.4} [{:.1}%], {:.0}s)",
        if ok { "PASS" } else { "FAIL" },
        mean_risk,
        sigma2,
        100.0 * rel_risk,
        mean_psi2,
        psi2_target,
        100.0 * rel_psi2,
        elapsed
    ));
    assert!(elapsed < 300.0, "runtime {elapsed:.0}s");
    assert!(rel_risk <= 0.05, "risk off by {:.2}%", 100.0 * rel_risk);
    assert!(rel_psi2 <= 0.05, "psi2 off by {:.2}%", 100.0 * rel_psi2);
}

struct PairRun {
    q: f64,
    eta: f64,
    sigma2: f64,
    exp: subevo::sim::PairExperiment,
}

struct PairTable {
    runs: Vec<PairRun>,
    elapsed_s: f64,
}

fn pair_table() -> &'static PairTable {
    static TABLE: OnceLock<PairTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let t0 = Instant::now();
        let (n, p, reps) = (1000, 200, 100);
        let noise = NoiseLaw::student_t(2.0, 3.0).unwrap();
        let model = DataModel::robust_zero(noise, DesignLaw::Gaussian, p).unwrap();
        let loss = LossModel::huber();
        let mut runs = Vec::new();
        for (i, q) in [0.4, 0.6, 0.8].into_iter().enumerate() {
            let params = robust_params(q, 3.0, loss);
            let engine = StateEvolution::new(params).unwrap();
            let st = engine.solve_system().unwrap();
            let eta = engine.solve_eta(&st).unwrap();
            let exp =
                run_pair_experiment(&model, &loss, n, p, q, reps, 5000 + i as u64).unwrap();
            runs.push(PairRun {
                q,
                eta: eta.eta,
                sigma2: st.sigma * st.sigma,
                exp,
            });
        }
        PairTable {
            runs,
            elapsed_s: t0.elapsed().as_secs_f64(),
        }
    })
}

/// Pair correlation against the fixed point eta across subsample fractions.
#[test]
fn c05_pair_correlation() {
    let table = pair_table();
    let mut failures = Vec::new();
    for run in &table.runs {
        let gap = (run.exp.summary.corr.mean - run.eta).abs();
        if gap > 0.05 {
            failures.push(format!(
                "q={}: corr {:.4} vs eta {:.4} (gap {:.4})",
                run.q, run.exp.summary.corr.mean, run.eta, gap
            ));
        }
        if run.exp.summary.completed == 0 {
            failures.push(format!("q={}: no completed reps", run.q));
        }
    }
    let runtime_ok = table.elapsed_s < 600.0;
    let ok = failures.is_empty() && runtime_ok;
    report(&format!(
        "acceptance 05 pair correlation: {} ({} q-points, {:.0}s)",
        if ok { "PASS" } else { "FAIL" },
        table.runs.len(),
        table.elapsed_s
    ));
    assert!(runtime_ok, "runtime {:.0}s exceeds 600s", table.elapsed_s);
    assert!(failures.is_empty(), "{failures:?}");
}

/// Plug-in estimators on the same runs (the q = 0.4 point is covered by
/// c06_plug_in_estimators_small_q).
#[test]
fn c06_plug_in_estimators() {
    let table = pair_table();
    let mut failures = Vec::new();
    for run in table.runs.iter().filter(|r| r.q > 0.5) {
        let eta_sigma2 = run.eta * run.sigma2;
        let rel_pair = (run.exp.summary.est_eta_sigma2.mean - eta_sigma2).abs() / eta_sigma2;
        let rel_s2 = (run.exp.summary.est_sigma2.mean - run.sigma2).abs() / run.sigma2;
        if rel_pair > 0.07 {
            failures.push(format!(
                "q={}: est eta*sigma2 {:.4} vs {:.4} ({:.1}%)",
                run.q,
                run.exp.summary.est_eta_sigma2.mean,
                eta_sigma2,
                100.0 * rel_pair
            ));
        }
        if rel_s2 > 0.05 {
            failures.push(format!(
                "q={}: est sigma2 {:.4} vs {:.4} ({:.1}%)",
                run.q,
                run.exp.summary.est_sigma2.mean,
                run.sigma2,
                100.0 * rel_s2
            ));
        }
    }
    let ok = failures.is_empty();
    report(&format!(
        "acceptance 06 plug-in estimators: {} (q in {{0.6, 0.8}})",
        if ok { "PASS" } else { "FAIL" }
    ));
    assert!(ok, "{failures:?}");
}

/// The q = 0.4 point at the stated (1000, 200) scale: the plug-ins carry a
/// finite-sample upward bias (~7-11% here, ~2% at (4000, 800)), so the
/// stated tolerances fail; kept faithful and red (see the analysis notes).
#[test]
fn c06_plug_in_estimators_small_q() {
    let table = pair_table();
    let run = table.runs.iter().find(|r| r.q == 0.4).unwrap();
    let eta_sigma2 = run.eta * run.sigma2;
    let rel_pair = (run.exp.summary.est_eta_sigma2.mean - eta_sigma2).abs() / eta_sigma2;
    let rel_s2 = (run.exp.summary.est_sigma2.mean - run.sigma2).abs() / run.sigma2;
    let ok = rel_pair <= 0.07 && rel_s2 <= 0.05;
    report(&format!(
        "acceptance 06 (q=0.4): {} (est eta*sigma2 off {:.1}%, est sigma2 off {:.1}%)",
        if ok { "PASS" } else { "FAIL" },
        100.0 * rel_pair,
        100.0 * rel_s2
    ));
    assert!(
        ok,
        "plug-in finite-sample bias at |I|/p = 2: eta*sigma2 {:.1}%, sigma2 {:.1}%",
        100.0 * rel_pair,
        100.0 * rel_s2
    );
}

/// Logistic pair suite: projected correlation and separation-failure rate.
#[test]
fn c07_logistic_pair_suite() {
    let (n, p, reps) = (2000, 200, 100);
    let model = DataModel::logistic(1.0, DesignLaw::Gaussian, p).unwrap();
    let loss = LossModel::logistic();
    let mut failures = Vec::new();
    for (i, q) in [0.5, 0.8].into_iter().enumerate() {
        let params = logistic_params(10.0, q, 1.0);
        let engine = StateEvolution::new(params).unwrap();
        let st = engine.solve_system().unwrap();
        let eta = engine.solve_eta(&st).unwrap().eta;
        let exp = run_pair_experiment(&model, &loss, n, p, q, reps, 7000 + i as u64).unwrap();
        let gap = (exp.summary.corr.mean - eta).abs();
        if gap > 0.05 {
            failures.push(format!(
                "q={q}: corr {:.4} vs eta {:.4}",
                exp.summary.corr.mean, eta
            ));
        }
        let sep_rate = exp.summary.failed as f64 / reps as f64;
        if sep_rate >= 0.05 {
            failures.push(format!("q={q}: separation rate {:.1}%", 100.0 * sep_rate));
        }
    }
    let ok = failures.is_empty();
    report(&format!(
        "acceptance 07 logistic pair suite: {} (q in {{0.5, 0.8}})",
        if ok { "PASS" } else { "FAIL" }
    ));
    assert!(ok, "{failures:?}");
}

/// Bagged-ensemble risk against its deterministic limit, and the exact
/// per-replication risk decomposition.
#[test]
fn c08_bagging_limit() {
    let q = 0.6; // interior of the heavy-noise dip
    let params = robust_params(q, 10.0, LossModel::huber());
    let engine = StateEvolution::new(params).unwrap();
    let st = engine.solve_system().unwrap();
    let eta = engine.solve_eta(&st).unwrap().eta;
    let sigma2 = st.sigma * st.sigma;
    let m = 10;
    let limit = subevo::state::bagged_risk_limit(eta, sigma2, m).unwrap();

    let (n, p, reps) = (2000, 400, 30);
    let noise = NoiseLaw::student_t(2.0, 10.0).unwrap();
    let model = DataModel::robust_zero(noise, DesignLaw::Gaussian, p).unwrap();
    let exp = run_bagging_experiment(&model, &LossModel::huber(), n, p, q, m, reps, 808).unwrap();
    let mut failures = Vec::new();
    for (i, rec) in exp.records.iter().enumerate() {
        if rec.decomposition_gap > 1e-10 {
            failures.push(format!("rep {i}: decomposition gap {:.2e}", rec.decomposition_gap));
        }
    }
    let rel = (exp.summary.bagged_risk.mean - limit).abs() / limit;
    if rel > 0.10 {
        failures.push(format!(
            "mean bagged risk {:.3} vs limit {:.3} ({:.1}%)",
            exp.summary.bagged_risk.mean,
            limit,
            100.0 * rel
        ));
    }
    let ok = failures.is_empty();
    report(&format!(
        "acceptance 08 bagging limit: {} (risk {:.3} vs {:.3}, {} reps)",
        if ok { "PASS" } else { "FAIL" },
        exp.summary.bagged_risk.mean,
        limit,
        exp.summary.completed
    ));
    assert!(ok, "{failures:?}");
}

fn risk_curve_values(params: &RegimeParams, qs: &[f64]) -> Vec<(f64, f64)> {
    subevo::state::risk_curve(params, qs)
        .into_iter()
        .filter_map(|row| row.outcome.ok().map(|pt| (row.q, pt.eta_sigma2)))
        .collect()
}

/// Heavy-noise robust risk curve has an interior minimum strictly below q=1.
#[test]
fn c09a_robust_u_shape() {
    let t0 = Instant::now();
    let params = robust_params(1.0, 10.0, LossModel::huber());
    let qs: Vec<f64> = (3..=10).map(|k| k as f64 / 10.0).collect();
    let curve = risk_curve_values(&params, &qs);
    let (q_min, v_min) = curve
        .iter()
        .copied()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    let v_end = curve.last().unwrap().1;
    let interior = q_min > qs[0] && q_min < 1.0 && v_min < v_end;
    let elapsed = t0.elapsed().as_secs_f64();
    report(&format!(
        "acceptance 09a robust u-shape: {} (min {:.2} at q={q_min}, q=1 value {:.2}, {:.0}s)",
        if interior { "PASS" } else { "FAIL" },
        v_min,
        v_end,
        elapsed
    ));
    assert!(interior, "curve {curve:?}");
}

/// Small-signal, large-aspect logistic risk curve: asserted U-shaped per the
/// stated criterion; the validated theory is monotone here, so this stays
/// red (see the analysis notes).
#[test]
fn c09b_logistic_small_signal_u_shape() {
    let params = logistic_params(25.0, 1.0, 0.1);
    let qs: Vec<f64> = (3..=20).map(|k| k as f64 / 20.0).collect();
    let curve = risk_curve_values(&params, &qs);
    let (q_min, v_min) = curve
        .iter()
        .copied()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    let interior = q_min > qs[0] + 1e-9 && q_min < 1.0 - 1e-9;
    report(&format!(
        "acceptance 09b logistic small-signal u-shape: {} (min {:.4} at q={q_min}; curve is monotone decreasing in q)",
        if interior { "PASS" } else { "FAIL" },
        v_min
    ));
    assert!(
        interior,
        "no interior minimum: sigma2*eta decreases monotonically to q=1 (min at q={q_min}); \
         validated against direct pair simulation at (delta=25, nu=0.1, q=0.5)"
    );
}

/// Moderate-signal logistic risk curves are monotone.
#[test]
fn c09c_logistic_monotone() {
    let t0 = Instant::now();
    let mut failures = Vec::new();
    for nu in [1.0, 2.0] {
        let params = logistic_params(10.0, 1.0, nu);
        let qs: Vec<f64> = (4..=10).map(|k| k as f64 / 10.0).collect();
        let curve = risk_curve_values(&params, &qs);
        let monotone = curve.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9)
            || curve.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-9);
        if !monotone {
            failures.push(format!("nu={nu}: {curve:?}"));
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = failures.is_empty();
    report(&format!(
        "acceptance 09c logistic monotone risk: {} ({:.0}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed
    ));
    assert!(ok, "{failures:?}");
}

/// Bivariate prox diagnostic: in-overlap predicted pairs against the
/// eta-correlated prox reference construction.
#[test]
fn c10_bivariate_prox_diagnostic() {
    let t0 = Instant::now();
    let (n, p, q) = (5000, 1000, 0.6);
    let noise = NoiseLaw::student_t(2.0, 3.0).unwrap();
    let model = DataModel::robust_zero(noise, DesignLaw::Gaussian, p).unwrap();
    let report_data = bivariate_prox_diagnostic(
        &model,
        &LossModel::huber(),
        n,
        p,
        q,
        QuadratureSpec::default(),
        31337,
    )
    .unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = report_data.ks_marginal_a <= 0.05
        && report_data.ks_marginal_b <= 0.05
        && report_data.corr_gap <= 0.05
        && elapsed < 180.0;
    report(&format!(
        "acceptance 10 bivariate prox diagnostic: {} (KS {:.4}/{:.4}, corr gap {:.4}, overlap {}, {:.0}s)",
        if ok { "PASS" } else { "FAIL" },
        report_data.ks_marginal_a,
        report_data.ks_marginal_b,
        report_data.corr_gap,
        report_data.overlap,
        elapsed
    ));
    assert!(elapsed < 180.0, "runtime {elapsed:.0}s");
    assert!(
        report_data.ks_marginal_a <= 0.05 && report_data.ks_marginal_b <= 0.05,
        "KS {:.4}/{:.4}",
        report_data.ks_marginal_a,
        report_data.ks_marginal_b
    );
    assert!(report_data.corr_gap <= 0.05, "corr gap {:.4}", report_data.corr_gap);
}

/// Exchangeability sanity at q = 1: the two fits coincide, so the two
/// empirical marginals must be indistinguishable.
#[test]
fn c10_full_overlap_exchangeability() {
    let (n, p) = (1200, 240);
    let noise = NoiseLaw::student_t(2.0, 3.0).unwrap();
    let model = DataModel::robust_zero(noise, DesignLaw::Gaussian, p).unwrap();
    let rep = bivariate_prox_diagnostic(
        &model,
        &LossModel::huber(),
        n,
        p,
        1.0,
        QuadratureSpec::default(),
        99,
    )
    .unwrap();
    let ok = rep.ks_between_empirical <= 0.03;
    report(&format!(
        "acceptance 10 (q=1 exchangeability): {} (KS between marginals {:.4})",
        if ok { "PASS" } else { "FAIL" },
        rep.ks_between_empirical
    ));
    assert!(ok, "KS {:.4}", rep.ks_between_empirical);
}

/// Subset machinery used by every experiment: hypergeometric overlap moments.
#[test]
fn subsample_overlap_moments() {
    let n = 100;
    let draws = 20_000;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for s in 0..draws {
        let d = draw_subsets(n, 0.5, 2, 424_200 + s as u64).unwrap();
        let o = d.overlap_sizes[0][1] as f64;
        sum += o;
        sumsq += o * o;
    }
    let mean = sum / draws as f64;
    let var = sumsq / draws as f64 - mean * mean;
    let expect_var = (50.0f64 * 50.0 * 50.0 * 50.0) / (100.0 * 100.0 * 99.0);
    assert!((mean - 25.0).abs() < 0.12, "mean {mean}");
    assert!((var - expect_var).abs() < 0.05 * expect_var, "var {var}");
}

/// Estimator layer cross-check kept alongside the acceptance suite: the
/// curvature-trace gamma estimate tracks the deterministic gamma.
#[test]
fn gamma_hat_and_plug_ins_track_theory() {
    let q = 0.8;
    let params = robust_params(q, 3.0, LossModel::pseudo_huber());
    let engine = StateEvolution::new(params).unwrap();
    let st = engine.solve_system().unwrap();
    let (n, p) = (2000, 400);
    let noise = NoiseLaw::student_t(2.0, 3.0).unwrap();
    let model = DataModel::robust_zero(noise, DesignLaw::Gaussian, p).unwrap();
    let loss = LossModel::pseudo_huber();
    let (x, y) = model.sample_dataset(n, p, 606).unwrap();
    let draw = draw_subsets(n, q, 2, 607).unwrap();
    let fit_a = fit_mestimator(&x, &y, &draw.subsets[0], &loss).unwrap();
    let gh_a = gamma_hat(&x, &y, &fit_a, &loss).unwrap();
    assert!(
        (gh_a.value - st.gamma).abs() <= 0.08 * st.gamma,
        "gamma_hat {} vs {}",
        gh_a.value,
        st.gamma
    );
    let fit_b = fit_mestimator(&x, &y, &draw.subsets[1], &loss).unwrap();
    let gh_b = gamma_hat(&x, &y, &fit_b, &loss).unwrap();
    let s2 = sigma2_hat(&fit_a, &gh_a, p);
    let pair = eta_sigma2_hat(&fit_a, &gh_a, &fit_b, &gh_b, p);
    assert!(s2 > 0.0 && pair.is_finite());
}
