//! Deterministic asymptotic systems for subsample M-estimation: the
//! (sigma, gamma) system for robust regression, the (a, sigma, gamma) system
//! for logistic regression, the cross-subsample correlation fixed point eta,
//! and derived risk curves.
//!
//! Both modes share one residual map built on the prox argument
//! Z = a U + sigma G:
//!
//!   r1 = (delta q / sigma^2) E[(Z - prox(Z))^2] - 1
//!   r2 = E[U (Z - prox(Z))] / gamma            (signal-direction score; logistic only)
//!   r3 = sigma^{-1} E[G prox(Z)] - (1 - 1/(delta q))
//!
//! Robust regression is the a = 0, U = 0 case with the response marginal
//! ranging over the noise law. The correlation function
//! F(t) = (q^2 delta / sigma^2) E[h(G) h(G~)] with h = Z - prox(Z) and
//! corr(G, G~) = t is evaluated through a Hermite projection of h, which makes
//! F a power series in t with nonnegative coefficients; monotonicity and the
//! q-Lipschitz bound then hold structurally and each evaluation is cheap.

use std::sync::Mutex;

use rayon::prelude::*;

use crate::data::{DataModel, ResponseMode};
use crate::error::{Result, SubevoError};
use crate::loss::LossModel;
use crate::quad::panels::{PairSeries, PanelRule, HERMITE_ORDER};
use crate::quad::rules::gauss_legendre;
use crate::quad::{MarginalAtom, Quadrature, QuadratureSpec};

#[derive(Debug, Clone)]
pub struct RegimeParams {
    /// Oversampling ratio n/p.
    pub delta: f64,
    /// Subsample fraction in (0, 1].
    pub q: f64,
    pub model: DataModel,
    pub loss: LossModel,
    pub quad: QuadratureSpec,
}

impl RegimeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(SubevoError::Domain(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(SubevoError::Domain(format!("q must be in (0,1], got {}", self.q)));
        }
        self.quad.validate()?;
        match (&self.model.mode, &self.loss) {
            (ResponseMode::Robust(_), LossModel::RobustRho(_)) => {
                if self.q * self.delta <= 1.0 {
                    return Err(SubevoError::Domain(format!(
                        "robust mode needs q*delta > 1, got {}",
                        self.q * self.delta
                    )));
                }
            }
            (ResponseMode::Logistic { .. }, LossModel::Logistic) => {}
            _ => {
                return Err(SubevoError::Domain(
                    "loss family does not match the data model's response mode".into(),
                ))
            }
        }
        Ok(())
    }

    fn signal_norm(&self) -> f64 {
        match self.model.mode {
            ResponseMode::Logistic { signal_norm } => signal_norm,
            ResponseMode::Robust(_) => 0.0,
        }
    }

    fn is_robust(&self) -> bool {
        self.model.is_robust()
    }
}

/// Solved deterministic system. `a` is identically 0 in robust mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSolution {
    pub a: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Solved correlation fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSolution {
    pub eta: f64,
    pub fixed_point_residual: f64,
    pub iterations: usize,
}

/// Which displayed form of the pair integrand to evaluate. The two agree to
/// prox-solver tolerance through the stationarity identity
/// Z - prox(Z) = gamma * loss'(prox(Z)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaForm {
    /// (Z - prox(Z)) factors, the robust display.
    ProxDifference,
    /// gamma * loss'(prox(Z)) factors, the logistic display.
    ScoreProduct,
}

const SYSTEM_TOL: f64 = 1e-11;
const ETA_TOL: f64 = 1e-11;
const GAMMA_DIVERGENCE: f64 = 1e6;

/// Expectation engine bound to one parameter set. Caches the marginal atoms
/// and the Hermite pair series for solved states.
///
/// Robust mode integrates (noise marginal) x (composite rule in G). Logistic
/// mode rotates to the prox-argument coordinate for residuals — panels along
/// V = aU + sigma G where the loss transition lives (analyticity strip ~pi),
/// Gauss-Hermite along the orthogonal direction — because the U-marginal of
/// the unrotated integrand has strip pi/a, unresolvable at large a. The pair
/// series needs the G-separable form, so it uses an a-adaptive panel rule in
/// U instead. Both logistic paths fold the response sum into the single
/// y = 1 branch with weight 2 sigmoid(nu U), exact by the model's symmetry
/// (U, G, y) -> (-U, -G, 1-y).
pub struct StateEvolution {
    params: RegimeParams,
    atoms: Vec<MarginalAtom>,
    panel_base: (Vec<f64>, Vec<f64>),
    ortho_nodes: Vec<f64>,
    ortho_weights: Vec<f64>,
    series_cache: Mutex<Vec<(SeriesKey, PairSeries)>>,
}

type SeriesKey = (u64, u64, u64, bool);

fn series_key(state: &StateSolution, form: EtaForm) -> SeriesKey {
    (
        state.a.to_bits(),
        state.sigma.to_bits(),
        state.gamma.to_bits(),
        form == EtaForm::ScoreProduct,
    )
}

impl StateEvolution {
    pub fn new(params: RegimeParams) -> Result<Self> {
        params.validate()?;
        let atoms = if params.is_robust() {
            let quad = Quadrature::new(params.quad)?;
            quad.marginal_atoms(&params.model)?
        } else {
            Vec::new()
        };
        let nodes_per_panel = (params.quad.gh_nodes * 24).div_ceil(80).max(12);
        let panel_base = gauss_legendre(nodes_per_panel);
        let (ortho_nodes, ortho_weights) =
            crate::quad::rules::gauss_hermite_normal((params.quad.gh_nodes * 6) / 5);
        Ok(StateEvolution {
            params,
            atoms,
            panel_base,
            ortho_nodes,
            ortho_weights,
            series_cache: Mutex::new(Vec::new()),
        })
    }

    pub fn params(&self) -> &RegimeParams {
        &self.params
    }

    fn delta_q(&self) -> f64 {
        self.params.delta * self.params.q
    }

    fn panel_rule(&self, a: f64, sigma: f64, gamma: f64, atom: &MarginalAtom) -> PanelRule {
        let loss = &self.params.loss;
        let shift = a * atom.u;
        let center = (loss.prox_feature_center(atom.y) - shift) / sigma;
        let feature_scale = (1.0 + gamma) / sigma;
        let mut kinks = [0.0f64; 2];
        let mut nk = 0;
        for k in loss.prox_arg_kinks(atom.y, gamma).into_iter().flatten() {
            kinks[nk] = (k - shift) / sigma;
            nk += 1;
        }
        PanelRule::build_with_base(center, feature_scale, &kinks[..nk], &self.panel_base)
    }

    /// Residuals [r1, r2, r3] of the deterministic system at (a, sigma, gamma).
    pub fn residuals(&self, a: f64, sigma: f64, gamma: f64) -> [f64; 3] {
        if self.params.is_robust() {
            self.residuals_robust(sigma, gamma)
        } else {
            self.residuals_logistic(a, sigma, gamma)
        }
    }

    fn residuals_robust(&self, sigma: f64, gamma: f64) -> [f64; 3] {
        let dq = self.delta_q();
        let loss = &self.params.loss;
        let (mut m_h2, mut m_gp) = (0.0, 0.0);
        for atom in &self.atoms {
            let rule = self.panel_rule(0.0, sigma, gamma, atom);
            let (mut s_h2, mut s_gp) = (0.0, 0.0);
            for (&g, &w) in rule.nodes.iter().zip(&rule.weights) {
                let z = sigma * g;
                let p = loss.prox_unchecked(atom.y, gamma, z);
                let h = z - p;
                s_h2 += w * h * h;
                s_gp += w * g * p;
            }
            m_h2 += atom.weight * s_h2;
            m_gp += atom.weight * s_gp;
        }
        let r1 = dq * m_h2 / (sigma * sigma) - 1.0;
        let r3 = m_gp / sigma - (1.0 - 1.0 / dq);
        [r1, 0.0, r3]
    }

    /// Rotated-coordinate evaluation for logistic mode: V = aU + sigma G
    /// carries the prox structure (composite panels, strip ~pi), the
    /// orthogonal W direction only sees the smooth sigmoid weight
    /// (Gauss-Hermite). U = (aV + sigma r W)/r^2, G = (sigma V - a r W)/r^2.
    fn residuals_logistic(&self, a: f64, sigma: f64, gamma: f64) -> [f64; 3] {
        let dq = self.delta_q();
        let loss = &self.params.loss;
        let nu = self.params.signal_norm();
        let r = (a * a + sigma * sigma).sqrt();
        let width = (2.8 / r).min(0.75);
        let vrule = PanelRule::build_with_width(0.0, width, &[], &self.panel_base, width);
        let (mut m_h2, mut m_uh, mut m_gp) = (0.0, 0.0, 0.0);
        for (&v, &wv) in vrule.nodes.iter().zip(&vrule.weights) {
            let z = r * v;
            let p = loss.prox_unchecked(1.0, gamma, z);
            let h = z - p;
            let (mut s_w, mut s_uw, mut s_gw) = (0.0, 0.0, 0.0);
            for (&w, &ww) in self.ortho_nodes.iter().zip(&self.ortho_weights) {
                let u = (a * v + sigma * w) / r;
                let g = (sigma * v - a * w) / r;
                // single response branch with weight 2 sigmoid(nu u)
                let s = 1.0 / (1.0 + (-nu * u).exp());
                let wt = 2.0 * ww * s;
                s_w += wt;
                s_uw += wt * u;
                s_gw += wt * g;
            }
            m_h2 += wv * s_w * h * h;
            m_uh += wv * s_uw * h;
            m_gp += wv * s_gw * p;
        }
        let r1 = dq * m_h2 / (sigma * sigma) - 1.0;
        let r2 = m_uh / gamma;
        let r3 = m_gp / sigma - (1.0 - 1.0 / dq);
        [r1, r2, r3]
    }

    fn residual_vec(&self, a: f64, sigma: f64, gamma: f64, with_signal: bool) -> Vec<f64> {
        let [r1, r2, r3] = self.residuals(a, sigma, gamma);
        if with_signal {
            vec![r1, r2, r3]
        } else {
            vec![r1, r3]
        }
    }

    /// Solve the deterministic system.
    ///
    /// Damped Newton on (a, ln sigma, ln gamma) with a central finite
    /// difference Jacobian; robust mode falls back to nested bisection and
    /// logistic mode to a continuation ladder from q = 1 when Newton stalls.
    pub fn solve_system(&self) -> Result<StateSolution> {
        let nu = self.params.signal_norm();
        let with_signal = !self.params.is_robust() && nu > 0.0;
        let init = [nu / 2.0, 1.0, 1.0];
        match self.newton_solve(init, with_signal) {
            Ok(sol) => Ok(sol),
            Err(first_err) => {
                if self.params.is_robust() {
                    // retry from a noise-scale-aware start before the slow
                    // bisection (heavy noise puts the solution far from (1,1))
                    if let ResponseMode::Robust(noise) = &self.params.model.mode {
                        let s75 = noise.quantile(0.75).unwrap_or(1.0).abs().max(0.1);
                        if let Ok(sol) =
                            self.newton_solve([0.0, 2.0 * s75, 1.5 * s75], with_signal)
                        {
                            return Ok(sol);
                        }
                    }
                    self.robust_bisection_fallback()
                } else {
                    self.logistic_ladder(with_signal).map_err(|e| match e {
                        SubevoError::Regime(m) => SubevoError::Regime(m),
                        other => {
                            if matches!(first_err, SubevoError::Regime(_)) {
                                first_err
                            } else {
                                other
                            }
                        }
                    })
                }
            }
        }
    }

    fn newton_from(
        &self,
        start: [f64; 3],
        with_signal: bool,
    ) -> std::result::Result<StateSolution, (SubevoError, [f64; 3])> {
        self.newton_budgeted(start, with_signal, 200, 50)
    }

    fn newton_budgeted(
        &self,
        start: [f64; 3],
        with_signal: bool,
        max_iters: usize,
        stall_window: usize,
    ) -> std::result::Result<StateSolution, (SubevoError, [f64; 3])> {
        // unknowns: x = [a (logistic only), ln sigma, ln gamma]
        let dim = if with_signal { 3 } else { 2 };
        let mut x = if with_signal {
            vec![start[0], start[1].ln(), start[2].ln()]
        } else {
            vec![start[1].ln(), start[2].ln()]
        };
        let eval = |x: &[f64]| -> Vec<f64> {
            let (a, s, g) = if with_signal {
                (x[0], x[1].exp(), x[2].exp())
            } else {
                (0.0, x[0].exp(), x[1].exp())
            };
            self.residual_vec(a, s, g, with_signal)
        };
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut r = eval(&x);
        let mut best = norm(&r);
        let mut best_iter = 0usize;
        for iter in 0..max_iters {
            let rn = norm(&r);
            if rn <= SYSTEM_TOL {
                let (a, s, g) = unpack(&x, with_signal);
                return Ok(StateSolution {
                    a,
                    sigma: s,
                    gamma: g,
                    residual_norm: rn,
                    iterations: iter,
                });
            }
            let gamma_now = if with_signal { x[2].exp() } else { x[1].exp() };
            if gamma_now > GAMMA_DIVERGENCE {
                let (a, s, g) = unpack(&x, with_signal);
                return Err((
                    SubevoError::Regime(format!(
                        "gamma diverged ({gamma_now:.3e}); the system has no solution in this regime"
                    )),
                    [a, s, g],
                ));
            }
            if rn < best {
                best = rn;
                best_iter = iter;
            }
            if iter >= best_iter + stall_window && best > 1e-6 {
                let (a, s, g) = unpack(&x, with_signal);
                return Err((
                    SubevoError::Regime(
                        "residuals stagnated above 1e-6 for 50 damped steps".into(),
                    ),
                    [a, s, g],
                ));
            }
            // central finite-difference Jacobian
            let h = 1e-6;
            let mut jac = vec![vec![0.0; dim]; dim];
            for j in 0..dim {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let rp = eval(&xp);
                let rm = eval(&xm);
                for i in 0..dim {
                    jac[i][j] = (rp[i] - rm[i]) / (2.0 * h);
                }
            }
            let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
            // plain Newton direction first; if line search fails, retry with
            // increasingly regularized directions (the Jacobian degenerates
            // near the existence boundary)
            let jscale = jac
                .iter()
                .flat_map(|row| row.iter())
                .fold(0.0f64, |m, v| m.max(v.abs()));
            let mut accepted = false;
            'directions: for mu in [0.0, 1e-8, 1e-3, 1.0] {
                let mut jreg = jac.clone();
                for (i, row) in jreg.iter_mut().enumerate() {
                    row[i] += mu * jscale.max(1e-12);
                }
                let step = match solve_small(&mut jreg, &neg_r) {
                    Some(s) => s,
                    None => continue,
                };
                let mut lambda = 1.0;
                for _ in 0..26 {
                    let xt: Vec<f64> = x
                        .iter()
                        .zip(&step)
                        .map(|(xi, si)| xi + lambda * si)
                        .collect();
                    // keep log-variables in a sane range
                    let log_bound = if with_signal { &xt[1..] } else { &xt[..] };
                    if log_bound.iter().any(|v| v.abs() > 50.0) {
                        lambda *= 0.5;
                        continue;
                    }
                    let rt = eval(&xt);
                    if norm(&rt) < rn {
                        x = xt;
                        r = rt;
                        accepted = true;
                        break 'directions;
                    }
                    lambda *= 0.5;
                }
            }
            if !accepted {
                let (a, s, g) = unpack(&x, with_signal);
                return Err((
                    SubevoError::Numerical(format!(
                        "Newton stalled at residual {rn:.3e}"
                    )),
                    [a, s, g],
                ));
            }
        }
        let (a, s, g) = unpack(&x, with_signal);
        Err((
            SubevoError::Numerical("system solve exceeded the iteration budget".into()),
            [a, s, g],
        ))
    }

    fn newton_solve(&self, start: [f64; 3], with_signal: bool) -> Result<StateSolution> {
        self.newton_from(start, with_signal).map_err(|(e, _)| e)
    }

    /// Robust fallback: for fixed gamma solve r1 for sigma by bisection
    /// (unique root in (0, gamma*sqrt(dq)+1]), then bisect r3 over gamma.
    fn robust_bisection_fallback(&self) -> Result<StateSolution> {
        let dq = self.delta_q();
        let mut evals = 0usize;
        let mut sigma_of_gamma = |g: f64| -> f64 {
            let (mut lo, mut hi) = (1e-8, g * dq.sqrt() + 1.0);
            for _ in 0..90 {
                let mid = 0.5 * (lo + hi);
                let r1 = self.residuals(0.0, mid, g)[0];
                evals += 1;
                if r1 > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let psi = |g: f64, sig: f64| self.residuals(0.0, sig, g)[2];
        let mut g_lo = 1e-4;
        let s_lo = sigma_of_gamma(g_lo);
        if psi(g_lo, s_lo) < 0.0 {
            // root below; shrink
            for _ in 0..40 {
                g_lo *= 0.5;
                if psi(g_lo, sigma_of_gamma(g_lo)) > 0.0 {
                    break;
                }
            }
        }
        let mut g_hi = 2.0;
        let mut found = false;
        for _ in 0..40 {
            if psi(g_hi, sigma_of_gamma(g_hi)) < 0.0 {
                found = true;
                break;
            }
            g_hi *= 2.0;
        }
        if !found {
            return Err(SubevoError::Numerical(
                "robust fallback could not bracket gamma".into(),
            ));
        }
        for _ in 0..90 {
            let mid = 0.5 * (g_lo + g_hi);
            if psi(mid, sigma_of_gamma(mid)) > 0.0 {
                g_lo = mid;
            } else {
                g_hi = mid;
            }
        }
        let gamma = 0.5 * (g_lo + g_hi);
        let sigma = sigma_of_gamma(gamma);
        let r = self.residuals(0.0, sigma, gamma);
        let rn = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if rn > 1e-8 {
            return Err(SubevoError::Numerical(format!(
                "robust fallback residual {rn:.3e} too large"
            )));
        }
        Ok(StateSolution {
            a: 0.0,
            sigma,
            gamma,
            residual_norm: rn,
            iterations: evals,
        })
    }

    /// Logistic fallback: continuation in q from 1 down to the target with
    /// adaptive step control, warm-starting each rung. The solution manifold
    /// steepens sharply near the existence boundary, so failed rungs halve
    /// the step; a step floor maps to a regime failure.
    fn logistic_ladder(&self, with_signal: bool) -> Result<StateSolution> {
        let nu = self.params.signal_norm();
        let q_target = self.params.q;
        let rung_engine = |q_k: f64| StateEvolution {
            params: RegimeParams {
                q: q_k,
                ..self.params.clone()
            },
            atoms: self.atoms.clone(),
            panel_base: self.panel_base.clone(),
            ortho_nodes: self.ortho_nodes.clone(),
            ortho_weights: self.ortho_weights.clone(),
            series_cache: Mutex::new(Vec::new()),
        };
        let mut start = [nu / 2.0, 1.0, 1.0];
        let mut sol = rung_engine(1.0)
            .newton_from(start, with_signal)
            .map_err(|(e, _)| e)?;
        let mut q_now = 1.0;
        let mut step = 0.1;
        let mut failures = 0usize;
        while q_now > q_target + 1e-12 {
            let q_next = (q_now - step).max(q_target);
            start = [sol.a, sol.sigma, sol.gamma];
            match rung_engine(q_next).newton_budgeted(start, with_signal, 50, 15) {
                Ok(s) => {
                    sol = s;
                    q_now = q_next;
                    step = (step * 1.4).min(0.1);
                }
                Err((e, _)) => {
                    failures += 1;
                    step *= 0.5;
                    if step < 4e-3 || failures > 14 {
                        return Err(SubevoError::Regime(format!(
                            "no solution reachable below q = {q_now:.4} (MLE existence boundary): {e}"
                        )));
                    }
                }
            }
        }
        Ok(sol)
    }

    /// Marginal atoms for the pair series: the robust noise marginal, or an
    /// a-adaptive panel rule in U (strip pi/a) folded to the y = 1 branch.
    fn pair_atoms(&self, a: f64) -> Vec<MarginalAtom> {
        if self.params.is_robust() {
            return self.atoms.clone();
        }
        let nu = self.params.signal_norm();
        let width = (2.4 / a.abs().max(1.0)).min(0.75);
        let urule = PanelRule::build_with_width(0.0, width, &[], &self.panel_base, width);
        urule
            .nodes
            .iter()
            .zip(&urule.weights)
            .filter_map(|(&u, &w)| {
                let s = 1.0 / (1.0 + (-nu * u).exp());
                let weight = 2.0 * w * s;
                (weight > 1e-300).then_some(MarginalAtom { weight, y: 1.0, u })
            })
            .collect()
    }

    fn pair_series(&self, state: &StateSolution, form: EtaForm) -> PairSeries {
        let key = series_key(state, form);
        {
            let cache = self.series_cache.lock().unwrap();
            if let Some((_, s)) = cache.iter().find(|(k, _)| *k == key) {
                return s.clone();
            }
        }
        let loss = &self.params.loss;
        let (a, sigma, gamma) = (state.a, state.sigma, state.gamma);
        let series = self
            .pair_atoms(a)
            .par_iter()
            .map(|atom| {
                let rule = self.panel_rule(a, sigma, gamma, atom);
                let shift = a * atom.u;
                let values: Vec<f64> = rule
                    .nodes
                    .iter()
                    .map(|&g| {
                        let z = shift + sigma * g;
                        let p = loss.prox_unchecked(atom.y, gamma, z);
                        match form {
                            EtaForm::ProxDifference => z - p,
                            EtaForm::ScoreProduct => gamma * loss.d1_unchecked(atom.y, p),
                        }
                    })
                    .collect();
                let coeffs = rule.hermite_coeffs(&values, HERMITE_ORDER);
                let m2 = {
                    let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
                    rule.integrate_values(&sq)
                };
                let mut s = PairSeries::zero(HERMITE_ORDER);
                s.accumulate(&PairSeries::from_projection(&coeffs, m2), atom.weight);
                s
            })
            .reduce(
                || PairSeries::zero(HERMITE_ORDER),
                |mut acc, s| {
                    acc.accumulate(&s, 1.0);
                    acc
                },
            );
        let mut cache = self.series_cache.lock().unwrap();
        if cache.len() > 8 {
            cache.clear();
        }
        cache.push((key, series.clone()));
        series
    }

    /// F(t): the fixed-point map of the correlation equation.
    pub fn eval_f(&self, state: &StateSolution, t: f64) -> Result<f64> {
        self.eval_f_form(state, t, self.default_form())
    }

    pub fn default_form(&self) -> EtaForm {
        if self.params.is_robust() {
            EtaForm::ProxDifference
        } else {
            EtaForm::ScoreProduct
        }
    }

    pub fn eval_f_form(&self, state: &StateSolution, t: f64, form: EtaForm) -> Result<f64> {
        if !(-1.0..=1.0).contains(&t) {
            return Err(SubevoError::Domain(format!(
                "eta trial must be in [-1,1], got {t}"
            )));
        }
        let series = self.pair_series(state, form);
        let pref = self.params.q * self.params.q * self.params.delta / (state.sigma * state.sigma);
        Ok(pref * series.eval(t))
    }

    /// Solve eta = F(eta) by fixed-point iteration from q/2.
    ///
    /// F is a contraction with constant at most q, so plain iteration
    /// converges linearly; q = 1 short-circuits to eta = 1.
    pub fn solve_eta(&self, state: &StateSolution) -> Result<EtaSolution> {
        let q = self.params.q;
        if q == 1.0 {
            let f1 = self.eval_f(state, 1.0)?;
            return Ok(EtaSolution {
                eta: 1.0,
                fixed_point_residual: (1.0 - f1).abs(),
                iterations: 0,
            });
        }
        let series = self.pair_series(state, self.default_form());
        let pref = q * q * self.params.delta / (state.sigma * state.sigma);
        let f = |t: f64| pref * series.eval(t.clamp(-1.0, 1.0));
        let mut eta = q / 2.0;
        for iter in 0..200_000 {
            let next = f(eta);
            let delta = (next - eta).abs();
            eta = next;
            if delta <= ETA_TOL {
                return Ok(EtaSolution {
                    eta,
                    fixed_point_residual: (f(eta) - eta).abs(),
                    iterations: iter + 1,
                });
            }
        }
        Err(SubevoError::Numerical(
            "eta fixed-point iteration exceeded its budget (quadrature misconfiguration?)".into(),
        ))
    }
}

fn unpack(x: &[f64], with_signal: bool) -> (f64, f64, f64) {
    if with_signal {
        (x[0], x[1].exp(), x[2].exp())
    } else {
        (0.0, x[0].exp(), x[1].exp())
    }
}

/// Gaussian elimination with partial pivoting for the tiny Newton systems.
fn solve_small(a: &mut [Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut aug: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a[i].clone();
            row.push(b[i]);
            row
        })
        .collect();
    for col in 0..n {
        let (piv, pv) = (col..n)
            .map(|r| (r, aug[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())?;
        if pv < 1e-300 {
            return None;
        }
        aug.swap(col, piv);
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = aug[r][col] / aug[col][col];
            let (pivot_row, row) = if r < col {
                let (lo, hi) = aug.split_at_mut(col);
                (&hi[0], &mut lo[r])
            } else {
                let (lo, hi) = aug.split_at_mut(r);
                (&lo[col], &mut hi[0])
            };
            for c in col..=n {
                row[c] -= factor * pivot_row[c];
            }
        }
    }
    Some((0..n).map(|i| aug[i][n] / aug[i][i]).collect())
}

/// One row of a theory risk curve; failed rows carry the failure text.
#[derive(Debug, Clone)]
pub struct RiskRow {
    pub q: f64,
    pub outcome: std::result::Result<RiskPoint, String>,
}

#[derive(Debug, Clone, Copy)]
pub struct RiskPoint {
    pub eta: f64,
    pub sigma2: f64,
    pub gamma: f64,
    pub a: f64,
    pub eta_sigma2: f64,
}

/// Solve the system and eta on a q-grid; rows are independent and solved in
/// parallel, failures are per-row.
pub fn risk_curve(params_base: &RegimeParams, q_grid: &[f64]) -> Vec<RiskRow> {
    q_grid
        .par_iter()
        .map(|&q| {
            let params = RegimeParams {
                q,
                ..params_base.clone()
            };
            let outcome = (|| -> Result<RiskPoint> {
                let engine = StateEvolution::new(params)?;
                let state = engine.solve_system()?;
                let eta = engine.solve_eta(&state)?;
                Ok(RiskPoint {
                    eta: eta.eta,
                    sigma2: state.sigma * state.sigma,
                    gamma: state.gamma,
                    a: state.a,
                    eta_sigma2: eta.eta * state.sigma * state.sigma,
                })
            })()
            .map_err(|e| e.to_string());
            RiskRow { q, outcome }
        })
        .collect()
}

/// Limiting squared risk of the bagged estimate over M subsamples.
pub fn bagged_risk_limit(eta: f64, sigma2: f64, m: usize) -> Result<f64> {
    if m < 1 {
        return Err(SubevoError::Domain("bagging needs M >= 1".into()));
    }
    let m = m as f64;
    Ok(sigma2 / m + (1.0 - 1.0 / m) * sigma2 * eta)
}
