//! Finite-sample machinery: subsample M-estimation by damped Newton, score
//! vectors, the data-driven effective-regularization estimate, and the
//! plug-in estimators of sigma^2 and eta*sigma^2 built from it.

use ndarray::{Array1, Array2};

use crate::error::{Result, SubevoError};
use crate::linalg::{canonical_dot, cholesky_in_place, cholesky_solve, forward_substitute};
use crate::loss::LossModel;

/// Fitted subsample M-estimator.
///
/// `psi` has full length n with `psi[i] = -loss'(y_i, x_i' beta_hat)` for
/// i in the training subset and 0 elsewhere.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta_hat: Array1<f64>,
    pub psi: Array1<f64>,
    pub grad_norm: f64,
    pub newton_iters: usize,
    pub subset: Vec<usize>,
}

/// Data-driven estimate of the effective regularization gamma.
#[derive(Debug, Clone)]
pub struct GammaHat {
    pub value: f64,
    pub subset: Vec<usize>,
}

const SEPARATION_NORM: f64 = 1e6;
const MAX_NEWTON: usize = 200;

fn validate_subset(n: usize, p: usize, subset: &[usize]) -> Result<()> {
    if subset.len() <= p {
        return Err(SubevoError::Domain(format!(
            "subset size {} must exceed p = {p}",
            subset.len()
        )));
    }
    let mut prev = None;
    for &i in subset {
        if i >= n {
            return Err(SubevoError::Domain(format!("subset index {i} out of range")));
        }
        if let Some(p) = prev {
            if i <= p {
                return Err(SubevoError::Domain("subset must be sorted and distinct".into()));
            }
        }
        prev = Some(i);
    }
    Ok(())
}

/// Minimize `sum_{i in subset} loss(y_i, x_i' b)` by Newton with Armijo
/// backtracking; the Hessian gets a small diagonal jitter when the curvature
/// matrix is singular (Huber's flat regions).
pub fn fit_mestimator(
    x: &Array2<f64>,
    y: &Array1<f64>,
    subset: &[usize],
    loss: &LossModel,
) -> Result<FitResult> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(SubevoError::Domain("y length must match X rows".into()));
    }
    validate_subset(n, p, subset)?;
    for &i in subset {
        // surfaces invalid logistic responses before the hot loop
        loss.loss_value(y[i], 0.0)?;
    }
    let k = subset.len();
    let mut xi = Array2::zeros((k, p));
    let mut yi = Array1::zeros(k);
    for (r, &i) in subset.iter().enumerate() {
        xi.row_mut(r).assign(&x.row(i));
        yi[r] = y[i];
    }

    let objective = |u: &Array1<f64>| -> f64 {
        let mut s = 0.0;
        for r in 0..k {
            s += loss.loss_value(yi[r], u[r]).expect("validated response");
        }
        s
    };

    let gtol = 1e-8 * (k as f64).sqrt();
    let mut beta: Array1<f64> = Array1::zeros(p);
    let mut u = xi.dot(&beta);
    let mut obj = objective(&u);
    let mut grad_norm = f64::INFINITY;
    let mut iters = 0;

    for iter in 0..MAX_NEWTON {
        iters = iter;
        let beta_norm = beta.dot(&beta).sqrt();
        if beta_norm > SEPARATION_NORM {
            return Err(SubevoError::Separation(format!(
                "estimate norm {beta_norm:.3e} exceeds {SEPARATION_NORM:.0e}"
            )));
        }
        let d1: Array1<f64> = Array1::from(
            (0..k).map(|r| loss.d1_unchecked(yi[r], u[r])).collect::<Vec<_>>(),
        );
        let grad = xi.t().dot(&d1);
        grad_norm = grad.dot(&grad).sqrt();
        if grad_norm <= gtol {
            break;
        }
        // weighted Gram matrix; rows scaled by sqrt of the second derivative
        let mut w = xi.clone();
        for r in 0..k {
            let d2 = loss.d2_unchecked(yi[r], u[r]).max(0.0);
            let s = d2.sqrt();
            for c in 0..p {
                w[[r, c]] *= s;
            }
        }
        let hessian = w.t().dot(&w);
        let mut factor = hessian.clone();
        let mut jitter = 0.0;
        if !cholesky_in_place(&mut factor) {
            let trace: f64 = (0..p).map(|j| hessian[[j, j]]).sum();
            jitter = 1e-10 * trace.max(1e-8) / p as f64;
            for _ in 0..8 {
                factor = hessian.clone();
                for j in 0..p {
                    factor[[j, j]] += jitter;
                }
                if cholesky_in_place(&mut factor) {
                    break;
                }
                jitter *= 100.0;
            }
        }
        let step = cholesky_solve(&factor, &grad.mapv(|v| -v));
        let slope = grad.dot(&step);
        if !slope.is_finite() {
            return Err(SubevoError::Numerical("non-finite Newton step".into()));
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &beta + &(step.mapv(|v| v * t));
            let ucand = xi.dot(&cand);
            let ocand = objective(&ucand);
            if ocand <= obj + 1e-4 * t * slope {
                beta = cand;
                u = ucand;
                obj = ocand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // flat to rounding: accept convergence only if the gradient is small
            if grad_norm <= 1e-7 * (k as f64).sqrt() {
                break;
            }
            return Err(SubevoError::Numerical(format!(
                "line search stalled at gradient norm {grad_norm:.3e} (jitter {jitter:.1e})"
            )));
        }
    }
    if grad_norm > 1e-7 * (k as f64).sqrt() {
        let beta_norm = beta.dot(&beta).sqrt();
        if beta_norm > SEPARATION_NORM {
            return Err(SubevoError::Separation(format!(
                "estimate norm {beta_norm:.3e} exceeds {SEPARATION_NORM:.0e}"
            )));
        }
        return Err(SubevoError::Numerical(format!(
            "Newton did not reach the KKT tolerance: |grad| = {grad_norm:.3e}"
        )));
    }

    let mut psi = Array1::zeros(n);
    for (r, &i) in subset.iter().enumerate() {
        psi[i] = -loss.d1_unchecked(yi[r], u[r]);
    }
    Ok(FitResult {
        beta_hat: beta,
        psi,
        grad_norm,
        newton_iters: iters,
        subset: subset.to_vec(),
    })
}

/// The curvature-trace estimate of gamma:
/// p / sum_{i in I} [ l''_i - l''_i^2 x_i' (sum_l x_l l''_l x_l')^{-1} x_i ]
/// with all second derivatives taken at the fitted values.
pub fn gamma_hat(
    x: &Array2<f64>,
    y: &Array1<f64>,
    fit: &FitResult,
    loss: &LossModel,
) -> Result<GammaHat> {
    let p = x.ncols();
    let k = fit.subset.len();
    let mut d2 = vec![0.0; k];
    let mut xi = Array2::zeros((k, p));
    for (r, &i) in fit.subset.iter().enumerate() {
        let u = x.row(i).dot(&fit.beta_hat);
        d2[r] = loss.d2_unchecked(y[i], u);
        xi.row_mut(r).assign(&x.row(i));
    }
    let mut w = xi.clone();
    for r in 0..k {
        let s = d2[r].max(0.0).sqrt();
        for c in 0..p {
            w[[r, c]] *= s;
        }
    }
    let mut factor = w.t().dot(&w);
    if !cholesky_in_place(&mut factor) {
        return Err(SubevoError::SingularCurvature(
            "curvature matrix sum_l x_l l'' x_l' is not positive definite".into(),
        ));
    }
    // one factorization, |I| forward solves for the quadratic forms
    let mut solved = vec![0.0; p];
    let mut terms = Vec::with_capacity(k);
    let mut row = vec![0.0; p];
    for r in 0..k {
        for c in 0..p {
            row[c] = xi[[r, c]];
        }
        forward_substitute(&factor, &row, &mut solved);
        let quad: f64 = solved.iter().map(|v| v * v).sum();
        terms.push(d2[r] - d2[r] * d2[r] * quad);
    }
    terms.sort_unstable_by(f64::total_cmp);
    let denom: f64 = terms.iter().sum();
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(SubevoError::SingularCurvature(format!(
            "curvature trace denominator {denom} is not positive"
        )));
    }
    let value = p as f64 / denom;
    Ok(GammaHat {
        value,
        subset: fit.subset.clone(),
    })
}

/// Plug-in estimate of sigma^2: gamma_hat^2 * |psi|^2 / p.
pub fn sigma2_hat(fit: &FitResult, gh: &GammaHat, p: usize) -> f64 {
    let psi = fit.psi.as_slice().unwrap();
    gh.value * gh.value * canonical_dot(psi, psi) / p as f64
}

/// Plug-in estimate of eta*sigma^2 from two fits on the same data:
/// gamma_hat(I) gamma_hat(I~) * (psi' psi~) / p. The inner product runs over
/// the intersection automatically through the psi supports.
pub fn eta_sigma2_hat(
    fit_a: &FitResult,
    gh_a: &GammaHat,
    fit_b: &FitResult,
    gh_b: &GammaHat,
    p: usize,
) -> f64 {
    let pa = fit_a.psi.as_slice().unwrap();
    let pb = fit_b.psi.as_slice().unwrap();
    gh_a.value * gh_b.value * canonical_dot(pa, pb) / p as f64
}
