//! Loss families admissible for subsample M-estimation: robust rho losses
//! (Huber, pseudo-Huber, scaled pseudo-Huber) and the binary logistic
//! negative log-likelihood, with first/second derivatives and proximal
//! operators.
//!
//! Robust losses act on the residual, `loss(y, u) = rho(y - u)`, and their
//! proximal operator is reduced to the prox of `rho` through the reflection
//! `prox_{g*loss_y}(x) = y - prox_{g*rho}(y - x)`, so each rho needs a single
//! scalar solver.

use crate::error::{Result, SubevoError};

/// Robust rho family. All members satisfy |rho'| <= 1 and rho'' <= 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoSpec {
    /// Quadratic inside |t| <= 1, linear outside. rho'' in {0, 1}.
    Huber,
    /// sqrt(1 + t^2); smooth, rho'' in (0, 1].
    PseudoHuber,
    /// lambda^2/(1+lambda) * sqrt(1 + (t/lambda)^2) for lambda > 0.
    ScaledPseudoHuber(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossModel {
    RobustRho(RhoSpec),
    Logistic,
}

impl RhoSpec {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            RhoSpec::Huber => {
                let a = t.abs();
                if a <= 1.0 {
                    0.5 * t * t
                } else {
                    a - 0.5
                }
            }
            RhoSpec::PseudoHuber => (1.0 + t * t).sqrt(),
            RhoSpec::ScaledPseudoHuber(l) => {
                let s = t / l;
                l * l / (1.0 + l) * (1.0 + s * s).sqrt()
            }
        }
    }

    pub fn d1(&self, t: f64) -> f64 {
        match *self {
            RhoSpec::Huber => t.clamp(-1.0, 1.0),
            RhoSpec::PseudoHuber => t / (1.0 + t * t).sqrt(),
            RhoSpec::ScaledPseudoHuber(l) => {
                let s = t / l;
                t / ((1.0 + l) * (1.0 + s * s).sqrt())
            }
        }
    }

    pub fn d2(&self, t: f64) -> f64 {
        match *self {
            RhoSpec::Huber => {
                if t.abs() < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            RhoSpec::PseudoHuber => (1.0 + t * t).powf(-1.5),
            RhoSpec::ScaledPseudoHuber(l) => {
                let s = t / l;
                (1.0 + s * s).powf(-1.5) / (1.0 + l)
            }
        }
    }

    /// prox of `g * rho` at z.
    pub fn prox(&self, g: f64, z: f64) -> f64 {
        match *self {
            RhoSpec::Huber => {
                if z.abs() <= 1.0 + g {
                    z / (1.0 + g)
                } else {
                    z - g * z.signum()
                }
            }
            _ => {
                // Safeguarded Newton on p + g*rho'(p) = z; the map is strictly
                // increasing with slope >= 1, so bisection is a guaranteed fallback.
                let start = RhoSpec::Huber.prox(g, z);
                solve_increasing(|p| p + g * self.d1(p) - z, |p| 1.0 + g * self.d2(p), z - g, z + g, start)
            }
        }
    }
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^u) without overflow.
fn log1p_exp(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Safeguarded Newton for a strictly increasing function with f(lo) <= 0 <= f(hi).
fn solve_increasing(
    f: impl Fn(f64) -> f64,
    fp: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    start: f64,
) -> f64 {
    let tol = 1e-13 * (1.0 + lo.abs().max(hi.abs()));
    let mut p = start.clamp(lo, hi);
    for _ in 0..100 {
        let v = f(p);
        if v.abs() <= tol {
            return p;
        }
        if v > 0.0 {
            hi = p;
        } else {
            lo = p;
        }
        let step = v / fp(p);
        let mut next = p - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - p).abs() < 1e-16 * (1.0 + p.abs()) {
            return next;
        }
        p = next;
    }
    p
}

impl LossModel {
    pub fn huber() -> Self {
        LossModel::RobustRho(RhoSpec::Huber)
    }

    pub fn pseudo_huber() -> Self {
        LossModel::RobustRho(RhoSpec::PseudoHuber)
    }

    pub fn scaled_pseudo_huber(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(SubevoError::Domain(format!(
                "scaled pseudo-Huber needs lambda > 0, got {lambda}"
            )));
        }
        Ok(LossModel::RobustRho(RhoSpec::ScaledPseudoHuber(lambda)))
    }

    pub fn logistic() -> Self {
        LossModel::Logistic
    }

    pub fn is_robust(&self) -> bool {
        matches!(self, LossModel::RobustRho(_))
    }

    /// Whether the loss satisfies the smoothness assumption inf rho'' > 0.
    /// Huber does not (rho'' hits zero); it is supported anyway.
    pub fn assumption_compliant(&self) -> bool {
        !matches!(self, LossModel::RobustRho(RhoSpec::Huber))
    }

    fn check_response(&self, y: f64) -> Result<()> {
        match self {
            LossModel::Logistic => {
                if y == 0.0 || y == 1.0 {
                    Ok(())
                } else {
                    Err(SubevoError::Domain(format!(
                        "logistic response must be 0 or 1, got {y}"
                    )))
                }
            }
            LossModel::RobustRho(_) => {
                if y.is_finite() {
                    Ok(())
                } else {
                    Err(SubevoError::Domain("robust response must be finite".into()))
                }
            }
        }
    }

    /// loss_y(u).
    pub fn loss_value(&self, y: f64, u: f64) -> Result<f64> {
        self.check_response(y)?;
        Ok(match self {
            LossModel::RobustRho(r) => r.value(y - u),
            LossModel::Logistic => log1p_exp(u) - u * y,
        })
    }

    /// d/du loss_y(u).
    pub fn loss_d1(&self, y: f64, u: f64) -> Result<f64> {
        self.check_response(y)?;
        Ok(self.d1_unchecked(y, u))
    }

    /// d^2/du^2 loss_y(u).
    pub fn loss_d2(&self, y: f64, u: f64) -> Result<f64> {
        self.check_response(y)?;
        Ok(self.d2_unchecked(y, u))
    }

    #[inline]
    pub(crate) fn d1_unchecked(&self, y: f64, u: f64) -> f64 {
        match self {
            LossModel::RobustRho(r) => -r.d1(y - u),
            LossModel::Logistic => sigmoid(u) - y,
        }
    }

    #[inline]
    pub(crate) fn d2_unchecked(&self, y: f64, u: f64) -> f64 {
        match self {
            LossModel::RobustRho(r) => r.d2(y - u),
            LossModel::Logistic => {
                let s = sigmoid(u);
                s * (1.0 - s)
            }
        }
    }

    /// argmin_p (x - p)^2/2 + gamma * loss_y(p).
    pub fn prox(&self, y: f64, gamma: f64, x: f64) -> Result<f64> {
        self.check_response(y)?;
        if !(gamma > 0.0) {
            return Err(SubevoError::Domain(format!("prox needs gamma > 0, got {gamma}")));
        }
        Ok(self.prox_unchecked(y, gamma, x))
    }

    #[inline]
    pub(crate) fn prox_unchecked(&self, y: f64, gamma: f64, x: f64) -> f64 {
        match self {
            LossModel::RobustRho(r) => y - r.prox(gamma, y - x),
            LossModel::Logistic => {
                // p + gamma*(sigmoid(p) - y) = x on [x - gamma, x + gamma]
                let start = x - gamma * (sigmoid(x) - y);
                solve_increasing(
                    |p| p + gamma * (sigmoid(p) - y) - x,
                    |p| {
                        let s = sigmoid(p);
                        1.0 + gamma * s * (1.0 - s)
                    },
                    x - gamma,
                    x + gamma,
                    start,
                )
            }
        }
    }

    /// Derivative of the prox in its argument: 1 / (1 + gamma * loss''(prox)).
    pub fn prox_d1(&self, y: f64, gamma: f64, x: f64) -> Result<f64> {
        let p = self.prox(y, gamma, x)?;
        Ok(1.0 / (1.0 + gamma * self.d2_unchecked(y, p)))
    }

    /// Positions (in the prox argument) where the prox switches between its
    /// closed-form branches. Empty for smooth losses; used by the composite
    /// quadrature to place panel edges.
    pub(crate) fn prox_arg_kinks(&self, y: f64, gamma: f64) -> [Option<f64>; 2] {
        match self {
            LossModel::RobustRho(RhoSpec::Huber) => {
                [Some(y - (1.0 + gamma)), Some(y + (1.0 + gamma))]
            }
            _ => [None, None],
        }
    }

    /// Center of the prox transition zone in the argument variable
    /// (the residual origin for robust losses, zero for logistic).
    pub(crate) fn prox_feature_center(&self, y: f64) -> f64 {
        match self {
            LossModel::RobustRho(_) => y,
            LossModel::Logistic => 0.0,
        }
    }
}
