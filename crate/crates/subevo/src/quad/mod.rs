//! Deterministic numerical expectation engine.
//!
//! Three public expectations cover everything the deterministic theory needs:
//! a 1-D Gauss-Hermite rule for G ~ N(0,1), a correlated 2-D rule for (G, G~)
//! realized as G~ = t G + sqrt(1-t^2) Z over a tensor grid, and a marginal
//! rule for the response: quantile-mapped Gauss-Legendre over the noise law in
//! robust mode, Gauss-Hermite over U with the binary response summed against
//! the sigmoid weights in logistic mode.

pub mod panels;
pub mod rules;

use crate::data::{DataModel, ResponseMode};
use crate::error::{Result, SubevoError};

/// Node-count configuration for the expectation engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub gh_nodes: usize,
    pub gl_nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            gh_nodes: 80,
            gl_nodes: 200,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.gh_nodes < 20 {
            return Err(SubevoError::Domain(format!(
                "gh_nodes must be >= 20, got {}",
                self.gh_nodes
            )));
        }
        if self.gl_nodes < 50 {
            return Err(SubevoError::Domain(format!(
                "gl_nodes must be >= 50, got {}",
                self.gl_nodes
            )));
        }
        Ok(())
    }
}

/// Immutable node/weight tables for one spec; evaluation is pure.
#[derive(Debug, Clone)]
pub struct Quadrature {
    gh_nodes: Vec<f64>,
    gh_weights: Vec<f64>,
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
    spec: QuadratureSpec,
}

/// One weighted point of the response marginal: `y` is the response (noise
/// value in robust mode, 0/1 in logistic mode) and `u` the signal-direction
/// projection U (always 0 in robust mode).
#[derive(Debug, Clone, Copy)]
pub struct MarginalAtom {
    pub weight: f64,
    pub y: f64,
    pub u: f64,
}

impl Quadrature {
    pub fn new(spec: QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let (gh_nodes, gh_weights) = rules::gauss_hermite_normal(spec.gh_nodes);
        let (gl_nodes, gl_weights) = rules::gauss_legendre_unit(spec.gl_nodes);
        Ok(Quadrature {
            gh_nodes,
            gh_weights,
            gl_nodes,
            gl_weights,
            spec,
        })
    }

    pub fn spec(&self) -> QuadratureSpec {
        self.spec
    }

    /// E[f(G)] for G ~ N(0,1).
    pub fn expect_g(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.gh_nodes
            .iter()
            .zip(&self.gh_weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// E[f(G, G~)] with corr(G, G~) = t, realized as G~ = tG + sqrt(1-t^2) Z
    /// over the tensor grid; collapses to a 1-D rule at |t| = 1.
    pub fn expect_gg(&self, f: impl Fn(f64, f64) -> f64, t: f64) -> Result<f64> {
        if !(-1.0..=1.0).contains(&t) {
            return Err(SubevoError::Domain(format!("correlation must be in [-1,1], got {t}")));
        }
        if t == 1.0 || t == -1.0 {
            return Ok(self.expect_g(|g| f(g, t * g)));
        }
        let s = (1.0 - t * t).sqrt();
        let mut total = 0.0;
        for (&g, &wg) in self.gh_nodes.iter().zip(&self.gh_weights) {
            let mut inner = 0.0;
            for (&z, &wz) in self.gh_nodes.iter().zip(&self.gh_weights) {
                inner += wz * f(g, t * g + s * z);
            }
            total += wg * inner;
        }
        Ok(total)
    }

    /// Weighted atoms of the response marginal for a data model.
    pub fn marginal_atoms(&self, model: &DataModel) -> Result<Vec<MarginalAtom>> {
        match &model.mode {
            ResponseMode::Robust(noise) => {
                let mut atoms = Vec::with_capacity(self.gl_nodes.len());
                for (&u, &w) in self.gl_nodes.iter().zip(&self.gl_weights) {
                    let uc = u.clamp(1e-12, 1.0 - 1e-12);
                    atoms.push(MarginalAtom {
                        weight: w,
                        y: noise.quantile(uc)?,
                        u: 0.0,
                    });
                }
                Ok(atoms)
            }
            ResponseMode::Logistic { signal_norm } => {
                let mut atoms = Vec::with_capacity(2 * self.gh_nodes.len());
                for (&u, &w) in self.gh_nodes.iter().zip(&self.gh_weights) {
                    let p1 = 1.0 / (1.0 + (-signal_norm * u).exp());
                    for (y, py) in [(1.0, p1), (0.0, 1.0 - p1)] {
                        let weight = w * py;
                        if weight > 1e-300 {
                            atoms.push(MarginalAtom { weight, y, u });
                        }
                    }
                }
                Ok(atoms)
            }
        }
    }

    /// E[f(y, U)] under the model's response marginal (robust: y is the noise
    /// and U = 0; logistic: y in {0,1} with P(y=1|U) = sigmoid(nu*U)).
    pub fn expect_marginal(&self, f: impl Fn(f64, f64) -> f64, model: &DataModel) -> Result<f64> {
        Ok(self
            .marginal_atoms(model)?
            .iter()
            .map(|a| a.weight * f(a.y, a.u))
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DataModel, DesignLaw, NoiseLaw};
    use ndarray::Array1;

    fn quad() -> Quadrature {
        Quadrature::new(QuadratureSpec::default()).unwrap()
    }

    #[test]
    fn expect_g_normalization_and_variance() {
        let q = quad();
        assert!((q.expect_g(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!((q.expect_g(|g| g * g) - 1.0).abs() < 1e-12);
        assert!(q.expect_g(|g| g).abs() < 1e-13);
    }

    #[test]
    fn expect_gg_covariance_identity() {
        let q = quad();
        for &t in &[-0.8, 0.0, 0.3, 0.99, 1.0] {
            let v = q.expect_gg(|g, h| g * h, t).unwrap();
            assert!((v - t).abs() < 1e-12, "t={t}: {v}");
        }
        assert!(q.expect_gg(|g, h| g * h, 1.5).is_err());
    }

    #[test]
    fn expect_gg_independence_factorizes() {
        let q = quad();
        let f1 = |g: f64| (0.3 * g).cos();
        let f2 = |g: f64| g * g - 0.5;
        let joint = q.expect_gg(|g, h| f1(g) * f2(h), 0.0).unwrap();
        let prod = q.expect_g(f1) * q.expect_g(f2);
        assert!((joint - prod).abs() < 1e-12);
    }

    #[test]
    fn marginal_normalization() {
        let q = quad();
        let noise = NoiseLaw::student_t(2.0, 3.0).unwrap();
        let robust = DataModel::robust(noise, DesignLaw::Gaussian, Array1::zeros(1)).unwrap();
        assert!((q.expect_marginal(|_, _| 1.0, &robust).unwrap() - 1.0).abs() < 1e-12);
        // symmetric noise: E[sign(eps)] = 0
        let v = q.expect_marginal(|y, _| y.signum(), &robust).unwrap();
        assert!(v.abs() < 1e-10);
        let logistic = DataModel::logistic(1.0, DesignLaw::Gaussian, 2).unwrap();
        assert!((q.expect_marginal(|_, _| 1.0, &logistic).unwrap() - 1.0).abs() < 1e-12);
        // E[y] = E[sigmoid(U)] = 1/2 by symmetry
        let ey = q.expect_marginal(|y, _| y, &logistic).unwrap();
        assert!((ey - 0.5).abs() < 1e-10);
    }

    #[test]
    fn spec_bounds_enforced() {
        assert!(Quadrature::new(QuadratureSpec { gh_nodes: 10, gl_nodes: 200 }).is_err());
        assert!(Quadrature::new(QuadratureSpec { gh_nodes: 20, gl_nodes: 20 }).is_err());
    }
}
