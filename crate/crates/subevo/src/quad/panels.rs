//! Composite Gauss-Legendre rule for Gaussian expectations whose integrands
//! carry localized, possibly kinked structure, plus projection onto the
//! normalized Hermite basis.
//!
//! A plain Gauss-Hermite rule loses accuracy when the integrand varies on a
//! scale much finer than the node spacing (a prox transition zone of width
//! (1+gamma)/sigma in G units) or has derivative kinks (Huber). The composite
//! rule places panel edges at the known kink positions and refines around the
//! transition center, recovering spectral accuracy per panel.
//!
//! Projecting an integrand h onto normalized Hermite polynomials turns the
//! correlated-pair expectation into a power series in the correlation:
//! E[h(G) h(G~)] = sum_m c_m^2 t^m. The truncated tail is lumped into a
//! t^(M+1) term so the series is exact at t = 0 and t = 1 and accurate to
//! roughly |t|^(M+1) in between.

use super::rules::gauss_legendre;

/// Half-width of the integration window in G units. Gaussian mass outside
/// is below 2e-28, invisible against bounded integrands.
const RANGE: f64 = 11.0;
/// Base panel width; fine enough to resolve Hermite order ~350 oscillations
/// with 24-node panels.
const BASE_WIDTH: f64 = 0.75;

/// Order of the Hermite projection used for correlated-pair expectations.
pub const HERMITE_ORDER: usize = 320;

/// Quadrature nodes/weights with the N(0,1) density folded into the weights:
/// `sum_k w_k f(x_k) ~ E[f(G); |G| <= RANGE]`.
#[derive(Debug, Clone)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PanelRule {
    /// Build a rule resolving features centered at `center` with scale
    /// `feature_scale` (both in G units) and derivative kinks at `kinks`.
    pub fn build(center: f64, feature_scale: f64, kinks: &[f64], nodes_per_panel: usize) -> Self {
        let base = gauss_legendre(nodes_per_panel.max(6));
        Self::build_with_base(center, feature_scale, kinks, &base)
    }

    /// Same as [`build`](Self::build) with a precomputed per-panel base rule.
    pub fn build_with_base(
        center: f64,
        feature_scale: f64,
        kinks: &[f64],
        base: &(Vec<f64>, Vec<f64>),
    ) -> Self {
        Self::build_with_width(center, feature_scale, kinks, base, BASE_WIDTH)
    }

    /// Fully parameterized builder: `panel_width` controls the uniform mesh,
    /// needed when the integrand's analyticity strip is narrower than the
    /// default panels resolve.
    pub fn build_with_width(
        center: f64,
        feature_scale: f64,
        kinks: &[f64],
        base: &(Vec<f64>, Vec<f64>),
        panel_width: f64,
    ) -> Self {
        let width = panel_width.clamp(1e-3, 4.0);
        let mut edges: Vec<f64> = Vec::with_capacity(64 + (2.0 * RANGE / width) as usize);
        let mut e = -RANGE;
        while e < RANGE - 1e-9 {
            edges.push(e);
            e += width;
        }
        edges.push(RANGE);
        for &k in kinks {
            if k > -RANGE && k < RANGE {
                edges.push(k);
            }
        }
        if feature_scale < width {
            let s = feature_scale.max(1e-3);
            for m in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
                for sign in [-1.0, 1.0] {
                    let x = center + sign * m * s;
                    if x > -RANGE && x < RANGE {
                        edges.push(x);
                    }
                }
            }
        }
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        edges.dedup_by(|a, b| (*a - *b).abs() < 1e-10);

        let (gx, gw) = base;
        let cap = (edges.len() - 1) * gx.len();
        let mut nodes = Vec::with_capacity(cap);
        let mut weights = Vec::with_capacity(cap);
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        for win in edges.windows(2) {
            let (a, b) = (win[0], win[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (&x, &w) in gx.iter().zip(gw) {
                let g = mid + half * x;
                nodes.push(g);
                weights.push(half * w * norm * (-0.5 * g * g).exp());
            }
        }
        PanelRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weighted sum of precomputed integrand values.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(&w, &v)| w * v).sum()
    }

    /// Project integrand values onto normalized Hermite polynomials
    /// h~_m = He_m / sqrt(m!), returning (c_0, ..., c_order).
    ///
    /// Uses the stable recurrence h~_{m+1}(x) = (x h~_m - sqrt(m) h~_{m-1}) / sqrt(m+1).
    pub fn hermite_coeffs(&self, values: &[f64], order: usize) -> Vec<f64> {
        let n = self.len();
        debug_assert_eq!(values.len(), n);
        let mut wv: Vec<f64> = self.weights.iter().zip(values).map(|(&w, &v)| w * v).collect();
        let mut coeffs = vec![0.0; order + 1];
        let mut hm1 = vec![0.0f64; n];
        let mut hm = vec![1.0f64; n];
        coeffs[0] = wv.iter().sum();
        for (m, cm) in coeffs.iter_mut().enumerate().skip(1) {
            let sm_1 = ((m - 1) as f64).sqrt();
            let inv_sm = 1.0 / (m as f64).sqrt();
            let mut acc = 0.0;
            for i in 0..n {
                let next = (self.nodes[i] * hm[i] - sm_1 * hm1[i]) * inv_sm;
                hm1[i] = hm[i];
                hm[i] = next;
                acc += wv[i] * next;
            }
            *cm = acc;
        }
        let _ = &mut wv;
        coeffs
    }
}

/// Correlation power series for E[h(G) h(G~)] built from one projection:
/// eval(t) = sum_m c_m^2 t^m + remainder * t^(order+1), where the remainder
/// collects the Hermite tail so that eval(1) = E[h^2] exactly.
#[derive(Debug, Clone)]
pub struct PairSeries {
    pub coeffs_sq: Vec<f64>,
    pub remainder: f64,
}

impl PairSeries {
    pub fn from_projection(coeffs: &[f64], second_moment: f64) -> Self {
        let coeffs_sq: Vec<f64> = coeffs.iter().map(|c| c * c).collect();
        let sum: f64 = coeffs_sq.iter().sum();
        PairSeries {
            coeffs_sq,
            // nonnegative up to quadrature rounding
            remainder: second_moment - sum,
        }
    }

    pub fn zero(order: usize) -> Self {
        PairSeries {
            coeffs_sq: vec![0.0; order + 1],
            remainder: 0.0,
        }
    }

    pub fn accumulate(&mut self, other: &PairSeries, weight: f64) {
        debug_assert_eq!(self.coeffs_sq.len(), other.coeffs_sq.len());
        for (a, b) in self.coeffs_sq.iter_mut().zip(&other.coeffs_sq) {
            *a += weight * b;
        }
        self.remainder += weight * other.remainder;
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        let mut tp = 1.0;
        for &c in &self.coeffs_sq {
            acc += c * tp;
            tp *= t;
        }
        acc + self.remainder * tp
    }
}
