//! Monte Carlo orchestration: iid subsets without replacement, estimator
//! pairs and bagged ensembles, empirical correlations and risks, the plug-in
//! estimates, and the bivariate prox-distribution diagnostic.
//!
//! Every replication owns generator streams derived from (seed, rep), so
//! results are bit-identical for a given (seed, config) regardless of the
//! thread schedule; failed replications (separation, singular curvature) are
//! recorded and excluded from summaries, never retried.

use ndarray::Array1;
use rayon::prelude::*;

use crate::data::DataModel;
use crate::error::{Result, SubevoError};
use crate::estimate::{eta_sigma2_hat, fit_mestimator, gamma_hat, sigma2_hat, FitResult};
use crate::loss::LossModel;
use crate::quad::QuadratureSpec;
use crate::rng::{derive_rng, standard_normal};
use crate::state::{RegimeParams, StateEvolution};

/// Independent uniform subsets of [n], each of size floor(q n).
#[derive(Debug, Clone)]
pub struct SubsampleDraw {
    pub subsets: Vec<Vec<usize>>,
    pub overlap_sizes: Vec<Vec<usize>>,
}

/// Draw M iid subsets by seeded partial Fisher-Yates; subsets are sorted.
pub fn draw_subsets(n: usize, q: f64, m: usize, seed: u64) -> Result<SubsampleDraw> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(SubevoError::Domain(format!("q must be in (0,1], got {q}")));
    }
    if m < 1 {
        return Err(SubevoError::Domain("need M >= 1 subsets".into()));
    }
    let k = (q * n as f64).floor() as usize;
    if k < 1 || k > n {
        return Err(SubevoError::Domain(format!(
            "subset size floor(q n) = {k} out of range for n = {n}"
        )));
    }
    let mut subsets = Vec::with_capacity(m);
    for j in 0..m {
        let mut rng = derive_rng(seed, j as u64);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let swap_with = i + rand::Rng::gen_range(&mut rng, 0..(n - i));
            pool.swap(i, swap_with);
        }
        let mut chosen: Vec<usize> = pool[..k].to_vec();
        chosen.sort_unstable();
        subsets.push(chosen);
    }
    let mut overlap_sizes = vec![vec![0usize; m]; m];
    for a in 0..m {
        for b in 0..m {
            overlap_sizes[a][b] = sorted_intersection_size(&subsets[a], &subsets[b]);
        }
    }
    Ok(SubsampleDraw {
        subsets,
        overlap_sizes,
    })
}

fn sorted_intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Per-replication outcome of a two-subset experiment.
#[derive(Debug, Clone)]
pub struct PairFitRecord {
    /// Normalized correlation of the centered, projected estimates.
    pub corr: f64,
    /// The bilinear form (centered/projected inner product).
    pub inner: f64,
    pub est_eta_sigma2: f64,
    pub est_sigma2: (f64, f64),
    pub overlap: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

fn mean_se(values: &[f64]) -> MeanSe {
    let n = values.len();
    if n == 0 {
        return MeanSe {
            mean: f64::NAN,
            se: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanSe { mean, se: f64::NAN };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    MeanSe {
        mean,
        se: (var / n as f64).sqrt(),
    }
}

#[derive(Debug, Clone, Default)]
pub struct PairSummary {
    pub corr: MeanSe,
    pub inner: MeanSe,
    pub est_eta_sigma2: MeanSe,
    pub est_sigma2: MeanSe,
    pub completed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone)]
pub struct PairExperiment {
    pub records: Vec<PairFitRecord>,
    pub failures: Vec<(usize, String)>,
    pub summary: PairSummary,
}

/// Center/project an estimate per the mode: robust subtracts the ground
/// truth; logistic projects off the signal direction.
fn centered_component(model: &DataModel, beta: &Array1<f64>) -> Array1<f64> {
    if model.is_robust() {
        beta - model.beta_star()
    } else if let Some(w) = model.signal_direction() {
        let along = beta.dot(&w);
        beta - &(w.mapv(|v| v * along))
    } else {
        beta.clone()
    }
}

struct PairOutcome {
    record: PairFitRecord,
    fits: (FitResult, FitResult),
}

#[allow(clippy::too_many_arguments)]
fn one_pair_replication(
    model: &DataModel,
    loss: &LossModel,
    n: usize,
    p: usize,
    q: f64,
    seed: u64,
    rep: usize,
) -> Result<PairOutcome> {
    let dataset_seed = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(2 * rep as u64 + 1);
    let (x, y) = model.sample_dataset(n, p, dataset_seed)?;
    let subset_seed = dataset_seed.wrapping_add(0x5851_f42d_4c95_7f2d);
    let draw = draw_subsets(n, q, 2, subset_seed)?;
    let fit_a = fit_mestimator(&x, &y, &draw.subsets[0], loss)?;
    let fit_b = fit_mestimator(&x, &y, &draw.subsets[1], loss)?;
    let gh_a = gamma_hat(&x, &y, &fit_a, loss)?;
    let gh_b = gamma_hat(&x, &y, &fit_b, loss)?;
    let va = centered_component(model, &fit_a.beta_hat);
    let vb = centered_component(model, &fit_b.beta_hat);
    let inner = va.dot(&vb);
    let corr = inner / (va.dot(&va).sqrt() * vb.dot(&vb).sqrt());
    let record = PairFitRecord {
        corr,
        inner,
        est_eta_sigma2: eta_sigma2_hat(&fit_a, &gh_a, &fit_b, &gh_b, p),
        est_sigma2: (sigma2_hat(&fit_a, &gh_a, p), sigma2_hat(&fit_b, &gh_b, p)),
        overlap: draw.overlap_sizes[0][1],
    };
    Ok(PairOutcome {
        record,
        fits: (fit_a, fit_b),
    })
}

/// Fit estimator pairs on independent subsets across replications.
pub fn run_pair_experiment(
    model: &DataModel,
    loss: &LossModel,
    n: usize,
    p: usize,
    q: f64,
    reps: usize,
    seed: u64,
) -> Result<PairExperiment> {
    if ((q * n as f64).floor() as usize) <= p {
        return Err(SubevoError::Domain(format!(
            "floor(q n) = {} must exceed p = {p}",
            (q * n as f64).floor()
        )));
    }
    crate::init_thread_pool();
    let outcomes: Vec<(usize, Result<PairOutcome>)> = (0..reps)
        .into_par_iter()
        .map(|rep| (rep, one_pair_replication(model, loss, n, p, q, seed, rep)))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (rep, out) in outcomes {
        match out {
            Ok(o) => records.push(o.record),
            Err(e) => failures.push((rep, e.to_string())),
        }
    }
    let summary = summarize_pairs(&records, failures.len());
    Ok(PairExperiment {
        records,
        failures,
        summary,
    })
}

fn summarize_pairs(records: &[PairFitRecord], failed: usize) -> PairSummary {
    let corr: Vec<f64> = records.iter().map(|r| r.corr).collect();
    let inner: Vec<f64> = records.iter().map(|r| r.inner).collect();
    let est_eta: Vec<f64> = records.iter().map(|r| r.est_eta_sigma2).collect();
    let est_s2: Vec<f64> = records
        .iter()
        .flat_map(|r| [r.est_sigma2.0, r.est_sigma2.1])
        .collect();
    PairSummary {
        corr: mean_se(&corr),
        inner: mean_se(&inner),
        est_eta_sigma2: mean_se(&est_eta),
        est_sigma2: mean_se(&est_s2),
        completed: records.len(),
        failed,
    }
}

/// Per-replication outcome of a bagging experiment.
#[derive(Debug, Clone)]
pub struct BaggingRecord {
    pub m: usize,
    /// Squared risk of the bagged estimate (mode-specific bilinear form).
    pub bagged_risk: f64,
    /// Per-estimator squared risks.
    pub single_risks: Vec<f64>,
    /// Cross terms for every ordered pair m != m'.
    pub per_pair_inners: Vec<f64>,
    /// |bagged_risk - expansion from singles and pairs| (exact algebra).
    pub decomposition_gap: f64,
}

#[derive(Debug, Clone)]
pub struct BaggingSummary {
    pub bagged_risk: MeanSe,
    pub single_risk: MeanSe,
    pub completed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone)]
pub struct BaggingExperiment {
    pub records: Vec<BaggingRecord>,
    pub failures: Vec<(usize, String)>,
    pub summary: BaggingSummary,
}

#[allow(clippy::too_many_arguments)]
fn one_bagging_replication(
    model: &DataModel,
    loss: &LossModel,
    n: usize,
    p: usize,
    q: f64,
    m: usize,
    seed: u64,
    rep: usize,
) -> Result<BaggingRecord> {
    let dataset_seed = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(2 * rep as u64 + 1);
    let (x, y) = model.sample_dataset(n, p, dataset_seed)?;
    let subset_seed = dataset_seed.wrapping_add(0x5851_f42d_4c95_7f2d);
    let draw = draw_subsets(n, q, m, subset_seed)?;
    let mut fits = Vec::with_capacity(m);
    for subset in &draw.subsets {
        fits.push(fit_mestimator(&x, &y, subset, loss)?);
    }
    // centered/projected components carry the full risk decomposition:
    // robust -> beta - beta*; logistic -> (P beta, (w'beta - nu) along w)
    let comps: Vec<Array1<f64>> = fits.iter().map(|f| centered_full(model, &f.beta_hat)).collect();
    let mut bbar = Array1::<f64>::zeros(p);
    for c in &comps {
        bbar = &bbar + c;
    }
    bbar.mapv_inplace(|v| v / m as f64);
    let bagged_risk = bbar.dot(&bbar);
    let single_risks: Vec<f64> = comps.iter().map(|c| c.dot(c)).collect();
    let mut per_pair_inners = Vec::with_capacity(m * (m - 1));
    let mut cross_sum = 0.0;
    for a in 0..m {
        for b in 0..m {
            if a != b {
                let v = comps[a].dot(&comps[b]);
                per_pair_inners.push(v);
                cross_sum += v;
            }
        }
    }
    let expansion = (single_risks.iter().sum::<f64>() + cross_sum) / (m * m) as f64;
    Ok(BaggingRecord {
        m,
        bagged_risk,
        single_risks,
        per_pair_inners,
        decomposition_gap: (bagged_risk - expansion).abs(),
    })
}

/// Full centered error vector whose squared norm is the mode's risk:
/// robust: beta - beta*; logistic: P beta + (w'beta - nu) w.
fn centered_full(model: &DataModel, beta: &Array1<f64>) -> Array1<f64> {
    beta - model.beta_star()
}

/// Fit bagged ensembles of M subsample estimators across replications.
#[allow(clippy::too_many_arguments)]
pub fn run_bagging_experiment(
    model: &DataModel,
    loss: &LossModel,
    n: usize,
    p: usize,
    q: f64,
    m: usize,
    reps: usize,
    seed: u64,
) -> Result<BaggingExperiment> {
    if ((q * n as f64).floor() as usize) <= p {
        return Err(SubevoError::Domain(format!(
            "floor(q n) = {} must exceed p = {p}",
            (q * n as f64).floor()
        )));
    }
    crate::init_thread_pool();
    let outcomes: Vec<(usize, Result<BaggingRecord>)> = (0..reps)
        .into_par_iter()
        .map(|rep| (rep, one_bagging_replication(model, loss, n, p, q, m, seed, rep)))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (rep, out) in outcomes {
        match out {
            Ok(r) => records.push(r),
            Err(e) => failures.push((rep, e.to_string())),
        }
    }
    let bagged: Vec<f64> = records.iter().map(|r| r.bagged_risk).collect();
    let singles: Vec<f64> = records
        .iter()
        .flat_map(|r| r.single_risks.iter().copied())
        .collect();
    let summary = BaggingSummary {
        bagged_risk: mean_se(&bagged),
        single_risk: mean_se(&singles),
        completed: records.len(),
        failed: failures.len(),
    };
    Ok(BaggingExperiment {
        records,
        failures,
        summary,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut ks: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let v = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] == v {
            i += 1;
        }
        while j < xb.len() && xb[j] == v {
            j += 1;
        }
        ks = ks.max((i as f64 / na - j as f64 / nb).abs());
    }
    ks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa.sqrt() * sbb.sqrt())
}

/// Diagnostic of the limiting bivariate law of the in-overlap predicted pair.
#[derive(Debug, Clone)]
pub struct DiagnosticReport {
    /// Two-sample KS of each empirical marginal against its prox reference.
    pub ks_marginal_a: f64,
    pub ks_marginal_b: f64,
    /// Two-sample KS between the two empirical marginals.
    pub ks_between_empirical: f64,
    pub empirical_corr: f64,
    pub reference_corr: f64,
    pub corr_gap: f64,
    pub overlap: usize,
    pub theory_eta: f64,
}

/// Compare the in-overlap pairs (x_i' b(I), x_i' b(I~)) against the limiting
/// prox construction with eta-correlated Gaussian pairs reusing the observed
/// (y_i, U_i).
pub fn bivariate_prox_diagnostic(
    model: &DataModel,
    loss: &LossModel,
    n: usize,
    p: usize,
    q: f64,
    quad: QuadratureSpec,
    seed: u64,
) -> Result<DiagnosticReport> {
    let params = RegimeParams {
        delta: n as f64 / p as f64,
        q,
        model: model.clone(),
        loss: *loss,
        quad,
    };
    let engine = StateEvolution::new(params)?;
    let state = engine.solve_system()?;
    let eta = engine.solve_eta(&state)?.eta;

    let outcome = one_pair_replication(model, loss, n, p, q, seed, 0)?;
    let (fit_a, fit_b) = outcome.fits;
    let overlap: Vec<usize> = fit_a
        .subset
        .iter()
        .copied()
        .filter(|i| fit_b.subset.binary_search(i).is_ok())
        .collect();
    let dataset_seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1);
    let (x, y) = model.sample_dataset(n, p, dataset_seed)?;

    let w = model.signal_direction();
    let mut emp_a = Vec::with_capacity(overlap.len());
    let mut emp_b = Vec::with_capacity(overlap.len());
    let mut ref_a = Vec::with_capacity(overlap.len());
    let mut ref_b = Vec::with_capacity(overlap.len());
    let mut rng = derive_rng(seed, 0xD1A6);
    for &i in &overlap {
        emp_a.push(x.row(i).dot(&fit_a.beta_hat));
        emp_b.push(x.row(i).dot(&fit_b.beta_hat));
        let u_i = match &w {
            Some(w) => x.row(i).dot(w),
            None => 0.0,
        };
        let g = standard_normal(&mut rng);
        let z = standard_normal(&mut rng);
        let gt = eta * g + (1.0 - eta * eta).max(0.0).sqrt() * z;
        let arg = state.a * u_i;
        ref_a.push(loss.prox_unchecked(y[i], state.gamma, arg + state.sigma * g));
        ref_b.push(loss.prox_unchecked(y[i], state.gamma, arg + state.sigma * gt));
    }
    let empirical_corr = pearson(&emp_a, &emp_b);
    let reference_corr = pearson(&ref_a, &ref_b);
    Ok(DiagnosticReport {
        ks_marginal_a: two_sample_ks(&emp_a, &ref_a),
        ks_marginal_b: two_sample_ks(&emp_b, &ref_b),
        ks_between_empirical: two_sample_ks(&emp_a, &emp_b),
        empirical_corr,
        reference_corr,
        corr_gap: (empirical_corr - reference_corr).abs(),
        overlap: overlap.len(),
        theory_eta: eta,
    })
}
