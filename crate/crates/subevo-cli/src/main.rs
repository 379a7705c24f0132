//! Command-line front end: deterministic theory curves, subsampling
//! simulations, prox-distribution diagnostics, and named figure recipes,
//! all emitting machine-readable CSV plus self-contained SVG plots.

// negated comparisons like !(x > 0.0) keep NaN parameters failing validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod csv;
mod recipes;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use subevo::data::{DataModel, DesignLaw, NoiseLaw};
use subevo::loss::LossModel;
use subevo::quad::QuadratureSpec;
use subevo::sim;
use subevo::state::{self, RegimeParams};
use subevo::SubevoError;

use csv::{fmt, CsvWriter};

#[derive(Parser)]
#[command(
    name = "subevo",
    version,
    about = "Asymptotics of subsampling without replacement for robust and logistic regression"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the deterministic (sigma, gamma, a, eta) theory on a q-grid
    Theory(TheoryArgs),
    /// Two-subsample pair experiment: correlations, inner products, plug-ins
    SimulatePair(SimulateArgs),
    /// Bagged-ensemble experiment against the theoretical risk limit
    SimulateBagging(BaggingArgs),
    /// Bivariate prox-distribution diagnostic on the subsample overlap
    Diagnostic(DiagnosticArgs),
    /// Reproduce a named figure recipe at configurable scale
    Figure(FigureArgs),
}

#[derive(Args, Clone)]
pub struct ModelArgs {
    /// robust | logistic
    #[arg(long, default_value = "robust")]
    mode: String,
    /// huber | pseudo-huber | scaled-pseudo-huber:<lambda> (robust mode)
    #[arg(long, default_value = "huber")]
    loss: String,
    /// Degrees of freedom of the t noise (robust mode)
    #[arg(long, default_value_t = 2.0)]
    noise_df: f64,
    /// Scale multiplying the t noise (robust mode)
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
    /// Ground-truth norm nu (logistic mode)
    #[arg(long, default_value_t = 1.0)]
    signal_norm: f64,
    /// Oversampling ratio n/p
    #[arg(long, default_value_t = 5.0)]
    delta: f64,
    /// gaussian | rademacher | uniform | t:<df>  (simulation only)
    #[arg(long, default_value = "gaussian")]
    design: String,
    #[arg(long, default_value_t = 80)]
    gh_nodes: usize,
    #[arg(long, default_value_t = 200)]
    gl_nodes: usize,
}

#[derive(Args, Clone)]
pub struct GridArgs {
    /// Single subsample fraction
    #[arg(long)]
    q: Option<f64>,
    /// Grid start:stop:step (inclusive)
    #[arg(long, value_name = "START:STOP:STEP")]
    q_grid: Option<String>,
}

#[derive(Args)]
struct TheoryArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    p: usize,
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Shrink (n, p, reps) proportionally
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct BaggingArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    p: usize,
    /// Number of subsample estimators in the ensemble
    #[arg(long = "M", default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 30)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnosticArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0.6)]
    q: f64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    p: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct FigureArgs {
    /// fig1 | fig-noise-df3 | fig2 | fig3 | fig-logistic-grid | fig-small-n | fig-universality
    #[arg(long)]
    name: String,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Failures mapped to the documented exit codes.
pub enum CliError {
    /// Exit 2: invalid flags or parameters.
    Usage(String),
    /// Exit 3: every grid row failed.
    AllRowsFailed,
    /// Exit 4: numerical or I/O failure.
    Fatal(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Fatal(format!("io error: {e}"))
    }
}

impl From<SubevoError> for CliError {
    fn from(e: SubevoError) -> Self {
        match e {
            SubevoError::Domain(m) => CliError::Usage(m),
            other => CliError::Fatal(other.to_string()),
        }
    }
}

pub type CliResult = Result<(), CliError>;

fn main() -> ExitCode {
    subevo::init_thread_pool();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Theory(a) => cmd_theory(&a),
        Cmd::SimulatePair(a) => cmd_simulate_pair(&a),
        Cmd::SimulateBagging(a) => cmd_simulate_bagging(&a),
        Cmd::Diagnostic(a) => cmd_diagnostic(&a),
        Cmd::Figure(a) => recipes::run(&a.name, a.scale, a.seed, &a.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::AllRowsFailed) => {
            eprintln!("error: every requested row failed");
            ExitCode::from(3)
        }
        Err(CliError::Fatal(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(4)
        }
    }
}

impl ModelArgs {
    pub fn parse_loss(&self) -> Result<LossModel, CliError> {
        if self.mode == "logistic" {
            return Ok(LossModel::logistic());
        }
        match self.loss.as_str() {
            "huber" => Ok(LossModel::huber()),
            "pseudo-huber" => Ok(LossModel::pseudo_huber()),
            s if s.starts_with("scaled-pseudo-huber:") => {
                let lambda: f64 = s["scaled-pseudo-huber:".len()..]
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad lambda in loss '{s}'")))?;
                Ok(LossModel::scaled_pseudo_huber(lambda)?)
            }
            other => Err(CliError::Usage(format!("unknown loss '{other}'"))),
        }
    }

    pub fn parse_design(&self) -> Result<DesignLaw, CliError> {
        let law = match self.design.as_str() {
            "gaussian" => DesignLaw::Gaussian,
            "rademacher" => DesignLaw::Rademacher,
            "uniform" => DesignLaw::UniformScaled,
            s if s.starts_with("t:") => {
                let df: f64 = s[2..]
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad df in design '{s}'")))?;
                DesignLaw::StudentTScaled(df)
            }
            other => return Err(CliError::Usage(format!("unknown design '{other}'"))),
        };
        law.validate()?;
        Ok(law)
    }

    /// Data model for simulation in dimension p.
    pub fn build_model(&self, p: usize) -> Result<DataModel, CliError> {
        let design = self.parse_design()?;
        match self.mode.as_str() {
            "robust" => {
                let noise = NoiseLaw::student_t(self.noise_df, self.noise_scale)?;
                Ok(DataModel::robust_zero(noise, design, p)?)
            }
            "logistic" => Ok(DataModel::logistic(self.signal_norm, design, p)?),
            other => Err(CliError::Usage(format!("unknown mode '{other}'"))),
        }
    }

    /// Theory parameters; the deterministic system assumes a Gaussian design.
    pub fn build_params(&self, q: f64) -> Result<RegimeParams, CliError> {
        let loss = self.parse_loss()?;
        let model = match self.mode.as_str() {
            "robust" => {
                let noise = NoiseLaw::student_t(self.noise_df, self.noise_scale)?;
                DataModel::robust_zero(noise, DesignLaw::Gaussian, 1)?
            }
            "logistic" => DataModel::logistic(self.signal_norm, DesignLaw::Gaussian, 1)?,
            other => return Err(CliError::Usage(format!("unknown mode '{other}'"))),
        };
        Ok(RegimeParams {
            delta: self.delta,
            q,
            model,
            loss,
            quad: QuadratureSpec {
                gh_nodes: self.gh_nodes,
                gl_nodes: self.gl_nodes,
            },
        })
    }
}

impl GridArgs {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        if let Some(spec) = &self.q_grid {
            let parts: Vec<&str> = spec.split(':').collect();
            if parts.len() != 3 {
                return Err(CliError::Usage(format!(
                    "q-grid must be start:stop:step, got '{spec}'"
                )));
            }
            let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
            let nums = nums.map_err(|_| CliError::Usage(format!("bad q-grid '{spec}'")))?;
            let (start, stop, step) = (nums[0], nums[1], nums[2]);
            if !(step > 0.0) || stop < start {
                return Err(CliError::Usage(format!("degenerate q-grid '{spec}'")));
            }
            let mut grid = Vec::new();
            let mut k = 0usize;
            loop {
                let q = start + step * k as f64;
                if q > stop + 1e-12 {
                    break;
                }
                grid.push((q * 1e12).round() / 1e12);
                k += 1;
            }
            if grid.is_empty() {
                return Err(CliError::Usage("empty q-grid".into()));
            }
            Ok(grid)
        } else if let Some(q) = self.q {
            Ok(vec![q])
        } else {
            Err(CliError::Usage("provide --q or --q-grid".into()))
        }
    }
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

pub const THEORY_HEADER: [&str; 7] = ["q", "eta", "sigma2", "gamma", "a", "eta_sigma2", "status"];

pub fn write_theory_outputs(
    out: &Path,
    stem: &str,
    title: &str,
    curves: &[(String, Vec<state::RiskRow>)],
    affine_reference: Option<f64>,
) -> Result<usize, CliError> {
    ensure_dir(out)?;
    let mut header = vec!["label"];
    header.extend(THEORY_HEADER);
    let mut writer = CsvWriter::create(&out.join(format!("{stem}.csv")), &header)?;
    let mut ok_rows = 0usize;
    let mut eta_series = Vec::new();
    let mut risk_series = Vec::new();
    for (label, rows) in curves {
        let mut eta_pts = Vec::new();
        let mut risk_pts = Vec::new();
        for row in rows {
            match &row.outcome {
                Ok(pt) => {
                    ok_rows += 1;
                    writer.write_row(&[
                        label.clone(),
                        fmt(row.q),
                        fmt(pt.eta),
                        fmt(pt.sigma2),
                        fmt(pt.gamma),
                        fmt(pt.a),
                        fmt(pt.eta_sigma2),
                        "ok".into(),
                    ])?;
                    eta_pts.push((row.q, pt.eta));
                    risk_pts.push((row.q, pt.eta_sigma2));
                }
                Err(msg) => {
                    writer.write_row(&[
                        label.clone(),
                        fmt(row.q),
                        "nan".into(),
                        "nan".into(),
                        "nan".into(),
                        "nan".into(),
                        "nan".into(),
                        msg.clone(),
                    ])?;
                }
            }
        }
        eta_series.push(svg::Series::line(label.clone(), eta_pts));
        risk_series.push(svg::Series::line(label.clone(), risk_pts));
    }
    if let Some(delta) = affine_reference {
        // the affine comparison line (q - 1/delta) / (1 - 1/delta)
        let pts: Vec<(f64, f64)> = curves
            .first()
            .map(|(_, rows)| {
                rows.iter()
                    .map(|r| r.q)
                    .filter(|&q| q * delta > 1.0)
                    .map(|q| (q, (q - 1.0 / delta) / (1.0 - 1.0 / delta)))
                    .collect()
            })
            .unwrap_or_default();
        eta_series.push(svg::Series::dashed("affine reference", pts));
    }
    std::fs::write(
        out.join(format!("{stem}_eta.svg")),
        svg::render(title, "q", "eta", &eta_series),
    )?;
    std::fs::write(
        out.join(format!("{stem}_risk.svg")),
        svg::render(title, "q", "sigma^2 * eta", &risk_series),
    )?;
    writer.finish()?;
    Ok(ok_rows)
}

fn cmd_theory(args: &TheoryArgs) -> CliResult {
    let grid = args.grid.values()?;
    let params = args.model.build_params(grid[0])?;
    let rows = state::risk_curve(&params, &grid);
    let affine = (args.model.mode == "robust").then_some(args.model.delta);
    let label = if args.model.mode == "robust" {
        format!("{} scale {}", args.model.loss, args.model.noise_scale)
    } else {
        format!("logistic nu {}", args.model.signal_norm)
    };
    let ok = write_theory_outputs(
        &args.out,
        "theory",
        &format!("theory curves (delta = {})", args.model.delta),
        &[(label, rows)],
        affine,
    )?;
    if ok == 0 {
        return Err(CliError::AllRowsFailed);
    }
    Ok(())
}

pub const PAIR_HEADER: [&str; 15] = [
    "q",
    "corr_mean",
    "corr_se",
    "inner_mean",
    "inner_se",
    "est_eta_sigma2_mean",
    "est_eta_sigma2_se",
    "est_sigma2_mean",
    "est_sigma2_se",
    "theory_eta",
    "theory_sigma2",
    "theory_eta_sigma2",
    "completed",
    "failed",
    "status",
];

pub struct PairRunOutput {
    pub q: f64,
    pub summary: Option<sim::PairSummary>,
    pub theory: Option<state::RiskPoint>,
    pub status: String,
}

pub fn run_pair_rows(
    model_args: &ModelArgs,
    grid: &[f64],
    n: usize,
    p: usize,
    reps: usize,
    seed: u64,
    scale: f64,
) -> Result<Vec<PairRunOutput>, CliError> {
    let (n, p, reps) = scaled_sizes(n, p, reps, scale)?;
    let model = model_args.build_model(p)?;
    let loss = model_args.parse_loss()?;
    let mut out = Vec::new();
    for &q in grid {
        let theory = model_args
            .build_params(q)
            .ok()
            .and_then(|params| solve_point(&params).ok());
        match sim::run_pair_experiment(&model, &loss, n, p, q, reps, seed) {
            Ok(exp) => {
                let status = if exp.summary.completed == 0 {
                    "all replications failed".to_string()
                } else {
                    "ok".to_string()
                };
                out.push(PairRunOutput {
                    q,
                    summary: Some(exp.summary),
                    theory,
                    status,
                });
            }
            Err(e) => out.push(PairRunOutput {
                q,
                summary: None,
                theory,
                status: e.to_string(),
            }),
        }
    }
    Ok(out)
}

pub fn solve_point(params: &RegimeParams) -> Result<state::RiskPoint, SubevoError> {
    let engine = state::StateEvolution::new(params.clone())?;
    let st = engine.solve_system()?;
    let eta = engine.solve_eta(&st)?;
    Ok(state::RiskPoint {
        eta: eta.eta,
        sigma2: st.sigma * st.sigma,
        gamma: st.gamma,
        a: st.a,
        eta_sigma2: eta.eta * st.sigma * st.sigma,
    })
}

pub fn scaled_sizes(
    n: usize,
    p: usize,
    reps: usize,
    scale: f64,
) -> Result<(usize, usize, usize), CliError> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(CliError::Usage(format!("scale must be in (0,1], got {scale}")));
    }
    let n = ((n as f64 * scale).round() as usize).max(2);
    let p = ((p as f64 * scale).round() as usize).max(1);
    let reps = ((reps as f64 * scale).ceil() as usize).max(1);
    Ok((n, p, reps))
}

pub fn write_pair_outputs(
    out: &Path,
    stem: &str,
    title: &str,
    rows: &[PairRunOutput],
) -> Result<usize, CliError> {
    ensure_dir(out)?;
    let mut writer = CsvWriter::create(&out.join(format!("{stem}.csv")), &PAIR_HEADER)?;
    let mut ok_rows = 0;
    let mut corr_pts = Vec::new();
    let mut corr_err = Vec::new();
    let mut eta_pts = Vec::new();
    let mut inner_pts = Vec::new();
    let mut inner_err = Vec::new();
    let mut risk_pts = Vec::new();
    for row in rows {
        let t = row.theory.as_ref();
        let s = row.summary.as_ref();
        let field = |v: Option<f64>| v.map(fmt).unwrap_or_else(|| "nan".into());
        writer.write_row(&[
            fmt(row.q),
            field(s.map(|s| s.corr.mean)),
            field(s.map(|s| s.corr.se)),
            field(s.map(|s| s.inner.mean)),
            field(s.map(|s| s.inner.se)),
            field(s.map(|s| s.est_eta_sigma2.mean)),
            field(s.map(|s| s.est_eta_sigma2.se)),
            field(s.map(|s| s.est_sigma2.mean)),
            field(s.map(|s| s.est_sigma2.se)),
            field(t.map(|t| t.eta)),
            field(t.map(|t| t.sigma2)),
            field(t.map(|t| t.eta_sigma2)),
            s.map(|s| s.completed.to_string()).unwrap_or_default(),
            s.map(|s| s.failed.to_string()).unwrap_or_default(),
            row.status.clone(),
        ])?;
        if row.status == "ok" {
            ok_rows += 1;
        }
        if let Some(s) = s {
            if s.completed > 0 {
                corr_pts.push((row.q, s.corr.mean));
                corr_err.push(if s.corr.se.is_nan() { 0.0 } else { s.corr.se });
                inner_pts.push((row.q, s.inner.mean));
                inner_err.push(if s.inner.se.is_nan() { 0.0 } else { s.inner.se });
            }
        }
        if let Some(t) = t {
            eta_pts.push((row.q, t.eta));
            risk_pts.push((row.q, t.eta_sigma2));
        }
    }
    std::fs::write(
        out.join(format!("{stem}_corr.svg")),
        svg::render(
            title,
            "q",
            "correlation",
            &[
                svg::Series::line("theory eta", eta_pts),
                svg::Series::points_with_errors("simulated corr", corr_pts, corr_err),
            ],
        ),
    )?;
    std::fs::write(
        out.join(format!("{stem}_inner.svg")),
        svg::render(
            title,
            "q",
            "inner product",
            &[
                svg::Series::line("theory eta*sigma^2", risk_pts),
                svg::Series::points_with_errors("simulated inner", inner_pts, inner_err),
            ],
        ),
    )?;
    writer.finish()?;
    Ok(ok_rows)
}

fn cmd_simulate_pair(args: &SimulateArgs) -> CliResult {
    let grid = args.grid.values()?;
    let rows = run_pair_rows(
        &args.model,
        &grid,
        args.n,
        args.p,
        args.reps,
        args.seed,
        args.scale,
    )?;
    let ok = write_pair_outputs(
        &args.out,
        "simulate_pair",
        &format!(
            "pair experiment ({} mode, delta = {})",
            args.model.mode, args.model.delta
        ),
        &rows,
    )?;
    if ok == 0 {
        return Err(CliError::AllRowsFailed);
    }
    Ok(())
}

pub const BAGGING_HEADER: [&str; 9] = [
    "q",
    "m",
    "bagged_risk_mean",
    "bagged_risk_se",
    "single_risk_mean",
    "theory_limit",
    "completed",
    "failed",
    "status",
];

fn cmd_simulate_bagging(args: &BaggingArgs) -> CliResult {
    let grid = args.grid.values()?;
    let (n, p, reps) = scaled_sizes(args.n, args.p, args.reps, args.scale)?;
    let model = args.model.build_model(p)?;
    let loss = args.model.parse_loss()?;
    ensure_dir(&args.out)?;
    let mut writer = CsvWriter::create(&args.out.join("simulate_bagging.csv"), &BAGGING_HEADER)?;
    let mut ok_rows = 0;
    let mut sim_pts = Vec::new();
    let mut sim_err = Vec::new();
    let mut theory_pts = Vec::new();
    for &q in &grid {
        let theory = args
            .model
            .build_params(q)
            .ok()
            .and_then(|params| solve_point(&params).ok())
            .map(|pt| {
                let base = state::bagged_risk_limit(pt.eta, pt.sigma2, args.m).unwrap_or(f64::NAN);
                if args.model.mode == "logistic" {
                    // logistic risk includes the squared signal-direction bias
                    base + (pt.a - args.model.signal_norm) * (pt.a - args.model.signal_norm)
                } else {
                    base
                }
            });
        match sim::run_bagging_experiment(&model, &loss, n, p, q, args.m, reps, args.seed) {
            Ok(exp) => {
                let status = if exp.summary.completed == 0 {
                    "all replications failed".to_string()
                } else {
                    ok_rows += 1;
                    "ok".to_string()
                };
                writer.write_row(&[
                    fmt(q),
                    args.m.to_string(),
                    fmt(exp.summary.bagged_risk.mean),
                    fmt(exp.summary.bagged_risk.se),
                    fmt(exp.summary.single_risk.mean),
                    theory.map(fmt).unwrap_or_else(|| "nan".into()),
                    exp.summary.completed.to_string(),
                    exp.summary.failed.to_string(),
                    status,
                ])?;
                if exp.summary.completed > 0 {
                    sim_pts.push((q, exp.summary.bagged_risk.mean));
                    sim_err.push(if exp.summary.bagged_risk.se.is_nan() {
                        0.0
                    } else {
                        exp.summary.bagged_risk.se
                    });
                }
                if let Some(t) = theory {
                    theory_pts.push((q, t));
                }
            }
            Err(e) => {
                writer.write_row(&[
                    fmt(q),
                    args.m.to_string(),
                    "nan".into(),
                    "nan".into(),
                    "nan".into(),
                    theory.map(fmt).unwrap_or_else(|| "nan".into()),
                    "0".into(),
                    "0".into(),
                    e.to_string(),
                ])?;
            }
        }
    }
    std::fs::write(
        args.out.join("simulate_bagging.svg"),
        svg::render(
            &format!("bagged risk, M = {}", args.m),
            "q",
            "squared risk",
            &[
                svg::Series::line("theory limit", theory_pts),
                svg::Series::points_with_errors("simulated", sim_pts, sim_err),
            ],
        ),
    )?;
    writer.finish()?;
    if ok_rows == 0 {
        return Err(CliError::AllRowsFailed);
    }
    Ok(())
}

pub const DIAGNOSTIC_HEADER: [&str; 11] = [
    "q",
    "n",
    "p",
    "overlap",
    "ks_marginal_a",
    "ks_marginal_b",
    "ks_between_empirical",
    "empirical_corr",
    "reference_corr",
    "corr_gap",
    "theory_eta",
];

fn cmd_diagnostic(args: &DiagnosticArgs) -> CliResult {
    let (n, p, _) = scaled_sizes(args.n, args.p, 1, args.scale)?;
    let model = args.model.build_model(p)?;
    let loss = args.model.parse_loss()?;
    let quad = QuadratureSpec {
        gh_nodes: args.model.gh_nodes,
        gl_nodes: args.model.gl_nodes,
    };
    let report = sim::bivariate_prox_diagnostic(&model, &loss, n, p, args.q, quad, args.seed)
        .map_err(|e| match e {
            SubevoError::Domain(m) => CliError::Usage(m),
            other => CliError::Fatal(other.to_string()),
        })?;
    ensure_dir(&args.out)?;
    let mut writer = CsvWriter::create(&args.out.join("diagnostic.csv"), &DIAGNOSTIC_HEADER)?;
    writer.write_row(&[
        fmt(args.q),
        n.to_string(),
        p.to_string(),
        report.overlap.to_string(),
        fmt(report.ks_marginal_a),
        fmt(report.ks_marginal_b),
        fmt(report.ks_between_empirical),
        fmt(report.empirical_corr),
        fmt(report.reference_corr),
        fmt(report.corr_gap),
        fmt(report.theory_eta),
    ])?;
    writer.finish()?;
    println!(
        "diagnostic: overlap {}, KS ({:.4}, {:.4}), corr gap {:.4}",
        report.overlap, report.ks_marginal_a, report.ks_marginal_b, report.corr_gap
    );
    Ok(())
}
