//! Named experiment recipes reproducing the standard figure configurations
//! at a configurable scale.

use std::path::Path;

use subevo::state;

use crate::{
    run_pair_rows, write_pair_outputs, write_theory_outputs, CliError, CliResult, ModelArgs,
};

fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let mut g = Vec::new();
    let mut q = start;
    while q <= stop + 1e-9 {
        g.push((q * 1e9).round() / 1e9);
        q += step;
    }
    g
}

fn robust_args(loss: &str, noise_df: f64, noise_scale: f64, delta: f64) -> ModelArgs {
    ModelArgs {
        mode: "robust".into(),
        loss: loss.into(),
        noise_df,
        noise_scale,
        signal_norm: 1.0,
        delta,
        design: "gaussian".into(),
        gh_nodes: 80,
        gl_nodes: 200,
    }
}

fn logistic_args(signal_norm: f64, delta: f64) -> ModelArgs {
    ModelArgs {
        mode: "logistic".into(),
        loss: "huber".into(),
        noise_df: 2.0,
        noise_scale: 1.0,
        signal_norm,
        delta,
        design: "gaussian".into(),
        gh_nodes: 80,
        gl_nodes: 200,
    }
}

pub fn run(name: &str, scale: f64, seed: u64, out: &Path) -> CliResult {
    match name {
        "fig1" => theory_scales(out, 2.0, "fig1"),
        "fig-noise-df3" => theory_scales(out, 3.0, "fig_noise_df3"),
        "fig2" => pair_recipe(
            out,
            "fig2",
            robust_args("huber", 2.0, 3.0, 5.0),
            5000,
            1000,
            100,
            grid(0.3, 1.0, 0.1),
            seed,
            scale,
        ),
        "fig3" => {
            for (tag, nu) in [("nu1", 1.0), ("nu2", 2.0)] {
                pair_recipe(
                    out,
                    &format!("fig3_{tag}"),
                    logistic_args(nu, 10.0),
                    5000,
                    500,
                    100,
                    grid(0.4, 1.0, 0.1),
                    seed,
                    scale,
                )?;
            }
            Ok(())
        }
        "fig-logistic-grid" => logistic_grid(out),
        "fig-small-n" => pair_recipe(
            out,
            "fig_small_n",
            robust_args("huber", 2.0, 3.0, 5.0),
            1000,
            200,
            100,
            grid(0.3, 1.0, 0.1),
            seed,
            scale,
        ),
        "fig-universality" => {
            for (tag, design) in [
                ("rademacher", "rademacher"),
                ("uniform", "uniform"),
                ("t4", "t:4"),
            ] {
                let mut args = robust_args("huber", 2.0, 1.0, 5.0);
                args.design = design.into();
                pair_recipe(
                    out,
                    &format!("fig_universality_{tag}"),
                    args,
                    5000,
                    1000,
                    100,
                    grid(0.3, 0.9, 0.2),
                    seed,
                    scale,
                )?;
            }
            Ok(())
        }
        other => Err(CliError::Usage(format!(
            "unknown figure '{other}'; available: fig1, fig-noise-df3, fig2, fig3, fig-logistic-grid, fig-small-n, fig-universality"
        ))),
    }
}

/// Huber theory curves across noise scales with the affine reference.
fn theory_scales(out: &Path, noise_df: f64, stem: &str) -> CliResult {
    let delta = 5.0;
    let q_grid = grid(0.22, 1.0, 0.02);
    let mut curves = Vec::new();
    for noise_scale in [1.0, 1.5, 2.0, 5.0, 10.0] {
        let args = robust_args("huber", noise_df, noise_scale, delta);
        let params = args.build_params(q_grid[0])?;
        curves.push((
            format!("scale {noise_scale}"),
            state::risk_curve(&params, &q_grid),
        ));
    }
    let ok = write_theory_outputs(
        out,
        stem,
        &format!("Huber theory, t(df={noise_df}) noise, delta = {delta}"),
        &curves,
        Some(delta),
    )?;
    if ok == 0 {
        return Err(CliError::AllRowsFailed);
    }
    Ok(())
}

/// Theory risk curves over large aspect ratios and small signal strengths.
fn logistic_grid(out: &Path) -> CliResult {
    let q_grid = grid(0.12, 1.0, 0.04);
    let mut any_ok = 0;
    for delta in [15.0, 20.0, 25.0, 30.0] {
        let mut curves = Vec::new();
        for nu in [0.0, 0.1, 0.2, 0.3, 0.4] {
            let args = logistic_args(nu, delta);
            let params = args.build_params(1.0)?;
            curves.push((format!("nu {nu}"), state::risk_curve(&params, &q_grid)));
        }
        any_ok += write_theory_outputs(
            out,
            &format!("fig_logistic_grid_delta{delta}"),
            &format!("logistic risk curves, delta = {delta}"),
            &curves,
            None,
        )?;
    }
    if any_ok == 0 {
        return Err(CliError::AllRowsFailed);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn pair_recipe(
    out: &Path,
    stem: &str,
    args: ModelArgs,
    n: usize,
    p: usize,
    reps: usize,
    q_grid: Vec<f64>,
    seed: u64,
    scale: f64,
) -> CliResult {
    let rows = run_pair_rows(&args, &q_grid, n, p, reps, seed, scale)?;
    let ok = write_pair_outputs(
        out,
        stem,
        &format!("{stem} ({} mode, delta = {})", args.mode, args.delta),
        &rows,
    )?;
    if ok == 0 {
        return Err(CliError::AllRowsFailed);
    }
    Ok(())
}
