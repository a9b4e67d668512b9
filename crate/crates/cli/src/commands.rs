//! Subcommand bodies. Each one fills a [`Run`] and leaves writing to the caller.

use std::f64::consts::PI;

use psapprox::estimates::{uhat_on_grid, BoundReport};
use psapprox::exterior::export::{format_float, read_trajectory, trajectory_files};
use psapprox::exterior::{ExteriorGrid, FieldTrajectory};
use psapprox::green::{eval_kernel, lp_norm, sup_grad_norm, HeatKernelParams};
use psapprox::matching::{optimize, OptimizationTrace};
use psapprox::suite::{self, Criterion};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::manifest::{Check, Run, RunManifest};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Serialize)]
struct Versioned<'a, T> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

fn plain<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(psapprox::Error::from)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn json<T: Serialize>(body: &T) -> Result<Vec<u8>, CliError> {
    plain(&Versioned {
        schema_version: REPORT_SCHEMA,
        body,
    })
}

fn row(values: &[f64]) -> String {
    let cells: Vec<String> = values.iter().map(|v| format_float(*v)).collect();
    cells.join(",")
}

fn criteria_csv(list: &[Criterion]) -> String {
    let mut s = String::from("id,title,passed,detail\n");
    for c in list {
        s.push_str(&format!("{},{},{},\"{}\"\n", c.id, c.title, c.passed, c.detail.replace('"', "'")));
    }
    s
}

fn closed_form_checks() -> Vec<Criterion> {
    let p = HeatKernelParams::new(1.0).expect("d = 1");
    let mut out = Vec::new();
    let mut push = |title: &str, got: f64, want: f64| {
        let err = (got - want).abs() / want.abs();
        out.push(Criterion {
            id: 0,
            title: title.into(),
            passed: err < 1e-12,
            detail: format!("{} vs {}, relative error {err:.2e}", format_float(got), format_float(want)),
        });
    };
    push("kernel at |x| = 1, t = 1", eval_kernel([1.0, 0.0], 1.0, p).unwrap_or(f64::NAN), (-0.25f64).exp() / (4.0 * PI));
    push("gradient envelope at |x| = 1", sup_grad_norm([0.0, 1.0], p), 8.0 * (-2.0f64).exp() / PI);
    push("L1 norm is one", lp_norm(2.5, 1.0, p).unwrap_or(f64::NAN), 1.0);
    push("L2 norm at t = 1", lp_norm(1.0, 2.0, p).unwrap_or(f64::NAN), (8.0 * PI).powf(-0.5));
    out
}

/// Kernel property suite.
pub fn green_check(run: &mut Run) -> Vec<Criterion> {
    let mut list: Vec<Criterion> = [1, 2].into_iter().filter_map(suite::run).collect();
    list.extend(closed_form_checks());
    for c in &list {
        run.checks.push(Check::new(&c.title, c.passed, c.detail.clone()));
    }
    run.add("green_check.csv", criteria_csv(&list));
    list
}

fn point_trajectory(cfg: &ExperimentConfig, grid: &ExteriorGrid, times: &[f64]) -> Result<FieldTrajectory, CliError> {
    let model = cfg.experiment().point_model()?;
    let fields = times
        .iter()
        .map(|t| uhat_on_grid(&model, grid, *t))
        .collect::<psapprox::Result<Vec<_>>>()?;
    Ok(FieldTrajectory::from_fields(grid, times.to_vec(), fields)?)
}

fn add_trajectory(run: &mut Run, traj: &FieldTrajectory, grid: &ExteriorGrid, stem: &str) -> Result<(), CliError> {
    for (name, bytes) in trajectory_files(traj, grid, stem)? {
        run.add(&name, bytes);
    }
    Ok(())
}

fn full_files() -> Vec<String> {
    ["full.csv", "full.bin", "full.json"].map(String::from).to_vec()
}

/// Full and point-model trajectories on the same grid and stamps.
pub fn simulate(cfg: &ExperimentConfig, run: &mut Run) -> Result<(), CliError> {
    run.trajectory_hash = Some(cfg.trajectory_hash());
    run.trajectory_source = Some("solved".into());
    let (grid, full) = cfg.experiment().simulate()?;
    let point = point_trajectory(cfg, &grid, &full.times)?;
    add_trajectory(run, &full, &grid, "full")?;
    add_trajectory(run, &point, &grid, "point")?;
    Ok(())
}

/// Cached full trajectory when the previous manifest vouches for it.
fn cached(cfg: &ExperimentConfig, run: &Run) -> Option<(ExteriorGrid, FieldTrajectory)> {
    let m = RunManifest::read(run.dir())?;
    if m.trajectory_hash.as_deref() != Some(cfg.trajectory_hash().as_str()) || !m.verifies(run.dir(), &full_files()) {
        return None;
    }
    read_trajectory(run.dir(), "full").ok()
}

fn series_csv(r: &BoundReport) -> String {
    let th = &r.theorem;
    let mut head = vec!["t", "c_star", "bound", "l2_err_sq", "h1_err_sq", "h1_err_integral"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    for e in &th.epsilon_grid {
        head.push(format!("l2_margin_eps_{e}"));
    }
    for e in &th.epsilon_grid {
        head.push(format!("h1_margin_eps_{e}"));
    }
    let mut s = head.join(",") + "\n";
    for k in 0..r.times.len() {
        let mut v = vec![
            r.times[k],
            r.c_star[k],
            r.c_star_bound[k],
            r.l2_err_sq[k],
            r.h1_err_sq[k],
            th.h1_integral[k],
        ];
        v.extend(th.l2_margins.iter().map(|m| m[k]));
        v.extend(th.h1_margins.iter().map(|m| m[k]));
        s.push_str(&row(&v));
        s.push('\n');
    }
    s
}

fn bound_terms_csv(r: &BoundReport) -> String {
    let mut s = String::from("t,flux_term,initial_term,source_term,total\n");
    for b in &r.bound_terms {
        s.push_str(&row(&[b.time, b.flux_term, b.initial_term, b.source_term, b.total]));
        s.push('\n');
    }
    s
}

fn energy_csv(r: &BoundReport) -> String {
    let mut s = String::from("t,rate,dissipation,boundary,residual,scale\n");
    for e in &r.energy {
        s.push_str(&row(&[e.time, e.rate, e.dissipation, e.boundary, e.residual, e.scale]));
        s.push('\n');
    }
    s
}

fn report_checks(cfg: &ExperimentConfig, r: &BoundReport) -> Vec<Check> {
    let mut checks = vec![
        Check::new("c_star_monotone", r.c_star_monotone, ""),
        Check::new(
            "bound_dominates",
            r.bound_dominates,
            format!("max c*/bound {:.3e}", max_ratio(&r.c_star, &r.c_star_bound)),
        ),
        Check::new(
            "theorem_margins",
            r.theorem.pass,
            format!("max margin {:.4} against 1 + {}", r.theorem.max_margin, r.theorem.slack),
        ),
    ];
    if let Some(tol) = cfg.tolerances.energy_ratio {
        let got = r.max_energy_ratio();
        checks.push(Check::new("energy_identity", got <= tol, format!("max ratio {got:.3e} against {tol}")));
    }
    checks
}

fn max_ratio(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).filter(|(_, b)| **b > 0.0).map(|(a, b)| a / b).fold(0.0, f64::max)
}

fn report_artifacts(cfg: &ExperimentConfig, run: &mut Run, grid: &ExteriorGrid, traj: &FieldTrajectory) -> Result<BoundReport, CliError> {
    let r = cfg.experiment().compare_with(grid, traj)?;
    run.add("report.json", plain(&r)?);
    run.add("series.csv", series_csv(&r));
    run.add("bound_terms.csv", bound_terms_csv(&r));
    run.add("energy.csv", energy_csv(&r));
    run.checks.extend(report_checks(cfg, &r));
    Ok(r)
}

/// Fresh solve, mismatch functional, error norms, energy terms and margins.
pub fn compare(cfg: &ExperimentConfig, run: &mut Run) -> Result<BoundReport, CliError> {
    run.trajectory_hash = Some(cfg.trajectory_hash());
    run.trajectory_source = Some("solved".into());
    let (grid, traj) = cfg.experiment().simulate()?;
    add_trajectory(run, &traj, &grid, "full")?;
    report_artifacts(cfg, run, &grid, &traj)
}

/// Margin report on the cached trajectory; solves only when the cache does not verify.
pub fn bounds(cfg: &ExperimentConfig, run: &mut Run) -> Result<BoundReport, CliError> {
    run.trajectory_hash = Some(cfg.trajectory_hash());
    let (grid, traj) = match cached(cfg, run) {
        Some(hit) => {
            run.trajectory_source = Some("cached".into());
            for f in full_files() {
                run.keep(&f);
            }
            hit
        }
        None => {
            run.trajectory_source = Some("solved".into());
            let (grid, traj) = cfg.experiment().simulate()?;
            add_trajectory(run, &traj, &grid, "full")?;
            (grid, traj)
        }
    };
    report_artifacts(cfg, run, &grid, &traj)
}

fn trace_csv(t: &OptimizationTrace, knots: usize) -> String {
    let dim = t.baseline.len();
    let mut head: Vec<String> = ["iteration", "objective", "best_so_far"].map(String::from).to_vec();
    head.extend((0..dim).map(|k| if k < knots { format!("phibar_{k}") } else { format!("v0_{}", k - knots) }));
    let mut s = head.join(",") + "\n";
    for (i, it) in t.iterates.iter().enumerate() {
        let mut v = vec![it.objective, t.best_so_far[i]];
        v.extend(&it.params);
        s.push_str(&format!("{i},{}\n", row(&v)));
    }
    s
}

/// Nelder–Mead matching of `φ̄` and the interior bump weights.
pub fn optimize_cmd(cfg: &ExperimentConfig, run: &mut Run) -> Result<OptimizationTrace, CliError> {
    let (problem, settings) = match (cfg.matching_problem(), &cfg.matching) {
        (Some(p), Some(m)) => (p, m),
        _ => return Err(CliError::Config("optimize needs a [matching] section".into())),
    };
    let trace = optimize(&problem, settings.budget, cfg.seed)?;
    run.add("optimize.json", json(&trace)?);
    run.add("trace.csv", trace_csv(&trace, problem.phibar_knots));
    run.checks.push(Check::new(
        "objective_reduced",
        trace.best_objective <= trace.baseline_objective,
        format!(
            "best {} against baseline {}",
            format_float(trace.best_objective),
            format_float(trace.baseline_objective)
        ),
    ));
    Ok(trace)
}

#[derive(Serialize)]
struct AcceptanceReport<'a> {
    criteria: &'a [Criterion],
    passed: bool,
}

/// The acceptance suite, all criteria or the listed ones.
pub fn reproduce(ids: &[u8], run: &mut Run) -> Result<Vec<Criterion>, CliError> {
    let list: Vec<Criterion> = if ids.is_empty() {
        suite::run_all()
    } else {
        let mut v = Vec::new();
        for id in ids {
            v.push(suite::run(*id).ok_or_else(|| CliError::Config(format!("no acceptance criterion {id}")))?);
        }
        v
    };
    for c in &list {
        run.checks.push(Check::new(&format!("criterion {}", c.id), c.passed, c.detail.clone()));
    }
    run.add("acceptance.csv", criteria_csv(&list));
    run.add(
        "acceptance.json",
        json(&AcceptanceReport {
            criteria: &list,
            passed: list.iter().all(|c| c.passed),
        })?,
    );
    Ok(list)
}
