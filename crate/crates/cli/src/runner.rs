//! Executes one experiment described by a config: runs the named solver or
//! check suite, writes `summary.json` (scalar metrics, verdicts, iteration
//! counts, wall time, the resolved config) plus CSV field files into the
//! output directory. CSV output is deterministic for a fixed config: fixed
//! iteration orders and a recorded seed for every randomised check.

use anyhow::{anyhow, Context, Result};
use pqvi::diagnostics::smallness_diagnostics;
use pqvi::elliptic::IterationDirection;
use pqvi::grid::{average_source, GridFunction, InterpolationKind, SpaceGrid, SpaceTimeFunction, TimeGrid};
use pqvi::lcp::{solve_bruteforce_oracle, solve_pdas, solve_psor};
use pqvi::norms::{l2h_distance, space_time_norm, NormKind};
use pqvi::operator::{assemble_operator, DiscreteOperator};
use pqvi::parabolic::{
    parabolic_obstacle_solve, parabolic_vi, rothe_solve_qvi,
    unconstrained_solve, vi_iterate_qvi, zero_obstacle_transform, ParabolicSolveReport,
    SolverParams, ViIterationReport,
};
use pqvi::problem::ProblemData;
use pqvi::sensitivity::{
    alpha_iteration, coincidence_behavior_check, extrapolated_trend, taylor_direction,
    taylor_remainder, SensitivityParams, TaylorRow,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{Direction, ExperimentConfig, RunKind};
use crate::instances::random_lcp;
use crate::profiles;

pub struct RunOutcome {
    pub summary: Value,
    /// All hard assertions of the run kind passed.
    pub ok: bool,
    pub csv_files: Vec<PathBuf>,
}

/// JSON number that tolerates non-finite values (serialised as strings).
fn jnum(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(format!("{v}"))
    }
}

fn fmt_csv(v: f64) -> String {
    format!("{v:.16e}")
}

struct Workspace {
    sg: SpaceGrid,
    tg: TimeGrid,
    op: DiscreteOperator,
    data: ProblemData,
    params: SolverParams,
}

fn build_workspace(cfg: &ExperimentConfig) -> Result<Workspace> {
    let sg = SpaceGrid::new(cfg.omega, cfg.m).map_err(|e| anyhow!("{e}"))?;
    let tg = TimeGrid::new(cfg.horizon, cfg.n_steps).map_err(|e| anyhow!("{e}"))?;
    let op = assemble_operator(&sg, cfg.nu, cfg.reaction).map_err(|e| anyhow!("{e}"))?;
    let obstacle = profiles::obstacle_map(&cfg.obstacle, &sg)?;
    let data = ProblemData {
        f: profiles::space_time_source(&cfg.f, &sg, &tg)?,
        d: profiles::space_time_source(&cfg.d, &sg, &tg)?,
        z0: profiles::grid_function(&cfg.z0, &sg)?,
        obstacle,
    };
    let params = SolverParams {
        lcp: cfg.lcp_method,
        tol_fp: cfg.tol_fp,
        max_outer_elliptic: 500,
        tol_outer: cfg.tol_outer,
        max_outer_vi: 500,
    };
    Ok(Workspace {
        sg,
        tg,
        op,
        data,
        params,
    })
}

fn write_space_time_csv(
    dir: &Path,
    name: &str,
    u: &SpaceTimeFunction,
    sg: &SpaceGrid,
    tg: &TimeGrid,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let path = dir.join(name);
    let mut buf = Vec::new();
    pqvi::csv::write_space_time(&mut buf, u, sg, tg).context("writing CSV")?;
    fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
    files.push(path);
    Ok(())
}

fn report_summary(report: &ParabolicSolveReport) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("feasible".into(), json!(report.feasible));
    m.insert("max_infeasibility".into(), jnum(report.max_infeasibility));
    m.insert("monotone_in_time".into(), json!(report.monotone_in_time));
    m.insert("max_time_decrease".into(), jnum(report.max_time_decrease));
    m.insert("bound_max_h_norm".into(), jnum(report.bounds.max_h_norm));
    m.insert("bound_energy_v".into(), jnum(report.bounds.energy_v));
    m.insert("bound_kinetic_h".into(), jnum(report.bounds.kinetic_h));
    let total_nodes = report.per_step.len() * report.solution.m();
    let active: usize = report
        .per_step
        .iter()
        .map(|s| s.lcp.active.active().len())
        .sum();
    m.insert(
        "active_fraction".into(),
        jnum(active as f64 / total_nodes.max(1) as f64),
    );
    let max_outer = report.per_step.iter().map(|s| s.outer_iters).max().unwrap_or(0);
    let total_lcp_iters: usize = report.per_step.iter().map(|s| s.lcp.iterations).sum();
    m.insert("max_step_outer_iters".into(), json!(max_outer));
    m.insert("total_lcp_iterations".into(), json!(total_lcp_iters));
    m.insert("warnings".into(), json!(report.warnings));
    m
}

fn vi_report_summary(report: &ViIterationReport) -> Map<String, Value> {
    let mut m = report_summary(&report.final_solve);
    m.insert("outer_iters".into(), json!(report.outer_iters));
    m.insert("chain_monotone".into(), json!(report.monotone_ok));
    m.insert(
        "max_chain_violation".into(),
        jnum(report.max_monotonicity_violation),
    );
    m.insert("precondition_ok".into(), json!(report.precondition_ok));
    m.insert("limit_feasible".into(), json!(report.feasible));
    m.insert("limit_max_infeasibility".into(), jnum(report.max_infeasibility));
    m
}

/// Base QVI solve for the sensitivity kinds: the monotone iteration from
/// zero (minimal solution) or from the unconstrained solve (maximal).
fn base_solution(ws: &Workspace, direction: Direction) -> Result<ViIterationReport> {
    let start = match direction {
        Direction::Increasing => SpaceTimeFunction::zeros(
            ws.sg.m(),
            ws.tg.n_steps(),
            InterpolationKind::PiecewiseConstantRight,
        ),
        Direction::Decreasing => {
            unconstrained_solve(&ws.data.f, &ws.data.z0, &ws.op, &ws.tg).map_err(|e| anyhow!("{e}"))?
        }
    };
    let dir = match direction {
        Direction::Increasing => IterationDirection::FromSubsolution,
        Direction::Decreasing => IterationDirection::FromSupersolution,
    };
    vi_iterate_qvi(&ws.data, &start, dir, &ws.op, &ws.sg, &ws.tg, &ws.params)
        .map_err(|e| anyhow!("{e}"))
}

fn sensitivity_params(cfg: &ExperimentConfig) -> SensitivityParams {
    SensitivityParams {
        tol: cfg.tol_alpha,
        max_iter: 200,
        strict_complementarity: cfg.strict_complementarity,
        probe_count: cfg.probes,
        p: cfg.p,
        seed: cfg.seed,
        lcp: cfg.lcp_method,
    }
}

pub fn run(cfg: &ExperimentConfig, out_dir: &Path, jobs: usize) -> Result<RunOutcome> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let start = Instant::now();
    let mut files = Vec::new();
    let mut summary = Map::new();
    summary.insert("run_kind".into(), json!(cfg.kind.to_string()));
    summary.insert("seed".into(), json!(cfg.seed));
    let mut config_map = Map::new();
    for (k, v) in cfg.resolved() {
        config_map.insert(k, json!(v));
    }
    summary.insert("config".into(), Value::Object(config_map));

    let ok = dispatch(cfg, out_dir, jobs, &mut summary, &mut files)?;

    summary.insert("ok".into(), json!(ok));
    summary.insert(
        "wall_time_seconds".into(),
        jnum(start.elapsed().as_secs_f64()),
    );
    let value = Value::Object(summary);
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&value)?,
    )?;
    Ok(RunOutcome {
        summary: value,
        ok,
        csv_files: files,
    })
}

fn dispatch(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    jobs: usize,
    summary: &mut Map<String, Value>,
    files: &mut Vec<PathBuf>,
) -> Result<bool> {
    match cfg.kind {
        RunKind::SolveVi => run_solve_vi(cfg, out_dir, summary, files),
        RunKind::SolveQviRothe => run_rothe(cfg, out_dir, summary, files),
        RunKind::SolveQviIterate => run_iterate(cfg, out_dir, summary, files),
        RunKind::TransformCheck => run_transform_check(cfg, summary),
        RunKind::Derivative => run_derivative(cfg, out_dir, summary, files),
        RunKind::TaylorCheck => run_taylor(cfg, out_dir, jobs, summary, files),
        RunKind::Diagnostics => run_diagnostics(cfg, summary),
        RunKind::OracleCompare => run_oracle_compare(cfg, summary),
        RunKind::RefineStudy => run_refine(cfg, out_dir, jobs, summary, files),
    }
}

fn run_solve_vi(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    summary: &mut Map<String, Value>,
    files: &mut Vec<PathBuf>,
) -> Result<bool> {
    let ws = build_workspace(cfg)?;
    // The VI obstacle is Phi evaluated at zero; for the constant family
    // that is the profile itself.
    let zero = SpaceTimeFunction::zeros(ws.sg.m(), ws.tg.n_steps(), InterpolationKind::RotheLinear);
    let psi = ws.data.obstacle.evaluate(&zero, &ws.tg);
    let report = parabolic_vi(
        &ws.data.f,
        &psi,
        &ws.data.z0,
        &ws.op,
        &ws.sg,
        &ws.tg,
        &ws.params,
        None,
    )
    .map_err(|e| anyhow!("{e}"))?;
    write_space_time_csv(out_dir, "solution.csv", &report.solution, &ws.sg, &ws.tg, files)?;
    let mult = multiplier_frames(&report, &ws.tg);
    write_space_time_csv(out_dir, "multiplier.csv", &mult, &ws.sg, &ws.tg, files)?;
    for (k, v) in report_summary(&report) {
        summary.insert(k, v);
    }
    Ok(report.feasible)
}

fn multiplier_frames(report: &ParabolicSolveReport, tg: &TimeGrid) -> SpaceTimeFunction {
    let m = report.solution.m();
    let mut frames = vec![GridFunction::zeros(m)];
    for rec in &report.per_step {
        frames.push(rec.lcp.multiplier.scale(1.0 / tg.h()));
    }
    SpaceTimeFunction::new(frames, InterpolationKind::PiecewiseConstantRight)
}

fn run_rothe(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    summary: &mut Map<String, Value>,
    files: &mut Vec<PathBuf>,
) -> Result<bool> {
    let ws = build_workspace(cfg)?;
    let dir = match cfg.direction {
        Direction::Increasing => IterationDirection::FromSubsolution,
        Direction::Decreasing => IterationDirection::FromSupersolution,
    };
    let report = rothe_solve_qvi(&ws.data, &ws.op, &ws.sg, &ws.tg, dir, &ws.params)
        .map_err(|e| anyhow!("{e}"))?;
    write_space_time_csv(out_dir, "solution.csv", &report.solution, &ws.sg, &ws.tg, files)?;
    for (k, v) in report_summary(&report) {
        summary.insert(k, v);
    }
    Ok(report.feasible)
}

fn run_iterate(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    summary: &mut Map<String, Value>,
    files: &mut Vec<PathBuf>,
) -> Result<bool> {
    let ws = build_workspace(cfg)?;
    let report = base_solution(&ws, cfg.direction)?;
    write_space_time_csv(out_dir, "solution.csv", &report.limit, &ws.sg, &ws.tg, files)?;
    for (k, v) in vi_report_summary(&report) {
        summary.insert(k, v);
    }
    Ok(report.feasible && report.precondition_ok)
}

fn run_transform_check(cfg: &ExperimentConfig, summary: &mut Map<String, Value>) -> Result<bool> {
    let ws = build_workspace(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let m = ws.sg.m();
    let n = ws.tg.n_steps();
    let mut max_residual = 0.0f64;
    for _ in 0..50 {
        let phi_psi = random_positive_field(&mut rng, m, n, 0.5, 2.0);
        let g = random_field(&mut rng, m, n, -1.0, 1.0);
        let z0 = phi_psi.frame(0).map(|v| v - rng.gen_range(0.0..0.3));
        let w = zero_obstacle_transform(&g, &phi_psi, &z0, &ws.op, &ws.tg, &ws.params)
            .map_err(|e| anyhow!("{e}"))?;
        let f_steps = average_source(&g, &ws.tg).map_err(|e| anyhow!("{e}"))?;
        let obstacle_steps: Vec<GridFunction> =
            (1..=n).map(|k| phi_psi.frame(k).clone()).collect();
        let (frames, _) = parabolic_obstacle_solve(
            &ws.op,
            &f_steps,
            &obstacle_steps,
            &z0,
            &ws.tg,
            &ws.params.lcp,
            None,
        )
        .map_err(|e| anyhow!("{e}"))?;
        let s = SpaceTimeFunction::new(frames, InterpolationKind::PiecewiseConstantRight);
        max_residual = max_residual.max(s.add(&w).sup_distance(&phi_psi));
    }

    let mut lipschitz_ok = true;
    let mut worst_margin = f64::INFINITY;
    for _ in 0..100 {
        let w0 = GridFunction::new((0..m).map(|_| rng.gen_range(0.0..1.0)).collect());
        let g1 = random_field(&mut rng, m, n, -1.0, 1.0);
        let g2 = random_field(&mut rng, m, n, -1.0, 1.0);
        let s1 = pqvi::parabolic::lower_obstacle_solve(
            &average_source(&g1, &ws.tg).map_err(|e| anyhow!("{e}"))?,
            &w0,
            &ws.op,
            &ws.tg,
            &ws.params.lcp,
        )
        .map_err(|e| anyhow!("{e}"))?;
        let s2 = pqvi::parabolic::lower_obstacle_solve(
            &average_source(&g2, &ws.tg).map_err(|e| anyhow!("{e}"))?,
            &w0,
            &ws.op,
            &ws.tg,
            &ws.params.lcp,
        )
        .map_err(|e| anyhow!("{e}"))?;
        let lhs = space_time_norm(&s1.sub(&s2), NormKind::LinfH, &ws.sg, &ws.tg);
        let rhs = 2.0 * space_time_norm(&g1.sub(&g2), NormKind::LpH(1.0), &ws.sg, &ws.tg);
        worst_margin = worst_margin.min(rhs - lhs);
        if lhs > rhs + 1e-8 {
            lipschitz_ok = false;
        }
    }
    summary.insert("max_identity_residual".into(), jnum(max_residual));
    summary.insert("lipschitz_ok".into(), json!(lipschitz_ok));
    summary.insert("lipschitz_worst_margin".into(), jnum(worst_margin));
    Ok(max_residual <= 1e-8 && lipschitz_ok)
}

fn random_field(rng: &mut ChaCha8Rng, m: usize, n: usize, lo: f64, hi: f64) -> SpaceTimeFunction {
    let frames = (0..=n)
        .map(|_| GridFunction::new((0..m).map(|_| rng.gen_range(lo..hi)).collect()))
        .collect();
    SpaceTimeFunction::new(frames, InterpolationKind::RotheLinear)
}

fn random_positive_field(
    rng: &mut ChaCha8Rng,
    m: usize,
    n: usize,
    lo: f64,
    hi: f64,
) -> SpaceTimeFunction {
    random_field(rng, m, n, lo, hi)
}

fn run_derivative(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    summary: &mut Map<String, Value>,
    files: &mut Vec<PathBuf>,
) -> Result<bool> {
    let ws = build_workspace(cfg)?;
    let base = base_solution(&ws, Direction::Increasing)?;
    let sens = alpha_iteration(
        &base.final_solve,
        &ws.data,
        &ws.op,
        &ws.sg,
        &ws.tg,
        &sensitivity_params(cfg),
    )
    .map_err(|e| anyhow!("{e}"))?;
    write_space_time_csv(out_dir, "alpha.csv", &sens.alpha, &ws.sg, &ws.tg, files)?;
    write_space_time_csv(out_dir, "base_solution.csv", &base.limit, &ws.sg, &ws.tg, files)?;

    summary.insert("alpha_outer_iters".into(), json!(sens.outer_iters));
    summary.insert("sign_ok".into(), json!(sens.sign_ok));
    summary.insert("max_sign_violation".into(), jnum(sens.max_sign_violation));
    summary.insert("alpha_monotone_ok".into(), json!(sens.monotone_ok));
    summary.insert(
        "max_alpha_monotonicity_violation".into(),
        jnum(sens.max_monotonicity_violation),
    );
    summary.insert("initial_frame_zero".into(), json!(sens.initial_frame_zero));
    let phi_u = ws.data.obstacle.evaluate(&base.limit, &ws.tg);
    let coincidence = coincidence_behavior_check(&base.limit, &phi_u, &sens.alpha);
    summary.insert(
        "coincidence_node_count".into(),
        json!(coincidence.coincidence_node_count),
    );
    summary.insert(
        "coincidence_max_alpha".into(),
        jnum(coincidence.max_alpha_on_set),
    );
    summary.insert(
        "coincidence_max_abs_alpha".into(),
        jnum(coincidence.max_abs_alpha_on_set),
    );
    if let Some(d) = &sens.diagnostics {
        insert_diagnostics(summary, d);
    }
    Ok(sens.sign_ok && sens.initial_frame_zero)
}

fn insert_diagnostics(summary: &mut Map<String, Value>, d: &pqvi::diagnostics::SmallnessDiagnostics) {
    summary.insert("smallness_c1".into(), jnum(d.c1));
    summary.insert("smallness_c2".into(), jnum(d.c2));
    summary.insert("smallness_c3".into(), jnum(d.c3));
    summary.insert("smallness_k1".into(), jnum(d.k1));
    summary.insert("smallness_k2".into(), jnum(d.k2));
    summary.insert("smallness_k3".into(), jnum(d.k3));
    summary.insert("verdict_energy".into(), json!(d.verdict_energy));
    summary.insert("verdict_contraction".into(), json!(d.verdict_contraction));
    summary.insert(
        "verdict_contraction_guaranteed".into(),
        json!(d.guaranteed_contraction()),
    );
    if let Some(lhs) = d.closed_form_contraction_lhs {
        summary.insert("closed_form_contraction_lhs".into(), jnum(lhs));
    }
    summary.insert("energy_lhs".into(), jnum(d.energy_lhs));
    summary.insert("contraction_lhs".into(), jnum(d.contraction_lhs));
    summary.insert("diagnostic_probes".into(), json!(d.probes));
    if let Some(cf) = &d.closed_form {
        summary.insert("closed_form_c1".into(), jnum(cf.c1));
        summary.insert("closed_form_c2".into(), jnum(cf.c2));
        summary.insert("closed_form_c3".into(), jnum(cf.c3));
        summary.insert("closed_form_k1".into(), jnum(cf.k1));
        summary.insert("closed_form_k2".into(), jnum(cf.k2));
        summary.insert("closed_form_k3".into(), jnum(cf.k3));
    }
}

fn run_taylor(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    jobs: usize,
    summary: &mut Map<String, Value>,
    files: &mut Vec<PathBuf>,
) -> Result<bool> {
    let ws = build_workspace(cfg)?;
    let base = base_solution(&ws, Direction::Increasing)?;
    let sens = alpha_iteration(
        &base.final_solve,
        &ws.data,
        &ws.op,
        &ws.sg,
        &ws.tg,
        &sensitivity_params(cfg),
    )
    .map_err(|e| anyhow!("{e}"))?;
    let direction =
        taylor_direction(&ws.data, &ws.op, &ws.sg, &ws.tg).map_err(|e| anyhow!("{e}"))?;
    let remainders: Vec<Result<f64>> = run_parallel(
        cfg.s_values.clone(),
        jobs,
        |s| {
            taylor_remainder(
                &base.limit,
                &ws.data,
                &sens.alpha,
                s,
                cfg.p,
                direction,
                &ws.op,
                &ws.sg,
                &ws.tg,
                &ws.params,
            )
            .map_err(|e| anyhow!("{e}"))
        },
    );
    let mut rows: Vec<TaylorRow> = Vec::new();
    for (i, r) in remainders.into_iter().enumerate() {
        let remainder = r?;
        let ratio = rows.last().map(|prev| remainder / prev.remainder);
        rows.push(TaylorRow {
            s: cfg.s_values[i],
            remainder,
            ratio,
        });
    }

    let path = out_dir.join("taylor.csv");
    let mut text = String::from("s,remainder,ratio\n");
    for row in &rows {
        let ratio = row.ratio.map(fmt_csv).unwrap_or_default();
        text.push_str(&format!("{},{},{ratio}\n", fmt_csv(row.s), fmt_csv(row.remainder)));
    }
    fs::write(&path, text)?;
    files.push(path);
    write_space_time_csv(out_dir, "alpha.csv", &sens.alpha, &ws.sg, &ws.tg, files)?;

    let verdict = sens
        .diagnostics
        .as_ref()
        .map(|d| d.guaranteed_contraction())
        .unwrap_or(false);
    let tail_ratios: Vec<f64> = rows.iter().rev().take(3).filter_map(|r| r.ratio).collect();
    let decaying = tail_ratios.len() == 3.min(rows.len() - 1) && tail_ratios.iter().all(|&r| r <= 0.9);
    let status = if decaying {
        "pass"
    } else if !verdict {
        // Without the contraction verdict the expansion theorem gives no
        // guarantee; decay failures are expected-unknown, not errors.
        "expected-unknown"
    } else {
        "fail"
    };
    summary.insert("taylor_decay".into(), json!(status));
    summary.insert(
        "taylor_rows".into(),
        Value::Array(
            rows.iter()
                .map(|r| {
                    json!({
                        "s": r.s,
                        "remainder": r.remainder,
                        "ratio": r.ratio,
                    })
                })
                .collect(),
        ),
    );
    if let Some(trend) = extrapolated_trend(&rows) {
        summary.insert("extrapolated_trend".into(), jnum(trend));
    }
    if let Some(d) = &sens.diagnostics {
        insert_diagnostics(summary, d);
    }
    summary.insert("alpha_outer_iters".into(), json!(sens.outer_iters));
    Ok(status != "fail")
}

fn run_diagnostics(cfg: &ExperimentConfig, summary: &mut Map<String, Value>) -> Result<bool> {
    let ws = build_workspace(cfg)?;
    let base = base_solution(&ws, Direction::Increasing)?;
    let d = smallness_diagnostics(
        &ws.data.obstacle,
        &base.limit,
        &ws.op,
        &ws.sg,
        &ws.tg,
        cfg.probes,
        cfg.p,
        cfg.seed,
    );
    insert_diagnostics(summary, &d);
    Ok(true)
}

fn run_oracle_compare(cfg: &ExperimentConfig, summary: &mut Map<String, Value>) -> Result<bool> {
    if cfg.oracle_m > 12 {
        return Err(anyhow!("oracle.m must be at most 12, got {}", cfg.oracle_m));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut max_disagreement = 0.0f64;
    let mut max_kkt = 0.0f64;
    for _ in 0..cfg.oracle_instances {
        let m = rng.gen_range(1..=cfg.oracle_m);
        let p = random_lcp(&mut rng, m);
        let oracle = solve_bruteforce_oracle(&p).map_err(|e| anyhow!("{e}"))?;
        let pdas = solve_pdas(&p, 0.0, 200).map_err(|e| anyhow!("{e}"))?;
        let psor = solve_psor(&p, 1e-12, 200_000, 1.5).map_err(|e| anyhow!("{e}"))?;
        max_disagreement = max_disagreement
            .max(pdas.z.sup_distance(&oracle.z))
            .max(psor.z.sup_distance(&oracle.z));
        let scale = 1.0 + p.rhs.sup_norm();
        max_kkt = max_kkt
            .max(pdas.residual / scale)
            .max(psor.residual / scale)
            .max(oracle.residual / scale);
    }
    summary.insert("instances".into(), json!(cfg.oracle_instances));
    summary.insert("max_solver_disagreement".into(), jnum(max_disagreement));
    summary.insert("max_relative_kkt_residual".into(), jnum(max_kkt));
    Ok(max_disagreement <= 1e-8 && max_kkt <= 1e-8)
}

fn run_refine(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    jobs: usize,
    summary: &mut Map<String, Value>,
    files: &mut Vec<PathBuf>,
) -> Result<bool> {
    let dir = match cfg.direction {
        Direction::Increasing => IterationDirection::FromSubsolution,
        Direction::Decreasing => IterationDirection::FromSupersolution,
    };
    struct Level {
        factor: usize,
        sg: SpaceGrid,
        tg: TimeGrid,
        report: ParabolicSolveReport,
    }
    let levels: Vec<Result<Level>> = run_parallel(cfg.refine_factors.clone(), jobs, |factor| {
        let mut level_cfg = cfg.clone();
        level_cfg.n_steps = cfg.n_steps * factor;
        if cfg.refine_space {
            level_cfg.m = (cfg.m + 1) * factor - 1;
        }
        let ws = build_workspace(&level_cfg)?;
        let report = rothe_solve_qvi(&ws.data, &ws.op, &ws.sg, &ws.tg, dir, &ws.params)
            .map_err(|e| anyhow!("{e}"))?;
        Ok(Level {
            factor,
            sg: ws.sg,
            tg: ws.tg,
            report,
        })
    });
    let levels: Vec<Level> = levels.into_iter().collect::<Result<_>>()?;

    let mut text = String::from("level,factor,n_steps,m,gap_l2h,max_h_norm,energy_v,kinetic_h\n");
    let mut gaps = Vec::new();
    for (i, level) in levels.iter().enumerate() {
        let gap = if i == 0 {
            None
        } else {
            let prev = &levels[i - 1];
            let coarse = prolong_space(&prev.report.solution, &prev.sg, &level.sg);
            Some(l2h_distance(
                &coarse,
                &prev.tg,
                &level.report.solution,
                &level.tg,
                &level.sg,
            ))
        };
        if let Some(g) = gap {
            gaps.push(g);
        }
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            i,
            level.factor,
            level.tg.n_steps(),
            level.sg.m(),
            gap.map(fmt_csv).unwrap_or_default(),
            fmt_csv(level.report.bounds.max_h_norm),
            fmt_csv(level.report.bounds.energy_v),
            fmt_csv(level.report.bounds.kinetic_h),
        ));
    }
    let path = out_dir.join("refine.csv");
    fs::write(&path, text)?;
    files.push(path);

    summary.insert("gaps_l2h".into(), json!(gaps));
    if gaps.len() >= 2 {
        let ratios: Vec<f64> = gaps.windows(2).map(|w| w[1] / w[0]).collect();
        summary.insert("gap_ratios".into(), json!(ratios));
    }
    summary.insert(
        "bounds_per_level".into(),
        Value::Array(
            levels
                .iter()
                .map(|l| {
                    json!({
                        "factor": l.factor,
                        "max_h_norm": l.report.bounds.max_h_norm,
                        "energy_v": l.report.bounds.energy_v,
                        "kinetic_h": l.report.bounds.kinetic_h,
                    })
                })
                .collect(),
        ),
    );
    Ok(true)
}

/// Piecewise-linear spatial prolongation (boundary values are zero) onto a
/// finer grid over the same interval; identity when the grids match.
fn prolong_space(
    u: &SpaceTimeFunction,
    from: &SpaceGrid,
    to: &SpaceGrid,
) -> SpaceTimeFunction {
    if from.m() == to.m() {
        return u.clone();
    }
    let dx = from.dx();
    u.map_frames(|frame| {
        to.sample(|x| {
            let s = x / dx;
            let k = s.floor() as usize; // cell [x_k, x_{k+1}] in coarse numbering 0..=m+1
            let theta = s - k as f64;
            let left = if k == 0 || k > from.m() {
                0.0
            } else {
                frame[k - 1]
            };
            let right = if k + 1 > from.m() { 0.0 } else { frame[k] };
            left * (1.0 - theta) + right * theta
        })
    })
}

/// Deterministic parallel map over independent work items.
fn run_parallel<T, R, F>(items: Vec<T>, jobs: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let n = items.len();
    if jobs <= 1 || n <= 1 {
        return items.into_iter().map(f).collect();
    }
    let mut indexed: Vec<(usize, T)> = items.into_iter().enumerate().collect();
    let mut results: Vec<(usize, R)> = Vec::with_capacity(n);
    let chunk = n.div_ceil(jobs.max(1));
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        while !indexed.is_empty() {
            let take = chunk.min(indexed.len());
            let batch: Vec<(usize, T)> = indexed.drain(..take).collect();
            let f = &f;
            handles.push(scope.spawn(move || {
                batch
                    .into_iter()
                    .map(|(i, item)| (i, f(item)))
                    .collect::<Vec<_>>()
            }));
        }
        for h in handles {
            results.extend(h.join().expect("worker thread panicked"));
        }
    });
    results.sort_by_key(|(i, _)| *i);
    results.into_iter().map(|(_, r)| r).collect()
}
