//! Parabolic solvers: backward-Euler time stepping for the linear equation,
//! the parabolic VI (fixed obstacle), the Rothe discretisation of the
//! parabolic QVI (one elliptic QVI per step), the monotone VI iteration to
//! extremal QVI solutions, and the transformation onto zero-obstacle form.

use crate::elliptic::{solve_elliptic_qvi, EllipticQviStep, IterationDirection};
use crate::error::SolverError;
use crate::grid::{
    average_source, GridFunction, InterpolationKind, SpaceGrid, SpaceTimeFunction, TimeGrid,
};
use crate::lcp::{LCPProblem, LCPSolution, LcpMethod};
use crate::norms::{h_norm, v_norm};
use crate::operator::DiscreteOperator;
use crate::problem::ProblemData;

/// Tolerances and method selection shared by the composite solvers.
#[derive(Debug, Clone)]
pub struct SolverParams {
    pub lcp: LcpMethod,
    /// Sup-norm stopping tolerance of the per-step elliptic QVI fixed point.
    pub tol_fp: f64,
    pub max_outer_elliptic: usize,
    /// Sup-norm (over all frames) stopping tolerance of the outer VI
    /// iteration.
    pub tol_outer: f64,
    pub max_outer_vi: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            lcp: LcpMethod::default(),
            tol_fp: 1e-10,
            max_outer_elliptic: 200,
            tol_outer: 1e-8,
            max_outer_vi: 200,
        }
    }
}

/// Linear backward Euler: `(I + hA) z_n = z_{n-1} + h f_n`. Returns all
/// `N+1` frames, frame 0 being `z0`. `sources[n-1]` is the step-`n` source.
pub fn backward_euler_linear(
    op: &DiscreteOperator,
    sources: &[GridFunction],
    z0: &GridFunction,
    h: f64,
) -> Vec<GridFunction> {
    let system = op.stepped(h);
    let mut frames = Vec::with_capacity(sources.len() + 1);
    frames.push(z0.clone());
    for src in sources {
        let rhs = frames.last().unwrap().axpy(h, src);
        let next = system.solve(&rhs).expect("stepped operator is SPD");
        frames.push(next);
    }
    frames
}

/// Unconstrained parabolic solve; the supersolution `z_bar` of the QVI
/// (`z_bar' + A z_bar = f`) comes from here.
pub fn unconstrained_solve(
    f: &SpaceTimeFunction,
    z0: &GridFunction,
    op: &DiscreteOperator,
    tg: &TimeGrid,
) -> Result<SpaceTimeFunction, SolverError> {
    let sources = average_source(f, tg)?;
    let frames = backward_euler_linear(op, &sources, z0, tg.h());
    Ok(SpaceTimeFunction::new(
        frames,
        InterpolationKind::PiecewiseConstantRight,
    ))
}

/// Discrete quantities of the a-priori energy bounds: `max_n ||z_n||_H`,
/// `h sum ||z_n||_V^2` and `(1/h) sum ||z_n - z_{n-1}||_H^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformBounds {
    pub max_h_norm: f64,
    pub energy_v: f64,
    pub kinetic_h: f64,
}

pub fn uniform_bounds(u: &SpaceTimeFunction, sg: &SpaceGrid, tg: &TimeGrid) -> UniformBounds {
    let h = tg.h();
    let mut max_h_norm = 0.0f64;
    let mut energy_v = 0.0;
    let mut kinetic_h = 0.0;
    for n in 0..=u.n_steps() {
        max_h_norm = max_h_norm.max(h_norm(sg, u.frame(n)));
        if n >= 1 {
            let vn = v_norm(sg, u.frame(n));
            energy_v += h * vn * vn;
            let dn = h_norm(sg, &u.frame(n).sub(u.frame(n - 1)));
            kinetic_h += dn * dn / h;
        }
    }
    UniformBounds {
        max_h_norm,
        energy_v,
        kinetic_h,
    }
}

/// Per-time-step metadata of a parabolic sweep.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub lcp: LCPSolution,
    /// Outer (fixed-point) iterations of the elliptic QVI step; 1 for plain
    /// VI steps.
    pub outer_iters: usize,
    pub monotone_ok: bool,
}

/// Result of one parabolic solve with feasibility and monotonicity
/// metadata.
#[derive(Debug, Clone)]
pub struct ParabolicSolveReport {
    pub solution: SpaceTimeFunction,
    pub per_step: Vec<StepRecord>,
    /// Obstacle actually enforced at each step (`N` entries).
    pub obstacle_steps: Vec<GridFunction>,
    pub bounds: UniformBounds,
    pub feasible: bool,
    pub max_infeasibility: f64,
    pub monotone_in_time: bool,
    pub max_time_decrease: f64,
    pub warnings: Vec<String>,
}

/// Feasibility threshold for the report flags.
pub const FEASIBILITY_TOL: f64 = 1e-7;

/// Time-monotonicity threshold for the report flags.
pub const TIME_MONOTONE_TOL: f64 = 1e-9;

fn assemble_report(
    frames: Vec<GridFunction>,
    per_step: Vec<StepRecord>,
    obstacle_steps: Vec<GridFunction>,
    feasibility_target: Option<&SpaceTimeFunction>,
    sg: &SpaceGrid,
    tg: &TimeGrid,
    warnings: Vec<String>,
) -> ParabolicSolveReport {
    let solution = SpaceTimeFunction::new(frames, InterpolationKind::PiecewiseConstantRight);
    let bounds = uniform_bounds(&solution, sg, tg);
    let max_infeasibility = match feasibility_target {
        Some(target) => solution.max_excess_over(target),
        None => f64::NEG_INFINITY,
    };
    let max_time_decrease = solution.max_decrease_in_time();
    ParabolicSolveReport {
        feasible: max_infeasibility <= FEASIBILITY_TOL,
        monotone_in_time: max_time_decrease <= TIME_MONOTONE_TOL,
        solution,
        per_step,
        obstacle_steps,
        bounds,
        max_infeasibility,
        max_time_decrease,
        warnings,
    }
}

/// Backward-Euler sweep of upper-obstacle steps with explicitly given
/// per-step obstacles: step `n` solves the LCP with obstacle
/// `obstacle_steps[n-1]`. This is the shared kernel under the VI solver
/// (which freezes the obstacle at the left endpoint of each cell) and the
/// zero-obstacle transformation (which pairs frames with their own step).
pub fn parabolic_obstacle_solve(
    op: &DiscreteOperator,
    f_steps: &[GridFunction],
    obstacle_steps: &[GridFunction],
    z0: &GridFunction,
    tg: &TimeGrid,
    method: &LcpMethod,
    warm: Option<&SpaceTimeFunction>,
) -> Result<(Vec<GridFunction>, Vec<StepRecord>), SolverError> {
    let n_steps = tg.n_steps();
    if f_steps.len() != n_steps || obstacle_steps.len() != n_steps {
        return Err(SolverError::ShapeMismatch(format!(
            "need {n_steps} per-step sources and obstacles, got {} and {}",
            f_steps.len(),
            obstacle_steps.len()
        )));
    }
    let h = tg.h();
    let system = op.stepped(h);
    let mut frames = Vec::with_capacity(n_steps + 1);
    frames.push(z0.clone());
    let mut per_step = Vec::with_capacity(n_steps);
    for n in 1..=n_steps {
        let rhs = frames[n - 1].axpy(h, &f_steps[n - 1]);
        let problem = LCPProblem::new(system.clone(), rhs, obstacle_steps[n - 1].clone());
        let warm_frame = warm.map(|w| w.frame(n));
        let sol = method
            .solve_warm(&problem, warm_frame, None)
            .map_err(|e| e.at_step(n))?;
        frames.push(sol.z.clone());
        per_step.push(StepRecord {
            lcp: sol,
            outer_iters: 1,
            monotone_ok: true,
        });
    }
    Ok((frames, per_step))
}

/// Parabolic VI with a fixed obstacle `psi`: backward Euler, one LCP per
/// step with the obstacle frozen at the step's left endpoint `psi(t_{n-1})`
/// (the convention of the time discretisation).
#[allow(clippy::too_many_arguments)]
pub fn parabolic_vi(
    f: &SpaceTimeFunction,
    psi: &SpaceTimeFunction,
    z0: &GridFunction,
    op: &DiscreteOperator,
    sg: &SpaceGrid,
    tg: &TimeGrid,
    params: &SolverParams,
    warm: Option<&SpaceTimeFunction>,
) -> Result<ParabolicSolveReport, SolverError> {
    let excess = z0.max_excess_over(psi.frame(0));
    if excess > 1e-8 * (1.0 + z0.sup_norm()) {
        return Err(SolverError::InvalidData(format!(
            "initial data violates z0 <= psi(0) by {excess:.3e}"
        )));
    }
    let f_steps = average_source(f, tg)?;
    let obstacle_steps: Vec<GridFunction> =
        (1..=tg.n_steps()).map(|n| psi.frame(n - 1).clone()).collect();
    let (frames, per_step) =
        parabolic_obstacle_solve(op, &f_steps, &obstacle_steps, z0, tg, &params.lcp, warm)?;
    // Feasibility metadata compares frame n against the obstacle at t_n.
    Ok(assemble_report(
        frames,
        per_step,
        obstacle_steps,
        Some(psi),
        sg,
        tg,
        Vec::new(),
    ))
}

/// Rothe time discretisation of the parabolic QVI: each step solves the
/// elliptic QVI with obstacle `v -> Phi(v)(t_{n-1})` by monotone fixed-point
/// iteration, seeded with the previous frame (minimal route) or the
/// unconstrained step solution (maximal route).
pub fn rothe_solve_qvi(
    data: &ProblemData,
    op: &DiscreteOperator,
    sg: &SpaceGrid,
    tg: &TimeGrid,
    direction: IterationDirection,
    params: &SolverParams,
) -> Result<ParabolicSolveReport, SolverError> {
    let flags = data.check_flags(op, sg, tg);
    let warnings = data.hypothesis_warnings(&flags);

    let f_steps = average_source(&data.f, tg)?;
    let h = tg.h();
    let system = op.stepped(h);
    let n_steps = tg.n_steps();
    let mut frames = Vec::with_capacity(n_steps + 1);
    frames.push(data.z0.clone());
    let mut per_step = Vec::with_capacity(n_steps);
    let mut obstacle_steps = Vec::with_capacity(n_steps);
    for n in 1..=n_steps {
        let rhs = frames[n - 1].axpy(h, &f_steps[n - 1]);
        let eval = |v: &GridFunction| data.obstacle.evaluate_frozen(v, n - 1, tg);
        let start = match direction {
            IterationDirection::FromSubsolution => frames[n - 1].clone(),
            IterationDirection::FromSupersolution => {
                system.solve(&rhs).map_err(|e| e.at_step(n))?
            }
        };
        let step = EllipticQviStep {
            system: system.clone(),
            rhs,
            obstacle_eval: &eval,
            start,
            direction,
        };
        let out = solve_elliptic_qvi(&step, params.tol_fp, params.max_outer_elliptic, &params.lcp)
            .map_err(|e| e.at_step(n))?;
        obstacle_steps.push(eval(&out.z));
        frames.push(out.z);
        per_step.push(StepRecord {
            lcp: out.last_lcp,
            outer_iters: out.outer_iters,
            monotone_ok: out.monotone_ok,
        });
    }

    let solution = SpaceTimeFunction::new(frames.clone(), InterpolationKind::PiecewiseConstantRight);
    let target = data.obstacle.evaluate(&solution, tg);
    Ok(assemble_report(
        frames,
        per_step,
        obstacle_steps,
        Some(&target),
        sg,
        tg,
        warnings,
    ))
}

/// Report of the monotone VI iteration.
#[derive(Debug, Clone)]
pub struct ViIterationReport {
    /// `z^0, z^1, ...` including the start.
    pub iterates: Vec<SpaceTimeFunction>,
    pub limit: SpaceTimeFunction,
    pub direction: IterationDirection,
    /// Number of parabolic VI solves performed.
    pub outer_iters: usize,
    /// Monotone chain within [`crate::elliptic::SOFT_MONOTONICITY_TOL`].
    pub monotone_ok: bool,
    pub max_monotonicity_violation: f64,
    /// Start satisfied its sub/supersolution inequality within the soft
    /// tolerance.
    pub precondition_ok: bool,
    pub feasible: bool,
    pub max_infeasibility: f64,
    /// The final parabolic solve, whose obstacle is `Phi` of the limit
    /// itself; its per-step records carry the multipliers and active sets
    /// the sensitivity layer consumes.
    pub final_solve: ParabolicSolveReport,
}

/// Monotone VI iteration `z^k = S(f, z^{k-1})` from a sub- or supersolution
/// start, converging upward to the minimal (downward to the maximal) QVI
/// solution. Inner solves are warm-started with the previous outer iterate.
///
/// After the sup-norm change drops below `params.tol_outer`, one polish
/// solve with obstacle `Phi(limit)` is performed so the returned per-step
/// complementarity data is self-consistent.
pub fn vi_iterate_qvi(
    data: &ProblemData,
    start: &SpaceTimeFunction,
    direction: IterationDirection,
    op: &DiscreteOperator,
    sg: &SpaceGrid,
    tg: &TimeGrid,
    params: &SolverParams,
) -> Result<ViIterationReport, SolverError> {
    let mut iterates = vec![start.clone()];
    let mut current = start.clone();
    let mut max_violation = f64::NEG_INFINITY;
    let mut precondition_ok = true;
    let mut outer = 0usize;

    loop {
        outer += 1;
        if outer > params.max_outer_vi {
            return Err(SolverError::NonConvergence {
                method: "VI iteration",
                iterations: params.max_outer_vi,
                residual: iterates
                    .last()
                    .map(|prev| prev.sup_distance(&current))
                    .unwrap_or(f64::NAN),
            });
        }
        let obstacle = data.obstacle.evaluate(&current, tg);
        let next = parabolic_vi(
            &data.f,
            &obstacle,
            &data.z0,
            op,
            sg,
            tg,
            params,
            Some(&current),
        )?
        .solution;

        let violation = match direction {
            IterationDirection::FromSubsolution => current.max_excess_over(&next),
            IterationDirection::FromSupersolution => next.max_excess_over(&current),
        };
        if outer == 1 {
            // The first solve doubles as the sub/supersolution check:
            // start <= S(f, start) (or >=).
            precondition_ok = violation <= crate::elliptic::SOFT_MONOTONICITY_TOL;
            if violation > crate::elliptic::HARD_MONOTONICITY_TOL {
                return Err(SolverError::AssumptionViolation(format!(
                    "start is not a {} (violation {violation:.3e})",
                    match direction {
                        IterationDirection::FromSubsolution => "subsolution",
                        IterationDirection::FromSupersolution => "supersolution",
                    }
                )));
            }
        }
        max_violation = max_violation.max(violation);
        if violation > crate::elliptic::HARD_MONOTONICITY_TOL {
            return Err(SolverError::AssumptionViolation(format!(
                "VI iterates lost monotonicity at outer iteration {outer} (violation {violation:.3e})"
            )));
        }

        let change = next.sup_distance(&current);
        iterates.push(next.clone());
        current = next;
        if change < params.tol_outer {
            break;
        }
    }

    // Polish: resolve once with the converged obstacle so multipliers and
    // active sets refer to Phi(limit).
    let obstacle = data.obstacle.evaluate(&current, tg);
    let final_solve = parabolic_vi(
        &data.f,
        &obstacle,
        &data.z0,
        op,
        sg,
        tg,
        params,
        Some(&current),
    )?;
    let limit = final_solve.solution.clone();

    let target = data.obstacle.evaluate(&limit, tg);
    let max_infeasibility = limit.max_excess_over(&target);
    Ok(ViIterationReport {
        iterates,
        limit,
        direction,
        outer_iters: outer,
        monotone_ok: max_violation <= crate::elliptic::SOFT_MONOTONICITY_TOL,
        max_monotonicity_violation: max_violation.max(0.0),
        precondition_ok,
        feasible: max_infeasibility <= FEASIBILITY_TOL,
        max_infeasibility,
        final_solve,
    })
}

/// Lower-obstacle solve `w >= 0`, `w' + Aw = g` with complementarity,
/// `w(0) = w0`, by negation through the upper-obstacle kernel.
pub fn lower_obstacle_solve(
    g_steps: &[GridFunction],
    w0: &GridFunction,
    op: &DiscreteOperator,
    tg: &TimeGrid,
    method: &LcpMethod,
) -> Result<SpaceTimeFunction, SolverError> {
    let m = w0.len();
    let neg_sources: Vec<GridFunction> = g_steps.iter().map(|s| s.scale(-1.0)).collect();
    let zero_obstacles = vec![GridFunction::zeros(m); tg.n_steps()];
    let neg_w0 = w0.scale(-1.0);
    let (frames, _) =
        parabolic_obstacle_solve(op, &neg_sources, &zero_obstacles, &neg_w0, tg, method, None)?;
    Ok(SpaceTimeFunction::new(
        frames.into_iter().map(|f| f.scale(-1.0)).collect(),
        InterpolationKind::PiecewiseConstantRight,
    ))
}

/// Discrete parabolic operator `L` applied framewise:
/// `(Lw)_n = (w_n - w_{n-1})/h + A w_n` for `n = 1..=N`.
pub fn apply_parabolic_operator(
    w: &SpaceTimeFunction,
    op: &DiscreteOperator,
    tg: &TimeGrid,
) -> Vec<GridFunction> {
    let h = tg.h();
    (1..=w.n_steps())
        .map(|n| {
            w.frame(n)
                .sub(w.frame(n - 1))
                .scale(1.0 / h)
                .add(&op.apply(w.frame(n)))
        })
        .collect()
}

/// Zero-obstacle transformation: returns the lower-obstacle solution
/// `w = S_bar_{w0}(L Phi(psi) - g)` with `w0 = Phi(psi)(0) - z0`; the
/// identity `S(g, psi) + w = Phi(psi)` then holds framewise (with the
/// upper-obstacle solve pairing obstacle frames with their own step).
pub fn zero_obstacle_transform(
    g: &SpaceTimeFunction,
    phi_psi: &SpaceTimeFunction,
    z0: &GridFunction,
    op: &DiscreteOperator,
    tg: &TimeGrid,
    params: &SolverParams,
) -> Result<SpaceTimeFunction, SolverError> {
    let w0 = phi_psi.frame(0).sub(z0);
    if w0.min() < -1e-10 * (1.0 + z0.sup_norm()) {
        return Err(SolverError::InvalidData(format!(
            "transformation requires z0 <= Phi(psi)(0); violated by {:.3e}",
            -w0.min()
        )));
    }
    let g_steps = average_source(g, tg)?;
    let l_phi = apply_parabolic_operator(phi_psi, op, tg);
    let rhs: Vec<GridFunction> = l_phi
        .iter()
        .zip(&g_steps)
        .map(|(l, gn)| l.sub(gn))
        .collect();
    lower_obstacle_solve(&rhs, &w0, op, tg, &params.lcp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::{h_inner, space_time_norm, NormKind};
    use crate::obstacle::{NonlinearSource, ObstacleMap, ScalarFn};
    use crate::operator::{assemble_operator, laplacian_eigenvalue};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(m: usize, n: usize) -> (SpaceGrid, TimeGrid, DiscreteOperator) {
        let sg = SpaceGrid::new(1.0, m).unwrap();
        let tg = TimeGrid::new(1.0, n).unwrap();
        let op = assemble_operator(&sg, 1.0, 0.0).unwrap();
        (sg, tg, op)
    }

    fn random_field(
        rng: &mut ChaCha8Rng,
        m: usize,
        n: usize,
        lo: f64,
        hi: f64,
    ) -> SpaceTimeFunction {
        let frames = (0..=n)
            .map(|_| GridFunction::new((0..m).map(|_| rng.gen_range(lo..hi)).collect()))
            .collect();
        SpaceTimeFunction::new(frames, InterpolationKind::RotheLinear)
    }

    #[test]
    fn implicit_euler_decays_eigenvector_exactly() {
        let (sg, tg, op) = setup(9, 16);
        let lam = laplacian_eigenvalue(&sg, 1);
        let z0 = sg.sample(|x| (std::f64::consts::PI * x).sin());
        let f = SpaceTimeFunction::zeros(9, 16, InterpolationKind::RotheLinear);
        let sol = unconstrained_solve(&f, &z0, &op, &tg).unwrap();
        let h = tg.h();
        for n in 0..=16 {
            let expect = z0.scale(1.0 / (1.0 + h * lam).powi(n as i32));
            assert!(
                sol.frame(n).sup_distance(&expect) < 1e-11,
                "frame {n} is off by {}",
                sol.frame(n).sup_distance(&expect)
            );
        }
    }

    #[test]
    fn nonnegative_data_give_nonnegative_solution() {
        let (sg, tg, op) = setup(12, 20);
        let f = SpaceTimeFunction::sample(&sg, &tg, InterpolationKind::RotheLinear, |t, x| {
            (1.0 + t) * x * (1.0 - x)
        });
        let z0 = sg.sample(|x| x * (1.0 - x));
        let sol = unconstrained_solve(&f, &z0, &op, &tg).unwrap();
        for fr in sol.frames() {
            assert!(fr.min() >= 0.0, "M-matrix positivity violated");
        }
    }

    #[test]
    fn unconstrained_equals_vi_with_infinite_obstacle() {
        let (sg, tg, op) = setup(10, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = random_field(&mut rng, 10, 12, -1.0, 1.0);
        let z0 = GridFunction::new((0..10).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let plain = unconstrained_solve(&f, &z0, &op, &tg).unwrap();
        let psi = SpaceTimeFunction::constant(10, 12, f64::INFINITY, InterpolationKind::RotheLinear);
        let vi = parabolic_vi(&f, &psi, &z0, &op, &sg, &tg, &SolverParams::default(), None).unwrap();
        assert!(vi.solution.sup_distance(&plain) <= 1e-12);
        assert!(vi.per_step.iter().all(|s| s.lcp.active.active().is_empty()));
    }

    #[test]
    fn zero_data_zero_obstacle_gives_zero_solution() {
        let (sg, tg, op) = setup(8, 10);
        let f = SpaceTimeFunction::zeros(8, 10, InterpolationKind::RotheLinear);
        let psi = SpaceTimeFunction::zeros(8, 10, InterpolationKind::RotheLinear);
        let z0 = GridFunction::zeros(8);
        let vi = parabolic_vi(&f, &psi, &z0, &op, &sg, &tg, &SolverParams::default(), None).unwrap();
        assert_eq!(vi.solution.sup_norm(), 0.0);
        for s in &vi.per_step {
            assert!(s.lcp.multiplier.sup_norm() < 1e-14);
        }
    }

    #[test]
    fn vi_rejects_infeasible_initial_data() {
        let (sg, tg, op) = setup(5, 5);
        let f = SpaceTimeFunction::zeros(5, 5, InterpolationKind::RotheLinear);
        let psi = SpaceTimeFunction::constant(5, 5, 0.5, InterpolationKind::RotheLinear);
        let z0 = GridFunction::constant(5, 1.0);
        assert!(matches!(
            parabolic_vi(&f, &psi, &z0, &op, &sg, &tg, &SolverParams::default(), None),
            Err(SolverError::InvalidData(_))
        ));
    }

    #[test]
    fn comparison_principle_for_parabolic_vi() {
        // f1 <= f2 and psi1 <= psi2 imply z1 <= z2 at every frame and node.
        let (sg, tg, op) = setup(8, 10);
        let params = SolverParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let f1 = random_field(&mut rng, 8, 10, -1.0, 1.0);
            let f2 = f1.map_frames(|fr| fr.map(|v| v + rng.gen_range(0.0..0.5)));
            let psi1 = random_field(&mut rng, 8, 10, 0.2, 1.0);
            let psi2 = psi1.map_frames(|fr| fr.map(|v| v + rng.gen_range(0.0..0.5)));
            let z0 = GridFunction::zeros(8);
            let z1 = parabolic_vi(&f1, &psi1, &z0, &op, &sg, &tg, &params, None)
                .unwrap()
                .solution;
            let z2 = parabolic_vi(&f2, &psi2, &z0, &op, &sg, &tg, &params, None)
                .unwrap()
                .solution;
            assert!(
                z1.max_excess_over(&z2) <= 1e-9,
                "ordering violated by {}",
                z1.max_excess_over(&z2)
            );
        }
    }

    fn increasing_data(sg: &SpaceGrid, tg: &TimeGrid) -> ProblemData {
        // f >= 0 increasing in time, z0 = 0, superposition obstacle with
        // positive offset: the full hypothesis set for the monotone route.
        let f = SpaceTimeFunction::sample(sg, tg, InterpolationKind::RotheLinear, |t, x| {
            3.0 * (1.0 + t) * (std::f64::consts::PI * x).sin()
        });
        let d = SpaceTimeFunction::zeros(sg.m(), tg.n_steps(), InterpolationKind::RotheLinear);
        ProblemData {
            f,
            d,
            z0: GridFunction::zeros(sg.m()),
            obstacle: ObstacleMap::Superposition {
                map: ScalarFn::Affine {
                    offset: 0.4,
                    slope: 0.5,
                },
            },
        }
    }

    #[test]
    fn rothe_unconstrained_heat_decay_is_plain_parabolic() {
        let (sg, tg, op) = setup(9, 16);
        let mut hat = GridFunction::zeros(9);
        hat[4] = 1.0;
        let data = ProblemData {
            f: SpaceTimeFunction::zeros(9, 16, InterpolationKind::RotheLinear),
            d: SpaceTimeFunction::zeros(9, 16, InterpolationKind::RotheLinear),
            z0: hat.clone(),
            obstacle: ObstacleMap::Constant {
                psi0: GridFunction::constant(9, f64::INFINITY),
            },
        };
        let report = rothe_solve_qvi(
            &data,
            &op,
            &sg,
            &tg,
            IterationDirection::FromSubsolution,
            &SolverParams::default(),
        )
        .unwrap();
        let plain = unconstrained_solve(&data.f, &hat, &op, &tg).unwrap();
        assert!(report.solution.sup_distance(&plain) < 1e-12);
        // Heat decay: sup norm decreasing in time.
        for n in 1..=16 {
            assert!(report.solution.frame(n).sup_norm() <= report.solution.frame(n - 1).sup_norm() + 1e-14);
        }
    }

    #[test]
    fn rothe_monotone_in_time_and_sandwiched() {
        let (sg, tg, op) = setup(12, 24);
        let data = increasing_data(&sg, &tg);
        let params = SolverParams::default();
        let report = rothe_solve_qvi(
            &data,
            &op,
            &sg,
            &tg,
            IterationDirection::FromSubsolution,
            &params,
        )
        .unwrap();
        assert!(report.warnings.is_empty(), "{:?}", report.warnings);
        assert!(
            report.max_time_decrease <= 1e-9,
            "frames should increase in n, worst drop {}",
            report.max_time_decrease
        );
        assert!(report.monotone_in_time);
        assert!(report.feasible, "infeasible by {}", report.max_infeasibility);

        // Sandwich per step: z_{n-1} <= z_n <= unconstrained step from z_{n-1}.
        let f_steps = average_source(&data.f, &tg).unwrap();
        let system = op.stepped(tg.h());
        for n in 1..=tg.n_steps() {
            let prev = report.solution.frame(n - 1);
            let here = report.solution.frame(n);
            let bar = system.solve(&prev.axpy(tg.h(), &f_steps[n - 1])).unwrap();
            assert!(prev.max_excess_over(here) <= 1e-9, "step {n}: not increasing");
            assert!(here.max_excess_over(&bar) <= 1e-9, "step {n}: above supersolution");
        }
        // Cross-check against the VI iteration route at matching tolerance.
        let vi = vi_iterate_qvi(
            &data,
            &SpaceTimeFunction::zeros(sg.m(), tg.n_steps(), InterpolationKind::PiecewiseConstantRight),
            IterationDirection::FromSubsolution,
            &op,
            &sg,
            &tg,
            &params,
        )
        .unwrap();
        let gap = space_time_norm(
            &report.solution.sub(&vi.limit),
            NormKind::L2H,
            &sg,
            &tg,
        );
        let h = tg.h();
        let dx = sg.dx();
        assert!(
            gap <= 5.0 * (dx * dx).max(h),
            "Rothe and VI-iteration routes differ by {gap}"
        );
    }

    #[test]
    fn rothe_with_constant_obstacle_equals_parabolic_vi() {
        // With a constant map the per-step QVI is a plain VI step, so the
        // Rothe chain coincides with the direct VI solve step by step.
        let (sg, tg, op) = setup(10, 14);
        let mut data = increasing_data(&sg, &tg);
        data.obstacle = ObstacleMap::Constant {
            psi0: GridFunction::constant(10, 0.5),
        };
        let rothe = rothe_solve_qvi(
            &data,
            &op,
            &sg,
            &tg,
            IterationDirection::FromSubsolution,
            &SolverParams::default(),
        )
        .unwrap();
        let psi = SpaceTimeFunction::constant(10, 14, 0.5, InterpolationKind::RotheLinear);
        let vi = parabolic_vi(
            &data.f,
            &psi,
            &data.z0,
            &op,
            &sg,
            &tg,
            &SolverParams::default(),
            None,
        )
        .unwrap();
        assert!(rothe.solution.sup_distance(&vi.solution) < 1e-10);
        assert!(rothe.max_time_decrease <= 1e-9, "monotone data give increasing frames");
    }

    #[test]
    fn vi_iteration_constant_obstacle_is_single_pass() {
        let (sg, tg, op) = setup(8, 10);
        let mut data = increasing_data(&sg, &tg);
        data.obstacle = ObstacleMap::Constant {
            psi0: GridFunction::constant(8, 0.4),
        };
        let start = SpaceTimeFunction::zeros(8, 10, InterpolationKind::PiecewiseConstantRight);
        let report = vi_iterate_qvi(
            &data,
            &start,
            IterationDirection::FromSubsolution,
            &op,
            &sg,
            &tg,
            &SolverParams::default(),
        )
        .unwrap();
        let psi = SpaceTimeFunction::constant(8, 10, 0.4, InterpolationKind::RotheLinear);
        let direct = parabolic_vi(
            &data.f,
            &psi,
            &data.z0,
            &op,
            &sg,
            &tg,
            &SolverParams::default(),
            None,
        )
        .unwrap();
        assert!(report.limit.sup_distance(&direct.solution) < 1e-12);
        assert!(report.precondition_ok);
        assert!(report.monotone_ok);
    }

    #[test]
    fn vi_iteration_two_sided_extremality() {
        let (sg, tg, op) = setup(10, 16);
        let data = increasing_data(&sg, &tg);
        let params = SolverParams::default();
        let start_lo = SpaceTimeFunction::zeros(10, 16, InterpolationKind::PiecewiseConstantRight);
        let lo = vi_iterate_qvi(
            &data,
            &start_lo,
            IterationDirection::FromSubsolution,
            &op,
            &sg,
            &tg,
            &params,
        )
        .unwrap();
        assert!(lo.monotone_ok, "increasing chain broken");

        let start_hi = unconstrained_solve(&data.f, &data.z0, &op, &tg).unwrap();
        let hi = vi_iterate_qvi(
            &data,
            &start_hi,
            IterationDirection::FromSupersolution,
            &op,
            &sg,
            &tg,
            &params,
        )
        .unwrap();
        assert!(hi.monotone_ok, "decreasing chain broken");
        assert!(
            lo.limit.max_excess_over(&hi.limit) <= 1e-7,
            "minimal solution should sit below maximal"
        );
        assert!(lo.feasible && hi.feasible);
        assert!(lo.limit.sup_distance(&hi.limit) < 1e-6, "unique fixed point expected here");
    }

    #[test]
    fn intermediate_start_lands_between_extremal_limits() {
        // z1 = S(f, 0) is a subsolution above zero; iterating from it gives
        // a solution sandwiched between the two extremal limits.
        let (sg, tg, op) = setup(10, 16);
        let data = increasing_data(&sg, &tg);
        let params = SolverParams::default();
        let zero_start =
            SpaceTimeFunction::zeros(10, 16, InterpolationKind::PiecewiseConstantRight);
        let lo = vi_iterate_qvi(
            &data,
            &zero_start,
            IterationDirection::FromSubsolution,
            &op,
            &sg,
            &tg,
            &params,
        )
        .unwrap();
        let hi_start = unconstrained_solve(&data.f, &data.z0, &op, &tg).unwrap();
        let hi = vi_iterate_qvi(
            &data,
            &hi_start,
            IterationDirection::FromSupersolution,
            &op,
            &sg,
            &tg,
            &params,
        )
        .unwrap();
        // Intermediate admissible start: one VI solve with obstacle Phi(0).
        let mid_start = parabolic_vi(
            &data.f,
            &data.obstacle.evaluate(&zero_start, &tg),
            &data.z0,
            &op,
            &sg,
            &tg,
            &params,
            None,
        )
        .unwrap()
        .solution;
        let mid = vi_iterate_qvi(
            &data,
            &mid_start,
            IterationDirection::FromSubsolution,
            &op,
            &sg,
            &tg,
            &params,
        )
        .unwrap();
        assert!(mid.precondition_ok, "S(f, 0) must be a subsolution");
        assert!(lo.limit.max_excess_over(&mid.limit) <= 1e-8);
        assert!(mid.limit.max_excess_over(&hi.limit) <= 1e-8);
    }

    #[test]
    fn vi_iteration_rejects_gross_non_subsolution() {
        let (sg, tg, op) = setup(6, 8);
        let data = increasing_data(&sg, &tg);
        // A start far above the obstacle cap is no subsolution.
        let start = SpaceTimeFunction::constant(6, 8, 10.0, InterpolationKind::PiecewiseConstantRight);
        assert!(matches!(
            vi_iterate_qvi(
                &data,
                &start,
                IterationDirection::FromSubsolution,
                &op,
                &sg,
                &tg,
                &SolverParams::default(),
            ),
            Err(SolverError::AssumptionViolation(_))
        ));
    }

    #[test]
    fn transform_identity_touching_case() {
        // g = L Phi(psi) and z0 = Phi(psi)(0): the lower-obstacle input is
        // zero, w0 = 0, so S_bar = 0 and S(g, psi) = Phi(psi).
        let (sg, tg, op) = setup(9, 12);
        let params = SolverParams::default();
        let phi_psi = SpaceTimeFunction::sample(&sg, &tg, InterpolationKind::RotheLinear, |t, x| {
            (1.0 + t) * (std::f64::consts::PI * x).sin()
        });
        let l_phi = apply_parabolic_operator(&phi_psi, &op, &tg);
        // Present L Phi as a piecewise-constant-right source so its cell
        // averages reproduce the per-step values exactly.
        let mut frames = vec![l_phi[0].clone()];
        frames.extend(l_phi.iter().cloned());
        let g = SpaceTimeFunction::new(frames, InterpolationKind::PiecewiseConstantRight);
        let z0 = phi_psi.frame(0).clone();
        let w = zero_obstacle_transform(&g, &phi_psi, &z0, &op, &tg, &params).unwrap();
        assert!(w.sup_norm() < 1e-10, "S_bar should vanish, got {}", w.sup_norm());
    }

    #[test]
    fn transform_identity_on_random_instances() {
        let (_sg, tg, op) = setup(8, 10);
        let params = SolverParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let phi_psi = random_field(&mut rng, 8, 10, 0.5, 2.0);
            let g = random_field(&mut rng, 8, 10, -1.0, 1.0);
            let z0 = phi_psi.frame(0).map(|v| v - rng.gen_range(0.0..0.3));
            let w = zero_obstacle_transform(&g, &phi_psi, &z0, &op, &tg, &params).unwrap();

            // Independent left side: upper-obstacle solve pairing obstacle
            // frames with their own step.
            let f_steps = average_source(&g, &tg).unwrap();
            let obstacle_steps: Vec<GridFunction> =
                (1..=10).map(|n| phi_psi.frame(n).clone()).collect();
            let (frames, _) = parabolic_obstacle_solve(
                &op,
                &f_steps,
                &obstacle_steps,
                &z0,
                &tg,
                &params.lcp,
                None,
            )
            .unwrap();
            let s = SpaceTimeFunction::new(frames, InterpolationKind::PiecewiseConstantRight);
            let residual = s.add(&w).sup_distance(&phi_psi);
            assert!(residual <= 1e-8, "transform identity residual {residual}");
        }
    }

    #[test]
    fn lower_obstacle_lipschitz_in_l1h() {
        // ||S_bar(g1) - S_bar(g2)||_{Linf H} <= 2 ||g1 - g2||_{L1 H}.
        let (sg, tg, op) = setup(8, 12);
        let method = LcpMethod::default();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..100 {
            let w0 = GridFunction::new((0..8).map(|_| rng.gen_range(0.0..1.0)).collect());
            let g1 = random_field(&mut rng, 8, 12, -1.0, 1.0);
            let g2 = random_field(&mut rng, 8, 12, -1.0, 1.0);
            let s1 = lower_obstacle_solve(
                &average_source(&g1, &tg).unwrap(),
                &w0,
                &op,
                &tg,
                &method,
            )
            .unwrap();
            let s2 = lower_obstacle_solve(
                &average_source(&g2, &tg).unwrap(),
                &w0,
                &op,
                &tg,
                &method,
            )
            .unwrap();
            let lhs = space_time_norm(&s1.sub(&s2), NormKind::LinfH, &sg, &tg);
            let rhs = space_time_norm(&g1.sub(&g2), NormKind::LpH(1.0), &sg, &tg);
            assert!(lhs <= 2.0 * rhs + 1e-8, "Lipschitz bound violated: {lhs} > 2*{rhs}");
        }
    }

    #[test]
    fn transform_rejects_initial_data_above_obstacle() {
        let (sg, tg, op) = setup(5, 5);
        let phi_psi = SpaceTimeFunction::constant(5, 5, 1.0, InterpolationKind::RotheLinear);
        let g = SpaceTimeFunction::zeros(5, 5, InterpolationKind::RotheLinear);
        let z0 = GridFunction::constant(5, 2.0);
        assert!(matches!(
            zero_obstacle_transform(&g, &phi_psi, &z0, &op, &tg, &SolverParams::default()),
            Err(SolverError::InvalidData(_))
        ));
        let _ = sg;
    }

    #[test]
    fn uniform_bounds_match_hand_computation() {
        let (sg, tg, _) = setup(3, 2);
        let frames = vec![
            GridFunction::new(vec![0.0, 0.0, 0.0]),
            GridFunction::new(vec![1.0, 0.0, 0.0]),
            GridFunction::new(vec![1.0, 1.0, 0.0]),
        ];
        let u = SpaceTimeFunction::new(frames.clone(), InterpolationKind::PiecewiseConstantRight);
        let b = uniform_bounds(&u, &sg, &tg);
        let h = tg.h();
        let expect_kinetic: f64 = (1..=2)
            .map(|n| {
                let d = frames[n].sub(&frames[n - 1]);
                h_inner(&sg, &d, &d) / h
            })
            .sum();
        assert!((b.kinetic_h - expect_kinetic).abs() < 1e-14);
        assert!(b.max_h_norm > 0.0 && b.energy_v > 0.0);
    }
}
