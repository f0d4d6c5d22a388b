//! End-to-end pipeline through the public API: data -> QVI solve (both
//! routes, both inner solvers) -> cone extraction -> derivative -> Taylor
//! remainder.

use pqvi::elliptic::IterationDirection;
use pqvi::grid::{GridFunction, InterpolationKind, SpaceGrid, SpaceTimeFunction, TimeGrid};
use pqvi::lcp::LcpMethod;
use pqvi::norms::{space_time_norm, NormKind};
use pqvi::obstacle::{ObstacleMap, ScalarFn};
use pqvi::operator::assemble_operator;
use pqvi::parabolic::{rothe_solve_qvi, vi_iterate_qvi, SolverParams};
use pqvi::problem::ProblemData;
use pqvi::sensitivity::{
    alpha_iteration, extract_cone, taylor_check, NodeCone, SensitivityParams,
};

fn instance(m: usize, n: usize) -> (SpaceGrid, TimeGrid, pqvi::DiscreteOperator, ProblemData) {
    let sg = SpaceGrid::new(1.0, m).unwrap();
    let tg = TimeGrid::new(1.0, n).unwrap();
    let op = assemble_operator(&sg, 1.0, 0.0).unwrap();
    let omega = sg.omega();
    let f = SpaceTimeFunction::sample(&sg, &tg, InterpolationKind::RotheLinear, |t, x| {
        6.0 * (1.0 + t) * (std::f64::consts::PI * x / omega).sin()
    });
    let d = SpaceTimeFunction::sample(&sg, &tg, InterpolationKind::RotheLinear, |_, x| {
        let s = x / omega;
        16.0 * s * s * (1.0 - s) * (1.0 - s)
    });
    let data = ProblemData {
        f,
        d,
        z0: GridFunction::zeros(m),
        obstacle: ObstacleMap::Superposition {
            map: ScalarFn::Affine {
                offset: 0.4,
                slope: 0.5,
            },
        },
    };
    (sg, tg, op, data)
}

#[test]
fn qvi_pipeline_is_consistent_across_solvers_and_routes() {
    let (sg, tg, op, data) = instance(14, 20);

    // Both inner LCP solvers drive the same composite solution.
    let pdas_params = SolverParams::default();
    let psor_params = SolverParams {
        lcp: LcpMethod::Psor {
            tol: 1e-12,
            max_iter: 200_000,
            relaxation: 1.5,
        },
        ..SolverParams::default()
    };
    let rothe_pdas = rothe_solve_qvi(
        &data,
        &op,
        &sg,
        &tg,
        IterationDirection::FromSubsolution,
        &pdas_params,
    )
    .unwrap();
    let rothe_psor = rothe_solve_qvi(
        &data,
        &op,
        &sg,
        &tg,
        IterationDirection::FromSubsolution,
        &psor_params,
    )
    .unwrap();
    assert!(
        rothe_pdas.solution.sup_distance(&rothe_psor.solution) < 1e-8,
        "inner solvers disagree by {}",
        rothe_pdas.solution.sup_distance(&rothe_psor.solution)
    );

    // The VI-iteration route lands within the discretisation tolerance.
    let start =
        SpaceTimeFunction::zeros(sg.m(), tg.n_steps(), InterpolationKind::PiecewiseConstantRight);
    let iterate = vi_iterate_qvi(
        &data,
        &start,
        IterationDirection::FromSubsolution,
        &op,
        &sg,
        &tg,
        &pdas_params,
    )
    .unwrap();
    assert!(iterate.feasible && iterate.monotone_ok && iterate.precondition_ok);
    let gap = space_time_norm(
        &rothe_pdas.solution.sub(&iterate.limit),
        NormKind::L2H,
        &sg,
        &tg,
    );
    assert!(gap <= 5.0 * (sg.dx() * sg.dx()).max(tg.h()), "route gap {gap}");

    // Sensitivity on top of the converged limit.
    let (cone, multiplier) = extract_cone(&iterate.final_solve, &tg, false).unwrap();
    assert!(cone.count(NodeCone::Zero) > 0, "instance should clamp");
    for frame in multiplier.frames.frames() {
        assert!(frame.min() >= -1e-9, "multiplier must be nonnegative");
    }
    let sens = alpha_iteration(
        &iterate.final_solve,
        &data,
        &op,
        &sg,
        &tg,
        &SensitivityParams::default(),
    )
    .unwrap();
    assert!(sens.initial_frame_zero);
    assert!(sens.sign_ok, "sign violation {}", sens.max_sign_violation);

    // Difference quotients approach the derivative.
    let rows = taylor_check(
        &iterate.limit,
        &data,
        &sens.alpha,
        &[0.1, 0.05, 0.025],
        2.0,
        &op,
        &sg,
        &tg,
        &pdas_params,
    )
    .unwrap();
    // The map is piecewise linear, so the remainder drops to roundoff once
    // no active-set breakpoint sits below s; only require decrease above
    // that noise floor.
    assert!(
        rows.windows(2).all(|w| w[1].remainder < w[0].remainder.max(1e-10)),
        "remainders should decrease to the noise floor: {rows:?}"
    );
    assert!(rows.last().unwrap().remainder < 1e-6 * rows[0].remainder.max(1e-3));
}
