//! Directional differentiability machinery: multiplier/cone extraction from
//! a converged solution, the derivative VI (posed on the discrete active
//! sets, discretise-then-differentiate), the fixed-point iteration for the
//! derivative of the QVI solution map, and Taylor-remainder verification
//! against difference quotients.

use crate::diagnostics::{smallness_diagnostics, SmallnessDiagnostics};
use crate::elliptic::IterationDirection;
use crate::error::SolverError;
use crate::grid::{
    average_source, GridFunction, InterpolationKind, SpaceGrid, SpaceTimeFunction, TimeGrid,
};
use crate::lcp::{classify, LCPProblem, LcpMethod};
use crate::operator::DiscreteOperator;
use crate::parabolic::{vi_iterate_qvi, ParabolicSolveReport, SolverParams};
use crate::problem::ProblemData;

/// Constraint on the derivative at one (time step, node) pair.
///
/// `Zero` pins the derivative to the obstacle's own derivative (strongly
/// active nodes stay active); `SignConstrained` keeps it one-sided with
/// complementarity (biactive nodes); `Free` nodes carry the plain linear
/// equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeCone {
    Zero,
    SignConstrained,
    Free,
}

/// Cone per (step, node), derived from the active sets of the base
/// solution with the same tolerances the solver used.
#[derive(Debug, Clone)]
pub struct ConeSpec {
    per_step: Vec<Vec<NodeCone>>,
}

impl ConeSpec {
    pub fn new(per_step: Vec<Vec<NodeCone>>) -> Self {
        ConeSpec { per_step }
    }

    pub fn n_steps(&self) -> usize {
        self.per_step.len()
    }

    pub fn m(&self) -> usize {
        self.per_step.first().map(|s| s.len()).unwrap_or(0)
    }

    /// Cone at time step `n` (1-based) and node `i`.
    pub fn node(&self, n: usize, i: usize) -> NodeCone {
        self.per_step[n - 1][i]
    }

    pub fn count(&self, which: NodeCone) -> usize {
        self.per_step
            .iter()
            .flat_map(|s| s.iter())
            .filter(|&&c| c == which)
            .count()
    }

    /// Positions of the sign-constrained (biactive) pairs.
    pub fn sign_constrained_positions(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, step) in self.per_step.iter().enumerate() {
            for (i, &c) in step.iter().enumerate() {
                if c == NodeCone::SignConstrained {
                    out.push((k + 1, i));
                }
            }
        }
        out
    }
}

/// Multiplier of the base solution in units of forcing:
/// `lambda_n = f_n - (u_n - u_{n-1})/h - A u_n >= 0`, frame 0 zero.
#[derive(Debug, Clone)]
pub struct Multiplier {
    pub frames: SpaceTimeFunction,
}

/// Extract the derivative cone and the multiplier from a converged solve.
/// Complementarity of the stored per-step solutions is re-verified; a
/// violation beyond `1e-6` (relative) means the report is stale.
pub fn extract_cone(
    report: &ParabolicSolveReport,
    tg: &TimeGrid,
    strict_complementarity: bool,
) -> Result<(ConeSpec, Multiplier), SolverError> {
    let n_steps = report.per_step.len();
    let m = report.solution.m();
    let h = tg.h();
    let mut per_step = Vec::with_capacity(n_steps);
    let mut mult_frames = vec![GridFunction::zeros(m)];
    for n in 1..=n_steps {
        let rec = &report.per_step[n - 1];
        let psi = &report.obstacle_steps[n - 1];
        let z = &rec.lcp.z;
        let lambda = &rec.lcp.multiplier;
        let scale = (1.0 + lambda.sup_norm()) * (1.0 + z.sup_norm());
        for i in 0..m {
            let gap = if psi[i].is_finite() { psi[i] - z[i] } else { 1.0 };
            let comp = if psi[i].is_finite() {
                (lambda[i] * gap).abs()
            } else {
                lambda[i].abs()
            };
            if comp > 1e-6 * scale || lambda[i] < -1e-6 * scale || gap < -1e-6 * (1.0 + z[i].abs())
            {
                return Err(SolverError::StaleSolution(format!(
                    "complementarity violated at step {n}, node {i}: lambda {}, gap {}",
                    lambda[i], gap
                )));
            }
        }
        let active = classify(z, lambda, psi);
        let mut cones = vec![NodeCone::Free; m];
        for &i in &active.strongly_active {
            cones[i] = NodeCone::Zero;
        }
        for &i in &active.biactive {
            cones[i] = if strict_complementarity {
                NodeCone::Zero
            } else {
                NodeCone::SignConstrained
            };
        }
        per_step.push(cones);
        mult_frames.push(lambda.scale(1.0 / h));
    }
    Ok((
        ConeSpec::new(per_step),
        Multiplier {
            frames: SpaceTimeFunction::new(mult_frames, InterpolationKind::PiecewiseConstantRight),
        },
    ))
}

/// One backward-Euler sweep of the derivative system. Per step, a mixed
/// problem: equality rows on strongly-active nodes (the derivative follows
/// the obstacle's derivative), a one-sided complementarity bound on
/// biactive nodes, plain linear rows on free nodes — solved by the
/// obstacle-problem kernel on the condensed system.
///
/// `obstacle_deriv_steps[n-1]`, when given, carries the obstacle's own
/// derivative at step `n`; absent means the homogeneous cone.
pub fn derivative_sweep(
    cone: &ConeSpec,
    source_steps: &[GridFunction],
    obstacle_deriv_steps: Option<&[GridFunction]>,
    op: &DiscreteOperator,
    tg: &TimeGrid,
    method: &LcpMethod,
) -> Result<SpaceTimeFunction, SolverError> {
    let n_steps = cone.n_steps();
    let m = cone.m();
    if source_steps.len() != n_steps {
        return Err(SolverError::ShapeMismatch(format!(
            "expected {n_steps} derivative sources, got {}",
            source_steps.len()
        )));
    }
    let h = tg.h();
    let base = op.stepped(h);
    let mut frames = Vec::with_capacity(n_steps + 1);
    frames.push(GridFunction::zeros(m));
    for n in 1..=n_steps {
        let rho: Option<&GridFunction> = obstacle_deriv_steps.map(|s| &s[n - 1]);
        let mut lower = base.lower().to_vec();
        let mut diag = base.diag().to_vec();
        let mut upper = base.upper().to_vec();
        let mut rhs = frames[n - 1].axpy(h, &source_steps[n - 1]);
        let mut bound = GridFunction::constant(m, f64::INFINITY);
        for i in 0..m {
            match cone.node(n, i) {
                NodeCone::Zero => {
                    diag[i] = 1.0;
                    if i > 0 {
                        lower[i - 1] = 0.0;
                    }
                    if i + 1 < m {
                        upper[i] = 0.0;
                    }
                    rhs[i] = rho.map(|r| r[i]).unwrap_or(0.0);
                }
                NodeCone::SignConstrained => {
                    bound[i] = rho.map(|r| r[i]).unwrap_or(0.0);
                }
                NodeCone::Free => {}
            }
        }
        let problem = LCPProblem::new(
            crate::operator::Tridiag::new(lower, diag, upper),
            rhs,
            bound,
        );
        let sol = method
            .solve_warm(&problem, Some(&frames[n - 1]), None)
            .map_err(|e| e.at_step(n))?;
        frames.push(sol.z);
    }
    Ok(SpaceTimeFunction::new(
        frames,
        InterpolationKind::PiecewiseConstantRight,
    ))
}

/// Derivative of the parabolic VI solution map in direction `source`, on
/// the cone of the base solution (`delta(0) = 0`).
pub fn solve_derivative_vi(
    cone: &ConeSpec,
    source: &SpaceTimeFunction,
    op: &DiscreteOperator,
    tg: &TimeGrid,
    method: &LcpMethod,
) -> Result<SpaceTimeFunction, SolverError> {
    let steps = average_source(source, tg)?;
    derivative_sweep(cone, &steps, None, op, tg, method)
}

/// Sign of the perturbation direction, from the data flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionSign {
    Nonnegative,
    Nonpositive,
    Indefinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorRow {
    pub s: f64,
    /// `|| u_s - u - s alpha ||_{LpH} / s`.
    pub remainder: f64,
    /// Ratio to the previous row's remainder.
    pub ratio: Option<f64>,
}

/// Geometric continuation of the remainder trend onto the last row: from
/// rows `k-2, k-1`, predict `r_{k-1} * (r_{k-1} / r_{k-2})`.
pub fn extrapolated_trend(rows: &[TaylorRow]) -> Option<f64> {
    if rows.len() < 3 {
        return None;
    }
    let r2 = rows[rows.len() - 2].remainder;
    let r3 = rows[rows.len() - 3].remainder;
    if r3 == 0.0 {
        return Some(0.0);
    }
    Some(r2 * (r2 / r3))
}

/// Parameters of the sensitivity layer.
#[derive(Debug, Clone)]
pub struct SensitivityParams {
    /// Sup-norm stopping tolerance of the alpha iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Treat biactive nodes as strongly active (the strict-complementarity
    /// cone) instead of keeping the one-sided constraint.
    pub strict_complementarity: bool,
    pub probe_count: usize,
    /// Exponent of the `L^p(0,T;H)` norms in remainders and diagnostics.
    pub p: f64,
    pub seed: u64,
    pub lcp: LcpMethod,
}

impl Default for SensitivityParams {
    fn default() -> Self {
        SensitivityParams {
            tol: 1e-10,
            max_iter: 100,
            strict_complementarity: false,
            probe_count: 32,
            p: 2.0,
            seed: 42,
            lcp: LcpMethod::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SensitivityResult {
    pub alpha: SpaceTimeFunction,
    pub alpha_iterates: Vec<SpaceTimeFunction>,
    pub delta_iterates: Vec<SpaceTimeFunction>,
    pub outer_iters: usize,
    pub d_sign: DirectionSign,
    /// `sign(alpha) = sign(d)` nodewise within tolerance.
    pub sign_ok: bool,
    pub max_sign_violation: f64,
    /// The alpha iterates form a monotone chain in the direction of `d`.
    pub monotone_ok: bool,
    pub max_monotonicity_violation: f64,
    /// `alpha` vanishes identically at `t = 0` (exactly).
    pub initial_frame_zero: bool,
    pub taylor_table: Vec<TaylorRow>,
    pub diagnostics: Option<SmallnessDiagnostics>,
}

/// Fixed-point iteration for the derivative of the QVI solution map:
/// `delta^n = dS(d - L Phi'(u)(alpha^{n-1}))` on the base cone and
/// `alpha^n = Phi'(u)(alpha^{n-1}) + delta^n`, stopping when the sup-norm
/// change drops below `params.tol`.
///
/// The obstacle-derivative frames are paired with steps the same way the
/// base solver froze its obstacles (left endpoints), and `L` is the
/// discrete operator `(rho_n - rho_{n-1})/h + A rho_n` on those frames.
pub fn alpha_iteration(
    base: &ParabolicSolveReport,
    data: &ProblemData,
    op: &DiscreteOperator,
    sg: &SpaceGrid,
    tg: &TimeGrid,
    params: &SensitivityParams,
) -> Result<SensitivityResult, SolverError> {
    let (cone, _mult) = extract_cone(base, tg, params.strict_complementarity)?;
    let d_steps = average_source(&data.d, tg)?;
    let flags = data.check_flags(op, sg, tg);
    let d_sign = if flags.d_nonnegative {
        DirectionSign::Nonnegative
    } else if flags.d_nonpositive {
        DirectionSign::Nonpositive
    } else {
        DirectionSign::Indefinite
    };

    let h = tg.h();
    let n_steps = tg.n_steps();
    let m = sg.m();

    let delta1 = derivative_sweep(&cone, &d_steps, None, op, tg, &params.lcp)?;
    let mut alpha = delta1.clone();
    let mut alpha_iterates = vec![alpha.clone()];
    let mut delta_iterates = vec![delta1];
    let mut outer = 1usize;
    let mut max_monotonicity_violation = 0.0f64;

    if !data.obstacle.derivative_is_zero() {
        loop {
            if outer >= params.max_iter {
                let last_change = alpha_iterates
                    .iter()
                    .rev()
                    .nth(1)
                    .map(|prev| prev.sup_distance(&alpha))
                    .unwrap_or(f64::NAN);
                return Err(SolverError::NonConvergence {
                    method: "alpha iteration",
                    iterations: params.max_iter,
                    residual: last_change,
                });
            }
            outer += 1;
            let rho_full = data.obstacle.derivative_apply(&base.solution, &alpha, tg);
            // Left-endpoint pairing: step n sees rho(t_{n-1}).
            let rho_steps: Vec<GridFunction> =
                (1..=n_steps).map(|n| rho_full.frame(n - 1).clone()).collect();
            // L rho with the step before the first taken as zero (the
            // obstacle derivative vanishes at t=0 since alpha does).
            let mut src = Vec::with_capacity(n_steps);
            for n in 1..=n_steps {
                let prev = if n >= 2 {
                    rho_steps[n - 2].clone()
                } else {
                    GridFunction::zeros(m)
                };
                let l_rho = rho_steps[n - 1]
                    .sub(&prev)
                    .scale(1.0 / h)
                    .add(&op.apply(&rho_steps[n - 1]));
                src.push(d_steps[n - 1].sub(&l_rho));
            }
            let delta = derivative_sweep(&cone, &src, None, op, tg, &params.lcp)?;
            let mut frames = vec![GridFunction::zeros(m)];
            for n in 1..=n_steps {
                frames.push(rho_steps[n - 1].add(delta.frame(n)));
            }
            let next =
                SpaceTimeFunction::new(frames, InterpolationKind::PiecewiseConstantRight);

            let violation = match d_sign {
                DirectionSign::Nonnegative => alpha.max_excess_over(&next),
                DirectionSign::Nonpositive => next.max_excess_over(&alpha),
                DirectionSign::Indefinite => 0.0,
            };
            max_monotonicity_violation = max_monotonicity_violation.max(violation.max(0.0));

            let change = next.sup_distance(&alpha);
            alpha = next.clone();
            alpha_iterates.push(next);
            delta_iterates.push(delta);
            if change < params.tol {
                break;
            }
        }
    }

    let max_sign_violation = match d_sign {
        DirectionSign::Nonnegative => alpha
            .frames()
            .iter()
            .map(|f| -f.min())
            .fold(0.0f64, f64::max),
        DirectionSign::Nonpositive => alpha
            .frames()
            .iter()
            .map(|f| f.max())
            .fold(0.0f64, f64::max),
        DirectionSign::Indefinite => 0.0,
    }
    .max(0.0);

    let diagnostics = smallness_diagnostics(
        &data.obstacle,
        &base.solution,
        op,
        sg,
        tg,
        params.probe_count,
        params.p,
        params.seed,
    );

    Ok(SensitivityResult {
        initial_frame_zero: alpha.frame(0).sup_norm() == 0.0,
        sign_ok: max_sign_violation <= 1e-9,
        monotone_ok: max_monotonicity_violation <= 1e-9,
        max_sign_violation,
        max_monotonicity_violation,
        alpha,
        alpha_iterates,
        delta_iterates,
        outer_iters: outer,
        d_sign,
        taylor_table: Vec::new(),
        diagnostics: Some(diagnostics),
    })
}

/// Remainder at a single perturbation size: solve `u_s` by the monotone VI
/// iteration started at `u` itself (a subsolution when `d >= 0`, a
/// supersolution when `d <= 0`) and return
/// `r(s) = ||u_s - u - s alpha||_{LpH} / s`.
#[allow(clippy::too_many_arguments)]
pub fn taylor_remainder(
    u: &SpaceTimeFunction,
    data: &ProblemData,
    alpha: &SpaceTimeFunction,
    s: f64,
    p: f64,
    direction: IterationDirection,
    op: &DiscreteOperator,
    sg: &SpaceGrid,
    tg: &TimeGrid,
    params: &SolverParams,
) -> Result<f64, SolverError> {
    let data_s = ProblemData {
        f: data.f.axpy(s, &data.d),
        d: data.d.clone(),
        z0: data.z0.clone(),
        obstacle: data.obstacle.clone(),
    };
    let run = vi_iterate_qvi(&data_s, u, direction, op, sg, tg, params).map_err(|e| match e {
        SolverError::StepFailed { .. } | SolverError::NonConvergence { .. } => {
            SolverError::InvalidData(format!("u_s solve failed at s = {s}: {e}"))
        }
        other => other,
    })?;
    let diff = run.limit.sub(u).axpy(-s, alpha);
    Ok(crate::norms::space_time_norm(&diff, crate::norms::NormKind::LpH(p), sg, tg) / s)
}

/// Direction of the `u_s` iteration implied by the sign of `d`.
pub fn taylor_direction(
    data: &ProblemData,
    op: &DiscreteOperator,
    sg: &SpaceGrid,
    tg: &TimeGrid,
) -> Result<IterationDirection, SolverError> {
    let flags = data.check_flags(op, sg, tg);
    if flags.d_nonnegative {
        Ok(IterationDirection::FromSubsolution)
    } else if flags.d_nonpositive {
        Ok(IterationDirection::FromSupersolution)
    } else {
        Err(SolverError::InvalidData(
            "Taylor check requires a sign-definite direction (d >= 0 or d <= 0)".into(),
        ))
    }
}

/// Taylor-remainder table over a decreasing sequence of perturbation sizes.
#[allow(clippy::too_many_arguments)]
pub fn taylor_check(
    u: &SpaceTimeFunction,
    data: &ProblemData,
    alpha: &SpaceTimeFunction,
    s_values: &[f64],
    p: f64,
    op: &DiscreteOperator,
    sg: &SpaceGrid,
    tg: &TimeGrid,
    params: &SolverParams,
) -> Result<Vec<TaylorRow>, SolverError> {
    let direction = taylor_direction(data, op, sg, tg)?;
    for w in s_values.windows(2) {
        if w[1] >= w[0] {
            return Err(SolverError::InvalidParameter(
                "s values must be positive and decreasing".into(),
            ));
        }
    }
    if s_values.iter().any(|&s| s <= 0.0) {
        return Err(SolverError::InvalidParameter(
            "s values must be positive".into(),
        ));
    }

    let mut rows: Vec<TaylorRow> = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let remainder = taylor_remainder(u, data, alpha, s, p, direction, op, sg, tg, params)?;
        let ratio = rows
            .last()
            .map(|prev: &TaylorRow| remainder / prev.remainder);
        rows.push(TaylorRow {
            s,
            remainder,
            ratio,
        });
    }
    Ok(rows)
}

/// Behaviour of the derivative on the same-time coincidence set
/// `{u(t) = Phi(u)(t)}`: `max_alpha_on_set` should be at most a tolerance
/// (one-sided), and for superposition maps with `d >= 0` the derivative
/// vanishes there, so `max_abs_alpha_on_set` is small too. Report only,
/// never aborts.
///
/// Note this is not the union of the per-step active sets: those pair each
/// frame with the obstacle frozen one step earlier, and at contact
/// transitions the two sets differ. Membership uses the same relative gap
/// tolerance as the solver's active-set classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceReport {
    pub coincidence_node_count: usize,
    pub max_alpha_on_set: f64,
    pub max_abs_alpha_on_set: f64,
}

pub fn coincidence_behavior_check(
    u: &SpaceTimeFunction,
    phi_u: &SpaceTimeFunction,
    alpha: &SpaceTimeFunction,
) -> CoincidenceReport {
    let mut count = 0usize;
    let mut max_alpha = f64::NEG_INFINITY;
    let mut max_abs = 0.0f64;
    for n in 1..=u.n_steps() {
        let (uf, pf, af) = (u.frame(n), phi_u.frame(n), alpha.frame(n));
        for i in 0..uf.len() {
            if !pf[i].is_finite() || pf[i] - uf[i] > 1e-8 * (1.0 + pf[i].abs()) {
                continue;
            }
            count += 1;
            max_alpha = max_alpha.max(af[i]);
            max_abs = max_abs.max(af[i].abs());
        }
    }
    if count == 0 {
        max_alpha = 0.0;
    }
    CoincidenceReport {
        coincidence_node_count: count,
        max_alpha_on_set: max_alpha,
        max_abs_alpha_on_set: max_abs,
    }
}

/// Exhaustive sign-pattern oracle for the derivative sweep with the
/// homogeneous cone: every biactive pair is either clamped (derivative
/// zero, multiplier nonnegative) or released (multiplier zero, derivative
/// nonpositive); all `2^count` patterns are tried and the KKT-consistent
/// one returned. Dense elimination, independent of the condensed
/// tridiagonal path it checks.
pub fn derivative_vi_bruteforce(
    cone: &ConeSpec,
    source_steps: &[GridFunction],
    op: &DiscreteOperator,
    tg: &TimeGrid,
) -> Result<SpaceTimeFunction, SolverError> {
    let positions = cone.sign_constrained_positions();
    if positions.len() > 20 {
        return Err(SolverError::SizeLimit(format!(
            "{} biactive pairs exceed the enumeration limit",
            positions.len()
        )));
    }
    let n_steps = cone.n_steps();
    let m = cone.m();
    let h = tg.h();
    let s_mat = op.stepped(h);

    'patterns: for mask in 0u32..(1u32 << positions.len()) {
        let clamped = |n: usize, i: usize| -> bool {
            positions
                .iter()
                .enumerate()
                .any(|(k, &(pn, pi))| pn == n && pi == i && mask & (1 << k) != 0)
        };
        let mut frames = vec![GridFunction::zeros(m)];
        for n in 1..=n_steps {
            let mut a = vec![vec![0.0; m]; m];
            let mut rhs = vec![0.0; m];
            let b = frames[n - 1].axpy(h, &source_steps[n - 1]);
            for i in 0..m {
                let pinned = matches!(cone.node(n, i), NodeCone::Zero)
                    || (matches!(cone.node(n, i), NodeCone::SignConstrained) && clamped(n, i));
                if pinned {
                    a[i][i] = 1.0;
                    rhs[i] = 0.0;
                } else {
                    rhs[i] = b[i];
                    for j in 0..m {
                        a[i][j] = s_mat.entry(i, j);
                    }
                }
            }
            let Some(z) = crate::lcp::dense_solve(&mut a, &mut rhs) else {
                continue 'patterns;
            };
            frames.push(GridFunction::new(z));
        }
        // KKT consistency of the pattern.
        let tol = 1e-9
            * (1.0 + frames.iter().fold(0.0f64, |acc, f| acc.max(f.sup_norm())));
        let mut ok = true;
        for n in 1..=n_steps {
            let b = frames[n - 1].axpy(h, &source_steps[n - 1]);
            let resid = b.sub(&s_mat.apply(&frames[n]));
            for &(pn, pi) in &positions {
                if pn != n {
                    continue;
                }
                if clamped(n, pi) {
                    if resid[pi] < -tol {
                        ok = false;
                    }
                } else if frames[n][pi] > tol {
                    ok = false;
                }
            }
            if !ok {
                break;
            }
        }
        if ok {
            return Ok(SpaceTimeFunction::new(
                frames,
                InterpolationKind::PiecewiseConstantRight,
            ));
        }
    }
    Err(SolverError::InternalInconsistency(
        "no sign pattern satisfies the derivative KKT system".into(),
    ))
}
