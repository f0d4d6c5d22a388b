//! Single-time-step upper-obstacle problems as linear complementarity
//! problems (LCPs).
//!
//! Find `z <= psi` with multiplier `lambda = b - S z >= 0` and
//! `lambda_i (psi_i - z_i) = 0` per node, for an SPD M-matrix `S`. Two
//! production solvers (projected SOR and a primal-dual active-set loop) plus
//! a brute-force active-set enumeration oracle for small systems.
//!
//! Infinite obstacle entries (`f64::INFINITY`) mark unconstrained nodes and
//! short-circuit the clamp; lower-obstacle problems are solved by negation
//! through the same kernel.

use crate::error::SolverError;
use crate::grid::GridFunction;
use crate::operator::Tridiag;

/// Default multiplier threshold separating strongly-active from biactive
/// nodes, relative to the multiplier scale.
pub fn multiplier_threshold(lambda: &GridFunction) -> f64 {
    1e-8 * (1.0 + lambda.sup_norm())
}

/// One time step of the discrete obstacle problem.
#[derive(Debug, Clone)]
pub struct LCPProblem {
    /// `S = I + h A`: symmetric positive definite M-matrix.
    pub system: Tridiag,
    pub rhs: GridFunction,
    /// Upper bound per node; `+inf` entries are unconstrained.
    pub upper_bound: GridFunction,
}

impl LCPProblem {
    pub fn new(system: Tridiag, rhs: GridFunction, upper_bound: GridFunction) -> Self {
        assert_eq!(system.size(), rhs.len());
        assert_eq!(system.size(), upper_bound.len());
        LCPProblem {
            system,
            rhs,
            upper_bound,
        }
    }

    pub fn m(&self) -> usize {
        self.rhs.len()
    }

    /// The plain linear solve, i.e. the solution with the obstacle removed.
    pub fn unconstrained(&self) -> Result<GridFunction, SolverError> {
        self.system.solve(&self.rhs)
    }
}

/// Partition of the nodes by constraint status at the solution.
///
/// Ties (`z = psi` with vanishing multiplier) are reported biactive, never
/// strongly active, so downstream cone constructions get the larger
/// feasible set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    pub strongly_active: Vec<usize>,
    pub biactive: Vec<usize>,
    pub inactive: Vec<usize>,
}

impl ActiveSet {
    /// All nodes with `z = psi` (strongly active plus biactive).
    pub fn active(&self) -> Vec<usize> {
        let mut v = self.strongly_active.clone();
        v.extend_from_slice(&self.biactive);
        v.sort_unstable();
        v
    }
}

/// Classify nodes from solution values. Activity detection uses a relative
/// gap tolerance; the strongly-active/biactive split uses
/// [`multiplier_threshold`]. Cone extraction in the sensitivity layer
/// shares this function so the derivative cone always agrees with the
/// solver that produced the solution.
pub fn classify(z: &GridFunction, lambda: &GridFunction, psi: &GridFunction) -> ActiveSet {
    let tol_mult = multiplier_threshold(lambda);
    let mut strongly_active = Vec::new();
    let mut biactive = Vec::new();
    let mut inactive = Vec::new();
    for i in 0..z.len() {
        let p = psi[i];
        let is_active = p.is_finite() && p - z[i] <= 1e-8 * (1.0 + p.abs());
        if !is_active {
            inactive.push(i);
        } else if lambda[i] > tol_mult {
            strongly_active.push(i);
        } else {
            biactive.push(i);
        }
    }
    ActiveSet {
        strongly_active,
        biactive,
        inactive,
    }
}

#[derive(Debug, Clone)]
pub struct LCPSolution {
    pub z: GridFunction,
    /// `lambda = b - S z`.
    pub multiplier: GridFunction,
    pub active: ActiveSet,
    pub iterations: usize,
    /// Complementarity residual `max_i |lambda_i (psi_i - z_i)|`
    /// (`|lambda_i|` at unconstrained nodes).
    pub residual: f64,
}

fn finish(problem: &LCPProblem, z: GridFunction, iterations: usize) -> LCPSolution {
    let lambda = problem.rhs.sub(&problem.system.apply(&z));
    let mut residual = 0.0f64;
    for i in 0..z.len() {
        let p = problem.upper_bound[i];
        let c = if p.is_finite() {
            (lambda[i] * (p - z[i])).abs()
        } else {
            lambda[i].abs()
        };
        residual = residual.max(c);
    }
    let active = classify(&z, &lambda, &problem.upper_bound);
    LCPSolution {
        z,
        multiplier: lambda,
        active,
        iterations,
        residual,
    }
}

/// Projected SOR: Gauss-Seidel sweeps with the clamp `min(., psi_i)`,
/// stopping when the sup-norm of the iterate change drops below `tol`.
pub fn solve_psor(
    problem: &LCPProblem,
    tol: f64,
    max_iter: usize,
    relaxation: f64,
) -> Result<LCPSolution, SolverError> {
    solve_psor_from(problem, tol, max_iter, relaxation, None)
}

/// Projected SOR with a warm-start iterate (clamped to feasibility).
pub fn solve_psor_from(
    problem: &LCPProblem,
    tol: f64,
    max_iter: usize,
    relaxation: f64,
    start: Option<&GridFunction>,
) -> Result<LCPSolution, SolverError> {
    if !(relaxation > 0.0 && relaxation < 2.0) {
        return Err(SolverError::InvalidParameter(format!(
            "relaxation must lie in (0, 2), got {relaxation}"
        )));
    }
    let m = problem.m();
    let s = &problem.system;
    let b = problem.rhs.values();
    let psi = problem.upper_bound.values();
    let mut z: Vec<f64> = match start {
        Some(g) => {
            assert_eq!(g.len(), m);
            g.values()
                .iter()
                .zip(psi)
                .map(|(&v, &p)| v.min(p))
                .collect()
        }
        None => psi.iter().map(|&p| 0.0f64.min(p)).collect(),
    };
    let mut change = f64::INFINITY;
    for sweep in 1..=max_iter {
        change = 0.0;
        for i in 0..m {
            let mut sigma = b[i];
            if i > 0 {
                sigma -= s.lower()[i - 1] * z[i - 1];
            }
            if i + 1 < m {
                sigma -= s.upper()[i] * z[i + 1];
            }
            let gs = sigma / s.diag()[i];
            let candidate = z[i] + relaxation * (gs - z[i]);
            let new = candidate.min(psi[i]);
            change = change.max((new - z[i]).abs());
            z[i] = new;
        }
        if change < tol {
            return Ok(finish(problem, GridFunction::new(z), sweep));
        }
    }
    Err(SolverError::NonConvergence {
        method: "projected SOR",
        iterations: max_iter,
        residual: change,
    })
}

/// Primal-dual active-set loop: guess the active set, solve the system with
/// `z = psi` enforced on it, update the set from the multiplier sign and the
/// constraint violation, and stop when the set repeats. Complementarity on
/// exit is exact up to linear-solver roundoff.
pub fn solve_pdas(
    problem: &LCPProblem,
    _tol: f64,
    max_iter: usize,
) -> Result<LCPSolution, SolverError> {
    solve_pdas_from(problem, max_iter, None)
}

/// Primal-dual active set with a warm-start active set.
pub fn solve_pdas_from(
    problem: &LCPProblem,
    max_iter: usize,
    initial_active: Option<&[usize]>,
) -> Result<LCPSolution, SolverError> {
    let m = problem.m();
    let s = &problem.system;
    let psi = problem.upper_bound.values();
    let mut active = vec![false; m];
    if let Some(init) = initial_active {
        for &i in init {
            if psi[i].is_finite() {
                active[i] = true;
            }
        }
    }
    for round in 1..=max_iter {
        // Constrained rows become identity rows; couplings from free rows to
        // constrained columns stay in place, so the solve is still a single
        // tridiagonal sweep.
        let mut lower = s.lower().to_vec();
        let mut diag = s.diag().to_vec();
        let mut upper = s.upper().to_vec();
        let mut rhs = problem.rhs.values().to_vec();
        for i in 0..m {
            if active[i] {
                diag[i] = 1.0;
                if i > 0 {
                    lower[i - 1] = 0.0;
                }
                if i + 1 < m {
                    upper[i] = 0.0;
                }
                rhs[i] = psi[i];
            }
        }
        let z = Tridiag::new(lower, diag, upper).solve(&GridFunction::new(rhs))?;
        let lambda = problem.rhs.sub(&s.apply(&z));
        // Each round enforces z = psi or lambda = 0 exactly per node, so
        // only the sign conditions can fail; satisfying them to roundoff is
        // a valid exit even if degenerate (biactive) nodes keep toggling
        // the set.
        let kkt_tol = 1e-11 * (1.0 + problem.rhs.sup_norm() + z.sup_norm());
        let kkt_ok = (0..m).all(|i| {
            lambda[i] >= -kkt_tol && (!psi[i].is_finite() || z[i] <= psi[i] + kkt_tol)
        });
        let mut next = vec![false; m];
        let mut changed = false;
        for i in 0..m {
            if !psi[i].is_finite() {
                continue;
            }
            next[i] = lambda[i] + (z[i] - psi[i]) > 0.0;
            changed |= next[i] != active[i];
        }
        if !changed || kkt_ok {
            return Ok(finish(problem, z, round));
        }
        active = next;
    }
    Err(SolverError::NonConvergence {
        method: "primal-dual active set",
        iterations: max_iter,
        residual: f64::NAN,
    })
}

/// Solver selection for the composite layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LcpMethod {
    Psor {
        tol: f64,
        max_iter: usize,
        relaxation: f64,
    },
    Pdas {
        max_iter: usize,
    },
}

impl Default for LcpMethod {
    fn default() -> Self {
        LcpMethod::Pdas { max_iter: 200 }
    }
}

impl LcpMethod {
    pub fn default_psor() -> Self {
        LcpMethod::Psor {
            tol: 1e-10,
            max_iter: 100_000,
            relaxation: 1.5,
        }
    }

    /// Solve with an optional warm start (iterate for PSOR, active set for
    /// PDAS).
    pub fn solve_warm(
        &self,
        problem: &LCPProblem,
        warm_iterate: Option<&GridFunction>,
        warm_active: Option<&[usize]>,
    ) -> Result<LCPSolution, SolverError> {
        match *self {
            LcpMethod::Psor {
                tol,
                max_iter,
                relaxation,
            } => solve_psor_from(problem, tol, max_iter, relaxation, warm_iterate),
            LcpMethod::Pdas { max_iter } => solve_pdas_from(problem, max_iter, warm_active),
        }
    }

    pub fn solve(&self, problem: &LCPProblem) -> Result<LCPSolution, SolverError> {
        self.solve_warm(problem, None, None)
    }
}

/// Brute-force oracle: enumerate all active sets over the constrained
/// nodes, solve each reduced system by dense Gaussian elimination, and
/// return the (unique, by positive definiteness) KKT-consistent one.
///
/// Deliberately independent of the production path: dense elimination with
/// partial pivoting instead of the tridiagonal sweep.
pub fn solve_bruteforce_oracle(problem: &LCPProblem) -> Result<LCPSolution, SolverError> {
    let m = problem.m();
    if m > 20 {
        return Err(SolverError::SizeLimit(format!(
            "brute-force oracle limited to 20 nodes, got {m}"
        )));
    }
    let psi = problem.upper_bound.values();
    let candidates: Vec<usize> = (0..m).filter(|&i| psi[i].is_finite()).collect();
    let b = problem.rhs.values();
    let scale_b = 1.0 + problem.rhs.sup_norm();

    for mask in 0u32..(1u32 << candidates.len()) {
        let mut fixed = vec![false; m];
        for (k, &i) in candidates.iter().enumerate() {
            if mask & (1 << k) != 0 {
                fixed[i] = true;
            }
        }
        // Dense system: identity rows on the fixed set, original rows
        // elsewhere with fixed columns moved to the right-hand side.
        let mut a = vec![vec![0.0; m]; m];
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            if fixed[i] {
                a[i][i] = 1.0;
                rhs[i] = psi[i];
            } else {
                rhs[i] = b[i];
                for j in 0..m {
                    a[i][j] = problem.system.entry(i, j);
                }
            }
        }
        let Some(z) = dense_solve(&mut a, &mut rhs) else {
            continue;
        };
        let z = GridFunction::new(z);
        let lambda = problem.rhs.sub(&problem.system.apply(&z));
        let tol = 1e-10 * scale_b * (1.0 + z.sup_norm());
        let mut ok = true;
        for i in 0..m {
            if fixed[i] {
                if lambda[i] < -tol {
                    ok = false;
                    break;
                }
            } else {
                if psi[i].is_finite() && z[i] > psi[i] + tol {
                    ok = false;
                    break;
                }
                if lambda[i].abs() > tol {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok(finish(problem, z, 1));
        }
    }
    Err(SolverError::InternalInconsistency(
        "no KKT-consistent active set found (system not an SPD M-matrix?)".into(),
    ))
}

/// Gaussian elimination with partial pivoting; `None` on a singular pivot.
/// Shared by the enumeration oracles, never by the production solvers.
pub(crate) fn dense_solve(a: &mut [Vec<f64>], rhs: &mut [f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpaceGrid;
    use crate::operator::assemble_operator;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_problem(rng: &mut ChaCha8Rng, m: usize) -> LCPProblem {
        // Random SPD M-matrix: negative off-diagonals with strictly dominant
        // diagonal, random rhs, random obstacle with occasional +inf nodes.
        let off: Vec<f64> = (0..m - 1).map(|_| -rng.gen_range(0.0..1.0)).collect();
        let diag: Vec<f64> = (0..m)
            .map(|i| {
                let mut row = rng.gen_range(0.1..1.0);
                if i > 0 {
                    row += off[i - 1].abs();
                }
                if i < m - 1 {
                    row += off[i].abs();
                }
                row
            })
            .collect();
        let rhs = GridFunction::new((0..m).map(|_| rng.gen_range(-2.0..2.0)).collect());
        let psi = GridFunction::new(
            (0..m)
                .map(|_| {
                    if rng.gen_bool(0.15) {
                        f64::INFINITY
                    } else {
                        rng.gen_range(-1.0..1.5)
                    }
                })
                .collect(),
        );
        LCPProblem::new(Tridiag::symmetric(diag, off), rhs, psi)
    }

    #[test]
    fn one_node_oracle_arithmetic() {
        // S=[2], b=[1], psi=[0.4]: unconstrained 0.5 infeasible, so z=0.4
        // with lambda = 1 - 0.8 = 0.2.
        let p = LCPProblem::new(
            Tridiag::symmetric(vec![2.0], vec![]),
            GridFunction::new(vec![1.0]),
            GridFunction::new(vec![0.4]),
        );
        let sol = solve_bruteforce_oracle(&p).unwrap();
        assert!((sol.z[0] - 0.4).abs() < 1e-14);
        assert!((sol.multiplier[0] - 0.2).abs() < 1e-14);
        assert_eq!(sol.active.strongly_active, vec![0]);

        // psi=[0.6]: unconstrained solution feasible, multiplier zero.
        let p = LCPProblem::new(
            Tridiag::symmetric(vec![2.0], vec![]),
            GridFunction::new(vec![1.0]),
            GridFunction::new(vec![0.6]),
        );
        let sol = solve_bruteforce_oracle(&p).unwrap();
        assert!((sol.z[0] - 0.5).abs() < 1e-14);
        assert!(sol.multiplier[0].abs() < 1e-14);
        assert_eq!(sol.active.inactive, vec![0]);
    }

    #[test]
    fn oracle_self_check_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let p = random_problem(&mut rng, 2);
            let sol = solve_bruteforce_oracle(&p).unwrap();
            for i in 0..2 {
                let psi = p.upper_bound[i];
                if psi.is_finite() {
                    assert!(sol.z[i] <= psi + 1e-12);
                    assert!((sol.multiplier[i] * (psi - sol.z[i])).abs() < 1e-12);
                }
                assert!(sol.multiplier[i] > -1e-12 || !psi.is_finite());
            }
            assert!(sol.residual < 1e-12);
        }
    }

    #[test]
    fn unconstrained_obstacle_reduces_to_linear_solve() {
        let sg = SpaceGrid::new(1.0, 6).unwrap();
        let op = assemble_operator(&sg, 1.0, 0.0).unwrap();
        let sys = op.stepped(0.1);
        let b = GridFunction::new((0..6).map(|i| (i as f64).cos()).collect());
        let psi = GridFunction::constant(6, f64::INFINITY);
        let p = LCPProblem::new(sys.clone(), b.clone(), psi);
        let direct = sys.solve(&b).unwrap();

        let psor = solve_psor(&p, 1e-12, 100_000, 1.5).unwrap();
        assert!(psor.z.sup_distance(&direct) < 1e-10);
        assert!(psor.active.active().is_empty());

        let pdas = solve_pdas(&p, 0.0, 50).unwrap();
        assert_eq!(pdas.iterations, 1, "no constraints: one PDAS round");
        assert!(pdas.z.sup_distance(&direct) < 1e-12);
    }

    #[test]
    fn exactly_attained_obstacle_has_zero_multiplier() {
        // b = S psi: z = psi with lambda = 0, reported biactive by the
        // tie-break rule.
        let sg = SpaceGrid::new(1.0, 5).unwrap();
        let sys = assemble_operator(&sg, 1.0, 0.0).unwrap().stepped(0.2);
        let psi = GridFunction::new((0..5).map(|i| 1.0 + 0.1 * i as f64).collect());
        let b = sys.apply(&psi);
        let p = LCPProblem::new(sys, b, psi.clone());
        let sol = solve_pdas(&p, 0.0, 50).unwrap();
        assert!(sol.z.sup_distance(&psi) < 1e-12);
        assert!(sol.multiplier.sup_norm() < 1e-10);
        assert!(sol.active.strongly_active.is_empty());
        assert_eq!(sol.active.biactive.len(), 5);
    }

    #[test]
    fn psor_matches_oracle_on_clamped_instance() {
        // m=4, S = I + 0.1 A(nu=1, omega=1), b = S*1 + 0.5, psi = 1.
        let sg = SpaceGrid::new(1.0, 4).unwrap();
        let sys = assemble_operator(&sg, 1.0, 0.0).unwrap().stepped(0.1);
        let ones = GridFunction::constant(4, 1.0);
        let b = sys.apply(&ones).map(|v| v + 0.5);
        let p = LCPProblem::new(sys, b, ones);
        let psor = solve_psor(&p, 1e-12, 100_000, 1.5).unwrap();
        let oracle = solve_bruteforce_oracle(&p).unwrap();
        assert!(psor.z.sup_distance(&oracle.z) < 1e-9);
    }

    #[test]
    fn pdas_matches_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for trial in 0..200 {
            let m = rng.gen_range(1..=12);
            let p = random_problem(&mut rng, m);
            let oracle = solve_bruteforce_oracle(&p).unwrap();
            let pdas = solve_pdas(&p, 0.0, 200).unwrap();
            assert!(
                pdas.z.sup_distance(&oracle.z) < 1e-9,
                "trial {trial}: PDAS and oracle disagree by {}",
                pdas.z.sup_distance(&oracle.z)
            );
            assert_eq!(pdas.active, oracle.active, "trial {trial}");
            // Sign conditions on exit.
            for i in 0..m {
                assert!(pdas.multiplier[i] >= -1e-10, "trial {trial}: negative multiplier");
                let psi = p.upper_bound[i];
                if psi.is_finite() {
                    assert!(psi - pdas.z[i] >= -1e-10, "trial {trial}: obstacle violated");
                }
            }
        }
    }

    #[test]
    fn feasible_linear_solution_leaves_obstacle_inactive() {
        // b <= S psi componentwise: the unconstrained solution is feasible,
        // hence the active set is empty; cross-checked via the oracle.
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        for _ in 0..50 {
            let m = rng.gen_range(2..=10);
            let mut p = random_problem(&mut rng, m);
            let psi =
                GridFunction::new((0..m).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let spsi = p.system.apply(&psi);
            // Push b strictly below S psi.
            p.rhs = spsi.map(|v| v - rng.gen_range(0.01..1.0));
            p.upper_bound = psi;
            let oracle = solve_bruteforce_oracle(&p).unwrap();
            assert!(oracle.active.active().is_empty());
            let pdas = solve_pdas(&p, 0.0, 100).unwrap();
            assert!(pdas.active.active().is_empty());
        }
    }

    #[test]
    fn comparison_principle_on_random_instances() {
        // Fixed S: b1 <= b2 and psi1 <= psi2 imply z1 <= z2 componentwise.
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        for _ in 0..500 {
            let m = rng.gen_range(1..=10);
            let p1 = random_problem(&mut rng, m);
            let b2 = p1.rhs.map(|v| v + rng.gen_range(0.0..1.0));
            let psi2 = p1.upper_bound.map(|v| v + rng.gen_range(0.0..1.0));
            let p2 = LCPProblem::new(p1.system.clone(), b2, psi2);
            let z1 = solve_pdas(&p1, 0.0, 200).unwrap().z;
            let z2 = solve_pdas(&p2, 0.0, 200).unwrap().z;
            assert!(
                z1.max_excess_over(&z2) <= 1e-9,
                "comparison principle violated by {}",
                z1.max_excess_over(&z2)
            );
        }
    }

    #[test]
    fn psor_rejects_bad_relaxation_and_reports_nonconvergence() {
        let p = LCPProblem::new(
            Tridiag::symmetric(vec![2.0], vec![]),
            GridFunction::new(vec![1.0]),
            GridFunction::new(vec![f64::INFINITY]),
        );
        assert!(matches!(
            solve_psor(&p, 1e-10, 100, 2.5),
            Err(SolverError::InvalidParameter(_))
        ));
        // A coupled system cannot hit an impossible tolerance in 3 sweeps.
        let coupled = LCPProblem::new(
            Tridiag::symmetric(vec![2.0, 2.0], vec![-1.0]),
            GridFunction::new(vec![1.0, 1.0]),
            GridFunction::constant(2, f64::INFINITY),
        );
        match solve_psor(&coupled, 1e-30, 3, 1.0) {
            Err(SolverError::NonConvergence { residual, .. }) => {
                assert!(residual.is_finite() && residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn oracle_rejects_oversized_problems() {
        let m = 25;
        let p = LCPProblem::new(
            Tridiag::identity(m),
            GridFunction::zeros(m),
            GridFunction::zeros(m),
        );
        assert!(matches!(
            solve_bruteforce_oracle(&p),
            Err(SolverError::SizeLimit(_))
        ));
    }

    #[test]
    fn warm_started_solvers_agree_with_cold() {
        let mut rng = ChaCha8Rng::seed_from_u64(69);
        for _ in 0..50 {
            let m = rng.gen_range(2..=10);
            let p = random_problem(&mut rng, m);
            let cold = solve_pdas(&p, 0.0, 200).unwrap();
            let warm = solve_pdas_from(&p, 200, Some(&cold.active.active())).unwrap();
            assert!(warm.z.sup_distance(&cold.z) < 1e-12);
            let guess = GridFunction::new((0..m).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let psor = solve_psor_from(&p, 1e-12, 100_000, 1.4, Some(&guess)).unwrap();
            assert!(psor.z.sup_distance(&cold.z) < 1e-9);
        }
    }
}
