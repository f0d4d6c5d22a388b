//! Shared instance builders: the default inverse-parabolic example, the
//! clamped superposition instance, and random LCP generators used by the
//! oracle-compare run kind and the acceptance suite.

use pqvi::grid::{GridFunction, InterpolationKind, SpaceGrid, SpaceTimeFunction, TimeGrid};
use pqvi::lcp::LCPProblem;
use pqvi::obstacle::{NonlinearSource, ObstacleMap, ScalarFn};
use pqvi::operator::{assemble_operator, DiscreteOperator, Tridiag};
use pqvi::problem::ProblemData;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub sg: SpaceGrid,
    pub tg: TimeGrid,
    pub op: DiscreteOperator,
    pub data: ProblemData,
}

/// Spatial bump `16 s^2 (1-s)^2`, peak 1 at the midpoint.
pub fn bump(sg: &SpaceGrid, amplitude: f64) -> GridFunction {
    sg.sample(|x| {
        let s = x / sg.omega();
        amplitude * 16.0 * s * s * (1.0 - s) * (1.0 - s)
    })
}

fn constant_in_time(g: &GridFunction, n_steps: usize) -> SpaceTimeFunction {
    SpaceTimeFunction::new(
        vec![g.clone(); n_steps + 1],
        InterpolationKind::PiecewiseConstantRight,
    )
}

/// Default example with the inverse-parabolic obstacle map: unit interval
/// and horizon, `g(v) = gamma (1 + tanh v)/2` with `gamma = 0.25`,
/// `w0 = 0.5 sin(pi x)`, constant source `f = 1` and a nonnegative bump
/// direction of amplitude 0.5. Hypotheses: `f >= 0` increasing (constant), `z0 = 0` below
/// `Phi(.)(0) = w0`, `A z0 = 0 <= f`; the gain is small enough for the
/// contraction verdict at `T = 1`.
pub fn sec7_default(m: usize, n_steps: usize) -> Instance {
    let sg = SpaceGrid::new(1.0, m).expect("grid");
    let tg = TimeGrid::new(1.0, n_steps).expect("time grid");
    let op = assemble_operator(&sg, 1.0, 0.0).expect("operator");
    let op_b = assemble_operator(&sg, 1.0, 0.0).expect("B operator");
    let w0 = sg.sample(|x| 0.5 * (std::f64::consts::PI * x).sin());
    let data = ProblemData {
        f: constant_in_time(&GridFunction::constant(m, 1.0), n_steps),
        d: constant_in_time(&bump(&sg, 0.5), n_steps),
        z0: GridFunction::zeros(m),
        obstacle: ObstacleMap::InverseParabolic {
            op_b,
            source: NonlinearSource::new(ScalarFn::TanhStep { gamma: 0.25 }),
            w0,
        },
    };
    Instance { sg, tg, op, data }
}

/// Superposition instance whose solution clamps against its own obstacle:
/// a large constant source against `phi(v) = 0.5 + 0.5 v` (pointwise cap at
/// 1). Direction: nonnegative bump.
pub fn clamped_superposition(m: usize, n_steps: usize) -> Instance {
    let sg = SpaceGrid::new(1.0, m).expect("grid");
    let tg = TimeGrid::new(1.0, n_steps).expect("time grid");
    let op = assemble_operator(&sg, 1.0, 0.0).expect("operator");
    let data = ProblemData {
        f: constant_in_time(&GridFunction::constant(m, 10.0), n_steps),
        d: constant_in_time(&bump(&sg, 1.0), n_steps),
        z0: GridFunction::zeros(m),
        obstacle: ObstacleMap::Superposition {
            map: ScalarFn::Affine {
                offset: 0.5,
                slope: 0.5,
            },
        },
    };
    Instance { sg, tg, op, data }
}

/// Smooth superposition instance satisfying the monotone-route hypotheses,
/// used for the Rothe monotonicity, uniform-bound and route-consistency
/// checks.
pub fn smooth_superposition(m: usize, n_steps: usize) -> Instance {
    let sg = SpaceGrid::new(1.0, m).expect("grid");
    let tg = TimeGrid::new(1.0, n_steps).expect("time grid");
    let op = assemble_operator(&sg, 1.0, 0.0).expect("operator");
    let omega = sg.omega();
    let f = SpaceTimeFunction::sample(&sg, &tg, InterpolationKind::RotheLinear, |t, x| {
        6.0 * (1.0 + t) * (std::f64::consts::PI * x / omega).sin()
    });
    let data = ProblemData {
        f,
        d: constant_in_time(&bump(&sg, 1.0), n_steps),
        z0: GridFunction::zeros(m),
        obstacle: ObstacleMap::Superposition {
            map: ScalarFn::Affine {
                offset: 0.4,
                slope: 0.5,
            },
        },
    };
    Instance { sg, tg, op, data }
}

/// Constant-obstacle (pure VI) instance with a strongly clamped region.
pub fn vi_constant(m: usize, n_steps: usize) -> Instance {
    let sg = SpaceGrid::new(1.0, m).expect("grid");
    let tg = TimeGrid::new(1.0, n_steps).expect("time grid");
    let op = assemble_operator(&sg, 1.0, 0.0).expect("operator");
    let data = ProblemData {
        f: constant_in_time(&GridFunction::constant(m, 6.0), n_steps),
        d: constant_in_time(&bump(&sg, 1.0), n_steps),
        z0: GridFunction::zeros(m),
        obstacle: ObstacleMap::Constant {
            psi0: GridFunction::constant(m, 0.6),
        },
    };
    Instance { sg, tg, op, data }
}

/// Random SPD M-matrix LCP: strictly diagonally dominant tridiagonal with
/// nonpositive off-diagonals, random right-hand side, random obstacle with
/// occasional unconstrained nodes.
pub fn random_lcp(rng: &mut ChaCha8Rng, m: usize) -> LCPProblem {
    let off: Vec<f64> = (0..m.saturating_sub(1))
        .map(|_| -rng.gen_range(0.0..1.0))
        .collect();
    let diag: Vec<f64> = (0..m)
        .map(|i| {
            let mut row = rng.gen_range(0.1..1.0);
            if i > 0 {
                row += off[i - 1].abs();
            }
            if i + 1 < m {
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
