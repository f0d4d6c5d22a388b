//! Smallness diagnostics for the sensitivity expansion.
//!
//! Two families of constants describe how strongly the obstacle map's
//! derivative feeds back into the expansion:
//!
//! - `c1, c2, c3` bound `Phi'(u)` as a map out of `L2(0,T;V)` (the energy
//!   route); the verdict requires `C_b c1 + c2 + c3 < C_a`.
//! - `k1, k2, k3` bound `Phi'(z)` as a map out of `L^p(0,T;H)` near `u`
//!   (the contraction route); the verdict requires
//!   `k1 + T^{1/p} (k2 C_b + k3) / sqrt(C_a) < 1`.
//!
//! Constants are estimated as maxima of Rayleigh-type quotients over random
//! probes; for the inverse-parabolic map the closed-form bounds obtained
//! from `sup |g'|` and the B-operator constants are reported alongside.
//! Diagnostics never abort.

use crate::grid::{GridFunction, InterpolationKind, SpaceGrid, SpaceTimeFunction, TimeGrid};
use crate::norms::{dual_norm, h_norm, space_time_norm, NormKind};
use crate::obstacle::ObstacleMap;
use crate::operator::DiscreteOperator;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Closed-form bounds for the inverse-parabolic map, from `sup |g'|`, the
/// horizon and the B-operator constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormBounds {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallnessDiagnostics {
    /// `||Phi'(u)h||_{L2V} <= c1 ||h||_{L2V}` (empirical maximum).
    pub c1: f64,
    /// `||d/dt Phi'(u)h||_{L2V*} <= c2 ||h||_{L2V}`.
    pub c2: f64,
    /// `||Phi'(u)h(T)||_H^2 <= c3 ||h||_{L2V}^2`.
    pub c3: f64,
    /// `||Phi'(u)v||_{LpH} <= k1 ||v||_{LpH}`.
    pub k1: f64,
    /// `||Phi'(u)v||_{L2V} <= k2 ||v||_{LpH}`.
    pub k2: f64,
    /// `||d/dt Phi'(u)v||_{L2V*} <= k3 ||v||_{LpH}`.
    pub k3: f64,
    pub verdict_energy: bool,
    pub verdict_contraction: bool,
    /// Left-hand sides of the two smallness inequalities.
    pub energy_lhs: f64,
    pub contraction_lhs: f64,
    pub closed_form: Option<ClosedFormBounds>,
    /// Contraction inequality evaluated with the closed-form bounds, when
    /// they exist.
    pub closed_form_contraction_lhs: Option<f64>,
    pub probes: usize,
    pub p: f64,
}

impl SmallnessDiagnostics {
    /// The expansion guarantee: the empirical verdict, strengthened by the
    /// closed-form one whenever closed-form bounds are available. Random
    /// probes at the base point can underestimate the operative gain, so a
    /// failing closed-form bound withdraws the guarantee.
    pub fn guaranteed_contraction(&self) -> bool {
        self.verdict_contraction
            && self
                .closed_form_contraction_lhs
                .map(|lhs| lhs < 1.0)
                .unwrap_or(true)
    }
}

/// Discrete time derivative as a piecewise-constant-right field of the
/// difference quotients.
fn time_derivative(w: &SpaceTimeFunction, tg: &TimeGrid) -> Vec<GridFunction> {
    let h = tg.h();
    (1..=w.n_steps())
        .map(|n| w.frame(n).sub(w.frame(n - 1)).scale(1.0 / h))
        .collect()
}

fn l2_dual_norm(steps: &[GridFunction], sg: &SpaceGrid, tg: &TimeGrid) -> f64 {
    let h = tg.h();
    steps
        .iter()
        .map(|s| {
            let d = dual_norm(sg, s);
            h * d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Estimate the smallness constants at the base point `u` with
/// `probe_count` random direction probes.
#[allow(clippy::too_many_arguments)]
pub fn smallness_diagnostics(
    map: &ObstacleMap,
    u: &SpaceTimeFunction,
    op_a: &DiscreteOperator,
    sg: &SpaceGrid,
    tg: &TimeGrid,
    probe_count: usize,
    p: f64,
    seed: u64,
) -> SmallnessDiagnostics {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = sg.m();
    let n = tg.n_steps();
    let (mut c1, mut c2, mut c3) = (0.0f64, 0.0f64, 0.0f64);
    let (mut k1, mut k2, mut k3) = (0.0f64, 0.0f64, 0.0f64);

    for _ in 0..probe_count {
        let frames: Vec<GridFunction> = (0..=n)
            .map(|_| GridFunction::new((0..m).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let h = SpaceTimeFunction::new(frames, InterpolationKind::RotheLinear);
        let w = map.derivative_apply(u, &h, tg);

        let h_l2v = space_time_norm(&h, NormKind::L2V, sg, tg);
        let h_lph = space_time_norm(&h, NormKind::LpH(p), sg, tg);
        let w_l2v = space_time_norm(&w, NormKind::L2V, sg, tg);
        let w_lph = space_time_norm(&w, NormKind::LpH(p), sg, tg);
        let w_dt = l2_dual_norm(&time_derivative(&w, tg), sg, tg);
        let w_final = h_norm(sg, w.frame(n));

        if h_l2v > 0.0 {
            c1 = c1.max(w_l2v / h_l2v);
            c2 = c2.max(w_dt / h_l2v);
            c3 = c3.max(w_final * w_final / (h_l2v * h_l2v));
        }
        if h_lph > 0.0 {
            k1 = k1.max(w_lph / h_lph);
            k2 = k2.max(w_l2v / h_lph);
            k3 = k3.max(w_dt / h_lph);
        }
    }

    let (ca, cb) = (op_a.coercivity(), op_a.boundedness());
    let t = tg.horizon();
    let energy_lhs = cb * c1 + c2 + c3;
    let contraction_lhs = k1 + t.powf(1.0 / p) * (k2 * cb + k3) / ca.sqrt();

    let closed_form = match map {
        ObstacleMap::InverseParabolic { op_b, source, .. } => {
            let gp = source.sup_g_prime;
            let (cab, cbb) = (op_b.coercivity(), op_b.boundedness());
            // Energy estimate of the linearised equation gives
            // ||Phi'(u)h||_{L2V} <= g' sqrt(T / (2 C_a^B)) ||h||_{L2H};
            // the final-time bound comes from the L-infinity estimate
            // ||Phi'(u)h||_{LinfH} <= 2 g' sqrt(T) ||h||_{L2H}, and the
            // time-derivative bound from reading it off the equation.
            let b_l2v = gp * (t / (2.0 * cab)).sqrt();
            let b_linf = 2.0 * gp * t.sqrt();
            let b_dt = gp * (1.0 + cbb * (t / (2.0 * cab)).sqrt());
            Some(ClosedFormBounds {
                c1: b_l2v,
                c2: b_dt,
                c3: b_linf * b_linf,
                k1: t.sqrt() * b_linf,
                k2: b_l2v,
                k3: b_dt,
            })
        }
        _ => None,
    };

    let closed_form_contraction_lhs = closed_form
        .as_ref()
        .map(|cf| cf.k1 + t.powf(1.0 / p) * (cf.k2 * cb + cf.k3) / ca.sqrt());

    SmallnessDiagnostics {
        c1,
        c2,
        c3,
        k1,
        k2,
        k3,
        verdict_energy: energy_lhs < ca,
        verdict_contraction: contraction_lhs < 1.0,
        energy_lhs,
        contraction_lhs,
        closed_form,
        closed_form_contraction_lhs,
        probes: probe_count,
        p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obstacle::{NonlinearSource, ScalarFn};
    use crate::operator::assemble_operator;

    fn setup() -> (SpaceGrid, TimeGrid, DiscreteOperator) {
        let sg = SpaceGrid::new(1.0, 15).unwrap();
        let tg = TimeGrid::new(1.0, 24).unwrap();
        let op = assemble_operator(&sg, 1.0, 0.0).unwrap();
        (sg, tg, op)
    }

    #[test]
    fn constant_map_has_zero_constants_and_passing_verdicts() {
        let (sg, tg, op) = setup();
        let map = ObstacleMap::Constant {
            psi0: GridFunction::constant(15, 1.0),
        };
        let u = SpaceTimeFunction::zeros(15, 24, InterpolationKind::RotheLinear);
        let d = smallness_diagnostics(&map, &u, &op, &sg, &tg, 20, 2.0, 1);
        assert_eq!((d.c1, d.c2, d.c3), (0.0, 0.0, 0.0));
        assert_eq!((d.k1, d.k2, d.k3), (0.0, 0.0, 0.0));
        assert!(d.verdict_energy && d.verdict_contraction);
        assert!(d.closed_form.is_none());
    }

    #[test]
    fn linear_superposition_recovers_its_slope() {
        // phi(v) = theta v: the LpH/LpH quotient is exactly theta for every
        // probe.
        let (sg, tg, op) = setup();
        let theta = 0.37;
        let map = ObstacleMap::Superposition {
            map: ScalarFn::Affine {
                offset: 0.0,
                slope: theta,
            },
        };
        let u = SpaceTimeFunction::zeros(15, 24, InterpolationKind::RotheLinear);
        let d = smallness_diagnostics(&map, &u, &op, &sg, &tg, 30, 2.0, 2);
        assert!((d.k1 - theta).abs() < 1e-10, "k1 = {}", d.k1);
        assert!((d.c1 - theta).abs() < 1e-10, "c1 = {}", d.c1);
    }

    #[test]
    fn tanh_map_empirical_constants_sit_below_closed_form() {
        let (sg, tg, op) = setup();
        let map = ObstacleMap::InverseParabolic {
            op_b: op.clone(),
            source: NonlinearSource::new(ScalarFn::TanhStep { gamma: 0.25 }),
            w0: sg.sample(|x| 0.5 * (std::f64::consts::PI * x).sin()),
        };
        let u = SpaceTimeFunction::zeros(15, 24, InterpolationKind::RotheLinear);
        let d = smallness_diagnostics(&map, &u, &op, &sg, &tg, 40, 2.0, 3);
        let cf = d.closed_form.expect("closed-form bounds for the inverse-parabolic map");
        assert!(d.c1 <= cf.c1 + 1e-12, "c1 {} vs bound {}", d.c1, cf.c1);
        assert!(d.c2 <= cf.c2 + 1e-12, "c2 {} vs bound {}", d.c2, cf.c2);
        assert!(d.c3 <= cf.c3 + 1e-12, "c3 {} vs bound {}", d.c3, cf.c3);
        assert!(d.k1 <= cf.k1 + 1e-12);
        assert!(d.k2 <= cf.k2 + 1e-12);
        assert!(d.k3 <= cf.k3 + 1e-12);
        // Small gamma and T = 1: both verdicts should pass.
        assert!(d.verdict_contraction, "contraction lhs {}", d.contraction_lhs);
    }

    #[test]
    fn large_gain_turns_the_verdicts_off() {
        let (sg, tg, op) = setup();
        let map = ObstacleMap::Superposition {
            map: ScalarFn::Affine {
                offset: 0.0,
                slope: 5.0,
            },
        };
        let u = SpaceTimeFunction::zeros(15, 24, InterpolationKind::RotheLinear);
        let d = smallness_diagnostics(&map, &u, &op, &sg, &tg, 20, 2.0, 4);
        assert!(!d.verdict_contraction);
    }
}
