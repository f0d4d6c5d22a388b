//! Problem data for the parabolic QVI and its hypothesis flags.

use crate::grid::{GridFunction, SpaceGrid, SpaceTimeFunction, TimeGrid};
use crate::obstacle::ObstacleMap;
use crate::operator::DiscreteOperator;

/// Source, perturbation direction, initial data and obstacle map.
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub f: SpaceTimeFunction,
    /// Perturbation direction for the sensitivity layer.
    pub d: SpaceTimeFunction,
    pub z0: GridFunction,
    pub obstacle: ObstacleMap,
}

/// Hypothesis flags checked on demand; violations are reported, the solvers
/// do not abort on them (some parameter choices satisfy the hypotheses only
/// approximately).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataFlags {
    /// `f >= 0` at all frames.
    pub f_nonnegative: bool,
    /// `t -> f(t)` nondecreasing framewise.
    pub f_increasing: bool,
    pub d_nonnegative: bool,
    pub d_nonpositive: bool,
    pub z0_nonnegative: bool,
    /// `z0 <= Phi(z0)(0)`.
    pub initial_feasible: bool,
    /// `A z0 <= f` nodewise at every frame (the second half of the initial
    /// data hypothesis).
    pub az0_below_f: bool,
}

impl DataFlags {
    pub fn d_sign_definite(&self) -> bool {
        self.d_nonnegative || self.d_nonpositive
    }
}

impl ProblemData {
    pub fn check_flags(&self, op: &DiscreteOperator, _sg: &SpaceGrid, tg: &TimeGrid) -> DataFlags {
        let tol = 1e-12;
        let nonneg = |u: &SpaceTimeFunction| u.frames().iter().all(|f| f.min() >= -tol);
        let nonpos = |u: &SpaceTimeFunction| u.frames().iter().all(|f| f.max() <= tol);
        let f_increasing = self.f.max_decrease_in_time() <= tol;
        let phi_z0_at_0 = self.obstacle.evaluate_frozen(&self.z0, 0, tg);
        let initial_feasible = self.z0.max_excess_over(&phi_z0_at_0) <= 1e-10 * (1.0 + self.z0.sup_norm());
        let az0 = op.apply(&self.z0);
        let az0_below_f = self
            .f
            .frames()
            .iter()
            .all(|fr| az0.max_excess_over(fr) <= 1e-10 * (1.0 + az0.sup_norm()));
        DataFlags {
            f_nonnegative: nonneg(&self.f),
            f_increasing,
            d_nonnegative: nonneg(&self.d),
            d_nonpositive: nonpos(&self.d),
            z0_nonnegative: self.z0.min() >= -tol,
            initial_feasible,
            az0_below_f,
        }
    }

    /// Human-readable warnings for hypothesis violations.
    pub fn hypothesis_warnings(&self, flags: &DataFlags) -> Vec<String> {
        let mut w = Vec::new();
        if !flags.f_nonnegative {
            w.push("source f takes negative values".to_string());
        }
        if !flags.f_increasing {
            w.push("source f is not increasing in time".to_string());
        }
        if !flags.z0_nonnegative {
            w.push("initial data z0 takes negative values".to_string());
        }
        if !flags.initial_feasible {
            w.push("initial data violates z0 <= Phi(z0)(0)".to_string());
        }
        if !flags.az0_below_f {
            w.push("initial data violates A z0 <= f".to_string());
        }
        w
    }
}
