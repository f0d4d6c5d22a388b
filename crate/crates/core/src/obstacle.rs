//! Concrete obstacle maps and their directional derivatives.
//!
//! Three families: a constant obstacle (the VI case), nodewise
//! superposition by a scalar map, and the inverse of a parabolic operator
//! `w' + Bw = g(psi)`, `w(0) = w0`. All are increasing whenever their
//! scalar ingredient is nondecreasing.
//!
//! Scalar nonlinearities come from a fixed named catalogue (no runtime
//! expression parsing): constant, affine, a tanh step, and a clipped linear
//! map.

use crate::error::SolverError;
use crate::grid::{GridFunction, InterpolationKind, SpaceTimeFunction, TimeGrid};
use crate::operator::DiscreteOperator;
use crate::parabolic::backward_euler_linear;

/// Scalar function from the named catalogue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarFn {
    Constant { value: f64 },
    Affine { offset: f64, slope: f64 },
    /// `gamma (1 + tanh(v)) / 2`: C1, nonnegative, increasing, bounded.
    TanhStep { gamma: f64 },
    /// `clamp(slope v + offset, lo, hi)`.
    ClippedLinear { slope: f64, offset: f64, lo: f64, hi: f64 },
}

impl ScalarFn {
    pub fn eval(&self, v: f64) -> f64 {
        match *self {
            ScalarFn::Constant { value } => value,
            ScalarFn::Affine { offset, slope } => offset + slope * v,
            ScalarFn::TanhStep { gamma } => 0.5 * gamma * (1.0 + v.tanh()),
            ScalarFn::ClippedLinear {
                slope,
                offset,
                lo,
                hi,
            } => (slope * v + offset).clamp(lo, hi),
        }
    }

    pub fn deriv(&self, v: f64) -> f64 {
        match *self {
            ScalarFn::Constant { .. } => 0.0,
            ScalarFn::Affine { slope, .. } => slope,
            ScalarFn::TanhStep { gamma } => {
                let c = v.cosh();
                0.5 * gamma / (c * c)
            }
            ScalarFn::ClippedLinear {
                slope,
                offset,
                lo,
                hi,
            } => {
                let raw = slope * v + offset;
                if raw > lo && raw < hi {
                    slope
                } else {
                    0.0
                }
            }
        }
    }

    /// Supremum of `|derivative|`.
    pub fn sup_deriv(&self) -> f64 {
        match *self {
            ScalarFn::Constant { .. } => 0.0,
            ScalarFn::Affine { slope, .. } => slope.abs(),
            ScalarFn::TanhStep { gamma } => 0.5 * gamma.abs(),
            ScalarFn::ClippedLinear { slope, .. } => slope.abs(),
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        match *self {
            ScalarFn::Constant { .. } => true,
            ScalarFn::Affine { slope, .. } => slope >= 0.0,
            ScalarFn::TanhStep { gamma } => gamma >= 0.0,
            ScalarFn::ClippedLinear { slope, .. } => slope >= 0.0,
        }
    }
}

/// The nonlinearity `g` of the inverse-parabolic map with its declared
/// derivative bound. The bound is user-declared (it enters the closed-form
/// smallness estimates) and spot-verified by sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearSource {
    pub g: ScalarFn,
    pub sup_g_prime: f64,
}

impl NonlinearSource {
    pub fn new(g: ScalarFn) -> Self {
        NonlinearSource {
            g,
            sup_g_prime: g.sup_deriv(),
        }
    }

    pub fn with_declared_bound(g: ScalarFn, sup_g_prime: f64) -> Self {
        NonlinearSource { g, sup_g_prime }
    }

    /// Sample `[lo, hi]` to confirm `g >= 0`, `g` nondecreasing and
    /// `|g'| <= sup_g_prime`.
    pub fn spot_check(&self, lo: f64, hi: f64, samples: usize) -> Result<(), SolverError> {
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=samples {
            let v = lo + (hi - lo) * k as f64 / samples as f64;
            let gv = self.g.eval(v);
            if gv < 0.0 {
                return Err(SolverError::AssumptionViolation(format!(
                    "g({v}) = {gv} is negative"
                )));
            }
            if gv < prev - 1e-12 {
                return Err(SolverError::AssumptionViolation(format!(
                    "g is decreasing near v = {v}"
                )));
            }
            let dgv = self.g.deriv(v).abs();
            if dgv > self.sup_g_prime + 1e-12 {
                return Err(SolverError::AssumptionViolation(format!(
                    "|g'({v})| = {dgv} exceeds the declared bound {}",
                    self.sup_g_prime
                )));
            }
            prev = gv;
        }
        Ok(())
    }
}

/// Properties an obstacle map claims; spot-checked in tests on random
/// ordered pairs rather than trusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeclaredProperties {
    pub order_preserving: bool,
    pub time_increasing_preserving: bool,
    pub nonnegative_at_zero: bool,
}

/// Obstacle map `Phi`: space-time function to space-time function.
#[derive(Debug, Clone)]
pub enum ObstacleMap {
    /// `Phi(v) = psi0` broadcast over time; entries may be `+inf`.
    Constant { psi0: GridFunction },
    /// `Phi(v)(t) = phi_hat(v(t))` nodewise.
    Superposition { map: ScalarFn },
    /// `Phi(psi) = w` solving `w' + Bw = g(psi)`, `w(0) = w0`, stepped by
    /// backward Euler on the caller's grid.
    InverseParabolic {
        op_b: DiscreteOperator,
        source: NonlinearSource,
        w0: GridFunction,
    },
}

impl ObstacleMap {
    pub fn declared_properties(&self) -> DeclaredProperties {
        match self {
            ObstacleMap::Constant { psi0 } => DeclaredProperties {
                order_preserving: true,
                time_increasing_preserving: true,
                nonnegative_at_zero: psi0.min() >= 0.0,
            },
            ObstacleMap::Superposition { map } => DeclaredProperties {
                order_preserving: map.is_nondecreasing(),
                time_increasing_preserving: map.is_nondecreasing(),
                nonnegative_at_zero: map.eval(0.0) >= 0.0,
            },
            ObstacleMap::InverseParabolic { op_b, source, w0 } => DeclaredProperties {
                order_preserving: source.g.is_nondecreasing(),
                // Needs B w0 <= 0 on top of monotone g (then the Green's
                // representation makes t -> Phi(psi)(t) - w0 increasing).
                time_increasing_preserving: source.g.is_nondecreasing()
                    && op_b.apply(w0).max() <= 1e-12,
                nonnegative_at_zero: w0.min() >= 0.0,
            },
        }
    }

    /// The derivative vanishes identically (the VI case).
    pub fn derivative_is_zero(&self) -> bool {
        match self {
            ObstacleMap::Constant { .. } => true,
            ObstacleMap::Superposition { map } => map.sup_deriv() == 0.0,
            ObstacleMap::InverseParabolic { source, .. } => source.g.sup_deriv() == 0.0,
        }
    }

    /// `Phi(psi)` on the same grid as `psi`.
    pub fn evaluate(&self, psi: &SpaceTimeFunction, tg: &TimeGrid) -> SpaceTimeFunction {
        assert_eq!(psi.n_steps(), tg.n_steps(), "time grid mismatch");
        match self {
            ObstacleMap::Constant { psi0 } => {
                assert_eq!(psi0.len(), psi.m(), "obstacle profile length mismatch");
                SpaceTimeFunction::new(
                    vec![psi0.clone(); psi.n_steps() + 1],
                    InterpolationKind::RotheLinear,
                )
            }
            ObstacleMap::Superposition { map } => psi
                .map_frames(|f| f.map(|v| map.eval(v)))
                .with_kind(InterpolationKind::RotheLinear),
            ObstacleMap::InverseParabolic { op_b, source, w0 } => {
                let sources = cell_averaged(psi, |v| source.g.eval(v));
                let frames = backward_euler_linear(op_b, &sources, w0, tg.h());
                SpaceTimeFunction::new(frames, InterpolationKind::RotheLinear)
            }
        }
    }

    /// Directional derivative `Phi'(u)(h)` on the same grid.
    pub fn derivative_apply(
        &self,
        u: &SpaceTimeFunction,
        h: &SpaceTimeFunction,
        tg: &TimeGrid,
    ) -> SpaceTimeFunction {
        assert_eq!(u.n_steps(), h.n_steps(), "grids of u and h differ");
        match self {
            ObstacleMap::Constant { .. } => {
                SpaceTimeFunction::zeros(u.m(), u.n_steps(), InterpolationKind::RotheLinear)
            }
            ObstacleMap::Superposition { map } => u
                .zip_frames(h, |uf, hf| uf.zip(hf, |uv, hv| map.deriv(uv) * hv))
                .with_kind(InterpolationKind::RotheLinear),
            ObstacleMap::InverseParabolic { op_b, source, .. } => {
                // eta' + B eta = g'(u) h, eta(0) = 0.
                let gh = u.zip_frames(h, |uf, hf| uf.zip(hf, |uv, hv| source.g.deriv(uv) * hv));
                let sources = cell_averaged(&gh.with_kind(u.kind()), |v| v);
                let zero = GridFunction::zeros(u.m());
                let frames = backward_euler_linear(op_b, &sources, &zero, tg.h());
                SpaceTimeFunction::new(frames, InterpolationKind::RotheLinear)
            }
        }
    }

    /// Frozen-time evaluation `v -> Phi(v~)(t_frame)` where `v~` is the
    /// constant-in-time extension of `v`; this is the per-step obstacle of
    /// the time discretisation.
    pub fn evaluate_frozen(
        &self,
        v: &GridFunction,
        frame: usize,
        tg: &TimeGrid,
    ) -> GridFunction {
        match self {
            ObstacleMap::Constant { psi0 } => psi0.clone(),
            ObstacleMap::Superposition { map } => v.map(|x| map.eval(x)),
            ObstacleMap::InverseParabolic { op_b, source, w0 } => {
                // Constant source g(v); only the first `frame` steps matter.
                let src = v.map(|x| source.g.eval(x));
                let sources = vec![src; frame];
                let frames = backward_euler_linear(op_b, &sources, w0, tg.h());
                frames[frame].clone()
            }
        }
    }
}

/// Cell averages of `f(psi(t))` per `psi`'s interpolation kind: right/left
/// constants take their single frame; the Rothe kind gets the trapezoid of
/// the frame values.
fn cell_averaged(psi: &SpaceTimeFunction, f: impl Fn(f64) -> f64) -> Vec<GridFunction> {
    let n = psi.n_steps();
    let mut out = Vec::with_capacity(n);
    for cell in 1..=n {
        let g = match psi.kind() {
            InterpolationKind::PiecewiseConstantRight => psi.frame(cell).map(&f),
            InterpolationKind::PiecewiseConstantLeft => psi.frame(cell - 1).map(&f),
            InterpolationKind::RotheLinear => {
                let a = psi.frame(cell - 1).map(&f);
                let b = psi.frame(cell).map(&f);
                a.add(&b).scale(0.5)
            }
        };
        out.push(g);
    }
    out
}
