//! Grids, discrete function spaces, interpolants and source averaging.
//!
//! Space is the interval `(0, omega)` with `m` interior nodes and implicit
//! homogeneous Dirichlet values at both ends; time is `[0, T]` with `N`
//! uniform steps. A [`SpaceTimeFunction`] stores one frame per time node
//! together with the interpolation rule that turns the frames into a
//! function of time.

use crate::error::SolverError;

/// Spatial interval `(0, omega)` with `m` interior nodes `x_i = i*dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceGrid {
    omega: f64,
    m: usize,
}

impl SpaceGrid {
    pub fn new(omega: f64, m: usize) -> Result<Self, SolverError> {
        if !(omega > 0.0) {
            return Err(SolverError::InvalidParameter(format!(
                "interval length must be positive, got {omega}"
            )));
        }
        if m < 1 {
            return Err(SolverError::InvalidParameter(
                "need at least one interior node".into(),
            ));
        }
        Ok(SpaceGrid { omega, m })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dx(&self) -> f64 {
        self.omega / (self.m as f64 + 1.0)
    }

    /// Interior node coordinate, `i` in `0..m` maps to `x = (i+1)*dx`.
    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.dx()
    }

    /// Sample a scalar field at the interior nodes.
    pub fn sample(&self, mut f: impl FnMut(f64) -> f64) -> GridFunction {
        GridFunction::new((0..self.m).map(|i| f(self.node(i))).collect())
    }
}

/// Time interval `[0, T]` split into `N` uniform steps `t_n = n*h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self, SolverError> {
        if !(horizon > 0.0) {
            return Err(SolverError::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if n_steps < 1 {
            return Err(SolverError::InvalidParameter(
                "need at least one time step".into(),
            ));
        }
        Ok(TimeGrid { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn h(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn node(&self, n: usize) -> f64 {
        n as f64 * self.h()
    }

    /// Midpoint of cell `n` (cells are numbered `1..=N`).
    pub fn midpoint(&self, n: usize) -> f64 {
        (n as f64 - 0.5) * self.h()
    }
}

/// Values of a spatial field at the interior nodes; comparison is
/// componentwise throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Self {
        GridFunction { values }
    }

    pub fn zeros(m: usize) -> Self {
        GridFunction {
            values: vec![0.0; m],
        }
    }

    pub fn constant(m: usize, value: f64) -> Self {
        GridFunction {
            values: vec![value; m],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> GridFunction {
        GridFunction::new(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip(&self, other: &GridFunction, mut f: impl FnMut(f64, f64) -> f64) -> GridFunction {
        assert_eq!(self.len(), other.len(), "grid functions of unequal length");
        GridFunction::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> GridFunction {
        self.map(|v| s * v)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &GridFunction) -> GridFunction {
        self.zip(other, |a, b| a + s * b)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.sub(other).sup_norm()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |acc, &v| acc.min(v))
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .fold(f64::NEG_INFINITY, |acc, &v| acc.max(v))
    }

    /// Largest violation of `self <= other`, i.e. `max_i (self_i - other_i)`
    /// (negative when the inequality holds strictly).
    pub fn max_excess_over(&self, other: &GridFunction) -> f64 {
        self.sub(other).max()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for GridFunction {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl std::ops::IndexMut<usize> for GridFunction {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

/// Rule turning the stored frames into a function of time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpolationKind {
    /// `u(t) = u_n` on `[t_{n-1}, t_n)`.
    PiecewiseConstantRight,
    /// `u(t) = u_{n-1}` on `[t_{n-1}, t_n)`.
    PiecewiseConstantLeft,
    /// Continuous piecewise linear (Rothe's function).
    RotheLinear,
}

/// A field on the tensor time x space grid: `N+1` frames, frame `n` holding
/// the values at `t_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeFunction {
    frames: Vec<GridFunction>,
    kind: InterpolationKind,
}

impl SpaceTimeFunction {
    pub fn new(frames: Vec<GridFunction>, kind: InterpolationKind) -> Self {
        assert!(!frames.is_empty(), "need at least one frame");
        let m = frames[0].len();
        assert!(
            frames.iter().all(|f| f.len() == m),
            "all frames must have equal length"
        );
        SpaceTimeFunction { frames, kind }
    }

    pub fn zeros(m: usize, n_steps: usize, kind: InterpolationKind) -> Self {
        SpaceTimeFunction::new(vec![GridFunction::zeros(m); n_steps + 1], kind)
    }

    pub fn constant(m: usize, n_steps: usize, value: f64, kind: InterpolationKind) -> Self {
        SpaceTimeFunction::new(vec![GridFunction::constant(m, value); n_steps + 1], kind)
    }

    /// Sample an analytic field `f(t, x)` at the grid nodes.
    pub fn sample(
        sg: &SpaceGrid,
        tg: &TimeGrid,
        kind: InterpolationKind,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Self {
        let frames = (0..=tg.n_steps())
            .map(|n| sg.sample(|x| f(tg.node(n), x)))
            .collect();
        SpaceTimeFunction::new(frames, kind)
    }

    pub fn kind(&self) -> InterpolationKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: InterpolationKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn n_steps(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn m(&self) -> usize {
        self.frames[0].len()
    }

    pub fn frame(&self, n: usize) -> &GridFunction {
        &self.frames[n]
    }

    pub fn frames(&self) -> &[GridFunction] {
        &self.frames
    }

    pub fn set_frame(&mut self, n: usize, frame: GridFunction) {
        assert_eq!(frame.len(), self.m());
        self.frames[n] = frame;
    }

    pub fn map_frames(&self, f: impl FnMut(&GridFunction) -> GridFunction) -> SpaceTimeFunction {
        SpaceTimeFunction::new(self.frames.iter().map(f).collect(), self.kind)
    }

    pub fn zip_frames(
        &self,
        other: &SpaceTimeFunction,
        mut f: impl FnMut(&GridFunction, &GridFunction) -> GridFunction,
    ) -> SpaceTimeFunction {
        assert_eq!(self.n_steps(), other.n_steps(), "frame count mismatch");
        let frames = self
            .frames
            .iter()
            .zip(&other.frames)
            .map(|(a, b)| f(a, b))
            .collect();
        SpaceTimeFunction::new(frames, self.kind)
    }

    pub fn add(&self, other: &SpaceTimeFunction) -> SpaceTimeFunction {
        self.zip_frames(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &SpaceTimeFunction) -> SpaceTimeFunction {
        self.zip_frames(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, s: f64) -> SpaceTimeFunction {
        self.map_frames(|f| f.scale(s))
    }

    /// `self + s * other` framewise.
    pub fn axpy(&self, s: f64, other: &SpaceTimeFunction) -> SpaceTimeFunction {
        self.zip_frames(other, |a, b| a.axpy(s, b))
    }

    /// Max over frames and nodes of `|.|`.
    pub fn sup_norm(&self) -> f64 {
        self.frames.iter().fold(0.0, |acc, f| acc.max(f.sup_norm()))
    }

    pub fn sup_distance(&self, other: &SpaceTimeFunction) -> f64 {
        assert_eq!(self.n_steps(), other.n_steps(), "frame count mismatch");
        self.frames
            .iter()
            .zip(&other.frames)
            .fold(0.0, |acc, (a, b)| acc.max(a.sup_distance(b)))
    }

    /// Componentwise `self <= other + tol` over all frames.
    pub fn le(&self, other: &SpaceTimeFunction, tol: f64) -> bool {
        self.frames
            .iter()
            .zip(&other.frames)
            .all(|(a, b)| a.max_excess_over(b) <= tol)
    }

    /// Largest violation of `self <= other` over all frames and nodes.
    pub fn max_excess_over(&self, other: &SpaceTimeFunction) -> f64 {
        self.frames
            .iter()
            .zip(&other.frames)
            .fold(f64::NEG_INFINITY, |acc, (a, b)| {
                acc.max(a.max_excess_over(b))
            })
    }

    /// Largest drop between consecutive frames; `<= tol` means the function
    /// is nondecreasing in time up to `tol`.
    pub fn max_decrease_in_time(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for n in 1..self.frames.len() {
            worst = worst.max(self.frames[n - 1].max_excess_over(&self.frames[n]));
        }
        worst
    }

    pub fn all_finite(&self) -> bool {
        self.frames.iter().all(|f| f.all_finite())
    }

    /// Evaluate the declared interpolant at time `t` (clamped to `[0, T]`).
    pub fn eval(&self, tg: &TimeGrid, t: f64) -> GridFunction {
        let n_steps = self.n_steps();
        assert_eq!(n_steps, tg.n_steps(), "time grid mismatch");
        let h = tg.h();
        if t <= 0.0 {
            return match self.kind {
                // Right-continuous constants start with frame 1 on [0, h).
                InterpolationKind::PiecewiseConstantRight => self.frames[1.min(n_steps)].clone(),
                _ => self.frames[0].clone(),
            };
        }
        if t >= tg.horizon() {
            return self.frames[n_steps].clone();
        }
        // Cell index n in 1..=N with t in [t_{n-1}, t_n).
        let n = ((t / h).floor() as usize + 1).min(n_steps);
        match self.kind {
            InterpolationKind::PiecewiseConstantRight => self.frames[n].clone(),
            InterpolationKind::PiecewiseConstantLeft => self.frames[n - 1].clone(),
            InterpolationKind::RotheLinear => {
                let theta = (t - tg.node(n - 1)) / h;
                self.frames[n - 1]
                    .scale(1.0 - theta)
                    .add(&self.frames[n].scale(theta))
            }
        }
    }
}

/// The three interpolants of a frame sequence: right- and left-continuous
/// piecewise constants plus Rothe's piecewise-linear function. They share
/// the frames and differ only in interpolation rule.
pub fn build_interpolants(
    frames: &[GridFunction],
    tg: &TimeGrid,
) -> Result<(SpaceTimeFunction, SpaceTimeFunction, SpaceTimeFunction), SolverError> {
    if frames.len() != tg.n_steps() + 1 {
        return Err(SolverError::ShapeMismatch(format!(
            "expected {} frames for N={}, got {}",
            tg.n_steps() + 1,
            tg.n_steps(),
            frames.len()
        )));
    }
    let right = SpaceTimeFunction::new(frames.to_vec(), InterpolationKind::PiecewiseConstantRight);
    let left = right.clone().with_kind(InterpolationKind::PiecewiseConstantLeft);
    let rothe = right.clone().with_kind(InterpolationKind::RotheLinear);
    Ok((right, left, rothe))
}

/// Cell averages of the source: `f_n = (1/h) * integral of f over
/// (t_{n-1}, t_n)`, integrating the declared interpolant exactly.
///
/// `f` may live on `tg` itself or on a uniform refinement of it; in the
/// latter case the fine-cell integrals are summed per coarse cell.
pub fn average_source(
    f: &SpaceTimeFunction,
    tg: &TimeGrid,
) -> Result<Vec<GridFunction>, SolverError> {
    let fine_steps = f.n_steps();
    let coarse_steps = tg.n_steps();
    if fine_steps % coarse_steps != 0 {
        return Err(SolverError::ShapeMismatch(format!(
            "source has {fine_steps} steps, not a refinement of the {coarse_steps}-step grid"
        )));
    }
    let ratio = fine_steps / coarse_steps;
    let m = f.m();
    let mut out = Vec::with_capacity(coarse_steps);
    for n in 1..=coarse_steps {
        let mut acc = GridFunction::zeros(m);
        for j in ((n - 1) * ratio + 1)..=(n * ratio) {
            // Integral over one fine cell divided by the fine step, i.e. the
            // fine-cell average by f's own interpolation rule.
            let cell = match f.kind() {
                InterpolationKind::PiecewiseConstantRight => f.frame(j).clone(),
                InterpolationKind::PiecewiseConstantLeft => f.frame(j - 1).clone(),
                InterpolationKind::RotheLinear => {
                    f.frame(j - 1).add(f.frame(j)).scale(0.5)
                }
            };
            acc = acc.add(&cell);
        }
        out.push(acc.scale(1.0 / ratio as f64));
    }
    Ok(out)
}
