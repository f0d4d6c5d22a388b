//! Green's-function series for the constant-coefficient heat operator
//! `d/dt - nu d^2/dx^2 + c` with Dirichlet boundary on `(0, L)`:
//!
//! `G(x, y, t) = (2/L) sum_k sin(k pi x / L) sin(k pi y / L) exp(-r_k t)`
//! with decay rates `r_k = nu (k pi / L)^2 + c`.
//!
//! Serves as an oracle for the inverse-parabolic obstacle map, independent
//! of the backward-Euler path: the convolution is evaluated by tensor
//! quadrature (trapezoid in space, midpoint in time) against the truncated
//! series.

use crate::error::SolverError;
use crate::grid::{GridFunction, InterpolationKind, SpaceGrid, SpaceTimeFunction, TimeGrid};

#[derive(Debug, Clone)]
pub struct GreenKernel {
    length: f64,
    nu: f64,
    reaction: f64,
    modes: usize,
}

impl GreenKernel {
    pub fn new(length: f64, nu: f64, reaction: f64, modes: usize) -> Result<Self, SolverError> {
        if !(length > 0.0) || !(nu > 0.0) || reaction < 0.0 {
            return Err(SolverError::InvalidParameter(
                "Green kernel needs positive length and diffusivity, nonnegative reaction".into(),
            ));
        }
        if modes < 1 {
            return Err(SolverError::InvalidParameter(
                "need at least one series mode".into(),
            ));
        }
        Ok(GreenKernel {
            length,
            nu,
            reaction,
            modes,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    fn rate(&self, k: usize) -> f64 {
        let w = k as f64 * std::f64::consts::PI / self.length;
        self.nu * w * w + self.reaction
    }

    /// Pointwise series evaluation. `t = 0` is a distributional identity
    /// and excluded.
    pub fn eval(&self, x: f64, y: f64, t: f64) -> Result<f64, SolverError> {
        if t <= 0.0 {
            return Err(SolverError::Domain(format!(
                "Green's function requires t > 0, got {t}"
            )));
        }
        let mut acc = 0.0;
        for k in 1..=self.modes {
            let w = k as f64 * std::f64::consts::PI / self.length;
            acc += (w * x).sin() * (w * y).sin() * (-self.rate(k) * t).exp();
        }
        Ok(2.0 / self.length * acc)
    }

    /// First omitted term of the series at the smallest time argument used,
    /// `(2/L) exp(-r_{K+1} t_min)`: the reported truncation scale.
    pub fn truncation_bound(&self, t_min: f64) -> f64 {
        2.0 / self.length * (-self.rate(self.modes + 1) * t_min).exp()
    }

    /// Duhamel convolution of a source with zero initial data:
    /// `w(t_n, x) = int_0^{t_n} int_0^L source(s, y) G(x, y, t_n - s) dy ds`,
    /// trapezoid in `y` (the boundary terms vanish with the kernel),
    /// midpoint in `s`. Frame 0 is zero.
    ///
    /// Mode-by-mode the time accumulation telescopes, so the cost stays
    /// linear in the number of frames.
    pub fn convolve(
        &self,
        sg: &SpaceGrid,
        tg: &TimeGrid,
        source: &SpaceTimeFunction,
    ) -> SpaceTimeFunction {
        assert!(
            (sg.omega() - self.length).abs() <= 1e-12 * self.length,
            "kernel length and grid interval differ"
        );
        let m = sg.m();
        let n_steps = tg.n_steps();
        assert_eq!(source.n_steps(), n_steps, "time grid mismatch");
        let h = tg.h();
        let dx = sg.dx();
        let k_modes = self.modes;

        // sin tables: sin(k pi x_i / L) for interior nodes.
        let mut sin_table = vec![vec![0.0; m]; k_modes];
        for (k, row) in sin_table.iter_mut().enumerate() {
            let w = (k + 1) as f64 * std::f64::consts::PI / self.length;
            for (i, v) in row.iter_mut().enumerate() {
                *v = (w * sg.node(i)).sin();
            }
        }

        // Midpoint values of the source per cell, by its interpolation kind.
        let midpoints: Vec<GridFunction> = (1..=n_steps)
            .map(|cell| match source.kind() {
                InterpolationKind::PiecewiseConstantRight => source.frame(cell).clone(),
                InterpolationKind::PiecewiseConstantLeft => source.frame(cell - 1).clone(),
                InterpolationKind::RotheLinear => {
                    source.frame(cell - 1).add(source.frame(cell)).scale(0.5)
                }
            })
            .collect();

        // Modal source coefficients: s_hat[cell][k] = dx sum_y src(y) sin_k(y).
        let mut s_hat = vec![vec![0.0; k_modes]; n_steps];
        for (cell, src) in midpoints.iter().enumerate() {
            for k in 0..k_modes {
                let mut acc = 0.0;
                for i in 0..m {
                    acc += src[i] * sin_table[k][i];
                }
                s_hat[cell][k] = dx * acc;
            }
        }

        // Accumulate A_k(n) = sum_{j<=n} h s_hat[j][k] exp(-r_k (t_n - s_mid_j))
        // via A_k(n) = exp(-r_k h) A_k(n-1) + h s_hat[n][k] exp(-r_k h/2).
        let mut frames = Vec::with_capacity(n_steps + 1);
        frames.push(GridFunction::zeros(m));
        let mut acc = vec![0.0; k_modes];
        for n in 1..=n_steps {
            for (k, a) in acc.iter_mut().enumerate() {
                let r = self.rate(k + 1);
                *a = (-r * h).exp() * *a + h * s_hat[n - 1][k] * (-r * h / 2.0).exp();
            }
            let mut frame = GridFunction::zeros(m);
            for k in 0..k_modes {
                let coef = 2.0 / self.length * acc[k];
                for i in 0..m {
                    frame[i] += coef * sin_table[k][i];
                }
            }
            frames.push(frame);
        }
        SpaceTimeFunction::new(frames, InterpolationKind::RotheLinear)
    }
}
