//! 3-point finite-difference elliptic operators and tridiagonal linear
//! algebra.
//!
//! The operator `A = -nu d^2/dx^2 + c` with homogeneous Dirichlet boundary
//! discretises to `tridiag(-nu/dx^2, 2nu/dx^2 + c, -nu/dx^2)` on the
//! interior nodes. Nonpositive off-diagonals make it an M-matrix, the
//! discrete carrier of T-monotonicity that every comparison principle in
//! this crate relies on.

use crate::error::SolverError;
use crate::grid::{GridFunction, SpaceGrid};

/// General tridiagonal matrix (rows may be asymmetric, e.g. after condensing
/// equality rows into identity rows).
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiag {
    lower: Vec<f64>, // length m-1, entry i couples row i+1 to column i
    diag: Vec<f64>,  // length m
    upper: Vec<f64>, // length m-1, entry i couples row i to column i+1
}

impl Tridiag {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len() + 1, diag.len());
        assert_eq!(upper.len() + 1, diag.len());
        Tridiag { lower, diag, upper }
    }

    pub fn symmetric(diag: Vec<f64>, off: Vec<f64>) -> Self {
        Tridiag::new(off.clone(), diag, off)
    }

    pub fn identity(m: usize) -> Self {
        Tridiag::new(vec![0.0; m.saturating_sub(1)], vec![1.0; m], vec![0.0; m.saturating_sub(1)])
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if j + 1 == i {
            self.lower[j]
        } else if i + 1 == j {
            self.upper[i]
        } else {
            0.0
        }
    }

    pub fn apply(&self, v: &GridFunction) -> GridFunction {
        let m = self.size();
        assert_eq!(v.len(), m);
        let x = v.values();
        let mut out = vec![0.0; m];
        for i in 0..m {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < m {
                s += self.upper[i] * x[i + 1];
            }
            out[i] = s;
        }
        GridFunction::new(out)
    }

    /// Thomas algorithm. No pivoting: intended for M-matrices and for
    /// systems mixing M-matrix rows with identity rows, where elimination
    /// keeps positive diagonals.
    pub fn solve(&self, rhs: &GridFunction) -> Result<GridFunction, SolverError> {
        let m = self.size();
        assert_eq!(rhs.len(), m);
        let mut c = vec![0.0; m]; // modified upper
        let mut d = rhs.values().to_vec();
        let mut denom = self.diag[0];
        if denom == 0.0 {
            return Err(SolverError::InternalInconsistency(
                "zero pivot in tridiagonal solve".into(),
            ));
        }
        if m > 1 {
            c[0] = self.upper[0] / denom;
        }
        d[0] /= denom;
        for i in 1..m {
            denom = self.diag[i] - self.lower[i - 1] * c[i - 1];
            if denom == 0.0 {
                return Err(SolverError::InternalInconsistency(
                    "zero pivot in tridiagonal solve".into(),
                ));
            }
            if i + 1 < m {
                c[i] = self.upper[i] / denom;
            }
            d[i] = (d[i] - self.lower[i - 1] * d[i - 1]) / denom;
        }
        for i in (0..m.saturating_sub(1)).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(GridFunction::new(d))
    }

    /// Max asymmetry `|a_ij - a_ji|`; zero for matrices built symmetric.
    pub fn max_asymmetry(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .fold(0.0, |acc, (l, u)| acc.max((l - u).abs()))
    }

    /// Nonpositive off-diagonals (with positive diagonal this is the
    /// M-matrix sign pattern).
    pub fn is_m_pattern(&self) -> bool {
        self.diag.iter().all(|&d| d > 0.0)
            && self.lower.iter().all(|&v| v <= 0.0)
            && self.upper.iter().all(|&v| v <= 0.0)
    }
}

/// Banded symmetric coercive T-monotone operator with its coercivity and
/// boundedness constants relative to the discrete V-norm.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    diag: Vec<f64>,
    off: Vec<f64>,
    coercivity: f64,
    boundedness: f64,
}

impl DiscreteOperator {
    pub fn m(&self) -> usize {
        self.diag.len()
    }

    /// Coercivity constant `C_a` with `<Av, v> >= C_a ||v||_V^2`.
    pub fn coercivity(&self) -> f64 {
        self.coercivity
    }

    /// Boundedness constant `C_b` with `<Au, v> <= C_b ||u||_V ||v||_V`.
    pub fn boundedness(&self) -> f64 {
        self.boundedness
    }

    pub fn matrix(&self) -> Tridiag {
        Tridiag::symmetric(self.diag.clone(), self.off.clone())
    }

    /// Nodewise application `(Av)_i`.
    pub fn apply(&self, v: &GridFunction) -> GridFunction {
        self.matrix().apply(v)
    }

    /// The stepped matrix `I + h A` of one backward-Euler step.
    pub fn stepped(&self, h: f64) -> Tridiag {
        let diag = self.diag.iter().map(|&d| 1.0 + h * d).collect();
        let off = self.off.iter().map(|&o| h * o).collect();
        Tridiag::symmetric(diag, off)
    }

    /// Bilinear form `a(u, v) = <Au, v>_H` (dx-weighted).
    pub fn form(&self, grid: &SpaceGrid, u: &GridFunction, v: &GridFunction) -> f64 {
        let au = self.apply(u);
        grid.dx()
            * au.values()
                .iter()
                .zip(v.values())
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }
}

/// Eigenvalues of the nodewise Dirichlet Laplacian `tridiag(-1,2,-1)/dx^2`
/// on `m` interior nodes of `(0, omega)`: `(4/dx^2) sin^2(k pi dx / (2 omega))`.
pub fn laplacian_eigenvalue(grid: &SpaceGrid, k: usize) -> f64 {
    let dx = grid.dx();
    let s = (k as f64 * std::f64::consts::PI * dx / (2.0 * grid.omega())).sin();
    4.0 / (dx * dx) * s * s
}

/// Assemble `A = -nu d^2/dx^2 + c` with implicit homogeneous Dirichlet
/// boundary.
///
/// The coercivity and boundedness constants come from the extreme
/// eigenvalues: both the form of `A` and the V-norm are diagonalised by the
/// Laplacian eigenvectors, so the generalized Rayleigh quotient is exactly
/// `(nu l_k + c) / (1 + l_k)`, monotone in `l_k`. Its extremes sit at
/// `k = 1` and `k = m`.
pub fn assemble_operator(
    grid: &SpaceGrid,
    diffusivity: f64,
    reaction: f64,
) -> Result<DiscreteOperator, SolverError> {
    if !(diffusivity > 0.0) {
        return Err(SolverError::InvalidParameter(format!(
            "diffusivity must be positive, got {diffusivity}"
        )));
    }
    if reaction < 0.0 {
        return Err(SolverError::InvalidParameter(format!(
            "reaction must be nonnegative, got {reaction}"
        )));
    }
    let m = grid.m();
    let dx = grid.dx();
    let diag = vec![2.0 * diffusivity / (dx * dx) + reaction; m];
    let off = vec![-diffusivity / (dx * dx); m.saturating_sub(1)];

    let quotient = |l: f64| (diffusivity * l + reaction) / (1.0 + l);
    let l_min = laplacian_eigenvalue(grid, 1);
    let l_max = laplacian_eigenvalue(grid, m);
    let (q1, q2) = (quotient(l_min), quotient(l_max));

    Ok(DiscreteOperator {
        diag,
        off,
        coercivity: q1.min(q2),
        boundedness: q1.max(q2),
    })
}
