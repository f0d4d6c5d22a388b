//! Discrete Bochner norms.
//!
//! The pivot norm `H` is the dx-weighted l2 norm; the `V` norm adds the
//! forward-difference H1 seminorm including the two boundary half-cells, so
//! the coercivity constants of [`crate::operator`] are grid-consistent.
//! Time integration follows each function's declared interpolation kind,
//! which makes the interpolant identities of the time-discretisation layer
//! hold exactly rather than approximately.

use crate::grid::{GridFunction, InterpolationKind, SpaceGrid, SpaceTimeFunction, TimeGrid};
use crate::operator::Tridiag;

/// dx-weighted inner product `(u, v)_H`.
pub fn h_inner(grid: &SpaceGrid, u: &GridFunction, v: &GridFunction) -> f64 {
    grid.dx()
        * u.values()
            .iter()
            .zip(v.values())
            .map(|(a, b)| a * b)
            .sum::<f64>()
}

pub fn h_norm(grid: &SpaceGrid, v: &GridFunction) -> f64 {
    h_inner(grid, v, v).sqrt()
}

/// Forward-difference H1 seminorm squared, boundary values implicit zeros:
/// `sum_{i=0}^{m} (v_{i+1} - v_i)^2 / dx`.
pub fn v_seminorm_sq(grid: &SpaceGrid, v: &GridFunction) -> f64 {
    let dx = grid.dx();
    let vals = v.values();
    let m = vals.len();
    let mut acc = vals[0] * vals[0] + vals[m - 1] * vals[m - 1];
    for i in 1..m {
        let d = vals[i] - vals[i - 1];
        acc += d * d;
    }
    acc / dx
}

pub fn v_inner(grid: &SpaceGrid, u: &GridFunction, v: &GridFunction) -> f64 {
    // Polarisation of the seminorm plus the H part.
    let dx = grid.dx();
    let (a, b) = (u.values(), v.values());
    let m = a.len();
    let mut semi = a[0] * b[0] + a[m - 1] * b[m - 1];
    for i in 1..m {
        semi += (a[i] - a[i - 1]) * (b[i] - b[i - 1]);
    }
    h_inner(grid, u, v) + semi / dx
}

pub fn v_norm(grid: &SpaceGrid, v: &GridFunction) -> f64 {
    (h_inner(grid, v, v) + v_seminorm_sq(grid, v)).sqrt()
}

/// Riesz matrix of the V inner product: `(u, v)_V = dx * u^T R v` with
/// `R = I + tridiag(-1, 2, -1)/dx^2`.
fn riesz_matrix(grid: &SpaceGrid) -> Tridiag {
    let m = grid.m();
    let dx2 = grid.dx() * grid.dx();
    Tridiag::symmetric(vec![1.0 + 2.0 / dx2; m], vec![-1.0 / dx2; m.saturating_sub(1)])
}

/// Dual norm `||phi||_{V*} = sup (phi, v)_H / ||v||_V = sqrt(dx phi^T R^{-1} phi)`.
pub fn dual_norm(grid: &SpaceGrid, phi: &GridFunction) -> f64 {
    let r = riesz_matrix(grid);
    let sol = r.solve(phi).expect("Riesz matrix is SPD");
    h_inner(grid, phi, &sol).max(0.0).sqrt()
}

/// Which Bochner norm to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L2H,
    L2V,
    LinfH,
    /// `L^p(0,T;H)` with `p` in `[1, infinity)`.
    LpH(f64),
}

/// Bochner norm of a space-time function; quadrature in time follows the
/// declared interpolation kind. For the piecewise-constant kinds all
/// integrals are exact; for the Rothe kind, `L2` integrals are exact and
/// `LpH` uses per-cell Simpson.
pub fn space_time_norm(
    u: &SpaceTimeFunction,
    kind: NormKind,
    sg: &SpaceGrid,
    tg: &TimeGrid,
) -> f64 {
    assert_eq!(u.n_steps(), tg.n_steps(), "time grid mismatch");
    match kind {
        NormKind::L2H => quadratic_time_integral(u, tg, |a, b| h_inner(sg, a, b)).sqrt(),
        NormKind::L2V => quadratic_time_integral(u, tg, |a, b| v_inner(sg, a, b)).sqrt(),
        NormKind::LinfH => {
            let frames = visible_frames(u);
            frames
                .iter()
                .map(|f| h_norm(sg, f))
                .fold(0.0, f64::max)
        }
        NormKind::LpH(p) => {
            assert!(p >= 1.0, "LpH needs p >= 1");
            lp_time_integral(u, sg, tg, p).powf(1.0 / p)
        }
    }
}

/// Frames the interpolant actually attains on `(0, T)`.
fn visible_frames(u: &SpaceTimeFunction) -> Vec<&GridFunction> {
    let n = u.n_steps();
    match u.kind() {
        InterpolationKind::PiecewiseConstantRight => (1..=n).map(|i| u.frame(i)).collect(),
        InterpolationKind::PiecewiseConstantLeft => (0..n).map(|i| u.frame(i)).collect(),
        InterpolationKind::RotheLinear => (0..=n).map(|i| u.frame(i)).collect(),
    }
}

/// `integral_0^T q(u(t), u(t)) dt` for a symmetric bilinear `q`, exact for
/// all three interpolation kinds.
fn quadratic_time_integral(
    u: &SpaceTimeFunction,
    tg: &TimeGrid,
    q: impl Fn(&GridFunction, &GridFunction) -> f64,
) -> f64 {
    let h = tg.h();
    let n = u.n_steps();
    let mut acc = 0.0;
    for cell in 1..=n {
        acc += match u.kind() {
            InterpolationKind::PiecewiseConstantRight => {
                let f = u.frame(cell);
                q(f, f)
            }
            InterpolationKind::PiecewiseConstantLeft => {
                let f = u.frame(cell - 1);
                q(f, f)
            }
            InterpolationKind::RotheLinear => {
                let (a, b) = (u.frame(cell - 1), u.frame(cell));
                (q(a, a) + q(a, b) + q(b, b)) / 3.0
            }
        };
    }
    acc * h
}

fn lp_time_integral(u: &SpaceTimeFunction, sg: &SpaceGrid, tg: &TimeGrid, p: f64) -> f64 {
    let h = tg.h();
    let n = u.n_steps();
    let mut acc = 0.0;
    for cell in 1..=n {
        acc += match u.kind() {
            InterpolationKind::PiecewiseConstantRight => h_norm(sg, u.frame(cell)).powf(p),
            InterpolationKind::PiecewiseConstantLeft => h_norm(sg, u.frame(cell - 1)).powf(p),
            InterpolationKind::RotheLinear => {
                // Simpson on ||u(t)||_H^p over the cell.
                let (a, b) = (u.frame(cell - 1), u.frame(cell));
                let mid = a.add(b).scale(0.5);
                (h_norm(sg, a).powf(p) + 4.0 * h_norm(sg, &mid).powf(p) + h_norm(sg, b).powf(p))
                    / 6.0
            }
        };
    }
    acc * h
}

/// Exact `L^2(0,T;H)` distance between two interpolants that may live on
/// different uniform time grids over the same horizon. Both interpolants
/// are affine on every cell of the merged partition, so each merged cell is
/// integrated exactly.
pub fn l2h_distance(
    u: &SpaceTimeFunction,
    tg_u: &TimeGrid,
    v: &SpaceTimeFunction,
    tg_v: &TimeGrid,
    sg: &SpaceGrid,
) -> f64 {
    assert!(
        (tg_u.horizon() - tg_v.horizon()).abs() < 1e-12 * tg_u.horizon(),
        "horizons differ"
    );
    let mut nodes: Vec<f64> = (0..=tg_u.n_steps()).map(|n| tg_u.node(n)).collect();
    nodes.extend((0..=tg_v.n_steps()).map(|n| tg_v.node(n)));
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * tg_u.horizon().max(1.0));

    let mut acc = 0.0;
    for w in nodes.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        if s1 - s0 <= 0.0 {
            continue;
        }
        let d0 = cell_value(u, tg_u, s0, s1).0.sub(&cell_value(v, tg_v, s0, s1).0);
        let d1 = cell_value(u, tg_u, s0, s1).1.sub(&cell_value(v, tg_v, s0, s1).1);
        let (qa, qab, qb) = (
            h_inner(sg, &d0, &d0),
            h_inner(sg, &d0, &d1),
            h_inner(sg, &d1, &d1),
        );
        acc += (s1 - s0) * (qa + qab + qb) / 3.0;
    }
    acc.max(0.0).sqrt()
}

/// Values of the interpolant at the two endpoints of a subinterval that does
/// not straddle any node of `tg`.
fn cell_value(
    u: &SpaceTimeFunction,
    tg: &TimeGrid,
    s0: f64,
    s1: f64,
) -> (GridFunction, GridFunction) {
    let h = tg.h();
    let mid = 0.5 * (s0 + s1);
    let n = ((mid / h).floor() as usize + 1).min(tg.n_steps()); // cell (t_{n-1}, t_n)
    match u.kind() {
        InterpolationKind::PiecewiseConstantRight => (u.frame(n).clone(), u.frame(n).clone()),
        InterpolationKind::PiecewiseConstantLeft => {
            (u.frame(n - 1).clone(), u.frame(n - 1).clone())
        }
        InterpolationKind::RotheLinear => {
            let lerp = |t: f64| {
                let theta = ((t - tg.node(n - 1)) / h).clamp(0.0, 1.0);
                u.frame(n - 1)
                    .scale(1.0 - theta)
                    .add(&u.frame(n).scale(theta))
            };
            (lerp(s0), lerp(s1))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_interpolants;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_function_has_zero_norms() {
        let sg = SpaceGrid::new(1.0, 5).unwrap();
        let tg = TimeGrid::new(1.0, 4).unwrap();
        let u = SpaceTimeFunction::zeros(5, 4, InterpolationKind::RotheLinear);
        for kind in [
            NormKind::L2H,
            NormKind::L2V,
            NormKind::LinfH,
            NormKind::LpH(1.0),
            NormKind::LpH(3.0),
        ] {
            assert_eq!(space_time_norm(&u, kind, &sg, &tg), 0.0);
        }
    }

    #[test]
    fn unit_function_l2h_approaches_one() {
        // u = 1 on (0,1)x(0,1): ||u||_{L2H}^2 = m/(m+1) -> 1 within O(dx).
        let tg = TimeGrid::new(1.0, 3).unwrap();
        for m in [10, 100, 1000] {
            let sg = SpaceGrid::new(1.0, m).unwrap();
            let u = SpaceTimeFunction::constant(m, 3, 1.0, InterpolationKind::PiecewiseConstantRight);
            let n = space_time_norm(&u, NormKind::L2H, &sg, &tg);
            assert!((n - 1.0).abs() < 1.0 / m as f64, "m={m}: {n}");
        }
    }

    #[test]
    fn hat_function_v_norm_matches_analytic_seminorm() {
        // The forward-difference seminorm of a nodal hat equals the exact H1
        // seminorm of its piecewise-linear interpolant, 2/dx.
        let sg = SpaceGrid::new(1.0, 9).unwrap();
        let tg = TimeGrid::new(2.0, 4).unwrap();
        let mut hat = GridFunction::zeros(9);
        hat[4] = 1.0;
        let dx = sg.dx();
        let analytic_semi = 2.0 / dx;
        assert!((v_seminorm_sq(&sg, &hat) - analytic_semi).abs() < 1e-10);
        let u = SpaceTimeFunction::new(vec![hat.clone(); 5], InterpolationKind::PiecewiseConstantRight);
        let expect = (tg.horizon() * (dx + analytic_semi)).sqrt();
        let got = space_time_norm(&u, NormKind::L2V, &sg, &tg);
        assert!((got - expect).abs() < 1e-10, "got {got} expect {expect}");
    }

    #[test]
    fn interpolant_gap_identity() {
        // ||z_right - z_left||^2_{L2H} = h sum ||z_n - z_{n-1}||^2_H exactly.
        let sg = SpaceGrid::new(1.0, 6).unwrap();
        let tg = TimeGrid::new(1.5, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frames: Vec<GridFunction> = (0..=8)
            .map(|_| GridFunction::new((0..6).map(|_| rng.gen_range(-2.0..2.0)).collect()))
            .collect();
        let (right, left, _) = build_interpolants(&frames, &tg).unwrap();
        let gap = l2h_distance(&right, &tg, &left, &tg, &sg);
        let mut sum = 0.0;
        for n in 1..=8 {
            let d = frames[n].sub(&frames[n - 1]);
            sum += tg.h() * h_inner(&sg, &d, &d);
        }
        assert!((gap * gap - sum).abs() < 1e-12 * (1.0 + sum));
    }

    #[test]
    fn source_average_energy_bound() {
        // Discrete form of the source-averaging energy inequality:
        // sum h ||f_n||_H^2 <= ||f||^2_{L2(0,T;H)} for the declared interpolant.
        let sg = SpaceGrid::new(1.0, 5).unwrap();
        let tg = TimeGrid::new(1.0, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [
            InterpolationKind::PiecewiseConstantRight,
            InterpolationKind::PiecewiseConstantLeft,
            InterpolationKind::RotheLinear,
        ] {
            let frames: Vec<GridFunction> = (0..=8)
                .map(|_| GridFunction::new((0..5).map(|_| rng.gen_range(-3.0..3.0)).collect()))
                .collect();
            let f = SpaceTimeFunction::new(frames, kind);
            let avg = crate::grid::average_source(&f, &tg).unwrap();
            let lhs: f64 = avg.iter().map(|a| tg.h() * h_inner(&sg, a, a)).sum();
            let rhs = space_time_norm(&f, NormKind::L2H, &sg, &tg).powi(2);
            assert!(lhs <= rhs + 1e-10, "kind {kind:?}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn dual_norm_is_dual_to_v_norm() {
        let sg = SpaceGrid::new(1.0, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let phi = GridFunction::new((0..7).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let v = GridFunction::new((0..7).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let pairing = h_inner(&sg, &phi, &v);
            assert!(pairing <= dual_norm(&sg, &phi) * v_norm(&sg, &v) + 1e-12);
        }
    }

    #[test]
    fn l2h_distance_across_refined_grids() {
        // A function equals its own restriction: distance 0; and a known
        // linear-in-time difference integrates exactly.
        let sg = SpaceGrid::new(1.0, 4).unwrap();
        let coarse = TimeGrid::new(1.0, 4).unwrap();
        let fine = TimeGrid::new(1.0, 8).unwrap();
        let uc = SpaceTimeFunction::sample(&sg, &coarse, InterpolationKind::RotheLinear, |t, _| t);
        let uf = SpaceTimeFunction::sample(&sg, &fine, InterpolationKind::RotheLinear, |t, _| t);
        assert!(l2h_distance(&uc, &coarse, &uf, &fine, &sg) < 1e-13);
    }
}
