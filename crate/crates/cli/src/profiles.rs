//! Catalogue of analytic data profiles.
//!
//! Spatial shapes (on `(0, omega)` with zero boundary):
//! - `zero`
//! - `constant c`
//! - `infinity` (unconstrained obstacle sentinel)
//! - `sine a k`: `a sin(k pi x / omega)`
//! - `bump a`: `a 16 s^2 (1-s)^2`, `s = x / omega`
//! - `hat a`: `a (1 - |2 s - 1|)`
//!
//! Space-time profiles add a time factor:
//! - any spatial shape (constant in time)
//! - `ramp a b`: `a (1 + b t)`, uniform in space
//! - `ramp-sine a k b`, `ramp-bump a b`, `linear-t a` (`a t` uniform)
//!
//! Sources are sampled at cell midpoints and stored as right-continuous
//! piecewise constants, so the per-step averages used by the solvers are
//! the midpoint values (second-order consistency without fine grids).

use anyhow::{bail, Result};
use pqvi::grid::{GridFunction, InterpolationKind, SpaceGrid, SpaceTimeFunction, TimeGrid};
use pqvi::obstacle::{NonlinearSource, ObstacleMap};
use pqvi::operator::assemble_operator;

use crate::config::{ObstacleConfig, ProfileSpec};

fn spatial_shape(spec: &ProfileSpec, omega: f64) -> Result<Box<dyn Fn(f64) -> f64>> {
    let p = spec.params.clone();
    let need = |n: usize| -> Result<()> {
        if p.len() != n {
            bail!("profile `{}` takes {n} parameters, got {}", spec.name, p.len());
        }
        Ok(())
    };
    Ok(match spec.name.as_str() {
        "zero" => {
            need(0)?;
            Box::new(|_| 0.0)
        }
        "constant" => {
            need(1)?;
            let c = p[0];
            Box::new(move |_| c)
        }
        "infinity" => {
            need(0)?;
            Box::new(|_| f64::INFINITY)
        }
        "sine" => {
            need(2)?;
            let (a, k) = (p[0], p[1]);
            Box::new(move |x| a * (k * std::f64::consts::PI * x / omega).sin())
        }
        "bump" => {
            need(1)?;
            let a = p[0];
            Box::new(move |x| {
                let s = x / omega;
                a * 16.0 * s * s * (1.0 - s) * (1.0 - s)
            })
        }
        "hat" => {
            need(1)?;
            let a = p[0];
            Box::new(move |x| a * (1.0 - (2.0 * x / omega - 1.0).abs()))
        }
        other => bail!("unknown spatial profile `{other}`"),
    })
}

/// Space-time field `(t, x) -> value`.
fn field(spec: &ProfileSpec, omega: f64) -> Result<Box<dyn Fn(f64, f64) -> f64>> {
    let p = spec.params.clone();
    Ok(match spec.name.as_str() {
        "ramp" => {
            if p.len() != 2 {
                bail!("profile `ramp` takes 2 parameters");
            }
            let (a, b) = (p[0], p[1]);
            Box::new(move |t, _| a * (1.0 + b * t))
        }
        "linear-t" => {
            if p.len() != 1 {
                bail!("profile `linear-t` takes 1 parameter");
            }
            let a = p[0];
            Box::new(move |t, _| a * t)
        }
        "ramp-sine" => {
            if p.len() != 3 {
                bail!("profile `ramp-sine` takes 3 parameters");
            }
            let (a, k, b) = (p[0], p[1], p[2]);
            Box::new(move |t, x| {
                a * (1.0 + b * t) * (k * std::f64::consts::PI * x / omega).sin()
            })
        }
        "ramp-bump" => {
            if p.len() != 2 {
                bail!("profile `ramp-bump` takes 2 parameters");
            }
            let (a, b) = (p[0], p[1]);
            Box::new(move |t, x| {
                let s = x / omega;
                a * (1.0 + b * t) * 16.0 * s * s * (1.0 - s) * (1.0 - s)
            })
        }
        _ => {
            let shape = spatial_shape(spec, omega)?;
            Box::new(move |_, x| shape(x))
        }
    })
}

/// Spatial profile at the interior nodes.
pub fn grid_function(spec: &ProfileSpec, sg: &SpaceGrid) -> Result<GridFunction> {
    let shape = spatial_shape(spec, sg.omega())?;
    Ok(sg.sample(|x| shape(x)))
}

/// Space-time profile sampled at cell midpoints, stored piecewise-constant
/// right so per-step averaging reproduces the midpoint values exactly.
/// Frame 0 holds the value at `t = 0`.
pub fn space_time_source(
    spec: &ProfileSpec,
    sg: &SpaceGrid,
    tg: &TimeGrid,
) -> Result<SpaceTimeFunction> {
    let f = field(spec, sg.omega())?;
    let mut frames = Vec::with_capacity(tg.n_steps() + 1);
    frames.push(sg.sample(|x| f(0.0, x)));
    for n in 1..=tg.n_steps() {
        let t = tg.midpoint(n);
        frames.push(sg.sample(|x| f(t, x)));
    }
    Ok(SpaceTimeFunction::new(
        frames,
        InterpolationKind::PiecewiseConstantRight,
    ))
}

/// Build the obstacle map from its configuration.
pub fn obstacle_map(cfg: &ObstacleConfig, sg: &SpaceGrid) -> Result<ObstacleMap> {
    Ok(match cfg {
        ObstacleConfig::Constant { psi0 } => ObstacleMap::Constant {
            psi0: grid_function(psi0, sg)?,
        },
        ObstacleConfig::Superposition { phi } => ObstacleMap::Superposition { map: *phi },
        ObstacleConfig::InverseParabolic {
            nu_b,
            reaction_b,
            g,
            sup_g_prime,
            w0,
        } => {
            let op_b = assemble_operator(sg, *nu_b, *reaction_b)
                .map_err(|e| anyhow::anyhow!("B operator: {e}"))?;
            let source = match sup_g_prime {
                Some(bound) => NonlinearSource::with_declared_bound(*g, *bound),
                None => NonlinearSource::new(*g),
            };
            source
                .spot_check(-10.0, 10.0, 400)
                .map_err(|e| anyhow::anyhow!("nonlinearity failed its spot check: {e}"))?;
            ObstacleMap::InverseParabolic {
                op_b,
                source,
                w0: grid_function(w0, sg)?,
            }
        }
    })
}
