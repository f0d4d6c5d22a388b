//! Experiment configuration: a flat key-value text file with dotted
//! sections. Lines are `key = value`, `#` starts a comment. Analytic
//! profiles and scalar nonlinearities come from named catalogues with
//! numeric parameters; there is no expression evaluator.

use anyhow::{anyhow, bail, Context, Result};
use pqvi::lcp::LcpMethod;
use pqvi::obstacle::ScalarFn;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    SolveQviRothe,
    SolveQviIterate,
    SolveVi,
    TransformCheck,
    Derivative,
    TaylorCheck,
    Diagnostics,
    OracleCompare,
    RefineStudy,
}

impl FromStr for RunKind {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "solve-qvi-rothe" => RunKind::SolveQviRothe,
            "solve-qvi-iterate" => RunKind::SolveQviIterate,
            "solve-vi" => RunKind::SolveVi,
            "transform-check" => RunKind::TransformCheck,
            "derivative" => RunKind::Derivative,
            "taylor-check" => RunKind::TaylorCheck,
            "diagnostics" => RunKind::Diagnostics,
            "oracle-compare" => RunKind::OracleCompare,
            "refine-study" => RunKind::RefineStudy,
            other => bail!("unknown run kind `{other}`"),
        })
    }
}

impl fmt::Display for RunKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RunKind::SolveQviRothe => "solve-qvi-rothe",
            RunKind::SolveQviIterate => "solve-qvi-iterate",
            RunKind::SolveVi => "solve-vi",
            RunKind::TransformCheck => "transform-check",
            RunKind::Derivative => "derivative",
            RunKind::TaylorCheck => "taylor-check",
            RunKind::Diagnostics => "diagnostics",
            RunKind::OracleCompare => "oracle-compare",
            RunKind::RefineStudy => "refine-study",
        };
        f.write_str(s)
    }
}

/// Named analytic profile with numeric parameters, e.g. `sine 0.5 1` or
/// `ramp-bump 1.0 0.5`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    pub name: String,
    pub params: Vec<f64>,
}

impl FromStr for ProfileSpec {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        let name = parts
            .next()
            .ok_or_else(|| anyhow!("empty profile specification"))?
            .to_string();
        let params = parts
            .map(|p| p.parse::<f64>().with_context(|| format!("bad profile parameter `{p}`")))
            .collect::<Result<Vec<f64>>>()?;
        Ok(ProfileSpec { name, params })
    }
}

impl fmt::Display for ProfileSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        for p in &self.params {
            write!(f, " {p}")?;
        }
        Ok(())
    }
}

/// Obstacle map selection.
#[derive(Debug, Clone, PartialEq)]
pub enum ObstacleConfig {
    Constant {
        psi0: ProfileSpec,
    },
    Superposition {
        phi: ScalarFn,
    },
    InverseParabolic {
        nu_b: f64,
        reaction_b: f64,
        g: ScalarFn,
        sup_g_prime: Option<f64>,
        w0: ProfileSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: RunKind,
    pub omega: f64,
    pub m: usize,
    pub horizon: f64,
    pub n_steps: usize,
    pub nu: f64,
    pub reaction: f64,
    pub obstacle: ObstacleConfig,
    pub f: ProfileSpec,
    pub d: ProfileSpec,
    pub z0: ProfileSpec,
    pub direction: Direction,
    pub lcp_method: LcpMethod,
    pub tol_fp: f64,
    pub tol_outer: f64,
    pub tol_alpha: f64,
    pub s_values: Vec<f64>,
    pub p: f64,
    pub probes: usize,
    pub strict_complementarity: bool,
    pub refine_factors: Vec<usize>,
    pub refine_space: bool,
    pub oracle_m: usize,
    pub oracle_instances: usize,
    pub seed: u64,
    pub out_dir: String,
    /// The raw key-value pairs, embedded into every summary for provenance.
    pub raw: BTreeMap<String, String>,
}

impl ExperimentConfig {
    /// The effective configuration with all defaults applied, for
    /// provenance in summaries.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        let mut m = self.raw.clone();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("run.kind", self.kind.to_string());
        put("grid.omega", self.omega.to_string());
        put("grid.m", self.m.to_string());
        put("time.horizon", self.horizon.to_string());
        put("time.n_steps", self.n_steps.to_string());
        put("operator.nu", self.nu.to_string());
        put("operator.reaction", self.reaction.to_string());
        put("data.f", self.f.to_string());
        put("data.d", self.d.to_string());
        put("data.z0", self.z0.to_string());
        put(
            "run.direction",
            match self.direction {
                Direction::Increasing => "increasing".into(),
                Direction::Decreasing => "decreasing".into(),
            },
        );
        match self.lcp_method {
            LcpMethod::Pdas { max_iter } => {
                put("lcp.method", "pdas".into());
                put("lcp.max_iter", max_iter.to_string());
            }
            LcpMethod::Psor {
                tol,
                max_iter,
                relaxation,
            } => {
                put("lcp.method", "psor".into());
                put("lcp.tol", tol.to_string());
                put("lcp.max_iter", max_iter.to_string());
                put("lcp.relaxation", relaxation.to_string());
            }
        }
        put("tol.fixed_point", self.tol_fp.to_string());
        put("tol.outer", self.tol_outer.to_string());
        put("tol.alpha", self.tol_alpha.to_string());
        put(
            "s_values",
            self.s_values
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        );
        put("sensitivity.p", self.p.to_string());
        put("sensitivity.probes", self.probes.to_string());
        put(
            "sensitivity.strict_complementarity",
            self.strict_complementarity.to_string(),
        );
        put(
            "refine.factors",
            self.refine_factors
                .iter()
                .map(|f| f.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        );
        put("refine.refine_space", self.refine_space.to_string());
        put("oracle.m", self.oracle_m.to_string());
        put("oracle.instances", self.oracle_instances.to_string());
        put("seed", self.seed.to_string());
        put("output.dir", self.out_dir.clone());
        m
    }
}

fn parse_scalar_fn(spec: &str) -> Result<ScalarFn> {
    let p: ProfileSpec = spec.parse()?;
    let need = |n: usize| -> Result<()> {
        if p.params.len() != n {
            bail!("scalar map `{}` takes {n} parameters, got {}", p.name, p.params.len());
        }
        Ok(())
    };
    Ok(match p.name.as_str() {
        "constant" => {
            need(1)?;
            ScalarFn::Constant { value: p.params[0] }
        }
        "affine" => {
            need(2)?;
            ScalarFn::Affine {
                offset: p.params[0],
                slope: p.params[1],
            }
        }
        "tanh-step" => {
            need(1)?;
            ScalarFn::TanhStep { gamma: p.params[0] }
        }
        "clipped-linear" => {
            need(4)?;
            ScalarFn::ClippedLinear {
                slope: p.params[0],
                offset: p.params[1],
                lo: p.params[2],
                hi: p.params[3],
            }
        }
        other => bail!("unknown scalar map `{other}` (catalogue: constant, affine, tanh-step, clipped-linear)"),
    })
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut kv: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`, got `{raw}`", lineno + 1))?;
        kv.insert(key.trim().to_string(), value.trim().to_string());
    }
    config_from_pairs(kv)
}

fn config_from_pairs(kv: BTreeMap<String, String>) -> Result<ExperimentConfig> {
    let get = |key: &str| -> Option<&String> { kv.get(key) };
    let require = |key: &str| -> Result<&String> {
        get(key).ok_or_else(|| anyhow!("missing required key `{key}`"))
    };
    fn num<T: FromStr>(v: &str, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        v.parse::<T>()
            .map_err(|e| anyhow!("key `{key}`: cannot parse `{v}`: {e}"))
    }
    let get_f64 = |key: &str, default: f64| -> Result<f64> {
        match get(key) {
            Some(v) => num::<f64>(v, key),
            None => Ok(default),
        }
    };
    let get_usize = |key: &str, default: usize| -> Result<usize> {
        match get(key) {
            Some(v) => num::<usize>(v, key),
            None => Ok(default),
        }
    };
    let get_bool = |key: &str, default: bool| -> Result<bool> {
        match get(key) {
            Some(v) => match v.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                other => bail!("key `{key}`: expected true/false, got `{other}`"),
            },
            None => Ok(default),
        }
    };

    let kind: RunKind = require("run.kind")?.parse()?;

    let obstacle = match require("obstacle.kind")?.as_str() {
        "constant" => ObstacleConfig::Constant {
            psi0: require("obstacle.psi0")?.parse()?,
        },
        "superposition" => ObstacleConfig::Superposition {
            phi: parse_scalar_fn(require("obstacle.phi")?)?,
        },
        "inverse-parabolic" => ObstacleConfig::InverseParabolic {
            nu_b: get_f64("obstacle.nu_b", 1.0)?,
            reaction_b: get_f64("obstacle.reaction_b", 0.0)?,
            g: parse_scalar_fn(require("obstacle.g")?)?,
            sup_g_prime: match get("obstacle.sup_g_prime") {
                Some(v) => Some(num::<f64>(v, "obstacle.sup_g_prime")?),
                None => None,
            },
            w0: require("obstacle.w0")?.parse()?,
        },
        other => bail!("unknown obstacle kind `{other}`"),
    };

    let direction = match get("run.direction").map(|s| s.as_str()).unwrap_or("increasing") {
        "increasing" => Direction::Increasing,
        "decreasing" => Direction::Decreasing,
        other => bail!("unknown direction `{other}`"),
    };

    let lcp_method = match get("lcp.method").map(|s| s.as_str()).unwrap_or("pdas") {
        "pdas" => LcpMethod::Pdas {
            max_iter: get_usize("lcp.max_iter", 200)?,
        },
        "psor" => LcpMethod::Psor {
            tol: get_f64("lcp.tol", 1e-10)?,
            max_iter: get_usize("lcp.max_iter", 100_000)?,
            relaxation: get_f64("lcp.relaxation", 1.5)?,
        },
        other => bail!("unknown LCP method `{other}`"),
    };

    let s_values: Vec<f64> = match get("s_values") {
        Some(v) => v
            .split_whitespace()
            .map(|x| num::<f64>(x, "s_values"))
            .collect::<Result<_>>()?,
        None => vec![0.2, 0.1, 0.05, 0.025, 0.0125],
    };
    let refine_factors: Vec<usize> = match get("refine.factors") {
        Some(v) => v
            .split_whitespace()
            .map(|x| num::<usize>(x, "refine.factors"))
            .collect::<Result<_>>()?,
        None => vec![1, 2, 4],
    };

    let tol_fp = get_f64("tol.fixed_point", 1e-10)?;
    let tol_outer = get_f64("tol.outer", 1e-8)?;
    let tol_alpha = get_f64("tol.alpha", 1e-10)?;
    for (name, v) in [("tol.fixed_point", tol_fp), ("tol.outer", tol_outer), ("tol.alpha", tol_alpha)] {
        if v <= 0.0 {
            bail!("tolerance `{name}` must be positive, got {v}");
        }
    }

    let config = ExperimentConfig {
        kind,
        omega: get_f64("grid.omega", 1.0)?,
        m: get_usize("grid.m", 32)?,
        horizon: get_f64("time.horizon", 1.0)?,
        n_steps: get_usize("time.n_steps", 64)?,
        nu: get_f64("operator.nu", 1.0)?,
        reaction: get_f64("operator.reaction", 0.0)?,
        obstacle,
        f: require("data.f")?.parse()?,
        d: get("data.d").map(|s| s.parse()).transpose()?.unwrap_or(ProfileSpec {
            name: "zero".into(),
            params: vec![],
        }),
        z0: get("data.z0").map(|s| s.parse()).transpose()?.unwrap_or(ProfileSpec {
            name: "zero".into(),
            params: vec![],
        }),
        direction,
        lcp_method,
        tol_fp,
        tol_outer,
        tol_alpha,
        s_values,
        p: get_f64("sensitivity.p", 2.0)?,
        probes: get_usize("sensitivity.probes", 32)?,
        strict_complementarity: get_bool("sensitivity.strict_complementarity", false)?,
        refine_factors,
        refine_space: get_bool("refine.refine_space", false)?,
        oracle_m: get_usize("oracle.m", 8)?,
        oracle_instances: get_usize("oracle.instances", 200)?,
        seed: get_usize("seed", 42)? as u64,
        out_dir: get("output.dir").cloned().unwrap_or_else(|| "out".to_string()),
        raw: kv.clone(),
    };
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_minimal_config() {
        let text = "\
# comment
run.kind = solve-vi
obstacle.kind = constant
obstacle.psi0 = constant 1.0
data.f = sine 1.0 1
seed = 7
";
        let c = parse_config(text).unwrap();
        assert_eq!(c.kind, RunKind::SolveVi);
        assert_eq!(c.seed, 7);
        assert_eq!(c.m, 32);
        assert!(matches!(c.obstacle, ObstacleConfig::Constant { .. }));
    }

    #[test]
    fn rejects_bad_lines_and_unknown_kinds() {
        assert!(parse_config("run.kind solve-vi").is_err());
        assert!(parse_config("run.kind = warp-drive\nobstacle.kind = constant\nobstacle.psi0 = constant 1\ndata.f = zero").is_err());
        let missing = parse_config("run.kind = solve-vi");
        assert!(missing.is_err(), "obstacle and data are required");
    }

    #[test]
    fn scalar_catalogue_round_trip() {
        assert_eq!(
            parse_scalar_fn("tanh-step 0.25").unwrap(),
            ScalarFn::TanhStep { gamma: 0.25 }
        );
        assert_eq!(
            parse_scalar_fn("affine 0.5 0.7").unwrap(),
            ScalarFn::Affine {
                offset: 0.5,
                slope: 0.7
            }
        );
        assert!(parse_scalar_fn("tanh-step").is_err());
        assert!(parse_scalar_fn("sigmoid 1.0").is_err());
    }
}
