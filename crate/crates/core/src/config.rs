//! Declarative TOML description of families and runs.
//!
//! ```toml
//! [[family.mixture.components]]
//! levy = "brownian"
//! weight = { bump = { regions = [[-inf, -6.0]], epsilon = 2.0 } }
//!
//! [[family.mixture.components]]
//! levy = { poisson = { direction = "down" } }
//! weight = { piecewise-linear = [[4.0, 0.0], [6.0, 1.0]] }
//!
//! [simulation]
//! x0 = 0.0
//! T = 20.0
//! h = 0.01
//! ```
//!
//! Unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::family::{
    make_drift_field, make_meixner_like, make_mixture, make_nig_like, make_separated_regions,
    make_stable_like, FellerFamily, Interval, NamedFn, Parametric, ScalarFn, Variant,
    WeightFunction,
};
use crate::levy::LevySpec;
use crate::presets;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub family: FamilyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default, rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyConfig {
    Preset(String),
    Mixture {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        components: Vec<ComponentConfig>,
    },
    Regions {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        epsilon: f64,
        regions: Vec<RegionConfig>,
    },
    StableLike {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        alpha: FnConfig,
    },
    NigLike {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        alpha: FnConfig,
        beta: FnConfig,
        delta: FnConfig,
        mu: FnConfig,
    },
    MeixnerLike {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        a: FnConfig,
        b: FnConfig,
        r: FnConfig,
        m: FnConfig,
    },
    DriftField {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        a: FnConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub levy: LevySpec,
    pub weight: FnConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub intervals: Vec<[f64; 2]>,
    pub levy: LevySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum FnConfig {
    Constant(f64),
    /// Breakpoints `[x, y]`, constant beyond the ends.
    PiecewiseLinear(Vec<[f64; 2]>),
    /// `min(1, dist(x, regions)/epsilon)`.
    Bump { regions: Vec<[f64; 2]>, epsilon: f64 },
    Preset(String),
}

fn intervals(raw: &[[f64; 2]]) -> Result<Vec<Interval>> {
    raw.iter().map(|[lo, hi]| Interval::new(*lo, *hi)).collect()
}

impl FnConfig {
    pub fn build(&self) -> Result<ScalarFn> {
        match self {
            FnConfig::Constant(value) => {
                if value.is_finite() {
                    Ok(ScalarFn::Constant(*value))
                } else {
                    Err(Error::Config(format!("constant must be finite, got {value}")))
                }
            }
            FnConfig::PiecewiseLinear(points) => {
                ScalarFn::piecewise_linear(points.iter().map(|[x, y]| (*x, *y)).collect())
            }
            FnConfig::Bump { regions, epsilon } => ScalarFn::distance_bump(intervals(regions)?, *epsilon),
            FnConfig::Preset(name) => NamedFn::from_name(name).map(ScalarFn::Named).ok_or_else(|| {
                let known: Vec<&str> = NamedFn::ALL.iter().map(|f| f.name()).collect();
                Error::Config(format!("unknown function preset '{name}', expected one of {}", known.join(", ")))
            }),
        }
    }

    pub fn describe(f: &ScalarFn) -> Self {
        match f {
            ScalarFn::Constant(value) => FnConfig::Constant(*value),
            ScalarFn::PiecewiseLinear(points) => {
                FnConfig::PiecewiseLinear(points.iter().map(|&(x, y)| [x, y]).collect())
            }
            ScalarFn::DistanceBump { region, epsilon } => FnConfig::Bump {
                regions: region.iter().map(|iv| [iv.lo, iv.hi]).collect(),
                epsilon: *epsilon,
            },
            ScalarFn::Named(named) => FnConfig::Preset(named.name().to_string()),
        }
    }
}

impl FamilyConfig {
    pub fn build(&self) -> Result<FellerFamily> {
        let with_id = |family: FellerFamily, id: &Option<String>| match id {
            Some(id) => family.with_id(id.clone()),
            None => family,
        };
        match self {
            FamilyConfig::Preset(name) => presets::preset(name).unwrap_or_else(|| {
                let known: Vec<&str> = presets::PRESETS.iter().map(|p| p.name).collect();
                Err(Error::Config(format!("unknown preset '{name}', expected one of {}", known.join(", "))))
            }),
            FamilyConfig::Mixture { id, components } => {
                let specs = components.iter().map(|c| c.levy).collect();
                let weights = components
                    .iter()
                    .map(|c| WeightFunction::new(c.weight.build()?))
                    .collect::<Result<Vec<_>>>()?;
                Ok(with_id(make_mixture(specs, weights)?, id))
            }
            FamilyConfig::Regions { id, epsilon, regions } => {
                let regions = regions
                    .iter()
                    .map(|r| Ok((intervals(&r.intervals)?, r.levy)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(with_id(make_separated_regions(regions, *epsilon)?, id))
            }
            FamilyConfig::StableLike { id, alpha } => Ok(with_id(make_stable_like(alpha.build()?)?, id)),
            FamilyConfig::NigLike {
                id,
                alpha,
                beta,
                delta,
                mu,
            } => Ok(with_id(
                make_nig_like(alpha.build()?, beta.build()?, delta.build()?, mu.build()?)?,
                id,
            )),
            FamilyConfig::MeixnerLike { id, a, b, r, m } => Ok(with_id(
                make_meixner_like(a.build()?, b.build()?, r.build()?, m.build()?)?,
                id,
            )),
            FamilyConfig::DriftField { id, a } => Ok(with_id(make_drift_field(a.build()?), id)),
        }
    }

    /// Fully expanded description of a family; building it again gives the
    /// same family.
    pub fn describe(family: &FellerFamily) -> Self {
        let id = Some(family.id().to_string());
        match family.variant() {
            Variant::Mixture { components, weights } => FamilyConfig::Mixture {
                id,
                components: components
                    .iter()
                    .zip(weights)
                    .map(|(levy, w)| ComponentConfig {
                        levy: *levy,
                        weight: FnConfig::describe(&w.func),
                    })
                    .collect(),
            },
            Variant::Parametric(p) => match p {
                Parametric::StableLike { alpha } => FamilyConfig::StableLike {
                    id,
                    alpha: FnConfig::describe(alpha),
                },
                Parametric::NigLike { alpha, beta, delta, mu } => FamilyConfig::NigLike {
                    id,
                    alpha: FnConfig::describe(alpha),
                    beta: FnConfig::describe(beta),
                    delta: FnConfig::describe(delta),
                    mu: FnConfig::describe(mu),
                },
                Parametric::MeixnerLike { a, b, r, m } => FamilyConfig::MeixnerLike {
                    id,
                    a: FnConfig::describe(a),
                    b: FnConfig::describe(b),
                    r: FnConfig::describe(r),
                    m: FnConfig::describe(m),
                },
                Parametric::DriftField { a } => FamilyConfig::DriftField {
                    id,
                    a: FnConfig::describe(a),
                },
            },
        }
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn preset(name: &str) -> Self {
        Self {
            family: FamilyConfig::Preset(name.to_string()),
            simulation: None,
        }
    }
}

/// Lower-case hex SHA-256 of a config text.
pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}
