//! Problem-definition files: a flat, strictly validated `key = value`
//! format. Unknown keys, duplicate keys, keys that do not apply to the
//! selected prior family or likelihood kind, and malformed values are all
//! hard errors — silent typos corrupt scientific comparisons, so the schema
//! refuses rather than guesses.
//!
//! `#` starts a comment line; blank lines are ignored.

use std::collections::HashMap;

use thiserror::Error;

use crate::bayes::{scalar_gaussian_likelihood, BayesianProblem, Likelihood};
use crate::measures::{self, discretize, Gaussian1D, Grid1D, GridMeasure};

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: expected 'key = value', got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key '{key}'")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key '{0}'")]
    MissingKey(&'static str),
    #[error("key '{key}': bad value '{got}' ({why})")]
    BadValue {
        key: String,
        got: String,
        why: String,
    },
    #[error("key '{key}' does not apply here: {why}")]
    Conflict { key: String, why: String },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Every key the schema accepts, in documentation order. The parser
/// validates against this list and the CLI help enumerates it, so the two
/// cannot drift apart.
pub const CONFIG_KEYS: [(&str, &str); 19] = [
    ("prior.family", "uniform | gaussian"),
    ("prior.mean", "gaussian prior mean (real)"),
    ("prior.stddev", "gaussian prior standard deviation (> 0)"),
    ("prior.lower", "uniform prior lower bound (real)"),
    ("prior.upper", "uniform prior upper bound (> prior.lower)"),
    (
        "prior.cell_centered",
        "true | false — place quadrature nodes at cell centers (avoids endpoint singularities; default false)",
    ),
    ("grid.lower", "quadrature grid lower bound (real)"),
    ("grid.upper", "quadrature grid upper bound (> grid.lower)"),
    ("grid.n", "quadrature node count (integer >= 2; default 2001)"),
    (
        "likelihood.kind",
        "gaussian_noise | floor_gaussian | custom_named",
    ),
    (
        "likelihood.forward",
        "identity | cube_root_data | reciprocal | sigmoid(w) | heaviside (gaussian_noise only; default identity)",
    ),
    (
        "likelihood.noise_variance",
        "noise variance (> 0; required for gaussian_noise and floor_gaussian)",
    ),
    ("likelihood.name", "flat | window (custom_named only)"),
    (
        "likelihood.width",
        "indicator half-width (> 0; required for likelihood.name = window)",
    ),
    ("data_dim", "data dimension (must be 1; default 1)"),
    ("sweep.y_ref", "reference data value (real)"),
    ("sweep.y_min", "sweep lower data value (real)"),
    ("sweep.y_max", "sweep upper data value (> sweep.y_min)"),
    ("sweep.y_step", "sweep step (> 0)"),
];

fn known_key(key: &str) -> bool {
    CONFIG_KEYS.iter().any(|(k, _)| *k == key)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    Uniform { lower: f64, upper: f64 },
    Gaussian { mean: f64, stddev: f64 },
}

/// Forward response operator, possibly paired with a data-side transform
/// (the cube-root model compares G(θ) = θ with transformed data ∛y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForwardSpec {
    Identity,
    CubeRootData,
    Reciprocal,
    Sigmoid(f64),
    Heaviside,
}

impl ForwardSpec {
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        match s {
            "identity" => return Ok(ForwardSpec::Identity),
            "cube_root_data" => return Ok(ForwardSpec::CubeRootData),
            "reciprocal" => return Ok(ForwardSpec::Reciprocal),
            "heaviside" => return Ok(ForwardSpec::Heaviside),
            _ => {}
        }
        if let Some(inner) = s.strip_prefix("sigmoid(").and_then(|r| r.strip_suffix(')')) {
            let w: f64 = inner
                .trim()
                .parse()
                .map_err(|_| format!("sigmoid weight '{}' is not a number", inner.trim()))?;
            if !(w.is_finite() && w > 0.0) {
                return Err(format!("sigmoid weight must be positive and finite, got {w}"));
            }
            return Ok(ForwardSpec::Sigmoid(w));
        }
        Err(format!(
            "unknown forward map '{s}' (expected identity, cube_root_data, reciprocal, sigmoid(w), heaviside)"
        ))
    }

    /// G(θ).
    pub fn apply(&self, theta: f64) -> f64 {
        match self {
            ForwardSpec::Identity | ForwardSpec::CubeRootData => theta,
            ForwardSpec::Reciprocal => 1.0 / theta,
            ForwardSpec::Sigmoid(w) => 1.0 / (1.0 + (-w * (0.5 - theta)).exp()),
            ForwardSpec::Heaviside => {
                if theta <= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Transform applied to the raw data before the residual.
    pub fn data_transform(&self, y: f64) -> f64 {
        match self {
            ForwardSpec::CubeRootData => y.cbrt(),
            _ => y,
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            ForwardSpec::Identity => "identity".into(),
            ForwardSpec::CubeRootData => "cube_root_data".into(),
            ForwardSpec::Reciprocal => "reciprocal".into(),
            ForwardSpec::Sigmoid(w) => format!("sigmoid({w})"),
            ForwardSpec::Heaviside => "heaviside".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LikelihoodSpec {
    GaussianNoise {
        forward: ForwardSpec,
        noise_variance: f64,
    },
    /// Gaussian residual against ⌊y⌋ with identity forward map.
    FloorGaussian { noise_variance: f64 },
    /// Named non-Gaussian likelihoods for degenerate-case experiments.
    Flat,
    Window { width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepWindow {
    pub y_ref: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub y_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub prior: PriorSpec,
    pub grid_lower: f64,
    pub grid_upper: f64,
    pub grid_n: usize,
    pub cell_centered: bool,
    pub likelihood: LikelihoodSpec,
    pub data_dim: usize,
    pub sweep: SweepWindow,
}

struct KeyBag {
    entries: HashMap<String, (usize, String)>,
}

impl KeyBag {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Syntax {
                    line: i + 1,
                    text: line.to_string(),
                });
            };
            let key = k.trim().to_string();
            let value = v.trim().to_string();
            if !known_key(&key) {
                return Err(Error::UnknownKey { line: i + 1, key });
            }
            if entries.contains_key(&key) {
                return Err(Error::DuplicateKey { line: i + 1, key });
            }
            entries.insert(key, (i + 1, value));
        }
        Ok(KeyBag { entries })
    }

    fn take(&mut self, key: &'static str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    fn take_f64(&mut self, key: &'static str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::BadValue {
                    key: key.into(),
                    got: v,
                    why: "not a number".into(),
                }),
        }
    }

    fn require_f64(&mut self, key: &'static str) -> Result<f64> {
        self.take_f64(key)?.ok_or(Error::MissingKey(key))
    }

    fn take_usize(&mut self, key: &'static str) -> Result<Option<usize>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|_| Error::BadValue {
                    key: key.into(),
                    got: v,
                    why: "not a nonnegative integer".into(),
                }),
        }
    }

    fn take_bool(&mut self, key: &'static str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => match v.as_str() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                _ => Err(Error::BadValue {
                    key: key.into(),
                    got: v,
                    why: "expected true or false".into(),
                }),
            },
        }
    }

    fn reject_leftovers(&self, why: &str) -> Result<()> {
        if let Some(key) = self.entries.keys().min() {
            return Err(Error::Conflict {
                key: key.clone(),
                why: why.to_string(),
            });
        }
        Ok(())
    }
}

fn finite(key: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::BadValue {
            key: key.into(),
            got: format!("{v}"),
            why: "must be finite".into(),
        })
    }
}

fn positive(key: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::BadValue {
            key: key.into(),
            got: format!("{v}"),
            why: "must be positive and finite".into(),
        })
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut bag = KeyBag::parse(text)?;

        let family = bag.take("prior.family").ok_or(Error::MissingKey("prior.family"))?;
        let cell_centered = bag.take_bool("prior.cell_centered")?.unwrap_or(false);
        let prior = match family.as_str() {
            "uniform" => {
                let lower = finite("prior.lower", bag.require_f64("prior.lower")?)?;
                let upper = finite("prior.upper", bag.require_f64("prior.upper")?)?;
                if upper <= lower {
                    return Err(Error::BadValue {
                        key: "prior.upper".into(),
                        got: format!("{upper}"),
                        why: format!("must exceed prior.lower = {lower}"),
                    });
                }
                PriorSpec::Uniform { lower, upper }
            }
            "gaussian" => {
                let mean = finite("prior.mean", bag.require_f64("prior.mean")?)?;
                let stddev = positive("prior.stddev", bag.require_f64("prior.stddev")?)?;
                PriorSpec::Gaussian { mean, stddev }
            }
            other => {
                return Err(Error::BadValue {
                    key: "prior.family".into(),
                    got: other.into(),
                    why: "expected uniform or gaussian".into(),
                })
            }
        };
        // Keys of the other family must not linger.
        for k in ["prior.mean", "prior.stddev", "prior.lower", "prior.upper"] {
            if bag.entries.contains_key(k) {
                return Err(Error::Conflict {
                    key: k.into(),
                    why: format!("not valid for prior.family = {family}"),
                });
            }
        }

        let grid_lower = finite("grid.lower", bag.require_f64("grid.lower")?)?;
        let grid_upper = finite("grid.upper", bag.require_f64("grid.upper")?)?;
        if grid_upper <= grid_lower {
            return Err(Error::BadValue {
                key: "grid.upper".into(),
                got: format!("{grid_upper}"),
                why: format!("must exceed grid.lower = {grid_lower}"),
            });
        }
        let grid_n = bag.take_usize("grid.n")?.unwrap_or(2001);
        if grid_n < 2 {
            return Err(Error::BadValue {
                key: "grid.n".into(),
                got: format!("{grid_n}"),
                why: "need at least 2 quadrature nodes".into(),
            });
        }

        let kind = bag
            .take("likelihood.kind")
            .ok_or(Error::MissingKey("likelihood.kind"))?;
        let likelihood = match kind.as_str() {
            "gaussian_noise" => {
                let forward = match bag.take("likelihood.forward") {
                    None => ForwardSpec::Identity,
                    Some(v) => ForwardSpec::parse(&v).map_err(|why| Error::BadValue {
                        key: "likelihood.forward".into(),
                        got: v,
                        why,
                    })?,
                };
                let noise_variance = positive(
                    "likelihood.noise_variance",
                    bag.require_f64("likelihood.noise_variance")?,
                )?;
                LikelihoodSpec::GaussianNoise {
                    forward,
                    noise_variance,
                }
            }
            "floor_gaussian" => {
                if let Some(v) = bag.take("likelihood.forward") {
                    if v != "identity" {
                        return Err(Error::Conflict {
                            key: "likelihood.forward".into(),
                            why: format!(
                                "floor_gaussian always uses the identity forward map, got '{v}'"
                            ),
                        });
                    }
                }
                let noise_variance = positive(
                    "likelihood.noise_variance",
                    bag.require_f64("likelihood.noise_variance")?,
                )?;
                LikelihoodSpec::FloorGaussian { noise_variance }
            }
            "custom_named" => {
                let name = bag
                    .take("likelihood.name")
                    .ok_or(Error::MissingKey("likelihood.name"))?;
                match name.as_str() {
                    "flat" => LikelihoodSpec::Flat,
                    "window" => {
                        let width = positive(
                            "likelihood.width",
                            bag.require_f64("likelihood.width")?,
                        )?;
                        LikelihoodSpec::Window { width }
                    }
                    other => {
                        return Err(Error::BadValue {
                            key: "likelihood.name".into(),
                            got: other.into(),
                            why: "expected flat or window".into(),
                        })
                    }
                }
            }
            other => {
                return Err(Error::BadValue {
                    key: "likelihood.kind".into(),
                    got: other.into(),
                    why: "expected gaussian_noise, floor_gaussian, or custom_named".into(),
                })
            }
        };

        let data_dim = bag.take_usize("data_dim")?.unwrap_or(1);
        if data_dim != 1 {
            return Err(Error::BadValue {
                key: "data_dim".into(),
                got: format!("{data_dim}"),
                why: "sweeps support scalar data only (data_dim = 1)".into(),
            });
        }

        let y_ref = finite("sweep.y_ref", bag.require_f64("sweep.y_ref")?)?;
        let y_min = finite("sweep.y_min", bag.require_f64("sweep.y_min")?)?;
        let y_max = finite("sweep.y_max", bag.require_f64("sweep.y_max")?)?;
        if y_max <= y_min {
            return Err(Error::BadValue {
                key: "sweep.y_max".into(),
                got: format!("{y_max}"),
                why: format!("must exceed sweep.y_min = {y_min}"),
            });
        }
        let y_step = positive("sweep.y_step", bag.require_f64("sweep.y_step")?)?;

        bag.reject_leftovers("key does not apply to the selected likelihood kind")?;

        Ok(ExperimentConfig {
            prior,
            grid_lower,
            grid_upper,
            grid_n,
            cell_centered,
            likelihood,
            data_dim,
            sweep: SweepWindow {
                y_ref,
                y_min,
                y_max,
                y_step,
            },
        })
    }

    pub fn build_grid(&self) -> measures::Result<Grid1D> {
        if self.cell_centered {
            Grid1D::cell_centered(self.grid_lower, self.grid_upper, self.grid_n)
        } else {
            Grid1D::new(self.grid_lower, self.grid_upper, self.grid_n)
        }
    }

    pub fn build_problem(&self) -> measures::Result<BayesianProblem> {
        let grid = self.build_grid()?;
        let prior = match &self.prior {
            PriorSpec::Uniform { lower, upper } => {
                let (lo, hi) = (*lower, *upper);
                let density: Vec<f64> = grid
                    .nodes()
                    .map(|x| if (lo..=hi).contains(&x) { 1.0 } else { 0.0 })
                    .collect();
                GridMeasure::normalize(grid, density)?
            }
            PriorSpec::Gaussian { mean, stddev } => {
                discretize(Gaussian1D::new(*mean, *stddev)?, grid)?
            }
        };
        let likelihood = self.build_likelihood();
        Ok(BayesianProblem { prior, likelihood })
    }

    pub fn build_likelihood(&self) -> Likelihood {
        match &self.likelihood {
            LikelihoodSpec::GaussianNoise {
                forward,
                noise_variance,
            } => {
                let f = *forward;
                scalar_gaussian_likelihood(
                    move |theta| f.apply(theta),
                    move |y| f.data_transform(y),
                    *noise_variance,
                    format!(
                        "gaussian_noise, forward = {}, noise_variance = {}",
                        f.descriptor(),
                        noise_variance
                    ),
                )
            }
            LikelihoodSpec::FloorGaussian { noise_variance } => scalar_gaussian_likelihood(
                |theta| theta,
                |y| y.floor(),
                *noise_variance,
                format!("floor_gaussian, noise_variance = {noise_variance}"),
            ),
            LikelihoodSpec::Flat => Likelihood::new(1, "custom_named flat", |_, _| 1.0),
            LikelihoodSpec::Window { width } => {
                let w = *width;
                Likelihood::new(
                    1,
                    format!("custom_named window, width = {w}"),
                    move |y: &[f64], theta: f64| {
                        if (y[0] - theta).abs() <= w {
                            1.0
                        } else {
                            0.0
                        }
                    },
                )
            }
        }
    }
}
