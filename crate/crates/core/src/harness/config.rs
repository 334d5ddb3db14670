//! Line-oriented experiment config.
//!
//! ```text
//! # comment
//! [experiment]
//! id = wigner_scaling
//! algorithm = mhc, random
//! T = 50n, 100n, 200n      # plain integers, or multiples of n / n²
//! trials = 20
//! seed = 7
//! output_dir = out/wigner
//! trajectories = true
//!
//! [ensemble]
//! kind = wigner_conditioned
//! n = 16, 32
//! entry_law = gaussian
//! sigma2 = 0.01            # default 1/n (goe) or 1/(9n) (wigner_conditioned)
//!
//! [alpha]
//! policy = auto            # or `fixed` with `value = ...`
//! eta = 0.25               # measured from samples when omitted
//! theta = 1.0
//! ```
//!
//! Keys before the first header are looked up in every section. Keys inside
//! a section must belong to it.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::ensembles::{EnsembleKind, EnsembleSpec, EntryFamily};
use crate::error::{Error, Result};
use crate::signer::Algorithm;

/// Step count, possibly relative to the dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepCount {
    Absolute(usize),
    PerN(usize),
    PerN2(usize),
}

impl StepCount {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            StepCount::Absolute(t) => t,
            StepCount::PerN(k) => k * n,
            StepCount::PerN2(k) => k * n * n,
        }
    }

    fn parse(token: &str) -> Option<Self> {
        let (digits, ctor): (&str, fn(usize) -> StepCount) =
            if let Some(d) = token.strip_suffix("n2") {
                (d, StepCount::PerN2)
            } else if let Some(d) = token.strip_suffix('n') {
                (d, StepCount::PerN)
            } else {
                (token, StepCount::Absolute)
            };
        let v: usize = digits.trim().parse().ok()?;
        (v > 0).then(|| ctor(v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaConfig {
    /// Missing constants are measured on `calibration_samples` draws.
    Auto {
        eta: Option<f64>,
        theta: Option<f64>,
        calibration_samples: usize,
    },
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub id: String,
    /// Template; `n` and `r` are overridden per sweep cell.
    pub ensemble: EnsembleSpec,
    pub n_values: Vec<usize>,
    /// Empty for kinds without a rank parameter.
    pub r_values: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub alpha: AlphaConfig,
    pub t_values: Vec<StepCount>,
    pub n_trials: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub write_trajectories: bool,
}

/// One `(n, r)` point of the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub spec: EnsembleSpec,
    pub t_values: Vec<usize>,
}

impl ExperimentConfig {
    pub fn cells(&self) -> Vec<Cell> {
        let ranks: Vec<Option<usize>> = if self.r_values.is_empty() {
            vec![None]
        } else {
            self.r_values.iter().map(|&r| Some(r)).collect()
        };
        let mut out = Vec::new();
        for &n in &self.n_values {
            for &r in &ranks {
                let mut spec = self.ensemble.clone();
                spec.n = n;
                spec.r = r;
                out.push(Cell {
                    spec,
                    t_values: self.t_values.iter().map(|t| t.resolve(n)).collect(),
                });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let schema = |key: &str, msg: String| Error::Schema {
            key: key.into(),
            msg,
        };
        if self.n_trials == 0 {
            return Err(schema("trials", "must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(schema(
                "algorithm",
                "at least one algorithm required".into(),
            ));
        }
        strictly_increasing("n", &self.n_values)?;
        strictly_increasing("r", &self.r_values)?;
        if self.t_values.is_empty() {
            return Err(schema("T", "required".into()));
        }
        if self.ensemble.kind.uses_rank() && self.r_values.is_empty() {
            return Err(schema("r", format!("required for {}", self.ensemble.kind)));
        }
        if !self.ensemble.kind.uses_rank() && !self.r_values.is_empty() {
            return Err(schema("r", format!("not used by {}", self.ensemble.kind)));
        }
        for cell in self.cells() {
            cell.spec
                .validate()
                .map_err(|e| schema("ensemble", e.to_string()))?;
            strictly_increasing("T", &cell.t_values)?;
        }
        if let AlphaConfig::Fixed(v) = self.alpha {
            if !(v > 0.0) {
                return Err(schema("value", format!("alpha must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

fn strictly_increasing(key: &str, v: &[usize]) -> Result<()> {
    if v.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Schema {
            key: key.into(),
            msg: "sweep list must be strictly increasing".into(),
        });
    }
    Ok(())
}

const SECTIONS: [(&str, &[&str]); 3] = [
    (
        "experiment",
        &[
            "id",
            "algorithm",
            "T",
            "trials",
            "seed",
            "output_dir",
            "trajectories",
        ],
    ),
    (
        "ensemble",
        &[
            "kind",
            "ensemble",
            "n",
            "r",
            "sigma2",
            "scale",
            "norm_cap",
            "max_rejections",
            "entry_law",
        ],
    ),
    (
        "alpha",
        &[
            "policy",
            "alpha",
            "value",
            "eta",
            "theta",
            "calibration_samples",
        ],
    ),
];

/// Home section and interned name of `key`.
fn lookup(key: &str) -> Option<(&'static str, &'static str)> {
    SECTIONS
        .iter()
        .find_map(|(s, keys)| keys.iter().find(|k| **k == key).map(|k| (*s, *k)))
}

struct Entry {
    value: String,
    line: usize,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut entries: HashMap<&'static str, Entry> = HashMap::new();
    let mut section: Option<&'static str> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("unterminated section header `{line}`"),
            })?;
            let name = name.trim();
            section = Some(
                SECTIONS
                    .iter()
                    .find(|(s, _)| *s == name)
                    .map(|(s, _)| *s)
                    .ok_or_else(|| Error::Schema {
                        key: name.into(),
                        msg: format!("unknown section at line {line_no}"),
                    })?,
            );
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            });
        }
        let (home, interned) = lookup(key).ok_or_else(|| Error::Schema {
            key: key.into(),
            msg: format!("unknown key at line {line_no}"),
        })?;
        if let Some(s) = section {
            if s != home {
                return Err(Error::Schema {
                    key: key.into(),
                    msg: format!("belongs in [{home}], found in [{s}] at line {line_no}"),
                });
            }
        }
        let canonical = match interned {
            "ensemble" => "kind",
            "alpha" => "policy",
            other => other,
        };
        if entries.contains_key(canonical) {
            return Err(Error::Schema {
                key: key.into(),
                msg: format!("duplicate key at line {line_no}"),
            });
        }
        entries.insert(
            canonical,
            Entry {
                value: value.to_string(),
                line: line_no,
            },
        );
    }
    build(entries)
}

fn schema(key: &str, msg: impl Into<String>) -> Error {
    Error::Schema {
        key: key.into(),
        msg: msg.into(),
    }
}

fn list(e: &Entry) -> Vec<&str> {
    e.value.split(',').map(str::trim).collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, e: &Entry) -> Result<T> {
    e.value.parse().map_err(|_| Error::Parse {
        line: e.line,
        msg: format!("invalid value `{}` for `{key}`", e.value),
    })
}

fn parse_list<T: std::str::FromStr>(key: &str, e: &Entry) -> Result<Vec<T>> {
    list(e)
        .into_iter()
        .map(|tok| {
            tok.parse().map_err(|_| Error::Parse {
                line: e.line,
                msg: format!("invalid list item `{tok}` for `{key}`"),
            })
        })
        .collect()
}

fn build(mut entries: HashMap<&'static str, Entry>) -> Result<ExperimentConfig> {
    let mut take = |k: &str| entries.remove(k);

    let kind: EnsembleKind = match take("kind") {
        Some(e) => e
            .value
            .parse()
            .map_err(|_| schema("kind", format!("unknown ensemble `{}`", e.value)))?,
        None => return Err(schema("kind", "ensemble kind is required")),
    };
    let n_values: Vec<usize> = match take("n") {
        Some(e) => parse_list("n", &e)?,
        None => return Err(schema("n", "dimension is required")),
    };
    let r_values: Vec<usize> = match take("r") {
        Some(e) => parse_list("r", &e)?,
        None => Vec::new(),
    };
    let mut ensemble = EnsembleSpec {
        kind,
        n: n_values.first().copied().unwrap_or(0),
        r: r_values.first().copied(),
        sigma2: None,
        entry_law: EntryFamily::Gaussian,
        scale: 1.0,
        norm_cap: 1.0,
        max_rejections: 1000,
    };
    if let Some(e) = take("sigma2") {
        ensemble.sigma2 = Some(parse_one("sigma2", &e)?);
    }
    if let Some(e) = take("scale") {
        ensemble.scale = parse_one("scale", &e)?;
    }
    if let Some(e) = take("norm_cap") {
        ensemble.norm_cap = parse_one("norm_cap", &e)?;
    }
    if let Some(e) = take("max_rejections") {
        ensemble.max_rejections = parse_one("max_rejections", &e)?;
    }
    if let Some(e) = take("entry_law") {
        ensemble.entry_law = e
            .value
            .parse()
            .map_err(|_| schema("entry_law", format!("unknown entry law `{}`", e.value)))?;
    }

    let t_values = match take("T") {
        Some(e) => list(&e)
            .into_iter()
            .map(|tok| {
                StepCount::parse(tok).ok_or_else(|| Error::Parse {
                    line: e.line,
                    msg: format!("invalid step count `{tok}` (use e.g. 400, 50n or 2n2)"),
                })
            })
            .collect::<Result<Vec<_>>>()?,
        None => return Err(schema("T", "step count is required")),
    };
    let algorithms = match take("algorithm") {
        Some(e) => list(&e)
            .into_iter()
            .map(|tok| {
                tok.parse::<Algorithm>()
                    .map_err(|_| schema("algorithm", format!("unknown algorithm `{tok}`")))
            })
            .collect::<Result<Vec<_>>>()?,
        None => vec![Algorithm::Mhc],
    };

    let eta = take("eta")
        .map(|e| parse_one::<f64>("eta", &e))
        .transpose()?;
    let theta = take("theta")
        .map(|e| parse_one::<f64>("theta", &e))
        .transpose()?;
    let value = take("value")
        .map(|e| parse_one::<f64>("value", &e))
        .transpose()?;
    let calibration_samples = take("calibration_samples")
        .map(|e| parse_one::<usize>("calibration_samples", &e))
        .transpose()?
        .unwrap_or(2000);
    let alpha = match take("policy") {
        None => match value {
            Some(v) => AlphaConfig::Fixed(v),
            None => AlphaConfig::Auto {
                eta,
                theta,
                calibration_samples,
            },
        },
        Some(e) => match e.value.as_str() {
            "auto" => AlphaConfig::Auto {
                eta,
                theta,
                calibration_samples,
            },
            "fixed" => AlphaConfig::Fixed(
                value.ok_or_else(|| schema("value", "fixed alpha needs `value`"))?,
            ),
            other => match other.parse::<f64>() {
                Ok(v) => AlphaConfig::Fixed(v),
                Err(_) => {
                    return Err(schema(
                        "policy",
                        format!("expected auto, fixed or a number, got `{other}`"),
                    ))
                }
            },
        },
    };

    let config = ExperimentConfig {
        id: take("id")
            .map(|e| e.value)
            .unwrap_or_else(|| "experiment".into()),
        ensemble,
        n_values,
        r_values,
        algorithms,
        alpha,
        t_values,
        n_trials: take("trials")
            .map(|e| parse_one("trials", &e))
            .transpose()?
            .unwrap_or(1),
        master_seed: take("seed")
            .map(|e| parse_one("seed", &e))
            .transpose()?
            .unwrap_or(0),
        output_dir: take("output_dir")
            .map(|e| PathBuf::from(e.value))
            .unwrap_or_else(|| PathBuf::from("matdisc_out")),
        write_trajectories: take("trajectories")
            .map(|e| parse_one("trajectories", &e))
            .transpose()?
            .unwrap_or(true),
    };
    config.validate()?;
    Ok(config)
}
