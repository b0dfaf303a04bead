//! Experiment configurations, single computations, sweeps and reports.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::constants::{
    ainfty_constant, ap_constant, carleson_constant_stopping, carleson_constant_with, condition15_ratio,
    sawyer_max_constant_with, sawyer_trace_constant_with, wolff_norm, SetMode,
};
use crate::error::{LabError, Result};
use crate::operators::{conjugate, AdaptedFamily};
use crate::space::{FilteredSpace, MassRule, MeasurableSet};
use crate::stopping::{count_stopping_times, principal_sets};
use crate::verify::generate::{power_weight, random_tree, trial_rng, AlphaModel, SpaceModel, WeightModel};
use crate::verify::norm::{norm_lower_bound, NormOptions, NormProblem, Operator};
use crate::verify::sums::tail_integrals;
use crate::verify::suite::{run_suite, SuiteName, SuiteParams, SuiteResult};
use crate::verify::tracked;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where the space comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    Dyadic { depth: usize },
    Tree { levels: usize },
    File { path: PathBuf },
}

/// A weight: a named generator, explicit values, or a JSON file with an array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightSpec {
    Model { model: WeightModel },
    Values { values: Vec<f64> },
    File { path: PathBuf },
}

/// Multipliers: a named generator or a JSON file with an adapted family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AlphaSpec {
    Model { model: AlphaModel },
    File { path: PathBuf },
}

fn num(field: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| LabError::param(format!("{field}: `{s}` is not a number")))
}

fn args<'a>(field: &str, spec: &'a str, n: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = spec.split(':').skip(1).collect();
    if parts.len() < n {
        return Err(LabError::param(format!("{field}: `{spec}` needs {n} argument(s)")));
    }
    Ok(parts)
}

impl ModelSpec {
    /// `dyadic`, `tree` or a path to a JSON space.
    pub fn parse(s: &str, depth: Option<usize>) -> Result<Self> {
        Ok(match s {
            "dyadic" => ModelSpec::Dyadic { depth: depth.unwrap_or(3) },
            "tree" => ModelSpec::Tree {
                levels: depth.map_or(3, |d| d + 1),
            },
            path => ModelSpec::File { path: path.into() },
        })
    }

    pub fn build(&self, seed: u64) -> Result<FilteredSpace> {
        match self {
            ModelSpec::Dyadic { depth } => FilteredSpace::dyadic(*depth, &MassRule::Uniform),
            ModelSpec::Tree { levels } => random_tree(&mut trial_rng(seed, u64::MAX), *levels),
            ModelSpec::File { path } => read_json(path),
        }
    }

    pub fn suite_model(&self) -> Result<SpaceModel> {
        match self {
            ModelSpec::Dyadic { depth } => Ok(SpaceModel::Dyadic { depth: *depth }),
            ModelSpec::Tree { levels } => Ok(SpaceModel::Tree { levels: *levels }),
            ModelSpec::File { .. } => Err(LabError::param("model: suites generate their own spaces; use dyadic or tree")),
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

impl WeightSpec {
    /// `constant:C`, `lognormal:SIGMA`, `power:DELTA`, `spikes:COUNT:HEIGHT`,
    /// `values:A,B,...` or a path to a JSON array.
    pub fn parse(s: &str) -> Result<Self> {
        let f = "weight";
        let head = s.split(':').next().unwrap_or("");
        let model = match head {
            "constant" => WeightModel::Constant {
                value: num(f, args(f, s, 1)?[0])?,
            },
            "lognormal" => WeightModel::LogNormal {
                sigma: num(f, args(f, s, 1)?[0])?,
            },
            "power" => WeightModel::Power {
                delta: num(f, args(f, s, 1)?[0])?,
            },
            "spikes" => {
                let a = args(f, s, 2)?;
                WeightModel::Spikes {
                    count: num(f, a[0])? as usize,
                    height: num(f, a[1])?,
                }
            }
            "values" => {
                let values = args(f, s, 1)?[0].split(',').map(|v| num(f, v)).collect::<Result<_>>()?;
                return Ok(WeightSpec::Values { values });
            }
            _ => return Ok(WeightSpec::File { path: s.into() }),
        };
        Ok(WeightSpec::Model { model })
    }

    pub fn build(&self, space: &FilteredSpace, seed: u64) -> Result<Vec<f64>> {
        let w = match self {
            WeightSpec::Model { model } => model.generate(space, &mut trial_rng(seed, 0))?,
            WeightSpec::Values { values } => values.clone(),
            WeightSpec::File { path } => read_json(path)?,
        };
        if w.len() != space.num_atoms() {
            return Err(LabError::param(format!(
                "weight: {} values for {} atoms",
                w.len(),
                space.num_atoms()
            )));
        }
        Ok(w)
    }
}

impl AlphaSpec {
    /// `ones`, `single:LEVEL:VALUE`, `geometric:LAMBDA[:JITTER]`, `sparse:DENSITY`,
    /// `zero` or a path to a JSON family.
    pub fn parse(s: &str) -> Result<Self> {
        let f = "alpha";
        let head = s.split(':').next().unwrap_or("");
        let model = match head {
            "ones" => AlphaModel::Ones,
            "zero" => AlphaModel::Sparse { density: 0.0 },
            "single" => {
                let a = args(f, s, 2)?;
                AlphaModel::SingleLevel {
                    level: num(f, a[0])? as usize,
                    value: num(f, a[1])?,
                }
            }
            "geometric" => {
                let a = args(f, s, 1)?;
                AlphaModel::Geometric {
                    lambda: num(f, a[0])?,
                    jitter: a.get(1).map_or(Ok(0.0), |v| num(f, v))?,
                }
            }
            "sparse" => AlphaModel::Sparse {
                density: num(f, args(f, s, 1)?[0])?,
            },
            _ => return Ok(AlphaSpec::File { path: s.into() }),
        };
        Ok(AlphaSpec::Model { model })
    }

    pub fn build(&self, space: &FilteredSpace, seed: u64) -> Result<AdaptedFamily> {
        let fam = match self {
            AlphaSpec::Model { model } => model.generate(space, &mut trial_rng(seed, 1))?,
            AlphaSpec::File { path } => read_json::<AdaptedFamily>(path)?.materialize(space)?,
        };
        fam.validate(space)?;
        Ok(fam)
    }
}

/// Everything that determines a run's numeric output.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    /// `compute`, `suite` or `sweep`.
    pub command: String,
    /// Operation or suite name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub delta: Vec<f64>,
    #[serde(default)]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub exhaustive_sets: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u128>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub tool: String,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub results: Value,
    pub wall_time_ms: u64,
}

impl Report {
    pub fn new(config: ExperimentConfig, results: Value, wall_time_ms: u64) -> Self {
        Report {
            tool: "martlab".into(),
            tool_version: TOOL_VERSION.into(),
            config,
            results,
            wall_time_ms,
        }
    }
}

/// Operations available to `compute`.
pub const OPERATIONS: [&str; 12] = [
    "ap-constant",
    "ainfty-constant",
    "condition-ratio",
    "sawyer-trace-constant",
    "sawyer-max-constant",
    "carleson-constant",
    "carleson-constant-stopping",
    "count-stopping-times",
    "wolff-norm",
    "tail-integrals",
    "principal-tree",
    "maximal-norm",
];

fn one_p(cfg: &ExperimentConfig) -> Result<f64> {
    match cfg.p.as_slice() {
        [p] => Ok(*p),
        [] => Err(LabError::param("p: required")),
        _ => Err(LabError::param("p: compute takes a single value")),
    }
}

fn req(v: Option<f64>, field: &str) -> Result<f64> {
    v.ok_or_else(|| LabError::param(format!("{field}: required")))
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

/// Runs a single named operation.
pub fn compute(cfg: &ExperimentConfig) -> Result<Value> {
    let op = cfg.target.as_deref().ok_or_else(|| LabError::param("operation: required"))?;
    let space = cfg.model.clone().unwrap_or(ModelSpec::Dyadic { depth: 3 }).build(cfg.seed)?;
    let weight = || -> Result<Vec<f64>> {
        cfg.weight
            .as_ref()
            .map_or(Ok(vec![1.0; space.num_atoms()]), |w| w.build(&space, cfg.seed))
    };
    let alpha = || -> Result<AdaptedFamily> {
        cfg.alpha
            .as_ref()
            .map_or(Ok(AdaptedFamily::ones(&space)), |a| a.build(&space, cfg.seed))
    };
    let mode = if cfg.exhaustive_sets { SetMode::Exhaustive } else { SetMode::Blocks };
    let cap = cfg.cap.unwrap_or(1 << 20);
    match op {
        "ap-constant" => to_value(&ap_constant(&space, &weight()?, one_p(cfg)?)?),
        "ainfty-constant" => to_value(&ainfty_constant(&space, &weight()?)?),
        "condition-ratio" => to_value(&condition15_ratio(&space, &alpha()?)?),
        "sawyer-trace-constant" => {
            let p = one_p(cfg)?;
            to_value(&sawyer_trace_constant_with(&space, &alpha()?, &weight()?, p, cfg.q.unwrap_or(p), mode)?)
        }
        "sawyer-max-constant" => {
            let p = one_p(cfg)?;
            let w = weight()?;
            let pp = conjugate(p)?;
            let sigma: Vec<f64> = w.iter().map(|v| v.powf(1.0 - pp)).collect();
            to_value(&sawyer_max_constant_with(&space, &alpha()?, &w, &sigma, p, cfg.q.unwrap_or(p), mode)?)
        }
        "carleson-constant" => to_value(&carleson_constant_with(&space, &alpha()?, cfg.theta.unwrap_or(1.0), mode)?),
        "carleson-constant-stopping" => {
            to_value(&carleson_constant_stopping(&space, &alpha()?, cfg.theta.unwrap_or(1.0), cap)?)
        }
        "count-stopping-times" => {
            let n = count_stopping_times(&space);
            if n > cap {
                return Err(LabError::Capacity {
                    what: "stopping times".into(),
                    requested: n,
                    limit: cap,
                });
            }
            Ok(json!({ "value": n.to_string() }))
        }
        "wolff-norm" => {
            let v = wolff_norm(&space, &alpha()?, &weight()?, one_p(cfg)?, req(cfg.q, "q")?)?;
            Ok(json!({ "value": crate::json::to_value(v) }))
        }
        "tail-integrals" => {
            let t = tail_integrals(&space, &alpha()?, &weight()?, req(cfg.s, "s")?)?;
            Ok(json!({ "a1": t.a1, "a2": t.a2, "a3": t.a3 }))
        }
        "principal-tree" => {
            let sigma = weight()?;
            let tree = principal_sets(&space, &sigma, &MeasurableSet::block(0, 0), 0)?;
            to_value(&tree)
        }
        "maximal-norm" => {
            let p = one_p(cfg)?;
            let w = weight()?;
            let problem = NormProblem {
                space: &space,
                op: Operator::Maximal { alpha: alpha()? },
                p,
                q: cfg.q.unwrap_or(p),
                src: Some(w.clone()),
                dst: Some(w),
            };
            let opts = NormOptions {
                dual_indicators: true,
                seed: cfg.seed,
                ..NormOptions::default()
            };
            to_value(&norm_lower_bound(&problem, &opts)?)
        }
        other => Err(LabError::param(format!(
            "operation: unknown `{other}` (expected one of {})",
            OPERATIONS.join(", ")
        ))),
    }
}

/// Suite overrides from a configuration.
pub fn suite_params(cfg: &ExperimentConfig) -> Result<SuiteParams> {
    if cfg.p.len() > 1 {
        return Err(LabError::param("p: suites take a single value"));
    }
    Ok(SuiteParams {
        space: cfg.model.as_ref().map(ModelSpec::suite_model).transpose()?,
        weight: match &cfg.weight {
            None => None,
            Some(WeightSpec::Model { model }) => Some(model.clone()),
            Some(_) => return Err(LabError::param("weight: suites take a named generator")),
        },
        alpha: match &cfg.alpha {
            None => None,
            Some(AlphaSpec::Model { model }) => Some(model.clone()),
            Some(_) => return Err(LabError::param("alpha: suites take a named generator")),
        },
        p: cfg.p.first().copied(),
        q: cfg.q,
        s: cfg.s,
        theta: cfg.theta,
    })
}

pub fn suite(cfg: &ExperimentConfig, workers: usize) -> Result<SuiteResult> {
    let name: SuiteName = cfg
        .target
        .as_deref()
        .ok_or_else(|| LabError::param("suite: required"))?
        .parse()?;
    run_suite(name, &suite_params(cfg)?, cfg.trials, cfg.seed, workers)
}

/// One grid point of the power-weight sharpness sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub delta: f64,
    pub depth: usize,
    /// `[w]_{A_p}`
    pub ap: f64,
    /// `[sigma]_{A_inf}`
    pub ainf_sigma: f64,
    /// `[sigma]_{A_p'}`
    pub ap_dual_sigma: f64,
    /// Lower bound for `||f^*||_{L^p(w) -> L^p(w)}`.
    pub norm_lower: f64,
    /// `([w]_{A_p} [sigma]_{A_inf})^{1/p}`
    pub mixed: f64,
    /// `([w]_{A_p} [sigma]_{A_p'})^{1/p}`
    pub classical: f64,
    pub ratio_mixed: f64,
    pub ratio_classical: f64,
    /// `C_p ([w]_{A_p} [sigma]_{A_inf})^{1/p}`
    pub mixed_bound: f64,
}

pub const SWEEP_CSV_HEADER: &str =
    "p,delta,depth,ap,ainf_sigma,ap_dual_sigma,norm_lower,mixed,classical,ratio_mixed,ratio_classical,mixed_bound";

impl SweepRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.p,
            self.delta,
            self.depth,
            self.ap,
            self.ainf_sigma,
            self.ap_dual_sigma,
            self.norm_lower,
            self.mixed,
            self.classical,
            self.ratio_mixed,
            self.ratio_classical,
            self.mixed_bound
        )
    }
}

/// Default exponents approaching the degenerate end `delta -> p - 1`.
pub fn default_deltas(p: f64) -> Vec<f64> {
    [-0.5, 0.0, 0.5, 0.75, 0.9, 0.95, 0.99]
        .iter()
        .map(|&t| if t <= 0.0 { t } else { t * (p - 1.0) })
        .collect()
}

/// Power weights `x^delta` on the dyadic space of depth `depth`.
pub fn sharpness_sweep(ps: &[f64], deltas: &[f64], depth: usize, seed: u64) -> Result<Vec<SweepRow>> {
    let space = FilteredSpace::dyadic(depth, &MassRule::Uniform)?;
    let grid: Vec<(f64, f64)> = ps
        .iter()
        .flat_map(|&p| {
            let ds = if deltas.is_empty() { default_deltas(p) } else { deltas.to_vec() };
            ds.into_iter().map(move |d| (p, d))
        })
        .collect();
    grid.par_iter()
        .map(|&(p, delta)| {
            let pp = conjugate(p)?;
            let w = power_weight(&space, delta)?;
            let sigma: Vec<f64> = w.iter().map(|v| v.powf(1.0 - pp)).collect();
            let ap = ap_constant(&space, &w, p)?.value;
            let ainf_sigma = ainfty_constant(&space, &sigma)?.value;
            let ap_dual_sigma = ap_constant(&space, &sigma, pp)?.value;
            let problem = NormProblem {
                space: &space,
                op: Operator::Maximal {
                    alpha: AdaptedFamily::ones(&space),
                },
                p,
                q: p,
                src: Some(w.clone()),
                dst: Some(w),
            };
            let opts = NormOptions {
                dual_indicators: true,
                seed,
                ..NormOptions::default()
            };
            let norm_lower = norm_lower_bound(&problem, &opts)?.lower;
            let mixed = (ap * ainf_sigma).powf(1.0 / p);
            let classical = (ap * ap_dual_sigma).powf(1.0 / p);
            Ok(SweepRow {
                p,
                delta,
                depth,
                ap,
                ainf_sigma,
                ap_dual_sigma,
                norm_lower,
                mixed,
                classical,
                ratio_mixed: mixed / norm_lower,
                ratio_classical: classical / norm_lower,
                mixed_bound: tracked::mixed_maximal_factor(p) * mixed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_parse() {
        assert_eq!(
            WeightSpec::parse("lognormal:0.5").unwrap(),
            WeightSpec::Model {
                model: WeightModel::LogNormal { sigma: 0.5 }
            }
        );
        assert_eq!(
            WeightSpec::parse("values:1,3").unwrap(),
            WeightSpec::Values { values: vec![1.0, 3.0] }
        );
        assert!(WeightSpec::parse("power:x").is_err());
        assert_eq!(
            AlphaSpec::parse("single:2:0.5").unwrap(),
            AlphaSpec::Model {
                model: AlphaModel::SingleLevel { level: 2, value: 0.5 }
            }
        );
        assert_eq!(ModelSpec::parse("dyadic", Some(2)).unwrap(), ModelSpec::Dyadic { depth: 2 });
    }

    #[test]
    fn compute_ap_constant() {
        let cfg = ExperimentConfig {
            command: "compute".into(),
            target: Some("ap-constant".into()),
            model: Some(ModelSpec::Dyadic { depth: 1 }),
            weight: Some(WeightSpec::Values { values: vec![1.0, 3.0] }),
            p: vec![2.0],
            ..ExperimentConfig::default()
        };
        let v = compute(&cfg).unwrap();
        assert!((v["value"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn compute_trivial_zeros() {
        let base = ExperimentConfig {
            command: "compute".into(),
            model: Some(ModelSpec::Dyadic { depth: 2 }),
            alpha: Some(AlphaSpec::parse("zero").unwrap()),
            p: vec![2.0],
            q: Some(1.5),
            ..ExperimentConfig::default()
        };
        for op in ["wolff-norm", "carleson-constant"] {
            let cfg = ExperimentConfig {
                target: Some(op.into()),
                ..base.clone()
            };
            assert_eq!(compute(&cfg).unwrap()["value"].as_f64(), Some(0.0), "{op}");
        }
    }

    #[test]
    fn sweep_rows_follow_grid_order() {
        let rows = sharpness_sweep(&[2.0], &[0.0, 0.5], 3, 1).unwrap();
        assert_eq!(rows.iter().map(|r| r.delta).collect::<Vec<_>>(), vec![0.0, 0.5]);
        assert!((rows[0].ap - 1.0).abs() < 1e-12);
        assert!(rows.iter().all(|r| r.mixed <= r.classical * (1.0 + 1e-12)));
    }
}
