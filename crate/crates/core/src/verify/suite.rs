//! Randomized verification suites.
//!
//! A trial is generated from `(seed, trial index)` alone and then evaluated
//! by a pure function of the resulting [`Instance`], so trials can run in any
//! order on any number of threads and be replayed from their serialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{random_family, random_function, random_tree, trial_rng, AlphaModel, SpaceModel, WeightModel};
use super::norm::{duality_gap, norm_lower_bound, NormOptions, NormProblem, Operator};
use super::replay::FailurePayload;
use super::sums::{power_sum_sides, tail_integrals};
use super::tracked;
use super::{IDENTITY_TOL, SLACK};
use crate::constants::{
    ainfty_constant, ap_constant, carleson_constant, carleson_constant_stopping, carleson_constant_with,
    carleson_qlp_constant, carleson_qlp_density, condition15_ratio, cor43_test_constant, sawyer_max_constant,
    sawyer_max_constant_with, sawyer_trace_constant, sawyer_trace_constant_with, wolff_norm, SetMode,
    EXHAUSTIVE_MAX_BLOCKS,
};
use crate::error::{LabError, Result};
use crate::operators::{
    block_averages, cond_exp, cond_exp_weighted, conjugate, gen_max, integral, lp_norm, pos_op, tail_sums,
    wolff_potential, AdaptedFamily,
};
use crate::space::{FilteredSpace, MassRule, MeasurableSet};
use crate::stopping::{check_principal_properties, count_stopping_times, principal_sets, sawyer_decomposition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SuiteName {
    #[serde(rename = "identities")]
    Identities,
    #[serde(rename = "ineq2.1")]
    PowerSum,
    #[serde(rename = "lemma2.3")]
    TailIntegrals,
    #[serde(rename = "thm3.1")]
    CarlesonEmbedding,
    #[serde(rename = "thm3.5")]
    WeightedEmbedding,
    #[serde(rename = "thm4.1")]
    MaximalTesting,
    #[serde(rename = "lemma4.2")]
    ApTesting,
    #[serde(rename = "cor4.5")]
    ApMaximal,
    #[serde(rename = "thm5.1")]
    MixedBound,
    #[serde(rename = "thm1.1")]
    TraceTesting,
    #[serde(rename = "thm1.2")]
    WolffCharacterization,
    #[serde(rename = "carleson-equiv")]
    CarlesonEquivalence,
    #[serde(rename = "principal-props")]
    PrincipalSets,
}

impl SuiteName {
    pub const ALL: [SuiteName; 13] = [
        SuiteName::Identities,
        SuiteName::PowerSum,
        SuiteName::TailIntegrals,
        SuiteName::CarlesonEmbedding,
        SuiteName::WeightedEmbedding,
        SuiteName::MaximalTesting,
        SuiteName::ApTesting,
        SuiteName::ApMaximal,
        SuiteName::MixedBound,
        SuiteName::TraceTesting,
        SuiteName::WolffCharacterization,
        SuiteName::CarlesonEquivalence,
        SuiteName::PrincipalSets,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SuiteName::Identities => "identities",
            SuiteName::PowerSum => "ineq2.1",
            SuiteName::TailIntegrals => "lemma2.3",
            SuiteName::CarlesonEmbedding => "thm3.1",
            SuiteName::WeightedEmbedding => "thm3.5",
            SuiteName::MaximalTesting => "thm4.1",
            SuiteName::ApTesting => "lemma4.2",
            SuiteName::ApMaximal => "cor4.5",
            SuiteName::MixedBound => "thm5.1",
            SuiteName::TraceTesting => "thm1.1",
            SuiteName::WolffCharacterization => "thm1.2",
            SuiteName::CarlesonEquivalence => "carleson-equiv",
            SuiteName::PrincipalSets => "principal-props",
        }
    }
}

impl std::str::FromStr for SuiteName {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        SuiteName::ALL
            .into_iter()
            .find(|n| n.id() == s)
            .ok_or_else(|| LabError::UnknownSuite(s.to_string()))
    }
}

impl std::fmt::Display for SuiteName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

/// Overrides for the default generators and exponent grids.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

/// Everything a trial's evaluation depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Instance {
    pub suite: SuiteName,
    pub trial: u64,
    /// Seed of the estimators and auxiliary test families.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<FilteredSpace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AdaptedFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<AdaptedFamily>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub functions: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<MeasurableSet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exponents: Vec<Exponents>,
}

/// One exponent combination evaluated on an instance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    /// Counts toward the verdict.
    Assert,
    /// Recorded for inspection only.
    Report,
}

/// `lhs <= rhs`, with the constant folded into `rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    #[serde(with = "crate::json::num")]
    pub lhs: f64,
    #[serde(with = "crate::json::num")]
    pub rhs: f64,
    pub holds: bool,
    /// Within 5% of the bound; only set where closeness is of interest.
    #[serde(default)]
    pub flagged: bool,
}

impl Check {
    /// `lhs / rhs`, with `0/0 = 0` and `x/0 = inf`.
    pub fn ratio(&self) -> f64 {
        if self.rhs == 0.0 {
            if self.lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.lhs / self.rhs
        }
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, name: String, kind: CheckKind, lhs: f64, rhs: f64, holds: bool) -> &mut Check {
        self.0.push(Check {
            name,
            kind,
            lhs,
            rhs,
            holds,
            flagged: false,
        });
        self.0.last_mut().expect("just pushed")
    }

    fn le(&mut self, name: impl Into<String>, lhs: f64, rhs: f64) -> &mut Check {
        let holds = lhs <= rhs * SLACK;
        self.push(name.into(), CheckKind::Assert, lhs, rhs, holds)
    }

    /// Asserts a relative discrepancy below [`IDENTITY_TOL`].
    fn identity(&mut self, name: impl Into<String>, err: f64) {
        let holds = err <= IDENTITY_TOL;
        self.push(name.into(), CheckKind::Assert, err, IDENTITY_TOL, holds);
    }

    /// Asserts a count of violations is zero.
    fn none(&mut self, name: impl Into<String>, violations: usize) {
        self.push(name.into(), CheckKind::Assert, violations as f64, 0.0, violations == 0);
    }

    fn report(&mut self, name: impl Into<String>, lhs: f64, rhs: f64) {
        let holds = lhs <= rhs * SLACK;
        self.push(name.into(), CheckKind::Report, lhs, rhs, holds);
    }
}

fn rel_err(x: f64, y: f64) -> f64 {
    let scale = x.abs().max(y.abs());
    if scale == 0.0 {
        0.0
    } else {
        (x - y).abs() / scale
    }
}

fn max_rel_err(xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter().zip(ys).map(|(&x, &y)| rel_err(x, y)).fold(0.0, f64::max)
}

fn need<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| LabError::Schema(format!("instance is missing `{what}`")))
}

fn need_f64(v: Option<f64>, what: &str) -> Result<f64> {
    v.ok_or_else(|| LabError::Schema(format!("exponents are missing `{what}`")))
}

// ---------------------------------------------------------------------------
// Parameter grids

fn pick<T: Copy>(list: &[T], trial: u64) -> T {
    list[(trial % list.len() as u64) as usize]
}

fn check_range(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(LabError::param(what.to_string()))
    }
}

/// Default exponent pairs with overrides applied; invalid pairs are dropped
/// and at least one must remain.
fn pairs(defaults: &[(f64, f64)], params: &SuiteParams, valid: impl Fn(f64, f64) -> bool, what: &str) -> Result<Vec<(f64, f64)>> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for &(p, q) in defaults {
        let pair = (params.p.unwrap_or(p), params.q.unwrap_or(q));
        if valid(pair.0, pair.1) && !out.contains(&pair) {
            out.push(pair);
        }
    }
    if out.is_empty() {
        return Err(LabError::param(format!("no admissible exponents: {what}")));
    }
    Ok(out)
}

fn singles(defaults: &[f64], value: Option<f64>, valid: impl Fn(f64) -> bool, what: &str) -> Result<Vec<f64>> {
    let list = match value {
        Some(v) => vec![v],
        None => defaults.to_vec(),
    };
    for &v in &list {
        check_range(v.is_finite() && valid(v), what)?;
    }
    Ok(list)
}

const S_POWER_SUM: [f64; 6] = [1.1, 1.5, 2.0, 2.7, 4.0, 7.3];
const S_TAIL: [f64; 8] = [1.1, 1.5, 1.8, 2.0, 2.5, 3.0, 4.0, 5.5];
const P_EMBED: [f64; 3] = [0.5, 1.0, 2.0];
const THETA_EMBED: [f64; 3] = [1.0, 1.5, 2.0];
const Q_WEIGHTED: [f64; 3] = [0.5, 1.0, 2.0];
const THETA_WEIGHTED: [f64; 3] = [1.5, 2.0, 3.0];
const PQ_MAXIMAL: [(f64, f64); 4] = [(1.5, 1.5), (2.0, 2.0), (3.0, 3.0), (2.0, 3.0)];
const P_ONE_WEIGHT: [f64; 3] = [1.5, 2.0, 3.0];
const PQ_TRACE: [(f64, f64); 5] = [(1.5, 1.5), (2.0, 2.0), (3.0, 3.0), (1.5, 2.5), (2.0, 3.0)];
const PQ_WOLFF: [(f64, f64); 7] = [(2.0, 1.5), (3.0, 2.0), (3.0, 1.5), (4.0, 2.5), (2.0, 1.0), (3.0, 0.75), (2.0, 0.5)];
const THETA_EQUIV: [f64; 5] = [1.0, 1.25, 1.5, 2.0, 3.0];

/// Exponent combinations evaluated on trial `trial`.
fn exponents_for(suite: SuiteName, params: &SuiteParams, trial: u64) -> Result<Vec<Exponents>> {
    let e = |p: Option<f64>, q: Option<f64>, s: Option<f64>, theta: Option<f64>| Exponents { p, q, s, theta };
    Ok(match suite {
        SuiteName::Identities | SuiteName::PrincipalSets => Vec::new(),
        SuiteName::PowerSum => {
            let s = pick(&singles(&S_POWER_SUM, params.s, |s| s > 1.0, "s must exceed 1")?, trial);
            vec![e(None, None, Some(s), None)]
        }
        SuiteName::TailIntegrals => {
            let s = pick(&singles(&S_TAIL, params.s, |s| s > 1.0, "s must exceed 1")?, trial);
            vec![e(None, None, Some(s), None)]
        }
        SuiteName::CarlesonEmbedding => {
            let ps = singles(&P_EMBED, params.p, |p| p > 0.0, "p must be positive")?;
            let ts = singles(&THETA_EMBED, params.theta, |t| t >= 1.0, "theta must be at least 1")?;
            ps.iter().flat_map(|&p| ts.iter().map(move |&t| e(Some(p), None, None, Some(t)))).collect()
        }
        SuiteName::WeightedEmbedding => {
            let qs = singles(&Q_WEIGHTED, params.q, |q| q > 0.0, "q must be positive")?;
            let ts = singles(&THETA_WEIGHTED, params.theta, |t| t > 1.0, "theta must exceed 1")?;
            qs.iter().flat_map(|&q| ts.iter().map(move |&t| e(None, Some(q), None, Some(t)))).collect()
        }
        SuiteName::MaximalTesting | SuiteName::TraceTesting => {
            let defaults: &[(f64, f64)] = if suite == SuiteName::MaximalTesting { &PQ_MAXIMAL } else { &PQ_TRACE };
            let all = pairs(defaults, params, |p, q| p > 1.0 && q >= p && q.is_finite(), "need 1 < p <= q")?;
            let (p, q) = pick(&all, trial);
            vec![e(Some(p), Some(q), None, None)]
        }
        SuiteName::WolffCharacterization => {
            let all = pairs(&PQ_WOLFF, params, |p, q| p > 1.0 && p.is_finite() && q > 0.0 && q < p, "need p > 1, 0 < q < p")?;
            let (p, q) = pick(&all, trial);
            vec![e(Some(p), Some(q), None, None)]
        }
        SuiteName::ApTesting | SuiteName::ApMaximal | SuiteName::MixedBound => {
            let p = pick(&singles(&P_ONE_WEIGHT, params.p, |p| p > 1.0, "p must exceed 1")?, trial);
            vec![e(Some(p), None, None, None)]
        }
        SuiteName::CarlesonEquivalence => {
            let t = pick(&singles(&THETA_EQUIV, params.theta, |t| t >= 1.0, "theta must be at least 1")?, trial);
            vec![e(Some(2.0), Some(2.0), None, Some(t))]
        }
    })
}

// ---------------------------------------------------------------------------
// Generation

fn space_for(params: &SuiteParams, rng: &mut ChaCha8Rng, max_depth: usize) -> Result<FilteredSpace> {
    match &params.space {
        Some(m) => m.generate(rng),
        None => {
            if rng.gen_bool(0.5) {
                FilteredSpace::dyadic(rng.gen_range(0..=max_depth), &MassRule::Uniform)
            } else {
                let levels = rng.gen_range(1..=3usize.min(max_depth + 1));
                random_tree(rng, levels)
            }
        }
    }
}

fn weight_for(params: &SuiteParams, space: &FilteredSpace, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    match &params.weight {
        Some(m) => m.generate(space, rng),
        None => WeightModel::LogNormal { sigma: rng.gen_range(0.3..1.5) }.generate(space, rng),
    }
}

fn alpha_for(params: &SuiteParams, space: &FilteredSpace, rng: &mut ChaCha8Rng, trial: u64) -> Result<AdaptedFamily> {
    if let Some(m) = &params.alpha {
        return m.generate(space, rng);
    }
    let model = match trial % 4 {
        0 => AlphaModel::Ones,
        1 => AlphaModel::SingleLevel {
            level: rng.gen_range(0..space.num_levels()),
            value: rng.gen_range(0.5..2.0),
        },
        2 => AlphaModel::Geometric {
            lambda: rng.gen_range(0.3..0.9),
            jitter: rng.gen_range(0.0..0.5),
        },
        _ => AlphaModel::Sparse { density: 0.6 },
    };
    model.generate(space, rng)
}

/// Multipliers with a finite tail-comparability ratio.
fn comparable_alpha_for(params: &SuiteParams, space: &FilteredSpace, rng: &mut ChaCha8Rng, trial: u64) -> Result<AdaptedFamily> {
    if let Some(m) = &params.alpha {
        return m.generate(space, rng);
    }
    let model = if trial % 2 == 0 {
        AlphaModel::SingleLevel {
            level: rng.gen_range(0..space.num_levels()),
            value: rng.gen_range(0.5..2.0),
        }
    } else {
        AlphaModel::Geometric {
            lambda: rng.gen_range(0.3..0.9),
            jitter: rng.gen_range(0.0..0.5),
        }
    };
    model.generate(space, rng)
}

fn small_space(params: &SuiteParams, rng: &mut ChaCha8Rng) -> Result<FilteredSpace> {
    if let Some(m) = &params.space {
        return m.generate(rng);
    }
    for _ in 0..64 {
        let s = if rng.gen_bool(0.5) {
            FilteredSpace::dyadic(rng.gen_range(0..=2), &MassRule::Uniform)?
        } else {
            let levels = rng.gen_range(1..=3);
            random_tree(rng, levels)?
        };
        if count_stopping_times(&s) <= 26 {
            return Ok(s);
        }
    }
    FilteredSpace::dyadic(rng.gen_range(0..=2), &MassRule::Uniform)
}

fn random_sequence(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.gen_range(1..=64);
    match rng.gen_range(0..4) {
        // Geometric decay makes the tail sums nearly proportional to the terms.
        0 => {
            let r: f64 = rng.gen_range(0.1..1.0);
            (0..n).map(|k| r.powi(k as i32)).collect()
        }
        1 => {
            let r: f64 = rng.gen_range(1.0..1.5);
            (0..n).map(|k| r.powi(k as i32)).collect()
        }
        _ => random_function(n, rng),
    }
}

/// Builds the instance of trial `trial`.
pub fn generate_instance(suite: SuiteName, params: &SuiteParams, seed: u64, trial: u64) -> Result<Instance> {
    let mut rng = trial_rng(seed, trial);
    let mut inst = Instance {
        suite,
        trial,
        seed: rng.gen(),
        space: None,
        weight: None,
        sigma: None,
        alpha: None,
        family: None,
        functions: Vec::new(),
        sequence: None,
        root: None,
        exponents: exponents_for(suite, params, trial)?,
    };
    let rng = &mut rng;
    match suite {
        SuiteName::PowerSum => inst.sequence = Some(random_sequence(rng)),
        SuiteName::Identities => {
            let space = space_for(params, rng, 5)?;
            let n = space.num_atoms();
            inst.weight = Some(weight_for(params, &space, rng)?);
            inst.functions = vec![random_function(n, rng), random_function(n, rng)];
            inst.family = Some(random_family(&space, rng, 0.2));
            inst.alpha = Some(alpha_for(params, &space, rng, trial)?);
            inst.space = Some(space);
        }
        SuiteName::TailIntegrals => {
            let space = space_for(params, rng, 5)?;
            inst.alpha = Some(alpha_for(params, &space, rng, trial)?);
            inst.weight = Some(weight_for(params, &space, rng)?);
            inst.space = Some(space);
        }
        SuiteName::CarlesonEmbedding => {
            let space = space_for(params, rng, 4)?;
            inst.family = Some(random_family(&space, rng, 0.4));
            inst.space = Some(space);
        }
        SuiteName::WeightedEmbedding => {
            let space = space_for(params, rng, 4)?;
            inst.family = Some(random_family(&space, rng, 0.4));
            inst.weight = Some(weight_for(params, &space, rng)?);
            inst.space = Some(space);
        }
        SuiteName::MaximalTesting => {
            let space = space_for(params, rng, 4)?;
            inst.alpha = Some(alpha_for(params, &space, rng, trial)?);
            inst.weight = Some(weight_for(params, &space, rng)?);
            inst.sigma = Some(weight_for(params, &space, rng)?);
            inst.space = Some(space);
        }
        SuiteName::ApTesting | SuiteName::ApMaximal => {
            let space = space_for(params, rng, 5)?;
            inst.weight = Some(match (&params.weight, trial % 4) {
                (None, 3) => super::generate::power_weight(&space, rng.gen_range(-0.9..1.5))?,
                _ => weight_for(params, &space, rng)?,
            });
            inst.space = Some(space);
        }
        SuiteName::MixedBound => {
            let p = need_f64(inst.exponents[0].p, "p")?;
            if params.weight.is_none() && trial % 6 == 5 {
                let space = match &params.space {
                    Some(m) => m.generate(rng)?,
                    None => FilteredSpace::dyadic(rng.gen_range(2..=6), &MassRule::Uniform)?,
                };
                // Exponents in (-1, p - 1), reaching close to both ends.
                let delta = -1.0 + p * rng.gen_range(0.02..0.999);
                inst.weight = Some(super::generate::power_weight(&space, delta)?);
                inst.space = Some(space);
            } else {
                let space = space_for(params, rng, 6)?;
                inst.weight = Some(weight_for(params, &space, rng)?);
                inst.space = Some(space);
            }
        }
        SuiteName::TraceTesting | SuiteName::WolffCharacterization => {
            let space = space_for(params, rng, 4)?;
            inst.alpha = Some(comparable_alpha_for(params, &space, rng, trial)?);
            inst.weight = Some(weight_for(params, &space, rng)?);
            inst.space = Some(space);
        }
        SuiteName::CarlesonEquivalence => {
            let space = small_space(params, rng)?;
            inst.family = Some(random_family(&space, rng, 0.4));
            inst.alpha = Some(AlphaModel::Sparse { density: 0.7 }.generate(&space, rng)?);
            inst.weight = Some(weight_for(params, &space, rng)?);
            inst.sigma = Some(weight_for(params, &space, rng)?);
            inst.space = Some(space);
        }
        SuiteName::PrincipalSets => {
            let space = space_for(params, rng, 5)?;
            let sigma = match (&params.weight, trial % 3) {
                (None, 0) => random_function(space.num_atoms(), rng),
                (None, 1) => WeightModel::Spikes {
                    count: rng.gen_range(1..=3),
                    height: rng.gen_range(2.0..50.0),
                }
                .generate(&space, rng)?,
                _ => weight_for(params, &space, rng)?,
            };
            let eligible: Vec<MeasurableSet> = (0..space.num_levels())
                .flat_map(|i| (0..space.num_blocks(i)).map(move |b| MeasurableSet::block(i, b)))
                .filter(|set| set.atoms(&space).iter().any(|&a| sigma[a] > 0.0))
                .collect();
            if eligible.is_empty() {
                return Err(LabError::DegenerateInput("sigma vanishes identically".into()));
            }
            inst.root = Some(eligible[rng.gen_range(0..eligible.len())].clone());
            inst.sigma = Some(sigma);
            inst.space = Some(space);
        }
    }
    Ok(inst)
}

// ---------------------------------------------------------------------------
// Evaluation

/// Evaluates every check of an instance. Pure in the instance.
pub fn evaluate(inst: &Instance) -> Result<Vec<Check>> {
    let mut c = Checks(Vec::new());
    match inst.suite {
        SuiteName::Identities => eval_identities(inst, &mut c)?,
        SuiteName::PowerSum => {
            let a = need(&inst.sequence, "sequence")?;
            if inst.exponents.is_empty() {
                return Err(LabError::param("instance has no exponents"));
            }
            for e in &inst.exponents {
                let s = need_f64(e.s, "s")?;
                if !(s > 0.0) || a.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                    return Err(LabError::param("power sums need s > 0 and a finite nonnegative sequence"));
                }
                let sides = power_sum_sides(a, s);
                c.le(format!("power sum s={s}"), sides.lhs, sides.rhs);
            }
        }
        SuiteName::TailIntegrals => eval_tail_integrals(inst, &mut c)?,
        SuiteName::CarlesonEmbedding => eval_carleson_embedding(inst, &mut c)?,
        SuiteName::WeightedEmbedding => eval_weighted_embedding(inst, &mut c)?,
        SuiteName::MaximalTesting => eval_maximal_testing(inst, &mut c)?,
        SuiteName::ApTesting => eval_ap_testing(inst, &mut c)?,
        SuiteName::ApMaximal => eval_ap_maximal(inst, &mut c)?,
        SuiteName::MixedBound => eval_mixed_bound(inst, &mut c)?,
        SuiteName::TraceTesting => eval_trace_testing(inst, &mut c)?,
        SuiteName::WolffCharacterization => eval_wolff(inst, &mut c)?,
        SuiteName::CarlesonEquivalence => eval_carleson_equivalence(inst, &mut c)?,
        SuiteName::PrincipalSets => {
            let space = need(&inst.space, "space")?;
            let sigma = need(&inst.sigma, "sigma")?;
            let root = need(&inst.root, "root")?;
            principal_checks(space, sigma, root, &mut c)?;
        }
    }
    Ok(c.0)
}

fn eval_identities(inst: &Instance, c: &mut Checks) -> Result<()> {
    let space = need(&inst.space, "space")?;
    let w = need(&inst.weight, "weight")?;
    let h = need(&inst.family, "family")?;
    let alpha = need(&inst.alpha, "alpha")?;
    let [f, g] = inst.functions.as_slice() else {
        return Err(LabError::Schema("identities need two functions".into()));
    };
    let levels = space.num_levels();
    let all: Vec<Vec<f64>> = (0..levels).map(|i| cond_exp(space, i, f)).collect();
    let mut self_adj = 0.0_f64;
    let mut tower = 0.0_f64;
    let mut pull = 0.0_f64;
    let mut weighted = 0.0_f64;
    let mut weighted_int = 0.0_f64;
    let mut martingale = 0.0_f64;
    for i in 0..levels {
        let eg = cond_exp(space, i, g);
        let prod = |x: &[f64], y: &[f64]| integral(space, &x.iter().zip(y).map(|(a, b)| a * b).collect::<Vec<_>>());
        self_adj = self_adj.max(rel_err(prod(&all[i], g), prod(f, &eg)));
        for j in i..levels {
            tower = tower.max(max_rel_err(&cond_exp(space, i, &all[j]), &all[i]));
            tower = tower.max(max_rel_err(&cond_exp(space, j, &all[i]), &all[i]));
        }
        if i + 1 < levels {
            martingale = martingale.max(max_rel_err(&cond_exp(space, i, &all[i + 1]), &all[i]));
        }
        let hi = h.atom_values(space, i);
        let hf: Vec<f64> = hi.iter().zip(f).map(|(a, b)| a * b).collect();
        let rhs: Vec<f64> = hi.iter().zip(&all[i]).map(|(a, b)| a * b).collect();
        pull = pull.max(max_rel_err(&cond_exp(space, i, &hf), &rhs));
        let gw: Vec<f64> = g.iter().zip(w).map(|(a, b)| a * b).collect();
        let ratio: Vec<f64> = cond_exp(space, i, &gw).iter().zip(cond_exp(space, i, w)).map(|(a, b)| a / b).collect();
        let ewg = cond_exp_weighted(space, i, g, w)?;
        weighted = weighted.max(max_rel_err(&ratio, &ewg));
        let ewgw: Vec<f64> = ewg.iter().zip(w).map(|(a, b)| a * b).collect();
        for b in 0..space.num_blocks(i) {
            weighted_int = weighted_int.max(rel_err(space.block_integral(i, b, &ewgw), space.block_integral(i, b, &gw)));
        }
    }
    c.identity("self-adjointness", self_adj);
    c.identity("tower rule", tower);
    c.identity("pull-out", pull);
    c.identity("weighted conditional expectation", weighted.max(weighted_int));
    c.identity("martingale property", martingale);
    // Adjoint of the positive operator and duality of the weight characteristics.
    let tf = pos_op(space, alpha, f);
    let tg = pos_op(space, alpha, g);
    let lhs = integral(space, &tf.iter().zip(g).map(|(a, b)| a * b).collect::<Vec<_>>());
    let rhs = integral(space, &tg.iter().zip(f).map(|(a, b)| a * b).collect::<Vec<_>>());
    c.identity("positive operator adjoint", rel_err(lhs, rhs));
    for p in [1.5, 2.0, 3.0] {
        let pp = conjugate(p)?;
        let sigma: Vec<f64> = w.iter().map(|v| v.powf(1.0 - pp)).collect();
        let a = ap_constant(space, w, p)?.value;
        let b = ap_constant(space, &sigma, pp)?.value.powf(p - 1.0);
        c.identity(format!("weight duality p={p}"), rel_err(a, b));
    }
    Ok(())
}

fn eval_tail_integrals(inst: &Instance, c: &mut Checks) -> Result<()> {
    let space = need(&inst.space, "space")?;
    let alpha = need(&inst.alpha, "alpha")?;
    let w = need(&inst.weight, "weight")?;
    let s = need_f64(inst.exponents.first().and_then(|e| e.s), "s")?;
    let t = tail_integrals(space, alpha, w, s)?;
    let sp = tracked::conj(s);
    c.le("holder A2 <= A1^(1/s) A3^(1/s')", t.a2, t.a1.powf(1.0 / s) * t.a3.powf(1.0 / sp));
    c.le("doob A3 <= (s')^s A1", t.a3, tracked::sup_tail_factor(s) * t.a1);
    c.le("mixed A2 <= (s')^(s-1) A1", t.a2, tracked::mixed_tail_factor(s) * t.a1);
    c.le("power sums A1 <= K(s) A2", t.a1, tracked::power_sum_factor(s) * t.a2);
    c.report("ratio A1/A2", t.a1, t.a2);
    c.report("ratio A2/A1", t.a2, t.a1);
    c.report("ratio A3/A1", t.a3, t.a1);
    c.report("ratio A1/A3", t.a1, t.a3);
    Ok(())
}

/// Indicator families `1_B` on levels `j >= i` for every block `B` of `P_i`.
fn indicator_families(space: &FilteredSpace) -> Vec<AdaptedFamily> {
    let mut out = Vec::new();
    for i in 0..space.num_levels() {
        for b in 0..space.num_blocks(i) {
            let ind = MeasurableSet::block(i, b).indicator(space);
            let mut fam = AdaptedFamily::zeros(space);
            for j in i..space.num_levels() {
                for (bb, v) in fam.levels[j].iter_mut().enumerate() {
                    if ind[space.block_atoms(j, bb)[0]] {
                        *v = 1.0;
                    }
                }
            }
            out.push(fam);
        }
    }
    out
}

fn family_max(space: &FilteredSpace, f: &AdaptedFamily) -> Vec<f64> {
    (0..space.num_atoms())
        .map(|a| (0..space.num_levels()).map(|j| f.at(space, j, a)).fold(0.0, f64::max))
        .collect()
}

fn test_families(space: &FilteredSpace, seed: u64) -> Vec<AdaptedFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fams = indicator_families(space);
    for _ in 0..8 {
        fams.push(random_family(space, &mut rng, 0.3));
    }
    fams
}

fn eval_carleson_embedding(inst: &Instance, c: &mut Checks) -> Result<()> {
    let space = need(&inst.space, "space")?;
    let nu = need(&inst.family, "family")?;
    let fams = test_families(space, inst.seed);
    let maxes: Vec<Vec<f64>> = fams.iter().map(|f| family_max(space, f)).collect();
    for e in &inst.exponents {
        let p = need_f64(e.p, "p")?;
        let theta = need_f64(e.theta, "theta")?;
        let c0 = carleson_constant(space, nu, theta)?.value;
        let pt = p * theta;
        let mut cp = 0.0_f64;
        for (f, fmax) in fams.iter().zip(&maxes) {
            let den = lp_norm(space, fmax, p, None)?;
            if den == 0.0 {
                continue;
            }
            let mut num = 0.0;
            for (fl, nl) in f.levels.iter().zip(&nu.levels) {
                for (&v, &m) in fl.iter().zip(nl) {
                    if v > 0.0 {
                        num += v.powf(pt) * m;
                    }
                }
            }
            cp = cp.max(num.powf(1.0 / pt) / den);
        }
        c.le(format!("embedding p={p} theta={theta}"), cp, tracked::carleson_embedding(c0, theta, p));
        c.le(format!("indicator extraction p={p} theta={theta}"), c0, cp.powf(pt));
    }
    Ok(())
}

fn eval_weighted_embedding(inst: &Instance, c: &mut Checks) -> Result<()> {
    let space = need(&inst.space, "space")?;
    let wfam = need(&inst.family, "family")?;
    let w = need(&inst.weight, "weight")?;
    let mut rng = ChaCha8Rng::seed_from_u64(inst.seed);
    let random: Vec<AdaptedFamily> = (0..8).map(|_| random_family(space, &mut rng, 0.3)).collect();
    let density = carleson_qlp_density(space, wfam, w)?;
    for e in &inst.exponents {
        let q = need_f64(e.q, "q")?;
        let theta = need_f64(e.theta, "theta")?;
        let c0 = carleson_qlp_constant(space, wfam, w, theta)?.value;
        let ratio = |f: &AdaptedFamily| -> Result<f64> {
            let den = lp_norm(space, &family_max(space, f), q * theta, Some(w))?;
            if den == 0.0 {
                return Ok(0.0);
            }
            let mut num = 0.0;
            for i in 0..space.num_levels() {
                for b in 0..space.num_blocks(i) {
                    let v = f.levels[i][b];
                    if v > 0.0 {
                        num += v.powf(q) * space.block_integral(i, b, &wfam.atom_values(space, i));
                    }
                }
            }
            Ok(num.powf(1.0 / q) / den)
        };
        let mut cq = 0.0_f64;
        for f in &random {
            cq = cq.max(ratio(f)?);
        }
        c.le(format!("weighted embedding q={q} theta={theta}"), cq, tracked::weighted_embedding(c0, q));
        // f_i = (E^w_i g)^{1/q} with g = S^{theta' - 1}.
        let tp = tracked::conj(theta);
        let g: Vec<f64> = density.iter().map(|v| v.powf(tp - 1.0)).collect();
        let levels = (0..space.num_levels())
            .map(|i| {
                let gw: Vec<f64> = g.iter().zip(w).map(|(a, b)| a * b).collect();
                let num = block_averages(space, i, &gw);
                let den = block_averages(space, i, w);
                num.iter().zip(den).map(|(n, d)| (n / d).powf(1.0 / q)).collect()
            })
            .collect();
        let r = ratio(&AdaptedFamily { levels })?;
        c.le(
            format!("weighted embedding converse q={q} theta={theta}"),
            c0,
            tracked::weighted_embedding_converse(theta) * r.powf(q),
        );
    }
    Ok(())
}

fn eval_maximal_testing(inst: &Instance, c: &mut Checks) -> Result<()> {
    let space = need(&inst.space, "space")?;
    let alpha = need(&inst.alpha, "alpha")?;
    let u = need(&inst.weight, "weight")?;
    let sigma = need(&inst.sigma, "sigma")?;
    let e = inst.exponents.first().copied().unwrap_or_default();
    let (p, q) = (need_f64(e.p, "p")?, need_f64(e.q, "q")?);
    let v: Vec<f64> = sigma.iter().map(|s| s.powf(1.0 - p)).collect();
    let c2 = sawyer_max_constant(space, alpha, u, sigma, p, q)?.value;
    let problem = NormProblem {
        space,
        op: Operator::Maximal { alpha: alpha.clone() },
        p,
        q,
        src: Some(v),
        dst: Some(u.clone()),
    };
    let opts = NormOptions {
        dual_indicators: true,
        seed: inst.seed,
        ..NormOptions::default()
    };
    let est = norm_lower_bound(&problem, &opts)?;
    c.le(format!("testing constant below norm p={p} q={q}"), c2, est.lower);
    c.le(
        format!("norm below tracked bound p={p} q={q}"),
        est.lower,
        tracked::maximal_testing_factor(p, q) * c2,
    );
    // Dyadic decomposition of the level sets of the witness.
    let f = &est.witness.values;
    let m = gen_max(space, alpha, f);
    let pieces = sawyer_decomposition(space, alpha, f)?;
    let mut seen = vec![0usize; space.num_atoms()];
    let mut bad = 0;
    for piece in &pieces {
        let lo = 2f64.powi(piece.j);
        let ef = cond_exp(space, piece.level, f);
        for &a in &piece.atoms {
            seen[a] += 1;
            let local = alpha.at(space, piece.level, a) * ef[a];
            if !(m[a] > lo && m[a] <= 2.0 * lo && local > lo) {
                bad += 1;
            }
        }
    }
    bad += (0..space.num_atoms()).filter(|&a| seen[a] != usize::from(m[a] > 0.0)).count();
    c.none("level-set decomposition", bad);
    Ok(())
}

fn dual_weight(w: &[f64], p: f64) -> Result<Vec<f64>> {
    let pp = conjugate(p)?;
    Ok(w.iter().map(|v| v.powf(1.0 - pp)).collect())
}

fn eval_ap_testing(inst: &Instance, c: &mut Checks) -> Result<()> {
    let space = need(&inst.space, "space")?;
    let w = need(&inst.weight, "weight")?;
    let p = need_f64(inst.exponents.first().and_then(|e| e.p), "p")?;
    let sigma = dual_weight(w, p)?;
    let ones = AdaptedFamily::ones(space);
    let c1 = ap_constant(space, w, p)?.value;
    let c2 = sawyer_max_constant(space, &ones, w, &sigma, p, p)?.value;
    c.le(format!("A_p below testing constant p={p}"), c1, c2.powf(p));
    c.le(
        format!("testing constant below tracked bound p={p}"),
        c2,
        tracked::ap_testing_factor(p) * c1.powf(1.0 / (p - 1.0)),
    );
    let local = cor43_test_constant(space, &ones, w, &sigma, p)?.value;
    c.identity(format!("pointwise and block testing agree p={p}"), rel_err(local, c2));
    Ok(())
}

fn maximal_norm_estimate(space: &FilteredSpace, w: &[f64], p: f64, seed: u64) -> Result<f64> {
    let problem = NormProblem {
        space,
        op: Operator::Maximal {
            alpha: AdaptedFamily::ones(space),
        },
        p,
        q: p,
        src: Some(w.to_vec()),
        dst: Some(w.to_vec()),
    };
    let opts = NormOptions {
        dual_indicators: true,
        seed,
        ..NormOptions::default()
    };
    Ok(norm_lower_bound(&problem, &opts)?.lower)
}

fn eval_ap_maximal(inst: &Instance, c: &mut Checks) -> Result<()> {
    let space = need(&inst.space, "space")?;
    let w = need(&inst.weight, "weight")?;
    let p = need_f64(inst.exponents.first().and_then(|e| e.p), "p")?;
    let sigma = dual_weight(w, p)?;
    let ap = ap_constant(space, w, p)?.value;
    let lower = maximal_norm_estimate(space, w, p, inst.seed)?;
    c.le(
        format!("maximal norm below tracked bound p={p}"),
        lower,
        tracked::ap_maximal_factor(p) * ap.powf(1.0 / (p - 1.0)),
    );
    c.le(format!("A_p below maximal norm p={p}"), ap, lower.powf(p));
    c.le(format!("A_inf below A_p p={p}"), ainfty_constant(space, w)?.value, ap);
    let dual = ap_constant(space, &sigma, tracked::conj(p))?.value;
    c.identity(format!("A_p duality p={p}"), rel_err(ap, dual.powf(p - 1.0)));
    Ok(())
}

fn eval_mixed_bound(inst: &Instance, c: &mut Checks) -> Result<()> {
    let space = need(&inst.space, "space")?;
    let w = need(&inst.weight, "weight")?;
    let p = need_f64(inst.exponents.first().and_then(|e| e.p), "p")?;
    let sigma = dual_weight(w, p)?;
    let ap = ap_constant(space, w, p)?.value;
    let ainf = ainfty_constant(space, &sigma)?.value;
    let factor = tracked::mixed_core_factor(p);
    let mut worst: Option<(f64, f64)> = None;
    let mut violations = [0usize; 5];
    for i in 0..space.num_levels() {
        for b in 0..space.num_blocks(i) {
            let root = MeasurableSet::block(i, b);
            let ind = root.indicator(space);
            let masked: Vec<f64> = sigma.iter().zip(&ind).map(|(&s, &k)| if k { s } else { 0.0 }).collect();
            let mut sup = vec![0.0_f64; space.num_atoms()];
            for j in i..space.num_levels() {
                for (a, v) in cond_exp(space, j, &masked).into_iter().enumerate() {
                    sup[a] = sup[a].max(v);
                }
            }
            let integrand: Vec<f64> = (0..space.num_atoms())
                .map(|a| if ind[a] { sup[a].powf(p) * w[a] } else { 0.0 })
                .collect();
            let lhs = integral(space, &integrand);
            let rhs = factor * ap * ainf * space.block_integral(i, b, &sigma);
            if worst.map_or(true, |(l, r)| lhs * r > l * rhs) {
                worst = Some((lhs, rhs));
            }
            let tree = principal_sets(space, &sigma, &root, i)?;
            let props = check_principal_properties(space, &sigma, &tree, i);
            for (k, ok) in [props.disjoint_cover, props.measurable, props.stopped_mass, props.band, props.stopped_sup]
                .into_iter()
                .enumerate()
            {
                violations[k] += usize::from(!ok);
            }
        }
    }
    for (name, v) in PROPERTY_NAMES.iter().zip(violations) {
        c.none(*name, v);
    }
    let (lhs, rhs) = worst.expect("every space has a block");
    c.le(format!("core local bound p={p}"), lhs, rhs);
    let lower = maximal_norm_estimate(space, w, p, inst.seed)?;
    c.le(
        format!("maximal norm below mixed bound p={p}"),
        lower,
        tracked::mixed_maximal_factor(p) * (ap * ainf).powf(1.0 / p),
    );
    let ap_dual = ap_constant(space, &sigma, tracked::conj(p))?.value;
    c.report(format!("norm against mixed characteristic p={p}"), lower, (ap * ainf).powf(1.0 / p));
    c.report(format!("norm against classical characteristic p={p}"), lower, (ap * ap_dual).powf(1.0 / p));
    Ok(())
}

const PROPERTY_NAMES: [&str; 5] = [
    "principal sets: disjoint cover",
    "principal sets: measurability",
    "principal sets: stopped mass",
    "principal sets: average band",
    "principal sets: stopped supremum",
];

fn principal_checks(space: &FilteredSpace, sigma: &[f64], root: &MeasurableSet, c: &mut Checks) -> Result<()> {
    let tree = principal_sets(space, sigma, root, root.level)?;
    let props = check_principal_properties(space, sigma, &tree, root.level);
    for (name, ok) in PROPERTY_NAMES
        .iter()
        .zip([props.disjoint_cover, props.measurable, props.stopped_mass, props.band, props.stopped_sup])
    {
        c.none(*name, usize::from(!ok));
    }
    c.report("principal sets: generations", tree.generations() as f64, space.num_levels() as f64);
    Ok(())
}

fn eval_trace_testing(inst: &Instance, c: &mut Checks) -> Result<()> {
    let space = need(&inst.space, "space")?;
    let alpha = need(&inst.alpha, "alpha")?;
    let w = need(&inst.weight, "weight")?;
    let e = inst.exponents.first().copied().unwrap_or_default();
    let (p, q) = (need_f64(e.p, "p")?, need_f64(e.q, "q")?);
    let ratio = condition15_ratio(space, alpha)?.value;
    let c2 = sawyer_trace_constant(space, alpha, w, p, q)?.value;
    let opts = NormOptions {
        seed: inst.seed,
        ..NormOptions::default()
    };
    let (primal, dual) = duality_gap(space, alpha, w, p, q, &opts)?;
    let lower = primal.lower.max(dual.lower);
    c.le(format!("testing constant below dual norm p={p} q={q}"), c2, dual.lower);
    if ratio.is_finite() {
        c.le(
            format!("norm below tracked bound p={p} q={q}"),
            lower,
            tracked::trace_testing_factor(p, q, ratio) * c2,
        );
    } else {
        c.report(format!("norm against testing constant p={p} q={q}"), lower, c2);
    }
    c.report(format!("primal against dual estimate p={p} q={q}"), primal.lower, dual.lower);
    c.report(format!("dual against primal estimate p={p} q={q}"), dual.lower, primal.lower);
    Ok(())
}

fn eval_wolff(inst: &Instance, c: &mut Checks) -> Result<()> {
    let space = need(&inst.space, "space")?;
    let alpha = need(&inst.alpha, "alpha")?;
    let w = need(&inst.weight, "weight")?;
    let e = inst.exponents.first().copied().unwrap_or_default();
    let (p, q) = (need_f64(e.p, "p")?, need_f64(e.q, "q")?);
    let s = conjugate(p)?;
    let ratio = condition15_ratio(space, alpha)?.value;
    let wolff = wolff_norm(space, alpha, w, p, q)?;
    let opts = NormOptions {
        seed: inst.seed,
        ..NormOptions::default()
    };
    let positive = Operator::Positive {
        alpha: alpha.clone(),
        pre: None,
    };
    let primal = norm_lower_bound(
        &NormProblem {
            space,
            op: positive.clone(),
            p,
            q,
            src: None,
            dst: Some(w.clone()),
        },
        &opts,
    )?;
    // Reweighted measure v = w / W^{p-1}, zero where the potential vanishes.
    let pot = wolff_potential(space, alpha, w, p)?;
    let v: Vec<f64> = pot
        .iter()
        .zip(w)
        .map(|(&pw, &wa)| if pw > 0.0 { wa / pw.powf(p - 1.0) } else { 0.0 })
        .collect();
    let reweighted = norm_lower_bound(
        &NormProblem {
            space,
            op: positive,
            p,
            q: p,
            src: None,
            dst: Some(v),
        },
        &opts,
    )?;
    let dual = if q > 1.0 {
        let qq = conjugate(q)?;
        // g = S^{1/(q'-p')}, S = sum_i alpha_i (c E_i bar alpha_i)^{s-1} (E_i w)^{s-1}.
        let tails = tail_sums(space, alpha);
        let mut dens = vec![0.0; space.num_atoms()];
        if ratio.is_finite() {
            for i in 0..space.num_levels() {
                let et = cond_exp(space, i, &tails.levels[i]);
                let ew = cond_exp(space, i, w);
                for (a, d) in dens.iter_mut().enumerate() {
                    let al = alpha.at(space, i, a);
                    if al > 0.0 {
                        *d += al * (ratio * et[a] * ew[a]).powf(s - 1.0);
                    }
                }
            }
        }
        let g: Vec<f64> = dens.iter().map(|d| d.powf(1.0 / (qq - s))).collect();
        let dual_opts = NormOptions {
            extra: vec![g],
            ..opts.clone()
        };
        Some(norm_lower_bound(
            &NormProblem {
                space,
                op: Operator::Positive {
                    alpha: alpha.clone(),
                    pre: Some(w.clone()),
                },
                p: qq,
                q: s,
                src: Some(w.clone()),
                dst: None,
            },
            &dual_opts,
        )?)
    } else {
        None
    };
    let lower = primal.lower.max(dual.as_ref().map_or(0.0, |d| d.lower));
    if ratio.is_finite() {
        let k = tracked::wolff_weight_factor(p, ratio);
        c.le(format!("reweighted norm below tracked bound p={p}"), reweighted.lower, k);
        c.le(format!("norm below tracked multiple of potential p={p} q={q}"), lower, k * wolff);
        match &dual {
            Some(d) => {
                let bound = tracked::wolff_converse_factor(p, q, ratio) * d.lower;
                let check = c.le(format!("potential below tracked multiple of norm p={p} q={q}"), wolff, bound);
                check.flagged = wolff >= 0.95 * bound;
            }
            None => c.report(format!("potential against norm p={p} q={q}"), wolff, lower),
        }
    } else {
        c.report(format!("norm against potential p={p} q={q}"), lower, wolff);
    }
    Ok(())
}

fn eval_carleson_equivalence(inst: &Instance, c: &mut Checks) -> Result<()> {
    let space = need(&inst.space, "space")?;
    let nu = need(&inst.family, "family")?;
    let alpha = need(&inst.alpha, "alpha")?;
    let w = need(&inst.weight, "weight")?;
    let sigma = need(&inst.sigma, "sigma")?;
    let e = inst.exponents.first().copied().unwrap_or_default();
    let theta = need_f64(e.theta, "theta")?;
    let (p, q) = (need_f64(e.p, "p")?, need_f64(e.q, "q")?);
    let blocks = carleson_constant(space, nu, theta)?.value;
    let stopping = carleson_constant_stopping(space, nu, theta, 26)?.value;
    c.identity(format!("stopping times and blocks agree theta={theta}"), rel_err(blocks, stopping));
    let small = (0..space.num_levels()).all(|i| space.num_blocks(i) <= EXHAUSTIVE_MAX_BLOCKS);
    if small {
        let ex = carleson_constant_with(space, nu, theta, SetMode::Exhaustive)?.value;
        c.identity(format!("unions and blocks agree theta={theta}"), rel_err(blocks, ex));
        let a = sawyer_trace_constant(space, alpha, w, p, q)?.value;
        let b = sawyer_trace_constant_with(space, alpha, w, p, q, SetMode::Exhaustive)?.value;
        c.identity("trace testing: unions and blocks agree", rel_err(a, b));
        let a = sawyer_max_constant(space, alpha, w, sigma, p, q)?.value;
        let b = sawyer_max_constant_with(space, alpha, w, sigma, p, q, SetMode::Exhaustive)?.value;
        c.identity("maximal testing: unions and blocks agree", rel_err(a, b));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Driver

/// Worst observed `lhs / rhs` of one named check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extreme {
    pub name: String,
    pub kind: CheckKind,
    #[serde(with = "crate::json::num")]
    pub ratio: f64,
    #[serde(with = "crate::json::num")]
    pub lhs: f64,
    #[serde(with = "crate::json::num")]
    pub rhs: f64,
    pub trial: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SuiteResult {
    pub suite: SuiteName,
    pub trials: u64,
    pub seed: u64,
    pub passed: bool,
    /// Asserted checks evaluated over all trials.
    pub asserted: usize,
    pub failed_trials: Vec<u64>,
    pub flagged_trials: Vec<u64>,
    pub extremes: Vec<Extreme>,
    /// Payloads of the first [`MAX_PAYLOADS`] failing trials.
    pub failures: Vec<FailurePayload>,
}

pub const MAX_PAYLOADS: usize = 20;

/// Generates and evaluates one trial.
pub fn run_trial(suite: SuiteName, params: &SuiteParams, seed: u64, trial: u64) -> Result<(Instance, Vec<Check>)> {
    let inst = generate_instance(suite, params, seed, trial)?;
    let checks = evaluate(&inst)?;
    Ok((inst, checks))
}

/// Runs `trials` trials on `workers` threads (0 = all cores). The result does
/// not depend on `workers`.
pub fn run_suite(suite: SuiteName, params: &SuiteParams, trials: u64, seed: u64, workers: usize) -> Result<SuiteResult> {
    exponents_for(suite, params, 0)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| LabError::param(e.to_string()))?;
    let outcomes: Vec<Result<(Instance, Vec<Check>)>> =
        pool.install(|| (0..trials).into_par_iter().map(|t| run_trial(suite, params, seed, t)).collect());
    let mut result = SuiteResult {
        suite,
        trials,
        seed,
        passed: true,
        asserted: 0,
        failed_trials: Vec::new(),
        flagged_trials: Vec::new(),
        extremes: Vec::new(),
        failures: Vec::new(),
    };
    for outcome in outcomes {
        let (inst, checks) = outcome?;
        let mut failed = false;
        for ch in &checks {
            if ch.kind == CheckKind::Assert {
                result.asserted += 1;
                failed |= !ch.holds;
            }
            let r = ch.ratio();
            match result.extremes.iter_mut().find(|x| x.name == ch.name) {
                Some(x) => {
                    if r > x.ratio {
                        *x = Extreme {
                            name: ch.name.clone(),
                            kind: ch.kind,
                            ratio: r,
                            lhs: ch.lhs,
                            rhs: ch.rhs,
                            trial: inst.trial,
                        };
                    }
                }
                None => result.extremes.push(Extreme {
                    name: ch.name.clone(),
                    kind: ch.kind,
                    ratio: r,
                    lhs: ch.lhs,
                    rhs: ch.rhs,
                    trial: inst.trial,
                }),
            }
        }
        if checks.iter().any(|ch| ch.flagged) {
            result.flagged_trials.push(inst.trial);
        }
        if failed {
            result.passed = false;
            result.failed_trials.push(inst.trial);
            if result.failures.len() < MAX_PAYLOADS {
                result.failures.push(FailurePayload::new(inst, checks)?);
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for n in SuiteName::ALL {
            assert_eq!(n.id().parse::<SuiteName>().unwrap(), n);
            assert_eq!(serde_json::to_string(&n).unwrap(), format!("\"{}\"", n.id()));
        }
        assert!(matches!("nope".parse::<SuiteName>(), Err(LabError::UnknownSuite(_))));
    }

    #[test]
    fn empty_suite_passes() {
        let r = run_suite(SuiteName::TailIntegrals, &SuiteParams::default(), 0, 1, 1).unwrap();
        assert!(r.passed && r.asserted == 0);
    }

    #[test]
    fn every_suite_passes_a_few_trials() {
        for n in SuiteName::ALL {
            let r = run_suite(n, &SuiteParams::default(), 6, 3, 0).unwrap();
            assert!(r.passed, "{n}: {:?}", r.failures.first().map(|f| &f.checks));
        }
    }

    #[test]
    fn out_of_range_exponents_are_rejected() {
        let params = SuiteParams {
            s: Some(0.5),
            ..SuiteParams::default()
        };
        assert!(matches!(run_suite(SuiteName::PowerSum, &params, 1, 0, 1), Err(LabError::Parameter(_))));
    }

    #[test]
    fn instances_round_trip_through_json() {
        for n in SuiteName::ALL {
            let inst = generate_instance(n, &SuiteParams::default(), 11, 4).unwrap();
            let text = serde_json::to_string(&inst).unwrap();
            let back: Instance = serde_json::from_str(&text).unwrap();
            assert_eq!(back, inst);
            assert_eq!(evaluate(&back).unwrap(), evaluate(&inst).unwrap());
        }
    }
}
