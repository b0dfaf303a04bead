//! Weight characteristics and testing constants.
//!
//! Every test constant is a maximum, over levels `i` and test sets `E` in
//! `F_i`, of a ratio whose numerator is additive over the blocks of `P_i`
//! and whose denominator is a measure raised to a power `>= 1` in the
//! stated exponent range. Single blocks therefore attain the supremum over
//! all finite unions, which is what [`SetMode::Blocks`] evaluates.
//! [`SetMode::Exhaustive`] enumerates unions for cross-checking.
//!
//! Ratio conventions: `0/0` contributes 0, `x/0` with `x > 0` is `+inf`.
//! Witnesses are the first maximizer in (level, block) order.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::operators::{self, block_averages, cond_exp, conjugate, tail_sums, AdaptedFamily};
use crate::space::{FilteredSpace, MeasurableSet, WeightVector};
use crate::stopping;

/// Per-level block masses of a family of measures `nu_i` on `F_i`.
pub type CarlesonFamily = AdaptedFamily;

/// Unions are enumerated only on levels with at most this many blocks.
pub const EXHAUSTIVE_MAX_BLOCKS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SetMode {
    #[default]
    Blocks,
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub level: usize,
    pub blocks: Vec<usize>,
    pub atom: Option<usize>,
}

impl Witness {
    fn block(level: usize, block: usize) -> Self {
        Witness {
            level,
            blocks: vec![block],
            atom: None,
        }
    }

    pub fn set(&self) -> MeasurableSet {
        MeasurableSet::new(self.level, self.blocks.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstantReport {
    pub value: f64,
    pub witness: Option<Witness>,
}

impl ConstantReport {
    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ReportJson {
    #[serde(with = "crate::json::num")]
    value: f64,
    witness_level: Option<usize>,
    witness_block: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    witness_blocks: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    witness_atom: Option<usize>,
}

impl Serialize for ConstantReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let w = self.witness.as_ref();
        ReportJson {
            value: self.value,
            witness_level: w.map(|w| w.level),
            witness_block: w.and_then(|w| w.blocks.first().copied()),
            witness_blocks: w.filter(|w| w.blocks.len() > 1).map(|w| w.blocks.clone()),
            witness_atom: w.and_then(|w| w.atom),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConstantReport {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = ReportJson::deserialize(d)?;
        let witness = j.witness_level.map(|level| Witness {
            level,
            blocks: j
                .witness_blocks
                .unwrap_or_else(|| j.witness_block.into_iter().collect()),
            atom: j.witness_atom,
        });
        Ok(ConstantReport {
            value: j.value,
            witness,
        })
    }
}

/// Tracks the first strict maximizer.
struct Argmax {
    best: f64,
    witness: Option<Witness>,
}

impl Argmax {
    fn new() -> Self {
        Argmax {
            best: f64::NEG_INFINITY,
            witness: None,
        }
    }

    fn offer(&mut self, value: f64, witness: impl FnOnce() -> Witness) {
        if value > self.best {
            self.best = value;
            self.witness = Some(witness());
        }
    }

    /// Empty maxima report 0 with the (0, 0) witness.
    fn finish(self) -> ConstantReport {
        match self.witness {
            Some(w) => ConstantReport {
                value: self.best,
                witness: Some(w),
            },
            None => ConstantReport {
                value: 0.0,
                witness: Some(Witness::block(0, 0)),
            },
        }
    }
}

fn test_ratio(num: f64, den: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
    if den <= 0.0 {
        if num <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        f(num, den)
    }
}

/// Additive per-block contributions `(numerator, denominator measure)` of one level.
type LevelParts = Vec<(f64, f64)>;

fn maximize_additive(
    space: &FilteredSpace,
    mode: SetMode,
    parts: &[LevelParts],
    ratio: impl Fn(f64, f64) -> f64,
) -> Result<ConstantReport> {
    let mut best = Argmax::new();
    for (i, level) in parts.iter().enumerate() {
        match mode {
            SetMode::Blocks => {
                for (b, &(n, d)) in level.iter().enumerate() {
                    best.offer(test_ratio(n, d, &ratio), || Witness::block(i, b));
                }
            }
            SetMode::Exhaustive => {
                let nb = space.num_blocks(i);
                if nb > EXHAUSTIVE_MAX_BLOCKS {
                    return Err(LabError::Capacity {
                        what: format!("exhaustive set enumeration at level {i}"),
                        requested: nb as u128,
                        limit: EXHAUSTIVE_MAX_BLOCKS as u128,
                    });
                }
                for mask in 1u32..(1u32 << nb) {
                    let (mut n, mut d) = (0.0, 0.0);
                    for (b, &(nb_, db)) in level.iter().enumerate() {
                        if mask & (1 << b) != 0 {
                            n += nb_;
                            d += db;
                        }
                    }
                    best.offer(test_ratio(n, d, &ratio), || Witness {
                        level: i,
                        blocks: (0..nb).filter(|b| mask & (1 << b) != 0).collect(),
                        atom: None,
                    });
                }
            }
        }
    }
    Ok(best.finish())
}

fn ratio_on_set(parts: &[LevelParts], set: &MeasurableSet, ratio: impl Fn(f64, f64) -> f64) -> f64 {
    let (n, d) = set.blocks.iter().fold((0.0, 0.0), |(n, d), &b| {
        let (pn, pd) = parts[set.level][b];
        (n + pn, d + pd)
    });
    test_ratio(n, d, ratio)
}

fn check_len(space: &FilteredSpace, v: &[f64], what: &str) -> Result<()> {
    if v.len() != space.num_atoms() {
        return Err(LabError::validation(
            0,
            format!("{what} has {} values, space has {} atoms", v.len(), space.num_atoms()),
        ));
    }
    Ok(())
}

fn require_positive(space: &FilteredSpace, w: &[f64]) -> Result<()> {
    if let Some(a) = w.iter().position(|&v| !(v > 0.0)) {
        let level = space.finest_level();
        return Err(LabError::DegenerateWeight {
            level,
            block: space.block_of(level, a),
        });
    }
    Ok(())
}

fn check_p_le_q(p: f64, q: f64) -> Result<()> {
    conjugate(p)?;
    if !(q.is_finite() && q >= p) {
        return Err(LabError::param(format!("need 1 < p <= q < inf, got p = {p}, q = {q}")));
    }
    Ok(())
}

/// `[w]_{A_p} = max_i max (E_i w)(E_i sigma)^{p-1}` with `sigma = w^{1-p'}`.
pub fn ap_constant(space: &FilteredSpace, w: &[f64], p: f64) -> Result<ConstantReport> {
    check_len(space, w, "weight")?;
    require_positive(space, w)?;
    let pp = conjugate(p)?;
    let sigma: Vec<f64> = w.iter().map(|&v| v.powf(1.0 - pp)).collect();
    let mut best = Argmax::new();
    for i in 0..space.num_levels() {
        let ew = block_averages(space, i, w);
        let es = block_averages(space, i, &sigma);
        for b in 0..space.num_blocks(i) {
            best.offer(ew[b] * es[b].powf(p - 1.0), || Witness::block(i, b));
        }
    }
    Ok(best.finish())
}

/// `[w]_{A_inf} = max_i max (E_i w) exp(-E_i log w)`.
pub fn ainfty_constant(space: &FilteredSpace, w: &[f64]) -> Result<ConstantReport> {
    check_len(space, w, "weight")?;
    require_positive(space, w)?;
    let logw: Vec<f64> = w.iter().map(|v| v.ln()).collect();
    let mut best = Argmax::new();
    for i in 0..space.num_levels() {
        let ew = block_averages(space, i, w);
        let el = block_averages(space, i, &logw);
        for b in 0..space.num_blocks(i) {
            best.offer(ew[b] * (-el[b]).exp(), || Witness::block(i, b));
        }
    }
    Ok(best.finish())
}

/// Smallest `c >= 1` with `c^{-1} bar alpha_i <= E_i bar alpha_i <= c bar alpha_i`.
pub fn condition15_ratio(space: &FilteredSpace, alpha: &AdaptedFamily) -> Result<ConstantReport> {
    alpha.validate(space)?;
    let tails = tail_sums(space, alpha);
    let mut best = Argmax::new();
    for i in 0..space.num_levels() {
        let avg = cond_exp(space, i, &tails.levels[i]);
        for a in 0..space.num_atoms() {
            let (t, e) = (tails.levels[i][a], avg[a]);
            let r = match (t > 0.0, e > 0.0) {
                (true, true) => (e / t).max(t / e),
                (false, false) => 1.0,
                _ => f64::INFINITY,
            };
            best.offer(r, || Witness {
                level: i,
                blocks: vec![space.block_of(i, a)],
                atom: Some(a),
            });
        }
    }
    Ok(best.finish())
}

fn trace_parts(space: &FilteredSpace, alpha: &AdaptedFamily, w: &[f64], p: f64) -> Result<Vec<LevelParts>> {
    let pp = conjugate(p)?;
    let n = space.num_atoms();
    let mut acc = vec![0.0; n];
    let mut parts = vec![Vec::new(); space.num_levels()];
    for i in (0..space.num_levels()).rev() {
        let ew = block_averages(space, i, w);
        for (a, s) in acc.iter_mut().enumerate() {
            let b = space.block_of(i, a);
            *s += alpha.levels[i][b] * ew[b];
        }
        let integrand: Vec<f64> = acc.iter().map(|v| v.powf(pp)).collect();
        parts[i] = (0..space.num_blocks(i))
            .map(|b| (space.block_integral(i, b, &integrand), space.block_integral(i, b, w)))
            .collect();
    }
    Ok(parts)
}

fn trace_ratio(p: f64, q: f64) -> impl Fn(f64, f64) -> f64 {
    let (pp, qq) = (p / (p - 1.0), q / (q - 1.0));
    move |n, d| n.powf(1.0 / pp) / d.powf(1.0 / qq)
}

/// Least `C` with `(int_E (sum_{j>=i} alpha_j E_j w)^{p'} dmu)^{1/p'} <= C [w dmu](E)^{1/q'}`.
pub fn sawyer_trace_constant(
    space: &FilteredSpace,
    alpha: &AdaptedFamily,
    w: &[f64],
    p: f64,
    q: f64,
) -> Result<ConstantReport> {
    sawyer_trace_constant_with(space, alpha, w, p, q, SetMode::Blocks)
}

pub fn sawyer_trace_constant_with(
    space: &FilteredSpace,
    alpha: &AdaptedFamily,
    w: &[f64],
    p: f64,
    q: f64,
    mode: SetMode,
) -> Result<ConstantReport> {
    check_p_le_q(p, q)?;
    alpha.validate(space)?;
    check_len(space, w, "weight")?;
    let parts = trace_parts(space, alpha, w, p)?;
    maximize_additive(space, mode, &parts, trace_ratio(p, q))
}

/// The Sawyer trace ratio on one test set.
pub fn sawyer_trace_ratio_at(
    space: &FilteredSpace,
    alpha: &AdaptedFamily,
    w: &[f64],
    p: f64,
    q: f64,
    set: &MeasurableSet,
) -> Result<f64> {
    check_p_le_q(p, q)?;
    set.validate(space)?;
    let parts = trace_parts(space, alpha, w, p)?;
    Ok(ratio_on_set(&parts, set, trace_ratio(p, q)))
}

fn max_parts(space: &FilteredSpace, alpha: &AdaptedFamily, u: &[f64], sigma: &[f64], q: f64) -> Vec<LevelParts> {
    let n = space.num_atoms();
    let mut acc = vec![0.0_f64; n];
    let mut parts = vec![Vec::new(); space.num_levels()];
    for i in (0..space.num_levels()).rev() {
        let es = block_averages(space, i, sigma);
        for (a, s) in acc.iter_mut().enumerate() {
            let b = space.block_of(i, a);
            *s = s.max(alpha.levels[i][b] * es[b]);
        }
        let integrand: Vec<f64> = acc.iter().zip(u).map(|(v, uu)| v.powf(q) * uu).collect();
        parts[i] = (0..space.num_blocks(i))
            .map(|b| (space.block_integral(i, b, &integrand), space.block_integral(i, b, sigma)))
            .collect();
    }
    parts
}

fn max_ratio(p: f64, q: f64) -> impl Fn(f64, f64) -> f64 {
    move |n, d| n.powf(1.0 / q) / d.powf(1.0 / p)
}

/// Least `C` with `(int_E (sup_{j>=i} alpha_j E_j sigma)^q u dmu)^{1/q} <= C [sigma dmu](E)^{1/p}`.
pub fn sawyer_max_constant(
    space: &FilteredSpace,
    alpha: &AdaptedFamily,
    u: &[f64],
    sigma: &[f64],
    p: f64,
    q: f64,
) -> Result<ConstantReport> {
    sawyer_max_constant_with(space, alpha, u, sigma, p, q, SetMode::Blocks)
}

pub fn sawyer_max_constant_with(
    space: &FilteredSpace,
    alpha: &AdaptedFamily,
    u: &[f64],
    sigma: &[f64],
    p: f64,
    q: f64,
    mode: SetMode,
) -> Result<ConstantReport> {
    check_p_le_q(p, q)?;
    alpha.validate(space)?;
    check_len(space, u, "u")?;
    check_len(space, sigma, "sigma")?;
    let parts = max_parts(space, alpha, u, sigma, q);
    maximize_additive(space, mode, &parts, max_ratio(p, q))
}

pub fn sawyer_max_ratio_at(
    space: &FilteredSpace,
    alpha: &AdaptedFamily,
    u: &[f64],
    sigma: &[f64],
    p: f64,
    q: f64,
    set: &MeasurableSet,
) -> Result<f64> {
    check_p_le_q(p, q)?;
    set.validate(space)?;
    let parts = max_parts(space, alpha, u, sigma, q);
    Ok(ratio_on_set(&parts, set, max_ratio(p, q)))
}

/// `nu_j(B)` summed over `j >= i`, for every block `B` of every level `i`.
pub fn carleson_tail_masses(space: &FilteredSpace, nu: &CarlesonFamily) -> Vec<Vec<f64>> {
    let levels = space.num_levels();
    let mut out: Vec<Vec<f64>> = (0..levels).map(|i| vec![0.0; space.num_blocks(i)]).collect();
    for j in 0..levels {
        for (bj, &m) in nu.levels[j].iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (i, row) in out.iter_mut().enumerate().take(j + 1) {
                row[space.ancestor(j, bj, i)] += m;
            }
        }
    }
    out
}

fn carleson_parts(space: &FilteredSpace, nu: &CarlesonFamily) -> Vec<LevelParts> {
    carleson_tail_masses(space, nu)
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            row.into_iter()
                .enumerate()
                .map(|(b, m)| (m, space.block_mass(i, b)))
                .collect()
        })
        .collect()
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta.is_finite() && theta >= 1.0) {
        return Err(LabError::param(format!("theta = {theta} must be >= 1")));
    }
    Ok(())
}

/// Least `C_0` with `sum_{j>=i} nu_j(E) <= C_0 mu(E)^theta` for `E` in `F_i`.
pub fn carleson_constant(space: &FilteredSpace, nu: &CarlesonFamily, theta: f64) -> Result<ConstantReport> {
    carleson_constant_with(space, nu, theta, SetMode::Blocks)
}

pub fn carleson_constant_with(
    space: &FilteredSpace,
    nu: &CarlesonFamily,
    theta: f64,
    mode: SetMode,
) -> Result<ConstantReport> {
    check_theta(theta)?;
    nu.validate(space)?;
    let parts = carleson_parts(space, nu);
    maximize_additive(space, mode, &parts, |n, d| n / d.powf(theta))
}

pub fn carleson_ratio_at(space: &FilteredSpace, nu: &CarlesonFamily, theta: f64, set: &MeasurableSet) -> Result<f64> {
    check_theta(theta)?;
    set.validate(space)?;
    Ok(ratio_on_set(&carleson_parts(space, nu), set, |n, d| n / d.powf(theta)))
}

/// `nu({(x, k) : k >= tau(x)}) / mu({tau < inf})^theta` for one stopping time.
pub fn carleson_stopping_ratio(
    space: &FilteredSpace,
    nu: &CarlesonFamily,
    theta: f64,
    tau: &stopping::StoppingTime,
) -> f64 {
    let mut num = 0.0;
    for k in 0..space.num_levels() {
        for (b, &m) in nu.levels[k].iter().enumerate() {
            let a = space.block_atoms(k, b)[0];
            if m != 0.0 && tau.value[a].is_some_and(|t| t <= k) {
                num += m;
            }
        }
    }
    let den: f64 = (0..space.num_atoms())
        .filter(|&a| tau.value[a].is_some())
        .map(|a| space.mass(a))
        .sum();
    test_ratio(num, den, |n, d| n / d.powf(theta))
}

/// The Carleson constant as a supremum over all stopping times with
/// `mu(tau < inf) > 0`, by exhaustive enumeration (at most `cap` times).
pub fn carleson_constant_stopping(
    space: &FilteredSpace,
    nu: &CarlesonFamily,
    theta: f64,
    cap: u128,
) -> Result<ConstantReport> {
    check_theta(theta)?;
    nu.validate(space)?;
    let times = stopping::enumerate_stopping_times(space, cap)?;
    let mut best = Argmax::new();
    for tau in times.iter().filter(|t| t.value.iter().any(Option::is_some)) {
        best.offer(carleson_stopping_ratio(space, nu, theta, tau), || {
            let level = tau.value.iter().flatten().copied().min().unwrap_or(0);
            let mut blocks: Vec<usize> = (0..space.num_atoms())
                .filter(|&a| tau.value[a] == Some(level))
                .map(|a| space.block_of(level, a))
                .collect();
            blocks.sort_unstable();
            blocks.dedup();
            Witness {
                level,
                blocks,
                atom: None,
            }
        });
    }
    Ok(best.finish())
}

/// `sum_i w_i / E_i w` per atom; requires `w > 0`.
pub fn carleson_qlp_density(space: &FilteredSpace, wfam: &AdaptedFamily, w: &[f64]) -> Result<Vec<f64>> {
    check_len(space, w, "weight")?;
    require_positive(space, w)?;
    wfam.validate(space)?;
    let mut s = vec![0.0; space.num_atoms()];
    for i in 0..space.num_levels() {
        let ew = block_averages(space, i, w);
        for (a, v) in s.iter_mut().enumerate() {
            let b = space.block_of(i, a);
            *v += wfam.levels[i][b] / ew[b];
        }
    }
    Ok(s)
}

/// `|| sum_i w_i / E_i w ||_{L^{theta'}(w dmu)}`.
pub fn carleson_qlp_constant(
    space: &FilteredSpace,
    wfam: &AdaptedFamily,
    w: &[f64],
    theta: f64,
) -> Result<ConstantReport> {
    let tp = conjugate(theta)?;
    let s = carleson_qlp_density(space, wfam, w)?;
    Ok(ConstantReport {
        value: operators::lp_norm(space, &s, tp, Some(w))?,
        witness: None,
    })
}

/// Wolff exponent `r = pq/(p-q)`.
pub fn wolff_exponent(p: f64, q: f64) -> Result<f64> {
    conjugate(p)?;
    if !(q > 0.0 && q < p) {
        return Err(LabError::param(format!("need 0 < q < p, got p = {p}, q = {q}")));
    }
    Ok(p * q / (p - q))
}

/// `|| W_alpha[w]^{1/p'} ||_{L^r(w dmu)}` with `1/r = 1/q - 1/p`.
pub fn wolff_norm(space: &FilteredSpace, alpha: &AdaptedFamily, w: &[f64], p: f64, q: f64) -> Result<f64> {
    let r = wolff_exponent(p, q)?;
    check_len(space, w, "weight")?;
    alpha.validate(space)?;
    let pp = conjugate(p)?;
    let pot = operators::wolff_potential(space, alpha, w, p)?;
    let root: Vec<f64> = pot.iter().map(|v| v.powf(1.0 / pp)).collect();
    operators::lp_norm(space, &root, r, Some(w))
}

/// Least `C` with `E_i[(sup_{j>=i} alpha_j E_j sigma)^p u] <= C^p E_i sigma` at every level.
pub fn cor43_test_constant(
    space: &FilteredSpace,
    alpha: &AdaptedFamily,
    u: &[f64],
    sigma: &[f64],
    p: f64,
) -> Result<ConstantReport> {
    conjugate(p)?;
    alpha.validate(space)?;
    check_len(space, u, "u")?;
    check_len(space, sigma, "sigma")?;
    let parts = max_parts(space, alpha, u, sigma, p);
    let mut best = Argmax::new();
    for (i, level) in parts.iter().enumerate() {
        for (b, &(n, d)) in level.iter().enumerate() {
            // Both sides are block integrals, so averages cancel the block mass.
            best.offer(test_ratio(n, d, |n, d| (n / d).powf(1.0 / p)), || Witness::block(i, b));
        }
    }
    Ok(best.finish())
}

/// Convenience for call sites holding [`WeightVector`]s.
pub fn ap_constant_of(space: &FilteredSpace, w: &WeightVector, p: f64) -> Result<ConstantReport> {
    ap_constant(space, &w.values, p)
}
