//! Conditional expectations and the operators built from them.
//!
//! Functions on atoms are plain `&[f64]` slices indexed by atom; the
//! [`AtomFunction`] and [`WeightVector`](crate::space::WeightVector) wrappers
//! exist for the JSON boundary.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::space::FilteredSpace;

/// Exponents closer than this to 1 are rejected when a conjugate is needed.
pub const CONJUGATE_GUARD: f64 = 1e-12;

/// `p' = p / (p - 1)`.
pub fn conjugate(p: f64) -> Result<f64> {
    if !(p.is_finite() && p > 1.0 + CONJUGATE_GUARD) {
        return Err(LabError::param(format!("exponent {p} must exceed 1")));
    }
    Ok(p / (p - 1.0))
}

/// A signed function on atoms: `{"values": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomFunction {
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct LevelValues {
    block_values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FamilyJson {
    levels: Vec<LevelValues>,
}

/// Nonnegative `F_i`-measurable values, one per block of every level.
///
/// Houses the multipliers `alpha_i` as well as generic adapted sequences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "FamilyJson", into = "FamilyJson")]
pub struct AdaptedFamily {
    pub levels: Vec<Vec<f64>>,
}

impl From<FamilyJson> for AdaptedFamily {
    fn from(j: FamilyJson) -> Self {
        AdaptedFamily {
            levels: j.levels.into_iter().map(|l| l.block_values).collect(),
        }
    }
}

impl From<AdaptedFamily> for FamilyJson {
    fn from(f: AdaptedFamily) -> Self {
        FamilyJson {
            levels: f
                .levels
                .into_iter()
                .map(|block_values| LevelValues { block_values })
                .collect(),
        }
    }
}

impl AdaptedFamily {
    pub fn constant(space: &FilteredSpace, c: f64) -> Self {
        AdaptedFamily {
            levels: (0..space.num_levels())
                .map(|i| vec![c; space.num_blocks(i)])
                .collect(),
        }
    }

    pub fn zeros(space: &FilteredSpace) -> Self {
        Self::constant(space, 0.0)
    }

    pub fn ones(space: &FilteredSpace) -> Self {
        Self::constant(space, 1.0)
    }

    /// `c` on every block of one level, zero elsewhere.
    pub fn single_level(space: &FilteredSpace, level: usize, c: f64) -> Self {
        let mut fam = Self::zeros(space);
        fam.levels[level].iter_mut().for_each(|v| *v = c);
        fam
    }

    /// Levels of blocks; missing trailing levels or blocks are filled with 0.
    pub fn materialize(mut self, space: &FilteredSpace) -> Result<Self> {
        if self.levels.len() > space.num_levels() {
            return Err(LabError::validation(
                self.levels.len() - 1,
                format!("family has {} levels, space has {}", self.levels.len(), space.num_levels()),
            ));
        }
        self.levels.resize(space.num_levels(), Vec::new());
        for (i, vals) in self.levels.iter_mut().enumerate() {
            if vals.len() > space.num_blocks(i) {
                return Err(LabError::validation(
                    i,
                    format!("{} values for {} blocks", vals.len(), space.num_blocks(i)),
                ));
            }
            vals.resize(space.num_blocks(i), 0.0);
        }
        self.validate(space)?;
        Ok(self)
    }

    pub fn validate(&self, space: &FilteredSpace) -> Result<()> {
        if self.levels.len() != space.num_levels() {
            return Err(LabError::validation(
                0,
                format!("family has {} levels, space has {}", self.levels.len(), space.num_levels()),
            ));
        }
        for (i, vals) in self.levels.iter().enumerate() {
            if vals.len() != space.num_blocks(i) {
                return Err(LabError::validation(
                    i,
                    format!("{} values for {} blocks", vals.len(), space.num_blocks(i)),
                ));
            }
            if let Some((b, v)) = vals.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
                return Err(LabError::validation(
                    i,
                    format!("block {b} has value {v}; values must be finite and nonnegative"),
                ));
            }
        }
        Ok(())
    }

    pub fn at(&self, space: &FilteredSpace, level: usize, atom: usize) -> f64 {
        self.levels[level][space.block_of(level, atom)]
    }

    /// Level `i` spread out to atoms.
    pub fn atom_values(&self, space: &FilteredSpace, level: usize) -> Vec<f64> {
        space
            .assignment(level)
            .iter()
            .map(|&b| self.levels[level][b])
            .collect()
    }

    pub fn scaled(&self, t: f64) -> Self {
        AdaptedFamily {
            levels: self
                .levels
                .iter()
                .map(|l| l.iter().map(|v| v * t).collect())
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.levels.iter().flatten().all(|&v| v == 0.0)
    }
}

/// Per-level, per-atom values (not necessarily adapted), e.g. tail sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomFamily {
    pub levels: Vec<Vec<f64>>,
}

/// Block averages of `f` on `P_i`.
pub fn block_averages(space: &FilteredSpace, i: usize, f: &[f64]) -> Vec<f64> {
    (0..space.num_blocks(i))
        .map(|b| space.block_integral(i, b, f) / space.block_mass(i, b))
        .collect()
}

/// `E_i f`: constant on each `P_i` block, equal to the block's mu-average.
pub fn cond_exp(space: &FilteredSpace, i: usize, f: &[f64]) -> Vec<f64> {
    let avg = block_averages(space, i, f);
    space.assignment(i).iter().map(|&b| avg[b]).collect()
}

/// `E_i f` for every level.
pub fn cond_exp_all(space: &FilteredSpace, f: &[f64]) -> Vec<Vec<f64>> {
    (0..space.num_levels()).map(|i| cond_exp(space, i, f)).collect()
}

/// Conditional expectation with respect to `w dmu`, i.e. `E_i(gw) / E_i w`.
pub fn cond_exp_weighted(space: &FilteredSpace, i: usize, g: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let mut avg = Vec::with_capacity(space.num_blocks(i));
    for b in 0..space.num_blocks(i) {
        let wm: f64 = space.block_integral(i, b, w);
        if wm <= 0.0 {
            return Err(LabError::DegenerateWeight { level: i, block: b });
        }
        let gw: f64 = space
            .block_atoms(i, b)
            .iter()
            .map(|&a| g[a] * w[a] * space.mass(a))
            .sum();
        avg.push(gw / wm);
    }
    Ok(space.assignment(i).iter().map(|&b| avg[b]).collect())
}

/// Doob's maximal function `f* = max_i |E_i f|`.
pub fn doob_max(space: &FilteredSpace, f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0_f64; space.num_atoms()];
    for i in 0..space.num_levels() {
        for (o, e) in out.iter_mut().zip(cond_exp(space, i, f)) {
            *o = o.max(e.abs());
        }
    }
    out
}

/// `M_alpha f = max_i alpha_i |E_i f|`.
pub fn gen_max(space: &FilteredSpace, alpha: &AdaptedFamily, f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0_f64; space.num_atoms()];
    for i in 0..space.num_levels() {
        let avg = block_averages(space, i, f);
        for (a, o) in out.iter_mut().enumerate() {
            let b = space.block_of(i, a);
            *o = o.max(alpha.levels[i][b] * avg[b].abs());
        }
    }
    out
}

/// `T_alpha f = sum_i alpha_i E_i f`.
pub fn pos_op(space: &FilteredSpace, alpha: &AdaptedFamily, f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; space.num_atoms()];
    for i in 0..space.num_levels() {
        if alpha.levels[i].iter().all(|&v| v == 0.0) {
            continue;
        }
        let avg = block_averages(space, i, f);
        for (a, o) in out.iter_mut().enumerate() {
            let b = space.block_of(i, a);
            *o += alpha.levels[i][b] * avg[b];
        }
    }
    out
}

/// Tail sums `bar alpha_i = sum_{j >= i} alpha_j`, evaluated per atom.
pub fn tail_sums(space: &FilteredSpace, alpha: &AdaptedFamily) -> AtomFamily {
    let n = space.num_atoms();
    let mut levels = vec![vec![0.0; n]; space.num_levels()];
    let mut acc = vec![0.0; n];
    for i in (0..space.num_levels()).rev() {
        for (a, s) in acc.iter_mut().enumerate() {
            *s += alpha.at(space, i, a);
        }
        levels[i].copy_from_slice(&acc);
    }
    AtomFamily { levels }
}

/// Discrete Wolff potential `sum_i alpha_i bar alpha_i^{p'-1} (E_i w)^{p'-1}`.
pub fn wolff_potential(space: &FilteredSpace, alpha: &AdaptedFamily, w: &[f64], p: f64) -> Result<Vec<f64>> {
    let e = conjugate(p)? - 1.0;
    let tails = tail_sums(space, alpha);
    let mut out = vec![0.0; space.num_atoms()];
    for i in 0..space.num_levels() {
        let ew = cond_exp(space, i, w);
        for (a, o) in out.iter_mut().enumerate() {
            let al = alpha.at(space, i, a);
            if al > 0.0 {
                *o += al * tails.levels[i][a].powf(e) * ew[a].powf(e);
            }
        }
    }
    Ok(out)
}

/// `(sum_a |f_a|^p mu_a w_a)^{1/p}`.
pub fn lp_norm(space: &FilteredSpace, f: &[f64], p: f64, weight: Option<&[f64]>) -> Result<f64> {
    if !(p.is_finite() && p > 0.0) {
        return Err(LabError::param(format!("norm exponent {p} must be positive")));
    }
    Ok(lp_norm_pow(space, f, p, weight).powf(1.0 / p))
}

/// `sum_a |f_a|^p mu_a w_a`, the p-th power of [`lp_norm`].
pub(crate) fn lp_norm_pow(space: &FilteredSpace, f: &[f64], p: f64, weight: Option<&[f64]>) -> f64 {
    f.iter()
        .enumerate()
        .map(|(a, v)| {
            let wa = weight.map_or(1.0, |w| w[a]);
            if wa == 0.0 || *v == 0.0 {
                0.0
            } else {
                v.abs().powf(p) * space.mass(a) * wa
            }
        })
        .sum()
}

/// `int f dmu`.
pub fn integral(space: &FilteredSpace, f: &[f64]) -> f64 {
    f.iter().zip(space.masses()).map(|(v, m)| v * m).sum()
}
