//! Seeded generators for spaces, weights, multipliers and test families.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::operators::AdaptedFamily;
use crate::space::{FilteredSpace, MassRule};

/// Independent stream for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpaceModel {
    /// Uniform dyadic space of the given depth.
    Dyadic { depth: usize },
    /// Dyadic space with depth drawn uniformly from the range.
    DyadicRange { min: usize, max: usize },
    /// Random refinement tree with `levels` partitions.
    Tree { levels: usize },
}

impl SpaceModel {
    pub fn generate(&self, rng: &mut ChaCha8Rng) -> Result<FilteredSpace> {
        match *self {
            SpaceModel::Dyadic { depth } => FilteredSpace::dyadic(depth, &MassRule::Uniform),
            SpaceModel::DyadicRange { min, max } => {
                if min > max {
                    return Err(LabError::param(format!("empty depth range {min}..={max}")));
                }
                FilteredSpace::dyadic(rng.gen_range(min..=max), &MassRule::Uniform)
            }
            SpaceModel::Tree { levels } => random_tree(rng, levels),
        }
    }
}

/// Largest number of levels accepted by [`random_tree`].
pub const MAX_TREE_LEVELS: usize = 8;

/// Up to three root blocks, branching 1 to 3, one or two atoms per finest block.
pub fn random_tree(rng: &mut ChaCha8Rng, levels: usize) -> Result<FilteredSpace> {
    if levels == 0 {
        return Err(LabError::param("a space needs at least one level"));
    }
    if levels > MAX_TREE_LEVELS {
        return Err(LabError::Capacity {
            what: "random tree levels".into(),
            requested: levels as u128,
            limit: MAX_TREE_LEVELS as u128,
        });
    }
    // Each block of each level is expanded into children; ids are assigned in order.
    let roots = rng.gen_range(1..=3usize);
    let mut parents: Vec<Vec<usize>> = vec![(0..roots).collect()];
    for _ in 1..levels {
        let prev = parents.last().expect("nonempty").len();
        let mut next = Vec::new();
        for b in 0..prev {
            for _ in 0..rng.gen_range(1..=3usize) {
                next.push(b);
            }
        }
        parents.push(next);
    }
    let finest = parents.last().expect("nonempty").len();
    let mut atom_block = Vec::new();
    for b in 0..finest {
        for _ in 0..rng.gen_range(1..=2usize) {
            atom_block.push(b);
        }
    }
    let masses: Vec<f64> = atom_block.iter().map(|_| rng.gen_range(0.2..2.0)).collect();
    let mut partitions = vec![atom_block];
    for lvl in (1..levels).rev() {
        let fine = partitions.last().expect("nonempty");
        let coarse = fine.iter().map(|&b| parents[lvl][b]).collect();
        partitions.push(coarse);
    }
    partitions.reverse();
    FilteredSpace::from_partitions(masses, partitions)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightModel {
    Constant { value: f64 },
    /// i.i.d. `exp(N(0, sigma^2))`.
    LogNormal { sigma: f64 },
    /// Average of `x^delta` over each atom, atoms laid out on `[0, 1)` by mass.
    Power { delta: f64 },
    /// Base level 1 with `count` atoms raised to `height`.
    Spikes { count: usize, height: f64 },
}

impl WeightModel {
    pub fn generate(&self, space: &FilteredSpace, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let n = space.num_atoms();
        match *self {
            WeightModel::Constant { value } => {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(LabError::param("constant weight must be positive"));
                }
                Ok(vec![value; n])
            }
            WeightModel::LogNormal { sigma } => {
                let d = LogNormal::new(0.0, sigma).map_err(|e| LabError::param(e.to_string()))?;
                Ok((0..n).map(|_| d.sample(rng)).collect())
            }
            WeightModel::Power { delta } => power_weight(space, delta),
            WeightModel::Spikes { count, height } => {
                if !(height > 0.0 && height.is_finite()) {
                    return Err(LabError::param("spike height must be positive"));
                }
                let mut w = vec![1.0; n];
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(rng);
                for &a in idx.iter().take(count) {
                    w[a] = height;
                }
                Ok(w)
            }
        }
    }
}

/// `(b^{d+1} - a^{d+1}) / ((d+1)(b-a))` on consecutive intervals of length `mu(atom) / mu(total)`.
pub fn power_weight(space: &FilteredSpace, delta: f64) -> Result<Vec<f64>> {
    if !(delta > -1.0 && delta.is_finite()) {
        return Err(LabError::param(format!("power exponent {delta} must exceed -1")));
    }
    let total = space.total_mass();
    let mut left = 0.0;
    Ok(space
        .masses()
        .iter()
        .map(|&m| {
            let a = left / total;
            let b = (left + m) / total;
            left += m;
            (b.powf(delta + 1.0) - a.powf(delta + 1.0)) / ((delta + 1.0) * (b - a))
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AlphaModel {
    Ones,
    /// `value` on every block of `level` (clamped to the finest level).
    SingleLevel { level: usize, value: f64 },
    /// `lambda^i`, times `1 + jitter * U(0,1)` per block.
    Geometric { lambda: f64, jitter: f64 },
    /// Each block nonzero with probability `density`, value `U(0, 2)`.
    Sparse { density: f64 },
}

impl AlphaModel {
    pub fn generate(&self, space: &FilteredSpace, rng: &mut ChaCha8Rng) -> Result<AdaptedFamily> {
        match *self {
            AlphaModel::Ones => Ok(AdaptedFamily::ones(space)),
            AlphaModel::SingleLevel { level, value } => {
                Ok(AdaptedFamily::single_level(space, level.min(space.finest_level()), value))
            }
            AlphaModel::Geometric { lambda, jitter } => {
                if !(lambda > 0.0 && jitter >= 0.0) {
                    return Err(LabError::param("geometric multipliers need lambda > 0, jitter >= 0"));
                }
                let levels = (0..space.num_levels())
                    .map(|i| {
                        (0..space.num_blocks(i))
                            .map(|_| lambda.powi(i as i32) * (1.0 + jitter * rng.gen::<f64>()))
                            .collect()
                    })
                    .collect();
                Ok(AdaptedFamily { levels })
            }
            AlphaModel::Sparse { density } => {
                if !(0.0..=1.0).contains(&density) {
                    return Err(LabError::param("density must lie in [0, 1]"));
                }
                let levels = (0..space.num_levels())
                    .map(|i| {
                        (0..space.num_blocks(i))
                            .map(|_| if rng.gen_bool(density) { rng.gen_range(0.0..2.0) } else { 0.0 })
                            .collect()
                    })
                    .collect();
                Ok(AdaptedFamily { levels })
            }
        }
    }
}

/// Nonnegative adapted family with a random share of zero blocks.
pub fn random_family(space: &FilteredSpace, rng: &mut ChaCha8Rng, zero_share: f64) -> AdaptedFamily {
    let levels = (0..space.num_levels())
        .map(|i| {
            (0..space.num_blocks(i))
                .map(|_| if rng.gen_bool(zero_share) { 0.0 } else { rng.gen::<f64>() * 2.0 })
                .collect()
        })
        .collect();
    AdaptedFamily { levels }
}

/// Nonnegative function on atoms, mixing smooth, heavy-tailed and sparse draws.
pub fn random_function(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match rng.gen_range(0..3) {
        0 => (0..n).map(|_| rng.gen::<f64>()).collect(),
        1 => {
            let d = LogNormal::new(0.0, 1.0).expect("valid");
            (0..n).map(|_| d.sample(rng)).collect()
        }
        _ => {
            let mut f: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.3) { rng.gen::<f64>() * 5.0 } else { 0.0 }).collect();
            if f.iter().all(|&v| v == 0.0) {
                f[rng.gen_range(0..n)] = 1.0;
            }
            f
        }
    }
}
