//! Finite filtered measure spaces.
//!
//! A space is a finite set of atoms with strictly positive masses together
//! with a chain of partitions `P_0, ..., P_L`, each refining the previous one.
//! The sigma-algebra `F_i` is generated by the blocks of `P_i`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Largest dyadic depth accepted by [`FilteredSpace::dyadic`].
pub const DEFAULT_MAX_DEPTH: usize = 20;

/// Wire form of a space: `{"masses": [...], "partitions": [[blockId, ...], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceJson {
    pub masses: Vec<f64>,
    pub partitions: Vec<Vec<usize>>,
}

/// Atom masses for the dyadic model.
#[derive(Clone, Debug, PartialEq)]
pub enum MassRule {
    /// Lebesgue measure on `[0,1)`: every atom has mass `2^-depth`.
    Uniform,
    /// Explicit masses, one per atom, in dyadic order.
    Explicit(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceJson", into = "SpaceJson")]
pub struct FilteredSpace {
    masses: Vec<f64>,
    /// level -> atom -> block id
    partitions: Vec<Vec<usize>>,
    /// level -> block -> member atoms (ascending)
    members: Vec<Vec<Vec<usize>>>,
    /// level -> block -> mu(block)
    block_mass: Vec<Vec<f64>>,
}

impl FilteredSpace {
    /// Dyadic model of `[0,1)` with `depth + 1` levels; level `i` holds the
    /// dyadic intervals of length `2^-i`.
    pub fn dyadic(depth: usize, rule: &MassRule) -> Result<Self> {
        Self::dyadic_with_limit(depth, rule, DEFAULT_MAX_DEPTH)
    }

    pub fn dyadic_with_limit(depth: usize, rule: &MassRule, max_depth: usize) -> Result<Self> {
        if depth > max_depth {
            return Err(LabError::Capacity {
                what: "dyadic depth".into(),
                requested: depth as u128,
                limit: max_depth as u128,
            });
        }
        let n = 1usize << depth;
        let masses = match rule {
            MassRule::Uniform => vec![1.0 / n as f64; n],
            MassRule::Explicit(m) => {
                if m.len() != n {
                    return Err(LabError::validation(
                        depth,
                        format!("expected {n} masses for depth {depth}, got {}", m.len()),
                    ));
                }
                m.clone()
            }
        };
        let partitions = (0..=depth)
            .map(|i| (0..n).map(|a| a >> (depth - i)).collect())
            .collect();
        Self::from_partitions(masses, partitions)
    }

    /// Validates masses and partitions (coarse to fine) and builds the space.
    pub fn from_partitions(masses: Vec<f64>, partitions: Vec<Vec<usize>>) -> Result<Self> {
        if partitions.is_empty() {
            return Err(LabError::validation(0, "at least one partition is required"));
        }
        if masses.is_empty() {
            return Err(LabError::validation(0, "space has no atoms"));
        }
        for (a, &m) in masses.iter().enumerate() {
            if !(m.is_finite() && m > 0.0) {
                return Err(LabError::validation(
                    0,
                    format!("atom {a} has mass {m}; masses must be finite and strictly positive"),
                ));
            }
        }
        let n = masses.len();
        let mut members = Vec::with_capacity(partitions.len());
        let mut block_mass = Vec::with_capacity(partitions.len());
        for (level, part) in partitions.iter().enumerate() {
            if part.len() != n {
                return Err(LabError::validation(
                    level,
                    format!("assignment covers {} atoms, space has {n}", part.len()),
                ));
            }
            let nb = part.iter().max().map_or(0, |&b| b + 1);
            let mut blocks = vec![Vec::new(); nb];
            for (a, &b) in part.iter().enumerate() {
                blocks[b].push(a);
            }
            if let Some(b) = blocks.iter().position(Vec::is_empty) {
                return Err(LabError::validation(level, format!("block {b} is empty")));
            }
            let bm = blocks
                .iter()
                .map(|atoms| atoms.iter().map(|&a| masses[a]).sum())
                .collect();
            members.push(blocks);
            block_mass.push(bm);
        }
        // P_{i+1} refines P_i iff every P_{i+1} block sits inside one P_i block;
        // refinement is transitive so adjacent levels suffice.
        for level in 1..partitions.len() {
            for (b, atoms) in members[level].iter().enumerate() {
                let parent = partitions[level - 1][atoms[0]];
                if let Some(&a) = atoms.iter().find(|&&a| partitions[level - 1][a] != parent) {
                    return Err(LabError::validation(
                        level,
                        format!(
                            "refinement violated: block {b} contains atoms {} and {a} from different level-{} blocks",
                            atoms[0],
                            level - 1
                        ),
                    ));
                }
            }
        }
        Ok(FilteredSpace {
            masses,
            partitions,
            members,
            block_mass,
        })
    }

    pub fn num_atoms(&self) -> usize {
        self.masses.len()
    }

    /// Number of levels, `L + 1`.
    pub fn num_levels(&self) -> usize {
        self.partitions.len()
    }

    /// Index `L` of the finest level.
    pub fn finest_level(&self) -> usize {
        self.partitions.len() - 1
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, atom: usize) -> f64 {
        self.masses[atom]
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn block_of(&self, level: usize, atom: usize) -> usize {
        self.partitions[level][atom]
    }

    /// Atom to block map of `P_level`.
    pub fn assignment(&self, level: usize) -> &[usize] {
        &self.partitions[level]
    }

    pub fn num_blocks(&self, level: usize) -> usize {
        self.members[level].len()
    }

    pub fn block_atoms(&self, level: usize, block: usize) -> &[usize] {
        &self.members[level][block]
    }

    pub fn block_mass(&self, level: usize, block: usize) -> f64 {
        self.block_mass[level][block]
    }

    /// The `P_{level-1}` block containing a `P_level` block.
    pub fn parent(&self, level: usize, block: usize) -> usize {
        self.partitions[level - 1][self.members[level][block][0]]
    }

    /// The `P_coarse` block containing a block of `P_fine` (`coarse <= fine`).
    pub fn ancestor(&self, fine: usize, block: usize, coarse: usize) -> usize {
        self.partitions[coarse][self.members[fine][block][0]]
    }

    /// `P_{level+1}` blocks inside a `P_level` block, ascending.
    pub fn children(&self, level: usize, block: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.members[level][block]
            .iter()
            .map(|&a| self.partitions[level + 1][a])
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn to_json(&self) -> SpaceJson {
        SpaceJson {
            masses: self.masses.clone(),
            partitions: self.partitions.clone(),
        }
    }

    /// Sum of `values[a] * mass[a]` over the atoms of a block.
    pub(crate) fn block_integral(&self, level: usize, block: usize, values: &[f64]) -> f64 {
        self.members[level][block]
            .iter()
            .map(|&a| values[a] * self.masses[a])
            .sum()
    }
}

impl TryFrom<SpaceJson> for FilteredSpace {
    type Error = LabError;

    fn try_from(s: SpaceJson) -> Result<Self> {
        FilteredSpace::from_partitions(s.masses, s.partitions)
    }
}

impl From<FilteredSpace> for SpaceJson {
    fn from(s: FilteredSpace) -> Self {
        SpaceJson {
            masses: s.masses,
            partitions: s.partitions,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurableSet {
    pub level: usize,
    pub blocks: Vec<usize>,
}

impl MeasurableSet {
    pub fn new(level: usize, mut blocks: Vec<usize>) -> Self {
        blocks.sort_unstable();
        blocks.dedup();
        MeasurableSet { level, blocks }
    }

    pub fn block(level: usize, block: usize) -> Self {
        MeasurableSet {
            level,
            blocks: vec![block],
        }
    }

    /// The whole space as an `F_0` set.
    pub fn whole(space: &FilteredSpace) -> Self {
        MeasurableSet {
            level: 0,
            blocks: (0..space.num_blocks(0)).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn validate(&self, space: &FilteredSpace) -> Result<()> {
        if self.level >= space.num_levels() {
            return Err(LabError::validation(
                self.level,
                format!("level {} does not exist (L = {})", self.level, space.finest_level()),
            ));
        }
        if let Some(&b) = self.blocks.iter().find(|&&b| b >= space.num_blocks(self.level)) {
            return Err(LabError::validation(self.level, format!("unknown block {b}")));
        }
        Ok(())
    }

    /// Member atoms, ascending.
    pub fn atoms(&self, space: &FilteredSpace) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .blocks
            .iter()
            .flat_map(|&b| space.block_atoms(self.level, b).iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    pub fn indicator(&self, space: &FilteredSpace) -> Vec<bool> {
        let mut ind = vec![false; space.num_atoms()];
        for a in self.atoms(space) {
            ind[a] = true;
        }
        ind
    }
}

/// A nonnegative function on atoms (a weight).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub values: Vec<f64>,
}

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((a, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(LabError::validation(
                0,
                format!("weight value {v} at atom {a} is not finite and nonnegative"),
            ));
        }
        Ok(WeightVector { values })
    }

    pub fn constant(n: usize, c: f64) -> Self {
        WeightVector { values: vec![c; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    pub fn check_len(&self, space: &FilteredSpace) -> Result<()> {
        if self.values.len() != space.num_atoms() {
            return Err(LabError::validation(
                0,
                format!(
                    "weight has {} values, space has {} atoms",
                    self.values.len(),
                    space.num_atoms()
                ),
            ));
        }
        Ok(())
    }

    /// The dual weight `w^{1-p'}`; requires a strictly positive weight.
    pub fn dual(&self, p: f64) -> Result<WeightVector> {
        let pp = crate::operators::conjugate(p)?;
        if let Some(a) = self.values.iter().position(|&v| v <= 0.0) {
            return Err(LabError::DegenerateWeight { level: 0, block: a });
        }
        Ok(WeightVector {
            values: self.values.iter().map(|&v| v.powf(1.0 - pp)).collect(),
        })
    }
}

/// `mu(E)`, or `int_E w dmu` when a weight is supplied.
pub fn measure(space: &FilteredSpace, set: &MeasurableSet, weight: Option<&WeightVector>) -> Result<f64> {
    set.validate(space)?;
    if let Some(w) = weight {
        w.check_len(space)?;
    }
    Ok(set
        .blocks
        .iter()
        .map(|&b| match weight {
            None => space.block_mass(set.level, b),
            Some(w) => space.block_integral(set.level, b, &w.values),
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_depth_zero_is_one_atom() {
        let s = FilteredSpace::dyadic(0, &MassRule::Uniform).unwrap();
        assert_eq!(s.num_atoms(), 1);
        assert_eq!(s.num_levels(), 1);
        assert_eq!(s.mass(0), 1.0);
    }

    #[test]
    fn dyadic_depth_one() {
        let s = FilteredSpace::dyadic(1, &MassRule::Uniform).unwrap();
        assert_eq!(s.masses(), &[0.5, 0.5]);
        assert_eq!(s.assignment(0), &[0, 0]);
        assert_eq!(s.assignment(1), &[0, 1]);
    }

    #[test]
    fn dyadic_depth_three_blocks() {
        let s = FilteredSpace::dyadic(3, &MassRule::Uniform).unwrap();
        assert_eq!(s.num_atoms(), 8);
        assert!(s.masses().iter().all(|&m| m == 0.125));
        assert_eq!(s.num_blocks(2), 4);
        for b in 0..4 {
            assert_eq!(s.block_mass(2, b), 0.25);
            assert_eq!(s.block_atoms(2, b), &[2 * b, 2 * b + 1]);
        }
    }

    #[test]
    fn depth_over_limit_is_capacity_error() {
        let err = FilteredSpace::dyadic(21, &MassRule::Uniform).unwrap_err();
        assert!(matches!(err, LabError::Capacity { .. }));
    }

    #[test]
    fn from_partitions_accepts_valid() {
        assert!(FilteredSpace::from_partitions(vec![1.0], vec![vec![0]]).is_ok());
        assert!(FilteredSpace::from_partitions(vec![0.5, 0.5], vec![vec![0, 0], vec![0, 1]]).is_ok());
    }

    #[test]
    fn coarsening_is_rejected() {
        let err = FilteredSpace::from_partitions(vec![0.5, 0.5], vec![vec![0, 1], vec![0, 0]]).unwrap_err();
        match err {
            LabError::Validation { level, message } => {
                assert_eq!(level, 1);
                assert!(message.contains("refinement"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_masses_and_empty_blocks() {
        assert!(FilteredSpace::from_partitions(vec![0.0, 1.0], vec![vec![0, 0]]).is_err());
        assert!(FilteredSpace::from_partitions(vec![-1.0, 1.0], vec![vec![0, 0]]).is_err());
        let err = FilteredSpace::from_partitions(vec![1.0, 1.0], vec![vec![0, 2]]).unwrap_err();
        assert!(matches!(err, LabError::Validation { level: 0, .. }));
        assert!(FilteredSpace::from_partitions(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn measure_examples() {
        let s = FilteredSpace::dyadic(1, &MassRule::Uniform).unwrap();
        let w = WeightVector::new(vec![1.0, 3.0]).unwrap();
        assert_eq!(measure(&s, &MeasurableSet::whole(&s), None).unwrap(), 1.0);
        assert_eq!(measure(&s, &MeasurableSet::block(1, 0), Some(&w)).unwrap(), 0.5);
        assert_eq!(measure(&s, &MeasurableSet::whole(&s), Some(&w)).unwrap(), 1.0 * 0.5 + 3.0 * 0.5);
        assert!(measure(&s, &MeasurableSet::block(1, 7), None).is_err());
    }

    #[test]
    fn json_roundtrip_validates() {
        let s = FilteredSpace::dyadic(2, &MassRule::Uniform).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: FilteredSpace = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
        let bad = r#"{"masses":[0.5,0.5],"partitions":[[0,1],[0,0]]}"#;
        assert!(serde_json::from_str::<FilteredSpace>(bad).is_err());
    }
}
