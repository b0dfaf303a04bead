//! Stopping times, level-set decompositions and principal sets.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::operators::{cond_exp, AdaptedFamily};
use crate::space::{FilteredSpace, MeasurableSet};

/// Level-valued map on atoms; `None` is `+inf`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StoppingTime {
    pub value: Vec<Option<usize>>,
}

impl StoppingTime {
    pub fn never(space: &FilteredSpace) -> Self {
        StoppingTime {
            value: vec![None; space.num_atoms()],
        }
    }

    pub fn constant(space: &FilteredSpace, level: usize) -> Self {
        StoppingTime {
            value: vec![Some(level); space.num_atoms()],
        }
    }
}

/// Least level at which `fam` exceeds `lambda`, per atom.
pub fn hitting_time(space: &FilteredSpace, fam: &AdaptedFamily, lambda: f64) -> StoppingTime {
    let value = (0..space.num_atoms())
        .map(|a| (0..space.num_levels()).find(|&i| fam.at(space, i, a) > lambda))
        .collect();
    StoppingTime { value }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Adaptedness {
    pub holds: bool,
    /// First `(level, block)` in which `{tau <= level}` is neither empty nor full.
    pub violation: Option<(usize, usize)>,
}

pub fn is_stopping_time(space: &FilteredSpace, tau: &StoppingTime) -> Adaptedness {
    let bad = |violation| Adaptedness {
        holds: false,
        violation,
    };
    if tau.value.len() != space.num_atoms() {
        return bad(None);
    }
    if tau.value.iter().flatten().any(|&t| t > space.finest_level()) {
        return bad(None);
    }
    for i in 0..space.num_levels() {
        for b in 0..space.num_blocks(i) {
            let atoms = space.block_atoms(i, b);
            let first = tau.value[atoms[0]].is_some_and(|t| t <= i);
            if atoms.iter().any(|&a| tau.value[a].is_some_and(|t| t <= i) != first) {
                return bad(Some((i, b)));
            }
        }
    }
    Adaptedness {
        holds: true,
        violation: None,
    }
}

fn count_below(space: &FilteredSpace, level: usize, block: usize) -> u128 {
    if level == space.finest_level() {
        return 2;
    }
    let prod = space
        .children(level, block)
        .into_iter()
        .fold(1u128, |acc, c| acc.saturating_mul(count_below(space, level + 1, c)));
    prod.saturating_add(1)
}

/// Number of stopping times, saturating at `u128::MAX`.
pub fn count_stopping_times(space: &FilteredSpace) -> u128 {
    (0..space.num_blocks(0)).fold(1u128, |acc, b| acc.saturating_mul(count_below(space, 0, b)))
}

type Partial = Vec<(usize, Option<usize>)>;

fn product(parts: Vec<Vec<Partial>>) -> Vec<Partial> {
    parts.into_iter().fold(vec![Vec::new()], |acc, options| {
        let mut out = Vec::with_capacity(acc.len() * options.len());
        for a in &acc {
            for o in &options {
                let mut v = a.clone();
                v.extend_from_slice(o);
                out.push(v);
            }
        }
        out
    })
}

fn enumerate_below(space: &FilteredSpace, level: usize, block: usize) -> Vec<Partial> {
    let atoms = space.block_atoms(level, block);
    let stop_here: Partial = atoms.iter().map(|&a| (a, Some(level))).collect();
    let mut out = vec![stop_here];
    if level == space.finest_level() {
        out.push(atoms.iter().map(|&a| (a, None)).collect());
    } else {
        let children = space
            .children(level, block)
            .into_iter()
            .map(|c| enumerate_below(space, level + 1, c))
            .collect();
        out.extend(product(children));
    }
    out
}

/// All stopping times, provided there are at most `cap` of them.
pub fn enumerate_stopping_times(space: &FilteredSpace, cap: u128) -> Result<Vec<StoppingTime>> {
    let count = count_stopping_times(space);
    if count > cap {
        return Err(LabError::Capacity {
            what: "stopping-time enumeration".into(),
            requested: count,
            limit: cap,
        });
    }
    let roots = (0..space.num_blocks(0)).map(|b| enumerate_below(space, 0, b)).collect();
    Ok(product(roots)
        .into_iter()
        .map(|partial| {
            let mut value = vec![None; space.num_atoms()];
            for (a, t) in partial {
                value[a] = t;
            }
            StoppingTime { value }
        })
        .collect())
}

/// `G_i = {tau = i}` for the hitting time of `fam` above `lambda`.
pub fn level_decomposition(space: &FilteredSpace, fam: &AdaptedFamily, lambda: f64) -> Vec<MeasurableSet> {
    let tau = hitting_time(space, fam, lambda);
    (0..space.num_levels())
        .map(|i| {
            let blocks = (0..space.num_blocks(i))
                .filter(|&b| tau.value[space.block_atoms(i, b)[0]] == Some(i))
                .collect();
            MeasurableSet::new(i, blocks)
        })
        .collect()
}

/// One nonempty piece `E_j^i` of the dyadic decomposition of `{M_alpha f > 0}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SawyerPiece {
    pub j: i32,
    pub level: usize,
    pub atoms: Vec<usize>,
}

/// `E_j^i = {2^j < M_alpha f <= 2^{j+1}} ∩ {tau_j = i}` with
/// `tau_j = inf{i : alpha_i E_i f > 2^j}`. Pieces are ordered by `j`, then `i`.
pub fn sawyer_decomposition(space: &FilteredSpace, alpha: &AdaptedFamily, f: &[f64]) -> Result<Vec<SawyerPiece>> {
    alpha.validate(space)?;
    if f.len() != space.num_atoms() {
        return Err(LabError::validation(0, "function length does not match the space"));
    }
    if f.iter().any(|&v| !(v >= 0.0)) {
        return Err(LabError::param("sawyer decomposition needs a nonnegative function"));
    }
    let levels: Vec<Vec<f64>> = (0..space.num_levels())
        .map(|i| {
            cond_exp(space, i, f)
                .into_iter()
                .enumerate()
                .map(|(a, e)| alpha.at(space, i, a) * e)
                .collect()
        })
        .collect();
    let m: Vec<f64> = (0..space.num_atoms())
        .map(|a| levels.iter().map(|l| l[a]).fold(0.0, f64::max))
        .collect();
    let positive = m.iter().copied().filter(|&v| v > 0.0);
    let (Some(lo), Some(hi)) = (positive.clone().reduce(f64::min), positive.reduce(f64::max)) else {
        return Ok(Vec::new());
    };
    let j_lo = lo.log2().floor() as i32 - 1;
    let j_hi = hi.log2().ceil() as i32;
    let mut out = Vec::new();
    for j in j_lo..=j_hi {
        let t = 2f64.powi(j);
        let mut by_level: Vec<Vec<usize>> = vec![Vec::new(); space.num_levels()];
        for (a, &v) in m.iter().enumerate() {
            if t < v && v <= 2.0 * t {
                if let Some(i) = levels.iter().position(|l| l[a] > t) {
                    by_level[i].push(a);
                }
            }
        }
        for (level, atoms) in by_level.into_iter().enumerate() {
            if !atoms.is_empty() {
                out.push(SawyerPiece { j, level, atoms });
            }
        }
    }
    Ok(out)
}

/// A node of the principal-set tree: a union of `P_{kappa1}` blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PrincipalNode {
    pub kappa1: usize,
    pub kappa2: i32,
    pub block_ids: Vec<usize>,
    pub stopped_atoms: Vec<usize>,
    pub children: Vec<PrincipalNode>,
}

impl PrincipalNode {
    pub fn set(&self) -> MeasurableSet {
        MeasurableSet::new(self.kappa1, self.block_ids.clone())
    }

    /// Depth-first, parent before children.
    pub fn nodes(&self) -> Vec<&PrincipalNode> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.nodes());
        }
        out
    }

    pub fn generations(&self) -> usize {
        1 + self.children.iter().map(|c| c.generations()).max().unwrap_or(0)
    }
}

/// The unique `k` with `2^{k-1} < x <= 2^k`, for `x > 0`.
pub fn dyadic_band(x: f64) -> i32 {
    let mut k = x.log2().ceil() as i32;
    while 2f64.powi(k) < x {
        k += 1;
    }
    while 2f64.powi(k - 1) >= x {
        k -= 1;
    }
    k
}

fn masked(space: &FilteredSpace, set: &MeasurableSet, sigma: &[f64]) -> Vec<f64> {
    let ind = set.indicator(space);
    sigma.iter().zip(ind).map(|(&s, i)| if i { s } else { 0.0 }).collect()
}

fn build_node(space: &FilteredSpace, sigma: &[f64], set: MeasurableSet, kappa2: i32) -> PrincipalNode {
    let kappa1 = set.level;
    let local = masked(space, &set, sigma);
    let threshold = 2f64.powi(kappa2 + 1);
    let atoms = set.atoms(space);
    let mut tau: Vec<Option<usize>> = vec![None; space.num_atoms()];
    let mut averages: Vec<Vec<f64>> = vec![Vec::new(); space.num_levels()];
    for j in kappa1..space.num_levels() {
        averages[j] = cond_exp(space, j, &local);
        for &a in &atoms {
            if tau[a].is_none() && averages[j][a] > threshold {
                tau[a] = Some(j);
            }
        }
    }
    let mut children = Vec::new();
    for j in kappa1 + 1..space.num_levels() {
        // band -> blocks of P_j inside {tau = j}
        let mut bands: Vec<(i32, Vec<usize>)> = Vec::new();
        for b in 0..space.num_blocks(j) {
            let a = space.block_atoms(j, b)[0];
            if tau[a] != Some(j) {
                continue;
            }
            let l = dyadic_band(averages[j][a]);
            match bands.iter_mut().find(|(bl, _)| *bl == l) {
                Some((_, blocks)) => blocks.push(b),
                None => bands.push((l, vec![b])),
            }
        }
        bands.sort_by_key(|(l, _)| *l);
        for (l, blocks) in bands {
            children.push(build_node(space, sigma, MeasurableSet::new(j, blocks), l));
        }
    }
    PrincipalNode {
        kappa1,
        kappa2,
        block_ids: set.blocks,
        stopped_atoms: atoms.into_iter().filter(|&a| tau[a].is_none()).collect(),
        children,
    }
}

/// Principal-set tree rooted at one block of `P_i`.
pub fn principal_sets(space: &FilteredSpace, sigma: &[f64], root: &MeasurableSet, i: usize) -> Result<PrincipalNode> {
    root.validate(space)?;
    if root.level != i || root.blocks.len() != 1 {
        return Err(LabError::validation(i, "the root must be a single block of the starting level"));
    }
    if sigma.len() != space.num_atoms() {
        return Err(LabError::validation(0, "sigma length does not match the space"));
    }
    if sigma.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
        return Err(LabError::param("sigma must be finite and nonnegative"));
    }
    let b = root.blocks[0];
    let mass = space.block_integral(i, b, sigma);
    if mass <= 0.0 {
        return Err(LabError::DegenerateInput(format!(
            "sigma vanishes on block {b} of level {i}"
        )));
    }
    let avg = cond_exp(space, i, &masked(space, root, sigma))[space.block_atoms(i, b)[0]];
    Ok(build_node(space, sigma, root.clone(), dyadic_band(avg)))
}

/// Outcome of checking properties (i)-(v) of a principal tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrincipalProperties {
    pub disjoint_cover: bool,
    pub measurable: bool,
    pub stopped_mass: bool,
    pub band: bool,
    pub stopped_sup: bool,
}

impl PrincipalProperties {
    pub fn all(&self) -> bool {
        self.disjoint_cover && self.measurable && self.stopped_mass && self.band && self.stopped_sup
    }
}

/// Relative slack on `mu(P) <= 2 mu(E(P))`, which can hold with equality.
const MASS_SLACK: f64 = 1e-12;

fn contains(space: &FilteredSpace, parent: &MeasurableSet, child: &MeasurableSet) -> bool {
    let ind = parent.indicator(space);
    child.atoms(space).iter().all(|&a| ind[a])
}

/// Checks every property of the tree rooted at level `i`.
pub fn check_principal_properties(
    space: &FilteredSpace,
    sigma: &[f64],
    tree: &PrincipalNode,
    i: usize,
) -> PrincipalProperties {
    let root = tree.set();
    let root_atoms = root.atoms(space);
    let mut hits = vec![0usize; space.num_atoms()];
    let mut props = PrincipalProperties {
        disjoint_cover: true,
        measurable: true,
        stopped_mass: true,
        band: true,
        stopped_sup: true,
    };

    let mut stack = vec![(tree, None::<&PrincipalNode>)];
    while let Some((node, parent)) = stack.pop() {
        let set = node.set();
        if set.validate(space).is_err()
            || set.is_empty()
            || set.blocks.len() != node.block_ids.len()
            || parent.is_some_and(|p| node.kappa1 <= p.kappa1 || !contains(space, &p.set(), &set))
        {
            props.measurable = false;
            continue;
        }
        let atoms = set.atoms(space);
        let member = set.indicator(space);
        for &a in &node.stopped_atoms {
            if a >= hits.len() || !member[a] {
                props.disjoint_cover = false;
            } else {
                hits[a] += 1;
            }
        }
        let m: f64 = atoms.iter().map(|&a| space.mass(a)).sum();
        let me: f64 = node
            .stopped_atoms
            .iter()
            .filter(|&&a| a < member.len() && member[a])
            .map(|&a| space.mass(a))
            .sum();
        if m > 2.0 * me * (1.0 + MASS_SLACK) {
            props.stopped_mass = false;
        }
        let local = masked(space, &set, sigma);
        let at_kappa1 = cond_exp(space, node.kappa1, &local);
        let (lo, hi) = (2f64.powi(node.kappa2 - 1), 2f64.powi(node.kappa2));
        if atoms.iter().any(|&a| !(lo < at_kappa1[a] && at_kappa1[a] <= hi)) {
            props.band = false;
        }
        let cap = 2f64.powi(node.kappa2 + 1);
        for j in i..space.num_levels() {
            let e = cond_exp(space, j, &local);
            if node.stopped_atoms.iter().any(|&a| a < e.len() && e[a] > cap) {
                props.stopped_sup = false;
            }
        }
        for c in &node.children {
            stack.push((c, Some(node)));
        }
    }
    let in_root = MeasurableSet::new(root.level, root.blocks.clone()).indicator(space);
    for (a, &h) in hits.iter().enumerate() {
        let expected = usize::from(in_root[a]);
        if h != expected {
            props.disjoint_cover = false;
        }
    }
    if root_atoms.is_empty() {
        props.disjoint_cover = false;
    }
    props
}
