//! Principal-set trees compared against a direct recursive construction.

use proptest::collection::vec;
use proptest::prelude::*;

use martlab::stopping::{check_principal_properties, principal_sets, PrincipalNode};
use martlab::{FilteredSpace, MassRule, MeasurableSet};

/// Canonical node: (start level, band, sorted atoms of P, sorted atoms of E(P)).
type Node = (usize, i32, Vec<usize>, Vec<usize>);

/// The `k` with `2^{k-1} < x <= 2^k`.
fn band(x: f64) -> i32 {
    let mut k: i32 = 0;
    while 2f64.powi(k) < x {
        k += 1;
    }
    while 2f64.powi(k - 1) >= x {
        k -= 1;
    }
    k
}

/// Average of `1_P sigma` over the level-`j` block containing `atom`.
fn local_average(space: &FilteredSpace, sigma: &[f64], inside: &[bool], j: usize, atom: usize) -> f64 {
    let block = space.block_atoms(j, space.block_of(j, atom));
    let mass: f64 = block.iter().map(|&a| space.mass(a)).sum();
    let weighted: f64 = block.iter().filter(|&&a| inside[a]).map(|&a| space.mass(a) * sigma[a]).sum();
    weighted / mass
}

fn reference(space: &FilteredSpace, sigma: &[f64], level: usize, atoms: Vec<usize>, k2: i32, out: &mut Vec<Node>) {
    let mut inside = vec![false; space.num_atoms()];
    for &a in &atoms {
        inside[a] = true;
    }
    let cut = 2f64.powi(k2 + 1);
    let stop: Vec<Option<usize>> = atoms
        .iter()
        .map(|&a| (level..space.num_levels()).find(|&j| local_average(space, sigma, &inside, j, a) > cut))
        .collect();
    let kept: Vec<usize> = atoms.iter().zip(&stop).filter(|(_, t)| t.is_none()).map(|(&a, _)| a).collect();
    out.push((level, k2, atoms.clone(), kept));
    for j in level + 1..space.num_levels() {
        let mut groups: Vec<(i32, Vec<usize>)> = Vec::new();
        for (&a, t) in atoms.iter().zip(&stop) {
            if *t == Some(j) {
                let l = band(local_average(space, sigma, &inside, j, a));
                match groups.iter_mut().find(|(g, _)| *g == l) {
                    Some((_, v)) => v.push(a),
                    None => groups.push((l, vec![a])),
                }
            }
        }
        groups.sort_by_key(|(l, _)| *l);
        for (l, members) in groups {
            reference(space, sigma, j, members, l, out);
        }
    }
}

fn flatten(space: &FilteredSpace, tree: &PrincipalNode) -> Vec<Node> {
    tree.nodes()
        .into_iter()
        .map(|n| {
            let mut kept = n.stopped_atoms.clone();
            kept.sort_unstable();
            (n.kappa1, n.kappa2, n.set().atoms(space), kept)
        })
        .collect()
}

fn saw_tooth(n: usize, spikes: &[usize], height: f64) -> Vec<f64> {
    (0..n).map(|a| if spikes.contains(&a) { height } else { 0.05 + (a % 5) as f64 * 0.01 }).collect()
}

#[test]
fn spike_example_matches_reference() {
    let space = FilteredSpace::dyadic(4, &MassRule::Uniform).unwrap();
    let sigma = saw_tooth(16, &[3, 11, 12], 40.0);
    let root = MeasurableSet::block(0, 0);
    let tree = principal_sets(&space, &sigma, &root, 0).unwrap();
    let mut expected = Vec::new();
    reference(&space, &sigma, 0, (0..16).collect(), tree.kappa2, &mut expected);
    let mut got = flatten(&space, &tree);
    got.sort();
    expected.sort();
    assert_eq!(got, expected);
    // root average ~7.6 gives band 3; each spike's level-3 pair averages ~20 > 16
    assert_eq!(tree.kappa2, 3);
    assert_eq!(tree.children.len(), 1);
    let child = &tree.children[0];
    assert_eq!((child.kappa1, child.kappa2, child.block_ids.clone()), (3, 5, vec![1, 5, 6]));
    assert!(check_principal_properties(&space, &sigma, &tree, 0).all());
}

#[test]
fn constant_sigma_has_no_children() {
    let space = FilteredSpace::dyadic(3, &MassRule::Uniform).unwrap();
    let tree = principal_sets(&space, &[1.5; 8], &MeasurableSet::block(0, 0), 0).unwrap();
    assert_eq!(tree.kappa2, 1);
    assert!(tree.children.is_empty());
    assert_eq!(tree.stopped_atoms.len(), 8);
}

#[test]
fn vanishing_root_is_rejected() {
    let space = FilteredSpace::dyadic(2, &MassRule::Uniform).unwrap();
    let sigma = [0.0, 0.0, 1.0, 1.0];
    assert!(principal_sets(&space, &sigma, &MeasurableSet::block(1, 0), 1).is_err());
    assert!(principal_sets(&space, &sigma, &MeasurableSet::block(1, 1), 1).is_ok());
}

proptest! {
    #[test]
    fn tree_matches_reference(
        depth in 1usize..=6,
        raw in vec(0.0f64..1.0, 64),
        heavy in vec(0usize..64, 0..6),
        level in 0usize..3,
        pick in 0usize..64,
    ) {
        let space = FilteredSpace::dyadic(depth, &MassRule::Uniform).unwrap();
        let n = space.num_atoms();
        let mut sigma: Vec<f64> = raw[..n].iter().map(|v| v * v * 2.0).collect();
        for &h in &heavy {
            sigma[h % n] += 50.0;
        }
        let i = level.min(depth);
        let b = pick % space.num_blocks(i);
        let root = MeasurableSet::block(i, b);
        let tree = match principal_sets(&space, &sigma, &root, i) {
            Ok(t) => t,
            Err(_) => {
                prop_assume!(false);
                unreachable!()
            }
        };

        let mut expected = Vec::new();
        reference(&space, &sigma, i, root.atoms(&space), tree.kappa2, &mut expected);
        let mut got = flatten(&space, &tree);
        got.sort();
        expected.sort();
        prop_assert_eq!(&got, &expected);

        // the root band brackets the root average
        let avg = sigma.iter().zip(space.masses()).enumerate()
            .filter(|(a, _)| space.block_of(i, *a) == b)
            .map(|(_, (s, m))| s * m)
            .sum::<f64>() / space.block_mass(i, b);
        prop_assert!(2f64.powi(tree.kappa2 - 1) < avg && avg <= 2f64.powi(tree.kappa2));

        // E(P) are disjoint, cover the root, and carry at least half of mu(P)
        let mut hits = vec![0; n];
        for (_, _, p, kept) in &got {
            for &a in kept {
                hits[a] += 1;
            }
            let mp: f64 = p.iter().map(|&a| space.mass(a)).sum();
            let me: f64 = kept.iter().map(|&a| space.mass(a)).sum();
            prop_assert!(mp <= 2.0 * me * (1.0 + 1e-12));
        }
        for a in 0..n {
            prop_assert_eq!(hits[a], usize::from(space.block_of(i, a) == b));
        }
        prop_assert!(check_principal_properties(&space, &sigma, &tree, i).all());
    }
}
