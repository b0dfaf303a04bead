use proptest::collection::vec;
use proptest::prelude::*;

use martlab::constants::{
    ainfty_constant, ap_constant, carleson_constant, carleson_constant_stopping, carleson_constant_with,
    carleson_ratio_at, sawyer_max_constant, sawyer_max_constant_with, SetMode,
};
use martlab::operators::{cond_exp, cond_exp_weighted, doob_max, integral, lp_norm};
use martlab::space::measure;
use martlab::stopping::{
    count_stopping_times, enumerate_stopping_times, hitting_time, is_stopping_time, level_decomposition,
};
use martlab::verify::power_sum_inequality;
use martlab::{AdaptedFamily, FilteredSpace, MeasurableSet, WeightVector};

const TOL: f64 = 1e-10;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * a.abs().max(b.abs()).max(1e-300)
}

/// Each level splits every block of the previous one by the atom labels.
fn build_space(masses: Vec<f64>, labels: Vec<Vec<u8>>) -> FilteredSpace {
    let n = masses.len();
    let mut partitions: Vec<Vec<usize>> = Vec::new();
    for lab in &labels {
        let mut keys: Vec<(usize, u8)> = Vec::new();
        let part = (0..n)
            .map(|a| {
                let key = (partitions.last().map_or(0, |p| p[a]), lab[a]);
                match keys.iter().position(|k| *k == key) {
                    Some(id) => id,
                    None => {
                        keys.push(key);
                        keys.len() - 1
                    }
                }
            })
            .collect();
        partitions.push(part);
    }
    FilteredSpace::from_partitions(masses, partitions).unwrap()
}

fn arb_space_sized(max_atoms: usize, max_levels: usize) -> impl Strategy<Value = FilteredSpace> {
    (1..=max_atoms, 1..=max_levels)
        .prop_flat_map(|(n, levels)| (vec(0.05f64..3.0, n), vec(vec(0u8..3, n), levels)))
        .prop_map(|(m, l)| build_space(m, l))
}

fn arb_space() -> impl Strategy<Value = FilteredSpace> {
    arb_space_sized(12, 5)
}

/// A space with `k` signed functions on its atoms.
fn with_functions(k: usize) -> impl Strategy<Value = (FilteredSpace, Vec<Vec<f64>>)> {
    arb_space().prop_flat_map(move |s| {
        let n = s.num_atoms();
        (Just(s), vec(vec(-5.0f64..5.0, n), k))
    })
}

/// A space with `k` strictly positive functions.
fn with_positive(k: usize) -> impl Strategy<Value = (FilteredSpace, Vec<Vec<f64>>)> {
    arb_space().prop_flat_map(move |s| {
        let n = s.num_atoms();
        (Just(s), vec(vec(0.01f64..20.0, n), k))
    })
}

fn family_from(space: &FilteredSpace, raw: &[f64]) -> AdaptedFamily {
    let mut it = raw.iter().cycle();
    let levels = (0..space.num_levels())
        .map(|i| (0..space.num_blocks(i)).map(|_| *it.next().unwrap()).collect())
        .collect();
    AdaptedFamily { levels }
}

fn dot(space: &FilteredSpace, f: &[f64], g: &[f64]) -> f64 {
    let fg: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
    integral(space, &fg)
}

proptest! {
    #[test]
    fn refinement_holds((space, _) in with_functions(0)) {
        for j in 0..space.num_levels() {
            for i in 0..j {
                for a in 0..space.num_atoms() {
                    for b in 0..space.num_atoms() {
                        if space.block_of(j, a) == space.block_of(j, b) {
                            prop_assert_eq!(space.block_of(i, a), space.block_of(i, b));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn measure_is_additive_and_bounded((space, w) in with_positive(1), pick in vec(any::<bool>(), 40)) {
        let w = WeightVector::new(w[0].clone()).unwrap();
        let lo = w.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = w.values.iter().cloned().fold(0.0, f64::max);
        let level = space.finest_level();
        let nb = space.num_blocks(level);
        let (e, f): (Vec<usize>, Vec<usize>) = (0..nb).partition(|&b| pick[b % pick.len()]);
        let e = MeasurableSet::new(level, e);
        let f = MeasurableSet::new(level, f);
        let all = MeasurableSet::new(level, (0..nb).collect());
        let me = measure(&space, &e, None).unwrap();
        let mf = measure(&space, &f, None).unwrap();
        prop_assert!(close(measure(&space, &all, None).unwrap(), me + mf));
        let we = measure(&space, &e, Some(&w)).unwrap();
        prop_assert!(we <= hi * me * (1.0 + 1e-12) && we >= lo * me * (1.0 - 1e-12));
    }

    #[test]
    fn conditional_expectation_identities((space, fs) in with_functions(2), i in 0usize..8, j in 0usize..8) {
        let (f, g) = (&fs[0], &fs[1]);
        let last = space.finest_level();
        let (i, j) = ((i.min(j)).min(last), (i.max(j)).min(last));
        // self-adjointness
        let lhs = dot(&space, &cond_exp(&space, i, f), g);
        let rhs = dot(&space, f, &cond_exp(&space, i, g));
        prop_assert!((lhs - rhs).abs() <= TOL * (1.0 + lhs.abs()));
        // tower rule and martingale property
        let ej = cond_exp(&space, j, f);
        let ei = cond_exp(&space, i, f);
        for (a, b) in cond_exp(&space, i, &ej).iter().zip(&ei) {
            prop_assert!((a - b).abs() <= TOL * (1.0 + b.abs()));
        }
        // pull-out with a level-i measurable multiplier
        let h = cond_exp(&space, i, g);
        let hf: Vec<f64> = h.iter().zip(f).map(|(a, b)| a * b).collect();
        for ((l, hh), e) in cond_exp(&space, i, &hf).iter().zip(&h).zip(&ei) {
            prop_assert!((l - hh * e).abs() <= TOL * (1.0 + (hh * e).abs()));
        }
    }

    #[test]
    fn weighted_conditional_expectation((space, fs) in with_positive(2), i in 0usize..8) {
        let i = i.min(space.finest_level());
        let (g, w) = (&fs[0], &fs[1]);
        let ew = cond_exp(&space, i, w);
        let gw: Vec<f64> = g.iter().zip(w).map(|(a, b)| a * b).collect();
        let egw = cond_exp(&space, i, &gw);
        let weighted = cond_exp_weighted(&space, i, g, w).unwrap();
        for a in 0..space.num_atoms() {
            prop_assert!(close(weighted[a] * ew[a], egw[a]));
        }
    }

    #[test]
    fn jensen_both_directions((space, fs) in with_positive(1), s in 0.1f64..4.0, i in 0usize..8) {
        let i = i.min(space.finest_level());
        let f = &fs[0];
        let fs_pow: Vec<f64> = f.iter().map(|v| v.powf(s)).collect();
        let e_pow = cond_exp(&space, i, &fs_pow);
        let pow_e = cond_exp(&space, i, f);
        for a in 0..space.num_atoms() {
            let pe = pow_e[a].powf(s);
            if s >= 1.0 {
                prop_assert!(pe <= e_pow[a] * (1.0 + 1e-12));
            } else {
                prop_assert!(pe >= e_pow[a] * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn doob_inequality((space, fs) in with_functions(1), p in 1.1f64..6.0) {
        let f = &fs[0];
        let star = doob_max(&space, f);
        let lhs = lp_norm(&space, &star, p, None).unwrap();
        let rhs = p / (p - 1.0) * lp_norm(&space, f, p, None).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-9));
        for (s, v) in star.iter().zip(&cond_exp(&space, space.finest_level(), f)) {
            prop_assert!(*s >= v.abs() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn ap_decreases_towards_ainfty((space, fs) in with_positive(1)) {
        let w = &fs[0];
        let ainf = ainfty_constant(&space, w).unwrap().value;
        let mut prev = f64::INFINITY;
        for p in [2.0, 4.0, 8.0, 16.0] {
            let ap = ap_constant(&space, w, p).unwrap().value;
            prop_assert!(ap >= 1.0 - 1e-12);
            prop_assert!(ap <= prev * (1.0 + 1e-6));
            prop_assert!(ap >= ainf * (1.0 - 1e-6));
            prev = ap;
        }
    }

    #[test]
    fn ap_witness_and_duality((space, fs) in with_positive(1), p in 1.2f64..5.0) {
        let w = &fs[0];
        let r = ap_constant(&space, w, p).unwrap();
        let wit = r.witness.clone().unwrap();
        let a = space.block_atoms(wit.level, wit.blocks[0])[0];
        let pp = p / (p - 1.0);
        let sigma: Vec<f64> = w.iter().map(|v| v.powf(1.0 - pp)).collect();
        let ew = cond_exp(&space, wit.level, w)[a];
        let es = cond_exp(&space, wit.level, &sigma)[a];
        prop_assert!(close(r.value, ew * es.powf(p - 1.0)));
        // [sigma]_{A_p'} = [w]_{A_p}^{1/(p-1)}
        let dual = ap_constant(&space, &sigma, pp).unwrap().value;
        prop_assert!((dual - r.value.powf(1.0 / (p - 1.0))).abs() <= 1e-9 * dual);
    }

    #[test]
    fn carleson_blocks_equal_unions((space, fs) in with_positive(1), theta in 1.0f64..3.0) {
        let nu = family_from(&space, &fs[0]);
        let blocks = carleson_constant(&space, &nu, theta).unwrap();
        let unions = carleson_constant_with(&space, &nu, theta, SetMode::Exhaustive).unwrap();
        prop_assert!(unions.value <= blocks.value * (1.0 + 1e-9));
        prop_assert!(blocks.value <= unions.value * (1.0 + 1e-9));
        let wit = blocks.witness.unwrap();
        prop_assert!(close(carleson_ratio_at(&space, &nu, theta, &wit.set()).unwrap(), blocks.value));
    }

    #[test]
    fn sawyer_blocks_equal_unions((space, fs) in with_positive(3), p in 1.2f64..3.0, dq in 0.0f64..2.0) {
        let alpha = family_from(&space, &fs[0]);
        let q = p + dq;
        let blocks = sawyer_max_constant(&space, &alpha, &fs[1], &fs[2], p, q).unwrap().value;
        let unions = sawyer_max_constant_with(&space, &alpha, &fs[1], &fs[2], p, q, SetMode::Exhaustive).unwrap().value;
        prop_assert!((blocks - unions).abs() <= 1e-9 * blocks.max(unions));
    }

    #[test]
    fn carleson_stopping_times_agree(
        space in arb_space_sized(6, 3),
        raw in vec(0.0f64..4.0, 1..20),
        theta in 1.0f64..2.5,
    ) {
        prop_assume!(count_stopping_times(&space) <= 4096);
        let nu = family_from(&space, &raw);
        let a = carleson_constant(&space, &nu, theta).unwrap().value;
        let b = carleson_constant_stopping(&space, &nu, theta, 4096).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-9 * a.max(b), "blocks {} stopping {}", a, b);
    }

    #[test]
    fn stopping_times_are_adapted(space in arb_space_sized(6, 4), raw in vec(0.0f64..4.0, 1..20), lambda in 0.0f64..4.0) {
        prop_assume!(count_stopping_times(&space) <= 4096);
        let times = enumerate_stopping_times(&space, 4096).unwrap();
        prop_assert_eq!(times.len() as u128, count_stopping_times(&space));
        for t in &times {
            prop_assert!(is_stopping_time(&space, t).holds);
        }
        let tau = hitting_time(&space, &family_from(&space, &raw), lambda);
        prop_assert!(is_stopping_time(&space, &tau).holds);
        prop_assert!(times.contains(&tau));
    }

    #[test]
    fn level_sets_partition_the_maximal_set((space, fs) in with_functions(1), lambda in 0.0f64..4.0) {
        let f = &fs[0];
        let levels = (0..space.num_levels())
            .map(|i| {
                let e = cond_exp(&space, i, f);
                (0..space.num_blocks(i)).map(|b| e[space.block_atoms(i, b)[0]].abs()).collect()
            })
            .collect();
        let fam = AdaptedFamily { levels };
        let pieces = level_decomposition(&space, &fam, lambda);
        let mut hits = vec![0; space.num_atoms()];
        for piece in &pieces {
            for a in piece.atoms(&space) {
                hits[a] += 1;
            }
        }
        let star = doob_max(&space, f);
        for a in 0..space.num_atoms() {
            prop_assert_eq!(hits[a], usize::from(star[a] > lambda));
        }
    }

    #[test]
    fn power_sum_sides(a in vec(0.0f64..10.0, 0..64), s in 1.0f64..8.0) {
        let sides = power_sum_inequality(&a, s).unwrap();
        prop_assert!(sides.holds(1.0 + 1e-9));
    }

    #[test]
    fn space_json_round_trip((space, _) in with_functions(0)) {
        let text = serde_json::to_string(&space).unwrap();
        let back: FilteredSpace = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, space);
    }
}
