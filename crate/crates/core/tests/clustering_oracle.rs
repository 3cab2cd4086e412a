mod support;

use flinfer_core::cluster::{cluster, linkage, Cut, Linkage, Partition};
use flinfer_core::rng::{stream, Purpose};
use proptest::prelude::*;
use rand::Rng;

/// Up to seven points of dimension 1..=4. Even seeds use small integer
/// coordinates so distance ties are common.
fn random_points(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, Purpose::Auxiliary, 3, 0);
    let n = rng.random_range(1..=7);
    let dim = rng.random_range(1..=4);
    let grid = seed % 2 == 0;
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    if grid {
                        rng.random_range(0..4) as f64
                    } else {
                        rng.random_range(-5.0..5.0)
                    }
                })
                .collect()
        })
        .collect()
}

#[test]
fn matches_exhaustive_reference_on_small_instances() {
    for seed in 0..1000u64 {
        let pts = random_points(seed);
        let mut rng = stream(seed, Purpose::Auxiliary, 4, 0);
        let cuts = [Cut::Relative(0.5), Cut::Relative(rng.random_range(0.0..1.0)), Cut::Absolute(rng.random_range(0.0..6.0))];
        // Average linkage accumulates rounding differently in the two
        // implementations, so exact ties on the grid could resolve apart.
        let methods: &[Linkage] = if seed % 2 == 0 {
            &[Linkage::Single, Linkage::Complete]
        } else {
            &[Linkage::Single, Linkage::Complete, Linkage::Average]
        };
        for &method in methods {
            for cut in cuts {
                let got = cluster(&pts, method, cut).unwrap();
                let want = support::brute_force_partition(&pts, method, cut);
                assert_eq!(got, want, "seed {seed} {method} cut {cut}: {pts:?}");
            }
        }
    }
}

#[test]
fn complete_linkage_merge_distances_never_decrease() {
    for seed in 0..200 {
        let pts = random_points(seed);
        let d = linkage(&pts, Linkage::Complete).unwrap();
        assert_eq!(d.merges().len(), pts.len() - 1);
        assert!(d.merges().windows(2).all(|w| w[0].distance <= w[1].distance));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn relabelling_inputs_relabels_clusters(seed in 1u64..100_000, shift in 0usize..7) {
        // Continuous coordinates only: permutation changes which ids win ties.
        let pts = random_points(2 * seed + 1);
        let n = pts.len();
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let mut moved = vec![Vec::new(); n];
        for (i, p) in pts.iter().enumerate() {
            moved[perm[i]] = p.clone();
        }
        let base = cluster(&pts, Linkage::Complete, Cut::default()).unwrap();
        let after = cluster(&moved, Linkage::Complete, Cut::default()).unwrap();
        let mapped = Partition::new(
            base.groups().iter().map(|g| g.iter().map(|&i| perm[i]).collect()).collect(),
        );
        prop_assert_eq!(after, mapped);
    }
}
