//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use flinfer_core::attack::LocalDeltaBank;
use flinfer_core::cluster::{Cut, Linkage, Partition};
use flinfer_core::nn::{Architecture, Network, UpdateDelta};
use flinfer_core::rng::{stream, Purpose};
use ndarray::{Array1, Array2};
use rand::Rng;

/// Relative error with an absolute floor so vanishing gradients compare on
/// an absolute scale.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// A random net with at most three layers and at most 20 neurons per layer.
pub fn random_small_net(seed: u64) -> (Network, Array2<f64>, Vec<usize>) {
    let mut rng = stream(seed, Purpose::Init, 1, 0);
    let input = rng.random_range(2..=8);
    let depth = rng.random_range(0..=2);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(2..=20)).collect();
    let classes = rng.random_range(2..=6);
    let net = Network::init(&Architecture::new(input, hidden, classes), &mut rng).unwrap();
    let n = rng.random_range(1..=5);
    let batch = Array2::from_shape_simple_fn((n, input), || rng.random_range(-1.0..1.0));
    let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
    (net, batch, labels)
}

/// Network with one weight or bias moved by `h`.
fn perturbed(net: &Network, layer: usize, index: ParamIndex, h: f64) -> Network {
    let mut update = UpdateDelta::zeros_like(net);
    let l = &mut update.layers_mut()[layer];
    match index {
        ParamIndex::Weight(r, c) => l.weights[(r, c)] = h,
        ParamIndex::Bias(r) => l.bias[r] = h,
    }
    net.apply(&update).unwrap()
}

#[derive(Clone, Copy)]
enum ParamIndex {
    Weight(usize, usize),
    Bias(usize),
}

/// Signs of every hidden pre-activation, computed independently of the
/// library's forward pass.
fn relu_pattern(net: &Network, batch: &Array2<f64>) -> Vec<bool> {
    let mut pattern = Vec::new();
    let mut x = batch.clone();
    let hidden = &net.layers()[..net.layers().len() - 1];
    for layer in hidden {
        let z = x.dot(&layer.weights().t()) + layer.bias();
        pattern.extend(z.iter().map(|&v| v > 0.0));
        x = z.mapv(|v| v.max(0.0));
    }
    pattern
}

/// Largest relative error between the analytic gradient and central
/// differences with step `h`, over every parameter whose perturbation keeps
/// all ReLU units on the same side of their kink (the loss is not
/// differentiable across a kink, so differences there say nothing).
pub fn max_gradient_error(net: &Network, batch: &Array2<f64>, labels: &[usize], h: f64) -> f64 {
    gradient_check(net, batch, labels, h).0
}

/// `(worst relative error, parameters checked, parameters skipped at a kink)`.
pub fn gradient_check(net: &Network, batch: &Array2<f64>, labels: &[usize], h: f64) -> (f64, usize, usize) {
    let (_, grad) = net.loss_and_gradient(batch.view(), labels).unwrap();
    let loss = |n: &Network| n.loss(batch.view(), labels).unwrap();
    let (mut checked, mut skipped) = (0, 0);
    let mut worst: f64 = 0.0;
    for (li, layer) in net.layers().iter().enumerate() {
        let (rows, cols) = layer.weights().dim();
        let mut indices: Vec<ParamIndex> = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                indices.push(ParamIndex::Weight(r, c));
            }
            indices.push(ParamIndex::Bias(r));
        }
        for idx in indices {
            let (up, down) = (perturbed(net, li, idx, h), perturbed(net, li, idx, -h));
            if relu_pattern(&up, batch) != relu_pattern(&down, batch) {
                skipped += 1;
                continue;
            }
            checked += 1;
            let numeric = (loss(&up) - loss(&down)) / (2.0 * h);
            let analytic = match idx {
                ParamIndex::Weight(r, c) => grad.layers()[li].weights[(r, c)],
                ParamIndex::Bias(r) => grad.layers()[li].bias[r],
            };
            worst = worst.max(relative_error(analytic, numeric));
        }
    }
    (worst, checked, skipped)
}

/// Runs the gradient check on `count` random nets starting at `first_seed`.
/// Returns the worst error seen and the checked and skipped parameter
/// totals.
pub fn gradient_oracle(first_seed: u64, count: u64) -> (f64, usize, usize) {
    (first_seed..first_seed + count)
        .map(|seed| {
            let (net, batch, labels) = random_small_net(seed);
            gradient_check(&net, &batch, &labels, 1e-4)
        })
        .fold((0.0, 0, 0), |acc, x| (acc.0.max(x.0), acc.1 + x.1, acc.2 + x.2))
}

/// A bank over `classes` labels and `width` penultimate neurons where every
/// own-label update is positive, cross-label updates are negative and about
/// half of the weights fail the 0.5 ratio filter.
pub fn random_bank(classes: usize, width: usize, seed: u64) -> LocalDeltaBank {
    let mut rng = stream(seed, Purpose::Auxiliary, 9, 0);
    let net = Network::zeros(&Architecture::new(2, vec![width], classes)).unwrap();
    let deltas = (0..classes)
        .map(|trained| {
            let mut d = UpdateDelta::zeros_like(&net);
            for row in 0..classes {
                let values: Array1<f64> = if row == trained {
                    Array1::from_shape_simple_fn(width, || rng.random_range(0.5..2.0))
                } else {
                    Array1::from_shape_simple_fn(width, || -rng.random_range(0.01..1.2))
                };
                d.output_layer_mut().weights.row_mut(row).assign(&values);
            }
            d
        })
        .collect();
    LocalDeltaBank::from_deltas(0, deltas).unwrap()
}

/// Observed mean update built from the aggregation model: `x` clients train
/// `label` and the remaining `s·N_L − x` label slots contribute the
/// cross-label mean, all divided by `s`.
pub fn synthesized_observation(bank: &LocalDeltaBank, label: usize, x: f64, s: f64, n_l: f64) -> UpdateDelta {
    let mut out = bank.delta(0).clone();
    out.scale(0.0);
    let w_p = bank.update(label, label).to_owned();
    let w_n = bank.cross_mean(label);
    let row = (&w_p * x + &w_n * (s * n_l - x)) / s;
    out.output_layer_mut().weights.row_mut(label).assign(&row);
    out
}

fn linkage_distance(points: &[Vec<f64>], a: &[usize], b: &[usize], method: Linkage) -> f64 {
    let pairs = a.iter().flat_map(|&i| b.iter().map(move |&j| (i, j)));
    let dists: Vec<f64> = pairs
        .map(|(i, j)| {
            points[i]
                .iter()
                .zip(&points[j])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    match method {
        Linkage::Single => dists.iter().copied().fold(f64::INFINITY, f64::min),
        Linkage::Complete => dists.iter().copied().fold(0.0, f64::max),
        Linkage::Average => dists.iter().sum::<f64>() / dists.len() as f64,
    }
}

/// Exhaustive agglomeration: every step recomputes the linkage distance of
/// every pair of current clusters from their members and merges the closest
/// pair, ties going to the pair with the smaller member ids. Returns the
/// partition after applying every merge at or below the cut threshold.
pub fn brute_force_partition(points: &[Vec<f64>], method: Linkage, cut: Cut) -> Partition {
    let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
    let mut history: Vec<(f64, Vec<Vec<usize>>)> = vec![(0.0, clusters.clone())];
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let d = linkage_distance(points, &clusters[a], &clusters[b], method);
                let ma = clusters[a][0];
                let mb = clusters[b][0];
                let key = (d, ma.min(mb), ma.max(mb));
                let better = match best {
                    None => true,
                    Some((bd, lo, hi, _, _)) => d < bd || (d == bd && (key.1, key.2) < (lo, hi)),
                };
                if better {
                    best = Some((d, key.1, key.2, a, b));
                }
            }
        }
        let (d, _, _, a, b) = best.unwrap();
        let merged_b = clusters.remove(b);
        clusters[a].extend(merged_b);
        clusters[a].sort_unstable();
        history.push((d, clusters.clone()));
    }
    let max = history.iter().map(|(d, _)| *d).fold(0.0, f64::max);
    let threshold = match cut {
        Cut::Absolute(t) => t,
        Cut::Relative(f) => f * max,
    };
    // Replay the accepted merges on the leaf sets.
    let mut groups: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
    for window in history.windows(2) {
        let (d, after) = (&window[1].0, &window[1].1);
        if *d > threshold {
            continue;
        }
        let before = &window[0].1;
        let joined: Vec<&Vec<usize>> = after.iter().filter(|g| !before.contains(g)).collect();
        let new_group = joined[0];
        let mut members: Vec<usize> = Vec::new();
        groups.retain(|g| {
            if g.iter().any(|m| new_group.contains(m)) {
                members.extend(g);
                false
            } else {
                true
            }
        });
        groups.push(members);
    }
    Partition::new(groups)
}
