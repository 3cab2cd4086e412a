use flinfer_core::data::{gen_synthetic, LabeledDataset};
use flinfer_core::experiment::{load_data, DataSource, ExperimentConfig};
use flinfer_core::fl::{run_round, ClientShard, FlConfig, LabelAllocation};
use flinfer_core::nn::{delta, train_local, Architecture, Network};
use flinfer_core::rng::{stream, Purpose};
use ndarray::{Array1, Array2};

/// Client `c` owns the listed sample indices, all filed under label 0.
fn allocation(shards: Vec<Vec<usize>>, classes: usize) -> LabelAllocation {
    LabelAllocation {
        clients: shards
            .into_iter()
            .map(|idx| {
                let mut indices = vec![Vec::new(); classes];
                indices[0] = idx;
                ClientShard {
                    main_labels: vec![0],
                    indices,
                }
            })
            .collect(),
        classes,
        used_replacement: false,
    }
}

/// Full-batch cross-entropy gradient of a softmax-regression model, written
/// out by hand: `dW = mean((p − onehot) xᵀ)`, `db = mean(p − onehot)`.
fn softmax_regression_gradient(w: &Array2<f64>, b: &Array1<f64>, xs: &[Vec<f64>], ys: &[usize]) -> (Array2<f64>, Array1<f64>) {
    let (k, d) = w.dim();
    let mut gw = Array2::zeros((k, d));
    let mut gb = Array1::zeros(k);
    for (x, &y) in xs.iter().zip(ys) {
        let logits: Vec<f64> = (0..k).map(|r| b[r] + (0..d).map(|c| w[(r, c)] * x[c]).sum::<f64>()).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for r in 0..k {
            let err = exps[r] / total - if r == y { 1.0 } else { 0.0 };
            gb[r] += err / xs.len() as f64;
            for c in 0..d {
                gw[(r, c)] += err * x[c] / xs.len() as f64;
            }
        }
    }
    (gw, gb)
}

#[test]
fn two_client_round_matches_hand_computed_mean() {
    let xs = [vec![1.0, 0.5], vec![-0.3, 2.0], vec![0.7, -1.0], vec![0.2, 0.2]];
    let ys = vec![0, 1, 2, 1];
    let features = Array2::from_shape_vec((4, 2), xs.concat()).unwrap();
    let data = LabeledDataset::new(features, ys.clone(), 3).unwrap();
    let alloc = allocation(vec![vec![0, 1], vec![2, 3]], 3);
    let global = Network::init(&Architecture::new(2, vec![], 3), &mut stream(4, Purpose::Init, 0, 0)).unwrap();
    let cfg = FlConfig {
        n_participants: 2,
        selection_fraction: 1.0,
        local_batch_size: 2,
        local_lr: 0.1,
        local_epochs: 1,
        main_labels_choices: vec![1],
        ..FlConfig::default()
    };
    let outcome = run_round(&global, &alloc, &data, &cfg, 0, None).unwrap();
    let observed = outcome.observation.observed_delta().unwrap();

    let layer = &global.layers()[0];
    let (w, b) = (layer.weights().clone(), layer.bias().clone());
    let (gw0, gb0) = softmax_regression_gradient(&w, &b, &xs[0..2], &ys[0..2]);
    let (gw1, gb1) = softmax_regression_gradient(&w, &b, &xs[2..4], &ys[2..4]);
    let expected_w = (&gw0 + &gw1) * (-0.1 / 2.0);
    let expected_b = (&gb0 + &gb1) * (-0.1 / 2.0);
    let got = &observed.layers()[0];
    for (g, e) in got.weights.iter().zip(expected_w.iter()) {
        assert!((g - e).abs() < 1e-9, "{g} vs {e}");
    }
    for (g, e) in got.bias.iter().zip(expected_b.iter()) {
        assert!((g - e).abs() < 1e-9, "{g} vs {e}");
    }
    assert_eq!(outcome.truth.selected, vec![0, 1]);
    assert_eq!(outcome.truth.main_label_owners, vec![2, 0, 0]);
}

#[test]
fn single_selected_client_becomes_the_global_model() {
    let data = gen_synthetic(3, 4, 30, 0.3, &mut stream(2, Purpose::Dataset, 0, 0)).unwrap();
    let alloc = allocation((0..5).map(|c| (c * 10..c * 10 + 10).collect()).collect(), 3);
    let cfg = FlConfig {
        n_participants: 5,
        selection_fraction: 0.2,
        local_batch_size: 4,
        local_lr: 0.05,
        local_epochs: 2,
        main_labels_choices: vec![1],
        seed: 9,
        ..FlConfig::default()
    };
    let global = Network::init(&Architecture::new(4, vec![6], 3), &mut stream(9, Purpose::Init, 0, 0)).unwrap();
    let outcome = run_round(&global, &alloc, &data, &cfg, 3, None).unwrap();
    let [client] = outcome.truth.selected[..] else {
        panic!("expected one client, got {:?}", outcome.truth.selected)
    };
    let shard = alloc.clients[client].dataset(&data);
    let local = train_local(
        &global,
        &shard,
        &cfg.train_params(),
        &mut stream(9, Purpose::ClientTraining, 3, client as u64),
    )
    .unwrap();
    let gap = delta(&outcome.observation.after, &local).unwrap();
    assert!(gap.max_abs() < 1e-12);
}

#[test]
fn identical_clients_aggregate_to_one_local_model() {
    let data = gen_synthetic(3, 4, 10, 0.3, &mut stream(5, Purpose::Dataset, 0, 0)).unwrap();
    let everyone: Vec<usize> = (0..data.len()).collect();
    let alloc = allocation(vec![everyone; 4], 3);
    let cfg = FlConfig {
        n_participants: 4,
        selection_fraction: 1.0,
        local_batch_size: data.len(),
        local_lr: 0.1,
        local_epochs: 3,
        main_labels_choices: vec![1],
        ..FlConfig::default()
    };
    let global = Network::init(&Architecture::new(4, vec![5], 3), &mut stream(5, Purpose::Init, 0, 0)).unwrap();
    let outcome = run_round(&global, &alloc, &data, &cfg, 0, None).unwrap();
    let shard = alloc.clients[2].dataset(&data);
    let local = train_local(&global, &shard, &cfg.train_params(), &mut stream(0, Purpose::ClientTraining, 0, 2)).unwrap();
    assert!(delta(&outcome.observation.after, &local).unwrap().max_abs() < 1e-12);
}

#[test]
fn attacker_upload_is_reported_only_when_selected() {
    let data = gen_synthetic(3, 4, 30, 0.3, &mut stream(2, Purpose::Dataset, 0, 0)).unwrap();
    let alloc = allocation((0..6).map(|c| (c * 10..c * 10 + 10).collect()).collect(), 3);
    let cfg = FlConfig {
        n_participants: 6,
        selection_fraction: 0.5,
        main_labels_choices: vec![1],
        ..FlConfig::default()
    };
    let global = Network::init(&Architecture::new(4, vec![6], 3), &mut stream(1, Purpose::Init, 0, 0)).unwrap();
    for round in 0..6 {
        for attacker in 0..6 {
            let out = run_round(&global, &alloc, &data, &cfg, round, Some(attacker)).unwrap();
            assert_eq!(out.attacker_delta.is_some(), out.truth.selected.contains(&attacker));
        }
    }
}

fn replay(seed: u64) -> (Vec<u8>, Vec<Vec<usize>>) {
    let source = DataSource::Synthetic {
        classes: 10,
        dim: 20,
        per_class: 1500,
        holdout_per_class: 20,
        spread: 0.3,
    };
    let data = load_data(&source, seed).unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.fl.n_participants = 20;
    cfg.fl.seed = seed;
    let mut sim = cfg.simulator(&data).unwrap();
    let mut owners = Vec::new();
    for _ in 0..4 {
        owners.push(sim.step().unwrap().truth.main_label_owners);
    }
    (sim.global.to_bytes(), owners)
}

#[test]
fn replay_under_fixed_seed_is_bit_identical() {
    assert_eq!(replay(17), replay(17));
    assert_ne!(replay(17).0, replay(18).0);
}

#[test]
fn compressed_training_still_converges() {
    let source = DataSource::Synthetic {
        classes: 10,
        dim: 20,
        per_class: 1500,
        holdout_per_class: 200,
        spread: 0.3,
    };
    let data = load_data(&source, 0).unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.fl.n_participants = 20;
    cfg.fl.selection_fraction = 0.5;
    cfg.fl.local_lr = 0.2;
    cfg.fl.compression_rate = 0.5;
    let mut sim = cfg.simulator(&data).unwrap();
    for _ in 0..100 {
        sim.step().unwrap();
    }
    let acc = sim.global.accuracy(&data.test).unwrap();
    assert!(acc >= 0.9, "accuracy {acc}");
}

