use std::path::PathBuf;

use flinfer_core::data::{gen_synthetic, load_mnist, mnist_paths, MnistSplit};
use flinfer_core::nn::{train_local, Architecture, Network, TrainParams};
use flinfer_core::rng::{stream, Purpose};

fn mnist_dir() -> Option<PathBuf> {
    let dir = std::env::var_os("MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"));
    dir.join("train-images-idx3-ubyte").exists().then_some(dir)
}

#[test]
fn mnist_training_split_when_available() {
    let Some(dir) = mnist_dir() else {
        eprintln!("MNIST not found, skipping");
        return;
    };
    let (images, labels) = mnist_paths(&dir, MnistSplit::Train);
    let a = load_mnist(&images, &labels).unwrap();
    assert_eq!(a.len(), 60_000);
    assert_eq!(a.classes(), 10);
    assert_eq!(a.feature_dim(), 784);
    assert!(a.features().iter().all(|&v| (0.0..=1.0).contains(&v)));
    let b = load_mnist(&images, &labels).unwrap();
    assert_eq!(a.features(), b.features());
    assert_eq!(a.labels(), b.labels());
}

#[test]
fn small_mlp_learns_the_synthetic_task_quickly() {
    let train = gen_synthetic(10, 20, 3000, 0.3, &mut stream(0, Purpose::Dataset, 0, 0)).unwrap();
    let test = gen_synthetic(10, 20, 200, 0.3, &mut stream(0, Purpose::Dataset, 2, 0)).unwrap();
    let net = Network::init(&Architecture::desk(20, 10), &mut stream(0, Purpose::Init, 0, 0)).unwrap();
    let params = TrainParams {
        lr: 0.05,
        epochs: 5,
        batch_size: 64,
    };
    let trained = train_local(&net, &train, &params, &mut stream(0, Purpose::ClientTraining, 0, 0)).unwrap();
    let acc = trained.accuracy(&test).unwrap();
    assert!(acc > 0.95, "accuracy {acc}");
}
