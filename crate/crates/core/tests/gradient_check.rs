mod common;

use common::{gradient_check, random_tensor};
use eegconn::nn::{LayerSpec, Model, ModelSpec};

fn small_net(with_relu: bool) -> ModelSpec {
    use LayerSpec::*;
    let mut layers = vec![Conv3x3 { out_channels: 4 }];
    if with_relu {
        layers.push(Relu);
    }
    layers.extend([MaxPool2x2, BatchNorm, Flatten, Dense { units: 8 }]);
    if with_relu {
        layers.push(Relu);
    }
    layers.extend([Dense { units: 2 }, Softmax]);
    ModelSpec { input: (8, 8, 2), layers }
}

fn run(spec: ModelSpec, batch: usize, seed: u64, limit: Option<usize>) {
    let (h, w, c) = spec.input;
    let model = Model::<f64>::new(spec, seed).unwrap();
    let x = random_tensor([batch, h, w, c], seed + 100);
    let labels: Vec<usize> = (0..batch).map(|i| (i * 7 + 3) % 2).collect();
    for r in gradient_check(&model, &x, &labels, 1e-5, limit) {
        assert!(r.worst < 1e-4, "{}: {:e} over {} entries", r.name, r.worst, r.checked);
    }
}

#[test]
fn small_net_without_relu() {
    run(small_net(false), 4, 1, None);
}

#[test]
fn small_net_with_relu() {
    run(small_net(true), 4, 2, None);
}

#[test]
fn cnn2_on_small_input() {
    run(ModelSpec::cnn2((8, 8, 2)), 3, 3, Some(300));
}

#[test]
fn cnn5_on_small_input() {
    run(ModelSpec::cnn5((8, 8, 2)), 3, 4, Some(300));
}

#[test]
fn cnn10_on_smallest_valid_input() {
    // five 2x2 pools need at least 32x32
    run(ModelSpec::cnn10((32, 32, 2)), 2, 5, Some(12));
}
