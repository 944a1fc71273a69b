//! Synthetic "handwriting pages" whose classes differ in stroke weight and
//! slant, pushed through preprocessing and the mock backbone.

#![allow(dead_code)]

use handscreen_core::backbone::{Backbone, MockBackbone};
use handscreen_core::rng::{derive_seed, seeded};
use handscreen_core::{preprocess, Label, LabeledExample, RasterImage};
use rand::Rng;

pub const PAGE_SIDE: usize = 64;

/// A white page with ruled-line strokes. Positive pages get heavier,
/// slanted, irregular strokes; negative pages thin level ones.
pub fn page(label: Label, seed: u64) -> RasterImage {
    let mut rng = seeded(seed);
    let mut gray = vec![255u8; PAGE_SIDE * PAGE_SIDE];
    let (thickness, slant, ink) = match label {
        Label::Negative => (1usize, 0.0f64, 70u8),
        Label::Positive => (3usize, 0.35f64, 30u8),
    };
    let lines = rng.random_range(5..8);
    for line in 0..lines {
        let baseline = 6 + line * (PAGE_SIDE - 12) / lines + rng.random_range(0..3);
        let mut x = rng.random_range(2..10);
        while x < PAGE_SIDE - 4 {
            let len = rng.random_range(3..9);
            for dx in 0..len.min(PAGE_SIDE - x) {
                let jitter = if label.is_positive() { rng.random_range(0..3) } else { 0 };
                let y0 = baseline as f64 + slant * dx as f64 + jitter as f64;
                for t in 0..thickness {
                    let y = y0 as usize + t;
                    if y < PAGE_SIDE {
                        gray[y * PAGE_SIDE + x + dx] = ink.saturating_add(rng.random_range(0..20));
                    }
                }
            }
            x += len + rng.random_range(2..5);
        }
    }
    for v in gray.iter_mut() {
        let noise: i16 = rng.random_range(-8..=8);
        *v = (*v as i16 + noise).clamp(0, 255) as u8;
    }
    RasterImage::from_gray(PAGE_SIDE, PAGE_SIDE, &gray).unwrap()
}

/// `n` examples; the first `positives` are positive, then shuffled by id.
pub fn dataset(backbone: &MockBackbone, n: usize, positives: usize, seed: u64) -> Vec<LabeledExample> {
    (0..n)
        .map(|i| {
            let label = Label::from(i < positives);
            let img = page(label, derive_seed(seed, i as u64));
            let embedding = backbone.embed(&preprocess(&img)).unwrap();
            LabeledExample::new(embedding, label, format!("page-{i:04}"))
        })
        .collect()
}

/// 11% of 497, rounded: 55 positive pages.
pub fn prevalence_positives(n: usize) -> usize {
    (n as f64 * 0.11).round() as usize
}

/// Two Gaussian clusters separated along the first 64 coordinates, with a
/// fraction of labels flipped. A 48-example noisy training set against a
/// clean validation set overfits quickly: validation accuracy rises for a
/// few epochs and then falls as the head memorizes the flipped labels.
pub fn noisy_clusters(n: usize, separation: f64, flip_rate: f64, seed: u64) -> Vec<LabeledExample> {
    use handscreen_core::rng::standard_normal;
    use handscreen_core::Embedding;
    let mut rng = seeded(seed);
    (0..n)
        .map(|i| {
            let positive = i % 2 == 0;
            let shift = if positive { separation } else { -separation };
            let values = (0..1280)
                .map(|d| if d < 64 { shift } else { 0.0 } + standard_normal(&mut rng))
                .collect();
            let flip = rng.random::<f64>() < flip_rate;
            LabeledExample::new(Embedding::new(values).unwrap(), Label::from(positive ^ flip), format!("c{seed}-{i}"))
        })
        .collect()
}

/// The overfitting run used by the checkpoint-selection checks.
pub fn overfitting_run() -> (Vec<LabeledExample>, Vec<LabeledExample>, handscreen_core::TrainConfig) {
    let train = noisy_clusters(48, 0.2, 0.2, 1);
    let validation = noisy_clusters(40, 0.2, 0.0, 2);
    let cfg = handscreen_core::TrainConfig {
        epochs: 25,
        batch_size: 8,
        dropout_rate: 0.0,
        algorithm: handscreen_core::Algorithm::Adam,
        learning_rate: 1e-2,
        seed: 3,
        ..Default::default()
    };
    (train, validation, cfg)
}
