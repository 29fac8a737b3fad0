//! Seeded random inputs for benchmarks, the self-test and examples.

use crate::model::{Gaussian, GaussianCloud, GaussianFrame, MotionField, SourceTag, ViewMaps};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_gaussian(rng: &mut ChaCha8Rng, spread: f32, scale: (f32, f32)) -> Gaussian {
    let q: [f32; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    let norm = q.iter().map(|c| c * c).sum::<f32>().sqrt().max(1e-3);
    Gaussian {
        position: [
            rng.gen_range(-spread..spread),
            rng.gen_range(-spread..spread),
            rng.gen_range(1.5..3.0),
        ],
        opacity: rng.gen_range(0.05..1.0),
        color: std::array::from_fn(|_| rng.gen_range(0.0..1.0)),
        rotation: q.map(|c| c / norm),
        scale: std::array::from_fn(|_| rng.gen_range(scale.0..scale.1)),
    }
}

/// `n` Gaussians in front of an identity camera with focal length about the
/// image side, depths in `[1.5, 3]`.
pub fn random_cloud(seed: u64, n: usize) -> GaussianCloud {
    random_cloud_scaled(seed, n, 0.005, 0.08)
}

/// As [`random_cloud`] with per-axis scales drawn from `[lo, hi)`.
pub fn random_cloud_scaled(seed: u64, n: usize, lo: f32, hi: f32) -> GaussianCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GaussianCloud::from_gaussians((0..n).map(|i| {
        (
            random_gaussian(&mut rng, 0.8, (lo, hi)),
            SourceTag {
                timestamp: 0,
                view: 0,
                pixel: i as u32,
            },
        )
    }))
    .expect("random Gaussians are valid")
}

/// Fully valid frame with random attributes.
pub fn random_frame(
    seed: u64,
    width: usize,
    height: usize,
    views: usize,
    timestamp: i64,
) -> GaussianFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let maps = (0..views)
        .map(|_| {
            let mut m = ViewMaps::empty(width * height);
            for p in 0..width * height {
                m.set_gaussian(p, &random_gaussian(&mut rng, 0.8, (0.005, 0.05)));
            }
            m
        })
        .collect();
    GaussianFrame::new(width, height, timestamp, maps).expect("random frame is valid")
}

/// Per-view motion fields with components in `[-amp, amp]`.
pub fn random_motions(
    seed: u64,
    width: usize,
    height: usize,
    views: usize,
    timestamp: i64,
    amp: f32,
) -> Vec<MotionField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = width * height;
    (0..views)
        .map(|v| {
            let mut field = || {
                (0..n)
                    .map(|_| std::array::from_fn(|_| rng.gen_range(-amp..=amp)))
                    .collect()
            };
            let (b, f) = (field(), field());
            MotionField::new(width, height, v as u32, timestamp, b, f).expect("finite motion")
        })
        .collect()
}
