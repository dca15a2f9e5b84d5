//! Shared fixture generators for the benchmark suite.
//!
//! Every generator is seeded with a fixed constant, so a benchmark's input
//! never changes between runs and timings stay comparable across commits.

use fusedet_core::{BBox, Detection, DetectionSet, GrayImage, GroundTruth, ModelRun};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bbox(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
    BBox::new(x1, y1, x2, y2).unwrap()
}

/// One of sixteen well-separated target slots on a 4×4 lattice.
fn slot(k: usize) -> BBox {
    let x = (k % 4) as f64 * 0.22 + 0.05;
    let y = (k / 4 % 4) as f64 * 0.22 + 0.05;
    bbox(x, y, x + 0.15, y + 0.15)
}

/// A pool of `models` detectors over `images` images with `per_image`
/// annotated targets each (at most 16). Detectors hit ~80% of the targets
/// with jittered boxes and add occasional strays, so fusion, matching and
/// the threshold sweeps all have realistic work to do.
pub fn detection_pool(
    models: usize,
    images: usize,
    per_image: usize,
) -> (Vec<DetectionSet>, Vec<GroundTruth>) {
    assert!(per_image <= 16, "only 16 target slots exist");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let image_ids: Vec<String> = (0..images).map(|i| format!("img{i:04}")).collect();

    let mut gts = Vec::with_capacity(images * per_image);
    for id in &image_ids {
        for k in 0..per_image {
            gts.push(GroundTruth {
                image_id: id.clone(),
                bbox: slot(k),
                category: (k % 2) as i64,
            });
        }
    }

    let pool = (0..models)
        .map(|m| {
            let mut detections = Vec::new();
            for id in &image_ids {
                for k in 0..per_image {
                    if rng.random::<f64>() < 0.8 {
                        let b = slot(k);
                        let dx = rng.random_range(-0.02..=0.02);
                        let dy = rng.random_range(-0.02..=0.02);
                        detections.push(Detection {
                            image_id: id.clone(),
                            bbox: bbox(b.x1() + dx, b.y1() + dy, b.x2() + dx, b.y2() + dy),
                            score: rng.random_range(0.35..1.0),
                            category: (k % 2) as i64,
                            model_id: None,
                        });
                    }
                }
                if rng.random::<f64>() < 0.5 {
                    detections.push(Detection {
                        image_id: id.clone(),
                        bbox: bbox(0.90, 0.90, 0.97, 0.97),
                        score: rng.random_range(0.3..0.6),
                        category: 0,
                        model_id: None,
                    });
                }
            }
            DetectionSet {
                model_id: format!("model_{m}"),
                detections,
            }
        })
        .collect();
    (pool, gts)
}

/// Runs for single-image fusion: `models` detectors with `boxes_per_model`
/// random boxes each, all on one image, weights cycling 1, 2, 3.
pub fn model_runs(models: usize, boxes_per_model: usize) -> Vec<ModelRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF0CA);
    (0..models)
        .map(|m| ModelRun {
            model_id: format!("model_{m}"),
            weight: (1 + m % 3) as f64,
            detections: (0..boxes_per_model)
                .map(|_| {
                    let x1 = rng.random_range(0.0..0.85);
                    let y1 = rng.random_range(0.0..0.85);
                    let w = rng.random_range(0.05..0.15);
                    let h = rng.random_range(0.05..0.15);
                    Detection {
                        image_id: "img".into(),
                        bbox: bbox(x1, y1, x1 + w, y1 + h),
                        score: rng.random_range(0.0..=1.0),
                        category: rng.random_range(0..2),
                        model_id: None,
                    }
                })
                .collect(),
        })
        .collect()
}

/// Seeded random grayscale image.
pub fn gray_image(width: u32, height: u32, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = (0..width as usize * height as usize)
        .map(|_| rng.random())
        .collect();
    GrayImage::new(width, height, pixels).unwrap()
}
