//! Template recurrence against a naive per-pixel unrolling, plus its invariants.

use mogan_core::motion::{compute_template, normalize_template, silhouette};
use mogan_core::{GrayImage, TemplateConfig};
use proptest::prelude::*;

/// Straight unrolling of the recurrence with `tau_t = t`, one pixel at a time.
fn naive(frames: &[Vec<u8>], threshold: u8, delta: f32) -> Vec<f32> {
    let px = frames[0].len();
    (0..px)
        .map(|i| {
            let mut v = 0.0f32;
            for t in 1..frames.len() {
                let tau = t as f32;
                let moved =
                    (frames[t][i] as i16 - frames[t - 1][i] as i16).abs() >= threshold as i16;
                if moved {
                    v = tau;
                } else if v < tau - delta {
                    v = 0.0;
                }
            }
            v
        })
        .collect()
}

/// Last update index at which pixel `i` moved, if any.
fn last_motion(frames: &[Vec<u8>], threshold: u8, i: usize) -> Option<usize> {
    (1..frames.len())
        .rev()
        .find(|&t| (frames[t][i] as i16 - frames[t - 1][i] as i16).abs() >= threshold as i16)
}

fn sequence(side: usize) -> impl Strategy<Value = Vec<Vec<u8>>> {
    (2usize..=6).prop_flat_map(move |len| {
        proptest::collection::vec(proptest::collection::vec(any::<u8>(), side * side), len)
    })
}

fn images(frames: &[Vec<u8>], side: usize) -> Vec<GrayImage> {
    frames
        .iter()
        .map(|f| GrayImage::new(side, side, f.clone()).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_naive_unrolling(frames in sequence(8), threshold in 1u8..=255, delta in 0.25f32..6.0) {
        let cfg = TemplateConfig::new(threshold, delta).unwrap();
        let mu = compute_template(&images(&frames, 8), &cfg).unwrap();
        let expected = naive(&frames, threshold, delta);
        for (a, b) in mu.values().iter().zip(&expected) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!(mu.tau_final(), (frames.len() - 1) as f32);
    }

    #[test]
    fn nonzero_values_stay_within_duration(frames in sequence(6), threshold in 1u8..=255, delta in 0.25f32..6.0) {
        let cfg = TemplateConfig::new(threshold, delta).unwrap();
        let mu = compute_template(&images(&frames, 6), &cfg).unwrap();
        let tau = mu.tau_final();
        for &v in mu.values() {
            prop_assert!(v == 0.0 || (tau - delta <= v && v <= tau), "v {} tau {} delta {}", v, tau, delta);
        }
    }

    #[test]
    fn most_recent_motion_is_brightest(frames in sequence(6), threshold in 1u8..=255, delta in 0.25f32..6.0) {
        let cfg = TemplateConfig::new(threshold, delta).unwrap();
        let mu = compute_template(&images(&frames, 6), &cfg).unwrap();
        for i in 0..36 {
            for j in 0..36 {
                if let (Some(a), Some(b)) = (last_motion(&frames, threshold, i), last_motion(&frames, threshold, j)) {
                    if a > b && mu.values()[j] > 0.0 {
                        prop_assert!(mu.values()[i] > mu.values()[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn latest_motion_normalizes_to_white(frames in sequence(6), threshold in 1u8..=255) {
        let n = frames.len();
        let cfg = TemplateConfig::for_clip(n);
        let cfg = TemplateConfig { threshold, ..cfg };
        let mu = compute_template(&images(&frames, 6), &cfg).unwrap();
        let img = normalize_template(&mu).unwrap();
        for i in 0..36 {
            let expect = last_motion(&frames, threshold, i)
                .map_or(0, |t| (255.0 * t as f32 / (n - 1) as f32).round() as u8);
            prop_assert_eq!(img.data()[i], expect);
        }
    }

    #[test]
    fn silhouette_is_symmetric(a in proptest::collection::vec(any::<u8>(), 16), b in proptest::collection::vec(any::<u8>(), 16), threshold in 1u8..=255) {
        let a = GrayImage::new(4, 4, a).unwrap();
        let b = GrayImage::new(4, 4, b).unwrap();
        prop_assert_eq!(silhouette(&a, &b, threshold).unwrap(), silhouette(&b, &a, threshold).unwrap());
    }
}
