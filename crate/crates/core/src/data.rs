//! Dataset generation, IDX image decoding and the unsupervised clustering
//! accuracy metric.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{input_err, Error, Result};
use crate::graph::PointCloud;
use crate::mat::Mat;
use crate::rng::Rng;

#[allow(unused_imports)]
use num_traits::Float;

const PI: f64 = core::f64::consts::PI;

/// One noisy semicircle: `x_i = (cos a_i, sin a_i) + noise`, angles uniform
/// on `[0, pi]`, noise isotropic Gaussian with the given variance.
pub fn gen_one_moon(n: usize, noise_var: f64, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(input_err!("n must be at least 1"));
    }
    if !(noise_var >= 0.0) {
        return Err(input_err!("noise variance must be nonnegative"));
    }
    let sd = noise_var.sqrt();
    let mut rng = Rng::new(seed);
    let mut flat = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let a = rng.uniform(0.0, PI);
        flat.push(a.cos() + sd * rng.normal());
        flat.push(a.sin() + sd * rng.normal());
    }
    PointCloud::new(Mat::from_flat(n, 2, flat), None)
}

/// Two interleaved noisy moons with labels 1 and 2: the first half is
/// `(cos a - 0.5, sin a - 0.3) + noise`, the second half its point
/// reflection `(-cos a + 0.5, -sin a + 0.3) + noise`.
pub fn gen_two_moons_with_noise(n: usize, noise_var: f64, seed: u64) -> Result<PointCloud> {
    if n == 0 || n % 2 != 0 {
        return Err(input_err!("n must be positive and even, got {n}"));
    }
    if !(noise_var >= 0.0) {
        return Err(input_err!("noise variance must be nonnegative"));
    }
    let sd = noise_var.sqrt();
    let mut rng = Rng::new(seed);
    let mut flat = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for half in 0..2 {
        for _ in 0..n / 2 {
            let a = rng.uniform(0.0, PI);
            let (x, y) = if half == 0 {
                (a.cos() - 0.5, a.sin() - 0.3)
            } else {
                (-a.cos() + 0.5, -a.sin() + 0.3)
            };
            flat.push(x + sd * rng.normal());
            flat.push(y + sd * rng.normal());
            labels.push(half as u32 + 1);
        }
    }
    PointCloud::new(Mat::from_flat(n, 2, flat), Some(labels))
}

/// Two moons with the standard noise variance 0.0036.
pub fn gen_two_moons(n: usize, seed: u64) -> Result<PointCloud> {
    gen_two_moons_with_noise(n, 0.0036, seed)
}

/// Images flattened row-major to `[0, 1]` values plus digit labels.
#[derive(Debug, Clone)]
pub struct MnistSet {
    pub images: Mat,
    pub labels: Vec<u8>,
    pub rows: usize,
    pub cols: usize,
}

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Idx {
            offset: bytes.len(),
            msg: alloc::format!("truncated: need {end} bytes for header field"),
        });
    }
    Ok(u32::from_be_bytes([bytes[offset], bytes[offset + 1], bytes[offset + 2], bytes[offset + 3]]))
}

/// Decodes an IDX image payload: magic `0x00000803`, big-endian counts and
/// dimensions, then row-major unsigned bytes normalized by 255.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(Mat, usize, usize)> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Idx {
            offset: 0,
            msg: alloc::format!("bad image magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}"),
        });
    }
    let count = read_be_u32(bytes, 4)? as usize;
    let rows = read_be_u32(bytes, 8)? as usize;
    let cols = read_be_u32(bytes, 12)? as usize;
    let need = 16 + count * rows * cols;
    if bytes.len() < need {
        return Err(Error::Idx {
            offset: bytes.len(),
            msg: alloc::format!("truncated image payload: need {need} bytes"),
        });
    }
    let data: Vec<f64> =
        bytes[16..need].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok((Mat::from_flat(count, rows * cols, data), rows, cols))
}

/// Decodes an IDX label payload: magic `0x00000801`, count, then one byte
/// per label in `0..=9`.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::Idx {
            offset: 0,
            msg: alloc::format!("bad label magic {magic:#010x}, expected {IDX_LABEL_MAGIC:#010x}"),
        });
    }
    let count = read_be_u32(bytes, 4)? as usize;
    let need = 8 + count;
    if bytes.len() < need {
        return Err(Error::Idx {
            offset: bytes.len(),
            msg: alloc::format!("truncated label payload: need {need} bytes"),
        });
    }
    for (pos, &b) in bytes[8..need].iter().enumerate() {
        if b > 9 {
            return Err(Error::Idx {
                offset: 8 + pos,
                msg: alloc::format!("label byte {b} out of range 0..=9"),
            });
        }
    }
    Ok(bytes[8..need].to_vec())
}

/// Combines parsed image and label payloads, checking that counts match.
pub fn mnist_from_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<MnistSet> {
    let (images, rows, cols) = parse_idx_images(image_bytes)?;
    let labels = parse_idx_labels(label_bytes)?;
    if images.rows() != labels.len() {
        return Err(Error::Idx {
            offset: 4,
            msg: alloc::format!(
                "image count {} does not match label count {}",
                images.rows(),
                labels.len()
            ),
        });
    }
    Ok(MnistSet { images, labels, rows, cols })
}

/// Encodes images into the IDX layout; the exact inverse of
/// [`parse_idx_images`] on byte level. Used to craft fixtures.
pub fn encode_idx_images(count: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), count * rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    out.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(count as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    out.extend_from_slice(pixels);
    out
}

/// Encodes labels into the IDX layout; inverse of [`parse_idx_labels`].
pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Exact two-cluster 1-D k-means: the globally optimal partition is a
/// threshold on the sorted values, found by a prefix-sum sweep over all
/// splits between distinct values (the leftmost split on cost ties). The
/// cluster with the smaller centroid is labeled 1. The result is a Lloyd
/// fixed point; iterating Lloyd from extreme-value centroids can stall in a
/// worse local optimum, which is why the sweep is used. The `_seed`
/// parameter is reserved (nothing here is randomized).
pub fn kmeans_1d(values: &[f64], _seed: u64) -> Result<Vec<u8>> {
    let n = values.len();
    if n < 2 {
        return Err(input_err!("need at least two values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(input_err!("non-finite value"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted[0] == sorted[n - 1] {
        return Err(input_err!("all values identical; clustering is degenerate"));
    }
    // prefix sums of x and x^2: segment SSE = sq - s^2 / len
    let mut prefix = vec![0.0; n + 1];
    let mut prefix_sq = vec![0.0; n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
        prefix_sq[i + 1] = prefix_sq[i] + v * v;
    }
    let seg_sse = |lo: usize, hi: usize| {
        let len = (hi - lo) as f64;
        let s = prefix[hi] - prefix[lo];
        (prefix_sq[hi] - prefix_sq[lo]) - s * s / len
    };
    let mut best = (f64::INFINITY, 1usize);
    for split in 1..n {
        if sorted[split - 1] == sorted[split] {
            continue; // equal values never straddle an optimal threshold
        }
        let cost = seg_sse(0, split) + seg_sse(split, n);
        if cost < best.0 {
            best = (cost, split);
        }
    }
    let threshold = sorted[best.1 - 1];
    Ok(values.iter().map(|&v| if v <= threshold { 1 } else { 2 }).collect())
}

/// Label-permutation-invariant two-class accuracy:
/// `max(m, 1 - m)` for the mismatch rate `m` between label vectors in
/// `{1, 2}`; always in `[0.5, 1]`.
pub fn clustering_accuracy(pred: &[u8], truth: &[u8]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(input_err!("length mismatch: {} vs {}", pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(input_err!("empty label vectors"));
    }
    for &l in pred.iter().chain(truth) {
        if l != 1 && l != 2 {
            return Err(input_err!("labels must be 1 or 2, got {l}"));
        }
    }
    let mismatch: f64 = pred
        .iter()
        .zip(truth)
        .map(|(&p, &t)| if p == t { 0.0 } else { 1.0 })
        .sum::<f64>()
        / pred.len() as f64;
    Ok(mismatch.max(1.0 - mismatch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::norm2;

    #[test]
    fn one_moon_noiseless_lies_on_upper_semicircle() {
        let pc = gen_one_moon(200, 0.0, 5).unwrap();
        for i in 0..200 {
            let p = pc.point(i);
            assert!((norm2(p) - 1.0).abs() < 1e-12);
            assert!(p[1] >= 0.0);
        }
    }

    #[test]
    fn one_moon_is_deterministic_and_calibrated() {
        let a = gen_one_moon(2000, 0.01, 9).unwrap();
        let b = gen_one_moon(2000, 0.01, 9).unwrap();
        assert_eq!(a.points(), b.points());
        let mean_norm: f64 =
            (0..2000).map(|i| norm2(a.point(i))).sum::<f64>() / 2000.0;
        assert!((0.9..1.1).contains(&mean_norm), "mean norm {mean_norm}");
    }

    #[test]
    fn two_moons_labels_and_geometry() {
        let pc = gen_two_moons(2000, 4).unwrap();
        let labels = pc.labels().unwrap();
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 1000);
        assert_eq!(labels.iter().filter(|&&l| l == 2).count(), 1000);

        // class centroids are separated
        let mut c = [[0.0f64; 2]; 2];
        for i in 0..2000 {
            let l = (labels[i] - 1) as usize;
            c[l][0] += pc.point(i)[0] / 1000.0;
            c[l][1] += pc.point(i)[1] / 1000.0;
        }
        let dist = ((c[0][0] - c[1][0]).powi(2) + (c[0][1] - c[1][1]).powi(2)).sqrt();
        assert!(dist > 0.5, "centroid distance {dist}");

        // noiseless: label-1 points shifted back onto the unit semicircle
        let clean = gen_two_moons_with_noise(100, 0.0, 4).unwrap();
        for i in 0..50 {
            let p = clean.point(i);
            let shifted = [p[0] + 0.5, p[1] + 0.3];
            assert!((norm2(&shifted) - 1.0).abs() < 1e-12);
            assert!(shifted[1] >= 0.0);
        }
        assert!(gen_two_moons(101, 0).is_err());
    }

    #[test]
    fn idx_crafted_file_decodes_and_round_trips() {
        let bytes = encode_idx_images(1, 2, 2, &[0, 255, 128, 64]);
        let (images, rows, cols) = parse_idx_images(&bytes).unwrap();
        assert_eq!((rows, cols), (2, 2));
        assert_eq!(images.row(0), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
        // bit-identical round trip
        let pixels: Vec<u8> =
            images.row(0).iter().map(|v| (v * 255.0).round() as u8).collect();
        assert_eq!(encode_idx_images(1, 2, 2, &pixels), bytes);

        let lbl = encode_idx_labels(&[3, 7]);
        assert_eq!(parse_idx_labels(&lbl).unwrap(), vec![3, 7]);
        assert_eq!(encode_idx_labels(&parse_idx_labels(&lbl).unwrap()), lbl);
    }

    #[test]
    fn idx_malformed_files_are_rejected_with_offsets() {
        let mut bad_magic = encode_idx_images(1, 1, 1, &[0]);
        bad_magic[3] = 0x99;
        assert!(matches!(parse_idx_images(&bad_magic), Err(Error::Idx { offset: 0, .. })));

        let truncated = &encode_idx_images(2, 2, 2, &[0; 8])[..18];
        match parse_idx_images(truncated) {
            Err(Error::Idx { offset, .. }) => assert_eq!(offset, 18),
            other => panic!("expected truncation error, got {other:?}"),
        }

        let bad_label = encode_idx_labels(&[1]).iter().copied().collect::<Vec<u8>>();
        let mut bad_label = bad_label;
        bad_label[8] = 10;
        match parse_idx_labels(&bad_label) {
            Err(Error::Idx { offset, .. }) => assert_eq!(offset, 8),
            other => panic!("expected label error, got {other:?}"),
        }

        let img = encode_idx_images(2, 1, 1, &[0, 0]);
        let lbl = encode_idx_labels(&[1]);
        assert!(mnist_from_idx(&img, &lbl).is_err());
    }

    #[test]
    fn kmeans_separated_and_symmetric_cases() {
        assert_eq!(kmeans_1d(&[0.0, 0.1, 0.9, 1.0], 0).unwrap(), vec![1, 1, 2, 2]);
        let labels = kmeans_1d(&[-1.0, -0.4, 0.4, 1.0], 0).unwrap();
        assert_eq!(labels, vec![1, 1, 2, 2]);
        assert!(kmeans_1d(&[2.0, 2.0, 2.0], 0).is_err());
        assert!(kmeans_1d(&[1.0], 0).is_err());
    }

    /// Exact 1-D 2-means over all sorted split points.
    fn brute_force_two_means(values: &[f64]) -> Vec<u8> {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let mut best = (f64::INFINITY, 0usize);
        for split in 1..values.len() {
            let (lo, hi) = order.split_at(split);
            let mean = |idx: &[usize]| {
                idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64
            };
            let sse = |idx: &[usize], m: f64| {
                idx.iter().map(|&i| (values[i] - m) * (values[i] - m)).sum::<f64>()
            };
            let cost = sse(lo, mean(lo)) + sse(hi, mean(hi));
            if cost < best.0 {
                best = (cost, split);
            }
        }
        let mut labels = vec![0u8; values.len()];
        for (pos, &i) in order.iter().enumerate() {
            labels[i] = if pos < best.1 { 1 } else { 2 };
        }
        labels
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(clustering_accuracy(&[1, 2, 1], &[1, 2, 1]).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[2, 1, 2], &[1, 2, 1]).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[1, 1, 2, 2], &[1, 1, 2, 1]).unwrap(), 0.75);
        assert!(clustering_accuracy(&[1, 2], &[1]).is_err());
        assert!(clustering_accuracy(&[1, 3], &[1, 2]).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn kmeans_matches_brute_force_optimum(
                values in proptest::collection::vec(-5.0f64..5.0, 2..50)
            ) {
                let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    - values.iter().cloned().fold(f64::INFINITY, f64::min);
                prop_assume!(spread > 1e-9);
                let got = kmeans_1d(&values, 0).unwrap();
                let brute = brute_force_two_means(&values);
                let cost = |labels: &[u8]| {
                    let mut sums = [0.0f64; 2];
                    let mut counts = [0usize; 2];
                    for (&v, &l) in values.iter().zip(labels) {
                        sums[(l - 1) as usize] += v;
                        counts[(l - 1) as usize] += 1;
                    }
                    values
                        .iter()
                        .zip(labels)
                        .map(|(&v, &l)| {
                            let c = sums[(l - 1) as usize] / counts[(l - 1) as usize] as f64;
                            (v - c) * (v - c)
                        })
                        .sum::<f64>()
                };
                // optimality: same within-cluster SSE as the exhaustive scan
                let (a, b) = (cost(&got), cost(&brute));
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b), "{a} vs {b}");
                // threshold structure: cluster 1 sits strictly below cluster 2
                let max1 = values.iter().zip(&got)
                    .filter(|(_, &l)| l == 1).map(|(&v, _)| v)
                    .fold(f64::NEG_INFINITY, f64::max);
                let min2 = values.iter().zip(&got)
                    .filter(|(_, &l)| l == 2).map(|(&v, _)| v)
                    .fold(f64::INFINITY, f64::min);
                prop_assert!(max1 < min2);
            }

            #[test]
            fn accuracy_is_swap_invariant(
                labels in proptest::collection::vec(1u8..=2, 1..40)
            ) {
                let truth: Vec<u8> = labels.iter().map(|&l| 3 - l).collect();
                let a = clustering_accuracy(&labels, &truth).unwrap();
                let b = clustering_accuracy(&truth, &labels).unwrap();
                prop_assert_eq!(a, b);
                prop_assert!(a >= 0.5 && a <= 1.0);
            }
        }
    }
}
