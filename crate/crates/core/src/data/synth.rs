use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::numerics::{Matrix, Rng};

use super::Dataset;

/// Distance between the two class means of [`generate_imbalanced_binary`],
/// in units of the per-dimension standard deviation.
pub const IMBALANCED_SEPARATION: f64 = 1.0;

/// `k` isotropic Gaussian clusters with standard deviation `spread`.
///
/// Centers sit on a sphere of radius `4 * spread` (radius 1 when
/// `spread == 0`): evenly spaced along a line for `d == 1`, evenly spaced
/// with a random phase on the circle for `d == 2`, and the best-separated
/// of 64 random draws otherwise. Class sizes differ by at most one.
pub fn generate_blobs(k: usize, n: usize, d: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if k < 2 || n < k || d == 0 {
        return invalid(format!("blobs need K >= 2, n >= K, d >= 1 (got K={k}, n={n}, d={d})"));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return invalid(format!("spread must be a finite non-negative number, got {spread}"));
    }
    let mut rng = Rng::new(seed);
    let radius = if spread > 0.0 { 4.0 * spread } else { 1.0 };
    let centers = blob_centers(k, d, radius, &mut rng);

    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    rng.shuffle(&mut labels);

    let mut inputs = Matrix::zeros(n, d);
    for (i, &label) in labels.iter().enumerate() {
        for (x, c) in inputs.row_mut(i).iter_mut().zip(&centers[label]) {
            *x = c + spread * rng.standard_normal();
        }
    }
    Dataset::new(inputs, labels, (0..n as u64).collect(), k)
}

fn blob_centers(k: usize, d: usize, radius: f64, rng: &mut Rng) -> Vec<Vec<f64>> {
    match d {
        1 => (0..k).map(|j| vec![-radius + 2.0 * radius * j as f64 / (k - 1) as f64]).collect(),
        2 => {
            let phase = rng.uniform_range(0.0, 2.0 * PI);
            (0..k)
                .map(|j| {
                    let t = phase + 2.0 * PI * j as f64 / k as f64;
                    vec![radius * t.cos(), radius * t.sin()]
                })
                .collect()
        }
        _ => {
            let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
            for _ in 0..64 {
                let cand: Vec<Vec<f64>> = (0..k).map(|_| random_on_sphere(d, radius, rng)).collect();
                let sep = min_pairwise_distance(&cand);
                if best.as_ref().is_none_or(|(b, _)| sep > *b) {
                    best = Some((sep, cand));
                }
            }
            best.expect("at least one draw").1
        }
    }
}

fn random_on_sphere(d: usize, radius: f64, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        let norm = crate::numerics::l2_norm(&v);
        if norm > 1e-9 {
            return v.into_iter().map(|x| radius * x / norm).collect();
        }
    }
}

fn min_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.min(d.sqrt());
        }
    }
    best
}

/// Binary task with Bernoulli(`positive_rate`) labels and unit-variance
/// class-conditional Gaussians whose means are [`IMBALANCED_SEPARATION`] apart.
pub fn generate_imbalanced_binary(n: usize, d: usize, positive_rate: f64, seed: u64) -> Result<Dataset> {
    if !(positive_rate > 0.0 && positive_rate < 1.0) {
        return invalid(format!("positive rate must lie in (0, 1), got {positive_rate}"));
    }
    if n == 0 || d == 0 {
        return invalid(format!("need n >= 1 and d >= 1 (got n={n}, d={d})"));
    }
    let mut rng = Rng::new(seed);
    let shift = IMBALANCED_SEPARATION / (d as f64).sqrt();
    let mut inputs = Matrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = usize::from(rng.bernoulli(positive_rate));
        let mean = if label == 1 { shift } else { 0.0 };
        inputs.row_mut(i).iter_mut().for_each(|x| *x = mean + rng.standard_normal());
        labels.push(label);
    }
    Dataset::new(inputs, labels, (0..n as u64).collect(), 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_balanced_and_deterministic() {
        let a = generate_blobs(4, 2001, 3, 0.5, 9).unwrap();
        let b = generate_blobs(4, 2001, 3, 0.5, 9).unwrap();
        assert_eq!(a, b);
        let mut counts = [0usize; 4];
        a.labels().iter().for_each(|&l| counts[l] += 1);
        for c in counts {
            assert!((c as f64 - 2001.0 / 4.0).abs() <= 1.0);
        }
    }

    #[test]
    fn degenerate_spread_gives_point_clusters() {
        let ds = generate_blobs(2, 10, 2, 0.0, 3).unwrap();
        let mut seen: Vec<(usize, Vec<f64>)> = Vec::new();
        for (row, &l) in ds.inputs().iter_rows().zip(ds.labels()) {
            match seen.iter().find(|(sl, _)| *sl == l) {
                Some((_, p)) => assert_eq!(p.as_slice(), row),
                None => seen.push((l, row.to_vec())),
            }
        }
        assert_eq!(seen.len(), 2);
        assert_ne!(seen[0].1, seen[1].1);
    }

    #[test]
    fn blob_arguments_checked() {
        assert!(generate_blobs(1, 10, 2, 0.5, 0).is_err());
        assert!(generate_blobs(4, 3, 2, 0.5, 0).is_err());
        assert!(generate_blobs(4, 10, 0, 0.5, 0).is_err());
        assert!(generate_blobs(4, 10, 2, -1.0, 0).is_err());
    }

    #[test]
    fn imbalanced_counts_within_binomial_bound() {
        let ds = generate_imbalanced_binary(10_000, 4, 0.1, 5).unwrap();
        let pos = ds.labels().iter().filter(|&&l| l == 1).count() as f64;
        let sd = (10_000.0f64 * 0.1 * 0.9).sqrt();
        assert!((pos - 1000.0).abs() <= 3.0 * sd, "positives = {pos}");

        let ds = generate_imbalanced_binary(10_000, 4, 0.5, 6).unwrap();
        let pos = ds.labels().iter().filter(|&&l| l == 1).count() as f64;
        assert!((pos - 5000.0).abs() <= 3.0 * 50.0);
    }

    #[test]
    fn imbalanced_rate_checked_and_deterministic() {
        assert!(generate_imbalanced_binary(10, 2, 0.0, 1).is_err());
        assert!(generate_imbalanced_binary(10, 2, 1.0, 1).is_err());
        assert_eq!(
            generate_imbalanced_binary(50, 3, 0.2, 4).unwrap(),
            generate_imbalanced_binary(50, 3, 0.2, 4).unwrap()
        );
    }
}
