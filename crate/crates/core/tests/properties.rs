mod common;

use common::{brute_force_accuracy, random_matrix};
use splitleak_core::data::{
    dataset_from_idx, decode_dataset, empirical_prior, encode_dataset, encode_idx_images, encode_idx_labels,
    generate_blobs, generate_imbalanced_binary, parse_idx, LabelPrior,
};
use splitleak_core::eval::{leak_accuracy, nce_from_probs};
use splitleak_core::gia::AttackSlice;
use splitleak_core::normattack::{best_threshold, gradient_norms, norm_attack_best_threshold};
use splitleak_core::numerics::{
    argmax, cross_entropy, entropy, kl_divergence, optimal_assignment_accuracy, softmax, Matrix, ProbVector, Rng,
};

fn random_prob(rng: &mut Rng, k: usize) -> ProbVector {
    // occasional exact zeros exercise the 0·ln 0 = 0 convention
    let w: Vec<f64> = (0..k)
        .map(|_| if rng.uniform() < 0.1 { 0.0 } else { -rng.uniform().max(1e-300).ln() })
        .collect();
    let s: f64 = w.iter().sum();
    if s == 0.0 {
        return ProbVector::uniform(k).unwrap();
    }
    ProbVector::new(w.iter().map(|v| v / s).collect()).unwrap()
}

#[test]
fn hungarian_matches_brute_force() {
    let mut rng = Rng::new(2024);
    for case in 0..200 {
        let k = 1 + (rng.next_u64() % 6) as usize;
        let n = 1 + (rng.next_u64() % 40) as usize;
        let pred: Vec<usize> = (0..n).map(|_| (rng.next_u64() % k as u64) as usize).collect();
        let truth: Vec<usize> = (0..n).map(|_| (rng.next_u64() % k as u64) as usize).collect();
        let fast = optimal_assignment_accuracy(&pred, &truth, k).unwrap();
        let slow = brute_force_accuracy(&pred, &truth, k);
        assert_eq!(fast, slow, "case {case}: k={k} pred={pred:?} truth={truth:?}");
    }
}

#[test]
fn leak_accuracy_ignores_cluster_names() {
    let mut rng = Rng::new(3);
    let truth: Vec<usize> = (0..50).map(|_| (rng.next_u64() % 4) as usize).collect();
    let perm = [2, 0, 3, 1];
    let pred: Vec<usize> = truth.iter().map(|&t| perm[t]).collect();
    assert_eq!(leak_accuracy(&pred, &truth, 4).unwrap(), 1.0);
}

#[test]
fn cross_entropy_is_entropy_plus_kl() {
    let mut rng = Rng::new(7);
    for i in 0..1000 {
        let k = 2 + (rng.next_u64() % 9) as usize;
        let p = random_prob(&mut rng, k);
        // q strictly positive so KL is finite without clipping
        let q = {
            let w: Vec<f64> = (0..k).map(|_| 0.01 + rng.uniform()).collect();
            let s: f64 = w.iter().sum();
            ProbVector::new(w.iter().map(|v| v / s).collect()).unwrap()
        };
        let ce = cross_entropy(&p, &q).unwrap();
        let sum = entropy(&p) + kl_divergence(&p, &q).unwrap();
        assert!((ce - sum).abs() <= 1e-9, "pair {i}: {ce} vs {sum}");
    }
}

#[test]
fn softmax_lands_on_the_simplex_and_keeps_the_argmax() {
    let mut rng = Rng::new(8);
    for i in 0..1000 {
        let k = 1 + (rng.next_u64() % 12) as usize;
        let scale = [0.1, 1.0, 10.0, 300.0][i % 4];
        let logits: Vec<f64> = (0..k).map(|_| scale * rng.standard_normal()).collect();
        let p = softmax(&logits).unwrap();
        let s: f64 = p.as_slice().iter().sum();
        assert!((s - 1.0).abs() <= 1e-9, "vector {i}: sum {s}");
        assert!(p.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(argmax(p.as_slice()), argmax(&logits), "vector {i}");
        // shift invariance
        let shifted: Vec<f64> = logits.iter().map(|v| v + 17.0).collect();
        let q = softmax(&shifted).unwrap();
        for (a, b) in p.as_slice().iter().zip(q.as_slice()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn norms_match_a_direct_recomputation() {
    let mut rng = Rng::new(9);
    let g = random_matrix(&mut rng, 40, 6, 2.0);
    let norms = gradient_norms(&g).unwrap();
    for (r, n) in norms.iter().enumerate() {
        let direct = g.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - direct).abs() <= 1e-12);
    }
}

#[test]
fn norm_attack_never_loses_to_the_majority_class() {
    let mut rng = Rng::new(10);
    for _ in 0..100 {
        let n = 1 + (rng.next_u64() % 30) as usize;
        let norms: Vec<f64> = (0..n).map(|_| (rng.next_u64() % 5) as f64 * rng.uniform()).collect();
        let truth: Vec<usize> = (0..n).map(|_| usize::from(rng.bernoulli(0.3))).collect();
        let (_, acc) = best_threshold(&norms, &truth).unwrap();
        let pos = truth.iter().sum::<usize>() as f64 / n as f64;
        assert!(acc >= pos.max(1.0 - pos) - 1e-12);
        // exhaustive check over every cut of the sorted norms
        let mut best = 0usize;
        for t in norms.iter().copied().chain([f64::NEG_INFINITY]) {
            let hits = norms.iter().zip(&truth).filter(|(&v, &y)| usize::from(v > t) == y).count();
            best = best.max(hits);
        }
        assert_eq!(acc, best as f64 / n as f64);
    }
}

#[test]
fn norm_attack_is_invariant_under_monotone_rescaling() {
    let mut rng = Rng::new(11);
    let grads = random_matrix(&mut rng, 60, 3, 1.0);
    // labels correlate with the norms so the best cut is interior
    let truth: Vec<usize> = grads.iter_rows().map(|r| usize::from(r[0].abs() > 1.2 || rng.bernoulli(0.1))).collect();
    let ids: Vec<u64> = (0..60).collect();
    let z = Matrix::zeros(60, 3);
    let base = norm_attack_best_threshold(&AttackSlice::new(ids.clone(), z.clone(), grads.clone()).unwrap(), &truth).unwrap();
    let mut scaled = grads;
    scaled.scale(37.5);
    let other = norm_attack_best_threshold(&AttackSlice::new(ids, z, scaled).unwrap(), &truth).unwrap();
    assert_eq!(base.labels, other.labels);
    assert_eq!(base.best_accuracy, other.best_accuracy);
    if base.threshold.is_finite() {
        assert!((other.threshold - 37.5 * base.threshold).abs() <= 1e-9 * other.threshold.abs().max(1.0));
    } else {
        assert_eq!(other.threshold, base.threshold);
    }

    let warped: Vec<f64> = base.norms.iter().map(|v| v.powi(3) + 2.0 * v).collect();
    let (_, acc) = best_threshold(&warped, &truth).unwrap();
    assert_eq!(Some(acc), base.best_accuracy);
}

#[test]
fn imbalanced_counts_are_within_three_sigma() {
    for seed in 0..5 {
        let n = 10_000;
        let ds = generate_imbalanced_binary(n, 4, 0.1, seed).unwrap();
        let pos = ds.labels().iter().sum::<usize>() as f64;
        let sd = (n as f64 * 0.1 * 0.9).sqrt();
        assert!((pos - 1000.0).abs() <= 3.0 * sd, "seed {seed}: {pos} positives");
    }
}

#[test]
fn prior_constant_predictor_has_unit_nce() {
    let ds = generate_imbalanced_binary(10_000, 2, 0.1, 4).unwrap();
    let prior = LabelPrior::new(vec![0.9, 0.1]).unwrap();
    let probs = Matrix::from_rows(&vec![vec![0.9, 0.1]; ds.len()]).unwrap();
    let v = nce_from_probs(&probs, ds.labels(), &prior).unwrap();
    assert!((v - 1.0).abs() <= 0.05, "nce {v}");
    let emp = empirical_prior(ds.labels(), 2).unwrap();
    let probs = Matrix::from_rows(&vec![emp.as_slice().to_vec(); ds.len()]).unwrap();
    assert!((nce_from_probs(&probs, ds.labels(), &emp).unwrap() - 1.0).abs() <= 1e-9);
}

#[test]
fn idx_round_trip_rebuilds_the_dataset() {
    let mut rng = Rng::new(12);
    let (n, rows, cols) = (7, 3, 4);
    let raw: Vec<u8> = (0..n * rows * cols).map(|_| (rng.next_u64() % 256) as u8).collect();
    let labels: Vec<u8> = (0..n).map(|_| (rng.next_u64() % 10) as u8).collect();
    let pixels = Matrix::from_vec(n, rows * cols, raw.iter().map(|&b| b as f64 / 255.0).collect()).unwrap();
    let img_bytes = encode_idx_images(&pixels, rows, cols).unwrap();
    let images = parse_idx(&img_bytes).unwrap();
    let ds = dataset_from_idx(images, parse_idx(&encode_idx_labels(&labels)).unwrap(), Some(10)).unwrap();
    assert_eq!(ds.len(), n);
    assert_eq!(ds.num_classes(), 10);
    assert_eq!(ds.labels(), labels.iter().map(|&l| l as usize).collect::<Vec<_>>().as_slice());
    for (a, &b) in ds.inputs().as_slice().iter().zip(&raw) {
        assert_eq!(*a, b as f64 / 255.0);
    }
    assert_eq!(encode_idx_images(ds.inputs(), rows, cols).unwrap(), img_bytes);
    assert!(parse_idx(&img_bytes[..img_bytes.len() - 1]).is_err());
}

#[test]
fn dataset_cache_round_trip() {
    let ds = generate_blobs(3, 31, 5, 0.7, 13).unwrap();
    assert_eq!(decode_dataset(&encode_dataset(&ds)).unwrap(), ds);
}
