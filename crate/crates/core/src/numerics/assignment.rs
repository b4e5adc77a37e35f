use crate::error::{invalid, Result};

/// Maximum-weight perfect matching on a square matrix (Hungarian algorithm,
/// shortest augmenting path with potentials, O(n³)).
///
/// Returns `(assignment, total)` where `assignment[row] = col`.
pub fn hungarian_max(weights: &[Vec<i64>]) -> (Vec<usize>, i64) {
    let n = weights.len();
    if n == 0 {
        return (Vec::new(), 0);
    }
    debug_assert!(weights.iter().all(|r| r.len() == n));
    let max_w = weights.iter().flatten().copied().max().unwrap_or(0);
    // minimise cost = max_w - w; 1-indexed with a sentinel column 0
    let cost = |i: usize, j: usize| max_w - weights[i - 1][j - 1];

    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(r, &c)| weights[r][c]).sum();
    (assignment, total)
}

/// Clustering accuracy: the best one-to-one relabeling of predicted cluster
/// ids onto class ids, as a fraction of correctly labeled items.
pub fn optimal_assignment_accuracy(pred: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    if pred.len() != truth.len() {
        return invalid(format!(
            "prediction length {} does not match truth length {}",
            pred.len(),
            truth.len()
        ));
    }
    if pred.is_empty() {
        return invalid("cannot score an empty labeling");
    }
    if let Some(bad) = pred.iter().chain(truth).find(|&&id| id >= k) {
        return invalid(format!("label id {bad} outside [0, {k})"));
    }
    let mut contingency = vec![vec![0i64; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        contingency[p][t] += 1;
    }
    let (_, matched) = hungarian_max(&contingency);
    Ok(matched as f64 / pred.len() as f64)
}
