//! Random fixtures and finite-difference helpers shared by unit tests.

use crate::numerics::{Matrix, Rng};

pub fn random_matrix(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.normal(0.0, scale)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_simplex_rows(rng: &mut Rng, rows: usize, k: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, k);
    for r in 0..rows {
        let raw: Vec<f64> = (0..k).map(|_| rng.uniform() + 1e-3).collect();
        let s: f64 = raw.iter().sum();
        m.row_mut(r).iter_mut().zip(raw).for_each(|(o, v)| *o = v / s);
    }
    m
}
