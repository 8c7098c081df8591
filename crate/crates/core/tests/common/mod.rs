#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use specgap::{SplitMix64, TridiagonalSymmetric};

pub fn dense(t: &TridiagonalSymmetric) -> DMatrix<f64> {
    let n = t.len();
    DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => t.diag()[i],
        1 => t.off()[i.min(j)],
        _ => 0.0,
    })
}

/// All eigenvalues of `(A, M)`, ascending, via `M = L L^T` and a dense
/// symmetric solve of `L^-1 A L^-T`.
pub fn dense_pencil_eigenvalues(a: &TridiagonalSymmetric, m: &TridiagonalSymmetric) -> Vec<f64> {
    let l = dense(m).cholesky().expect("mass matrix is SPD").l();
    let l_inv = l
        .clone()
        .try_inverse()
        .expect("triangular factor is invertible");
    let c = &l_inv * dense(a) * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut values: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

fn uniform(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

/// Strictly diagonally dominant tridiagonal matrix with positive diagonal.
pub fn random_spd(rng: &mut SplitMix64, n: usize) -> TridiagonalSymmetric {
    let off: Vec<f64> = (0..n.saturating_sub(1))
        .map(|_| uniform(rng, -1.0, 1.0))
        .collect();
    let diag = (0..n)
        .map(|i| {
            let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
            let right = off.get(i).map_or(0.0, |v| v.abs());
            left + right + uniform(rng, 0.1, 4.0)
        })
        .collect();
    TridiagonalSymmetric::new(diag, off).unwrap()
}

pub fn random_pencil(
    rng: &mut SplitMix64,
    n: usize,
) -> (TridiagonalSymmetric, TridiagonalSymmetric) {
    (random_spd(rng, n), random_spd(rng, n))
}

/// `y_j = frac(i z_j / n + shift_j) - 1/2` for a plain (non-embedded) rank-1 rule.
pub fn direct_lattice(z: &[u64], n: u64, shift: &[f64]) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            z.iter()
                .zip(shift)
                .map(|(&zj, &dj)| {
                    let base = ((i as u128 * zj as u128) % n as u128) as f64 / n as f64;
                    (base + dj).fract() - 0.5
                })
                .collect()
        })
        .collect()
}

pub fn rel_err(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)
}
