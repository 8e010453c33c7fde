#![allow(dead_code)]

use reward_adjust_core::NormalizedGroup;

/// Independent check of every output invariant of an adjusted vector in
/// sorted order. Returns a description of the first violation.
pub fn check_solution(ng: &NormalizedGroup, z: &[f64], f_star: f64, feas_tol: f64) -> Result<(), String> {
    let n = ng.sorted_rewards.len();
    if z.len() != n {
        return Err(format!("length {} != {}", z.len(), n));
    }
    let mean: f64 = ng.sorted_probs.iter().zip(z).map(|(p, z)| p * z).sum();
    if (mean - ng.mean).abs() > 1e-9 * ng.mean.abs().max(1.0) {
        return Err(format!("mean {mean} != {}", ng.mean));
    }
    for (i, &v) in z.iter().enumerate() {
        if v < ng.lower - feas_tol || v > ng.upper + feas_tol {
            return Err(format!("z[{i}] = {v} out of bounds"));
        }
    }
    for (i, w) in z.windows(2).enumerate() {
        if w[0] < w[1] {
            return Err(format!("order violated at {i}: {} < {}", w[0], w[1]));
        }
    }
    let f_r: f64 = ng
        .sorted_probs
        .iter()
        .zip(&ng.sorted_rewards)
        .map(|(p, r)| p * r * r)
        .sum();
    if f_star < f_r - 1e-12 {
        return Err(format!("objective {f_star} below original {f_r}"));
    }
    let mut distinct: Vec<f64> = z.to_vec();
    distinct.dedup();
    if distinct.len() > 3 {
        return Err(format!("{} distinct values", distinct.len()));
    }
    Ok(())
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
