//! Vertex enumeration straight from the constraint system.
//!
//! A vertex of `{p.z = c, m <= z_i <= M, z_i >= z_(i+1)}` in `R^n` is a
//! feasible point where the equality plus `n - 1` linearly independent
//! inequalities are active. This solver tries every such choice, solves the
//! resulting square system and keeps the feasible solutions. It makes no use
//! of the block structure and exists to check the fast solvers.

use alloc::vec;
use alloc::vec::Vec;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::group::NormalizedGroup;
use crate::sum;

use super::AdjustedSolution;

pub const VERTEX_ORACLE_MAX_N: usize = 8;

const PIVOT_EPS: f64 = 1e-12;
const DEDUP_TOL: f64 = 1e-9;

#[derive(Clone, Copy)]
enum Active {
    Upper(usize),
    Lower(usize),
    /// `z_i - z_(i+1) = 0`
    Order(usize),
}

/// Gaussian elimination with partial pivoting on a dense row-major system.
/// Returns `None` when a pivot falls below `PIVOT_EPS`.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let pivot_row = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[pivot_row * n + col].abs() < PIVOT_EPS {
            return None;
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for j in row + 1..n {
            acc -= a[row * n + j] * x[j];
        }
        x[row] = acc / a[row * n + row];
    }
    Some(x)
}

fn feasible(z: &[f64], ng: &NormalizedGroup, tol: f64) -> bool {
    let bounds = z.iter().all(|&v| v >= ng.lower - tol && v <= ng.upper + tol);
    let order = z.windows(2).all(|w| w[0] >= w[1] - tol);
    let mean = sum::dot(&ng.sorted_probs, z);
    bounds && order && (mean - ng.mean).abs() <= tol * ng.mean.abs().max(1.0)
}

/// Advances `idx` to the next `r`-combination of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let r = idx.len();
    let mut i = r;
    while i > 0 {
        i -= 1;
        if idx[i] < n - r + i {
            idx[i] += 1;
            for j in i + 1..r {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Maximizes the objective over all vertices found by brute-force active-set
/// enumeration. Exponential in `n`; limited to [`VERTEX_ORACLE_MAX_N`].
pub fn solve_vertex_oracle(ng: &NormalizedGroup, cfg: &SolverConfig) -> Result<AdjustedSolution> {
    cfg.validate()?;
    let n = ng.len();
    if n == 0 {
        return Err(Error::EmptyGroup);
    }
    if n > VERTEX_ORACLE_MAX_N {
        return Err(Error::GroupTooLarge {
            n,
            max: VERTEX_ORACLE_MAX_N,
        });
    }

    let mut constraints = Vec::with_capacity(3 * n - 1);
    constraints.extend((0..n).map(Active::Upper));
    constraints.extend((0..n).map(Active::Lower));
    constraints.extend((0..n - 1).map(Active::Order));

    let r = n - 1;
    let mut idx: Vec<usize> = (0..r).collect();
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut solved = 0usize;

    loop {
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        a[..n].copy_from_slice(&ng.sorted_probs);
        b[0] = ng.mean;
        for (row, &ci) in idx.iter().enumerate() {
            let row = row + 1;
            match constraints[ci] {
                Active::Upper(i) => {
                    a[row * n + i] = 1.0;
                    b[row] = ng.upper;
                }
                Active::Lower(i) => {
                    a[row * n + i] = 1.0;
                    b[row] = ng.lower;
                }
                Active::Order(i) => {
                    a[row * n + i] = 1.0;
                    a[row * n + i + 1] = -1.0;
                }
            }
        }
        if let Some(z) = solve_dense(a, b, n) {
            solved += 1;
            let duplicate = vertices
                .iter()
                .any(|v| v.iter().zip(&z).all(|(x, y)| (x - y).abs() <= DEDUP_TOL));
            if !duplicate && feasible(&z, ng, cfg.feas_tol) {
                vertices.push(z);
            }
        }
        if r == 0 || !next_combination(&mut idx, constraints.len()) {
            break;
        }
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for v in vertices {
        let f = sum::sum(v.iter().zip(&ng.sorted_probs).map(|(z, p)| p * z * z));
        if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
            best = Some((f, v));
        }
    }
    let (_, mut z) = best.ok_or(Error::InfeasibleGroup)?;
    for v in &mut z {
        *v = v.clamp(ng.lower, ng.upper);
    }
    let f_star = sum::sum(z.iter().zip(&ng.sorted_probs).map(|(z, p)| p * z * z));

    // report the split descriptors of whatever point was found
    let k = z.iter().take_while(|&&v| v >= ng.upper - DEDUP_TOL).count();
    let l = n - z.iter().rev().take_while(|&&v| v <= ng.lower + DEDUP_TOL).count();
    let l = l.max(k);
    Ok(AdjustedSolution {
        alpha: (k < l).then(|| z[k]),
        z_star: z,
        f_star,
        k,
        l,
        iterations: solved,
    })
}
