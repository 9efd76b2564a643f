//! Independent oracles shared by the integration tests. Nothing here calls
//! into the optimizer it is used to check.
#![allow(dead_code)]

use std::collections::HashSet;

use maxscore::model::{dgp_sample, Dataset, DgpSpec};
use maxscore::rng::Stream;

/// `2 * n * score`, counted directly.
pub fn score_count(data: &Dataset<f64>, beta: &[f64]) -> i64 {
    data.rows()
        .zip(data.responses())
        .filter(|(x, _)| x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() >= 0.0)
        .map(|(_, &y)| if y == 1 { 1 } else { -1 })
        .sum()
}

pub fn as_score(count: i64, n: usize) -> f64 {
    count as f64 / (2 * n) as f64
}

/// Maximum score over `k` uniformly spaced angles.
pub fn angle_grid_max(data: &Dataset<f64>, k: usize) -> f64 {
    (0..k)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / k as f64;
            score_count(data, &[t.cos(), t.sin()])
        })
        .max()
        .map(|c| as_score(c, data.len()))
        .unwrap()
}

fn pattern(data: &Dataset<f64>, beta: &[f64]) -> u64 {
    data.rows().enumerate().fold(0u64, |acc, (i, x)| {
        if x[0] * beta[0] + x[1] * beta[1] >= 0.0 {
            acc | (1 << i)
        } else {
            acc
        }
    })
}

/// Every inclusion pattern realizable by some direction in the plane.
///
/// The directions realizing a pattern form an intersection of half circles
/// whose endpoints are the directions orthogonal to the data points, so it is
/// enough to test those endpoints, the bisectors of every pair of them, and
/// the points themselves (for intersections that are a full half circle).
pub fn realizable_patterns(data: &Dataset<f64>) -> HashSet<u64> {
    let mut ends: Vec<[f64; 2]> = Vec::new();
    let mut cands: Vec<[f64; 2]> = Vec::new();
    for x in data.rows() {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if r == 0.0 {
            continue;
        }
        ends.push([-x[1] / r, x[0] / r]);
        ends.push([x[1] / r, -x[0] / r]);
        cands.push([x[0] / r, x[1] / r]);
        cands.push([-x[0] / r, -x[1] / r]);
        cands.push([-x[1], x[0]]);
        cands.push([x[1], -x[0]]);
    }
    for i in 0..ends.len() {
        for j in i + 1..ends.len() {
            let s = [ends[i][0] + ends[j][0], ends[i][1] + ends[j][1]];
            if s[0] != 0.0 || s[1] != 0.0 {
                cands.push(s);
            }
        }
    }
    cands.push([1.0, 0.0]);
    cands.iter().map(|c| pattern(data, c)).collect()
}

/// Maximum score by enumerating all `2^n` inclusion patterns and keeping
/// the realizable ones.
pub fn enumerate_patterns_max(data: &Dataset<f64>) -> f64 {
    let n = data.len();
    assert!(n <= 20);
    let feasible = realizable_patterns(data);
    let w: Vec<i64> = data.responses().iter().map(|&y| if y == 1 { 1 } else { -1 }).collect();
    let mut best = i64::MIN;
    for mask in 0u64..(1 << n) {
        let total: i64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| w[i]).sum();
        if total > best && feasible.contains(&mask) {
            best = total;
        }
    }
    as_score(best, n)
}

/// The 100 seeded d = 2 datasets used for the optimizer oracles: sizes cycle
/// through 1..=50, drawn from the heteroscedastic normal design.
pub fn oracle_datasets() -> Vec<Dataset<f64>> {
    let spec = DgpSpec::<f64>::hetero_normal(2);
    (0..100u64)
        .map(|k| {
            let n = 1 + (k as usize % 50);
            dgp_sample(&spec, n, &mut Stream::new(2024).child(k).rng())
        })
        .collect()
}
