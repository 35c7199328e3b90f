//! One-dimensional fuzzy c-means.
//!
//! Alternates the membership update
//! `u_ij = 1 / Σ_k (d_ij / d_ik)^(2/(m-1))` with the centroid update
//! `v_j = Σ_i u_ij^m x_i / Σ_i u_ij^m` until no centroid moves by `tol` or more.
//! Each full alternation cannot increase `J = Σ_i Σ_j u_ij^m d_ij²`; the
//! values of `J` are kept in [`FcmFit::objective`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcmParams {
    pub clusters: usize,
    pub fuzzifier: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for FcmParams {
    fn default() -> Self {
        FcmParams {
            clusters: 3,
            fuzzifier: 2.0,
            tol: 1e-9,
            max_iter: 300,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcmFit {
    /// Strictly ascending.
    pub centroids: Vec<f64>,
    /// One row per input value, columns aligned with `centroids`.
    pub memberships: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every iteration, then once more for the final
    /// membership refresh.
    pub objective: Vec<f64>,
}

pub fn fuzzy_c_means(values: &[f64], params: &FcmParams) -> Result<FcmFit> {
    let FcmParams {
        clusters,
        fuzzifier: m,
        tol,
        max_iter,
        seed,
    } = *params;
    if clusters < 2 {
        return Err(Error::Config(format!(
            "cluster count must be at least 2, got {clusters}"
        )));
    }
    if !(m > 1.0 && m.is_finite()) {
        return Err(Error::Config(format!("fuzzifier must be a finite real > 1, got {m}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    if let Some(row) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Parse {
            row,
            column: 0,
            message: format!("non-finite value {}", values[row]),
        });
    }

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < clusters {
        return Err(Error::DegenerateData(format!(
            "{} distinct values cannot support {clusters} clusters",
            distinct.len()
        )));
    }

    let mut centroids = initial_centroids(&sorted, &distinct, clusters, seed);
    let mut objective = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut memberships;
    while iterations < max_iter {
        memberships = values
            .iter()
            .map(|&x| membership_vector(x, &centroids, m))
            .collect::<Vec<_>>();
        let next = update_centroids(values, &memberships, &centroids, m);
        let movement = next
            .iter()
            .zip(&centroids)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        centroids = next;
        iterations += 1;
        objective.push(fcm_objective(values, &centroids, &memberships, m));
        if movement < tol {
            converged = true;
            break;
        }
    }

    let mut order: Vec<usize> = (0..clusters).collect();
    order.sort_by(|&a, &b| centroids[a].total_cmp(&centroids[b]));
    let centroids: Vec<f64> = order.iter().map(|&j| centroids[j]).collect();
    if centroids.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::DegenerateData(format!(
            "clusters collapsed onto tied centroids {centroids:?}"
        )));
    }
    memberships = values.iter().map(|&x| membership_vector(x, &centroids, m)).collect();
    objective.push(fcm_objective(values, &centroids, &memberships, m));

    Ok(FcmFit {
        centroids,
        memberships,
        iterations,
        converged,
        objective,
    })
}

/// Membership of `value` to each centroid. A value sitting exactly on a
/// centroid belongs to it alone.
pub fn membership_vector(value: f64, centroids: &[f64], fuzzifier: f64) -> Vec<f64> {
    let distances: Vec<f64> = centroids.iter().map(|c| (value - c).abs()).collect();
    let nearest = distances.iter().copied().fold(f64::INFINITY, f64::min);
    if nearest == 0.0 {
        let hit = distances.iter().position(|&d| d == 0.0).unwrap_or(0);
        return (0..centroids.len()).map(|j| if j == hit { 1.0 } else { 0.0 }).collect();
    }
    let exponent = 2.0 / (fuzzifier - 1.0);
    // scaled by the nearest distance so every weight lies in (0, 1]
    let weights: Vec<f64> = distances.iter().map(|d| (nearest / d).powf(exponent)).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

pub fn fcm_objective(values: &[f64], centroids: &[f64], memberships: &[Vec<f64>], fuzzifier: f64) -> f64 {
    values
        .iter()
        .zip(memberships)
        .map(|(x, row)| {
            row.iter()
                .zip(centroids)
                .map(|(u, c)| u.powf(fuzzifier) * (x - c) * (x - c))
                .sum::<f64>()
        })
        .sum()
}

fn update_centroids(values: &[f64], memberships: &[Vec<f64>], previous: &[f64], m: f64) -> Vec<f64> {
    (0..previous.len())
        .map(|j| {
            let (num, den) = values.iter().zip(memberships).fold((0.0, 0.0), |(num, den), (x, row)| {
                let w = row[j].powf(m);
                (num + w * x, den + w)
            });
            // a cluster that lost every point keeps its position
            if den > 0.0 {
                num / den
            } else {
                previous[j]
            }
        })
        .collect()
}

/// Evenly spaced quantiles of the data, falling back to quantiles of the
/// distinct values when the data quantiles tie, then jittered by less than a
/// tenth of the smallest gap so the order is kept.
fn initial_centroids(sorted: &[f64], distinct: &[f64], clusters: usize, seed: u64) -> Vec<f64> {
    let quantiles = |data: &[f64]| -> Vec<f64> {
        (0..clusters)
            .map(|j| {
                let pos = ((j as f64 + 0.5) * data.len() as f64 / clusters as f64).floor() as usize;
                data[pos.min(data.len() - 1)]
            })
            .collect()
    };
    let mut centroids = quantiles(sorted);
    if centroids.windows(2).any(|w| w[0] >= w[1]) {
        centroids = quantiles(distinct);
    }
    let gap = centroids.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for c in &mut centroids {
        *c += rng.gen_range(-0.1..0.1) * gap;
    }
    centroids
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(clusters: usize) -> FcmParams {
        FcmParams {
            clusters,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn two_tight_groups() {
        let values = [0.0, 0.0, 0.0, 10.0, 10.0, 10.0];
        let fit = fuzzy_c_means(&values, &params(2)).unwrap();
        assert!((fit.centroids[0] - 0.0).abs() < 1e-3);
        assert!((fit.centroids[1] - 10.0).abs() < 1e-3);
        for row in &fit.memberships[..3] {
            assert!(row[0] >= 0.99);
        }
        assert!(fit.converged);
    }

    #[test]
    fn midpoint_is_split_evenly() {
        assert_eq!(membership_vector(5.0, &[0.0, 10.0], 2.0), vec![0.5, 0.5]);
        assert_eq!(membership_vector(4.0, &[1.0, 7.0], 3.0), vec![0.5, 0.5]);
    }

    #[test]
    fn coincident_point_is_crisp() {
        assert_eq!(membership_vector(10.0, &[0.0, 10.0, 20.0], 2.0), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn known_membership_value() {
        // d = (2.5, 7.5): 1 / (1 + (1/3)^2) = 0.9
        let u = membership_vector(2.5, &[0.0, 10.0], 2.0);
        assert!((u[0] - 0.9).abs() < 1e-12);
        assert!((u[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn far_values_do_not_underflow() {
        let u = membership_vector(1e-300, &[0.0, 1e300], 1.01);
        assert!(u.iter().all(|v| v.is_finite()));
        assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            fuzzy_c_means(&[1.0, 1.0, 1.0], &params(2)),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(
            fuzzy_c_means(&[1.0, f64::NAN], &params(2)),
            Err(Error::Parse { row: 1, .. })
        ));
        assert!(matches!(fuzzy_c_means(&[1.0, 2.0], &params(1)), Err(Error::Config(_))));
        let bad_m = FcmParams {
            fuzzifier: 1.0,
            ..params(2)
        };
        assert!(matches!(fuzzy_c_means(&[1.0, 2.0], &bad_m), Err(Error::Config(_))));
    }

    #[test]
    fn exactly_c_distinct_values() {
        let fit = fuzzy_c_means(&[1.0, 5.0, 5.0, 9.0], &params(3)).unwrap();
        assert_eq!(fit.centroids.len(), 3);
        assert!(fit.centroids.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn objective_never_increases() {
        let values: Vec<f64> = (0..60)
            .map(|i| ((i * 37) % 23) as f64 + (i % 3) as f64 * 10.0)
            .collect();
        let fit = fuzzy_c_means(&values, &params(3)).unwrap();
        for w in fit.objective.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
        }
    }
}
