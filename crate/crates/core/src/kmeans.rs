//! Seeded spherical k-means over sparse tf.idf vectors.
//!
//! Points are L2-normalized so that squared Euclidean distance orders
//! candidates exactly like cosine similarity (`|a-b|^2 = 2 - 2 cos(a,b)`).
//! Lloyd iterations converge on the within-cluster sum of squares; the sum of
//! plain distances is reported alongside it.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vsm::SparseVector;

/// Centroids with at most this many dimensions are stored dense.
pub const DENSE_CENTROID_MAX_DIMS: usize = 4096;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Assignment {
    pub k: usize,
    pub cluster_of: Vec<usize>,
    #[serde(skip)]
    pub centroids: Vec<SparseVector>,
    /// Sum of Euclidean distances to the assigned centroid, per iteration.
    pub objective_trace: Vec<f64>,
    /// Within-cluster sum of squared distances, per iteration. Non-increasing.
    pub wcss_trace: Vec<f64>,
}

impl Assignment {
    /// Final within-cluster sum of squares.
    pub fn objective(&self) -> f64 {
        self.wcss_trace.last().copied().unwrap_or(0.0)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.cluster_of {
            sizes[c] += 1;
        }
        sizes
    }

    /// Member indices per cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.k];
        for (i, &c) in self.cluster_of.iter().enumerate() {
            m[c].push(i);
        }
        m
    }
}

#[derive(Debug, Clone)]
enum Centroid {
    Dense { values: Vec<f64>, norm_sq: f64 },
    Sparse { values: Vec<(usize, f64)>, norm_sq: f64 },
}

impl Centroid {
    fn from_point(p: &SparseVector, dims: usize, dense_limit: usize) -> Self {
        Self::mean(std::iter::once(p), dims, dense_limit)
    }

    /// Arithmetic mean; members are accumulated in iteration order in both
    /// layouts so the two produce identical bits.
    fn mean<'a>(members: impl Iterator<Item = &'a SparseVector>, dims: usize, dense_limit: usize) -> Self {
        if dims <= dense_limit {
            let mut values = vec![0.0; dims];
            let mut n = 0usize;
            for p in members {
                n += 1;
                for &(d, w) in p.entries() {
                    values[d] += w;
                }
            }
            if n > 0 {
                values.iter_mut().for_each(|v| *v /= n as f64);
            }
            let norm_sq = values.iter().filter(|v| **v != 0.0).map(|v| v * v).sum();
            Centroid::Dense { values, norm_sq }
        } else {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            let mut n = 0usize;
            for p in members {
                n += 1;
                for &(d, w) in p.entries() {
                    *acc.entry(d).or_insert(0.0) += w;
                }
            }
            let values: Vec<(usize, f64)> = acc
                .into_iter()
                .map(|(d, s)| (d, s / n as f64))
                .filter(|&(_, v)| v != 0.0)
                .collect();
            let norm_sq = values.iter().map(|&(_, v)| v * v).sum();
            Centroid::Sparse { values, norm_sq }
        }
    }

    fn get(&self, dim: usize) -> f64 {
        match self {
            Centroid::Dense { values, .. } => values[dim],
            Centroid::Sparse { values, .. } => values
                .binary_search_by_key(&dim, |&(d, _)| d)
                .map(|i| values[i].1)
                .unwrap_or(0.0),
        }
    }

    /// `|p - c|^2`, summed over the point's support in ascending order plus
    /// the centroid mass outside it.
    fn dist_sq(&self, p: &SparseVector) -> f64 {
        let norm_sq = match self {
            Centroid::Dense { norm_sq, .. } | Centroid::Sparse { norm_sq, .. } => *norm_sq,
        };
        let mut on_support = 0.0;
        let mut c_on_support = 0.0;
        for &(d, w) in p.entries() {
            let c = self.get(d);
            on_support += (w - c) * (w - c);
            c_on_support += c * c;
        }
        on_support + (norm_sq - c_on_support).max(0.0)
    }

    fn to_sparse(&self, space: crate::vsm::FeatureSpace) -> SparseVector {
        let entries: Vec<(usize, f64)> = match self {
            Centroid::Dense { values, .. } => values
                .iter()
                .copied()
                .enumerate()
                .filter(|&(_, v)| v > 0.0)
                .collect(),
            Centroid::Sparse { values, .. } => values.clone(),
        };
        SparseVector::new(space, entries).expect("centroid weights are nonnegative")
    }
}

fn check_input(vectors: &[SparseVector], k: usize, max_iterations: usize) -> Result<()> {
    if vectors.is_empty() {
        return Err(Error::invalid("k-means on an empty point set"));
    }
    if k == 0 || k > vectors.len() {
        return Err(Error::invalid(format!("k = {k} outside [1, {}]", vectors.len())));
    }
    if max_iterations == 0 {
        return Err(Error::invalid("max_iterations must be at least 1"));
    }
    let space = vectors[0].space();
    if let Some(v) = vectors.iter().find(|v| v.space() != space) {
        return Err(Error::SpaceMismatch {
            left: space,
            right: v.space(),
        });
    }
    Ok(())
}

pub fn kmeans(vectors: &[SparseVector], k: usize, seed: u64, max_iterations: usize) -> Result<Assignment> {
    kmeans_with_layout(vectors, k, seed, max_iterations, DENSE_CENTROID_MAX_DIMS)
}

fn kmeans_with_layout(
    vectors: &[SparseVector],
    k: usize,
    seed: u64,
    max_iterations: usize,
    dense_limit: usize,
) -> Result<Assignment> {
    check_input(vectors, k, max_iterations)?;
    let space = vectors[0].space();
    let dims = vectors
        .iter()
        .filter_map(|v| v.entries().last().map(|&(d, _)| d + 1))
        .max()
        .unwrap_or(0);

    // Zero vectors sit in cluster 0 and never touch a centroid.
    let points: Vec<usize> = (0..vectors.len()).filter(|&i| !vectors[i].is_zero()).collect();
    let unit: Vec<SparseVector> = points.iter().map(|&i| vectors[i].normalized()).collect();
    let mut cluster_of = vec![0usize; vectors.len()];

    if points.is_empty() {
        return Ok(Assignment {
            k,
            cluster_of,
            centroids: vec![SparseVector::zero(space); k],
            objective_trace: vec![0.0],
            wcss_trace: vec![0.0],
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(&unit, k, dims, dense_limit, &mut rng);

    let mut assigned: Vec<Option<usize>> = vec![None; unit.len()];
    let mut objective_trace = Vec::new();
    let mut wcss_trace = Vec::new();

    for iter in 0..max_iterations {
        let next: Vec<usize> = unit
            .par_iter()
            .zip(assigned.par_iter())
            .with_min_len(64)
            .map(|(p, cur)| nearest(p, *cur, &centroids))
            .collect();
        let changed = next.iter().zip(&assigned).any(|(n, a)| Some(*n) != *a);
        if iter > 0 && !changed {
            break;
        }
        let mut labels = next;
        repair_empty(&unit, &mut labels, &mut centroids, dims, dense_limit);
        assigned = labels.iter().map(|&c| Some(c)).collect();

        centroids = (0..k)
            .map(|c| {
                Centroid::mean(
                    unit.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p),
                    dims,
                    dense_limit,
                )
            })
            .collect();

        let (mut wcss, mut f) = (0.0, 0.0);
        for (p, &c) in unit.iter().zip(&labels) {
            let d2 = centroids[c].dist_sq(p);
            wcss += d2;
            f += d2.sqrt();
        }
        wcss_trace.push(wcss);
        objective_trace.push(f);
    }

    for (&i, a) in points.iter().zip(&assigned) {
        cluster_of[i] = a.expect("every point assigned after the first iteration");
    }
    Ok(Assignment {
        k,
        cluster_of,
        centroids: centroids.iter().map(|c| c.to_sparse(space)).collect(),
        objective_trace,
        wcss_trace,
    })
}

/// Nearest centroid; a point only leaves its current cluster for a strictly
/// closer one, and unassigned points break ties toward the lowest index.
fn nearest(p: &SparseVector, current: Option<usize>, centroids: &[Centroid]) -> usize {
    let mut best = current.unwrap_or(0);
    let mut best_d = centroids[best].dist_sq(p);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = centroid.dist_sq(p);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the nearest chosen center. When every point already sits
/// on a center the remaining centers are taken in index order.
fn seed_plus_plus(
    unit: &[SparseVector],
    k: usize,
    dims: usize,
    dense_limit: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Centroid> {
    let mut chosen = vec![rng.random_range(0..unit.len())];
    let mut centers = vec![Centroid::from_point(&unit[chosen[0]], dims, dense_limit)];
    let mut d2: Vec<f64> = unit.iter().map(|p| centers[0].dist_sq(p)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            (0..unit.len())
                .find(|i| !chosen.contains(i))
                .unwrap_or(chosen.len() % unit.len())
        };
        chosen.push(pick);
        let c = Centroid::from_point(&unit[pick], dims, dense_limit);
        for (p, d) in unit.iter().zip(d2.iter_mut()) {
            *d = d.min(c.dist_sq(p));
        }
        centers.push(c);
    }
    centers
}

/// Gives each empty cluster the point farthest from its current centroid,
/// taken from clusters that keep at least one member; ties to the lowest
/// index. Points that coincide with their centroid are never moved.
fn repair_empty(
    unit: &[SparseVector],
    labels: &mut [usize],
    centroids: &mut [Centroid],
    dims: usize,
    dense_limit: usize,
) {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    let mut moved = vec![false; unit.len()];
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in unit.iter().enumerate() {
            if moved[i] || sizes[labels[i]] < 2 {
                continue;
            }
            let d = centroids[labels[i]].dist_sq(p);
            if d > 0.0 && best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let Some((i, _)) = best else { break };
        sizes[labels[i]] -= 1;
        sizes[empty] += 1;
        labels[i] = empty;
        moved[i] = true;
        centroids[empty] = Centroid::from_point(&unit[i], dims, dense_limit);
    }
}

/// Runs `restarts` seeded k-means runs (seeds `seed`, `seed+1`, ...) and keeps
/// the lowest final within-cluster sum of squares; ties go to the earliest run.
pub fn kmeans_best_of(
    vectors: &[SparseVector],
    k: usize,
    seed: u64,
    restarts: usize,
    max_iterations: usize,
) -> Result<Assignment> {
    if restarts == 0 {
        return Err(Error::invalid("restarts must be at least 1"));
    }
    check_input(vectors, k, max_iterations)?;
    let runs = (0..restarts as u64)
        .into_par_iter()
        .map(|r| kmeans(vectors, k, seed.wrapping_add(r), max_iterations))
        .collect::<Result<Vec<_>>>()?;
    let mut best = None::<Assignment>;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.objective() < b.objective()) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vsm::FeatureSpace;
    use proptest::prelude::*;

    fn pts(raw: &[&[(usize, f64)]]) -> Vec<SparseVector> {
        raw.iter()
            .map(|e| SparseVector::new(FeatureSpace::Type, e.to_vec()).unwrap())
            .collect()
    }

    fn planted() -> Vec<SparseVector> {
        pts(&[
            &[(0, 1.0)],
            &[(0, 0.97), (1, 0.24)],
            &[(1, 1.0)],
            &[(0, 0.24), (1, 0.97)],
        ])
    }

    fn assert_monotone(a: &Assignment) {
        for w in a.wcss_trace.windows(2) {
            assert!(w[1] <= w[0], "wcss increased: {:?}", a.wcss_trace);
        }
    }

    #[test]
    fn one_cluster_per_point() {
        let v = planted();
        let a = kmeans(&v, 4, 3, 100).unwrap();
        let mut seen = a.cluster_of.clone();
        seen.sort();
        assert_eq!(seen, [0, 1, 2, 3]);
        assert_eq!(*a.objective_trace.last().unwrap(), 0.0);
        assert_eq!(a.objective(), 0.0);
    }

    #[test]
    fn single_cluster_centroid_is_mean() {
        let v = planted();
        let a = kmeans(&v, 1, 0, 100).unwrap();
        assert!(a.cluster_of.iter().all(|&c| c == 0));
        for dim in 0..2 {
            let mean: f64 = v.iter().map(|p| p.normalized().get(dim)).sum::<f64>() / 4.0;
            assert!((a.centroids[0].get(dim) - mean).abs() < 1e-15);
        }
    }

    #[test]
    fn planted_split_for_many_seeds() {
        let v = planted();
        for seed in 1..=10 {
            let a = kmeans_best_of(&v, 2, seed, 4, 100).unwrap();
            assert_eq!(a.cluster_of[0], a.cluster_of[1]);
            assert_eq!(a.cluster_of[2], a.cluster_of[3]);
            assert_ne!(a.cluster_of[0], a.cluster_of[2]);
            assert_monotone(&a);
        }
    }

    #[test]
    fn best_of_single_restart_matches_plain_run() {
        let v = planted();
        assert_eq!(
            kmeans_best_of(&v, 2, 9, 1, 100).unwrap(),
            kmeans(&v, 2, 9, 100).unwrap()
        );
    }

    #[test]
    fn best_of_is_no_worse_than_any_run() {
        let v = pts(&[
            &[(0, 1.0)],
            &[(0, 1.0), (1, 0.5)],
            &[(1, 1.0), (2, 0.2)],
            &[(2, 1.0)],
            &[(2, 0.7), (0, 0.7)],
            &[(1, 0.3), (2, 0.9)],
        ]);
        let best = kmeans_best_of(&v, 3, 100, 6, 50).unwrap();
        for r in 0..6 {
            assert!(best.objective() <= kmeans(&v, 3, 100 + r, 50).unwrap().objective());
        }
    }

    #[test]
    fn zero_vectors_go_to_cluster_zero() {
        let v = pts(&[&[], &[(0, 1.0)], &[(1, 1.0)], &[]]);
        let a = kmeans(&v, 2, 5, 100).unwrap();
        assert_eq!(a.cluster_of[0], 0);
        assert_eq!(a.cluster_of[3], 0);
        assert_ne!(a.cluster_of[1], a.cluster_of[2]);
        let all_zero = pts(&[&[], &[]]);
        let a = kmeans(&all_zero, 2, 5, 100).unwrap();
        assert_eq!(a.cluster_of, [0, 0]);
    }

    #[test]
    fn duplicate_points_leave_clusters_empty_only_when_forced() {
        let v = pts(&[&[(0, 1.0)], &[(0, 2.0)], &[(0, 3.0)]]);
        let a = kmeans(&v, 2, 1, 100).unwrap();
        assert!(a.cluster_of.iter().all(|&c| c == a.cluster_of[0]));
        let v = pts(&[&[(0, 1.0)], &[(0, 2.0)], &[(1, 3.0)]]);
        for seed in 0..20 {
            let a = kmeans(&v, 2, seed, 100).unwrap();
            assert!(a.cluster_sizes().iter().all(|&s| s > 0));
        }
    }

    #[test]
    fn input_errors() {
        let v = planted();
        assert!(kmeans(&v, 0, 0, 10).is_err());
        assert!(kmeans(&v, 5, 0, 10).is_err());
        assert!(kmeans(&[], 1, 0, 10).is_err());
        assert!(kmeans_best_of(&v, 2, 0, 0, 10).is_err());
        let mixed = vec![
            v[0].clone(),
            SparseVector::new(FeatureSpace::Name, [(0, 1.0)]).unwrap(),
        ];
        assert!(matches!(
            kmeans(&mixed, 1, 0, 10),
            Err(Error::SpaceMismatch { .. })
        ));
    }

    fn point_set() -> impl Strategy<Value = Vec<SparseVector>> {
        prop::collection::vec(prop::collection::btree_map(0usize..6, 0.01f64..5.0, 0..4), 2..14).prop_map(
            |raw| {
                raw.into_iter()
                    .map(|m| SparseVector::new(FeatureSpace::Name, m).unwrap())
                    .collect()
            },
        )
    }

    proptest! {
        #[test]
        fn dense_and_sparse_centroids_agree(v in point_set(), k in 1usize..4, seed in any::<u64>()) {
            let k = k.min(v.len());
            let dense = kmeans_with_layout(&v, k, seed, 50, usize::MAX).unwrap();
            let sparse = kmeans_with_layout(&v, k, seed, 50, 0).unwrap();
            prop_assert_eq!(&dense, &sparse);
            prop_assert_eq!(&dense.centroids, &sparse.centroids);
        }

        #[test]
        fn lloyd_is_monotone_and_reproducible(v in point_set(), k in 1usize..5, seed in any::<u64>()) {
            let k = k.min(v.len());
            let a = kmeans(&v, k, seed, 100).unwrap();
            for w in a.wcss_trace.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            prop_assert_eq!(a.cluster_of.len(), v.len());
            prop_assert!(a.cluster_of.iter().all(|&c| c < k));
            prop_assert_eq!(&a, &kmeans(&v, k, seed, 100).unwrap());
        }
    }
}
