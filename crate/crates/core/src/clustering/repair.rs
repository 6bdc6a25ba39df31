//! Two-phase repair turning an arbitrary partition into one whose clusters
//! all have at least `min_size` members.
//!
//! Merge phase: undersized clusters are processed smallest first (ties by
//! lowest position) and merged into the nearest centroid, restricted to other
//! undersized clusters while any exist. Split phase: clusters of size
//! `>= 2 * min_size` are recursively bisected.

use super::bisection::recursive_bisection;
use super::kmeans::{centroid, sq_dist};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, SimRng};

pub(crate) fn merge_phase(
    points: &[Vec<f64>],
    raw: Vec<Vec<usize>>,
    min_size: usize,
) -> Result<Vec<Vec<usize>>> {
    let mut clusters: Vec<Vec<usize>> = raw.into_iter().filter(|c| !c.is_empty()).collect();
    let total: usize = clusters.iter().map(Vec::len).sum();
    if total < min_size {
        return Err(Error::InvalidCapacity(format!(
            "{total} points cannot form a cluster of size {min_size}"
        )));
    }
    let mut centers: Vec<Vec<f64>> = clusters.iter().map(|c| centroid(points, c)).collect();

    loop {
        let mut undersized: Vec<usize> = (0..clusters.len())
            .filter(|&i| clusters[i].len() < min_size)
            .collect();
        if undersized.is_empty() {
            break;
        }
        undersized.sort_by_key(|&i| (clusters[i].len(), i));
        let src = undersized[0];
        let pool: Vec<usize> = if undersized.len() > 1 {
            undersized[1..].to_vec()
        } else {
            (0..clusters.len()).filter(|&i| i != src).collect()
        };
        let mut target = usize::MAX;
        let mut best = f64::INFINITY;
        for &j in &pool {
            let d = sq_dist(&centers[src], &centers[j]);
            if d < best || (d == best && j < target) {
                best = d;
                target = j;
            }
        }
        debug_assert!(target != usize::MAX);
        let moved = std::mem::take(&mut clusters[src]);
        clusters[target].extend(moved);
        centers[target] = centroid(points, &clusters[target]);
        clusters.remove(src);
        centers.remove(src);
    }
    Ok(clusters)
}

pub(crate) fn split_phase(
    points: &[Vec<f64>],
    clusters: Vec<Vec<usize>>,
    min_size: usize,
    rng: &mut SimRng,
) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(clusters.len());
    for c in clusters {
        if c.len() >= 2 * min_size {
            out.extend(recursive_bisection(points, c, min_size, rng));
        } else {
            out.push(c);
        }
    }
    out
}

/// Repairs `raw` so that every output cluster has at least `min_size` members.
/// `seed` drives the 2-means initializations of the split phase.
pub fn repair_clusters(
    points: &[Vec<f64>],
    raw: Vec<Vec<usize>>,
    min_size: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    repair_with(points, raw, min_size, &mut rng_from_seed(seed))
}

pub(crate) fn repair_with(
    points: &[Vec<f64>],
    raw: Vec<Vec<usize>>,
    min_size: usize,
    rng: &mut SimRng,
) -> Result<Vec<Vec<usize>>> {
    if min_size == 0 {
        return Err(Error::InvalidCapacity("minimum size must be at least 1".into()));
    }
    let merged = merge_phase(points, raw, min_size)?;
    Ok(split_phase(points, merged, min_size, rng))
}
