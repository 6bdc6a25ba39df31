use rand::Rng;

use crate::par::{self, Execution};
use crate::rng::SimRng;

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn centroid(points: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let dim = points.first().map_or(0, Vec::len);
    let mut c = vec![0.0; dim];
    for &m in members {
        for (acc, x) in c.iter_mut().zip(&points[m]) {
            *acc += x;
        }
    }
    let n = members.len().max(1) as f64;
    c.iter_mut().for_each(|x| *x /= n);
    c
}

/// Index of the nearest center; ties go to the lowest index.
pub(crate) fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding over the subset `members`; returns center vectors.
pub(crate) fn kmeans_pp_init(
    points: &[Vec<f64>],
    members: &[usize],
    k: usize,
    rng: &mut SimRng,
) -> Vec<Vec<f64>> {
    let n = members.len();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centers.push(points[members[first]].clone());
    let mut d2: Vec<f64> = members
        .iter()
        .map(|&m| sq_dist(&points[m], &centers[0]))
        .collect();

    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                if target < d {
                    pick = Some(i);
                    break;
                }
                target -= d;
            }
            // rounding can walk past the end; take the last positive entry
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap_or(0))
        } else {
            // all remaining points coincide with a center
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            if free.is_empty() {
                break;
            }
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        let c = points[members[pick]].clone();
        for (i, &m) in members.iter().enumerate() {
            let d = sq_dist(&points[m], &c);
            if d < d2[i] {
                d2[i] = d;
            }
        }
        centers.push(c);
    }
    centers
}

#[derive(Debug, Clone)]
pub(crate) struct KMeansResult {
    /// Label per entry of `members`.
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
}

/// Lloyd's algorithm with k-means++ seeding on the subset `members`.
pub(crate) fn kmeans(
    points: &[Vec<f64>],
    members: &[usize],
    k: usize,
    max_iter: usize,
    rng: &mut SimRng,
    exec: Execution,
) -> KMeansResult {
    assert!(k >= 1 && k <= members.len(), "k out of range");
    let mut centers = kmeans_pp_init(points, members, k, rng);
    let mut labels = vec![usize::MAX; members.len()];
    for _ in 0..max_iter {
        let new_labels = par::map_slice(exec, members, |&m| nearest(&points[m], &centers).0);
        let changed = new_labels != labels;
        labels = new_labels;
        if !changed {
            break;
        }
        let dim = centers[0].len();
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (i, &m) in members.iter().enumerate() {
            let l = labels[i];
            counts[l] += 1;
            for (acc, x) in sums[l].iter_mut().zip(&points[m]) {
                *acc += x;
            }
        }
        for (j, c) in centers.iter_mut().enumerate() {
            // an emptied center keeps its previous position
            if counts[j] > 0 {
                let n = counts[j] as f64;
                for (dst, s) in c.iter_mut().zip(&sums[j]) {
                    *dst = s / n;
                }
            }
        }
    }
    KMeansResult { labels, centers }
}
