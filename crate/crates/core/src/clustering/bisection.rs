//! Top-down divisive clustering by repeated 2-means, with a geometric
//! fallback when a 2-means split would leave a side below the size floor.

use std::cmp::Ordering;

use super::kmeans::{centroid, kmeans};
use crate::par::Execution;
use crate::rng::SimRng;

const TWO_MEANS_ITERS: usize = 50;

/// Splits `members` into two parts, each of size at least `min_size`.
/// Requires `members.len() >= 2 * min_size`.
pub(crate) fn bisect(
    points: &[Vec<f64>],
    members: &[usize],
    min_size: usize,
    rng: &mut SimRng,
) -> (Vec<usize>, Vec<usize>) {
    debug_assert!(members.len() >= 2 * min_size);
    let res = kmeans(points, members, 2, TWO_MEANS_ITERS, rng, Execution::Sequential);
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (i, &m) in members.iter().enumerate() {
        if res.labels[i] == 0 {
            left.push(m);
        } else {
            right.push(m);
        }
    }
    if left.len() >= min_size && right.len() >= min_size {
        return (left, right);
    }
    // 2-means collapsed or is too lopsided: cut along the centroid axis.
    let (c0, c1) = if left.is_empty() || right.is_empty() {
        (res.centers[0].clone(), res.centers[1].clone())
    } else {
        (centroid(points, &left), centroid(points, &right))
    };
    projection_split(points, members, &c0, &c1, min_size)
}

/// Projects members onto the axis `c1 - c0` and cuts at the index closest
/// to the median that keeps both sides at or above `min_size`.
pub(crate) fn projection_split(
    points: &[Vec<f64>],
    members: &[usize],
    c0: &[f64],
    c1: &[f64],
    min_size: usize,
) -> (Vec<usize>, Vec<usize>) {
    let axis: Vec<f64> = c1.iter().zip(c0).map(|(a, b)| a - b).collect();
    let mut keyed: Vec<(f64, usize)> = members
        .iter()
        .map(|&m| {
            let proj = points[m].iter().zip(&axis).map(|(x, a)| x * a).sum::<f64>();
            (proj, m)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    let n = keyed.len();
    let cut = (n / 2).clamp(min_size, n - min_size);
    let left = keyed[..cut].iter().map(|&(_, m)| m).collect();
    let right = keyed[cut..].iter().map(|&(_, m)| m).collect();
    (left, right)
}

/// Recursively bisects until every part is smaller than `2 * min_size`.
pub(crate) fn recursive_bisection(
    points: &[Vec<f64>],
    members: Vec<usize>,
    min_size: usize,
    rng: &mut SimRng,
) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut stack = vec![members];
    while let Some(part) = stack.pop() {
        if part.len() < 2 * min_size {
            out.push(part);
            continue;
        }
        let (l, r) = bisect(points, &part, min_size, rng);
        stack.push(r);
        stack.push(l);
    }
    out
}
