//! Offline optimum on a realized arrival sequence: a maximum-weight bipartite
//! matching between arrivals and patients, where an arrival-patient pair is
//! usable only if compatible and its success draw came up.

use crate::instance::{ArrivalEvent, MatchingInstance};
use crate::rng::SuccessOracle;

#[derive(Debug, Clone, PartialEq)]
pub struct HindsightResult {
    pub total: f64,
    /// (arrival index, patient) pairs with positive weight.
    pub pairs: Vec<(usize, usize)>,
}

/// Maximum-weight assignment on a dense `rows x cols` nonnegative matrix.
/// Returns the column assigned to each row, `None` for unmatched rows.
/// Shortest augmenting paths with potentials, O(r^2 c) for r <= c.
pub fn max_weight_matching(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let r = weights.len();
    if r == 0 {
        return Vec::new();
    }
    let c = weights[0].len();
    if c == 0 {
        return vec![None; r];
    }
    let transpose = r > c;
    let (n, m) = if transpose { (c, r) } else { (r, c) };
    let cost = |i: usize, j: usize| -> f64 {
        if transpose {
            -weights[j][i]
        } else {
            -weights[i][j]
        }
    };

    // 1-based potentials; column 0 is the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out = vec![None; r];
    for j in 1..=m {
        if p[j] == 0 {
            continue;
        }
        let (row, col) = if transpose {
            (j - 1, p[j] - 1)
        } else {
            (p[j] - 1, j - 1)
        };
        if weights[row][col] > 0.0 {
            out[row] = Some(col);
        }
    }
    out
}

/// Hindsight optimum for `arrivals`, using the same success draws as the
/// online policies.
pub fn hindsight_optimum(
    inst: &MatchingInstance,
    arrivals: &[ArrivalEvent],
    oracle: SuccessOracle,
) -> HindsightResult {
    hindsight_optimum_with_truth(inst, &inst.weights, arrivals, oracle)
}

/// Hindsight optimum valued with `true_weights` instead of the instance weights.
pub fn hindsight_optimum_with_truth(
    inst: &MatchingInstance,
    true_weights: &[Vec<f64>],
    arrivals: &[ArrivalEvent],
    oracle: SuccessOracle,
) -> HindsightResult {
    let n = inst.n_patients();
    let full: Vec<Vec<f64>> = arrivals
        .iter()
        .map(|a| {
            (0..n)
                .map(|u| {
                    let v = a.donor_type;
                    if inst.is_edge(u, v) && oracle.succeeds(a.round, u, inst.prob(u, v)) {
                        true_weights[u][v]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    // drop all-zero rows and columns before the cubic step
    let rows: Vec<usize> = (0..full.len())
        .filter(|&i| full[i].iter().any(|&w| w > 0.0))
        .collect();
    let cols: Vec<usize> = (0..n)
        .filter(|&u| rows.iter().any(|&i| full[i][u] > 0.0))
        .collect();
    let reduced: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| cols.iter().map(|&u| full[i][u]).collect())
        .collect();
    let assign = max_weight_matching(&reduced);

    let mut pairs = Vec::new();
    let mut total = 0.0;
    for (ri, a) in assign.into_iter().enumerate() {
        if let Some(ci) = a {
            let (i, u) = (rows[ri], cols[ci]);
            total += full[i][u];
            pairs.push((i, u));
        }
    }
    HindsightResult { total, pairs }
}
