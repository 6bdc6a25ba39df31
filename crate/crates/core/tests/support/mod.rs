//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use coarsen::instance::{BloodType, DonorType, MatchingInstance, PatientNode};
use coarsen::lp::LpProblem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random small instance: `n_u` patients, `n_v` donor types, integer horizon.
pub fn random_instance(seed: u64, n_u: usize, n_v: usize) -> MatchingInstance {
    let mut r = rng(seed);
    let patients = (0..n_u)
        .map(|i| PatientNode {
            id: format!("p{i}"),
            features: vec![r.random()],
            blood_type: BloodType::O,
            status: r.random_range(1..=6),
            location: [r.random::<f64>() * 3000.0, r.random::<f64>() * 3000.0],
        })
        .collect();
    let horizon: u32 = r.random_range(1..=2 * n_v as u32 + 2);
    let raw: Vec<f64> = (0..n_v).map(|_| r.random::<f64>() + 0.05).collect();
    let s: f64 = raw.iter().sum();
    let mut rates: Vec<f64> = raw.iter().map(|x| x / s * f64::from(horizon)).collect();
    let resid = f64::from(horizon) - rates.iter().sum::<f64>();
    rates[0] += resid;
    let donor_types = (0..n_v)
        .map(|j| DonorType {
            id: format!("d{j}"),
            blood_type: BloodType::O,
            features: vec![r.random()],
            arrival_rate: rates[j],
            location: [r.random::<f64>() * 3000.0, r.random::<f64>() * 3000.0],
        })
        .collect();
    let mut weights = vec![vec![0.0; n_v]; n_u];
    let mut probs = vec![vec![0.0; n_v]; n_u];
    let mut compat = vec![vec![false; n_v]; n_u];
    for u in 0..n_u {
        for v in 0..n_v {
            if r.random::<f64>() < 0.7 {
                compat[u][v] = true;
                weights[u][v] = (r.random::<f64>() * 10.0 * 1000.0).round() / 1000.0;
                probs[u][v] = if r.random::<f64>() < 0.5 { 1.0 } else { r.random_range(0.1..=1.0) };
            }
        }
    }
    MatchingInstance {
        patients,
        donor_types,
        weights,
        success_probs: probs,
        compatibility: compat,
        horizon,
    }
}

/// Dense constraint matrix of an LP in `max c x, A x <= b, x >= 0` form.
pub fn dense_form(lp: &LpProblem) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let m = lp.n_nodes() + lp.n_donors();
    let n = lp.edges.len();
    let mut a = vec![vec![0.0; n]; m];
    for (j, e) in lp.edges.iter().enumerate() {
        a[e.node][j] = e.prob;
        a[lp.n_nodes() + e.donor][j] = 1.0;
    }
    let c = lp.edges.iter().map(|e| e.weight * e.prob).collect();
    let b = lp.capacities.iter().chain(&lp.rates).copied().collect();
    (c, a, b)
}

/// Textbook dense tableau simplex with Bland's rule for
/// `max c x, A x <= b, x >= 0` with `b >= 0`. Returns the optimal value.
pub fn tableau_simplex(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> f64 {
    let m = a.len();
    let n = c.len();
    let w = n + m + 1;
    let mut t = vec![vec![0.0; w]; m + 1];
    for i in 0..m {
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][w - 1] = b[i];
    }
    for j in 0..n {
        t[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    loop {
        let Some(q) = (0..n + m).find(|&j| t[m][j] < -1e-12) else {
            break;
        };
        let mut row = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][q] > 1e-12 {
                let ratio = t[i][w - 1] / t[i][q];
                let better = ratio < best - 1e-12
                    || ((ratio - best).abs() <= 1e-12 && row.is_some_and(|r: usize| basis[i] < basis[r]));
                if better {
                    best = ratio;
                    row = Some(i);
                }
            }
        }
        let r = row.expect("bounded program");
        let piv = t[r][q];
        t[r].iter_mut().for_each(|x| *x /= piv);
        for i in 0..=m {
            if i != r && t[i][q] != 0.0 {
                let f = t[i][q];
                for j in 0..w {
                    t[i][j] -= f * t[r][j];
                }
            }
        }
        basis[r] = q;
    }
    t[m][w - 1]
}

/// Best objective over all basic feasible solutions, by solving every
/// square subsystem of tight constraints. Only for a handful of variables.
pub fn vertex_enumeration(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> f64 {
    let n = c.len();
    let m = a.len();
    // rows: A x <= b, then -x_j <= 0
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e, 0.0));
    }
    let total = m + n;
    let mut best = f64::NEG_INFINITY;
    let mut idx: Vec<usize> = (0..n).collect();
    if n == 0 {
        return 0.0;
    }
    loop {
        if let Some(x) = solve_square(&idx.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>()) {
            let feasible = rows
                .iter()
                .all(|(r, rhs)| r.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= rhs + 1e-9);
            if feasible {
                let val: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = best.max(val);
            }
        }
        if !next_combination(&mut idx, total) {
            return best;
        }
    }
}

fn next_combination(idx: &mut [usize], total: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < total - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn solve_square(rows: &[(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let n = rows.len();
    let mut m: Vec<Vec<f64>> = rows
        .iter()
        .map(|(r, b)| {
            let mut x = r.clone();
            x.push(*b);
            x
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        let p = m[col][col];
        m[col].iter_mut().for_each(|x| *x /= p);
        for i in 0..n {
            if i != col {
                let f = m[i][col];
                if f != 0.0 {
                    for j in col..=n {
                        m[i][j] -= f * m[col][j];
                    }
                }
            }
        }
    }
    Some(m.iter().map(|r| r[n]).collect())
}

/// Same program through the `minilp` crate.
pub fn minilp_value(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> f64 {
    let mut p = minilp::Problem::new(minilp::OptimizationDirection::Maximize);
    let vars: Vec<minilp::Variable> = c.iter().map(|&cj| p.add_var(cj, (0.0, f64::INFINITY))).collect();
    for (row, &rhs) in a.iter().zip(b) {
        let expr: Vec<(minilp::Variable, f64)> = vars
            .iter()
            .zip(row)
            .filter(|(_, &x)| x != 0.0)
            .map(|(&v, &x)| (v, x))
            .collect();
        if !expr.is_empty() {
            p.add_constraint(expr.as_slice(), minilp::ComparisonOp::Le, rhs);
        }
    }
    p.solve().expect("feasible bounded program").objective()
}

/// Exhaustive maximum over injective partial assignments rows -> columns.
pub fn brute_force_matching(w: &[Vec<f64>]) -> f64 {
    fn rec(w: &[Vec<f64>], i: usize, used: &mut [bool]) -> f64 {
        if i == w.len() {
            return 0.0;
        }
        let mut best = rec(w, i + 1, used);
        for j in 0..used.len() {
            if !used[j] && w[i][j] > 0.0 {
                used[j] = true;
                best = best.max(w[i][j] + rec(w, i + 1, used));
                used[j] = false;
            }
        }
        best
    }
    let cols = w.first().map_or(0, Vec::len);
    rec(w, 0, &mut vec![false; cols])
}

/// Exact two-sided signed-rank p-value by enumerating all 2^n sign flips.
pub fn wilcoxon_enumeration(diffs: &[f64]) -> f64 {
    let d: Vec<f64> = diffs.iter().copied().filter(|x| *x != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return 1.0;
    }
    let mags: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    // average ranks by counting
    let ranks: Vec<f64> = mags
        .iter()
        .map(|&x| {
            let less = mags.iter().filter(|&&y| y < x).count() as f64;
            let eq = mags.iter().filter(|&&y| y == x).count() as f64;
            less + (eq + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = ranks.iter().zip(&d).filter(|(_, x)| **x > 0.0).map(|(r, _)| r).sum();
    let mut le = 0u64;
    let mut ge = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if s <= observed + 1e-9 {
            le += 1;
        }
        if s >= observed - 1e-9 {
            ge += 1;
        }
    }
    let total = (1u64 << n) as f64;
    (2.0 * (le.min(ge) as f64) / total).min(1.0)
}

/// `alpha(b)` by brute force over a uniform grid with step `1e-6`.
pub fn alpha_dense_grid(b: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let steps = 500_000;
    for i in 1..=steps {
        let eps = i as f64 * 1e-6;
        let v = 1.0 - b.powf(-0.5 + eps) - (-b.powf(2.0 * eps) / 3.0).exp();
        best = best.max(v);
    }
    best.max(0.0)
}
