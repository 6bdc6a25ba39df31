//! Competitive-ratio guarantees for clustered stochastic matching.
//!
//! The base factor for capacity `b` is
//!
//! ```text
//! alpha(b) = sup_{0 < eps <= 1/2}  1 - b^(-1/2 + eps) - exp(-b^(2 eps) / 3)
//! ```
//!
//! clamped at zero. The other guarantees discount it by the clustering error
//! `delta`, the weight perturbation `eta` and the bad-cluster share `rho`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRID: usize = 2000;

fn alpha_objective(b: f64, eps: f64) -> f64 {
    1.0 - b.powf(eps - 0.5) - (-b.powf(2.0 * eps) / 3.0).exp()
}

/// `alpha(b)` and the maximizing `eps`, before clamping. The objective is
/// scanned on a uniform grid and the best bracket refined by golden section.
pub fn alpha_raw(b: f64) -> (f64, f64) {
    let h = 0.5 / GRID as f64;
    let mut best = (f64::NEG_INFINITY, h);
    for i in 1..=GRID {
        let eps = i as f64 * h;
        let val = alpha_objective(b, eps);
        if val > best.0 {
            best = (val, eps);
        }
    }
    let mut lo = (best.1 - h).max(f64::EPSILON);
    let mut hi = (best.1 + h).min(0.5);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - phi * (hi - lo);
        let c = lo + phi * (hi - lo);
        if alpha_objective(b, a) < alpha_objective(b, c) {
            lo = a;
        } else {
            hi = c;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    let refined = alpha_objective(b, mid);
    if refined > best.0 {
        (refined, mid)
    } else {
        best
    }
}

/// Base guarantee for capacity `b`, clamped to `[0, 1]`.
pub fn alpha(b: usize) -> f64 {
    if b == 0 {
        return 0.0;
    }
    alpha_raw(b as f64).0.clamp(0.0, 1.0)
}

fn check_unit_open(name: &str, x: f64) -> Result<()> {
    if (0.0..1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {x} must lie in [0, 1)")))
    }
}

fn check_unit_closed(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {x} must lie in [0, 1]")))
    }
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// `alpha(b) (1 - 2 delta)`: clustering with relative error `delta`.
pub fn clustered_bound(b: usize, delta: f64) -> Result<f64> {
    check_unit_open("delta", delta)?;
    Ok(clamp01(alpha(b) * (1.0 - 2.0 * delta)))
}

/// `(1 - 2 eta) alpha(b) (1 - 2 delta)`: true weights within a factor
/// `1 +- eta` of the ones clustered on.
pub fn perturbed_bound(b: usize, delta: f64, eta: f64) -> Result<f64> {
    check_unit_open("eta", eta)?;
    Ok(clamp01((1.0 - 2.0 * eta) * clustered_bound(b, delta)?))
}

/// `alpha(b) (1 - rho) (1 - 2 delta)`: a `rho` share of optimal value sits
/// in clusters the error bound does not cover.
pub fn bad_cluster_bound(b: usize, delta: f64, rho: f64) -> Result<f64> {
    check_unit_open("delta", delta)?;
    check_unit_closed("rho", rho)?;
    Ok(clamp01(alpha(b) * (1.0 - rho) * (1.0 - 2.0 * delta)))
}

/// All three discounts together.
pub fn full_bound(b: usize, delta: f64, eta: f64, rho: f64) -> Result<f64> {
    check_unit_open("eta", eta)?;
    Ok(clamp01((1.0 - 2.0 * eta) * bad_cluster_bound(b, delta, rho)?))
}

/// `alpha(b) (1 - delta_opt) (1 - delta_alg)` for discretized donor types.
pub fn discretized_bound(b: usize, delta_opt: f64, delta_alg: f64) -> Result<f64> {
    check_unit_closed("delta_opt", delta_opt)?;
    check_unit_closed("delta_alg", delta_alg)?;
    Ok(clamp01(alpha(b) * (1.0 - delta_opt) * (1.0 - delta_alg)))
}

/// Heuristic competitive ratio `(1 - 1/sqrt(b)) (1 - nmae_max)`.
pub fn heuristic_ratio(b: usize, nmae_max: f64) -> Result<f64> {
    if b == 0 {
        return Err(Error::InvalidCapacity("capacity must be at least 1".into()));
    }
    check_unit_closed("nmae_max", nmae_max)?;
    Ok(clamp01((1.0 - 1.0 / (b as f64).sqrt()) * (1.0 - nmae_max)))
}

/// Capacity maximizing `alpha(b) (1 - 2 delta(b))` over candidate
/// `(b, delta)` pairs; ties go to the smaller `b`.
pub fn select_capacity(candidates: &[(usize, f64)]) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &(b, delta) in candidates {
        let val = clustered_bound(b, delta)?;
        best = match best {
            Some((bb, bv)) if bv > val || (bv == val && bb <= b) => Some((bb, bv)),
            _ => Some((b, val)),
        };
    }
    best.ok_or_else(|| Error::InvalidParameter("no candidate capacities".into()))
}

/// One edge of a matching for the value-weighted error shares: the relative
/// error of the edge's cluster, its weight and success probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedEdge {
    pub delta: f64,
    pub weight: f64,
    pub prob: f64,
}

/// `sum delta_e w_e p_e / sum w_e p_e`. Used for both the optimal-side and
/// the algorithm-side discretization error.
pub fn value_weighted_delta(edges: &[WeightedEdge]) -> Result<f64> {
    let den: f64 = edges.iter().map(|e| e.weight * e.prob).sum();
    if den <= 0.0 {
        return Err(Error::Undefined(
            "matching has zero value; weighted error is undefined".into(),
        ));
    }
    let num: f64 = edges.iter().map(|e| e.delta * e.weight * e.prob).sum();
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub b: usize,
    pub alpha: f64,
    pub delta: f64,
    pub eta: f64,
    pub rho: f64,
    pub clustered: f64,
    pub perturbed: f64,
    pub bad_cluster: f64,
    pub full: f64,
}

pub fn bounds_row(b: usize, delta: f64, eta: f64, rho: f64) -> Result<BoundsRow> {
    Ok(BoundsRow {
        b,
        alpha: alpha(b),
        delta,
        eta,
        rho,
        clustered: clustered_bound(b, delta)?,
        perturbed: perturbed_bound(b, delta, eta)?,
        bad_cluster: bad_cluster_bound(b, delta, rho)?,
        full: full_bound(b, delta, eta, rho)?,
    })
}

pub fn bounds_table(b_grid: &[usize], delta: f64, eta: f64, rho: f64) -> Result<Vec<BoundsRow>> {
    b_grid.iter().map(|&b| bounds_row(b, delta, eta, rho)).collect()
}
