//! The offline dispatch program.
//!
//! ```text
//! max   sum_e  w_e f_e p_e
//! s.t.  sum_{e at u} f_e p_e <= cap_u     for every offline node u
//!       sum_{e at v} f_e     <= r_v       for every donor type v
//!       f_e >= 0
//! ```
//!
//! Offline nodes are patients (capacity 1) or clusters (capacity = actual
//! cluster size, weights = representative weights). Only compatible edges get
//! a variable.

pub mod simplex;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::instance::MatchingInstance;
use simplex::{Column, SimplexOptions};

pub const FEASIBILITY_TOL: f64 = 1e-8;
pub const GAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpEdge {
    pub node: usize,
    pub donor: usize,
    pub weight: f64,
    pub prob: f64,
}

impl LpEdge {
    pub fn objective_coef(&self) -> f64 {
        self.weight * self.prob
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub edges: Vec<LpEdge>,
    pub capacities: Vec<f64>,
    pub rates: Vec<f64>,
    /// Cluster membership when built over a clustering.
    pub clusters: Option<Vec<Vec<usize>>>,
}

impl LpProblem {
    pub fn n_nodes(&self) -> usize {
        self.capacities.len()
    }

    pub fn n_donors(&self) -> usize {
        self.rates.len()
    }

    /// Row layout: capacity rows `0..n_nodes`, then rate rows.
    pub fn columns(&self) -> Vec<Column> {
        let off = self.n_nodes();
        self.edges
            .iter()
            .map(|e| {
                let mut col = Vec::with_capacity(2);
                if e.prob != 0.0 {
                    col.push((e.node, e.prob));
                }
                col.push((off + e.donor, 1.0));
                col
            })
            .collect()
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.capacities.iter().chain(&self.rates).copied().collect()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.edges.iter().map(LpEdge::objective_coef).collect()
    }
}

/// Builds the dispatch program over patients, or over clusters when a
/// clustering is given.
pub fn build_lp(inst: &MatchingInstance, clustering: Option<&Clustering>) -> LpProblem {
    let rates: Vec<f64> = inst.donor_types.iter().map(|d| d.arrival_rate).collect();
    let mut edges = Vec::new();
    match clustering {
        None => {
            for u in 0..inst.n_patients() {
                for v in 0..inst.n_donor_types() {
                    if inst.is_edge(u, v) {
                        edges.push(LpEdge {
                            node: u,
                            donor: v,
                            weight: inst.weight(u, v),
                            prob: inst.prob(u, v),
                        });
                    }
                }
            }
            LpProblem {
                edges,
                capacities: vec![1.0; inst.n_patients()],
                rates,
                clusters: None,
            }
        }
        Some(c) => {
            for ci in 0..c.n_clusters() {
                for v in 0..inst.n_donor_types() {
                    if c.compatibility[ci][v] {
                        edges.push(LpEdge {
                            node: ci,
                            donor: v,
                            weight: c.representative_weights[ci][v],
                            prob: c.representative_probs[ci][v],
                        });
                    }
                }
            }
            LpProblem {
                edges,
                capacities: c.clusters.iter().map(|m| m.len() as f64).collect(),
                rates,
                clusters: Some(c.clusters.clone()),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub node: usize,
    pub donor: usize,
    pub flow: f64,
}

/// Duals of the capacity and rate constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub capacity: Vec<f64>,
    pub rate: Vec<f64>,
    pub dual_objective: f64,
    pub gap: f64,
}

/// Solved dispatch flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchPlan {
    /// Positive flows, sorted by (donor, node).
    pub flows: Vec<Flow>,
    pub objective: f64,
    pub capacities: Vec<f64>,
    pub rates: Vec<f64>,
    pub clusters: Option<Vec<Vec<usize>>>,
    pub duals: DualCertificate,
    pub iterations: usize,
}

impl DispatchPlan {
    pub fn n_nodes(&self) -> usize {
        self.capacities.len()
    }

    /// Selection probabilities `f_{u,v} / r_v` per donor type, nodes ascending.
    /// Fails if some flow exceeds its rate beyond tolerance.
    pub fn routing_table(&self) -> Result<Vec<Vec<(usize, f64)>>> {
        let mut table = vec![Vec::new(); self.rates.len()];
        for f in &self.flows {
            let r = self.rates[f.donor];
            if f.flow > r + FEASIBILITY_TOL {
                return Err(Error::PlanInconsistency(format!(
                    "flow {} on ({}, {}) exceeds rate {r}",
                    f.flow, f.node, f.donor
                )));
            }
            if r > 0.0 {
                table[f.donor].push((f.node, (f.flow / r).min(1.0)));
            }
        }
        for row in table.iter_mut() {
            row.sort_by_key(|&(u, _)| u);
            let total: f64 = row.iter().map(|&(_, p)| p).sum();
            if total > 1.0 + FEASIBILITY_TOL {
                return Err(Error::PlanInconsistency(format!(
                    "selection probabilities sum to {total} > 1"
                )));
            }
        }
        Ok(table)
    }

    pub fn flow(&self, node: usize, donor: usize) -> f64 {
        self.flows
            .iter()
            .find(|f| f.node == node && f.donor == donor)
            .map_or(0.0, |f| f.flow)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn solve_lp(lp: &LpProblem) -> Result<DispatchPlan> {
    solve_lp_with(lp, &SimplexOptions::default())
}

pub fn solve_lp_with(lp: &LpProblem, opts: &SimplexOptions) -> Result<DispatchPlan> {
    let cost = lp.costs();
    let cols = lp.columns();
    let rhs = lp.rhs();
    let sol = simplex::solve(&cost, &cols, &rhs, opts)?;

    let n_nodes = lp.n_nodes();
    let mut flows: Vec<Flow> = lp
        .edges
        .iter()
        .zip(&sol.x)
        .filter(|(_, &x)| x > 0.0)
        .map(|(e, &x)| Flow {
            node: e.node,
            donor: e.donor,
            flow: x,
        })
        .collect();
    flows.sort_by_key(|f| (f.donor, f.node));

    let gap = (sol.dual_objective - sol.primal_objective).abs();
    if gap > GAP_TOL * sol.primal_objective.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "duality gap {gap} exceeds tolerance (primal {}, dual {})",
            sol.primal_objective, sol.dual_objective
        )));
    }
    Ok(DispatchPlan {
        flows,
        objective: sol.primal_objective,
        capacities: lp.capacities.clone(),
        rates: lp.rates.clone(),
        clusters: lp.clusters.clone(),
        duals: DualCertificate {
            capacity: sol.y[..n_nodes].to_vec(),
            rate: sol.y[n_nodes..].to_vec(),
            dual_objective: sol.dual_objective,
            gap,
        },
        iterations: sol.iterations,
    })
}

/// Convenience: build and solve.
pub fn plan(inst: &MatchingInstance, clustering: Option<&Clustering>) -> Result<DispatchPlan> {
    solve_lp(&build_lp(inst, clustering))
}

/// Constraint violations of `plan` against `lp`: (max capacity excess,
/// max rate excess, max negative flow).
pub fn feasibility_violations(lp: &LpProblem, plan: &DispatchPlan) -> (f64, f64, f64) {
    let mut cap = vec![0.0; lp.n_nodes()];
    let mut rate = vec![0.0; lp.n_donors()];
    let mut neg: f64 = 0.0;
    for f in &plan.flows {
        let e = lp
            .edges
            .iter()
            .find(|e| e.node == f.node && e.donor == f.donor)
            .expect("flow on an edge of the program");
        cap[f.node] += f.flow * e.prob;
        rate[f.donor] += f.flow;
        neg = neg.max(-f.flow);
    }
    let cap_ex = cap
        .iter()
        .zip(&lp.capacities)
        .map(|(a, b)| a - b)
        .fold(0.0, f64::max);
    let rate_ex = rate
        .iter()
        .zip(&lp.rates)
        .map(|(a, b)| a - b)
        .fold(0.0, f64::max);
    (cap_ex, rate_ex, neg)
}
