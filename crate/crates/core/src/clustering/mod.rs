//! Capacitated clustering of patients over their utility rows.
//!
//! Three heuristics produce an initial partition with `floor(|U| / b)`
//! clusters (constrained k-means, Ward agglomerative) or a divisive split
//! (recursive bisection); the two-phase repair in [`repair`] then enforces the
//! minimum size `b`. Distances are Euclidean over each patient's row of the
//! weight matrix.

mod bisection;
pub(crate) mod kmeans;
pub mod repair;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::MatchingInstance;
use crate::par::Execution;
use crate::rng::rng_from_seed;

pub use repair::repair_clusters;

const KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusteringMethod {
    ConstrainedKmeans,
    ConstrainedAgglomerative,
    RecursiveBisection,
}

impl ClusteringMethod {
    pub const ALL: [ClusteringMethod; 3] = [
        ClusteringMethod::ConstrainedKmeans,
        ClusteringMethod::ConstrainedAgglomerative,
        ClusteringMethod::RecursiveBisection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClusteringMethod::ConstrainedKmeans => "constrained-kmeans",
            ClusteringMethod::ConstrainedAgglomerative => "constrained-agglomerative",
            ClusteringMethod::RecursiveBisection => "recursive-bisection",
        }
    }
}

impl fmt::Display for ClusteringMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClusteringMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constrained-kmeans" | "kmeans" => Ok(ClusteringMethod::ConstrainedKmeans),
            "constrained-agglomerative" | "agglomerative" | "ward" => {
                Ok(ClusteringMethod::ConstrainedAgglomerative)
            }
            "recursive-bisection" | "bisection" => Ok(ClusteringMethod::RecursiveBisection),
            other => Err(Error::Parse(format!("unknown clustering method {other:?}"))),
        }
    }
}

/// A partition of the patients into clusters of size at least `min_size`.
///
/// Clusters are kept in canonical order: members ascending, clusters ordered
/// by their smallest member. The singleton clustering therefore lists
/// clusters in patient order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Cluster index per patient.
    pub assignments: Vec<usize>,
    pub clusters: Vec<Vec<usize>>,
    pub min_size: usize,
    /// Mean member weight per (cluster, donor type).
    pub representative_weights: Vec<Vec<f64>>,
    /// Mean success probability over compatible members per (cluster, donor type).
    pub representative_probs: Vec<Vec<f64>>,
    /// A cluster is adjacent to a donor type if any member is compatible.
    pub compatibility: Vec<Vec<bool>>,
    /// Largest finite per-cluster relative error; `None` if no cluster has one.
    pub delta_max: Option<f64>,
    pub method: Option<ClusteringMethod>,
}

impl Clustering {
    /// Builds a clustering from an explicit partition, checking that it
    /// covers every patient exactly once and respects `min_size`.
    pub fn from_partition(
        inst: &MatchingInstance,
        clusters: Vec<Vec<usize>>,
        min_size: usize,
        method: Option<ClusteringMethod>,
    ) -> Result<Self> {
        let n = inst.n_patients();
        let mut clusters: Vec<Vec<usize>> = clusters
            .into_iter()
            .map(|mut c| {
                c.sort_unstable();
                c
            })
            .collect();
        clusters.sort_by_key(|c| c.first().copied().unwrap_or(usize::MAX));

        let mut assignments = vec![usize::MAX; n];
        for (ci, c) in clusters.iter().enumerate() {
            if c.len() < min_size {
                return Err(Error::InvalidClustering(format!(
                    "cluster {ci} has {} members, below the minimum {min_size}",
                    c.len()
                )));
            }
            for &u in c {
                if u >= n {
                    return Err(Error::InvalidClustering(format!("patient index {u} out of range")));
                }
                if assignments[u] != usize::MAX {
                    return Err(Error::InvalidClustering(format!("patient {u} appears twice")));
                }
                assignments[u] = ci;
            }
        }
        if let Some(u) = assignments.iter().position(|&a| a == usize::MAX) {
            return Err(Error::InvalidClustering(format!("patient {u} is not assigned")));
        }

        let representative_weights = representative_weights(inst, &clusters)?;
        let (representative_probs, compatibility) = representative_edges(inst, &clusters);
        let mut out = Clustering {
            assignments,
            clusters,
            min_size,
            representative_weights,
            representative_probs,
            compatibility,
            delta_max: None,
            method,
        };
        out.delta_max = relative_errors(inst, &out)
            .into_iter()
            .filter(|d| d.is_finite())
            .reduce(f64::max);
        Ok(out)
    }

    /// Every patient in its own cluster.
    pub fn singletons(inst: &MatchingInstance) -> Result<Self> {
        Self::from_partition(inst, (0..inst.n_patients()).map(|u| vec![u]).collect(), 1, None)
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
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

    /// Checks that this clustering was built for `inst`.
    pub fn check_against(&self, inst: &MatchingInstance) -> Result<()> {
        if self.assignments.len() != inst.n_patients() {
            return Err(Error::InvalidClustering(format!(
                "clustering covers {} patients, instance has {}",
                self.assignments.len(),
                inst.n_patients()
            )));
        }
        if self
            .representative_weights
            .iter()
            .any(|r| r.len() != inst.n_donor_types())
        {
            return Err(Error::InvalidClustering(
                "representative weights do not match donor types".into(),
            ));
        }
        Ok(())
    }
}

/// Mean member weight per (cluster, donor type).
pub fn representative_weights(
    inst: &MatchingInstance,
    clusters: &[Vec<usize>],
) -> Result<Vec<Vec<f64>>> {
    let n_v = inst.n_donor_types();
    clusters
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            if c.is_empty() {
                return Err(Error::InvalidClustering(format!("cluster {ci} is empty")));
            }
            let mut row = vec![0.0; n_v];
            for &u in c {
                for (acc, w) in row.iter_mut().zip(&inst.weights[u]) {
                    *acc += w;
                }
            }
            let n = c.len() as f64;
            row.iter_mut().for_each(|x| *x /= n);
            Ok(row)
        })
        .collect()
}

fn representative_edges(
    inst: &MatchingInstance,
    clusters: &[Vec<usize>],
) -> (Vec<Vec<f64>>, Vec<Vec<bool>>) {
    let n_v = inst.n_donor_types();
    let mut probs = Vec::with_capacity(clusters.len());
    let mut compat = Vec::with_capacity(clusters.len());
    for c in clusters {
        let mut p_row = vec![0.0; n_v];
        let mut c_row = vec![false; n_v];
        for v in 0..n_v {
            let mut sum = 0.0;
            let mut k = 0usize;
            for &u in c {
                if inst.is_edge(u, v) {
                    sum += inst.prob(u, v);
                    k += 1;
                }
            }
            if k > 0 {
                p_row[v] = sum / k as f64;
                c_row[v] = true;
            }
        }
        probs.push(p_row);
        compat.push(c_row);
    }
    (probs, compat)
}

/// Per-cluster relative error: the smallest `d` with
/// `(1 - d) * rep <= w <= (1 + d) * rep` over all member entries.
/// `f64::INFINITY` when some representative is 0 but a member weight is not.
pub fn relative_errors(inst: &MatchingInstance, clustering: &Clustering) -> Vec<f64> {
    clustering
        .clusters
        .iter()
        .zip(&clustering.representative_weights)
        .map(|(c, rep)| {
            let mut delta: f64 = 0.0;
            for &u in c {
                for (v, &r) in rep.iter().enumerate() {
                    let w = inst.weights[u][v];
                    if r > 0.0 {
                        delta = delta.max((w - r).abs() / r);
                    } else if w != 0.0 {
                        return f64::INFINITY;
                    }
                }
            }
            delta
        })
        .collect()
}

/// Utility rows used as clustering coordinates.
fn utility_points(inst: &MatchingInstance) -> &[Vec<f64>] {
    &inst.weights
}

/// Partitions the patients into clusters of size at least `b`.
pub fn cluster_patients(
    inst: &MatchingInstance,
    b: usize,
    method: ClusteringMethod,
    seed: u64,
) -> Result<Clustering> {
    let n = inst.n_patients();
    if b == 0 || b > n {
        return Err(Error::InvalidCapacity(format!(
            "capacity b = {b} must lie in 1..={n}"
        )));
    }
    if b == 1 {
        // floor(|U| / 1) clusters with floor 1: the identity partition
        return Clustering::from_partition(inst, (0..n).map(|u| vec![u]).collect(), 1, Some(method));
    }
    let points = utility_points(inst);
    let mut rng = rng_from_seed(seed);
    let k = n / b;
    let all: Vec<usize> = (0..n).collect();

    let raw: Vec<Vec<usize>> = match method {
        ClusteringMethod::ConstrainedKmeans => {
            let res = kmeans::kmeans(points, &all, k, KMEANS_MAX_ITER, &mut rng, Execution::Parallel);
            group_labels(&res.labels, k)
        }
        ClusteringMethod::ConstrainedAgglomerative => ward_cut(points, k),
        ClusteringMethod::RecursiveBisection => {
            bisection::recursive_bisection(points, all, b, &mut rng)
        }
    };
    let repaired = repair::repair_with(points, raw, b, &mut rng)?;
    Clustering::from_partition(inst, repaired, b, Some(method))
}

fn group_labels(labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        out[l].push(i);
    }
    out
}

/// Ward linkage cut at `k` clusters.
fn ward_cut(points: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    if n == 1 {
        return vec![vec![0]];
    }
    let mut condensed = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n - 1 {
        for j in i + 1..n {
            condensed.push(kmeans::sq_dist(&points[i], &points[j]).sqrt());
        }
    }
    let dendrogram = kodama::linkage(&mut condensed, n, kodama::Method::Ward);

    // union-find over observation ids; dendrogram cluster labels >= n name
    // the cluster formed at step label - n
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (step_idx, step) in dendrogram.steps().iter().take(n - k).enumerate() {
        let new_label = n + step_idx;
        let a = find(&mut parent, step.cluster1);
        let b = find(&mut parent, step.cluster2);
        parent[a] = new_label;
        parent[b] = new_label;
    }
    let mut roots: Vec<usize> = Vec::new();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match roots.iter().position(|&x| x == r) {
            Some(p) => out[p].push(i),
            None => {
                roots.push(r);
                out.push(vec![i]);
            }
        }
    }
    out
}

/// Intra-cluster error statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterErrorReport {
    /// NMAE of each patient, in patient order.
    pub nmae_per_patient: Vec<f64>,
    /// Mean member NMAE of each cluster.
    pub nmae_per_cluster: Vec<f64>,
    pub nmae_mean: f64,
    pub nmae_max: f64,
    /// Relative error bound per cluster; infinite where the representative
    /// weight is zero but some member weight is not.
    pub delta_per_cluster: Vec<f64>,
    /// Maximum over clusters with a finite bound.
    pub delta_max: f64,
    /// Clusters with an unbounded relative error.
    pub unbounded_clusters: Vec<usize>,
}

pub fn compute_cluster_errors(
    inst: &MatchingInstance,
    clustering: &Clustering,
) -> Result<ClusterErrorReport> {
    clustering.check_against(inst)?;
    let w_max = inst.max_weight();
    if w_max <= 0.0 {
        return Err(Error::Undefined("NMAE undefined: maximum weight is 0".into()));
    }
    let n_v = inst.n_donor_types().max(1) as f64;
    let nmae_per_patient: Vec<f64> = (0..inst.n_patients())
        .map(|u| {
            let rep = &clustering.representative_weights[clustering.assignments[u]];
            let mae = inst.weights[u]
                .iter()
                .zip(rep)
                .map(|(w, r)| (w - r).abs())
                .sum::<f64>()
                / n_v;
            mae / w_max
        })
        .collect();
    let nmae_per_cluster = clustering
        .clusters
        .iter()
        .map(|c| c.iter().map(|&u| nmae_per_patient[u]).sum::<f64>() / c.len() as f64)
        .collect();
    let nmae_mean = nmae_per_patient.iter().sum::<f64>() / nmae_per_patient.len().max(1) as f64;
    let nmae_max = nmae_per_patient.iter().copied().fold(0.0, f64::max);
    let delta_per_cluster = relative_errors(inst, clustering);
    let unbounded_clusters: Vec<usize> = delta_per_cluster
        .iter()
        .enumerate()
        .filter(|(_, d)| !d.is_finite())
        .map(|(i, _)| i)
        .collect();
    if !unbounded_clusters.is_empty() {
        log::info!(
            "{} clusters have unbounded relative error (zero representative weight)",
            unbounded_clusters.len()
        );
    }
    let delta_max = delta_per_cluster
        .iter()
        .copied()
        .filter(|d| d.is_finite())
        .fold(0.0, f64::max);
    Ok(ClusterErrorReport {
        nmae_per_patient,
        nmae_per_cluster,
        nmae_mean,
        nmae_max,
        delta_per_cluster,
        delta_max,
        unbounded_clusters,
    })
}

impl ClusterErrorReport {
    /// One row per cluster: cluster, size, nmae, delta.
    pub fn write_csv<W: std::io::Write>(&self, clustering: &Clustering, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["cluster", "size", "nmae", "delta"])?;
        for (ci, c) in clustering.clusters.iter().enumerate() {
            wtr.write_record([
                ci.to_string(),
                c.len().to_string(),
                self.nmae_per_cluster[ci].to_string(),
                self.delta_per_cluster[ci].to_string(),
            ])?;
        }
        wtr.write_record([
            "summary".to_string(),
            clustering.assignments.len().to_string(),
            format!("mean={};max={}", self.nmae_mean, self.nmae_max),
            format!("max={}", self.delta_max),
        ])?;
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}
