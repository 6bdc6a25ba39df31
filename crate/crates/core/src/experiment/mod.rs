//! End-to-end experiments: cluster, plan, simulate paired replications,
//! summarize, and persist everything as CSV/JSON files.
//!
//! Seeds are split from the master seed by tag: the arrival sequence and the
//! success draws of replication `r` depend only on `r`, and a policy's own
//! randomness depends only on its label and `r`. Every policy and every
//! capacity therefore faces identical arrivals, and adding a policy leaves
//! the others' numbers unchanged.

pub mod drift;
pub mod io;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::clustering::{cluster_patients, compute_cluster_errors, Clustering, ClusteringMethod};
use crate::error::{Error, Result};
use crate::instance::{load_instance, ArrivalEvent, MatchingInstance};
use crate::lp::{self, DispatchPlan};
use crate::metrics::{self, wilcoxon_signed_rank};
use crate::par::{self, Execution};
use crate::policies::{hindsight_optimum_with_truth, MatchRecord, PolicySpec, Simulator};
use crate::rng::{derive_seed, label_tag, SuccessOracle};
use crate::synth::{generate_instance, sample_arrivals, ArrivalMode, GeneratorConfig, GroundTruth};

pub use drift::{waitlist_instance, DriftMonitor, Replan};
pub use io::{BoundRow, FailureRow, RecordRow, RunRow, SummaryRow, TimingRow};

const TAG_ARRIVALS: u64 = 1;
const TAG_SUCCESS: u64 = 2;
const TAG_POLICY: u64 = 3;
const TAG_CLUSTER: u64 = 4;
const TAG_REPLAN: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    Path(PathBuf),
    Generator(GeneratorConfig),
}

fn default_methods() -> Vec<ClusteringMethod> {
    vec![ClusteringMethod::ConstrainedKmeans]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub instance: InstanceSource,
    pub b_grid: Vec<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<ClusteringMethod>,
    pub policies: Vec<PolicySpec>,
    pub n_replications: usize,
    /// Replan sampling policies when the waitlist's edge-weight PSI against
    /// the planned-for population reaches this value.
    #[serde(default)]
    pub replan_psi_threshold: Option<f64>,
    /// Arrivals between drift checks; defaults to a tenth of the sequence.
    #[serde(default)]
    pub replan_interval: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub arrival_mode: ArrivalMode,
    /// p-values compare each row with this policy in the same cell; by
    /// default with the same policy.
    #[serde(default)]
    pub baseline_policy: Option<PolicySpec>,
    /// ... at this capacity; by default the smallest one in `b_grid`.
    #[serde(default)]
    pub baseline_b: Option<usize>,
    #[serde(default)]
    pub execution: Execution,
    /// Keep per-arrival records in the returned artifact.
    #[serde(default)]
    pub keep_records: bool,
}

impl ScenarioConfig {
    pub fn new(instance: InstanceSource, b_grid: Vec<usize>, policies: Vec<PolicySpec>, n_replications: usize) -> Self {
        ScenarioConfig {
            instance,
            b_grid,
            methods: default_methods(),
            policies,
            n_replications,
            replan_psi_threshold: None,
            replan_interval: None,
            output_dir: None,
            master_seed: 0,
            arrival_mode: ArrivalMode::default(),
            baseline_policy: None,
            baseline_b: None,
            execution: Execution::default(),
            keep_records: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.n_replications == 0 {
            return bad("n_replications must be at least 1");
        }
        if self.b_grid.is_empty() || self.b_grid.contains(&0) {
            return bad("b_grid must be nonempty with entries >= 1");
        }
        if self.methods.is_empty() || self.policies.is_empty() {
            return bad("need at least one clustering method and one policy");
        }
        if let Some(t) = self.replan_psi_threshold {
            if !(t >= 0.0) {
                return bad("replan_psi_threshold must be nonnegative");
            }
        }
        if self.replan_interval == Some(0) {
            return bad("replan_interval must be positive");
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Stable hash of the configuration, hex encoded.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).unwrap_or_default();
        format!("{:016x}", label_tag(&text))
    }
}

/// One paired replication: the arrival sequence, the success draws and the
/// hindsight optimum they imply.
#[derive(Debug, Clone)]
pub struct Replication {
    pub index: usize,
    pub arrival_seed: u64,
    pub oracle: SuccessOracle,
    pub arrivals: Vec<ArrivalEvent>,
    pub opt_total: f64,
}

pub fn replication_seeds(master_seed: u64, index: usize) -> (u64, u64) {
    (
        derive_seed(master_seed, &[TAG_ARRIVALS, index as u64]),
        derive_seed(master_seed, &[TAG_SUCCESS, index as u64]),
    )
}

pub fn policy_seed(master_seed: u64, spec: PolicySpec, index: usize) -> u64 {
    derive_seed(master_seed, &[TAG_POLICY, label_tag(&spec.label()), index as u64])
}

pub fn prepare_replications(
    inst: &MatchingInstance,
    true_weights: &[Vec<f64>],
    n: usize,
    master_seed: u64,
    mode: ArrivalMode,
    exec: Execution,
) -> Vec<Replication> {
    par::map_indices(exec, n, |r| {
        let (arrival_seed, success_seed) = replication_seeds(master_seed, r);
        let arrivals = sample_arrivals(inst, mode, arrival_seed).events;
        let oracle = SuccessOracle::new(success_seed);
        let opt_total = hindsight_optimum_with_truth(inst, true_weights, &arrivals, oracle).total;
        Replication {
            index: r,
            arrival_seed,
            oracle,
            arrivals,
            opt_total,
        }
    })
}

/// Ratio of a run to its hindsight optimum; a sequence on which nothing can
/// be matched counts as 1.
pub fn run_ratio(alg: f64, opt: f64) -> f64 {
    if opt > 0.0 {
        alg / opt
    } else {
        1.0
    }
}

/// Plan context for drift replanning.
#[derive(Debug, Clone, Copy)]
pub struct ReplanSettings {
    pub threshold: f64,
    pub interval: Option<usize>,
    pub b: usize,
    pub method: ClusteringMethod,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<MatchRecord>,
    pub total: f64,
    pub replans: usize,
}

/// Runs one policy over one replication, replanning on drift if asked.
pub fn simulate_run(
    inst: &MatchingInstance,
    true_weights: &[Vec<f64>],
    plan: Option<&DispatchPlan>,
    spec: PolicySpec,
    rep: &Replication,
    seed: u64,
    replan: Option<ReplanSettings>,
) -> Result<RunOutcome> {
    let mut sim = Simulator::new(inst, true_weights, spec, plan, rep.oracle, seed)?;
    let n = rep.arrivals.len();
    let settings = replan.filter(|_| spec.needs_plan());
    let mut monitor = match settings {
        Some(s) => Some(DriftMonitor::new(inst, s.threshold)?),
        None => None,
    };
    let interval = settings
        .and_then(|s| s.interval)
        .unwrap_or_else(|| (n / 10).max(1));
    let mut records = Vec::with_capacity(n);
    let mut replans = 0;
    for (i, a) in rep.arrivals.iter().enumerate() {
        if let (Some(m), Some(s)) = (monitor.as_mut(), settings) {
            if i > 0 && i % interval == 0 {
                let free = sim.free_patients();
                if !free.is_empty() {
                    let remaining = (n - i) as u32;
                    let pop = waitlist_instance(inst, &free, remaining)?;
                    let seed = derive_seed(s.seed, &[TAG_REPLAN, i as u64]);
                    if let Some(r) = m.replan_on_drift(&pop, s.b, s.method, seed)? {
                        sim.replace_plan(&r.plan, &free)?;
                        replans += 1;
                    }
                }
            }
        }
        records.push(sim.step(a)?);
    }
    let total = records.iter().map(|r| r.weight).sum();
    Ok(RunOutcome {
        records,
        total,
        replans,
    })
}

/// Results for one (b, method) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub b: usize,
    pub method: ClusteringMethod,
    pub clustering: Clustering,
    pub plan: DispatchPlan,
    pub timing: TimingRow,
    pub bound: BoundRow,
}

fn seconds_ms(start: Instant) -> f64 {
    (start.elapsed().as_secs_f64() * 1000.0).round() / 1000.0
}

/// Clusters and plans one cell, timing both stages separately.
pub fn plan_cell(
    inst: &MatchingInstance,
    b: usize,
    method: ClusteringMethod,
    seed: u64,
) -> std::result::Result<CellResult, FailureRow> {
    let fail = |stage: &str, e: Error| FailureRow {
        method: method.as_str().into(),
        b,
        stage: stage.into(),
        error: e.to_string(),
    };
    let t0 = Instant::now();
    let clustering = cluster_patients(inst, b, method, seed).map_err(|e| fail("cluster", e))?;
    let cluster_seconds = seconds_ms(t0);
    let t1 = Instant::now();
    let plan = lp::plan(inst, Some(&clustering)).map_err(|e| fail("plan", e))?;
    let lp_seconds = seconds_ms(t1);

    let report = compute_cluster_errors(inst, &clustering).map_err(|e| fail("errors", e))?;
    let bound = BoundRow {
        method: method.as_str().into(),
        b,
        n_clusters: clustering.n_clusters(),
        delta_max: report.delta_max,
        nmae_mean: report.nmae_mean,
        nmae_max: report.nmae_max,
        alpha: bounds::alpha(b),
        clustered_bound: bounds::clustered_bound(b, report.delta_max).ok(),
        heuristic_ratio: bounds::heuristic_ratio(b, report.nmae_max).ok(),
    };
    let timing = TimingRow {
        method: method.as_str().into(),
        b,
        n_clusters: clustering.n_clusters(),
        cluster_seconds,
        lp_seconds,
        lp_iterations: plan.iterations,
        lp_objective: plan.objective,
    };
    Ok(CellResult {
        b,
        method,
        clustering,
        plan,
        timing,
        bound,
    })
}

/// Everything a scenario produced.
#[derive(Debug, Clone, Default)]
pub struct RunArtifact {
    pub scenario_hash: String,
    pub runs: Vec<RunRow>,
    pub summaries: Vec<SummaryRow>,
    pub timings: Vec<TimingRow>,
    pub bounds: Vec<BoundRow>,
    pub failures: Vec<FailureRow>,
    /// Per-run records keyed like `runs`, present with `keep_records`.
    pub records: Vec<Vec<MatchRecord>>,
    pub output_dir: Option<PathBuf>,
}

pub fn run_file_name(method: &str, b: usize, policy: &str, rep: usize) -> String {
    format!("runs/{method}_b{b}_{policy}_rep{rep:04}.csv")
}

/// Loads or generates the scenario instance.
pub fn resolve_instance(source: &InstanceSource) -> Result<(MatchingInstance, Option<GroundTruth>)> {
    match source {
        InstanceSource::Path(p) => Ok((load_instance(p)?, None)),
        InstanceSource::Generator(g) => {
            let (inst, truth) = generate_instance(g)?;
            Ok((inst, Some(truth)))
        }
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunArtifact> {
    cfg.validate()?;
    let (inst, truth) = resolve_instance(&cfg.instance)?;
    run_scenario_on(cfg, &inst, truth.as_ref())
}

/// Runs the scenario on an already loaded instance.
pub fn run_scenario_on(
    cfg: &ScenarioConfig,
    inst: &MatchingInstance,
    truth: Option<&GroundTruth>,
) -> Result<RunArtifact> {
    cfg.validate()?;
    let true_weights: &[Vec<f64>] = truth
        .and_then(|t| t.true_weights.as_deref())
        .unwrap_or(&inst.weights);
    let out = cfg.output_dir.clone();
    if let Some(dir) = &out {
        io::write_json(&dir.join("scenario.json"), cfg)?;
        if matches!(cfg.instance, InstanceSource::Generator(_)) {
            inst.save(dir.join("instance.json"))?;
            if let Some(t) = truth {
                io::write_json(&dir.join("truth.json"), t)?;
            }
        }
    }

    let reps = prepare_replications(
        inst,
        true_weights,
        cfg.n_replications,
        cfg.master_seed,
        cfg.arrival_mode,
        cfg.execution,
    );

    let mut art = RunArtifact {
        scenario_hash: cfg.hash(),
        output_dir: out.clone(),
        ..Default::default()
    };
    for &method in &cfg.methods {
        for &b in &cfg.b_grid {
            let seed = derive_seed(cfg.master_seed, &[TAG_CLUSTER, label_tag(method.as_str()), b as u64]);
            let cell = match plan_cell(inst, b, method, seed) {
                Ok(c) => c,
                Err(f) => {
                    log::warn!("cell b={b} method={} failed at {}: {}", method.as_str(), f.stage, f.error);
                    art.failures.push(f);
                    continue;
                }
            };
            art.timings.push(cell.timing.clone());
            art.bounds.push(cell.bound.clone());

            let replan = cfg.replan_psi_threshold.map(|threshold| ReplanSettings {
                threshold,
                interval: cfg.replan_interval,
                b,
                method,
                seed,
            });
            let results = par::map_slice(cfg.execution, &reps, |rep| {
                cfg.policies
                    .iter()
                    .map(|&spec| {
                        let pseed = policy_seed(cfg.master_seed, spec, rep.index);
                        let outcome = simulate_run(inst, true_weights, Some(&cell.plan), spec, rep, pseed, replan)?;
                        let label = spec.label();
                        let file = match &out {
                            Some(dir) => {
                                let name = run_file_name(method.as_str(), b, &label, rep.index);
                                let rows: Vec<RecordRow> =
                                    outcome.records.iter().map(|r| RecordRow::new(r, &label)).collect();
                                io::write_csv(&dir.join(&name), &rows)?;
                                name
                            }
                            None => String::new(),
                        };
                        let row = RunRow {
                            file,
                            policy: label,
                            b,
                            method: method.as_str().into(),
                            replication: rep.index,
                            arrival_seed: rep.arrival_seed,
                            policy_seed: pseed,
                            n_arrivals: rep.arrivals.len(),
                            n_matched: outcome.records.iter().filter(|r| r.success).count(),
                            alg_total: outcome.total,
                            opt_total: rep.opt_total,
                            ratio: run_ratio(outcome.total, rep.opt_total),
                            replans: outcome.replans,
                        };
                        Ok((row, outcome.records))
                    })
                    .collect::<Result<Vec<_>>>()
            });
            let mut cell_rows = Vec::new();
            let mut cell_records = Vec::new();
            let mut failed = None;
            for r in results {
                match r {
                    Ok(v) => {
                        for (row, recs) in v {
                            cell_rows.push(row);
                            cell_records.push(recs);
                        }
                    }
                    Err(e) => {
                        failed = Some(e);
                        break;
                    }
                }
            }
            if let Some(e) = failed {
                art.failures.push(FailureRow {
                    method: method.as_str().into(),
                    b,
                    stage: "simulate".into(),
                    error: e.to_string(),
                });
                continue;
            }
            art.runs.extend(cell_rows);
            if cfg.keep_records {
                art.records.extend(cell_records);
            }
        }
    }

    art.summaries = summarize(&art.runs, cfg.baseline_policy.map(|p| p.label()).as_deref(), cfg.baseline_b)?;
    if let Some(dir) = &out {
        io::write_csv(&dir.join("runs_index.csv"), &art.runs)?;
        io::write_csv(&dir.join("summary.csv"), &art.summaries)?;
        io::write_csv(&dir.join("timings.csv"), &art.timings)?;
        io::write_csv(&dir.join("bounds.csv"), &art.bounds)?;
        io::write_csv(&dir.join("failures.csv"), &art.failures)?;
    }
    Ok(art)
}

/// Summary rows per (policy, b, method), with paired p-values against the
/// baseline. Rows are reduced in replication order, so the result does not
/// depend on the order of `runs`.
pub fn summarize(
    runs: &[RunRow],
    baseline_policy: Option<&str>,
    baseline_b: Option<usize>,
) -> Result<Vec<SummaryRow>> {
    type Key = (String, usize, String);
    let mut cells: BTreeMap<Key, Vec<&RunRow>> = BTreeMap::new();
    for r in runs {
        cells
            .entry((r.method.clone(), r.b, r.policy.clone()))
            .or_default()
            .push(r);
    }
    for v in cells.values_mut() {
        v.sort_by_key(|r| r.replication);
    }
    let b_min = runs.iter().map(|r| r.b).min().unwrap_or(1);

    let mut out = Vec::new();
    for ((method, b, policy), rows) in &cells {
        let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
        let alg: Vec<f64> = rows.iter().map(|r| r.alg_total).collect();
        let opt: Vec<f64> = rows.iter().map(|r| r.opt_total).collect();
        let n = ratios.len();
        let mean_alg = metrics::mean(&alg);
        let mean_opt = metrics::mean(&opt);
        let std_ratio = metrics::std_dev(&ratios);

        let base_policy = baseline_policy.unwrap_or(policy).to_string();
        let base_b = baseline_b.unwrap_or(b_min);
        let baseline = format!("{base_policy}@{base_b}");
        let p_value = cells
            .get(&(method.clone(), base_b, base_policy))
            .and_then(|base| {
                let by_rep: BTreeMap<usize, f64> =
                    base.iter().map(|r| (r.replication, r.ratio)).collect();
                let (mine, theirs): (Vec<f64>, Vec<f64>) = rows
                    .iter()
                    .filter_map(|r| by_rep.get(&r.replication).map(|&x| (r.ratio, x)))
                    .unzip();
                wilcoxon_signed_rank(&mine, &theirs).ok().map(|w| w.p_value)
            });
        out.push(SummaryRow {
            policy: policy.clone(),
            b: *b,
            method: method.clone(),
            n,
            mean_ratio: metrics::mean(&ratios),
            std_ratio,
            se_ratio: std_ratio / (n as f64).sqrt(),
            ratio_of_means: run_ratio(mean_alg, mean_opt),
            mean_alg,
            mean_opt,
            baseline,
            p_value,
        });
    }
    Ok(out)
}

/// Runs every policy on prepared replications without clustering, for a
/// plan supplied by the caller.
pub fn simulate(
    inst: &MatchingInstance,
    true_weights: &[Vec<f64>],
    plan: Option<&DispatchPlan>,
    policies: &[PolicySpec],
    reps: &[Replication],
    master_seed: u64,
    exec: Execution,
) -> Result<Vec<(RunRow, Vec<MatchRecord>)>> {
    let b = plan
        .and_then(|p| p.clusters.as_ref())
        .map_or(1, |c| c.iter().map(Vec::len).min().unwrap_or(1));
    let per_rep = par::map_slice(exec, reps, |rep| {
        policies
            .iter()
            .map(|&spec| {
                let pseed = policy_seed(master_seed, spec, rep.index);
                let o = simulate_run(inst, true_weights, plan, spec, rep, pseed, None)?;
                Ok((
                    RunRow {
                        file: String::new(),
                        policy: spec.label(),
                        b,
                        method: "given".into(),
                        replication: rep.index,
                        arrival_seed: rep.arrival_seed,
                        policy_seed: pseed,
                        n_arrivals: rep.arrivals.len(),
                        n_matched: o.records.iter().filter(|r| r.success).count(),
                        alg_total: o.total,
                        opt_total: rep.opt_total,
                        ratio: run_ratio(o.total, rep.opt_total),
                        replans: 0,
                    },
                    o.records,
                ))
            })
            .collect::<Result<Vec<_>>>()
    });
    let mut out = Vec::new();
    for r in per_rep {
        out.extend(r?);
    }
    Ok(out)
}
