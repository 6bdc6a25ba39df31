//! Online matching policies.
//!
//! Every policy sees arrivals one at a time and makes an irrevocable offer to
//! at most one free patient. Whether an offer succeeds is decided by the
//! shared [`SuccessOracle`]; a failed offer leaves the patient free.

pub mod hindsight;
pub mod status_quo;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{ArrivalEvent, MatchingInstance};
use crate::lp::DispatchPlan;
use crate::rng::{rng_from_seed, SimRng, SuccessOracle};

pub use hindsight::{
    hindsight_optimum, hindsight_optimum_with_truth, max_weight_matching, HindsightResult,
};

/// How a cluster-level decision becomes a patient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntraRule {
    /// Lowest-id free compatible member.
    LowestId,
    /// Uniformly random free compatible member.
    Uniform,
    /// Free compatible member with the largest `w * p`.
    Greedy,
}

/// What happens when the sampled cluster has no free compatible member, or
/// the draw selects no cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dispatch {
    Discard,
    Resample,
}

/// A policy and its variant, written as a label such as `csm-uniform-discard`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PolicySpec {
    /// Stochastic matching on the (possibly clustered) plan, treating each
    /// cluster as one node of capacity equal to its size.
    SmB,
    /// Cluster-level sampling followed by an intra-cluster choice.
    Csm { intra: IntraRule, dispatch: Dispatch },
    Greedy,
    Random,
    StatusQuo,
}

impl PolicySpec {
    pub fn label(&self) -> String {
        match self {
            PolicySpec::SmB => "sm-b".into(),
            PolicySpec::Csm { intra, dispatch } => {
                let i = match intra {
                    IntraRule::LowestId => "lowest",
                    IntraRule::Uniform => "uniform",
                    IntraRule::Greedy => "greedy",
                };
                let d = match dispatch {
                    Dispatch::Discard => "discard",
                    Dispatch::Resample => "resample",
                };
                format!("csm-{i}-{d}")
            }
            PolicySpec::Greedy => "greedy".into(),
            PolicySpec::Random => "random".into(),
            PolicySpec::StatusQuo => "status-quo".into(),
        }
    }

    pub fn needs_plan(&self) -> bool {
        matches!(self, PolicySpec::SmB | PolicySpec::Csm { .. })
    }

    /// Default CSM variant: uniform member, discard on failure.
    pub fn csm() -> Self {
        PolicySpec::Csm {
            intra: IntraRule::Uniform,
            dispatch: Dispatch::Discard,
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl From<PolicySpec> for String {
    fn from(p: PolicySpec) -> String {
        p.label()
    }
}

impl TryFrom<String> for PolicySpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "sm-b" | "smb" | "sm_b" => return Ok(PolicySpec::SmB),
            "csm" => return Ok(PolicySpec::csm()),
            "greedy" => return Ok(PolicySpec::Greedy),
            "random" => return Ok(PolicySpec::Random),
            "status-quo" | "status_quo" | "statusquo" => return Ok(PolicySpec::StatusQuo),
            _ => {}
        }
        let parts: Vec<&str> = s.split('-').collect();
        if parts.len() == 3 && parts[0] == "csm" {
            let intra = match parts[1] {
                "lowest" => IntraRule::LowestId,
                "uniform" => IntraRule::Uniform,
                "greedy" => IntraRule::Greedy,
                other => {
                    return Err(Error::InvalidParameter(format!("unknown intra rule {other:?}")))
                }
            };
            let dispatch = match parts[2] {
                "discard" => Dispatch::Discard,
                "resample" => Dispatch::Resample,
                other => {
                    return Err(Error::InvalidParameter(format!("unknown dispatch {other:?}")))
                }
            };
            return Ok(PolicySpec::Csm { intra, dispatch });
        }
        Err(Error::InvalidParameter(format!("unknown policy {s:?}")))
    }
}

/// One arrival's outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub round: u32,
    pub donor_type: usize,
    /// Patient offered the organ, if any.
    pub patient: Option<usize>,
    /// Realized true weight; zero unless the offer succeeded.
    pub weight: f64,
    pub success: bool,
    /// The sampled node had no free compatible member and nothing was offered.
    pub discarded: bool,
    /// The offer went to a cluster reached by resampling.
    pub resampled: bool,
}

impl MatchRecord {
    fn none(a: &ArrivalEvent) -> Self {
        MatchRecord {
            round: a.round,
            donor_type: a.donor_type,
            patient: None,
            weight: 0.0,
            success: false,
            discarded: false,
            resampled: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRun {
    pub label: String,
    pub records: Vec<MatchRecord>,
    pub total: f64,
}

impl PolicyRun {
    pub fn matched(&self) -> impl Iterator<Item = &MatchRecord> {
        self.records.iter().filter(|r| r.success)
    }
}

/// Mutable matching state shared by all policies.
struct State<'a> {
    inst: &'a MatchingInstance,
    realized: &'a [Vec<f64>],
    oracle: SuccessOracle,
    free: Vec<bool>,
}

impl State<'_> {
    fn available(&self, u: usize, v: usize) -> bool {
        self.free[u] && self.inst.is_edge(u, v)
    }

    fn offer(&mut self, a: &ArrivalEvent, u: usize) -> MatchRecord {
        let v = a.donor_type;
        let success = self.oracle.succeeds(a.round, u, self.inst.prob(u, v));
        if success {
            self.free[u] = false;
        }
        MatchRecord {
            patient: Some(u),
            weight: if success { self.realized[u][v] } else { 0.0 },
            success,
            ..MatchRecord::none(a)
        }
    }
}

/// Resolved plan: offline nodes as patient lists plus per-donor routing.
struct Routing {
    nodes: Vec<Vec<usize>>,
    table: Vec<Vec<(usize, f64)>>,
}

impl Routing {
    /// `patient_ids[i]` is the instance patient behind patient `i` of the
    /// population the plan was solved for.
    fn new(
        inst: &MatchingInstance,
        plan: &DispatchPlan,
        patient_ids: &[usize],
    ) -> Result<Self> {
        let nodes: Vec<Vec<usize>> = match &plan.clusters {
            Some(c) => c.clone(),
            None => (0..patient_ids.len()).map(|u| vec![u]).collect(),
        };
        if nodes.len() != plan.n_nodes() {
            return Err(Error::PlanInconsistency(format!(
                "plan has {} nodes but {} clusters",
                plan.n_nodes(),
                nodes.len()
            )));
        }
        let mut seen = vec![false; patient_ids.len()];
        for &u in nodes.iter().flatten() {
            if u >= seen.len() || std::mem::replace(&mut seen[u], true) {
                return Err(Error::PlanInconsistency(format!(
                    "patient {u} out of range or repeated"
                )));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::PlanInconsistency("plan does not cover every patient".into()));
        }
        if patient_ids.iter().any(|&u| u >= inst.n_patients()) {
            return Err(Error::PlanInconsistency("patient id out of range".into()));
        }
        if plan.rates.len() != inst.n_donor_types() {
            return Err(Error::PlanInconsistency(format!(
                "plan has {} donor types, instance has {}",
                plan.rates.len(),
                inst.n_donor_types()
            )));
        }
        let nodes = nodes
            .into_iter()
            .map(|c| {
                let mut c: Vec<usize> = c.into_iter().map(|u| patient_ids[u]).collect();
                c.sort_unstable();
                c
            })
            .collect();
        Ok(Routing {
            nodes,
            table: plan.routing_table()?,
        })
    }

    /// Walks the cumulative routing row; `None` when `x` lands in leftover mass.
    fn pick(&self, v: usize, x: f64) -> Option<usize> {
        let mut acc = 0.0;
        for &(node, p) in &self.table[v] {
            acc += p;
            if x < acc {
                return Some(node);
            }
        }
        None
    }
}

fn candidates(state: &State<'_>, members: &[usize], v: usize) -> Vec<usize> {
    members
        .iter()
        .copied()
        .filter(|&u| state.available(u, v))
        .collect()
}

fn choose_member(
    state: &State<'_>,
    cands: &[usize],
    v: usize,
    rule: IntraRule,
    rng: &mut SimRng,
) -> usize {
    match rule {
        IntraRule::LowestId => cands[0],
        IntraRule::Uniform => {
            if cands.len() == 1 {
                cands[0]
            } else {
                cands[rng.random_range(0..cands.len())]
            }
        }
        IntraRule::Greedy => best_by_score(cands, |u| state.inst.weight(u, v) * state.inst.prob(u, v)),
    }
}

/// Highest score, ties to the earliest entry (candidates are id-ascending).
fn best_by_score(cands: &[usize], score: impl Fn(usize) -> f64) -> usize {
    let mut best = cands[0];
    let mut best_s = score(best);
    for &u in &cands[1..] {
        let s = score(u);
        if s > best_s {
            best = u;
            best_s = s;
        }
    }
    best
}

/// Redraws among nodes that still have a free compatible member, with
/// probabilities proportional to the plan's `f / r`, falling back to uniform
/// when none of them carries plan mass.
fn resample(
    state: &State<'_>,
    routing: &Routing,
    v: usize,
    rng: &mut SimRng,
) -> Option<usize> {
    let live: Vec<usize> = (0..routing.nodes.len())
        .filter(|&n| routing.nodes[n].iter().any(|&u| state.available(u, v)))
        .collect();
    if live.is_empty() {
        return None;
    }
    let mass: Vec<f64> = {
        let row = &routing.table[v];
        live.iter()
            .map(|n| row.iter().find(|(m, _)| m == n).map_or(0.0, |&(_, p)| p))
            .collect()
    };
    let total: f64 = mass.iter().sum();
    if total <= 0.0 {
        return Some(live[rng.random_range(0..live.len())]);
    }
    let x = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &m) in mass.iter().enumerate() {
        acc += m;
        if x < acc {
            return Some(live[i]);
        }
    }
    // rounding at the top end
    live.iter().zip(&mass).rev().find(|(_, &m)| m > 0.0).map(|(&n, _)| n)
}

fn sampling_step(
    state: &mut State<'_>,
    routing: &Routing,
    a: &ArrivalEvent,
    intra: IntraRule,
    dispatch: Dispatch,
    rng: &mut SimRng,
) -> MatchRecord {
    let v = a.donor_type;
    // exactly one routing uniform per arrival keeps streams aligned
    let x: f64 = rng.random();
    let first = routing.pick(v, x);
    let first_cands = first.map(|n| candidates(state, &routing.nodes[n], v));
    let (cands, resampled) = match (first_cands, dispatch) {
        (Some(c), _) if !c.is_empty() => (c, false),
        (_, Dispatch::Discard) => {
            return MatchRecord {
                discarded: first.is_some(),
                ..MatchRecord::none(a)
            };
        }
        (_, Dispatch::Resample) => match resample(state, routing, v, rng) {
            Some(n) => (candidates(state, &routing.nodes[n], v), true),
            None => return MatchRecord::none(a),
        },
    };
    let u = choose_member(state, &cands, v, intra, rng);
    let rec = state.offer(a, u);
    MatchRecord { resampled, ..rec }
}

fn simple_step(
    state: &mut State<'_>,
    a: &ArrivalEvent,
    spec: PolicySpec,
    rng: &mut SimRng,
) -> MatchRecord {
    let v = a.donor_type;
    let cands: Vec<usize> = (0..state.inst.n_patients())
        .filter(|&u| state.available(u, v))
        .collect();
    if cands.is_empty() {
        return MatchRecord::none(a);
    }
    let u = match spec {
        PolicySpec::Greedy => {
            best_by_score(&cands, |u| state.inst.weight(u, v) * state.inst.prob(u, v))
        }
        PolicySpec::Random => cands[rng.random_range(0..cands.len())],
        PolicySpec::StatusQuo => {
            let donor = &state.inst.donor_types[v];
            let tiers: Vec<u8> = cands
                .iter()
                .map(|&u| status_quo::pair_tier(&state.inst.patients[u], donor).unwrap_or(u8::MAX))
                .collect();
            let best = *tiers.iter().min().expect("nonempty");
            let top: Vec<usize> = cands
                .iter()
                .zip(&tiers)
                .filter(|(_, &t)| t == best)
                .map(|(&u, _)| u)
                .collect();
            if top.len() == 1 {
                top[0]
            } else {
                top[rng.random_range(0..top.len())]
            }
        }
        PolicySpec::SmB | PolicySpec::Csm { .. } => unreachable!("sampling policies"),
    };
    state.offer(a, u)
}

/// A policy in the middle of a run: processes arrivals one at a time and can
/// swap in a new plan between arrivals.
pub struct Simulator<'a> {
    state: State<'a>,
    spec: PolicySpec,
    routing: Option<Routing>,
    rng: SimRng,
}

impl<'a> Simulator<'a> {
    /// Sampling policies require `plan`, solved over all patients of `inst`.
    pub fn new(
        inst: &'a MatchingInstance,
        true_weights: &'a [Vec<f64>],
        spec: PolicySpec,
        plan: Option<&DispatchPlan>,
        oracle: SuccessOracle,
        seed: u64,
    ) -> Result<Self> {
        if true_weights.len() != inst.n_patients()
            || true_weights.iter().any(|r| r.len() != inst.n_donor_types())
        {
            return Err(Error::InvalidParameter("true weight matrix has the wrong shape".into()));
        }
        let routing = if spec.needs_plan() {
            let plan = plan.ok_or_else(|| {
                Error::InvalidParameter(format!("policy {spec} needs a dispatch plan"))
            })?;
            let ids: Vec<usize> = (0..inst.n_patients()).collect();
            Some(Routing::new(inst, plan, &ids)?)
        } else {
            None
        };
        Ok(Simulator {
            state: State {
                inst,
                realized: true_weights,
                oracle,
                free: vec![true; inst.n_patients()],
            },
            spec,
            routing,
            rng: rng_from_seed(seed),
        })
    }

    pub fn spec(&self) -> PolicySpec {
        self.spec
    }

    pub fn is_free(&self, u: usize) -> bool {
        self.state.free[u]
    }

    pub fn free_patients(&self) -> Vec<usize> {
        (0..self.state.free.len()).filter(|&u| self.state.free[u]).collect()
    }

    /// Replaces the plan with one solved for the sub-population
    /// `patient_ids` (plan patient `i` is instance patient `patient_ids[i]`).
    /// No effect on policies that do not use a plan.
    pub fn replace_plan(&mut self, plan: &DispatchPlan, patient_ids: &[usize]) -> Result<()> {
        if self.routing.is_some() {
            self.routing = Some(Routing::new(self.state.inst, plan, patient_ids)?);
        }
        Ok(())
    }

    pub fn step(&mut self, a: &ArrivalEvent) -> Result<MatchRecord> {
        if a.donor_type >= self.state.inst.n_donor_types() {
            return Err(Error::InvalidParameter(format!(
                "arrival of unknown donor type {}",
                a.donor_type
            )));
        }
        Ok(match (&self.routing, self.spec) {
            (Some(routing), PolicySpec::Csm { intra, dispatch }) => {
                sampling_step(&mut self.state, routing, a, intra, dispatch, &mut self.rng)
            }
            (Some(routing), _) => sampling_step(
                &mut self.state,
                routing,
                a,
                IntraRule::LowestId,
                Dispatch::Discard,
                &mut self.rng,
            ),
            (None, spec) => simple_step(&mut self.state, a, spec, &mut self.rng),
        })
    }
}

/// Runs `spec` on one arrival sequence. Sampling policies require `plan`.
pub fn run_policy(
    inst: &MatchingInstance,
    spec: PolicySpec,
    plan: Option<&DispatchPlan>,
    arrivals: &[ArrivalEvent],
    oracle: SuccessOracle,
    seed: u64,
) -> Result<PolicyRun> {
    run_policy_with_truth(inst, &inst.weights, spec, plan, arrivals, oracle, seed)
}

/// Like [`run_policy`], but decisions use the instance weights while the
/// realized value of a match is read from `true_weights`.
pub fn run_policy_with_truth(
    inst: &MatchingInstance,
    true_weights: &[Vec<f64>],
    spec: PolicySpec,
    plan: Option<&DispatchPlan>,
    arrivals: &[ArrivalEvent],
    oracle: SuccessOracle,
    seed: u64,
) -> Result<PolicyRun> {
    let mut sim = Simulator::new(inst, true_weights, spec, plan, oracle, seed)?;
    let records = arrivals
        .iter()
        .map(|a| sim.step(a))
        .collect::<Result<Vec<_>>>()?;
    let total = records.iter().map(|r| r.weight).sum();
    Ok(PolicyRun {
        label: spec.label(),
        records,
        total,
    })
}
