//! Synthetic instances with planted cluster structure, arrival sampling, and
//! donor-type discretization.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::clustering::kmeans;
use crate::error::{Error, Result};
use crate::instance::{ArrivalEvent, BloodType, DonorType, MatchingInstance, PatientNode};
use crate::lp;
use crate::par::Execution;
use crate::rng::{derive_seed, rng_from_seed, SimRng};

pub const DEFAULT_FEATURE_DIM: usize = 34;
/// Side of the square the synthetic locations are drawn from, in nautical miles.
pub const MAP_SIDE: f64 = 3000.0;

fn default_feature_dim() -> usize {
    DEFAULT_FEATURE_DIM
}
fn default_blood() -> [f64; 4] {
    [0.44, 0.42, 0.10, 0.04]
}
fn default_scale() -> f64 {
    10.0
}
fn default_spread() -> f64 {
    0.5
}
fn default_bad_share() -> f64 {
    0.01
}
fn default_bad_noise() -> f64 {
    0.9
}
fn default_prob() -> [f64; 2] {
    [1.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_patients: usize,
    pub n_clusters_planted: usize,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    pub n_donor_types: usize,
    pub horizon: u32,
    /// Bound on the relative spread of member weights around their group mean.
    #[serde(default)]
    pub noise_delta: f64,
    /// Relative gap between emitted and true weights.
    #[serde(default)]
    pub eta: f64,
    /// Fraction of planted groups whose centers are shrunk and noise widened.
    #[serde(default)]
    pub bad_cluster_fraction: f64,
    /// Scale factor applied to the centers of bad groups.
    #[serde(default = "default_bad_share")]
    pub bad_cluster_value_share: f64,
    /// Relative spread inside bad groups.
    #[serde(default = "default_bad_noise")]
    pub bad_cluster_noise: f64,
    /// Frequencies of O, A, B, AB.
    #[serde(default = "default_blood")]
    pub blood_type_frequencies: [f64; 4],
    /// Typical edge weight.
    #[serde(default = "default_scale")]
    pub weight_scale: f64,
    /// Log-scale spread of group centers across donor types.
    #[serde(default = "default_spread")]
    pub center_spread: f64,
    /// Success probabilities are drawn per (group, donor type) from this range.
    #[serde(default = "default_prob")]
    pub success_prob: [f64; 2],
    /// Give every donor type the same rate instead of random rates.
    #[serde(default)]
    pub uniform_rates: bool,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorConfig {
    /// A small valid configuration; adjust fields from here.
    pub fn new(n_patients: usize, n_clusters_planted: usize, n_donor_types: usize, horizon: u32) -> Self {
        GeneratorConfig {
            n_patients,
            n_clusters_planted,
            feature_dim: DEFAULT_FEATURE_DIM,
            n_donor_types,
            horizon,
            noise_delta: 0.0,
            eta: 0.0,
            bad_cluster_fraction: 0.0,
            bad_cluster_value_share: default_bad_share(),
            bad_cluster_noise: default_bad_noise(),
            blood_type_frequencies: default_blood(),
            weight_scale: default_scale(),
            center_spread: default_spread(),
            success_prob: default_prob(),
            uniform_rates: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_clusters_planted == 0 || self.n_patients < self.n_clusters_planted {
            return bad(format!(
                "need 1 <= n_clusters_planted <= n_patients (got {} and {})",
                self.n_clusters_planted, self.n_patients
            ));
        }
        if self.n_donor_types == 0 || self.horizon == 0 || self.feature_dim == 0 {
            return bad("n_donor_types, horizon and feature_dim must be positive".into());
        }
        for (name, x) in [("noise_delta", self.noise_delta), ("eta", self.eta), ("bad_cluster_noise", self.bad_cluster_noise)] {
            if !(0.0..1.0).contains(&x) {
                return bad(format!("{name} = {x} must lie in [0, 1)"));
            }
        }
        for (name, x) in [
            ("bad_cluster_fraction", self.bad_cluster_fraction),
            ("bad_cluster_value_share", self.bad_cluster_value_share),
            ("success_prob[0]", self.success_prob[0]),
            ("success_prob[1]", self.success_prob[1]),
        ] {
            if !(0.0..=1.0).contains(&x) {
                return bad(format!("{name} = {x} must lie in [0, 1]"));
            }
        }
        if self.success_prob[0] > self.success_prob[1] {
            return bad("success_prob range is reversed".into());
        }
        let f = &self.blood_type_frequencies;
        if f.iter().any(|&x| !(x >= 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("blood_type_frequencies must be nonnegative and sum to 1".into());
        }
        if !(self.weight_scale > 0.0) || !(self.center_spread >= 0.0) {
            return bad("weight_scale must be positive and center_spread nonnegative".into());
        }
        Ok(())
    }

    /// Sizes of the planted groups: as equal as possible, larger ones first.
    pub fn group_sizes(&self) -> Vec<usize> {
        let k = self.n_clusters_planted;
        let base = self.n_patients / k;
        let extra = self.n_patients % k;
        (0..k).map(|g| base + usize::from(g < extra)).collect()
    }
}

/// What the generator knows that the instance does not show.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub planted_groups: Vec<Vec<usize>>,
    pub bad_groups: Vec<usize>,
    /// True weights; present when `eta > 0`.
    pub true_weights: Option<Vec<Vec<f64>>>,
}

impl GroundTruth {
    pub fn bad_patients(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .bad_groups
            .iter()
            .flat_map(|&g| self.planted_groups[g].iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

fn draw_blood(freqs: &[f64; 4], rng: &mut SimRng) -> BloodType {
    let x: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &f) in freqs.iter().enumerate() {
        acc += f;
        if x < acc {
            return BloodType::ALL[i];
        }
    }
    // rounding: last type with positive mass
    let last = freqs.iter().rposition(|&f| f > 0.0).unwrap_or(0);
    BloodType::ALL[last]
}

fn gaussian_vec(dim: usize, sd: f64, rng: &mut SimRng) -> Vec<f64> {
    (0..dim)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn uniform_location(rng: &mut SimRng) -> [f64; 2] {
    [rng.random::<f64>() * MAP_SIDE, rng.random::<f64>() * MAP_SIDE]
}

/// Mean-zero offsets with `max |x| <= bound`, one per member.
fn centered_offsets(n: usize, bound: f64, rng: &mut SimRng) -> Vec<f64> {
    if bound == 0.0 || n == 1 {
        return vec![0.0; n];
    }
    let mut xs: Vec<f64> = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    let m = xs.iter().sum::<f64>() / n as f64;
    xs.iter_mut().for_each(|x| *x -= m);
    let peak = xs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if peak > bound {
        let s = bound / peak;
        xs.iter_mut().for_each(|x| *x *= s);
    }
    xs
}

/// Generates a planted-cluster instance and its ground truth.
///
/// Each planted group shares a blood type, a feature center and a center
/// row `c[v]`. Member weights are `c[v] (1 + x)` where the offsets `x` have
/// zero mean within the group and magnitude at most `noise_delta`, so the
/// group mean is exactly `c[v]` and the relative error of the planted
/// partition never exceeds `noise_delta`.
pub fn generate_instance(cfg: &GeneratorConfig) -> Result<(MatchingInstance, GroundTruth)> {
    cfg.validate()?;
    let mut rng = rng_from_seed(derive_seed(cfg.seed, &[1]));
    let dim = cfg.feature_dim;
    let nv = cfg.n_donor_types;
    let sizes = cfg.group_sizes();
    let k = sizes.len();

    // donor types
    let donor_feats: Vec<Vec<f64>> = (0..nv).map(|_| gaussian_vec(dim, 1.0, &mut rng)).collect();
    let donor_blood: Vec<BloodType> = (0..nv)
        .map(|_| draw_blood(&cfg.blood_type_frequencies, &mut rng))
        .collect();
    let raw_rates: Vec<f64> = (0..nv)
        .map(|_| if cfg.uniform_rates { 1.0 } else { rng.sample::<f64, _>(Exp1) + 0.05 })
        .collect();
    let rate_total: f64 = raw_rates.iter().sum();
    let horizon = f64::from(cfg.horizon);
    let mut rates: Vec<f64> = raw_rates.iter().map(|r| r / rate_total * horizon).collect();
    // put the rounding residue on the largest rate
    let residue = horizon - rates.iter().sum::<f64>();
    let top = (0..nv).max_by(|&a, &b| rates[a].total_cmp(&rates[b])).unwrap_or(0);
    rates[top] += residue;
    let donor_types: Vec<DonorType> = (0..nv)
        .map(|v| DonorType {
            id: format!("d{v}"),
            blood_type: donor_blood[v],
            features: donor_feats[v].clone(),
            arrival_rate: rates[v],
            location: uniform_location(&mut rng),
        })
        .collect();

    // planted groups
    let n_bad = (cfg.bad_cluster_fraction * k as f64).round() as usize;
    let mut group_ids: Vec<usize> = (0..k).collect();
    group_ids.shuffle(&mut rng);
    let mut bad_groups: Vec<usize> = group_ids[..n_bad.min(k)].to_vec();
    bad_groups.sort_unstable();

    let scale_dim = (dim as f64).sqrt();
    let mut patients = Vec::with_capacity(cfg.n_patients);
    let mut weights = Vec::with_capacity(cfg.n_patients);
    let mut probs = Vec::with_capacity(cfg.n_patients);
    let mut compat = Vec::with_capacity(cfg.n_patients);
    let mut planted_groups = Vec::with_capacity(k);
    for (g, &size) in sizes.iter().enumerate() {
        let blood = draw_blood(&cfg.blood_type_frequencies, &mut rng);
        let center_feat = gaussian_vec(dim, 1.0, &mut rng);
        let is_bad = bad_groups.binary_search(&g).is_ok();
        let shrink = if is_bad { cfg.bad_cluster_value_share } else { 1.0 };
        let noise = if is_bad { cfg.bad_cluster_noise.max(cfg.noise_delta) } else { cfg.noise_delta };
        let ok: Vec<bool> = donor_blood.iter().map(|d| d.can_donate_to(blood)).collect();
        let center: Vec<f64> = (0..nv)
            .map(|v| {
                let z: f64 = center_feat.iter().zip(&donor_feats[v]).map(|(a, b)| a * b).sum::<f64>() / scale_dim;
                let jitter: f64 = rng.sample(StandardNormal);
                if ok[v] {
                    shrink * cfg.weight_scale * (cfg.center_spread * (0.7 * z + 0.7 * jitter)).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let p_row: Vec<f64> = (0..nv)
            .map(|v| {
                let [lo, hi] = cfg.success_prob;
                if !ok[v] {
                    0.0
                } else if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..=hi)
                }
            })
            .collect();
        let offsets: Vec<Vec<f64>> = (0..nv).map(|_| centered_offsets(size, noise, &mut rng)).collect();

        let start = patients.len();
        for m in 0..size {
            let u = start + m;
            let features: Vec<f64> = center_feat
                .iter()
                .map(|c| c + 0.05 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            patients.push(PatientNode {
                id: format!("p{u}"),
                features,
                blood_type: blood,
                status: rng.random_range(1..=6),
                location: uniform_location(&mut rng),
            });
            weights.push((0..nv).map(|v| center[v] * (1.0 + offsets[v][m])).collect::<Vec<f64>>());
            probs.push(p_row.clone());
            compat.push(ok.clone());
        }
        planted_groups.push((start..start + size).collect::<Vec<usize>>());
    }

    let true_weights = (cfg.eta > 0.0).then(|| {
        weights
            .iter()
            .map(|row: &Vec<f64>| {
                row.iter()
                    .map(|&w| {
                        let z: f64 = rng.random_range(-cfg.eta..=cfg.eta);
                        (w * (1.0 + z)).clamp((1.0 - cfg.eta) * w, (1.0 + cfg.eta) * w)
                    })
                    .collect()
            })
            .collect()
    });

    let inst = MatchingInstance {
        patients,
        donor_types,
        weights,
        success_probs: probs,
        compatibility: compat,
        horizon: cfg.horizon,
    };
    let problems = inst.validate();
    if !problems.is_empty() {
        return Err(Error::InvalidInstance(problems));
    }
    Ok((
        inst,
        GroundTruth {
            planted_groups,
            bad_groups,
            true_weights,
        },
    ))
}

/// Share of the fluid optimum reachable using only `subset` of the patients:
/// the LP value restricted to `subset` over the full LP value.
pub fn measure_rho(inst: &MatchingInstance, subset: &[usize]) -> Result<f64> {
    let full = lp::plan(inst, None)?.objective;
    if full <= 0.0 {
        return Err(Error::Undefined("instance has zero LP value".into()));
    }
    let mut restricted = inst.clone();
    for u in 0..inst.n_patients() {
        if subset.binary_search(&u).is_err() {
            restricted.compatibility[u].iter_mut().for_each(|c| *c = false);
            restricted.weights[u].iter_mut().for_each(|w| *w = 0.0);
        }
    }
    Ok(lp::plan(&restricted, None)?.objective / full)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArrivalMode {
    /// Per-type counts `N_v ~ Poisson(r_v)`, merged in uniformly random order.
    #[default]
    Poisson,
    /// Exactly `T` rounds, each of type `v` with probability `r_v / T`.
    IidRounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalSequence {
    pub mode: ArrivalMode,
    pub seed: u64,
    pub events: Vec<ArrivalEvent>,
}

pub fn sample_arrivals(inst: &MatchingInstance, mode: ArrivalMode, seed: u64) -> ArrivalSequence {
    let mut rng = rng_from_seed(seed);
    let mut types: Vec<usize> = match mode {
        ArrivalMode::Poisson => {
            let mut t = Vec::new();
            for (v, d) in inst.donor_types.iter().enumerate() {
                if d.arrival_rate > 0.0 {
                    let n = Poisson::new(d.arrival_rate)
                        .expect("positive finite rate")
                        .sample(&mut rng) as usize;
                    t.extend(std::iter::repeat_n(v, n));
                }
            }
            t.shuffle(&mut rng);
            t
        }
        ArrivalMode::IidRounds => {
            let total = inst.total_rate();
            let cum: Vec<f64> = inst
                .donor_types
                .iter()
                .scan(0.0, |acc, d| {
                    *acc += d.arrival_rate / total;
                    Some(*acc)
                })
                .collect();
            (0..inst.horizon)
                .map(|_| {
                    let x: f64 = rng.random();
                    cum.iter().position(|&c| x < c).unwrap_or_else(|| {
                        inst.donor_types.iter().rposition(|d| d.arrival_rate > 0.0).unwrap_or(0)
                    })
                })
                .collect()
        }
    };
    let events = types
        .drain(..)
        .enumerate()
        .map(|(i, v)| ArrivalEvent {
            round: i as u32 + 1,
            donor_type: v,
        })
        .collect();
    ArrivalSequence { mode, seed, events }
}

/// A historical donor used for discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DonorRecord {
    pub blood_type: BloodType,
    pub features: Vec<f64>,
    pub location: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    /// Donor types; `arrival_rate` is the share of the pool assigned to the type.
    pub types: Vec<DonorType>,
    /// Type index for each pool entry.
    pub assignments: Vec<usize>,
    /// Mean squared distance to the assigned centroid.
    pub ase: f64,
    /// `1 - ase / total`, where `total` is the mean squared distance to the
    /// blood-type partition mean.
    pub explained_variance: f64,
}

/// k-means on the features of each blood-type partition separately, `k`
/// types per nonempty partition.
pub fn discretize_donors(pool: &[DonorRecord], k: usize, seed: u64) -> Result<Discretization> {
    if pool.is_empty() || k == 0 {
        return Err(Error::InvalidParameter("need a nonempty pool and k >= 1".into()));
    }
    let points: Vec<Vec<f64>> = pool.iter().map(|d| d.features.clone()).collect();
    let mut types = Vec::new();
    let mut assignments = vec![0usize; pool.len()];
    let mut sse = 0.0;
    let mut sst = 0.0;
    let n = pool.len() as f64;
    for bt in BloodType::ALL {
        let members: Vec<usize> = (0..pool.len()).filter(|&i| pool[i].blood_type == bt).collect();
        if members.is_empty() {
            continue;
        }
        if k > members.len() {
            return Err(Error::InvalidParameter(format!(
                "k = {k} exceeds the {} donors of blood type {bt}",
                members.len()
            )));
        }
        let mean = kmeans::centroid(&points, &members);
        sst += members.iter().map(|&i| kmeans::sq_dist(&points[i], &mean)).sum::<f64>();

        let mut rng = rng_from_seed(derive_seed(seed, &[bt.index() as u64]));
        let res = kmeans::kmeans(&points, &members, k, 300, &mut rng, Execution::Parallel);
        let base = types.len();
        for j in 0..k {
            let mine: Vec<usize> = members
                .iter()
                .zip(&res.labels)
                .filter(|(_, &l)| l == j)
                .map(|(&i, _)| i)
                .collect();
            let loc = if mine.is_empty() {
                [0.0, 0.0]
            } else {
                let m = mine.len() as f64;
                [
                    mine.iter().map(|&i| pool[i].location[0]).sum::<f64>() / m,
                    mine.iter().map(|&i| pool[i].location[1]).sum::<f64>() / m,
                ]
            };
            types.push(DonorType {
                id: format!("{bt}-{j}"),
                blood_type: bt,
                features: res.centers[j].clone(),
                arrival_rate: mine.len() as f64 / n,
                location: loc,
            });
        }
        for (&i, &l) in members.iter().zip(&res.labels) {
            assignments[i] = base + l;
            sse += kmeans::sq_dist(&points[i], &res.centers[l]);
        }
    }
    let ase = sse / n;
    let explained_variance = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    Ok(Discretization {
        types,
        assignments,
        ase,
        explained_variance,
    })
}

/// A donor pool drawn from a Gaussian mixture, for discretization studies.
pub fn generate_donor_pool(
    n: usize,
    feature_dim: usize,
    n_modes: usize,
    blood_type_frequencies: &[f64; 4],
    seed: u64,
) -> Vec<DonorRecord> {
    let mut rng = rng_from_seed(seed);
    let modes: Vec<Vec<f64>> = (0..n_modes.max(1))
        .map(|_| gaussian_vec(feature_dim, 2.0, &mut rng))
        .collect();
    (0..n)
        .map(|_| {
            let m = &modes[rng.random_range(0..modes.len())];
            DonorRecord {
                blood_type: draw_blood(blood_type_frequencies, &mut rng),
                features: m
                    .iter()
                    .map(|c| c + rng.sample::<f64, _>(StandardNormal))
                    .collect(),
                location: uniform_location(&mut rng),
            }
        })
        .collect()
}
