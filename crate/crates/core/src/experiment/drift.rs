//! PSI-triggered replanning.

use crate::clustering::{cluster_patients, Clustering, ClusteringMethod};
use crate::error::{Error, Result};
use crate::instance::MatchingInstance;
use crate::lp::{self, DispatchPlan};
use crate::metrics::{psi, PsiResult, PSI_DEFAULT_BINS};

/// The remaining waitlist `patient_ids` facing `remaining_rounds` more
/// arrivals: rates are rescaled to sum to the new horizon.
pub fn waitlist_instance(
    inst: &MatchingInstance,
    patient_ids: &[usize],
    remaining_rounds: u32,
) -> Result<MatchingInstance> {
    if remaining_rounds == 0 {
        return Err(Error::InvalidParameter("no rounds remain".into()));
    }
    let total = inst.total_rate();
    let scale = f64::from(remaining_rounds) / total;
    let mut donor_types = inst.donor_types.clone();
    donor_types.iter_mut().for_each(|d| d.arrival_rate *= scale);
    let pick = |m: &Vec<Vec<f64>>| patient_ids.iter().map(|&u| m[u].clone()).collect();
    Ok(MatchingInstance {
        patients: patient_ids.iter().map(|&u| inst.patients[u].clone()).collect(),
        donor_types,
        weights: pick(&inst.weights),
        success_probs: pick(&inst.success_probs),
        compatibility: patient_ids.iter().map(|&u| inst.compatibility[u].clone()).collect(),
        horizon: remaining_rounds,
    })
}

#[derive(Debug, Clone)]
pub struct Replan {
    pub psi: PsiResult,
    pub clustering: Clustering,
    pub plan: DispatchPlan,
}

/// Holds the edge-weight sample of the population the current plan was
/// solved for.
#[derive(Debug, Clone)]
pub struct DriftMonitor {
    baseline: Vec<f64>,
    pub threshold: f64,
}

impl DriftMonitor {
    pub fn new(baseline: &MatchingInstance, threshold: f64) -> Result<Self> {
        if !(threshold >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "PSI threshold {threshold} must be nonnegative"
            )));
        }
        Ok(DriftMonitor {
            baseline: baseline.edge_weight_sample(),
            threshold,
        })
    }

    pub fn drift(&self, population: &MatchingInstance) -> Result<PsiResult> {
        psi(&self.baseline, &population.edge_weight_sample(), PSI_DEFAULT_BINS)
    }

    /// If the edge-weight PSI of `population` against the baseline reaches
    /// the threshold, re-clusters and re-solves for `population` and makes
    /// it the new baseline. Populations with no edges never trigger.
    pub fn replan_on_drift(
        &mut self,
        population: &MatchingInstance,
        b: usize,
        method: ClusteringMethod,
        seed: u64,
    ) -> Result<Option<Replan>> {
        let sample = population.edge_weight_sample();
        if sample.is_empty() || self.baseline.is_empty() {
            return Ok(None);
        }
        let drift = psi(&self.baseline, &sample, PSI_DEFAULT_BINS)?;
        if drift.value < self.threshold {
            return Ok(None);
        }
        let b = b.min(population.n_patients());
        let clustering = cluster_patients(population, b, method, seed)?;
        let plan = lp::plan(population, Some(&clustering))?;
        self.baseline = sample;
        Ok(Some(Replan {
            psi: drift,
            clustering,
            plan,
        }))
    }
}
