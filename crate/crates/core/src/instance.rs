//! The bipartite matching world: waitlisted patients (offline side), donor
//! types (online side), edge weights, success probabilities and the horizon.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on `sum(arrival_rate) == horizon`.
pub const RATE_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BloodType {
    O,
    A,
    B,
    AB,
}

impl BloodType {
    pub const ALL: [BloodType; 4] = [BloodType::O, BloodType::A, BloodType::B, BloodType::AB];

    pub fn index(self) -> usize {
        match self {
            BloodType::O => 0,
            BloodType::A => 1,
            BloodType::B => 2,
            BloodType::AB => 3,
        }
    }

    /// ABO rule: can an organ of type `self` go to a recipient of type `recipient`?
    pub fn can_donate_to(self, recipient: BloodType) -> bool {
        match self {
            BloodType::O => true,
            BloodType::A => matches!(recipient, BloodType::A | BloodType::AB),
            BloodType::B => matches!(recipient, BloodType::B | BloodType::AB),
            BloodType::AB => recipient == BloodType::AB,
        }
    }
}

impl fmt::Display for BloodType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BloodType::O => "O",
            BloodType::A => "A",
            BloodType::B => "B",
            BloodType::AB => "AB",
        };
        f.write_str(s)
    }
}

impl FromStr for BloodType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "O" => Ok(BloodType::O),
            "A" => Ok(BloodType::A),
            "B" => Ok(BloodType::B),
            "AB" => Ok(BloodType::AB),
            other => Err(Error::Parse(format!("unknown blood type {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientNode {
    pub id: String,
    pub features: Vec<f64>,
    pub blood_type: BloodType,
    /// Medical urgency, 1 (most urgent) to 6.
    pub status: u8,
    /// Planar coordinates in nautical miles.
    pub location: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DonorType {
    pub id: String,
    pub blood_type: BloodType,
    pub features: Vec<f64>,
    /// Expected arrivals over the horizon.
    pub arrival_rate: f64,
    pub location: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingInstance {
    pub patients: Vec<PatientNode>,
    pub donor_types: Vec<DonorType>,
    /// `weights[u][v]`, row-major by patient.
    pub weights: Vec<Vec<f64>>,
    pub success_probs: Vec<Vec<f64>>,
    pub compatibility: Vec<Vec<bool>>,
    pub horizon: u32,
}

/// One realized donor arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrivalEvent {
    /// 1-based round; strictly increasing within a sequence.
    pub round: u32,
    /// Index into `MatchingInstance::donor_types`.
    pub donor_type: usize,
}

impl MatchingInstance {
    pub fn n_patients(&self) -> usize {
        self.patients.len()
    }

    pub fn n_donor_types(&self) -> usize {
        self.donor_types.len()
    }

    #[inline]
    pub fn weight(&self, patient: usize, donor: usize) -> f64 {
        self.weights[patient][donor]
    }

    #[inline]
    pub fn prob(&self, patient: usize, donor: usize) -> f64 {
        self.success_probs[patient][donor]
    }

    #[inline]
    pub fn is_edge(&self, patient: usize, donor: usize) -> bool {
        self.compatibility[patient][donor]
    }

    /// Largest weight over all (patient, donor type) pairs.
    pub fn max_weight(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|row| row.iter().copied())
            .fold(0.0, f64::max)
    }

    pub fn total_rate(&self) -> f64 {
        self.donor_types.iter().map(|d| d.arrival_rate).sum()
    }

    /// Weights on compatible edges, flattened; the population whose
    /// stability is monitored for replanning.
    pub fn edge_weight_sample(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (u, row) in self.weights.iter().enumerate() {
            for (v, &w) in row.iter().enumerate() {
                if self.compatibility[u][v] {
                    out.push(w);
                }
            }
        }
        out
    }

    /// Returns one human-readable description per violated invariant;
    /// empty means the instance is valid.
    pub fn validate(&self) -> Vec<String> {
        validate_instance(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: MatchingInstance = serde_json::from_str(text)?;
        let violations = inst.validate();
        if violations.is_empty() {
            Ok(inst)
        } else {
            Err(Error::InvalidInstance(violations))
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<MatchingInstance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    MatchingInstance::from_json(&text)
}

pub fn validate_instance(inst: &MatchingInstance) -> Vec<String> {
    let mut out = Vec::new();
    let n_u = inst.patients.len();
    let n_v = inst.donor_types.len();

    if inst.horizon == 0 {
        out.push("horizon must be a positive integer".to_string());
    }

    let feature_dim = inst.patients.first().map(|p| p.features.len());
    for (i, p) in inst.patients.iter().enumerate() {
        if !(1..=6).contains(&p.status) {
            out.push(format!("patients[{i}].status {} out of 1..6", p.status));
        }
        if Some(p.features.len()) != feature_dim {
            out.push(format!(
                "patients[{i}].features has length {} but feature dimension is {}",
                p.features.len(),
                feature_dim.unwrap_or(0)
            ));
        }
        if p.features.iter().any(|x| !x.is_finite()) {
            out.push(format!("patients[{i}].features contains a non-finite value"));
        }
    }

    for (j, d) in inst.donor_types.iter().enumerate() {
        if !d.arrival_rate.is_finite() || d.arrival_rate < 0.0 {
            out.push(format!(
                "donor_types[{j}].arrival_rate {} must be finite and nonnegative",
                d.arrival_rate
            ));
        }
    }
    let total = inst.total_rate();
    if !((total - f64::from(inst.horizon)).abs() <= RATE_SUM_TOLERANCE) {
        out.push(format!(
            "arrival rates do not sum to horizon (sum {total}, horizon {})",
            inst.horizon
        ));
    }

    let dims_ok = |name: &str, rows: usize, cols: &mut dyn Iterator<Item = usize>, out: &mut Vec<String>| {
        if rows != n_u {
            out.push(format!("{name} has {rows} rows but there are {n_u} patients"));
            return false;
        }
        let mut ok = true;
        for (i, c) in cols.enumerate() {
            if c != n_v {
                out.push(format!("{name}[{i}] has {c} columns but there are {n_v} donor types"));
                ok = false;
            }
        }
        ok
    };
    let w_ok = dims_ok("weights", inst.weights.len(), &mut inst.weights.iter().map(Vec::len), &mut out);
    let p_ok = dims_ok(
        "success_probs",
        inst.success_probs.len(),
        &mut inst.success_probs.iter().map(Vec::len),
        &mut out,
    );
    let c_ok = dims_ok(
        "compatibility",
        inst.compatibility.len(),
        &mut inst.compatibility.iter().map(Vec::len),
        &mut out,
    );

    if w_ok {
        for (u, row) in inst.weights.iter().enumerate() {
            for (v, &w) in row.iter().enumerate() {
                if !w.is_finite() {
                    out.push(format!("weight non-finite at weights[{u}][{v}]"));
                } else if w < 0.0 {
                    out.push(format!("weight negative at weights[{u}][{v}] = {w}"));
                }
                if c_ok && !inst.compatibility[u][v] && w != 0.0 {
                    out.push(format!(
                        "weight nonzero on incompatible pair weights[{u}][{v}] = {w}"
                    ));
                }
            }
        }
    }
    if p_ok {
        for (u, row) in inst.success_probs.iter().enumerate() {
            for (v, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    out.push(format!(
                        "success probability out of [0,1] at success_probs[{u}][{v}] = {p}"
                    ));
                }
            }
        }
    }
    out
}
