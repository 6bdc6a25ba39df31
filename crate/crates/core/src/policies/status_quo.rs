//! Tiered allocation rule used as the status-quo baseline.
//!
//! A (patient, donor) pair falls in the first tier whose status, blood
//! relation and distance bound all match. Tiers come in pairs: the odd tier
//! of a pair is for primary blood matches, the even one for secondary matches
//! under the same status and distance bound.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::instance::{BloodType, DonorType, PatientNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BloodRelation {
    Primary,
    Secondary,
}

impl fmt::Display for BloodRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BloodRelation::Primary => "primary",
            BloodRelation::Secondary => "secondary",
        })
    }
}

/// Blood relation of a donor to a patient; `None` when ABO-incompatible.
/// An O donor is only a secondary match for A and AB patients.
pub fn blood_relation(donor: BloodType, patient: BloodType) -> Option<BloodRelation> {
    if !donor.can_donate_to(patient) {
        return None;
    }
    match (donor, patient) {
        (BloodType::O, BloodType::A) | (BloodType::O, BloodType::AB) => {
            Some(BloodRelation::Secondary)
        }
        _ => Some(BloodRelation::Primary),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierRow {
    pub tier: u8,
    pub status: u8,
    pub relation: BloodRelation,
    /// Distance bound in nautical miles; `None` means any distance.
    pub max_distance: Option<f64>,
}

/// (status, distance bound) for each primary/secondary pair, in priority order.
const PAIRS: [(u8, Option<f64>); 34] = [
    (1, Some(500.0)),
    (2, Some(500.0)),
    (3, Some(250.0)),
    (1, Some(1000.0)),
    (2, Some(1000.0)),
    (4, Some(250.0)),
    (3, Some(500.0)),
    (5, Some(250.0)),
    (3, Some(1000.0)),
    (6, Some(250.0)),
    (1, Some(1500.0)),
    (2, Some(1500.0)),
    (3, Some(1500.0)),
    (4, Some(500.0)),
    (5, Some(500.0)),
    (6, Some(500.0)),
    (1, Some(2500.0)),
    (2, Some(2500.0)),
    (3, Some(2500.0)),
    (4, Some(1000.0)),
    (5, Some(1000.0)),
    (6, Some(1000.0)),
    (1, None),
    (2, None),
    (3, None),
    (4, Some(1500.0)),
    (5, Some(1500.0)),
    (6, Some(1500.0)),
    (4, Some(2500.0)),
    (5, Some(2500.0)),
    (6, Some(2500.0)),
    (4, None),
    (5, None),
    (6, None),
];

pub const N_TIERS: usize = 68;

/// All tier rows in priority order.
pub fn tier_table() -> Vec<TierRow> {
    PAIRS
        .iter()
        .enumerate()
        .flat_map(|(i, &(status, max_distance))| {
            let odd = (2 * i + 1) as u8;
            [
                TierRow {
                    tier: odd,
                    status,
                    relation: BloodRelation::Primary,
                    max_distance,
                },
                TierRow {
                    tier: odd + 1,
                    status,
                    relation: BloodRelation::Secondary,
                    max_distance,
                },
            ]
        })
        .collect()
}

/// Tier of a pair given its attributes; `None` for an unknown status.
pub fn tier_for(status: u8, relation: BloodRelation, distance: f64) -> Option<u8> {
    PAIRS.iter().enumerate().find_map(|(i, &(s, bound))| {
        let within = bound.is_none_or(|b| distance <= b);
        (s == status && within).then(|| {
            let odd = (2 * i + 1) as u8;
            match relation {
                BloodRelation::Primary => odd,
                BloodRelation::Secondary => odd + 1,
            }
        })
    })
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Tier of offering `donor` to `patient`; `None` if blood-incompatible.
pub fn pair_tier(patient: &PatientNode, donor: &DonorType) -> Option<u8> {
    let rel = blood_relation(donor.blood_type, patient.blood_type)?;
    tier_for(patient.status, rel, distance(patient.location, donor.location))
}
