//! Selection policies mapping a comment's per key point scores to matches.
//!
//! * `th`: every key point scoring strictly above the threshold.
//! * `bm`: the single best scoring key point.
//! * `bm+th`: the best scoring key point, only if it scores strictly above
//!   the threshold.
//!
//! Ties for the best score go to the smallest key point id.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("no key points")]
    NoKeyPoints,
    #[error("threshold {0} outside [0, 1]")]
    ThresholdOutOfRange(f64),
    #[error("policy {0} needs a threshold")]
    MissingThreshold(PolicyKind),
    #[error("policy bm takes no threshold")]
    UnexpectedThreshold,
    #[error("unknown policy {0:?}, expected th, bm or bm+th")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "th")]
    Threshold,
    #[serde(rename = "bm")]
    BestMatch,
    #[serde(rename = "bm+th")]
    BestMatchThreshold,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::Threshold,
        PolicyKind::BestMatch,
        PolicyKind::BestMatchThreshold,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Threshold => "th",
            PolicyKind::BestMatch => "bm",
            PolicyKind::BestMatchThreshold => "bm+th",
        }
    }

    pub fn needs_threshold(self) -> bool {
        !matches!(self, PolicyKind::BestMatch)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "th" => Ok(PolicyKind::Threshold),
            "bm" => Ok(PolicyKind::BestMatch),
            "bm+th" | "bm_th" | "bmth" => Ok(PolicyKind::BestMatchThreshold),
            other => Err(PolicyError::Unknown(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicySpec", into = "PolicySpec")]
pub enum Policy {
    Threshold(f64),
    BestMatch,
    BestMatchThreshold(f64),
}

/// Serialized form: `{"policy": "bm+th", "threshold": 0.5}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PolicySpec {
    policy: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
}

impl TryFrom<PolicySpec> for Policy {
    type Error = PolicyError;

    fn try_from(spec: PolicySpec) -> Result<Self, Self::Error> {
        Policy::new(spec.policy, spec.threshold)
    }
}

impl From<Policy> for PolicySpec {
    fn from(p: Policy) -> Self {
        PolicySpec {
            policy: p.kind(),
            threshold: p.threshold(),
        }
    }
}

fn check_threshold(t: f64) -> Result<f64, PolicyError> {
    if (0.0..=1.0).contains(&t) {
        Ok(t)
    } else {
        Err(PolicyError::ThresholdOutOfRange(t))
    }
}

impl Policy {
    pub fn new(kind: PolicyKind, threshold: Option<f64>) -> Result<Self, PolicyError> {
        match (kind, threshold) {
            (PolicyKind::BestMatch, None) => Ok(Policy::BestMatch),
            (PolicyKind::BestMatch, Some(_)) => Err(PolicyError::UnexpectedThreshold),
            (kind, None) => Err(PolicyError::MissingThreshold(kind)),
            (PolicyKind::Threshold, Some(t)) => Ok(Policy::Threshold(check_threshold(t)?)),
            (PolicyKind::BestMatchThreshold, Some(t)) => Ok(Policy::BestMatchThreshold(check_threshold(t)?)),
        }
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            Policy::Threshold(_) => PolicyKind::Threshold,
            Policy::BestMatch => PolicyKind::BestMatch,
            Policy::BestMatchThreshold(_) => PolicyKind::BestMatchThreshold,
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        match *self {
            Policy::Threshold(t) | Policy::BestMatchThreshold(t) => Some(t),
            Policy::BestMatch => None,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.threshold() {
            Some(t) => write!(f, "{}({t})", self.kind()),
            None => write!(f, "{}", self.kind()),
        }
    }
}

/// The highest scoring entry; ties go to the smallest key.
pub fn best_match<K: Ord, I: IntoIterator<Item = (K, f64)>>(scores: I) -> Option<(K, f64)> {
    let mut best: Option<(K, f64)> = None;
    for (k, s) in scores {
        best = match best {
            None => Some((k, s)),
            Some((bk, bs)) => {
                if s > bs || (s == bs && k < bk) {
                    Some((k, s))
                } else {
                    Some((bk, bs))
                }
            }
        };
    }
    best
}

pub fn apply_policy<K: Ord + Clone>(scores: &BTreeMap<K, f64>, policy: &Policy) -> Result<BTreeSet<K>, PolicyError> {
    match *policy {
        Policy::Threshold(t) => Ok(scores
            .iter()
            .filter(|(_, &s)| s > t)
            .map(|(k, _)| k.clone())
            .collect()),
        Policy::BestMatch => {
            let (k, _) = best_match(scores.iter().map(|(k, &s)| (k, s))).ok_or(PolicyError::NoKeyPoints)?;
            Ok(BTreeSet::from([k.clone()]))
        }
        Policy::BestMatchThreshold(t) => {
            let (k, s) = best_match(scores.iter().map(|(k, &s)| (k, s))).ok_or(PolicyError::NoKeyPoints)?;
            Ok(if s > t { BTreeSet::from([k.clone()]) } else { BTreeSet::new() })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example() -> BTreeMap<&'static str, f64> {
        BTreeMap::from([("k1", 0.9), ("k2", 0.6), ("k3", 0.2)])
    }

    #[test]
    fn examples() {
        let s = example();
        assert_eq!(apply_policy(&s, &Policy::Threshold(0.5)).unwrap(), BTreeSet::from(["k1", "k2"]));
        assert_eq!(apply_policy(&s, &Policy::BestMatch).unwrap(), BTreeSet::from(["k1"]));
        assert!(apply_policy(&s, &Policy::BestMatchThreshold(0.95)).unwrap().is_empty());
    }

    #[test]
    fn empty_scores() {
        let empty: BTreeMap<&str, f64> = BTreeMap::new();
        assert!(apply_policy(&empty, &Policy::Threshold(0.1)).unwrap().is_empty());
        assert_eq!(apply_policy(&empty, &Policy::BestMatch), Err(PolicyError::NoKeyPoints));
        assert_eq!(apply_policy(&empty, &Policy::BestMatchThreshold(0.1)), Err(PolicyError::NoKeyPoints));
    }

    #[test]
    fn equal_to_threshold_is_not_a_match() {
        let s = BTreeMap::from([("a", 0.5)]);
        assert!(apply_policy(&s, &Policy::Threshold(0.5)).unwrap().is_empty());
        assert!(apply_policy(&s, &Policy::BestMatchThreshold(0.5)).unwrap().is_empty());
    }

    #[test]
    fn ties_go_to_smallest_id() {
        let s = BTreeMap::from([("b", 0.7), ("a", 0.7), ("c", 0.1)]);
        assert_eq!(apply_policy(&s, &Policy::BestMatch).unwrap(), BTreeSet::from(["a"]));
        assert_eq!(best_match(vec![("z", 0.3), ("y", 0.3)]), Some(("y", 0.3)));
    }

    #[test]
    fn construction_rules() {
        assert_eq!(Policy::new(PolicyKind::BestMatch, None), Ok(Policy::BestMatch));
        assert!(Policy::new(PolicyKind::BestMatch, Some(0.3)).is_err());
        assert!(Policy::new(PolicyKind::Threshold, None).is_err());
        assert!(Policy::new(PolicyKind::BestMatchThreshold, Some(1.5)).is_err());
        assert_eq!("bm+th".parse::<PolicyKind>(), Ok(PolicyKind::BestMatchThreshold));
        assert!("best".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn serde_form() {
        let p = Policy::BestMatchThreshold(0.856);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"policy":"bm+th","threshold":0.856}"#);
        assert_eq!(serde_json::from_str::<Policy>(&json).unwrap(), p);
        assert!(serde_json::from_str::<Policy>(r#"{"policy":"th"}"#).is_err());
        assert_eq!(serde_json::from_str::<Policy>(r#"{"policy":"bm"}"#).unwrap(), Policy::BestMatch);
    }

    fn score_map() -> impl Strategy<Value = BTreeMap<u8, f64>> {
        prop::collection::btree_map(0u8..8, 0.0f64..=1.0, 1..6)
    }

    proptest! {
        #[test]
        fn bm_th_within_bm_within_keys(scores in score_map(), t in 0.0f64..=1.0) {
            let bm = apply_policy(&scores, &Policy::BestMatch).unwrap();
            let bmth = apply_policy(&scores, &Policy::BestMatchThreshold(t)).unwrap();
            prop_assert_eq!(bm.len(), 1);
            prop_assert!(bmth.len() <= 1);
            prop_assert!(bmth.is_subset(&bm));
            prop_assert!(bm.iter().all(|k| scores.contains_key(k)));
        }

        #[test]
        fn th_is_antitone(scores in score_map(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let low = apply_policy(&scores, &Policy::Threshold(lo)).unwrap();
            let high = apply_policy(&scores, &Policy::Threshold(hi)).unwrap();
            prop_assert!(high.is_subset(&low));
        }

        #[test]
        fn bm_invariant_under_increasing_transform(scores in score_map()) {
            let transformed: BTreeMap<u8, f64> = scores.iter().map(|(k, s)| (*k, s.powi(3) * 0.5 + 0.1)).collect();
            prop_assert_eq!(
                apply_policy(&scores, &Policy::BestMatch).unwrap(),
                apply_policy(&transformed, &Policy::BestMatch).unwrap()
            );
        }
    }
}
