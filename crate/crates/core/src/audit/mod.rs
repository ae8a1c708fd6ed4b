//! Exact checks of correctness, attribute privacy, database secrecy and
//! download counts.

pub mod privacy;
pub mod secrecy;

use serde::Serialize;

use crate::access::{message_index, AttributeVector, SystemParams};
use crate::error::{Error, Result};
use crate::harness::{run_protocol, Metrics};
use crate::mix::{Costs, LoadRatio, Rational};
use crate::protocol::SchemeKind;
use crate::store::MessageStore;

pub use privacy::{
    affine_observation, audit_attribute_privacy, audit_privacy_all, observation_distance, AffineObservation,
    DistributionTable, ObservedGroup, PrivacyOutcome, QueryObservation,
};
pub use secrecy::{audit_db_secrecy, SecrecyOutcome};

/// Enumeration cap used by the CLI and the examples.
pub const DEFAULT_CAP: u128 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CorrectnessReport {
    pub scheme: SchemeKind,
    pub runs: usize,
    /// Wrong decodes and runs that gave up after the retry cap.
    pub failures: usize,
    /// Extra attempts over all runs.
    pub retries: usize,
}

impl CorrectnessReport {
    /// Retries per run.
    pub fn retry_frequency(&self) -> f64 {
        self.retries as f64 / self.runs.max(1) as f64
    }
}

/// Runs the protocol for every attribute vector, `trials` times each, on
/// fresh random stores and compares against the store.
pub fn audit_correctness(kind: SchemeKind, params: &SystemParams, trials: usize) -> Result<CorrectnessReport> {
    kind.subpacket_count(params)?;
    let mut report = CorrectnessReport {
        scheme: kind,
        runs: 0,
        failures: 0,
        retries: 0,
    };
    for (i, v) in AttributeVector::all(params).into_iter().enumerate() {
        let target = message_index(&v, params)?;
        for t in 0..trials {
            let seed = (i * trials + t) as u64;
            let store = MessageStore::random(params, seed);
            report.runs += 1;
            match run_protocol(kind, params, &v, &store, seed) {
                Ok(out) => {
                    report.retries += out.metrics.retries;
                    if out.message != store.message(target)? {
                        report.failures += 1;
                    }
                }
                Err(Error::RetriesExhausted { attempts }) => {
                    report.retries += attempts - 1;
                    report.failures += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CountsReport {
    pub scheme: SchemeKind,
    pub params: SystemParams,
    pub measured: Metrics,
    #[serde(serialize_with = "crate::mix::ratio_serde::serialize")]
    pub expected_rate: Rational,
    pub expected_load_ratio: LoadRatio,
    /// Allocated pool symbols predicted from the per-symbol cost.
    #[serde(serialize_with = "crate::mix::ratio_serde::serialize")]
    pub expected_randomness: Rational,
    pub passed: bool,
}

/// Measured rate, load ratio and pool size against the closed forms.
pub fn audit_counts(kind: SchemeKind, params: &SystemParams) -> Result<CountsReport> {
    let v = AttributeVector::all(params)
        .pop()
        .ok_or_else(|| Error::InvalidParams("no attribute vectors".into()))?;
    let store = MessageStore::random(params, 0);
    let out = run_protocol(kind, params, &v, &store, 0)?;
    let costs = Costs::of(kind, params.d, params.k);
    let expected_randomness = costs.randomness * Rational::from_integer(params.l as i128);
    let m = out.metrics;
    let passed = m.rate == costs.rate(params.d)
        && m.load_ratio == costs.load_ratio()
        && Rational::from_integer(m.randomness_allocated as i128) == expected_randomness
        && out.message == store.message(message_index(&v, params)?)?;
    Ok(CountsReport {
        scheme: kind,
        params: *params,
        measured: m,
        expected_rate: costs.rate(params.d),
        expected_load_ratio: costs.load_ratio(),
        expected_randomness,
        passed,
    })
}

/// One line of a structured audit report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    /// TV distance, failure count, or the measured quantities.
    pub value: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enumerated: Option<u128>,
    pub millis: u128,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mix::rat;

    #[test]
    fn correctness_small() {
        let params = SystemParams::new(3, 2, 2, 65537, 4).unwrap();
        let r = audit_correctness(SchemeKind::Het1, &params, 3).unwrap();
        assert_eq!((r.runs, r.failures, r.retries), (24, 0, 0));
        let d2 = SystemParams::new(2, 2, 2, 65537, 6).unwrap();
        assert!(audit_correctness(SchemeKind::Het2, &d2, 1).is_err());
    }

    #[test]
    fn counts_match_closed_forms() {
        let r = audit_counts(SchemeKind::Het1, &SystemParams::new(5, 4, 3, 65537, 8).unwrap()).unwrap();
        assert!(r.passed);
        assert_eq!((r.measured.rate, r.measured.load_ratio), (rat(1, 4), LoadRatio::Finite(rat(1, 12))));
        assert_eq!(r.measured.randomness_consumed, 24);
        let r = audit_counts(SchemeKind::Het2, &SystemParams::new(6, 4, 3, 65537, 10).unwrap()).unwrap();
        assert!(r.passed);
        assert_eq!((r.measured.rate, r.measured.load_ratio), (rat(5, 24), LoadRatio::Finite(rat(3, 4))));
        let r = audit_counts(SchemeKind::Dapac, &SystemParams::new(4, 4, 3, 65537, 6).unwrap()).unwrap();
        assert!(r.passed);
        assert_eq!(r.measured.rate, rat(1, 6));
    }
}
