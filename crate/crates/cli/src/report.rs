use std::collections::BTreeMap;

use popassign::oracle::MarginReport;
use popassign::{DualCertificate, Instance, LevelFunction, Matching, NotFoundReason, SolveOutcome};
use serde::Serialize;

/// Process exit codes shared by every command.
pub const EXIT_FOUND: i32 = 0;
pub const EXIT_NOT_FOUND: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Found,
    NotFound,
    /// the instance has no perfect matching, so no assignment exists at all
    NoPerfectMatching,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CertificateJson {
    pub agents: BTreeMap<String, i64>,
    pub objects: BTreeMap<String, i64>,
}

impl CertificateJson {
    pub fn new(instance: &Instance, alpha: &DualCertificate) -> Self {
        let named = |names: &[String], values: &[i64]| names.iter().cloned().zip(values.iter().copied()).collect();
        Self {
            agents: named(instance.agent_names(), &alpha.agents),
            objects: named(instance.object_names(), &alpha.objects),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationStatus {
    Passed,
    Failed,
}

/// Result of re-checking an output with the oracles.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verification {
    pub status: VerificationStatus,
    pub certificate_valid: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub certificate_violations: Vec<String>,
    /// Exhaustive margin, present when the instance is small enough.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub brute_force_margin: Option<i64>,
    /// Exhaustive election check for matching and penalty variants.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub brute_force_popular: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LoadJson {
    pub agent: String,
    pub object: String,
    pub load: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub command: String,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Vec<(String, String)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<BTreeMap<String, usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified_margin_bound: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loads: Option<Vec<LoadJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<(String, String)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycles: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branches: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<Verification>,
    pub timing_ms: f64,
}

impl SolveReport {
    pub fn new(command: &str, outcome: Outcome) -> Self {
        Self {
            command: command.to_string(),
            outcome,
            reason: None,
            assignment: None,
            levels: None,
            certificate: None,
            certified_margin_bound: None,
            loads: None,
            margin: None,
            witness: None,
            cycles: None,
            iterations: None,
            branches: None,
            verification: None,
            timing_ms: 0.0,
        }
    }

    /// Fills outcome, assignment, levels, certificate and iteration count.
    /// The assignment is reported on `instance` unless `lifted` is given.
    pub fn from_outcome(command: &str, instance: &Instance, outcome: &SolveOutcome, lifted: Option<(&Instance, &Matching)>) -> Self {
        let mut report = SolveReport::new(command, if outcome.is_found() { Outcome::Found } else { Outcome::NotFound });
        report.levels = Some(named_levels(instance, outcome.levels()));
        report.iterations = Some(outcome.iterations());
        match outcome {
            SolveOutcome::Found { assignment, certificate, .. } => {
                report.assignment = Some(match lifted {
                    Some((source, m)) => m.to_named_pairs(source),
                    None => assignment.to_named_pairs(instance),
                });
                report.certificate = Some(CertificateJson::new(instance, certificate));
            }
            SolveOutcome::NotFound { reason, .. } => {
                report.reason = Some(
                    match reason {
                        NotFoundReason::LevelOverflow => "level_overflow",
                        NotFoundReason::TruncationCap => "truncation_cap",
                    }
                    .to_string(),
                );
            }
        }
        report
    }

    pub fn exit_code(&self) -> i32 {
        match self.outcome {
            Outcome::Found => EXIT_FOUND,
            Outcome::NotFound | Outcome::NoPerfectMatching => EXIT_NOT_FOUND,
        }
    }

    pub fn set_margin(&mut self, instance: &Instance, report: &MarginReport) {
        self.margin = Some(report.margin);
        self.witness = Some(report.witness.to_named_pairs(instance));
    }

    /// One line for standard error.
    pub fn summary(&self) -> String {
        let mut line = format!("{}: {}", self.command, tag(&self.outcome));
        if let Some(reason) = &self.reason {
            line.push_str(&format!(" ({reason})"));
        }
        if let Some(m) = &self.assignment {
            let pairs: Vec<String> = m.iter().map(|(a, b)| format!("{a}-{b}")).collect();
            line.push_str(&format!(" [{}]", pairs.join(" ")));
        }
        if let Some(cycles) = &self.cycles {
            line.push_str(&format!(" {} trading cycle(s)", cycles.len()));
        }
        if let Some(margin) = self.margin {
            line.push_str(&format!(" margin {margin}"));
        }
        if let Some(bound) = self.certified_margin_bound {
            line.push_str(&format!(" certified bound {bound}"));
        }
        if let Some(v) = &self.verification {
            line.push_str(&format!(" verification {}", tag(&v.status)));
        }
        line.push_str(&format!(" in {:.2} ms", self.timing_ms));
        line
    }
}

/// The serialized name of a unit enum variant.
fn tag<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

pub fn named_levels(instance: &Instance, levels: &LevelFunction) -> BTreeMap<String, usize> {
    instance.object_names().iter().cloned().zip(levels.levels().iter().copied()).collect()
}
