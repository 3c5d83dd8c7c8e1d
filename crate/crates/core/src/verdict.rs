//! Boolean analysis results with machine-readable evidence.

use std::collections::BTreeMap;

use serde::Serialize;

/// Which input of a pairwise check a distinguishing trace belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Evidence {
    None,
    /// A trace reaching the property (e.g. a final composite state).
    Witness { trace: Vec<String> },
    /// A trace in exactly one of the two inputs.
    DistinguishingTrace { trace: Vec<String>, only_in: Side },
    /// The final partition of a successful bisimulation check.
    Relation { blocks: BTreeMap<String, usize> },
    /// Initial states land in different blocks of the final partition.
    Separated {
        left: String,
        right: String,
        splitter: Vec<String>,
        blocks: BTreeMap<String, usize>,
    },
    Deadlock { state: String, trace: Vec<String> },
    /// A reachable state from which no final state is reachable.
    NoFinalPath { state: String, trace: Vec<String> },
    /// A label offered at a reachable product state without counterpart.
    Unmatched {
        state: String,
        service: usize,
        label: String,
        trace: Vec<String>,
    },
    /// Reachable sink states when no final state is reachable.
    Frontier { states: Vec<String> },
    /// A completed send sequence that differs from the specified one.
    Violation { trace: Vec<String>, expected: Vec<String> },
    /// The specified send sequence never completes.
    Unreached { expected: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub relation: String,
    pub holds: bool,
    pub evidence: Evidence,
}

impl Verdict {
    pub fn new(relation: impl Into<String>, holds: bool, evidence: Evidence) -> Self {
        Verdict {
            relation: relation.into(),
            holds,
            evidence,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("verdict serializes");
        s.push('\n');
        s
    }
}
