//! Collaboration diagrams, peer projection, realizability and conformance.
//!
//! A diagram is a totally ordered list of send events between peers. Peers
//! (projected or supplied) are composed and the set of send sequences of
//! completed runs must be exactly the diagram's sequence.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composition::{async_product, sync_product, CompositionError, Mode};
use crate::model::{Label, Lts};
use crate::verdict::{Evidence, Verdict};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub from: String,
    pub msg: String,
    pub seq: usize,
    pub to: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollaborationDiagram {
    pub events: Vec<Event>,
    pub peers: BTreeSet<String>,
}

impl CollaborationDiagram {
    /// Message names in diagram order.
    pub fn sequence(&self) -> Vec<String> {
        self.events.iter().map(|e| e.msg.clone()).collect()
    }

    pub fn validate(&self) -> Result<(), ChoreoError> {
        let invalid = |m: String| Err(ChoreoError::Invalid(m));
        for (i, e) in self.events.iter().enumerate() {
            if e.seq != i + 1 {
                return invalid(format!(
                    "event #{i} has seq {}, expected {} (contiguous from 1)",
                    e.seq,
                    i + 1
                ));
            }
            if e.from == e.to {
                return invalid(format!("event {} is sent by {} to itself", e.seq, e.from));
            }
            if e.msg.is_empty() {
                return invalid(format!("event {} has an empty message name", e.seq));
            }
            for p in [&e.from, &e.to] {
                if !self.peers.contains(p) {
                    return invalid(format!("event {} uses undeclared peer {p}", e.seq));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("diagram serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChoreoError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("invalid diagram: {0}")]
    Invalid(String),
    #[error("unknown peer `{0}`")]
    UnknownPeer(String),
    #[error("no implementation for peer `{0}`")]
    MissingImplementation(String),
    #[error(transparent)]
    Composition(#[from] CompositionError),
}

/// Parses and validates a diagram document.
pub fn parse_diagram(text: &str) -> Result<CollaborationDiagram, ChoreoError> {
    let cd: CollaborationDiagram =
        serde_json::from_str(text).map_err(|e| ChoreoError::Syntax(e.to_string()))?;
    cd.validate()?;
    Ok(cd)
}

/// The linear local protocol of `peer`: `m!` for its sends and `m?` for its
/// receptions, in diagram order, ending in a final state.
pub fn project(cd: &CollaborationDiagram, peer: &str) -> Result<Lts, ChoreoError> {
    if !cd.peers.contains(peer) {
        return Err(ChoreoError::UnknownPeer(peer.to_string()));
    }
    let mut b = Lts::builder("q0");
    let mut n = 0;
    for e in &cd.events {
        let label = if e.from == peer {
            Label::emit(e.msg.clone())
        } else if e.to == peer {
            Label::receive(e.msg.clone())
        } else {
            continue;
        };
        b = b.transition(format!("q{n}"), label, format!("q{}", n + 1));
        n += 1;
    }
    Ok(b.final_state(format!("q{n}")).build().expect("linear projection is valid"))
}

/// Projections of every peer, in peer order.
pub fn projections(cd: &CollaborationDiagram) -> Vec<(String, Lts)> {
    cd.peers
        .iter()
        .map(|p| (p.clone(), project(cd, p).expect("declared peer")))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RealizabilityVerdict {
    pub holds: bool,
    pub mode: Mode,
    /// The specified send sequence.
    pub expected: Vec<String>,
    /// A completed send sequence other than the specified one.
    pub violation: Option<Vec<String>>,
    /// Whether some completed run follows the specified sequence.
    pub specified_reached: bool,
}

#[derive(Serialize)]
struct VerdictDoc<'a> {
    bound: Option<usize>,
    expected: &'a [String],
    holds: bool,
    mode: &'static str,
    specified_reached: bool,
    violation: Option<&'a [String]>,
}

impl RealizabilityVerdict {
    pub fn to_json(&self) -> String {
        let (mode, bound) = match self.mode {
            Mode::Sync => ("sync", None),
            Mode::Async { bound } => ("async", Some(bound)),
        };
        let doc = VerdictDoc {
            bound,
            expected: &self.expected,
            holds: self.holds,
            mode,
            specified_reached: self.specified_reached,
            violation: self.violation.as_deref(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("verdict serializes");
        s.push('\n');
        s
    }

    pub fn to_verdict(&self, relation: &str) -> Verdict {
        let evidence = match (&self.violation, self.specified_reached) {
            (Some(trace), _) => Evidence::Violation {
                trace: trace.clone(),
                expected: self.expected.clone(),
            },
            (None, false) => Evidence::Unreached {
                expected: self.expected.clone(),
            },
            (None, true) => Evidence::Witness {
                trace: self.expected.clone(),
            },
        };
        Verdict::new(relation, self.holds, evidence)
    }
}

fn compose(services: &[Lts], mode: Mode) -> Result<crate::composition::CompositeLts, CompositionError> {
    let mut all = services.to_vec();
    while all.len() < 2 {
        all.push(Lts::builder("idle").final_state("idle").build().expect("valid"));
    }
    match mode {
        Mode::Sync => sync_product(&all),
        Mode::Async { bound } => async_product(&all, bound),
    }
}

// Explores composite states paired with how much of the specified sequence
// the run has followed (`None` once it diverged).
fn check(expected: &[String], services: &[Lts], mode: Mode) -> Result<RealizabilityVerdict, ChoreoError> {
    let c = compose(services, mode)?;
    type Node = (usize, Option<usize>);
    let start: Node = (c.initial(), Some(0));
    let mut parent: BTreeMap<Node, Option<(Node, Option<String>)>> = BTreeMap::from([(start, None)]);
    let mut queue = VecDeque::from([start]);
    let mut violation = None;
    let mut specified_reached = false;
    while let Some(node @ (s, pos)) = queue.pop_front() {
        if c.is_final(s) {
            if pos == Some(expected.len()) {
                specified_reached = true;
            } else {
                violation = Some(node);
                break;
            }
        }
        for t in c.outgoing(s) {
            let sent = t.label.sent_message().map(str::to_string);
            let next_pos = match (&sent, pos) {
                (None, p) => p,
                (Some(m), Some(k)) if expected.get(k) == Some(m) => Some(k + 1),
                (Some(_), _) => None,
            };
            let next = (t.target, next_pos);
            if let std::collections::btree_map::Entry::Vacant(slot) = parent.entry(next) {
                slot.insert(Some((node, sent)));
                queue.push_back(next);
            }
        }
    }
    let violation = violation.map(|mut node| {
        let mut sends = Vec::new();
        while let Some(Some((prev, sent))) = parent.get(&node) {
            sends.extend(sent.clone());
            node = *prev;
        }
        sends.reverse();
        sends
    });
    Ok(RealizabilityVerdict {
        holds: violation.is_none() && specified_reached,
        mode,
        expected: expected.to_vec(),
        violation,
        specified_reached,
    })
}

/// Realizability: do the composed projections complete exactly the
/// diagram's send sequence?
pub fn realizable(cd: &CollaborationDiagram, mode: Mode) -> Result<RealizabilityVerdict, ChoreoError> {
    cd.validate()?;
    let peers: Vec<Lts> = projections(cd).into_iter().map(|(_, l)| l).collect();
    check(&cd.sequence(), &peers, mode)
}

/// Conformance of supplied peer implementations to a diagram.
///
/// Implementations are composed in peer order, followed by any extra ones.
pub fn conformance(
    cd: &CollaborationDiagram,
    impls: &[(String, Lts)],
    mode: Mode,
) -> Result<Verdict, ChoreoError> {
    cd.validate()?;
    let mut ordered = Vec::with_capacity(impls.len());
    for p in &cd.peers {
        let (_, l) = impls
            .iter()
            .find(|(n, _)| n == p)
            .ok_or_else(|| ChoreoError::MissingImplementation(p.clone()))?;
        ordered.push(l.clone());
    }
    for (n, l) in impls {
        if !cd.peers.contains(n) {
            ordered.push(l.clone());
        }
    }
    Ok(check(&cd.sequence(), &ordered, mode)?.to_verdict("conformance"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn labels(l: &Lts) -> Vec<String> {
        l.transitions().iter().map(|t| t.label.to_string()).collect()
    }

    #[test]
    fn projections_follow_the_diagram() {
        let right = corpus::diagram("fig7_right");
        let a = project(&right, "A").unwrap();
        assert_eq!(labels(&a), ["request!", "update?"]);
        assert!(a.is_final("q2") && !a.is_final("q1"));
        let c = project(&corpus::diagram("fig7_left"), "C").unwrap();
        assert_eq!(labels(&c), ["update!"]);
        let mut lone = right.clone();
        lone.peers.insert("Z".into());
        let z = project(&lone, "Z").unwrap();
        assert_eq!(z.states().len(), 1);
        assert!(z.is_final("q0"));
        assert_eq!(project(&right, "nobody"), Err(ChoreoError::UnknownPeer("nobody".into())));
    }

    #[test]
    fn figure_verdicts() {
        let left = corpus::diagram("fig7_left");
        let right = corpus::diagram("fig7_right");
        let v = realizable(&left, Mode::Sync).unwrap();
        assert!(!v.holds);
        assert_eq!(v.violation.as_deref(), Some(&["update".to_string(), "request".to_string()][..]));
        assert!(realizable(&right, Mode::Sync).unwrap().holds);
        let v = realizable(&right, Mode::Async { bound: 1 }).unwrap();
        assert!(!v.holds);
        assert_eq!(v.violation.unwrap(), ["update", "request"]);
    }

    #[test]
    fn single_event_realizable() {
        let cd = parse_diagram(r#"{"peers":["A","B"],"events":[{"seq":1,"from":"A","to":"B","msg":"m"}]}"#).unwrap();
        assert!(realizable(&cd, Mode::Sync).unwrap().holds);
        assert!(realizable(&cd, Mode::Async { bound: 1 }).unwrap().holds);
    }

    #[test]
    fn diagram_validation() {
        let bad_seq = r#"{"peers":["A","B"],"events":[{"seq":2,"from":"A","to":"B","msg":"m"}]}"#;
        assert!(matches!(parse_diagram(bad_seq), Err(ChoreoError::Invalid(_))));
        let self_send = r#"{"peers":["A"],"events":[{"seq":1,"from":"A","to":"A","msg":"m"}]}"#;
        assert!(matches!(parse_diagram(self_send), Err(ChoreoError::Invalid(_))));
        let undeclared = r#"{"peers":["A"],"events":[{"seq":1,"from":"A","to":"B","msg":"m"}]}"#;
        assert!(matches!(parse_diagram(undeclared), Err(ChoreoError::Invalid(_))));
        assert!(matches!(parse_diagram("{"), Err(ChoreoError::Syntax(_))));
    }

    #[test]
    fn conformance_cases() {
        let right = corpus::diagram("fig7_right");
        let mut impls = projections(&right);
        assert!(conformance(&right, &impls, Mode::Sync).unwrap().holds);

        let swapped = Lts::builder("q0")
            .transition("q0", Label::receive("update"), "q1")
            .transition("q1", Label::emit("request"), "q2")
            .final_state("q2")
            .build()
            .unwrap();
        impls[0].1 = swapped;
        let v = conformance(&right, &impls, Mode::Sync).unwrap();
        assert!(!v.holds);
        assert!(matches!(v.evidence, Evidence::Violation { ref trace, .. } if trace == &["update", "request"]));

        let mut extra = projections(&right);
        let b = Lts::builder("q0")
            .transition("q0", Label::receive("request"), "q1")
            .transition("q1", Label::emit("m2"), "q2")
            .final_state("q1")
            .final_state("q2")
            .build()
            .unwrap();
        extra[1].1 = b;
        let a = Lts::builder("q0")
            .transition("q0", Label::emit("request"), "q1")
            .transition("q1", Label::receive("update"), "q2")
            .transition("q2", Label::receive("m2"), "q3")
            .final_state("q2")
            .final_state("q3")
            .build()
            .unwrap();
        extra[0].1 = a;
        let v = conformance(&right, &extra, Mode::Sync).unwrap();
        assert!(!v.holds);
        assert!(matches!(v.evidence, Evidence::Violation { ref trace, .. } if trace.contains(&"m2".to_string())));

        assert_eq!(
            conformance(&right, &impls[1..], Mode::Sync),
            Err(ChoreoError::MissingImplementation("A".into()))
        );
    }

    #[test]
    fn verdict_json_has_mode_and_bound() {
        let v = realizable(&corpus::diagram("fig7_right"), Mode::Async { bound: 1 }).unwrap();
        let j = v.to_json();
        assert!(j.contains("\"mode\": \"async\""));
        assert!(j.contains("\"bound\": 1"));
    }
}
