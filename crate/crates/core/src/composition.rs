//! Synchronous (rendezvous) and bounded asynchronous (mailbox) products.
//!
//! Products are built by deterministic breadth-first exploration: the
//! successors of each state are sorted by (label, target) before new states
//! are numbered, so state numbering and witness traces are reproducible.
//! State 0 is always the initial composite state, and every stored state is
//! reachable from it.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::model::{Direction, Label, Lts, StateId, Transition};
use crate::verdict::{Evidence, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Sync,
    Async { bound: usize },
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Sync => f.write_str("sync"),
            Mode::Async { bound } => write!(f, "async({bound})"),
        }
    }
}

/// Which service pairs may synchronize in a rendezvous product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    /// Any emitter with any receiver.
    Full,
    /// Every interaction involves the hub service.
    Star { hub: usize },
}

impl Topology {
    fn allows(self, emitter: usize, receiver: usize) -> bool {
        match self {
            Topology::Full => true,
            Topology::Star { hub } => emitter == hub || receiver == hub,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompositeState {
    pub locals: Vec<StateId>,
    /// One FIFO mailbox per receiving service; empty in synchronous mode.
    pub mailboxes: Vec<Vec<String>>,
}

impl fmt::Display for CompositeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{}", self.locals.join(","))?;
        if !self.mailboxes.is_empty() {
            let queues: Vec<String> = self
                .mailboxes
                .iter()
                .enumerate()
                .map(|(i, q)| format!("q{i}:[{}]", q.join(",")))
                .collect();
            write!(f, "|{}", queues.join(","))?;
        }
        f.write_str("⟩")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CompositeLabel {
    /// Rendezvous of an emission and a reception.
    Interaction {
        message: String,
        emitter: usize,
        receiver: usize,
    },
    /// Enqueue into the receiver's mailbox.
    Send {
        message: String,
        emitter: usize,
        receiver: usize,
    },
    /// Dequeue the head of the receiver's mailbox.
    Consume { message: String, receiver: usize },
    Internal { service: usize },
}

impl CompositeLabel {
    pub fn message(&self) -> Option<&str> {
        match self {
            CompositeLabel::Interaction { message, .. }
            | CompositeLabel::Send { message, .. }
            | CompositeLabel::Consume { message, .. } => Some(message),
            CompositeLabel::Internal { .. } => None,
        }
    }

    /// The message of a send event: an interaction in sync mode, an enqueue in
    /// async mode.
    pub fn sent_message(&self) -> Option<&str> {
        match self {
            CompositeLabel::Interaction { message, .. } | CompositeLabel::Send { message, .. } => {
                Some(message)
            }
            _ => None,
        }
    }
}

impl fmt::Display for CompositeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompositeLabel::Interaction { message, .. } => f.write_str(message),
            CompositeLabel::Send { message, .. } => write!(f, "{message}!"),
            CompositeLabel::Consume { message, .. } => write!(f, "{message}?"),
            CompositeLabel::Internal { .. } => f.write_str("tau"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Trace(pub Vec<CompositeLabel>);

impl Trace {
    pub fn rendered(&self) -> Vec<String> {
        self.0.iter().map(ToString::to_string).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompositeTransition {
    pub source: usize,
    pub label: CompositeLabel,
    pub target: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompositionError {
    #[error("a product needs at least 2 services, got {0}")]
    TooFewServices(usize),
    #[error("ambiguous-routing: message `{message}` is receivable by services {services:?}")]
    AmbiguousRouting { message: String, services: Vec<usize> },
    #[error("mailbox bound must be positive")]
    ZeroBound,
}

#[derive(Clone, Debug)]
pub struct CompositeLts {
    services: Vec<Lts>,
    mode: Mode,
    states: Vec<CompositeState>,
    index: HashMap<CompositeState, usize>,
    transitions: Vec<CompositeTransition>,
    out: Vec<Vec<usize>>,
    finals: Vec<bool>,
    // BFS discovery edge (transition index) for shortest traces
    parent: Vec<Option<usize>>,
}

impl CompositeLts {
    pub fn services(&self) -> &[Lts] {
        &self.services
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn states(&self) -> &[CompositeState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &CompositeState {
        &self.states[i]
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn index_of(&self, s: &CompositeState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn transitions(&self) -> &[CompositeTransition] {
        &self.transitions
    }

    pub fn outgoing(&self, i: usize) -> impl Iterator<Item = &CompositeTransition> {
        self.out[i].iter().map(move |&t| &self.transitions[t])
    }

    pub fn is_final(&self, i: usize) -> bool {
        self.finals[i]
    }

    pub fn finals(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.states.len()).filter(move |&i| self.finals[i])
    }

    /// Shortest trace from the initial state to state `i`.
    pub fn trace_to(&self, mut i: usize) -> Trace {
        let mut labels = Vec::new();
        while let Some(t) = self.parent[i] {
            let tr = &self.transitions[t];
            labels.push(tr.label.clone());
            i = tr.source;
        }
        labels.reverse();
        Trace(labels)
    }

    /// Per state: can some final state be reached from it?
    pub fn coreachable(&self) -> Vec<bool> {
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); self.states.len()];
        for t in &self.transitions {
            preds[t.target].push(t.source);
        }
        let mut seen = self.finals.clone();
        let mut queue: VecDeque<usize> = self.finals().collect();
        while let Some(s) = queue.pop_front() {
            for &p in &preds[s] {
                if !seen[p] {
                    seen[p] = true;
                    queue.push_back(p);
                }
            }
        }
        seen
    }

    pub fn deadlocks(&self) -> Vec<(CompositeState, Trace)> {
        (0..self.states.len())
            .filter(|&i| self.out[i].is_empty() && !self.finals[i])
            .map(|i| (self.states[i].clone(), self.trace_to(i)))
            .collect()
    }

    pub fn final_reachable(&self) -> Verdict {
        // states are numbered in BFS order, so the first final is the nearest
        match self.finals().next() {
            Some(f) => Verdict::new(
                "final-reachability",
                true,
                Evidence::Witness {
                    trace: self.trace_to(f).rendered(),
                },
            ),
            None => Verdict::new(
                "final-reachability",
                false,
                Evidence::Frontier {
                    states: (0..self.states.len())
                        .filter(|&i| self.out[i].is_empty())
                        .map(|i| self.states[i].to_string())
                        .collect(),
                },
            ),
        }
    }

    /// Deadlock-freeness of the closed system: every reachable state can
    /// reach a final state (which rules out non-final sinks).
    pub fn deadlock_freeness(&self, relation: &str) -> Verdict {
        if let Some((state, trace)) = self.deadlocks().into_iter().next() {
            return Verdict::new(
                relation,
                false,
                Evidence::Deadlock {
                    state: state.to_string(),
                    trace: trace.rendered(),
                },
            );
        }
        let co = self.coreachable();
        if let Some(i) = co.iter().position(|&c| !c) {
            return Verdict::new(
                relation,
                false,
                Evidence::NoFinalPath {
                    state: self.states[i].to_string(),
                    trace: self.trace_to(i).rendered(),
                },
            );
        }
        Verdict::new(relation, true, Evidence::None)
    }

    /// Flattens the product into an ordinary LTS for export.
    ///
    /// Interactions and sends become emissions, consumes become receptions,
    /// internal steps become τ; provenance goes into transition metadata.
    pub fn to_lts(&self) -> (Lts, BTreeMap<Transition, BTreeMap<String, String>>) {
        let names: Vec<String> = self.states.iter().map(ToString::to_string).collect();
        let mut meta: BTreeMap<Transition, BTreeMap<String, String>> = BTreeMap::new();
        let mut transitions = Vec::new();
        for t in &self.transitions {
            let (label, fields): (Label, Vec<(&str, String)>) = match &t.label {
                CompositeLabel::Interaction { message, emitter, receiver } => (
                    Label::emit(message.clone()),
                    vec![("kind", "sync".into()), ("from", emitter.to_string()), ("to", receiver.to_string())],
                ),
                CompositeLabel::Send { message, emitter, receiver } => (
                    Label::emit(message.clone()),
                    vec![("kind", "send".into()), ("from", emitter.to_string()), ("to", receiver.to_string())],
                ),
                CompositeLabel::Consume { message, receiver } => (
                    Label::receive(message.clone()),
                    vec![("kind", "consume".into()), ("to", receiver.to_string())],
                ),
                CompositeLabel::Internal { service } => (
                    Label::Tau,
                    vec![("kind", "internal".into()), ("service", service.to_string())],
                ),
            };
            let tr = Transition::new(names[t.source].clone(), label, names[t.target].clone());
            let entry = meta.entry(tr.clone()).or_default();
            for (k, v) in fields {
                entry
                    .entry(k.to_string())
                    .and_modify(|old| {
                        if *old != v {
                            old.push(';');
                            old.push_str(&v);
                        }
                    })
                    .or_insert(v);
            }
            transitions.push(tr);
        }
        let finals: Vec<String> = self.finals().map(|i| names[i].clone()).collect();
        let lts = Lts::from_parts_unchecked(names.clone(), names[0].clone(), finals, transitions);
        (lts, meta)
    }

    pub fn to_json(&self) -> String {
        let (lts, meta) = self.to_lts();
        crate::model::render_json(&lts, &meta)
    }

    pub fn to_dot(&self) -> String {
        crate::model::render_dot(&self.to_lts().0)
    }
}

fn explore(
    services: &[Lts],
    mode: Mode,
    initial: CompositeState,
    successors: impl Fn(&CompositeState) -> Vec<(CompositeLabel, CompositeState)>,
    is_final: impl Fn(&CompositeState) -> bool,
) -> CompositeLts {
    let mut c = CompositeLts {
        services: services.to_vec(),
        mode,
        states: Vec::new(),
        index: HashMap::new(),
        transitions: Vec::new(),
        out: Vec::new(),
        finals: Vec::new(),
        parent: Vec::new(),
    };
    let add = |c: &mut CompositeLts, s: CompositeState, parent: Option<usize>| -> (usize, bool) {
        if let Some(&i) = c.index.get(&s) {
            return (i, false);
        }
        let i = c.states.len();
        c.finals.push(is_final(&s));
        c.index.insert(s.clone(), i);
        c.states.push(s);
        c.out.push(Vec::new());
        c.parent.push(parent);
        (i, true)
    };
    add(&mut c, initial, None);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let mut succ = successors(&c.states[i]);
        succ.sort();
        succ.dedup();
        for (label, target) in succ {
            let t = c.transitions.len();
            let (j, fresh) = add(&mut c, target, Some(t));
            c.transitions.push(CompositeTransition {
                source: i,
                label,
                target: j,
            });
            c.out[i].push(t);
            if fresh {
                queue.push_back(j);
            }
        }
    }
    c
}

fn all_final(services: &[Lts], s: &CompositeState) -> bool {
    services
        .iter()
        .zip(&s.locals)
        .all(|(l, local)| l.is_final(local))
}

/// Rendezvous product in which any emitter may synchronize with any receiver.
pub fn sync_product(services: &[Lts]) -> Result<CompositeLts, CompositionError> {
    sync_product_with(services, Topology::Full)
}

/// Rendezvous product restricted to the pairs allowed by `topology`.
///
/// Each interaction involves exactly one emitter and one receiver; an
/// emission with several willing receivers yields one transition per
/// receiver. τ moves of each service are independent.
pub fn sync_product_with(
    services: &[Lts],
    topology: Topology,
) -> Result<CompositeLts, CompositionError> {
    if services.len() < 2 {
        return Err(CompositionError::TooFewServices(services.len()));
    }
    let initial = CompositeState {
        locals: services.iter().map(|l| l.initial().to_string()).collect(),
        mailboxes: Vec::new(),
    };
    let successors = |s: &CompositeState| {
        let mut out = Vec::new();
        for (i, l) in services.iter().enumerate() {
            for t in l.outgoing(&s.locals[i]) {
                match &t.label {
                    Label::Tau => {
                        let mut next = s.clone();
                        next.locals[i] = t.to.clone();
                        out.push((CompositeLabel::Internal { service: i }, next));
                    }
                    Label::Message(m) if m.direction == Direction::Emit => {
                        for (j, peer) in services.iter().enumerate() {
                            if j == i || !topology.allows(i, j) {
                                continue;
                            }
                            for r in peer.outgoing(&s.locals[j]) {
                                if t.label.complements(&r.label) {
                                    let mut next = s.clone();
                                    next.locals[i] = t.to.clone();
                                    next.locals[j] = r.to.clone();
                                    out.push((
                                        CompositeLabel::Interaction {
                                            message: m.name.clone(),
                                            emitter: i,
                                            receiver: j,
                                        },
                                        next,
                                    ));
                                }
                            }
                        }
                    }
                    Label::Message(_) => {}
                }
            }
        }
        out
    };
    Ok(explore(
        services,
        Mode::Sync,
        initial,
        successors,
        |s| all_final(services, s),
    ))
}

/// Receiving service of every message name.
pub fn routing(services: &[Lts]) -> Result<BTreeMap<String, usize>, CompositionError> {
    let mut receivers: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (i, l) in services.iter().enumerate() {
        for label in l.alphabet() {
            if let Some(m) = label.as_message() {
                if m.direction == Direction::Receive {
                    receivers.entry(m.name.clone()).or_default().insert(i);
                }
            }
        }
    }
    receivers
        .into_iter()
        .map(|(message, svcs)| {
            if svcs.len() > 1 {
                Err(CompositionError::AmbiguousRouting {
                    message,
                    services: svcs.into_iter().collect(),
                })
            } else {
                let r = *svcs.iter().next().expect("nonempty");
                Ok((message, r))
            }
        })
        .collect()
}

/// Bounded asynchronous product with one FIFO mailbox per receiving service.
///
/// A send enqueues into the receiver's mailbox and is disabled when the
/// mailbox holds `bound` messages; a reception consumes only the head.
/// Sends of messages no service receives are disabled. A composite state is
/// final iff every local state is final and every mailbox is empty.
pub fn async_product(services: &[Lts], bound: usize) -> Result<CompositeLts, CompositionError> {
    if services.len() < 2 {
        return Err(CompositionError::TooFewServices(services.len()));
    }
    if bound == 0 {
        return Err(CompositionError::ZeroBound);
    }
    let routes = routing(services)?;
    let initial = CompositeState {
        locals: services.iter().map(|l| l.initial().to_string()).collect(),
        mailboxes: vec![Vec::new(); services.len()],
    };
    let successors = |s: &CompositeState| {
        let mut out = Vec::new();
        for (i, l) in services.iter().enumerate() {
            for t in l.outgoing(&s.locals[i]) {
                match &t.label {
                    Label::Tau => {
                        let mut next = s.clone();
                        next.locals[i] = t.to.clone();
                        out.push((CompositeLabel::Internal { service: i }, next));
                    }
                    Label::Message(m) if m.direction == Direction::Emit => {
                        let Some(&r) = routes.get(&m.name) else { continue };
                        if s.mailboxes[r].len() >= bound {
                            continue;
                        }
                        let mut next = s.clone();
                        next.locals[i] = t.to.clone();
                        next.mailboxes[r].push(m.name.clone());
                        out.push((
                            CompositeLabel::Send {
                                message: m.name.clone(),
                                emitter: i,
                                receiver: r,
                            },
                            next,
                        ));
                    }
                    Label::Message(m) => {
                        if s.mailboxes[i].first() == Some(&m.name) {
                            let mut next = s.clone();
                            next.locals[i] = t.to.clone();
                            next.mailboxes[i].remove(0);
                            out.push((
                                CompositeLabel::Consume {
                                    message: m.name.clone(),
                                    receiver: i,
                                },
                                next,
                            ));
                        }
                    }
                }
            }
        }
        out
    };
    Ok(explore(
        services,
        Mode::Async { bound },
        initial,
        successors,
        |s| all_final(services, s) && s.mailboxes.iter().all(Vec::is_empty),
    ))
}

/// Reachable non-final sinks, each with a shortest witness trace.
pub fn deadlocks(c: &CompositeLts) -> Vec<(CompositeState, Trace)> {
    c.deadlocks()
}

pub fn final_reachable(c: &CompositeLts) -> Verdict {
    c.final_reachable()
}
