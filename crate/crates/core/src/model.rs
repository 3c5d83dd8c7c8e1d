//! Labelled transition systems for service protocols.
//!
//! An [`Lts`] is the tuple (alphabet, states, initial, finals, transitions).
//! Labels are either the internal action τ or a directed message carrying an
//! ordered list of parameter type names (the symbolic extension). The
//! alphabet is not stored: it is always the set of labels used by
//! transitions, so every value is in normalized form.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque state identifier.
pub type StateId = String;

/// Communication direction of a message label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// `!`
    Emit,
    /// `?`
    Receive,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Emit => Direction::Receive,
            Direction::Receive => Direction::Emit,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Direction::Emit => "!",
            Direction::Receive => "?",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "!" => Some(Direction::Emit),
            "?" => Some(Direction::Receive),
            _ => None,
        }
    }
}

/// A directed message with typed parameters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Message {
    pub name: String,
    pub direction: Direction,
    pub params: Vec<String>,
}

/// Transition label: τ or a directed message.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Tau,
    Message(Message),
}

impl Label {
    pub fn emit(name: impl Into<String>) -> Self {
        Self::message(name, Direction::Emit, Vec::<String>::new())
    }

    pub fn receive(name: impl Into<String>) -> Self {
        Self::message(name, Direction::Receive, Vec::<String>::new())
    }

    pub fn message<P: Into<String>>(
        name: impl Into<String>,
        direction: Direction,
        params: impl IntoIterator<Item = P>,
    ) -> Self {
        Label::Message(Message {
            name: name.into(),
            direction,
            params: params.into_iter().map(Into::into).collect(),
        })
    }

    pub fn is_tau(&self) -> bool {
        matches!(self, Label::Tau)
    }

    pub fn as_message(&self) -> Option<&Message> {
        match self {
            Label::Tau => None,
            Label::Message(m) => Some(m),
        }
    }

    pub fn name(&self) -> Option<&str> {
        self.as_message().map(|m| m.name.as_str())
    }

    pub fn direction(&self) -> Option<Direction> {
        self.as_message().map(|m| m.direction)
    }

    pub fn is_emission(&self) -> bool {
        self.direction() == Some(Direction::Emit)
    }

    pub fn is_reception(&self) -> bool {
        self.direction() == Some(Direction::Receive)
    }

    /// Same message name, opposite directions. Parameters are not compared.
    pub fn complements(&self, other: &Label) -> bool {
        match (self, other) {
            (Label::Message(a), Label::Message(b)) => {
                a.name == b.name && a.direction != b.direction
            }
            _ => false,
        }
    }

    /// The label with its direction flipped; τ is a fixed point.
    pub fn mirrored(&self) -> Label {
        match self {
            Label::Tau => Label::Tau,
            Label::Message(m) => Label::Message(Message {
                name: m.name.clone(),
                direction: m.direction.flip(),
                params: m.params.clone(),
            }),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Tau => f.write_str("tau"),
            Label::Message(m) => {
                write!(f, "{}{}", m.name, m.direction.symbol())?;
                if !m.params.is_empty() {
                    write!(f, "({})", m.params.join(","))?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub from: StateId,
    pub label: Label,
    pub to: StateId,
}

impl Transition {
    pub fn new(from: impl Into<StateId>, label: Label, to: impl Into<StateId>) -> Self {
        Transition {
            from: from.into(),
            label,
            to: to.into(),
        }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -{}-> {}", self.from, self.label, self.to)
    }
}

/// A finite labelled transition system.
///
/// Values built with [`Lts::new`] or [`parse_lts`] satisfy every structural
/// invariant. [`Lts::from_parts_unchecked`] skips the checks so malformed
/// systems can still be handed to [`validate`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Lts {
    states: BTreeSet<StateId>,
    initial: StateId,
    finals: BTreeSet<StateId>,
    // sorted by (from, label, to) and deduplicated
    transitions: Vec<Transition>,
}

impl Lts {
    pub fn new(
        states: impl IntoIterator<Item = StateId>,
        initial: impl Into<StateId>,
        finals: impl IntoIterator<Item = StateId>,
        transitions: impl IntoIterator<Item = Transition>,
    ) -> Result<Self, ModelError> {
        let lts = Self::from_parts_unchecked(states, initial, finals, transitions);
        lts.check()?;
        Ok(lts)
    }

    pub fn from_parts_unchecked(
        states: impl IntoIterator<Item = StateId>,
        initial: impl Into<StateId>,
        finals: impl IntoIterator<Item = StateId>,
        transitions: impl IntoIterator<Item = Transition>,
    ) -> Self {
        let mut transitions: Vec<Transition> = transitions.into_iter().collect();
        transitions.sort();
        transitions.dedup();
        Lts {
            states: states.into_iter().collect(),
            initial: initial.into(),
            finals: finals.into_iter().collect(),
            transitions,
        }
    }

    /// Builder that declares every state it sees.
    pub fn builder(initial: impl Into<StateId>) -> LtsBuilder {
        let initial = initial.into();
        LtsBuilder {
            states: BTreeSet::from([initial.clone()]),
            initial,
            finals: BTreeSet::new(),
            transitions: Vec::new(),
        }
    }

    fn check(&self) -> Result<(), ModelError> {
        match validate(self)
            .into_iter()
            .find(|d| d.severity == Severity::Error)
        {
            None => Ok(()),
            Some(d) => Err(ModelError::Semantic {
                code: d.code,
                message: d.text,
            }),
        }
    }

    pub fn states(&self) -> &BTreeSet<StateId> {
        &self.states
    }

    pub fn initial(&self) -> &str {
        &self.initial
    }

    pub fn finals(&self) -> &BTreeSet<StateId> {
        &self.finals
    }

    pub fn is_final(&self, state: &str) -> bool {
        self.finals.contains(state)
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Outgoing transitions of `state`, in label order.
    pub fn outgoing<'a>(&'a self, state: &str) -> &'a [Transition] {
        let lo = self
            .transitions
            .partition_point(|t| t.from.as_str() < state);
        let hi = self
            .transitions
            .partition_point(|t| t.from.as_str() <= state);
        &self.transitions[lo..hi]
    }

    pub fn alphabet(&self) -> BTreeSet<&Label> {
        self.transitions.iter().map(|t| &t.label).collect()
    }

    pub fn has_tau(&self) -> bool {
        self.transitions.iter().any(|t| t.label.is_tau())
    }

    /// A copy with `transition` removed.
    pub fn without_transition(&self, transition: &Transition) -> Lts {
        let mut out = self.clone();
        out.transitions.retain(|t| t != transition);
        out
    }

    pub fn to_json(&self) -> String {
        render_json(self, &BTreeMap::new())
    }

    pub fn to_dot(&self) -> String {
        render_dot(self)
    }
}

pub struct LtsBuilder {
    states: BTreeSet<StateId>,
    initial: StateId,
    finals: BTreeSet<StateId>,
    transitions: Vec<Transition>,
}

impl LtsBuilder {
    pub fn state(mut self, s: impl Into<StateId>) -> Self {
        self.states.insert(s.into());
        self
    }

    pub fn final_state(mut self, s: impl Into<StateId>) -> Self {
        let s = s.into();
        self.states.insert(s.clone());
        self.finals.insert(s);
        self
    }

    pub fn transition(mut self, from: impl Into<StateId>, label: Label, to: impl Into<StateId>) -> Self {
        let t = Transition::new(from, label, to);
        self.states.insert(t.from.clone());
        self.states.insert(t.to.clone());
        self.transitions.push(t);
        self
    }

    pub fn build(self) -> Result<Lts, ModelError> {
        Lts::new(self.states, self.initial, self.finals, self.transitions)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{code}: {message}")]
    Semantic { code: DiagnosticCode, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// The fixed enumeration of diagnostic codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticCode {
    /// A transition endpoint is not a declared state.
    UnknownState,
    /// The initial state is not declared.
    UnknownInitial,
    /// A final state is not declared.
    UnknownFinal,
    /// No final state.
    EmptyFinals,
    /// A message label has an empty name.
    EmptyMessage,
    /// A label is neither τ nor a well-formed message.
    MalformedLabel,
    /// A state cannot be reached from the initial state.
    UnreachableState,
    /// No final state is reachable from a state.
    NoFinalPath,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::UnknownState => "unknown-state",
            DiagnosticCode::UnknownInitial => "unknown-initial",
            DiagnosticCode::UnknownFinal => "unknown-final",
            DiagnosticCode::EmptyFinals => "empty-finals",
            DiagnosticCode::EmptyMessage => "empty-message",
            DiagnosticCode::MalformedLabel => "malformed-label",
            DiagnosticCode::UnreachableState => "unreachable-state",
            DiagnosticCode::NoFinalPath => "no-final-path",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            DiagnosticCode::UnreachableState | DiagnosticCode::NoFinalPath => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "at", rename_all = "lowercase")]
pub enum Locus {
    Document,
    State(StateId),
    Transition(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    pub locus: Locus,
    pub text: String,
}

impl Diagnostic {
    fn new(code: DiagnosticCode, locus: Locus, text: String) -> Self {
        Diagnostic {
            severity: code.severity(),
            code,
            locus,
            text,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}[{}]: {}", self.code, self.text)
    }
}

/// Checks every structural invariant; never fails.
///
/// Errors come first (document, then transitions in order), followed by
/// reachability warnings in state order.
pub fn validate(l: &Lts) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if !l.states.contains(&l.initial) {
        out.push(Diagnostic::new(
            DiagnosticCode::UnknownInitial,
            Locus::State(l.initial.clone()),
            format!("initial state `{}` is not declared", l.initial),
        ));
    }
    if l.finals.is_empty() {
        out.push(Diagnostic::new(
            DiagnosticCode::EmptyFinals,
            Locus::Document,
            "empty finals".to_string(),
        ));
    }
    for f in l.finals.iter().filter(|f| !l.states.contains(*f)) {
        out.push(Diagnostic::new(
            DiagnosticCode::UnknownFinal,
            Locus::State(f.clone()),
            format!("final state `{f}` is not declared"),
        ));
    }
    for t in &l.transitions {
        for end in [&t.from, &t.to] {
            if !l.states.contains(end) {
                out.push(Diagnostic::new(
                    DiagnosticCode::UnknownState,
                    Locus::Transition(t.to_string()),
                    format!("transition `{t}` references undeclared state `{end}`"),
                ));
            }
        }
        if let Label::Message(m) = &t.label {
            if m.name.is_empty() {
                out.push(Diagnostic::new(
                    DiagnosticCode::EmptyMessage,
                    Locus::Transition(t.to_string()),
                    format!("transition `{t}` has an empty message name"),
                ));
            }
        }
    }
    if out.iter().any(|d| d.severity == Severity::Error) {
        return out;
    }

    let forward = reachable_from(l, [l.initial.as_str()], false);
    let backward = reachable_from(l, l.finals.iter().map(String::as_str), true);
    for s in &l.states {
        if !forward.contains(s.as_str()) {
            out.push(Diagnostic::new(
                DiagnosticCode::UnreachableState,
                Locus::State(s.clone()),
                format!("state `{s}` is unreachable from `{}`", l.initial),
            ));
        }
    }
    for s in &l.states {
        if !backward.contains(s.as_str()) {
            out.push(Diagnostic::new(
                DiagnosticCode::NoFinalPath,
                Locus::State(s.clone()),
                format!("no final state is reachable from `{s}`"),
            ));
        }
    }
    out
}

fn reachable_from<'a>(
    l: &'a Lts,
    seeds: impl IntoIterator<Item = &'a str>,
    backward: bool,
) -> BTreeSet<&'a str> {
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for t in &l.transitions {
        let (a, b) = if backward { (&t.to, &t.from) } else { (&t.from, &t.to) };
        adj.entry(a.as_str()).or_default().push(b.as_str());
    }
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut queue: VecDeque<&str> = VecDeque::new();
    for s in seeds {
        if seen.insert(s) {
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        for &n in adj.get(s).into_iter().flatten() {
            if seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen
}

/// Flips every message direction; τ is unchanged.
pub fn mirror(l: &Lts) -> Lts {
    Lts {
        states: l.states.clone(),
        initial: l.initial.clone(),
        finals: l.finals.clone(),
        transitions: {
            let mut ts: Vec<Transition> = l
                .transitions
                .iter()
                .map(|t| Transition::new(t.from.clone(), t.label.mirrored(), t.to.clone()))
                .collect();
            ts.sort();
            ts
        },
    }
}

/// Removes τ transitions by folding τ-prefixes into observable moves.
///
/// Every observable move `s' -a-> t` of a state `s'` in the τ-closure of `s`
/// becomes `s -a-> t`; `s` is final when its τ-closure contains a final
/// state. States that are no longer reachable are dropped. τ-free inputs are
/// returned unchanged.
pub fn tau_reduce(l: &Lts) -> Lts {
    tau_reduce_annotated::<()>(l, &BTreeMap::new()).0
}

/// [`tau_reduce`] carrying per-transition annotations onto the folded moves.
pub(crate) fn tau_reduce_annotated<A: Clone + Ord>(
    l: &Lts,
    annotations: &BTreeMap<Transition, BTreeSet<A>>,
) -> (Lts, BTreeMap<Transition, BTreeSet<A>>) {
    if !l.has_tau() {
        return (l.clone(), annotations.clone());
    }
    let closure = |s: &str| -> BTreeSet<String> {
        let mut seen = BTreeSet::from([s.to_string()]);
        let mut stack = vec![s.to_string()];
        while let Some(x) = stack.pop() {
            for t in l.outgoing(&x).iter().filter(|t| t.label.is_tau()) {
                if seen.insert(t.to.clone()) {
                    stack.push(t.to.clone());
                }
            }
        }
        seen
    };

    let mut transitions = BTreeSet::new();
    let mut finals = BTreeSet::new();
    let mut notes: BTreeMap<Transition, BTreeSet<A>> = BTreeMap::new();
    for s in &l.states {
        let cl = closure(s);
        if cl.iter().any(|x| l.is_final(x)) {
            finals.insert(s.clone());
        }
        for x in &cl {
            for t in l.outgoing(x).iter().filter(|t| !t.label.is_tau()) {
                let folded = Transition::new(s.clone(), t.label.clone(), t.to.clone());
                if let Some(a) = annotations.get(t) {
                    notes.entry(folded.clone()).or_default().extend(a.iter().cloned());
                }
                transitions.insert(folded);
            }
        }
    }

    let raw = Lts::from_parts_unchecked(l.states.clone(), l.initial.clone(), finals, transitions);
    let keep = reachable_from(&raw, [raw.initial.as_str()], false);
    let keep: BTreeSet<String> = keep.into_iter().map(str::to_string).collect();
    let reduced = Lts {
        states: keep.clone(),
        initial: raw.initial.clone(),
        finals: raw.finals.intersection(&keep).cloned().collect(),
        transitions: raw
            .transitions
            .iter()
            .filter(|t| keep.contains(&t.from))
            .cloned()
            .collect(),
    };
    notes.retain(|t, _| keep.contains(&t.from));
    (reduced, notes)
}

// ---------------------------------------------------------------------------
// JSON document format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc {
    finals: Vec<String>,
    initial: String,
    states: Vec<String>,
    transitions: Vec<RawTransition>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransition {
    from: String,
    label: RawLabel,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, String>,
    to: String,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawLabel {
    #[serde(skip_serializing_if = "Option::is_none")]
    dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    msg: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<bool>,
}

impl RawLabel {
    fn from_label(l: &Label) -> Self {
        match l {
            Label::Tau => RawLabel {
                tau: Some(true),
                ..Default::default()
            },
            Label::Message(m) => RawLabel {
                dir: Some(m.direction.symbol().to_string()),
                msg: Some(m.name.clone()),
                params: Some(m.params.clone()),
                tau: None,
            },
        }
    }

    fn into_label(self) -> Result<Label, String> {
        match (self.tau, self.msg, self.dir, self.params) {
            (Some(true), None, None, None) => Ok(Label::Tau),
            (None, Some(msg), Some(dir), params) => {
                let direction = Direction::from_symbol(&dir)
                    .ok_or_else(|| format!("direction must be \"!\" or \"?\", got {dir:?}"))?;
                Ok(Label::Message(Message {
                    name: msg,
                    direction,
                    params: params.unwrap_or_default(),
                }))
            }
            _ => Err("label must be {\"tau\":true} or {\"msg\":..,\"dir\":..}".to_string()),
        }
    }
}

/// Parses a JSON document without semantic checks.
///
/// Transition `meta` objects are accepted and ignored.
pub fn parse_lts_unchecked(text: &str) -> Result<Lts, ModelError> {
    let raw: RawDoc = serde_json::from_str(text).map_err(|e| ModelError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut transitions = Vec::with_capacity(raw.transitions.len());
    for (i, t) in raw.transitions.into_iter().enumerate() {
        let label = t.label.into_label().map_err(|message| ModelError::Semantic {
            code: DiagnosticCode::MalformedLabel,
            message: format!("transition #{i}: {message}"),
        })?;
        transitions.push(Transition::new(t.from, label, t.to));
    }
    Ok(Lts::from_parts_unchecked(
        raw.states,
        raw.initial,
        raw.finals,
        transitions,
    ))
}

/// Parses and semantically checks a canonical LTS document.
pub fn parse_lts(text: &str) -> Result<Lts, ModelError> {
    let lts = parse_lts_unchecked(text)?;
    lts.check()?;
    Ok(lts)
}

pub(crate) fn render_json(l: &Lts, meta: &BTreeMap<Transition, BTreeMap<String, String>>) -> String {
    let doc = RawDoc {
        finals: l.finals.iter().cloned().collect(),
        initial: l.initial.clone(),
        states: l.states.iter().cloned().collect(),
        transitions: l
            .transitions
            .iter()
            .map(|t| RawTransition {
                from: t.from.clone(),
                label: RawLabel::from_label(&t.label),
                meta: meta.get(t).cloned().unwrap_or_default(),
                to: t.to.clone(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("LTS document serializes");
    s.push('\n');
    s
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub(crate) fn render_dot(l: &Lts) -> String {
    let mut out = String::from("digraph lts {\n  rankdir=LR;\n  __start [shape=point];\n");
    out.push_str(&format!("  __start -> \"{}\";\n", dot_escape(&l.initial)));
    for s in &l.states {
        let shape = if l.is_final(s) { "doublecircle" } else { "circle" };
        out.push_str(&format!("  \"{}\" [shape={shape}];\n", dot_escape(s)));
    }
    for t in &l.transitions {
        out.push_str(&format!(
            "  \"{}\" -> \"{}\" [label=\"{}\"];\n",
            dot_escape(&t.from),
            dot_escape(&t.to),
            dot_escape(&t.label.to_string())
        ));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig4_s2_text() -> &'static str {
        r#"{"states":["u0","u1","u2"],"initial":"u0","finals":["u2"],
            "transitions":[
              {"from":"u0","label":{"msg":"a","dir":"?"},"to":"u1"},
              {"from":"u1","label":{"msg":"c","dir":"!","params":[]},"to":"u2"}]}"#
    }

    #[test]
    fn parses_fig4_s2() {
        let l = parse_lts(fig4_s2_text()).unwrap();
        assert_eq!(l.states().len(), 3);
        assert_eq!(l.transitions().len(), 2);
        assert!(validate(&l).is_empty());
    }

    #[test]
    fn empty_finals_rejected() {
        let err = parse_lts(r#"{"states":["s0"],"initial":"s0","finals":[],"transitions":[]}"#)
            .unwrap_err();
        assert!(matches!(
            err,
            ModelError::Semantic { code: DiagnosticCode::EmptyFinals, .. }
        ));
        assert!(err.to_string().contains("empty finals"));
    }

    #[test]
    fn single_state_document() {
        let l = parse_lts(r#"{"states":["s0"],"initial":"s0","finals":["s0"],"transitions":[]}"#)
            .unwrap();
        assert_eq!(l.states().len(), 1);
        assert!(l.is_final("s0"));
        assert!(validate(&l).is_empty());
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_lts("{\"states\": [\n  \"s0\",, ]}").unwrap_err();
        match err {
            ModelError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_state_is_an_error() {
        let l = Lts::from_parts_unchecked(
            ["s0".to_string()],
            "s0",
            ["s0".to_string()],
            [Transition::new("s0", Label::emit("a"), "s9")],
        );
        let d = validate(&l);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, DiagnosticCode::UnknownState);
        assert_eq!(d[0].severity, Severity::Error);
        assert!(parse_lts(&l.to_json()).is_err());
    }

    #[test]
    fn isolated_state_warns_unreachable() {
        let l = Lts::builder("s0")
            .final_state("s0")
            .final_state("lonely")
            .build()
            .unwrap();
        let d = validate(&l);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, DiagnosticCode::UnreachableState);
        assert_eq!(d[0].locus, Locus::State("lonely".into()));
    }

    #[test]
    fn malformed_label_rejected() {
        let text = r#"{"states":["s0"],"initial":"s0","finals":["s0"],
            "transitions":[{"from":"s0","label":{"tau":true,"msg":"a"},"to":"s0"}]}"#;
        assert!(matches!(
            parse_lts(text),
            Err(ModelError::Semantic { code: DiagnosticCode::MalformedLabel, .. })
        ));
    }

    #[test]
    fn mirror_flips_directions() {
        let l = parse_lts(fig4_s2_text()).unwrap();
        let m = mirror(&l);
        let labels: Vec<String> = m.transitions().iter().map(|t| t.label.to_string()).collect();
        assert_eq!(labels, ["a!", "c?"]);
        assert_eq!(mirror(&m), l);
    }

    #[test]
    fn mirror_fixes_tau() {
        let l = Lts::builder("s0")
            .transition("s0", Label::Tau, "s1")
            .final_state("s1")
            .build()
            .unwrap();
        assert_eq!(mirror(&l), l);
    }

    #[test]
    fn tau_reduce_folds_internal_choice() {
        let l = Lts::builder("s0")
            .transition("s0", Label::emit("a"), "s2")
            .transition("s0", Label::Tau, "s3")
            .transition("s3", Label::emit("b"), "s4")
            .final_state("s2")
            .final_state("s4")
            .build()
            .unwrap();
        let r = tau_reduce(&l);
        assert!(!r.has_tau());
        let init: Vec<String> = r.outgoing("s0").iter().map(|t| t.label.to_string()).collect();
        assert_eq!(init, ["a!", "b!"]);
        assert!(!r.states().contains("s3"));
        assert_eq!(tau_reduce(&r), r);
    }

    #[test]
    fn tau_reduce_identity_on_tau_free() {
        let l = parse_lts(fig4_s2_text()).unwrap();
        assert_eq!(tau_reduce(&l), l);
    }

    #[test]
    fn tau_self_loop_collapses() {
        let l = Lts::builder("s0")
            .final_state("s0")
            .transition("s0", Label::Tau, "s0")
            .build()
            .unwrap();
        let r = tau_reduce(&l);
        assert_eq!(r.states().len(), 1);
        assert!(r.transitions().is_empty());
        assert!(r.is_final("s0"));
    }

    #[test]
    fn tau_path_to_final_marks_final() {
        let l = Lts::builder("s0")
            .transition("s0", Label::emit("a"), "s1")
            .transition("s1", Label::Tau, "s2")
            .final_state("s2")
            .build()
            .unwrap();
        let r = tau_reduce(&l);
        assert!(r.is_final("s1"));
    }

    #[test]
    fn dot_marks_finals() {
        let l = parse_lts(fig4_s2_text()).unwrap();
        let dot = l.to_dot();
        assert!(dot.contains("\"u2\" [shape=doublecircle]"));
        assert!(dot.contains("\"u0\" [shape=circle]"));
        assert!(dot.contains("[label=\"c!\"]"));
    }

    #[test]
    fn json_is_canonical() {
        let l = parse_lts(fig4_s2_text()).unwrap();
        let json = l.to_json();
        assert_eq!(parse_lts(&json).unwrap().to_json(), json);
        let keys: Vec<usize> = ["\"finals\"", "\"initial\"", "\"states\"", "\"transitions\""]
            .iter()
            .map(|k| json.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }
}
