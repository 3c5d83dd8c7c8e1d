//! Adaptation contracts and adaptor synthesis.
//!
//! A contract is a list of synchronization vectors. Each vector relates
//! messages of different services, with variables standing for the data
//! exchanged. The synthesized adaptor sits between the services: it receives
//! every message a service emits and emits every message a service receives,
//! so services never talk to each other directly.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::composition::{sync_product_with, Topology};
use crate::model::{render_dot, render_json, tau_reduce_annotated, Direction, Label, Lts, StateId, Transition};
use crate::verdict::Verdict;

/// One `service:message` entry of a vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VectorEntry {
    pub service: String,
    pub message: String,
    /// Direction from the service's point of view.
    pub direction: Direction,
    pub vars: Vec<String>,
}

impl fmt::Display for VectorEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}{}{}", self.service, self.message, self.direction.symbol(), self.vars.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vector {
    pub name: String,
    pub entries: Vec<VectorEntry>,
}

impl Vector {
    pub fn entry(&self, service: &str) -> Option<&VectorEntry> {
        self.entries.iter().find(|e| e.service == service)
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let entries: Vec<String> = self.entries.iter().map(ToString::to_string).collect();
        write!(f, "{} = <{}>", self.name, entries.join("; "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contract {
    pub services: Vec<String>,
    pub vectors: Vec<Vector>,
}

impl Contract {
    /// The same contract without the named vector.
    pub fn without_vector(&self, name: &str) -> Contract {
        Contract {
            services: self.services.clone(),
            vectors: self.vectors.iter().filter(|v| v.name != name).cloned().collect(),
        }
    }
}

impl fmt::Display for Contract {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "services: {}", self.services.join(", "))?;
        for v in &self.vectors {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContractError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("vector {vector} names service `{service}` more than once")]
    DuplicateService { vector: String, service: String },
    #[error("vector {vector} uses undeclared service `{service}`")]
    UndeclaredService { vector: String, service: String },
    #[error("vector {0} is defined more than once")]
    DuplicateVector(String),
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '.')
}

fn parse_entry(text: &str, line: usize) -> Result<VectorEntry, ContractError> {
    let syntax = |message: String| ContractError::Syntax { line, message };
    let (service, rest) = text
        .split_once(':')
        .ok_or_else(|| syntax(format!("entry `{text}` lacks `service:`")))?;
    let service = service.trim();
    let rest = rest.trim();
    let pos = rest
        .find(['!', '?'])
        .ok_or_else(|| syntax(format!("entry `{text}` lacks a direction `!` or `?`")))?;
    let message = rest[..pos].trim();
    let direction = Direction::from_symbol(&rest[pos..pos + 1]).expect("matched direction");
    let vars_text = rest[pos + 1..].trim();
    let vars: Vec<String> = if vars_text.is_empty() {
        Vec::new()
    } else {
        vars_text.split(',').map(|v| v.trim().to_string()).collect()
    };
    if !is_ident(service) {
        return Err(syntax(format!("bad service id `{service}`")));
    }
    if !is_ident(message) {
        return Err(syntax(format!("bad message name `{message}`")));
    }
    if let Some(v) = vars.iter().find(|v| !is_ident(v)) {
        return Err(syntax(format!("bad variable `{v}` in `{text}`")));
    }
    Ok(VectorEntry {
        service: service.to_string(),
        message: message.to_string(),
        direction,
        vars,
    })
}

/// Parses a contract.
///
/// One vector per line, `V1 = <s:req?X; c:request!X>`. An optional
/// `services: s, c` line fixes the service order; without it services are
/// declared in order of first use. `#` starts a comment.
pub fn parse_contract(text: &str) -> Result<Contract, ContractError> {
    let mut declared: Option<Vec<String>> = None;
    let mut vectors: Vec<(usize, Vector)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let syntax = |message: String| ContractError::Syntax { line, message };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(list) = content.strip_prefix("services:") {
            if declared.is_some() {
                return Err(syntax("second `services:` line".into()));
            }
            let ids: Vec<String> = list.split(',').map(|s| s.trim().to_string()).collect();
            if let Some(bad) = ids.iter().find(|s| !is_ident(s)) {
                return Err(syntax(format!("bad service id `{bad}`")));
            }
            declared = Some(ids);
            continue;
        }
        let (name, body) = content
            .split_once('=')
            .ok_or_else(|| syntax(format!("expected `NAME = <...>`, got `{content}`")))?;
        let name = name.trim();
        if !is_ident(name) {
            return Err(syntax(format!("bad vector name `{name}`")));
        }
        let body = body.trim();
        let inner = body
            .strip_prefix('<')
            .and_then(|b| b.strip_suffix('>'))
            .ok_or_else(|| syntax(format!("vector body must be `<...>`, got `{body}`")))?;
        if inner.trim().is_empty() {
            return Err(syntax(format!("vector {name} is empty")));
        }
        let entries = inner
            .split(';')
            .map(|e| parse_entry(e.trim(), line))
            .collect::<Result<Vec<_>, _>>()?;
        vectors.push((line, Vector { name: name.to_string(), entries }));
    }

    let mut names = BTreeSet::new();
    let mut first_use = Vec::new();
    for (_, v) in &vectors {
        if !names.insert(v.name.clone()) {
            return Err(ContractError::DuplicateVector(v.name.clone()));
        }
        let mut seen = BTreeSet::new();
        for e in &v.entries {
            if !seen.insert(&e.service) {
                return Err(ContractError::DuplicateService {
                    vector: v.name.clone(),
                    service: e.service.clone(),
                });
            }
            if !first_use.contains(&e.service) {
                first_use.push(e.service.clone());
            }
        }
    }
    let services = match declared {
        Some(ids) => {
            for (_, v) in &vectors {
                if let Some(e) = v.entries.iter().find(|e| !ids.contains(&e.service)) {
                    return Err(ContractError::UndeclaredService {
                        vector: v.name.clone(),
                        service: e.service.clone(),
                    });
                }
            }
            ids
        }
        None => first_use,
    };
    Ok(Contract {
        services,
        vectors: vectors.into_iter().map(|(_, v)| v).collect(),
    })
}

/// Which vector entry an adaptor transition realizes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Annotation {
    pub vector: String,
    pub service: String,
    pub vars: Vec<String>,
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.vector, self.service)?;
        if !self.vars.is_empty() {
            write!(f, "({})", self.vars.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptorLts {
    pub lts: Lts,
    pub annotations: BTreeMap<Transition, BTreeSet<Annotation>>,
}

impl AdaptorLts {
    fn meta(&self) -> BTreeMap<Transition, BTreeMap<String, String>> {
        self.annotations
            .iter()
            .map(|(t, notes)| {
                let join = |f: &dyn Fn(&Annotation) -> String| {
                    notes.iter().map(f).collect::<Vec<_>>().join(";")
                };
                let mut m = BTreeMap::new();
                m.insert("vector".to_string(), join(&|a| a.vector.clone()));
                m.insert("service".to_string(), join(&|a| a.service.clone()));
                if notes.iter().any(|a| !a.vars.is_empty()) {
                    m.insert("vars".to_string(), join(&|a| a.vars.join(",")));
                }
                (t.clone(), m)
            })
            .collect()
    }

    /// LTS JSON with vector annotations in transition `meta`.
    pub fn to_json(&self) -> String {
        render_json(&self.lts, &self.meta())
    }

    pub fn to_dot(&self) -> String {
        render_dot(&self.lts)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdaptError {
    #[error("unadaptable: no behaviour of the adaptor leads every service to a final state")]
    Unadaptable,
    #[error("unknown service `{0}`")]
    UnknownService(String),
    #[error("vector {vector}: `{entry}` is not in the alphabet of service `{service}`")]
    UnknownMessage {
        vector: String,
        service: String,
        entry: String,
    },
    #[error("vector {vector}: variable `{var}` is emitted but never received")]
    UnboundVariable { vector: String, var: String },
}

impl AdaptError {
    pub fn kind(&self) -> &'static str {
        match self {
            AdaptError::Unadaptable => "unadaptable",
            AdaptError::UnknownService(_) => "unknown-service",
            AdaptError::UnknownMessage { .. } => "unknown-message",
            AdaptError::UnboundVariable { .. } => "unbound-variable",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Global {
    locals: Vec<StateId>,
    // entries already executed by the running instance of each vector
    progress: Vec<BTreeSet<usize>>,
}

fn check_contract(services: &[(String, Lts)], contract: &Contract) -> Result<Vec<Vec<usize>>, AdaptError> {
    let index: BTreeMap<&str, usize> = services
        .iter()
        .enumerate()
        .map(|(i, (n, _))| (n.as_str(), i))
        .collect();
    for s in &contract.services {
        if !index.contains_key(s.as_str()) {
            return Err(AdaptError::UnknownService(s.clone()));
        }
    }
    let mut owners = Vec::new();
    for v in &contract.vectors {
        let mut row = Vec::new();
        for e in &v.entries {
            let i = *index
                .get(e.service.as_str())
                .ok_or_else(|| AdaptError::UnknownService(e.service.clone()))?;
            let known = services[i].1.alphabet().iter().any(|l| {
                l.name() == Some(e.message.as_str()) && l.direction() == Some(e.direction)
            });
            if !known {
                return Err(AdaptError::UnknownMessage {
                    vector: v.name.clone(),
                    service: e.service.clone(),
                    entry: e.to_string(),
                });
            }
            row.push(i);
        }
        // the adaptor receives what services emit and forwards it
        let received: BTreeSet<&String> = v
            .entries
            .iter()
            .filter(|e| e.direction == Direction::Emit)
            .flat_map(|e| &e.vars)
            .collect();
        for e in v.entries.iter().filter(|e| e.direction == Direction::Receive) {
            if let Some(var) = e.vars.iter().find(|x| !received.contains(x)) {
                return Err(AdaptError::UnboundVariable {
                    vector: v.name.clone(),
                    var: var.clone(),
                });
            }
        }
        owners.push(row);
    }
    Ok(owners)
}

/// Synthesizes an adaptor for `services` (keyed by contract service ids).
///
/// The adaptor explores every interleaving of vector entries permitted by
/// the services: within a vector all service emissions are relayed before any
/// forwarding emission, and each vector runs one instance at a time.
/// States that cannot lead to all services being final (with no vector half
/// done) are pruned, then τ moves of the services are folded away.
pub fn synthesize_adaptor(
    services: &[(String, Lts)],
    contract: &Contract,
) -> Result<AdaptorLts, AdaptError> {
    let owners = check_contract(services, contract)?;
    let ltss: Vec<&Lts> = services.iter().map(|(_, l)| l).collect();
    let vectors = &contract.vectors;

    let initial = Global {
        locals: ltss.iter().map(|l| l.initial().to_string()).collect(),
        progress: vec![BTreeSet::new(); vectors.len()],
    };
    let is_final = |g: &Global| {
        g.progress.iter().all(BTreeSet::is_empty)
            && ltss.iter().zip(&g.locals).all(|(l, s)| l.is_final(s))
    };
    let successors = |g: &Global| {
        let mut out: Vec<(Label, Option<Annotation>, Global)> = Vec::new();
        for (i, l) in ltss.iter().enumerate() {
            for t in l.outgoing(&g.locals[i]).iter().filter(|t| t.label.is_tau()) {
                let mut next = g.clone();
                next.locals[i] = t.to.clone();
                out.push((Label::Tau, None, next));
            }
        }
        for (vi, v) in vectors.iter().enumerate() {
            let done = &g.progress[vi];
            let relayed = v
                .entries
                .iter()
                .enumerate()
                .all(|(k, e)| e.direction == Direction::Receive || done.contains(&k));
            for (k, e) in v.entries.iter().enumerate() {
                if done.contains(&k) || (e.direction == Direction::Receive && !relayed) {
                    continue;
                }
                let svc = owners[vi][k];
                for t in ltss[svc].outgoing(&g.locals[svc]) {
                    if t.label.name() != Some(e.message.as_str()) || t.label.direction() != Some(e.direction) {
                        continue;
                    }
                    let mut next = g.clone();
                    next.locals[svc] = t.to.clone();
                    next.progress[vi].insert(k);
                    if next.progress[vi].len() == v.entries.len() {
                        next.progress[vi].clear();
                    }
                    let note = Annotation {
                        vector: v.name.clone(),
                        service: services[svc].0.clone(),
                        vars: e.vars.clone(),
                    };
                    out.push((t.label.mirrored(), Some(note), next));
                }
            }
        }
        out.sort();
        out.dedup();
        out
    };

    let mut states = vec![initial.clone()];
    let mut index = BTreeMap::from([(initial, 0usize)]);
    let mut edges: Vec<(usize, Label, Option<Annotation>, usize)> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for (label, note, next) in successors(&states[i].clone()) {
            let j = match index.get(&next) {
                Some(&j) => j,
                None => {
                    let j = states.len();
                    index.insert(next.clone(), j);
                    states.push(next);
                    queue.push_back(j);
                    j
                }
            };
            edges.push((i, label, note, j));
        }
    }

    // deadlock suppression
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); states.len()];
    for (s, _, _, t) in &edges {
        preds[*t].push(*s);
    }
    let mut live: Vec<bool> = states.iter().map(&is_final).collect();
    let mut queue: VecDeque<usize> = (0..states.len()).filter(|&i| live[i]).collect();
    while let Some(s) = queue.pop_front() {
        for &p in &preds[s] {
            if !live[p] {
                live[p] = true;
                queue.push_back(p);
            }
        }
    }
    if !live[0] {
        return Err(AdaptError::Unadaptable);
    }

    let name = |i: usize| format!("g{i}");
    let mut annotations: BTreeMap<Transition, BTreeSet<Annotation>> = BTreeMap::new();
    let mut transitions = Vec::new();
    for (s, label, note, t) in edges {
        if !(live[s] && live[t]) {
            continue;
        }
        let tr = Transition::new(name(s), label, name(t));
        if let Some(n) = note {
            annotations.entry(tr.clone()).or_default().insert(n);
        }
        transitions.push(tr);
    }
    let raw = Lts::from_parts_unchecked(
        (0..states.len()).filter(|&i| live[i]).map(name),
        name(0),
        (0..states.len()).filter(|&i| is_final(&states[i])).map(name),
        transitions,
    );
    let (reduced, annotations) = tau_reduce_annotated(&raw, &annotations);
    Ok(renumber(&reduced, &annotations))
}

// names states a0, a1, ... in breadth-first order
fn renumber(l: &Lts, annotations: &BTreeMap<Transition, BTreeSet<Annotation>>) -> AdaptorLts {
    let mut names: BTreeMap<&str, String> = BTreeMap::new();
    let mut order = VecDeque::from([l.initial()]);
    names.insert(l.initial(), "a0".to_string());
    while let Some(s) = order.pop_front() {
        for t in l.outgoing(s) {
            if !names.contains_key(t.to.as_str()) {
                names.insert(t.to.as_str(), format!("a{}", names.len()));
                order.push_back(t.to.as_str());
            }
        }
    }
    let rename = |t: &Transition| Transition::new(names[t.from.as_str()].clone(), t.label.clone(), names[t.to.as_str()].clone());
    let lts = Lts::from_parts_unchecked(
        names.values().cloned(),
        "a0".to_string(),
        l.finals().iter().filter_map(|f| names.get(f.as_str()).cloned()),
        l.transitions().iter().map(rename),
    );
    let annotations = annotations.iter().map(|(t, a)| (rename(t), a.clone())).collect();
    AdaptorLts { lts, annotations }
}

/// Checks the closed system formed by `services` and `adaptor`.
///
/// All interactions go through the adaptor. Holds iff no reachable state is
/// a deadlock and every reachable state can still reach a final state.
pub fn verify_adaptation(services: &[Lts], adaptor: &Lts) -> Verdict {
    let mut all = services.to_vec();
    if all.is_empty() {
        all.push(Lts::builder("idle").final_state("idle").build().expect("valid"));
    }
    all.push(adaptor.clone());
    let hub = all.len() - 1;
    sync_product_with(&all, Topology::Star { hub })
        .expect("at least two services")
        .deadlock_freeness("adaptation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::model::validate;

    #[test]
    fn parses_paper_vectors() {
        let c = parse_contract("V1 = <s:req?X; c:request!X>\nV3 = <s:halt?>").unwrap();
        assert_eq!(c.services, ["s", "c"]);
        assert_eq!(c.vectors[0].entries.len(), 2);
        assert_eq!(c.vectors[0].entries[0].vars, ["X"]);
        assert_eq!(c.vectors[0].entries[1].vars, ["X"]);
        assert_eq!(c.vectors[0].entries[1].direction, Direction::Emit);
        assert_eq!(c.vectors[1].entries.len(), 1);
        assert!(c.vectors[1].entries[0].vars.is_empty());
        let sql = corpus::sql_contract();
        assert_eq!(sql.vectors[1].entries[0].vars, ["Y", "Z"]);
        assert_eq!(parse_contract(&sql.to_string()).unwrap(), sql);
    }

    #[test]
    fn contract_errors() {
        assert!(matches!(
            parse_contract("V1 = <s:a!; s:b?>"),
            Err(ContractError::DuplicateService { .. })
        ));
        assert!(matches!(
            parse_contract("services: s\nV1 = <s:a!; c:a?>"),
            Err(ContractError::UndeclaredService { .. })
        ));
        assert!(matches!(
            parse_contract("V1 = <s:a!>\nV1 = <s:b!>"),
            Err(ContractError::DuplicateVector(_))
        ));
        assert!(matches!(parse_contract("V1 = s:a!"), Err(ContractError::Syntax { line: 1, .. })));
        assert!(matches!(parse_contract("\nV1 = <s:a>"), Err(ContractError::Syntax { line: 2, .. })));
        assert!(matches!(parse_contract("V1 = <>"), Err(ContractError::Syntax { .. })));
    }

    #[test]
    fn sql_adaptor() {
        let services = corpus::sql_services();
        let a = synthesize_adaptor(&services, &corpus::sql_contract()).unwrap();
        assert!(!a.lts.has_tau());
        assert!(validate(&a.lts).is_empty(), "{:?}", validate(&a.lts));
        let labels: BTreeSet<String> = a.lts.alphabet().iter().map(|l| l.to_string()).collect();
        for l in ["request?(Query)", "req!(Query)", "result?(Status,Data)", "request!(Data)", "halt!"] {
            assert!(labels.contains(l), "{l} missing from {labels:?}");
        }
        let ltss: Vec<Lts> = services.into_iter().map(|(_, l)| l).collect();
        assert!(verify_adaptation(&ltss, &a.lts).holds);
        let first = &a.lts.outgoing("a0")[0];
        assert_eq!(first.label.to_string(), "request?(Query)");
        assert_eq!(a.annotations[first].iter().next().unwrap().vector, "V1");
    }

    #[test]
    fn dropping_reply_vector_is_unadaptable() {
        let c = corpus::sql_contract().without_vector("V2");
        assert_eq!(synthesize_adaptor(&corpus::sql_services(), &c), Err(AdaptError::Unadaptable));
    }

    #[test]
    fn empty_contract_unadaptable() {
        let c = Contract { services: vec!["s".into(), "c".into()], vectors: vec![] };
        assert_eq!(synthesize_adaptor(&corpus::sql_services(), &c), Err(AdaptError::Unadaptable));
    }

    #[test]
    fn unknown_message_and_variable() {
        let c = parse_contract("V1 = <s:nope?X; c:request!X>").unwrap();
        assert!(matches!(synthesize_adaptor(&corpus::sql_services(), &c), Err(AdaptError::UnknownMessage { .. })));
        let c = parse_contract("V1 = <s:req?W; c:request!X>").unwrap();
        assert!(matches!(synthesize_adaptor(&corpus::sql_services(), &c), Err(AdaptError::UnboundVariable { .. })));
        let c = parse_contract("V1 = <z:req?X>").unwrap();
        assert_eq!(synthesize_adaptor(&corpus::sql_services(), &c), Err(AdaptError::UnknownService("z".into())));
    }

    #[test]
    fn missing_relay_deadlocks() {
        let services = corpus::sql_services();
        let a = synthesize_adaptor(&services, &corpus::sql_contract()).unwrap();
        let mut broken = a.lts.clone();
        for t in a.lts.transitions() {
            if t.label.to_string() == "request!(Data)" {
                broken = broken.without_transition(t);
            }
        }
        let ltss: Vec<Lts> = services.into_iter().map(|(_, l)| l).collect();
        let v = verify_adaptation(&ltss, &broken);
        assert!(!v.holds);
    }

    #[test]
    fn trivial_adaptor_for_final_services() {
        let done = Lts::builder("x").final_state("x").build().unwrap();
        let adaptor = Lts::builder("a0").final_state("a0").build().unwrap();
        assert!(verify_adaptation(&[done.clone(), done], &adaptor).holds);
    }

    #[test]
    fn adaptor_json_carries_vectors() {
        let a = synthesize_adaptor(&corpus::sql_services(), &corpus::sql_contract()).unwrap();
        let json = a.to_json();
        assert!(json.contains("\"vector\": \"V1\""));
        assert!(json.contains("\"service\": \"c\""));
    }
}
