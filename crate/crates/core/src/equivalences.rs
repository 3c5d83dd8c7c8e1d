//! Trace equivalence and strong, weak and branching bisimulation.
//!
//! Both inputs are placed side by side in a disjoint union. Trace
//! equivalence is decided by a breadth-first search over pairs of subset
//! constructions, which yields a shortest distinguishing trace. Bisimulations
//! are computed by signature-based partition refinement. Final status (weak
//! finality for the weak relation) seeds the initial partition, so final and
//! non-final states are never related.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::model::{Label, Lts};
use crate::verdict::{Evidence, Side, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    Strong,
    Weak,
    Branching,
}

impl Relation {
    pub const ALL: [Relation; 3] = [Relation::Strong, Relation::Weak, Relation::Branching];

    pub fn name(self) -> &'static str {
        match self {
            Relation::Strong => "strong-bisimulation",
            Relation::Weak => "weak-bisimulation",
            Relation::Branching => "branching-bisimulation",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strong" => Ok(Relation::Strong),
            "weak" => Ok(Relation::Weak),
            "branching" => Ok(Relation::Branching),
            other => Err(format!("unknown relation `{other}`")),
        }
    }
}

/// Disjoint union of two LTSs over interned labels.
pub(crate) struct Union {
    pub names: Vec<String>,
    pub finals: Vec<bool>,
    pub labels: Vec<Label>,
    pub tau: Option<usize>,
    pub out: Vec<Vec<(usize, usize)>>,
    pub left_initial: usize,
    pub right_initial: usize,
}

impl Union {
    pub fn new(l1: &Lts, l2: &Lts) -> Self {
        let labels: Vec<Label> = l1
            .alphabet()
            .into_iter()
            .chain(l2.alphabet())
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let label_id: HashMap<&Label, usize> = labels.iter().enumerate().map(|(i, l)| (l, i)).collect();
        let mut names = Vec::new();
        let mut finals = Vec::new();
        let mut index: HashMap<(usize, &str), usize> = HashMap::new();
        for (side, l) in [l1, l2].into_iter().enumerate() {
            let prefix = if side == 0 { "left" } else { "right" };
            for s in l.states() {
                index.insert((side, s.as_str()), names.len());
                names.push(format!("{prefix}:{s}"));
                finals.push(l.is_final(s));
            }
        }
        let mut out = vec![Vec::new(); names.len()];
        for (side, l) in [l1, l2].into_iter().enumerate() {
            for t in l.transitions() {
                let (Some(&a), Some(&b)) = (index.get(&(side, t.from.as_str())), index.get(&(side, t.to.as_str())))
                else {
                    continue;
                };
                out[a].push((label_id[&t.label], b));
            }
        }
        for o in &mut out {
            o.sort();
            o.dedup();
        }
        let tau = labels.iter().position(Label::is_tau);
        Union {
            left_initial: index[&(0, l1.initial())],
            right_initial: index[&(1, l2.initial())],
            names,
            finals,
            labels,
            tau,
            out,
        }
    }

    fn len(&self) -> usize {
        self.names.len()
    }

    pub fn tau_closure(&self, seeds: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        let mut stack: Vec<usize> = Vec::new();
        for s in seeds {
            if seen.insert(s) {
                stack.push(s);
            }
        }
        let Some(tau) = self.tau else { return seen };
        while let Some(s) = stack.pop() {
            for &(a, t) in &self.out[s] {
                if a == tau && seen.insert(t) {
                    stack.push(t);
                }
            }
        }
        seen
    }

    fn post(&self, set: &BTreeSet<usize>, label: usize) -> BTreeSet<usize> {
        set.iter()
            .flat_map(|&s| self.out[s].iter().filter(move |&&(a, _)| a == label).map(|&(_, t)| t))
            .collect()
    }
}

/// Decides (weak) trace equivalence of the initial states.
///
/// With `observable_only`, τ is erased from traces; otherwise τ counts as an
/// ordinary symbol. A failing verdict carries a shortest trace present in
/// exactly one input, found by exploring labels in order.
pub fn trace_equivalent(l1: &Lts, l2: &Lts, observable_only: bool) -> Verdict {
    let u = Union::new(l1, l2);
    let relation = if observable_only { "weak-trace-equivalence" } else { "trace-equivalence" };
    let close = |set: BTreeSet<usize>| if observable_only { u.tau_closure(set) } else { set };
    let symbols: Vec<usize> = (0..u.labels.len())
        .filter(|&a| !(observable_only && Some(a) == u.tau))
        .collect();

    type Pair = (BTreeSet<usize>, BTreeSet<usize>);
    let start: Pair = (close(BTreeSet::from([u.left_initial])), close(BTreeSet::from([u.right_initial])));
    let mut seen: HashMap<Pair, usize> = HashMap::new();
    let mut nodes: Vec<(Pair, Option<(usize, usize)>)> = Vec::new();
    seen.insert(start.clone(), 0);
    nodes.push((start, None));
    let mut queue = VecDeque::from([0usize]);

    let path = |nodes: &Vec<(Pair, Option<(usize, usize)>)>, mut i: usize, last: usize| {
        let mut labels = vec![u.labels[last].to_string()];
        while let Some((p, a)) = nodes[i].1 {
            labels.push(u.labels[a].to_string());
            i = p;
        }
        labels.reverse();
        labels
    };

    while let Some(i) = queue.pop_front() {
        let (x, y) = nodes[i].0.clone();
        for &a in &symbols {
            let nx = close(u.post(&x, a));
            let ny = close(u.post(&y, a));
            match (nx.is_empty(), ny.is_empty()) {
                (true, true) => {}
                (false, true) | (true, false) => {
                    let only_in = if ny.is_empty() { Side::Left } else { Side::Right };
                    return Verdict::new(
                        relation,
                        false,
                        Evidence::DistinguishingTrace {
                            trace: path(&nodes, i, a),
                            only_in,
                        },
                    );
                }
                (false, false) => {
                    let pair = (nx, ny);
                    if !seen.contains_key(&pair) {
                        seen.insert(pair.clone(), nodes.len());
                        queue.push_back(nodes.len());
                        nodes.push((pair, Some((i, a))));
                    }
                }
            }
        }
    }
    Verdict::new(relation, true, Evidence::None)
}

/// Signature of a state: (label, target block) -> representative target.
type Signature = BTreeMap<(usize, usize), usize>;

struct Refinement<'a> {
    union: &'a Union,
    relation: Relation,
    // saturated transitions for the weak relation, plain ones otherwise
    moves: Vec<Vec<(usize, usize)>>,
    history: Vec<Vec<usize>>,
}

impl<'a> Refinement<'a> {
    fn run(union: &'a Union, relation: Relation) -> Self {
        let moves = match relation {
            Relation::Weak => saturate(union),
            _ => union.out.clone(),
        };
        let seed: Vec<bool> = match relation {
            Relation::Weak => (0..union.len())
                .map(|s| union.tau_closure([s]).iter().any(|&x| union.finals[x]))
                .collect(),
            _ => union.finals.clone(),
        };
        let mut r = Refinement {
            union,
            relation,
            moves,
            history: vec![renumber(&seed)],
        };
        loop {
            let current = r.history.last().expect("nonempty history").clone();
            let keys: Vec<(usize, Vec<(usize, usize)>)> = (0..union.len())
                .map(|s| (current[s], r.signature(&current, s).into_keys().collect()))
                .collect();
            let next = renumber(&keys);
            let stable = count(&next) == count(&current);
            if stable {
                break;
            }
            r.history.push(next);
        }
        r
    }

    fn signature(&self, blocks: &[usize], s: usize) -> Signature {
        let mut sig = Signature::new();
        match self.relation {
            Relation::Strong | Relation::Weak => {
                for &(a, t) in &self.moves[s] {
                    sig.entry((a, blocks[t])).or_insert(t);
                }
            }
            Relation::Branching => {
                let tau = self.union.tau;
                // inert τ-paths: τ steps that stay inside the block of s
                let mut seen = BTreeSet::from([s]);
                let mut stack = vec![s];
                while let Some(x) = stack.pop() {
                    for &(a, t) in &self.union.out[x] {
                        let inert = Some(a) == tau && blocks[t] == blocks[s];
                        if inert {
                            if seen.insert(t) {
                                stack.push(t);
                            }
                        } else {
                            sig.entry((a, blocks[t])).or_insert(t);
                        }
                    }
                }
            }
        }
        sig
    }

    fn blocks(&self) -> &[usize] {
        self.history.last().expect("nonempty history")
    }

    /// Labels along which `s` and `t` were split, following the refinement
    /// history backwards. Not necessarily the shortest such sequence.
    fn splitter(&self, s: usize, t: usize) -> Vec<String> {
        let Some(round) = self.history.iter().position(|p| p[s] != p[t]) else {
            return Vec::new();
        };
        if round == 0 {
            return Vec::new();
        }
        let prev = &self.history[round - 1];
        let (sig_s, sig_t) = (self.signature(prev, s), self.signature(prev, t));
        let (from, other_sig, lead) = match sig_s.iter().find(|(k, _)| !sig_t.contains_key(k)) {
            Some((k, &target)) => (target, &sig_t, *k),
            None => {
                let (k, &target) = sig_t
                    .iter()
                    .find(|(k, _)| !sig_s.contains_key(k))
                    .expect("split states have different signatures");
                (target, &sig_s, *k)
            }
        };
        let label = self.union.labels[lead.0].to_string();
        let mut out = vec![label];
        if let Some((_, &other)) = other_sig.iter().find(|((a, _), _)| *a == lead.0) {
            out.extend(self.splitter(from, other));
        }
        out
    }
}

fn saturate(u: &Union) -> Vec<Vec<(usize, usize)>> {
    // τ keeps label id of τ if present; otherwise a fresh id past the end
    let tau = u.tau.unwrap_or(u.labels.len());
    (0..u.len())
        .map(|s| {
            let cl = u.tau_closure([s]);
            let mut moves: BTreeSet<(usize, usize)> = cl.iter().map(|&t| (tau, t)).collect();
            for a in (0..u.labels.len()).filter(|&a| Some(a) != u.tau) {
                for t in u.tau_closure(u.post(&cl, a)) {
                    moves.insert((a, t));
                }
            }
            moves.into_iter().collect()
        })
        .collect()
}

fn renumber<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut ids: BTreeMap<K, usize> = BTreeMap::new();
    let mut next = 0;
    keys.iter()
        .map(|k| {
            *ids.entry(k.clone()).or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

fn count(blocks: &[usize]) -> usize {
    blocks.iter().collect::<BTreeSet<_>>().len()
}

/// Partition of the disjoint union under `relation`, keyed by union state
/// names (`left:<id>` / `right:<id>`).
pub fn partition(l1: &Lts, l2: &Lts, relation: Relation) -> BTreeMap<String, usize> {
    let u = Union::new(l1, l2);
    let r = Refinement::run(&u, relation);
    u.names.iter().cloned().zip(r.blocks().iter().copied()).collect()
}

/// Decides whether the initial states are related by the maximal
/// bisimulation of the given kind.
pub fn bisimilar(l1: &Lts, l2: &Lts, relation: Relation) -> Verdict {
    let u = Union::new(l1, l2);
    let r = Refinement::run(&u, relation);
    let blocks: BTreeMap<String, usize> =
        u.names.iter().cloned().zip(r.blocks().iter().copied()).collect();
    let (s, t) = (u.left_initial, u.right_initial);
    if r.blocks()[s] == r.blocks()[t] {
        Verdict::new(relation.name(), true, Evidence::Relation { blocks })
    } else {
        Verdict::new(
            relation.name(),
            false,
            Evidence::Separated {
                left: u.names[s].clone(),
                right: u.names[t].clone(),
                splitter: r.splitter(s, t),
                blocks,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::model::tau_reduce;

    #[test]
    fn fig5a_trace_equal_not_strong() {
        let (t1, t2) = (corpus::lts("fig5a_t1"), corpus::lts("fig5a_t2"));
        assert!(trace_equivalent(&t1, &t2, false).holds);
        assert!(!bisimilar(&t1, &t2, Relation::Strong).holds);
    }

    #[test]
    fn fig5b_weak_trace_equal_not_weak_bisimilar() {
        let (u1, u2) = (corpus::lts("fig5b_u1"), corpus::lts("fig5b_u2"));
        assert!(trace_equivalent(&u1, &u2, true).holds);
        assert!(!trace_equivalent(&u1, &u2, false).holds);
        assert!(!bisimilar(&u1, &u2, Relation::Weak).holds);
        assert!(!bisimilar(&u1, &u2, Relation::Branching).holds);
    }

    #[test]
    fn fig4_distinguishing_trace() {
        let v = trace_equivalent(&corpus::lts("fig4_s1"), &corpus::lts("fig4_s1p"), false);
        assert!(!v.holds);
        assert_eq!(
            v.evidence,
            Evidence::DistinguishingTrace {
                trace: vec!["a!".into(), "b?".into()],
                only_in: Side::Left
            }
        );
    }

    #[test]
    fn reflexive_on_corpus() {
        for name in corpus::lts_names() {
            let l = corpus::lts(name);
            assert!(trace_equivalent(&l, &l, false).holds, "{name}");
            for r in Relation::ALL {
                assert!(bisimilar(&l, &l, r).holds, "{name} {r}");
            }
        }
    }

    #[test]
    fn splitter_for_fig5a() {
        let v = bisimilar(&corpus::lts("fig5a_t1"), &corpus::lts("fig5a_t2"), Relation::Strong);
        match v.evidence {
            Evidence::Separated { splitter, .. } => {
                assert_eq!(splitter.first().map(String::as_str), Some("a?"));
                assert!(splitter.len() >= 2);
            }
            other => panic!("unexpected evidence {other:?}"),
        }
    }

    #[test]
    fn finals_split_truncated_protocols() {
        // same traces, different termination
        let a = Lts::builder("s0").transition("s0", Label::emit("a"), "s1").final_state("s1").build().unwrap();
        let b = Lts::builder("s0")
            .transition("s0", Label::emit("a"), "s1")
            .final_state("s0")
            .build()
            .unwrap();
        for r in Relation::ALL {
            assert!(!bisimilar(&a, &b, r).holds);
        }
    }

    #[test]
    fn inert_tau_is_branching_invisible() {
        let plain = Lts::builder("s0").transition("s0", Label::emit("a"), "s1").final_state("s1").build().unwrap();
        let stutter = Lts::builder("s0")
            .transition("s0", Label::Tau, "s1")
            .transition("s1", Label::emit("a"), "s2")
            .final_state("s2")
            .build()
            .unwrap();
        assert!(!bisimilar(&plain, &stutter, Relation::Strong).holds);
        assert!(bisimilar(&plain, &stutter, Relation::Branching).holds);
        assert!(bisimilar(&plain, &stutter, Relation::Weak).holds);
        assert!(bisimilar(&stutter, &tau_reduce(&stutter), Relation::Branching).holds);
    }

    #[test]
    fn weak_distinguishes_from_branching() {
        // the classic a.(τ.b + c) vs a.(τ.b + c) + a.b pair is weakly but not
        // branching bisimilar
        let p = Lts::builder("p0")
            .transition("p0", Label::emit("a"), "p1")
            .transition("p1", Label::Tau, "p2")
            .transition("p2", Label::emit("b"), "p3")
            .transition("p1", Label::emit("c"), "p4")
            .final_state("p3")
            .final_state("p4")
            .build()
            .unwrap();
        let q = Lts::builder("q0")
            .transition("q0", Label::emit("a"), "q1")
            .transition("q1", Label::Tau, "q2")
            .transition("q2", Label::emit("b"), "q3")
            .transition("q1", Label::emit("c"), "q4")
            .transition("q0", Label::emit("a"), "q5")
            .transition("q5", Label::emit("b"), "q6")
            .final_state("q3")
            .final_state("q4")
            .final_state("q6")
            .build()
            .unwrap();
        assert!(bisimilar(&p, &q, Relation::Weak).holds);
        assert!(!bisimilar(&p, &q, Relation::Branching).holds);
    }

    #[test]
    fn tau_reduce_of_external_branch_not_branching_equivalent() {
        let l = corpus::lts("fig3_s1p");
        let r = tau_reduce(&l);
        assert!(trace_equivalent(&l, &r, true).holds);
        assert!(!bisimilar(&l, &r, Relation::Branching).holds);
    }
}
