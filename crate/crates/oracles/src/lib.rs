//! Brute-force reference implementations for the test suites.
//!
//! Everything here is written straight from the definitions, favouring
//! obviousness over speed. Only data types are shared with `svan-core`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use svan_core::compatibility::{FloodParams, Notion};
use svan_core::equivalences::Relation;
use svan_core::model::{Label, Lts};

struct Indexed<'a> {
    lts: &'a Lts,
    names: Vec<&'a str>,
}

impl<'a> Indexed<'a> {
    fn new(lts: &'a Lts) -> Self {
        Indexed { lts, names: lts.states().iter().map(String::as_str).collect() }
    }

    fn id(&self, s: &str) -> usize {
        self.names.iter().position(|n| *n == s).unwrap()
    }

    fn len(&self) -> usize {
        self.names.len()
    }

    fn steps(&self, p: usize) -> Vec<(&'a Label, usize)> {
        self.lts
            .transitions()
            .iter()
            .filter(|t| t.from == self.names[p])
            .map(|t| (&t.label, self.id(&t.to)))
            .collect()
    }

    fn final_(&self, p: usize) -> bool {
        self.lts.is_final(self.names[p])
    }

    fn tau_star(&self, p: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([p]);
        let mut todo = vec![p];
        while let Some(x) = todo.pop() {
            for (l, y) in self.steps(x) {
                if l.is_tau() && seen.insert(y) {
                    todo.push(y);
                }
            }
        }
        seen
    }

    // p =a=> q: τ* a τ* for observable a, τ* for τ
    fn weak_steps(&self, p: usize, a: &Label) -> BTreeSet<usize> {
        if a.is_tau() {
            return self.tau_star(p);
        }
        let mut out = BTreeSet::new();
        for x in self.tau_star(p) {
            for (l, y) in self.steps(x) {
                if l == a {
                    out.extend(self.tau_star(y));
                }
            }
        }
        out
    }
}

/// Greatest-fixpoint bisimilarity of the two initial states, computed over
/// explicit state pairs.
pub fn bisimilar(l1: &Lts, l2: &Lts, relation: Relation) -> bool {
    let a = Indexed::new(l1);
    let b = Indexed::new(l2);
    // both directions need relations inside and across the two systems, so
    // work on the relation between the union and itself
    let sys = [&a, &b];
    let nodes: Vec<(usize, usize)> = (0..2).flat_map(|k| (0..sys[k].len()).map(move |p| (k, p))).collect();
    let wfin = |n: (usize, usize)| sys[n.0].tau_star(n.1).iter().any(|&x| sys[n.0].final_(x));
    let fin = |n: (usize, usize)| sys[n.0].final_(n.1);
    let mut rel: BTreeSet<((usize, usize), (usize, usize))> = BTreeSet::new();
    for &x in &nodes {
        for &y in &nodes {
            let ok = match relation {
                Relation::Weak => wfin(x) == wfin(y),
                _ => fin(x) == fin(y),
            };
            if ok {
                rel.insert((x, y));
            }
        }
    }
    let steps = |n: (usize, usize)| -> Vec<(&Label, (usize, usize))> {
        sys[n.0].steps(n.1).into_iter().map(|(l, t)| (l, (n.0, t))).collect()
    };
    let matches = |rel: &BTreeSet<_>, x: (usize, usize), y: (usize, usize)| -> bool {
        steps(x).into_iter().all(|(label, x2)| match relation {
            Relation::Strong => steps(y).into_iter().any(|(l, y2)| l == label && rel.contains(&(x2, y2))),
            Relation::Weak => sys[y.0]
                .weak_steps(y.1, label)
                .into_iter()
                .any(|y2| rel.contains(&(x2, (y.0, y2)))),
            Relation::Branching => {
                (label.is_tau() && rel.contains(&(x2, y)))
                    || sys[y.0].tau_star(y.1).into_iter().any(|mid| {
                        rel.contains(&(x, (y.0, mid)))
                            && sys[y.0]
                                .steps(mid)
                                .into_iter()
                                .any(|(l, y2)| l == label && rel.contains(&(x2, (y.0, y2))))
                    })
            }
        })
    };
    loop {
        let bad: Vec<_> = rel
            .iter()
            .copied()
            .filter(|&(x, y)| !(matches(&rel, x, y) && matches(&rel, y, x)))
            .collect();
        if bad.is_empty() {
            break;
        }
        for p in bad {
            rel.remove(&p);
        }
    }
    rel.contains(&((0, a.id(l1.initial())), (1, b.id(l2.initial()))))
}

/// Number of states of the subset-construction automaton of `l`.
pub fn subset_size(l: &Lts, observable_only: bool) -> usize {
    let x = Indexed::new(l);
    let close = |set: BTreeSet<usize>| -> BTreeSet<usize> {
        if observable_only {
            set.into_iter().flat_map(|p| x.tau_star(p)).collect()
        } else {
            set
        }
    };
    let labels: BTreeSet<&Label> = l
        .transitions()
        .iter()
        .map(|t| &t.label)
        .filter(|a| !(observable_only && a.is_tau()))
        .collect();
    let start = close(BTreeSet::from([x.id(l.initial())]));
    let mut seen = BTreeSet::from([start.clone()]);
    let mut todo = vec![start];
    while let Some(set) = todo.pop() {
        for a in &labels {
            let next: BTreeSet<usize> = close(
                set.iter()
                    .flat_map(|&p| x.steps(p))
                    .filter(|(l, _)| l == a)
                    .map(|(_, t)| t)
                    .collect(),
            );
            if !next.is_empty() && seen.insert(next.clone()) {
                todo.push(next);
            }
        }
    }
    seen.len()
}

/// All traces of length at most `depth`, τ erased when `observable_only`.
pub fn traces(l: &Lts, depth: usize, observable_only: bool) -> BTreeSet<Vec<String>> {
    let x = Indexed::new(l);
    let mut out = BTreeSet::new();
    // (state, trace) frontier; τ steps do not lengthen an observable trace
    let mut seen = BTreeSet::new();
    let mut todo = vec![(x.id(l.initial()), Vec::<String>::new())];
    while let Some((p, tr)) = todo.pop() {
        if !seen.insert((p, tr.clone())) {
            continue;
        }
        out.insert(tr.clone());
        for (label, q) in x.steps(p) {
            if observable_only && label.is_tau() {
                todo.push((q, tr.clone()));
            } else if tr.len() < depth {
                let mut next = tr.clone();
                next.push(label.to_string());
                todo.push((q, next));
            }
        }
    }
    out
}

/// Trace equivalence by comparing all traces up to a length that suffices
/// for the two subset automata; also returns the length of a shortest
/// trace in exactly one of the two sets.
pub fn trace_equivalent(l1: &Lts, l2: &Lts, observable_only: bool) -> (bool, Option<usize>) {
    let depth = subset_size(l1, observable_only) + subset_size(l2, observable_only);
    let t1 = traces(l1, depth, observable_only);
    let t2 = traces(l2, depth, observable_only);
    let shortest = t1.symmetric_difference(&t2).map(Vec::len).min();
    (shortest.is_none(), shortest)
}

/// Reachable states of the rendezvous product, as vectors of local states.
pub fn sync_states(services: &[Lts]) -> BTreeSet<Vec<String>> {
    sync_graph(services).0
}

#[allow(clippy::type_complexity)]
fn sync_graph(services: &[Lts]) -> (BTreeSet<Vec<String>>, BTreeMap<Vec<String>, Vec<Vec<String>>>) {
    let init: Vec<String> = services.iter().map(|l| l.initial().to_string()).collect();
    let mut seen = BTreeSet::from([init.clone()]);
    let mut succ: BTreeMap<Vec<String>, Vec<Vec<String>>> = BTreeMap::new();
    let mut todo = vec![init];
    while let Some(s) = todo.pop() {
        let mut next = Vec::new();
        for i in 0..services.len() {
            for t in services[i].transitions().iter().filter(|t| t.from == s[i]) {
                if t.label.is_tau() {
                    let mut n = s.clone();
                    n[i] = t.to.clone();
                    next.push(n);
                } else if t.label.is_emission() {
                    for j in (0..services.len()).filter(|&j| j != i) {
                        for r in services[j].transitions().iter().filter(|r| r.from == s[j]) {
                            if r.label.is_reception() && r.label.name() == t.label.name() {
                                let mut n = s.clone();
                                n[i] = t.to.clone();
                                n[j] = r.to.clone();
                                next.push(n);
                            }
                        }
                    }
                }
            }
        }
        for n in &next {
            if seen.insert(n.clone()) {
                todo.push(n.clone());
            }
        }
        succ.insert(s, next);
    }
    (seen, succ)
}

fn all_final(services: &[Lts], s: &[String]) -> bool {
    services.iter().zip(s).all(|(l, x)| l.is_final(x))
}

/// Reachable non-final product states without successors.
pub fn sync_deadlocks(services: &[Lts]) -> BTreeSet<Vec<String>> {
    let (states, succ) = sync_graph(services);
    states
        .into_iter()
        .filter(|s| succ[s].is_empty() && !all_final(services, s))
        .collect()
}

/// Every reachable product state can reach a final one.
pub fn sync_deadlock_free(services: &[Lts]) -> bool {
    let (states, succ) = sync_graph(services);
    states.iter().all(|s| {
        let mut seen = BTreeSet::from([s.clone()]);
        let mut todo = vec![s.clone()];
        while let Some(x) = todo.pop() {
            if all_final(services, &x) {
                return true;
            }
            for n in &succ[&x] {
                if seen.insert(n.clone()) {
                    todo.push(n.clone());
                }
            }
        }
        false
    })
}

/// Reachable states of the bounded asynchronous product: local states and
/// one FIFO per receiving service.
pub fn async_states(services: &[Lts], bound: usize) -> BTreeSet<(Vec<String>, Vec<Vec<String>>)> {
    let receiver = |m: &str| {
        (0..services.len()).find(|&j| {
            services[j]
                .transitions()
                .iter()
                .any(|t| t.label.is_reception() && t.label.name() == Some(m))
        })
    };
    let init = (
        services.iter().map(|l| l.initial().to_string()).collect::<Vec<_>>(),
        vec![Vec::<String>::new(); services.len()],
    );
    let mut seen = BTreeSet::from([init.clone()]);
    let mut todo = VecDeque::from([init]);
    while let Some((locals, queues)) = todo.pop_front() {
        for i in 0..services.len() {
            for t in services[i].transitions().iter().filter(|t| t.from == locals[i]) {
                let mut l2 = locals.clone();
                let mut q2 = queues.clone();
                l2[i] = t.to.clone();
                let ok = match t.label.name() {
                    None => true,
                    Some(m) if t.label.is_emission() => match receiver(m) {
                        Some(r) if q2[r].len() < bound => {
                            q2[r].push(m.to_string());
                            true
                        }
                        _ => false,
                    },
                    Some(m) => {
                        if q2[i].first().map(String::as_str) == Some(m) {
                            q2[i].remove(0);
                            true
                        } else {
                            false
                        }
                    }
                };
                if ok && seen.insert((l2.clone(), q2.clone())) {
                    todo.push_back((l2, q2));
                }
            }
        }
    }
    seen
}

// exhaustive search over partial matchings, maximizing `score`
fn best_matching<S: Copy + PartialOrd>(
    rows: usize,
    cols: usize,
    allowed: &dyn Fn(usize, usize) -> bool,
    zero: S,
    add: &dyn Fn(S, usize, usize) -> S,
) -> S {
    fn go<S: Copy + PartialOrd>(
        i: usize,
        used: &mut Vec<bool>,
        acc: S,
        rows: usize,
        allowed: &dyn Fn(usize, usize) -> bool,
        add: &dyn Fn(S, usize, usize) -> S,
    ) -> S {
        if i == rows {
            return acc;
        }
        let mut best = go(i + 1, used, acc, rows, allowed, add);
        for j in 0..used.len() {
            if !used[j] && allowed(i, j) {
                used[j] = true;
                let v = go(i + 1, used, add(acc, i, j), rows, allowed, add);
                used[j] = false;
                if v > best {
                    best = v;
                }
            }
        }
        best
    }
    go(0, &mut vec![false; cols], zero, rows, allowed, add)
}

fn jaccard(a: &[String], b: &[String]) -> f64 {
    if a == b {
        return 1.0;
    }
    fn count(v: &[String]) -> BTreeMap<&String, usize> {
        let mut m: BTreeMap<&String, usize> = BTreeMap::new();
        for x in v {
            *m.entry(x).or_default() += 1;
        }
        m
    }
    let (ca, cb) = (count(a), count(b));
    let keys: BTreeSet<&String> = ca.keys().chain(cb.keys()).copied().collect();
    let (mut inter, mut union) = (0, 0);
    for k in keys {
        let (x, y) = (ca.get(k).copied().unwrap_or(0), cb.get(k).copied().unwrap_or(0));
        inter += x.min(y);
        union += x.max(y);
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn params(l: &Label) -> Vec<String> {
    l.as_message().map(|m| m.params.clone()).unwrap_or_default()
}

/// Static compatibility of a state pair, straight from its definition.
pub fn static_score(l1: &Lts, s1: &str, l2: &Lts, s2: &str, p: &FloodParams, notion: Notion) -> f64 {
    let same = |x: bool, y: bool| if x == y { 1.0 } else { 0.0 };
    let mut nature = same(l1.is_final(s1), l2.is_final(s2));
    if p.include_initial {
        nature = (nature + same(l1.initial() == s1, l2.initial() == s2)) / 2.0;
    }
    let offers = |l: &Lts, s: &str| -> Vec<Label> {
        let set: BTreeSet<Label> = l
            .transitions()
            .iter()
            .filter(|t| t.from == s && !t.label.is_tau())
            .map(|t| t.label.clone())
            .collect();
        set.into_iter().collect()
    };
    let (a, b) = (offers(l1, s1), offers(l2, s2));
    let emissions = a.iter().chain(&b).filter(|l| l.is_emission()).count();
    let denom = match notion {
        Notion::DeadlockFree => a.len().max(b.len()),
        Notion::UnidirectionalComplement { big: 2 } => a.len(),
        Notion::UnidirectionalComplement { .. } => b.len(),
        Notion::UnspecifiedReceptions => emissions,
    };
    let [wn, wl, wp] = p.static_weights;
    if denom == 0 {
        return wn * nature + wl + wp;
    }
    let comp = |i: usize, j: usize| {
        a[i].name() == b[j].name() && a[i].direction() != b[j].direction()
    };
    let (count, psum) = best_matching(
        a.len(),
        b.len(),
        &comp,
        (0usize, 0.0f64),
        &|(c, s), i, j| (c + 1, s + jaccard(&params(&a[i]), &params(&b[j]))),
    );
    let label = count as f64 / denom as f64;
    let param = if count == 0 { 0.0 } else { psum / count as f64 };
    wn * nature + wl * label + wp * param
}

/// Flooding by direct evaluation of the recurrence, matchings enumerated.
/// Returns the matrix (rows: states of `l1`) and the number of sweeps.
pub fn flooding(l1: &Lts, l2: &Lts, notion: Notion, p: &FloodParams) -> (Vec<Vec<f64>>, usize) {
    let x = Indexed::new(l1);
    let y = Indexed::new(l2);
    let (n, m) = (x.len(), y.len());
    let stat: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..m).map(|j| static_score(l1, x.names[i], l2, y.names[j], p, notion)).collect())
        .collect();

    let pred = |z: &Indexed, s: usize| -> Vec<(Label, usize)> {
        z.lts
            .transitions()
            .iter()
            .filter(|t| t.to == z.names[s])
            .map(|t| (t.label.clone(), z.id(&t.from)))
            .collect()
    };
    let succ = |z: &Indexed, s: usize| -> Vec<(Label, usize)> {
        z.steps(s).into_iter().map(|(l, t)| (l.clone(), t)).collect()
    };
    let side = |d: &Vec<Vec<f64>>, e1: Vec<(Label, usize)>, e2: Vec<(Label, usize)>, i: usize, j: usize| -> f64 {
        let o1: Vec<&(Label, usize)> = e1.iter().filter(|(l, _)| !l.is_tau()).collect();
        let o2: Vec<&(Label, usize)> = e2.iter().filter(|(l, _)| !l.is_tau()).collect();
        let t1: Vec<usize> = e1.iter().filter(|(l, _)| l.is_tau()).map(|e| e.1).collect();
        let t2: Vec<usize> = e2.iter().filter(|(l, _)| l.is_tau()).map(|e| e.1).collect();
        let comp = |a: usize, b: usize| o1[a].0.complements(&o2[b].0);
        let c = best_matching(o1.len(), o2.len(), &comp, 0usize, &|k, _, _| k + 1);
        let denom = o1.len() + o2.len() - c + t1.len() + t2.len();
        if denom == 0 {
            return 1.0;
        }
        let num = best_matching(o1.len(), o2.len(), &comp, 0.0f64, &|s, a, b| s + d[o1[a].1][o2[b].1]);
        let idle: f64 = t1.iter().map(|&k| d[k][j]).sum::<f64>() + t2.iter().map(|&k| d[i][k]).sum::<f64>();
        (num + idle) / denom as f64
    };

    let mut d = stat.clone();
    let mut sweeps = 0;
    while sweeps < p.max_iter {
        let next: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let fw = side(&d, succ(&x, i), succ(&y, j), i, j);
                        let bw = side(&d, pred(&x, i), pred(&y, j), i, j);
                        (1.0 - p.w) * stat[i][j] + p.w * (fw + bw) / 2.0
                    })
                    .collect()
            })
            .collect();
        let delta = (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| (next[i][j] - d[i][j]).abs())
            .fold(0.0, f64::max);
        d = next;
        sweeps += 1;
        if delta < p.epsilon {
            break;
        }
    }
    (d, sweeps)
}

/// Adaptor traces up to `depth` in which some emission uses a variable not
/// bound by an earlier reception. Annotations map each transition to its
/// (variables, is-emission) pairs via `vars_of`.
pub fn unbound_emissions(
    adaptor: &Lts,
    depth: usize,
    vars_of: &dyn Fn(&svan_core::model::Transition) -> Vec<String>,
) -> Vec<Vec<String>> {
    let mut bad = Vec::new();
    let mut todo = vec![(adaptor.initial().to_string(), BTreeSet::<String>::new(), Vec::<String>::new())];
    while let Some((s, bound, path)) = todo.pop() {
        if path.len() >= depth {
            continue;
        }
        for t in adaptor.transitions().iter().filter(|t| t.from == s) {
            let vars = vars_of(t);
            let mut bound2 = bound.clone();
            let mut path2 = path.clone();
            path2.push(t.label.to_string());
            if t.label.is_emission() {
                if vars.iter().any(|v| !bound.contains(v)) {
                    bad.push(path2.clone());
                    continue;
                }
            } else {
                bound2.extend(vars);
            }
            todo.push((t.to.clone(), bound2, path2));
        }
    }
    bad
}
