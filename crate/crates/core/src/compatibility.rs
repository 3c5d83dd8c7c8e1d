//! Compatibility of two service protocols.
//!
//! [`check_compat`] decides the three boolean notions over the synchronous
//! product. [`compat_degree`] computes a graded compatibility matrix over all
//! state pairs by flooding: each cell mixes a static score with the scores
//! of its forward and backward neighbour pairs until a fixpoint is reached.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::composition::sync_product;
use crate::matching::{max_cardinality, max_weight_matching};
use crate::model::{Label, Lts, Transition};
use crate::verdict::{Evidence, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "notion", rename_all = "kebab-case")]
pub enum Notion {
    DeadlockFree,
    /// `big` is the 1-based index of the service that must complement the
    /// other one.
    UnidirectionalComplement { big: usize },
    UnspecifiedReceptions,
}

impl Notion {
    pub fn name(self) -> &'static str {
        match self {
            Notion::DeadlockFree => "deadlock-freeness",
            Notion::UnidirectionalComplement { .. } => "unidirectional-complementarity",
            Notion::UnspecifiedReceptions => "unspecified-receptions",
        }
    }
}

impl fmt::Display for Notion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Notion::UnidirectionalComplement { big } => write!(f, "{}(big={big})", self.name()),
            _ => f.write_str(self.name()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompatError {
    #[error("invalid flooding parameters: {0}")]
    InvalidParams(String),
    #[error("`big` must be 1 or 2, got {0}")]
    InvalidBig(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FloodParams {
    /// Weight of the behavioural (neighbour) part, in (0, 1).
    pub w: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    /// Weights of the state-nature, label and parameter scores; sum to 1.
    pub static_weights: [f64; 3],
    /// Include initial-status agreement in the state-nature score.
    pub include_initial: bool,
}

impl Default for FloodParams {
    fn default() -> Self {
        FloodParams {
            w: 0.5,
            epsilon: 1e-4,
            max_iter: 1000,
            static_weights: [0.2, 0.5, 0.3],
            include_initial: false,
        }
    }
}

impl FloodParams {
    pub fn validate(&self) -> Result<(), CompatError> {
        let bad = |m: String| Err(CompatError::InvalidParams(m));
        if !(self.w > 0.0 && self.w < 1.0) {
            return bad(format!("w must lie in (0,1), got {}", self.w));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        if self.static_weights.iter().any(|&x| x.is_nan() || x < 0.0) {
            return bad("static weights must be non-negative".into());
        }
        let sum: f64 = self.static_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("static weights must sum to 1, got {sum}"));
        }
        Ok(())
    }
}

fn check_big(notion: Notion) -> Result<(), CompatError> {
    match notion {
        Notion::UnidirectionalComplement { big } if big != 1 && big != 2 => {
            Err(CompatError::InvalidBig(big))
        }
        _ => Ok(()),
    }
}

fn observable_offers<'a>(l: &'a Lts, state: &str) -> BTreeSet<&'a Label> {
    l.outgoing(state)
        .iter()
        .map(|t| &t.label)
        .filter(|lab| !lab.is_tau())
        .collect()
}

/// Decides a compatibility notion on the synchronous product of `l1`, `l2`.
///
/// The notion-specific label condition is checked first over reachable
/// product states in exploration order; deadlock-freeness is checked after.
pub fn check_compat(l1: &Lts, l2: &Lts, notion: Notion) -> Result<Verdict, CompatError> {
    check_big(notion)?;
    let services = [l1.clone(), l2.clone()];
    let product = sync_product(&services).expect("two services");
    let relation = notion.name();

    let unmatched = |i: usize, svc: usize, label: &Label| {
        Verdict::new(
            relation,
            false,
            Evidence::Unmatched {
                state: product.state(i).to_string(),
                service: svc + 1,
                label: label.to_string(),
                trace: product.trace_to(i).rendered(),
            },
        )
    };

    for i in 0..product.states().len() {
        let locals = &product.state(i).locals;
        let offers = [
            observable_offers(l1, &locals[0]),
            observable_offers(l2, &locals[1]),
        ];
        match notion {
            Notion::DeadlockFree => {}
            Notion::UnidirectionalComplement { big } => {
                let (b, small) = (big - 1, 2 - big);
                for label in &offers[small] {
                    if !offers[b].iter().any(|o| label.complements(o)) {
                        return Ok(unmatched(i, small, label));
                    }
                }
            }
            Notion::UnspecifiedReceptions => {
                for svc in 0..2 {
                    for label in offers[svc].iter().filter(|l| l.is_emission()) {
                        if !offers[1 - svc].iter().any(|o| label.complements(o)) {
                            return Ok(unmatched(i, svc, label));
                        }
                    }
                }
            }
        }
    }
    Ok(product.deadlock_freeness(relation))
}

/// Multiset Jaccard index of two parameter type lists; 1 when equal.
pub fn param_similarity(a: &[String], b: &[String]) -> f64 {
    if a == b {
        return 1.0;
    }
    let mut a: Vec<&String> = a.iter().collect();
    let mut b: Vec<&String> = b.iter().collect();
    a.sort();
    b.sort();
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn params_of(l: &Label) -> &[String] {
    l.as_message().map_or(&[], |m| m.params.as_slice())
}

/// The three static measures (state nature, labels, parameters) of a pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StaticScores {
    pub nature: f64,
    pub label: f64,
    pub param: f64,
}

impl StaticScores {
    pub fn weighted(&self, weights: [f64; 3]) -> f64 {
        weights[0] * self.nature + weights[1] * self.label + weights[2] * self.param
    }
}

pub fn static_scores(
    l1: &Lts,
    s1: &str,
    l2: &Lts,
    s2: &str,
    params: &FloodParams,
    notion: Notion,
) -> StaticScores {
    let same_final = (l1.is_final(s1) == l2.is_final(s2)) as u8 as f64;
    let nature = if params.include_initial {
        let same_initial = ((l1.initial() == s1) == (l2.initial() == s2)) as u8 as f64;
        (same_final + same_initial) / 2.0
    } else {
        same_final
    };

    let a: Vec<&Label> = observable_offers(l1, s1).into_iter().collect();
    let b: Vec<&Label> = observable_offers(l2, s2).into_iter().collect();
    let denominator = match notion {
        Notion::DeadlockFree => a.len().max(b.len()),
        Notion::UnidirectionalComplement { big } => {
            if big == 2 {
                a.len()
            } else {
                b.len()
            }
        }
        Notion::UnspecifiedReceptions => {
            a.iter().chain(&b).filter(|l| l.is_emission()).count()
        }
    };
    if denominator == 0 {
        return StaticScores { nature, label: 1.0, param: 1.0 };
    }
    // cardinality dominates, parameter agreement breaks ties
    let big_k = (a.len() + b.len() + 1) as f64;
    let weights: Vec<Vec<Option<f64>>> = a
        .iter()
        .map(|x| {
            b.iter()
                .map(|y| {
                    x.complements(y)
                        .then(|| big_k + param_similarity(params_of(x), params_of(y)))
                })
                .collect()
        })
        .collect();
    let (_, pairs) = max_weight_matching(&weights);
    let matched = pairs.len();
    let label = (matched as f64 / denominator as f64).min(1.0);
    let param = if matched == 0 {
        0.0
    } else {
        pairs
            .iter()
            .map(|&(i, j)| param_similarity(params_of(a[i]), params_of(b[j])))
            .sum::<f64>()
            / matched as f64
    };
    StaticScores { nature, label, param }
}

/// Weighted static compatibility of the state pair `(s1, s2)`, in [0, 1].
pub fn static_compat(
    l1: &Lts,
    s1: &str,
    l2: &Lts,
    s2: &str,
    params: &FloodParams,
    notion: Notion,
) -> f64 {
    static_scores(l1, s1, l2, s2, params, notion).weighted(params.static_weights)
}

/// Neighbourhood of one cell in one direction (forward or backward).
struct Neighbourhood {
    // complementary observable pairs: (row transition, col transition, cell)
    pairs: Vec<(usize, usize, usize)>,
    rows: usize,
    cols: usize,
    // cells reached by a τ move against an idle partner
    idle: Vec<usize>,
    denominator: usize,
}

impl Neighbourhood {
    fn new(
        mine: &[&Transition],
        theirs: &[&Transition],
        cell_of: impl Fn(Option<&Transition>, Option<&Transition>) -> usize,
    ) -> Self {
        let obs_a: Vec<&Transition> = mine.iter().copied().filter(|t| !t.label.is_tau()).collect();
        let obs_b: Vec<&Transition> = theirs.iter().copied().filter(|t| !t.label.is_tau()).collect();
        let mut pairs = Vec::new();
        let mut allowed = vec![vec![false; obs_b.len()]; obs_a.len()];
        for (i, x) in obs_a.iter().enumerate() {
            for (j, y) in obs_b.iter().enumerate() {
                if x.label.complements(&y.label) {
                    allowed[i][j] = true;
                    pairs.push((i, j, cell_of(Some(x), Some(y))));
                }
            }
        }
        let mut idle = Vec::new();
        for t in mine.iter().filter(|t| t.label.is_tau()) {
            idle.push(cell_of(Some(t), None));
        }
        for t in theirs.iter().filter(|t| t.label.is_tau()) {
            idle.push(cell_of(None, Some(t)));
        }
        let cardinality = max_cardinality(&allowed);
        Neighbourhood {
            denominator: obs_a.len() + obs_b.len() - cardinality + idle.len(),
            rows: obs_a.len(),
            cols: obs_b.len(),
            pairs,
            idle,
        }
    }

    fn score(&self, degrees: &[f64]) -> f64 {
        if self.denominator == 0 {
            return 1.0;
        }
        let mut weights = vec![vec![None; self.cols]; self.rows];
        for &(i, j, cell) in &self.pairs {
            weights[i][j] = Some(degrees[cell]);
        }
        let (matched, _) = max_weight_matching(&weights);
        let idle: f64 = self.idle.iter().map(|&c| degrees[c]).sum();
        (matched + idle) / self.denominator as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompatMatrix {
    /// States of the first service.
    pub rows: Vec<String>,
    /// States of the second service.
    pub cols: Vec<String>,
    pub degrees: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub notion: Notion,
    pub params: FloodParams,
    /// Max cell change of every sweep, in order.
    pub deltas: Vec<f64>,
}

impl CompatMatrix {
    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        let i = self.rows.iter().position(|r| r == row)?;
        let j = self.cols.iter().position(|c| c == col)?;
        Some(self.degrees[i][j])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("state");
        for c in &self.cols {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (r, row) in self.rows.iter().zip(&self.degrees) {
            out.push_str(r);
            for d in row {
                out.push_str(&format!(",{d}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("matrix serializes");
        s.push('\n');
        s
    }

    /// Two-decimal table, rows are first-service states.
    pub fn to_table(&self) -> String {
        let width = self
            .rows
            .iter()
            .chain(&self.cols)
            .map(|s| s.chars().count())
            .max()
            .unwrap_or(0)
            .max(4);
        let mut out = format!("{:width$} |", "");
        for c in &self.cols {
            out.push_str(&format!(" {c:>width$}"));
        }
        out.push('\n');
        out.push_str(&"-".repeat(width + 2 + (width + 1) * self.cols.len()));
        out.push('\n');
        for (r, row) in self.rows.iter().zip(&self.degrees) {
            out.push_str(&format!("{r:width$} |"));
            for d in row {
                out.push_str(&format!(" {:>width$}", format!("{d:.2}")));
            }
            out.push('\n');
        }
        out
    }
}

/// Compatibility flooding over the full state-pair grid.
///
/// `D0 = static`, `D(k+1) = (1-w)·static + w·(fw(Dk) + bw(Dk))/2`, where
/// `fw` is the best complementary matching of outgoing transitions weighted
/// by successor-pair degrees, averaged over all transitions involved
/// (unmatched ones count 0; a τ move pairs with an idle partner), and `bw`
/// does the same over incoming transitions. Sweeps are Jacobi-style and stop
/// once the max cell change drops below epsilon or after `max_iter` sweeps.
pub fn compat_degree(
    l1: &Lts,
    l2: &Lts,
    notion: Notion,
    params: &FloodParams,
) -> Result<CompatMatrix, CompatError> {
    params.validate()?;
    check_big(notion)?;
    let rows: Vec<String> = l1.states().iter().cloned().collect();
    let cols: Vec<String> = l2.states().iter().cloned().collect();
    let n2 = cols.len();
    let row_of = |s: &str| rows.binary_search_by(|r| r.as_str().cmp(s)).expect("declared state");
    let col_of = |s: &str| cols.binary_search_by(|c| c.as_str().cmp(s)).expect("declared state");

    let incoming = |l: &Lts, s: &str| -> Vec<Transition> {
        l.transitions().iter().filter(|t| t.to == s).cloned().collect()
    };

    let mut statics = Vec::with_capacity(rows.len() * n2);
    let mut forward = Vec::with_capacity(rows.len() * n2);
    let mut backward = Vec::with_capacity(rows.len() * n2);
    for r in &rows {
        let out_r: Vec<&Transition> = l1.outgoing(r).iter().collect();
        let in_r_owned = incoming(l1, r);
        let in_r: Vec<&Transition> = in_r_owned.iter().collect();
        for c in &cols {
            statics.push(static_compat(l1, r, l2, c, params, notion));
            let out_c: Vec<&Transition> = l2.outgoing(c).iter().collect();
            let in_c_owned = incoming(l2, c);
            let in_c: Vec<&Transition> = in_c_owned.iter().collect();
            forward.push(Neighbourhood::new(&out_r, &out_c, |x, y| {
                let i = x.map_or_else(|| row_of(r), |t| row_of(&t.to));
                let j = y.map_or_else(|| col_of(c), |t| col_of(&t.to));
                i * n2 + j
            }));
            backward.push(Neighbourhood::new(&in_r, &in_c, |x, y| {
                let i = x.map_or_else(|| row_of(r), |t| row_of(&t.from));
                let j = y.map_or_else(|| col_of(c), |t| col_of(&t.from));
                i * n2 + j
            }));
        }
    }

    let w = params.w;
    let mut degrees = statics.clone();
    let mut deltas = Vec::new();
    let mut converged = false;
    while deltas.len() < params.max_iter {
        let next: Vec<f64> = (0..degrees.len())
            .map(|k| {
                let behaviour = (forward[k].score(&degrees) + backward[k].score(&degrees)) / 2.0;
                ((1.0 - w) * statics[k] + w * behaviour).clamp(0.0, 1.0)
            })
            .collect();
        let delta = next
            .iter()
            .zip(&degrees)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        degrees = next;
        deltas.push(delta);
        if delta < params.epsilon {
            converged = true;
            break;
        }
    }

    Ok(CompatMatrix {
        degrees: degrees.chunks(n2.max(1)).map(<[f64]>::to_vec).take(rows.len()).collect(),
        rows,
        cols,
        iterations: deltas.len(),
        converged,
        notion,
        params: *params,
        deltas,
    })
}
