//! The bundled fixture corpus: the figure protocols, the SQL adaptation
//! example and the collaboration diagrams.

use crate::adaptation::{parse_contract, Contract};
use crate::choreography::{parse_diagram, CollaborationDiagram};
use crate::model::{parse_lts, Lts};

macro_rules! fixtures {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../corpus/", $name, ".json")))),*]
    };
}

const LTS_FIXTURES: &[(&str, &str)] = fixtures![
    "fig1_s1", "fig1_s1p", "fig1_s2", "fig2_s1", "fig2_s1p", "fig2_s2", "fig3_s1", "fig3_s1p",
    "fig3_s2", "fig4_s1", "fig4_s1p", "fig4_s2", "fig5a_t1", "fig5a_t2", "fig5b_u1", "fig5b_u2",
    "sql_service", "sql_client",
];

const DIAGRAM_FIXTURES: &[(&str, &str)] = fixtures!["fig7_left", "fig7_right"];

const SQL_CONTRACT: &str = include_str!("../corpus/sql.contract");

/// Names of every bundled LTS fixture.
pub fn lts_names() -> impl Iterator<Item = &'static str> {
    LTS_FIXTURES.iter().map(|(n, _)| *n)
}

/// The figure fixtures (excludes the SQL example).
pub fn figure_names() -> impl Iterator<Item = &'static str> {
    lts_names().filter(|n| n.starts_with("fig"))
}

pub fn lts_text(name: &str) -> Option<&'static str> {
    LTS_FIXTURES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Parses a bundled fixture. Panics on an unknown name.
pub fn lts(name: &str) -> Lts {
    let text = lts_text(name).unwrap_or_else(|| panic!("no LTS fixture named `{name}`"));
    parse_lts(text).unwrap_or_else(|e| panic!("fixture `{name}`: {e}"))
}

pub fn diagram(name: &str) -> CollaborationDiagram {
    let (_, text) = DIAGRAM_FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .unwrap_or_else(|| panic!("no diagram fixture named `{name}`"));
    parse_diagram(text).unwrap_or_else(|e| panic!("fixture `{name}`: {e}"))
}

pub fn diagram_names() -> impl Iterator<Item = &'static str> {
    DIAGRAM_FIXTURES.iter().map(|(n, _)| *n)
}

pub fn sql_contract_text() -> &'static str {
    SQL_CONTRACT
}

pub fn sql_contract() -> Contract {
    parse_contract(SQL_CONTRACT).expect("bundled contract parses")
}

/// The SQL services keyed by their contract ids.
pub fn sql_services() -> Vec<(String, Lts)> {
    vec![
        ("s".to_string(), lts("sql_service")),
        ("c".to_string(), lts("sql_client")),
    ]
}

/// Deterministic τ-free fixtures in which every state reaches a final state.
pub fn deterministic_tau_free() -> [&'static str; 5] {
    ["fig2_s1p", "fig4_s2", "fig5a_t1", "fig3_s1", "fig5b_u1"]
}
