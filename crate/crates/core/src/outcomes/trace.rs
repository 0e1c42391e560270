use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::catalog::{Catalog, Effect, Relation};
use crate::engine::{self, Session};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceNodeKind {
    Answer { question_id: String, option_id: String, seq: u64 },
    Requirement { req_id: String, text: String },
    Constraint { question_id: String, subject: String, relation: Relation, value: String },
    Component { component_id: String, name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceNode {
    pub id: String,
    #[serde(flatten)]
    pub kind: TraceNodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeRelation {
    /// Component selection derived from a requirement.
    DerivesFrom,
    /// Node produced by the effects of an answer.
    Source,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct TraceEdge {
    pub from: String,
    pub to: String,
    pub relation: EdgeRelation,
}

/// Directed graph from design decisions back to requirements and the
/// answers that produced them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TraceGraph {
    pub nodes: Vec<TraceNode>,
    pub edges: Vec<TraceEdge>,
}

impl TraceGraph {
    pub fn node(&self, id: &str) -> Option<&TraceNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn outgoing<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a TraceEdge> + 'a {
        self.edges.iter().filter(move |e| e.from == id)
    }
}

pub fn answer_node_id(question_id: &str) -> String {
    format!("answer:{question_id}")
}

pub fn requirement_node_id(req_id: &str) -> String {
    format!("requirement:{req_id}")
}

pub fn component_node_id(component_id: &str) -> String {
    format!("component:{component_id}")
}

pub fn constraint_node_id(question_id: &str, index: usize) -> String {
    format!("constraint:{question_id}:{index}")
}

pub fn trace_graph(catalog: &Catalog, session: &Session) -> TraceGraph {
    let state = engine::active_state(catalog, session);
    let seqs = engine::answer_seqs(session);
    let mut nodes = Vec::new();
    let mut edges = BTreeSet::new();
    let mut seen = BTreeSet::new();

    for (_, q) in catalog.questions() {
        if let Some(oid) = state.option_for(&q.id) {
            let id = answer_node_id(&q.id);
            seen.insert(id.clone());
            nodes.push(TraceNode {
                id,
                kind: TraceNodeKind::Answer {
                    question_id: q.id.clone(),
                    option_id: oid.to_string(),
                    seq: seqs.get(&q.id).copied().unwrap_or_default(),
                },
            });
        }
    }
    let active_reqs: BTreeSet<&str> = state
        .effects
        .iter()
        .filter_map(|e| match &e.effect {
            Effect::Requirement { req_id, .. } => Some(req_id.as_str()),
            _ => None,
        })
        .collect();

    for e in &state.effects {
        let answer = answer_node_id(&e.question_id);
        let node = match &e.effect {
            Effect::Requirement { req_id, text, .. } => Some(TraceNode {
                id: requirement_node_id(req_id),
                kind: TraceNodeKind::Requirement { req_id: req_id.clone(), text: text.clone() },
            }),
            Effect::Constraint { subject, relation, value } => Some(TraceNode {
                id: constraint_node_id(&e.question_id, e.index),
                kind: TraceNodeKind::Constraint {
                    question_id: e.question_id.clone(),
                    subject: subject.clone(),
                    relation: *relation,
                    value: value.clone(),
                },
            }),
            Effect::ComponentSelect { component_id, derives_from, .. } => {
                let id = component_node_id(component_id);
                for req in derives_from.iter().filter(|r| active_reqs.contains(r.as_str())) {
                    edges.insert(TraceEdge { from: id.clone(), to: requirement_node_id(req), relation: EdgeRelation::DerivesFrom });
                }
                let name = catalog.component(component_id).map(|c| c.name.clone()).unwrap_or_default();
                Some(TraceNode { id, kind: TraceNodeKind::Component { component_id: component_id.clone(), name } })
            }
            _ => None,
        };
        if let Some(node) = node {
            edges.insert(TraceEdge { from: node.id.clone(), to: answer, relation: EdgeRelation::Source });
            if seen.insert(node.id.clone()) {
                nodes.push(node);
            }
        }
    }
    TraceGraph { nodes, edges: edges.into_iter().collect() }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node inactive: `{0}` is not backed by an active answer")]
    NodeInactive(String),
}

/// One path from a node back to an originating answer; the last node is
/// always an answer carrying its log seq.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceChain {
    pub nodes: Vec<TraceNode>,
}

impl TraceChain {
    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }
}

fn known_to_catalog(catalog: &Catalog, node_id: &str) -> bool {
    let Some((kind, rest)) = node_id.split_once(':') else { return false };
    match kind {
        "answer" => catalog.question(rest).is_some(),
        "requirement" => !catalog.requirement_sources(rest).is_empty(),
        "component" => catalog.component(rest).is_some(),
        "constraint" => rest
            .rsplit_once(':')
            .is_some_and(|(qid, idx)| catalog.question(qid).is_some() && idx.parse::<usize>().is_ok()),
        _ => false,
    }
}

/// All paths from `node_id` to the answers it originates from.
pub fn trace_decision(catalog: &Catalog, session: &Session, node_id: &str) -> Result<Vec<TraceChain>, TraceError> {
    let graph = trace_graph(catalog, session);
    if graph.node(node_id).is_none() {
        return Err(if known_to_catalog(catalog, node_id) {
            TraceError::NodeInactive(node_id.to_string())
        } else {
            TraceError::UnknownNode(node_id.to_string())
        });
    }
    let by_id: BTreeMap<&str, &TraceNode> = graph.nodes.iter().map(|n| (n.id.as_str(), n)).collect();
    let mut chains = Vec::new();
    let mut path = vec![node_id.to_string()];
    walk(&graph, &mut path, &mut chains);
    Ok(chains
        .into_iter()
        .map(|ids| TraceChain { nodes: ids.iter().map(|id| by_id[id.as_str()].clone()).collect() })
        .collect())
}

fn walk(graph: &TraceGraph, path: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
    let current = path.last().expect("path is never empty").clone();
    if current.starts_with("answer:") {
        out.push(path.clone());
        return;
    }
    for edge in graph.outgoing(&current) {
        if path.contains(&edge.to) {
            continue;
        }
        path.push(edge.to.clone());
        walk(graph, path, out);
        path.pop();
    }
}
