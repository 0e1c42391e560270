use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use super::{ComponentBlueprint, SlotStatus};
use crate::catalog::Catalog;
use crate::engine::{self, Session};
use crate::outcomes::{ConflictSeverity, Outcomes, Recommendation, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    Functional,
    Process,
    Output,
}

impl ViewKind {
    pub const ALL: [ViewKind; 3] = [ViewKind::Functional, ViewKind::Process, ViewKind::Output];

    pub fn as_str(self) -> &'static str {
        match self {
            ViewKind::Functional => "functional",
            ViewKind::Process => "process",
            ViewKind::Output => "output",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ViewKind::Functional => "Functional view",
            ViewKind::Process => "Process view",
            ViewKind::Output => "Output view",
        }
    }
}

impl fmt::Display for ViewKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ViewKind {
    type Err = ViewError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ViewKind::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| ViewError::UnknownView(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ViewError {
    #[error("stale blueprint: generated from `{blueprint_session}` v{blueprint_version}, session is `{session}` v{session_version}")]
    StaleBlueprint {
        blueprint_session: String,
        blueprint_version: u64,
        session: String,
        session_version: u64,
    },
    #[error("unknown view `{0}` (expected functional, process or output)")]
    UnknownView(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Section {
    pub heading: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub paragraphs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Table>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Declared,
    Layer,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ProcessEdge {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewDocument {
    pub view: ViewKind,
    pub title: String,
    pub sections: Vec<Section>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<ProcessEdge>,
    /// Component ids forming a cycle among the edges, first id repeated last.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle: Option<Vec<String>>,
}

pub fn render_view(catalog: &Catalog, session: &Session, blueprint: &ComponentBlueprint, view: ViewKind) -> Result<ViewDocument, ViewError> {
    let outcomes = Outcomes::compute(catalog, session);
    render_with(catalog, session, blueprint, &outcomes, view, super::report::DEFAULT_FITNESS_REFERENCE)
}

pub(crate) fn render_with(
    catalog: &Catalog,
    session: &Session,
    blueprint: &ComponentBlueprint,
    outcomes: &Outcomes,
    view: ViewKind,
    fitness_reference: f64,
) -> Result<ViewDocument, ViewError> {
    let from = &blueprint.generated_from;
    if from.session_id != session.id || from.version != session.version {
        return Err(ViewError::StaleBlueprint {
            blueprint_session: from.session_id.clone(),
            blueprint_version: from.version,
            session: session.id.clone(),
            session_version: session.version,
        });
    }
    Ok(match view {
        ViewKind::Functional => functional(catalog, session, blueprint),
        ViewKind::Process => process(catalog, blueprint),
        ViewKind::Output => output(session, blueprint, outcomes, fitness_reference),
    })
}

fn functional(catalog: &Catalog, session: &Session, blueprint: &ComponentBlueprint) -> ViewDocument {
    let rows = blueprint
        .slots
        .iter()
        .map(|slot| {
            let join = |f: &dyn Fn(&super::SelectedComponent) -> Vec<String>| {
                let items: Vec<String> = slot.components.iter().flat_map(f).collect();
                if items.is_empty() { "-".to_string() } else { items.join(", ") }
            };
            vec![
                slot.slot.label(),
                if slot.mandatory { "yes" } else { "no" }.to_string(),
                status_str(slot.status).to_string(),
                join(&|c| vec![c.component_id.clone()]),
                join(&|c| c.sources.iter().map(|s| format!("{}={}", s.question_id, s.option_id)).collect()),
                join(&|c| c.requirements.clone()),
            ]
        })
        .collect();

    let progress = engine::stage_status(catalog, session);
    let coverage = progress
        .iter()
        .map(|p| {
            vec![
                p.stage.as_str().to_string(),
                p.answered.to_string(),
                catalog.stage_question_count(p.stage).to_string(),
                p.required_remaining.to_string(),
            ]
        })
        .collect();

    ViewDocument {
        view: ViewKind::Functional,
        title: ViewKind::Functional.title().to_string(),
        sections: vec![
            Section {
                heading: "Aspects and decisions".to_string(),
                paragraphs: Vec::new(),
                table: Some(Table {
                    columns: ["aspect", "mandatory", "status", "components", "provenance", "requirements"]
                        .map(String::from)
                        .to_vec(),
                    rows,
                }),
            },
            Section {
                heading: "Input coverage".to_string(),
                paragraphs: Vec::new(),
                table: Some(Table {
                    columns: ["stage", "answered", "questions", "required remaining"].map(String::from).to_vec(),
                    rows: coverage,
                }),
            },
        ],
        edges: Vec::new(),
        cycle: None,
    }
}

/// Declared dependencies between selected components win; a component
/// without any falls back to every selected component in the next
/// non-empty tier.
pub(crate) fn process_edges(catalog: &Catalog, blueprint: &ComponentBlueprint) -> Vec<ProcessEdge> {
    let mut tiers: BTreeMap<u8, Vec<&str>> = BTreeMap::new();
    for slot in &blueprint.slots {
        for c in &slot.components {
            let members = tiers.entry(slot.slot.tier()).or_default();
            if !members.contains(&c.component_id.as_str()) {
                members.push(&c.component_id);
            }
        }
    }
    let selected: BTreeSet<&str> = tiers.values().flatten().copied().collect();

    let mut edges = BTreeSet::new();
    for (&tier, members) in &tiers {
        let next = tiers.range(tier + 1..).next().map(|(_, m)| m);
        for &id in members {
            let declared: Vec<&str> = catalog
                .component(id)
                .map(|d| d.depends_on.iter().map(String::as_str).filter(|t| selected.contains(t)).collect())
                .unwrap_or_default();
            if declared.is_empty() {
                for &to in next.into_iter().flatten() {
                    edges.insert(ProcessEdge { from: id.to_string(), to: to.to_string(), kind: EdgeKind::Layer });
                }
            } else {
                for to in declared {
                    edges.insert(ProcessEdge { from: id.to_string(), to: to.to_string(), kind: EdgeKind::Declared });
                }
            }
        }
    }
    edges.into_iter().collect()
}

/// First cycle found by depth-first search in sorted node order.
pub(crate) fn find_cycle(edges: &[ProcessEdge]) -> Option<Vec<String>> {
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in edges {
        adj.entry(&e.from).or_default().push(&e.to);
        adj.entry(&e.to).or_default();
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    fn visit<'a>(n: &'a str, adj: &BTreeMap<&'a str, Vec<&'a str>>, marks: &mut BTreeMap<&'a str, Mark>, stack: &mut Vec<&'a str>) -> Option<Vec<String>> {
        marks.insert(n, Mark::Open);
        stack.push(n);
        for &m in &adj[n] {
            match marks[m] {
                Mark::Open => {
                    let start = stack.iter().position(|s| *s == m).expect("open node is on the stack");
                    let mut cycle: Vec<String> = stack[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(m.to_string());
                    return Some(cycle);
                }
                Mark::New => {
                    if let Some(c) = visit(m, adj, marks, stack) {
                        return Some(c);
                    }
                }
                Mark::Done => {}
            }
        }
        stack.pop();
        marks.insert(n, Mark::Done);
        None
    }
    let mut marks: BTreeMap<&str, Mark> = adj.keys().map(|k| (*k, Mark::New)).collect();
    let nodes: Vec<&str> = adj.keys().copied().collect();
    for n in nodes {
        if marks[n] == Mark::New {
            if let Some(c) = visit(n, &adj, &mut marks, &mut Vec::new()) {
                return Some(c);
            }
        }
    }
    None
}

fn process(catalog: &Catalog, blueprint: &ComponentBlueprint) -> ViewDocument {
    let edges = process_edges(catalog, blueprint);
    let cycle = find_cycle(&edges);
    let rows = blueprint
        .slots
        .iter()
        .flat_map(|slot| {
            slot.components
                .iter()
                .map(move |c| vec![slot.slot.tier().to_string(), slot.slot.label(), c.component_id.clone(), c.name.clone()])
        })
        .collect::<Vec<_>>();
    let mut paragraphs = Vec::new();
    if rows.is_empty() {
        paragraphs.push("No components selected yet.".to_string());
    }
    if let Some(c) = &cycle {
        paragraphs.push(format!("Declared dependencies form a cycle: {}", c.join(" -> ")));
    }
    ViewDocument {
        view: ViewKind::Process,
        title: ViewKind::Process.title().to_string(),
        sections: vec![Section {
            heading: "Components by tier".to_string(),
            paragraphs,
            table: Some(Table { columns: ["tier", "aspect", "component", "name"].map(String::from).to_vec(), rows }),
        }],
        edges,
        cycle,
    }
}

fn output(session: &Session, blueprint: &ComponentBlueprint, outcomes: &Outcomes, fitness_reference: f64) -> ViewDocument {
    let mut sections = Vec::new();
    sections.push(Section {
        heading: "Verdict".to_string(),
        paragraphs: vec![verdict_sentence(&outcomes.verdict)],
        table: None,
    });
    sections.push(Section {
        heading: "Fitness".to_string(),
        paragraphs: vec![fitness_sentence(outcomes, fitness_reference)],
        table: None,
    });
    sections.push(Section {
        heading: "Recommendation".to_string(),
        paragraphs: vec![recommendation_sentence(&outcomes.recommendation)],
        table: None,
    });

    let risks: Vec<String> = match &outcomes.verdict {
        Verdict::SuitableWithRisks { risks, .. } => risks.iter().map(|r| format!("{}: {}", r.reason_code, r.text)).collect(),
        _ => Vec::new(),
    };
    sections.push(Section {
        heading: "Risks".to_string(),
        paragraphs: if risks.is_empty() { vec!["None flagged.".to_string()] } else { risks },
        table: None,
    });

    if !session.overrides.is_empty() {
        sections.push(Section {
            heading: "Overrides".to_string(),
            paragraphs: session.overrides.iter().map(|f| format!("{} is recorded for this session.", f.as_str())).collect(),
            table: None,
        });
    }

    let mut steps = Vec::new();
    for slot in &blueprint.slots {
        match slot.status {
            SlotStatus::Undecided => steps.push(format!("Decide a component for {}.", slot.slot.label())),
            SlotStatus::Conflicted => steps.push(format!("Resolve the contradiction affecting {}.", slot.slot.label())),
            SlotStatus::Selected => {}
        }
    }
    for c in &outcomes.contradictions {
        if c.severity == ConflictSeverity::Advisory {
            steps.push(format!("Revisit `{}`: an answer disagrees with the recommended access model.", c.subject));
        }
    }
    if steps.is_empty() {
        steps.push("Validate the selected components with a proof of concept.".to_string());
    }
    sections.push(Section { heading: "Next steps".to_string(), paragraphs: steps, table: None });

    ViewDocument {
        view: ViewKind::Output,
        title: ViewKind::Output.title().to_string(),
        sections,
        edges: Vec::new(),
        cycle: None,
    }
}

pub(crate) fn status_str(status: SlotStatus) -> &'static str {
    match status {
        SlotStatus::Selected => "selected",
        SlotStatus::Undecided => "undecided",
        SlotStatus::Conflicted => "conflicted",
    }
}

pub(crate) fn verdict_sentence(verdict: &Verdict) -> String {
    match verdict {
        Verdict::Incomplete { missing } => format!("Incomplete: {} required evaluation question(s) unanswered.", missing.len()),
        Verdict::NotSuitable { reasons } => {
            let codes: Vec<&str> = reasons.iter().map(|r| r.reason_code.as_str()).collect();
            format!("Not suitable: {}.", codes.join(", "))
        }
        Verdict::SuitableWithRisks { risks, .. } => format!("Suitable with {} risk(s).", risks.len()),
        Verdict::Suitable { .. } => "Suitable.".to_string(),
    }
}

pub(crate) fn fitness_sentence(outcomes: &Outcomes, reference: f64) -> String {
    let f = &outcomes.fitness;
    match f.ratio {
        Some(r) => format!(
            "{:.2} ({} beneficial, {} not beneficial, {} not applicable); advisory reference {:.2}.",
            r, f.beneficial, f.not_beneficial, f.not_applicable, reference
        ),
        None => "Incomplete: no applicable fitness property assessed.".to_string(),
    }
}

pub(crate) fn recommendation_sentence(rec: &Recommendation) -> String {
    match rec {
        Recommendation::Incomplete => "Incomplete: no usage-control answer carries access weights yet.".to_string(),
        Recommendation::Ready(r) => {
            let ranking: Vec<String> = r.ranking.iter().map(|m| format!("{} ({})", m, r.scores.get(*m))).collect();
            let tie = if r.tie_broken { "; ties broken towards the more restrictive model" } else { "" };
            format!("{} first. Ranking: {}{}.", r.top(), ranking.join(", "), tie)
        }
    }
}
