//! Component blueprint: the layered canvas of components selected during
//! design, its three rendered views, and report export.

mod report;
mod views;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::catalog::{Catalog, Effect, SlotKey, StageKind};
use crate::engine::{OverrideFlag, Session};
use crate::outcomes::{self, component_node_id, requirement_node_id, answer_node_id, ConflictSeverity, Contradiction, Outcomes};

pub use report::{export_report, parse_views, ReportError, DEFAULT_FITNESS_REFERENCE, ReportFormat, ReportOptions, REPORT_SCHEMA};
pub use views::{render_view, EdgeKind, ProcessEdge, Section, Table, ViewDocument, ViewError, ViewKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotStatus {
    Selected,
    Undecided,
    Conflicted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnswerRef {
    pub question_id: String,
    pub option_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelectedComponent {
    pub component_id: String,
    pub name: String,
    pub rationale: Vec<String>,
    pub sources: Vec<AnswerRef>,
    /// Active requirements this selection derives from.
    pub requirements: Vec<String>,
    /// Node ids in the session's trace graph.
    pub trace_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotDecision {
    #[serde(flatten)]
    pub slot: SlotKey,
    pub mandatory: bool,
    pub status: SlotStatus,
    pub components: Vec<SelectedComponent>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GeneratedFrom {
    pub session_id: String,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentBlueprint {
    pub generated_from: GeneratedFrom,
    pub overrides: Vec<OverrideFlag>,
    pub slots: Vec<SlotDecision>,
    pub contradiction_snapshot: Vec<Contradiction>,
}

impl ComponentBlueprint {
    pub fn slot(&self, key: &SlotKey) -> Option<&SlotDecision> {
        self.slots.iter().find(|s| s.slot == *key)
    }

    /// Selected component ids in slot order.
    pub fn component_ids(&self) -> Vec<&str> {
        self.slots
            .iter()
            .flat_map(|s| s.components.iter().map(|c| c.component_id.as_str()))
            .collect()
    }

    pub fn mandatory_slots(&self) -> impl Iterator<Item = &SlotDecision> {
        self.slots.iter().filter(|s| s.mandatory)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlueprintError {
    #[error("stage gated: the use case was judged not suitable and no override is recorded")]
    StageGated,
    #[error("blocked by {} hard contradiction(s)", .0.len())]
    BlockedByContradictions(Vec<Contradiction>),
}

pub fn generate_blueprint(catalog: &Catalog, session: &Session, force: bool) -> Result<ComponentBlueprint, BlueprintError> {
    let outcomes = Outcomes::compute(catalog, session);
    blueprint_from_outcomes(catalog, session, &outcomes, force)
}

pub(crate) fn blueprint_from_outcomes(
    catalog: &Catalog,
    session: &Session,
    outcomes: &Outcomes,
    force: bool,
) -> Result<ComponentBlueprint, BlueprintError> {
    if !outcomes.design_reachable() {
        return Err(BlueprintError::StageGated);
    }
    let hard: Vec<Contradiction> = outcomes.hard_contradictions().cloned().collect();
    if !hard.is_empty() && !force {
        return Err(BlueprintError::BlockedByContradictions(hard));
    }
    let conflicted_sources: BTreeSet<&str> = hard
        .iter()
        .flat_map(|c| [c.side_a.answer(), c.side_b.answer()])
        .flatten()
        .map(|(qid, _)| qid)
        .collect();

    let active_reqs: BTreeSet<&str> = outcomes
        .state
        .effects
        .iter()
        .filter_map(|e| match &e.effect {
            Effect::Requirement { req_id, .. } => Some(req_id.as_str()),
            _ => None,
        })
        .collect();

    let mut by_slot: BTreeMap<usize, Vec<SelectedComponent>> = BTreeMap::new();
    for e in outcomes.state.effects_in(StageKind::Design) {
        let Effect::ComponentSelect { component_id, rationale, derives_from } = &e.effect else { continue };
        let Some(def) = catalog.component(component_id) else { continue };
        let Some(slot_pos) = def.slot().position() else { continue };
        let entries = by_slot.entry(slot_pos).or_default();
        let idx = match entries.iter().position(|c| c.component_id == *component_id) {
            Some(i) => i,
            None => {
                entries.push(SelectedComponent {
                    component_id: component_id.clone(),
                    name: def.name.clone(),
                    rationale: Vec::new(),
                    sources: Vec::new(),
                    requirements: Vec::new(),
                    trace_refs: vec![component_node_id(component_id)],
                });
                entries.len() - 1
            }
        };
        let entry = &mut entries[idx];
        entry.rationale.push(rationale.clone());
        entry.sources.push(AnswerRef { question_id: e.question_id.clone(), option_id: e.option_id.clone() });
        entry.trace_refs.push(answer_node_id(&e.question_id));
        for req in derives_from.iter().filter(|r| active_reqs.contains(r.as_str())) {
            if !entry.requirements.contains(req) {
                entry.requirements.push(req.clone());
                entry.trace_refs.push(requirement_node_id(req));
            }
        }
    }

    let slots = SlotKey::CANONICAL
        .iter()
        .enumerate()
        .filter_map(|(pos, key)| {
            let components = by_slot.remove(&pos).unwrap_or_default();
            let mandatory = key.aspect.is_mandatory();
            if components.is_empty() && !mandatory {
                return None;
            }
            let conflicted = components
                .iter()
                .any(|c| c.sources.iter().any(|s| conflicted_sources.contains(s.question_id.as_str())));
            let (status, note) = if components.is_empty() {
                (SlotStatus::Undecided, Some("no design answer selects a component for this mandatory aspect".to_string()))
            } else if conflicted {
                (SlotStatus::Conflicted, Some("a source answer takes part in a hard contradiction".to_string()))
            } else {
                (SlotStatus::Selected, None)
            };
            Some(SlotDecision { slot: *key, mandatory, status, components, note })
        })
        .collect();

    Ok(ComponentBlueprint {
        generated_from: GeneratedFrom { session_id: session.id.clone(), version: session.version },
        overrides: session.overrides.iter().copied().collect(),
        slots,
        contradiction_snapshot: outcomes.contradictions.clone(),
    })
}

/// Hard contradictions that would block [`generate_blueprint`] without `force`.
pub fn blocking_contradictions(catalog: &Catalog, session: &Session) -> Vec<Contradiction> {
    outcomes::detect_contradictions(catalog, session)
        .into_iter()
        .filter(|c| c.severity == ConflictSeverity::Hard)
        .collect()
}

#[cfg(test)]
mod tests;
