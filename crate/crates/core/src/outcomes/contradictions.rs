use serde::Serialize;

use super::access::{AccessModel, Recommendation};
use crate::catalog::{Catalog, Effect, Relation};
use crate::engine::{self, ActiveState, Session};

/// Constraint subject compared against the derived access recommendation.
pub const ACCESS_MODEL_SUBJECT: &str = "access_model";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictSeverity {
    /// Two asserted constraints disagree.
    Hard,
    /// An asserted constraint disagrees with the derived recommendation.
    Advisory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SideSource {
    Answer { question_id: String, option_id: String },
    Recommendation { model: AccessModel },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContradictionSide {
    pub source: SideSource,
    pub relation: Relation,
    pub value: String,
}

impl ContradictionSide {
    pub fn answer(&self) -> Option<(&str, &str)> {
        match &self.source {
            SideSource::Answer { question_id, option_id } => Some((question_id, option_id)),
            SideSource::Recommendation { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Contradiction {
    pub subject: String,
    pub severity: ConflictSeverity,
    pub side_a: ContradictionSide,
    pub side_b: ContradictionSide,
}

/// Whether two constraints cannot both hold: equal subjects with different
/// `equals` values, or `equals v` against `excludes v`.
pub fn constraints_conflict(
    subject_a: &str,
    relation_a: Relation,
    value_a: &str,
    subject_b: &str,
    relation_b: Relation,
    value_b: &str,
) -> bool {
    if subject_a != subject_b {
        return false;
    }
    match (relation_a, relation_b) {
        (Relation::Equals, Relation::Equals) => value_a != value_b,
        (Relation::Equals, Relation::Excludes) | (Relation::Excludes, Relation::Equals) => value_a == value_b,
        (Relation::Excludes, Relation::Excludes) => false,
    }
}

struct ActiveConstraint<'a> {
    position: usize,
    index: usize,
    question_id: &'a str,
    option_id: &'a str,
    subject: &'a str,
    relation: Relation,
    value: &'a str,
}

impl ActiveConstraint<'_> {
    fn side(&self) -> ContradictionSide {
        ContradictionSide {
            source: SideSource::Answer { question_id: self.question_id.to_string(), option_id: self.option_id.to_string() },
            relation: self.relation,
            value: self.value.to_string(),
        }
    }
}

/// Hard conflicts between every pair of active constraints, plus advisory
/// conflicts between `access_model` constraints and the top-ranked model.
/// Ordered by subject, then canonical position of each side, so the result
/// does not depend on the order answers were recorded in.
pub fn contradictions_from_state(_catalog: &Catalog, state: &ActiveState, recommendation: &Recommendation) -> Vec<Contradiction> {
    let constraints: Vec<ActiveConstraint<'_>> = state
        .effects
        .iter()
        .filter_map(|e| match &e.effect {
            Effect::Constraint { subject, relation, value } => Some(ActiveConstraint {
                position: e.position,
                index: e.index,
                question_id: &e.question_id,
                option_id: &e.option_id,
                subject,
                relation: *relation,
                value,
            }),
            _ => None,
        })
        .collect();

    let mut found: Vec<(String, (usize, usize), (usize, usize), Contradiction)> = Vec::new();
    for (i, a) in constraints.iter().enumerate() {
        for b in &constraints[i + 1..] {
            if constraints_conflict(a.subject, a.relation, a.value, b.subject, b.relation, b.value) {
                found.push((
                    a.subject.to_string(),
                    (a.position, a.index),
                    (b.position, b.index),
                    Contradiction {
                        subject: a.subject.to_string(),
                        severity: ConflictSeverity::Hard,
                        side_a: a.side(),
                        side_b: b.side(),
                    },
                ));
            }
        }
    }

    if let Recommendation::Ready(rec) = recommendation {
        let top = rec.top();
        for c in constraints.iter().filter(|c| c.subject == ACCESS_MODEL_SUBJECT) {
            if constraints_conflict(c.subject, c.relation, c.value, ACCESS_MODEL_SUBJECT, Relation::Equals, top.as_str()) {
                found.push((
                    c.subject.to_string(),
                    (c.position, c.index),
                    (usize::MAX, 0),
                    Contradiction {
                        subject: c.subject.to_string(),
                        severity: ConflictSeverity::Advisory,
                        side_a: c.side(),
                        side_b: ContradictionSide {
                            source: SideSource::Recommendation { model: top },
                            relation: Relation::Equals,
                            value: top.as_str().to_string(),
                        },
                    },
                ));
            }
        }
    }

    found.sort_by(|x, y| (&x.0, x.1, x.2).cmp(&(&y.0, y.1, y.2)));
    found.into_iter().map(|(_, _, _, c)| c).collect()
}

pub fn detect_contradictions(catalog: &Catalog, session: &Session) -> Vec<Contradiction> {
    let state = engine::active_state(catalog, session);
    let recommendation = super::recommend_from_state(catalog, &state);
    contradictions_from_state(catalog, &state, &recommendation)
}
