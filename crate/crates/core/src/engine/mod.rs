//! Session engine: replays the answer log, decides which questions are
//! eligible, and applies answers, retractions and overrides with cascading
//! invalidation of dependent answers.

mod session;

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::Serialize;
use thiserror::Error;

use crate::catalog::{Catalog, Effect, Prerequisite, Question, StageKind, SubstageKind};
use crate::outcomes::{self, Contradiction, Recommendation, ConflictSeverity};

pub use session::{LogAction, LogEntry, OverrideFlag, Session, SessionFormatError, SessionMeta, SESSION_SCHEMA};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("version conflict: expected {expected}, session is at {actual}")]
    VersionConflict { expected: u64, actual: u64 },
    #[error("unknown question `{0}`")]
    UnknownQuestion(String),
    #[error("question `{question_id}` has no option `{option_id}`")]
    UnknownOption { question_id: String, option_id: String },
    #[error("question `{question_id}` is not eligible: unmet prerequisites")]
    Ineligible { question_id: String, unmet: Vec<Prerequisite> },
    #[error("question `{question_id}` is gated_by_verdict: the use case was judged not suitable and no override is recorded")]
    Gated { question_id: String },
    #[error("not answered: `{0}`")]
    NotAnswered(String),
    #[error("catalog mismatch: session is pinned to {session}, catalog is {catalog}")]
    CatalogMismatch { session: String, catalog: String },
}

/// An effect together with the answer that activated it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourcedEffect {
    pub question_id: String,
    pub option_id: String,
    pub stage: StageKind,
    /// Canonical position of the source question.
    pub position: usize,
    /// Index of the effect within its option.
    pub index: usize,
    pub effect: Effect,
}

/// Derived view of a session: the surviving answers and their effects.
/// Contains no log positions, so equal answer sets compare equal whatever
/// path produced them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ActiveState {
    pub answers: BTreeMap<String, String>,
    pub effects: Vec<SourcedEffect>,
}

impl ActiveState {
    pub fn option_for(&self, question_id: &str) -> Option<&str> {
        self.answers.get(question_id).map(String::as_str)
    }

    pub fn is_answered(&self, question_id: &str) -> bool {
        self.answers.contains_key(question_id)
    }

    pub fn effects_in(&self, stage: StageKind) -> impl Iterator<Item = &SourcedEffect> {
        self.effects.iter().filter(move |e| e.stage == stage)
    }

    pub fn has_hard_disqualifier(&self) -> bool {
        self.effects_in(StageKind::Evaluation)
            .any(|e| matches!(e.effect, Effect::HardDisqualify { .. }))
    }

    /// Canonical JSON bytes; used to compare states across reloads.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("state serializes")
    }
}

/// Replays a log into the surviving answer map plus the log seq of each
/// surviving answer.
fn replay_answers(log: &[LogEntry]) -> (BTreeMap<String, String>, BTreeMap<String, u64>) {
    let mut answers = BTreeMap::new();
    let mut seqs = BTreeMap::new();
    for entry in log {
        let Some(qid) = &entry.question_id else { continue };
        match entry.action {
            LogAction::Answer => {
                if let Some(oid) = &entry.option_id {
                    answers.insert(qid.clone(), oid.clone());
                    seqs.insert(qid.clone(), entry.seq);
                }
            }
            LogAction::Retract | LogAction::Invalidated => {
                answers.remove(qid);
                seqs.remove(qid);
            }
            LogAction::Override => {}
        }
    }
    (answers, seqs)
}

fn build_state(catalog: &Catalog, answers: BTreeMap<String, String>) -> ActiveState {
    let mut effects = Vec::new();
    for (position, (loc, q)) in catalog.questions().enumerate() {
        let Some(oid) = answers.get(&q.id) else { continue };
        let Some(opt) = q.option(oid) else { continue };
        for (index, effect) in opt.effects.iter().enumerate() {
            effects.push(SourcedEffect {
                question_id: q.id.clone(),
                option_id: opt.id.clone(),
                stage: loc.stage,
                position,
                index,
                effect: effect.clone(),
            });
        }
    }
    ActiveState { answers, effects }
}

/// Recomputes the active state of `session` by replaying its log.
pub fn active_state(catalog: &Catalog, session: &Session) -> ActiveState {
    build_state(catalog, replay_answers(&session.log).0)
}

/// Log seq of the entry that recorded each active answer.
pub fn answer_seqs(session: &Session) -> BTreeMap<String, u64> {
    replay_answers(&session.log).1
}

fn unmet_prerequisites(q: &Question, answers: &BTreeMap<String, String>) -> Vec<Prerequisite> {
    q.requires
        .iter()
        .filter(|p| answers.get(&p.question_id) != Some(&p.option_id))
        .cloned()
        .collect()
}

/// True when later stages are locked by a not-suitable verdict.
pub fn is_gated(state: &ActiveState, session: &Session) -> bool {
    state.has_hard_disqualifier() && !session.has_override(OverrideFlag::ProceedDespiteNotSuitable)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Eligibility {
    Answered,
    Eligible,
    Blocked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockReason {
    GatedByVerdict,
    Prerequisites { unmet: Vec<Prerequisite> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuestionStatus {
    pub question_id: String,
    pub stage: StageKind,
    pub substage: SubstageKind,
    pub required: bool,
    pub status: Eligibility,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub option_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<BlockReason>,
}

/// Eligibility of every question (optionally one stage) in canonical order.
pub fn eligible_questions(catalog: &Catalog, session: &Session, stage: Option<StageKind>) -> Vec<QuestionStatus> {
    let state = active_state(catalog, session);
    question_statuses(catalog, session, &state, stage)
}

pub(crate) fn question_statuses(
    catalog: &Catalog,
    session: &Session,
    state: &ActiveState,
    stage: Option<StageKind>,
) -> Vec<QuestionStatus> {
    let gated = is_gated(state, session);
    catalog
        .questions()
        .filter(|(loc, _)| stage.is_none_or(|s| s == loc.stage))
        .map(|(loc, q)| {
            let unmet = unmet_prerequisites(q, &state.answers);
            let (status, reason) = if gated && loc.stage != StageKind::Evaluation {
                (Eligibility::Blocked, Some(BlockReason::GatedByVerdict))
            } else if !unmet.is_empty() {
                (Eligibility::Blocked, Some(BlockReason::Prerequisites { unmet }))
            } else if state.is_answered(&q.id) {
                (Eligibility::Answered, None)
            } else {
                (Eligibility::Eligible, None)
            };
            QuestionStatus {
                question_id: q.id.clone(),
                stage: loc.stage,
                substage: loc.substage,
                required: q.required,
                status,
                option_id: state.option_for(&q.id).map(str::to_string),
                reason,
            }
        })
        .collect()
}

/// Points the user back at an earlier stage whose outcome a new
/// contradiction calls into question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReopenHint {
    pub subject: String,
    pub stage: StageKind,
    pub question_ids: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangeSummary {
    pub version: u64,
    pub triggered_effects: Vec<SourcedEffect>,
    pub invalidated: Vec<String>,
    pub contradictions: Vec<Contradiction>,
    pub reopen_hints: Vec<ReopenHint>,
}

fn check_preconditions(catalog: &Catalog, session: &Session, expected_version: u64) -> Result<(), EngineError> {
    if session.catalog_hash != catalog.hash() {
        return Err(EngineError::CatalogMismatch {
            session: session.catalog_hash.clone(),
            catalog: catalog.hash().to_string(),
        });
    }
    if expected_version != session.version {
        return Err(EngineError::VersionConflict { expected: expected_version, actual: session.version });
    }
    Ok(())
}

/// Appends `invalidated` entries for every active answer that lost its
/// prerequisites or sits behind the verdict gate. Runs to a fixed point.
fn cascade(catalog: &Catalog, session: &mut Session, at: DateTime<Utc>) -> Vec<String> {
    let mut invalidated = Vec::new();
    loop {
        let state = active_state(catalog, session);
        let gated = is_gated(&state, session);
        let victim = catalog.questions().find_map(|(loc, q)| {
            if !state.is_answered(&q.id) {
                return None;
            }
            let locked = gated && loc.stage != StageKind::Evaluation;
            (locked || !unmet_prerequisites(q, &state.answers).is_empty()).then(|| q.id.clone())
        });
        match victim {
            Some(qid) => {
                session.append(at, LogAction::Invalidated, Some(&qid), None, None);
                invalidated.push(qid);
            }
            None => return invalidated,
        }
    }
}

fn summarize(
    catalog: &Catalog,
    session: &Session,
    before: &[Contradiction],
    triggered_effects: Vec<SourcedEffect>,
    invalidated: Vec<String>,
    changed_stage: Option<StageKind>,
) -> ChangeSummary {
    let state = active_state(catalog, session);
    let recommendation = outcomes::recommend_from_state(catalog, &state);
    let after = outcomes::contradictions_from_state(catalog, &state, &recommendation);
    let fresh: Vec<Contradiction> = after.into_iter().filter(|c| !before.contains(c)).collect();
    let reopen_hints = fresh
        .iter()
        .filter_map(|c| reopen_hint(catalog, c, &recommendation, changed_stage))
        .collect();
    ChangeSummary { version: session.version, triggered_effects, invalidated, contradictions: fresh, reopen_hints }
}

fn reopen_hint(
    catalog: &Catalog,
    c: &Contradiction,
    recommendation: &Recommendation,
    changed_stage: Option<StageKind>,
) -> Option<ReopenHint> {
    let changed = changed_stage?;
    match c.severity {
        ConflictSeverity::Advisory => {
            let Recommendation::Ready(rec) = recommendation else { return None };
            if changed <= StageKind::Elicitation {
                return None;
            }
            let mut question_ids: Vec<String> = rec.contributions.iter().map(|k| k.question_id.clone()).collect();
            question_ids.dedup();
            Some(ReopenHint {
                subject: c.subject.clone(),
                stage: StageKind::Elicitation,
                question_ids,
                message: format!(
                    "design asserts `{}` {} `{}` but elicitation recommends `{}`; revisit the elicitation answers or the design choice",
                    c.subject,
                    c.side_a.relation,
                    c.side_a.value,
                    rec.ranking[0].as_str()
                ),
            })
        }
        ConflictSeverity::Hard => {
            let sources = [c.side_a.answer(), c.side_b.answer()];
            let earliest = sources
                .iter()
                .flatten()
                .filter_map(|(qid, _)| catalog.stage_of(qid).map(|s| (s, qid.to_string())))
                .min()?;
            if earliest.0 >= changed {
                return None;
            }
            let question_ids: Vec<String> = sources
                .iter()
                .flatten()
                .filter(|(qid, _)| catalog.stage_of(qid) == Some(earliest.0))
                .map(|(qid, _)| qid.to_string())
                .collect();
            Some(ReopenHint {
                subject: c.subject.clone(),
                stage: earliest.0,
                question_ids,
                message: format!("`{}` was fixed during {}; revisit it or change the new answer", c.subject, earliest.0),
            })
        }
    }
}

impl Session {
    /// Records (or changes) the answer to one question.
    pub fn record_answer(
        &mut self,
        catalog: &Catalog,
        question_id: &str,
        option_id: &str,
        note: Option<String>,
        expected_version: u64,
        at: DateTime<Utc>,
    ) -> Result<ChangeSummary, EngineError> {
        check_preconditions(catalog, self, expected_version)?;
        let loc = catalog
            .location(question_id)
            .ok_or_else(|| EngineError::UnknownQuestion(question_id.to_string()))?;
        let question = catalog.question(question_id).expect("located question exists");
        let option = question.option(option_id).ok_or_else(|| EngineError::UnknownOption {
            question_id: question_id.to_string(),
            option_id: option_id.to_string(),
        })?;

        let state = active_state(catalog, self);
        if is_gated(&state, self) && loc.stage != StageKind::Evaluation {
            return Err(EngineError::Gated { question_id: question_id.to_string() });
        }
        let unmet = unmet_prerequisites(question, &state.answers);
        if !unmet.is_empty() {
            return Err(EngineError::Ineligible { question_id: question_id.to_string(), unmet });
        }
        let recommendation = outcomes::recommend_from_state(catalog, &state);
        let before = outcomes::contradictions_from_state(catalog, &state, &recommendation);

        if state.option_for(question_id) == Some(option_id) {
            return Ok(ChangeSummary {
                version: self.version,
                triggered_effects: Vec::new(),
                invalidated: Vec::new(),
                contradictions: Vec::new(),
                reopen_hints: Vec::new(),
            });
        }
        if state.is_answered(question_id) {
            self.append(at, LogAction::Retract, Some(question_id), None, None);
        }
        self.append(at, LogAction::Answer, Some(question_id), Some(option_id), note);
        let invalidated = cascade(catalog, self, at);

        let position = catalog.position(question_id).expect("located question has a position");
        let triggered = option
            .effects
            .iter()
            .enumerate()
            .map(|(index, effect)| SourcedEffect {
                question_id: question_id.to_string(),
                option_id: option_id.to_string(),
                stage: loc.stage,
                position,
                index,
                effect: effect.clone(),
            })
            .collect();
        Ok(summarize(catalog, self, &before, triggered, invalidated, Some(loc.stage)))
    }

    /// Withdraws an answer; dependents are invalidated transitively.
    pub fn retract_answer(
        &mut self,
        catalog: &Catalog,
        question_id: &str,
        expected_version: u64,
        at: DateTime<Utc>,
    ) -> Result<ChangeSummary, EngineError> {
        check_preconditions(catalog, self, expected_version)?;
        let state = active_state(catalog, self);
        if !state.is_answered(question_id) {
            return Err(EngineError::NotAnswered(question_id.to_string()));
        }
        let recommendation = outcomes::recommend_from_state(catalog, &state);
        let before = outcomes::contradictions_from_state(catalog, &state, &recommendation);
        self.append(at, LogAction::Retract, Some(question_id), None, None);
        let invalidated = cascade(catalog, self, at);
        Ok(summarize(catalog, self, &before, Vec::new(), invalidated, catalog.stage_of(question_id)))
    }

    /// Records an override flag. Setting a flag that is already present is
    /// a no-op and leaves the version unchanged.
    pub fn set_override(
        &mut self,
        catalog: &Catalog,
        flag: OverrideFlag,
        note: Option<String>,
        expected_version: u64,
        at: DateTime<Utc>,
    ) -> Result<ChangeSummary, EngineError> {
        check_preconditions(catalog, self, expected_version)?;
        let state = active_state(catalog, self);
        let recommendation = outcomes::recommend_from_state(catalog, &state);
        let before = outcomes::contradictions_from_state(catalog, &state, &recommendation);
        if !self.has_override(flag) {
            self.append_override(at, flag, note);
        }
        Ok(summarize(catalog, self, &before, Vec::new(), Vec::new(), None))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageProgress {
    pub stage: StageKind,
    pub answered: usize,
    pub required_remaining: usize,
    pub output_ready: bool,
}

/// Per-stage progress and whether each stage's output can be produced.
pub fn stage_status(catalog: &Catalog, session: &Session) -> Vec<StageProgress> {
    let state = active_state(catalog, session);
    let statuses = question_statuses(catalog, session, &state, None);
    let verdict = outcomes::verdict_from_state(catalog, &state);
    let recommendation = outcomes::recommend_from_state(catalog, &state);
    let contradictions = outcomes::contradictions_from_state(catalog, &state, &recommendation);
    let hard = contradictions.iter().any(|c| c.severity == ConflictSeverity::Hard);
    let gated = is_gated(&state, session);

    StageKind::ALL
        .iter()
        .map(|&stage| {
            let in_stage = statuses.iter().filter(|s| s.stage == stage);
            let answered = in_stage.clone().filter(|s| s.status == Eligibility::Answered).count();
            let required_remaining = in_stage
                .filter(|s| s.required && s.status == Eligibility::Eligible)
                .count();
            let output_ready = match stage {
                StageKind::Evaluation => !matches!(verdict, outcomes::Verdict::Incomplete { .. }),
                StageKind::Elicitation => matches!(recommendation, Recommendation::Ready(_)),
                StageKind::Design => {
                    let gate_open = !gated && !matches!(verdict, outcomes::Verdict::Incomplete { .. });
                    gate_open && answered > 0 && required_remaining == 0 && !hard
                }
            };
            StageProgress { stage, answered, required_remaining, output_ready }
        })
        .collect()
}
