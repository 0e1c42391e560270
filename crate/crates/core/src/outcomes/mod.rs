//! Stage outputs computed from a session snapshot: the suitability verdict,
//! subjective fitness, access-model recommendation, contradictions and the
//! need-to-decision trace.

mod access;
mod contradictions;
mod trace;

use serde::Serialize;

use crate::catalog::{Catalog, Effect, FitnessAssessment, StageKind};
use crate::engine::{self, ActiveState, Eligibility, Session};

pub use access::{recommend_access_model, recommend_from_state, AccessModel, AccessRecommendation, AccessScores, Contribution, Recommendation};
pub use contradictions::{
    constraints_conflict, contradictions_from_state, detect_contradictions, ConflictSeverity, Contradiction, ContradictionSide, SideSource,
    ACCESS_MODEL_SUBJECT,
};
pub use trace::{
    answer_node_id, component_node_id, constraint_node_id, requirement_node_id, trace_decision, trace_graph, EdgeRelation, TraceChain,
    TraceEdge, TraceError, TraceGraph, TraceNode, TraceNodeKind,
};

/// Provenance of a disqualifier or risk flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReasonRef {
    pub question_id: String,
    pub option_id: String,
    pub reason_code: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitnessScore {
    pub beneficial: u32,
    pub not_beneficial: u32,
    pub not_applicable: u32,
    /// `beneficial / (beneficial + not_beneficial)`; `None` when no
    /// applicable property was assessed.
    pub ratio: Option<f64>,
}

impl FitnessScore {
    pub fn from_counts(beneficial: u32, not_beneficial: u32, not_applicable: u32) -> Self {
        let denominator = beneficial + not_beneficial;
        let ratio = (denominator > 0).then(|| f64::from(beneficial) / f64::from(denominator));
        FitnessScore { beneficial, not_beneficial, not_applicable, ratio }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Incomplete { missing: Vec<String> },
    NotSuitable { reasons: Vec<ReasonRef> },
    SuitableWithRisks { risks: Vec<ReasonRef>, fitness: FitnessScore },
    Suitable { fitness: FitnessScore },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Incomplete { .. } => "incomplete",
            Verdict::NotSuitable { .. } => "not_suitable",
            Verdict::SuitableWithRisks { .. } => "suitable_with_risks",
            Verdict::Suitable { .. } => "suitable",
        }
    }

    pub fn is_suitable(&self) -> bool {
        matches!(self, Verdict::Suitable { .. } | Verdict::SuitableWithRisks { .. })
    }
}

pub fn fitness_from_state(state: &ActiveState) -> FitnessScore {
    let (mut b, mut nb, mut na) = (0, 0, 0);
    for e in state.effects_in(StageKind::Evaluation) {
        if let Effect::Fitness { assessment } = e.effect {
            match assessment {
                FitnessAssessment::Beneficial => b += 1,
                FitnessAssessment::NotBeneficial => nb += 1,
                FitnessAssessment::NotApplicable => na += 1,
            }
        }
    }
    FitnessScore::from_counts(b, nb, na)
}

pub fn fitness_score(catalog: &Catalog, session: &Session) -> FitnessScore {
    fitness_from_state(&engine::active_state(catalog, session))
}

fn reasons(state: &ActiveState, want_disqualify: bool) -> Vec<ReasonRef> {
    state
        .effects_in(StageKind::Evaluation)
        .filter_map(|e| match &e.effect {
            Effect::HardDisqualify { reason_code, text } if want_disqualify => Some((reason_code, text)),
            Effect::Risk { reason_code, text } if !want_disqualify => Some((reason_code, text)),
            _ => None,
        }
        .map(|(reason_code, text)| ReasonRef {
            question_id: e.question_id.clone(),
            option_id: e.option_id.clone(),
            reason_code: reason_code.clone(),
            text: text.clone(),
        }))
        .collect()
}

/// Verdict precedence: not suitable, incomplete, suitable with risks,
/// suitable. Only required evaluation questions whose prerequisites hold
/// count as missing.
pub fn verdict_from_state(catalog: &Catalog, state: &ActiveState) -> Verdict {
    let disqualifiers = reasons(state, true);
    if !disqualifiers.is_empty() {
        return Verdict::NotSuitable { reasons: disqualifiers };
    }
    let missing: Vec<String> = catalog
        .questions_in(StageKind::Evaluation)
        .filter(|(_, q)| q.required && !state.is_answered(&q.id))
        .filter(|(_, q)| q.requires.iter().all(|p| state.option_for(&p.question_id) == Some(p.option_id.as_str())))
        .map(|(_, q)| q.id.clone())
        .collect();
    if !missing.is_empty() {
        return Verdict::Incomplete { missing };
    }
    let fitness = fitness_from_state(state);
    let risks = reasons(state, false);
    if risks.is_empty() {
        Verdict::Suitable { fitness }
    } else {
        Verdict::SuitableWithRisks { risks, fitness }
    }
}

pub fn evaluate_suitability(catalog: &Catalog, session: &Session) -> Verdict {
    verdict_from_state(catalog, &engine::active_state(catalog, session))
}

/// Everything derivable from one session snapshot, computed once.
#[derive(Debug, Clone)]
pub struct Outcomes {
    pub state: ActiveState,
    pub verdict: Verdict,
    pub fitness: FitnessScore,
    pub recommendation: Recommendation,
    pub contradictions: Vec<Contradiction>,
    pub gated: bool,
}

impl Outcomes {
    pub fn compute(catalog: &Catalog, session: &Session) -> Self {
        let state = engine::active_state(catalog, session);
        let verdict = verdict_from_state(catalog, &state);
        let fitness = fitness_from_state(&state);
        let recommendation = recommend_from_state(catalog, &state);
        let contradictions = contradictions_from_state(catalog, &state, &recommendation);
        let gated = engine::is_gated(&state, session);
        Outcomes { state, verdict, fitness, recommendation, contradictions, gated }
    }

    pub fn hard_contradictions(&self) -> impl Iterator<Item = &Contradiction> {
        self.contradictions.iter().filter(|c| c.severity == ConflictSeverity::Hard)
    }

    /// Whether the design stage can produce a blueprint at all.
    pub fn design_reachable(&self) -> bool {
        !self.gated
    }
}

/// Count of required questions in `stage` that are eligible but unanswered.
pub fn required_remaining(catalog: &Catalog, session: &Session, stage: StageKind) -> usize {
    engine::eligible_questions(catalog, session, Some(stage))
        .iter()
        .filter(|s| s.required && s.status == Eligibility::Eligible)
        .count()
}
