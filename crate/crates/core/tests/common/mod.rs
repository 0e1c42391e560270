//! Shared fixtures, random catalog generation and brute-force oracles.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::{DateTime, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use ledgerfit::catalog::{self, Catalog};
use ledgerfit::engine::{self, LogAction, OverrideFlag, Session, SessionMeta};

pub const GOLDEN_HASH: &str = "c6a6db99cfb1ee6cc9afaef1f140bfaba0d0f28370efaeb6f564b7f332c305d7";

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 1, 9, 0, 0).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// (question_id, option_id) pairs of the committed clinical-trial answers.
pub fn golden_answers() -> Vec<(String, String)> {
    let text = std::fs::read_to_string(fixture("clinical-trial.answers.json")).unwrap();
    let doc: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["catalog_hash"], GOLDEN_HASH);
    doc["answers"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| (a["question_id"].as_str().unwrap().to_owned(), a["option_id"].as_str().unwrap().to_owned()))
        .collect()
}

pub fn golden_components() -> Vec<String> {
    let text = std::fs::read_to_string(fixture("clinical-trial.components.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn apply_all(catalog: &Catalog, session: &mut Session, answers: &[(String, String)]) {
    for (q, o) in answers {
        let v = session.version;
        session
            .record_answer(catalog, q, o, None, v, t0())
            .unwrap_or_else(|e| panic!("{q}={o}: {e}"));
    }
}

pub fn golden_session() -> (Catalog, Session) {
    let catalog = catalog::load_default_catalog();
    let mut session = Session::with_id("golden", &catalog, SessionMeta::new("clinical trial", t0()));
    apply_all(&catalog, &mut session, &golden_answers());
    (catalog, session)
}

pub fn answer(catalog: &Catalog, session: &mut Session, q: &str, o: &str) -> engine::ChangeSummary {
    let v = session.version;
    session.record_answer(catalog, q, o, None, v, t0()).unwrap_or_else(|e| panic!("{q}={o}: {e}"))
}

pub fn fresh(catalog: &Catalog) -> Session {
    Session::with_id("s", catalog, SessionMeta::new("test", t0()))
}

// ---------------------------------------------------------------------------
// Mini catalogs
// ---------------------------------------------------------------------------

const SUBSTAGES: [(&str, &str); 9] = [
    ("evaluation", "business_process"),
    ("evaluation", "existing_it"),
    ("evaluation", "subjective_fitness"),
    ("elicitation", "stakeholder_req"),
    ("elicitation", "usage_control_req"),
    ("elicitation", "qos_req"),
    ("design", "application_layer"),
    ("design", "middleware_layer"),
    ("design", "infrastructure_layer"),
];

const SUBJECTS: [(&str, &[&str]); 3] = [
    ("access_model", &["public", "permissioned", "private"]),
    ("native_token", &["required", "none"]),
    ("state_sharing", &["all", "need_to_know"]),
];

pub fn mini_components() -> Value {
    json!([
        {"id": "ui", "name": "Web UI", "layer": "application", "aspect": "interaction_integration",
         "description": "front end", "mandatory_slot": true, "depends_on": ["logic"]},
        {"id": "logic", "name": "Contract logic", "layer": "middleware", "aspect": "smart_contracts",
         "description": "business rules", "mandatory_slot": false},
        {"id": "bft", "name": "BFT consensus", "layer": "infrastructure", "sublayer": "network",
         "aspect": "consensus", "description": "ordering", "mandatory_slot": true},
        {"id": "pow", "name": "Proof of work", "layer": "infrastructure", "sublayer": "network",
         "aspect": "consensus", "description": "mining", "mandatory_slot": true},
        {"id": "iam", "name": "IAM", "layer": "infrastructure", "sublayer": "network",
         "aspect": "security", "description": "identities", "mandatory_slot": true},
        {"id": "refs", "name": "On-chain refs", "layer": "infrastructure", "sublayer": "storage",
         "aspect": "onchain_data", "description": "hashes", "mandatory_slot": true},
        {"id": "vault", "name": "Off-chain vault", "layer": "infrastructure", "sublayer": "storage",
         "aspect": "offchain_storage_linking", "description": "blobs", "mandatory_slot": true}
    ])
}

/// Knobs for [`mini_catalog`].
#[derive(Debug, Clone, Copy)]
pub struct MiniConfig {
    pub max_questions: usize,
    /// Put an unconditional disqualifier on the first question.
    pub disqualifier: bool,
}

impl Default for MiniConfig {
    fn default() -> Self {
        MiniConfig { max_questions: 8, disqualifier: false }
    }
}

fn constraint(rng: &mut ChaCha8Rng) -> Value {
    let (subject, values) = SUBJECTS[rng.random_range(0..SUBJECTS.len())];
    let value = *values.choose(rng).unwrap();
    let relation = if rng.random_bool(0.7) { "equals" } else { "excludes" };
    json!({"type": "constraint", "subject": subject, "relation": relation, "value": value})
}

fn effects_for(stage: &str, substage: &str, oi: usize, rng: &mut ChaCha8Rng) -> Vec<Value> {
    let mut out = Vec::new();
    match (stage, substage) {
        ("evaluation", "subjective_fitness") => {
            let assessment = match oi {
                0 => "beneficial",
                _ => ["beneficial", "not_beneficial", "not_applicable"][rng.random_range(0..3)],
            };
            out.push(json!({"type": "fitness", "assessment": assessment}));
        }
        ("evaluation", _) => {
            if rng.random_bool(0.15) {
                out.push(json!({"type": "hard_disqualify", "reason_code": format!("dq{oi}"), "text": "disqualified"}));
            }
            if rng.random_bool(0.2) {
                out.push(json!({"type": "risk", "reason_code": format!("risk{oi}"), "text": "risky"}));
            }
        }
        ("elicitation", _) => {
            if rng.random_bool(0.8) {
                out.push(json!({"type": "access_weight",
                    "public": rng.random_range(0..=3), "permissioned": rng.random_range(0..=3), "private": rng.random_range(0..=3)}));
            }
            if rng.random_bool(0.35) {
                out.push(constraint(rng));
            }
        }
        _ => {
            if rng.random_bool(0.5) {
                let pool = ["ui", "logic", "bft", "pow", "iam", "refs", "vault"];
                let id = *pool.choose(rng).unwrap();
                out.push(json!({"type": "component_select", "component_id": id, "rationale": "chosen"}));
            }
            if rng.random_bool(0.35) {
                out.push(constraint(rng));
            }
        }
    }
    out
}

/// A random catalog with at most `cfg.max_questions` questions spread over
/// the nine substages. Always free of validation errors.
pub fn mini_catalog(rng: &mut ChaCha8Rng, cfg: MiniConfig) -> Catalog {
    let n = rng.random_range(1..=cfg.max_questions);
    let mut slots: Vec<usize> = (0..n).map(|_| rng.random_range(0..SUBSTAGES.len())).collect();
    if cfg.disqualifier {
        slots[0] = 0;
    }
    slots.sort_unstable();

    // (id, option ids) of questions emitted so far, for prerequisites.
    let mut earlier: Vec<(String, Vec<String>)> = Vec::new();
    let mut substage_questions: Vec<Vec<Value>> = vec![Vec::new(); SUBSTAGES.len()];
    for (i, &slot) in slots.iter().enumerate() {
        let (stage, substage) = SUBSTAGES[slot];
        let id = format!("q{i}");
        let n_opts = rng.random_range(2..=3);
        let options: Vec<Value> = (0..n_opts)
            .map(|oi| {
                let mut effects = effects_for(stage, substage, oi, rng);
                if cfg.disqualifier && i == 0 && oi == 0 {
                    effects.retain(|e| e["type"] != "hard_disqualify");
                    effects.push(json!({"type": "hard_disqualify", "reason_code": "forced", "text": "forced disqualifier"}));
                }
                json!({"id": format!("o{oi}"), "label": format!("Option {oi}"), "effects": effects})
            })
            .collect();
        let mut requires = Vec::new();
        let skip_pre = cfg.disqualifier && i == 0;
        if !skip_pre && !earlier.is_empty() && rng.random_bool(0.3) {
            let (pid, popts) = &earlier[rng.random_range(0..earlier.len())];
            requires.push(json!({"question_id": pid, "option_id": popts.choose(rng).unwrap()}));
        }
        let kind = if substage == "subjective_fitness" { "fitness_property" } else { "standard" };
        substage_questions[slot].push(json!({
            "id": id,
            "text": format!("Question {i}?"),
            "kind": kind,
            "required": requires.is_empty(),
            "requires": requires,
            "options": options,
            "provenance": "synthesized"
        }));
        earlier.push((id, (0..n_opts).map(|oi| format!("o{oi}")).collect()));
    }

    let stages: Vec<Value> = ["evaluation", "elicitation", "design"]
        .iter()
        .enumerate()
        .map(|(si, stage)| {
            let subs: Vec<Value> = (0..3)
                .map(|k| {
                    let idx = si * 3 + k;
                    json!({"kind": SUBSTAGES[idx].1, "questions": substage_questions[idx]})
                })
                .collect();
            json!({"kind": stage, "title": stage, "output_label": "out", "substages": subs})
        })
        .collect();
    let doc = json!({"schema": 1, "id": "mini", "version": "0", "stages": stages, "components": mini_components(), "glossary": []});
    let catalog = catalog::parse_catalog(&doc.to_string()).unwrap_or_else(|e| panic!("{e}\n{doc:#}"));
    let report = catalog::validate_catalog(&catalog);
    assert!(!report.has_errors(), "{:#?}\n{doc:#}", report.diagnostics);
    catalog
}

// ---------------------------------------------------------------------------
// Random operation sequences
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Answer(String, String),
    Retract(String),
    Override,
}

/// Applies `steps` random operations. Operations the engine rejects are
/// skipped; the applied ones are returned.
pub fn random_ops(catalog: &Catalog, session: &mut Session, rng: &mut ChaCha8Rng, steps: usize) -> Vec<Op> {
    let ids: Vec<(String, Vec<String>)> = catalog
        .questions()
        .map(|(_, q)| (q.id.clone(), q.options.iter().map(|o| o.id.clone()).collect()))
        .collect();
    let mut applied = Vec::new();
    for _ in 0..steps {
        let v = session.version;
        let roll = rng.random_range(0..100);
        let (q, opts) = &ids[rng.random_range(0..ids.len())];
        let op = if roll < 70 {
            Op::Answer(q.clone(), opts.choose(rng).unwrap().clone())
        } else if roll < 95 {
            Op::Retract(q.clone())
        } else {
            Op::Override
        };
        let ok = match &op {
            Op::Answer(q, o) => session.record_answer(catalog, q, o, None, v, t0()).is_ok(),
            Op::Retract(q) => session.retract_answer(catalog, q, v, t0()).is_ok(),
            Op::Override => session
                .set_override(catalog, OverrideFlag::ProceedDespiteNotSuitable, None, v, t0())
                .is_ok(),
        };
        if ok {
            applied.push(op);
        }
    }
    applied
}

/// A fresh session given only the surviving answers of `session`, applied
/// in canonical order, plus its override flags.
pub fn rebuild_from_final(catalog: &Catalog, session: &Session) -> Session {
    let answers = oracle_active_answers(session);
    let mut fresh = fresh(catalog);
    for flag in &session.overrides {
        let v = fresh.version;
        fresh.set_override(catalog, *flag, None, v, t0()).unwrap();
    }
    for (_, q) in catalog.questions() {
        if let Some(o) = answers.get(&q.id) {
            answer(catalog, &mut fresh, &q.id, o);
        }
    }
    fresh
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Surviving answers by direct log replay.
pub fn oracle_active_answers(session: &Session) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for e in &session.log {
        match (e.action, &e.question_id, &e.option_id) {
            (LogAction::Answer, Some(q), Some(o)) => {
                out.insert(q.clone(), o.clone());
            }
            (LogAction::Retract | LogAction::Invalidated, Some(q), _) => {
                out.remove(q);
            }
            _ => {}
        }
    }
    out
}

/// (public, permissioned, private) sums, or None when no active answer
/// carries weights.
pub fn oracle_scores(catalog: &Catalog, answers: &BTreeMap<String, String>) -> Option<[i64; 3]> {
    let mut sums = [0i64; 3];
    let mut any = false;
    for (_, q) in catalog.questions() {
        let Some(o) = answers.get(&q.id).and_then(|o| q.option(o)) else { continue };
        for e in &o.effects {
            if let catalog::Effect::AccessWeight { public, permissioned, private } = e {
                any = true;
                sums[0] += i64::from(*public);
                sums[1] += i64::from(*permissioned);
                sums[2] += i64::from(*private);
            }
        }
    }
    any.then_some(sums)
}

pub const MODELS: [&str; 3] = ["public", "permissioned", "private"];

/// Ranking by exhaustive search over all 6 orderings: the winner is the
/// ordering whose (score, restrictiveness) key sequence is largest.
pub fn oracle_ranking(scores: [i64; 3]) -> (Vec<&'static str>, bool) {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let key = |p: &[usize; 3]| p.map(|m| (scores[m], m));
    let best = perms
        .iter()
        .filter(|p| key(p).windows(2).all(|w| w[0] >= w[1]))
        .max_by_key(|p| key(p))
        .unwrap();
    let tie = scores[0] == scores[1] || scores[1] == scores[2] || scores[0] == scores[2];
    (best.iter().map(|&m| MODELS[m]).collect(), tie)
}

/// One contradiction as plain data: (subject, hard?, side a (q, o), side b
/// (q, o) or the recommended model).
pub type Flat = (String, bool, (String, String), (String, String));

struct C<'a> {
    pos: (usize, usize),
    q: &'a str,
    o: &'a str,
    subject: &'a str,
    equals: bool,
    value: &'a str,
}

fn clash(a: (&str, bool, &str), b: (&str, bool, &str)) -> bool {
    a.0 == b.0
        && match (a.1, b.1) {
            (true, true) => a.2 != b.2,
            (true, false) | (false, true) => a.2 == b.2,
            (false, false) => false,
        }
}

/// Quadratic scan over all active constraints.
pub fn oracle_contradictions(catalog: &Catalog, answers: &BTreeMap<String, String>) -> Vec<Flat> {
    let mut cs = Vec::new();
    for (pos, (_, q)) in catalog.questions().enumerate() {
        let Some(o) = answers.get(&q.id).and_then(|o| q.option(o)) else { continue };
        for (k, e) in o.effects.iter().enumerate() {
            if let catalog::Effect::Constraint { subject, relation, value } = e {
                cs.push(C {
                    pos: (pos, k),
                    q: &q.id,
                    o: &o.id,
                    subject,
                    equals: *relation == catalog::Relation::Equals,
                    value,
                });
            }
        }
    }
    let mut found: Vec<((String, (usize, usize), (usize, usize)), Flat)> = Vec::new();
    for i in 0..cs.len() {
        for j in 0..cs.len() {
            if cs[i].pos >= cs[j].pos {
                continue;
            }
            let (a, b) = (&cs[i], &cs[j]);
            if clash((a.subject, a.equals, a.value), (b.subject, b.equals, b.value)) {
                found.push((
                    (a.subject.to_string(), a.pos, b.pos),
                    (a.subject.to_string(), true, (a.q.into(), a.o.into()), (b.q.into(), b.o.into())),
                ));
            }
        }
    }
    if let Some(scores) = oracle_scores(catalog, answers) {
        let top = oracle_ranking(scores).0[0];
        for c in cs.iter().filter(|c| c.subject == "access_model") {
            if clash((c.subject, c.equals, c.value), ("access_model", true, top)) {
                found.push((
                    (c.subject.to_string(), c.pos, (usize::MAX, 0)),
                    (c.subject.to_string(), false, (c.q.into(), c.o.into()), ("recommendation".into(), top.into())),
                ));
            }
        }
    }
    found.sort_by(|x, y| x.0.cmp(&y.0));
    found.into_iter().map(|(_, f)| f).collect()
}

pub fn flatten(cs: &[ledgerfit::outcomes::Contradiction]) -> Vec<Flat> {
    use ledgerfit::outcomes::{ConflictSeverity, SideSource};
    let side = |s: &ledgerfit::outcomes::ContradictionSide| match &s.source {
        SideSource::Answer { question_id, option_id } => (question_id.clone(), option_id.clone()),
        SideSource::Recommendation { model } => ("recommendation".to_string(), model.as_str().to_string()),
    };
    cs.iter()
        .map(|c| (c.subject.clone(), c.severity == ConflictSeverity::Hard, side(&c.side_a), side(&c.side_b)))
        .collect()
}
