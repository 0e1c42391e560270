mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use serde_json::json;

use common::*;
use ledgerfit::blueprint::{
    self, BlueprintError, EdgeKind, ReportFormat, ReportOptions, SlotStatus, ViewError, ViewKind,
};
use ledgerfit::catalog::{self, Catalog, Effect, SlotKey, StageKind};
use ledgerfit::engine::{self, OverrideFlag, Session};
use ledgerfit::outcomes;

fn golden_without_design() -> (Catalog, Session) {
    let cat = catalog::load_default_catalog();
    let mut s = fresh(&cat);
    let answers: Vec<_> =
        golden_answers().into_iter().filter(|(q, _)| cat.stage_of(q) != Some(StageKind::Design)).collect();
    apply_all(&cat, &mut s, &answers);
    (cat, s)
}

fn markdown(cat: &Catalog, s: &Session) -> String {
    String::from_utf8(blueprint::export_report(cat, s, ReportFormat::Markdown, &ViewKind::ALL, &ReportOptions::default()))
        .unwrap()
}

#[test]
fn golden_blueprint_matches_fixture() {
    let (cat, s) = golden_session();
    let bp = blueprint::generate_blueprint(&cat, &s, false).unwrap();
    assert_eq!(bp.component_ids(), golden_components());
    assert!(bp.contradiction_snapshot.is_empty());
    assert!(bp.overrides.is_empty());
    assert!(bp.mandatory_slots().all(|d| d.status == SlotStatus::Selected));
    assert_eq!(bp.generated_from.version, s.version);
    let consensus = bp.slots.iter().find(|d| d.components.iter().any(|c| c.component_id == "permissioned_notary_consensus"));
    assert_eq!(consensus.unwrap().slot.aspect.as_str(), "consensus");
}

#[test]
fn empty_design_leaves_mandatory_slots_undecided() {
    let (cat, s) = golden_without_design();
    let bp = blueprint::generate_blueprint(&cat, &s, false).unwrap();
    let mandatory = SlotKey::CANONICAL.iter().filter(|k| k.aspect.is_mandatory()).count();
    assert_eq!(bp.slots.len(), mandatory);
    assert!(bp.slots.iter().all(|d| d.status == SlotStatus::Undecided && d.components.is_empty()));
    assert!(bp.slots.iter().all(|d| d.note.is_some()));
}

#[test]
fn hard_contradiction_blocks_unless_forced() {
    let (cat, mut s) = golden_session();
    answer(&cat, &mut s, "de.inf.access_model", "public");
    let Err(BlueprintError::BlockedByContradictions(found)) = blueprint::generate_blueprint(&cat, &s, false) else {
        panic!()
    };
    assert_eq!(found, blueprint::blocking_contradictions(&cat, &s));
    let bp = blueprint::generate_blueprint(&cat, &s, true).unwrap();
    assert_eq!(bp.contradiction_snapshot, outcomes::detect_contradictions(&cat, &s));
    let json: serde_json::Value =
        serde_json::from_slice(&blueprint::export_report(&cat, &s, ReportFormat::Json, &[], &ReportOptions::default())).unwrap();
    assert_eq!(json["blueprint"]["status"], "conflicted");
}

#[test]
fn gated_session_has_no_blueprint_until_override() {
    let (cat, mut s) = golden_session();
    answer(&cat, &mut s, "ev.bp.business_case", "no");
    assert_eq!(blueprint::generate_blueprint(&cat, &s, true), Err(BlueprintError::StageGated));
    assert!(markdown(&cat, &s).contains("gated_by_verdict"));
    let v = s.version;
    s.set_override(&cat, OverrideFlag::ProceedDespiteNotSuitable, Some("pilot".into()), v, t0()).unwrap();
    let bp = blueprint::generate_blueprint(&cat, &s, false).unwrap();
    assert_eq!(bp.overrides, [OverrideFlag::ProceedDespiteNotSuitable]);
    // design answers were invalidated by the gate
    assert!(bp.slots.iter().all(|d| d.components.is_empty()));
    let md = markdown(&cat, &s);
    assert!(md.contains("proceed_despite_not_suitable"), "{md}");
}

#[test]
fn golden_process_chain() {
    let (cat, s) = golden_session();
    let bp = blueprint::generate_blueprint(&cat, &s, false).unwrap();
    let doc = blueprint::render_view(&cat, &s, &bp, ViewKind::Process).unwrap();
    assert!(doc.cycle.is_none());
    let declared: BTreeSet<(&str, &str)> =
        doc.edges.iter().filter(|e| e.kind == EdgeKind::Declared).map(|e| (e.from.as_str(), e.to.as_str())).collect();
    for pair in [
        ("web_app", "api_orchestration_anonymization"),
        ("api_orchestration_anonymization", "smart_contract_logic"),
        ("smart_contract_logic", "permissioned_notary_consensus"),
        ("permissioned_notary_consensus", "offchain_encrypted_store"),
        ("permissioned_notary_consensus", "onchain_references"),
    ] {
        assert!(declared.contains(&pair), "{pair:?}");
    }
    // every edge runs between selected components and never upward
    let ids: BTreeSet<&str> = bp.component_ids().into_iter().collect();
    let tier = |id: &str| bp.slots.iter().find(|d| d.components.iter().any(|c| c.component_id == id)).unwrap().slot.tier();
    for e in &doc.edges {
        assert!(ids.contains(e.from.as_str()) && ids.contains(e.to.as_str()));
        assert!(tier(&e.from) <= tier(&e.to), "{e:?}");
    }
}

#[test]
fn stale_blueprint_is_rejected() {
    let (cat, mut s) = golden_session();
    let bp = blueprint::generate_blueprint(&cat, &s, false).unwrap();
    answer(&cat, &mut s, "de.app.user_interface", other_ui(&cat));
    let err = blueprint::render_view(&cat, &s, &bp, ViewKind::Functional).unwrap_err();
    assert!(matches!(err, ViewError::StaleBlueprint { .. }));
    let fork = s.fork("other", "x", t0());
    let bp2 = blueprint::generate_blueprint(&cat, &s, false).unwrap();
    assert!(blueprint::render_view(&cat, &fork, &bp2, ViewKind::Output).is_err());
}

fn other_ui(cat: &Catalog) -> &str {
    let q = cat.question("de.app.user_interface").unwrap();
    q.options.iter().map(|o| o.id.as_str()).find(|o| *o != "web_app").unwrap()
}

#[test]
fn rendering_is_deterministic() {
    let (cat, s) = golden_session();
    for format in [ReportFormat::Json, ReportFormat::Markdown] {
        let a = blueprint::export_report(&cat, &s, format, &ViewKind::ALL, &ReportOptions::default());
        let b = blueprint::export_report(&cat, &s, format, &ViewKind::ALL, &ReportOptions::default());
        assert_eq!(a, b);
    }
    let bp = blueprint::generate_blueprint(&cat, &s, false).unwrap();
    for v in ViewKind::ALL {
        assert_eq!(blueprint::render_view(&cat, &s, &bp, v), blueprint::render_view(&cat, &s, &bp, v));
    }
}

#[test]
fn report_sections() {
    let (cat, s) = golden_session();
    let md = markdown(&cat, &s);
    let headings: Vec<&str> = md.lines().filter(|l| l.starts_with("## ")).collect();
    for h in ["## Functional view", "## Process view", "## Output view", "## Contradictions", "## Design: component blueprint"] {
        assert!(headings.contains(&h), "{h}");
    }
    assert!(md.starts_with("# Decision report: clinical trial\n"));
    assert!(!md.contains(&s.id));

    let only = String::from_utf8(blueprint::export_report(&cat, &s, ReportFormat::Markdown, &[ViewKind::Process], &ReportOptions::default())).unwrap();
    assert!(only.contains("## Process view"));
    assert!(!only.contains("## Functional view"));

    let json: serde_json::Value =
        serde_json::from_slice(&blueprint::export_report(&cat, &s, ReportFormat::Json, &ViewKind::ALL, &ReportOptions::default())).unwrap();
    assert_eq!(json["verdict"]["status"], "suitable");
    assert_eq!(json["fitness"]["ratio"], 0.6);
    assert_eq!(json["blueprint"]["status"], "ready");
    assert_eq!(json["views"].as_array().unwrap().len(), 3);
}

#[test]
fn fresh_report_is_incomplete_without_blueprint() {
    let cat = catalog::load_default_catalog();
    let s = fresh(&cat);
    let md = markdown(&cat, &s);
    assert!(md.contains("Verdict: Incomplete"));
    assert!(md.contains("Unavailable: evaluation incomplete."));
    let json: serde_json::Value =
        serde_json::from_slice(&blueprint::export_report(&cat, &s, ReportFormat::Json, &ViewKind::ALL, &ReportOptions::default())).unwrap();
    assert_eq!(json["blueprint"]["status"], "unavailable");
    assert!(json["blueprint"].get("slots").is_none());
}

#[test]
fn view_and_format_parsing() {
    assert_eq!(blueprint::parse_views("process,output").unwrap(), [ViewKind::Process, ViewKind::Output]);
    assert!(blueprint::parse_views("process,structural").is_err());
    assert_eq!("functional".parse::<ViewKind>().unwrap(), ViewKind::Functional);
    assert_eq!(ReportFormat::Json.content_type(), "application/json");
    assert!(ReportFormat::Markdown.content_type().starts_with("text/markdown"));
}

/// Two components whose declared dependencies point at each other.
fn cyclic_catalog() -> Catalog {
    let mut comps = mini_components();
    comps[1]["depends_on"] = json!(["ui"]);
    let design_q = |id: &str, comp: &str| {
        json!({"id": id, "text": "?", "kind": "standard", "required": true, "requires": [], "provenance": "synthesized",
               "options": [{"id": "yes", "label": "yes", "effects": [
                   {"type": "component_select", "component_id": comp, "rationale": "r"}]},
                   {"id": "no", "label": "no", "effects": []}]})
    };
    let empty = |kind: &str, subs: [&str; 3]| {
        json!({"kind": kind, "title": kind, "output_label": "o",
               "substages": subs.iter().map(|s| json!({"kind": s, "questions": []})).collect::<Vec<_>>()})
    };
    let doc = json!({"schema": 1, "id": "cyc", "version": "0", "components": comps, "glossary": [], "stages": [
        empty("evaluation", ["business_process", "existing_it", "subjective_fitness"]),
        empty("elicitation", ["stakeholder_req", "usage_control_req", "qos_req"]),
        {"kind": "design", "title": "d", "output_label": "o", "substages": [
            {"kind": "application_layer", "questions": [design_q("ui_q", "ui")]},
            {"kind": "middleware_layer", "questions": [design_q("logic_q", "logic")]},
            {"kind": "infrastructure_layer", "questions": []}]}
    ]});
    catalog::parse_catalog(&doc.to_string()).unwrap()
}

#[test]
fn dependency_cycle_is_flagged_not_fatal() {
    let cat = cyclic_catalog();
    let mut s = fresh(&cat);
    answer(&cat, &mut s, "ui_q", "yes");
    answer(&cat, &mut s, "logic_q", "yes");
    let bp = blueprint::generate_blueprint(&cat, &s, false).unwrap();
    let doc = blueprint::render_view(&cat, &s, &bp, ViewKind::Process).unwrap();
    let cycle = doc.cycle.expect("cycle reported");
    assert_eq!(cycle.first(), cycle.last());
    assert!(cycle.contains(&"ui".to_string()) && cycle.contains(&"logic".to_string()));
    assert!(markdown(&cat, &s).contains("form a cycle"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Every active selection lands in exactly one slot; every mandatory slot is present.
    #[test]
    fn slots_conserve_selections(seed in any::<u64>(), steps in 0usize..40) {
        let mut r = rng(seed);
        let cat = mini_catalog(&mut r, MiniConfig::default());
        let mut s = fresh(&cat);
        random_ops(&cat, &mut s, &mut r, steps);
        let Ok(bp) = blueprint::generate_blueprint(&cat, &s, true) else { return Ok(()) };
        let state = engine::active_state(&cat, &s);
        let selected: BTreeSet<&str> = state
            .effects_in(StageKind::Design)
            .filter_map(|e| match &e.effect { Effect::ComponentSelect { component_id, .. } => Some(component_id.as_str()), _ => None })
            .collect();
        let placed: Vec<&str> = bp.slots.iter().flat_map(|d| d.components.iter().map(|c| c.component_id.as_str())).collect();
        prop_assert_eq!(placed.len(), selected.len());
        prop_assert_eq!(placed.iter().copied().collect::<BTreeSet<_>>(), selected);
        for key in SlotKey::CANONICAL.iter().filter(|k| k.aspect.is_mandatory()) {
            prop_assert!(bp.slot(key).is_some());
        }
        for d in &bp.slots {
            for c in &d.components {
                prop_assert_eq!(cat.component(&c.component_id).unwrap().slot(), d.slot);
            }
        }
    }

    /// Every trace reference in a blueprint resolves to a live trace node.
    #[test]
    fn trace_refs_resolve(seed in any::<u64>(), steps in 0usize..40) {
        let mut r = rng(seed);
        let cat = mini_catalog(&mut r, MiniConfig::default());
        let mut s = fresh(&cat);
        random_ops(&cat, &mut s, &mut r, steps);
        let Ok(bp) = blueprint::generate_blueprint(&cat, &s, true) else { return Ok(()) };
        let graph = outcomes::trace_graph(&cat, &s);
        for c in bp.slots.iter().flat_map(|d| &d.components) {
            for id in &c.trace_refs {
                prop_assert!(graph.node(id).is_some(), "{}", id);
                prop_assert!(!outcomes::trace_decision(&cat, &s, id).unwrap().is_empty());
            }
        }
    }

    #[test]
    fn export_is_a_function_of_the_log(seed in any::<u64>(), steps in 0usize..30) {
        let mut r = rng(seed);
        let cat = mini_catalog(&mut r, MiniConfig::default());
        let mut s = fresh(&cat);
        random_ops(&cat, &mut s, &mut r, steps);
        let copy = Session::from_json(&s.to_json()).unwrap().fork("other-id", s.meta.name.clone(), t0());
        for format in [ReportFormat::Json, ReportFormat::Markdown] {
            prop_assert_eq!(
                blueprint::export_report(&cat, &s, format, &ViewKind::ALL, &ReportOptions::default()),
                blueprint::export_report(&cat, &copy, format, &ViewKind::ALL, &ReportOptions::default())
            );
        }
    }
}
