use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use super::views::{self, render_with, Section, ViewDocument, ViewKind};
use super::{blueprint_from_outcomes, BlueprintError, ComponentBlueprint};
use crate::catalog::{Catalog, StageKind};
use crate::engine::{self, OverrideFlag, Session, StageProgress};
use crate::outcomes::{Contradiction, FitnessScore, Outcomes, Recommendation, SideSource, Verdict};

pub const REPORT_SCHEMA: u32 = 1;
pub const DEFAULT_FITNESS_REFERENCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl ReportFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "markdown",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ReportFormat::Json => "application/json",
            ReportFormat::Markdown => "text/markdown; charset=utf-8",
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "markdown" => Ok(ReportFormat::Markdown),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("unknown format `{0}` (expected json or markdown)")]
    UnknownFormat(String),
    #[error("unknown view `{0}` (expected functional, process or output)")]
    UnknownView(String),
}

/// Parses a comma-separated view list; empty means no views.
pub fn parse_views(list: &str) -> Result<Vec<ViewKind>, ReportError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<ViewKind>().map_err(|_| ReportError::UnknownView(s.to_string())))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    /// Advisory line drawn next to the fitness ratio. Never gates anything.
    pub fitness_reference: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { fitness_reference: DEFAULT_FITNESS_REFERENCE }
    }
}

#[derive(Serialize)]
struct CatalogRef<'a> {
    id: &'a str,
    version: &'a str,
    hash: &'a str,
}

#[derive(Serialize)]
struct SessionRef<'a> {
    name: &'a str,
    version: u64,
}

#[derive(Serialize)]
struct FitnessBlock {
    #[serde(flatten)]
    score: FitnessScore,
    reference: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum BlueprintStatus {
    Ready,
    Conflicted,
    Unavailable,
}

#[derive(Serialize)]
struct BlueprintBlock<'a> {
    status: BlueprintStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slots: Option<&'a [super::SlotDecision]>,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    report_schema: u32,
    catalog: CatalogRef<'a>,
    session: SessionRef<'a>,
    overrides: Vec<OverrideFlag>,
    verdict: &'a Verdict,
    fitness: FitnessBlock,
    recommendation: &'a Recommendation,
    contradictions: &'a [Contradiction],
    stages: &'a [StageProgress],
    blueprint: BlueprintBlock<'a>,
    views: Vec<ViewEntry>,
}

#[derive(Serialize)]
struct ViewEntry {
    view: ViewKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    document: Option<ViewDocument>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unavailable: Option<String>,
}

/// Blueprint as far as it is computable, with the reason when it is not.
fn report_blueprint(catalog: &Catalog, session: &Session, outcomes: &Outcomes) -> (Option<ComponentBlueprint>, BlueprintStatus, Option<String>) {
    if let Verdict::Incomplete { .. } = outcomes.verdict {
        return (None, BlueprintStatus::Unavailable, Some("evaluation incomplete".to_string()));
    }
    match blueprint_from_outcomes(catalog, session, outcomes, false) {
        Ok(bp) => (Some(bp), BlueprintStatus::Ready, None),
        Err(BlueprintError::StageGated) => (None, BlueprintStatus::Unavailable, Some("gated_by_verdict".to_string())),
        Err(BlueprintError::BlockedByContradictions(found)) => {
            let bp = blueprint_from_outcomes(catalog, session, outcomes, true).ok();
            (bp, BlueprintStatus::Conflicted, Some(format!("{} hard contradiction(s)", found.len())))
        }
    }
}

/// Renders a report. Output is a pure function of catalog, session log,
/// format, view set and options; the session id and timestamps are left out
/// so equivalent sessions export identical bytes.
pub fn export_report(catalog: &Catalog, session: &Session, format: ReportFormat, views: &[ViewKind], options: &ReportOptions) -> Vec<u8> {
    let outcomes = Outcomes::compute(catalog, session);
    let stages = engine::stage_status(catalog, session);
    let (blueprint, status, reason) = report_blueprint(catalog, session, &outcomes);
    let wanted: BTreeSet<ViewKind> = views.iter().copied().collect();
    let rendered: Vec<ViewEntry> = wanted
        .into_iter()
        .map(|view| match &blueprint {
            Some(bp) => ViewEntry {
                view,
                document: Some(
                    render_with(catalog, session, bp, &outcomes, view, options.fitness_reference)
                        .expect("blueprint generated from this session"),
                ),
                unavailable: None,
            },
            None => ViewEntry { view, document: None, unavailable: reason.clone() },
        })
        .collect();

    match format {
        ReportFormat::Json => {
            let doc = JsonReport {
                report_schema: REPORT_SCHEMA,
                catalog: CatalogRef { id: catalog.id(), version: catalog.version(), hash: catalog.hash() },
                session: SessionRef { name: &session.meta.name, version: session.version },
                overrides: session.overrides.iter().copied().collect(),
                verdict: &outcomes.verdict,
                fitness: FitnessBlock { score: outcomes.fitness, reference: options.fitness_reference },
                recommendation: &outcomes.recommendation,
                contradictions: &outcomes.contradictions,
                stages: &stages,
                blueprint: BlueprintBlock { status, reason, slots: blueprint.as_ref().map(|b| b.slots.as_slice()) },
                views: rendered,
            };
            let mut out = serde_json::to_vec_pretty(&doc).expect("report serializes");
            out.push(b'\n');
            out
        }
        ReportFormat::Markdown => markdown(catalog, session, &outcomes, &stages, blueprint.as_ref(), reason.as_deref(), &rendered, options)
            .into_bytes(),
    }
}

fn stage_heading(catalog: &Catalog, stage: StageKind) -> String {
    let label = catalog
        .stages()
        .iter()
        .find(|s| s.kind == stage)
        .map(|s| s.output_label.as_str())
        .unwrap_or(stage.default_output_label());
    let name = match stage {
        StageKind::Evaluation => "Evaluation",
        StageKind::Elicitation => "Elicitation",
        StageKind::Design => "Design",
    };
    format!("## {name}: {label}")
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

fn md_table(out: &mut String, columns: &[String], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", columns.iter().map(|c| cell(c)).collect::<Vec<_>>().join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(columns.len()));
    for row in rows {
        let _ = writeln!(out, "| {} |", row.iter().map(|c| cell(c)).collect::<Vec<_>>().join(" | "));
    }
    out.push('\n');
}

fn side_text(side: &crate::outcomes::ContradictionSide) -> String {
    let source = match &side.source {
        SideSource::Answer { question_id, option_id } => format!("{question_id}={option_id}"),
        SideSource::Recommendation { model } => format!("recommendation {model}"),
    };
    format!("{} {} {}", source, side.relation, side.value)
}

fn md_sections(out: &mut String, sections: &[Section]) {
    for section in sections {
        let _ = writeln!(out, "### {}\n", section.heading);
        for p in &section.paragraphs {
            let _ = writeln!(out, "{p}\n");
        }
        if let Some(t) = &section.table {
            md_table(out, &t.columns, &t.rows);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn markdown(
    catalog: &Catalog,
    session: &Session,
    outcomes: &Outcomes,
    stages: &[StageProgress],
    blueprint: Option<&ComponentBlueprint>,
    reason: Option<&str>,
    rendered: &[ViewEntry],
    options: &ReportOptions,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Decision report: {}\n", session.meta.name);
    let _ = writeln!(out, "- Catalog: {} {} ({})", catalog.id(), catalog.version(), catalog.hash());
    let _ = writeln!(out, "- Session version: {}", session.version);
    let overrides: Vec<&str> = session.overrides.iter().map(|f| f.as_str()).collect();
    let _ = writeln!(out, "- Overrides: {}\n", if overrides.is_empty() { "none".to_string() } else { overrides.join(", ") });

    let _ = writeln!(out, "{}\n", stage_heading(catalog, StageKind::Evaluation));
    let _ = writeln!(out, "Verdict: {}\n", views::verdict_sentence(&outcomes.verdict));
    match &outcomes.verdict {
        Verdict::Incomplete { missing } => {
            for q in missing {
                let _ = writeln!(out, "- missing: {q}");
            }
            out.push('\n');
        }
        Verdict::NotSuitable { reasons: list } | Verdict::SuitableWithRisks { risks: list, .. } => {
            for r in list {
                let _ = writeln!(out, "- {} ({}={}): {}", r.reason_code, r.question_id, r.option_id, r.text);
            }
            out.push('\n');
        }
        Verdict::Suitable { .. } => {}
    }
    let _ = writeln!(out, "### Subjective fitness\n");
    let _ = writeln!(out, "{}\n", views::fitness_sentence(outcomes, options.fitness_reference));

    let _ = writeln!(out, "{}\n", stage_heading(catalog, StageKind::Elicitation));
    let _ = writeln!(out, "### Access-model recommendation\n");
    let _ = writeln!(out, "{}\n", views::recommendation_sentence(&outcomes.recommendation));
    if let Recommendation::Ready(rec) = &outcomes.recommendation {
        let rows: Vec<Vec<String>> = rec
            .ranking
            .iter()
            .enumerate()
            .map(|(i, m)| vec![(i + 1).to_string(), m.to_string(), rec.scores.get(*m).to_string()])
            .collect();
        md_table(&mut out, &["rank", "model", "score"].map(String::from), &rows);
    }

    let _ = writeln!(out, "## Contradictions\n");
    if outcomes.contradictions.is_empty() {
        let _ = writeln!(out, "None.\n");
    } else {
        for c in &outcomes.contradictions {
            let severity = match c.severity {
                crate::outcomes::ConflictSeverity::Hard => "hard",
                crate::outcomes::ConflictSeverity::Advisory => "advisory",
            };
            let _ = writeln!(out, "- [{severity}] {}: {} vs {}", c.subject, side_text(&c.side_a), side_text(&c.side_b));
        }
        out.push('\n');
    }

    let _ = writeln!(out, "## Stage progress\n");
    let rows: Vec<Vec<String>> = stages
        .iter()
        .map(|p| {
            vec![
                p.stage.as_str().to_string(),
                p.answered.to_string(),
                p.required_remaining.to_string(),
                if p.output_ready { "yes" } else { "no" }.to_string(),
            ]
        })
        .collect();
    md_table(&mut out, &["stage", "answered", "required remaining", "output ready"].map(String::from), &rows);

    let _ = writeln!(out, "{}\n", stage_heading(catalog, StageKind::Design));
    match blueprint {
        None => {
            let _ = writeln!(out, "Unavailable: {}.\n", reason.unwrap_or("not computable"));
        }
        Some(bp) => {
            if let Some(r) = reason {
                let _ = writeln!(out, "Conflicted: {r}.\n");
            }
            let rows: Vec<Vec<String>> = bp
                .slots
                .iter()
                .map(|s| {
                    let ids: Vec<&str> = s.components.iter().map(|c| c.component_id.as_str()).collect();
                    vec![
                        s.slot.label(),
                        views::status_str(s.status).to_string(),
                        if ids.is_empty() { "-".to_string() } else { ids.join(", ") },
                    ]
                })
                .collect();
            md_table(&mut out, &["aspect", "status", "components"].map(String::from), &rows);
        }
    }

    for entry in rendered {
        let _ = writeln!(out, "## {}\n", entry.view.title());
        match &entry.document {
            Some(doc) => {
                md_sections(&mut out, &doc.sections);
                if !doc.edges.is_empty() {
                    let _ = writeln!(out, "### Edges\n");
                    for e in &doc.edges {
                        let kind = match e.kind {
                            views::EdgeKind::Declared => "declared",
                            views::EdgeKind::Layer => "layer",
                        };
                        let _ = writeln!(out, "- {} -> {} ({kind})", e.from, e.to);
                    }
                    out.push('\n');
                }
            }
            None => {
                let _ = writeln!(out, "Unavailable: {}.\n", entry.unavailable.as_deref().unwrap_or("not computable"));
            }
        }
    }
    while out.ends_with("\n\n") {
        out.pop();
    }
    out
}
