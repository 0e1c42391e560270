//! Decision-framework catalogs: stages, questions, answer effects,
//! components and glossary.
//!
//! A [`Catalog`] is immutable once parsed and carries a lookup index plus
//! its content hash, so it can be shared freely between sessions and
//! threads.

mod model;
mod validate;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::LazyLock;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use model::*;
pub use validate::{validate_catalog, Diagnostic, Severity, ValidationReport};

static DEFAULT_DOCUMENT: &str = include_str!("../../catalogs/dlt-default.json");

static DEFAULT_CATALOG: LazyLock<Catalog> = LazyLock::new(|| {
    let catalog = parse_catalog(DEFAULT_DOCUMENT).expect("bundled catalog parses");
    let report = validate_catalog(&catalog);
    assert!(report.is_clean(), "bundled catalog has diagnostics: {:?}", report.diagnostics);
    catalog
});

/// The bundled DLT decision catalog, parsed and validated once per process.
pub fn default_catalog() -> &'static Catalog {
    &DEFAULT_CATALOG
}

/// Owned copy of the bundled catalog.
pub fn load_default_catalog() -> Catalog {
    DEFAULT_CATALOG.clone()
}

/// Raw text of the bundled catalog document.
pub fn default_catalog_document() -> &'static str {
    DEFAULT_DOCUMENT
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RefKind {
    Question,
    Option,
    GlossaryTerm,
    Component,
    Requirement,
}

impl fmt::Display for RefKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RefKind::Question => "question",
            RefKind::Option => "option",
            RefKind::GlossaryTerm => "glossary term",
            RefKind::Component => "component",
            RefKind::Requirement => "requirement",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("unresolved reference: {from} refers to unknown {kind} `{target}`")]
    UnresolvedReference { from: String, kind: RefKind, target: String },
}

impl ParseError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        ParseError::Schema { path: path.into(), message: message.into() }
    }
}

/// Where a question sits in the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuestionLocation {
    pub stage: StageKind,
    pub substage: SubstageKind,
    pub stage_index: usize,
    pub substage_index: usize,
    pub question_index: usize,
}

#[derive(Debug, Clone, Default)]
struct CatalogIndex {
    /// Canonical order of all questions.
    order: Vec<QuestionLocation>,
    by_id: HashMap<String, usize>,
    components: HashMap<String, usize>,
    glossary: HashMap<String, usize>,
    /// req_id -> canonical positions of the questions declaring it.
    requirements: BTreeMap<String, Vec<usize>>,
}

/// A fully resolved, immutable catalog.
#[derive(Debug, Clone)]
pub struct Catalog {
    doc: CatalogDocument,
    index: CatalogIndex,
    hash: String,
}

impl PartialEq for Catalog {
    fn eq(&self, other: &Self) -> bool {
        self.doc == other.doc
    }
}

impl Catalog {
    /// Resolves a document into a catalog, rejecting duplicate identifiers
    /// and dangling references.
    pub fn from_document(doc: CatalogDocument) -> Result<Self, ParseError> {
        if doc.schema != CATALOG_SCHEMA {
            return Err(ParseError::schema(
                "schema",
                format!("unsupported schema version {} (expected {CATALOG_SCHEMA})", doc.schema),
            ));
        }
        let index = build_index(&doc)?;
        resolve_references(&doc, &index)?;
        let hash = hash_document(&doc);
        Ok(Catalog { doc, index, hash })
    }

    pub fn document(&self) -> &CatalogDocument {
        &self.doc
    }

    pub fn id(&self) -> &str {
        &self.doc.id
    }

    pub fn version(&self) -> &str {
        &self.doc.version
    }

    pub fn stages(&self) -> &[Stage] {
        &self.doc.stages
    }

    /// Hex SHA-256 digest of the canonical form.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn question_count(&self) -> usize {
        self.index.order.len()
    }

    /// Questions in canonical order (stage, substage, declaration order).
    pub fn questions(&self) -> impl Iterator<Item = (QuestionLocation, &Question)> + '_ {
        self.index.order.iter().map(move |loc| (*loc, self.at(loc)))
    }

    pub fn questions_in(&self, stage: StageKind) -> impl Iterator<Item = (QuestionLocation, &Question)> + '_ {
        self.questions().filter(move |(loc, _)| loc.stage == stage)
    }

    pub fn stage_question_count(&self, stage: StageKind) -> usize {
        self.index.order.iter().filter(|loc| loc.stage == stage).count()
    }

    fn at(&self, loc: &QuestionLocation) -> &Question {
        &self.doc.stages[loc.stage_index].substages[loc.substage_index].questions[loc.question_index]
    }

    pub fn question(&self, id: &str) -> Option<&Question> {
        self.position(id).map(|pos| self.at(&self.index.order[pos]))
    }

    /// Canonical position of a question.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.by_id.get(id).copied()
    }

    pub fn question_at(&self, position: usize) -> Option<(QuestionLocation, &Question)> {
        self.index.order.get(position).map(|loc| (*loc, self.at(loc)))
    }

    pub fn location(&self, id: &str) -> Option<QuestionLocation> {
        self.position(id).map(|pos| self.index.order[pos])
    }

    pub fn stage_of(&self, id: &str) -> Option<StageKind> {
        self.location(id).map(|loc| loc.stage)
    }

    pub fn components(&self) -> &[ComponentDef] {
        &self.doc.components
    }

    pub fn component(&self, id: &str) -> Option<&ComponentDef> {
        self.index.components.get(id).map(|&i| &self.doc.components[i])
    }

    pub fn glossary(&self) -> &[GlossaryEntry] {
        &self.doc.glossary
    }

    pub fn glossary_entry(&self, term: &str) -> Option<&GlossaryEntry> {
        self.index.glossary.get(term).map(|&i| &self.doc.glossary[i])
    }

    /// Canonical positions of the questions whose options declare `req_id`.
    pub fn requirement_sources(&self, req_id: &str) -> &[usize] {
        self.index.requirements.get(req_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn requirement_ids(&self) -> impl Iterator<Item = &str> {
        self.index.requirements.keys().map(String::as_str)
    }
}

fn build_index(doc: &CatalogDocument) -> Result<CatalogIndex, ParseError> {
    let mut index = CatalogIndex::default();
    for (si, stage) in doc.stages.iter().enumerate() {
        for (ssi, sub) in stage.substages.iter().enumerate() {
            for (qi, q) in sub.questions.iter().enumerate() {
                let path = format!("stages[{si}].substages[{ssi}].questions[{qi}]");
                if q.id.trim().is_empty() {
                    return Err(ParseError::schema(path, "question id must not be empty"));
                }
                let pos = index.order.len();
                if index.by_id.insert(q.id.clone(), pos).is_some() {
                    return Err(ParseError::schema(path, format!("duplicate question id `{}`", q.id)));
                }
                let mut seen = HashSet::new();
                for (oi, opt) in q.options.iter().enumerate() {
                    if !seen.insert(opt.id.as_str()) {
                        return Err(ParseError::schema(
                            format!("{path}.options[{oi}]"),
                            format!("duplicate option id `{}` in question `{}`", opt.id, q.id),
                        ));
                    }
                    for effect in &opt.effects {
                        if let Effect::Requirement { req_id, .. } = effect {
                            let sources = index.requirements.entry(req_id.clone()).or_default();
                            if !sources.contains(&pos) {
                                sources.push(pos);
                            }
                        }
                    }
                }
                index.order.push(QuestionLocation {
                    stage: stage.kind,
                    substage: sub.kind,
                    stage_index: si,
                    substage_index: ssi,
                    question_index: qi,
                });
            }
        }
    }
    for (i, c) in doc.components.iter().enumerate() {
        if index.components.insert(c.id.clone(), i).is_some() {
            return Err(ParseError::schema(format!("components[{i}]"), format!("duplicate component id `{}`", c.id)));
        }
    }
    for (i, g) in doc.glossary.iter().enumerate() {
        if index.glossary.insert(g.term.clone(), i).is_some() {
            return Err(ParseError::schema(format!("glossary[{i}]"), format!("duplicate glossary term `{}`", g.term)));
        }
    }
    Ok(index)
}

fn resolve_references(doc: &CatalogDocument, index: &CatalogIndex) -> Result<(), ParseError> {
    let unresolved = |from: String, kind, target: &str| ParseError::UnresolvedReference {
        from,
        kind,
        target: target.to_string(),
    };
    let question = |id: &str| {
        index.by_id.get(id).map(|&pos| {
            let loc = index.order[pos];
            &doc.stages[loc.stage_index].substages[loc.substage_index].questions[loc.question_index]
        })
    };

    for stage in &doc.stages {
        for sub in &stage.substages {
            for q in &sub.questions {
                for pre in &q.requires {
                    let target = question(&pre.question_id)
                        .ok_or_else(|| unresolved(format!("question `{}`", q.id), RefKind::Question, &pre.question_id))?;
                    if target.option(&pre.option_id).is_none() {
                        return Err(unresolved(
                            format!("question `{}` (prerequisite on `{}`)", q.id, pre.question_id),
                            RefKind::Option,
                            &pre.option_id,
                        ));
                    }
                }
                for term in &q.wiki_terms {
                    if !index.glossary.contains_key(term) {
                        return Err(unresolved(format!("question `{}`", q.id), RefKind::GlossaryTerm, term));
                    }
                }
                for opt in &q.options {
                    for effect in &opt.effects {
                        if let Effect::ComponentSelect { component_id, derives_from, .. } = effect {
                            let from = || format!("option `{}` of question `{}`", opt.id, q.id);
                            if !index.components.contains_key(component_id) {
                                return Err(unresolved(from(), RefKind::Component, component_id));
                            }
                            for req in derives_from {
                                if !index.requirements.contains_key(req) {
                                    return Err(unresolved(from(), RefKind::Requirement, req));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    for c in &doc.components {
        for dep in &c.depends_on {
            if !index.components.contains_key(dep) {
                return Err(unresolved(format!("component `{}`", c.id), RefKind::Component, dep));
            }
        }
    }
    for g in &doc.glossary {
        for see in &g.see_also {
            if !index.glossary.contains_key(see) {
                return Err(unresolved(format!("glossary term `{}`", g.term), RefKind::GlossaryTerm, see));
            }
        }
    }
    Ok(())
}

/// Parses a catalog document. Nothing is returned unless every reference
/// resolves.
pub fn parse_catalog(text: &str) -> Result<Catalog, ParseError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: CatalogDocument = match serde_path_to_error::deserialize(de) {
        Ok(doc) => doc,
        Err(err) => {
            let path = err.path().to_string();
            let inner = err.into_inner();
            return Err(match inner.classify() {
                serde_json::error::Category::Syntax | serde_json::error::Category::Eof => ParseError::Syntax {
                    line: inner.line(),
                    column: inner.column(),
                    message: inner.to_string(),
                },
                _ => ParseError::Schema { path, message: inner.to_string() },
            });
        }
    };
    Catalog::from_document(doc)
}

#[derive(Debug, Error)]
pub enum CatalogFileError {
    #[error("cannot read catalog {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("catalog {path}: {source}")]
    Parse {
        path: std::path::PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("catalog {path} has {} validation error(s)", .report.errors().count())]
    Invalid { path: std::path::PathBuf, report: ValidationReport },
}

/// Reads, parses and validates a catalog file. Warnings are tolerated;
/// any error-level diagnostic rejects the file.
pub fn load_catalog_file(path: &std::path::Path) -> Result<Catalog, CatalogFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| CatalogFileError::Io { path: path.to_path_buf(), source })?;
    let catalog = parse_catalog(&text).map_err(|source| CatalogFileError::Parse { path: path.to_path_buf(), source })?;
    let report = validate_catalog(&catalog);
    if report.has_errors() {
        return Err(CatalogFileError::Invalid { path: path.to_path_buf(), report });
    }
    Ok(catalog)
}

/// Pretty JSON form of a catalog, suitable for writing back to disk.
pub fn serialize_catalog(catalog: &Catalog) -> String {
    let mut out = serde_json::to_string_pretty(&catalog.doc).expect("catalog serializes");
    out.push('\n');
    out
}

/// Hex SHA-256 over the canonical serialization.
pub fn catalog_hash(catalog: &Catalog) -> String {
    catalog.hash.clone()
}

fn hash_document(doc: &CatalogDocument) -> String {
    let value = serde_json::to_value(doc).expect("catalog serializes");
    let mut canonical = String::new();
    write_canonical(&value, &mut canonical);
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Compact JSON with object keys sorted bytewise, independent of any map
/// ordering feature enabled on `serde_json`.
pub(crate) fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_canonical(&map[key.as_str()], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}
