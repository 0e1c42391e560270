//! Structural and semantic checks over a parsed catalog.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use super::{Catalog, Effect, FitnessAssessment, QuestionKind, Relation, StageKind, SubstageKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}] {}: {}", self.severity, self.code, self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Warning)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    pub fn is_clean(&self) -> bool {
        self.diagnostics.is_empty()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.diagnostics
            .iter()
            .map(|d| serde_json::to_string(d).expect("diagnostic serializes") + "\n")
            .collect()
    }

    fn error(&mut self, code: &'static str, location: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Error, code, location, message);
    }

    fn warning(&mut self, code: &'static str, location: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Warning, code, location, message);
    }

    fn push(&mut self, severity: Severity, code: &'static str, location: impl Into<String>, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic { severity, code, location: location.into(), message: message.into() });
    }
}

/// Checks every catalog invariant. Diagnostics are data; this never fails.
pub fn validate_catalog(catalog: &Catalog) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_stage_shape(catalog, &mut report);
    check_questions(catalog, &mut report);
    check_requirements(catalog, &mut report);
    check_prerequisites(catalog, &mut report);
    check_components(catalog, &mut report);
    report
}

fn check_stage_shape(catalog: &Catalog, report: &mut ValidationReport) {
    let stages = catalog.stages();
    if stages.len() != 3 {
        report.error("stage_count", "stages", format!("expected exactly 3 stages, found {}", stages.len()));
    }
    for (i, stage) in stages.iter().enumerate() {
        let loc = format!("stages[{i}]");
        if let Some(expected) = StageKind::ALL.get(i) {
            if stage.kind != *expected {
                report.error("stage_order", &loc, format!("expected stage `{expected}` at position {i}, found `{}`", stage.kind));
            }
        }
        if stage.substages.len() != 3 {
            report.error(
                "substage_count",
                &loc,
                format!("stage `{}` must have exactly 3 substages, found {}", stage.kind, stage.substages.len()),
            );
        }
        let legal = stage.kind.substages();
        for (j, sub) in stage.substages.iter().enumerate() {
            let sub_loc = format!("{loc}.substages[{j}]");
            if sub.kind.stage() != stage.kind {
                report.error(
                    "substage_misplaced",
                    sub_loc,
                    format!("substage `{}` belongs to stage `{}`, not `{}`", sub.kind, sub.kind.stage(), stage.kind),
                );
            } else if legal.get(j) != Some(&sub.kind) {
                report.error("substage_order", sub_loc, format!("substage `{}` is out of canonical order", sub.kind));
            }
        }
    }
}

fn check_questions(catalog: &Catalog, report: &mut ValidationReport) {
    for (loc, q) in catalog.questions() {
        let at = format!("question `{}`", q.id);
        if q.text.trim().is_empty() {
            report.error("empty_text", &at, "question text is empty");
        }
        if q.options.len() < 2 {
            report.error("too_few_options", &at, format!("close-ended questions need at least 2 options, found {}", q.options.len()));
        }
        let is_fitness = q.kind == QuestionKind::FitnessProperty;
        if is_fitness && loc.substage != SubstageKind::SubjectiveFitness {
            report.error(
                "fitness_question_misplaced",
                &at,
                format!("fitness_property questions belong in subjective_fitness, found in `{}`", loc.substage),
            );
        }
        for opt in &q.options {
            let opt_at = format!("{at} option `{}`", opt.id);
            if opt.label.trim().is_empty() {
                report.error("empty_text", &opt_at, "option label is empty");
            }
            let mut fitness_count = 0;
            for (k, effect) in opt.effects.iter().enumerate() {
                let eff_at = format!("{opt_at} effect[{k}]");
                if !effect.allowed_stages().contains(&loc.stage) {
                    report.error(
                        "effect_misplacement",
                        &eff_at,
                        format!("`{}` effect is not allowed on {}-stage options", effect.kind_name(), loc.stage),
                    );
                }
                match effect {
                    Effect::Fitness { .. } => {
                        fitness_count += 1;
                        if !is_fitness {
                            report.error("effect_misplacement", &eff_at, "fitness effects require a fitness_property question");
                        }
                    }
                    Effect::AccessWeight { public, permissioned, private } => {
                        if [public, permissioned, private].iter().any(|w| **w > 3) {
                            report.error(
                                "weight_out_of_range",
                                &eff_at,
                                format!("access weights must lie in 0..=3, found ({public}, {permissioned}, {private})"),
                            );
                        }
                    }
                    Effect::Constraint { subject, value, .. } if subject.is_empty() || value.is_empty() => {
                        report.error("empty_text", &eff_at, "constraint subject and value must be non-empty");
                    }
                    _ => {}
                }
            }
            if is_fitness && fitness_count != 1 {
                report.error(
                    "fitness_effect_missing",
                    &opt_at,
                    format!("fitness_property options need exactly one fitness effect, found {fitness_count}"),
                );
            }
            check_self_contradiction(&opt.effects, &opt_at, report);
        }
        if is_fitness {
            let any_beneficial = q
                .options
                .iter()
                .flat_map(|o| o.effects.iter())
                .any(|e| matches!(e, Effect::Fitness { assessment: FitnessAssessment::Beneficial }));
            if !any_beneficial {
                report.warning("fitness_never_beneficial", &at, "no option marks the property as beneficial");
            }
        }
    }
}

fn check_self_contradiction(effects: &[Effect], at: &str, report: &mut ValidationReport) {
    let constraints: Vec<(&str, Relation, &str)> = effects
        .iter()
        .filter_map(|e| match e {
            Effect::Constraint { subject, relation, value } => Some((subject.as_str(), *relation, value.as_str())),
            _ => None,
        })
        .collect();
    for (i, a) in constraints.iter().enumerate() {
        for b in &constraints[i + 1..] {
            if crate::outcomes::constraints_conflict(a.0, a.1, a.2, b.0, b.1, b.2) {
                report.error(
                    "self_contradictory_option",
                    at,
                    format!("constraints on `{}` contradict each other ({} {} / {} {})", a.0, a.1, a.2, b.1, b.2),
                );
            }
        }
    }
}

fn check_requirements(catalog: &Catalog, report: &mut ValidationReport) {
    for req in catalog.requirement_ids() {
        let sources = catalog.requirement_sources(req);
        if sources.len() > 1 {
            let ids: Vec<&str> = sources
                .iter()
                .filter_map(|&p| catalog.question_at(p).map(|(_, q)| q.id.as_str()))
                .collect();
            report.error(
                "duplicate_requirement",
                format!("requirement `{req}`"),
                format!("requirement is declared by several questions ({}); each must trace to one answer", ids.join(", ")),
            );
        }
    }
}

/// Tarjan's strongly connected components over question positions.
fn strongly_connected(n: usize, edges: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        edges: &'a [Vec<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn visit(s: &mut State<'_>, v: usize) {
        s.index[v] = Some(s.next);
        s.low[v] = s.next;
        s.next += 1;
        s.stack.push(v);
        s.on_stack[v] = true;
        for &w in &s.edges[v] {
            match s.index[w] {
                None => {
                    visit(s, w);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on_stack[w] => s.low[v] = s.low[v].min(iw),
                _ => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            let mut comp = Vec::new();
            while let Some(w) = s.stack.pop() {
                s.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            s.out.push(comp);
        }
    }
    let mut s = State {
        edges,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if s.index[v].is_none() {
            visit(&mut s, v);
        }
    }
    s.out
}

/// A path v -> ... -> v restricted to `members`.
fn cycle_path(start: usize, edges: &[Vec<usize>], members: &BTreeSet<usize>) -> Vec<usize> {
    fn dfs(v: usize, start: usize, edges: &[Vec<usize>], members: &BTreeSet<usize>, seen: &mut BTreeSet<usize>, path: &mut Vec<usize>) -> bool {
        for &w in &edges[v] {
            if !members.contains(&w) {
                continue;
            }
            if w == start {
                path.push(w);
                return true;
            }
            if seen.insert(w) {
                path.push(w);
                if dfs(w, start, edges, members, seen, path) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    let mut path = vec![start];
    let mut seen = BTreeSet::from([start]);
    dfs(start, start, edges, members, &mut seen, &mut path);
    path
}

#[derive(Debug, Clone)]
enum Reach {
    /// Every (question -> option) assignment the question's prerequisite
    /// closure demands.
    Ok(BTreeMap<usize, String>),
    Unreachable(String),
    /// Depends on a cycle; already reported.
    Unknown,
}

fn check_prerequisites(catalog: &Catalog, report: &mut ValidationReport) {
    let n = catalog.question_count();
    let mut edges = vec![Vec::new(); n];
    for (pos, (_, q)) in catalog.questions().enumerate() {
        for pre in &q.requires {
            if let Some(target) = catalog.position(&pre.question_id) {
                edges[pos].push(target);
            }
        }
    }

    let mut in_cycle = vec![false; n];
    let mut components = strongly_connected(n, &edges);
    components.sort();
    for comp in components {
        let cyclic = comp.len() > 1 || edges[comp[0]].contains(&comp[0]);
        if !cyclic {
            continue;
        }
        let members: BTreeSet<usize> = comp.iter().copied().collect();
        for &m in &comp {
            in_cycle[m] = true;
        }
        let path = cycle_path(comp[0], &edges, &members);
        let names: Vec<&str> = path
            .iter()
            .filter_map(|&p| catalog.question_at(p).map(|(_, q)| q.id.as_str()))
            .collect();
        report.error("dependency_cycle", format!("question `{}`", names[0]), format!("dependency cycle: {}", names.join(" -> ")));
    }

    for (pos, (_, q)) in catalog.questions().enumerate() {
        for pre in &q.requires {
            let Some(target) = catalog.position(&pre.question_id) else { continue };
            if in_cycle[pos] && in_cycle[target] {
                continue;
            }
            if target >= pos {
                report.error(
                    "prerequisite_order",
                    format!("question `{}`", q.id),
                    format!("prerequisite `{}` does not precede the question in canonical order", pre.question_id),
                );
            }
        }
    }

    let mut memo: HashMap<usize, Reach> = HashMap::new();
    for pos in 0..n {
        if let Reach::Unreachable(why) = reach(catalog, pos, &in_cycle, &mut memo, &mut BTreeSet::new()) {
            let (_, q) = catalog.question_at(pos).expect("position in range");
            report.warning("unreachable_question", format!("question `{}`", q.id), format!("question can never become eligible: {why}"));
        }
    }
}

fn reach(catalog: &Catalog, pos: usize, in_cycle: &[bool], memo: &mut HashMap<usize, Reach>, visiting: &mut BTreeSet<usize>) -> Reach {
    if let Some(r) = memo.get(&pos) {
        return r.clone();
    }
    if in_cycle[pos] || !visiting.insert(pos) {
        return Reach::Unknown;
    }
    let (_, q) = catalog.question_at(pos).expect("position in range");
    let mut demanded: BTreeMap<usize, String> = BTreeMap::new();
    let mut result = None;
    'pre: for pre in &q.requires {
        let Some(target) = catalog.position(&pre.question_id) else { continue };
        let mut needs = match reach(catalog, target, in_cycle, memo, visiting) {
            Reach::Ok(m) => m,
            Reach::Unreachable(_) => {
                result = Some(Reach::Unreachable(format!("prerequisite `{}` is itself unreachable", pre.question_id)));
                break;
            }
            Reach::Unknown => {
                result = Some(Reach::Unknown);
                break;
            }
        };
        needs.insert(target, pre.option_id.clone());
        for (p, opt) in needs {
            if let Some(existing) = demanded.get(&p) {
                if *existing != opt {
                    let (_, other) = catalog.question_at(p).expect("position in range");
                    result = Some(Reach::Unreachable(format!(
                        "prerequisites demand both `{existing}` and `{opt}` for question `{}`",
                        other.id
                    )));
                    break 'pre;
                }
            } else {
                demanded.insert(p, opt);
            }
        }
    }
    visiting.remove(&pos);
    let r = result.unwrap_or(Reach::Ok(demanded));
    memo.insert(pos, r.clone());
    r
}

fn check_components(catalog: &Catalog, report: &mut ValidationReport) {
    for c in catalog.components() {
        let at = format!("component `{}`", c.id);
        let infra = c.layer == super::Layer::Infrastructure;
        if infra != c.sublayer.is_some() {
            report.error("component_layout", &at, "sublayer must be set exactly when the layer is infrastructure");
        } else if !c.slot().is_canonical() {
            report.error("component_layout", &at, format!("`{}` is not a slot on the canvas", c.slot().label()));
        }
        if c.mandatory_slot != c.aspect.is_mandatory() {
            report.error(
                "mandatory_slot_mismatch",
                &at,
                format!("mandatory_slot must be {} for aspect `{}`", c.aspect.is_mandatory(), c.aspect.as_str()),
            );
        }
        if c.depends_on.iter().any(|d| d == &c.id) {
            report.error("component_dependency", &at, "component depends on itself");
        }
    }
}
