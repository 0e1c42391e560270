//! Serializable catalog document types.
//!
//! These structs mirror the on-disk JSON schema one to one. A document
//! becomes a usable [`Catalog`](super::Catalog) only after
//! [`parse_catalog`](super::parse_catalog) has resolved every reference.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Current catalog schema version.
pub const CATALOG_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogDocument {
    pub schema: u32,
    pub id: String,
    pub version: String,
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub components: Vec<ComponentDef>,
    #[serde(default)]
    pub glossary: Vec<GlossaryEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Evaluation,
    Elicitation,
    Design,
}

impl StageKind {
    pub const ALL: [StageKind; 3] = [StageKind::Evaluation, StageKind::Elicitation, StageKind::Design];

    pub fn as_str(self) -> &'static str {
        match self {
            StageKind::Evaluation => "evaluation",
            StageKind::Elicitation => "elicitation",
            StageKind::Design => "design",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// The three substages that may appear in this stage, in canonical order.
    pub fn substages(self) -> [SubstageKind; 3] {
        use SubstageKind::*;
        match self {
            StageKind::Evaluation => [BusinessProcess, ExistingIt, SubjectiveFitness],
            StageKind::Elicitation => [StakeholderReq, UsageControlReq, QosReq],
            StageKind::Design => [ApplicationLayer, MiddlewareLayer, InfrastructureLayer],
        }
    }

    /// Output label carried by the bundled catalog for this stage.
    pub fn default_output_label(self) -> &'static str {
        match self {
            StageKind::Evaluation => "value-based decision",
            StageKind::Elicitation => "business-technology alignment",
            StageKind::Design => "component blueprint",
        }
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StageKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "evaluation" => Ok(StageKind::Evaluation),
            "elicitation" => Ok(StageKind::Elicitation),
            "design" => Ok(StageKind::Design),
            other => Err(format!("unknown stage `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub kind: StageKind,
    pub title: String,
    pub output_label: String,
    pub substages: Vec<Substage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubstageKind {
    BusinessProcess,
    ExistingIt,
    SubjectiveFitness,
    StakeholderReq,
    UsageControlReq,
    QosReq,
    ApplicationLayer,
    MiddlewareLayer,
    InfrastructureLayer,
}

impl SubstageKind {
    pub fn stage(self) -> StageKind {
        use SubstageKind::*;
        match self {
            BusinessProcess | ExistingIt | SubjectiveFitness => StageKind::Evaluation,
            StakeholderReq | UsageControlReq | QosReq => StageKind::Elicitation,
            ApplicationLayer | MiddlewareLayer | InfrastructureLayer => StageKind::Design,
        }
    }

    pub fn as_str(self) -> &'static str {
        use SubstageKind::*;
        match self {
            BusinessProcess => "business_process",
            ExistingIt => "existing_it",
            SubjectiveFitness => "subjective_fitness",
            StakeholderReq => "stakeholder_req",
            UsageControlReq => "usage_control_req",
            QosReq => "qos_req",
            ApplicationLayer => "application_layer",
            MiddlewareLayer => "middleware_layer",
            InfrastructureLayer => "infrastructure_layer",
        }
    }
}

impl fmt::Display for SubstageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Substage {
    pub kind: SubstageKind,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub title: String,
    #[serde(default)]
    pub questions: Vec<Question>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    #[default]
    Standard,
    FitnessProperty,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    PaperCited,
    #[default]
    Synthesized,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Question {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub kind: QuestionKind,
    #[serde(default = "yes")]
    pub required: bool,
    #[serde(default)]
    pub requires: Vec<Prerequisite>,
    pub options: Vec<AnswerOption>,
    #[serde(default)]
    pub wiki_terms: Vec<String>,
    pub provenance: Provenance,
}

impl Question {
    pub fn option(&self, option_id: &str) -> Option<&AnswerOption> {
        self.options.iter().find(|o| o.id == option_id)
    }
}

/// `question` must have been answered with `option` for the dependent
/// question to become eligible.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prerequisite {
    pub question_id: String,
    pub option_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerOption {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessAssessment {
    Beneficial,
    NotBeneficial,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Equals,
    Excludes,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Equals => "equals",
            Relation::Excludes => "excludes",
        })
    }
}

/// Consequence attached to an answer option.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Effect {
    HardDisqualify {
        reason_code: String,
        text: String,
    },
    Risk {
        reason_code: String,
        text: String,
    },
    Fitness {
        assessment: FitnessAssessment,
    },
    AccessWeight {
        public: u8,
        permissioned: u8,
        private: u8,
    },
    Requirement {
        req_id: String,
        text: String,
        #[serde(default)]
        tags: Vec<String>,
    },
    Constraint {
        subject: String,
        relation: Relation,
        value: String,
    },
    ComponentSelect {
        component_id: String,
        rationale: String,
        #[serde(default)]
        derives_from: Vec<String>,
    },
}

impl Effect {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Effect::HardDisqualify { .. } => "hard_disqualify",
            Effect::Risk { .. } => "risk",
            Effect::Fitness { .. } => "fitness",
            Effect::AccessWeight { .. } => "access_weight",
            Effect::Requirement { .. } => "requirement",
            Effect::Constraint { .. } => "constraint",
            Effect::ComponentSelect { .. } => "component_select",
        }
    }

    /// Stages on whose options this effect may appear.
    pub fn allowed_stages(&self) -> &'static [StageKind] {
        use StageKind::*;
        match self {
            Effect::HardDisqualify { .. } | Effect::Risk { .. } | Effect::Fitness { .. } => &[Evaluation],
            Effect::AccessWeight { .. } => &[Elicitation],
            Effect::ComponentSelect { .. } => &[Design],
            Effect::Constraint { .. } | Effect::Requirement { .. } => &[Elicitation, Design],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Application,
    Middleware,
    Infrastructure,
}

impl Layer {
    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Application => "application",
            Layer::Middleware => "middleware",
            Layer::Infrastructure => "infrastructure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sublayer {
    Network,
    Processing,
    Storage,
}

impl Sublayer {
    pub fn as_str(self) -> &'static str {
        match self {
            Sublayer::Network => "network",
            Sublayer::Processing => "processing",
            Sublayer::Storage => "storage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aspect {
    InteractionIntegration,
    SystemAdministration,
    SmartContracts,
    NetworkDeployment,
    Consensus,
    Scalability,
    Security,
    OnchainData,
    OffchainStorageLinking,
}

impl Aspect {
    pub const MANDATORY: [Aspect; 5] = [
        Aspect::InteractionIntegration,
        Aspect::Consensus,
        Aspect::Security,
        Aspect::OnchainData,
        Aspect::OffchainStorageLinking,
    ];

    pub fn is_mandatory(self) -> bool {
        Self::MANDATORY.contains(&self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Aspect::InteractionIntegration => "interaction_integration",
            Aspect::SystemAdministration => "system_administration",
            Aspect::SmartContracts => "smart_contracts",
            Aspect::NetworkDeployment => "network_deployment",
            Aspect::Consensus => "consensus",
            Aspect::Scalability => "scalability",
            Aspect::Security => "security",
            Aspect::OnchainData => "onchain_data",
            Aspect::OffchainStorageLinking => "offchain_storage_linking",
        }
    }
}

/// Position of a component on the layered canvas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotKey {
    pub layer: Layer,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sublayer: Option<Sublayer>,
    pub aspect: Aspect,
}

impl SlotKey {
    const fn new(layer: Layer, sublayer: Option<Sublayer>, aspect: Aspect) -> Self {
        SlotKey { layer, sublayer, aspect }
    }

    /// Every legal slot on the canvas, in rendering order. The processing
    /// sublayer carries a single, non-mandatory scalability slot.
    pub const CANONICAL: [SlotKey; 10] = [
        SlotKey::new(Layer::Application, None, Aspect::InteractionIntegration),
        SlotKey::new(Layer::Application, None, Aspect::SystemAdministration),
        SlotKey::new(Layer::Middleware, None, Aspect::SmartContracts),
        SlotKey::new(Layer::Infrastructure, Some(Sublayer::Network), Aspect::NetworkDeployment),
        SlotKey::new(Layer::Infrastructure, Some(Sublayer::Network), Aspect::Consensus),
        SlotKey::new(Layer::Infrastructure, Some(Sublayer::Network), Aspect::Security),
        SlotKey::new(Layer::Infrastructure, Some(Sublayer::Network), Aspect::Scalability),
        SlotKey::new(Layer::Infrastructure, Some(Sublayer::Processing), Aspect::Scalability),
        SlotKey::new(Layer::Infrastructure, Some(Sublayer::Storage), Aspect::OnchainData),
        SlotKey::new(Layer::Infrastructure, Some(Sublayer::Storage), Aspect::OffchainStorageLinking),
    ];

    pub fn is_canonical(&self) -> bool {
        Self::CANONICAL.contains(self)
    }

    pub fn position(&self) -> Option<usize> {
        Self::CANONICAL.iter().position(|k| k == self)
    }

    /// Ordinal used for layer adjacency: application, middleware, then the
    /// infrastructure sublayers top to bottom.
    pub fn tier(&self) -> u8 {
        match (self.layer, self.sublayer) {
            (Layer::Application, _) => 0,
            (Layer::Middleware, _) => 1,
            (Layer::Infrastructure, Some(Sublayer::Network) | None) => 2,
            (Layer::Infrastructure, Some(Sublayer::Processing)) => 3,
            (Layer::Infrastructure, Some(Sublayer::Storage)) => 4,
        }
    }

    pub fn label(&self) -> String {
        match self.sublayer {
            Some(sub) => format!("{}/{}/{}", self.layer.as_str(), sub.as_str(), self.aspect.as_str()),
            None => format!("{}/{}", self.layer.as_str(), self.aspect.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDef {
    pub id: String,
    pub name: String,
    pub layer: Layer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sublayer: Option<Sublayer>,
    pub aspect: Aspect,
    pub description: String,
    pub mandatory_slot: bool,
    /// Components this one calls or feeds; drives the process view.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub depends_on: Vec<String>,
}

impl ComponentDef {
    pub fn slot(&self) -> SlotKey {
        SlotKey { layer: self.layer, sublayer: self.sublayer, aspect: self.aspect }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlossaryEntry {
    pub term: String,
    pub definition: String,
    #[serde(default)]
    pub see_also: Vec<String>,
}
