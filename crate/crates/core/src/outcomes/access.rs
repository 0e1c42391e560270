use std::fmt;

use serde::Serialize;

use crate::catalog::{Catalog, Effect, StageKind};
use crate::engine::{self, ActiveState, Session};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessModel {
    Public,
    Permissioned,
    Private,
}

impl AccessModel {
    pub const ALL: [AccessModel; 3] = [AccessModel::Public, AccessModel::Permissioned, AccessModel::Private];

    /// Higher is more restrictive; used to break score ties.
    pub fn restrictiveness(self) -> u8 {
        match self {
            AccessModel::Public => 0,
            AccessModel::Permissioned => 1,
            AccessModel::Private => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AccessModel::Public => "public",
            AccessModel::Permissioned => "permissioned",
            AccessModel::Private => "private",
        }
    }
}

impl fmt::Display for AccessModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AccessScores {
    pub public: i64,
    pub permissioned: i64,
    pub private: i64,
}

impl AccessScores {
    pub fn get(&self, model: AccessModel) -> i64 {
        match model {
            AccessModel::Public => self.public,
            AccessModel::Permissioned => self.permissioned,
            AccessModel::Private => self.private,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Contribution {
    pub question_id: String,
    pub option_id: String,
    pub public: u8,
    pub permissioned: u8,
    pub private: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AccessRecommendation {
    pub scores: AccessScores,
    /// Best first. Equal scores are ordered private, permissioned, public.
    pub ranking: Vec<AccessModel>,
    pub tie_broken: bool,
    pub contributions: Vec<Contribution>,
}

impl AccessRecommendation {
    pub fn top(&self) -> AccessModel {
        self.ranking[0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Recommendation {
    /// No active elicitation answer carries access weights yet.
    Incomplete,
    Ready(AccessRecommendation),
}

impl Recommendation {
    pub fn ready(&self) -> Option<&AccessRecommendation> {
        match self {
            Recommendation::Ready(r) => Some(r),
            Recommendation::Incomplete => None,
        }
    }
}

pub(crate) fn rank(scores: &AccessScores) -> (Vec<AccessModel>, bool) {
    let mut ranking = AccessModel::ALL.to_vec();
    ranking.sort_by(|a, b| {
        scores
            .get(*b)
            .cmp(&scores.get(*a))
            .then(b.restrictiveness().cmp(&a.restrictiveness()))
    });
    let tie_broken = AccessModel::ALL
        .iter()
        .enumerate()
        .any(|(i, a)| AccessModel::ALL[i + 1..].iter().any(|b| scores.get(*a) == scores.get(*b)));
    (ranking, tie_broken)
}

pub fn recommend_from_state(_catalog: &Catalog, state: &ActiveState) -> Recommendation {
    let mut scores = AccessScores::default();
    let mut contributions = Vec::new();
    for e in state.effects_in(StageKind::Elicitation) {
        if let Effect::AccessWeight { public, permissioned, private } = e.effect {
            scores.public += i64::from(public);
            scores.permissioned += i64::from(permissioned);
            scores.private += i64::from(private);
            contributions.push(Contribution {
                question_id: e.question_id.clone(),
                option_id: e.option_id.clone(),
                public,
                permissioned,
                private,
            });
        }
    }
    if contributions.is_empty() {
        return Recommendation::Incomplete;
    }
    let (ranking, tie_broken) = rank(&scores);
    Recommendation::Ready(AccessRecommendation { scores, ranking, tie_broken, contributions })
}

pub fn recommend_access_model(catalog: &Catalog, session: &Session) -> Recommendation {
    recommend_from_state(catalog, &engine::active_state(catalog, session))
}
