//! The five reading strategies and the per-strategy reason taxonomy used by
//! the cascading menu block.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A reading strategy. Declaration order is the canonical serialization order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    ComprehensionMonitoring,
    Paraphrasing,
    Prediction,
    Elaboration,
    Bridging,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::ComprehensionMonitoring,
        Strategy::Paraphrasing,
        Strategy::Prediction,
        Strategy::Elaboration,
        Strategy::Bridging,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Human-readable name, as shown to players.
    pub fn display_name(self) -> &'static str {
        match self {
            Strategy::ComprehensionMonitoring => "Comprehension Monitoring",
            Strategy::Paraphrasing => "Paraphrasing",
            Strategy::Prediction => "Prediction",
            Strategy::Elaboration => "Elaboration",
            Strategy::Bridging => "Bridging",
        }
    }

    fn ident(self) -> &'static str {
        match self {
            Strategy::ComprehensionMonitoring => "ComprehensionMonitoring",
            Strategy::Paraphrasing => "Paraphrasing",
            Strategy::Prediction => "Prediction",
            Strategy::Elaboration => "Elaboration",
            Strategy::Bridging => "Bridging",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Error)]
#[error("unknown strategy `{0}`")]
pub struct UnknownStrategy(pub String);

impl FromStr for Strategy {
    type Err = UnknownStrategy;

    /// Accepts the identifier form (`Bridging`), the display form
    /// (`Comprehension Monitoring`), case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim();
        Strategy::ALL
            .into_iter()
            .find(|st| st.ident().eq_ignore_ascii_case(wanted) || st.display_name().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}

/// Identifier of a reason inside the taxonomy, e.g. `LinkedToSpecificSentence`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReasonCode(String);

impl ReasonCode {
    pub const OTHER: &'static str = "Other";

    pub fn new(code: impl Into<String>) -> Self {
        ReasonCode(code.into())
    }

    pub fn other() -> Self {
        ReasonCode(Self::OTHER.to_string())
    }

    pub fn is_other(&self) -> bool {
        self.0 == Self::OTHER
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ReasonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("no reasons listed for {0:?}")]
    MissingStrategy(Strategy),
    #[error("reasons for {0:?} must include `Other`")]
    MissingOther(Strategy),
    #[error("duplicate reason `{1}` for {0:?}")]
    DuplicateReason(Strategy, String),
}

/// Reasons a player may give for choosing each strategy. Every strategy
/// carries an `Other` entry, which is the only reason allowed without a
/// highlighted span.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReasonTaxonomy(BTreeMap<Strategy, Vec<ReasonCode>>);

impl ReasonTaxonomy {
    pub fn new(reasons: BTreeMap<Strategy, Vec<ReasonCode>>) -> Result<Self, TaxonomyError> {
        let taxonomy = ReasonTaxonomy(reasons);
        taxonomy.validate()?;
        Ok(taxonomy)
    }

    pub fn validate(&self) -> Result<(), TaxonomyError> {
        for strategy in Strategy::ALL {
            let reasons = self.0.get(&strategy).ok_or(TaxonomyError::MissingStrategy(strategy))?;
            if !reasons.iter().any(ReasonCode::is_other) {
                return Err(TaxonomyError::MissingOther(strategy));
            }
            for (i, r) in reasons.iter().enumerate() {
                if reasons[..i].contains(r) {
                    return Err(TaxonomyError::DuplicateReason(strategy, r.0.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn reasons(&self, strategy: Strategy) -> &[ReasonCode] {
        self.0.get(&strategy).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn allows(&self, strategy: Strategy, reason: &ReasonCode) -> bool {
        self.reasons(strategy).contains(reason)
    }
}

impl Default for ReasonTaxonomy {
    fn default() -> Self {
        let table: [(Strategy, &[&str]); 5] = [
            (Strategy::ComprehensionMonitoring, &["StatesUnderstanding", "StatesConfusion", "AsksQuestion", "Other"]),
            (Strategy::Paraphrasing, &["RestatesInOwnWords", "SimplifiesVocabulary", "Other"]),
            (Strategy::Prediction, &["AnticipatesUpcomingContent", "ExpectsOutcome", "Other"]),
            (Strategy::Elaboration, &["UsesPriorKnowledge", "RelatesToPersonalExperience", "GivesExample", "Other"]),
            (
                Strategy::Bridging,
                &["LinkedToSpecificSentence", "LinkedWithPreviousIdea", "LinkedToGlobalTheme", "Other"],
            ),
        ];
        ReasonTaxonomy(table.into_iter().map(|(s, rs)| (s, rs.iter().map(|r| ReasonCode::new(*r)).collect())).collect())
    }
}
