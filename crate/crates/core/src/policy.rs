//! App Store maturity rating policy.
//!
//! The policy vocabulary is fixed in code: twelve content reasons (including
//! the `None` sentinel), a two-level intensity scale and four age ratings.
//! The mapping from (reason, intensity) to a rating lives in a [`PolicyTable`],
//! which is either the builtin App Store table or loaded from a JSON document
//! so other markets can be described without code changes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("malformed policy document: {0}")]
    Malformed(String),
    #[error("unknown category label {0:?}")]
    UnknownCategory(String),
    #[error("unknown intensity {0:?} (expected mild, intense or na)")]
    UnknownIntensity(String),
    #[error("unknown rating {0:?} (expected 4+, 9+, 12+ or 17+)")]
    UnknownRating(String),
    #[error("duplicate pair ({category}, {intensity}) in rows {first} and {second}")]
    DuplicatePair {
        category: ContentCategory,
        intensity: IntensityLevel,
        first: u8,
        second: u8,
    },
    #[error("duplicate row {0}")]
    DuplicateRow(u8),
    #[error("missing row {0}")]
    MissingRow(u8),
    #[error("row {row} out of range 1..={max}")]
    RowOutOfRange { row: u8, max: u8 },
    #[error("illegal pair: intensity {intensity} cannot be used with {category}")]
    IllegalPair {
        category: ContentCategory,
        intensity: IntensityLevel,
    },
    #[error("no rule covers ({category}, {intensity})")]
    Uncovered {
        category: ContentCategory,
        intensity: IntensityLevel,
    },
    #[error("unknown category id {0}")]
    UnknownCategoryId(u8),
    #[error("failed to read policy file {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// One of the twelve maturity content reasons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContentCategory {
    None,
    CartoonOrFantasyViolence,
    HorrorOrFearContent,
    ProfanityOrCrudeHumor,
    MatureOrSuggestiveContent,
    SexualContentOrNudity,
    RealisticViolence,
    AlcoholTobaccoOrDrugUse,
    MedicalOrTreatmentContent,
    SimulatedGambling,
    GamblingOrContests,
    UnrestrictedWebAccess,
}

impl ContentCategory {
    pub const ALL: [ContentCategory; 12] = [
        ContentCategory::None,
        ContentCategory::CartoonOrFantasyViolence,
        ContentCategory::HorrorOrFearContent,
        ContentCategory::ProfanityOrCrudeHumor,
        ContentCategory::MatureOrSuggestiveContent,
        ContentCategory::SexualContentOrNudity,
        ContentCategory::RealisticViolence,
        ContentCategory::AlcoholTobaccoOrDrugUse,
        ContentCategory::MedicalOrTreatmentContent,
        ContentCategory::SimulatedGambling,
        ContentCategory::GamblingOrContests,
        ContentCategory::UnrestrictedWebAccess,
    ];

    /// Stable id 0..=11, used in the content prompt's option list.
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            ContentCategory::None => "None",
            ContentCategory::CartoonOrFantasyViolence => "Cartoon or fantasy violence",
            ContentCategory::HorrorOrFearContent => "Horror or fear themed content",
            ContentCategory::ProfanityOrCrudeHumor => "Profanity or crude humor",
            ContentCategory::MatureOrSuggestiveContent => "Mature or suggestive content",
            ContentCategory::SexualContentOrNudity => "Sexual content or nudity",
            ContentCategory::RealisticViolence => "Realistic violence",
            ContentCategory::AlcoholTobaccoOrDrugUse => "Alcohol, tobacco, or drug use",
            ContentCategory::MedicalOrTreatmentContent => "Medical or treatment-focused content",
            ContentCategory::SimulatedGambling => "Simulated gambling",
            ContentCategory::GamblingOrContests => "Gambling or contests",
            ContentCategory::UnrestrictedWebAccess => "Unrestricted web access",
        }
    }

    /// The label in title case ("Cartoon or Fantasy Violence"), as used in
    /// the intensity prompt.
    pub fn title(self) -> String {
        self.label()
            .split(' ')
            .enumerate()
            .map(|(i, word)| {
                if i > 0 && matches!(word, "or" | "and" | "of") {
                    word.to_string()
                } else {
                    capitalize(word)
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// False for the reasons whose rating does not depend on intensity.
    pub fn intensity_sensitive(self) -> bool {
        !matches!(
            self,
            ContentCategory::None | ContentCategory::GamblingOrContests | ContentCategory::UnrestrictedWebAccess
        )
    }

    /// Intensities that may legally accompany this category.
    pub fn legal_intensities(self) -> &'static [IntensityLevel] {
        if self.intensity_sensitive() {
            &[IntensityLevel::Mild, IntensityLevel::Intense]
        } else {
            &[IntensityLevel::NotApplicable]
        }
    }

    pub fn is_legal(self, intensity: IntensityLevel) -> bool {
        self.legal_intensities().contains(&intensity)
    }

    /// Case- and punctuation-insensitive label lookup, so "Alcohol tobacco
    /// or drug use" and "alcohol, tobacco, or drug use" both resolve.
    pub fn from_label(label: &str) -> Option<Self> {
        let wanted = normalize_label(label);
        Self::ALL.into_iter().find(|c| normalize_label(c.label()) == wanted)
    }
}

impl fmt::Display for ContentCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for ContentCategory {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for ContentCategory {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let label = String::deserialize(d)?;
        ContentCategory::from_label(&label).ok_or_else(|| serde::de::Error::custom(PolicyError::UnknownCategory(label)))
    }
}

/// Lowercase, punctuation replaced by spaces, whitespace collapsed.
pub(crate) fn normalize_label(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                ' '
            }
        })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IntensityLevel {
    NotApplicable,
    Mild,
    Intense,
}

impl IntensityLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            IntensityLevel::NotApplicable => "na",
            IntensityLevel::Mild => "mild",
            IntensityLevel::Intense => "intense",
        }
    }
}

impl fmt::Display for IntensityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntensityLevel {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "na" => Ok(IntensityLevel::NotApplicable),
            "mild" => Ok(IntensityLevel::Mild),
            "intense" => Ok(IntensityLevel::Intense),
            _ => Err(PolicyError::UnknownIntensity(s.to_string())),
        }
    }
}

impl Serialize for IntensityLevel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for IntensityLevel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// App Store age rating. Ordering follows the rank (4+ lowest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RatingLevel {
    FourPlus,
    NinePlus,
    TwelvePlus,
    SeventeenPlus,
}

impl RatingLevel {
    pub const ALL: [RatingLevel; 4] = [
        RatingLevel::FourPlus,
        RatingLevel::NinePlus,
        RatingLevel::TwelvePlus,
        RatingLevel::SeventeenPlus,
    ];

    pub fn rank(self) -> u8 {
        self as u8
    }

    pub fn from_rank(rank: u8) -> Option<Self> {
        Self::ALL.get(rank as usize).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            RatingLevel::FourPlus => "4+",
            RatingLevel::NinePlus => "9+",
            RatingLevel::TwelvePlus => "12+",
            RatingLevel::SeventeenPlus => "17+",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.label() == label.trim())
    }
}

impl fmt::Display for RatingLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RatingLevel {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RatingLevel::from_label(s).ok_or_else(|| PolicyError::UnknownRating(s.to_string()))
    }
}

impl Serialize for RatingLevel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for RatingLevel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRule {
    pub row: u8,
    pub category: ContentCategory,
    pub intensity: IntensityLevel,
    pub rating: RatingLevel,
}

/// Ordering key for findings: rating rank first, then table row.
/// Higher compares as more severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeverityScore {
    pub rating_rank: u8,
    pub row: u8,
}

impl SeverityScore {
    pub fn rating(self) -> RatingLevel {
        RatingLevel::from_rank(self.rating_rank).unwrap_or(RatingLevel::SeventeenPlus)
    }
}

impl fmt::Display for SeverityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (rule {})", self.rating().label(), self.row)
    }
}

/// Number of rules needed to cover every legal (category, intensity) pair.
pub const RULE_COUNT: u8 = 21;

const APP_STORE_RULES: [(u8, ContentCategory, IntensityLevel, RatingLevel); 21] = {
    use ContentCategory as C;
    use IntensityLevel::{Intense, Mild, NotApplicable as Na};
    use RatingLevel::{FourPlus, NinePlus, SeventeenPlus, TwelvePlus};
    [
        (1, C::None, Na, FourPlus),
        (2, C::CartoonOrFantasyViolence, Mild, NinePlus),
        (3, C::CartoonOrFantasyViolence, Intense, TwelvePlus),
        (4, C::HorrorOrFearContent, Mild, NinePlus),
        (5, C::HorrorOrFearContent, Intense, TwelvePlus),
        (6, C::ProfanityOrCrudeHumor, Mild, NinePlus),
        (7, C::ProfanityOrCrudeHumor, Intense, TwelvePlus),
        (8, C::MatureOrSuggestiveContent, Mild, NinePlus),
        (9, C::MatureOrSuggestiveContent, Intense, SeventeenPlus),
        (10, C::SexualContentOrNudity, Mild, TwelvePlus),
        (11, C::SexualContentOrNudity, Intense, SeventeenPlus),
        (12, C::RealisticViolence, Mild, TwelvePlus),
        (13, C::RealisticViolence, Intense, SeventeenPlus),
        (14, C::AlcoholTobaccoOrDrugUse, Mild, TwelvePlus),
        (15, C::AlcoholTobaccoOrDrugUse, Intense, SeventeenPlus),
        (16, C::MedicalOrTreatmentContent, Mild, TwelvePlus),
        (17, C::MedicalOrTreatmentContent, Intense, SeventeenPlus),
        (18, C::SimulatedGambling, Mild, TwelvePlus),
        (19, C::SimulatedGambling, Intense, SeventeenPlus),
        (20, C::GamblingOrContests, Na, SeventeenPlus),
        (21, C::UnrestrictedWebAccess, Na, SeventeenPlus),
    ]
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolicyTable {
    rules: Vec<PolicyRule>,
    source: String,
    #[serde(skip)]
    index: BTreeMap<(ContentCategory, IntensityLevel), usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyDocument {
    rules: Vec<RawRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    row: u8,
    category: String,
    intensity: String,
    rating: String,
}

/// Where a policy table comes from.
#[derive(Debug, Clone, Copy)]
pub enum PolicySource<'a> {
    Builtin,
    Json { text: &'a str, origin: &'a str },
}

/// Load and validate a policy table.
pub fn load_policy(source: PolicySource<'_>) -> Result<PolicyTable, PolicyError> {
    match source {
        PolicySource::Builtin => Ok(PolicyTable::builtin()),
        PolicySource::Json { text, origin } => PolicyTable::from_json(text, origin),
    }
}

impl PolicyTable {
    /// The App Store table.
    pub fn builtin() -> Self {
        let rules = APP_STORE_RULES
            .iter()
            .map(|&(row, category, intensity, rating)| PolicyRule {
                row,
                category,
                intensity,
                rating,
            })
            .collect();
        Self::validated(rules, "builtin".into()).expect("builtin table is valid")
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, PolicyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PolicyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self, PolicyError> {
        let doc: PolicyDocument = serde_json::from_str(text).map_err(|e| PolicyError::Malformed(e.to_string()))?;
        let mut rules = Vec::with_capacity(doc.rules.len());
        for raw in doc.rules {
            let category = ContentCategory::from_label(&raw.category)
                .ok_or_else(|| PolicyError::UnknownCategory(raw.category.clone()))?;
            rules.push(PolicyRule {
                row: raw.row,
                category,
                intensity: raw.intensity.parse()?,
                rating: raw.rating.parse()?,
            });
        }
        Self::validated(rules, origin.to_string())
    }

    fn validated(mut rules: Vec<PolicyRule>, source: String) -> Result<Self, PolicyError> {
        let mut rows = BTreeSet::new();
        let mut index: BTreeMap<(ContentCategory, IntensityLevel), usize> = BTreeMap::new();
        rules.sort_by_key(|r| r.row);
        for (i, rule) in rules.iter().enumerate() {
            if !rule.category.is_legal(rule.intensity) {
                return Err(PolicyError::IllegalPair {
                    category: rule.category,
                    intensity: rule.intensity,
                });
            }
            if rule.row == 0 || rule.row > RULE_COUNT {
                return Err(PolicyError::RowOutOfRange {
                    row: rule.row,
                    max: RULE_COUNT,
                });
            }
            if !rows.insert(rule.row) {
                return Err(PolicyError::DuplicateRow(rule.row));
            }
            if let Some(&prev) = index.get(&(rule.category, rule.intensity)) {
                return Err(PolicyError::DuplicatePair {
                    category: rule.category,
                    intensity: rule.intensity,
                    first: rules[prev].row,
                    second: rule.row,
                });
            }
            index.insert((rule.category, rule.intensity), i);
        }
        if let Some(missing) = (1..=RULE_COUNT).find(|r| !rows.contains(r)) {
            return Err(PolicyError::MissingRow(missing));
        }
        for category in ContentCategory::ALL {
            for &intensity in category.legal_intensities() {
                if !index.contains_key(&(category, intensity)) {
                    return Err(PolicyError::Uncovered { category, intensity });
                }
            }
        }
        Ok(Self { rules, source, index })
    }

    /// Rules sorted by row.
    pub fn rules(&self) -> &[PolicyRule] {
        &self.rules
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Categories referenced by the table, sorted by id.
    pub fn categories(&self) -> Vec<ContentCategory> {
        let set: BTreeSet<_> = self.rules.iter().map(|r| r.category).collect();
        set.into_iter().collect()
    }

    pub fn rule_for(&self, category: ContentCategory, intensity: IntensityLevel) -> Result<&PolicyRule, PolicyError> {
        self.index
            .get(&(category, intensity))
            .map(|&i| &self.rules[i])
            .ok_or(PolicyError::IllegalPair { category, intensity })
    }

    pub fn lookup_rating(
        &self,
        category: ContentCategory,
        intensity: IntensityLevel,
    ) -> Result<RatingLevel, PolicyError> {
        self.rule_for(category, intensity).map(|r| r.rating)
    }

    pub fn severity_of(
        &self,
        category: ContentCategory,
        intensity: IntensityLevel,
    ) -> Result<SeverityScore, PolicyError> {
        self.rule_for(category, intensity).map(|r| SeverityScore {
            rating_rank: r.rating.rank(),
            row: r.row,
        })
    }

    /// Serialize in the policy file format.
    pub fn to_json(&self) -> String {
        let rules: Vec<_> = self
            .rules
            .iter()
            .map(|r| {
                serde_json::json!({
                    "row": r.row,
                    "category": r.category.label(),
                    "intensity": r.intensity.as_str(),
                    "rating": r.rating.label(),
                })
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "rules": rules })).expect("policy serializes")
    }
}

/// The highest rating in `ratings`; an empty list means no mature content (4+).
pub fn combine_ratings<I>(ratings: I) -> RatingLevel
where
    I: IntoIterator<Item = RatingLevel>,
{
    ratings.into_iter().max().unwrap_or(RatingLevel::FourPlus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use ContentCategory as C;
    use IntensityLevel::*;
    use RatingLevel::*;

    #[test]
    fn builtin_has_21_rules() {
        let table = load_policy(PolicySource::Builtin).unwrap();
        assert_eq!(table.rules().len(), 21);
        assert_eq!(table.source(), "builtin");
        let rows: Vec<u8> = table.rules().iter().map(|r| r.row).collect();
        assert_eq!(rows, (1..=21).collect::<Vec<_>>());
    }

    #[test]
    fn category_vocabulary() {
        assert_eq!(ContentCategory::ALL.len(), 12);
        for (i, c) in ContentCategory::ALL.iter().enumerate() {
            assert_eq!(c.id() as usize, i);
            assert_eq!(ContentCategory::from_id(c.id()), Some(*c));
            assert_eq!(ContentCategory::from_label(c.label()), Some(*c));
        }
        let insensitive: Vec<_> = ContentCategory::ALL
            .into_iter()
            .filter(|c| !c.intensity_sensitive())
            .collect();
        assert_eq!(
            insensitive,
            vec![C::None, C::GamblingOrContests, C::UnrestrictedWebAccess]
        );
        assert_eq!(
            ContentCategory::from_label("Alcohol tobacco or drug use"),
            Some(C::AlcoholTobaccoOrDrugUse)
        );
        assert_eq!(ContentCategory::from_id(12), None);
    }

    #[test]
    fn title_case() {
        assert_eq!(C::CartoonOrFantasyViolence.title(), "Cartoon or Fantasy Violence");
        assert_eq!(C::SimulatedGambling.title(), "Simulated Gambling");
    }

    #[test]
    fn lookup_examples() {
        let t = PolicyTable::builtin();
        assert_eq!(t.lookup_rating(C::CartoonOrFantasyViolence, Mild).unwrap(), NinePlus);
        assert_eq!(
            t.lookup_rating(C::SexualContentOrNudity, Intense).unwrap(),
            SeventeenPlus
        );
        assert_eq!(t.lookup_rating(C::None, NotApplicable).unwrap(), FourPlus);
        assert_eq!(
            t.lookup_rating(C::UnrestrictedWebAccess, NotApplicable).unwrap(),
            SeventeenPlus
        );
        assert!(matches!(
            t.lookup_rating(C::GamblingOrContests, Mild),
            Err(PolicyError::IllegalPair { .. })
        ));
        assert!(t.lookup_rating(C::RealisticViolence, NotApplicable).is_err());
    }

    #[test]
    fn severity_examples() {
        let t = PolicyTable::builtin();
        let s = |c, i| t.severity_of(c, i).unwrap();
        assert_eq!(s(C::None, NotApplicable), SeverityScore { rating_rank: 0, row: 1 });
        assert_eq!(
            s(C::RealisticViolence, Intense),
            SeverityScore {
                rating_rank: 3,
                row: 13
            }
        );
        assert_eq!(
            s(C::HorrorOrFearContent, Mild),
            SeverityScore { rating_rank: 1, row: 4 }
        );
        assert_eq!(
            s(C::HorrorOrFearContent, Intense),
            SeverityScore { rating_rank: 2, row: 5 }
        );
        assert!(s(C::HorrorOrFearContent, Mild) < s(C::HorrorOrFearContent, Intense));
    }

    #[test]
    fn severity_total_order_groups_by_rating() {
        let t = PolicyTable::builtin();
        let mut scores: Vec<(SeverityScore, RatingLevel)> = t
            .rules()
            .iter()
            .map(|r| (t.severity_of(r.category, r.intensity).unwrap(), r.rating))
            .collect();
        // brute force: every pair is strictly ordered one way or the other
        for a in &scores {
            for b in &scores {
                if a.0 != b.0 {
                    assert!((a.0 < b.0) ^ (b.0 < a.0));
                    assert_ne!(a.0.row, b.0.row);
                }
            }
        }
        scores.sort();
        let ranks: Vec<u8> = scores.iter().map(|(_, r)| r.rank()).collect();
        assert!(ranks.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn monotone_in_intensity() {
        let t = PolicyTable::builtin();
        for c in ContentCategory::ALL.into_iter().filter(|c| c.intensity_sensitive()) {
            assert!(t.lookup_rating(c, Intense).unwrap() >= t.lookup_rating(c, Mild).unwrap());
        }
    }

    #[test]
    fn json_round_trip_and_reordering() {
        let t = PolicyTable::builtin();
        let json = t.to_json();
        let back = PolicyTable::from_json(&json, "mem").unwrap();
        assert_eq!(back.rules(), t.rules());

        let mut doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        doc["rules"].as_array_mut().unwrap().reverse();
        let reordered = PolicyTable::from_json(&doc.to_string(), "mem").unwrap();
        assert_eq!(reordered.rules(), t.rules());
    }

    fn doc_without(row: u8) -> serde_json::Value {
        let mut doc: serde_json::Value = serde_json::from_str(&PolicyTable::builtin().to_json()).unwrap();
        doc["rules"].as_array_mut().unwrap().retain(|r| r["row"] != row);
        doc
    }

    #[test]
    fn missing_row() {
        let doc = doc_without(20);
        let err = PolicyTable::from_json(&doc.to_string(), "mem").unwrap_err();
        assert!(matches!(err, PolicyError::MissingRow(20)));
        assert!(err.to_string().contains("missing row"));
    }

    #[test]
    fn duplicate_pair() {
        let mut doc = doc_without(11);
        doc["rules"].as_array_mut().unwrap().push(serde_json::json!({
            "row": 11, "category": "Sexual content or nudity", "intensity": "mild", "rating": "12+"
        }));
        let err = PolicyTable::from_json(&doc.to_string(), "mem").unwrap_err();
        assert!(matches!(
            err,
            PolicyError::DuplicatePair {
                first: 10,
                second: 11,
                ..
            }
        ));
        assert!(err.to_string().contains("duplicate pair"));
    }

    #[test]
    fn bad_documents() {
        assert!(matches!(
            PolicyTable::from_json("{rules: ", "mem"),
            Err(PolicyError::Malformed(_))
        ));
        let mut doc = doc_without(21);
        doc["rules"].as_array_mut().unwrap().push(serde_json::json!({
            "row": 21, "category": "Loot boxes", "intensity": "na", "rating": "17+"
        }));
        assert!(matches!(
            PolicyTable::from_json(&doc.to_string(), "mem"),
            Err(PolicyError::UnknownCategory(_))
        ));
        let mut doc = doc_without(21);
        doc["rules"].as_array_mut().unwrap().push(serde_json::json!({
            "row": 21, "category": "Unrestricted web access", "intensity": "mild", "rating": "17+"
        }));
        assert!(matches!(
            PolicyTable::from_json(&doc.to_string(), "mem"),
            Err(PolicyError::IllegalPair { .. })
        ));
        let mut doc = doc_without(21);
        doc["rules"].as_array_mut().unwrap().push(serde_json::json!({
            "row": 21, "category": "Unrestricted web access", "intensity": "na", "rating": "18+"
        }));
        assert!(matches!(
            PolicyTable::from_json(&doc.to_string(), "mem"),
            Err(PolicyError::UnknownRating(_))
        ));
    }

    #[test]
    fn combine_examples() {
        assert_eq!(combine_ratings([NinePlus, SeventeenPlus, TwelvePlus]), SeventeenPlus);
        assert_eq!(combine_ratings(Vec::<RatingLevel>::new()), FourPlus);
        for r in RatingLevel::ALL {
            assert_eq!(combine_ratings([r]), r);
        }
    }

    fn rating() -> impl Strategy<Value = RatingLevel> {
        (0u8..4).prop_map(|r| RatingLevel::from_rank(r).unwrap())
    }

    proptest! {
        #[test]
        fn combine_is_fold_max(mut xs in prop::collection::vec(rating(), 0..12), seed in any::<u64>()) {
            let folded = xs.iter().fold(FourPlus, |acc, &r| if r.rank() > acc.rank() { r } else { acc });
            prop_assert_eq!(combine_ratings(xs.clone()), folded);
            let mut doubled = xs.clone();
            doubled.extend(xs.iter().copied());
            prop_assert_eq!(combine_ratings(doubled), folded);
            use rand::{seq::SliceRandom, SeedableRng};
            xs.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(combine_ratings(xs), folded);
        }
    }
}
