//! Prompt rendering and response decoding.
//!
//! Every prompt ends with a strict answer-format instruction (category ids,
//! a single intensity word, or a single rating token) so that the parsers
//! below stay mechanical. Parsers are still tolerant of the surface variation
//! live models produce ("Mild.", "Rating: 12+ because ...", "17").

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{normalize_label, ContentCategory, IntensityLevel, PolicyTable, RatingLevel};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("contract violation: {0} is not intensity-sensitive")]
    IntensityInsensitive(ContentCategory),
    #[error("unparseable response: {0:?}")]
    Unparseable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Content,
    Intensity,
    Rating,
    Caption,
}

impl PromptKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::Content => "content",
            PromptKind::Intensity => "intensity",
            PromptKind::Rating => "rating",
            PromptKind::Caption => "caption",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptText {
    pub text: String,
    pub kind: PromptKind,
    pub expects_image: bool,
}

const FORMAT_REMINDER: &str = "Your previous answer could not be read. Answer again, strictly in the requested format.";

impl PromptText {
    /// Same prompt with a reminder appended, used when re-asking after an
    /// unparseable answer. The changed text gives the retry its own cache key.
    pub fn with_format_reminder(&self, attempt: u32) -> PromptText {
        PromptText {
            text: format!("{}\n\n{} (attempt {})", self.text, FORMAT_REMINDER, attempt + 1),
            ..self.clone()
        }
    }
}

fn content_options(table: &PolicyTable) -> String {
    let mut out = String::new();
    for category in table.categories() {
        let _ = writeln!(out, "{}. {}", category.id(), category.label());
    }
    out
}

/// Maturity content prompt for one screenshot image.
pub fn render_content_prompt(table: &PolicyTable) -> PromptText {
    let text = format!(
        "Identify the maturity content (ID from 0 to 11) shown in the screenshot image, \
         based on the following options from the App Store maturity rating policy:\n\
         {}\
         Respond with the matching ID(s) only, separated by commas (for example: 2, 5). \
         If the screenshot contains none of the listed content, respond with 0.",
        content_options(table)
    );
    PromptText {
        text,
        kind: PromptKind::Content,
        expects_image: true,
    }
}

/// Maturity content prompt applied to the app description instead of an image.
pub fn render_text_content_prompt(table: &PolicyTable, description: &str) -> PromptText {
    let text = format!(
        "Identify the maturity content (ID from 0 to 11) described in the app description below, \
         based on the following options from the App Store maturity rating policy:\n\
         {}\
         App description:\n\"\"\"\n{}\n\"\"\"\n\
         Respond with the matching ID(s) only, separated by commas (for example: 2, 5). \
         If the description mentions none of the listed content, respond with 0.",
        content_options(table),
        description_or_marker(description)
    );
    PromptText {
        text,
        kind: PromptKind::Content,
        expects_image: false,
    }
}

const INTENSITY_ANSWER: &str = "Answer with exactly one word: mild or intense.";

/// Maturity intensity prompt for one detected category in a screenshot.
pub fn render_intensity_prompt(category: ContentCategory) -> Result<PromptText, PromptError> {
    if !category.intensity_sensitive() {
        return Err(PromptError::IntensityInsensitive(category));
    }
    Ok(PromptText {
        text: format!(
            "Please response the maturity level of content: {}, ranging from mild to intense \
             in the screenshot image. {INTENSITY_ANSWER}",
            category.title()
        ),
        kind: PromptKind::Intensity,
        expects_image: true,
    })
}

pub fn render_text_intensity_prompt(category: ContentCategory, description: &str) -> Result<PromptText, PromptError> {
    if !category.intensity_sensitive() {
        return Err(PromptError::IntensityInsensitive(category));
    }
    Ok(PromptText {
        text: format!(
            "Please response the maturity level of content: {}, ranging from mild to intense \
             in the app description below.\nApp description:\n\"\"\"\n{}\n\"\"\"\n{INTENSITY_ANSWER}",
            category.title(),
            description_or_marker(description)
        ),
        kind: PromptKind::Intensity,
        expects_image: false,
    })
}

pub const NO_DESCRIPTION: &str = "(no description provided)";

fn description_or_marker(description: &str) -> &str {
    if description.trim().is_empty() {
        NO_DESCRIPTION
    } else {
        description
    }
}

/// Inputs to the final rating prompt. `description: None` omits the
/// description section entirely (screenshot-only modality).
#[derive(Debug, Clone, Default)]
pub struct RatingPrompt<'a> {
    pub description: Option<&'a str>,
    pub screenshot_count: usize,
    pub caption: Option<&'a str>,
    pub findings: Option<&'a str>,
}

impl RatingPrompt<'_> {
    pub fn render(&self) -> PromptText {
        let mut text = String::from(
            "Classify the app into one of four age-appropriate maturity ratings \
             (4+, 9+, 12+, 17+) according to the App Store maturity rating policy",
        );
        let mut sources = Vec::new();
        match self.screenshot_count {
            0 => {}
            1 => sources.push("the attached screenshot image".to_string()),
            n => sources.push(format!("the {n} attached screenshot images")),
        }
        if self.description.is_some() {
            sources.push("the app description".into());
        }
        if self.caption.is_some() {
            sources.push("the screenshot caption".into());
        }
        if self.findings.is_some() {
            sources.push("the extracted content findings".into());
        }
        if !sources.is_empty() {
            text.push_str(", based on ");
            text.push_str(&join_and(&sources));
        }
        text.push_str(".\n");
        if let Some(description) = self.description {
            let _ = write!(
                text,
                "App description:\n\"\"\"\n{}\n\"\"\"\n",
                description_or_marker(description)
            );
        }
        if let Some(caption) = self.caption {
            let _ = write!(text, "Screenshot caption:\n\"\"\"\n{caption}\n\"\"\"\n");
        }
        if let Some(findings) = self.findings {
            let _ = write!(text, "Extracted content findings:\n{findings}\n");
        }
        text.push_str("Respond with exactly one of: 4+, 9+, 12+, 17+.");
        PromptText {
            text,
            kind: PromptKind::Rating,
            expects_image: self.screenshot_count > 0,
        }
    }
}

fn join_and(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

/// Rating prompt over a description and `screenshot_count` attached images.
pub fn render_rating_prompt(description: &str, screenshot_count: usize) -> PromptText {
    RatingPrompt {
        description: Some(description),
        screenshot_count,
        ..Default::default()
    }
    .render()
}

pub fn render_caption_prompt() -> PromptText {
    PromptText {
        text: "Write a one-paragraph factual caption of the screenshot image. Describe only \
               what is visible: the setting, characters, objects, on-screen text and actions. \
               Do not speculate beyond what is shown."
            .into(),
        kind: PromptKind::Caption,
        expects_image: true,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedContentResponse {
    pub categories: Vec<ContentCategory>,
    pub raw: String,
}

/// Decode a content answer. Standalone integers 0..=11 are read as category
/// ids; when none are present, category labels are matched instead.
pub fn parse_content_response(raw: &str, table: &PolicyTable) -> Result<ParsedContentResponse, PromptError> {
    let known: BTreeSet<ContentCategory> = table.categories().into_iter().collect();

    let mut found: Vec<ContentCategory> = raw
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|tok| !tok.is_empty() && tok.bytes().all(|b| b.is_ascii_digit()))
        .filter_map(|tok| tok.parse::<u8>().ok())
        .filter_map(ContentCategory::from_id)
        .filter(|c| known.contains(c))
        .collect();

    if found.is_empty() {
        let haystack = format!(" {} ", normalize_label(raw));
        let mut hits: Vec<(usize, ContentCategory)> = known
            .iter()
            .filter_map(|&c| {
                let needle = format!(" {} ", normalize_label(c.label()));
                haystack.find(&needle).map(|pos| (pos, c))
            })
            .collect();
        hits.sort();
        found = hits.into_iter().map(|(_, c)| c).collect();
    }

    let mut seen = BTreeSet::new();
    found.retain(|c| seen.insert(*c));
    if found.len() > 1 {
        found.retain(|&c| c != ContentCategory::None);
    }
    if found.is_empty() {
        return Err(PromptError::Unparseable(raw.to_string()));
    }
    Ok(ParsedContentResponse {
        categories: found,
        raw: raw.to_string(),
    })
}

pub fn parse_intensity_response(raw: &str) -> Result<IntensityLevel, PromptError> {
    let lower = raw.to_lowercase();
    match (lower.contains("mild"), lower.contains("intense")) {
        (true, false) => Ok(IntensityLevel::Mild),
        (false, true) => Ok(IntensityLevel::Intense),
        _ => Err(PromptError::Unparseable(raw.to_string())),
    }
}

fn rating_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?:^|[^0-9A-Za-z+\-.])(4|9|12|17)(?:\+|[.,;:!?)\]"'\s]*$|[.,;:!?)\]"'])"#).expect("valid regex")
    })
}

/// First rating token wins. "17+" and a bare "17" followed by punctuation or
/// the end of the text are both accepted.
pub fn parse_rating_response(raw: &str) -> Result<RatingLevel, PromptError> {
    let caps = rating_regex()
        .captures(raw)
        .ok_or_else(|| PromptError::Unparseable(raw.to_string()))?;
    let label = format!("{}+", &caps[1]);
    RatingLevel::from_label(&label).ok_or_else(|| PromptError::Unparseable(raw.to_string()))
}

/// Markdown listing every prompt exactly as sent, for auditing.
pub fn prompt_catalog(table: &PolicyTable) -> String {
    let mut out = String::from("# Prompt catalog\n\n");
    out.push_str(
        "Generated by `cargo run --example render_prompts`. Each block is the exact text \
         sent to the model.\n\n",
    );
    let mut section = |title: &str, prompt: &PromptText| {
        let _ = write!(
            out,
            "## {title}\n\nkind: `{}`, attaches image: `{}`\n\n```text\n{}\n```\n\n",
            prompt.kind.as_str(),
            prompt.expects_image,
            prompt.text
        );
    };
    section("Maturity content (per screenshot)", &render_content_prompt(table));
    section(
        "Maturity intensity (per detected category, example)",
        &render_intensity_prompt(ContentCategory::CartoonOrFantasyViolence).expect("sensitive category"),
    );
    section(
        "Maturity rating (description + one screenshot)",
        &render_rating_prompt("<app description>", 1),
    );
    section(
        "Maturity rating (description only)",
        &render_rating_prompt("<app description>", 0),
    );
    section(
        "Maturity rating (screenshots only)",
        &RatingPrompt {
            description: None,
            screenshot_count: 3,
            ..Default::default()
        }
        .render(),
    );
    section(
        "Maturity rating (description + caption, text only)",
        &RatingPrompt {
            description: Some("<app description>"),
            caption: Some("<caption>"),
            ..Default::default()
        }
        .render(),
    );
    section("Screenshot caption", &render_caption_prompt());
    section(
        "Maturity content (app description)",
        &render_text_content_prompt(table, "<app description>"),
    );
    section(
        "Maturity intensity (app description, example)",
        &render_text_intensity_prompt(ContentCategory::CartoonOrFantasyViolence, "<app description>")
            .expect("sensitive category"),
    );
    out.trim_end().to_string() + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicyTable;
    use proptest::prelude::*;
    use ContentCategory as C;

    #[test]
    fn content_prompt_lists_all_categories() {
        let table = PolicyTable::builtin();
        let p = render_content_prompt(&table);
        assert_eq!(p.kind, PromptKind::Content);
        assert!(p.expects_image);
        for c in ContentCategory::ALL {
            assert!(p.text.contains(&format!("{}. {}\n", c.id(), c.label())), "{c}");
        }
        assert!(p.text.contains("ID(s) only"));
        assert_eq!(p, render_content_prompt(&table));
    }

    #[test]
    fn content_prompt_ignores_rule_order() {
        let table = PolicyTable::builtin();
        let mut doc: serde_json::Value = serde_json::from_str(&table.to_json()).unwrap();
        doc["rules"].as_array_mut().unwrap().reverse();
        let shuffled = PolicyTable::from_json(&doc.to_string(), "reordered.json").unwrap();
        assert_eq!(
            render_content_prompt(&table).text,
            render_content_prompt(&shuffled).text
        );
    }

    #[test]
    fn intensity_prompt_template() {
        let p = render_intensity_prompt(C::CartoonOrFantasyViolence).unwrap();
        assert!(p.text.contains("Cartoon or Fantasy Violence"));
        assert!(p.text.contains("mild to intense"));
        assert!(p.text.starts_with(
            "Please response the maturity level of content: Cartoon or Fantasy Violence, \
             ranging from mild to intense in the screenshot image."
        ));
        assert_eq!(
            render_intensity_prompt(C::None),
            Err(PromptError::IntensityInsensitive(C::None))
        );
        assert!(render_intensity_prompt(C::GamblingOrContests).is_err());

        let expected = format!(
            "Please response the maturity level of content: {}, ranging from mild to intense \
             in the screenshot image. Answer with exactly one word: mild or intense.",
            "Simulated Gambling"
        );
        assert_eq!(render_intensity_prompt(C::SimulatedGambling).unwrap().text, expected);
    }

    #[test]
    fn rating_prompt_variants() {
        let one = render_rating_prompt("A racing game.", 1);
        assert!(one.expects_image);
        assert!(one
            .text
            .contains("the attached screenshot image and the app description"));
        for r in ["4+", "9+", "12+", "17+"] {
            assert!(one.text.contains(r));
        }
        assert!(one.text.contains("A racing game."));

        let none = render_rating_prompt("A racing game.", 0);
        assert!(!none.expects_image);
        assert!(!none.text.contains("screenshot"));

        let empty = render_rating_prompt("", 2);
        assert!(empty.text.contains(NO_DESCRIPTION));
        assert!(empty.text.contains("the 2 attached screenshot images"));

        let shots_only = RatingPrompt {
            description: None,
            screenshot_count: 3,
            ..Default::default()
        }
        .render();
        assert!(!shots_only.text.contains("App description"));
    }

    #[test]
    fn caption_prompt_has_no_rating_vocabulary() {
        let p = render_caption_prompt();
        assert_eq!(p, render_caption_prompt());
        let lower = p.text.to_lowercase();
        for word in [
            "4+", "9+", "12+", "17+", "matur", "rating", "age-", "ages", "violence", "intens",
        ] {
            assert!(!lower.contains(word), "caption prompt leaks {word:?}");
        }
        for c in ContentCategory::ALL.iter().skip(1) {
            assert!(!lower.contains(&c.label().to_lowercase()));
        }
    }

    #[test]
    fn parse_content_examples() {
        let t = PolicyTable::builtin();
        let p = parse_content_response("2, 5", &t).unwrap();
        assert_eq!(p.categories, vec![C::HorrorOrFearContent, C::SexualContentOrNudity]);
        let p = parse_content_response("The image shows Cartoon or Fantasy Violence.", &t).unwrap();
        assert_eq!(p.categories, vec![C::CartoonOrFantasyViolence]);
        assert!(matches!(
            parse_content_response("I cannot tell", &t),
            Err(PromptError::Unparseable(_))
        ));
        // None is dropped when other content co-occurs; duplicates collapse
        let p = parse_content_response("0, 6, 6", &t).unwrap();
        assert_eq!(p.categories, vec![C::RealisticViolence]);
        assert_eq!(parse_content_response("0", &t).unwrap().categories, vec![C::None]);
        // out-of-range ids are ignored
        assert!(parse_content_response("42", &t).is_err());
        // "simulated gambling" must not also match "gambling or contests"
        let p = parse_content_response("Simulated gambling", &t).unwrap();
        assert_eq!(p.categories, vec![C::SimulatedGambling]);
    }

    #[test]
    fn parse_intensity_examples() {
        assert_eq!(parse_intensity_response("intense"), Ok(IntensityLevel::Intense));
        assert_eq!(parse_intensity_response("Mild."), Ok(IntensityLevel::Mild));
        assert!(parse_intensity_response("somewhere between mild and intense").is_err());
        assert!(parse_intensity_response("moderate").is_err());
    }

    #[test]
    fn parse_rating_examples() {
        use RatingLevel::*;
        assert_eq!(parse_rating_response("17+"), Ok(SeventeenPlus));
        assert_eq!(
            parse_rating_response("Rating: 12+ because of mild violence"),
            Ok(TwelvePlus)
        );
        assert!(parse_rating_response("PG-13").is_err());
        assert_eq!(parse_rating_response("17"), Ok(SeventeenPlus));
        assert_eq!(parse_rating_response("I'd say 9."), Ok(NinePlus));
        assert_eq!(parse_rating_response("(4+)"), Ok(FourPlus));
        assert!(parse_rating_response("ages 4 and up").is_err());
        assert!(parse_rating_response("117+").is_err());
        assert!(parse_rating_response("rated 1.7").is_err());
    }

    #[test]
    fn format_reminder_changes_text_only() {
        let p = render_caption_prompt();
        let r = p.with_format_reminder(1);
        assert_ne!(p.text, r.text);
        assert!(r.text.starts_with(&p.text));
        assert_eq!((p.kind, p.expects_image), (r.kind, r.expects_image));
    }

    #[test]
    fn catalog_covers_every_kind() {
        let cat = prompt_catalog(&PolicyTable::builtin());
        for kind in ["`content`", "`intensity`", "`rating`", "`caption`"] {
            assert!(cat.contains(kind));
        }
    }

    proptest! {
        #[test]
        fn canonical_labels_round_trip(rank in 0u8..4, id in 0u8..12, intense in any::<bool>()) {
            let r = RatingLevel::from_rank(rank).unwrap();
            prop_assert_eq!(parse_rating_response(r.label()), Ok(r));
            let c = ContentCategory::from_id(id).unwrap();
            let t = PolicyTable::builtin();
            prop_assert_eq!(parse_content_response(&id.to_string(), &t).unwrap().categories, vec![c]);
            prop_assert_eq!(parse_content_response(c.label(), &t).unwrap().categories, vec![c]);
            let level = if intense { IntensityLevel::Intense } else { IntensityLevel::Mild };
            prop_assert_eq!(parse_intensity_response(level.as_str()), Ok(level));
        }

        #[test]
        fn content_parse_never_empty(raw in ".{0,40}") {
            if let Ok(p) = parse_content_response(&raw, &PolicyTable::builtin()) {
                prop_assert!(!p.categories.is_empty());
                if p.categories.contains(&ContentCategory::None) {
                    prop_assert_eq!(p.categories.len(), 1);
                }
            }
        }
    }
}
