use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// How description text and screenshots are combined into model requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionStrategy {
    /// One rating request over the description alone.
    DescriptionOnly,
    /// One rating request over every screenshot, no description.
    ScreenshotOnly,
    /// First screenshot plus description, no content extraction.
    BasicFusion,
    /// Caption of the top-ranked screenshot appended to the description.
    ImageCaptionFusion,
    /// Content extraction on all screenshots, then every screenshot plus description.
    GlobalCot,
    /// Content extraction and ranking, then the top-k screenshots plus description.
    SelectiveCot,
    /// Like `SelectiveCot` but rates with a random screenshot outside the top-k.
    RandomAblation,
    /// Experimental: content extraction on the description, then first screenshot.
    TextCotImage,
    /// Experimental: screenshot ranking plus content extraction on the description.
    ImageSelectTextCot,
}

impl FusionStrategy {
    pub const ALL: [FusionStrategy; 9] = [
        FusionStrategy::DescriptionOnly,
        FusionStrategy::ScreenshotOnly,
        FusionStrategy::BasicFusion,
        FusionStrategy::ImageCaptionFusion,
        FusionStrategy::GlobalCot,
        FusionStrategy::SelectiveCot,
        FusionStrategy::RandomAblation,
        FusionStrategy::TextCotImage,
        FusionStrategy::ImageSelectTextCot,
    ];

    /// The four multimodal fusion strategies compared side by side.
    pub const FUSION: [FusionStrategy; 4] = [
        FusionStrategy::BasicFusion,
        FusionStrategy::ImageCaptionFusion,
        FusionStrategy::GlobalCot,
        FusionStrategy::SelectiveCot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FusionStrategy::DescriptionOnly => "description-only",
            FusionStrategy::ScreenshotOnly => "screenshot-only",
            FusionStrategy::BasicFusion => "basic-fusion",
            FusionStrategy::ImageCaptionFusion => "image-caption-fusion",
            FusionStrategy::GlobalCot => "global-cot",
            FusionStrategy::SelectiveCot => "selective-cot",
            FusionStrategy::RandomAblation => "random-ablation",
            FusionStrategy::TextCotImage => "text-cot-image",
            FusionStrategy::ImageSelectTextCot => "image-select-text-cot",
        }
    }

    /// Row label for reports.
    pub fn display_name(self) -> &'static str {
        match self {
            FusionStrategy::DescriptionOnly => "Description-only",
            FusionStrategy::ScreenshotOnly => "Screenshot-only",
            FusionStrategy::BasicFusion => "Basic Fusion",
            FusionStrategy::ImageCaptionFusion => "Image-Caption Fusion",
            FusionStrategy::GlobalCot => "Global CoT Fusion",
            FusionStrategy::SelectiveCot => "Selective CoT Fusion",
            FusionStrategy::RandomAblation => "w/o CoT Image",
            FusionStrategy::TextCotImage => "Text understanding + Image",
            FusionStrategy::ImageSelectTextCot => "Image selection + Text understanding",
        }
    }

    pub fn modality(self) -> &'static str {
        match self {
            FusionStrategy::DescriptionOnly => "Description-only",
            FusionStrategy::ScreenshotOnly => "Screenshot-only",
            _ => "Screenshot+Description",
        }
    }

    pub fn needs_screenshots(self) -> bool {
        self != FusionStrategy::DescriptionOnly
    }

    /// Whether the strategy runs per-screenshot content extraction first.
    pub fn uses_extraction(self) -> bool {
        matches!(
            self,
            FusionStrategy::ImageCaptionFusion
                | FusionStrategy::GlobalCot
                | FusionStrategy::SelectiveCot
                | FusionStrategy::RandomAblation
                | FusionStrategy::ImageSelectTextCot
        )
    }

    pub fn is_experimental(self) -> bool {
        matches!(self, FusionStrategy::TextCotImage | FusionStrategy::ImageSelectTextCot)
    }
}

impl fmt::Display for FusionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown strategy {0:?}; expected one of: {}", FusionStrategy::ALL.map(|s| s.name()).join(", "))]
pub struct UnknownStrategy(pub String);

impl FromStr for FusionStrategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase();
        FusionStrategy::ALL
            .into_iter()
            .find(|st| st.name() == wanted)
            .ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}
